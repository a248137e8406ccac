#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fsp() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fsp"));
    cmd.env_remove("FSP_SEED");
    cmd
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

/// Model stub speaking the line protocol: replies `x1 + 0.5·x2` per query line.
pub fn model_stub(dir: &Path) -> Vec<String> {
    let script = write(
        dir,
        "model.sh",
        r#"read dim
echo OK
batch=""
while IFS= read -r line; do
  if [ -z "$line" ]; then
    printf '%s' "$batch" | awk -F, '{ printf "%.17g\n", $1 + 0.5 * $2 }'
    batch=""
  else
    batch="$batch$line
"
  fi
done
"#,
    );
    vec!["sh".into(), script.to_string_lossy().into_owned()]
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn read_column(path: &Path) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.parse().unwrap()).collect()
}

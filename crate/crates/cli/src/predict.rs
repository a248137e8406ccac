use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use fsp::artifact::EstimatorArtifact;
use fsp::data::{load_csv, CsvSchema};

use crate::error::{config_err, runtime_err, CliResult};

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Estimator file written by `fsp personalize`.
    #[arg(long)]
    estimator: PathBuf,
    /// CSV with one column per covariate.
    #[arg(long)]
    queries: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: PredictArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.estimator)
        .map_err(|e| config_err(format!("cannot read {}: {e}", args.estimator.display())))?;
    let artifact = EstimatorArtifact::from_json(&text).map_err(config_err)?;
    if let Some(note) = &artifact.reproducibility_note {
        eprintln!("note: {note}");
    }

    let raw = std::fs::read(&args.queries).map_err(|e| config_err(format!("cannot read {}: {e}", args.queries.display())))?;
    let mut body = String::new();
    if !raw.iter().all(u8::is_ascii_whitespace) {
        let schema = CsvSchema { allow_empty: true, ..CsvSchema::new(artifact.covariates.clone(), None) };
        let queries = load_csv(&args.queries, &schema).map_err(config_err)?;
        if let Some(k) = queries.points.iter().position(|x| !artifact.domain.contains(x)) {
            return Err(runtime_err(format!(
                "query row {} {:?} lies outside the domain {:?}..{:?}",
                k + 2,
                queries.points[k],
                artifact.domain.lo(),
                artifact.domain.hi()
            )));
        }
        let est = artifact.build()?;
        let predictions = est.predict_batch(&queries.points)?;
        body.push_str("prediction\n");
        for p in predictions {
            body.push_str(&format!("{p:?}\n"));
        }
    }

    match &args.out {
        Some(path) => std::fs::write(path, body).map_err(|e| runtime_err(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout().write_all(body.as_bytes()).map_err(runtime_err),
    }
}

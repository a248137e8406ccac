use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fsp::data::{load_csv, CsvSchema};
use fsp::simulation::{mce, mse};

use crate::error::{config_err, CliResult};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Mse,
    Mce,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum)]
    metric: MetricArg,
    #[arg(long, default_value = "prediction")]
    predictions_column: String,
    #[arg(long, default_value = "y")]
    truth_column: String,
}

fn column(path: &Path, name: &str) -> CliResult<Vec<f64>> {
    let data = load_csv(path, &CsvSchema::new([name], None)).map_err(config_err)?;
    Ok(data.points.into_iter().map(|x| x[0]).collect())
}

/// `%g`-style rendering with six significant digits.
pub fn format_significant(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: String| if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim(format!("{v:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

pub fn run(args: EvalArgs) -> CliResult<()> {
    let p = column(&args.predictions, &args.predictions_column)?;
    let t = column(&args.truth, &args.truth_column)?;
    if p.len() != t.len() {
        return Err(config_err(format!("{} has {} rows but {} has {}", args.predictions.display(), p.len(), args.truth.display(), t.len())));
    }
    let value = match args.metric {
        MetricArg::Mse => mse(&p, &t)?,
        MetricArg::Mce => mce(&p, &t)?,
    };
    println!("{}", format_significant(value));
    Ok(())
}

use std::fmt;

use exmex::prelude::*;

use crate::error::{FspError, Result};

/// A parsed arithmetic expression over the covariates.
///
/// Variables resolve against the covariate names first, then against the
/// positional aliases `x1 .. xd`.
#[derive(Clone)]
pub struct Expression {
    source: String,
    flat: FlatEx<f64>,
    positions: Vec<usize>,
    dim: usize,
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Expression").field("source", &self.source).field("dim", &self.dim).finish()
    }
}

pub fn positional_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("x{j}")).collect()
}

impl Expression {
    pub fn parse(source: &str, covariates: &[String]) -> Result<Self> {
        let flat = exmex::parse::<f64>(source).map_err(|e| FspError::Expression(format!("{source:?}: {e}")))?;
        let dim = covariates.len();
        let positions = flat
            .var_names()
            .iter()
            .map(|name| {
                if let Some(p) = covariates.iter().position(|c| c == name) {
                    return Ok(p);
                }
                name.strip_prefix('x')
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|k| (1..=dim).contains(k))
                    .map(|k| k - 1)
                    .ok_or_else(|| FspError::Expression(format!("{source:?}: unknown variable {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Expression { source: source.to_string(), flat, positions, dim })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(FspError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let vars: Vec<f64> = self.positions.iter().map(|&p| x[p]).collect();
        self.flat
            .eval(&vars)
            .map_err(|e| FspError::Expression(format!("{:?}: {e}", self.source)))
    }
}

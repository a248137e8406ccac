//! CSV ingestion for labeled samples, unlabeled pools and query sets.

use std::path::Path;

use crate::domain::LabeledSample;
use crate::error::{FspError, Result};

/// Which columns to read. Rows are numbered as file lines: the header is row 1.
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    pub covariates: Vec<String>,
    pub response: Option<String>,
    /// Accept a file with no data rows (query files may legitimately be empty).
    pub allow_empty: bool,
}

impl CsvSchema {
    pub fn new<S: Into<String>>(covariates: impl IntoIterator<Item = S>, response: Option<&str>) -> Self {
        CsvSchema {
            covariates: covariates.into_iter().map(Into::into).collect(),
            response: response.map(str::to_string),
            allow_empty: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariates: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub responses: Option<Vec<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pairs points with responses; fails when the file had no response column.
    pub fn labeled(&self) -> Result<Vec<LabeledSample>> {
        let ys = self
            .responses
            .as_ref()
            .ok_or_else(|| FspError::InvalidParameter("dataset has no response column".into()))?;
        Ok(self.points.iter().zip(ys).map(|(x, &y)| LabeledSample::new(x.clone(), y)).collect())
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| FspError::Csv { path: path.to_path_buf(), message: e.to_string() };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let locate = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| FspError::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let cov_cols = schema.covariates.iter().map(|c| locate(c)).collect::<Result<Vec<_>>>()?;
    let resp_col = schema.response.as_deref().map(locate).transpose()?;

    let mut points = Vec::new();
    let mut responses = resp_col.map(|_| Vec::new());
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = k + 2;
        let cell = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|_| FspError::ParseCell {
                row,
                column: name.to_string(),
                value: raw.to_string(),
            })
        };
        let x = cov_cols
            .iter()
            .zip(&schema.covariates)
            .map(|(&c, name)| cell(c, name))
            .collect::<Result<Vec<_>>>()?;
        if let (Some(c), Some(ys)) = (resp_col, responses.as_mut()) {
            ys.push(cell(c, schema.response.as_deref().unwrap_or_default())?);
        }
        points.push(x);
    }
    if points.is_empty() && !schema.allow_empty {
        return Err(FspError::EmptyData);
    }
    Ok(Dataset { covariates: schema.covariates.clone(), points, responses })
}

//! Training data: an `m × n` matrix of observations with categorical entries
//! stored as level indices.

use std::io::Read;
use std::path::Path;

use crate::error::DistributionError;
use crate::feature::{FeatureKind, FeatureSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    space: FeatureSpace,
    rows: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Wraps row-major `values`; categorical entries must be valid level indices.
    pub fn new(space: FeatureSpace, values: Vec<f64>) -> Result<Self, DistributionError> {
        let n = space.len();
        if n == 0 || values.len() % n != 0 {
            return Err(DistributionError::RowLength {
                row: values.len() / n.max(1),
                expected: n,
                got: values.len() % n.max(1),
            });
        }
        let rows = values.len() / n;
        for r in 0..rows {
            for (j, feature) in space.features().iter().enumerate() {
                let v = values[r * n + j];
                let ok = match &feature.kind {
                    FeatureKind::Continuous => v.is_finite(),
                    FeatureKind::Categorical { levels } => {
                        v.fract() == 0.0 && v >= 0.0 && (v as usize) < levels.len()
                    }
                };
                if !ok {
                    return Err(match feature.kind {
                        FeatureKind::Continuous => DistributionError::BadNumber {
                            feature: feature.name.clone(),
                            row: r,
                            value: v.to_string(),
                        },
                        FeatureKind::Categorical { .. } => DistributionError::UnknownLevel {
                            feature: feature.name.clone(),
                            row: r,
                            level: v.to_string(),
                        },
                    });
                }
            }
        }
        Ok(DataMatrix { space, rows, values })
    }

    pub fn from_rows(space: FeatureSpace, rows: &[Vec<f64>]) -> Result<Self, DistributionError> {
        let n = space.len();
        if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != n) {
            return Err(DistributionError::RowLength { row: r, expected: n, got: row.len() });
        }
        Self::new(space, rows.concat())
    }

    /// Reads CSV with a header naming every feature exactly once (any column
    /// order). Numbers are parsed independently of locale; categorical cells
    /// are level names.
    pub fn from_csv<R: Read>(space: FeatureSpace, reader: R) -> Result<Self, DistributionError> {
        let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let header = csv.headers().map_err(|e| DistributionError::Csv(e.to_string()))?.clone();
        if header.len() != space.len() {
            return Err(DistributionError::Header(format!(
                "expected {} columns, found {}",
                space.len(),
                header.len()
            )));
        }
        let mut column_feature = Vec::with_capacity(header.len());
        let mut seen = vec![false; space.len()];
        for name in header.iter() {
            let j = space
                .index_of(name)
                .ok_or_else(|| DistributionError::Header(format!("unknown column `{name}`")))?;
            if std::mem::replace(&mut seen[j], true) {
                return Err(DistributionError::Header(format!("duplicate column `{name}`")));
            }
            column_feature.push(j);
        }
        let n = space.len();
        let mut values = Vec::new();
        for (r, record) in csv.records().enumerate() {
            let record = record.map_err(|e| DistributionError::Csv(e.to_string()))?;
            if record.len() != n {
                return Err(DistributionError::RowLength { row: r, expected: n, got: record.len() });
            }
            let start = values.len();
            values.resize(start + n, 0.0);
            for (cell, &j) in record.iter().zip(&column_feature) {
                let feature = &space.features()[j];
                values[start + j] = match &feature.kind {
                    FeatureKind::Continuous => cell
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| DistributionError::BadNumber {
                            feature: feature.name.clone(),
                            row: r,
                            value: cell.to_string(),
                        })?,
                    FeatureKind::Categorical { levels } => {
                        levels.iter().position(|l| l == cell).ok_or_else(|| DistributionError::UnknownLevel {
                            feature: feature.name.clone(),
                            row: r,
                            level: cell.to_string(),
                        })? as f64
                    }
                };
            }
        }
        Self::new(space, values)
    }

    pub fn from_csv_path(space: FeatureSpace, path: &Path) -> Result<Self, DistributionError> {
        let file = std::fs::File::open(path)
            .map_err(|e| DistributionError::Csv(format!("{}: {e}", path.display())))?;
        Self::from_csv(space, std::io::BufReader::new(file))
    }

    /// Writes CSV in the format accepted by [`DataMatrix::from_csv`].
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.space.names()).expect("in-memory write");
        for r in 0..self.rows {
            let cells: Vec<String> = self
                .row(r)
                .iter()
                .enumerate()
                .map(|(j, &v)| match self.space.kind(j) {
                    FeatureKind::Continuous => v.to_string(),
                    FeatureKind::Categorical { levels } => levels[v as usize].clone(),
                })
                .collect();
            w.write_record(&cells).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    pub fn feature_space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_features(&self) -> usize {
        self.space.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.space.len();
        &self.values[r * n..(r + 1) * n]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let n = self.space.len();
        self.values.iter().skip(j).step_by(n).copied()
    }
}

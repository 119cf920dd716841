//! Prediction models `f` evaluated in batches.

use serde::{Deserialize, Serialize};

use crate::discrete::TableModel;
use crate::error::PredictError;

/// A model evaluated on row-major batches of feature vectors. Categorical
/// features are passed as level indices.
pub trait Predictor: Send + Sync {
    fn n_features(&self) -> usize;

    /// One output per row of `rows` (`rows.len()` is a multiple of `n_features`).
    fn predict(&self, rows: &[f64]) -> Result<Vec<f64>, PredictError>;

    fn predict_one(&self, row: &[f64]) -> Result<f64, PredictError> {
        let out = self.predict(row)?;
        match out.as_slice() {
            [y] => Ok(*y),
            _ => Err(PredictError::LengthMismatch { expected: 1, got: out.len() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn new(intercept: f64, coefficients: Vec<f64>) -> Self {
        LinearModel { intercept, coefficients }
    }

    pub fn eval(&self, row: &[f64]) -> f64 {
        self.coefficients.iter().zip(row).fold(self.intercept, |acc, (b, x)| acc + b * x)
    }
}

fn check_shape(rows: &[f64], n: usize) -> Result<usize, PredictError> {
    if n == 0 || rows.len() % n != 0 {
        return Err(PredictError::InvalidInput {
            row: rows.len() / n.max(1),
            message: format!("batch of {} values is not a whole number of {n}-feature rows", rows.len()),
        });
    }
    Ok(rows.len() / n)
}

impl Predictor for LinearModel {
    fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    fn predict(&self, rows: &[f64]) -> Result<Vec<f64>, PredictError> {
        check_shape(rows, self.coefficients.len())?;
        Ok(rows.chunks(self.coefficients.len()).map(|r| self.eval(r)).collect())
    }
}

impl Predictor for TableModel {
    fn n_features(&self) -> usize {
        TableModel::n_features(self)
    }

    fn predict(&self, rows: &[f64]) -> Result<Vec<f64>, PredictError> {
        let n = TableModel::n_features(self);
        check_shape(rows, n)?;
        let mut cell = vec![0usize; n];
        rows.chunks(n)
            .enumerate()
            .map(|(r, row)| {
                for (j, (&v, &card)) in row.iter().zip(self.cardinalities()).enumerate() {
                    if !(v.fract() == 0.0 && v >= 0.0 && (v as usize) < card) {
                        return Err(PredictError::InvalidInput {
                            row: r,
                            message: format!("feature {j} value {v} is not a level index below {card}"),
                        });
                    }
                    cell[j] = v as usize;
                }
                Ok(self.output(&cell))
            })
            .collect()
    }
}

/// Inline model specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PredictionModel {
    Linear {
        intercept: f64,
        coefficients: Vec<f64>,
    },
    /// Outputs for every joint cell, last feature varying fastest.
    Table {
        cardinalities: Vec<usize>,
        outputs: Vec<f64>,
    },
}

impl PredictionModel {
    pub fn build(&self) -> Result<Box<dyn Predictor>, PredictError> {
        match self {
            PredictionModel::Linear { intercept, coefficients } => {
                Ok(Box::new(LinearModel::new(*intercept, coefficients.clone())))
            }
            PredictionModel::Table { cardinalities, outputs } => TableModel::new(cardinalities.clone(), outputs.clone())
                .map(|t| Box::new(t) as Box<dyn Predictor>)
                .map_err(|e| PredictError::Backend(e.to_string())),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            PredictionModel::Linear { coefficients, .. } => coefficients.len(),
            PredictionModel::Table { cardinalities, .. } => cardinalities.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_batch() {
        let m = LinearModel::new(1.0, vec![2.0, -1.0]);
        assert_eq!(m.predict(&[1.0, 1.0, 0.0, 3.0]).unwrap(), vec![2.0, -2.0]);
        assert!(m.predict(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn table_rejects_non_levels() {
        let t = TableModel::new(vec![2, 2], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.predict(&[0.0, 1.0, 1.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(t.predict(&[0.5, 1.0]), Err(PredictError::InvalidInput { row: 0, .. })));
        assert!(t.predict(&[2.0, 0.0]).is_err());
    }

    #[test]
    fn model_spec_json() {
        let spec: PredictionModel =
            serde_json::from_str(r#"{"type":"linear","intercept":0.5,"coefficients":[1,2]}"#).unwrap();
        assert_eq!(spec.n_features(), 2);
        assert_eq!(spec.build().unwrap().predict_one(&[1.0, 1.0]).unwrap(), 3.5);
    }
}

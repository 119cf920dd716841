//! Joint probability tables over all-categorical feature spaces.

use crate::data::DataMatrix;
use crate::error::DistributionError;
use crate::feature::{FeatureKind, FeatureSet, FeatureSpace};

/// Full joint distribution `P(X)` of categorical features, stored row-major
/// with the last feature varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    space: FeatureSpace,
    cardinalities: Vec<usize>,
    strides: Vec<usize>,
    probs: Vec<f64>,
}

fn cardinalities_of(space: &FeatureSpace) -> Result<Vec<usize>, DistributionError> {
    (0..space.len())
        .map(|j| match space.kind(j) {
            FeatureKind::Categorical { levels } => Ok(levels.len()),
            FeatureKind::Continuous => Err(DistributionError::Table(format!(
                "feature `{}` is continuous",
                space.name(j)
            ))),
        })
        .collect()
}

impl JointTable {
    pub fn new(space: FeatureSpace, probs: Vec<f64>) -> Result<Self, DistributionError> {
        let cardinalities = cardinalities_of(&space)?;
        let cells = cardinalities.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k));
        let cells = cells.ok_or_else(|| DistributionError::Table("table is too large".into()))?;
        if probs.len() != cells {
            return Err(DistributionError::Table(format!("expected {cells} cells, got {}", probs.len())));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(DistributionError::Table("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DistributionError::Table(format!("probabilities sum to {total}, not 1")));
        }
        let mut strides = vec![1; cardinalities.len()];
        for j in (0..cardinalities.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * cardinalities[j + 1];
        }
        Ok(JointTable { space, cardinalities, strides, probs })
    }

    /// Empirical cell frequencies.
    pub fn from_data(data: &DataMatrix) -> Result<Self, DistributionError> {
        let space = data.feature_space().clone();
        let cardinalities = cardinalities_of(&space)?;
        if data.n_rows() == 0 {
            return Err(DistributionError::TooFewRows(0));
        }
        let cells: usize = cardinalities.iter().product();
        let mut counts = vec![0.0; cells];
        let mut table = JointTable::new(space, {
            let mut p = vec![0.0; cells];
            p[0] = 1.0;
            p
        })?;
        for r in 0..data.n_rows() {
            let cell: Vec<usize> = data.row(r).iter().map(|&v| v as usize).collect();
            counts[table.index(&cell)] += 1.0;
        }
        let m = data.n_rows() as f64;
        table.probs = counts.into_iter().map(|c| c / m).collect();
        Ok(table)
    }

    pub fn feature_space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn n_cells(&self) -> usize {
        self.probs.len()
    }

    pub fn index(&self, cell: &[usize]) -> usize {
        cell.iter().zip(&self.strides).map(|(v, s)| v * s).sum()
    }

    pub fn cell(&self, mut index: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|&s| {
                let v = index / s;
                index %= s;
                v
            })
            .collect()
    }

    pub fn probability(&self, cell: &[usize]) -> f64 {
        self.probs[self.index(cell)]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// `P(X_targets | X_given = values)` as a list of (target levels in
    /// ascending feature order, probability) with zero-probability entries
    /// dropped.
    pub fn conditional(
        &self,
        targets: FeatureSet,
        given: &[(usize, usize)],
    ) -> Result<Vec<(Vec<usize>, f64)>, DistributionError> {
        let target_idx = targets.to_vec();
        let target_cards: Vec<usize> = target_idx.iter().map(|&j| self.cardinalities[j]).collect();
        let n_out: usize = target_cards.iter().product();
        let mut mass = vec![0.0; n_out];
        for (index, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let cell = self.cell(index);
            if given.iter().any(|&(j, v)| cell[j] != v) {
                continue;
            }
            let mut k = 0;
            for (&j, &card) in target_idx.iter().zip(&target_cards) {
                k = k * card + cell[j];
            }
            mass[k] += p;
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(DistributionError::ZeroProbability { given: given.to_vec() });
        }
        let mut out = Vec::new();
        for (k, m) in mass.into_iter().enumerate() {
            if m > 0.0 {
                let mut levels = vec![0; target_idx.len()];
                let mut rest = k;
                for t in (0..target_idx.len()).rev() {
                    levels[t] = rest % target_cards[t];
                    rest /= target_cards[t];
                }
                out.push((levels, m / total));
            }
        }
        Ok(out)
    }
}

/// Predictor defined by an output per joint cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TableModel {
    cardinalities: Vec<usize>,
    outputs: Vec<f64>,
}

impl TableModel {
    /// `outputs` is row-major with the last feature varying fastest.
    pub fn new(cardinalities: Vec<usize>, outputs: Vec<f64>) -> Result<Self, DistributionError> {
        let cells: usize = cardinalities.iter().product();
        if outputs.len() != cells {
            return Err(DistributionError::Table(format!("expected {cells} outputs, got {}", outputs.len())));
        }
        Ok(TableModel { cardinalities, outputs })
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn n_features(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn output(&self, cell: &[usize]) -> f64 {
        let mut k = 0;
        for (&v, &card) in cell.iter().zip(&self.cardinalities) {
            k = k * card + v;
        }
        self.outputs[k]
    }
}

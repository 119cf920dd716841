//! Multivariate Gaussian model of the continuous features, with empirical
//! level frequencies for categorical ones.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::DistributionError;
use crate::feature::{Feature, FeatureKind, FeatureSpace};

/// Fitted observational distribution.
///
/// The Gaussian block covers the continuous features only; categorical
/// features are modelled by their marginal level frequencies, independent of
/// the Gaussian block.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    space: FeatureSpace,
    continuous: Vec<usize>,
    block_index: Vec<Option<usize>>,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    regularization: f64,
    frequencies: Vec<Option<Vec<f64>>>,
}

/// Affine-Gaussian conditional: `X_T | X_G = g ~ N(offset + gain·g, covariance)`.
#[derive(Debug, Clone)]
pub struct LinearGaussian {
    pub targets: Vec<usize>,
    pub given: Vec<usize>,
    pub gain: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl LinearGaussian {
    pub fn mean_at(&self, given_values: &DVector<f64>) -> DVector<f64> {
        &self.offset + &self.gain * given_values
    }
}

/// Result of conditioning the Gaussian block on some of its features.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalGaussian {
    /// Remaining continuous features, ascending.
    pub features: Vec<usize>,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

/// Default jitter: `1e-8 · trace(Σ) / n`.
pub fn default_regularization(covariance: &DMatrix<f64>) -> f64 {
    let k = covariance.nrows();
    if k == 0 {
        return 0.0;
    }
    1e-8 * covariance.trace() / k as f64
}

/// Fits mean and maximum-likelihood covariance (plus `regularization · I`)
/// of the continuous features, and level frequencies of categorical ones.
/// `None` selects [`default_regularization`].
pub fn fit_gaussian(data: &DataMatrix, regularization: Option<f64>) -> Result<GaussianModel, DistributionError> {
    let m = data.n_rows();
    if m < 2 {
        return Err(DistributionError::TooFewRows(m));
    }
    if let Some(l) = regularization {
        if !(l.is_finite() && l >= 0.0) {
            return Err(DistributionError::InvalidRegularization(l));
        }
    }
    let space = data.feature_space().clone();
    let continuous: Vec<usize> =
        (0..space.len()).filter(|&j| !space.kind(j).is_categorical()).collect();
    let k = continuous.len();

    let mut mean = DVector::zeros(k);
    for (a, &j) in continuous.iter().enumerate() {
        mean[a] = data.column(j).sum::<f64>() / m as f64;
    }
    let mut cov = DMatrix::zeros(k, k);
    for r in 0..m {
        let row = data.row(r);
        for a in 0..k {
            let da = row[continuous[a]] - mean[a];
            for b in a..k {
                cov[(a, b)] += da * (row[continuous[b]] - mean[b]);
            }
        }
    }
    for a in 0..k {
        for b in a..k {
            cov[(a, b)] /= m as f64;
            cov[(b, a)] = cov[(a, b)];
        }
    }
    let lambda = regularization.unwrap_or_else(|| default_regularization(&cov));
    for a in 0..k {
        cov[(a, a)] += lambda;
    }

    let frequencies = (0..space.len())
        .map(|j| match space.kind(j) {
            FeatureKind::Categorical { levels } => {
                let mut f = vec![0.0; levels.len()];
                for v in data.column(j) {
                    f[v as usize] += 1.0;
                }
                f.iter_mut().for_each(|x| *x /= m as f64);
                Some(f)
            }
            FeatureKind::Continuous => None,
        })
        .collect();

    GaussianModel::assemble(space, continuous, mean, cov, lambda, frequencies)
}

impl GaussianModel {
    /// All-continuous model with given moments (no regularization added).
    pub fn new(space: FeatureSpace, mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self, DistributionError> {
        let n = space.len();
        if let Some(j) = (0..n).find(|&j| space.kind(j).is_categorical()) {
            return Err(DistributionError::NotContinuous(j));
        }
        if mean.len() != n || covariance.nrows() != n || covariance.ncols() != n {
            return Err(DistributionError::Format(format!(
                "moments must have dimension {n}, got mean {} and covariance {}x{}",
                mean.len(),
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let frequencies = vec![None; n];
        Self::assemble(space, (0..n).collect(), DVector::from_vec(mean), covariance, 0.0, frequencies)
    }

    fn assemble(
        space: FeatureSpace,
        continuous: Vec<usize>,
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        regularization: f64,
        frequencies: Vec<Option<Vec<f64>>>,
    ) -> Result<Self, DistributionError> {
        let asymmetry = (&covariance - covariance.transpose()).amax();
        if asymmetry > 1e-12 * covariance.amax().max(1.0) {
            return Err(DistributionError::Format("covariance is not symmetric".into()));
        }
        if covariance.nrows() > 0 && Cholesky::new(covariance.clone()).is_none() {
            let min_eigenvalue = SymmetricEigen::new(covariance.clone()).eigenvalues.min();
            return Err(DistributionError::NotPositiveDefinite { min_eigenvalue });
        }
        for f in frequencies.iter().flatten() {
            let total: f64 = f.iter().sum();
            if (total - 1.0).abs() > 1e-9 || f.iter().any(|&p| p < 0.0) {
                return Err(DistributionError::Format("level frequencies must sum to one".into()));
            }
        }
        let mut block_index = vec![None; space.len()];
        for (a, &j) in continuous.iter().enumerate() {
            block_index[j] = Some(a);
        }
        Ok(GaussianModel { space, continuous, block_index, mean, covariance, regularization, frequencies })
    }

    pub fn feature_space(&self) -> &FeatureSpace {
        &self.space
    }

    pub fn n_features(&self) -> usize {
        self.space.len()
    }

    /// Continuous features covered by the Gaussian block, ascending.
    pub fn continuous_features(&self) -> &[usize] {
        &self.continuous
    }

    pub fn is_continuous(&self, feature: usize) -> bool {
        self.block_index[feature].is_some()
    }

    /// Mean of the Gaussian block, in `continuous_features()` order.
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Regularized covariance of the Gaussian block.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn level_frequencies(&self, feature: usize) -> Option<&[f64]> {
        self.frequencies[feature].as_deref()
    }

    /// Mean of one continuous feature.
    pub fn feature_mean(&self, feature: usize) -> Option<f64> {
        self.block_index[feature].map(|a| self.mean[a])
    }

    fn block(&self, features: &[usize]) -> Result<Vec<usize>, DistributionError> {
        features
            .iter()
            .map(|&j| self.block_index[j].ok_or(DistributionError::UnsupportedCategorical(j)))
            .collect()
    }

    /// Affine conditional of `targets` given `given` (both continuous).
    pub fn linear_conditional(&self, targets: &[usize], given: &[usize]) -> Result<LinearGaussian, DistributionError> {
        let t = self.block(targets)?;
        let g = self.block(given)?;
        let cov = &self.covariance;
        let sub = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |r, c| cov[(rows[r], cols[c])]);
        let mu_t = DVector::from_iterator(t.len(), t.iter().map(|&a| self.mean[a]));
        let s_tt = sub(&t, &t);
        if g.is_empty() {
            return Ok(LinearGaussian {
                targets: targets.to_vec(),
                given: Vec::new(),
                gain: DMatrix::zeros(t.len(), 0),
                offset: mu_t,
                covariance: s_tt,
            });
        }
        let mu_g = DVector::from_iterator(g.len(), g.iter().map(|&a| self.mean[a]));
        let s_gg = sub(&g, &g);
        let s_gt = sub(&g, &t);
        let chol = Cholesky::<f64, Dyn>::new(s_gg)
            .ok_or_else(|| DistributionError::SingularConditioning { features: given.to_vec() })?;
        // gain = Σ_TG Σ_GG⁻¹, obtained as (Σ_GG⁻¹ Σ_GT)ᵀ
        let gain = chol.solve(&s_gt).transpose();
        let mut covariance = s_tt - &gain * &s_gt;
        symmetrize(&mut covariance);
        let offset = mu_t - &gain * mu_g;
        Ok(LinearGaussian { targets: targets.to_vec(), given: given.to_vec(), gain, offset, covariance })
    }

    /// Exact conditional distribution of the remaining continuous features
    /// given values for some continuous features.
    pub fn condition_gaussian(&self, given: &[(usize, f64)]) -> Result<ConditionalGaussian, DistributionError> {
        let mut sorted = given.to_vec();
        sorted.sort_by_key(|p| p.0);
        let given_idx: Vec<usize> = sorted.iter().map(|p| p.0).collect();
        let targets: Vec<usize> = self.continuous.iter().copied().filter(|j| !given_idx.contains(j)).collect();
        let lg = self.linear_conditional(&targets, &given_idx)?;
        let values = DVector::from_iterator(sorted.len(), sorted.iter().map(|p| p.1));
        Ok(ConditionalGaussian { features: targets, mean: lg.mean_at(&values), covariance: lg.covariance })
    }

    /// Serializes mean, covariance (row-major) and level tables as JSON.
    pub fn to_json(&self) -> String {
        let k = self.continuous.len();
        let file = ModelFile {
            features: self.space.features().to_vec(),
            regularization: self.regularization,
            continuous: self.continuous.iter().map(|&j| self.space.name(j).to_string()).collect(),
            mean: self.mean.iter().copied().collect(),
            covariance: (0..k).map(|r| (0..k).map(|c| self.covariance[(r, c)]).collect()).collect(),
            categorical: self
                .frequencies
                .iter()
                .enumerate()
                .filter_map(|(j, f)| {
                    f.as_ref().map(|f| LevelTable { feature: self.space.name(j).to_string(), frequencies: f.clone() })
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DistributionError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| DistributionError::Format(e.to_string()))?;
        let space = FeatureSpace::new(file.features).map_err(|e| DistributionError::Format(e.to_string()))?;
        let continuous: Vec<usize> = file
            .continuous
            .iter()
            .map(|name| space.index_of(name).ok_or_else(|| DistributionError::Format(format!("unknown feature `{name}`"))))
            .collect::<Result<_, _>>()?;
        let expected: Vec<usize> = (0..space.len()).filter(|&j| !space.kind(j).is_categorical()).collect();
        if continuous != expected {
            return Err(DistributionError::Format("`continuous` must list the continuous features in order".into()));
        }
        let k = continuous.len();
        if file.mean.len() != k || file.covariance.len() != k || file.covariance.iter().any(|r| r.len() != k) {
            return Err(DistributionError::Format(format!("moments must have dimension {k}")));
        }
        let mean = DVector::from_vec(file.mean);
        let covariance = DMatrix::from_fn(k, k, |r, c| file.covariance[r][c]);
        let mut frequencies = vec![None; space.len()];
        for table in file.categorical {
            let j = space
                .index_of(&table.feature)
                .ok_or_else(|| DistributionError::Format(format!("unknown feature `{}`", table.feature)))?;
            match space.kind(j) {
                FeatureKind::Categorical { levels } if levels.len() == table.frequencies.len() => {
                    frequencies[j] = Some(table.frequencies)
                }
                _ => return Err(DistributionError::Format(format!("bad level table for `{}`", table.feature))),
            }
        }
        if let Some(j) = (0..space.len()).find(|&j| space.kind(j).is_categorical() && frequencies[j].is_none()) {
            return Err(DistributionError::Format(format!("missing level table for `{}`", space.name(j))));
        }
        Self::assemble(space, continuous, mean, covariance, file.regularization, frequencies)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let k = m.nrows();
    for r in 0..k {
        for c in (r + 1)..k {
            let v = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    features: Vec<Feature>,
    regularization: f64,
    continuous: Vec<String>,
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    categorical: Vec<LevelTable>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelTable {
    feature: String,
    frequencies: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn bivariate(rho: f64) -> GaussianModel {
        GaussianModel::new(
            FeatureSpace::continuous(2),
            vec![0.0, 0.0],
            DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn two_row_mean() {
        let data = DataMatrix::from_rows(FeatureSpace::continuous(2), &[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let m = fit_gaussian(&data, Some(0.5)).unwrap();
        assert_eq!(m.mean().as_slice(), &[1.0, 1.0]);
        // ML covariance divides by m
        assert_eq!(m.covariance()[(0, 0)], 1.5);
        assert_eq!(m.covariance()[(0, 1)], 1.0);
    }

    #[test]
    fn too_few_rows_and_bad_regularization() {
        let data = DataMatrix::from_rows(FeatureSpace::continuous(1), &[vec![1.0]]).unwrap();
        assert_eq!(fit_gaussian(&data, None), Err(DistributionError::TooFewRows(1)));
        let data = DataMatrix::from_rows(FeatureSpace::continuous(1), &[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(fit_gaussian(&data, Some(-1.0)), Err(DistributionError::InvalidRegularization(_))));
    }

    #[test]
    fn constant_column_needs_regularization() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 3.0]).collect();
        let data = DataMatrix::from_rows(FeatureSpace::continuous(2), &rows).unwrap();
        match fit_gaussian(&data, Some(0.0)) {
            Err(DistributionError::NotPositiveDefinite { min_eigenvalue }) => assert!(min_eigenvalue.abs() < 1e-12),
            other => panic!("expected positive-definiteness error, got {other:?}"),
        }
        let m = fit_gaussian(&data, Some(1e-6)).unwrap();
        assert_eq!(m.covariance()[(1, 1)], 1e-6);
        assert!(fit_gaussian(&data, None).is_ok());
    }

    #[test]
    fn empty_conditioning_is_identity() {
        let m = bivariate(0.3);
        let c = m.condition_gaussian(&[]).unwrap();
        assert_eq!(c.features, vec![0, 1]);
        assert_eq!(&c.mean, m.mean());
        assert_eq!(&c.covariance, m.covariance());
    }

    #[test]
    fn diagonal_covariance_conditioning_keeps_marginals() {
        let m = GaussianModel::new(
            FeatureSpace::continuous(3),
            vec![1.0, 2.0, 3.0],
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0, 9.0])),
        )
        .unwrap();
        let c = m.condition_gaussian(&[(1, 10.0)]).unwrap();
        assert_eq!(c.features, vec![0, 2]);
        assert_eq!(c.mean.as_slice(), &[1.0, 3.0]);
        assert_eq!(c.covariance[(0, 0)], 1.0);
        assert_eq!(c.covariance[(1, 1)], 9.0);
        assert_eq!(c.covariance[(0, 1)], 0.0);
    }

    #[test]
    fn bivariate_conditioning_closed_form() {
        let c = bivariate(0.8).condition_gaussian(&[(0, 1.0)]).unwrap();
        assert!((c.mean[0] - 0.8).abs() < 1e-15);
        assert!((c.covariance[(0, 0)] - 0.36).abs() < 1e-15);
    }

    #[test]
    fn bivariate_conditioning_matches_slab_estimate() {
        // Oracle: empirical moments of X2 over joint draws with |X1 - 1| < 0.01.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let rho: f64 = 0.8;
        let mut kept = Vec::new();
        for _ in 0..1_000_000 {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let x1 = z1;
            let x2 = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
            if (x1 - 1.0).abs() < 0.01 {
                kept.push(x2);
            }
        }
        let k = kept.len() as f64;
        let mean = kept.iter().sum::<f64>() / k;
        let var = kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        let c = bivariate(rho).condition_gaussian(&[(0, 1.0)]).unwrap();
        let se_mean = (c.covariance[(0, 0)] / k).sqrt();
        let se_var = c.covariance[(0, 0)] * (2.0 / (k - 1.0)).sqrt();
        assert!((mean - c.mean[0]).abs() < 4.0 * se_mean, "{mean} vs {}", c.mean[0]);
        assert!((var - c.covariance[(0, 0)]).abs() < 4.0 * se_var, "{var} vs {}", c.covariance[(0, 0)]);
    }

    #[test]
    fn conditional_covariance_does_not_depend_on_values() {
        let m = GaussianModel::new(
            FeatureSpace::continuous(3),
            vec![0.5, -1.0, 2.0],
            DMatrix::from_row_slice(3, 3, &[2.0, 0.6, 0.3, 0.6, 1.0, 0.2, 0.3, 0.2, 1.5]),
        )
        .unwrap();
        let a = m.condition_gaussian(&[(0, 1.0), (2, -3.0)]).unwrap();
        let b = m.condition_gaussian(&[(2, 40.0), (0, -7.5)]).unwrap();
        assert_eq!(a.covariance, b.covariance);
        assert_ne!(a.mean, b.mean);
    }

    #[test]
    fn fit_recovers_known_moments() {
        let mean = [1.0, -2.0, 0.5];
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 2.0, -0.3, 0.2, -0.3, 0.8]);
        let l = Cholesky::new(cov.clone()).unwrap().unpack();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 100_000;
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            let z = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
            let x = &l * z;
            rows.push((0..3).map(|i| x[i] + mean[i]).collect::<Vec<_>>());
        }
        let data = DataMatrix::from_rows(FeatureSpace::continuous(3), &rows).unwrap();
        let fit = fit_gaussian(&data, Some(0.0)).unwrap();
        for i in 0..3 {
            let se = (cov[(i, i)] / m as f64).sqrt();
            assert!((fit.mean()[i] - mean[i]).abs() < 3.0 * se);
            for j in 0..3 {
                let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)) / m as f64).sqrt();
                assert!((fit.covariance()[(i, j)] - cov[(i, j)]).abs() < 3.0 * se);
            }
        }
    }

    #[test]
    fn categorical_features_get_frequencies() {
        let space = FeatureSpace::new(vec![
            Feature { name: "a".into(), kind: FeatureKind::Continuous },
            Feature { name: "g".into(), kind: FeatureKind::Categorical { levels: vec!["x".into(), "y".into(), "z".into()] } },
        ])
        .unwrap();
        let data = DataMatrix::from_rows(space, &[vec![1.0, 0.0], vec![2.0, 2.0], vec![3.0, 2.0], vec![4.0, 0.0]]).unwrap();
        let m = fit_gaussian(&data, None).unwrap();
        assert_eq!(m.continuous_features(), &[0]);
        assert_eq!(m.level_frequencies(1).unwrap(), &[0.5, 0.0, 0.5]);
        assert!(matches!(m.linear_conditional(&[0], &[1]), Err(DistributionError::UnsupportedCategorical(1))));
        let back = GaussianModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }
}

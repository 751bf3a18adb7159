//! Class-conditional models.
//!
//! A classification problem is a set of M conditional distributions ν_j on
//! ℝᵈ plus priors. Two families are supported: multivariate Gaussians and
//! finitely supported discrete distributions. The module provides seeded
//! sampling, log-density evaluation, the Bhattacharyya and Kullback-Leibler
//! divergences that drive the likelihood-ratio error exponents, and Monte
//! Carlo confusion-matrix estimation for elementary classifiers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::seed;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance is not symmetric positive definite: {0}")]
    BadCovariance(String),
    #[error("probability vector invalid: {0}")]
    BadProbabilities(String),
    #[error("class label {label} out of range for {m} classes")]
    LabelOutOfRange { label: usize, m: usize },
    #[error("unsupported pair: divergences need two models of the same family")]
    UnsupportedPair,
    #[error("problem invalid: {0}")]
    BadProblem(String),
}

/// Multivariate Gaussian class model.
///
/// The Cholesky factor of the covariance is cached at construction; it is
/// used both for sampling (mean + L·standard normals) and for the density.
#[derive(Debug, Clone)]
pub struct GaussianClass {
    mean: Vec<f64>,
    covariance: Matrix,
    chol: Matrix,
    log_det_cov: f64,
}

impl GaussianClass {
    pub fn new(mean: Vec<f64>, covariance: Matrix) -> Result<Self, ModelError> {
        if covariance.rows() != mean.len() || covariance.cols() != mean.len() {
            return Err(ModelError::DimensionMismatch {
                expected: mean.len(),
                got: covariance.rows(),
            });
        }
        if !mean.iter().all(|x| x.is_finite()) || !covariance.is_finite() {
            return Err(ModelError::BadCovariance("non-finite entries".into()));
        }
        let chol = linalg::cholesky(&covariance)
            .map_err(|e| ModelError::BadCovariance(e.to_string()))?;
        let log_det_cov = 2.0 * (0..chol.rows()).map(|i| chol[(i, i)].ln()).sum::<f64>();
        Ok(GaussianClass { mean, covariance, chol, log_det_cov })
    }

    /// Isotropic shorthand N(mean, σ² I).
    pub fn isotropic(mean: Vec<f64>, sigma_sq: f64) -> Result<Self, ModelError> {
        let d = mean.len();
        Self::new(mean, Matrix::identity(d).scale(sigma_sq))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        let diff = linalg::sub_vec(x, &self.mean);
        // Solve L y = diff; the quadratic form is |y|².
        let y = linalg::forward_substitute(&self.chol, &diff);
        let quad: f64 = y.iter().map(|v| v * v).sum();
        -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.log_det_cov + quad)
    }

    pub fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        out.clear();
        out.extend_from_slice(&self.mean);
        for i in 0..d {
            for k in 0..=i {
                out[i] += self.chol[(i, k)] * z[k];
            }
        }
    }
}

/// Finitely supported class model.
#[derive(Debug, Clone)]
pub struct DiscreteClass {
    support: Vec<Vec<f64>>,
    pmf: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteClass {
    pub fn new(support: Vec<Vec<f64>>, pmf: Vec<f64>) -> Result<Self, ModelError> {
        if support.is_empty() || support.len() != pmf.len() {
            return Err(ModelError::BadProbabilities(
                "support and pmf must be nonempty and equal length".into(),
            ));
        }
        let d = support[0].len();
        if support.iter().any(|p| p.len() != d) {
            return Err(ModelError::BadProbabilities("support points of mixed dimension".into()));
        }
        for i in 0..support.len() {
            for j in (i + 1)..support.len() {
                if support[i] == support[j] {
                    return Err(ModelError::BadProbabilities(format!(
                        "support points {i} and {j} coincide"
                    )));
                }
            }
        }
        if pmf.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(ModelError::BadProbabilities("pmf entries must lie in [0,1]".into()));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ModelError::BadProbabilities(format!(
                "pmf sums to {total}, not 1"
            )));
        }
        let mut cumulative = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cumulative.push(acc);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(DiscreteClass { support, pmf, cumulative })
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    fn find(&self, x: &[f64]) -> Option<usize> {
        self.support.iter().position(|p| p.as_slice() == x)
    }

    /// log pmf at x; −∞ off support.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self.find(x) {
            Some(i) if self.pmf[i] > 0.0 => self.pmf[i].ln(),
            _ => f64::NEG_INFINITY,
        }
    }

    pub fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let u: f64 = rng.gen();
        let idx = self
            .cumulative
            .iter()
            .position(|&c| u <= c)
            .unwrap_or(self.support.len() - 1);
        out.clear();
        out.extend_from_slice(&self.support[idx]);
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for (p, point) in self.pmf.iter().zip(&self.support) {
            for i in 0..d {
                m[i] += p * point[i];
            }
        }
        m
    }

    pub fn covariance(&self) -> Matrix {
        let d = self.dim();
        let mean = self.mean();
        let mut c = Matrix::zeros(d, d);
        for (p, point) in self.pmf.iter().zip(&self.support) {
            for i in 0..d {
                for j in 0..d {
                    c[(i, j)] += p * (point[i] - mean[i]) * (point[j] - mean[j]);
                }
            }
        }
        c
    }
}

/// One conditional distribution ν_j.
#[derive(Debug, Clone)]
pub enum ClassModel {
    Gaussian(GaussianClass),
    Discrete(DiscreteClass),
}

impl ClassModel {
    pub fn dim(&self) -> usize {
        match self {
            ClassModel::Gaussian(g) => g.dim(),
            ClassModel::Discrete(d) => d.dim(),
        }
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.dim() {
            return Err(ModelError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(match self {
            ClassModel::Gaussian(g) => g.log_density(x),
            ClassModel::Discrete(d) => d.log_density(x),
        })
    }

    pub fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        match self {
            ClassModel::Gaussian(g) => g.sample_into(rng, out),
            ClassModel::Discrete(d) => d.sample_into(rng, out),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            ClassModel::Gaussian(g) => g.mean().to_vec(),
            ClassModel::Discrete(d) => d.mean(),
        }
    }

    pub fn covariance(&self) -> Matrix {
        match self {
            ClassModel::Gaussian(g) => g.covariance().clone(),
            ClassModel::Discrete(d) => d.covariance(),
        }
    }
}

/// The full classification problem: M class models sharing dimension d,
/// priors, and optional prototype vectors.
///
/// Class indices are zero-based throughout the crate; ties always break to
/// the smallest index.
#[derive(Debug, Clone)]
pub struct Problem {
    d: usize,
    classes: Vec<ClassModel>,
    priors: Vec<f64>,
    prototypes: Option<Vec<Vec<f64>>>,
}

impl Problem {
    pub fn new(
        classes: Vec<ClassModel>,
        priors: Vec<f64>,
        prototypes: Option<Vec<Vec<f64>>>,
    ) -> Result<Self, ModelError> {
        if classes.len() < 2 {
            return Err(ModelError::BadProblem("need at least 2 classes".into()));
        }
        let d = classes[0].dim();
        if classes.iter().any(|c| c.dim() != d) {
            return Err(ModelError::BadProblem("classes of mixed dimension".into()));
        }
        if priors.len() != classes.len() {
            return Err(ModelError::BadProblem("priors length must equal class count".into()));
        }
        if priors.iter().any(|&p| p < 0.0) {
            return Err(ModelError::BadProblem("negative prior".into()));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(ModelError::BadProblem(format!("priors sum to {total}, not 1")));
        }
        if let Some(ref protos) = prototypes {
            if protos.len() != classes.len() || protos.iter().any(|p| p.len() != d) {
                return Err(ModelError::BadProblem(
                    "prototypes must be one d-vector per class".into(),
                ));
            }
        }
        Ok(Problem { d, classes, priors, prototypes })
    }

    /// Equal priors shorthand.
    pub fn with_uniform_priors(classes: Vec<ClassModel>) -> Result<Self, ModelError> {
        let m = classes.len();
        Problem::new(classes, vec![1.0 / m as f64; m], None)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, j: usize) -> &ClassModel {
        &self.classes[j]
    }

    pub fn classes(&self) -> &[ClassModel] {
        &self.classes
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Prototype vectors: the explicit ones if present, class means otherwise.
    pub fn prototypes(&self) -> Vec<Vec<f64>> {
        match &self.prototypes {
            Some(p) => p.clone(),
            None => self.classes.iter().map(|c| c.mean()).collect(),
        }
    }

    pub fn explicit_prototypes(&self) -> Option<&[Vec<f64>]> {
        self.prototypes.as_deref()
    }

    pub fn class_means(&self) -> Vec<Vec<f64>> {
        self.classes.iter().map(|c| c.mean()).collect()
    }

    pub fn class_covariances(&self) -> Vec<Matrix> {
        self.classes.iter().map(|c| c.covariance()).collect()
    }
}

/// t repeated observations sharing one label.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBatch {
    pub observations: Vec<Vec<f64>>,
}

impl ObservationBatch {
    pub fn t(&self) -> usize {
        self.observations.len()
    }
}

/// Draws t conditionally i.i.d. observations from ν_label.
///
/// Deterministic given the generator state; `label` is zero-based.
pub fn sample_batch(
    problem: &Problem,
    label: usize,
    t: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ObservationBatch, ModelError> {
    if label >= problem.num_classes() {
        return Err(ModelError::LabelOutOfRange { label, m: problem.num_classes() });
    }
    assert!(t >= 1, "batch needs at least one observation");
    let model = problem.class(label);
    let mut observations = Vec::with_capacity(t);
    let mut buf = Vec::with_capacity(problem.dim());
    for _ in 0..t {
        model.sample_into(rng, &mut buf);
        observations.push(buf.clone());
    }
    Ok(ObservationBatch { observations })
}

// ── divergences ─────────────────────────────────────────────────────

/// Bhattacharyya distance B(a, b) = −ln ∫ √(f_a f_b) dλ.
///
/// Gaussian pairs use the closed form
/// ⅛ (μ₁−μ₂)ᵀ Σ̄⁻¹ (μ₁−μ₂) + ½ ln(det Σ̄ / √(det Σ₁ det Σ₂)), Σ̄ = (Σ₁+Σ₂)/2;
/// discrete pairs use −ln Σ √(p_i q_i) over support points matched by exact
/// coordinates. Mixed families are rejected.
pub fn bhattacharyya(a: &ClassModel, b: &ClassModel) -> Result<f64, ModelError> {
    if a.dim() != b.dim() {
        return Err(ModelError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    match (a, b) {
        (ClassModel::Gaussian(ga), ClassModel::Gaussian(gb)) => {
            let sigma_bar = ga.covariance().add(gb.covariance()).scale(0.5);
            let chol_bar = linalg::cholesky(&sigma_bar)
                .map_err(|e| ModelError::BadCovariance(e.to_string()))?;
            let log_det_bar = 2.0 * (0..chol_bar.rows()).map(|i| chol_bar[(i, i)].ln()).sum::<f64>();
            let diff = linalg::sub_vec(ga.mean(), gb.mean());
            let y = linalg::forward_substitute(&chol_bar, &diff);
            let quad: f64 = y.iter().map(|v| v * v).sum();
            Ok(0.125 * quad + 0.5 * (log_det_bar - 0.5 * (ga.log_det_cov + gb.log_det_cov)))
        }
        (ClassModel::Discrete(da), ClassModel::Discrete(db)) => {
            let mut overlap = 0.0;
            for (point, &p) in da.support().iter().zip(da.pmf()) {
                if let Some(i) = db.find(point) {
                    overlap += (p * db.pmf()[i]).sqrt();
                }
            }
            if overlap <= 0.0 {
                Ok(f64::INFINITY)
            } else {
                Ok((-overlap.ln()).max(0.0))
            }
        }
        _ => Err(ModelError::UnsupportedPair),
    }
}

/// Kullback-Leibler divergence KL(a ‖ b).
///
/// Gaussian closed form; discrete Σ p ln(p/q) with +∞ on support violation.
pub fn kl_divergence(a: &ClassModel, b: &ClassModel) -> Result<f64, ModelError> {
    if a.dim() != b.dim() {
        return Err(ModelError::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    match (a, b) {
        (ClassModel::Gaussian(ga), ClassModel::Gaussian(gb)) => {
            let d = ga.dim();
            // tr(Σ₂⁻¹ Σ₁): solve column by column against the factor of Σ₂.
            let mut trace = 0.0;
            for j in 0..d {
                let col = ga.covariance().column(j);
                let x = linalg::solve_spd(gb.covariance(), &col)
                    .map_err(|e| ModelError::BadCovariance(e.to_string()))?;
                trace += x[j];
            }
            let diff = linalg::sub_vec(gb.mean(), ga.mean());
            let x = linalg::solve_spd(gb.covariance(), &diff)
                .map_err(|e| ModelError::BadCovariance(e.to_string()))?;
            let quad = linalg::dot(&diff, &x);
            Ok(0.5 * (trace + quad - d as f64 + gb.log_det_cov - ga.log_det_cov))
        }
        (ClassModel::Discrete(da), ClassModel::Discrete(db)) => {
            let mut kl = 0.0;
            for (point, &p) in da.support().iter().zip(da.pmf()) {
                if p == 0.0 {
                    continue;
                }
                match db.find(point) {
                    Some(i) if db.pmf()[i] > 0.0 => kl += p * (p / db.pmf()[i]).ln(),
                    _ => return Ok(f64::INFINITY),
                }
            }
            Ok(kl.max(0.0))
        }
        _ => Err(ModelError::UnsupportedPair),
    }
}

// ── confusion matrix estimation ─────────────────────────────────────

/// Row-stochastic matrix of elementary confusion probabilities
/// p[j][l] = P{g(V₁) = l | Y = j}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub p: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let m = p.len();
        if m < 2 || p.iter().any(|row| row.len() != m) {
            return Err(ModelError::BadProbabilities("confusion matrix must be square, M>=2".into()));
        }
        for (j, row) in p.iter().enumerate() {
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(ModelError::BadProbabilities(format!("row {j} entries outside [0,1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(ModelError::BadProbabilities(format!("row {j} sums to {s}")));
            }
        }
        Ok(ConfusionMatrix { p })
    }

    /// Symmetric binary matrix [[p, 1−p], [1−p, p]].
    pub fn symmetric_binary(p: f64) -> Self {
        ConfusionMatrix { p: vec![vec![p, 1.0 - p], vec![1.0 - p, p]] }
    }

    pub fn num_classes(&self) -> usize {
        self.p.len()
    }
}

/// Monte Carlo confusion matrix of an elementary classifier.
///
/// Counts are sharded deterministically: block b of class j uses the
/// generator derived from (seed, "confusion", j, b), so the result is
/// independent of how blocks are scheduled. Rows are normalized counts and
/// therefore sum to 1 exactly.
pub fn confusion_matrix<G>(
    problem: &Problem,
    classify: G,
    n_per_class: usize,
    seed: u64,
) -> Result<ConfusionMatrix, ModelError>
where
    G: Fn(&[f64]) -> usize + Sync,
{
    use rayon::prelude::*;

    assert!(n_per_class >= 10_000, "confusion estimation needs at least 10^4 trials per class");
    let m = problem.num_classes();
    let block = 10_000usize;

    let mut p = Vec::with_capacity(m);
    for j in 0..m {
        let blocks: Vec<(u64, usize)> = (0..n_per_class)
            .step_by(block)
            .enumerate()
            .map(|(b, start)| (b as u64, (n_per_class - start).min(block)))
            .collect();
        let counts = blocks
            .par_iter()
            .map(|&(b, len)| {
                let mut rng = seed::rng_for(seed, "confusion", &[j as u64, b]);
                let mut buf = Vec::with_capacity(problem.dim());
                let mut local = vec![0u64; m];
                for _ in 0..len {
                    problem.class(j).sample_into(&mut rng, &mut buf);
                    let label = classify(&buf);
                    assert!(label < m, "classifier returned label {label} for {m} classes");
                    local[label] += 1;
                }
                local
            })
            .reduce(
                || vec![0u64; m],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x += y;
                    }
                    a
                },
            );
        let total: u64 = counts.iter().sum();
        let mut row: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        // Force exact row sums: assign the last nonzero entry the residual.
        let s: f64 = row.iter().sum();
        if s != 1.0 {
            if let Some(last) = row.iter().rposition(|&x| x > 0.0) {
                let rest: f64 = row.iter().enumerate().filter(|&(i, _)| i != last).map(|(_, &x)| x).sum();
                row[last] = 1.0 - rest;
            }
        }
        p.push(row);
    }
    ConfusionMatrix::new(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    // Composite Simpson oracle for 1-D integrals, independent of the
    // closed forms it checks.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = if n % 2 == 0 { n } else { n + 1 };
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    fn gauss1(mu: f64, sigma_sq: f64) -> ClassModel {
        ClassModel::Gaussian(GaussianClass::isotropic(vec![mu], sigma_sq).unwrap())
    }

    fn density(model: &ClassModel, x: f64) -> f64 {
        model.log_density(&[x]).unwrap().exp()
    }

    #[test]
    fn standard_normal_log_density_at_zero() {
        let g = gauss1(0.0, 1.0);
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((g.log_density(&[0.0]).unwrap() - expected).abs() < 1e-12);
        assert!((expected + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn discrete_log_density_on_and_off_support() {
        let d = DiscreteClass::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        assert!((d.log_density(&[0.0]) - 0.5_f64.ln()).abs() < 1e-15);
        assert_eq!(d.log_density(&[2.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn gaussian_dimension_mismatch_rejected() {
        let g = gauss1(0.0, 1.0);
        assert!(matches!(
            g.log_density(&[0.0, 1.0]),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let problem = Problem::with_uniform_priors(vec![gauss1(0.0, 1.0), gauss1(1.0, 1.0)]).unwrap();
        let a = sample_batch(&problem, 0, 5, &mut rng_for(9, "t", &[])).unwrap();
        let b = sample_batch(&problem, 0, 5, &mut rng_for(9, "t", &[])).unwrap();
        assert_eq!(a, b, "same seed must give bit-identical batches");
        let c = sample_batch(&problem, 0, 5, &mut rng_for(10, "t", &[])).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_pmf_always_emits_same_point() {
        let d = ClassModel::Discrete(
            DiscreteClass::new(vec![vec![0.0], vec![1.0]], vec![1.0, 0.0]).unwrap(),
        );
        let problem = Problem::with_uniform_priors(vec![d.clone(), d]).unwrap();
        let batch = sample_batch(&problem, 0, 3, &mut rng_for(1, "t", &[])).unwrap();
        for obs in &batch.observations {
            assert_eq!(obs, &vec![0.0]);
        }
    }

    #[test]
    fn sample_mean_obeys_law_of_large_numbers() {
        let mut cov = Matrix::identity(2);
        cov[(0, 1)] = 0.3;
        cov[(1, 0)] = 0.3;
        let g = ClassModel::Gaussian(GaussianClass::new(vec![1.0, -2.0], cov).unwrap());
        let problem = Problem::with_uniform_priors(vec![g.clone(), g]).unwrap();
        let t = 100_000;
        let batch = sample_batch(&problem, 0, t, &mut rng_for(5, "lln", &[])).unwrap();
        for coord in 0..2 {
            let mean: f64 =
                batch.observations.iter().map(|o| o[coord]).sum::<f64>() / t as f64;
            let target = [1.0, -2.0][coord];
            let bound = 4.0 / (t as f64).sqrt();
            assert!(
                (mean - target).abs() < bound,
                "coordinate {coord}: {mean} vs {target} (4σ/√t = {bound})"
            );
        }
    }

    #[test]
    fn label_out_of_range_rejected() {
        let problem = Problem::with_uniform_priors(vec![gauss1(0.0, 1.0), gauss1(1.0, 1.0)]).unwrap();
        assert!(matches!(
            sample_batch(&problem, 2, 1, &mut rng_for(0, "t", &[])),
            Err(ModelError::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn bhattacharyya_identical_models_is_zero() {
        let g = gauss1(0.3, 2.0);
        assert!(bhattacharyya(&g, &g).unwrap().abs() < 1e-12);
        let d = ClassModel::Discrete(
            DiscreteClass::new(vec![vec![0.0], vec![1.0]], vec![0.4, 0.6]).unwrap(),
        );
        assert!(bhattacharyya(&d, &d).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bhattacharyya_unit_gaussians_two_apart_is_half() {
        let b = bhattacharyya(&gauss1(0.0, 1.0), &gauss1(2.0, 1.0)).unwrap();
        assert!((b - 0.5).abs() < 1e-12, "closed form (μ₁−μ₂)²/(8σ²) = 0.5, got {b}");
    }

    #[test]
    fn bhattacharyya_disjoint_discrete_supports_is_infinite() {
        let a = ClassModel::Discrete(DiscreteClass::new(vec![vec![0.0]], vec![1.0]).unwrap());
        let b = ClassModel::Discrete(DiscreteClass::new(vec![vec![1.0]], vec![1.0]).unwrap());
        assert_eq!(bhattacharyya(&a, &b).unwrap(), f64::INFINITY);
    }

    #[test]
    fn bhattacharyya_symmetry_on_random_pairs() {
        let mut rng = rng_for(21, "pairs", &[]);
        for _ in 0..10 {
            let a = gauss1(rng.gen_range(-3.0..3.0), rng.gen_range(0.3..2.0));
            let b = gauss1(rng.gen_range(-3.0..3.0), rng.gen_range(0.3..2.0));
            let ab = bhattacharyya(&a, &b).unwrap();
            let ba = bhattacharyya(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-12);
            assert!(ab >= 0.0);
        }
    }

    #[test]
    fn mixed_family_divergence_rejected() {
        let g = gauss1(0.0, 1.0);
        let d = ClassModel::Discrete(DiscreteClass::new(vec![vec![0.0]], vec![1.0]).unwrap());
        assert!(matches!(bhattacharyya(&g, &d), Err(ModelError::UnsupportedPair)));
        assert!(matches!(kl_divergence(&g, &d), Err(ModelError::UnsupportedPair)));
    }

    #[test]
    fn kl_unit_gaussians_two_apart_is_two() {
        let kl = kl_divergence(&gauss1(0.0, 1.0), &gauss1(2.0, 1.0)).unwrap();
        assert!((kl - 2.0).abs() < 1e-12, "closed form (μ₁−μ₂)²/(2σ²) = 2, got {kl}");
        assert!(kl_divergence(&gauss1(0.7, 1.3), &gauss1(0.7, 1.3)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kl_discrete_support_violation_is_infinite() {
        let a = ClassModel::Discrete(
            DiscreteClass::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap(),
        );
        let b = ClassModel::Discrete(DiscreteClass::new(vec![vec![0.0]], vec![1.0]).unwrap());
        assert_eq!(kl_divergence(&a, &b).unwrap(), f64::INFINITY);
    }

    #[test]
    fn gaussian_closed_forms_match_quadrature() {
        let mut rng = rng_for(33, "quad", &[]);
        for _ in 0..5 {
            let (m1, s1) = (rng.gen_range(-2.0..2.0), rng.gen_range(0.5..2.0));
            let (m2, s2) = (rng.gen_range(-2.0..2.0), rng.gen_range(0.5..2.0));
            let a = gauss1(m1, s1);
            let b = gauss1(m2, s2);
            let lo = (m1.min(m2)) - 12.0 * s1.max(s2).sqrt();
            let hi = (m1.max(m2)) + 12.0 * s1.max(s2).sqrt();

            let overlap = simpson(|x| (density(&a, x) * density(&b, x)).sqrt(), lo, hi, 20_000);
            let b_quad = -overlap.ln();
            let b_closed = bhattacharyya(&a, &b).unwrap();
            assert!(
                (b_quad - b_closed).abs() < 1e-6,
                "Bhattacharyya closed {b_closed} vs quadrature {b_quad}"
            );

            let kl_quad = simpson(
                |x| {
                    let fa = density(&a, x);
                    if fa <= 1e-300 {
                        0.0
                    } else {
                        fa * (fa.ln() - density(&b, x).ln())
                    }
                },
                lo,
                hi,
                20_000,
            );
            let kl_closed = kl_divergence(&a, &b).unwrap();
            assert!(
                (kl_quad - kl_closed).abs() < 1e-6,
                "KL closed {kl_closed} vs quadrature {kl_quad}"
            );
        }
    }

    #[test]
    fn confusion_rows_sum_to_one_exactly() {
        let problem = Problem::with_uniform_priors(vec![gauss1(-1.0, 1.0), gauss1(1.0, 1.0)]).unwrap();
        let cm = confusion_matrix(&problem, |x| usize::from(x[0] > 0.0), 10_000, 13).unwrap();
        for row in &cm.p {
            let s: f64 = row.iter().sum();
            assert_eq!(s, 1.0, "rows are normalized counts and must sum to 1 exactly");
        }
    }

    #[test]
    fn identical_classes_yield_symmetric_confusion_rows() {
        let problem =
            Problem::with_uniform_priors(vec![gauss1(0.0, 1.0), gauss1(0.0, 1.0)]).unwrap();
        let n = 20_000;
        let cm = confusion_matrix(&problem, |x| usize::from(x[0] > 0.0), n, 17).unwrap();
        // Same distribution in both rows: entries match within 3 binomial SE.
        let se = 3.0 * (0.5 * 0.5 / n as f64).sqrt();
        assert!((cm.p[0][0] - cm.p[1][0]).abs() < 3.0 * se);
    }

    #[test]
    fn separated_gaussians_hit_phi_of_three() {
        // N(∓3, 1) with midpoint threshold: p₁₁ = Φ(3) ≈ 0.99865.
        let problem = Problem::with_uniform_priors(vec![gauss1(-3.0, 1.0), gauss1(3.0, 1.0)]).unwrap();
        let n = 100_000;
        let cm = confusion_matrix(&problem, |x| usize::from(x[0] > 0.0), n, 23).unwrap();
        let phi3 = 0.998_650_101_968_37;
        let se = (phi3 * (1.0 - phi3) / n as f64).sqrt();
        assert!(
            (cm.p[0][0] - phi3).abs() < 3.0 * se,
            "p11 = {} vs Φ(3) = {phi3} (3SE = {})",
            cm.p[0][0],
            3.0 * se
        );
    }

    #[test]
    fn nominal_ml_partition_matches_mahalanobis_halfspace() {
        // Equal-covariance pair: p_jj = Φ(½·Mahalanobis distance), verified
        // against the quadrature oracle for the halfspace probability.
        let (mu1, mu2, s) = (-0.7, 0.9, 1.3);
        let problem =
            Problem::with_uniform_priors(vec![gauss1(mu1, s), gauss1(mu2, s)]).unwrap();
        let mid = 0.5 * (mu1 + mu2);
        let n = 100_000;
        let cm = confusion_matrix(&problem, |x| usize::from(x[0] > mid), n, 29).unwrap();
        // quadrature of the class-1 density over (-∞, mid]
        let a = problem.class(0);
        let p11_quad = simpson(|x| density(a, x), mu1 - 12.0 * s.sqrt(), mid, 20_000);
        let mahal = (mu2 - mu1) / s.sqrt();
        let p11_phi = 0.5 * statrs::function::erf::erfc(-(0.5 * mahal) / 2.0_f64.sqrt());
        assert!((p11_quad - p11_phi).abs() < 1e-6, "oracle {p11_quad} vs Φ {p11_phi}");
        let se = (p11_phi * (1.0 - p11_phi) / n as f64).sqrt();
        assert!((cm.p[0][0] - p11_phi).abs() < 3.0 * se);
    }

    #[test]
    fn confusion_estimate_independent_of_worker_count() {
        let problem = Problem::with_uniform_priors(vec![gauss1(-1.0, 1.0), gauss1(1.0, 1.0)]).unwrap();
        let classify = |x: &[f64]| usize::from(x[0] > 0.0);
        let a = confusion_matrix(&problem, classify, 25_000, 31).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| confusion_matrix(&problem, classify, 25_000, 31).unwrap());
        assert_eq!(a.p, b.p, "sharded counting must not depend on the worker count");
    }
}

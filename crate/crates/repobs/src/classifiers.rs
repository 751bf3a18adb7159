//! Decision rules.
//!
//! An elementary classifier looks at a single observation; an aggregated
//! rule combines t of them. Majority vote, maximum likelihood, utility
//! aggregation, the robust nominal-density rule, prototype rules (plain
//! and linearly transformed), and the binary scaled linear rule are all
//! here. Ties break to the smallest class index everywhere, and the sign
//! convention for the linear rule maps sign 0 to +1; both conventions keep
//! every decision total and every oracle deterministic.

use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::models::{ClassModel, ModelError, ObservationBatch};
use crate::seed;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("degenerate support: every class scored -inf on the batch")]
    DegenerateSupport,
    #[error("degenerate feature {index}: rescale anchors coincide")]
    DegenerateFeature { index: usize },
    #[error("utility evaluation produced non-finite sums of mixed sign")]
    UtilityEvaluation,
    #[error("robust table mismatch: {0}")]
    TableMismatch(String),
}

/// argmax with smallest-index tie-break.
pub fn argmax_tie_smallest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// argmin with smallest-index tie-break.
pub fn argmin_tie_smallest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s < scores[best] {
            best = i;
        }
    }
    best
}

// ── elementary rules ────────────────────────────────────────────────

/// A rule operating on a single observation.
#[derive(Debug, Clone)]
pub enum ElementaryClassifier {
    /// argmax_j f_j(x) over the nominal densities (the partition A_j).
    NominalMl { nominals: Vec<ClassModel> },
    /// argmin_j ‖x − x_j‖² over prototype vectors.
    Prototype { prototypes: Vec<Vec<f64>> },
    /// Binary rule sign((a, z)) on the rescaled observation z; sign +1 is
    /// class 0, sign −1 is class 1.
    LinearScaled { a: Vec<f64>, m_plus: Vec<f64>, m_minus: Vec<f64> },
}

impl ElementaryClassifier {
    pub fn dim(&self) -> usize {
        match self {
            ElementaryClassifier::NominalMl { nominals } => nominals[0].dim(),
            ElementaryClassifier::Prototype { prototypes } => prototypes[0].len(),
            ElementaryClassifier::LinearScaled { a, .. } => a.len(),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            ElementaryClassifier::NominalMl { nominals } => nominals.len(),
            ElementaryClassifier::Prototype { prototypes } => prototypes.len(),
            ElementaryClassifier::LinearScaled { .. } => 2,
        }
    }

    pub fn classify(&self, x: &[f64]) -> Result<usize, ClassifierError> {
        if x.len() != self.dim() {
            return Err(ModelError::DimensionMismatch { expected: self.dim(), got: x.len() }.into());
        }
        Ok(match self {
            ElementaryClassifier::NominalMl { nominals } => {
                let scores: Vec<f64> = nominals
                    .iter()
                    .map(|m| m.log_density(x))
                    .collect::<Result<_, _>>()?;
                argmax_tie_smallest(&scores)
            }
            ElementaryClassifier::Prototype { prototypes } => {
                let dists: Vec<f64> = prototypes
                    .iter()
                    .map(|p| linalg::norm_sq(&linalg::sub_vec(x, p)))
                    .collect();
                argmin_tie_smallest(&dists)
            }
            ElementaryClassifier::LinearScaled { a, m_plus, m_minus } => {
                let z = rescale(x, m_plus, m_minus)?;
                if linalg::dot(a, &z) >= 0.0 {
                    0
                } else {
                    1
                }
            }
        })
    }
}

// ── aggregated rules ────────────────────────────────────────────────

/// Majority vote of the elementary rule over the batch.
pub fn classify_majority(
    g: &ElementaryClassifier,
    batch: &ObservationBatch,
) -> Result<usize, ClassifierError> {
    let mut votes = vec![0.0; g.num_classes()];
    for obs in &batch.observations {
        votes[g.classify(obs)?] += 1.0;
    }
    Ok(argmax_tie_smallest(&votes))
}

/// Maximum likelihood over the batch, computed in the log domain:
/// argmax_j Σ_i log f_j(V_i). Classes driven to −∞ are excluded before the
/// argmax; if every class is at −∞ the batch is outside all supports.
pub fn classify_ml(
    nominals: &[ClassModel],
    batch: &ObservationBatch,
) -> Result<usize, ClassifierError> {
    let mut scores: Vec<f64> = vec![0.0; nominals.len()];
    for obs in &batch.observations {
        for (s, model) in scores.iter_mut().zip(nominals) {
            if (*s).is_finite() {
                *s += model.log_density(obs)?;
            }
        }
    }
    if scores.iter().all(|s| *s == f64::NEG_INFINITY) {
        return Err(ClassifierError::DegenerateSupport);
    }
    Ok(argmax_tie_smallest(&scores))
}

/// Utility aggregation argmax_j Σ_i h_j(V_i).
///
/// With indicator utilities this is majority vote, with log-densities it
/// is the ML rule, and with negative squared distances it is the prototype
/// rule.
pub fn classify_utility<H>(utilities: &[H], batch: &ObservationBatch) -> Result<usize, ClassifierError>
where
    H: Fn(&[f64]) -> f64,
{
    let mut sums = vec![0.0; utilities.len()];
    for obs in &batch.observations {
        for (s, h) in sums.iter_mut().zip(utilities) {
            *s += h(obs);
        }
    }
    if sums.iter().any(|s| s.is_nan()) {
        return Err(ClassifierError::UtilityEvaluation);
    }
    Ok(argmax_tie_smallest(&sums))
}

/// Prototype rule argmin_j Σ_i ‖V_i − x_j‖².
pub fn classify_prototype(
    prototypes: &[Vec<f64>],
    batch: &ObservationBatch,
) -> Result<usize, ClassifierError> {
    let mut sums = vec![0.0; prototypes.len()];
    for obs in &batch.observations {
        for (s, p) in sums.iter_mut().zip(prototypes) {
            if obs.len() != p.len() {
                return Err(ModelError::DimensionMismatch { expected: p.len(), got: obs.len() }.into());
            }
            *s += linalg::norm_sq(&linalg::sub_vec(obs, p));
        }
    }
    Ok(argmin_tie_smallest(&sums))
}

/// Transformed prototype rule argmin_j Σ_i ‖Aᵀ(V_i − x_j)‖² for a d×M
/// transform A.
///
/// The transform is applied to the differences, so only Aᵀx products are
/// formed. A rank-deficient A still yields a decision; the caller can
/// detect the degeneracy through `transform_rank_deficient`.
pub fn classify_prototype_transformed(
    a: &Matrix,
    prototypes: &[Vec<f64>],
    batch: &ObservationBatch,
) -> Result<usize, ClassifierError> {
    let at = a.transpose();
    let mut sums = vec![0.0; prototypes.len()];
    for obs in &batch.observations {
        for (s, p) in sums.iter_mut().zip(prototypes) {
            let diff = linalg::sub_vec(obs, p);
            *s += linalg::norm_sq(&at.matvec(&diff));
        }
    }
    Ok(argmin_tie_smallest(&sums))
}

/// True when A's columns do not have full rank (smallest singular value of
/// AᵀA below 1e-10 of the largest).
pub fn transform_rank_deficient(a: &Matrix) -> bool {
    let gram = a.transpose().matmul(a);
    match linalg::sym_eig(&gram) {
        Ok((vals, _)) => {
            let max = vals.first().copied().unwrap_or(0.0);
            vals.last().copied().unwrap_or(0.0) <= 1e-10 * max.max(1e-300)
        }
        Err(_) => true,
    }
}

/// Componentwise affine map sending m_plus to the all-ones vector and
/// m_minus to its negative: z_i = 2 (x_i − m_{+,i}) / (m_{+,i} − m_{−,i}) + 1.
pub fn rescale(x: &[f64], m_plus: &[f64], m_minus: &[f64]) -> Result<Vec<f64>, ClassifierError> {
    assert_eq!(x.len(), m_plus.len());
    assert_eq!(x.len(), m_minus.len());
    let mut z = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let gap = m_plus[i] - m_minus[i];
        if gap == 0.0 {
            return Err(ClassifierError::DegenerateFeature { index: i });
        }
        z.push(2.0 * (x[i] - m_plus[i]) / gap + 1.0);
    }
    Ok(z)
}

/// The sign of the decision statistic of the scaled linear rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Binary aggregated rule sign(Σ_i (a, Z_i)) on already-rescaled
/// observations; sign(0) is Plus by convention (a probability-zero event
/// for continuous models).
pub fn classify_linear_scaled(a: &[f64], rescaled: &ObservationBatch) -> Sign {
    assert!(a.iter().any(|&c| c != 0.0), "scaling vector must be nonzero");
    let total: f64 = rescaled.observations.iter().map(|z| linalg::dot(a, z)).sum();
    if total >= 0.0 {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

// ── robust nominal-density rule ─────────────────────────────────────

/// Nominal integrals over the pairwise comparison sets
/// A_{i,j} = {x : f⁽ⁱ⁾(x) > f⁽ʲ⁾(x)}, i < j.
///
/// `integrals[s][k]` estimates ∫_{A_s} f⁽ᵏ⁾ dλ for the s-th set by the
/// fraction of `n_mc` seeded samples from f⁽ᵏ⁾ that land in the set.
/// Membership uses the strict inequality, so density ties fall outside.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RobustRuleTable {
    pub pairs: Vec<(usize, usize)>,
    pub integrals: Vec<Vec<f64>>,
    pub n_mc: usize,
    pub seed: u64,
}

impl RobustRuleTable {
    pub fn num_classes(&self) -> usize {
        self.integrals.first().map_or(0, |row| row.len())
    }
}

fn in_set(nominals: &[ClassModel], i: usize, j: usize, x: &[f64]) -> Result<bool, ModelError> {
    Ok(nominals[i].log_density(x)? > nominals[j].log_density(x)?)
}

/// Estimates the M(M−1)/2 × M table of nominal integrals by Monte Carlo,
/// sharded deterministically over blocks of 10⁴ samples per class.
pub fn build_robust_table(
    nominals: &[ClassModel],
    n_mc: usize,
    seed: u64,
) -> Result<RobustRuleTable, ClassifierError> {
    let m = nominals.len();
    assert!(m >= 2, "robust rule needs at least two classes");
    assert!(n_mc >= 1);
    let mut pairs = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            pairs.push((i, j));
        }
    }

    let block = 10_000usize;
    // counts[k][s]: samples from class k that fell inside set s
    let mut counts = vec![vec![0u64; pairs.len()]; m];
    for k in 0..m {
        let blocks: Vec<(u64, usize)> = (0..n_mc)
            .step_by(block)
            .enumerate()
            .map(|(b, start)| (b as u64, (n_mc - start).min(block)))
            .collect();
        counts[k] = blocks
            .par_iter()
            .map(|&(b, len)| {
                let mut rng = seed::rng_for(seed, "robust-table", &[k as u64, b]);
                let mut buf = Vec::with_capacity(nominals[k].dim());
                let mut local = vec![0u64; pairs.len()];
                for _ in 0..len {
                    nominals[k].sample_into(&mut rng, &mut buf);
                    let logs: Vec<f64> = nominals
                        .iter()
                        .map(|n| n.log_density(&buf).expect("dimension checked"))
                        .collect();
                    for (s, &(i, j)) in pairs.iter().enumerate() {
                        if logs[i] > logs[j] {
                            local[s] += 1;
                        }
                    }
                }
                local
            })
            .reduce(
                || vec![0u64; pairs.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x += y;
                    }
                    a
                },
            );
    }

    let integrals = (0..pairs.len())
        .map(|s| (0..m).map(|k| counts[k][s] as f64 / n_mc as f64).collect())
        .collect();
    Ok(RobustRuleTable { pairs, integrals, n_mc, seed })
}

/// The robust rule: pick the class whose nominal integrals best match the
/// empirical frequencies of the batch over the comparison sets, in
/// sup-discrepancy. Smallest-index tie-break.
pub fn classify_robust(
    table: &RobustRuleTable,
    nominals: &[ClassModel],
    batch: &ObservationBatch,
) -> Result<usize, ClassifierError> {
    let m = nominals.len();
    if table.num_classes() != m {
        return Err(ClassifierError::TableMismatch(format!(
            "table built for {} classes, got {m}",
            table.num_classes()
        )));
    }
    let t = batch.t() as f64;
    let mut mu = vec![0.0; table.pairs.len()];
    for obs in &batch.observations {
        for (s, &(i, j)) in table.pairs.iter().enumerate() {
            if in_set(nominals, i, j, obs)? {
                mu[s] += 1.0;
            }
        }
    }
    for v in &mut mu {
        *v /= t;
    }
    let discrepancies: Vec<f64> = (0..m)
        .map(|k| {
            table
                .integrals
                .iter()
                .zip(&mu)
                .map(|(row, &emp)| (row[k] - emp).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(argmin_tie_smallest(&discrepancies))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DiscreteClass, GaussianClass, Problem};
    use crate::seed::rng_for;
    use rand::Rng;

    fn gauss1(mu: f64, sigma_sq: f64) -> ClassModel {
        ClassModel::Gaussian(GaussianClass::isotropic(vec![mu], sigma_sq).unwrap())
    }

    fn batch(points: &[&[f64]]) -> ObservationBatch {
        ObservationBatch { observations: points.iter().map(|p| p.to_vec()).collect() }
    }

    #[test]
    fn prototype_elementary_zero_distance_wins() {
        let g = ElementaryClassifier::Prototype {
            prototypes: vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.0]],
        };
        assert_eq!(g.classify(&[1.0, 1.0]).unwrap(), 1);
    }

    #[test]
    fn nominal_ml_tie_breaks_to_smallest_index() {
        let g = ElementaryClassifier::NominalMl {
            nominals: vec![gauss1(-1.0, 1.0), gauss1(1.0, 1.0)],
        };
        // x = 0 is equidistant: densities tie, class 0 wins.
        assert_eq!(g.classify(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn linear_scaled_fixed_point_is_positive_class() {
        let g = ElementaryClassifier::LinearScaled {
            a: vec![0.5, 0.5],
            m_plus: vec![1.0, 2.0],
            m_minus: vec![-1.0, 0.0],
        };
        assert_eq!(g.classify(&[1.0, 2.0]).unwrap(), 0, "x = m₊ rescales to 1, V = 1 > 0");
        assert_eq!(g.classify(&[-1.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn majority_with_single_vote_equals_elementary() {
        let g = ElementaryClassifier::Prototype { prototypes: vec![vec![-1.0], vec![1.0]] };
        let b = batch(&[&[0.9]]);
        assert_eq!(classify_majority(&g, &b).unwrap(), g.classify(&[0.9]).unwrap());
    }

    #[test]
    fn majority_plurality_and_tie_rules() {
        // Prototypes at -1, 0, 1: observations vote 2-1-0.
        let g = ElementaryClassifier::Prototype {
            prototypes: vec![vec![-1.0], vec![0.0], vec![1.0]],
        };
        let b = batch(&[&[-1.1], &[-0.9], &[0.1]]);
        assert_eq!(classify_majority(&g, &b).unwrap(), 0);

        // 1-1 tie in a binary vote goes to class 0.
        let g2 = ElementaryClassifier::Prototype { prototypes: vec![vec![-1.0], vec![1.0]] };
        let b2 = batch(&[&[-0.5], &[0.5]]);
        assert_eq!(classify_majority(&g2, &b2).unwrap(), 0);
    }

    #[test]
    fn ml_batch_at_own_mean_wins() {
        let nominals = vec![gauss1(-1.0, 1.0), gauss1(1.0, 1.0)];
        assert_eq!(classify_ml(&nominals, &batch(&[&[-1.0]])).unwrap(), 0);
    }

    #[test]
    fn ml_duplicate_densities_tie_to_first() {
        let nominals = vec![gauss1(0.0, 1.0), gauss1(0.0, 1.0)];
        let mut rng = rng_for(3, "mlties", &[]);
        for _ in 0..20 {
            let x: f64 = rng.gen_range(-2.0..2.0);
            assert_eq!(classify_ml(&nominals, &batch(&[&[x]])).unwrap(), 0);
        }
    }

    #[test]
    fn ml_reduces_to_linear_statistic_for_equal_variances() {
        // For N(∓1, 1) the log-likelihood difference is 2Σ V_i, so the ML
        // decision is the sign of the batch sum.
        let nominals = vec![gauss1(-1.0, 1.0), gauss1(1.0, 1.0)];
        let problem = Problem::with_uniform_priors(nominals.clone()).unwrap();
        let mut rng = rng_for(5, "mlsign", &[]);
        for trial in 0..50 {
            let b = crate::models::sample_batch(&problem, trial % 2, 7, &mut rng).unwrap();
            let total: f64 = b.observations.iter().map(|o| o[0]).sum();
            let expected = if total > 0.0 { 1 } else { 0 };
            if total != 0.0 {
                assert_eq!(classify_ml(&nominals, &b).unwrap(), expected);
            }
        }
    }

    #[test]
    fn ml_all_classes_off_support_is_degenerate() {
        let a = ClassModel::Discrete(DiscreteClass::new(vec![vec![0.0]], vec![1.0]).unwrap());
        let b = ClassModel::Discrete(DiscreteClass::new(vec![vec![1.0]], vec![1.0]).unwrap());
        let res = classify_ml(&[a, b], &batch(&[&[2.0]]));
        assert!(matches!(res, Err(ClassifierError::DegenerateSupport)));
    }

    #[test]
    fn utility_generalizes_majority_ml_and_prototype() {
        let nominals = vec![gauss1(-1.0, 1.0), gauss1(0.5, 2.0)];
        let prototypes = vec![vec![-1.0], vec![0.5]];
        let g = ElementaryClassifier::NominalMl { nominals: nominals.clone() };
        let problem = Problem::with_uniform_priors(nominals.clone()).unwrap();

        let indicator: Vec<_> = (0..2)
            .map(|j| {
                let g = g.clone();
                move |x: &[f64]| -> f64 { usize::from(g.classify(x).unwrap() == j) as f64 }
            })
            .collect();
        let log_density: Vec<_> = nominals
            .iter()
            .cloned()
            .map(|m| move |x: &[f64]| -> f64 { m.log_density(x).unwrap() })
            .collect();
        let neg_sq_dist: Vec<_> = prototypes
            .iter()
            .cloned()
            .map(|p| move |x: &[f64]| -> f64 { -linalg::norm_sq(&linalg::sub_vec(x, &p)) })
            .collect();

        let mut rng = rng_for(7, "utility", &[]);
        for trial in 0..1000 {
            let b = crate::models::sample_batch(&problem, trial % 2, 1 + trial % 6, &mut rng)
                .unwrap();
            assert_eq!(
                classify_utility(&indicator, &b).unwrap(),
                classify_majority(&g, &b).unwrap(),
                "indicator utilities must reproduce majority vote"
            );
            assert_eq!(
                classify_utility(&log_density, &b).unwrap(),
                classify_ml(&nominals, &b).unwrap(),
                "log-density utilities must reproduce ML"
            );
            assert_eq!(
                classify_utility(&neg_sq_dist, &b).unwrap(),
                classify_prototype(&prototypes, &b).unwrap(),
                "negative squared distances must reproduce the prototype rule"
            );
        }
    }

    #[test]
    fn aggregated_decisions_are_permutation_invariant() {
        let nominals = vec![gauss1(-1.0, 1.0), gauss1(1.0, 1.5)];
        let problem = Problem::with_uniform_priors(nominals.clone()).unwrap();
        let g = ElementaryClassifier::NominalMl { nominals: nominals.clone() };
        let mut rng = rng_for(11, "perm", &[]);
        for trial in 0..50 {
            let b = crate::models::sample_batch(&problem, trial % 2, 6, &mut rng).unwrap();
            let mut rev = b.clone();
            rev.observations.reverse();
            assert_eq!(classify_majority(&g, &b).unwrap(), classify_majority(&g, &rev).unwrap());
            assert_eq!(classify_ml(&nominals, &b).unwrap(), classify_ml(&nominals, &rev).unwrap());
        }
    }

    #[test]
    fn majority_binary_odd_t_equals_vote_count() {
        let g = ElementaryClassifier::Prototype { prototypes: vec![vec![-1.0], vec![1.0]] };
        let problem =
            Problem::with_uniform_priors(vec![gauss1(-1.0, 1.0), gauss1(1.0, 1.0)]).unwrap();
        let mut rng = rng_for(13, "odd", &[]);
        for trial in 0..100 {
            let b = crate::models::sample_batch(&problem, trial % 2, 5, &mut rng).unwrap();
            let votes_1 = b
                .observations
                .iter()
                .filter(|o| g.classify(o).unwrap() == 1)
                .count();
            let expected = usize::from(votes_1 > 5 / 2);
            assert_eq!(classify_majority(&g, &b).unwrap(), expected);
        }
    }

    #[test]
    fn prototype_hand_computed_batch() {
        // x₁ = -1, x₂ = 1, batch {0.5, -0.1, 0.4}: Σ(v+1)² = 7.62 beats
        // Σ(v-1)² = 2.82, so class 1 (zero-based).
        let prototypes = vec![vec![-1.0], vec![1.0]];
        let b = batch(&[&[0.5], &[-0.1], &[0.4]]);
        assert_eq!(classify_prototype(&prototypes, &b).unwrap(), 1);
    }

    #[test]
    fn prototype_equidistant_batch_ties_to_first() {
        let prototypes = vec![vec![-1.0], vec![1.0]];
        let b = batch(&[&[0.0], &[0.0]]);
        assert_eq!(classify_prototype(&prototypes, &b).unwrap(), 0);
    }

    #[test]
    fn transformed_prototype_with_identity_matches_plain() {
        let prototypes = vec![vec![-1.0, 0.0], vec![1.0, 0.5]];
        let a = Matrix::identity(2);
        let problem = Problem::with_uniform_priors(vec![
            ClassModel::Gaussian(GaussianClass::isotropic(vec![-1.0, 0.0], 1.0).unwrap()),
            ClassModel::Gaussian(GaussianClass::isotropic(vec![1.0, 0.5], 1.0).unwrap()),
        ])
        .unwrap();
        let mut rng = rng_for(17, "tp", &[]);
        for trial in 0..200 {
            let b = crate::models::sample_batch(&problem, trial % 2, 3, &mut rng).unwrap();
            assert_eq!(
                classify_prototype_transformed(&a, &prototypes, &b).unwrap(),
                classify_prototype(&prototypes, &b).unwrap()
            );
        }
    }

    #[test]
    fn transformed_decision_invariant_under_orthogonal_rotation() {
        // A has orthonormal columns; right-multiplying by an orthogonal
        // M×M matrix preserves every ‖Aᵀ(·)‖².
        let prototypes = vec![vec![-1.0, 0.0, 0.2], vec![1.0, 0.3, -0.4]];
        let raw = Matrix::from_rows(&[
            vec![1.0, 0.2],
            vec![0.1, 1.0],
            vec![-0.3, 0.4],
        ]);
        let a = linalg::orthonormalize_columns(&raw);
        let angle: f64 = 0.73;
        let rot = Matrix::from_rows(&[
            vec![angle.cos(), -angle.sin()],
            vec![angle.sin(), angle.cos()],
        ]);
        let a_rot = a.matmul(&rot);
        let problem = Problem::with_uniform_priors(vec![
            ClassModel::Gaussian(GaussianClass::isotropic(vec![-1.0, 0.0, 0.2], 1.0).unwrap()),
            ClassModel::Gaussian(GaussianClass::isotropic(vec![1.0, 0.3, -0.4], 1.0).unwrap()),
        ])
        .unwrap();
        let mut rng = rng_for(19, "rot", &[]);
        for trial in 0..100 {
            let b = crate::models::sample_batch(&problem, trial % 2, 4, &mut rng).unwrap();
            assert_eq!(
                classify_prototype_transformed(&a, &prototypes, &b).unwrap(),
                classify_prototype_transformed(&a_rot, &prototypes, &b).unwrap()
            );
        }
    }

    #[test]
    fn transform_mapping_prototypes_to_unit_vectors_spreads_them_sqrt2_apart() {
        // Aᵀ x_j = e_j makes every transformed prototype pair √2 apart.
        let x1 = vec![2.0, 0.0];
        let x2 = vec![0.0, 0.5];
        // Solve Aᵀ Q = I for Q = [x1 x2]: Aᵀ = Q⁻¹.
        let a = Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 2.0]]);
        let at = a.transpose();
        let t1 = at.matvec(&x1);
        let t2 = at.matvec(&x2);
        let gap = linalg::norm_sq(&linalg::sub_vec(&t1, &t2));
        assert!((gap - 2.0).abs() < 1e-12, "‖e₁ − e₂‖² = 2, got {gap}");
    }

    #[test]
    fn rank_deficiency_detection() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![0.0, 0.0]]);
        assert!(transform_rank_deficient(&a));
        assert!(!transform_rank_deficient(&Matrix::identity(3)));
    }

    #[test]
    fn rescale_anchors_and_midpoint() {
        let m_plus = vec![1.0, 3.0];
        let m_minus = vec![-1.0, 1.0];
        assert_eq!(rescale(&m_plus, &m_plus, &m_minus).unwrap(), vec![1.0, 1.0]);
        assert_eq!(rescale(&m_minus, &m_plus, &m_minus).unwrap(), vec![-1.0, -1.0]);
        let mid: Vec<f64> = m_plus.iter().zip(&m_minus).map(|(a, b)| 0.5 * (a + b)).collect();
        assert_eq!(rescale(&mid, &m_plus, &m_minus).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn rescale_rejects_coincident_anchors() {
        let res = rescale(&[0.0, 0.0], &[1.0, 2.0], &[-1.0, 2.0]);
        assert!(matches!(res, Err(ClassifierError::DegenerateFeature { index: 1 })));
    }

    #[test]
    fn linear_scaled_sign_convention() {
        let d = 3;
        let a = vec![1.0 / d as f64; d];
        let ones = batch(&[&[1.0, 1.0, 1.0]]);
        let neg_ones = batch(&[&[-1.0, -1.0, -1.0]]);
        assert_eq!(classify_linear_scaled(&a, &ones), Sign::Plus);
        assert_eq!(classify_linear_scaled(&a, &neg_ones), Sign::Minus);
        // zero aggregate goes to Plus
        let zero = batch(&[&[1.0, -1.0, 0.0]]);
        assert_eq!(classify_linear_scaled(&a, &zero), Sign::Plus);
    }

    #[test]
    fn robust_table_identical_nominals_has_empty_sets() {
        let nominals = vec![gauss1(0.0, 1.0), gauss1(0.0, 1.0)];
        let table = build_robust_table(&nominals, 10_000, 41).unwrap();
        assert_eq!(table.pairs, vec![(0, 1)]);
        // Strict inequality never holds for identical densities.
        assert_eq!(table.integrals[0], vec![0.0, 0.0]);
    }

    #[test]
    fn robust_table_halfline_probability_matches_phi() {
        // N(∓1, 1): A₀₁ = {x < 0} and ∫_{A₀₁} f⁽⁰⁾ = Φ(1) ≈ 0.8413.
        let nominals = vec![gauss1(-1.0, 1.0), gauss1(1.0, 1.0)];
        let n = 100_000;
        let table = build_robust_table(&nominals, n, 43).unwrap();
        let phi1 = 0.841_344_746_068_543;
        let se = (phi1 * (1.0 - phi1) / n as f64).sqrt();
        assert!(
            (table.integrals[0][0] - phi1).abs() < 3.0 * se,
            "∫_A f⁰ = {} vs Φ(1) = {phi1}",
            table.integrals[0][0]
        );
        for row in &table.integrals {
            for &v in row {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn robust_rule_identical_nominals_tie_to_first() {
        let nominals = vec![gauss1(0.0, 1.0), gauss1(0.0, 1.0)];
        let table = build_robust_table(&nominals, 1_000, 47).unwrap();
        let b = batch(&[&[0.3], &[-0.2]]);
        assert_eq!(classify_robust(&table, &nominals, &b).unwrap(), 0);
    }

    #[test]
    fn robust_rule_single_point_discrepancy_arithmetic() {
        // t=1 with the observation inside A₀₁: empirical frequency 1, so
        // discrepancies are |0.8413−1| vs |0.1587−1| and class 0 wins.
        let nominals = vec![gauss1(-1.0, 1.0), gauss1(1.0, 1.0)];
        let table = RobustRuleTable {
            pairs: vec![(0, 1)],
            integrals: vec![vec![0.8413, 0.1587]],
            n_mc: 0,
            seed: 0,
        };
        let b = batch(&[&[-0.5]]);
        assert_eq!(classify_robust(&table, &nominals, &b).unwrap(), 0);
    }

    #[test]
    fn robust_rule_concentrates_on_true_class() {
        // Batches of t = 200 from each nominal: the empirical frequencies
        // concentrate and the rule must recover the label in the clear
        // majority of 1000 seeded trials.
        let nominals = vec![gauss1(-1.0, 1.0), gauss1(1.0, 1.0)];
        let table = build_robust_table(&nominals, 200_000, 53).unwrap();
        let problem = Problem::with_uniform_priors(nominals.clone()).unwrap();
        let mut correct = 0;
        let trials = 1000;
        for trial in 0..trials {
            let label = trial % 2;
            let mut rng = rng_for(59, "robust-conc", &[trial as u64]);
            let b = crate::models::sample_batch(&problem, label, 200, &mut rng).unwrap();
            if classify_robust(&table, &nominals, &b).unwrap() == label {
                correct += 1;
            }
        }
        assert!(
            correct > trials * 9 / 10,
            "robust rule recovered {correct}/{trials} labels"
        );
    }
}

//! Seeded Monte Carlo harness.
//!
//! Estimates conditional and overall error probabilities of any aggregated
//! rule over a grid of repetition counts t, with Wilson score intervals,
//! an exact small-instance vote-distribution oracle, log-linear exponent
//! fitting, and a violation audit of simulation curves against strict
//! bounds.
//!
//! Trials are sharded into fixed blocks of 10⁴ with per-block derived
//! seeds; block counts merge by addition, so estimates never depend on the
//! number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::bounds::BoundReport;
use crate::classifiers::{
    self, ClassifierError, ElementaryClassifier, RobustRuleTable, Sign,
};
use crate::linalg::Matrix;
use crate::models::{self, ClassModel, ConfusionMatrix, ModelError, ObservationBatch, Problem};
use crate::seed;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("instance too large: {0} vote configurations exceed the enumeration cap {1}")]
    InstanceTooLarge(u128, u128),
    #[error("insufficient data: {available} usable points, need {needed}")]
    InsufficientData { available: usize, needed: usize },
    #[error("t-grid mismatch between curve and report")]
    GridMismatch,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

const TRIAL_BLOCK: usize = 10_000;

/// z for the 95% Wilson score interval.
const WILSON_Z: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% for `errors` failures in `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    assert!(trials > 0);
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

// ── aggregated classifier dispatch ──────────────────────────────────

/// Utility families with closed configuration (arbitrary closures go
/// through `classifiers::classify_utility` directly).
#[derive(Debug, Clone)]
pub enum UtilitySpec {
    /// h_j = 1{g = j} for an elementary rule g; reproduces majority vote.
    Indicator(ElementaryClassifier),
    /// h_j = log f_j; reproduces the ML rule.
    LogDensity(Vec<ClassModel>),
    /// h_j = −‖x − x_j‖²; reproduces the prototype rule.
    NegSquaredDistance(Vec<Vec<f64>>),
}

/// Any of the aggregated decision rules, in a form the harness and the
/// CLI can dispatch on.
#[derive(Debug, Clone)]
pub enum AggregatedClassifier {
    Majority(ElementaryClassifier),
    Ml { nominals: Vec<ClassModel> },
    Utility(UtilitySpec),
    Robust { table: RobustRuleTable, nominals: Vec<ClassModel> },
    Prototype { prototypes: Vec<Vec<f64>> },
    PrototypeTransformed { a: Matrix, prototypes: Vec<Vec<f64>> },
    /// Binary scaled linear rule; sign + is class 0, sign − is class 1.
    Linear { a: Vec<f64>, m_plus: Vec<f64>, m_minus: Vec<f64> },
}

impl AggregatedClassifier {
    pub fn classify(&self, batch: &ObservationBatch) -> Result<usize, ClassifierError> {
        match self {
            AggregatedClassifier::Majority(g) => classifiers::classify_majority(g, batch),
            AggregatedClassifier::Ml { nominals } => classifiers::classify_ml(nominals, batch),
            AggregatedClassifier::Utility(spec) => match spec {
                UtilitySpec::Indicator(g) => classifiers::classify_majority(g, batch),
                UtilitySpec::LogDensity(nominals) => classifiers::classify_ml(nominals, batch),
                UtilitySpec::NegSquaredDistance(prototypes) => {
                    classifiers::classify_prototype(prototypes, batch)
                }
            },
            AggregatedClassifier::Robust { table, nominals } => {
                classifiers::classify_robust(table, nominals, batch)
            }
            AggregatedClassifier::Prototype { prototypes } => {
                classifiers::classify_prototype(prototypes, batch)
            }
            AggregatedClassifier::PrototypeTransformed { a, prototypes } => {
                classifiers::classify_prototype_transformed(a, prototypes, batch)
            }
            AggregatedClassifier::Linear { a, m_plus, m_minus } => {
                let mut rescaled = Vec::with_capacity(batch.t());
                for obs in &batch.observations {
                    rescaled.push(classifiers::rescale(obs, m_plus, m_minus)?);
                }
                let sign = classifiers::classify_linear_scaled(a, &ObservationBatch {
                    observations: rescaled,
                });
                Ok(match sign {
                    Sign::Plus => 0,
                    Sign::Minus => 1,
                })
            }
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            AggregatedClassifier::Majority(_) => "majority".into(),
            AggregatedClassifier::Ml { .. } => "ml".into(),
            AggregatedClassifier::Utility(UtilitySpec::Indicator(_)) => "utility-indicator".into(),
            AggregatedClassifier::Utility(UtilitySpec::LogDensity(_)) => "utility-log-density".into(),
            AggregatedClassifier::Utility(UtilitySpec::NegSquaredDistance(_)) => {
                "utility-neg-sq-distance".into()
            }
            AggregatedClassifier::Robust { .. } => "robust".into(),
            AggregatedClassifier::Prototype { .. } => "prototype".into(),
            AggregatedClassifier::PrototypeTransformed { .. } => "prototype-transformed".into(),
            AggregatedClassifier::Linear { .. } => "linear".into(),
        }
    }
}

// ── error estimation ────────────────────────────────────────────────

/// Conditional error estimate for one class.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClassEstimate {
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Error estimates at one t: per-class conditional errors plus the three
/// overall summaries (prior-weighted, uniform average, max over classes —
/// the last is the quantity the exponential bounds control).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ErrorEstimate {
    pub t: usize,
    pub per_class: Vec<ClassEstimate>,
    pub weighted: f64,
    pub uniform: f64,
    pub max_conditional: f64,
    /// Index of the class attaining the max conditional estimate.
    pub max_class: usize,
}

impl ErrorEstimate {
    pub fn total_trials(&self) -> u64 {
        self.per_class.iter().map(|c| c.trials).sum()
    }

    pub fn total_errors(&self) -> u64 {
        self.per_class.iter().map(|c| c.errors).sum()
    }

    /// Wilson interval of the pooled counts.
    pub fn pooled_interval(&self) -> (f64, f64) {
        wilson_interval(self.total_errors(), self.total_trials())
    }
}

/// Estimates the conditional error of `classifier` for every class at
/// batch size t from `trials` seeded batches per class.
pub fn estimate_error(
    problem: &Problem,
    classifier: &AggregatedClassifier,
    t: usize,
    trials: usize,
    seed_value: u64,
) -> Result<ErrorEstimate, SimError> {
    assert!(trials >= 100, "need at least 100 trials per class");
    let m = problem.num_classes();
    let mut per_class = Vec::with_capacity(m);
    for j in 0..m {
        let blocks: Vec<(u64, usize)> = (0..trials)
            .step_by(TRIAL_BLOCK)
            .enumerate()
            .map(|(b, start)| (b as u64, (trials - start).min(TRIAL_BLOCK)))
            .collect();
        let errors: Result<u64, SimError> = blocks
            .par_iter()
            .map(|&(b, len)| {
                let mut rng = seed::rng_for(seed_value, "sim", &[j as u64, t as u64, b]);
                let mut local = 0u64;
                for _ in 0..len {
                    let batch = models::sample_batch(problem, j, t, &mut rng)?;
                    if classifier.classify(&batch)? != j {
                        local += 1;
                    }
                }
                Ok(local)
            })
            .try_reduce(|| 0, |a, b| Ok(a + b));
        let errors = errors?;
        let n = trials as u64;
        let p_hat = errors as f64 / trials as f64;
        let (ci_low, ci_high) = wilson_interval(errors, n);
        per_class.push(ClassEstimate { trials: n, errors, p_hat, ci_low, ci_high });
    }

    let weighted = per_class
        .iter()
        .zip(problem.priors())
        .map(|(c, &pr)| pr * c.p_hat)
        .sum();
    let uniform = per_class.iter().map(|c| c.p_hat).sum::<f64>() / m as f64;
    let max_class = (0..m)
        .max_by(|&a, &b| per_class[a].p_hat.partial_cmp(&per_class[b].p_hat).unwrap())
        .unwrap_or(0);
    let max_conditional = per_class[max_class].p_hat;
    Ok(ErrorEstimate { t, per_class, weighted, uniform, max_conditional, max_class })
}

// ── exact small-instance oracle ─────────────────────────────────────

fn compositions_count(t: usize, m: usize) -> u128 {
    // C(t + m − 1, m − 1)
    let mut c: u128 = 1;
    for i in 0..(m - 1) {
        c = c * (t as u128 + 1 + i as u128) / (i as u128 + 1);
    }
    c
}

const ENUMERATION_CAP: u128 = 10_000_000;

/// Exact conditional error P{g̃ ≠ j | Y = j} of the majority vote under
/// the vote distribution p[j][·], honoring the smallest-index tie-break.
///
/// Binary instances use the binomial closed form for any t; larger M
/// enumerates the multinomial vote configurations and is guarded by a cap
/// of 10⁷ configurations.
pub fn exact_majority_error(p: &ConfusionMatrix, t: usize, j: usize) -> Result<f64, SimError> {
    let (error, total) = exact_enumeration_mass(p, t, j)?;
    if (total - 1.0).abs() > 1e-9 {
        return Err(SimError::Numerical(format!(
            "vote distribution mass {total} deviates from 1"
        )));
    }
    Ok(error)
}

/// The (error mass, total mass) pair of the exact vote-distribution
/// enumeration; the total is exposed so tests can confirm it equals 1.
pub fn exact_enumeration_mass(
    p: &ConfusionMatrix,
    t: usize,
    j: usize,
) -> Result<(f64, f64), SimError> {
    let m = p.num_classes();
    assert!(j < m, "class index out of range");
    assert!(t >= 1);

    if m == 2 {
        return Ok(binary_exact(p, t, j));
    }

    let count = compositions_count(t, m);
    if count > ENUMERATION_CAP {
        return Err(SimError::InstanceTooLarge(count, ENUMERATION_CAP));
    }

    let row = &p.p[j];
    let log_row: Vec<f64> = row.iter().map(|&x| x.ln()).collect();
    let lg_t = ln_gamma(t as f64 + 1.0);

    let mut votes = vec![0usize; m];
    let mut error = 0.0;
    let mut total = 0.0;
    enumerate_votes(
        t,
        0,
        &mut votes,
        &mut |votes: &[usize]| {
            let mut log_p = lg_t;
            for (l, &n_l) in votes.iter().enumerate() {
                if n_l > 0 {
                    if row[l] == 0.0 {
                        return;
                    }
                    log_p += n_l as f64 * log_row[l] - ln_gamma(n_l as f64 + 1.0);
                } else {
                    // n_l = 0 contributes nothing even when p = 0
                }
            }
            let prob = log_p.exp();
            total += prob;
            let decision = argmax_votes(votes);
            if decision != j {
                error += prob;
            }
        },
    );
    Ok((error, total))
}

fn argmax_votes(votes: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in votes.iter().enumerate().skip(1) {
        if v > votes[best] {
            best = i;
        }
    }
    best
}

fn enumerate_votes<F: FnMut(&[usize])>(
    remaining: usize,
    class: usize,
    votes: &mut Vec<usize>,
    visit: &mut F,
) {
    let m = votes.len();
    if class == m - 1 {
        votes[class] = remaining;
        visit(votes);
        votes[class] = 0;
        return;
    }
    for n in 0..=remaining {
        votes[class] = n;
        enumerate_votes(remaining - n, class + 1, votes, visit);
    }
    votes[class] = 0;
}

/// Binomial closed form for M = 2: the vote count for the wrong class is
/// Bin(t, p[j][1−j]); the decision errs when the wrong class outvotes
/// class j, or ties it while j is not the smallest index.
fn binary_exact(p: &ConfusionMatrix, t: usize, j: usize) -> (f64, f64) {
    let q = p.p[j][1 - j];
    let lg_t = ln_gamma(t as f64 + 1.0);
    let pmf = |k: usize| -> f64 {
        if q == 0.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if q == 1.0 {
            return if k == t { 1.0 } else { 0.0 };
        }
        let log_p = lg_t - ln_gamma(k as f64 + 1.0) - ln_gamma((t - k) as f64 + 1.0)
            + k as f64 * q.ln()
            + (t - k) as f64 * (1.0 - q).ln();
        log_p.exp()
    };
    let mut error = 0.0;
    let mut total = 0.0;
    for k in 0..=t {
        let prob = pmf(k);
        total += prob;
        let wrong_votes = k;
        let right_votes = t - k;
        let errs = if wrong_votes > right_votes {
            true
        } else if wrong_votes == right_votes {
            // ties go to class 0
            j != 0
        } else {
            false
        };
        if errs {
            error += prob;
        }
    }
    (error, total)
}

// ── t-grid sweeps ───────────────────────────────────────────────────

/// Per-t Monte Carlo error estimates for one classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimCurve {
    pub descriptor: String,
    pub seed: u64,
    pub trials_per_class: usize,
    pub points: Vec<ErrorEstimate>,
}

impl SimCurve {
    pub fn t_grid(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.t).collect()
    }

    /// CSV with one row per t: pooled columns, the three overall
    /// summaries, then per-class counts and intervals.
    pub fn to_csv(&self) -> String {
        let m = self.points.first().map_or(0, |p| p.per_class.len());
        let mut out = String::from("# repobs simcurve v1\n");
        out.push_str(&format!("# classifier={} seed={}\n", self.descriptor, self.seed));
        out.push_str("t,trials,errors,p_hat,ci_low,ci_high,p_uniform,p_max,max_class");
        for j in 1..=m {
            out.push_str(&format!(",errors_c{j},p_hat_c{j},ci_low_c{j},ci_high_c{j}"));
        }
        out.push('\n');
        for point in &self.points {
            let (lo, hi) = point.pooled_interval();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}",
                point.t,
                point.total_trials(),
                point.total_errors(),
                point.weighted,
                lo,
                hi,
                point.uniform,
                point.max_conditional,
                point.max_class + 1
            ));
            for c in &point.per_class {
                out.push_str(&format!(",{},{},{},{}", c.errors, c.p_hat, c.ci_low, c.ci_high));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs `estimate_error` at every t in the ascending grid.
pub fn sweep_t(
    problem: &Problem,
    classifier: &AggregatedClassifier,
    t_grid: &[usize],
    trials: usize,
    seed_value: u64,
) -> Result<SimCurve, SimError> {
    assert!(!t_grid.is_empty(), "t-grid must be nonempty");
    assert!(t_grid.windows(2).all(|w| w[0] < w[1]), "t-grid must be ascending");
    let mut points = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        points.push(estimate_error(problem, classifier, t, trials, seed_value)?);
    }
    Ok(SimCurve {
        descriptor: classifier.descriptor(),
        seed: seed_value,
        trials_per_class: trials,
        points,
    })
}

// ── exponent fitting ────────────────────────────────────────────────

/// Least-squares fit of ln(error) against t.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    /// t values dropped because their error estimate was zero.
    pub excluded_t: Vec<usize>,
}

/// Fits ln p against t over the points with positive error; needs at
/// least three. `weights` (inverse-variance weighting of ln p̂) is the
/// optional refinement; the default fit is unweighted.
pub fn fit_exponent_points(
    points: &[(usize, f64)],
    weights: Option<&[f64]>,
) -> Result<ExponentFit, SimError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    let mut excluded_t = Vec::new();
    for (i, &(t, p)) in points.iter().enumerate() {
        if p > 0.0 {
            xs.push(t as f64);
            ys.push(p.ln());
            ws.push(weights.map_or(1.0, |w| w[i]));
        } else {
            excluded_t.push(t);
        }
    }
    if xs.len() < 3 {
        return Err(SimError::InsufficientData { available: xs.len(), needed: 3 });
    }
    let wsum: f64 = ws.iter().sum();
    let xbar: f64 = xs.iter().zip(&ws).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let ybar: f64 = ys.iter().zip(&ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let sxx: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((x, y), w)| w * (x - xbar) * (y - ybar))
        .sum();
    if sxx == 0.0 {
        return Err(SimError::Numerical("degenerate t-grid for the fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_tot: f64 = ys.iter().zip(&ws).map(|(y, w)| w * (y - ybar) * (y - ybar)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .zip(&ws)
        .map(|((x, y), w)| {
            let r = y - (intercept + slope * x);
            w * r * r
        })
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(ExponentFit { slope, intercept, r_squared, points_used: xs.len(), excluded_t })
}

/// Fits the prior-weighted overall error curve.
pub fn fit_exponent(curve: &SimCurve) -> Result<ExponentFit, SimError> {
    let points: Vec<(usize, f64)> = curve.points.iter().map(|p| (p.t, p.weighted)).collect();
    fit_exponent_points(&points, None)
}

/// Inverse-variance weighted variant: Var(ln p̂) ≈ (1−p)/(n p).
pub fn fit_exponent_weighted(curve: &SimCurve) -> Result<ExponentFit, SimError> {
    let points: Vec<(usize, f64)> = curve.points.iter().map(|p| (p.t, p.weighted)).collect();
    let weights: Vec<f64> = curve
        .points
        .iter()
        .map(|p| {
            let n = p.total_trials() as f64;
            if p.weighted > 0.0 && p.weighted < 1.0 {
                n * p.weighted / (1.0 - p.weighted)
            } else {
                1.0
            }
        })
        .collect();
    fit_exponent_points(&points, Some(&weights))
}

// ── bound auditing ──────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuditVerdict {
    /// Strict bound holds against the Wilson lower bound.
    Ok,
    /// Wilson lower bound exceeds the strict bound value.
    Violation,
    /// Normal approximation: reported, never judged.
    Approx,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRow {
    pub t: usize,
    pub bound_name: String,
    pub bound_value: f64,
    pub ci_low: f64,
    pub verdict: AuditVerdict,
}

/// Checks the max-over-class conditional error (the quantity the strict
/// bounds control) against every column of the report. A VIOLATION is
/// flagged only when the Wilson lower bound of the worst class clears the
/// bound value; approximation columns are listed but never judged.
pub fn audit_bounds(curve: &SimCurve, report: &BoundReport) -> Result<Vec<AuditRow>, SimError> {
    if curve.t_grid() != report.t_grid {
        return Err(SimError::GridMismatch);
    }
    let mut rows = Vec::new();
    for (i, point) in curve.points.iter().enumerate() {
        let worst = &point.per_class[point.max_class];
        for col in &report.columns {
            let verdict = if col.approx {
                AuditVerdict::Approx
            } else if worst.ci_low > col.values[i] {
                AuditVerdict::Violation
            } else {
                AuditVerdict::Ok
            };
            rows.push(AuditRow {
                t: point.t,
                bound_name: col.name.clone(),
                bound_value: col.values[i],
                ci_low: worst.ci_low,
                verdict,
            });
        }
    }
    Ok(rows)
}

/// CSV for an audit listing.
pub fn audit_to_csv(rows: &[AuditRow]) -> String {
    let mut out = String::from("# repobs audit v1\n");
    out.push_str("t,bound_name,bound_value,ci_low,verdict\n");
    for r in rows {
        let verdict = match r.verdict {
            AuditVerdict::Ok => "OK",
            AuditVerdict::Violation => "VIOLATION",
            AuditVerdict::Approx => "APPROX",
        };
        out.push_str(&format!(
            "{},{},{},{},{verdict}\n",
            r.t, r.bound_name, r.bound_value, r.ci_low
        ));
    }
    out
}

// ── helpers for common problems ─────────────────────────────────────

/// Two discrete classes on {0, 1} whose nominal-ML majority vote has the
/// symmetric binary confusion matrix [[p, 1−p], [1−p, p]] exactly.
pub fn symmetric_binary_problem(p: f64) -> Problem {
    use crate::models::DiscreteClass;
    assert!(p > 0.5 && p < 1.0);
    let c0 = ClassModel::Discrete(
        DiscreteClass::new(vec![vec![0.0], vec![1.0]], vec![p, 1.0 - p]).unwrap(),
    );
    let c1 = ClassModel::Discrete(
        DiscreteClass::new(vec![vec![0.0], vec![1.0]], vec![1.0 - p, p]).unwrap(),
    );
    Problem::with_uniform_priors(vec![c0, c1]).unwrap()
}

/// The matching elementary rule for `symmetric_binary_problem`.
pub fn symmetric_binary_elementary(problem: &Problem) -> ElementaryClassifier {
    ElementaryClassifier::NominalMl { nominals: problem.classes().to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GaussianClass;

    fn gauss1(mu: f64, sigma_sq: f64) -> ClassModel {
        ClassModel::Gaussian(GaussianClass::isotropic(vec![mu], sigma_sq).unwrap())
    }

    #[test]
    fn wilson_interval_contains_estimate_and_behaves_at_zero() {
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
        let (lo, hi) = wilson_interval(500, 1000);
        assert!(lo < 0.5 && hi > 0.5);
    }

    #[test]
    fn exact_binary_values() {
        let p = ConfusionMatrix::symmetric_binary(0.8);
        assert!((exact_majority_error(&p, 1, 0).unwrap() - 0.2).abs() < 1e-14);
        // t = 3: 3·0.04·0.8 + 0.008 = 0.104
        assert!((exact_majority_error(&p, 3, 0).unwrap() - 0.104).abs() < 1e-12);
        // t = 2, class 1 (zero-based): tie mass counts against it:
        // 2·0.2·0.8 + 0.04 = 0.36
        assert!((exact_majority_error(&p, 2, 1).unwrap() - 0.36).abs() < 1e-12);
        // while class 0 wins ties: only the both-wrong event errs
        assert!((exact_majority_error(&p, 2, 0).unwrap() - 0.04).abs() < 1e-12);
    }

    #[test]
    fn exact_enumeration_matches_binomial_for_m2_path() {
        // Force the multinomial path by a 3-class matrix whose third class
        // is unreachable; it must agree with the binary closed form.
        let p3 = ConfusionMatrix::new(vec![
            vec![0.8, 0.2, 0.0],
            vec![0.2, 0.8, 0.0],
            vec![0.25, 0.25, 0.5],
        ])
        .unwrap();
        let p2 = ConfusionMatrix::symmetric_binary(0.8);
        for t in [1, 2, 3, 5, 8] {
            let (e3, total3) = exact_enumeration_mass(&p3, t, 0).unwrap();
            let (e2, _) = exact_enumeration_mass(&p2, t, 0).unwrap();
            assert!((e3 - e2).abs() < 1e-12, "t = {t}: {e3} vs {e2}");
            assert!((total3 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_enumeration_mass_sums_to_one() {
        let p = ConfusionMatrix::new(vec![
            vec![0.7, 0.2, 0.1],
            vec![0.15, 0.8, 0.05],
            vec![0.1, 0.15, 0.75],
        ])
        .unwrap();
        for t in [1, 4, 9, 14] {
            for j in 0..3 {
                let (_, total) = exact_enumeration_mass(&p, t, j).unwrap();
                assert!((total - 1.0).abs() < 1e-12, "mass {total} at t = {t}, j = {j}");
            }
        }
    }

    #[test]
    fn enumeration_cap_guards_large_instances() {
        let p = ConfusionMatrix::new(vec![
            vec![0.7, 0.1, 0.1, 0.05, 0.05],
            vec![0.1, 0.7, 0.1, 0.05, 0.05],
            vec![0.1, 0.1, 0.7, 0.05, 0.05],
            vec![0.05, 0.05, 0.1, 0.7, 0.1],
            vec![0.05, 0.05, 0.1, 0.1, 0.7],
        ])
        .unwrap();
        assert!(matches!(
            exact_majority_error(&p, 2000, 0),
            Err(SimError::InstanceTooLarge(_, _))
        ));
    }

    #[test]
    fn estimate_error_is_seed_deterministic_and_worker_independent() {
        let problem = symmetric_binary_problem(0.8);
        let g = symmetric_binary_elementary(&problem);
        let clf = AggregatedClassifier::Majority(g);
        let a = estimate_error(&problem, &clf, 3, 15_000, 77).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| estimate_error(&problem, &clf, 3, 15_000, 77).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn perfectly_separated_discrete_classes_have_zero_error() {
        use crate::models::DiscreteClass;
        let c0 = ClassModel::Discrete(DiscreteClass::new(vec![vec![0.0]], vec![1.0]).unwrap());
        let c1 = ClassModel::Discrete(DiscreteClass::new(vec![vec![1.0]], vec![1.0]).unwrap());
        let problem = Problem::with_uniform_priors(vec![c0.clone(), c1.clone()]).unwrap();
        let clf = AggregatedClassifier::Majority(ElementaryClassifier::NominalMl {
            nominals: vec![c0, c1],
        });
        let est = estimate_error(&problem, &clf, 2, 500, 5).unwrap();
        assert_eq!(est.total_errors(), 0);
        assert_eq!(est.max_conditional, 0.0);
    }

    #[test]
    fn estimate_matches_exact_oracle_at_small_t() {
        let problem = symmetric_binary_problem(0.8);
        let clf = AggregatedClassifier::Majority(symmetric_binary_elementary(&problem));
        let p = ConfusionMatrix::symmetric_binary(0.8);
        let trials = 40_000;
        // t = 1: aggregation of a single vote is the elementary rule.
        for t in [1usize, 3] {
            let est = estimate_error(&problem, &clf, t, trials, 99).unwrap();
            for j in 0..2 {
                let exact = exact_majority_error(&p, t, j).unwrap();
                let se = (exact * (1.0 - exact) / trials as f64).sqrt();
                assert!(
                    (est.per_class[j].p_hat - exact).abs() < 3.0 * se,
                    "t={t} j={j}: {} vs {exact}",
                    est.per_class[j].p_hat
                );
            }
        }
    }

    #[test]
    fn oracle_agreement_on_p_t_grid() {
        // Monte Carlo within 4 binomial SE of the exact value across
        // p ∈ {0.6, 0.7, 0.8, 0.9} and odd t ≤ 15.
        let trials = 20_000;
        for &p_diag in &[0.6, 0.7, 0.8, 0.9] {
            let problem = symmetric_binary_problem(p_diag);
            let clf = AggregatedClassifier::Majority(symmetric_binary_elementary(&problem));
            let p = ConfusionMatrix::symmetric_binary(p_diag);
            for t in [1usize, 5, 9, 15] {
                let est = estimate_error(&problem, &clf, t, trials, 1234).unwrap();
                let exact = exact_majority_error(&p, t, 0).unwrap();
                let se = (exact * (1.0 - exact) / trials as f64).sqrt().max(1e-6);
                assert!(
                    (est.per_class[0].p_hat - exact).abs() < 4.0 * se,
                    "p={p_diag} t={t}: {} vs {exact}",
                    est.per_class[0].p_hat
                );
            }
        }
    }

    #[test]
    fn sweep_is_consistent_with_single_estimates() {
        let problem = symmetric_binary_problem(0.8);
        let clf = AggregatedClassifier::Majority(symmetric_binary_elementary(&problem));
        let curve = sweep_t(&problem, &clf, &[1], 1000, 3).unwrap();
        let single = estimate_error(&problem, &clf, 1, 1000, 3).unwrap();
        assert_eq!(curve.points[0], single);
    }

    #[test]
    fn sweep_estimates_decay_up_to_noise() {
        let problem = symmetric_binary_problem(0.8);
        let clf = AggregatedClassifier::Majority(symmetric_binary_elementary(&problem));
        let trials = 20_000;
        let curve = sweep_t(&problem, &clf, &[1, 3, 5, 7, 9], trials, 11).unwrap();
        for w in curve.points.windows(2) {
            let se = 3.0
                * (w[0].max_conditional * (1.0 - w[0].max_conditional) / trials as f64)
                    .sqrt();
            assert!(
                w[1].max_conditional <= w[0].max_conditional + se,
                "error increased beyond noise: {} -> {}",
                w[0].max_conditional,
                w[1].max_conditional
            );
        }
    }

    #[test]
    fn fit_recovers_synthetic_exponent_exactly() {
        let points: Vec<(usize, f64)> = (1..=10).map(|t| (t, (-0.5 * t as f64).exp())).collect();
        let fit = fit_exponent_points(&points, None).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.points_used, 10);
        assert!(fit.excluded_t.is_empty());
    }

    #[test]
    fn fit_constant_curve_has_zero_slope() {
        let points: Vec<(usize, f64)> = (1..=5).map(|t| (t, 0.25)).collect();
        let fit = fit_exponent_points(&points, None).unwrap();
        assert!(fit.slope.abs() < 1e-14);
    }

    #[test]
    fn fit_excludes_zero_counts_and_errors_below_three_points() {
        let points = vec![(1, 0.5), (2, 0.25), (3, 0.0), (4, 0.06)];
        let fit = fit_exponent_points(&points, None).unwrap();
        assert_eq!(fit.points_used, 3);
        assert_eq!(fit.excluded_t, vec![3]);

        let too_few = vec![(1, 0.5), (2, 0.0), (3, 0.0)];
        assert!(matches!(
            fit_exponent_points(&too_few, None),
            Err(SimError::InsufficientData { available: 1, needed: 3 })
        ));
    }

    #[test]
    fn fit_on_exact_binomial_curve_approaches_sanov_slope() {
        let p = ConfusionMatrix::symmetric_binary(0.8);
        let points: Vec<(usize, f64)> = (21..=61)
            .step_by(2)
            .map(|t| (t, exact_majority_error(&p, t, 0).unwrap()))
            .collect();
        let fit = fit_exponent_points(&points, None).unwrap();
        let target = 0.8f64.ln();
        assert!(
            (fit.slope - target).abs() / fit.slope.abs() < 0.05,
            "slope {} vs ln 0.8 = {target}",
            fit.slope
        );
    }

    #[test]
    fn audit_flags_only_true_violations() {
        use crate::bounds::{BoundColumn, BoundReport};
        let problem = symmetric_binary_problem(0.8);
        let clf = AggregatedClassifier::Majority(symmetric_binary_elementary(&problem));
        let t_grid = vec![1, 3, 5];
        let curve = sweep_t(&problem, &clf, &t_grid, 20_000, 21).unwrap();

        let mut report = BoundReport::new(t_grid.clone());
        let vote_bound: Vec<f64> = t_grid
            .iter()
            .map(|&t| crate::bounds::majority_vote_bound(&ConfusionMatrix::symmetric_binary(0.8), t).unwrap())
            .collect();
        report.push(BoundColumn::strict("majority-vote", vote_bound, None));
        report.push(BoundColumn::strict("ones", vec![1.0; 3], None));
        let wrong: Vec<f64> = t_grid.iter().map(|&t| (-10.0 * t as f64).exp()).collect();
        report.push(BoundColumn::strict("wrong", wrong, None));
        let clt: Vec<f64> = vec![0.0; 3];
        report.push(BoundColumn::approximation("clt", clt));

        let rows = audit_bounds(&curve, &report).unwrap();
        for r in &rows {
            match r.bound_name.as_str() {
                "majority-vote" | "ones" => assert_eq!(r.verdict, AuditVerdict::Ok, "t={}", r.t),
                "wrong" => assert_eq!(r.verdict, AuditVerdict::Violation, "t={}", r.t),
                "clt" => assert_eq!(r.verdict, AuditVerdict::Approx),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn audit_rejects_mismatched_grids() {
        use crate::bounds::BoundReport;
        let problem = symmetric_binary_problem(0.8);
        let clf = AggregatedClassifier::Majority(symmetric_binary_elementary(&problem));
        let curve = sweep_t(&problem, &clf, &[1, 3], 1000, 2).unwrap();
        let report = BoundReport::new(vec![1, 2]);
        assert!(matches!(audit_bounds(&curve, &report), Err(SimError::GridMismatch)));
    }

    #[test]
    fn linear_rule_dispatch_maps_signs_to_classes() {
        let problem = Problem::with_uniform_priors(vec![gauss1(1.0, 0.01), gauss1(-1.0, 0.01)])
            .unwrap();
        let clf = AggregatedClassifier::Linear {
            a: vec![1.0],
            m_plus: vec![1.0],
            m_minus: vec![-1.0],
        };
        let est = estimate_error(&problem, &clf, 4, 500, 8).unwrap();
        assert!(est.max_conditional < 0.01, "well-separated classes: {est:?}");
    }
}

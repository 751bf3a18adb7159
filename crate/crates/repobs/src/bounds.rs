//! Error bounds and CLT approximations for the aggregated rules.
//!
//! Everything evaluates in closed form. Strict bounds (likelihood ratio,
//! majority vote, Hoeffding, moment, robust) are safe to audit against
//! simulation; the normal approximations are labeled `approx` in reports
//! and are only ever checked for discrepancy decay.
//!
//! Strict bounds can exceed 1 at small t; reports carry both the raw value
//! and a clipped copy.

use serde::{Deserialize, Serialize};
use statrs::function::erf;
use thiserror::Error;

use crate::linalg::{self, Matrix};
use crate::models::{self, ClassModel, ConfusionMatrix};

#[derive(Debug, Error)]
pub enum BoundError {
    #[error("margin violated: p[{j},{j}] = {pjj} does not exceed p[{j},{l}] = {pjl}")]
    Margin { j: usize, l: usize, pjj: f64, pjl: f64 },
    #[error("diagonal margin violated: p_jj = {0} must exceed 1/2")]
    BinaryMargin(f64),
    #[error("utility margin delta = {0} must be positive")]
    DeltaMargin(f64),
    #[error("bound requires {0}")]
    MissingInput(String),
    #[error("out of regime: {0}")]
    OutOfRegime(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("undefined: zero variance with zero gap")]
    Undefined,
    #[error(transparent)]
    Model(#[from] models::ModelError),
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// A bound value together with its error exponent (the rate E in e^{-Et}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub exponent: f64,
}

// ── likelihood-ratio and majority-vote bounds ──────────────────────

/// Chernoff bound for the ML rule on known densities:
/// (M−1)·exp(−t·min_{l≠j} B(f_j, f_l)).
///
/// An infinite Bhattacharyya distance (disjoint supports) gives bound 0
/// with exponent +∞.
pub fn ml_bound(nominals: &[ClassModel], t: usize) -> Result<BoundValue, BoundError> {
    let m = nominals.len();
    let mut min_b = f64::INFINITY;
    for j in 0..m {
        for l in 0..m {
            if l != j {
                let b = models::bhattacharyya(&nominals[j], &nominals[l])?;
                min_b = min_b.min(b);
            }
        }
    }
    let value = if min_b.is_infinite() {
        0.0
    } else {
        (m as f64 - 1.0) * (-(t as f64) * min_b).exp()
    };
    Ok(BoundValue { value, exponent: min_b })
}

fn check_margins(p: &ConfusionMatrix) -> Result<(), BoundError> {
    let m = p.num_classes();
    for j in 0..m {
        for l in 0..m {
            if l != j && p.p[j][j] <= p.p[j][l] {
                return Err(BoundError::Margin { j, l, pjj: p.p[j][j], pjl: p.p[j][l] });
            }
        }
    }
    Ok(())
}

/// Majority-vote bound max_j Σ_{l≠j} (1 − (√p_jj − √p_jl)²)^t.
///
/// Requires the margin p_jj > p_jl for every l ≠ j. A perfect elementary
/// classifier (p_jj = 1, off-diagonals 0) gives 0.
pub fn majority_vote_bound(p: &ConfusionMatrix, t: usize) -> Result<f64, BoundError> {
    check_margins(p)?;
    let m = p.num_classes();
    let mut worst: f64 = 0.0;
    for j in 0..m {
        let mut sum = 0.0;
        for l in 0..m {
            if l != j {
                let base = 1.0 - (p.p[j][j].sqrt() - p.p[j][l].sqrt()).powi(2);
                sum += base.powi(t as i32);
            }
        }
        worst = worst.max(sum);
    }
    Ok(worst)
}

/// Binary simplification (2√(p_jj(1−p_jj)))^t, valid when min_j p_jj > 1/2.
pub fn binary_bound(p_jj: f64, t: usize) -> Result<f64, BoundError> {
    if p_jj <= 0.5 {
        return Err(BoundError::BinaryMargin(p_jj));
    }
    Ok((2.0 * (p_jj * (1.0 - p_jj)).sqrt()).powi(t as i32))
}

/// The exact error-exponent limit max_{j≠l} ln(1 − (√p_jj − √p_jl)²).
///
/// −∞ (perfect elementary classifier) is allowed.
pub fn sanov_exponent(p: &ConfusionMatrix) -> Result<f64, BoundError> {
    check_margins(p)?;
    let m = p.num_classes();
    let mut worst = f64::NEG_INFINITY;
    for j in 0..m {
        for l in 0..m {
            if l != j {
                let base = 1.0 - (p.p[j][j].sqrt() - p.p[j][l].sqrt()).powi(2);
                worst = worst.max(base.ln());
            }
        }
    }
    Ok(worst)
}

/// Normal approximation Φ(−√t (p_jj − p_jl)/σ) of the pairwise vote-count
/// comparison, with the trinomial variance
/// σ² = p_jl + p_jj − (p_jl − p_jj)².
pub fn clt_majority(p_jj: f64, p_jl: f64, t: usize) -> Result<f64, BoundError> {
    let gap = p_jj - p_jl;
    let var = p_jl + p_jj - gap * gap;
    if var <= 0.0 {
        return if gap > 0.0 { Ok(0.0) } else { Err(BoundError::Undefined) };
    }
    if gap <= 0.0 {
        return Err(BoundError::Margin { j: 0, l: 1, pjj: p_jj, pjl: p_jl });
    }
    Ok(normal_cdf(-(t as f64).sqrt() * gap / var.sqrt()))
}

// ── utility aggregation bounds ──────────────────────────────────────

/// Moments of the utility functions: q[j][l] = E{h_l(V₁) | Y=j}, the
/// pairwise variances Var(h_l − h_j | Y=j), an optional uniform bound K on
/// |h_j|, and an optional moment constant c₁.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityMoments {
    pub q: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub k_bound: Option<f64>,
    pub c1: Option<f64>,
}

impl UtilityMoments {
    /// The margin δ = min_{l≠j} (q_jj − q_jl).
    pub fn delta(&self) -> f64 {
        let m = self.q.len();
        let mut delta = f64::INFINITY;
        for j in 0..m {
            for l in 0..m {
                if l != j {
                    delta = delta.min(self.q[j][j] - self.q[j][l]);
                }
            }
        }
        delta
    }

    /// Indicator utilities h_j = 1{g = j}: q is the confusion matrix, the
    /// variances are trinomial, and K = 1.
    pub fn indicator(p: &ConfusionMatrix) -> Self {
        let m = p.num_classes();
        let mut variances = vec![vec![0.0; m]; m];
        for j in 0..m {
            for l in 0..m {
                if l != j {
                    let gap = p.p[j][j] - p.p[j][l];
                    variances[j][l] = p.p[j][l] + p.p[j][j] - gap * gap;
                }
            }
        }
        UtilityMoments { q: p.p.clone(), variances, k_bound: Some(1.0), c1: None }
    }

    /// Prototype utilities h_j = −‖x − x_j‖² with prototypes at the class
    /// means: the gap is ‖x_j − x_l‖² and the variance is
    /// 4 (x_j − x_l, C_j (x_j − x_l)).
    pub fn prototype(prototypes: &[Vec<f64>], covariances: &[Matrix]) -> Self {
        let m = prototypes.len();
        let mut q = vec![vec![0.0; m]; m];
        let mut variances = vec![vec![0.0; m]; m];
        for j in 0..m {
            for l in 0..m {
                if l != j {
                    let gap_vec = linalg::sub_vec(&prototypes[j], &prototypes[l]);
                    // q_jj − q_jl = ‖x_j − x_l‖²; store q_jl = −gap, q_jj = 0.
                    q[j][l] = -linalg::norm_sq(&gap_vec);
                    variances[j][l] = 4.0 * linalg::quad_form(&covariances[j], &gap_vec);
                }
            }
        }
        UtilityMoments { q, variances, k_bound: None, c1: None }
    }
}

/// Hoeffding bound for bounded utilities: (M−1)·exp(−t δ²/(2K²)).
pub fn hoeffding_bound(moments: &UtilityMoments, t: usize) -> Result<BoundValue, BoundError> {
    let k = moments
        .k_bound
        .ok_or_else(|| BoundError::MissingInput("a finite bound K on |h_j|".into()))?;
    if !k.is_finite() || k <= 0.0 {
        return Err(BoundError::MissingInput("a finite positive K".into()));
    }
    let delta = moments.delta();
    if delta <= 0.0 {
        return Err(BoundError::DeltaMargin(delta));
    }
    let m = moments.q.len() as f64;
    let exponent = delta * delta / (2.0 * k * k);
    Ok(BoundValue { value: (m - 1.0) * (-(t as f64) * exponent).exp(), exponent })
}

/// Outcome of the moment-condition bound: the geometric base ρ, the two
/// chained exponents, and the explicit floor δ²/(40c₁²).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentBound {
    pub value: f64,
    pub rho: f64,
    /// −ln ρ, the sharp exponent of the chain.
    pub exponent: f64,
    /// The middle link (1 − 2√(c₁/(4c₁+δ)))² / (2c₁/(4c₁+δ)).
    pub quadratic_exponent: f64,
    /// The closed-form floor δ²/(40c₁²).
    pub floor: f64,
}

/// Bound under the k-th-moment growth condition E|h|ᵏ ≤ c₁ᵏ k!:
/// (M−1)·ρᵗ with ρ = 1 − (1 − 2√(c₁/(4c₁+δ)))² / (2c₁/(4c₁+δ)).
///
/// The optimizing tilt only lands inside the admissible range when
/// 0 < δ ≤ 2c₁.
pub fn moment_bound(moments: &UtilityMoments, t: usize) -> Result<MomentBound, BoundError> {
    let c1 = moments
        .c1
        .ok_or_else(|| BoundError::MissingInput("the moment constant c1".into()))?;
    if !c1.is_finite() || c1 <= 0.0 {
        return Err(BoundError::MissingInput("a positive c1".into()));
    }
    let delta = moments.delta();
    if delta <= 0.0 {
        return Err(BoundError::DeltaMargin(delta));
    }
    if delta > 2.0 * c1 {
        return Err(BoundError::OutOfRegime(format!(
            "delta = {delta} exceeds 2 c1 = {}",
            2.0 * c1
        )));
    }
    let ratio = c1 / (4.0 * c1 + delta);
    let quadratic_exponent = (1.0 - 2.0 * ratio.sqrt()).powi(2) / (2.0 * ratio);
    let rho = 1.0 - quadratic_exponent;
    let m = moments.q.len() as f64;
    Ok(MomentBound {
        value: (m - 1.0) * rho.powi(t as i32),
        rho,
        exponent: -rho.ln(),
        quadratic_exponent,
        floor: delta * delta / (40.0 * c1 * c1),
    })
}

/// Normal approximation Φ(−√t (q_jj − q_jl)/√Var(h_l − h_j | Y=j)) for a
/// specific ordered class pair.
pub fn clt_utility(moments: &UtilityMoments, j: usize, l: usize, t: usize) -> Result<f64, BoundError> {
    let gap = moments.q[j][j] - moments.q[j][l];
    let var = moments.variances[j][l];
    if var <= 0.0 {
        return if gap > 0.0 { Ok(0.0) } else { Err(BoundError::Undefined) };
    }
    Ok(normal_cdf(-(t as f64).sqrt() * gap / var.sqrt()))
}

// ── robust rule bound ───────────────────────────────────────────────

/// Robust-rule bound 2M(M−1)²·e^{−tε²/2} for a user-chosen distortion
/// margin ε. The artifact never infers ε: its admissible size depends on
/// the unknown true density.
pub fn robust_bound(eps: f64, m: usize, t: usize) -> BoundValue {
    assert!(eps > 0.0, "distortion margin must be positive");
    let m = m as f64;
    let exponent = eps * eps / 2.0;
    BoundValue {
        value: 2.0 * m * (m - 1.0) * (m - 1.0) * (-(t as f64) * exponent).exp(),
        exponent,
    }
}

// ── prototype bounds ────────────────────────────────────────────────

/// The tight and trace-relaxed prototype approximations
/// exp(−t‖x_j−x_l‖⁴ / (8(x_j−x_l, C_j(x_j−x_l)))) and
/// exp(−t‖x_j−x_l‖² / (8 tr C_j)); the first never exceeds the second.
pub fn prototype_bound(
    x_j: &[f64],
    x_l: &[f64],
    c_j: &Matrix,
    t: usize,
) -> Result<(f64, f64), BoundError> {
    let gap_vec = linalg::sub_vec(x_j, x_l);
    let gap_sq = linalg::norm_sq(&gap_vec);
    if gap_sq == 0.0 {
        return Err(BoundError::Degenerate("coincident prototypes".into()));
    }
    let quad = linalg::quad_form(c_j, &gap_vec);
    let tight = (-(t as f64) * gap_sq * gap_sq / (8.0 * quad)).exp();
    let trace = (-(t as f64) * gap_sq / (8.0 * c_j.trace())).exp();
    Ok((tight, trace))
}

/// The transformed counterparts using the covariance AᵀC_jA of the
/// transformed observation.
pub fn transformed_bound(
    a: &Matrix,
    x_j: &[f64],
    x_l: &[f64],
    c_j: &Matrix,
    t: usize,
) -> Result<(f64, f64), BoundError> {
    let at = a.transpose();
    let gap_vec = at.matvec(&linalg::sub_vec(x_j, x_l));
    let gap_sq = linalg::norm_sq(&gap_vec);
    if gap_sq == 0.0 {
        return Err(BoundError::Degenerate("transform annihilates the mean gap".into()));
    }
    let cov_t = at.matmul(c_j).matmul(a);
    let quad = linalg::quad_form(&cov_t, &gap_vec);
    let tight = (-(t as f64) * gap_sq * gap_sq / (8.0 * quad)).exp();
    let trace = (-(t as f64) * gap_sq / (8.0 * cov_t.trace())).exp();
    Ok((tight, trace))
}

/// The hard transform criterion
/// σ²(A) = max_{l≠j} tr(AᵀC_jA) / ‖Aᵀ(x_j − x_l)‖²; the aggregate bound is
/// (M−1)·e^{−t/(8σ²(A))}.
pub fn sigma_of_a(
    a: &Matrix,
    prototypes: &[Vec<f64>],
    covariances: &[Matrix],
) -> Result<f64, BoundError> {
    let m = prototypes.len();
    let at = a.transpose();
    let mut worst: f64 = f64::NEG_INFINITY;
    for j in 0..m {
        let trace = at.matmul(&covariances[j]).matmul(a).trace();
        for l in 0..m {
            if l != j {
                let gap = at.matvec(&linalg::sub_vec(&prototypes[j], &prototypes[l]));
                let gap_sq = linalg::norm_sq(&gap);
                if gap_sq == 0.0 {
                    return Err(BoundError::Degenerate(format!(
                        "transform annihilates the gap of classes {j} and {l}"
                    )));
                }
                worst = worst.max(trace / gap_sq);
            }
        }
    }
    Ok(worst)
}

/// Aggregate transformed-prototype bound (M−1)·e^{−t/(8σ²)}.
pub fn sigma_aggregate_bound(sigma_sq: f64, m: usize, t: usize) -> f64 {
    (m as f64 - 1.0) * (-(t as f64) / (8.0 * sigma_sq)).exp()
}

// ── scaled linear rule bound ────────────────────────────────────────

/// Proposition-style approximation 2·e^{−t/(2 max{σ²₋, σ²₊})} for the
/// scaled linear rule with per-class variances of the averaged rescaled
/// coordinates.
pub fn linear_bound(sigma_minus_sq: f64, sigma_plus_sq: f64, t: usize) -> Result<BoundValue, BoundError> {
    if sigma_minus_sq <= 0.0 || sigma_plus_sq <= 0.0 {
        return Err(BoundError::Degenerate("zero variance: infinite exponent".into()));
    }
    let worst = sigma_minus_sq.max(sigma_plus_sq);
    let exponent = 1.0 / (2.0 * worst);
    Ok(BoundValue { value: 2.0 * (-(t as f64) * exponent).exp(), exponent })
}

/// Companion form 2·e^{−t/(2σ²(a))} for a general scaling vector.
pub fn linear_bound_sigma(sigma_a_sq: f64, t: usize) -> Result<BoundValue, BoundError> {
    if sigma_a_sq <= 0.0 {
        return Err(BoundError::Degenerate("zero variance: infinite exponent".into()));
    }
    let exponent = 1.0 / (2.0 * sigma_a_sq);
    Ok(BoundValue { value: 2.0 * (-(t as f64) * exponent).exp(), exponent })
}

// ── reports ─────────────────────────────────────────────────────────

/// Values of one bound family on a t-grid. CLT approximations carry
/// `approx = true` and are excluded from violation audits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundColumn {
    pub name: String,
    pub approx: bool,
    pub values: Vec<f64>,
    pub values_clipped: Vec<f64>,
    /// The error exponent where the family defines one.
    pub exponent: Option<f64>,
}

impl BoundColumn {
    pub fn strict(name: &str, values: Vec<f64>, exponent: Option<f64>) -> Self {
        let values_clipped = values.iter().map(|v| v.min(1.0)).collect();
        BoundColumn { name: name.to_string(), approx: false, values, values_clipped, exponent }
    }

    pub fn approximation(name: &str, values: Vec<f64>) -> Self {
        let values_clipped = values.iter().map(|v| v.min(1.0)).collect();
        BoundColumn { name: name.to_string(), approx: true, values, values_clipped, exponent: None }
    }
}

/// Bound values over a t-grid, one column per bound family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub t_grid: Vec<usize>,
    pub columns: Vec<BoundColumn>,
}

impl BoundReport {
    pub fn new(t_grid: Vec<usize>) -> Self {
        BoundReport { t_grid, columns: Vec::new() }
    }

    pub fn push(&mut self, column: BoundColumn) {
        assert_eq!(column.values.len(), self.t_grid.len(), "column length mismatch");
        self.columns.push(column);
    }

    pub fn column(&self, name: &str) -> Option<&BoundColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Long-format CSV: one row per (t, bound).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# repobs bound-report v1\n");
        out.push_str("t,bound_name,value,value_clipped,exponent\n");
        for (i, &t) in self.t_grid.iter().enumerate() {
            for col in &self.columns {
                let exp = col.exponent.map_or(String::new(), |e| format!("{e}"));
                out.push_str(&format!(
                    "{t},{},{},{},{exp}\n",
                    col.name, col.values[i], col.values_clipped[i]
                ));
            }
        }
        out
    }
}

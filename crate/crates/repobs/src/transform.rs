//! Scatter matrices and the transform optimizers.
//!
//! The prototype rule improves under a linear map Aᵀ of the features. Two
//! tractable surrogates of the hard criterion σ²(A) are optimized here:
//!
//! * σ₁²(A) = tr(AᵀS_W A)/tr(AᵀS_B A), minimized by maximizing the trace
//!   ratio ρ(A) = tr(AᵀS_B A)/tr(AᵀS_W A) with the fixed-point eigenvalue
//!   iteration, whose ρ_k increases monotonically at a geometric rate.
//! * σ₂²(A) = tr(AᵀS_W A) under AᵀS_C A = I, solved in closed form by the
//!   generalized eigenpairs of (S_C, S_W) scaled as a_i = b_i/√λ_i.
//!
//! For the binary rescaled problem the Fisher-LDA direction S⁻¹(z₊ − z₋)
//! minimizes the proxy variance σ̃²(a).

use thiserror::Error;

use crate::linalg::{self, LinalgError, Matrix};
use crate::models::Problem;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("within-class scatter is not positive definite: {0}")]
    ScatterNotSpd(String),
    #[error("degenerate prototypes: {0}")]
    DegeneratePrototypes(String),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("degenerate objective: {0}")]
    DegenerateObjective(String),
}

/// Within-class, between-class, and second-moment scatter matrices built
/// from the class means x_j and covariances C_j:
/// S_W = Σ C_j, S_B = Σ (x̄ − x_j)(x̄ − x_j)ᵀ, S_C = Σ x_j x_jᵀ.
#[derive(Debug, Clone)]
pub struct ScatterSet {
    pub s_w: Matrix,
    pub s_b: Matrix,
    pub s_c: Matrix,
    pub x_bar: Vec<f64>,
}

/// Builds the scatter set from a problem whose prototypes are the class
/// means. Coincident class means leave S_B = 0 and are rejected; a
/// non-SPD S_W (possible with discrete classes on degenerate supports) is
/// rejected unless `regularize` adds εI.
pub fn scatter_matrices(problem: &Problem, regularize: Option<f64>) -> Result<ScatterSet, TransformError> {
    let d = problem.dim();
    let m = problem.num_classes();
    let means = problem.class_means();
    let covs = problem.class_covariances();

    let mut x_bar = vec![0.0; d];
    for mean in &means {
        for i in 0..d {
            x_bar[i] += mean[i] / m as f64;
        }
    }

    let mut s_w = Matrix::zeros(d, d);
    for c in &covs {
        s_w = s_w.add(c);
    }
    let mut s_b = Matrix::zeros(d, d);
    let mut s_c = Matrix::zeros(d, d);
    for mean in &means {
        let centered = linalg::sub_vec(&x_bar, mean);
        s_b = s_b.add(&linalg::outer(&centered, &centered));
        s_c = s_c.add(&linalg::outer(mean, mean));
    }
    let mut s_w = s_w.symmetrized();
    let s_b = s_b.symmetrized();
    let s_c = s_c.symmetrized();

    if s_b.max_abs() == 0.0 {
        return Err(TransformError::DegeneratePrototypes(
            "all class means coincide, S_B = 0".into(),
        ));
    }
    if let Some(eps) = regularize {
        for i in 0..d {
            s_w[(i, i)] += eps;
        }
    }
    if let Err(e) = linalg::cholesky(&s_w) {
        return Err(TransformError::ScatterNotSpd(e.to_string()));
    }
    Ok(ScatterSet { s_w, s_b, s_c, x_bar })
}

/// The trace ratio ρ(A) = tr(AᵀS_B A)/tr(AᵀS_W A).
pub fn trace_ratio(a: &Matrix, s_b: &Matrix, s_w: &Matrix) -> f64 {
    let num = a.transpose().matmul(s_b).matmul(a).trace();
    let den = a.transpose().matmul(s_w).matmul(a).trace();
    num / den
}

/// σ₁²(A) = tr(AᵀS_W A)/tr(AᵀS_B A) = 1/ρ(A).
pub fn sigma1(a: &Matrix, s_b: &Matrix, s_w: &Matrix) -> Result<f64, TransformError> {
    let num = a.transpose().matmul(s_w).matmul(a).trace();
    let den = a.transpose().matmul(s_b).matmul(a).trace();
    if den <= 0.0 {
        return Err(TransformError::DegenerateObjective(
            "tr(AᵀS_B A) must be positive".into(),
        ));
    }
    Ok(num / den)
}

/// Result of the trace-ratio iteration.
#[derive(Debug, Clone)]
pub struct TraceRatioResult {
    /// d×M matrix with orthonormal columns attaining ρ*.
    pub a: Matrix,
    pub rho_history: Vec<f64>,
    pub rho_star: f64,
    /// Geometric rate constant Σλ_{d−i+1}(S_W)/Σλ_i(S_W), i = 1..M.
    pub gamma: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes tr(AᵀS_B A)/tr(AᵀS_W A) over AᵀA = I_M by the fixed-point
/// eigenvalue iteration: at step k take the M dominant eigenvectors of
/// S_B − ρ_{k−1} S_W.
///
/// `a0` defaults to the first M identity columns. The recorded ρ history
/// is nondecreasing by construction: a final iterate that fails to
/// improve (possible only from rounding at the fixed point) stops the
/// iteration and is not recorded.
pub fn trace_ratio_optimize(
    s_b: &Matrix,
    s_w: &Matrix,
    m: usize,
    tol: f64,
    max_iter: usize,
    a0: Option<Matrix>,
) -> Result<TraceRatioResult, TransformError> {
    let d = s_w.rows();
    assert!(m >= 1 && m <= d, "need 1 <= M <= d");
    linalg::cholesky(s_w).map_err(|e| TransformError::ScatterNotSpd(e.to_string()))?;

    let a0 = match a0 {
        Some(a) => {
            assert_eq!((a.rows(), a.cols()), (d, m), "initial matrix must be d x M");
            linalg::orthonormalize_columns(&a)
        }
        None => {
            let mut a = Matrix::zeros(d, m);
            for j in 0..m {
                a[(j, j)] = 1.0;
            }
            a
        }
    };

    let (w_vals, _) = linalg::sym_eig(s_w)?;
    let top: f64 = w_vals.iter().take(m).sum();
    let bottom: f64 = w_vals.iter().rev().take(m).sum();
    let gamma = bottom / top;

    let mut a = a0;
    let mut rho = trace_ratio(&a, s_b, s_w);
    let mut history = vec![rho];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iter {
        let shifted = s_b.sub(&s_w.scale(rho)).symmetrized();
        let (_, vecs) = linalg::sym_eig(&shifted)?;
        let mut next_a = Matrix::zeros(d, m);
        for j in 0..m {
            for i in 0..d {
                next_a[(i, j)] = vecs[(i, j)];
            }
        }
        let next_rho = trace_ratio(&next_a, s_b, s_w);
        iterations += 1;
        if next_rho <= rho {
            // Rounding at the fixed point; the true iteration never decreases.
            converged = true;
            break;
        }
        a = next_a;
        history.push(next_rho);
        let improvement = next_rho - rho;
        rho = next_rho;
        if improvement <= tol {
            converged = true;
            break;
        }
    }

    Ok(TraceRatioResult { a, rho_history: history, rho_star: rho, gamma, iterations, converged })
}

/// Default stopping tolerance for the trace-ratio iteration.
pub const TRACE_RATIO_TOL: f64 = 1e-10;
/// Default iteration cap for the trace-ratio iteration.
pub const TRACE_RATIO_MAX_ITER: usize = 500;

/// Result of the closed-form σ₂ optimization.
#[derive(Debug, Clone)]
pub struct Sigma2Result {
    /// d×M matrix with AᵀS_C A = I_M.
    pub a: Matrix,
    /// The M largest generalized eigenvalues of (S_C, S_W), descending.
    pub lambdas: Vec<f64>,
    /// Σ 1/λ_i = tr(AᵀS_W A) at the optimum.
    pub objective: f64,
}

/// Minimizes tr(AᵀS_W A) subject to AᵀS_C A = I_M: columns a_i = b_i/√λ_i
/// from the M largest generalized eigenpairs (b_i, λ_i) of (S_C, S_W).
pub fn sigma2_optimize(s_w: &Matrix, s_c: &Matrix, m: usize) -> Result<Sigma2Result, TransformError> {
    let d = s_w.rows();
    assert!(m >= 1 && m <= d);
    let (vals, vecs) = linalg::gen_eig_spd(s_c, s_w)
        .map_err(|e| TransformError::ScatterNotSpd(e.to_string()))?;
    let scale = vals.first().copied().unwrap_or(0.0).max(0.0);
    if scale <= 0.0 || vals[m - 1] <= 1e-12 * scale {
        return Err(TransformError::RankDeficient(format!(
            "S_C supplies only {} usable eigenvalues, need {m}",
            vals.iter().filter(|&&v| v > 1e-12 * scale.max(1e-300)).count()
        )));
    }
    let mut a = Matrix::zeros(d, m);
    for j in 0..m {
        let s = vals[j].sqrt();
        for i in 0..d {
            a[(i, j)] = vecs[(i, j)] / s;
        }
    }
    let lambdas = vals[..m].to_vec();
    let objective = lambdas.iter().map(|l| 1.0 / l).sum();
    Ok(Sigma2Result { a, lambdas, objective })
}

// ── Fisher-LDA scaling ──────────────────────────────────────────────

/// Proxy variance σ̃²(a) = (a, (C₊+C₋) a)/(a, z₊−z₋)², the reciprocal of
/// the Fisher LDA objective.
pub fn sigma_tilde(
    a: &[f64],
    c_plus: &Matrix,
    c_minus: &Matrix,
    gap: &[f64],
) -> Result<f64, TransformError> {
    let denom = linalg::dot(a, gap);
    if denom == 0.0 {
        return Err(TransformError::DegenerateObjective(
            "scaling vector orthogonal to the class gap".into(),
        ));
    }
    let s = c_plus.add(c_minus);
    Ok(linalg::quad_form(&s, a) / (denom * denom))
}

/// The optimal scaling ã* = S⁻¹(z₊ − z₋) with S = C₊ + C₋, and its value
/// σ̃²(ã*) = 1/(4(S⁻¹𝟙, 𝟙)) in the rescaled coordinates z₊ = 𝟙, z₋ = −𝟙.
pub fn lda_scaling(
    c_plus: &Matrix,
    c_minus: &Matrix,
    z_plus: &[f64],
    z_minus: &[f64],
) -> Result<(Vec<f64>, f64), TransformError> {
    let s = c_plus.add(c_minus).symmetrized();
    let gap = linalg::sub_vec(z_plus, z_minus);
    let a_star = linalg::solve_spd(&s, &gap)
        .map_err(|e| TransformError::ScatterNotSpd(e.to_string()))?;
    let value = sigma_tilde(&a_star, c_plus, c_minus, &gap)?;
    Ok((a_star, value))
}

/// Per-class variances σ²_{d,±} = Var_±((1/d) Σ Z_i) = 𝟙ᵀC_±𝟙/d² of the
/// averaged rescaled coordinates.
pub fn averaged_coordinate_variances(c_plus: &Matrix, c_minus: &Matrix) -> (f64, f64) {
    let d = c_plus.rows() as f64;
    let ones = vec![1.0; c_plus.rows()];
    (
        linalg::quad_form(c_minus, &ones) / (d * d),
        linalg::quad_form(c_plus, &ones) / (d * d),
    )
}

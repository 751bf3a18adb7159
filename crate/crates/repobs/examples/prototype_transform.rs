//! Prototype classification and the transform optimizers.
//!
//! A linear map A^T of the features changes the prototype rule's error
//! rate through sigma^2(A) = max tr(A^T C_j A)/||A^T(x_j - x_l)||^2. The
//! hard criterion is not optimized directly; the trace-ratio iteration
//! (sigma_1) and the generalized-eigenvalue closed form (sigma_2) each
//! minimize a surrogate, and the better of the two by sigma^2 wins.
//!
//! Run with: cargo run --example prototype_transform

use repobs::bounds;
use repobs::linalg::Matrix;
use repobs::models::{ClassModel, GaussianClass, Problem};
use repobs::sim::{self, AggregatedClassifier};
use repobs::transform;

fn main() {
    // three classes in d = 4: the first two coordinates carry strong noise
    // and almost no class signal, the last two carry the separation
    let mut cov = Matrix::identity(4);
    cov[(0, 0)] = 16.0;
    cov[(1, 1)] = 9.0;
    cov[(2, 2)] = 0.5;
    cov[(3, 3)] = 0.5;
    cov[(0, 1)] = 2.0;
    cov[(1, 0)] = 2.0;
    // linearly independent means: sigma_2's constraint A^T S_C A = I needs
    // rank(S_C) >= M
    let means = [
        vec![0.4, 0.1, 1.6, 0.2],
        vec![-0.2, 0.3, -0.5, 1.3],
        vec![0.1, -0.5, -0.9, -1.1],
    ];
    let classes: Vec<ClassModel> = means
        .iter()
        .map(|m| ClassModel::Gaussian(GaussianClass::new(m.clone(), cov.clone()).unwrap()))
        .collect();
    let problem = Problem::with_uniform_priors(classes).unwrap();
    let prototypes = problem.prototypes();
    let covs = problem.class_covariances();
    let m = problem.num_classes();

    let set = transform::scatter_matrices(&problem, None).unwrap();
    println!("scatter traces: S_W {:.3}, S_B {:.3}, S_C {:.3}", set.s_w.trace(), set.s_b.trace(), set.s_c.trace());

    let tr = transform::trace_ratio_optimize(
        &set.s_b,
        &set.s_w,
        m,
        transform::TRACE_RATIO_TOL,
        transform::TRACE_RATIO_MAX_ITER,
        None,
    )
    .unwrap();
    println!();
    println!(
        "trace-ratio iteration: rho* = {:.6} in {} steps (gamma = {:.3})",
        tr.rho_star, tr.iterations, tr.gamma
    );
    let history: Vec<String> = tr.rho_history.iter().map(|r| format!("{r:.4}")).collect();
    println!("  rho history: {}", history.join(" -> "));

    let s2 = transform::sigma2_optimize(&set.s_w, &set.s_c, m).unwrap();
    println!(
        "sigma_2 closed form: objective sum 1/lambda = {:.6}, lambdas = {:?}",
        s2.objective,
        s2.lambdas.iter().map(|l| format!("{l:.3}")).collect::<Vec<_>>()
    );

    // score all candidates with the hard criterion
    let mut identity_cols = Matrix::zeros(problem.dim(), m);
    for j in 0..m {
        identity_cols[(j, j)] = 1.0;
    }
    let sigma_tr = bounds::sigma_of_a(&tr.a, &prototypes, &covs).unwrap();
    let sigma_s2 = bounds::sigma_of_a(&s2.a, &prototypes, &covs).unwrap();
    let sigma_id = bounds::sigma_of_a(&identity_cols, &prototypes, &covs).unwrap();
    println!();
    println!("sigma^2(A): trace-ratio {sigma_tr:.4}, sigma_2 {sigma_s2:.4}, identity {sigma_id:.4}");
    let (winner, a_best) = if sigma_tr <= sigma_s2 {
        ("trace-ratio", tr.a.clone())
    } else {
        ("sigma_2", s2.a.clone())
    };
    println!("selected: {winner} (aggregate bound (M-1) e^(-t/(8 sigma^2)))");

    // simulate plain vs transformed prototype rules
    let trials = 30_000;
    let seed = 42;
    println!();
    println!("{:>3} {:>12} {:>12} {:>14}", "t", "plain", "transformed", "bound(best A)");
    for &t in &[1usize, 2, 4, 8] {
        let plain = sim::estimate_error(
            &problem,
            &AggregatedClassifier::Prototype { prototypes: prototypes.clone() },
            t,
            trials,
            seed,
        )
        .unwrap();
        let transformed = sim::estimate_error(
            &problem,
            &AggregatedClassifier::PrototypeTransformed {
                a: a_best.clone(),
                prototypes: prototypes.clone(),
            },
            t,
            trials,
            seed,
        )
        .unwrap();
        let bound = bounds::sigma_aggregate_bound(sigma_tr.min(sigma_s2), m, t);
        println!(
            "{t:>3} {:>12.5} {:>12.5} {:>14.5}",
            plain.max_conditional,
            transformed.max_conditional,
            bound.min(1.0)
        );
    }
}

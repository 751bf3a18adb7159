//! Robust classification by nominal densities.
//!
//! The rule never evaluates likelihoods of the observed batch directly:
//! it compares the batch's empirical measure with each nominal measure
//! over the pairwise comparison sets A_{i,j} = {f_i > f_j} and picks the
//! class with the smallest sup-discrepancy. Its error bound
//! 2M(M-1)^2 exp(-t eps^2/2) holds for any true density within L1
//! distance Delta_j - eps of the nominal.
//!
//! Run with: cargo run --example robust_rule

use repobs::bounds::{self, normal_cdf};
use repobs::classifiers::build_robust_table;
use repobs::models::{ClassModel, GaussianClass, Problem};
use repobs::sim::{self, AggregatedClassifier};

fn main() {
    let means = [-2.0, 0.0, 2.0];
    let nominals: Vec<ClassModel> = means
        .iter()
        .map(|&mu| ClassModel::Gaussian(GaussianClass::isotropic(vec![mu], 1.0).unwrap()))
        .collect();
    let problem = Problem::with_uniform_priors(nominals.clone()).unwrap();
    let seed = 42;

    println!("building the nominal integral table (10^6 samples per class)...");
    let table = build_robust_table(&nominals, 1_000_000, seed).unwrap();
    for (s, &(i, j)) in table.pairs.iter().enumerate() {
        let row: Vec<String> = table.integrals[s].iter().map(|v| format!("{v:.4}")).collect();
        println!("  A_{{{i},{j}}}: integrals per class = [{}]", row.join(", "));
    }

    // L1 distances between unit Gaussians give the margin the bound needs:
    // ||f_a - f_b||_1 = 2(2 Phi(|mu_a - mu_b|/2) - 1).
    let l1 = |a: f64, b: f64| 2.0 * (2.0 * normal_cdf((a - b).abs() / 2.0) - 1.0);
    let mut min_delta = f64::INFINITY;
    for j in 0..3 {
        let mut nearest = f64::INFINITY;
        for i in 0..3 {
            if i != j {
                nearest = nearest.min(l1(means[i], means[j]));
            }
        }
        min_delta = min_delta.min(0.5 * nearest);
    }
    let eps = 0.5 * min_delta;
    println!();
    println!("min_j Delta_j = {min_delta:.4}; chosen distortion margin eps = {eps:.4}");
    println!();

    let classifier = AggregatedClassifier::Robust { table, nominals };
    let trials = 10_000;
    println!("{:>4} {:>12} {:>14}", "t", "monte-carlo", "robust-bound");
    for &t in &[25usize, 50, 100, 200] {
        let est = sim::estimate_error(&problem, &classifier, t, trials, seed).unwrap();
        let bound = bounds::robust_bound(eps, 3, t);
        println!("{t:>4} {:>12.6} {:>14.6e}", est.max_conditional, bound.value);
    }
    println!();
    println!("the bound is loose but sound: the worst conditional error stays below it.");
}

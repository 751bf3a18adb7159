//! Majority vote over repeated observations.
//!
//! An elementary classifier with symmetric binary confusion p = 0.8 is
//! aggregated by majority vote over t observations. The table compares,
//! per t: the Monte Carlo error, the exact vote-distribution oracle, the
//! majority-vote bound, its binary simplification, and the normal
//! approximation. The last line reports the exact error-exponent limit.
//!
//! Run with: cargo run --example majority_vote

use repobs::bounds;
use repobs::models::ConfusionMatrix;
use repobs::sim::{self, AggregatedClassifier};

fn main() {
    let p = 0.8;
    let cm = ConfusionMatrix::symmetric_binary(p);
    let problem = sim::symmetric_binary_problem(p);
    let classifier = AggregatedClassifier::Majority(sim::symmetric_binary_elementary(&problem));
    let trials = 100_000;
    let seed = 42;

    println!("elementary confusion: p_jj = {p}, p_jl = {}", 1.0 - p);
    println!();
    println!("{:>3} {:>12} {:>12} {:>12} {:>12} {:>12}", "t", "monte-carlo", "exact", "majority-vote", "binary", "clt");
    for t in (1..=15).step_by(2) {
        let est = sim::estimate_error(&problem, &classifier, t, trials, seed).unwrap();
        let exact = sim::exact_majority_error(&cm, t, 0).unwrap();
        let vote_bound = bounds::majority_vote_bound(&cm, t).unwrap();
        let binary = bounds::binary_bound(p, t).unwrap();
        let clt = bounds::clt_majority(p, 1.0 - p, t).unwrap();
        println!(
            "{t:>3} {:>12.6} {exact:>12.6} {vote_bound:>12.6} {binary:>12.6} {clt:>12.6}",
            est.max_conditional
        );
    }

    let exponent = bounds::sanov_exponent(&cm).unwrap();
    println!();
    println!("exact exponent limit (1/t) ln P = {exponent:.6} (= ln {p})");
    println!("majority-vote decays at the same rate; the binary form matches it exactly");
    println!("for symmetric matrices: 1 - (sqrt(p) - sqrt(1-p))^2 = 2 sqrt(p(1-p)).");
}

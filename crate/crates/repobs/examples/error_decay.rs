//! The full harness: sweep, audit, exponent fit.
//!
//! Runs the majority-vote rule over a t-grid, evaluates every strict
//! bound whose preconditions hold, audits the curve for violations, and
//! fits the empirical decay exponent — the API equivalent of
//! `repobs simulate`.
//!
//! Run with: cargo run --example error_decay

use repobs::bounds::{self, BoundColumn, BoundReport, UtilityMoments};
use repobs::models::ConfusionMatrix;
use repobs::sim::{self, AggregatedClassifier, AuditVerdict};

fn main() {
    let p = 0.75;
    let cm = ConfusionMatrix::symmetric_binary(p);
    let problem = sim::symmetric_binary_problem(p);
    let classifier = AggregatedClassifier::Majority(sim::symmetric_binary_elementary(&problem));
    let t_grid: Vec<usize> = (1..=21).step_by(2).collect();
    let trials = 100_000;
    let seed = 2024;

    let curve = sim::sweep_t(&problem, &classifier, &t_grid, trials, seed).unwrap();

    let mut report = BoundReport::new(t_grid.clone());
    let vote_bound: Vec<f64> = t_grid.iter().map(|&t| bounds::majority_vote_bound(&cm, t).unwrap()).collect();
    report.push(BoundColumn::strict(
        "majority-vote",
        vote_bound,
        bounds::sanov_exponent(&cm).ok().map(|e| -e),
    ));
    let binary: Vec<f64> = t_grid.iter().map(|&t| bounds::binary_bound(p, t).unwrap()).collect();
    report.push(BoundColumn::strict("binary", binary, None));
    let moments = UtilityMoments::indicator(&cm);
    let hoeffding: Vec<f64> = t_grid
        .iter()
        .map(|&t| bounds::hoeffding_bound(&moments, t).unwrap().value)
        .collect();
    report.push(BoundColumn::strict("hoeffding", hoeffding, None));
    let clt: Vec<f64> = t_grid
        .iter()
        .map(|&t| bounds::clt_majority(p, 1.0 - p, t).unwrap())
        .collect();
    report.push(BoundColumn::approximation("clt-majority", clt));

    println!("{:>3} {:>11} {:>23} {:>11} {:>11} {:>11}", "t", "error", "wilson-95%", "majority-vote", "hoeffding", "clt");
    for (i, point) in curve.points.iter().enumerate() {
        let worst = &point.per_class[point.max_class];
        println!(
            "{:>3} {:>11.6} [{:>9.6}, {:>9.6}] {:>11.6} {:>11.6} {:>11.6}",
            point.t,
            point.max_conditional,
            worst.ci_low,
            worst.ci_high,
            report.columns[0].values[i],
            report.columns[2].values[i].min(1.0),
            report.columns[3].values[i],
        );
    }

    let audit = sim::audit_bounds(&curve, &report).unwrap();
    let violations = audit.iter().filter(|r| r.verdict == AuditVerdict::Violation).count();
    println!();
    println!("audit: {} rows, {violations} violations", audit.len());

    match sim::fit_exponent(&curve) {
        Ok(fit) => {
            println!(
                "fitted exponent {:.4} (r² = {:.4}, {} points, {} zero-count excluded)",
                -fit.slope,
                fit.r_squared,
                fit.points_used,
                fit.excluded_t.len()
            );
            println!(
                "majority-vote promises at least {:.4}; the exact limit is {:.4}",
                report.columns[0].exponent.unwrap(),
                -bounds::sanov_exponent(&cm).unwrap()
            );
        }
        Err(e) => println!("exponent fit unavailable: {e}"),
    }
}

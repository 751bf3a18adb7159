//! Utility aggregation and its concentration bounds.
//!
//! The aggregated decision argmax_j sum_i h_j(V_i) covers majority vote
//! (indicator utilities), ML (log-densities), and the prototype rule
//! (negative squared distances). This example checks the equivalences on
//! random batches, then evaluates the two concentration bounds for
//! bounded and moment-controlled utilities against simulation.
//!
//! Run with: cargo run --example utility_aggregation

use repobs::bounds::{self, UtilityMoments};
use repobs::classifiers::{
    classify_majority, classify_ml, classify_prototype, classify_utility, ElementaryClassifier,
};
use repobs::linalg;
use repobs::models::{sample_batch, ClassModel, ConfusionMatrix, GaussianClass, Problem};
use repobs::seed::rng_for;
use repobs::sim::{self, AggregatedClassifier, UtilitySpec};

fn main() {
    let nominals = vec![
        ClassModel::Gaussian(GaussianClass::isotropic(vec![-1.0, 0.0], 1.0).unwrap()),
        ClassModel::Gaussian(GaussianClass::isotropic(vec![1.0, 0.5], 1.0).unwrap()),
    ];
    let prototypes = vec![vec![-1.0, 0.0], vec![1.0, 0.5]];
    let problem = Problem::with_uniform_priors(nominals.clone()).unwrap();
    let g = ElementaryClassifier::NominalMl { nominals: nominals.clone() };

    // the three classical utility choices reproduce the three rules
    let indicator: Vec<_> = (0..2)
        .map(|j| {
            let g = g.clone();
            move |x: &[f64]| usize::from(g.classify(x).unwrap() == j) as f64
        })
        .collect();
    let log_density: Vec<_> = nominals
        .iter()
        .cloned()
        .map(|m| move |x: &[f64]| m.log_density(x).unwrap())
        .collect();
    let neg_sq: Vec<_> = prototypes
        .iter()
        .cloned()
        .map(|p| move |x: &[f64]| -linalg::norm_sq(&linalg::sub_vec(x, &p)))
        .collect();

    let mut rng = rng_for(1, "demo", &[]);
    let mut agree = [0usize; 3];
    let batches = 2000;
    for trial in 0..batches {
        let batch = sample_batch(&problem, trial % 2, 1 + trial % 5, &mut rng).unwrap();
        agree[0] += usize::from(
            classify_utility(&indicator, &batch).unwrap() == classify_majority(&g, &batch).unwrap(),
        );
        agree[1] += usize::from(
            classify_utility(&log_density, &batch).unwrap()
                == classify_ml(&nominals, &batch).unwrap(),
        );
        agree[2] += usize::from(
            classify_utility(&neg_sq, &batch).unwrap()
                == classify_prototype(&prototypes, &batch).unwrap(),
        );
    }
    println!("equivalence over {batches} random batches:");
    println!("  indicator  = majority vote : {}/{batches}", agree[0]);
    println!("  log-density = ML           : {}/{batches}", agree[1]);
    println!("  -||x-x_j||^2 = prototype   : {}/{batches}", agree[2]);
    println!();

    // concentration bounds for the indicator utilities of the ML partition
    let cm = ConfusionMatrix::new(vec![vec![0.85, 0.15], vec![0.15, 0.85]]).unwrap();
    let mut moments = UtilityMoments::indicator(&cm);
    moments.c1 = Some(1.0); // |h| <= 1 gives E|h|^k <= 1 <= c1^k k!
    println!("indicator utilities with confusion 0.85: delta = {:.2}", moments.delta());
    println!(
        "{:>3} {:>12} {:>12} {:>12}",
        "t", "hoeffding", "moment", "clt-utility"
    );
    for t in [1usize, 5, 10, 20, 40] {
        let hoeffding = bounds::hoeffding_bound(&moments, t).unwrap();
        let moment = bounds::moment_bound(&moments, t).unwrap();
        let clt = bounds::clt_utility(&moments, 0, 1, t).unwrap();
        println!(
            "{t:>3} {:>12.6} {:>12.6} {clt:>12.6}",
            hoeffding.value.min(1.0),
            moment.value.min(1.0),
        );
    }
    println!();
    println!(
        "exponents: hoeffding {:.4}, moment -ln rho {:.4} (floor {:.4})",
        bounds::hoeffding_bound(&moments, 1).unwrap().exponent,
        bounds::moment_bound(&moments, 1).unwrap().exponent,
        bounds::moment_bound(&moments, 1).unwrap().floor,
    );

    // and the harness accepts the closed utility kinds directly
    let clf = AggregatedClassifier::Utility(UtilitySpec::LogDensity(nominals));
    let est = sim::estimate_error(&problem, &clf, 8, 20_000, 7).unwrap();
    println!();
    println!("simulated log-density utility rule at t = 8: error {:.5}", est.max_conditional);
}

//! The four run commands behind the `repobs` binary: `bounds`,
//! `simulate`, `optimize`, and `exponent`.
//!
//! Every command reads one JSON config, writes UTF-8 CSV/JSON artifacts
//! into the output directory, and is byte-for-byte reproducible from
//! (config, seed). Exit codes: 0 success, 2 config/validation error,
//! 3 insufficient data, 4 numerical failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::bounds::{self, BoundColumn, BoundReport, UtilityMoments};
use crate::classifiers::{self, ElementaryClassifier, RobustRuleTable};
use crate::config::{
    ClassifierSpec, ConfigError, ElementaryKind, LoadedConfig, MomentsSpec,
    UtilityKind,
};
use crate::linalg::{self, Matrix};
use crate::models::{self, ConfusionMatrix, Problem};
use crate::sim::{self, AggregatedClassifier, SimError, UtilitySpec};
use crate::transform::{self, ScatterSet};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Validation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 = config/validation, 3 = insufficient data, 4 = numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) | CliError::Write { .. } => 2,
            CliError::InsufficientData(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InsufficientData { .. } => CliError::InsufficientData(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<models::ModelError> for CliError {
    fn from(e: models::ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<classifiers::ClassifierError> for CliError {
    fn from(e: classifiers::ClassifierError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<transform::TransformError> for CliError {
    fn from(e: transform::TransformError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|source| CliError::Write { path: parent.into(), source })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Write { path: path.into(), source })
}

/// A prepared run: config resolved against its directory, problem loaded,
/// t-grid parsed, output directory fixed.
pub struct RunContext {
    pub loaded: LoadedConfig,
    pub problem: Problem,
    pub problem_bytes: Vec<u8>,
    pub t_grid: Vec<usize>,
    pub seed: u64,
    pub trials: usize,
    pub out_dir: PathBuf,
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub t_grid: Option<String>,
    pub out_dir: Option<PathBuf>,
}

pub fn prepare(config_path: &Path, overrides: &Overrides) -> Result<RunContext, CliError> {
    let loaded = crate::config::load_config(config_path)?;
    let problem_path = loaded.problem_path();
    let (problem, _, problem_bytes) = crate::config::load_problem(&problem_path)?;

    let grid_field = match &overrides.t_grid {
        Some(spec) => crate::config::TGrid::Spec(spec.clone()),
        None => loaded.config.t_grid.clone(),
    };
    let t_grid = crate::config::parse_t_grid(&grid_field)?;

    let out_dir = overrides
        .out_dir
        .clone()
        .or_else(|| loaded.config.out_dir.as_ref().map(|d| loaded.resolve(d)))
        .ok_or_else(|| CliError::Validation("no output directory (config out_dir or --out)".into()))?;

    Ok(RunContext {
        seed: overrides.seed.unwrap_or(loaded.config.seed),
        trials: overrides.trials.unwrap_or(loaded.config.trials),
        loaded,
        problem,
        problem_bytes,
        t_grid,
        out_dir,
    })
}

// ── classifier construction ─────────────────────────────────────────

fn elementary_for(
    problem: &Problem,
    kind: &ElementaryKind,
) -> Result<ElementaryClassifier, CliError> {
    Ok(match kind {
        ElementaryKind::NominalMl => ElementaryClassifier::NominalMl {
            nominals: problem.classes().to_vec(),
        },
        ElementaryKind::Prototype => ElementaryClassifier::Prototype {
            prototypes: problem.prototypes(),
        },
        ElementaryKind::Linear => {
            require_binary(problem)?;
            let means = problem.class_means();
            let d = problem.dim();
            ElementaryClassifier::LinearScaled {
                a: vec![1.0 / d as f64; d],
                m_plus: means[0].clone(),
                m_minus: means[1].clone(),
            }
        }
    })
}

fn require_binary(problem: &Problem) -> Result<(), CliError> {
    if problem.num_classes() != 2 {
        return Err(CliError::Validation(
            "the linear scaled rule needs exactly 2 classes".into(),
        ));
    }
    Ok(())
}

/// Stable content hash used to key the robust-table cache by problem.
fn fnv_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Builds (or loads from the run-directory cache) the robust-rule table.
pub fn robust_table_cached(ctx: &RunContext, n_mc: usize) -> Result<RobustRuleTable, CliError> {
    let key = fnv_hash(&ctx.problem_bytes) ^ fnv_hash(&n_mc.to_le_bytes());
    let cache = ctx.out_dir.join(format!("robust_table_{key:016x}_{}.json", ctx.seed));
    if let Ok(bytes) = fs::read(&cache) {
        if let Ok(table) = serde_json::from_slice::<RobustRuleTable>(&bytes) {
            if table.n_mc == n_mc && table.seed == ctx.seed {
                return Ok(table);
            }
        }
    }
    let table = classifiers::build_robust_table(ctx.problem.classes(), n_mc, ctx.seed)?;
    let json = serde_json::to_string_pretty(&table)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_file(&cache, &json)?;
    Ok(table)
}

/// Default robust-table sample count.
pub const DEFAULT_ROBUST_N_MC: usize = 1_000_000;

pub fn build_classifier(ctx: &RunContext) -> Result<AggregatedClassifier, CliError> {
    let spec = ctx.loaded.config.classifier.resolve()?;
    let problem = &ctx.problem;
    Ok(match spec {
        ClassifierSpec::Majority { elementary } => {
            let kind = elementary.unwrap_or(ElementaryKind::NominalMl);
            AggregatedClassifier::Majority(elementary_for(problem, &kind)?)
        }
        ClassifierSpec::Ml => AggregatedClassifier::Ml { nominals: problem.classes().to_vec() },
        ClassifierSpec::Utility { utility, elementary } => {
            let spec = match utility {
                UtilityKind::Indicator => {
                    let kind = elementary.unwrap_or(ElementaryKind::NominalMl);
                    UtilitySpec::Indicator(elementary_for(problem, &kind)?)
                }
                UtilityKind::LogDensity => UtilitySpec::LogDensity(problem.classes().to_vec()),
                UtilityKind::NegSqDistance => {
                    UtilitySpec::NegSquaredDistance(problem.prototypes())
                }
            };
            AggregatedClassifier::Utility(spec)
        }
        ClassifierSpec::Robust { n_mc } => {
            let table = robust_table_cached(ctx, n_mc.unwrap_or(DEFAULT_ROBUST_N_MC))?;
            AggregatedClassifier::Robust { table, nominals: problem.classes().to_vec() }
        }
        ClassifierSpec::Prototype => {
            AggregatedClassifier::Prototype { prototypes: problem.prototypes() }
        }
        ClassifierSpec::PrototypeTransformed { transform_file, transform } => {
            let a = match (transform, transform_file) {
                (Some(rows), _) => Matrix::from_rows(&rows),
                (None, Some(file)) => {
                    let path = ctx.loaded.resolve(&file);
                    read_matrix_csv(&path)?
                }
                (None, None) => {
                    return Err(CliError::Validation(
                        "prototype-transformed needs 'transform' or 'transform_file'".into(),
                    ))
                }
            };
            if classifiers::transform_rank_deficient(&a) {
                eprintln!("repobs: warning: transform has rank-deficient columns; decisions are still computed");
            }
            AggregatedClassifier::PrototypeTransformed { a, prototypes: problem.prototypes() }
        }
        ClassifierSpec::Linear { a } => {
            require_binary(problem)?;
            let means = problem.class_means();
            let d = problem.dim();
            AggregatedClassifier::Linear {
                a: a.unwrap_or_else(|| vec![1.0 / d as f64; d]),
                m_plus: means[0].clone(),
                m_minus: means[1].clone(),
            }
        }
    })
}

fn read_matrix_csv(path: &Path) -> Result<Matrix, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.into(), source })?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| CliError::Validation(format!("bad matrix entry in {path:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if rows.is_empty() {
        return Err(CliError::Validation(format!("empty matrix file {path:?}")));
    }
    Ok(Matrix::from_rows(&rows))
}

// ── shared bound evaluation ─────────────────────────────────────────

fn elementary_for_bounds(ctx: &RunContext) -> Result<ElementaryClassifier, CliError> {
    // The confusion matrix of the vote bounds refers to the
    // elementary rule underlying the configured classifier; anything
    // without one falls back to the nominal-ML partition.
    let spec = ctx.loaded.config.classifier.resolve()?;
    let kind = match spec {
        ClassifierSpec::Majority { elementary } => elementary.unwrap_or(ElementaryKind::NominalMl),
        ClassifierSpec::Utility { elementary, .. } => {
            elementary.unwrap_or(ElementaryKind::NominalMl)
        }
        ClassifierSpec::Prototype | ClassifierSpec::PrototypeTransformed { .. } => {
            ElementaryKind::Prototype
        }
        ClassifierSpec::Linear { .. } => ElementaryKind::Linear,
        _ => ElementaryKind::NominalMl,
    };
    elementary_for(&ctx.problem, &kind)
}

fn confusion_for(ctx: &RunContext) -> Result<ConfusionMatrix, CliError> {
    if let Some(rows) = &ctx.loaded.config.confusion {
        return Ok(ConfusionMatrix::new(rows.clone())?);
    }
    let g = elementary_for_bounds(ctx)?;
    let n = ctx.loaded.config.confusion_samples.unwrap_or(100_000);
    if n < 10_000 {
        return Err(CliError::Validation(format!(
            "confusion_samples = {n} is below the minimum of 10000"
        )));
    }
    let cm = models::confusion_matrix(
        &ctx.problem,
        |x| g.classify(x).expect("dimension-checked input"),
        n,
        ctx.seed,
    )?;
    Ok(cm)
}

fn moments_for(ctx: &RunContext, confusion: &ConfusionMatrix) -> Result<UtilityMoments, CliError> {
    Ok(match &ctx.loaded.config.moments {
        None | Some(MomentsSpec::Indicator { .. }) => {
            let mut m = UtilityMoments::indicator(confusion);
            if let Some(MomentsSpec::Indicator { c1 }) = &ctx.loaded.config.moments {
                m.c1 = *c1;
            }
            m
        }
        Some(MomentsSpec::Prototype { k, c1 }) => {
            let mut m = UtilityMoments::prototype(
                &ctx.problem.prototypes(),
                &ctx.problem.class_covariances(),
            );
            m.k_bound = *k;
            m.c1 = *c1;
            m
        }
        Some(MomentsSpec::Explicit { q, variances, k, c1 }) => UtilityMoments {
            q: q.clone(),
            variances: variances.clone(),
            k_bound: *k,
            c1: *c1,
        },
    })
}

/// The strict bound families that participate in audits.
pub const STRICT_FAMILIES: [&str; 6] = ["majority-vote", "binary", "ml", "robust", "hoeffding", "moment"];
/// The normal-approximation families (reported, never audited for
/// violations).
pub const APPROX_FAMILIES: [&str; 4] = ["clt-majority", "clt-utility", "prototype", "linear"];

/// True when the configured utility moments describe the configured rule,
/// so the utility bounds govern the curve being simulated.
fn moments_match_rule(spec: &ClassifierSpec, moments: &Option<MomentsSpec>) -> bool {
    match spec {
        ClassifierSpec::Majority { .. }
        | ClassifierSpec::Utility { utility: UtilityKind::Indicator, .. } => matches!(
            moments,
            None | Some(MomentsSpec::Indicator { .. }) | Some(MomentsSpec::Explicit { .. })
        ),
        ClassifierSpec::Prototype
        | ClassifierSpec::PrototypeTransformed { .. }
        | ClassifierSpec::Utility { utility: UtilityKind::NegSqDistance, .. } => matches!(
            moments,
            Some(MomentsSpec::Prototype { .. }) | Some(MomentsSpec::Explicit { .. })
        ),
        ClassifierSpec::Ml | ClassifierSpec::Utility { utility: UtilityKind::LogDensity, .. } => {
            matches!(moments, Some(MomentsSpec::Explicit { .. }))
        }
        _ => matches!(moments, Some(MomentsSpec::Explicit { .. })),
    }
}

/// The bound families that govern the configured rule. Each strict bound
/// controls one specific aggregation; auditing a curve against another
/// rule's bound would flag spurious violations.
pub fn applicable_families(
    spec: &ClassifierSpec,
    moments: &Option<MomentsSpec>,
) -> Vec<&'static str> {
    let mut families: Vec<&'static str> = Vec::new();
    let utility_ok = moments_match_rule(spec, moments);
    match spec {
        ClassifierSpec::Majority { .. }
        | ClassifierSpec::Utility { utility: UtilityKind::Indicator, .. } => {
            families.extend(["majority-vote", "binary"]);
            if utility_ok {
                families.extend(["hoeffding", "moment"]);
            }
            families.push("clt-majority");
        }
        ClassifierSpec::Ml | ClassifierSpec::Utility { utility: UtilityKind::LogDensity, .. } => {
            families.push("ml");
            if utility_ok {
                families.extend(["hoeffding", "moment", "clt-utility"]);
            }
        }
        ClassifierSpec::Robust { .. } => families.push("robust"),
        ClassifierSpec::Prototype
        | ClassifierSpec::PrototypeTransformed { .. }
        | ClassifierSpec::Utility { utility: UtilityKind::NegSqDistance, .. } => {
            if utility_ok {
                families.extend(["hoeffding", "moment", "clt-utility"]);
            }
            families.push("prototype");
        }
        ClassifierSpec::Linear { .. } => families.push("linear"),
    }
    families
}

/// Evaluates one bound family over the grid. The report carries one or
/// two columns; a precondition failure surfaces as Err and is reported
/// per family without aborting the others.
pub fn evaluate_family(ctx: &RunContext, family: &str) -> Result<BoundReport, CliError> {
    let grid = &ctx.t_grid;
    let mut report = BoundReport::new(grid.clone());
    match family {
        "majority-vote" => {
            let p = confusion_for(ctx)?;
            let exponent = bounds::sanov_exponent(&p).map(|e| -e).ok();
            let values = grid
                .iter()
                .map(|&t| bounds::majority_vote_bound(&p, t))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            report.push(BoundColumn::strict("majority-vote", values, exponent));
        }
        "binary" => {
            let p = confusion_for(ctx)?;
            let min_diag = (0..p.num_classes())
                .map(|j| p.p[j][j])
                .fold(f64::INFINITY, f64::min);
            let values = grid
                .iter()
                .map(|&t| bounds::binary_bound(min_diag, t))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let exponent = -(2.0 * (min_diag * (1.0 - min_diag)).sqrt()).ln();
            report.push(BoundColumn::strict("binary", values, Some(exponent)));
        }
        "ml" => {
            let mut values = Vec::with_capacity(grid.len());
            let mut exponent = None;
            for &t in grid {
                let b = bounds::ml_bound(ctx.problem.classes(), t)
                    .map_err(|e| CliError::Validation(e.to_string()))?;
                exponent = Some(b.exponent);
                values.push(b.value);
            }
            report.push(BoundColumn::strict("ml", values, exponent));
        }
        "robust" => {
            let eps = ctx.loaded.config.eps.ok_or_else(|| {
                CliError::Validation("robust bound needs a user distortion margin 'eps'".into())
            })?;
            if eps <= 0.0 {
                return Err(CliError::Validation("eps must be positive".into()));
            }
            let m = ctx.problem.num_classes();
            let mut exponent = None;
            let values = grid
                .iter()
                .map(|&t| {
                    let b = bounds::robust_bound(eps, m, t);
                    exponent = Some(b.exponent);
                    b.value
                })
                .collect();
            report.push(BoundColumn::strict("robust", values, exponent));
        }
        "hoeffding" => {
            let p = confusion_for(ctx)?;
            let moments = moments_for(ctx, &p)?;
            let mut exponent = None;
            let values = grid
                .iter()
                .map(|&t| {
                    bounds::hoeffding_bound(&moments, t).map(|b| {
                        exponent = Some(b.exponent);
                        b.value
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            report.push(BoundColumn::strict("hoeffding", values, exponent));
        }
        "moment" => {
            let p = confusion_for(ctx)?;
            let moments = moments_for(ctx, &p)?;
            let mut exponent = None;
            let values = grid
                .iter()
                .map(|&t| {
                    bounds::moment_bound(&moments, t).map(|b| {
                        exponent = Some(b.exponent);
                        b.value
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            report.push(BoundColumn::strict("moment", values, exponent));
        }
        "clt-majority" => {
            let p = confusion_for(ctx)?;
            let m = p.num_classes();
            let values = grid
                .iter()
                .map(|&t| {
                    let mut worst: f64 = 0.0;
                    for j in 0..m {
                        let mut sum = 0.0;
                        for l in 0..m {
                            if l != j {
                                sum += bounds::clt_majority(p.p[j][j], p.p[j][l], t)
                                    .map_err(|e| CliError::Validation(e.to_string()))?;
                            }
                        }
                        worst = worst.max(sum);
                    }
                    Ok(worst)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            report.push(BoundColumn::approximation("clt-majority", values));
        }
        "clt-utility" => {
            let p = confusion_for(ctx)?;
            let moments = moments_for(ctx, &p)?;
            let m = moments.q.len();
            let values = grid
                .iter()
                .map(|&t| {
                    let mut worst: f64 = 0.0;
                    for j in 0..m {
                        let mut sum = 0.0;
                        for l in 0..m {
                            if l != j {
                                sum += bounds::clt_utility(&moments, j, l, t)
                                    .map_err(|e| CliError::Validation(e.to_string()))?;
                            }
                        }
                        worst = worst.max(sum);
                    }
                    Ok(worst)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            report.push(BoundColumn::approximation("clt-utility", values));
        }
        "prototype" => {
            let prototypes = ctx.problem.prototypes();
            let covs = ctx.problem.class_covariances();
            let m = prototypes.len();
            let mut tight_vals = Vec::with_capacity(grid.len());
            let mut trace_vals = Vec::with_capacity(grid.len());
            for &t in grid {
                let mut worst_tight: f64 = 0.0;
                let mut worst_trace: f64 = 0.0;
                for j in 0..m {
                    let mut sum_tight = 0.0;
                    let mut sum_trace = 0.0;
                    for l in 0..m {
                        if l != j {
                            let (tight, trace) =
                                bounds::prototype_bound(&prototypes[j], &prototypes[l], &covs[j], t)
                                    .map_err(|e| CliError::Validation(e.to_string()))?;
                            sum_tight += tight;
                            sum_trace += trace;
                        }
                    }
                    worst_tight = worst_tight.max(sum_tight);
                    worst_trace = worst_trace.max(sum_trace);
                }
                tight_vals.push(worst_tight);
                trace_vals.push(worst_trace);
            }
            report.push(BoundColumn::approximation("prototype-tight", tight_vals));
            report.push(BoundColumn::approximation("prototype-trace", trace_vals));
        }
        "linear" => {
            require_binary(&ctx.problem)?;
            let (c_plus_z, c_minus_z) = rescaled_covariances(&ctx.problem)?;
            let (v_minus, v_plus) = transform::averaged_coordinate_variances(&c_plus_z, &c_minus_z);
            let mut exponent = None;
            let values = grid
                .iter()
                .map(|&t| {
                    bounds::linear_bound(v_minus, v_plus, t).map(|b| {
                        exponent = Some(b.exponent);
                        b.value
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let mut col = BoundColumn::approximation("linear", values);
            col.exponent = exponent;
            report.push(col);
        }
        other => {
            return Err(CliError::Validation(format!("unknown bound family '{other}'")));
        }
    }
    Ok(report)
}

/// Covariances of the rescaled observation Z = D(X − m₊) + 𝟙 with
/// D = diag(2/(m₊ − m₋)): C_Z = D C_X D.
pub fn rescaled_covariances(problem: &Problem) -> Result<(Matrix, Matrix), CliError> {
    let means = problem.class_means();
    let covs = problem.class_covariances();
    let d = problem.dim();
    let mut scale = vec![0.0; d];
    for i in 0..d {
        let gap = means[0][i] - means[1][i];
        if gap == 0.0 {
            return Err(CliError::Validation(format!(
                "feature {i} has equal class means; the rescaling is undefined"
            )));
        }
        scale[i] = 2.0 / gap;
    }
    let rescale_cov = |c: &Matrix| {
        let mut out = c.clone();
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] *= scale[i] * scale[j];
            }
        }
        out
    };
    Ok((rescale_cov(&covs[0]), rescale_cov(&covs[1])))
}

// ── commands ────────────────────────────────────────────────────────

/// `bounds`: one CSV per selected family; per-family precondition
/// failures become .error.txt notes without aborting the rest.
pub fn cmd_bounds(ctx: &RunContext) -> Result<(), CliError> {
    for family in &ctx.loaded.config.bounds {
        match evaluate_family(ctx, family) {
            Ok(report) => {
                let path = ctx.out_dir.join(format!("bounds_{family}.csv"));
                write_file(&path, &report.to_csv())?;
            }
            Err(CliError::Validation(msg)) => {
                let path = ctx.out_dir.join(format!("bounds_{family}.error.txt"));
                write_file(&path, &format!("{family}: {msg}\n"))?;
            }
            Err(other) => return Err(other),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ExponentArtifact {
    fit: Option<sim::ExponentFit>,
    error: Option<String>,
    /// Exponents promised by sibling bound families, for comparison with
    /// the fitted −slope.
    bound_exponents: BTreeMap<String, f64>,
}

/// `simulate`: sweep the t-grid, audit against every strict family whose
/// preconditions hold, and fit the decay exponent.
pub fn cmd_simulate(ctx: &RunContext) -> Result<(), CliError> {
    if ctx.trials < 100 {
        return Err(CliError::Validation(format!(
            "trials = {} is below the minimum of 100",
            ctx.trials
        )));
    }
    let classifier = build_classifier(ctx)?;
    let curve = sim::sweep_t(&ctx.problem, &classifier, &ctx.t_grid, ctx.trials, ctx.seed)?;
    write_file(&ctx.out_dir.join("simcurve.csv"), &curve.to_csv())?;

    // Bounds that govern this rule and have satisfied preconditions join
    // the audit report; anything else is listed as skipped.
    let spec = ctx.loaded.config.classifier.resolve()?;
    let applicable = applicable_families(&spec, &ctx.loaded.config.moments);
    let mut audit_report = BoundReport::new(ctx.t_grid.clone());
    let mut skipped: Vec<String> = Vec::new();
    let selection: Vec<String> = if ctx.loaded.config.bounds.is_empty() {
        applicable.iter().map(|s| s.to_string()).collect()
    } else {
        let mut kept = Vec::new();
        for family in &ctx.loaded.config.bounds {
            if applicable.contains(&family.as_str()) {
                kept.push(family.clone());
            } else {
                skipped.push(format!(
                    "{family}: governs a different rule than '{}'",
                    classifier.descriptor()
                ));
            }
        }
        kept
    };
    for family in &selection {
        match evaluate_family(ctx, family) {
            Ok(report) => {
                for col in report.columns {
                    audit_report.push(col);
                }
            }
            Err(CliError::Validation(msg)) => skipped.push(format!("{family}: {msg}")),
            Err(other) => return Err(other),
        }
    }
    let audit_rows = sim::audit_bounds(&curve, &audit_report)?;
    let mut audit_csv = sim::audit_to_csv(&audit_rows);
    for s in &skipped {
        audit_csv.push_str(&format!("# skipped {s}\n"));
    }
    write_file(&ctx.out_dir.join("audit.csv"), &audit_csv)?;

    let artifact = match sim::fit_exponent(&curve) {
        Ok(fit) => ExponentArtifact {
            fit: Some(fit),
            error: None,
            bound_exponents: exponents_of(&audit_report),
        },
        Err(e) => ExponentArtifact {
            fit: None,
            error: Some(e.to_string()),
            bound_exponents: exponents_of(&audit_report),
        },
    };
    let json = serde_json::to_string_pretty(&artifact)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_file(&ctx.out_dir.join("exponent.json"), &json)?;
    Ok(())
}

fn exponents_of(report: &BoundReport) -> BTreeMap<String, f64> {
    report
        .columns
        .iter()
        .filter_map(|c| c.exponent.map(|e| (c.name.clone(), e)))
        .collect()
}

/// Flat key,value text format for a computed transform.
fn transform_file(
    d: usize,
    m: usize,
    a: &Matrix,
    criterion: &str,
    value: f64,
    iterations: usize,
    rho_history: &[f64],
) -> String {
    let mut out = String::from("# repobs transform v1\n");
    out.push_str(&format!("d,{d}\n"));
    out.push_str(&format!("M,{m}\n"));
    let col_major: Vec<String> = (0..m)
        .flat_map(|j| (0..d).map(move |i| (i, j)))
        .map(|(i, j)| format!("{}", a[(i, j)]))
        .collect();
    out.push_str(&format!("A,{}\n", col_major.join(",")));
    out.push_str(&format!("criterion,{criterion}\n"));
    out.push_str(&format!("value,{value}\n"));
    out.push_str(&format!("iterations,{iterations}\n"));
    let history: Vec<String> = rho_history.iter().map(|r| format!("{r}")).collect();
    out.push_str(&format!("rho_history,{}\n", history.join(",")));
    out
}

/// `optimize`: run both transform optimizers, score them with σ²(A), and
/// emit the winner; binary problems also get the Fisher-LDA scaling.
pub fn cmd_optimize(ctx: &RunContext) -> Result<(), CliError> {
    let problem = &ctx.problem;
    let opt = ctx.loaded.config.optimizer.clone().unwrap_or_default();
    let set: ScatterSet = transform::scatter_matrices(problem, opt.regularize)?;
    let m = problem.num_classes();
    let d = problem.dim();
    let tol = opt.tol.unwrap_or(transform::TRACE_RATIO_TOL);
    let max_iter = opt.max_iter.unwrap_or(transform::TRACE_RATIO_MAX_ITER);

    // σ₁ by trace-ratio iteration, optionally multi-started.
    let mut best = transform::trace_ratio_optimize(&set.s_b, &set.s_w, m, tol, max_iter, None)?;
    let prototypes = problem.prototypes();
    let covs = problem.class_covariances();
    let mut best_sigma = bounds::sigma_of_a(&best.a, &prototypes, &covs)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    for start in 0..opt.multistart.unwrap_or(0) {
        let mut raw = Matrix::zeros(d, m);
        let mut rng = crate::seed::rng_for(ctx.seed, "trace-ratio-start", &[start as u64]);
        for i in 0..d {
            for j in 0..m {
                raw[(i, j)] = rand::Rng::gen_range(&mut rng, -1.0..1.0);
            }
        }
        let candidate =
            transform::trace_ratio_optimize(&set.s_b, &set.s_w, m, tol, max_iter, Some(raw))?;
        let sigma = bounds::sigma_of_a(&candidate.a, &prototypes, &covs)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        if sigma < best_sigma {
            best = candidate;
            best_sigma = sigma;
        }
    }
    let a1 = best;
    let sigma_a1 = best_sigma;
    write_file(
        &ctx.out_dir.join("transform_sigma1.txt"),
        &transform_file(d, m, &a1.a, "sigma1", 1.0 / a1.rho_star, a1.iterations, &a1.rho_history),
    )?;

    // σ₂ in closed form.
    let a2 = transform::sigma2_optimize(&set.s_w, &set.s_c, m)?;
    let sigma_a2 = bounds::sigma_of_a(&a2.a, &prototypes, &covs)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_file(
        &ctx.out_dir.join("transform_sigma2.txt"),
        &transform_file(d, m, &a2.a, "sigma2", a2.objective, 1, &[]),
    )?;

    // Identity-column baseline.
    let mut identity_cols = Matrix::zeros(d, m);
    for j in 0..m.min(d) {
        identity_cols[(j, j)] = 1.0;
    }
    let sigma_identity = bounds::sigma_of_a(&identity_cols, &prototypes, &covs)
        .map_err(|e| CliError::Numerical(e.to_string()))?;

    let winner = if sigma_a1 <= sigma_a2 { "sigma1" } else { "sigma2" };
    let mut comparison = String::from("# repobs transform-comparison v1\n");
    comparison.push_str("candidate,sigma_sq\n");
    comparison.push_str(&format!("sigma1,{sigma_a1}\n"));
    comparison.push_str(&format!("sigma2,{sigma_a2}\n"));
    comparison.push_str(&format!("identity,{sigma_identity}\n"));
    comparison.push_str(&format!("winner,{winner}\n"));
    write_file(&ctx.out_dir.join("comparison.csv"), &comparison)?;

    if m == 2 {
        let (c_plus_z, c_minus_z) = rescaled_covariances(problem)?;
        let z_plus = vec![1.0; d];
        let z_minus = vec![-1.0; d];
        let (a_star, sigma_tilde_sq) =
            transform::lda_scaling(&c_plus_z, &c_minus_z, &z_plus, &z_minus)?;
        let uniform = transform::sigma_tilde(
            &vec![1.0; d],
            &c_plus_z,
            &c_minus_z,
            &linalg::sub_vec(&z_plus, &z_minus),
        )?;
        let mut lda = String::from("# repobs lda-scaling v1\n");
        let entries: Vec<String> = a_star.iter().map(|x| format!("{x}")).collect();
        lda.push_str(&format!("a_star,{}\n", entries.join(",")));
        lda.push_str(&format!("sigma_tilde_sq,{sigma_tilde_sq}\n"));
        lda.push_str(&format!("sigma_tilde_sq_ones,{uniform}\n"));
        write_file(&ctx.out_dir.join("lda.csv"), &lda)?;
    }
    Ok(())
}

/// `exponent`: fit the decay exponent of an existing curve CSV and
/// compare against exponent columns found in sibling bound files.
pub fn cmd_exponent(curve_path: &Path, out_dir: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(curve_path)
        .map_err(|source| ConfigError::Io { path: curve_path.into(), source })?;
    let points = parse_curve_points(&text)?;
    let fit = sim::fit_exponent_points(&points, None)?;

    let mut bound_exponents = BTreeMap::new();
    if let Some(dir) = curve_path.parent() {
        if let Ok(entries) = fs::read_dir(dir) {
            let mut names: Vec<PathBuf> = entries
                .flatten()
                .map(|e| e.path())
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("bounds_") && n.ends_with(".csv"))
                })
                .collect();
            names.sort();
            for path in names {
                if let Ok(text) = fs::read_to_string(&path) {
                    for (name, exp) in parse_bound_exponents(&text) {
                        bound_exponents.insert(name, exp);
                    }
                }
            }
        }
    }

    let artifact = ExponentArtifact { fit: Some(fit), error: None, bound_exponents };
    let json = serde_json::to_string_pretty(&artifact)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_file(&out_dir.join("exponent.json"), &json)?;
    Ok(())
}

fn parse_curve_points(text: &str) -> Result<Vec<(usize, f64)>, CliError> {
    let mut header: Option<Vec<String>> = None;
    let mut points = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(line.split(',').map(|s| s.trim().to_string()).collect());
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let head = header.as_ref().unwrap();
        let t_ix = head.iter().position(|h| h == "t");
        let p_ix = head.iter().position(|h| h == "p_hat");
        let (Some(t_ix), Some(p_ix)) = (t_ix, p_ix) else {
            return Err(CliError::Validation("curve CSV lacks t/p_hat columns".into()));
        };
        let t: usize = cols
            .get(t_ix)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| CliError::Validation(format!("bad t in line '{line}'")))?;
        let p: f64 = cols
            .get(p_ix)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| CliError::Validation(format!("bad p_hat in line '{line}'")))?;
        points.push((t, p));
    }
    if points.is_empty() {
        return Err(CliError::Validation("curve CSV holds no data rows".into()));
    }
    Ok(points)
}

fn parse_bound_exponents(text: &str) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    let mut header: Option<Vec<String>> = None;
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(line.split(',').map(|s| s.trim().to_string()).collect());
            continue;
        }
        let head = header.as_ref().unwrap();
        let name_ix = head.iter().position(|h| h == "bound_name");
        let exp_ix = head.iter().position(|h| h == "exponent");
        let (Some(name_ix), Some(exp_ix)) = (name_ix, exp_ix) else { continue };
        let cols: Vec<&str> = line.split(',').collect();
        if let (Some(name), Some(exp)) = (cols.get(name_ix), cols.get(exp_ix)) {
            if let Ok(e) = exp.trim().parse::<f64>() {
                if !out.iter().any(|(n, _)| n == name.trim()) {
                    out.push((name.trim().to_string(), e));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_parse_reads_t_and_p_hat() {
        let csv = "# repobs simcurve v1\n# classifier=majority seed=1\n\
                   t,trials,errors,p_hat,ci_low,ci_high\n1,100,20,0.2,0.1,0.3\n3,100,10,0.1,0.05,0.2\n";
        let points = parse_curve_points(csv).unwrap();
        assert_eq!(points, vec![(1, 0.2), (3, 0.1)]);
    }

    #[test]
    fn bound_exponent_parse() {
        let csv = "# repobs bound-report v1\nt,bound_name,value,value_clipped,exponent\n\
                   1,majority-vote,0.8,0.8,0.22314\n2,majority-vote,0.64,0.64,0.22314\n";
        let exps = parse_bound_exponents(csv);
        assert_eq!(exps.len(), 1);
        assert_eq!(exps[0].0, "majority-vote");
        assert!((exps[0].1 - 0.22314).abs() < 1e-12);
    }
}

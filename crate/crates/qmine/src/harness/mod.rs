//! Seeded Monte Carlo experiments with machine-readable reports, and the
//! invariant suite behind `verify`.
//!
//! Every trial draws from streams keyed by (experiment seed, trial index), so
//! a report is reproducible from its spec alone; trials run in parallel and
//! are reduced in trial order.

mod invariants;
mod report;

pub use invariants::{invariant_suite, Check, SuiteCaps, SuiteReport};
pub use report::{emit_report, read_report, write_report, AssertionOutcome, ExperimentReport, Report, ReportFormat};

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    addressed_full_run, isolated_round, AttackBob, BobAttack, BobAttackKind, CopyVariant, RecoveryPolicy, RoundSetup,
    Scope, SendData, TestProcedure,
};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::oracles::{Database, Predicate};
use crate::protocol::{
    estimate_predicate, run_main, simulate_schedule, swap_test_states, Countermeasures, HonestAlice, ProtocolParams,
    RoundKind, Strategy, StrategyKind, TestMode,
};
use crate::qsim::{inner_product, StateVector, C64};
use crate::rng::{derive_seed, stream, TAG_STRATEGY, TAG_TRIAL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DbSpec {
    Rows { rows: Vec<String> },
    File { path: PathBuf },
    /// 2^n transactions: the first `count` all ones, the rest all zeros.
    Planted { n: u32, k: u32, count: usize },
}

impl DbSpec {
    pub fn load(&self) -> Result<Database> {
        match self {
            DbSpec::Rows { rows } => Database::from_strs(&rows.iter().map(String::as_str).collect::<Vec<_>>()),
            DbSpec::File { path } => Database::load(path),
            DbSpec::Planted { n, k, count } => {
                let len = 1usize << n;
                if *count > len {
                    return Err(Error::InvalidParams(format!("{count} planted rows in a {len}-row database")));
                }
                let rows = (0..len).map(|i| if i < *count { BitString::ones(*k) } else { BitString::zeros(*k) });
                Database::new(*k, rows.collect(), None)
            }
        }
    }
}

/// Bob's predicate in a detection experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "choice", rename_all = "snake_case")]
pub enum PredicateChoice {
    Fixed { predicate: Predicate },
    /// A fresh uniformly random truth table per trial.
    RandomTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    /// Isolated test rounds against honest Bob or an attack.
    Detection {
        procedure: TestProcedure,
        #[serde(default)]
        mode: TestMode,
        predicate: PredicateChoice,
        #[serde(default)]
        attack: Option<BobAttack>,
    },
    /// Honest runs; success is |ŝ − s| < 2π√s/T_eff + π²/T_eff².
    Counting {
        db: DbSpec,
        predicate: Predicate,
        #[serde(default = "trivial")]
        strategy: StrategyKind,
    },
    /// Campaigns of full runs against an attacking Bob, each ending at the
    /// first detection; counts the transactions he read before that.
    CheatRounds {
        db: DbSpec,
        predicate: Predicate,
        attack: BobAttack,
        #[serde(default = "default_max_runs")]
        max_runs: usize,
    },
    /// Honest Alice's test count over T loops, and Bob's abort rule
    /// "more than threshold·T tests".
    TestCount { threshold: f64 },
    /// Full runs of comparison tests against a multi-round attack.
    AddressedRun { predicate: Predicate, attack: BobAttack },
    /// Swap test on random pairs with |⟨φ|ψ⟩|² = overlap.
    SwapTest { overlap: f64 },
}

fn trivial() -> StrategyKind {
    StrategyKind::Trivial
}

fn default_max_runs() -> usize {
    10_000
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Detection { .. } => "detection",
            Experiment::Counting { .. } => "counting",
            Experiment::CheatRounds { .. } => "cheat_rounds",
            Experiment::TestCount { .. } => "test_count",
            Experiment::AddressedRun { .. } => "addressed_run",
            Experiment::SwapTest { .. } => "swap_test",
        }
    }

    /// Metric names the experiment reports.
    pub fn metrics(&self) -> &'static [&'static str] {
        match self {
            Experiment::Detection { .. } => &["detection", "pass"],
            Experiment::Counting { .. } => &["success", "relative_success", "mean_abs_error", "mean_estimate"],
            Experiment::CheatRounds { .. } => &["mean_reads", "mean_loops", "mean_runs"],
            Experiment::TestCount { .. } => &["exceed_fraction", "false_abort", "mean_tests"],
            Experiment::AddressedRun { .. } => &["pass", "mean_tests"],
            Experiment::SwapTest { .. } => &["outcome_one"],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Le,
    Ge,
    Eq,
}

/// Slack allowed when comparing an estimate to its bound: a fixed amount, or
/// a multiple of the statistical error (Wilson for frequencies).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    Abs(f64),
    Sigma(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub metric: String,
    pub comparator: Comparator,
    pub bound: f64,
    pub tolerance: Tolerance,
}

impl Assertion {
    pub fn new(metric: &str, comparator: Comparator, bound: f64, tolerance: Tolerance) -> Self {
        Self { metric: metric.into(), comparator, bound, tolerance }
    }

    pub fn holds(&self, m: &MetricEstimate) -> bool {
        let (lo, hi) = match self.tolerance {
            Tolerance::Abs(e) => (m.estimate - e, m.estimate + e),
            Tolerance::Sigma(z) => m.interval(z),
        };
        match self.comparator {
            Comparator::Le => lo <= self.bound,
            Comparator::Ge => hi >= self.bound,
            Comparator::Eq => lo <= self.bound && self.bound <= hi,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub params: ProtocolParams,
    pub experiment: Experiment,
    pub trials: u64,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParams(format!("{}: trials must be at least 1", self.name)));
        }
        self.params.validate()?;
        let known = self.experiment.metrics();
        for a in &self.assertions {
            if !known.contains(&a.metric.as_str()) {
                return Err(Error::InvalidParams(format!(
                    "{}: {} experiments do not report `{}`",
                    self.name,
                    self.experiment.name(),
                    a.metric
                )));
            }
        }
        Ok(())
    }
}

/// A point estimate with its 95% interval. Frequencies carry their counts
/// (Wilson interval), means their standard error (normal interval).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub successes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at z standard errors.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

impl MetricEstimate {
    pub fn frequency(successes: u64, trials: u64) -> Self {
        let (ci_lo, ci_hi) = wilson(successes, trials, Z95);
        Self {
            estimate: successes as f64 / trials as f64,
            ci_lo,
            ci_hi,
            trials,
            successes: Some(successes),
            stderr: None,
        }
    }

    pub fn mean(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let se = (var / n).sqrt();
        Self {
            estimate: mean,
            ci_lo: mean - Z95 * se,
            ci_hi: mean + Z95 * se,
            trials: samples.len() as u64,
            successes: None,
            stderr: Some(se),
        }
    }

    /// Two-sided interval at z standard errors.
    pub fn interval(&self, z: f64) -> (f64, f64) {
        match (self.successes, self.stderr) {
            (Some(s), _) => wilson(s, self.trials, z),
            (None, Some(se)) => (self.estimate - z * se, self.estimate + z * se),
            _ => (self.estimate, self.estimate),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    /// `None` for the open last bin.
    pub hi: Option<f64>,
    pub count: u64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Stop starting new trial chunks once this much time has passed.
    pub budget: Option<Duration>,
}

const CHUNK: u64 = 64;

fn run_trials<T, F>(trials: u64, budget: Option<Duration>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let start = Instant::now();
    let mut out = Vec::with_capacity(trials as usize);
    let mut next = 0;
    while next < trials {
        let end = (next + CHUNK).min(trials);
        let part: Vec<T> = (next..end).into_par_iter().map(&f).collect::<Result<_>>()?;
        out.extend(part);
        next = end;
        if budget.is_some_and(|b| start.elapsed() >= b) {
            break;
        }
    }
    Ok(out)
}

fn count(flags: &[bool]) -> u64 {
    flags.iter().filter(|b| **b).count() as u64
}

struct Measured {
    trials: u64,
    metrics: BTreeMap<String, MetricEstimate>,
    histogram: Vec<HistogramBin>,
}

fn trial_params(params: &ProtocolParams, trial: u64, extra: &[u64]) -> ProtocolParams {
    let mut tags = vec![TAG_TRIAL, trial];
    tags.extend_from_slice(extra);
    ProtocolParams { seed: derive_seed(params.seed, &tags), ..params.clone() }
}

fn random_table(k: u32, seed: u64, trial: u64) -> Predicate {
    let mut rng = stream(seed, &[TAG_TRIAL, trial, TAG_STRATEGY]);
    Predicate::Table { values: (0..1u64 << k).map(|_| rng.gen()).collect() }
}

/// Random φ and ψ = √o·φ + √(1−o)·φ⊥ on `qubits` qubits.
fn overlap_pair(qubits: usize, overlap: f64, seed: u64, trial: u64) -> Result<(StateVector, StateVector)> {
    let mut rng = stream(seed, &[TAG_TRIAL, trial]);
    let phi = StateVector::random(qubits, &mut rng);
    let r = StateVector::random(qubits, &mut rng);
    let ip = inner_product(&phi, &r)?;
    let perp: Vec<C64> = r.amps().iter().zip(phi.amps()).map(|(x, p)| x - p * ip).collect();
    let perp = StateVector::normalized(perp)?;
    let (a, b) = (overlap.sqrt(), (1.0 - overlap).max(0.0).sqrt());
    let psi: Vec<C64> = phi.amps().iter().zip(perp.amps()).map(|(p, q)| p * a + q * b).collect();
    Ok((phi, StateVector::normalized(psi)?))
}

fn measure(spec: &ExperimentSpec, opts: &RunOptions) -> Result<Measured> {
    let params = &spec.params;
    let (n, k, t, seed) = (params.n, params.k, params.t, params.seed);
    let budget = opts.budget;
    let mut metrics = BTreeMap::new();
    let mut histogram = Vec::new();
    let mut put = |name: &str, m: MetricEstimate| {
        metrics.insert(name.to_string(), m);
    };

    let trials = match &spec.experiment {
        Experiment::Detection { procedure, mode, predicate, attack } => {
            let results = run_trials(spec.trials, budget, |trial| {
                let f = match predicate {
                    PredicateChoice::Fixed { predicate } => predicate.clone(),
                    PredicateChoice::RandomTable => random_table(k, seed, trial),
                };
                let setup = RoundSetup { n, k, t, f: &f, procedure: *procedure, mode: *mode };
                let r = isolated_round(&setup, attack.as_ref(), seed, trial)?.result;
                Ok((r.detection.is_some(), r.passed()))
            })?;
            let m = results.len() as u64;
            let det: Vec<bool> = results.iter().map(|r| r.0).collect();
            let pass: Vec<bool> = results.iter().map(|r| r.1).collect();
            put("detection", MetricEstimate::frequency(count(&det), m));
            put("pass", MetricEstimate::frequency(count(&pass), m));
            m
        }
        Experiment::Counting { db, predicate, strategy } => {
            let db = db.load()?;
            let s = db.mean_of(predicate);
            let runs = run_trials(spec.trials, budget, |trial| {
                let est = estimate_predicate(&db, predicate, &trial_params(params, trial, &[]), *strategy)?;
                Ok((est.s_combined, est.outcome.t_eff))
            })?;
            let m = runs.len() as u64;
            let t_eff = runs.first().map_or(1, |r| r.1) as f64;
            let bound = 2.0 * PI * s.sqrt() / t_eff + PI * PI / (t_eff * t_eff);
            let errs: Vec<f64> = runs.iter().map(|(e, _)| (e - s).abs()).collect();
            put("success", MetricEstimate::frequency(count(&errs.iter().map(|e| *e < bound).collect::<Vec<_>>()), m));
            if s > 0.0 {
                let rel: Vec<bool> = errs.iter().map(|e| e / s < 0.07).collect();
                put("relative_success", MetricEstimate::frequency(count(&rel), m));
            }
            put("mean_abs_error", MetricEstimate::mean(&errs));
            put("mean_estimate", MetricEstimate::mean(&runs.iter().map(|r| r.0).collect::<Vec<_>>()));
            let edges = [0.0, bound, 2.0 * bound, 4.0 * bound];
            for (i, lo) in edges.iter().enumerate() {
                let hi = edges.get(i + 1).copied();
                let c = errs.iter().filter(|e| **e >= *lo && hi.is_none_or(|h| **e < h)).count();
                histogram.push(HistogramBin { lo: *lo, hi, count: c as u64 });
            }
            m
        }
        Experiment::CheatRounds { db, predicate, attack, max_runs } => {
            let db = db.load()?;
            let strategy = Strategy::trivial(predicate.clone(), t);
            let campaigns = run_trials(spec.trials, budget, |trial| {
                let (mut reads, mut loops) = (0usize, 0usize);
                for run in 0..*max_runs {
                    let p = trial_params(params, trial, &[run as u64]);
                    let mut bob = AttackBob::new(attack.clone());
                    let out = run_main(&db, &strategy, &mut HonestAlice::new(), &mut bob, &p)?;
                    reads += out.bob_reads;
                    loops += out.transcript.records.iter().filter(|r| r.kind == RoundKind::Compute).count();
                    if out.terminated.is_some() {
                        return Ok([reads as f64, loops as f64, (run + 1) as f64]);
                    }
                }
                Err(Error::InvalidParams(format!("campaign {trial} not detected within {max_runs} runs")))
            })?;
            for (i, name) in ["mean_reads", "mean_loops", "mean_runs"].iter().enumerate() {
                put(name, MetricEstimate::mean(&campaigns.iter().map(|c| c[i]).collect::<Vec<_>>()));
            }
            campaigns.len() as u64
        }
        Experiment::TestCount { threshold } => {
            let total = params.total_loops() as f64;
            let limit = (threshold * total).floor() as usize;
            let limits = Countermeasures { test_count_limit: Some(limit), run_length_limit: None };
            let runs = run_trials(spec.trials, budget, |trial| {
                let out = simulate_schedule(&trial_params(params, trial, &[]), &mut HonestAlice::new(), limits);
                Ok((out.tests, out.abort.is_some()))
            })?;
            let m = runs.len() as u64;
            let exceed: Vec<bool> = runs.iter().map(|r| r.0 as f64 >= threshold * total).collect();
            let abort: Vec<bool> = runs.iter().map(|r| r.1).collect();
            put("exceed_fraction", MetricEstimate::frequency(count(&exceed), m));
            put("false_abort", MetricEstimate::frequency(count(&abort), m));
            put("mean_tests", MetricEstimate::mean(&runs.iter().map(|r| r.0 as f64).collect::<Vec<_>>()));
            m
        }
        Experiment::AddressedRun { predicate, attack } => {
            let runs = run_trials(spec.trials, budget, |trial| {
                addressed_full_run(&trial_params(params, trial, &[]), predicate, attack)
            })?;
            let m = runs.len() as u64;
            put("pass", MetricEstimate::frequency(count(&runs.iter().map(|r| r.passed).collect::<Vec<_>>()), m));
            put("mean_tests", MetricEstimate::mean(&runs.iter().map(|r| r.tests as f64).collect::<Vec<_>>()));
            m
        }
        Experiment::SwapTest { overlap } => {
            if !(0.0..=1.0).contains(overlap) {
                return Err(Error::InvalidParams(format!("overlap {overlap} outside [0, 1]")));
            }
            let bits = run_trials(spec.trials, budget, |trial| {
                let (phi, psi) = overlap_pair(2, *overlap, seed, trial)?;
                let mut rng = stream(seed, &[TAG_TRIAL, trial, 1]);
                Ok(swap_test_states(&phi, &psi, &mut rng)?.0 == 1)
            })?;
            put("outcome_one", MetricEstimate::frequency(count(&bits), bits.len() as u64));
            bits.len() as u64
        }
    };
    Ok(Measured { trials, metrics, histogram })
}

pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<ExperimentReport> {
    spec.validate()?;
    let start = Instant::now();
    let m = measure(spec, opts)?;
    let mut assertions = Vec::with_capacity(spec.assertions.len());
    for a in &spec.assertions {
        let est = m.metrics.get(&a.metric).ok_or_else(|| {
            Error::InvalidParams(format!("{}: metric `{}` was not produced", spec.name, a.metric))
        })?;
        assertions.push(AssertionOutcome {
            metric: a.metric.clone(),
            comparator: a.comparator,
            bound: a.bound,
            tolerance: a.tolerance,
            estimate: est.estimate,
            ci_lo: est.ci_lo,
            ci_hi: est.ci_hi,
            pass: a.holds(est),
        });
    }
    Ok(ExperimentReport {
        name: spec.name.clone(),
        kind: spec.experiment.name().to_string(),
        seed: spec.params.seed,
        trials_requested: spec.trials,
        trials_run: m.trials,
        metrics: m.metrics,
        histogram: m.histogram,
        assertions,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}

pub fn run_battery(specs: &[ExperimentSpec], opts: &RunOptions) -> Result<Report> {
    let experiments = specs.iter().map(|s| run_experiment(s, opts)).collect::<Result<_>>()?;
    Ok(Report { experiments })
}

/// Experiment specs from a JSON file holding one spec or a list of them.
pub fn load_specs(path: &Path) -> Result<Vec<ExperimentSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_specs(&text)
}

pub fn parse_specs(text: &str) -> Result<Vec<ExperimentSpec>> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    let specs = if v.is_array() { serde_json::from_value(v)? } else { vec![serde_json::from_value(v)?] };
    Ok(specs)
}

fn spec(name: &str, params: ProtocolParams, experiment: Experiment, trials: u64, assertions: Vec<Assertion>) -> ExperimentSpec {
    ExperimentSpec { name: name.into(), params, experiment, trials, assertions }
}

fn contains(s: &str) -> Predicate {
    Predicate::contains(s.parse().expect("literal itemset"))
}

fn detection(procedure: TestProcedure, predicate: PredicateChoice, attack: Option<BobAttackKind>) -> Experiment {
    Experiment::Detection { procedure, mode: TestMode::Measure, predicate, attack: attack.map(BobAttack::new) }
}

/// 1/4 + 3/(4·n(2^k − 1)).
pub fn recovery_bound(n: u32, k: u32) -> f64 {
    0.25 + 3.0 / (4.0 * f64::from(n) * ((1u64 << k) - 1) as f64)
}

pub const BUNDLED: [&str; 4] = ["honest", "attack2-data", "recovery", "battery"];

pub fn bundled(name: &str) -> Option<Vec<ExperimentSpec>> {
    let pick = |names: &[&str]| default_battery().into_iter().filter(|s| names.contains(&s.name.as_str())).collect();
    match name {
        "honest" => Some(pick(&["honest-test1", "honest-test2"])),
        "attack2-data" => Some(pick(&["attack2-data"])),
        "recovery" => Some(pick(&[
            "recovery-test-basis-n2k2",
            "recovery-computational-n2k2",
            "recovery-test-basis-n3k3",
            "recovery-computational-n3k3",
        ])),
        "battery" => Some(default_battery()),
        _ => None,
    }
}

/// Every Monte Carlo assertion, once each. Seeds are fixed.
pub fn default_battery() -> Vec<ExperimentSpec> {
    use Comparator::*;
    use Tolerance::*;
    let mut out = Vec::new();

    for count in [1usize, 8, 16] {
        out.push(spec(
            &format!("counting-s{count}of32"),
            ProtocolParams::new(5, 4, 7, 1000 + count as u64),
            Experiment::Counting {
                db: DbSpec::Planted { n: 5, k: 4, count },
                predicate: contains("1100"),
                strategy: StrategyKind::Trivial,
            },
            500,
            vec![Assertion::new("success", Ge, 0.75, Abs(0.0))],
        ));
    }
    out.push(spec(
        "counting-sizing",
        ProtocolParams::new(3, 2, 8, 1100),
        Experiment::Counting {
            db: DbSpec::Planted { n: 3, k: 2, count: 2 },
            predicate: contains("10"),
            strategy: StrategyKind::Trivial,
        },
        500,
        vec![Assertion::new("relative_success", Ge, 0.75, Abs(0.0))],
    ));

    for (name, procedure) in [("honest-test1", TestProcedure::Test1), ("honest-test2", TestProcedure::Test2)] {
        out.push(spec(
            name,
            ProtocolParams::new(3, 2, 3, 1200),
            detection(procedure, PredicateChoice::RandomTable, None),
            1000,
            vec![Assertion::new("detection", Eq, 0.0, Abs(0.0))],
        ));
    }

    let f01 = || PredicateChoice::Fixed { predicate: contains("01") };
    let attacks: [(&str, u32, BobAttackKind, Assertion); 6] = [
        (
            "attack2-data",
            2,
            BobAttackKind::Attack2Measure { scope: Scope::Data },
            Assertion::new("detection", Eq, 0.5, Sigma(3.0)),
        ),
        (
            "attack2-joint",
            4,
            BobAttackKind::Attack2Measure { scope: Scope::AddressData },
            Assertion::new("detection", Ge, 1.0 - 1.0 / 16.0, Sigma(3.0)),
        ),
        (
            "attack3-full-copy",
            4,
            BobAttackKind::Attack3Entangle { variant: CopyVariant::FullCopy },
            Assertion::new("detection", Ge, 1.0 - 1.0 / 16.0, Sigma(3.0)),
        ),
        (
            "attack3-data-copy",
            2,
            BobAttackKind::Attack3Entangle { variant: CopyVariant::DataCopy },
            Assertion::new("detection", Eq, 0.5, Sigma(3.0)),
        ),
        (
            "attack1-mu",
            4,
            BobAttackKind::Attack1Send { address: 0, data: SendData::Mu },
            Assertion::new("pass", Le, 1.0 / 16.0, Sigma(3.0)),
        ),
        (
            "attack1-outside",
            2,
            BobAttackKind::Attack1Send { address: 0, data: SendData::Outside },
            Assertion::new("detection", Eq, 1.0, Abs(0.0)),
        ),
    ];
    for (name, n, kind, assertion) in attacks {
        out.push(spec(
            name,
            ProtocolParams::new(n, 2, 3, 1300),
            detection(TestProcedure::Test1, f01(), Some(kind)),
            10_000,
            vec![assertion],
        ));
    }

    for (n, k) in [(2u32, 2u32), (3, 3)] {
        for (label, policy) in [("test-basis", RecoveryPolicy::TestBasis), ("computational", RecoveryPolicy::Computational)] {
            out.push(spec(
                &format!("recovery-{label}-n{n}k{k}"),
                ProtocolParams::new(n, k, 3, 1400),
                detection(
                    TestProcedure::Test1,
                    PredicateChoice::Fixed { predicate: Predicate::AllZero },
                    Some(BobAttackKind::Recovery { policy }),
                ),
                10_000,
                vec![Assertion::new("pass", Le, recovery_bound(n, k), Abs(0.03))],
            ));
        }
    }

    for (label, overlap) in [("0", 0.0), ("0.25", 0.25), ("1", 1.0)] {
        let expected = (1.0 - overlap) / 2.0;
        let tol = if overlap == 1.0 { Abs(0.0) } else { Sigma(3.0) };
        out.push(spec(
            &format!("swap-overlap-{label}"),
            ProtocolParams::new(1, 1, 1, 1500),
            Experiment::SwapTest { overlap },
            10_000,
            vec![Assertion::new("outcome_one", Eq, expected, tol)],
        ));
    }

    out.push(spec(
        "addressed-run-n10",
        ProtocolParams::new(10, 1, 6, 1600),
        Experiment::AddressedRun {
            predicate: Predicate::AllZero,
            attack: BobAttack::new(BobAttackKind::MultiroundAddressed { address: 5, inner: Predicate::AllOne }),
        },
        1000,
        vec![Assertion::new("pass", Ge, 0.95, Abs(0.0))],
    ));

    let p = 0.05;
    out.push(spec(
        "cheat-rounds",
        ProtocolParams::new(2, 2, 3, 1700).with_p(p),
        Experiment::CheatRounds {
            db: DbSpec::Rows { rows: ["11", "01", "10", "00"].map(String::from).to_vec() },
            predicate: contains("01"),
            attack: BobAttack::new(BobAttackKind::Attack2Measure { scope: Scope::Data }),
            max_runs: default_max_runs(),
        },
        10_000,
        vec![Assertion::new("mean_reads", Le, 2.0 / p - 1.0, Sigma(3.0))],
    ));

    out.push(spec(
        "test-count",
        ProtocolParams::new(2, 1, 10, 1800).with_p(p),
        Experiment::TestCount { threshold: 0.4 },
        10_000,
        vec![
            Assertion::new("exceed_fraction", Le, 0.001, Abs(0.0)),
            Assertion::new("false_abort", Le, 0.002, Abs(0.0)),
        ],
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_hand_values() {
        // 50/100 at z = 1.96: centre 0.5, half-width 0.0961
        let (lo, hi) = wilson(50, 100, Z95);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        let (lo, hi) = wilson(0, 1000, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.00383).abs() < 1e-4);
    }

    #[test]
    fn assertion_semantics() {
        let m = MetricEstimate::frequency(52, 100);
        assert!(Assertion::new("x", Comparator::Eq, 0.5, Tolerance::Sigma(3.0)).holds(&m));
        assert!(!Assertion::new("x", Comparator::Eq, 0.5, Tolerance::Abs(0.01)).holds(&m));
        assert!(Assertion::new("x", Comparator::Le, 0.5, Tolerance::Abs(0.03)).holds(&m));
        assert!(!Assertion::new("x", Comparator::Ge, 0.9, Tolerance::Sigma(3.0)).holds(&m));
        let mean = MetricEstimate::mean(&[39.0, 41.0]);
        assert_eq!(mean.stderr, Some(1.0));
        assert!(Assertion::new("x", Comparator::Le, 39.0, Tolerance::Sigma(1.0)).holds(&mean));
    }

    #[test]
    fn battery_names_are_unique_and_valid() {
        let b = default_battery();
        let mut names: Vec<&str> = b.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), b.len());
        for s in &b {
            s.validate().unwrap();
        }
        for name in BUNDLED {
            assert!(!bundled(name).unwrap().is_empty());
        }
        assert!(bundled("nope").is_none());
    }

    #[test]
    fn unknown_metric_is_rejected() {
        let mut s = bundled("attack2-data").unwrap().remove(0);
        s.assertions.push(Assertion::new("mean_reads", Comparator::Le, 1.0, Tolerance::Abs(0.0)));
        assert!(s.validate().is_err());
        s.assertions.clear();
        s.trials = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn specs_round_trip_json() {
        let b = default_battery();
        let text = serde_json::to_string(&b).unwrap();
        assert_eq!(parse_specs(&text).unwrap(), b);
        let one = serde_json::to_string(&b[0]).unwrap();
        assert_eq!(parse_specs(&one).unwrap(), vec![b[0].clone()]);
    }

    #[test]
    fn planted_db_support() {
        let db = DbSpec::Planted { n: 3, k: 2, count: 3 }.load().unwrap();
        assert_eq!(db.mean_of(&contains("01")), 3.0 / 8.0);
        assert!(DbSpec::Planted { n: 1, k: 2, count: 3 }.load().is_err());
    }

    #[test]
    fn small_experiment_is_deterministic() {
        let mut s = bundled("attack2-data").unwrap().remove(0);
        s.trials = 300;
        let a = run_experiment(&s, &RunOptions::default()).unwrap();
        let b = run_experiment(&s, &RunOptions::default()).unwrap();
        assert_eq!(serde_json::to_string(&a.metrics).unwrap(), serde_json::to_string(&b.metrics).unwrap());
        assert_eq!(a.trials_run, 300);
    }

    #[test]
    fn budget_stops_early() {
        let mut s = bundled("attack2-data").unwrap().remove(0);
        s.trials = 10 * CHUNK;
        let r = run_experiment(&s, &RunOptions { budget: Some(Duration::ZERO) }).unwrap();
        assert_eq!(r.trials_run, CHUNK);
    }

    #[test]
    fn swap_pairs_have_the_requested_overlap() {
        for o in [0.0, 0.25, 1.0] {
            let (phi, psi) = overlap_pair(2, o, 3, 1).unwrap();
            assert!((inner_product(&phi, &psi).unwrap().norm_sqr() - o).abs() < 1e-12);
        }
    }
}

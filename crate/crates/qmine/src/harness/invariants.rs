//! Deterministic identity checks: test-state bases and decompositions,
//! strategy identities at matrix level, honest completeness and the loop
//! schedule.

use std::collections::BTreeSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::adversary::{isolated_round, RoundSetup, TestProcedure};
use crate::error::Result;
use crate::oracles::{control_schedule, diffusion_g, Database, Predicate};
use crate::protocol::{
    apply_block, grover_iteration, honest_plan, make_strategy, run_main, simulate_schedule, verify_strategy_with,
    AliceBehavior, Copies, Countermeasures, HonestAlice, HonestBob, LoopPlan, PartyRngs, ProtocolParams, RoundKind,
    Strategy, StrategyKind, TestMode, TestTiming, Transcript,
};
use crate::qsim::{distance, matrix_distance, RegisterLayout, Role, StateVector, C64, SCALAR_TOL, STATE_TOL};
use crate::rng::{stream, Rng};
use crate::teststates::{
    all_params, decompose_insert_omega, decompose_shift_m, enumerate_bases, gram_deviation, reconstruct, test_state,
    TestParams,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteCaps {
    pub n: u32,
    pub k: u32,
    pub t: u32,
}

impl Default for SuiteCaps {
    fn default() -> Self {
        Self { n: 2, k: 2, t: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub params: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.pass)
    }

    pub fn check<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }

    fn push(&mut self, name: &str, params: String, pass: bool, detail: String) {
        self.checks.push(Check { name: name.into(), params, pass, detail });
    }
}

type GApply<'a> = &'a dyn Fn(&mut StateVector, &RegisterLayout) -> Result<()>;

/// Runs every check. With `mutate_g_sign` the strategy checks use −G in
/// place of G on the side under test, and must fail.
pub fn invariant_suite(caps: SuiteCaps, mutate_g_sign: bool) -> Result<SuiteReport> {
    let mut r = SuiteReport::default();
    let mut rng = stream(0x5017E, &[u64::from(caps.n), u64::from(caps.k), u64::from(caps.t)]);

    for n in 1..=caps.n {
        for k in 1..=caps.k {
            bases(&mut r, n, k)?;
        }
    }
    decompositions(&mut r, caps.n.max(2), caps.k.max(2), &mut rng)?;

    let g_true = |s: &mut StateVector, l: &RegisterLayout| diffusion_g(l.require(Role::Address)?.width as u32).apply(s, l, 0);
    let g_neg = |s: &mut StateVector, l: &RegisterLayout| {
        g_true(s, l)?;
        s.amps_mut().iter_mut().for_each(|a| *a = -*a);
        Ok(())
    };
    let g: GApply = if mutate_g_sign { &g_neg } else { &g_true };
    strategy_identities(&mut r, g, &g_true, &mut rng)?;
    strategies(&mut r, caps.t.max(3), g, &mut rng)?;

    completeness(&mut r, caps)?;
    copies_untouched(&mut r, caps)?;
    schedule(&mut r, caps.t)?;
    Ok(r)
}

fn bases(r: &mut SuiteReport, n: u32, k: u32) -> Result<()> {
    let bases = enumerate_bases(n, k);
    let want = n as usize * ((1usize << k) - 1);
    let mut worst: f64 = 0.0;
    let mut seen = BTreeSet::new();
    let mut disjoint = true;
    for b in &bases {
        worst = worst.max(gram_deviation(b, n, k)?);
        for m in &b.members {
            disjoint &= seen.insert(*m);
        }
    }
    let all: BTreeSet<TestParams> = all_params(n, k).into_iter().collect();
    let exhaustive = seen == all;
    let pass = bases.len() == want && worst <= STATE_TOL && disjoint && exhaustive;
    r.push(
        "bases",
        format!("n={n} k={k}"),
        pass,
        format!(
            "{} bases (want {want}), gram deviation {worst:.1e}, disjoint {disjoint}, exhaustive {exhaustive}",
            bases.len()
        ),
    );
    Ok(())
}

fn decompositions(r: &mut SuiteReport, n: u32, k: u32, rng: &mut Rng) -> Result<()> {
    let draws = 100;
    let mut worst_shift: f64 = 0.0;
    let mut worst_omega: f64 = 0.0;
    for i in 0..draws {
        let mut p = TestParams::random(n, k, rng);
        if i % 2 == 0 {
            // the phase case: b = 1 with x_0 = x_m = 1
            p.b = true;
            p.x |= (1 << (n - 1)) | (1 << (n - 1 - p.m));
        }
        let want = test_state(&p, n, k)?;
        let l = loop {
            let l = rng.gen_range(0..n);
            if l != p.m {
                break l;
            }
        };
        worst_shift = worst_shift.max(distance(&reconstruct(&decompose_shift_m(&p, l, n)?, n, k)?, &want));
        let omega = loop {
            let w = rng.gen_range(0..1u64 << k);
            if w != p.mu && w != p.nu {
                break w;
            }
        };
        worst_omega = worst_omega.max(distance(&reconstruct(&decompose_insert_omega(&p, omega, n)?, n, k)?, &want));
    }
    let params = format!("n={n} k={k} draws={draws}");
    r.push("shift_m", params.clone(), worst_shift <= STATE_TOL, format!("max deviation {worst_shift:.1e}"));
    r.push("insert_omega", params, worst_omega <= STATE_TOL, format!("max deviation {worst_omega:.1e}"));
    Ok(())
}

fn op_matrix(qubits: usize, f: impl Fn(&mut StateVector) -> Result<()>) -> Result<Vec<Vec<C64>>> {
    let dim = 1usize << qubits;
    let mut cols = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut s = StateVector::basis(qubits, j);
        f(&mut s)?;
        cols.push(s.amps().to_vec());
    }
    Ok((0..dim).map(|i| (0..dim).map(|j| cols[j][i]).collect()).collect())
}

fn small_db() -> Result<Database> {
    Database::from_strs(&["1", "0", "1", "1"])
}

fn random_table(k: u32, rng: &mut Rng) -> Predicate {
    Predicate::Table { values: (0..1u64 << k).map(|_| rng.gen()).collect() }
}

/// Q_f Q_h Q_f = G, the j = 2 palindrome Q_{f1} Q_{f2} Q_h Q_{f2} Q_{f1} = G
/// and Q_h Q_h = I at n = 2, k = 1, for every y.
fn strategy_identities(r: &mut SuiteReport, g: GApply, g_true: GApply, rng: &mut Rng) -> Result<()> {
    let db = small_db()?;
    let layout = RegisterLayout::from_widths(&[(Role::Address, 2), (Role::Data, 1)]);
    let (f, h) = (Predicate::contains("1".parse()?), Predicate::AllZero);
    let (f1, f2) = (random_table(1, rng), random_table(1, rng));
    let g_matrix = op_matrix(3, |s| g_true(s, &layout))?;
    let identity = op_matrix(3, |_| Ok(()))?;
    let cases: [(&str, Vec<Predicate>, &Vec<Vec<C64>>); 3] = [
        ("sandwich", vec![f.clone(), h.clone(), f], &g_matrix),
        ("palindrome", vec![f1.clone(), f2.clone(), h.clone(), f2, f1], &g_matrix),
        ("double_h", vec![h.clone(), h], &identity),
    ];
    for (name, funcs, want) in cases {
        let mut worst: f64 = 0.0;
        for y in 0..4 {
            let got = op_matrix(3, |s| apply_block(&funcs, &db, y, s, &layout, g))?;
            worst = worst.max(matrix_distance(&got, want));
        }
        r.push(name, "n=2 k=1 y=0..3".into(), worst <= STATE_TOL, format!("max entry deviation {worst:.1e}"));
    }
    Ok(())
}

fn strategies(r: &mut SuiteReport, t_max: u32, g: GApply, rng: &mut Rng) -> Result<()> {
    let db = small_db()?;
    let f = Predicate::contains("1".parse()?);
    for kind in [StrategyKind::Trivial, StrategyKind::OneConfusing, StrategyKind::TwoConfusing, StrategyKind::HbarTrap] {
        for t in 3..=t_max {
            let s = make_strategy(&f, kind, t, 1, rng)?;
            let res = (0..4).try_for_each(|y| verify_strategy_with(&s, &db, y, g));
            let detail = match &res {
                Ok(()) => "every block nets its required operator".to_string(),
                Err(e) => e.to_string(),
            };
            r.push("strategy", format!("{kind:?} t={t}"), res.is_ok(), detail);
        }
    }
    Ok(())
}

fn completeness(r: &mut SuiteReport, caps: SuiteCaps) -> Result<()> {
    let (n, k, t) = (caps.n.max(1), caps.k.max(1), caps.t.max(1));
    let rounds = 200;
    for procedure in [TestProcedure::Test1, TestProcedure::Test2] {
        let mut detections = 0;
        for trial in 0..rounds {
            let f = random_table(k, &mut stream(trial, &[0xF]));
            let setup = RoundSetup { n, k, t, f: &f, procedure, mode: TestMode::Measure };
            if !isolated_round(&setup, None, 0xC0, trial)?.result.passed() {
                detections += 1;
            }
        }
        r.push(
            "honest_completeness",
            format!("{procedure:?} n={n} k={k} t={t} rounds={rounds}"),
            detections == 0,
            format!("{detections} detections"),
        );
    }
    Ok(())
}

/// Plans a test at a fixed position in every loop.
struct ForcedAlice(TestTiming);

impl AliceBehavior for ForcedAlice {
    fn plan(&mut self, _loop_index: Option<usize>, p: f64, rng: &mut Rng) -> LoopPlan {
        LoopPlan { timing: self.0, ..honest_plan(p, rng) }
    }
}

/// Runs the loops with no tests, a test before and a test after each query
/// exchange, and compares the computational copies after every loop.
fn copies_untouched(r: &mut SuiteReport, caps: SuiteCaps) -> Result<()> {
    let (n, k, t) = (caps.n.max(1), caps.k.max(1), caps.t.max(1));
    let db = Database::new(k, (0..1u64 << n).map(|i| crate::BitString::new(k, i % (1 << k))).collect::<Result<_>>()?, None)?;
    let params = ProtocolParams::new(n, k, t, 7);
    let strategy = Strategy::trivial(Predicate::Table { values: (0..1u64 << k).map(|d| d % 3 == 1).collect() }, t);
    let mut runs: Vec<(Copies, ForcedAlice, PartyRngs)> = [TestTiming::None, TestTiming::Before, TestTiming::After]
        .into_iter()
        .map(|timing| (Copies::new(t, n, k), ForcedAlice(timing), PartyRngs::from_seed(params.seed)))
        .collect();
    let mut worst: f64 = 0.0;
    let mut detections = 0;
    for i in 0..params.total_loops() {
        for (copies, alice, rngs) in runs.iter_mut() {
            let mut tr = Transcript::default();
            if grover_iteration(i, copies, &db, 1, &strategy, alice, &mut HonestBob::new(), &params, &mut tr, rngs)?
                .is_some()
            {
                detections += 1;
            }
        }
        for (copies, _, _) in &runs[1..] {
            for c in 0..2 {
                worst = worst.max(distance(&copies.regs[c].state, &runs[0].0.regs[c].state));
            }
        }
    }
    r.push(
        "test_leaves_copies",
        format!("n={n} k={k} t={t}"),
        worst <= SCALAR_TOL && detections == 0,
        format!("max copy deviation {worst:.1e}, {detections} detections"),
    );
    Ok(())
}

fn schedule(r: &mut SuiteReport, t_cap: u32) -> Result<()> {
    for t in 1..=t_cap.max(3) + 3 {
        let mut counts = vec![0usize; t as usize];
        let mut last = 0;
        let mut ordered = control_schedule(0, t)?.is_none();
        for i in 1..1usize << t {
            let j = control_schedule(i, t)?.unwrap_or(usize::MAX);
            ordered &= j >= last && j < t as usize;
            last = j;
            if j < t as usize {
                counts[j] += 1;
            }
        }
        let sizes = counts.iter().enumerate().all(|(j, c)| *c == 1 << (t as usize - 1 - j));
        r.push("schedule", format!("t={t}"), ordered && sizes, format!("loops per control qubit {counts:?}"));
    }
    let db = Database::from_strs(&["11", "01", "01", "00"])?;
    let t = t_cap.max(2);
    let s = Strategy::trivial(Predicate::contains("01".parse()?), t);
    let mut agree = true;
    for seed in 0..5 {
        let params = ProtocolParams::new(2, 2, t, seed).with_p(0.2);
        let out = run_main(&db, &s, &mut HonestAlice::new(), &mut HonestBob::new(), &params)?;
        let sched = simulate_schedule(&params, &mut HonestAlice::new(), Countermeasures::default());
        agree &= sched.tests == out.transcript.records.iter().filter(|r| r.kind == RoundKind::Test1).count();
    }
    r.push("schedule_draws", format!("n=2 k=2 t={t} seeds=0..5"), agree, "schedule-level test draws match full runs".into());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let r = invariant_suite(SuiteCaps::default(), false).unwrap();
        assert!(r.passed(), "{:?}", r.first_failure());
        assert!(r.check("bases").any(|c| c.params == "n=2 k=2" && c.detail.starts_with("6 bases")));
    }

    #[test]
    fn g_sign_mutation_is_caught() {
        let r = invariant_suite(SuiteCaps::default(), true).unwrap();
        assert!(!r.passed());
        assert!(r.check("sandwich").all(|c| !c.pass));
        assert!(r.check("palindrome").all(|c| !c.pass));
        assert!(r.check("strategy").all(|c| !c.pass));
        assert!(r.check("bases").all(|c| c.pass));
    }
}

//! The main counting loop.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::strategy::{make_strategy, Strategy, StrategyKind};
use super::testing::{test_bob1, test_bob2, TestResult};
use super::transcript::{Cause, RoundKind, RoundRecord, Termination, Transcript};
use super::{
    AbortReason, AliceBehavior, BobBehavior, BobCtx, Countermeasures, DetectionPolicy, HonestAlice, HonestBob,
    LoopPlan, ProtocolParams, ReadoutRule, Register, Slot, TestObserver, TestTiming,
};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::oracles::{control_schedule, u_d, Database, Predicate};
use crate::qsim::{Gate, Role};
use crate::rng::{stream, Rng, TAG_ALICE, TAG_BOB, TAG_STRATEGY};

/// Alice's per-window draw: a test before the query exchange if r ≤ p, after
/// it if p < r ≤ 2p.
pub fn honest_plan(p: f64, rng: &mut Rng) -> LoopPlan {
    let r: f64 = rng.gen();
    let timing = if r <= p {
        TestTiming::Before
    } else if r <= 2.0 * p {
        TestTiming::After
    } else {
        TestTiming::None
    };
    LoopPlan { r, timing }
}

/// s from θ under the chosen rule.
pub fn readout(rule: ReadoutRule, theta: u64, t_eff: usize, g: bool) -> f64 {
    let a = theta as f64 * PI / t_eff as f64;
    match rule {
        ReadoutRule::Calibrated => a.cos().powi(2),
        ReadoutRule::GBranch if g => a.sin().powi(2),
        ReadoutRule::GBranch => a.cos().powi(2),
    }
}

#[derive(Clone, Debug)]
pub struct Copies {
    pub regs: [Register; 2],
}

impl Copies {
    pub fn new(t: u32, n: u32, k: u32) -> Self {
        let r = Register::computational(t, n, k);
        Self { regs: [r.clone(), r] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountOutcome {
    pub y: u64,
    pub t_eff: usize,
    pub theta: Option<u64>,
    /// θ measured on copy 2 (only with `per_copy_theta`).
    pub theta2: Option<u64>,
    pub g1: Option<bool>,
    pub g2: Option<bool>,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub tests: usize,
    pub detections: usize,
    pub bob_reads: usize,
    pub terminated: Option<Termination>,
    #[serde(skip)]
    pub transcript: Transcript,
}

impl CountOutcome {
    pub fn s_combined(&self) -> Option<f64> {
        Some((self.s1? + self.s2?) / 2.0)
    }
}

/// Per-party random streams. Alice's plans and test draws come from
/// `alice`; her measurements from `alice_meas`, so the draw sequence does not
/// depend on the quantum state.
pub struct PartyRngs {
    pub alice: Rng,
    pub alice_meas: Rng,
    pub bob: Rng,
}

impl PartyRngs {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            alice: stream(seed, &[TAG_ALICE]),
            alice_meas: stream(seed, &[TAG_ALICE, 1]),
            bob: stream(seed, &[TAG_BOB]),
        }
    }
}

fn ctx<'a>(params: &ProtocolParams, i: Option<usize>, control: Option<usize>, func: &'a Predicate, slot: Slot) -> BobCtx<'a> {
    BobCtx { loop_index: i, control, func, n: params.n, k: params.k, t: params.t, slot, copy: 1 }
}

/// Records a test and turns a detection or abort into a termination.
fn settle(
    res: TestResult,
    kind: RoundKind,
    plan: &LoopPlan,
    i: Option<usize>,
    params: &ProtocolParams,
    transcript: &mut Transcript,
) -> Option<Termination> {
    transcript.push(RoundRecord {
        loop_index: i,
        kind,
        r: plan.r,
        detection: res.detection,
        outcomes: res.outcomes.iter().map(BitString::to_string).collect(),
    });
    if let Some(reason) = res.abort {
        return Some(Termination { loop_index: i, cause: Cause::BobAbort { reason } });
    }
    match (res.detection, params.on_detection) {
        (Some(reason), DetectionPolicy::Terminate) => {
            Some(Termination { loop_index: i, cause: Cause::Detected { reason } })
        }
        _ => None,
    }
}

/// One loop: optional TestBob1, controlled U_{f_i} on both copies between
/// Alice's U_D(y) calls, then controlled G on both copies.
#[allow(clippy::too_many_arguments)]
pub fn grover_iteration(
    i: usize,
    copies: &mut Copies,
    db: &Database,
    y: u64,
    strategy: &Strategy,
    alice: &mut dyn AliceBehavior,
    bob: &mut dyn BobBehavior,
    params: &ProtocolParams,
    transcript: &mut Transcript,
    rngs: &mut PartyRngs,
) -> Result<Option<Termination>> {
    let (n, k, t) = (params.n, params.k, params.t);
    let control = control_schedule(i, t)?;
    let func = &strategy.funcs[i];
    let plan = alice.plan(Some(i), params.p, &mut rngs.alice);

    let test = |alice: &mut dyn AliceBehavior,
                bob: &mut dyn BobBehavior,
                transcript: &mut Transcript,
                r: &mut PartyRngs|
     -> Result<Option<Termination>> {
        let (tp, c) = alice.draw_test(Some(i), n, k, t, &mut r.alice);
        let cx = ctx(params, Some(i), control, func, Slot::Test);
        let res = test_bob1(bob, &cx, &tp, c, alice.test_mode(), &mut r.alice_meas, &mut r.bob)?;
        alice.on_test_result(Some(i), &res);
        Ok(settle(res, RoundKind::Test1, &plan, Some(i), params, transcript))
    };

    if plan.timing == TestTiming::Before {
        if let Some(term) = test(alice, bob, transcript, rngs)? {
            return Ok(Some(term));
        }
    }
    let ud = u_d(db, y);
    for (c, reg) in copies.regs.iter_mut().enumerate() {
        let copy = c as u8 + 1;
        if alice.substitutes(i, copy) {
            let mut probe = alice.probe_register(i, n, k, t)?;
            bob.query(&BobCtx { copy, ..ctx(params, Some(i), control, func, Slot::Probe) }, &mut probe, &mut rngs.bob)?;
            alice.read_probe(i, probe, &mut rngs.alice_meas)?;
            continue;
        }
        ud.apply(&mut reg.state, &reg.layout)?;
        bob.query(&BobCtx { copy, ..ctx(params, Some(i), control, func, Slot::Compute) }, reg, &mut rngs.bob)?;
        ud.apply(&mut reg.state, &reg.layout)?;
    }
    if plan.timing == TestTiming::After {
        if let Some(term) = test(alice, bob, transcript, rngs)? {
            return Ok(Some(term));
        }
    }
    for (c, reg) in copies.regs.iter_mut().enumerate() {
        let copy = c as u8 + 1;
        bob.diffusion(&BobCtx { copy, ..ctx(params, Some(i), control, func, Slot::Compute) }, reg, &mut rngs.bob)?;
    }
    transcript.push(RoundRecord { loop_index: Some(i), kind: RoundKind::Compute, r: plan.r, detection: None, outcomes: vec![] });
    if let Some(reason) = bob.on_loop_end(i) {
        return Ok(Some(Termination { loop_index: Some(i), cause: Cause::BobAbort { reason } }));
    }
    Ok(None)
}

fn check_dims(db: &Database, strategy: &Strategy, params: &ProtocolParams) -> Result<()> {
    params.validate()?;
    if db.n() != params.n || db.k() != params.k {
        return Err(Error::DimensionMismatch(db.n() as usize + db.k() as usize, (params.n + params.k) as usize));
    }
    if strategy.t != params.t {
        return Err(Error::InvalidParams(format!("strategy has t={}, params t={}", strategy.t, params.t)));
    }
    Ok(())
}

/// Runs the whole protocol: T loops, the final window with U'_f, Bob's
/// ancilla measurements and phase estimation on copy 1's measured control
/// qubits.
pub fn run_main(
    db: &Database,
    strategy: &Strategy,
    alice: &mut dyn AliceBehavior,
    bob: &mut dyn BobBehavior,
    params: &ProtocolParams,
) -> Result<CountOutcome> {
    check_dims(db, strategy, params)?;
    let mut rngs = PartyRngs::from_seed(params.seed);
    let (n, k, t) = (params.n, params.k, params.t);
    let y = rngs.alice.gen_range(0..1u64 << n);
    let mut copies = Copies::new(t, n, k);
    let mut transcript = Transcript::default();
    let mut out = CountOutcome {
        y,
        t_eff: strategy.effective_t(),
        theta: None,
        theta2: None,
        g1: None,
        g2: None,
        s1: None,
        s2: None,
        tests: 0,
        detections: 0,
        bob_reads: 0,
        terminated: None,
        transcript: Transcript::default(),
    };
    let finish = |mut out: CountOutcome, transcript: Transcript, bob: &dyn BobBehavior, term: Option<Termination>| {
        out.tests = transcript.tests();
        out.detections = transcript.detections();
        out.bob_reads = bob.reads();
        out.terminated = term;
        out.transcript = transcript;
        out
    };

    for i in 0..params.total_loops() {
        let term = grover_iteration(
            i,
            &mut copies,
            db,
            y,
            strategy,
            alice,
            bob,
            params,
            &mut transcript,
            &mut rngs,
        )?;
        if term.is_some() {
            return Ok(finish(out, transcript, bob, term));
        }
    }

    // final window
    let f = &strategy.target;
    let plan = alice.plan(None, params.p, &mut rngs.alice);
    let test2 = |alice: &mut dyn AliceBehavior, bob: &mut dyn BobBehavior, tr: &mut Transcript, r: &mut PartyRngs| {
        let (tp, c) = alice.draw_test(None, n, k, t, &mut r.alice);
        let res = test_bob2(bob, &ctx(params, None, None, f, Slot::FinalTest), &tp, c, &mut r.alice_meas, &mut r.bob)?;
        alice.on_test_result(None, &res);
        Ok::<_, Error>(settle(res, RoundKind::Test2, &plan, None, params, tr))
    };
    if plan.timing == TestTiming::Before {
        if let Some(term) = test2(alice, bob, &mut transcript, &mut rngs)? {
            return Ok(finish(out, transcript, bob, Some(term)));
        }
    }
    let ud = u_d(db, y);
    for (c, reg) in copies.regs.iter_mut().enumerate() {
        ud.apply(&mut reg.state, &reg.layout)?;
        let cx = BobCtx { copy: c as u8 + 1, ..ctx(params, None, None, f, Slot::Final) };
        bob.final_query(&cx, reg, &mut rngs.bob)?;
        ud.apply(&mut reg.state, &reg.layout)?;
    }
    if plan.timing == TestTiming::After {
        if let Some(term) = test2(alice, bob, &mut transcript, &mut rngs)? {
            return Ok(finish(out, transcript, bob, Some(term)));
        }
    }

    // Bob's measurements
    let mut gs = [false; 2];
    let mut outcomes = Vec::new();
    for (c, reg) in copies.regs.iter_mut().enumerate() {
        let g = reg.segment(Role::Ancilla)?.offset;
        gs[c] = reg.state.measure(&[g], &mut rngs.bob)?.bits.value() == 1;
        for &j in &strategy.traps {
            let q = reg.segment(Role::Control)?.qubit(j);
            reg.state.apply_gate(Gate::H, &[q], &[])?;
            let minus = reg.state.measure(&[q], &mut rngs.bob)?.bits.value() == 1;
            if minus != strategy.trap_sign(j) {
                transcript.push(RoundRecord {
                    loop_index: None,
                    kind: RoundKind::Final,
                    r: plan.r,
                    detection: None,
                    outcomes: vec![],
                });
                let reason = AbortReason::TrapViolation { qubit: j };
                return Ok(finish(out, transcript, bob, Some(Termination { loop_index: None, cause: Cause::BobAbort { reason } })));
            }
        }
    }
    let measured: Vec<usize> = {
        let cseg = copies.regs[0].segment(Role::Control)?;
        strategy.measured_controls().into_iter().map(|j| cseg.qubit(j)).collect()
    };
    let mut thetas = [0u64; 2];
    let copies_to_read = if params.per_copy_theta { 2 } else { 1 };
    for c in 0..copies_to_read {
        let reg = &mut copies.regs[c];
        reg.state.apply_qft(&measured, true)?;
        let m = reg.state.measure(&measured, &mut rngs.bob)?;
        thetas[c] = m.bits.value();
        outcomes.push(m.bits.to_string());
    }
    if !params.per_copy_theta {
        thetas[1] = thetas[0];
    }
    transcript.push(RoundRecord { loop_index: None, kind: RoundKind::Final, r: plan.r, detection: None, outcomes });

    out.theta = Some(thetas[0]);
    out.theta2 = params.per_copy_theta.then_some(thetas[1]);
    out.g1 = Some(gs[0]);
    out.g2 = Some(gs[1]);
    out.s1 = Some(readout(params.readout, thetas[0], out.t_eff, gs[0]));
    out.s2 = Some(readout(params.readout, thetas[1], out.t_eff, gs[1]));
    Ok(finish(out, transcript, bob, None))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportEstimate {
    pub s1: f64,
    pub s2: f64,
    pub s_combined: f64,
    pub outcome: CountOutcome,
}

/// Honest run with f = "contains `itemset`". The strategy is drawn from the
/// params seed.
pub fn estimate_support(
    db: &Database,
    itemset: &BitString,
    params: &ProtocolParams,
    kind: StrategyKind,
) -> Result<SupportEstimate> {
    if itemset.width() != db.k() {
        return Err(Error::InvalidParams(format!("itemset width {} != k = {}", itemset.width(), db.k())));
    }
    estimate_predicate(db, &Predicate::contains(*itemset), params, kind)
}

/// Honest run for any data predicate.
pub fn estimate_predicate(
    db: &Database,
    f: &Predicate,
    params: &ProtocolParams,
    kind: StrategyKind,
) -> Result<SupportEstimate> {
    let mut srng = stream(params.seed, &[TAG_STRATEGY]);
    let strategy = make_strategy(f, kind, params.t, params.k, &mut srng)?;
    let outcome = run_main(db, &strategy, &mut HonestAlice::new(), &mut HonestBob::new(), params)?;
    match (outcome.s1, outcome.s2) {
        (Some(s1), Some(s2)) => Ok(SupportEstimate { s1, s2, s_combined: (s1 + s2) / 2.0, outcome }),
        _ => Err(Error::Internal(format!("honest run terminated: {:?}", outcome.terminated))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOutcome {
    /// Tests Alice ran over the T loops.
    pub tests: usize,
    pub longest_run: usize,
    /// First abort Bob's observer would have raised.
    pub abort: Option<AbortReason>,
}

/// Alice's test draws and Bob's Repeat observer over T loops, without the
/// state vectors. Draws the same schedule as [`run_main`] for the same seed.
pub fn simulate_schedule(
    params: &ProtocolParams,
    alice: &mut dyn AliceBehavior,
    limits: Countermeasures,
) -> ScheduleOutcome {
    let mut rng = PartyRngs::from_seed(params.seed).alice;
    let _y = rng.gen_range(0..1u64 << params.n);
    let mut obs = TestObserver::new(limits);
    let mut out = ScheduleOutcome { tests: 0, longest_run: 0, abort: None };
    for i in 0..params.total_loops() {
        let plan = alice.plan(Some(i), params.p, &mut rng);
        if plan.timing != TestTiming::None {
            out.tests += 1;
            let _ = alice.draw_test(Some(i), params.n, params.k, params.t, &mut rng);
            let a = obs.repeat();
            out.abort = out.abort.or(a);
        }
        let a = obs.loop_end();
        out.longest_run = out.longest_run.max(obs.run);
        out.abort = out.abort.or(a);
    }
    out
}

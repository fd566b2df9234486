//! The counting protocol: registers, the two parties' behaviour hooks, test
//! procedures, Bob's strategies, and the main loop.

mod run;
mod strategy;
mod testing;
mod transcript;

pub use run::{
    estimate_predicate, estimate_support, grover_iteration, honest_plan, readout, run_main, simulate_schedule, Copies, PartyRngs,
    CountOutcome, ScheduleOutcome, SupportEstimate,
};
pub use strategy::{
    apply_block, make_strategy, noise_block, verify_strategy, verify_strategy_with, Strategy, StrategyKind,
};
pub use testing::{swap_test, swap_test_states, test_bob1, test_bob2, TestResult};
pub use transcript::{
    read_transcript, write_transcript, Cause, DetectionReason, RoundKind, RoundRecord, Termination, Transcript,
    TranscriptHeader,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::{diffusion_g, u_f_bit, u_f_phase, Predicate};
use crate::qsim::{Gate, RegisterLayout, Role, Segment, StateVector};
use crate::rng::Rng;
use crate::teststates::TestParams;

/// How Bob turns the phase-estimation outcome θ into a support estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutRule {
    /// s = cos²(θπ/T_eff) whatever g is. With G = I − 2|+⟩⟨+| the Grover
    /// eigenphases sit at π ± 2θ₀, which this maps back to sin²θ₀.
    #[default]
    Calibrated,
    /// s = sin²(θπ/T_eff) if g = 1, cos² otherwise.
    GBranch,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionPolicy {
    #[default]
    Terminate,
    /// Record detections and keep going (probability estimation).
    Continue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n: u32,
    pub k: u32,
    pub t: u32,
    pub p: f64,
    pub s_min: f64,
    pub seed: u64,
    #[serde(default)]
    pub readout: ReadoutRule,
    /// Measure θ on copy 2 as well and use it for s₂.
    #[serde(default)]
    pub per_copy_theta: bool,
    #[serde(default)]
    pub on_detection: DetectionPolicy,
}

impl ProtocolParams {
    pub fn new(n: u32, k: u32, t: u32, seed: u64) -> Self {
        Self {
            n,
            k,
            t,
            p: 0.05,
            s_min: 0.2,
            seed,
            readout: ReadoutRule::Calibrated,
            per_copy_theta: false,
            on_detection: DetectionPolicy::Terminate,
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn total_loops(&self) -> usize {
        1usize << self.t
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.t == 0 {
            return Err(Error::InvalidParams("n, k and t must be positive".into()));
        }
        if !(self.p > 0.0 && self.p < 0.5) {
            return Err(Error::InvalidParams(format!("p = {} outside (0, 0.5)", self.p)));
        }
        if self.t + self.n + self.k > 26 {
            return Err(Error::InvalidParams("register too large for a dense simulation".into()));
        }
        Ok(())
    }
}

/// Where Bob's control comes from on a register.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    /// Control qubits are the register's `Control` segment.
    Quantum,
    /// A classical t-bit control value c (test registers). Bit j of c is
    /// (c >> (t−1−j)) & 1.
    Classical(u64),
}

#[derive(Clone, Debug)]
pub struct Register {
    pub state: StateVector,
    pub layout: RegisterLayout,
    pub control: Control,
    pub t: u32,
}

impl Register {
    /// |+⟩^t |+⟩^n |0⟩^k.
    pub fn computational(t: u32, n: u32, k: u32) -> Self {
        let layout = RegisterLayout::from_widths(&[
            (Role::Control, t as usize),
            (Role::Address, n as usize),
            (Role::Data, k as usize),
        ]);
        let mut state = StateVector::zero(layout.num_qubits());
        for q in 0..(t + n) as usize {
            state.apply_gate(Gate::H, &[q], &[]).expect("qubit in range");
        }
        Self { state, layout, control: Control::Quantum, t }
    }

    /// A test register: classical control c and an (address, data) state.
    pub fn test(t: u32, n: u32, k: u32, c: u64, state: StateVector) -> Result<Self> {
        if state.num_qubits() != (n + k) as usize {
            return Err(Error::DimensionMismatch(state.num_qubits(), (n + k) as usize));
        }
        let layout = RegisterLayout::from_widths(&[(Role::Address, n as usize), (Role::Data, k as usize)]);
        Ok(Self { state, layout, control: Control::Classical(c), t })
    }

    /// `None` when an operation controlled by qubit `j` is switched off on
    /// this register, otherwise the index mask it is conditioned on.
    pub fn control_mask(&self, j: Option<usize>) -> Result<Option<usize>> {
        let Some(j) = j else { return Ok(None) };
        match self.control {
            Control::Classical(c) => {
                Ok(((c >> (self.t as usize - 1 - j)) & 1 == 1).then_some(0))
            }
            Control::Quantum => {
                let q = self.layout.require(Role::Control)?.qubit(j);
                Ok(Some(self.state.control_mask(&[q])?))
            }
        }
    }

    pub fn segment(&self, role: Role) -> Result<Segment> {
        self.layout.require(role)
    }

    /// Appends `width` fresh |0⟩ qubits with the given role.
    pub fn append(&mut self, role: Role, width: usize) -> Result<Segment> {
        if self.layout.num_qubits() + width > 28 {
            return Err(Error::InvalidParams("register would exceed 28 qubits".into()));
        }
        self.state.extend_with_zeros(width);
        Ok(self.layout.push(role, width))
    }

    /// Address and data qubits, address first.
    pub fn address_data_qubits(&self) -> Result<Vec<usize>> {
        let mut q = self.segment(Role::Address)?.qubits();
        q.extend(self.segment(Role::Data)?.qubits());
        Ok(q)
    }
}

/// Which exchange Bob is serving. Bob cannot see this; it is exposed only so
/// attack behaviours can keep accounts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Compute,
    Test,
    Final,
    FinalTest,
    /// A register Alice substituted for a computational one.
    Probe,
}

#[derive(Clone, Copy, Debug)]
pub struct BobCtx<'a> {
    pub loop_index: Option<usize>,
    pub control: Option<usize>,
    pub func: &'a Predicate,
    pub n: u32,
    pub k: u32,
    pub t: u32,
    pub slot: Slot,
    pub copy: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AbortReason {
    TestCountLimit { count: usize },
    RunLengthLimit { run: usize },
    TrapViolation { qubit: usize },
}

/// Bob's side of every exchange. The defaults are the honest protocol.
pub trait BobBehavior {
    /// Controlled U_{f_i} on a register received in the query slot.
    fn query(&mut self, ctx: &BobCtx, reg: &mut Register, _rng: &mut Rng) -> Result<()> {
        honest_query(ctx, reg)
    }

    /// Controlled G on a register received in the diffusion slot.
    fn diffusion(&mut self, ctx: &BobCtx, reg: &mut Register, _rng: &mut Rng) -> Result<()> {
        honest_diffusion(ctx, reg)
    }

    /// Fresh ancilla and U'_f in the final window.
    fn final_query(&mut self, ctx: &BobCtx, reg: &mut Register, _rng: &mut Rng) -> Result<()> {
        honest_final_query(ctx, reg)
    }

    /// Alice announced "Repeat" (a test is under way).
    fn on_repeat(&mut self, _loop_index: Option<usize>) -> Option<AbortReason> {
        None
    }

    fn on_loop_end(&mut self, _loop_index: usize) -> Option<AbortReason> {
        None
    }

    /// Transactions read from computational exchanges so far.
    fn reads(&self) -> usize {
        0
    }
}

pub fn honest_query(ctx: &BobCtx, reg: &mut Register) -> Result<()> {
    if let Some(mask) = reg.control_mask(ctx.control)? {
        u_f_phase(ctx.func, ctx.n, ctx.k).apply(&mut reg.state, &reg.layout, mask)?;
    }
    Ok(())
}

pub fn honest_diffusion(ctx: &BobCtx, reg: &mut Register) -> Result<()> {
    if let Some(mask) = reg.control_mask(ctx.control)? {
        diffusion_g(ctx.n).apply(&mut reg.state, &reg.layout, mask)?;
    }
    Ok(())
}

pub fn honest_final_query(ctx: &BobCtx, reg: &mut Register) -> Result<()> {
    reg.append(Role::Ancilla, 1)?;
    u_f_bit(ctx.func, ctx.n, ctx.k).apply(&mut reg.state, &reg.layout)
}

/// Bob-side limits on Alice's testing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Countermeasures {
    /// Abort once more than this many tests were announced.
    pub test_count_limit: Option<usize>,
    /// Abort after this many consecutive loops that each carried a test.
    pub run_length_limit: Option<usize>,
}

impl Countermeasures {
    /// 0.4·T tests and runs of 6, the suggested defaults.
    pub fn defaults(t: u32) -> Self {
        Self {
            test_count_limit: Some((0.4 * (1u64 << t) as f64).floor() as usize),
            run_length_limit: Some(6),
        }
    }
}

/// Counts "Repeat" messages and tested loops against [`Countermeasures`].
#[derive(Clone, Debug, Default)]
pub struct TestObserver {
    pub limits: Countermeasures,
    pub repeats: usize,
    pub run: usize,
    current_tested: bool,
}

impl TestObserver {
    pub fn new(limits: Countermeasures) -> Self {
        Self { limits, ..Self::default() }
    }

    pub fn repeat(&mut self) -> Option<AbortReason> {
        self.repeats += 1;
        self.current_tested = true;
        match self.limits.test_count_limit {
            Some(l) if self.repeats > l => Some(AbortReason::TestCountLimit { count: self.repeats }),
            _ => None,
        }
    }

    pub fn loop_end(&mut self) -> Option<AbortReason> {
        self.run = if self.current_tested { self.run + 1 } else { 0 };
        self.current_tested = false;
        match self.limits.run_length_limit {
            Some(l) if self.run >= l => Some(AbortReason::RunLengthLimit { run: self.run }),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct HonestBob {
    pub observer: TestObserver,
}

impl HonestBob {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_countermeasures(limits: Countermeasures) -> Self {
        Self { observer: TestObserver::new(limits) }
    }
}

impl BobBehavior for HonestBob {
    fn on_repeat(&mut self, _loop_index: Option<usize>) -> Option<AbortReason> {
        self.observer.repeat()
    }

    fn on_loop_end(&mut self, _loop_index: usize) -> Option<AbortReason> {
        self.observer.loop_end()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestTiming {
    None,
    Before,
    After,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopPlan {
    pub r: f64,
    pub timing: TestTiming,
}

/// How Alice judges the two returned test states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    /// Undo U_t and measure, as in the test procedures.
    #[default]
    Measure,
    /// Idealised state comparison: detect with probability 1 − F where F is
    /// the fidelity between Bob's return and the honest return.
    Fidelity,
}

/// Alice's side. The defaults are the honest protocol.
pub trait AliceBehavior {
    fn plan(&mut self, _loop_index: Option<usize>, p: f64, rng: &mut Rng) -> LoopPlan {
        honest_plan(p, rng)
    }

    /// Test parameters and classical control for one test.
    fn draw_test(&mut self, _loop_index: Option<usize>, n: u32, k: u32, t: u32, rng: &mut Rng) -> (TestParams, u64) {
        use rand::Rng as _;
        let tp = TestParams::random(n, k, rng);
        (tp, rng.gen_range(0..1u64 << t))
    }

    fn test_mode(&self) -> TestMode {
        TestMode::Measure
    }

    /// Replace computational copy `copy` in loop `i`'s query slot with a probe.
    fn substitutes(&mut self, _loop_index: usize, _copy: u8) -> bool {
        false
    }

    /// Build the probe register sent in place of a computational one.
    fn probe_register(&mut self, _loop_index: usize, _n: u32, _k: u32, _t: u32) -> Result<Register> {
        Err(Error::Internal("this Alice does not probe".into()))
    }

    /// Receive the probe back from Bob.
    fn read_probe(&mut self, _loop_index: usize, _reg: Register, _rng: &mut Rng) -> Result<()> {
        Ok(())
    }

    /// Sees the outcome of each test she ran.
    fn on_test_result(&mut self, _loop_index: Option<usize>, _res: &TestResult) {}
}

#[derive(Clone, Debug, Default)]
pub struct HonestAlice {
    pub mode: TestMode,
}

impl HonestAlice {
    pub fn new() -> Self {
        Self::default()
    }
}

impl AliceBehavior for HonestAlice {
    fn test_mode(&self) -> TestMode {
        self.mode
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::STATE_TOL;

    #[test]
    fn classical_control_bits() {
        let r = Register::test(3, 1, 1, 0b100, StateVector::zero(2)).unwrap();
        assert_eq!(r.control_mask(Some(0)).unwrap(), Some(0));
        assert_eq!(r.control_mask(Some(1)).unwrap(), None);
        assert_eq!(r.control_mask(None).unwrap(), None);
    }

    #[test]
    fn computational_register_is_uniform() {
        let r = Register::computational(2, 2, 1);
        let p = r.state.probabilities(&[0, 1, 2, 3]).unwrap();
        assert!(p.iter().all(|x| (x - 1.0 / 16.0).abs() < STATE_TOL));
        assert!((r.state.probabilities(&[4]).unwrap()[0] - 1.0).abs() < STATE_TOL);
    }

    #[test]
    fn observer_limits() {
        let mut o = TestObserver::new(Countermeasures { test_count_limit: Some(2), run_length_limit: Some(2) });
        assert!(o.repeat().is_none());
        assert!(o.loop_end().is_none());
        assert!(o.repeat().is_none());
        assert_eq!(o.loop_end(), Some(AbortReason::RunLengthLimit { run: 2 }));
        assert_eq!(o.repeat(), Some(AbortReason::TestCountLimit { count: 3 }));
        let mut o = TestObserver::new(Countermeasures::default());
        for _ in 0..100 {
            assert!(o.repeat().is_none() && o.loop_end().is_none());
        }
    }

    #[test]
    fn params_validation() {
        assert!(ProtocolParams::new(2, 2, 3, 0).validate().is_ok());
        assert!(ProtocolParams::new(2, 2, 3, 0).with_p(0.5).validate().is_err());
        assert!(ProtocolParams::new(0, 2, 3, 0).validate().is_err());
    }
}

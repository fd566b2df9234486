//! Dishonest behaviours for both parties.
//!
//! Bob's attacks override his query hooks (and, for the multi-round kinds,
//! the final U'_f); Alice's attacks substitute probe registers or flood the
//! run with tests. Super-operator attacks are not enumerated: an operation
//! that passes every test with certainty leaves the test registers it touches
//! unchanged, so it reads nothing. The contrapositive is what gets exercised
//! here, by checking that each implemented reading attack is detected at its
//! stated rate.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::oracles::{control_schedule, u_f_bit, u_f_phase, Predicate};
use crate::protocol::{
    honest_diffusion, honest_final_query, honest_plan, honest_query, test_bob1, test_bob2, AliceBehavior,
    BobBehavior, BobCtx, Control, HonestBob, LoopPlan, PartyRngs, ProtocolParams, Register, Slot, TestMode,
    TestObserver, TestResult, TestTiming,
};
use crate::qsim::{fidelity, Gate, Role, Segment, StateVector};
use crate::rng::{stream, Rng, TAG_ALICE, TAG_BOB, TAG_TRIAL};
use crate::teststates::{all_params, enumerate_bases, test_state, TestBasis, TestParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Data,
    AddressData,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopyVariant {
    /// E|i⟩|d⟩|0⟩ = |i⟩|d⟩|i⟩|d⟩.
    FullCopy,
    /// E|i⟩|d⟩|0⟩ = |i⟩|d⟩|d⟩.
    DataCopy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryPolicy {
    /// Measure both copies in one uniformly chosen test basis and resend the
    /// outcome state.
    TestBasis,
    /// Measure in the computational basis and resend the maximum-likelihood
    /// test state.
    Computational,
}

/// Data word Bob writes in attack 1. `Mu` and `Outside` give him knowledge
/// of the test pair and are resolved per round by [`BobAttack::resolve`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SendData {
    Value(u64),
    Mu,
    /// The smallest word outside {μ, ν}.
    Outside,
}

impl Default for SendData {
    fn default() -> Self {
        SendData::Value(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BobAttackKind {
    /// Return |address⟩|data⟩ instead of the register, then read the data
    /// word Alice's second U_D writes.
    Attack1Send {
        address: u64,
        #[serde(default)]
        data: SendData,
    },
    Attack2Measure { scope: Scope },
    /// CNOT fan-out onto a private segment.
    Attack3Entangle { variant: CopyVariant },
    Recovery { policy: RecoveryPolicy },
    /// Runs the protocol with δ(τ, d) in place of f.
    MultiroundDelta { d: BitString },
    /// Adds a phase δ(j, address)·inner(τ) on top of f in every query.
    MultiroundAddressed { address: u64, inner: Predicate },
}

/// Which loops an attack is active in.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    #[default]
    Always,
    Never,
    Loops(Vec<usize>),
}

impl Trigger {
    pub fn fires(&self, loop_index: Option<usize>) -> bool {
        match self {
            Trigger::Always => true,
            Trigger::Never => false,
            Trigger::Loops(l) => loop_index.is_some_and(|i| l.contains(&i)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BobAttack {
    #[serde(flatten)]
    pub kind: BobAttackKind,
    #[serde(default)]
    pub trigger: Trigger,
}

impl BobAttack {
    pub fn new(kind: BobAttackKind) -> Self {
        Self { kind, trigger: Trigger::Always }
    }

    pub fn with_trigger(mut self, trigger: Trigger) -> Self {
        self.trigger = trigger;
        self
    }

    /// Fixes test-dependent data choices against the round's parameters.
    pub fn resolve(&self, tp: &TestParams, k: u32) -> Result<Self> {
        let mut out = self.clone();
        if let BobAttackKind::Attack1Send { data, .. } = &mut out.kind {
            match *data {
                SendData::Value(_) => {}
                SendData::Mu => *data = SendData::Value(tp.mu),
                SendData::Outside => {
                    let v = (0..1u64 << k)
                        .find(|v| *v != tp.mu && *v != tp.nu)
                        .ok_or_else(|| Error::InvalidParams("no data word outside {μ, ν} when k = 1".into()))?;
                    *data = SendData::Value(v);
                }
            }
        }
        Ok(out)
    }

    /// Predicate Bob effectively evaluates in place of `f`, for the
    /// multi-round kinds.
    pub fn illicit_predicate(&self) -> Option<Predicate> {
        match &self.kind {
            BobAttackKind::MultiroundDelta { d } => Some(Predicate::Delta { d: *d }),
            BobAttackKind::MultiroundAddressed { address, inner } => {
                Some(Predicate::AddressDelta { address: *address, inner: Box::new(inner.clone()) })
            }
            _ => None,
        }
    }
}

/// One data word Bob obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadRecord {
    pub loop_index: Option<usize>,
    pub copy: u8,
    pub slot: Slot,
    /// Address qubits Bob saw, when he measured them.
    pub address: Option<u64>,
    pub data: BitString,
}

struct RecoveryTables {
    n: u32,
    k: u32,
    states: Vec<StateVector>,
    index: HashMap<TestParams, usize>,
    bases: Vec<TestBasis>,
    /// Maximum-likelihood guess per computational outcome, ties to the
    /// lowest tuple.
    ml: Vec<usize>,
}

impl RecoveryTables {
    fn build(n: u32, k: u32) -> Result<Self> {
        let params = all_params(n, k);
        let states: Vec<StateVector> = params.iter().map(|p| test_state(p, n, k)).collect::<Result<_>>()?;
        let index = params.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let dim = 1usize << (n + k);
        let ml = (0..dim)
            .map(|z| {
                let mut best = (0usize, -1.0f64);
                for (i, s) in states.iter().enumerate() {
                    let l = s.amps()[z].norm_sqr();
                    if l > best.1 + 1e-12 {
                        best = (i, l);
                    }
                }
                best.0
            })
            .collect();
        Ok(Self { n, k, states, index, bases: enumerate_bases(n, k), ml })
    }

    /// Shared per (n, k) across all attackers in the process.
    fn cached(n: u32, k: u32) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<(u32, u32), Arc<RecoveryTables>>>> = OnceLock::new();
        let mut map = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = map.get(&(n, k)) {
            return Ok(Arc::clone(t));
        }
        let t = Arc::new(Self::build(n, k)?);
        map.insert((n, k), Arc::clone(&t));
        Ok(t)
    }
}

fn sample(probs: &[f64], rng: &mut Rng) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn flip_to(state: &mut StateVector, qubits: &[usize], from: u64, to: u64) -> Result<()> {
    let diff = from ^ to;
    for (pos, &q) in qubits.iter().enumerate() {
        if (diff >> (qubits.len() - 1 - pos)) & 1 == 1 {
            state.apply_gate(Gate::X, &[q], &[])?;
        }
    }
    Ok(())
}

/// Bob running one [`BobAttack`]; honest wherever the attack does not apply.
pub struct AttackBob {
    pub attack: BobAttack,
    pub observer: TestObserver,
    pub log: Vec<ReadRecord>,
    /// Attack 1 data words sent per copy, read back in the diffusion slot.
    pending: [Option<u64>; 2],
    basis: Option<usize>,
    tables: Option<Arc<RecoveryTables>>,
}

impl AttackBob {
    pub fn new(attack: BobAttack) -> Self {
        Self { attack, observer: TestObserver::default(), log: Vec::new(), pending: [None; 2], basis: None, tables: None }
    }

    fn record(&mut self, ctx: &BobCtx, address: Option<u64>, data: BitString) {
        self.log.push(ReadRecord { loop_index: ctx.loop_index, copy: ctx.copy, slot: ctx.slot, address, data });
    }

    fn tables(&mut self, n: u32, k: u32) -> Result<Arc<RecoveryTables>> {
        if !matches!(&self.tables, Some(t) if t.n == n && t.k == k) {
            self.tables = Some(RecoveryTables::cached(n, k)?);
        }
        Ok(Arc::clone(self.tables.as_ref().expect("just set")))
    }

    fn recover(&mut self, ctx: &BobCtx, reg: &mut Register, policy: RecoveryPolicy, rng: &mut Rng) -> Result<()> {
        let (n, k) = (ctx.n, ctx.k);
        if reg.control == Control::Quantum || reg.layout.num_qubits() != (n + k) as usize {
            return Err(Error::InvalidParams("the recovery attack acts on bare test registers only".into()));
        }
        if policy == RecoveryPolicy::TestBasis && (ctx.copy == 1 || self.basis.is_none()) {
            let nb = self.tables(n, k)?.bases.len();
            self.basis = Some(rng.gen_range(0..nb));
        }
        let basis = self.basis;
        let tables = self.tables(n, k)?;
        let guess = match policy {
            RecoveryPolicy::TestBasis => {
                let b = &tables.bases[basis.expect("chosen above")];
                let probs: Vec<f64> = b
                    .members
                    .iter()
                    .map(|p| fidelity(&tables.states[tables.index[p]], &reg.state))
                    .collect::<Result<_>>()?;
                tables.index[&b.members[sample(&probs, rng)]]
            }
            RecoveryPolicy::Computational => {
                let q = reg.address_data_qubits()?;
                let z = reg.state.measure(&q, rng)?.bits.value();
                tables.ml[z as usize]
            }
        };
        reg.state = tables.states[guess].clone();
        Ok(())
    }
}

impl BobBehavior for AttackBob {
    fn query(&mut self, ctx: &BobCtx, reg: &mut Register, rng: &mut Rng) -> Result<()> {
        if !self.attack.trigger.fires(ctx.loop_index) {
            return honest_query(ctx, reg);
        }
        let k = ctx.k;
        match self.attack.kind.clone() {
            BobAttackKind::Attack1Send { address, data } => {
                let SendData::Value(data) = data else {
                    return Err(Error::InvalidParams("attack 1 data word not resolved".into()));
                };
                if address >> ctx.n != 0 || data >> k != 0 {
                    return Err(Error::InvalidParams("attack 1 address or data out of range".into()));
                }
                let q = reg.address_data_qubits()?;
                let seen = reg.state.measure(&q, rng)?.bits.value();
                flip_to(&mut reg.state, &q, seen, (address << k) | data)?;
                if ctx.slot == Slot::Compute {
                    self.pending[(ctx.copy as usize - 1).min(1)] = Some(data);
                }
                Ok(())
            }
            BobAttackKind::Attack2Measure { scope } => {
                let q = match scope {
                    Scope::Data => reg.segment(Role::Data)?.qubits(),
                    Scope::AddressData => reg.address_data_qubits()?,
                };
                let bits = reg.state.measure(&q, rng)?.bits;
                let (address, data) = match scope {
                    Scope::Data => (None, bits),
                    Scope::AddressData => (Some(bits.value() >> k), BitString::new(k, bits.value() & ((1 << k) - 1))?),
                };
                self.record(ctx, address, data);
                honest_query(ctx, reg)
            }
            BobAttackKind::Attack3Entangle { variant } => {
                let src = match variant {
                    CopyVariant::FullCopy => reg.address_data_qubits()?,
                    CopyVariant::DataCopy => reg.segment(Role::Data)?.qubits(),
                };
                let private = reg.append(Role::Private, src.len())?;
                for (i, &s) in src.iter().enumerate() {
                    reg.state.apply_gate(Gate::Cnot, &[private.qubit(i)], &[s])?;
                }
                honest_query(ctx, reg)
            }
            BobAttackKind::Recovery { policy } => {
                self.recover(ctx, reg, policy, rng)?;
                honest_query(ctx, reg)
            }
            BobAttackKind::MultiroundDelta { .. } => {
                let g = self.attack.illicit_predicate().expect("multi-round kind");
                if let Some(mask) = reg.control_mask(ctx.control)? {
                    u_f_phase(&g, ctx.n, k).apply(&mut reg.state, &reg.layout, mask)?;
                }
                Ok(())
            }
            BobAttackKind::MultiroundAddressed { .. } => {
                honest_query(ctx, reg)?;
                let g = self.attack.illicit_predicate().expect("multi-round kind");
                if let Some(mask) = reg.control_mask(ctx.control)? {
                    u_f_phase(&g, ctx.n, k).apply(&mut reg.state, &reg.layout, mask)?;
                }
                Ok(())
            }
        }
    }

    fn diffusion(&mut self, ctx: &BobCtx, reg: &mut Register, rng: &mut Rng) -> Result<()> {
        if let Some(sent) = self.pending[(ctx.copy as usize - 1).min(1)].take() {
            let q = reg.segment(Role::Data)?.qubits();
            let got = reg.state.measure(&q, rng)?.bits;
            let d = BitString::new(ctx.k, got.value() ^ sent)?;
            self.record(ctx, None, d);
        }
        honest_diffusion(ctx, reg)
    }

    fn final_query(&mut self, ctx: &BobCtx, reg: &mut Register, _rng: &mut Rng) -> Result<()> {
        if !self.attack.trigger.fires(ctx.loop_index) {
            return honest_final_query(ctx, reg);
        }
        match &self.attack.kind {
            BobAttackKind::MultiroundDelta { .. } => {
                reg.append(Role::Ancilla, 1)?;
                let g = self.attack.illicit_predicate().expect("multi-round kind");
                u_f_bit(&g, ctx.n, ctx.k).apply(&mut reg.state, &reg.layout)
            }
            BobAttackKind::MultiroundAddressed { .. } => {
                honest_final_query(ctx, reg)?;
                let g = self.attack.illicit_predicate().expect("multi-round kind");
                u_f_bit(&g, ctx.n, ctx.k).apply(&mut reg.state, &reg.layout)
            }
            _ => honest_final_query(ctx, reg),
        }
    }

    fn on_repeat(&mut self, _loop_index: Option<usize>) -> Option<crate::protocol::AbortReason> {
        self.observer.repeat()
    }

    fn on_loop_end(&mut self, _loop_index: usize) -> Option<crate::protocol::AbortReason> {
        self.observer.loop_end()
    }

    fn reads(&self) -> usize {
        self.log.iter().filter(|r| r.slot == Slot::Compute).count()
    }
}

/// What Alice concluded from one probe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub loop_index: usize,
    pub tau: u64,
    /// Her guess for f(τ), assuming f(1⃗) = 1 as for every itemset predicate.
    pub learned: bool,
}

/// Alice sends (|0…0⟩|τ⟩ + |0…1⟩|1⃗⟩)/√2 with every control bit set in place
/// of computational copy `copy` in each listed loop, then reads the relative
/// phase Bob's U_f left on the two branches.
#[derive(Clone, Debug)]
pub struct ProbeAlice {
    pub tau: u64,
    pub loops: Vec<usize>,
    pub copy: u8,
    pub results: Vec<ProbeResult>,
}

impl ProbeAlice {
    pub fn new(tau: u64, loops: Vec<usize>) -> Self {
        Self { tau, loops, copy: 1, results: Vec::new() }
    }
}

/// The probe register on its own.
pub fn probe_state(tau: u64, n: u32, k: u32) -> Result<StateVector> {
    if tau >> k != 0 {
        return Err(Error::InvalidParams(format!("τ = {tau} does not fit in {k} bits")));
    }
    let mut amps = vec![crate::qsim::C64::new(0.0, 0.0); 1 << (n + k)];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    amps[tau as usize] = crate::qsim::C64::new(h, 0.0);
    amps[(1usize << k) | ((1usize << k) - 1)] = crate::qsim::C64::new(h, 0.0);
    StateVector::from_amplitudes(amps)
}

/// Undoes the probe preparation and measures the last address qubit in the
/// X basis: outcome 0 iff the two branches kept the same sign.
pub fn read_probe_register(tau: u64, reg: &mut Register, rng: &mut Rng) -> Result<bool> {
    let a = reg.segment(Role::Address)?;
    let d = reg.segment(Role::Data)?;
    let lsb = Segment::new(a.offset + a.width - 1, 1);
    let ones = (1u64 << d.width) - 1;
    reg.state.apply_xor_map(lsb, d, &[tau, ones], 0)?;
    reg.state.apply_gate(Gate::H, &[lsb.offset], &[])?;
    Ok(reg.state.measure(&[lsb.offset], rng)?.bits.value() == 0)
}

impl AliceBehavior for ProbeAlice {
    fn substitutes(&mut self, loop_index: usize, copy: u8) -> bool {
        copy == self.copy && self.loops.contains(&loop_index)
    }

    fn probe_register(&mut self, _loop_index: usize, n: u32, k: u32, t: u32) -> Result<Register> {
        Register::test(t, n, k, (1u64 << t) - 1, probe_state(self.tau, n, k)?)
    }

    fn read_probe(&mut self, loop_index: usize, mut reg: Register, rng: &mut Rng) -> Result<()> {
        let learned = read_probe_register(self.tau, &mut reg, rng)?;
        self.results.push(ProbeResult { loop_index, tau: self.tau, learned });
        Ok(())
    }
}

/// Alice tests in every loop with ν = 1⃗ and μ fixed per control qubit, and
/// takes a majority vote of the f_i(μ) each honest test reveals.
#[derive(Clone, Debug)]
pub struct FloodAlice {
    pub mus: Vec<u64>,
    pub votes: Vec<Vec<bool>>,
    current: Option<usize>,
}

impl FloodAlice {
    /// `mus[j]` is the point probed through control qubit j's block.
    pub fn new(mus: Vec<u64>, k: u32) -> Result<Self> {
        if mus.iter().any(|&m| m >= (1u64 << k) - 1) {
            return Err(Error::InvalidParams("μ must differ from 1⃗ and fit in k bits".into()));
        }
        let votes = vec![Vec::new(); mus.len()];
        Ok(Self { mus, votes, current: None })
    }

    /// Majority vote for control qubit j; `None` on a tie or no votes.
    pub fn recovered(&self, j: usize) -> Option<bool> {
        let ones = self.votes.get(j)?.iter().filter(|v| **v).count();
        let zeros = self.votes[j].len() - ones;
        match ones.cmp(&zeros) {
            std::cmp::Ordering::Greater => Some(true),
            std::cmp::Ordering::Less => Some(false),
            std::cmp::Ordering::Equal => None,
        }
    }
}

impl AliceBehavior for FloodAlice {
    fn plan(&mut self, loop_index: Option<usize>, _p: f64, rng: &mut Rng) -> LoopPlan {
        let r: f64 = rng.gen();
        LoopPlan { r, timing: if loop_index.is_some() { TestTiming::Before } else { TestTiming::None } }
    }

    fn draw_test(&mut self, loop_index: Option<usize>, n: u32, k: u32, t: u32, rng: &mut Rng) -> (TestParams, u64) {
        self.current = loop_index.and_then(|i| control_schedule(i, t).ok().flatten());
        let base = TestParams::random(n, k, rng);
        let mu = self.mus.get(self.current.unwrap_or(0)).copied().unwrap_or(0);
        let tp = TestParams { mu, nu: (1u64 << k) - 1, ..base };
        (tp, (1u64 << t) - 1)
    }

    fn on_test_result(&mut self, loop_index: Option<usize>, res: &TestResult) {
        if let (Some(_), Some(j)) = (loop_index, self.current) {
            if let (Some(v), Some(slot)) = (res.outcomes.first(), self.votes.get_mut(j)) {
                // honest outcome bit 0 is f_i(μ) ⊕ f_i(1⃗)
                slot.push(!v.bit(0));
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestProcedure {
    Test1,
    Test2,
}

/// One test round outside any run.
#[derive(Clone, Debug)]
pub struct RoundSetup<'a> {
    pub n: u32,
    pub k: u32,
    pub t: u32,
    pub f: &'a Predicate,
    pub procedure: TestProcedure,
    pub mode: TestMode,
}

#[derive(Clone, Debug)]
pub struct IsolatedRound {
    pub params: TestParams,
    pub c: u64,
    pub loop_index: Option<usize>,
    pub result: TestResult,
}

/// Draws a test (and, for TestBob1, an activated loop) from `(seed, trial)`
/// and runs it against honest Bob or the given attack.
pub fn isolated_round(setup: &RoundSetup, attack: Option<&BobAttack>, seed: u64, trial: u64) -> Result<IsolatedRound> {
    let (n, k, t) = (setup.n, setup.k, setup.t);
    if t == 0 {
        return Err(Error::InvalidParams("t must be positive".into()));
    }
    let mut a = stream(seed, &[TAG_TRIAL, trial, TAG_ALICE]);
    let mut am = stream(seed, &[TAG_TRIAL, trial, TAG_ALICE, 1]);
    let mut b = stream(seed, &[TAG_TRIAL, trial, TAG_BOB]);
    let (loop_index, control) = match setup.procedure {
        TestProcedure::Test1 => {
            let i = a.gen_range(1..1usize << t);
            (Some(i), control_schedule(i, t)?)
        }
        TestProcedure::Test2 => (None, None),
    };
    let tp = TestParams::random(n, k, &mut a);
    let c = a.gen_range(0..1u64 << t);
    let mut bob: Box<dyn BobBehavior> = match attack {
        None => Box::new(HonestBob::new()),
        Some(at) => Box::new(AttackBob::new(at.resolve(&tp, k)?)),
    };
    let slot = match setup.procedure {
        TestProcedure::Test1 => Slot::Test,
        TestProcedure::Test2 => Slot::FinalTest,
    };
    let ctx = BobCtx { loop_index, control, func: setup.f, n, k, t, slot, copy: 1 };
    let result = match setup.procedure {
        TestProcedure::Test1 => test_bob1(bob.as_mut(), &ctx, &tp, c, setup.mode, &mut am, &mut b)?,
        TestProcedure::Test2 => test_bob2(bob.as_mut(), &ctx, &tp, c, &mut am, &mut b)?,
    };
    Ok(IsolatedRound { params: tp, c, loop_index, result })
}

/// |⟨ψ|U_g ψ⟩|² for ψ = |+⟩^n|0⟩ and g = δ(j, address): one query of the
/// addressed attack against the identity query.
pub fn addressed_round_fidelity(n: u32, address: u64) -> Result<f64> {
    let layout = crate::qsim::RegisterLayout::from_widths(&[(Role::Address, n as usize), (Role::Data, 1)]);
    let mut psi = StateVector::zero(n as usize + 1);
    for q in 0..n as usize {
        psi.apply_gate(Gate::H, &[q], &[])?;
    }
    let g = Predicate::AddressDelta { address, inner: Box::new(Predicate::AllOne) };
    let mut attacked = psi.clone();
    u_f_phase(&g, n, 1).apply(&mut attacked, &layout, 0)?;
    fidelity(&psi, &attacked)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressedRun {
    pub tests: usize,
    pub passed: bool,
}

/// A full run's worth of TestBob1 rounds against a multi-round attack, judged
/// by state comparison. Alice's draws follow the same stream as `run_main`;
/// the computational copies are not evolved since comparison tests do not
/// depend on them.
pub fn addressed_full_run(params: &ProtocolParams, f: &Predicate, attack: &BobAttack) -> Result<AddressedRun> {
    params.validate()?;
    let (n, k, t) = (params.n, params.k, params.t);
    let mut rngs = PartyRngs::from_seed(params.seed);
    let _y = rngs.alice.gen_range(0..1u64 << n);
    let mut bob = AttackBob::new(attack.clone());
    let mut tests = 0;
    for i in 0..params.total_loops() {
        let plan = honest_plan(params.p, &mut rngs.alice);
        if plan.timing == TestTiming::None {
            continue;
        }
        tests += 1;
        let tp = TestParams::random(n, k, &mut rngs.alice);
        let c = rngs.alice.gen_range(0..1u64 << t);
        let ctx = BobCtx { loop_index: Some(i), control: control_schedule(i, t)?, func: f, n, k, t, slot: Slot::Test, copy: 1 };
        let res = test_bob1(&mut bob, &ctx, &tp, c, TestMode::Fidelity, &mut rngs.alice_meas, &mut rngs.bob)?;
        if !res.passed() {
            return Ok(AddressedRun { tests, passed: false });
        }
    }
    Ok(AddressedRun { tests, passed: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::Database;
    use crate::protocol::{run_main, DetectionReason, HonestAlice, Strategy};

    fn setup(f: &Predicate, n: u32, k: u32) -> RoundSetup<'_> {
        RoundSetup { n, k, t: 3, f, procedure: TestProcedure::Test1, mode: TestMode::Measure }
    }

    fn rate(s: &RoundSetup, a: &BobAttack, trials: u64) -> f64 {
        let det = (0..trials).filter(|&i| !isolated_round(s, Some(a), 5, i).unwrap().result.passed()).count();
        det as f64 / trials as f64
    }

    #[test]
    fn attack_specs_round_trip_json() {
        let specs = [
            BobAttack::new(BobAttackKind::Attack1Send { address: 1, data: SendData::Mu }),
            BobAttack::new(BobAttackKind::Attack2Measure { scope: Scope::Data }).with_trigger(Trigger::Loops(vec![2, 3])),
            BobAttack::new(BobAttackKind::Recovery { policy: RecoveryPolicy::Computational }),
            BobAttack::new(BobAttackKind::MultiroundAddressed { address: 3, inner: Predicate::AllOne }),
        ];
        for s in specs {
            let j = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<BobAttack>(&j).unwrap(), s);
        }
        let j = r#"{"kind":"attack2_measure","scope":"address_data"}"#;
        assert_eq!(serde_json::from_str::<BobAttack>(j).unwrap().trigger, Trigger::Always);
    }

    #[test]
    fn outside_word_avoids_the_pair() {
        let a = BobAttack::new(BobAttackKind::Attack1Send { address: 0, data: SendData::Outside });
        let r = a.resolve(&TestParams::new(0, 0, false, 0, 1), 2).unwrap();
        assert_eq!(r.kind, BobAttackKind::Attack1Send { address: 0, data: SendData::Value(2) });
        assert!(a.resolve(&TestParams::new(0, 0, false, 0, 1), 1).is_err());
    }

    #[test]
    fn attack1_outside_pair_always_detected() {
        let f = Predicate::contains("01".parse().unwrap());
        let a = BobAttack::new(BobAttackKind::Attack1Send { address: 2, data: SendData::Outside });
        assert_eq!(rate(&setup(&f, 2, 2), &a, 300), 1.0);
    }

    #[test]
    fn attack2_data_is_caught_about_half_the_time() {
        let f = Predicate::contains("01".parse().unwrap());
        let a = BobAttack::new(BobAttackKind::Attack2Measure { scope: Scope::Data });
        let r = rate(&setup(&f, 2, 2), &a, 2000);
        assert!((r - 0.5).abs() < 0.05, "{r}");
    }

    #[test]
    fn honest_isolated_rounds_pass() {
        let f = Predicate::contains("10".parse().unwrap());
        for proc in [TestProcedure::Test1, TestProcedure::Test2] {
            let s = RoundSetup { procedure: proc, ..setup(&f, 2, 2) };
            for i in 0..100 {
                assert!(isolated_round(&s, None, 3, i).unwrap().result.passed());
            }
        }
    }

    #[test]
    fn recovery_rejects_computational_registers() {
        let f = Predicate::AllZero;
        let mut bob = AttackBob::new(BobAttack::new(BobAttackKind::Recovery { policy: RecoveryPolicy::TestBasis }));
        let mut reg = Register::computational(2, 2, 2);
        let ctx = BobCtx { loop_index: Some(1), control: Some(1), func: &f, n: 2, k: 2, t: 2, slot: Slot::Compute, copy: 1 };
        assert!(bob.query(&ctx, &mut reg, &mut stream(0, &[])).is_err());
    }

    #[test]
    fn ml_guess_has_support_on_the_outcome() {
        let t = RecoveryTables::build(2, 2).unwrap();
        for (z, &g) in t.ml.iter().enumerate() {
            assert!(t.states[g].amps()[z].norm_sqr() > 0.1);
            let first = t.states.iter().position(|s| s.amps()[z].norm_sqr() > 1e-9).unwrap();
            assert_eq!(first, g);
        }
    }

    #[test]
    fn probe_reads_f_of_tau_from_honest_bob() {
        let db = Database::from_strs(&["11", "01", "10", "00"]).unwrap();
        for (tau, want) in [(0b01u64, true), (0b11, true), (0b10, false), (0b00, false)] {
            let f = Predicate::contains("01".parse().unwrap());
            let s = Strategy::trivial(f, 3);
            let mut alice = ProbeAlice::new(tau, vec![1, 2, 5]);
            let params = ProtocolParams::new(2, 2, 3, 4);
            run_main(&db, &s, &mut alice, &mut HonestBob::new(), &params).unwrap();
            assert_eq!(alice.results.len(), 3);
            assert!(alice.results.iter().all(|r| r.learned == want), "τ={tau:02b}");
        }
    }

    #[test]
    fn attack2_on_compute_round_reads_a_transaction_undetected() {
        let db = Database::from_strs(&["11", "01", "10", "01"]).unwrap();
        let f = Predicate::contains("01".parse().unwrap());
        let s = Strategy::trivial(f, 2);
        let attack = BobAttack::new(BobAttackKind::Attack2Measure { scope: Scope::AddressData });
        let (out, bob) = (0..50)
            .map(|seed| {
                let mut bob = AttackBob::new(attack.clone());
                let params = ProtocolParams::new(2, 2, 2, seed).with_p(0.01);
                (run_main(&db, &s, &mut HonestAlice::new(), &mut bob, &params).unwrap(), bob)
            })
            .find(|(o, _)| o.tests == 0)
            .unwrap();
        assert!(out.terminated.is_none());
        assert_eq!(out.bob_reads, 8);
        for r in &bob.log {
            let j = r.address.unwrap();
            assert_eq!(r.data, db.transactions()[(j ^ out.y) as usize]);
        }
    }

    #[test]
    fn attack1_reads_the_addressed_transaction() {
        let db = Database::from_strs(&["11", "01", "10", "00"]).unwrap();
        let f = Predicate::contains("01".parse().unwrap());
        let s = Strategy::trivial(f, 2);
        let a = BobAttack::new(BobAttackKind::Attack1Send { address: 2, data: SendData::Value(0b01) })
            .with_trigger(Trigger::Loops(vec![1]));
        let mut bob = AttackBob::new(a);
        let params = ProtocolParams::new(2, 2, 2, 8).with_p(0.01);
        let out = run_main(&db, &s, &mut HonestAlice::new(), &mut bob, &params).unwrap();
        assert_eq!(bob.log.len(), 2);
        for r in &bob.log {
            assert_eq!(r.data, db.transactions()[(2 ^ out.y) as usize]);
        }
    }

    #[test]
    fn attack3_data_copy_stays_product_on_constant_data() {
        let db = Database::from_strs(&["10", "10", "10", "10"]).unwrap();
        let f = Predicate::contains("10".parse().unwrap());
        let s = Strategy::trivial(f, 2);
        let a = BobAttack::new(BobAttackKind::Attack3Entangle { variant: CopyVariant::DataCopy })
            .with_trigger(Trigger::Loops(vec![2]));
        let mut bob = AttackBob::new(a);
        let params = ProtocolParams::new(2, 2, 2, 8).with_p(0.01);
        let mut copies = crate::protocol::Copies::new(2, 2, 2);
        let mut tr = crate::protocol::Transcript::default();
        let mut rngs = PartyRngs::from_seed(8);
        for i in 0..4 {
            crate::protocol::grover_iteration(i, &mut copies, &db, 1, &s, &mut HonestAlice::new(), &mut bob, &params, &mut tr, &mut rngs)
                .unwrap();
        }
        for reg in &copies.regs {
            let p = reg.segment(Role::Private).unwrap();
            let probs = reg.state.probabilities(&p.qubits()).unwrap();
            assert!((probs[0b10] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flood_vote_recovers_trivial_f() {
        let db = Database::from_strs(&["11", "01", "10", "00"]).unwrap();
        let f = Predicate::contains("01".parse().unwrap());
        let s = Strategy::trivial(f.clone(), 3);
        let mus = vec![0b01, 0b10, 0b00];
        let mut alice = FloodAlice::new(mus.clone(), 2).unwrap();
        run_main(&db, &s, &mut alice, &mut HonestBob::new(), &ProtocolParams::new(2, 2, 3, 2)).unwrap();
        for (j, mu) in mus.iter().enumerate() {
            assert_eq!(alice.recovered(j), Some(f.on(*mu)), "qubit {j}");
        }
        assert!(FloodAlice::new(vec![3], 2).is_err());
    }

    #[test]
    fn addressed_fidelity_closed_form() {
        for n in [3u32, 5] {
            let nn = (1u64 << n) as f64;
            let want = (1.0 - 2.0 / nn).powi(2);
            assert!((addressed_round_fidelity(n, 1).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn addressed_run_passes_honest_and_mostly_attacked() {
        let f = Predicate::AllZero;
        let params = ProtocolParams::new(6, 1, 4, 0).with_p(0.1);
        let a = BobAttack::new(BobAttackKind::MultiroundAddressed { address: 5, inner: Predicate::AllOne });
        let passes = (0..200)
            .filter(|&s| addressed_full_run(&ProtocolParams { seed: s, ..params.clone() }, &f, &a).unwrap().passed)
            .count();
        assert!(passes > 150, "{passes}");
        let r = isolated_round(
            &RoundSetup { mode: TestMode::Fidelity, ..setup(&f, 2, 1) },
            Some(&BobAttack::new(BobAttackKind::Attack2Measure { scope: Scope::AddressData })),
            0,
            0,
        )
        .unwrap();
        assert!(r.result.detection.is_none() || r.result.detection == Some(DetectionReason::Fidelity));
    }
}

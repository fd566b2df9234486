//! Database oracles, query oracles, diffusion, the test-state unitary and the
//! control-qubit schedule.
//!
//! Every unitary here is an immutable description applied to a `StateVector`
//! through a `RegisterLayout`; the address segment must be immediately
//! followed by the data segment, which is how every register in this crate is
//! laid out.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::qsim::{Gate, RegisterLayout, Role, Segment, StateVector};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database {
    n: u32,
    k: u32,
    transactions: Vec<BitString>,
    labels: Option<Vec<bool>>,
}

impl Database {
    pub fn new(k: u32, transactions: Vec<BitString>, labels: Option<Vec<bool>>) -> Result<Self> {
        let len = transactions.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "database has {len} transactions; need a power of two >= 2"
            )));
        }
        if k == 0 || transactions.iter().any(|t| t.width() != k) {
            return Err(Error::InvalidParams(format!("every transaction must have width {k}")));
        }
        if let Some(l) = &labels {
            if l.len() != len {
                return Err(Error::InvalidParams("label count differs from transaction count".into()));
            }
        }
        Ok(Self { n: len.trailing_zeros(), k, transactions, labels })
    }

    /// Builds a database from 0/1 strings.
    pub fn from_strs(rows: &[&str]) -> Result<Self> {
        let tx: Vec<BitString> = rows.iter().map(|r| r.parse()).collect::<Result<_>>()?;
        let k = tx.first().map(|t| t.width()).unwrap_or(0);
        Self::new(k, tx, None)
    }

    /// Parses the text format: one k-character 0/1 string per line, with an
    /// optional trailing label bit separated by whitespace. Blank lines and
    /// lines starting with `#` are ignored. Either every row has a label or
    /// none does.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tx = Vec::new();
        let mut labels = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let row: BitString = parts
                .next()
                .unwrap_or_default()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let label = match parts.next() {
                None => None,
                Some("0") => Some(false),
                Some("1") => Some(true),
                Some(other) => {
                    return Err(Error::Parse(format!("line {}: bad label {other:?}", lineno + 1)))
                }
            };
            if parts.next().is_some() {
                return Err(Error::Parse(format!("line {}: too many columns", lineno + 1)));
            }
            tx.push(row);
            labels.push(label);
        }
        let k = tx.first().map(|t| t.width()).ok_or_else(|| Error::Parse("empty database".into()))?;
        if tx.iter().any(|t| t.width() != k) {
            return Err(Error::Parse("rows have different widths".into()));
        }
        let labels = if labels.iter().all(Option::is_some) {
            Some(labels.into_iter().map(Option::unwrap).collect())
        } else if labels.iter().all(Option::is_none) {
            None
        } else {
            return Err(Error::Parse("label column present on some rows only".into()));
        };
        if !tx.len().is_power_of_two() || tx.len() < 2 {
            return Err(Error::Parse(format!(
                "{} transactions; the line count must be a power of two (pad explicitly)",
                tx.len()
            )));
        }
        Self::new(k, tx, labels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.transactions.iter().enumerate() {
            out.push_str(&t.to_string());
            if let Some(l) = &self.labels {
                out.push_str(if l[i] { " 1" } else { " 0" });
            }
            out.push('\n');
        }
        out
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn transactions(&self) -> &[BitString] {
        &self.transactions
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    /// Records of width k+1 (transaction followed by its label bit), used for
    /// labeled-itemset queries.
    pub fn labeled_records(&self) -> Result<Database> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("database has no label column".into()))?;
        let tx = self.transactions.iter().zip(labels).map(|(t, &l)| t.push(l)).collect();
        Database::new(self.k + 1, tx, None)
    }

    /// Fraction of transactions satisfying `f`.
    pub fn mean_of(&self, f: &Predicate) -> f64 {
        let hits = self
            .transactions
            .iter()
            .enumerate()
            .filter(|(j, d)| f.eval(*j as u64, d.value()))
            .count();
        hits as f64 / self.len() as f64
    }
}

/// Boolean functions on data values (and, for the addressed attack, on the
/// address too).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predicate {
    /// f(τ) = 1 iff itemset ⊆ τ.
    Contains { itemset: BitString },
    /// h: constantly 0.
    AllZero,
    /// h̄: constantly 1.
    AllOne,
    /// δ(τ, d).
    Delta { d: BitString },
    /// δ(j, address)·inner(τ).
    AddressDelta { address: u64, inner: Box<Predicate> },
    /// Labeled records τ·g: 1 iff items ⊆ τ and g = label.
    LabeledItemset { items: BitString, label: bool },
    /// 1 iff τ agrees with `value` on every bit set in `mask`.
    Pattern { mask: BitString, value: BitString },
    /// 1 − inner.
    Not { inner: Box<Predicate> },
    /// Explicit truth table indexed by τ.
    Table { values: Vec<bool> },
}

impl Predicate {
    pub fn contains(itemset: BitString) -> Self {
        Predicate::Contains { itemset }
    }

    pub fn negate(self) -> Self {
        Predicate::Not { inner: Box::new(self) }
    }

    pub fn eval(&self, address: u64, data: u64) -> bool {
        match self {
            Predicate::Contains { itemset } => itemset.value() & !data == 0,
            Predicate::AllZero => false,
            Predicate::AllOne => true,
            Predicate::Delta { d } => d.value() == data,
            Predicate::AddressDelta { address: a, inner } => *a == address && inner.eval(address, data),
            Predicate::LabeledItemset { items, label } => {
                (data & 1 == 1) == *label && items.value() & !(data >> 1) == 0
            }
            Predicate::Pattern { mask, value } => data & mask.value() == value.value(),
            Predicate::Not { inner } => !inner.eval(address, data),
            Predicate::Table { values } => values[data as usize],
        }
    }

    /// Value on a data word, for predicates that ignore the address.
    pub fn on(&self, data: u64) -> bool {
        self.eval(0, data)
    }

    pub fn depends_on_address(&self) -> bool {
        match self {
            Predicate::AddressDelta { .. } => true,
            Predicate::Not { inner } => inner.depends_on_address(),
            _ => false,
        }
    }

    /// Truth table over (address, data) with the address in the high bits.
    pub fn table(&self, n: u32, k: u32) -> Vec<bool> {
        let mut t = Vec::with_capacity(1 << (n + k));
        for a in 0..1u64 << n {
            for d in 0..1u64 << k {
                t.push(self.eval(a, d));
            }
        }
        t
    }
}

/// The address segment followed by the data segment, as one segment.
pub fn address_data(layout: &RegisterLayout) -> Result<Segment> {
    let a = layout.require(Role::Address)?;
    let d = layout.require(Role::Data)?;
    if d.offset != a.end() {
        return Err(Error::InvalidParams("data segment must follow the address segment".into()));
    }
    Ok(Segment::new(a.offset, a.width + d.width))
}

fn check_widths(layout: &RegisterLayout, n: u32, k: u32) -> Result<(Segment, Segment)> {
    let a = layout.require(Role::Address)?;
    let d = layout.require(Role::Data)?;
    if a.width != n as usize || d.width != k as usize {
        return Err(Error::InvalidParams(format!(
            "layout widths (n={}, k={}) do not match (n={n}, k={k})",
            a.width, d.width
        )));
    }
    Ok((a, d))
}

/// |x⟩|τ⟩ → |x⟩|τ ⊕ table[x]⟩: O_D when table[x] = d_x, U_D(y) when
/// table[x] = d_{x⊕y}.
#[derive(Clone, Debug)]
pub struct DbOracle {
    n: u32,
    k: u32,
    table: Vec<u64>,
}

impl DbOracle {
    pub fn apply(&self, state: &mut StateVector, layout: &RegisterLayout) -> Result<()> {
        let (a, d) = check_widths(layout, self.n, self.k)?;
        state.apply_xor_map(a, d, &self.table, 0)
    }

    pub fn table(&self) -> &[u64] {
        &self.table
    }
}

pub fn o_d(db: &Database) -> DbOracle {
    u_d(db, 0)
}

pub fn u_d(db: &Database, y: u64) -> DbOracle {
    let table = (0..db.len() as u64).map(|x| db.transactions[(x ^ y) as usize].value()).collect();
    DbOracle { n: db.n, k: db.k, table }
}

/// U_f: |j⟩|τ⟩ → (−1)^{f(j,τ)} |j⟩|τ⟩.
#[derive(Clone, Debug)]
pub struct PhaseOracle {
    n: u32,
    k: u32,
    table: Vec<bool>,
}

impl PhaseOracle {
    /// Applies the oracle on amplitudes whose index has every bit of `ctrl` set.
    pub fn apply(&self, state: &mut StateVector, layout: &RegisterLayout, ctrl: usize) -> Result<()> {
        check_widths(layout, self.n, self.k)?;
        if self.table.iter().all(|&b| !b) {
            return Ok(());
        }
        state.apply_phase_table(address_data(layout)?, &self.table, ctrl)
    }

    pub fn is_identity(&self) -> bool {
        self.table.iter().all(|&b| !b)
    }
}

pub fn u_f_phase(f: &Predicate, n: u32, k: u32) -> PhaseOracle {
    PhaseOracle { n, k, table: f.table(n, k) }
}

/// U'_f: |j⟩|τ⟩|g⟩ → |j⟩|τ⟩|g ⊕ f(j,τ)⟩ with g the ancilla segment.
#[derive(Clone, Debug)]
pub struct BitOracle {
    n: u32,
    k: u32,
    table: Vec<u64>,
}

impl BitOracle {
    pub fn apply(&self, state: &mut StateVector, layout: &RegisterLayout) -> Result<()> {
        check_widths(layout, self.n, self.k)?;
        let g = layout
            .get(Role::Ancilla)
            .ok_or_else(|| Error::InvalidParams("U'_f needs an ancilla segment".into()))?;
        if g.width != 1 {
            return Err(Error::InvalidParams("ancilla segment must be one qubit".into()));
        }
        state.apply_xor_map(address_data(layout)?, g, &self.table, 0)
    }
}

pub fn u_f_bit(f: &Predicate, n: u32, k: u32) -> BitOracle {
    BitOracle { n, k, table: f.table(n, k).into_iter().map(u64::from).collect() }
}

/// G = I − 2|+⟩⟨+| on the address segment.
#[derive(Clone, Copy, Debug)]
pub struct Diffusion {
    n: u32,
}

impl Diffusion {
    pub fn apply(&self, state: &mut StateVector, layout: &RegisterLayout, ctrl: usize) -> Result<()> {
        let a = layout.require(Role::Address)?;
        if a.width != self.n as usize {
            return Err(Error::InvalidParams("diffusion width differs from address segment".into()));
        }
        state.apply_uniform_reflection(a, ctrl)
    }
}

pub fn diffusion_g(n: u32) -> Diffusion {
    assert!(n >= 1);
    Diffusion { n }
}

/// U_t(m,x,b) = SWAP(0,m) · Z(x) · X_0^b · V(μ,ν) · (W ⊗ I), rightmost first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TestUnitary {
    pub n: u32,
    pub k: u32,
    pub m: u32,
    pub x: u64,
    pub b: bool,
    pub mu: u64,
    pub nu: u64,
}

impl TestUnitary {
    pub fn new(n: u32, k: u32, m: u32, x: u64, b: bool, mu: u64, nu: u64) -> Result<Self> {
        if mu >= nu {
            return Err(Error::InvalidParams(format!("need μ < ν, got {mu} >= {nu}")));
        }
        if m >= n || x >> n != 0 || nu >> k != 0 {
            return Err(Error::InvalidParams("test parameters out of range".into()));
        }
        Ok(Self { n, k, m, x, b, mu, nu })
    }

    pub fn apply_w(&self, s: &mut StateVector, l: &RegisterLayout) -> Result<()> {
        let (a, _) = check_widths(l, self.n, self.k)?;
        for q in a.qubits() {
            s.apply_gate(Gate::H, &[q], &[])?;
        }
        Ok(())
    }

    pub fn apply_v(&self, s: &mut StateVector, l: &RegisterLayout) -> Result<()> {
        let (a, d) = check_widths(l, self.n, self.k)?;
        s.apply_xor_map(Segment::new(a.offset, 1), d, &[self.mu, self.nu], 0)
    }

    pub fn apply_x0(&self, s: &mut StateVector, l: &RegisterLayout) -> Result<()> {
        let (a, _) = check_widths(l, self.n, self.k)?;
        if self.b {
            s.apply_gate(Gate::X, &[a.offset], &[])?;
        }
        Ok(())
    }

    pub fn apply_z(&self, s: &mut StateVector, l: &RegisterLayout) -> Result<()> {
        let (a, _) = check_widths(l, self.n, self.k)?;
        for j in 0..self.n {
            if (self.x >> (self.n - 1 - j)) & 1 == 1 {
                s.apply_gate(Gate::Z, &[a.qubit(j as usize)], &[])?;
            }
        }
        Ok(())
    }

    pub fn apply_swap(&self, s: &mut StateVector, l: &RegisterLayout) -> Result<()> {
        let (a, _) = check_widths(l, self.n, self.k)?;
        if self.m != 0 {
            s.apply_gate(Gate::Swap, &[a.offset, a.qubit(self.m as usize)], &[])?;
        }
        Ok(())
    }

    pub fn apply(&self, s: &mut StateVector, l: &RegisterLayout) -> Result<()> {
        self.apply_w(s, l)?;
        self.apply_v(s, l)?;
        self.apply_x0(s, l)?;
        self.apply_z(s, l)?;
        self.apply_swap(s, l)
    }

    /// U_t† = W · V · X_0^b · Z(x) · SWAP(0,m), rightmost first. Each factor
    /// is an involution but they do not commute, so U_t itself is not.
    pub fn apply_adjoint(&self, s: &mut StateVector, l: &RegisterLayout) -> Result<()> {
        self.apply_swap(s, l)?;
        self.apply_z(s, l)?;
        self.apply_x0(s, l)?;
        self.apply_v(s, l)?;
        self.apply_w(s, l)
    }
}

/// Control qubit for loop `i` of a `t`-qubit schedule: none for loop 0, then
/// qubit j for the 2^{t−1−j} consecutive loops after qubit j−1's.
pub fn control_schedule(i: usize, t: u32) -> Result<Option<usize>> {
    let total = 1usize << t;
    if i >= total {
        return Err(Error::InvalidParams(format!("loop {i} out of range for T={total}")));
    }
    if i == 0 {
        return Ok(None);
    }
    let mut start = 1;
    for j in 0..t as usize {
        let len = 1usize << (t as usize - 1 - j);
        if i < start + len {
            return Ok(Some(j));
        }
        start += len;
    }
    unreachable!("schedule covers 1..T")
}

/// First loop and loop count controlled by qubit `j`.
pub fn control_block(j: usize, t: u32) -> (usize, usize) {
    let start = 1 + (0..j).map(|q| 1usize << (t as usize - 1 - q)).sum::<usize>();
    (start, 1usize << (t as usize - 1 - j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{distance, STATE_TOL};
    use crate::rng::stream;

    fn ad_layout(n: usize, k: usize) -> RegisterLayout {
        RegisterLayout::from_widths(&[(Role::Address, n), (Role::Data, k)])
    }

    #[test]
    fn o_d_writes_transaction() {
        let db = Database::from_strs(&["11", "01"]).unwrap();
        let l = ad_layout(1, 2);
        let mut s = StateVector::zero(3);
        o_d(&db).apply(&mut s, &l).unwrap();
        assert_eq!(s, StateVector::basis(3, 0b011));
    }

    #[test]
    fn u_d_permutes_transactions() {
        let db = Database::from_strs(&["11", "01"]).unwrap();
        let l = ad_layout(1, 2);
        let mut s = StateVector::zero(3);
        u_d(&db, 1).apply(&mut s, &l).unwrap();
        assert_eq!(s, StateVector::basis(3, 0b001));
    }

    #[test]
    fn u_d_is_conjugated_o_d() {
        let db = Database::from_strs(&["0110", "1111", "0001", "1000"]).unwrap();
        let l = ad_layout(2, 4);
        let mut rng = stream(9, &[]);
        let s0 = StateVector::random(6, &mut rng);
        let y = 0b10;
        let mut a = s0.clone();
        u_d(&db, y).apply(&mut a, &l).unwrap();
        let mut b = s0.clone();
        b.apply_gate(Gate::X, &[0], &[]).unwrap();
        o_d(&db).apply(&mut b, &l).unwrap();
        b.apply_gate(Gate::X, &[0], &[]).unwrap();
        assert!(distance(&a, &b) < STATE_TOL);
    }

    #[test]
    fn uniform_query_loads_all_transactions() {
        let db = Database::from_strs(&["10", "01", "11", "00"]).unwrap();
        let l = ad_layout(2, 2);
        let mut s = StateVector::zero(4);
        s.apply_gate(Gate::H, &[0], &[]).unwrap();
        s.apply_gate(Gate::H, &[1], &[]).unwrap();
        o_d(&db).apply(&mut s, &l).unwrap();
        for (x, d) in db.transactions().iter().enumerate() {
            let idx = (x << 2) | d.value() as usize;
            assert!((s.amps()[idx].re - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn phase_oracle_examples() {
        let f = Predicate::contains("01".parse().unwrap());
        assert!(f.on(0b11));
        let g = Predicate::contains("10".parse().unwrap());
        assert!(!g.on(0b01));
        assert!(u_f_phase(&Predicate::AllZero, 2, 2).is_identity());
    }

    #[test]
    fn bit_oracle_writes_f_of_data() {
        let f = Predicate::contains("1".parse().unwrap());
        let l = RegisterLayout::from_widths(&[(Role::Address, 1), (Role::Data, 1), (Role::Ancilla, 1)]);
        let mut s = StateVector::basis(3, 0b010);
        u_f_bit(&f, 1, 1).apply(&mut s, &l).unwrap();
        assert_eq!(s, StateVector::basis(3, 0b011));
        let mut t = StateVector::basis(3, 0b010);
        u_f_bit(&Predicate::AllZero, 1, 1).apply(&mut t, &l).unwrap();
        assert_eq!(t, StateVector::basis(3, 0b010));
    }

    #[test]
    fn bit_oracle_needs_ancilla() {
        let l = ad_layout(1, 1);
        let mut s = StateVector::zero(2);
        assert!(u_f_bit(&Predicate::AllOne, 1, 1).apply(&mut s, &l).is_err());
    }

    #[test]
    fn diffusion_sign() {
        let l = ad_layout(2, 1);
        let mut s = StateVector::zero(3);
        s.apply_gate(Gate::H, &[0], &[]).unwrap();
        s.apply_gate(Gate::H, &[1], &[]).unwrap();
        let plus = s.clone();
        diffusion_g(2).apply(&mut s, &l, 0).unwrap();
        for (a, b) in s.amps().iter().zip(plus.amps()) {
            assert!((a + b).norm() < 1e-12);
        }
        // orthogonal to |+>: |0> - |1> on address qubit 1
        let mut o = StateVector::zero(3);
        o.apply_gate(Gate::X, &[1], &[]).unwrap();
        o.apply_gate(Gate::H, &[1], &[]).unwrap();
        let o0 = o.clone();
        diffusion_g(2).apply(&mut o, &l, 0).unwrap();
        assert!(distance(&o, &o0) < 1e-12);
    }

    #[test]
    fn v_writes_mu_or_nu() {
        let u = TestUnitary::new(2, 2, 0, 0, false, 0b01, 0b10).unwrap();
        let l = ad_layout(2, 2);
        let mut s = StateVector::basis(4, 0b0100); // |0>|1>|00>
        u.apply_v(&mut s, &l).unwrap();
        assert_eq!(s, StateVector::basis(4, 0b0101));
        let mut s = StateVector::basis(4, 0b1000);
        u.apply_v(&mut s, &l).unwrap();
        assert_eq!(s, StateVector::basis(4, 0b1010));
        assert!(TestUnitary::new(2, 2, 0, 0, false, 2, 1).is_err());
    }

    #[test]
    fn test_unitary_is_not_an_involution() {
        let u = TestUnitary::new(1, 1, 0, 0, false, 0, 1).unwrap();
        let l = ad_layout(1, 1);
        let mut s = StateVector::zero(2);
        u.apply(&mut s, &l).unwrap();
        u.apply(&mut s, &l).unwrap();
        assert!(distance(&s, &StateVector::zero(2)) > 0.1);
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(control_schedule(0, 4).unwrap(), None);
        assert_eq!(control_schedule(8, 4).unwrap(), Some(0));
        assert_eq!(control_schedule(9, 4).unwrap(), Some(1));
        assert_eq!(control_schedule(15, 4).unwrap(), Some(3));
        assert!(control_schedule(16, 4).is_err());
        assert_eq!(control_block(1, 4), (9, 4));
    }

    #[test]
    fn parse_database_text() {
        let db = Database::parse("# demo\n11 1\n01 0\n\n01 1\n00 0\n").unwrap();
        assert_eq!(db.n(), 2);
        assert_eq!(db.labels().unwrap(), &[true, false, true, false]);
        assert_eq!(db.labeled_records().unwrap().transactions()[0].to_string(), "111");
        assert!(Database::parse("11\n01\n00\n").is_err());
        assert!(Database::parse("11 1\n01\n").is_err());
        assert!(Database::parse("1x\n01\n").is_err());
    }

    #[test]
    fn labeled_itemset_predicate() {
        let p = Predicate::LabeledItemset { items: "10".parse().unwrap(), label: false };
        assert!(p.on(0b100));
        assert!(!p.on(0b101));
        assert!(!p.on(0b010));
    }

    #[test]
    fn rng_random_state_is_normalized() {
        let mut rng = stream(1, &[2]);
        let s = StateVector::random(4, &mut rng);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }
}

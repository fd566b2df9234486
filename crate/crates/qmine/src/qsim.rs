//! Dense state-vector engine.
//!
//! Qubit 0 is the most significant bit of the amplitude index, so a register
//! laid out as `control | address | data` stores the control value in the
//! high bits. Oracles are applied as basis permutations or diagonal phases in
//! one pass over the amplitudes; matrices are only built by [`to_matrix`] for
//! verification.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng as _;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bits::{mask, BitString};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub type C64 = Complex64;

/// Tolerance for state equality.
pub const STATE_TOL: f64 = 1e-9;
/// Tolerance for scalar identities.
pub const SCALAR_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Control,
    Address,
    Data,
    Ancilla,
    SwapAncilla,
    Private,
}

/// A run of `width` consecutive qubits starting at qubit `offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub offset: usize,
    pub width: usize,
}

impl Segment {
    pub fn new(offset: usize, width: usize) -> Self {
        Self { offset, width }
    }

    pub fn qubit(&self, i: usize) -> usize {
        assert!(i < self.width);
        self.offset + i
    }

    pub fn qubits(&self) -> Vec<usize> {
        (self.offset..self.offset + self.width).collect()
    }

    pub fn end(&self) -> usize {
        self.offset + self.width
    }
}

/// Named, disjoint, contiguous segments covering a register.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RegisterLayout {
    segments: Vec<(Role, Segment)>,
}

impl RegisterLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a layout from `(role, width)` pairs in order.
    pub fn from_widths(parts: &[(Role, usize)]) -> Self {
        let mut l = Self::new();
        for &(role, width) in parts {
            l.push(role, width);
        }
        l
    }

    /// Appends a segment at the end and returns it. Zero-width segments are
    /// skipped.
    pub fn push(&mut self, role: Role, width: usize) -> Segment {
        let seg = Segment::new(self.num_qubits(), width);
        if width > 0 {
            self.segments.push((role, seg));
        }
        seg
    }

    pub fn num_qubits(&self) -> usize {
        self.segments.last().map(|(_, s)| s.end()).unwrap_or(0)
    }

    pub fn get(&self, role: Role) -> Option<Segment> {
        self.segments.iter().find(|(r, _)| *r == role).map(|(_, s)| *s)
    }

    pub fn require(&self, role: Role) -> Result<Segment> {
        self.get(role)
            .ok_or_else(|| Error::InvalidParams(format!("layout has no {role:?} segment")))
    }

    pub fn segments(&self) -> &[(Role, Segment)] {
        &self.segments
    }

    /// Segments are disjoint, in order, and cover `0..num_qubits`.
    pub fn is_well_formed(&self) -> bool {
        let mut next = 0;
        for (_, s) in &self.segments {
            if s.offset != next || s.width == 0 {
                return false;
            }
            next = s.end();
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gate {
    H,
    X,
    Z,
    Swap,
    Cnot,
    Toffoli,
    PhaseFlip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementOutcome {
    pub bits: BitString,
    pub probability: f64,
}

/// A validated bijection on the basis labels of a segment.
#[derive(Clone, Debug)]
pub struct BasisPermutation {
    width: usize,
    map: Vec<u64>,
    involution: bool,
}

impl BasisPermutation {
    pub fn new(width: usize, map: Vec<u64>) -> Result<Self> {
        if map.len() != 1usize << width {
            return Err(Error::NonBijective);
        }
        let mut seen = vec![false; map.len()];
        for &v in &map {
            let v = v as usize;
            if v >= seen.len() || seen[v] {
                return Err(Error::NonBijective);
            }
            seen[v] = true;
        }
        let involution = map.iter().enumerate().all(|(i, &v)| map[v as usize] == i as u64);
        Ok(Self { width, map, involution })
    }

    pub fn identity(width: usize) -> Self {
        Self { width, map: (0..1u64 << width).collect(), involution: true }
    }

    pub fn xor_constant(width: usize, c: u64) -> Self {
        assert!(c < 1u64 << width);
        Self { width, map: (0..1u64 << width).map(|v| v ^ c).collect(), involution: true }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_involution(&self) -> bool {
        self.involution
    }
}

impl StateVector {
    pub fn zero(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Self {
        assert!((1..40).contains(&num_qubits));
        let mut amps = vec![C64::new(0.0, 0.0); 1 << num_qubits];
        amps[index] = C64::new(1.0, 0.0);
        Self { num_qubits, amps }
    }

    /// Wraps raw amplitudes; the length must be a power of two and the norm 1.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidParams(format!("amplitude count {len} is not a power of two >= 2")));
        }
        let s = Self { num_qubits: len.trailing_zeros() as usize, amps };
        if (s.norm_sqr() - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidParams(format!("state norm² {} is not 1", s.norm_sqr())));
        }
        Ok(s)
    }

    /// Like `from_amplitudes` but rescales to unit norm.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::InvalidParams("zero vector".into()));
        }
        for a in &mut amps {
            *a /= n;
        }
        Self::from_amplitudes(amps)
    }

    /// Uniformly random state (Gaussian amplitudes, normalized).
    pub fn random(num_qubits: usize, rng: &mut Rng) -> Self {
        let amps = (0..1usize << num_qubits)
            .map(|_| C64::new(gaussian(rng), gaussian(rng)))
            .collect();
        Self::normalized(amps).expect("gaussian vector is nonzero")
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `self ⊗ other`, with `self`'s qubits first.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector { num_qubits: self.num_qubits + other.num_qubits, amps }
    }

    /// Appends `k` qubits in |0⟩ after the existing ones.
    pub fn extend_with_zeros(&mut self, k: usize) {
        if k == 0 {
            return;
        }
        let old = std::mem::take(&mut self.amps);
        let mut amps = vec![C64::new(0.0, 0.0); old.len() << k];
        for (i, a) in old.into_iter().enumerate() {
            amps[i << k] = a;
        }
        self.amps = amps;
        self.num_qubits += k;
    }

    fn bit_of(&self, q: usize) -> u32 {
        (self.num_qubits - 1 - q) as u32
    }

    fn qubit_mask(&self, q: usize) -> usize {
        1usize << self.bit_of(q)
    }

    /// Bitmask over amplitude indices for a set of control qubits.
    pub fn control_mask(&self, controls: &[usize]) -> Result<usize> {
        let mut m = 0;
        for &c in controls {
            self.check_index(c)?;
            let b = self.qubit_mask(c);
            if m & b != 0 {
                return Err(Error::OverlappingQubits(c));
            }
            m |= b;
        }
        Ok(m)
    }

    fn check_index(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(Error::IndexOutOfRange { index: q, num_qubits: self.num_qubits });
        }
        Ok(())
    }

    fn check_segment(&self, seg: Segment) -> Result<()> {
        if seg.width == 0 {
            return Err(Error::InvalidParams("empty segment".into()));
        }
        self.check_index(seg.end() - 1)
    }

    fn seg_shift(&self, seg: Segment) -> usize {
        self.num_qubits - seg.end()
    }

    fn seg_mask(&self, seg: Segment) -> usize {
        (mask(seg.width as u32) as usize) << self.seg_shift(seg)
    }

    /// Applies a gate to `targets`, conditioned on every qubit in `controls`
    /// being |1⟩. CNOT and Toffoli take one target and one or two controls.
    pub fn apply_gate(&mut self, gate: Gate, targets: &[usize], controls: &[usize]) -> Result<()> {
        let mut all: Vec<usize> = targets.to_vec();
        all.extend_from_slice(controls);
        let _ = self.control_mask(&all)?;
        let cm = self.control_mask(controls)?;
        let arity = match gate {
            Gate::Swap => 2,
            Gate::PhaseFlip => targets.len().max(1),
            _ => 1,
        };
        if targets.len() != arity {
            return Err(Error::InvalidParams(format!("{gate:?} takes {arity} target(s)")));
        }
        match gate {
            Gate::Cnot if controls.len() != 1 => {
                return Err(Error::InvalidParams("CNOT takes exactly one control".into()))
            }
            Gate::Toffoli if controls.len() != 2 => {
                return Err(Error::InvalidParams("Toffoli takes exactly two controls".into()))
            }
            _ => {}
        }
        match gate {
            Gate::H => {
                let h = C64::new(FRAC_1_SQRT_2, 0.0);
                self.apply_1q(targets[0], [[h, h], [h, -h]], cm);
            }
            Gate::X | Gate::Cnot | Gate::Toffoli => self.apply_x(targets[0], cm),
            Gate::Z => self.apply_phase_mask(self.qubit_mask(targets[0]) | cm),
            Gate::PhaseFlip => {
                let m = self.control_mask(targets)? | cm;
                self.apply_phase_mask(m)
            }
            Gate::Swap => self.apply_swap(targets[0], targets[1], cm),
        }
        Ok(())
    }

    fn apply_1q(&mut self, q: usize, m: [[C64; 2]; 2], cm: usize) {
        let b = self.qubit_mask(q);
        for i in 0..self.amps.len() {
            if i & b != 0 || i & cm != cm {
                continue;
            }
            let j = i | b;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
            self.amps[j] = m[1][0] * a0 + m[1][1] * a1;
        }
    }

    fn apply_x(&mut self, q: usize, cm: usize) {
        let b = self.qubit_mask(q);
        for i in 0..self.amps.len() {
            if i & b == 0 && i & cm == cm {
                self.amps.swap(i, i | b);
            }
        }
    }

    /// Multiplies by −1 every amplitude whose index has all bits of `m` set.
    fn apply_phase_mask(&mut self, m: usize) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & m == m {
                *a = -*a;
            }
        }
    }

    fn apply_swap(&mut self, q1: usize, q2: usize, cm: usize) {
        let (b1, b2) = (self.qubit_mask(q1), self.qubit_mask(q2));
        for i in 0..self.amps.len() {
            if i & b1 != 0 && i & b2 == 0 && i & cm == cm {
                self.amps.swap(i, (i ^ b1) | b2);
            }
        }
    }

    /// |a⟩_src |τ⟩_dst → |a⟩_src |τ ⊕ table[a]⟩_dst on the amplitudes whose
    /// index has every bit of `ctrl` set. XOR maps are involutions, so this is
    /// done in place with pairwise swaps.
    pub fn apply_xor_map(&mut self, src: Segment, dst: Segment, table: &[u64], ctrl: usize) -> Result<()> {
        self.check_segment(src)?;
        self.check_segment(dst)?;
        if src.offset < dst.end() && dst.offset < src.end() {
            return Err(Error::OverlappingQubits(src.offset.max(dst.offset)));
        }
        if table.len() != 1 << src.width || table.iter().any(|&v| v >> dst.width != 0) {
            return Err(Error::InvalidParams("xor table does not match segment widths".into()));
        }
        let (ss, sm) = (self.seg_shift(src), mask(src.width as u32) as usize);
        let ds = self.seg_shift(dst);
        for i in 0..self.amps.len() {
            if i & ctrl != ctrl {
                continue;
            }
            let d = table[(i >> ss) & sm] as usize;
            if d == 0 {
                continue;
            }
            let j = i ^ (d << ds);
            if j > i {
                self.amps.swap(i, j);
            }
        }
        Ok(())
    }

    /// Permutes the basis labels of `seg` by `perm`.
    pub fn apply_bit_oracle(&mut self, seg: Segment, perm: &BasisPermutation) -> Result<()> {
        self.check_segment(seg)?;
        if perm.width != seg.width {
            return Err(Error::InvalidParams("permutation width differs from segment".into()));
        }
        let (s, m) = (self.seg_shift(seg), mask(seg.width as u32) as usize);
        let clear = !(m << s);
        if perm.involution {
            for i in 0..self.amps.len() {
                let v = (i >> s) & m;
                let j = (i & clear) | ((perm.map[v] as usize) << s);
                if j > i {
                    self.amps.swap(i, j);
                }
            }
        } else {
            let old = self.amps.clone();
            for (i, a) in old.into_iter().enumerate() {
                let v = (i >> s) & m;
                self.amps[(i & clear) | ((perm.map[v] as usize) << s)] = a;
            }
        }
        Ok(())
    }

    /// Multiplies by −1 where `table[value of seg]` holds, on amplitudes whose
    /// index has every bit of `ctrl` set.
    pub fn apply_phase_table(&mut self, seg: Segment, table: &[bool], ctrl: usize) -> Result<()> {
        self.check_segment(seg)?;
        if table.len() != 1 << seg.width {
            return Err(Error::InvalidParams("phase table does not match segment width".into()));
        }
        let (s, m) = (self.seg_shift(seg), mask(seg.width as u32) as usize);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & ctrl == ctrl && table[(i >> s) & m] {
                *a = -*a;
            }
        }
        Ok(())
    }

    /// Reflection I − 2|+⟩⟨+| on `seg`, conditioned on `ctrl`.
    pub fn apply_uniform_reflection(&mut self, seg: Segment, ctrl: usize) -> Result<()> {
        self.check_segment(seg)?;
        if ctrl & self.seg_mask(seg) != 0 {
            return Err(Error::OverlappingQubits(seg.offset));
        }
        let s = self.seg_shift(seg);
        let dim = 1usize << seg.width;
        let scale = 2.0 / dim as f64;
        let hi_count = self.amps.len() >> (s + seg.width);
        for hi in 0..hi_count {
            for lo in 0..1usize << s {
                let base = (hi << (s + seg.width)) | lo;
                if base & ctrl != ctrl {
                    continue;
                }
                let mut sum = C64::new(0.0, 0.0);
                for v in 0..dim {
                    sum += self.amps[base | (v << s)];
                }
                let shift = sum * scale;
                for v in 0..dim {
                    self.amps[base | (v << s)] -= shift;
                }
            }
        }
        Ok(())
    }

    /// Quantum Fourier transform on `qubits` (first listed qubit is the most
    /// significant digit). QFT|j⟩ = M^{-1/2} Σ_k e^{2πi jk/M} |k⟩.
    pub fn apply_qft(&mut self, qubits: &[usize], inverse: bool) -> Result<()> {
        let qm = self.control_mask(qubits)?;
        let m = 1usize << qubits.len();
        let deposit: Vec<usize> = (0..m)
            .map(|j| {
                qubits
                    .iter()
                    .enumerate()
                    .filter(|(pos, _)| (j >> (qubits.len() - 1 - pos)) & 1 == 1)
                    .map(|(_, &q)| self.qubit_mask(q))
                    .sum()
            })
            .collect();
        let mut planner = FftPlanner::<f64>::new();
        let fft = if inverse { planner.plan_fft_forward(m) } else { planner.plan_fft_inverse(m) };
        let norm = 1.0 / (m as f64).sqrt();
        let mut buf = vec![C64::new(0.0, 0.0); m];
        for base in 0..self.amps.len() {
            if base & qm != 0 {
                continue;
            }
            for (j, d) in deposit.iter().enumerate() {
                buf[j] = self.amps[base | d];
            }
            fft.process(&mut buf);
            for (j, d) in deposit.iter().enumerate() {
                self.amps[base | d] = buf[j] * norm;
            }
        }
        Ok(())
    }

    /// Marginal outcome distribution of `qubits` (outcome index has the first
    /// listed qubit as its most significant bit).
    pub fn probabilities(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        let _ = self.control_mask(qubits)?;
        let mut p = vec![0.0; 1 << qubits.len()];
        for (i, a) in self.amps.iter().enumerate() {
            p[self.extract(i, qubits)] += a.norm_sqr();
        }
        Ok(p)
    }

    fn extract(&self, i: usize, qubits: &[usize]) -> usize {
        qubits.iter().fold(0, |acc, &q| (acc << 1) | ((i >> self.bit_of(q)) & 1))
    }

    /// Computational-basis measurement of `qubits`. A basis index is drawn by
    /// inverse CDF in index order; the state collapses onto the observed
    /// outcome and is renormalized.
    pub fn measure(&mut self, qubits: &[usize], rng: &mut Rng) -> Result<MeasurementOutcome> {
        if qubits.is_empty() {
            return Err(Error::InvalidParams("nothing to measure".into()));
        }
        let _ = self.control_mask(qubits)?;
        let total = self.norm_sqr();
        let u: f64 = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = None;
        let mut last_nonzero = 0;
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p > 0.0 {
                last_nonzero = i;
            }
            acc += p;
            if acc > u && p > 0.0 {
                chosen = Some(i);
                break;
            }
        }
        let idx = chosen.unwrap_or(last_nonzero);
        let outcome = self.extract(idx, qubits);
        self.collapse(qubits, outcome)
    }

    /// Projects onto `outcome` of `qubits` and renormalizes.
    pub fn collapse(&mut self, qubits: &[usize], outcome: usize) -> Result<MeasurementOutcome> {
        let mut prob = 0.0;
        for i in 0..self.amps.len() {
            if self.extract(i, qubits) == outcome {
                prob += self.amps[i].norm_sqr();
            }
        }
        if prob <= 0.0 {
            return Err(Error::Internal("zero-probability measurement branch".into()));
        }
        let scale = 1.0 / prob.sqrt();
        for i in 0..self.amps.len() {
            if self.extract(i, qubits) == outcome {
                self.amps[i] *= scale;
            } else {
                self.amps[i] = C64::new(0.0, 0.0);
            }
        }
        Ok(MeasurementOutcome {
            bits: BitString::new(qubits.len() as u32, outcome as u64)?,
            probability: prob,
        })
    }
}

/// ⟨a|b⟩.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64> {
    if a.num_qubits != b.num_qubits {
        return Err(Error::DimensionMismatch(a.num_qubits, b.num_qubits));
    }
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// |⟨a|b⟩|².
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(inner_product(a, b)?.norm_sqr())
}

/// True iff ‖a − λb‖ ≤ tol for some unit λ. The optimal λ is the phase of ⟨b|a⟩.
pub fn equal_up_to_global_phase(a: &StateVector, b: &StateVector, tol: f64) -> bool {
    let Ok(ip) = inner_product(b, a) else { return false };
    let lambda = if ip.norm() > 0.0 { ip / ip.norm() } else { C64::new(1.0, 0.0) };
    let d: f64 = a
        .amps
        .iter()
        .zip(&b.amps)
        .map(|(x, y)| (x - lambda * y).norm_sqr())
        .sum();
    d.sqrt() <= tol
}

/// ‖a − b‖.
pub fn distance(a: &StateVector, b: &StateVector) -> f64 {
    a.amps.iter().zip(&b.amps).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// Dense matrix of the linear map `f` on `num_qubits` qubits, one column per
/// basis state. Verification only.
pub fn to_matrix(num_qubits: usize, mut f: impl FnMut(&mut StateVector)) -> Vec<Vec<C64>> {
    let dim = 1usize << num_qubits;
    let mut cols = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut s = StateVector::basis(num_qubits, j);
        f(&mut s);
        cols.push(s.amps);
    }
    // transpose to row-major
    (0..dim).map(|i| (0..dim).map(|j| cols[j][i]).collect()).collect()
}

/// Largest entrywise difference between two equally sized matrices.
pub fn matrix_distance(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max)
}

fn gaussian(rng: &mut Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::zero(1);
        s.apply_gate(Gate::H, &[0], &[]).unwrap();
        assert!((s.amps()[0] - c(FRAC_1_SQRT_2)).norm() < SCALAR_TOL);
        assert!((s.amps()[1] - c(FRAC_1_SQRT_2)).norm() < SCALAR_TOL);
    }

    #[test]
    fn controlled_x_on_10() {
        let mut s = StateVector::basis(2, 0b10);
        s.apply_gate(Gate::Cnot, &[1], &[0]).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b11));
    }

    #[test]
    fn z_maps_plus_to_minus() {
        let mut s = StateVector::zero(1);
        s.apply_gate(Gate::H, &[0], &[]).unwrap();
        s.apply_gate(Gate::Z, &[0], &[]).unwrap();
        assert!((s.amps()[1] + c(FRAC_1_SQRT_2)).norm() < SCALAR_TOL);
    }

    #[test]
    fn gate_argument_errors() {
        let mut s = StateVector::zero(2);
        assert!(matches!(s.apply_gate(Gate::X, &[2], &[]), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(s.apply_gate(Gate::X, &[0], &[0]), Err(Error::OverlappingQubits(0))));
        assert!(s.apply_gate(Gate::Cnot, &[0], &[]).is_err());
    }

    #[test]
    fn bit_oracle_examples() {
        let mut rng = stream(1, &[]);
        let s0 = StateVector::random(3, &mut rng);
        let seg = Segment::new(1, 2);
        let mut s = s0.clone();
        s.apply_bit_oracle(seg, &BasisPermutation::identity(2)).unwrap();
        assert_eq!(s, s0);

        let mut a = StateVector::basis(2, 0b01);
        a.apply_bit_oracle(Segment::new(0, 2), &BasisPermutation::xor_constant(2, 0b11)).unwrap();
        assert_eq!(a, StateVector::basis(2, 0b10));

        let mut x1 = s0.clone();
        let mut x2 = s0.clone();
        x1.apply_bit_oracle(Segment::new(2, 1), &BasisPermutation::new(1, vec![1, 0]).unwrap()).unwrap();
        x2.apply_gate(Gate::X, &[2], &[]).unwrap();
        assert!(distance(&x1, &x2) < STATE_TOL);

        assert!(matches!(BasisPermutation::new(1, vec![0, 0]), Err(Error::NonBijective)));
    }

    #[test]
    fn non_involutive_permutation() {
        // 3-cycle on a 2-qubit segment
        let p = BasisPermutation::new(2, vec![1, 2, 0, 3]).unwrap();
        assert!(!p.is_involution());
        let mut s = StateVector::basis(2, 0);
        s.apply_bit_oracle(Segment::new(0, 2), &p).unwrap();
        assert_eq!(s, StateVector::basis(2, 1));
    }

    #[test]
    fn qft_small_cases() {
        // t = 1: QFT = H
        let mut rng = stream(2, &[]);
        let s0 = StateVector::random(1, &mut rng);
        let mut a = s0.clone();
        let mut b = s0.clone();
        a.apply_qft(&[0], false).unwrap();
        b.apply_gate(Gate::H, &[0], &[]).unwrap();
        assert!(distance(&a, &b) < STATE_TOL);

        let mut z = StateVector::zero(3);
        z.apply_qft(&[0, 1, 2], false).unwrap();
        for a in z.amps() {
            assert!((a - c(1.0 / 8f64.sqrt())).norm() < SCALAR_TOL);
        }

        // QFT|1> on 2 qubits has phases i^k
        let mut one = StateVector::basis(2, 1);
        one.apply_qft(&[0, 1], false).unwrap();
        assert!((one.amps()[1] - C64::new(0.0, 0.5)).norm() < SCALAR_TOL);
    }

    #[test]
    fn measurement_examples() {
        let mut rng = stream(3, &[]);
        let mut z = StateVector::zero(1);
        let o = z.measure(&[0], &mut rng).unwrap();
        assert_eq!(o.bits.value(), 0);
        assert!((o.probability - 1.0).abs() < SCALAR_TOL);

        let mut bell = StateVector::zero(2);
        bell.apply_gate(Gate::H, &[0], &[]).unwrap();
        bell.apply_gate(Gate::Cnot, &[1], &[0]).unwrap();
        let o = bell.clone().collapse(&[0], 0).unwrap();
        assert!((o.probability - 0.5).abs() < SCALAR_TOL);
        let mut post = bell.clone();
        post.collapse(&[0], 0).unwrap();
        assert_eq!(post, StateVector::basis(2, 0));
    }

    #[test]
    fn inner_product_examples() {
        let a = StateVector::basis(1, 0);
        let b = StateVector::basis(1, 1);
        assert!(inner_product(&a, &b).unwrap().norm() < SCALAR_TOL);
        assert!((inner_product(&a, &a).unwrap() - c(1.0)).norm() < SCALAR_TOL);
        assert!(inner_product(&a, &StateVector::zero(2)).is_err());

        let n = 8;
        let u = StateVector::normalized(vec![c(1.0); n]).unwrap();
        let mut v = u.clone();
        v.amps_mut()[3] = -v.amps()[3];
        let f = fidelity(&v, &u).unwrap();
        assert!((f - 0.5625).abs() < SCALAR_TOL);
    }

    #[test]
    fn global_phase_comparison() {
        let mut rng = stream(4, &[]);
        let a = StateVector::random(2, &mut rng);
        let mut neg = a.clone();
        for x in neg.amps_mut() {
            *x = -*x;
        }
        assert!(equal_up_to_global_phase(&a, &neg, STATE_TOL));
        assert!(!equal_up_to_global_phase(&StateVector::basis(1, 0), &StateVector::basis(1, 1), STATE_TOL));
    }

    #[test]
    fn extend_and_tensor_agree() {
        let mut rng = stream(5, &[]);
        let a = StateVector::random(2, &mut rng);
        let mut b = a.clone();
        b.extend_with_zeros(1);
        assert_eq!(b, a.tensor(&StateVector::zero(1)));
    }

    #[test]
    fn layout_segments() {
        let l = RegisterLayout::from_widths(&[(Role::Control, 3), (Role::Address, 2), (Role::Data, 2)]);
        assert!(l.is_well_formed());
        assert_eq!(l.num_qubits(), 7);
        assert_eq!(l.get(Role::Data), Some(Segment::new(5, 2)));
        assert!(l.get(Role::Ancilla).is_none());
    }
}

//! Alice's test states ψ_{m,x,b}(μ,ν) = U_t(m,x,b)|0⟩, their partition into
//! disjoint orthonormal bases, and the two decomposition identities.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::TestUnitary;
use crate::qsim::{inner_product, RegisterLayout, Role, StateVector, C64};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TestParams {
    pub m: u32,
    pub x: u64,
    pub b: bool,
    pub mu: u64,
    pub nu: u64,
}

impl TestParams {
    pub fn new(m: u32, x: u64, b: bool, mu: u64, nu: u64) -> Self {
        Self { m, x, b, mu, nu }
    }

    pub fn validate(&self, n: u32, k: u32) -> Result<()> {
        TestUnitary::new(n, k, self.m, self.x, self.b, self.mu, self.nu).map(|_| ())
    }

    pub fn unitary(&self, n: u32, k: u32) -> Result<TestUnitary> {
        TestUnitary::new(n, k, self.m, self.x, self.b, self.mu, self.nu)
    }

    /// Uniform draw over all valid tuples.
    pub fn random(n: u32, k: u32, rng: &mut Rng) -> Self {
        let kk = 1u64 << k;
        let (mut mu, mut nu) = (rng.gen_range(0..kk), rng.gen_range(0..kk - 1));
        if nu >= mu {
            nu += 1;
        } else {
            std::mem::swap(&mut mu, &mut nu);
        }
        Self {
            m: rng.gen_range(0..n),
            x: rng.gen_range(0..1u64 << n),
            b: rng.gen(),
            mu,
            nu,
        }
    }

    /// Copy with the pair given in either order; swapping the pair toggles b.
    fn with_pair(self, a: u64, c: u64) -> Self {
        if a < c {
            Self { mu: a, nu: c, ..self }
        } else {
            Self { mu: c, nu: a, b: !self.b, ..self }
        }
    }
}

pub fn num_test_states(n: u32, k: u32) -> usize {
    let kk = 1usize << k;
    n as usize * (1usize << (n + 1)) * kk * (kk - 1) / 2
}

/// Every valid tuple, in lexicographic (m, x, b, μ, ν) order.
pub fn all_params(n: u32, k: u32) -> Vec<TestParams> {
    let kk = 1u64 << k;
    let mut out = Vec::with_capacity(num_test_states(n, k));
    for m in 0..n {
        for x in 0..1u64 << n {
            for b in [false, true] {
                for mu in 0..kk {
                    for nu in mu + 1..kk {
                        out.push(TestParams { m, x, b, mu, nu });
                    }
                }
            }
        }
    }
    out
}

fn ad_layout(n: u32, k: u32) -> RegisterLayout {
    RegisterLayout::from_widths(&[(Role::Address, n as usize), (Role::Data, k as usize)])
}

/// U_t(m,x,b)|0⟩ on n+k qubits.
pub fn test_state(p: &TestParams, n: u32, k: u32) -> Result<StateVector> {
    let u = p.unitary(n, k)?;
    let mut s = StateVector::zero((n + k) as usize);
    u.apply(&mut s, &ad_layout(n, k))?;
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairPartition {
    pub index: usize,
    pub pairs: Vec<(u64, u64)>,
}

/// The 2^k − 1 partitions of {0,1}^k into pairs. Q(1) = {{0,1}}; from each
/// partition of level l come a same-suffix copy {μ0,ν0},{μ1,ν1} and a crossed
/// copy {μ0,ν1},{μ1,ν0}, plus one final partition {μ0,μ1}.
pub fn partition_pairs(k: u32) -> Vec<PairPartition> {
    assert!(k >= 1);
    let mut level: Vec<Vec<(u64, u64)>> = vec![vec![(0, 1)]];
    for l in 1..k {
        let mut next = Vec::with_capacity(2 * level.len() + 1);
        for p in &level {
            next.push(p.iter().flat_map(|&(a, c)| [(2 * a, 2 * c), (2 * a + 1, 2 * c + 1)]).collect());
        }
        for p in &level {
            next.push(
                p.iter()
                    .flat_map(|&(a, c)| [(2 * a, 2 * c + 1), (2 * a + 1, 2 * c)])
                    .collect(),
            );
        }
        next.push((0..1u64 << l).map(|a| (2 * a, 2 * a + 1)).collect());
        level = next;
    }
    level
        .into_iter()
        .enumerate()
        .map(|(index, mut pairs)| {
            pairs.sort_unstable();
            PairPartition { index, pairs }
        })
        .collect()
}

/// Partition index of every unordered pair, as a dense 2^k × 2^k table.
pub fn pair_index_table(k: u32) -> Vec<Vec<Option<usize>>> {
    let kk = 1usize << k;
    let mut t = vec![vec![None; kk]; kk];
    for p in partition_pairs(k) {
        for (a, c) in p.pairs {
            t[a as usize][c as usize] = Some(p.index);
            t[c as usize][a as usize] = Some(p.index);
        }
    }
    t
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestBasis {
    pub index: usize,
    pub m: u32,
    pub partition: usize,
    pub members: Vec<TestParams>,
}

/// The n(2^k − 1) bases B(m, P) = {ψ_{m,x,b}(μ,ν) : {μ,ν} ∈ P, all x, b}.
pub fn enumerate_bases(n: u32, k: u32) -> Vec<TestBasis> {
    let parts = partition_pairs(k);
    let mut out = Vec::with_capacity(n as usize * parts.len());
    for m in 0..n {
        for p in &parts {
            let mut members = Vec::with_capacity(1 << (n + k));
            for &(mu, nu) in &p.pairs {
                for x in 0..1u64 << n {
                    for b in [false, true] {
                        members.push(TestParams { m, x, b, mu, nu });
                    }
                }
            }
            members.sort_unstable();
            out.push(TestBasis { index: out.len(), m, partition: p.index, members });
        }
    }
    out
}

/// Index into [`enumerate_bases`] of the basis holding `p`.
pub fn basis_index(p: &TestParams, k: u32, table: &[Vec<Option<usize>>]) -> usize {
    let parts = (1usize << k) - 1;
    p.m as usize * parts + table[p.mu as usize][p.nu as usize].expect("pair table covers every pair")
}

/// Largest deviation of the basis Gram matrix from the identity.
pub fn gram_deviation(basis: &TestBasis, n: u32, k: u32) -> Result<f64> {
    let states: Vec<StateVector> =
        basis.members.iter().map(|p| test_state(p, n, k)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..states.len() {
        for j in i..states.len() {
            let ip = inner_product(&states[i], &states[j])?;
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((ip - C64::new(target, 0.0)).norm());
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub params: TestParams,
}

fn bit(x: u64, j: u32, n: u32) -> bool {
    (x >> (n - 1 - j)) & 1 == 1
}

fn set_bit(x: u64, j: u32, n: u32, v: bool) -> u64 {
    let m = 1u64 << (n - 1 - j);
    if v {
        x | m
    } else {
        x & !m
    }
}

fn swap_bits(x: u64, i: u32, j: u32, n: u32) -> u64 {
    let (a, c) = (bit(x, i, n), bit(x, j, n));
    set_bit(set_bit(x, i, n, c), j, n, a)
}

fn sign(odd: bool) -> f64 {
    if odd {
        -1.0
    } else {
        1.0
    }
}

/// Expresses ψ_{m,x,b}(μ,ν) as four signed states at index l. With y = x
/// with bits 0 and m swapped, z' = y with bit l set to x_0⊕y_l and bit m
/// cleared, z'' = y with bit l set to x_0⊕y_l⊕1 and bit m set, the outputs
/// use x' = z' and x'' = z'' with bits 0 and l swapped. Coefficients carry
/// the global phase (−1)^{b x_0}.
pub fn decompose_shift_m(p: &TestParams, l: u32, n: u32) -> Result<[Term; 4]> {
    if l == p.m || l >= n || p.m >= n {
        return Err(Error::InvalidParams(format!("shift needs l != m < n (m={}, l={l})", p.m)));
    }
    let x0 = bit(p.x, 0, n);
    let y = swap_bits(p.x, 0, p.m, n);
    let yl = bit(y, l, n);
    let z1 = set_bit(set_bit(y, l, n, x0 ^ yl), p.m, n, false);
    let z2 = set_bit(set_bit(y, l, n, !(x0 ^ yl)), p.m, n, true);
    let x1 = swap_bits(z1, 0, l, n);
    let x2 = swap_bits(z2, 0, l, n);
    let g = 0.5 * sign(p.b && x0);
    let at = |x, b| TestParams { m: l, x, b, ..*p };
    Ok([
        Term { coeff: g, params: at(x1, false) },
        Term { coeff: g * sign(x0), params: at(x1, true) },
        Term { coeff: g * sign(p.b), params: at(x2, false) },
        Term { coeff: -g * sign(p.b ^ x0), params: at(x2, true) },
    ])
}

/// Expresses ψ_{m,x,b}(μ,ν) over the pairs (μ,ω) and (ω,ν). x' flips bit 0 of
/// x; pairs given out of order are normalised with b toggled.
pub fn decompose_insert_omega(p: &TestParams, omega: u64, n: u32) -> Result<[Term; 4]> {
    if omega == p.mu || omega == p.nu {
        return Err(Error::InvalidParams(format!("ω={omega} collides with the pair")));
    }
    let xf = p.x ^ (1u64 << (n - 1));
    let left = |x| TestParams { x, ..*p }.with_pair(p.mu, omega);
    let right = |x| TestParams { x, ..*p }.with_pair(omega, p.nu);
    let sb = sign(p.b);
    Ok([
        Term { coeff: 0.5, params: left(p.x) },
        Term { coeff: 0.5 * sb, params: left(xf) },
        Term { coeff: 0.5, params: right(p.x) },
        Term { coeff: -0.5 * sb, params: right(xf) },
    ])
}

pub fn reconstruct(terms: &[Term], n: u32, k: u32) -> Result<StateVector> {
    let mut amps = vec![C64::new(0.0, 0.0); 1 << (n + k)];
    for t in terms {
        let s = test_state(&t.params, n, k)?;
        for (a, v) in amps.iter_mut().zip(s.amps()) {
            *a += v * t.coeff;
        }
    }
    StateVector::from_amplitudes(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{distance, equal_up_to_global_phase, STATE_TOL};
    use crate::rng::stream;
    use std::collections::BTreeSet;
    use std::f64::consts::FRAC_1_SQRT_2;

    /// (|0⟩|+⟩^{n−1}|μ⟩ + |1⟩|+⟩^{n−1}|ν⟩)/√2 built amplitude by amplitude.
    fn explicit_base(n: u32, k: u32, mu: u64, nu: u64) -> StateVector {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << (n + k)];
        let w = FRAC_1_SQRT_2 / f64::from(1u32 << (n - 1)).sqrt();
        for rest in 0..1u64 << (n - 1) {
            amps[((rest << k) | mu) as usize] += w;
            amps[((((1 << (n - 1)) | rest) << k) | nu) as usize] += w;
        }
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn base_state_matches_explicit_form() {
        for (n, k, mu, nu) in [(1, 1, 0, 1), (2, 2, 1, 2), (3, 2, 0, 3)] {
            let s = test_state(&TestParams::new(0, 0, false, mu, nu), n, k).unwrap();
            assert!(distance(&s, &explicit_base(n, k, mu, nu)) < STATE_TOL);
        }
    }

    #[test]
    fn adjoint_returns_to_zero() {
        let mut rng = stream(3, &[]);
        let l = ad_layout(3, 2);
        for _ in 0..20 {
            let p = TestParams::random(3, 2, &mut rng);
            let mut s = test_state(&p, 3, 2).unwrap();
            p.unitary(3, 2).unwrap().apply_adjoint(&mut s, &l).unwrap();
            assert!(distance(&s, &StateVector::zero(5)) < STATE_TOL);
        }
    }

    #[test]
    fn partitions_small_k() {
        assert_eq!(partition_pairs(1), vec![PairPartition { index: 0, pairs: vec![(0, 1)] }]);
        for k in 1..=4 {
            let parts = partition_pairs(k);
            assert_eq!(parts.len(), (1 << k) - 1);
            let mut seen = BTreeSet::new();
            for p in &parts {
                assert_eq!(p.pairs.len(), 1 << (k - 1));
                let cover: BTreeSet<u64> = p.pairs.iter().flat_map(|&(a, c)| [a, c]).collect();
                assert_eq!(cover.len(), 1 << k);
                for &(a, c) in &p.pairs {
                    assert!(a < c);
                    assert!(seen.insert((a, c)), "pair {a},{c} repeated");
                }
            }
            assert_eq!(seen.len(), (1 << k) * ((1 << k) - 1) / 2);
        }
    }

    #[test]
    fn basis_counts() {
        let b = enumerate_bases(2, 1);
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|x| x.members.len() == 8));
        assert_eq!(enumerate_bases(2, 2).len(), 6);
        assert_eq!(num_test_states(2, 1), 16);
    }

    #[test]
    fn small_basis_is_orthonormal() {
        for basis in enumerate_bases(1, 1) {
            assert!(gram_deviation(&basis, 1, 1).unwrap() < STATE_TOL);
        }
    }

    #[test]
    fn basis_index_agrees_with_enumeration() {
        let (n, k) = (2, 2);
        let table = pair_index_table(k);
        for basis in enumerate_bases(n, k) {
            for p in &basis.members {
                assert_eq!(basis_index(p, k, &table), basis.index);
            }
        }
    }

    #[test]
    fn shift_examples() {
        let p = TestParams::new(0, 0, false, 0, 3);
        let terms = decompose_shift_m(&p, 1, 2).unwrap();
        assert!(terms.iter().all(|t| (t.coeff.abs() - 0.5).abs() < 1e-15));
        let r = reconstruct(&terms, 2, 2).unwrap();
        assert!(distance(&r, &test_state(&p, 2, 2).unwrap()) < STATE_TOL);
        assert!(decompose_shift_m(&p, 0, 2).is_err());
    }

    #[test]
    fn shift_phase_case() {
        // b = 1, x_0 = 1: the phase must be carried exactly, not up to sign
        let p = TestParams::new(1, 0b101, true, 1, 2);
        let terms = decompose_shift_m(&p, 2, 3).unwrap();
        assert!(terms[0].coeff < 0.0);
        let r = reconstruct(&terms, 3, 2).unwrap();
        assert!(distance(&r, &test_state(&p, 3, 2).unwrap()) < STATE_TOL);
    }

    #[test]
    fn shift_exhaustive_small() {
        for n in 2..=4 {
            for p in all_params(n, 1) {
                let direct = test_state(&p, n, 1).unwrap();
                for l in (0..n).filter(|&l| l != p.m) {
                    let r = reconstruct(&decompose_shift_m(&p, l, n).unwrap(), n, 1).unwrap();
                    assert!(distance(&r, &direct) < STATE_TOL, "{p:?} l={l}");
                }
            }
        }
    }

    #[test]
    fn insert_examples() {
        let p = TestParams::new(0, 0, false, 0b00, 0b11);
        let terms = decompose_insert_omega(&p, 0b01, 2).unwrap();
        let sq: f64 = terms.iter().map(|t| t.coeff * t.coeff).sum();
        assert!((sq - 1.0).abs() < 1e-15);
        let r = reconstruct(&terms, 2, 2).unwrap();
        assert!(equal_up_to_global_phase(&r, &test_state(&p, 2, 2).unwrap(), STATE_TOL));
        // ω below μ reorders the left pair and toggles b
        let p = TestParams::new(1, 0b10, false, 0b10, 0b11);
        let terms = decompose_insert_omega(&p, 0b00, 2).unwrap();
        assert!(terms[0].params.b);
        assert_eq!((terms[0].params.mu, terms[0].params.nu), (0b00, 0b10));
        let r = reconstruct(&terms, 2, 2).unwrap();
        assert!(distance(&r, &test_state(&p, 2, 2).unwrap()) < STATE_TOL);
        assert!(decompose_insert_omega(&p, 0b11, 2).is_err());
    }
}

//! Level-wise frequent itemsets, association rules and decision trees on top
//! of a support oracle, plus the bit-flip randomizer.
//!
//! Bob is the querying party throughout: every support below is a quantity
//! he would obtain from a protocol run.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::oracles::{Database, Predicate};
use crate::protocol::{estimate_predicate, ProtocolParams, StrategyKind};
use crate::rng::{derive_seed, Rng, TAG_QUERY};

/// Fraction of transactions containing `itemset`.
pub fn exact_support(db: &Database, itemset: &BitString) -> Result<f64> {
    if itemset.width() != db.k() {
        return Err(Error::InvalidParams(format!("itemset width {} != k = {}", itemset.width(), db.k())));
    }
    Ok(db.mean_of(&Predicate::contains(*itemset)))
}

#[derive(Clone, Debug)]
pub enum OracleKind {
    Exact,
    /// `params.n`, `params.k` and `params.seed` are overridden per query: the
    /// dimensions come from the database and the seed is derived from the
    /// base seed and the predicate.
    Protocol { params: ProtocolParams, strategy: StrategyKind },
}

/// Supports of predicates over one database, memoised per predicate.
pub struct SupportOracle {
    db: Database,
    kind: OracleKind,
    cache: RefCell<HashMap<Predicate, f64>>,
    queries: RefCell<usize>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl SupportOracle {
    pub fn exact(db: Database) -> Self {
        Self::new(db, OracleKind::Exact)
    }

    pub fn protocol(db: Database, params: ProtocolParams, strategy: StrategyKind) -> Self {
        Self::new(db, OracleKind::Protocol { params, strategy })
    }

    pub fn new(db: Database, kind: OracleKind) -> Self {
        Self { db, kind, cache: RefCell::new(HashMap::new()), queries: RefCell::new(0) }
    }

    pub fn db(&self) -> &Database {
        &self.db
    }

    pub fn kind(&self) -> &OracleKind {
        &self.kind
    }

    /// Distinct predicates evaluated so far (protocol runs, for the protocol kind).
    pub fn queries(&self) -> usize {
        *self.queries.borrow()
    }

    /// The same oracle kind over the database's k+1-bit labeled records.
    pub fn labeled(&self) -> Result<Self> {
        Ok(Self::new(self.db.labeled_records()?, self.kind.clone()))
    }

    pub fn support_of(&self, f: &Predicate) -> Result<f64> {
        if let Some(s) = self.cache.borrow().get(f) {
            return Ok(*s);
        }
        let s = match &self.kind {
            OracleKind::Exact => self.db.mean_of(f),
            OracleKind::Protocol { params, strategy } => {
                let tag = fnv1a(serde_json::to_string(f)?.as_bytes());
                let p = ProtocolParams {
                    n: self.db.n(),
                    k: self.db.k(),
                    seed: derive_seed(params.seed, &[TAG_QUERY, tag]),
                    ..params.clone()
                };
                estimate_predicate(&self.db, f, &p, *strategy)?.s_combined
            }
        };
        *self.queries.borrow_mut() += 1;
        self.cache.borrow_mut().insert(f.clone(), s);
        Ok(s)
    }

    pub fn support(&self, itemset: &BitString) -> Result<f64> {
        if itemset.width() != self.db.k() {
            return Err(Error::InvalidParams(format!("itemset width {} != k = {}", itemset.width(), self.db.k())));
        }
        self.support_of(&Predicate::contains(*itemset))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequentItemset {
    pub itemset: BitString,
    pub support: f64,
}

/// G_1, G_2, ...: level l holds the frequent l-itemsets. Candidates for level
/// l+1 are all (l+1)-supersets of frequent l-itemsets.
pub fn frequent_itemsets(oracle: &SupportOracle, s_min: f64) -> Result<Vec<Vec<FrequentItemset>>> {
    if !(s_min > 0.0 && s_min < 1.0) {
        return Err(Error::InvalidParams(format!("s_min = {s_min} outside (0, 1)")));
    }
    let k = oracle.db().k();
    let mut levels = Vec::new();
    let mut candidates: BTreeSet<BitString> = (0..k).map(|i| BitString::zeros(k).with_bit(i, true)).collect();
    while !candidates.is_empty() {
        let mut g = Vec::new();
        let mut next = BTreeSet::new();
        for tau in &candidates {
            let s = oracle.support(tau)?;
            if s > s_min {
                g.push(FrequentItemset { itemset: *tau, support: s });
                for i in (0..k).filter(|&i| !tau.bit(i)) {
                    next.insert(tau.with_bit(i, true));
                }
            }
        }
        levels.push(g);
        candidates = next;
    }
    while levels.last().is_some_and(|g: &Vec<FrequentItemset>| g.is_empty()) {
        levels.pop();
    }
    Ok(levels)
}

/// Every itemset with support above `s_min`, by exhaustive enumeration.
pub fn brute_force_frequent(db: &Database, s_min: f64) -> Vec<BitString> {
    BitString::all(db.k())
        .filter(|d| d.count_ones() > 0 && db.mean_of(&Predicate::contains(*d)) > s_min)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub antecedent: BitString,
    pub consequent: BitString,
    pub support: f64,
    pub confidence: f64,
}

/// All rules π ⇒ τ with π ∪ τ frequent, π ∩ τ = ∅, both non-empty and
/// confidence above `c_min`.
pub fn association_rules(levels: &[Vec<FrequentItemset>], oracle: &SupportOracle, c_min: f64) -> Result<Vec<Rule>> {
    let mut out = Vec::new();
    for fi in levels.iter().flatten() {
        let xi = fi.itemset;
        if xi.count_ones() < 2 {
            continue;
        }
        // proper non-empty subsets of xi
        let mut sub = (xi.value() - 1) & xi.value();
        let mut subs = Vec::new();
        while sub != 0 {
            subs.push(sub);
            sub = (sub - 1) & xi.value();
        }
        subs.sort_unstable();
        for pi in subs {
            let pi = BitString::new(xi.width(), pi)?;
            let tau = pi.xor(&xi);
            let sp = oracle.support(&pi)?;
            if sp <= 0.0 {
                return Err(Error::Internal(format!("frequent itemset {xi} has a zero-support subset {pi}")));
            }
            let confidence = fi.support / sp;
            if confidence > c_min {
                out.push(Rule { antecedent: pi, consequent: tau, support: fi.support, confidence });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum DecisionNode {
    Leaf {
        label: bool,
    },
    Split {
        /// Attribute index, 0 = first item.
        attribute: u32,
        /// Attributes tested on the path to this node.
        ancestry: Vec<u32>,
        zero: Box<DecisionNode>,
        one: Box<DecisionNode>,
    },
}

impl DecisionNode {
    pub fn predict(&self, record: &BitString) -> bool {
        match self {
            DecisionNode::Leaf { label } => *label,
            DecisionNode::Split { attribute, zero, one, .. } => {
                if record.bit(*attribute) {
                    one.predict(record)
                } else {
                    zero.predict(record)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            DecisionNode::Leaf { .. } => 0,
            DecisionNode::Split { zero, one, .. } => 1 + zero.depth().max(one.depth()),
        }
    }
}

/// Binary entropy (base 2) of the label split s₀ : s₁, with 0·log 0 = 0.
pub fn entropy(s0: f64, s1: f64) -> f64 {
    let total = s0.max(0.0) + s1.max(0.0);
    if total <= 0.0 {
        return 0.0;
    }
    [s0, s1]
        .iter()
        .map(|s| s.max(0.0) / total)
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Path condition (attribute = value pairs) plus a label, as a pattern over
/// k+1-bit records with the label last.
fn path_predicate(k: u32, path: &[(u32, bool)], label: bool) -> Predicate {
    let mut mask = BitString::zeros(k + 1).with_bit(k, true);
    let mut value = BitString::zeros(k + 1).with_bit(k, label);
    for &(a, v) in path {
        mask = mask.with_bit(a, true);
        value = value.with_bit(a, v);
    }
    Predicate::Pattern { mask, value }
}

/// Decision tree over the k attributes. `oracle` answers queries on the
/// k+1-bit labeled records (see [`SupportOracle::labeled`]). A node becomes a
/// leaf when its label entropy is below `h_min` or no attribute is left; the
/// leaf takes the majority label, 0 on a tie. Otherwise it splits on the
/// attribute with the largest information gain, lowest index on ties.
pub fn decision_tree(oracle: &SupportOracle, h_min: f64) -> Result<DecisionNode> {
    let k = oracle
        .db()
        .k()
        .checked_sub(1)
        .filter(|k| *k > 0)
        .ok_or_else(|| Error::InvalidParams("labeled records need at least one attribute".into()))?;
    grow(oracle, k, &mut Vec::new(), h_min)
}

fn label_supports(oracle: &SupportOracle, k: u32, path: &[(u32, bool)]) -> Result<(f64, f64)> {
    Ok((oracle.support_of(&path_predicate(k, path, false))?, oracle.support_of(&path_predicate(k, path, true))?))
}

fn grow(oracle: &SupportOracle, k: u32, path: &mut Vec<(u32, bool)>, h_min: f64) -> Result<DecisionNode> {
    let (s0, s1) = label_supports(oracle, k, path)?;
    let h = entropy(s0, s1);
    let leaf = DecisionNode::Leaf { label: s1 > s0 };
    let remaining: Vec<u32> = (0..k).filter(|a| path.iter().all(|(b, _)| b != a)).collect();
    if h < h_min || remaining.is_empty() {
        return Ok(leaf);
    }
    let here = s0.max(0.0) + s1.max(0.0);
    let mut best: Option<(u32, f64)> = None;
    for &a in &remaining {
        let mut cond = 0.0;
        for v in [false, true] {
            path.push((a, v));
            let (c0, c1) = label_supports(oracle, k, path)?;
            path.pop();
            let w = if here > 0.0 { (c0.max(0.0) + c1.max(0.0)) / here } else { 0.0 };
            cond += w * entropy(c0, c1);
        }
        let gain = h - cond;
        if best.is_none_or(|(_, g)| gain > g + 1e-12) {
            best = Some((a, gain));
        }
    }
    let (attribute, _) = best.expect("remaining is non-empty");
    let ancestry = path.iter().map(|(a, _)| *a).collect();
    path.push((attribute, false));
    let zero = grow(oracle, k, path, h_min)?;
    path.pop();
    path.push((attribute, true));
    let one = grow(oracle, k, path, h_min)?;
    path.pop();
    Ok(DecisionNode::Split { attribute, ancestry, zero: Box::new(zero), one: Box::new(one) })
}

/// Flips every bit of every transaction independently with probability ρ.
/// Labels are kept.
pub fn randomize_db(db: &Database, rho: f64, rng: &mut Rng) -> Result<Database> {
    if !(0.0..=0.5).contains(&rho) {
        return Err(Error::InvalidParams(format!("ρ = {rho} outside [0, 0.5]")));
    }
    let k = db.k();
    let tx = db
        .transactions()
        .iter()
        .map(|t| {
            let flips = (0..k).fold(0u64, |m, i| if rng.gen::<f64>() < rho { m | (1 << i) } else { m });
            BitString::new(k, t.value() ^ flips)
        })
        .collect::<Result<_>>()?;
    Database::new(k, tx, db.labels().map(<[bool]>::to_vec))
}

/// JSON payload for `mine` output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MiningResult {
    Rules { s_min: f64, c_min: f64, frequent: Vec<Vec<FrequentItemset>>, rules: Vec<Rule>, queries: usize },
    Tree { h_min: f64, tree: DecisionNode, queries: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn db4() -> Database {
        Database::from_strs(&["11", "01", "01", "00"]).unwrap()
    }

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn exact_support_examples() {
        assert_eq!(exact_support(&db4(), &bs("01")).unwrap(), 0.75);
        assert_eq!(exact_support(&db4(), &bs("00")).unwrap(), 1.0);
        assert!(exact_support(&db4(), &bs("011")).is_err());
    }

    #[test]
    fn level_wise_on_small_db() {
        let o = SupportOracle::exact(db4());
        let g = frequent_itemsets(&o, 0.5).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0], vec![FrequentItemset { itemset: bs("01"), support: 0.75 }]);
        let all = Database::from_strs(&["111", "111"]).unwrap();
        let g = frequent_itemsets(&SupportOracle::exact(all), 0.5).unwrap();
        assert_eq!(g.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 1]);
        assert!(frequent_itemsets(&o, 1.0).is_err());
    }

    #[test]
    fn rule_with_full_confidence() {
        let db = Database::from_strs(&["11", "11", "01", "00"]).unwrap();
        let o = SupportOracle::exact(db);
        let g = frequent_itemsets(&o, 0.4).unwrap();
        let rules = association_rules(&g, &o, 0.6).unwrap();
        let r = rules.iter().find(|r| r.antecedent == bs("10")).unwrap();
        assert_eq!((r.consequent, r.support, r.confidence), (bs("01"), 0.5, 1.0));
        assert!(rules.iter().all(|r| r.antecedent.and(&r.consequent).value() == 0));
        assert!(association_rules(&g, &o, 1.0 + 1e-9).unwrap().is_empty());
    }

    #[test]
    fn entropy_edges() {
        assert_eq!(entropy(0.0, 0.3), 0.0);
        assert!((entropy(0.2, 0.2) - 1.0).abs() < 1e-12);
        assert_eq!(entropy(0.0, 0.0), 0.0);
    }

    #[test]
    fn tree_splits_on_the_label_attribute() {
        let text = "000 0\n010 0\n001 0\n011 0\n100 1\n110 1\n101 1\n111 1\n";
        let db = Database::parse(text).unwrap();
        let o = SupportOracle::exact(db.clone()).labeled().unwrap();
        let tree = decision_tree(&o, 0.1).unwrap();
        let want = DecisionNode::Split {
            attribute: 0,
            ancestry: vec![],
            zero: Box::new(DecisionNode::Leaf { label: false }),
            one: Box::new(DecisionNode::Leaf { label: true }),
        };
        assert_eq!(tree, want);
        let constant = Database::parse("00 1\n01 1\n10 1\n11 1\n").unwrap();
        let t = decision_tree(&SupportOracle::exact(constant).labeled().unwrap(), 0.01).unwrap();
        assert_eq!(t, DecisionNode::Leaf { label: true });
    }

    #[test]
    fn tree_forced_leaf_when_attributes_run_out() {
        // label is noise relative to the single attribute
        let db = Database::parse("0 0\n0 1\n1 0\n1 1\n").unwrap();
        let t = decision_tree(&SupportOracle::exact(db).labeled().unwrap(), 0.5).unwrap();
        assert_eq!(t.depth(), 1);
        let DecisionNode::Split { zero, .. } = t else { panic!() };
        assert_eq!(*zero, DecisionNode::Leaf { label: false });
    }

    #[test]
    fn randomizer_edges() {
        let db = Database::parse("01 1\n10 0\n").unwrap();
        let mut rng = stream(1, &[]);
        assert_eq!(randomize_db(&db, 0.0, &mut rng).unwrap(), db);
        let r = randomize_db(&db, 0.5, &mut rng).unwrap();
        assert_eq!((r.len(), r.k(), r.labels()), (2, 2, db.labels()));
        assert!(randomize_db(&db, 0.6, &mut rng).is_err());
    }

    #[test]
    fn protocol_oracle_is_deterministic_and_cached() {
        let params = ProtocolParams::new(2, 2, 5, 3);
        let o = SupportOracle::protocol(db4(), params.clone(), StrategyKind::Trivial);
        let a = o.support(&bs("01")).unwrap();
        assert_eq!(o.support(&bs("01")).unwrap(), a);
        assert_eq!(o.queries(), 1);
        let o2 = SupportOracle::protocol(db4(), params, StrategyKind::Trivial);
        assert_eq!(o2.support(&bs("01")).unwrap(), a);
        assert!((0.0..=1.0).contains(&a));
    }
}

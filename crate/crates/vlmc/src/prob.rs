//! Probabilised context trees: a context tree with a next-letter distribution
//! `q_c` attached to every finite context `c`.

use crate::error::{Result, VlmcError};
use crate::smc::SemiMarkovKernel;
use crate::tree::{stabilize, ContextTree, Stabilization, TreeDescriptor, TreeKind, ZooEntry};
use crate::word::Word;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

/// Tolerance on `Σ_α q_c(α) = 1`.
pub const Q_SUM_TOL: f64 = 1e-12;

/// Depth up to which rule-defined families are validated on infinite trees.
const PROBE_DEPTH: usize = 10;

/// How the distributions `q_c` are assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum QRule {
    /// `q_c(α) = 1/b` for every context.
    Uniform,
    /// Explicit distributions; contexts missing from the table use `fallback`.
    Table {
        table: BTreeMap<Word, Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fallback: Option<Box<QRule>>,
    },
    /// Deterministic pseudo-random positive weights per context, `floor + U[0,1)`, normalised.
    Random {
        seed: u64,
        #[serde(default = "default_floor")]
        floor: f64,
    },
    /// Left comb: `q_{0^k 1}(0) = stay` for all `k`.
    CombStay { stay: f64 },
    /// Left comb: `q_{0^k 1}(0) = (k+1)/(k+2)`.
    CombHarmonic,
    /// Left comb of left combs: `q_{0^p 1 0^q 1}(1) = a[q][p] / (1 - Σ_{k<p} a[q][k])`.
    /// Rows beyond `a` are uniform, columns beyond a row use `1/2`.
    Realisation { a: Vec<Vec<f64>> },
    /// b-comb driven by a semi-Markov kernel: `q_{β^ℓ γ}(α)` is the hazard of
    /// leaving `β` towards `α` at age `ℓ`.
    SemiMarkov { kernel: SemiMarkovKernel },
    /// `q_c = q'_{cont'(c)}` where `cont'` is taken in the source tree.
    Inherited { source: Box<ProbabilisedTree> },
}

fn default_floor() -> f64 {
    0.05
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` attached to `(seed, context, letter)`.
fn hashed_uniform(seed: u64, c: &[u8], letter: u8) -> f64 {
    let mut h = mix(seed ^ 0x5851_f42d_4c95_7f2d);
    for &l in c {
        h = mix(h ^ (l as u64 + 1));
    }
    h = mix(h ^ ((c.len() as u64) << 32) ^ (letter as u64 + 0x100));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// A context tree together with its probabilisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeSpec", try_from = "TreeSpec")]
pub struct ProbabilisedTree {
    tree: ContextTree,
    rule: QRule,
    non_null: bool,
}

/// JSON form: a tree descriptor plus an optional `q` field, either a map
/// `{"010": [0.3, 0.7], ...}` or a rule object `{"rule": "uniform"}`.
/// A missing `q` means uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub alphabet: usize,
    pub kind: TreeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contexts: Option<Vec<Word>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zoo_name: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<QSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QSpec {
    Rule(QRule),
    Map(BTreeMap<Word, Vec<f64>>),
}

impl From<ProbabilisedTree> for TreeSpec {
    fn from(pt: ProbabilisedTree) -> Self {
        let d: TreeDescriptor = pt.tree.into();
        TreeSpec {
            alphabet: d.alphabet,
            kind: d.kind,
            contexts: d.contexts,
            zoo_name: d.zoo_name,
            params: d.params,
            q: Some(QSpec::Rule(pt.rule)),
        }
    }
}

impl TryFrom<TreeSpec> for ProbabilisedTree {
    type Error = VlmcError;

    fn try_from(s: TreeSpec) -> Result<Self> {
        let d = TreeDescriptor {
            alphabet: s.alphabet,
            kind: s.kind,
            contexts: s.contexts,
            zoo_name: s.zoo_name,
            params: s.params,
        };
        let tree = ContextTree::try_from(d)?;
        let rule = match s.q {
            None => QRule::Uniform,
            Some(QSpec::Rule(r)) => r,
            Some(QSpec::Map(table)) => QRule::Table { table, fallback: None },
        };
        ProbabilisedTree::new(tree, rule)
    }
}

impl ProbabilisedTree {
    /// Validates the rule against the tree and computes the non-null flag.
    pub fn new(tree: ContextTree, rule: QRule) -> Result<Self> {
        check_rule_shape(&tree, &rule)?;
        let mut pt = ProbabilisedTree { tree, rule, non_null: true };
        let probe = pt.tree.height().unwrap_or(PROBE_DEPTH);
        let mut all_positive = true;
        for c in pt.tree.contexts_up_to(probe) {
            let q = pt.q(c.as_slice())?;
            if q.len() != pt.tree.alphabet().size() {
                return Err(VlmcError::InvalidProbabilisation(format!(
                    "q[{c}] has {} entries, expected {}",
                    q.len(),
                    pt.tree.alphabet().size()
                )));
            }
            if q.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return Err(VlmcError::InvalidProbabilisation(format!("q[{c}] has a negative or non-finite entry")));
            }
            let s: f64 = q.iter().sum();
            if (s - 1.0).abs() > Q_SUM_TOL {
                return Err(VlmcError::InvalidProbabilisation(format!("q[{c}] sums to {s}, not 1")));
            }
            all_positive &= q.iter().all(|&x| x > 0.0);
        }
        pt.non_null = all_positive && rule_non_null(&pt.rule);
        Ok(pt)
    }

    pub fn uniform(tree: ContextTree) -> Self {
        ProbabilisedTree::new(tree, QRule::Uniform).expect("uniform rule fits every tree")
    }

    pub fn random(tree: ContextTree, seed: u64) -> Self {
        ProbabilisedTree::new(tree, QRule::Random { seed, floor: default_floor() })
            .expect("random rule fits every tree")
    }

    pub fn tree(&self) -> &ContextTree {
        &self.tree
    }

    pub fn rule(&self) -> &QRule {
        &self.rule
    }

    /// Every `q_c(α)` is positive.
    pub fn is_non_null(&self) -> bool {
        self.non_null
    }

    pub fn require_non_null(&self) -> Result<()> {
        if self.non_null {
            Ok(())
        } else {
            Err(VlmcError::NullProbabilisation(format!(
                "some q_c(α) vanishes on {}",
                self.tree.name()
            )))
        }
    }

    /// `q_c` for a finite context `c`.
    pub fn q(&self, c: &[u8]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.tree.alphabet().size()];
        self.q_into(c, &mut out)?;
        Ok(out)
    }

    /// `q_c(α)`.
    pub fn q_letter(&self, c: &[u8], letter: u8) -> Result<f64> {
        match &self.rule {
            QRule::Uniform => Ok(1.0 / self.tree.alphabet().size() as f64),
            _ => Ok(self.q(c)?[letter as usize]),
        }
    }

    /// Writes `q_c` into `out` (length `b`).
    pub fn q_into(&self, c: &[u8], out: &mut [f64]) -> Result<()> {
        eval_rule(&self.rule, &self.tree, c, out)
    }
}

fn check_rule_shape(tree: &ContextTree, rule: &QRule) -> Result<()> {
    let bad = |m: &str| Err(VlmcError::InvalidProbabilisation(m.to_string()));
    match rule {
        QRule::CombStay { stay } => {
            if tree != &ContextTree::Zoo(ZooEntry::LeftComb) {
                return bad("comb_stay applies to left_comb only");
            }
            if !(0.0..=1.0).contains(stay) {
                return bad("comb_stay: stay must lie in [0, 1]");
            }
        }
        QRule::CombHarmonic if tree != &ContextTree::Zoo(ZooEntry::LeftComb) => {
            return bad("comb_harmonic applies to left_comb only");
        }
        QRule::Realisation { a } => {
            if tree != &ContextTree::Zoo(ZooEntry::LcOfLc) {
                return bad("realisation applies to lc_of_lc only");
            }
            for (q, row) in a.iter().enumerate() {
                if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) || row.iter().sum::<f64>() > 1.0 + Q_SUM_TOL {
                    return bad(&format!("realisation: row {q} must be sub-stochastic"));
                }
            }
        }
        QRule::SemiMarkov { kernel } => {
            let ok = matches!(tree, ContextTree::Zoo(ZooEntry::BComb { b }) if *b == kernel.states());
            if !ok {
                return bad("semi_markov applies to b_comb with b equal to the number of states");
            }
            if kernel.has_self_loops() {
                return bad("semi_markov: kernel must have true jumps (no self-transitions)");
            }
        }
        QRule::Random { floor, .. } if !(*floor >= 0.0) => return bad("random: floor must be >= 0"),
        QRule::Table { fallback: Some(f), .. } => check_rule_shape(tree, f)?,
        QRule::Inherited { source } => {
            if !source.tree.internal_up_to(8).iter().all(|x| tree.is_internal(x.as_slice())) {
                return bad("inherited: source tree must be contained in the target tree");
            }
        }
        _ => {}
    }
    Ok(())
}

fn rule_non_null(rule: &QRule) -> bool {
    match rule {
        QRule::Uniform | QRule::CombHarmonic => true,
        QRule::Random { floor, .. } => *floor > 0.0,
        QRule::CombStay { stay } => *stay > 0.0 && *stay < 1.0,
        QRule::Table { table, fallback } => {
            table.values().all(|v| v.iter().all(|&x| x > 0.0)) && fallback.as_deref().is_none_or(rule_non_null)
        }
        QRule::Realisation { a } => a.iter().all(|row| {
            row.iter().all(|&x| x > 0.0) && row.iter().sum::<f64>() < 1.0 - Q_SUM_TOL
        }),
        QRule::SemiMarkov { kernel } => kernel.positivity(),
        QRule::Inherited { source } => source.non_null,
    }
}

fn eval_rule(rule: &QRule, tree: &ContextTree, c: &[u8], out: &mut [f64]) -> Result<()> {
    let b = out.len();
    match rule {
        QRule::Uniform => out.fill(1.0 / b as f64),
        QRule::Table { table, fallback } => match table.get(&Word::from(c)) {
            Some(v) if v.len() == b => out.copy_from_slice(v),
            Some(v) => {
                return Err(VlmcError::InvalidProbabilisation(format!(
                    "q[{}] has {} entries, expected {b}",
                    Word::from(c),
                    v.len()
                )))
            }
            None => match fallback {
                Some(f) => eval_rule(f, tree, c, out)?,
                None => {
                    return Err(VlmcError::InvalidProbabilisation(format!(
                        "no distribution given for context {}",
                        Word::from(c)
                    )))
                }
            },
        },
        QRule::Random { seed, floor } => {
            for (a, o) in out.iter_mut().enumerate() {
                *o = floor + hashed_uniform(*seed, c, a as u8);
            }
            let s: f64 = out.iter().sum();
            out.iter_mut().for_each(|x| *x /= s);
        }
        QRule::CombStay { stay } => {
            out[0] = *stay;
            out[1] = 1.0 - stay;
        }
        QRule::CombHarmonic => {
            let k = c.len().saturating_sub(1) as f64;
            out[0] = (k + 1.0) / (k + 2.0);
            out[1] = 1.0 / (k + 2.0);
        }
        QRule::Realisation { a } => {
            let p = c.iter().take_while(|&&x| x == 0).count();
            let q = c.len().saturating_sub(p + 2);
            let one = match a.get(q) {
                None => 0.5,
                Some(row) if p < row.len() => {
                    let rest = 1.0 - row[..p].iter().sum::<f64>();
                    if rest > 0.0 {
                        (row[p] / rest).clamp(0.0, 1.0)
                    } else {
                        0.5
                    }
                }
                Some(_) => 0.5,
            };
            out[1] = one;
            out[0] = 1.0 - one;
        }
        QRule::SemiMarkov { kernel } => {
            let from = c[0] as usize;
            let age = c.len() - 1;
            kernel.hazard_into(from, age, out);
        }
        QRule::Inherited { source } => {
            let n = source.tree.cont_len(c).ok_or_else(|| {
                VlmcError::InvalidProbabilisation(format!("{} is internal in the source tree", Word::from(c)))
            })?;
            source.q_into(&c[..n], out)?;
        }
    }
    Ok(())
}

/// Re-probabilises the stabilized tree so that it defines the same chain:
/// `q̂_c = q_{cont(c)}` with `cont` relative to the original tree.
pub fn reprobabilise_stabilized(pt: &ProbabilisedTree, depth_bound: usize) -> Result<ProbabilisedTree> {
    match stabilize(&pt.tree, depth_bound) {
        Stabilization::Stabilized(t) if t == pt.tree => Ok(pt.clone()),
        Stabilization::Stabilized(t) => {
            ProbabilisedTree::new(t, QRule::Inherited { source: Box::new(pt.clone()) })
        }
        Stabilization::NotStabilizable { evidence } => Err(VlmcError::NotStabilizable(evidence)),
        Stabilization::Truncated { depth, .. } => Err(VlmcError::NotStabilizable(format!(
            "stabilized tree not determined (shift-closure computed to depth {depth} only)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::w;

    #[test]
    fn json_forms() {
        let pt: ProbabilisedTree = serde_json::from_str(
            r#"{"alphabet":2,"kind":"explicit","contexts":["0","10","11"],
                "q":{"0":[0.3,0.7],"10":[0.5,0.5],"11":[1.0,0.0]}}"#,
        )
        .unwrap();
        assert!(!pt.is_non_null());
        assert_eq!(pt.q(w("10").as_slice()).unwrap(), vec![0.5, 0.5]);
        let back: ProbabilisedTree = serde_json::from_str(&serde_json::to_string(&pt).unwrap()).unwrap();
        assert_eq!(back, pt);

        let r: ProbabilisedTree = serde_json::from_str(
            r#"{"alphabet":2,"kind":"zoo","zoo_name":"left_comb","q":{"rule":"comb_harmonic"}}"#,
        )
        .unwrap();
        assert!((r.q_letter(w("0001").as_slice(), 0).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn json_errors() {
        let e = serde_json::from_str::<ProbabilisedTree>(
            r#"{"alphabet":2,"kind":"explicit","contexts":["0","10","11"],"q":{"0":[0.3,0.6],"10":[0.5,0.5],"11":[1,0]}}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("q[0]"), "{e}");
        let e = serde_json::from_str::<ProbabilisedTree>(
            r#"{"alphabet":2,"kind":"explicit","contexts":["0","10","11"],"q":{"0":[0.5,0.5]}}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("10"), "{e}");
        let e = serde_json::from_str::<ProbabilisedTree>(r#"{"alphabet":2,"kind":"explicit","contexts":["0","10","11"],"bogus":1}"#)
            .unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn random_rule_is_deterministic_and_positive() {
        let t = ContextTree::zoo("lc_of_rc").unwrap();
        let a = ProbabilisedTree::random(t.clone(), 7);
        let b = ProbabilisedTree::random(t, 7);
        assert!(a.is_non_null());
        assert_eq!(a.q(w("0110").as_slice()).unwrap(), b.q(w("0110").as_slice()).unwrap());
        assert_ne!(a.q(w("0110").as_slice()).unwrap(), a.q(w("00110").as_slice()).unwrap());
    }

    #[test]
    fn rule_shape_checks() {
        assert!(ProbabilisedTree::new(ContextTree::zoo("lc_of_rc").unwrap(), QRule::CombHarmonic).is_err());
        let lc = ContextTree::zoo("lc_of_lc").unwrap();
        assert!(ProbabilisedTree::new(lc, QRule::Realisation { a: vec![vec![0.7, 0.6]] }).is_err());
    }

    #[test]
    fn bamboo_reprobabilised() {
        let mut table = BTreeMap::new();
        table.insert(w("1"), vec![0.2, 0.8]);
        let rule = QRule::Table { table, fallback: Some(Box::new(QRule::Random { seed: 3, floor: 0.1 })) };
        let pt = ProbabilisedTree::new(ContextTree::zoo("bamboo_blossom").unwrap(), rule).unwrap();
        let st = reprobabilise_stabilized(&pt, 12).unwrap();
        assert_eq!(st.tree(), &ContextTree::zoo("double_bamboo").unwrap());
        // right-side contexts inherit q_1
        for c in ["11", "100", "1011", "10100"] {
            assert_eq!(st.q(w(c).as_slice()).unwrap(), vec![0.2, 0.8], "{c}");
        }
        for c in ["00", "011", "0100", "01011"] {
            assert_eq!(st.q(w(c).as_slice()).unwrap(), pt.q(w(c).as_slice()).unwrap(), "{c}");
        }
        let u = ProbabilisedTree::uniform(ContextTree::zoo("bamboo_blossom").unwrap());
        let su = reprobabilise_stabilized(&u, 12).unwrap();
        assert_eq!(su.q(w("1011").as_slice()).unwrap(), vec![0.5, 0.5]);
        let lc = ProbabilisedTree::uniform(ContextTree::zoo("left_comb").unwrap());
        assert_eq!(reprobabilise_stabilized(&lc, 12).unwrap(), lc);
        let fil = ProbabilisedTree::uniform(ContextTree::zoo("filament_all_words").unwrap());
        assert!(reprobabilise_stabilized(&fil, 12).is_err());
    }
}

//! Registry of infinite context trees with exact classification oracles.
//!
//! Each entry describes its internal-node set by a linear scan that returns the
//! length of the longest internal prefix of a word.

use crate::error::{Result, VlmcError};
use crate::tree::explicit::ExplicitTree;
use crate::tree::ContextTree;
use crate::word::{Alphabet, Word};
use serde_json::Value;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Parametric infinite trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ZooEntry {
    /// Contexts `0^n 1`, infinite branch `0^∞`.
    LeftComb,
    /// Contexts `α^k β` with `α ≠ β`, `k ≥ 1`.
    BComb { b: usize },
    /// Spine `(01)^∞`; contexts `(01)^n 1` and `(01)^n 00`.
    BambooBlossom,
    /// Spines `(01)^∞` and `(10)^∞`.
    DoubleBamboo,
    /// Infinite branches `(01)^∞` and `1^∞`.
    AlternatingOnes,
    /// Infinite branches `(01)^∞`, `01^∞` and `1^∞`.
    ThreeBranch,
    /// Left comb of right combs: contexts `0^p 1^q 0`, `q ≥ 1`.
    LcOfRc,
    /// As [`ZooEntry::LcOfRc`] with the context `10` split into `100` and `101`.
    LcOfRcCherry,
    /// Left comb of left combs: contexts `0^p 1 0^q 1`.
    LcOfLc,
    /// Smallest tree containing every shift of `a = 1 0 1 00 1 000 1 ...`.
    ArithStable,
    /// Single infinite branch: all binary words concatenated in length-then-lex order.
    FilamentAllWords,
    /// Single infinite branch `0 1 00 11 000 111 ...`.
    FilamentBlocks,
}

/// One line of the registry listing.
#[derive(Debug, Clone)]
pub struct ZooInfo {
    pub name: &'static str,
    pub params: &'static str,
    pub description: &'static str,
}

pub const REGISTRY: &[ZooInfo] = &[
    ZooInfo { name: "left_comb", params: "", description: "contexts 0^n1, infinite branch 0^inf; stable" },
    ZooInfo { name: "b_comb", params: "b (default 2)", description: "contexts a^k c (a != c, k >= 1); stable" },
    ZooInfo { name: "bamboo_blossom", params: "", description: "spine (01)^inf, contexts (01)^n1 and (01)^n00; not stable" },
    ZooInfo { name: "double_bamboo", params: "", description: "spines (01)^inf and (10)^inf; stable" },
    ZooInfo { name: "alternating_ones", params: "", description: "infinite branches (01)^inf and 1^inf; not stable" },
    ZooInfo { name: "three_branch", params: "", description: "infinite branches (01)^inf, 01^inf, 1^inf; infinite alpha-LIS set" },
    ZooInfo { name: "lc_of_rc", params: "", description: "left comb of right combs, contexts 0^p1^q0; stable, single alpha-LIS 10" },
    ZooInfo { name: "lc_of_rc_cherry", params: "", description: "lc_of_rc with context 10 split into 100, 101; stable, four alpha-LIS" },
    ZooInfo { name: "lc_of_lc", params: "", description: "left comb of left combs, contexts 0^p10^q1; stable, alpha-LIS 10^q1" },
    ZooInfo { name: "arith_stable", params: "", description: "tree spanned by the shifts of 1 0 1 00 1 000 1 ...; stable" },
    ZooInfo { name: "filament_all_words", params: "", description: "single branch through every finite word; not stabilizable" },
    ZooInfo { name: "filament_blocks", params: "", description: "single branch 0 1 00 11 000 111 ...; not stable" },
    ZooInfo { name: "four_contexts", params: "", description: "finite tree {1, 00, 010, 011}; not stable" },
    ZooInfo { name: "nine_contexts", params: "", description: "finite stable tree of height 4 with nine contexts" },
];

/// Builds a registered tree.
pub fn zoo(name: &str, params: &BTreeMap<String, Value>) -> Result<ContextTree> {
    let allowed: &[&str] = if name == "b_comb" { &["b"] } else { &[] };
    if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(VlmcError::ZooParams(format!("{name} takes no parameter {k:?}")));
    }
    let bin = Alphabet::new(2)?;
    let entry = match name {
        "left_comb" => ZooEntry::LeftComb,
        "b_comb" => {
            let b = match params.get("b") {
                None => 2,
                Some(v) => v
                    .as_u64()
                    .ok_or_else(|| VlmcError::ZooParams("b must be an integer".into()))?
                    as usize,
            };
            Alphabet::new(b).map_err(|e| VlmcError::ZooParams(e.to_string()))?;
            ZooEntry::BComb { b }
        }
        "bamboo_blossom" => ZooEntry::BambooBlossom,
        "double_bamboo" => ZooEntry::DoubleBamboo,
        "alternating_ones" => ZooEntry::AlternatingOnes,
        "three_branch" => ZooEntry::ThreeBranch,
        "lc_of_rc" => ZooEntry::LcOfRc,
        "lc_of_rc_cherry" => ZooEntry::LcOfRcCherry,
        "lc_of_lc" => ZooEntry::LcOfLc,
        "arith_stable" => ZooEntry::ArithStable,
        "filament_all_words" => ZooEntry::FilamentAllWords,
        "filament_blocks" => ZooEntry::FilamentBlocks,
        "four_contexts" => {
            let cs = ["1", "00", "010", "011"].iter().map(|s| crate::word::w(s)).collect();
            return Ok(ContextTree::Explicit(Arc::new(ExplicitTree::new(bin, cs)?)));
        }
        "nine_contexts" => {
            let cs = ["000", "0010", "0011", "010", "0110", "0111", "10", "110", "111"]
                .iter()
                .map(|s| crate::word::w(s))
                .collect();
            return Ok(ContextTree::Explicit(Arc::new(ExplicitTree::new(bin, cs)?)));
        }
        _ => return Err(VlmcError::UnknownZoo(name.to_string())),
    };
    Ok(ContextTree::Zoo(entry))
}

fn alternating_match(w: &[u8], first: u8) -> usize {
    w.iter().enumerate().take_while(|&(i, &l)| l == (first + i as u8) % 2).count()
}

fn run_len(w: &[u8], letter: u8) -> usize {
    w.iter().take_while(|&&l| l == letter).count()
}

fn filament_prefix(n: usize, all_words: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(n + 64);
    let mut m = 1usize;
    while out.len() < n {
        if all_words {
            for x in 0..(1u64 << m.min(40)) {
                for j in (0..m).rev() {
                    out.push(((x >> j) & 1) as u8);
                }
                if out.len() >= n {
                    break;
                }
            }
        } else {
            out.extend(std::iter::repeat_n(0u8, m));
            out.extend(std::iter::repeat_n(1u8, m));
        }
        m += 1;
    }
    out.truncate(n);
    out
}

/// Longest prefix of `w` that is a factor of `1 0 1 00 1 000 1 ...`.
fn arith_internal_prefix_len(w: &[u8]) -> usize {
    let (mut ones, mut cur, mut e0, mut prev) = (0usize, 0usize, 0usize, 0usize);
    for (i, &x) in w.iter().enumerate() {
        if x == 0 {
            if ones >= 2 && cur + 1 > prev + 1 {
                return i;
            }
            cur += 1;
        } else {
            match ones {
                0 => e0 = cur,
                1 => {
                    if cur < 1 || e0 + 1 > cur {
                        return i;
                    }
                    prev = cur;
                }
                _ => {
                    if cur != prev + 1 {
                        return i;
                    }
                    prev = cur;
                }
            }
            ones += 1;
            cur = 0;
        }
    }
    w.len()
}

impl ZooEntry {
    pub fn name(&self) -> &'static str {
        match self {
            ZooEntry::LeftComb => "left_comb",
            ZooEntry::BComb { .. } => "b_comb",
            ZooEntry::BambooBlossom => "bamboo_blossom",
            ZooEntry::DoubleBamboo => "double_bamboo",
            ZooEntry::AlternatingOnes => "alternating_ones",
            ZooEntry::ThreeBranch => "three_branch",
            ZooEntry::LcOfRc => "lc_of_rc",
            ZooEntry::LcOfRcCherry => "lc_of_rc_cherry",
            ZooEntry::LcOfLc => "lc_of_lc",
            ZooEntry::ArithStable => "arith_stable",
            ZooEntry::FilamentAllWords => "filament_all_words",
            ZooEntry::FilamentBlocks => "filament_blocks",
        }
    }

    pub fn params(&self) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        if let ZooEntry::BComb { b } = self {
            m.insert("b".to_string(), Value::from(*b as u64));
        }
        m
    }

    pub fn alphabet(&self) -> Alphabet {
        match self {
            ZooEntry::BComb { b } => Alphabet::new(*b).expect("validated at construction"),
            _ => Alphabet::new(2).expect("binary"),
        }
    }

    /// Length of the longest internal prefix of `w`.
    pub fn internal_prefix_len(&self, w: &[u8]) -> usize {
        match self {
            ZooEntry::LeftComb => run_len(w, 0),
            ZooEntry::BComb { .. } => w.first().map_or(0, |&a| run_len(w, a)),
            ZooEntry::BambooBlossom => alternating_match(w, 0),
            ZooEntry::DoubleBamboo => alternating_match(w, 0).max(alternating_match(w, 1)),
            ZooEntry::AlternatingOnes => alternating_match(w, 0).max(run_len(w, 1)),
            ZooEntry::ThreeBranch => {
                let mut best = alternating_match(w, 0);
                if w.len() >= 2 && w[0] == 0 && w[1] == 1 {
                    best = best.max(1 + run_len(&w[1..], 1));
                }
                let q = run_len(w, 1);
                if q >= 1 {
                    best = best.max(if w.len() > q { q + 1 } else { q });
                }
                best
            }
            ZooEntry::LcOfRc | ZooEntry::LcOfRcCherry => {
                let p = run_len(w, 0);
                let l = p + run_len(&w[p..], 1);
                if *self == ZooEntry::LcOfRcCherry && w.len() >= 2 && w[0] == 1 && w[1] == 0 {
                    2
                } else {
                    l
                }
            }
            ZooEntry::LcOfLc => {
                let p = run_len(w, 0);
                if w.len() > p {
                    p + 1 + run_len(&w[p + 1..], 0)
                } else {
                    p
                }
            }
            ZooEntry::ArithStable => arith_internal_prefix_len(w),
            ZooEntry::FilamentAllWords | ZooEntry::FilamentBlocks => {
                let u = filament_prefix(w.len(), *self == ZooEntry::FilamentAllWords);
                w.iter().zip(&u).take_while(|(a, b)| a == b).count()
            }
        }
    }

    /// Whether the entry carries a proof that the tree is stable by the shift.
    pub fn stability_certificate(&self) -> bool {
        matches!(
            self,
            ZooEntry::LeftComb
                | ZooEntry::BComb { .. }
                | ZooEntry::DoubleBamboo
                | ZooEntry::LcOfRc
                | ZooEntry::LcOfRcCherry
                | ZooEntry::LcOfLc
                | ZooEntry::ArithStable
        )
    }

    /// The stabilized tree when it is known in closed form.
    pub fn known_stabilized(&self) -> Option<ZooEntry> {
        match self {
            ZooEntry::BambooBlossom => Some(ZooEntry::DoubleBamboo),
            e if e.stability_certificate() => Some(e.clone()),
            _ => None,
        }
    }

    /// The complete alpha-LIS set when it is finite and known.
    pub fn finite_alpha_lis(&self) -> Option<Vec<Word>> {
        let ws = |v: &[&str]| Some(v.iter().map(|s| crate::word::w(s)).collect::<Vec<_>>());
        match self {
            ZooEntry::LeftComb => ws(&["1"]),
            ZooEntry::BComb { b } => {
                let mut v = Vec::new();
                for a in 0..*b as u8 {
                    for c in 0..*b as u8 {
                        if a != c {
                            v.push(Word::from_letters(vec![a, c]));
                        }
                    }
                }
                v.sort();
                Some(v)
            }
            ZooEntry::BambooBlossom => ws(&["1", "00"]),
            ZooEntry::DoubleBamboo => ws(&["00", "11"]),
            ZooEntry::AlternatingOnes => ws(&["00", "10", "011"]),
            ZooEntry::LcOfRc => ws(&["10"]),
            ZooEntry::LcOfRcCherry => ws(&["010", "100", "101", "110"]),
            _ => None,
        }
    }

    /// Symbolic description of the alpha-LIS families.
    pub fn alpha_lis_families(&self) -> Vec<&'static str> {
        match self {
            ZooEntry::ThreeBranch => vec!["00", "101", "1011", "01^r0 (r>=2)"],
            ZooEntry::LcOfLc => vec!["10^q1 (q>=0)"],
            ZooEntry::ArithStable => vec!["0^q10^q1 (q>=0)", "10^N10^(N+2) (N>=1)"],
            _ => vec![],
        }
    }

    pub fn infinite_branches(&self) -> Vec<&'static str> {
        match self {
            ZooEntry::LeftComb => vec!["0^inf"],
            ZooEntry::BComb { .. } => vec!["a^inf for every letter a"],
            ZooEntry::BambooBlossom => vec!["(01)^inf"],
            ZooEntry::DoubleBamboo => vec!["(01)^inf", "(10)^inf"],
            ZooEntry::AlternatingOnes => vec!["(01)^inf", "1^inf"],
            ZooEntry::ThreeBranch => vec!["(01)^inf", "01^inf", "1^inf"],
            ZooEntry::LcOfRc | ZooEntry::LcOfRcCherry => vec!["0^inf", "0^p1^inf (p>=0)"],
            ZooEntry::LcOfLc => vec!["0^inf", "0^p10^inf (p>=0)"],
            ZooEntry::ArithStable => vec!["every shift of a", "0^inf", "0^n10^inf (n>=0)"],
            ZooEntry::FilamentAllWords => vec!["concatenation of all words"],
            ZooEntry::FilamentBlocks => vec!["0 1 00 11 000 111 ..."],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::NodeClass;
    use crate::word::w;

    fn tree(name: &str) -> ContextTree {
        zoo(name, &BTreeMap::new()).unwrap()
    }

    fn arith_word(ones: usize) -> Vec<u8> {
        let mut a = vec![1u8];
        for j in 1..ones {
            a.extend(std::iter::repeat_n(0, j));
            a.push(1);
        }
        a
    }

    #[test]
    fn arith_internal_nodes_are_factors() {
        let a = arith_word(60);
        let bin = Alphabet::new(2).unwrap();
        for n in 0..=13 {
            for x in bin.words_of_len(n) {
                let s = x.as_slice();
                let factor = n == 0 || a.windows(n).any(|win| win == s);
                assert_eq!(arith_internal_prefix_len(s) == n, factor, "word {x}");
            }
        }
    }

    #[test]
    fn filament_prefixes() {
        assert_eq!(filament_prefix(12, true), vec![0, 1, 0, 0, 0, 1, 1, 0, 1, 1, 0, 0]);
        assert_eq!(filament_prefix(8, false), vec![0, 1, 0, 0, 1, 1, 0, 0]);
    }

    #[test]
    fn classification_examples() {
        let t = tree("alternating_ones");
        assert_eq!(t.class_of(w("01011").as_slice()), NodeClass::Context);
        assert_eq!(t.cont(&w("010111101000")).unwrap(), w("01011"));
        let e = tree("three_branch");
        assert_eq!(e.class_of(w("10100").as_slice()), NodeClass::External);
        // 010100 = (01)^2 00 is itself a context; 0100 is not one of its prefixes
        assert_eq!(e.cont(&w("010100")).unwrap(), w("010100"));
        assert_eq!(e.cont(&w("0100111")).unwrap(), w("0100"));
    }

    #[test]
    fn three_branch_context_families() {
        let e = tree("three_branch");
        let cs = e.contexts_up_to(7);
        for c in &cs {
            let s = c.to_string();
            let ok = is_family(&s);
            assert!(ok, "unexpected context {s}");
        }
        fn is_family(s: &str) -> bool {
            let b = s.as_bytes();
            let alt = |t: &[u8]| t.chunks(2).all(|ch| ch == b"01");
            (s.ends_with("00") && alt(&b[..b.len() - 2]))
                || (s.ends_with('1') && b.len() >= 5 && alt(&b[..b.len() - 1]) && (b.len() - 1) % 2 == 0)
                || (s.starts_with('0') && s.ends_with('0') && b.len() >= 4 && b[1..b.len() - 1].iter().all(|&x| x == b'1'))
                || (s.ends_with("00") && b.len() >= 3 && b[..b.len() - 2].iter().all(|&x| x == b'1'))
                || (s.ends_with("01") && b.len() >= 3 && b[..b.len() - 2].iter().all(|&x| x == b'1'))
        }
        assert!(cs.contains(&w("0100")) && cs.contains(&w("01011")) && cs.contains(&w("0110")));
        assert!(cs.contains(&w("1101")) && cs.contains(&w("100")));
    }

    #[test]
    fn b_comb_contexts() {
        let mut p = BTreeMap::new();
        p.insert("b".into(), Value::from(4));
        let t = zoo("b_comb", &p).unwrap();
        for c in t.contexts_up_to(5) {
            let s = c.as_slice();
            let k = s.len() - 1;
            assert!(s[..k].iter().all(|&x| x == s[0]) && s[k] != s[0], "{c}");
        }
        assert_eq!(t.contexts_up_to(3).len(), 12 * 2);
    }

    #[test]
    fn unknown_names_and_params() {
        assert!(matches!(zoo("nope", &BTreeMap::new()), Err(VlmcError::UnknownZoo(_))));
        let mut p = BTreeMap::new();
        p.insert("x".into(), Value::from(1));
        assert!(zoo("left_comb", &p).is_err());
        p.clear();
        p.insert("b".into(), Value::from(1));
        assert!(zoo("b_comb", &p).is_err());
    }

    #[test]
    fn cherry_contexts() {
        let t = tree("lc_of_rc_cherry");
        let cs = t.contexts_up_to(3);
        assert_eq!(cs, vec![w("010"), w("100"), w("101"), w("110")]);
        let r = tree("lc_of_rc");
        assert_eq!(r.contexts_up_to(2), vec![w("10")]);
    }

    #[test]
    fn double_bamboo_contexts() {
        let t = tree("double_bamboo");
        assert_eq!(t.contexts_up_to(4), vec![w("00"), w("11"), w("011"), w("100"), w("0100"), w("1011")]);
    }
}

//! Longest-internal-suffix decompositions and the set of context alpha-LIS.

use crate::error::{Result, VlmcError};
use crate::tree::{is_stable, ContextTree, ZooEntry};
use crate::word::Word;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashSet};

/// `w = head · alpha · lis` where `lis` is the longest internal strict suffix of `w`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlphaLisDecomposition {
    pub head: Word,
    pub alpha: u8,
    pub lis: Word,
}

impl AlphaLisDecomposition {
    /// Number of letters before the alpha-LIS.
    pub fn p(&self) -> usize {
        self.head.len()
    }

    pub fn alpha_lis(&self) -> Word {
        self.lis.prepend(self.alpha)
    }
}

/// Position where the alpha-LIS of a non-empty `w` starts: the smallest `k ≥ 1`
/// with `w[k..]` internal, minus one.
pub fn alpha_lis_start(tree: &ContextTree, w: &[u8]) -> usize {
    debug_assert!(!w.is_empty());
    (1..=w.len())
        .find(|&k| tree.is_internal(&w[k..]))
        .expect("the empty suffix is internal")
        - 1
}

pub fn alpha_lis(tree: &ContextTree, w: &Word) -> Result<AlphaLisDecomposition> {
    if w.is_empty() {
        return Err(VlmcError::EmptyWord);
    }
    tree.alphabet().check(w.as_slice())?;
    let p = alpha_lis_start(tree, w.as_slice());
    let s = w.as_slice();
    Ok(AlphaLisDecomposition { head: Word::from(&s[..p]), alpha: s[p], lis: Word::from(&s[p + 1..]) })
}

/// How complete the listed entries are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "depth", rename_all = "snake_case")]
pub enum Exactness {
    /// The entries are the whole (finite) set.
    Exact,
    /// The set is infinite; every member of length at most `depth` is listed.
    ExactUpTo(usize),
    /// Entries found among contexts of length at most `depth`; members may be missing.
    TruncatedAtDepth(usize),
}

/// Finite contexts of a tree up to some length, with their alpha-LIS, grouped by fiber.
#[derive(Debug, Clone)]
pub struct Census {
    depth: usize,
    fibers: BTreeMap<Word, Vec<Word>>,
}

impl Census {
    /// Enumerates the contexts of length at most `depth`.
    pub fn new(tree: &ContextTree, depth: usize) -> Self {
        let contexts = tree.contexts_up_to(depth);
        let tagged: Vec<(Word, usize)> = contexts
            .into_par_iter()
            .map(|c| {
                let p = alpha_lis_start(tree, c.as_slice());
                (c, p)
            })
            .collect();
        let mut fibers: BTreeMap<Word, Vec<Word>> = BTreeMap::new();
        for (c, p) in tagged {
            fibers.entry(Word::from(&c.as_slice()[p..])).or_default().push(c);
        }
        Census { depth, fibers }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Alpha-LIS values seen, length-then-lex.
    pub fn alpha_lis(&self) -> impl Iterator<Item = &Word> {
        self.fibers.keys()
    }

    /// Contexts of the fiber, length-then-lex (empty slice for unseen words).
    pub fn fiber(&self, alpha_lis: &Word) -> &[Word] {
        self.fibers.get(alpha_lis).map_or(&[], Vec::as_slice)
    }
}

/// The set `S` of context alpha-LIS, possibly truncated.
#[derive(Debug, Clone)]
pub struct AlphaLisSet {
    tree: ContextTree,
    entries: Vec<Word>,
    members: HashSet<Word>,
    exactness: Exactness,
    stable: bool,
}

/// Members of length at most `max_len` of the known families of the three-branch tree.
fn three_branch_members(max_len: usize) -> Vec<Word> {
    let mut v: Vec<Word> = ["00", "101", "1011"].iter().map(|s| crate::word::w(s)).filter(|x| x.len() <= max_len).collect();
    for r in 2..=max_len.saturating_sub(2) {
        let mut x = vec![0u8];
        x.extend(std::iter::repeat_n(1u8, r));
        x.push(0);
        v.push(Word::from_letters(x));
    }
    v.sort();
    v
}

pub fn alpha_lis_set(tree: &ContextTree, depth: usize) -> AlphaLisSet {
    let depth = depth.max(1);
    let stable = is_stable(tree, depth.min(12)).is_stable();
    let (entries, exactness) = match tree {
        ContextTree::Explicit(e) => {
            let c = Census::new(tree, e.height());
            (c.alpha_lis().cloned().collect(), Exactness::Exact)
        }
        ContextTree::Zoo(z) => {
            if let Some(v) = z.finite_alpha_lis() {
                (v, Exactness::Exact)
            } else if *z == ZooEntry::ThreeBranch {
                (three_branch_members(depth), Exactness::ExactUpTo(depth))
            } else {
                // on stable trees every context alpha-LIS is itself a context
                let c = Census::new(tree, depth);
                let entries = c.alpha_lis().filter(|x| x.len() <= depth).cloned().collect();
                if stable {
                    (entries, Exactness::ExactUpTo(depth))
                } else {
                    (entries, Exactness::TruncatedAtDepth(depth))
                }
            }
        }
    };
    let members = entries.iter().cloned().collect();
    AlphaLisSet { tree: tree.clone(), entries, members, exactness, stable }
}

impl AlphaLisSet {
    pub fn entries(&self) -> &[Word] {
        &self.entries
    }

    pub fn exactness(&self) -> Exactness {
        self.exactness
    }

    pub fn is_finite(&self) -> bool {
        self.exactness == Exactness::Exact
    }

    pub fn tree(&self) -> &ContextTree {
        &self.tree
    }

    /// Membership of `x` in `S`. Exact for listed lengths, for finite sets and on
    /// stable trees (a context `x` belongs to `S` iff its shift is internal).
    pub fn contains(&self, x: &[u8]) -> bool {
        match self.exactness {
            Exactness::Exact => self.members.contains(&Word::from(x)),
            Exactness::ExactUpTo(d) | Exactness::TruncatedAtDepth(d) if x.len() <= d => {
                self.members.contains(&Word::from(x))
            }
            _ if self.stable => {
                !x.is_empty() && self.tree.cont_len(x) == Some(x.len()) && self.tree.is_internal(&x[1..])
            }
            _ => match &self.tree {
                ContextTree::Zoo(ZooEntry::ThreeBranch) => three_branch_members(x.len()).iter().any(|m| m.as_slice() == x),
                _ => false,
            },
        }
    }

    /// Finite contexts `c` with `|c| ≤ max_len` whose alpha-LIS is `alpha_lis`, length-then-lex.
    pub fn fiber(&self, alpha_lis: &Word, max_len: usize) -> Result<Vec<Word>> {
        if !self.contains(alpha_lis.as_slice()) {
            return Err(VlmcError::NotAlphaLis(alpha_lis.to_string()));
        }
        Ok(fiber_of(&self.tree, alpha_lis, max_len))
    }
}

/// Contexts of length at most `max_len` with the given alpha-LIS.
pub fn fiber_of(tree: &ContextTree, alpha_lis: &Word, max_len: usize) -> Vec<Word> {
    let n = alpha_lis.len();
    tree.contexts_up_to(max_len)
        .into_iter()
        .filter(|c| c.len() >= n && c.as_slice().ends_with(alpha_lis.as_slice()))
        .filter(|c| alpha_lis_start(tree, c.as_slice()) == c.len() - n)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::{w, Alphabet};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn zoo(n: &str) -> ContextTree {
        ContextTree::zoo(n).unwrap()
    }

    /// Reference: scan every strict suffix from the longest and stop at the first internal one.
    fn brute_alpha_lis(tree: &ContextTree, w: &Word) -> (usize, Word) {
        let s = w.as_slice();
        for k in 1..=s.len() {
            let suffix = &s[k..];
            let mut internal = true;
            for j in 0..=suffix.len() {
                if tree.class_of(&suffix[..j]) != crate::tree::NodeClass::Internal {
                    internal = false;
                }
            }
            if internal {
                return (k - 1, Word::from(&s[k - 1..]));
            }
        }
        unreachable!()
    }

    #[test]
    fn decompositions() {
        let t = zoo("three_branch");
        let d = alpha_lis(&t, &w("010100")).unwrap();
        assert_eq!((d.head.clone(), d.alpha, d.lis.clone()), (w("0101"), 0, w("0")));
        assert_eq!(d.p(), 4);
        let d = alpha_lis(&t, &w("1")).unwrap();
        assert_eq!((d.head, d.alpha, d.lis), (w(""), 1, w("")));
        assert_eq!(alpha_lis(&t, &w("1101")).unwrap().alpha_lis(), w("101"));
        assert_eq!(alpha_lis(&t, &Word::empty()), Err(VlmcError::EmptyWord));
    }

    #[test]
    fn alpha_lis_sets() {
        let four = zoo("four_contexts");
        let s = alpha_lis_set(&four, 4);
        let mut want = vec![w("00"), w("10"), w("1")];
        want.sort();
        assert_eq!(s.entries(), &want[..]);
        assert_eq!(s.exactness(), Exactness::Exact);

        let s = alpha_lis_set(&zoo("lc_of_rc"), 10);
        assert_eq!(s.entries(), &[w("10")]);
        let fib = s.fiber(&w("10"), 6).unwrap();
        assert_eq!(fib, zoo("lc_of_rc").contexts_up_to(6));

        let nine = zoo("nine_contexts");
        let s = alpha_lis_set(&nine, 4);
        assert_eq!(s.fiber(&w("10"), 4).unwrap(), vec![w("10"), w("010"), w("110"), w("0010"), w("0110")]);
        assert_eq!(s.fiber(&w("000"), 4).unwrap(), vec![w("000")]);
        assert!(s.fiber(&w("01"), 4).is_err());

        let s = alpha_lis_set(&zoo("left_comb"), 5);
        assert_eq!(s.fiber(&w("1"), 3).unwrap(), vec![w("1"), w("01"), w("001")]);
    }

    #[test]
    fn three_branch_families_match_census() {
        let t = zoo("three_branch");
        let census = Census::new(&t, 13);
        let found: Vec<Word> = census.alpha_lis().cloned().collect();
        let fam = three_branch_members(13);
        for x in &found {
            assert!(fam.contains(x), "{x} not in the families");
        }
        for x in three_branch_members(7) {
            assert!(found.contains(&x), "{x} not found among contexts");
        }
    }

    #[test]
    fn finite_zoo_sets_match_census() {
        for n in ["left_comb", "bamboo_blossom", "double_bamboo", "alternating_ones", "lc_of_rc", "lc_of_rc_cherry"] {
            let t = zoo(n);
            let c = Census::new(&t, 12);
            let found: Vec<Word> = c.alpha_lis().cloned().collect();
            assert_eq!(found, alpha_lis_set(&t, 12).entries(), "{n}");
        }
        let t = ContextTree::zoo("b_comb").unwrap();
        let c = Census::new(&t, 6);
        assert_eq!(c.alpha_lis().cloned().collect::<Vec<_>>(), alpha_lis_set(&t, 6).entries());
    }

    #[test]
    fn stable_tree_suffix_properties() {
        for n in ["left_comb", "lc_of_rc", "lc_of_rc_cherry", "lc_of_lc", "double_bamboo", "nine_contexts", "arith_stable"] {
            let t = zoo(n);
            let depth = if n == "arith_stable" { 12 } else { 10 };
            let set = alpha_lis_set(&t, depth);
            for x in set.entries() {
                assert_eq!(t.class_of(x.as_slice()), crate::tree::NodeClass::Context, "{n}: {x}");
            }
            // shifts of a context stay in its fiber down to the alpha-LIS
            let census = Census::new(&t, depth);
            for a in census.alpha_lis() {
                for c in census.fiber(a) {
                    for k in 0..=c.len() - a.len() {
                        let s = Word::from(&c.as_slice()[k..]);
                        assert_eq!(t.class_of(s.as_slice()), crate::tree::NodeClass::Context, "{n}: {c}");
                        assert_eq!(alpha_lis(&t, &s).unwrap().alpha_lis(), *a);
                    }
                }
            }
            // exactly one context LIS t with αt a context, when αc is not a context
            for c in t.contexts_up_to(depth - 1) {
                for al in t.alphabet().letters() {
                    let ac = c.prepend(al);
                    if t.class_of(ac.as_slice()) == crate::tree::NodeClass::Context {
                        continue;
                    }
                    let count = (0..c.len())
                        .filter(|&j| {
                            let at = c.prefix(j).prepend(al);
                            t.class_of(at.as_slice()) == crate::tree::NodeClass::Context && t.is_internal(&c.as_slice()[..j])
                        })
                        .count();
                    assert_eq!(count, 1, "{n}: c={c} α={al}");
                }
            }
        }
    }

    #[test]
    fn arith_families() {
        let t = zoo("arith_stable");
        let set = alpha_lis_set(&t, 14);
        let mut want = Vec::new();
        for q in 0..7 {
            let mut x = vec![0u8; q];
            x.push(1);
            x.extend(vec![0u8; q]);
            x.push(1);
            want.push(Word::from_letters(x));
        }
        for n in 1..7 {
            let mut x = vec![1u8];
            x.extend(vec![0u8; n]);
            x.push(1);
            x.extend(vec![0u8; n + 2]);
            want.push(Word::from_letters(x));
        }
        want.retain(|x| x.len() <= 14);
        want.sort();
        assert_eq!(set.entries(), &want[..]);
    }

    fn random_tree(seed: u64, b: usize, h: usize) -> ContextTree {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = Alphabet::new(b).unwrap();
        let mut internal = vec![Word::empty()];
        let mut frontier = vec![Word::empty()];
        while let Some(x) = frontier.pop() {
            for l in a.letters() {
                let y = x.append(l);
                if y.len() < h && rng.random::<f64>() < 0.55 {
                    internal.push(y.clone());
                    frontier.push(y);
                }
            }
        }
        ContextTree::Explicit(Arc::new(crate::tree::ExplicitTree::from_internal(a, &internal).unwrap()))
    }

    proptest! {
        #[test]
        fn reconstruction_and_maximality(seed in 0u64..2000, word in proptest::collection::vec(0u8..2, 1..14)) {
            let t = random_tree(seed, 2, 5);
            let w = Word::from_letters(word);
            let d = alpha_lis(&t, &w).unwrap();
            prop_assert_eq!(d.head.concat(&d.alpha_lis()), w.clone());
            prop_assert!(t.is_internal(d.lis.as_slice()));
            prop_assert_eq!(t.is_internal(d.alpha_lis().as_slice()), d.p() == 0 && t.is_internal(w.as_slice()));
            let (p, a) = brute_alpha_lis(&t, &w);
            prop_assert_eq!(p, d.p());
            prop_assert_eq!(a, d.alpha_lis());
        }

        #[test]
        fn fibers_partition_finite_trees(seed in 0u64..2000, b in 2usize..4) {
            let t = random_tree(seed, b, 4);
            let set = alpha_lis_set(&t, 4);
            let mut all: Vec<Word> = Vec::new();
            for x in set.entries() {
                all.extend(set.fiber(x, 4).unwrap());
            }
            all.sort();
            let n = all.len();
            all.dedup();
            prop_assert_eq!(n, all.len());
            prop_assert_eq!(all, t.contexts_up_to(4));
        }
    }
}

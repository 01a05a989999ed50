use crate::tree::{ContextTree, ExplicitTree, NodeClass};
use crate::word::Word;
use serde::Serialize;
use std::collections::BTreeSet;
use std::sync::Arc;

/// Outcome of the stability test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Stability {
    Stable,
    /// `letter · context` is an internal node.
    Unstable { context: Word, letter: u8, witness: Word },
    /// No violation among contexts of length at most `probe_depth`, and no certificate.
    Undetermined { probe_depth: usize },
}

impl Stability {
    pub fn is_stable(&self) -> bool {
        matches!(self, Stability::Stable)
    }
}

fn find_violation(tree: &ContextTree, contexts: &[Word]) -> Option<Stability> {
    for c in contexts {
        for a in tree.alphabet().letters() {
            let ac = c.prepend(a);
            if tree.is_internal(ac.as_slice()) {
                return Some(Stability::Unstable { context: c.clone(), letter: a, witness: ac });
            }
        }
    }
    None
}

/// Checks that `αc` is non-internal for every finite context `c` and letter `α`.
/// Exact on finite trees and on certified zoo entries; otherwise probes contexts
/// up to `probe_depth`.
pub fn is_stable(tree: &ContextTree, probe_depth: usize) -> Stability {
    match tree {
        ContextTree::Explicit(e) => find_violation(tree, e.contexts()).unwrap_or(Stability::Stable),
        ContextTree::Zoo(z) => {
            if let Some(v) = find_violation(tree, &tree.contexts_up_to(probe_depth.max(1))) {
                return v;
            }
            if z.stability_certificate() {
                Stability::Stable
            } else {
                Stability::Undetermined { probe_depth }
            }
        }
    }
}

/// Second characterisation on finite trees: every node of `T` keeps a node of `T`
/// under the shift.
pub fn shift_closed(tree: &ExplicitTree) -> bool {
    let t = ContextTree::Explicit(Arc::new(tree.clone()));
    let internal = t.internal_up_to(tree.height());
    internal
        .iter()
        .chain(tree.contexts())
        .all(|w| t.class_of(w.shift().as_slice()) != NodeClass::External)
}

/// Outcome of the stabilization.
#[derive(Debug, Clone, PartialEq)]
pub enum Stabilization {
    Stabilized(ContextTree),
    NotStabilizable { evidence: String },
    /// Internal nodes of the shift-closure found up to `depth`.
    Truncated { depth: usize, internal: Vec<Word> },
}

/// Internal nodes, of length at most `depth`, of the union of all shifts of `tree`:
/// the suffixes of the internal nodes of `tree`, collected from internal nodes of
/// length at most `probe`.
pub fn shift_closure_internal(tree: &ContextTree, depth: usize, probe: usize) -> Vec<Word> {
    let mut set = BTreeSet::new();
    for node in tree.internal_up_to(probe) {
        let s = node.as_slice();
        for k in 0..=s.len() {
            if s.len() - k <= depth {
                set.insert(Word::from(&s[k..]));
            }
        }
    }
    set.into_iter().collect()
}

const NODE_BUDGET: usize = 20_000;
const MAX_PROBE: usize = 4096;

/// Smallest stable tree containing `tree`, when it can be determined.
pub fn stabilize(tree: &ContextTree, depth_bound: usize) -> Stabilization {
    match tree {
        ContextTree::Explicit(e) => {
            let internal = shift_closure_internal(tree, e.height(), e.height());
            let t = ExplicitTree::from_internal(e.alphabet(), &internal)
                .expect("shift-closure of a finite tree is a finite tree");
            Stabilization::Stabilized(ContextTree::Explicit(Arc::new(t)))
        }
        ContextTree::Zoo(z) => {
            if let Some(s) = z.known_stabilized() {
                return Stabilization::Stabilized(ContextTree::Zoo(s));
            }
            let mut probe = depth_bound.max(1);
            while probe < MAX_PROBE && tree.internal_up_to(probe * 2).len() <= NODE_BUDGET {
                probe *= 2;
            }
            let internal = shift_closure_internal(tree, depth_bound, probe);
            let b = tree.alphabet().size();
            let full = depth_bound.min(8);
            let complete = internal.iter().filter(|w| w.len() == full).count() == b.pow(full as u32);
            if full >= 2 && complete {
                Stabilization::NotStabilizable {
                    evidence: format!(
                        "every word of length {full} is internal in the shift-closure \
                         (probe depth {probe}); the closure saturates the full tree"
                    ),
                }
            } else {
                Stabilization::Truncated { depth: depth_bound, internal }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::word::{w, Alphabet};
    use proptest::prelude::*;

    #[test]
    fn certified_and_witnessed() {
        for n in ["left_comb", "double_bamboo", "lc_of_lc", "lc_of_rc", "lc_of_rc_cherry", "arith_stable"] {
            assert_eq!(is_stable(&ContextTree::zoo(n).unwrap(), 10), Stability::Stable, "{n}");
        }
        match is_stable(&ContextTree::zoo("bamboo_blossom").unwrap(), 10) {
            Stability::Unstable { context, letter, witness } => {
                assert_eq!((context, letter, witness), (w("1"), 0, w("01")));
            }
            s => panic!("{s:?}"),
        }
        let four = ContextTree::zoo("four_contexts").unwrap();
        assert!(matches!(is_stable(&four, 4), Stability::Unstable { .. }));
        assert_eq!(is_stable(&ContextTree::zoo("nine_contexts").unwrap(), 4), Stability::Stable);
    }

    #[test]
    fn certified_entries_have_no_violation_when_probed() {
        for n in ["left_comb", "double_bamboo", "lc_of_lc", "lc_of_rc", "lc_of_rc_cherry", "arith_stable"] {
            let t = ContextTree::zoo(n).unwrap();
            assert!(find_violation(&t, &t.contexts_up_to(12)).is_none(), "{n}");
        }
    }

    #[test]
    fn bamboo_stabilizes_to_double_bamboo() {
        let b = ContextTree::zoo("bamboo_blossom").unwrap();
        let d = ContextTree::zoo("double_bamboo").unwrap();
        assert_eq!(stabilize(&b, 12), Stabilization::Stabilized(d.clone()));
        let closure = shift_closure_internal(&b, 12, 24);
        assert_eq!(closure, d.internal_up_to(12));
    }

    #[test]
    fn filament_heuristics() {
        let f = ContextTree::zoo("filament_all_words").unwrap();
        assert!(matches!(stabilize(&f, 12), Stabilization::NotStabilizable { .. }));
        let g = ContextTree::zoo("filament_blocks").unwrap();
        assert!(matches!(stabilize(&g, 12), Stabilization::Truncated { .. }));
    }

    #[test]
    fn finite_stabilization() {
        let t = ContextTree::zoo("four_contexts").unwrap();
        let Stabilization::Stabilized(s) = stabilize(&t, 4) else { panic!() };
        assert_eq!(is_stable(&s, 8), Stability::Stable);
        // internal nodes of T stay internal
        for x in t.internal_up_to(4) {
            assert!(s.is_internal(x.as_slice()));
        }
    }

    fn random_tree(seed: u64, b: usize, h: usize) -> ExplicitTree {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = Alphabet::new(b).unwrap();
        let mut internal = vec![Word::empty()];
        let mut frontier = vec![Word::empty()];
        while let Some(x) = frontier.pop() {
            for l in a.letters() {
                let y = x.append(l);
                if y.len() < h && rng.random::<f64>() < 0.5 {
                    internal.push(y.clone());
                    frontier.push(y);
                }
            }
        }
        ExplicitTree::from_internal(a, &internal).unwrap()
    }

    proptest! {
        #[test]
        fn criteria_agree_on_finite_trees(seed in 0u64..5000, b in 2usize..4, h in 2usize..6) {
            let e = random_tree(seed, b, h);
            let t = ContextTree::Explicit(Arc::new(e.clone()));
            prop_assert_eq!(shift_closed(&e), is_stable(&t, h).is_stable());
        }

        #[test]
        fn stable_cont_recursion(seed in 0u64..3000, r in proptest::collection::vec(0u8..2, 1..12), a in 0u8..2) {
            let e = random_tree(seed, 2, 5);
            let t = ContextTree::Explicit(Arc::new(e));
            prop_assume!(is_stable(&t, 5).is_stable());
            let mut r = r;
            r.extend(std::iter::repeat_n(0u8, 6));
            let c = t.cont_len(&r).unwrap();
            let mut ar = vec![a];
            ar.extend_from_slice(&r);
            let mut ac = vec![a];
            ac.extend_from_slice(&r[..c]);
            prop_assert_eq!(t.cont_len(&ar), t.cont_len(&ac));
        }
    }
}

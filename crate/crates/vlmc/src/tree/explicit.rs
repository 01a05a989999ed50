use crate::error::{Result, VlmcError};
use crate::word::{Alphabet, Word};

const NONE: u32 = u32::MAX;

/// A finite context tree given by its list of contexts, stored as a trie.
#[derive(Debug, Clone)]
pub struct ExplicitTree {
    alphabet: Alphabet,
    contexts: Vec<Word>,
    children: Vec<Vec<u32>>,
    height: usize,
}

impl PartialEq for ExplicitTree {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet && self.contexts == other.contexts
    }
}

impl ExplicitTree {
    /// Builds and validates a saturated finite tree from its contexts.
    pub fn new(alphabet: Alphabet, contexts: Vec<Word>) -> Result<Self> {
        let b = alphabet.size();
        let mut contexts = contexts;
        contexts.sort();
        contexts.dedup();
        if contexts.is_empty() {
            return Err(VlmcError::InvalidTree("empty context set".into()));
        }
        let mut children: Vec<Vec<u32>> = vec![vec![NONE; b]];
        let mut leaf = vec![false];
        for c in &contexts {
            alphabet.check(c.as_slice())?;
            if c.is_empty() {
                return Err(VlmcError::InvalidTree(
                    "the empty word cannot be a context (tree reduced to its root)".into(),
                ));
            }
            let mut node = 0usize;
            for &l in c.as_slice() {
                if leaf[node] {
                    return Err(VlmcError::InvalidTree(format!(
                        "context {c} extends another context"
                    )));
                }
                let next = children[node][l as usize];
                node = if next == NONE {
                    children.push(vec![NONE; b]);
                    leaf.push(false);
                    let id = (children.len() - 1) as u32;
                    children[node][l as usize] = id;
                    id as usize
                } else {
                    next as usize
                };
            }
            if children[node].iter().any(|&x| x != NONE) {
                return Err(VlmcError::InvalidTree(format!(
                    "context {c} is a prefix of another context"
                )));
            }
            leaf[node] = true;
        }
        // saturation: every internal node has all b children
        let mut stack = vec![(0usize, Word::empty())];
        while let Some((node, word)) = stack.pop() {
            if leaf[node] {
                continue;
            }
            for a in alphabet.letters() {
                let ch = children[node][a as usize];
                if ch == NONE {
                    return Err(VlmcError::InvalidTree(format!(
                        "not saturated: word {:?} is not covered by any context",
                        word.append(a)
                    )));
                }
                stack.push((ch as usize, word.append(a)));
            }
        }
        let height = contexts.iter().map(Word::len).max().unwrap_or(0);
        Ok(ExplicitTree { alphabet, contexts, children, height })
    }

    /// Builds the tree whose internal nodes are exactly `internal` (must be prefix-closed
    /// and contain the empty word); the contexts are the non-internal children.
    pub fn from_internal(alphabet: Alphabet, internal: &[Word]) -> Result<Self> {
        let set: std::collections::HashSet<&Word> = internal.iter().collect();
        if !set.contains(&Word::empty()) {
            return Err(VlmcError::InvalidTree("internal set must contain the empty word".into()));
        }
        let mut contexts = Vec::new();
        for w in internal {
            if !w.is_empty() && !set.contains(&w.prefix(w.len() - 1)) {
                return Err(VlmcError::InvalidTree(format!("internal set not prefix-closed at {w}")));
            }
            for a in alphabet.letters() {
                let c = w.append(a);
                if !set.contains(&c) {
                    contexts.push(c);
                }
            }
        }
        ExplicitTree::new(alphabet, contexts)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Contexts in length-then-lex order.
    pub fn contexts(&self) -> &[Word] {
        &self.contexts
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn is_internal_node(&self, node: usize) -> bool {
        self.children[node][0] != NONE
    }

    /// Length of the longest prefix of `w` that is an internal node.
    pub fn internal_prefix_len(&self, w: &[u8]) -> usize {
        let mut node = 0usize;
        for (i, &l) in w.iter().enumerate() {
            let next = self.children[node][l as usize] as usize;
            if !self.is_internal_node(next) {
                return i;
            }
            node = next;
        }
        w.len()
    }
}

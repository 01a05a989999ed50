//! Context trees: classification of words, `cont`, depth-bounded enumeration,
//! stability and stabilization.

pub mod explicit;
pub mod stability;
pub mod zoo;

use crate::error::{Result, VlmcError};
use crate::word::{Alphabet, Word};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::sync::Arc;

pub use explicit::ExplicitTree;
pub use stability::{is_stable, stabilize, Stability, Stabilization};
pub use zoo::{zoo, ZooEntry, REGISTRY};

/// Position of a finite word relative to a context tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeClass {
    Internal,
    Context,
    External,
}

/// A saturated context tree, either finite and explicit or a parametric zoo entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeDescriptor", try_from = "TreeDescriptor")]
pub enum ContextTree {
    Explicit(Arc<ExplicitTree>),
    Zoo(ZooEntry),
}

/// Serializable form of a tree: `{"alphabet": b, "kind": "explicit", "contexts": [..]}`
/// or `{"alphabet": b, "kind": "zoo", "zoo_name": .., "params": {..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDescriptor {
    pub alphabet: usize,
    pub kind: TreeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contexts: Option<Vec<Word>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zoo_name: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    Explicit,
    Zoo,
}

impl From<ContextTree> for TreeDescriptor {
    fn from(t: ContextTree) -> Self {
        match &t {
            ContextTree::Explicit(e) => TreeDescriptor {
                alphabet: e.alphabet().size(),
                kind: TreeKind::Explicit,
                contexts: Some(e.contexts().to_vec()),
                zoo_name: None,
                params: BTreeMap::new(),
            },
            ContextTree::Zoo(z) => TreeDescriptor {
                alphabet: z.alphabet().size(),
                kind: TreeKind::Zoo,
                contexts: None,
                zoo_name: Some(z.name().to_string()),
                params: z.params(),
            },
        }
    }
}

impl TryFrom<TreeDescriptor> for ContextTree {
    type Error = VlmcError;

    fn try_from(d: TreeDescriptor) -> Result<Self> {
        let alphabet = Alphabet::new(d.alphabet)?;
        let t = match d.kind {
            TreeKind::Explicit => {
                let cs = d
                    .contexts
                    .ok_or_else(|| VlmcError::InvalidTree("field `contexts` missing".into()))?;
                ContextTree::Explicit(Arc::new(ExplicitTree::new(alphabet, cs)?))
            }
            TreeKind::Zoo => {
                let name = d
                    .zoo_name
                    .ok_or_else(|| VlmcError::InvalidTree("field `zoo_name` missing".into()))?;
                zoo(&name, &d.params)?
            }
        };
        if t.alphabet() != alphabet {
            return Err(VlmcError::InvalidTree(format!(
                "field `alphabet`: {} does not match the tree's alphabet {}",
                d.alphabet,
                t.alphabet().size()
            )));
        }
        Ok(t)
    }
}

impl ContextTree {
    /// Finite tree from a list of contexts.
    pub fn explicit(alphabet: usize, contexts: &[&str]) -> Result<Self> {
        let a = Alphabet::new(alphabet)?;
        let cs = contexts.iter().map(|s| Word::parse_in(s, a)).collect::<Result<Vec<_>>>()?;
        Ok(ContextTree::Explicit(Arc::new(ExplicitTree::new(a, cs)?)))
    }

    /// Registered zoo tree without parameters.
    pub fn zoo(name: &str) -> Result<Self> {
        zoo(name, &BTreeMap::new())
    }

    pub fn alphabet(&self) -> Alphabet {
        match self {
            ContextTree::Explicit(e) => e.alphabet(),
            ContextTree::Zoo(z) => z.alphabet(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ContextTree::Explicit(e) => format!("explicit({} contexts)", e.contexts().len()),
            ContextTree::Zoo(ZooEntry::BComb { b }) => format!("b_comb(b={b})"),
            ContextTree::Zoo(z) => z.name().to_string(),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ContextTree::Explicit(_))
    }

    /// Height of a finite tree.
    pub fn height(&self) -> Option<usize> {
        match self {
            ContextTree::Explicit(e) => Some(e.height()),
            ContextTree::Zoo(_) => None,
        }
    }

    /// Length of the longest prefix of `w` that is an internal node.
    /// Letters are assumed valid.
    pub fn internal_prefix_len(&self, w: &[u8]) -> usize {
        match self {
            ContextTree::Explicit(e) => e.internal_prefix_len(w),
            ContextTree::Zoo(z) => z.internal_prefix_len(w),
        }
    }

    pub fn is_internal(&self, w: &[u8]) -> bool {
        self.internal_prefix_len(w) == w.len()
    }

    /// Classification without letter validation.
    pub fn class_of(&self, w: &[u8]) -> NodeClass {
        let l = self.internal_prefix_len(w);
        if l == w.len() {
            NodeClass::Internal
        } else if l + 1 == w.len() {
            NodeClass::Context
        } else {
            NodeClass::External
        }
    }

    pub fn classify(&self, w: &Word) -> Result<NodeClass> {
        self.alphabet().check(w.as_slice())?;
        Ok(self.class_of(w.as_slice()))
    }

    /// Length of the context prefix of a non-internal word, `None` for internal words.
    pub fn cont_len(&self, w: &[u8]) -> Option<usize> {
        let l = self.internal_prefix_len(w);
        (l < w.len()).then_some(l + 1)
    }

    /// The unique context that is a prefix of `w`.
    pub fn cont(&self, w: &Word) -> Result<Word> {
        self.alphabet().check(w.as_slice())?;
        match self.cont_len(w.as_slice()) {
            Some(n) => Ok(w.prefix(n)),
            None => Err(VlmcError::ContOfInternal(format!("{w:?}"))),
        }
    }

    fn walk(&self, root: &Word, max_len: usize, mut visit: impl FnMut(&Word, NodeClass)) {
        if !self.is_internal(root.as_slice()) {
            return;
        }
        let mut stack = vec![root.clone()];
        while let Some(node) = stack.pop() {
            visit(&node, NodeClass::Internal);
            if node.len() >= max_len {
                continue;
            }
            for a in self.alphabet().letters() {
                let child = node.append(a);
                if self.is_internal(child.as_slice()) {
                    stack.push(child);
                } else {
                    visit(&child, NodeClass::Context);
                }
            }
        }
    }

    /// All finite contexts of length at most `max_len`, length-then-lex.
    pub fn contexts_up_to(&self, max_len: usize) -> Vec<Word> {
        self.contexts_with_prefix(&Word::empty(), max_len)
    }

    /// Finite contexts extending the internal node `s`, of length at most `max_len`.
    pub fn contexts_with_prefix(&self, s: &Word, max_len: usize) -> Vec<Word> {
        if let ContextTree::Explicit(e) = self {
            return e
                .contexts()
                .iter()
                .filter(|c| c.len() <= max_len && c.starts_with(s.as_slice()))
                .cloned()
                .collect();
        }
        let mut out = Vec::new();
        self.walk(s, max_len, |w, c| {
            if c == NodeClass::Context {
                out.push(w.clone())
            }
        });
        out.sort();
        out
    }

    /// Internal nodes of length at most `max_len`, length-then-lex.
    pub fn internal_up_to(&self, max_len: usize) -> Vec<Word> {
        let mut out = Vec::new();
        self.walk(&Word::empty(), max_len, |w, c| {
            if c == NodeClass::Internal {
                out.push(w.clone())
            }
        });
        out.sort();
        out
    }
}

/// The shift: drops the left-most letter.
pub fn shift(w: &Word) -> Word {
    w.shift()
}

//! Constituency trees, the bracketed text format, binarization and unlabeled
//! span evaluation.
//!
//! Trees are stored as a preorder arena: node 0 is the root and every node's
//! children appear after it, left to right. Two trees built from the same
//! structure therefore compare equal with `==`.

mod bracketed;
mod eval;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bracketed::{parse_bracketed, serialize_bracketed};
pub use eval::{corpus_f1, eval_spans, span_prf, unlabeled_f1, Prf, SpanPolicy, SpanSet};

/// Label written for nodes that carry none.
pub const PLACEHOLDER_LABEL: &str = "X";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreebankError {
    #[error("unbalanced brackets at byte {offset}")]
    UnbalancedBrackets { offset: usize },
    #[error("empty constituent at byte {offset}")]
    EmptyConstituent { offset: usize },
    #[error("no tokens in tree (byte {offset})")]
    NoTokens { offset: usize },
    #[error("unexpected input after the tree at byte {offset}")]
    TrailingInput { offset: usize },
    #[error("trees cover {pred} and {gold} tokens")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("cannot average F1 over an empty corpus")]
    EmptyCorpus,
    #[error("{preds} predictions aligned against {refs} references")]
    AlignmentMismatch { preds: usize, refs: usize },
    #[error("span ({start}, {end}) is invalid for a {n}-token sentence")]
    InvalidSpan { start: usize, end: usize, n: usize },
    #[error("spans ({0}, {1}) and ({2}, {3}) cross")]
    CrossingSpans(usize, usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub index: usize,
    pub surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl Token {
    pub fn new(index: usize, surface: impl Into<String>) -> Self {
        Token {
            index,
            surface: surface.into(),
            tag: None,
        }
    }
}

/// Builds an untagged token sequence from surface strings.
pub fn tokens_from_words<S: AsRef<str>>(words: &[S]) -> Vec<Token> {
    words
        .iter()
        .enumerate()
        .map(|(i, w)| Token::new(i, w.as_ref()))
        .collect()
}

/// One constituent. Leaves have no children and cover exactly one token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub start: usize,
    pub end: usize,
    pub label: Option<String>,
    pub children: Vec<usize>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn width(&self) -> usize {
        self.end - self.start
    }
}

/// Recursive form used while building or rewriting trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Subtree {
    Leaf(usize),
    Node {
        label: Option<String>,
        children: Vec<Subtree>,
    },
}

impl Subtree {
    pub(crate) fn binary(left: Subtree, right: Subtree) -> Subtree {
        Subtree::Node {
            label: None,
            children: vec![left, right],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstituencyTree {
    tokens: Vec<Token>,
    nodes: Vec<Node>,
}

impl ConstituencyTree {
    /// Lays out `subtree` in preorder. Leaves must reference tokens left to
    /// right, each exactly once.
    pub(crate) fn from_subtree(tokens: Vec<Token>, subtree: &Subtree) -> Self {
        fn layout(sub: &Subtree, nodes: &mut Vec<Node>) -> usize {
            let id = nodes.len();
            match sub {
                Subtree::Leaf(i) => nodes.push(Node {
                    start: *i,
                    end: i + 1,
                    label: None,
                    children: Vec::new(),
                }),
                Subtree::Node { label, children } => {
                    nodes.push(Node {
                        start: 0,
                        end: 0,
                        label: label.clone(),
                        children: Vec::with_capacity(children.len()),
                    });
                    let ids: Vec<usize> = children.iter().map(|c| layout(c, nodes)).collect();
                    nodes[id].start = nodes[ids[0]].start;
                    nodes[id].end = nodes[*ids.last().unwrap()].end;
                    nodes[id].children = ids;
                }
            }
            id
        }
        let mut nodes = Vec::new();
        layout(subtree, &mut nodes);
        debug_assert_eq!(nodes[0].end, tokens.len());
        ConstituencyTree { tokens, nodes }
    }

    pub(crate) fn to_subtree(&self) -> Subtree {
        self.subtree_at(0)
    }

    fn subtree_at(&self, id: usize) -> Subtree {
        let node = &self.nodes[id];
        if node.is_leaf() {
            Subtree::Leaf(node.start)
        } else {
            Subtree::Node {
                label: node.label.clone(),
                children: node.children.iter().map(|&c| self.subtree_at(c)).collect(),
            }
        }
    }

    /// Builds an unlabeled tree from a set of non-crossing spans. The root and
    /// the single-token leaves are added implicitly; any node left with more
    /// than two children stays flat.
    pub fn from_spans(tokens: Vec<Token>, spans: &[(usize, usize)]) -> Result<Self, TreebankError> {
        let n = tokens.len();
        if n == 0 {
            return Err(TreebankError::NoTokens { offset: 0 });
        }
        let mut all: Vec<(usize, usize)> = Vec::with_capacity(spans.len() + 1);
        for &(s, e) in spans {
            if s >= e || e > n {
                return Err(TreebankError::InvalidSpan { start: s, end: e, n });
            }
            if e - s >= 2 && (s, e) != (0, n) {
                all.push((s, e));
            }
        }
        all.push((0, n));
        // outer spans first
        all.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        all.dedup();

        fn build(
            all: &[(usize, usize)],
            pos: &mut usize,
            span: (usize, usize),
        ) -> Result<Subtree, TreebankError> {
            let mut children = Vec::new();
            let mut cursor = span.0;
            while cursor < span.1 {
                if *pos < all.len() && all[*pos].0 == cursor {
                    let child = all[*pos];
                    if child.1 > span.1 {
                        return Err(TreebankError::CrossingSpans(span.0, span.1, child.0, child.1));
                    }
                    *pos += 1;
                    children.push(build(all, pos, child)?);
                    cursor = child.1;
                } else {
                    if *pos < all.len() && all[*pos].0 < span.1 && all[*pos].0 < cursor {
                        let c = all[*pos];
                        return Err(TreebankError::CrossingSpans(span.0, span.1, c.0, c.1));
                    }
                    children.push(Subtree::Leaf(cursor));
                    cursor += 1;
                }
            }
            if span.1 - span.0 == 1 {
                return Ok(Subtree::Leaf(span.0));
            }
            Ok(Subtree::Node {
                label: None,
                children,
            })
        }

        let mut pos = 1;
        let root = build(&all, &mut pos, (0, n))?;
        if pos != all.len() {
            let c = all[pos];
            return Err(TreebankError::CrossingSpans(0, n, c.0, c.1));
        }
        Ok(Self::from_subtree(tokens, &root))
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Sentence length in tokens.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| n.is_leaf() || n.children.len() == 2)
    }

    /// Every node span, including leaves and the root, sorted and deduplicated.
    pub fn spans(&self) -> Vec<(usize, usize)> {
        let mut spans: Vec<_> = self.nodes.iter().map(|n| (n.start, n.end)).collect();
        spans.sort_unstable();
        spans.dedup();
        spans
    }

    /// Same token surfaces and same constituent spans; labels and tags are
    /// ignored.
    pub fn structurally_eq(&self, other: &ConstituencyTree) -> bool {
        self.len() == other.len()
            && self
                .tokens
                .iter()
                .zip(&other.tokens)
                .all(|(a, b)| a.surface == b.surface)
            && self.spans() == other.spans()
    }

    /// Same tree shape over a different token sequence of equal length.
    pub fn with_tokens(&self, tokens: Vec<Token>) -> Result<Self, TreebankError> {
        if tokens.len() != self.tokens.len() {
            return Err(TreebankError::LengthMismatch {
                pred: tokens.len(),
                gold: self.tokens.len(),
            });
        }
        Ok(ConstituencyTree {
            tokens,
            nodes: self.nodes.clone(),
        })
    }

    /// Checks the structural invariants: root covers the sentence, children
    /// partition their parent contiguously, leaves cover one token each.
    pub fn validate(&self) -> bool {
        let n = self.tokens.len();
        if n == 0 || self.nodes.is_empty() || self.root().start != 0 || self.root().end != n {
            return false;
        }
        let mut leaves = 0;
        for node in &self.nodes {
            if node.is_leaf() {
                if node.width() != 1 {
                    return false;
                }
                leaves += 1;
                continue;
            }
            let mut cursor = node.start;
            for &c in &node.children {
                if self.nodes[c].start != cursor {
                    return false;
                }
                cursor = self.nodes[c].end;
            }
            if cursor != node.end {
                return false;
            }
        }
        leaves == n && self.tokens.iter().enumerate().all(|(i, t)| t.index == i)
    }

    /// Right-branching binarization: a node with children `c1 .. ck` becomes
    /// `(c1 (c2 (.. ck)))`, introduced nodes unlabeled. Unary chains collapse
    /// onto their lowest node, keeping the topmost label.
    pub fn binarize(&self) -> ConstituencyTree {
        fn go(sub: Subtree) -> Subtree {
            match sub {
                Subtree::Leaf(_) => sub,
                Subtree::Node {
                    label,
                    mut children,
                } => {
                    if children.len() == 1 {
                        let inner = go(children.pop().unwrap());
                        return match inner {
                            Subtree::Node { children, label: inner_label } => Subtree::Node {
                                label: label.or(inner_label),
                                children,
                            },
                            leaf => leaf,
                        };
                    }
                    let mut rest: Vec<Subtree> = children.into_iter().map(go).collect();
                    let mut right = rest.pop().unwrap();
                    while rest.len() > 1 {
                        let left = rest.pop().unwrap();
                        right = Subtree::binary(left, right);
                    }
                    Subtree::Node {
                        label,
                        children: vec![rest.pop().unwrap(), right],
                    }
                }
            }
        }
        let sub = go(self.to_subtree());
        ConstituencyTree::from_subtree(self.tokens.clone(), &sub)
    }
}

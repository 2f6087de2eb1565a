//! Littlestone dimension of finite classes.
//!
//! [`LdimSolver`] evaluates the recursion
//! `Ldim(H) ≥ k+1  ⇔  ∃x: Ldim(H|x=+1) ≥ k ∧ Ldim(H|x=−1) ≥ k`
//! with memoization keyed by member bitsets of an ambient class. The
//! shattered-tree search in [`find_shattered_tree`] and the path check in
//! [`verify_shattered`] work directly on explicit trees and serve as an
//! independent oracle for it.

use std::collections::HashMap;
use std::fmt;

use crate::bits::BitSet;
use crate::concept::{ConceptClass, DomainPoint, Hypothesis, Label, LabeledExample};

/// Littlestone dimension; `-1` is reserved for the empty class.
pub type LdimValue = i32;

/// Memoized Ldim over subsets of one ambient class.
#[derive(Clone, Debug)]
pub struct LdimSolver {
    class: ConceptClass,
    pos_masks: Vec<BitSet>,
    neg_masks: Vec<BitSet>,
    memo: HashMap<BitSet, LdimValue>,
}

impl LdimSolver {
    pub fn new(class: &ConceptClass) -> Self {
        let n = class.len();
        let (pos_masks, neg_masks) = (0..class.domain_size())
            .map(|x| {
                let pos = BitSet::from_indices(
                    n,
                    class
                        .members()
                        .iter()
                        .enumerate()
                        .filter(|(_, h)| h.label(DomainPoint(x)).is_pos())
                        .map(|(i, _)| i),
                );
                let neg = pos.complement();
                (pos, neg)
            })
            .unzip();
        LdimSolver {
            class: class.clone(),
            pos_masks,
            neg_masks,
            memo: HashMap::new(),
        }
    }

    pub fn class(&self) -> &ConceptClass {
        &self.class
    }

    /// The set of all members.
    pub fn all(&self) -> BitSet {
        BitSet::full(self.class.len())
    }

    /// Members labeling `x` with `b`.
    #[inline]
    pub fn mask(&self, x: DomainPoint, b: Label) -> &BitSet {
        match b {
            Label::Pos => &self.pos_masks[x.0],
            Label::Neg => &self.neg_masks[x.0],
        }
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    pub fn ldim(&mut self) -> LdimValue {
        self.ldim_of(&self.all())
    }

    pub fn ldim_of(&mut self, set: &BitSet) -> LdimValue {
        let size = set.count();
        match size {
            0 => return -1,
            1 => return 0,
            _ => {}
        }
        if let Some(&v) = self.memo.get(set) {
            return v;
        }
        // A shattered tree of depth k needs 2^k distinct members.
        let cap = size.ilog2() as LdimValue;
        let mut best = 0;
        for x in 0..self.class.domain_size() {
            if best == cap {
                break;
            }
            let plus = set.intersection(&self.pos_masks[x]);
            if plus.is_empty() || plus == *set {
                continue;
            }
            let lp = self.ldim_of(&plus);
            if lp < best {
                continue;
            }
            let minus = set.intersection(&self.neg_masks[x]);
            let lm = self.ldim_of(&minus);
            best = best.max(1 + lp.min(lm));
        }
        self.memo.insert(set.clone(), best);
        best
    }
}

/// Exact Littlestone dimension of `class`.
pub fn ldim(class: &ConceptClass) -> LdimValue {
    LdimSolver::new(class).ldim()
}

/// A complete binary tree whose internal nodes carry domain points, stored in
/// heap order: node `i` has its `-1` child at `2i+1` and its `+1` child at
/// `2i+2`. Leaves carry nothing and are not stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MistakeTree {
    depth: usize,
    nodes: Vec<DomainPoint>,
}

impl MistakeTree {
    pub fn new(depth: usize, nodes: Vec<DomainPoint>) -> Option<Self> {
        ((1usize << depth) - 1 == nodes.len()).then_some(MistakeTree { depth, nodes })
    }

    pub fn empty() -> Self {
        MistakeTree {
            depth: 0,
            nodes: Vec::new(),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn nodes(&self) -> &[DomainPoint] {
        &self.nodes
    }

    pub fn root(&self) -> Option<DomainPoint> {
        self.nodes.first().copied()
    }

    /// Every root-to-leaf path as an example sequence. Path `p` takes the
    /// `+1` branch at level `i` iff bit `depth-1-i` of `p` is set.
    pub fn paths(&self) -> impl Iterator<Item = Vec<LabeledExample>> + '_ {
        (0..1usize << self.depth).map(move |p| {
            let mut node = 0;
            (0..self.depth)
                .map(|level| {
                    let right = p >> (self.depth - 1 - level) & 1 == 1;
                    let ex = LabeledExample {
                        point: self.nodes[node],
                        label: Label::from_bool(right),
                    };
                    node = 2 * node + if right { 2 } else { 1 };
                    ex
                })
                .collect()
        })
    }

    fn fmt_node(&self, f: &mut fmt::Formatter<'_>, node: usize, indent: usize) -> fmt::Result {
        if node >= self.nodes.len() {
            return Ok(());
        }
        writeln!(f, "x={}", self.nodes[node])?;
        for (label, child) in [(Label::Neg, 2 * node + 1), (Label::Pos, 2 * node + 2)] {
            if child < self.nodes.len() {
                write!(f, "{:width$}{label}: ", "", width = indent + 2)?;
                self.fmt_node(f, child, indent + 2)?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for MistakeTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.nodes.is_empty() {
            return writeln!(f, "(leaf)");
        }
        self.fmt_node(f, 0, 0)
    }
}

/// True iff every root-to-leaf path of `tree` is realized by some member.
pub fn verify_shattered(class: &ConceptClass, tree: &MistakeTree) -> bool {
    if tree.nodes.iter().any(|x| x.0 >= class.domain_size()) {
        return false;
    }
    tree.paths()
        .all(|path| class.members().iter().any(|h| h.is_consistent_with(&path)))
}

enum Node {
    Leaf,
    Inner(DomainPoint, Box<Node>, Box<Node>),
}

fn search(members: &[&Hypothesis], domain_size: usize, depth: usize) -> Option<Node> {
    if members.is_empty() {
        return None;
    }
    if depth == 0 {
        return Some(Node::Leaf);
    }
    if members.len() < 1 << depth {
        return None;
    }
    let need = 1usize << (depth - 1);
    for x in (0..domain_size).map(DomainPoint) {
        let (pos, neg): (Vec<&Hypothesis>, Vec<&Hypothesis>) =
            members.iter().partition(|h| h.label(x).is_pos());
        if pos.len() < need || neg.len() < need {
            continue;
        }
        let Some(left) = search(&neg, domain_size, depth - 1) else {
            continue;
        };
        let Some(right) = search(&pos, domain_size, depth - 1) else {
            continue;
        };
        return Some(Node::Inner(x, Box::new(left), Box::new(right)));
    }
    None
}

fn flatten(node: &Node, index: usize, out: &mut [DomainPoint]) {
    if let Node::Inner(x, left, right) = node {
        out[index] = *x;
        flatten(left, 2 * index + 1, out);
        flatten(right, 2 * index + 2, out);
    }
}

/// Exhaustive depth-first search for a complete tree of exactly `depth` that
/// `class` shatters. Branches whose member count is below `2^remaining` are
/// pruned.
pub fn find_shattered_tree(class: &ConceptClass, depth: usize) -> Option<MistakeTree> {
    if depth >= usize::BITS as usize - 1 {
        return None;
    }
    let members: Vec<&Hypothesis> = class.members().iter().collect();
    let root = search(&members, class.domain_size(), depth)?;
    let mut nodes = vec![DomainPoint(0); (1 << depth) - 1];
    flatten(&root, 0, &mut nodes);
    Some(MistakeTree { depth, nodes })
}

/// Largest depth for which [`find_shattered_tree`] succeeds (`-1` if empty).
pub fn ldim_by_search(class: &ConceptClass) -> LdimValue {
    if class.is_empty() {
        return -1;
    }
    let mut d = 0;
    while find_shattered_tree(class, d + 1).is_some() {
        d += 1;
    }
    d as LdimValue
}

//! DHCP-derived device signatures: label extraction from DHCP options,
//! one-hot encoding over a learned vocabulary, and a small CART decision
//! tree. One verdict per device, from the union of its DHCP packets.

use crate::trace::PacketRecord;
use crate::types::Label;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DhcpError {
    #[error("training rows must include both classes")]
    SingleClass,
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Characters that split hostname and vendor-class strings into fragments.
pub const DELIMITERS: &[char] = &[
    ' ', '\t', ',', '.', '/', '\\', '_', '-', '+', '|', '{', '}', '[', ']', '(', ')', '=', ':',
];

pub const DEFAULT_MAX_DEPTH: usize = 5;
pub const DEFAULT_MIN_LEAF: usize = 1;

fn is_pure_decimal(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn split_text(text: &str, out: &mut BTreeSet<String>) {
    for frag in text.to_lowercase().split(DELIMITERS) {
        if frag.is_empty() || is_pure_decimal(frag) {
            continue;
        }
        out.insert(frag.to_string());
    }
}

/// Label set of one DHCP payload. Hostname and vendor-class strings are
/// lowercased and split on [`DELIMITERS`]; empty and purely numeric fragments
/// are dropped. Option values keep a namespace prefix ("prl:", "msg:",
/// "maxsz:") so codes cannot collide with text fragments.
pub fn tokenize_dhcp(part: &crate::trace::DhcpPart) -> BTreeSet<String> {
    let mut labels = BTreeSet::new();
    if let Some(h) = &part.hostname {
        split_text(h, &mut labels);
    }
    if let Some(v) = &part.vci {
        split_text(v, &mut labels);
    }
    if let Some(prl) = &part.prl {
        for code in prl {
            labels.insert(format!("prl:{code}"));
        }
    }
    if let Some(m) = part.message_type {
        labels.insert(format!("msg:{m}"));
    }
    if let Some(s) = part.max_size {
        labels.insert(format!("maxsz:{s}"));
    }
    labels
}

/// Union of labels across all of a device's DHCP packets. `None` when the
/// records carry no DHCP payload at all: such a device cannot be classified
/// by this signal and callers report it as Abstain.
pub fn device_labels(records: &[PacketRecord]) -> Option<BTreeSet<String>> {
    let mut labels = BTreeSet::new();
    let mut saw_dhcp = false;
    for r in records {
        if let Some(part) = &r.dhcp {
            saw_dhcp = true;
            labels.extend(tokenize_dhcp(part));
        }
    }
    saw_dhcp.then_some(labels)
}

/// Sorted union of all training label sets.
pub fn build_vocabulary<'a, I>(sets: I) -> Vec<String>
where
    I: IntoIterator<Item = &'a BTreeSet<String>>,
{
    let mut union = BTreeSet::new();
    for s in sets {
        union.extend(s.iter().cloned());
    }
    union.into_iter().collect()
}

/// Bit i is set iff `vocabulary[i]` is present. Labels outside the
/// vocabulary are ignored.
pub fn encode_onehot(labels: &BTreeSet<String>, vocabulary: &[String]) -> Vec<bool> {
    vocabulary.iter().map(|v| labels.contains(v)).collect()
}

/// Inverse of [`encode_onehot`] for labels within the vocabulary.
pub fn decode_onehot(bits: &[bool], vocabulary: &[String]) -> BTreeSet<String> {
    bits.iter()
        .zip(vocabulary)
        .filter(|(b, _)| **b)
        .map(|(_, v)| v.clone())
        .collect()
}

/// One node of the trained tree. Splits test presence of a vocabulary label:
/// `left` is the absent branch, `right` the present branch, both indices into
/// the model's flat node array. Leaves carry the verdict and the training
/// class counts as `[n_not, n_iot]`.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split { label: usize, left: usize, right: usize },
    Leaf { leaf: Label, counts: [u64; 2] },
}

/// A trained DHCP signature tree. `nodes[0]` is the root; children always
/// follow their parent (preorder), so the array alone encodes the shape.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhcpSignatureModel {
    pub kind: String,
    pub version: u32,
    pub vocabulary: Vec<String>,
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
}

impl DhcpSignatureModel {
    pub const KIND: &'static str = "dhcp_tree";
    pub const VERSION: u32 = 1;

    pub fn validate(&self) -> Result<(), DhcpError> {
        if self.kind != Self::KIND {
            return Err(DhcpError::Invalid(format!("kind {:?} is not \"dhcp_tree\"", self.kind)));
        }
        if self.version != Self::VERSION {
            return Err(DhcpError::Invalid(format!("unsupported version {}", self.version)));
        }
        if self.nodes.is_empty() {
            return Err(DhcpError::Invalid("tree has no nodes".into()));
        }
        if !self.vocabulary.windows(2).all(|w| w[0] < w[1]) {
            return Err(DhcpError::Invalid("vocabulary must be sorted and unique".into()));
        }
        // Walk from the root: every node must be reached exactly once (the
        // array really is one tree), split labels must be in range, and no
        // leaf may sit deeper than max_depth.
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((idx, depth)) = stack.pop() {
            let node = self
                .nodes
                .get(idx)
                .ok_or_else(|| DhcpError::Invalid(format!("child index {idx} out of range")))?;
            if std::mem::replace(&mut seen[idx], true) {
                return Err(DhcpError::Invalid(format!("node {idx} is reachable twice")));
            }
            match node {
                TreeNode::Leaf { .. } => {
                    if depth > self.max_depth {
                        return Err(DhcpError::Invalid(format!(
                            "leaf at depth {depth} exceeds max_depth {}",
                            self.max_depth
                        )));
                    }
                }
                TreeNode::Split { label, left, right } => {
                    if *label >= self.vocabulary.len() {
                        return Err(DhcpError::Invalid(format!("label index {label} out of range")));
                    }
                    stack.push((*left, depth + 1));
                    stack.push((*right, depth + 1));
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(DhcpError::Invalid(format!("node {orphan} is unreachable")));
        }
        Ok(())
    }

    /// Edges on the longest root-to-leaf path; 0 for a single leaf.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], idx: usize) -> usize {
            match &nodes[idx] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Descends the tree on label presence. An empty set follows the
    /// all-absent path, so prediction never abstains.
    pub fn predict(&self, labels: &BTreeSet<String>) -> Label {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { leaf, .. } => return *leaf,
                TreeNode::Split { label, left, right } => {
                    idx = if labels.contains(&self.vocabulary[*label]) { *right } else { *left };
                }
            }
        }
    }
}

/// Gini impurity of a two-class count pair.
fn gini(counts: [u64; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

fn class_counts(rows: &[usize], ys: &[Label]) -> [u64; 2] {
    let mut counts = [0u64; 2];
    for &r in rows {
        match ys[r] {
            Label::NoT => counts[0] += 1,
            Label::IoT => counts[1] += 1,
        }
    }
    counts
}

fn leaf_for(counts: [u64; 2]) -> TreeNode {
    // Majority verdict; an exact tie goes to IoT, the positive class.
    let leaf = if counts[1] >= counts[0] { Label::IoT } else { Label::NoT };
    TreeNode::Leaf { leaf, counts }
}

struct TreeBuilder<'a> {
    xs: &'a [Vec<bool>],
    ys: &'a [Label],
    max_depth: usize,
    min_leaf: usize,
    n_features: usize,
    nodes: Vec<TreeNode>,
}

impl TreeBuilder<'_> {
    /// Builds the subtree over `rows`, returning its root index. Nodes land
    /// in preorder: parent, then the whole absent branch, then the present
    /// branch.
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = class_counts(&rows, self.ys);
        let parent_gini = gini(counts);
        if counts[0] == 0 || counts[1] == 0 || depth == self.max_depth {
            self.nodes.push(leaf_for(counts));
            return self.nodes.len() - 1;
        }
        let mut best: Option<(usize, f64)> = None;
        for f in 0..self.n_features {
            let mut absent = [0u64; 2];
            let mut present = [0u64; 2];
            for &r in &rows {
                let side = if self.xs[r][f] { &mut present } else { &mut absent };
                match self.ys[r] {
                    Label::NoT => side[0] += 1,
                    Label::IoT => side[1] += 1,
                }
            }
            let n_a = absent[0] + absent[1];
            let n_p = present[0] + present[1];
            if (n_a as usize) < self.min_leaf || (n_p as usize) < self.min_leaf {
                continue;
            }
            let weighted = (n_a as f64 * gini(absent) + n_p as f64 * gini(present))
                / (n_a + n_p) as f64;
            // Strict < keeps the lowest vocabulary index on ties.
            if best.is_none_or(|(_, w)| weighted < w) {
                best = Some((f, weighted));
            }
        }
        match best {
            Some((f, w)) if w < parent_gini - 1e-12 => {
                let (absent_rows, present_rows): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&r| !self.xs[r][f]);
                let my = self.nodes.len();
                self.nodes.push(leaf_for(counts)); // placeholder, patched below
                let left = self.build(absent_rows, depth + 1);
                let right = self.build(present_rows, depth + 1);
                self.nodes[my] = TreeNode::Split { label: f, left, right };
                my
            }
            _ => {
                self.nodes.push(leaf_for(counts));
                self.nodes.len() - 1
            }
        }
    }
}

/// Trains a CART tree on one-hot rows: each split minimizes the weighted
/// Gini impurity of its children, ties prefer the lowest vocabulary index,
/// and growth stops on purity, the depth bound, or when no split reduces
/// impurity.
pub fn train_tree(
    xs: &[Vec<bool>],
    ys: &[Label],
    vocabulary: Vec<String>,
    max_depth: usize,
    min_leaf: usize,
) -> Result<DhcpSignatureModel, DhcpError> {
    if xs.len() != ys.len() {
        return Err(DhcpError::Invalid(format!(
            "{} rows but {} labels",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().any(|row| row.len() != vocabulary.len()) {
        return Err(DhcpError::Invalid("row width does not match the vocabulary".into()));
    }
    let has_iot = ys.contains(&Label::IoT);
    let has_not = ys.contains(&Label::NoT);
    if !has_iot || !has_not {
        return Err(DhcpError::SingleClass);
    }
    let mut builder = TreeBuilder {
        xs,
        ys,
        max_depth,
        min_leaf: min_leaf.max(1),
        n_features: vocabulary.len(),
        nodes: Vec::new(),
    };
    let root = builder.build((0..xs.len()).collect(), 0);
    debug_assert_eq!(root, 0);
    let model = DhcpSignatureModel {
        kind: DhcpSignatureModel::KIND.to_string(),
        version: DhcpSignatureModel::VERSION,
        vocabulary,
        nodes: builder.nodes,
        max_depth,
    };
    debug_assert!(model.validate().is_ok());
    Ok(model)
}

/// Convenience wrapper: build the vocabulary from the training label sets,
/// encode, and train with the default depth and leaf bounds.
pub fn fit_dhcp_model(
    examples: &[(BTreeSet<String>, Label)],
) -> Result<DhcpSignatureModel, DhcpError> {
    let vocabulary = build_vocabulary(examples.iter().map(|(s, _)| s));
    let xs: Vec<Vec<bool>> =
        examples.iter().map(|(s, _)| encode_onehot(s, &vocabulary)).collect();
    let ys: Vec<Label> = examples.iter().map(|(_, l)| *l).collect();
    train_tree(&xs, &ys, vocabulary, DEFAULT_MAX_DEPTH, DEFAULT_MIN_LEAF)
}

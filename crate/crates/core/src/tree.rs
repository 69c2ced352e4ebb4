//! Binary tree arena shared by both algorithms.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{CovariateKind, CovariateSchema};
use crate::error::TreeError;
use crate::scalar::Scalar;

/// Binary split on one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[serde(bound = "T: Scalar")]
pub enum SplitRule<T> {
    /// Numeric or ordinal covariate; left iff `x <= cut`.
    Threshold { covariate: usize, cut: T },
    /// Nominal covariate; left iff the level is in `left`. Levels in neither list were not
    /// present at the node when it was split and cannot be routed.
    Subset {
        covariate: usize,
        left: Vec<usize>,
        right: Vec<usize>,
    },
}

impl<T: Scalar> SplitRule<T> {
    pub fn covariate(&self) -> usize {
        match self {
            SplitRule::Threshold { covariate, .. } | SplitRule::Subset { covariate, .. } => {
                *covariate
            }
        }
    }

    pub fn goes_left(&self, row: &[T], schema: &CovariateSchema) -> Result<bool, TreeError> {
        match self {
            SplitRule::Threshold { covariate, cut } => Ok(row[*covariate] <= *cut),
            SplitRule::Subset {
                covariate,
                left,
                right,
            } => {
                let level = row[*covariate].as_f64() as usize;
                if left.contains(&level) {
                    Ok(true)
                } else if right.contains(&level) {
                    Ok(false)
                } else {
                    let col = schema.column(*covariate);
                    Err(TreeError::Routing {
                        covariate: col.name.clone(),
                        level: col.format_value(row[*covariate]),
                    })
                }
            }
        }
    }

    /// Human-readable conditions for the left and right child.
    pub fn describe(&self, schema: &CovariateSchema) -> (String, String) {
        let col = schema.column(self.covariate());
        let labels = |idx: &[usize]| -> String {
            let names: Vec<String> = idx
                .iter()
                .map(|&i| col.kind.levels().map_or(i.to_string(), |l| l[i].clone()))
                .collect();
            format!("{{{}}}", names.join(", "))
        };
        match self {
            SplitRule::Threshold { cut, .. } => match &col.kind {
                CovariateKind::Ordinal { levels } => {
                    let k = cut.as_f64().floor() as usize;
                    (
                        format!("{} <= {}", col.name, levels[k]),
                        format!("{} > {}", col.name, levels[k]),
                    )
                }
                _ => (
                    format!("{} <= {}", col.name, cut),
                    format!("{} > {}", col.name, cut),
                ),
            },
            SplitRule::Subset { left, right, .. } => (
                format!("{} in {}", col.name, labels(left)),
                format!("{} in {}", col.name, labels(right)),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Split<T> {
    pub rule: SplitRule<T>,
    pub left: usize,
    pub right: usize,
}

/// Tree node; `id` is the node's index in the arena. `members` index the training records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar, P: Serialize",
    deserialize = "T: Scalar, P: DeserializeOwned"
))]
pub struct Node<T, P> {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub members: Vec<usize>,
    pub split: Option<Split<T>>,
    pub payload: P,
}

impl<T, P> Node<T, P> {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// Arena of nodes in pre-order (node, left subtree, right subtree); node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Scalar, P: Serialize",
    deserialize = "T: Scalar, P: DeserializeOwned"
))]
pub struct Tree<T, P> {
    schema: CovariateSchema,
    nodes: Vec<Node<T, P>>,
}

impl<T: Scalar, P: Clone> Tree<T, P> {
    pub(crate) fn new(schema: CovariateSchema) -> Self {
        Tree {
            schema,
            nodes: Vec::new(),
        }
    }

    /// Appends a leaf and returns its id.
    pub(crate) fn push(
        &mut self,
        parent: Option<usize>,
        members: Vec<usize>,
        payload: P,
    ) -> usize {
        let id = self.nodes.len();
        let depth = parent.map_or(0, |p| self.nodes[p].depth + 1);
        self.nodes.push(Node {
            id,
            parent,
            depth,
            members,
            split: None,
            payload,
        });
        id
    }

    pub(crate) fn set_split(&mut self, id: usize, split: Split<T>) {
        self.nodes[id].split = Some(split);
    }

    pub(crate) fn node_mut(&mut self, id: usize) -> &mut Node<T, P> {
        &mut self.nodes[id]
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn nodes(&self) -> &[Node<T, P>] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node<T, P> {
        &self.nodes[id]
    }

    pub fn root(&self) -> &Node<T, P> {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf ids, left to right.
    pub fn leaves(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id).collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Covariates used by at least one split.
    pub fn used_covariates(&self) -> BTreeSet<usize> {
        self.nodes
            .iter()
            .filter_map(|n| n.split.as_ref().map(|s| s.rule.covariate()))
            .collect()
    }

    /// Leaf reached by a covariate row.
    pub fn route(&self, row: &[T]) -> Result<usize, TreeError> {
        let mut id = 0;
        while let Some(split) = &self.nodes[id].split {
            id = if split.rule.goes_left(row, &self.schema)? {
                split.left
            } else {
                split.right
            };
        }
        Ok(id)
    }

    /// Copy in which every node satisfying `cut` (and not below another such node) becomes a
    /// leaf. Ids are renumbered to stay in pre-order.
    pub fn collapsed(&self, cut: impl Fn(&Node<T, P>) -> bool) -> Tree<T, P> {
        let mut out = Tree::new(self.schema.clone());
        self.copy_into(0, None, &cut, &mut out);
        out
    }

    fn copy_into(
        &self,
        id: usize,
        parent: Option<usize>,
        cut: &impl Fn(&Node<T, P>) -> bool,
        out: &mut Tree<T, P>,
    ) -> usize {
        let node = &self.nodes[id];
        let new_id = out.push(parent, node.members.clone(), node.payload.clone());
        if let Some(split) = &node.split {
            if !cut(node) {
                let left = self.copy_into(split.left, Some(new_id), cut, out);
                let right = self.copy_into(split.right, Some(new_id), cut, out);
                out.set_split(
                    new_id,
                    Split {
                        rule: split.rule.clone(),
                        left,
                        right,
                    },
                );
            }
        }
        new_id
    }

    /// Ids of all nodes in the subtree rooted at `id`, including `id`.
    pub fn subtree(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(i) = stack.pop() {
            out.push(i);
            if let Some(s) = &self.nodes[i].split {
                stack.push(s.right);
                stack.push(s.left);
            }
        }
        out
    }

    /// Graphviz rendering; `label` supplies the per-node text.
    pub fn to_dot(&self, label: impl Fn(&Node<T, P>) -> String) -> String {
        let mut out = String::from("digraph tree {\n  node [shape=box, fontname=\"Helvetica\"];\n");
        for node in &self.nodes {
            let text = label(node).replace('"', "\\\"");
            let _ = writeln!(out, "  n{} [label=\"{}\"];", node.id, text);
        }
        for node in &self.nodes {
            if let Some(split) = &node.split {
                let (l, r) = split.rule.describe(&self.schema);
                let _ = writeln!(
                    out,
                    "  n{} -> n{} [label=\"{}\"];",
                    node.id,
                    split.left,
                    l.replace('"', "\\\"")
                );
                let _ = writeln!(
                    out,
                    "  n{} -> n{} [label=\"{}\"];",
                    node.id,
                    split.right,
                    r.replace('"', "\\\"")
                );
            }
        }
        out.push_str("}\n");
        out
    }

    /// Indented outline of the split rules with a per-leaf label.
    pub fn outline(&self, leaf_label: impl Fn(&Node<T, P>) -> String) -> String {
        let mut out = String::new();
        self.outline_into(0, "root".to_string(), &leaf_label, &mut out);
        out
    }

    fn outline_into(
        &self,
        id: usize,
        condition: String,
        leaf_label: &impl Fn(&Node<T, P>) -> String,
        out: &mut String,
    ) {
        let node = &self.nodes[id];
        let indent = "  ".repeat(node.depth);
        match &node.split {
            None => {
                let _ = writeln!(
                    out,
                    "{indent}[{id}] {condition}: n={} {}",
                    node.members.len(),
                    leaf_label(node)
                );
            }
            Some(split) => {
                let _ = writeln!(out, "{indent}[{id}] {condition}: n={}", node.members.len());
                let (l, r) = split.rule.describe(&self.schema);
                self.outline_into(split.left, l, leaf_label, out);
                self.outline_into(split.right, r, leaf_label, out);
            }
        }
    }
}

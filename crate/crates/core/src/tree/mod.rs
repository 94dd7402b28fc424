//! Typed expression trees.

mod eval;
mod render;
mod sample;

pub use eval::evaluate;
pub use render::{parse_expression, render_infix, round_constant};
pub use sample::{sample_tree, Method, Sampler};

use crate::error::{Error, Result};
use crate::grammar::{Grammar, ProductionId, TypeId};

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Op(ProductionId),
    Feature { name: String, ty: TypeId },
    Constant { value: f64, ty: TypeId },
}

/// A tree node. `best_gain` is the best accuracy gain (in accuracy points)
/// of any evaluated individual that contained this node; it travels with the
/// node when subtrees move between trees.
#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub children: Vec<Node>,
    pub best_gain: f64,
}

impl Node {
    pub fn op(id: ProductionId, children: Vec<Node>) -> Node {
        Node {
            kind: NodeKind::Op(id),
            children,
            best_gain: 0.0,
        }
    }

    pub fn feature(name: impl Into<String>, ty: TypeId) -> Node {
        Node {
            kind: NodeKind::Feature {
                name: name.into(),
                ty,
            },
            children: Vec::new(),
            best_gain: 0.0,
        }
    }

    pub fn constant(value: f64, ty: TypeId) -> Node {
        Node {
            kind: NodeKind::Constant { value, ty },
            children: Vec::new(),
            best_gain: 0.0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn production(&self) -> Option<ProductionId> {
        match self.kind {
            NodeKind::Op(id) => Some(id),
            _ => None,
        }
    }

    /// Type this node returns.
    pub fn ty(&self, g: &Grammar) -> TypeId {
        match &self.kind {
            NodeKind::Op(id) => g.production(*id).return_type,
            NodeKind::Feature { ty, .. } | NodeKind::Constant { ty, .. } => *ty,
        }
    }

    /// Operator levels below and including this node; a leaf has height 0.
    pub fn height(&self) -> usize {
        self.children
            .iter()
            .map(|c| c.height() + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Node::size).sum::<usize>()
    }

    /// Equality of shape, operators and leaves; gain records are ignored.
    pub fn same_structure(&self, other: &Node) -> bool {
        self.kind == other.kind
            && self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|(a, b)| a.same_structure(b))
    }

    fn preorder<'a>(&'a self, out: &mut Vec<&'a Node>) {
        out.push(self);
        for c in &self.children {
            c.preorder(out);
        }
    }

    fn preorder_paths(&self, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(path.clone());
        for (i, c) in self.children.iter().enumerate() {
            path.push(i);
            c.preorder_paths(path, out);
            path.pop();
        }
    }

    fn for_each_mut(&mut self, f: &mut impl FnMut(&mut Node)) {
        f(self);
        for c in &mut self.children {
            c.for_each_mut(f);
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExprTree {
    pub root: Node,
    pub return_type: TypeId,
}

impl ExprTree {
    pub fn new(root: Node, g: &Grammar) -> ExprTree {
        let return_type = root.ty(g);
        ExprTree { root, return_type }
    }

    pub fn height(&self) -> usize {
        self.root.height()
    }

    pub fn size(&self) -> usize {
        self.root.size()
    }

    /// Nodes in pre-order; indices into this vector are node indices.
    pub fn nodes(&self) -> Vec<&Node> {
        let mut out = Vec::with_capacity(self.size());
        self.root.preorder(&mut out);
        out
    }

    /// Child-index paths of all nodes, in pre-order.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.root.preorder_paths(&mut Vec::new(), &mut out);
        out
    }

    pub fn node(&self, path: &[usize]) -> &Node {
        path.iter().fold(&self.root, |n, &i| &n.children[i])
    }

    pub fn node_mut(&mut self, path: &[usize]) -> &mut Node {
        path.iter().fold(&mut self.root, |n, &i| &mut n.children[i])
    }

    /// Production of the parent of the node at `path` (`None` at the root).
    pub fn parent_production(&self, path: &[usize]) -> Option<ProductionId> {
        match path.split_last() {
            None => None,
            Some((_, parent)) => self.node(parent).production(),
        }
    }

    /// Swaps in `node` at `path`, returning the subtree that was there.
    pub fn replace(&mut self, path: &[usize], node: Node) -> Node {
        std::mem::replace(self.node_mut(path), node)
    }

    pub fn same_structure(&self, other: &ExprTree) -> bool {
        self.return_type == other.return_type && self.root.same_structure(&other.root)
    }

    /// `best_gain := max(best_gain, gain)` on every node.
    pub fn record_gain(&mut self, gain: f64) {
        self.root.for_each_mut(&mut |n| {
            if gain > n.best_gain {
                n.best_gain = gain;
            }
        });
    }

    /// Selection weights for mutation and crossover, one per node in
    /// pre-order: `(g_max - g_i) + floor`, normalized. Nodes with the lowest
    /// recorded gain are the most likely targets.
    pub fn node_weights(&self, floor: f64) -> Vec<f64> {
        let gains: Vec<f64> = self.nodes().iter().map(|n| n.best_gain).collect();
        gain_weights(&gains, floor)
    }
}

pub(crate) fn gain_weights(gains: &[f64], floor: f64) -> Vec<f64> {
    assert!(floor > 0.0, "node weight floor must be positive");
    let max = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = gains.iter().map(|g| (max - g) + floor).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Checks every slot against the grammar. On failure the error carries the
/// path of the first offending node.
pub fn type_check(t: &ExprTree, g: &Grammar) -> Result<()> {
    fn check(n: &Node, expected: TypeId, g: &Grammar, path: &mut Vec<usize>) -> Result<()> {
        let fail = |path: &Vec<usize>, message: String| Error::Type {
            path: path.clone(),
            message,
        };
        match &n.kind {
            NodeKind::Op(id) => {
                let Some(p) = g.productions().get(*id) else {
                    return Err(fail(path, format!("unknown production #{id}")));
                };
                if p.return_type != expected {
                    return Err(fail(
                        path,
                        format!(
                            "{} returns {}, slot needs {}",
                            g.production_signature(*id),
                            g.type_name(p.return_type),
                            g.type_name(expected)
                        ),
                    ));
                }
                if n.children.len() != p.arity() {
                    return Err(fail(
                        path,
                        format!(
                            "{} has {} children",
                            g.production_signature(*id),
                            n.children.len()
                        ),
                    ));
                }
                for (i, (c, &a)) in n.children.iter().zip(&p.arg_types).enumerate() {
                    path.push(i);
                    check(c, a, g, path)?;
                    path.pop();
                }
                Ok(())
            }
            NodeKind::Feature { ty, .. } | NodeKind::Constant { ty, .. } => {
                if !n.children.is_empty() {
                    return Err(fail(path, "leaf with children".into()));
                }
                if *ty != expected {
                    return Err(fail(
                        path,
                        format!(
                            "leaf of type {} in a slot of type {}",
                            g.types().get(*ty).map_or("?", |t| t.name.as_str()),
                            g.type_name(expected)
                        ),
                    ));
                }
                Ok(())
            }
        }
    }
    if t.return_type >= g.types().len() {
        return Err(Error::Type {
            path: Vec::new(),
            message: "unknown return type".into(),
        });
    }
    check(&t.root, t.return_type, g, &mut Vec::new())
}

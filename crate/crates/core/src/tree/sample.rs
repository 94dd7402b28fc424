use rand::Rng;

use super::{round_constant, ExprTree, Node};
use crate::error::{Error, Result};
use crate::grammar::{sample_weighted, Grammar, ProductionId, TransitionModel, TypeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Grow,
    Full,
}

/// Draws trees from a grammar and a transition model.
///
/// Operators are only offered when a terminal-only completion still fits
/// below the target depth, so sampling never gets stuck on a type that
/// needs more levels than remain.
pub struct Sampler<'a> {
    pub g: &'a Grammar,
    pub tm: &'a TransitionModel,
    op_heights: Vec<Option<usize>>,
}

impl<'a> Sampler<'a> {
    pub fn new(g: &'a Grammar, tm: &'a TransitionModel) -> Sampler<'a> {
        let mut op_heights: Vec<Option<usize>> = vec![None; g.productions().len()];
        loop {
            let mut changed = false;
            for (id, p) in g.productions().iter().enumerate() {
                let need = p.arg_types.iter().try_fold(0usize, |m, &a| {
                    slot_height(g, tm, &op_heights, Some(id), a).map(|h| m.max(h))
                });
                if let Some(h) = need.map(|h| h + 1) {
                    if op_heights[id].is_none_or(|cur| h < cur) {
                        op_heights[id] = Some(h);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Sampler { g, tm, op_heights }
    }

    /// Minimum height of any tree rooted at production `id` that respects
    /// the transition model.
    pub fn production_height(&self, id: ProductionId) -> Option<usize> {
        self.op_heights[id]
    }

    /// Minimum height of a subtree filling a slot of type `ty` under `parent`.
    pub fn slot_height(&self, parent: Option<ProductionId>, ty: TypeId) -> Option<usize> {
        slot_height(self.g, self.tm, &self.op_heights, parent, ty)
    }

    /// A full tree: target depth uniform in `[depth_min, depth_max]`, root
    /// type from `forced_type` or the initial distribution.
    pub fn sample_tree<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        method: Method,
        depth_min: usize,
        depth_max: usize,
        forced_type: Option<TypeId>,
    ) -> Result<ExprTree> {
        assert!(depth_min <= depth_max, "depth_min exceeds depth_max");
        let target = rng.random_range(depth_min..=depth_max);
        self.sample_tree_at(rng, method, target, depth_min, forced_type)
    }

    /// A tree with leaves due at `target`; grow trees stop no earlier than
    /// `depth_min`.
    pub fn sample_tree_at<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        method: Method,
        target: usize,
        depth_min: usize,
        forced_type: Option<TypeId>,
    ) -> Result<ExprTree> {
        let ty = match forced_type {
            Some(t) => t,
            None => self.tm.sample_start_type(self.g, rng),
        };
        let root = self.grow_subtree(rng, None, ty, 0, target, method, depth_min)?;
        Ok(ExprTree {
            root,
            return_type: ty,
        })
    }

    /// Grows the subtree for one slot of type `ty` under `parent`, with the
    /// slot at operator level `level` and leaves due at level `target`.
    #[allow(clippy::too_many_arguments)]
    pub fn grow_subtree<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        parent: Option<ProductionId>,
        ty: TypeId,
        level: usize,
        target: usize,
        method: Method,
        depth_min: usize,
    ) -> Result<Node> {
        let remaining = target.saturating_sub(level);
        let ops: Vec<(ProductionId, f64)> = self
            .tm
            .operator_row(parent, ty)
            .iter()
            .copied()
            .filter(|&(id, _)| self.op_heights[id].is_some_and(|h| h <= remaining))
            .collect();
        let has_term = self.g.has_terminal(ty);

        let p_term = if ops.is_empty() {
            1.0
        } else if !has_term || (parent.is_none() && level == 0) {
            0.0
        } else if level >= target {
            1.0
        } else {
            match method {
                Method::Full => 0.0,
                Method::Grow if level < depth_min => 0.0,
                Method::Grow => level as f64 / target as f64,
            }
        };

        if p_term >= 1.0 || (p_term > 0.0 && rng.random::<f64>() < p_term) {
            if !has_term {
                return Err(Error::EmptySupport {
                    parent: parent.map_or("<root>".into(), |p| self.g.production_signature(p)),
                    ty: self.g.type_name(ty).to_string(),
                });
            }
            return Ok(self.random_terminal(rng, ty));
        }

        let id = sample_weighted(&ops, rng);
        let arg_types = self.g.production(id).arg_types.clone();
        let mut children = Vec::with_capacity(arg_types.len());
        for a in arg_types {
            children.push(self.grow_subtree(
                rng,
                Some(id),
                a,
                level + 1,
                target,
                method,
                depth_min,
            )?);
        }
        Ok(Node::op(id, children))
    }

    /// A leaf of type `ty`: a bound column or a fresh constant, uniformly.
    ///
    /// Panics if the type has no usable terminal.
    pub fn random_terminal<R: Rng + ?Sized>(&self, rng: &mut R, ty: TypeId) -> Node {
        let spec = self.g.terminal(ty).expect("type has a terminal");
        let n_features = spec.base_features.len();
        let n = n_features + usize::from(spec.constant_range.is_some());
        assert!(
            n > 0,
            "terminal of type {} is unusable",
            self.g.type_name(ty)
        );
        let k = rng.random_range(0..n);
        if k < n_features {
            Node::feature(spec.base_features[k].clone(), ty)
        } else {
            let (lo, hi) = spec.constant_range.expect("constant option");
            let v = if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            };
            Node::constant(round_constant(v), ty)
        }
    }
}

fn slot_height(
    g: &Grammar,
    tm: &TransitionModel,
    op_heights: &[Option<usize>],
    parent: Option<ProductionId>,
    ty: TypeId,
) -> Option<usize> {
    if g.has_terminal(ty) {
        return Some(0);
    }
    tm.operator_row(parent, ty)
        .iter()
        .filter_map(|&(c, _)| op_heights[c])
        .min()
}

pub fn sample_tree<R: Rng + ?Sized>(
    g: &Grammar,
    tm: &TransitionModel,
    rng: &mut R,
    method: Method,
    depth_min: usize,
    depth_max: usize,
    forced_type: Option<TypeId>,
) -> Result<ExprTree> {
    Sampler::new(g, tm).sample_tree(rng, method, depth_min, depth_max, forced_type)
}

//! Grammar-respecting mutation and crossover.
//!
//! Every operator keeps trees well typed, keeps root types, respects the
//! transition model's forbidden pairs and never exceeds `depth_max`.

use rand::Rng;

use super::{EvolutionConfig, Individual};
use crate::error::Result;
use crate::grammar::{sample_weighted, ProductionId, TypeId};
use crate::tree::{ExprTree, Method, Node, Sampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    /// Regenerate the subtree at the node.
    Uniform,
    /// Swap the node's operator for another with the same signature,
    /// keeping its children (or a leaf for another leaf).
    NodeReplacement,
    /// Put new operators above the node, the old subtree becoming one of
    /// their arguments.
    Insertion,
}

pub const MUTATION_KINDS: [MutationKind; 3] = [
    MutationKind::Uniform,
    MutationKind::NodeReplacement,
    MutationKind::Insertion,
];

fn pick_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let items: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
    sample_weighted(&items, rng)
}

/// True when `child` may sit directly below `parent` (`None` = root).
fn allowed(s: &Sampler, parent: Option<ProductionId>, child: &Node) -> bool {
    match child.production() {
        None => true,
        Some(c) => s.tm.probability(parent, c, s.g.production(c).return_type) > 0.0,
    }
}

/// Mutates one tree in place at a weight-selected node. Returns the kind
/// actually applied (after fallbacks).
pub fn mutate_tree<R: Rng + ?Sized>(
    s: &Sampler,
    t: &mut ExprTree,
    kind: MutationKind,
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> Result<MutationKind> {
    let paths = t.paths();
    let path = paths[pick_index(&t.node_weights(cfg.floor), rng)].clone();
    mutate_at(s, t, &path, kind, cfg, rng)
}

pub fn mutate_at<R: Rng + ?Sized>(
    s: &Sampler,
    t: &mut ExprTree,
    path: &[usize],
    kind: MutationKind,
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> Result<MutationKind> {
    let applied = match kind {
        MutationKind::Uniform => false,
        MutationKind::NodeReplacement => replace_node(s, t, path, rng),
        MutationKind::Insertion => insert_above(s, t, path, cfg, rng)?,
    };
    if applied {
        return Ok(kind);
    }
    regenerate(s, t, path, cfg, rng)?;
    Ok(MutationKind::Uniform)
}

fn regenerate<R: Rng + ?Sized>(
    s: &Sampler,
    t: &mut ExprTree,
    path: &[usize],
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> Result<()> {
    if path.is_empty() {
        let method = if rng.random::<bool>() {
            Method::Grow
        } else {
            Method::Full
        };
        *t = s.sample_tree(
            rng,
            method,
            cfg.depth_min,
            cfg.depth_max,
            Some(t.return_type),
        )?;
        return Ok(());
    }
    let parent = t.parent_production(path);
    let ty = t.node(path).ty(s.g);
    let level = path.len();
    let need = s.slot_height(parent, ty).unwrap_or(0);
    let lo = (level + need).min(cfg.depth_max);
    let target = rng.random_range(lo..=cfg.depth_max);
    let node = s.grow_subtree(rng, parent, ty, level, target, Method::Grow, 0)?;
    t.replace(path, node);
    Ok(())
}

fn replace_node<R: Rng + ?Sized>(
    s: &Sampler,
    t: &mut ExprTree,
    path: &[usize],
    rng: &mut R,
) -> bool {
    let parent = t.parent_production(path);
    let node = t.node(path);
    let Some(id) = node.production() else {
        let ty = node.ty(s.g);
        if !s.g.has_terminal(ty) {
            return false;
        }
        let leaf = s.random_terminal(rng, ty);
        t.replace(path, leaf);
        return true;
    };
    let p = s.g.production(id);
    let ty = p.return_type;
    let candidates: Vec<(ProductionId, f64)> =
        s.tm.operator_row(parent, ty)
            .iter()
            .copied()
            .filter(|&(c, _)| {
                c != id
                    && s.g.production(c).arg_types == p.arg_types
                    && node.children.iter().all(|ch| allowed(s, Some(c), ch))
            })
            .collect();
    if candidates.is_empty() {
        return false;
    }
    let c = sample_weighted(&candidates, rng);
    t.node_mut(path).kind = crate::tree::NodeKind::Op(c);
    t.node_mut(path).best_gain = 0.0;
    true
}

/// One way to wrap the subtree: `top` holds either the subtree directly in
/// slot `i`, or `mid` in slot `i` which holds the subtree in slot `j`.
#[derive(Debug, Clone, Copy)]
struct Chain {
    top: ProductionId,
    i: usize,
    mid: Option<(ProductionId, usize)>,
}

fn insert_above<R: Rng + ?Sized>(
    s: &Sampler,
    t: &mut ExprTree,
    path: &[usize],
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> Result<bool> {
    let g = s.g;
    let parent = t.parent_production(path);
    let level = path.len();
    let sub = t.node(path);
    let ty = sub.ty(g);
    let h = sub.height();

    let fits_siblings = |p: ProductionId, skip: usize, at: usize| {
        g.production(p).arg_types.iter().enumerate().all(|(k, &a)| {
            k == skip
                || s.slot_height(Some(p), a)
                    .is_some_and(|m| at + m <= cfg.depth_max)
        })
    };
    let holds = |p: ProductionId, slot_ty: TypeId| -> Vec<usize> {
        g.production(p)
            .arg_types
            .iter()
            .enumerate()
            .filter(|&(_, &a)| a == slot_ty)
            .map(|(k, _)| k)
            .collect()
    };

    let mut short = Vec::new();
    let mut long = Vec::new();
    for &(top, _) in s.tm.operator_row(parent, ty) {
        if level + 1 + h <= cfg.depth_max && allowed(s, Some(top), sub) {
            for i in holds(top, ty) {
                if fits_siblings(top, i, level + 1) {
                    short.push(Chain { top, i, mid: None });
                }
            }
        }
        if level + 2 + h > cfg.depth_max {
            continue;
        }
        for (i, &u) in g.production(top).arg_types.iter().enumerate() {
            if !fits_siblings(top, i, level + 1) {
                continue;
            }
            for &(mid, _) in s.tm.operator_row(Some(top), u) {
                if !allowed(s, Some(mid), sub) {
                    continue;
                }
                for j in holds(mid, ty) {
                    if fits_siblings(mid, j, level + 2) {
                        long.push(Chain {
                            top,
                            i,
                            mid: Some((mid, j)),
                        });
                    }
                }
            }
        }
    }
    let pool = match (short.is_empty(), long.is_empty()) {
        (true, true) => return Ok(false),
        (false, true) => &short,
        (true, false) => &long,
        (false, false) => {
            if rng.random::<bool>() {
                &short
            } else {
                &long
            }
        }
    };
    let chain = pool[rng.random_range(0..pool.len())];

    let grow_siblings =
        |p: ProductionId, skip: usize, at: usize, rng: &mut R| -> Result<Vec<Option<Node>>> {
            g.production(p)
                .arg_types
                .iter()
                .enumerate()
                .map(|(k, &a)| {
                    if k == skip {
                        return Ok(None);
                    }
                    let need = s.slot_height(Some(p), a).unwrap_or(0);
                    let target = rng.random_range((at + need).min(cfg.depth_max)..=cfg.depth_max);
                    s.grow_subtree(rng, Some(p), a, at, target, Method::Grow, 0)
                        .map(Some)
                })
                .collect()
        };
    let top_kids = grow_siblings(chain.top, chain.i, level + 1, rng)?;
    let mid_kids = match chain.mid {
        Some((mid, j)) => Some(grow_siblings(mid, j, level + 2, rng)?),
        None => None,
    };

    let old = t.replace(path, Node::constant(0.0, ty));
    let fill = |kids: Vec<Option<Node>>, inner: Node| -> Vec<Node> {
        let mut inner = Some(inner);
        kids.into_iter()
            .map(|k| k.unwrap_or_else(|| inner.take().expect("one open slot")))
            .collect()
    };
    let inner = match (chain.mid, mid_kids) {
        (Some((mid, _)), Some(kids)) => Node::op(mid, fill(kids, old)),
        _ => old,
    };
    t.replace(path, Node::op(chain.top, fill(top_kids, inner)));
    Ok(true)
}

/// Mutates an individual: a single tree when `n = 1`, otherwise each tree
/// with probability `1/n`, redrawing until at least one is picked.
pub fn mutate<R: Rng + ?Sized>(
    s: &Sampler,
    ind: &mut Individual,
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> Result<()> {
    let n = ind.trees.len();
    let picked: Vec<usize> = if n == 1 {
        vec![0]
    } else {
        loop {
            let p: Vec<usize> = (0..n).filter(|_| rng.random_range(0..n) == 0).collect();
            if !p.is_empty() {
                break p;
            }
        }
    };
    for k in picked {
        let kind = MUTATION_KINDS[rng.random_range(0..3)];
        mutate_tree(s, &mut ind.trees[k], kind, cfg, rng)?;
    }
    ind.invalidate();
    Ok(())
}

/// One-point crossover. For single-tree individuals, subtrees of the same
/// type are swapped where both transplants respect the transition model;
/// with no such pair the parents come back unchanged. For longer
/// individuals the tree lists are cut at one point and exchanged. An
/// offspring deeper than `depth_max` is replaced by its first parent.
pub fn crossover<R: Rng + ?Sized>(
    s: &Sampler,
    a: &Individual,
    b: &Individual,
    cfg: &EvolutionConfig,
    rng: &mut R,
) -> (Individual, Individual) {
    let n = a.trees.len();
    assert_eq!(
        n,
        b.trees.len(),
        "crossover of individuals of different lengths"
    );
    if n > 1 {
        let cut = rng.random_range(1..n);
        let mut x = a.clone();
        let mut y = b.clone();
        for k in cut..n {
            std::mem::swap(&mut x.trees[k], &mut y.trees[k]);
        }
        x.invalidate();
        y.invalidate();
        return (x, y);
    }

    let (ta, tb) = (&a.trees[0], &b.trees[0]);
    let pa = ta.paths();
    let pb = tb.paths();
    let compatible = |i: usize| -> Vec<usize> {
        let na = ta.node(&pa[i]);
        let ty = na.ty(s.g);
        let par_a = ta.parent_production(&pa[i]);
        (0..pb.len())
            .filter(|&j| {
                let nb = tb.node(&pb[j]);
                nb.ty(s.g) == ty
                    && allowed(s, par_a, nb)
                    && allowed(s, tb.parent_production(&pb[j]), na)
            })
            .collect()
    };
    let wa = ta.node_weights(cfg.floor);
    let options: Vec<(usize, Vec<usize>)> = (0..pa.len())
        .map(|i| (i, compatible(i)))
        .filter(|(_, c)| !c.is_empty())
        .collect();
    if options.is_empty() {
        return (a.clone(), b.clone());
    }
    let i = sample_weighted(
        &options
            .iter()
            .enumerate()
            .map(|(k, (i, _))| (k, wa[*i]))
            .collect::<Vec<_>>(),
        rng,
    );
    let (i, cands) = &options[i];
    let wb = tb.node_weights(cfg.floor);
    let j = sample_weighted(&cands.iter().map(|&j| (j, wb[j])).collect::<Vec<_>>(), rng);

    let mut x = a.clone();
    let mut y = b.clone();
    let sa = ta.node(&pa[*i]).clone();
    let sb = tb.node(&pb[j]).clone();
    x.trees[0].replace(&pa[*i], sb);
    y.trees[0].replace(&pb[j], sa);
    x.invalidate();
    y.invalidate();
    if x.trees[0].height() > cfg.depth_max {
        x = a.clone();
    }
    if y.trees[0].height() > cfg.depth_max {
        y = b.clone();
    }
    (x, y)
}

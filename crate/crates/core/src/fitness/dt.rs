//! CART classification tree with Gini splits.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum DtNode {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A binary tree over numeric features; `x <= threshold` goes left.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<DtNode>,
}

struct Builder<'a> {
    x: &'a [&'a [f64]],
    y: &'a [usize],
    n_classes: usize,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<DtNode>,
    go_left: Vec<bool>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl DecisionTree {
    /// Fits on the rows of `x` (one slice per feature). Each child of a
    /// split keeps at least `min_leaf` rows. Among splits with the best Gini
    /// decrease the first feature, then the lowest threshold, wins.
    pub fn fit(
        x: &[&[f64]],
        y: &[usize],
        n_classes: usize,
        max_depth: usize,
        min_leaf: usize,
    ) -> Result<DecisionTree> {
        if y.is_empty() {
            return Err(Error::Data("decision tree: empty training set".into()));
        }
        let n = y.len();
        let sorted: Vec<Vec<u32>> = x
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                idx
            })
            .collect();
        let mut b = Builder {
            x,
            y,
            n_classes,
            max_depth,
            min_leaf: min_leaf.max(1),
            nodes: Vec::new(),
            go_left: vec![false; n],
        };
        let all: Vec<u32> = (0..n as u32).collect();
        b.build(all, sorted, 0);
        Ok(DecisionTree { nodes: b.nodes })
    }

    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                DtNode::Leaf(c) => return c,
                DtNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row(feature) <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn predict(&self, x: &[&[f64]]) -> Vec<usize> {
        let n = x.first().map_or(0, |c| c.len());
        (0..n).map(|r| self.predict_row(|f| x[f][r])).collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, DtNode::Leaf(_)))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[DtNode], i: usize) -> usize {
            match nodes[i] {
                DtNode::Leaf(_) => 0,
                DtNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// `Σ_c n_c² / n`; larger is purer. A split improves Gini impurity exactly
/// when the children's sum exceeds the parent's.
fn purity(counts: &[usize], n: usize) -> f64 {
    counts.iter().map(|&c| (c * c) as f64).sum::<f64>() / n as f64
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &k) in counts.iter().enumerate() {
        if k > counts[best] {
            best = c;
        }
    }
    best
}

impl Builder<'_> {
    fn build(&mut self, samples: Vec<u32>, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &s in &samples {
            counts[self.y[s as usize]] += 1;
        }
        let id = self.nodes.len();
        self.nodes.push(DtNode::Leaf(majority(&counts)));
        let n = samples.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.max_depth || pure || n < 2 * self.min_leaf {
            return id;
        }
        let parent = purity(&counts, n);
        let Some(split) = self.best_split(&sorted, &counts) else {
            return id;
        };
        if split.score <= parent * (1.0 + 1e-12) {
            return id;
        }

        let col = self.x[split.feature];
        for &s in &samples {
            self.go_left[s as usize] = col[s as usize] <= split.threshold;
        }
        let (ls, rs): (Vec<u32>, Vec<u32>) =
            samples.iter().partition(|&&s| self.go_left[s as usize]);
        let mut lsorted = Vec::with_capacity(sorted.len());
        let mut rsorted = Vec::with_capacity(sorted.len());
        for list in sorted {
            let (l, r): (Vec<u32>, Vec<u32>) =
                list.into_iter().partition(|&s| self.go_left[s as usize]);
            lsorted.push(l);
            rsorted.push(r);
        }
        let left = self.build(ls, lsorted, depth + 1);
        let right = self.build(rs, rsorted, depth + 1);
        self.nodes[id] = DtNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, sorted: &[Vec<u32>], counts: &[usize]) -> Option<Split> {
        let mut best: Option<Split> = None;
        let mut left = vec![0usize; self.n_classes];
        for (f, list) in sorted.iter().enumerate() {
            let col = self.x[f];
            let n = list.len();
            left.iter_mut().for_each(|c| *c = 0);
            for i in 0..n - 1 {
                let s = list[i] as usize;
                left[self.y[s]] += 1;
                let nl = i + 1;
                let nr = n - nl;
                if nl < self.min_leaf {
                    continue;
                }
                if nr < self.min_leaf {
                    break;
                }
                let (a, b) = (col[s], col[list[i + 1] as usize]);
                if a == b {
                    continue;
                }
                let mut score = 0.0;
                for (c, &l) in left.iter().enumerate() {
                    let r = counts[c] - l;
                    score += (l * l) as f64 / nl as f64 + (r * r) as f64 / nr as f64;
                }
                if best
                    .as_ref()
                    .is_none_or(|bs| score > bs.score * (1.0 + 1e-12))
                {
                    let mid = a + (b - a) / 2.0;
                    best = Some(Split {
                        feature: f,
                        threshold: if mid < b { mid } else { a },
                        score,
                    });
                }
            }
        }
        best
    }
}

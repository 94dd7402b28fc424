//! Independent reference implementations shared by the suites.

use std::cmp::Ordering;

use dimgp::data::Dataset;
use dimgp::grammar::{Grammar, Operator};
use dimgp::tree::{evaluate, ExprTree, Node, NodeKind};
use statrs::function::gamma::ln_gamma;

/// `l² / nl + r² / nr` summed over classes, as an exact fraction.
fn stump_score(left: &[u64], right: &[u64]) -> (u128, u128) {
    let nl: u64 = left.iter().sum();
    let nr: u64 = right.iter().sum();
    let sl: u64 = left.iter().map(|c| c * c).sum();
    let sr: u64 = right.iter().map(|c| c * c).sum();
    ((sl * nr + sr * nl) as u128, (nl * nr) as u128)
}

fn cmp_frac(a: (u128, u128), b: (u128, u128)) -> Ordering {
    (a.0 * b.1).cmp(&(b.0 * a.1))
}

fn majority(counts: &[u64]) -> usize {
    let max = *counts.iter().max().unwrap();
    counts.iter().position(|&c| c == max).unwrap()
}

fn split_counts(col: &[f64], y: &[usize], k: usize, thr: f64) -> (Vec<u64>, Vec<u64>) {
    let mut left = vec![0u64; k];
    let mut right = vec![0u64; k];
    for (v, &c) in col.iter().zip(y) {
        if *v <= thr {
            left[c] += 1;
        } else {
            right[c] += 1;
        }
    }
    (left, right)
}

/// Best depth-1 tree by enumerating every feature and every cut between
/// distinct values. Returns `(feature, threshold, left label, right label)`,
/// or the single-leaf label.
pub fn best_stump(
    x: &[Vec<f64>],
    y: &[usize],
    k: usize,
) -> Result<(usize, f64, usize, usize), usize> {
    let mut all = vec![0u64; k];
    for &c in y {
        all[c] += 1;
    }
    let parent = (
        all.iter().map(|c| (c * c) as u128).sum::<u128>(),
        y.len() as u128,
    );
    let mut best: Option<((u128, u128), usize, f64)> = None;
    for (f, col) in x.iter().enumerate() {
        let mut values = col.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let mid = w[0] + (w[1] - w[0]) / 2.0;
            let thr = if mid < w[1] { mid } else { w[0] };
            let (left, right) = split_counts(col, y, k, thr);
            let s = stump_score(&left, &right);
            if best.is_none_or(|(b, _, _)| cmp_frac(s, b) == Ordering::Greater) {
                best = Some((s, f, thr));
            }
        }
    }
    match best {
        Some((s, f, thr)) if cmp_frac(s, parent) == Ordering::Greater => {
            let (left, right) = split_counts(&x[f], y, k, thr);
            Ok((f, thr, majority(&left), majority(&right)))
        }
        _ => Err(majority(&all)),
    }
}

pub fn stump_predict(
    stump: &Result<(usize, f64, usize, usize), usize>,
    q: impl Fn(usize) -> f64,
) -> usize {
    match *stump {
        Ok((f, thr, l, r)) => {
            if q(f) <= thr {
                l
            } else {
                r
            }
        }
        Err(label) => label,
    }
}

/// Z-scored Euclidean neighbours by full sort, ties to the lower row index;
/// votes tie to the lower class.
pub fn brute_knn(train: &[Vec<f64>], y: &[usize], k_classes: usize, k: usize, q: &[f64]) -> usize {
    let n = y.len() as f64;
    let stats: Vec<(f64, f64)> = train
        .iter()
        .map(|col| {
            let m = col.iter().sum::<f64>() / n;
            (
                m,
                (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt(),
            )
        })
        .collect();
    let mut d: Vec<(f64, usize)> = (0..y.len())
        .map(|i| {
            let dist = stats
                .iter()
                .enumerate()
                .filter(|(_, &(_, s))| s > 0.0)
                .map(|(f, &(m, s))| {
                    let a = (train[f][i] - m) / s;
                    let b = (q[f] - m) / s;
                    (a - b) * (a - b)
                })
                .sum();
            (dist, i)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut votes = vec![0; k_classes];
    for &(_, i) in d.iter().take(k) {
        votes[y[i]] += 1;
    }
    let max = *votes.iter().max().unwrap();
    votes.iter().position(|&v| v == max).unwrap()
}

/// Row-at-a-time interpreter: `None` is a missing value.
pub fn naive(n: &Node, g: &Grammar, d: &Dataset, row: usize) -> Option<f64> {
    let v = match &n.kind {
        NodeKind::Feature { name, .. } => d.column(name).unwrap().values[row],
        NodeKind::Constant { value, .. } => *value,
        NodeKind::Op(id) => {
            let args: Vec<f64> = n
                .children
                .iter()
                .map(|c| naive(c, g, d, row))
                .collect::<Option<Vec<_>>>()?;
            let a = args[0];
            let b = args.get(1).copied().unwrap_or(0.0);
            match g.production(*id).operator {
                Operator::Add => a + b,
                Operator::Sub => a - b,
                Operator::Mul => a * b,
                Operator::Div if b == 0.0 => return None,
                Operator::Div => a / b,
                Operator::Sqrt if a < 0.0 => return None,
                Operator::Sqrt => a.sqrt(),
                Operator::Square => a * a,
                Operator::Exp => a.exp(),
                Operator::Log if a <= 0.0 => return None,
                Operator::Log => a.ln(),
                Operator::Abs => a.abs(),
                Operator::Cos => a.cos(),
                Operator::Sin => a.sin(),
                Operator::Tan => a.tan(),
                Operator::Acos if a.abs() > 1.0 => return None,
                Operator::Acos => a.acos(),
                Operator::Asin if a.abs() > 1.0 => return None,
                Operator::Asin => a.asin(),
                Operator::Atan => a.atan(),
                Operator::Min => a.min(b),
                Operator::Max => a.max(b),
                Operator::Atan2 => a.atan2(b),
            }
        }
    };
    v.is_finite().then_some(v)
}

/// Engine output against [`naive`], bit for bit.
pub fn agree(t: &ExprTree, g: &Grammar, d: &Dataset) -> Result<(), String> {
    let fast = evaluate(t, g, d).map_err(|e| e.to_string())?;
    for (row, &v) in fast.iter().enumerate() {
        match naive(&t.root, g, d, row) {
            None if v.is_nan() => {}
            Some(x) if x.to_bits() == v.to_bits() => {}
            other => return Err(format!("row {row}: engine {v}, reference {other:?}")),
        }
    }
    Ok(())
}

/// Two-sided p-value by composite Simpson integration of the Student t
/// density over `[0, |t|]`.
pub fn p_by_integration(t: f64, dof: f64) -> f64 {
    let c = (ln_gamma((dof + 1.0) / 2.0) - ln_gamma(dof / 2.0)).exp()
        / (dof * std::f64::consts::PI).sqrt();
    let pdf = |x: f64| c * (1.0 + x * x / dof).powf(-(dof + 1.0) / 2.0);
    let b = t.abs();
    let n = 200_000;
    let h = b / n as f64;
    let mut s = pdf(0.0) + pdf(b);
    for i in 1..n {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}

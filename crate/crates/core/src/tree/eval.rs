use super::{ExprTree, Node, NodeKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grammar::Grammar;

/// Evaluates a tree on every row of `d`. The result holds one value per row;
/// `NaN` marks a missing value. Division by zero and any non-finite
/// intermediate make the row missing, and missing operands propagate.
///
/// Operations are applied element-wise per node, which gives the same
/// per-row IEEE results as a row-at-a-time recursive interpreter.
pub fn evaluate(t: &ExprTree, g: &Grammar, d: &Dataset) -> Result<Vec<f64>> {
    let mut missing = None;
    for n in t.nodes() {
        if let NodeKind::Feature { name, .. } = &n.kind {
            if d.column(name).is_none() {
                missing = Some(name.clone());
                break;
            }
        }
    }
    if let Some(name) = missing {
        return Err(Error::UnknownColumn(name));
    }
    Ok(eval_node(&t.root, g, d))
}

fn eval_node(n: &Node, g: &Grammar, d: &Dataset) -> Vec<f64> {
    match &n.kind {
        NodeKind::Feature { name, .. } => d
            .column(name)
            .expect("columns checked before evaluation")
            .values
            .clone(),
        NodeKind::Constant { value, .. } => vec![sanitize(*value); d.n_rows()],
        NodeKind::Op(id) => {
            let op = g.production(*id).operator;
            let mut args = n.children.iter().map(|c| eval_node(c, g, d));
            let mut lhs = args.next().expect("operators have at least one child");
            match args.next() {
                None => {
                    for x in &mut lhs {
                        *x = sanitize(op.apply(*x, 0.0));
                    }
                }
                Some(rhs) => {
                    for (x, y) in lhs.iter_mut().zip(rhs) {
                        *x = if x.is_nan() || y.is_nan() {
                            f64::NAN
                        } else {
                            sanitize(op.apply(*x, y))
                        };
                    }
                }
            }
            lhs
        }
    }
}

#[inline]
fn sanitize(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::NAN
    }
}

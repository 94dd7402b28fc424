//! Fixed probability model over the grammar: `P_init` for the root operator
//! and a parent-to-child operator transition table.
//!
//! Rows are built with the same rule everywhere. For a row over the allowed
//! options `O` with explicit entries `E`, every unlisted option receives an
//! equal share of the mass left over, `max(0, 1 - sum(E)) / |O \ E|`, and
//! the row is then renormalized. An empty file therefore yields the uniform
//! model, and an explicit `0` forbids the option outright.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Grammar, ProductionId, TypeId};
use crate::error::{Error, Result};

/// Serialized form: `{"init": [{"type":"E","op":"+","p":0.1}],
/// "cond": [{"parent":"Sqrt:E","child":"+:E2","p":0.7}]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    #[serde(default)]
    pub init: Vec<InitEntry>,
    #[serde(default)]
    pub cond: Vec<CondEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitEntry {
    #[serde(rename = "type")]
    pub ty: String,
    pub op: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondEntry {
    pub parent: String,
    pub child: String,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct TransitionModel {
    n_productions: usize,
    init_explicit: HashMap<ProductionId, f64>,
    cond_explicit: HashMap<(ProductionId, ProductionId), f64>,
    /// Root rows per type, normalized.
    root_rows: Vec<Vec<(ProductionId, f64)>>,
    /// Normalized root-type distribution over the start types.
    start_weights: Vec<(TypeId, f64)>,
    /// `(parent, slot type)` rows, normalized, zero entries removed.
    rows: HashMap<(ProductionId, TypeId), Vec<(ProductionId, f64)>>,
}

/// Distribution over what fills one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildDistribution {
    pub operators: Vec<(ProductionId, f64)>,
    pub terminal: f64,
}

impl ChildDistribution {
    pub fn total(&self) -> f64 {
        self.terminal + self.operators.iter().map(|(_, p)| p).sum::<f64>()
    }

    pub fn probability(&self, id: ProductionId) -> f64 {
        self.operators
            .iter()
            .find(|(p, _)| *p == id)
            .map_or(0.0, |(_, w)| *w)
    }
}

/// Applies the remainder rule to one row.
fn fill_row(options: &[ProductionId], explicit: impl Fn(ProductionId) -> Option<f64>) -> Vec<f64> {
    let mut listed = 0.0;
    let mut unlisted = 0usize;
    for &o in options {
        match explicit(o) {
            Some(p) => listed += p,
            None => unlisted += 1,
        }
    }
    let share = if unlisted > 0 {
        (1.0 - listed).max(0.0) / unlisted as f64
    } else {
        0.0
    };
    let raw: Vec<f64> = options
        .iter()
        .map(|&o| explicit(o).unwrap_or(share))
        .collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.into_iter().map(|w| w / total).collect()
    } else {
        vec![0.0; options.len()]
    }
}

fn positive(options: &[ProductionId], weights: Vec<f64>) -> Vec<(ProductionId, f64)> {
    options
        .iter()
        .copied()
        .zip(weights)
        .filter(|&(_, w)| w > 0.0)
        .collect()
}

impl TransitionModel {
    /// Every grammar-allowed option equally likely.
    pub fn uniform(g: &Grammar) -> TransitionModel {
        TransitionModel::build(g, HashMap::new(), HashMap::new())
            .expect("the uniform model has no forbidden rows")
    }

    /// Builds and validates a model from explicit entries.
    pub fn new(
        g: &Grammar,
        init: HashMap<ProductionId, f64>,
        cond: HashMap<(ProductionId, ProductionId), f64>,
    ) -> Result<TransitionModel> {
        for (&id, &p) in &init {
            check_probability(p, &g.production_key(id))?;
        }
        for (&(parent, child), &p) in &cond {
            check_probability(p, &g.production_key(child))?;
            let ret = g.production(child).return_type;
            if !g.production(parent).arg_types.contains(&ret) {
                return Err(Error::Transitions(format!(
                    "{} can never appear under {}",
                    g.production_signature(child),
                    g.production_signature(parent)
                )));
            }
        }
        TransitionModel::build(g, init, cond)
    }

    fn build(
        g: &Grammar,
        init: HashMap<ProductionId, f64>,
        cond: HashMap<(ProductionId, ProductionId), f64>,
    ) -> Result<TransitionModel> {
        let n_types = g.types().len();

        // Root rows: joint over the start types' productions, restricted per
        // type. Non-start types (reachable as a root only through a forced
        // type) use the per-type rule.
        let start_options: Vec<ProductionId> = g
            .start_types()
            .iter()
            .flat_map(|&t| g.productions_returning(t).iter().copied())
            .collect();
        let joint = fill_row(&start_options, |id| init.get(&id).copied());
        let mut start_weights: Vec<(TypeId, f64)> = g
            .start_types()
            .iter()
            .map(|&t| {
                let mass = start_options
                    .iter()
                    .zip(&joint)
                    .filter(|(&id, _)| g.production(id).return_type == t)
                    .map(|(_, w)| w)
                    .sum();
                (t, mass)
            })
            .collect();
        let start_total: f64 = start_weights.iter().map(|(_, w)| w).sum();
        if start_total > 0.0 {
            for (_, w) in &mut start_weights {
                *w /= start_total;
            }
        }

        let mut root_rows = Vec::with_capacity(n_types);
        for t in 0..n_types {
            let options = g.productions_returning(t);
            let all_zero =
                !options.is_empty() && options.iter().all(|id| init.get(id) == Some(&0.0));
            if all_zero && g.start_types().contains(&t) {
                return Err(Error::Transitions(format!(
                    "every root operator of start type {} is forbidden",
                    g.type_name(t)
                )));
            }
            let restricted: Vec<f64> = options
                .iter()
                .map(|id| {
                    start_options
                        .iter()
                        .position(|o| o == id)
                        .map_or(0.0, |i| joint[i])
                })
                .collect();
            let mass: f64 = restricted.iter().sum();
            let row = if mass > 0.0 {
                restricted.into_iter().map(|w| w / mass).collect()
            } else {
                fill_row(options, |id| init.get(&id).copied())
            };
            root_rows.push(positive(options, row));
        }

        let mut rows = HashMap::new();
        for (pid, p) in g.productions().iter().enumerate() {
            for &slot_ty in &p.arg_types {
                if rows.contains_key(&(pid, slot_ty)) {
                    continue;
                }
                let options = g.productions_returning(slot_ty);
                let all_zero = !options.is_empty()
                    && options.iter().all(|c| cond.get(&(pid, *c)) == Some(&0.0));
                if all_zero {
                    return Err(Error::Transitions(format!(
                        "every child of type {} is forbidden under {}",
                        g.type_name(slot_ty),
                        g.production_signature(pid)
                    )));
                }
                let w = fill_row(options, |c| cond.get(&(pid, c)).copied());
                rows.insert((pid, slot_ty), positive(options, w));
            }
        }

        Ok(TransitionModel {
            n_productions: g.productions().len(),
            init_explicit: init,
            cond_explicit: cond,
            root_rows,
            start_weights,
            rows,
        })
    }

    pub fn is_uniform(&self) -> bool {
        self.init_explicit.is_empty() && self.cond_explicit.is_empty()
    }

    pub fn production_count(&self) -> usize {
        self.n_productions
    }

    /// Explicit conditional entry, if the file listed one.
    pub fn explicit(&self, parent: ProductionId, child: ProductionId) -> Option<f64> {
        self.cond_explicit.get(&(parent, child)).copied()
    }

    /// Explicit zero entries: pairs that may never be adjacent.
    pub fn forbidden_pairs(&self) -> impl Iterator<Item = (ProductionId, ProductionId)> + '_ {
        self.cond_explicit
            .iter()
            .filter(|(_, &p)| p == 0.0)
            .map(|(&k, _)| k)
    }

    pub fn start_weights(&self) -> &[(TypeId, f64)] {
        &self.start_weights
    }

    /// Normalized operator row for a slot. `parent = None` is the root,
    /// drawn from `P_init` restricted to `ty`. The row only lists options
    /// with positive probability.
    pub fn operator_row(&self, parent: Option<ProductionId>, ty: TypeId) -> &[(ProductionId, f64)] {
        match parent {
            None => &self.root_rows[ty],
            Some(p) => self.rows.get(&(p, ty)).map_or(&[], Vec::as_slice),
        }
    }

    /// Like [`operator_row`](Self::operator_row), but an empty row is an error.
    pub fn operator_distribution(
        &self,
        g: &Grammar,
        parent: Option<ProductionId>,
        ty: TypeId,
    ) -> Result<&[(ProductionId, f64)]> {
        let row = self.operator_row(parent, ty);
        if row.is_empty() {
            return Err(Error::EmptySupport {
                parent: parent.map_or("<root>".to_string(), |p| g.production_signature(p)),
                ty: g.type_name(ty).to_string(),
            });
        }
        Ok(row)
    }

    /// Probability of `child` in its slot under `parent`.
    pub fn probability(
        &self,
        parent: Option<ProductionId>,
        child: ProductionId,
        ty: TypeId,
    ) -> f64 {
        self.operator_row(parent, ty)
            .iter()
            .find(|(c, _)| *c == child)
            .map_or(0.0, |(_, w)| *w)
    }

    /// True when `child` may be placed directly under `parent`.
    pub fn allows(&self, g: &Grammar, parent: Option<ProductionId>, child: ProductionId) -> bool {
        self.probability(parent, child, g.production(child).return_type) > 0.0
    }

    /// Draws a start type for a fresh tree.
    pub fn sample_start_type<R: Rng + ?Sized>(&self, g: &Grammar, rng: &mut R) -> TypeId {
        if self.start_weights.iter().all(|(_, w)| *w == 0.0) {
            // Start types without operators: only bare terminals remain.
            let starts = g.start_types();
            return starts[rng.random_range(0..starts.len())];
        }
        sample_weighted(&self.start_weights, rng)
    }
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Transitions(format!(
            "probability {p} for {what} is outside [0, 1]"
        )))
    }
}

/// Draws an item from `(item, weight)` pairs whose weights sum to ~1.
pub fn sample_weighted<T: Copy, R: Rng + ?Sized>(items: &[(T, f64)], rng: &mut R) -> T {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for &(item, w) in items {
        if u < w {
            return item;
        }
        u -= w;
    }
    // Rounding left `u` just past the end: take the last positive entry.
    items
        .iter()
        .rev()
        .find(|(_, w)| *w > 0.0)
        .or(items.last())
        .expect("nonempty distribution")
        .0
}

/// Distribution for one slot, mixing a terminal probability with the
/// operator row. `p_terminal` is the chance of stopping here when both a
/// terminal and an operator are possible.
pub fn child_distribution(
    tm: &TransitionModel,
    g: &Grammar,
    parent: Option<ProductionId>,
    slot: usize,
    required_type: TypeId,
    p_terminal: f64,
) -> Result<ChildDistribution> {
    if let Some(p) = parent {
        let expected = g.production(p).arg_types.get(slot).copied();
        if expected != Some(required_type) {
            return Err(Error::Type {
                path: vec![slot],
                message: format!(
                    "slot {slot} of {} does not take {}",
                    g.production_signature(p),
                    g.type_name(required_type)
                ),
            });
        }
    }
    let ops = tm.operator_row(parent, required_type);
    let has_term = g.has_terminal(required_type);
    let (op_mass, terminal) = match (ops.is_empty(), has_term) {
        (true, false) => {
            return Err(Error::EmptySupport {
                parent: parent.map_or("<root>".to_string(), |p| g.production_signature(p)),
                ty: g.type_name(required_type).to_string(),
            })
        }
        (true, true) => (0.0, 1.0),
        (false, false) => (1.0, 0.0),
        (false, true) => {
            let p = p_terminal.clamp(0.0, 1.0);
            (1.0 - p, p)
        }
    };
    Ok(ChildDistribution {
        operators: ops.iter().map(|&(id, w)| (id, w * op_mass)).collect(),
        terminal,
    })
}

/// Resolves `op:RET` or `op:RET(A,B)` to the matching productions.
fn resolve_key(g: &Grammar, key: &str) -> Result<Vec<ProductionId>> {
    let unknown = || Error::UnknownProduction(key.to_string());
    let (op, rest) = key.split_once(':').ok_or_else(unknown)?;
    let (ret, args) = match rest.split_once('(') {
        Some((ret, args)) => {
            let args = args.strip_suffix(')').ok_or_else(unknown)?;
            (ret, Some(args))
        }
        None => (rest, None),
    };
    resolve_op(g, op.trim(), ret.trim(), args)
}

fn resolve_op(g: &Grammar, op: &str, ret: &str, args: Option<&str>) -> Result<Vec<ProductionId>> {
    let unknown = || {
        Error::UnknownProduction(match args {
            Some(a) => format!("{op}:{ret}({a})"),
            None => format!("{op}:{ret}"),
        })
    };
    let ret = g.type_id(ret).ok_or_else(unknown)?;
    let arg_ids = match args {
        Some(a) => Some(
            a.split(',')
                .map(|s| g.type_id(s.trim()).ok_or_else(unknown))
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let ids: Vec<ProductionId> = g
        .productions_returning(ret)
        .iter()
        .copied()
        .filter(|&id| {
            let p = g.production(id);
            p.operator.symbol() == op && arg_ids.as_ref().is_none_or(|a| *a == p.arg_types)
        })
        .collect();
    if ids.is_empty() {
        Err(unknown())
    } else {
        Ok(ids)
    }
}

/// Parses a transitions file (JSON) against a grammar.
///
/// A key such as `/:F` that names several productions spreads its
/// probability evenly over them; use `/:F(E,E)` to address one.
pub fn parse_transitions(text: &str, g: &Grammar) -> Result<TransitionModel> {
    let spec: TransitionSpec = if text.trim().is_empty() {
        TransitionSpec::default()
    } else {
        serde_json::from_str(text)
            .map_err(|e| Error::Transitions(format!("malformed transitions file: {e}")))?
    };
    from_spec(&spec, g)
}

pub(crate) fn from_spec(spec: &TransitionSpec, g: &Grammar) -> Result<TransitionModel> {
    let mut init = HashMap::new();
    for e in &spec.init {
        check_probability(e.p, &format!("{}:{}", e.op, e.ty))?;
        let (op, args) = match e.op.split_once('(') {
            Some((op, a)) => (op, Some(a.strip_suffix(')').unwrap_or(a))),
            None => (e.op.as_str(), None),
        };
        let ids = resolve_op(g, op, &e.ty, args)?;
        let share = e.p / ids.len() as f64;
        for id in ids {
            if init.insert(id, share).is_some() {
                return Err(Error::Transitions(format!(
                    "duplicate init entry for {}",
                    g.production_signature(id)
                )));
            }
        }
    }
    let mut cond = HashMap::new();
    for e in &spec.cond {
        check_probability(e.p, &format!("{} -> {}", e.parent, e.child))?;
        let parents = resolve_key(g, &e.parent)?;
        let children = resolve_key(g, &e.child)?;
        let share = e.p / children.len() as f64;
        for &parent in &parents {
            for &child in &children {
                if cond.insert((parent, child), share).is_some() {
                    return Err(Error::Transitions(format!(
                        "duplicate entry {} -> {}",
                        g.production_signature(parent),
                        g.production_signature(child)
                    )));
                }
            }
        }
    }
    TransitionModel::new(g, init, cond)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;

    const HIGGS_GRAMMAR: &str = include_str!("../../fixtures/higgs.grammar");
    const TABLE1: &str = include_str!("../../fixtures/higgs_transitions.json");

    fn key(g: &Grammar, k: &str) -> ProductionId {
        let ids = resolve_key(g, k).unwrap();
        assert_eq!(ids.len(), 1, "{k}");
        ids[0]
    }

    #[test]
    fn table_one_entries() {
        let g = parse_grammar(HIGGS_GRAMMAR).unwrap();
        let tm = parse_transitions(TABLE1, &g).unwrap();
        let sqrt = key(&g, "Sqrt:E");
        let square = key(&g, "Square:E2");
        assert_eq!(tm.explicit(sqrt, key(&g, "+:E2")), Some(0.7));
        assert_eq!(tm.explicit(sqrt, square), Some(0.0));
        assert_eq!(tm.explicit(square, sqrt), Some(0.0));
        assert!(!tm.allows(&g, Some(sqrt), square));
        assert!(!tm.allows(&g, Some(square), sqrt));
    }

    #[test]
    fn empty_file_is_uniform() {
        let g = parse_grammar(HIGGS_GRAMMAR).unwrap();
        let tm = parse_transitions("", &g).unwrap();
        let plus = key(&g, "+:E");
        let e = g.type_id("E").unwrap();
        let row = tm.operator_row(Some(plus), e);
        assert_eq!(row.len(), 5);
        for &(_, p) in row {
            assert!((p - 1.0 / 5.0).abs() < 1e-12);
        }
        // A parent whose slot type has six operator alternatives.
        let cos = key(&g, "Cos:F");
        let a = g.type_id("A").unwrap();
        let acos = key(&g, "Acos:A");
        let f = g.type_id("F").unwrap();
        assert_eq!(tm.operator_row(Some(cos), a).len(), 6);
        for &(_, p) in tm.operator_row(Some(acos), f) {
            assert!((p - 1.0 / 9.0).abs() < 1e-12);
        }
        for &(_, p) in tm.operator_row(Some(cos), a) {
            assert!((p - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn root_rows_restrict_and_renormalize() {
        let g = parse_grammar(HIGGS_GRAMMAR).unwrap();
        let tm = parse_transitions(
            r#"{"init": [{"type": "E", "op": "Sqrt", "p": 0.5}, {"type": "F", "op": "Cos", "p": 0.2}]}"#,
            &g,
        )
        .unwrap();
        for &t in g.start_types() {
            let s: f64 = tm.operator_row(None, t).iter().map(|(_, p)| p).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        let s: f64 = tm.start_weights().iter().map(|(_, w)| w).sum();
        assert!((s - 1.0).abs() < 1e-9);
        let e = g.type_id("E").unwrap();
        // 0.5 explicit vs. four unlisted E operators sharing 0.3 / 18.
        let unlisted = 0.3 / 18.0;
        let expected = 0.5 / (0.5 + 4.0 * unlisted);
        assert!((tm.probability(None, key(&g, "Sqrt:E"), e) - expected).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_one() {
        let g = parse_grammar(HIGGS_GRAMMAR).unwrap();
        let tm = parse_transitions(TABLE1, &g).unwrap();
        for (pid, p) in g.productions().iter().enumerate() {
            for &t in &p.arg_types {
                let s: f64 = tm.operator_row(Some(pid), t).iter().map(|(_, w)| w).sum();
                assert!((s - 1.0).abs() < 1e-9, "{}", g.production_signature(pid));
            }
        }
    }

    #[test]
    fn bad_files_are_rejected() {
        let g = parse_grammar(HIGGS_GRAMMAR).unwrap();
        let err = parse_transitions(
            r#"{"cond": [{"parent": "Pow:E", "child": "+:E", "p": 0.5}]}"#,
            &g,
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownProduction(_)), "{err}");
        let err = parse_transitions(
            r#"{"cond": [{"parent": "+:E", "child": "+:E", "p": 1.5}]}"#,
            &g,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Transitions(_)), "{err}");
        let err = parse_transitions(
            r#"{"cond": [{"parent": "Sqrt:E", "child": "+:E", "p": 0.5}]}"#,
            &g,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Transitions(_)), "{err}");
        let all_zero: Vec<String> = ["+", "-", "*", "/", "Square"]
            .iter()
            .map(|c| format!(r#"{{"parent": "Sqrt:E", "child": "{c}:E2", "p": 0}}"#))
            .collect();
        let err =
            parse_transitions(&format!(r#"{{"cond": [{}]}}"#, all_zero.join(",")), &g).unwrap_err();
        assert!(err.to_string().contains("forbidden"), "{err}");
    }

    #[test]
    fn shared_keys_split_and_signatures_select() {
        let g = parse_grammar(HIGGS_GRAMMAR).unwrap();
        assert_eq!(resolve_key(&g, "/:F").unwrap().len(), 3);
        assert_eq!(resolve_key(&g, "/:F(E,E)").unwrap().len(), 1);
        let tm = parse_transitions(
            r#"{"cond": [{"parent": "Cos:F", "child": "-:A", "p": 0.9}]}"#,
            &g,
        )
        .unwrap();
        let a = g.type_id("A").unwrap();
        let cos = key(&g, "Cos:F");
        assert!((tm.probability(Some(cos), key(&g, "-:A"), a) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn child_distribution_mixes_terminals() {
        let g = parse_grammar(HIGGS_GRAMMAR)
            .unwrap()
            .bind([("pt", "E"), ("m2", "E2")]);
        let tm = parse_transitions(TABLE1, &g).unwrap();
        let sqrt = key(&g, "Sqrt:E");
        let e2 = g.type_id("E2").unwrap();
        let d = child_distribution(&tm, &g, Some(sqrt), 0, e2, 0.25).unwrap();
        assert!((d.total() - 1.0).abs() < 1e-9);
        assert_eq!(d.terminal, 0.25);
        assert!((d.probability(key(&g, "+:E2")) - 0.75 * 0.7).abs() < 1e-12);
        assert_eq!(d.probability(key(&g, "Square:E2")), 0.0);
        assert!(child_distribution(&tm, &g, Some(sqrt), 0, g.type_id("E").unwrap(), 0.5).is_err());
    }
}

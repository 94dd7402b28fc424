//! Typed context-free grammars over unit types, and the transition model
//! that biases operator choice.
//!
//! A [`Grammar`] is the only authority on dimensional consistency: an
//! expression is well typed exactly when it can be derived from it.

mod parse;
mod transitions;
mod validate;

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

pub use parse::{parse_grammar, render_grammar};
pub use transitions::{
    child_distribution, parse_transitions, sample_weighted, ChildDistribution, TransitionModel,
    TransitionSpec,
};
pub use validate::{validate_grammar, Issue, Severity};

use crate::error::{Error, Result};

pub type TypeId = usize;
pub type ProductionId = usize;

/// Range used for ephemeral constants of dimensionless types when the grammar
/// does not configure one.
pub const DEFAULT_CONSTANT_RANGE: (f64, f64) = (0.1, 10.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitType {
    pub name: String,
    pub description: String,
    /// Dimensionless types get ephemeral constants by default.
    pub dimensionless: bool,
}

/// Primitive operators known to the evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Operator {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
    Square,
    Exp,
    Log,
    Abs,
    Cos,
    Sin,
    Tan,
    Acos,
    Asin,
    Atan,
    Min,
    Max,
    Atan2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Display {
    Infix,
    Function,
}

impl Operator {
    pub const ALL: [Operator; 18] = [
        Operator::Add,
        Operator::Sub,
        Operator::Mul,
        Operator::Div,
        Operator::Sqrt,
        Operator::Square,
        Operator::Exp,
        Operator::Log,
        Operator::Abs,
        Operator::Cos,
        Operator::Sin,
        Operator::Tan,
        Operator::Acos,
        Operator::Asin,
        Operator::Atan,
        Operator::Min,
        Operator::Max,
        Operator::Atan2,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Operator::Add => "+",
            Operator::Sub => "-",
            Operator::Mul => "*",
            Operator::Div => "/",
            Operator::Sqrt => "Sqrt",
            Operator::Square => "Square",
            Operator::Exp => "Exp",
            Operator::Log => "Log",
            Operator::Abs => "Abs",
            Operator::Cos => "Cos",
            Operator::Sin => "Sin",
            Operator::Tan => "Tan",
            Operator::Acos => "Acos",
            Operator::Asin => "Asin",
            Operator::Atan => "Atan",
            Operator::Min => "Min",
            Operator::Max => "Max",
            Operator::Atan2 => "Atan2",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Operator> {
        Operator::ALL.into_iter().find(|op| op.symbol() == s)
    }

    pub fn arity(self) -> usize {
        match self {
            Operator::Add
            | Operator::Sub
            | Operator::Mul
            | Operator::Div
            | Operator::Min
            | Operator::Max
            | Operator::Atan2 => 2,
            _ => 1,
        }
    }

    pub fn display(self) -> Display {
        match self {
            Operator::Add | Operator::Sub | Operator::Mul | Operator::Div => Display::Infix,
            _ => Display::Function,
        }
    }

    /// Binding strength of infix operators; functions bind tightest.
    pub fn precedence(self) -> u8 {
        match self {
            Operator::Add | Operator::Sub => 1,
            Operator::Mul | Operator::Div => 2,
            _ => 3,
        }
    }

    /// Raw IEEE result. Callers map non-finite results to missing.
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Operator::Add => a + b,
            Operator::Sub => a - b,
            Operator::Mul => a * b,
            Operator::Div => {
                if b == 0.0 {
                    f64::NAN
                } else {
                    a / b
                }
            }
            Operator::Sqrt => a.sqrt(),
            Operator::Square => a * a,
            Operator::Exp => a.exp(),
            Operator::Log => a.ln(),
            Operator::Abs => a.abs(),
            Operator::Cos => a.cos(),
            Operator::Sin => a.sin(),
            Operator::Tan => a.tan(),
            Operator::Acos => a.acos(),
            Operator::Asin => a.asin(),
            Operator::Atan => a.atan(),
            Operator::Min => a.min(b),
            Operator::Max => a.max(b),
            Operator::Atan2 => a.atan2(b),
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// One alternative on the right-hand side of a rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Production {
    pub operator: Operator,
    pub return_type: TypeId,
    pub arg_types: Vec<TypeId>,
}

impl Production {
    pub fn arity(&self) -> usize {
        self.arg_types.len()
    }

    pub fn display(&self) -> Display {
        self.operator.display()
    }
}

/// Leaves available for one type: base feature columns and, optionally,
/// ephemeral constants drawn from `constant_range`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerminalSpec {
    pub ty: TypeId,
    pub base_features: Vec<String>,
    pub constant_range: Option<(f64, f64)>,
}

impl TerminalSpec {
    pub fn is_usable(&self) -> bool {
        !self.base_features.is_empty() || self.constant_range.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grammar {
    types: Vec<UnitType>,
    productions: Vec<Production>,
    /// Indexed by type; `None` when the grammar has no `<termT>` alternative.
    terminals: Vec<Option<TerminalSpec>>,
    start_types: Vec<TypeId>,
    /// Types whose constant range was set explicitly (`const` lines).
    explicit_constants: Vec<bool>,
    #[serde(skip)]
    by_return: Vec<Vec<ProductionId>>,
}

impl Grammar {
    /// Assembles a grammar from already-resolved parts, checking the
    /// structural invariants (declared types, arities, uniqueness).
    pub fn new(
        types: Vec<UnitType>,
        productions: Vec<Production>,
        terminals: Vec<Option<TerminalSpec>>,
        start_types: Vec<TypeId>,
    ) -> Result<Grammar> {
        let n = types.len();
        let explicit = vec![false; n];
        Grammar::assemble(types, productions, terminals, start_types, explicit)
    }

    pub(crate) fn assemble(
        types: Vec<UnitType>,
        productions: Vec<Production>,
        mut terminals: Vec<Option<TerminalSpec>>,
        start_types: Vec<TypeId>,
        explicit_constants: Vec<bool>,
    ) -> Result<Grammar> {
        let n = types.len();
        let mut seen = HashMap::new();
        for t in &types {
            if !is_identifier(&t.name) {
                return Err(Error::Grammar(format!("invalid type name {:?}", t.name)));
            }
            if seen.insert(t.name.clone(), ()).is_some() {
                return Err(Error::Grammar(format!("type {} declared twice", t.name)));
            }
        }
        let check = |id: TypeId| {
            if id < n {
                Ok(())
            } else {
                Err(Error::UndeclaredType(format!("#{id}")))
            }
        };
        let mut by_return = vec![Vec::new(); n];
        let mut keys = HashMap::new();
        for (id, p) in productions.iter().enumerate() {
            check(p.return_type)?;
            for &a in &p.arg_types {
                check(a)?;
            }
            if p.arity() != p.operator.arity() {
                return Err(Error::Grammar(format!(
                    "{} takes {} argument(s), got {}",
                    p.operator,
                    p.operator.arity(),
                    p.arity()
                )));
            }
            let key = (p.operator, p.return_type, p.arg_types.clone());
            if keys.insert(key, ()).is_some() {
                return Err(Error::DuplicateProduction(signature(&types, p)));
            }
            by_return[p.return_type].push(id);
        }
        terminals.resize(n, None);
        for (ty, spec) in terminals.iter().enumerate() {
            if let Some(spec) = spec {
                if spec.ty != ty {
                    return Err(Error::Grammar(format!(
                        "terminal spec for {} stored under type {}",
                        spec.ty, ty
                    )));
                }
            }
        }
        for &s in &start_types {
            check(s)?;
        }
        Ok(Grammar {
            types,
            productions,
            terminals,
            start_types,
            explicit_constants,
            by_return,
        })
    }

    pub fn types(&self) -> &[UnitType] {
        &self.types
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn production(&self, id: ProductionId) -> &Production {
        &self.productions[id]
    }

    pub fn start_types(&self) -> &[TypeId] {
        &self.start_types
    }

    pub fn type_id(&self, name: &str) -> Option<TypeId> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn type_name(&self, id: TypeId) -> &str {
        &self.types[id].name
    }

    pub fn productions_returning(&self, ty: TypeId) -> &[ProductionId] {
        &self.by_return[ty]
    }

    pub fn terminal(&self, ty: TypeId) -> Option<&TerminalSpec> {
        self.terminals[ty].as_ref()
    }

    pub fn terminals(&self) -> impl Iterator<Item = &TerminalSpec> {
        self.terminals.iter().flatten()
    }

    /// True when a leaf of this type can actually be produced.
    pub fn has_terminal(&self, ty: TypeId) -> bool {
        self.terminal(ty).is_some_and(TerminalSpec::is_usable)
    }

    /// Number of right-hand-side alternatives for `ty`, counting `<termT>`.
    pub fn alternative_count(&self, ty: TypeId) -> usize {
        self.by_return[ty].len() + usize::from(self.terminals[ty].is_some())
    }

    pub(crate) fn explicit_constants(&self, ty: TypeId) -> bool {
        self.explicit_constants[ty]
    }

    /// `op:RET`, the key used by transition files.
    pub fn production_key(&self, id: ProductionId) -> String {
        let p = &self.productions[id];
        format!("{}:{}", p.operator, self.type_name(p.return_type))
    }

    /// `op:RET(A,B)`, unique within a grammar.
    pub fn production_signature(&self, id: ProductionId) -> String {
        signature(&self.types, &self.productions[id])
    }

    pub fn find_production(
        &self,
        operator: Operator,
        return_type: TypeId,
        arg_types: &[TypeId],
    ) -> Option<ProductionId> {
        self.by_return[return_type].iter().copied().find(|&id| {
            let p = &self.productions[id];
            p.operator == operator && p.arg_types == arg_types
        })
    }

    /// Minimum number of operator levels needed to derive a terminal-only
    /// tree of each type; `None` for types that can never terminate.
    pub fn min_heights(&self) -> Vec<Option<usize>> {
        let n = self.types.len();
        let mut h: Vec<Option<usize>> = (0..n).map(|t| self.has_terminal(t).then_some(0)).collect();
        loop {
            let mut changed = false;
            for p in &self.productions {
                let need = p
                    .arg_types
                    .iter()
                    .map(|&a| h[a])
                    .try_fold(0usize, |m, x| x.map(|x| m.max(x)));
                if let Some(need) = need {
                    let cand = need + 1;
                    if h[p.return_type].is_none_or(|cur| cand < cur) {
                        h[p.return_type] = Some(cand);
                        changed = true;
                    }
                }
            }
            if !changed {
                return h;
            }
        }
    }

    /// Fills every terminal placeholder with the schema's columns of the
    /// same unit type. Columns whose unit is not a grammar type are ignored.
    pub fn bind<'a, I>(&self, schema: I) -> Grammar
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut g = self.clone();
        for spec in g.terminals.iter_mut().flatten() {
            spec.base_features.clear();
        }
        for (name, unit) in schema {
            if let Some(ty) = g.type_id(unit) {
                if let Some(spec) = g.terminals[ty].as_mut() {
                    spec.base_features.push(name.to_string());
                }
            }
        }
        g
    }

    /// Degrades the grammar to a single universal type `F`: every operator
    /// that appears in the grammar accepts and returns `F`. Terminals are
    /// left unbound; bind against a schema whose columns are all typed `F`.
    pub fn universal(&self) -> Grammar {
        let mut ops: Vec<Operator> = Vec::new();
        for p in &self.productions {
            if !ops.contains(&p.operator) {
                ops.push(p.operator);
            }
        }
        let types = vec![UnitType {
            name: UNIVERSAL_TYPE.to_string(),
            description: "universal".to_string(),
            dimensionless: true,
        }];
        let productions = ops
            .into_iter()
            .map(|operator| Production {
                operator,
                return_type: 0,
                arg_types: vec![0; operator.arity()],
            })
            .collect();
        let terminals = vec![Some(TerminalSpec {
            ty: 0,
            base_features: Vec::new(),
            constant_range: Some(DEFAULT_CONSTANT_RANGE),
        })];
        Grammar::new(types, productions, terminals, vec![0])
            .expect("universal grammar is well formed")
    }

    /// Structural equality on types, productions and terminals.
    pub fn same_structure(&self, other: &Grammar) -> bool {
        self.types == other.types
            && self.productions == other.productions
            && self.terminals == other.terminals
            && self.start_types == other.start_types
    }
}

pub const UNIVERSAL_TYPE: &str = "F";

fn signature(types: &[UnitType], p: &Production) -> String {
    let args: Vec<&str> = p
        .arg_types
        .iter()
        .map(|&a| types[a].name.as_str())
        .collect();
    format!(
        "{}:{}({})",
        p.operator,
        types[p.return_type].name,
        args.join(",")
    )
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

//! Infix formula syntax: `Cos(phi_lep - phi_tau)`, `Sqrt(Square(px) + Square(py))`.
//!
//! Rendering drops parentheses only where precedence makes them redundant
//! (functions bind tighter than `* /`, which bind tighter than `+ -`; all
//! infix operators are left-associative). Parsing accepts the same syntax
//! and infers each node's production from the grammar.

use std::fmt::Write as _;

use super::{ExprTree, Node, NodeKind};
use crate::error::{Error, Result};
use crate::grammar::{Display, Grammar, Operator, TypeId};

/// Rounds to the 6 significant digits used in rendered formulas. Constants
/// are frozen at this precision when created, so rendering is exact.
pub fn round_constant(v: f64) -> f64 {
    format!("{v:.5e}").parse().unwrap_or(v)
}

fn write_constant(v: f64, out: &mut String) {
    let _ = write!(out, "{}", round_constant(v));
}

pub fn render_infix(t: &ExprTree, g: &Grammar) -> String {
    let mut out = String::new();
    render_node(&t.root, g, &mut out);
    out
}

fn infix_precedence(n: &Node, g: &Grammar) -> Option<u8> {
    let op = g.production(n.production()?).operator;
    (op.display() == Display::Infix).then(|| op.precedence())
}

fn render_node(n: &Node, g: &Grammar, out: &mut String) {
    match &n.kind {
        NodeKind::Feature { name, .. } => out.push_str(name),
        NodeKind::Constant { value, .. } => write_constant(*value, out),
        NodeKind::Op(id) => {
            let op = g.production(*id).operator;
            match op.display() {
                Display::Function => {
                    out.push_str(op.symbol());
                    out.push('(');
                    for (i, c) in n.children.iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        render_node(c, g, out);
                    }
                    out.push(')');
                }
                Display::Infix => {
                    let prec = op.precedence();
                    let (lhs, rhs) = (&n.children[0], &n.children[1]);
                    let wrap_l = infix_precedence(lhs, g).is_some_and(|p| p < prec);
                    let wrap_r = infix_precedence(rhs, g).is_some_and(|p| p <= prec);
                    render_wrapped(lhs, g, wrap_l, out);
                    let _ = write!(out, " {} ", op.symbol());
                    render_wrapped(rhs, g, wrap_r, out);
                }
            }
        }
    }
}

fn render_wrapped(n: &Node, g: &Grammar, wrap: bool, out: &mut String) {
    if wrap {
        out.push('(');
        render_node(n, g, out);
        out.push(')');
    } else {
        render_node(n, g, out);
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Sym(char),
}

fn lex(s: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || chars[i] == '.'
                    || matches!(chars[i], 'e' | 'E')
                    || (matches!(chars[i], '+' | '-') && matches!(chars[i - 1], 'e' | 'E')))
            {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse().map_err(|_| Error::Syntax {
                line: 1,
                column: start + 1,
                message: format!("invalid number {text:?}"),
            })?;
            out.push((Tok::Num(v), start + 1));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start + 1));
        } else if "+-*/(),".contains(c) {
            out.push((Tok::Sym(c), i + 1));
            i += 1;
        } else {
            return Err(Error::Syntax {
                line: 1,
                column: i + 1,
                message: format!("unexpected character {c:?}"),
            });
        }
    }
    Ok(out)
}

#[derive(Debug)]
enum Ast {
    Num(f64),
    Var(String, usize),
    Apply(Operator, Vec<Ast>, usize),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    i: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.i).map_or(self.len + 1, |(_, c)| *c)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: 1,
            column: self.col(),
            message: message.into(),
        }
    }

    fn expr(&mut self, min_prec: u8) -> Result<Ast> {
        let mut lhs = self.primary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(c)) if "+-*/".contains(*c) => {
                    Operator::from_symbol(&c.to_string()).expect("infix symbol")
                }
                _ => break,
            };
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let col = self.col();
            self.i += 1;
            let rhs = self.expr(prec + 1)?;
            lhs = Ast::Apply(op, vec![lhs, rhs], col);
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Ast> {
        let col = self.col();
        match self.toks.get(self.i).cloned() {
            Some((Tok::Num(v), _)) => {
                self.i += 1;
                Ok(Ast::Num(v))
            }
            Some((Tok::Sym('-'), _)) => {
                self.i += 1;
                match self.peek() {
                    Some(Tok::Num(v)) => {
                        let v = -*v;
                        self.i += 1;
                        Ok(Ast::Num(v))
                    }
                    _ => Err(self.err("unary minus is only allowed on numbers")),
                }
            }
            Some((Tok::Sym('('), _)) => {
                self.i += 1;
                let e = self.expr(0)?;
                self.expect(')')?;
                Ok(e)
            }
            Some((Tok::Ident(name), _)) => {
                self.i += 1;
                if self.peek() != Some(&Tok::Sym('(')) {
                    return Ok(Ast::Var(name, col));
                }
                let op = Operator::from_symbol(&name)
                    .filter(|op| op.display() == Display::Function)
                    .ok_or_else(|| Error::Syntax {
                        line: 1,
                        column: col,
                        message: format!("unknown function {name}"),
                    })?;
                self.i += 1;
                let mut args = vec![self.expr(0)?];
                while self.peek() == Some(&Tok::Sym(',')) {
                    self.i += 1;
                    args.push(self.expr(0)?);
                }
                self.expect(')')?;
                if args.len() != op.arity() {
                    return Err(Error::Syntax {
                        line: 1,
                        column: col,
                        message: format!("{name} takes {} argument(s)", op.arity()),
                    });
                }
                Ok(Ast::Apply(op, args, col))
            }
            Some((t, _)) => Err(self.err(format!("unexpected {t:?}"))),
            None => Err(self.err("unexpected end of formula")),
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }
}

/// Possible result types of each AST node, computed bottom-up.
struct Annot {
    types: Vec<TypeId>,
    children: Vec<Annot>,
}

fn annotate(
    ast: &Ast,
    g: &Grammar,
    schema: &[(String, String)],
    path: &mut Vec<usize>,
) -> Result<Annot> {
    let type_err = |path: &Vec<usize>, message: String| Error::Type {
        path: path.clone(),
        message,
    };
    match ast {
        Ast::Num(_) => {
            let types: Vec<TypeId> = (0..g.types().len())
                .filter(|&t| g.terminal(t).is_some_and(|s| s.constant_range.is_some()))
                .collect();
            if types.is_empty() {
                return Err(type_err(path, "no type accepts constants".into()));
            }
            Ok(Annot {
                types,
                children: Vec::new(),
            })
        }
        Ast::Var(name, col) => {
            let (_, unit) = schema
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
            let ty = g
                .type_id(unit)
                .filter(|&t| g.terminal(t).is_some())
                .ok_or_else(|| {
                    type_err(
                        path,
                        format!(
                            "column {name} (column {col}) has unit {unit}, not a grammar terminal"
                        ),
                    )
                })?;
            Ok(Annot {
                types: vec![ty],
                children: Vec::new(),
            })
        }
        Ast::Apply(op, args, col) => {
            let mut children = Vec::with_capacity(args.len());
            for (i, a) in args.iter().enumerate() {
                path.push(i);
                children.push(annotate(a, g, schema, path)?);
                path.pop();
            }
            let mut types = Vec::new();
            for p in g.productions() {
                if p.operator == *op
                    && p.arg_types
                        .iter()
                        .zip(&children)
                        .all(|(a, c)| c.types.contains(a))
                    && !types.contains(&p.return_type)
                {
                    types.push(p.return_type);
                }
            }
            if types.is_empty() {
                let args: Vec<String> = children
                    .iter()
                    .map(|c| {
                        let names: Vec<&str> = c.types.iter().map(|&t| g.type_name(t)).collect();
                        names.join("|")
                    })
                    .collect();
                return Err(type_err(
                    path,
                    format!(
                        "no production {op}({}) in the grammar (column {col})",
                        args.join(", ")
                    ),
                ));
            }
            Ok(Annot { types, children })
        }
    }
}

fn build(
    ast: &Ast,
    annot: &Annot,
    expected: TypeId,
    g: &Grammar,
    path: &mut Vec<usize>,
) -> Result<Node> {
    match ast {
        Ast::Num(v) => Ok(Node::constant(*v, expected)),
        Ast::Var(name, _) => Ok(Node::feature(name.clone(), expected)),
        Ast::Apply(op, args, col) => {
            let candidates: Vec<usize> = g
                .productions_returning(expected)
                .iter()
                .copied()
                .filter(|&id| {
                    let p = g.production(id);
                    p.operator == *op
                        && p.arg_types
                            .iter()
                            .zip(&annot.children)
                            .all(|(a, c)| c.types.contains(a))
                })
                .collect();
            let id = match candidates.as_slice() {
                [id] => *id,
                [] => {
                    return Err(Error::Type {
                        path: path.clone(),
                        message: format!(
                            "{op} cannot return {} here (column {col})",
                            g.type_name(expected)
                        ),
                    })
                }
                _ => {
                    return Err(Error::Type {
                        path: path.clone(),
                        message: format!("ambiguous {op} at column {col}"),
                    })
                }
            };
            let arg_types = g.production(id).arg_types.clone();
            let mut children = Vec::with_capacity(args.len());
            for (i, ((a, c), ty)) in args.iter().zip(&annot.children).zip(arg_types).enumerate() {
                path.push(i);
                children.push(build(a, c, ty, g, path)?);
                path.pop();
            }
            Ok(Node::op(id, children))
        }
    }
}

/// Parses a formula against a grammar and a `(column, unit)` schema. The
/// result type is inferred; use [`parse_expression_as`] when it is ambiguous
/// (e.g. a bare constant).
pub fn parse_expression(s: &str, g: &Grammar, schema: &[(String, String)]) -> Result<ExprTree> {
    parse_expression_as(s, g, schema, None)
}

pub fn parse_expression_as(
    s: &str,
    g: &Grammar,
    schema: &[(String, String)],
    expected: Option<TypeId>,
) -> Result<ExprTree> {
    let toks = lex(s)?;
    let mut p = Parser {
        toks,
        i: 0,
        len: s.chars().count(),
    };
    let ast = p.expr(0)?;
    if p.i < p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    let annot = annotate(&ast, g, schema, &mut Vec::new())?;
    let ty = match expected {
        Some(t) if annot.types.contains(&t) => t,
        Some(t) => {
            return Err(Error::Type {
                path: Vec::new(),
                message: format!("formula cannot have type {}", g.type_name(t)),
            })
        }
        None => match annot.types.as_slice() {
            [t] => *t,
            _ => {
                return Err(Error::Type {
                    path: Vec::new(),
                    message: "formula type is ambiguous".into(),
                })
            }
        },
    };
    let root = build(&ast, &annot, ty, g, &mut Vec::new())?;
    Ok(ExprTree {
        root,
        return_type: ty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;

    fn setup() -> (Grammar, Vec<(String, String)>) {
        let g = parse_grammar(include_str!("../../fixtures/higgs.grammar")).unwrap();
        let s = [
            ("pt_lep", "E"),
            ("pt_tau", "E"),
            ("phi_missing", "A"),
            ("phi_lep", "A"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        (g, s)
    }

    #[test]
    fn renders_with_minimal_parentheses() {
        let (g, s) = setup();
        for text in [
            "Cos(phi_missing - phi_lep)",
            "pt_lep - (pt_tau - pt_lep)",
            "pt_lep - pt_tau - pt_lep",
            "(pt_lep + pt_tau) * 2",
            "pt_lep + pt_tau * 2",
            "pt_lep / (2 * 3)",
            "Sqrt(Square(pt_lep) + Square(pt_tau))",
            "pt_lep * -1.5",
            "pt_lep / 0.000123457",
        ] {
            let t = parse_expression(text, &g, &s).unwrap();
            assert_eq!(render_infix(&t, &g), text);
        }
    }

    #[test]
    fn redundant_parentheses_are_dropped() {
        let (g, s) = setup();
        let t = parse_expression("((pt_lep) + (pt_tau * 2))", &g, &s).unwrap();
        assert_eq!(render_infix(&t, &g), "pt_lep + pt_tau * 2");
    }

    #[test]
    fn constants_print_six_significant_digits() {
        assert_eq!(round_constant(1.23456789), 1.23457);
        assert_eq!(round_constant(0.1), 0.1);
        assert_eq!(format!("{}", round_constant(123456789.0)), "123457000");
    }

    #[test]
    fn single_feature() {
        let (g, s) = setup();
        let t = parse_expression("pt_tau", &g, &s).unwrap();
        assert_eq!(render_infix(&t, &g), "pt_tau");
        assert!(t.root.is_leaf());
    }

    #[test]
    fn errors() {
        let (g, s) = setup();
        assert!(matches!(
            parse_expression("Cos(pt_lep)", &g, &s),
            Err(Error::Type { .. })
        ));
        assert!(matches!(
            parse_expression("pt_lep +", &g, &s),
            Err(Error::Syntax { column: 9, .. })
        ));
        assert!(matches!(
            parse_expression("Foo(pt_lep)", &g, &s),
            Err(Error::Syntax { column: 1, .. })
        ));
        assert!(matches!(
            parse_expression("nope + pt_lep", &g, &s),
            Err(Error::UnknownColumn(_))
        ));
        assert!(matches!(
            parse_expression("pt_lep + 2", &g, &s),
            Err(Error::Type { .. })
        ));
        // A bare constant can only be F here; still accepted.
        assert!(parse_expression("2", &g, &s).is_ok());
    }
}

//! Line-oriented BNF grammar files.
//!
//! ```text
//! type E "Energy"
//! type F "Float" dimensionless
//! const E2 none
//! <start> ::= <E> | <F>
//! <E> ::= <E> + <E> | Sqrt(<E2>)
//!   | <termE>
//! ```
//!
//! A rule continues on the next line when it ends with `|` or when the next
//! line starts with `|`. `#` starts a comment. A type is declared either by a
//! `type` line or by being the left-hand side of a rule.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{
    is_identifier, Display, Grammar, Operator, Production, TerminalSpec, TypeId, UnitType,
    DEFAULT_CONSTANT_RANGE,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    NonTerm(String),
    Ident(String),
    Str(String),
    Num(f64),
    Sym(char),
    Define,
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

fn syntax(pos: Pos, message: impl Into<String>) -> Error {
    Error::Syntax {
        line: pos.line,
        column: pos.column,
        message: message.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn lex_line(text: &str, line: usize) -> Result<Vec<(Tok, Pos)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos {
            line,
            column: i + 1,
        };
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        match c {
            '<' => {
                let end = chars[i..]
                    .iter()
                    .position(|&c| c == '>')
                    .ok_or_else(|| syntax(pos, "unterminated '<'"))?;
                let name: String = chars[i + 1..i + end].iter().collect();
                if !is_identifier(&name) {
                    return Err(syntax(pos, format!("invalid nonterminal <{name}>")));
                }
                out.push((Tok::NonTerm(name), pos));
                i += end + 1;
            }
            ':' => {
                if chars.get(i + 1) == Some(&':') && chars.get(i + 2) == Some(&'=') {
                    out.push((Tok::Define, pos));
                    i += 3;
                } else {
                    return Err(syntax(pos, "expected '::='"));
                }
            }
            '"' => {
                let end = chars[i + 1..]
                    .iter()
                    .position(|&c| c == '"')
                    .ok_or_else(|| syntax(pos, "unterminated string"))?;
                out.push((Tok::Str(chars[i + 1..i + 1 + end].iter().collect()), pos));
                i += end + 2;
            }
            c if c.is_ascii_digit()
                || c == '.'
                || ((c == '-' || c == '+')
                    && chars
                        .get(i + 1)
                        .is_some_and(|d| d.is_ascii_digit() || *d == '.')) =>
            {
                let start = i;
                i += 1;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric()
                        || chars[i] == '.'
                        || ((chars[i] == '-' || chars[i] == '+')
                            && matches!(chars[i - 1], 'e' | 'E')))
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| syntax(pos, format!("invalid number {s:?}")))?;
                out.push((Tok::Num(v), pos));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
            }
            '+' | '-' | '*' | '/' | '(' | ')' | ',' | '|' => {
                out.push((Tok::Sym(c), pos));
                i += 1;
            }
            _ => return Err(syntax(pos, format!("unexpected character {c:?}"))),
        }
    }
    Ok(out)
}

#[derive(Debug)]
enum RawAlt {
    Terminal(String, Pos),
    Single(String, Pos),
    Apply {
        op: Operator,
        args: Vec<(String, Pos)>,
    },
}

#[derive(Debug)]
struct RawRule {
    lhs: String,
    alts: Vec<RawAlt>,
}

struct Cursor<'a> {
    toks: &'a [(Tok, Pos)],
    i: usize,
    end: Pos,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|(t, _)| t)
    }

    fn pos(&self) -> Pos {
        self.toks.get(self.i).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<(Tok, Pos)> {
        let t = self.toks.get(self.i).cloned();
        self.i += 1;
        t
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        match self.next() {
            Some((Tok::Sym(s), _)) if s == c => Ok(()),
            Some((t, p)) => Err(syntax(p, format!("expected '{c}', found {t:?}"))),
            None => Err(syntax(self.end, format!("expected '{c}'"))),
        }
    }

    fn nonterm(&mut self) -> Result<(String, Pos)> {
        match self.next() {
            Some((Tok::NonTerm(n), p)) => Ok((n, p)),
            Some((t, p)) => Err(syntax(p, format!("expected <type>, found {t:?}"))),
            None => Err(syntax(self.end, "expected <type>")),
        }
    }
}

fn parse_alt(cur: &mut Cursor<'_>) -> Result<RawAlt> {
    let pos = cur.pos();
    match cur.next() {
        Some((Tok::NonTerm(name), p)) => {
            if let Some(t) = name.strip_prefix("term").filter(|t| !t.is_empty()) {
                return Ok(RawAlt::Terminal(t.to_string(), p));
            }
            match cur.peek() {
                Some(Tok::Sym(c @ ('+' | '-' | '*' | '/'))) => {
                    let op = Operator::from_symbol(&c.to_string()).expect("infix symbol");
                    cur.next();
                    let rhs = cur.nonterm()?;
                    Ok(RawAlt::Apply {
                        op,
                        args: vec![(name, p), rhs],
                    })
                }
                _ => Ok(RawAlt::Single(name, p)),
            }
        }
        Some((Tok::Ident(f), p)) => {
            let op = Operator::from_symbol(&f)
                .filter(|op| op.display() == Display::Function)
                .ok_or_else(|| syntax(p, format!("unknown function {f}")))?;
            cur.expect_sym('(')?;
            let mut args = vec![cur.nonterm()?];
            while cur.peek() == Some(&Tok::Sym(',')) {
                cur.next();
                args.push(cur.nonterm()?);
            }
            cur.expect_sym(')')?;
            if args.len() != op.arity() {
                return Err(syntax(
                    p,
                    format!("{f} takes {} argument(s), got {}", op.arity(), args.len()),
                ));
            }
            Ok(RawAlt::Apply { op, args })
        }
        Some((t, p)) => Err(syntax(p, format!("unexpected {t:?}"))),
        None => Err(syntax(pos, "expected an alternative")),
    }
}

struct TypeDecl {
    name: String,
    description: String,
    dimensionless: bool,
}

enum Statement {
    Type(TypeDecl),
    Const(String, Option<(f64, f64)>, Pos),
    Rule(RawRule),
}

fn parse_statement(toks: &[(Tok, Pos)]) -> Result<Statement> {
    let end = toks
        .last()
        .map(|(_, p)| Pos {
            line: p.line,
            column: p.column + 1,
        })
        .expect("statement is nonempty");
    let mut cur = Cursor { toks, i: 0, end };
    let stmt = match cur.next() {
        Some((Tok::Ident(kw), _)) if kw == "type" => {
            let name = match cur.next() {
                Some((Tok::Ident(n), _)) => n,
                Some((_, p)) => return Err(syntax(p, "expected a type name")),
                None => return Err(syntax(end, "expected a type name")),
            };
            let description = match cur.peek() {
                Some(Tok::Str(_)) => match cur.next() {
                    Some((Tok::Str(s), _)) => s,
                    _ => unreachable!(),
                },
                _ => String::new(),
            };
            let dimensionless = match cur.next() {
                None => false,
                Some((Tok::Ident(f), _)) if f == "dimensionless" => true,
                Some((_, p)) => return Err(syntax(p, "expected 'dimensionless' or end of line")),
            };
            Statement::Type(TypeDecl {
                name,
                description,
                dimensionless,
            })
        }
        Some((Tok::Ident(kw), p)) if kw == "const" => {
            let name = match cur.next() {
                Some((Tok::Ident(n), _)) => n,
                Some((_, p)) => return Err(syntax(p, "expected a type name")),
                None => return Err(syntax(end, "expected a type name")),
            };
            let range = match (cur.next(), cur.next()) {
                (Some((Tok::Ident(n), _)), None) if n == "none" => None,
                (Some((Tok::Num(lo), _)), Some((Tok::Num(hi), q))) => {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(syntax(q, "constant range needs low < high"));
                    }
                    Some((lo, hi))
                }
                _ => return Err(syntax(p, "expected 'const T low high' or 'const T none'")),
            };
            Statement::Const(name, range, p)
        }
        Some((Tok::NonTerm(lhs), _)) => {
            match cur.next() {
                Some((Tok::Define, _)) => {}
                Some((_, p)) => return Err(syntax(p, "expected '::='")),
                None => return Err(syntax(end, "expected '::='")),
            }
            let mut alts = vec![parse_alt(&mut cur)?];
            while let Some(tok) = cur.next() {
                match tok {
                    (Tok::Sym('|'), _) => alts.push(parse_alt(&mut cur)?),
                    (t, p) => return Err(syntax(p, format!("expected '|', found {t:?}"))),
                }
            }
            Statement::Rule(RawRule { lhs, alts })
        }
        Some((t, p)) => return Err(syntax(p, format!("unexpected {t:?} at start of line"))),
        None => unreachable!(),
    };
    if let Some((t, p)) = cur.next() {
        return Err(syntax(p, format!("unexpected trailing {t:?}")));
    }
    Ok(stmt)
}

/// Splits the source into logical statements, joining continuation lines.
fn statements(text: &str) -> Result<Vec<Vec<(Tok, Pos)>>> {
    let mut out: Vec<Vec<(Tok, Pos)>> = Vec::new();
    let mut open = false;
    for (n, raw) in text.lines().enumerate() {
        let toks = lex_line(strip_comment(raw), n + 1)?;
        if toks.is_empty() {
            continue;
        }
        let leading_bar = matches!(toks[0].0, Tok::Sym('|'));
        if (open || leading_bar) && !out.is_empty() {
            out.last_mut().unwrap().extend(toks);
        } else if leading_bar {
            return Err(syntax(toks[0].1, "continuation without a rule"));
        } else {
            out.push(toks);
        }
        open = matches!(out.last().and_then(|s| s.last()), Some((Tok::Sym('|'), _)));
    }
    if open {
        let p = out.last().unwrap().last().unwrap().1;
        return Err(syntax(p, "rule ends with '|'"));
    }
    Ok(out)
}

type ConstDecl = (String, Option<(f64, f64)>, Pos);

/// Parses a grammar file. Terminal placeholders (`<termT>`) come back with
/// no base features; bind them to a dataset with [`Grammar::bind`].
pub fn parse_grammar(text: &str) -> Result<Grammar> {
    let mut decls: Vec<TypeDecl> = Vec::new();
    let mut consts: Vec<ConstDecl> = Vec::new();
    let mut rules: Vec<RawRule> = Vec::new();
    let mut start: Option<Vec<(String, Pos)>> = None;

    for toks in statements(text)? {
        match parse_statement(&toks)? {
            Statement::Type(d) => {
                if decls.iter().any(|x| x.name == d.name) {
                    return Err(Error::Grammar(format!("type {} declared twice", d.name)));
                }
                decls.push(d);
            }
            Statement::Const(name, range, pos) => consts.push((name, range, pos)),
            Statement::Rule(rule) if rule.lhs == "start" => {
                if start.is_some() {
                    return Err(Error::Grammar("more than one <start> rule".into()));
                }
                let mut names = Vec::new();
                for alt in rule.alts {
                    match alt {
                        RawAlt::Single(n, p) => names.push((n, p)),
                        RawAlt::Terminal(_, p) => {
                            return Err(syntax(p, "<start> alternatives must be single <type>s"))
                        }
                        RawAlt::Apply { args, .. } => {
                            return Err(syntax(
                                args[0].1,
                                "<start> alternatives must be single <type>s",
                            ))
                        }
                    }
                }
                start = Some(names);
            }
            Statement::Rule(rule) => {
                if !rules.iter().all(|r| r.lhs != rule.lhs) {
                    // A second rule for the same type extends the first.
                    let r = rules.iter_mut().find(|r| r.lhs == rule.lhs).unwrap();
                    r.alts.extend(rule.alts);
                } else {
                    if !decls.iter().any(|d| d.name == rule.lhs) {
                        decls.push(TypeDecl {
                            name: rule.lhs.clone(),
                            description: String::new(),
                            dimensionless: false,
                        });
                    }
                    rules.push(rule);
                }
            }
        }
    }

    let index: HashMap<&str, TypeId> = decls
        .iter()
        .enumerate()
        .map(|(i, d)| (d.name.as_str(), i))
        .collect();
    let resolve = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UndeclaredType(name.to_string()))
    };

    let n = decls.len();
    let mut productions: Vec<Production> = Vec::new();
    let mut has_term = vec![false; n];
    for rule in &rules {
        let ret = resolve(&rule.lhs)?;
        for alt in &rule.alts {
            match alt {
                RawAlt::Terminal(t, p) => {
                    let ty = resolve(t)?;
                    if ty != ret {
                        return Err(syntax(
                            *p,
                            format!("<term{t}> appears in the rule for <{}>", rule.lhs),
                        ));
                    }
                    if has_term[ty] {
                        return Err(Error::DuplicateProduction(format!("<term{t}>")));
                    }
                    has_term[ty] = true;
                }
                RawAlt::Single(_, p) => {
                    return Err(syntax(
                        *p,
                        "unit productions are only allowed in the <start> rule",
                    ));
                }
                RawAlt::Apply { op, args } => {
                    let arg_types = args
                        .iter()
                        .map(|(a, _)| resolve(a))
                        .collect::<Result<Vec<_>>>()?;
                    productions.push(Production {
                        operator: *op,
                        return_type: ret,
                        arg_types,
                    });
                }
            }
        }
    }
    // Canonical order: grouped by return type, then source order.
    productions.sort_by_key(|p| p.return_type);

    let mut explicit = vec![false; n];
    let mut ranges: Vec<Option<(f64, f64)>> = decls
        .iter()
        .map(|d| d.dimensionless.then_some(DEFAULT_CONSTANT_RANGE))
        .collect();
    for (name, range, pos) in consts {
        let ty = resolve(&name)?;
        if !has_term[ty] {
            return Err(syntax(
                pos,
                format!("const for {name}, which has no <term{name}> alternative"),
            ));
        }
        explicit[ty] = true;
        ranges[ty] = range;
    }
    let terminals = (0..n)
        .map(|ty| {
            has_term[ty].then(|| TerminalSpec {
                ty,
                base_features: Vec::new(),
                constant_range: ranges[ty],
            })
        })
        .collect();

    let start = start.ok_or_else(|| Error::Grammar("missing <start> rule".into()))?;
    let start_types = start
        .iter()
        .map(|(name, _)| resolve(name))
        .collect::<Result<Vec<_>>>()?;

    let types = decls
        .into_iter()
        .map(|d| UnitType {
            name: d.name,
            description: d.description,
            dimensionless: d.dimensionless,
        })
        .collect();
    Grammar::assemble(types, productions, terminals, start_types, explicit)
}

/// Renders a grammar in the file format accepted by [`parse_grammar`].
pub fn render_grammar(g: &Grammar) -> String {
    let mut out = String::new();
    for t in g.types() {
        let _ = write!(out, "type {} \"{}\"", t.name, t.description);
        if t.dimensionless {
            out.push_str(" dimensionless");
        }
        out.push('\n');
    }
    for (ty, t) in g.types().iter().enumerate() {
        if g.explicit_constants(ty) {
            match g.terminal(ty).and_then(|s| s.constant_range) {
                Some((lo, hi)) => {
                    let _ = writeln!(out, "const {} {:?} {:?}", t.name, lo, hi);
                }
                None => {
                    let _ = writeln!(out, "const {} none", t.name);
                }
            }
        }
    }
    let starts: Vec<String> = g
        .start_types()
        .iter()
        .map(|&t| format!("<{}>", g.type_name(t)))
        .collect();
    let _ = writeln!(out, "<start> ::= {}", starts.join(" | "));
    for (ty, t) in g.types().iter().enumerate() {
        let mut alts: Vec<String> = g
            .productions_returning(ty)
            .iter()
            .map(|&id| {
                let p = g.production(id);
                let args: Vec<String> = p
                    .arg_types
                    .iter()
                    .map(|&a| format!("<{}>", g.type_name(a)))
                    .collect();
                match p.display() {
                    Display::Infix => format!("{} {} {}", args[0], p.operator, args[1]),
                    Display::Function => format!("{}({})", p.operator, args.join(", ")),
                }
            })
            .collect();
        if g.terminal(ty).is_some() {
            alts.push(format!("<term{}>", t.name));
        }
        if !alts.is_empty() {
            let _ = writeln!(out, "<{}> ::= {}", t.name, alts.join(" | "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const HIGGS_GRAMMAR: &str = "\
<start> ::= <E> | <A> | <F>

<E> ::= <E> + <E> | <E> - <E> | <E> * <F>
  | <E> / <F> | Sqrt(<E2>) | <termE>

<A> ::= <A> + <A> | <A> - <A> | <A> * <A>
  | Acos(<F>) | Asin(<F>) | Atan(<F>)
  | <termA>

<F> ::= <F> + <F> | <F> - <F> | <F> * <F>
  | <E> / <E> | <A> / <A> | <F> / <F>
  | Cos(<A>) | Sin(<A>) | Tan(<A>)
  | <termF>

<E2> ::= <E2> + <E2> | <E2> - <E2>
  | <E2> * <F> | <E2> / <F>
  | Square(<E>) | <termE2>
";

    #[test]
    fn figure_one_alternative_counts() {
        let g = parse_grammar(HIGGS_GRAMMAR).unwrap();
        let names: Vec<&str> = g.types().iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, ["E", "A", "F", "E2"]);
        let count = |n: &str| g.alternative_count(g.type_id(n).unwrap());
        assert_eq!(count("E"), 6);
        assert_eq!(count("A"), 7);
        assert_eq!(count("F"), 10);
        assert_eq!(count("E2"), 6);
        assert_eq!(g.productions().len(), 5 + 6 + 9 + 5);
        assert_eq!(g.start_types().len(), 3);
    }

    #[test]
    fn minimal_grammar() {
        let g = parse_grammar("<start> ::= <F>\n<F> ::= <termF>\n").unwrap();
        assert_eq!(g.types().len(), 1);
        assert!(g.productions().is_empty());
        assert_eq!(g.terminals().count(), 1);
    }

    #[test]
    fn deleting_a_rule_leaves_a_dangling_reference() {
        let text: String = HIGGS_GRAMMAR
            .split("\n\n")
            .filter(|block| !block.starts_with("<A>"))
            .collect::<Vec<_>>()
            .join("\n\n");
        let err = parse_grammar(&text).unwrap_err();
        assert_eq!(err.to_string(), "undeclared type A");
    }

    #[test]
    fn duplicate_production_is_rejected() {
        let err = parse_grammar("<start> ::= <F>\n<F> ::= <F> + <F> | <F> + <F> | <termF>\n")
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateProduction(_)), "{err}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_grammar("<start> ::= <F>\n<F> ::= <F> ^ <F>\n").unwrap_err();
        match err {
            Error::Syntax { line, column, .. } => assert_eq!((line, column), (2, 13)),
            e => panic!("unexpected {e}"),
        }
        let err = parse_grammar("<start> ::= <F>\n<F> ::= Foo(<F>) | <termF>\n").unwrap_err();
        assert!(
            matches!(
                err,
                Error::Syntax {
                    line: 2,
                    column: 9,
                    ..
                }
            ),
            "{err}"
        );
        let err = parse_grammar("<start> ::= <F>\n<F> ::= Sqrt(<F>, <F>) | <termF>\n").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 2, .. }), "{err}");
    }

    #[test]
    fn missing_start_rule() {
        assert!(parse_grammar("<F> ::= <termF>\n").is_err());
    }

    #[test]
    fn trailing_bar_continues_the_rule() {
        let g = parse_grammar("<start> ::= <F>\n<F> ::= <F> + <F> |  # sum\n  <termF>\n").unwrap();
        assert_eq!(g.alternative_count(0), 2);
    }

    #[test]
    fn type_declarations_and_constants() {
        let g = parse_grammar(
            "type E \"Energy\"\ntype F \"Float\" dimensionless\nconst E -1.5 2e1\n\
             <start> ::= <E>\n<E> ::= <E> * <F> | <termE>\n<F> ::= <termF>\n",
        )
        .unwrap();
        assert_eq!(g.types()[0].description, "Energy");
        assert_eq!(g.terminal(0).unwrap().constant_range, Some((-1.5, 20.0)));
        assert_eq!(
            g.terminal(1).unwrap().constant_range,
            Some(DEFAULT_CONSTANT_RANGE)
        );
        let g = parse_grammar(
            "type F \"Float\" dimensionless\nconst F none\n<start> ::= <F>\n<F> ::= <termF>\n",
        )
        .unwrap();
        assert_eq!(g.terminal(0).unwrap().constant_range, None);
    }

    #[test]
    fn render_round_trips() {
        for text in [
            HIGGS_GRAMMAR,
            "type E \"Energy\"\ntype F \"Float\" dimensionless\nconst E 1 2\ntype T \"Time\"\n\
             <start> ::= <E>\n<E> ::= <E> * <F> | Atan2(<E>, <E>) | <termE>\n<F> ::= <termF>\n",
        ] {
            let g = parse_grammar(text).unwrap();
            let again = parse_grammar(&render_grammar(&g)).unwrap();
            assert!(g.same_structure(&again), "{}", render_grammar(&g));
        }
    }
}

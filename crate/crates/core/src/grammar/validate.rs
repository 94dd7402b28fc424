use std::fmt;

use serde::Serialize;

use super::Grammar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
}

impl Issue {
    fn error(message: String) -> Issue {
        Issue {
            severity: Severity::Error,
            message,
        }
    }

    fn warning(message: String) -> Issue {
        Issue {
            severity: Severity::Warning,
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Checks a (bound) grammar against a dataset schema of `(column, unit)`
/// pairs. The result is empty when the grammar is usable as is.
pub fn validate_grammar(g: &Grammar, schema: &[(String, String)], max_depth: usize) -> Vec<Issue> {
    let mut issues = Vec::new();

    for &s in g.start_types() {
        if g.productions_returning(s).is_empty() && g.terminal(s).is_none() {
            issues.push(Issue::error(format!(
                "start type {} has no production and no terminal",
                g.type_name(s)
            )));
        }
    }

    let heights = g.min_heights();
    for (ty, h) in heights.iter().enumerate() {
        match h {
            None => issues.push(Issue::error(format!(
                "dead type {}: no finite terminal-only tree exists",
                g.type_name(ty)
            ))),
            Some(h) if *h > max_depth && g.start_types().contains(&ty) => {
                issues.push(Issue::error(format!(
                    "start type {} needs depth {h}, above the maximum {max_depth}",
                    g.type_name(ty)
                )))
            }
            _ => {}
        }
    }

    for spec in g.terminals() {
        let ty = g.type_name(spec.ty);
        for f in &spec.base_features {
            match schema.iter().find(|(name, _)| name == f) {
                None => issues.push(Issue::error(format!(
                    "terminal {f} of type {ty} is not a dataset column"
                ))),
                Some((_, unit)) if unit != ty => issues.push(Issue::error(format!(
                    "type mismatch: column {f} is {unit} but is bound as {ty}"
                ))),
                Some(_) => {}
            }
        }
    }

    for (name, unit) in schema {
        if g.type_id(unit).is_none() {
            issues.push(Issue::warning(format!(
                "column {name} has unit {unit}, which the grammar does not declare"
            )));
        }
    }

    issues
}

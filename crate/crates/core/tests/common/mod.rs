#![allow(dead_code)]

use dimgp::data::{Column, Dataset};
use dimgp::grammar::{parse_grammar, parse_transitions, Grammar, TransitionModel};
use rand::Rng;

pub mod oracles;

pub const GRAMMAR: &str = include_str!("../../fixtures/higgs.grammar");
pub const TRANSITIONS: &str = include_str!("../../fixtures/higgs_transitions.json");

/// Constructed Higgs features written in the grammar's operators. A product of two energies `a * b` is
/// spelled `(Square(a + b) - Square(a - b)) / 4`.
pub const HIGGS_FEATURES: [(&str, &str); 6] = [
    (
        "(Sqrt((Square(pt_lep + (met + pt_lep + pt_tau)) - Square(pt_lep - (met + pt_lep + pt_tau))) / 4) \
         + Sqrt(Square(m_H0) + Square(met) + Square(pt_tau))) \
         / ((Cos(phi_lep - phi_tau) + 2) * (Cos(phi_lep - phi_tau) + 2) \
         * (Cos(theta_lep - theta_tau) * Cos(theta_lep - theta_tau) * Cos(theta_lep - theta_tau) * Cos(theta_lep - theta_tau)))",
        "E",
    ),
    ("Cos(phi_lep - phi_tau)", "F"),
    ("Cos(theta_lep - theta_tau)", "F"),
    ("Cos(phi_met - phi_lep)", "F"),
    (
        "(Square(pt_leading + pt_jets) - Square(pt_leading - pt_jets)) / 4 - Square(met + pt_lep)",
        "E2",
    ),
    ("Square(m_H0) + Square(pt_lep + pt_tau)", "E2"),
];

pub fn schema() -> Vec<(String, String)> {
    [
        ("pt_lep", "E"),
        ("pt_tau", "E"),
        ("met", "E"),
        ("m_H0", "E"),
        ("pt_leading", "E"),
        ("pt_jets", "E"),
        ("phi_lep", "A"),
        ("phi_tau", "A"),
        ("phi_met", "A"),
        ("theta_lep", "A"),
        ("theta_tau", "A"),
        ("n_jets", "F"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

/// The Higgs grammar bound to [`schema`].
pub fn grammar() -> Grammar {
    let s = schema();
    parse_grammar(GRAMMAR)
        .unwrap()
        .bind(s.iter().map(|(a, b)| (a.as_str(), b.as_str())))
}

pub fn transitions(g: &Grammar) -> TransitionModel {
    parse_transitions(TRANSITIONS, g).unwrap()
}

/// Random rows over [`schema`]: energies in (0, 200), angles in (-pi, pi),
/// and a sprinkling of exact zeros and missing cells.
pub fn random_rows<R: Rng>(rng: &mut R, rows: usize) -> Dataset {
    let columns = schema()
        .into_iter()
        .map(|(name, unit)| {
            let values = (0..rows)
                .map(|_| {
                    let u: f64 = rng.random();
                    if u < 0.03 {
                        f64::NAN
                    } else if u < 0.08 {
                        0.0
                    } else if unit == "A" {
                        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)
                    } else if unit == "F" {
                        rng.random_range(-2.0..2.0)
                    } else {
                        rng.random_range(0.0..200.0)
                    }
                })
                .collect();
            Column::new(name, unit, values)
        })
        .collect();
    let labels = (0..rows).map(|i| i % 2).collect();
    Dataset::new(columns, labels).unwrap()
}

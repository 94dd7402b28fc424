//! A synthetic dataset whose class depends on a transverse-momentum cone.
//!
//! Rows carry a 3-momentum `(px, py, pz)` and an energy `E1 >= |p|`, plus
//! two angles (one of them pure noise). The label is
//! `Sqrt(Square(px) + Square(py)) > 0.5 * E1`, flipped with probability
//! `noise`. No single base column separates the classes, but the ratio of
//! the transverse momentum to the energy does.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::{Column, Dataset};
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConeSpec {
    pub rows: usize,
    pub noise: f64,
    pub seed: u64,
}

impl Default for ConeSpec {
    fn default() -> Self {
        ConeSpec {
            rows: 2000,
            noise: 0.05,
            seed: 0,
        }
    }
}

pub fn cone_dataset(spec: &ConeSpec) -> Result<Dataset> {
    let mut r = rng::master(spec.seed);
    let transverse = Normal::new(0.0, 10.0).expect("valid normal");
    let longitudinal = Normal::new(0.0, 20.0).expect("valid normal");
    let mass = Uniform::new(0.0, 10.0).expect("valid range");
    let angle = Uniform::new(-std::f64::consts::PI, std::f64::consts::PI).expect("valid range");

    let n = spec.rows;
    let mut cols: [Vec<f64>; 6] = Default::default();
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let px: f64 = transverse.sample(&mut r);
        let py: f64 = transverse.sample(&mut r);
        let pz: f64 = longitudinal.sample(&mut r);
        let m: f64 = mass.sample(&mut r);
        let e1 = (px * px + py * py + pz * pz + m * m).sqrt();
        let phi1 = py.atan2(px);
        let phi2 = angle.sample(&mut r);
        let pt = (px * px + py * py).sqrt();
        let mut label = usize::from(pt > 0.5 * e1);
        if r.random::<f64>() < spec.noise {
            label = 1 - label;
        }
        for (c, v) in cols.iter_mut().zip([px, py, pz, e1, phi1, phi2]) {
            c.push(v);
        }
        labels.push(label);
    }
    let names = [
        ("px", "E"),
        ("py", "E"),
        ("pz", "E"),
        ("E1", "E"),
        ("phi1", "A"),
        ("phi2", "A"),
    ];
    let columns = names
        .iter()
        .zip(cols)
        .map(|((name, unit), v)| Column::new(*name, *unit, v))
        .collect();
    Dataset::with_classes(columns, labels, 2, "label", None)
}

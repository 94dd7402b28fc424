//! Unit-typed tabular datasets.
//!
//! Values are `f64` with `NaN` standing for a missing entry. Labels are
//! class ids `0..n_classes`.

mod io;
mod synthetic;

pub use io::{
    export_augmented, load, load_csv, load_with_schema, read_csv, write_csv, Schema, SchemaColumn,
};
pub use synthetic::{cone_dataset, ConeSpec};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, values: Vec<f64>) -> Column {
        Column {
            name: name.into(),
            unit: unit.into(),
            values,
        }
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    labels: Vec<usize>,
    n_classes: usize,
    label_name: String,
    /// Original label spellings, indexed by class id, when they were not
    /// plain integers.
    class_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>, labels: Vec<usize>) -> Result<Dataset> {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        Dataset::with_classes(columns, labels, n_classes, "label", None)
    }

    pub fn with_classes(
        columns: Vec<Column>,
        labels: Vec<usize>,
        n_classes: usize,
        label_name: impl Into<String>,
        class_names: Option<Vec<String>>,
    ) -> Result<Dataset> {
        if labels.is_empty() {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if n_classes < 2 {
            return Err(Error::Data(format!(
                "need at least 2 classes, found {n_classes}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Data(format!("label {bad} outside 0..{n_classes}")));
        }
        for (i, c) in columns.iter().enumerate() {
            if c.values.len() != labels.len() {
                return Err(Error::Data(format!(
                    "column {} has {} values for {} rows",
                    c.name,
                    c.values.len(),
                    labels.len()
                )));
            }
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Data(format!("duplicate column {}", c.name)));
            }
        }
        Ok(Dataset {
            columns,
            labels,
            n_classes,
            label_name: label_name.into(),
            class_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// `(column, unit)` pairs in column order.
    pub fn schema(&self) -> Vec<(String, String)> {
        self.columns
            .iter()
            .map(|c| (c.name.clone(), c.unit.clone()))
            .collect()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    unit: c.unit.clone(),
                    values: indices.iter().map(|&i| c.values[i]).collect(),
                })
                .collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            label_name: self.label_name.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// Copy with `extra` columns appended.
    pub fn with_columns(&self, extra: Vec<Column>) -> Result<Dataset> {
        let mut columns = self.columns.clone();
        columns.extend(extra);
        Dataset::with_classes(
            columns,
            self.labels.clone(),
            self.n_classes,
            self.label_name.clone(),
            self.class_names.clone(),
        )
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Dataset> {
        let columns = names
            .iter()
            .map(|n| {
                self.column(n)
                    .cloned()
                    .ok_or_else(|| Error::UnknownColumn(n.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            columns,
            ..self.clone()
        })
    }

    /// Copy with every column's unit replaced by `unit`.
    pub fn retyped(&self, unit: &str) -> Dataset {
        let mut d = self.clone();
        for c in &mut d.columns {
            c.unit = unit.to_string();
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratified: bool,
    /// Defaults to the run seed when absent.
    pub seed: Option<u64>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 2.0 / 3.0,
            stratified: true,
            seed: None,
        }
    }
}

/// Train/test partition. Within each part rows keep their original order.
/// Stratified splits take `round(n_c * train_fraction)` rows of every class.
pub fn split(d: &Dataset, s: &SplitSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction {} is not in (0, 1)",
            s.train_fraction
        )));
    }
    let mut rng = rng::master(s.seed.unwrap_or(seed));
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut deal = |mut idx: Vec<usize>, rng: &mut rng::Rng| {
        idx.shuffle(rng);
        let k = (idx.len() as f64 * s.train_fraction).round() as usize;
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    };
    if s.stratified {
        for c in 0..d.n_classes() {
            let idx: Vec<usize> = (0..d.n_rows()).filter(|&i| d.labels[i] == c).collect();
            if idx.len() < 2 {
                return Err(Error::Data(format!(
                    "class {c} has {} row(s); stratified splitting needs at least 2",
                    idx.len()
                )));
            }
            deal(idx, &mut rng);
        }
    } else {
        deal((0..d.n_rows()).collect(), &mut rng);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Data("split leaves an empty partition".into()));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((d.subset(&train), d.subset(&test)))
}

/// Per-class counts over equal-width bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<(f64, f64)>,
    /// `counts[bin][class]`
    pub counts: Vec<Vec<usize>>,
}

pub fn histogram(
    values: &[f64],
    labels: &[usize],
    n_classes: usize,
    bins: usize,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let (lo, hi) = values
        .iter()
        .filter(|v| !v.is_nan())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo > hi {
        return Err(Error::Data("column is entirely missing".into()));
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..bins)
        .map(|b| {
            let a = lo + width * b as f64;
            let z = if b + 1 == bins {
                hi
            } else {
                lo + width * (b + 1) as f64
            };
            (a, z)
        })
        .collect();
    let mut counts = vec![vec![0; n_classes]; bins];
    for (&v, &l) in values.iter().zip(labels) {
        if v.is_nan() {
            continue;
        }
        let b = if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[b][l] += 1;
    }
    Ok(Histogram { edges, counts })
}

impl Histogram {
    /// `bin_low,bin_high,count_class0,count_class1,...`
    pub fn to_csv(&self) -> String {
        let n_classes = self.counts.first().map_or(0, Vec::len);
        let mut out = String::from("bin_low,bin_high");
        for c in 0..n_classes {
            out.push_str(&format!(",count_class{c}"));
        }
        out.push('\n');
        for ((a, z), row) in self.edges.iter().zip(&self.counts) {
            out.push_str(&format!("{a},{z}"));
            for n in row {
                out.push_str(&format!(",{n}"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(n: usize) -> Dataset {
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = (0..n).map(|i| i as f64).collect();
        Dataset::new(vec![Column::new("x", "E", x)], labels).unwrap()
    }

    #[test]
    fn stratified_split_of_900_rows() {
        let d = balanced(900);
        let (tr, te) = split(&d, &SplitSpec::default(), 7).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (600, 300));
        assert_eq!(tr.class_counts(), vec![300, 300]);
        assert_eq!(te.class_counts(), vec![150, 150]);
        let mut all: Vec<f64> = tr.columns()[0].values.clone();
        all.extend(&te.columns()[0].values);
        all.sort_by(f64::total_cmp);
        assert_eq!(all, d.columns()[0].values);
        let (tr2, _) = split(&d, &SplitSpec::default(), 7).unwrap();
        assert_eq!(tr, tr2);
    }

    #[test]
    fn unstratified_split_is_a_partition() {
        let d = balanced(101);
        let s = SplitSpec {
            stratified: false,
            ..SplitSpec::default()
        };
        let (tr, te) = split(&d, &s, 1).unwrap();
        assert_eq!(tr.n_rows(), 67);
        assert_eq!(tr.n_rows() + te.n_rows(), 101);
    }

    #[test]
    fn tiny_class_cannot_be_stratified() {
        let d = Dataset::new(
            vec![Column::new("x", "E", vec![1.0, 2.0, 3.0])],
            vec![0, 0, 1],
        )
        .unwrap();
        assert!(split(&d, &SplitSpec::default(), 0).is_err());
    }

    #[test]
    fn histogram_cases() {
        let h = histogram(&[2.0; 5], &[0, 1, 0, 1, 1], 2, 4).unwrap();
        assert_eq!(h.counts[0], vec![2, 3]);
        assert!(h.counts[1..].iter().all(|r| r == &vec![0, 0]));

        let v = [0.0, 1.0, 2.0, 7.0, 8.0, 9.0, f64::NAN];
        let l = [0, 0, 0, 1, 1, 1, 0];
        let h = histogram(&v, &l, 2, 3).unwrap();
        assert_eq!(h.counts, vec![vec![3, 0], vec![0, 0], vec![0, 3]]);
        assert!(h
            .to_csv()
            .starts_with("bin_low,bin_high,count_class0,count_class1\n0,3,3,0\n"));

        assert!(histogram(&[f64::NAN], &[0], 2, 3).is_err());
    }
}

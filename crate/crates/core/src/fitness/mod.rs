//! Fitness functions: classifier cross-validation on the augmented dataset
//! (wrapper) or an interval class-entropy score (filter).
//!
//! Scores are reported in percentage points (100 × accuracy, or 100 × the
//! entropy score) so that gains read as "accuracy points".

mod dt;
mod entropy;
mod knn;
mod nb;

pub use dt::DecisionTree;
pub use entropy::{entropy_fitness, equal_frequency_bins, feature_entropy_score};
pub use knn::Knn;
pub use nb::NaiveBayes;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};
use crate::grammar::Grammar;
use crate::rng;
use crate::tree::{evaluate, ExprTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessKind {
    Wrapper,
    Filter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "dt", alias = "decision_tree")]
    DecisionTree,
    #[serde(rename = "knn")]
    Knn,
    #[serde(rename = "nb", alias = "naive_bayes")]
    NaiveBayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierParams {
    pub dt_max_depth: usize,
    pub dt_min_leaf: usize,
    pub knn_k: usize,
    pub entropy_bins: usize,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            dt_max_depth: 10,
            dt_min_leaf: 5,
            knn_k: 5,
            entropy_bins: 20,
        }
    }
}

/// What a node's `best_gain` records: the gain over the run baseline, or
/// the raw score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    #[default]
    Baseline,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitnessSpec {
    pub kind: FitnessKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierKind>,
    pub k_folds: usize,
    #[serde(alias = "classifier_params")]
    pub params: ClassifierParams,
    pub gain_mode: GainMode,
}

impl Default for FitnessSpec {
    fn default() -> Self {
        FitnessSpec {
            kind: FitnessKind::Wrapper,
            classifier: Some(ClassifierKind::DecisionTree),
            k_folds: 3,
            params: ClassifierParams::default(),
            gain_mode: GainMode::Baseline,
        }
    }
}

impl FitnessSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::Config(format!(
                "k_folds must be at least 2, got {}",
                self.k_folds
            )));
        }
        if self.kind == FitnessKind::Wrapper && self.classifier.is_none() {
            return Err(Error::Config("wrapper fitness needs a classifier".into()));
        }
        if self.params.dt_max_depth == 0 || self.params.knn_k == 0 || self.params.entropy_bins == 0
        {
            return Err(Error::Config(
                "classifier parameters must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Classifier used for the held-out test accuracy; filter runs use a
    /// decision tree unless one is named.
    pub fn test_classifier(&self) -> ClassifierKind {
        self.classifier.unwrap_or(ClassifierKind::DecisionTree)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitnessReport {
    pub score: f64,
    pub baseline: f64,
    pub gain: f64,
    pub valid: bool,
}

#[derive(Debug, Clone)]
pub enum Model {
    DecisionTree(DecisionTree),
    Knn(Knn),
    NaiveBayes(NaiveBayes),
}

impl Model {
    pub fn fit(
        kind: ClassifierKind,
        params: &ClassifierParams,
        x: &[&[f64]],
        y: &[usize],
        n_classes: usize,
    ) -> Result<Model> {
        Ok(match kind {
            ClassifierKind::DecisionTree => Model::DecisionTree(DecisionTree::fit(
                x,
                y,
                n_classes,
                params.dt_max_depth,
                params.dt_min_leaf,
            )?),
            ClassifierKind::Knn => Model::Knn(Knn::fit(x, y, n_classes, params.knn_k)?),
            ClassifierKind::NaiveBayes => Model::NaiveBayes(NaiveBayes::fit(x, y, n_classes)?),
        })
    }

    pub fn predict(&self, x: &[&[f64]]) -> Vec<usize> {
        match self {
            Model::DecisionTree(m) => m.predict(x),
            Model::Knn(m) => m.predict(x),
            Model::NaiveBayes(m) => m.predict(x),
        }
    }
}

fn accuracy(pred: &[usize], y: &[usize]) -> f64 {
    pred.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

/// Fold id of every row. Each class is shuffled and dealt round-robin,
/// continuing the deal across classes, so fold sizes differ by at most one
/// row and every fold's class counts are within one of proportional.
pub fn stratified_folds(labels: &[usize], n_classes: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut r = rng::master(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut r);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

/// Median of the non-missing `values[i]` for `i` in `rows`.
pub fn median(values: &[f64], rows: &[usize]) -> Option<f64> {
    let mut v: Vec<f64> = rows
        .iter()
        .map(|&i| values[i])
        .filter(|x| !x.is_nan())
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        v[m - 1] + (v[m] - v[m - 1]) / 2.0
    })
}

/// `values[rows]` with missing entries replaced by `fill`.
fn take_filled(values: &[f64], rows: &[usize], fill: f64) -> Vec<f64> {
    rows.iter()
        .map(|&i| if values[i].is_nan() { fill } else { values[i] })
        .collect()
}

struct Fold {
    train: Vec<usize>,
    valid: Vec<usize>,
    base_train: Vec<Vec<f64>>,
    base_valid: Vec<Vec<f64>>,
    y_train: Vec<usize>,
    y_valid: Vec<usize>,
}

/// Stratified k-fold cross-validation over a fixed dataset. Base columns
/// are imputed per fold once; extra columns are imputed per call. All
/// imputation uses the training part of each fold only.
pub struct CrossValidator {
    classifier: ClassifierKind,
    params: ClassifierParams,
    n_classes: usize,
    folds: Vec<Fold>,
}

impl CrossValidator {
    pub fn new(
        d: &Dataset,
        classifier: ClassifierKind,
        params: ClassifierParams,
        k: usize,
        seed: u64,
    ) -> Result<CrossValidator> {
        if k < 2 || d.n_rows() < k {
            return Err(Error::Config(format!(
                "cannot run {k}-fold cross-validation on {} rows",
                d.n_rows()
            )));
        }
        let assign = stratified_folds(d.labels(), d.n_classes(), k, seed);
        let folds = (0..k)
            .map(|f| {
                let (valid, train): (Vec<usize>, Vec<usize>) =
                    (0..d.n_rows()).partition(|&i| assign[i] == f);
                let mut base_train = Vec::new();
                let mut base_valid = Vec::new();
                for c in d.columns() {
                    let fill = median(&c.values, &train).unwrap_or(0.0);
                    base_train.push(take_filled(&c.values, &train, fill));
                    base_valid.push(take_filled(&c.values, &valid, fill));
                }
                Fold {
                    y_train: train.iter().map(|&i| d.labels()[i]).collect(),
                    y_valid: valid.iter().map(|&i| d.labels()[i]).collect(),
                    train,
                    valid,
                    base_train,
                    base_valid,
                }
            })
            .collect();
        Ok(CrossValidator {
            classifier,
            params,
            n_classes: d.n_classes(),
            folds,
        })
    }

    /// Validation-row fold id of every row.
    pub fn fold_of_rows(&self) -> Vec<usize> {
        let n = self.folds.iter().map(|f| f.valid.len()).sum();
        let mut out = vec![0; n];
        for (k, f) in self.folds.iter().enumerate() {
            for &i in &f.valid {
                out[i] = k;
            }
        }
        out
    }

    /// Mean fold accuracy in `[0, 1]` with `extra` columns (one value per
    /// dataset row) appended to the base columns.
    pub fn accuracy(&self, extra: &[&[f64]]) -> Result<f64> {
        let mut total = 0.0;
        for f in &self.folds {
            let mut ex_train = Vec::with_capacity(extra.len());
            let mut ex_valid = Vec::with_capacity(extra.len());
            for col in extra {
                let fill = median(col, &f.train).unwrap_or(0.0);
                ex_train.push(take_filled(col, &f.train, fill));
                ex_valid.push(take_filled(col, &f.valid, fill));
            }
            let xt: Vec<&[f64]> = f
                .base_train
                .iter()
                .chain(&ex_train)
                .map(Vec::as_slice)
                .collect();
            let xv: Vec<&[f64]> = f
                .base_valid
                .iter()
                .chain(&ex_valid)
                .map(Vec::as_slice)
                .collect();
            let m = Model::fit(
                self.classifier,
                &self.params,
                &xt,
                &f.y_train,
                self.n_classes,
            )?;
            total += accuracy(&m.predict(&xv), &f.y_valid);
        }
        Ok(total / self.folds.len() as f64)
    }
}

/// Mean stratified k-fold accuracy, in `[0, 1]`, on the base columns.
pub fn kfold_cv_accuracy(spec: &FitnessSpec, d: &Dataset, seed: u64) -> Result<f64> {
    spec.validate()?;
    CrossValidator::new(d, spec.test_classifier(), spec.params, spec.k_folds, seed)?.accuracy(&[])
}

/// Constructed columns of `trees` on `d`, or `None` when a tree fails to
/// evaluate or yields a column with no value at all.
pub fn constructed_columns(g: &Grammar, trees: &[ExprTree], d: &Dataset) -> Option<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(trees.len());
    for t in trees {
        let col = evaluate(t, g, d).ok()?;
        if col.iter().all(|v| v.is_nan()) {
            return None;
        }
        out.push(col);
    }
    Some(out)
}

pub struct Augmented {
    pub data: Dataset,
    pub valid: bool,
}

/// `d` with one `gp_feat_i` column per tree, missing entries imputed with
/// the column median over `d`'s rows. An all-missing constructed column
/// marks the result invalid (and is filled with 0).
pub fn augment(d: &Dataset, g: &Grammar, trees: &[ExprTree]) -> Result<Augmented> {
    if trees.is_empty() {
        return Err(Error::Config(
            "an individual needs at least one tree".into(),
        ));
    }
    let rows: Vec<usize> = (0..d.n_rows()).collect();
    let mut valid = true;
    let mut extra = Vec::with_capacity(trees.len());
    for (i, t) in trees.iter().enumerate() {
        let col = evaluate(t, g, d)?;
        let fill = median(&col, &rows).unwrap_or_else(|| {
            valid = false;
            0.0
        });
        extra.push(Column::new(
            format!("gp_feat_{i}"),
            g.type_name(t.return_type),
            take_filled(&col, &rows, fill),
        ));
    }
    Ok(Augmented {
        data: d.with_columns(extra)?,
        valid,
    })
}

/// Scores individuals on a fixed training set.
pub trait FitnessFn: Sync {
    /// Score of the base columns alone, in points.
    fn baseline(&self) -> f64;
    /// Score of an individual, in points.
    fn evaluate(&self, trees: &[ExprTree]) -> FitnessReport;
    fn gain_mode(&self) -> GainMode {
        GainMode::Baseline
    }
}

pub struct Evaluator<'a> {
    spec: FitnessSpec,
    g: &'a Grammar,
    train: &'a Dataset,
    cv: Option<CrossValidator>,
    baseline: f64,
}

impl<'a> Evaluator<'a> {
    /// Builds the folds and computes the baseline once. For the filter the
    /// baseline is the best single base column's entropy score.
    pub fn new(
        spec: &FitnessSpec,
        g: &'a Grammar,
        train: &'a Dataset,
        seed: u64,
    ) -> Result<Evaluator<'a>> {
        spec.validate()?;
        let (cv, baseline) = match spec.kind {
            FitnessKind::Wrapper => {
                let cv = CrossValidator::new(
                    train,
                    spec.test_classifier(),
                    spec.params,
                    spec.k_folds,
                    seed,
                )?;
                let b = 100.0 * cv.accuracy(&[])?;
                (Some(cv), b)
            }
            FitnessKind::Filter => {
                let b = train
                    .columns()
                    .iter()
                    .map(|c| {
                        feature_entropy_score(
                            &c.values,
                            train.labels(),
                            train.n_classes(),
                            spec.params.entropy_bins,
                        )
                    })
                    .fold(0.0, f64::max);
                (None, 100.0 * b)
            }
        };
        Ok(Evaluator {
            spec: spec.clone(),
            g,
            train,
            cv,
            baseline,
        })
    }

    fn score(&self, trees: &[ExprTree]) -> Option<f64> {
        let cols = constructed_columns(self.g, trees, self.train)?;
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        match &self.cv {
            Some(cv) => cv.accuracy(&refs).ok().map(|a| 100.0 * a),
            None => Some(
                100.0
                    * entropy_fitness(
                        &refs,
                        self.train.labels(),
                        self.train.n_classes(),
                        self.spec.params.entropy_bins,
                    ),
            ),
        }
    }
}

impl FitnessFn for Evaluator<'_> {
    fn baseline(&self) -> f64 {
        self.baseline
    }

    fn evaluate(&self, trees: &[ExprTree]) -> FitnessReport {
        let (score, valid) = match self.score(trees) {
            Some(s) => (s, true),
            None => (0.0, false),
        };
        FitnessReport {
            score,
            baseline: self.baseline,
            gain: score - self.baseline,
            valid,
        }
    }

    fn gain_mode(&self) -> GainMode {
        self.spec.gain_mode
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestScore {
    /// Test accuracy on the base columns, in points.
    pub base_accuracy: f64,
    /// Test accuracy with the constructed columns, in points.
    pub accuracy: f64,
    pub gain: f64,
}

/// Trains on `train` and scores on `test`, with and without the
/// constructed columns. Missing values on both sides are imputed with the
/// training medians.
pub fn holdout_gain(
    spec: &FitnessSpec,
    g: &Grammar,
    train: &Dataset,
    test: &Dataset,
    trees: &[ExprTree],
) -> Result<TestScore> {
    let kind = spec.test_classifier();
    let train_rows: Vec<usize> = (0..train.n_rows()).collect();
    let test_rows: Vec<usize> = (0..test.n_rows()).collect();
    let mut xt = Vec::new();
    let mut xv = Vec::new();
    for c in train.columns() {
        let tc = test
            .column(&c.name)
            .ok_or_else(|| Error::UnknownColumn(c.name.clone()))?;
        let fill = median(&c.values, &train_rows).unwrap_or(0.0);
        xt.push(take_filled(&c.values, &train_rows, fill));
        xv.push(take_filled(&tc.values, &test_rows, fill));
    }
    let score = |xt: &[Vec<f64>], xv: &[Vec<f64>]| -> Result<f64> {
        let a: Vec<&[f64]> = xt.iter().map(Vec::as_slice).collect();
        let b: Vec<&[f64]> = xv.iter().map(Vec::as_slice).collect();
        let m = Model::fit(kind, &spec.params, &a, train.labels(), train.n_classes())?;
        Ok(100.0 * accuracy(&m.predict(&b), test.labels()))
    };
    let base_accuracy = score(&xt, &xv)?;
    for t in trees {
        let a = evaluate(t, g, train)?;
        let b = evaluate(t, g, test)?;
        let fill = median(&a, &train_rows).unwrap_or(0.0);
        xt.push(take_filled(&a, &train_rows, fill));
        xv.push(take_filled(&b, &test_rows, fill));
    }
    let accuracy = score(&xt, &xv)?;
    Ok(TestScore {
        base_accuracy,
        accuracy,
        gain: accuracy - base_accuracy,
    })
}

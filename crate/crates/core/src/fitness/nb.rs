//! Gaussian naive Bayes.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NaiveBayes {
    log_prior: Vec<f64>,
    /// Features with nonzero training variance.
    features: Vec<usize>,
    /// `[class][feature]` in the order of `features`.
    mean: Vec<Vec<f64>>,
    var: Vec<Vec<f64>>,
}

impl NaiveBayes {
    /// Per-class means and (population) variances. Each variance is
    /// floored at `1e-9` times the feature's overall variance; features that
    /// are constant over the training rows carry no evidence and are skipped.
    /// A class absent from the training rows gets prior 0 and is never
    /// predicted.
    pub fn fit(x: &[&[f64]], y: &[usize], n_classes: usize) -> Result<NaiveBayes> {
        if y.is_empty() {
            return Err(Error::Data("naive bayes: empty training set".into()));
        }
        let n = y.len() as f64;
        let mut counts = vec![0usize; n_classes];
        for &c in y {
            counts[c] += 1;
        }
        let log_prior = counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    f64::NEG_INFINITY
                } else {
                    (c as f64 / n).ln()
                }
            })
            .collect();

        let mut features = Vec::new();
        let mut mean = vec![Vec::new(); n_classes];
        let mut var = vec![Vec::new(); n_classes];
        for (f, col) in x.iter().enumerate() {
            let m = col.iter().sum::<f64>() / n;
            let global = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            if !(global > 0.0 && global.is_finite()) {
                continue;
            }
            features.push(f);
            let mut sum = vec![0.0; n_classes];
            for (v, &c) in col.iter().zip(y) {
                sum[c] += v;
            }
            let mu: Vec<f64> = sum
                .iter()
                .zip(&counts)
                .map(|(s, &k)| if k == 0 { 0.0 } else { s / k as f64 })
                .collect();
            let mut ss = vec![0.0; n_classes];
            for (v, &c) in col.iter().zip(y) {
                ss[c] += (v - mu[c]).powi(2);
            }
            for c in 0..n_classes {
                let v = if counts[c] == 0 {
                    0.0
                } else {
                    ss[c] / counts[c] as f64
                };
                mean[c].push(mu[c]);
                var[c].push(v.max(1e-9 * global));
            }
        }
        Ok(NaiveBayes {
            log_prior,
            features,
            mean,
            var,
        })
    }

    /// Unnormalized log posterior of each class.
    pub fn log_joint(&self, row: impl Fn(usize) -> f64) -> Vec<f64> {
        self.log_prior
            .iter()
            .enumerate()
            .map(|(c, &lp)| {
                if lp == f64::NEG_INFINITY {
                    return lp;
                }
                let mut s = lp;
                for (j, &f) in self.features.iter().enumerate() {
                    let (m, v) = (self.mean[c][j], self.var[c][j]);
                    s += -0.5 * (2.0 * PI * v).ln() - (row(f) - m).powi(2) / (2.0 * v);
                }
                s
            })
            .collect()
    }

    /// Argmax of the log posterior; ties go to the smaller label.
    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> usize {
        let lj = self.log_joint(row);
        let mut best = 0;
        for (c, &v) in lj.iter().enumerate() {
            if v > lj[best] {
                best = c;
            }
        }
        best
    }

    pub fn predict(&self, x: &[&[f64]]) -> Vec<usize> {
        let n = x.first().map_or(0, |c| c.len());
        (0..n).map(|r| self.predict_row(|f| x[f][r])).collect()
    }
}

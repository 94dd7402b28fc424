//! k-nearest neighbours on z-scored features.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Knn {
    k: usize,
    n_classes: usize,
    /// `(feature, mean, std)` for features with nonzero spread.
    scale: Vec<(usize, f64, f64)>,
    /// Standardized training rows, row-major over `scale`.
    rows: Vec<f64>,
    labels: Vec<usize>,
}

impl Knn {
    /// Stores the training rows standardized with their own mean and
    /// (population) standard deviation. Constant columns are dropped. `k`
    /// is clamped to the number of rows.
    pub fn fit(x: &[&[f64]], y: &[usize], n_classes: usize, k: usize) -> Result<Knn> {
        if y.is_empty() {
            return Err(Error::Data("knn: empty training set".into()));
        }
        let n = y.len() as f64;
        let mut scale = Vec::new();
        for (f, col) in x.iter().enumerate() {
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if std > 0.0 && std.is_finite() {
                scale.push((f, mean, std));
            }
        }
        let mut rows = Vec::with_capacity(y.len() * scale.len());
        rows.extend(
            (0..y.len()).flat_map(|r| scale.iter().map(move |&(f, m, s)| (x[f][r] - m) / s)),
        );
        Ok(Knn {
            k: k.clamp(1, y.len()),
            n_classes,
            scale,
            rows,
            labels: y.to_vec(),
        })
    }

    /// Majority vote among the `k` nearest rows (squared Euclidean
    /// distance, ties by training index); vote ties go to the smaller label.
    pub fn predict_row(&self, row: impl Fn(usize) -> f64, buf: &mut Vec<(f64, usize)>) -> usize {
        let d = self.scale.len();
        let q: Vec<f64> = self
            .scale
            .iter()
            .map(|&(f, m, s)| (row(f) - m) / s)
            .collect();
        buf.clear();
        for i in 0..self.labels.len() {
            let r = &self.rows[i * d..(i + 1) * d];
            let dist: f64 = r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
            buf.push((dist, i));
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < buf.len() {
            buf.select_nth_unstable_by(self.k - 1, cmp);
        }
        let mut votes = vec![0usize; self.n_classes];
        for &(_, i) in &buf[..self.k] {
            votes[self.labels[i]] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        best
    }

    pub fn predict(&self, x: &[&[f64]]) -> Vec<usize> {
        let n = x.first().map_or(0, |c| c.len());
        let mut buf = Vec::with_capacity(self.labels.len());
        (0..n)
            .map(|r| self.predict_row(|f| x[f][r], &mut buf))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_with_k1() {
        let a = [0.0, 1.0, 5.0, 9.0];
        let b = [3.0, 3.0, 3.0, 3.0];
        let y = [0, 1, 0, 1];
        let m = Knn::fit(&[&a, &b], &y, 2, 1).unwrap();
        assert_eq!(m.predict(&[&a, &b]), y.to_vec());
    }

    #[test]
    fn collinear_hand_case() {
        // Points at 0, 1, 3 with labels 0, 1, 1; query at 1.9.
        // Distances 1.9, 0.9, 1.1: k=1 -> 1, k=2 -> {1, 1} -> 1.
        // Query at 0.4: distances 0.4, 0.6, 2.6: k=2 -> {0, 1} tie -> 0.
        let x = [0.0, 1.0, 3.0];
        let y = [0, 1, 1];
        let m1 = Knn::fit(&[&x], &y, 2, 1).unwrap();
        let m2 = Knn::fit(&[&x], &y, 2, 2).unwrap();
        assert_eq!(m1.predict(&[&[1.9]]), vec![1]);
        assert_eq!(m2.predict(&[&[1.9]]), vec![1]);
        assert_eq!(m2.predict(&[&[0.4]]), vec![0]);
        let m9 = Knn::fit(&[&x], &y, 2, 9).unwrap();
        assert_eq!(m9.predict(&[&[-50.0]]), vec![1]);
    }

    #[test]
    fn constant_columns_are_ignored() {
        let x = [1.0, 1.0, 1.0];
        let m = Knn::fit(&[&x], &[1, 0, 1], 2, 3).unwrap();
        assert_eq!(m.predict(&[&[7.0]]), vec![1]);
    }
}

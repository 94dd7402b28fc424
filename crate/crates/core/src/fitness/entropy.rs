//! Interval class-entropy filter score.

/// Shannon entropy in bits of a count vector.
fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Equal-frequency bin of each value, by rank. A run of tied values stays
/// in the bin of its first element, so the binning depends only on the
/// order of the values.
pub fn equal_frequency_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0; n];
    let mut current = 0;
    for (rank, &i) in order.iter().enumerate() {
        if rank == 0 || values[i] != values[order[rank - 1]] {
            current = rank * bins / n;
        }
        out[i] = current;
    }
    out
}

/// `1 - H(class | bin) / H(class)` over the non-missing rows, in `[0, 1]`.
/// A feature that falls into a single bin, or labels with zero entropy,
/// score 0.
pub fn feature_entropy_score(
    values: &[f64],
    labels: &[usize],
    n_classes: usize,
    bins: usize,
) -> f64 {
    let rows: Vec<usize> = (0..values.len()).filter(|&i| !values[i].is_nan()).collect();
    if rows.is_empty() || bins == 0 {
        return 0.0;
    }
    let v: Vec<f64> = rows.iter().map(|&i| values[i]).collect();
    let b = equal_frequency_bins(&v, bins);
    let mut table = vec![vec![0usize; n_classes]; bins];
    let mut total = vec![0usize; n_classes];
    for (&bin, &i) in b.iter().zip(&rows) {
        table[bin][labels[i]] += 1;
        total[labels[i]] += 1;
    }
    let used = table.iter().filter(|r| r.iter().any(|&c| c > 0)).count();
    let h = entropy(&total);
    if used <= 1 || h == 0.0 {
        return 0.0;
    }
    let n = rows.len() as f64;
    let cond: f64 = table
        .iter()
        .map(|r| r.iter().sum::<usize>() as f64 / n * entropy(r))
        .sum();
    (1.0 - cond / h).clamp(0.0, 1.0)
}

/// Mean feature score over the constructed columns.
pub fn entropy_fitness(columns: &[&[f64]], labels: &[usize], n_classes: usize, bins: usize) -> f64 {
    if columns.is_empty() {
        return 0.0;
    }
    let s: f64 = columns
        .iter()
        .map(|c| feature_entropy_score(c, labels, n_classes, bins))
        .sum();
    (s / columns.len() as f64).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_by_rank_with_ties() {
        let b = equal_frequency_bins(&[5.0, 1.0, 2.0, 2.0, 9.0, 3.0], 3);
        // ranks: 1->0, 2->1, 2->2 (tie, stays with rank 1), 3->3, 5->4, 9->5
        assert_eq!(b, vec![2, 0, 0, 0, 2, 1]);
    }

    #[test]
    fn ordering_constant_and_missing() {
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        let y: Vec<usize> = (0..100).map(|i| usize::from(i >= 50)).collect();
        assert_eq!(feature_entropy_score(&x, &y, 2, 20), 1.0);
        assert_eq!(feature_entropy_score(&[4.0; 100], &y, 2, 20), 0.0);
        assert_eq!(feature_entropy_score(&[f64::NAN; 100], &y, 2, 20), 0.0);
        assert_eq!(entropy_fitness(&[&x, &[4.0; 100]], &y, 2, 20), 0.5);
    }
}

//! Summary statistics and Welch's unequal-variance t-test.

use serde::Serialize;
use statrs::function::beta::beta_reg;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); 0 for fewer than 2 values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Population standard deviation (`n` denominator).
pub fn pop_std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchResult {
    pub t: f64,
    pub dof: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Set when both samples have zero variance and different means; `t` is
    /// then infinite and `p` is 0.
    pub degenerate: bool,
}

/// Two-sided Welch t-test with Welch–Satterthwaite degrees of freedom.
///
/// Panics if either sample has fewer than 2 values.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> WelchResult {
    assert!(
        a.len() >= 2 && b.len() >= 2,
        "welch_t_test needs 2+ values per sample"
    );
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (std_dev(a).powi(2) / na, std_dev(b).powi(2) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        let equal = ma == mb;
        return WelchResult {
            t: if equal {
                0.0
            } else {
                (ma - mb).signum() * f64::INFINITY
            },
            dof: f64::NAN,
            p: if equal { 1.0 } else { 0.0 },
            degenerate: !equal,
        };
    }
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    WelchResult {
        t,
        dof,
        p: t_two_sided(t, dof),
        degenerate: false,
    }
}

/// `P(|T| >= |t|)` for Student's t with `dof` degrees of freedom.
pub fn t_two_sided(t: f64, dof: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let x = dof / (dof + t * t);
    beta_reg(dof / 2.0, 0.5, x).clamp(0.0, 1.0)
}

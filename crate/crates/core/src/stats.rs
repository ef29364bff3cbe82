//! Gamma-function and chi-square distribution routines.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the approximation in its accurate range.
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cf(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// CDF of χ²_k at x. With k = 0 the law is a point mass at zero.
pub fn chi2_cdf(x: f64, dof: usize) -> f64 {
    if dof == 0 {
        return if x >= 0.0 { 1.0 } else { 0.0 };
    }
    gamma_p(0.5 * dof as f64, 0.5 * x)
}

/// Upper tail of χ²_k at x.
pub fn chi2_sf(x: f64, dof: usize) -> f64 {
    if dof == 0 {
        return if x >= 0.0 { 0.0 } else { 1.0 };
    }
    gamma_q(0.5 * dof as f64, 0.5 * x)
}

/// Inverse CDF of χ²_k by bracketing and bisection.
pub fn chi2_quantile(p: f64, dof: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile level {p} outside (0, 1)")));
    }
    if dof == 0 {
        return Ok(0.0);
    }
    let k = dof as f64;
    let mut lo = 0.0;
    let mut hi = k.max(1.0);
    while chi2_cdf(hi, dof) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(mid, dof) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let rx = ranks(x);
    let ry = ranks(y);
    pearson(&rx, &ry)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Ordinary least-squares polynomial fit; coefficients lowest order first,
/// plus the residual sum of squares.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<(Vec<f64>, f64)> {
    let n = x.len();
    let k = degree + 1;
    if n != y.len() || n < k {
        return Err(Error::Domain("polynomial fit needs at least degree+1 points".into()));
    }
    let a = nalgebra::DMatrix::from_fn(n, k, |i, j| x[i].powi(j as i32));
    let b = nalgebra::DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&b, 1e-14).map_err(|e| Error::Domain(e.to_string()))?;
    let resid = &a * &coef - &b;
    Ok((coef.iter().copied().collect(), resid.norm_squared()))
}

/// Coefficient of determination of a fit with residual sum `rss`.
pub fn r_squared(y: &[f64], rss: f64) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if tss == 0.0 {
        return if rss == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - rss / tss
}

/// Gaussian-likelihood AIC for a least-squares fit with `params` parameters.
pub fn aic(n: usize, rss: f64, params: usize) -> f64 {
    let n = n as f64;
    n * (rss.max(1e-300) / n).ln() + 2.0 * params as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert!(ln_gamma(2.0).abs() < 1e-13);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-13);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn chi2_two_dof_is_exponential() {
        for x in [0.1, 1.0, 3.0, 12.0] {
            assert!((chi2_cdf(x, 2) - (1.0 - (-x / 2.0).exp())).abs() < 1e-13);
        }
        assert!((chi2_quantile(0.5, 2).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn quantile_reference_values() {
        assert!((chi2_quantile(0.99, 1).unwrap() - 6.635).abs() < 1e-3);
        assert!((chi2_quantile(0.99, 15).unwrap() - 30.578).abs() < 1e-2);
        for dof in [1, 3, 7, 15, 40] {
            let q = chi2_quantile(0.99, dof).unwrap();
            assert!((chi2_cdf(q, dof) - 0.99).abs() < 1e-8);
        }
        assert_eq!(chi2_quantile(0.99, 0).unwrap(), 0.0);
        assert!(chi2_quantile(1.0, 3).is_err());
    }

    #[test]
    fn spearman_basic() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[9.0, 4.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(spearman(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn polyfit_recovers_quadratic() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 2.0 * v + 3.0 * v * v).collect();
        let (c, rss) = polyfit(&x, &y, 2).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-10 && (c[1] + 2.0).abs() < 1e-10 && (c[2] - 3.0).abs() < 1e-10);
        assert!(rss < 1e-20);
        assert!((r_squared(&y, rss) - 1.0).abs() < 1e-12);
    }
}

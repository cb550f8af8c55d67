//! Small statistical toolbox: moments, ordinary least squares, the standard
//! normal distribution, and a two-sample Kolmogorov–Smirnov distance.

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Standard error of the sample mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of a binomial frequency estimate p̂ = hits/n.
pub fn binomial_se(p_hat: f64, n: usize) -> f64 {
    (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

/// Ordinary least squares fit y = intercept + slope · x.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

pub fn ols(x: &[f64], y: &[f64]) -> OlsFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "OLS needs at least two points");
    let xm = mean(x);
    let ym = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y.iter()) {
        sxx += (xi - xm) * (xi - xm);
        sxy += (xi - xm) * (yi - ym);
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residuals = x
        .iter()
        .zip(y.iter())
        .map(|(&xi, &yi)| yi - intercept - slope * xi)
        .collect();
    OlsFit {
        slope,
        intercept,
        residuals,
    }
}

/// True when the residual signs show a pattern that is unlikely under random
/// noise at the 95% level (all residuals share a sign with at least six
/// points; 2·2⁻⁶ ≈ 3.1%).
pub fn residuals_show_sign_pattern(residuals: &[f64]) -> bool {
    if residuals.len() < 6 {
        return false;
    }
    let pos = residuals.iter().filter(|r| **r > 0.0).count();
    pos == 0 || pos == residuals.len()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail P(Z > x).
pub fn normal_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Two-sample Kolmogorov–Smirnov statistic sup |F₁ − F₂|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0_f64;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Critical KS distance `c(α)·√((n+m)/(nm))`; `c` ≈ 1.95 corresponds to
/// α ≈ 0.001.
pub fn ks_threshold(n: usize, m: usize, c: f64) -> f64 {
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let fit = ols(&x, &y);
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_tail(1.959963984540054) - 0.025).abs() < 1e-10);
        assert!((normal_tail(3.0) - 1.3498980316300946e-3).abs() < 1e-12);
    }

    #[test]
    fn ks_disjoint_samples() {
        let a = [0.0, 0.1, 0.2];
        let b = [1.0, 1.1, 1.2];
        assert!((ks_statistic(&a, &b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ks_identical_samples() {
        let a = [0.3, 0.9, 1.4, 2.0];
        assert_eq!(ks_statistic(&a, &a), 0.0);
    }

    #[test]
    fn sign_pattern_detection() {
        assert!(residuals_show_sign_pattern(&[1.0; 6]));
        assert!(!residuals_show_sign_pattern(&[1.0; 5]));
        assert!(!residuals_show_sign_pattern(&[
            1.0, -1.0, 1.0, -1.0, 1.0, -1.0
        ]));
    }
}

//! Small numeric utilities: quadrature, tabulated CDFs and
//! Kolmogorov-Smirnov statistics.
//!
//! These exist mainly as independent oracles for the statistical checks in
//! the test and acceptance suites: densities known only up to a constant are
//! normalized by quadrature and compared against empirical draws.

use crate::error::{Error, Result};

/// Composite Simpson quadrature of `f` on `[a, b]` with `2*half_panels`
/// panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, half_panels: usize) -> f64 {
    assert!(half_panels >= 1 && b >= a);
    let n = 2 * half_panels;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// A cumulative distribution function tabulated on a uniform grid, built by
/// quadrature from an unnormalized density.
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    lo: f64,
    hi: f64,
    values: Vec<f64>,
}

impl TabulatedCdf {
    /// Normalizes `density` on `[lo, hi]` and tabulates its CDF on a grid of
    /// `cells + 1` points. Each cell is integrated with Simpson's rule, so the
    /// table is accurate to `O(h^4)`.
    pub fn from_density<F: Fn(f64) -> f64>(density: F, lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(hi > lo) || cells < 2 {
            return Err(Error::InvalidArgument(format!(
                "bad CDF grid: [{lo}, {hi}] with {cells} cells"
            )));
        }
        let h = (hi - lo) / cells as f64;
        let mut values = Vec::with_capacity(cells + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for i in 0..cells {
            let a = lo + i as f64 * h;
            acc += simpson(&density, a, a + h, 4);
            values.push(acc);
        }
        let total = *values.last().unwrap();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "density does not integrate to a positive finite mass on [{lo}, {hi}] (got {total})"
            )));
        }
        for v in &mut values {
            *v /= total;
        }
        Ok(Self { lo, hi, values })
    }

    /// Evaluates the CDF at `x` by linear interpolation in the table.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let cells = self.values.len() - 1;
        let t = (x - self.lo) / (self.hi - self.lo) * cells as f64;
        let i = (t.floor() as usize).min(cells - 1);
        let frac = t - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

/// One-sample Kolmogorov-Smirnov statistic `sup_x |F_n(x) - F(x)|`.
///
/// Sorts a copy of the draws; `cdf` must be the hypothesized CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(draws: &[f64], cdf: F) -> f64 {
    assert!(!draws.is_empty());
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        let hi = (i as f64 + 1.0) / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Asymptotic one-sample KS critical value at significance `alpha`:
/// `c(alpha) / sqrt(n)` with `c(alpha) = sqrt(-ln(alpha/2)/2)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    assert!(n > 0 && alpha > 0.0 && alpha < 1.0);
    ((-(alpha / 2.0).ln()) / 2.0).sqrt() / (n as f64).sqrt()
}

/// Two-sample KS statistic between empirical samples `a` and `b`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Two-sample KS critical value at significance `alpha`.
pub fn ks_two_sample_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    assert!(n > 0 && m > 0);
    let c = ((-(alpha / 2.0).ln()) / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Log of the gamma function, Lanczos approximation (g = 7, 9 terms,
/// relative error around 1e-13).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection formula
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma function `P(a, x)`, by the standard
/// series / continued-fraction split.
pub fn regularized_lower_gamma(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 0.0;
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        // series representation
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        sum * log_prefactor.exp()
    } else {
        // Lentz continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-17 {
                break;
            }
        }
        1.0 - log_prefactor.exp() * h
    }
}

/// CDF of a Gamma(shape, rate) distribution.
pub fn gamma_cdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        regularized_lower_gamma(shape, rate * x)
    }
}

/// Standard normal CDF via the incomplete gamma function.
pub fn standard_normal_cdf(x: f64) -> f64 {
    let p = regularized_lower_gamma(0.5, 0.5 * x * x);
    if x >= 0.0 {
        0.5 * (1.0 + p)
    } else {
        0.5 * (1.0 - p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_integrates_polynomials_exactly() {
        let v = simpson(|x| x * x * x, 0.0, 2.0, 1);
        assert_relative_eq!(v, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn tabulated_cdf_matches_gaussian() {
        let cdf = TabulatedCdf::from_density(|x: f64| (-0.5 * x * x).exp(), -10.0, 10.0, 4000)
            .unwrap();
        for &(x, want) in &[(0.0, 0.5), (1.0, 0.8413447460685429), (-1.96, 0.024997895148220435)] {
            assert_relative_eq!(cdf.eval(x), want, epsilon = 1e-7);
        }
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_relative_eq!(standard_normal_cdf(0.0), 0.5, epsilon = 1e-14);
        assert_relative_eq!(standard_normal_cdf(1.0), 0.8413447460685429, epsilon = 1e-12);
        assert_relative_eq!(standard_normal_cdf(-2.5), 0.006209665325776132, epsilon = 1e-12);
    }

    #[test]
    fn ln_gamma_reference_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(5.0), 24.0f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(0.5), std::f64::consts::PI.ln() * 0.5, epsilon = 1e-12);
    }

    #[test]
    fn gamma_cdf_reference_values() {
        // Gamma(1, rate) is Exponential(rate).
        assert_relative_eq!(gamma_cdf(0.5, 1.0, 2.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
        // Median of Gamma(2, 1) (computed once by bisection on the series).
        assert_relative_eq!(regularized_lower_gamma(2.0, 1.6783469900166608), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn ks_statistic_detects_shift() {
        // Uniform draws against the uniform CDF: D should be small.
        let draws: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_statistic(&draws, |x| x.clamp(0.0, 1.0));
        assert!(d < 0.001);
        // Against a shifted CDF it should be large.
        let d = ks_statistic(&draws, |x| (x - 0.2).clamp(0.0, 1.0));
        assert!(d > 0.15);
    }

    #[test]
    fn two_sample_ks_on_identical_samples_is_zero() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }
}

//! Student-t tests and confidence intervals.

use serde::{Deserialize, Serialize};

use crate::error::StatsError;

/// Natural log of the gamma function (Lanczos approximation, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
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
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail probability `P(|T| ≥ |t|)` for `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// Student-t cumulative distribution function.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * t_two_sided_p(t, df);
    if t >= 0.0 { 1.0 - tail } else { tail }
}

/// Quantile of the Student-t distribution, by bisection on the CDF.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level {p} outside (0, 1)");
    let (mut lo, mut hi) = (-1.0, 1.0);
    while t_cdf(lo, df) > p {
        lo *= 2.0;
    }
    while t_cdf(hi, df) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Zero variance with a nonzero difference: t is infinite and p is
    /// reported as 0.
    pub degenerate: bool,
}

fn finish(diff: f64, se: f64, df: f64) -> TTest {
    if se == 0.0 {
        return if diff == 0.0 {
            TTest { t: 0.0, df, p: 1.0, degenerate: false }
        } else {
            TTest { t: diff.signum() * f64::INFINITY, df, p: 0.0, degenerate: true }
        };
    }
    let t = diff / se;
    let p = if t == 0.0 { 1.0 } else { t_two_sided_p(t, df) };
    TTest { t, df, p, degenerate: false }
}

fn need_two(n: usize) -> Result<(), StatsError> {
    if n < 2 {
        return Err(StatsError::TooFewSamples { n });
    }
    Ok(())
}

/// One-sample t-test of `samples` against `mu0`.
pub fn t_test_1sample(samples: &[f64], mu0: f64) -> Result<TTest, StatsError> {
    need_two(samples.len())?;
    let n = samples.len() as f64;
    let se = (variance(samples) / n).sqrt();
    Ok(finish(mean(samples) - mu0, se, n - 1.0))
}

/// Welch's unequal-variance two-sample t-test with Welch–Satterthwaite
/// degrees of freedom.
pub fn t_test_2sample_welch(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    need_two(a.len())?;
    need_two(b.len())?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (variance(a) / na, variance(b) / nb);
    let se2 = qa + qb;
    let df = if se2 == 0.0 {
        na + nb - 2.0
    } else {
        se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0))
    };
    Ok(finish(mean(a) - mean(b), se2.sqrt(), df))
}

/// Half-width of the `level` confidence interval of the mean.
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<f64, StatsError> {
    need_two(samples.len())?;
    let n = samples.len() as f64;
    let sd = variance(samples).sqrt();
    if sd == 0.0 {
        return Ok(0.0);
    }
    Ok(t_quantile(1.0 - (1.0 - level) / 2.0, n - 1.0) * sd / n.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn fixture_matches_reference() {
        // scipy.stats.ttest_1samp([1, 2, 3, 4, 5], 0)
        let r = t_test_1sample(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.0).unwrap();
        assert!((r.t - 4.242640687119285).abs() < 1e-12);
        assert_eq!(r.df, 4.0);
        assert!((r.p - 0.013235599563682695).abs() < 1e-12);
        // scipy.stats.t.ppf(0.975, 4)
        assert!((t_quantile(0.975, 4.0) - 2.7764451051977987).abs() < 1e-10);
    }

    #[test]
    fn degenerate_cases() {
        let r = t_test_1sample(&[0.3, 0.3, 0.3], 0.3).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        let r = t_test_1sample(&[0.3, 0.3, 0.3], 0.1).unwrap();
        assert!(r.degenerate && r.p == 0.0 && r.t == f64::INFINITY);
        let r = t_test_2sample_welch(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        assert!(matches!(t_test_1sample(&[1.0], 0.0), Err(StatsError::TooFewSamples { n: 1 })));
        assert_eq!(confidence_interval(&[2.0, 2.0, 2.0], 0.95).unwrap(), 0.0);
    }

    #[test]
    fn welch_reference() {
        // scipy.stats.ttest_ind([1, 2, 3, 4, 5], [2, 4, 6, 8, 11], equal_var=False)
        let r = t_test_2sample_welch(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 6.0, 8.0, 11.0]).unwrap();
        assert!((r.t - -1.866277899263374).abs() < 1e-10, "{}", r.t);
        assert!((r.df - 5.573280030949771).abs() < 1e-10, "{}", r.df);
        assert!((r.p - 0.11499016052991887).abs() < 1e-9, "{}", r.p);
    }
}

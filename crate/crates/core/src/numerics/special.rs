//! Special functions: log-gamma, digamma, trigamma (scalar and multivariate),
//! the error function, and regularized incomplete gamma / beta integrals.
//!
//! All routines are built from exact mathematical constants (Bernoulli
//! numbers, factorial ratios) via asymptotic series, upward recurrences,
//! power series, and continued fractions evaluated with the modified Lentz
//! algorithm — no fitted coefficient tables. Accuracy is documented per
//! function and pinned by reference values in the unit tests.

use crate::error::{AmpError, Result};

/// Bernoulli numbers B_2, B_4, ..., B_16 as exact rationals.
const BERNOULLI_2K: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// ln(2*pi)/2, used by the Stirling series.
const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_74;

/// ln(pi), used by the multivariate gamma normalisation.
const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Arguments at or above this threshold use the asymptotic series directly;
/// smaller arguments are shifted up by recurrence first.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

/// Natural log of the gamma function for x > 0.
///
/// Stirling's series with Bernoulli terms through B_16 for x >= 10
/// (truncation error < 2e-18 there), with the recurrence
/// ln Gamma(x) = ln Gamma(x + k) - sum ln(x + i) below. Absolute error is
/// below 1e-12 for 1 <= x <= 200 and a few ulps relative beyond.
pub fn log_gamma(x: f64) -> f64 {
    assert!(
        x > 0.0 && x.is_finite(),
        "log_gamma requires finite x > 0, got {x}"
    );
    let mut shift = 0.0;
    let mut y = x;
    while y < ASYMPTOTIC_THRESHOLD {
        shift += y.ln();
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut power = inv;
    for (k, b) in BERNOULLI_2K.iter().enumerate() {
        let two_k = 2.0 * (k as f64 + 1.0);
        series += b / (two_k * (two_k - 1.0)) * power;
        power *= inv2;
    }
    (y - 0.5) * y.ln() - y + HALF_LN_TWO_PI + series - shift
}

/// Digamma function psi(x) = d/dx ln Gamma(x) for x > 0.
///
/// Asymptotic series psi(x) ~ ln x - 1/(2x) - sum B_2k / (2k x^2k) for
/// x >= 10, recurrence psi(x) = psi(x + 1) - 1/x below. Absolute error
/// below 1e-12 for x >= 1 (and for x >= 0.1 in practice).
pub fn digamma(x: f64) -> f64 {
    assert!(
        x > 0.0 && x.is_finite(),
        "digamma requires finite x > 0, got {x}"
    );
    let mut shift = 0.0;
    let mut y = x;
    while y < ASYMPTOTIC_THRESHOLD {
        shift += 1.0 / y;
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut power = inv2;
    for (k, b) in BERNOULLI_2K.iter().enumerate() {
        let two_k = 2.0 * (k as f64 + 1.0);
        series += b / two_k * power;
        power *= inv2;
    }
    y.ln() - 0.5 * inv - series - shift
}

/// Trigamma function psi'(x) for x > 0.
///
/// Asymptotic series psi'(x) ~ 1/x + 1/(2x^2) + sum B_2k x^-(2k+1) for
/// x >= 10, recurrence psi'(x) = psi'(x + 1) + 1/x^2 below. Absolute error
/// below 1e-12 for x >= 1.
pub fn trigamma(x: f64) -> f64 {
    assert!(
        x > 0.0 && x.is_finite(),
        "trigamma requires finite x > 0, got {x}"
    );
    let mut shift = 0.0;
    let mut y = x;
    while y < ASYMPTOTIC_THRESHOLD {
        shift += 1.0 / (y * y);
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut power = inv * inv2;
    for b in &BERNOULLI_2K {
        series += b * power;
        power *= inv2;
    }
    inv + 0.5 * inv2 + series + shift
}

/// Multivariate log-gamma: ln Gamma_d(x) = d(d-1)/4 ln pi
/// + sum_{j=1..d} ln Gamma(x + (1 - j)/2). Requires x > (d - 1)/2.
pub fn multivariate_log_gamma(x: f64, d: usize) -> Result<f64> {
    check_multivariate_domain("multivariate_log_gamma", x, d)?;
    let mut sum = (d * (d - 1)) as f64 / 4.0 * LN_PI;
    for j in 1..=d {
        sum += log_gamma(x + (1.0 - j as f64) / 2.0);
    }
    Ok(sum)
}

/// Multivariate digamma: psi_d(x) = sum_{j=1..d} psi(x + (1 - j)/2).
/// Requires x > (d - 1)/2.
pub fn multivariate_digamma(x: f64, d: usize) -> Result<f64> {
    check_multivariate_domain("multivariate_digamma", x, d)?;
    let mut sum = 0.0;
    for j in 1..=d {
        sum += digamma(x + (1.0 - j as f64) / 2.0);
    }
    Ok(sum)
}

fn check_multivariate_domain(name: &str, x: f64, d: usize) -> Result<()> {
    if d == 0 {
        return Err(AmpError::validation(format!("{name}: dimension must be >= 1")));
    }
    if !(x.is_finite() && x > (d as f64 - 1.0) / 2.0) {
        return Err(AmpError::validation(format!(
            "{name}: requires x > (d - 1)/2, got x = {x}, d = {d}"
        )));
    }
    Ok(())
}

/// Complementary error function, accurate to a few ulps relative error on
/// the decaying tail and ~1e-16 absolute elsewhere.
///
/// Maclaurin series for |x| <= 2; Laplace continued fraction
/// erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
/// for x > 2 (modified Lentz). Negative arguments use erfc(-x) = 2 - erfc(x).
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x <= 2.0 {
        return 1.0 - erf_series(x);
    }
    // exp(-x^2) with the argument split to limit rounding in the exponent:
    // x = hi + lo with hi the upper half of the mantissa, so
    // x^2 = hi^2 + (2 hi lo + lo^2) and hi^2 is exact.
    let hi = f64::from_bits(x.to_bits() & 0xffff_ffff_f800_0000);
    let lo = x - hi;
    let exp_term = (-hi * hi).exp() * (-(2.0 * hi + lo) * lo).exp();
    if exp_term == 0.0 {
        return 0.0;
    }
    let cf = lentz_cf(
        |i| {
            if i == 0 {
                (0.0, x)
            } else {
                (i as f64 / 2.0, x)
            }
        },
        1e-16,
        10_000,
    )
    .expect("erfc continued fraction converges for x > 2");
    exp_term / (SQRT_PI * cf)
}

/// Error function erf(x) = 1 - erfc(x).
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x <= 2.0 {
        erf_series(x)
    } else {
        1.0 - erfc(x)
    }
}

/// sqrt(pi).
const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Maclaurin series erf(x) = 2/sqrt(pi) sum (-1)^n x^(2n+1) / (n! (2n+1)),
/// used for 0 <= x <= 2 where it converges without cancellation trouble.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= -x2 / n;
        let contribution = term / (2.0 * n + 1.0);
        sum += contribution;
        if contribution.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    2.0 / SQRT_PI * sum
}

/// Modified Lentz evaluation of the continued fraction
/// b_0 + a_1/(b_1 + a_2/(b_2 + ...)), with `terms(i)` returning (a_i, b_i)
/// (a_0 is ignored). Errors if `max_iter` is reached without convergence.
pub(crate) fn lentz_cf(
    terms: impl Fn(usize) -> (f64, f64),
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let (_, b0) = terms(0);
    let mut f = if b0 == 0.0 { TINY } else { b0 };
    let mut c = f;
    let mut d = 0.0;
    for i in 1..=max_iter {
        let (a, b) = terms(i);
        d = b + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = b + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < tol {
            return Ok(f);
        }
    }
    Err(AmpError::numerical(format!(
        "continued fraction did not converge within {max_iter} iterations"
    )))
}

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a),
/// for a > 0, x >= 0. Power series for x < a + 1, Lentz continued fraction
/// for the upper tail otherwise; relative error a few ulps away from the
/// crossover, absolute error well below 1e-12 everywhere tested.
pub fn reg_inc_gamma_lower(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(AmpError::validation(format!(
            "reg_inc_gamma_lower: shape must be positive and finite, got {a}"
        )));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(AmpError::validation(format!(
            "reg_inc_gamma_lower: argument must be finite and >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let log_front = a * x.ln() - x - log_gamma(a);
    if x < a + 1.0 {
        // P(a, x) = front * sum_{n>=0} x^n / (a (a+1) ... (a+n)).
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= x / (a + n);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            if n > 1e7 {
                return Err(AmpError::numerical(
                    "incomplete gamma series did not converge".to_string(),
                ));
            }
        }
        Ok((log_front.exp() * sum).min(1.0))
    } else {
        // Q(a, x) = front / (x+1-a - 1(1-a)/(x+3-a - 2(2-a)/(...))).
        let denom = lentz_cf(
            |i| {
                if i == 0 {
                    (0.0, x + 1.0 - a)
                } else {
                    let fi = i as f64;
                    (-fi * (fi - a), x + 2.0 * fi + 1.0 - a)
                }
            },
            1e-16,
            10_000_000,
        )?;
        let q = log_front.exp() / denom;
        Ok((1.0 - q).clamp(0.0, 1.0))
    }
}

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
///
/// Continued-fraction evaluation (modified Lentz) of the standard expansion,
/// applied on whichever of x / 1-x sides converges fast; relative error a
/// few ulps for moderate parameters, absolute error below 1e-12 throughout
/// the tested range.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(AmpError::validation(format!(
            "reg_inc_beta: shape parameters must be positive and finite, got a = {a}, b = {b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(AmpError::validation(format!(
            "reg_inc_beta: x must lie in [0, 1], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let log_front =
        a * x.ln() + b * (1.0 - x).ln() + log_gamma(a + b) - log_gamma(a) - log_gamma(b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok((log_front.exp() / (a * beta_cf(a, b, x)?)).clamp(0.0, 1.0))
    } else {
        Ok((1.0 - log_front.exp() / (b * beta_cf(b, a, 1.0 - x)?)).clamp(0.0, 1.0))
    }
}

/// Denominator continued fraction for the incomplete beta:
/// I_x(a, b) = front / (a * (1 + d_1/(1 + d_2/(1 + ...)))) with
/// d_{2m+1} = -(a+m)(a+b+m)x / ((a+2m)(a+2m+1)) and
/// d_{2m}   = m(b-m)x / ((a+2m-1)(a+2m)).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    lentz_cf(
        |i| {
            if i == 0 {
                return (0.0, 1.0);
            }
            let m = (i / 2) as f64;
            let numerator = if i % 2 == 1 {
                // i = 2m + 1
                -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1.0))
            } else {
                // i = 2m
                m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m))
            };
            (numerator, 1.0)
        },
        1e-16,
        1_000_000,
    )
}

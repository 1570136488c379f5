//! Computable lower bounds on the sample-amplification error: Bayes-risk
//! gaps for coordinatewise voting tests, Monte-Carlo certificates for
//! product models, the correct-selection curve behind the sparse-mean
//! phase transition, and Stein-loss separations for covariance models.
//!
//! Everything here understates: Monte-Carlo slack is subtracted before a
//! gap is declared, and a certificate that cannot clear its own noise is
//! reported as [`AmpError::Inconclusive`] rather than as evidence.

use std::collections::BTreeMap;

use crate::divergences::{tv_product_mc, McEstimate};
use crate::error::{AmpError, Result};
use crate::families::{hellinger2_1d, Scalar1d};
use crate::numerics::cdf::binomial_cdf;
use crate::numerics::prng::RngState;
use crate::numerics::samplers::{sample_chi2, sample_std_normal};
use crate::numerics::special::{digamma, trigamma};

/// Anchor constants for the product-model certificate. When the two
/// hypothesis points are separated by a squared Hellinger distance in
/// [1/(10n), 1/(5n)], tensorization pins the per-coordinate total
/// variation to [0.09, 0.6] at size n and [0.86, 0.99995] at size 20n.
const TV_SMALL_FLOOR: f64 = 0.09;
const TV_SMALL_CEIL: f64 = 0.6;
const TV_LARGE_FLOOR: f64 = 0.86;
const TV_LARGE_CEIL: f64 = 0.99995;

// ---------------------------------------------------------------------------
// Voting test
// ---------------------------------------------------------------------------

/// Bayes-risk sandwich produced by the coordinatewise voting test.
#[derive(Debug, Clone, PartialEq)]
pub struct VotingGap {
    /// Lower bound on the Bayes risk at the smaller per-coordinate sizes.
    pub r_n_lower: f64,
    /// Upper bound on the Bayes risk at the larger per-coordinate sizes.
    pub r_nm_upper: f64,
    /// `max(0, r_n_lower - r_nm_upper)`: a lower bound on the error of any
    /// procedure claiming to supply the extra samples.
    pub gap: f64,
    /// Mean of the per-coordinate TV midpoints.
    pub alpha_bar: f64,
    /// `sqrt(d)` times the smallest per-coordinate half-gap.
    pub beta: f64,
    /// Validity caveats (heterogeneous coordinates at too small a `d`).
    pub notes: Vec<String>,
}

/// Bayes-risk gap of the coordinatewise voting test.
///
/// For coordinate `j`, `tv_n[j]` and `tv_nm[j]` are the total variations
/// between the two per-coordinate hypothesis products at the smaller and
/// larger sample size. The optimal per-coordinate test is correct with
/// probability `(1 + TV_j)/2`, so voting across coordinates and counting
/// correct votes against the threshold `(1 + alpha_bar) d / 2` yields
///
/// * risk at the smaller sizes `>= binomial_cdf(floor(thr), d, p_-)`,
/// * risk at the larger sizes `<= binomial_cdf(floor(thr), d, p_+)`,
///
/// with `p_∓ = (1 + alpha_bar)/2 ∓ beta/(2 sqrt d)`. Heterogeneous
/// Bernoulli sums are reduced to a single binomial via Hoeffding's
/// comparison theorem, whose upper-bound direction needs `d >= 4/beta^2`;
/// when coordinates differ and `d` is below that, a note is attached (the
/// gap remains exact for identical coordinates). Equal TV pairs are
/// allowed and produce a zero gap.
pub fn voting_bayes_gap(tv_n: &[f64], tv_nm: &[f64]) -> Result<VotingGap> {
    if tv_n.is_empty() || tv_n.len() != tv_nm.len() {
        return Err(AmpError::validation(format!(
            "voting_bayes_gap: need matching nonempty TV slices, got lengths {} and {}",
            tv_n.len(),
            tv_nm.len()
        )));
    }
    let d = tv_n.len();
    for j in 0..d {
        let (a, b) = (tv_n[j], tv_nm[j]);
        if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
            return Err(AmpError::validation(format!(
                "voting_bayes_gap: coordinate {j} has TV values ({a}, {b}) outside (0, 1)"
            )));
        }
        if a > b {
            return Err(AmpError::validation(format!(
                "voting_bayes_gap: coordinate {j} has TV decreasing with sample size ({a} > {b})"
            )));
        }
    }
    let df = d as f64;
    let alpha_bar = tv_n
        .iter()
        .zip(tv_nm)
        .map(|(a, b)| 0.5 * (a + b))
        .sum::<f64>()
        / df;
    let min_half_gap = tv_n
        .iter()
        .zip(tv_nm)
        .map(|(a, b)| 0.5 * (b - a))
        .fold(f64::INFINITY, f64::min);
    let beta = df.sqrt() * min_half_gap;

    let threshold = (0.5 * (1.0 + alpha_bar) * df).floor() as i64;
    let p_small = 0.5 * (1.0 + alpha_bar) - 0.5 * min_half_gap;
    let p_large = 0.5 * (1.0 + alpha_bar) + 0.5 * min_half_gap;
    let r_n_lower = binomial_cdf(threshold, d as u64, p_small)?;
    let r_nm_upper = binomial_cdf(threshold, d as u64, p_large)?;

    let mut notes = Vec::new();
    let homogeneous = tv_n.iter().all(|&a| a == tv_n[0]) && tv_nm.iter().all(|&b| b == tv_nm[0]);
    if !homogeneous && beta > 0.0 && df < 4.0 / (beta * beta) {
        notes.push(format!(
            "heterogeneous coordinates: the binomial upper bound assumes d >= 4/beta^2 = {:.3}, got d = {d}",
            4.0 / (beta * beta)
        ));
    }

    Ok(VotingGap {
        r_n_lower,
        r_nm_upper,
        gap: (r_n_lower - r_nm_upper).max(0.0),
        alpha_bar,
        beta,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Two-point separation
// ---------------------------------------------------------------------------

/// Default parameter search interval per scalar component, wide enough to
/// reach the squared-Hellinger floor `1/(10n)` for any `n >= 1`.
pub fn default_search_interval(component: Scalar1d) -> (f64, f64) {
    match component {
        Scalar1d::GaussianUnitVariance => (0.0, 3.0),
        Scalar1d::Poisson => (1.0, 4.0),
        Scalar1d::Exponential => (1.0, 4.0),
        Scalar1d::Bernoulli => (0.5, 0.9),
    }
}

/// Stable ASCII name of a scalar component (used in serialized certificates).
pub fn component_name(component: Scalar1d) -> &'static str {
    match component {
        Scalar1d::GaussianUnitVariance => "gaussian_unit_variance",
        Scalar1d::Poisson => "poisson",
        Scalar1d::Exponential => "exponential",
        Scalar1d::Bernoulli => "bernoulli",
    }
}

/// Finds two parameter points of a scalar family whose squared Hellinger
/// distance lies in `[1/(10n), 1/(5n)]` — far enough apart to be testable
/// at size `20n`, close enough to stay confusable at size `n`.
///
/// `theta_minus` is pinned to the left end of `search_interval` and
/// `theta_plus` is located by bisection; the squared Hellinger distance
/// must grow continuously from 0 along the interval (true for all four
/// supported components). Returns `(theta_plus, theta_minus)`.
///
/// Errors when even the far end of the interval cannot reach `1/(10n)`:
/// the separation assumption fails, which is exactly what happens for a
/// bounded coordinate (e.g. a Poisson mean capped at `n/k` with `k >> n`).
pub fn hellinger_two_point(
    component: Scalar1d,
    n: usize,
    search_interval: (f64, f64),
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(AmpError::validation("hellinger_two_point: n >= 1 required"));
    }
    let (theta_minus, far) = search_interval;
    if !(far > theta_minus) || !theta_minus.is_finite() || !far.is_finite() {
        return Err(AmpError::validation(format!(
            "hellinger_two_point: search interval ({theta_minus}, {far}) must be finite with positive length"
        )));
    }
    let floor = 1.0 / (10.0 * n as f64);
    let ceil = 1.0 / (5.0 * n as f64);
    let h2_far = hellinger2_1d(component, far, theta_minus)?;
    if h2_far < floor {
        return Err(AmpError::validation(format!(
            "two-point separation assumption fails: squared Hellinger distance reaches only \
             {h2_far:.3e} on the interval, below the floor 1/(10n) = {floor:.3e} at n = {n}; \
             the coordinate family is too tightly bounded for this sample size"
        )));
    }
    let mut lo = theta_minus;
    let mut hi = far;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let h2 = hellinger2_1d(component, mid, theta_minus)?;
        if h2 < floor {
            lo = mid;
        } else if h2 > ceil {
            hi = mid;
        } else {
            return Ok((mid, theta_minus));
        }
    }
    Err(AmpError::numerical(
        "hellinger_two_point: bisection failed to land in the Hellinger band",
    ))
}

// ---------------------------------------------------------------------------
// Correct-selection curve p_d(z)
// ---------------------------------------------------------------------------

/// Monte-Carlo estimate of the correct-selection probability
///
/// `p_d(z) = E[ exp(z(z+Z_1)) / (exp(z(z+Z_1)) + sum_{j>=2} exp(z Z_j)) ]`
///
/// with `Z_j` iid standard normal: the chance that a maximum-likelihood
/// scan over `d` coordinates picks the one whose mean was raised by `z`
/// (after scaling by the root sample size). The curve has a phase
/// transition around `z = sqrt(2 ln d)`.
pub fn pd_curve(d: usize, z: f64, reps: usize, rng: &mut RngState) -> Result<McEstimate> {
    let mut grid = pd_curve_grid(d, &[z], reps, rng)?;
    Ok(grid.pop().expect("single-entry grid"))
}

/// [`pd_curve`] evaluated at several `z` values with common random
/// numbers: one shared set of standard-normal draws serves every entry,
/// so differences between entries (and monotonicity checks) are
/// low-variance. At `z = 0` every replicate contributes exactly `1/d`.
///
/// Each replicate accumulates the denominator on the fly in the
/// overflow-safe form `p = 1 / (1 + sum_{j>=2} exp(z (Z_j - z - Z_1)))`,
/// which shifts all exponents by the elevated coordinate's own term.
pub fn pd_curve_grid(
    d: usize,
    zs: &[f64],
    reps: usize,
    rng: &mut RngState,
) -> Result<Vec<McEstimate>> {
    if d < 2 {
        return Err(AmpError::validation(format!(
            "pd_curve: d >= 2 required, got {d}"
        )));
    }
    if reps < 2 {
        return Err(AmpError::validation("pd_curve: reps >= 2 required"));
    }
    if zs.is_empty() {
        return Err(AmpError::validation("pd_curve: at least one z value"));
    }
    if zs.iter().any(|z| !z.is_finite()) {
        return Err(AmpError::validation("pd_curve: z values must be finite"));
    }
    let g = zs.len();
    let mut sum = vec![0.0f64; g];
    let mut sum_sq = vec![0.0f64; g];
    let mut denom = vec![0.0f64; g];
    for _ in 0..reps {
        let z1 = sample_std_normal(rng);
        denom.iter_mut().for_each(|v| *v = 0.0);
        for _ in 1..d {
            let zj = sample_std_normal(rng);
            for (acc, &z) in denom.iter_mut().zip(zs) {
                *acc += (z * (zj - z - z1)).exp();
            }
        }
        for k in 0..g {
            let p = 1.0 / (1.0 + denom[k]);
            sum[k] += p;
            sum_sq[k] += p * p;
        }
    }
    let reps_f = reps as f64;
    Ok((0..g)
        .map(|k| {
            let mean = sum[k] / reps_f;
            let var = (sum_sq[k] - reps_f * mean * mean).max(0.0) / (reps_f - 1.0);
            McEstimate {
                value: mean,
                stderr: (var / reps_f).sqrt(),
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Sparse-mean Bayes-risk floor
// ---------------------------------------------------------------------------

/// Lower bound on the amplification error for the `s`-sparse `d`-dimensional
/// Gaussian mean model, via `s` independent blocks of `floor(d/s)`
/// coordinates each holding one elevated mean.
///
/// Per block, the correct coordinate is recovered with probability
/// `p_{d0}(sqrt(size) * t)`; counting failed blocks against the threshold
/// `N = ceil(s (q_n + q_nm)/2)` midway between the two expected failure
/// counts gives the Bayes-risk difference
///
/// `P(B(s, q_n) >= N) - P(B(s, q_nm) >= N)`,
///
/// maximized over a grid of elevation scales `t` around the phase
/// transition `sqrt(2 ln d0 / n)`. All `p` values for one grid come from a
/// single [`pd_curve_grid`] call (common random numbers), and three
/// standard errors are subtracted from each side before the difference is
/// taken, so the returned gap is conservative. `m = 0` returns exactly 0.
pub fn sparse_amplification_floor(
    s: usize,
    d: usize,
    n: usize,
    m: usize,
    reps: usize,
    rng: &mut RngState,
) -> Result<f64> {
    if s == 0 || n == 0 {
        return Err(AmpError::validation(
            "sparse_amplification_floor: s >= 1 and n >= 1 required",
        ));
    }
    if 2 * s >= d {
        return Err(AmpError::validation(format!(
            "sparse_amplification_floor requires s < d/2, got s = {s}, d = {d}"
        )));
    }
    if reps < 2 {
        return Err(AmpError::validation(
            "sparse_amplification_floor: reps >= 2 required",
        ));
    }
    if m == 0 {
        return Ok(0.0);
    }
    let d0 = d / s;
    let z_star = (2.0 * (d0 as f64).ln()).sqrt();
    let growth = ((n + m) as f64 / n as f64).sqrt();
    const FACTORS: [f64; 9] = [0.5, 0.625, 0.75, 0.875, 1.0, 1.125, 1.25, 1.375, 1.5];
    let mut zs = Vec::with_capacity(2 * FACTORS.len());
    for &f in &FACTORS {
        zs.push(f * z_star);
        zs.push(f * z_star * growth);
    }
    let est = pd_curve_grid(d0, &zs, reps, rng)?;
    let mut best = 0.0f64;
    for i in 0..FACTORS.len() {
        let p_small = est[2 * i];
        let p_large = est[2 * i + 1];
        // Conservative block-failure probabilities: understate the risk at
        // size n, overstate it at size n + m.
        let q_small = (1.0 - (p_small.value + 3.0 * p_small.stderr)).clamp(0.0, 1.0);
        let q_large = (1.0 - (p_large.value - 3.0 * p_large.stderr)).clamp(0.0, 1.0);
        // Failure-count threshold midway between the two point-estimate means.
        let thr = 0.5 * s as f64 * ((1.0 - p_small.value) + (1.0 - p_large.value));
        let count = thr.ceil().max(0.0) as i64;
        let r_small = 1.0 - binomial_cdf(count - 1, s as u64, q_small)?;
        let r_large = 1.0 - binomial_cdf(count - 1, s as u64, q_large)?;
        best = best.max(r_small - r_large);
    }
    Ok(best.max(0.0))
}

// ---------------------------------------------------------------------------
// Stein-loss computations for covariance models
// ---------------------------------------------------------------------------

/// Positive diagonal weights for triangular-invariant covariance
/// estimators `T diag(lambda) T^T`, where `T T^T` is the Cholesky
/// factorization of the observed scatter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinWeights(Vec<f64>);

impl SteinWeights {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(AmpError::validation("SteinWeights: at least one weight"));
        }
        if lambda.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(AmpError::validation(
                "SteinWeights: weights must be positive and finite",
            ));
        }
        Ok(SteinWeights(lambda))
    }

    /// The risk-minimizing diagonal `lambda_j = 1/(n + d + 1 - 2j)`,
    /// whose Stein risk sits within `5d/n` of `stein_g(n+1-d, d)` with a
    /// standard deviation below `4d/n`. Requires `n >= d` so every weight
    /// is positive.
    pub fn default_weights(n: usize, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(AmpError::validation("SteinWeights: d >= 1 required"));
        }
        if n < d {
            return Err(AmpError::validation(format!(
                "SteinWeights::default_weights needs n >= d, got n = {n}, d = {d}"
            )));
        }
        Ok(SteinWeights(
            (1..=d).map(|j| 1.0 / ((n + d + 1 - 2 * j) as f64)).collect(),
        ))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn check_stein_args(n: usize, d: usize, weights: &SteinWeights) -> Result<()> {
    if d == 0 || n < d {
        return Err(AmpError::validation(format!(
            "Stein-loss computations need n >= d >= 1, got n = {n}, d = {d}"
        )));
    }
    if weights.len() != d {
        return Err(AmpError::validation(format!(
            "Stein weights have length {}, expected d = {d}",
            weights.len()
        )));
    }
    Ok(())
}

/// Exact mean of the Stein loss `tr(S) - log det(S) - d` of the estimator
/// `S = T diag(lambda) T^T` under identity covariance and `n` samples:
///
/// `sum_j [ (n+d+1-2j) lambda_j - ln lambda_j - (ln 2 + psi((n-j+1)/2)) ] - d`.
pub fn stein_mean(n: usize, d: usize, weights: &SteinWeights) -> Result<f64> {
    check_stein_args(n, d, weights)?;
    let mut total = -(d as f64);
    for (j, &lam) in (1..=d).zip(weights.as_slice()) {
        let coef = (n + d + 1 - 2 * j) as f64;
        let dof = (n + 1 - j) as f64;
        total += coef * lam - lam.ln() - (std::f64::consts::LN_2 + digamma(0.5 * dof));
    }
    Ok(total)
}

/// Exact variance of the Stein loss of `T diag(lambda) T^T`:
///
/// `sum_j [ 2 (n+d+1-2j) lambda_j^2 - 4 lambda_j + psi'((n+1-j)/2) ]`.
pub fn stein_var(n: usize, d: usize, weights: &SteinWeights) -> Result<f64> {
    check_stein_args(n, d, weights)?;
    let mut total = 0.0;
    for (j, &lam) in (1..=d).zip(weights.as_slice()) {
        let coef = (n + d + 1 - 2 * j) as f64;
        let dof = (n + 1 - j) as f64;
        total += 2.0 * coef * lam * lam - 4.0 * lam + trigamma(0.5 * dof);
    }
    Ok(total)
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `g(u, v) = ((u+2v) ln(u+2v) + u ln u)/2 - (u+v) ln(u+v)` with the
/// convention `0 ln 0 = 0`; the large-sample anchor of the optimal
/// invariant Stein risk. `g(u, 0) = 0` identically.
pub fn stein_g(u: f64, v: f64) -> f64 {
    0.5 * (xlnx(u + 2.0 * v) + xlnx(u)) - xlnx(u + v)
}

/// `h(u) = u - ln u - 1`: the scalar Stein loss of over/under-scaling by
/// `u`; nonnegative, zero only at `u = 1`.
pub fn stein_h(u: f64) -> f64 {
    u - u.ln() - 1.0
}

/// Monte-Carlo mean/variance of the Stein loss via the Bartlett
/// decomposition of the scatter matrix: the Cholesky factor `T` has
/// `T_jj^2 ~ chi^2_{n+1-j}` on the diagonal and standard normals below
/// it, so the loss reduces to
///
/// `sum_j [ lambda_j * ||column j||^2 - ln T_jj^2 - ln lambda_j ] - d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteinMc {
    pub mean: f64,
    pub mean_stderr: f64,
    pub var: f64,
}

pub fn stein_mc(
    n: usize,
    d: usize,
    weights: &SteinWeights,
    reps: usize,
    rng: &mut RngState,
) -> Result<SteinMc> {
    check_stein_args(n, d, weights)?;
    if reps < 2 {
        return Err(AmpError::validation("stein_mc: reps >= 2 required"));
    }
    let lambda = weights.as_slice();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..reps {
        let mut loss = -(d as f64);
        for j in 1..=d {
            let diag_sq = sample_chi2(rng, (n + 1 - j) as f64);
            let mut col_norm_sq = diag_sq;
            for _ in 0..(d - j) {
                let z = sample_std_normal(rng);
                col_norm_sq += z * z;
            }
            let lam = lambda[j - 1];
            loss += lam * col_norm_sq - diag_sq.ln() - lam.ln();
        }
        sum += loss;
        sum_sq += loss * loss;
    }
    let reps_f = reps as f64;
    let mean = sum / reps_f;
    let var = (sum_sq - reps_f * mean * mean).max(0.0) / (reps_f - 1.0);
    Ok(SteinMc {
        mean,
        mean_stderr: (var / reps_f).sqrt(),
        var,
    })
}

/// Separation report for covariance amplification: how much the optimal
/// invariant Stein risk drops when `m` samples are added, against the
/// `d/n`-scale error terms of the risk computation.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceGapReport {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    /// Exact Stein-loss mean at size `n` under the default weights.
    pub stein_mean_n: f64,
    /// Closed-form anchor `stein_g(n+1-d, d)`; the exact mean sits within
    /// `5d/n` of it (checked).
    pub g_anchor_n: f64,
    /// Standard deviation of the Stein loss at size `n` (at most `4d/n`,
    /// checked).
    pub stein_sd_n: f64,
    /// `stein_g(n+1-d, d) - stein_g(n+m+1-d, d)`: the achievable-risk
    /// separation bought by the extra samples.
    pub g_gap: f64,
    /// Quadratic floor `m d^2 / (13 n^2)`, proven for `n >= 2d`, `m <= n`.
    pub g_gap_floor: f64,
    /// Combined allowance `17 d/n + 17 d/(n+m)`: the `5d/size` mean-anchor
    /// error plus a three-standard-deviation spread (`12 d/size`) at each
    /// sample size.
    pub slack: f64,
    /// True when `g_gap > slack`: the separation survives every error
    /// term, so an amplification procedure with small error must have
    /// `m = O(n/d)`.
    pub conclusive: bool,
    pub notes: Vec<String>,
}

/// Computes [`CovarianceGapReport`] for the identity-covariance Gaussian
/// model with the default [`SteinWeights`]. Requires `n >= 2d` (the range
/// on which both the anchor bounds and the quadratic floor are proven).
pub fn covariance_lower_gap(n: usize, d: usize, m: usize) -> Result<CovarianceGapReport> {
    if d == 0 {
        return Err(AmpError::validation("covariance_lower_gap: d >= 1 required"));
    }
    if n < 2 * d {
        return Err(AmpError::validation(format!(
            "covariance_lower_gap requires n >= 2d, got n = {n}, d = {d}"
        )));
    }
    let weights = SteinWeights::default_weights(n, d)?;
    let mean = stein_mean(n, d, &weights)?;
    let sd = stein_var(n, d, &weights)?.sqrt();
    let nf = n as f64;
    let df = d as f64;
    let g_anchor = stein_g((n + 1 - d) as f64, df);
    if (mean - g_anchor).abs() > 5.0 * df / nf {
        return Err(AmpError::numerical(format!(
            "Stein mean {mean:.6} strays more than 5d/n = {:.6} from its anchor {g_anchor:.6}",
            5.0 * df / nf
        )));
    }
    if sd > 4.0 * df / nf {
        return Err(AmpError::numerical(format!(
            "Stein standard deviation {sd:.6} exceeds 4d/n = {:.6}",
            4.0 * df / nf
        )));
    }
    let g_gap = g_anchor - stein_g((n + m + 1 - d) as f64, df);
    let g_gap_floor = m as f64 * df * df / (13.0 * nf * nf);
    let slack = 17.0 * df / nf + 17.0 * df / (n + m) as f64;
    let conclusive = m > 0 && g_gap > slack;
    let mut notes = Vec::new();
    if m == 0 {
        notes.push("m = 0: no separation to certify".to_string());
    } else if m > n {
        notes.push("quadratic floor proven only for m <= n".to_string());
    }
    if conclusive {
        notes.push(format!(
            "g-gap {g_gap:.4} exceeds slack {slack:.4}: amplification with small error forces m = O(n/d)"
        ));
    } else if m > 0 {
        notes.push(format!(
            "g-gap {g_gap:.4} does not exceed slack {slack:.4}: no conclusion at this (n, d, m)"
        ));
    }
    Ok(CovarianceGapReport {
        n,
        d,
        m,
        stein_mean_n: mean,
        g_anchor_n: g_anchor,
        stein_sd_n: sd,
        g_gap,
        g_gap_floor,
        slack,
        conclusive,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Product-model certificate
// ---------------------------------------------------------------------------

/// Monte-Carlo certificate that any map claiming to amplify `n` into
/// `n + m` samples of a `d`-coordinate product of the given scalar family
/// must err by at least `bayes_risk_gap` in total variation.
///
/// Construction: two parameter points separated by a squared Hellinger
/// distance in `[1/(10n), 1/(5n)]` are located; the per-coordinate TV is
/// scanned over sample sizes `{n, n+m, ..., 20n}` to find an `n_j` whose
/// `m`-step TV increase clears the pigeonhole requirement; the voting test
/// converts the conservative (slack-adjusted) TV pair into a Bayes-risk
/// gap. All coordinates share the same two points and the same `n_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerCertificate {
    pub component: Scalar1d,
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub reps: usize,
    /// Per-coordinate hypothesis points (identical across coordinates in
    /// this construction; kept per-coordinate to document the certified
    /// problem's shape).
    pub theta_plus: Vec<f64>,
    pub theta_minus: Vec<f64>,
    /// Squared Hellinger separation of the two points.
    pub hellinger2: f64,
    /// Per-coordinate sample size at which the TV step was located
    /// (`n <= n_j <= 20n`).
    pub n_j: Vec<usize>,
    /// Per-coordinate conservative TV midpoints (inside `(0.09, 0.99995)`).
    pub alpha: Vec<f64>,
    /// `sqrt(d)` times the smallest conservative half-gap.
    pub beta: f64,
    /// Raw Monte-Carlo TV estimates at `n_j` and `n_j + m`.
    pub tv_small: McEstimate,
    pub tv_large: McEstimate,
    /// Slack-adjusted TV values actually fed to the voting bound
    /// (`tv_small.value + 3 stderr`, `tv_large.value - 3 stderr`).
    pub tv_small_conservative: f64,
    pub tv_large_conservative: f64,
    /// Pigeonhole step the scan had to find: `(0.86 - 0.6)/ceil(19n/m)`.
    pub required_step: f64,
    /// Conservative TV increase achieved at `n_j`.
    pub achieved_step: f64,
    /// Bayes-risk sandwich from the voting test on the conservative TVs.
    pub r_n_lower: f64,
    pub r_nm_upper: f64,
    /// Certified lower bound on the amplification error; strictly positive.
    pub bayes_risk_gap: f64,
    /// Anchor checks recorded as human-readable tags.
    pub anchors: Vec<String>,
}

fn format_f64_list(values: &[f64]) -> String {
    if values.iter().all(|v| v == &values[0]) {
        format!("{}", values[0])
    } else {
        values
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn format_usize_list(values: &[usize]) -> String {
    if values.iter().all(|v| v == &values[0]) {
        format!("{}", values[0])
    } else {
        values
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl LowerCertificate {
    /// Serializes the certificate as a flat `key=value` block, one pair
    /// per line. Per-coordinate vectors collapse to a single value when
    /// all coordinates agree and are comma-joined otherwise; values never
    /// contain `=`. Numbers print in Rust's shortest round-trip form.
    pub fn to_key_value_block(&self) -> String {
        let mut lines = vec![
            format!("component={}", component_name(self.component)),
            format!("d={}", self.d),
            format!("n={}", self.n),
            format!("m={}", self.m),
            format!("reps={}", self.reps),
            format!("theta_plus={}", format_f64_list(&self.theta_plus)),
            format!("theta_minus={}", format_f64_list(&self.theta_minus)),
            format!("hellinger2={}", self.hellinger2),
            format!("n_j={}", format_usize_list(&self.n_j)),
            format!("alpha={}", format_f64_list(&self.alpha)),
            format!("beta={}", self.beta),
            format!("tv_small={}", self.tv_small.value),
            format!("tv_small_stderr={}", self.tv_small.stderr),
            format!("tv_large={}", self.tv_large.value),
            format!("tv_large_stderr={}", self.tv_large.stderr),
            format!("tv_small_conservative={}", self.tv_small_conservative),
            format!("tv_large_conservative={}", self.tv_large_conservative),
            format!("required_step={}", self.required_step),
            format!("achieved_step={}", self.achieved_step),
            format!("r_n_lower={}", self.r_n_lower),
            format!("r_nm_upper={}", self.r_nm_upper),
            format!("bayes_risk_gap={}", self.bayes_risk_gap),
        ];
        for (i, anchor) in self.anchors.iter().enumerate() {
            lines.push(format!("anchor.{}={}", i + 1, anchor));
        }
        lines.join("\n")
    }
}

/// Builds a [`LowerCertificate`] for the `d`-fold product of a scalar
/// family, amplifying `n` into `n + m` samples.
///
/// The sample-size scan covers starts `{n, n+m, ..., } ∪ {20n - m}` (all
/// inside `[n, 20n - m]`) so every candidate pair `(t, t + m)` stays
/// within the `[n, 20n]` horizon; with `K = ceil(19n/m)` steps, some pair
/// must show a TV increase of at least `(0.86 - 0.6)/K`. A pair qualifies
/// if its observed increase clears that requirement minus three combined
/// standard errors, and the winning pair is the one with the largest
/// slack-adjusted increase. When `m >= 19n` the grid degenerates to the
/// single pair `(n, n + m)`.
///
/// Returns [`AmpError::Inconclusive`] — not a refutation — whenever the
/// Monte-Carlo noise at `reps` replicates swamps the step requirement,
/// the anchor checks, or the final voting gap.
pub fn product_lower_certificate(
    component: Scalar1d,
    n: usize,
    m: usize,
    d: usize,
    reps: usize,
    rng: &mut RngState,
) -> Result<LowerCertificate> {
    if n == 0 || m == 0 || d == 0 {
        return Err(AmpError::validation(
            "product_lower_certificate: n, m, d must all be positive",
        ));
    }
    if reps < 2 {
        return Err(AmpError::validation(
            "product_lower_certificate: reps >= 2 required",
        ));
    }
    let (theta_plus, theta_minus) =
        hellinger_two_point(component, n, default_search_interval(component))?;
    let hellinger2 = hellinger2_1d(component, theta_plus, theta_minus)?;

    let k_steps = (19 * n + m - 1) / m;
    let required_step = (TV_LARGE_FLOOR - TV_SMALL_CEIL) / k_steps as f64;
    let mut starts: Vec<usize> = Vec::new();
    if m >= 19 * n {
        starts.push(n);
    } else {
        for k in 0..=(k_steps - 2) {
            starts.push(n + k * m);
        }
        starts.push(20 * n - m);
        starts.sort_unstable();
        starts.dedup();
    }
    let mut ts: Vec<usize> = starts.iter().flat_map(|&s| [s, s + m]).collect();
    ts.sort_unstable();
    ts.dedup();

    let mut tv_at: BTreeMap<usize, McEstimate> = BTreeMap::new();
    for &t in &ts {
        tv_at.insert(
            t,
            tv_product_mc(component, theta_plus, theta_minus, t, reps, rng)?,
        );
    }

    // Anchor checks at the horizon's ends: the Hellinger band forces
    // TV >= 0.09 at size n and TV <= 0.99995 at the largest scanned size.
    let first = tv_at[&ts[0]];
    let last = tv_at[ts.last().expect("nonempty grid")];
    if first.value + 3.0 * first.stderr < TV_SMALL_FLOOR {
        return Err(AmpError::inconclusive(format!(
            "anchor failed: TV at size {n} is {:.6} (stderr {:.2e}), below the floor {TV_SMALL_FLOOR}",
            first.value, first.stderr
        )));
    }
    if last.value - 3.0 * last.stderr > TV_LARGE_CEIL {
        return Err(AmpError::inconclusive(format!(
            "anchor failed: TV at size {} is {:.6} (stderr {:.2e}), above the ceiling {TV_LARGE_CEIL}",
            ts.last().unwrap(),
            last.value,
            last.stderr
        )));
    }
    let anchors = vec![
        format!(
            "tv at size {} is {} (stderr {}), floor {}",
            ts[0], first.value, first.stderr, TV_SMALL_FLOOR
        ),
        format!(
            "tv at size {} is {} (stderr {}), ceiling {}",
            ts.last().unwrap(),
            last.value,
            last.stderr,
            TV_LARGE_CEIL
        ),
    ];

    // Largest slack-adjusted m-step TV increase that clears the pigeonhole
    // requirement.
    let mut chosen: Option<(usize, f64)> = None;
    for &start in &starts {
        let lo = tv_at[&start];
        let hi = tv_at[&(start + m)];
        let raw = hi.value - lo.value;
        let slack = 3.0 * (lo.stderr * lo.stderr + hi.stderr * hi.stderr).sqrt();
        if raw < required_step - slack {
            continue;
        }
        let adjusted = raw - slack;
        if chosen.map_or(true, |(_, best)| adjusted > best) {
            chosen = Some((start, adjusted));
        }
    }
    let (n_j, _) = chosen.ok_or_else(|| {
        AmpError::inconclusive(format!(
            "no sample size in [{n}, {}] achieved the pigeonhole TV increase {required_step:.3e} \
             within Monte-Carlo slack at {reps} replicates; rerun with more replicates",
            20 * n
        ))
    })?;

    let tv_small = tv_at[&n_j];
    let tv_large = tv_at[&(n_j + m)];
    let tv_small_conservative = (tv_small.value + 3.0 * tv_small.stderr).clamp(1e-12, 1.0 - 1e-12);
    let tv_large_conservative = (tv_large.value - 3.0 * tv_large.stderr).clamp(1e-12, 1.0 - 1e-12);
    if tv_large_conservative <= tv_small_conservative {
        return Err(AmpError::inconclusive(format!(
            "Monte-Carlo slack erases the TV increase at size {n_j}; rerun with more replicates"
        )));
    }
    let achieved_step = tv_large_conservative - tv_small_conservative;
    let alpha = 0.5 * (tv_small_conservative + tv_large_conservative);
    if !(alpha > TV_SMALL_FLOOR && alpha < TV_LARGE_CEIL) {
        return Err(AmpError::inconclusive(format!(
            "conservative TV midpoint {alpha:.6} falls outside ({TV_SMALL_FLOOR}, {TV_LARGE_CEIL})"
        )));
    }

    let voting = voting_bayes_gap(
        &vec![tv_small_conservative; d],
        &vec![tv_large_conservative; d],
    )?;
    if !(voting.gap > 0.0) {
        return Err(AmpError::inconclusive(format!(
            "voting Bayes-risk gap is {:.3e} after slack subtraction; rerun with more replicates",
            voting.r_n_lower - voting.r_nm_upper
        )));
    }

    Ok(LowerCertificate {
        component,
        d,
        n,
        m,
        reps,
        theta_plus: vec![theta_plus; d],
        theta_minus: vec![theta_minus; d],
        hellinger2,
        n_j: vec![n_j; d],
        alpha: vec![alpha; d],
        beta: voting.beta,
        tv_small,
        tv_large,
        tv_small_conservative,
        tv_large_conservative,
        required_step,
        achieved_step,
        r_n_lower: voting.r_n_lower,
        r_nm_upper: voting.r_nm_upper,
        bayes_risk_gap: voting.gap,
        anchors,
    })
}

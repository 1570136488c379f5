//! Statistical verification of amplifier outputs.
//!
//! Four instruments, in decreasing order of knowledge about the amplifier:
//!
//! * [`tv_mc_suffstat`] — unbiased Monte Carlo estimate of the exact total
//!   variation achieved by amplifiers that carry the sufficient statistic of
//!   their input and resample everything else.  For those maps the output
//!   law differs from the target only through the statistic's law at the two
//!   sample sizes, so the total variation reduces to a one-sample density
//!   ratio average over the statistic's distribution.
//! * [`detector_battery`] — a black-box battery of tests applied to any
//!   candidate generator.  By the duality between testing and total
//!   variation, a test with rejection probability at most `level` under the
//!   genuine law certifies `rejection_rate - level` as a lower bound on the
//!   total variation between the candidate's output law and the genuine law.
//! * [`chi2_error_mc`] — Monte Carlo estimate of the expected chi-square
//!   divergence of classical plug-in learners, the quantity that drives the
//!   shuffling amplifier's guarantee.
//! * [`ks_marginal_test`] — a marginal Kolmogorov-Smirnov goodness-of-fit
//!   check with the Dvoretzky-Kiefer-Wolfowitz threshold, as a cheap sanity
//!   gate for one-dimensional continuous data.
//!
//! The module also ships three deliberately bad baseline generators
//! ([`copy_append`], [`plain_append`], [`uniform_fake`]) used to demonstrate
//! that the battery has teeth.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};

use crate::amplify::Learner;
use crate::divergences::McEstimate;
use crate::error::{AmpError, Result};
use crate::families::{
    cumulative_probs, draw_symbol, sufficient_stat, Dataset, Family, FamilyKind, SufficientStat,
};
use crate::numerics::cdf::normal_cdf;
use crate::numerics::linalg::{sym_sqrt, SymSqrtKind};
use crate::numerics::prng::RngState;
use crate::numerics::samplers::{sample_chi2, sample_gamma, sample_poisson, sample_std_normal};

/// Genuine replicates drawn to calibrate the quantile thresholds of the
/// battery's two calibrated detectors.
pub const DEFAULT_CALIBRATION_REPS: usize = 10_000;

/// Minimum number of evaluation replicates the battery accepts; below this
/// the rejection-rate estimate is too noisy to certify anything.
const MIN_BATTERY_REPS: usize = 100;

/// Structural class of an amplification map, which decides whether its exact
/// total variation is tractable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplifierClass {
    /// Maps that keep the input's sufficient statistic bitwise and resample
    /// the observations from the conditional law given that statistic.
    SufficiencyIdentity,
    /// Maps that fit a plug-in distribution and shuffle drawn rows into the
    /// input; their output law has no tractable density ratio.
    Shuffle,
}

// ---------------------------------------------------------------------------
// Exact total variation of sufficiency-based amplifiers, by Monte Carlo.
// ---------------------------------------------------------------------------

/// Samplers for the law of a family's sufficient statistic at sample size
/// `n`, each drawing from the exact finite-sample distribution.
enum SuffstatSampler {
    /// Sample mean of `n` Gaussian rows: `N(mean, cov / n)`.
    Mean {
        mean: DVector<f64>,
        root_over_sqrt_n: DMatrix<f64>,
    },
    /// Raw scatter of `n` centered Gaussian rows: a Wishart matrix with `n`
    /// degrees of freedom divided by `n`, drawn by the Bartlett
    /// decomposition.
    Scatter { chol_l: DMatrix<f64>, n: usize },
    /// Independent sample mean and sample covariance of `n` Gaussian rows
    /// (Cochran's theorem): `N(mean, cov / n)` and a Wishart with `n - 1`
    /// degrees of freedom divided by `n - 1`.
    MeanAndCov {
        mean: DVector<f64>,
        root_over_sqrt_n: DMatrix<f64>,
        chol_l: DMatrix<f64>,
        n: usize,
    },
    /// Coordinate means of `n` exponential rows: `Gamma(n, n * rate)` per
    /// coordinate.
    GammaMeans { rates: DVector<f64>, n: usize },
    /// Coordinate-wise minimum and maximum of `n` uniform rows: the range
    /// fraction is `Beta(n - 1, 2)` and the minimum is uniform on what the
    /// range leaves free.
    MinMax {
        lo: DVector<f64>,
        hi: DVector<f64>,
        n: usize,
    },
    /// Coordinate totals of a Poissonized count table: independent Poisson
    /// variables with mean `n * p_j`.
    PoissonSums { means: Vec<f64> },
}

fn cholesky_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cov.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| AmpError::unsupported("covariance is singular; the statistic law has no density"))
}

fn standard_normal_vector(d: usize, rng: &mut RngState) -> DVector<f64> {
    DVector::from_fn(d, |_, _| sample_std_normal(rng))
}

/// Draws a Wishart matrix `L A A^T L^T` with the given degrees of freedom via
/// the Bartlett decomposition: `A` lower triangular with `chi(dof - j)`
/// diagonal entries and standard normal sub-diagonal entries.
fn wishart_bartlett(chol_l: &DMatrix<f64>, dof: f64, rng: &mut RngState) -> DMatrix<f64> {
    let d = chol_l.nrows();
    let mut a = DMatrix::zeros(d, d);
    for j in 0..d {
        a[(j, j)] = sample_chi2(rng, dof - j as f64).sqrt();
        for i in (j + 1)..d {
            a[(i, j)] = sample_std_normal(rng);
        }
    }
    let la = chol_l * &a;
    &la * la.transpose()
}

fn suffstat_sampler(family: &Family, n: usize) -> Result<SuffstatSampler> {
    let nf = n as f64;
    match family {
        Family::GaussianMean { mean, cov } => {
            let root = sym_sqrt(cov, SymSqrtKind::Root)?;
            Ok(SuffstatSampler::Mean {
                mean: mean.clone(),
                root_over_sqrt_n: root / nf.sqrt(),
            })
        }
        Family::GaussianCov { cov } => {
            let d = cov.nrows();
            if n < d {
                return Err(AmpError::validation(format!(
                    "the scatter of {n} centered Gaussian rows in dimension {d} has no density; need n >= {d}"
                )));
            }
            Ok(SuffstatSampler::Scatter {
                chol_l: cholesky_factor(cov)?,
                n,
            })
        }
        Family::GaussianMeanCov { mean, cov } => {
            let d = cov.nrows();
            if n < d + 1 {
                return Err(AmpError::validation(format!(
                    "the sample covariance of {n} Gaussian rows in dimension {d} has no density; need n >= {}",
                    d + 1
                )));
            }
            let root = sym_sqrt(cov, SymSqrtKind::Root)?;
            Ok(SuffstatSampler::MeanAndCov {
                mean: mean.clone(),
                root_over_sqrt_n: root / nf.sqrt(),
                chol_l: cholesky_factor(cov)?,
                n,
            })
        }
        Family::ProductExponential { rates } => Ok(SuffstatSampler::GammaMeans {
            rates: rates.clone(),
            n,
        }),
        Family::UniformRect { lo, hi } => {
            if n < 2 {
                return Err(AmpError::validation(
                    "the min-max statistic of a uniform rectangle has a density only for n >= 2",
                ));
            }
            Ok(SuffstatSampler::MinMax {
                lo: lo.clone(),
                hi: hi.clone(),
                n,
            })
        }
        Family::PoissonizedDiscrete { probs } => Ok(SuffstatSampler::PoissonSums {
            means: probs.iter().map(|p| p * nf).collect(),
        }),
        Family::ProductPoisson { .. } => Err(AmpError::unsupported(
            "the Poisson amplifier augments its carried totals with fresh randomness, so its error is not a pure statistic-law distance",
        )),
        Family::Discrete { .. } | Family::TopElementDiscrete { .. } => Err(AmpError::unsupported(
            "symbol counts at different sample sizes are mutually singular; verify finite-alphabet amplifiers with the detector battery instead",
        )),
        Family::SparseGaussian { .. } => Err(AmpError::unsupported(
            "sparse Gaussian families are amplified by shuffling, not by carrying a sufficient statistic",
        )),
        Family::LowRankCov { .. } => Err(AmpError::unsupported(
            "rank-deficient scatter matrices have no joint density to compare",
        )),
    }
}

impl SuffstatSampler {
    fn draw(&self, rng: &mut RngState) -> SufficientStat {
        match self {
            SuffstatSampler::Mean {
                mean,
                root_over_sqrt_n,
            } => {
                let z = standard_normal_vector(mean.len(), rng);
                SufficientStat::Mean(mean + root_over_sqrt_n * z)
            }
            SuffstatSampler::Scatter { chol_l, n } => {
                let w = wishart_bartlett(chol_l, *n as f64, rng);
                SufficientStat::ScatterRaw(w / *n as f64)
            }
            SuffstatSampler::MeanAndCov {
                mean,
                root_over_sqrt_n,
                chol_l,
                n,
            } => {
                let z = standard_normal_vector(mean.len(), rng);
                let drawn_mean = mean + root_over_sqrt_n * z;
                let w = wishart_bartlett(chol_l, (*n - 1) as f64, rng);
                SufficientStat::MeanAndCov {
                    mean: drawn_mean,
                    cov: w / (*n as f64 - 1.0),
                }
            }
            SuffstatSampler::GammaMeans { rates, n } => {
                let nf = *n as f64;
                let t = rates.map(|lambda| sample_gamma(rng, nf, nf * lambda));
                SufficientStat::CoordMeans(t)
            }
            SuffstatSampler::MinMax { lo, hi, n } => {
                let nf = *n as f64;
                let d = lo.len();
                let mut smin = DVector::zeros(d);
                let mut smax = DVector::zeros(d);
                for j in 0..d {
                    // Range fraction r ~ Beta(n - 1, 2) via two gammas; the
                    // minimum sits uniformly in the slack the range leaves.
                    let g1 = sample_gamma(rng, nf - 1.0, 1.0);
                    let g2 = sample_gamma(rng, 2.0, 1.0);
                    let r = g1 / (g1 + g2);
                    let u = rng.uniform();
                    let width = hi[j] - lo[j];
                    let low = lo[j] + width * (u * (1.0 - r));
                    smin[j] = low;
                    smax[j] = low + width * r;
                }
                SufficientStat::MinMax { lo: smin, hi: smax }
            }
            SuffstatSampler::PoissonSums { means } => {
                let t: Vec<f64> = means
                    .iter()
                    .map(|&mu| sample_poisson(rng, mu) as f64)
                    .collect();
                SufficientStat::CoordSums(DVector::from_vec(t))
            }
        }
    }
}

/// Monte Carlo estimate of the total variation between an amplifier's output
/// law and the genuine law of `n + m` samples, for amplifiers that carry the
/// sufficient statistic of their `n` input samples.
///
/// For such maps the conditional law given the statistic is exactly right,
/// so the total variation equals the distance between the statistic's laws
/// at sizes `n` and `n + m`:
///
/// `TV = E_T[ (1 - q(T) / p(T))_+ ]`, `T ~ p`,
///
/// where `p` and `q` are the statistic densities at sizes `n` and `n + m`.
/// Each replicate draws `T` from its exact finite-sample law (no dataset is
/// materialised) and averages the positive part of the density-ratio
/// complement, an unbiased estimator with replicates in `[0, 1]`.
///
/// `m = 0` returns an exact zero.  Shuffle-class amplifiers and families
/// whose statistic laws are singular or unavailable are refused.
pub fn tv_mc_suffstat(
    family: &Family,
    n: usize,
    m: usize,
    amplifier: AmplifierClass,
    reps: usize,
    rng: &mut RngState,
) -> Result<McEstimate> {
    if amplifier == AmplifierClass::Shuffle {
        return Err(AmpError::unsupported(
            "shuffle amplifiers do not carry a sufficient statistic; bound their error with the plug-in chi-square guarantee or test it with the detector battery",
        ));
    }
    if n == 0 {
        return Err(AmpError::validation("need at least one input sample"));
    }
    if reps < 2 {
        return Err(AmpError::validation("need at least 2 Monte Carlo replicates"));
    }
    let sampler = suffstat_sampler(family, n)?;
    if m == 0 {
        return Ok(McEstimate {
            value: 0.0,
            stderr: 0.0,
        });
    }
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..reps {
        let stat = sampler.draw(rng);
        let lp = family.log_density_suffstat(&stat, n)?;
        if !lp.is_finite() {
            return Err(AmpError::numerical(
                "a drawn statistic scored a non-finite log density under its own law",
            ));
        }
        let lq = family.log_density_suffstat(&stat, n + m)?;
        let term = if lq == f64::NEG_INFINITY {
            1.0
        } else {
            (1.0 - (lq - lp).exp()).max(0.0)
        };
        sum += term;
        sum_sq += term * term;
    }
    let r = reps as f64;
    let mean = sum / r;
    let var = ((sum_sq - sum * sum / r) / (r - 1.0)).max(0.0);
    Ok(McEstimate {
        value: mean,
        stderr: (var / r).sqrt(),
    })
}

// ---------------------------------------------------------------------------
// Black-box detector battery.
// ---------------------------------------------------------------------------

/// Outcome of one detector run against a candidate generator.
///
/// `tv_lower_estimate = max(0, rejection - level)` is a valid lower bound on
/// the total variation between the candidate's output law and the genuine
/// law of `n + m` samples whenever the detector's rejection probability under
/// the genuine law is at most `level`.  Calibrated detectors report the
/// requested level; structural detectors (duplicates, support violations,
/// impossible symbols) reject genuine data with probability zero and report
/// level 0 — except in the regime flagged by a note, where the top-symbol
/// absence clause can fire on genuine data too.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifierReport {
    /// Detector name: `suffstat_region`, `duplicate`, `block_mean`,
    /// `range_support`, or `new_symbol`.
    pub test: String,
    /// Rejection probability the detector is calibrated to under genuine
    /// data (0 for structural detectors).
    pub level: f64,
    /// Fraction of candidate replicates rejected.
    pub rejection: f64,
    /// Number of evaluation replicates.
    pub replicates: usize,
    /// `max(0, rejection - level)`.
    pub tv_lower_estimate: f64,
    /// Binomial standard error of the rejection rate.
    pub stderr: f64,
    /// Seed of the generator that drove calibration and evaluation.
    pub seed: u64,
    /// Human-readable caveats and calibration details.
    pub notes: Vec<String>,
}

fn finish_report(
    test: &str,
    level: f64,
    rejections: usize,
    reps: usize,
    seed: u64,
    notes: Vec<String>,
) -> VerifierReport {
    let rejection = rejections as f64 / reps as f64;
    VerifierReport {
        test: test.to_string(),
        level,
        rejection,
        replicates: reps,
        tv_lower_estimate: (rejection - level).max(0.0),
        stderr: (rejection * (1.0 - rejection) / reps as f64).sqrt(),
        seed,
        notes,
    }
}

/// Linear-interpolation quantile of an ascending-sorted slice, matching the
/// convention `pos = p * (len - 1)`.
fn quantile_interpolated(sorted: &[f64], p: f64) -> f64 {
    let last = sorted.len() - 1;
    let pos = p * last as f64;
    let lo = pos.floor() as usize;
    if lo >= last {
        return sorted[last];
    }
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Negative log density of the dataset's sufficient statistic under the
/// genuine law of `total` samples; large values mean the statistic landed
/// outside the region where genuine statistics concentrate.
fn region_stat(family: &Family, data: &Dataset, total: usize) -> Result<f64> {
    let stat = sufficient_stat(data)?;
    Ok(-family.log_density_suffstat(&stat, total)?)
}

/// Whitening matrix for a single observation of the family: the
/// pseudo-inverse square root of the per-row covariance, so that block mean
/// differences are compared on a scale-free footing.
fn observation_standardizer(family: &Family) -> Result<DMatrix<f64>> {
    let cov = match family {
        Family::GaussianMean { cov, .. }
        | Family::GaussianCov { cov }
        | Family::GaussianMeanCov { cov, .. } => cov.clone(),
        Family::SparseGaussian { mean, .. } => DMatrix::identity(mean.len(), mean.len()),
        Family::LowRankCov { frame } => frame * frame.transpose(),
        Family::ProductExponential { rates } => {
            DMatrix::from_diagonal(&rates.map(|r| 1.0 / (r * r)))
        }
        Family::UniformRect { lo, hi } => {
            let widths = hi - lo;
            DMatrix::from_diagonal(&widths.map(|w| w * w / 12.0))
        }
        Family::ProductPoisson { rates } => DMatrix::from_diagonal(rates),
        Family::PoissonizedDiscrete { probs } => {
            DMatrix::from_diagonal(&DVector::from_vec(probs.clone()))
        }
        Family::Discrete { probs } | Family::TopElementDiscrete { probs, .. } => {
            let mean: f64 = probs
                .iter()
                .enumerate()
                .map(|(j, p)| p * (j + 1) as f64)
                .sum();
            let second: f64 = probs
                .iter()
                .enumerate()
                .map(|(j, p)| p * ((j + 1) as f64).powi(2))
                .sum();
            DMatrix::from_element(1, 1, (second - mean * mean).max(0.0))
        }
    };
    sym_sqrt(&cov, SymSqrtKind::PseudoInverseRoot)
}

/// Squared norm of the whitened difference between the mean of the first `n`
/// rows and the mean of the remaining rows.
fn block_mean_stat(w: &DMatrix<f64>, rows: &DMatrix<f64>, n: usize) -> f64 {
    let total = rows.nrows();
    let m = total - n;
    let d = rows.ncols();
    let mut diff = DVector::zeros(d);
    for j in 0..d {
        let mut first = 0.0;
        for i in 0..n {
            first += rows[(i, j)];
        }
        let mut second = 0.0;
        for i in n..total {
            second += rows[(i, j)];
        }
        diff[j] = first / n as f64 - second / m as f64;
    }
    (w * diff).norm_squared()
}

fn has_duplicate_rows(rows: &DMatrix<f64>) -> bool {
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(rows.nrows());
    for i in 0..rows.nrows() {
        let key: Vec<u64> = (0..rows.ncols()).map(|j| rows[(i, j)].to_bits()).collect();
        if !seen.insert(key) {
            return true;
        }
    }
    false
}

/// Runs every detector applicable to the family against a candidate
/// generator and reports one [`VerifierReport`] per detector, in the fixed
/// order `suffstat_region`, `duplicate`, `block_mean`, `range_support`,
/// `new_symbol`.
///
/// The candidate closure is called once per evaluation replicate and must
/// return an `(n + m) x d` dataset of the family's kind — typically an
/// amplifier output or a baseline generator.  Two detector classes are used:
///
/// * **Calibrated** (`suffstat_region`, `block_mean`): thresholds are set at
///   quantiles of the statistic over [`DEFAULT_CALIBRATION_REPS`] genuine
///   datasets, giving rejection probability `level` (one-sided upper for the
///   statistic-region score, `level / 2` per tail for the block-mean
///   statistic) under the genuine law.
/// * **Structural** (`duplicate`, `range_support`, `new_symbol`): events
///   that genuine data hit with probability zero, so any rejection is
///   evidence.  For top-element families the `new_symbol` detector also
///   fires when the known top symbol is absent; when genuine data miss that
///   symbol with probability above `level` a note marks the lower-bound
///   field as uninformative.
///
/// Calibration and evaluation use structurally disjoint substreams forked
/// from `rng`, so candidates cannot see the thresholds' randomness.
pub fn detector_battery<F>(
    family: &Family,
    n: usize,
    m: usize,
    mut candidate: F,
    level: f64,
    reps: usize,
    rng: &mut RngState,
) -> Result<Vec<VerifierReport>>
where
    F: FnMut(&mut RngState) -> Result<Dataset>,
{
    if !(level > 0.0 && level < 1.0) {
        return Err(AmpError::validation(format!(
            "detector level must lie strictly between 0 and 1, got {level}"
        )));
    }
    if reps < MIN_BATTERY_REPS {
        return Err(AmpError::validation(format!(
            "need at least {MIN_BATTERY_REPS} evaluation replicates for a meaningful rejection rate, got {reps}"
        )));
    }
    if n == 0 {
        return Err(AmpError::validation("need at least one genuine sample"));
    }
    let kind = family.kind();
    let d = family.data_dim();
    let total = n + m;

    // Which detectors apply.  The statistic-region score needs a registered
    // sufficient statistic with a density at size `total`.
    let region_ok = match kind {
        FamilyKind::GaussianMean
        | FamilyKind::ProductExponential
        | FamilyKind::ProductPoisson
        | FamilyKind::PoissonizedDiscrete
        | FamilyKind::TopElementDiscrete => true,
        FamilyKind::GaussianCov => total >= d,
        FamilyKind::GaussianMeanCov => total >= d + 1,
        FamilyKind::UniformRect => total >= 2,
        FamilyKind::Discrete | FamilyKind::SparseGaussian | FamilyKind::LowRankCov => false,
    };
    let duplicate_ok = matches!(
        kind,
        FamilyKind::GaussianMean
            | FamilyKind::GaussianCov
            | FamilyKind::GaussianMeanCov
            | FamilyKind::ProductExponential
            | FamilyKind::UniformRect
            | FamilyKind::SparseGaussian
            | FamilyKind::LowRankCov
    );
    let block_ok = m > 0;
    let range_ok = kind == FamilyKind::UniformRect;
    let newsym_ok = matches!(kind, FamilyKind::Discrete | FamilyKind::TopElementDiscrete);
    if !(region_ok || duplicate_ok || block_ok || range_ok || newsym_ok) {
        return Err(AmpError::unsupported(format!(
            "no detector applies to {kind:?} with m = 0"
        )));
    }

    let standardizer = if block_ok {
        Some(observation_standardizer(family)?)
    } else {
        None
    };

    // Disjoint substreams: candidates never consume calibration randomness.
    let cal_tag = rng.next_u64();
    let eval_tag = loop {
        let t = rng.next_u64();
        if t != cal_tag {
            break t;
        }
    };
    let mut cal = rng.fork(cal_tag);
    let mut eval = rng.fork(eval_tag);

    // Calibrate quantile thresholds on genuine data.
    let mut region_thr = f64::INFINITY;
    let mut block_lo = f64::NEG_INFINITY;
    let mut block_hi = f64::INFINITY;
    if region_ok || standardizer.is_some() {
        let mut region_stats = Vec::with_capacity(if region_ok { DEFAULT_CALIBRATION_REPS } else { 0 });
        let mut block_stats = Vec::with_capacity(if block_ok { DEFAULT_CALIBRATION_REPS } else { 0 });
        for _ in 0..DEFAULT_CALIBRATION_REPS {
            let data = family.sample(total, &mut cal)?;
            if region_ok {
                let s = region_stat(family, &data, total)?;
                if !s.is_finite() {
                    return Err(AmpError::numerical(
                        "genuine calibration data scored a non-finite statistic-region value",
                    ));
                }
                region_stats.push(s);
            }
            if let Some(w) = &standardizer {
                block_stats.push(block_mean_stat(w, &data.rows, n));
            }
        }
        if region_ok {
            region_stats.sort_unstable_by(f64::total_cmp);
            region_thr = quantile_interpolated(&region_stats, 1.0 - level);
        }
        if block_ok {
            block_stats.sort_unstable_by(f64::total_cmp);
            block_lo = quantile_interpolated(&block_stats, level / 2.0);
            block_hi = quantile_interpolated(&block_stats, 1.0 - level / 2.0);
        }
    }

    let discrete_probs: Option<&[f64]> = match family {
        Family::Discrete { probs } | Family::TopElementDiscrete { probs, .. } => {
            Some(probs.as_slice())
        }
        _ => None,
    };
    let check_top_presence = matches!(family, Family::TopElementDiscrete { .. });
    let support = match family {
        Family::UniformRect { lo, hi } => Some((lo.clone(), hi.clone())),
        _ => None,
    };

    let mut rej_region = 0usize;
    let mut rej_duplicate = 0usize;
    let mut rej_block = 0usize;
    let mut rej_range = 0usize;
    let mut rej_newsym = 0usize;

    for _ in 0..reps {
        let data = candidate(&mut eval)?;
        if data.rows.nrows() != total || data.rows.ncols() != d {
            return Err(AmpError::validation(format!(
                "candidate returned a {}x{} dataset; expected {}x{}",
                data.rows.nrows(),
                data.rows.ncols(),
                total,
                d
            )));
        }
        if data.spec.kind != kind {
            return Err(AmpError::validation(format!(
                "candidate returned a {:?} dataset for a {kind:?} family",
                data.spec.kind
            )));
        }
        if region_ok {
            // Malformed or off-support data have no genuine statistic score;
            // that is itself grounds for rejection.
            let s = region_stat(family, &data, total).unwrap_or(f64::INFINITY);
            if s.is_nan() || s > region_thr {
                rej_region += 1;
            }
        }
        if duplicate_ok && has_duplicate_rows(&data.rows) {
            rej_duplicate += 1;
        }
        if let Some(w) = &standardizer {
            let s = block_mean_stat(w, &data.rows, n);
            if s.is_nan() || s < block_lo || s > block_hi {
                rej_block += 1;
            }
        }
        if let Some((lo, hi)) = &support {
            let mut outside = false;
            'scan: for i in 0..total {
                for j in 0..d {
                    let v = data.rows[(i, j)];
                    if !(v >= lo[j] && v <= hi[j]) {
                        outside = true;
                        break 'scan;
                    }
                }
            }
            if outside {
                rej_range += 1;
            }
        }
        if let Some(probs) = discrete_probs {
            let k = probs.len();
            let mut suspicious = false;
            let mut top_seen = false;
            for i in 0..total {
                let v = data.rows[(i, 0)];
                if v.is_finite() && v.fract() == 0.0 && v >= 1.0 && v <= k as f64 {
                    let j = v as usize - 1;
                    if probs[j] <= 0.0 {
                        suspicious = true;
                    }
                    if j == 0 {
                        top_seen = true;
                    }
                } else {
                    suspicious = true;
                }
            }
            if check_top_presence && !top_seen {
                suspicious = true;
            }
            if suspicious {
                rej_newsym += 1;
            }
        }
    }

    let seed = rng.seed();
    let calibration_note = format!(
        "threshold calibrated on {DEFAULT_CALIBRATION_REPS} genuine replicates"
    );
    let mut reports = Vec::new();
    if region_ok {
        reports.push(finish_report(
            "suffstat_region",
            level,
            rej_region,
            reps,
            seed,
            vec![calibration_note.clone()],
        ));
    }
    if duplicate_ok {
        reports.push(finish_report(
            "duplicate",
            0.0,
            rej_duplicate,
            reps,
            seed,
            vec!["structural test: rejects bitwise-duplicate rows, a probability-zero event for continuous data".to_string()],
        ));
    }
    if block_ok {
        reports.push(finish_report(
            "block_mean",
            level,
            rej_block,
            reps,
            seed,
            vec![calibration_note],
        ));
    }
    if range_ok {
        reports.push(finish_report(
            "range_support",
            0.0,
            rej_range,
            reps,
            seed,
            vec!["structural test: rejects observations outside the rectangle support".to_string()],
        ));
    }
    if newsym_ok {
        let mut notes =
            vec!["structural test: rejects malformed or zero-probability symbols".to_string()];
        if let Family::TopElementDiscrete { top_mass, .. } = family {
            notes.push("also rejects datasets in which the top symbol never occurs".to_string());
            let genuine_absence = (1.0 - top_mass).powi(total as i32);
            if genuine_absence > level {
                notes.push(format!(
                    "genuine data lack the top symbol with probability {genuine_absence:.4}, which exceeds the level; the total-variation lower bound is not informative in this regime"
                ));
            }
        }
        reports.push(finish_report(
            "new_symbol", 0.0, rej_newsym, reps, seed, notes,
        ));
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
// Baseline generators the battery should catch.
// ---------------------------------------------------------------------------

/// Baseline amplifier that appends verbatim copies of the input rows,
/// cycling through them in order.  Continuous-family outputs always contain
/// bitwise duplicates, so the duplicate detector catches this with power 1.
pub fn copy_append(data: &Dataset, m: usize) -> Result<Dataset> {
    let (n, d) = (data.rows.nrows(), data.rows.ncols());
    if n == 0 {
        return Err(AmpError::validation("cannot copy rows from an empty dataset"));
    }
    let mut rows = DMatrix::zeros(n + m, d);
    rows.view_mut((0, 0), (n, d)).copy_from(&data.rows);
    for i in 0..m {
        for j in 0..d {
            rows[(n + i, j)] = data.rows[(i % n, j)];
        }
    }
    Ok(Dataset {
        spec: data.spec.clone(),
        rows,
        origin: data.origin,
    })
}

/// Baseline amplifier that fits the learner on **all** `n` rows and appends
/// `m` fresh draws from the fitted plug-in, without shuffling.  The appended
/// block's law depends on the first block, which the block-mean detector is
/// designed to notice.
pub fn plain_append(
    data: &Dataset,
    learner: &Learner,
    m: usize,
    rng: &mut RngState,
) -> Result<Dataset> {
    let (n, d) = (data.rows.nrows(), data.rows.ncols());
    if n == 0 {
        return Err(AmpError::validation("cannot fit a learner on an empty dataset"));
    }
    let plugin = learner.fit(&data.rows, &data.spec)?;
    let mut rows = DMatrix::zeros(n + m, d);
    rows.view_mut((0, 0), (n, d)).copy_from(&data.rows);
    for i in 0..m {
        let row = plugin.draw_row(rng);
        if row.len() != d {
            return Err(AmpError::numerical(
                "fitted learner drew a row of the wrong dimension",
            ));
        }
        for j in 0..d {
            rows[(n + i, j)] = row[j];
        }
    }
    Ok(Dataset {
        spec: data.spec.clone(),
        rows,
        origin: Some((rng.seed(), rng.stream())),
    })
}

/// Baseline amplifier for finite alphabets that appends `m` symbols drawn
/// uniformly from the alphabet, ignoring the data entirely.
pub fn uniform_fake(data: &Dataset, m: usize, rng: &mut RngState) -> Result<Dataset> {
    if !matches!(
        data.spec.kind,
        FamilyKind::Discrete | FamilyKind::TopElementDiscrete
    ) {
        return Err(AmpError::unsupported(
            "uniform fake symbols only make sense for finite-alphabet families",
        ));
    }
    if data.rows.ncols() != 1 {
        return Err(AmpError::validation("symbol datasets have exactly one column"));
    }
    let k = data
        .spec
        .alphabet
        .ok_or_else(|| AmpError::validation("dataset spec lacks an alphabet size"))? as u64;
    if k == 0 {
        return Err(AmpError::validation("alphabet must be nonempty"));
    }
    let n = data.rows.nrows();
    let mut rows = DMatrix::zeros(n + m, 1);
    rows.view_mut((0, 0), (n, 1)).copy_from(&data.rows);
    for i in 0..m {
        rows[(n + i, 0)] = (rng.below(k) + 1) as f64;
    }
    Ok(Dataset {
        spec: data.spec.clone(),
        rows,
        origin: Some((rng.seed(), rng.stream())),
    })
}

// ---------------------------------------------------------------------------
// Plug-in learner chi-square error, by Monte Carlo.
// ---------------------------------------------------------------------------

/// Classical one-dimensional plug-in learners whose expected chi-square
/// divergence [`chi2_error_mc`] estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chi2Learner {
    /// Sample mean of a unit-information Gaussian location family.
    GaussianMeanPlugin,
    /// Min-max endpoints of a uniform interval.
    UniformMle,
    /// Reciprocal sample mean of an exponential rate.
    ExponentialRatePlugin,
    /// Sample mean of a Poisson rate.
    PoissonMeanPlugin,
    /// Empirical frequencies of a finite alphabet.
    EmpiricalDiscrete,
}

/// Monte Carlo estimate of `E[chi^2(fitted plug-in, truth)]` for a plug-in
/// learner fitted on `n` fresh samples of the family.
///
/// Each replicate draws the learner's sufficient statistic from its exact
/// law and evaluates the chi-square divergence in closed form:
///
/// * Gaussian location: `exp(z^2 / n) - 1` with `z` standard normal
///   (scale-free);
/// * uniform endpoints: the squared width ratio `1 / r^2 - 1` with the range
///   fraction `r ~ Beta(n - 1, 2)` (infinite for `n = 1`);
/// * exponential rate: `(rho - 1)^2 / (2 rho - 1)` for the rate ratio
///   `rho = n / Gamma(n, 1)`, infinite when `2 rho <= 1`;
/// * Poisson rate: `exp((hat - rate)^2 / rate) - 1` (not scale-free; uses
///   the family's rate);
/// * empirical frequencies: `sum_j (phat_j - p_j)^2 / p_j`.
///
/// With `clip_at_n` every replicate is truncated at `n`, matching the
/// clipped guarantee the shuffling amplifier consumes; the clipped estimate
/// never exceeds the unclipped one.  If any unclipped replicate is infinite
/// the estimate is reported as infinity rather than a misleading finite
/// average.
pub fn chi2_error_mc(
    learner: Chi2Learner,
    family: &Family,
    n: usize,
    clip_at_n: bool,
    reps: usize,
    rng: &mut RngState,
) -> Result<McEstimate> {
    if n == 0 {
        return Err(AmpError::validation("fit size must be positive"));
    }
    if reps < 2 {
        return Err(AmpError::validation("need at least 2 Monte Carlo replicates"));
    }
    let matches_family = match (learner, family) {
        (Chi2Learner::GaussianMeanPlugin, Family::GaussianMean { mean, .. }) => mean.len() == 1,
        (Chi2Learner::UniformMle, Family::UniformRect { lo, .. }) => lo.len() == 1,
        (Chi2Learner::ExponentialRatePlugin, Family::ProductExponential { rates }) => {
            rates.len() == 1
        }
        (Chi2Learner::PoissonMeanPlugin, Family::ProductPoisson { rates }) => rates.len() == 1,
        (
            Chi2Learner::EmpiricalDiscrete,
            Family::Discrete { .. } | Family::TopElementDiscrete { .. },
        ) => true,
        _ => false,
    };
    if !matches_family {
        return Err(AmpError::validation(format!(
            "chi-square error estimation for {learner:?} needs a matching one-dimensional family, got {:?}",
            family.kind()
        )));
    }
    let nf = n as f64;
    let discrete = match family {
        Family::Discrete { probs } | Family::TopElementDiscrete { probs, .. } => {
            Some((probs.clone(), cumulative_probs(probs)))
        }
        _ => None,
    };
    let poisson_rate = match family {
        Family::ProductPoisson { rates } => rates[0],
        _ => 0.0,
    };

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut infinite_hits = 0usize;
    for _ in 0..reps {
        let chi2 = match learner {
            Chi2Learner::GaussianMeanPlugin => {
                let z = sample_std_normal(rng);
                (z * z / nf).exp_m1()
            }
            Chi2Learner::UniformMle => {
                if n == 1 {
                    f64::INFINITY
                } else {
                    let g1 = sample_gamma(rng, nf - 1.0, 1.0);
                    let g2 = sample_gamma(rng, 2.0, 1.0);
                    let r = g1 / (g1 + g2);
                    1.0 / (r * r) - 1.0
                }
            }
            Chi2Learner::ExponentialRatePlugin => {
                let rho = nf / sample_gamma(rng, nf, 1.0);
                if 2.0 * rho > 1.0 {
                    (rho - 1.0) * (rho - 1.0) / (2.0 * rho - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Chi2Learner::PoissonMeanPlugin => {
                let hat = sample_poisson(rng, nf * poisson_rate) as f64 / nf;
                let delta = hat - poisson_rate;
                (delta * delta / poisson_rate).exp_m1()
            }
            Chi2Learner::EmpiricalDiscrete => {
                let (probs, cum) = discrete.as_ref().expect("validated discrete family");
                let mut counts = vec![0u64; probs.len()];
                for _ in 0..n {
                    counts[draw_symbol(cum, rng) - 1] += 1;
                }
                let mut acc = 0.0;
                for (j, &p) in probs.iter().enumerate() {
                    let phat = counts[j] as f64 / nf;
                    if p > 0.0 {
                        acc += (phat - p) * (phat - p) / p;
                    } else if counts[j] > 0 {
                        acc = f64::INFINITY;
                    }
                }
                acc
            }
        };
        let term = if clip_at_n { chi2.min(nf) } else { chi2 };
        if term.is_infinite() {
            infinite_hits += 1;
        } else {
            sum += term;
            sum_sq += term * term;
        }
    }
    if infinite_hits > 0 {
        return Ok(McEstimate {
            value: f64::INFINITY,
            stderr: f64::INFINITY,
        });
    }
    let r = reps as f64;
    let mean = sum / r;
    let var = ((sum_sq - sum * sum / r) / (r - 1.0)).max(0.0);
    Ok(McEstimate {
        value: mean,
        stderr: (var / r).sqrt(),
    })
}

// ---------------------------------------------------------------------------
// Marginal Kolmogorov-Smirnov check.
// ---------------------------------------------------------------------------

/// Two-sided Kolmogorov-Smirnov goodness-of-fit check of a one-dimensional
/// continuous dataset against its family's distribution function, using the
/// distribution-free Dvoretzky-Kiefer-Wolfowitz threshold
/// `sqrt(ln(2 / level) / (2 n))`.
///
/// Returns `Ok(true)` when the empirical distribution stays within the
/// threshold (the data pass), `Ok(false)` otherwise.  Fewer than 8
/// observations are refused: the threshold exceeds 1/2 there and the check
/// would be vacuous.
pub fn ks_marginal_test(data: &Dataset, family: &Family, level: f64) -> Result<bool> {
    if !(level > 0.0 && level < 1.0) {
        return Err(AmpError::validation(format!(
            "test level must lie strictly between 0 and 1, got {level}"
        )));
    }
    if family.data_dim() != 1 || data.rows.ncols() != 1 {
        return Err(AmpError::validation(
            "the marginal distribution check needs one-dimensional data",
        ));
    }
    let n = data.rows.nrows();
    if n < 8 {
        return Err(AmpError::validation(format!(
            "need at least 8 observations for a non-vacuous threshold, got {n}"
        )));
    }
    let cdf: Box<dyn Fn(f64) -> f64> = match family {
        Family::GaussianMean { mean, cov } | Family::GaussianMeanCov { mean, cov } => {
            let mu = mean[0];
            let sd = cov[(0, 0)].sqrt();
            if !(sd > 0.0) {
                return Err(AmpError::unsupported("degenerate (zero-variance) Gaussian"));
            }
            Box::new(move |x| normal_cdf((x - mu) / sd))
        }
        Family::GaussianCov { cov } => {
            let sd = cov[(0, 0)].sqrt();
            if !(sd > 0.0) {
                return Err(AmpError::unsupported("degenerate (zero-variance) Gaussian"));
            }
            Box::new(move |x| normal_cdf(x / sd))
        }
        Family::ProductExponential { rates } => {
            let lambda = rates[0];
            Box::new(move |x| if x <= 0.0 { 0.0 } else { -(-lambda * x).exp_m1() })
        }
        Family::UniformRect { lo, hi } => {
            let (a, b) = (lo[0], hi[0]);
            Box::new(move |x| ((x - a) / (b - a)).clamp(0.0, 1.0))
        }
        _ => {
            return Err(AmpError::unsupported(
                "the marginal distribution check needs a one-dimensional continuous family with a closed-form distribution function",
            ))
        }
    };
    let mut xs: Vec<f64> = data.rows.column(0).iter().copied().collect();
    if xs.iter().any(|x| x.is_nan()) {
        return Ok(false);
    }
    xs.sort_unstable_by(f64::total_cmp);
    let nf = n as f64;
    let mut d_stat = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d_stat = d_stat.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let threshold = ((2.0 / level).ln() / (2.0 * nf)).sqrt();
    Ok(d_stat <= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplify::{amplify_gaussian_mean, amplify_uniform};
    use crate::divergences::{
        gamma_kl, gaussian_scaling_tv_exact, uniform_minmax_kl, wishart_kl,
    };

    fn rng(stream: u64) -> RngState {
        RngState::new(0x5eed_0000_c0de_0002, stream)
    }

    fn gaussian_1d(mu: f64, var: f64) -> Family {
        Family::gaussian_mean(
            DVector::from_vec(vec![mu]),
            DMatrix::from_element(1, 1, var),
        )
        .unwrap()
    }

    fn gaussian_2d() -> Family {
        Family::gaussian_mean(
            DVector::from_vec(vec![0.5, -1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]),
        )
        .unwrap()
    }

    // ---- tv_mc_suffstat -------------------------------------------------

    #[test]
    fn tv_suffstat_zero_extra_is_exact_zero() {
        let family = gaussian_2d();
        let est = tv_mc_suffstat(
            &family,
            12,
            0,
            AmplifierClass::SufficiencyIdentity,
            100,
            &mut rng(1),
        )
        .unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn tv_suffstat_gaussian_matches_exact_scaling_formula() {
        let family = gaussian_1d(2.0, 4.0);
        let est = tv_mc_suffstat(
            &family,
            25,
            5,
            AmplifierClass::SufficiencyIdentity,
            40_000,
            &mut rng(2),
        )
        .unwrap();
        let exact = gaussian_scaling_tv_exact(25.0, 5.0, 1).unwrap();
        assert!(est.stderr > 0.0);
        assert!(
            (est.value - exact).abs() <= 3.0 * est.stderr,
            "estimate {} vs exact {} (stderr {})",
            est.value,
            exact,
            est.stderr
        );
        // Same seed, same estimate: the run is reproducible.
        let again = tv_mc_suffstat(
            &family,
            25,
            5,
            AmplifierClass::SufficiencyIdentity,
            40_000,
            &mut rng(2),
        )
        .unwrap();
        assert_eq!(est.value, again.value);
        assert_eq!(est.stderr, again.stderr);
    }

    #[test]
    fn tv_suffstat_exponential_stays_below_information_bound() {
        let family =
            Family::product_exponential(DVector::from_vec(vec![3.0])).unwrap();
        let est = tv_mc_suffstat(
            &family,
            20,
            2,
            AmplifierClass::SufficiencyIdentity,
            20_000,
            &mut rng(3),
        )
        .unwrap();
        let kl = gamma_kl(20.0, 2.0, 1).unwrap();
        assert!(est.value >= 0.0);
        assert!(est.value <= (kl / 2.0).sqrt() + 3.0 * est.stderr);
    }

    #[test]
    fn tv_suffstat_wishart_and_mean_cov_paths_respect_bounds() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let scatter_family = Family::gaussian_cov(cov.clone()).unwrap();
        let est = tv_mc_suffstat(
            &scatter_family,
            30,
            5,
            AmplifierClass::SufficiencyIdentity,
            20_000,
            &mut rng(4),
        )
        .unwrap();
        let kl = wishart_kl(30.0, 5.0, 2).unwrap();
        assert!(est.value > 0.0 && est.value < 1.0);
        assert!(est.value <= (kl / 2.0).sqrt() + 3.0 * est.stderr);

        let both_family =
            Family::gaussian_mean_cov(DVector::from_vec(vec![1.0, -0.5]), cov).unwrap();
        let est_both = tv_mc_suffstat(
            &both_family,
            30,
            5,
            AmplifierClass::SufficiencyIdentity,
            20_000,
            &mut rng(5),
        )
        .unwrap();
        // Mean-and-covariance statistic: KL adds the location part at sizes
        // (n, n + m) to the Wishart part at degrees of freedom (n-1, m).
        let kl_both = crate::divergences::gaussian_scaling_kl(30.0, 5.0, 2).unwrap()
            + wishart_kl(29.0, 5.0, 2).unwrap();
        assert!(est_both.value > 0.0 && est_both.value < 1.0);
        assert!(est_both.value <= (kl_both / 2.0).sqrt() + 3.0 * est_both.stderr);
    }

    #[test]
    fn tv_suffstat_uniform_and_poissonized_paths_respect_bounds() {
        let family = Family::uniform_rect(
            DVector::from_vec(vec![0.0, -1.0]),
            DVector::from_vec(vec![2.0, 1.0]),
        )
        .unwrap();
        let est = tv_mc_suffstat(
            &family,
            12,
            3,
            AmplifierClass::SufficiencyIdentity,
            20_000,
            &mut rng(6),
        )
        .unwrap();
        let kl = uniform_minmax_kl(12.0, 3.0, 2).unwrap();
        assert!(est.value > 0.0 && est.value < 1.0);
        assert!(est.value <= (kl / 2.0).sqrt() + 3.0 * est.stderr);

        let pois = Family::poissonized_discrete(vec![0.5, 0.3, 0.2]).unwrap();
        let est_pois = tv_mc_suffstat(
            &pois,
            15,
            3,
            AmplifierClass::SufficiencyIdentity,
            20_000,
            &mut rng(7),
        )
        .unwrap();
        // KL between the total-count laws: m - n ln((n + m)/n), independent
        // of the alphabet.
        let kl_pois = 3.0 - 15.0 * (18.0f64 / 15.0).ln();
        assert!(est_pois.value > 0.0 && est_pois.value < 1.0);
        assert!(est_pois.value <= (kl_pois / 2.0).sqrt() + 3.0 * est_pois.stderr);
    }

    #[test]
    fn tv_suffstat_refuses_intractable_requests() {
        let gauss = gaussian_1d(0.0, 1.0);
        let err = tv_mc_suffstat(&gauss, 10, 2, AmplifierClass::Shuffle, 100, &mut rng(8))
            .unwrap_err();
        assert!(matches!(err, AmpError::Unsupported(_)));

        for family in [
            Family::product_poisson(DVector::from_vec(vec![2.0])).unwrap(),
            Family::discrete(vec![0.5, 0.5]).unwrap(),
            Family::top_element_discrete(vec![0.4, 0.3, 0.3], 0.4).unwrap(),
            Family::sparse_gaussian(DVector::zeros(4), 1).unwrap(),
        ] {
            let err = tv_mc_suffstat(
                &family,
                10,
                2,
                AmplifierClass::SufficiencyIdentity,
                100,
                &mut rng(9),
            )
            .unwrap_err();
            assert!(matches!(err, AmpError::Unsupported(_)), "{family:?}");
        }

        // Scatter statistic below the density threshold.
        let cov3 = DMatrix::identity(3, 3);
        let err = tv_mc_suffstat(
            &Family::gaussian_cov(cov3).unwrap(),
            2,
            1,
            AmplifierClass::SufficiencyIdentity,
            100,
            &mut rng(10),
        )
        .unwrap_err();
        assert!(matches!(err, AmpError::Validation(_)));
    }

    // ---- detector battery ------------------------------------------------

    #[test]
    fn battery_calibrates_on_genuine_data() {
        let family = gaussian_2d();
        let (n, m, level, reps) = (30usize, 6usize, 0.1f64, 400usize);
        let fam = family.clone();
        let reports = detector_battery(
            &family,
            n,
            m,
            |r| fam.sample(n + m, r),
            level,
            reps,
            &mut rng(11),
        )
        .unwrap();
        let names: Vec<&str> = reports.iter().map(|r| r.test.as_str()).collect();
        assert_eq!(names, ["suffstat_region", "duplicate", "block_mean"]);
        for report in &reports {
            assert_eq!(report.replicates, reps);
            assert!(report.rejection >= 0.0 && report.rejection <= 1.0);
            assert!(
                (report.tv_lower_estimate - (report.rejection - report.level).max(0.0)).abs()
                    < 1e-15
            );
            match report.test.as_str() {
                "duplicate" => {
                    assert_eq!(report.rejection, 0.0);
                    assert_eq!(report.level, 0.0);
                }
                _ => {
                    assert_eq!(report.level, level);
                    assert!(
                        (report.rejection - level).abs() <= 0.06,
                        "{}: genuine rejection {} far from level {}",
                        report.test,
                        report.rejection,
                        level
                    );
                }
            }
        }
    }

    #[test]
    fn battery_duplicate_detector_catches_copy_append_exactly() {
        let family = gaussian_2d();
        let (n, m) = (10usize, 3usize);
        let fam = family.clone();
        let reports = detector_battery(
            &family,
            n,
            m,
            |r| {
                let genuine = fam.sample(n, r)?;
                copy_append(&genuine, m)
            },
            0.05,
            200,
            &mut rng(12),
        )
        .unwrap();
        let dup = reports.iter().find(|r| r.test == "duplicate").unwrap();
        assert_eq!(dup.rejection, 1.0);
        assert_eq!(dup.tv_lower_estimate, 1.0);
        assert_eq!(dup.stderr, 0.0);
    }

    #[test]
    fn battery_block_mean_catches_shifted_appends() {
        let family = gaussian_1d(0.0, 1.0);
        let (n, m) = (30usize, 10usize);
        let spec = family.spec();
        let fam = family.clone();
        let reports = detector_battery(
            &family,
            n,
            m,
            |r| {
                let genuine = fam.sample(n, r)?;
                let mut rows = DMatrix::zeros(n + m, 1);
                rows.view_mut((0, 0), (n, 1)).copy_from(&genuine.rows);
                for i in 0..m {
                    rows[(n + i, 0)] = sample_std_normal(r) + 2.0;
                }
                Ok(Dataset {
                    spec: spec.clone(),
                    rows,
                    origin: None,
                })
            },
            0.05,
            200,
            &mut rng(13),
        )
        .unwrap();
        let block = reports.iter().find(|r| r.test == "block_mean").unwrap();
        assert!(
            block.rejection >= 0.8,
            "block-mean power {} too low",
            block.rejection
        );
        assert!(block.tv_lower_estimate > 0.5);
    }

    #[test]
    fn battery_range_test_catches_support_violations() {
        let family = Family::uniform_rect(
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        let wide = Family::uniform_rect(
            DVector::from_vec(vec![-0.1]),
            DVector::from_vec(vec![1.1]),
        )
        .unwrap();
        let (n, m) = (15usize, 5usize);

        // Oversupport candidate: at least one of the 20 draws leaves [0, 1]
        // with probability 1 - (10/12)^20, far above 0.9.
        let narrow_spec = family.spec();
        let reports = detector_battery(
            &family,
            n,
            m,
            |r| {
                let mut data = wide.sample(n + m, r)?;
                data.spec = narrow_spec.clone();
                Ok(data)
            },
            0.05,
            200,
            &mut rng(14),
        )
        .unwrap();
        let range = reports.iter().find(|r| r.test == "range_support").unwrap();
        assert!(range.rejection >= 0.9, "range power {}", range.rejection);

        // Genuine data never leave the support.
        let fam = family.clone();
        let reports = detector_battery(
            &family,
            n,
            m,
            |r| fam.sample(n + m, r),
            0.05,
            200,
            &mut rng(15),
        )
        .unwrap();
        let range = reports.iter().find(|r| r.test == "range_support").unwrap();
        assert_eq!(range.rejection, 0.0);
    }

    #[test]
    fn battery_new_symbol_rejects_uniform_fakes_on_heavy_top() {
        // Alphabet of 401 symbols: the top carries 0.01, the rest split 0.99.
        let k = 401;
        let mut probs = vec![0.99 / 400.0; k];
        probs[0] = 0.01;
        let family = Family::top_element_discrete(probs, 0.01).unwrap();
        let (n, m) = (1usize, 1usize);
        let fam = family.clone();
        let reports = detector_battery(
            &family,
            n,
            m,
            |r| {
                let genuine = fam.sample(n, r)?;
                uniform_fake(&genuine, m, r)
            },
            0.05,
            400,
            &mut rng(16),
        )
        .unwrap();
        let newsym = reports.iter().find(|r| r.test == "new_symbol").unwrap();
        // Reject when the top symbol shows in neither row:
        // 0.99 * (400/401) = 0.98753...
        assert!(
            newsym.rejection >= 0.9,
            "new-symbol rejection {}",
            newsym.rejection
        );
        assert!(
            newsym.notes.iter().any(|n| n.contains("not informative")),
            "expected a regime note, got {:?}",
            newsym.notes
        );
    }

    #[test]
    fn battery_new_symbol_ignores_in_alphabet_candidates() {
        let family = Family::discrete(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let (n, m) = (6usize, 2usize);
        let fam = family.clone();
        let reports = detector_battery(
            &family,
            n,
            m,
            |r| {
                let genuine = fam.sample(n, r)?;
                uniform_fake(&genuine, m, r)
            },
            0.05,
            200,
            &mut rng(17),
        )
        .unwrap();
        let names: Vec<&str> = reports.iter().map(|r| r.test.as_str()).collect();
        assert_eq!(names, ["block_mean", "new_symbol"]);
        let newsym = reports.iter().find(|r| r.test == "new_symbol").unwrap();
        assert_eq!(newsym.rejection, 0.0);
        assert_eq!(newsym.tv_lower_estimate, 0.0);
    }

    #[test]
    fn battery_lower_bounds_never_exceed_true_amplifier_distance() {
        let family = gaussian_2d();
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let (n, m) = (40usize, 8usize);
        let fam = family.clone();
        let reports = detector_battery(
            &family,
            n,
            m,
            |r| {
                let genuine = fam.sample(n, r)?;
                Ok(amplify_gaussian_mean(&genuine, &cov, m, r)?.data)
            },
            0.05,
            500,
            &mut rng(18),
        )
        .unwrap();
        let truth = tv_mc_suffstat(
            &family,
            n,
            m,
            AmplifierClass::SufficiencyIdentity,
            20_000,
            &mut rng(19),
        )
        .unwrap();
        for report in &reports {
            assert!(
                report.tv_lower_estimate
                    <= truth.value + 3.0 * (truth.stderr + report.stderr) + 0.01,
                "{}: lower bound {} exceeds true distance {}",
                report.test,
                report.tv_lower_estimate,
                truth.value
            );
        }
    }

    #[test]
    fn battery_refuses_bad_budgets_and_shapes() {
        let family = gaussian_1d(0.0, 1.0);
        let fam = family.clone();
        let err = detector_battery(
            &family,
            10,
            2,
            |r| fam.sample(12, r),
            0.05,
            50,
            &mut rng(20),
        )
        .unwrap_err();
        assert!(matches!(err, AmpError::Validation(_)));

        let fam = family.clone();
        let err = detector_battery(
            &family,
            10,
            2,
            |r| fam.sample(12, r),
            0.0,
            200,
            &mut rng(21),
        )
        .unwrap_err();
        assert!(matches!(err, AmpError::Validation(_)));

        // Candidate returning the wrong number of rows is rejected outright.
        let fam = family.clone();
        let err = detector_battery(
            &family,
            10,
            2,
            |r| fam.sample(10, r),
            0.05,
            200,
            &mut rng(22),
        )
        .unwrap_err();
        assert!(matches!(err, AmpError::Validation(_)));
    }

    // ---- baselines --------------------------------------------------------

    #[test]
    fn baselines_produce_the_advertised_shapes_and_contents() {
        let family = gaussian_2d();
        let data = family.sample(5, &mut rng(23)).unwrap();

        let copied = copy_append(&data, 7).unwrap();
        assert_eq!(copied.rows.nrows(), 12);
        for i in 0..7 {
            for j in 0..2 {
                assert_eq!(copied.rows[(5 + i, j)], data.rows[(i % 5, j)]);
            }
        }

        let learner = Learner::gaussian_mean_plugin(DMatrix::identity(2, 2)).unwrap();
        let appended = plain_append(&data, &learner, 4, &mut rng(24)).unwrap();
        assert_eq!(appended.rows.nrows(), 9);
        for i in 0..5 {
            for j in 0..2 {
                assert_eq!(appended.rows[(i, j)], data.rows[(i, j)]);
            }
        }

        let discrete = Family::discrete(vec![0.25; 4]).unwrap();
        let symbols = discrete.sample(6, &mut rng(25)).unwrap();
        let faked = uniform_fake(&symbols, 10, &mut rng(26)).unwrap();
        assert_eq!(faked.rows.nrows(), 16);
        for i in 6..16 {
            let v = faked.rows[(i, 0)];
            assert!(v.fract() == 0.0 && (1.0..=4.0).contains(&v));
        }

        assert!(uniform_fake(&data, 3, &mut rng(27)).is_err());
        assert!(copy_append(&faked, 0).unwrap().rows.nrows() == 16);
    }

    // ---- chi-square learner error ------------------------------------------

    #[test]
    fn chi2_gaussian_location_matches_closed_form() {
        let family = gaussian_1d(3.0, 2.0);
        let est = chi2_error_mc(
            Chi2Learner::GaussianMeanPlugin,
            &family,
            10,
            false,
            30_000,
            &mut rng(28),
        )
        .unwrap();
        // E[exp(z^2/n) - 1] = (1 - 2/n)^{-1/2} - 1 = sqrt(n/(n-2)) - 1.
        let exact = (10.0f64 / 8.0).sqrt() - 1.0;
        assert!(
            (est.value - exact).abs() <= 3.0 * est.stderr,
            "{} vs {} ({})",
            est.value,
            exact,
            est.stderr
        );
    }

    #[test]
    fn chi2_uniform_endpoints_match_closed_form() {
        let family = Family::uniform_rect(
            DVector::from_vec(vec![-2.0]),
            DVector::from_vec(vec![5.0]),
        )
        .unwrap();
        let est = chi2_error_mc(
            Chi2Learner::UniformMle,
            &family,
            10,
            false,
            30_000,
            &mut rng(29),
        )
        .unwrap();
        // E[1/r^2 - 1] = n(n-1)/((n-2)(n-3)) - 1 = (4n - 6)/((n-2)(n-3)).
        let exact = 34.0 / 56.0;
        assert!(
            (est.value - exact).abs() <= 3.0 * est.stderr,
            "{} vs {} ({})",
            est.value,
            exact,
            est.stderr
        );
    }

    #[test]
    fn chi2_empirical_frequencies_match_closed_form() {
        let family = Family::discrete(vec![0.3, 0.25, 0.2, 0.15, 0.1]).unwrap();
        let est = chi2_error_mc(
            Chi2Learner::EmpiricalDiscrete,
            &family,
            50,
            false,
            20_000,
            &mut rng(30),
        )
        .unwrap();
        // E[sum (phat - p)^2 / p] = (k - 1)/n for any full-support p.
        let exact = 4.0 / 50.0;
        assert!(
            (est.value - exact).abs() <= 3.0 * est.stderr,
            "{} vs {} ({})",
            est.value,
            exact,
            est.stderr
        );
    }

    #[test]
    fn chi2_exponential_clipped_agrees_with_learner_guarantee() {
        let family = Family::product_exponential(DVector::from_vec(vec![0.7])).unwrap();
        let est = chi2_error_mc(
            Chi2Learner::ExponentialRatePlugin,
            &family,
            10,
            true,
            20_000,
            &mut rng(31),
        )
        .unwrap();
        let guarantee = Learner::exponential_rate_plugin()
            .chi2_guarantee(10, &family.spec())
            .unwrap();
        let gap = (est.value - guarantee.per_coordinate[0]).abs();
        let tol = 3.0 * (est.stderr + guarantee.sum_stderr.unwrap_or(0.0));
        assert!(
            gap <= tol,
            "{} vs {} (tol {})",
            est.value,
            guarantee.per_coordinate[0],
            tol
        );
    }

    #[test]
    fn chi2_poisson_tiny_rate_exceeds_ten_over_n() {
        // A rate of 1/(n^2 ln n) sits deep in the small-sample regime where
        // the plug-in, clipped at n, still pays at least 10/n on average.
        let n = 100usize;
        let rate = 1.0 / ((n * n) as f64 * (n as f64).ln());
        let family = Family::product_poisson(DVector::from_vec(vec![rate])).unwrap();
        let est = chi2_error_mc(
            Chi2Learner::PoissonMeanPlugin,
            &family,
            n,
            true,
            20_000,
            &mut rng(32),
        )
        .unwrap();
        assert!(
            est.value - 3.0 * est.stderr >= 10.0 / n as f64,
            "clipped Poisson error {} (stderr {}) not above {}",
            est.value,
            est.stderr,
            10.0 / n as f64
        );
    }

    #[test]
    fn chi2_clipping_is_monotone_and_infinities_are_reported() {
        let family = gaussian_1d(0.0, 1.0);
        let clipped = chi2_error_mc(
            Chi2Learner::GaussianMeanPlugin,
            &family,
            6,
            true,
            5_000,
            &mut rng(33),
        )
        .unwrap();
        let unclipped = chi2_error_mc(
            Chi2Learner::GaussianMeanPlugin,
            &family,
            6,
            false,
            5_000,
            &mut rng(33),
        )
        .unwrap();
        assert!(clipped.value <= unclipped.value);

        // At n = 4 the exponential rate ratio falls below 1/2 with
        // probability about 4%, so the unclipped divergence is infinite.
        let exp_family = Family::product_exponential(DVector::from_vec(vec![1.0])).unwrap();
        let inf = chi2_error_mc(
            Chi2Learner::ExponentialRatePlugin,
            &exp_family,
            4,
            false,
            4_000,
            &mut rng(34),
        )
        .unwrap();
        assert!(inf.value.is_infinite());
        let finite = chi2_error_mc(
            Chi2Learner::ExponentialRatePlugin,
            &exp_family,
            4,
            true,
            4_000,
            &mut rng(34),
        )
        .unwrap();
        assert!(finite.value.is_finite());
        assert!(finite.value <= 4.0);
    }

    #[test]
    fn chi2_rejects_mismatched_requests() {
        let gauss2 = gaussian_2d();
        assert!(chi2_error_mc(
            Chi2Learner::GaussianMeanPlugin,
            &gauss2,
            10,
            false,
            100,
            &mut rng(35)
        )
        .is_err());
        let uniform = Family::uniform_rect(
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        assert!(chi2_error_mc(
            Chi2Learner::GaussianMeanPlugin,
            &uniform,
            10,
            false,
            100,
            &mut rng(36)
        )
        .is_err());
        let gauss = gaussian_1d(0.0, 1.0);
        assert!(chi2_error_mc(
            Chi2Learner::GaussianMeanPlugin,
            &gauss,
            0,
            false,
            100,
            &mut rng(37)
        )
        .is_err());
        assert!(chi2_error_mc(
            Chi2Learner::GaussianMeanPlugin,
            &gauss,
            10,
            false,
            1,
            &mut rng(38)
        )
        .is_err());
    }

    // ---- marginal distribution check ----------------------------------------

    #[test]
    fn ks_passes_genuine_gaussian_data_at_the_advertised_rate() {
        let family = gaussian_1d(1.5, 4.0);
        let mut generator = rng(39);
        let runs = 200;
        let mut passes = 0;
        for _ in 0..runs {
            let data = family.sample(100, &mut generator).unwrap();
            if ks_marginal_test(&data, &family, 0.05).unwrap() {
                passes += 1;
            }
        }
        // The distribution-free threshold is conservative: the pass rate is
        // at least 95% up to binomial noise.
        assert!(passes >= 181, "only {passes}/{runs} genuine runs passed");
    }

    #[test]
    fn ks_amplified_uniform_passes_like_genuine_data() {
        let family = Family::uniform_rect(
            DVector::from_vec(vec![2.0]),
            DVector::from_vec(vec![5.0]),
        )
        .unwrap();
        let mut generator = rng(40);
        let runs = 150;
        let (n, m) = (60usize, 3usize);
        let mut genuine_passes = 0;
        let mut amplified_passes = 0;
        for _ in 0..runs {
            let genuine = family.sample(n + m, &mut generator).unwrap();
            if ks_marginal_test(&genuine, &family, 0.05).unwrap() {
                genuine_passes += 1;
            }
            let input = family.sample(n, &mut generator).unwrap();
            let amplified = amplify_uniform(&input, m, &mut generator).unwrap().data;
            if ks_marginal_test(&amplified, &family, 0.05).unwrap() {
                amplified_passes += 1;
            }
        }
        let genuine_rate = genuine_passes as f64 / runs as f64;
        let amplified_rate = amplified_passes as f64 / runs as f64;
        assert!(genuine_rate >= 0.85, "genuine rate {genuine_rate}");
        assert!(amplified_rate >= 0.85, "amplified rate {amplified_rate}");
        assert!(
            (genuine_rate - amplified_rate).abs() <= 0.12,
            "rates diverge: genuine {genuine_rate}, amplified {amplified_rate}"
        );
    }

    #[test]
    fn ks_fails_obviously_wrong_data() {
        let family = Family::uniform_rect(
            DVector::from_vec(vec![0.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        let data = Dataset {
            spec: family.spec(),
            rows: DMatrix::from_element(20, 1, 0.5),
            origin: None,
        };
        assert!(!ks_marginal_test(&data, &family, 0.05).unwrap());
    }

    #[test]
    fn ks_refuses_unusable_inputs() {
        let family = gaussian_1d(0.0, 1.0);
        let tiny = family.sample(7, &mut rng(41)).unwrap();
        assert!(ks_marginal_test(&tiny, &family, 0.05).is_err());

        let data = family.sample(20, &mut rng(42)).unwrap();
        assert!(ks_marginal_test(&data, &family, 0.0).is_err());

        let family2 = gaussian_2d();
        let data2 = family2.sample(20, &mut rng(43)).unwrap();
        assert!(ks_marginal_test(&data2, &family2, 0.05).is_err());

        let discrete = Family::discrete(vec![0.5, 0.5]).unwrap();
        let symbols = discrete.sample(20, &mut rng(44)).unwrap();
        assert!(matches!(
            ks_marginal_test(&symbols, &discrete, 0.05),
            Err(AmpError::Unsupported(_))
        ));
    }
}

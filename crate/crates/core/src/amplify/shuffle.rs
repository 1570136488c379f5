//! Shuffle-based amplification: learn a plug-in distribution on the first
//! half of the sample, draw the extra observations from it, and hide them
//! among the untouched second half with a uniform shuffle.
//!
//! Two granularities are provided: [`shuffle_amplify_general`] shuffles
//! whole rows, and [`shuffle_amplify_product`] shuffles each coordinate
//! independently (valid when the family is a product across coordinates,
//! which buys a factor-d improvement in the bound).
//!
//! The error guarantee rests on the learner's expected chi-squared
//! estimation error `rhat = E[chi2(P_hat, P)]` at the fit size: the
//! amplification error is at most `sqrt((m^2/n) * rhat)` for whole-row
//! shuffles and `sqrt((m^2/n) * sum_j rhat_j)` coordinatewise, with `n`
//! the full original sample size.

use crate::amplify::AmplifyOutcome;
use crate::divergences::BoundReport;
use crate::error::{AmpError, Result};
use crate::families::{
    column_means, cumulative_probs, draw_symbol, symbol_counts, Dataset, FamilyKind, FamilySpec,
};
use crate::numerics::linalg::{sym_sqrt, SymSqrtKind};
use crate::numerics::prng::RngState;
use crate::numerics::samplers::{sample_gamma, sample_std_normal};
use nalgebra::{DMatrix, DVector};

/// Fixed replicate count for Monte Carlo chi-squared guarantees.
const GUARANTEE_MC_REPS: usize = 10_000;
/// Fixed internal seed for Monte Carlo guarantees, so that reported bounds
/// are reproducible across runs and machines.
const GUARANTEE_MC_SEED: u64 = 0x0bf6_93a7_c41d_2e85;

/// A plug-in learner together with its documented expected-chi-squared
/// guarantee. The caller enforces sample splitting: `fit` consumes only
/// the rows it is given.
#[derive(Debug, Clone)]
pub enum Learner {
    /// Empirical distribution of a discrete sample; guarantee `(k-1)/n`.
    EmpiricalDiscrete { alphabet: usize },
    /// Sample-mean plug-in for a Gaussian with known covariance;
    /// per-coordinate guarantee `sqrt(n/(n-2)) - 1` (needs `n >= 3`).
    GaussianMeanPlugin { cov: DMatrix<f64> },
    /// Coordinatewise `[min, max]` maximum-likelihood interval for a
    /// uniform rectangle; per-coordinate guarantee
    /// `(4n-6)/((n-2)(n-3))` (needs `n >= 4`).
    UniformMle,
    /// Rate plug-in `lambda_hat = n / sum(x)` per coordinate; guarantee is
    /// the Monte Carlo mean of the chi-squared error clipped at `n`
    /// (scale-invariant, so one estimate covers every rate).
    ExponentialRatePlugin,
    /// Soft-thresholding of coordinate means at `sqrt(c*log(n)/n)` for an
    /// s-sparse Gaussian mean; guarantee is the Monte Carlo sum of clipped
    /// per-coordinate chi-squared errors at the hardest s-sparse
    /// configuration. Requires `c > 2`.
    SoftThresholdSparse { c: f64 },
    /// Point mass on the known top symbol; guarantee `1/t - 1`, exact.
    TopElementPlugin { top_mass: f64 },
}

impl Learner {
    pub fn empirical_discrete(alphabet: usize) -> Result<Self> {
        if alphabet == 0 {
            return Err(AmpError::validation("alphabet size must be positive"));
        }
        Ok(Learner::EmpiricalDiscrete { alphabet })
    }

    pub fn gaussian_mean_plugin(cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() || cov.nrows() == 0 {
            return Err(AmpError::validation("covariance must be square and nonempty"));
        }
        Ok(Learner::GaussianMeanPlugin { cov })
    }

    pub fn uniform_mle() -> Self {
        Learner::UniformMle
    }

    pub fn exponential_rate_plugin() -> Self {
        Learner::ExponentialRatePlugin
    }

    pub fn soft_threshold_sparse(c: f64) -> Result<Self> {
        if !(c > 2.0) {
            return Err(AmpError::validation(format!(
                "soft-threshold constant must exceed 2, got {c}"
            )));
        }
        Ok(Learner::SoftThresholdSparse { c })
    }

    pub fn top_element_plugin(top_mass: f64) -> Result<Self> {
        if !(top_mass > 0.0 && top_mass <= 0.5) {
            return Err(AmpError::validation(format!(
                "top-element mass must lie in (0, 1/2], got {top_mass}"
            )));
        }
        Ok(Learner::TopElementPlugin { top_mass })
    }

    /// Fit a plug-in distribution to the given rows (the caller passes the
    /// first half of the sample, or a single column of it).
    pub fn fit(&self, rows: &DMatrix<f64>, spec: &FamilySpec) -> Result<Plugin> {
        let (n, d) = (rows.nrows(), rows.ncols());
        if n == 0 {
            return Err(AmpError::validation("cannot fit a learner to zero rows"));
        }
        match self {
            Learner::EmpiricalDiscrete { alphabet } => {
                expect_kinds(spec, &[FamilyKind::Discrete, FamilyKind::TopElementDiscrete])?;
                if spec.alphabet != Some(*alphabet) {
                    return Err(AmpError::validation(format!(
                        "learner alphabet {alphabet} does not match the dataset's {:?}",
                        spec.alphabet
                    )));
                }
                let counts = symbol_counts(rows, *alphabet)?;
                let probs = counts.iter().map(|&c| c as f64 / n as f64).collect();
                Ok(Plugin::Discrete { probs })
            }
            Learner::GaussianMeanPlugin { cov } => {
                expect_kinds(spec, &[FamilyKind::GaussianMean, FamilyKind::SparseGaussian])?;
                if cov.nrows() != d {
                    return Err(AmpError::validation(format!(
                        "covariance is {}x{} but the data has {d} columns",
                        cov.nrows(),
                        cov.ncols()
                    )));
                }
                let cov_root = sym_sqrt(cov, SymSqrtKind::Root)?;
                Ok(Plugin::GaussianMean {
                    mean: column_means(rows),
                    cov_root,
                })
            }
            Learner::UniformMle => {
                expect_kinds(spec, &[FamilyKind::UniformRect])?;
                let mut lo = DVector::from_element(d, f64::INFINITY);
                let mut hi = DVector::from_element(d, f64::NEG_INFINITY);
                for i in 0..n {
                    for j in 0..d {
                        lo[j] = lo[j].min(rows[(i, j)]);
                        hi[j] = hi[j].max(rows[(i, j)]);
                    }
                }
                Ok(Plugin::UniformRect { lo, hi })
            }
            Learner::ExponentialRatePlugin => {
                expect_kinds(spec, &[FamilyKind::ProductExponential])?;
                let mut rates = DVector::zeros(d);
                for j in 0..d {
                    let total: f64 = (0..n).map(|i| rows[(i, j)]).sum();
                    if !(total > 0.0) {
                        return Err(AmpError::validation(format!(
                            "coordinate {j} sums to {total}; exponential data must be positive"
                        )));
                    }
                    rates[j] = n as f64 / total;
                }
                Ok(Plugin::ExponentialRates { rates })
            }
            Learner::SoftThresholdSparse { c } => {
                expect_kinds(spec, &[FamilyKind::SparseGaussian])?;
                let tau = soft_threshold_level(*c, n);
                let means = column_means(rows);
                let mean = means.map(|v| v.signum() * (v.abs() - tau).max(0.0));
                Ok(Plugin::SparseMean { mean })
            }
            Learner::TopElementPlugin { top_mass } => {
                expect_kinds(spec, &[FamilyKind::TopElementDiscrete])?;
                match spec.top_mass {
                    Some(t) if (t - top_mass).abs() <= 1e-12 => {}
                    other => {
                        return Err(AmpError::validation(format!(
                            "learner top mass {top_mass} does not match the dataset's {other:?}"
                        )));
                    }
                }
                Ok(Plugin::TopElement)
            }
        }
    }

    /// The learner's expected-chi-squared guarantee when fit to `n_fit`
    /// rows of data with the given shape. Data-independent: closed form
    /// where one is known, Monte Carlo (fixed internal seed, flagged
    /// `estimated`) for the clipped chi-squared learners.
    pub fn chi2_guarantee(&self, n_fit: usize, spec: &FamilySpec) -> Result<ChiSqGuarantee> {
        if n_fit == 0 {
            return Err(AmpError::validation("fit size must be positive"));
        }
        let nf = n_fit as f64;
        let d = spec.dim;
        match self {
            Learner::EmpiricalDiscrete { alphabet } => Ok(ChiSqGuarantee::exact(
                vec![(*alphabet as f64 - 1.0) / nf],
                "(k-1)/n at the fit size",
            )),
            Learner::GaussianMeanPlugin { .. } => {
                if n_fit < 3 {
                    return Err(AmpError::guarantee_unavailable(format!(
                        "the mean plug-in's chi-squared error is infinite below 3 \
                         fit samples (got {n_fit})"
                    )));
                }
                let r = (nf / (nf - 2.0)).sqrt() - 1.0;
                Ok(ChiSqGuarantee::exact(
                    vec![r; d],
                    "sqrt(n/(n-2)) - 1 per coordinate at the fit size",
                ))
            }
            Learner::UniformMle => {
                if n_fit < 4 {
                    return Err(AmpError::guarantee_unavailable(format!(
                        "the uniform MLE's chi-squared error is infinite below 4 \
                         fit samples (got {n_fit})"
                    )));
                }
                let r = (4.0 * nf - 6.0) / ((nf - 2.0) * (nf - 3.0));
                Ok(ChiSqGuarantee::exact(
                    vec![r; d],
                    "(4n-6)/((n-2)(n-3)) per coordinate at the fit size",
                ))
            }
            Learner::ExponentialRatePlugin => {
                let (value, se) = exponential_clipped_chi2_mc(n_fit);
                Ok(ChiSqGuarantee {
                    per_coordinate: vec![value; d],
                    // One shared Monte Carlo estimate reused for every
                    // coordinate: the errors are fully correlated.
                    sum_stderr: Some(d as f64 * se),
                    estimated: true,
                    formula: "Monte Carlo mean of min(chi2, n) for the rate plug-in \
                              (scale-invariant), per coordinate"
                        .to_string(),
                })
            }
            Learner::SoftThresholdSparse { c } => {
                let s = spec.sparsity.ok_or_else(|| {
                    AmpError::validation("sparse guarantee needs the spec's sparsity level")
                })?;
                if s > d {
                    return Err(AmpError::validation("sparsity exceeds dimension"));
                }
                let tau = soft_threshold_level(*c, n_fit);
                let (r_active, se_active) = soft_threshold_clipped_chi2_mc(tau, tau, n_fit);
                let (r_null, se_null) = soft_threshold_clipped_chi2_mc(0.0, tau, n_fit);
                let mut per_coordinate = vec![r_active; s];
                per_coordinate.extend(std::iter::repeat(r_null).take(d - s));
                let sum_se = ((s as f64 * se_active).powi(2)
                    + ((d - s) as f64 * se_null).powi(2))
                .sqrt();
                Ok(ChiSqGuarantee {
                    per_coordinate,
                    sum_stderr: Some(sum_se),
                    estimated: true,
                    formula: format!(
                        "Monte Carlo sum of clipped chi-squared errors of the \
                         soft-threshold estimator (threshold sqrt({c}*log(n)/n)) at \
                         the hardest s-sparse mean: s coordinates at the threshold, \
                         the rest zero"
                    ),
                })
            }
            Learner::TopElementPlugin { top_mass } => Ok(ChiSqGuarantee::exact(
                vec![1.0 / top_mass - 1.0],
                "1/t - 1 for the point mass on the known top symbol",
            )),
        }
    }
}

fn expect_kinds(spec: &FamilySpec, kinds: &[FamilyKind]) -> Result<()> {
    if kinds.contains(&spec.kind) {
        Ok(())
    } else {
        Err(AmpError::validation(format!(
            "this learner does not handle {:?} data",
            spec.kind
        )))
    }
}

/// The soft-threshold level `sqrt(c * log(n) / n)` at fit size `n`.
fn soft_threshold_level(c: f64, n_fit: usize) -> f64 {
    (c * (n_fit as f64).ln() / n_fit as f64).max(0.0).sqrt()
}

/// Monte Carlo estimate (mean, stderr) of the clipped chi-squared error of
/// the exponential rate plug-in at fit size `n`: with `R = lambda_hat /
/// lambda = n / Gamma(n, 1)`, the chi-squared divergence of Exp(lambda_hat)
/// from Exp(lambda) is `(R-1)^2 / (2R-1)` when `2R > 1` and infinite
/// otherwise; values are clipped at `n` before averaging.
fn exponential_clipped_chi2_mc(n_fit: usize) -> (f64, f64) {
    let mut rng = RngState::new(GUARANTEE_MC_SEED, 1);
    let nf = n_fit as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..GUARANTEE_MC_REPS {
        let g = sample_gamma(&mut rng, nf, 1.0);
        let r = nf / g;
        let chi2 = if 2.0 * r > 1.0 {
            (r - 1.0).powi(2) / (2.0 * r - 1.0)
        } else {
            f64::INFINITY
        };
        let clipped = chi2.min(nf);
        sum += clipped;
        sum_sq += clipped * clipped;
    }
    mc_mean_stderr(sum, sum_sq, GUARANTEE_MC_REPS)
}

/// Monte Carlo estimate (mean, stderr) of the clipped chi-squared error of
/// one soft-thresholded coordinate with true mean `theta`: the raw mean is
/// `theta + Z/sqrt(n)`, the estimate is its soft-thresholding at `tau`, and
/// the per-coordinate chi-squared error `exp((est - theta)^2) - 1` is
/// clipped at `n` before averaging.
fn soft_threshold_clipped_chi2_mc(theta: f64, tau: f64, n_fit: usize) -> (f64, f64) {
    let mut rng = RngState::new(GUARANTEE_MC_SEED, 2);
    let nf = n_fit as f64;
    let scale = 1.0 / nf.sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..GUARANTEE_MC_REPS {
        let raw = theta + scale * sample_std_normal(&mut rng);
        let est = raw.signum() * (raw.abs() - tau).max(0.0);
        let chi2 = ((est - theta).powi(2)).exp_m1();
        let clipped = chi2.min(nf);
        sum += clipped;
        sum_sq += clipped * clipped;
    }
    mc_mean_stderr(sum, sum_sq, GUARANTEE_MC_REPS)
}

fn mc_mean_stderr(sum: f64, sum_sq: f64, reps: usize) -> (f64, f64) {
    let n = reps as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// A fitted plug-in distribution, able to draw whole rows (for whole-row
/// shuffles) or single coordinates (for coordinatewise shuffles).
#[derive(Debug, Clone)]
pub enum Plugin {
    /// Probability vector over 1-based symbols.
    Discrete { probs: Vec<f64> },
    /// N(mean, cov), stored via a symmetric square root of cov.
    GaussianMean { mean: DVector<f64>, cov_root: DMatrix<f64> },
    /// Product of U(lo_j, hi_j) intervals.
    UniformRect { lo: DVector<f64>, hi: DVector<f64> },
    /// Product of Exp(rate_j) laws.
    ExponentialRates { rates: DVector<f64> },
    /// N(mean, I) with a (typically sparse) mean.
    SparseMean { mean: DVector<f64> },
    /// Point mass on symbol 1.
    TopElement,
}

impl Plugin {
    /// Number of data columns a drawn row occupies.
    pub fn data_dim(&self) -> usize {
        match self {
            Plugin::Discrete { .. } | Plugin::TopElement => 1,
            Plugin::GaussianMean { mean, .. } | Plugin::SparseMean { mean } => mean.len(),
            Plugin::UniformRect { lo, .. } => lo.len(),
            Plugin::ExponentialRates { rates } => rates.len(),
        }
    }

    /// Draw one full fake row.
    pub fn draw_row(&self, rng: &mut RngState) -> DVector<f64> {
        match self {
            Plugin::Discrete { probs } => {
                let cumulative = cumulative_probs(probs);
                DVector::from_element(1, draw_symbol(&cumulative, rng) as f64)
            }
            Plugin::GaussianMean { mean, cov_root } => {
                let z = DVector::from_fn(mean.len(), |_, _| sample_std_normal(rng));
                mean + cov_root * z
            }
            Plugin::UniformRect { lo, hi } => {
                DVector::from_fn(lo.len(), |j, _| lo[j] + (hi[j] - lo[j]) * rng.uniform())
            }
            Plugin::ExponentialRates { rates } => {
                DVector::from_fn(rates.len(), |j, _| -rng.uniform().ln() / rates[j])
            }
            Plugin::SparseMean { mean } => {
                DVector::from_fn(mean.len(), |j, _| mean[j] + sample_std_normal(rng))
            }
            Plugin::TopElement => DVector::from_element(1, 1.0),
        }
    }

    /// Draw one value of coordinate `j`. Only valid for plug-ins whose
    /// coordinates are independent (all of them except a correlated
    /// Gaussian, which is rejected).
    pub fn draw_coordinate(&self, j: usize, rng: &mut RngState) -> Result<f64> {
        match self {
            Plugin::Discrete { probs } => {
                if j != 0 {
                    return Err(AmpError::validation("discrete data has one column"));
                }
                let cumulative = cumulative_probs(probs);
                Ok(draw_symbol(&cumulative, rng) as f64)
            }
            Plugin::GaussianMean { mean, cov_root } => {
                for i in 0..mean.len() {
                    if i != j && cov_root[(j, i)].abs() > 1e-12 * cov_root[(j, j)].abs() {
                        return Err(AmpError::validation(
                            "coordinatewise draws need a diagonal covariance",
                        ));
                    }
                }
                Ok(mean[j] + cov_root[(j, j)] * sample_std_normal(rng))
            }
            Plugin::UniformRect { lo, hi } => Ok(lo[j] + (hi[j] - lo[j]) * rng.uniform()),
            Plugin::ExponentialRates { rates } => Ok(-rng.uniform().ln() / rates[j]),
            Plugin::SparseMean { mean } => Ok(mean[j] + sample_std_normal(rng)),
            Plugin::TopElement => {
                if j != 0 {
                    return Err(AmpError::validation("discrete data has one column"));
                }
                Ok(1.0)
            }
        }
    }
}

/// A learner's expected-chi-squared guarantee, one value per independent
/// coordinate of the plug-in (a single value for inherently whole-row
/// plug-ins such as a discrete distribution).
#[derive(Debug, Clone)]
pub struct ChiSqGuarantee {
    pub per_coordinate: Vec<f64>,
    /// Standard error of `sum()` when the values are Monte Carlo estimates.
    pub sum_stderr: Option<f64>,
    /// True when the values are Monte Carlo estimates rather than proven
    /// closed forms.
    pub estimated: bool,
    /// Human-readable formula or estimation recipe.
    pub formula: String,
}

impl ChiSqGuarantee {
    fn exact(per_coordinate: Vec<f64>, formula: &str) -> Self {
        ChiSqGuarantee {
            per_coordinate,
            sum_stderr: None,
            estimated: false,
            formula: formula.to_string(),
        }
    }

    /// Total guarantee for coordinatewise shuffles: the sum over
    /// coordinates of the per-coordinate chi-squared errors.
    pub fn sum(&self) -> f64 {
        self.per_coordinate.iter().sum()
    }

    /// Total guarantee for whole-row shuffles: independent coordinates
    /// multiply as `1 + chi2`, so the row-level error is
    /// `prod_j (1 + r_j) - 1` (equal to `sum()` for one coordinate).
    pub fn row_level(&self) -> f64 {
        self.per_coordinate.iter().map(|r| 1.0 + r).product::<f64>() - 1.0
    }
}

/// Validate the shared preconditions of the two shuffle amplifiers and
/// split the sample: returns (n, d, first half, second half).
fn split_halves<'a>(
    data: &'a Dataset,
    op: &str,
) -> Result<(usize, usize, nalgebra::DMatrixView<'a, f64>, nalgebra::DMatrixView<'a, f64>)> {
    let (n, d) = (data.rows.nrows(), data.rows.ncols());
    if n == 0 {
        return Err(AmpError::validation(format!("{op}: dataset is empty")));
    }
    if n % 2 != 0 {
        return Err(AmpError::validation(format!(
            "{op}: sample splitting needs an even sample size, got n = {n} \
             (odd sizes are rejected rather than silently floored)"
        )));
    }
    let half = n / 2;
    Ok((
        n,
        d,
        data.rows.view((0, 0), (half, d)),
        data.rows.view((half, 0), (half, d)),
    ))
}

/// Assemble the bound `min(1, sqrt((m^2/n) * total))` with delta-method
/// standard error when the guarantee is Monte Carlo.
fn shuffle_bound(
    total: f64,
    total_stderr: Option<f64>,
    n: usize,
    m: usize,
    formula: &str,
    guarantee: &ChiSqGuarantee,
) -> BoundReport {
    let factor = (m as f64).powi(2) / n as f64;
    let value = (factor * total).sqrt();
    let mut report = BoundReport::exact(value, formula);
    if let Some(se_total) = total_stderr {
        if value > 0.0 {
            report.stderr = Some(factor * se_total / (2.0 * value));
        }
        report = report.with_note(format!(
            "chi-squared guarantee is a Monte Carlo estimate: {}",
            guarantee.formula
        ));
    } else {
        report = report.with_note(format!("chi-squared guarantee: {}", guarantee.formula));
    }
    report
}

/// The bound reported when the learner's chi-squared guarantee is
/// unavailable at this fit size: the trivial value 1.
fn trivial_bound(formula: &str, reason: &str) -> BoundReport {
    BoundReport::exact(1.0, formula).with_note(format!(
        "chi-squared guarantee unavailable, reporting the trivial bound: {reason}"
    ))
}

/// Amplify by learning on the first half and hiding `m` plug-in rows in a
/// whole-row shuffle of the second half.
///
/// Output layout: rows `1..n/2` are the input's first half bitwise; the
/// remaining `n/2 + m` rows are a uniformly random interleaving of the
/// input's second half with `m` fresh plug-in draws.
/// Bound: `min(1, sqrt((m^2/n) * rhat))` with `rhat` the learner's
/// whole-row guarantee at fit size `n/2` and `n` the original sample size.
/// If the guarantee is unavailable at `n/2` the amplifier still runs and
/// the trivial bound 1 is reported.
pub fn shuffle_amplify_general(
    data: &Dataset,
    learner: &Learner,
    m: usize,
    rng: &mut RngState,
) -> Result<AmplifyOutcome> {
    let (n, d, first, second) = split_halves(data, "shuffle_amplify_general")?;
    let half = n / 2;
    let plugin = learner.fit(&first.into_owned(), &data.spec)?;
    if plugin.data_dim() != d {
        return Err(AmpError::validation(
            "plug-in dimension does not match the data",
        ));
    }

    // Pool = second half ++ m fakes, then one uniform whole-row shuffle.
    let mut pool: Vec<DVector<f64>> = (0..half).map(|i| second.row(i).transpose()).collect();
    for _ in 0..m {
        pool.push(plugin.draw_row(rng));
    }
    rng.shuffle(&mut pool);

    let mut rows = DMatrix::zeros(n + m, d);
    rows.view_mut((0, 0), (half, d)).copy_from(&first);
    for (i, row) in pool.iter().enumerate() {
        rows.row_mut(half + i).copy_from(&row.transpose());
    }

    let formula = "sqrt(m^2/n * rhat)";
    let bound = if m == 0 {
        BoundReport::exact(0.0, formula).with_note("m = 0: no fake rows were introduced")
    } else {
        match learner.chi2_guarantee(half, &data.spec) {
            Ok(guarantee) => {
                // Whole-row stderr: only single-coordinate Monte Carlo
                // guarantees report one here (the product combination of a
                // multi-coordinate MC guarantee is handled conservatively
                // through the sum, which dominates it).
                let se = guarantee.sum_stderr;
                shuffle_bound(guarantee.row_level(), se, n, m, formula, &guarantee)
            }
            Err(AmpError::GuaranteeUnavailable(reason)) => trivial_bound(formula, &reason),
            Err(other) => return Err(other),
        }
    };

    Ok(AmplifyOutcome {
        data: Dataset {
            spec: data.spec.clone(),
            rows,
            origin: Some((rng.seed(), rng.stream())),
        },
        method: "shuffle",
        bound,
        target: None,
    })
}

/// Amplify a product family by learning per coordinate and shuffling each
/// coordinate's pool independently.
///
/// `learners` holds either one learner per coordinate or a single learner
/// applied to all coordinates jointly (required for learners whose
/// guarantee couples coordinates, such as the sparse soft-threshold).
/// Bound: `min(1, sqrt((m^2/n) * sum_j rhat_j))`.
pub fn shuffle_amplify_product(
    data: &Dataset,
    learners: &[Learner],
    m: usize,
    rng: &mut RngState,
) -> Result<AmplifyOutcome> {
    let (n, d, first, second) = split_halves(data, "shuffle_amplify_product")?;
    let half = n / 2;
    if learners.is_empty() || (learners.len() != d && learners.len() != 1) {
        return Err(AmpError::validation(format!(
            "got {} learners for {d} coordinates; pass one per coordinate \
             (or a single learner to use jointly for all of them)",
            learners.len()
        )));
    }
    let broadcast = learners.len() == 1;

    // Fit: one joint plug-in over all coordinates, or one per column.
    let first_owned = first.into_owned();
    let plugins: Vec<Plugin> = if broadcast {
        vec![learners[0].fit(&first_owned, &data.spec)?]
    } else {
        (0..d)
            .map(|j| {
                let column = first_owned.column(j).into_owned();
                let col_matrix = DMatrix::from_column_slice(half, 1, column.as_slice());
                learners[j].fit(&col_matrix, &column_spec(&data.spec))
            })
            .collect::<Result<_>>()?
    };

    // Independent pools and shuffles per coordinate, each in its own
    // substream so coordinates could be processed in parallel.
    let session_tag = rng.next_u64();
    let session = rng.fork(session_tag);
    let mut rows = DMatrix::zeros(n + m, d);
    rows.view_mut((0, 0), (half, d)).copy_from(&first_owned);
    for j in 0..d {
        let mut sub = session.fork(j as u64);
        let mut pool: Vec<f64> = (0..half).map(|i| second[(i, j)]).collect();
        let (plugin, coordinate) = if broadcast {
            (&plugins[0], j)
        } else {
            (&plugins[j], 0)
        };
        for _ in 0..m {
            pool.push(plugin.draw_coordinate(coordinate, &mut sub)?);
        }
        sub.shuffle(&mut pool);
        for (i, &v) in pool.iter().enumerate() {
            rows[(half + i, j)] = v;
        }
    }

    let formula = "sqrt(m^2/n * sum_j rhat_j)";
    let bound = if m == 0 {
        BoundReport::exact(0.0, formula).with_note("m = 0: no fake values were introduced")
    } else {
        let mut total = 0.0;
        let mut stderr_sq = 0.0;
        let mut any_stderr = false;
        let mut estimated_formula = None;
        let mut unavailable = None;
        // Broadcast: one guarantee over the whole spec. Per-coordinate:
        // one guarantee per learner over a one-column spec.
        let specs: Vec<FamilySpec> = if broadcast {
            vec![data.spec.clone()]
        } else {
            vec![column_spec(&data.spec); d]
        };
        for (learner, spec) in learners.iter().zip(specs.iter()) {
            match learner.chi2_guarantee(half, spec) {
                Ok(guarantee) => {
                    total += guarantee.sum();
                    if let Some(se) = guarantee.sum_stderr {
                        stderr_sq += se * se;
                        any_stderr = true;
                    }
                    if guarantee.estimated {
                        estimated_formula = Some(guarantee.formula.clone());
                    }
                }
                Err(AmpError::GuaranteeUnavailable(reason)) => {
                    unavailable = Some(reason);
                    break;
                }
                Err(other) => return Err(other),
            }
        }
        match unavailable {
            Some(reason) => trivial_bound(formula, &reason),
            None => {
                let factor = (m as f64).powi(2) / n as f64;
                let value = (factor * total).sqrt();
                let mut report = BoundReport::exact(value, formula);
                if any_stderr && value > 0.0 {
                    report.stderr = Some(factor * stderr_sq.sqrt() / (2.0 * value));
                }
                if let Some(f) = estimated_formula {
                    report =
                        report.with_note(format!("chi-squared guarantee is a Monte Carlo estimate: {f}"));
                }
                report
            }
        }
    };

    Ok(AmplifyOutcome {
        data: Dataset {
            spec: data.spec.clone(),
            rows,
            origin: Some((rng.seed(), rng.stream())),
        },
        method: "shuffle_product",
        bound,
        target: None,
    })
}

/// One-dimensional spec for a single coordinate of a product family.
fn column_spec(spec: &FamilySpec) -> FamilySpec {
    let mut one = spec.clone();
    one.dim = 1;
    one
}

/// The bound a shuffle amplifier would report at sample size `n` with `m`
/// appended draws, computed without data.
///
/// The shuffle amplifiers' bounds depend on the sample only through its
/// size: the learner's chi-squared guarantee is evaluated at the fit size
/// `n/2` and pushed through `sqrt((m^2/n) * total)`. This function
/// reproduces that computation so the bound can be quoted up front.
/// `per_coordinate = false` takes exactly one learner and reports the
/// [`shuffle_amplify_general`] bound (`total` is the whole-row guarantee);
/// `per_coordinate = true` takes one learner per coordinate, or a single
/// learner applied jointly, and reports the [`shuffle_amplify_product`]
/// bound (`total` is the summed guarantee). An unavailable guarantee
/// yields the trivial bound 1 with a note, exactly as the amplifiers do.
pub fn shuffle_bound_preview(
    learners: &[Learner],
    spec: &FamilySpec,
    n: usize,
    m: usize,
    per_coordinate: bool,
) -> Result<BoundReport> {
    if n == 0 || n % 2 != 0 {
        return Err(AmpError::validation(format!(
            "shuffle_bound_preview: sample splitting needs an even positive \
             sample size, got n = {n}"
        )));
    }
    let half = n / 2;
    if !per_coordinate {
        if learners.len() != 1 {
            return Err(AmpError::validation(format!(
                "whole-row preview takes exactly one learner, got {}",
                learners.len()
            )));
        }
        let formula = "sqrt(m^2/n * rhat)";
        if m == 0 {
            return Ok(BoundReport::exact(0.0, formula)
                .with_note("m = 0: no fake rows would be introduced"));
        }
        return match learners[0].chi2_guarantee(half, spec) {
            Ok(guarantee) => Ok(shuffle_bound(
                guarantee.row_level(),
                guarantee.sum_stderr,
                n,
                m,
                formula,
                &guarantee,
            )),
            Err(AmpError::GuaranteeUnavailable(reason)) => Ok(trivial_bound(formula, &reason)),
            Err(other) => Err(other),
        };
    }

    let d = spec.dim;
    if learners.is_empty() || (learners.len() != d && learners.len() != 1) {
        return Err(AmpError::validation(format!(
            "got {} learners for {d} coordinates; pass one per coordinate \
             (or a single learner to use jointly for all of them)",
            learners.len()
        )));
    }
    let broadcast = learners.len() == 1;
    let formula = "sqrt(m^2/n * sum_j rhat_j)";
    if m == 0 {
        return Ok(BoundReport::exact(0.0, formula)
            .with_note("m = 0: no fake values would be introduced"));
    }
    let specs: Vec<FamilySpec> = if broadcast {
        vec![spec.clone()]
    } else {
        vec![column_spec(spec); d]
    };
    let mut total = 0.0;
    let mut stderr_sq = 0.0;
    let mut any_stderr = false;
    let mut estimated_formula = None;
    for (learner, one) in learners.iter().zip(specs.iter()) {
        match learner.chi2_guarantee(half, one) {
            Ok(guarantee) => {
                total += guarantee.sum();
                if let Some(se) = guarantee.sum_stderr {
                    stderr_sq += se * se;
                    any_stderr = true;
                }
                if guarantee.estimated {
                    estimated_formula = Some(guarantee.formula.clone());
                }
            }
            Err(AmpError::GuaranteeUnavailable(reason)) => {
                return Ok(trivial_bound(formula, &reason));
            }
            Err(other) => return Err(other),
        }
    }
    let factor = (m as f64).powi(2) / n as f64;
    let value = (factor * total).sqrt();
    let mut report = BoundReport::exact(value, formula);
    if any_stderr && value > 0.0 {
        report.stderr = Some(factor * stderr_sq.sqrt() / (2.0 * value));
    }
    if let Some(f) = estimated_formula {
        report = report.with_note(format!(
            "chi-squared guarantee is a Monte Carlo estimate: {f}"
        ));
    }
    Ok(report)
}

/// The chi-squared mixture bound for hiding `m` plug-in draws among `n`
/// genuine draws with a uniform shuffle: if the plug-in's chi-squared
/// divergence from the truth is `chi2`, the shuffled pool's chi-squared
/// divergence from `n + m` i.i.d. draws is at most
/// `(1 + (m/(n+m)) * chi2)^m - 1`.
///
/// `n` counts the genuine draws in the pool (the second half of the
/// sample, in the amplifiers above). `n = 0` gives the no-shuffle value
/// `(1 + chi2)^m - 1`.
pub fn shuffle_chi2_bound(chi2: f64, n: usize, m: usize) -> Result<f64> {
    if !(chi2 >= 0.0) {
        return Err(AmpError::validation(format!(
            "chi-squared divergence must be nonnegative, got {chi2}"
        )));
    }
    let rate = m as f64 / (n + m) as f64 * chi2;
    Ok((m as f64 * rate.ln_1p()).exp_m1())
}

//! Distribution families: parameter containers, sampling, sufficient
//! statistics, observation densities, and sufficient-statistic densities.
//!
//! Conventions used throughout the crate:
//!
//! * a dataset is an `n x d` matrix whose rows are observations;
//! * `Discrete` and `TopElementDiscrete` datasets have a single column of
//!   symbols encoded as the floats `1.0 ..= k` (validated on construction);
//! * `PoissonizedDiscrete` datasets have one column per alphabet symbol and
//!   each entry of row `i` is an independent Poisson count;
//! * sufficient statistics are stored in their *per-sample normalisation*
//!   (means, scatter divided by `n`, sample covariance divided by `n - 1`)
//!   except for count families, where raw coordinate totals are kept exact.

use crate::error::{AmpError, Result};
use crate::numerics::linalg::{sym_sqrt, SymSqrtKind};
use crate::numerics::prng::RngState;
use crate::numerics::samplers::{sample_poisson, sample_std_normal};
use crate::numerics::special::{log_gamma, multivariate_log_gamma};
use nalgebra::{DMatrix, DVector};

/// ln(2*pi).
const LN_TWO_PI: f64 = 1.837_877_066_409_345_5;
/// Tolerance for probability vectors summing to one.
const PROB_SUM_TOL: f64 = 1e-12;

/// Structural identity of a family, without parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// Gaussian with unknown mean and known covariance.
    GaussianMean,
    /// Centered Gaussian with unknown covariance.
    GaussianCov,
    /// Gaussian with unknown mean and unknown covariance.
    GaussianMeanCov,
    /// Product of coordinate-wise exponentials with unknown rates.
    ProductExponential,
    /// Product of coordinate-wise uniforms on unknown intervals.
    UniformRect,
    /// Product of coordinate-wise Poissons with unknown means.
    ProductPoisson,
    /// Distribution over a finite alphabet.
    Discrete,
    /// Finite-alphabet distribution observed through per-symbol Poisson
    /// counts (one column per symbol, Poissonized sample size).
    PoissonizedDiscrete,
    /// Gaussian with identity covariance and a sparse mean vector.
    SparseGaussian,
    /// Finite-alphabet distribution whose first symbol has known maximal mass.
    TopElementDiscrete,
    /// Centered Gaussian whose covariance is a known-rank projector.
    LowRankCov,
}

/// Structural description of a family: kind, dataset width, and the
/// shape attributes that are part of the model class rather than the
/// unknown parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    /// Number of dataset columns.
    pub dim: usize,
    /// Alphabet size for symbol-valued families.
    pub alphabet: Option<usize>,
    /// Covariance rank for `LowRankCov`.
    pub rank: Option<usize>,
    /// Maximum number of nonzero mean coordinates for `SparseGaussian`.
    pub sparsity: Option<usize>,
    /// Known mass of the first symbol for `TopElementDiscrete`.
    pub top_mass: Option<f64>,
}

impl FamilySpec {
    fn plain(kind: FamilyKind, dim: usize) -> Self {
        FamilySpec {
            kind,
            dim,
            alphabet: None,
            rank: None,
            sparsity: None,
            top_mass: None,
        }
    }
}

/// A fully parameterized distribution.
#[derive(Debug, Clone)]
pub enum Family {
    GaussianMean { mean: DVector<f64>, cov: DMatrix<f64> },
    GaussianCov { cov: DMatrix<f64> },
    GaussianMeanCov { mean: DVector<f64>, cov: DMatrix<f64> },
    ProductExponential { rates: DVector<f64> },
    UniformRect { lo: DVector<f64>, hi: DVector<f64> },
    ProductPoisson { rates: DVector<f64> },
    Discrete { probs: Vec<f64> },
    PoissonizedDiscrete { probs: Vec<f64> },
    SparseGaussian { mean: DVector<f64>, sparsity: usize },
    TopElementDiscrete { probs: Vec<f64>, top_mass: f64 },
    LowRankCov { frame: DMatrix<f64> },
}

/// A dataset: observation rows plus the structural spec they belong to.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: FamilySpec,
    pub rows: DMatrix<f64>,
    /// `(seed, stream)` of the generator that produced the rows, when sampled.
    pub origin: Option<(u64, u64)>,
}

/// Sufficient statistic values, in the normalisations described in the
/// module docs.
#[derive(Debug, Clone, PartialEq)]
pub enum SufficientStat {
    /// Coordinate means (Gaussian location families).
    Mean(DVector<f64>),
    /// Raw second-moment matrix divided by `n` (centered Gaussian).
    ScatterRaw(DMatrix<f64>),
    /// Coordinate means and sample covariance (centered scatter / (n-1)).
    MeanAndCov { mean: DVector<f64>, cov: DMatrix<f64> },
    /// Coordinate means (exponential rates).
    CoordMeans(DVector<f64>),
    /// Raw coordinate totals, exact integers (count families).
    CoordSums(DVector<f64>),
    /// Coordinate-wise minima and maxima (uniform rectangles).
    MinMax { lo: DVector<f64>, hi: DVector<f64> },
    /// Symbol occurrence counts over the alphabet `1 ..= k`.
    Counts(Vec<u64>),
}

fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(AmpError::validation("probability vector is empty"));
    }
    if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(AmpError::validation(
            "probability vector has negative or non-finite entries",
        ));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(AmpError::validation(format!(
            "probability vector sums to {total}, not 1"
        )));
    }
    Ok(())
}

fn validate_cov(cov: &DMatrix<f64>, dim: usize) -> Result<()> {
    if cov.nrows() != dim || cov.ncols() != dim {
        return Err(AmpError::validation(format!(
            "covariance must be {dim}x{dim}, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    // sym_sqrt validates symmetry and positive semidefiniteness.
    sym_sqrt(cov, SymSqrtKind::Root).map(|_| ())
}

fn validate_positive(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(AmpError::validation(format!("{what} vector is empty")));
    }
    if v.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(AmpError::validation(format!(
            "{what} entries must be positive and finite"
        )));
    }
    Ok(())
}

impl Family {
    pub fn gaussian_mean(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        validate_cov(&cov, mean.len())?;
        Ok(Family::GaussianMean { mean, cov })
    }

    pub fn gaussian_cov(cov: DMatrix<f64>) -> Result<Self> {
        validate_cov(&cov, cov.nrows())?;
        Ok(Family::GaussianCov { cov })
    }

    pub fn gaussian_mean_cov(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        validate_cov(&cov, mean.len())?;
        Ok(Family::GaussianMeanCov { mean, cov })
    }

    pub fn product_exponential(rates: DVector<f64>) -> Result<Self> {
        validate_positive(&rates, "rate")?;
        Ok(Family::ProductExponential { rates })
    }

    pub fn uniform_rect(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(AmpError::validation(
                "uniform rectangle endpoints must be nonempty and equal length",
            ));
        }
        for j in 0..lo.len() {
            if !(hi[j] - lo[j] > 0.0) || !lo[j].is_finite() || !hi[j].is_finite() {
                return Err(AmpError::validation(format!(
                    "uniform rectangle must have positive width in every coordinate \
                     (coordinate {j}: [{}, {}])",
                    lo[j], hi[j]
                )));
            }
        }
        Ok(Family::UniformRect { lo, hi })
    }

    pub fn product_poisson(rates: DVector<f64>) -> Result<Self> {
        validate_positive(&rates, "rate")?;
        Ok(Family::ProductPoisson { rates })
    }

    pub fn discrete(probs: Vec<f64>) -> Result<Self> {
        validate_probs(&probs)?;
        Ok(Family::Discrete { probs })
    }

    pub fn poissonized_discrete(probs: Vec<f64>) -> Result<Self> {
        validate_probs(&probs)?;
        Ok(Family::PoissonizedDiscrete { probs })
    }

    pub fn sparse_gaussian(mean: DVector<f64>, sparsity: usize) -> Result<Self> {
        let d = mean.len();
        if sparsity == 0 || sparsity > d {
            return Err(AmpError::validation(format!(
                "sparsity must lie in 1..={d}, got {sparsity}"
            )));
        }
        let nonzeros = mean.iter().filter(|&&x| x != 0.0).count();
        if nonzeros > sparsity {
            return Err(AmpError::validation(format!(
                "mean has {nonzeros} nonzero coordinates, exceeding sparsity {sparsity}"
            )));
        }
        Ok(Family::SparseGaussian { mean, sparsity })
    }

    pub fn top_element_discrete(probs: Vec<f64>, top_mass: f64) -> Result<Self> {
        validate_probs(&probs)?;
        if !(top_mass > 0.0 && top_mass <= 0.5) {
            return Err(AmpError::validation(format!(
                "top-element mass must lie in (0, 1/2], got {top_mass}"
            )));
        }
        if (probs[0] - top_mass).abs() > PROB_SUM_TOL {
            return Err(AmpError::validation(format!(
                "first symbol must carry exactly the declared top mass {top_mass}, got {}",
                probs[0]
            )));
        }
        if probs.iter().skip(1).any(|&p| p > top_mass + PROB_SUM_TOL) {
            return Err(AmpError::validation(
                "no symbol may exceed the declared top mass",
            ));
        }
        Ok(Family::TopElementDiscrete { probs, top_mass })
    }

    pub fn low_rank_cov(frame: DMatrix<f64>) -> Result<Self> {
        let (p, d) = (frame.nrows(), frame.ncols());
        if d == 0 || d >= p {
            return Err(AmpError::validation(format!(
                "low-rank frame must be p x d with 1 <= d < p, got {p}x{d}"
            )));
        }
        let gram = frame.transpose() * &frame;
        let err = (&gram - DMatrix::identity(d, d))
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        if err > 1e-10 {
            return Err(AmpError::validation(format!(
                "frame columns must be orthonormal (max |U^T U - I| = {err:.3e})"
            )));
        }
        Ok(Family::LowRankCov { frame })
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::GaussianMean { .. } => FamilyKind::GaussianMean,
            Family::GaussianCov { .. } => FamilyKind::GaussianCov,
            Family::GaussianMeanCov { .. } => FamilyKind::GaussianMeanCov,
            Family::ProductExponential { .. } => FamilyKind::ProductExponential,
            Family::UniformRect { .. } => FamilyKind::UniformRect,
            Family::ProductPoisson { .. } => FamilyKind::ProductPoisson,
            Family::Discrete { .. } => FamilyKind::Discrete,
            Family::PoissonizedDiscrete { .. } => FamilyKind::PoissonizedDiscrete,
            Family::SparseGaussian { .. } => FamilyKind::SparseGaussian,
            Family::TopElementDiscrete { .. } => FamilyKind::TopElementDiscrete,
            Family::LowRankCov { .. } => FamilyKind::LowRankCov,
        }
    }

    /// Number of dataset columns this family's observations occupy.
    pub fn data_dim(&self) -> usize {
        match self {
            Family::GaussianMean { mean, .. } | Family::GaussianMeanCov { mean, .. } => mean.len(),
            Family::GaussianCov { cov } => cov.nrows(),
            Family::ProductExponential { rates } | Family::ProductPoisson { rates } => rates.len(),
            Family::UniformRect { lo, .. } => lo.len(),
            Family::Discrete { .. } | Family::TopElementDiscrete { .. } => 1,
            Family::PoissonizedDiscrete { probs } => probs.len(),
            Family::SparseGaussian { mean, .. } => mean.len(),
            Family::LowRankCov { frame } => frame.nrows(),
        }
    }

    /// The structural spec of this family.
    pub fn spec(&self) -> FamilySpec {
        let mut spec = FamilySpec::plain(self.kind(), self.data_dim());
        match self {
            Family::Discrete { probs } => spec.alphabet = Some(probs.len()),
            Family::PoissonizedDiscrete { probs } => spec.alphabet = Some(probs.len()),
            Family::TopElementDiscrete { probs, top_mass } => {
                spec.alphabet = Some(probs.len());
                spec.top_mass = Some(*top_mass);
            }
            Family::SparseGaussian { sparsity, .. } => spec.sparsity = Some(*sparsity),
            Family::LowRankCov { frame } => spec.rank = Some(frame.ncols()),
            _ => {}
        }
        spec
    }

    /// Draw `n` i.i.d. observations.
    pub fn sample(&self, n: usize, rng: &mut RngState) -> Result<Dataset> {
        let d = self.data_dim();
        let mut rows = DMatrix::zeros(n, d);
        match self {
            Family::GaussianMean { mean, cov } | Family::GaussianMeanCov { mean, cov } => {
                let root = sym_sqrt(cov, SymSqrtKind::Root)?;
                let mut z = DVector::zeros(d);
                for i in 0..n {
                    for v in z.iter_mut() {
                        *v = sample_std_normal(rng);
                    }
                    let x = mean + &root * &z;
                    rows.row_mut(i).copy_from(&x.transpose());
                }
            }
            Family::GaussianCov { cov } => {
                let root = sym_sqrt(cov, SymSqrtKind::Root)?;
                let mut z = DVector::zeros(d);
                for i in 0..n {
                    for v in z.iter_mut() {
                        *v = sample_std_normal(rng);
                    }
                    let x = &root * &z;
                    rows.row_mut(i).copy_from(&x.transpose());
                }
            }
            Family::ProductExponential { rates } => {
                for i in 0..n {
                    for j in 0..d {
                        rows[(i, j)] = -rng.uniform().ln() / rates[j];
                    }
                }
            }
            Family::UniformRect { lo, hi } => {
                for i in 0..n {
                    for j in 0..d {
                        rows[(i, j)] = lo[j] + rng.uniform() * (hi[j] - lo[j]);
                    }
                }
            }
            Family::ProductPoisson { rates } => {
                for i in 0..n {
                    for j in 0..d {
                        rows[(i, j)] = sample_poisson(rng, rates[j]) as f64;
                    }
                }
            }
            Family::Discrete { probs } | Family::TopElementDiscrete { probs, .. } => {
                let cumulative = cumulative_probs(probs);
                for i in 0..n {
                    rows[(i, 0)] = draw_symbol(&cumulative, rng) as f64;
                }
            }
            Family::PoissonizedDiscrete { probs } => {
                for i in 0..n {
                    for j in 0..d {
                        rows[(i, j)] = sample_poisson(rng, probs[j]) as f64;
                    }
                }
            }
            Family::SparseGaussian { mean, .. } => {
                for i in 0..n {
                    for j in 0..d {
                        rows[(i, j)] = mean[j] + sample_std_normal(rng);
                    }
                }
            }
            Family::LowRankCov { frame } => {
                let r = frame.ncols();
                let mut z = DVector::zeros(r);
                for i in 0..n {
                    for v in z.iter_mut() {
                        *v = sample_std_normal(rng);
                    }
                    let x = frame * &z;
                    rows.row_mut(i).copy_from(&x.transpose());
                }
            }
        }
        Ok(Dataset {
            spec: self.spec(),
            rows,
            origin: Some((rng.seed(), rng.stream())),
        })
    }

    /// Log density of a single observation row (natural log; minus infinity
    /// off the support). Families whose observation law has no Lebesgue
    /// density on the full space return an error.
    pub fn log_density(&self, row: &DVector<f64>) -> Result<f64> {
        let d = self.data_dim();
        if row.len() != d {
            return Err(AmpError::validation(format!(
                "observation has dimension {}, family expects {d}",
                row.len()
            )));
        }
        match self {
            Family::GaussianMean { mean, cov } | Family::GaussianMeanCov { mean, cov } => {
                gaussian_log_density(row, mean, cov)
            }
            Family::GaussianCov { cov } => {
                gaussian_log_density(row, &DVector::zeros(d), cov)
            }
            Family::ProductExponential { rates } => {
                let mut total = 0.0;
                for j in 0..d {
                    if row[j] < 0.0 {
                        return Ok(f64::NEG_INFINITY);
                    }
                    total += rates[j].ln() - rates[j] * row[j];
                }
                Ok(total)
            }
            Family::UniformRect { lo, hi } => {
                let mut total = 0.0;
                for j in 0..d {
                    if row[j] < lo[j] || row[j] > hi[j] {
                        return Ok(f64::NEG_INFINITY);
                    }
                    total -= (hi[j] - lo[j]).ln();
                }
                Ok(total)
            }
            Family::ProductPoisson { rates } => {
                let mut total = 0.0;
                for j in 0..d {
                    total += poisson_log_pmf(row[j], rates[j])?;
                }
                Ok(total)
            }
            Family::Discrete { probs } | Family::TopElementDiscrete { probs, .. } => {
                let symbol = symbol_index(row[0], probs.len())?;
                Ok(probs[symbol].ln())
            }
            Family::PoissonizedDiscrete { probs } => {
                let mut total = 0.0;
                for j in 0..d {
                    total += poisson_log_pmf(row[j], probs[j])?;
                }
                Ok(total)
            }
            Family::SparseGaussian { mean, .. } => {
                let mut total = -0.5 * d as f64 * LN_TWO_PI;
                for j in 0..d {
                    let diff = row[j] - mean[j];
                    total -= 0.5 * diff * diff;
                }
                Ok(total)
            }
            Family::LowRankCov { .. } => Err(AmpError::unsupported(
                "rank-deficient Gaussian has no density with respect to Lebesgue \
                 measure on the ambient space",
            )),
        }
    }

    /// Log density (or log pmf) of the sufficient statistic of an i.i.d.
    /// sample of size `n` under this family, with respect to the natural
    /// dominating measure. Normalizing constants are exact, so ratios
    /// across different sample sizes are meaningful.
    pub fn log_density_suffstat(&self, stat: &SufficientStat, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(AmpError::validation("sample size must be positive"));
        }
        let nf = n as f64;
        match (self, stat) {
            (Family::GaussianMean { mean, cov }, SufficientStat::Mean(t)) => {
                let scaled = cov / nf;
                gaussian_log_density(t, mean, &scaled)
            }
            (Family::SparseGaussian { mean, .. }, SufficientStat::Mean(t)) => {
                let scaled = DMatrix::identity(mean.len(), mean.len()) / nf;
                gaussian_log_density(t, mean, &scaled)
            }
            (Family::GaussianCov { cov }, SufficientStat::ScatterRaw(t)) => {
                // n * T ~ Wishart(n, cov); add the scaling Jacobian n^{d(d+1)/2}.
                let d = cov.nrows();
                let w = t * nf;
                let logdens = wishart_log_density(&w, nf, cov)?;
                Ok(logdens + (d * (d + 1)) as f64 / 2.0 * nf.ln())
            }
            (Family::GaussianMeanCov { mean, cov }, SufficientStat::MeanAndCov { mean: t, cov: s }) => {
                let d = cov.nrows();
                if n < 2 {
                    return Err(AmpError::validation(
                        "mean-and-covariance statistic needs n >= 2",
                    ));
                }
                let scaled = cov / nf;
                let mean_part = gaussian_log_density(t, mean, &scaled)?;
                let w = s * (nf - 1.0);
                let cov_part = wishart_log_density(&w, nf - 1.0, cov)?
                    + (d * (d + 1)) as f64 / 2.0 * (nf - 1.0).ln();
                Ok(mean_part + cov_part)
            }
            (Family::ProductExponential { rates }, SufficientStat::CoordMeans(t)) => {
                // n * T_j ~ Gamma(n, rate_j); add the scaling Jacobian n per coord.
                let mut total = 0.0;
                for j in 0..rates.len() {
                    let s = nf * t[j];
                    if s <= 0.0 {
                        return Ok(f64::NEG_INFINITY);
                    }
                    total += nf * rates[j].ln() - log_gamma(nf) + (nf - 1.0) * s.ln()
                        - rates[j] * s
                        + nf.ln();
                }
                Ok(total)
            }
            (Family::UniformRect { lo, hi }, SufficientStat::MinMax { lo: u, hi: v }) => {
                if n < 2 {
                    return Err(AmpError::validation(
                        "min-max statistic density needs n >= 2",
                    ));
                }
                let mut total = 0.0;
                for j in 0..lo.len() {
                    if u[j] < lo[j] || v[j] > hi[j] || u[j] > v[j] {
                        return Ok(f64::NEG_INFINITY);
                    }
                    let width = hi[j] - lo[j];
                    total += nf.ln()
                        + (nf - 1.0).ln()
                        + (nf - 2.0) * (v[j] - u[j]).ln()
                        - nf * width.ln();
                }
                Ok(total)
            }
            (Family::ProductPoisson { rates }, SufficientStat::CoordSums(t)) => {
                let mut total = 0.0;
                for j in 0..rates.len() {
                    total += poisson_log_pmf(t[j], nf * rates[j])?;
                }
                Ok(total)
            }
            (Family::PoissonizedDiscrete { probs }, SufficientStat::CoordSums(t)) => {
                let mut total = 0.0;
                for j in 0..probs.len() {
                    total += poisson_log_pmf(t[j], nf * probs[j])?;
                }
                Ok(total)
            }
            (Family::Discrete { probs }, SufficientStat::Counts(counts))
            | (Family::TopElementDiscrete { probs, .. }, SufficientStat::Counts(counts)) => {
                if counts.len() != probs.len() {
                    return Err(AmpError::validation("count vector does not match alphabet"));
                }
                let total_count: u64 = counts.iter().sum();
                if total_count != n as u64 {
                    return Err(AmpError::validation(format!(
                        "counts sum to {total_count}, expected n = {n}"
                    )));
                }
                let mut logpmf = log_gamma(nf + 1.0);
                for (j, &c) in counts.iter().enumerate() {
                    logpmf -= log_gamma(c as f64 + 1.0);
                    if c > 0 {
                        if probs[j] == 0.0 {
                            return Ok(f64::NEG_INFINITY);
                        }
                        logpmf += c as f64 * probs[j].ln();
                    }
                }
                Ok(logpmf)
            }
            (Family::LowRankCov { .. }, _) => Err(AmpError::unsupported(
                "rank-deficient scatter matrices have no density on the symmetric matrices",
            )),
            _ => Err(AmpError::validation(
                "sufficient statistic value does not match this family",
            )),
        }
    }
}

/// Cumulative probabilities for symbol drawing.
pub(crate) fn cumulative_probs(probs: &[f64]) -> Vec<f64> {
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cumulative.push(acc);
    }
    cumulative
}

/// Draw a 1-based symbol by inverse CDF over the cumulative vector.
pub(crate) fn draw_symbol(cumulative: &[f64], rng: &mut RngState) -> usize {
    let u = rng.uniform();
    let idx = cumulative.partition_point(|&c| c < u);
    idx.min(cumulative.len() - 1) + 1
}

/// Validate and convert a float-encoded 1-based symbol.
fn symbol_index(value: f64, alphabet: usize) -> Result<usize> {
    if value.fract() != 0.0 || value < 1.0 || value > alphabet as f64 {
        return Err(AmpError::validation(format!(
            "symbol {value} is not an integer in 1..={alphabet}"
        )));
    }
    Ok(value as usize - 1)
}

/// Poisson log pmf at a float-encoded count.
fn poisson_log_pmf(count: f64, mean: f64) -> Result<f64> {
    if count.fract() != 0.0 || count < 0.0 {
        return Err(AmpError::validation(format!(
            "count {count} is not a nonnegative integer"
        )));
    }
    if mean == 0.0 {
        return Ok(if count == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    Ok(count * mean.ln() - mean - log_gamma(count + 1.0))
}

/// Multivariate normal log density; requires a positive-definite covariance.
fn gaussian_log_density(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let d = mean.len();
    let chol = cov.clone().cholesky().ok_or_else(|| {
        AmpError::unsupported("covariance is singular; observation density unavailable")
    })?;
    let diff = x - mean;
    let solved = chol.solve(&diff);
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    Ok(-0.5 * (d as f64 * LN_TWO_PI + log_det + diff.dot(&solved)))
}

/// Wishart(dof, scale) log density at `w` (dof may be any real > d - 1).
fn wishart_log_density(w: &DMatrix<f64>, dof: f64, scale: &DMatrix<f64>) -> Result<f64> {
    let d = scale.nrows();
    if dof <= d as f64 - 1.0 {
        return Err(AmpError::unsupported(format!(
            "Wishart density needs dof > d - 1 (dof = {dof}, d = {d})"
        )));
    }
    let scale_chol = scale.clone().cholesky().ok_or_else(|| {
        AmpError::unsupported("Wishart scale matrix is singular; density unavailable")
    })?;
    let w_chol = w
        .clone()
        .cholesky()
        .ok_or(AmpError::Numerical("statistic matrix is not positive definite".to_string()))?;
    let log_det_w: f64 = w_chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let log_det_scale: f64 = scale_chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let trace = scale_chol.solve(w).trace();
    Ok((dof - d as f64 - 1.0) / 2.0 * log_det_w - 0.5 * trace
        - dof * d as f64 / 2.0 * std::f64::consts::LN_2
        - dof / 2.0 * log_det_scale
        - multivariate_log_gamma(dof / 2.0, d)?)
}

/// Compute the family's sufficient statistic from a dataset.
pub fn sufficient_stat(data: &Dataset) -> Result<SufficientStat> {
    let n = data.rows.nrows();
    if n == 0 {
        return Err(AmpError::validation("dataset is empty"));
    }
    let d = data.rows.ncols();
    if d != data.spec.dim {
        return Err(AmpError::validation(format!(
            "dataset has {d} columns, spec declares {}",
            data.spec.dim
        )));
    }
    match data.spec.kind {
        FamilyKind::GaussianMean => Ok(SufficientStat::Mean(column_means(&data.rows))),
        FamilyKind::GaussianCov | FamilyKind::LowRankCov => {
            Ok(SufficientStat::ScatterRaw(scatter_raw(&data.rows)))
        }
        FamilyKind::GaussianMeanCov => {
            if n < 2 {
                return Err(AmpError::validation(
                    "mean-and-covariance statistic needs n >= 2",
                ));
            }
            let mean = column_means(&data.rows);
            let cov = scatter_centered(&data.rows, &mean) / (n as f64 - 1.0);
            Ok(SufficientStat::MeanAndCov { mean, cov })
        }
        FamilyKind::ProductExponential => Ok(SufficientStat::CoordMeans(column_means(&data.rows))),
        FamilyKind::UniformRect => {
            let mut lo = DVector::from_element(d, f64::INFINITY);
            let mut hi = DVector::from_element(d, f64::NEG_INFINITY);
            for i in 0..n {
                for j in 0..d {
                    lo[j] = lo[j].min(data.rows[(i, j)]);
                    hi[j] = hi[j].max(data.rows[(i, j)]);
                }
            }
            Ok(SufficientStat::MinMax { lo, hi })
        }
        FamilyKind::ProductPoisson | FamilyKind::PoissonizedDiscrete => {
            let mut sums = DVector::zeros(d);
            for i in 0..n {
                for j in 0..d {
                    let v = data.rows[(i, j)];
                    if v.fract() != 0.0 || v < 0.0 {
                        return Err(AmpError::validation(format!(
                            "count entry ({i}, {j}) = {v} is not a nonnegative integer"
                        )));
                    }
                    sums[j] += v;
                }
            }
            Ok(SufficientStat::CoordSums(sums))
        }
        FamilyKind::TopElementDiscrete => {
            let alphabet = data.spec.alphabet.ok_or_else(|| {
                AmpError::validation("discrete dataset spec is missing the alphabet size")
            })?;
            Ok(SufficientStat::Counts(symbol_counts(&data.rows, alphabet)?))
        }
        // No sufficient statistic smaller than the sample itself is
        // registered for these; amplification goes through the shuffle path.
        FamilyKind::Discrete | FamilyKind::SparseGaussian => Err(AmpError::unsupported(format!(
            "no registered sufficient statistic for {:?}; amplify with the shuffle method",
            data.spec.kind
        ))),
    }
}

/// Per-symbol occurrence counts of a one-column matrix of 1-based symbols.
pub fn symbol_counts(rows: &DMatrix<f64>, alphabet: usize) -> Result<Vec<u64>> {
    if rows.ncols() != 1 {
        return Err(AmpError::validation(format!(
            "discrete data must have exactly one symbol column, got {}",
            rows.ncols()
        )));
    }
    let mut counts = vec![0u64; alphabet];
    for i in 0..rows.nrows() {
        counts[symbol_index(rows[(i, 0)], alphabet)?] += 1;
    }
    Ok(counts)
}

/// Column means of an observation matrix.
pub fn column_means(rows: &DMatrix<f64>) -> DVector<f64> {
    let n = rows.nrows() as f64;
    DVector::from_iterator(rows.ncols(), rows.column_iter().map(|c| c.sum() / n))
}

/// Raw second-moment matrix divided by n: (1/n) sum_i x_i x_i^T.
pub fn scatter_raw(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let n = rows.nrows() as f64;
    rows.transpose() * rows / n
}

/// Centered scatter: sum_i (x_i - mean)(x_i - mean)^T (not normalized).
pub fn scatter_centered(rows: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let n = rows.nrows();
    let d = rows.ncols();
    let mut centered = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            centered[(i, j)] = rows[(i, j)] - mean[j];
        }
    }
    centered.transpose() * centered
}

/// One-dimensional component laws with closed-form squared Hellinger
/// distance between two parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scalar1d {
    /// N(theta, 1), parameterized by the mean.
    GaussianUnitVariance,
    /// Poisson(lambda), parameterized by the mean.
    Poisson,
    /// Exponential with rate lambda.
    Exponential,
    /// Bernoulli(p).
    Bernoulli,
}

/// Squared Hellinger distance H^2 between two members of a scalar family.
///
/// Closed forms:
/// * Gaussian (unit variance): 1 - exp(-(a-b)^2 / 8)
/// * Poisson: 1 - exp(-(sqrt a - sqrt b)^2 / 2)
/// * Exponential (rates): 1 - 2 sqrt(ab) / (a + b)
/// * Bernoulli: 1 - sqrt(ab) - sqrt((1-a)(1-b))
pub fn hellinger2_1d(component: Scalar1d, a: f64, b: f64) -> Result<f64> {
    match component {
        Scalar1d::GaussianUnitVariance => {
            if !(a.is_finite() && b.is_finite()) {
                return Err(AmpError::validation("means must be finite"));
            }
            Ok(1.0 - (-(a - b) * (a - b) / 8.0).exp())
        }
        Scalar1d::Poisson => {
            if !(a > 0.0 && b > 0.0) {
                return Err(AmpError::validation("Poisson means must be positive"));
            }
            let diff = a.sqrt() - b.sqrt();
            Ok(1.0 - (-diff * diff / 2.0).exp())
        }
        Scalar1d::Exponential => {
            if !(a > 0.0 && b > 0.0) {
                return Err(AmpError::validation("exponential rates must be positive"));
            }
            Ok(1.0 - 2.0 * (a * b).sqrt() / (a + b))
        }
        Scalar1d::Bernoulli => {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
                return Err(AmpError::validation("Bernoulli parameters must lie in [0, 1]"));
            }
            Ok(1.0 - (a * b).sqrt() - ((1.0 - a) * (1.0 - b)).sqrt())
        }
    }
}

/// Numeric-quadrature squared Hellinger distance between two continuous
/// scalar densities given by their log densities on [lo, hi]:
/// H^2 = 1 - integral sqrt(f g). Composite Simpson with `intervals`
/// subintervals (rounded up to even). Fallback for components without a
/// closed form and an independent cross-check for those with one.
pub fn hellinger2_quadrature(
    log_f: impl Fn(f64) -> f64,
    log_g: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    intervals: usize,
) -> Result<f64> {
    if !(hi > lo) || intervals == 0 {
        return Err(AmpError::validation(
            "quadrature needs hi > lo and at least one interval",
        ));
    }
    let steps = intervals + intervals % 2;
    let h = (hi - lo) / steps as f64;
    let integrand = |x: f64| {
        let v = 0.5 * (log_f(x) + log_g(x));
        if v.is_finite() {
            v.exp()
        } else {
            0.0
        }
    };
    let mut total = integrand(lo) + integrand(hi);
    for i in 1..steps {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += weight * integrand(lo + i as f64 * h);
    }
    Ok(1.0 - total * h / 3.0)
}

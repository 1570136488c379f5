//! Sufficiency-based amplification: keep the sufficient statistic, resample
//! the rest from its exact conditional distribution.
//!
//! For each supported family the map below sends the observed statistic
//! `T_n` to a target statistic for `n + m` points (the identity map, except
//! for the Poisson hybrid which adds fresh counts), then draws `n + m`
//! exchangeable rows whose statistic equals the target exactly. The
//! total-variation error is therefore exactly the distance between the
//! statistic's law at size `n` (pushed through the map) and at size `n + m`,
//! which the closed-form bounds in [`crate::divergences`] control.

use crate::amplify::AmplifyOutcome;
use crate::divergences::{
    amplification_bound_general, gamma_kl, gaussian_scaling_kl, uniform_minmax_kl, BoundReport,
};
use crate::error::{AmpError, Result};
use crate::families::{
    column_means, scatter_centered, scatter_raw, sufficient_stat, Dataset, FamilyKind,
    SufficientStat,
};
use crate::numerics::linalg::{sym_sqrt, SymSqrtKind};
use crate::numerics::prng::RngState;
use crate::numerics::samplers::{sample_dirichlet, sample_poisson, sample_std_normal};
use nalgebra::{DMatrix, DVector};

fn expect_kind(data: &Dataset, kind: FamilyKind, op: &str) -> Result<()> {
    if data.spec.kind != kind {
        return Err(AmpError::validation(format!(
            "{op}: dataset is {:?}, expected {kind:?}",
            data.spec.kind
        )));
    }
    if data.rows.nrows() == 0 {
        return Err(AmpError::validation(format!("{op}: dataset is empty")));
    }
    Ok(())
}

/// Shared zero-work path: amplifying by m = 0 returns the input sample
/// itself, which is trivially a perfect draw of n points.
fn identity_outcome(data: &Dataset, method: &'static str, formula: &str) -> Result<AmplifyOutcome> {
    Ok(AmplifyOutcome {
        data: data.clone(),
        method,
        bound: BoundReport::exact(0.0, formula)
            .with_note("m = 0: the output is the input sample itself"),
        target: Some(sufficient_stat(data)?),
    })
}

/// Matrix of i.i.d. standard normals.
fn standard_normal_matrix(n: usize, d: usize, rng: &mut RngState) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| sample_std_normal(rng))
}

/// Amplify a Gaussian sample with known covariance `cov` by `m` points:
/// draw `n + m` fresh draws from N(0, cov) and shift them so their sample
/// mean equals the observed sample mean.
///
/// Output statistic: the column-mean vector equals the input's exactly.
/// Bound: `sqrt(d/4 (m/n - log(1+m/n)))` — the scaled-Gaussian KL through
/// Pinsker, never clipped below its exact value.
pub fn amplify_gaussian_mean(
    data: &Dataset,
    cov: &DMatrix<f64>,
    m: usize,
    rng: &mut RngState,
) -> Result<AmplifyOutcome> {
    expect_kind(data, FamilyKind::GaussianMean, "amplify_gaussian_mean")?;
    let (n, d) = (data.rows.nrows(), data.rows.ncols());
    if cov.nrows() != d || cov.ncols() != d {
        return Err(AmpError::validation(format!(
            "amplify_gaussian_mean: covariance must be {d}x{d}"
        )));
    }
    let formula = "sqrt(d/4 * (m/n - log1p(m/n)))";
    if m == 0 {
        return identity_outcome(data, "gaussian_mean", formula);
    }
    let root = sym_sqrt(cov, SymSqrtKind::Root)?;
    let target_mean = column_means(&data.rows);
    let z = standard_normal_matrix(n + m, d, rng) * root.transpose();
    let z_mean = column_means(&z);
    let mut rows = z;
    for i in 0..(n + m) {
        for j in 0..d {
            rows[(i, j)] += target_mean[j] - z_mean[j];
        }
    }
    let kl = gaussian_scaling_kl(n as f64, m as f64, d)?;
    let mut bound = amplification_bound_general(kl)?;
    bound.formula = formula.to_string();
    Ok(AmplifyOutcome {
        data: Dataset {
            spec: data.spec.clone(),
            rows,
            origin: Some((rng.seed(), rng.stream())),
        },
        method: "gaussian_mean",
        bound,
        target: Some(SufficientStat::Mean(target_mean)),
    })
}

/// Amplify a centered Gaussian sample with unknown covariance by `m`
/// points: draw `n + m` standard normals, whiten them by their own raw
/// Gram matrix, and recolor by the input's raw Gram matrix.
///
/// Output statistic: the raw scatter `(1/(n+m)) sum x x^T` equals the
/// input's `(1/n) sum x x^T` whenever `n + m >= d` (below that the
/// whitening is a projection and exact transfer is impossible).
/// Bound: `min(1, 2 m d / n)`, valid when `n >= 4 max(m, d)`.
pub fn amplify_gaussian_cov(data: &Dataset, m: usize, rng: &mut RngState) -> Result<AmplifyOutcome> {
    expect_kind(data, FamilyKind::GaussianCov, "amplify_gaussian_cov")?;
    let (n, d) = (data.rows.nrows(), data.rows.ncols());
    let formula = "min(1, 2*m*d/n)";
    let validity = format!(
        "valid when n >= 4*max(m, d); here n = {n}, m = {m}, d = {d}"
    );
    if m == 0 {
        return identity_outcome(data, "gaussian_cov", formula);
    }
    let target_gram = data.rows.transpose() * &data.rows * ((n + m) as f64 / n as f64);
    let target_root = sym_sqrt(&target_gram, SymSqrtKind::Root)?;
    let z = standard_normal_matrix(n + m, d, rng);
    let z_gram = z.transpose() * &z;
    let whitener = sym_sqrt(&z_gram, SymSqrtKind::PseudoInverseRoot)?;
    let rows = z * whitener * target_root;
    let raw = 2.0 * m as f64 * d as f64 / n as f64;
    let mut bound = BoundReport::exact(raw, formula);
    if n < 4 * m.max(d) {
        bound = bound.with_note(validity);
    }
    Ok(AmplifyOutcome {
        data: Dataset {
            spec: data.spec.clone(),
            rows,
            origin: Some((rng.seed(), rng.stream())),
        },
        method: "gaussian_cov",
        bound,
        target: Some(SufficientStat::ScatterRaw(scatter_raw(&data.rows))),
    })
}

/// Amplify a Gaussian sample with unknown mean and covariance by `m`
/// points: center fresh standard normals, whiten by their centered Gram
/// matrix, recolor by the input's centered Gram matrix, and restore the
/// input's sample mean.
///
/// Output statistic: sample mean and sample covariance (centered scatter
/// over `n + m - 1`) equal the input's (over `n - 1`) whenever
/// `n + m - 1 >= d`. Bound: `min(1, 3 m d / (n - 1))`; requires `n >= 2`.
pub fn amplify_gaussian_mean_cov(
    data: &Dataset,
    m: usize,
    rng: &mut RngState,
) -> Result<AmplifyOutcome> {
    expect_kind(data, FamilyKind::GaussianMeanCov, "amplify_gaussian_mean_cov")?;
    let (n, d) = (data.rows.nrows(), data.rows.ncols());
    if n < 2 {
        return Err(AmpError::validation(
            "amplify_gaussian_mean_cov: needs n >= 2 to identify a covariance",
        ));
    }
    let formula = "min(1, 3*m*d/(n-1))";
    if m == 0 {
        return identity_outcome(data, "gaussian_mean_cov", formula);
    }
    let total = n + m;
    let input_mean = column_means(&data.rows);
    let input_centered = scatter_centered(&data.rows, &input_mean);
    let target_gram = &input_centered * ((total as f64 - 1.0) / (n as f64 - 1.0));
    let target_root = sym_sqrt(&target_gram, SymSqrtKind::Root)?;

    let z = standard_normal_matrix(total, d, rng);
    let z_mean = column_means(&z);
    let mut centered = z;
    for i in 0..total {
        for j in 0..d {
            centered[(i, j)] -= z_mean[j];
        }
    }
    let z_gram = centered.transpose() * &centered;
    let whitener = sym_sqrt(&z_gram, SymSqrtKind::PseudoInverseRoot)?;
    let mut rows = centered * whitener * target_root;
    for i in 0..total {
        for j in 0..d {
            rows[(i, j)] += input_mean[j];
        }
    }
    let raw = 3.0 * m as f64 * d as f64 / (n as f64 - 1.0);
    let bound = BoundReport::exact(raw, formula);
    let target_cov = input_centered / (n as f64 - 1.0);
    Ok(AmplifyOutcome {
        data: Dataset {
            spec: data.spec.clone(),
            rows,
            origin: Some((rng.seed(), rng.stream())),
        },
        method: "gaussian_mean_cov",
        bound,
        target: Some(SufficientStat::MeanAndCov {
            mean: input_mean,
            cov: target_cov,
        }),
    })
}

/// Amplify a product-exponential sample by `m` points: per coordinate,
/// split the preserved total `(n+m) * mean_j` over `n + m` cells with a
/// flat Dirichlet draw (the exact conditional law of i.i.d. exponentials
/// given their sum).
///
/// Output statistic: coordinate means equal the input's exactly.
/// Bound: `min(1, sqrt(gamma_kl(n, m, d) / 2))`.
pub fn amplify_exponential(data: &Dataset, m: usize, rng: &mut RngState) -> Result<AmplifyOutcome> {
    expect_kind(data, FamilyKind::ProductExponential, "amplify_exponential")?;
    let (n, d) = (data.rows.nrows(), data.rows.ncols());
    if data.rows.iter().any(|&x| !(x > 0.0)) {
        return Err(AmpError::validation(
            "amplify_exponential: observations must be strictly positive",
        ));
    }
    let formula = "min(1, sqrt(gamma_kl(n,m,d)/2))";
    if m == 0 {
        return identity_outcome(data, "exponential", formula);
    }
    let total = n + m;
    let means = column_means(&data.rows);
    let mut rows = DMatrix::zeros(total, d);
    for j in 0..d {
        let coordinate_total = total as f64 * means[j];
        let weights = sample_dirichlet(rng, total);
        for i in 0..total {
            rows[(i, j)] = coordinate_total * weights[i];
        }
    }
    let kl = gamma_kl(n as f64, m as f64, d)?;
    let mut bound = amplification_bound_general(kl)?;
    bound.formula = formula.to_string();
    Ok(AmplifyOutcome {
        data: Dataset {
            spec: data.spec.clone(),
            rows,
            origin: Some((rng.seed(), rng.stream())),
        },
        method: "exponential",
        bound,
        target: Some(SufficientStat::CoordMeans(means)),
    })
}

/// Amplify a product-uniform sample by `m` points: per coordinate, draw
/// `n + m` fresh U(0, 1) points, affinely map them so their min and max
/// land exactly on the observed min and max (the interior points are then
/// exact conditional draws given the extremes).
///
/// Output statistic: coordinate-wise minima and maxima equal the input's
/// exactly. Bound: `min(1, sqrt(uniform_minmax_kl(n, m, d) / 2))`;
/// requires `n >= 2` and non-degenerate coordinate ranges.
pub fn amplify_uniform(data: &Dataset, m: usize, rng: &mut RngState) -> Result<AmplifyOutcome> {
    expect_kind(data, FamilyKind::UniformRect, "amplify_uniform")?;
    let (n, d) = (data.rows.nrows(), data.rows.ncols());
    if n < 2 {
        return Err(AmpError::validation(
            "amplify_uniform: needs n >= 2 to identify an interval",
        ));
    }
    let SufficientStat::MinMax { lo, hi } = sufficient_stat(data)? else {
        unreachable!("uniform statistic is min-max");
    };
    for j in 0..d {
        if !(hi[j] > lo[j]) {
            return Err(AmpError::validation(format!(
                "amplify_uniform: degenerate support in coordinate {j} \
                 (all observations equal {}); conditional resampling is undefined",
                lo[j]
            )));
        }
    }
    let formula = "min(1, sqrt(uniform_minmax_kl(n,m,d)/2))";
    if m == 0 {
        return identity_outcome(data, "uniform", formula);
    }
    let total = n + m;
    let mut rows = DMatrix::zeros(total, d);
    let mut draws = vec![0.0f64; total];
    for j in 0..d {
        for v in draws.iter_mut() {
            *v = rng.uniform();
        }
        let (mut arg_lo, mut arg_hi) = (0usize, 0usize);
        for i in 1..total {
            if draws[i] < draws[arg_lo] {
                arg_lo = i;
            }
            if draws[i] > draws[arg_hi] {
                arg_hi = i;
            }
        }
        let (z_lo, z_hi) = (draws[arg_lo], draws[arg_hi]);
        let scale = (hi[j] - lo[j]) / (z_hi - z_lo);
        for i in 0..total {
            let mapped = lo[j] + (draws[i] - z_lo) * scale;
            rows[(i, j)] = mapped.clamp(lo[j], hi[j]);
        }
        // Pin the extremes bitwise; the affine map alone can be off by an ulp.
        rows[(arg_lo, j)] = lo[j];
        rows[(arg_hi, j)] = hi[j];
    }
    let kl = uniform_minmax_kl(n as f64, m as f64, d)?;
    let mut bound = amplification_bound_general(kl)?;
    bound.formula = formula.to_string();
    Ok(AmplifyOutcome {
        data: Dataset {
            spec: data.spec.clone(),
            rows,
            origin: Some((rng.seed(), rng.stream())),
        },
        method: "uniform",
        bound,
        target: Some(SufficientStat::MinMax { lo, hi }),
    })
}

/// Amplify a product-Poisson sample by `m` points with the half-sample
/// hybrid: keep the first n/2 rows untouched, estimate the rates from
/// them, add fresh Poisson(m * rate_hat_j) counts to the second half's
/// coordinate totals, and spread each augmented total uniformly over
/// n/2 + m replacement rows (the exact conditional law of i.i.d. Poissons
/// given their sum is multinomial).
///
/// Output statistic: coordinate totals equal the drawn target
/// `T_second + Z` plus the untouched first half — exact integers.
/// Bound: `min(1, m sqrt(2 d) / n)`; requires even `n`.
pub fn amplify_poisson_hybrid(
    data: &Dataset,
    m: usize,
    rng: &mut RngState,
) -> Result<AmplifyOutcome> {
    expect_kind(data, FamilyKind::ProductPoisson, "amplify_poisson_hybrid")?;
    let (n, d) = (data.rows.nrows(), data.rows.ncols());
    if n % 2 != 0 || n == 0 {
        return Err(AmpError::validation(format!(
            "amplify_poisson_hybrid: needs an even sample size to split in half, got n = {n}"
        )));
    }
    // Validate integer counts up front via the statistic.
    let SufficientStat::CoordSums(total_sums) = sufficient_stat(data)? else {
        unreachable!("Poisson statistic is coordinate sums");
    };
    let formula = "min(1, m*sqrt(2*d)/n)";
    if m == 0 {
        return identity_outcome(data, "poisson_hybrid", formula);
    }
    let half = n / 2;
    let block = half + m;
    let mut rows = DMatrix::zeros(n + m, d);
    rows.view_mut((0, 0), (half, d))
        .copy_from(&data.rows.view((0, 0), (half, d)));

    for j in 0..d {
        let first_half_sum: f64 = (0..half).map(|i| data.rows[(i, j)]).sum();
        let rate_hat = first_half_sum / half as f64;
        let fresh = sample_poisson(rng, m as f64 * rate_hat);
        let second_half_sum = total_sums[j] - first_half_sum;
        let block_total = second_half_sum as u64 + fresh;
        // Multinomial spread: each unit lands in a uniform block cell.
        for _ in 0..block_total {
            let cell = rng.below(block as u64) as usize;
            rows[(half + cell, j)] += 1.0;
        }
    }
    let target = {
        let mut sums = DVector::zeros(d);
        for j in 0..d {
            sums[j] = (0..(n + m)).map(|i| rows[(i, j)]).sum();
        }
        SufficientStat::CoordSums(sums)
    };
    let raw = m as f64 * (2.0 * d as f64).sqrt() / n as f64;
    let bound = BoundReport::exact(raw, formula);
    Ok(AmplifyOutcome {
        data: Dataset {
            spec: data.spec.clone(),
            rows,
            origin: Some((rng.seed(), rng.stream())),
        },
        method: "poisson_hybrid",
        bound,
        target: Some(target),
    })
}

/// Amplify a Poissonized discrete sample by `m` rows: keep every
/// per-symbol count total unchanged and spread each total uniformly over
/// all `n + m` rows.
///
/// Output statistic: coordinate totals equal the input's exactly — the
/// map on the statistic is the identity, so the bound is independent of
/// the alphabet size. Bound: `min(1, sqrt(m^2 / (2n)))`.
pub fn amplify_poissonized_discrete(
    data: &Dataset,
    m: usize,
    rng: &mut RngState,
) -> Result<AmplifyOutcome> {
    expect_kind(
        data,
        FamilyKind::PoissonizedDiscrete,
        "amplify_poissonized_discrete",
    )?;
    let (n, d) = (data.rows.nrows(), data.rows.ncols());
    let SufficientStat::CoordSums(sums) = sufficient_stat(data)? else {
        unreachable!("Poissonized statistic is coordinate sums");
    };
    let formula = "min(1, sqrt(m^2/(2n)))";
    if m == 0 {
        return identity_outcome(data, "poissonized_discrete", formula);
    }
    let total = n + m;
    let mut rows = DMatrix::zeros(total, d);
    for j in 0..d {
        for _ in 0..(sums[j] as u64) {
            let cell = rng.below(total as u64) as usize;
            rows[(cell, j)] += 1.0;
        }
    }
    let raw = (m as f64 * m as f64 / (2.0 * n as f64)).sqrt();
    let bound = BoundReport::exact(raw, formula);
    Ok(AmplifyOutcome {
        data: Dataset {
            spec: data.spec.clone(),
            rows,
            origin: Some((rng.seed(), rng.stream())),
        },
        method: "poissonized_discrete",
        bound,
        target: Some(SufficientStat::CoordSums(sums)),
    })
}

/// Amplify a rank-constrained centered Gaussian by `m` points: with at
/// least `rank` observations the span of the data almost surely equals the
/// covariance's range, which identifies the covariance (an orthogonal
/// projector) exactly; append `m` fresh draws from it.
///
/// With fewer than `rank` observations the covariance is not identifiable
/// and no amplification procedure can work: that is an impossibility, not
/// a validation problem. Bound: 0 (the appended rows are exact fresh
/// draws whenever the span is fully observed).
pub fn amplify_lowrank_cov(data: &Dataset, m: usize, rng: &mut RngState) -> Result<AmplifyOutcome> {
    expect_kind(data, FamilyKind::LowRankCov, "amplify_lowrank_cov")?;
    let (n, p) = (data.rows.nrows(), data.rows.ncols());
    let rank = data.spec.rank.ok_or_else(|| {
        AmpError::validation("amplify_lowrank_cov: dataset spec is missing the covariance rank")
    })?;
    if n < rank {
        return Err(AmpError::impossibility(format!(
            "a rank-{rank} covariance cannot be identified from {n} observations: \
             the data span has dimension at most {n}, so directions of the \
             covariance's range remain unobserved"
        )));
    }
    let formula = "0 (appended rows are exact fresh draws from the identified covariance)";
    if m == 0 {
        return Ok(AmplifyOutcome {
            data: data.clone(),
            method: "lowrank_cov",
            bound: BoundReport::exact(0.0, formula)
                .with_note("m = 0: the output is the input sample itself"),
            target: None,
        });
    }
    // Orthonormal basis of the row span via SVD of the data matrix.
    let svd = data.rows.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("SVD with V requested");
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let tol = 1e-10 * sigma_max.max(1e-300);
    let observed_rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if observed_rank != rank {
        return Err(AmpError::validation(format!(
            "amplify_lowrank_cov: data span has numerical rank {observed_rank}, \
             but the declared covariance rank is {rank}"
        )));
    }
    // Rows of v_t are the right singular vectors; the first `rank` span the data.
    let basis = v_t.rows(0, rank).transpose(); // p x rank, orthonormal columns
    let mut rows = DMatrix::zeros(n + m, p);
    rows.view_mut((0, 0), (n, p)).copy_from(&data.rows);
    let mut z = DVector::zeros(rank);
    for i in 0..m {
        for v in z.iter_mut() {
            *v = sample_std_normal(rng);
        }
        let x = &basis * &z;
        rows.row_mut(n + i).copy_from(&x.transpose());
    }
    let bound = BoundReport::exact(0.0, formula)
        .with_note(format!("requires n >= rank ({n} >= {rank} holds)"));
    Ok(AmplifyOutcome {
        data: Dataset {
            spec: data.spec.clone(),
            rows,
            origin: Some((rng.seed(), rng.stream())),
        },
        method: "lowrank_cov",
        bound,
        target: None,
    })
}

/// The closed-form amplification bound for a sufficiency-based amplifier,
/// without running it. `d` is the data dimension (for `LowRankCov`, the
/// covariance rank; for `PoissonizedDiscrete` the bound is dimension-free).
pub fn sufficiency_bound(kind: FamilyKind, n: usize, m: usize, d: usize) -> Result<BoundReport> {
    if n == 0 {
        return Err(AmpError::validation("sufficiency_bound: n must be positive"));
    }
    let (nf, mf, df) = (n as f64, m as f64, d as f64);
    match kind {
        FamilyKind::GaussianMean => {
            let kl = gaussian_scaling_kl(nf, mf, d)?;
            let mut b = amplification_bound_general(kl)?;
            b.formula = "sqrt(d/4 * (m/n - log1p(m/n)))".to_string();
            Ok(b)
        }
        FamilyKind::GaussianCov => {
            let mut b = BoundReport::exact(2.0 * mf * df / nf, "min(1, 2*m*d/n)");
            if n < 4 * m.max(d) {
                b = b.with_note(format!(
                    "valid when n >= 4*max(m, d); here n = {n}, m = {m}, d = {d}"
                ));
            }
            Ok(b)
        }
        FamilyKind::GaussianMeanCov => {
            if n < 2 {
                return Err(AmpError::validation("needs n >= 2"));
            }
            Ok(BoundReport::exact(
                3.0 * mf * df / (nf - 1.0),
                "min(1, 3*m*d/(n-1))",
            ))
        }
        FamilyKind::ProductExponential => {
            let kl = gamma_kl(nf, mf, d)?;
            let mut b = amplification_bound_general(kl)?;
            b.formula = "min(1, sqrt(gamma_kl(n,m,d)/2))".to_string();
            Ok(b)
        }
        FamilyKind::UniformRect => {
            let kl = uniform_minmax_kl(nf, mf, d)?;
            let mut b = amplification_bound_general(kl)?;
            b.formula = "min(1, sqrt(uniform_minmax_kl(n,m,d)/2))".to_string();
            Ok(b)
        }
        FamilyKind::ProductPoisson => Ok(BoundReport::exact(
            mf * (2.0 * df).sqrt() / nf,
            "min(1, m*sqrt(2*d)/n)",
        )),
        FamilyKind::PoissonizedDiscrete => Ok(BoundReport::exact(
            (mf * mf / (2.0 * nf)).sqrt(),
            "min(1, sqrt(m^2/(2n)))",
        )),
        FamilyKind::LowRankCov => {
            if n < d {
                return Err(AmpError::impossibility(format!(
                    "a rank-{d} covariance cannot be identified from {n} observations"
                )));
            }
            Ok(BoundReport::exact(
                0.0,
                "0 (appended rows are exact fresh draws from the identified covariance)",
            ))
        }
        FamilyKind::Discrete | FamilyKind::TopElementDiscrete | FamilyKind::SparseGaussian => {
            Err(AmpError::unsupported(
                "no sufficiency-based amplifier exists for this family; use the shuffle method",
            ))
        }
    }
}

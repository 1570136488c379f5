//! Canonical family construction and the method registry.
//!
//! The command line names a family and a dimension; this module builds the
//! canonical member of that family (zero means, identity covariances, unit
//! rates, uniform probabilities) so every run is fully determined by
//! `(family, dim, n, m, method, seed)`. It also maps method names to the
//! library's amplifiers, bounds, and baseline candidates.

use amp_core::amplify::{
    amplify_exponential, amplify_gaussian_cov, amplify_gaussian_mean, amplify_gaussian_mean_cov,
    amplify_lowrank_cov, amplify_poisson_hybrid, amplify_poissonized_discrete, amplify_uniform,
    shuffle_amplify_general, shuffle_amplify_product, shuffle_bound_preview, sufficiency_bound,
    AmplifyOutcome, Learner,
};
use amp_core::divergences::{gaussian_scaling_tv_exact, BoundReport};
use amp_core::families::{Dataset, Family, FamilyKind, Scalar1d};
use amp_core::nalgebra::{DMatrix, DVector};
use amp_core::numerics::RngState;
use amp_core::verify::{copy_append, plain_append, uniform_fake};
use amp_core::{AmpError, Result};

/// Family names accepted by `--family` (and the `family` config key).
pub const FAMILY_NAMES: [&str; 11] = [
    "gaussian_mean",
    "gaussian_cov",
    "gaussian_mean_cov",
    "exponential",
    "uniform",
    "poisson",
    "discrete",
    "poissonized_discrete",
    "sparse_gaussian",
    "top_element_discrete",
    "lowrank_cov",
];

/// Method names accepted by `--method` for amplification and bounds.
pub const METHOD_NAMES: [&str; 3] = ["sufficiency", "shuffle", "exact"];

/// Extra candidate generators accepted by `verify --method`.
pub const BASELINE_NAMES: [&str; 3] = ["copy_append", "plain_append", "uniform_fake"];

/// Shape attributes that are part of the model class. Direct subcommands
/// use the defaults; experiment configs can override them.
#[derive(Debug, Clone)]
pub struct FamilyOptions {
    /// Known mass of the first symbol for `top_element_discrete`.
    pub top_mass: f64,
    /// Maximum nonzero mean coordinates for `sparse_gaussian`.
    pub sparsity: usize,
    /// Covariance rank for `lowrank_cov`; `None` picks `max(1, 2*dim/3)`.
    pub rank: Option<usize>,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions {
            top_mass: 0.01,
            sparsity: 1,
            rank: None,
        }
    }
}

/// Build the canonical member of the named family.
///
/// `dim` is the data dimension for vector families and the alphabet size
/// for symbol-valued families (`discrete`, `poissonized_discrete`,
/// `top_element_discrete`); for `lowrank_cov` it is the ambient dimension.
pub fn build_family(name: &str, dim: usize, opts: &FamilyOptions) -> Result<Family> {
    if dim == 0 {
        return Err(AmpError::validation("--dim must be positive"));
    }
    let d = dim;
    match name {
        "gaussian_mean" => Family::gaussian_mean(DVector::zeros(d), DMatrix::identity(d, d)),
        "gaussian_cov" => Family::gaussian_cov(DMatrix::identity(d, d)),
        "gaussian_mean_cov" => {
            Family::gaussian_mean_cov(DVector::zeros(d), DMatrix::identity(d, d))
        }
        "exponential" => Family::product_exponential(DVector::from_element(d, 1.0)),
        "uniform" => Family::uniform_rect(DVector::zeros(d), DVector::from_element(d, 1.0)),
        "poisson" => Family::product_poisson(DVector::from_element(d, 1.0)),
        "discrete" => Family::discrete(vec![1.0 / d as f64; d]),
        "poissonized_discrete" => Family::poissonized_discrete(vec![1.0 / d as f64; d]),
        "sparse_gaussian" => Family::sparse_gaussian(DVector::zeros(d), opts.sparsity),
        "top_element_discrete" => {
            let t = opts.top_mass;
            if d < 2 {
                return Err(AmpError::validation(
                    "top_element_discrete needs an alphabet of at least 2 symbols",
                ));
            }
            let mut probs = vec![(1.0 - t) / (d as f64 - 1.0); d];
            probs[0] = t;
            Family::top_element_discrete(probs, t)
        }
        "lowrank_cov" => {
            let rank = opts.rank.unwrap_or_else(|| (2 * d / 3).max(1));
            Family::low_rank_cov(DMatrix::identity(d, rank))
        }
        other => Err(AmpError::validation(format!(
            "unknown family '{other}'; choose one of {}",
            FAMILY_NAMES.join(", ")
        ))),
    }
}

/// Scalar component for `certify --family`.
pub fn component_from_name(name: &str) -> Result<Scalar1d> {
    match name {
        "gaussian_unit_variance" => Ok(Scalar1d::GaussianUnitVariance),
        "poisson" => Ok(Scalar1d::Poisson),
        "exponential" => Ok(Scalar1d::Exponential),
        "bernoulli" => Ok(Scalar1d::Bernoulli),
        other => Err(AmpError::validation(format!(
            "unknown component family '{other}'; choose one of \
             gaussian_unit_variance, poisson, exponential, bernoulli"
        ))),
    }
}

/// Per-coordinate (or single whole-row) learners for the shuffle method,
/// plus whether they drive the coordinatewise amplifier.
pub fn shuffle_learners(family: &Family) -> Result<(Vec<Learner>, bool)> {
    let spec = family.spec();
    match spec.kind {
        FamilyKind::GaussianMean => {
            let learner = Learner::gaussian_mean_plugin(DMatrix::identity(1, 1))?;
            Ok((vec![learner; spec.dim], true))
        }
        FamilyKind::ProductExponential => {
            Ok((vec![Learner::exponential_rate_plugin(); spec.dim], true))
        }
        FamilyKind::UniformRect => Ok((vec![Learner::uniform_mle(); spec.dim], true)),
        FamilyKind::SparseGaussian => Ok((vec![Learner::soft_threshold_sparse(3.0)?], true)),
        FamilyKind::Discrete => {
            let k = spec.alphabet.expect("discrete spec has an alphabet");
            Ok((vec![Learner::empirical_discrete(k)?], false))
        }
        FamilyKind::TopElementDiscrete => {
            let t = spec.top_mass.expect("top-element spec has a top mass");
            Ok((vec![Learner::top_element_plugin(t)?], false))
        }
        _ => Err(AmpError::unsupported(format!(
            "no shuffle learner is registered for {:?}; use the sufficiency method",
            spec.kind
        ))),
    }
}

/// Whole-sample learner used by the `plain_append` baseline.
pub fn whole_row_learner(family: &Family) -> Result<Learner> {
    let spec = family.spec();
    match spec.kind {
        FamilyKind::GaussianMean => {
            Learner::gaussian_mean_plugin(DMatrix::identity(spec.dim, spec.dim))
        }
        FamilyKind::ProductExponential => Ok(Learner::exponential_rate_plugin()),
        FamilyKind::UniformRect => Ok(Learner::uniform_mle()),
        FamilyKind::SparseGaussian => Learner::soft_threshold_sparse(3.0),
        FamilyKind::Discrete => {
            Learner::empirical_discrete(spec.alphabet.expect("discrete spec has an alphabet"))
        }
        FamilyKind::TopElementDiscrete => {
            Learner::top_element_plugin(spec.top_mass.expect("top-element spec has a top mass"))
        }
        _ => Err(AmpError::unsupported(format!(
            "no plug-in learner is registered for {:?}",
            spec.kind
        ))),
    }
}

/// Run the named amplification method on `data`.
pub fn run_amplifier(
    family: &Family,
    data: &Dataset,
    m: usize,
    method: &str,
    rng: &mut RngState,
) -> Result<AmplifyOutcome> {
    match method {
        "sufficiency" => match family {
            Family::GaussianMean { cov, .. } => amplify_gaussian_mean(data, cov, m, rng),
            Family::GaussianCov { .. } => amplify_gaussian_cov(data, m, rng),
            Family::GaussianMeanCov { .. } => amplify_gaussian_mean_cov(data, m, rng),
            Family::ProductExponential { .. } => amplify_exponential(data, m, rng),
            Family::UniformRect { .. } => amplify_uniform(data, m, rng),
            Family::ProductPoisson { .. } => amplify_poisson_hybrid(data, m, rng),
            Family::PoissonizedDiscrete { .. } => amplify_poissonized_discrete(data, m, rng),
            Family::LowRankCov { .. } => amplify_lowrank_cov(data, m, rng),
            Family::Discrete { .. }
            | Family::TopElementDiscrete { .. }
            | Family::SparseGaussian { .. } => Err(AmpError::unsupported(format!(
                "no sufficiency amplifier for {:?}; use the shuffle method",
                family.kind()
            ))),
        },
        "shuffle" => {
            let (learners, per_coordinate) = shuffle_learners(family)?;
            if per_coordinate {
                shuffle_amplify_product(data, &learners, m, rng)
            } else {
                shuffle_amplify_general(data, &learners[0], m, rng)
            }
        }
        other => Err(AmpError::validation(format!(
            "unknown amplification method '{other}'; choose one of {}",
            METHOD_NAMES.join(", ")
        ))),
    }
}

/// Generate one candidate dataset for the verifier: `n` genuine draws run
/// through the named amplifier or baseline.
pub fn candidate_dataset(
    family: &Family,
    n: usize,
    m: usize,
    method: &str,
    learner: Option<&Learner>,
    rng: &mut RngState,
) -> Result<Dataset> {
    let data = family.sample(n, rng)?;
    match method {
        "copy_append" => copy_append(&data, m),
        "plain_append" => {
            let learner =
                learner.ok_or_else(|| AmpError::validation("plain_append needs a learner"))?;
            plain_append(&data, learner, m, rng)
        }
        "uniform_fake" => uniform_fake(&data, m, rng),
        _ => run_amplifier(family, &data, m, method, rng).map(|o| o.data),
    }
}

/// The certified error (bound or exact value) of the named method at
/// `(n, m)`, computed without data, plus the value kind for CSV rows.
pub fn compute_bound(
    family: &Family,
    n: usize,
    m: usize,
    method: &str,
) -> Result<(BoundReport, &'static str)> {
    match method {
        "exact" => {
            if family.kind() != FamilyKind::GaussianMean {
                return Err(AmpError::unsupported(
                    "the exact amplification error is only available for the \
                     known-covariance Gaussian mean family",
                ));
            }
            let tv = gaussian_scaling_tv_exact(n as f64, m as f64, family.data_dim())?;
            Ok((
                BoundReport::exact(tv, "exact_gaussian_mean_scaling_tv"),
                "exact",
            ))
        }
        "sufficiency" => {
            let report = sufficiency_bound(family.kind(), n, m, family.data_dim())?;
            Ok((report, "bound"))
        }
        "shuffle" => {
            let (learners, per_coordinate) = shuffle_learners(family)?;
            let report = shuffle_bound_preview(&learners, &family.spec(), n, m, per_coordinate)?;
            Ok((report, "bound"))
        }
        other => Err(AmpError::validation(format!(
            "unknown method '{other}'; choose one of {}",
            METHOD_NAMES.join(", ")
        ))),
    }
}

/// The certified error at `(n, m)` as a bare number, for the `mstar`
/// search. Zero extra samples always have zero error.
pub fn certified_error(family: &Family, n: usize, m: usize, method: &str) -> Result<f64> {
    if m == 0 {
        return Ok(0.0);
    }
    compute_bound(family, n, m, method).map(|(report, _)| report.value)
}

/// Largest `m <= ceiling` whose certified error stays within `eps`,
/// found by bisection (the certified errors are nondecreasing in `m`).
pub fn largest_amplification(
    family: &Family,
    n: usize,
    eps: f64,
    method: &str,
    ceiling: usize,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(AmpError::validation(format!(
            "--eps must lie in [0, 1], got {eps}"
        )));
    }
    if certified_error(family, n, ceiling, method)? <= eps {
        return Ok(ceiling);
    }
    // Invariant: error(lo) <= eps < error(hi).
    let (mut lo, mut hi) = (0usize, ceiling);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if certified_error(family, n, mid, method)? <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_families_build_for_all_names() {
        let opts = FamilyOptions::default();
        for name in FAMILY_NAMES {
            // top_element_discrete needs an alphabet large enough that the
            // non-top symbols stay below the known top mass.
            let dim = if name == "top_element_discrete" { 150 } else { 4 };
            let family = build_family(name, dim, &opts).unwrap();
            let spec = family.spec();
            match name {
                "discrete" | "top_element_discrete" => {
                    assert_eq!(spec.alphabet, Some(dim));
                    assert_eq!(spec.dim, 1);
                }
                "poissonized_discrete" => {
                    assert_eq!(spec.alphabet, Some(dim));
                    assert_eq!(spec.dim, dim);
                }
                "lowrank_cov" => assert_eq!(spec.rank, Some(2)),
                _ => assert_eq!(spec.dim, dim),
            }
        }
        assert!(build_family("no_such_family", 3, &opts).is_err());
        assert!(build_family("gaussian_mean", 0, &opts).is_err());
    }

    #[test]
    fn lowrank_default_rank_follows_two_thirds() {
        let opts = FamilyOptions::default();
        let family = build_family("lowrank_cov", 6, &opts).unwrap();
        assert_eq!(family.spec().rank, Some(4));
        let forced = build_family(
            "lowrank_cov",
            6,
            &FamilyOptions {
                rank: Some(2),
                ..FamilyOptions::default()
            },
        )
        .unwrap();
        assert_eq!(forced.spec().rank, Some(2));
    }

    #[test]
    fn method_registry_covers_documented_pairs() {
        let opts = FamilyOptions::default();
        let mut rng = RngState::new(11, 0);

        // Sufficiency on the Gaussian mean amplifies and bounds.
        let family = build_family("gaussian_mean", 3, &opts).unwrap();
        let data = family.sample(10, &mut rng).unwrap();
        let out = run_amplifier(&family, &data, 2, "sufficiency", &mut rng).unwrap();
        assert_eq!(out.data.rows.nrows(), 12);
        let (report, kind) = compute_bound(&family, 10, 2, "sufficiency").unwrap();
        assert_eq!(kind, "bound");
        assert!(report.value > 0.0);

        // Shuffle on discrete uses the whole-row amplifier.
        let family = build_family("discrete", 6, &opts).unwrap();
        let data = family.sample(8, &mut rng).unwrap();
        let out = run_amplifier(&family, &data, 2, "shuffle", &mut rng).unwrap();
        assert_eq!(out.method, "shuffle");
        // ... and sufficiency refuses it.
        assert!(matches!(
            run_amplifier(&family, &data, 2, "sufficiency", &mut rng),
            Err(AmpError::Unsupported(_))
        ));

        // Exact is Gaussian-mean only.
        let (report, kind) = compute_bound(
            &build_family("gaussian_mean", 2, &opts).unwrap(),
            10,
            2,
            "exact",
        )
        .unwrap();
        assert_eq!(kind, "exact");
        assert!(report.stderr.is_none());
        assert!(compute_bound(&family, 10, 2, "exact").is_err());

        // Unknown method names are validation errors.
        assert!(matches!(
            run_amplifier(&family, &data, 2, "typo", &mut rng),
            Err(AmpError::Validation(_))
        ));
    }

    #[test]
    fn bound_preview_matches_amplifier_report() {
        let opts = FamilyOptions::default();
        let family = build_family("exponential", 2, &opts).unwrap();
        let mut rng = RngState::new(5, 0);
        let data = family.sample(20, &mut rng).unwrap();
        let out = run_amplifier(&family, &data, 3, "shuffle", &mut rng).unwrap();
        let (report, _) = compute_bound(&family, 20, 3, "shuffle").unwrap();
        assert_eq!(report.value, out.bound.value);
        assert_eq!(report.stderr, out.bound.stderr);
    }

    #[test]
    fn mstar_search_is_exact_on_a_scanned_grid() {
        let opts = FamilyOptions::default();
        let family = build_family("gaussian_mean", 16, &opts).unwrap();
        // Scan linearly to get the ground truth, then compare the search.
        let eps = 0.1;
        let mut truth = 0;
        for m in 0..200 {
            if certified_error(&family, 100, m, "exact").unwrap() <= eps {
                truth = m;
            } else {
                break;
            }
        }
        let found = largest_amplification(&family, 100, eps, "exact", 1_000_000).unwrap();
        assert_eq!(found, truth);
        assert!(truth > 0);

        // eps = 1 saturates at the ceiling; eps just above 0 gives 0.
        assert_eq!(
            largest_amplification(&family, 100, 1.0, "exact", 50).unwrap(),
            50
        );
        assert_eq!(
            largest_amplification(&family, 100, 1e-6, "exact", 50).unwrap(),
            0
        );
        assert!(largest_amplification(&family, 100, 1.5, "exact", 50).is_err());
    }

    #[test]
    fn candidate_generators_produce_the_right_shapes() {
        let opts = FamilyOptions::default();
        let family = build_family("gaussian_mean", 2, &opts).unwrap();
        let learner = whole_row_learner(&family).unwrap();
        let mut rng = RngState::new(7, 0);
        for method in ["sufficiency", "shuffle", "copy_append", "plain_append"] {
            let learner_opt = (method == "plain_append").then_some(&learner);
            let data = candidate_dataset(&family, 10, 3, method, learner_opt, &mut rng).unwrap();
            assert_eq!(data.rows.nrows(), 13, "{method}");
            assert_eq!(data.rows.ncols(), 2, "{method}");
        }
        // uniform_fake is for symbol families only.
        assert!(candidate_dataset(&family, 10, 3, "uniform_fake", None, &mut rng).is_err());
        let discrete = build_family("discrete", 5, &opts).unwrap();
        let fake = candidate_dataset(&discrete, 10, 3, "uniform_fake", None, &mut rng).unwrap();
        assert_eq!(fake.rows.nrows(), 13);
    }

    #[test]
    fn component_names_match_certificate_vocabulary() {
        assert!(matches!(
            component_from_name("gaussian_unit_variance"),
            Ok(Scalar1d::GaussianUnitVariance)
        ));
        assert!(matches!(component_from_name("bernoulli"), Ok(Scalar1d::Bernoulli)));
        assert!(component_from_name("gaussian").is_err());
    }
}

//! Amplification procedures: turn `n` i.i.d. draws into `n + m` draws whose
//! joint law is close in total variation to `n + m` i.i.d. draws.
//!
//! Two strategies are implemented:
//!
//! * [`sufficiency`] — carry the sufficient statistic over unchanged (or
//!   nearly so) and resample everything else from its exact conditional law;
//! * [`shuffle`] — fit a plug-in estimate on half the sample, draw the extra
//!   observations from it, and hide them among genuine draws with a uniform
//!   shuffle.

pub mod shuffle;
pub mod sufficiency;

use crate::divergences::BoundReport;
use crate::families::{Dataset, SufficientStat};

pub use shuffle::{
    shuffle_amplify_general, shuffle_amplify_product, shuffle_bound_preview, shuffle_chi2_bound,
    ChiSqGuarantee, Learner, Plugin,
};
pub use sufficiency::{
    amplify_exponential, amplify_gaussian_cov, amplify_gaussian_mean, amplify_gaussian_mean_cov,
    amplify_lowrank_cov, amplify_poisson_hybrid, amplify_poissonized_discrete, amplify_uniform,
    sufficiency_bound,
};

/// Result of an amplification: the `n + m` output rows, a tag naming the
/// procedure that produced them, the total-variation bound that applies to
/// it, and (for sufficiency-based amplifiers) the statistic value the output
/// is constrained to reproduce.
#[derive(Debug, Clone)]
pub struct AmplifyOutcome {
    pub data: Dataset,
    /// Short procedure tag, e.g. `"gaussian_mean"` or `"shuffle"`.
    pub method: &'static str,
    pub bound: BoundReport,
    /// The statistic the output provably reproduces: `Some` for
    /// sufficiency-based amplifiers, `None` for shuffle-based ones and for
    /// the low-rank appender (which preserves the span, not the scatter).
    pub target: Option<SufficientStat>,
}

//! Independent checks: exact reference values, the nearest-point geometry,
//! tail-ratio probes, region inclusion and implicit-surface curvature.

pub mod derivatives;
pub mod exact;
pub mod lemma;
pub mod nearest;
pub mod subset;
pub mod suite;

pub use derivatives::{implicit_derivative_check, DerivativeReport};
pub use exact::{region_indicator, sc_outage_exact_indep, sum2_cdf_quadrature};
pub use lemma::{lemma_ratio, theorem_ratio, LemmaProbe, RatioPoint};
pub use nearest::{nearest_point_closed, nearest_point_numeric, NearestPointReport};
pub use subset::{subset_inclusion_check, subset_inclusion_check_permuted, SubsetReport};
pub use suite::{verify, Suite, VerifyConfig, VerifyReport};

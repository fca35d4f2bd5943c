//! Independent reference computations used to validate the sampler and its
//! building blocks: quadrature, brute-force conditionals, numerical KL,
//! synthetic trials and chain diagnostics.

pub mod diagnostics;
pub mod gof;
pub mod kl;
pub mod quadrature;
pub mod rejection;
pub mod scenario;

pub use diagnostics::{acf, chain_diagnostics, ess, mcse, ParameterSummary};
pub use gof::{chi_square_counts, chi_square_gof, chi_square_sf, ChiSquare};
pub use kl::{kl_integral_identities, kl_integral_parts, numerical_kl, quadrature_kl};
pub use quadrature::integrate;
pub use rejection::{halving_check, marginal_sd, rejection_conditional_oracle, ConditionalMoments, Estimate, JointLaw};
pub use scenario::{generate_scenario, DropoutMechanism, Scenario, SyntheticScenario};

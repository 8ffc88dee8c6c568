//! Simulation laboratory: data-generating processes with a known functional
//! structure, their exact distributional impulse responses, and the Monte
//! Carlo studies that gauge how well the estimation pipeline recovers them.

mod dgp;
mod studies;

pub use dgp::{
    build_gamma_mixture_basis, build_omega, dgp_var_coefficients, simulate_dgp,
    true_functional_irf, BasisKind, DgpBasis, DgpSpec, OmegaRecipe, SimulatedPanel, TruthIrf,
};
pub use studies::{
    estimate_lqd_panel, mc_correlation_study, mise_cv_study, KChoice, McCorrelationTable, McRow,
    MiseCvTable, MiseRow, Transform,
};

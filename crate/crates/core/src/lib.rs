//! Functional structural VAR toolkit.
//!
//! The pipeline estimates per-period densities from repeated cross sections,
//! maps them to unconstrained log-quantile-density (LQD) curves, compresses the
//! curve panel with functional principal components, models the component
//! scores jointly with macro aggregates in a conjugate Bayesian VAR, and maps
//! structural impulse responses of the scores back into density space. Every
//! reconstructed density is non-negative and integrates to one by construction
//! of the inverse LQD map, so no renormalization happens downstream of
//! estimation.
//!
//! Modules:
//! - [`density`]: reflected Gaussian kernel density estimation on a bounded support
//! - [`lqd`]: log quantile density transform and its inverse
//! - [`fpca`]: functional principal components via truncated SVD
//! - [`bvar`]: conjugate Gaussian-Inverse-Wishart VAR, sampling and structural IRFs
//! - [`firf`]: distributional impulse responses and summary functionals
//! - [`flp`]: functional local projections with HAC inference
//! - [`simlab`]: data-generating processes and Monte Carlo studies
//! - [`io`]: CSV/JSON persistence of panels, curves, models and draws

pub mod bvar;
pub mod density;
pub mod error;
pub mod firf;
pub mod flp;
pub mod fpca;
pub mod instrument;
pub mod io;
pub mod lqd;
pub mod numerics;
pub mod simlab;

pub use error::{FvarError, Result};

/// Derive a child seed from a base seed and a role tag.
///
/// Commands and studies split one user seed into independent streams (basis
/// construction, simulation, posterior sampling, ...) so that re-running any
/// stage is reproducible without the stages sharing a generator.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, folded into the base with a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = base ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

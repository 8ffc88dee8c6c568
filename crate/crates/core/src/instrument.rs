//! Lightweight instrumentation counters.
//!
//! The inverse LQD map yields valid densities by construction, so the impulse
//! response stage never renormalizes a curve. The counter below records every
//! explicit renormalization in the process (kernel estimation and DGP
//! construction legitimately normalize); tests assert that it stays flat
//! across the response-construction window.

use std::sync::atomic::{AtomicU64, Ordering};

static RENORMALIZATIONS: AtomicU64 = AtomicU64::new(0);

/// Number of explicit density renormalizations since process start (or last reset).
pub fn renormalization_count() -> u64 {
    RENORMALIZATIONS.load(Ordering::SeqCst)
}

/// Reset the renormalization counter. Intended for tests.
pub fn reset_renormalization_count() {
    RENORMALIZATIONS.store(0, Ordering::SeqCst);
}

pub(crate) fn record_renormalization() {
    RENORMALIZATIONS.fetch_add(1, Ordering::SeqCst);
}

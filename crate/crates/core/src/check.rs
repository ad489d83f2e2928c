//! Opt-in NaN/Inf assertions on operator outputs.
//!
//! Off by default. The `cvrnet` binary switches it on when
//! `CVRNET_CHECK_FINITE=1` is set; tests can flip it directly.

use core::sync::atomic::{AtomicBool, Ordering};

use crate::{Error, Result, Scalar};

static CHECK_FINITE: AtomicBool = AtomicBool::new(false);

pub fn set_check_finite(enabled: bool) {
    CHECK_FINITE.store(enabled, Ordering::Relaxed);
}

pub fn check_finite_enabled() -> bool {
    CHECK_FINITE.load(Ordering::Relaxed)
}

#[inline]
pub(crate) fn finite<T: Scalar>(op: &'static str, data: &[T]) -> Result<()> {
    if check_finite_enabled() && data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { op });
    }
    Ok(())
}

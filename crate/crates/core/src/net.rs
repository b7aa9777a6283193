//! Process-wide count of outbound network requests. Fixture-mode runs must
//! leave it untouched.

use std::sync::atomic::{AtomicU64, Ordering};

static OUTBOUND: AtomicU64 = AtomicU64::new(0);

pub(crate) fn record_outbound() {
    OUTBOUND.fetch_add(1, Ordering::SeqCst);
}

pub fn outbound_requests() -> u64 {
    OUTBOUND.load(Ordering::SeqCst)
}

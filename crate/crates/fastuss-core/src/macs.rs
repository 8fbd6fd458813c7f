//! Thread-local multiply-accumulate meter.
//!
//! The dense kernels report how many MACs each call performs, so a forward
//! pass can be cross-checked against the analytic cost model.

use std::cell::Cell;

thread_local! {
    static COUNTER: Cell<u64> = const { Cell::new(0) };
}

pub fn reset() {
    COUNTER.with(|c| c.set(0));
}

pub fn add(n: u64) {
    COUNTER.with(|c| c.set(c.get().wrapping_add(n)));
}

pub fn total() -> u64 {
    COUNTER.with(|c| c.get())
}

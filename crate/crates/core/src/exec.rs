//! Switch between rayon data-parallel execution and a sequential
//! fallback.
//!
//! The `parallel` feature selects the implementation at compile time; the
//! runtime override exists so benchmarks (and debugging sessions) can
//! compare both paths in one build. Callers always reduce results in
//! index order, so the two paths are bit-identical.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force the sequential path even when the `parallel` feature is on.
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

pub fn is_sequential() -> bool {
    if cfg!(feature = "parallel") {
        FORCE_SEQUENTIAL.load(Ordering::Relaxed)
    } else {
        true
    }
}

/// Map `f` over the slice, preserving input order in the output.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Sync, R: Send>(items: &[T], f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    use rayon::prelude::*;
    if is_sequential() {
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    } else {
        items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, R>(items: &[T], f: impl Fn(usize, &T) -> R) -> Vec<R> {
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Apply `f` to every element in place.
#[cfg(feature = "parallel")]
pub fn for_each_mut<T: Send>(items: &mut [T], f: impl Fn(usize, &mut T) + Sync) {
    use rayon::prelude::*;
    if is_sequential() {
        items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
    } else {
        items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
    }
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_mut<T>(items: &mut [T], f: impl Fn(usize, &mut T)) {
    items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
}

//! Spectral lattice simulator for the stochastic quantization of the O(N)
//! linear sigma model on the periodic torus.

pub mod besov;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod measures;
pub mod oracle;
pub mod stochastic;
pub mod torus;

pub use error::{Error, Result};

use rayon::prelude::*;

const PAR_THRESHOLD: usize = 1 << 14;

/// Ordered map over `0..n`, parallel only when `work` is large.
pub(crate) fn map_idx<T, F>(work: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if work >= PAR_THRESHOLD && n > 1 {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

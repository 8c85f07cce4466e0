//! Kernel convolution decoding of stimulus spectrograms from multichannel
//! neural time series.
//!
//! The pipeline: load a [`tensorio::Dataset`] of paired recordings and
//! spectrograms, stack lagged response windows into a design matrix
//! ([`lagging`]), fit per-frequency ridge or kernel ridge decoders with
//! leave-one-out regularization selection ([`decoder`]), and score held-out
//! pairs with the 2-vs-2 correlation test ([`eval`]). [`synth`] plants a known
//! forward model for end-to-end checks.

pub mod audiofeat;
pub mod decoder;
pub mod error;
pub mod eval;
pub mod lagging;
pub mod synth;
pub mod tensorio;

pub use error::{Error, Result};

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidConfig("thread count must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}"))),
    }
}

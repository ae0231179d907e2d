//! Counter-based SplitMix64 stream.
//!
//! The n-th draw of a stream seeded with `s` is `mix(s + (n + 1) * GAMMA)`,
//! where `mix` is the SplitMix64 finalizer. Nothing else feeds the state, so
//! the stream is fully determined by `(seed, counter)` and is portable to any
//! language with wrapping 64-bit arithmetic.

use crate::error::{Error, Result};

use super::array::DenseArray;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    seed: u64,
    counter: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState { seed, counter: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent stream keyed by `(self.seed, stream)`. Does not advance `self`.
    pub fn derive(&self, stream: u64) -> RngState {
        RngState::new(mix(self.seed ^ mix(stream.wrapping_add(GAMMA))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.seed.wrapping_add(self.counter.wrapping_mul(GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)` by rejection, `n > 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Fisher–Yates, drawing from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Inverted dropout: in training, zero each entry with probability `rate`
/// and scale survivors by `1 / (1 - rate)`; identity otherwise.
pub fn dropout_apply(
    v: &DenseArray,
    rate: f64,
    rng: &mut RngState,
    training: bool,
) -> Result<DenseArray> {
    let mask = dropout_mask(v.len(), rate, rng, training)?;
    let mut out = v.clone();
    if let Some(mask) = mask {
        for (x, m) in out.values_mut().iter_mut().zip(&mask) {
            *x *= m;
        }
    }
    Ok(out)
}

/// Multiplicative mask used by [`dropout_apply`]; `None` means identity.
pub fn dropout_mask(
    len: usize,
    rate: f64,
    rng: &mut RngState,
    training: bool,
) -> Result<Option<Vec<f64>>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate must lie in [0, 1), got {}",
            rate
        )));
    }
    if !training || rate == 0.0 {
        return Ok(None);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok(Some(
        (0..len)
            .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
            .collect(),
    ))
}

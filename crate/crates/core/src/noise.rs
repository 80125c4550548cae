//! Reproducible Wiener increments.
//!
//! Each `(seed, stream_index)` pair owns an independent ChaCha stream, so a
//! trajectory's noise never depends on which thread runs it or in which
//! order. Finer time grids are obtained by Brownian-bridge refinement of the
//! coarse path, so a path at `dt / 2^r` passes through exactly the same points
//! as the path at `dt` on the coarse grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseSource {
    pub seed: u64,
    pub stream_index: u64,
    /// Number of Brownian-bridge halvings applied to the base path.
    pub refinement: u32,
}

impl NoiseSource {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self {
            seed,
            stream_index,
            refinement: 0,
        }
    }

    pub fn refined(self, levels: u32) -> Self {
        Self {
            refinement: self.refinement + levels,
            ..self
        }
    }

    fn rng(&self, level: u32) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..12].copy_from_slice(&level.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream_index);
        rng
    }

    /// `n_steps` increments of a standard Wiener process over steps of length
    /// `dt`. `n_steps` must be divisible by `2^refinement`.
    pub fn wiener_increments(&self, n_steps: usize, dt: f64) -> Result<Vec<f64>> {
        let factor = 1usize
            .checked_shl(self.refinement)
            .ok_or_else(|| Error::InvalidParameter("refinement level too large".into()))?;
        if n_steps % factor != 0 {
            return Err(Error::InvalidParameter(format!(
                "{n_steps} steps cannot be refined {} times",
                self.refinement
            )));
        }
        let mut h = dt * factor as f64;
        let mut rng = self.rng(0);
        let mut path: Vec<f64> = (0..n_steps / factor)
            .map(|_| h.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for level in 1..=self.refinement {
            let mut rng = self.rng(level);
            let half_sd = 0.5 * h.sqrt();
            path = path
                .into_iter()
                .flat_map(|w| {
                    let xi: f64 = rng.sample(StandardNormal);
                    let first = 0.5 * w + half_sd * xi;
                    [first, w - first]
                })
                .collect();
            h *= 0.5;
        }
        Ok(path)
    }
}

//! Counter-based random streams.
//!
//! Every replication draws from its own ChaCha20 stream: the key is expanded
//! from the master seed and the 64-bit stream id packs the scenario key and
//! replicate index, so the draws for one replication never depend on how
//! many other replications ran, or on which thread.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::stats::special::normal_quantile;

const REPLICATE_BITS: u32 = 40;

pub struct Substream {
    rng: ChaCha20Rng,
}

impl Substream {
    /// Panics if `replicate_index` does not fit in 40 bits.
    pub fn new(master_seed: u64, scenario_key: u64, replicate_index: u64) -> Self {
        assert!(
            replicate_index < 1 << REPLICATE_BITS,
            "replicate index {replicate_index} too large"
        );
        let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id(scenario_key, replicate_index));
        Substream { rng }
    }

    /// Uniform on the open interval (0, 1) with 53 bits of resolution.
    pub fn next_uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal deviate by inversion of one uniform.
    pub fn next_normal(&mut self) -> f64 {
        normal_quantile(self.next_uniform()).expect("uniform draw lies in (0, 1)")
    }
}

pub fn stream_id(scenario_key: u64, replicate_index: u64) -> u64 {
    (scenario_key << REPLICATE_BITS) | replicate_index
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_keys_reproduce_draws() {
        let mut a = Substream::new(7, 2, 19);
        let mut b = Substream::new(7, 2, 19);
        for _ in 0..100 {
            assert_eq!(a.next_uniform().to_bits(), b.next_uniform().to_bits());
        }
    }

    #[test]
    fn distinct_keys_give_distinct_streams() {
        let first = |s: &mut Substream| (0..4).map(|_| s.next_uniform()).collect::<Vec<_>>();
        let base = first(&mut Substream::new(7, 2, 19));
        assert_ne!(base, first(&mut Substream::new(7, 2, 20)));
        assert_ne!(base, first(&mut Substream::new(7, 3, 19)));
        assert_ne!(base, first(&mut Substream::new(8, 2, 19)));
        assert_ne!(stream_id(1, 0), stream_id(0, 1 << 39));
    }

    #[test]
    fn uniforms_stay_inside_unit_interval() {
        let mut s = Substream::new(0, 0, 0);
        let draws: Vec<f64> = (0..100_000).map(|_| s.next_uniform()).collect();
        assert!(draws.iter().all(|u| *u > 0.0 && *u < 1.0));
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((m - 0.5).abs() < 0.005);
    }

    #[test]
    fn normal_moments() {
        let mut s = Substream::new(11, 1, 0);
        let draws: Vec<f64> = (0..200_000).map(|_| s.next_normal()).collect();
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let v = draws.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!(m.abs() < 0.01);
        assert!((v - 1.0).abs() < 0.015);
    }
}

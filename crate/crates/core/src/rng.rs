//! Keyed, counter-based random streams.
//!
//! Every source of randomness in the crate (design draw, kernel noise,
//! bootstrap multipliers, partitions, simulated data) is a [`Stream`]
//! derived from an [`RngKey`]. A key packs the master seed, the stream kind
//! and a 128-bit stream index into the 256-bit key of a ChaCha8 generator,
//! so distinct keys give independent streams and the same key always
//! replays the same stream, no matter which thread asks for it or when.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

/// The role a stream plays. Each kind owns a disjoint key space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum StreamKind {
    Design = 1,
    KernelNoise = 2,
    BootstrapB = 3,
    BootstrapA = 4,
    Partition = 5,
    Simulation = 6,
    /// Kernel noise for the divide-and-conquer Hájek evaluations, kept apart
    /// from the noise of the main design.
    HajekNoise = 7,
}

impl StreamKind {
    pub const ALL: [StreamKind; 7] = [
        StreamKind::Design,
        StreamKind::KernelNoise,
        StreamKind::BootstrapB,
        StreamKind::BootstrapA,
        StreamKind::Partition,
        StreamKind::Simulation,
        StreamKind::HajekNoise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StreamKind::Design => "design",
            StreamKind::KernelNoise => "kernel_noise",
            StreamKind::BootstrapB => "bootstrap_B",
            StreamKind::BootstrapA => "bootstrap_A",
            StreamKind::Partition => "partition",
            StreamKind::Simulation => "simulation",
            StreamKind::HajekNoise => "hajek_noise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RngKey {
    pub master_seed: u64,
    pub kind: StreamKind,
    pub index: u128,
}

impl RngKey {
    pub fn new(master_seed: u64, kind: StreamKind, index: u128) -> Self {
        RngKey {
            master_seed,
            kind,
            index,
        }
    }

    /// Index built from a `(high, low)` pair, e.g. `(replicate, item)`.
    pub fn pair(master_seed: u64, kind: StreamKind, high: u64, low: u64) -> Self {
        RngKey::new(master_seed, kind, ((high as u128) << 64) | low as u128)
    }

    /// Same seed and kind, different index.
    pub fn with_index(self, index: u128) -> Self {
        RngKey { index, ..self }
    }

    pub fn with_kind(self, kind: StreamKind) -> Self {
        RngKey { kind, ..self }
    }

    fn seed_bytes(&self) -> [u8; 32] {
        let mut seed = [0u8; 32];
        seed[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8] = self.kind as u8;
        seed[16..32].copy_from_slice(&self.index.to_le_bytes());
        seed
    }
}

/// Derives the stream for `key`. Pure function of the key.
pub fn derive_stream(key: RngKey) -> Stream {
    Stream {
        inner: ChaCha8Rng::from_seed(key.seed_bytes()),
    }
}

/// A deterministic random stream.
#[derive(Debug, Clone)]
pub struct Stream {
    inner: ChaCha8Rng,
}

impl Stream {
    /// Uniform on `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform integer in `0..bound`; `bound` must be positive.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        // Lemire's nearly-divisionless method.
        let mut m = (self.inner.next_u64() as u128) * bound as u128;
        if (m as u64) < bound {
            let threshold = bound.wrapping_neg() % bound;
            while (m as u64) < threshold {
                m = (self.inner.next_u64() as u128) * bound as u128;
            }
        }
        (m >> 64) as u64
    }
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn draws(key: RngKey, k: usize) -> Vec<u64> {
        let mut s = derive_stream(key);
        (0..k).map(|_| s.next_u64()).collect()
    }

    #[test]
    fn same_key_same_stream() {
        let key = RngKey::new(42, StreamKind::Design, 7);
        assert_eq!(draws(key, 1000), draws(key, 1000));
    }

    #[test]
    fn index_changes_stream() {
        let a = RngKey::new(42, StreamKind::Design, 7);
        assert_ne!(draws(a, 1000), draws(a.with_index(8), 1000));
    }

    #[test]
    fn kinds_are_disjoint() {
        let first: Vec<u64> = StreamKind::ALL
            .iter()
            .map(|&k| derive_stream(RngKey::new(1, k, 0)).next_u64())
            .collect();
        for i in 0..first.len() {
            for j in i + 1..first.len() {
                assert_ne!(first[i], first[j]);
            }
        }
    }

    #[test]
    fn neighbouring_streams_are_uncorrelated() {
        // Correlation between uniform draws of streams 0 and 1.
        let m = 20_000;
        let mut a = derive_stream(RngKey::new(9, StreamKind::Simulation, 0));
        let mut b = derive_stream(RngKey::new(9, StreamKind::Simulation, 1));
        let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..m {
            let x = a.uniform();
            let y = b.uniform();
            sa += x;
            sb += y;
            sab += x * y;
            saa += x * x;
            sbb += y * y;
        }
        let mf = m as f64;
        let cov = sab / mf - sa * sb / (mf * mf);
        let corr = cov / libm::sqrt((saa / mf - (sa / mf).powi(2)) * (sbb / mf - (sb / mf).powi(2)));
        // 5 standard errors of a null correlation.
        assert!(corr.abs() < 5.0 / libm::sqrt(mf), "corr = {corr}");
    }

    #[test]
    fn below_stays_in_range_and_covers() {
        let mut s = derive_stream(RngKey::new(3, StreamKind::Partition, 0));
        let mut seen = [0usize; 7];
        for _ in 0..7000 {
            seen[s.below(7) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800 && c < 1200), "{seen:?}");
    }
}

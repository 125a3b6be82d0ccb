//! Deterministic pseudo-randomness for key expansion and experiments.
//!
//! Everything seeded in this crate goes through SplitMix64 (Vigna's
//! constants), so derived material is bit-exact across platforms and can be
//! checked against an independent reference implementation.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Finalizer of SplitMix64; also used standalone to hash stream indices.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64: fast, well-diffused, non-cryptographic.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in [0,1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64) / DEN
    }

    /// Uniform in (0,1]; safe as a logarithm argument.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        (((self.next_u64() >> 11) + 1) as f64) / DEN
    }

    /// +1.0 or -1.0 from the top bit of the next output.
    #[inline]
    pub fn next_sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Uniform in [0, bound) via modulo reduction.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }

    /// Standard normal pair via Box-Muller.
    pub fn next_gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        (r * theta.cos(), r * theta.sin())
    }

    /// In-place Fisher-Yates shuffle consuming successive outputs.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Independent stream for element `index` of a seeded family.
///
/// Streams for distinct indices are decorrelated regardless of how many
/// values each consumes, so parallel evaluation order cannot leak into
/// results.
pub fn derive_stream(master: u64, index: u64) -> SplitMix64 {
    SplitMix64::new(mix64(master ^ mix64(index ^ GOLDEN)))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference outputs computed by an independent scripted implementation
    // of the same constants.
    #[test]
    fn published_sequences() {
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xe220a8397b1dcdaf);
        assert_eq!(r.next_u64(), 0x6e789e6aa1b965f4);
        assert_eq!(r.next_u64(), 0x06c45d188009454f);

        let mut r = SplitMix64::new(1);
        assert_eq!(r.next_u64(), 0x910a2dec89025cc1);
        assert_eq!(r.next_u64(), 0xbeeb8da1658eec67);

        let mut r = SplitMix64::new(42);
        assert_eq!(r.next_u64(), 0xbdd732262feb6e95);
        assert_eq!(r.next_u64(), 0x28efe333b266f103);
    }

    #[test]
    fn uniform_golden() {
        let mut r = SplitMix64::new(42);
        assert_eq!(r.next_f64(), 0.7415648787718233);
        assert_eq!(r.next_f64(), 0.1599103928769201);
        assert_eq!(r.next_f64(), 0.27860113025513866);
    }

    #[test]
    fn stream_derivation_golden() {
        assert_eq!(derive_stream(7, 0).next_u64(), 0x7b39aca7052047da);
        assert_eq!(derive_stream(7, 1).next_u64(), 0x0985432a0be8650e);
        assert_eq!(derive_stream(7, 2).next_u64(), 0xbba157785536ae25);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut items: Vec<u32> = (0..100).collect();
        let mut r = SplitMix64::new(3);
        r.shuffle(&mut items);
        let mut sorted = items.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(items, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn gaussian_pair_is_finite_and_deterministic() {
        let mut a = SplitMix64::new(9);
        let mut b = SplitMix64::new(9);
        for _ in 0..1000 {
            let (x, y) = a.next_gaussian_pair();
            assert!(x.is_finite() && y.is_finite());
            assert_eq!((x, y), b.next_gaussian_pair());
        }
    }
}

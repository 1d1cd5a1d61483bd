//! Counter-based random number generation for reproducible synthesis.
//!
//! Every draw is a pure function of (key, counter): there is no mutable
//! generator state, so per-cell streams can be evaluated in any order and
//! from any thread while producing identical values. Keys are derived by
//! chaining the SplitMix64 finalizer over (seed, stream labels).

/// SplitMix64 finalizer: one round of strong 64-bit mixing.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A stateless stream of random values addressed by counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: mix(seed) }
    }

    /// Derives an independent child stream. Chaining `substream` calls with
    /// distinct labels yields streams that never share draws in practice.
    pub fn substream(&self, label: u64) -> Self {
        Self {
            key: mix(self.key ^ mix(label ^ 0xA076_1D64_78BD_642F)),
        }
    }

    #[inline]
    pub fn u64_at(&self, counter: u64) -> u64 {
        mix(self.key ^ mix(counter))
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn f64_at(&self, counter: u64) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.u64_at(counter) >> 11) as f64) / DEN
    }

    /// A pair of independent standard normals via Box-Muller.
    ///
    /// Consumes counters `2 * counter` and `2 * counter + 1` of the stream.
    pub fn gauss_pair_at(&self, counter: u64) -> (f64, f64) {
        let c = counter.wrapping_mul(2);
        // Shift u1 away from 0 so the logarithm is finite.
        const DEN: f64 = (1u64 << 53) as f64;
        let u1 = (((self.u64_at(c) >> 11) + 1) as f64) / (DEN + 1.0);
        let u2 = self.f64_at(c.wrapping_add(1));
        let r = (-2.0 * u1.ln()).sqrt();
        let phi = 2.0 * std::f64::consts::PI * u2;
        (r * phi.cos(), r * phi.sin())
    }

    #[inline]
    pub fn std_normal_at(&self, counter: u64) -> f64 {
        self.gauss_pair_at(counter).0
    }
}

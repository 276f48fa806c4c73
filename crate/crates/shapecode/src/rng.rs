//! Seeded pseudorandom numbers with pinned draw constructions.
//!
//! Scene generation and bootstrap resampling must replay bit-for-bit from an
//! integer seed on every platform, so the generator (splitmix64-expanded seed
//! feeding xoshiro256** draws) and the integer/Bernoulli constructions are
//! fixed here instead of delegated to a library whose stream could change
//! between versions.

const SPLITMIX64_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(SPLITMIX64_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// xoshiro256** generator, seeded by expanding a single integer through four
/// splitmix64 steps.
#[derive(Debug, Clone)]
pub struct Prng {
    state: [u64; 4],
}

impl Prng {
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = seed;
        let mut state = [0u64; 4];
        for word in &mut state {
            *word = splitmix64(&mut sm);
        }
        Prng { state }
    }

    /// Next raw 64-bit output; advances the state.
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Unbiased integer in `[lo, hi]` (inclusive) by rejection: with
    /// `span = hi - lo + 1`, draws are rejected while
    /// `u >= floor(2^64 / span) * span`, then mapped as `lo + u % span`.
    /// A span of 1 still consumes exactly one draw.
    pub fn uniform_int(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi, "uniform_int requires lo <= hi");
        let span = (hi.wrapping_sub(lo) as u64).wrapping_add(1);
        if span == 0 {
            // Full 64-bit range: every draw is acceptable.
            return lo.wrapping_add(self.next_u64() as i64);
        }
        let bound = ((1u128 << 64) / u128::from(span)) * u128::from(span);
        loop {
            let u = self.next_u64();
            if u128::from(u) < bound {
                return lo.wrapping_add((u % span) as i64);
            }
        }
    }

    /// Bernoulli trial: true with probability `prob`. Consumes exactly one
    /// draw regardless of `prob`; `prob = 0.0` is always false and
    /// `prob = 1.0` always true.
    pub fn bernoulli(&mut self, prob: f64) -> bool {
        debug_assert!((0.0..=1.0).contains(&prob));
        let u = self.next_u64();
        ((u >> 11) as f64) * (1.0 / (1u64 << 53) as f64) < prob
    }
}

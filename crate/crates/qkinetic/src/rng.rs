//! Counter-based pseudo-random generator.
//!
//! Each draw is a pure function of (seed, counter), so parallel or
//! out-of-order sampling cannot change the stream.

#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    pub seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed, counter: 0 }
    }

    /// Independent stream for a named sub-task.
    pub fn stream(&self, stream_id: u64) -> Self {
        CounterRng {
            seed: mix(self.seed ^ mix(stream_id)),
            counter: 0,
        }
    }

    /// Value at an absolute counter position, independent of call order.
    #[inline]
    pub fn u64_at(&self, counter: u64) -> u64 {
        mix(self.seed.wrapping_add(counter.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = self.u64_at(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform point on the unit sphere.
    pub fn next_unit_vector(&mut self) -> [f64; 3] {
        let z = self.next_in(-1.0, 1.0);
        let phi = self.next_in(0.0, 2.0 * std::f64::consts::PI);
        let r = (1.0 - z * z).max(0.0).sqrt();
        [r * phi.cos(), r * phi.sin(), z]
    }
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

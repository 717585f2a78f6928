//! Counter-based random streams.
//!
//! The generator is Philox4x32-10. A stream is identified by
//! `(master seed, module tag, trajectory index)`:
//!
//! * key = `(seed as u32, (seed >> 32) as u32)`
//! * counter = `(block_lo, block_hi, index as u32, (index >> 32) as u16 | tag << 16)`
//!
//! where `block` is a 64-bit block number starting at zero. Each block yields
//! four 32-bit words, consumed in order. A `u64` draw takes two consecutive
//! words with the first one as the high half. Uniforms are
//! `(u64 >> 11) * 2^-53` in `[0, 1)` and standard normals use the Marsaglia
//! polar method on `2u - 1`, caching the second variate. Any language with
//! 32-bit multiplies can reproduce the streams bit for bit.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

/// One Philox4x32-10 bijection.
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(W0);
            k[1] = k[1].wrapping_add(W1);
        }
        let p0 = u64::from(M0) * u64::from(ctr[0]);
        let p1 = u64::from(M1) * u64::from(ctr[2]);
        let (hi0, lo0) = ((p0 >> 32) as u32, p0 as u32);
        let (hi1, lo1) = ((p1 >> 32) as u32, p1 as u32);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

/// Module tags keep streams of different subsystems disjoint.
pub mod tag {
    pub const SSA: u16 = 1;
    pub const SDE_EIGEN: u16 = 2;
    pub const SDE_EDGE: u16 = 3;
    pub const WRIGHT_FISHER: u16 = 4;
    pub const SAMPLING: u16 = 5;
    pub const NETWORK: u16 = 6;
    pub const TEST: u16 = 0xFFFF;
}

/// Largest trajectory index representable in the counter layout.
pub const MAX_INDEX: u64 = (1 << 48) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub seed: u64,
    pub tag: u16,
    pub index: u64,
}

impl StreamId {
    pub fn new(seed: u64, tag: u16, index: u64) -> Self {
        assert!(
            index <= MAX_INDEX,
            "trajectory index {index} exceeds 48 bits"
        );
        Self { seed, tag, index }
    }

    /// Same seed and tag, different trajectory.
    pub fn with_index(self, index: u64) -> Self {
        Self::new(self.seed, self.tag, index)
    }

    pub fn with_tag(self, tag: u16) -> Self {
        Self::new(self.seed, tag, self.index)
    }
}

#[derive(Debug, Clone)]
pub struct Stream {
    key: [u32; 2],
    hi_words: [u32; 2],
    block: u64,
    buf: [u32; 4],
    pos: usize,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(id: StreamId) -> Self {
        Self {
            key: [id.seed as u32, (id.seed >> 32) as u32],
            hi_words: [
                id.index as u32,
                ((id.index >> 32) as u32 & 0xFFFF) | (u32::from(id.tag) << 16),
            ],
            block: 0,
            buf: [0; 4],
            pos: 4,
            spare: None,
        }
    }

    #[inline]
    pub fn next_u32(&mut self) -> u32 {
        if self.pos == 4 {
            let ctr = [
                self.block as u32,
                (self.block >> 32) as u32,
                self.hi_words[0],
                self.hi_words[1],
            ];
            self.buf = philox4x32_10(ctr, self.key);
            self.block += 1;
            self.pos = 0;
        }
        let w = self.buf[self.pos];
        self.pos += 1;
        w
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let hi = u64::from(self.next_u32());
        (hi << 32) | u64::from(self.next_u32())
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential with unit rate.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }

    /// Standard normal by the Marsaglia polar method.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * factor);
                return u * factor;
            }
        }
    }
}

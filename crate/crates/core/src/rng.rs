//! splitmix64 streams.
//!
//! Every random decision in a run comes from one of three labelled substreams
//! derived from the master seed, so the arrival trace does not depend on how
//! many loss draws were consumed and vice versa.

use serde::Serialize;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Substream {
    Arrivals,
    Loss,
    Service,
}

impl Substream {
    pub fn label(self) -> u64 {
        match self {
            Substream::Arrivals => 1,
            Substream::Loss => 2,
            Substream::Service => 3,
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    state: u64,
    substream: Option<Substream>,
}

impl RngStream {
    /// Raw generator seeded directly with `state`.
    pub fn from_state(state: u64) -> Self {
        RngStream { state, substream: None }
    }

    /// Substream seeded with the first splitmix64 output for
    /// `master ^ substream.label()`.
    pub fn substream(master: u64, substream: Substream) -> Self {
        let seed = RngStream::from_state(master ^ substream.label()).next_u64();
        RngStream { state: seed, substream: Some(substream) }
    }

    pub fn label(&self) -> Option<Substream> {
        self.substream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * TWO_POW_NEG_53
    }

    /// `floor(next_f64() * n)`; requires `n > 0`.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn next_in_range(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo + 1) as f64;
        lo + ((self.next_f64() * span) as u64).min(hi - lo)
    }
}

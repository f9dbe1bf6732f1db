//! Sense mode: summarise the displacement of successful fetches over a
//! window as a mean and a Gaussian tail-bound interval half-width, and
//! compare two such summaries for a shift in the popularity distribution.

use thiserror::Error;

pub const DEFAULT_CONFIDENCE: f64 = 0.95;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum SenseError {
    #[error("sense window has {count} successful fetches, at least 2 are needed")]
    InsufficientSamples { count: u64 },
}

/// Running sums over one sense window. Only successful fetches are recorded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SenseAccumulator {
    pub cumulative_disp: u64,
    pub cumulative_disp_sq: u64,
    pub count: u64,
    pub confidence: f64,
}

impl Default for SenseAccumulator {
    fn default() -> Self {
        Self::new(DEFAULT_CONFIDENCE)
    }
}

/// Mean displacement `u` and interval half-width `w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SenseStats {
    pub u: f64,
    pub w: f64,
}

impl SenseAccumulator {
    pub fn new(confidence: f64) -> Self {
        assert!(confidence > 0.0 && confidence < 1.0, "confidence must lie in (0, 1)");
        Self { cumulative_disp: 0, cumulative_disp_sq: 0, count: 0, confidence }
    }

    #[inline]
    pub fn record(&mut self, displacement: u32) {
        debug_assert!(displacement >= 1);
        let d = displacement as u64;
        self.count += 1;
        self.cumulative_disp += d;
        self.cumulative_disp_sq = self
            .cumulative_disp_sq
            .checked_add(d * d)
            .expect("squared displacement sum overflowed");
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.confidence);
    }

    pub fn finalize(&self) -> Result<SenseStats, SenseError> {
        let n = self.count;
        if n < 2 {
            return Err(SenseError::InsufficientSamples { count: n });
        }
        let nf = n as f64;
        let u = self.cumulative_disp as f64 / nf;
        // disp_sq/(n-1) - disp^2/(n(n-1)) over a common denominator; the
        // numerator is exact and never negative.
        let spread = (n as u128 * self.cumulative_disp_sq as u128).saturating_sub((self.cumulative_disp as u128).pow(2));
        let v = spread as f64 / (nf * (nf - 1.0));
        let w = (-2.0 * v * (1.0 - self.confidence).ln() / nf).sqrt();
        Ok(SenseStats { u, w })
    }
}

/// True when the two intervals are disjoint.
pub fn has_distribution_changed(baseline: SenseStats, current: SenseStats) -> bool {
    (baseline.u - current.u).abs() > baseline.w + current.w
}

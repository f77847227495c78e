//! Small numerical helpers shared across modules.

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Accumulates `ln Σ exp(xᵢ)` without overflow or underflow.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `exp(ln_value)`.
    pub fn add_ln(&mut self, ln_value: f64) {
        if ln_value == f64::NEG_INFINITY {
            return;
        }
        if ln_value <= self.max {
            self.scaled += (ln_value - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - ln_value).exp() + 1.0;
            self.max = ln_value;
        }
    }

    /// Adds `multiplicity · exp(ln_value)`.
    pub fn add_ln_weighted(&mut self, ln_value: f64, multiplicity: f64) {
        if multiplicity > 0.0 {
            self.add_ln(ln_value + multiplicity.ln());
        }
    }

    pub fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        self.add_ln_weighted(other.max, other.scaled);
    }

    pub fn ln_value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }

    pub fn value(&self) -> f64 {
        self.ln_value().exp()
    }
}

/// Relative slack used when a logarithmic weight is compared against a
/// threshold. Values within the slack count as "not below", so exact ties
/// (which occur whenever the threshold is a power of one of the weights)
/// are resolved the same way regardless of summation order.
pub const TIE_EPS: f64 = 1e-10;

/// `ln_value < ln_threshold`, with ties inside [`TIE_EPS`] resolved as false.
pub fn strictly_below(ln_value: f64, ln_threshold: f64) -> bool {
    ln_value < ln_threshold - TIE_EPS * ln_threshold.abs().max(1.0)
}

/// SplitMix64 finalizer; derives independent sub-seeds from `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        acc.add(-1.0);
        assert!((acc.value() - 1e-12).abs() < 1e-20);
    }

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let values = [-3.0_f64, 0.5, -700.0, 2.0];
        let mut acc = LogSumExp::new();
        for v in values {
            acc.add_ln(v);
        }
        let direct: f64 = values.iter().map(|v| v.exp()).sum();
        assert!((acc.value() - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn log_sum_exp_handles_underflowing_terms() {
        let mut acc = LogSumExp::new();
        acc.add_ln(-2000.0);
        acc.add_ln_weighted(-2000.0, 3.0);
        assert!((acc.ln_value() - (-2000.0 + 4.0_f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn ties_resolve_as_not_below() {
        let t = 7.0 * (1.0_f64 / 3.0).ln();
        let summed: f64 = (0..7).map(|_| (1.0_f64 / 3.0).ln()).sum();
        assert!(!strictly_below(summed, t));
        assert!(strictly_below(t - 1e-6, t));
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(9, 4), derive_seed(9, 4));
    }
}

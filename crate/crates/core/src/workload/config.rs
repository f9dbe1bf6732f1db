use super::WorkloadError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KeyPattern {
    /// Distinct 64-bit draws from the seeded generator.
    Random,
    /// `1..=initial_size`.
    Sequential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KeyOrder {
    /// Popularity ranks are a random permutation of insertion order.
    Random,
    /// Later-inserted keys are more popular.
    Sorted,
}

impl KeyPattern {
    pub fn code(self) -> u8 {
        match self {
            KeyPattern::Random => 0,
            KeyPattern::Sequential => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(KeyPattern::Random),
            1 => Some(KeyPattern::Sequential),
            _ => None,
        }
    }
}

impl KeyOrder {
    pub fn code(self) -> u8 {
        match self {
            KeyOrder::Random => 0,
            KeyOrder::Sorted => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(KeyOrder::Random),
            1 => Some(KeyOrder::Sorted),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadConfig {
    pub zipf: f64,
    pub initial_size: u64,
    pub operation_count: u64,
    pub fetch_proportion: f64,
    pub insert_proportion: f64,
    pub delete_proportion: f64,
    /// Operations between popularity shifts. Zero disables churn.
    pub dist_shift_freq: u64,
    /// Share of request mass (percent) replaced at each shift.
    pub dist_shift_prct: f64,
    pub key_pattern: KeyPattern,
    pub key_order: KeyOrder,
    pub random_seed: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            zipf: 1.0,
            initial_size: 1_000_000,
            operation_count: 100_000_000,
            fetch_proportion: 1.0,
            insert_proportion: 0.0,
            delete_proportion: 0.0,
            dist_shift_freq: 0,
            dist_shift_prct: 0.0,
            key_pattern: KeyPattern::Random,
            key_order: KeyOrder::Random,
            random_seed: 0,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |msg: String| Err(WorkloadError::InvalidConfig(msg));
        if !(self.zipf.is_finite() && self.zipf >= 0.0) {
            return bad(format!("zipf must be a non-negative number, got {}", self.zipf));
        }
        if self.initial_size == 0 {
            return bad("initial size must be at least 1".into());
        }
        let props = [self.fetch_proportion, self.insert_proportion, self.delete_proportion];
        if props.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad(format!("proportions must lie in [0, 1], got {props:?}"));
        }
        let sum: f64 = props.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("proportions must sum to 1, got {sum}"));
        }
        if !(0.0..=100.0).contains(&self.dist_shift_prct) {
            return bad(format!("dist shift percentage must lie in [0, 100], got {}", self.dist_shift_prct));
        }
        if self.key_pattern == KeyPattern::Random && self.initial_size > 1 << 40 {
            return bad("initial size too large for the random key pattern".into());
        }
        Ok(())
    }

    pub fn churn_enabled(&self) -> bool {
        self.dist_shift_freq > 0 && self.dist_shift_prct > 0.0
    }
}

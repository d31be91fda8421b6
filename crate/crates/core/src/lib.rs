//! Standard and learned Bloom filters, query workloads, and the experiments
//! that measure how a learned filter's false positive rate depends on the
//! query distribution.
//!
//! - [`bloom`]: the standard filter and its closed-form fill/fpp quantities
//! - [`model`]: scorers `f: key → [0, 1]` and a logistic trainer
//! - [`learned`]: the learned filter `(f, τ, backup)` and threshold sweeps
//! - [`workload`]: query distributions and the range example dataset
//! - [`eval`]: empirical and composite false positive rates, concentration
//!   experiments, size comparison

pub mod bloom;
pub mod error;
pub mod eval;
pub mod hexfloat;
pub mod keys;
pub mod learned;
pub mod model;
pub mod workload;

pub use bloom::{expected_fill_ratio, expected_fpp, params_for_target, BloomFilter, FilterParams};
pub use error::{Error, Result};
pub use keys::{derive_seed, int_key, key_to_int};
pub use learned::{build_learned, threshold_sweep, BackupSizing, LearnedBloomFilter, SweepPoint};
pub use model::{AnyScorer, ConstantScorer, FeatureMap, IntervalScorer, LogisticScorer, Scorer, TrainingSet};
pub use workload::{range_example, DistributionKind, QueryDistribution, RangeExample};

/// Anything that answers approximate membership queries.
pub trait MembershipFilter {
    fn contains(&self, key: &[u8]) -> bool;
}

impl MembershipFilter for BloomFilter {
    fn contains(&self, key: &[u8]) -> bool {
        BloomFilter::contains(self, key)
    }
}

impl<T: MembershipFilter + ?Sized> MembershipFilter for &T {
    fn contains(&self, key: &[u8]) -> bool {
        (**self).contains(key)
    }
}

/// Adapts a closure into a [`MembershipFilter`].
#[derive(Debug, Clone, Copy)]
pub struct Predicate<F>(pub F);

impl<F: Fn(&[u8]) -> bool> MembershipFilter for Predicate<F> {
    fn contains(&self, key: &[u8]) -> bool {
        (self.0)(key)
    }
}

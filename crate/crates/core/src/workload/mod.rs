//! Query distributions over integer keys, with a stored key set excluded by
//! rejection sampling.

pub mod io;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{param, Error, Result};
use crate::keys::derive_seed;
use crate::model::IntervalScorer;

/// Consecutive rejections after which sampling gives up.
pub const REJECTION_BUDGET: u64 = 1_000_000;

/// Shape of a query distribution, before exclusion.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionKind {
    /// Uniform over the half-open range `[lo, hi)`.
    UniformRange { lo: u64, hi: u64 },
    /// Pick a component with probability equal to its weight.
    Mixture(Vec<(f64, DistributionKind)>),
    /// Uniform over the listed keys, counting repeats.
    FixedSet(Vec<u64>),
}

impl DistributionKind {
    pub fn uniform(lo: u64, hi: u64) -> Result<Self> {
        let kind = DistributionKind::UniformRange { lo, hi };
        kind.validate()?;
        Ok(kind)
    }

    pub fn mixture(components: Vec<(f64, DistributionKind)>) -> Result<Self> {
        let kind = DistributionKind::Mixture(components);
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionKind::UniformRange { lo, hi } if lo >= hi => {
                param(format!("uniform range [{lo}, {hi}) is empty"))
            }
            DistributionKind::UniformRange { .. } => Ok(()),
            DistributionKind::FixedSet(keys) if keys.is_empty() => param("fixed query set is empty"),
            DistributionKind::FixedSet(_) => Ok(()),
            DistributionKind::Mixture(components) => {
                if components.is_empty() {
                    return param("mixture has no components");
                }
                let mut total = 0.0;
                for (w, c) in components {
                    if !(*w > 0.0 && w.is_finite()) {
                        return param(format!("mixture weight {w} must be positive"));
                    }
                    c.validate()?;
                    total += w;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return param(format!("mixture weights sum to {total}, not 1"));
                }
                Ok(())
            }
        }
    }

    fn draw_raw<R: Rng>(&self, rng: &mut R) -> u64 {
        match self {
            DistributionKind::UniformRange { lo, hi } => rng.random_range(*lo..*hi),
            DistributionKind::FixedSet(keys) => keys[rng.random_range(0..keys.len())],
            DistributionKind::Mixture(_) => unreachable!("mixtures pick a component first"),
        }
    }
}

/// `uniform:LO:HI`, `fixed:A,B,C`, or `mixture:W@SPEC|W@SPEC` (no nesting).
impl FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("bad distribution spec {s:?}"));
        let (tag, rest) = s.trim().split_once(':').ok_or_else(bad)?;
        let kind = match tag {
            "uniform" => {
                let (lo, hi) = rest.split_once(':').ok_or_else(bad)?;
                DistributionKind::UniformRange {
                    lo: lo.trim().parse().map_err(|_| bad())?,
                    hi: hi.trim().parse().map_err(|_| bad())?,
                }
            }
            "fixed" => DistributionKind::FixedSet(
                rest.split(',')
                    .map(|v| v.trim().parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?,
            ),
            "mixture" => DistributionKind::Mixture(
                rest.split('|')
                    .map(|part| {
                        let (w, spec) = part.split_once('@').ok_or_else(bad)?;
                        let w: f64 = w.trim().parse().map_err(|_| bad())?;
                        let inner: DistributionKind = spec.parse()?;
                        if matches!(inner, DistributionKind::Mixture(_)) {
                            return Err(bad());
                        }
                        Ok((w, inner))
                    })
                    .collect::<Result<_>>()?,
            ),
            _ => return Err(bad()),
        };
        kind.validate()?;
        Ok(kind)
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionKind::UniformRange { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
            DistributionKind::FixedSet(keys) => {
                f.write_str("fixed:")?;
                for (i, k) in keys.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{k}")?;
                }
                Ok(())
            }
            DistributionKind::Mixture(components) => {
                f.write_str("mixture:")?;
                for (i, (w, c)) in components.iter().enumerate() {
                    if i > 0 {
                        f.write_str("|")?;
                    }
                    write!(f, "{w}@{c}")?;
                }
                Ok(())
            }
        }
    }
}

/// A query distribution over keys outside an excluded set.
///
/// Mixture components apply the exclusion separately, so the overall law is
/// the weighted sum of each component conditioned on avoiding the exclusion.
#[derive(Debug, Clone)]
pub struct QueryDistribution {
    kind: DistributionKind,
    exclusion: Arc<HashSet<u64>>,
}

impl QueryDistribution {
    pub fn new(kind: DistributionKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self {
            kind,
            exclusion: Arc::new(HashSet::new()),
        })
    }

    pub fn uniform(lo: u64, hi: u64) -> Result<Self> {
        Self::new(DistributionKind::uniform(lo, hi)?)
    }

    pub fn excluding(mut self, keys: impl IntoIterator<Item = u64>) -> Self {
        self.exclusion = Arc::new(keys.into_iter().collect());
        self
    }

    pub fn with_exclusion(mut self, exclusion: Arc<HashSet<u64>>) -> Self {
        self.exclusion = exclusion;
        self
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn exclusion(&self) -> &HashSet<u64> {
        &self.exclusion
    }

    /// Draws one key not in the exclusion set.
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Result<u64> {
        let component = match &self.kind {
            DistributionKind::Mixture(components) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = &components[components.len() - 1].1;
                for (w, c) in components {
                    acc += w;
                    if u < acc {
                        chosen = c;
                        break;
                    }
                }
                chosen
            }
            kind => kind,
        };
        for _ in 0..REJECTION_BUDGET {
            let y = component.draw_raw(rng);
            if !self.exclusion.contains(&y) {
                return Ok(y);
            }
        }
        Err(Error::Workload(format!(
            "{REJECTION_BUDGET} consecutive rejections sampling {component}: exclusion covers the support"
        )))
    }

    /// `n` i.i.d. keys drawn with replacement; deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<u64>> {
        if n == 0 {
            return param("sample count must be at least 1");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }
}

/// The range dataset: 500 keys from the hot range `[1000, 2000]` and 500
/// keys from the rest of the universe `[0, 1000000)`.
#[derive(Debug, Clone)]
pub struct RangeExample {
    pub keys_in_range: Vec<u64>,
    pub keys_outside: Vec<u64>,
    pub seed: u64,
}

impl RangeExample {
    pub const UNIVERSE: (u64, u64) = (0, 1_000_000);
    /// Closed interval.
    pub const HOT_RANGE: (u64, u64) = (1000, 2000);
    pub const RESTRICTED: (u64, u64) = (0, 100_000);
    pub const PER_SIDE: usize = 500;
    pub const INSIDE_SCORE: f64 = 0.5;
    pub const OUTSIDE_SCORE: f64 = 0.0;
    pub const TAU: f64 = 0.4;

    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "range-example"));
        let (hot_lo, hot_hi) = Self::HOT_RANGE;
        let hot_len = (hot_hi - hot_lo + 1) as usize;
        let mut keys_in_range: Vec<u64> = index::sample(&mut rng, hot_len, Self::PER_SIDE)
            .into_iter()
            .map(|i| hot_lo + i as u64)
            .collect();
        keys_in_range.sort_unstable();

        let outside_len = (Self::UNIVERSE.1 - Self::UNIVERSE.0) as usize - hot_len;
        let mut keys_outside: Vec<u64> = index::sample(&mut rng, outside_len, Self::PER_SIDE)
            .into_iter()
            .map(|i| {
                let v = Self::UNIVERSE.0 + i as u64;
                if v >= hot_lo {
                    v + hot_len as u64
                } else {
                    v
                }
            })
            .collect();
        keys_outside.sort_unstable();

        Self {
            keys_in_range,
            keys_outside,
            seed,
        }
    }

    pub fn keys(&self) -> Vec<u64> {
        self.keys_in_range.iter().chain(&self.keys_outside).copied().collect()
    }

    pub fn key_set(&self) -> Arc<HashSet<u64>> {
        Arc::new(self.keys().into_iter().collect())
    }

    /// Scores 0.5 on the hot range and 0 elsewhere.
    pub fn scorer() -> IntervalScorer {
        IntervalScorer::new(vec![Self::HOT_RANGE], Self::INSIDE_SCORE, Self::OUTSIDE_SCORE)
            .expect("constant scorer parameters are valid")
    }

    /// Uniform over the whole universe minus the keys.
    pub fn full_range_queries(&self) -> QueryDistribution {
        QueryDistribution::uniform(Self::UNIVERSE.0, Self::UNIVERSE.1)
            .expect("non-empty universe")
            .with_exclusion(self.key_set())
    }

    /// Uniform over `[0, 100000)` minus the keys.
    pub fn restricted_queries(&self) -> QueryDistribution {
        QueryDistribution::uniform(Self::RESTRICTED.0, Self::RESTRICTED.1)
            .expect("non-empty range")
            .with_exclusion(self.key_set())
    }
}

/// The dataset, its interval scorer, and the threshold 0.4.
pub fn range_example(seed: u64) -> (RangeExample, IntervalScorer, f64) {
    (RangeExample::generate(seed), RangeExample::scorer(), RangeExample::TAU)
}

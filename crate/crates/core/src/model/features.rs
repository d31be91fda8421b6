use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use crate::error::{param, Error, Result};
use crate::keys::key_to_int;

/// Named, versioned deterministic encodings of a key as a feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMap {
    /// One feature, `key / universe_max`, in `[0, 1]` for integer keys.
    IntNormalized { universe_max: u64 },
    /// One feature, `2·key / universe_max − 1`, in `[−1, 1]` for integer keys.
    IntCentered { universe_max: u64 },
    /// `dims` buckets counting hashed byte n-grams, scaled by the n-gram count.
    ByteNgramHash { n: usize, dims: usize },
}

impl FeatureMap {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FeatureMap::IntNormalized { universe_max } | FeatureMap::IntCentered { universe_max }
                if universe_max == 0 =>
            {
                param("feature map universe_max must be positive")
            }
            FeatureMap::ByteNgramHash { n, dims } if n == 0 || dims == 0 => {
                param("byte n-gram feature map needs n >= 1 and dims >= 1")
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::IntNormalized { .. } | FeatureMap::IntCentered { .. } => 1,
            FeatureMap::ByteNgramHash { dims, .. } => *dims,
        }
    }

    pub fn name(&self) -> String {
        match self {
            FeatureMap::IntNormalized { universe_max } => format!("int-normalized/v1/{universe_max}"),
            FeatureMap::IntCentered { universe_max } => format!("int-centered/v1/{universe_max}"),
            FeatureMap::ByteNgramHash { n, dims } => format!("byte-ngram-hash/v1/{n}/{dims}"),
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let bad = || Error::Format(format!("unknown feature map {name:?}"));
        let parts: Vec<&str> = name.split('/').collect();
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad());
        let map = match parts.as_slice() {
            ["int-normalized", "v1", max] => FeatureMap::IntNormalized {
                universe_max: num(max)?,
            },
            ["int-centered", "v1", max] => FeatureMap::IntCentered {
                universe_max: num(max)?,
            },
            ["byte-ngram-hash", "v1", n, dims] => FeatureMap::ByteNgramHash {
                n: num(n)? as usize,
                dims: num(dims)? as usize,
            },
            _ => return Err(bad()),
        };
        map.validate().map_err(|_| bad())?;
        Ok(map)
    }

    /// Writes `dim()` features for `key` into `out`, replacing its contents.
    /// Integer maps encode non-integer keys as the zero vector.
    pub fn encode_into(&self, key: &[u8], out: &mut Vec<f64>) {
        out.clear();
        match *self {
            FeatureMap::IntNormalized { universe_max } => {
                out.push(key_to_int(key).map_or(0.0, |v| v as f64 / universe_max as f64));
            }
            FeatureMap::IntCentered { universe_max } => {
                out.push(key_to_int(key).map_or(0.0, |v| 2.0 * v as f64 / universe_max as f64 - 1.0));
            }
            FeatureMap::ByteNgramHash { n, dims } => {
                out.resize(dims, 0.0);
                if key.len() >= n {
                    let grams = key.len() - n + 1;
                    let unit = 1.0 / grams as f64;
                    for gram in key.windows(n) {
                        out[(xxh3_64(gram) % dims as u64) as usize] += unit;
                    }
                }
            }
        }
    }

    pub fn encode(&self, key: &[u8]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        self.encode_into(key, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::int_key;

    #[test]
    fn names_round_trip() {
        for map in [
            FeatureMap::IntNormalized {
                universe_max: 1_000_000,
            },
            FeatureMap::IntCentered { universe_max: 10 },
            FeatureMap::ByteNgramHash { n: 2, dims: 16 },
        ] {
            assert_eq!(FeatureMap::from_name(&map.name()).unwrap(), map);
        }
        assert!(FeatureMap::from_name("int-normalized/v2/10").is_err());
        assert!(FeatureMap::from_name("byte-ngram-hash/v1/0/4").is_err());
    }

    #[test]
    fn integer_maps() {
        let norm = FeatureMap::IntNormalized { universe_max: 1000 };
        assert_eq!(norm.encode(&int_key(250)), vec![0.25]);
        assert_eq!(norm.encode(b"not-int"), vec![0.0]);
        let centered = FeatureMap::IntCentered { universe_max: 1000 };
        assert_eq!(centered.encode(&int_key(1000)), vec![1.0]);
        assert_eq!(centered.encode(&int_key(0)), vec![-1.0]);
    }

    #[test]
    fn unigram_bag_ignores_order() {
        let map = FeatureMap::ByteNgramHash { n: 1, dims: 8 };
        assert_eq!(map.encode(b"ab"), map.encode(b"ba"));
        let sum: f64 = map.encode(b"hello").iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert_eq!(map.encode(b""), vec![0.0; 8]);
    }
}

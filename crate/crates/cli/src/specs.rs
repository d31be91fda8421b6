//! Text specs for scorers and query distributions given on the command line.

use std::fs;
use std::path::Path;

use lbf_core::model::{train_logistic, TrainConfig};
use lbf_core::workload::io::read_int_keys_text;
use lbf_core::{AnyScorer, ConstantScorer, DistributionKind, Error, FeatureMap, IntervalScorer, Result, TrainingSet};

/// How to obtain a scorer.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerSpec {
    Ready(AnyScorer),
    /// Train a logistic scorer on the stored keys against negatives.
    Logistic(FeatureMap),
}

fn bad(spec: &str) -> Error {
    Error::Parameter(format!("bad scorer spec {spec:?}"))
}

/// `interval:LO-HI[,LO-HI...]:INSIDE:OUTSIDE`, `constant:V`, `file:PATH`
/// (a scorer record), or `logistic:FEATURE_MAP`.
pub fn parse_scorer(spec: &str) -> Result<ScorerSpec> {
    let (tag, rest) = spec.split_once(':').ok_or_else(|| bad(spec))?;
    match tag {
        "interval" => {
            let parts: Vec<&str> = rest.split(':').collect();
            let [ranges, inside, outside] = parts.as_slice() else {
                return Err(bad(spec));
            };
            let intervals = if ranges.is_empty() {
                Vec::new()
            } else {
                ranges
                    .split(',')
                    .map(|r| {
                        let (lo, hi) = r.split_once('-').ok_or_else(|| bad(spec))?;
                        Ok((
                            lo.trim().parse().map_err(|_| bad(spec))?,
                            hi.trim().parse().map_err(|_| bad(spec))?,
                        ))
                    })
                    .collect::<Result<_>>()?
            };
            let inside = inside.parse().map_err(|_| bad(spec))?;
            let outside = outside.parse().map_err(|_| bad(spec))?;
            Ok(ScorerSpec::Ready(
                IntervalScorer::new(intervals, inside, outside)?.into(),
            ))
        }
        "constant" => Ok(ScorerSpec::Ready(
            ConstantScorer::new(rest.parse().map_err(|_| bad(spec))?)?.into(),
        )),
        "file" => Ok(ScorerSpec::Ready(AnyScorer::from_record(&fs::read_to_string(rest)?)?)),
        "logistic" => Ok(ScorerSpec::Logistic(
            FeatureMap::from_name(rest).map_err(|_| bad(spec))?,
        )),
        _ => Err(bad(spec)),
    }
}

impl ScorerSpec {
    pub fn resolve(
        self,
        positives: &[Vec<u8>],
        negatives: Option<&[Vec<u8>]>,
        train: &TrainConfig,
    ) -> Result<AnyScorer> {
        match self {
            ScorerSpec::Ready(s) => Ok(s),
            ScorerSpec::Logistic(map) => {
                let negatives =
                    negatives.ok_or_else(|| Error::Parameter("logistic scorer needs --negatives".into()))?;
                let data = TrainingSet::new(positives.to_vec(), negatives.to_vec())?;
                Ok(train_logistic(&data, map, train)?.scorer.into())
            }
        }
    }
}

/// A distribution spec, or `file:PATH` for a fixed set read from a text key
/// file.
pub fn parse_distribution(spec: &str) -> Result<DistributionKind> {
    match spec.strip_prefix("file:") {
        Some(path) => {
            let kind = DistributionKind::FixedSet(read_int_keys_text(fs::File::open(Path::new(path))?)?);
            kind.validate()?;
            Ok(kind)
        }
        None => spec.parse(),
    }
}

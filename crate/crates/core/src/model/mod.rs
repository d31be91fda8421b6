//! Learned scoring functions `f: keys → [0, 1]` used as the pre-filter of a
//! learned Bloom filter.

mod features;
mod train;

use std::collections::HashSet;
use std::fmt::Write as _;

pub use features::FeatureMap;
pub use train::{log_loss_gradient, train_logistic, TrainConfig, TrainOutcome};

use crate::error::{param, Error, Result};
use crate::hexfloat;
use crate::keys::{int_key, key_to_int};

/// Scores are clamped into `[δ, 1 − δ]` before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-9;

/// A deterministic, total scoring function with a measurable size.
pub trait Scorer {
    /// A value in `[0, 1]`.
    fn score(&self, key: &[u8]) -> f64;

    /// Representation size `|f|` in bits.
    fn size_bits(&self) -> u64;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score(&self, key: &[u8]) -> f64 {
        (**self).score(key)
    }

    fn size_bits(&self) -> u64 {
        (**self).size_bits()
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score(&self, key: &[u8]) -> f64 {
        (**self).score(key)
    }

    fn size_bits(&self) -> u64 {
        (**self).size_bits()
    }
}

fn check_unit(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        param(format!("{name} {value} outside [0, 1]"))
    }
}

/// Scores integer keys by membership in a set of closed intervals.
///
/// Keys that are not 8-byte integer encodings get `outside_score`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalScorer {
    intervals: Vec<(u64, u64)>,
    inside_score: f64,
    outside_score: f64,
}

impl IntervalScorer {
    pub fn new(mut intervals: Vec<(u64, u64)>, inside_score: f64, outside_score: f64) -> Result<Self> {
        check_unit("inside score", inside_score)?;
        check_unit("outside score", outside_score)?;
        if inside_score <= outside_score {
            return param("inside score must exceed outside score");
        }
        if let Some(&(lo, hi)) = intervals.iter().find(|(lo, hi)| lo > hi) {
            return param(format!("interval [{lo}, {hi}] is empty"));
        }
        intervals.sort_unstable();
        if let Some(w) = intervals.windows(2).find(|w| w[0].1 >= w[1].0) {
            return param(format!(
                "intervals [{}, {}] and [{}, {}] overlap",
                w[0].0, w[0].1, w[1].0, w[1].1
            ));
        }
        Ok(Self {
            intervals,
            inside_score,
            outside_score,
        })
    }

    pub fn intervals(&self) -> &[(u64, u64)] {
        &self.intervals
    }

    pub fn inside_score(&self) -> f64 {
        self.inside_score
    }

    pub fn outside_score(&self) -> f64 {
        self.outside_score
    }

    pub fn covers(&self, value: u64) -> bool {
        let idx = self.intervals.partition_point(|&(lo, _)| lo <= value);
        idx > 0 && value <= self.intervals[idx - 1].1
    }
}

impl Scorer for IntervalScorer {
    fn score(&self, key: &[u8]) -> f64 {
        match key_to_int(key) {
            Some(v) if self.covers(v) => self.inside_score,
            _ => self.outside_score,
        }
    }

    /// 128 bits per interval plus 128 for the two scores.
    fn size_bits(&self) -> u64 {
        128 * self.intervals.len() as u64 + 128
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid(w·φ(key) + b)` over a named feature map `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticScorer {
    weights: Vec<f64>,
    bias: f64,
    feature_map: FeatureMap,
}

impl LogisticScorer {
    pub fn new(weights: Vec<f64>, bias: f64, feature_map: FeatureMap) -> Result<Self> {
        feature_map.validate()?;
        if weights.len() != feature_map.dim() {
            return param(format!(
                "{} weights for a {}-dimensional feature map",
                weights.len(),
                feature_map.dim()
            ));
        }
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return param("logistic weights must be finite");
        }
        Ok(Self {
            weights,
            bias,
            feature_map,
        })
    }

    pub fn zeros(feature_map: FeatureMap) -> Result<Self> {
        let dim = feature_map.dim();
        Self::new(vec![0.0; dim], 0.0, feature_map)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn feature_map(&self) -> &FeatureMap {
        &self.feature_map
    }

    pub(crate) fn logit(&self, features: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(features)
            .fold(self.bias, |acc, (w, x)| acc + w * x)
    }
}

impl Scorer for LogisticScorer {
    fn score(&self, key: &[u8]) -> f64 {
        sigmoid(self.logit(&self.feature_map.encode(key)))
    }

    /// 64 bits per weight plus 64 for the bias.
    fn size_bits(&self) -> u64 {
        64 * self.weights.len() as u64 + 64
    }
}

/// Returns the same score for every key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantScorer(f64);

impl ConstantScorer {
    pub fn new(value: f64) -> Result<Self> {
        check_unit("constant score", value)?;
        Ok(Self(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl Scorer for ConstantScorer {
    fn score(&self, _key: &[u8]) -> f64 {
        self.0
    }

    fn size_bits(&self) -> u64 {
        64
    }
}

/// Closed set of serializable scorers.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyScorer {
    Interval(IntervalScorer),
    Logistic(LogisticScorer),
    Constant(ConstantScorer),
}

impl From<IntervalScorer> for AnyScorer {
    fn from(s: IntervalScorer) -> Self {
        AnyScorer::Interval(s)
    }
}

impl From<LogisticScorer> for AnyScorer {
    fn from(s: LogisticScorer) -> Self {
        AnyScorer::Logistic(s)
    }
}

impl From<ConstantScorer> for AnyScorer {
    fn from(s: ConstantScorer) -> Self {
        AnyScorer::Constant(s)
    }
}

impl Scorer for AnyScorer {
    fn score(&self, key: &[u8]) -> f64 {
        match self {
            AnyScorer::Interval(s) => s.score(key),
            AnyScorer::Logistic(s) => s.score(key),
            AnyScorer::Constant(s) => s.score(key),
        }
    }

    fn size_bits(&self) -> u64 {
        match self {
            AnyScorer::Interval(s) => s.size_bits(),
            AnyScorer::Logistic(s) => s.size_bits(),
            AnyScorer::Constant(s) => s.size_bits(),
        }
    }
}

impl AnyScorer {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyScorer::Interval(_) => "interval",
            AnyScorer::Logistic(_) => "logistic",
            AnyScorer::Constant(_) => "constant",
        }
    }

    /// Line-oriented tagged record. Reals are written as hex floats so the
    /// round trip is exact.
    pub fn to_record(&self) -> String {
        let mut out = format!("scorer {}\n", self.kind());
        match self {
            AnyScorer::Interval(s) => {
                let _ = writeln!(out, "inside {}", hexfloat::format(s.inside_score));
                let _ = writeln!(out, "outside {}", hexfloat::format(s.outside_score));
                for (lo, hi) in &s.intervals {
                    let _ = writeln!(out, "interval {lo} {hi}");
                }
            }
            AnyScorer::Logistic(s) => {
                let _ = writeln!(out, "feature_map {}", s.feature_map.name());
                let _ = writeln!(out, "bias {}", hexfloat::format(s.bias));
                for w in &s.weights {
                    let _ = writeln!(out, "weight {}", hexfloat::format(*w));
                }
            }
            AnyScorer::Constant(s) => {
                let _ = writeln!(out, "value {}", hexfloat::format(s.0));
            }
        }
        out
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Format(format!("scorer record: {msg}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let kind = match lines.next().and_then(|l| l.strip_prefix("scorer ")) {
            Some(kind) => kind.trim(),
            None => return Err(bad("missing `scorer <kind>` line".into())),
        };

        let mut inside = None;
        let mut outside = None;
        let mut intervals = Vec::new();
        let mut feature_map = None;
        let mut bias = None;
        let mut weights = Vec::new();
        let mut value = None;
        for line in lines {
            let (field, rest) = line.split_once(' ').unwrap_or((line, ""));
            let rest = rest.trim();
            match (kind, field) {
                ("interval", "inside") => inside = Some(hexfloat::parse(rest)?),
                ("interval", "outside") => outside = Some(hexfloat::parse(rest)?),
                ("interval", "interval") => {
                    let (lo, hi) = rest
                        .split_once(' ')
                        .ok_or_else(|| bad(format!("bad interval {rest:?}")))?;
                    let parse = |s: &str| s.trim().parse::<u64>().map_err(|_| bad(format!("bad bound {s:?}")));
                    intervals.push((parse(lo)?, parse(hi)?));
                }
                ("logistic", "feature_map") => feature_map = Some(FeatureMap::from_name(rest)?),
                ("logistic", "bias") => bias = Some(hexfloat::parse(rest)?),
                ("logistic", "weight") => weights.push(hexfloat::parse(rest)?),
                ("constant", "value") => value = Some(hexfloat::parse(rest)?),
                _ => return Err(bad(format!("unexpected line {line:?}"))),
            }
        }
        let missing = |f: &str| bad(format!("missing field {f}"));
        let reject = |e: Error| bad(e.to_string());
        let scorer = match kind {
            "interval" => IntervalScorer::new(
                intervals,
                inside.ok_or_else(|| missing("inside"))?,
                outside.ok_or_else(|| missing("outside"))?,
            )
            .map_err(reject)?
            .into(),
            "logistic" => LogisticScorer::new(
                weights,
                bias.ok_or_else(|| missing("bias"))?,
                feature_map.ok_or_else(|| missing("feature_map"))?,
            )
            .map_err(reject)?
            .into(),
            "constant" => ConstantScorer::new(value.ok_or_else(|| missing("value"))?)
                .map_err(reject)?
                .into(),
            other => return Err(bad(format!("unknown scorer kind {other:?}"))),
        };
        Ok(scorer)
    }
}

/// Labelled keys: positives are the stored set, negatives are known
/// non-members.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    positives: Vec<Vec<u8>>,
    negatives: Vec<Vec<u8>>,
}

impl TrainingSet {
    pub fn new(positives: Vec<Vec<u8>>, negatives: Vec<Vec<u8>>) -> Result<Self> {
        if positives.is_empty() {
            return param("training set needs at least one positive key");
        }
        let stored: HashSet<&[u8]> = positives.iter().map(Vec::as_slice).collect();
        if negatives.iter().any(|k| stored.contains(k.as_slice())) {
            return param("positive and negative keys overlap");
        }
        Ok(Self { positives, negatives })
    }

    pub fn from_int_keys(positives: &[u64], negatives: &[u64]) -> Result<Self> {
        let encode = |keys: &[u64]| keys.iter().map(|&k| int_key(k).to_vec()).collect();
        Self::new(encode(positives), encode(negatives))
    }

    pub fn positives(&self) -> &[Vec<u8>] {
        &self.positives
    }

    pub fn negatives(&self) -> &[Vec<u8>] {
        &self.negatives
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(key, label)` pairs, positives first.
    pub fn labelled(&self) -> impl Iterator<Item = (&[u8], bool)> {
        self.positives
            .iter()
            .map(|k| (k.as_slice(), true))
            .chain(self.negatives.iter().map(|k| (k.as_slice(), false)))
    }
}

#[inline]
pub(crate) fn point_loss(score: f64, positive: bool) -> f64 {
    let p = score.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
    if positive {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Cross-entropy `−Σ [y ln f(x) + (1 − y) ln(1 − f(x))]` with scores clamped
/// to `[δ, 1 − δ]`.
pub fn log_loss<S: Scorer + ?Sized>(scorer: &S, data: &TrainingSet) -> Result<f64> {
    if data.is_empty() {
        return param("log loss of an empty training set");
    }
    Ok(data
        .labelled()
        .map(|(key, positive)| point_loss(scorer.score(key), positive))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn range_scorer() -> IntervalScorer {
        IntervalScorer::new(vec![(1000, 2000)], 0.5, 0.0).unwrap()
    }

    #[test]
    fn interval_scores() {
        let s = range_scorer();
        assert_eq!(s.score(&int_key(1500)), 0.5);
        assert_eq!(s.score(&int_key(1000)), 0.5);
        assert_eq!(s.score(&int_key(2000)), 0.5);
        assert_eq!(s.score(&int_key(999)), 0.0);
        assert_eq!(s.score(&int_key(2001)), 0.0);
        assert_eq!(s.score(&int_key(5000)), 0.0);
        assert_eq!(s.score(b"text key"), 0.0);
    }

    #[test]
    fn interval_validation() {
        assert!(IntervalScorer::new(vec![(5, 4)], 0.5, 0.0).is_err());
        assert!(IntervalScorer::new(vec![(1, 5), (5, 9)], 0.5, 0.0).is_err());
        assert!(IntervalScorer::new(vec![], 0.2, 0.3).is_err());
        assert!(IntervalScorer::new(vec![], 1.5, 0.3).is_err());
        let s = IntervalScorer::new(vec![(20, 30), (1, 5)], 0.9, 0.1).unwrap();
        assert_eq!(s.intervals(), &[(1, 5), (20, 30)]);
        assert!(s.covers(25) && !s.covers(10));
    }

    #[test]
    fn zero_logistic_scores_half() {
        let s = LogisticScorer::zeros(FeatureMap::IntNormalized { universe_max: 100 }).unwrap();
        assert_eq!(s.score(&int_key(42)), 0.5);
        assert_eq!(s.score(b"anything"), 0.5);
        assert!(LogisticScorer::new(vec![f64::NAN], 0.0, FeatureMap::IntNormalized { universe_max: 1 }).is_err());
        assert!(LogisticScorer::new(vec![], 0.0, FeatureMap::IntNormalized { universe_max: 1 }).is_err());
    }

    #[test]
    fn size_accounting() {
        assert_eq!(range_scorer().size_bits(), 256);
        assert_eq!(IntervalScorer::new(vec![], 0.5, 0.0).unwrap().size_bits(), 128);
        let map = FeatureMap::ByteNgramHash { n: 2, dims: 10 };
        assert_eq!(LogisticScorer::zeros(map).unwrap().size_bits(), 704);
    }

    #[test]
    fn log_loss_values() {
        let data = TrainingSet::from_int_keys(&[1, 2, 3], &[10, 11]).unwrap();
        let half = ConstantScorer::new(0.5).unwrap();
        assert!((log_loss(&half, &data).unwrap() - 5.0 * LN_2).abs() < 1e-12);

        let perfect = IntervalScorer::new(vec![(1, 3)], 1.0, 0.0).unwrap();
        let loss = log_loss(&perfect, &data).unwrap();
        assert!(loss <= data.len() as f64 * 1e-8, "{loss}");

        let single = TrainingSet::from_int_keys(&[7], &[]).unwrap();
        let quarter = ConstantScorer::new(0.25).unwrap();
        assert!((log_loss(&quarter, &single).unwrap() - 1.386_294_361_119_890_6).abs() < 1e-12);
    }

    #[test]
    fn training_set_validation() {
        assert!(TrainingSet::from_int_keys(&[], &[1]).is_err());
        assert!(TrainingSet::from_int_keys(&[1, 2], &[2]).is_err());
    }

    #[test]
    fn records_round_trip() {
        let scorers: Vec<AnyScorer> = vec![
            range_scorer().into(),
            IntervalScorer::new(vec![], 0.7, 0.1).unwrap().into(),
            LogisticScorer::new(
                vec![0.1, -3.25e-7, 1e300],
                -0.3,
                FeatureMap::ByteNgramHash { n: 3, dims: 3 },
            )
            .unwrap()
            .into(),
            ConstantScorer::new(1.0 / 3.0).unwrap().into(),
        ];
        for s in scorers {
            let record = s.to_record();
            assert_eq!(AnyScorer::from_record(&record).unwrap(), s, "{record}");
        }
    }

    #[test]
    fn malformed_records_rejected() {
        for text in [
            "",
            "scorer tree\n",
            "scorer interval\ninside 0x1p-1\n",
            "scorer interval\ninside 0x1p-1\noutside 0x0p+0\ninterval 5\n",
            "scorer constant\nvalue 0x1p+1\n",
            "scorer logistic\nfeature_map int-normalized/v1/10\nbias 0x0p+0\n",
            "scorer constant\nweight 0x0p+0\n",
        ] {
            assert!(AnyScorer::from_record(text).is_err(), "{text:?}");
        }
    }

    proptest! {
        #[test]
        fn scores_stay_in_unit_interval(
            key in any::<u64>(),
            raw in proptest::collection::vec(any::<u8>(), 0..24),
            w in -1e3f64..1e3,
            b in -1e3f64..1e3,
        ) {
            let logistic = LogisticScorer::new(vec![w], b, FeatureMap::IntCentered { universe_max: 1 << 40 }).unwrap();
            let hashed = LogisticScorer::new(vec![w; 4], b, FeatureMap::ByteNgramHash { n: 2, dims: 4 }).unwrap();
            for s in [&logistic, &hashed] {
                for k in [&int_key(key)[..], &raw[..]] {
                    let v = s.score(k);
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            let v = range_scorer().score(&int_key(key));
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

//! Learned Bloom filter: a scorer `f`, a threshold `τ`, and a backup Bloom
//! filter holding the stored keys that score below `τ`.
//!
//! A query is positive when `f(y) ≥ τ`, or when `f(y) < τ` and the backup
//! filter reports it. Every stored key is therefore positive.

use serde::Serialize;

use crate::bloom::{expected_fpp, params_for_target, BloomFilter, FilterParams};
use crate::error::{param, Error, Result};
use crate::eval::model_fpr;
use crate::hexfloat;
use crate::keys::int_key;
use crate::model::{AnyScorer, Scorer};
use crate::workload::QueryDistribution;
use crate::MembershipFilter;

const MAGIC: &[u8; 4] = b"LLB1";

/// How to size the backup filter once the number of below-threshold keys is
/// known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BackupSizing {
    Params(FilterParams),
    /// Standard sizing for the backup's key count at this false positive
    /// probability.
    TargetFpp(f64),
}

impl BackupSizing {
    pub fn params_for(&self, backup_keys: u64) -> Result<FilterParams> {
        match *self {
            BackupSizing::Params(p) => {
                p.validate()?;
                Ok(p)
            }
            BackupSizing::TargetFpp(eps) => params_for_target(backup_keys.max(1), eps),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        param(format!("threshold {tau} outside [0, 1]"))
    }
}

#[derive(Debug, Clone)]
pub struct LearnedBloomFilter<S = AnyScorer> {
    scorer: S,
    threshold: f64,
    backup: BloomFilter,
    backup_params: FilterParams,
    key_count: u64,
    below_threshold_count: u64,
    inserted_count: u64,
}

/// Builds the filter over `keys` (treated as a set; duplicates are counted
/// again). The backup seed is `seed`.
pub fn build_learned<S: Scorer, K: AsRef<[u8]>>(
    keys: &[K],
    scorer: S,
    tau: f64,
    sizing: BackupSizing,
    seed: u64,
) -> Result<LearnedBloomFilter<S>> {
    if keys.is_empty() {
        return param("learned filter needs at least one key");
    }
    check_tau(tau)?;
    let below: Vec<&[u8]> = keys
        .iter()
        .map(AsRef::as_ref)
        .filter(|k| scorer.score(k) < tau)
        .collect();
    let backup_params = sizing.params_for(below.len() as u64)?;
    let mut backup = BloomFilter::with_params(&backup_params, seed)?;
    for key in &below {
        backup.insert(key);
    }
    Ok(LearnedBloomFilter {
        scorer,
        threshold: tau,
        backup,
        backup_params,
        key_count: keys.len() as u64,
        below_threshold_count: below.len() as u64,
        inserted_count: 0,
    })
}

impl<S: Scorer> LearnedBloomFilter<S> {
    pub fn scorer(&self) -> &S {
        &self.scorer
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn backup(&self) -> &BloomFilter {
        &self.backup
    }

    /// Parameters the backup was sized with, including its design target.
    pub fn backup_params(&self) -> &FilterParams {
        &self.backup_params
    }

    pub fn key_count(&self) -> u64 {
        self.key_count
    }

    pub fn below_threshold_count(&self) -> u64 {
        self.below_threshold_count
    }

    /// Keys added to the backup by [`insert`](Self::insert) after build.
    pub fn inserted_count(&self) -> u64 {
        self.inserted_count
    }

    /// Keys the backup holds: build-time below-threshold keys plus inserts.
    pub fn backup_keys(&self) -> u64 {
        self.below_threshold_count + self.inserted_count
    }

    #[inline]
    pub fn above_threshold(&self, key: &[u8]) -> bool {
        self.scorer.score(key) >= self.threshold
    }

    pub fn contains(&self, key: &[u8]) -> bool {
        self.above_threshold(key) || self.backup.contains(key)
    }

    /// Adds a key. Returns `true` when the backup was modified, which happens
    /// only if the key was not already positive.
    pub fn insert(&mut self, key: &[u8]) -> bool {
        if self.contains(key) {
            return false;
        }
        self.backup.insert(key);
        self.inserted_count += 1;
        true
    }

    /// `|f| + |B|`: scorer bits plus backup array bits, headers excluded.
    pub fn size_bits(&self) -> u64 {
        self.scorer.size_bits() + self.backup.m()
    }

    /// Closed-form backup false positive probability at the backup's current
    /// load.
    pub fn expected_backup_fpp(&self) -> f64 {
        expected_fpp(self.backup_keys(), self.backup.m(), self.backup.k()).expect("backup has m >= 1")
    }

    /// Ratio of the backup's current expected false positive probability to
    /// its design target. Values above 1 mean inserts have pushed it past the
    /// sizing point.
    pub fn backup_fpp_drift(&self) -> Option<f64> {
        self.backup_params
            .target_fpp
            .map(|target| self.expected_backup_fpp() / target)
    }
}

impl<S: Scorer> MembershipFilter for LearnedBloomFilter<S> {
    fn contains(&self, key: &[u8]) -> bool {
        LearnedBloomFilter::contains(self, key)
    }
}

fn put_chunk(out: &mut Vec<u8>, chunk: &[u8]) {
    out.extend_from_slice(&(chunk.len() as u64).to_le_bytes());
    out.extend_from_slice(chunk);
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(Error::Format("truncated learned filter".into()));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn chunk(&mut self) -> Result<&'a [u8]> {
        let len = usize::try_from(self.u64()?).map_err(|_| Error::Format("chunk length overflow".into()))?;
        self.take(len)
    }

    fn text(&mut self) -> Result<&'a str> {
        std::str::from_utf8(self.chunk()?).map_err(|_| Error::Format("chunk is not UTF-8".into()))
    }
}

impl LearnedBloomFilter<AnyScorer> {
    /// `LLB1`, then length-prefixed chunks (u64 LE lengths): scorer record,
    /// threshold as a hex float, the backup's design target as a hex float
    /// (empty if none), and the backup filter bytes; the three counts sit
    /// between the target and the backup as fixed u64 LE fields.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        put_chunk(&mut out, self.scorer.to_record().as_bytes());
        put_chunk(&mut out, hexfloat::format(self.threshold).as_bytes());
        let target = self.backup_params.target_fpp.map(hexfloat::format).unwrap_or_default();
        put_chunk(&mut out, target.as_bytes());
        for count in [self.key_count, self.below_threshold_count, self.inserted_count] {
            out.extend_from_slice(&count.to_le_bytes());
        }
        put_chunk(&mut out, &self.backup.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if !bytes.starts_with(MAGIC) {
            return Err(Error::Format("missing LLB1 learned filter header".into()));
        }
        let mut r = Reader(&bytes[4..]);
        let scorer = AnyScorer::from_record(r.text()?)?;
        let threshold = hexfloat::parse(r.text()?)?;
        check_tau(threshold).map_err(|e| Error::Format(e.to_string()))?;
        let target = match r.text()? {
            "" => None,
            t => Some(hexfloat::parse(t)?),
        };
        let key_count = r.u64()?;
        let below_threshold_count = r.u64()?;
        let inserted_count = r.u64()?;
        let backup = BloomFilter::from_bytes(r.chunk()?)?;
        if !r.0.is_empty() {
            return Err(Error::Format("trailing bytes after learned filter".into()));
        }
        if below_threshold_count > key_count {
            return Err(Error::Format("below-threshold count exceeds key count".into()));
        }
        Ok(Self {
            scorer,
            threshold,
            backup_params: FilterParams {
                m: backup.m(),
                k: backup.k(),
                target_fpp: target,
            },
            backup,
            key_count,
            below_threshold_count,
            inserted_count,
        })
    }
}

/// One threshold candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub tau: f64,
    /// Fraction of sampled queries scoring at least `tau`.
    pub alpha_estimate: f64,
    pub backup_keys: u64,
    pub scorer_bits: u64,
    pub backup_bits: u64,
    pub total_bits: u64,
    /// Closed-form backup false positive probability at the chosen size.
    pub backup_fpr: f64,
    pub model_fpr: f64,
}

/// Evaluates each threshold against one shared query sample, so `alpha` is
/// non-increasing and the backup key count non-decreasing along a sorted grid.
pub fn threshold_sweep<S: Scorer, K: AsRef<[u8]>>(
    keys: &[K],
    scorer: &S,
    taus: &[f64],
    dist: &QueryDistribution,
    samples: usize,
    sizing: BackupSizing,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if taus.is_empty() {
        return param("threshold grid is empty");
    }
    for &tau in taus {
        check_tau(tau)?;
    }
    let query_scores: Vec<f64> = dist
        .sample(samples, seed)?
        .into_iter()
        .map(|y| scorer.score(&int_key(y)))
        .collect();
    let key_scores: Vec<f64> = keys.iter().map(|k| scorer.score(k.as_ref())).collect();
    let scorer_bits = scorer.size_bits();

    taus.iter()
        .map(|&tau| {
            let above = query_scores.iter().filter(|&&s| s >= tau).count();
            let alpha = above as f64 / samples as f64;
            let backup_keys = key_scores.iter().filter(|&&s| s < tau).count() as u64;
            let params = sizing.params_for(backup_keys)?;
            let backup_fpr = expected_fpp(backup_keys, params.m, params.k)?;
            Ok(SweepPoint {
                tau,
                alpha_estimate: alpha,
                backup_keys,
                scorer_bits,
                backup_bits: params.m,
                total_bits: scorer_bits + params.m,
                backup_fpr,
                model_fpr: model_fpr(alpha, backup_fpr),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::encode_int_keys;
    use crate::model::{ConstantScorer, IntervalScorer};
    use crate::workload::{range_example, RangeExample};

    fn range_filter(seed: u64) -> (RangeExample, LearnedBloomFilter<IntervalScorer>) {
        let (ex, scorer, tau) = range_example(seed);
        let keys = encode_int_keys(&ex.keys());
        let lbf = build_learned(&keys, scorer, tau, BackupSizing::TargetFpp(0.0002), seed).unwrap();
        (ex, lbf)
    }

    #[test]
    fn backup_holds_exactly_the_outside_keys() {
        let (ex, lbf) = range_filter(1);
        assert_eq!(lbf.below_threshold_count(), 500);
        assert_eq!(lbf.backup().inserted_count(), 500);
        assert_eq!(lbf.key_count(), 1000);
        for k in ex.keys() {
            assert!(lbf.contains(&int_key(k)));
        }
        assert!(lbf.contains(&int_key(1500)));
        assert!(lbf.above_threshold(&int_key(1500)));
    }

    #[test]
    fn far_query_is_negative_unless_backup_collides() {
        let (_, lbf) = range_filter(1);
        let probe = int_key(900_000);
        assert!(!lbf.above_threshold(&probe));
        assert_eq!(lbf.contains(&probe), lbf.backup().contains(&probe));
        assert!(!lbf.contains(&probe));
    }

    #[test]
    fn threshold_extremes() {
        let keys = encode_int_keys(&[1500, 1600, 5000]);
        let scorer = RangeExample::scorer();
        let none = build_learned(&keys, &scorer, 0.0, BackupSizing::TargetFpp(0.01), 0).unwrap();
        assert_eq!(none.below_threshold_count(), 0);
        let all = build_learned(&keys, &scorer, 1.0, BackupSizing::TargetFpp(0.01), 0).unwrap();
        assert_eq!(all.below_threshold_count(), 3);
        assert!(build_learned(&keys, &scorer, 1.0 + 1e-9, BackupSizing::TargetFpp(0.01), 0).is_err());
        assert!(build_learned(&keys, &scorer, f64::NAN, BackupSizing::TargetFpp(0.01), 0).is_err());
        let empty: [[u8; 8]; 0] = [];
        assert!(build_learned(&empty, &scorer, 0.5, BackupSizing::TargetFpp(0.01), 0).is_err());
        let zero_m = FilterParams {
            m: 0,
            k: 1,
            target_fpp: None,
        };
        assert!(build_learned(&keys, &scorer, 0.5, BackupSizing::Params(zero_m), 0).is_err());
    }

    #[test]
    fn tie_counts_as_positive() {
        let keys = encode_int_keys(&[7]);
        let lbf = build_learned(
            &keys,
            ConstantScorer::new(0.5).unwrap(),
            0.5,
            BackupSizing::TargetFpp(0.1),
            0,
        )
        .unwrap();
        assert_eq!(lbf.below_threshold_count(), 0);
        assert!(lbf.contains(&int_key(123)));
    }

    #[test]
    fn insert_semantics() {
        let (_, mut lbf) = range_filter(2);
        assert!(!lbf.insert(&int_key(1234)));
        assert_eq!(lbf.inserted_count(), 0);
        let fresh = int_key(777_777);
        assert!(!lbf.contains(&fresh));
        assert!(lbf.insert(&fresh));
        assert!(lbf.contains(&fresh));
        assert!(!lbf.insert(&fresh));
        assert_eq!(lbf.inserted_count(), 1);
        assert_eq!(lbf.backup_keys(), 501);
    }

    #[test]
    fn inserts_raise_drift() {
        let (_, mut lbf) = range_filter(3);
        let before = lbf.backup_fpp_drift().unwrap();
        assert!(before <= 1.1, "{before}");
        for y in 0..2000u64 {
            lbf.insert(&int_key(10_000_000 + y));
        }
        assert!(lbf.backup_fpp_drift().unwrap() > 10.0 * before);
    }

    #[test]
    fn size_is_scorer_plus_backup_bits() {
        let keys = encode_int_keys(&[5000]);
        let params = FilterParams::new(1000, 3).unwrap();
        let lbf = build_learned(&keys, RangeExample::scorer(), 0.4, BackupSizing::Params(params), 0).unwrap();
        assert_eq!(lbf.size_bits(), 1256);
    }

    #[test]
    fn serialization_round_trip() {
        let (_, lbf) = range_filter(4);
        let lbf = LearnedBloomFilter {
            scorer: AnyScorer::from(lbf.scorer.clone()),
            threshold: lbf.threshold,
            backup: lbf.backup.clone(),
            backup_params: lbf.backup_params,
            key_count: lbf.key_count,
            below_threshold_count: lbf.below_threshold_count,
            inserted_count: lbf.inserted_count,
        };
        let bytes = lbf.to_bytes();
        let back = LearnedBloomFilter::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.scorer(), lbf.scorer());
        assert_eq!(back.backup(), lbf.backup());
        assert_eq!(back.backup_params(), lbf.backup_params());
        assert!(LearnedBloomFilter::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(LearnedBloomFilter::from_bytes(&bytes[4..]).is_err());
    }

    #[test]
    fn sweep_basics() {
        let (ex, scorer, _) = range_example(5);
        let keys = encode_int_keys(&ex.keys());
        let dist = ex.full_range_queries();
        let points = threshold_sweep(&keys, &scorer, &[0.0], &dist, 1000, BackupSizing::TargetFpp(0.01), 1).unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].alpha_estimate, 1.0);
        assert_eq!(points[0].backup_keys, 0);
        assert_eq!(points[0].backup_fpr, 0.0);

        let points = threshold_sweep(
            &keys,
            &scorer,
            &[0.0, 0.5, 1.0],
            &dist,
            1000,
            BackupSizing::TargetFpp(0.01),
            1,
        )
        .unwrap();
        assert_eq!(points[2].alpha_estimate, 0.0);
        assert_eq!(points[2].backup_keys, 1000);
        assert_eq!(points[1].backup_keys, 500);
        for p in &points {
            assert_eq!(p.total_bits, p.scorer_bits + p.backup_bits);
            assert!((p.model_fpr - model_fpr(p.alpha_estimate, p.backup_fpr)).abs() < 1e-15);
        }

        assert!(threshold_sweep(&keys, &scorer, &[], &dist, 10, BackupSizing::TargetFpp(0.01), 1).is_err());
        assert!(threshold_sweep(&keys, &scorer, &[1.5], &dist, 10, BackupSizing::TargetFpp(0.01), 1).is_err());
    }
}

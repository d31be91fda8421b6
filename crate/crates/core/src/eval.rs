//! False positive rates on query distributions, the concentration
//! experiments, and size comparison against a standard filter.
//!
//! All experiments are seeded; trials derive their own seeds from the
//! experiment seed and run in parallel, so results do not depend on thread
//! scheduling.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bloom::{expected_fill_ratio, params_for_target, BloomFilter};
use crate::error::{param, Error, Result};
use crate::keys::{derive_indexed_seed, derive_seed, int_key};
use crate::learned::LearnedBloomFilter;
use crate::model::Scorer;
use crate::workload::{DistributionKind, QueryDistribution};
use crate::MembershipFilter;

/// Report schema tag embedded in every serialized report.
pub const REPORT_SCHEMA: &str = "lbf-report/1";

/// Largest support the enumeration oracle will walk.
pub const MAX_ENUMERATION: u64 = 10_000_000;

/// Positives divided by the number of queries. The caller guarantees the
/// queries avoid the stored key set.
pub fn empirical_fpr<F, K>(filter: &F, queries: &[K]) -> Result<f64>
where
    F: MembershipFilter + ?Sized,
    K: AsRef<[u8]>,
{
    if queries.is_empty() {
        return param("empirical false positive rate needs at least one query");
    }
    let positives = queries.iter().filter(|q| filter.contains(q.as_ref())).count();
    Ok(positives as f64 / queries.len() as f64)
}

fn count_int_positives<F: MembershipFilter + ?Sized>(filter: &F, queries: &[u64]) -> usize {
    queries.iter().filter(|&&y| filter.contains(&int_key(y))).count()
}

/// `α + (1 − α)·β`.
#[inline]
pub fn model_fpr(alpha: f64, backup_fpr: f64) -> f64 {
    alpha + (1.0 - alpha) * backup_fpr
}

pub fn binomial_std_err(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `N² / Σ c_i²` over the multiplicities `c_i` of distinct queries: the number
/// of independent outcomes a query multiset carries when repeated queries
/// share one answer. Equals `N` for distinct queries.
pub fn effective_query_count(queries: &[u64]) -> f64 {
    if queries.is_empty() {
        return 0.0;
    }
    let mut sorted = queries.to_vec();
    sorted.sort_unstable();
    let sum_sq: f64 = sorted
        .chunk_by(|a, b| a == b)
        .map(|run| (run.len() as f64).powi(2))
        .sum();
    (queries.len() as f64).powi(2) / sum_sq
}

/// Fails if any query is a stored key.
pub fn check_disjoint(queries: &[u64], keys: &HashSet<u64>) -> Result<()> {
    match queries.iter().find(|q| keys.contains(q)) {
        Some(q) => Err(Error::Workload(format!("query {q} is a stored key"))),
        None => Ok(()),
    }
}

/// Exact above-threshold mass of a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactAlpha {
    pub value: f64,
    /// Above-threshold support elements, for single-component supports.
    pub above: Option<u64>,
    /// Support size after exclusion, for single-component supports.
    pub support: Option<u64>,
}

fn exact_component<S: Scorer + Sync>(
    scorer: &S,
    tau: f64,
    kind: &DistributionKind,
    exclusion: &HashSet<u64>,
) -> Result<ExactAlpha> {
    let (above, support) = match kind {
        DistributionKind::UniformRange { lo, hi } => {
            if hi - lo > MAX_ENUMERATION {
                return Err(Error::OracleUnavailable(format!(
                    "support of {} keys exceeds {MAX_ENUMERATION}",
                    hi - lo
                )));
            }
            let excluded = exclusion.iter().filter(|y| (*lo..*hi).contains(*y)).count() as u64;
            let above = (*lo..*hi)
                .into_par_iter()
                .filter(|y| !exclusion.contains(y) && scorer.score(&int_key(*y)) >= tau)
                .count() as u64;
            (above, hi - lo - excluded)
        }
        DistributionKind::FixedSet(keys) => {
            if keys.len() as u64 > MAX_ENUMERATION {
                return Err(Error::OracleUnavailable("fixed set too large".into()));
            }
            let eligible = keys.iter().filter(|y| !exclusion.contains(y));
            let support = eligible.clone().count() as u64;
            let above = eligible.filter(|y| scorer.score(&int_key(**y)) >= tau).count() as u64;
            (above, support)
        }
        DistributionKind::Mixture(components) => {
            let mut value = 0.0;
            for (w, c) in components {
                value += w * exact_component(scorer, tau, c, exclusion)?.value;
            }
            return Ok(ExactAlpha {
                value,
                above: None,
                support: None,
            });
        }
    };
    if support == 0 {
        return Err(Error::Workload(format!("{kind} has no support after exclusion")));
    }
    Ok(ExactAlpha {
        value: above as f64 / support as f64,
        above: Some(above),
        support: Some(support),
    })
}

/// `Pr_{y∼dist}(f(y) ≥ τ)` by enumerating the finite integer support.
pub fn exact_alpha<S: Scorer + Sync>(scorer: &S, tau: f64, dist: &QueryDistribution) -> Result<ExactAlpha> {
    exact_component(scorer, tau, dist.kind(), dist.exclusion())
}

/// Source of `F(B)` in the composite rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackupFpr {
    /// `ρ^k` of the instantiated backup bit array.
    #[default]
    Measured,
    /// `E[ρ]^k` from the backup's size and key count.
    Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub schema: &'static str,
    pub empirical_fpr: f64,
    pub false_positives: u64,
    pub sample_count: u64,
    /// Fraction of the queries scoring at or above the threshold.
    pub alpha_estimate: f64,
    pub alpha_exact: Option<f64>,
    pub backup_fpr_estimate: f64,
    pub backup_fpr_source: BackupFpr,
    /// `alpha_estimate + (1 − alpha_estimate)·backup_fpr_estimate`.
    pub model_fpr: f64,
    pub binomial_std_err: f64,
    /// See [`effective_query_count`].
    pub effective_queries: f64,
    /// Standard error over filter instantiations with repeated queries
    /// counted once: `sqrt(p(1 − p) / effective_queries)`.
    pub effective_std_err: f64,
    pub seed: u64,
}

impl EvalReport {
    /// Checks the stored composite rate against its components.
    pub fn is_consistent(&self) -> bool {
        (self.model_fpr - model_fpr(self.alpha_estimate, self.backup_fpr_estimate)).abs() <= 1e-12
    }
}

/// Evaluates a learned filter on the given integer queries.
pub fn evaluate_learned_on<S: Scorer>(
    lbf: &LearnedBloomFilter<S>,
    queries: &[u64],
    source: BackupFpr,
    seed: u64,
) -> Result<EvalReport> {
    if queries.is_empty() {
        return param("evaluation needs at least one query");
    }
    let n = queries.len();
    let mut above = 0u64;
    let mut positives = 0u64;
    for &y in queries {
        let key = int_key(y);
        if lbf.above_threshold(&key) {
            above += 1;
            positives += 1;
        } else if lbf.backup().contains(&key) {
            positives += 1;
        }
    }
    let empirical = positives as f64 / n as f64;
    let alpha = above as f64 / n as f64;
    let effective_queries = effective_query_count(queries);
    let backup_fpr = match source {
        BackupFpr::Measured => lbf.backup().current_fpp(),
        BackupFpr::Expected => lbf.expected_backup_fpp(),
    };
    Ok(EvalReport {
        schema: REPORT_SCHEMA,
        empirical_fpr: empirical,
        false_positives: positives,
        sample_count: n as u64,
        alpha_estimate: alpha,
        alpha_exact: None,
        backup_fpr_estimate: backup_fpr,
        backup_fpr_source: source,
        model_fpr: model_fpr(alpha, backup_fpr),
        binomial_std_err: binomial_std_err(empirical, n),
        effective_queries,
        effective_std_err: (empirical * (1.0 - empirical) / effective_queries).sqrt(),
        seed,
    })
}

/// Samples `samples` queries from `dist` and evaluates. The exact alpha is
/// attached when the support is small enough to enumerate.
pub fn evaluate_learned<S: Scorer + Sync>(
    lbf: &LearnedBloomFilter<S>,
    dist: &QueryDistribution,
    samples: usize,
    source: BackupFpr,
    seed: u64,
) -> Result<EvalReport> {
    let queries = dist.sample(samples, derive_seed(seed, "eval-queries"))?;
    let mut report = evaluate_learned_on(lbf, &queries, source, seed)?;
    report.alpha_exact = match exact_alpha(lbf.scorer(), lbf.threshold(), dist) {
        Ok(exact) => Some(exact.value),
        Err(Error::OracleUnavailable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(report)
}

/// A standard filter evaluated as a learned filter with `α = 0`.
pub fn evaluate_standard_on(filter: &BloomFilter, queries: &[u64], seed: u64) -> Result<EvalReport> {
    if queries.is_empty() {
        return param("evaluation needs at least one query");
    }
    let n = queries.len();
    let positives = count_int_positives(filter, queries) as u64;
    let empirical = positives as f64 / n as f64;
    let backup_fpr = filter.current_fpp();
    let effective_queries = effective_query_count(queries);
    Ok(EvalReport {
        schema: REPORT_SCHEMA,
        empirical_fpr: empirical,
        false_positives: positives,
        sample_count: n as u64,
        alpha_estimate: 0.0,
        alpha_exact: Some(0.0),
        backup_fpr_estimate: backup_fpr,
        backup_fpr_source: BackupFpr::Measured,
        model_fpr: model_fpr(0.0, backup_fpr),
        binomial_std_err: binomial_std_err(empirical, n),
        effective_queries,
        effective_std_err: (empirical * (1.0 - empirical) / effective_queries).sqrt(),
        seed,
    })
}

pub fn evaluate_standard(
    filter: &BloomFilter,
    dist: &QueryDistribution,
    samples: usize,
    seed: u64,
) -> Result<EvalReport> {
    let queries = dist.sample(samples, derive_seed(seed, "eval-queries"))?;
    evaluate_standard_on(filter, &queries, seed)
}

/// `2e^{−ε²t/4} + 2e^{−ε²q/4}`: the explicit Chernoff bound on
/// `Pr(|X − Y| ≥ ε)` for empirical rates over `t` and `q` samples.
pub fn chernoff_bound(epsilon: f64, t_size: usize, q_size: usize) -> f64 {
    let term = |n: usize| 2.0 * (-epsilon * epsilon * n as f64 / 4.0).exp();
    term(t_size) + term(q_size)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub schema: &'static str,
    pub epsilon: f64,
    pub trials: u64,
    pub t_size: u64,
    pub q_size: u64,
    pub exceed_count: u64,
    /// Fraction of trials with `|X − Y| ≥ ε`.
    pub exceed_fraction: f64,
    pub chernoff_bound: f64,
    pub mean_test_fpr: f64,
    pub mean_query_fpr: f64,
    pub seed: u64,
}

/// Per trial, draws a test set of `t_size` and a query set of `q_size` keys
/// from `dist` (with replacement) and compares their empirical rates.
pub fn concentration_experiment<F: MembershipFilter + Sync + ?Sized>(
    filter: &F,
    dist: &QueryDistribution,
    t_size: usize,
    q_size: usize,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    if trials == 0 || t_size == 0 || q_size == 0 {
        return param("trials, test size and query size must be at least 1");
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return param(format!("epsilon {epsilon} outside (0, 1)"));
    }
    let rate = |rng: &mut ChaCha8Rng, n: usize| -> Result<f64> {
        let mut positives = 0usize;
        for _ in 0..n {
            positives += usize::from(filter.contains(&int_key(dist.draw(rng)?)));
        }
        Ok(positives as f64 / n as f64)
    };
    let outcomes: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed_seed(seed, "concentration", trial));
            let x = rate(&mut rng, t_size)?;
            let y = rate(&mut rng, q_size)?;
            Ok((x, y))
        })
        .collect::<Result<_>>()?;

    let exceed = outcomes.iter().filter(|(x, y)| (x - y).abs() >= epsilon).count();
    let mean = |f: fn(&(f64, f64)) -> f64| outcomes.iter().map(f).sum::<f64>() / trials as f64;
    Ok(ConcentrationReport {
        schema: REPORT_SCHEMA,
        epsilon,
        trials: trials as u64,
        t_size: t_size as u64,
        q_size: q_size as u64,
        exceed_count: exceed as u64,
        exceed_fraction: exceed as f64 / trials as f64,
        chernoff_bound: chernoff_bound(epsilon, t_size, q_size),
        mean_test_fpr: mean(|o| o.0),
        mean_query_fpr: mean(|o| o.1),
        seed,
    })
}

/// `n` distinct keys from a seeded generator.
pub fn distinct_random_keys(n: usize, seed: u64) -> HashSet<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keys = HashSet::with_capacity(n);
    while keys.len() < n {
        keys.insert(rng.random::<u64>());
    }
    keys
}

fn build_random_filter(m: u64, k: u32, n: usize, seed: u64) -> Result<(BloomFilter, HashSet<u64>)> {
    let keys = distinct_random_keys(n, derive_seed(seed, "filter-keys"));
    let mut filter = BloomFilter::new(m, k, derive_seed(seed, "filter-hash"))?;
    let mut sorted: Vec<u64> = keys.iter().copied().collect();
    sorted.sort_unstable();
    for key in sorted {
        filter.insert(&int_key(key));
    }
    Ok((filter, keys))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FillConcentrationReport {
    pub schema: &'static str,
    pub m: u64,
    pub k: u32,
    pub n: u64,
    pub gamma: f64,
    pub trials: u64,
    pub expected_fill: f64,
    pub mean_fill: f64,
    pub max_deviation: f64,
    pub exceed_count: u64,
    /// Fraction of filters with `|ρ − E[ρ]| ≥ γ`.
    pub exceed_fraction: f64,
}

/// Builds one filter per seed with `n` distinct random keys and measures how
/// often the fill ratio strays from its expectation by `gamma` or more.
pub fn fill_concentration_experiment(
    m: u64,
    k: u32,
    n: usize,
    gamma: f64,
    seeds: &[u64],
) -> Result<FillConcentrationReport> {
    if seeds.len() < 30 {
        return param(format!("need at least 30 seeds, got {}", seeds.len()));
    }
    let expected = expected_fill_ratio(n as u64, m, k)?;
    let fills: Vec<f64> = seeds
        .par_iter()
        .map(|&seed| build_random_filter(m, k, n, seed).map(|(f, _)| f.fill_ratio()))
        .collect::<Result<_>>()?;
    let deviations = fills.iter().map(|f| (f - expected).abs());
    let exceed = deviations.clone().filter(|d| *d >= gamma).count();
    Ok(FillConcentrationReport {
        schema: REPORT_SCHEMA,
        m,
        k,
        n: n as u64,
        gamma,
        trials: seeds.len() as u64,
        expected_fill: expected,
        mean_fill: fills.iter().sum::<f64>() / fills.len() as f64,
        max_deviation: deviations.fold(0.0, f64::max),
        exceed_count: exceed as u64,
        exceed_fraction: exceed as f64 / seeds.len() as f64,
    })
}

/// One filter's fresh-key false positive fraction against `ρ^k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FppCheck {
    pub fill_ratio: f64,
    pub predicted_fpp: f64,
    pub observed_fpp: f64,
    pub std_err: f64,
    pub probes: u64,
}

impl FppCheck {
    pub fn within(&self, std_errs: f64) -> bool {
        (self.observed_fpp - self.predicted_fpp).abs() <= std_errs * self.std_err
    }
}

/// Builds a filter from `n` random keys and probes it with `probes` fresh
/// non-member keys.
pub fn standard_fpp_check(m: u64, k: u32, n: usize, probes: usize, seed: u64) -> Result<FppCheck> {
    if probes == 0 {
        return param("need at least one probe");
    }
    let (filter, keys) = build_random_filter(m, k, n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "fresh-probes"));
    let mut hits = 0u64;
    let mut drawn = 0;
    while drawn < probes {
        let y: u64 = rng.random();
        if keys.contains(&y) {
            continue;
        }
        drawn += 1;
        hits += u64::from(filter.contains(&int_key(y)));
    }
    let predicted = filter.current_fpp();
    Ok(FppCheck {
        fill_ratio: filter.fill_ratio(),
        predicted_fpp: predicted,
        observed_fpp: hits as f64 / probes as f64,
        std_err: binomial_std_err(predicted, probes),
        probes: probes as u64,
    })
}

/// Learned filter versus a standard filter over the same keys sized to the
/// learned filter's measured rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub schema: &'static str,
    pub key_count: u64,
    pub samples: u64,
    pub learned_fpr: f64,
    /// The measured rate was zero and sizing used `0.5 / samples` instead.
    pub sizing_fpr_floored: bool,
    pub sizing_fpr: f64,
    pub scorer_bits: u64,
    pub backup_bits: u64,
    pub backup_keys: u64,
    pub learned_bits: u64,
    pub learned_bits_per_key: f64,
    pub backup_bits_per_stored_key: Option<f64>,
    pub standard_m: u64,
    pub standard_k: u32,
    pub standard_bits_per_key: f64,
    pub standard_measured_fpr: f64,
    /// Backup bits per stored key minus standard bits per key.
    pub bits_per_element_delta: Option<f64>,
    pub seed: u64,
}

pub fn compare_with_standard<S: Scorer, K: AsRef<[u8]>>(
    keys: &[K],
    lbf: &LearnedBloomFilter<S>,
    dist: &QueryDistribution,
    samples: usize,
    seed: u64,
) -> Result<Comparison> {
    if keys.is_empty() {
        return param("comparison needs at least one key");
    }
    let queries = dist.sample(samples, derive_seed(seed, "compare-queries"))?;
    let learned_fpr = count_int_positives(lbf, &queries) as f64 / samples as f64;
    let floored = learned_fpr == 0.0;
    let sizing_fpr = if floored { 0.5 / samples as f64 } else { learned_fpr };
    let n = keys.len() as u64;
    let params = params_for_target(n, sizing_fpr.min(0.5))?;
    let mut standard = BloomFilter::with_params(&params, derive_seed(seed, "compare-standard"))?;
    for key in keys {
        standard.insert(key.as_ref());
    }
    let standard_measured = count_int_positives(&standard, &queries) as f64 / samples as f64;

    let backup_keys = lbf.backup_keys();
    let backup_bits = lbf.backup().m();
    let standard_bpk = params.m as f64 / n as f64;
    let backup_bpk = (backup_keys > 0).then(|| backup_bits as f64 / backup_keys as f64);
    Ok(Comparison {
        schema: REPORT_SCHEMA,
        key_count: n,
        samples: samples as u64,
        learned_fpr,
        sizing_fpr_floored: floored,
        sizing_fpr,
        scorer_bits: lbf.scorer().size_bits(),
        backup_bits,
        backup_keys,
        learned_bits: lbf.size_bits(),
        learned_bits_per_key: lbf.size_bits() as f64 / n as f64,
        backup_bits_per_stored_key: backup_bpk,
        standard_m: params.m,
        standard_k: params.k,
        standard_bits_per_key: standard_bpk,
        standard_measured_fpr: standard_measured,
        bits_per_element_delta: backup_bpk.map(|b| b - standard_bpk),
        seed,
    })
}

//! Synthetic trace generation with a known class structure, plus a
//! Monte-Carlo oracle for the accuracy of the optimal classifier.
//!
//! The generator mimics the qualitative picture of real runs: attempts that
//! terminate in time start with short iterations and a high, rising conflict
//! rate; hopeless attempts start late and stay flat and low. Rates and times
//! are drawn log-normally around a per-iteration level, counts as a rounded
//! normal. `noise_scale` multiplies every spread, so 0 collapses each class
//! onto its exact level curve.
//!
//! Because the class-conditional densities are known, the Bayes-optimal
//! accuracy can be estimated by Monte Carlo; downstream models are judged
//! against that ceiling rather than against unpublished solver logs.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{IterationRecord, Outcome, RunTrace, Stat};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("bad generator parameters: {0}")]
    BadParams(String),
}

/// How one statistic evolves: its level at iterations 1 and 2 plus a spread.
///
/// Levels beyond iteration 2 extend the 1->2 trend (geometrically for scale
/// statistics, linearly for counts).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatProfile {
    pub first: f64,
    pub second: f64,
    pub spread: f64,
}

impl StatProfile {
    pub const fn new(first: f64, second: f64, spread: f64) -> Self {
        StatProfile { first, second, spread }
    }
}

/// Class-conditional profiles for all eight runtime statistics, plus the
/// runtime distribution of terminating runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub all_threads: StatProfile,
    pub conflicts_per_second: StatProfile,
    pub blocked_restarts: StatProfile,
    pub restarts: StatProfile,
    pub props_per_decision: StatProfile,
    pub props_per_conflict: StatProfile,
    pub literals_per_conflict: StatProfile,
    pub decisions_per_conflict: StatProfile,
    /// Median (and log-normal spread) of the total runtime; only used for
    /// the terminating class.
    pub runtime_median: f64,
    pub runtime_spread: f64,
}

impl ClassProfile {
    fn stat(&self, stat: Stat) -> StatProfile {
        match stat {
            Stat::AllThreads => self.all_threads,
            Stat::ConflictsPerSecond => self.conflicts_per_second,
            Stat::BlockedRestarts => self.blocked_restarts,
            Stat::Restarts => self.restarts,
            Stat::PropsPerDecision => self.props_per_decision,
            Stat::PropsPerConflict => self.props_per_conflict,
            Stat::LiteralsPerConflict => self.literals_per_conflict,
            Stat::DecisionsPerConflict => self.decisions_per_conflict,
        }
    }
}

/// Full generator configuration. Accepted as a JSON file by the CLI;
/// `GeneratorParams::default()` is the embedded default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Iterations per generated trace (at least 2).
    pub iterations: usize,
    /// Global multiplier on every spread.
    pub noise_scale: f64,
    /// Timeout assigned to non-terminating runs.
    pub time_limit: f64,
    pub terminating: ClassProfile,
    pub non_terminating: ClassProfile,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            iterations: 2,
            noise_scale: 1.0,
            time_limit: 3600.0,
            terminating: ClassProfile {
                all_threads: StatProfile::new(55.0, 75.0, 0.55),
                conflicts_per_second: StatProfile::new(2800.0, 3400.0, 0.55),
                blocked_restarts: StatProfile::new(20.0, 36.0, 16.0),
                restarts: StatProfile::new(80.0, 150.0, 55.0),
                props_per_decision: StatProfile::new(290.0, 265.0, 0.5),
                props_per_conflict: StatProfile::new(115.0, 105.0, 0.5),
                literals_per_conflict: StatProfile::new(46.0, 42.0, 0.45),
                decisions_per_conflict: StatProfile::new(0.58, 0.52, 0.4),
                runtime_median: 900.0,
                runtime_spread: 0.5,
            },
            non_terminating: ClassProfile {
                all_threads: StatProfile::new(110.0, 125.0, 0.6),
                conflicts_per_second: StatProfile::new(1400.0, 1500.0, 0.6),
                blocked_restarts: StatProfile::new(10.0, 22.0, 14.0),
                restarts: StatProfile::new(45.0, 100.0, 50.0),
                props_per_decision: StatProfile::new(390.0, 375.0, 0.5),
                props_per_conflict: StatProfile::new(160.0, 155.0, 0.5),
                literals_per_conflict: StatProfile::new(62.0, 60.0, 0.45),
                decisions_per_conflict: StatProfile::new(0.82, 0.8, 0.4),
                runtime_median: 3600.0,
                runtime_spread: 0.0,
            },
        }
    }
}

/// Whether a statistic is drawn on a multiplicative scale or as a count.
fn is_count(stat: Stat) -> bool {
    matches!(stat, Stat::BlockedRestarts | Stat::Restarts)
}

fn level_at(profile: StatProfile, iteration: usize, count: bool) -> f64 {
    match iteration {
        1 => profile.first,
        2 => profile.second,
        // Beyond the two profiled iterations, extend the 1 -> 2 trend.
        k => {
            let steps = (k - 2) as f64;
            if count {
                (profile.second + steps * (profile.second - profile.first)).max(0.0)
            } else {
                profile.second * (profile.second / profile.first).powf(steps)
            }
        }
    }
}

fn draw_stat<R: Rng>(profile: StatProfile, stat: Stat, iteration: usize, noise: f64, rng: &mut R) -> f64 {
    let level = level_at(profile, iteration, is_count(stat));
    let z: f64 = rng.sample(StandardNormal);
    let sigma = noise * profile.spread;
    if is_count(stat) {
        (level + sigma * z).round().max(0.0)
    } else {
        level * (sigma * z).exp()
    }
}

fn validate(params: &GeneratorParams) -> Result<(), SynthError> {
    if params.iterations < 2 {
        return Err(SynthError::BadParams("iterations must be at least 2".into()));
    }
    if !(params.noise_scale >= 0.0 && params.noise_scale.is_finite()) {
        return Err(SynthError::BadParams("noise_scale must be finite and >= 0".into()));
    }
    if !(params.time_limit > 0.0 && params.time_limit.is_finite()) {
        return Err(SynthError::BadParams("time_limit must be positive".into()));
    }
    for (name, profile) in [("terminating", &params.terminating), ("non_terminating", &params.non_terminating)] {
        for stat in Stat::ALL {
            let p = profile.stat(stat);
            let values_ok = p.first.is_finite() && p.second.is_finite() && p.spread.is_finite() && p.spread >= 0.0;
            let range_ok = if is_count(stat) {
                p.first >= 0.0 && p.second >= 0.0
            } else {
                p.first > 0.0 && p.second > 0.0
            };
            if !(values_ok && range_ok) {
                return Err(SynthError::BadParams(format!("{name}.{}", stat.wire_name())));
            }
        }
        if !(profile.runtime_median > 0.0 && profile.runtime_spread >= 0.0) {
            return Err(SynthError::BadParams(format!("{name}.runtime")));
        }
    }
    Ok(())
}

/// Generate one trace of the given class (1 terminating, 0 not).
pub fn generate_trace(class_label: u8, params: &GeneratorParams, seed: u64) -> Result<RunTrace, SynthError> {
    validate(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profile = if class_label == 1 { &params.terminating } else { &params.non_terminating };
    let records = (1..=params.iterations)
        .map(|k| {
            let mut values = [0.0; 8];
            for stat in Stat::ALL {
                values[stat.index()] = draw_stat(profile.stat(stat), stat, k, params.noise_scale, &mut rng);
            }
            IterationRecord::from_stats(k as u32, values)
                .map_err(|e| SynthError::BadParams(format!("generated invalid record: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let outcome = if class_label == 1 {
        let z: f64 = rng.sample(StandardNormal);
        let t = profile.runtime_median * (params.noise_scale * profile.runtime_spread * z).exp();
        Outcome::Terminated { total_runtime: t.min(params.time_limit) }
    } else {
        Outcome::TimedOut { limit: params.time_limit }
    };
    let run_id = format!("synth-{}-{seed:08x}", if class_label == 1 { "t" } else { "n" });
    RunTrace::new(run_id, "synthetic", records, outcome)
        .map_err(|e| SynthError::BadParams(format!("generated invalid trace: {e}")))
}

/// Generate `n_per_class` traces of each class, interleaved terminating
/// first, with per-trace seeds derived from `seed`.
pub fn generate_corpus(
    n_per_class: usize,
    params: &GeneratorParams,
    seed: u64,
) -> Result<(Vec<RunTrace>, Vec<u8>), SynthError> {
    if n_per_class < 1 {
        return Err(SynthError::BadParams("n_per_class must be at least 1".into()));
    }
    validate(params)?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut traces = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for i in 0..n_per_class {
        for class in [1u8, 0u8] {
            let trace_seed: u64 = master.gen();
            let mut trace = generate_trace(class, params, trace_seed)?;
            trace.run_id = format!("synth-{}-{i:04}", if class == 1 { "t" } else { "n" });
            traces.push(trace);
            labels.push(class);
        }
    }
    Ok((traces, labels))
}

/// Standard normal CDF via the Abramowitz-Stegun erf approximation
/// (absolute error below 1.5e-7, plenty for Monte-Carlo densities).
fn normal_cdf(x: f64) -> f64 {
    let t = x / std::f64::consts::SQRT_2;
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    let t_abs = t.abs();
    let u = 1.0 / (1.0 + 0.3275911 * t_abs);
    let poly = u
        * (0.254829592 + u * (-0.284496736 + u * (1.421413741 + u * (-1.453152027 + u * 1.061405429))));
    let erf = sign * (1.0 - poly * (-t_abs * t_abs).exp());
    0.5 * (1.0 + erf)
}

/// Log density of an observed statistic value under a class profile.
fn log_density(profile: StatProfile, stat: Stat, iteration: usize, noise: f64, value: f64) -> f64 {
    let level = level_at(profile, iteration, is_count(stat));
    let sigma = noise * profile.spread;
    if is_count(stat) {
        if sigma == 0.0 {
            return if value == level.round().max(0.0) { 0.0 } else { f64::NEG_INFINITY };
        }
        // Rounded normal, clamped at zero: all mass below 0.5 lands on 0.
        let hi = normal_cdf((value + 0.5 - level) / sigma);
        let lo = if value <= 0.0 { 0.0 } else { normal_cdf((value - 0.5 - level) / sigma) };
        let p = hi - lo;
        if p > 0.0 { p.ln() } else { f64::NEG_INFINITY }
    } else {
        if sigma == 0.0 {
            let close = (value - level).abs() <= 1e-9 * level.abs().max(1.0);
            return if close { 0.0 } else { f64::NEG_INFINITY };
        }
        if value <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let z = (value / level).ln() / sigma;
        -0.5 * z * z - (value * sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()
    }
}

/// Monte-Carlo estimate of the Bayes-optimal accuracy with its standard
/// error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesEstimate {
    pub accuracy: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Accuracy of the likelihood-ratio classifier that knows the true
/// class-conditional densities, estimated on `n_mc` generated samples with
/// equal class priors. The classifier observes the eight statistics of the
/// first two iterations (the same window the models classify on).
pub fn bayes_accuracy(params: &GeneratorParams, n_mc: usize, seed: u64) -> Result<BayesEstimate, SynthError> {
    if n_mc < 1000 {
        return Err(SynthError::BadParams("n_mc must be at least 1000".into()));
    }
    validate(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = params.noise_scale;
    let mut correct = 0usize;
    for i in 0..n_mc {
        let label = (i % 2) as u8;
        let profile = if label == 1 { &params.terminating } else { &params.non_terminating };
        let mut ll1 = 0.0;
        let mut ll0 = 0.0;
        for k in 1..=2usize {
            for stat in Stat::ALL {
                let value = draw_stat(profile.stat(stat), stat, k, noise, &mut rng);
                ll1 += log_density(params.terminating.stat(stat), stat, k, noise, value);
                ll0 += log_density(params.non_terminating.stat(stat), stat, k, noise, value);
            }
        }
        let decided: u8 = u8::from(ll1 >= ll0);
        correct += usize::from(decided == label);
    }
    let accuracy = correct as f64 / n_mc as f64;
    Ok(BayesEstimate {
        accuracy,
        std_error: (accuracy * (1.0 - accuracy) / n_mc as f64).sqrt(),
        n_samples: n_mc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_canonical_csv, serialize_canonical_csv};

    #[test]
    fn zero_noise_hits_the_level_curve_exactly() {
        let mut params = GeneratorParams::default();
        params.noise_scale = 0.0;
        let trace = generate_trace(1, &params, 42).unwrap();
        let p = &params.terminating;
        assert_eq!(trace.records[0].conflicts_per_second, p.conflicts_per_second.first);
        assert_eq!(trace.records[1].conflicts_per_second, p.conflicts_per_second.second);
        assert_eq!(trace.records[0].restarts, p.restarts.first);
        assert_eq!(trace.records[1].all_threads_time, p.all_threads.second);
    }

    #[test]
    fn same_seed_same_trace() {
        let params = GeneratorParams::default();
        let a = generate_trace(0, &params, 7).unwrap();
        let b = generate_trace(0, &params, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_classes_differ_in_early_conflict_rate() {
        let params = GeneratorParams::default();
        assert!(
            params.terminating.conflicts_per_second.first
                > params.non_terminating.conflicts_per_second.first
        );
        assert!(params.terminating.all_threads.first < params.non_terminating.all_threads.first);
    }

    #[test]
    fn corpus_is_balanced_and_deterministic() {
        let params = GeneratorParams::default();
        let (traces, labels) = generate_corpus(75, &params, 3).unwrap();
        assert_eq!(traces.len(), 150);
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 75);
        let (again, _) = generate_corpus(75, &params, 3).unwrap();
        assert_eq!(traces, again);
        let (other, _) = generate_corpus(75, &params, 4).unwrap();
        assert_ne!(traces, other);
    }

    #[test]
    fn tiny_corpus() {
        let (traces, labels) = generate_corpus(1, &GeneratorParams::default(), 0).unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(labels, vec![1, 0]);
    }

    #[test]
    fn generated_traces_survive_ingest_round_trip() {
        let (traces, _) = generate_corpus(10, &GeneratorParams::default(), 11).unwrap();
        let csv = serialize_canonical_csv(&traces);
        let back = parse_canonical_csv(&csv).unwrap();
        assert_eq!(traces, back);
    }

    #[test]
    fn terminating_runtimes_stay_below_the_limit() {
        let params = GeneratorParams::default();
        for seed in 0..50 {
            let trace = generate_trace(1, &params, seed).unwrap();
            match trace.outcome {
                Outcome::Terminated { total_runtime } => {
                    assert!(total_runtime > 0.0 && total_runtime <= params.time_limit)
                }
                ref other => panic!("expected terminated, got {other:?}"),
            }
        }
    }

    #[test]
    fn bad_params_rejected() {
        let mut params = GeneratorParams::default();
        params.iterations = 1;
        assert!(matches!(generate_trace(1, &params, 0), Err(SynthError::BadParams(_))));
        let mut params = GeneratorParams::default();
        params.terminating.conflicts_per_second.first = -5.0;
        assert!(matches!(generate_corpus(2, &params, 0), Err(SynthError::BadParams(_))));
        assert!(matches!(
            bayes_accuracy(&GeneratorParams::default(), 10, 0),
            Err(SynthError::BadParams(_))
        ));
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_cdf(1.959964) - 0.975).abs() < 1e-5);
        assert!((normal_cdf(-1.0) - 0.158655).abs() < 1e-5);
        assert!(normal_cdf(8.0) > 0.999999);
    }

    #[test]
    fn zero_noise_distinct_means_is_perfectly_separable() {
        let mut params = GeneratorParams::default();
        params.noise_scale = 0.0;
        let est = bayes_accuracy(&params, 2000, 1).unwrap();
        assert_eq!(est.accuracy, 1.0);
    }

    #[test]
    fn identical_classes_are_coin_flips() {
        let mut params = GeneratorParams::default();
        params.non_terminating = params.terminating.clone();
        let est = bayes_accuracy(&params, 4000, 1).unwrap();
        assert!((est.accuracy - 0.5).abs() <= 3.0 * est.std_error.max(1e-3));
    }

    #[test]
    fn oracle_accuracy_does_not_increase_with_noise() {
        let levels = [0.5, 1.0, 2.0];
        let mut previous = f64::INFINITY;
        let mut previous_se = 0.0;
        for noise in levels {
            let mut params = GeneratorParams::default();
            params.noise_scale = noise;
            let est = bayes_accuracy(&params, 20_000, 5).unwrap();
            assert!(
                est.accuracy <= previous + 2.0 * (est.std_error + previous_se),
                "accuracy rose with noise: {} -> {}",
                previous,
                est.accuracy
            );
            previous = est.accuracy;
            previous_se = est.std_error;
        }
    }
}

//! Chi-square detection of faulty output distributions.
//!
//! A test pattern is a computational-basis input. For each pattern the
//! faulty circuit is sampled one shot at a time; after every shot the
//! goodness-of-fit statistic against the fault-free distribution is
//! compared with the χ² quantile, and the first shot count that rejects is
//! recorded. The average over independent trials is the pattern's test
//! repetition count.

use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{simulate_distribution, Circuit, GateChannelMap};
use crate::error::{Error, Result};
use crate::faults::FaultSpec;
use crate::stats::chi2_quantile;

/// Expected probabilities below this are pooled into one catch-all bin.
pub const POOL_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiSquareConfig {
    pub quantile: f64,
    pub trials: usize,
    pub cap: u64,
}

impl Default for ChiSquareConfig {
    fn default() -> Self {
        Self {
            quantile: 0.99,
            trials: 50,
            cap: 100_000,
        }
    }
}

impl ChiSquareConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::Config(format!("quantile {} outside (0, 1)", self.quantile)));
        }
        if self.trials == 0 || self.cap == 0 {
            return Err(Error::Config("trials and cap must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome-to-bin assignment after pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct Binning {
    /// Bin of each outcome.
    pub bin_of: Vec<usize>,
    /// Expected probability per bin; the catch-all, if any, is last.
    pub probs: Vec<f64>,
    /// True when the last bin is a catch-all.
    pub has_catch_all: bool,
}

impl Binning {
    pub fn new(expected: &[f64]) -> Result<Self> {
        if expected.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain("expected probabilities must be finite and non-negative".into()));
        }
        let total: f64 = expected.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Domain("all expected probabilities are zero".into()));
        }
        let mut bin_of = vec![0; expected.len()];
        let mut probs = Vec::new();
        let mut pooled = Vec::new();
        for (j, &p) in expected.iter().enumerate() {
            let p = p / total;
            if p < POOL_THRESHOLD {
                pooled.push((j, p));
            } else {
                bin_of[j] = probs.len();
                probs.push(p);
            }
        }
        let has_catch_all = !pooled.is_empty();
        if has_catch_all {
            let k = probs.len();
            let mass: f64 = pooled.iter().map(|(_, p)| p).sum();
            for (j, _) in pooled {
                bin_of[j] = k;
            }
            probs.push(mass);
        }
        Ok(Self {
            bin_of,
            probs,
            has_catch_all,
        })
    }

    /// Retained bins, plus the catch-all when it carries mass, minus one.
    pub fn dof(&self) -> usize {
        let mut bins = self.probs.len();
        if self.has_catch_all && self.probs[bins - 1] == 0.0 {
            bins -= 1;
        }
        bins.saturating_sub(1)
    }
}

/// Σ (n_j − μ_j)² / μ_j with μ_j = N·p_j after pooling.
///
/// A count in a bin of zero expectation makes the statistic infinite.
pub fn chi_square_statistic(counts: &[u64], expected: &[f64], n: u64) -> Result<f64> {
    if counts.len() != expected.len() {
        return Err(Error::Dimension {
            expected: expected.len(),
            found: counts.len(),
        });
    }
    if counts.iter().sum::<u64>() != n {
        return Err(Error::Domain("counts do not sum to N".into()));
    }
    let bins = Binning::new(expected)?;
    let mut obs = vec![0u64; bins.probs.len()];
    for (j, &k) in counts.iter().enumerate() {
        obs[bins.bin_of[j]] += k;
    }
    let nf = n as f64;
    let mut s = 0.0;
    for (o, p) in obs.iter().zip(&bins.probs) {
        let mu = nf * p;
        if mu == 0.0 {
            if *o > 0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        let d = *o as f64 - mu;
        s += d * d / mu;
    }
    Ok(s)
}

/// Minimal repetitions, or the cap when the fault escaped detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repetitions {
    Detected(u64),
    Undetectable { cap: u64 },
}

impl Repetitions {
    pub fn value(&self) -> Option<u64> {
        match *self {
            Repetitions::Detected(n) => Some(n),
            Repetitions::Undetectable { .. } => None,
        }
    }

    /// Sort key placing undetectable outcomes last.
    pub fn rank(&self) -> u64 {
        self.value().unwrap_or(u64::MAX)
    }
}

impl std::fmt::Display for Repetitions {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Repetitions::Detected(n) => write!(f, "{n}"),
            Repetitions::Undetectable { .. } => f.write_str("UNDETECTABLE"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub pattern: usize,
    pub fault: Option<FaultSpec>,
    pub repetitions: Repetitions,
    /// Fraction of trials that rejected before the cap.
    pub detection_rate: f64,
    pub trials: usize,
    /// First rejecting shot count per trial, `None` at the cap.
    pub first_rejection: Vec<Option<u64>>,
}

impl TestOutcome {
    /// Number of trials that rejected within `n` shots.
    pub fn detected_within(&self, n: u64) -> usize {
        self.first_rejection.iter().filter(|r| r.is_some_and(|k| k <= n)).count()
    }
}

/// Deterministic generator for one (pattern, fault, trial) work unit.
pub fn trial_rng(seed: u64, pattern: usize, fault: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((pattern as u64) << 48) ^ ((fault as u64) << 20) ^ trial as u64);
    rng
}

/// Sequential sampler for one trial.
struct Sequential<'a> {
    bins: &'a Binning,
    sampler: &'a WeightedIndex<f64>,
    threshold: f64,
}

impl Sequential<'_> {
    fn run(&self, rng: &mut ChaCha8Rng, cap: u64) -> Option<u64> {
        let mut counts = vec![0u64; self.bins.probs.len()];
        // Q = Σ n_j² / p_j, so the statistic is Q/N − N.
        let mut q = 0.0;
        let mut impossible = false;
        for n in 1..=cap {
            let outcome = self.sampler.sample(rng);
            let b = self.bins.bin_of[outcome];
            let p = self.bins.probs[b];
            if p == 0.0 {
                impossible = true;
            } else {
                q += (2 * counts[b] + 1) as f64 / p;
            }
            counts[b] += 1;
            let s = if impossible { f64::INFINITY } else { q / n as f64 - n as f64 };
            if s > self.threshold {
                return Some(n);
            }
        }
        None
    }
}

fn validate_distribution(p: &[f64], name: &str) -> Result<()> {
    let total: f64 = p.iter().sum();
    if p.iter().any(|x| !x.is_finite() || *x < -1e-12) || (total - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!("{name} is not a normalized distribution")));
    }
    Ok(())
}

/// Sequential first-rejection repetitions of `p_faulty` against `p_ideal`.
///
/// The outcome is [`Repetitions::Undetectable`] when fewer than half of the
/// trials reject before the cap; otherwise it is the mean first-rejection
/// count over the rejecting trials, rounded up.
pub fn min_repetitions(p_faulty: &[f64], p_ideal: &[f64], cfg: &ChiSquareConfig, seed: u64) -> Result<TestOutcome> {
    min_repetitions_unit(p_faulty, p_ideal, cfg, seed, 0, 0)
}

fn min_repetitions_unit(
    p_faulty: &[f64],
    p_ideal: &[f64],
    cfg: &ChiSquareConfig,
    seed: u64,
    pattern: usize,
    fault: usize,
) -> Result<TestOutcome> {
    cfg.validate()?;
    if p_faulty.len() != p_ideal.len() {
        return Err(Error::Dimension {
            expected: p_ideal.len(),
            found: p_faulty.len(),
        });
    }
    validate_distribution(p_faulty, "faulty distribution")?;
    validate_distribution(p_ideal, "reference distribution")?;
    let bins = Binning::new(p_ideal)?;
    let dof = bins.dof();
    let threshold = chi2_quantile(cfg.quantile, dof)?;
    let weights: Vec<f64> = p_faulty.iter().map(|x| x.max(0.0)).collect();
    let sampler = WeightedIndex::new(&weights).map_err(|e| Error::Domain(e.to_string()))?;
    let seq = Sequential {
        bins: &bins,
        sampler: &sampler,
        threshold,
    };
    let first_rejection: Vec<Option<u64>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| seq.run(&mut trial_rng(seed, pattern, fault, t), cfg.cap))
        .collect();
    let hits: Vec<u64> = first_rejection.iter().flatten().copied().collect();
    let detection_rate = hits.len() as f64 / cfg.trials as f64;
    let repetitions = if 2 * hits.len() < cfg.trials {
        Repetitions::Undetectable { cap: cfg.cap }
    } else {
        let mean = hits.iter().map(|&n| n as f64).sum::<f64>() / hits.len() as f64;
        Repetitions::Detected((mean - 1e-9).ceil().max(1.0) as u64)
    };
    Ok(TestOutcome {
        pattern,
        fault: None,
        repetitions,
        detection_rate,
        trials: cfg.trials,
        first_rejection,
    })
}

/// Fraction of `trials` fixed-size samples of `n` shots whose statistic
/// exceeds the critical value.
pub fn rejection_power(p_faulty: &[f64], p_ideal: &[f64], n: u64, cfg: &ChiSquareConfig, seed: u64) -> Result<f64> {
    cfg.validate()?;
    validate_distribution(p_faulty, "faulty distribution")?;
    let bins = Binning::new(p_ideal)?;
    let threshold = chi2_quantile(cfg.quantile, bins.dof())?;
    let sampler = WeightedIndex::new(p_faulty.iter().map(|x| x.max(0.0))).map_err(|e| Error::Domain(e.to_string()))?;
    let hits: usize = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, 0, 0, t);
            let mut counts = vec![0u64; p_ideal.len()];
            for _ in 0..n {
                counts[sampler.sample(&mut rng)] += 1;
            }
            let s = chi_square_statistic(&counts, p_ideal, n).unwrap_or(f64::INFINITY);
            usize::from(s > threshold)
        })
        .sum();
    Ok(hits as f64 / cfg.trials as f64)
}

/// Fixed-N mode: smallest N whose rejection power reaches `target`, by
/// doubling and bisection. `None` when even the cap falls short.
pub fn fixed_n_repetitions(
    p_faulty: &[f64],
    p_ideal: &[f64],
    target: f64,
    cfg: &ChiSquareConfig,
    seed: u64,
) -> Result<Option<u64>> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::Domain(format!("power target {target} outside (0, 1]")));
    }
    let ok = |n: u64| -> Result<bool> { Ok(rejection_power(p_faulty, p_ideal, n, cfg, seed)? >= target) };
    let mut hi = 1u64;
    while !ok(hi)? {
        if hi >= cfg.cap {
            return Ok(None);
        }
        hi = (hi * 2).min(cfg.cap);
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Per-pattern outcomes for one fault, with the best pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSweep {
    pub outcomes: Vec<TestOutcome>,
    pub best: usize,
}

impl PatternSweep {
    pub fn best_outcome(&self) -> &TestOutcome {
        &self.outcomes[self.best]
    }
}

/// Index of the outcome with the fewest repetitions; ties favour the lower pattern.
pub fn best_pattern(outcomes: &[TestOutcome]) -> usize {
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        let cur = &outcomes[best];
        if (o.repetitions.rank(), o.pattern) < (cur.repetitions.rank(), cur.pattern) {
            best = i;
        }
    }
    best
}

/// Output distributions of every basis input under `channels`.
pub fn all_distributions(circ: &Circuit, channels: &GateChannelMap) -> Result<Vec<Vec<f64>>> {
    (0..circ.dim())
        .into_par_iter()
        .map(|i| simulate_distribution(circ, i, channels))
        .collect()
}

/// Test outcomes over all basis inputs for one fault.
pub fn sweep_patterns(
    circ: &Circuit,
    ideal: &GateChannelMap,
    faulty: &GateChannelMap,
    fault: Option<FaultSpec>,
    fault_index: usize,
    cfg: &ChiSquareConfig,
    seed: u64,
) -> Result<PatternSweep> {
    let reference = all_distributions(circ, ideal)?;
    let observed = all_distributions(circ, faulty)?;
    sweep_distributions(&observed, &reference, fault, fault_index, cfg, seed)
}

/// Same as [`sweep_patterns`] on precomputed distributions.
pub fn sweep_distributions(
    observed: &[Vec<f64>],
    reference: &[Vec<f64>],
    fault: Option<FaultSpec>,
    fault_index: usize,
    cfg: &ChiSquareConfig,
    seed: u64,
) -> Result<PatternSweep> {
    let outcomes: Vec<TestOutcome> = (0..reference.len())
        .into_par_iter()
        .map(|i| {
            let mut o = min_repetitions_unit(&observed[i], &reference[i], cfg, seed, i, fault_index)?;
            o.fault = fault;
            Ok(o)
        })
        .collect::<Result<_>>()?;
    let best = best_pattern(&outcomes);
    Ok(PatternSweep { outcomes, best })
}

/// Fraction of faults detected within `budget` repetitions by at least one
/// of `patterns`. `faulty[k]` holds the per-input distributions under fault k.
pub fn fault_coverage(
    reference: &[Vec<f64>],
    faulty: &[Vec<Vec<f64>>],
    patterns: &[usize],
    budget: u64,
    cfg: &ChiSquareConfig,
    seed: u64,
) -> Result<f64> {
    if faulty.is_empty() || patterns.is_empty() {
        return Ok(0.0);
    }
    if let Some(&p) = patterns.iter().find(|&&p| p >= reference.len()) {
        return Err(Error::Circuit(format!("pattern {p} outside the input space")));
    }
    let covered: Vec<bool> = faulty
        .par_iter()
        .enumerate()
        .map(|(k, dists)| -> Result<bool> {
            for &p in patterns {
                let o = min_repetitions_unit(&dists[p], &reference[p], cfg, seed, p, k)?;
                if o.repetitions.value().is_some_and(|n| n <= budget) {
                    return Ok(true);
                }
            }
            Ok(false)
        })
        .collect::<Result<_>>()?;
    Ok(covered.iter().filter(|&&c| c).count() as f64 / faulty.len() as f64)
}

/// Writes `pattern,fault_id,kind,magnitude,repetitions,detection_rate` rows.
pub fn write_outcomes_csv<W: Write>(mut w: W, width: usize, outcomes: &[TestOutcome]) -> std::io::Result<()> {
    writeln!(w, "pattern,fault_id,kind,magnitude,repetitions,detection_rate")?;
    for o in outcomes {
        let (id, kind, mag) = match &o.fault {
            Some(f) => (f.id(), f.kind.name().to_string(), f.magnitude_value()),
            None => ("none".into(), "none".into(), 0.0),
        };
        writeln!(
            w,
            "{},{},{},{},{},{}",
            crate::circuits::bitstring(o.pattern, width),
            id,
            kind,
            mag,
            o.repetitions,
            o.detection_rate
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistic_examples() {
        assert_eq!(chi_square_statistic(&[5, 5], &[0.5, 0.5], 10).unwrap(), 0.0);
        assert!((chi_square_statistic(&[6, 4], &[0.5, 0.5], 10).unwrap() - 0.4).abs() < 1e-12);
        assert!(chi_square_statistic(&[1, 0], &[0.0, 0.0], 1).is_err());
        assert!(chi_square_statistic(&[0, 1], &[1.0, 0.0], 1).unwrap().is_infinite());
        assert!(chi_square_statistic(&[2, 1], &[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn pooling_and_dof() {
        let b = Binning::new(&[0.5, 0.5, 0.0, 1e-15]).unwrap();
        assert_eq!(b.probs.len(), 3);
        assert!(b.has_catch_all);
        assert_eq!(b.dof(), 2);
        let point = Binning::new(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(point.dof(), 0);
        assert_eq!(Binning::new(&[0.25; 4]).unwrap().dof(), 3);
    }

    #[test]
    fn disjoint_support_detected_immediately() {
        let cfg = ChiSquareConfig::default();
        let o = min_repetitions(&[0.0, 1.0], &[1.0, 0.0], &cfg, 1).unwrap();
        assert_eq!(o.repetitions, Repetitions::Detected(1));
        assert_eq!(o.detection_rate, 1.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = ChiSquareConfig {
            trials: 20,
            ..Default::default()
        };
        let a = min_repetitions(&[0.4, 0.6], &[0.5, 0.5], &cfg, 9).unwrap();
        let b = min_repetitions(&[0.4, 0.6], &[0.5, 0.5], &cfg, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identical_point_masses_undetectable() {
        let cfg = ChiSquareConfig {
            trials: 5,
            cap: 1000,
            ..Default::default()
        };
        let o = min_repetitions(&[1.0, 0.0], &[1.0, 0.0], &cfg, 3).unwrap();
        assert_eq!(o.repetitions, Repetitions::Undetectable { cap: 1000 });
        assert_eq!(o.detection_rate, 0.0);
    }

    #[test]
    fn best_pattern_tie_break() {
        let mk = |pattern, r| TestOutcome {
            pattern,
            fault: None,
            repetitions: r,
            detection_rate: 1.0,
            trials: 1,
            first_rejection: vec![],
        };
        let v = vec![
            mk(0, Repetitions::Undetectable { cap: 10 }),
            mk(1, Repetitions::Detected(7)),
            mk(2, Repetitions::Detected(7)),
        ];
        assert_eq!(best_pattern(&v), 1);
    }

    #[test]
    fn coverage_edge_cases() {
        let cfg = ChiSquareConfig::default();
        let reference = vec![vec![1.0, 0.0]];
        let faulty = vec![vec![vec![0.0, 1.0]]];
        assert_eq!(fault_coverage(&reference, &faulty, &[], 10, &cfg, 0).unwrap(), 0.0);
        assert_eq!(fault_coverage(&reference, &faulty, &[0], 1, &cfg, 0).unwrap(), 1.0);
    }
}

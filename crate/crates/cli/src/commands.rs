//! Subcommand implementations. Each returns the paths it wrote.

use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{bail, Result};
use czfault::circuits::{benchmark_depths, bitstring, run_decoherence_benchmark};
use czfault::device::{collapse_operators, DeviceParams};
use czfault::evolution::{lindblad_evolve, TimeDependentHamiltonian};
use czfault::faults::{enumerate_faults, CzChannelFactory, FaultKind, FaultSpec, FaultTarget};
use czfault::gate::GateModel;
use czfault::linalg::DensityMatrix;
use czfault::pulses::{calibrate, conditional_phase_estimate, CalibrationResult, PulseFamily};
use czfault::testgen::{all_distributions, sweep_distributions, PatternSweep};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::report::{num, Report};

fn report(cfg: &RunConfig, command: &str) -> Result<Report> {
    Report::new(&cfg.out, command, &cfg.canonical_json(), cfg.seed)
}

fn calibrate_family(cfg: &RunConfig, dev: &DeviceParams, family: PulseFamily) -> Result<CalibrationResult> {
    let cal = cfg.pulse.calibration(dev)?;
    Ok(calibrate(family, dev, &cal)?)
}

fn factory(cfg: &RunConfig, dev: &DeviceParams) -> Result<(CalibrationResult, CzChannelFactory)> {
    let cal = calibrate_family(cfg, dev, cfg.pulse.family)?;
    let f = CzChannelFactory::new(GateModel::new(dev)?, cal.pulse.clone(), cfg.pulse.steps_per_gate)?;
    Ok((cal, f))
}

/// Wraps an angle difference into (−π, π].
pub fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

#[derive(Debug, Serialize)]
struct CalibrationEntry {
    family: String,
    t_gate_ns: f64,
    fidelity: f64,
    conditional_phase: f64,
    phase_estimate: f64,
    theta_max: f64,
    trace: Vec<(f64, f64)>,
}

pub fn cmd_calibrate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dev = cfg.device.to_params()?;
    let mut rep = report(cfg, "calibrate")?;
    let results: Vec<CalibrationResult> = PulseFamily::BENCHMARK
        .iter()
        .map(|&f| calibrate_family(cfg, &dev, f))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for r in &results {
        let est = conditional_phase_estimate(&r.pulse, &dev);
        rows.push(vec![
            r.pulse.family.to_string(),
            num(r.pulse.t_gate * 1e9),
            num(r.fidelity),
            num(r.phase),
            num(est.phase),
        ]);
        entries.push(CalibrationEntry {
            family: r.pulse.family.to_string(),
            t_gate_ns: r.pulse.t_gate * 1e9,
            fidelity: r.fidelity,
            conditional_phase: r.phase,
            phase_estimate: est.phase,
            theta_max: r.pulse.theta_max,
            trace: r.trace.iter().map(|&(t, f)| (t * 1e9, f)).collect(),
        });
    }
    rep.csv(
        "calibration.csv",
        &["family", "t_gate_ns", "fidelity", "conditional_phase", "phase_estimate"],
        &rows,
    )?;
    rep.json("calibration.json", &entries)?;
    rep.finish()
}

/// One row of the fidelity-versus-noise table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub kind: FaultKind,
    pub coefficient: Option<usize>,
    pub epsilon: f64,
    pub phase_error: f64,
    pub phase_error_estimate: f64,
    pub fidelity: f64,
    pub fidelity_drop: f64,
    pub leakage: f64,
}

/// Characterizes every (kind, coefficient, ε) combination of the sweep.
pub fn fault_sweep_rows(cfg: &RunConfig, f: &CzChannelFactory) -> Result<Vec<SweepRow>> {
    let dev = f.model.dev;
    let m = match f.pulse.family.fourier_terms() {
        Some(m) => m,
        None => bail!("fault sweeps need a Fourier-family pulse, not {}", f.pulse.family),
    };
    let base = f.reference();
    let base_est = conditional_phase_estimate(&f.pulse, &dev).phase;
    let coefs: Vec<usize> = cfg.sweep.coefficients.clone().unwrap_or_else(|| (1..=m).collect());
    let mut specs = Vec::new();
    for &kind in &cfg.sweep.kinds {
        for &eps in &cfg.sweep.epsilons {
            match kind {
                FaultKind::Ratio => specs.extend(coefs.iter().map(|&n| FaultSpec::ratio(FaultTarget::All, n, eps))),
                FaultKind::Bias => specs.extend(coefs.iter().map(|&n| FaultSpec::bias(FaultTarget::All, n, eps))),
                FaultKind::Truncation => specs.push(FaultSpec::truncation(FaultTarget::All, eps)),
                other => bail!("fault sweep supports ratio, bias and truncation, not {}", other.name()),
            }
        }
    }
    specs.sort_by(|a, b| {
        (a.kind, a.coefficient_index, a.magnitude_value())
            .partial_cmp(&(b.kind, b.coefficient_index, b.magnitude_value()))
            .expect("finite magnitudes")
    });
    specs
        .par_iter()
        .map(|s| {
            let ch = f.characterize_pulse_fault(s)?;
            let p = czfault::faults::apply_parameter_fault(&f.pulse, s)?;
            let est = conditional_phase_estimate(&p, &dev).phase;
            Ok(SweepRow {
                kind: s.kind,
                coefficient: s.coefficient_index,
                epsilon: s.magnitude_value(),
                phase_error: wrap(ch.conditional_phase - base.conditional_phase),
                phase_error_estimate: est - base_est,
                fidelity: ch.fidelity,
                fidelity_drop: base.fidelity - ch.fidelity,
                leakage: ch.leakage,
            })
        })
        .collect()
}

pub fn cmd_fault_sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dev = cfg.device.to_params()?;
    let mut rep = report(cfg, "fault-sweep")?;
    let (_, f) = factory(cfg, &dev)?;
    let rows = fault_sweep_rows(cfg, &f)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.kind.name().to_string(),
                r.coefficient.map(|n| n.to_string()).unwrap_or_default(),
                num(r.epsilon),
                num(r.phase_error),
                num(r.phase_error_estimate),
                num(r.fidelity),
                num(r.fidelity_drop),
                num(r.leakage),
            ]
        })
        .collect();
    rep.csv(
        "fault_sweep.csv",
        &[
            "kind",
            "coefficient",
            "epsilon",
            "phase_error",
            "phase_error_estimate",
            "fidelity",
            "fidelity_drop",
            "leakage",
        ],
        &table,
    )?;
    rep.finish()
}

pub fn cmd_decoherence_bench(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dev = cfg.device.to_params()?;
    let dec = cfg.decoherence.to_params()?;
    let mut rep = report(cfg, "decoherence-bench")?;
    let cz_time = match cfg.bench.cz_time_ns {
        Some(t) => t * 1e-9,
        None => calibrate_family(cfg, &dev, cfg.pulse.family)?.pulse.t_gate,
    };
    let depths = cfg.bench.depths.clone().unwrap_or_else(benchmark_depths);
    let bench = run_decoherence_benchmark(&dec, cz_time, &depths, cfg.bench.instances, cfg.seed)?;
    let rows: Vec<Vec<String>> = bench
        .points
        .iter()
        .map(|&(d, f)| vec![d.to_string(), num(f), num(bench.fit.eval(d as f64))])
        .collect();
    rep.csv("decoherence_bench.csv", &["depth", "fidelity", "fit"], &rows)?;
    rep.json("decoherence_fit.json", &bench.fit)?;
    rep.finish()
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub fault_id: String,
    pub best_pattern: String,
    pub repetitions: String,
    pub detection_rate: f64,
}

/// Faults exercised by `testgen`. Ratio acts on λ₁; bias acts on λ₂ when the
/// pulse has one, since a bias on λ₁ coincides with a ratio fault.
fn testgen_specs(cfg: &RunConfig, czs: &[usize], m: usize) -> Vec<(String, FaultSpec)> {
    let bias_n = if m >= 2 { 2 } else { 1 };
    let mut out = Vec::new();
    for &kind in &cfg.testgen.kinds {
        let mk = |target, eps| match kind {
            FaultKind::Ratio => Some(FaultSpec::ratio(target, 1, eps)),
            FaultKind::Bias => Some(FaultSpec::bias(target, bias_n, eps)),
            FaultKind::Truncation => Some(FaultSpec::truncation(target, eps)),
            FaultKind::MissingGate => Some(FaultSpec::missing_gate(target)),
            _ => None,
        };
        let eps_all: &[f64] = if kind == FaultKind::MissingGate { &[0.0] } else { &cfg.testgen.all_cz_epsilons };
        for &eps in eps_all {
            if let Some(s) = mk(FaultTarget::All, eps) {
                out.push((format!("all_cz/{}/{}", kind.name(), eps), s));
            }
        }
        let eps_one: &[f64] = if kind == FaultKind::MissingGate { &[0.0] } else { &cfg.testgen.single_cz_epsilons };
        for &eps in eps_one {
            for &g in czs {
                if let Some(s) = mk(FaultTarget::Gate(g), eps) {
                    out.push((format!("single_cz/{}/{}", kind.name(), eps), s));
                }
            }
        }
    }
    out
}

/// Runs every test-generation experiment in a fixed order.
pub fn testgen_sweeps(cfg: &RunConfig, f: &CzChannelFactory) -> Result<Vec<(String, PatternSweep)>> {
    let circ = cfg.circuit.build()?;
    let ideal = f.channel_map(&circ, None)?;
    let reference = all_distributions(&circ, &ideal)?;
    let m = f.pulse.family.fourier_terms().unwrap_or(1);
    let specs = testgen_specs(cfg, &circ.cz_indices(), m);
    specs
        .iter()
        .enumerate()
        .map(|(k, (name, spec))| {
            let faulty = f.channel_map(&circ, Some(spec))?;
            let observed = all_distributions(&circ, &faulty)?;
            let sw = sweep_distributions(&observed, &reference, Some(*spec), k, &cfg.testgen.chi_square, cfg.seed)?;
            Ok((name.clone(), sw))
        })
        .collect()
}

pub fn cmd_testgen(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dev = cfg.device.to_params()?;
    let mut rep = report(cfg, "testgen")?;
    let (_, f) = factory(cfg, &dev)?;
    let width = cfg.circuit.build()?.width;
    let sweeps = testgen_sweeps(cfg, &f)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (name, sw) in &sweeps {
        for o in &sw.outcomes {
            let spec = o.fault.expect("faulty sweep");
            rows.push(vec![
                name.clone(),
                bitstring(o.pattern, width),
                spec.id(),
                spec.kind.name().to_string(),
                num(spec.magnitude_value()),
                o.repetitions.to_string(),
                num(o.detection_rate),
            ]);
        }
        let b = sw.best_outcome();
        summary.push(ExperimentSummary {
            experiment: name.clone(),
            fault_id: b.fault.map(|s| s.id()).unwrap_or_default(),
            best_pattern: bitstring(b.pattern, width),
            repetitions: b.repetitions.to_string(),
            detection_rate: b.detection_rate,
        });
    }
    rep.csv(
        "testgen.csv",
        &["experiment", "pattern", "fault_id", "kind", "magnitude", "repetitions", "detection_rate"],
        &rows,
    )?;
    rep.json("testgen_summary.json", &summary)?;
    rep.finish()
}

#[derive(Debug, Serialize)]
struct UniverseSummary {
    circuit: String,
    cz_count: usize,
    fourier_terms: usize,
    pulse_faults: usize,
    total_faults: usize,
}

pub fn cmd_enumerate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut rep = report(cfg, "enumerate")?;
    let circ = cfg.circuit.build()?;
    let m = match cfg.pulse.family.fourier_terms() {
        Some(m) => m,
        None => bail!("fault enumeration needs a Fourier-family pulse, not {}", cfg.pulse.family),
    };
    let eps = cfg.testgen.single_cz_epsilons.first().copied().unwrap_or(0.1);
    let u = enumerate_faults(&circ, m, eps)?;
    let mut buf = Vec::new();
    u.write_csv(&mut buf)?;
    rep.raw("faults.csv", &buf)?;
    rep.json(
        "faults_summary.json",
        &UniverseSummary {
            circuit: cfg.circuit.label(),
            cz_count: u.cz_count,
            fourier_terms: u.fourier_terms,
            pulse_faults: u.pulse_fault_count(),
            total_faults: u.len(),
        },
    )?;
    rep.finish()
}

#[derive(Debug, Serialize)]
struct GateReport {
    family: String,
    t_gate_ns: f64,
    fidelity: f64,
    conditional_phase: f64,
    virtual_z: (f64, f64),
    leakage: f64,
    decoherent_trace_drift: f64,
    decoherent_min_eigenvalue: f64,
}

/// Number of trajectory samples written by `gate-sim`.
pub const TRAJECTORY_SAMPLES: usize = 200;

pub fn cmd_gate_sim(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dev = cfg.device.to_params()?;
    let dec = cfg.decoherence.to_params()?;
    let mut rep = report(cfg, "gate-sim")?;
    let (cal, f) = factory(cfg, &dev)?;
    let pulse = &cal.pulse;
    let model = &f.model;
    let t = pulse.t_gate;
    let h = TimeDependentHamiltonian::new(|s| model.hamiltonian(pulse.omega1(&dev, s)), t, t / 20_000.0)?;
    // Start in the dressed |11⟩ state.
    let psi = model.dressed.vectors.column(4);
    let rho0 = DensityMatrix::pure(&psi)?;
    let times: Vec<f64> = (0..=TRAJECTORY_SAMPLES).map(|k| t * k as f64 / TRAJECTORY_SAMPLES as f64).collect();
    let ops = collapse_operators(&dec, 2)?;
    let traj = lindblad_evolve(&h, &rho0, &ops, &times)?;
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)?;
    rep.raw("trajectory.csv", &buf)?;
    let r = f.reference();
    rep.json(
        "gate.json",
        &GateReport {
            family: pulse.family.to_string(),
            t_gate_ns: t * 1e9,
            fidelity: r.fidelity,
            conditional_phase: r.conditional_phase,
            virtual_z: r.virtual_z,
            leakage: r.leakage,
            decoherent_trace_drift: traj.trace_drift,
            decoherent_min_eigenvalue: traj.min_eigenvalue,
        },
    )?;
    rep.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_range() {
        assert!((wrap(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn testgen_spec_layout() {
        let cfg = RunConfig::default();
        let specs = testgen_specs(&cfg, &[2, 6], 2);
        // ratio, bias, truncation: 4 all-CZ + 2×2 single; missing gate: 1 + 2.
        assert_eq!(specs.len(), 3 * (4 + 4) + 3);
        assert!(specs.iter().all(|(n, _)| n.starts_with("all_cz/") || n.starts_with("single_cz/")));
    }
}

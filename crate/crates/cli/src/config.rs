//! JSON run configuration. Frequencies are in GHz (cycles, not radians),
//! times in the unit named by each field suffix.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use czfault::circuits::{build_full_adder, build_random_circuit, decompose_to_cz, Circuit};
use czfault::device::{DecoherenceParams, DeviceParams, GHZ};
use czfault::faults::FaultKind;
use czfault::pulses::{default_theta_max, CalibrationConfig, PulseFamily, STEPS_PER_GATE};
use czfault::testgen::ChiSquareConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConfig {
    pub omega1_ghz: f64,
    pub omega2_ghz: f64,
    pub alpha_ghz: f64,
    pub g_ghz: f64,
    pub kappa_inv_ns: f64,
    pub g_res_ghz: f64,
    pub omega_r_ghz: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            omega1_ghz: 5.5,
            omega2_ghz: 5.1,
            alpha_ghz: -0.3,
            g_ghz: 0.02,
            kappa_inv_ns: 160.0,
            g_res_ghz: 0.1,
            omega_r_ghz: 7.0,
        }
    }
}

impl DeviceConfig {
    pub fn to_params(&self) -> Result<DeviceParams> {
        let p = DeviceParams {
            omega1_idle: self.omega1_ghz * GHZ,
            omega2: self.omega2_ghz * GHZ,
            alpha: self.alpha_ghz * GHZ,
            g: self.g_ghz * GHZ,
            kappa_inv: self.kappa_inv_ns * 1e-9,
            g_res: self.g_res_ghz * GHZ,
            omega_r: self.omega_r_ghz * GHZ,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Relaxation and total dephasing times; `null` means no decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoherenceConfig {
    pub t1_us: Option<f64>,
    pub t2_us: Option<f64>,
}

impl Default for DecoherenceConfig {
    fn default() -> Self {
        Self {
            t1_us: Some(100.0),
            t2_us: Some(20.0),
        }
    }
}

impl DecoherenceConfig {
    pub fn to_params(&self) -> Result<DecoherenceParams> {
        let t1 = self.t1_us.map_or(f64::INFINITY, |t| t * 1e-6);
        Ok(match self.t2_us {
            None => DecoherenceParams::new(t1, f64::INFINITY)?,
            Some(t2) => DecoherenceParams::from_t1_t2(t1, t2 * 1e-6)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    pub family: PulseFamily,
    /// Peak mixing angle; `null` picks the device default.
    pub theta_max: Option<f64>,
    pub t_lo_ns: f64,
    pub t_hi_ns: f64,
    pub step_ns: f64,
    pub coarse_step_ns: f64,
    pub refine: usize,
    pub steps_per_gate: usize,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            family: PulseFamily::Fourier(2),
            theta_max: None,
            t_lo_ns: 20.0,
            t_hi_ns: 200.0,
            step_ns: 0.1,
            coarse_step_ns: 1.0,
            refine: 4,
            steps_per_gate: STEPS_PER_GATE,
        }
    }
}

impl PulseConfig {
    pub fn calibration(&self, dev: &DeviceParams) -> Result<CalibrationConfig> {
        Ok(CalibrationConfig {
            t_lo: self.t_lo_ns * 1e-9,
            t_hi: self.t_hi_ns * 1e-9,
            step: self.step_ns * 1e-9,
            coarse_step: self.coarse_step_ns * 1e-9,
            refine: self.refine,
            theta_max: match self.theta_max {
                Some(t) => t,
                None => default_theta_max(dev)?,
            },
            steps_per_gate: self.steps_per_gate,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitKind {
    FullAdder,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircuitConfig {
    pub kind: CircuitKind,
    pub seed: u64,
    pub width: usize,
    pub n_cz: usize,
    /// JSON gate list that overrides `kind`.
    pub file: Option<PathBuf>,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            kind: CircuitKind::FullAdder,
            seed: 1,
            width: 4,
            n_cz: 9,
            file: None,
        }
    }
}

impl CircuitConfig {
    /// The selected circuit, decomposed to single-qubit gates and CZ.
    pub fn build(&self) -> Result<Circuit> {
        let c = match &self.file {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Circuit::from_json(&text)?
            }
            None => match self.kind {
                CircuitKind::FullAdder => build_full_adder(),
                CircuitKind::Random => build_random_circuit(self.seed, self.width, self.n_cz)?,
            },
        };
        Ok(decompose_to_cz(&c)?)
    }

    pub fn label(&self) -> String {
        match (&self.file, self.kind) {
            (Some(p), _) => p.display().to_string(),
            (None, CircuitKind::FullAdder) => "full_adder".into(),
            (None, CircuitKind::Random) => format!("random(seed={})", self.seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub kinds: Vec<FaultKind>,
    /// λ indices swept for ratio and bias; `null` means all of them.
    pub coefficients: Option<Vec<usize>>,
    pub epsilons: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kinds: vec![FaultKind::Ratio, FaultKind::Bias, FaultKind::Truncation],
            coefficients: None,
            epsilons: (0..=10).map(|k| 0.02 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestgenConfig {
    /// Magnitudes for faults applied to every CZ at once.
    pub all_cz_epsilons: Vec<f64>,
    /// Magnitudes for faults on a single CZ.
    pub single_cz_epsilons: Vec<f64>,
    pub kinds: Vec<FaultKind>,
    pub chi_square: ChiSquareConfig,
}

impl Default for TestgenConfig {
    fn default() -> Self {
        Self {
            all_cz_epsilons: vec![0.05, 0.10, 0.15, 0.20],
            single_cz_epsilons: vec![0.10, 0.20],
            kinds: vec![FaultKind::Ratio, FaultKind::Bias, FaultKind::Truncation, FaultKind::MissingGate],
            chi_square: ChiSquareConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub instances: usize,
    pub depths: Option<Vec<usize>>,
    /// CZ duration; `null` uses the calibrated gate time.
    pub cz_time_ns: Option<f64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            instances: 10,
            depths: None,
            cz_time_ns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub device: DeviceConfig,
    pub decoherence: DecoherenceConfig,
    pub pulse: PulseConfig,
    pub circuit: CircuitConfig,
    pub sweep: SweepConfig,
    pub testgen: TestgenConfig,
    pub bench: BenchConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            device: DeviceConfig::default(),
            decoherence: DecoherenceConfig::default(),
            pulse: PulseConfig::default(),
            circuit: CircuitConfig::default(),
            sweep: SweepConfig::default(),
            testgen: TestgenConfig::default(),
            bench: BenchConfig::default(),
            seed: 0,
            out: PathBuf::from("out"),
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("parsing run configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.device.to_params()?;
        self.decoherence.to_params()?;
        self.testgen.chi_square.validate()?;
        if self.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        let eps = self.sweep.epsilons.iter().chain(&self.testgen.all_cz_epsilons).chain(&self.testgen.single_cz_epsilons);
        for e in eps {
            if !(0.0..=czfault::faults::MAX_EPSILON).contains(e) {
                bail!("fault magnitude {e} outside [0, {}]", czfault::faults::MAX_EPSILON);
            }
        }
        if self.bench.instances == 0 {
            bail!("bench.instances must be positive");
        }
        Ok(())
    }

    /// Canonical JSON used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

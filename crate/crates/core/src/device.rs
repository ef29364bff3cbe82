//! Two-qutrit transmon model: Hamiltonian, dressed eigenstates, decoherence rates.
//!
//! Frequencies are angular (rad/s) with ħ = 1. Basis index of `|ij⟩` is `3i + j`,
//! qubit 1 (the flux-tuned control) being the most significant site.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cr, embed, Operator, C64};

pub const LEVELS: usize = 3;
pub const DIM: usize = 9;

/// Rad/s per GHz.
pub const GHZ: f64 = 2.0 * PI * 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub omega1_idle: f64,
    pub omega2: f64,
    pub alpha: f64,
    pub g: f64,
    pub kappa_inv: f64,
    pub g_res: f64,
    pub omega_r: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            omega1_idle: 5.5 * GHZ,
            omega2: 5.1 * GHZ,
            alpha: -0.3 * GHZ,
            g: 0.02 * GHZ,
            kappa_inv: 160e-9,
            g_res: 0.1 * GHZ,
            omega_r: 7.0 * GHZ,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.omega1_idle,
            self.omega2,
            self.alpha,
            self.g,
            self.kappa_inv,
            self.g_res,
            self.omega_r,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("device parameters"));
        }
        if self.alpha >= 0.0 {
            return Err(Error::Config("anharmonicity must be negative".into()));
        }
        if self.g <= 0.0 {
            return Err(Error::Config("coupling g must be positive".into()));
        }
        if self.kappa_inv <= 0.0 {
            return Err(Error::Config("resonator lifetime must be positive".into()));
        }
        if self.omega1_idle == self.resonance() {
            return Err(Error::Config(
                "idle point sits on the |11>-|20> crossing".into(),
            ));
        }
        Ok(())
    }

    /// Qubit-1 frequency of the |11⟩–|20⟩ crossing, ω₂ − α.
    pub fn resonance(&self) -> f64 {
        self.omega2 - self.alpha
    }

    pub fn kappa(&self) -> f64 {
        1.0 / self.kappa_inv
    }

    /// Mixing angle θ = √2 g / (ω₁ − ω₂ + α).
    pub fn theta_at(&self, omega1: f64) -> f64 {
        SQRT_2 * self.g / (omega1 - self.resonance())
    }

    pub fn theta_idle(&self) -> f64 {
        self.theta_at(self.omega1_idle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceParams {
    pub t1: f64,
    pub t_phi: f64,
}

impl DecoherenceParams {
    pub const NONE: DecoherenceParams = DecoherenceParams {
        t1: f64::INFINITY,
        t_phi: f64::INFINITY,
    };

    pub fn new(t1: f64, t_phi: f64) -> Result<Self> {
        if t1.is_nan() || t_phi.is_nan() || t1 <= 0.0 || t_phi <= 0.0 {
            return Err(Error::Config("t1 and t_phi must be positive".into()));
        }
        Ok(Self { t1, t_phi })
    }

    /// Builds from T1 and the total dephasing time T2 (≤ 2·T1).
    pub fn from_t1_t2(t1: f64, t2: f64) -> Result<Self> {
        let inv_phi = 1.0 / t2 - 1.0 / (2.0 * t1);
        if inv_phi < 0.0 {
            return Err(Error::Config("T2 may not exceed 2·T1".into()));
        }
        Self::new(t1, 1.0 / inv_phi)
    }

    pub fn t2(&self) -> f64 {
        total_t2(self.t1, self.t_phi)
    }

    pub fn is_none(&self) -> bool {
        self.t1.is_infinite() && self.t_phi.is_infinite()
    }
}

impl Default for DecoherenceParams {
    fn default() -> Self {
        Self::NONE
    }
}

/// Single-qutrit ladder operators.
#[derive(Debug, Clone)]
pub struct QutritOps {
    /// `|0⟩⟨1| + √2|1⟩⟨2|`
    pub j: Operator,
    /// `|1⟩⟨1| + 2|2⟩⟨2|`
    pub n: Operator,
    /// `|2⟩⟨2|`
    pub p2: Operator,
}

impl QutritOps {
    pub fn new() -> Self {
        let mut j = Operator::zeros(LEVELS);
        j[(0, 1)] = cr(1.0);
        j[(1, 2)] = cr(SQRT_2);
        Self {
            j,
            n: Operator::from_real_diag(&[0.0, 1.0, 2.0]),
            p2: Operator::from_real_diag(&[0.0, 0.0, 1.0]),
        }
    }

    pub fn l1(&self) -> &Operator {
        &self.j
    }

    pub fn l2(&self) -> &Operator {
        &self.n
    }
}

impl Default for QutritOps {
    fn default() -> Self {
        Self::new()
    }
}

/// Total excitation number of each two-qutrit basis state.
pub fn excitation_numbers() -> [usize; DIM] {
    let mut out = [0; DIM];
    for (k, n) in out.iter_mut().enumerate() {
        *n = k / LEVELS + k % LEVELS;
    }
    out
}

/// Two-qutrit Hamiltonian with qubit 1 at `omega1`.
pub fn build_hamiltonian(dev: &DeviceParams, omega1: f64) -> Operator {
    build_hamiltonian_shifted(dev, omega1, 0.0)
}

/// `build_hamiltonian(dev, omega1) − shift·N_tot`.
///
/// The coupling conserves total excitation number, so this differs from the
/// lab-frame Hamiltonian by a commuting term; propagators agree up to
/// `exp(i·shift·N_tot·t)`.
pub fn build_hamiltonian_shifted(dev: &DeviceParams, omega1: f64, shift: f64) -> Operator {
    let mut h = Operator::zeros(DIM);
    let level = |w: f64, n: usize| match n {
        0 => 0.0,
        1 => w - shift,
        _ => 2.0 * (w - shift) + dev.alpha,
    };
    for i in 0..LEVELS {
        for j in 0..LEVELS {
            let k = LEVELS * i + j;
            h[(k, k)] = cr(level(omega1, i) + level(dev.omega2, j));
        }
    }
    // g(J₁†J₂ + J₁J₂†): J† raises by one with amplitude √(n+1).
    let amp = |n: usize| (n as f64 + 1.0).sqrt();
    for i in 0..LEVELS - 1 {
        for j in 1..LEVELS {
            // |i, j⟩ → |i+1, j−1⟩
            let from = LEVELS * i + j;
            let to = LEVELS * (i + 1) + (j - 1);
            let v = dev.g * amp(i) * (j as f64).sqrt();
            h[(to, from)] = cr(v);
            h[(from, to)] = cr(v);
        }
    }
    h
}

/// Dressed eigenpairs labeled by the bare state they adiabatically connect to.
#[derive(Debug, Clone)]
pub struct DressedStates {
    /// `energies[k]` is E of the state labeled by bare index `k`.
    pub energies: [f64; DIM],
    /// Column `k` is the dressed state labeled `k`, phase-fixed so its
    /// component on bare state `k` is real and positive.
    pub vectors: Operator,
}

impl DressedStates {
    pub fn energy(&self, i: usize, j: usize) -> f64 {
        self.energies[LEVELS * i + j]
    }
}

fn overlap(a: &Operator, ca: usize, b: &Operator, cb: usize) -> f64 {
    let mut s = C64::new(0.0, 0.0);
    for r in 0..a.dim() {
        s += a[(r, ca)].conj() * b[(r, cb)];
    }
    s.norm()
}

/// Assigns each eigenvector of `h` to a column of `reference` by greedy
/// maximum overlap. Fails if any assignment overlaps less than 1/2.
fn label_against(h: &Operator, reference: &Operator) -> Result<DressedStates> {
    let (vals, vecs) = h.hermitian_eigen();
    let n = h.dim();
    let mut pairs = Vec::with_capacity(n * n);
    for e in 0..n {
        for l in 0..n {
            pairs.push((overlap(reference, l, &vecs, e), e, l));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut eig_used = vec![false; n];
    let mut label_of = vec![usize::MAX; n];
    for &(ov, e, l) in &pairs {
        if eig_used[e] || label_of[l] != usize::MAX {
            continue;
        }
        if ov < 0.5 {
            return Err(Error::Labeling(format!(
                "state {l} has overlap {ov:.3} with its best remaining match"
            )));
        }
        eig_used[e] = true;
        label_of[l] = e;
    }
    let mut energies = [0.0; DIM];
    let mut vectors = Operator::zeros(n);
    for l in 0..n {
        let e = label_of[l];
        energies[l] = vals[e];
        let pivot = vecs[(l, e)];
        let phase = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            cr(1.0)
        };
        for r in 0..n {
            vectors[(r, l)] = vecs[(r, e)] * phase;
        }
    }
    Ok(DressedStates { energies, vectors })
}

/// Labeled eigenpairs at `omega1`, continued adiabatically from the idle
/// point in steps no larger than g/10.
pub fn eigen_tracked(dev: &DeviceParams, omega1: f64) -> Result<DressedStates> {
    eigen_tracked_shifted(dev, omega1, 0.0)
}

/// As [`eigen_tracked`] for the shifted Hamiltonian; energies shift by
/// `−shift·N_tot`, eigenvectors are identical.
pub fn eigen_tracked_shifted(dev: &DeviceParams, omega1: f64, shift: f64) -> Result<DressedStates> {
    if !omega1.is_finite() {
        return Err(Error::NonFinite("omega1"));
    }
    let h_idle = build_hamiltonian_shifted(dev, dev.omega1_idle, shift);
    let mut states = label_against(&h_idle, &Operator::identity(DIM))?;
    let span = omega1 - dev.omega1_idle;
    let steps = (span.abs() / (dev.g / 10.0)).ceil() as usize;
    for s in 1..=steps {
        let w = dev.omega1_idle + span * s as f64 / steps as f64;
        let h = build_hamiltonian_shifted(dev, w, shift);
        states = label_against(&h, &states.vectors)?;
    }
    Ok(states)
}

/// ζ = E₁₁ − E₁₀ − E₀₁ at the idle point.
pub fn static_zz(dev: &DeviceParams) -> Result<f64> {
    let s = eigen_tracked_shifted(dev, dev.omega1_idle, dev.omega2)?;
    Ok(s.energy(1, 1) - s.energy(1, 0) - s.energy(0, 1) + s.energy(0, 0))
}

/// Second-order estimate 2g²(1/(Δ−α) − 1/(Δ+α)), Δ = ω₁ − ω₂, for equal anharmonicities.
pub fn static_zz_perturbative(dev: &DeviceParams) -> f64 {
    let delta = dev.omega1_idle - dev.omega2;
    2.0 * dev.g * dev.g * (1.0 / (delta - dev.alpha) - 1.0 / (delta + dev.alpha))
}

/// Purcell relaxation rate κ·g²/Δ².
pub fn purcell_rate(kappa: f64, g_res: f64, detuning: f64) -> Result<f64> {
    if detuning == 0.0 {
        return Err(Error::Domain("zero qubit-resonator detuning".into()));
    }
    Ok(kappa * (g_res / detuning).powi(2))
}

/// 1/T2 = 1/(2·T1) + 1/Tφ.
pub fn total_t2(t1: f64, t_phi: f64) -> f64 {
    1.0 / (1.0 / (2.0 * t1) + 1.0 / t_phi)
}

/// Dissipator rate for `L2 = |1⟩⟨1| + 2|2⟩⟨2|` that makes the 0–1 coherence
/// of a bare qubit decay as e^{−t/Tφ}.
pub fn dephasing_rate(t_phi: f64) -> f64 {
    2.0 / t_phi
}

/// Per-site (rate, operator) pairs for relaxation (`L1`) and dephasing (`L2`).
/// Zero-rate entries are dropped.
pub fn collapse_operators(dec: &DecoherenceParams, sites: usize) -> Result<Vec<(f64, Operator)>> {
    let ops = QutritOps::new();
    let mut out = Vec::new();
    for site in 0..sites {
        let relax = 1.0 / dec.t1;
        if relax > 0.0 {
            out.push((relax, embed(ops.l1(), site, sites, LEVELS)?));
        }
        let dephase = dephasing_rate(dec.t_phi);
        if dephase > 0.0 {
            out.push((dephase, embed(ops.l2(), site, sites, LEVELS)?));
        }
    }
    Ok(out)
}

//! Fault models for CZ control pulses and their gate-level channels.
//!
//! Pulse faults perturb the Fourier coefficients (ratio, bias) or cut the
//! pulse short (truncation). A missing gate leaves the qubits idling under
//! the static ZZ coupling. Leakage faults apply a small Hermitian generator
//! on the six lowest two-qutrit levels. Decoherence faults rerun the pulse
//! under the master equation.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{Circuit, GateChannel, GateChannelMap};
use crate::device::{collapse_operators, static_zz, DecoherenceParams, DIM};
use crate::error::{Error, Result};
use crate::evolution::{lindblad_map, TimeDependentHamiltonian};
use crate::gate::{pulse_propagator, CzCharacterization, GateModel};
use crate::linalg::{c, cr, project_computational, Operator, C64, COMPUTATIONAL_INDICES};
use crate::metrics::{cz, gate_fidelity, virtual_z_correct};
use crate::pulses::Pulse;

/// Largest accepted ε for ratio, bias and truncation faults.
pub const MAX_EPSILON: f64 = 0.5;
/// Largest accepted |χ| or |ζ| in a leakage generator.
pub const MAX_LEAKAGE: f64 = 0.1;
/// Two-qutrit indices of |00⟩, |01⟩, |02⟩, |10⟩, |11⟩, |20⟩.
pub const LEAKAGE_INDICES: [usize; 6] = [0, 1, 2, 3, 4, 6];
/// Integration steps per gate for the decoherent channel.
pub const DECOHERENT_STEPS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    Ratio,
    Bias,
    Truncation,
    MissingGate,
    Leakage,
    Decoherence,
}

impl FaultKind {
    pub fn is_pulse_fault(&self) -> bool {
        matches!(self, FaultKind::Ratio | FaultKind::Bias | FaultKind::Truncation)
    }

    pub fn name(&self) -> &'static str {
        match self {
            FaultKind::Ratio => "ratio",
            FaultKind::Bias => "bias",
            FaultKind::Truncation => "truncation",
            FaultKind::MissingGate => "missing_gate",
            FaultKind::Leakage => "leakage",
            FaultKind::Decoherence => "decoherence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultTarget {
    /// Position of a CZ in the decomposed circuit.
    Gate(usize),
    All,
}

/// Parameters of the leakage generator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakageParams {
    pub chi: [f64; 3],
    pub zeta: [f64; 4],
    pub phi: [f64; 3],
}

impl LeakageParams {
    pub fn uniform(chi: f64, zeta: f64) -> Self {
        Self {
            chi: [chi; 3],
            zeta: [zeta; 4],
            phi: [0.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.chi.iter().chain(&self.zeta).chain(&self.phi);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("leakage parameters"));
        }
        if self.chi.iter().chain(&self.zeta).any(|x| x.abs() > MAX_LEAKAGE) {
            return Err(Error::Domain(format!("leakage couplings must satisfy |x| <= {MAX_LEAKAGE}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Epsilon(f64),
    Leakage(LeakageParams),
    Decoherence(DecoherenceParams),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub target: FaultTarget,
    pub magnitude: Magnitude,
    /// 1-based λ index for ratio and bias faults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_index: Option<usize>,
}

impl FaultSpec {
    pub fn ratio(target: FaultTarget, n: usize, eps: f64) -> Self {
        Self {
            kind: FaultKind::Ratio,
            target,
            magnitude: Magnitude::Epsilon(eps),
            coefficient_index: Some(n),
        }
    }

    pub fn bias(target: FaultTarget, n: usize, eps: f64) -> Self {
        Self {
            kind: FaultKind::Bias,
            target,
            magnitude: Magnitude::Epsilon(eps),
            coefficient_index: Some(n),
        }
    }

    pub fn truncation(target: FaultTarget, eps: f64) -> Self {
        Self {
            kind: FaultKind::Truncation,
            target,
            magnitude: Magnitude::Epsilon(eps),
            coefficient_index: None,
        }
    }

    pub fn missing_gate(target: FaultTarget) -> Self {
        Self {
            kind: FaultKind::MissingGate,
            target,
            magnitude: Magnitude::None,
            coefficient_index: None,
        }
    }

    pub fn leakage(target: FaultTarget, params: LeakageParams) -> Self {
        Self {
            kind: FaultKind::Leakage,
            target,
            magnitude: Magnitude::Leakage(params),
            coefficient_index: None,
        }
    }

    pub fn decoherence(target: FaultTarget, params: DecoherenceParams) -> Self {
        Self {
            kind: FaultKind::Decoherence,
            target,
            magnitude: Magnitude::Decoherence(params),
            coefficient_index: None,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match self.magnitude {
            Magnitude::Epsilon(e) => Some(e),
            _ => None,
        }
    }

    /// Scalar used in tables: ε for pulse faults, 0 otherwise.
    pub fn magnitude_value(&self) -> f64 {
        self.epsilon().unwrap_or(0.0)
    }

    /// Short stable identifier, e.g. `ratio[1]@3`.
    pub fn id(&self) -> String {
        let mut s = self.kind.name().to_string();
        if let Some(n) = self.coefficient_index {
            s.push_str(&format!("[{n}]"));
        }
        match self.target {
            FaultTarget::Gate(g) => s.push_str(&format!("@{g}")),
            FaultTarget::All => s.push_str("@all"),
        }
        s
    }

    /// Checks the magnitude against the kind; `m` is the pulse's coefficient
    /// count when known.
    pub fn validate(&self, m: Option<usize>) -> Result<()> {
        match (self.kind, self.magnitude) {
            (FaultKind::Ratio | FaultKind::Bias | FaultKind::Truncation, Magnitude::Epsilon(e)) => {
                if !(0.0..=MAX_EPSILON).contains(&e) {
                    return Err(Error::Domain(format!("epsilon {e} outside [0, {MAX_EPSILON}]")));
                }
                if self.kind != FaultKind::Truncation {
                    let n = self
                        .coefficient_index
                        .ok_or_else(|| Error::FaultKind(format!("{} fault needs a coefficient index", self.kind.name())))?;
                    if n == 0 || m.is_some_and(|m| n > m) {
                        return Err(Error::FaultKind(format!("coefficient index {n} out of range")));
                    }
                }
                Ok(())
            }
            (FaultKind::MissingGate, Magnitude::None) => Ok(()),
            (FaultKind::Leakage, Magnitude::Leakage(p)) => p.validate(),
            (FaultKind::Decoherence, Magnitude::Decoherence(_)) => Ok(()),
            (k, _) => Err(Error::FaultKind(format!("magnitude does not match {} fault", k.name()))),
        }
    }

    pub fn applies_to(&self, position: usize) -> bool {
        match self.target {
            FaultTarget::All => true,
            FaultTarget::Gate(g) => g == position,
        }
    }
}

/// Applies a ratio, bias or truncation fault to a Fourier-family pulse.
pub fn apply_parameter_fault(p: &Pulse, f: &FaultSpec) -> Result<Pulse> {
    if !f.kind.is_pulse_fault() {
        return Err(Error::FaultKind(format!("{} is not a pulse-parameter fault", f.kind.name())));
    }
    let m = p
        .family
        .fourier_terms()
        .ok_or_else(|| Error::FaultKind(format!("{} pulses have no Fourier coefficients", p.family)))?;
    f.validate(Some(m))?;
    let eps = f.epsilon().expect("validated");
    let mut out = p.clone();
    match f.kind {
        FaultKind::Ratio => {
            let n = f.coefficient_index.expect("validated");
            out.lambdas[n - 1] *= 1.0 + eps;
        }
        FaultKind::Bias => {
            let n = f.coefficient_index.expect("validated");
            out.lambdas[n - 1] += eps * p.lambdas[0];
        }
        FaultKind::Truncation => {
            if eps > 0.0 {
                out.t_gate = p.schedule * (1.0 - eps);
            }
        }
        _ => unreachable!(),
    }
    Ok(out)
}

/// `diag(1, 1, 1, e^{iζt})`.
pub fn missing_gate_unitary(zeta: f64, t: f64) -> Operator {
    Operator::from_diag(&[cr(1.0), cr(1.0), cr(1.0), C64::from_polar(1.0, zeta * t)])
}

/// Hermitian generator S′ on |00⟩, |01⟩, |02⟩, |10⟩, |11⟩, |20⟩.
pub fn leakage_generator(p: &LeakageParams) -> Result<Operator> {
    p.validate()?;
    let [x1, x2, x3] = p.chi;
    let [z1, z2, z3, z4] = p.zeta;
    let [p1, p2, p3] = p.phi;
    let up = |x: f64, ph: f64| c(0.0, x) * C64::from_polar(1.0, ph);
    let mut s = Operator::zeros(6);
    s[(1, 1)] = cr(z1);
    s[(3, 3)] = cr(z2);
    s[(4, 4)] = cr(z3);
    s[(5, 5)] = cr(z4);
    s[(1, 3)] = up(x1, p1);
    s[(3, 1)] = up(x1, p1).conj();
    s[(2, 4)] = up(x2, p2);
    s[(4, 2)] = up(x2, p2).conj();
    s[(4, 5)] = up(x3, p3);
    s[(5, 4)] = up(x3, p3).conj();
    Ok(s)
}

/// `U·e^{iS′}`. `u` is either 6×6 in the leakage basis or a 9×9 two-qutrit
/// operator, in which case S′ is embedded on [`LEAKAGE_INDICES`].
pub fn noisy_gate_from_leakage(u: &Operator, s: &Operator) -> Result<Operator> {
    if s.dim() != 6 {
        return Err(Error::Dimension { expected: 6, found: s.dim() });
    }
    let gen = match u.dim() {
        6 => s.clone(),
        DIM => s.embed_block(DIM, &LEAKAGE_INDICES),
        d => return Err(Error::Dimension { expected: DIM, found: d }),
    };
    let e = gen.expm(c(0.0, 1.0))?;
    // The zero block of the embedding must stay identity on |12⟩, |21⟩, |22⟩.
    Ok(u.matmul(&e))
}

/// Diagnostic `tr(e^{iS′}† e^{iS′}) / d²`. It equals 1/d for any Hermitian S′.
pub fn leakage_trace_diagnostic(s: &Operator) -> Result<f64> {
    let e = s.expm(c(0.0, 1.0))?;
    let d = s.dim() as f64;
    Ok(e.adjoint().matmul(&e).trace().re / (d * d))
}

/// Fidelity of U·e^{iS′} against U on the six-level space.
pub fn leakage_fidelity(s: &Operator) -> Result<f64> {
    let u = Operator::identity(s.dim());
    gate_fidelity(&u, &noisy_gate_from_leakage(&u, s)?)
}

/// Builds gate-level CZ channels from a calibrated pulse.
#[derive(Debug, Clone)]
pub struct CzChannelFactory {
    pub model: GateModel,
    pub pulse: Pulse,
    pub steps: usize,
    pub zeta: f64,
    reference: CzCharacterization,
}

impl CzChannelFactory {
    pub fn new(model: GateModel, pulse: Pulse, steps: usize) -> Result<Self> {
        let zeta = static_zz(&model.dev)?;
        let u = pulse_propagator(&model, &pulse, steps)?;
        let reference = model.characterize(&u, pulse.t_gate);
        Ok(Self {
            model,
            pulse,
            steps,
            zeta,
            reference,
        })
    }

    /// Characterization of the fault-free pulse.
    pub fn reference(&self) -> &CzCharacterization {
        &self.reference
    }

    pub fn ideal_channel(&self) -> GateChannel {
        GateChannel::Matrix(self.reference.corrected.clone())
    }

    /// Characterization of a pulse with a parameter fault.
    pub fn characterize_pulse_fault(&self, f: &FaultSpec) -> Result<CzCharacterization> {
        let p = apply_parameter_fault(&self.pulse, f)?;
        let u = pulse_propagator(&self.model, &p, self.steps)?;
        Ok(self.model.characterize(&u, p.t_gate))
    }

    /// The channel that replaces one CZ under fault `f`.
    pub fn faulty_channel(&self, f: &FaultSpec) -> Result<GateChannel> {
        match f.kind {
            FaultKind::Ratio | FaultKind::Bias | FaultKind::Truncation => {
                Ok(GateChannel::Matrix(self.characterize_pulse_fault(f)?.corrected))
            }
            FaultKind::MissingGate => Ok(GateChannel::Matrix(missing_gate_unitary(self.zeta, self.pulse.t_gate))),
            FaultKind::Leakage => {
                let Magnitude::Leakage(p) = f.magnitude else {
                    return Err(Error::FaultKind("leakage fault without parameters".into()));
                };
                let s = leakage_generator(&p)?;
                let noisy = noisy_gate_from_leakage(&self.reference.frame, &s)?;
                let u4 = project_computational(&noisy)?;
                let (a, b) = self.reference.virtual_z;
                Ok(GateChannel::Matrix(virtual_z_correct(&u4, a, b)))
            }
            FaultKind::Decoherence => {
                let Magnitude::Decoherence(d) = f.magnitude else {
                    return Err(Error::FaultKind("decoherence fault without parameters".into()));
                };
                self.decoherent_channel(&d)
            }
        }
    }

    /// Process map of the calibrated pulse under the master equation,
    /// expressed in the same frame and virtual-Z correction as the unitary gate.
    pub fn decoherent_channel(&self, dec: &DecoherenceParams) -> Result<GateChannel> {
        let ops = collapse_operators(dec, 2)?;
        let t = self.pulse.t_gate;
        let model = &self.model;
        let pulse = &self.pulse;
        let h = TimeDependentHamiltonian::new(
            move |s| model.hamiltonian(pulse.omega1(&model.dev, s)),
            t,
            t / DECOHERENT_STEPS as f64,
        )?;
        let v = &model.dressed.vectors;
        let (a, b) = self.reference.virtual_z;
        let z4 = virtual_z_correct(&Operator::identity(4), a, b);
        let z = z4.embed_block(DIM, &COMPUTATIONAL_INDICES);
        let phases: Vec<C64> = model.frame_freqs.iter().map(|f| C64::from_polar(1.0, f * t)).collect();
        let pairs: Vec<(usize, usize)> = (0..4).flat_map(|p| (0..4).map(move |q| (p, q))).collect();
        let images: Vec<Operator> = pairs
            .par_iter()
            .map(|&(p, q)| -> Result<Operator> {
                let (ip, iq) = (COMPUTATIONAL_INDICES[p], COMPUTATIONAL_INDICES[q]);
                let x = v.matmul(&Operator::outer_basis(DIM, ip, iq)).matmul(&v.adjoint());
                let y = lindblad_map(&h, &x, &ops, 0.0, t)?;
                let mut w = v.adjoint().matmul(&y).matmul(v);
                for r in 0..DIM {
                    for s in 0..DIM {
                        w[(r, s)] *= phases[r] * phases[s].conj();
                    }
                }
                let w = z.matmul(&w).matmul(&z.adjoint());
                Ok(w.submatrix(&COMPUTATIONAL_INDICES))
            })
            .collect::<Result<_>>()?;
        Ok(GateChannel::Process(images))
    }

    /// Channel map with the calibrated CZ everywhere and `f` on its targets.
    pub fn channel_map(&self, circ: &Circuit, f: Option<&FaultSpec>) -> Result<GateChannelMap> {
        let czs = circ.cz_indices();
        let mut map = GateChannelMap::uniform_cz(circ, &self.ideal_channel());
        if let Some(f) = f {
            if let FaultTarget::Gate(g) = f.target {
                if !czs.contains(&g) {
                    return Err(Error::Circuit(format!("fault targets gate {g}, which is not a CZ")));
                }
            }
            let ch = self.faulty_channel(f)?;
            for &i in &czs {
                if f.applies_to(i) {
                    map.insert(i, ch.clone());
                }
            }
        }
        Ok(map)
    }
}

/// Fidelity of a 4×4 channel matrix against CZ.
pub fn channel_cz_fidelity(ch: &GateChannel) -> Option<f64> {
    match ch {
        GateChannel::Matrix(m) => gate_fidelity(&cz(), m).ok(),
        _ => None,
    }
}

/// All single-gate faults of a decomposed circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultUniverse {
    pub cz_count: usize,
    pub fourier_terms: usize,
    pub faults: Vec<FaultSpec>,
}

impl FaultUniverse {
    pub fn pulse_fault_count(&self) -> usize {
        self.faults.iter().filter(|f| f.kind.is_pulse_fault()).count()
    }

    pub fn len(&self) -> usize {
        self.faults.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faults.is_empty()
    }

    /// Writes `id,kind,target,coefficient,magnitude` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "id,kind,target,coefficient,magnitude")?;
        for f in &self.faults {
            let target = match f.target {
                FaultTarget::Gate(g) => g.to_string(),
                FaultTarget::All => "all".into(),
            };
            let coef = f.coefficient_index.map(|n| n.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", f.id(), f.kind.name(), target, coef, f.magnitude_value())?;
        }
        Ok(())
    }
}

/// Per CZ: ratio and bias on each of `m` coefficients, truncation, and a
/// missing gate, all at magnitude `eps`.
pub fn enumerate_faults(circ: &Circuit, m: usize, eps: f64) -> Result<FaultUniverse> {
    if !circ.is_decomposed() {
        return Err(Error::Circuit("fault enumeration needs a CZ-decomposed circuit".into()));
    }
    if !(0.0..=MAX_EPSILON).contains(&eps) {
        return Err(Error::Domain(format!("epsilon {eps} outside [0, {MAX_EPSILON}]")));
    }
    let czs = circ.cz_indices();
    let mut faults = Vec::with_capacity((2 * m + 2) * czs.len());
    for &g in &czs {
        let t = FaultTarget::Gate(g);
        for n in 1..=m {
            faults.push(FaultSpec::ratio(t, n, eps));
        }
        for n in 1..=m {
            faults.push(FaultSpec::bias(t, n, eps));
        }
        faults.push(FaultSpec::truncation(t, eps));
        faults.push(FaultSpec::missing_gate(t));
    }
    Ok(FaultUniverse {
        cz_count: czs.len(),
        fourier_terms: m,
        faults,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{build_full_adder, build_random_circuit, decompose_to_cz};
    use crate::device::DeviceParams;
    use crate::pulses::{default_theta_max, PulseFamily};
    use std::f64::consts::PI;

    fn pulse() -> Pulse {
        let dev = DeviceParams::default();
        Pulse::new(PulseFamily::Fourier(2), &dev, 144.9e-9, default_theta_max(&dev).unwrap()).unwrap()
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let p = pulse();
        for f in [
            FaultSpec::ratio(FaultTarget::All, 1, 0.0),
            FaultSpec::bias(FaultTarget::All, 2, 0.0),
            FaultSpec::truncation(FaultTarget::All, 0.0),
        ] {
            assert_eq!(apply_parameter_fault(&p, &f).unwrap(), p);
        }
    }

    #[test]
    fn parameter_faults_touch_the_right_fields() {
        let p = pulse();
        let r = apply_parameter_fault(&p, &FaultSpec::ratio(FaultTarget::All, 2, 0.1)).unwrap();
        assert!((r.lambdas[1] - 1.1 * p.lambdas[1]).abs() < 1e-9 * p.lambdas[1].abs());
        assert_eq!(r.lambdas[0], p.lambdas[0]);
        let b = apply_parameter_fault(&p, &FaultSpec::bias(FaultTarget::All, 2, 0.1)).unwrap();
        assert!((b.lambdas[1] - (p.lambdas[1] + 0.1 * p.lambdas[0])).abs() < 1e-6);
        let t = apply_parameter_fault(&p, &FaultSpec::truncation(FaultTarget::All, 0.1)).unwrap();
        assert!((t.t_gate - 0.9 * p.t_gate).abs() < 1e-18);
        assert_eq!(t.schedule, p.schedule);
        assert!(t.is_truncated());
    }

    #[test]
    fn parameter_fault_errors() {
        let p = pulse();
        assert!(apply_parameter_fault(&p, &FaultSpec::missing_gate(FaultTarget::All)).is_err());
        assert!(apply_parameter_fault(&p, &FaultSpec::ratio(FaultTarget::All, 3, 0.1)).is_err());
        assert!(apply_parameter_fault(&p, &FaultSpec::ratio(FaultTarget::All, 0, 0.1)).is_err());
        assert!(apply_parameter_fault(&p, &FaultSpec::ratio(FaultTarget::All, 1, 0.6)).is_err());
        let dev = DeviceParams::default();
        let sq = Pulse::new(PulseFamily::Square, &dev, 80e-9, 1.2).unwrap();
        assert!(apply_parameter_fault(&sq, &FaultSpec::truncation(FaultTarget::All, 0.1)).is_err());
    }

    #[test]
    fn missing_gate_periodicity() {
        let zeta = 2.0 * PI * 6e6;
        assert!(missing_gate_unitary(zeta, 0.0).max_diff(&Operator::identity(4)) < 1e-15);
        assert!(missing_gate_unitary(zeta, 2.0 * PI / zeta).max_diff(&Operator::identity(4)) < 1e-12);
        assert!(missing_gate_unitary(zeta, PI / zeta).max_diff(&cz()) < 1e-12);
        let (t, s) = (13e-9, 71e-9);
        let prod = missing_gate_unitary(zeta, t).matmul(&missing_gate_unitary(zeta, s));
        assert!(prod.max_diff(&missing_gate_unitary(zeta, t + s)) < 1e-12);
    }

    #[test]
    fn leakage_generator_structure() {
        assert!(leakage_generator(&LeakageParams::default()).unwrap().max_abs() == 0.0);
        let p = LeakageParams {
            chi: [0.03, -0.05, 0.07],
            zeta: [0.01, 0.02, -0.04, 0.09],
            phi: [0.3, 1.2, -2.0],
        };
        let s = leakage_generator(&p).unwrap();
        assert!(s.is_hermitian(1e-15));
        assert!(leakage_generator(&LeakageParams::uniform(0.2, 0.0)).is_err());
        let u = Operator::identity(6);
        assert!(noisy_gate_from_leakage(&u, &Operator::zeros(6)).unwrap().max_diff(&u) < 1e-15);
        assert!(noisy_gate_from_leakage(&u, &s).unwrap().is_unitary(1e-12));
    }

    #[test]
    fn leakage_fidelity_drop_matches_second_order() {
        let s = leakage_generator(&LeakageParams::uniform(1e-2, 1e-2)).unwrap();
        let drop = 1.0 - leakage_fidelity(&s).unwrap();
        // 1 − |tr e^{iS}|²/d² ≈ (d·tr S² − (tr S)²)/d² to second order.
        let tr = s.trace().re;
        let tr2 = s.matmul(&s).trace().re;
        let oracle = (6.0 * tr2 - tr * tr) / 36.0;
        assert!((drop - oracle).abs() < 0.05 * oracle);
        assert!(drop > 1e-5 && drop < 1e-3);
        assert!((leakage_trace_diagnostic(&s).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert!((leakage_trace_diagnostic(&Operator::zeros(6)).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn chi2_leaks_out_of_computational_block() {
        let p = LeakageParams {
            chi: [0.0, 0.08, 0.0],
            ..Default::default()
        };
        let s = leakage_generator(&p).unwrap();
        let u = noisy_gate_from_leakage(&Operator::identity(DIM), &s).unwrap();
        let u4 = project_computational(&u).unwrap();
        let col: f64 = u4.column(3).iter().map(|z| z.norm_sqr()).sum();
        assert!(col < 1.0 - 1e-4);
        let col0: f64 = u4.column(0).iter().map(|z| z.norm_sqr()).sum();
        assert!((col0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_counts() {
        let rc = decompose_to_cz(&build_random_circuit(1, 4, 9).unwrap()).unwrap();
        let u = enumerate_faults(&rc, 2, 0.1).unwrap();
        assert_eq!(u.pulse_fault_count(), 45);
        assert_eq!(u.len(), 54);
        let fa = decompose_to_cz(&build_full_adder()).unwrap();
        assert_eq!(enumerate_faults(&fa, 2, 0.1).unwrap().len(), 90);
        assert!(enumerate_faults(&Circuit::new(4), 2, 0.1).unwrap().is_empty());
        let mut one = Circuit::new(2);
        one.push(crate::circuits::Gate::cz(0, 1));
        assert_eq!(enumerate_faults(&one, 1, 0.1).unwrap().len(), 4);
        assert!(enumerate_faults(&build_full_adder(), 2, 0.1).is_err());
    }

    #[test]
    fn spec_serde_round_trip() {
        let f = FaultSpec::ratio(FaultTarget::Gate(4), 1, 0.1);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(serde_json::from_str::<FaultSpec>(&s).unwrap(), f);
        let l = FaultSpec::leakage(FaultTarget::All, LeakageParams::uniform(0.01, 0.01));
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(serde_json::from_str::<FaultSpec>(&s).unwrap(), l);
        assert_eq!(f.id(), "ratio[1]@4");
    }
}

//! Gate-level circuits and density-matrix simulation.
//!
//! Qubit 0 is the most significant bit of a basis index, so the input
//! `|a, b, c_in, c_out⟩` of the full adder has index `8a + 4b + 2c_in + c_out`.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::device::DecoherenceParams;
use crate::error::{Error, Result};
use crate::evolution::{lindblad_map, TimeDependentHamiltonian, LINDBLAD_STEPS};
use crate::linalg::{c, cr, DensityMatrix, Operator};

/// Largest supported circuit width.
pub const MAX_WIDTH: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateName {
    H,
    X,
    Rx,
    Ry,
    Rz,
    Cz,
    Cnot,
    Toffoli,
}

impl GateName {
    pub fn arity(&self) -> usize {
        match self {
            GateName::Cz | GateName::Cnot => 2,
            GateName::Toffoli => 3,
            _ => 1,
        }
    }

    pub fn takes_angle(&self) -> bool {
        matches!(self, GateName::Rx | GateName::Ry | GateName::Rz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub name: GateName,
    /// Controls first, target last.
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl Gate {
    pub fn new(name: GateName, qubits: &[usize]) -> Self {
        Self {
            name,
            qubits: qubits.to_vec(),
            angle: None,
        }
    }

    pub fn rotation(name: GateName, qubit: usize, angle: f64) -> Self {
        Self {
            name,
            qubits: vec![qubit],
            angle: Some(angle),
        }
    }

    pub fn h(q: usize) -> Self {
        Self::new(GateName::H, &[q])
    }

    pub fn cz(a: usize, b: usize) -> Self {
        Self::new(GateName::Cz, &[a, b])
    }

    pub fn cnot(ctrl: usize, tgt: usize) -> Self {
        Self::new(GateName::Cnot, &[ctrl, tgt])
    }

    pub fn toffoli(c1: usize, c2: usize, tgt: usize) -> Self {
        Self::new(GateName::Toffoli, &[c1, c2, tgt])
    }

    /// Ideal unitary on the gate's own qubits, first listed qubit most significant.
    pub fn matrix(&self) -> Operator {
        let s = FRAC_1_SQRT_2;
        let angle = self.angle.unwrap_or(0.0);
        let (ch, sh) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        match self.name {
            GateName::H => Operator::from_rows(&[&[cr(s), cr(s)], &[cr(s), cr(-s)]]),
            GateName::X => Operator::from_rows(&[&[cr(0.0), cr(1.0)], &[cr(1.0), cr(0.0)]]),
            GateName::Rx => Operator::from_rows(&[&[cr(ch), c(0.0, -sh)], &[c(0.0, -sh), cr(ch)]]),
            GateName::Ry => Operator::from_rows(&[&[cr(ch), cr(-sh)], &[cr(sh), cr(ch)]]),
            GateName::Rz => Operator::from_diag(&[c(ch, -sh), c(ch, sh)]),
            GateName::Cz => Operator::from_real_diag(&[1.0, 1.0, 1.0, -1.0]),
            GateName::Cnot => permutation(4, |i| if i >= 2 { i ^ 1 } else { i }),
            GateName::Toffoli => permutation(8, |i| if i >= 6 { i ^ 1 } else { i }),
        }
    }
}

fn permutation(dim: usize, f: impl Fn(usize) -> usize) -> Operator {
    let mut m = Operator::zeros(dim);
    for i in 0..dim {
        m[(f(i), i)] = cr(1.0);
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circuit {
    pub width: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Self { width, gates: Vec::new() }
    }

    pub fn push(&mut self, g: Gate) -> &mut Self {
        self.gates.push(g);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.width > MAX_WIDTH {
            return Err(Error::Circuit(format!("width {} outside 1..={MAX_WIDTH}", self.width)));
        }
        for (i, g) in self.gates.iter().enumerate() {
            if g.qubits.len() != g.name.arity() {
                return Err(Error::Circuit(format!("gate {i} has {} qubits, needs {}", g.qubits.len(), g.name.arity())));
            }
            if g.qubits.iter().any(|&q| q >= self.width) {
                return Err(Error::Circuit(format!("gate {i} addresses a qubit beyond width {}", self.width)));
            }
            for a in 0..g.qubits.len() {
                for b in a + 1..g.qubits.len() {
                    if g.qubits[a] == g.qubits[b] {
                        return Err(Error::Circuit(format!("gate {i} repeats qubit {}", g.qubits[a])));
                    }
                }
            }
            if g.name.takes_angle() != g.angle.is_some() {
                return Err(Error::Circuit(format!("gate {i} angle does not match {:?}", g.name)));
            }
            if g.angle.is_some_and(|a| !a.is_finite()) {
                return Err(Error::NonFinite("gate angle"));
            }
        }
        Ok(())
    }

    /// Positions of CZ gates in `gates`.
    pub fn cz_indices(&self) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.name == GateName::Cz)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_decomposed(&self) -> bool {
        self.gates.iter().all(|g| g.name.arity() == 1 || g.name == GateName::Cz)
    }

    pub fn dim(&self) -> usize {
        1 << self.width
    }

    /// Full 2^w × 2^w unitary of the ideal circuit.
    pub fn unitary(&self) -> Result<Operator> {
        self.validate()?;
        let mut u = Operator::identity(self.dim());
        for g in &self.gates {
            let full = lift(&g.matrix(), &g.qubits, self.width);
            u = full.matmul(&u);
        }
        Ok(u)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("circuit serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Circuit = serde_json::from_str(s).map_err(|e| Error::Circuit(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

/// Embeds a k-qubit operator acting on `qubits` (first most significant)
/// into a `width`-qubit register.
pub fn lift(op: &Operator, qubits: &[usize], width: usize) -> Operator {
    let dim = 1usize << width;
    let local = |i: usize| -> usize {
        let mut l = 0;
        for &q in qubits {
            l = (l << 1) | ((i >> (width - 1 - q)) & 1);
        }
        l
    };
    let mask: usize = qubits.iter().map(|&q| 1usize << (width - 1 - q)).sum();
    let mut out = Operator::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            if i & !mask == j & !mask {
                out[(i, j)] = op[(local(i), local(j))];
            }
        }
    }
    out
}

/// Toffoli on (c1, c2 → t) as single-qubit gates and six CNOTs.
fn toffoli_decomposition(c1: usize, c2: usize, t: usize) -> Vec<Gate> {
    let tq = FRAC_PI_4;
    vec![
        Gate::h(t),
        Gate::cnot(c2, t),
        Gate::rotation(GateName::Rz, t, -tq),
        Gate::cnot(c1, t),
        Gate::rotation(GateName::Rz, t, tq),
        Gate::cnot(c2, t),
        Gate::rotation(GateName::Rz, t, -tq),
        Gate::cnot(c1, t),
        Gate::rotation(GateName::Rz, c2, tq),
        Gate::rotation(GateName::Rz, t, tq),
        Gate::h(t),
        Gate::cnot(c1, c2),
        Gate::rotation(GateName::Rz, c1, tq),
        Gate::rotation(GateName::Rz, c2, -tq),
        Gate::cnot(c1, c2),
    ]
}

/// Rewrites CNOT and Toffoli into single-qubit gates and CZ.
pub fn decompose_to_cz(circ: &Circuit) -> Result<Circuit> {
    circ.validate()?;
    let mut out = Circuit::new(circ.width);
    let push_cnot = |out: &mut Circuit, ctrl: usize, tgt: usize| {
        out.push(Gate::h(tgt));
        out.push(Gate::cz(ctrl, tgt));
        out.push(Gate::h(tgt));
    };
    for g in &circ.gates {
        match g.name {
            GateName::Cnot => push_cnot(&mut out, g.qubits[0], g.qubits[1]),
            GateName::Toffoli => {
                for sub in toffoli_decomposition(g.qubits[0], g.qubits[1], g.qubits[2]) {
                    if sub.name == GateName::Cnot {
                        push_cnot(&mut out, sub.qubits[0], sub.qubits[1]);
                    } else {
                        out.push(sub);
                    }
                }
            }
            _ => {
                out.push(g.clone());
            }
        }
    }
    Ok(out)
}

/// Four-qubit full adder on (a, b, c_in, c_out): sum lands on c_in, carry on c_out.
pub fn build_full_adder() -> Circuit {
    let mut c = Circuit::new(4);
    c.push(Gate::toffoli(0, 1, 3))
        .push(Gate::cnot(0, 1))
        .push(Gate::toffoli(1, 2, 3))
        .push(Gate::cnot(1, 2))
        .push(Gate::cnot(0, 1));
    c
}

fn random_rotation(rng: &mut ChaCha8Rng, q: usize) -> Gate {
    let name = match rng.gen_range(0..3) {
        0 => GateName::Rx,
        1 => GateName::Ry,
        _ => GateName::Rz,
    };
    Gate::rotation(name, q, FRAC_PI_4)
}

/// Alternating layers of random π/4 rotations on every qubit and one CZ on a
/// random nearest-neighbour pair, closed by a final rotation layer.
pub fn build_random_circuit(seed: u64, width: usize, n_cz: usize) -> Result<Circuit> {
    if width < 2 || width > MAX_WIDTH {
        return Err(Error::Circuit(format!("random circuit width {width} outside 2..={MAX_WIDTH}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Circuit::new(width);
    for _ in 0..n_cz {
        for q in 0..width {
            let g = random_rotation(&mut rng, q);
            c.push(g);
        }
        let a = rng.gen_range(0..width - 1);
        c.push(Gate::cz(a, a + 1));
    }
    for q in 0..width {
        let g = random_rotation(&mut rng, q);
        c.push(g);
    }
    Ok(c)
}

/// Two-qubit benchmark: `depth` layers of two random π/4 rotations and a
/// CNOT with random control.
pub fn build_decoherence_benchmark(seed: u64, depth: usize) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Circuit::new(2);
    for _ in 0..depth {
        for q in 0..2 {
            let g = random_rotation(&mut rng, q);
            c.push(g);
        }
        let ctrl = rng.gen_range(0..2);
        c.push(Gate::cnot(ctrl, 1 - ctrl));
    }
    c
}

/// How a gate acts on the density matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GateChannel {
    /// `ρ ↦ MρM†`; M may be subunitary after projection.
    Matrix(Operator),
    /// `ρ ↦ Σ KρK†`.
    Kraus(Vec<Operator>),
    /// Images `E(|p⟩⟨q|)` stored at `p·d + q`.
    Process(Vec<Operator>),
}

impl GateChannel {
    pub fn local_dim(&self) -> usize {
        match self {
            GateChannel::Matrix(m) => m.dim(),
            GateChannel::Kraus(ks) => ks.first().map_or(0, |k| k.dim()),
            GateChannel::Process(ps) => ps.first().map_or(0, |p| p.dim()),
        }
    }

    /// Process-table form of the channel.
    pub fn to_process(&self) -> Vec<Operator> {
        let d = self.local_dim();
        let mut out = Vec::with_capacity(d * d);
        for p in 0..d {
            for q in 0..d {
                let x = Operator::outer_basis(d, p, q);
                out.push(self.apply_local(&x));
            }
        }
        out
    }

    fn apply_local(&self, x: &Operator) -> Operator {
        match self {
            GateChannel::Matrix(m) => m.matmul(x).matmul(&m.adjoint()),
            GateChannel::Kraus(ks) => {
                let mut acc = Operator::zeros(x.dim());
                for k in ks {
                    acc.axpy(cr(1.0), &k.matmul(x).matmul(&k.adjoint()));
                }
                acc
            }
            GateChannel::Process(ps) => {
                let d = x.dim();
                let mut acc = Operator::zeros(d);
                for p in 0..d {
                    for q in 0..d {
                        let w = x[(p, q)];
                        if w != cr(0.0) {
                            acc.axpy(w, &ps[p * d + q]);
                        }
                    }
                }
                acc
            }
        }
    }

    /// Applies the channel on `qubits` of a `width`-qubit density matrix.
    pub fn apply(&self, rho: &Operator, qubits: &[usize], width: usize) -> Operator {
        match self {
            GateChannel::Matrix(m) => {
                let full = lift(m, qubits, width);
                full.matmul(rho).matmul(&full.adjoint())
            }
            GateChannel::Kraus(ks) => {
                let mut acc = Operator::zeros(rho.dim());
                for k in ks {
                    let full = lift(k, qubits, width);
                    acc.axpy(cr(1.0), &full.matmul(rho).matmul(&full.adjoint()));
                }
                acc
            }
            GateChannel::Process(ps) => apply_process(ps, rho, qubits, width),
        }
    }
}

fn apply_process(ps: &[Operator], rho: &Operator, qubits: &[usize], width: usize) -> Operator {
    let dim = 1usize << width;
    let d = 1usize << qubits.len();
    let mask: usize = qubits.iter().map(|&q| 1usize << (width - 1 - q)).sum();
    let local = |i: usize| -> usize {
        let mut l = 0;
        for &q in qubits {
            l = (l << 1) | ((i >> (width - 1 - q)) & 1);
        }
        l
    };
    let scatter = |l: usize, rest: usize| -> usize {
        let mut i = rest;
        for (k, &q) in qubits.iter().enumerate() {
            let bit = (l >> (qubits.len() - 1 - k)) & 1;
            i |= bit << (width - 1 - q);
        }
        i
    };
    let mut out = Operator::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            let w = rho[(i, j)];
            if w == cr(0.0) {
                continue;
            }
            let (p, q) = (local(i), local(j));
            let (ri, rj) = (i & !mask, j & !mask);
            let img = &ps[p * d + q];
            for a in 0..d {
                for b in 0..d {
                    let v = img[(a, b)];
                    if v != cr(0.0) {
                        out[(scatter(a, ri), scatter(b, rj))] += w * v;
                    }
                }
            }
        }
    }
    out
}

/// Per-position overrides of the ideal gate action.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GateChannelMap {
    pub channels: BTreeMap<usize, GateChannel>,
}

impl GateChannelMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, position: usize, ch: GateChannel) {
        self.channels.insert(position, ch);
    }

    pub fn get(&self, position: usize) -> Option<&GateChannel> {
        self.channels.get(&position)
    }

    /// Same channel on every CZ position of `circ`.
    pub fn uniform_cz(circ: &Circuit, ch: &GateChannel) -> Self {
        let mut m = Self::new();
        for i in circ.cz_indices() {
            m.insert(i, ch.clone());
        }
        m
    }
}

/// Amplitude damping and pure dephasing of idle qubits.
#[derive(Debug, Clone)]
pub struct IdleNoise {
    pub decoherence: DecoherenceParams,
    pub single_qubit_time: f64,
    pub cz_time: f64,
    cache: HashMap<u64, GateChannel>,
}

impl IdleNoise {
    pub fn new(decoherence: DecoherenceParams, single_qubit_time: f64, cz_time: f64) -> Self {
        Self {
            decoherence,
            single_qubit_time,
            cz_time,
            cache: HashMap::new(),
        }
    }

    fn duration(&self, g: &Gate) -> f64 {
        if g.name.arity() == 1 {
            self.single_qubit_time
        } else {
            self.cz_time
        }
    }

    /// Single-qubit channel for an idle period, from the master equation of a
    /// qutrit restricted to its qubit subspace.
    pub fn channel(&mut self, duration: f64) -> Result<GateChannel> {
        if let Some(ch) = self.cache.get(&duration.to_bits()) {
            return Ok(ch.clone());
        }
        let ch = idle_qubit_channel(&self.decoherence, duration)?;
        self.cache.insert(duration.to_bits(), ch.clone());
        Ok(ch)
    }
}

/// Qubit process of free decay over `duration`.
pub fn idle_qubit_channel(dec: &DecoherenceParams, duration: f64) -> Result<GateChannel> {
    let ops = crate::device::collapse_operators(dec, 1)?;
    let h = TimeDependentHamiltonian::constant(Operator::zeros(3), duration, (duration / LINDBLAD_STEPS as f64).max(1e-15))?;
    let mut table = Vec::with_capacity(4);
    for p in 0..2 {
        for q in 0..2 {
            let x = Operator::outer_basis(3, p, q);
            let y = if duration > 0.0 { lindblad_map(&h, &x, &ops, 0.0, duration)? } else { x };
            table.push(y.submatrix(&[0, 1]));
        }
    }
    Ok(GateChannel::Process(table))
}

/// ASAP layering: each gate's moment index.
pub fn moments(circ: &Circuit) -> Vec<usize> {
    let mut frontier = vec![0usize; circ.width];
    let mut out = Vec::with_capacity(circ.gates.len());
    for g in &circ.gates {
        let m = g.qubits.iter().map(|&q| frontier[q]).max().unwrap_or(0);
        for &q in &g.qubits {
            frontier[q] = m + 1;
        }
        out.push(m);
    }
    out
}

/// Evolves `rho` through the circuit. Gates are applied in program order;
/// with idle noise, every qubit decays for the duration of each ASAP moment.
pub fn simulate_density(
    circ: &Circuit,
    rho: &DensityMatrix,
    channels: &GateChannelMap,
    mut idle: Option<&mut IdleNoise>,
) -> Result<Operator> {
    circ.validate()?;
    if rho.dim() != circ.dim() {
        return Err(Error::Dimension {
            expected: circ.dim(),
            found: rho.dim(),
        });
    }
    if let Some(&pos) = channels.channels.keys().find(|&&p| p >= circ.gates.len()) {
        return Err(Error::Circuit(format!("channel mapped to missing gate {pos}")));
    }
    let layer = moments(circ);
    let n_moments = layer.iter().map(|m| m + 1).max().unwrap_or(0);
    let mut by_moment: Vec<Vec<usize>> = vec![Vec::new(); n_moments];
    for (i, &m) in layer.iter().enumerate() {
        by_moment[m].push(i);
    }
    let mut state = rho.operator().clone();
    for gates in by_moment {
        let mut span: f64 = 0.0;
        for &i in &gates {
            let g = &circ.gates[i];
            state = match channels.get(i) {
                Some(ch) => {
                    if ch.local_dim() != 1 << g.qubits.len() {
                        return Err(Error::Circuit(format!("channel at gate {i} has wrong dimension")));
                    }
                    ch.apply(&state, &g.qubits, circ.width)
                }
                None => GateChannel::Matrix(g.matrix()).apply(&state, &g.qubits, circ.width),
            };
            if let Some(noise) = idle.as_deref() {
                span = span.max(noise.duration(g));
            }
        }
        if let Some(noise) = idle.as_deref_mut() {
            if span > 0.0 && !noise.decoherence.is_none() {
                let ch = noise.channel(span)?;
                for q in 0..circ.width {
                    state = ch.apply(&state, &[q], circ.width);
                }
            }
        }
    }
    Ok(state)
}

/// Output distribution over computational basis states for a basis input.
/// Population lost to leakage is renormalized away.
pub fn simulate_distribution(circ: &Circuit, input: usize, channels: &GateChannelMap) -> Result<Vec<f64>> {
    if !circ.is_decomposed() {
        return Err(Error::Circuit("circuit must be decomposed to CZ".into()));
    }
    if input >= circ.dim() {
        return Err(Error::Circuit(format!("input {input} outside 0..{}", circ.dim())));
    }
    let rho = DensityMatrix::basis(circ.dim(), input);
    let out = simulate_density(circ, &rho, channels, None)?;
    distribution_from(&out)
}

/// Diagonal of a density operator, clipped at zero and renormalized.
pub fn distribution_from(rho: &Operator) -> Result<Vec<f64>> {
    let mut p: Vec<f64> = rho.diagonal().iter().map(|z| z.re.max(0.0)).collect();
    let total: f64 = p.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Circuit("output state has no population".into()));
    }
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

/// Statevector probabilities of the ideal circuit.
pub fn statevector_distribution(circ: &Circuit, input: usize) -> Result<Vec<f64>> {
    let u = circ.unitary()?;
    Ok(u.column(input).iter().map(|z| z.norm_sqr()).collect())
}

pub fn bitstring(index: usize, width: usize) -> String {
    (0..width).map(|q| if (index >> (width - 1 - q)) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Writes `bitstring,probability` rows.
pub fn write_distribution_csv<W: Write>(mut w: W, probs: &[f64], width: usize) -> std::io::Result<()> {
    writeln!(w, "bitstring,probability")?;
    for (i, p) in probs.iter().enumerate() {
        writeln!(w, "{},{:.15e}", bitstring(i, width), p)?;
    }
    Ok(())
}

/// Default duration of a single-qubit gate.
pub const SINGLE_QUBIT_GATE_TIME: f64 = 20e-9;

/// Fit of `F(d) = A·e^{−d/τ} + C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub a: f64,
    pub tau: f64,
    pub c: f64,
    pub r_squared: f64,
}

impl ExpFit {
    pub fn eval(&self, d: f64) -> f64 {
        self.a * (-d / self.tau).exp() + self.c
    }
}

fn linear_part(x: &[f64], y: &[f64], tau: f64) -> (f64, f64, f64) {
    // Least squares for (A, C) at fixed τ.
    let n = x.len() as f64;
    let e: Vec<f64> = x.iter().map(|d| (-d / tau).exp()).collect();
    let (se, see) = (e.iter().sum::<f64>(), e.iter().map(|v| v * v).sum::<f64>());
    let sy = y.iter().sum::<f64>();
    let sey: f64 = e.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * see - se * se;
    let (a, c) = if det.abs() < 1e-300 {
        (0.0, sy / n)
    } else {
        ((n * sey - se * sy) / det, (see * sy - se * sey) / det)
    };
    let rss: f64 = e.iter().zip(y).map(|(ei, yi)| (a * ei + c - yi).powi(2)).sum();
    (a, c, rss)
}

/// Variable-projection fit: A and C are solved linearly for each τ, and τ
/// is found by a log-spaced scan followed by golden-section refinement.
pub fn fit_exponential(x: &[f64], y: &[f64]) -> Result<ExpFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Domain("exponential fit needs at least three points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit data"));
    }
    let span = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
    let span = span.max(1.0);
    let (lo, hi) = ((span * 1e-3).ln(), (span * 1e4).ln());
    let rss = |lt: f64| linear_part(x, y, lt.exp()).2;
    let grid = 400;
    let mut best = (lo, f64::INFINITY);
    for k in 0..=grid {
        let lt = lo + (hi - lo) * k as f64 / grid as f64;
        let r = rss(lt);
        if r < best.1 {
            best = (lt, r);
        }
    }
    let h = (hi - lo) / grid as f64;
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let m1 = b - phi * (b - a);
        let m2 = a + phi * (b - a);
        if rss(m1) < rss(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let tau = (0.5 * (a + b)).exp();
    let (amp, c, r) = linear_part(x, y, tau);
    Ok(ExpFit {
        a: amp,
        tau,
        c,
        r_squared: crate::stats::r_squared(y, r),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceBench {
    /// (depth, mean fidelity over instances)
    pub points: Vec<(usize, f64)>,
    pub fit: ExpFit,
}

/// Benchmark depths 1, 5, …, 101.
pub fn benchmark_depths() -> Vec<usize> {
    (1..=101).step_by(4).collect()
}

/// Mean output-state fidelity of random two-qubit benchmark circuits versus
/// depth, with ideal gates and idle decay of both qubits during every moment.
/// Instance `k` uses seed `seed + k`; shallower depths are prefixes of the
/// deepest circuit.
pub fn run_decoherence_benchmark(
    dec: &DecoherenceParams,
    cz_time: f64,
    depths: &[usize],
    instances: usize,
    seed: u64,
) -> Result<DecoherenceBench> {
    if depths.is_empty() || instances == 0 {
        return Err(Error::Config("benchmark needs depths and at least one instance".into()));
    }
    let max_depth = *depths.iter().max().expect("non-empty");
    let mut noise = IdleNoise::new(*dec, SINGLE_QUBIT_GATE_TIME, cz_time);
    let mut sums = vec![0.0; depths.len()];
    for k in 0..instances {
        let full = build_decoherence_benchmark(seed.wrapping_add(k as u64), max_depth);
        for (slot, &d) in depths.iter().enumerate() {
            let prefix = Circuit {
                width: 2,
                gates: full.gates[..3 * d].to_vec(),
            };
            let circ = decompose_to_cz(&prefix)?;
            let rho0 = DensityMatrix::basis(4, 0);
            let noisy = simulate_density(&circ, &rho0, &GateChannelMap::new(), Some(&mut noise))?;
            let psi = circ.unitary()?.column(0);
            let f: f64 = (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .map(|(i, j)| (psi[i].conj() * noisy[(i, j)] * psi[j]).re)
                .sum();
            sums[slot] += f;
        }
    }
    let points: Vec<(usize, f64)> = depths.iter().zip(&sums).map(|(&d, s)| (d, s / instances as f64)).collect();
    let x: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = fit_exponential(&x, &y)?;
    Ok(DecoherenceBench { points, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn global_phase_diff(a: &Operator, b: &Operator) -> f64 {
        let d = a.dim();
        let mut tr = cr(0.0);
        for i in 0..d {
            for k in 0..d {
                tr += a[(k, i)].conj() * b[(k, i)];
            }
        }
        let phase = if tr.norm() > 0.0 { tr / tr.norm() } else { cr(1.0) };
        a.scale(phase).max_diff(b)
    }

    #[test]
    fn cnot_decomposition_on_basis_states() {
        let mut c = Circuit::new(2);
        c.push(Gate::cnot(0, 1));
        let d = decompose_to_cz(&c).unwrap();
        assert_eq!(d.gates.len(), 3);
        let u = d.unitary().unwrap();
        for (i, o) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            assert!((u[(o, i)] - cr(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn toffoli_decomposition_matches_matrix() {
        let mut c = Circuit::new(3);
        c.push(Gate::toffoli(0, 1, 2));
        let d = decompose_to_cz(&c).unwrap();
        let oracle = Gate::toffoli(0, 1, 2).matrix();
        assert!(global_phase_diff(&d.unitary().unwrap(), &oracle) < 1e-10);
        assert_eq!(d.cz_indices().len(), 6);
        let mut c2 = Circuit::new(3);
        c2.push(Gate::toffoli(2, 0, 1));
        let d2 = decompose_to_cz(&c2).unwrap();
        assert!(global_phase_diff(&d2.unitary().unwrap(), &c2.unitary().unwrap()) < 1e-10);
    }

    #[test]
    fn full_adder_truth_table() {
        let fa = build_full_adder();
        let dec = decompose_to_cz(&fa).unwrap();
        assert_eq!(dec.cz_indices().len(), 15);
        for a in 0..2 {
            for b in 0..2 {
                for cin in 0..2 {
                    let input = (a << 3) | (b << 2) | (cin << 1);
                    let total = a + b + cin;
                    let expect = (a << 3) | (b << 2) | ((total & 1) << 1) | (total >> 1);
                    let p = simulate_distribution(&dec, input, &GateChannelMap::new()).unwrap();
                    assert!((p[expect] - 1.0).abs() < 1e-9, "input {input:04b}");
                }
            }
        }
        assert!(global_phase_diff(&dec.unitary().unwrap(), &fa.unitary().unwrap()) < 1e-9);
    }

    #[test]
    fn random_circuit_is_deterministic() {
        let a = build_random_circuit(7, 4, 9).unwrap();
        let b = build_random_circuit(7, 4, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cz_indices().len(), 9);
        assert_ne!(a, build_random_circuit(8, 4, 9).unwrap());
    }

    #[test]
    fn benchmark_circuit_counts() {
        assert!(build_decoherence_benchmark(1, 0).gates.is_empty());
        let c = build_decoherence_benchmark(1, 13);
        assert_eq!(c.gates.iter().filter(|g| g.name == GateName::Cnot).count(), 13);
    }

    #[test]
    fn hadamard_distribution() {
        let mut c = Circuit::new(1);
        c.push(Gate::h(0));
        let p = simulate_distribution(&c, 0, &GateChannelMap::new()).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.5).abs() < 1e-9);
        let empty = Circuit::new(3);
        let p = simulate_distribution(&empty, 5, &GateChannelMap::new()).unwrap();
        assert_eq!(p[5], 1.0);
    }

    #[test]
    fn density_matches_statevector() {
        let c = decompose_to_cz(&build_random_circuit(3, 4, 9).unwrap()).unwrap();
        for input in [0, 5, 15] {
            let a = simulate_distribution(&c, input, &GateChannelMap::new()).unwrap();
            let b = statevector_distribution(&c, input).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn process_form_agrees_with_matrix_form() {
        let c = decompose_to_cz(&build_random_circuit(11, 3, 4).unwrap()).unwrap();
        let mut map = GateChannelMap::new();
        for i in c.cz_indices() {
            map.insert(i, GateChannel::Process(GateChannel::Matrix(c.gates[i].matrix()).to_process()));
        }
        let a = simulate_distribution(&c, 3, &map).unwrap();
        let b = simulate_distribution(&c, 3, &GateChannelMap::new()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn idle_channel_matches_closed_form() {
        let dec = DecoherenceParams::new(10e-6, 4e-6).unwrap();
        let t = 1e-6;
        let ch = idle_qubit_channel(&dec, t).unwrap();
        let plus = Operator::from_rows(&[&[cr(0.5), cr(0.5)], &[cr(0.5), cr(0.5)]]);
        let out = ch.apply(&plus, &[0], 1);
        let coh = out[(0, 1)].norm();
        assert!((coh - 0.5 * (-t / dec.t2()).exp()).abs() < 1e-8);
        let one = Operator::from_real_diag(&[0.0, 1.0]);
        let out = ch.apply(&one, &[0], 1);
        assert!((out[(1, 1)].re - (-t / dec.t1).exp()).abs() < 1e-8);
    }

    #[test]
    fn json_round_trip() {
        let c = build_full_adder();
        let back = Circuit::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
        assert!(Circuit::from_json(r#"{"width":2,"gates":[{"name":"cz","qubits":[0,0]}]}"#).is_err());
        assert!(Circuit::from_json(r#"{"width":2,"gates":[],"extra":1}"#).is_err());
    }

    #[test]
    fn distribution_csv_format() {
        let mut buf = Vec::new();
        write_distribution_csv(&mut buf, &[0.25, 0.75], 1).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("bitstring,probability\n0,"));
    }
    #[test]
    fn exponential_fit_recovers_parameters() {
        let x: Vec<f64> = (0..26).map(|k| 1.0 + 4.0 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|d| 0.7 * (-d / 35.0).exp() + 0.28).collect();
        let f = fit_exponential(&x, &y).unwrap();
        assert!((f.tau - 35.0).abs() < 1e-3 && (f.a - 0.7).abs() < 1e-5 && (f.c - 0.28).abs() < 1e-5);
        assert!(f.r_squared > 1.0 - 1e-9);
    }

    #[test]
    fn benchmark_without_decoherence_is_flat() {
        let b = run_decoherence_benchmark(&DecoherenceParams::NONE, 145e-9, &[1, 5, 9], 2, 0).unwrap();
        assert!(b.points.iter().all(|p| p.1 > 0.999));
    }
}

//! Time-evolution engines: a midpoint product formula for unitaries and a
//! fixed-step RK4 integrator for the Lindblad master equation.

use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::{c, cr, DensityMatrix, Operator, HERMITICITY_TOL};

/// Default unitary steps per gate.
pub const UNITARY_STEPS: usize = 4000;
/// Default Lindblad steps per gate.
pub const LINDBLAD_STEPS: usize = 8000;

/// Trace drift beyond which a Lindblad run is rejected.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// dt-halving discrepancy beyond which a propagation is rejected.
pub const CONVERGENCE_LIMIT: f64 = 1e-4;

type Sampler<'a> = Box<dyn Fn(f64) -> Operator + Send + Sync + 'a>;

pub struct TimeDependentHamiltonian<'a> {
    sampler: Sampler<'a>,
    pub t_gate: f64,
    pub dt: f64,
}

impl<'a> TimeDependentHamiltonian<'a> {
    pub fn new(sampler: impl Fn(f64) -> Operator + Send + Sync + 'a, t_gate: f64, dt: f64) -> Result<Self> {
        if !(t_gate >= 0.0 && t_gate.is_finite()) {
            return Err(Error::Domain(format!("invalid duration {t_gate}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("invalid step {dt}")));
        }
        Ok(Self {
            sampler: Box::new(sampler),
            t_gate,
            dt,
        })
    }

    pub fn constant(h: Operator, t_gate: f64, dt: f64) -> Result<Self> {
        Self::new(move |_| h.clone(), t_gate, dt)
    }

    pub fn at(&self, t: f64) -> Operator {
        (self.sampler)(t)
    }

    pub fn dim(&self) -> usize {
        self.at(0.0).dim()
    }

    fn steps_over(&self, span: f64) -> usize {
        ((span / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }
}

/// Midpoint product `∏ exp(−i·H(t_k + dt/2)·dt)` over `[t0, t1]` in `steps` steps.
pub fn propagate_interval(h: &TimeDependentHamiltonian, t0: f64, t1: f64, steps: usize) -> Result<Operator> {
    if steps == 0 {
        return Err(Error::Domain("need at least one step".into()));
    }
    let dt = (t1 - t0) / steps as f64;
    let mut u = Operator::identity(h.dim());
    let mut next = Operator::zeros(u.dim());
    for k in 0..steps {
        let hk = h.at(t0 + (k as f64 + 0.5) * dt);
        if !hk.is_hermitian(1e-12 * hk.max_abs().max(1.0)) {
            return Err(Error::Domain(format!("non-Hermitian Hamiltonian at step {k}")));
        }
        let step = hk.expm(c(0.0, -dt))?;
        step.matmul_into(&u, &mut next);
        std::mem::swap(&mut u, &mut next);
    }
    Ok(u)
}

/// Propagator over `[0, t_gate]` without the step-halving check.
pub fn propagate_unitary_unchecked(h: &TimeDependentHamiltonian) -> Result<Operator> {
    propagate_interval(h, 0.0, h.t_gate, h.steps_over(h.t_gate))
}

/// Propagator over `[0, t_gate]`, verified against a run at half the step.
pub fn propagate_unitary(h: &TimeDependentHamiltonian) -> Result<Operator> {
    if h.dt > h.t_gate / 2000.0 && h.t_gate > 0.0 {
        return Err(Error::StepSize(format!(
            "dt = {:e} exceeds t_gate/2000 = {:e}",
            h.dt,
            h.t_gate / 2000.0
        )));
    }
    let n = h.steps_over(h.t_gate);
    let u = propagate_interval(h, 0.0, h.t_gate, n)?;
    let fine = propagate_interval(h, 0.0, h.t_gate, 2 * n)?;
    let delta = u.max_diff(&fine);
    if delta > CONVERGENCE_LIMIT {
        return Err(Error::StepSize(format!("dt-halving changed U by {delta:e}")));
    }
    Ok(fine)
}

/// Lindblad right-hand side in the form `−i(H_eff ρ − ρ H_eff†) + Σ γ L ρ L†`
/// with `H_eff = H − (i/2) Σ γ L†L`.
struct Liouvillian {
    jumps: Vec<(f64, Operator, Operator)>,
    anti: Operator,
}

impl Liouvillian {
    fn new(c_ops: &[(f64, Operator)], dim: usize) -> Result<Self> {
        let mut anti = Operator::zeros(dim);
        let mut jumps = Vec::new();
        for (rate, l) in c_ops {
            if !(*rate >= 0.0) || !rate.is_finite() {
                return Err(Error::Domain(format!("collapse rate {rate} must be finite and >= 0")));
            }
            if l.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: l.dim(),
                });
            }
            if *rate == 0.0 {
                continue;
            }
            let ld = l.adjoint();
            anti.axpy(cr(*rate), &ld.matmul(l));
            jumps.push((*rate, l.clone(), ld));
        }
        Ok(Self { jumps, anti })
    }

    fn h_eff(&self, h: &Operator) -> Operator {
        let mut out = h.clone();
        out.axpy(c(0.0, -0.5), &self.anti);
        out
    }

    fn apply(&self, h_eff: &Operator, rho: &Operator) -> Operator {
        let left = h_eff.matmul(rho);
        let right = rho.matmul(&h_eff.adjoint());
        let mut out = &left - &right;
        out = out.scale(c(0.0, -1.0));
        for (rate, l, ld) in &self.jumps {
            out.axpy(cr(*rate), &l.matmul(rho).matmul(ld));
        }
        out
    }
}

fn rk4_step(liou: &Liouvillian, h: &TimeDependentHamiltonian, t: f64, dt: f64, rho: &Operator) -> Operator {
    let h0 = liou.h_eff(&h.at(t));
    let hm = liou.h_eff(&h.at(t + 0.5 * dt));
    let h1 = liou.h_eff(&h.at(t + dt));
    let k1 = liou.apply(&h0, rho);
    let mut tmp = rho.clone();
    tmp.axpy(cr(0.5 * dt), &k1);
    let k2 = liou.apply(&hm, &tmp);
    let mut tmp = rho.clone();
    tmp.axpy(cr(0.5 * dt), &k2);
    let k3 = liou.apply(&hm, &tmp);
    let mut tmp = rho.clone();
    tmp.axpy(cr(dt), &k3);
    let k4 = liou.apply(&h1, &tmp);
    let mut out = rho.clone();
    out.axpy(cr(dt / 6.0), &k1);
    out.axpy(cr(dt / 3.0), &k2);
    out.axpy(cr(dt / 3.0), &k3);
    out.axpy(cr(dt / 6.0), &k4);
    out
}

/// Evolves an arbitrary operator (not necessarily a state) under the master
/// equation from `t0` to `t1`. Used to build process maps column by column.
pub fn lindblad_map(
    h: &TimeDependentHamiltonian,
    x0: &Operator,
    c_ops: &[(f64, Operator)],
    t0: f64,
    t1: f64,
) -> Result<Operator> {
    let liou = Liouvillian::new(c_ops, x0.dim())?;
    let n = h.steps_over(t1 - t0);
    let dt = (t1 - t0) / n as f64;
    let mut x = x0.clone();
    for k in 0..n {
        x = rk4_step(&liou, h, t0 + k as f64 * dt, dt, &x);
    }
    if !x.is_finite() {
        return Err(Error::StepSize("Lindblad integration diverged".into()));
    }
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Largest |tr ρ − tr ρ₀| seen over all steps.
    pub trace_drift: f64,
    /// Smallest eigenvalue over the recorded states.
    pub min_eigenvalue: f64,
}

impl EvolutionResult {
    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("at least one state")
    }

    /// Writes `t, p_0, …, p_{d−1}, trace` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self.states.first().map_or(0, |s| s.dim());
        let mut header = String::from("t");
        for k in 0..dim {
            header.push_str(&format!(",p{k}"));
        }
        header.push_str(",trace");
        writeln!(w, "{header}")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut line = format!("{t:e}");
            for p in s.populations() {
                line.push_str(&format!(",{p:.12e}"));
            }
            line.push_str(&format!(",{:.15}", s.trace()));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Fixed-step RK4 integration of the master equation, recording ρ at each
/// requested time. Steps never exceed `h.dt`.
pub fn lindblad_evolve(
    h: &TimeDependentHamiltonian,
    rho0: &DensityMatrix,
    c_ops: &[(f64, Operator)],
    times: &[f64],
) -> Result<EvolutionResult> {
    let dim = rho0.dim();
    if h.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: h.dim(),
        });
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Domain("output times must be sorted and non-negative".into()));
    }
    let liou = Liouvillian::new(c_ops, dim)?;
    let tr0 = rho0.trace();
    let mut rho = rho0.operator().clone();
    let mut t = 0.0;
    let mut drift: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut states = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let n = h.steps_over(span);
            let dt = span / n as f64;
            for k in 0..n {
                rho = rk4_step(&liou, h, t + k as f64 * dt, dt, &rho);
                let d = (rho.trace().re - tr0).abs();
                drift = drift.max(d);
                if d > TRACE_DRIFT_LIMIT || !rho.is_finite() {
                    return Err(Error::StepSize(format!(
                        "trace drift {d:e} at t = {:e}",
                        t + (k + 1) as f64 * dt
                    )));
                }
            }
            t = target;
        }
        // Remove rounding-level anti-Hermitian parts before recording.
        let sym = (&rho + &rho.adjoint()).scale_real(0.5);
        debug_assert!(rho.max_diff(&sym) < HERMITICITY_TOL.max(1e-10 * rho.max_abs()));
        rho = sym;
        let state = DensityMatrix::new_unchecked(rho.clone());
        min_eig = min_eig.min(state.min_eigenvalue());
        states.push(state);
    }
    Ok(EvolutionResult {
        times: times.to_vec(),
        states,
        trace_drift: drift,
        min_eigenvalue: min_eig,
    })
}

/// Conjugates a density matrix by a unitary.
pub fn conjugate(u: &Operator, rho: &Operator) -> Operator {
    u.matmul(rho).matmul(&u.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{collapse_operators, DecoherenceParams};
    use crate::linalg::embed;

    fn qutrit_h() -> Operator {
        let mut h = Operator::from_real_diag(&[0.0, 1.3e8, 2.4e8]);
        h[(0, 1)] = c(2e7, 1e7);
        h[(1, 0)] = c(2e7, -1e7);
        h
    }

    #[test]
    fn constant_hamiltonian_matches_expm() {
        let h = qutrit_h();
        let t = 50e-9;
        let td = TimeDependentHamiltonian::constant(h.clone(), t, t / 4000.0).unwrap();
        let u = propagate_unitary(&td).unwrap();
        let oracle = h.expm(c(0.0, -t)).unwrap();
        assert!(u.max_diff(&oracle) < 1e-8);
        assert!(u.is_unitary(1e-8));
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let td = TimeDependentHamiltonian::constant(Operator::zeros(3), 1e-8, 1e-12).unwrap();
        let u = propagate_unitary(&td).unwrap();
        assert!(u.max_diff(&Operator::identity(3)) < 1e-15);
    }

    #[test]
    fn composition_of_intervals() {
        let td = TimeDependentHamiltonian::new(
            |t| {
                let mut h = qutrit_h();
                h[(2, 2)] = cr(2.4e8 * (1.0 + (t * 1e8).sin()));
                h
            },
            40e-9,
            1e-11,
        )
        .unwrap();
        let whole = propagate_interval(&td, 0.0, 40e-9, 4000).unwrap();
        let a = propagate_interval(&td, 0.0, 15e-9, 1500).unwrap();
        let b = propagate_interval(&td, 15e-9, 40e-9, 2500).unwrap();
        assert!(b.matmul(&a).max_diff(&whole) < 1e-8);
    }

    #[test]
    fn coarse_step_is_rejected() {
        let td = TimeDependentHamiltonian::constant(qutrit_h(), 50e-9, 1e-9).unwrap();
        assert!(matches!(propagate_unitary(&td), Err(Error::StepSize(_))));
    }

    #[test]
    fn amplitude_damping_decay() {
        let t1 = 2e-6;
        let dec = DecoherenceParams::new(t1, f64::INFINITY).unwrap();
        let ops = collapse_operators(&dec, 1).unwrap();
        let td = TimeDependentHamiltonian::constant(Operator::zeros(3), 4e-6, 4e-6 / 8000.0).unwrap();
        let times: Vec<f64> = (0..=8).map(|k| k as f64 * 0.5e-6).collect();
        let res = lindblad_evolve(&td, &DensityMatrix::basis(3, 1), &ops, &times).unwrap();
        for (t, s) in times.iter().zip(&res.states) {
            let p1 = s.operator()[(1, 1)].re;
            assert!((p1 - (-t / t1).exp()).abs() < 1e-4);
        }
        assert!(res.trace_drift <= 1e-8);
        assert!(res.min_eigenvalue >= -1e-8);
    }

    #[test]
    fn pure_dephasing_coherence() {
        let tphi = 1e-6;
        let dec = DecoherenceParams::new(f64::INFINITY, tphi).unwrap();
        let ops = collapse_operators(&dec, 1).unwrap();
        let s = 0.5f64.sqrt();
        let plus = DensityMatrix::pure(&[cr(s), cr(s), cr(0.0)]).unwrap();
        let td = TimeDependentHamiltonian::constant(Operator::zeros(3), 3e-6, 3e-6 / 8000.0).unwrap();
        let times: Vec<f64> = (0..=6).map(|k| k as f64 * 0.5e-6).collect();
        let res = lindblad_evolve(&td, &plus, &ops, &times).unwrap();
        for (t, st) in times.iter().zip(&res.states) {
            let coh = st.operator()[(0, 1)].norm();
            assert!((coh - 0.5 * (-t / tphi).exp()).abs() < 1e-4);
        }
    }

    #[test]
    fn closed_system_matches_unitary() {
        let h = qutrit_h();
        let t = 30e-9;
        let td = TimeDependentHamiltonian::constant(h.clone(), t, t / 8000.0).unwrap();
        let rho0 = DensityMatrix::basis(3, 1);
        let res = lindblad_evolve(&td, &rho0, &[], &[t]).unwrap();
        let u = h.expm(c(0.0, -t)).unwrap();
        let oracle = conjugate(&u, rho0.operator());
        assert!(res.last().operator().max_diff(&oracle) < 1e-6);
    }

    #[test]
    fn empty_dynamics_is_static() {
        let td = TimeDependentHamiltonian::constant(Operator::zeros(9), 1e-7, 1e-10).unwrap();
        let rho0 = DensityMatrix::maximally_mixed(9);
        let res = lindblad_evolve(&td, &rho0, &[], &[0.0, 5e-8, 1e-7]).unwrap();
        for s in &res.states {
            assert!(s.operator().max_diff(rho0.operator()) < 1e-15);
        }
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let td = TimeDependentHamiltonian::constant(Operator::zeros(3), 1e-7, 1e-9).unwrap();
        let ops = vec![(1e6, embed(&Operator::from_real_diag(&[0.0, 1.0, 2.0]), 0, 1, 3).unwrap())];
        let res = lindblad_evolve(&td, &DensityMatrix::basis(3, 0), &ops, &[0.0, 1e-7]).unwrap();
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,p0,p1,p2,trace");
        assert_eq!(lines.len(), 3);
    }
}

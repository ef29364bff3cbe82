//! State and gate fidelities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cr, DensityMatrix, Operator, C64};

/// Eigenvalues below this are treated as zero when taking square roots.
pub const EIGEN_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityKind {
    State,
    Gate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub value: f64,
    pub kind: FidelityKind,
    pub dim: usize,
}

impl FidelityReport {
    pub fn state(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<Self> {
        Ok(Self {
            value: state_fidelity(rho, sigma)?,
            kind: FidelityKind::State,
            dim: rho.dim(),
        })
    }

    pub fn gate(u_ideal: &Operator, u_real: &Operator) -> Result<Self> {
        Ok(Self {
            value: gate_fidelity(u_ideal, u_real)?,
            kind: FidelityKind::Gate,
            dim: u_ideal.dim(),
        })
    }
}

fn clamp_sqrt(x: f64) -> f64 {
    if x < EIGEN_CLAMP {
        0.0
    } else {
        x.sqrt()
    }
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let sqrt_rho = rho.operator().hermitian_map(clamp_sqrt);
    let mut inner = sqrt_rho.matmul(sigma.operator()).matmul(&sqrt_rho);
    // Symmetrize against rounding before the eigensolve.
    inner = (&inner + &inner.adjoint()).scale_real(0.5);
    let (vals, _) = inner.hermitian_eigen();
    let tr: f64 = vals.into_iter().map(clamp_sqrt).sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// `|tr(U_ideal† U_real)|² / d²`.
pub fn gate_fidelity(u_ideal: &Operator, u_real: &Operator) -> Result<f64> {
    let d = u_ideal.dim();
    if u_real.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            found: u_real.dim(),
        });
    }
    let mut tr = cr(0.0);
    for i in 0..d {
        for k in 0..d {
            tr += u_ideal[(k, i)].conj() * u_real[(k, i)];
        }
    }
    Ok(tr.norm_sqr() / (d * d) as f64)
}

pub fn cz() -> Operator {
    Operator::from_real_diag(&[1.0, 1.0, 1.0, -1.0])
}

/// Closed-form virtual-Z angles (θ_a, θ_b) with θ_b = −arg(u₀₁/u₀₀),
/// θ_a = −arg(u₁₀/u₀₀), reading the diagonal of a 4×4 block.
pub fn virtual_z_phases(u4: &Operator) -> (f64, f64) {
    let u00 = u4[(0, 0)];
    let theta_b = -(u4[(1, 1)] / u00).arg();
    let theta_a = -(u4[(2, 2)] / u00).arg();
    (theta_a, theta_b)
}

/// `diag(1, e^{iθ_b}, e^{iθ_a}, e^{i(θ_a+θ_b)}) · u4`.
pub fn virtual_z_correct(u4: &Operator, theta_a: f64, theta_b: f64) -> Operator {
    let z = virtual_z(theta_a, theta_b);
    z.matmul(u4)
}

pub fn virtual_z(theta_a: f64, theta_b: f64) -> Operator {
    Operator::from_diag(&[
        cr(1.0),
        C64::from_polar(1.0, theta_b),
        C64::from_polar(1.0, theta_a),
        C64::from_polar(1.0, theta_a + theta_b),
    ])
}

/// Gate fidelity against CZ after closed-form virtual-Z correction.
pub fn phase_corrected_gate_fidelity(u4: &Operator) -> f64 {
    let (a, b) = virtual_z_phases(u4);
    let corrected = virtual_z_correct(u4, a, b);
    gate_fidelity(&cz(), &corrected).expect("4x4 block")
}

/// arg(u₁₁·u₀₀ / (u₀₁·u₁₀)) of the diagonal, in (−π, π].
pub fn conditional_phase(u4: &Operator) -> f64 {
    (u4[(3, 3)] * u4[(0, 0)] / (u4[(1, 1)] * u4[(2, 2)])).arg()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use std::f64::consts::PI;

    #[test]
    fn state_fidelity_examples() {
        let r0 = DensityMatrix::basis(2, 0);
        let r1 = DensityMatrix::basis(2, 1);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!((state_fidelity(&r0, &r0).unwrap() - 1.0).abs() < 1e-12);
        assert!(state_fidelity(&r0, &r1).unwrap().abs() < 1e-12);
        assert!((state_fidelity(&r0, &mixed).unwrap() - 0.5).abs() < 1e-12);
        assert!((state_fidelity(&mixed, &r0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pure_state_overlap() {
        let s = 0.5f64.sqrt();
        let psi = [cr(s), c(0.0, s)];
        let phi = [cr(1.0), cr(0.0)];
        let a = DensityMatrix::pure(&psi).unwrap();
        let b = DensityMatrix::pure(&phi).unwrap();
        assert!((state_fidelity(&a, &b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gate_fidelity_examples() {
        let z = Operator::from_real_diag(&[1.0, -1.0]);
        assert!(gate_fidelity(&Operator::identity(2), &z).unwrap().abs() < 1e-15);
        assert!((gate_fidelity(&cz(), &Operator::identity(4)).unwrap() - 0.25).abs() < 1e-15);
        assert!((gate_fidelity(&cz(), &cz()).unwrap() - 1.0).abs() < 1e-15);
        assert!(gate_fidelity(&cz(), &z).is_err());
    }

    #[test]
    fn corrected_fidelity_examples() {
        let noisy = virtual_z(0.7, -1.3).matmul(&cz());
        assert!((phase_corrected_gate_fidelity(&noisy) - 1.0).abs() < 1e-10);
        assert!((phase_corrected_gate_fidelity(&Operator::identity(4)) - 0.25).abs() < 1e-12);
        let u = Operator::from_diag(&[cr(1.0), cr(1.0), cr(1.0), C64::from_polar(1.0, PI * 0.9)]);
        let oracle = (cr(3.0) - C64::from_polar(1.0, PI * 0.9)).norm_sqr() / 16.0;
        assert!((phase_corrected_gate_fidelity(&u) - oracle).abs() < 1e-12);
    }

    #[test]
    fn identity_phase_scan() {
        // The closed-form correction leaves I at 0.25; a full scan over local
        // Z phases reaches 0.5 at θ_a = θ_b = π/2.
        assert!((phase_corrected_gate_fidelity(&Operator::identity(4)) - 0.25).abs() < 1e-15);
        let mut best = 0.0f64;
        for i in 0..64 {
            for j in 0..64 {
                let a = 2.0 * PI * i as f64 / 64.0;
                let b = 2.0 * PI * j as f64 / 64.0;
                let f = gate_fidelity(&cz(), &virtual_z(a, b)).unwrap();
                best = best.max(f);
            }
        }
        assert!((best - 0.5).abs() < 1e-12);
    }
}

use std::f64::consts::PI;

use czfault::circuits::{build_random_circuit, decompose_to_cz, simulate_distribution, statevector_distribution, GateChannelMap};
use czfault::faults::missing_gate_unitary;
use czfault::linalg::{c, cr, DensityMatrix, Operator, C64};
use czfault::metrics::{gate_fidelity, state_fidelity};
use czfault::testgen::{chi_square_statistic, Binning};
use proptest::prelude::*;

fn hermitian(entries: &[f64], dim: usize) -> Operator {
    let mut h = Operator::zeros(dim);
    let mut k = 0;
    for i in 0..dim {
        h[(i, i)] = cr(entries[k]);
        k += 1;
        for j in i + 1..dim {
            let z = c(entries[k], entries[k + 1]);
            k += 2;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

fn unitary(entries: &[f64], dim: usize) -> Operator {
    hermitian(entries, dim).expm(c(0.0, 1.0)).unwrap()
}

fn density(entries: &[f64], dim: usize) -> DensityMatrix {
    let a = hermitian(entries, dim);
    let rho = a.matmul(&a.adjoint());
    let tr = rho.trace().re;
    DensityMatrix::new(rho.scale_real(1.0 / tr)).unwrap()
}

fn entries(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, dim * dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gate_fidelity_bounded_and_phase_blind(a in entries(4), b in entries(4), phi in 0.0..(2.0 * PI)) {
        let u = unitary(&a, 4);
        let v = unitary(&b, 4);
        let f = gate_fidelity(&u, &v).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        let g = gate_fidelity(&u, &v.scale(C64::from_polar(1.0, phi))).unwrap();
        prop_assert!((f - g).abs() <= 1e-12);
        prop_assert!((gate_fidelity(&u, &u).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn state_fidelity_symmetric_and_bounded(a in entries(3), b in entries(3)) {
        let rho = density(&a, 3);
        let sigma = density(&b, 3);
        let f = state_fidelity(&rho, &sigma).unwrap();
        let g = state_fidelity(&sigma, &rho).unwrap();
        prop_assert!((-1e-9..=1.0 + 1e-9).contains(&f));
        prop_assert!((f - g).abs() <= 1e-7);
    }

    #[test]
    fn missing_gate_composes_additively(t1 in 0.0..500e-9f64, t2 in 0.0..500e-9f64) {
        let zeta = -2.0 * PI * 6.37e6;
        let ab = missing_gate_unitary(zeta, t1).matmul(&missing_gate_unitary(zeta, t2));
        prop_assert!(ab.max_diff(&missing_gate_unitary(zeta, t1 + t2)) <= 1e-12);
        prop_assert!(ab.is_unitary(1e-12));
    }

    #[test]
    fn circuit_distributions_normalized(seed in 0u64..1000, input in 0usize..16) {
        let circ = decompose_to_cz(&build_random_circuit(seed, 4, 5).unwrap()).unwrap();
        let p = simulate_distribution(&circ, input, &GateChannelMap::new()).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&x| x >= -1e-12));
        let q = statevector_distribution(&circ, input).unwrap();
        let diff = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-10);
    }

    #[test]
    fn random_circuits_deterministic(seed in 0u64..10_000) {
        let a = build_random_circuit(seed, 4, 9).unwrap();
        let b = build_random_circuit(seed, 4, 9).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn chi_square_matches_histogram(weights in prop::collection::vec(0.0..1.0f64, 2..10), draws in prop::collection::vec(0.0..1.0f64, 1..200)) {
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 1e-3);
        let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
        // Inverse-CDF sampling into a histogram, then the textbook sum.
        let mut counts = vec![0u64; p.len()];
        for u in &draws {
            let mut acc = 0.0;
            let mut k = p.len() - 1;
            for (j, pj) in p.iter().enumerate() {
                acc += pj;
                if *u < acc {
                    k = j;
                    break;
                }
            }
            counts[k] += 1;
        }
        let n = draws.len() as u64;
        let bins = Binning::new(&p).unwrap();
        let mut obs = vec![0.0; bins.probs.len()];
        for (j, &k) in counts.iter().enumerate() {
            obs[bins.bin_of[j]] += k as f64;
        }
        let mut expected_stat = 0.0;
        let mut infinite = false;
        for (o, q) in obs.iter().zip(&bins.probs) {
            let mu = n as f64 * q;
            if mu == 0.0 {
                infinite |= *o > 0.0;
            } else {
                expected_stat += (o - mu).powi(2) / mu;
            }
        }
        let s = chi_square_statistic(&counts, &p, n).unwrap();
        if infinite {
            prop_assert!(s.is_infinite());
        } else {
            prop_assert!((s - expected_stat).abs() <= 1e-9 * (1.0 + expected_stat));
        }
        prop_assert_eq!(bins.dof() + 1, bins.probs.iter().filter(|&&q| q > 0.0).count());
    }
}

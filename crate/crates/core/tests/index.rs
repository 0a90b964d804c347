mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topoflat::harmonic::OperatorProfile;
use topoflat::index::*;
use topoflat::lattice::{presets, Disorder, DisorderLaw};
use topoflat::linalg::{cis, CMat, C64};

#[test]
fn fedosov_equals_kernel_count_on_partial_isometries() {
    for seed in 0..40 {
        let (m, n, r) = common::random_shape(seed);
        let v = common::partial_isometry(m, n, r, seed);
        let expect = n as f64 - m as f64;
        for power in [1, 2, 3] {
            let f = fedosov_index(&v, power, TraceKind::Ordinary).unwrap();
            assert!((f.value - expect).abs() < 1e-9, "shape {m}x{n} rank {r}: {}", f.value);
            assert!(f.param("m_residual").unwrap() < 1e-8);
        }
        let k = kernel_count_index(&v).unwrap();
        assert_eq!((k.kernel, k.cokernel), ((n - r) as f64, (m - r) as f64));
    }
}

#[test]
fn fedosov_converges_in_m_for_almost_unitaries() {
    let s = CMat::from_fn(31, 30, |i, j| if i == j + 1 { C64::new(0.95, 0.0) } else { C64::new(0.0, 0.0) });
    let values: Vec<f64> = [40, 60, 80].iter().map(|&m| fedosov_index(&s, m, TraceKind::Ordinary).unwrap().value).collect();
    assert!(values.iter().all(|v| (v + 1.0).abs() < 1e-8));
    assert!(matches!(fedosov_index(&(s * C64::new(1.5, 0.0)), 2, TraceKind::Ordinary), Err(topoflat::error::Error::NotSummable(_))));
}

#[test]
fn toeplitz_index_survives_corner_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let symbol = OperatorProfile::scalar(1, &[(vec![0], C64::new(0.4, 0.0)), (vec![1], C64::new(1.0, 0.0))]);
    let base = toeplitz_index(&symbol, 60).unwrap().value;
    assert_eq!(base, -1.0);
    for size in [1, 3, 5] {
        let k = CMat::from_fn(size, size, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 3.0);
        assert_eq!(toeplitz_index_with(&symbol, 60, Some(&k)).unwrap().value, base);
    }
}

#[test]
fn toeplitz_index_survives_small_symbol_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let symbol = OperatorProfile::scalar(1, &[(vec![0], C64::new(0.3, 0.0)), (vec![2], C64::new(1.0, 0.0))]);
    let min = symbol_min_modulus(&symbol, 2048);
    let base = toeplitz_index(&symbol, 80).unwrap().value;
    assert_eq!(base, -2.0);
    for _ in 0..5 {
        let mut pert = symbol.clone();
        let budget = 0.09 * min / 5.0;
        for x in -2..=2i64 {
            let c = cis(rng.random::<f64>() * std::f64::consts::TAU) * budget * rng.random::<f64>();
            let e = pert.coeffs.entry(vec![x]).or_insert_with(|| CMat::zeros(1, 1));
            e[(0, 0)] += c;
        }
        assert_eq!(toeplitz_index(&pert, 80).unwrap().value, base);
    }
}

#[test]
fn winding_plus_index_vanishes_for_chains() {
    for (lam, w) in [(0.3, 1.0), (0.5, 1.0), (1.6, 0.0)] {
        let rec = sobolev_index_check(&presets::ssh(lam), 256, 60).unwrap();
        assert!((rec.winding.value - w).abs() < 1e-9);
        assert!(rec.residual < 1e-9);
    }
}

#[test]
fn graphene_slices_carry_a_third() {
    let slices = 12;
    let total: f64 = (0..slices)
        .map(|i| {
            let k2 = (i as f64 + 0.5) / slices as f64;
            let c = C64::new(1.0, 0.0) + cis(2.0 * std::f64::consts::PI * k2);
            let symbol = OperatorProfile::scalar(1, &[(vec![0], c), (vec![1], C64::new(1.0, 0.0))]);
            toeplitz_index(&symbol, 200).unwrap().value
        })
        .sum();
    assert_eq!(total / slices as f64, -1.0 / 3.0);
}

#[test]
fn disordered_chain_index_is_stable() {
    let m = presets::ssh(0.5).with_disorder(Some(Disorder { law: DisorderLaw::ChiralBond, strength: 0.3 })).unwrap();
    let seeds: Vec<u64> = (0..10).collect();
    let avg = disorder_averaged_index(&m, 100, &seeds).unwrap();
    assert!(avg.per_seed.iter().all(|&v| v == -1.0));
    assert_eq!(avg.stderr, 0.0);
}

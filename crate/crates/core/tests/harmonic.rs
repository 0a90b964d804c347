mod common;

use topoflat::harmonic::*;
use topoflat::lattice::{Boundary, BoxSpec};
use topoflat::linalg::{cis, max_abs, C64};

#[test]
fn windows_partition_unity() {
    for j_max in [2, 4, 6] {
        let w = DyadicWindows::new(j_max).unwrap();
        assert!(w.partition_residual(1) < 1e-12);
        assert!(w.partition_residual(2) < 1e-12);
    }
}

#[test]
fn dyadic_blocks_reconstruct_the_operator() {
    let a = common::random_profile(2, 7, 1.0, 1);
    let w = DyadicWindows::new(3).unwrap();
    let boxs = BoxSpec::new(&[10, 10], Boundary::Open);
    let whole = materialize(&a, &boxs).unwrap();
    let mut sum = whole.clone() * C64::new(0.0, 0.0);
    for j in 0..=w.j_max {
        sum += materialize(&w.apply(j, &a), &boxs).unwrap();
    }
    assert!(max_abs(&(sum - whole)) < 1e-10);
}

#[test]
fn phase_action_preserves_block_norms() {
    let a = common::random_profile(2, 5, 0.5, 2);
    let w = DyadicWindows::new(3).unwrap();
    let engine = NormEngine::Interior { lengths: vec![12, 12], margin: 3 };
    for p in [1.0, 2.0, f64::INFINITY] {
        let base = besov_terms(&a, p, &w, &engine).unwrap();
        let moved = besov_terms(&a.phase_shift(&[0.137, 0.71]), p, &w, &engine).unwrap();
        for (x, y) in base.iter().zip(&moved) {
            assert!((x - y).abs() < 1e-10);
        }
    }
    let periodic = NormEngine::Periodic { lengths: vec![12, 12] };
    let b0 = besov_norm(&a, 0.5, 2.0, 2.0, &w, &periodic).unwrap();
    let b1 = besov_norm(&a.phase_shift(&[5.0 / 12.0, 1.0 / 12.0]), 0.5, 2.0, 2.0, &w, &periodic).unwrap();
    assert!((b0 - b1).abs() < 1e-10);
}

#[test]
fn lp_norms_are_log_convex() {
    let engine = NormEngine::Bloch { n: 48 };
    for seed in 0..6 {
        let a = common::random_profile(1 + (seed as usize % 2), 4, 0.5, seed);
        for (p0, p1, theta) in [(1.0, 4.0, 0.3), (2.0, f64::INFINITY, 0.5), (1.0, 2.0, 0.8)] {
            let p = 1.0 / ((1.0 - theta) / p0 + theta / p1);
            let lhs = lp_norm(&a, p, &engine).unwrap();
            let rhs = lp_norm(&a, p0, &engine).unwrap().powf(1.0 - theta) * lp_norm(&a, p1, &engine).unwrap().powf(theta);
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}

#[test]
fn hankel_lives_in_the_corner() {
    let m = 6;
    let a = common::random_profile(1, m, 0.0, 3);
    let h = hankel_matrix(&a, 20).unwrap();
    for i in 0..20 {
        for j in 0..20 {
            if i + j + 1 > m as usize {
                assert_eq!(h[(i, j)], C64::new(0.0, 0.0));
            }
        }
    }
    assert!(h[(0, 0)] != C64::new(0.0, 0.0));
}

#[test]
fn geometric_symbol_has_rank_one_hankel() {
    let r = 0.5;
    let a = OperatorProfile::from_symbol(|k| C64::new(1.0, 0.0) / (C64::new(1.0, 0.0) - cis(2.0 * std::f64::consts::PI * k) * r), 1024, 1e-16);
    let h = hankel_matrix(&a, 64).unwrap();
    let mut s: Vec<f64> = h.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    assert!((s[0] - r / (1.0 - r * r)).abs() < 1e-10);
    assert!(s[1..].iter().all(|&v| v < 1e-10));
    assert_eq!(numerical_rank(&h, 1e-10), 1);
}

#[test]
fn peller_ratios_are_bounded_and_stable() {
    let mut family: Vec<OperatorProfile> = (1..=8).map(|w| OperatorProfile::scalar(1, &[(vec![w], C64::new(1.0, 0.0))])).collect();
    family.extend([0.2, 0.3, 0.5].map(common::smoothed_step));
    let w = DyadicWindows::new(9).unwrap();
    let engine = NormEngine::Bloch { n: 1024 };
    for p in [1.0, 2.0] {
        let a = peller_ratio(&family, p, 128, &w, &engine).unwrap();
        let b = peller_ratio(&family, p, 256, &w, &engine).unwrap();
        println!("p = {p}: sup ratio {:.4} (L = 128), {:.4} (L = 256)", a.sup, b.sup);
        assert!(a.sup.is_finite() && a.sup < 10.0);
        assert!((a.sup - b.sup).abs() <= 0.05 * a.sup);
    }
}

#[test]
fn besov_and_difference_norms_are_equivalent() {
    let w = DyadicWindows::new(5).unwrap();
    let engine = NormEngine::Bloch { n: 64 };
    let tg = TGrid::dyadic(8);
    let mut coarse = Vec::new();
    let mut fine = Vec::new();
    for a in common::equivalence_family() {
        let b = besov_norm(&a, 0.5, 2.0, 2.0, &w, &engine).unwrap();
        coarse.push((b, finite_difference_norm(&a, 0.5, 2.0, 2.0, 2, &tg, &engine).unwrap()));
        fine.push((b, finite_difference_norm(&a, 0.5, 2.0, 2.0, 2, &tg.doubled(), &engine).unwrap()));
    }
    let (c1, c2) = (common::bracket(&coarse), common::bracket(&fine));
    println!("equivalence constant {c1:.3}, doubled t-grid {c2:.3}");
    assert!(c1 < 50.0 && c2 < 50.0);
    assert!((c1 - c2).abs() < 0.05 * c1);
}

#[test]
fn oversized_profiles_are_rejected() {
    let a = common::random_profile(1, 20, 0.0, 4);
    let w = DyadicWindows::new(3).unwrap();
    assert!(besov_norm(&a, 0.5, 2.0, 2.0, &w, &NormEngine::Bloch { n: 64 }).is_err());
    assert!(hankel_matrix(&common::random_profile(2, 2, 0.0, 5), 4).is_err());
}

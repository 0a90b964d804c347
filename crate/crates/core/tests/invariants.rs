mod common;

use topoflat::invariants::*;
use topoflat::lattice::{build_bulk, presets, Boundary, BoxSpec};
use topoflat::linalg::{cis, CMat};
use topoflat::spectral::{fermi_projection_field, fermi_unitary, fermi_unitary_field};

#[test]
fn graphene_winding_is_a_third_along_both_axes() {
    let oracle = common::slice_fraction(1.0);
    assert!((oracle - 1.0 / 3.0).abs() < 1e-12);
    for j in 0..2 {
        let w = winding_of_model(&presets::graphene(), &Direction::axis(2, j), 600).unwrap();
        assert!((w.value - oracle).abs() < 1e-3, "e{}: {}", j + 1, w.value);
    }
}

#[test]
fn generic_field_path_matches_scalar_path() {
    let m = presets::honeycomb_lambda(1.3);
    let dir = Direction::new(&[0.6, 0.8]).unwrap();
    let fast = winding_of_model(&m, &dir, 120).unwrap();
    let field = fermi_unitary_field(&m, &[120, 120], &[0.5, 0.5], None).unwrap();
    let slow = winding_number(&field, &dir).unwrap();
    assert!((fast.value - slow.value).abs() < 1e-12);
}

#[test]
fn honeycomb_sweep_follows_slice_oracle() {
    let n = 600;
    let params = param_grid(0.2, 3.0, 0.05);
    let rows = weak_invariant_sweep(&params, |lam| winding_of_model(&presets::honeycomb_lambda(lam), &Direction::axis(2, 0), n));
    for row in &rows {
        let v = row.result.as_ref().unwrap().value;
        assert!((v - common::slice_fraction(row.param)).abs() <= 2.0 / n as f64, "lambda {}: {v}", row.param);
        if row.param >= 2.05 {
            assert!(v.abs() < 1e-4);
        }
    }
}

#[test]
fn chern_swaps_sign_and_is_rotation_invariant() {
    let p = fermi_projection_field(&presets::chern_two_band(1.0), &[40, 40], &[0.5, 0.5], 0.0).unwrap();
    let ab = even_chern(&p, &[1.0, 0.0], &[0.0, 1.0]).unwrap().value;
    let ba = even_chern(&p, &[0.0, 1.0], &[1.0, 0.0]).unwrap().value;
    assert!((ab + ba).abs() < 1e-12);
    for th in [0.3f64, 1.1, 2.5] {
        let (c, s) = (th.cos(), th.sin());
        let rot = even_chern(&p, &[c, s], &[-s, c]).unwrap().value;
        assert!((rot - ab).abs() < 1e-6);
    }
}

#[test]
fn chern_matches_plaquette_oracle() {
    let qwz = presets::chern_two_band(1.0);
    let p = fermi_projection_field(&qwz, &[48, 48], &[0.5, 0.5], 0.0).unwrap();
    let c = even_chern(&p, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
    let oracle = common::plaquette_chern(&qwz, 48, 1);
    assert!((c.value - c.value.round()).abs() < 1e-6);
    // 2 pi i T(p [nabla_1 p, nabla_2 p]) and the oriented Berry-flux sum differ by a sign
    assert_eq!(c.value.round(), -oracle.round());
    let trivial = presets::chern_two_band(3.0);
    let p = fermi_projection_field(&trivial, &[32, 32], &[0.5, 0.5], 0.0).unwrap();
    assert!(even_chern(&p, &[1.0, 0.0], &[0.0, 1.0]).unwrap().value.abs() < 1e-6);
    assert_eq!(common::plaquette_chern(&trivial, 32, 1).round(), 0.0);
}

#[test]
fn kspace_and_realspace_winding_agree() {
    let m = presets::ssh(0.5);
    let k = winding_of_model(&m, &Direction::axis(1, 0), 300).unwrap();
    let r = build_bulk(&m, &BoxSpec::new(&[60], Boundary::Periodic), 0).unwrap();
    let u = fermi_unitary(&r, None).unwrap();
    let x = winding_realspace(&r, &u, &Direction::axis(1, 0), 20).unwrap();
    assert!((k.value - x.value).abs() < 5e-3, "{} vs {}", k.value, x.value);
}

#[test]
fn constant_phase_leaves_winding_unchanged() {
    let u = fermi_unitary_field(&presets::ssh(0.4), &[64], &[0.5], None).unwrap();
    let w = winding_number(&u, &Direction::axis(1, 0)).unwrap().value;
    for phi in [0.7, 2.0, -1.3] {
        assert_eq!(winding_number(&u.scale_by(cis(phi)), &Direction::axis(1, 0)).unwrap().value, w);
    }
}

#[test]
fn winding_is_additive_for_block_products() {
    let diag = |a: i32, b: i32| {
        KField::from_fn(&[50], &[0.5], move |k| {
            let mut m = CMat::zeros(2, 2);
            m[(0, 0)] = cis(2.0 * std::f64::consts::PI * a as f64 * k[0]);
            m[(1, 1)] = cis(2.0 * std::f64::consts::PI * b as f64 * k[0]);
            m
        })
    };
    let (u, w) = (diag(1, 0), diag(2, 1));
    let dir = Direction::axis(1, 0);
    let sum = winding_number(&u, &dir).unwrap().value + winding_number(&w, &dir).unwrap().value;
    assert!((winding_number(&u.mul(&w), &dir).unwrap().value - sum).abs() < 1e-9);
    assert!((sum - 4.0).abs() < 1e-9);
}

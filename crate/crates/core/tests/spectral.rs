use topoflat::error::Error;
use topoflat::lattice::{build_bulk, presets, Boundary, BoxSpec, Disorder, DisorderLaw};
use topoflat::linalg::{hermiticity_defect, max_abs, op_norm, EigenSystem};
use topoflat::spectral::*;

#[test]
fn projections_are_idempotent_and_hermitian() {
    let m = presets::chern_two_band(1.0);
    let p = fermi_projection_field(&m, &[16, 16], &[0.5, 0.5], 0.0).unwrap();
    assert!(p.projection_defect() < 1e-9);
    let r = build_bulk(&presets::harper(1, 3), &BoxSpec::new(&[6, 6], Boundary::Periodic), 0).unwrap();
    let es = EigenSystem::new(&r.dense());
    let pf = fermi_projection(&es, -1.5, 1e-10).unwrap();
    assert!(max_abs(&(&pf * &pf - &pf)) < 1e-9);
    assert!(hermiticity_defect(&pf) < 1e-9);
}

#[test]
fn approximate_sign_is_monotone_and_contractive() {
    let r = build_bulk(&presets::graphene(), &BoxSpec::new(&[6, 6], Boundary::Periodic), 0).unwrap();
    let h = r.dense();
    let es = EigenSystem::new(&h);
    let shifted = EigenSystem::new(&(&h + topoflat::linalg::CMat::identity(h.nrows(), h.ncols()) * topoflat::linalg::C64::new(0.3, 0.0)));
    for eps in [0.01, 0.1, 1.0] {
        let s = approx_sign(&es, eps);
        let t = approx_sign(&shifted, eps);
        assert!(op_norm(&s) <= 1.0);
        let gap = EigenSystem::new(&(&t - &s));
        assert!(gap.values[0] >= -1e-12);
    }
}

#[test]
fn chiral_spectrum_is_symmetric() {
    let bond = Disorder { law: DisorderLaw::ChiralBond, strength: 0.5 };
    let m = presets::graphene().with_disorder(Some(bond)).unwrap();
    let r = build_bulk(&m, &BoxSpec::new(&[7, 5], Boundary::Open), 4).unwrap();
    let v = EigenSystem::new(&r.dense()).values;
    let n = v.len();
    for i in 0..n {
        assert!((v[i] + v[n - 1 - i]).abs() < 1e-9);
    }
}

#[test]
fn dos_mass_and_paths_agree() {
    let m = presets::graphene();
    let clean = dos_kgrid(&m, 120, 7, Some(3.0)).unwrap();
    assert!((clean.total() - 2.0).abs() < 1e-9);
    let boxed = dos_disorder(&m, &BoxSpec::new(&[24, 24], Boundary::Periodic), &[0], 7, Some(3.0)).unwrap();
    assert!((boxed.total() - 2.0).abs() < 1e-9);
    for (a, b) in clean.mass.iter().zip(&boxed.mass) {
        assert!((a - b).abs() < 0.03, "bin masses {a} vs {b}");
    }
}

#[test]
fn unitary_reconstructs_sign() {
    let r = build_bulk(&presets::honeycomb_lambda(2.6), &BoxSpec::new(&[6, 6], Boundary::Periodic), 0).unwrap();
    let h = r.dense();
    let u = fermi_unitary(&r, None).unwrap();
    let sgn = EigenSystem::new(&h).apply(f64::signum);
    assert!(max_abs(&(sign_from_unitary(&u, 2) - sgn)) < 1e-9);
}

#[test]
fn pseudogap_exponents() {
    let fit = |lam: f64| pseudogap_exponent(&dos_kgrid(&presets::honeycomb_lambda(lam), 2000, 4000, None).unwrap(), 0.0, None);
    assert!((fit(1.0).unwrap().gamma - 2.0).abs() < 0.3);
    assert!((fit(2.0).unwrap().gamma - 1.5).abs() < 0.3);
    let gapped = dos_kgrid(&presets::honeycomb_lambda(3.0), 400, 400, None).unwrap();
    assert_eq!(pseudogap_exponent(&gapped, 0.0, None).unwrap_err(), Error::GapDetected);
}

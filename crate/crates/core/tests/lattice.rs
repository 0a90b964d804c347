use std::f64::consts::PI;

use topoflat::lattice::{build_bulk, magnetic_translation, presets, Boundary, BoxSpec, ChiralGrading, Disorder, DisorderLaw};
use topoflat::linalg::{cis, hermiticity_defect, max_abs, CMat, C64};

fn grading(sites: usize, n: usize) -> CMat {
    let g = ChiralGrading::new(n);
    CMat::from_fn(sites * n, sites * n, |i, j| if i == j { C64::new(g.sign(i % n), 0.0) } else { C64::new(0.0, 0.0) })
}

#[test]
fn built_matrices_are_hermitian() {
    let models = [
        presets::graphene(),
        presets::harper(1, 3),
        presets::chern_two_band(1.0),
        presets::chern_two_band(1.0).with_disorder(Some(Disorder { law: DisorderLaw::Onsite, strength: 1.0 })).unwrap(),
    ];
    for m in &models {
        for bc in [Boundary::Open, Boundary::Periodic] {
            let r = build_bulk(m, &BoxSpec::new(&[6, 6], bc), 3).unwrap();
            assert_eq!(hermiticity_defect(&r.dense()), 0.0);
        }
    }
}

#[test]
fn chiral_models_anticommute_with_grading() {
    let bond = Disorder { law: DisorderLaw::ChiralBond, strength: 0.4 };
    for m in [presets::graphene(), presets::honeycomb_lambda(2.5), presets::graphene().with_disorder(Some(bond)).unwrap()] {
        let r = build_bulk(&m, &BoxSpec::new(&[5, 7], Boundary::Open), 11).unwrap();
        let h = r.dense();
        let j = grading(r.geometry.len(), 2);
        assert_eq!(max_abs(&(&j * &h * &j + &h)), 0.0);
    }
}

#[test]
fn disorder_is_covariant_under_shifts() {
    let m = presets::chern_two_band(1.0).with_disorder(Some(Disorder { law: DisorderLaw::Onsite, strength: 2.0 })).unwrap();
    let a = build_bulk(&m, &BoxSpec::new(&[8, 8], Boundary::Open), 5).unwrap();
    let b = build_bulk(&m, &BoxSpec::new(&[8, 8], Boundary::Open).shifted(&[3, -2]), 5).unwrap();
    let (ha, hb) = (a.dense(), b.dense());
    let n = 2;
    let mut compared = 0;
    for (i, x) in a.geometry.sites.iter().enumerate() {
        for (j, y) in a.geometry.sites.iter().enumerate() {
            if let (Some(bi), Some(bj)) = (b.geometry.index_of(x), b.geometry.index_of(y)) {
                for p in 0..n {
                    for q in 0..n {
                        assert_eq!(ha[(i * n + p, j * n + q)], hb[(bi * n + p, bj * n + q)]);
                    }
                }
                compared += 1;
            }
        }
    }
    assert!(compared > 0);
}

#[test]
fn plaquette_phase_equals_flux() {
    for (p, q) in [(1, 3), (1, 2), (2, 5)] {
        let m = presets::harper(p, q);
        let b = 2.0 * PI * p as f64 / q as f64;
        let r = build_bulk(&m, &BoxSpec::new(&[7, 7], Boundary::Open), 0).unwrap();
        let u = |x: &[i64]| magnetic_translation(&r, x).unwrap();
        let loop_ = u(&[1, 0]) * u(&[0, 1]) * u(&[-1, 0]) * u(&[0, -1]);
        let expect = cis(b);
        for (s, x) in r.geometry.sites.iter().enumerate() {
            if x.iter().all(|&v| (1..5).contains(&v)) {
                assert!((loop_[(s, s)] - expect).norm() < 1e-12, "site {x:?}: {}", loop_[(s, s)]);
            }
        }
    }
}

#[test]
fn identical_inputs_give_identical_bits() {
    let m = presets::graphene().with_disorder(Some(Disorder { law: DisorderLaw::ChiralBond, strength: 0.3 })).unwrap();
    let spec = BoxSpec::new(&[9, 6], Boundary::Periodic);
    let a = build_bulk(&m, &spec, 42).unwrap();
    let b = build_bulk(&m, &spec, 42).unwrap();
    assert_eq!(a.matrix, b.matrix);
}

use topoflat::error::Error;
use topoflat::halfspace::*;
use topoflat::lattice::{presets, Boundary, ChiralGrading};
use topoflat::linalg::max_abs;

fn zigzag() -> CutPlane {
    make_lattice_cut(&[1, 0], 0.5).unwrap()
}

fn single(model: &topoflat::lattice::ModelSpec, cut: &CutPlane, spec: &SlabSpec, boundary: &BoundaryTerm) -> f64 {
    edge_density(model, cut, spec, boundary, 1, None).unwrap().value
}

#[test]
fn strip_and_column_normalizations_agree() {
    let g = presets::graphene();
    let spec = SlabSpec::new(16.0, 12, Boundary::Periodic);
    for normal in [[1, 0], [1, 1], [-1, 1], [1, 2]] {
        let cut = make_lattice_cut(&normal, 0.3).unwrap();
        for boundary in [BoundaryTerm::None, BoundaryTerm::Explicit(vec![])] {
            let slab = restrict_halfspace(&g, &cut, &spec, &boundary, 0).unwrap();
            let rep = zero_modes(&slab, None, EdgeAssignment::Soft).unwrap();
            let s = signed_surface_density(&slab, &rep, Normalization::Strip).unwrap().value;
            let c = signed_surface_density(&slab, &rep, Normalization::Columns).unwrap().value;
            assert!((s - c).abs() < 1e-9, "{normal:?}: {s} vs {c}");
        }
    }
}

#[test]
fn rational_results_are_offset_periodic() {
    let g = presets::graphene();
    let spec = SlabSpec::new(20.0, 30, Boundary::Periodic);
    for normal in [[1, 0], [1, 1]] {
        let cut = make_lattice_cut(&normal, 0.2).unwrap();
        let lambda = cut.lambda().unwrap();
        let a = single(&g, &cut, &spec, &BoundaryTerm::None);
        let b = single(&g, &cut.with_offset(cut.r + lambda), &spec, &BoundaryTerm::None);
        let c = single(&g, &cut.with_offset(cut.r + 3.0 * lambda), &spec, &BoundaryTerm::None);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(a.to_bits(), c.to_bits());
    }
}

#[test]
fn boundary_terms_preserve_chirality() {
    let g = presets::graphene();
    let spec = SlabSpec::new(12.0, 8, Boundary::Periodic);
    let slab = restrict_halfspace(&g, &zigzag(), &spec, &BoundaryTerm::RandomChiral { norm: 0.5, seed: 9 }, 0).unwrap();
    let h = slab.realization().unwrap().dense();
    let gr = ChiralGrading::new(2);
    let j = topoflat::linalg::CMat::from_fn(h.nrows(), h.ncols(), |a, b| {
        if a == b {
            topoflat::linalg::C64::new(gr.sign(a % 2), 0.0)
        } else {
            topoflat::linalg::C64::new(0.0, 0.0)
        }
    });
    assert_eq!(max_abs(&(&j * &h * &j + &h)), 0.0);
}

#[test]
fn boundary_disorder_barely_moves_the_density() {
    let g = presets::graphene();
    let spec = SlabSpec::new(30.0, 40, Boundary::Periodic);
    let clean = single(&g, &zigzag(), &spec, &BoundaryTerm::None);
    let mean = (0..3).map(|s| single(&g, &zigzag(), &spec, &BoundaryTerm::RandomChiral { norm: 0.5, seed: s })).sum::<f64>() / 3.0;
    assert!((mean - clean).abs() < 0.02, "{mean} vs {clean}");
}

#[test]
fn smooth_and_sharp_restrictions_agree() {
    let g = presets::graphene();
    let spec = SlabSpec::new(60.0, 120, Boundary::Periodic);
    let cut = zigzag();
    let sharp = single(&g, &cut, &spec, &BoundaryTerm::None);
    for eps in [1.0, 2.0] {
        let slab = smooth_restrict(&g, &cut, &spec, &BoundaryTerm::None, eps, 0).unwrap();
        let rep = zero_modes(&slab, None, EdgeAssignment::Soft).unwrap();
        let v = signed_surface_density(&slab, &rep, Normalization::Strip).unwrap().value;
        assert!((v - sharp).abs() < 1e-3, "eps {eps}: {v} vs {sharp}");
    }
    let gapped = presets::honeycomb_lambda(3.0);
    let slab = smooth_restrict(&gapped, &cut, &spec, &BoundaryTerm::None, 1.0, 0).unwrap();
    assert!(zero_modes(&slab, None, EdgeAssignment::Soft).unwrap().modes.is_empty());
}

#[test]
fn finite_size_scaling() {
    let g = presets::graphene();
    let lengths = [30usize, 60, 120, 240];
    let vals: Vec<f64> = lengths.iter().map(|&l| single(&g, &zigzag(), &SlabSpec::new(60.0, l, Boundary::Periodic), &BoundaryTerm::None)).collect();
    let c = lengths.windows(2).zip(vals.windows(2)).map(|(l, v)| l[0] as f64 * (v[1] - v[0]).abs()).fold(0.0, f64::max);
    println!("densities {vals:?}, fitted C = {c:.4}");
    for (l, v) in lengths.windows(2).zip(vals.windows(2)) {
        assert!((v[1] - v[0]).abs() <= c / l[0] as f64 + 1e-15);
    }
    assert!(c < 1.0);
}

#[test]
fn convergents_approach_the_irrational_density() {
    let g = presets::graphene();
    let slices = |v: &[f64]| (v[0].abs() + v[1].abs()) / 3.0 / (v[0] * v[0] + v[1] * v[1]).sqrt();
    let convergents = [vec![1, 1], vec![1, 2], vec![2, 3], vec![3, 5]];
    let spec = SlabSpec::new(30.0, 40, Boundary::Periodic);
    let (rows, res) = convergent_sweep(&g, &convergents, &spec, 4).unwrap();
    for row in &rows {
        let v: Vec<f64> = row.g.iter().map(|&x| x as f64).collect();
        assert!((row.density.value - slices(&v)).abs() < 0.01, "{:?}: {}", row.g, row.density.value);
    }
    let steps: Vec<f64> = rows.windows(2).map(|w| (w[1].density.value - w[0].density.value).abs()).collect();
    assert!(steps.windows(2).all(|s| s[1] < s[0]));
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((res.value - slices(&[1.0, golden])).abs() < 0.01);
}

#[test]
fn ssh_bulk_equals_edge() {
    let m = presets::ssh(0.5);
    let cut = make_cut(&[1.0], 0.5).unwrap();
    let rec = bbc_check(&m, &cut, &SlabSpec::new(100.0, 1, Boundary::Open), &BoundaryTerm::None, 256, 1).unwrap();
    assert!((rec.bulk.value - 1.0).abs() < 1e-12);
    assert!(rec.gap < 1e-9);
    assert!(rec.conditions.spectral_gap);
}

#[test]
fn invalid_slabs_are_rejected() {
    let g = presets::graphene();
    let narrow = SlabSpec::new(3.0, 8, Boundary::Periodic);
    assert!(matches!(restrict_halfspace(&g, &zigzag(), &narrow, &BoundaryTerm::None, 0), Err(Error::InvalidArgument(_))));
    assert_eq!(make_cut(&[0.0, 0.0], 0.0).unwrap_err(), Error::ZeroVector);
    let irrational = make_cut(&[1.0, std::f64::consts::PI], 0.0).unwrap();
    assert!(irrational.lambda().is_none());
    assert!(restrict_halfspace(&g, &irrational, &SlabSpec::new(12.0, 8, Boundary::Periodic), &BoundaryTerm::None, 0).is_err());
    assert!(matches!(zero_modes(&restrict_halfspace(&presets::harper(1, 3), &zigzag(), &SlabSpec::new(8.0, 6, Boundary::Open), &BoundaryTerm::None, 0).unwrap(), None, EdgeAssignment::Soft), Err(Error::NotChiral(_))));
}

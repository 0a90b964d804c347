#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topoflat::lattice::ModelSpec;
use topoflat::linalg::{CMat, C64};

/// Plaquette Berry-flux sum over the lowest `bands` Bloch bands on an `n x n`
/// grid: link variables `det(psi(k)* psi(k + mu))`, field strength as the
/// argument of the oriented link product, total divided by `2 pi`.
pub fn plaquette_chern(model: &ModelSpec, n: usize, bands: usize) -> f64 {
    let frames: Vec<CMat> = (0..n * n)
        .map(|idx| {
            let k = [(idx / n) as f64 / n as f64, (idx % n) as f64 / n as f64];
            let h = model.bloch_hamiltonian(&k).unwrap();
            let eig = h.clone().symmetric_eigen();
            let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            CMat::from_fn(h.nrows(), bands, |r, c| eig.eigenvectors[(r, order[c])])
        })
        .collect();
    let at = |i: usize, j: usize| &frames[(i % n) * n + (j % n)];
    let link = |a: &CMat, b: &CMat| {
        let z = (a.adjoint() * b).determinant();
        z / z.norm()
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let u1 = link(at(i, j), at(i + 1, j));
            let u2 = link(at(i + 1, j), at(i + 1, j + 1));
            let u3 = link(at(i, j + 1), at(i + 1, j + 1));
            let u4 = link(at(i, j), at(i, j + 1));
            total += (u1 * u2 * u3.conj() * u4.conj()).arg();
        }
    }
    total / (2.0 * PI)
}

/// Fraction of `theta in [0, 1)` with `|lambda + e^{2 pi i theta}| < 1`, by bisection.
pub fn slice_fraction(lambda: f64) -> f64 {
    let g = |t: f64| (C64::new(lambda, 0.0) + C64::from_polar(1.0, 2.0 * PI * t)).norm() - 1.0;
    if g(0.5) >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    2.0 * (0.5 - lo)
}

fn haar_columns(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
    let g = DMatrix::from_fn(rows, rows, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let q = g.qr().q();
    q.columns(0, cols).into_owned()
}

/// Random partial isometry `C^n -> C^m` of rank `r`, so `dim ker = n - r` and
/// `dim coker = m - r`.
pub fn partial_isometry(m: usize, n: usize, r: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = haar_columns(m, r, &mut rng);
    let right = haar_columns(n, r, &mut rng);
    left * right.adjoint()
}

/// Random `(m, n, r)` with `1 <= m, n <= 12` and `r <= min(m, n)`.
pub fn random_shape(seed: u64) -> (usize, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let m = rng.random_range(1..=12);
    let n = rng.random_range(1..=12);
    let r = rng.random_range(0..=m.min(n));
    (m, n, r)
}

/// Scalar profile on the Euclidean ball of radius `r` with random complex
/// coefficients damped like `(1 + |x|)^{-decay}`.
pub fn random_profile(d: usize, r: i64, decay: f64, seed: u64) -> topoflat::harmonic::OperatorProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<i64>> = if d == 1 {
        (-r..=r).map(|a| vec![a]).collect()
    } else {
        (-r..=r).flat_map(|a| (-r..=r).map(move |b| vec![a, b])).collect()
    };
    let mut coeffs = Vec::new();
    for x in pts {
        let n2 = x.iter().map(|v| (v * v) as f64).sum::<f64>().sqrt();
        if n2 <= r as f64 {
            let c = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            coeffs.push((x, c * (1.0 + n2).powf(-decay)));
        }
    }
    topoflat::harmonic::OperatorProfile::scalar(d, &coeffs)
}

/// The 20-profile family used for norm-equivalence brackets.
pub fn equivalence_family() -> Vec<topoflat::harmonic::OperatorProfile> {
    (0..20)
        .map(|i| {
            let d = if i % 2 == 0 { 1 } else { 2 };
            let r = 1 + (i as i64 % 5) * 3;
            random_profile(d, r, 1.0 + (i % 3) as f64 * 0.5, 100 + i as u64)
        })
        .collect()
}

/// `exp`-type smooth periodic step: rises on `[0, delta]`, falls on `[1/2, 1/2 + delta]`.
pub fn smoothed_step(delta: f64) -> topoflat::harmonic::OperatorProfile {
    use topoflat::halfspace::switch;
    let f = move |k: f64| C64::new(switch(k / delta) - switch((k - 0.5) / delta), 0.0);
    topoflat::harmonic::OperatorProfile::from_symbol(f, 4096, 1e-13)
}

/// Smallest constant `C >= 1` with `b / C <= f <= C b` over paired norms.
pub fn bracket(pairs: &[(f64, f64)]) -> f64 {
    pairs.iter().map(|&(b, f)| (f / b).max(b / f)).fold(1.0, f64::max)
}

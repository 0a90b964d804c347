//! Fourier profiles of covariant operators, Littlewood-Paley windows,
//! noncommutative L^p and Besov norms, and Hankel operators.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::invariants::KField;
use crate::lattice::{assemble, box_points, BoxSpec, Disp, FiniteRealization, Geometry, ModelSpec};
use crate::linalg::{cis, max_abs, CMat, EigenSystem, Svd, C64};

/// Displacement-indexed Fourier coefficients `psi_x(a)` with `a = sum_x psi_x u^x`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorProfile {
    pub d: usize,
    pub n: usize,
    pub coeffs: BTreeMap<Disp, CMat>,
    /// Per-coefficient estimator variance (zero for exact profiles).
    pub variance: BTreeMap<Disp, f64>,
    pub field: Vec<Vec<f64>>,
}

impl OperatorProfile {
    pub fn new(d: usize, n: usize, coeffs: BTreeMap<Disp, CMat>) -> Self {
        OperatorProfile { d, n, coeffs, variance: BTreeMap::new(), field: vec![vec![0.0; d]; d] }
    }

    /// Exact profile of a model's Hamiltonian.
    pub fn from_model(model: &ModelSpec) -> Self {
        let mut p = OperatorProfile::new(model.d, model.n, model.hoppings().clone());
        p.field = model.field.clone();
        p
    }

    /// Scalar profile from a coefficient list.
    pub fn scalar(d: usize, coeffs: &[(Disp, C64)]) -> Self {
        let map = coeffs.iter().map(|(x, c)| (x.clone(), CMat::from_element(1, 1, *c))).collect();
        OperatorProfile::new(d, 1, map)
    }

    /// Scalar d = 1 profile of a symbol sampled on `m` points, keeping coefficients above `cutoff`.
    pub fn from_symbol<F: Fn(f64) -> C64>(f: F, m: usize, cutoff: f64) -> Self {
        let samples: Vec<C64> = (0..m).map(|i| f(i as f64 / m as f64)).collect();
        let mut planner = rustfft::FftPlanner::<f64>::new();
        let mut buf = samples;
        planner.plan_fft_forward(m).process(&mut buf);
        let mut coeffs = Vec::new();
        for (i, c) in buf.iter().enumerate() {
            let x = if 2 * i <= m { i as i64 } else { i as i64 - m as i64 };
            let c = c / m as f64;
            if c.norm() > cutoff {
                coeffs.push((vec![x], c));
            }
        }
        OperatorProfile::scalar(1, &coeffs)
    }

    pub fn support_radius(&self) -> usize {
        self.coeffs.keys().map(|x| x.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0)).max().unwrap_or(0)
    }

    pub fn get(&self, x: &[i64]) -> Option<&CMat> {
        self.coeffs.get(x)
    }

    /// Symbol `a(k) = sum_x psi_x e^{2 pi i k.x}` (meaningful for zero field).
    pub fn symbol(&self, k: &[f64]) -> CMat {
        let mut a = CMat::zeros(self.n, self.n);
        for (x, c) in &self.coeffs {
            let ph: f64 = x.iter().zip(k).map(|(&xi, &ki)| xi as f64 * ki).sum();
            a += c * cis(2.0 * PI * ph);
        }
        a
    }

    pub fn has_field(&self) -> bool {
        self.field.iter().flatten().any(|&b| b != 0.0)
    }

    fn as_model(&self) -> ModelSpec {
        let hops: Vec<(Disp, CMat)> = self.coeffs.iter().map(|(x, c)| (x.clone(), c.clone())).collect();
        ModelSpec::new_unchecked(self.d, self.n, hops, self.field.clone())
    }

    /// Adjoint profile `psi_x(a*) = phase * psi_{-x}(a)^*` (zero field).
    pub fn adjoint(&self) -> Self {
        let mut out = self.clone();
        out.coeffs = self.coeffs.iter().map(|(x, c)| (x.iter().map(|v| -v).collect(), c.adjoint())).collect();
        out
    }

    /// Product profile for zero field: `psi_z(ab) = sum_{x+y=z} psi_x(a) psi_y(b)`.
    pub fn product(&self, other: &Self) -> Self {
        let mut out: BTreeMap<Disp, CMat> = BTreeMap::new();
        for (x, a) in &self.coeffs {
            for (y, b) in &other.coeffs {
                let z: Disp = x.iter().zip(y).map(|(p, q)| p + q).collect();
                *out.entry(z).or_insert_with(|| CMat::zeros(self.n, self.n)) += a * b;
            }
        }
        OperatorProfile::new(self.d, self.n, out)
    }

    /// Phase action `psi_x -> e^{2 pi i k.x} psi_x`.
    pub fn phase_shift(&self, k: &[f64]) -> Self {
        let mut out = self.clone();
        for (x, c) in out.coeffs.iter_mut() {
            let ph: f64 = x.iter().zip(k).map(|(&xi, &ki)| xi as f64 * ki).sum();
            *c *= cis(2.0 * PI * ph);
        }
        out
    }
}

/// Estimates `psi_x` for `||x||_inf <= radius` by phase-corrected averaging of
/// `<y+x|a|y>` over interior sites of every (realization, operator) sample.
pub fn fourier_profile(samples: &[(&FiniteRealization, &CMat)], radius: usize, margin: usize) -> Result<OperatorProfile> {
    let first = samples.first().ok_or(Error::EmptyInterior { margin })?.0;
    let d = first.geometry.d;
    let n = samples[0].1.nrows() / first.geometry.len();
    let probe = ModelSpec::new_unchecked(d, 1, vec![], first.field.clone());
    let shifts = box_points(&vec![-(radius as i64); d], &vec![2 * radius + 1; d]);
    let mut coeffs = BTreeMap::new();
    let mut variance = BTreeMap::new();
    for x in shifts {
        let mut sum = CMat::zeros(n, n);
        let mut sq = 0.0;
        let mut count = 0usize;
        for (real, op) in samples {
            let geom = &real.geometry;
            for ys in real.interior(margin) {
                let y = &geom.sites[ys];
                let target: Disp = y.iter().zip(&x).map(|(a, b)| a + b).collect();
                let Some((xs, _)) = geom.locate(&target) else { continue };
                let ph = probe.hop_phase(&x, y).conj();
                let block = CMat::from_fn(n, n, |a, b| op[(xs * n + a, ys * n + b)] * ph);
                sq += block.iter().map(|z| z.norm_sqr()).sum::<f64>();
                sum += block;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::EmptyInterior { margin });
        }
        let mean = sum / C64::new(count as f64, 0.0);
        let m2 = mean.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let var = ((sq / count as f64 - m2).max(0.0)) / count as f64;
        if mean.iter().any(|z| z.norm() > 1e-14) {
            coeffs.insert(x.clone(), mean);
        }
        variance.insert(x, var);
    }
    let mut p = OperatorProfile::new(d, n, coeffs);
    p.variance = variance;
    p.field = first.field.clone();
    Ok(p)
}

/// Fourier coefficients `psi_x = mean_k a(k) e^{-2 pi i k.x}` of a k-field for `||x||_inf <= radius`.
pub fn profile_from_field(f: &KField, radius: usize) -> OperatorProfile {
    let d = f.d();
    let grid = KField::grid(&f.dims, &f.shift);
    let shifts = box_points(&vec![-(radius as i64); d], &vec![2 * radius + 1; d]);
    let n = f.values[0].nrows();
    let coeffs: Vec<(Disp, CMat)> = shifts
        .par_iter()
        .map(|x| {
            let mut acc = CMat::zeros(n, n);
            for (k, v) in grid.iter().zip(&f.values) {
                let ph: f64 = x.iter().zip(k).map(|(&xi, &ki)| xi as f64 * ki).sum();
                acc += v * cis(-2.0 * PI * ph);
            }
            (x.clone(), acc / C64::new(grid.len() as f64, 0.0))
        })
        .collect();
    OperatorProfile::new(d, n, coeffs.into_iter().collect())
}

/// Rebuilds the covariant matrix `sum_x psi_x u^x` on a box.
pub fn materialize(profile: &OperatorProfile, boxs: &BoxSpec) -> Result<CMat> {
    let geom = Geometry::boxed(boxs);
    Ok(assemble(&profile.as_model(), &geom, 0)?.to_dense())
}

/// Coefficientwise multiplier `sum_x f(x) psi_x u^x`.
pub fn multiplier_apply<F: Fn(&[i64]) -> f64>(f: F, profile: &OperatorProfile) -> OperatorProfile {
    let mut out = profile.clone();
    out.coeffs = profile
        .coeffs
        .iter()
        .filter_map(|(x, c)| {
            let w = f(x);
            (w != 0.0).then(|| (x.clone(), c * C64::new(w, 0.0)))
        })
        .collect();
    out
}

/// `exp(-1/((t - 1/2)(2 - t)))` on `(1/2, 2)`.
pub fn bump_raw(t: f64) -> f64 {
    if t <= 0.5 || t >= 2.0 {
        0.0
    } else {
        (-1.0 / ((t - 0.5) * (2.0 - t))).exp()
    }
}

/// Dyadically normalized bump, `sum_{j in Z} phi(2^{-j} t) = 1` for `t > 0`.
pub fn bump(t: f64) -> f64 {
    let raw = bump_raw(t);
    if raw == 0.0 {
        return 0.0;
    }
    // t in (1/2, 2): only the scales 2^{-1} t, t, 2 t can hit the support
    let s = bump_raw(t / 2.0) + raw + bump_raw(2.0 * t);
    raw / s
}

/// Littlewood-Paley windows `W_0, ..., W_{j_max}` on Z^d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicWindows {
    pub j_max: usize,
}

impl DyadicWindows {
    pub fn new(j_max: usize) -> Result<Self> {
        if j_max < 1 {
            return Err(Error::InvalidArgument("j_max must be at least 1".into()));
        }
        Ok(DyadicWindows { j_max })
    }

    /// `W_j(x)` with `|x|` the Euclidean norm.
    pub fn weight(&self, j: usize, x: &[i64]) -> f64 {
        let r = x.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
        self.weight_at(j, r)
    }

    pub fn weight_at(&self, j: usize, r: f64) -> f64 {
        if j >= 1 {
            return bump(r / (1u64 << j) as f64);
        }
        let mut s = 0.0;
        let mut k = 1;
        while r / ((1u64 << k.min(62)) as f64) > 0.5 && k < 63 {
            s += bump(r / (1u64 << k) as f64);
            k += 1;
        }
        1.0 - s
    }

    /// Windowed profile `W_j * a`.
    pub fn apply(&self, j: usize, profile: &OperatorProfile) -> OperatorProfile {
        multiplier_apply(|x| self.weight(j, x), profile)
    }

    /// Largest deviation of `sum_j W_j(x)` from one over `|x| <= 2^{j_max}`.
    pub fn partition_residual(&self, d: usize) -> f64 {
        let r = 1i64 << self.j_max;
        let pts = box_points(&vec![-r; d], &vec![(2 * r + 1) as usize; d]);
        pts.iter()
            .filter(|x| x.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt() <= r as f64)
            .map(|x| {
                let s: f64 = (0..=self.j_max).map(|j| self.weight(j, x)).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// How the trace per unit volume is realized when evaluating `||a||_p`.
#[derive(Debug, Clone, PartialEq)]
pub enum NormEngine {
    /// Fibre integral over an `n^d` k-grid (zero field only).
    Bloch { n: usize },
    /// Periodic box, full-volume trace.
    Periodic { lengths: Vec<usize> },
    /// Open box, trace over sites at least `margin` away from the faces.
    Interior { lengths: Vec<usize>, margin: usize },
}

fn singular_powers(a: &CMat, p: f64) -> f64 {
    let s = if a.nrows() == 1 { vec![a[(0, 0)].norm()] } else { Svd::new(a).sigma };
    if p.is_infinite() {
        s.into_iter().fold(0.0, f64::max)
    } else {
        s.into_iter().map(|v| v.powf(p)).sum()
    }
}

/// Symbol on the `n^d` grid `k = i/n` (row-major, last axis fastest) by FFT.
pub fn symbol_grid(profile: &OperatorProfile, n: usize) -> Vec<CMat> {
    let d = profile.d;
    let m = profile.n;
    let total = n.pow(d as u32);
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(n);
    let mut entries = vec![vec![C64::new(0.0, 0.0); total]; m * m];
    for (x, c) in &profile.coeffs {
        let idx = x.iter().fold(0usize, |acc, &v| acc * n + v.rem_euclid(n as i64) as usize);
        for a in 0..m {
            for b in 0..m {
                entries[a * m + b][idx] += c[(a, b)];
            }
        }
    }
    let mut line = vec![C64::new(0.0, 0.0); n];
    for buf in entries.iter_mut() {
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            for base in 0..total {
                if (base / stride) % n != 0 {
                    continue;
                }
                for (i, v) in line.iter_mut().enumerate() {
                    *v = buf[base + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    buf[base + i * stride] = *v;
                }
            }
        }
    }
    (0..total).map(|i| CMat::from_fn(m, m, |a, b| entries[a * m + b][i])).collect()
}

/// Noncommutative `||a||_p = T(|a|^p)^{1/p}`; `p = inf` gives the operator norm.
pub fn lp_norm(profile: &OperatorProfile, p: f64, engine: &NormEngine) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument("p must be positive".into()));
    }
    if profile.coeffs.is_empty() {
        return Ok(0.0);
    }
    match engine {
        NormEngine::Bloch { n } => {
            if profile.has_field() {
                return Err(Error::NotTranslationInvariant);
            }
            let grid = symbol_grid(profile, *n);
            let vals: Vec<f64> = grid.par_iter().map(|a| singular_powers(a, p)).collect();
            if p.is_infinite() {
                Ok(vals.into_iter().fold(0.0, f64::max))
            } else {
                Ok((vals.iter().sum::<f64>() / grid.len() as f64).powf(1.0 / p))
            }
        }
        NormEngine::Periodic { lengths } => {
            let a = materialize(profile, &BoxSpec::new(lengths, crate::lattice::Boundary::Periodic))?;
            let sites: usize = lengths.iter().product();
            let s = singular_powers(&a, p);
            if p.is_infinite() {
                Ok(s)
            } else {
                Ok((s / sites as f64).powf(1.0 / p))
            }
        }
        NormEngine::Interior { lengths, margin } => {
            let boxs = BoxSpec::new(lengths, crate::lattice::Boundary::Open);
            let a = materialize(profile, &boxs)?;
            let es = EigenSystem::new(&(a.adjoint() * &a));
            if p.is_infinite() {
                return Ok(es.values.iter().fold(0.0f64, |m, v| m.max(v.max(0.0).sqrt())));
            }
            let abs_p = es.apply(|v| v.max(0.0).powf(p / 2.0));
            let geom = Geometry::boxed(&boxs);
            let real = FiniteRealization {
                geometry: geom,
                orbitals: profile.n,
                matrix: crate::linalg::Csr::from_triplets(0, 0, vec![]),
                margin: *margin,
                seed: 0,
                box_spec: Some(boxs),
                field: profile.field.clone(),
            };
            let t = crate::spectral::trace_per_volume(&real, &abs_p, *margin)?;
            Ok(t.re.max(0.0).powf(1.0 / p))
        }
    }
}

/// Besov norm `(sum_j 2^{qsj} ||W_j * a||_p^q)^{1/q}`.
pub fn besov_norm(profile: &OperatorProfile, s: f64, p: f64, q: f64, windows: &DyadicWindows, engine: &NormEngine) -> Result<f64> {
    Ok(besov_terms(profile, p, windows, engine)?
        .iter()
        .enumerate()
        .map(|(j, t)| (2f64.powf(s * j as f64) * t).powf(q))
        .sum::<f64>()
        .powf(1.0 / q))
}

/// The block norms `||W_j * a||_p` for `j = 0..=j_max`.
pub fn besov_terms(profile: &OperatorProfile, p: f64, windows: &DyadicWindows, engine: &NormEngine) -> Result<Vec<f64>> {
    if profile.support_radius() as f64 > (1u64 << windows.j_max) as f64 {
        return Err(Error::InvalidArgument(format!(
            "profile radius {} exceeds window range 2^{}",
            profile.support_radius(),
            windows.j_max
        )));
    }
    (0..=windows.j_max).map(|j| lp_norm(&windows.apply(j, profile), p, engine)).collect()
}

/// `N`-fold finite difference `Delta_r^N a`: `psi_x -> (e^{2 pi i r.x} - 1)^N psi_x`.
pub fn finite_difference(profile: &OperatorProfile, r: &[f64], order: u32) -> OperatorProfile {
    let mut out = profile.clone();
    for (x, c) in out.coeffs.iter_mut() {
        let ph: f64 = x.iter().zip(r).map(|(&xi, &ri)| xi as f64 * ri).sum();
        *c *= (cis(2.0 * PI * ph) - 1.0).powu(order);
    }
    out
}

/// Discretization of `int_0^1 (.) dt/t`: nodes `2^{-j/m}` with weights `ln2 / m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TGrid {
    pub per_octave: usize,
    pub octaves: usize,
}

impl TGrid {
    pub fn dyadic(octaves: usize) -> Self {
        TGrid { per_octave: 1, octaves }
    }

    pub fn doubled(&self) -> Self {
        TGrid { per_octave: 2 * self.per_octave, octaves: self.octaves }
    }

    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let m = self.per_octave as f64;
        (0..=self.octaves * self.per_octave).map(|j| (2f64.powf(-(j as f64) / m), LN_2 / m)).collect()
    }
}

/// Sample points of the ball `|r| <= t`: radii `t/8 .. t` along 16 directions
/// (in d = 2) or the coordinate axes and diagonals otherwise.
fn ball_samples(d: usize, t: f64) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    if d == 1 {
        dirs.push(vec![1.0]);
        dirs.push(vec![-1.0]);
    } else if d == 2 {
        for a in 0..16 {
            let th = 2.0 * PI * a as f64 / 16.0;
            dirs.push(vec![th.cos(), th.sin()]);
        }
    } else {
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            dirs.push(e.clone());
            e[j] = -1.0;
            dirs.push(e);
        }
        dirs.push(vec![1.0 / (d as f64).sqrt(); d]);
    }
    let mut out = Vec::new();
    for k in 1..=8 {
        let rad = t * k as f64 / 8.0;
        for e in &dirs {
            out.push(e.iter().map(|v| v * rad).collect());
        }
    }
    out
}

/// Modulus of smoothness `omega^N(a, t) = sup_{|r| <= t} ||Delta_r^N a||_p`.
pub fn modulus_of_smoothness(profile: &OperatorProfile, t: f64, order: u32, p: f64, engine: &NormEngine) -> Result<f64> {
    let mut best = 0.0f64;
    for r in ball_samples(profile.d, t) {
        best = best.max(lp_norm(&finite_difference(profile, &r, order), p, engine)?);
    }
    Ok(best)
}

/// Equivalent norm `||a||_p + (int_0^1 t^{-sq} omega^N(a,t)^q dt/t)^{1/q}`.
pub fn finite_difference_norm(
    profile: &OperatorProfile,
    s: f64,
    p: f64,
    q: f64,
    order: u32,
    tgrid: &TGrid,
    engine: &NormEngine,
) -> Result<f64> {
    if !((order as f64) > s) {
        return Err(Error::InvalidArgument(format!("difference order {order} must exceed s = {s}")));
    }
    let base = lp_norm(profile, p, engine)?;
    let mut acc = 0.0;
    for (t, w) in tgrid.nodes() {
        let om = modulus_of_smoothness(profile, t, order, p, engine)?;
        acc += w * t.powf(-s * q) * om.powf(q);
    }
    Ok(base + acc.powf(1.0 / q))
}

/// Hankel matrix `P a (1 - P)` of a d = 1 profile: rows `i = 1..=L`, columns `j = 0, -1, ..., -(L-1)`.
pub fn hankel_matrix(profile: &OperatorProfile, l: usize) -> Result<CMat> {
    if profile.d != 1 {
        return Err(Error::DimensionMismatch("Hankel truncations are implemented for d = 1".into()));
    }
    let n = profile.n;
    let mut h = CMat::zeros(l * n, l * n);
    for i in 0..l {
        for j in 0..l {
            let x = (i + 1 + j) as i64;
            if let Some(c) = profile.get(&[x]) {
                h.view_mut((i * n, j * n), (n, n)).copy_from(c);
            }
        }
    }
    Ok(h)
}

pub fn schatten_norm(a: &CMat, p: f64) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let s = a.clone().singular_values();
    if p.is_infinite() {
        return s.iter().fold(0.0f64, |m, &v| m.max(v));
    }
    s.iter().map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Number of singular values above `tol * sigma_max` (absolute when the matrix vanishes).
pub fn numerical_rank(a: &CMat, tol: f64) -> usize {
    let s = a.clone().singular_values();
    s.iter().filter(|&&v| v > tol).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PellerReport {
    pub ratios: Vec<f64>,
    pub hankel_norms: Vec<f64>,
    pub besov_norms: Vec<f64>,
    /// Relative change of each Hankel norm between `L` and `2L`.
    pub truncation_deltas: Vec<f64>,
    pub sup: f64,
}

/// Ratios `||H_a||_p / ||a||_{B^{1/p}_{p,p}}` for d = 1 symbols.
pub fn peller_ratio(symbols: &[OperatorProfile], p: f64, l: usize, windows: &DyadicWindows, engine: &NormEngine) -> Result<PellerReport> {
    let mut rep = PellerReport { ratios: vec![], hankel_norms: vec![], besov_norms: vec![], truncation_deltas: vec![], sup: 0.0 };
    for a in symbols {
        let h1 = schatten_norm(&hankel_matrix(a, l)?, p);
        let h2 = schatten_norm(&hankel_matrix(a, 2 * l)?, p);
        let delta = if h2 > 0.0 { (h2 - h1).abs() / h2 } else { 0.0 };
        if delta > 0.01 {
            return Err(Error::NonConvergedTruncation(format!("Hankel norm changes by {:.3}% from L={l} to 2L", 100.0 * delta)));
        }
        let b = besov_norm(a, 1.0 / p, p, p, windows, engine)?;
        let ratio = if h2 == 0.0 { 0.0 } else { h2 / b };
        rep.ratios.push(ratio);
        rep.hankel_norms.push(h2);
        rep.besov_norms.push(b);
        rep.truncation_deltas.push(delta);
        rep.sup = rep.sup.max(ratio);
    }
    Ok(rep)
}

/// Largest entry deviation between two matrices.
pub fn matrix_distance(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

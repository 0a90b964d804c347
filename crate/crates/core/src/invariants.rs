//! Derivations and Chern-cocycle pairings: winding numbers of Fermi unitaries,
//! even Chern numbers of Fermi projections and higher odd pairings.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::harmonic::OperatorProfile;
use crate::lattice::{FiniteRealization, Geometry, ModelSpec};
use crate::linalg::{max_abs, unitarity_defect, CMat, C64, I, ZERO};

/// Unit pairing direction, optionally tagged with the integer vector it is parallel to.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub v: Vec<f64>,
    pub lattice: Option<Vec<i64>>,
}

impl Direction {
    pub fn new(v: &[f64]) -> Result<Self> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(Direction { v: v.iter().map(|x| x / n).collect(), lattice: None })
    }

    pub fn lattice(g: &[i64]) -> Result<Self> {
        let f: Vec<f64> = g.iter().map(|&x| x as f64).collect();
        let mut d = Direction::new(&f)?;
        d.lattice = Some(g.to_vec());
        Ok(d)
    }

    pub fn axis(d: usize, j: usize) -> Self {
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        let mut g = vec![0; d];
        g[j] = 1;
        Direction { v, lattice: Some(g) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    KSpace,
    RealSpace,
}

impl Path {
    pub fn as_str(&self) -> &'static str {
        match self {
            Path::KSpace => "kspace",
            Path::RealSpace => "realspace",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantResult {
    pub value: f64,
    pub error_estimate: f64,
    pub path: Path,
    pub params: Vec<(String, f64)>,
}

impl InvariantResult {
    pub fn new(value: f64, error_estimate: f64, path: Path) -> Self {
        InvariantResult { value, error_estimate: error_estimate.abs(), path, params: vec![] }
    }

    pub fn with(mut self, key: &str, v: f64) -> Self {
        self.params.push((key.to_string(), v));
        self
    }
}

/// Matrix-valued function sampled on the grid `k_j = (i_j + s_j)/n_j`, row-major.
#[derive(Debug, Clone)]
pub struct KField {
    pub dims: Vec<usize>,
    pub shift: Vec<f64>,
    /// Supercell extents; the derivation along `j` is `-(scale_j / 2 pi) d/dk_j`.
    pub scale: Vec<f64>,
    /// Lattice sites per unit cell, dividing the fibre trace.
    pub cell_sites: f64,
    pub values: Vec<CMat>,
}

impl KField {
    pub fn new(dims: Vec<usize>, shift: Vec<f64>, values: Vec<CMat>) -> Self {
        let d = dims.len();
        assert_eq!(values.len(), dims.iter().product::<usize>(), "grid size mismatch");
        KField { dims, shift, scale: vec![1.0; d], cell_sites: 1.0, values }
    }

    pub fn from_fn<F: Fn(&[f64]) -> CMat + Sync>(dims: &[usize], shift: &[f64], f: F) -> Self {
        let grid = Self::grid(dims, shift);
        let values = grid.par_iter().map(|k| f(k)).collect();
        KField::new(dims.to_vec(), shift.to_vec(), values)
    }

    /// Declares the field as living on a supercell with the given extents.
    pub fn on_supercell(mut self, q: &[usize]) -> Self {
        self.scale = q.iter().map(|&v| v as f64).collect();
        self.cell_sites = q.iter().product::<usize>() as f64;
        self
    }

    pub fn grid(dims: &[usize], shift: &[f64]) -> Vec<Vec<f64>> {
        let total: usize = dims.iter().product();
        let d = dims.len();
        (0..total)
            .map(|mut idx| {
                let mut k = vec![0.0; d];
                for j in (0..d).rev() {
                    k[j] = ((idx % dims[j]) as f64 + shift[j]) / dims[j] as f64;
                    idx /= dims[j];
                }
                k
            })
            .collect()
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn stride(&self, j: usize) -> usize {
        self.dims[j + 1..].iter().product()
    }

    /// Index of the neighbour one step along `j`, wrapping periodically.
    pub fn step(&self, idx: usize, j: usize) -> usize {
        let s = self.stride(j);
        let c = (idx / s) % self.dims[j];
        if c + 1 == self.dims[j] {
            idx + s - self.dims[j] * s
        } else {
            idx + s
        }
    }

    fn map<F: Fn(&CMat) -> CMat + Sync + Send>(&self, f: F) -> KField {
        KField { values: self.values.par_iter().map(f).collect(), ..self.clone_meta() }
    }

    fn clone_meta(&self) -> KField {
        KField {
            dims: self.dims.clone(),
            shift: self.shift.clone(),
            scale: self.scale.clone(),
            cell_sites: self.cell_sites,
            values: vec![],
        }
    }

    fn zip<F: Fn(&CMat, &CMat) -> CMat + Sync>(&self, other: &KField, f: F) -> KField {
        let values = self.values.par_iter().zip(other.values.par_iter()).map(|(a, b)| f(a, b)).collect();
        KField { values, ..self.clone_meta() }
    }

    pub fn mul(&self, other: &KField) -> KField {
        self.zip(other, |a, b| a * b)
    }

    pub fn adjoint(&self) -> KField {
        self.map(|a| a.adjoint())
    }

    pub fn add(&self, other: &KField) -> KField {
        self.zip(other, |a, b| a + b)
    }

    pub fn scale_by(&self, c: C64) -> KField {
        self.map(|a| a * c)
    }

    /// `T(a) = mean_k tr a(k) / cell_sites`.
    pub fn trace(&self) -> C64 {
        let s: C64 = self.values.iter().map(crate::linalg::trace).sum();
        s / (self.values.len() as f64 * self.cell_sites)
    }

    /// Spectral derivative `d/dk_j` (period one) along grid lines.
    pub fn partial(&self, j: usize) -> KField {
        let n = self.dims[j];
        let s = self.stride(j);
        let (r, c) = self.values[0].shape();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut out: Vec<CMat> = vec![CMat::zeros(r, c); self.values.len()];
        let starts: Vec<usize> = (0..self.values.len()).filter(|&i| (i / s) % n == 0).collect();
        let lines: Vec<(usize, Vec<CMat>)> = starts
            .par_iter()
            .map(|&st| {
                let mut buf = vec![ZERO; n];
                let mut res = vec![CMat::zeros(r, c); n];
                for a in 0..r {
                    for b in 0..c {
                        for t in 0..n {
                            buf[t] = self.values[st + t * s][(a, b)];
                        }
                        fwd.process(&mut buf);
                        for (f, z) in buf.iter_mut().enumerate() {
                            let freq = if 2 * f < n {
                                f as f64
                            } else if 2 * f == n {
                                0.0
                            } else {
                                f as f64 - n as f64
                            };
                            *z *= C64::new(0.0, 2.0 * PI * freq / n as f64);
                        }
                        inv.process(&mut buf);
                        for t in 0..n {
                            res[t][(a, b)] = buf[t];
                        }
                    }
                }
                (st, res)
            })
            .collect();
        for (st, res) in lines {
            for (t, m) in res.into_iter().enumerate() {
                out[st + t * s] = m;
            }
        }
        KField { values: out, ..self.clone_meta() }
    }

    /// Derivation `nabla_j = -(scale_j / 2 pi) d/dk_j`.
    pub fn derivation(&self, j: usize) -> KField {
        self.partial(j).scale_by(C64::new(-self.scale[j] / (2.0 * PI), 0.0))
    }

    /// Derivation along a real direction `sum_j v_j nabla_j`.
    pub fn derivation_along(&self, v: &[f64]) -> KField {
        let mut acc: Option<KField> = None;
        for (j, &vj) in v.iter().enumerate() {
            if vj == 0.0 {
                continue;
            }
            let t = self.derivation(j).scale_by(C64::new(vj, 0.0));
            acc = Some(match acc {
                None => t,
                Some(a) => a.add(&t),
            });
        }
        acc.unwrap_or_else(|| self.map(|a| CMat::zeros(a.nrows(), a.ncols())))
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.values.par_iter().map(unitarity_defect).reduce(|| 0.0, f64::max)
    }

    pub fn projection_defect(&self) -> f64 {
        self.values
            .par_iter()
            .map(|p| max_abs(&(p * p - p)).max(max_abs(&(p - p.adjoint()))))
            .reduce(|| 0.0, f64::max)
    }
}

/// `nabla_j a = -i sum_x x_j psi_x u^x` on a Fourier profile.
pub fn derivation_profile(a: &OperatorProfile, j: usize) -> OperatorProfile {
    let mut out = a.clone();
    for (x, m) in out.coeffs.iter_mut() {
        *m *= C64::new(0.0, -(x[j] as f64));
    }
    out.coeffs.retain(|_, m| m.iter().any(|z| *z != ZERO));
    out
}

/// `nabla_j a = -i [X_j, a]` with minimal-image displacements on periodic directions.
pub fn derivation_matrix(geom: &Geometry, orbitals_row: usize, orbitals_col: usize, a: &CMat, j: usize) -> CMat {
    let mut out = CMat::zeros(a.nrows(), a.ncols());
    let ns = geom.len();
    for x in 0..ns {
        for y in 0..ns {
            let dx = geom.displacement(x, y)[j] as f64;
            if dx == 0.0 {
                continue;
            }
            for p in 0..orbitals_row {
                for q in 0..orbitals_col {
                    let (r, c) = (x * orbitals_row + p, y * orbitals_col + q);
                    out[(r, c)] = a[(r, c)] * C64::new(0.0, -dx);
                }
            }
        }
    }
    out
}

fn det_phase(u: &CMat) -> C64 {
    let d = if u.nrows() == 1 { u[(0, 0)] } else { u.clone().determinant() };
    d / d.norm()
}

/// Per-line winding sums along axis `j` of a field of phases, averaged over lines.
/// The error covers the even/odd line split and the midpoint-rule cost of jumps between lines.
fn axis_winding_from_phases(dims: &[usize], phases: &[C64], j: usize) -> (f64, f64) {
    let n = dims[j];
    let s: usize = dims[j + 1..].iter().product();
    let starts: Vec<usize> = (0..phases.len()).filter(|&i| (i / s) % n == 0).collect();
    let per_line: Vec<f64> = starts
        .par_iter()
        .map(|&st| {
            let mut w = 0.0;
            for t in 0..n {
                let a = phases[st + t * s];
                let b = phases[st + ((t + 1) % n) * s];
                w += (b * a.conj()).arg();
            }
            (w / (2.0 * PI)).round()
        })
        .collect();
    let mean = per_line.iter().sum::<f64>() / per_line.len() as f64;
    let half = |parity: usize| {
        let v: Vec<f64> = per_line.iter().enumerate().filter(|(i, _)| i % 2 == parity).map(|(_, &w)| w).collect();
        if v.is_empty() {
            mean
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let lines = per_line.len();
    let jumps: f64 = (0..lines).map(|i| (per_line[(i + 1) % lines] - per_line[i]).abs()).sum();
    let err = (half(0) - mean).abs().max((half(1) - mean).abs()).max(jumps / (2.0 * lines as f64));
    (mean, err)
}

/// Winding number `i T(u* nabla_v u)` of a unitary field (k-space path).
pub fn winding_number(u: &KField, dir: &Direction) -> Result<InvariantResult> {
    if dir.v.len() != u.d() {
        return Err(Error::DimensionMismatch("direction and field dimension differ".into()));
    }
    let defect = u.unitarity_defect();
    if defect > 1e-8 {
        return Err(Error::NonUnitaryInput { deviation: defect });
    }
    let phases: Vec<C64> = u.values.par_iter().map(det_phase).collect();
    let mut value = 0.0;
    let mut err = 0.0;
    for (j, &vj) in dir.v.iter().enumerate() {
        if vj == 0.0 {
            continue;
        }
        let (w, e) = axis_winding_from_phases(&u.dims, &phases, j);
        value += vj * w * u.scale[j] / u.cell_sites;
        err += vj.abs() * e * u.scale[j] / u.cell_sites;
    }
    let res = InvariantResult::new(value, err, Path::KSpace);
    Ok(u.dims.iter().enumerate().fold(res, |r, (j, &n)| r.with(&format!("n{}", j + 1), n as f64)))
}

/// Winding number of a chiral model's Fermi unitary computed directly from the
/// scalar symbol when `N = 2`, avoiding a stored field.
pub fn winding_of_model(model: &ModelSpec, dir: &Direction, n: usize) -> Result<InvariantResult> {
    let g = model.grading()?;
    if !model.is_translation_invariant() {
        return Err(Error::NotTranslationInvariant);
    }
    if g.half() != 1 {
        let f = crate::spectral::fermi_unitary_field(model, &vec![n; model.d], &vec![0.5; model.d], None)?;
        return winding_number(&f, dir);
    }
    if dir.v.len() != model.d {
        return Err(Error::DimensionMismatch("direction and model dimension differ".into()));
    }
    let d = model.d;
    let tol = crate::spectral::default_tol_kernel(crate::spectral::hopping_norm_bound(model));
    let terms: Vec<(Vec<i64>, C64)> =
        model.hoppings().iter().map(|(x, t)| (x.clone(), t[(0, 1)])).filter(|(_, c)| *c != ZERO).collect();
    let dims = vec![n; d];
    let total = n.pow(d as u32);
    let phases: Vec<Result<C64>> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut k = vec![0.0; d];
            for j in (0..d).rev() {
                k[j] = ((idx % n) as f64 + 0.5) / n as f64;
                idx /= n;
            }
            let mut a = ZERO;
            for (x, c) in &terms {
                let ph: f64 = x.iter().zip(&k).map(|(&xi, &ki)| xi as f64 * ki).sum();
                a += c * crate::linalg::cis(2.0 * PI * ph);
            }
            if a.norm() <= tol {
                return Err(Error::KernelPresent { count: 2, tol });
            }
            Ok(a / a.norm())
        })
        .collect();
    let phases = phases.into_iter().collect::<Result<Vec<_>>>()?;
    let mut value = 0.0;
    let mut err = 0.0;
    for (j, &vj) in dir.v.iter().enumerate() {
        if vj != 0.0 {
            let (w, e) = axis_winding_from_phases(&dims, &phases, j);
            value += vj * w;
            err += vj.abs() * e;
        }
    }
    Ok(InvariantResult::new(value, err, Path::KSpace).with("n", n as f64))
}

/// Real-space winding `i T(u* nabla_v u)` with `nabla = -i[X, .]`, averaged over `sites`.
pub fn winding_realspace(real: &FiniteRealization, u: &CMat, dir: &Direction, margin: usize) -> Result<InvariantResult> {
    let defect = unitarity_defect(u);
    if defect > 1e-8 {
        return Err(Error::NonUnitaryInput { deviation: defect });
    }
    let geom = &real.geometry;
    let m = u.nrows() / geom.len();
    let sites = real.interior(margin);
    if sites.is_empty() {
        return Err(Error::EmptyInterior { margin });
    }
    let per_site: Vec<f64> = sites
        .par_iter()
        .map(|&x| {
            let mut acc = 0.0;
            for y in 0..geom.len() {
                let disp = geom.displacement(y, x);
                let proj: f64 = disp.iter().zip(&dir.v).map(|(&a, &b)| a as f64 * b).sum();
                if proj == 0.0 {
                    continue;
                }
                for a in 0..m {
                    for b in 0..m {
                        acc += proj * u[(y * m + b, x * m + a)].norm_sqr();
                    }
                }
            }
            acc
        })
        .collect();
    let value = per_site.iter().sum::<f64>() / sites.len() as f64;
    let mean_sq = per_site.iter().map(|v| v * v).sum::<f64>() / sites.len() as f64;
    let spread = (mean_sq - value * value).max(0.0).sqrt() / (sites.len() as f64).sqrt();
    Ok(InvariantResult::new(value, spread, Path::RealSpace).with("margin", margin as f64).with("sites", sites.len() as f64))
}

/// Even Chern number `2 pi i T(p [nabla_a p, nabla_b p])` on a k-grid.
pub fn even_chern(p: &KField, ea: &[f64], eb: &[f64]) -> Result<InvariantResult> {
    let defect = p.projection_defect();
    if defect > 1e-8 {
        return Err(Error::NotAProjection { deviation: defect });
    }
    if ea.len() != p.d() || eb.len() != p.d() {
        return Err(Error::DimensionMismatch("directions and field dimension differ".into()));
    }
    let da = p.derivation_along(ea);
    let db = p.derivation_along(eb);
    let value = chern2_from(&p.values, &da.values, &db.values, p.cell_sites);
    // grid-refinement proxy: the same sum on every other grid point
    let sub: Vec<usize> = (0..p.len()).filter(|i| i % 2 == 0).collect();
    let pick = |v: &[CMat]| sub.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
    let coarse = chern2_from(&pick(&p.values), &pick(&da.values), &pick(&db.values), p.cell_sites);
    Ok(InvariantResult::new(value, (coarse - value).abs(), Path::KSpace))
}

fn chern2_from(p: &[CMat], da: &[CMat], db: &[CMat], cell: f64) -> f64 {
    let s: C64 = p
        .par_iter()
        .zip(da.par_iter().zip(db.par_iter()))
        .map(|(p, (a, b))| crate::linalg::trace(&(p * (a * b - b * a))))
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let t = s / (p.len() as f64 * cell);
    (C64::new(0.0, 2.0 * PI) * t).re
}

/// Even Chern number of a projection matrix on a periodic realization, with
/// minimal-image commutator derivations and the full-volume trace.
pub fn even_chern_realspace(real: &FiniteRealization, p: &CMat, ea: &[f64], eb: &[f64], margin: usize) -> Result<InvariantResult> {
    let defect = max_abs(&(p * p - p));
    if defect > 1e-8 {
        return Err(Error::NotAProjection { deviation: defect });
    }
    let n = real.orbitals;
    let geom = &real.geometry;
    let along = |e: &[f64]| {
        let mut acc = CMat::zeros(p.nrows(), p.ncols());
        for (j, &v) in e.iter().enumerate() {
            if v != 0.0 {
                acc += derivation_matrix(geom, n, n, p, j) * C64::new(v, 0.0);
            }
        }
        acc
    };
    let da = along(ea);
    let db = along(eb);
    let comm = &da * &db - &db * &da;
    let prod = p * comm;
    let t = crate::spectral::trace_per_volume(real, &prod, margin)?;
    let value = (C64::new(0.0, 2.0 * PI) * t).re;
    Ok(InvariantResult::new(value, (C64::new(0.0, 2.0 * PI) * t).im.abs(), Path::RealSpace).with("margin", margin as f64))
}

fn double_factorial_odd(k: usize) -> f64 {
    (0..=k).map(|i| (2 * i + 1) as f64).product()
}

/// Normalisation `c_n = i (pi i)^k / (2k+1)!!` for `n = 2k + 1`.
pub fn odd_constant(n: usize) -> C64 {
    assert!(n % 2 == 1, "odd constant needs odd n");
    let k = (n - 1) / 2;
    I * (C64::new(0.0, PI)).powu(k as u32) / double_factorial_odd(k)
}

/// All permutations of `0..n` with their signs.
fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out.into_iter()
        .map(|p| {
            let mut inv = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if p[i] > p[j] {
                        inv += 1;
                    }
                }
            }
            (p, if inv % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect()
}

/// Odd pairing `c_n sum_rho (-1)^rho T((u*-1) nabla u nabla u* nabla u ...)`.
pub fn odd_chern(u: &KField, dirs: &[Vec<f64>]) -> Result<InvariantResult> {
    let n = dirs.len();
    if n % 2 == 0 || n > u.d() {
        return Err(Error::DimensionMismatch(format!("odd pairing of order {n} in dimension {}", u.d())));
    }
    if n == 1 {
        let dir = Direction::new(&dirs[0])?;
        return winding_number(u, &dir);
    }
    let defect = u.unitarity_defect();
    if defect > 1e-8 {
        return Err(Error::NonUnitaryInput { deviation: defect });
    }
    let ustar = u.adjoint();
    let du: Vec<KField> = dirs.iter().map(|e| u.derivation_along(e)).collect();
    let dus: Vec<KField> = dirs.iter().map(|e| ustar.derivation_along(e)).collect();
    let m = u.values[0].nrows();
    let lead = ustar.map(|a| a - CMat::identity(m, m));
    let mut total = ZERO;
    for (perm, sign) in permutations(n) {
        let mut acc = lead.clone();
        for (slot, &d) in perm.iter().enumerate() {
            let f = if slot % 2 == 0 { &du[d] } else { &dus[d] };
            acc = acc.mul(f);
        }
        total += acc.trace() * sign;
    }
    let c = odd_constant(n) * total;
    if c.im.abs() > 1e-6 * (1.0 + c.re.abs()) {
        return Err(Error::NonUnitaryInput { deviation: c.im.abs() });
    }
    Ok(InvariantResult::new(c.re, c.im.abs(), Path::KSpace).with("order", n as f64))
}

/// One row of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub param: f64,
    pub result: std::result::Result<InvariantResult, Error>,
    /// Difference to the previous successful row.
    pub delta: Option<f64>,
}

/// Evaluates an invariant along a parameter grid; per-point errors are kept in the table.
pub fn weak_invariant_sweep<F>(params: &[f64], op: F) -> Vec<SweepRow>
where
    F: Fn(f64) -> Result<InvariantResult> + Sync,
{
    let results: Vec<Result<InvariantResult>> = params.par_iter().map(|&p| op(p)).collect();
    let mut rows = Vec::with_capacity(params.len());
    let mut prev: Option<f64> = None;
    for (&param, result) in params.iter().zip(results) {
        let delta = match (&result, prev) {
            (Ok(r), Some(p)) => Some(r.value - p),
            _ => None,
        };
        if let Ok(r) = &result {
            prev = Some(r.value);
        }
        rows.push(SweepRow { param, result, delta });
    }
    rows
}

/// Grid `start, start + step, ...` up to `stop` inclusive, robust to rounding.
pub fn param_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

/// Constant unitary field equal to the identity.
pub fn identity_field(dims: &[usize], m: usize) -> KField {
    KField::from_fn(dims, &vec![0.5; dims.len()], |_| CMat::identity(m, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::presets;
    use crate::linalg::ONE;
    use crate::spectral::fermi_unitary_field;

    #[test]
    fn odd_constants() {
        assert!((odd_constant(1) - I).norm() < 1e-15);
        assert!((odd_constant(3) - C64::new(-PI / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn permutation_signs() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p.iter().map(|(_, s)| s).sum::<f64>(), 0.0);
    }

    #[test]
    fn spectral_derivative_of_plane_wave() {
        let f = KField::from_fn(&[16], &[0.5], |k| CMat::from_element(1, 1, crate::linalg::cis(2.0 * PI * 3.0 * k[0])));
        let d = f.derivation(0);
        for (i, v) in d.values.iter().enumerate() {
            let expect = f.values[i][(0, 0)] * C64::new(0.0, -3.0);
            assert!((v[(0, 0)] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn ssh_winding_is_one() {
        let f = fermi_unitary_field(&presets::ssh(0.5), &[64], &[0.5], None).unwrap();
        let w = winding_number(&f, &Direction::axis(1, 0)).unwrap();
        assert!((w.value - 1.0).abs() < 1e-12);
        let triv = fermi_unitary_field(&presets::ssh(2.0), &[64], &[0.5], None).unwrap();
        assert!(winding_number(&triv, &Direction::axis(1, 0)).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn identity_has_no_winding() {
        let f = identity_field(&[8, 8], 2);
        assert_eq!(winding_number(&f, &Direction::axis(2, 0)).unwrap().value, 0.0);
    }

    #[test]
    fn non_unitary_is_rejected() {
        let f = KField::from_fn(&[4], &[0.5], |_| CMat::from_element(1, 1, C64::new(2.0, 0.0)));
        assert!(matches!(winding_number(&f, &Direction::axis(1, 0)), Err(Error::NonUnitaryInput { .. })));
    }

    #[test]
    fn constant_projection_has_zero_chern() {
        let f = KField::from_fn(&[8, 8], &[0.5, 0.5], |_| {
            CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO])
        });
        let c = even_chern(&f, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn sweep_records_errors_and_deltas() {
        let rows = weak_invariant_sweep(&[0.0, 1.0, 2.0], |p| {
            if p == 1.0 {
                Err(Error::GapDetected)
            } else {
                Ok(InvariantResult::new(p, 0.0, Path::KSpace))
            }
        });
        assert!(rows[1].result.is_err());
        assert_eq!(rows[2].delta, Some(2.0));
        assert_eq!(param_grid(0.2, 3.0, 0.1).len(), 29);
    }
}

//! Cut planes, half-space slabs with boundary terms, chiral zero modes and the
//! signed surface density of flat edge bands.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::invariants::{winding_of_model, Direction, InvariantResult, KField, Path};
use crate::lattice::{assemble, box_points, site_uniforms, Boundary, Disp, FiniteRealization, Geometry, ModelSpec};
use crate::linalg::{cis, low_spectrum, CMat, CVec, Csr, Svd, C64, ZERO};
use crate::spectral::{dos_kgrid, hopping_norm_bound, pseudogap_exponent};

/// Largest `D` block handled by a dense SVD; larger slabs use banded shift-invert iteration.
pub const DENSE_LIMIT: usize = 1500;

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Integer unimodular `M` with first row `g` (primitive) and its inverse.
pub fn unimodular_completion(g: &[i64]) -> Result<(Vec<Vec<i64>>, Vec<Vec<i64>>)> {
    let d = g.len();
    if g.iter().all(|&x| x == 0) {
        return Err(Error::ZeroVector);
    }
    if g.iter().fold(0, |a, &b| gcd(a, b)) != 1 {
        return Err(Error::InvalidArgument(format!("{g:?} is not primitive")));
    }
    // invariants: w a = g, winv g = a
    let mut a = g.to_vec();
    let mut w: Vec<Vec<i64>> = (0..d).map(|i| (0..d).map(|j| (i == j) as i64).collect()).collect();
    let mut winv = w.clone();
    loop {
        let nz: Vec<usize> = (0..d).filter(|&i| a[i] != 0).collect();
        if nz.len() == 1 {
            break;
        }
        let i = *nz.iter().min_by_key(|&&i| a[i].abs()).unwrap();
        for &j in &nz {
            if j == i {
                continue;
            }
            let q = a[j].div_euclid(a[i]);
            a[j] -= q * a[i];
            for row in w.iter_mut() {
                row[i] += q * row[j];
            }
            for c in 0..d {
                let v = winv[i][c];
                winv[j][c] -= q * v;
            }
        }
    }
    let i = (0..d).find(|&i| a[i] != 0).unwrap();
    a.swap(0, i);
    for row in w.iter_mut() {
        row.swap(0, i);
    }
    winv.swap(0, i);
    if a[0] < 0 {
        for row in w.iter_mut() {
            row[0] = -row[0];
        }
        for v in winv[0].iter_mut() {
            *v = -*v;
        }
    }
    let m = (0..d).map(|r| (0..d).map(|c| w[c][r]).collect()).collect();
    let minv = (0..d).map(|r| (0..d).map(|c| winv[c][r]).collect()).collect();
    Ok((m, minv))
}

fn mat_vec(m: &[Vec<i64>], x: &[i64]) -> Vec<i64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rationality {
    /// `v = g / |g|` with `g` primitive; `lambda = 1 / |g|`.
    Rational { g: Vec<i64>, lambda: f64 },
    Irrational,
}

/// Hyperplane `v . x + r = 0` bounding the half-space `v . x + r > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutPlane {
    pub v: Vec<f64>,
    pub r: f64,
    pub rationality: Rationality,
}

impl CutPlane {
    pub fn d(&self) -> usize {
        self.v.len()
    }

    pub fn lambda(&self) -> Option<f64> {
        match &self.rationality {
            Rationality::Rational { lambda, .. } => Some(*lambda),
            Rationality::Irrational => None,
        }
    }

    pub fn lattice_normal(&self) -> Option<&[i64]> {
        match &self.rationality {
            Rationality::Rational { g, .. } => Some(g),
            Rationality::Irrational => None,
        }
    }

    pub fn with_offset(&self, r: f64) -> CutPlane {
        CutPlane { r, ..self.clone() }
    }

    pub fn depth(&self, x: &[i64]) -> f64 {
        self.v.iter().zip(x).map(|(a, &b)| a * b as f64).sum::<f64>() + self.r
    }

    pub fn direction(&self) -> Direction {
        let mut d = Direction::new(&self.v).expect("cut normal is nonzero");
        d.lattice = self.lattice_normal().map(|g| g.to_vec());
        d
    }
}

/// Default enumeration depth `K` for the rationality test.
pub const CUT_SEARCH_DEPTH: i64 = 8;

pub fn make_cut(v_raw: &[f64], r: f64) -> Result<CutPlane> {
    make_cut_with_depth(v_raw, r, CUT_SEARCH_DEPTH)
}

/// Normalizes `v_raw` and classifies it by enumerating `v . x` for `||x||_inf <= k`.
pub fn make_cut_with_depth(v_raw: &[f64], r: f64, k: i64) -> Result<CutPlane> {
    let norm = v_raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let v: Vec<f64> = v_raw.iter().map(|x| x / norm).collect();
    let d = v.len();
    let pts = box_points(&vec![-k; d], &vec![(2 * k + 1) as usize; d]);
    let vals: Vec<f64> = pts.iter().map(|x| v.iter().zip(x).map(|(a, &b)| a * b as f64).sum()).collect();
    let min_pos = vals.iter().copied().filter(|&s| s > 1e-9).fold(f64::INFINITY, f64::min);
    let mut rationality = Rationality::Irrational;
    if min_pos >= 1e-6 && min_pos.is_finite() {
        let lattice = vals.iter().all(|s| ((s / min_pos) - (s / min_pos).round()).abs() < 1e-8);
        let g: Vec<i64> = v.iter().map(|x| (x / min_pos).round() as i64).collect();
        let exact = v.iter().zip(&g).all(|(x, &gi)| (x / min_pos - gi as f64).abs() < 1e-8);
        if lattice && exact && g.iter().fold(0, |a, &b| gcd(a, b)) == 1 {
            let gn = g.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
            rationality = Rationality::Rational { g, lambda: 1.0 / gn };
        }
    }
    Ok(CutPlane { v, r, rationality })
}

/// Cut with lattice normal `g` (reduced to a primitive vector).
pub fn make_lattice_cut(g: &[i64], r: f64) -> Result<CutPlane> {
    let c = g.iter().fold(0, |a, &b| gcd(a, b));
    if c == 0 {
        return Err(Error::ZeroVector);
    }
    let g: Vec<i64> = g.iter().map(|x| x / c).collect();
    let gn = g.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
    Ok(CutPlane {
        v: g.iter().map(|&x| x as f64 / gn).collect(),
        r,
        rationality: Rationality::Rational { g, lambda: 1.0 / gn },
    })
}

/// Slab geometry: physical depth `width` below the cut; `length` counts boundary
/// periods for periodic parallel bc and is a physical length for open bc.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabSpec {
    pub width: f64,
    pub length: usize,
    pub parallel: Boundary,
}

impl SlabSpec {
    pub fn new(width: f64, length: usize, parallel: Boundary) -> Self {
        SlabSpec { width, length, parallel }
    }
}

/// Boundary perturbation `k~` added to `P h P`.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryTerm {
    None,
    /// Random chiral couplings inside the boundary strip, rescaled so that
    /// the Gershgorin bound of `k~` equals `norm`.
    RandomChiral { norm: f64, seed: u64 },
    /// Entries `(x, a, y, b, value)`; the Hermitian partner is added.
    Explicit(Vec<(Disp, usize, Disp, usize, C64)>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Restriction {
    Sharp,
    /// `chi_s(v.x + r)` rising smoothly from 0 to 1 over `[0, eps]`.
    Smooth { eps: f64 },
}

/// `C^infinity` switch from 0 (t <= 0) to 1 (t >= 1).
pub fn switch(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

impl Restriction {
    fn weight(&self, depth: f64) -> f64 {
        match self {
            Restriction::Sharp => 1.0,
            Restriction::Smooth { eps } => {
                if *eps <= 0.0 {
                    1.0
                } else {
                    switch(depth / eps)
                }
            }
        }
    }
}

/// Clean slab reduced over the parallel Bloch momenta.
#[derive(Debug, Clone)]
pub struct BlochSlab {
    /// `y = M x` with `y_1 = g . x` the layer coordinate.
    pub m: Vec<Vec<i64>>,
    pub minv: Vec<Vec<i64>>,
    /// Layer coordinates `y_1`, increasing with depth.
    pub layers: Vec<i64>,
    pub depth: Vec<f64>,
    pub chi: Vec<f64>,
    /// Parallel momenta (`L^{d-1}` points).
    pub kpar: Vec<Vec<f64>>,
    hops: Vec<(Vec<i64>, CMat)>,
}

impl BlochSlab {
    /// Slab Hamiltonian at parallel momentum `k`, layer-major with orbitals inner.
    pub fn block(&self, k: &[f64], n: usize) -> CMat {
        let nl = self.layers.len();
        let y0 = self.layers[0];
        let mut h = CMat::zeros(nl * n, nl * n);
        for (dy, t) in &self.hops {
            let ph: f64 = dy[1..].iter().zip(k).map(|(&a, &b)| a as f64 * b).sum();
            let t = t * cis(2.0 * PI * ph);
            for (li, &y) in self.layers.iter().enumerate() {
                let target = y + dy[0];
                if target < y0 || target >= y0 + nl as i64 {
                    continue;
                }
                let lt = (target - y0) as usize;
                let w = C64::new(self.chi[lt] * self.chi[li], 0.0);
                let mut blk = h.view_mut((lt * n, li * n), (n, n));
                blk += &t * w;
            }
        }
        h
    }
}

#[derive(Debug, Clone)]
pub enum SlabKind {
    Bloch(BlochSlab),
    RealSpace {
        realization: FiniteRealization,
        /// `v . x + r` per site.
        depth: Vec<f64>,
        chi: Vec<f64>,
        /// Period vector of a periodic strip.
        period: Option<Vec<i64>>,
    },
}

/// `h^ = P h P + k~` on a slab below a cut.
#[derive(Debug, Clone)]
pub struct SlabRealization {
    pub model: ModelSpec,
    pub cut: CutPlane,
    pub spec: SlabSpec,
    pub restriction: Restriction,
    pub boundary: BoundaryTerm,
    pub seed: u64,
    pub kind: SlabKind,
}

impl SlabRealization {
    pub fn is_bloch(&self) -> bool {
        matches!(self.kind, SlabKind::Bloch(_))
    }

    /// Number of lattice sites.
    pub fn sites(&self) -> usize {
        match &self.kind {
            SlabKind::Bloch(b) => b.layers.len() * b.kpar.len(),
            SlabKind::RealSpace { realization, .. } => realization.geometry.len(),
        }
    }

    /// Real-space matrix (expanded from Bloch blocks when necessary is not supported).
    pub fn realization(&self) -> Option<&FiniteRealization> {
        match &self.kind {
            SlabKind::RealSpace { realization, .. } => Some(realization),
            SlabKind::Bloch(_) => None,
        }
    }
}

/// Largest change of `v . x` along one hop.
fn hop_reach(model: &ModelSpec, cut: &CutPlane) -> f64 {
    model
        .hoppings()
        .keys()
        .map(|x| cut.v.iter().zip(x).map(|(a, &b)| a * b as f64).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

/// Depth of the boundary strip that may carry `k~`.
pub fn boundary_strip(model: &ModelSpec, cut: &CutPlane) -> f64 {
    hop_reach(model, cut).max(cut.lambda().unwrap_or(0.0))
}

pub fn restrict_halfspace(
    model: &ModelSpec,
    cut: &CutPlane,
    spec: &SlabSpec,
    boundary: &BoundaryTerm,
    seed: u64,
) -> Result<SlabRealization> {
    build_slab(model, cut, spec, boundary, Restriction::Sharp, seed)
}

pub fn smooth_restrict(
    model: &ModelSpec,
    cut: &CutPlane,
    spec: &SlabSpec,
    boundary: &BoundaryTerm,
    eps_switch: f64,
    seed: u64,
) -> Result<SlabRealization> {
    if !(eps_switch >= 0.0) {
        return Err(Error::InvalidArgument("switch width must be non-negative".into()));
    }
    build_slab(model, cut, spec, boundary, Restriction::Smooth { eps: eps_switch }, seed)
}

fn build_slab(
    model: &ModelSpec,
    cut: &CutPlane,
    spec: &SlabSpec,
    boundary: &BoundaryTerm,
    restriction: Restriction,
    seed: u64,
) -> Result<SlabRealization> {
    if cut.d() != model.d {
        return Err(Error::DimensionMismatch(format!("cut has d = {}, model d = {}", cut.d(), model.d)));
    }
    let reach = hop_reach(model, cut);
    if spec.width < 4.0 * reach {
        return Err(Error::InvalidArgument(format!("slab width {} below 4 x hop reach {reach}", spec.width)));
    }
    if spec.length == 0 && model.d > 1 {
        return Err(Error::InvalidArgument("slab length must be positive".into()));
    }
    let bloch_ok = matches!(boundary, BoundaryTerm::None)
        && !model.has_disorder()
        && !model.has_field()
        && (spec.parallel == Boundary::Periodic || model.d == 1)
        && cut.lambda().is_some();
    let kind = if bloch_ok {
        SlabKind::Bloch(bloch_slab(model, cut, spec, restriction)?)
    } else {
        realspace_slab(model, cut, spec, boundary, restriction, seed)?
    };
    Ok(SlabRealization {
        model: model.clone(),
        cut: cut.clone(),
        spec: spec.clone(),
        restriction,
        boundary: boundary.clone(),
        seed,
        kind,
    })
}

/// Layer coordinates `y_1` with `y_1 / |g| + r` in `(0, width]`.
fn layer_range(cut: &CutPlane, g: &[i64], width: f64) -> Vec<i64> {
    let gn = g.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
    let lo = (-cut.r * gn).floor() as i64 - 1;
    let hi = ((width - cut.r) * gn).ceil() as i64 + 1;
    (lo..=hi)
        .filter(|&y| {
            let t = y as f64 / gn + cut.r;
            t > 0.0 && t <= width
        })
        .collect()
}

fn bloch_slab(model: &ModelSpec, cut: &CutPlane, spec: &SlabSpec, restriction: Restriction) -> Result<BlochSlab> {
    let g = cut.lattice_normal().unwrap().to_vec();
    let (m, minv) = unimodular_completion(&g)?;
    let layers = layer_range(cut, &g, spec.width);
    let lambda = cut.lambda().unwrap();
    let depth: Vec<f64> = layers.iter().map(|&y| y as f64 * lambda + cut.r).collect();
    let chi = depth.iter().map(|&t| restriction.weight(t)).collect();
    let dpar = model.d - 1;
    let l = spec.length.max(1);
    let kpar = KField::grid(&vec![l; dpar], &vec![0.0; dpar]);
    let hops = model.hoppings().iter().map(|(x, t)| (mat_vec(&m, x), t.clone())).collect();
    Ok(BlochSlab { m, minv, layers, depth, chi, kpar, hops })
}

fn slab_sites(cut: &CutPlane, spec: &SlabSpec) -> Result<(Vec<Disp>, Option<Vec<i64>>, Option<Vec<i64>>)> {
    let d = cut.d();
    if d == 1 {
        let s = cut.v[0].signum() as i64;
        let lo = (-cut.r / cut.v[0].abs()).floor() as i64 - 1;
        let hi = ((spec.width - cut.r) / cut.v[0].abs()).ceil() as i64 + 1;
        let mut sites: Vec<Disp> = (lo..=hi).map(|t| vec![s * t]).filter(|x| in_slab(cut, spec, x)).collect();
        sites.sort_by(|a, b| cut.depth(a).partial_cmp(&cut.depth(b)).unwrap());
        return Ok((sites, None, None));
    }
    if spec.parallel == Boundary::Periodic {
        let g = cut.lattice_normal().ok_or_else(|| {
            Error::InvalidArgument("periodic parallel boundary needs a rational cut".into())
        })?;
        if d != 2 {
            return Err(Error::DimensionMismatch("real-space periodic slabs are implemented for d <= 2".into()));
        }
        let (m, minv) = unimodular_completion(g)?;
        let layers = layer_range(cut, g, spec.width);
        let l = spec.length as i64;
        let mut sites = Vec::with_capacity(layers.len() * spec.length);
        for y2 in 0..l {
            for &y1 in &layers {
                sites.push(mat_vec(&minv, &[y1, y2]));
            }
        }
        let period = mat_vec(&minv, &[0, l]);
        return Ok((sites, Some(period), Some(m[1].clone())));
    }
    // open parallel extent: parallel coordinates in [0, length)
    let basis = parallel_basis(&cut.v);
    let w = spec.width;
    let l = spec.length as f64;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let corners = 1usize << d;
    for c in 0..corners {
        let mut p: Vec<f64> = cut.v.iter().map(|a| a * (if c & 1 == 1 { w } else { 0.0 } - cut.r)).collect();
        for (b, e) in basis.iter().enumerate() {
            let s = if c >> (b + 1) & 1 == 1 { l } else { 0.0 };
            for j in 0..d {
                p[j] += e[j] * s;
            }
        }
        for j in 0..d {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    let origin: Vec<i64> = lo.iter().map(|v| v.floor() as i64 - 1).collect();
    let lengths: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| (b.ceil() - a.floor()) as usize + 3).collect();
    let sites = box_points(&origin, &lengths)
        .into_iter()
        .filter(|x| {
            in_slab(cut, spec, x)
                && basis.iter().all(|e| {
                    let s: f64 = e.iter().zip(x).map(|(a, &b)| a * b as f64).sum();
                    (0.0..l).contains(&s)
                })
        })
        .collect();
    Ok((sites, None, None))
}

/// Orthonormal basis of the hyperplane orthogonal to `v`.
fn parallel_basis(v: &[f64]) -> Vec<Vec<f64>> {
    let d = v.len();
    let mut out: Vec<Vec<f64>> = Vec::new();
    if d == 2 {
        return vec![vec![-v[1], v[0]]];
    }
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        let mut w = e.clone();
        for b in std::iter::once(v.to_vec()).chain(out.iter().cloned()) {
            let dot: f64 = b.iter().zip(&e).map(|(a, c)| a * c).sum();
            for k in 0..d {
                w[k] -= dot * b[k];
            }
        }
        let n = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-6 {
            out.push(w.iter().map(|a| a / n).collect());
        }
        if out.len() == d - 1 {
            break;
        }
    }
    out
}

fn in_slab(cut: &CutPlane, spec: &SlabSpec, x: &[i64]) -> bool {
    let t = cut.depth(x);
    t > 0.0 && t <= spec.width
}

fn realspace_slab(
    model: &ModelSpec,
    cut: &CutPlane,
    spec: &SlabSpec,
    boundary: &BoundaryTerm,
    restriction: Restriction,
    seed: u64,
) -> Result<SlabKind> {
    let (sites, period, coord) = slab_sites(cut, spec)?;
    if sites.is_empty() {
        return Err(Error::EmptyInterior { margin: 0 });
    }
    let geom = match (&period, coord) {
        (Some(p), Some(c)) => Geometry::strip(model.d, sites, p.clone(), c),
        _ => Geometry::open(model.d, sites),
    };
    let depth: Vec<f64> = geom.sites.iter().map(|x| cut.depth(x)).collect();
    let chi: Vec<f64> = depth.iter().map(|&t| restriction.weight(t)).collect();
    let base = assemble(model, &geom, seed)?;
    let n = model.n;
    let mut trip: Vec<(usize, usize, C64)> = Vec::with_capacity(base.nnz());
    for r in 0..base.nrows {
        for (c, v) in base.row(r) {
            trip.push((r, c, v * chi[r / n] * chi[c / n]));
        }
    }
    trip.extend(boundary_triplets(model, cut, &geom, &depth, boundary)?);
    let matrix = Csr::from_triplets(geom.len() * n, geom.len() * n, trip);
    let realization = FiniteRealization {
        geometry: geom,
        orbitals: n,
        matrix,
        margin: model.range(),
        seed,
        box_spec: None,
        field: model.field.clone(),
    };
    Ok(SlabKind::RealSpace { realization, depth, chi, period })
}

fn boundary_triplets(
    model: &ModelSpec,
    cut: &CutPlane,
    geom: &Geometry,
    depth: &[f64],
    boundary: &BoundaryTerm,
) -> Result<Vec<(usize, usize, C64)>> {
    let n = model.n;
    let strip = boundary_strip(model, cut);
    match boundary {
        BoundaryTerm::None => Ok(vec![]),
        BoundaryTerm::Explicit(entries) => {
            let grading = model.chiral.then(|| model.grading()).transpose()?;
            let mut out = Vec::new();
            for (x, a, y, b, v) in entries {
                for p in [x, y] {
                    let t = cut.depth(p);
                    if t > strip || geom.index_of(p).is_none() {
                        return Err(Error::BoundaryTermOutOfStrip { depth: t, strip });
                    }
                }
                if *a >= n || *b >= n {
                    return Err(Error::InvalidArgument(format!("orbital index out of range (N = {n})")));
                }
                if let Some(gr) = &grading {
                    if gr.sign(*a) == gr.sign(*b) && *v != ZERO {
                        return Err(Error::NonChiralBoundaryTerm);
                    }
                }
                let i = geom.index_of(x).unwrap() * n + a;
                let j = geom.index_of(y).unwrap() * n + b;
                out.push((i, j, *v));
                out.push((j, i, v.conj()));
            }
            Ok(out)
        }
        BoundaryTerm::RandomChiral { norm, seed } => {
            if !model.chiral {
                return Err(Error::NotChiral("random chiral boundary term needs a chiral model".into()));
            }
            let h = n / 2;
            let mut shifts: Vec<Disp> = model.hoppings().keys().cloned().collect();
            shifts.push(vec![0; model.d]);
            shifts.sort();
            shifts.dedup();
            let in_strip: Vec<usize> = (0..geom.len()).filter(|&i| depth[i] <= strip).collect();
            let mut out = Vec::new();
            for &s in &in_strip {
                let xs = &geom.sites[s];
                for z in &shifts {
                    let target: Disp = xs.iter().zip(z).map(|(a, b)| a + b).collect();
                    let Some((t, _)) = geom.locate(&target) else { continue };
                    if depth[t] > strip {
                        continue;
                    }
                    let mut key = xs.clone();
                    key.extend(&geom.sites[t]);
                    let u = site_uniforms(*seed, 3, &key, 2 * h * h);
                    for a in 0..h {
                        for b in 0..h {
                            let v = C64::new(u[2 * (a * h + b)], u[2 * (a * h + b) + 1]);
                            let i = s * n + a;
                            let j = t * n + h + b;
                            out.push((i, j, v));
                            out.push((j, i, v.conj()));
                        }
                    }
                }
            }
            let dim = geom.len() * n;
            let mut rows = vec![0.0; dim];
            let k = Csr::from_triplets(dim, dim, out);
            for r in 0..dim {
                rows[r] = k.row(r).map(|(_, v)| v.norm()).sum();
            }
            let bound = rows.iter().copied().fold(0.0, f64::max);
            if bound == 0.0 {
                return Ok(vec![]);
            }
            let scale = norm / bound;
            let mut trip = Vec::with_capacity(k.nnz());
            for r in 0..dim {
                for (c, v) in k.row(r) {
                    trip.push((r, c, v * scale));
                }
            }
            Ok(trip)
        }
    }
}

/// How near-zero modes are attributed to the boundary at the cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeAssignment {
    /// Signed weight of the kernel projections inside the near half of the slab.
    Soft,
    /// A mode counts iff at least `threshold` of its weight lies in the near half.
    Hard { threshold: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroMode {
    /// Energy magnitude; the mode pair sits at `+-energy`.
    pub energy: f64,
    /// `<psi|J|psi>`.
    pub chirality: f64,
    /// Weight inside the near half of the slab.
    pub near_weight: f64,
    /// Parallel momentum for Bloch-reduced slabs.
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroModeReport {
    pub eps_zero: f64,
    pub assignment: EdgeAssignment,
    pub modes: Vec<ZeroMode>,
    /// Smallest singular value of the chiral block above `eps_zero`.
    pub gap: Option<f64>,
    pub n_plus: f64,
    pub n_minus: f64,
    /// Signed near-edge count under the other assignment rule.
    pub alternate_signed: f64,
    /// Per-site signed weights (per layer for Bloch slabs, summed over momenta).
    pub site_weights: Vec<f64>,
    pub separation_warning: Option<String>,
}

impl ZeroModeReport {
    pub fn signed(&self) -> f64 {
        self.n_plus - self.n_minus
    }

    /// Number of modes with `|E| < tol`.
    pub fn count_below(&self, tol: f64) -> usize {
        self.modes.iter().filter(|m| m.energy < tol).count()
    }
}

/// `0.05 * ||h||`, with `||h||` the largest fibre norm on a coarse grid for
/// clean models and the hopping norm bound otherwise.
pub fn default_eps_zero(model: &ModelSpec) -> f64 {
    0.05 * norm_estimate(model)
}

pub fn norm_estimate(model: &ModelSpec) -> f64 {
    if !model.is_translation_invariant() {
        return hopping_norm_bound(model);
    }
    let n = if model.d <= 2 { 32 } else { 12 };
    KField::grid(&vec![n; model.d], &vec![0.0; model.d])
        .iter()
        .map(|k| crate::linalg::op_norm(&model.bloch_unchecked(k)))
        .fold(0.0, f64::max)
}

struct Accum {
    modes: Vec<ZeroMode>,
    soft: f64,
    hard: f64,
    soft_w: Vec<f64>,
    hard_w: Vec<f64>,
    gap: Option<f64>,
}

impl Accum {
    fn new(sites: usize) -> Self {
        Accum { modes: vec![], soft: 0.0, hard: 0.0, soft_w: vec![0.0; sites], hard_w: vec![0.0; sites], gap: None }
    }

    fn merge_gap(&mut self, g: Option<f64>) {
        if let Some(g) = g {
            self.gap = Some(self.gap.map_or(g, |x| x.min(g)));
        }
    }

    /// Adds one mode given its per-site weights `w` (summing to one) and near mask.
    fn add(&mut self, energy: f64, chi: f64, w: &[f64], near: &[bool], threshold: f64, k: &[f64], scale: f64) {
        let nw: f64 = w.iter().zip(near).filter(|(_, &n)| n).map(|(a, _)| a).sum();
        self.soft += chi * nw * scale;
        let hard = nw >= threshold;
        if hard {
            self.hard += chi * scale;
        }
        for (i, &x) in w.iter().enumerate() {
            if near[i] {
                self.soft_w[i] += chi * x * scale;
            }
            if hard {
                self.hard_w[i] += chi * x * scale;
            }
        }
        self.modes.push(ZeroMode { energy, chirality: chi, near_weight: nw, k: k.to_vec() });
    }

    fn merge(mut self, o: Accum) -> Accum {
        self.modes.extend(o.modes);
        self.soft += o.soft;
        self.hard += o.hard;
        for (a, b) in self.soft_w.iter_mut().zip(o.soft_w) {
            *a += b;
        }
        for (a, b) in self.hard_w.iter_mut().zip(o.hard_w) {
            *a += b;
        }
        self.merge_gap(o.gap);
        self
    }
}

/// Per-site weights of an orbital-expanded vector.
fn site_weights_of(col: impl Iterator<Item = (usize, f64)>, sites: usize) -> Vec<f64> {
    let mut w = vec![0.0; sites];
    for (s, v) in col {
        w[s] += v;
    }
    w
}

/// Chiral zero modes of a slab, chirality-resolved and attributed to the near edge.
pub fn zero_modes(slab: &SlabRealization, eps_zero: Option<f64>, assignment: EdgeAssignment) -> Result<ZeroModeReport> {
    let model = &slab.model;
    if !model.chiral {
        return Err(Error::NotChiral("zero-mode counting needs a chiral model".into()));
    }
    let eps = eps_zero.unwrap_or_else(|| default_eps_zero(model));
    let grading = model.grading()?;
    let n = model.n;
    let plus: Vec<usize> = (0..n).filter(|&a| grading.sign(a) > 0.0).collect();
    let minus: Vec<usize> = (0..n).filter(|&a| grading.sign(a) < 0.0).collect();
    let threshold = match assignment {
        EdgeAssignment::Hard { threshold } => threshold,
        EdgeAssignment::Soft => 0.8,
    };
    let half = slab.spec.width / 2.0;
    let acc = match &slab.kind {
        SlabKind::Bloch(b) => {
            let nl = b.layers.len();
            let near: Vec<bool> = b.depth.iter().map(|&t| t <= half).collect();
            let scale = 1.0;
            let rows: Vec<usize> = (0..nl).flat_map(|l| plus.iter().map(move |a| l * n + a)).collect();
            let cols: Vec<usize> = (0..nl).flat_map(|l| minus.iter().map(move |a| l * n + a)).collect();
            b.kpar
                .par_iter()
                .map(|k| {
                    let h = b.block(k, n);
                    let dmat = CMat::from_fn(rows.len(), cols.len(), |i, j| h[(rows[i], cols[j])]);
                    let mut acc = Accum::new(nl);
                    add_dense_modes(&mut acc, &dmat, &rows, &cols, n, nl, eps, &near, threshold, k, scale);
                    acc
                })
                .reduce(|| Accum::new(nl), Accum::merge)
        }
        SlabKind::RealSpace { realization, depth, .. } => {
            let ns = realization.geometry.len();
            let near: Vec<bool> = depth.iter().map(|&t| t <= half).collect();
            let rows: Vec<usize> = (0..ns).flat_map(|s| plus.iter().map(move |a| s * n + a)).collect();
            let cols: Vec<usize> = (0..ns).flat_map(|s| minus.iter().map(move |a| s * n + a)).collect();
            let dsp = realization.matrix.submatrix(&rows, &cols);
            let mut acc = Accum::new(ns);
            if rows.len().min(cols.len()) <= DENSE_LIMIT {
                add_dense_modes(&mut acc, &dsp.to_dense(), &rows, &cols, n, ns, eps, &near, threshold, &[], 1.0);
            } else {
                add_banded_modes(&mut acc, &dsp, &rows, &cols, n, ns, eps, &near, threshold, slab.seed)?;
            }
            acc
        }
    };
    let (signed, alt, weights) = match assignment {
        EdgeAssignment::Soft => (acc.soft, acc.hard, acc.soft_w.clone()),
        EdgeAssignment::Hard { .. } => (acc.hard, acc.soft, acc.hard_w.clone()),
    };
    let mut modes = acc.modes;
    modes.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
    let n_plus: f64 = weights.iter().filter(|&&w| w > 0.0).sum();
    let n_minus: f64 = -weights.iter().filter(|&&w| w < 0.0).sum::<f64>();
    debug_assert!((n_plus - n_minus - signed).abs() < 1e-6 * (1.0 + signed.abs()));
    let separation_warning = match acc.gap {
        Some(g) if g < 5.0 * eps => Some(format!("next singular value {g:.3e} is within a factor 5 of eps_zero {eps:.3e}")),
        _ => None,
    };
    Ok(ZeroModeReport {
        eps_zero: eps,
        assignment,
        modes,
        gap: acc.gap,
        n_plus,
        n_minus,
        alternate_signed: alt,
        site_weights: weights,
        separation_warning,
    })
}

#[allow(clippy::too_many_arguments)]
fn add_dense_modes(
    acc: &mut Accum,
    dmat: &CMat,
    rows: &[usize],
    cols: &[usize],
    n: usize,
    sites: usize,
    eps: f64,
    near: &[bool],
    threshold: f64,
    k: &[f64],
    scale: f64,
) {
    let svd = Svd::new(dmat);
    let nr = dmat.nrows();
    let nc = dmat.ncols();
    // singular values padded with zeros for the rectangular excess
    let mut left_small = Vec::new();
    let mut right_small = Vec::new();
    let r = svd.sigma.len();
    for i in 0..r {
        if svd.sigma[i] < eps {
            left_small.push((i, svd.sigma[i]));
            right_small.push((i, svd.sigma[i]));
        } else {
            acc.merge_gap(Some(svd.sigma[i]));
            break;
        }
    }
    let lu = full_basis(&svd.u, nr);
    let rv = full_basis(&svd.v, nc);
    // left vectors live on J+ rows, right vectors on J- columns
    let mut left: Vec<(CVec, f64)> = left_small.iter().map(|&(i, s)| (svd.u.column(i).into_owned(), s)).collect();
    let mut right: Vec<(CVec, f64)> = right_small.iter().map(|&(i, s)| (svd.v.column(i).into_owned(), s)).collect();
    for c in r..nr {
        left.push((lu.column(c).into_owned(), 0.0));
    }
    for c in r..nc {
        right.push((rv.column(c).into_owned(), 0.0));
    }
    for (vec, s) in left {
        let w = site_weights_of(vec.iter().enumerate().map(|(i, z)| (rows[i] / n, z.norm_sqr())), sites);
        acc.add(s, 1.0, &w, near, threshold, k, scale);
    }
    for (vec, s) in right {
        let w = site_weights_of(vec.iter().enumerate().map(|(i, z)| (cols[i] / n, z.norm_sqr())), sites);
        acc.add(s, -1.0, &w, near, threshold, k, scale);
    }
}

/// Completes the columns of `q` to an orthonormal basis of `C^m`.
fn full_basis(q: &CMat, m: usize) -> CMat {
    if q.ncols() >= m {
        return q.clone();
    }
    let mut a = CMat::zeros(m, m);
    a.view_mut((0, 0), (m, q.ncols())).copy_from(q);
    for c in q.ncols()..m {
        a[(c, c)] = C64::new(1.0, 0.0);
    }
    let mut out = a.clone();
    for c in 0..m {
        let mut v = a.column(c).into_owned();
        for p in 0..c {
            let b = out.column(p).into_owned();
            let dot = b.dotc(&v);
            v -= b * dot;
        }
        let nv = v.norm();
        if nv > 1e-12 {
            out.set_column(c, &(v / C64::new(nv, 0.0)));
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn add_banded_modes(
    acc: &mut Accum,
    dsp: &Csr,
    rows: &[usize],
    cols: &[usize],
    n: usize,
    sites: usize,
    eps: f64,
    near: &[bool],
    threshold: f64,
    seed: u64,
) -> Result<()> {
    let cutoff = eps * eps;
    let block = 96;
    let minus = low_spectrum(&dsp.gram(), cutoff, block, 1e-6, seed)?;
    let plus = low_spectrum(&dsp.adjoint().gram(), cutoff, block, 1e-6, seed ^ 0x9e37)?;
    for (spec, idx, chi) in [(&plus, rows, 1.0), (&minus, cols, -1.0)] {
        for c in 0..spec.values.len() {
            let w = site_weights_of(spec.vectors.column(c).iter().enumerate().map(|(i, z)| (idx[i] / n, z.norm_sqr())), sites);
            acc.add(spec.values[c].max(0.0).sqrt(), chi, &w, near, threshold, &[], 1.0);
        }
        acc.merge_gap(spec.next_above.map(|v| v.max(0.0).sqrt()));
    }
    Ok(())
}

/// Normalization of the trace per unit surface area.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `Lambda * count / L^{d-1}` over one boundary period (rational periodic slabs).
    Strip,
    /// `|v_j|` times the average column sum along the axis `e_j` with the largest `|v_j|`.
    Columns,
}

/// Signed surface density `T^(J Ker h^)` of the near-edge flat band.
pub fn signed_surface_density(slab: &SlabRealization, report: &ZeroModeReport, norm: Normalization) -> Result<InvariantResult> {
    let cut = &slab.cut;
    let d = cut.d();
    let path = if slab.is_bloch() { Path::KSpace } else { Path::RealSpace };
    let (value, alt) = match norm {
        Normalization::Strip => {
            let lambda = cut.lambda().ok_or_else(|| Error::InvalidArgument("strip normalization needs a rational cut".into()))?;
            if d > 1 && slab.spec.parallel != Boundary::Periodic {
                return Err(Error::InvalidArgument("strip normalization needs a periodic parallel boundary".into()));
            }
            let cells = (slab.spec.length.max(1) as f64).powi(d as i32 - 1);
            let f = if d == 1 { 1.0 } else { lambda / cells };
            (report.signed() * f, report.alternate_signed * f)
        }
        Normalization::Columns => {
            let (v, ratio) = column_density(slab, report)?;
            (v, report.alternate_signed * ratio)
        }
    };
    let mut res = InvariantResult::new(value, (value - alt).abs(), path)
        .with("n_plus", report.n_plus)
        .with("n_minus", report.n_minus)
        .with("width", slab.spec.width)
        .with("length", slab.spec.length as f64)
        .with("r", cut.r)
        .with("eps_zero", report.eps_zero);
    if let Some(g) = report.gap {
        res = res.with("gap", g);
    }
    Ok(res)
}

/// Column-sum density and the factor converting a signed count into a density.
fn column_density(slab: &SlabRealization, report: &ZeroModeReport) -> Result<(f64, f64)> {
    let cut = &slab.cut;
    let d = cut.d();
    if d == 1 {
        let s: f64 = report.site_weights.iter().sum();
        return Ok((s, 1.0));
    }
    if d != 2 {
        return Err(Error::DimensionMismatch("column normalization is implemented for d <= 2".into()));
    }
    let j = if cut.v[0].abs() >= cut.v[1].abs() { 0 } else { 1 };
    let o = 1 - j;
    let vj = cut.v[j].abs();
    let mut cols: BTreeMap<i64, f64> = BTreeMap::new();
    let discard;
    match &slab.kind {
        SlabKind::Bloch(b) => {
            let l = slab.spec.length as i64;
            let period = mat_vec(&b.minv, &[0, l]);
            let modulus = period[o].abs();
            for (li, &y1) in b.layers.iter().enumerate() {
                let w = report.site_weights[li] / l as f64;
                for y2 in 0..l {
                    let x = mat_vec(&b.minv, &[y1, y2]);
                    *cols.entry(x[o].rem_euclid(modulus)).or_insert(0.0) += w;
                }
            }
            discard = 0;
        }
        SlabKind::RealSpace { realization, period, .. } => {
            for (s, x) in realization.geometry.sites.iter().enumerate() {
                let key = match period {
                    Some(p) => x[o].rem_euclid(p[o].abs()),
                    None => x[o],
                };
                *cols.entry(key).or_insert(0.0) += report.site_weights[s];
            }
            discard = if period.is_some() { 0 } else { slab.model.range() };
        }
    }
    let keys: Vec<i64> = cols.keys().copied().collect();
    if keys.len() <= 2 * discard {
        return Err(Error::EmptyInterior { margin: discard });
    }
    let kept = &keys[discard..keys.len() - discard];
    let total: f64 = kept.iter().map(|k| cols[k]).sum();
    let ncols = kept.len() as f64;
    let all: f64 = cols.values().sum();
    let ratio = if all != 0.0 { vj * total / ncols / all } else { vj / ncols };
    Ok((vj * total / ncols, ratio))
}

/// Averages a slab observable over boundary offsets; the spread enters the error.
pub fn offset_average<F>(rs: &[f64], f: F) -> Result<InvariantResult>
where
    F: Fn(f64) -> Result<InvariantResult> + Sync,
{
    if rs.len() < 2 {
        return Err(Error::InvalidArgument("offset averaging needs at least two offsets".into()));
    }
    let results: Vec<InvariantResult> = rs.par_iter().map(|&r| f(r)).collect::<Result<_>>()?;
    let vals: Vec<f64> = results.iter().map(|r| r.value).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let spread = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - vals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let err = results.iter().map(|r| r.error_estimate).sum::<f64>() / results.len() as f64;
    Ok(InvariantResult::new(mean, err.max(spread), results[0].path)
        .with("spread", spread)
        .with("offsets", rs.len() as f64))
}

/// `count` offsets `(i + 1/2) / count` in units of the boundary period (or of length one).
pub fn default_offsets(cut: &CutPlane, count: usize) -> Vec<f64> {
    let unit = cut.lambda().unwrap_or(1.0);
    (0..count).map(|i| (i as f64 + 0.5) / count as f64 * unit).collect()
}

/// Offset-averaged density of the near-edge flat band with default settings.
pub fn edge_density(
    model: &ModelSpec,
    cut: &CutPlane,
    spec: &SlabSpec,
    boundary: &BoundaryTerm,
    offsets: usize,
    eps_zero: Option<f64>,
) -> Result<InvariantResult> {
    let norm = if cut.lambda().is_some() && (spec.parallel == Boundary::Periodic || cut.d() == 1) {
        Normalization::Strip
    } else {
        Normalization::Columns
    };
    let run = |r: f64| {
        let c = cut.with_offset(r);
        let slab = restrict_halfspace(model, &c, spec, boundary, 0)?;
        let rep = zero_modes(&slab, eps_zero, EdgeAssignment::Soft)?;
        signed_surface_density(&slab, &rep, norm)
    };
    if offsets <= 1 {
        return run(cut.r);
    }
    offset_average(&default_offsets(cut, offsets), run)
}

/// Sufficient-condition metadata for the bulk-boundary identity.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkConditions {
    /// Smallest singular value of the chiral block on the grid.
    pub min_singular: f64,
    pub spectral_gap: bool,
    pub pseudogap_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BbcRecord {
    pub bulk: InvariantResult,
    pub edge: InvariantResult,
    pub gap: f64,
    pub conditions: BulkConditions,
}

/// Bulk winding along the cut normal against the signed edge density.
pub fn bbc_check(
    model: &ModelSpec,
    cut: &CutPlane,
    spec: &SlabSpec,
    boundary: &BoundaryTerm,
    bulk_grid: usize,
    offsets: usize,
) -> Result<BbcRecord> {
    if !model.chiral {
        return Err(Error::NotChiral("bulk-boundary check needs a chiral model".into()));
    }
    let bulk = winding_of_model(model, &cut.direction(), bulk_grid)?;
    let edge = edge_density(model, cut, spec, boundary, offsets, None)?;
    let conditions = bulk_conditions(model, bulk_grid.min(256))?;
    Ok(BbcRecord { gap: (bulk.value - edge.value).abs(), bulk, edge, conditions })
}

fn bulk_conditions(model: &ModelSpec, n: usize) -> Result<BulkConditions> {
    let d = model.d;
    let grid = KField::grid(&vec![n; d], &vec![0.0; d]);
    let min_singular = grid
        .par_iter()
        .map(|k| model.offdiag_block(k).map(|a| Svd::new(&a).sigma[0]))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let lipschitz: f64 = model
        .hoppings()
        .iter()
        .map(|(x, t)| 2.0 * PI * x.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt() * t.norm())
        .sum();
    let spectral_gap = min_singular > (lipschitz * (d as f64).sqrt() / (2.0 * n as f64)).max(1e-6 * hopping_norm_bound(model));
    let pseudogap_exponent = if spectral_gap {
        None
    } else {
        dos_kgrid(model, n.max(64), 512, None).ok().and_then(|dos| pseudogap_exponent(&dos, 0.0, None).ok()).map(|f| f.gamma)
    };
    Ok(BulkConditions { min_singular, spectral_gap, pseudogap_exponent })
}

/// Rational convergent cuts approximating an irrational normal.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergentRow {
    pub g: Vec<i64>,
    pub density: InvariantResult,
}

/// Densities on successive rational approximants of an irrational cut; the
/// last one is the reported value with the last increment as its error.
pub fn convergent_sweep(
    model: &ModelSpec,
    convergents: &[Vec<i64>],
    spec: &SlabSpec,
    offsets: usize,
) -> Result<(Vec<ConvergentRow>, InvariantResult)> {
    let mut rows = Vec::new();
    for g in convergents {
        let cut = make_lattice_cut(g, 0.0)?;
        let density = edge_density(model, &cut, spec, &BoundaryTerm::None, offsets, None)?;
        rows.push(ConvergentRow { g: g.clone(), density });
    }
    let last = rows.last().ok_or_else(|| Error::InvalidArgument("no convergents".into()))?;
    let prev = if rows.len() > 1 { rows[rows.len() - 2].density.value } else { last.density.value };
    let res = InvariantResult::new(last.density.value, (last.density.value - prev).abs(), last.density.path);
    Ok((rows, res))
}

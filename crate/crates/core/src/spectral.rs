//! Functional calculus, Fermi projections and unitaries, density of states.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::invariants::KField;
use crate::lattice::{build_bulk, BoxSpec, ChiralGrading, FiniteRealization, ModelSpec};
use crate::linalg::{polar_unitary, CMat, Svd, C64, ZERO};

pub use crate::linalg::EigenSystem;

/// Average of the orbital-traced diagonal over the listed sites.
pub fn site_trace(op: &CMat, sites: &[usize], orbitals: usize) -> Result<C64> {
    if sites.is_empty() {
        return Err(Error::EmptyInterior { margin: 0 });
    }
    let mut s = ZERO;
    for &x in sites {
        for a in 0..orbitals {
            s += op[(x * orbitals + a, x * orbitals + a)];
        }
    }
    Ok(s / sites.len() as f64)
}

/// Trace per unit volume over sites at least `margin` away from open faces.
pub fn trace_per_volume(real: &FiniteRealization, op: &CMat, margin: usize) -> Result<C64> {
    if let Some(b) = &real.box_spec {
        if b.lengths.iter().zip(&b.bc).any(|(&l, bc)| *bc == crate::lattice::Boundary::Open && 2 * margin >= l) {
            return Err(Error::EmptyInterior { margin });
        }
    }
    let sites = real.interior(margin);
    if sites.is_empty() {
        return Err(Error::EmptyInterior { margin });
    }
    let orbitals = op.nrows() / real.geometry.len();
    site_trace(op, &sites, orbitals)
}

/// Default kernel tolerance `1e-8 ||H||`.
pub fn default_tol_kernel(norm: f64) -> f64 {
    1e-8 * norm.max(1e-300)
}

/// Default Fermi-level tolerance `1e-10 ||H||`.
pub fn default_tol_degenerate(norm: f64) -> f64 {
    1e-10 * norm.max(1e-300)
}

/// `p_F = chi(H <= E_F)`.
pub fn fermi_projection(es: &EigenSystem, e_f: f64, tol_degenerate: f64) -> Result<CMat> {
    if let Some(&e) = es.values.iter().find(|&&e| (e - e_f).abs() <= tol_degenerate) {
        return Err(Error::EigenvalueAtFermiLevel { eigenvalue: e, tol: tol_degenerate });
    }
    Ok(es.projector(|e| e <= e_f))
}

/// `sgn_eps(h) = (2/pi) arctan(h/eps)`.
pub fn approx_sign(es: &EigenSystem, eps: f64) -> CMat {
    assert!(eps > 0.0, "eps must be positive");
    es.apply(|e| 2.0 / PI * (e / eps).atan())
}

/// `chi_eps(h) = 1/2 - (1/pi) arctan(h/eps)`.
pub fn approx_indicator(es: &EigenSystem, eps: f64) -> CMat {
    assert!(eps > 0.0, "eps must be positive");
    es.apply(|e| 0.5 - (e / eps).atan() / PI)
}

/// Positions of the `J+` and `J-` orbital rows in site-major ordering.
fn graded_indices(sites: usize, n: usize) -> (Vec<usize>, Vec<usize>) {
    let h = n / 2;
    let mut plus = Vec::with_capacity(sites * h);
    let mut minus = Vec::with_capacity(sites * h);
    for s in 0..sites {
        for a in 0..h {
            plus.push(s * n + a);
            minus.push(s * n + h + a);
        }
    }
    (plus, minus)
}

/// Checks `J H J = -H` for the site-major grading.
pub fn check_chiral_matrix(h: &CMat, n: usize, tol: f64) -> Result<()> {
    if n % 2 != 0 || h.nrows() % n != 0 {
        return Err(Error::NotChiral("orbital count is odd".into()));
    }
    let g = ChiralGrading::new(n);
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            if g.sign(i % n) == g.sign(j % n) && h[(i, j)].norm() > tol {
                return Err(Error::NotChiral(format!("diagonal-block entry ({i},{j}) = {}", h[(i, j)])));
            }
        }
    }
    Ok(())
}

/// Real-space Fermi unitary: the `J+ <- J-` block of `sgn(H)`.
pub fn fermi_unitary_matrix(h: &CMat, orbitals: usize, tol_kernel: f64) -> Result<CMat> {
    check_chiral_matrix(h, orbitals, 1e-12 * (1.0 + crate::linalg::max_abs(h)))?;
    let sites = h.nrows() / orbitals;
    let (plus, minus) = graded_indices(sites, orbitals);
    let a = CMat::from_fn(plus.len(), minus.len(), |i, j| h[(plus[i], minus[j])]);
    let svd = Svd::new(&a);
    let bad = svd.sigma.iter().filter(|&&s| s <= tol_kernel).count();
    if bad > 0 {
        return Err(Error::KernelPresent { count: 2 * bad, tol: tol_kernel });
    }
    Ok(&svd.u * svd.v.adjoint())
}

/// Fermi unitary of a realization with the default kernel tolerance.
pub fn fermi_unitary(real: &FiniteRealization, tol_kernel: Option<f64>) -> Result<CMat> {
    let h = real.dense();
    let tol = tol_kernel.unwrap_or_else(|| default_tol_kernel(real.matrix.norm_bound()));
    fermi_unitary_matrix(&h, real.orbitals, tol)
}

/// `sgn(H)` rebuilt from a Fermi unitary.
pub fn sign_from_unitary(u: &CMat, orbitals: usize) -> CMat {
    let h = orbitals / 2;
    let sites = u.nrows() / h;
    let (plus, minus) = graded_indices(sites, orbitals);
    let mut s = CMat::zeros(sites * orbitals, sites * orbitals);
    for i in 0..plus.len() {
        for j in 0..minus.len() {
            s[(plus[i], minus[j])] = u[(i, j)];
            s[(minus[j], plus[i])] = u[(i, j)].conj();
        }
    }
    s
}

/// Fermi unitary `a(k)/|a(k)|` on a shifted k-grid.
pub fn fermi_unitary_field(model: &ModelSpec, dims: &[usize], shift: &[f64], tol_kernel: Option<f64>) -> Result<KField> {
    let g = model.grading()?;
    if !model.is_translation_invariant() {
        return Err(Error::NotTranslationInvariant);
    }
    let norm_bound: f64 = model.hoppings().values().map(crate::linalg::op_norm).sum();
    let tol = tol_kernel.unwrap_or_else(|| default_tol_kernel(norm_bound));
    let m = g.half();
    let grid = KField::grid(dims, shift);
    let vals: Vec<Result<CMat>> = grid
        .par_iter()
        .map(|k| {
            let h = model.bloch_unchecked(k);
            let a = h.view((0, m), (m, m)).into_owned();
            if m == 1 {
                let z = a[(0, 0)];
                if z.norm() <= tol {
                    return Err(Error::KernelPresent { count: 2, tol });
                }
                return Ok(CMat::from_element(1, 1, z / z.norm()));
            }
            let svd = Svd::new(&a);
            let bad = svd.sigma.iter().filter(|&&s| s <= tol).count();
            if bad > 0 {
                return Err(Error::KernelPresent { count: 2 * bad, tol });
            }
            Ok(polar_unitary(&a))
        })
        .collect();
    let values = vals.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(KField::new(dims.to_vec(), shift.to_vec(), values))
}

/// Fermi projection `chi(h(k) <= E_F)` on a k-grid.
pub fn fermi_projection_field(model: &ModelSpec, dims: &[usize], shift: &[f64], e_f: f64) -> Result<KField> {
    if !model.is_translation_invariant() {
        return Err(Error::NotTranslationInvariant);
    }
    let grid = KField::grid(dims, shift);
    let vals: Vec<Result<CMat>> = grid
        .par_iter()
        .map(|k| {
            let es = EigenSystem::new(&model.bloch_unchecked(k));
            let tol = default_tol_degenerate(es.norm().max(1.0));
            fermi_projection(&es, e_f, tol)
        })
        .collect();
    let values = vals.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(KField::new(dims.to_vec(), shift.to_vec(), values))
}

/// Histogram of the density-of-states measure, total mass `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DosHistogram {
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
    /// Raw eigenvalue counts per bin.
    pub counts: Vec<u64>,
    pub provenance: String,
    /// Whether the histogram comes from disorder sampling (Poisson weights in fits).
    pub disordered: bool,
}

impl DosHistogram {
    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// `nu([lo, hi])` with linear interpolation inside partial bins.
    pub fn integrated(&self, lo: f64, hi: f64) -> f64 {
        self.cdf(hi) - self.cdf(lo)
    }

    fn cdf(&self, e: f64) -> f64 {
        let mut acc = 0.0;
        for (b, m) in self.mass.iter().enumerate() {
            let (l, r) = (self.edges[b], self.edges[b + 1]);
            if e >= r {
                acc += m;
            } else {
                if e > l {
                    acc += m * (e - l) / (r - l);
                }
                break;
            }
        }
        acc
    }

    fn counts_in(&self, lo: f64, hi: f64) -> f64 {
        let mut c = 0.0;
        for (b, &n) in self.counts.iter().enumerate() {
            let (l, r) = (self.edges[b], self.edges[b + 1]);
            let ov = (hi.min(r) - lo.max(l)).max(0.0);
            c += n as f64 * ov / (r - l);
        }
        c
    }
}

fn bin_eigenvalues(values: &[f64], weight: f64, edges: &[f64], mass: &mut [f64], counts: &mut [u64]) {
    let nb = mass.len();
    let (lo, hi) = (edges[0], edges[nb]);
    for &e in values {
        let mut b = ((e - lo) / (hi - lo) * nb as f64).floor() as isize;
        b = b.clamp(0, nb as isize - 1);
        mass[b as usize] += weight;
        counts[b as usize] += 1;
    }
}

fn uniform_edges(range: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| -range + 2.0 * range * i as f64 / bins as f64).collect()
}

/// Bound on `||h(k)||` from the hopping norms.
pub fn hopping_norm_bound(model: &ModelSpec) -> f64 {
    model.hoppings().values().map(crate::linalg::op_norm).sum()
}

/// Clean DOS by binning band energies on an `n^d` grid shifted by half a spacing.
pub fn dos_kgrid(model: &ModelSpec, n: usize, bins: usize, range: Option<f64>) -> Result<DosHistogram> {
    if !model.is_translation_invariant() {
        return Err(Error::NotTranslationInvariant);
    }
    if n == 0 || bins == 0 {
        return Err(Error::InvalidArgument("sampling budget must be positive".into()));
    }
    let range = range.unwrap_or_else(|| hopping_norm_bound(model)) * (1.0 + 1e-12);
    let dims = vec![n; model.d];
    let grid = KField::grid(&dims, &vec![0.5; model.d]);
    let chiral2 = model.chiral && model.n == 2;
    let energies: Vec<Vec<f64>> = grid
        .par_chunks(n)
        .map(|chunk| {
            let mut out = Vec::with_capacity(chunk.len() * model.n);
            for k in chunk {
                let h = model.bloch_unchecked(k);
                if chiral2 {
                    let a = h[(0, 1)].norm();
                    out.push(-a);
                    out.push(a);
                } else {
                    out.extend(EigenSystem::new(&h).values);
                }
            }
            out
        })
        .collect();
    let edges = uniform_edges(range, bins);
    let mut mass = vec![0.0; bins];
    let mut counts = vec![0u64; bins];
    let w = 1.0 / grid.len() as f64;
    for chunk in &energies {
        bin_eigenvalues(chunk, w, &edges, &mut mass, &mut counts);
    }
    Ok(DosHistogram { edges, mass, counts, provenance: format!("kgrid {n}^{}", model.d), disordered: false })
}

/// DOS of a disordered model averaged over seeds on a periodic box.
pub fn dos_disorder(model: &ModelSpec, boxs: &BoxSpec, seeds: &[u64], bins: usize, range: Option<f64>) -> Result<DosHistogram> {
    if seeds.is_empty() || bins == 0 {
        return Err(Error::InvalidArgument("sampling budget must be positive".into()));
    }
    let spectra: Vec<Result<(Vec<f64>, usize)>> = seeds
        .par_iter()
        .map(|&s| {
            let r = build_bulk(model, boxs, s)?;
            let es = EigenSystem::new(&r.dense());
            Ok((es.values, r.geometry.len()))
        })
        .collect();
    let spectra = spectra.into_iter().collect::<Result<Vec<_>>>()?;
    let dims: Vec<String> = boxs.lengths.iter().map(|l| l.to_string()).collect();
    dos_from_spectra(&spectra, bins, range, format!("box {} x {} seeds", dims.join("x"), seeds.len()))
}

/// Seed-averaged DOS from precomputed `(eigenvalues, site count)` pairs.
pub fn dos_from_spectra(spectra: &[(Vec<f64>, usize)], bins: usize, range: Option<f64>, provenance: String) -> Result<DosHistogram> {
    if spectra.is_empty() || bins == 0 {
        return Err(Error::InvalidArgument("sampling budget must be positive".into()));
    }
    let range = range.unwrap_or_else(|| {
        spectra.iter().flat_map(|(v, _)| v.iter()).fold(0.0f64, |m, e| m.max(e.abs()))
    }) * (1.0 + 1e-12);
    let edges = uniform_edges(range, bins);
    let mut mass = vec![0.0; bins];
    let mut counts = vec![0u64; bins];
    for (vals, sites) in spectra {
        let w = 1.0 / (*sites as f64 * spectra.len() as f64);
        bin_eigenvalues(vals, w, &edges, &mut mass, &mut counts);
    }
    Ok(DosHistogram { edges, mass, counts, provenance, disordered: true })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudogapFit {
    pub gamma: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Least-squares slope of `log nu([E0-eps, E0+eps])` against `log eps`.
pub fn pseudogap_exponent(dos: &DosHistogram, e0: f64, window: Option<(f64, f64)>) -> Result<PseudogapFit> {
    let bw = dos.bin_width();
    let bandwidth = dos.edges[dos.edges.len() - 1] - dos.edges[0];
    let (lo, hi) = window.unwrap_or((4.0 * bw, 0.2 * bandwidth));
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("fit window [{lo}, {hi}] is empty")));
    }
    let npts = 24;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for i in 0..npts {
        let eps = lo * (hi / lo).powf(i as f64 / (npts - 1) as f64);
        let m = dos.integrated(e0 - eps, e0 + eps);
        if i == 0 && m <= 0.0 {
            return Err(Error::GapDetected);
        }
        if m > 0.0 {
            xs.push(eps.ln());
            ys.push(m.ln());
            ws.push(if dos.disordered { dos.counts_in(e0 - eps, e0 + eps).max(1.0) } else { 1.0 });
        }
    }
    if xs.len() < 4 {
        return Err(Error::GapDetected);
    }
    let (slope, stderr) = weighted_slope(&xs, &ys, &ws);
    Ok(PseudogapFit { gamma: slope, stderr, window: (lo, hi), points: xs.len() })
}

fn weighted_slope(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    let n = x.len() as f64;
    let resid: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (c - my - slope * (a - mx)).powi(2)).sum();
    let dof = (n - 2.0).max(1.0);
    let stderr = (resid / dof / sxx).sqrt();
    (slope, stderr)
}

//! Fedosov trace formula, Toeplitz indices by kernel counting, and the index
//! side of the bulk-boundary identity for d = 1 chains.

use crate::error::{Error, Result};
use crate::halfspace::{make_cut, restrict_halfspace, BoundaryTerm, SlabSpec};
use crate::harmonic::{profile_from_field, OperatorProfile};
use crate::invariants::{winding_of_model, Direction, InvariantResult};
use crate::lattice::{Boundary, FiniteRealization, ModelSpec};
use crate::linalg::{op_norm, CMat, EigenSystem, Svd, C64};
use crate::spectral::{fermi_unitary_field, trace_per_volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMethod {
    Fedosov { m: u32 },
    KernelCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexReport {
    /// Kernel dimension, or `T((1 - a*a)^m)` for the Fedosov method.
    pub kernel: f64,
    /// Cokernel dimension, or `T((1 - aa*)^m)`.
    pub cokernel: f64,
    pub value: f64,
    pub method: IndexMethod,
    /// Truncation metadata such as `L`, thresholds and residuals.
    pub truncation: Vec<(String, f64)>,
}

impl IndexReport {
    fn with(mut self, key: &str, v: f64) -> Self {
        self.truncation.push((key.to_string(), v));
        self
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.truncation.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// Index rounded to the nearest integer.
    pub fn rounded(&self) -> i64 {
        self.value.round() as i64
    }
}

/// Trace used by the Fedosov formula.
#[derive(Debug, Clone, Copy)]
pub enum TraceKind<'a> {
    Ordinary,
    /// Interior trace per unit volume on a realization (square `a` only).
    PerVolume { realization: &'a FiniteRealization, margin: usize },
}

fn fedosov_side(g: &CMat, m: u32, trace: &TraceKind) -> Result<f64> {
    let es = EigenSystem::new(g);
    if es.values.iter().any(|&v| v < -1e-12 || v > 2.0 - 1e-12) {
        return Err(Error::NotSummable(format!(
            "spectrum of 1 - a*a leaves (-1, 1]: eigenvalues of a*a span [{:.3e}, {:.3e}]",
            es.values.first().copied().unwrap_or(0.0),
            es.values.last().copied().unwrap_or(0.0)
        )));
    }
    match trace {
        TraceKind::Ordinary => Ok(es.values.iter().map(|&v| (1.0 - v).powi(m as i32)).sum()),
        TraceKind::PerVolume { realization, margin } => {
            let f = es.apply(|v| (1.0 - v).powi(m as i32));
            Ok(trace_per_volume(realization, &f, *margin)?.re)
        }
    }
}

/// `T((1 - a*a)^m) - T((1 - aa*)^m)`, with the `m -> m + 1` change as residual.
pub fn fedosov_index(a: &CMat, m: u32, trace: TraceKind) -> Result<IndexReport> {
    if m == 0 {
        return Err(Error::InvalidArgument("Fedosov exponent must be at least 1".into()));
    }
    if let TraceKind::PerVolume { .. } = trace {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch("per-volume Fedosov traces need a square operator".into()));
        }
    }
    let ata = a.adjoint() * a;
    let aat = a * a.adjoint();
    let k = fedosov_side(&ata, m, &trace)?;
    let c = fedosov_side(&aat, m, &trace)?;
    let next = fedosov_side(&ata, m + 1, &trace)? - fedosov_side(&aat, m + 1, &trace)?;
    let value = k - c;
    Ok(IndexReport { kernel: k, cokernel: c, value, method: IndexMethod::Fedosov { m }, truncation: vec![] }
        .with("m_residual", (next - value).abs()))
}

/// Kernel-count threshold relative to `||a||`.
pub const KERNEL_TOL: f64 = 1e-8;
/// Required ratio between the first retained singular value and the threshold.
pub const SEPARATION: f64 = 100.0;

/// `dim ker a - dim ker a*` from singular values below `1e-8 ||a||`.
pub fn kernel_count_index(a: &CMat) -> Result<IndexReport> {
    let (m, n) = (a.nrows(), a.ncols());
    let norm = op_norm(a);
    let tol = KERNEL_TOL * norm.max(f64::MIN_POSITIVE);
    let sigma = if m.min(n) == 0 { vec![] } else { Svd::new(a).sigma };
    let rank = sigma.iter().filter(|&&s| s >= tol).count();
    check_separation(&sigma, tol)?;
    let kernel = (n - rank) as f64;
    let cokernel = (m - rank) as f64;
    Ok(IndexReport { kernel, cokernel, value: kernel - cokernel, method: IndexMethod::KernelCount, truncation: vec![] }
        .with("tol", tol))
}

fn check_separation(sigma: &[f64], tol: f64) -> Result<()> {
    if let Some(&first) = sigma.iter().find(|&&s| s >= tol) {
        let below = sigma.iter().copied().filter(|&s| s < tol).fold(0.0, f64::max);
        if first < SEPARATION * tol.max(below) {
            return Err(Error::NonConvergedTruncation(format!(
                "singular value {first:.3e} within a factor {SEPARATION} of the kernel threshold {tol:.3e}"
            )));
        }
    }
    Ok(())
}

/// `L x L` block Toeplitz truncation `T_ij = psi_{i-j}` of a d = 1 symbol.
pub fn toeplitz_matrix(symbol: &OperatorProfile, l: usize) -> Result<CMat> {
    if symbol.d != 1 {
        return Err(Error::DimensionMismatch("Toeplitz truncations need a d = 1 symbol".into()));
    }
    let n = symbol.n;
    let mut t = CMat::zeros(l * n, l * n);
    for i in 0..l {
        for j in 0..l {
            if let Some(c) = symbol.get(&[i as i64 - j as i64]) {
                t.view_mut((i * n, j * n), (n, n)).copy_from(c);
            }
        }
    }
    Ok(t)
}

/// Smallest singular value of the symbol on a uniform `grid`.
pub fn symbol_min_modulus(symbol: &OperatorProfile, grid: usize) -> f64 {
    (0..grid)
        .map(|i| {
            let a = symbol.symbol(&[i as f64 / grid as f64]);
            Svd::new(&a).sigma[0]
        })
        .fold(f64::INFINITY, f64::min)
}

/// Counts near-kernel vectors of `T` (kernel) and `T*` (cokernel) localized in
/// the half next to the origin; the far-end ones are truncation artifacts.
fn localized_kernel_count(t: &CMat, n: usize) -> Result<(usize, usize, f64)> {
    let norm = op_norm(t);
    let tol = KERNEL_TOL * norm.max(f64::MIN_POSITIVE);
    let svd = Svd::new(t);
    check_separation(&svd.sigma, tol)?;
    let dim = t.nrows();
    let half = dim / n / 2 * n;
    let near = |v: nalgebra::DVectorView<C64>| v.iter().take(half).map(|z| z.norm_sqr()).sum::<f64>();
    let mut kernel = 0;
    let mut cokernel = 0;
    for (i, &s) in svd.sigma.iter().enumerate() {
        if s >= tol {
            break;
        }
        if near(svd.v.column(i)) > 0.5 {
            kernel += 1;
        }
        if near(svd.u.column(i)) > 0.5 {
            cokernel += 1;
        }
    }
    Ok((kernel, cokernel, tol))
}

/// Index of the half-line Toeplitz operator of an invertible symbol, from
/// localized kernel counts at truncations `L` and `2L`. Convention:
/// `index(e^{2 pi i w k}) = -w`.
pub fn toeplitz_index(symbol: &OperatorProfile, l: usize) -> Result<IndexReport> {
    toeplitz_index_with(symbol, l, None)
}

/// As [`toeplitz_index`] with a fixed finite-rank block added at the origin corner.
pub fn toeplitz_index_with(symbol: &OperatorProfile, l: usize, corner: Option<&CMat>) -> Result<IndexReport> {
    let min_modulus = symbol_min_modulus(symbol, (8 * l).max(512));
    if min_modulus <= 1e-6 {
        return Err(Error::SymbolNotInvertible { min_modulus });
    }
    let n = symbol.n;
    let mut counts = Vec::new();
    for size in [l, 2 * l] {
        let mut t = toeplitz_matrix(symbol, size)?;
        if let Some(c) = corner {
            if c.nrows() > t.nrows() || c.ncols() > t.ncols() {
                return Err(Error::DimensionMismatch("corner perturbation larger than the truncation".into()));
            }
            let mut v = t.view_mut((0, 0), (c.nrows(), c.ncols()));
            v += c;
        }
        counts.push(localized_kernel_count(&t, n)?);
    }
    let (k1, c1, tol) = counts[0];
    let (k2, c2, _) = counts[1];
    if (k1 as i64 - c1 as i64) != (k2 as i64 - c2 as i64) {
        return Err(Error::NonConvergedTruncation(format!(
            "index {} at L = {l} but {} at 2L",
            k1 as i64 - c1 as i64,
            k2 as i64 - c2 as i64
        )));
    }
    Ok(IndexReport {
        kernel: k2 as f64,
        cokernel: c2 as f64,
        value: k2 as f64 - c2 as f64,
        method: IndexMethod::KernelCount,
        truncation: vec![],
    }
    .with("L", l as f64)
    .with("tol", tol)
    .with("min_modulus", min_modulus))
}

/// Fourier profile of the Fermi unitary of a clean d = 1 chiral chain.
pub fn fermi_unitary_profile(model: &ModelSpec, grid: usize, radius: usize) -> Result<OperatorProfile> {
    if model.d != 1 {
        return Err(Error::DimensionMismatch("fermi_unitary_profile needs d = 1".into()));
    }
    let u = fermi_unitary_field(model, &[grid], &[0.0], None)?;
    let mut p = profile_from_field(&u, radius);
    p.coeffs.retain(|_, c| c.iter().any(|z| z.norm() > 1e-15));
    Ok(p)
}

/// Index of the compressed Fermi unitary of a d = 1 chain from the kernel of
/// the open chain's chiral block: near-edge kernel minus near-edge cokernel.
pub fn chain_index(model: &ModelSpec, length: usize, seed: u64) -> Result<IndexReport> {
    if model.d != 1 || !model.chiral {
        return Err(Error::NotChiral("chain_index needs a chiral d = 1 model".into()));
    }
    let cut = make_cut(&[1.0], 0.5)?;
    let slab = restrict_halfspace(model, &cut, &SlabSpec::new(length as f64, 1, Boundary::Open), &BoundaryTerm::Explicit(vec![]), seed)?;
    let real = slab.realization().expect("explicit boundary term gives a real-space slab");
    let gr = model.grading()?;
    let n = model.n;
    let ns = real.geometry.len();
    let rows: Vec<usize> = (0..ns).flat_map(|s| (0..n).filter(|&a| gr.sign(a) > 0.0).map(move |a| s * n + a)).collect();
    let cols: Vec<usize> = (0..ns).flat_map(|s| (0..n).filter(|&a| gr.sign(a) < 0.0).map(move |a| s * n + a)).collect();
    let d = real.matrix.submatrix(&rows, &cols).to_dense();
    let norm = op_norm(&d);
    let tol = KERNEL_TOL * norm;
    let svd = Svd::new(&d);
    check_separation(&svd.sigma, tol)?;
    let half = ns / 2;
    let near = |idx: &[usize], v: nalgebra::DVectorView<C64>| {
        v.iter().enumerate().filter(|(i, _)| idx[*i] / n < half).map(|(_, z)| z.norm_sqr()).sum::<f64>()
    };
    let (mut kernel, mut cokernel) = (0usize, 0usize);
    for (i, &s) in svd.sigma.iter().enumerate() {
        if s >= tol {
            break;
        }
        if near(&cols, svd.v.column(i)) > 0.5 {
            kernel += 1;
        }
        if near(&rows, svd.u.column(i)) > 0.5 {
            cokernel += 1;
        }
    }
    Ok(IndexReport {
        kernel: kernel as f64,
        cokernel: cokernel as f64,
        value: kernel as f64 - cokernel as f64,
        method: IndexMethod::KernelCount,
        truncation: vec![],
    }
    .with("L", length as f64)
    .with("tol", tol)
    .with("seed", seed as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SobolevRecord {
    pub winding: InvariantResult,
    pub index: IndexReport,
    /// `|winding + index|`.
    pub residual: f64,
}

/// Bulk winding of `u_F` against minus the Toeplitz index of its compression.
pub fn sobolev_index_check(model: &ModelSpec, grid: usize, l: usize) -> Result<SobolevRecord> {
    if model.d != 1 || !model.chiral {
        return Err(Error::NotChiral("sobolev_index_check needs a chiral d = 1 model".into()));
    }
    let winding = winding_of_model(model, &Direction::axis(1, 0), grid)?;
    let profile = fermi_unitary_profile(model, grid, l.min(grid / 2 - 1))?;
    let index = toeplitz_index(&profile, l)?;
    Ok(SobolevRecord { residual: (winding.value + index.value).abs(), winding, index })
}

/// Seed-averaged chain index with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderIndex {
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
}

pub fn disorder_averaged_index(model: &ModelSpec, length: usize, seeds: &[u64]) -> Result<DisorderIndex> {
    use rayon::prelude::*;
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let per_seed: Vec<f64> = seeds.par_iter().map(|&s| chain_index(model, length, s).map(|r| r.value)).collect::<Result<_>>()?;
    let k = per_seed.len() as f64;
    let mean = per_seed.iter().sum::<f64>() / k;
    let var = if per_seed.len() > 1 { per_seed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
    Ok(DisorderIndex { per_seed, mean, stderr: (var / k).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::presets;

    fn shift(l: usize) -> CMat {
        CMat::from_fn(l + 1, l, |i, j| if i == j + 1 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    #[test]
    fn fedosov_of_truncated_shift() {
        let s = shift(12);
        let r = fedosov_index(&s, 1, TraceKind::Ordinary).unwrap();
        assert!((r.value + 1.0).abs() < 1e-12);
        assert!(r.param("m_residual").unwrap() < 1e-12);
        assert_eq!(kernel_count_index(&s).unwrap().value, -1.0);
    }

    #[test]
    fn fedosov_of_unitary_and_direct_sum() {
        let u = CMat::identity(5, 5) * C64::new(0.0, 1.0);
        for m in 1..4 {
            assert!(fedosov_index(&u, m, TraceKind::Ordinary).unwrap().value.abs() < 1e-12);
        }
        let s = shift(6);
        let mut sum = CMat::zeros(13, 13);
        sum.view_mut((0, 0), (7, 6)).copy_from(&s);
        sum.view_mut((7, 6), (6, 7)).copy_from(&s.adjoint());
        assert!(fedosov_index(&sum, 2, TraceKind::Ordinary).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn fedosov_rejects_large_operators() {
        let a = CMat::identity(3, 3) * C64::new(2.0, 0.0);
        assert!(matches!(fedosov_index(&a, 1, TraceKind::Ordinary), Err(Error::NotSummable(_))));
    }

    #[test]
    fn toeplitz_index_of_monomials() {
        for w in [-2i64, -1, 0, 1, 2] {
            let p = OperatorProfile::scalar(1, &[(vec![w], C64::new(1.0, 0.0))]);
            assert_eq!(toeplitz_index(&p, 40).unwrap().rounded(), -w);
        }
    }

    #[test]
    fn singular_symbol_is_rejected() {
        let p = OperatorProfile::scalar(1, &[(vec![0], C64::new(1.0, 0.0)), (vec![1], C64::new(1.0, 0.0))]);
        assert!(matches!(toeplitz_index(&p, 20), Err(Error::SymbolNotInvertible { .. })));
    }

    #[test]
    fn ssh_chain_index() {
        assert_eq!(chain_index(&presets::ssh(0.5), 60, 0).unwrap().value, -1.0);
        assert_eq!(chain_index(&presets::ssh(2.0), 60, 0).unwrap().value, 0.0);
    }
}

//! Dense and sparse complex linear algebra used across the crate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::new(theta.cos(), theta.sin())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl EigenSystem {
    pub fn new(h: &CMat) -> Self {
        let n = h.nrows();
        if n == 0 {
            return EigenSystem { values: vec![], vectors: CMat::zeros(0, 0) };
        }
        let eig = h.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = CMat::zeros(n, n);
        for (c, &i) in order.iter().enumerate() {
            vectors.set_column(c, &eig.eigenvectors.column(i));
        }
        EigenSystem { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Functional calculus `V f(Λ) V*` for a real function.
    pub fn apply<F: Fn(f64) -> f64>(&self, f: F) -> CMat {
        let mut scaled = self.vectors.clone();
        for (c, &e) in self.values.iter().enumerate() {
            let w = f(e);
            scaled.column_mut(c).scale_mut(w);
        }
        &scaled * self.vectors.adjoint()
    }

    /// Projection onto eigenvectors selected by `keep`.
    pub fn projector<F: Fn(f64) -> bool>(&self, keep: F) -> CMat {
        self.apply(|e| if keep(e) { 1.0 } else { 0.0 })
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Singular value decomposition with singular values in ascending order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
}

impl Svd {
    pub fn new(a: &CMat) -> Self {
        let (m, n) = a.shape();
        let k = m.min(n);
        if k == 0 {
            return Svd { u: CMat::zeros(m, 0), sigma: vec![], v: CMat::zeros(n, 0) };
        }
        let svd = a.clone().svd(true, true);
        let u = svd.u.unwrap();
        let vt = svd.v_t.unwrap();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
        let mut uu = CMat::zeros(m, k);
        let mut vv = CMat::zeros(n, k);
        let mut sigma = Vec::with_capacity(k);
        for (c, &i) in order.iter().enumerate() {
            uu.set_column(c, &u.column(i));
            vv.set_column(c, &vt.row(i).adjoint());
            sigma.push(svd.singular_values[i]);
        }
        Svd { u: uu, sigma, v: vv }
    }
}

/// Largest singular value.
pub fn op_norm(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().iter().fold(0.0f64, |m, &s| m.max(s))
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

pub fn hermiticity_defect(a: &CMat) -> f64 {
    max_abs(&(a - a.adjoint()))
}

pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - CMat::identity(n, n)))
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

/// Polar part `a |a|^{-1}` of a square matrix.
pub fn polar_unitary(a: &CMat) -> CMat {
    if a.nrows() == 1 {
        let z = a[(0, 0)];
        return CMat::from_element(1, 1, z / z.norm());
    }
    let s = Svd::new(a);
    &s.u * s.v.adjoint()
}

pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| C64::new(gauss(rng), gauss(rng)));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = q;
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            out[(i, j)] *= ph;
        }
    }
    out
}

/// Standard normal sample via Box-Muller.
pub fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Compressed sparse row complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<C64>,
}

impl Csr {
    /// Builds from triplets, summing duplicates and dropping exact zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, C64)>) -> Self {
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<C64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Csr { nrows, ncols, indptr, indices, data };
        m.prune();
        m
    }

    fn prune(&mut self) {
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.data[k] != ZERO {
                    indices.push(self.indices[k]);
                    data.push(self.data[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(j, _)| j == c).map(|(_, v)| v).unwrap_or(ZERO)
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn from_dense(m: &CMat, tol: f64) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)].norm() > tol {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Csr::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn adjoint(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                t.push((c, r, v.conj()));
            }
        }
        Csr::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for r in 0..self.nrows {
            let mut s = ZERO;
            for (c, v) in self.row(r) {
                s += v * x[c];
            }
            y[r] = s;
        }
    }

    pub fn mul_dense(&self, x: &CMat) -> CMat {
        let mut y = CMat::zeros(self.nrows, x.ncols());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                for j in 0..x.ncols() {
                    y[(r, j)] += v * x[(c, j)];
                }
            }
        }
        y
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }

    /// Gershgorin-type bound on the operator norm: sqrt(max row sum * max column sum).
    pub fn norm_bound(&self) -> f64 {
        let mut rows = vec![0.0f64; self.nrows];
        let mut cols = vec![0.0f64; self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                rows[r] += v.norm();
                cols[c] += v.norm();
            }
        }
        let a = rows.iter().cloned().fold(0.0, f64::max);
        let b = cols.iter().cloned().fold(0.0, f64::max);
        (a * b).sqrt()
    }

    /// Symmetric sub-block on the listed rows/columns.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut cmap = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            cmap[c] = k;
        }
        let mut t = Vec::new();
        for (k, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                if cmap[c] != usize::MAX {
                    t.push((k, cmap[c], v));
                }
            }
        }
        Csr::from_triplets(rows.len(), cols.len(), t)
    }

    /// Sparse Gram matrix `A* A`.
    pub fn gram(&self) -> Self {
        let mut t = Vec::new();
        for r in 0..self.nrows {
            let row: Vec<(usize, C64)> = self.row(r).collect();
            for &(i, vi) in &row {
                for &(j, vj) in &row {
                    t.push((i, j, vi.conj() * vj));
                }
            }
        }
        Csr::from_triplets(self.ncols, self.ncols, t)
    }
}

/// Reverse Cuthill-McKee ordering of the symmetric pattern of a square matrix.
pub fn reverse_cuthill_mckee(a: &Csr) -> Vec<usize> {
    let n = a.nrows;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in 0..n {
        for (c, _) in a.row(r) {
            if c != r {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let deg: Vec<usize> = adj.iter().map(|l| l.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    loop {
        let start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| deg[i]);
        let Some(start) = start else { break };
        let root = pseudo_peripheral(&adj, start, &visited);
        let mut queue = std::collections::VecDeque::new();
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().cloned().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (deg[w], w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(adj: &[Vec<usize>], start: usize, blocked: &[bool]) -> usize {
    let mut root = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let (far, e) = bfs_far(adj, root, blocked);
        if e <= ecc {
            break;
        }
        ecc = e;
        root = far;
    }
    root
}

fn bfs_far(adj: &[Vec<usize>], root: usize, blocked: &[bool]) -> (usize, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    let mut far = (root, 0);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d > far.1 || (d == far.1 && adj[v].len() < adj[far.0].len()) {
            far = (v, d);
        }
        for &w in &adj[v] {
            if !blocked[w] && dist[w] == usize::MAX {
                dist[w] = d + 1;
                queue.push_back(w);
            }
        }
    }
    far
}

/// Half bandwidth of `a` under the permutation `perm` (new index -> old index).
pub fn bandwidth(a: &Csr, perm: &[usize]) -> usize {
    let mut inv = vec![0usize; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    let mut bw = 0;
    for r in 0..a.nrows {
        for (c, _) in a.row(r) {
            bw = bw.max(inv[r].abs_diff(inv[c]));
        }
    }
    bw
}

/// Cholesky factor `A = L L*` of a Hermitian positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    kd: usize,
    /// Row `i` holds `L[i][i-kd..=i]`.
    l: Vec<C64>,
}

impl BandCholesky {
    /// Factors `P A P^T + shift` where `perm` maps new index to old index.
    pub fn factor(a: &Csr, perm: &[usize], shift: f64) -> Result<Self> {
        let n = a.nrows;
        let kd = bandwidth(a, perm);
        let w = kd + 1;
        let mut inv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let mut l = vec![ZERO; n * w];
        for r in 0..n {
            let i = inv[r];
            for (c, v) in a.row(r) {
                let j = inv[c];
                if j <= i {
                    l[i * w + (j + kd - i)] += v;
                }
            }
            l[i * w + kd] += C64::new(shift, 0.0);
        }
        for i in 0..n {
            let lo = i.saturating_sub(kd);
            for j in lo..=i {
                let mut s = l[i * w + (j + kd - i)];
                let klo = lo.max(j.saturating_sub(kd));
                for k in klo..j {
                    s -= l[i * w + (k + kd - i)] * l[j * w + (k + kd - j)].conj();
                }
                if i == j {
                    if !(s.re > 0.0) {
                        return Err(Error::NoConvergence(format!(
                            "band matrix is not positive definite at pivot {i}"
                        )));
                    }
                    l[i * w + kd] = C64::new(s.re.sqrt(), 0.0);
                } else {
                    l[i * w + (j + kd - i)] = s / l[j * w + kd];
                }
            }
        }
        Ok(BandCholesky { n, kd, l })
    }

    pub fn half_bandwidth(&self) -> usize {
        self.kd
    }

    /// Solves in place for a row-major block `x` of `p` right-hand sides (permuted ordering).
    pub fn solve_block(&self, x: &mut [C64], p: usize) {
        let (n, kd, w) = (self.n, self.kd, self.kd + 1);
        let mut acc = vec![ZERO; p];
        for i in 0..n {
            acc.copy_from_slice(&x[i * p..(i + 1) * p]);
            for k in i.saturating_sub(kd)..i {
                let lik = self.l[i * w + (k + kd - i)];
                let xk = &x[k * p..(k + 1) * p];
                for c in 0..p {
                    acc[c] -= lik * xk[c];
                }
            }
            let d = self.l[i * w + kd].re;
            for c in 0..p {
                x[i * p + c] = acc[c] / d;
            }
        }
        for i in (0..n).rev() {
            let d = self.l[i * w + kd].re;
            for c in 0..p {
                x[i * p + c] /= d;
            }
            let xi: Vec<C64> = x[i * p..(i + 1) * p].to_vec();
            for k in i.saturating_sub(kd)..i {
                let lik = self.l[i * w + (k + kd - i)].conj();
                let xk = &mut x[k * p..(k + 1) * p];
                for c in 0..p {
                    xk[c] -= lik * xi[c];
                }
            }
        }
    }
}

/// Smallest eigenpairs of a Hermitian positive semidefinite sparse matrix by
/// shift-invert block subspace iteration on a band Cholesky factor.
#[derive(Debug, Clone)]
pub struct LowSpectrum {
    pub values: Vec<f64>,
    /// Columns are eigenvectors in the original ordering.
    pub vectors: CMat,
    pub iterations: usize,
    /// Smallest resolved Ritz value above the cutoff.
    pub next_above: Option<f64>,
}

/// Computes every eigenpair of `a` below `cutoff`. The block starts at `block`
/// columns and doubles (keeping the current subspace) while fewer than four
/// Ritz values lie above the cutoff. Converged when every kept residual is
/// below `tol * ||a||`.
pub fn low_spectrum(a: &Csr, cutoff: f64, block: usize, tol: f64, seed: u64) -> Result<LowSpectrum> {
    let n = a.nrows;
    let perm = reverse_cuthill_mckee(a);
    let shift = 1e-3 * cutoff.max(1e-14);
    let chol = BandCholesky::factor(a, &perm, shift)?;
    let scale = a.norm_bound().max(1e-300);
    let mut rng = seeded_rng(seed);
    let mut p = block.min(n).max(1);
    let mut x = CMat::from_fn(n, p, |_, _| C64::new(gauss(&mut rng), gauss(&mut rng)));
    let max_iter = 400;
    for it in 1..=max_iter {
        let mut buf = vec![ZERO; n * p];
        for (k, &o) in perm.iter().enumerate() {
            for c in 0..p {
                buf[k * p + c] = x[(o, c)];
            }
        }
        chol.solve_block(&mut buf, p);
        let mut y = CMat::zeros(n, p);
        for (k, &o) in perm.iter().enumerate() {
            for c in 0..p {
                y[(o, c)] = buf[k * p + c];
            }
        }
        let q = y.qr().q();
        let aq = a.mul_dense(&q);
        let g = q.adjoint() * &aq;
        let g = (&g + g.adjoint()) * C64::new(0.5, 0.0);
        let es = EigenSystem::new(&g);
        x = &q * &es.vectors;
        let above = es.values.iter().filter(|&&v| v > cutoff).count();
        if above < 4.min(p) && p < n {
            let np = (2 * p).min(n);
            let mut grown = CMat::from_fn(n, np, |_, _| C64::new(gauss(&mut rng), gauss(&mut rng)));
            grown.view_mut((0, 0), (n, p)).copy_from(&x);
            x = grown;
            p = np;
            continue;
        }
        let ax = &aq * &es.vectors;
        let last = es.values.iter().position(|&v| v > cutoff).map_or(p, |i| i + 1);
        let converged = (0..last).all(|c| {
            (ax.column(c) - x.column(c) * C64::new(es.values[c], 0.0)).norm() <= tol * scale
        });
        if converged {
            let keep: Vec<usize> = (0..p).filter(|&i| es.values[i] <= cutoff).collect();
            let mut vecs = CMat::zeros(n, keep.len());
            for (c, &i) in keep.iter().enumerate() {
                vecs.set_column(c, &x.column(i));
            }
            return Ok(LowSpectrum {
                values: keep.iter().map(|&i| es.values[i]).collect(),
                vectors: vecs,
                iterations: it,
                next_above: es.values.iter().copied().find(|&v| v > cutoff),
            });
        }
    }
    Err(Error::NoConvergence(format!("subspace iteration did not converge in {max_iter} steps (block {p})")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_herm(n: usize, seed: u64) -> CMat {
        let mut rng = seeded_rng(seed);
        let g = CMat::from_fn(n, n, |_, _| C64::new(gauss(&mut rng), gauss(&mut rng)));
        (&g + g.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let h = random_herm(12, 3);
        let es = EigenSystem::new(&h);
        assert!(es.values.windows(2).all(|w| w[0] <= w[1]));
        let back = es.apply(|e| e);
        assert!(max_abs(&(back - &h)) < 1e-10);
    }

    #[test]
    fn svd_sorted_ascending() {
        let mut rng = seeded_rng(5);
        let a = CMat::from_fn(7, 5, |_, _| C64::new(gauss(&mut rng), gauss(&mut rng)));
        let s = Svd::new(&a);
        assert!(s.sigma.windows(2).all(|w| w[0] <= w[1]));
        let mut d = CMat::zeros(5, 5);
        for i in 0..5 {
            d[(i, i)] = C64::new(s.sigma[i], 0.0);
        }
        assert!(max_abs(&(&s.u * d * s.v.adjoint() - a)) < 1e-10);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = seeded_rng(1);
        let u = random_unitary(9, &mut rng);
        assert!(unitarity_defect(&u) < 1e-12);
    }

    #[test]
    fn csr_roundtrip_and_adjoint() {
        let h = random_herm(8, 9);
        let s = Csr::from_dense(&h, 0.0);
        assert_eq!(s.to_dense(), h);
        assert!(max_abs(&(s.adjoint().to_dense() - h.adjoint())) == 0.0);
    }

    #[test]
    fn band_cholesky_solves_path_laplacian() {
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, C64::new(2.5, 0.0)));
            let j = (i + 1) % n;
            t.push((i, j, C64::new(-1.0, 0.3)));
            t.push((j, i, C64::new(-1.0, -0.3)));
        }
        let a = Csr::from_triplets(n, n, t);
        let perm = reverse_cuthill_mckee(&a);
        assert!(bandwidth(&a, &perm) <= 2);
        let chol = BandCholesky::factor(&a, &perm, 0.0).unwrap();
        let b: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0)).collect();
        let mut x = vec![ZERO; n];
        for (k, &o) in perm.iter().enumerate() {
            x[k] = b[o];
        }
        chol.solve_block(&mut x, 1);
        let mut sol = vec![ZERO; n];
        for (k, &o) in perm.iter().enumerate() {
            sol[o] = x[k];
        }
        let mut ax = vec![ZERO; n];
        a.matvec(&sol, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn low_spectrum_matches_dense() {
        let n = 60;
        let mut t = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            t.push((i, i, C64::new(2.0, 0.0)));
            t.push((i, j, C64::new(-1.0, 0.0)));
            t.push((j, i, C64::new(-1.0, 0.0)));
        }
        let a = Csr::from_triplets(n, n, t);
        let dense = EigenSystem::new(&a.to_dense());
        let low = low_spectrum(&a, 0.1, 4, 1e-10, 7).unwrap();
        let expect: Vec<f64> = dense.values.iter().cloned().filter(|&v| v <= 0.1).collect();
        assert_eq!(low.values.len(), expect.len());
        for (x, y) in low.values.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

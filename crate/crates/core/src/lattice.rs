//! Tight-binding models on Z^d and their finite matrix realizations.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{cis, CMat, Csr, C64, ONE, ZERO};

pub type Disp = Vec<i64>;

/// Random law added to every realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisorderLaw {
    /// Independent uniform on-site energies in [-W/2, W/2] on every orbital.
    Onsite,
    /// Uniform [-W/2, W/2] shift of the intra-cell chiral coupling `offdiag(1_{N/2})`.
    ChiralBond,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disorder {
    pub law: DisorderLaw,
    pub strength: f64,
}

/// Translation-invariant hopping law plus magnetic field, disorder and chiral grading.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub d: usize,
    pub n: usize,
    hoppings: BTreeMap<Disp, CMat>,
    pub field: Vec<Vec<f64>>,
    pub disorder: Option<Disorder>,
    pub chiral: bool,
}

fn hermiticity_tol(a: &CMat) -> f64 {
    1e-12 * (1.0 + crate::linalg::max_abs(a))
}

impl ModelSpec {
    /// Validates the hopping law; missing partners `t_{-x}` are filled with `t_x^*`.
    pub fn new(
        d: usize,
        n: usize,
        hoppings: Vec<(Disp, CMat)>,
        field: Option<Vec<Vec<f64>>>,
        disorder: Option<Disorder>,
        chiral: bool,
    ) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::Validation { invariant: "dimension", detail: "d and N must be positive".into() });
        }
        let mut map: BTreeMap<Disp, CMat> = BTreeMap::new();
        for (x, t) in hoppings {
            if x.len() != d {
                return Err(Error::Validation {
                    invariant: "dimension",
                    detail: format!("displacement {x:?} does not have {d} components"),
                });
            }
            if t.shape() != (n, n) {
                return Err(Error::Validation {
                    invariant: "dimension",
                    detail: format!("hopping at {x:?} is not {n}x{n}"),
                });
            }
            if map.insert(x.clone(), t).is_some() {
                return Err(Error::Validation { invariant: "uniqueness", detail: format!("displacement {x:?} listed twice") });
            }
        }
        let keys: Vec<Disp> = map.keys().cloned().collect();
        for x in keys {
            let minus: Disp = x.iter().map(|v| -v).collect();
            let tx = map[&x].clone();
            match map.get(&minus) {
                Some(tm) => {
                    let defect = crate::linalg::max_abs(&(tm - tx.adjoint()));
                    if defect > hermiticity_tol(&tx) {
                        return Err(Error::Validation {
                            invariant: "hermiticity",
                            detail: format!("t at {minus:?} differs from adjoint of t at {x:?} by {defect:e}"),
                        });
                    }
                }
                None => {
                    map.insert(minus, tx.adjoint());
                }
            }
        }
        map.retain(|_, t| t.iter().any(|z| *z != ZERO));
        let field = field.unwrap_or_else(|| vec![vec![0.0; d]; d]);
        if field.len() != d || field.iter().any(|r| r.len() != d) {
            return Err(Error::Validation { invariant: "dimension", detail: "field must be d x d".into() });
        }
        for i in 0..d {
            for j in 0..d {
                if field[i][j] != -field[j][i] {
                    return Err(Error::Validation {
                        invariant: "antisymmetry",
                        detail: format!("B[{i}][{j}] = {} but B[{j}][{i}] = {}", field[i][j], field[j][i]),
                    });
                }
            }
        }
        if let Some(dis) = &disorder {
            if !(dis.strength >= 0.0) || !dis.strength.is_finite() {
                return Err(Error::Validation { invariant: "disorder", detail: "strength must be finite and >= 0".into() });
            }
            if dis.law == DisorderLaw::ChiralBond && n % 2 != 0 {
                return Err(Error::Validation { invariant: "chirality", detail: "chiral bond disorder needs even N".into() });
            }
            if chiral && dis.law == DisorderLaw::Onsite && dis.strength > 0.0 {
                return Err(Error::Validation { invariant: "chirality", detail: "on-site disorder breaks chiral symmetry".into() });
            }
        }
        let spec = ModelSpec { d, n, hoppings: map, field, disorder, chiral };
        if chiral {
            spec.check_chiral()?;
        }
        Ok(spec)
    }

    /// Hopping law without validation, used to materialize operator profiles.
    pub(crate) fn new_unchecked(d: usize, n: usize, hops: Vec<(Disp, CMat)>, field: Vec<Vec<f64>>) -> ModelSpec {
        ModelSpec { d, n, hoppings: hops.into_iter().collect(), field, disorder: None, chiral: false }
    }

    fn check_chiral(&self) -> Result<()> {
        if self.n % 2 != 0 {
            return Err(Error::Validation { invariant: "chirality", detail: "N must be even".into() });
        }
        let h = self.n / 2;
        for (x, t) in &self.hoppings {
            for i in 0..self.n {
                for j in 0..self.n {
                    if (i < h) == (j < h) && t[(i, j)].norm() > 0.0 {
                        return Err(Error::Validation {
                            invariant: "chirality",
                            detail: format!("J t J != -t at displacement {x:?}"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn hoppings(&self) -> &BTreeMap<Disp, CMat> {
        &self.hoppings
    }

    pub fn hopping(&self, x: &[i64]) -> Option<&CMat> {
        self.hoppings.get(x)
    }

    /// `max ||x||_inf` over stored displacements.
    pub fn range(&self) -> usize {
        self.hoppings.keys().map(|x| x.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0)).max().unwrap_or(0)
    }

    pub fn has_field(&self) -> bool {
        self.field.iter().flatten().any(|&b| b != 0.0)
    }

    pub fn has_disorder(&self) -> bool {
        self.disorder.map(|d| d.strength > 0.0).unwrap_or(false)
    }

    pub fn is_translation_invariant(&self) -> bool {
        !self.has_field() && !self.has_disorder()
    }

    pub fn grading(&self) -> Result<ChiralGrading> {
        if !self.chiral {
            return Err(Error::NotChiral("model carries no chiral grading".into()));
        }
        Ok(ChiralGrading::new(self.n))
    }

    pub fn with_disorder(&self, disorder: Option<Disorder>) -> Result<Self> {
        let hops = self.hoppings.iter().map(|(x, t)| (x.clone(), t.clone())).collect();
        ModelSpec::new(self.d, self.n, hops, Some(self.field.clone()), disorder, self.chiral)
    }

    /// Magnetic phase for the hop `y -> y + x`.
    pub fn hop_phase(&self, x: &[i64], y: &[i64]) -> C64 {
        if !self.has_field() {
            return ONE;
        }
        let mut theta = 0.0;
        for i in 0..self.d {
            for j in 0..i {
                let b = self.field[i][j];
                theta += x[i] as f64 * b * (y[j] as f64 + 0.5 * x[j] as f64);
            }
        }
        cis(theta)
    }

    /// `h(k) = sum_x t_x e^{2 pi i k.x}`.
    pub fn bloch_hamiltonian(&self, k: &[f64]) -> Result<CMat> {
        if !self.is_translation_invariant() {
            return Err(Error::NotTranslationInvariant);
        }
        Ok(self.bloch_unchecked(k))
    }

    pub(crate) fn bloch_unchecked(&self, k: &[f64]) -> CMat {
        let mut h = CMat::zeros(self.n, self.n);
        for (x, t) in &self.hoppings {
            let ph: f64 = x.iter().zip(k).map(|(&xi, &ki)| xi as f64 * ki).sum();
            h += t * cis(2.0 * PI * ph);
        }
        h
    }

    /// Upper-right `J+ x J-` block of `h(k)` for chiral models.
    pub fn offdiag_block(&self, k: &[f64]) -> Result<CMat> {
        let g = self.grading()?;
        let h = self.bloch_hamiltonian(k)?;
        let m = g.half();
        Ok(h.view((0, m), (m, m)).into_owned())
    }

    /// Equivalent translation-invariant model on the supercell `q`; the magnetic
    /// phases must be periodic with that supercell.
    pub fn magnetic_supercell(&self, q: &[usize]) -> Result<ModelSpec> {
        if q.len() != self.d || q.iter().any(|&v| v == 0) {
            return Err(Error::InvalidArgument("supercell must have d positive entries".into()));
        }
        if self.has_disorder() {
            return Err(Error::NotTranslationInvariant);
        }
        for i in 0..self.d {
            for j in 0..i {
                check_quantized(self.field[i][j] * q[j] as f64, "supercell")?;
            }
        }
        let cells: Vec<Disp> = box_points(&vec![0; self.d], q);
        let nc = cells.len();
        let nn = self.n * nc;
        let mut index = HashMap::new();
        for (c, y) in cells.iter().enumerate() {
            index.insert(y.clone(), c);
        }
        let mut blocks: BTreeMap<Disp, CMat> = BTreeMap::new();
        for (c, y) in cells.iter().enumerate() {
            for (x, t) in &self.hoppings {
                let target: Vec<i64> = y.iter().zip(x).map(|(a, b)| a + b).collect();
                let cell: Disp = target.iter().zip(q).map(|(&v, &l)| v.div_euclid(l as i64)).collect();
                let local: Disp = target.iter().zip(q).map(|(&v, &l)| v.rem_euclid(l as i64)).collect();
                let c2 = index[&local];
                let ph = self.hop_phase(x, y);
                let blk = blocks.entry(cell).or_insert_with(|| CMat::zeros(nn, nn));
                for a in 0..self.n {
                    for b in 0..self.n {
                        blk[(c2 * self.n + a, c * self.n + b)] += t[(a, b)] * ph;
                    }
                }
            }
        }
        let chiral = self.chiral && nc == 1;
        ModelSpec::new(self.d, nn, blocks.into_iter().collect(), None, None, chiral)
    }
}

fn check_quantized(theta: f64, what: &str) -> Result<()> {
    let r = theta / (2.0 * PI);
    if (r - r.round()).abs() > 1e-9 {
        return Err(Error::IncommensurateFlux(format!("{what}: phase {theta} is not a multiple of 2pi")));
    }
    Ok(())
}

/// `J = diag(1_{N/2}, -1_{N/2})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChiralGrading {
    n: usize,
}

impl ChiralGrading {
    pub fn new(n: usize) -> Self {
        assert!(n % 2 == 0 && n > 0, "chiral grading needs even N");
        ChiralGrading { n }
    }

    pub fn half(&self) -> usize {
        self.n / 2
    }

    pub fn sign(&self, orbital: usize) -> f64 {
        if orbital < self.n / 2 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn matrix(&self) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| if i == j { C64::new(self.sign(i), 0.0) } else { ZERO })
    }
}

pub mod presets {
    //! Named models.
    use super::*;

    fn m2(a: [[f64; 2]; 2]) -> CMat {
        CMat::from_fn(2, 2, |i, j| C64::new(a[i][j], 0.0))
    }

    fn raise() -> CMat {
        m2([[0.0, 1.0], [0.0, 0.0]])
    }

    pub const NAMES: [&str; 6] =
        ["graphene", "honeycomb-lambda", "ssh", "harper", "chern-two-band", "stacked-ssh-3d"];

    /// Nearest-neighbour honeycomb lattice, `a(k) = 1 + e^{2 pi i k1} + e^{2 pi i k2}`.
    pub fn graphene() -> ModelSpec {
        honeycomb_lambda(1.0)
    }

    /// `a(k) = lambda + e^{2 pi i k1} + e^{2 pi i k2}`.
    pub fn honeycomb_lambda(lambda: f64) -> ModelSpec {
        let hops = vec![
            (vec![0, 0], m2([[0.0, lambda], [lambda, 0.0]])),
            (vec![1, 0], raise()),
            (vec![0, 1], raise()),
        ];
        ModelSpec::new(2, 2, hops, None, None, true).unwrap()
    }

    /// Chain with `a(k) = lambda + e^{2 pi i k}`.
    pub fn ssh(lambda: f64) -> ModelSpec {
        let hops = vec![(vec![0], m2([[0.0, lambda], [lambda, 0.0]])), (vec![1], raise())];
        ModelSpec::new(1, 2, hops, None, None, true).unwrap()
    }

    /// Square lattice with flux `2 pi p / q` per plaquette.
    pub fn harper(p: i64, q: i64) -> ModelSpec {
        let one = CMat::from_element(1, 1, ONE);
        let b = 2.0 * PI * p as f64 / q as f64;
        let hops = vec![(vec![1, 0], one.clone()), (vec![0, 1], one)];
        ModelSpec::new(2, 1, hops, Some(vec![vec![0.0, b], vec![-b, 0.0]]), None, false).unwrap()
    }

    /// Two-band Chern insulator `sin k1 sx + sin k2 sy + (m + cos k1 + cos k2) sz`.
    pub fn chern_two_band(m: f64) -> ModelSpec {
        let c = |re: f64, im: f64| C64::new(re, im);
        let t0 = CMat::from_row_slice(2, 2, &[c(m, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-m, 0.0)]);
        // sx/(2i) + sz/2 and sy/(2i) + sz/2
        let t1 = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, -0.5), c(0.0, -0.5), c(-0.5, 0.0)]);
        let t2 = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0), c(-0.5, 0.0)]);
        let hops = vec![(vec![0, 0], t0), (vec![1, 0], t1), (vec![0, 1], t2)];
        ModelSpec::new(2, 2, hops, None, None, false).unwrap()
    }

    /// Decoupled SSH chains along `e1` stacked in `e2` and `e3`.
    pub fn stacked_ssh_3d(lambda: f64) -> ModelSpec {
        let hops = vec![(vec![0, 0, 0], m2([[0.0, lambda], [lambda, 0.0]])), (vec![1, 0, 0], raise())];
        ModelSpec::new(3, 2, hops, None, None, true).unwrap()
    }

    /// Looks up a preset by name with its single scalar parameter.
    pub fn by_name(name: &str, param: Option<f64>) -> Result<ModelSpec> {
        Ok(match name {
            "graphene" => graphene(),
            "honeycomb-lambda" => honeycomb_lambda(param.unwrap_or(1.0)),
            "ssh" => ssh(param.unwrap_or(0.5)),
            "harper" => {
                let q = param.unwrap_or(3.0);
                if q < 1.0 || q.fract() != 0.0 {
                    return Err(Error::InvalidArgument("harper parameter is the integer denominator q".into()));
                }
                harper(1, q as i64)
            }
            "chern-two-band" => chern_two_band(param.unwrap_or(1.0)),
            "stacked-ssh-3d" => stacked_ssh_3d(param.unwrap_or(0.5)),
            other => return Err(Error::InvalidArgument(format!("unknown preset '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Open,
}

/// Axis-aligned box `origin + [0, L_1) x ... x [0, L_d)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxSpec {
    pub origin: Vec<i64>,
    pub lengths: Vec<usize>,
    pub bc: Vec<Boundary>,
}

impl BoxSpec {
    pub fn new(lengths: &[usize], bc: Boundary) -> Self {
        BoxSpec { origin: vec![0; lengths.len()], lengths: lengths.to_vec(), bc: vec![bc; lengths.len()] }
    }

    pub fn shifted(mut self, origin: &[i64]) -> Self {
        self.origin = origin.to_vec();
        self
    }

    pub fn sites(&self) -> Vec<Disp> {
        box_points(&self.origin, &self.lengths)
    }
}

pub(crate) fn box_points(origin: &[i64], lengths: &[usize]) -> Vec<Disp> {
    let total: usize = lengths.iter().product();
    let d = lengths.len();
    let mut out = Vec::with_capacity(total);
    for mut k in 0..total {
        let mut p = vec![0i64; d];
        for j in (0..d).rev() {
            p[j] = origin[j] + (k % lengths[j]) as i64;
            k /= lengths[j];
        }
        out.push(p);
    }
    out
}

/// Mixes a seed and integer coordinates into a 64-bit key.
pub(crate) fn site_key(seed: u64, tag: u64, x: &[i64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let mut h = mix(seed ^ mix(tag));
    for &v in x {
        h = mix(h ^ v as u64);
    }
    h
}

/// Uniform samples in [-1/2, 1/2) attached to a site; a pure function of its arguments.
pub(crate) fn site_uniforms(seed: u64, tag: u64, x: &[i64], count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(site_key(seed, tag, x));
    (0..count).map(|_| rng.random::<f64>() - 0.5).collect()
}

/// Site set with periodic identifications used to materialize covariant operators.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub d: usize,
    pub sites: Vec<Disp>,
    index: HashMap<Disp, usize>,
    /// Reduces an arbitrary point to a stored site, returning the site and the
    /// wrap vector `point - site`.
    wrap: Wrap,
}

#[derive(Debug, Clone)]
enum Wrap {
    None,
    /// Axis-aligned box with periodic directions.
    Box { origin: Vec<i64>, lengths: Vec<usize>, periodic: Vec<bool> },
    /// Single period vector `p` with an integer coordinate `c.x` that is reduced mod `len`.
    Strip { period: Vec<i64>, coord: Vec<i64>, len: i64 },
}

impl Geometry {
    pub fn open(d: usize, sites: Vec<Disp>) -> Self {
        Self::with_wrap(d, sites, Wrap::None)
    }

    pub fn boxed(spec: &BoxSpec) -> Self {
        let periodic = spec.bc.iter().map(|b| *b == Boundary::Periodic).collect();
        let wrap = Wrap::Box { origin: spec.origin.clone(), lengths: spec.lengths.clone(), periodic };
        Self::with_wrap(spec.lengths.len(), spec.sites(), wrap)
    }

    /// Sites periodic under `x -> x + period`, where `coord . period = len` and the
    /// stored sites have `coord . x` in a window of length `len`.
    pub fn strip(d: usize, sites: Vec<Disp>, period: Vec<i64>, coord: Vec<i64>) -> Self {
        let len: i64 = period.iter().zip(&coord).map(|(a, b)| a * b).sum();
        assert!(len > 0, "strip period must have positive coordinate");
        Self::with_wrap(d, sites, Wrap::Strip { period, coord, len })
    }

    fn with_wrap(d: usize, sites: Vec<Disp>, wrap: Wrap) -> Self {
        let index = sites.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Geometry { d, sites, index, wrap }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        self.index.get(x).copied()
    }

    /// Stored site equivalent to `p`, with wrap vector `p - site`.
    pub fn locate(&self, p: &[i64]) -> Option<(usize, Disp)> {
        match &self.wrap {
            Wrap::None => self.index_of(p).map(|i| (i, vec![0; self.d])),
            Wrap::Box { origin, lengths, periodic } => {
                let mut q = p.to_vec();
                for j in 0..self.d {
                    if periodic[j] {
                        let l = lengths[j] as i64;
                        q[j] = origin[j] + (p[j] - origin[j]).rem_euclid(l);
                    }
                }
                let w: Disp = p.iter().zip(&q).map(|(a, b)| a - b).collect();
                self.index_of(&q).map(|i| (i, w))
            }
            Wrap::Strip { period, coord, len } => {
                let c: i64 = p.iter().zip(coord).map(|(a, b)| a * b).sum();
                let base: i64 = self.sites.first().map(|s| s.iter().zip(coord).map(|(a, b)| a * b).sum()).unwrap_or(0);
                let shift = (c - base).div_euclid(*len);
                let q: Disp = p.iter().zip(period).map(|(a, b)| a - shift * b).collect();
                if let Some(i) = self.index_of(&q) {
                    return Some((i, period.iter().map(|b| shift * b).collect()));
                }
                let q2: Disp = q.iter().zip(period).map(|(a, b)| a + b).collect();
                self.index_of(&q2).map(|i| (i, period.iter().map(|b| (shift - 1) * b).collect()))
            }
        }
    }

    /// Period vectors of the identification lattice.
    pub fn periods(&self) -> Vec<Disp> {
        match &self.wrap {
            Wrap::None => vec![],
            Wrap::Box { lengths, periodic, .. } => (0..self.d)
                .filter(|&j| periodic[j])
                .map(|j| {
                    let mut v = vec![0; self.d];
                    v[j] = lengths[j] as i64;
                    v
                })
                .collect(),
            Wrap::Strip { period, .. } => vec![period.clone()],
        }
    }

    /// Displacement `x - y` with the minimal-image convention in periodic directions.
    pub fn displacement(&self, x: usize, y: usize) -> Disp {
        let mut v: Disp = self.sites[x].iter().zip(&self.sites[y]).map(|(a, b)| a - b).collect();
        match &self.wrap {
            Wrap::None => {}
            Wrap::Box { lengths, periodic, .. } => {
                for j in 0..self.d {
                    if periodic[j] {
                        let l = lengths[j] as i64;
                        v[j] = (v[j] + l / 2).rem_euclid(l) - l / 2;
                        if 2 * v[j] == l {
                            v[j] = -l / 2;
                        }
                    }
                }
            }
            Wrap::Strip { period, coord, len } => {
                let c: i64 = v.iter().zip(coord).map(|(a, b)| a * b).sum();
                let m = (c + len / 2).div_euclid(*len);
                for j in 0..self.d {
                    v[j] -= m * period[j];
                }
            }
        }
        v
    }
}

/// One concrete Hermitian matrix on a finite site set, site-major with orbitals inner.
#[derive(Debug, Clone)]
pub struct FiniteRealization {
    pub geometry: Geometry,
    pub orbitals: usize,
    pub matrix: Csr,
    pub margin: usize,
    pub seed: u64,
    pub box_spec: Option<BoxSpec>,
    pub field: Vec<Vec<f64>>,
}

impl FiniteRealization {
    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    pub fn dense(&self) -> CMat {
        self.matrix.to_dense()
    }

    pub fn sites(&self) -> &[Disp] {
        &self.geometry.sites
    }

    /// Sites at distance at least `margin` from every open face of the box.
    pub fn interior(&self, margin: usize) -> Vec<usize> {
        let Some(b) = &self.box_spec else {
            return (0..self.geometry.len()).collect();
        };
        let m = margin as i64;
        (0..self.geometry.len())
            .filter(|&i| {
                let s = &self.geometry.sites[i];
                (0..b.lengths.len()).all(|j| {
                    b.bc[j] == Boundary::Periodic || {
                        let off = s[j] - b.origin[j];
                        off >= m && off < b.lengths[j] as i64 - m
                    }
                })
            })
            .collect()
    }

    /// Position operator `X_j` restricted to orbital-expanded indices.
    pub fn positions(&self, j: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for s in &self.geometry.sites {
            for _ in 0..self.orbitals {
                out.push(s[j] as f64);
            }
        }
        out
    }
}

/// Assembles `h` on an arbitrary geometry.
pub(crate) fn assemble(model: &ModelSpec, geom: &Geometry, seed: u64) -> Result<Csr> {
    let n = model.n;
    for w in geom.periods() {
        for i in 0..model.d {
            for j in 0..i {
                check_quantized(model.field[i][j] * w[j] as f64, "periodic box")?;
            }
        }
    }
    let mut trip = Vec::new();
    for (ys, y) in geom.sites.iter().enumerate() {
        for (x, t) in model.hoppings() {
            let target: Disp = y.iter().zip(x).map(|(a, b)| a + b).collect();
            let Some((xs, _)) = geom.locate(&target) else { continue };
            let ph = model.hop_phase(x, y);
            for a in 0..n {
                for b in 0..n {
                    let v = t[(a, b)];
                    if v != ZERO {
                        trip.push((xs * n + a, ys * n + b, v * ph));
                    }
                }
            }
        }
        if let Some(dis) = model.disorder {
            if dis.strength > 0.0 {
                match dis.law {
                    DisorderLaw::Onsite => {
                        let u = site_uniforms(seed, 1, y, n);
                        for a in 0..n {
                            trip.push((ys * n + a, ys * n + a, C64::new(dis.strength * u[a], 0.0)));
                        }
                    }
                    DisorderLaw::ChiralBond => {
                        let h = n / 2;
                        let u = site_uniforms(seed, 2, y, h);
                        for a in 0..h {
                            let v = C64::new(dis.strength * u[a], 0.0);
                            trip.push((ys * n + a, ys * n + h + a, v));
                            trip.push((ys * n + h + a, ys * n + a, v));
                        }
                    }
                }
            }
        }
    }
    Ok(Csr::from_triplets(geom.len() * n, geom.len() * n, trip))
}

/// Materializes the model on a box.
pub fn build_bulk(model: &ModelSpec, boxs: &BoxSpec, seed: u64) -> Result<FiniteRealization> {
    if boxs.lengths.len() != model.d {
        return Err(Error::DimensionMismatch(format!("box has {} edges, model d = {}", boxs.lengths.len(), model.d)));
    }
    let range = model.range();
    for &l in &boxs.lengths {
        if l <= 2 * range {
            return Err(Error::RangeTooLarge { edge: l, range });
        }
    }
    let geom = Geometry::boxed(boxs);
    let matrix = assemble(model, &geom, seed)?;
    Ok(FiniteRealization {
        geometry: geom,
        orbitals: model.n,
        matrix,
        margin: range,
        seed,
        box_spec: Some(boxs.clone()),
        field: model.field.clone(),
    })
}

/// Finite image of the magnetic translation `u^x` on the realization's sites.
pub fn magnetic_translation(real: &FiniteRealization, x: &[i64]) -> Result<CMat> {
    let geom = &real.geometry;
    if x.len() != geom.d {
        return Err(Error::DimensionMismatch("translation vector has wrong dimension".into()));
    }
    let n = real.orbitals;
    let probe = ModelSpec {
        d: geom.d,
        n: 1,
        hoppings: BTreeMap::new(),
        field: real.field.clone(),
        disorder: None,
        chiral: false,
    };
    let mut u = CMat::zeros(real.dim(), real.dim());
    let mut hits = 0;
    for (ys, y) in geom.sites.iter().enumerate() {
        let target: Disp = y.iter().zip(x).map(|(a, b)| a + b).collect();
        if let Some((xs, _)) = geom.locate(&target) {
            hits += 1;
            let ph = probe.hop_phase(x, y);
            for a in 0..n {
                u[(xs * n + a, ys * n + a)] = ph;
            }
        }
    }
    if hits == 0 {
        return Err(Error::EmptyInterior { margin: 0 });
    }
    Ok(u)
}

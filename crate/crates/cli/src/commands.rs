//! Subcommand implementations producing record tables.

use rayon::prelude::*;
use topoflat::error::Error;
use topoflat::halfspace::{
    bbc_check, default_offsets, make_cut, make_lattice_cut, restrict_halfspace, signed_surface_density, smooth_restrict,
    zero_modes, BoundaryTerm, CutPlane, EdgeAssignment, Normalization, SlabSpec,
};
use topoflat::harmonic::{
    besov_norm, besov_terms, finite_difference_norm, hankel_matrix, schatten_norm, DyadicWindows, NormEngine,
    OperatorProfile, TGrid,
};
use topoflat::index::{chain_index, disorder_averaged_index, fermi_unitary_profile, sobolev_index_check, toeplitz_index, IndexReport};
use topoflat::invariants::{
    even_chern, odd_chern, param_grid, weak_invariant_sweep, winding_number, winding_of_model, Direction, InvariantResult,
};
use topoflat::lattice::{build_bulk, presets, Boundary, BoxSpec, Disorder, ModelSpec};
use topoflat::linalg::{EigenSystem, Svd};
use topoflat::spectral::{dos_from_spectra, dos_kgrid, fermi_projection_field, fermi_unitary_field, pseudogap_exponent, DosHistogram};

use crate::args::*;
use crate::error::CliError;
use crate::manifest::{cache_dir, cache_get, cache_put};
use crate::model::{emit_model, load_model, model_hash, parse_law};
use crate::records::{Table, Value};

/// What a command produced, before framing.
pub enum Payload {
    Table(Table),
    Text(String),
}

pub struct Computed {
    pub payload: Payload,
    pub model: Option<ModelSpec>,
    pub seeds: Vec<u64>,
    pub provenance: Vec<String>,
    pub cache: Vec<(String, usize)>,
}

impl Computed {
    fn table(table: Table, model: Option<ModelSpec>) -> Self {
        Computed { payload: Payload::Table(table), model, seeds: vec![], provenance: vec![], cache: vec![] }
    }

    fn seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.provenance.push(s.into());
        self
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| usage(format!("--{what}: cannot parse '{t}' in '{s}'"))))
        .collect()
}

/// `a..b` (half open) or a comma list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| usage(format!("--seeds: bad start in '{s}'")))?;
        let b: u64 = b.trim().parse().map_err(|_| usage(format!("--seeds: bad end in '{s}'")))?;
        if b <= a {
            return Err(usage(format!("--seeds: empty range '{s}'")));
        }
        return Ok((a..b).collect());
    }
    parse_list(s, "seeds")
}

fn joined<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn meta(params: &[(String, f64)]) -> String {
    params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

fn bc(b: Bc) -> Boundary {
    match b {
        Bc::Periodic => Boundary::Periodic,
        Bc::Open => Boundary::Open,
    }
}

pub fn resolve_model(args: &ModelArgs, override_model: Option<&ModelSpec>) -> Result<ModelSpec, CliError> {
    let base = match (override_model, &args.preset, &args.model) {
        (Some(m), _, _) => return Ok(m.clone()),
        (None, Some(name), None) => presets::by_name(name, args.param).map_err(|e| usage(e.to_string()))?,
        (None, None, Some(path)) => load_model(path)?,
        _ => return Err(usage("exactly one of --preset NAME or --model FILE is required")),
    };
    match (&args.disorder, args.strength) {
        (Some(law), Some(w)) => {
            let law = parse_law(law).map_err(usage)?;
            Ok(base.with_disorder(Some(Disorder { law, strength: w }))?)
        }
        _ => Ok(base),
    }
}

fn direction(s: &str, what: &str) -> Result<Direction, CliError> {
    let v: Vec<f64> = parse_list(s, what)?;
    if v.iter().all(|x| x.fract() == 0.0) {
        let g: Vec<i64> = v.iter().map(|&x| x as i64).collect();
        return Ok(Direction::lattice(&g)?);
    }
    Ok(Direction::new(&v)?)
}

fn cut_plane(s: &str, r: f64) -> Result<CutPlane, CliError> {
    let v: Vec<f64> = parse_list(s, "cut")?;
    if v.iter().all(|x| x.fract() == 0.0) {
        let g: Vec<i64> = v.iter().map(|&x| x as i64).collect();
        return Ok(make_lattice_cut(&g, r)?);
    }
    Ok(make_cut(&v, r)?)
}

fn axis_name(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------- bulk

const INVARIANT_COLUMNS: [&str; 8] = ["op", "direction", "value", "error", "path", "grid", "fermi", "meta"];

fn invariant_row(op: &str, dir: String, r: &InvariantResult, grid: usize, fermi: f64) -> Vec<Value> {
    vec![op.into(), dir.into(), r.value.into(), r.error_estimate.into(), r.path.as_str().into(), grid.into(), fermi.into(), meta(&r.params).into()]
}

pub fn bulk(a: &BulkArgs, m: Option<&ModelSpec>) -> Result<Computed, CliError> {
    let model = resolve_model(&a.model, m)?;
    let d = model.d;
    let op = a.op.unwrap_or(if model.chiral { BulkOp::Winding } else { BulkOp::Chern });
    let mut t = Table::new(&INVARIANT_COLUMNS);
    match op {
        BulkOp::Winding => {
            let dirs = match &a.dir {
                Some(s) => vec![direction(s, "dir")?],
                None => (0..d).map(|j| Direction::axis(d, j)).collect(),
            };
            for dir in dirs {
                let r = winding_of_model(&model, &dir, a.grid)?;
                t.push(invariant_row("winding", axis_name(&dir.v), &r, a.grid, f64::NAN));
            }
        }
        BulkOp::Chern => {
            if d < 2 {
                return Err(Error::DimensionMismatch("Chern numbers need d >= 2".into()).into());
            }
            let (cell, q) = match &a.supercell {
                Some(s) => {
                    let q: Vec<usize> = parse_list(s, "supercell")?;
                    (model.magnetic_supercell(&q)?, Some(q))
                }
                None => (model.clone(), None),
            };
            let mut p = fermi_projection_field(&cell, &vec![a.grid; d], &vec![0.5; d], a.fermi)?;
            if let Some(q) = &q {
                p = p.on_supercell(q);
            }
            for i in 0..d {
                for j in i + 1..d {
                    let (ei, ej) = (Direction::axis(d, i).v, Direction::axis(d, j).v);
                    let r = even_chern(&p, &ei, &ej)?;
                    t.push(invariant_row("chern", format!("e{} e{}", i + 1, j + 1), &r, a.grid, a.fermi));
                }
            }
        }
        BulkOp::OddChern => {
            let u = fermi_unitary_field(&model, &vec![a.grid; d], &vec![0.5; d], None)?;
            let r = if d == 1 {
                winding_number(&u, &Direction::axis(1, 0))?
            } else {
                odd_chern(&u, &(0..d).map(|j| Direction::axis(d, j).v).collect::<Vec<_>>())?
            };
            t.push(invariant_row("odd-chern", "all axes".into(), &r, a.grid, f64::NAN));
        }
    }
    Ok(Computed::table(t, Some(model)))
}

// ---------------------------------------------------------------- dos

fn spectrum_key(hash: &str, boxs: &BoxSpec, seed: u64) -> String {
    format!("{hash}|{:?}|{:?}|{:?}|{seed}|{}", boxs.lengths, boxs.origin, boxs.bc, env!("CARGO_PKG_VERSION"))
}

fn histogram_table(h: &DosHistogram, source: &str) -> Table {
    let mut t = Table::new(&["lo", "hi", "mass", "count", "error", "source"]);
    for b in 0..h.mass.len() {
        let c = h.counts[b];
        let err = if c > 0 { h.mass[b] / (c as f64).sqrt() } else { 0.0 };
        t.push(vec![h.edges[b].into(), h.edges[b + 1].into(), h.mass[b].into(), c.into(), err.into(), source.into()]);
    }
    t
}

pub fn dos(a: &DosArgs, m: Option<&ModelSpec>) -> Result<Computed, CliError> {
    let model = resolve_model(&a.model, m)?;
    let mut seeds = vec![];
    let mut cache = vec![];
    let hist = match &a.boxs {
        Some(s) => {
            let lengths: Vec<usize> = parse_list(s, "box")?;
            let boxs = BoxSpec::new(&lengths, bc(a.bc));
            seeds = parse_seeds(&a.seeds)?;
            let hash = model_hash(&model);
            let dir = cache_dir();
            let spectra: Vec<Result<((Vec<f64>, usize), bool), CliError>> = seeds
                .par_iter()
                .map(|&seed| {
                    let key = spectrum_key(&hash, &boxs, seed);
                    if let Some(hit) = dir.as_deref().and_then(|d| cache_get(d, &key)) {
                        return Ok((hit, true));
                    }
                    let r = build_bulk(&model, &boxs, seed)?;
                    let vals = EigenSystem::new(&r.dense()).values;
                    let sites = r.geometry.len();
                    if let Some(d) = dir.as_deref() {
                        cache_put(d, &key, &vals, sites)?;
                    }
                    Ok(((vals, sites), false))
                })
                .collect();
            let spectra = spectra.into_iter().collect::<Result<Vec<_>, _>>()?;
            let hits = spectra.iter().filter(|(_, h)| *h).count();
            cache.push(("hits".to_string(), hits));
            cache.push(("misses".to_string(), spectra.len() - hits));
            let spectra: Vec<(Vec<f64>, usize)> = spectra.into_iter().map(|(s, _)| s).collect();
            dos_from_spectra(&spectra, a.bins, a.range, format!("box {} x {} seeds", joined(&lengths), seeds.len()))?
        }
        None => dos_kgrid(&model, a.grid, a.bins, a.range)?,
    };
    let source = hist.provenance.clone();
    let table = match a.fit {
        Some(e0) => {
            let window = match &a.window {
                Some(w) => {
                    let v: Vec<f64> = parse_list(w, "window")?;
                    if v.len() != 2 {
                        return Err(usage("--window takes lo,hi"));
                    }
                    Some((v[0], v[1]))
                }
                None => None,
            };
            let fit = pseudogap_exponent(&hist, e0, window)?;
            let mut t = Table::new(&["e0", "gamma", "error", "window_lo", "window_hi", "points", "bins", "source"]);
            t.push(vec![e0.into(), fit.gamma.into(), fit.stderr.into(), fit.window.0.into(), fit.window.1.into(), fit.points.into(), a.bins.into(), source.as_str().into()]);
            t
        }
        None => histogram_table(&hist, &source),
    };
    let mut c = Computed::table(table, Some(model)).seeds(seeds).note(source);
    c.cache = cache;
    Ok(c)
}

// ---------------------------------------------------------------- slabs

fn boundary_term(s: &SlabArgs) -> BoundaryTerm {
    match s.boundary_disorder {
        Some(norm) => BoundaryTerm::RandomChiral { norm, seed: s.seed },
        None => BoundaryTerm::None,
    }
}

fn slab_spec(s: &SlabArgs) -> SlabSpec {
    SlabSpec::new(s.width, s.length, bc(s.parallel))
}

const EDGE_COLUMNS: [&str; 13] =
    ["kind", "v", "r", "W", "L", "n_plus", "n_minus", "density", "error", "path", "eps_zero", "gap", "sites"];

pub fn edge_density(a: &EdgeArgs, m: Option<&ModelSpec>) -> Result<Computed, CliError> {
    let model = resolve_model(&a.model, m)?;
    let cut = cut_plane(&a.slab.cut, a.offset)?;
    let spec = slab_spec(&a.slab);
    let boundary = boundary_term(&a.slab);
    let rs: Vec<f64> = if a.offsets <= 1 {
        vec![a.offset]
    } else {
        default_offsets(&cut, a.offsets).into_iter().map(|r| r + a.offset).collect()
    };
    let norm = if cut.lambda().is_some() && (spec.parallel == Boundary::Periodic || cut.d() == 1) {
        Normalization::Strip
    } else {
        Normalization::Columns
    };
    let per: Vec<_> = rs
        .par_iter()
        .map(|&r| {
            let c = cut.with_offset(r);
            let slab = match a.eps {
                Some(eps) => smooth_restrict(&model, &c, &spec, &boundary, eps, a.slab.seed)?,
                None => restrict_halfspace(&model, &c, &spec, &boundary, a.slab.seed)?,
            };
            let rep = zero_modes(&slab, a.eps_zero, EdgeAssignment::Soft)?;
            let dens = signed_surface_density(&slab, &rep, norm)?;
            Ok((r, slab.sites(), rep, dens))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let v = joined(&cut.v);
    let seeds = if a.slab.boundary_disorder.is_some() || model.has_disorder() { vec![a.slab.seed] } else { vec![] };
    if a.dump_modes {
        let mut t = Table::new(&["r", "mode", "energy", "chirality", "near_weight", "k", "eps_zero"]);
        for (r, _, rep, _) in &per {
            for (i, md) in rep.modes.iter().enumerate() {
                t.push(vec![(*r).into(), i.into(), md.energy.into(), md.chirality.into(), md.near_weight.into(), joined(&md.k).into(), rep.eps_zero.into()]);
            }
        }
        return Ok(Computed::table(t, Some(model)).seeds(seeds));
    }
    let mut t = Table::new(&EDGE_COLUMNS);
    for (r, sites, rep, dens) in &per {
        t.push(vec![
            "offset".into(),
            v.as_str().into(),
            (*r).into(),
            a.slab.width.into(),
            a.slab.length.into(),
            rep.n_plus.into(),
            rep.n_minus.into(),
            dens.value.into(),
            dens.error_estimate.into(),
            dens.path.as_str().into(),
            rep.eps_zero.into(),
            rep.gap.into(),
            (*sites).into(),
        ]);
    }
    if per.len() > 1 {
        let k = per.len() as f64;
        let mean = |f: &dyn Fn(&(f64, usize, topoflat::halfspace::ZeroModeReport, InvariantResult)) -> f64| per.iter().map(f).sum::<f64>() / k;
        let vals: Vec<f64> = per.iter().map(|p| p.3.value).collect();
        let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let err = mean(&|p| p.3.error_estimate).max(spread);
        t.push(vec![
            "mean".into(),
            v.as_str().into(),
            f64::NAN.into(),
            a.slab.width.into(),
            a.slab.length.into(),
            mean(&|p| p.2.n_plus).into(),
            mean(&|p| p.2.n_minus).into(),
            mean(&|p| p.3.value).into(),
            err.into(),
            per[0].3.path.as_str().into(),
            per[0].2.eps_zero.into(),
            per.iter().filter_map(|p| p.2.gap).fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |a| a.min(g)))).into(),
            per[0].1.into(),
        ]);
    }
    Ok(Computed::table(t, Some(model)).seeds(seeds))
}

pub fn bbc(a: &BbcArgs, m: Option<&ModelSpec>) -> Result<Computed, CliError> {
    let model = resolve_model(&a.model, m)?;
    let cut = cut_plane(&a.slab.cut, 0.0)?;
    let rec = bbc_check(&model, &cut, &slab_spec(&a.slab), &boundary_term(&a.slab), a.bulk_grid, a.offsets)?;
    let mut t = Table::new(&[
        "v", "W", "L", "offsets", "bulk_grid", "bulk", "bulk_error", "edge", "edge_error", "gap", "min_singular", "spectral_gap",
        "pseudogap_exponent",
    ]);
    t.push(vec![
        joined(&cut.v).into(),
        a.slab.width.into(),
        a.slab.length.into(),
        a.offsets.into(),
        a.bulk_grid.into(),
        rec.bulk.value.into(),
        rec.bulk.error_estimate.into(),
        rec.edge.value.into(),
        rec.edge.error_estimate.into(),
        rec.gap.into(),
        rec.conditions.min_singular.into(),
        rec.conditions.spectral_gap.into(),
        rec.conditions.pseudogap_exponent.into(),
    ]);
    let seeds = if a.slab.boundary_disorder.is_some() { vec![a.slab.seed] } else { vec![] };
    Ok(Computed::table(t, Some(model)).seeds(seeds))
}

// ---------------------------------------------------------------- harmonic

fn profile(model: &ModelSpec, p: &ProfileArgs) -> Result<OperatorProfile, CliError> {
    Ok(match p.operator {
        Operator::Hamiltonian => OperatorProfile::from_model(model),
        Operator::FermiUnitary => fermi_unitary_profile(model, p.grid, p.radius)?,
    })
}

pub fn besov(a: &BesovArgs, m: Option<&ModelSpec>) -> Result<Computed, CliError> {
    let model = resolve_model(&a.model, m)?;
    let prof = profile(&model, &a.profile)?;
    let (engine, engine_name) = match a.boxs {
        Some(l) => (NormEngine::Periodic { lengths: vec![l; prof.d] }, format!("periodic {l}")),
        None => (NormEngine::Bloch { n: a.profile.grid }, format!("bloch {}", a.profile.grid)),
    };
    let mut t = Table::new(&["kind", "s", "p", "q", "value", "error", "resolution", "engine"]);
    match a.order {
        None => {
            let windows = DyadicWindows::new(a.jmax)?;
            let value = besov_norm(&prof, a.s, a.p, a.q, &windows, &engine)?;
            let terms = besov_terms(&prof, a.p, &windows, &engine)?;
            let tail = 2f64.powf(a.s * a.jmax as f64) * terms.last().copied().unwrap_or(0.0);
            t.push(vec!["besov".into(), a.s.into(), a.p.into(), a.q.into(), value.into(), tail.into(), format!("jmax={}", a.jmax).into(), engine_name.into()]);
        }
        Some(order) => {
            let grid = TGrid::dyadic(a.octaves);
            let value = finite_difference_norm(&prof, a.s, a.p, a.q, order, &grid, &engine)?;
            let fine = finite_difference_norm(&prof, a.s, a.p, a.q, order, &grid.doubled(), &engine)?;
            t.push(vec![
                "finite-difference".into(),
                a.s.into(),
                a.p.into(),
                a.q.into(),
                value.into(),
                (fine - value).abs().into(),
                format!("order={order};octaves={}", a.octaves).into(),
                engine_name.into(),
            ]);
        }
    }
    Ok(Computed::table(t, Some(model)))
}

pub fn hankel(a: &HankelArgs, m: Option<&ModelSpec>) -> Result<Computed, CliError> {
    let model = resolve_model(&a.model, m)?;
    let prof = profile(&model, &a.profile)?;
    let h = hankel_matrix(&prof, a.length)?;
    let mut sigma = Svd::new(&h).sigma;
    sigma.sort_by(|a, b| b.total_cmp(a));
    if a.dump_singular {
        let mut t = Table::new(&["L", "index", "sigma"]);
        for (i, s) in sigma.iter().enumerate() {
            t.push(vec![a.length.into(), i.into(), (*s).into()]);
        }
        return Ok(Computed::table(t, Some(model)));
    }
    let value = schatten_norm(&h, a.p);
    let half = schatten_norm(&hankel_matrix(&prof, (a.length / 2).max(1))?, a.p);
    let top = sigma.first().copied().unwrap_or(0.0);
    let rank = sigma.iter().filter(|&&s| s > a.rank_tol * top).count();
    let mut t = Table::new(&["L", "p", "schatten", "error", "rank", "rank_tol", "sigma_max", "operator"]);
    let op = match a.profile.operator {
        Operator::Hamiltonian => "hamiltonian".to_string(),
        Operator::FermiUnitary => format!("fermi-unitary radius={} grid={}", a.profile.radius, a.profile.grid),
    };
    t.push(vec![a.length.into(), a.p.into(), value.into(), (value - half).abs().into(), rank.into(), a.rank_tol.into(), top.into(), op.into()]);
    Ok(Computed::table(t, Some(model)))
}

// ---------------------------------------------------------------- index

const INDEX_COLUMNS: [&str; 9] = ["method", "L", "kernel", "cokernel", "value", "residual", "error", "grid", "meta"];

fn index_row(method: &str, l: usize, r: &IndexReport, residual: f64, grid: Value) -> Vec<Value> {
    vec![method.into(), l.into(), r.kernel.into(), r.cokernel.into(), r.value.into(), residual.into(), 0.0.into(), grid, meta(&r.truncation).into()]
}

pub fn index(a: &IndexArgs, m: Option<&ModelSpec>) -> Result<Computed, CliError> {
    let model = resolve_model(&a.model, m)?;
    let mut t = Table::new(&INDEX_COLUMNS);
    let mut seeds = vec![];
    match a.method {
        IndexKind::Toeplitz => {
            let symbol = fermi_unitary_profile(&model, a.grid, a.length.min(a.grid / 2 - 1))?;
            let r = toeplitz_index(&symbol, a.length)?;
            t.push(index_row("toeplitz", a.length, &r, (r.value - r.value.round()).abs(), a.grid.into()));
        }
        IndexKind::Chain => {
            let r = chain_index(&model, a.length, a.seed)?;
            seeds.push(a.seed);
            t.push(index_row("chain", a.length, &r, 0.0, Value::Num(f64::NAN)));
        }
        IndexKind::Sobolev => {
            let rec = sobolev_index_check(&model, a.grid, a.length)?;
            let mut row = index_row("sobolev", a.length, &rec.index, rec.residual, a.grid.into());
            row[6] = rec.winding.error_estimate.into();
            row[8] = format!("{};winding={}", meta(&rec.index.truncation), rec.winding.value).into();
            t.push(row);
        }
        IndexKind::Disorder => {
            seeds = parse_seeds(&a.seeds)?;
            let r = disorder_averaged_index(&model, a.length, &seeds)?;
            t.push(vec![
                "disorder".into(),
                a.length.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                r.mean.into(),
                (r.mean - r.mean.round()).abs().into(),
                r.stderr.into(),
                Value::Num(f64::NAN),
                format!("seeds={}", seeds.len()).into(),
            ]);
        }
    }
    Ok(Computed::table(t, Some(model)).seeds(seeds))
}

// ---------------------------------------------------------------- sweep

/// Name of the scalar parameter of each preset.
pub fn preset_param(name: &str) -> Option<(&'static str, f64)> {
    match name {
        "honeycomb-lambda" => Some(("lambda", 1.0)),
        "ssh" => Some(("lambda", 0.5)),
        "harper" => Some(("q", 3.0)),
        "chern-two-band" => Some(("m", 1.0)),
        "stacked-ssh-3d" => Some(("lambda", 0.5)),
        _ => None,
    }
}

pub fn sweep(a: &SweepArgs) -> Result<Computed, CliError> {
    let (name, range) = a.param.split_once('=').ok_or_else(|| usage("--param takes name=start:stop:step"))?;
    let (pname, _) = preset_param(&a.preset).ok_or_else(|| usage(format!("preset '{}' has no sweepable parameter", a.preset)))?;
    if name != pname {
        return Err(usage(format!("preset '{}' has parameter '{pname}', not '{name}'", a.preset)));
    }
    let parts: Vec<f64> = range.split(':').map(|s| s.parse().map_err(|_| usage(format!("--param: bad number '{s}'")))).collect::<Result<_, _>>()?;
    if parts.len() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0] {
        return Err(usage("--param range must be start:stop:step with step > 0 and stop >= start"));
    }
    let params = param_grid(parts[0], parts[1], parts[2]);
    let probe = presets::by_name(&a.preset, Some(parts[0])).map_err(|e| usage(e.to_string()))?;
    let d = probe.d;
    let dir = match &a.dir {
        Some(s) => Some(parse_list::<f64>(s, "dir")?),
        None => None,
    };
    let op = |x: f64| -> topoflat::error::Result<InvariantResult> {
        let model = presets::by_name(&a.preset, Some(x))?;
        match a.op {
            SweepOp::Winding => {
                let dir = match &dir {
                    Some(v) if v.iter().all(|t| t.fract() == 0.0) => Direction::lattice(&v.iter().map(|&t| t as i64).collect::<Vec<_>>())?,
                    Some(v) => Direction::new(v)?,
                    None => Direction::axis(d, 0),
                };
                winding_of_model(&model, &dir, a.grid)
            }
            SweepOp::Chern => {
                let p = fermi_projection_field(&model, &vec![a.grid; d], &vec![0.5; d], a.fermi)?;
                even_chern(&p, &Direction::axis(d, 0).v, &Direction::axis(d, 1).v)
            }
            SweepOp::Density => {
                let v = dir.clone().unwrap_or_else(|| Direction::axis(d, 0).v);
                let cut = if v.iter().all(|t| t.fract() == 0.0) {
                    make_lattice_cut(&v.iter().map(|&t| t as i64).collect::<Vec<_>>(), 0.0)?
                } else {
                    make_cut(&v, 0.0)?
                };
                topoflat::halfspace::edge_density(&model, &cut, &SlabSpec::new(a.width, a.length, Boundary::Periodic), &BoundaryTerm::None, 1, None)
            }
            SweepOp::Index => {
                let r = sobolev_index_check(&model, a.grid, a.length)?;
                Ok(InvariantResult::new(r.index.value, r.residual, topoflat::invariants::Path::RealSpace))
            }
        }
    };
    let rows = weak_invariant_sweep(&params, op);
    let op_name = match a.op {
        SweepOp::Winding => "winding",
        SweepOp::Chern => "chern",
        SweepOp::Density => "density",
        SweepOp::Index => "index",
    };
    let mut t = Table::new(&["parameter", "value", "op", "result", "error", "delta", "path", "grid", "status"]);
    for row in rows {
        let (res, err, path, status) = match &row.result {
            Ok(r) => (r.value, r.error_estimate, r.path.as_str(), "ok".to_string()),
            Err(e) => (f64::NAN, f64::NAN, "", e.to_string()),
        };
        t.push(vec![pname.into(), row.param.into(), op_name.into(), res.into(), err.into(), row.delta.into(), path.into(), a.grid.into(), status.into()]);
    }
    Ok(Computed::table(t, None).note(format!("preset {} swept over {}", a.preset, a.param)))
}

// ---------------------------------------------------------------- presets

pub fn presets_cmd(a: &PresetsArgs) -> Result<Computed, CliError> {
    if let Some(name) = &a.emit {
        let model = presets::by_name(name, a.param).map_err(|e| usage(e.to_string()))?;
        let text = emit_model(&model);
        return Ok(Computed { payload: Payload::Text(text), model: Some(model), seeds: vec![], provenance: vec![], cache: vec![] });
    }
    let mut t = Table::new(&["name", "parameter", "default", "d", "orbitals", "chiral", "field"]);
    for name in presets::NAMES {
        let m = presets::by_name(name, None).map_err(CliError::from)?;
        let (p, v) = match preset_param(name) {
            Some((p, v)) => (p, v),
            None => ("", f64::NAN),
        };
        t.push(vec![name.into(), p.into(), v.into(), m.d.into(), m.n.into(), m.chiral.into(), m.has_field().into()]);
    }
    Ok(Computed::table(t, None))
}

//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::records::Format;

#[derive(Debug, Parser)]
#[command(name = "topoflat", version, about = "Bulk invariants, half-space flat bands and harmonic-analysis numerics")]
pub struct Cli {
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Record framing.
    #[arg(long, value_enum, default_value = "csv", global = true)]
    pub format: Format,
    /// Write records here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Manifest path (default `<output>.manifest.json`, or `topoflat.manifest.json`).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Built-in model, see `presets`.
    #[arg(long, conflicts_with = "model")]
    pub preset: Option<String>,
    /// Scalar parameter of the preset.
    #[arg(long, requires = "preset", allow_hyphen_values = true)]
    pub param: Option<f64>,
    /// TOML model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Replace the model's disorder law (onsite, chiral-bond).
    #[arg(long, requires = "strength")]
    pub disorder: Option<String>,
    /// Disorder strength W.
    #[arg(long, requires = "disorder")]
    pub strength: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BulkOp {
    Winding,
    Chern,
    OddChern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bc {
    Periodic,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    /// The hopping law itself.
    Hamiltonian,
    /// Fourier profile of the Fermi unitary (clean chiral chains).
    FermiUnitary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexKind {
    Toeplitz,
    Chain,
    Sobolev,
    Disorder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepOp {
    Winding,
    Chern,
    Density,
    Index,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Winding and Chern numbers on a k-grid.
    BulkInvariants(BulkArgs),
    /// Density-of-states histogram, clean or disorder averaged.
    Dos(DosArgs),
    /// Signed density of near-edge zero modes on a half-space slab.
    EdgeDensity(EdgeArgs),
    /// Bulk winding against edge density.
    Bbc(BbcArgs),
    /// Besov or finite-difference norms of an operator profile.
    Besov(BesovArgs),
    /// Schatten norms of Hankel truncations.
    Hankel(HankelArgs),
    /// Toeplitz and chain indices.
    Index(IndexArgs),
    /// Invariant along a preset parameter grid.
    Sweep(SweepArgs),
    /// List presets or print one as a model file.
    Presets(PresetsArgs),
    /// Rerun a manifest and compare outputs bit for bit.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BulkArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Invariant (default: winding for chiral models, chern otherwise).
    #[arg(long, value_enum)]
    pub op: Option<BulkOp>,
    /// Winding direction, e.g. `1,0` (default: every axis).
    #[arg(long, allow_hyphen_values = true)]
    pub dir: Option<String>,
    /// Points per axis.
    #[arg(long, default_value_t = 600)]
    pub grid: usize,
    /// Fermi level for projection invariants.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub fermi: f64,
    /// Magnetic supercell, e.g. `3,1`.
    #[arg(long)]
    pub supercell: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DosArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Clean k-grid points per axis (used without --box).
    #[arg(long, default_value_t = 400)]
    pub grid: usize,
    /// Box lengths for disorder sampling, e.g. `24,24`.
    #[arg(long = "box")]
    pub boxs: Option<String>,
    #[arg(long, value_enum, default_value = "periodic")]
    pub bc: Bc,
    /// Seeds: `0..10` or `1,5,9`.
    #[arg(long, default_value = "0")]
    pub seeds: String,
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    /// Histogram half-range (default: spectral radius).
    #[arg(long)]
    pub range: Option<f64>,
    /// Fit the pseudogap exponent at this energy instead of emitting bins.
    #[arg(long, allow_hyphen_values = true)]
    pub fit: Option<f64>,
    /// Fit window `lo,hi` of half-widths.
    #[arg(long)]
    pub window: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SlabArgs {
    /// Cut normal, e.g. `1,0` or `1,1.618`.
    #[arg(long, allow_hyphen_values = true)]
    pub cut: String,
    /// Depth W of the slab.
    #[arg(long, default_value_t = 40.0)]
    pub width: f64,
    /// Length L along the boundary.
    #[arg(long, default_value_t = 60)]
    pub length: usize,
    #[arg(long, value_enum, default_value = "periodic")]
    pub parallel: Bc,
    /// Gershgorin norm of a random chiral boundary term.
    #[arg(long)]
    pub boundary_disorder: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EdgeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub slab: SlabArgs,
    /// Boundary offset r.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub offset: f64,
    /// Number of offsets across one boundary period (1 = only --offset).
    #[arg(long, default_value_t = 1)]
    pub offsets: usize,
    /// Smooth restriction width.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Zero-mode energy threshold.
    #[arg(long)]
    pub eps_zero: Option<f64>,
    /// Emit the zero modes instead of densities.
    #[arg(long)]
    pub dump_modes: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BbcArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub slab: SlabArgs,
    #[arg(long, default_value_t = 8)]
    pub offsets: usize,
    /// Bulk k-grid points per axis.
    #[arg(long, default_value_t = 600)]
    pub bulk_grid: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProfileArgs {
    #[arg(long, value_enum, default_value = "hamiltonian")]
    pub operator: Operator,
    /// Fourier radius of the fermi-unitary profile.
    #[arg(long, default_value_t = 32)]
    pub radius: usize,
    /// k-grid for fermi-unitary profiles and Bloch norms.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BesovArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Largest dyadic window index.
    #[arg(long, default_value_t = 6)]
    pub jmax: usize,
    /// Periodic box side for the trace (default: Bloch fibre integral).
    #[arg(long = "box")]
    pub boxs: Option<usize>,
    /// Finite-difference norm of this order instead of the dyadic one.
    #[arg(long)]
    pub order: Option<u32>,
    /// Octaves of the t-grid for finite differences.
    #[arg(long, default_value_t = 10)]
    pub octaves: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct HankelArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Truncation size L.
    #[arg(long, default_value_t = 128)]
    pub length: usize,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Relative threshold for the numerical rank.
    #[arg(long, default_value_t = 1e-10)]
    pub rank_tol: f64,
    /// Emit the singular values.
    #[arg(long)]
    pub dump_singular: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IndexArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "toeplitz")]
    pub method: IndexKind,
    /// Truncation or chain length L.
    #[arg(long, default_value_t = 60)]
    pub length: usize,
    /// k-grid for the Fermi unitary.
    #[arg(long, default_value_t = 256)]
    pub grid: usize,
    /// Seeds for disorder averaging: `0..50` or a list.
    #[arg(long, default_value = "0..10")]
    pub seeds: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Preset to sweep.
    #[arg(long)]
    pub preset: String,
    /// `name=start:stop:step`.
    #[arg(long)]
    pub param: String,
    #[arg(long, value_enum, default_value = "winding")]
    pub op: SweepOp,
    /// Direction for winding, or cut normal for density.
    #[arg(long, allow_hyphen_values = true)]
    pub dir: Option<String>,
    #[arg(long, default_value_t = 200)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub fermi: f64,
    /// Slab depth and length for density sweeps.
    #[arg(long, default_value_t = 40.0)]
    pub width: f64,
    #[arg(long, default_value_t = 60)]
    pub length: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PresetsArgs {
    /// Print this preset as a model file.
    #[arg(long)]
    pub emit: Option<String>,
    #[arg(long, requires = "emit", allow_hyphen_values = true)]
    pub param: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(id = "replay_manifest", value_name = "MANIFEST")]
    pub manifest: PathBuf,
}

//! Command-line front end for the topoflat numerics: model files, record
//! emission, run manifests and replay.

pub mod args;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod model;
pub mod records;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::Parser;
use topoflat::lattice::ModelSpec;

use args::{Cli, Command};
use commands::{Computed, Payload};
use error::CliError;
use manifest::{sha256_hex, OutputDigest, RunManifest};
use records::{emit_records, Format};

pub use model::{emit_model, load_model, model_hash, parse_model};

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::BulkInvariants(_) => "bulk-invariants",
        Command::Dos(_) => "dos",
        Command::EdgeDensity(_) => "edge-density",
        Command::Bbc(_) => "bbc",
        Command::Besov(_) => "besov",
        Command::Hankel(_) => "hankel",
        Command::Index(_) => "index",
        Command::Sweep(_) => "sweep",
        Command::Presets(_) => "presets",
        Command::Replay(_) => "replay",
    }
}

fn compute(command: &Command, model: Option<&ModelSpec>) -> Result<Computed, CliError> {
    match command {
        Command::BulkInvariants(a) => commands::bulk(a, model),
        Command::Dos(a) => commands::dos(a, model),
        Command::EdgeDensity(a) => commands::edge_density(a, model),
        Command::Bbc(a) => commands::bbc(a, model),
        Command::Besov(a) => commands::besov(a, model),
        Command::Hankel(a) => commands::hankel(a, model),
        Command::Index(a) => commands::index(a, model),
        Command::Sweep(a) => commands::sweep(a),
        Command::Presets(a) => commands::presets_cmd(a),
        Command::Replay(a) => replay(&a.manifest),
    }
}

fn render(c: &Computed, format: Format) -> (Vec<u8>, usize) {
    match &c.payload {
        Payload::Table(t) => (emit_records(t, format), t.rows.len()),
        Payload::Text(s) => (s.clone().into_bytes(), 1),
    }
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Jsonl => "jsonl",
    }
}

fn parse(argv: &[String]) -> Result<Cli, clap::Error> {
    Cli::try_parse_from(std::iter::once("topoflat".to_string()).chain(argv.iter().cloned()))
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Reruns the command stored in a manifest against its embedded model and
/// compares output digests.
fn replay(path: &Path) -> Result<Computed, CliError> {
    let stored = RunManifest::load(path)?;
    let cli = parse(&stored.argv).map_err(|e| CliError::Replay(format!("stored argv no longer parses: {}", e.kind())))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Usage("cannot replay a replay manifest".into()));
    }
    let model = match &stored.model {
        Some(text) if !matches!(cli.command, Command::Sweep(_) | Command::Presets(_)) => Some(parse_model(text, "manifest model")?),
        _ => None,
    };
    let fresh = with_threads(cli.output.threads, || compute(&cli.command, model.as_ref()))??;
    let (bytes, _) = render(&fresh, cli.output.format);
    let actual = sha256_hex(&bytes);
    let expected = stored.outputs.first().map(|o| o.sha256.clone()).unwrap_or_default();
    let mut t = records::Table::new(&["manifest", "command", "expected_sha256", "actual_sha256", "identical"]);
    t.push(vec![path.display().to_string().into(), stored.command.clone().into(), expected.clone().into(), actual.clone().into(), (expected == actual).into()]);
    if expected != actual {
        return Err(CliError::Replay(format!("{}: expected sha256 {expected}, got {actual}", path.display())));
    }
    Ok(Computed { payload: Payload::Table(t), model: None, seeds: stored.seeds, provenance: vec![format!("replay of {}", path.display())], cache: vec![] })
}

fn manifest_path(cli: &Cli) -> PathBuf {
    if let Some(p) = &cli.output.manifest {
        return p.clone();
    }
    if let Command::Replay(a) = &cli.command {
        let mut s = a.manifest.clone().into_os_string();
        s.push(".replay.json");
        return PathBuf::from(s);
    }
    match &cli.output.output {
        Some(o) => {
            let mut s = o.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => PathBuf::from("topoflat.manifest.json"),
    }
}

/// Runs the tool on `argv` (without the program name). Records go to `out`
/// unless `--output` is given; diagnostics go to `err`. Returns the exit code.
pub fn run(argv: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match parse(argv) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let format = cli.output.format;
    let result = with_threads(cli.output.threads, || compute(&cli.command, None)).and_then(|r| r);
    let mut manifest = RunManifest {
        command: command_name(&cli.command).to_string(),
        argv: argv.to_vec(),
        model_hash: None,
        model: None,
        params: serde_json::to_value(&cli.command).unwrap_or(serde_json::Value::Null),
        seeds: vec![],
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads: cli.output.threads,
        started_unix: started,
        wall_clock_s: 0.0,
        outputs: vec![],
        provenance: vec![],
        cache: Default::default(),
        error: None,
    };
    let code = match result.and_then(|c| {
        let (bytes, records) = render(&c, format);
        let target = match &cli.output.output {
            Some(p) => {
                std::fs::write(p, &bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                p.display().to_string()
            }
            None => {
                out.write_all(&bytes)?;
                "stdout".to_string()
            }
        };
        manifest.outputs.push(OutputDigest { target, format: format_name(format).into(), records, sha256: sha256_hex(&bytes) });
        if let Some(m) = &c.model {
            manifest.model_hash = Some(model_hash(m));
            manifest.model = Some(emit_model(m));
        }
        manifest.seeds = c.seeds;
        manifest.provenance = c.provenance;
        manifest.cache = c.cache.into_iter().collect();
        Ok(())
    }) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            manifest.error = Some(e.to_string());
            e.exit_code()
        }
    };
    manifest.wall_clock_s = clock.elapsed().as_secs_f64();
    let path = manifest_path(&cli);
    if let Err(e) = manifest.save(&path) {
        let _ = writeln!(err, "error: could not write manifest: {e}");
        return if code == 0 { 1 } else { code };
    }
    code
}

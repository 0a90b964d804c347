use std::path::Path;

use topoflat::lattice::presets;
use topoflat_cli::error::CliError;
use topoflat_cli::manifest::RunManifest;
use topoflat_cli::{emit_model, load_model, parse_model};

fn run(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = topoflat_cli::run(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn with_manifest<'a>(args: &[&'a str], manifest: &'a str) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend(["--manifest", manifest]);
    v
}

fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let head = r.headers().unwrap().clone();
    r.records().map(|rec| head.iter().map(String::from).zip(rec.unwrap().iter().map(String::from)).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn path_str(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

#[test]
fn graphene_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("graphene.toml");
    let m = path_str(&dir.path().join("m.json"));
    let (code, text, _) = run(&["presets", "--emit", "graphene", "--manifest", &m]);
    assert_eq!(code, 0);
    std::fs::write(&file, &text).unwrap();
    let loaded = load_model(&file).unwrap();
    assert_eq!(loaded, presets::graphene());
    assert_eq!(emit_model(&loaded), text);
}

#[test]
fn non_hermitian_file_names_the_invariant() {
    let text = "d = 1\norbitals = 1\n\n[[hopping]]\nx = [1]\nre = [[1.0]]\n\n[[hopping]]\nx = [-1]\nre = [[2.0]]\n";
    match parse_model(text, "mem").unwrap_err() {
        CliError::Validation { invariant, .. } => assert_eq!(invariant, "hermiticity"),
        other => panic!("{other:?}"),
    }
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.toml");
    std::fs::write(&file, text).unwrap();
    let m = path_str(&dir.path().join("m.json"));
    let (code, _, err) = run(&["bulk-invariants", "--model", file.to_str().unwrap(), "--manifest", &m]);
    assert_eq!(code, 1);
    assert!(err.contains("hermiticity"), "{err}");
}

#[test]
fn malformed_file_reports_line_and_column() {
    let err = parse_model("d = 2\norbitals = 2\nchiral = yes\n", "mem").unwrap_err();
    match err {
        CliError::Parse { line, column, .. } => assert_eq!((line, column), (3, 10)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn csv_and_jsonl_carry_the_same_values() {
    let dir = tempfile::tempdir().unwrap();
    let m = path_str(&dir.path().join("m.json"));
    let args = ["index", "--preset", "ssh", "--method", "sobolev", "--manifest", &m];
    let (_, csv_text, _) = run(&args);
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "jsonl"]);
    let (_, jsonl, _) = run(&json_args);
    assert_ne!(csv_text, jsonl);
    let rows = csv_rows(&csv_text);
    let objs: Vec<serde_json::Value> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), objs.len());
    for (row, obj) in rows.iter().zip(&objs) {
        for key in ["L", "kernel", "cokernel", "value", "residual", "error"] {
            assert_eq!(num(&row[key]).to_bits(), obj[key].as_f64().unwrap().to_bits(), "{key}");
        }
        assert_eq!(row["method"], obj["method"].as_str().unwrap());
    }
}

#[test]
fn graphene_bulk_edge_record() {
    let dir = tempfile::tempdir().unwrap();
    let m = path_str(&dir.path().join("m.json"));
    let (code, out, err) = run(&with_manifest(&["bbc", "--preset", "graphene", "--cut", "1,0", "--width", "60", "--length", "120"], &m));
    assert_eq!(code, 0, "{err}");
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 1);
    assert!((num(&rows[0]["bulk"]) - 1.0 / 3.0).abs() < 1e-3);
    assert!((num(&rows[0]["edge"]) - 1.0 / 3.0).abs() < 0.02);
    assert_eq!(rows[0]["spectral_gap"], "false");
    assert!(num(&rows[0]["edge_error"]) > 0.0);
}

#[test]
fn presets_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let m = path_str(&dir.path().join("m.json"));
    let (code, out, _) = run(&["presets", "--manifest", &m]);
    assert_eq!(code, 0);
    let names: Vec<String> = csv_rows(&out).into_iter().map(|r| r["name"].clone()).collect();
    for want in ["graphene", "honeycomb-lambda", "ssh", "harper", "chern-two-band"] {
        assert!(names.iter().any(|n| n == want), "{want}");
    }
}

#[test]
fn honeycomb_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let m = path_str(&dir.path().join("m.json"));
    let args = ["sweep", "--preset", "honeycomb-lambda", "--param", "lambda=0.2:3.0:0.1", "--op", "winding", "--dir", "1,0"];
    let (code, out, err) = run(&with_manifest(&args, &m));
    assert_eq!(code, 0, "{err}");
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 29);
    for r in &rows {
        assert_eq!(r["status"], "ok");
        if num(&r["value"]) > 2.05 {
            assert_eq!(num(&r["result"]), 0.0);
        } else if num(&r["value"]) < 1.95 {
            assert!(num(&r["result"]) > 0.0);
        }
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let m = path_str(&dir.path().join("m.json"));
    assert_eq!(run(&["--help"]).0, 0);
    assert_eq!(run(&["bulk-invariants", "--preset", "ssh", "--bogus", "--manifest", &m]).0, 2);
    let (code, _, err) = run(&["bulk-invariants", "--manifest", &m]);
    assert_eq!(code, 2);
    assert!(err.contains("--preset"));
    assert_eq!(run(&["sweep", "--preset", "ssh", "--param", "m=0:1:0.5", "--manifest", &m]).0, 2);
    let (code, _, err) = run(&["bulk-invariants", "--preset", "chern-two-band", "--op", "winding", "--manifest", &m]);
    assert_eq!(code, 1);
    assert!(err.contains("chiral"), "{err}");
    let failed = RunManifest::load(Path::new(&m)).unwrap();
    assert!(failed.error.is_some());
    assert!(failed.outputs.is_empty());
}

#[test]
fn manifest_replay_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = path_str(&dir.path().join("edge.csv"));
    let args = [
        "edge-density", "--preset", "graphene", "--cut", "1,0", "--width", "16", "--length", "12", "--boundary-disorder", "0.5",
        "--seed", "3", "--offsets", "3", "--output", &out,
    ];
    let (code, _, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    let manifest_path = format!("{out}.manifest.json");
    let manifest = RunManifest::load(Path::new(&manifest_path)).unwrap();
    assert_eq!(manifest.command, "edge-density");
    assert_eq!(manifest.seeds, vec![3]);
    assert!(manifest.model_hash.is_some());
    assert_eq!(manifest.params["edge-density"]["slab"]["width"], 16.0);
    let (code, replayed, err) = run(&["replay", &manifest_path]);
    assert_eq!(code, 0, "{err}");
    assert!(replayed.contains(",true"));
    assert!(Path::new(&format!("{manifest_path}.replay.json")).exists());

    let mut tampered = manifest.clone();
    tampered.outputs[0].sha256 = "0".repeat(64);
    let bad = dir.path().join("tampered.json");
    tampered.save(&bad).unwrap();
    let (code, _, err) = run(&["replay", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("replay mismatch"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let m = path_str(&dir.path().join("m.json"));
    let base = ["dos", "--preset", "graphene", "--disorder", "chiral-bond", "--strength", "0.4", "--box", "8,8", "--seeds", "0..4", "--bins", "16"];
    let (c1, one, _) = run(&[&base[..], &["--threads", "1", "--manifest", &m]].concat());
    let (c3, three, _) = run(&[&base[..], &["--threads", "3", "--manifest", &m]].concat());
    assert_eq!((c1, c3), (0, 0));
    assert_eq!(one, three);
    let mass: f64 = csv_rows(&one).iter().map(|r| num(&r["mass"])).sum();
    assert!((mass - 2.0).abs() < 1e-9);
}

#[test]
fn spectra_cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let key = "model|[4, 4]|0";
    topoflat_cli::manifest::cache_put(&cache, key, &[-1.5, 0.25, 3.0], 16).unwrap();
    assert_eq!(topoflat_cli::manifest::cache_get(&cache, key), Some((vec![-1.5, 0.25, 3.0], 16)));
    assert_eq!(topoflat_cli::manifest::cache_get(&cache, "other"), None);
}

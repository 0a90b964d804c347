use std::path::Path;

use topoflat_cli::manifest::{RunManifest, CACHE_ENV};

fn run(args: &[&str]) -> (i32, Vec<u8>) {
    let argv: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = topoflat_cli::run(&argv, &mut out, &mut err);
    (code, out)
}

#[test]
fn cached_spectra_reproduce_fresh_ones() {
    let dir = tempfile::tempdir().unwrap();
    std::env::set_var(CACHE_ENV, dir.path().join("eig"));
    let m = dir.path().join("m.json");
    let args = [
        "dos", "--preset", "graphene", "--disorder", "chiral-bond", "--strength", "0.5", "--box", "6,6", "--seeds", "0..3", "--bins", "9",
        "--manifest", m.to_str().unwrap(),
    ];
    let (c1, cold) = run(&args);
    let first = RunManifest::load(&m).unwrap();
    let (c2, warm) = run(&args);
    let second = RunManifest::load(Path::new(&m)).unwrap();
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(cold, warm);
    assert_eq!((first.cache["hits"], first.cache["misses"]), (0, 3));
    assert_eq!((second.cache["hits"], second.cache["misses"]), (3, 0));
    assert_eq!(first.seeds, vec![0, 1, 2]);
}

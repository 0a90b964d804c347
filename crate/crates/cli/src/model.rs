//! TOML model files.
//!
//! ```toml
//! d = 1
//! orbitals = 2
//! chiral = true
//! field = [[0.0]]
//!
//! [disorder]
//! law = "chiral-bond"
//! strength = 0.3
//!
//! [[hopping]]
//! x = [0]
//! re = [[0.0, 0.5], [0.5, 0.0]]
//!
//! [[hopping]]
//! x = [1]
//! re = [[0.0, 1.0], [0.0, 0.0]]
//! im = [[0.0, 0.0], [0.0, 0.0]]
//! ```
//!
//! Missing partners `t_{-x}` are filled with `t_x^*`; listed partners must match it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use topoflat::lattice::{Disorder, DisorderLaw, ModelSpec};
use topoflat::linalg::{CMat, C64};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    d: usize,
    orbitals: usize,
    #[serde(default)]
    chiral: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    field: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    disorder: Option<DisorderFile>,
    #[serde(default)]
    hopping: Vec<HoppingFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisorderFile {
    law: String,
    strength: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HoppingFile {
    x: Vec<i64>,
    re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    im: Option<Vec<Vec<f64>>>,
}

pub fn law_name(law: DisorderLaw) -> &'static str {
    match law {
        DisorderLaw::Onsite => "onsite",
        DisorderLaw::ChiralBond => "chiral-bond",
    }
}

pub fn parse_law(s: &str) -> Result<DisorderLaw, String> {
    match s {
        "onsite" => Ok(DisorderLaw::Onsite),
        "chiral-bond" => Ok(DisorderLaw::ChiralBond),
        other => Err(format!("unknown disorder law '{other}' (expected onsite or chiral-bond)")),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, col)
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<Vec<f64>, String> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(format!("{what} must be {n}x{n}"));
    }
    Ok(rows.iter().flatten().copied().collect())
}

/// Parses model text; `origin` names the source in error messages.
pub fn parse_model(text: &str, origin: &str) -> Result<ModelSpec, CliError> {
    let file: ModelFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        CliError::Parse { origin: origin.to_string(), line, column, message: e.message().to_string() }
    })?;
    let n = file.orbitals;
    let mut hops = Vec::with_capacity(file.hopping.len());
    for (i, h) in file.hopping.iter().enumerate() {
        let bad = |m: String| CliError::Validation { invariant: "dimension".into(), detail: format!("hopping #{}: {m}", i + 1) };
        let re = matrix(&h.re, n, "re").map_err(bad)?;
        let im = match &h.im {
            Some(im) => matrix(im, n, "im").map_err(bad)?,
            None => vec![0.0; n * n],
        };
        let t = CMat::from_fn(n, n, |a, b| C64::new(re[a * n + b], im[a * n + b]));
        hops.push((h.x.clone(), t));
    }
    let disorder = match &file.disorder {
        Some(dis) => {
            let law = parse_law(&dis.law).map_err(|m| CliError::Validation { invariant: "disorder".into(), detail: m })?;
            Some(Disorder { law, strength: dis.strength })
        }
        None => None,
    };
    Ok(ModelSpec::new(file.d, n, hops, file.field, disorder, file.chiral)?)
}

pub fn load_model(path: &Path) -> Result<ModelSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_model(&text, &path.display().to_string())
}

/// Canonical text of a model: every stored hopping, the full field and the disorder law.
pub fn emit_model(model: &ModelSpec) -> String {
    let n = model.n;
    let split = |t: &CMat, f: fn(&C64) -> f64| -> Vec<Vec<f64>> { (0..n).map(|a| (0..n).map(|b| f(&t[(a, b)])).collect()).collect() };
    let hopping = model
        .hoppings()
        .iter()
        .map(|(x, t)| HoppingFile {
            x: x.clone(),
            re: split(t, |z| z.re),
            im: if t.iter().any(|z| z.im != 0.0) { Some(split(t, |z| z.im)) } else { None },
        })
        .collect();
    let file = ModelFile {
        d: model.d,
        orbitals: n,
        chiral: model.chiral,
        field: Some(model.field.clone()),
        disorder: model.disorder.map(|d| DisorderFile { law: law_name(d.law).to_string(), strength: d.strength }),
        hopping,
    };
    toml::to_string(&file).expect("model file serialization")
}

/// Hex SHA-256 of the canonical model text.
pub fn model_hash(model: &ModelSpec) -> String {
    hex::encode(Sha256::digest(emit_model(model).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use topoflat::lattice::presets;

    #[test]
    fn presets_round_trip() {
        for name in presets::NAMES {
            let m = presets::by_name(name, None).unwrap();
            assert_eq!(parse_model(&emit_model(&m), "mem").unwrap(), m, "{name}");
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_model("d = 1\norbitals = \"two\"\n", "mem").unwrap_err();
        match err {
            CliError::Parse { line, column, .. } => assert_eq!((line, column), (2, 12)),
            other => panic!("{other:?}"),
        }
    }
}

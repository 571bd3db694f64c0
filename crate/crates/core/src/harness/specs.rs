//! Textual and JSON specs for matrices, ideals, sequences and sets.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constructions::{perturb_identity, rk_matrix};
use crate::ideals::{Ideal, SetDescription};
use crate::index_map::IndexMap;
use crate::matrices::{self, InfiniteMatrix};
use crate::sequences::{self, BoundedSequence};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("unknown {kind} {name:?}")]
    Unknown { kind: &'static str, name: String },
    #[error("invalid {kind} spec at {path}: {message}")]
    Invalid { kind: &'static str, path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Build(String),
}

/// Parses JSON with the path of the offending field in errors.
pub fn from_json<T: serde::de::DeserializeOwned>(kind: &'static str, text: &str) -> Result<T, SpecError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| SpecError::Invalid {
        kind,
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// A bare string is a name; anything else must parse as the structured form.
macro_rules! named_or_structured {
    ($ty:ident, $named:ident, $structured:ident, $inner:ty) => {
        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                match serde_json::Value::deserialize(d)? {
                    serde_json::Value::String(s) => Ok($ty::$named(s)),
                    other => <$inner>::deserialize(other).map($ty::$structured).map_err(serde::de::Error::custom),
                }
            }
        }
    };
}

named_or_structured!(MatrixSpec, Named, Spec, MatrixDef);
named_or_structured!(IdealSpec, Named, Spec, Ideal);
named_or_structured!(SequenceSpec, Named, Expr, SequenceExpr);

fn read(path: &str) -> Result<String, SpecError> {
    std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.to_string(),
        source,
    })
}

/// Inline JSON, a JSON file, or `None` if `text` is neither.
fn json_source(text: &str) -> Result<Option<String>, SpecError> {
    let t = text.trim();
    if t.starts_with('{') || t.starts_with('[') {
        return Ok(Some(t.to_string()));
    }
    if t.ends_with(".json") || Path::new(t).is_file() {
        return read(t).map(Some);
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Affine {
        scale: u64,
        #[serde(default)]
        shift: u64,
    },
    Enumeration {
        set: SetDescription,
    },
    Constant {
        value: u64,
    },
}

impl MapSpec {
    pub fn build(&self) -> IndexMap {
        match self {
            MapSpec::Affine { scale, shift } => IndexMap::affine(*scale, *shift),
            MapSpec::Enumeration { set } => IndexMap::enumeration_of(set.clone()),
            MapSpec::Constant { value } => IndexMap::constant(*value),
        }
    }
}

/// A matrix by name (`cesaro`, `identity`, `zero`, `2identity`, `rk-2n`,
/// `rk-evens`, `random:<seed>:<index>`), inline JSON or a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Named(String),
    Spec(MatrixDef),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixDef {
    Cesaro,
    Identity,
    Zero,
    Scaled { factor: f64, of: Box<MatrixSpec> },
    Sum { left: Box<MatrixSpec>, right: Box<MatrixSpec> },
    Compose { left: Box<MatrixSpec>, right: Box<MatrixSpec> },
    PerturbIdentity { of: Box<MatrixSpec> },
    Diagonal { sequence: SequenceSpec },
    Rk { map: MapSpec },
    Random { seed: u64, index: u64 },
    /// `rows[n]` lists `[k, value]` pairs; rows past the list are zero.
    Explicit {
        #[serde(default)]
        label: Option<String>,
        rows: Vec<Vec<(u64, f64)>>,
    },
}

impl MatrixSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        match json_source(text)? {
            Some(json) => from_json("matrix", &json).map(MatrixSpec::Spec),
            None => Ok(MatrixSpec::Named(text.trim().to_string())),
        }
    }

    pub fn build(&self) -> Result<InfiniteMatrix, SpecError> {
        match self {
            MatrixSpec::Named(name) => build_named_matrix(name),
            MatrixSpec::Spec(def) => def.build(),
        }
    }
}

fn build_named_matrix(name: &str) -> Result<InfiniteMatrix, SpecError> {
    let lower = name.to_ascii_lowercase();
    match lower.as_str() {
        "cesaro" | "c1" => return Ok(matrices::cesaro()),
        "identity" | "id" => return Ok(matrices::identity()),
        "zero" => return Ok(matrices::zero()),
        "2identity" => return Ok(matrices::scalar_mul(2.0, &matrices::identity())),
        "rk-2n" => return Ok(rk_matrix(IndexMap::affine(2, 0))),
        "rk-evens" => return Ok(rk_matrix(IndexMap::enumeration_of(SetDescription::evens()))),
        "rk-const0" => return Ok(rk_matrix(IndexMap::constant(0))),
        _ => {}
    }
    if let Some(rest) = lower.strip_prefix("random:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if let [seed, index] = parts[..] {
            if let (Ok(s), Ok(i)) = (seed.parse(), index.parse()) {
                return Ok(matrices::random_nonnegative(s, i));
            }
        }
    }
    if json_source(name)?.is_some() {
        return MatrixSpec::parse(name)?.build();
    }
    Err(SpecError::Unknown {
        kind: "matrix",
        name: name.to_string(),
    })
}

impl MatrixDef {
    pub fn build(&self) -> Result<InfiniteMatrix, SpecError> {
        Ok(match self {
            MatrixDef::Cesaro => matrices::cesaro(),
            MatrixDef::Identity => matrices::identity(),
            MatrixDef::Zero => matrices::zero(),
            MatrixDef::Scaled { factor, of } => matrices::scalar_mul(*factor, &of.build()?),
            MatrixDef::Sum { left, right } => matrices::matrix_sum(&left.build()?, &right.build()?),
            MatrixDef::Compose { left, right } => matrices::compose(&left.build()?, &right.build()?, 1000)
                .map_err(|e| SpecError::Build(e.to_string()))?,
            MatrixDef::PerturbIdentity { of } => perturb_identity(&of.build()?),
            MatrixDef::Diagonal { sequence } => matrices::diagonal(&sequence.build()?),
            MatrixDef::Rk { map } => rk_matrix(map.build()),
            MatrixDef::Random { seed, index } => matrices::random_nonnegative(*seed, *index),
            MatrixDef::Explicit { label, rows } => {
                matrices::explicit(label.clone().unwrap_or_else(|| "explicit".into()), rows.clone())
                    .map_err(|e| SpecError::Build(e.to_string()))?
            }
        })
    }
}

/// An ideal by name (`fin`, `z`, `fin-oplus-evens`, `fin-oplus-odds`,
/// `eu:<α>`, `summable:<α>`, `fin-times-empty`), inline JSON or a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum IdealSpec {
    Named(String),
    Spec(Ideal),
}

impl IdealSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        match json_source(text)? {
            Some(json) => from_json("ideal", &json).map(IdealSpec::Spec),
            None => Ok(IdealSpec::Named(text.trim().to_string())),
        }
    }

    pub fn build(&self) -> Result<Ideal, SpecError> {
        match self {
            IdealSpec::Spec(i) => Ok(i.clone()),
            IdealSpec::Named(name) => build_named_ideal(name),
        }
    }
}

fn build_named_ideal(name: &str) -> Result<Ideal, SpecError> {
    let lower = name.to_ascii_lowercase();
    let bad = |e: crate::ideals::IdealError| SpecError::Build(e.to_string());
    let exponent = |s: &str| {
        s.parse::<f64>().map_err(|_| SpecError::Unknown {
            kind: "ideal",
            name: name.to_string(),
        })
    };
    match lower.as_str() {
        "fin" => Ok(Ideal::fin()),
        "z" | "density-zero" | "densityzero" => Ok(Ideal::density_zero()),
        "fin-oplus-evens" => Ideal::fin_oplus_full(SetDescription::evens()).map_err(bad),
        "fin-oplus-odds" => Ideal::fin_oplus_full(SetDescription::odds()).map_err(bad),
        "fin-times-empty" => Ok(Ideal::fin_times_empty()),
        _ => {
            if let Some(a) = lower.strip_prefix("eu:") {
                Ideal::erdos_ulam(exponent(a)?).map_err(bad)
            } else if let Some(a) = lower.strip_prefix("summable:") {
                Ideal::summable(exponent(a)?).map_err(bad)
            } else if json_source(name)?.is_some() {
                IdealSpec::parse(name)?.build()
            } else {
                Err(SpecError::Unknown {
                    kind: "ideal",
                    name: name.to_string(),
                })
            }
        }
    }
}

/// A sequence: a corpus label, `harmonic`, `geometric`, `constant:<v>`, or a JSON expression.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SequenceSpec {
    Named(String),
    Expr(SequenceExpr),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceExpr {
    Indicator { set: SetDescription },
    SignedIndicator { f: SetDescription, g: SetDescription },
    Affine { of: Box<SequenceSpec>, alpha: f64, kappa: f64 },
    Sum { left: Box<SequenceSpec>, right: Box<SequenceSpec> },
}

impl SequenceSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        match json_source(text)? {
            Some(json) => from_json("sequence", &json).map(SequenceSpec::Expr),
            None => Ok(SequenceSpec::Named(text.trim().to_string())),
        }
    }

    pub fn build(&self) -> Result<BoundedSequence, SpecError> {
        match self {
            SequenceSpec::Named(name) => build_named_sequence(name),
            SequenceSpec::Expr(e) => Ok(match e {
                SequenceExpr::Indicator { set } => sequences::indicator(set.clone()),
                SequenceExpr::SignedIndicator { f, g } => {
                    sequences::signed_indicator(f.clone(), g.clone()).map_err(|e| SpecError::Build(e.to_string()))?
                }
                SequenceExpr::Affine { of, alpha, kappa } => of.build()?.affine(*alpha, *kappa),
                SequenceExpr::Sum { left, right } => left.build()?.add(&right.build()?),
            }),
        }
    }
}

fn build_named_sequence(name: &str) -> Result<BoundedSequence, SpecError> {
    if let Some(x) = sequences::corpus_entry(name) {
        return Ok(x);
    }
    match name {
        "harmonic" | "1/(n+1)" => return Ok(sequences::harmonic()),
        "geometric" | "2^-n" => return Ok(sequences::geometric()),
        _ => {}
    }
    if let Some(v) = name.strip_prefix("constant:").and_then(|v| v.parse().ok()) {
        return Ok(sequences::constant(v));
    }
    if json_source(name)?.is_some() {
        return SequenceSpec::parse(name)?.build();
    }
    Err(SpecError::Unknown {
        kind: "sequence",
        name: name.to_string(),
    })
}

/// A set by name (`evens`, `odds`, `squares`, `omega`, `empty`, `primes`,
/// `AP(o,s)`, `blocks(r)`), inline JSON or a JSON file.
pub fn parse_set(text: &str) -> Result<SetDescription, SpecError> {
    if let Some(json) = json_source(text)? {
        return from_json("set", &json);
    }
    let t = text.trim();
    let args = |prefix: &str| -> Option<Vec<u64>> {
        let inner = t.strip_prefix(prefix)?.strip_suffix(')')?;
        inner.split(',').map(|p| p.trim().parse().ok()).collect()
    };
    let set = match t.to_ascii_lowercase().as_str() {
        "evens" => SetDescription::evens(),
        "odds" => SetDescription::odds(),
        "squares" => SetDescription::squares(),
        "omega" | "all" => SetDescription::all(),
        "empty" => SetDescription::empty(),
        "primes" => SetDescription::predicate(crate::ideals::Predicate::Primes),
        _ => {
            if let Some(a) = args("AP(") {
                match a[..] {
                    [o, s] if s > 0 => SetDescription::progression(o, s),
                    _ => return Err(unknown_set(t)),
                }
            } else if let Some(a) = args("blocks(") {
                match a[..] {
                    [r] if r >= 2 => SetDescription::oscillating_blocks(r),
                    _ => return Err(unknown_set(t)),
                }
            } else {
                return Err(unknown_set(t));
            }
        }
    };
    Ok(set)
}

fn unknown_set(t: &str) -> SpecError {
    SpecError::Unknown {
        kind: "set",
        name: t.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_and_json_matrices() {
        assert_eq!(MatrixSpec::parse("cesaro").unwrap().build().unwrap().label(), "Cesaro");
        let m = MatrixSpec::parse(r#"{"type":"rk","map":{"type":"affine","scale":2}}"#)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(m.entry(3, 6), 1.0);
        let e = MatrixSpec::parse(r#"{"type":"explicit","rows":[[[0,0.5],[1,0.5]]]}"#)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(e.entry(0, 1), 0.5);
        assert!(matches!(MatrixSpec::parse("nope").unwrap().build(), Err(SpecError::Unknown { .. })));
        assert_eq!(MatrixSpec::parse("random:3:4").unwrap().build().unwrap().label(), crate::matrices::random_nonnegative(3, 4).label());
    }

    #[test]
    fn json_errors_carry_paths() {
        let err = MatrixSpec::parse(r#"{"type":"rk","map":{"type":"affine","scale":"two"}}"#).unwrap_err();
        match err {
            SpecError::Invalid { .. } | SpecError::Unknown { .. } => {}
            other => panic!("{other}"),
        }
        let err = from_json::<MatrixDef>("matrix", r#"{"type":"rk","map":{"type":"affine","scale":"two"}}"#).unwrap_err();
        assert!(matches!(err, SpecError::Invalid { ref message, .. } if message.contains("\"two\"")), "{err}");
        let err = from_json::<Vec<MatrixSpec>>("matrix", r#"["cesaro", {"type":"sum","left":"id"}]"#).unwrap_err();
        assert!(matches!(err, SpecError::Invalid { ref path, ref message, .. } if path == "[1]" && message.contains("right")), "{err}");
    }

    #[test]
    fn ideals_by_name() {
        assert!(IdealSpec::parse("fin").unwrap().build().unwrap().is_fin());
        assert_eq!(IdealSpec::parse("z").unwrap().build().unwrap().to_string(), "DensityZero");
        assert_eq!(
            IdealSpec::parse("fin-oplus-evens").unwrap().build().unwrap().to_string(),
            "FinOplusFull(evens)"
        );
        assert!(IdealSpec::parse("eu:-1").unwrap().build().is_ok());
        assert!(IdealSpec::parse("eu:-3").unwrap().build().is_err());
        let j = IdealSpec::parse(r#"{"kind":"fin_oplus_full","t":{"type":"progression","offset":1,"step":3}}"#)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(j.to_string(), "FinOplusFull(AP(1,3))");
    }

    #[test]
    fn sets_and_sequences() {
        assert_eq!(parse_set("AP(1,3)").unwrap(), SetDescription::progression(1, 3));
        assert_eq!(parse_set("blocks(2)").unwrap(), SetDescription::oscillating_blocks(2));
        assert!(parse_set("AP(1,0)").is_err());
        let y = SequenceSpec::parse(r#"{"type":"sum","left":"(-1)^n","right":"harmonic"}"#)
            .unwrap()
            .build()
            .unwrap();
        assert!((y.eval(1) - (-1.0 + 0.5)).abs() < 1e-15);
        assert_eq!(SequenceSpec::parse("constant:0.5").unwrap().build().unwrap().eval(9), 0.5);
    }
}

//! Binding `@network`, `@dataset` and `@parameter` declarations to files
//! and values given on the command line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use specbridge_core::frontend::DeclKind;
use specbridge_core::nbe::{Externals, Value};
use specbridge_core::network::Network;
use specbridge_core::rational::{format_exact, parse_decimal, to_f64, Q};
use specbridge_core::typecheck::{shape_of, Ty, TypedProgram};
use specbridge_core::verify::Networks;
use thiserror::Error;

use crate::formats::{parse_dataset, parse_network, FormatError};

/// Resource flags as given: `name=path` or `name=value`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bindings {
    pub networks: Vec<(String, PathBuf)>,
    pub datasets: Vec<(String, PathBuf)>,
    pub parameters: Vec<(String, String)>,
}

/// Splits `name=value` at the first `=`.
pub fn parse_binding(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((n, v)) if !n.is_empty() && !v.is_empty() => Ok((n.to_string(), v.to_string())),
        _ => Err(format!("expected NAME=VALUE, found `{s}`")),
    }
}

#[derive(Debug, Error)]
pub enum BindError {
    #[error("{kind} `{name}` is declared but not bound; pass --{kind} {name}=...")]
    Unbound { kind: &'static str, name: String },
    #[error("--{kind} {name}: the specification declares no {kind} `{name}`")]
    Extra { kind: &'static str, name: String },
    #[error("--{kind} {name} is given more than once")]
    Duplicate { kind: &'static str, name: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{kind} `{name}` ({path}): {source}")]
    Format { kind: &'static str, name: String, path: String, source: FormatError },
    #[error("network `{name}` is declared {}→{} but {path} is {}→{}", expected.0, expected.1, actual.0, actual.1)]
    NetworkShape { name: String, path: String, expected: (usize, usize), actual: (usize, usize) },
    #[error("parameter `{name}` : {ty} cannot take the value `{value}`")]
    Parameter { name: String, ty: String, value: String },
    #[error("{0}")]
    Declaration(String),
}

impl BindError {
    pub fn code(&self) -> &'static str {
        match self {
            BindError::Unbound { .. } => "E-UNBOUND-RESOURCE",
            BindError::Extra { .. } => "E-EXTRA-RESOURCE",
            BindError::Duplicate { .. } => "E-DUPLICATE-RESOURCE",
            BindError::Io { .. } => "E-IO",
            BindError::Format { source: FormatError::Schema { .. }, kind: "dataset", .. } => "E-DATASET-SHAPE",
            BindError::Format { .. } => "E-RESOURCE-FORMAT",
            BindError::NetworkShape { .. } => "E-NETWORK-SHAPE",
            BindError::Parameter { .. } => "E-PARAMETER-TYPE",
            BindError::Declaration(_) => "E-BAD-DECLARATION",
        }
    }
}

/// A file bound to a declaration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundFile {
    pub name: String,
    /// `network` or `dataset`.
    pub role: &'static str,
    pub path: PathBuf,
}

/// The resource environment a compilation runs in.
#[derive(Clone, Debug, Default)]
pub struct Environment {
    pub ext: Externals,
    pub networks: Networks,
    pub datasets: BTreeMap<String, Vec<Q>>,
    /// Parameter values, canonically formatted.
    pub parameters: BTreeMap<String, String>,
    pub rat_parameters: BTreeMap<String, Q>,
    pub files: Vec<BoundFile>,
}

impl Environment {
    pub fn dataset_f64(&self) -> BTreeMap<String, Vec<f64>> {
        self.datasets.iter().map(|(n, v)| (n.clone(), v.iter().map(to_f64).collect())).collect()
    }

    pub fn params_f64(&self) -> BTreeMap<String, f64> {
        self.rat_parameters.iter().map(|(n, q)| (n.clone(), to_f64(q))).collect()
    }
}

/// Which declarations must be bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Require {
    /// Every external (query compilation, verification).
    All,
    /// None; unbound networks, datasets and `Rat` parameters stay
    /// symbolic (loss compilation).
    Partial,
}

fn read(path: &Path) -> Result<String, BindError> {
    fs::read_to_string(path).map_err(|source| BindError::Io { path: path.display().to_string(), source })
}

fn unique<'a, T>(kind: &'static str, items: &'a [(String, T)]) -> Result<BTreeMap<&'a str, &'a T>, BindError> {
    let mut out = BTreeMap::new();
    for (n, v) in items {
        if out.insert(n.as_str(), v).is_some() {
            return Err(BindError::Duplicate { kind, name: n.clone() });
        }
    }
    Ok(out)
}

/// Parses `value` at the parameter's declared type.
pub fn parse_parameter(name: &str, ty: &Ty, value: &str) -> Result<Value, BindError> {
    let bad = || BindError::Parameter { name: name.into(), ty: ty.to_string(), value: value.into() };
    match ty {
        Ty::Bool => match value {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(bad()),
        },
        Ty::Rat => parse_decimal(value).map(Value::Num).ok_or_else(bad),
        Ty::Nat => match parse_decimal(value) {
            Some(q) if q.is_integer() && q >= Q::from_integer(0.into()) => Ok(Value::Num(q)),
            _ => Err(bad()),
        },
        _ => Err(bad()),
    }
}

/// Checks `bindings` against the program's external declarations and
/// loads every bound file.
pub fn bind_resources(tp: &TypedProgram, bindings: &Bindings, require: Require) -> Result<Environment, BindError> {
    let networks = unique("network", &bindings.networks)?;
    let datasets = unique("dataset", &bindings.datasets)?;
    let parameters = unique("parameter", &bindings.parameters)?;
    for (kind, names) in [
        ("network", networks.keys().collect::<Vec<_>>()),
        ("dataset", datasets.keys().collect()),
        ("parameter", parameters.keys().collect()),
    ] {
        for n in names {
            let declared = tp.decl(n).is_some_and(|(_, d)| d.kind.as_str() == kind);
            if !declared {
                return Err(BindError::Extra { kind, name: n.to_string() });
            }
        }
    }

    let mut env = Environment::default();
    for d in tp.externals() {
        match d.kind {
            DeclKind::Network => {
                let Some(path) = networks.get(d.name.as_str()) else {
                    if require == Require::All {
                        return Err(BindError::Unbound { kind: "network", name: d.name.clone() });
                    }
                    continue;
                };
                let expected = shape_of(d).map_err(|e| BindError::Declaration(e.to_string()))?;
                let net: Network = parse_network(&read(path)?).map_err(|source| BindError::Format {
                    kind: "network",
                    name: d.name.clone(),
                    path: path.display().to_string(),
                    source,
                })?;
                let actual = (net.input_dim(), net.output_dim());
                if actual != expected {
                    return Err(BindError::NetworkShape {
                        name: d.name.clone(),
                        path: path.display().to_string(),
                        expected,
                        actual,
                    });
                }
                env.networks.insert(d.name.clone(), net);
                env.files.push(BoundFile { name: d.name.clone(), role: "network", path: (*path).clone() });
            }
            DeclKind::Dataset => {
                let Some(path) = datasets.get(d.name.as_str()) else {
                    if require == Require::All {
                        return Err(BindError::Unbound { kind: "dataset", name: d.name.clone() });
                    }
                    continue;
                };
                let dims = d
                    .scheme
                    .ty
                    .rat_tensor_dims()
                    .ok_or_else(|| BindError::Declaration(format!("dataset `{}` is not a tensor of Rat", d.name)))?;
                let flat = parse_dataset(&read(path)?, &dims).map_err(|source| BindError::Format {
                    kind: "dataset",
                    name: d.name.clone(),
                    path: path.display().to_string(),
                    source,
                })?;
                let value = Value::tensor(&dims, &mut flat.iter().cloned().map(Value::Num));
                env.ext.datasets.insert(d.name.clone(), value);
                env.datasets.insert(d.name.clone(), flat);
                env.files.push(BoundFile { name: d.name.clone(), role: "dataset", path: (*path).clone() });
            }
            DeclKind::Parameter => {
                let Some(text) = parameters.get(d.name.as_str()) else {
                    if require == Require::All || d.scheme.ty != Ty::Rat {
                        return Err(BindError::Unbound { kind: "parameter", name: d.name.clone() });
                    }
                    continue;
                };
                let value = parse_parameter(&d.name, &d.scheme.ty, text)?;
                let canonical = match &value {
                    Value::Num(q) => {
                        if d.scheme.ty == Ty::Rat {
                            env.rat_parameters.insert(d.name.clone(), q.clone());
                        }
                        format_exact(q)
                    }
                    Value::Bool(b) => b.to_string(),
                    _ => unreachable!("parameters are scalars"),
                };
                env.parameters.insert(d.name.clone(), canonical);
                env.ext.params.insert(d.name.clone(), value);
            }
            _ => {}
        }
    }
    Ok(env)
}

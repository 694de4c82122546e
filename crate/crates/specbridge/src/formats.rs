//! JSON file formats: networks, datasets, loss programs, query trees and
//! witnesses. Rationals are written as `"n/d"` strings; numbers are read
//! from JSON numbers or from decimal or fraction strings.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};
use specbridge_core::loss::{Domain, Logic, LossProgram, LossTerm, Slot};
use specbridge_core::nbe::QuantVar;
use specbridge_core::network::{Activation, Network};
use specbridge_core::rational::{format_exact, format_fraction, parse_decimal, to_f64, Q};
use specbridge_core::verify::{Counterexample, QVar, QueryTree};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{at}: {detail}")]
    Schema { at: String, detail: String },
    #[error("{0}")]
    Network(#[from] specbridge_core::network::NetworkError),
}

fn schema(at: impl Into<String>, detail: impl Into<String>) -> FormatError {
    FormatError::Schema { at: at.into(), detail: detail.into() }
}

/// `"n/d"`.
pub fn rat(q: &Q) -> Value {
    Value::String(format_fraction(q))
}

/// A rational from a JSON number or a decimal/fraction string.
pub fn parse_rat(v: &Value, at: &str) -> Result<Q, FormatError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err(schema(at, "expected a number or a numeric string")),
    };
    parse_decimal(&text).ok_or_else(|| schema(at, format!("`{text}` is not a number")))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a Value, FormatError> {
    obj.get(key).ok_or_else(|| schema(at, format!("missing field `{key}`")))
}

fn object<'a>(v: &'a Value, at: &str) -> Result<&'a Map<String, Value>, FormatError> {
    v.as_object().ok_or_else(|| schema(at, "expected an object"))
}

fn array<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>, FormatError> {
    v.as_array().ok_or_else(|| schema(at, "expected an array"))
}

fn string<'a>(v: &'a Value, at: &str) -> Result<&'a str, FormatError> {
    v.as_str().ok_or_else(|| schema(at, "expected a string"))
}

fn usize_of(v: &Value, at: &str) -> Result<usize, FormatError> {
    v.as_u64().map(|n| n as usize).ok_or_else(|| schema(at, "expected a non-negative integer"))
}

// ---------------------------------------------------------------- networks

/// Parses `{"layers": [{"W": [[..]], "b": [..], "act": "relu"|"id"}, ..]}`.
pub fn parse_network(text: &str) -> Result<Network, FormatError> {
    let v: Value = serde_json::from_str(text)?;
    let root = object(&v, "network")?;
    let layers = array(field(root, "layers", "network")?, "layers")?;
    let mut out = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let at = format!("layers[{l}]");
        let obj = object(layer, &at)?;
        let rows = array(field(obj, "W", &at)?, &format!("{at}.W"))?;
        let weights = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let at = format!("{at}.W[{i}]");
                array(row, &at)?.iter().enumerate().map(|(j, w)| parse_rat(w, &format!("{at}[{j}]"))).collect()
            })
            .collect::<Result<Vec<Vec<Q>>, _>>()?;
        let bias = array(field(obj, "b", &at)?, &format!("{at}.b"))?
            .iter()
            .enumerate()
            .map(|(i, b)| parse_rat(b, &format!("{at}.b[{i}]")))
            .collect::<Result<Vec<Q>, _>>()?;
        let act = match obj.get("act").map(|a| string(a, &format!("{at}.act"))).transpose()? {
            None | Some("id" | "identity" | "linear") => Activation::Identity,
            Some("relu") => Activation::Relu,
            Some(other) => return Err(schema(format!("{at}.act"), format!("unknown activation `{other}`"))),
        };
        out.push((weights, bias, act));
    }
    Ok(Network::new(out)?)
}

/// Writes a network with exact decimal (or fraction) strings.
pub fn network_to_json(net: &Network) -> Value {
    let layers: Vec<Value> = net
        .layers()
        .iter()
        .map(|l| {
            let w: Vec<Value> =
                l.weights.iter().map(|row| Value::Array(row.iter().map(|q| Value::String(format_exact(q))).collect())).collect();
            let b: Vec<Value> = l.bias.iter().map(|q| Value::String(format_exact(q))).collect();
            let act = match l.activation {
                Activation::Identity => "id",
                Activation::Relu => "relu",
            };
            json!({ "W": w, "b": b, "act": act })
        })
        .collect();
    json!({ "layers": layers })
}

// ---------------------------------------------------------------- datasets

/// A nested JSON array of shape `dims`, flattened row-major.
pub fn parse_dataset(text: &str, dims: &[usize]) -> Result<Vec<Q>, FormatError> {
    let v: Value = serde_json::from_str(text)?;
    let mut out = Vec::new();
    flatten(&v, dims, "dataset", &mut out)?;
    Ok(out)
}

fn flatten(v: &Value, dims: &[usize], at: &str, out: &mut Vec<Q>) -> Result<(), FormatError> {
    match dims.split_first() {
        None => {
            out.push(parse_rat(v, at)?);
            Ok(())
        }
        Some((&d, rest)) => {
            let items = array(v, at)?;
            if items.len() != d {
                return Err(schema(at, format!("expected {d} elements, found {}", items.len())));
            }
            for (i, item) in items.iter().enumerate() {
                flatten(item, rest, &format!("{at}[{i}]"), out)?;
            }
            Ok(())
        }
    }
}

// ------------------------------------------------------------ loss programs

pub const LOSS_FORMAT: &str = "specbridge-loss/1";

pub fn loss_program_to_json(lp: &LossProgram) -> Value {
    let logic = match &lp.logic {
        Logic::Yager(p) => json!({ "name": "yager", "p": rat(p) }),
        l => json!({ "name": l.name() }),
    };
    let networks: Vec<Value> =
        lp.networks.iter().map(|s| json!({ "name": s.name, "inputs": s.dims[0], "outputs": s.dims[1] })).collect();
    let datasets: Vec<Value> = lp.datasets.iter().map(|s| json!({ "name": s.name, "dims": s.dims })).collect();
    json!({
        "format": LOSS_FORMAT,
        "property": lp.property,
        "logic": logic,
        "samples": lp.samples,
        "seed": lp.seed,
        "networks": networks,
        "datasets": datasets,
        "parameters": lp.parameters,
        "root": term_to_json(&lp.root),
    })
}

fn binary_tag(t: &LossTerm) -> Option<(&'static str, &LossTerm, &LossTerm)> {
    Some(match t {
        LossTerm::Add(a, b) => ("add", a, b),
        LossTerm::Sub(a, b) => ("sub", a, b),
        LossTerm::Mul(a, b) => ("mul", a, b),
        LossTerm::Div(a, b) => ("div", a, b),
        LossTerm::Max(a, b) => ("max", a, b),
        LossTerm::Min(a, b) => ("min", a, b),
        LossTerm::Indicator(a, b) => ("indicator", a, b),
        _ => return None,
    })
}

fn domain_to_json(d: &Domain) -> Value {
    json!({ "lo": d.lo.iter().map(rat).collect::<Vec<_>>(), "hi": d.hi.iter().map(rat).collect::<Vec<_>>() })
}

fn var_to_json(v: &QuantVar) -> Value {
    json!({ "id": v.id, "name": v.name, "dims": v.dims })
}

pub fn term_to_json(t: &LossTerm) -> Value {
    if let Some((tag, a, b)) = binary_tag(t) {
        return json!({ "node": tag, "args": [term_to_json(a), term_to_json(b)] });
    }
    match t {
        LossTerm::Const(q) => json!({ "node": "const", "value": rat(q) }),
        LossTerm::Var { var, offset } => json!({ "node": "var", "var": var, "offset": offset }),
        LossTerm::Param(name) => json!({ "node": "param", "name": name }),
        LossTerm::Data { name, offset } => json!({ "node": "data", "name": name, "offset": offset }),
        LossTerm::NetworkApply { network, inputs, output } => json!({
            "node": "apply",
            "network": network,
            "inputs": inputs.iter().map(term_to_json).collect::<Vec<_>>(),
            "output": output,
        }),
        LossTerm::Pow(base, p) => json!({ "node": "pow", "base": term_to_json(base), "exponent": rat(p) }),
        LossTerm::SampleForall { id, var, domain, body } | LossTerm::SampleExists { id, var, domain, body } => {
            let tag = if matches!(t, LossTerm::SampleForall { .. }) { "forall" } else { "exists" };
            json!({
                "node": tag,
                "id": id,
                "var": var_to_json(var),
                "domain": domain_to_json(domain),
                "body": term_to_json(body),
            })
        }
        _ => unreachable!("binary nodes handled above"),
    }
}

pub fn parse_loss_program(text: &str) -> Result<LossProgram, FormatError> {
    let v: Value = serde_json::from_str(text)?;
    loss_program_from_json(&v)
}

pub fn loss_program_from_json(v: &Value) -> Result<LossProgram, FormatError> {
    let o = object(v, "program")?;
    if string(field(o, "format", "program")?, "format")? != LOSS_FORMAT {
        return Err(schema("format", format!("expected `{LOSS_FORMAT}`")));
    }
    let logic_obj = object(field(o, "logic", "program")?, "logic")?;
    let logic = match string(field(logic_obj, "name", "logic")?, "logic.name")? {
        "dl2" => Logic::Dl2,
        "godel" => Logic::Godel,
        "lukasiewicz" => Logic::Lukasiewicz,
        "product" => Logic::Product,
        "yager" => Logic::Yager(parse_rat(field(logic_obj, "p", "logic")?, "logic.p")?),
        other => return Err(schema("logic.name", format!("unknown logic `{other}`"))),
    };
    let networks = array(field(o, "networks", "program")?, "networks")?
        .iter()
        .map(|n| {
            let n = object(n, "networks[]")?;
            Ok(Slot {
                name: string(field(n, "name", "networks[]")?, "name")?.into(),
                dims: vec![
                    usize_of(field(n, "inputs", "networks[]")?, "inputs")?,
                    usize_of(field(n, "outputs", "networks[]")?, "outputs")?,
                ],
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    let datasets = array(field(o, "datasets", "program")?, "datasets")?
        .iter()
        .map(|d| {
            let d = object(d, "datasets[]")?;
            Ok(Slot {
                name: string(field(d, "name", "datasets[]")?, "name")?.into(),
                dims: array(field(d, "dims", "datasets[]")?, "dims")?.iter().map(|x| usize_of(x, "dims")).collect::<Result<_, _>>()?,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    let parameters = array(field(o, "parameters", "program")?, "parameters")?
        .iter()
        .map(|p| string(p, "parameters[]").map(String::from))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LossProgram {
        property: string(field(o, "property", "program")?, "property")?.into(),
        logic,
        samples: usize_of(field(o, "samples", "program")?, "samples")?,
        seed: field(o, "seed", "program")?.as_u64().ok_or_else(|| schema("seed", "expected an integer"))?,
        networks,
        datasets,
        parameters,
        root: term_from_json(field(o, "root", "program")?, "root")?,
    })
}

fn domain_from_json(v: &Value, at: &str) -> Result<Domain, FormatError> {
    let o = object(v, at)?;
    let list = |key: &str| -> Result<Vec<Q>, FormatError> {
        array(field(o, key, at)?, at)?.iter().map(|x| parse_rat(x, at)).collect()
    };
    Ok(Domain { lo: list("lo")?, hi: list("hi")? })
}

pub fn term_from_json(v: &Value, at: &str) -> Result<LossTerm, FormatError> {
    let o = object(v, at)?;
    let tag = string(field(o, "node", at)?, at)?;
    let sub = |key: &str| -> Result<Box<LossTerm>, FormatError> { Ok(Box::new(term_from_json(field(o, key, at)?, &format!("{at}.{key}"))?)) };
    let args = || -> Result<(Box<LossTerm>, Box<LossTerm>), FormatError> {
        let a = array(field(o, "args", at)?, at)?;
        if a.len() != 2 {
            return Err(schema(at, "expected two arguments"));
        }
        Ok((Box::new(term_from_json(&a[0], &format!("{at}.args[0]"))?), Box::new(term_from_json(&a[1], &format!("{at}.args[1]"))?)))
    };
    Ok(match tag {
        "const" => LossTerm::Const(parse_rat(field(o, "value", at)?, at)?),
        "var" => LossTerm::Var { var: usize_of(field(o, "var", at)?, at)?, offset: usize_of(field(o, "offset", at)?, at)? },
        "param" => LossTerm::Param(string(field(o, "name", at)?, at)?.into()),
        "data" => LossTerm::Data { name: string(field(o, "name", at)?, at)?.into(), offset: usize_of(field(o, "offset", at)?, at)? },
        "apply" => LossTerm::NetworkApply {
            network: string(field(o, "network", at)?, at)?.into(),
            inputs: array(field(o, "inputs", at)?, at)?
                .iter()
                .enumerate()
                .map(|(i, x)| term_from_json(x, &format!("{at}.inputs[{i}]")))
                .collect::<Result<_, _>>()?,
            output: usize_of(field(o, "output", at)?, at)?,
        },
        "add" | "sub" | "mul" | "div" | "max" | "min" | "indicator" => {
            let (a, b) = args()?;
            match tag {
                "add" => LossTerm::Add(a, b),
                "sub" => LossTerm::Sub(a, b),
                "mul" => LossTerm::Mul(a, b),
                "div" => LossTerm::Div(a, b),
                "max" => LossTerm::Max(a, b),
                "min" => LossTerm::Min(a, b),
                _ => LossTerm::Indicator(a, b),
            }
        }
        "pow" => LossTerm::Pow(sub("base")?, parse_rat(field(o, "exponent", at)?, at)?),
        "forall" | "exists" => {
            let vo = object(field(o, "var", at)?, at)?;
            let var = QuantVar {
                id: usize_of(field(vo, "id", at)?, at)?,
                name: string(field(vo, "name", at)?, at)?.into(),
                dims: array(field(vo, "dims", at)?, at)?.iter().map(|d| usize_of(d, at)).collect::<Result<_, _>>()?,
            };
            let id = usize_of(field(o, "id", at)?, at)?;
            let domain = domain_from_json(field(o, "domain", at)?, at)?;
            let body = sub("body")?;
            if tag == "forall" {
                LossTerm::SampleForall { id, var, domain, body }
            } else {
                LossTerm::SampleExists { id, var, domain, body }
            }
        }
        other => return Err(schema(at, format!("unknown node `{other}`"))),
    })
}

// --------------------------------------------------------------- query trees

pub const TREE_FORMAT: &str = "specbridge-tree/1";

pub fn query_file_name(id: usize) -> String {
    format!("query{id}.txt")
}

fn tree_node_to_json(t: &QueryTree) -> Value {
    match t {
        QueryTree::And(cs) => json!({ "and": cs.iter().map(tree_node_to_json).collect::<Vec<_>>() }),
        QueryTree::Or(cs) => json!({ "or": cs.iter().map(tree_node_to_json).collect::<Vec<_>>() }),
        QueryTree::Leaf(q) => {
            let apps: Vec<Value> = q
                .applications
                .iter()
                .map(|a| json!({ "network": a.network, "inputs": a.inputs, "outputs": a.outputs }))
                .collect();
            json!({
                "leaf": q.id,
                "file": query_file_name(q.id),
                "inputs": q.input_count(),
                "outputs": q.output_count(),
                "applications": apps,
            })
        }
    }
}

pub fn tree_to_json(property: &str, t: &QueryTree) -> Value {
    json!({ "format": TREE_FORMAT, "property": property, "root": tree_node_to_json(t) })
}

/// The and/or structure of a stored tree, with leaf ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeShape {
    And(Vec<TreeShape>),
    Or(Vec<TreeShape>),
    Leaf(usize),
}

impl TreeShape {
    pub fn leaves(&self) -> Vec<usize> {
        match self {
            TreeShape::Leaf(id) => vec![*id],
            TreeShape::And(cs) | TreeShape::Or(cs) => cs.iter().flat_map(TreeShape::leaves).collect(),
        }
    }

    pub fn root_kind(&self) -> &'static str {
        match self {
            TreeShape::And(_) => "and",
            TreeShape::Or(_) => "or",
            TreeShape::Leaf(_) => "leaf",
        }
    }
}

pub fn parse_tree(text: &str) -> Result<TreeShape, FormatError> {
    let v: Value = serde_json::from_str(text)?;
    let o = object(&v, "tree")?;
    if string(field(o, "format", "tree")?, "format")? != TREE_FORMAT {
        return Err(schema("format", format!("expected `{TREE_FORMAT}`")));
    }
    shape_from_json(field(o, "root", "tree")?, "root")
}

fn shape_from_json(v: &Value, at: &str) -> Result<TreeShape, FormatError> {
    let o = object(v, at)?;
    if let Some(cs) = o.get("and").or_else(|| o.get("or")) {
        let children =
            array(cs, at)?.iter().enumerate().map(|(i, c)| shape_from_json(c, &format!("{at}[{i}]"))).collect::<Result<_, _>>()?;
        return Ok(if o.contains_key("and") { TreeShape::And(children) } else { TreeShape::Or(children) });
    }
    Ok(TreeShape::Leaf(usize_of(field(o, "leaf", at)?, at)?))
}

pub fn shape_of(t: &QueryTree) -> TreeShape {
    match t {
        QueryTree::And(cs) => TreeShape::And(cs.iter().map(shape_of).collect()),
        QueryTree::Or(cs) => TreeShape::Or(cs.iter().map(shape_of).collect()),
        QueryTree::Leaf(q) => TreeShape::Leaf(q.id),
    }
}

// ----------------------------------------------------------------- witnesses

pub fn assignment_to_json(a: &BTreeMap<QVar, Q>) -> Value {
    Value::Object(a.iter().filter(|(v, _)| v.is_embedding()).map(|(v, q)| (v.to_string(), rat(q))).collect())
}

pub fn assignment_from_json(v: &Value) -> Result<BTreeMap<QVar, Q>, FormatError> {
    let o = object(v, "embedding")?;
    o.iter()
        .map(|(k, q)| {
            let idx: usize = k[1..].parse().map_err(|_| schema("embedding", format!("bad variable `{k}`")))?;
            let var = match &k[..1] {
                "x" => QVar::Input(idx),
                "y" => QVar::Output(idx),
                _ => return Err(schema("embedding", format!("bad variable `{k}`"))),
            };
            Ok((var, parse_rat(q, "embedding")?))
        })
        .collect()
}

/// `{"leaf", "problem": [{"name", "dims", "values", "approx"}], "embedding"}`.
pub fn witness_to_json(c: &Counterexample) -> Value {
    let problem: Vec<Value> = c
        .problem
        .iter()
        .map(|(v, values)| {
            json!({
                "name": v.name,
                "dims": v.dims,
                "values": values.iter().map(rat).collect::<Vec<_>>(),
                "approx": values.iter().map(to_f64).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({ "leaf": c.leaf, "problem": problem, "embedding": assignment_to_json(&c.embedding) })
}

/// Problem-space values of a witness, by variable name.
pub fn witness_values(v: &Value) -> Result<Vec<(String, Vec<Q>)>, FormatError> {
    let o = object(v, "witness")?;
    array(field(o, "problem", "witness")?, "problem")?
        .iter()
        .map(|p| {
            let p = object(p, "problem[]")?;
            let name = string(field(p, "name", "problem[]")?, "name")?.to_string();
            let values = array(field(p, "values", "problem[]")?, "values")?
                .iter()
                .map(|x| parse_rat(x, "values"))
                .collect::<Result<_, _>>()?;
            Ok((name, values))
        })
        .collect()
}

/// Pretty JSON with a trailing newline, as written to files and stdout.
pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialise");
    s.push('\n');
    s
}

//! End-to-end drivers: spec file → typed program → queries, cache,
//! verdicts, loss programs, interface text and simulations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use specbridge_core::frontend::{parse_program, DeclKind, FrontendError, Program, Span};
use specbridge_core::itp::{export_interface, module_name, CacheRef, ExportError, ExportRequest, RenderTable};
use specbridge_core::loss::{compile_loss, eval_loss, grad_loss, LossError, LossOptions, LossProgram, Resources};
use specbridge_core::network::Network;
use specbridge_core::rational::{format_exact, parse_decimal, to_f64, zero, Q};
use specbridge_core::sim::{monte_carlo, Bounds, NetworkController};
use specbridge_core::typecheck::{check_program, TypeError, TypedProgram};
use specbridge_core::verify::{
    compile_queries, evaluate_tree, lift_counterexample, render_query, solve_query, CompiledProperty,
    Counterexample, PropertyStatus, SolveResult, TreeOutcome, VerifyError, DEFAULT_PATTERN_BUDGET,
};
use thiserror::Error;

use crate::bind::{bind_resources, BindError, Bindings, Environment, Require};
use crate::cache::{
    self, check_cache, hash_bytes, load_manifest, locate, record_result, resource_entry, CacheCheck, CacheContents,
    CacheError, CachedFile, LeafResult, Manifest, Parameter, Resource, StaleEntry, HASH_ALGORITHM, MANIFEST_FILE,
    MANIFEST_FORMAT, TREE_FILE,
};
use crate::formats::{
    assignment_from_json, assignment_to_json, parse_network, query_file_name, to_pretty, tree_to_json,
    witness_to_json, FormatError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{file}:{}: {source}", source.span())]
    Frontend { file: String, source: FrontendError },
    #[error("{file}:{}: {source}", source.span)]
    Type { file: String, source: TypeError },
    #[error(transparent)]
    Bind(#[from] BindError),
    #[error("cannot compile property: {0}")]
    Verify(#[from] VerifyError),
    #[error("cannot compile loss: {0}")]
    Loss(#[from] LossError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("no property named `{0}`")]
    UnknownProperty(String),
    #[error("cache is stale: {}", .0.iter().map(|s| format!("{} {} ({})", s.role, s.name, s.reason)).collect::<Vec<_>>().join(", "))]
    Stale(Vec<StaleEntry>),
    #[error("{0}")]
    Mismatch(String),
    #[error("{0}")]
    Usage(String),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Io { .. } => "E-IO",
            PipelineError::Frontend { source, .. } => source.code(),
            PipelineError::Type { source, .. } => source.code(),
            PipelineError::Bind(e) => e.code(),
            PipelineError::Verify(e) => e.code(),
            PipelineError::Loss(e) => e.code(),
            PipelineError::Cache(e) => e.code(),
            PipelineError::Format(_) => "E-FORMAT",
            PipelineError::Export(e) => e.code(),
            PipelineError::UnknownProperty(_) => "E-UNKNOWN-PROPERTY",
            PipelineError::Stale(_) => "E-CACHE-STALE",
            PipelineError::Mismatch(_) => "E-CACHE-MISMATCH",
            PipelineError::Usage(_) => "E-USAGE",
        }
    }

    /// Source position, for errors in the specification.
    pub fn span(&self) -> Option<Span> {
        match self {
            PipelineError::Frontend { source, .. } => Some(source.span()),
            PipelineError::Type { source, .. } => Some(source.span),
            _ => None,
        }
    }

    /// 1 for a stale cache, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Stale(_) => 1,
            _ => 2,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut e = json!({ "code": self.code(), "message": self.to_string() });
        if let Some(s) = self.span() {
            e["span"] = json!({ "line": s.line, "col": s.col });
        }
        if let PipelineError::Stale(list) = self {
            e["stale"] = json!(list);
        }
        json!({ "error": e })
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

/// A parsed and checked specification.
#[derive(Clone, Debug)]
pub struct Spec {
    pub path: PathBuf,
    pub source: String,
    pub program: Program,
    pub typed: TypedProgram,
}

impl Spec {
    pub fn load(path: &Path) -> Result<Spec, PipelineError> {
        let source = fs::read_to_string(path).map_err(io(path))?;
        Spec::from_source(path, source)
    }

    pub fn from_source(path: &Path, source: String) -> Result<Spec, PipelineError> {
        let file = path.display().to_string();
        let program = parse_program(&source).map_err(|source| PipelineError::Frontend { file: file.clone(), source })?;
        let typed = check_program(&program).map_err(|source| PipelineError::Type { file, source })?;
        Ok(Spec { path: path.to_path_buf(), source, program, typed })
    }

    pub fn require_property(&self, name: &str) -> Result<(), PipelineError> {
        match self.typed.decl(name) {
            Some((_, d)) if d.kind == DeclKind::Property => Ok(()),
            _ => Err(PipelineError::UnknownProperty(name.into())),
        }
    }

    pub fn bind(&self, bindings: &Bindings, require: Require) -> Result<Environment, PipelineError> {
        Ok(bind_resources(&self.typed, bindings, require)?)
    }
}

/// Query backend settings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryOptions {
    /// Tightening applied to strict inequalities in query files.
    pub slack: Q,
    pub pattern_budget: usize,
}

impl Default for QueryOptions {
    fn default() -> Self {
        QueryOptions { slack: zero(), pattern_budget: DEFAULT_PATTERN_BUDGET }
    }
}

/// Everything about a manifest except results, stale marks, status and
/// file locations. Results of an earlier run stay valid while this is
/// unchanged.
fn fingerprint(m: &Manifest) -> Value {
    let res: Vec<_> = m.hashed().map(|r| (&r.name, &r.role, &r.hash)).collect();
    json!([m.property, res, m.parameters, m.slack, m.tree.hash, m.queries])
}

/// Compiles `property` into a query tree and writes the cache. Results
/// already in `dir` are kept when nothing they depend on changed.
pub fn compile_to_cache(
    spec: &Spec,
    property: &str,
    env: &Environment,
    dir: &Path,
    opts: &QueryOptions,
) -> Result<(Manifest, CompiledProperty), PipelineError> {
    spec.require_property(property)?;
    let compiled = compile_queries(&spec.typed, property, &env.ext)?;
    let queries: Vec<(String, String)> =
        compiled.tree.leaves().iter().map(|q| (query_file_name(q.id), render_query(q, &opts.slack))).collect();
    let tree_json = to_pretty(&tree_to_json(property, &compiled.tree));

    fs::create_dir_all(dir).map_err(io(dir))?;
    let spec_entry = resource_entry(dir, "spec", "spec", &spec.path).map_err(io(&spec.path))?;
    let mut resources = Vec::new();
    for f in &env.files {
        resources.push(resource_entry(dir, &f.name, f.role, &f.path).map_err(io(&f.path))?);
    }
    resources.sort_by(|a, b| (&a.role, &a.name).cmp(&(&b.role, &b.name)));
    let mut manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        hash_algorithm: HASH_ALGORITHM.into(),
        property: property.into(),
        spec: spec_entry,
        resources,
        parameters: env.parameters.iter().map(|(n, v)| Parameter { name: n.clone(), value: v.clone() }).collect(),
        slack: format_exact(&opts.slack),
        pattern_budget: opts.pattern_budget,
        tree: CachedFile { file: TREE_FILE.into(), hash: hash_bytes(tree_json.as_bytes()) },
        queries: queries
            .iter()
            .map(|(file, text)| cache::QueryEntry {
                leaf: file.trim_start_matches("query").trim_end_matches(".txt").parse().expect("generated name"),
                file: file.clone(),
                hash: hash_bytes(text.as_bytes()),
            })
            .collect(),
        results: compiled.tree.leaves().iter().map(|q| (q.id, LeafResult::Unsolved)).collect(),
        stale: Vec::new(),
        status: String::new(),
    };
    if let Ok(old) = load_manifest(dir) {
        if fingerprint(&old) == fingerprint(&manifest) {
            manifest.results = old.results;
        }
    }
    let manifest = cache::write_cache(dir, &CacheContents { manifest, tree_json, queries })?;
    Ok((manifest, compiled))
}

/// Outcome of a verification run.
#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub property: String,
    pub status: PropertyStatus,
    /// Leaves in tree order with `unsat`, `sat` or `unsolved`.
    pub leaves: Vec<(usize, &'static str)>,
    pub solver_calls: usize,
    pub cache: Option<PathBuf>,
}

impl VerifyReport {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            PropertyStatus::Verified => 0,
            PropertyStatus::Falsified(_) => 1,
            PropertyStatus::Error(_) => 2,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "property": self.property,
            "status": self.status.name(),
            "leaves": self.leaves.iter().map(|(id, r)| json!({ "leaf": id, "result": r })).collect::<Vec<_>>(),
            "solver_calls": self.solver_calls,
        });
        if let Some(dir) = &self.cache {
            v["cache_dir"] = json!(dir.display().to_string());
        }
        match &self.status {
            PropertyStatus::Falsified(c) => v["witness"] = witness_to_json(c),
            PropertyStatus::Error(e) => v["message"] = json!(e),
            PropertyStatus::Verified => {}
        }
        v
    }
}

fn finish(
    spec: &Spec,
    env: &Environment,
    compiled: &CompiledProperty,
    outcome: TreeOutcome,
) -> Result<(PropertyStatus, Option<Counterexample>), PipelineError> {
    Ok(match outcome {
        TreeOutcome::Unsat => (PropertyStatus::Verified, None),
        TreeOutcome::Sat { leaf, embedding } => {
            let query = compiled.tree.leaf(leaf).expect("solved leaf is in the tree");
            let c = lift_counterexample(&spec.typed, compiled, &env.ext, &env.networks, query, &embedding)?;
            (PropertyStatus::Falsified(c.clone()), Some(c))
        }
    })
}

/// Solves the leaves whose results the verdict needs, reusing results
/// stored in the cache and recording new ones as they arrive.
fn solve_cached(
    spec: &Spec,
    env: &Environment,
    compiled: &CompiledProperty,
    manifest: &Manifest,
    dir: &Path,
    budget: usize,
) -> Result<VerifyReport, PipelineError> {
    let mut calls = 0;
    let mut results = manifest.results.clone();
    let outcome = evaluate_tree(&compiled.tree, &mut |q| -> Result<SolveResult, PipelineError> {
        match results.get(&q.id) {
            Some(LeafResult::Unsat) => return Ok(SolveResult::Unsat),
            Some(LeafResult::Sat { embedding, .. }) => return Ok(SolveResult::Sat(assignment_from_json(embedding)?)),
            _ => {}
        }
        calls += 1;
        let r = solve_query(q, &env.networks, budget)?;
        let stored = match &r {
            SolveResult::Unsat => LeafResult::Unsat,
            SolveResult::Sat(a) => LeafResult::Sat { embedding: assignment_to_json(a), witness: None },
        };
        record_result(dir, q.id, stored.clone())?;
        results.insert(q.id, stored);
        Ok(r)
    })?;
    let (status, witness) = finish(spec, env, compiled, outcome)?;
    if let Some(c) = witness {
        let stored = LeafResult::Sat { embedding: assignment_to_json(&c.embedding), witness: Some(witness_to_json(&c)) };
        record_result(dir, c.leaf, stored.clone())?;
        results.insert(c.leaf, stored);
    }
    Ok(VerifyReport {
        property: compiled.property.clone(),
        status,
        leaves: leaf_summary(compiled, &results),
        solver_calls: calls,
        cache: Some(dir.to_path_buf()),
    })
}

fn leaf_summary(compiled: &CompiledProperty, results: &BTreeMap<usize, LeafResult>) -> Vec<(usize, &'static str)> {
    compiled
        .tree
        .leaves()
        .iter()
        .map(|q| {
            let r = match results.get(&q.id) {
                Some(LeafResult::Unsat) => "unsat",
                Some(LeafResult::Sat { .. }) => "sat",
                _ => "unsolved",
            };
            (q.id, r)
        })
        .collect()
}

/// Verifies `property`, through a cache in `dir` if given.
pub fn verify(
    spec: &Spec,
    property: &str,
    env: &Environment,
    dir: Option<&Path>,
    opts: &QueryOptions,
) -> Result<VerifyReport, PipelineError> {
    if let Some(dir) = dir {
        let (manifest, compiled) = compile_to_cache(spec, property, env, dir, opts)?;
        return solve_cached(spec, env, &compiled, &manifest, dir, opts.pattern_budget);
    }
    spec.require_property(property)?;
    let compiled = compile_queries(&spec.typed, property, &env.ext)?;
    let mut results = BTreeMap::new();
    let outcome = evaluate_tree(&compiled.tree, &mut |q| {
        let r = solve_query(q, &env.networks, opts.pattern_budget)?;
        let stored = match &r {
            SolveResult::Unsat => LeafResult::Unsat,
            SolveResult::Sat(_) => LeafResult::Sat { embedding: Value::Null, witness: None },
        };
        results.insert(q.id, stored);
        Ok::<_, PipelineError>(r)
    })?;
    let (status, _) = finish(spec, env, &compiled, outcome)?;
    Ok(VerifyReport {
        property: property.into(),
        status,
        solver_calls: results.len(),
        leaves: leaf_summary(&compiled, &results),
        cache: None,
    })
}

/// Reloads the spec and resources a cache records and rebuilds its
/// bindings.
pub fn reload(dir: &Path, m: &Manifest) -> Result<(Spec, Environment), PipelineError> {
    let spec = Spec::load(&locate(dir, &m.spec))?;
    let mut b = Bindings::default();
    for r in &m.resources {
        let entry = (r.name.clone(), locate(dir, r));
        match r.role.as_str() {
            "network" => b.networks.push(entry),
            "dataset" => b.datasets.push(entry),
            other => return Err(CacheError::Corrupt(format!("unknown resource role `{other}`")).into()),
        }
    }
    b.parameters = m.parameters.iter().map(|p| (p.name.clone(), p.value.clone())).collect();
    let env = spec.bind(&b, Require::All)?;
    Ok((spec, env))
}

/// Finishes verification of an existing cache. Refuses stale or corrupt
/// caches; the recompiled queries must match the stored ones.
pub fn verify_cache(dir: &Path) -> Result<VerifyReport, PipelineError> {
    match check_cache(dir) {
        CacheCheck::Valid => {}
        CacheCheck::Stale(list) => return Err(PipelineError::Stale(list)),
        CacheCheck::Corrupt(why) => return Err(CacheError::Corrupt(why).into()),
    }
    let m = load_manifest(dir)?;
    let (spec, env) = reload(dir, &m)?;
    let slack = parse_decimal(&m.slack).ok_or_else(|| CacheError::Corrupt(format!("bad slack `{}`", m.slack)))?;
    let compiled = compile_queries(&spec.typed, &m.property, &env.ext)?;
    let tree_json = to_pretty(&tree_to_json(&m.property, &compiled.tree));
    let mut same = hash_bytes(tree_json.as_bytes()) == m.tree.hash && compiled.tree.leaves().len() == m.queries.len();
    for q in compiled.tree.leaves() {
        let text = render_query(q, &slack);
        same &= m.queries.iter().any(|e| e.leaf == q.id && e.hash == hash_bytes(text.as_bytes()));
    }
    if !same {
        return Err(PipelineError::Mismatch(
            "recompiling the cached property gives different queries; recompile the cache".into(),
        ));
    }
    solve_cached(&spec, &env, &compiled, &m, dir, m.pattern_budget)
}

/// Compiles `property` to a loss program.
pub fn compile_loss_program(
    spec: &Spec,
    property: &str,
    env: &Environment,
    opts: &LossOptions,
) -> Result<LossProgram, PipelineError> {
    spec.require_property(property)?;
    Ok(compile_loss(&spec.typed, property, &env.ext, opts)?)
}

/// Networks, datasets and parameters for a stand-alone loss program.
#[derive(Clone, Debug, Default)]
pub struct LossResources {
    pub networks: BTreeMap<String, Network>,
    pub datasets: BTreeMap<String, Vec<f64>>,
    pub params: BTreeMap<String, f64>,
}

impl LossResources {
    pub fn view(&self) -> Resources<'_> {
        Resources {
            networks: self.networks.iter().map(|(n, net)| (n.clone(), net)).collect(),
            datasets: self.datasets.clone(),
            params: self.params.clone(),
        }
    }
}

/// Binds resources to a loss program's slots. Every slot must be bound
/// and nothing else.
pub fn bind_loss_resources(lp: &LossProgram, b: &Bindings) -> Result<LossResources, PipelineError> {
    let mut out = LossResources::default();
    for (name, path) in &b.networks {
        let slot = lp
            .networks
            .iter()
            .find(|s| &s.name == name)
            .ok_or_else(|| BindError::Extra { kind: "network", name: name.clone() })?;
        let text = fs::read_to_string(path).map_err(io(path))?;
        let net = parse_network(&text).map_err(|source| BindError::Format {
            kind: "network",
            name: name.clone(),
            path: path.display().to_string(),
            source,
        })?;
        let actual = (net.input_dim(), net.output_dim());
        if [actual.0, actual.1] != slot.dims[..] {
            return Err(BindError::NetworkShape {
                name: name.clone(),
                path: path.display().to_string(),
                expected: (slot.dims[0], slot.dims[1]),
                actual,
            }
            .into());
        }
        out.networks.insert(name.clone(), net);
    }
    for (name, path) in &b.datasets {
        let slot = lp
            .datasets
            .iter()
            .find(|s| &s.name == name)
            .ok_or_else(|| BindError::Extra { kind: "dataset", name: name.clone() })?;
        let text = fs::read_to_string(path).map_err(io(path))?;
        let flat = crate::formats::parse_dataset(&text, &slot.dims).map_err(|source| BindError::Format {
            kind: "dataset",
            name: name.clone(),
            path: path.display().to_string(),
            source,
        })?;
        out.datasets.insert(name.clone(), flat.iter().map(to_f64).collect());
    }
    for (name, text) in &b.parameters {
        if !lp.parameters.contains(name) {
            return Err(BindError::Extra { kind: "parameter", name: name.clone() }.into());
        }
        let q = parse_decimal(text).ok_or_else(|| BindError::Parameter {
            name: name.clone(),
            ty: "Rat".into(),
            value: text.clone(),
        })?;
        out.params.insert(name.clone(), to_f64(&q));
    }
    let missing = |kind: &'static str, name: &String| BindError::Unbound { kind, name: name.clone() };
    for s in &lp.networks {
        if !out.networks.contains_key(&s.name) {
            return Err(missing("network", &s.name).into());
        }
    }
    for s in &lp.datasets {
        if !out.datasets.contains_key(&s.name) {
            return Err(missing("dataset", &s.name).into());
        }
    }
    for p in &lp.parameters {
        if !out.params.contains_key(p) {
            return Err(missing("parameter", p).into());
        }
    }
    Ok(out)
}

/// Loss value, and the gradient with respect to every network parameter
/// when `gradient` is set.
pub fn evaluate_loss(
    lp: &LossProgram,
    res: &LossResources,
    seed: u64,
    samples: usize,
    gradient: bool,
) -> Result<Value, PipelineError> {
    let view = res.view();
    if !gradient {
        let value = eval_loss(lp, &view, seed, samples)?;
        return Ok(json!({ "property": lp.property, "logic": lp.logic.name(), "seed": seed, "samples": samples, "loss": value }));
    }
    let g = grad_loss(lp, &view, seed, samples)?;
    let grads: serde_json::Map<String, Value> = g.grads.iter().map(|(n, v)| (n.clone(), json!(v))).collect();
    Ok(json!({
        "property": lp.property,
        "logic": lp.logic.name(),
        "seed": seed,
        "samples": samples,
        "loss": g.value,
        "gradient": grads,
        "kink_margin": g.kink_margin,
    }))
}

/// Renders the interface module for `property` from a verified cache.
pub fn export_itp(
    spec: &Spec,
    property: &str,
    dir: &Path,
    module: Option<&str>,
    allow_unverified: bool,
    table: &RenderTable,
) -> Result<String, PipelineError> {
    spec.require_property(property)?;
    let status = match check_cache(dir) {
        CacheCheck::Corrupt(why) => return Err(CacheError::Corrupt(why).into()),
        _ => cache::read_status(dir)?,
    };
    let m = load_manifest(dir)?;
    if m.property != property {
        return Err(PipelineError::Mismatch(format!("cache {} holds property `{}`, not `{property}`", dir.display(), m.property)));
    }
    if hash_bytes(spec.source.as_bytes()) != m.spec.hash {
        return Err(PipelineError::Mismatch(format!("{} is not the specification cached in {}", spec.path.display(), dir.display())));
    }
    let manifest_bytes = fs::read(dir.join(MANIFEST_FILE)).map_err(io(dir))?;
    let cache_ref = CacheRef {
        dir: dir.display().to_string(),
        hash_algorithm: HASH_ALGORITHM.into(),
        manifest_hash: hash_bytes(&manifest_bytes),
    };
    let stem = spec.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let module = module.map_or_else(|| module_name(&stem), String::from);
    let source_name = spec.path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let req = ExportRequest {
        property,
        module: &module,
        source_name: &source_name,
        cache: &cache_ref,
        status: status.name(),
        allow_unverified,
    };
    Ok(export_interface(&spec.program, table, &req)?)
}

/// Settings for a Monte Carlo run of the wind-controller model.
#[derive(Clone, Debug)]
pub struct SimOptions {
    pub runs: usize,
    pub steps: usize,
    pub seed: u64,
    pub bounds: Bounds,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { runs: 1000, steps: 100, seed: 0, bounds: Bounds::default() }
    }
}

/// Runs the controller network and reports how many runs stayed on the
/// road. The second value is true when every run did.
pub fn simulate(net: &Network, opts: &SimOptions) -> Result<(Value, bool), PipelineError> {
    let mut c = NetworkController::new(net).map_err(FormatError::from)?;
    let outcomes = monte_carlo(opts.runs, opts.steps, opts.seed, &opts.bounds, &mut c);
    let off: Vec<usize> = outcomes.iter().filter(|o| !o.on_road).map(|o| o.run).collect();
    let guard: Vec<Value> = outcomes
        .iter()
        .filter_map(|o| o.guard_violation.map(|s| json!({ "run": o.run, "step": s })))
        .collect();
    let worst = outcomes.iter().map(|o| o.max_abs_position.clone()).max().unwrap_or_else(zero);
    let report = json!({
        "runs": opts.runs,
        "steps": opts.steps,
        "seed": opts.seed,
        "bounds": { "wind_shift": format_exact(&opts.bounds.wind_shift), "sensor_error": format_exact(&opts.bounds.sensor_error) },
        "on_road": opts.runs - off.len(),
        "off_road_runs": off,
        "guard_violations": guard,
        "max_abs_position": format_exact(&worst),
        "max_abs_position_approx": to_f64(&worst),
    });
    Ok((report, off.is_empty()))
}

/// Renders a stored cache check as JSON.
pub fn check_json(dir: &Path, check: &CacheCheck) -> Value {
    let mut v = json!({ "cache_dir": dir.display().to_string(), "status": check.name() });
    match check {
        CacheCheck::Valid => {}
        CacheCheck::Stale(list) => v["stale"] = json!(list),
        CacheCheck::Corrupt(why) => v["reason"] = json!(why),
    }
    v
}

/// Resource entries of a manifest, for reports.
pub fn resources_json(m: &Manifest) -> Value {
    json!(m.hashed().map(|r: &Resource| json!({ "name": r.name, "role": r.role, "hash": r.hash })).collect::<Vec<_>>())
}

//! Command-line driver. JSON results go to stdout; diagnostics, including
//! the JSON error object, go to stderr.
//! Exit codes: 0 success, 1 falsified or stale, 2 usage or compile error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use specbridge_core::frontend::print_program;
use specbridge_core::itp::RenderTable;
use specbridge_core::loss::{Logic, LossOptions};
use specbridge_core::rational::{parse_decimal, Q};
use specbridge_core::sim::Bounds;
use specbridge_core::verify::DEFAULT_PATTERN_BUDGET;

use crate::bind::{parse_binding, Bindings, Require};
use crate::cache::{check_cache, load_manifest, read_status, CacheStatus};
use crate::formats::{loss_program_to_json, parse_loss_program, parse_network, shape_of, to_pretty};
use crate::pipeline::{
    bind_loss_resources, check_json, compile_loss_program, compile_to_cache, evaluate_loss, export_itp, resources_json,
    simulate, verify, verify_cache, PipelineError, QueryOptions, SimOptions, Spec,
};

#[derive(Debug, Parser)]
#[command(name = "specbridge", version, about = "Compile problem-space specifications of neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and name-resolve a specification.
    Parse {
        file: PathBuf,
        /// Print the parsed program instead of a declaration summary.
        #[arg(long)]
        dump_ast: bool,
    },
    /// Type-check a specification and list its declarations.
    Check { file: PathBuf },
    /// Compile a property to a loss program, a query cache or an
    /// interface module.
    Compile(CompileArgs),
    /// Verify a property, or finish verifying an existing cache.
    Verify(VerifyArgs),
    /// Rehash a cache's resources without solving anything.
    CheckCache {
        #[arg(long)]
        cache_dir: PathBuf,
    },
    /// Report the verdict stored in a cache.
    Status {
        #[arg(long)]
        cache_dir: PathBuf,
    },
    /// Run the wind-controller model with a controller network.
    Simulate(SimulateArgs),
    /// Evaluate a loss program, optionally with its gradient.
    LossEval(LossEvalArgs),
    /// Export a verified property as an interface module.
    Export(ExportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Loss,
    Queries,
    Itp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LogicName {
    Dl2,
    Godel,
    Lukasiewicz,
    Product,
    Yager,
}

#[derive(Debug, Args, Default)]
pub struct ResourceArgs {
    /// Bind a `@network` declaration to a JSON network file.
    #[arg(long = "network", value_name = "NAME=PATH", value_parser = parse_binding)]
    pub networks: Vec<(String, String)>,
    /// Bind a `@dataset` declaration to a JSON tensor file.
    #[arg(long = "dataset", value_name = "NAME=PATH", value_parser = parse_binding)]
    pub datasets: Vec<(String, String)>,
    /// Bind a `@parameter` declaration to a value.
    #[arg(long = "parameter", value_name = "NAME=VALUE", value_parser = parse_binding)]
    pub parameters: Vec<(String, String)>,
}

impl ResourceArgs {
    pub fn bindings(&self) -> Bindings {
        let path = |v: &Vec<(String, String)>| v.iter().map(|(n, p)| (n.clone(), PathBuf::from(p))).collect();
        Bindings { networks: path(&self.networks), datasets: path(&self.datasets), parameters: self.parameters.clone() }
    }
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long, value_enum, default_value = "dl2")]
    pub logic: LogicName,
    /// Exponent for the Yager logic.
    #[arg(long, default_value = "2")]
    pub yager_p: String,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample every dimension from the fallback interval instead of
    /// absorbing bound atoms into sampling domains.
    #[arg(long)]
    pub no_domains: bool,
    /// Sampling interval `LO,HI` for dimensions the property leaves
    /// unbounded.
    #[arg(long, value_name = "LO,HI")]
    pub fallback: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    pub file: PathBuf,
    pub property: String,
    #[arg(long, value_enum)]
    pub target: Target,
    #[command(flatten)]
    pub resources: ResourceArgs,
    /// Cache directory (queries, itp).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Output file (loss, itp); stdout when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "0")]
    pub slack: String,
    #[arg(long, default_value_t = DEFAULT_PATTERN_BUDGET)]
    pub pattern_budget: usize,
    #[command(flatten)]
    pub loss: LossArgs,
    #[command(flatten)]
    pub itp: ItpArgs,
}

#[derive(Debug, Args)]
pub struct ItpArgs {
    /// Module name; derived from the file name when absent.
    #[arg(long)]
    pub module: Option<String>,
    /// Export even when the cache is not Verified, marked as unchecked.
    #[arg(long)]
    pub allow_unverified: bool,
    /// Override a rendering table entry.
    #[arg(long = "render", value_name = "KEY=TEXT", value_parser = parse_binding)]
    pub render: Vec<(String, String)>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Specification; omit to finish verifying `--cache-dir`.
    pub file: Option<PathBuf>,
    pub property: Option<String>,
    #[command(flatten)]
    pub resources: ResourceArgs,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, default_value = "0")]
    pub slack: String,
    #[arg(long, default_value_t = DEFAULT_PATTERN_BUDGET)]
    pub pattern_budget: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Controller network, 2 inputs to 1 output.
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "1")]
    pub wind_bound: String,
    #[arg(long, default_value = "0.25")]
    pub sensor_bound: String,
}

#[derive(Debug, Args)]
pub struct LossEvalArgs {
    #[arg(long)]
    pub loss_program: PathBuf,
    #[command(flatten)]
    pub resources: ResourceArgs,
    /// Defaults to the program's own seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to the program's own sample count.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Also report the gradient with respect to network parameters.
    #[arg(long)]
    pub grad: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    pub file: PathBuf,
    pub property: String,
    #[arg(long, value_enum, default_value = "itp")]
    pub target: ExportTarget,
    #[arg(long)]
    pub cache_dir: PathBuf,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub itp: ItpArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExportTarget {
    Itp,
}

/// What a command produced: text for stdout and an exit code.
struct Output {
    stdout: String,
    code: i32,
}

impl Output {
    fn json(v: &Value, code: i32) -> Self {
        Output { stdout: to_pretty(v), code }
    }
}

fn usage(msg: impl Into<String>) -> PipelineError {
    PipelineError::Usage(msg.into())
}

fn rational(flag: &str, text: &str) -> Result<Q, PipelineError> {
    parse_decimal(text).ok_or_else(|| usage(format!("--{flag}: `{text}` is not a rational number")))
}

fn query_options(slack: &str, budget: usize) -> Result<QueryOptions, PipelineError> {
    let slack = rational("slack", slack)?;
    if slack < Q::from_integer(0.into()) {
        return Err(usage("--slack must be non-negative"));
    }
    Ok(QueryOptions { slack, pattern_budget: budget })
}

fn loss_options(a: &LossArgs) -> Result<LossOptions, PipelineError> {
    let logic = match a.logic {
        LogicName::Dl2 => Logic::Dl2,
        LogicName::Godel => Logic::Godel,
        LogicName::Lukasiewicz => Logic::Lukasiewicz,
        LogicName::Product => Logic::Product,
        LogicName::Yager => {
            let p = rational("yager-p", &a.yager_p)?;
            if p <= Q::from_integer(0.into()) {
                return Err(usage("--yager-p must be positive"));
            }
            Logic::Yager(p)
        }
    };
    let fallback = match &a.fallback {
        None if a.no_domains => Some(LossOptions::default_fallback()),
        None => None,
        Some(s) => {
            let (lo, hi) = s.split_once(',').ok_or_else(|| usage("--fallback expects LO,HI"))?;
            let (lo, hi) = (rational("fallback", lo.trim())?, rational("fallback", hi.trim())?);
            if lo > hi {
                return Err(usage("--fallback: LO must not exceed HI"));
            }
            Some((lo, hi))
        }
    };
    Ok(LossOptions {
        logic,
        fallback,
        extract_domains: !a.no_domains,
        samples: a.samples,
        seed: a.seed,
        ..LossOptions::default()
    })
}

fn render_table(overrides: &[(String, String)]) -> Result<RenderTable, PipelineError> {
    let mut t = RenderTable::default();
    for (k, v) in overrides {
        t.set(k, v).map_err(PipelineError::Export)?;
    }
    Ok(t)
}

fn write_out(out: Option<&Path>, text: String) -> Result<Output, PipelineError> {
    match out {
        None => Ok(Output { stdout: text, code: 0 }),
        Some(p) => {
            fs::write(p, text).map_err(|source| PipelineError::Io { path: p.display().to_string(), source })?;
            Ok(Output::json(&json!({ "written": p.display().to_string() }), 0))
        }
    }
}

fn status_json(status: &CacheStatus) -> Value {
    let mut v = json!({ "status": status.name() });
    match status {
        CacheStatus::Verified => {}
        CacheStatus::Falsified { leaf, embedding, witness } => {
            v["leaf"] = json!(leaf);
            v["embedding"] = embedding.clone();
            if let Some(w) = witness {
                v["witness"] = w.clone();
            }
        }
        CacheStatus::Error(e) => v["message"] = json!(e),
    }
    v
}

fn execute(cmd: Command) -> Result<Output, PipelineError> {
    match cmd {
        Command::Parse { file, dump_ast } => {
            let spec = Spec::load(&file)?;
            if dump_ast {
                return Ok(Output { stdout: print_program(&spec.program), code: 0 });
            }
            let decls: Vec<Value> = spec
                .program
                .decls
                .iter()
                .map(|d| json!({ "name": d.name, "kind": d.kind.as_str(), "line": d.span.line }))
                .collect();
            Ok(Output::json(&json!({ "file": file.display().to_string(), "decls": decls }), 0))
        }
        Command::Check { file } => {
            let spec = Spec::load(&file)?;
            let decls: Vec<Value> = spec
                .typed
                .decls
                .iter()
                .map(|d| json!({ "name": d.name, "kind": d.kind.as_str(), "type": d.scheme.ty.to_string() }))
                .collect();
            let props: Vec<&str> = spec.typed.properties().map(|d| d.name.as_str()).collect();
            Ok(Output::json(&json!({ "file": file.display().to_string(), "decls": decls, "properties": props }), 0))
        }
        Command::Compile(a) => {
            let spec = Spec::load(&a.file)?;
            match a.target {
                Target::Loss => {
                    let env = spec.bind(&a.resources.bindings(), Require::Partial)?;
                    let lp = compile_loss_program(&spec, &a.property, &env, &loss_options(&a.loss)?)?;
                    write_out(a.out.as_deref(), to_pretty(&loss_program_to_json(&lp)))
                }
                Target::Queries => {
                    let dir = a.cache_dir.ok_or_else(|| usage("--target queries needs --cache-dir"))?;
                    let env = spec.bind(&a.resources.bindings(), Require::All)?;
                    let opts = query_options(&a.slack, a.pattern_budget)?;
                    let (m, compiled) = compile_to_cache(&spec, &a.property, &env, &dir, &opts)?;
                    let shape = shape_of(&compiled.tree);
                    Ok(Output::json(
                        &json!({
                            "property": a.property,
                            "cache_dir": dir.display().to_string(),
                            "root": shape.root_kind(),
                            "leaves": m.queries.iter().map(|q| json!({ "leaf": q.leaf, "file": q.file })).collect::<Vec<_>>(),
                            "resources": resources_json(&m),
                            "status": m.status,
                        }),
                        0,
                    ))
                }
                Target::Itp => {
                    let dir = a.cache_dir.ok_or_else(|| usage("--target itp needs --cache-dir of a verified cache"))?;
                    let table = render_table(&a.itp.render)?;
                    let text =
                        export_itp(&spec, &a.property, &dir, a.itp.module.as_deref(), a.itp.allow_unverified, &table)?;
                    write_out(a.out.as_deref(), text)
                }
            }
        }
        Command::Verify(a) => {
            let report = match (a.file, a.property) {
                (Some(file), Some(property)) => {
                    let spec = Spec::load(&file)?;
                    let env = spec.bind(&a.resources.bindings(), Require::All)?;
                    let opts = query_options(&a.slack, a.pattern_budget)?;
                    verify(&spec, &property, &env, a.cache_dir.as_deref(), &opts)?
                }
                (None, None) => {
                    let dir = a.cache_dir.ok_or_else(|| usage("verify needs FILE PROPERTY or --cache-dir"))?;
                    if !a.resources.bindings().networks.is_empty()
                        || !a.resources.parameters.is_empty()
                        || !a.resources.datasets.is_empty()
                    {
                        return Err(usage("resources of a cache come from its manifest; drop the bindings"));
                    }
                    verify_cache(&dir)?
                }
                _ => return Err(usage("verify needs both FILE and PROPERTY")),
            };
            Ok(Output::json(&report.to_json(), report.exit_code()))
        }
        Command::CheckCache { cache_dir } => {
            let check = check_cache(&cache_dir);
            Ok(Output::json(&check_json(&cache_dir, &check), check.exit_code()))
        }
        Command::Status { cache_dir } => {
            let status = read_status(&cache_dir)?;
            let m = load_manifest(&cache_dir)?;
            let mut v = status_json(&status);
            v["property"] = json!(m.property);
            let code = match status {
                CacheStatus::Verified => 0,
                CacheStatus::Falsified { .. } => 1,
                CacheStatus::Error(_) => 2,
            };
            Ok(Output::json(&v, code))
        }
        Command::Simulate(a) => {
            let text = fs::read_to_string(&a.network)
                .map_err(|source| PipelineError::Io { path: a.network.display().to_string(), source })?;
            let net = parse_network(&text)?;
            let bounds = Bounds {
                wind_shift: rational("wind-bound", &a.wind_bound)?,
                sensor_error: rational("sensor-bound", &a.sensor_bound)?,
            };
            if bounds.wind_shift < Q::from_integer(0.into()) || bounds.sensor_error < Q::from_integer(0.into()) {
                return Err(usage("bounds must be non-negative"));
            }
            let opts = SimOptions { runs: a.runs, steps: a.steps, seed: a.seed, bounds };
            let (report, ok) = simulate(&net, &opts)?;
            Ok(Output::json(&report, if ok { 0 } else { 1 }))
        }
        Command::LossEval(a) => {
            let text = fs::read_to_string(&a.loss_program)
                .map_err(|source| PipelineError::Io { path: a.loss_program.display().to_string(), source })?;
            let lp = parse_loss_program(&text)?;
            let res = bind_loss_resources(&lp, &a.resources.bindings())?;
            let seed = a.seed.unwrap_or(lp.seed);
            let samples = a.samples.unwrap_or(lp.samples);
            let v = evaluate_loss(&lp, &res, seed, samples, a.grad)?;
            Ok(Output::json(&v, 0))
        }
        Command::Export(a) => {
            let spec = Spec::load(&a.file)?;
            let table = render_table(&a.itp.render)?;
            let text =
                export_itp(&spec, &a.property, &a.cache_dir, a.itp.module.as_deref(), a.itp.allow_unverified, &table)?;
            write_out(a.out.as_deref(), text)
        }
    }
}

/// Runs the driver on `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = write!(stdout, "{e}");
            } else {
                let _ = write!(stderr, "{e}");
            }
            return code;
        }
    };
    match execute(cli.command) {
        Ok(out) => {
            let _ = stdout.write_all(out.stdout.as_bytes());
            out.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error[{}]: {e}", e.code());
            let _ = stderr.write_all(to_pretty(&e.to_json()).as_bytes());
            e.exit_code()
        }
    }
}

//! The verification cache: a directory holding the query files, the
//! and/or tree, and a manifest with the location and content hash of the
//! specification and every external resource, plus per-leaf results.
//!
//! `check_cache` rehashes the resources without solving anything;
//! `read_status` derives the verdict from the manifest alone.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::formats::{parse_tree, TreeShape};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TREE_FILE: &str = "tree.json";
pub const MANIFEST_FORMAT: &str = "specbridge-cache/1";
pub const HASH_ALGORITHM: &str = "sha256";

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache directory {0}: {1}")]
    Io(String, std::io::Error),
    #[error("cache is corrupt: {0}")]
    Corrupt(String),
    #[error("no leaf {0} in the cached query tree")]
    UnknownLeaf(usize),
}

impl CacheError {
    pub fn code(&self) -> &'static str {
        match self {
            CacheError::Io(..) => "E-IO",
            CacheError::Corrupt(_) => "E-CACHE-CORRUPT",
            CacheError::UnknownLeaf(_) => "E-UNKNOWN-LEAF",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CacheError + '_ {
    move |e| CacheError::Io(path.display().to_string(), e)
}

/// A hashed file outside the cache.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    pub name: String,
    /// `spec`, `network` or `dataset`.
    pub role: String,
    pub path_abs: String,
    /// Relative to the cache directory; tried first on re-check.
    pub path_rel: String,
    pub hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: String,
}

/// A file inside the cache.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedFile {
    pub file: String,
    pub hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryEntry {
    pub leaf: usize,
    pub file: String,
    pub hash: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "lowercase")]
pub enum LeafResult {
    Unsolved,
    Unsat,
    Sat {
        embedding: Value,
        /// Problem-space witness, once lifted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        witness: Option<Value>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub hash_algorithm: String,
    pub property: String,
    pub spec: Resource,
    pub resources: Vec<Resource>,
    pub parameters: Vec<Parameter>,
    pub slack: String,
    pub pattern_budget: usize,
    pub tree: CachedFile,
    pub queries: Vec<QueryEntry>,
    pub results: BTreeMap<usize, LeafResult>,
    /// Names of resources found changed or missing by the last check.
    pub stale: Vec<String>,
    /// Verdict derived from `results`, refreshed on every write.
    pub status: String,
}

impl Manifest {
    /// The spec followed by the other resources.
    pub fn hashed(&self) -> impl Iterator<Item = &Resource> {
        std::iter::once(&self.spec).chain(&self.resources)
    }
}

/// Everything `write_cache` puts on disk.
#[derive(Clone, Debug)]
pub struct CacheContents {
    pub manifest: Manifest,
    pub tree_json: String,
    /// `(file name, text)` per leaf.
    pub queries: Vec<(String, String)>,
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CacheError> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, &target).map_err(io_err(&target))
}

fn manifest_bytes(dir: &Path, m: &Manifest) -> Vec<u8> {
    let mut m = m.clone();
    m.status = derive_status(dir, &m).name().to_string();
    let mut s = serde_json::to_string_pretty(&m).expect("manifest serialises");
    s.push('\n');
    s.into_bytes()
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), CacheError> {
    write_atomic(dir, MANIFEST_FILE, &manifest_bytes(dir, m))
}

/// Writes query files and the tree first, the manifest last. The hashes
/// of `tree_json` and the query texts are filled in here.
pub fn write_cache(dir: &Path, contents: &CacheContents) -> Result<Manifest, CacheError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut m = contents.manifest.clone();
    m.queries.clear();
    for (file, text) in &contents.queries {
        write_atomic(dir, file, text.as_bytes())?;
        let leaf = file
            .trim_start_matches("query")
            .trim_end_matches(".txt")
            .parse()
            .map_err(|_| CacheError::Corrupt(format!("bad query file name `{file}`")))?;
        m.queries.push(QueryEntry { leaf, file: file.clone(), hash: hash_bytes(text.as_bytes()) });
    }
    write_atomic(dir, TREE_FILE, contents.tree_json.as_bytes())?;
    m.tree = CachedFile { file: TREE_FILE.into(), hash: hash_bytes(contents.tree_json.as_bytes()) };
    write_manifest(dir, &m)?;
    m.status = derive_status(dir, &m).name().to_string();
    Ok(m)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest, CacheError> {
    let path = dir.join(MANIFEST_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CacheError::Corrupt(format!("{MANIFEST_FILE} is missing")))
        }
        Err(e) => return Err(io_err(&path)(e)),
    };
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| CacheError::Corrupt(format!("{MANIFEST_FILE} is malformed: {e}")))?;
    if m.format != MANIFEST_FORMAT {
        return Err(CacheError::Corrupt(format!("unknown manifest format `{}`", m.format)));
    }
    if m.hash_algorithm != HASH_ALGORITHM {
        return Err(CacheError::Corrupt(format!("unsupported hash algorithm `{}`", m.hash_algorithm)));
    }
    Ok(m)
}

/// Reads and checks `tree.json` and the query files against the manifest.
pub fn load_tree(dir: &Path, m: &Manifest) -> Result<TreeShape, CacheError> {
    let read = |file: &str| -> Result<Vec<u8>, CacheError> {
        fs::read(dir.join(file)).map_err(|_| CacheError::Corrupt(format!("{file} is missing")))
    };
    let bytes = read(&m.tree.file)?;
    if hash_bytes(&bytes) != m.tree.hash {
        return Err(CacheError::Corrupt(format!("{} does not match its recorded hash", m.tree.file)));
    }
    let text = String::from_utf8(bytes).map_err(|_| CacheError::Corrupt(format!("{} is not UTF-8", m.tree.file)))?;
    let shape = parse_tree(&text).map_err(|e| CacheError::Corrupt(format!("{}: {e}", m.tree.file)))?;
    let mut leaves = shape.leaves();
    leaves.sort_unstable();
    let mut listed: Vec<usize> = m.queries.iter().map(|q| q.leaf).collect();
    listed.sort_unstable();
    if leaves != listed {
        return Err(CacheError::Corrupt("tree leaves and query files disagree".into()));
    }
    for q in &m.queries {
        if hash_bytes(&read(&q.file)?) != q.hash {
            return Err(CacheError::Corrupt(format!("{} does not match its recorded hash", q.file)));
        }
    }
    Ok(shape)
}

/// Where a resource is now: the relative path if it exists, else the
/// absolute one.
pub fn locate(dir: &Path, r: &Resource) -> PathBuf {
    let rel = dir.join(&r.path_rel);
    if rel.exists() {
        rel
    } else {
        PathBuf::from(&r.path_abs)
    }
}

/// `target` relative to directory `base`; both are made absolute first.
pub fn relative_path(base: &Path, target: &Path) -> PathBuf {
    let base = absolute(base);
    let target = absolute(target);
    let b: Vec<Component> = base.components().collect();
    let t: Vec<Component> = target.components().collect();
    let common = b.iter().zip(&t).take_while(|(x, y)| x == y).count();
    let mut out = PathBuf::new();
    for _ in common..b.len() {
        out.push("..");
    }
    for c in &t[common..] {
        out.push(c.as_os_str());
    }
    out
}

/// Absolute and lexically normalised, resolving symlinks when the path
/// exists.
pub fn absolute(p: &Path) -> PathBuf {
    if let Ok(c) = fs::canonicalize(p) {
        return c;
    }
    let joined = if p.is_absolute() { p.to_path_buf() } else { std::env::current_dir().unwrap_or_default().join(p) };
    let mut out = PathBuf::new();
    for c in joined.components() {
        match c {
            Component::ParentDir => {
                out.pop();
            }
            Component::CurDir => {}
            c => out.push(c.as_os_str()),
        }
    }
    out
}

/// Builds a manifest entry for `path`, hashing its current bytes.
pub fn resource_entry(dir: &Path, name: &str, role: &str, path: &Path) -> Result<Resource, std::io::Error> {
    let bytes = fs::read(path)?;
    let abs = absolute(path);
    fs::create_dir_all(dir)?;
    Ok(Resource {
        name: name.into(),
        role: role.into(),
        path_abs: abs.display().to_string(),
        path_rel: relative_path(dir, &abs).display().to_string(),
        hash: hash_bytes(&bytes),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StaleEntry {
    pub name: String,
    pub role: String,
    /// `changed` or `missing`.
    pub reason: String,
    pub path: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CacheCheck {
    Valid,
    Stale(Vec<StaleEntry>),
    Corrupt(String),
}

impl CacheCheck {
    pub fn name(&self) -> &'static str {
        match self {
            CacheCheck::Valid => "Valid",
            CacheCheck::Stale(_) => "Stale",
            CacheCheck::Corrupt(_) => "Corrupt",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CacheCheck::Valid => 0,
            CacheCheck::Stale(_) => 1,
            CacheCheck::Corrupt(_) => 2,
        }
    }
}

/// Rehashes every resource and the cache's own files. Records the stale
/// set in the manifest, so that `read_status` reports a stale cache even
/// though it never leaves the cache directory.
pub fn check_cache(dir: &Path) -> CacheCheck {
    let mut m = match load_manifest(dir) {
        Ok(m) => m,
        Err(CacheError::Corrupt(why)) => return CacheCheck::Corrupt(why),
        Err(e) => return CacheCheck::Corrupt(e.to_string()),
    };
    if let Err(e) = load_tree(dir, &m) {
        return CacheCheck::Corrupt(match e {
            CacheError::Corrupt(why) => why,
            e => e.to_string(),
        });
    }
    let mut stale = Vec::new();
    for r in m.hashed() {
        let path = locate(dir, r);
        let reason = match fs::read(&path) {
            Ok(bytes) if hash_bytes(&bytes) == r.hash => continue,
            Ok(_) => "changed",
            Err(_) => "missing",
        };
        stale.push(StaleEntry { name: r.name.clone(), role: r.role.clone(), reason: reason.into(), path: path.display().to_string() });
    }
    let names: Vec<String> = stale.iter().map(|s| s.name.clone()).collect();
    if names != m.stale {
        m.stale = names;
        if let Err(e) = write_manifest(dir, &m) {
            return CacheCheck::Corrupt(e.to_string());
        }
    }
    if stale.is_empty() {
        CacheCheck::Valid
    } else {
        CacheCheck::Stale(stale)
    }
}

/// Stores one leaf's result.
pub fn record_result(dir: &Path, leaf: usize, result: LeafResult) -> Result<(), CacheError> {
    let mut m = load_manifest(dir)?;
    if !m.queries.iter().any(|q| q.leaf == leaf) {
        return Err(CacheError::UnknownLeaf(leaf));
    }
    m.results.insert(leaf, result);
    write_manifest(dir, &m)
}

/// Verdict recomputed from stored results.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    Verified,
    Falsified { leaf: usize, embedding: Value, witness: Option<Value> },
    Error(String),
}

impl CacheStatus {
    pub fn name(&self) -> &'static str {
        match self {
            CacheStatus::Verified => "Verified",
            CacheStatus::Falsified { .. } => "Falsified",
            CacheStatus::Error(_) => "Error",
        }
    }
}

enum Tri {
    Sat(usize),
    Unsat,
    Unknown(usize),
}

fn eval_shape(t: &TreeShape, results: &BTreeMap<usize, LeafResult>) -> Tri {
    match t {
        TreeShape::Leaf(id) => match results.get(id) {
            Some(LeafResult::Sat { .. }) => Tri::Sat(*id),
            Some(LeafResult::Unsat) => Tri::Unsat,
            Some(LeafResult::Unsolved) | None => Tri::Unknown(*id),
        },
        TreeShape::Or(cs) => {
            let mut unknown = None;
            for c in cs {
                match eval_shape(c, results) {
                    Tri::Sat(id) => return Tri::Sat(id),
                    Tri::Unknown(id) => {
                        unknown.get_or_insert(id);
                    }
                    Tri::Unsat => {}
                }
            }
            unknown.map_or(Tri::Unsat, Tri::Unknown)
        }
        TreeShape::And(cs) => {
            let mut unknown = None;
            let mut first = None;
            for c in cs {
                match eval_shape(c, results) {
                    Tri::Unsat => return Tri::Unsat,
                    Tri::Unknown(id) => {
                        unknown.get_or_insert(id);
                    }
                    Tri::Sat(id) => {
                        first.get_or_insert(id);
                    }
                }
            }
            match (unknown, first) {
                (Some(id), _) => Tri::Unknown(id),
                (None, Some(id)) => Tri::Sat(id),
                (None, None) => Tri::Unsat,
            }
        }
    }
}

/// Status from the manifest's results, given the tree shape.
pub fn status_from(m: &Manifest, shape: &TreeShape) -> CacheStatus {
    if !m.stale.is_empty() {
        return CacheStatus::Error(format!("cache is stale: {} changed since verification", m.stale.join(", ")));
    }
    match eval_shape(shape, &m.results) {
        Tri::Unsat => CacheStatus::Verified,
        Tri::Unknown(id) => CacheStatus::Error(format!("leaf {id} is unsolved")),
        Tri::Sat(id) => match &m.results[&id] {
            LeafResult::Sat { embedding, witness } => {
                CacheStatus::Falsified { leaf: id, embedding: embedding.clone(), witness: witness.clone() }
            }
            _ => unreachable!("leaf {id} evaluated as satisfiable"),
        },
    }
}

fn derive_status(dir: &Path, m: &Manifest) -> CacheStatus {
    match load_tree(dir, m) {
        Ok(shape) => status_from(m, &shape),
        Err(e) => CacheStatus::Error(e.to_string()),
    }
}

/// Status of a cache, read from its own files only.
pub fn read_status(dir: &Path) -> Result<CacheStatus, CacheError> {
    let m = load_manifest(dir)?;
    let shape = load_tree(dir, &m)?;
    Ok(status_from(&m, &shape))
}

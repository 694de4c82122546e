//! Fixture locations, scratch workspaces and a CLI runner.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Mutex, MutexGuard};

use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// A temporary directory holding copies of the fixtures.
pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        for f in ["controller.vcl", "good.json", "zero.json", "alternating.vcl", "nonlinear.vcl"] {
            fs::copy(fixture(f), dir.path().join(f)).unwrap();
        }
        Workspace { dir }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }

    /// The JSON error object printed after the diagnostic line.
    pub fn error(&self) -> Value {
        let start = self.stderr.find('{').unwrap_or_else(|| panic!("no JSON error in stderr: {}", self.stderr));
        let v: Value = serde_json::from_str(&self.stderr[start..]).unwrap();
        v["error"].clone()
    }

    pub fn error_code(&self) -> String {
        self.error()["code"].as_str().unwrap().to_string()
    }
}

/// Runs the binary in `cwd`.
pub fn run(cwd: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_specbridge")).current_dir(cwd).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

static SOLVER: Mutex<()> = Mutex::new(());

/// Held by tests that run the solver or compare the process-wide solver
/// call count, so that counts are not disturbed by parallel tests.
pub fn serial() -> MutexGuard<'static, ()> {
    SOLVER.lock().unwrap_or_else(|e| e.into_inner())
}

mod common;

use std::fs;

use common::{run, Workspace};
use serde_json::Value;
use specbridge_core::rational::{abs, ratio, Q};

fn cwd(ws: &Workspace) -> &std::path::Path {
    ws.dir.path()
}

fn rat(v: &Value) -> Q {
    specbridge::formats::parse_rat(v, "test").unwrap()
}

fn keys(v: &Value) -> Vec<&str> {
    v.as_object().unwrap().keys().map(String::as_str).collect()
}

#[test]
fn verify_good_controller() {
    let ws = Workspace::new();
    let r = run(cwd(&ws), &["verify", "controller.vcl", "safe", "--network", "controller=good.json", "--cache-dir", "out"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(keys(&v), ["cache_dir", "leaves", "property", "solver_calls", "status"]);
    assert_eq!(v["status"], "Verified");
    let leaves = v["leaves"].as_array().unwrap();
    assert_eq!(leaves.len(), 2);
    assert!(leaves.iter().all(|l| l["result"] == "unsat" && l["leaf"].is_u64()));
    assert!(r.stderr.is_empty());
}

#[test]
fn verify_zero_controller_prints_a_witness() {
    let ws = Workspace::new();
    let r = run(cwd(&ws), &["verify", "controller.vcl", "safe", "--network", "controller=zero.json"]);
    assert_eq!(r.code, 1);
    let v = r.json();
    assert_eq!(v["status"], "Falsified");
    let w = &v["witness"];
    assert_eq!(keys(w), ["embedding", "leaf", "problem"]);
    let x: Vec<Q> = w["problem"][0]["values"].as_array().unwrap().iter().map(rat).collect();
    assert_eq!(w["problem"][0]["name"], "x");
    assert!(x.iter().all(|xi| abs(xi) <= ratio(13, 4)));
    assert!(abs(&(Q::from_integer(2.into()) * &x[0] - &x[1])) >= ratio(5, 4));
}

#[test]
fn verify_then_reverify_from_the_cache() {
    let ws = Workspace::new();
    let d = cwd(&ws);
    let r = run(d, &["compile", "controller.vcl", "safe", "--target", "queries", "--network", "controller=good.json", "--cache-dir", "out"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["root"], "or");
    assert_eq!(v["status"], "Error");
    assert_eq!(v["leaves"].as_array().unwrap().len(), 2);
    let q1 = fs::read_to_string(ws.path("out/query1.txt")).unwrap();
    assert!(q1.lines().all(|l| l.contains("<=") || l.contains(">=") || l.contains(" = ")), "{q1}");

    assert_eq!(run(d, &["status", "--cache-dir", "out"]).code, 2);
    let r = run(d, &["verify", "--cache-dir", "out"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json()["solver_calls"], 2);
    let r = run(d, &["verify", "--cache-dir", "out"]);
    assert_eq!(r.json()["solver_calls"], 0);
    let r = run(d, &["status", "--cache-dir", "out"]);
    assert_eq!((r.code, r.json()["status"].as_str()), (0, Some("Verified")));
}

#[test]
fn check_cache_exit_codes() {
    let ws = Workspace::new();
    let d = cwd(&ws);
    run(d, &["verify", "controller.vcl", "safe", "--network", "controller=good.json", "--cache-dir", "out"]);
    let r = run(d, &["check-cache", "--cache-dir", "out"]);
    assert_eq!((r.code, r.json()["status"].as_str()), (0, Some("Valid")));

    let original = fs::read(ws.path("good.json")).unwrap();
    let mut flipped = original.clone();
    flipped[10] ^= 0x20;
    fs::write(ws.path("good.json"), &flipped).unwrap();
    let r = run(d, &["check-cache", "--cache-dir", "out"]);
    assert_eq!(r.code, 1);
    let v = r.json();
    assert_eq!(v["status"], "Stale");
    assert_eq!(v["stale"][0]["name"], "controller");
    assert_eq!(keys(&v["stale"][0]), ["name", "path", "reason", "role"]);
    let r = run(d, &["status", "--cache-dir", "out"]);
    assert_eq!((r.code, r.json()["status"].as_str()), (2, Some("Error")));
    let r = run(d, &["verify", "--cache-dir", "out"]);
    assert_eq!((r.code, r.error_code().as_str()), (1, "E-CACHE-STALE"));

    fs::write(ws.path("good.json"), &original).unwrap();
    assert_eq!(run(d, &["check-cache", "--cache-dir", "out"]).code, 0);

    fs::remove_file(ws.path("out/tree.json")).unwrap();
    let r = run(d, &["check-cache", "--cache-dir", "out"]);
    assert_eq!((r.code, r.json()["status"].as_str()), (2, Some("Corrupt")));
    assert!(r.json()["reason"].as_str().unwrap().contains("tree.json"));
}

#[test]
fn compile_errors_exit_2_with_stable_codes() {
    let ws = Workspace::new();
    let d = cwd(&ws);
    let cases: &[(&[&str], &str)] = &[
        (&["verify", "alternating.vcl", "unbounded", "--network", "controller=good.json"], "E-ALTERNATING-QUANTIFIERS"),
        (&["verify", "nonlinear.vcl", "product", "--network", "controller=good.json"], "E-NONLINEAR-EMBEDDING"),
        (&["verify", "controller.vcl", "safe"], "E-UNBOUND-RESOURCE"),
        (&["verify", "controller.vcl", "safe", "--network", "controller=good.json", "--network", "other=good.json"], "E-EXTRA-RESOURCE"),
        (&["verify", "controller.vcl", "nope", "--network", "controller=good.json"], "E-UNKNOWN-PROPERTY"),
        (&["verify", "missing.vcl", "safe"], "E-IO"),
        (&["verify", "--cache-dir", "nowhere"], "E-CACHE-CORRUPT"),
        (&["verify", "controller.vcl"], "E-USAGE"),
        (&["compile", "controller.vcl", "safe", "--target", "queries", "--network", "controller=good.json"], "E-USAGE"),
        (&["export", "controller.vcl", "safe", "--cache-dir", "nowhere"], "E-CACHE-CORRUPT"),
    ];
    for (args, code) in cases {
        let r = run(d, args);
        assert_eq!(r.code, 2, "{args:?}: {}", r.stderr);
        assert_eq!(r.error_code(), *code, "{args:?}");
        assert!(r.stdout.is_empty(), "{args:?}");
        assert!(r.stderr.starts_with(&format!("error[{code}]")), "{}", r.stderr);
    }
    let r = run(d, &["verify", "alternating.vcl", "unbounded", "--network", "controller=good.json"]);
    assert!(r.error()["message"].as_str().unwrap().contains("alternating quantifiers"));
    assert!(r.error()["message"].as_str().unwrap().contains("compilation will error"));
}

#[test]
fn syntax_and_type_errors_carry_spans() {
    let ws = Workspace::new();
    let d = cwd(&ws);
    ws.write("bad.vcl", "@property\np : Bool\np = forall x . x ! 0 <=\n");
    let r = run(d, &["check", "bad.vcl"]);
    assert_eq!((r.code, r.error_code().as_str()), (2, "E-PARSE"));
    assert!(r.error()["span"]["line"].is_u64());

    ws.write("ill.vcl", "x : Rat\nx = true\n");
    let r = run(d, &["check", "ill.vcl"]);
    assert_eq!(r.code, 2);
    assert_eq!(r.error()["span"]["line"], 2);
    assert!(r.error_code().starts_with("E-"));
}

#[test]
fn usage_errors_from_argument_parsing() {
    let ws = Workspace::new();
    let r = run(cwd(&ws), &["frobnicate"]);
    assert_eq!(r.code, 2);
    let r = run(cwd(&ws), &["verify", "controller.vcl", "safe", "--network", "controller"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("NAME=VALUE"));
    let r = run(cwd(&ws), &["--help"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("check-cache"));
}

#[test]
fn parse_and_check_summaries() {
    let ws = Workspace::new();
    let r = run(cwd(&ws), &["parse", "controller.vcl"]);
    assert_eq!(r.code, 0);
    let v = r.json();
    let names: Vec<&str> = v["decls"].as_array().unwrap().iter().map(|d| d["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"safe") && names.contains(&"controller"));
    let r = run(cwd(&ws), &["parse", "controller.vcl", "--dump-ast"]);
    assert!(r.stdout.contains("@network") && r.stdout.contains("safe"));
    let r = run(cwd(&ws), &["check", "controller.vcl"]);
    let v = r.json();
    assert_eq!(v["properties"], serde_json::json!(["safe"]));
    let ctrl = v["decls"].as_array().unwrap().iter().find(|d| d["name"] == "controller").unwrap();
    assert_eq!(ctrl["kind"], "network");
}

#[test]
fn loss_compile_and_eval() {
    let ws = Workspace::new();
    let d = cwd(&ws);
    let r = run(d, &["compile", "controller.vcl", "safe", "--target", "loss", "--samples", "16", "--seed", "5", "-o", "lp.json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let lp: Value = serde_json::from_str(&fs::read_to_string(ws.path("lp.json")).unwrap()).unwrap();
    assert_eq!(lp["format"], "specbridge-loss/1");
    assert_eq!(lp["samples"], 16);
    assert_eq!(lp["networks"][0]["name"], "controller");

    let r = run(d, &["loss-eval", "--loss-program", "lp.json", "--network", "controller=good.json"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.json()["loss"].as_f64().unwrap() < 1e-9);
    let r = run(d, &["loss-eval", "--loss-program", "lp.json", "--network", "controller=zero.json", "--grad"]);
    let v = r.json();
    assert!(v["loss"].as_f64().unwrap() > 0.0);
    assert_eq!(v["gradient"]["controller"].as_array().unwrap().len(), 3);

    let r = run(d, &["loss-eval", "--loss-program", "lp.json"]);
    assert_eq!((r.code, r.error_code().as_str()), (2, "E-UNBOUND-RESOURCE"));
    ws.write("wide.json", r#"{"layers":[{"W":[[1,1,1]],"b":[0],"act":"id"}]}"#);
    let r = run(d, &["loss-eval", "--loss-program", "lp.json", "--network", "controller=wide.json"]);
    assert_eq!((r.code, r.error_code().as_str()), (2, "E-NETWORK-SHAPE"));

    for logic in ["godel", "lukasiewicz", "product", "yager"] {
        let r = run(d, &["compile", "controller.vcl", "safe", "--target", "loss", "--logic", logic]);
        assert_eq!(r.code, 0, "{logic}: {}", r.stderr);
        assert_eq!(r.json()["logic"]["name"], logic);
    }
    let r = run(d, &["compile", "controller.vcl", "safe", "--target", "loss", "--logic", "yager", "--yager-p", "0"]);
    assert_eq!((r.code, r.error_code().as_str()), (2, "E-USAGE"));
}

#[test]
fn simulate_reports_runs() {
    let ws = Workspace::new();
    let r = run(cwd(&ws), &["simulate", "--network", "good.json", "--runs", "50", "--steps", "40", "--seed", "3"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v = r.json();
    assert_eq!(v["on_road"], 50);
    assert!(rat(&v["max_abs_position"]) <= Q::from_integer(3.into()));
    let r = run(cwd(&ws), &["simulate", "--network", "zero.json", "--runs", "20", "--steps", "40"]);
    assert_eq!(r.code, 1);
    assert!(!r.json()["off_road_runs"].as_array().unwrap().is_empty());
}

#[test]
fn export_requires_a_verified_cache() {
    let ws = Workspace::new();
    let d = cwd(&ws);
    run(d, &["verify", "controller.vcl", "safe", "--network", "controller=zero.json", "--cache-dir", "bad"]);
    let r = run(d, &["export", "controller.vcl", "safe", "--cache-dir", "bad"]);
    assert_eq!((r.code, r.error_code().as_str()), (2, "E-NOT-VERIFIED"));
    let r = run(d, &["export", "controller.vcl", "safe", "--cache-dir", "bad", "--allow-unverified"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("UNCHECKED"));

    run(d, &["verify", "controller.vcl", "safe", "--network", "controller=good.json", "--cache-dir", "out"]);
    let r = run(d, &["export", "controller.vcl", "safe", "--cache-dir", "out", "--module", "Wind"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("module Wind where"));
    assert!(r.stdout.contains("check-cache --cache-dir out"));
    assert!(!r.stdout.contains("UNCHECKED"));
    let again = run(d, &["compile", "controller.vcl", "safe", "--target", "itp", "--cache-dir", "out", "--module", "Wind"]);
    assert_eq!(again.stdout, r.stdout);

    // A changed spec no longer matches the cache.
    let mut text = fs::read_to_string(ws.path("controller.vcl")).unwrap();
    text.push('\n');
    ws.write("controller.vcl", &text);
    let r = run(d, &["export", "controller.vcl", "safe", "--cache-dir", "out"]);
    assert_eq!((r.code, r.error_code().as_str()), (2, "E-CACHE-MISMATCH"));
}

//! Acceptance suite: one PASS/FAIL line per criterion.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specbridge::bind::{Bindings, Require};
use specbridge::cache::{check_cache, read_status, CacheCheck, CacheStatus};
use specbridge::formats::parse_network;
use specbridge::pipeline::{compile_to_cache, verify, QueryOptions, Spec};
use specbridge_core::frontend::{parse_program, DeclKind};
use specbridge_core::loss::{compile_formula, compile_loss, eval_loss, eval_loss_with, grad_loss, LossOptions, LossProgram, Logic, Resources};
use specbridge_core::nbe::{eval_property_ground, normalise_property, recheck_decl, Assignment, Externals, Ground, NetworkOracle};
use specbridge_core::qelim::{eliminate_variables, find_solution, is_feasible, LinearConstraint, LinearExpr};
use specbridge_core::rational::{abs, int, ratio, Q};
use specbridge_core::sim::{monte_carlo, random_observations, Bounds, NetworkController};
use specbridge_core::typecheck::{check_program, Rel};
use specbridge_core::verify::{solve_query, solver_calls, PropertyStatus, QVar, QueryTree, SolveResult, DEFAULT_PATTERN_BUDGET};
use specbridge_core::TypedProgram;
use support::formulas::{ground_formula, truth};
use support::networks::{networks, random_relu_network, BoxHalfspace};
use support::systems::{planted_feasible, planted_infeasible, satisfies};

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn scratch() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in ["controller.vcl", "good.json", "zero.json", "alternating.vcl", "nonlinear.vcl"] {
        fs::copy(fixture(f), dir.path().join(f)).unwrap();
    }
    dir
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit, || format!("took {:.3}s, limit {limit}s", elapsed.as_secs_f64()))
}

fn load_spec_env(dir: &Path, net: &str) -> (Spec, specbridge::bind::Environment) {
    let spec = Spec::load(&dir.join("controller.vcl")).unwrap();
    let b = Bindings { networks: vec![("controller".into(), dir.join(net))], ..Bindings::default() };
    let env = spec.bind(&b, Require::All).unwrap();
    (spec, env)
}

fn canonical_set(cs: &[LinearConstraint<QVar>]) -> BTreeSet<LinearConstraint<QVar>> {
    cs.iter().map(|c| c.canonical()).collect()
}

/// Leaves derived by hand: x_i = (p_i + 4) / 8, so -13/4 <= p_i <= 13/4 is
/// 3/32 <= x_i <= 29/32, and the margin y0 + 2p0 - p1 outside (-5/4, 5/4)
/// is y0 + 16x0 - 8x1 <= 11/4 or >= 21/4.
fn hand_leaves() -> BTreeSet<BTreeSet<LinearConstraint<QVar>>> {
    let x = |i| LinearExpr::var(QVar::Input(i));
    let k = |q: Q| LinearExpr::constant(q);
    let mut bounds = Vec::new();
    for i in 0..2 {
        bounds.push(LinearConstraint::le(&k(ratio(3, 32)), &x(i)));
        bounds.push(LinearConstraint::le(&x(i), &k(ratio(29, 32))));
    }
    let s = LinearExpr::var(QVar::Output(0)).add(&x(0).scale(&int(16))).sub(&x(1).scale(&int(8)));
    [LinearConstraint::le(&s, &k(ratio(11, 4))), LinearConstraint::ge(&s, &k(ratio(21, 4)))]
        .into_iter()
        .map(|extra| {
            let mut cs = bounds.clone();
            cs.push(extra);
            canonical_set(&cs)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let ws = scratch();
    let start = Instant::now();
    let (spec, env) = load_spec_env(ws.path(), "good.json");
    let dir = ws.path().join("out");
    let (_, compiled) = compile_to_cache(&spec, "safe", &env, &dir, &QueryOptions::default()).map_err(|e| e.to_string())?;
    let report = verify(&spec, "safe", &env, Some(&dir), &QueryOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let QueryTree::Or(children) = &compiled.tree else { return Err("root is not an or node".into()) };
    ensure(children.len() == 2, || format!("{} children", children.len()))?;
    let got: BTreeSet<_> = compiled.tree.leaves().iter().map(|q| canonical_set(&q.constraints)).collect();
    ensure(got == hand_leaves(), || "leaf constraints differ from the hand derivation".into())?;
    ensure(report.leaves == vec![(1, "unsat"), (2, "unsat")], || format!("leaves {:?}", report.leaves))?;
    ensure(report.status == PropertyStatus::Verified, || format!("status {}", report.status.name()))?;
    ensure(read_status(&dir).map_err(|e| e.to_string())? == CacheStatus::Verified, || "cache status".into())?;
    within(elapsed, 1.0)?;
    Ok(format!("2 leaves unsat, Verified in {:.3}s", elapsed.as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let ws = scratch();
    let start = Instant::now();
    let (spec, env) = load_spec_env(ws.path(), "zero.json");
    let report = verify(&spec, "safe", &env, None, &QueryOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let PropertyStatus::Falsified(cex) = &report.status else { return Err(format!("status {}", report.status.name())) };
    let x = &cex.problem[0].1;
    ensure(x.len() == 2, || "witness is not a pair".into())?;
    // The zero network maps every embedding to 0.
    let net = parse_network(&fs::read_to_string(ws.path().join("zero.json")).unwrap()).unwrap();
    let embedded: Vec<Q> = x.iter().map(|v| (v + int(4)) / int(8)).collect();
    let y = net.eval_exact(&embedded).unwrap()[0].clone();
    let m = abs(&(y + int(2) * &x[0] - &x[1]));
    ensure(x.iter().all(|v| abs(v) <= ratio(13, 4)), || format!("witness {x:?} out of range"))?;
    ensure(m >= ratio(5, 4), || format!("margin {m} is within bounds"))?;
    within(elapsed, 1.0)?;
    Ok(format!("witness [{}, {}], margin {m}, in {:.3}s", x[0], x[1], elapsed.as_secs_f64()))
}

fn criterion_3() -> Outcome {
    let net = parse_network(&fs::read_to_string(fixture("good.json")).unwrap()).map_err(|e| e.to_string())?;
    let bounds = Bounds::default();
    let start = Instant::now();
    let mut c = NetworkController::new(&net).map_err(|e| e.to_string())?;
    let runs = monte_carlo(1000, 100, 0, &bounds, &mut c);
    let elapsed = start.elapsed();
    let off = runs.iter().filter(|r| !r.on_road || r.max_abs_position > int(3)).count();
    ensure(off == 0, || format!("{off} runs left the road"))?;
    // Replay every run with the controller -2x + y written out by hand.
    let mut worst = int(0);
    for r in 0..1000 {
        let (mut wind, mut pos, mut vel, mut prev) = (int(0), int(0), int(0), int(0));
        for o in random_observations(0, r, 100, &bounds) {
            ensure(abs(&o.wind_shift) <= int(1) && abs(&o.sensor_error) <= ratio(1, 4), || "invalid observation".into())?;
            wind += &o.wind_shift;
            pos = &pos + &vel + &wind;
            let sensor = &pos + &o.sensor_error;
            vel += &prev - int(2) * &sensor;
            prev = sensor;
            ensure(abs(&pos) <= int(3), || format!("run {r} reached {pos}"))?;
            worst = worst.max(abs(&pos));
        }
    }
    within(elapsed, 10.0)?;
    Ok(format!("1000/1000 on road, max |pos| {worst}, in {:.3}s", elapsed.as_secs_f64()))
}

fn dl2_ground(f: &specbridge_core::nbe::Formula) -> f64 {
    let opts = LossOptions::with_logic(Logic::Dl2);
    let root = compile_formula(f, &opts).unwrap();
    let lp = LossProgram {
        property: "p".into(),
        logic: opts.logic.clone(),
        samples: 1,
        seed: 0,
        networks: vec![],
        datasets: vec![],
        parameters: vec![],
        root,
    };
    eval_loss(&lp, &Resources::default(), 0, 1).unwrap()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let mut agree = 0;
    for _ in 0..500 {
        let f = ground_formula(&mut rng, 4, &[Rel::Le, Rel::Ge, Rel::Eq]);
        if (dl2_ground(&f) == 0.0) == truth(&f) {
            agree += 1;
        }
    }
    ensure(agree == 500, || format!("{agree}/500 agree"))?;
    Ok("500/500 agree".into())
}

fn criterion_5() -> Outcome {
    let tp = check_program(&parse_program(&fs::read_to_string(fixture("controller.vcl")).unwrap()).unwrap()).unwrap();
    let lp = compile_loss(&tp, "safe", &Externals::default(), &LossOptions::default()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let (mut checked, mut resampled, mut worst) = (0u64, 0, 0.0f64);
    while checked < 20 {
        let net = random_relu_network(&mut rng, &[2, 16, 16, 1]);
        let res = Resources { networks: BTreeMap::from([("controller".to_string(), &net)]), ..Resources::default() };
        let g = grad_loss(&lp, &res, checked, 10).map_err(|e| e.to_string())?;
        if g.kink_margin < 1e-3 {
            resampled += 1;
            continue;
        }
        let w = net.params_f64();
        let h = 1e-5;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..w.len() {
            let at = |d: f64| {
                let mut v = w.clone();
                v[i] += d;
                let mut k = f64::INFINITY;
                eval_loss_with(&lp, &res, &BTreeMap::from([("controller".to_string(), v)]), checked, 10, &mut k).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            num += (fd - g.grads["controller"][i]).powi(2);
            den += fd.powi(2);
        }
        let err = num.sqrt() / den.sqrt().max(1e-12);
        ensure(err < 1e-4, || format!("relative error {err:e} at point {checked}"))?;
        worst = worst.max(err);
        checked += 1;
    }
    Ok(format!("20 points, worst relative error {worst:.2e}, {resampled} resampled"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let mut correct = 0;
    let mut replays = 0;
    for i in 0..50 {
        let nvars = rng.gen_range(2..=4);
        let ncons = rng.gen_range(1..=8);
        let (sys, planted) = planted_feasible(&mut rng, nvars, ncons);
        ensure(satisfies(&sys, &planted), || format!("generator: system {i} misses its plant"))?;
        if find_solution(&sys).is_some_and(|s| satisfies(&sys, &s)) {
            correct += 1;
        }
        let keep: BTreeSet<usize> = (0..rng.gen_range(1..nvars)).collect();
        let (reduced, recon) = eliminate_variables(&sys, &keep);
        for j in 0..100 {
            let mut point: BTreeMap<usize, Q> = keep
                .iter()
                .map(|&v| {
                    let base = if j % 2 == 0 { planted[&v].clone() } else { int(0) };
                    let jitter = if j == 0 { int(0) } else { ratio(rng.gen_range(-16..=16), 8) };
                    (v, base + jitter)
                })
                .collect();
            if reduced.iter().all(|c| c.holds(&point) == Some(true)) {
                replays += 1;
                recon.replay(&mut point);
                ensure(satisfies(&sys, &point), || format!("system {i}: extension at point {j} fails"))?;
            } else {
                ensure(j != 0, || format!("system {i}: planted projection rejected"))?;
            }
        }
    }
    for _ in 0..50 {
        let nvars = rng.gen_range(1..=4);
        let ncons = rng.gen_range(2..=8);
        let sys = planted_infeasible(&mut rng, nvars, ncons);
        if !is_feasible(&sys) {
            correct += 1;
        }
    }
    ensure(correct == 100, || format!("{correct}/100 verdicts correct"))?;
    Ok(format!("100/100 verdicts, {replays} extensions checked"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let (mut sat, mut grid_hits) = (0, 0);
    for i in 0..50 {
        let net = random_relu_network(&mut rng, &[2, 4, 1]);
        let bh = BoxHalfspace::random(&mut rng);
        let result = solve_query(&bh.query(), &networks("f", net.clone()), DEFAULT_PATTERN_BUDGET).map_err(|e| e.to_string())?;
        let grid = bh.grid_search(&net, 100);
        grid_hits += usize::from(grid.is_some());
        match result {
            SolveResult::Sat(w) => {
                sat += 1;
                let p = [w[&QVar::Input(0)].clone(), w[&QVar::Input(1)].clone()];
                ensure(bh.holds_at(&net, &p), || format!("query {i}: solver witness fails"))?;
            }
            SolveResult::Unsat => ensure(grid.is_none(), || format!("query {i}: grid found {grid:?}, solver UNSAT"))?,
        }
    }
    Ok(format!("50/50 agree, {sat} sat, {grid_hits} grid hits"))
}

/// Every network is replaced by output j = sum_i (i + j + 1) x_i - j.
struct Affine;

impl NetworkOracle for Affine {
    fn eval(&self, _: &str, input: &[Q]) -> Option<Vec<Q>> {
        Some(
            (0..4)
                .map(|j| input.iter().enumerate().map(|(i, x)| x * int((i + j + 1) as i64)).sum::<Q>() - int(j as i64))
                .collect(),
        )
    }
}

struct Point<'a>(&'a Assignment);

impl Ground for Point<'_> {
    fn var(&self, var: usize, offset: usize) -> Option<Q> {
        self.0.get(&var)?.get(offset).cloned()
    }
    fn network(&self, name: &str, input: &[Q]) -> Option<Vec<Q>> {
        Affine.eval(name, input)
    }
}

const EXTRA_PROPERTIES: &str = "
@network
g : Tensor Rat [3] -> Tensor Rat [2]

scale : Rat -> Tensor Rat [3] -> Tensor Rat [3]
scale c v = foreach i . c * v ! i

@property
p1 : Bool
p1 = forall x . fold (+) 0 x <= 3 => g (scale 2 x) ! 1 >= -7 or not (x ! 0 == x ! 2)

@property
p2 : Bool
p2 = exists (x : Tensor Rat [3]) . if x ! 0 > 0 then g x ! 0 > 1 else g x ! 1 < 0

@property
p3 : Bool
p3 = forall (x : Rat) . exists (y : Rat) . x + y == 1 and (x - y) / 2 != x * 3
";

fn criterion_8() -> Outcome {
    let mut programs: Vec<(String, TypedProgram)> = Vec::new();
    for f in ["controller.vcl", "alternating.vcl", "nonlinear.vcl"] {
        let src = fs::read_to_string(fixture(f)).unwrap();
        programs.push((f.into(), check_program(&parse_program(&src).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?));
    }
    programs.push(("extra".into(), check_program(&parse_program(EXTRA_PROPERTIES).unwrap()).map_err(|e| e.to_string())?));
    let ext = Externals::default();
    let mut rng = ChaCha8Rng::seed_from_u64(800);
    let mut props = 0;
    for (file, tp) in &programs {
        let names: Vec<String> = tp.decls.iter().filter(|d| d.kind == DeclKind::Property).map(|d| d.name.clone()).collect();
        for name in names {
            props += 1;
            let nf = normalise_property(tp, &name, &ext).map_err(|e| format!("{file} {name}: {e}"))?;
            let vars = nf.quant_vars();
            for _ in 0..100 {
                let mut asg = Assignment::new();
                for v in &vars {
                    asg.insert(v.id, (0..v.size()).map(|_| ratio(rng.gen_range(-40..40), rng.gen_range(1..9))).collect());
                }
                let direct = eval_property_ground(tp, &name, &ext, &Affine, &asg).map_err(|e| e.to_string())?;
                let normal = nf.eval(&Point(&asg)).map_err(|e| e.to_string())?;
                ensure(direct == normal, || format!("{file} {name}: disagree at {asg:?}"))?;
            }
            let re = recheck_decl(tp, &name, &ext).map_err(|e| format!("{file} {name}: {e}"))?;
            let twice = normalise_property(&re, &name, &ext).map_err(|e| e.to_string())?;
            ensure(nf == twice, || format!("{file} {name}: not idempotent"))?;
        }
    }
    Ok(format!("{props} properties x 100 points agree, idempotent"))
}

fn criterion_9() -> Outcome {
    let ws = scratch();
    let (spec, env) = load_spec_env(ws.path(), "good.json");
    let dir = ws.path().join("out");
    let report = verify(&spec, "safe", &env, Some(&dir), &QueryOptions::default()).map_err(|e| e.to_string())?;
    ensure(report.status == PropertyStatus::Verified, || "baseline not verified".into())?;
    ensure(check_cache(&dir) == CacheCheck::Valid, || "baseline not valid".into())?;
    let net = ws.path().join("good.json");
    let original = fs::read(&net).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(900);
    for n in 0..100 {
        let pos = rng.gen_range(0..original.len());
        let mut bytes = original.clone();
        bytes[pos] ^= 1 << rng.gen_range(0..8);
        fs::write(&net, &bytes).unwrap();
        let calls = solver_calls();
        let check = check_cache(&dir);
        ensure(solver_calls() == calls, || format!("flip {n}: solver ran during check-cache"))?;
        ensure(matches!(check, CacheCheck::Stale(_)), || format!("flip {n} at byte {pos}: {}", check.name()))?;
        let status = read_status(&dir).map_err(|e| e.to_string())?;
        ensure(status != CacheStatus::Verified, || format!("flip {n}: status Verified"))?;
        fs::write(&net, &original).unwrap();
        ensure(check_cache(&dir) == CacheCheck::Valid, || format!("flip {n}: restore not valid"))?;
    }
    Ok("100/100 flips Stale, never Verified, 0 solver calls".into())
}

fn criterion_10() -> Outcome {
    let ws = scratch();
    let cases = [
        ("alternating.vcl", "unbounded", "E-ALTERNATING-QUANTIFIERS", "alternating quantifiers"),
        ("alternating.vcl", "unbounded", "E-ALTERNATING-QUANTIFIERS", "compilation will error"),
        ("nonlinear.vcl", "product", "E-NONLINEAR-EMBEDDING", "non-linear embedding"),
    ];
    for (file, prop, code, phrase) in cases {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_specbridge"))
            .current_dir(ws.path())
            .args(["verify", file, prop, "--network", "controller=good.json"])
            .output()
            .map_err(|e| e.to_string())?;
        let stderr = String::from_utf8_lossy(&out.stderr);
        ensure(out.status.code() == Some(2), || format!("{file}: exit {:?}", out.status.code()))?;
        ensure(out.stdout.is_empty(), || format!("{file}: stdout not empty"))?;
        ensure(stderr.starts_with(&format!("error[{code}]")), || format!("{file}: {stderr}"))?;
        ensure(stderr.contains(phrase), || format!("{file}: message lacks '{phrase}'"))?;
    }
    Ok("both exit 2 with the documented codes".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("controller verification", criterion_1),
        ("falsification and lifting", criterion_2),
        ("simulation stays on road", criterion_3),
        ("dl2 soundness", criterion_4),
        ("gradient vs finite differences", criterion_5),
        ("fourier-motzkin oracle", criterion_6),
        ("solver vs grid search", criterion_7),
        ("nbe soundness", criterion_8),
        ("cache integrity", criterion_9),
        ("error contracts", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

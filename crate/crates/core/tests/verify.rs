mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use specbridge_core::frontend::parse_program;
use specbridge_core::nbe::Externals;
use specbridge_core::qelim::{LinearConstraint, LinearExpr};
use specbridge_core::rational::{abs, int, ratio, Q};
use specbridge_core::typecheck::check_program;
use specbridge_core::verify::{
    compile_queries, evaluate_tree, parse_query_text, render_query, solve_query, solver_calls, verify_property,
    PropertyStatus, QVar, Query, QueryTree, SolveResult, TreeOutcome, VerifyError, DEFAULT_PATTERN_BUDGET,
};
use specbridge_core::TypedProgram;
use support::networks::{good_controller, networks, random_relu_network, zero_controller, BoxHalfspace};

fn controller() -> TypedProgram {
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/controller.vcl")).unwrap();
    check_program(&parse_program(&src).unwrap()).unwrap()
}

fn typed(src: &str) -> TypedProgram {
    check_program(&parse_program(src).unwrap()).unwrap()
}

fn canonical_set(cs: &[LinearConstraint<QVar>]) -> BTreeSet<LinearConstraint<QVar>> {
    cs.iter().map(|c| c.canonical()).collect()
}

/// Expected controller leaves, derived independently: substitute the inverse
/// embedding p = 8a - 4 into the problem-space atoms by hand.
fn expected_leaves() -> Vec<BTreeSet<LinearConstraint<QVar>>> {
    let x = |i| LinearExpr::var(QVar::Input(i));
    let y0 = LinearExpr::var(QVar::Output(0));
    let k = |q: Q| LinearExpr::constant(q);
    let p = |i| x(i).scale(&int(8)).sub(&k(int(4)));
    let mut bounds = Vec::new();
    for i in 0..2 {
        bounds.push(LinearConstraint::le(&k(ratio(-13, 4)), &p(i)));
        bounds.push(LinearConstraint::le(&p(i), &k(ratio(13, 4))));
    }
    // -3.25 <= 8a - 4  <=>  3/32 <= a, and 8a - 4 <= 3.25  <=>  a <= 29/32
    assert_eq!(bounds[0].canonical(), LinearConstraint::le(&k(ratio(3, 32)), &x(0)).canonical());
    assert_eq!(bounds[1].canonical(), LinearConstraint::le(&x(0), &k(ratio(29, 32))).canonical());
    let t = y0.add(&p(0).scale(&int(2))).sub(&p(1));
    // t = y0 + 16x0 - 8x1 - 4
    assert_eq!(t, y0.add(&x(0).scale(&int(16))).sub(&x(1).scale(&int(8))).sub(&k(int(4))));
    let s = y0.add(&x(0).scale(&int(16))).sub(&x(1).scale(&int(8)));
    let low = LinearConstraint::le(&s, &k(ratio(11, 4)));
    let high = LinearConstraint::ge(&s, &k(ratio(21, 4)));
    assert_eq!(LinearConstraint::le(&t, &k(ratio(-5, 4))).canonical(), low.canonical());
    assert_eq!(LinearConstraint::ge(&t, &k(ratio(5, 4))).canonical(), high.canonical());
    [low, high]
        .into_iter()
        .map(|extra| {
            let mut cs = bounds.clone();
            cs.push(extra);
            canonical_set(&cs)
        })
        .collect()
}

#[test]
fn good_controller_is_verified() {
    let tp = controller();
    let start = Instant::now();
    let compiled = compile_queries(&tp, "safe", &Externals::default()).unwrap();
    let QueryTree::Or(children) = &compiled.tree else { panic!("root is not an or node") };
    assert_eq!(children.len(), 2);
    let leaves = compiled.tree.leaves();
    let got: BTreeSet<_> = leaves.iter().map(|q| canonical_set(&q.constraints)).collect();
    let want: BTreeSet<_> = expected_leaves().into_iter().collect();
    assert_eq!(got, want);
    assert_eq!(leaves.iter().map(|q| q.id).collect::<Vec<_>>(), vec![1, 2]);

    let nets = networks("controller", good_controller());
    for q in &leaves {
        assert_eq!(solve_query(q, &nets, DEFAULT_PATTERN_BUDGET).unwrap(), SolveResult::Unsat);
    }
    let (_, status) = verify_property(&tp, "safe", &Externals::default(), &nets, DEFAULT_PATTERN_BUDGET).unwrap();
    assert_eq!(status, PropertyStatus::Verified);
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn zero_controller_is_falsified() {
    let tp = controller();
    let nets = networks("controller", zero_controller());
    let (_, status) = verify_property(&tp, "safe", &Externals::default(), &nets, DEFAULT_PATTERN_BUDGET).unwrap();
    let PropertyStatus::Falsified(cex) = status else { panic!("expected a counterexample") };
    let (var, values) = &cex.problem[0];
    assert_eq!(var.dims, vec![2]);
    assert!(values.iter().all(|v| abs(v) <= ratio(13, 4)));
    // The controller outputs 0, so the margin is |2 x0 - x1|.
    assert!(abs(&(int(2) * &values[0] - &values[1])) >= ratio(5, 4));
    // The embedding of the lifted point is the solver's x.
    for (i, v) in values.iter().enumerate() {
        assert_eq!(cex.embedding[&QVar::Input(i)], (v + int(4)) / int(8));
    }
    assert_eq!(cex.embedding[&QVar::Output(0)], int(0));
}

#[test]
fn zero_controller_query_agrees_with_grid() {
    let tp = controller();
    let compiled = compile_queries(&tp, "safe", &Externals::default()).unwrap();
    let nets = networks("controller", zero_controller());
    for q in compiled.tree.leaves() {
        let solver_sat = matches!(solve_query(q, &nets, DEFAULT_PATTERN_BUDGET).unwrap(), SolveResult::Sat(_));
        let mut grid_sat = false;
        for i in 0..=32 {
            for j in 0..=32 {
                let a: BTreeMap<QVar, Q> =
                    [(QVar::Input(0), ratio(i, 32)), (QVar::Input(1), ratio(j, 32)), (QVar::Output(0), int(0))].into();
                grid_sat |= q.constraints.iter().all(|c| c.holds(&a) == Some(true));
            }
        }
        assert_eq!(solver_sat, grid_sat);
        assert!(grid_sat);
    }
}

#[test]
fn lifting_replays_inverse_embedding() {
    let tp = controller();
    let compiled = compile_queries(&tp, "safe", &Externals::default()).unwrap();
    let q = compiled.tree.leaves()[0];
    let mut assign: BTreeMap<QVar, Q> =
        [(QVar::Input(0), ratio(29, 32)), (QVar::Input(1), ratio(3, 32)), (QVar::Output(0), int(0))].into();
    q.recon.replay(&mut assign);
    let var = compiled.problem_vars[0].id;
    assert_eq!(assign[&QVar::Problem(var, 0)], ratio(13, 4));
    assert_eq!(assign[&QVar::Problem(var, 1)], ratio(-13, 4));
}

#[test]
fn identity_embedding_lifts_to_itself() {
    let tp = typed(
        "@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = forall (x : Tensor Rat [1]) . 0 <= x ! 0 <= 1 => f x ! 0 >= 0\n",
    );
    let nets = networks(
        "f",
        specbridge_core::network::Network::new(vec![(
            vec![vec![int(1)]],
            vec![ratio(-1, 2)],
            specbridge_core::network::Activation::Identity,
        )])
        .unwrap(),
    );
    let (_, status) = verify_property(&tp, "p", &Externals::default(), &nets, DEFAULT_PATTERN_BUDGET).unwrap();
    let PropertyStatus::Falsified(cex) = status else { panic!() };
    assert_eq!(cex.problem[0].1[0], cex.embedding[&QVar::Input(0)]);
    assert!(cex.problem[0].1[0] < ratio(1, 2));
}

#[test]
fn infeasible_box_is_unsat_for_any_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = random_relu_network(&mut rng, &[2, 4, 1]);
    let mut q = BoxHalfspace::random(&mut rng).query();
    let x0 = LinearExpr::var(QVar::Input(0));
    q.constraints = vec![
        LinearConstraint::le(&x0, &LinearExpr::zero()),
        LinearConstraint::ge(&x0, &LinearExpr::constant(int(1))),
    ];
    assert_eq!(solve_query(&q, &networks("f", net), DEFAULT_PATTERN_BUDGET).unwrap(), SolveResult::Unsat);
}

#[test]
fn alternating_quantifiers_are_rejected() {
    let tp = typed(
        "@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = forall x . exists y . f x ! 0 <= f y ! 0\n",
    );
    let err = compile_queries(&tp, "p", &Externals::default()).unwrap_err();
    assert!(matches!(err, VerifyError::AlternatingQuantifiers { .. }));
    assert_eq!(err.code(), "E-ALTERNATING-QUANTIFIERS");
    assert!(err.to_string().contains("alternating quantifiers"));
}

#[test]
fn existential_properties_are_rejected() {
    let tp = typed("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = exists x . f x ! 0 >= 0\n");
    let err = compile_queries(&tp, "p", &Externals::default()).unwrap_err();
    assert_eq!(err.code(), "E-EXISTENTIAL-PROPERTY");
}

#[test]
fn nonlinear_embedding_is_rejected() {
    let tp = typed(
        "@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = forall (x : Tensor Rat [1]) . f [x ! 0 * x ! 0] ! 0 >= 0\n",
    );
    let err = compile_queries(&tp, "p", &Externals::default()).unwrap_err();
    assert!(matches!(err, VerifyError::NonlinearEmbedding { .. }));
    assert_eq!(err.code(), "E-NONLINEAR-EMBEDDING");
}

#[test]
fn single_atom_property_is_a_single_leaf() {
    let tp = typed("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = forall x . f x ! 0 >= 0\n");
    let compiled = compile_queries(&tp, "p", &Externals::default()).unwrap();
    let QueryTree::Leaf(q) = &compiled.tree else { panic!("expected a leaf root") };
    assert_eq!(q.constraints, vec![LinearConstraint::lt(&LinearExpr::var(QVar::Output(0)), &LinearExpr::zero())]);
}

#[test]
fn disequality_splits_into_two_strict_queries() {
    let tp = typed("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = forall x . f x ! 0 == 0\n");
    let compiled = compile_queries(&tp, "p", &Externals::default()).unwrap();
    let leaves = compiled.tree.leaves();
    assert_eq!(leaves.len(), 2);
    assert!(leaves.iter().all(|q| q.constraints.len() == 1 && q.constraints[0].rel == specbridge_core::qelim::LinRel::Lt));
}

#[test]
fn repeated_applications_share_or_split_blocks() {
    let tp = typed(
        "@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = forall x . f x ! 0 <= f x ! 0 + f [x ! 0 + 1] ! 0\n",
    );
    let compiled = compile_queries(&tp, "p", &Externals::default()).unwrap();
    let QueryTree::Leaf(q) = &compiled.tree else { panic!() };
    assert_eq!(q.applications.len(), 2);
    assert_eq!((q.input_count(), q.output_count()), (2, 2));
    // The two input blocks are joined by x1 = x0 + 1.
    let link = LinearConstraint::eq(&LinearExpr::var(QVar::Input(1)), &LinearExpr::var(QVar::Input(0)).add(&LinearExpr::constant(int(1))));
    assert!(q.constraints.iter().any(|c| c.canonical() == link.canonical()));
    // f(x) <= f(x) + f(x + 1) fails exactly when f(x + 1) < 0.
    let net = specbridge_core::network::Network::new(vec![(
        vec![vec![int(1)]],
        vec![int(0)],
        specbridge_core::network::Activation::Identity,
    )])
    .unwrap();
    let (_, status) = verify_property(&tp, "p", &Externals::default(), &networks("f", net), DEFAULT_PATTERN_BUDGET).unwrap();
    let PropertyStatus::Falsified(cex) = status else { panic!() };
    assert!(cex.problem[0].1[0] < int(-1));
}

#[test]
fn or_short_circuits_after_sat() {
    let tp = controller();
    let compiled = compile_queries(&tp, "safe", &Externals::default()).unwrap();
    let nets = networks("controller", zero_controller());
    let mut solved = Vec::new();
    let outcome = evaluate_tree(&compiled.tree, &mut |q: &Query| {
        solved.push(q.id);
        solve_query(q, &nets, DEFAULT_PATTERN_BUDGET)
    })
    .unwrap();
    assert!(matches!(outcome, TreeOutcome::Sat { leaf: 1, .. }));
    assert_eq!(solved, vec![1]);
}

#[test]
fn and_short_circuits_after_unsat() {
    let tp = controller();
    let compiled = compile_queries(&tp, "safe", &Externals::default()).unwrap();
    let tree = QueryTree::And(compiled.tree.leaves().into_iter().cloned().map(QueryTree::Leaf).collect());
    let mut solved = Vec::new();
    let outcome = evaluate_tree(&tree, &mut |q: &Query| {
        solved.push(q.id);
        Ok::<_, VerifyError>(SolveResult::Unsat)
    })
    .unwrap();
    assert_eq!(outcome, TreeOutcome::Unsat);
    assert_eq!(solved, vec![1]);
}

#[test]
fn verdict_ignores_leaf_order() {
    let tp = controller();
    let compiled = compile_queries(&tp, "safe", &Externals::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for net in [good_controller(), zero_controller(), random_relu_network(&mut rng, &[2, 3, 1])] {
        let nets = networks("controller", net);
        let verdict = |tree: &QueryTree| {
            matches!(evaluate_tree(tree, &mut |q| solve_query(q, &nets, DEFAULT_PATTERN_BUDGET)).unwrap(), TreeOutcome::Sat { .. })
        };
        let base = verdict(&compiled.tree);
        for _ in 0..4 {
            let mut leaves: Vec<QueryTree> = compiled.tree.leaves().into_iter().cloned().map(QueryTree::Leaf).collect();
            leaves.shuffle(&mut rng);
            assert_eq!(verdict(&QueryTree::Or(leaves)), base);
        }
    }
}

#[test]
fn solver_agrees_with_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut sat = 0;
    for _ in 0..50 {
        let net = random_relu_network(&mut rng, &[2, 4, 1]);
        let bh = BoxHalfspace::random(&mut rng);
        let q = bh.query();
        let nets = networks("f", net.clone());
        let result = solve_query(&q, &nets, DEFAULT_PATTERN_BUDGET).unwrap();
        let grid = bh.grid_search(&net, 100);
        match result {
            SolveResult::Sat(w) => {
                sat += 1;
                assert!(bh.holds_at(&net, &[w[&QVar::Input(0)].clone(), w[&QVar::Input(1)].clone()]));
            }
            SolveResult::Unsat => assert!(grid.is_none(), "grid found {grid:?}"),
        }
    }
    assert!(sat > 5 && sat < 45, "{sat} satisfiable out of 50");
}

#[test]
fn random_relu_controllers_lift_soundly() {
    // verify_property re-checks every counterexample exactly and panics on
    // a mismatch, so this exercises lifting across many regions.
    let tp = controller();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut falsified = 0;
    for _ in 0..20 {
        let net = random_relu_network(&mut rng, &[2, 4, 1]);
        let (_, status) =
            verify_property(&tp, "safe", &Externals::default(), &networks("controller", net), DEFAULT_PATTERN_BUDGET).unwrap();
        if let PropertyStatus::Falsified(cex) = status {
            falsified += 1;
            let v = &cex.problem[0].1;
            assert!(v.iter().all(|c| abs(c) <= ratio(13, 4)));
        }
    }
    assert!(falsified > 0);
}

#[test]
fn pattern_budget_is_enforced() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = random_relu_network(&mut rng, &[2, 16, 16, 1]);
    let q = BoxHalfspace::random(&mut rng).query();
    let err = solve_query(&q, &networks("f", net), DEFAULT_PATTERN_BUDGET).unwrap_err();
    assert_eq!(err, VerifyError::PatternBudgetExceeded { relus: 32, budget: 24 });
}

#[test]
fn missing_network_is_reported() {
    let q = BoxHalfspace::random(&mut ChaCha8Rng::seed_from_u64(0)).query();
    let err = solve_query(&q, &BTreeMap::new(), DEFAULT_PATTERN_BUDGET).unwrap_err();
    assert_eq!(err.code(), "E-UNBOUND-RESOURCE");
}

#[test]
fn solver_calls_are_counted() {
    let q = BoxHalfspace::random(&mut ChaCha8Rng::seed_from_u64(0)).query();
    let before = solver_calls();
    let _ = solve_query(&q, &networks("f", good_controller()), DEFAULT_PATTERN_BUDGET);
    assert!(solver_calls() > before);
}

#[test]
fn query_text_is_deterministic_and_parses_back() {
    let tp = controller();
    let a = compile_queries(&tp, "safe", &Externals::default()).unwrap();
    let b = compile_queries(&tp, "safe", &Externals::default()).unwrap();
    for (qa, qb) in a.tree.leaves().iter().zip(b.tree.leaves()) {
        let ta = render_query(qa, &int(0));
        assert_eq!(ta, render_query(qb, &int(0)));
        let parsed = parse_query_text(&ta).unwrap();
        let relaxed: Vec<_> = qa
            .constraints
            .iter()
            .map(|c| LinearConstraint::new(c.expr.clone(), if c.rel == specbridge_core::qelim::LinRel::Lt { specbridge_core::qelim::LinRel::Le } else { c.rel }))
            .collect();
        assert_eq!(canonical_set(&parsed), canonical_set(&relaxed));
        println!("{ta}");
    }
}

#[test]
fn strict_constraints_are_tightened_by_slack() {
    let tp = typed("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = forall x . f x ! 0 >= 0\n");
    let compiled = compile_queries(&tp, "p", &Externals::default()).unwrap();
    let q = compiled.tree.leaves()[0];
    assert_eq!(render_query(q, &int(0)), "1y0 <= 0\n");
    assert_eq!(render_query(q, &ratio(1, 1000)), "1y0 <= -0.001\n");
}

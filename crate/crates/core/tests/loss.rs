mod support;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specbridge_core::frontend::parse_program;
use specbridge_core::loss::{
    compile_formula, compile_loss, eval_loss, eval_loss_with, extract_domain, grad_loss, sample_point, Domain, Logic,
    LossError, LossOptions, LossTerm, Resources,
};
use specbridge_core::nbe::{normalise_property, Arith, Externals, Formula, Ground, QuantVar};
use specbridge_core::network::{Activation, Network};
use specbridge_core::rational::{from_f64, int, ratio, Q};
use specbridge_core::typecheck::{check_program, Quant, Rel};
use specbridge_core::TypedProgram;
use support::formulas::{ground_formula, min_margin, truth};
use support::networks::{good_controller, random_relu_network, zero_controller};

fn controller() -> TypedProgram {
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/controller.vcl")).unwrap();
    check_program(&parse_program(&src).unwrap()).unwrap()
}

fn typed(src: &str) -> TypedProgram {
    check_program(&parse_program(src).unwrap()).unwrap()
}

fn ground_loss(f: &Formula, logic: Logic) -> f64 {
    let opts = LossOptions::with_logic(logic);
    let root = compile_formula(f, &opts).unwrap();
    let lp = specbridge_core::loss::LossProgram {
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

fn atom(rel: Rel, a: Q, b: Q) -> Formula {
    Formula::Atom(rel, Arith::Const(a), Arith::Const(b))
}

fn resources<'a>(name: &str, net: &'a Network) -> Resources<'a> {
    Resources { networks: BTreeMap::from([(name.to_string(), net)]), ..Resources::default() }
}

#[test]
fn dl2_ground_examples() {
    assert_eq!(ground_loss(&atom(Rel::Le, int(3), int(1)), Logic::Dl2), 2.0);
    let both = Formula::And(Box::new(atom(Rel::Le, int(1), int(2))), Box::new(atom(Rel::Le, int(2), int(3))));
    assert_eq!(ground_loss(&both, Logic::Dl2), 0.0);
    assert_eq!(ground_loss(&atom(Rel::Eq, int(1), int(4)), Logic::Dl2), 3.0);
    assert_eq!(ground_loss(&atom(Rel::Neq, int(2), int(2)), Logic::Dl2), 1.0);
}

#[test]
fn dl2_is_sound_on_ground_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut trues = 0;
    for _ in 0..500 {
        let f = ground_formula(&mut rng, 4, &[Rel::Le, Rel::Ge, Rel::Eq]);
        let t = truth(&f);
        trues += usize::from(t);
        assert_eq!(ground_loss(&f, Logic::Dl2) == 0.0, t, "{f}");
    }
    assert!(trues > 100 && trues < 400);
}

#[test]
fn dl2_strict_atoms() {
    let grid: Vec<Q> = (-8..=8).map(|i| ratio(i, 4)).collect();
    for a in &grid {
        for b in &grid {
            let l = ground_loss(&atom(Rel::Lt, a.clone(), b.clone()), Logic::Dl2);
            if a < b {
                assert_eq!(l, 0.0);
            }
            if l == 0.0 {
                assert!(a <= b && a != b);
            }
        }
    }
}

#[test]
fn fuzzy_losses_are_bounded_and_classical_at_large_margins() {
    let logics = [Logic::Godel, Logic::Lukasiewicz, Logic::Product, Logic::Yager(int(2)), Logic::Yager(ratio(1, 2))];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rels = [Rel::Le, Rel::Lt, Rel::Ge, Rel::Gt, Rel::Eq, Rel::Neq];
    for logic in logics {
        let mut classical = 0;
        for _ in 0..300 {
            let f = ground_formula(&mut rng, 4, &rels);
            let l = ground_loss(&f, logic.clone());
            assert!((0.0..=1.0).contains(&l), "{logic:?}: {l} for {f}");
            if min_margin(&f) >= int(1) {
                classical += 1;
                let want = if truth(&f) { 0.0 } else { 1.0 };
                assert!((l - want).abs() < 1e-12, "{logic:?}: {l} for {f}");
            }
        }
        assert!(classical > 50);
    }
}

#[test]
fn fuzzy_atom_truthiness() {
    // sigma = 1: a violation of 1/2 gives truth 1/2, so loss 1/2.
    let l = ground_loss(&atom(Rel::Le, ratio(3, 2), int(1)), Logic::Godel);
    assert!((l - 0.5).abs() < 1e-12);
    let opts = LossOptions { sigma: int(2), ..LossOptions::with_logic(Logic::Product) };
    let root = compile_formula(&atom(Rel::Le, ratio(3, 2), int(1)), &opts).unwrap();
    let lp = specbridge_core::loss::LossProgram {
        property: "p".into(),
        logic: opts.logic.clone(),
        samples: 1,
        seed: 0,
        networks: vec![],
        datasets: vec![],
        parameters: vec![],
        root,
    };
    assert!((eval_loss(&lp, &Resources::default(), 0, 1).unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn controller_dl2_program_shape() {
    let tp = controller();
    let lp = compile_loss(&tp, "safe", &Externals::default(), &LossOptions::default()).unwrap();
    assert_eq!(lp.networks.len(), 1);
    assert_eq!(lp.networks[0].dims, vec![2, 1]);
    let LossTerm::SampleForall { var, domain, body, .. } = &lp.root else { panic!("{:?}", lp.root) };
    assert_eq!(var.dims, vec![2]);
    assert_eq!(domain, &Domain { lo: vec![ratio(-13, 4); 2], hi: vec![ratio(13, 4); 2] });
    // Residual: the consequent's two strict atoms, summed.
    assert!(matches!(**body, LossTerm::Add(..)));

    let opts = LossOptions { extract_domains: false, fallback: Some(LossOptions::default_fallback()), ..LossOptions::default() };
    let lp = compile_loss(&tp, "safe", &Externals::default(), &opts).unwrap();
    let LossTerm::SampleForall { domain, body, .. } = &lp.root else { panic!() };
    assert_eq!(domain.lo, vec![int(-4); 2]);
    // Without extraction the antecedent's violation multiplies the
    // consequent's.
    assert!(matches!(**body, LossTerm::Mul(..)));
}

#[test]
fn good_controller_has_zero_loss() {
    let tp = controller();
    let net = good_controller();
    for extract in [true, false] {
        let opts = LossOptions { extract_domains: extract, fallback: Some(LossOptions::default_fallback()), ..LossOptions::default() };
        let lp = compile_loss(&tp, "safe", &Externals::default(), &opts).unwrap();
        for seed in 0..5 {
            assert!(eval_loss(&lp, &resources("controller", &net), seed, 1000).unwrap() < 1e-9);
        }
    }
}

#[test]
fn zero_controller_has_positive_loss() {
    let tp = controller();
    let lp = compile_loss(&tp, "safe", &Externals::default(), &LossOptions::default()).unwrap();
    let net = zero_controller();
    let a = eval_loss(&lp, &resources("controller", &net), 1, 1000).unwrap();
    assert!(a > 0.0);
    // Determinism: same seed, same bits; another seed, another sample.
    assert_eq!(a.to_bits(), eval_loss(&lp, &resources("controller", &net), 1, 1000).unwrap().to_bits());
    assert_ne!(a, eval_loss(&lp, &resources("controller", &net), 2, 1000).unwrap());
    for logic in [Logic::Godel, Logic::Lukasiewicz, Logic::Product, Logic::Yager(int(2))] {
        let lp = compile_loss(&tp, "safe", &Externals::default(), &LossOptions::with_logic(logic)).unwrap();
        let l = eval_loss(&lp, &resources("controller", &net), 1, 100).unwrap();
        assert!(l > 0.0 && l <= 1.0);
    }
}

#[test]
fn conjunct_bounds_are_absorbed() {
    let tp = typed(
        "@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = forall x . 0 <= x ! 0 and x ! 0 <= 1 and f x ! 0 >= 0\n",
    );
    let nf = normalise_property(&tp, "p", &Externals::default()).unwrap();
    let Formula::Quant { q, var, body } = &nf else { panic!() };
    let (domain, residual) = extract_domain(*q, var, body, None, true).unwrap();
    assert_eq!(domain.unwrap(), Domain { lo: vec![int(0)], hi: vec![int(1)] });
    let Formula::Atom(Rel::Ge, Arith::Net { .. }, Arith::Const(c)) = residual else { panic!("{residual}") };
    assert_eq!(c, int(0));
}

#[test]
fn unbounded_dimensions_use_the_fallback() {
    let tp = typed("@network\nf : Tensor Rat [2] -> Tensor Rat [1]\n\n@property\np : Bool\np = forall x . f x ! 0 >= 0\n");
    let err = compile_loss(&tp, "p", &Externals::default(), &LossOptions::default()).unwrap_err();
    assert_eq!(err, LossError::UnboundedDimension { var: "x".into(), dims: vec![0, 1] });
    assert_eq!(err.code(), "E-UNBOUNDED-DOMAIN");
    let opts = LossOptions { fallback: Some(LossOptions::default_fallback()), ..LossOptions::default() };
    let lp = compile_loss(&tp, "p", &Externals::default(), &opts).unwrap();
    let LossTerm::SampleForall { domain, .. } = &lp.root else { panic!() };
    assert_eq!(domain, &Domain { lo: vec![int(-4); 2], hi: vec![int(4); 2] });
}

struct At(Vec<Q>, usize);

impl Ground for At {
    fn var(&self, var: usize, offset: usize) -> Option<Q> {
        (var == self.1).then(|| self.0[offset].clone())
    }
    fn network(&self, _: &str, input: &[Q]) -> Option<Vec<Q>> {
        Some(good_controller().eval_exact(input).unwrap().iter().map(|y| y + &input[0] - &input[1]).collect())
    }
}

#[test]
fn extraction_preserves_meaning() {
    // Body(x) holds iff x lies outside the box or the residual holds.
    let tp = controller();
    let nf = normalise_property(&tp, "safe", &Externals::default()).unwrap();
    let Formula::Quant { q, var, body } = &nf else { panic!() };
    let (domain, residual) = extract_domain(*q, var, body, None, true).unwrap();
    let domain = domain.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut points: Vec<Vec<Q>> = (0..200).map(|_| vec![ratio(rng.gen_range(-40..=40), 10), ratio(rng.gen_range(-40..=40), 10)]).collect();
    points.push(vec![ratio(13, 4), ratio(-13, 4)]);
    points.push(vec![ratio(-13, 4), ratio(0, 1)]);
    for p in points {
        let g = At(p.clone(), var.id);
        let inside = (0..2).all(|i| domain.lo[i] <= p[i] && p[i] <= domain.hi[i]);
        assert_eq!(body.eval(&g).unwrap(), !inside || residual.eval(&g).unwrap(), "at {p:?}");
    }
}

#[test]
fn empty_domain_is_vacuous() {
    let tp = typed(
        "@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = forall x . 1 <= x ! 0 <= 0 => f x ! 0 >= 0\n",
    );
    let lp = compile_loss(&tp, "p", &Externals::default(), &LossOptions::default()).unwrap();
    assert_eq!(lp.root, LossTerm::Const(int(0)));
}

#[test]
fn single_weight_gradient() {
    let tp = typed(
        "@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = forall x . 1 <= x ! 0 <= 1 => f x ! 0 <= 0\n",
    );
    let lp = compile_loss(&tp, "p", &Externals::default(), &LossOptions::default()).unwrap();
    let net = Network::new(vec![(vec![vec![int(2)]], vec![int(0)], Activation::Identity)]).unwrap();
    let g = grad_loss(&lp, &resources("f", &net), 0, 10).unwrap();
    assert_eq!(g.value, 2.0);
    assert_eq!(g.grads["f"], vec![1.0, 1.0]);
}

#[test]
fn constant_property_has_zero_gradient() {
    let tp = typed("@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = 1 <= 2\n");
    let lp = compile_loss(&tp, "p", &Externals::default(), &LossOptions::default()).unwrap();
    let net = Network::new(vec![(vec![vec![int(2)]], vec![int(0)], Activation::Identity)]).unwrap();
    let g = grad_loss(&lp, &resources("f", &net), 0, 10).unwrap();
    assert_eq!((g.value, g.grads["f"].clone()), (0.0, vec![0.0, 0.0]));
}

/// Relative error between forward-mode and central-difference gradients.
fn gradient_error(lp: &specbridge_core::loss::LossProgram, net: &Network, seed: u64, samples: usize) -> Option<f64> {
    let res = resources("controller", net);
    let g = grad_loss(lp, &res, seed, samples).unwrap();
    if g.kink_margin < 1e-3 {
        return None;
    }
    let w = net.params_f64();
    let h = 1e-5;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..w.len() {
        let at = |d: f64| {
            let mut v = w.clone();
            v[i] += d;
            let mut k = f64::INFINITY;
            eval_loss_with(lp, &res, &BTreeMap::from([("controller".to_string(), v)]), seed, samples, &mut k).unwrap()
        };
        let fd = (at(h) - at(-h)) / (2.0 * h);
        num += (fd - g.grads["controller"][i]).powi(2);
        den += fd.powi(2);
    }
    Some(num.sqrt() / den.sqrt().max(1e-12))
}

#[test]
fn gradients_match_finite_differences() {
    let tp = controller();
    let lp = compile_loss(&tp, "safe", &Externals::default(), &LossOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 3 {
        let net = random_relu_network(&mut rng, &[2, 16, 16, 1]);
        if let Some(err) = gradient_error(&lp, &net, checked, 10) {
            assert!(err < 1e-4, "relative error {err}");
            checked += 1;
        }
    }
}

#[test]
fn loss_is_monotone_in_the_threshold() {
    let tp = typed(
        "@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@parameter\nc : Rat\n\n@property\np : Bool\np = forall x . -1 <= x ! 0 <= 1 => f x ! 0 <= c\n",
    );
    let lp = compile_loss(&tp, "p", &Externals::default(), &LossOptions::default()).unwrap();
    assert_eq!(lp.parameters, vec!["c".to_string()]);
    let net = Network::new(vec![(vec![vec![int(3)]], vec![ratio(1, 2)], Activation::Identity)]).unwrap();
    let mut res = resources("f", &net);
    let mut last = f64::INFINITY;
    for i in -20..=20 {
        res.params.insert("c".into(), i as f64 / 4.0);
        let l = eval_loss(&lp, &res, 5, 50).unwrap();
        assert!(l <= last);
        last = l;
    }
    assert_eq!(last, 0.0);
}

#[test]
fn resources_are_validated() {
    let tp = controller();
    let lp = compile_loss(&tp, "safe", &Externals::default(), &LossOptions::default()).unwrap();
    let err = eval_loss(&lp, &Resources::default(), 0, 10).unwrap_err();
    assert!(matches!(err, LossError::MissingResource { .. }));
    let wide = Network::new(vec![(vec![vec![int(1); 3]], vec![int(0)], Activation::Identity)]).unwrap();
    let err = eval_loss(&lp, &resources("controller", &wide), 0, 10).unwrap_err();
    assert!(matches!(err, LossError::Shape { .. }));
    assert_eq!(eval_loss(&lp, &resources("controller", &good_controller()), 0, 0).unwrap_err(), LossError::NoSamples);
}

#[test]
fn undecided_conditionals_are_rejected() {
    let tp = typed(
        "@network\nf : Tensor Rat [1] -> Tensor Rat [1]\n\n@property\np : Bool\np = forall x . -1 <= x ! 0 <= 1 => (if f x ! 0 >= 0 then f x ! 0 else 0) <= 1\n",
    );
    let err = compile_loss(&tp, "p", &Externals::default(), &LossOptions::default()).unwrap_err();
    assert!(matches!(err, LossError::Unsupported { .. }));
}

#[test]
fn samples_are_reproducible_and_in_the_box() {
    let d = Domain { lo: vec![int(-1), int(2)], hi: vec![int(1), int(3)] };
    for i in 0..100 {
        let p = sample_point(7, 1, i, &d);
        assert_eq!(p, sample_point(7, 1, i, &d));
        assert!((-1.0..=1.0).contains(&p[0]) && (2.0..=3.0).contains(&p[1]));
    }
    assert_ne!(sample_point(7, 1, 0, &d), sample_point(7, 2, 0, &d));
    assert_ne!(sample_point(7, 1, 0, &d), sample_point(8, 1, 0, &d));
    let _ = (QuantVar { id: 0, name: "x".into(), dims: vec![] }, Quant::Forall, from_f64(0.5));
}

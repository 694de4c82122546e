//! Random dense networks and a grid-search falsification oracle.

use rand::Rng;
use specbridge_core::network::{Activation, Network};
use specbridge_core::rational::{int, ratio, to_f64, Q};

/// ReLU hidden layers, identity output layer; weights are multiples of
/// 1/64 in [-1, 1], biases multiples of 1/64 in [-1/2, 1/2].
pub fn random_relu_network(rng: &mut impl Rng, dims: &[usize]) -> Network {
    let mut layers = Vec::new();
    for (i, w) in dims.windows(2).enumerate() {
        let (m, n) = (w[0], w[1]);
        let weights = (0..n).map(|_| (0..m).map(|_| ratio(rng.gen_range(-64..=64), 64)).collect()).collect();
        let bias = (0..n).map(|_| ratio(rng.gen_range(-32..=32), 64)).collect();
        let act = if i + 2 == dims.len() { Activation::Identity } else { Activation::Relu };
        layers.push((weights, bias, act));
    }
    Network::new(layers).unwrap()
}

/// The good controller realised on the embedding space.
pub fn good_controller() -> Network {
    Network::new(vec![(vec![vec![int(-16), int(8)]], vec![int(4)], Activation::Identity)]).unwrap()
}

pub fn zero_controller() -> Network {
    Network::new(vec![(vec![vec![int(0), int(0)]], vec![int(0)], Activation::Identity)]).unwrap()
}

/// Evenly spaced rationals `lo, ..., hi` (`n >= 2` points).
pub fn grid_axis(lo: &Q, hi: &Q, n: usize) -> Vec<Q> {
    (0..n).map(|i| lo + (hi - lo) * ratio(i as i64, (n - 1) as i64)).collect()
}

use std::collections::BTreeMap;

use specbridge_core::qelim::{LinearConstraint, LinearExpr, ReconstructionMap};
use specbridge_core::verify::{Application, QVar, Query};

/// A random query on a 2-input, 1-output network: a box on the inputs and
/// one half-space over inputs and output, `a·x + b·y <= c`.
pub struct BoxHalfspace {
    pub lo: [Q; 2],
    pub hi: [Q; 2],
    pub a: [Q; 2],
    pub b: Q,
    pub c: Q,
}

impl BoxHalfspace {
    pub fn random(rng: &mut impl Rng) -> Self {
        let mut corner = || {
            let l = ratio(rng.gen_range(-16..=8), 8);
            let w = ratio(rng.gen_range(1..=16), 8);
            (l.clone(), l + w)
        };
        let (l0, h0) = corner();
        let (l1, h1) = corner();
        let a = [ratio(rng.gen_range(-4..=4), 2), ratio(rng.gen_range(-4..=4), 2)];
        let b = if rng.gen_bool(0.8) { ratio(rng.gen_range(1..=4), 2) } else { ratio(rng.gen_range(-4..=-1), 2) };
        let c = ratio(rng.gen_range(-12..=12), 8);
        BoxHalfspace { lo: [l0, l1], hi: [h0, h1], a, b, c }
    }

    pub fn query(&self) -> Query {
        let x = |i| LinearExpr::var(QVar::Input(i));
        let k = |q: &Q| LinearExpr::constant(q.clone());
        let mut constraints = Vec::new();
        for i in 0..2 {
            constraints.push(LinearConstraint::le(&k(&self.lo[i]), &x(i)));
            constraints.push(LinearConstraint::le(&x(i), &k(&self.hi[i])));
        }
        let lhs = x(0).scale(&self.a[0]).add(&x(1).scale(&self.a[1])).add(&LinearExpr::term(QVar::Output(0), self.b.clone()));
        constraints.push(LinearConstraint::le(&lhs, &k(&self.c)));
        Query {
            id: 1,
            constraints,
            applications: vec![Application {
                network: "f".into(),
                inputs: vec![0, 1],
                outputs: vec![0],
                embedding: vec![LinearExpr::var(QVar::Problem(0, 0)), LinearExpr::var(QVar::Problem(0, 1))],
            }],
            recon: ReconstructionMap::default(),
        }
    }

    pub fn holds_at(&self, net: &Network, x: &[Q; 2]) -> bool {
        let y = &net.eval_exact(x).unwrap()[0];
        let inside = (0..2).all(|i| self.lo[i] <= x[i] && x[i] <= self.hi[i]);
        inside && &self.a[0] * &x[0] + &self.a[1] * &x[1] + &self.b * y <= self.c
    }

    /// Searches an `n × n` grid over the box for a satisfying point. Points
    /// whose float margin is clearly positive are skipped; the rest are
    /// decided exactly.
    pub fn grid_search(&self, net: &Network, n: usize) -> Option<[Q; 2]> {
        let xs = grid_axis(&self.lo[0], &self.hi[0], n);
        let ys = grid_axis(&self.lo[1], &self.hi[1], n);
        let f = |q: &Q| to_f64(q);
        let (a0, a1, b, c) = (f(&self.a[0]), f(&self.a[1]), f(&self.b), f(&self.c));
        for x0 in &xs {
            for x1 in &ys {
                let p = [x0.clone(), x1.clone()];
                let (u, v) = (f(x0), f(x1));
                let y = net.eval_f64(&[u, v]).unwrap()[0];
                let margin = a0 * u + a1 * v + b * y - c;
                if margin <= 1e-6 && self.holds_at(net, &p) {
                    return Some(p);
                }
            }
        }
        None
    }
}

pub fn networks(name: &str, net: Network) -> BTreeMap<String, Network> {
    BTreeMap::from([(name.to_string(), net)])
}

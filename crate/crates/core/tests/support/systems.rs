//! Random linear systems with a planted solution or a planted Farkas
//! certificate of infeasibility.

use std::collections::BTreeMap;

use rand::Rng;
use specbridge_core::qelim::{LinRel, LinearConstraint, LinearExpr};
use specbridge_core::rational::{int, ratio, Q};

pub type System = Vec<LinearConstraint<usize>>;

fn random_row(rng: &mut impl Rng, nvars: usize, bound: i64) -> Vec<i64> {
    loop {
        let row: Vec<i64> = (0..nvars).map(|_| rng.gen_range(-bound..=bound)).collect();
        if row.iter().any(|&c| c != 0) {
            return row;
        }
    }
}

fn expr(row: &[i64], constant: Q) -> LinearExpr<usize> {
    let mut e = LinearExpr::constant(constant);
    for (v, &c) in row.iter().enumerate() {
        e.add_term(v, int(c));
    }
    e
}

fn dot(row: &[i64], p: &[Q]) -> Q {
    row.iter().zip(p).map(|(&c, x)| int(c) * x).sum()
}

/// A system satisfied by the returned point.
pub fn planted_feasible(rng: &mut impl Rng, nvars: usize, ncons: usize) -> (System, BTreeMap<usize, Q>) {
    let point: Vec<Q> = (0..nvars).map(|_| ratio(rng.gen_range(-12..=12), 4)).collect();
    let mut sys = Vec::with_capacity(ncons);
    for _ in 0..ncons {
        let row = random_row(rng, nvars, 5);
        let at = dot(&row, &point);
        let roll = rng.gen_range(0..8);
        let (rel, slack) = match roll {
            0 => (LinRel::Eq, int(0)),
            1..=4 => (LinRel::Le, ratio(rng.gen_range(0..=6), 2)),
            _ => (LinRel::Lt, ratio(rng.gen_range(1..=6), 2)),
        };
        // row·x + k rel 0 with k = -(row·p) - slack
        sys.push(LinearConstraint::new(expr(&row, -at - slack), rel));
    }
    (sys, point.into_iter().enumerate().collect())
}

/// A system whose first rows sum (with unit multipliers) to `0 <= -c`
/// for some c > 0, so it has no solution.
pub fn planted_infeasible(rng: &mut impl Rng, nvars: usize, ncons: usize) -> System {
    let k = rng.gen_range(2..=ncons.clamp(2, 4));
    let mut rows: Vec<Vec<i64>> = Vec::new();
    loop {
        rows.clear();
        for _ in 0..k - 1 {
            rows.push(random_row(rng, nvars, 2));
        }
        let closing: Vec<i64> = (0..nvars).map(|v| -rows.iter().map(|r| r[v]).sum::<i64>()).collect();
        if closing.iter().all(|c| c.abs() <= 5) && closing.iter().any(|&c| c != 0) {
            rows.push(closing);
            break;
        }
    }
    let mut constants: Vec<Q> = (0..k).map(|_| ratio(rng.gen_range(-8..=8), 2)).collect();
    let total: Q = constants.iter().sum();
    if total <= int(0) {
        constants[0] += -total + ratio(rng.gen_range(1..=4), 2);
    }
    let mut sys: System = rows
        .iter()
        .zip(constants)
        .map(|(r, c)| {
            let rel = if rng.gen_bool(0.3) { LinRel::Lt } else { LinRel::Le };
            LinearConstraint::new(expr(r, c), rel)
        })
        .collect();
    for _ in k..ncons {
        let row = random_row(rng, nvars, 5);
        sys.push(LinearConstraint::new(expr(&row, ratio(rng.gen_range(-10..=10), 2)), LinRel::Le));
    }
    // Shuffle so the certificate rows are not always first.
    for i in (1..sys.len()).rev() {
        let j = rng.gen_range(0..=i);
        sys.swap(i, j);
    }
    sys
}

pub fn satisfies(sys: &System, assign: &BTreeMap<usize, Q>) -> bool {
    sys.iter().all(|c| c.holds(assign) == Some(true))
}

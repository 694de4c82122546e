//! Random ground formulas with an independent exact evaluator.

use rand::Rng;
use specbridge_core::nbe::{Arith, Formula};
use specbridge_core::rational::{ratio, Q};
use specbridge_core::typecheck::{ArithOp, Rel};

fn leaf(rng: &mut impl Rng) -> Arith {
    Arith::Const(ratio(rng.gen_range(-16..=16), 4))
}

/// Sums and small products of quarter-integers, exact in `f64`.
pub fn ground_arith(rng: &mut impl Rng, depth: usize) -> Arith {
    if depth == 0 || rng.gen_bool(0.4) {
        return leaf(rng);
    }
    let op = [ArithOp::Add, ArithOp::Sub, ArithOp::Mul][rng.gen_range(0..3)];
    Arith::Bin(op, Box::new(ground_arith(rng, depth - 1)), Box::new(ground_arith(rng, depth - 1)))
}

/// Raw (unfolded) formula of depth at most `depth` whose atoms use
/// relations from `rels`.
pub fn ground_formula(rng: &mut impl Rng, depth: usize, rels: &[Rel]) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        let rel = rels[rng.gen_range(0..rels.len())];
        return Formula::Atom(rel, ground_arith(rng, 1), ground_arith(rng, 1));
    }
    let a = Box::new(ground_formula(rng, depth - 1, rels));
    match rng.gen_range(0..5) {
        0 => Formula::Not(a),
        1 => Formula::Implies(a, Box::new(ground_formula(rng, depth - 1, rels))),
        2 => Formula::Or(a, Box::new(ground_formula(rng, depth - 1, rels))),
        _ => Formula::And(a, Box::new(ground_formula(rng, depth - 1, rels))),
    }
}

pub fn value(a: &Arith) -> Q {
    match a {
        Arith::Const(q) => q.clone(),
        Arith::Bin(op, x, y) => {
            let (x, y) = (value(x), value(y));
            match op {
                ArithOp::Add => x + y,
                ArithOp::Sub => x - y,
                ArithOp::Mul => x * y,
                ArithOp::Div => x / y,
            }
        }
        Arith::Neg(x) => -value(x),
        other => panic!("not ground: {other:?}"),
    }
}

pub fn truth(f: &Formula) -> bool {
    match f {
        Formula::Const(b) => *b,
        Formula::Atom(rel, a, b) => {
            let (a, b) = (value(a), value(b));
            match rel {
                Rel::Eq => a == b,
                Rel::Neq => a != b,
                Rel::Le => a <= b,
                Rel::Lt => a < b,
                Rel::Ge => a >= b,
                Rel::Gt => a > b,
            }
        }
        Formula::Not(a) => !truth(a),
        Formula::And(a, b) => truth(a) && truth(b),
        Formula::Or(a, b) => truth(a) || truth(b),
        Formula::Implies(a, b) => !truth(a) || truth(b),
        Formula::Quant { .. } => panic!("not ground"),
    }
}

/// Smallest `|a - b|` over the atoms of `f`.
pub fn min_margin(f: &Formula) -> Q {
    match f {
        Formula::Atom(_, a, b) => specbridge_core::rational::abs(&(value(a) - value(b))),
        Formula::Not(a) => min_margin(a),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => min_margin(a).min(min_margin(b)),
        _ => ratio(1_000_000, 1),
    }
}

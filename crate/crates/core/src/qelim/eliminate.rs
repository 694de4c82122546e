use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::linear::{prune, LinRel, LinearConstraint, LinearExpr};
use crate::rational::Q;
use num_traits::{One, Signed, Zero};

/// A bound `var >= expr` (lower) or `var <= expr` (upper), possibly strict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bound<V: Ord> {
    pub expr: LinearExpr<V>,
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step<V: Ord> {
    /// Solved exactly by Gaussian elimination.
    Solved { var: V, expr: LinearExpr<V> },
    /// Projected out by Fourier–Motzkin; recovered inside its bounds.
    Bounded { var: V, lower: Vec<Bound<V>>, upper: Vec<Bound<V>> },
}

/// How to recover eliminated variables, in elimination order. Each step
/// only mentions variables eliminated later or kept, so replay runs
/// backwards.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReconstructionMap<V: Ord> {
    pub steps: Vec<Step<V>>,
}

impl<V: Ord> Default for ReconstructionMap<V> {
    fn default() -> Self {
        ReconstructionMap { steps: Vec::new() }
    }
}

impl<V: Ord + Clone> ReconstructionMap<V> {
    pub fn extend(&mut self, other: ReconstructionMap<V>) {
        self.steps.extend(other.steps);
    }

    pub fn eliminated(&self) -> impl Iterator<Item = &V> {
        self.steps.iter().map(|s| match s {
            Step::Solved { var, .. } | Step::Bounded { var, .. } => var,
        })
    }

    /// Extends `assign` (over the kept variables) to every eliminated
    /// variable. Variables a step needs but `assign` lacks count as 0.
    /// An FM variable takes the midpoint of its tightest bounds, or the
    /// single bound ± 1, or 0 when unbounded.
    pub fn replay(&self, assign: &mut BTreeMap<V, Q>) {
        for step in self.steps.iter().rev() {
            match step {
                Step::Solved { var, expr } => {
                    let v = eval_default(expr, assign);
                    assign.insert(var.clone(), v);
                }
                Step::Bounded { var, lower, upper } => {
                    let lo = lower.iter().map(|b| eval_default(&b.expr, assign)).max();
                    let hi = upper.iter().map(|b| eval_default(&b.expr, assign)).min();
                    let v = match (lo, hi) {
                        (Some(l), Some(h)) => (l + h) / Q::from_integer(2.into()),
                        (Some(l), None) => l + Q::one(),
                        (None, Some(h)) => h - Q::one(),
                        (None, None) => Q::zero(),
                    };
                    assign.insert(var.clone(), v);
                }
            }
        }
    }
}

fn eval_default<V: Ord + Clone>(e: &LinearExpr<V>, assign: &BTreeMap<V, Q>) -> Q {
    let mut total = e.constant.clone();
    for (v, c) in &e.coeffs {
        if let Some(x) = assign.get(v) {
            total += c * x;
        }
    }
    total
}

/// Marker for an inconsistent equality system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Infeasible;

/// Solves `eqs` for each target with a usable pivot and substitutes it out.
/// Targets without a pivot are left for Fourier–Motzkin. Residual
/// equalities mention no solved target.
pub fn gaussian_eliminate<V: Ord + Clone>(
    eqs: &[LinearConstraint<V>],
    targets: &[V],
) -> Result<(ReconstructionMap<V>, Vec<LinearConstraint<V>>), Infeasible> {
    debug_assert!(eqs.iter().all(|c| c.rel == LinRel::Eq));
    let mut rows: Vec<LinearExpr<V>> = eqs.iter().map(|c| c.expr.clone()).collect();
    let mut recon = ReconstructionMap::default();
    for t in targets {
        let Some(pivot) = rows.iter().position(|r| r.mentions(t)) else {
            continue;
        };
        let row = rows.remove(pivot);
        let c = row.coeff(t);
        let mut rest = row.clone();
        rest.coeffs.remove(t);
        // c·t + rest = 0  ⇒  t = -rest / c
        let solved = rest.scale(&(-Q::one() / c));
        for r in rows.iter_mut() {
            *r = r.substitute(t, &solved);
        }
        recon.steps.push(Step::Solved { var: t.clone(), expr: solved });
    }
    let mut residual = Vec::new();
    for r in rows {
        if r.is_constant() {
            if !r.constant.is_zero() {
                return Err(Infeasible);
            }
        } else {
            residual.push(LinearConstraint::new(r, LinRel::Eq));
        }
    }
    Ok((recon, residual))
}

/// Projects `v` out of a system of `<=`/`<` constraints (equalities
/// mentioning `v` are split into two inequalities). Every lower bound is
/// combined with every upper bound; a combination is strict if either
/// parent is. Constant tautologies and duplicates are dropped.
pub fn fourier_motzkin<V: Ord + Clone>(cs: &[LinearConstraint<V>], v: &V) -> Vec<LinearConstraint<V>> {
    fourier_motzkin_with_bounds(cs, v).0
}

fn fourier_motzkin_with_bounds<V: Ord + Clone>(
    cs: &[LinearConstraint<V>],
    v: &V,
) -> (Vec<LinearConstraint<V>>, Vec<Bound<V>>, Vec<Bound<V>>) {
    let mut lowers: Vec<(LinearExpr<V>, bool)> = Vec::new();
    let mut uppers: Vec<(LinearExpr<V>, bool)> = Vec::new();
    let mut out = Vec::new();
    for c in cs {
        if !c.mentions(v) {
            out.push(c.clone());
            continue;
        }
        let parts: Vec<(LinearExpr<V>, bool)> = match c.rel {
            LinRel::Eq => alloc::vec![(c.expr.clone(), false), (c.expr.scale(&-Q::one()), false)],
            LinRel::Le => alloc::vec![(c.expr.clone(), false)],
            LinRel::Lt => alloc::vec![(c.expr.clone(), true)],
        };
        for (e, strict) in parts {
            if e.coeff(v).is_positive() {
                uppers.push((e, strict));
            } else {
                lowers.push((e, strict));
            }
        }
    }
    for (l, ls) in &lowers {
        let a = l.coeff(v); // < 0
        for (u, us) in &uppers {
            let b = u.coeff(v); // > 0
            let mut combo = l.scale(&b).add(&u.scale(&-a.clone()));
            combo.coeffs.remove(v);
            let rel = if *ls || *us { LinRel::Lt } else { LinRel::Le };
            out.push(LinearConstraint::new(combo, rel));
        }
    }
    let bound = |(e, strict): &(LinearExpr<V>, bool)| {
        let c = e.coeff(v);
        let mut rest = e.clone();
        rest.coeffs.remove(v);
        Bound { expr: rest.scale(&(-Q::one() / c)), strict: *strict }
    };
    let lower = lowers.iter().map(bound).collect();
    let upper = uppers.iter().map(bound).collect();
    (prune(out), lower, upper)
}

/// Eliminates every variable outside `keep`: Gaussian elimination on the
/// equalities first, then Fourier–Motzkin on what remains, fewest
/// occurrences first. If the system is found inconsistent, the reduced
/// system is the single constraint `1 <= 0`.
pub fn eliminate_variables<V: Ord + Clone>(
    cs: &[LinearConstraint<V>],
    keep: &BTreeSet<V>,
) -> (Vec<LinearConstraint<V>>, ReconstructionMap<V>) {
    let mut targets: BTreeSet<V> = BTreeSet::new();
    for c in cs {
        for v in c.expr.vars() {
            if !keep.contains(v) {
                targets.insert(v.clone());
            }
        }
    }
    let infeasible = || alloc::vec![LinearConstraint::new(LinearExpr::constant(Q::one()), LinRel::Le)];

    let (eqs, ineqs): (Vec<_>, Vec<_>) = cs.iter().cloned().partition(|c| c.rel == LinRel::Eq);
    let target_list: Vec<V> = targets.iter().cloned().collect();
    let (mut recon, residual_eqs) = match gaussian_eliminate(&eqs, &target_list) {
        Ok(r) => r,
        Err(Infeasible) => return (infeasible(), ReconstructionMap::default()),
    };
    let mut system: Vec<LinearConstraint<V>> = ineqs;
    for step in &recon.steps {
        if let Step::Solved { var, expr } = step {
            system = system.iter().map(|c| c.substitute(var, expr)).collect();
        }
    }
    system.extend(residual_eqs);
    for step in &recon.steps {
        if let Step::Solved { var, .. } = step {
            targets.remove(var);
        }
    }
    system = prune(system);

    while !targets.is_empty() {
        if system.iter().any(|c| c.constant_truth() == Some(false)) {
            return (infeasible(), recon);
        }
        let next = targets
            .iter()
            .min_by_key(|t| system.iter().filter(|c| c.mentions(t)).count())
            .cloned()
            .expect("targets is non-empty");
        targets.remove(&next);
        let (projected, lower, upper) = fourier_motzkin_with_bounds(&system, &next);
        recon.steps.push(Step::Bounded { var: next, lower, upper });
        system = projected;
    }
    if system.iter().any(|c| c.constant_truth() == Some(false)) {
        return (infeasible(), recon);
    }
    (system, recon)
}

/// Decides satisfiability over the rationals.
pub fn is_feasible<V: Ord + Clone>(cs: &[LinearConstraint<V>]) -> bool {
    find_solution(cs).is_some()
}

/// A satisfying assignment, if one exists.
pub fn find_solution<V: Ord + Clone>(cs: &[LinearConstraint<V>]) -> Option<BTreeMap<V, Q>> {
    let (reduced, recon) = eliminate_variables(cs, &BTreeSet::new());
    if reduced.iter().any(|c| c.constant_truth() != Some(true)) {
        return None;
    }
    let mut assign = BTreeMap::new();
    recon.replay(&mut assign);
    Some(assign)
}

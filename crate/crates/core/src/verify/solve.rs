//! Complete decision procedure for queries over piecewise-linear networks:
//! depth-first search over ReLU activation patterns, pruning any prefix
//! whose guards are infeasible, with Fourier–Motzkin as the oracle.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use super::compile::{QVar, Query};
use super::VerifyError;
use crate::network::{Activation, Network};
use crate::nbe::NetworkOracle;
use crate::qelim::{find_solution, is_feasible, LinearConstraint, LinearExpr};
use crate::rational::{zero, Q};

/// Default limit on the total number of ReLU units in a query.
pub const DEFAULT_PATTERN_BUDGET: usize = 24;

static SOLVER_CALLS: AtomicUsize = AtomicUsize::new(0);

/// Number of [`solve_query`] invocations in this process.
pub fn solver_calls() -> usize {
    SOLVER_CALLS.load(Ordering::SeqCst)
}

/// Implementations for network names.
pub type Networks = BTreeMap<String, Network>;

impl NetworkOracle for Networks {
    fn eval(&self, network: &str, input: &[Q]) -> Option<Vec<Q>> {
        self.get(network)?.eval_exact(input).ok()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveResult {
    /// Values for every `x` and `y` variable of the query.
    Sat(BTreeMap<QVar, Q>),
    Unsat,
}

/// Frontier of one network application during the search: the affine
/// expressions of the current layer's outputs, and the next unit to split.
#[derive(Clone)]
struct Cursor {
    layer: usize,
    unit: usize,
    pre: Vec<LinearExpr<QVar>>,
    done: Vec<LinearExpr<QVar>>,
}

pub fn solve_query(q: &Query, networks: &Networks, budget: usize) -> Result<SolveResult, VerifyError> {
    SOLVER_CALLS.fetch_add(1, Ordering::SeqCst);
    let mut nets = Vec::with_capacity(q.applications.len());
    for app in &q.applications {
        let net = networks.get(&app.network).ok_or_else(|| VerifyError::UnboundNetwork { name: app.network.clone() })?;
        if net.input_dim() != app.inputs.len() || net.output_dim() != app.outputs.len() {
            return Err(VerifyError::NetworkShape {
                name: app.network.clone(),
                expected: (app.inputs.len(), app.outputs.len()),
                actual: (net.input_dim(), net.output_dim()),
            });
        }
        nets.push(net);
    }
    let relus: usize = nets.iter().map(|n| n.relu_count()).sum();
    if relus > budget {
        return Err(VerifyError::PatternBudgetExceeded { relus, budget });
    }
    if !is_feasible(&q.constraints) {
        return Ok(SolveResult::Unsat);
    }
    let cursors: Vec<Cursor> = q
        .applications
        .iter()
        .zip(&nets)
        .map(|(app, net)| {
            let inputs: Vec<LinearExpr<QVar>> = app.inputs.iter().map(|&i| LinearExpr::var(QVar::Input(i))).collect();
            start_layer(net, 0, inputs)
        })
        .collect();
    let mut search = Search { q, nets: &nets };
    match search.dfs(q.constraints.clone(), cursors) {
        Some(mut assign) => {
            complete_witness(q, &nets, &mut assign)?;
            Ok(SolveResult::Sat(assign))
        }
        None => Ok(SolveResult::Unsat),
    }
}

fn start_layer(net: &Network, layer: usize, inputs: Vec<LinearExpr<QVar>>) -> Cursor {
    Cursor { layer, unit: 0, pre: net.layer_affine(layer, &inputs), done: Vec::new() }
}

/// Advances through identity layers; returns `true` once the network's
/// outputs are fully determined.
fn settle(net: &Network, c: &mut Cursor) -> bool {
    loop {
        if c.layer == net.layers().len() {
            return true;
        }
        let layer = &net.layers()[c.layer];
        if layer.activation == Activation::Identity {
            let outs = core::mem::take(&mut c.pre);
            advance(net, c, outs);
            continue;
        }
        if c.unit == c.pre.len() {
            let outs = core::mem::take(&mut c.done);
            advance(net, c, outs);
            continue;
        }
        return false;
    }
}

fn advance(net: &Network, c: &mut Cursor, outs: Vec<LinearExpr<QVar>>) {
    c.layer += 1;
    c.unit = 0;
    c.done = Vec::new();
    if c.layer < net.layers().len() {
        c.pre = net.layer_affine(c.layer, &outs);
    } else {
        c.pre = outs;
    }
}

struct Search<'a> {
    q: &'a Query,
    nets: &'a [&'a Network],
}

impl Search<'_> {
    fn dfs(&mut self, cs: Vec<LinearConstraint<QVar>>, mut cursors: Vec<Cursor>) -> Option<BTreeMap<QVar, Q>> {
        let pending = (0..cursors.len()).find(|&i| !settle(self.nets[i], &mut cursors[i]));
        let Some(i) = pending else {
            let mut all = cs;
            for (app, c) in self.q.applications.iter().zip(&cursors) {
                for (y, e) in app.outputs.iter().zip(&c.pre) {
                    all.push(LinearConstraint::eq(&LinearExpr::var(QVar::Output(*y)), e));
                }
            }
            return find_solution(&all);
        };
        let pre = cursors[i].pre[cursors[i].unit].clone();
        let z = LinearExpr::zero();
        for active in [true, false] {
            let guard = if active { LinearConstraint::ge(&pre, &z) } else { LinearConstraint::lt(&pre, &z) };
            let mut next = cs.clone();
            next.push(guard);
            if !is_feasible(&next) {
                continue;
            }
            let mut cur = cursors.clone();
            cur[i].done.push(if active { pre.clone() } else { LinearExpr::zero() });
            cur[i].unit += 1;
            if let Some(w) = self.dfs(next, cur) {
                return Some(w);
            }
        }
        None
    }
}

/// Fills unconstrained inputs with 0, recomputes every output with the
/// exact forward pass and re-checks the query constraints.
fn complete_witness(q: &Query, nets: &[&Network], assign: &mut BTreeMap<QVar, Q>) -> Result<(), VerifyError> {
    assign.retain(|v, _| v.is_embedding());
    for (app, net) in q.applications.iter().zip(nets) {
        let x: Vec<Q> = app.inputs.iter().map(|&i| assign.entry(QVar::Input(i)).or_insert_with(zero).clone()).collect();
        let y = net.eval_exact(&x).map_err(|e| VerifyError::Internal(format!("{e}")))?;
        for (j, v) in app.outputs.iter().zip(y) {
            if let Some(old) = assign.insert(QVar::Output(*j), v.clone()) {
                if old != v {
                    return Err(VerifyError::Internal(format!("witness output y{j} = {old} but the network computes {v}")));
                }
            }
        }
    }
    if let Some(c) = q.constraints.iter().find(|c| c.holds(assign) != Some(true)) {
        return Err(VerifyError::Internal(format!("witness violates query constraint {c}")));
    }
    Ok(())
}

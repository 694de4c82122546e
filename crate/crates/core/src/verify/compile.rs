//! Property → and/or tree of embedding-space queries.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::VerifyError;
use crate::nbe::{evaluate_property, Arith, Externals, Formula, QuantVar, VarId};
use crate::qelim::{eliminate_variables, LinearConstraint, LinearExpr, ReconstructionMap};
use crate::rational::one;
use crate::typecheck::shape_of;
use num_traits::Zero;
use crate::typecheck::{ArithOp, Quant, Rel, TypedProgram};

/// Query variables, ordered inputs < outputs < problem-space components.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QVar {
    /// Network input `x<i>`, numbered across all applications.
    Input(usize),
    /// Network output `y<j>`, numbered across all applications.
    Output(usize),
    /// Component `offset` of quantified variable `var`.
    Problem(VarId, usize),
}

impl QVar {
    pub fn is_embedding(&self) -> bool {
        !matches!(self, QVar::Problem(..))
    }
}

impl fmt::Display for QVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QVar::Input(i) => write!(f, "x{i}"),
            QVar::Output(j) => write!(f, "y{j}"),
            QVar::Problem(v, o) => write!(f, "p{v}_{o}"),
        }
    }
}

/// One network application inside a query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Application {
    pub network: String,
    /// Indices of its `x` variables.
    pub inputs: Vec<usize>,
    /// Indices of its `y` variables.
    pub outputs: Vec<usize>,
    /// The embedding: each input as an affine function of problem-space
    /// variables (and outputs of other applications).
    pub embedding: Vec<LinearExpr<QVar>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    /// 1-based, unique within a tree.
    pub id: usize,
    /// Over `x`/`y` variables only.
    pub constraints: Vec<LinearConstraint<QVar>>,
    pub applications: Vec<Application>,
    /// Recovers problem-space variables from an `x`/`y` assignment.
    pub recon: ReconstructionMap<QVar>,
}

impl Query {
    pub fn input_count(&self) -> usize {
        self.applications.iter().map(|a| a.inputs.len()).sum()
    }

    pub fn output_count(&self) -> usize {
        self.applications.iter().map(|a| a.outputs.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryTree {
    And(Vec<QueryTree>),
    Or(Vec<QueryTree>),
    Leaf(Query),
}

impl QueryTree {
    pub fn leaves(&self) -> Vec<&Query> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Query>) {
        match self {
            QueryTree::Leaf(q) => out.push(q),
            QueryTree::And(cs) | QueryTree::Or(cs) => cs.iter().for_each(|c| c.collect(out)),
        }
    }

    pub fn leaf(&self, id: usize) -> Option<&Query> {
        self.leaves().into_iter().find(|q| q.id == id)
    }
}

/// A compiled property: the query tree for its negation plus what is
/// needed to lift witnesses back.
#[derive(Clone, Debug)]
pub struct CompiledProperty {
    pub property: String,
    pub tree: QueryTree,
    /// Existentially quantified variables of the negated property.
    pub problem_vars: Vec<QuantVar>,
}

/// Upper limit on disjuncts produced by the DNF conversion.
pub const MAX_DISJUNCTS: usize = 4096;

type Literal = (Rel, Arith, Arith);

/// Normalise, negate, prenex, convert to DNF and eliminate the
/// problem-space variables of every disjunct.
pub fn compile_queries(tp: &TypedProgram, property: &str, ext: &Externals) -> Result<CompiledProperty, VerifyError> {
    let formula = evaluate_property(tp, property, ext)?;
    let negated = Formula::not(formula).nnf();
    let mut quants = Vec::new();
    collect_quantifiers(&negated, &mut quants);
    let has_forall = quants.iter().any(|(q, _)| *q == Quant::Forall);
    let has_exists = quants.iter().any(|(q, _)| *q == Quant::Exists);
    if has_forall && has_exists {
        return Err(VerifyError::AlternatingQuantifiers { property: property.into() });
    }
    if has_forall {
        return Err(VerifyError::ExistentialProperty { property: property.into() });
    }
    let problem_vars: Vec<QuantVar> = quants.into_iter().map(|(_, v)| v).collect();
    let matrix = strip_quantifiers(negated);
    let disjuncts = dnf(&matrix)?;

    let mut leaves = Vec::with_capacity(disjuncts.len());
    for (i, conj) in disjuncts.iter().enumerate() {
        leaves.push(QueryTree::Leaf(build_query(tp, i + 1, conj)?));
    }
    let tree = if leaves.len() == 1 { leaves.pop().expect("one leaf") } else { QueryTree::Or(leaves) };
    Ok(CompiledProperty { property: property.into(), tree, problem_vars })
}

fn collect_quantifiers(f: &Formula, out: &mut Vec<(Quant, QuantVar)>) {
    match f {
        Formula::Const(_) | Formula::Atom(..) => {}
        Formula::Not(a) => collect_quantifiers(a, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_quantifiers(a, out);
            collect_quantifiers(b, out);
        }
        Formula::Quant { q, var, body } => {
            out.push((*q, var.clone()));
            collect_quantifiers(body, out);
        }
    }
}

/// Prenex form of an existential NNF formula. Variable ids are unique, so
/// the quantifiers can simply be dropped.
fn strip_quantifiers(f: Formula) -> Formula {
    match f {
        Formula::Quant { body, .. } => strip_quantifiers(*body),
        Formula::And(a, b) => Formula::and(strip_quantifiers(*a), strip_quantifiers(*b)),
        Formula::Or(a, b) => Formula::or(strip_quantifiers(*a), strip_quantifiers(*b)),
        other => other,
    }
}

/// Disjunctive normal form of an NNF matrix. Conditionals inside atoms
/// are case-split and `!=` becomes `<` or `>`.
fn dnf(f: &Formula) -> Result<Vec<Vec<Literal>>, VerifyError> {
    Ok(match f {
        Formula::Const(true) => alloc::vec![Vec::new()],
        Formula::Const(false) => Vec::new(),
        Formula::Atom(r, a, b) => {
            if let Some(split) = split_ite(*r, a, b) {
                return dnf(&split);
            }
            match r {
                Rel::Neq => alloc::vec![
                    alloc::vec![(Rel::Lt, a.clone(), b.clone())],
                    alloc::vec![(Rel::Gt, a.clone(), b.clone())],
                ],
                r => alloc::vec![alloc::vec![(*r, a.clone(), b.clone())]],
            }
        }
        Formula::Or(a, b) => {
            let mut out = dnf(a)?;
            out.extend(dnf(b)?);
            if out.len() > MAX_DISJUNCTS {
                return Err(VerifyError::TooManyDisjuncts { limit: MAX_DISJUNCTS });
            }
            out
        }
        Formula::And(a, b) => {
            let (l, r) = (dnf(a)?, dnf(b)?);
            if l.len().saturating_mul(r.len()) > MAX_DISJUNCTS {
                return Err(VerifyError::TooManyDisjuncts { limit: MAX_DISJUNCTS });
            }
            let mut out = Vec::with_capacity(l.len() * r.len());
            for x in &l {
                for y in &r {
                    let mut c = x.clone();
                    c.extend(y.iter().cloned());
                    out.push(c);
                }
            }
            out
        }
        Formula::Not(_) | Formula::Implies(..) | Formula::Quant { .. } => {
            return Err(VerifyError::Internal("formula is not in prenex negation normal form".into()))
        }
    })
}

/// Rewrites `r(a, b)` where `a` or `b` contains a conditional
/// `if c then t else e` into `(c ∧ r[t]) ∨ (¬c ∧ r[e])`.
fn split_ite(r: Rel, a: &Arith, b: &Arith) -> Option<Formula> {
    let (c, t, e) = find_ite(a).or_else(|| find_ite(b))?;
    let with = |branch: &Arith| Formula::atom(r, replace(a, &t, &e, branch), replace(b, &t, &e, branch));
    let on_true = with(&t);
    let on_false = with(&e);
    let c = *c;
    Some(Formula::or(Formula::and(c.clone().nnf(), on_true), Formula::and(Formula::not(c).nnf(), on_false)))
}

fn find_ite(a: &Arith) -> Option<(Box<Formula>, Arith, Arith)> {
    match a {
        Arith::Ite(c, t, e) => Some((c.clone(), (**t).clone(), (**e).clone())),
        Arith::Bin(_, x, y) => find_ite(x).or_else(|| find_ite(y)),
        Arith::Neg(x) => find_ite(x),
        Arith::Net { input, .. } => input.iter().find_map(find_ite),
        _ => None,
    }
}

/// Replaces the first conditional with branches `(t, e)` by `branch`.
fn replace(a: &Arith, t: &Arith, e: &Arith, branch: &Arith) -> Arith {
    fn go(a: &Arith, t: &Arith, e: &Arith, branch: &Arith, done: &mut bool) -> Arith {
        if *done {
            return a.clone();
        }
        match a {
            Arith::Ite(_, x, y) if **x == *t && **y == *e => {
                *done = true;
                branch.clone()
            }
            Arith::Bin(op, x, y) => {
                let x = go(x, t, e, branch, done);
                let y = go(y, t, e, branch, done);
                Arith::Bin(*op, Box::new(x), Box::new(y))
            }
            Arith::Neg(x) => Arith::Neg(Box::new(go(x, t, e, branch, done))),
            Arith::Net { network, input, output } => Arith::Net {
                network: network.clone(),
                input: input.iter().map(|i| go(i, t, e, branch, done)).collect(),
                output: *output,
            },
            other => other.clone(),
        }
    }
    go(a, t, e, branch, &mut false)
}

/// Collects network applications and linearises atoms for one disjunct.
struct Linearizer<'a> {
    tp: &'a TypedProgram,
    apps: Vec<Application>,
    keys: BTreeMap<(String, Vec<LinearExpr<QVar>>), usize>,
    next_x: usize,
    next_y: usize,
}

impl<'a> Linearizer<'a> {
    fn linear(&mut self, a: &Arith) -> Result<LinearExpr<QVar>, VerifyError> {
        Ok(match a {
            Arith::Const(q) => LinearExpr::constant(q.clone()),
            Arith::Var { var, offset } => LinearExpr::var(QVar::Problem(*var, *offset)),
            Arith::Param(name) => return Err(VerifyError::Opaque { what: format!("parameter `{name}`") }),
            Arith::Data { name, .. } => return Err(VerifyError::Opaque { what: format!("dataset `{name}`") }),
            Arith::Net { network, input, output } => {
                let args = input.iter().map(|i| self.linear(i)).collect::<Result<Vec<_>, _>>()?;
                let app = self.application(network, args)?;
                let y = *self.apps[app]
                    .outputs
                    .get(*output)
                    .ok_or_else(|| VerifyError::Internal(format!("output {output} of `{network}` out of range")))?;
                LinearExpr::var(QVar::Output(y))
            }
            Arith::Neg(x) => self.linear(x)?.scale(&-one()),
            Arith::Bin(op, x, y) => {
                let (l, r) = (self.linear(x)?, self.linear(y)?);
                match op {
                    ArithOp::Add => l.add(&r),
                    ArithOp::Sub => l.sub(&r),
                    ArithOp::Mul if l.is_constant() => r.scale(&l.constant),
                    ArithOp::Mul if r.is_constant() => l.scale(&r.constant),
                    ArithOp::Div if r.is_constant() && !r.constant.is_zero() => l.scale(&(one() / &r.constant)),
                    _ => return Err(VerifyError::NonlinearEmbedding { term: a.to_string() }),
                }
            }
            Arith::Ite(..) => return Err(VerifyError::Internal("conditional survived case splitting".into())),
        })
    }

    /// Index of the application of `network` to `args`, allocating its
    /// `x`/`y` blocks on first use.
    fn application(&mut self, network: &str, args: Vec<LinearExpr<QVar>>) -> Result<usize, VerifyError> {
        let key = (network.to_string(), args);
        if let Some(&i) = self.keys.get(&key) {
            return Ok(i);
        }
        let (_, decl) = self.tp.decl(network).ok_or_else(|| VerifyError::Internal(format!("unknown network `{network}`")))?;
        let (m, n) = shape_of(decl).map_err(|e| VerifyError::Internal(e.to_string()))?;
        if m != key.1.len() {
            return Err(VerifyError::Internal(format!("`{network}` applied to {} inputs, expects {m}", key.1.len())));
        }
        let inputs: Vec<usize> = (self.next_x..self.next_x + m).collect();
        let outputs: Vec<usize> = (self.next_y..self.next_y + n).collect();
        self.next_x += m;
        self.next_y += n;
        let i = self.apps.len();
        self.apps.push(Application { network: network.into(), inputs, outputs, embedding: key.1.clone() });
        self.keys.insert(key, i);
        Ok(i)
    }
}

fn build_query(tp: &TypedProgram, id: usize, conj: &[Literal]) -> Result<Query, VerifyError> {
    let mut lin = Linearizer { tp, apps: Vec::new(), keys: BTreeMap::new(), next_x: 0, next_y: 0 };
    let mut cs: Vec<LinearConstraint<QVar>> = Vec::new();
    for (r, a, b) in conj {
        let (l, rr) = (lin.linear(a)?, lin.linear(b)?);
        cs.push(match r {
            Rel::Le => LinearConstraint::le(&l, &rr),
            Rel::Lt => LinearConstraint::lt(&l, &rr),
            Rel::Ge => LinearConstraint::ge(&l, &rr),
            Rel::Gt => LinearConstraint::gt(&l, &rr),
            Rel::Eq => LinearConstraint::eq(&l, &rr),
            Rel::Neq => return Err(VerifyError::Internal("disequality survived DNF".into())),
        });
    }
    for app in &lin.apps {
        for (x, e) in app.inputs.iter().zip(&app.embedding) {
            cs.push(LinearConstraint::eq(&LinearExpr::var(QVar::Input(*x)), e));
        }
    }
    let keep: BTreeSet<QVar> = cs.iter().flat_map(|c| c.expr.vars().cloned()).filter(QVar::is_embedding).collect();
    let (constraints, recon) = eliminate_variables(&cs, &keep);
    Ok(Query { id, constraints, applications: lin.apps, recon })
}

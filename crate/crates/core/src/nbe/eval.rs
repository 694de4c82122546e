use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::normal::{Arith, Formula, QuantVar, VarId};
use super::value::{Closure, Value};
use super::NbeError;
use crate::frontend::{DeclKind, Span};
use crate::rational::{to_usize, Q};
use crate::typecheck::{shape_of, LogicOp, Quant, Rel, Term, TermNode, Ty, TypedProgram};

/// Exact evaluation of networks on concrete inputs.
pub trait NetworkOracle {
    fn eval(&self, network: &str, input: &[Q]) -> Option<Vec<Q>>;
}

/// Values bound to `@parameter` and `@dataset` declarations. Unbound
/// rational parameters and datasets stay symbolic.
#[derive(Clone, Debug, Default)]
pub struct Externals {
    pub params: BTreeMap<String, Value>,
    pub datasets: BTreeMap<String, Value>,
}

/// Ground values for quantified variables, by variable id, row-major.
pub type Assignment = BTreeMap<VarId, Vec<Q>>;

pub struct Evaluator<'a> {
    tp: &'a TypedProgram,
    ext: &'a Externals,
    oracle: Option<&'a dyn NetworkOracle>,
    ground: Option<&'a Assignment>,
    next_var: VarId,
}

impl<'a> Evaluator<'a> {
    pub fn new(tp: &'a TypedProgram, ext: &'a Externals) -> Self {
        Evaluator { tp, ext, oracle: None, ground: None, next_var: 0 }
    }

    /// Evaluates network applications with concrete inputs through `oracle`.
    pub fn with_oracle(mut self, oracle: &'a dyn NetworkOracle) -> Self {
        self.oracle = Some(oracle);
        self
    }

    /// Instantiates quantified variables found in `assignment` instead of
    /// abstracting over them. Variable ids are handed out in evaluation
    /// order, the same order symbolic evaluation uses.
    pub fn with_ground(mut self, assignment: &'a Assignment) -> Self {
        self.ground = Some(assignment);
        self
    }

    pub fn eval_decl(&mut self, index: usize, inst: &[Ty]) -> Result<Value, NbeError> {
        let d = &self.tp.decls[index];
        match d.kind {
            DeclKind::Def | DeclKind::Property => {
                let body = d.body.as_ref().expect("checked definitions have bodies");
                self.eval(&mut Vec::new(), inst, body)
            }
            DeclKind::Network => Ok(Value::Network(d.name.clone())),
            DeclKind::Parameter => match self.ext.params.get(&d.name) {
                Some(v) => Ok(v.clone()),
                None if d.scheme.ty == Ty::Bool => Err(NbeError::UnboundParameter { name: d.name.clone() }),
                None => Ok(Value::NeutralRat(Arith::Param(d.name.clone()))),
            },
            DeclKind::Dataset => match self.ext.datasets.get(&d.name) {
                Some(v) => Ok(v.clone()),
                None => {
                    let dims = d.scheme.ty.rat_tensor_dims().expect("checked dataset type");
                    let name = d.name.clone();
                    let mut scalars = (0..).map(|offset| Value::NeutralRat(Arith::Data { name: name.clone(), offset }));
                    Ok(Value::tensor(&dims, &mut scalars))
                }
            },
            DeclKind::TypeSynonym => Err(NbeError::Internal("type synonym evaluated as a value".into())),
        }
    }

    fn dim(&self, ty: &Ty, shapes: &[Ty]) -> Result<usize, NbeError> {
        match ty.subst(shapes) {
            Ty::Dim(n) => Ok(n as usize),
            other => Err(NbeError::Internal(alloc::format!("dimension {other} is not concrete"))),
        }
    }

    pub fn eval(&mut self, env: &mut Vec<Value>, shapes: &[Ty], t: &Term) -> Result<Value, NbeError> {
        match &t.node {
            TermNode::Local(l) => Ok(env[*l].clone()),
            TermNode::Global { decl, inst } => {
                let inst: Vec<Ty> = inst.iter().map(|i| i.subst(shapes)).collect();
                self.eval_decl(*decl, &inst)
            }
            TermNode::Num(q) => Ok(Value::Num(q.clone())),
            TermNode::Bool(b) => Ok(Value::Bool(*b)),
            TermNode::Lam { body, .. } => Ok(Value::Closure(Arc::new(Closure {
                env: env.clone(),
                shapes: shapes.to_vec(),
                body: body.clone(),
            }))),
            TermNode::App(f, a) => {
                let f = self.eval(env, shapes, f)?;
                let a = self.eval(env, shapes, a)?;
                self.apply(f, a)
            }
            TermNode::Arith(op, a, b) => {
                let a = self.rat(env, shapes, a)?;
                let b = self.rat(env, shapes, b)?;
                Arith::bin(*op, a, b).map(Value::from_arith).ok_or(NbeError::DivisionByZero { span: t.span })
            }
            TermNode::Neg(a) => Ok(Value::from_arith(Arith::neg(self.rat(env, shapes, a)?))),
            TermNode::Not(a) => Ok(Value::from_formula(Formula::not(self.prop(env, shapes, a)?))),
            TermNode::Logic(op, a, b) => {
                let a = self.prop(env, shapes, a)?;
                let b = self.prop(env, shapes, b)?;
                Ok(Value::from_formula(match op {
                    LogicOp::And => Formula::and(a, b),
                    LogicOp::Or => Formula::or(a, b),
                    LogicOp::Implies => Formula::implies(a, b),
                }))
            }
            TermNode::Cmp(rel, a, b) => {
                if a.ty == Ty::Bool {
                    let a = self.prop(env, shapes, a)?;
                    let b = self.prop(env, shapes, b)?;
                    let same = Formula::or(
                        Formula::and(a.clone(), b.clone()),
                        Formula::and(Formula::not(a), Formula::not(b)),
                    );
                    return Ok(Value::from_formula(if *rel == Rel::Eq { same } else { Formula::not(same) }));
                }
                let a = self.rat(env, shapes, a)?;
                let b = self.rat(env, shapes, b)?;
                Ok(Value::from_formula(Formula::atom(*rel, a, b)))
            }
            TermNode::If(c, x, y) => match self.eval(env, shapes, c)? {
                Value::Bool(true) => self.eval(env, shapes, x),
                Value::Bool(false) => self.eval(env, shapes, y),
                Value::NeutralBool(c) => {
                    let x = self.eval(env, shapes, x)?;
                    let y = self.eval(env, shapes, y)?;
                    blend(&c, x, y, t.span)
                }
                _ => Err(NbeError::Internal("non-Boolean condition".into())),
            },
            TermNode::Quant { q, name, binder_ty, body } => {
                let ty = binder_ty.subst(shapes);
                match &ty {
                    Ty::Bool => {
                        let mut parts = Vec::with_capacity(2);
                        for b in [true, false] {
                            parts.push(self.under(env, Value::Bool(b), |s, env| s.prop(env, shapes, body))?);
                        }
                        Ok(Value::from_formula(combine(*q, parts)))
                    }
                    Ty::Index(d) => {
                        let n = self.dim(d, shapes)?;
                        let mut parts = Vec::with_capacity(n);
                        for i in 0..n {
                            let iv = Value::Num(Q::from_integer(i.into()));
                            parts.push(self.under(env, iv, |s, env| s.prop(env, shapes, body))?);
                        }
                        Ok(Value::from_formula(combine(*q, parts)))
                    }
                    _ => {
                        let dims = ty.rat_tensor_dims().ok_or_else(|| NbeError::Unsupported {
                            span: t.span,
                            what: alloc::format!("quantifying over {ty}"),
                        })?;
                        let id = self.next_var;
                        self.next_var += 1;
                        if let Some(values) = self.ground.and_then(|g| g.get(&id)) {
                            let mut scalars = values.iter().cloned().map(Value::Num);
                            let v = Value::tensor(&dims, &mut scalars);
                            return self.under(env, v, |s, env| s.eval(env, shapes, body));
                        }
                        let mut scalars = (0..).map(|offset| Value::NeutralRat(Arith::Var { var: id, offset }));
                        let v = Value::tensor(&dims, &mut scalars);
                        let body = self.under(env, v, |s, env| s.prop(env, shapes, body))?;
                        let var = QuantVar { id, name: name.clone(), dims };
                        Ok(Value::from_formula(Formula::quant(*q, var, body)))
                    }
                }
            }
            TermNode::Foreach { dim, body, .. } => {
                let n = self.dim(dim, shapes)?;
                let mut items = Vec::with_capacity(n);
                for i in 0..n {
                    let iv = Value::Num(Q::from_integer(i.into()));
                    items.push(self.under(env, iv, |s, env| s.eval(env, shapes, body))?);
                }
                Ok(Value::Vec(items))
            }
            TermNode::Vector(items) => {
                let mut out = Vec::with_capacity(items.len());
                for it in items {
                    out.push(self.eval(env, shapes, it)?);
                }
                Ok(Value::Vec(out))
            }
            TermNode::Index(v, i) => {
                let v = self.eval(env, shapes, v)?;
                let i = self.eval(env, shapes, i)?;
                let idx = i
                    .as_num()
                    .and_then(to_usize)
                    .ok_or_else(|| NbeError::Internal("symbolic index".into()))?;
                match v {
                    Value::Vec(mut items) if idx < items.len() => Ok(items.swap_remove(idx)),
                    _ => Err(NbeError::Internal("index outside a checked tensor".into())),
                }
            }
            TermNode::Fold { f, init, vec } => {
                let f = self.eval(env, shapes, f)?;
                let mut acc = self.eval(env, shapes, init)?;
                let Value::Vec(items) = self.eval(env, shapes, vec)? else {
                    return Err(NbeError::Internal("fold over a non-vector".into()));
                };
                for item in items.into_iter().rev() {
                    let g = self.apply(f.clone(), item)?;
                    acc = self.apply(g, acc)?;
                }
                Ok(acc)
            }
            TermNode::Let { bound, body, .. } => {
                let v = self.eval(env, shapes, bound)?;
                self.under(env, v, |s, env| s.eval(env, shapes, body))
            }
        }
    }

    fn under<T>(
        &mut self,
        env: &mut Vec<Value>,
        v: Value,
        f: impl FnOnce(&mut Self, &mut Vec<Value>) -> Result<T, NbeError>,
    ) -> Result<T, NbeError> {
        env.push(v);
        let r = f(self, env);
        env.pop();
        r
    }

    fn rat(&mut self, env: &mut Vec<Value>, shapes: &[Ty], t: &Term) -> Result<Arith, NbeError> {
        self.eval(env, shapes, t)?.into_arith().ok_or_else(|| NbeError::Internal("expected a rational".into()))
    }

    fn prop(&mut self, env: &mut Vec<Value>, shapes: &[Ty], t: &Term) -> Result<Formula, NbeError> {
        self.eval(env, shapes, t)?.into_formula().ok_or_else(|| NbeError::Internal("expected a Boolean".into()))
    }

    pub fn apply(&mut self, f: Value, a: Value) -> Result<Value, NbeError> {
        match f {
            Value::Closure(c) => {
                let mut env = c.env.clone();
                env.push(a);
                self.eval(&mut env, &c.shapes, &c.body)
            }
            Value::Network(name) => self.apply_network(&name, a),
            _ => Err(NbeError::Internal("application of a non-function".into())),
        }
    }

    fn apply_network(&mut self, name: &str, arg: Value) -> Result<Value, NbeError> {
        let mut scalars = Vec::new();
        arg.flatten(&mut scalars);
        if let Some(oracle) = self.oracle {
            let concrete: Option<Vec<Q>> = scalars.iter().map(|v| v.as_num().cloned()).collect();
            if let Some(xs) = concrete {
                let ys = oracle.eval(name, &xs).ok_or_else(|| NbeError::UnboundNetwork { name: name.to_string() })?;
                return Ok(Value::Vec(ys.into_iter().map(Value::Num).collect()));
            }
        }
        let (index, decl) = self
            .tp
            .decl(name)
            .ok_or_else(|| NbeError::Internal(alloc::format!("unknown network {name}")))?;
        let _ = index;
        let (_, outputs) = shape_of(decl).map_err(|e| NbeError::Internal(e.note))?;
        let input: Vec<Arith> = scalars
            .into_iter()
            .map(|v| v.into_arith().ok_or_else(|| NbeError::Internal("non-rational network input".into())))
            .collect::<Result<_, _>>()?;
        Ok(Value::Vec(
            (0..outputs)
                .map(|output| Value::NeutralRat(Arith::Net { network: name.to_string(), input: input.clone(), output }))
                .collect(),
        ))
    }
}

fn combine(q: Quant, parts: Vec<Formula>) -> Formula {
    let mut it = parts.into_iter().rev();
    let unit = Formula::Const(q == Quant::Forall);
    let Some(mut acc) = it.next() else {
        return unit;
    };
    for p in it {
        acc = if q == Quant::Forall { Formula::and(p, acc) } else { Formula::or(p, acc) };
    }
    acc
}

/// `if c then x else y` with an undecided condition.
fn blend(c: &Formula, x: Value, y: Value, span: Span) -> Result<Value, NbeError> {
    match (x, y) {
        (Value::Vec(xs), Value::Vec(ys)) => Ok(Value::Vec(
            xs.into_iter().zip(ys).map(|(x, y)| blend(c, x, y, span)).collect::<Result<_, _>>()?,
        )),
        (x @ (Value::Bool(_) | Value::NeutralBool(_)), y) => {
            let (x, y) = (x.into_formula().unwrap(), y.into_formula().unwrap());
            Ok(Value::from_formula(Formula::or(
                Formula::and(c.clone(), x),
                Formula::and(Formula::not(c.clone()), y),
            )))
        }
        (x @ (Value::Num(_) | Value::NeutralRat(_)), y) => {
            let (x, y) = (x.into_arith().unwrap(), y.into_arith().unwrap());
            Ok(Value::from_arith(Arith::ite(c.clone(), x, y)))
        }
        _ => Err(NbeError::Unsupported { span, what: "a function-valued `if` with an undecided condition".into() }),
    }
}

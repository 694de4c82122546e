//! Formula → loss term translation for each logic.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::domain::extract_domain;
use super::{orient, Logic, LossError, LossOptions, LossProgram, LossTerm, Slot};
use crate::frontend::DeclKind;
use crate::nbe::{normalise_property, Arith, Externals, Formula};
use crate::rational::{int, Q};
use crate::typecheck::{shape_of, ArithOp, Quant, Rel, Ty, TypedProgram};

fn b(t: LossTerm) -> Box<LossTerm> {
    Box::new(t)
}

fn k(q: Q) -> LossTerm {
    LossTerm::Const(q)
}

fn add(x: LossTerm, y: LossTerm) -> LossTerm {
    LossTerm::Add(b(x), b(y))
}

fn sub(x: LossTerm, y: LossTerm) -> LossTerm {
    LossTerm::Sub(b(x), b(y))
}

fn mul(x: LossTerm, y: LossTerm) -> LossTerm {
    LossTerm::Mul(b(x), b(y))
}

fn max(x: LossTerm, y: LossTerm) -> LossTerm {
    LossTerm::Max(b(x), b(y))
}

fn min(x: LossTerm, y: LossTerm) -> LossTerm {
    LossTerm::Min(b(x), b(y))
}

fn pow(x: LossTerm, p: Q) -> LossTerm {
    LossTerm::Pow(b(x), p)
}

struct Compiler<'a> {
    opts: &'a LossOptions,
    next_id: usize,
}

impl Compiler<'_> {
    fn truth(&self, value: bool) -> LossTerm {
        // DL2 scores violation, fuzzy logics truth.
        k(int(i64::from(value == self.opts.logic.is_fuzzy())))
    }

    /// `clamp(1 - max(x, 0) / sigma, 0, 1)`
    fn truthiness(&self, x: LossTerm) -> LossTerm {
        let scaled = LossTerm::Div(b(max(x, k(int(0)))), b(k(self.opts.sigma.clone())));
        max(k(int(0)), min(k(int(1)), sub(k(int(1)), scaled)))
    }

    fn atom(&self, rel: Rel, a: LossTerm, c: LossTerm) -> LossTerm {
        let (rel, swapped) = orient(rel);
        let (a, c) = if swapped { (c, a) } else { (a, c) };
        let diff = || sub(a.clone(), c.clone());
        let dist = || max(sub(a.clone(), c.clone()), sub(c.clone(), a.clone()));
        let ind = || LossTerm::Indicator(b(a.clone()), b(c.clone()));
        if !self.opts.logic.is_fuzzy() {
            let xi = || k(self.opts.xi.clone());
            return match rel {
                Rel::Le => max(diff(), k(int(0))),
                Rel::Lt => add(max(diff(), k(int(0))), mul(xi(), ind())),
                Rel::Eq => dist(),
                Rel::Neq => mul(xi(), ind()),
                Rel::Ge | Rel::Gt => unreachable!("oriented"),
            };
        }
        match rel {
            Rel::Le | Rel::Lt => self.truthiness(diff()),
            Rel::Eq => self.truthiness(dist()),
            Rel::Neq => sub(k(int(1)), self.truthiness(dist())),
            Rel::Ge | Rel::Gt => unreachable!("oriented"),
        }
    }

    fn and(&self, s: LossTerm, t: LossTerm) -> LossTerm {
        match &self.opts.logic {
            Logic::Dl2 => add(s, t),
            Logic::Godel => min(s, t),
            Logic::Lukasiewicz => max(k(int(0)), sub(add(s, t), k(int(1)))),
            Logic::Product => mul(s, t),
            Logic::Yager(p) => {
                let sum = add(pow(sub(k(int(1)), s), p.clone()), pow(sub(k(int(1)), t), p.clone()));
                max(k(int(0)), sub(k(int(1)), pow(sum, Q::from_integer(1.into()) / p)))
            }
        }
    }

    fn or(&self, s: LossTerm, t: LossTerm) -> LossTerm {
        match &self.opts.logic {
            Logic::Dl2 => mul(s, t),
            Logic::Godel => max(s, t),
            Logic::Lukasiewicz => min(k(int(1)), add(s, t)),
            Logic::Product => sub(add(s.clone(), t.clone()), mul(s, t)),
            Logic::Yager(p) => {
                let sum = add(pow(s, p.clone()), pow(t, p.clone()));
                min(k(int(1)), pow(sum, Q::from_integer(1.into()) / p))
            }
        }
    }

    fn formula(&mut self, f: &Formula) -> Result<LossTerm, LossError> {
        Ok(match f {
            Formula::Const(v) => self.truth(*v),
            Formula::Atom(rel, a, c) => {
                let (a, c) = (arith(a)?, arith(c)?);
                self.atom(*rel, a, c)
            }
            Formula::And(x, y) => {
                let (x, y) = (self.formula(x)?, self.formula(y)?);
                self.and(x, y)
            }
            Formula::Or(x, y) => {
                let (x, y) = (self.formula(x)?, self.formula(y)?);
                self.or(x, y)
            }
            Formula::Quant { q, var, body } => {
                let (domain, residual) =
                    extract_domain(*q, var, body, self.opts.fallback.as_ref(), self.opts.extract_domains)?;
                let Some(domain) = domain else {
                    // Empty domain: vacuously true for all, false for some.
                    return Ok(self.truth(*q == Quant::Forall));
                };
                self.next_id += 1;
                let id = self.next_id;
                let body = b(self.formula(&residual)?);
                match q {
                    Quant::Forall => LossTerm::SampleForall { id, var: var.clone(), domain, body },
                    Quant::Exists => LossTerm::SampleExists { id, var: var.clone(), domain, body },
                }
            }
            Formula::Not(_) | Formula::Implies(..) => {
                return Err(LossError::Unsupported { what: "a formula outside negation normal form".into() })
            }
        })
    }
}

fn arith(a: &Arith) -> Result<LossTerm, LossError> {
    Ok(match a {
        Arith::Const(q) => k(q.clone()),
        Arith::Var { var, offset } => LossTerm::Var { var: *var, offset: *offset },
        Arith::Param(name) => LossTerm::Param(name.clone()),
        Arith::Data { name, offset } => LossTerm::Data { name: name.clone(), offset: *offset },
        Arith::Net { network, input, output } => LossTerm::NetworkApply {
            network: network.clone(),
            inputs: input.iter().map(arith).collect::<Result<Vec<_>, _>>()?,
            output: *output,
        },
        Arith::Neg(x) => sub(k(int(0)), arith(x)?),
        Arith::Bin(op, x, y) => {
            let (x, y) = (b(arith(x)?), b(arith(y)?));
            match op {
                ArithOp::Add => LossTerm::Add(x, y),
                ArithOp::Sub => LossTerm::Sub(x, y),
                ArithOp::Mul => LossTerm::Mul(x, y),
                ArithOp::Div => LossTerm::Div(x, y),
            }
        }
        Arith::Ite(c, _, _) => {
            return Err(LossError::Unsupported { what: format!("a conditional on an undecided condition `{c}`") })
        }
    })
}

/// Loss term for `f`, put in negation normal form first. Fuzzy truth is
/// flipped to `1 - t` so every logic scores violation.
pub fn compile_formula(f: &Formula, opts: &LossOptions) -> Result<LossTerm, LossError> {
    let mut c = Compiler { opts, next_id: 0 };
    let t = c.formula(&f.clone().nnf())?;
    Ok(if opts.logic.is_fuzzy() { sub(k(int(1)), t) } else { t })
}

/// Normalises `property` (with `ext` bound) and compiles it. Unbound
/// rational parameters and datasets become resource slots.
pub fn compile_loss(tp: &TypedProgram, property: &str, ext: &Externals, opts: &LossOptions) -> Result<LossProgram, LossError> {
    if let Logic::Yager(p) = &opts.logic {
        if *p <= int(0) {
            return Err(LossError::Unsupported { what: "a Yager exponent that is not positive".into() });
        }
    }
    let nf = normalise_property(tp, property, ext)?;
    let root = compile_formula(&nf, opts)?;
    let mut networks = Vec::new();
    let mut datasets = Vec::new();
    let mut parameters = Vec::new();
    for d in tp.externals() {
        match d.kind {
            DeclKind::Network => {
                let (m, n) = shape_of(d).map_err(|e| LossError::Unsupported { what: e.to_string() })?;
                networks.push(Slot { name: d.name.clone(), dims: alloc::vec![m, n] });
            }
            DeclKind::Dataset if !ext.datasets.contains_key(&d.name) => {
                let dims = d.scheme.ty.rat_tensor_dims().unwrap_or_default();
                datasets.push(Slot { name: d.name.clone(), dims });
            }
            DeclKind::Parameter if !ext.params.contains_key(&d.name) && d.scheme.ty != Ty::Bool => {
                parameters.push(d.name.clone());
            }
            _ => {}
        }
    }
    Ok(LossProgram {
        property: property.into(),
        logic: opts.logic.clone(),
        samples: opts.samples,
        seed: opts.seed,
        networks,
        datasets,
        parameters,
        root,
    })
}

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::eval::{Evaluator, Externals};
use super::normal::{Arith, Formula, VarId};
use super::value::Value;
use super::NbeError;
use crate::frontend::{
    parse_program, print_program, BinOp, Binder, Decl, DeclKind, Expr, ExprKind, Program, Quantifier, Res, Span,
    TypeExpr, TypeKind, UnOp,
};
use crate::rational::{to_usize, Q};
use crate::typecheck::{check_program, ArithOp, Quant, Rel, Ty, TypedProgram};
use num_traits::Signed;

/// Reads a value back into surface syntax at type `ty`. Functions are
/// eta-expanded by applying them to fresh symbolic arguments.
pub fn quote(tp: &TypedProgram, ext: &Externals, v: &Value, ty: &Ty) -> Result<Expr, NbeError> {
    let mut ev = Evaluator::new(tp, ext);
    Quoter::new(tp).value(&mut ev, v.clone(), ty)
}

/// Surface syntax for a normal form.
pub fn quote_formula(tp: &TypedProgram, f: &Formula) -> Expr {
    Quoter::new(tp).formula(f)
}

/// Normalises declaration `name`, reads it back, and type-checks the
/// result in a program holding the original synonyms and external
/// declarations. Returns the re-checked program; the read-back declaration
/// keeps its name and is last.
pub fn recheck_decl(tp: &TypedProgram, name: &str, ext: &Externals) -> Result<TypedProgram, String> {
    let (index, d) = tp.decl(name).ok_or_else(|| format!("no declaration named `{name}`"))?;
    let value = Evaluator::new(tp, ext).eval_decl(index, &[]).map_err(|e| e.to_string())?;
    let body = quote(tp, ext, &value, &d.scheme.ty).map_err(|e| e.to_string())?;
    let mut program = Program::default();
    for src in &tp.source.decls {
        if src.kind == DeclKind::TypeSynonym || src.kind.is_external() {
            program.decls.push(src.clone());
        }
    }
    program.decls.push(Decl {
        kind: if d.kind == DeclKind::Property { DeclKind::Property } else { DeclKind::Def },
        name: name.to_owned(),
        span: Span::default(),
        signature: Some(type_expr(&d.scheme.ty).ok_or("type has no surface form")?),
        body: Some(body),
    });
    let text = print_program(&program);
    let reparsed = parse_program(&text).map_err(|e| format!("{e}\n{text}"))?;
    let checked = check_program(&reparsed).map_err(|e| format!("{e}\n{text}"))?;
    let (_, rd) = checked.decl(name).ok_or("read-back declaration missing")?;
    if rd.scheme.ty != d.scheme.ty {
        return Err(format!("read-back has type {} instead of {}", rd.scheme.ty, d.scheme.ty));
    }
    Ok(checked)
}

/// Surface syntax for a closed type.
pub fn type_expr(ty: &Ty) -> Option<TypeExpr> {
    let kind = match ty {
        Ty::Bool => TypeKind::Bool,
        Ty::Rat => TypeKind::Rat,
        Ty::Nat => TypeKind::Nat,
        Ty::Dim(n) => TypeKind::NatLit(*n),
        Ty::Index(d) => TypeKind::Index(Box::new(type_expr(d)?)),
        Ty::Fun(a, b) => TypeKind::Fun(Box::new(type_expr(a)?), Box::new(type_expr(b)?)),
        Ty::Vector(..) => {
            let mut dims = Vec::new();
            let mut cur = ty;
            while let Ty::Vector(e, d) = cur {
                dims.push(type_expr(d)?);
                cur = e;
            }
            TypeKind::Tensor { elem: Box::new(type_expr(cur)?), dims }
        }
        Ty::Param(_) | Ty::Meta(_) => return None,
    };
    Some(TypeExpr { kind, span: Span::default() })
}

fn e(kind: ExprKind) -> Expr {
    Expr::new(kind, Span::default())
}

fn var(name: &str) -> Expr {
    e(ExprKind::Var { name: name.into(), res: Res::Unresolved })
}

fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    e(ExprKind::Binary(op, Box::new(a), Box::new(b)))
}

fn rat(q: &Q) -> Expr {
    if q.is_negative() {
        e(ExprKind::Unary(UnOp::Neg, Box::new(e(ExprKind::RatLit(-q.clone())))))
    } else {
        e(ExprKind::RatLit(q.clone()))
    }
}

fn tensor_type(dims: &[usize]) -> TypeExpr {
    let rat = TypeExpr { kind: TypeKind::Rat, span: Span::default() };
    if dims.is_empty() {
        return rat;
    }
    TypeExpr {
        kind: TypeKind::Tensor {
            elem: Box::new(rat),
            dims: dims.iter().map(|&d| TypeExpr { kind: TypeKind::NatLit(d as u64), span: Span::default() }).collect(),
        },
        span: Span::default(),
    }
}

struct Quoter<'a> {
    tp: &'a TypedProgram,
    names: BTreeMap<VarId, (String, Vec<usize>)>,
    bound: Vec<String>,
}

impl<'a> Quoter<'a> {
    fn new(tp: &'a TypedProgram) -> Self {
        Quoter { tp, names: BTreeMap::new(), bound: Vec::new() }
    }

    fn fresh_name(&self, base: &str) -> String {
        let mut name = base.to_string();
        while self.bound.contains(&name) || self.tp.decl(&name).is_some() {
            name.push('\'');
        }
        name
    }

    fn indexed(&self, base: Expr, dims: &[usize], offset: usize) -> Expr {
        let mut idx = alloc::vec![0; dims.len()];
        let mut rest = offset;
        for (slot, d) in idx.iter_mut().zip(dims).rev() {
            *slot = rest % d;
            rest /= d;
        }
        idx.into_iter().fold(base, |acc, i| bin(BinOp::Index, acc, e(ExprKind::NatLit(i as u64))))
    }

    fn value(&mut self, ev: &mut Evaluator<'_>, v: Value, ty: &Ty) -> Result<Expr, NbeError> {
        let bad = || NbeError::Internal(format!("cannot read back a value at type {ty}"));
        Ok(match (v, ty) {
            (Value::Num(q), Ty::Rat) => rat(&q),
            (Value::Num(q), Ty::Nat | Ty::Index(_)) => e(ExprKind::NatLit(to_usize(&q).ok_or_else(bad)? as u64)),
            (Value::NeutralRat(a), Ty::Rat | Ty::Nat) => self.arith(&a),
            (Value::Bool(b), Ty::Bool) => e(if b { ExprKind::True } else { ExprKind::False }),
            (Value::NeutralBool(f), Ty::Bool) => self.formula(&f),
            (Value::Vec(items), Ty::Vector(elem, _)) => {
                let mut out = Vec::with_capacity(items.len());
                for it in items {
                    out.push(self.value(ev, it, elem)?);
                }
                e(ExprKind::VecLit(out))
            }
            (Value::Network(name), Ty::Fun(..)) => var(&name),
            (f @ Value::Closure(_), Ty::Fun(a, b)) => {
                let dims = a.rat_tensor_dims().ok_or_else(bad)?;
                let id = usize::MAX / 2 + self.names.len();
                let name = self.fresh_name("x");
                let mut scalars = (0..).map(|offset| Value::NeutralRat(Arith::Var { var: id, offset }));
                let arg = Value::tensor(&dims, &mut scalars);
                self.names.insert(id, (name.clone(), dims));
                self.bound.push(name.clone());
                let result = ev.apply(f, arg)?;
                let body = self.value(ev, result, b)?;
                self.bound.pop();
                e(ExprKind::Lambda {
                    binder: Binder { name, ty: Some(type_expr(a).ok_or_else(bad)?), span: Span::default() },
                    body: Box::new(body),
                })
            }
            _ => return Err(bad()),
        })
    }

    fn arith(&mut self, a: &Arith) -> Expr {
        match a {
            Arith::Const(q) => rat(q),
            Arith::Var { var: v, offset } => match self.names.get(v) {
                Some((name, dims)) => {
                    let dims = dims.clone();
                    self.indexed(var(name), &dims, *offset)
                }
                None => var(&format!("unbound{v}")),
            },
            Arith::Param(name) => var(name),
            Arith::Data { name, offset } => {
                let dims = self
                    .tp
                    .decl(name)
                    .and_then(|(_, d)| d.scheme.ty.rat_tensor_dims())
                    .unwrap_or_default();
                self.indexed(var(name), &dims, *offset)
            }
            Arith::Net { network, input, output } => {
                let args = input.iter().map(|x| self.arith(x)).collect();
                let app = e(ExprKind::App(Box::new(var(network)), Box::new(e(ExprKind::VecLit(args)))));
                bin(BinOp::Index, app, e(ExprKind::NatLit(*output as u64)))
            }
            Arith::Bin(op, x, y) => {
                let op = match op {
                    ArithOp::Add => BinOp::Add,
                    ArithOp::Sub => BinOp::Sub,
                    ArithOp::Mul => BinOp::Mul,
                    ArithOp::Div => BinOp::Div,
                };
                let (x, y) = (self.arith(x), self.arith(y));
                bin(op, x, y)
            }
            Arith::Neg(x) => e(ExprKind::Unary(UnOp::Neg, Box::new(self.arith(x)))),
            Arith::Ite(c, x, y) => {
                let c = self.formula(c);
                let (x, y) = (self.arith(x), self.arith(y));
                e(ExprKind::If(Box::new(c), Box::new(x), Box::new(y)))
            }
        }
    }

    fn formula(&mut self, f: &Formula) -> Expr {
        match f {
            Formula::Const(b) => e(if *b { ExprKind::True } else { ExprKind::False }),
            Formula::Atom(r, a, b) => {
                let op = match r {
                    Rel::Eq => BinOp::Eq,
                    Rel::Neq => BinOp::Neq,
                    Rel::Le => BinOp::Leq,
                    Rel::Lt => BinOp::Lt,
                    Rel::Ge => BinOp::Geq,
                    Rel::Gt => BinOp::Gt,
                };
                let (a, b) = (self.arith(a), self.arith(b));
                bin(op, a, b)
            }
            Formula::Not(a) => e(ExprKind::Unary(UnOp::Not, Box::new(self.formula(a)))),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                let op = match f {
                    Formula::And(..) => BinOp::And,
                    Formula::Or(..) => BinOp::Or,
                    _ => BinOp::Implies,
                };
                let (a, b) = (self.formula(a), self.formula(b));
                bin(op, a, b)
            }
            Formula::Quant { q, var: v, body } => {
                let name = self.fresh_name(&v.name);
                self.names.insert(v.id, (name.clone(), v.dims.clone()));
                self.bound.push(name.clone());
                let body = self.formula(body);
                self.bound.pop();
                e(ExprKind::Quant {
                    q: if *q == Quant::Forall { Quantifier::Forall } else { Quantifier::Exists },
                    binder: Binder { name, ty: Some(tensor_type(&v.dims)), span: Span::default() },
                    body: Box::new(body),
                })
            }
        }
    }
}

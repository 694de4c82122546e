use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::error::{TypeError, TypeErrorKind as K};
use super::term::{ArithOp, LogicOp, Quant, Rel, Term, TermNode};
use super::ty::{Scheme, Ty};
use crate::frontend::{
    BinOp, Binder, Decl, DeclKind, Expr, ExprKind, Kind, Program, Quantifier, Res, Span, TypeExpr, TypeKind, UnOp,
};
use crate::rational::{to_usize, Q};

#[derive(Clone, Debug)]
pub struct TypedDecl {
    pub kind: DeclKind,
    pub name: String,
    pub span: Span,
    pub scheme: Scheme,
    /// Kind of the aliased type, for type synonyms.
    pub synonym_kind: Option<Kind>,
    pub body: Option<Term>,
}

/// A checked program. `source` is the program as written, kept for
/// renderers that want the original definitions.
#[derive(Clone, Debug)]
pub struct TypedProgram {
    pub decls: Vec<TypedDecl>,
    pub source: Program,
}

impl TypedProgram {
    pub fn decl(&self, name: &str) -> Option<(usize, &TypedDecl)> {
        self.decls.iter().enumerate().find(|(_, d)| d.name == name)
    }

    pub fn properties(&self) -> impl Iterator<Item = &TypedDecl> {
        self.decls.iter().filter(|d| d.kind == DeclKind::Property)
    }

    pub fn externals(&self) -> impl Iterator<Item = &TypedDecl> {
        self.decls.iter().filter(|d| d.kind.is_external())
    }

    /// Kind of a type written in the scope of this program's synonyms.
    pub fn infer_kind(&self, ty: &TypeExpr) -> Result<Kind, TypeError> {
        Checker::new(&self.decls).elab_type(ty).map(|(_, k)| k)
    }

    /// Elaborates a closed type in the scope of this program's synonyms.
    pub fn elaborate_type(&self, ty: &TypeExpr) -> Result<Ty, TypeError> {
        let (t, k) = Checker::new(&self.decls).elab_type(ty)?;
        if k != Kind::Type {
            return Err(kind_error(ty.span, Kind::Type, k, ty));
        }
        Ok(t)
    }
}

/// Kind of a closed type that mentions no synonyms.
pub fn infer_kind(ty: &TypeExpr) -> Result<Kind, TypeError> {
    Checker::new(&[]).elab_type(ty).map(|(_, k)| k)
}

/// Input and output dimension of a network declaration.
pub fn shape_of(decl: &TypedDecl) -> Result<(usize, usize), TypeError> {
    network_shape(&decl.scheme.ty).map_err(|note| {
        TypeError::new(K::BadNetworkType, decl.span, note)
            .with_types("Tensor Rat [m] -> Tensor Rat [n]", &decl.scheme.ty)
    })
}

fn network_shape(ty: &Ty) -> Result<(usize, usize), &'static str> {
    let Ty::Fun(a, b) = ty else {
        return Err("a network must be a function");
    };
    if matches!(**b, Ty::Fun(..)) {
        return Err("networks take exactly one tensor argument");
    }
    let dims = |t: &Ty| -> Result<usize, &'static str> {
        match t.rat_tensor_dims() {
            Some(d) if d.len() == 1 => Ok(d[0]),
            Some(d) if d.len() > 1 => Err("network inputs and outputs must be rank-1 tensors"),
            _ => Err("network inputs and outputs must be tensors of Rat"),
        }
    };
    Ok((dims(a)?, dims(b)?))
}

pub fn check_program(program: &Program) -> Result<TypedProgram, TypeError> {
    let mut decls: Vec<TypedDecl> = Vec::with_capacity(program.decls.len());
    for d in &program.decls {
        let typed = Checker::new(&decls).decl(d)?;
        decls.push(typed);
    }
    Ok(TypedProgram { decls, source: program.clone() })
}

fn kind_error(span: Span, expected: Kind, actual: Kind, ty: &TypeExpr) -> TypeError {
    let shown = crate::frontend::print_type(ty);
    TypeError::new(K::KindMismatch, span, format!("`{shown}` has kind {actual} where {expected} is expected"))
        .with_types(expected, shown)
}

struct Checker<'a> {
    decls: &'a [TypedDecl],
    metas: Vec<Option<Ty>>,
    locals: Vec<Ty>,
    params: Vec<Kind>,
    /// Index literals whose dimension was unknown when checked.
    pending: Vec<(u64, Ty, Span)>,
}

impl<'a> Checker<'a> {
    fn new(decls: &'a [TypedDecl]) -> Self {
        Checker { decls, metas: Vec::new(), locals: Vec::new(), params: Vec::new(), pending: Vec::new() }
    }

    fn fresh(&mut self) -> Ty {
        self.metas.push(None);
        Ty::Meta(self.metas.len() - 1)
    }

    fn resolve(&self, t: &Ty) -> Ty {
        let mut cur = t.clone();
        while let Ty::Meta(m) = cur {
            match &self.metas[m] {
                Some(next) => cur = next.clone(),
                None => break,
            }
        }
        cur
    }

    fn zonk(&self, t: &Ty) -> Ty {
        match self.resolve(t) {
            Ty::Index(a) => Ty::Index(Box::new(self.zonk(&a))),
            Ty::Vector(a, b) => Ty::Vector(Box::new(self.zonk(&a)), Box::new(self.zonk(&b))),
            Ty::Fun(a, b) => Ty::Fun(Box::new(self.zonk(&a)), Box::new(self.zonk(&b))),
            other => other,
        }
    }

    fn occurs(&self, m: usize, t: &Ty) -> bool {
        match self.resolve(t) {
            Ty::Meta(n) => n == m,
            Ty::Index(a) => self.occurs(m, &a),
            Ty::Vector(a, b) | Ty::Fun(a, b) => self.occurs(m, &a) || self.occurs(m, &b),
            _ => false,
        }
    }

    fn unify(&mut self, a: &Ty, b: &Ty) -> bool {
        let (a, b) = (self.resolve(a), self.resolve(b));
        match (&a, &b) {
            (Ty::Meta(m), Ty::Meta(n)) if m == n => true,
            (Ty::Meta(m), t) | (t, Ty::Meta(m)) => {
                if self.occurs(*m, t) {
                    return false;
                }
                self.metas[*m] = Some(t.clone());
                true
            }
            (Ty::Index(x), Ty::Index(y)) => self.unify(x, y),
            (Ty::Vector(x1, x2), Ty::Vector(y1, y2)) | (Ty::Fun(x1, x2), Ty::Fun(y1, y2)) => {
                self.unify(x1, y1) && self.unify(x2, y2)
            }
            _ => a == b,
        }
    }

    fn mismatch(&self, span: Span, expected: &Ty, actual: &Ty, note: &str) -> TypeError {
        TypeError::new(K::Mismatch, span, note).with_types(self.zonk(expected), self.zonk(actual))
    }

    // ---- types ----

    fn elab_type(&self, t: &TypeExpr) -> Result<(Ty, Kind), TypeError> {
        Ok(match &t.kind {
            TypeKind::Bool => (Ty::Bool, Kind::Type),
            TypeKind::Rat => (Ty::Rat, Kind::Type),
            TypeKind::Nat => (Ty::Nat, Kind::Type),
            TypeKind::NatLit(n) => (Ty::Dim(*n), Kind::Nat),
            TypeKind::Var { name, res } => match res {
                Res::Local(l) if *l < self.params.len() => (Ty::Param(*l), self.params[*l]),
                Res::Global(g) => {
                    let d = &self.decls[*g];
                    match d.synonym_kind {
                        Some(k) if d.kind == DeclKind::TypeSynonym => (d.scheme.ty.clone(), k),
                        _ => {
                            return Err(TypeError::new(
                                K::ValueAsType,
                                t.span,
                                format!("`{name}` is a {} declaration, not a type", d.kind.as_str()),
                            ))
                        }
                    }
                }
                _ => {
                    return Err(TypeError::new(
                        K::Unsupported,
                        t.span,
                        format!("type variable `{name}` is not bound at the head of the signature"),
                    ))
                }
            },
            TypeKind::Fun(a, b) => {
                let a = self.elab_at(a, Kind::Type)?;
                let b = self.elab_at(b, Kind::Type)?;
                (Ty::fun(a, b), Kind::Type)
            }
            TypeKind::Tensor { elem, dims } => {
                let mut ty = self.elab_at(elem, Kind::Type)?;
                for d in dims.iter().rev() {
                    let d = self.elab_at(d, Kind::Nat)?;
                    ty = Ty::Vector(Box::new(ty), Box::new(d));
                }
                (ty, Kind::Type)
            }
            TypeKind::Vector { elem, dim } => {
                let e = self.elab_at(elem, Kind::Type)?;
                let d = self.elab_at(dim, Kind::Nat)?;
                (Ty::Vector(Box::new(e), Box::new(d)), Kind::Type)
            }
            TypeKind::Index(d) => (Ty::Index(Box::new(self.elab_at(d, Kind::Nat)?)), Kind::Type),
            TypeKind::Pi { .. } => {
                return Err(TypeError::new(
                    K::Unsupported,
                    t.span,
                    "shape quantifiers are only allowed at the head of a declaration signature",
                ))
            }
        })
    }

    fn elab_at(&self, t: &TypeExpr, want: Kind) -> Result<Ty, TypeError> {
        let (ty, k) = self.elab_type(t)?;
        if k != want {
            return Err(kind_error(t.span, want, k, t));
        }
        Ok(ty)
    }

    /// Peels leading shape binders into `self.params`.
    fn signature(&mut self, sig: &TypeExpr) -> Result<Ty, TypeError> {
        let mut cur = sig;
        while let TypeKind::Pi { kind, body, .. } = &cur.kind {
            self.params.push(*kind);
            cur = body;
        }
        self.elab_at(cur, Kind::Type)
    }

    // ---- declarations ----

    fn decl(mut self, d: &Decl) -> Result<TypedDecl, TypeError> {
        let mut out = TypedDecl {
            kind: d.kind,
            name: d.name.clone(),
            span: d.span,
            scheme: Scheme::mono(Ty::Bool),
            synonym_kind: None,
            body: None,
        };
        let sig = d.signature.as_ref();
        match d.kind {
            DeclKind::TypeSynonym => {
                let sig = sig.ok_or_else(|| TypeError::new(K::MissingBody, d.span, "type synonym without a definition"))?;
                let (ty, k) = self.elab_type(sig)?;
                out.scheme = Scheme::mono(ty);
                out.synonym_kind = Some(k);
                return Ok(out);
            }
            DeclKind::Network | DeclKind::Dataset | DeclKind::Parameter => {
                let sig = sig.ok_or_else(|| {
                    TypeError::new(K::MissingBody, d.span, format!("`{}` needs a type signature", d.name))
                })?;
                let ty = self.signature(sig)?;
                if !self.params.is_empty() {
                    return Err(TypeError::new(
                        K::Unsupported,
                        sig.span,
                        "external declarations cannot be shape-polymorphic",
                    ));
                }
                match d.kind {
                    DeclKind::Network => {
                        network_shape(&ty).map_err(|note| {
                            TypeError::new(K::BadNetworkType, sig.span, note)
                                .with_types("Tensor Rat [m] -> Tensor Rat [n]", &ty)
                        })?;
                    }
                    DeclKind::Dataset => {
                        if !ty.rat_tensor_dims().is_some_and(|d| !d.is_empty()) {
                            return Err(TypeError::new(K::BadDatasetType, sig.span, "datasets must be tensors of Rat")
                                .with_types("Tensor Rat [d1, ..., dk]", &ty));
                        }
                    }
                    _ => {
                        if !matches!(ty, Ty::Rat | Ty::Nat | Ty::Bool) {
                            return Err(TypeError::new(
                                K::BadParameterType,
                                sig.span,
                                "parameters must have type Rat, Nat or Bool",
                            )
                            .with_types("Rat, Nat or Bool", &ty));
                        }
                    }
                }
                out.scheme = Scheme::mono(ty);
                return Ok(out);
            }
            DeclKind::Def | DeclKind::Property => {}
        }

        let body = d.body.as_ref().ok_or_else(|| {
            TypeError::new(K::MissingBody, d.span, format!("`{}` has a signature but no definition", d.name))
        })?;
        let (ty, term) = match sig {
            Some(sig) => {
                let ty = self.signature(sig)?;
                if d.kind == DeclKind::Property && ty != Ty::Bool {
                    return Err(TypeError::new(K::PropertyNotBool, sig.span, "properties must be Bool-valued")
                        .with_types(Ty::Bool, &ty));
                }
                let term = self.check(body, &ty)?;
                (ty, term)
            }
            None => {
                let term = self.synth(body)?;
                let ty = self.zonk(&term.ty);
                if d.kind == DeclKind::Property && ty != Ty::Bool {
                    return Err(TypeError::new(K::PropertyNotBool, body.span, "properties must be Bool-valued")
                        .with_types(Ty::Bool, &ty));
                }
                (ty, term)
            }
        };
        for (n, dim, span) in core::mem::take(&mut self.pending) {
            let want = Ty::Index(Box::new(self.zonk(&dim)));
            match self.resolve(&dim) {
                Ty::Dim(d) if n < d => {}
                Ty::Dim(d) => return Err(out_of_bounds(n, d, span, &want)),
                other => {
                    return Err(TypeError::new(
                        K::IndexNotStatic,
                        span,
                        format!("cannot show index {n} is below dimension {}", self.zonk(&other)),
                    )
                    .with_types(&want, Ty::Nat))
                }
            }
        }
        let ty = self.zonk(&ty);
        if ty.has_metas() {
            return Err(TypeError::new(
                K::Ambiguous,
                d.span,
                format!("cannot infer a complete type for `{}`; add a signature", d.name),
            ));
        }
        let mut term = term;
        term.map_types(&mut |t| self.zonk(t));
        if let Some(span) = term.find_type(&|t| t.has_metas()) {
            return Err(TypeError::new(K::Ambiguous, span, "cannot determine the type of this expression"));
        }
        validate_quantifiers(&term)?;
        out.scheme = Scheme { params: self.params.clone(), ty };
        out.body = Some(term);
        Ok(out)
    }

    // ---- expressions ----

    fn binder_ty(&mut self, b: &Binder) -> Result<Ty, TypeError> {
        match &b.ty {
            Some(t) => self.elab_at(t, Kind::Type),
            None => Ok(self.fresh()),
        }
    }

    fn under<T>(&mut self, ty: Ty, f: impl FnOnce(&mut Self) -> Result<T, TypeError>) -> Result<T, TypeError> {
        self.locals.push(ty);
        let r = f(self);
        self.locals.pop();
        r
    }

    fn synth(&mut self, e: &Expr) -> Result<Term, TypeError> {
        let span = e.span;
        let mk = |node, ty| Term::new(node, ty, span);
        match &e.kind {
            ExprKind::Var { name, res } => match res {
                Res::Local(l) => Ok(mk(TermNode::Local(*l), self.locals[*l].clone())),
                Res::Global(g) => {
                    let d = &self.decls[*g];
                    if d.kind == DeclKind::TypeSynonym {
                        return Err(TypeError::new(K::TypeAsValue, span, format!("`{name}` is a type, not a value")));
                    }
                    let inst: Vec<Ty> = (0..d.scheme.params.len()).map(|_| self.fresh()).collect();
                    let ty = d.scheme.ty.subst(&inst);
                    Ok(mk(TermNode::Global { decl: *g, inst }, ty))
                }
                Res::Unresolved => Err(TypeError::new(K::Unsupported, span, format!("unresolved name `{name}`"))),
            },
            ExprKind::NatLit(n) => Ok(mk(TermNode::Num(Q::from_integer((*n).into())), Ty::Nat)),
            ExprKind::RatLit(q) => Ok(mk(TermNode::Num(q.clone()), Ty::Rat)),
            ExprKind::True => Ok(mk(TermNode::Bool(true), Ty::Bool)),
            ExprKind::False => Ok(mk(TermNode::Bool(false), Ty::Bool)),
            ExprKind::Lambda { binder, body } => {
                let a = self.binder_ty(binder)?;
                let body = self.under(a.clone(), |c| c.synth(body))?;
                let ty = Ty::fun(a, body.ty.clone());
                Ok(mk(TermNode::Lam { name: binder.name.clone(), body: Arc::new(body) }, ty))
            }
            ExprKind::App(f, a) => {
                let f = self.synth(f)?;
                let (dom, cod) = match self.resolve(&f.ty) {
                    Ty::Fun(d, c) => (*d, *c),
                    Ty::Meta(_) => {
                        let (d, c) = (self.fresh(), self.fresh());
                        self.unify(&f.ty, &Ty::fun(d.clone(), c.clone()));
                        (d, c)
                    }
                    other => {
                        return Err(TypeError::new(K::NotAFunction, f.span, "this expression is applied but is not a function")
                            .with_types("a function type", self.zonk(&other)))
                    }
                };
                let a = self.check(a, &dom)?;
                Ok(mk(TermNode::App(Box::new(f), Box::new(a)), cod))
            }
            ExprKind::Unary(UnOp::Neg, a) => {
                let a = self.check(a, &Ty::Rat)?;
                Ok(mk(TermNode::Neg(Box::new(a)), Ty::Rat))
            }
            ExprKind::Unary(UnOp::Not, a) => {
                let a = self.check(a, &Ty::Bool)?;
                Ok(mk(TermNode::Not(Box::new(a)), Ty::Bool))
            }
            ExprKind::Binary(op, a, b) => self.binary(*op, a, b, span),
            ExprKind::If(c, t, f) => {
                let c = self.check(c, &Ty::Bool)?;
                let mut t = self.synth(t)?;
                let f_term = match self.resolve(&t.ty) {
                    Ty::Nat => {
                        let f2 = self.synth(f)?;
                        if self.resolve(&f2.ty) == Ty::Rat {
                            t.ty = Ty::Rat;
                            f2
                        } else {
                            self.coerce(f2, &Ty::Nat)?
                        }
                    }
                    tt => self.check(f, &tt)?,
                };
                let ty = t.ty.clone();
                Ok(mk(TermNode::If(Box::new(c), Box::new(t), Box::new(f_term)), ty))
            }
            ExprKind::Quant { q, binder, body } => {
                let bty = self.binder_ty(binder)?;
                if *q == Quantifier::Foreach {
                    return self.foreach(binder, bty, body, None, span);
                }
                let body_t = self.under(bty.clone(), |c| c.synth(body))?;
                match self.resolve(&body_t.ty) {
                    Ty::Bool => Ok(mk(
                        TermNode::Quant {
                            q: if *q == Quantifier::Forall { Quant::Forall } else { Quant::Exists },
                            name: binder.name.clone(),
                            binder_ty: bty,
                            body: Box::new(body_t),
                        },
                        Ty::Bool,
                    )),
                    Ty::Meta(_) => {
                        self.unify(&body_t.ty, &Ty::Bool);
                        self.synth_quant_bool(*q, binder, bty, body_t, span)
                    }
                    elem if *q == Quantifier::Forall => {
                        let dim = self.fresh();
                        if !self.unify(&bty, &Ty::Index(Box::new(dim.clone()))) {
                            return Err(self.mismatch(binder.span, &Ty::Index(Box::new(dim)), &bty, "a tensor comprehension binds an index"));
                        }
                        let ty = Ty::Vector(Box::new(elem), Box::new(dim.clone()));
                        Ok(mk(TermNode::Foreach { name: binder.name.clone(), dim, body: Box::new(body_t) }, ty))
                    }
                    other => Err(self.mismatch(body.span, &Ty::Bool, &other, "the body of `exists` must be Bool")),
                }
            }
            ExprKind::VecLit(items) => {
                if items.is_empty() {
                    let elem = self.fresh();
                    return Ok(mk(TermNode::Vector(Vec::new()), Ty::vector(elem, 0)));
                }
                let first = self.synth(&items[0])?;
                let mut elem = self.resolve(&first.ty);
                let mut terms = alloc::vec![first];
                for it in &items[1..] {
                    let t = if elem == Ty::Nat {
                        let t = self.synth(it)?;
                        if self.resolve(&t.ty) == Ty::Rat {
                            elem = Ty::Rat;
                        }
                        t
                    } else {
                        self.check(it, &elem)?
                    };
                    terms.push(t);
                }
                let mut out = Vec::with_capacity(terms.len());
                for t in terms {
                    out.push(self.coerce(t, &elem)?);
                }
                let n = out.len() as u64;
                Ok(mk(TermNode::Vector(out), Ty::vector(elem, n)))
            }
            ExprKind::Fold { f, init, vec } => {
                let v = self.synth(vec)?;
                let elem = self.vector_parts(&v)?.0;
                let mut init = self.synth(init)?;
                if self.resolve(&init.ty) == Ty::Nat {
                    init.ty = Ty::Rat;
                }
                let acc = init.ty.clone();
                let f = self.check(f, &Ty::fun(elem, Ty::fun(acc.clone(), acc.clone())))?;
                Ok(mk(TermNode::Fold { f: Box::new(f), init: Box::new(init), vec: Box::new(v) }, acc))
            }
            ExprKind::Let { binder, bound, body } => {
                let bound = match &binder.ty {
                    Some(t) => {
                        let t = self.elab_at(t, Kind::Type)?;
                        self.check(bound, &t)?
                    }
                    None => self.synth(bound)?,
                };
                let body = self.under(bound.ty.clone(), |c| c.synth(body))?;
                let ty = body.ty.clone();
                Ok(mk(TermNode::Let { name: binder.name.clone(), bound: Box::new(bound), body: Box::new(body) }, ty))
            }
        }
    }

    fn synth_quant_bool(&mut self, q: Quantifier, binder: &Binder, bty: Ty, body: Term, span: Span) -> Result<Term, TypeError> {
        Ok(Term::new(
            TermNode::Quant {
                q: if q == Quantifier::Forall { Quant::Forall } else { Quant::Exists },
                name: binder.name.clone(),
                binder_ty: bty,
                body: Box::new(body),
            },
            Ty::Bool,
            span,
        ))
    }

    fn foreach(&mut self, binder: &Binder, bty: Ty, body: &Expr, expected: Option<(Ty, Ty)>, span: Span) -> Result<Term, TypeError> {
        let dim = match &expected {
            Some((_, d)) => d.clone(),
            None => self.fresh(),
        };
        let idx = Ty::Index(Box::new(dim.clone()));
        if !self.unify(&bty, &idx) {
            return Err(self.mismatch(binder.span, &idx, &bty, "a tensor comprehension binds an index"));
        }
        let body_t = match &expected {
            Some((elem, _)) => self.under(idx, |c| c.check(body, elem))?,
            None => self.under(idx, |c| c.synth(body))?,
        };
        let ty = Ty::Vector(Box::new(body_t.ty.clone()), Box::new(dim.clone()));
        Ok(Term::new(TermNode::Foreach { name: binder.name.clone(), dim, body: Box::new(body_t) }, ty, span))
    }

    fn vector_parts(&mut self, v: &Term) -> Result<(Ty, Ty), TypeError> {
        match self.resolve(&v.ty) {
            Ty::Vector(e, d) => Ok((*e, *d)),
            Ty::Meta(_) => {
                let (e, d) = (self.fresh(), self.fresh());
                self.unify(&v.ty, &Ty::Vector(Box::new(e.clone()), Box::new(d.clone())));
                Ok((e, d))
            }
            other => Err(TypeError::new(K::NotAVector, v.span, "expected a tensor")
                .with_types("a tensor type", self.zonk(&other))),
        }
    }

    fn binary(&mut self, op: BinOp, a: &Expr, b: &Expr, span: Span) -> Result<Term, TypeError> {
        let bx = Box::new;
        let arith = |o| match o {
            BinOp::Add => Some(ArithOp::Add),
            BinOp::Sub => Some(ArithOp::Sub),
            BinOp::Mul => Some(ArithOp::Mul),
            BinOp::Div => Some(ArithOp::Div),
            _ => None,
        };
        if let Some(aop) = arith(op) {
            let a = self.check(a, &Ty::Rat)?;
            let b = self.check(b, &Ty::Rat)?;
            return Ok(Term::new(TermNode::Arith(aop, bx(a), bx(b)), Ty::Rat, span));
        }
        let logic = match op {
            BinOp::And => Some(LogicOp::And),
            BinOp::Or => Some(LogicOp::Or),
            BinOp::Implies => Some(LogicOp::Implies),
            _ => None,
        };
        if let Some(lop) = logic {
            let a = self.check(a, &Ty::Bool)?;
            let b = self.check(b, &Ty::Bool)?;
            return Ok(Term::new(TermNode::Logic(lop, bx(a), bx(b)), Ty::Bool, span));
        }
        let rel = match op {
            BinOp::Eq => Rel::Eq,
            BinOp::Neq => Rel::Neq,
            BinOp::Leq => Rel::Le,
            BinOp::Lt => Rel::Lt,
            BinOp::Geq => Rel::Ge,
            BinOp::Gt => Rel::Gt,
            BinOp::Index => {
                let v = self.synth(a)?;
                let (elem, dim) = self.vector_parts(&v)?;
                let i = self.check(b, &Ty::Index(Box::new(dim)))?;
                return Ok(Term::new(TermNode::Index(bx(v), bx(i)), elem, span));
            }
            _ => unreachable!("all binary operators handled"),
        };
        let (a, b) = if matches!(rel, Rel::Eq | Rel::Neq) {
            let a = self.synth(a)?;
            match self.resolve(&a.ty) {
                Ty::Bool => {
                    let b = self.check(b, &Ty::Bool)?;
                    (a, b)
                }
                Ty::Index(d) => {
                    let b = self.check(b, &Ty::Index(d))?;
                    (a, b)
                }
                _ => {
                    let a = self.coerce(a, &Ty::Rat)?;
                    let b = self.check(b, &Ty::Rat)?;
                    (a, b)
                }
            }
        } else {
            (self.check(a, &Ty::Rat)?, self.check(b, &Ty::Rat)?)
        };
        Ok(Term::new(TermNode::Cmp(rel, bx(a), bx(b)), Ty::Bool, span))
    }

    fn check(&mut self, e: &Expr, expected: &Ty) -> Result<Term, TypeError> {
        let span = e.span;
        let want = self.resolve(expected);
        match (&e.kind, &want) {
            (ExprKind::Lambda { binder, body }, Ty::Fun(dom, cod)) => {
                if let Some(t) = &binder.ty {
                    let t = self.elab_at(t, Kind::Type)?;
                    if !self.unify(&t, dom) {
                        return Err(self.mismatch(binder.span, dom, &t, "lambda binder annotation disagrees with the expected type"));
                    }
                }
                let body = self.under((**dom).clone(), |c| c.check(body, cod))?;
                Ok(Term::new(TermNode::Lam { name: binder.name.clone(), body: Arc::new(body) }, want.clone(), span))
            }
            (ExprKind::Quant { q: Quantifier::Forall | Quantifier::Foreach, binder, body }, Ty::Vector(elem, dim)) => {
                let bty = self.binder_ty(binder)?;
                self.foreach(binder, bty, body, Some(((**elem).clone(), (**dim).clone())), span)
            }
            (ExprKind::Quant { q: q @ (Quantifier::Forall | Quantifier::Exists), binder, body }, Ty::Bool) => {
                let bty = self.binder_ty(binder)?;
                let body_t = self.under(bty.clone(), |c| c.check(body, &Ty::Bool))?;
                self.synth_quant_bool(*q, binder, bty, body_t, span)
            }
            (ExprKind::NatLit(n), Ty::Index(dim)) => {
                let term = Term::new(TermNode::Num(Q::from_integer((*n).into())), Ty::Nat, span);
                self.index_literal(term, *n, dim)
            }
            (ExprKind::NatLit(n), Ty::Rat) => {
                Ok(Term::new(TermNode::Num(Q::from_integer((*n).into())), Ty::Rat, span))
            }
            (ExprKind::VecLit(items), Ty::Vector(elem, dim)) => {
                let n = Ty::Dim(items.len() as u64);
                if !self.unify(dim, &n) {
                    return Err(self.mismatch(span, &want, &Ty::Vector(elem.clone(), Box::new(n)), "tensor literal has the wrong length"));
                }
                let mut out = Vec::with_capacity(items.len());
                for it in items {
                    out.push(self.check(it, elem)?);
                }
                Ok(Term::new(TermNode::Vector(out), want.clone(), span))
            }
            (ExprKind::If(c, t, f), _) if !matches!(want, Ty::Meta(_)) => {
                let c = self.check(c, &Ty::Bool)?;
                let t = self.check(t, &want)?;
                let f = self.check(f, &want)?;
                Ok(Term::new(TermNode::If(Box::new(c), Box::new(t), Box::new(f)), want.clone(), span))
            }
            (ExprKind::Let { binder, bound, body }, _) if !matches!(want, Ty::Meta(_)) => {
                let bound = match &binder.ty {
                    Some(t) => {
                        let t = self.elab_at(t, Kind::Type)?;
                        self.check(bound, &t)?
                    }
                    None => self.synth(bound)?,
                };
                let body = self.under(bound.ty.clone(), |c| c.check(body, &want))?;
                Ok(Term::new(
                    TermNode::Let { name: binder.name.clone(), bound: Box::new(bound), body: Box::new(body) },
                    want.clone(),
                    span,
                ))
            }
            _ => {
                let t = self.synth(e)?;
                self.coerce(t, &want)
            }
        }
    }

    fn index_literal(&mut self, mut term: Term, n: u64, dim: &Ty) -> Result<Term, TypeError> {
        let want = Ty::Index(Box::new(dim.clone()));
        match self.resolve(dim) {
            Ty::Dim(d) if n < d => {
                term.ty = want;
                Ok(term)
            }
            Ty::Dim(d) => Err(out_of_bounds(n, d, term.span, &want)),
            Ty::Meta(_) => {
                self.pending.push((n, dim.clone(), term.span));
                term.ty = want;
                Ok(term)
            }
            other => Err(TypeError::new(
                K::IndexNotStatic,
                term.span,
                format!("cannot show index {n} is below dimension {}", self.zonk(&other)),
            )
            .with_types(&want, Ty::Nat)),
        }
    }

    fn coerce(&mut self, mut t: Term, want: &Ty) -> Result<Term, TypeError> {
        let actual = self.resolve(&t.ty);
        if actual == Ty::Nat {
            match self.resolve(want) {
                Ty::Rat => {
                    t.ty = Ty::Rat;
                    return Ok(t);
                }
                Ty::Index(dim) => {
                    return match self.static_nat(&t) {
                        Some(n) => self.index_literal(t, n, &dim),
                        None => Err(TypeError::new(
                            K::IndexNotStatic,
                            t.span,
                            "indices must be literals or definitions that reduce to literals",
                        )
                        .with_types(self.zonk(want), Ty::Nat)),
                    };
                }
                _ => {}
            }
        }
        if self.unify(&actual, want) {
            Ok(t)
        } else {
            let span = t.span;
            Err(self.mismatch(span, want, &actual, "type mismatch"))
        }
    }

    fn static_nat(&self, t: &Term) -> Option<u64> {
        match &t.node {
            TermNode::Num(q) if q.is_integer() => to_usize(q).map(|n| n as u64),
            TermNode::Global { decl, .. } => {
                let d = &self.decls[*decl];
                if d.kind != DeclKind::Def || !d.scheme.params.is_empty() {
                    return None;
                }
                let body = d.body.as_ref()?;
                match &body.node {
                    TermNode::Num(q) if q.is_integer() && matches!(d.scheme.ty, Ty::Nat) => {
                        to_usize(q).map(|n| n as u64)
                    }
                    TermNode::Global { .. } => self.static_nat(body),
                    _ => None,
                }
            }
            _ => None,
        }
    }
}

fn validate_quantifiers(t: &Term) -> Result<(), TypeError> {
    let mut err = None;
    walk(t, &mut |t| {
        if err.is_some() {
            return;
        }
        if let TermNode::Quant { binder_ty, .. } = &t.node {
            let ok = match binder_ty {
                Ty::Bool => true,
                Ty::Index(d) => matches!(**d, Ty::Dim(_)),
                other => other.rat_tensor_dims().is_some(),
            };
            if !ok {
                err = Some(TypeError::new(
                    K::Unsupported,
                    t.span,
                    format!("cannot quantify over values of type {binder_ty}"),
                ));
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Pre-order traversal.
pub fn walk(t: &Term, f: &mut dyn FnMut(&Term)) {
    f(t);
    match &t.node {
        TermNode::Local(_) | TermNode::Num(_) | TermNode::Bool(_) | TermNode::Global { .. } => {}
        TermNode::Lam { body, .. } => walk(body, f),
        TermNode::App(a, b)
        | TermNode::Arith(_, a, b)
        | TermNode::Logic(_, a, b)
        | TermNode::Cmp(_, a, b)
        | TermNode::Index(a, b) => {
            walk(a, f);
            walk(b, f);
        }
        TermNode::Neg(a) | TermNode::Not(a) => walk(a, f),
        TermNode::If(a, b, c) | TermNode::Fold { f: a, init: b, vec: c } => {
            walk(a, f);
            walk(b, f);
            walk(c, f);
        }
        TermNode::Quant { body, .. } | TermNode::Foreach { body, .. } => walk(body, f),
        TermNode::Vector(items) => items.iter().for_each(|i| walk(i, f)),
        TermNode::Let { bound, body, .. } => {
            walk(bound, f);
            walk(body, f);
        }
    }
}

fn out_of_bounds(n: u64, d: u64, span: Span, want: &Ty) -> TypeError {
    TypeError::new(K::OutOfBounds, span, format!("index {n} is out of bounds for a dimension of size {d} ({n} >= {d})"))
        .with_types(want, format!("index {n}"))
}

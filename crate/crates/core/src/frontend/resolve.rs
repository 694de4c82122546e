//! Name resolution: bound variables become de Bruijn levels, everything
//! else must name an earlier declaration.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use super::ast::*;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ResolveError {
    #[error("{span}: unbound identifier `{name}`")]
    Unbound { name: String, span: Span },
    #[error("{span}: duplicate declaration `{name}`")]
    Duplicate { name: String, span: Span },
}

impl ResolveError {
    pub fn span(&self) -> Span {
        match self {
            ResolveError::Unbound { span, .. } | ResolveError::Duplicate { span, .. } => *span,
        }
    }
}

pub fn resolve_names(mut program: Program) -> Result<Program, ResolveError> {
    let mut globals: BTreeMap<String, usize> = BTreeMap::new();
    for index in 0..program.decls.len() {
        let decl = &mut program.decls[index];
        if globals.contains_key(&decl.name) {
            return Err(ResolveError::Duplicate { name: decl.name.clone(), span: decl.span });
        }
        let mut types = Vec::new();
        if let Some(sig) = &mut decl.signature {
            resolve_type(sig, &globals, &mut types)?;
        }
        // Shape variables bound by the signature's leading Pi binders are
        // visible in binder annotations of the body.
        let mut pi_scope = Vec::new();
        if decl.kind != DeclKind::TypeSynonym {
            let mut sig = decl.signature.as_ref();
            while let Some(TypeExpr { kind: TypeKind::Pi { binder, body, .. }, .. }) = sig {
                pi_scope.push(binder.clone());
                sig = Some(body);
            }
        }
        if let Some(body) = &mut decl.body {
            let mut scope = Scope { globals: &globals, locals: Vec::new(), types: pi_scope };
            scope.expr(body)?;
        }
        globals.insert(decl.name.clone(), index);
    }
    Ok(program)
}

fn resolve_type(ty: &mut TypeExpr, globals: &BTreeMap<String, usize>, scope: &mut Vec<String>) -> Result<(), ResolveError> {
    match &mut ty.kind {
        TypeKind::Pi { binder, body, .. } => {
            scope.push(binder.clone());
            let r = resolve_type(body, globals, scope);
            scope.pop();
            r
        }
        TypeKind::Var { name, res } => {
            *res = if let Some(level) = scope.iter().rposition(|b| b == name) {
                Res::Local(level)
            } else if let Some(&g) = globals.get(name) {
                Res::Global(g)
            } else {
                return Err(ResolveError::Unbound { name: name.clone(), span: ty.span });
            };
            Ok(())
        }
        TypeKind::Fun(a, b) => {
            resolve_type(a, globals, scope)?;
            resolve_type(b, globals, scope)
        }
        TypeKind::Tensor { elem, dims } => {
            resolve_type(elem, globals, scope)?;
            dims.iter_mut().try_for_each(|d| resolve_type(d, globals, scope))
        }
        TypeKind::Vector { elem, dim } => {
            resolve_type(elem, globals, scope)?;
            resolve_type(dim, globals, scope)
        }
        TypeKind::Index(d) => resolve_type(d, globals, scope),
        TypeKind::NatLit(_) | TypeKind::Bool | TypeKind::Rat | TypeKind::Nat => Ok(()),
    }
}

struct Scope<'g> {
    globals: &'g BTreeMap<String, usize>,
    locals: Vec<String>,
    types: Vec<String>,
}

impl Scope<'_> {
    fn binder(&mut self, b: &mut Binder) -> Result<(), ResolveError> {
        if let Some(ty) = &mut b.ty {
            resolve_type(ty, self.globals, &mut self.types)?;
        }
        Ok(())
    }

    fn under(&mut self, b: &mut Binder, body: &mut Expr) -> Result<(), ResolveError> {
        self.binder(b)?;
        self.locals.push(b.name.clone());
        let r = self.expr(body);
        self.locals.pop();
        r
    }

    fn expr(&mut self, e: &mut Expr) -> Result<(), ResolveError> {
        match &mut e.kind {
            ExprKind::Var { name, res } => {
                *res = if let Some(level) = self.locals.iter().rposition(|b| b == name) {
                    Res::Local(level)
                } else if let Some(&g) = self.globals.get(name) {
                    Res::Global(g)
                } else {
                    return Err(ResolveError::Unbound { name: name.clone(), span: e.span });
                };
                Ok(())
            }
            ExprKind::RatLit(_) | ExprKind::NatLit(_) | ExprKind::True | ExprKind::False => Ok(()),
            ExprKind::Lambda { binder, body } | ExprKind::Quant { binder, body, .. } => self.under(binder, body),
            ExprKind::App(a, b) | ExprKind::Binary(_, a, b) => {
                self.expr(a)?;
                self.expr(b)
            }
            ExprKind::Unary(_, a) => self.expr(a),
            ExprKind::If(a, b, c) => {
                self.expr(a)?;
                self.expr(b)?;
                self.expr(c)
            }
            ExprKind::VecLit(items) => items.iter_mut().try_for_each(|i| self.expr(i)),
            ExprKind::Fold { f, init, vec } => {
                self.expr(f)?;
                self.expr(init)?;
                self.expr(vec)
            }
            ExprKind::Let { binder, bound, body } => {
                self.expr(bound)?;
                self.under(binder, body)
            }
        }
    }
}

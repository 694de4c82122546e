use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::frontend::Kind;

/// Elaborated types. Tensors are nested vectors; dimensions are types of
/// kind `Nat` (`Dim`, a shape parameter, or a unification variable).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Ty {
    Bool,
    Rat,
    /// Natural-number values (unannotated literals, `Nat` parameters).
    Nat,
    /// A concrete dimension.
    Dim(u64),
    Index(Box<Ty>),
    Vector(Box<Ty>, Box<Ty>),
    Fun(Box<Ty>, Box<Ty>),
    /// Shape or type parameter bound by the enclosing declaration's signature.
    Param(usize),
    /// Unification variable; never survives checking.
    Meta(usize),
}

impl Ty {
    pub fn vector(elem: Ty, dim: u64) -> Ty {
        Ty::Vector(Box::new(elem), Box::new(Ty::Dim(dim)))
    }

    pub fn fun(a: Ty, b: Ty) -> Ty {
        Ty::Fun(Box::new(a), Box::new(b))
    }

    pub fn index(dim: u64) -> Ty {
        Ty::Index(Box::new(Ty::Dim(dim)))
    }

    /// Dimensions of a (nested) vector of `Rat`, outermost first.
    /// `Some(vec![])` for `Rat` itself.
    pub fn rat_tensor_dims(&self) -> Option<Vec<usize>> {
        match self {
            Ty::Rat => Some(Vec::new()),
            Ty::Vector(elem, dim) => match **dim {
                Ty::Dim(n) => {
                    let mut dims = alloc::vec![n as usize];
                    dims.extend(elem.rat_tensor_dims()?);
                    Some(dims)
                }
                _ => None,
            },
            _ => None,
        }
    }

    pub fn has_metas(&self) -> bool {
        match self {
            Ty::Meta(_) => true,
            Ty::Index(a) => a.has_metas(),
            Ty::Vector(a, b) | Ty::Fun(a, b) => a.has_metas() || b.has_metas(),
            _ => false,
        }
    }

    pub fn has_params(&self) -> bool {
        match self {
            Ty::Param(_) => true,
            Ty::Index(a) => a.has_params(),
            Ty::Vector(a, b) | Ty::Fun(a, b) => a.has_params() || b.has_params(),
            _ => false,
        }
    }

    /// Replaces `Param(i)` by `args[i]`.
    pub fn subst(&self, args: &[Ty]) -> Ty {
        match self {
            Ty::Param(i) => args.get(*i).cloned().unwrap_or(Ty::Param(*i)),
            Ty::Index(a) => Ty::Index(Box::new(a.subst(args))),
            Ty::Vector(a, b) => Ty::Vector(Box::new(a.subst(args)), Box::new(b.subst(args))),
            Ty::Fun(a, b) => Ty::Fun(Box::new(a.subst(args)), Box::new(b.subst(args))),
            other => other.clone(),
        }
    }
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self, 0))
    }
}

fn render(t: &Ty, ctx: u8) -> String {
    let (s, prec) = match t {
        Ty::Bool => ("Bool".into(), 2),
        Ty::Rat => ("Rat".into(), 2),
        Ty::Nat => ("Nat".into(), 2),
        Ty::Dim(n) => (format!("{n}"), 2),
        Ty::Param(i) => (format!("?p{i}"), 2),
        Ty::Meta(i) => (format!("?{i}"), 2),
        Ty::Index(d) => (format!("Index {}", render(d, 2)), 1),
        Ty::Fun(a, b) => (format!("{} -> {}", render(a, 1), render(b, 0)), 0),
        Ty::Vector(..) => {
            let mut dims = Vec::new();
            let mut cur = t;
            while let Ty::Vector(elem, dim) = cur {
                dims.push(render(dim, 0));
                cur = elem;
            }
            (format!("Tensor {} [{}]", render(cur, 2), dims.join(", ")), 1)
        }
    };
    if prec < ctx {
        format!("({s})")
    } else {
        s
    }
}

/// A declaration's type, generalised over its leading shape parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scheme {
    pub params: Vec<Kind>,
    pub ty: Ty,
}

impl Scheme {
    pub fn mono(ty: Ty) -> Self {
        Scheme { params: Vec::new(), ty }
    }
}

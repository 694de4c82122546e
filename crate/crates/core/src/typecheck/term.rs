use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::ty::Ty;
use crate::frontend::Span;
use crate::rational::Q;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LogicOp {
    And,
    Or,
    Implies,
}

/// Binary comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Eq,
    Neq,
    Le,
    Lt,
    Ge,
    Gt,
}

impl Rel {
    /// `¬(a R b)  ⇔  a R' b`
    pub fn negate(self) -> Rel {
        match self {
            Rel::Eq => Rel::Neq,
            Rel::Neq => Rel::Eq,
            Rel::Le => Rel::Gt,
            Rel::Lt => Rel::Ge,
            Rel::Ge => Rel::Lt,
            Rel::Gt => Rel::Le,
        }
    }

    /// `a R b  ⇔  b R' a`
    pub fn swap(self) -> Rel {
        match self {
            Rel::Le => Rel::Ge,
            Rel::Lt => Rel::Gt,
            Rel::Ge => Rel::Le,
            Rel::Gt => Rel::Lt,
            r => r,
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            Rel::Eq => ord == Ordering::Equal,
            Rel::Neq => ord != Ordering::Equal,
            Rel::Le => ord != Ordering::Greater,
            Rel::Lt => ord == Ordering::Less,
            Rel::Ge => ord != Ordering::Less,
            Rel::Gt => ord == Ordering::Greater,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "==",
            Rel::Neq => "!=",
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quant {
    Forall,
    Exists,
}

/// Elaborated core term; every node carries its type.
#[derive(Clone, Debug)]
pub struct Term {
    pub node: TermNode,
    pub ty: Ty,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub enum TermNode {
    Local(usize),
    /// Reference to a declaration, with its shape parameters instantiated.
    Global { decl: usize, inst: Vec<Ty> },
    /// Rational, natural-number and index literals.
    Num(Q),
    Bool(bool),
    Lam { name: String, body: Arc<Term> },
    App(Box<Term>, Box<Term>),
    Arith(ArithOp, Box<Term>, Box<Term>),
    Neg(Box<Term>),
    Not(Box<Term>),
    Logic(LogicOp, Box<Term>, Box<Term>),
    Cmp(Rel, Box<Term>, Box<Term>),
    If(Box<Term>, Box<Term>, Box<Term>),
    Quant { q: Quant, name: String, binder_ty: Ty, body: Box<Term> },
    /// Tensor comprehension over `Index dim`.
    Foreach { name: String, dim: Ty, body: Box<Term> },
    Vector(Vec<Term>),
    Index(Box<Term>, Box<Term>),
    /// Right fold: `fold f z [a, b] = f a (f b z)`.
    Fold { f: Box<Term>, init: Box<Term>, vec: Box<Term> },
    Let { name: String, bound: Box<Term>, body: Box<Term> },
}

impl Term {
    pub fn new(node: TermNode, ty: Ty, span: Span) -> Self {
        Term { node, ty, span }
    }

    /// Applies `f` to every type annotation in the tree.
    pub fn map_types(&mut self, f: &mut dyn FnMut(&Ty) -> Ty) {
        self.ty = f(&self.ty);
        match &mut self.node {
            TermNode::Local(_) | TermNode::Num(_) | TermNode::Bool(_) => {}
            TermNode::Global { inst, .. } => {
                for t in inst.iter_mut() {
                    *t = f(t);
                }
            }
            TermNode::Lam { body, .. } => Arc::make_mut(body).map_types(f),
            TermNode::App(a, b)
            | TermNode::Arith(_, a, b)
            | TermNode::Logic(_, a, b)
            | TermNode::Cmp(_, a, b)
            | TermNode::Index(a, b) => {
                a.map_types(f);
                b.map_types(f);
            }
            TermNode::Neg(a) | TermNode::Not(a) => a.map_types(f),
            TermNode::If(a, b, c) => {
                a.map_types(f);
                b.map_types(f);
                c.map_types(f);
            }
            TermNode::Quant { binder_ty, body, .. } => {
                *binder_ty = f(binder_ty);
                body.map_types(f);
            }
            TermNode::Foreach { dim, body, .. } => {
                *dim = f(dim);
                body.map_types(f);
            }
            TermNode::Vector(items) => items.iter_mut().for_each(|i| i.map_types(f)),
            TermNode::Fold { f: g, init, vec } => {
                g.map_types(f);
                init.map_types(f);
                vec.map_types(f);
            }
            TermNode::Let { bound, body, .. } => {
                bound.map_types(f);
                body.map_types(f);
            }
        }
    }

    /// First type annotation satisfying `pred`, with the node's span.
    pub fn find_type(&self, pred: &dyn Fn(&Ty) -> bool) -> Option<Span> {
        if pred(&self.ty) {
            return Some(self.span);
        }
        let children: Vec<&Term> = match &self.node {
            TermNode::Local(_) | TermNode::Num(_) | TermNode::Bool(_) => Vec::new(),
            TermNode::Global { inst, .. } => {
                if inst.iter().any(pred) {
                    return Some(self.span);
                }
                Vec::new()
            }
            TermNode::Lam { body, .. } => alloc::vec![&**body],
            TermNode::App(a, b)
            | TermNode::Arith(_, a, b)
            | TermNode::Logic(_, a, b)
            | TermNode::Cmp(_, a, b)
            | TermNode::Index(a, b) => alloc::vec![&**a, &**b],
            TermNode::Neg(a) | TermNode::Not(a) => alloc::vec![&**a],
            TermNode::If(a, b, c) => alloc::vec![&**a, &**b, &**c],
            TermNode::Quant { binder_ty, body, .. } => {
                if pred(binder_ty) {
                    return Some(self.span);
                }
                alloc::vec![&**body]
            }
            TermNode::Foreach { dim, body, .. } => {
                if pred(dim) {
                    return Some(self.span);
                }
                alloc::vec![&**body]
            }
            TermNode::Vector(items) => items.iter().collect(),
            TermNode::Fold { f, init, vec } => alloc::vec![&**f, &**init, &**vec],
            TermNode::Let { bound, body, .. } => alloc::vec![&**bound, &**body],
        };
        children.into_iter().find_map(|c| c.find_type(pred))
    }
}

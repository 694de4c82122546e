use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::rational::Q;

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub const fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeclKind {
    TypeSynonym,
    Def,
    Network,
    Dataset,
    Parameter,
    Property,
}

impl DeclKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DeclKind::TypeSynonym => "type",
            DeclKind::Def => "def",
            DeclKind::Network => "network",
            DeclKind::Dataset => "dataset",
            DeclKind::Parameter => "parameter",
            DeclKind::Property => "property",
        }
    }

    /// Declarations whose value is supplied from outside at compile time.
    pub fn is_external(self) -> bool {
        matches!(self, DeclKind::Network | DeclKind::Dataset | DeclKind::Parameter)
    }
}

/// A top-level declaration.
///
/// For type synonyms `signature` holds the aliased type and `body` is
/// `None`. Network, dataset and parameter declarations carry only a
/// signature. Definitions written without a signature (`velocity = 0`) have
/// `signature == None`.
#[derive(Clone, Debug)]
pub struct Decl {
    pub kind: DeclKind,
    pub name: String,
    pub span: Span,
    pub signature: Option<TypeExpr>,
    pub body: Option<Expr>,
}

#[derive(Clone, Debug, Default)]
pub struct Program {
    pub decls: Vec<Decl>,
}

impl Program {
    pub fn decl(&self, name: &str) -> Option<(usize, &Decl)> {
        self.decls.iter().enumerate().find(|(_, d)| d.name == name)
    }
}

/// What an identifier refers to once names are resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Res {
    Unresolved,
    /// Bound variable, as a de Bruijn level.
    Local(usize),
    /// Index of an earlier top-level declaration.
    Global(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Type,
    Nat,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Type => "Type",
            Kind::Nat => "Nat",
        })
    }
}

#[derive(Clone, Debug)]
pub struct TypeExpr {
    pub kind: TypeKind,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub enum TypeKind {
    /// `forall (n : Nat) . τ`
    Pi { binder: String, kind: Kind, body: Box<TypeExpr> },
    Var { name: String, res: Res },
    Fun(Box<TypeExpr>, Box<TypeExpr>),
    /// Type-level natural number, used as a dimension.
    NatLit(u64),
    /// `Tensor τ [d1, …, dk]`
    Tensor { elem: Box<TypeExpr>, dims: Vec<TypeExpr> },
    /// `Vector τ d`
    Vector { elem: Box<TypeExpr>, dim: Box<TypeExpr> },
    Index(Box<TypeExpr>),
    Bool,
    Rat,
    /// The type of natural-number values.
    Nat,
}

#[derive(Clone, Debug)]
pub struct Binder {
    pub name: String,
    pub ty: Option<TypeExpr>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Forall,
    Exists,
    Foreach,
}

impl Quantifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Quantifier::Forall => "forall",
            Quantifier::Exists => "exists",
            Quantifier::Foreach => "foreach",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    And,
    Or,
    Implies,
    Eq,
    Neq,
    Leq,
    Lt,
    Geq,
    Gt,
    /// Vector lookup `v ! i`.
    Index,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Implies => "=>",
            BinOp::Eq => "==",
            BinOp::Neq => "!=",
            BinOp::Leq => "<=",
            BinOp::Lt => "<",
            BinOp::Geq => ">=",
            BinOp::Gt => ">",
            BinOp::Index => "!",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Neq | BinOp::Leq | BinOp::Lt | BinOp::Geq | BinOp::Gt
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug)]
pub enum ExprKind {
    Var { name: String, res: Res },
    RatLit(Q),
    NatLit(u64),
    True,
    False,
    Lambda { binder: Binder, body: Box<Expr> },
    App(Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    /// `forall`/`exists`; the type checker turns a `forall` with a
    /// non-Boolean body into `Foreach`.
    Quant { q: Quantifier, binder: Binder, body: Box<Expr> },
    VecLit(Vec<Expr>),
    Fold { f: Box<Expr>, init: Box<Expr>, vec: Box<Expr> },
    Let { binder: Binder, bound: Box<Expr>, body: Box<Expr> },
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }
}

/// Structural equality ignoring spans and resolution data.
pub trait SameShape {
    fn same_shape(&self, other: &Self) -> bool;
}

impl SameShape for TypeExpr {
    fn same_shape(&self, other: &Self) -> bool {
        use TypeKind::*;
        match (&self.kind, &other.kind) {
            (Pi { binder: a, kind: k, body: b }, Pi { binder: c, kind: l, body: d }) => {
                a == c && k == l && b.same_shape(d)
            }
            (Var { name: a, .. }, Var { name: b, .. }) => a == b,
            (Fun(a, b), Fun(c, d)) => a.same_shape(c) && b.same_shape(d),
            (NatLit(a), NatLit(b)) => a == b,
            (Tensor { elem: a, dims: b }, Tensor { elem: c, dims: d }) => {
                a.same_shape(c) && b.len() == d.len() && b.iter().zip(d).all(|(x, y)| x.same_shape(y))
            }
            (Vector { elem: a, dim: b }, Vector { elem: c, dim: d }) => {
                a.same_shape(c) && b.same_shape(d)
            }
            (Index(a), Index(b)) => a.same_shape(b),
            (Bool, Bool) | (Rat, Rat) | (Nat, Nat) => true,
            _ => false,
        }
    }
}

impl SameShape for Binder {
    fn same_shape(&self, other: &Self) -> bool {
        self.name == other.name
            && match (&self.ty, &other.ty) {
                (None, None) => true,
                (Some(a), Some(b)) => a.same_shape(b),
                _ => false,
            }
    }
}

impl SameShape for Expr {
    fn same_shape(&self, other: &Self) -> bool {
        use ExprKind::*;
        match (&self.kind, &other.kind) {
            (Var { name: a, .. }, Var { name: b, .. }) => a == b,
            (RatLit(a), RatLit(b)) => a == b,
            (NatLit(a), NatLit(b)) => a == b,
            (True, True) | (False, False) => true,
            (Lambda { binder: a, body: b }, Lambda { binder: c, body: d }) => {
                a.same_shape(c) && b.same_shape(d)
            }
            (App(a, b), App(c, d)) => a.same_shape(c) && b.same_shape(d),
            (Unary(o, a), Unary(p, b)) => o == p && a.same_shape(b),
            (Binary(o, a, b), Binary(p, c, d)) => o == p && a.same_shape(c) && b.same_shape(d),
            (If(a, b, c), If(d, e, f)) => a.same_shape(d) && b.same_shape(e) && c.same_shape(f),
            (Quant { q: a, binder: b, body: c }, Quant { q: d, binder: e, body: f }) => {
                a == d && b.same_shape(e) && c.same_shape(f)
            }
            (VecLit(a), VecLit(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_shape(y)),
            (Fold { f: a, init: b, vec: c }, Fold { f: d, init: e, vec: g }) => {
                a.same_shape(d) && b.same_shape(e) && c.same_shape(g)
            }
            (Let { binder: a, bound: b, body: c }, Let { binder: d, bound: e, body: f }) => {
                a.same_shape(d) && b.same_shape(e) && c.same_shape(f)
            }
            _ => false,
        }
    }
}

impl SameShape for Decl {
    fn same_shape(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.name == other.name
            && match (&self.signature, &other.signature) {
                (None, None) => true,
                (Some(a), Some(b)) => a.same_shape(b),
                _ => false,
            }
            && match (&self.body, &other.body) {
                (None, None) => true,
                (Some(a), Some(b)) => a.same_shape(b),
                _ => false,
            }
    }
}

impl SameShape for Program {
    fn same_shape(&self, other: &Self) -> bool {
        self.decls.len() == other.decls.len()
            && self.decls.iter().zip(&other.decls).all(|(a, b)| a.same_shape(b))
    }
}

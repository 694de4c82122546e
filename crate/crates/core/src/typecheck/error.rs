use alloc::string::String;
use core::fmt;

use crate::frontend::Span;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TypeErrorKind {
    Mismatch,
    OutOfBounds,
    /// An index that is not a statically known natural number.
    IndexNotStatic,
    KindMismatch,
    PropertyNotBool,
    BadNetworkType,
    BadDatasetType,
    BadParameterType,
    NotAFunction,
    NotAVector,
    TypeAsValue,
    ValueAsType,
    /// A shape or element type that no use site pins down.
    Ambiguous,
    MissingBody,
    Unsupported,
}

impl TypeErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            TypeErrorKind::Mismatch => "E-TYPE-MISMATCH",
            TypeErrorKind::OutOfBounds => "E-INDEX-OUT-OF-BOUNDS",
            TypeErrorKind::IndexNotStatic => "E-INDEX-NOT-STATIC",
            TypeErrorKind::KindMismatch => "E-KIND-MISMATCH",
            TypeErrorKind::PropertyNotBool => "E-PROPERTY-NOT-BOOL",
            TypeErrorKind::BadNetworkType => "E-NETWORK-TYPE",
            TypeErrorKind::BadDatasetType => "E-DATASET-TYPE",
            TypeErrorKind::BadParameterType => "E-PARAMETER-TYPE",
            TypeErrorKind::NotAFunction => "E-NOT-A-FUNCTION",
            TypeErrorKind::NotAVector => "E-NOT-A-VECTOR",
            TypeErrorKind::TypeAsValue => "E-TYPE-AS-VALUE",
            TypeErrorKind::ValueAsType => "E-VALUE-AS-TYPE",
            TypeErrorKind::Ambiguous => "E-AMBIGUOUS-TYPE",
            TypeErrorKind::MissingBody => "E-MISSING-BODY",
            TypeErrorKind::Unsupported => "E-UNSUPPORTED-TYPE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeError {
    pub span: Span,
    pub kind: TypeErrorKind,
    pub expected: Option<String>,
    pub actual: Option<String>,
    pub note: String,
}

impl TypeError {
    pub fn new(kind: TypeErrorKind, span: Span, note: impl Into<String>) -> Self {
        TypeError { span, kind, expected: None, actual: None, note: note.into() }
    }

    pub fn with_types(mut self, expected: impl fmt::Display, actual: impl fmt::Display) -> Self {
        use alloc::string::ToString;
        self.expected = Some(expected.to_string());
        self.actual = Some(actual.to_string());
        self
    }

    pub fn code(&self) -> &'static str {
        self.kind.code()
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.note)?;
        if let (Some(e), Some(a)) = (&self.expected, &self.actual) {
            write!(f, " (expected {e}, found {a})")?;
        }
        Ok(())
    }
}

impl core::error::Error for TypeError {}

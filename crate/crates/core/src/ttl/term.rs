use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralKind {
    Integer,
    Decimal,
    Boolean,
    Text,
}

impl LiteralKind {
    /// Maps an XSD datatype IRI to a literal kind. Unknown datatypes are text.
    pub fn from_datatype(iri: &str) -> Self {
        match iri.strip_prefix(XSD) {
            Some(
                "integer" | "int" | "long" | "short" | "byte" | "nonNegativeInteger"
                | "positiveInteger" | "unsignedInt" | "unsignedLong",
            ) => LiteralKind::Integer,
            Some("decimal" | "double" | "float") => LiteralKind::Decimal,
            Some("boolean") => LiteralKind::Boolean,
            _ => LiteralKind::Text,
        }
    }

    pub fn datatype(self) -> String {
        let local = match self {
            LiteralKind::Integer => "integer",
            LiteralKind::Decimal => "decimal",
            LiteralKind::Boolean => "boolean",
            LiteralKind::Text => "string",
        };
        format!("{XSD}{local}")
    }

    pub fn is_numeric(self) -> bool {
        !matches!(self, LiteralKind::Text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed {kind:?} literal {lexical:?}")]
pub struct LiteralError {
    pub lexical: String,
    pub kind: LiteralKind,
}

/// A literal kept in lexical form so quads stay hashable and round-trip
/// exactly through serialization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    lexical: String,
    kind: LiteralKind,
}

impl Literal {
    pub fn new(lexical: impl Into<String>, kind: LiteralKind) -> Result<Self, LiteralError> {
        let lexical = lexical.into();
        let ok = match kind {
            LiteralKind::Integer => lexical.parse::<i64>().is_ok(),
            LiteralKind::Decimal => lexical
                .parse::<f64>()
                .map(|v| v.is_finite())
                .unwrap_or(false),
            LiteralKind::Boolean => matches!(lexical.as_str(), "true" | "false" | "1" | "0"),
            LiteralKind::Text => true,
        };
        if ok {
            Ok(Self { lexical, kind })
        } else {
            Err(LiteralError { lexical, kind })
        }
    }

    pub fn integer(v: i64) -> Self {
        Self {
            lexical: v.to_string(),
            kind: LiteralKind::Integer,
        }
    }

    /// Decimal literal with a fixed number of fractional digits.
    pub fn decimal(v: f64, digits: usize) -> Self {
        let mut lexical = format!("{v:.digits$}");
        if lexical.starts_with('-') && lexical[1..].chars().all(|c| c == '0' || c == '.') {
            lexical.remove(0);
        }
        Self {
            lexical,
            kind: LiteralKind::Decimal,
        }
    }

    pub fn boolean(v: bool) -> Self {
        Self {
            lexical: v.to_string(),
            kind: LiteralKind::Boolean,
        }
    }

    pub fn text(v: impl Into<String>) -> Self {
        Self {
            lexical: v.into(),
            kind: LiteralKind::Text,
        }
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn kind(&self) -> LiteralKind {
        self.kind
    }

    /// Numeric value; booleans map to 0/1, text has none.
    pub fn as_f64(&self) -> Option<f64> {
        match self.kind {
            LiteralKind::Integer | LiteralKind::Decimal => self.lexical.parse().ok(),
            LiteralKind::Boolean => Some(match self.lexical.as_str() {
                "true" | "1" => 1.0,
                _ => 0.0,
            }),
            LiteralKind::Text => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Iri(String),
    Literal(Literal),
}

impl Term {
    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(s) => Some(s),
            Term::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(l) => Some(l),
            Term::Iri(_) => None,
        }
    }
}

/// One timestamped triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Quad {
    pub subject: String,
    pub predicate: String,
    pub object: Term,
    pub timestamp: i64,
}

impl Quad {
    pub fn new(
        subject: impl Into<String>,
        predicate: impl Into<String>,
        object: Term,
        timestamp: i64,
    ) -> Self {
        Self {
            subject: subject.into(),
            predicate: predicate.into(),
            object,
            timestamp,
        }
    }

    pub fn is_type_assertion(&self) -> bool {
        self.predicate == RDF_TYPE
    }
}

impl fmt::Display for Quad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.object {
            Term::Iri(o) => write!(f, "<{}> <{}> <{}> @{}", self.subject, self.predicate, o, self.timestamp),
            Term::Literal(l) => write!(
                f,
                "<{}> <{}> \"{}\"^^<{}> @{}",
                self.subject,
                self.predicate,
                l.lexical(),
                l.kind().datatype(),
                self.timestamp
            ),
        }
    }
}

//! Turtle writer for the subset the ingester reads: one `@prefix`, one
//! predicate-list statement per subject, bare numeric and boolean literals.

use std::fmt::Write as _;

use crate::ttl::{LiteralKind, Quad, Term, RDF_TYPE};

pub const PREFIX: &str = "k";

fn is_local_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn iri(out: &mut String, namespace: &str, iri: &str) {
    match iri.strip_prefix(namespace) {
        Some(local) if is_local_name(local) => {
            let _ = write!(out, "{PREFIX}:{local}");
        }
        _ => {
            let _ = write!(out, "<{iri}>");
        }
    }
}

fn object(out: &mut String, namespace: &str, term: &Term) {
    match term {
        Term::Iri(o) => iri(out, namespace, o),
        Term::Literal(l) => {
            let lex = l.lexical();
            let bare = match l.kind() {
                LiteralKind::Integer => !lex.starts_with('+'),
                LiteralKind::Decimal => {
                    lex.contains('.') && !lex.contains(['e', 'E']) && !lex.starts_with('+') && !lex.ends_with('.')
                }
                LiteralKind::Boolean => lex == "true" || lex == "false",
                LiteralKind::Text => false,
            };
            if bare {
                out.push_str(lex);
            } else {
                out.push('"');
                for c in lex.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        '\r' => out.push_str("\\r"),
                        '\t' => out.push_str("\\t"),
                        c => out.push(c),
                    }
                }
                out.push_str("\"^^");
                iri(out, namespace, &l.kind().datatype());
            }
        }
    }
}

/// Serializes one snapshot. Consecutive quads with the same subject share
/// a statement; timestamps are carried by the file name, not the text.
pub fn emit_snapshot(quads: &[Quad], namespace: &str) -> String {
    let mut out = format!("@prefix {PREFIX}: <{namespace}> .\n");
    let mut i = 0;
    while i < quads.len() {
        let subject = &quads[i].subject;
        out.push('\n');
        iri(&mut out, namespace, subject);
        let mut first = true;
        while i < quads.len() && &quads[i].subject == subject {
            let q = &quads[i];
            out.push_str(if first { " " } else { " ;\n    " });
            first = false;
            if q.predicate == RDF_TYPE {
                out.push('a');
            } else {
                iri(&mut out, namespace, &q.predicate);
            }
            out.push(' ');
            object(&mut out, namespace, &q.object);
            i += 1;
        }
        out.push_str(" .\n");
    }
    out
}

use std::collections::HashMap;
use std::fmt;

use super::schema::{Category, OntologySchema};
use super::term::{LiteralKind, Quad, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    UnknownPredicate,
    Violation(String),
}

/// Per-quad verdicts plus the three partition counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub verdicts: Vec<Verdict>,
    pub accepted: usize,
    pub unknown_predicate: usize,
    pub violations: usize,
}

impl ValidationReport {
    pub fn accepted_quads<'a>(&'a self, quads: &'a [Quad]) -> impl Iterator<Item = &'a Quad> + 'a {
        quads
            .iter()
            .zip(&self.verdicts)
            .filter(|(_, v)| **v == Verdict::Accepted)
            .map(|(q, _)| q)
    }

    pub fn is_clean(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "quads checked:      {}", self.verdicts.len())?;
        writeln!(f, "accepted:           {}", self.accepted)?;
        writeln!(f, "unknown predicates: {}", self.unknown_predicate)?;
        writeln!(f, "violations:         {}", self.violations)?;
        for (i, v) in self.verdicts.iter().enumerate() {
            if let Verdict::Violation(msg) = v {
                writeln!(f, "  quad #{i}: {msg}")?;
            }
        }
        Ok(())
    }
}

fn kind_fits(declared: LiteralKind, found: LiteralKind) -> bool {
    declared == found || (declared == LiteralKind::Decimal && found == LiteralKind::Integer)
}

/// Partitions quads into accepted / unknown-predicate / violation. Entity
/// categories come from the type assertions anywhere in the input.
pub fn validate_quads(quads: &[Quad], schema: &OntologySchema) -> ValidationReport {
    let mut types: HashMap<&str, Category> = HashMap::new();
    let mut conflicting: HashMap<&str, ()> = HashMap::new();
    for q in quads.iter().filter(|q| q.is_type_assertion()) {
        if let Some(c) = q.object.as_iri().and_then(|o| schema.category_of_class(o)) {
            match types.get(q.subject.as_str()) {
                Some(&prev) if prev != c => {
                    conflicting.insert(q.subject.as_str(), ());
                }
                _ => {
                    types.insert(q.subject.as_str(), c);
                }
            }
        }
    }

    let mut report = ValidationReport::default();
    for q in quads {
        let verdict = check(q, schema, &types, &conflicting);
        match verdict {
            Verdict::Accepted => report.accepted += 1,
            Verdict::UnknownPredicate => report.unknown_predicate += 1,
            Verdict::Violation(_) => report.violations += 1,
        }
        report.verdicts.push(verdict);
    }
    report
}

fn check(
    q: &Quad,
    schema: &OntologySchema,
    types: &HashMap<&str, Category>,
    conflicting: &HashMap<&str, ()>,
) -> Verdict {
    if q.subject.is_empty() || q.predicate.is_empty() {
        return Verdict::Violation("empty subject or predicate".into());
    }
    let subject_type = types.get(q.subject.as_str()).copied();
    if q.is_type_assertion() {
        return match q.object.as_iri().and_then(|o| schema.category_of_class(o)) {
            None => Verdict::Violation(format!("{} typed with unknown class", q.subject)),
            Some(c) if conflicting.contains_key(q.subject.as_str()) && Some(c) != subject_type => {
                Verdict::Violation(format!("{} typed as more than one category", q.subject))
            }
            Some(_) => Verdict::Accepted,
        };
    }
    if let Some(rel) = schema.relation_by_predicate(&q.predicate) {
        let Term::Iri(obj) = &q.object else {
            return Verdict::Violation(format!("relation {:?} has a literal object", rel.kind));
        };
        let obj_type = types.get(obj.as_str()).copied();
        return if subject_type != Some(rel.domain) {
            Verdict::Violation(format!(
                "{:?} expects a {} subject, {} is {}",
                rel.kind,
                rel.domain,
                q.subject,
                subject_type.map_or("untyped".to_string(), |c| c.to_string())
            ))
        } else if obj_type != Some(rel.range) {
            Verdict::Violation(format!(
                "{:?} expects a {} object, {} is {}",
                rel.kind,
                rel.range,
                obj,
                obj_type.map_or("untyped".to_string(), |c| c.to_string())
            ))
        } else {
            Verdict::Accepted
        };
    }
    if let Some(attr) = schema.attribute_by_predicate(&q.predicate) {
        return match (&q.object, subject_type) {
            (_, s) if s != Some(attr.category) => Verdict::Violation(format!(
                "attribute {} belongs to {}, subject {} is {}",
                attr.name,
                attr.category,
                q.subject,
                s.map_or("untyped".to_string(), |c| c.to_string())
            )),
            (Term::Literal(l), _) if kind_fits(attr.kind, l.kind()) => Verdict::Accepted,
            (Term::Literal(l), _) => Verdict::Violation(format!(
                "attribute {} expects {:?}, found {:?}",
                attr.name,
                attr.kind,
                l.kind()
            )),
            (Term::Iri(_), _) => Verdict::Violation(format!("attribute {} has an IRI value", attr.name)),
        };
    }
    Verdict::UnknownPredicate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ttl::{Literal, RDF_TYPE};

    const NS: &str = "http://example.org/k8s#";

    fn k(local: &str) -> String {
        format!("{NS}{local}")
    }

    fn typed(e: &str, c: &str) -> Quad {
        Quad::new(k(e), RDF_TYPE, Term::Iri(k(c)), 0)
    }

    #[test]
    fn numeric_attribute_accepted() {
        let s = OntologySchema::kubernetes();
        let q = vec![
            typed("p", "Pod"),
            Quad::new(k("p"), k("cpu"), Term::Literal(Literal::decimal(2.0, 1)), 0),
        ];
        let r = validate_quads(&q, &s);
        assert_eq!((r.accepted, r.unknown_predicate, r.violations), (2, 0, 0));
    }

    #[test]
    fn unknown_predicate_counted() {
        let s = OntologySchema::kubernetes();
        let q = vec![Quad::new(k("p"), k("colour"), Term::Literal(Literal::text("red")), 0)];
        let r = validate_quads(&q, &s);
        assert_eq!(r.unknown_predicate, 1);
        assert_eq!(r.accepted, 0);
    }

    #[test]
    fn connection_to_pod_is_violation() {
        let s = OntologySchema::kubernetes();
        let q = vec![
            typed("c", "Connection"),
            typed("p1", "Pod"),
            typed("p2", "Pod"),
            Quad::new(k("c"), k("fromPod"), Term::Iri(k("p1")), 0),
            Quad::new(k("c"), k("toService"), Term::Iri(k("p2")), 0),
        ];
        let r = validate_quads(&q, &s);
        assert_eq!(r.violations, 1);
        assert_eq!(r.accepted, 4);
        assert!(matches!(r.verdicts[4], Verdict::Violation(_)));
        assert!(r.to_string().contains("violations:         1"));
    }

    #[test]
    fn wrong_category_and_kind() {
        let s = OntologySchema::kubernetes();
        let q = vec![
            typed("n", "Node"),
            typed("p", "Pod"),
            Quad::new(k("n"), k("cpu"), Term::Literal(Literal::decimal(1.0, 1)), 0),
            Quad::new(k("p"), k("cpu"), Term::Literal(Literal::text("high")), 0),
            Quad::new(k("p"), k("restarts"), Term::Literal(Literal::decimal(1.5, 1)), 0),
            typed("x", "Widget"),
        ];
        let r = validate_quads(&q, &s);
        assert_eq!(r.violations, 4);
    }
}

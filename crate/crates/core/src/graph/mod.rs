//! Discrete-time dynamic knowledge graph: a frozen entity registry,
//! per-category attribute tensors (entity x snapshot x attribute) with a
//! presence mask, and per-snapshot hierarchy edges.

mod cache;
mod hierarchy;
mod registry;
mod tensor;

use std::collections::HashMap;

use thiserror::Error;

pub use cache::{read_cache, write_cache, CacheError, CACHE_MAGIC, CACHE_VERSION};
pub use hierarchy::{HierarchyIndex, RelationEdges};
pub use registry::EntityRegistry;
pub use tensor::CategoryTensor;

use crate::scalar::Scalar;
use crate::ttl::{Category, OntologySchema, Quad, RelationKind, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("no snapshots in input")]
    NoSnapshots,
    #[error("quad references unregistered entity {0}")]
    UnregisteredEntity(String),
    #[error("attribute {predicate} on {subject} is not numeric")]
    NonNumeric { subject: String, predicate: String },
    #[error("{subject} is a {found}, predicate {predicate} requires {expected}")]
    CategoryMismatch {
        subject: String,
        predicate: String,
        expected: Category,
        found: Category,
    },
    #[error("unknown entity {0}")]
    UnknownEntity(String),
    #[error("unknown timestamp {0}")]
    UnknownTimestamp(i64),
}

/// Build diagnostics that do not abort the build.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildWarnings {
    /// Edges whose endpoints are not both present in that snapshot.
    pub dangling_edges: usize,
    /// Quads with predicates outside the schema.
    pub skipped_quads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicKnowledgeGraph<T> {
    schema: OntologySchema,
    timestamps: Vec<i64>,
    registry: EntityRegistry,
    tensors: Vec<CategoryTensor<T>>,
    hierarchy: HierarchyIndex,
    warnings: BuildWarnings,
}

/// Assembles quads into a graph, creating a fresh registry from every typed
/// entity in the input.
pub fn build_graph<T: Scalar>(
    quads: &[Quad],
    schema: &OntologySchema,
) -> Result<DynamicKnowledgeGraph<T>, GraphError> {
    build_graph_with_registry(quads, schema, None)
}

/// Like [`build_graph`], but keeps the ordering of an existing (frozen)
/// registry. Entities unknown to `base` are appended and flagged late.
pub fn build_graph_with_registry<T: Scalar>(
    quads: &[Quad],
    schema: &OntologySchema,
    base: Option<&EntityRegistry>,
) -> Result<DynamicKnowledgeGraph<T>, GraphError> {
    let mut timestamps: Vec<i64> = quads.iter().map(|q| q.timestamp).collect();
    timestamps.sort_unstable();
    timestamps.dedup();
    if timestamps.is_empty() {
        return Err(GraphError::NoSnapshots);
    }
    let t_index: HashMap<i64, usize> = timestamps.iter().enumerate().map(|(i, &t)| (t, i)).collect();

    let typed = quads.iter().filter(|q| q.is_type_assertion()).filter_map(|q| {
        q.object
            .as_iri()
            .and_then(|o| schema.category_of_class(o))
            .map(|c| (q.subject.as_str(), c))
    });
    let registry = match base {
        None => EntityRegistry::build(typed),
        Some(b) => b.extended(typed),
    };

    let n_t = timestamps.len();
    let mut tensors: Vec<CategoryTensor<T>> = Category::ALL
        .iter()
        .map(|&c| CategoryTensor::zeros(c, registry.len(c), n_t, schema.attributes_of(c).len()))
        .collect();
    let slots = schema.attribute_slots();
    let mut hierarchy = HierarchyIndex::new(n_t);
    let mut warnings = BuildWarnings::default();

    let lookup = |iri: &str| {
        registry
            .lookup(iri)
            .ok_or_else(|| GraphError::UnregisteredEntity(iri.to_string()))
    };

    for q in quads {
        let ti = t_index[&q.timestamp];
        if q.is_type_assertion() {
            if let Some((c, e)) = registry.lookup(&q.subject) {
                tensors[c.index()].set_present(e, ti);
            }
            continue;
        }
        if let Some(&(cat, slot)) = slots.get(q.predicate.as_str()) {
            let (c, e) = lookup(&q.subject)?;
            if c != cat {
                return Err(GraphError::CategoryMismatch {
                    subject: q.subject.clone(),
                    predicate: q.predicate.clone(),
                    expected: cat,
                    found: c,
                });
            }
            let v = q
                .object
                .as_literal()
                .and_then(|l| l.as_f64())
                .ok_or_else(|| GraphError::NonNumeric {
                    subject: q.subject.clone(),
                    predicate: q.predicate.clone(),
                })?;
            let tensor = &mut tensors[c.index()];
            tensor.set(e, ti, slot, T::lit(v));
            tensor.set_present(e, ti);
        } else if let Some(rel) = schema.relation_by_predicate(&q.predicate) {
            let (sc, s) = lookup(&q.subject)?;
            let obj = match &q.object {
                Term::Iri(o) => o,
                Term::Literal(_) => {
                    return Err(GraphError::UnregisteredEntity(format!("{:?}", q.object)))
                }
            };
            let (oc, o) = lookup(obj)?;
            for (iri, found, expected) in [(&q.subject, sc, rel.domain), (obj, oc, rel.range)] {
                if found != expected {
                    return Err(GraphError::CategoryMismatch {
                        subject: iri.clone(),
                        predicate: q.predicate.clone(),
                        expected,
                        found,
                    });
                }
            }
            tensors[sc.index()].set_present(s, ti);
            hierarchy.push(ti, rel.kind, s, o);
        } else {
            // subject still counts as observed
            if let Some((c, e)) = registry.lookup(&q.subject) {
                tensors[c.index()].set_present(e, ti);
            }
            warnings.skipped_quads += 1;
        }
    }
    hierarchy.finish();

    for ti in 0..n_t {
        for kind in RelationKind::ALL {
            let Some(def) = schema.relation(kind) else { continue };
            for &(s, o) in hierarchy.edges(ti, kind).by_subject() {
                let ok = tensors[def.domain.index()].is_present(s as usize, ti)
                    && tensors[def.range.index()].is_present(o as usize, ti);
                if !ok {
                    warnings.dangling_edges += 1;
                }
            }
        }
    }
    if warnings.dangling_edges > 0 {
        log::warn!("{} hierarchy edge(s) reference absent entities", warnings.dangling_edges);
    }

    Ok(DynamicKnowledgeGraph {
        schema: schema.clone(),
        timestamps,
        registry,
        tensors,
        hierarchy,
        warnings,
    })
}

impl<T: Scalar> DynamicKnowledgeGraph<T> {
    pub(crate) fn from_parts(
        schema: OntologySchema,
        timestamps: Vec<i64>,
        registry: EntityRegistry,
        tensors: Vec<CategoryTensor<T>>,
        hierarchy: HierarchyIndex,
        warnings: BuildWarnings,
    ) -> Self {
        Self {
            schema,
            timestamps,
            registry,
            tensors,
            hierarchy,
            warnings,
        }
    }

    pub fn schema(&self) -> &OntologySchema {
        &self.schema
    }

    /// Sorted, deduplicated snapshot timestamps.
    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn n_snapshots(&self) -> usize {
        self.timestamps.len()
    }

    pub fn time_index(&self, t: i64) -> Option<usize> {
        self.timestamps.binary_search(&t).ok()
    }

    pub fn registry(&self) -> &EntityRegistry {
        &self.registry
    }

    pub fn tensor(&self, c: Category) -> &CategoryTensor<T> {
        &self.tensors[c.index()]
    }

    pub fn hierarchy(&self) -> &HierarchyIndex {
        &self.hierarchy
    }

    pub fn warnings(&self) -> &BuildWarnings {
        &self.warnings
    }

    /// Neighbors of `entity` at snapshot `t` under `relation`. With
    /// `outgoing` the entity is the subject of the relation, otherwise the
    /// object. Result is sorted.
    pub fn neighbors(
        &self,
        entity: &str,
        t: i64,
        relation: RelationKind,
        outgoing: bool,
    ) -> Result<Vec<&str>, GraphError> {
        let (c, e) = self
            .registry
            .lookup(entity)
            .ok_or_else(|| GraphError::UnknownEntity(entity.to_string()))?;
        let ti = self.time_index(t).ok_or(GraphError::UnknownTimestamp(t))?;
        let Some(def) = self.schema.relation(relation) else {
            return Ok(Vec::new());
        };
        let (own, other) = if outgoing {
            (def.domain, def.range)
        } else {
            (def.range, def.domain)
        };
        if own != c {
            return Ok(Vec::new());
        }
        let mut out: Vec<&str> = self
            .hierarchy
            .neighbors(ti, relation, outgoing, e)
            .map(|i| self.registry.iri(other, i))
            .collect();
        out.sort_unstable();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ttl::{parse_ttl, Literal, RDF_TYPE};

    const NS: &str = "http://example.org/k8s#";

    fn k(local: &str) -> String {
        format!("{NS}{local}")
    }

    fn doc(body: &str, t: i64) -> Vec<Quad> {
        parse_ttl(&format!("@prefix k: <{NS}> .\n{body}"), t).unwrap()
    }

    #[test]
    fn single_pod_tensor() {
        let s = OntologySchema::kubernetes();
        let g: DynamicKnowledgeGraph<f64> =
            build_graph(&doc("k:p a k:Pod . k:p k:cpu 2.0 .", 0), &s).unwrap();
        let pod = g.tensor(Category::Pod);
        assert_eq!(pod.shape(), (1, 1, 4));
        assert_eq!(pod.value(0, 0, 0), 2.0);
        assert!(pod.is_present(0, 0));
    }

    #[test]
    fn absent_snapshot_is_zero_filled() {
        let s = OntologySchema::kubernetes();
        let mut q = doc("k:p a k:Pod . k:p k:cpu 2.0 ; k:memory 5.0 .", 10);
        q.extend(doc("k:q a k:Pod .", 20));
        let g: DynamicKnowledgeGraph<f64> = build_graph(&q, &s).unwrap();
        let pod = g.tensor(Category::Pod);
        let p = g.registry().lookup(&k("p")).unwrap().1;
        assert_eq!(pod.presence_series(p), vec![true, false]);
        assert!(pod.row(p, 1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn neighbors_by_relation() {
        let s = OntologySchema::kubernetes();
        let q = doc(
            "k:s a k:Service . k:c1 a k:Connection . k:c2 a k:Connection . k:p a k:Pod .
             k:c1 k:toService k:s . k:c2 k:toService k:s . k:c1 k:fromPod k:p .",
            5,
        );
        let g: DynamicKnowledgeGraph<f64> = build_graph(&q, &s).unwrap();
        let conns = g.neighbors(&k("s"), 5, RelationKind::ConnectsService, false).unwrap();
        assert_eq!(conns, vec![k("c1"), k("c2")]);
        assert!(g.neighbors(&k("p"), 5, RelationKind::Hosts, false).unwrap().is_empty());
        assert_eq!(
            g.neighbors(&k("zz"), 5, RelationKind::Hosts, false),
            Err(GraphError::UnknownEntity(k("zz")))
        );
        assert_eq!(
            g.neighbors(&k("s"), 6, RelationKind::ConnectsService, false),
            Err(GraphError::UnknownTimestamp(6))
        );
    }

    #[test]
    fn build_errors() {
        let s = OntologySchema::kubernetes();
        assert_eq!(build_graph::<f64>(&[], &s), Err(GraphError::NoSnapshots));
        let e = build_graph::<f64>(&doc("k:p k:cpu 2.0 .", 0), &s).unwrap_err();
        assert_eq!(e, GraphError::UnregisteredEntity(k("p")));
        let q = vec![
            Quad::new(k("p"), RDF_TYPE, Term::Iri(k("Pod")), 0),
            Quad::new(k("p"), k("cpu"), Term::Literal(Literal::text("hi")), 0),
        ];
        assert!(matches!(build_graph::<f64>(&q, &s), Err(GraphError::NonNumeric { .. })));
    }

    #[test]
    fn dangling_edges_are_reported() {
        let s = OntologySchema::kubernetes();
        let mut q = doc("k:n a k:Node . k:p a k:Pod . k:n k:hosts k:p .", 0);
        q.extend(doc("k:n k:hosts k:p .", 15));
        let g: DynamicKnowledgeGraph<f64> = build_graph(&q, &s).unwrap();
        // pod is not observed at t=15
        assert_eq!(g.warnings().dangling_edges, 1);
    }

    #[test]
    fn frozen_registry_flags_late_entities() {
        let s = OntologySchema::kubernetes();
        let train: DynamicKnowledgeGraph<f64> =
            build_graph(&doc("k:b a k:Pod . k:d a k:Pod .", 0), &s).unwrap();
        let g: DynamicKnowledgeGraph<f64> = build_graph_with_registry(
            &doc("k:a a k:Pod . k:d a k:Pod .", 15),
            &s,
            Some(train.registry()),
        )
        .unwrap();
        let r = g.registry();
        assert_eq!(r.entities(Category::Pod), &[k("b"), k("d"), k("a")]);
        assert_eq!(r.frozen_len(Category::Pod), 2);
        assert!(r.is_late(Category::Pod, 2));
    }
}

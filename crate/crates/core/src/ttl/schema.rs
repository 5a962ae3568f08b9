//! Microservice ontology: entity categories, hierarchy relations and the
//! numeric attributes recorded per category.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::term::LiteralKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Cluster,
    Node,
    Pod,
    Connection,
    Service,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Cluster,
        Category::Node,
        Category::Pod,
        Category::Connection,
        Category::Service,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Cluster => "Cluster",
            Category::Node => "Node",
            Category::Pod => "Pod",
            Category::Connection => "Connection",
            Category::Service => "Service",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SchemaError::UnknownCategory(s.to_string()))
    }
}

/// Hierarchy relations. Subject is the domain, object the range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationKind {
    /// Cluster contains Node.
    Contains,
    /// Node hosts Pod.
    Hosts,
    /// Connection originates at a Pod.
    ConnectsPod,
    /// Connection terminates at a Service.
    ConnectsService,
}

impl RelationKind {
    pub const ALL: [RelationKind; 4] = [
        RelationKind::Contains,
        RelationKind::Hosts,
        RelationKind::ConnectsPod,
        RelationKind::ConnectsService,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDef {
    pub kind: RelationKind,
    pub predicate: String,
    pub domain: Category,
    pub range: Category,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub predicate: String,
    /// Short column name used in feature headers.
    pub name: String,
    pub category: Category,
    pub kind: LiteralKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("unknown category '{0}'")]
    UnknownCategory(String),
    #[error("attribute predicate {0} declared more than once")]
    DuplicateAttribute(String),
    #[error("predicate {0} used by both a relation and an attribute")]
    PredicateClash(String),
    #[error("relation set is not a tree over categories (cycle through {0})")]
    NotATree(Category),
    #[error("attribute {0} must be numeric, integer or boolean")]
    NonNumericAttribute(String),
    #[error("relation {0:?} declared more than once")]
    DuplicateRelation(RelationKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OntologySchema {
    namespace: String,
    relations: Vec<RelationDef>,
    attributes: Vec<AttributeDef>,
}

impl OntologySchema {
    pub fn new(
        namespace: impl Into<String>,
        relations: Vec<RelationDef>,
        attributes: Vec<AttributeDef>,
    ) -> Result<Self, SchemaError> {
        let mut seen = HashSet::new();
        for a in &attributes {
            if !seen.insert(a.predicate.as_str()) {
                return Err(SchemaError::DuplicateAttribute(a.predicate.clone()));
            }
            if !a.kind.is_numeric() {
                return Err(SchemaError::NonNumericAttribute(a.predicate.clone()));
            }
        }
        let mut kinds = HashSet::new();
        for r in &relations {
            if seen.contains(r.predicate.as_str()) {
                return Err(SchemaError::PredicateClash(r.predicate.clone()));
            }
            if !kinds.insert(r.kind) {
                return Err(SchemaError::DuplicateRelation(r.kind));
            }
        }
        // union-find over categories; any edge joining an existing component is a cycle
        let mut parent: Vec<usize> = (0..Category::ALL.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for r in &relations {
            let (a, b) = (find(&mut parent, r.domain.index()), find(&mut parent, r.range.index()));
            if a == b {
                return Err(SchemaError::NotATree(r.domain));
            }
            parent[a] = b;
        }
        Ok(Self {
            namespace: namespace.into(),
            relations,
            attributes,
        })
    }

    /// The Kubernetes ontology used by the bundled generator.
    pub fn kubernetes() -> Self {
        let ns = "http://example.org/k8s#";
        let rel = |kind, local: &str, domain, range| RelationDef {
            kind,
            predicate: format!("{ns}{local}"),
            domain,
            range,
        };
        let attr = |local: &str, category, kind| AttributeDef {
            predicate: format!("{ns}{local}"),
            name: local.to_string(),
            category,
            kind,
        };
        use Category::*;
        use LiteralKind::*;
        Self::new(
            ns,
            vec![
                rel(RelationKind::Contains, "contains", Cluster, Node),
                rel(RelationKind::Hosts, "hosts", Node, Pod),
                rel(RelationKind::ConnectsPod, "fromPod", Connection, Pod),
                rel(RelationKind::ConnectsService, "toService", Connection, Service),
            ],
            vec![
                attr("nodeCount", Cluster, Integer),
                attr("cpuUtil", Node, Decimal),
                attr("memUtil", Node, Decimal),
                attr("cpu", Pod, Decimal),
                attr("memory", Pod, Decimal),
                attr("restarts", Pod, Integer),
                attr("ready", Pod, Boolean),
                attr("throughput", Connection, Decimal),
                attr("rtt", Connection, Decimal),
                attr("requestRate", Service, Decimal),
                attr("latency", Service, Decimal),
                attr("errorRate", Service, Decimal),
            ],
        )
        .expect("built-in schema is valid")
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn class_iri(&self, c: Category) -> String {
        format!("{}{}", self.namespace, c.name())
    }

    pub fn category_of_class(&self, iri: &str) -> Option<Category> {
        let local = iri.strip_prefix(&self.namespace)?;
        Category::ALL.into_iter().find(|c| c.name() == local)
    }

    pub fn relations(&self) -> &[RelationDef] {
        &self.relations
    }

    pub fn relation(&self, kind: RelationKind) -> Option<&RelationDef> {
        self.relations.iter().find(|r| r.kind == kind)
    }

    pub fn relation_by_predicate(&self, predicate: &str) -> Option<&RelationDef> {
        self.relations.iter().find(|r| r.predicate == predicate)
    }

    pub fn attributes(&self) -> &[AttributeDef] {
        &self.attributes
    }

    /// Attributes of one category in declaration order; this order defines
    /// the attribute axis of the category tensor.
    pub fn attributes_of(&self, c: Category) -> Vec<&AttributeDef> {
        self.attributes.iter().filter(|a| a.category == c).collect()
    }

    pub fn attribute_by_predicate(&self, predicate: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.predicate == predicate)
    }

    /// Column index of each attribute predicate within its category.
    pub fn attribute_slots(&self) -> HashMap<&str, (Category, usize)> {
        let mut counters = [0usize; 5];
        let mut out = HashMap::new();
        for a in &self.attributes {
            let slot = counters[a.category.index()];
            counters[a.category.index()] += 1;
            out.insert(a.predicate.as_str(), (a.category, slot));
        }
        out
    }

    /// Leaf-to-root aggregation path for a target category: a list of
    /// hops `(relation, target_is_subject, reached category)`.
    ///
    /// Service walks Connection -> Pod -> Node; every other category walks
    /// up the containment tree towards the Cluster. Cluster has no path.
    pub fn aggregation_path(&self, target: Category) -> Result<Vec<Hop>, SchemaError> {
        use Category::*;
        let chain: &[(RelationKind, bool)] = match target {
            Service => &[
                (RelationKind::ConnectsService, false),
                (RelationKind::ConnectsPod, true),
                (RelationKind::Hosts, false),
            ],
            Connection => &[(RelationKind::ConnectsPod, true), (RelationKind::Hosts, false)],
            Pod => &[(RelationKind::Hosts, false), (RelationKind::Contains, false)],
            Node => &[(RelationKind::Contains, false)],
            Cluster => return Err(SchemaError::UnknownCategory("Cluster has no aggregation path".into())),
        };
        let mut hops = Vec::new();
        for &(kind, outgoing) in chain {
            let def = self
                .relation(kind)
                .ok_or_else(|| SchemaError::UnknownCategory(format!("{kind:?}")))?;
            hops.push(Hop {
                relation: kind,
                outgoing,
                reaches: if outgoing { def.range } else { def.domain },
            });
        }
        Ok(hops)
    }
}

/// One step of an aggregation path. `outgoing` follows subject -> object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hop {
    pub relation: RelationKind,
    pub outgoing: bool,
    pub reaches: Category,
}

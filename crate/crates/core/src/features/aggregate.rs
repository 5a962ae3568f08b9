//! Structural features: leaf-to-root neighbor aggregation (one hop per
//! hierarchy level) and the same-category concatenation used for the
//! two-hop representation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::graph::DynamicKnowledgeGraph;
use crate::scalar::Scalar;
use crate::ttl::{Category, Hop, OntologySchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Mean,
    Sum,
    Max,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Mean => "mean",
            Aggregation::Sum => "sum",
            Aggregation::Max => "max",
        })
    }
}

impl FromStr for Aggregation {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "sum" => Ok(Aggregation::Sum),
            "max" => Ok(Aggregation::Max),
            _ => Err(FeatureError::Config(format!("unknown aggregation '{s}'"))),
        }
    }
}

/// Width of the one-hop block: per level, the aggregated attributes then
/// the neighbor count.
pub fn one_hop_width(schema: &OntologySchema, target: Category) -> Result<usize, FeatureError> {
    Ok(schema
        .aggregation_path(target)?
        .iter()
        .map(|h| schema.attributes_of(h.reaches).len() + 1)
        .sum())
}

pub(crate) fn one_hop_names(
    schema: &OntologySchema,
    target: Category,
    agg: Aggregation,
) -> Result<Vec<String>, FeatureError> {
    let mut names = Vec::new();
    for hop in schema.aggregation_path(target)? {
        let level = hop.reaches.name().to_lowercase();
        for a in schema.attributes_of(hop.reaches) {
            names.push(format!("{level}.{agg}.{}", a.name));
        }
        names.push(format!("{level}.count"));
    }
    Ok(names)
}

/// Aggregates, for every entity of `target` at snapshot index `t`, the
/// attributes of each level reached along the schema's aggregation path.
/// Each level's set is the union over the previous level's members
/// (deduplicated). Empty sets aggregate to zeros with count 0.
pub fn one_hop_aggregate<T: Scalar>(
    graph: &DynamicKnowledgeGraph<T>,
    target: Category,
    t: usize,
    agg: Aggregation,
) -> Result<Vec<Vec<T>>, FeatureError> {
    let path = graph.schema().aggregation_path(target)?;
    let width = one_hop_width(graph.schema(), target)?;
    let n = graph.registry().len(target);
    let mut out = Vec::with_capacity(n);
    let mut frontier = Vec::new();
    let mut next = Vec::new();
    for e in 0..n {
        let mut row = Vec::with_capacity(width);
        frontier.clear();
        frontier.push(e);
        for hop in &path {
            expand(graph, hop, t, &frontier, &mut next);
            aggregate_level(graph, hop.reaches, t, &next, agg, &mut row);
            std::mem::swap(&mut frontier, &mut next);
        }
        out.push(row);
    }
    Ok(out)
}

fn expand<T: Scalar>(
    graph: &DynamicKnowledgeGraph<T>,
    hop: &Hop,
    t: usize,
    frontier: &[usize],
    next: &mut Vec<usize>,
) {
    next.clear();
    for &e in frontier {
        next.extend(graph.hierarchy().neighbors(t, hop.relation, hop.outgoing, e));
    }
    next.sort_unstable();
    next.dedup();
}

fn aggregate_level<T: Scalar>(
    graph: &DynamicKnowledgeGraph<T>,
    category: Category,
    t: usize,
    members: &[usize],
    agg: Aggregation,
    row: &mut Vec<T>,
) {
    let tensor = graph.tensor(category);
    let d = tensor.n_attrs();
    let start = row.len();
    row.resize(start + d, T::zero());
    if !members.is_empty() {
        let acc = &mut row[start..start + d];
        if agg == Aggregation::Max {
            acc.iter_mut().for_each(|v| *v = T::neg_infinity());
        }
        for &m in members {
            for (a, &v) in acc.iter_mut().zip(tensor.row(m, t)) {
                match agg {
                    Aggregation::Mean | Aggregation::Sum => *a += v,
                    Aggregation::Max => *a = a.max(v),
                }
            }
        }
        if agg == Aggregation::Mean {
            let n = T::count(members.len());
            acc.iter_mut().for_each(|v| *v /= n);
        }
    }
    row.push(T::count(members.len()));
}

/// Instantaneous structural vector of every target entity at `t`: its own
/// attributes followed by its one-hop block.
pub(crate) fn entity_channels<T: Scalar>(
    graph: &DynamicKnowledgeGraph<T>,
    target: Category,
    t: usize,
    agg: Aggregation,
) -> Result<Vec<Vec<T>>, FeatureError> {
    let hop = one_hop_aggregate(graph, target, t, agg)?;
    let own = graph.tensor(target);
    Ok(hop
        .into_iter()
        .enumerate()
        .map(|(e, h)| {
            let mut v = own.row(e, t).to_vec();
            v.extend(h);
            v
        })
        .collect())
}

/// Per-entity block width inside [`two_hop_concat`] (without the presence flag).
pub fn two_hop_block_width(schema: &OntologySchema, target: Category) -> Result<usize, FeatureError> {
    Ok(schema.attributes_of(target).len() + one_hop_width(schema, target)?)
}

/// Concatenates the structural vectors of every frozen entity of `target`
/// in registry order, each followed by a presence flag. Absent entities
/// contribute a zero block with flag 0, so the width is constant over time.
pub fn two_hop_concat<T: Scalar>(
    graph: &DynamicKnowledgeGraph<T>,
    target: Category,
    t: usize,
    agg: Aggregation,
) -> Result<Vec<T>, FeatureError> {
    let n = graph.registry().frozen_len(target);
    if n == 0 {
        return Err(FeatureError::EmptyCategory(target));
    }
    let w = two_hop_block_width(graph.schema(), target)?;
    let channels = entity_channels(graph, target, t, agg)?;
    let tensor = graph.tensor(target);
    let mut out = Vec::with_capacity(n * (w + 1));
    for (e, ch) in channels.iter().enumerate().take(n) {
        if tensor.is_present(e, t) {
            out.extend_from_slice(ch);
            out.push(T::one());
        } else {
            out.extend(std::iter::repeat_n(T::zero(), w + 1));
        }
    }
    Ok(out)
}

pub(crate) fn two_hop_names<T: Scalar>(
    graph: &DynamicKnowledgeGraph<T>,
    target: Category,
    agg: Aggregation,
) -> Result<Vec<String>, FeatureError> {
    let schema = graph.schema();
    let mut inner: Vec<String> = schema
        .attributes_of(target)
        .iter()
        .map(|a| a.name.clone())
        .collect();
    inner.extend(one_hop_names(schema, target, agg)?);
    inner.push("present".into());
    let reg = graph.registry();
    let mut names = Vec::new();
    for iri in &reg.entities(target)[..reg.frozen_len(target)] {
        let local = iri.rsplit(['#', '/']).next().unwrap_or(iri);
        names.extend(inner.iter().map(|n| format!("{local}.{n}")));
    }
    Ok(names)
}

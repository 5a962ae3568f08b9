//! Binary cache of a built graph, so repeated runs skip TTL parsing.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "DKGC"
//! version      u32      currently 1
//! schema       str      JSON-encoded ontology schema
//! n_times      u64, then n_times x i64 timestamps
//! 5 categories, in Cluster/Node/Pod/Connection/Service order:
//!   n_entities u64, frozen u64, n_entities x str IRIs
//!   n_attrs    u64, n_entities*n_times*n_attrs x f64 values (entity-major)
//!   n_entities*n_times x u8 presence flags
//! n_times x 4 relations (Contains/Hosts/ConnectsPod/ConnectsService):
//!   n_edges u64, n_edges x (u32 subject, u32 object)
//! dangling_edges u64, skipped_quads u64
//! ```
//!
//! A `str` is a u64 byte length followed by UTF-8 bytes.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use super::{BuildWarnings, CategoryTensor, DynamicKnowledgeGraph, EntityRegistry, HierarchyIndex};
use crate::scalar::Scalar;
use crate::ttl::{Category, OntologySchema, RelationKind};

pub const CACHE_MAGIC: &[u8; 4] = b"DKGC";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("graph cache i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a graph cache (bad magic)")]
    BadMagic,
    #[error("unsupported graph cache version {0}")]
    Version(u32),
    #[error("corrupt graph cache: {0}")]
    Corrupt(String),
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_u64::<LE>(s.len() as u64)?;
    w.write_all(s.as_bytes())
}

fn read_len<R: Read>(r: &mut R, what: &str) -> Result<usize, CacheError> {
    let n = r.read_u64::<LE>()?;
    usize::try_from(n)
        .ok()
        .filter(|&n| n < (1 << 40))
        .ok_or_else(|| CacheError::Corrupt(format!("implausible {what} length {n}")))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, CacheError> {
    let n = read_len(r, "string")?;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CacheError::Corrupt(e.to_string()))
}

pub fn write_cache<T: Scalar, W: Write>(
    graph: &DynamicKnowledgeGraph<T>,
    mut w: W,
) -> Result<(), CacheError> {
    w.write_all(CACHE_MAGIC)?;
    w.write_u32::<LE>(CACHE_VERSION)?;
    let schema = serde_json::to_string(graph.schema()).map_err(|e| CacheError::Corrupt(e.to_string()))?;
    write_str(&mut w, &schema)?;
    w.write_u64::<LE>(graph.timestamps().len() as u64)?;
    for &t in graph.timestamps() {
        w.write_i64::<LE>(t)?;
    }
    let reg = graph.registry();
    for c in Category::ALL {
        w.write_u64::<LE>(reg.len(c) as u64)?;
        w.write_u64::<LE>(reg.frozen_len(c) as u64)?;
        for iri in reg.entities(c) {
            write_str(&mut w, iri)?;
        }
        let tensor = graph.tensor(c);
        w.write_u64::<LE>(tensor.n_attrs() as u64)?;
        let (values, presence) = tensor.raw();
        for v in values {
            w.write_f64::<LE>(v.as_f64())?;
        }
        for &p in presence {
            w.write_u8(p as u8)?;
        }
    }
    let h = graph.hierarchy();
    for t in 0..h.n_times() {
        for kind in RelationKind::ALL {
            let edges = h.edges(t, kind).by_subject();
            w.write_u64::<LE>(edges.len() as u64)?;
            for &(s, o) in edges {
                w.write_u32::<LE>(s)?;
                w.write_u32::<LE>(o)?;
            }
        }
    }
    w.write_u64::<LE>(graph.warnings().dangling_edges as u64)?;
    w.write_u64::<LE>(graph.warnings().skipped_quads as u64)?;
    w.flush()?;
    Ok(())
}

pub fn read_cache<T: Scalar, R: Read>(mut r: R) -> Result<DynamicKnowledgeGraph<T>, CacheError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(CacheError::BadMagic);
    }
    let version = r.read_u32::<LE>()?;
    if version != CACHE_VERSION {
        return Err(CacheError::Version(version));
    }
    let schema: OntologySchema =
        serde_json::from_str(&read_str(&mut r)?).map_err(|e| CacheError::Corrupt(e.to_string()))?;
    let n_t = read_len(&mut r, "timestamp")?;
    let timestamps = (0..n_t)
        .map(|_| r.read_i64::<LE>())
        .collect::<io::Result<Vec<_>>>()?;
    let mut lists: [Vec<String>; 5] = Default::default();
    let mut frozen = [0usize; 5];
    let mut tensors = Vec::with_capacity(5);
    for c in Category::ALL {
        let n = read_len(&mut r, "entity")?;
        frozen[c.index()] = read_len(&mut r, "frozen")?;
        lists[c.index()] = (0..n).map(|_| read_str(&mut r)).collect::<Result<_, _>>()?;
        let d = read_len(&mut r, "attribute")?;
        if d != schema.attributes_of(c).len() {
            return Err(CacheError::Corrupt(format!("{c} attribute count {d} disagrees with schema")));
        }
        let values = (0..n * n_t * d)
            .map(|_| r.read_f64::<LE>().map(T::lit))
            .collect::<io::Result<Vec<T>>>()?;
        let presence = (0..n * n_t)
            .map(|_| r.read_u8().map(|b| b != 0))
            .collect::<io::Result<Vec<bool>>>()?;
        tensors.push(CategoryTensor::from_parts(c, (n, n_t, d), values, presence));
    }
    let registry = EntityRegistry::from_lists(lists, frozen);
    let mut hierarchy = HierarchyIndex::new(n_t);
    for t in 0..n_t {
        for kind in RelationKind::ALL {
            let m = read_len(&mut r, "edge")?;
            for _ in 0..m {
                let s = r.read_u32::<LE>()? as usize;
                let o = r.read_u32::<LE>()? as usize;
                hierarchy.push(t, kind, s, o);
            }
        }
    }
    hierarchy.finish();
    let warnings = BuildWarnings {
        dangling_edges: read_len(&mut r, "warning")?,
        skipped_quads: read_len(&mut r, "warning")?,
    };
    Ok(DynamicKnowledgeGraph::from_parts(
        schema, timestamps, registry, tensors, hierarchy, warnings,
    ))
}

use crate::ttl::RelationKind;

/// Edges of one relation at one snapshot, kept sorted both ways for
/// binary-searched neighbor lookups. Pairs are `(subject, object)` indices
/// into the registry lists of the relation's domain and range.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationEdges {
    by_subject: Vec<(u32, u32)>,
    by_object: Vec<(u32, u32)>,
}

impl RelationEdges {
    pub fn by_subject(&self) -> &[(u32, u32)] {
        &self.by_subject
    }

    pub fn len(&self) -> usize {
        self.by_subject.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_subject.is_empty()
    }

    fn range(v: &[(u32, u32)], key: u32) -> &[(u32, u32)] {
        let lo = v.partition_point(|p| p.0 < key);
        let hi = v.partition_point(|p| p.0 <= key);
        &v[lo..hi]
    }
}

/// Per-snapshot adjacency for every hierarchy relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchyIndex {
    edges: Vec<[RelationEdges; 4]>,
}

impl HierarchyIndex {
    pub(crate) fn new(n_times: usize) -> Self {
        Self {
            edges: vec![Default::default(); n_times],
        }
    }

    pub(crate) fn push(&mut self, t: usize, kind: RelationKind, subject: usize, object: usize) {
        self.edges[t][kind.index()]
            .by_subject
            .push((subject as u32, object as u32));
    }

    pub(crate) fn finish(&mut self) {
        for per_t in &mut self.edges {
            for rel in per_t.iter_mut() {
                rel.by_subject.sort_unstable();
                rel.by_subject.dedup();
                rel.by_object = rel.by_subject.iter().map(|&(s, o)| (o, s)).collect();
                rel.by_object.sort_unstable();
            }
        }
    }

    pub fn n_times(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self, t: usize, kind: RelationKind) -> &RelationEdges {
        &self.edges[t][kind.index()]
    }

    /// Neighbor indices of entity `e` at snapshot index `t`.
    pub fn neighbors(
        &self,
        t: usize,
        kind: RelationKind,
        outgoing: bool,
        e: usize,
    ) -> impl Iterator<Item = usize> + '_ {
        let rel = &self.edges[t][kind.index()];
        let v = if outgoing { &rel.by_subject } else { &rel.by_object };
        RelationEdges::range(v, e as u32).iter().map(|p| p.1 as usize)
    }
}

use std::collections::{BTreeSet, HashMap};

use crate::ttl::Category;

/// Per-category entity lists. Entities present at build time are sorted
/// lexicographically and frozen; later additions are appended and flagged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityRegistry {
    lists: [Vec<String>; 5],
    frozen: [usize; 5],
    index: HashMap<String, (Category, usize)>,
}

impl EntityRegistry {
    /// The first category seen for an IRI wins; schema validation is
    /// responsible for reporting conflicting type assertions.
    pub fn build<'a>(typed: impl IntoIterator<Item = (&'a str, Category)>) -> Self {
        let mut seen: HashMap<&str, Category> = HashMap::new();
        let mut sets: [BTreeSet<&str>; 5] = Default::default();
        for (iri, c) in typed {
            if let std::collections::hash_map::Entry::Vacant(v) = seen.entry(iri) {
                v.insert(c);
                sets[c.index()].insert(iri);
            }
        }
        let lists: [Vec<String>; 5] =
            std::array::from_fn(|i| sets[i].iter().map(|s| s.to_string()).collect());
        Self::from_lists(lists.clone(), std::array::from_fn(|i| lists[i].len()))
    }

    pub(crate) fn from_lists(lists: [Vec<String>; 5], frozen: [usize; 5]) -> Self {
        let mut index = HashMap::new();
        for c in Category::ALL {
            for (i, iri) in lists[c.index()].iter().enumerate() {
                index.insert(iri.clone(), (c, i));
            }
        }
        Self {
            lists,
            frozen,
            index,
        }
    }

    /// Copy of this registry with unseen entities appended (sorted among
    /// themselves) after the frozen block.
    pub fn extended<'a>(&self, typed: impl IntoIterator<Item = (&'a str, Category)>) -> Self {
        let mut fresh: [BTreeSet<&str>; 5] = Default::default();
        let mut seen: HashMap<&str, ()> = HashMap::new();
        for (iri, c) in typed {
            if !self.index.contains_key(iri) && seen.insert(iri, ()).is_none() {
                fresh[c.index()].insert(iri);
            }
        }
        let mut lists = self.lists.clone();
        for c in Category::ALL {
            lists[c.index()].extend(fresh[c.index()].iter().map(|s| s.to_string()));
        }
        Self::from_lists(lists, self.frozen)
    }

    pub fn len(&self, c: Category) -> usize {
        self.lists[c.index()].len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn total(&self) -> usize {
        self.index.len()
    }

    pub fn entities(&self, c: Category) -> &[String] {
        &self.lists[c.index()]
    }

    pub fn iri(&self, c: Category, i: usize) -> &str {
        &self.lists[c.index()][i]
    }

    pub fn lookup(&self, iri: &str) -> Option<(Category, usize)> {
        self.index.get(iri).copied()
    }

    /// Number of entities fixed when the registry was first built.
    pub fn frozen_len(&self, c: Category) -> usize {
        self.frozen[c.index()]
    }

    pub fn is_late(&self, c: Category, i: usize) -> bool {
        i >= self.frozen[c.index()]
    }
}

use crate::scalar::Scalar;
use crate::ttl::Category;

/// Attribute values of one category, laid out entity-major so that the
/// `T x d` series of a single entity is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryTensor<T> {
    category: Category,
    n_entities: usize,
    n_times: usize,
    n_attrs: usize,
    values: Vec<T>,
    presence: Vec<bool>,
}

impl<T: Scalar> CategoryTensor<T> {
    pub fn zeros(category: Category, n_entities: usize, n_times: usize, n_attrs: usize) -> Self {
        Self {
            category,
            n_entities,
            n_times,
            n_attrs,
            values: vec![T::zero(); n_entities * n_times * n_attrs],
            presence: vec![false; n_entities * n_times],
        }
    }

    pub(crate) fn from_parts(
        category: Category,
        (n_entities, n_times, n_attrs): (usize, usize, usize),
        values: Vec<T>,
        presence: Vec<bool>,
    ) -> Self {
        assert_eq!(values.len(), n_entities * n_times * n_attrs);
        assert_eq!(presence.len(), n_entities * n_times);
        Self {
            category,
            n_entities,
            n_times,
            n_attrs,
            values,
            presence,
        }
    }

    pub fn category(&self) -> Category {
        self.category
    }

    /// `(N_k, T, d_k)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_entities, self.n_times, self.n_attrs)
    }

    pub fn n_attrs(&self) -> usize {
        self.n_attrs
    }

    #[inline]
    pub fn value(&self, e: usize, t: usize, a: usize) -> T {
        self.values[(e * self.n_times + t) * self.n_attrs + a]
    }

    #[inline]
    pub fn set(&mut self, e: usize, t: usize, a: usize, v: T) {
        self.values[(e * self.n_times + t) * self.n_attrs + a] = v;
    }

    /// Attribute vector of entity `e` at snapshot index `t`.
    #[inline]
    pub fn row(&self, e: usize, t: usize) -> &[T] {
        let start = (e * self.n_times + t) * self.n_attrs;
        &self.values[start..start + self.n_attrs]
    }

    /// Row-major `T x d` series of entity `e`.
    pub fn series(&self, e: usize) -> &[T] {
        let n = self.n_times * self.n_attrs;
        &self.values[e * n..(e + 1) * n]
    }

    #[inline]
    pub fn is_present(&self, e: usize, t: usize) -> bool {
        self.presence[e * self.n_times + t]
    }

    pub(crate) fn set_present(&mut self, e: usize, t: usize) {
        self.presence[e * self.n_times + t] = true;
    }

    pub fn presence_series(&self, e: usize) -> Vec<bool> {
        self.presence[e * self.n_times..(e + 1) * self.n_times].to_vec()
    }

    pub(crate) fn raw(&self) -> (&[T], &[bool]) {
        (&self.values, &self.presence)
    }
}

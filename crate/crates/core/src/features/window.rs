use crate::scalar::Scalar;

/// Concatenates the `tau` most recent attribute vectors of a row-major
/// `T x d` series ending at snapshot index `t` (0-based). Indices before the
/// start of the series are zero-padded on the left.
pub fn window_concat<T: Scalar>(series: &[T], d: usize, tau: usize, t: usize) -> Vec<T> {
    let mut out = vec![T::zero(); tau * d];
    window_into(series, d, tau, t, &mut out);
    out
}

pub(crate) fn window_into<T: Scalar>(series: &[T], d: usize, tau: usize, t: usize, out: &mut [T]) {
    debug_assert!(d == 0 || t < series.len() / d);
    debug_assert_eq!(out.len(), tau * d);
    for k in 0..tau {
        // slot k holds x(t - tau + 1 + k)
        let dst = &mut out[k * d..(k + 1) * d];
        match (t + 1 + k).checked_sub(tau) {
            Some(src) => dst.copy_from_slice(&series[src * d..(src + 1) * d]),
            None => dst.iter_mut().for_each(|v| *v = T::zero()),
        }
    }
}

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Trend and stability summaries of one scalar channel over a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatFeatures<T> {
    pub difference: T,
    pub variance: T,
    pub rolling_mean: T,
    pub rolling_sum: T,
}

/// Which summaries are emitted per channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatFlags {
    pub difference: bool,
    pub variance: bool,
    pub rolling_mean: bool,
    pub rolling_sum: bool,
}

impl StatFlags {
    pub const ALL: StatFlags = StatFlags {
        difference: true,
        variance: true,
        rolling_mean: true,
        rolling_sum: true,
    };
    pub const NONE: StatFlags = StatFlags {
        difference: false,
        variance: false,
        rolling_mean: false,
        rolling_sum: false,
    };

    pub fn count(self) -> usize {
        [self.difference, self.variance, self.rolling_mean, self.rolling_sum]
            .iter()
            .filter(|&&b| b)
            .count()
    }

    pub(crate) fn names(self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.difference {
            v.push("diff");
        }
        if self.variance {
            v.push("var");
        }
        if self.rolling_mean {
            v.push("mean");
        }
        if self.rolling_sum {
            v.push("sum");
        }
        v
    }
}

impl Default for StatFlags {
    fn default() -> Self {
        Self::ALL
    }
}

/// Statistics of `z` at index `t` (0-based) over the window of length
/// `tau` ending at `t`. Windows truncated by the series start use the
/// available prefix; the difference at `t = 0` is zero. Variance is the
/// population form.
pub fn stat_features<T: Scalar>(z: &[T], tau: usize, t: usize) -> StatFeatures<T> {
    assert!(tau >= 1 && t < z.len());
    let start = (t + 1).saturating_sub(tau);
    let window = &z[start..=t];
    let m = T::count(window.len());
    let sum: T = window.iter().copied().sum();
    let mean = sum / m;
    let variance = window
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<T>()
        / m;
    let difference = if t == 0 { T::zero() } else { z[t] - z[t - 1] };
    StatFeatures {
        difference,
        variance,
        rolling_mean: mean,
        rolling_sum: sum,
    }
}

/// Writes the enabled statistics of every channel of a row-major `T x d`
/// series at index `t`, channel-major: `[c0 stats..., c1 stats..., ...]`.
pub(crate) fn stat_block_into<T: Scalar>(
    series: &[T],
    d: usize,
    tau: usize,
    t: usize,
    flags: StatFlags,
    scratch: &mut Vec<T>,
    out: &mut [T],
) {
    let start = (t + 1).saturating_sub(tau);
    let per = flags.count();
    for c in 0..d {
        scratch.clear();
        scratch.extend((start..=t).map(|i| series[i * d + c]));
        let s = stat_features(scratch, tau, scratch.len() - 1);
        let difference = if t == 0 {
            T::zero()
        } else {
            series[t * d + c] - series[(t - 1) * d + c]
        };
        let mut j = c * per;
        for (on, v) in [
            (flags.difference, difference),
            (flags.variance, s.variance),
            (flags.rolling_mean, s.rolling_mean),
            (flags.rolling_sum, s.rolling_sum),
        ] {
            if on {
                out[j] = v;
                j += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series() {
        let z = [4.0; 10];
        for tau in 1..=5 {
            let s = stat_features(&z, tau, 9);
            assert_eq!(s.difference, 0.0);
            assert_eq!(s.variance, 0.0);
            assert_eq!(s.rolling_mean, 4.0);
            assert_eq!(s.rolling_sum, 4.0 * tau as f64);
        }
    }

    #[test]
    fn two_point_window() {
        let s = stat_features(&[1.0, 2.0, 3.0], 2, 2);
        assert_eq!(s.difference, 1.0);
        assert_eq!(s.rolling_mean, 2.5);
        assert_eq!(s.rolling_sum, 5.0);
        assert_eq!(s.variance, 0.25);
    }

    #[test]
    fn truncated_prefix_at_start() {
        let s = stat_features(&[2.0, 6.0, 1.0], 3, 1);
        assert_eq!(s.rolling_sum, 8.0);
        assert_eq!(s.rolling_mean, 4.0);
        assert_eq!(s.variance, 4.0);
        assert_eq!(stat_features(&[2.0, 6.0], 3, 0).difference, 0.0);
    }

    #[test]
    fn block_layout_is_channel_major() {
        // two channels: c0 = 1,2,3 ; c1 = 10,10,10
        let series = [1.0, 10.0, 2.0, 10.0, 3.0, 10.0];
        let mut out = vec![0.0; 8];
        stat_block_into(&series, 2, 2, 2, StatFlags::ALL, &mut Vec::new(), &mut out);
        assert_eq!(out, vec![1.0, 0.25, 2.5, 5.0, 0.0, 0.0, 10.0, 20.0]);
    }
}

//! Bisection on monotone predicates and functions.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BisectConfig {
    /// Stop once the bracket is narrower than `rel_eps` times its smaller end.
    pub rel_eps: f64,
    pub max_iter: usize,
}

impl Default for BisectConfig {
    fn default() -> Self {
        Self {
            rel_eps: 1e-6,
            max_iter: 200,
        }
    }
}

impl BisectConfig {
    fn done(&self, lo: f64, hi: f64) -> bool {
        let width = (hi - lo).abs();
        width <= self.rel_eps * lo.abs().min(hi.abs()) || width == 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BisectStatus {
    /// The bracket shrank below tolerance around a sign change.
    Converged,
    /// The iteration budget ran out first.
    MaxIter,
    /// `lo == hi`.
    ZeroWidth,
    /// The predicate holds on the whole interval; the far end is returned.
    AllTrue,
    /// The predicate fails already at `lo`; `lo` is returned.
    AllFalse,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BisectResult {
    /// Last point known to satisfy the predicate (or the boundary).
    pub x: f64,
    /// First point known to violate it, when one exists.
    pub x_fail: Option<f64>,
    pub iterations: usize,
    pub status: BisectStatus,
}

impl BisectResult {
    pub fn is_bracketed(&self) -> bool {
        matches!(self.status, BisectStatus::Converged | BisectStatus::MaxIter)
    }
}

/// Finds the boundary of a predicate that holds at `from` and at most once
/// switches to false on the way to `to`. Works in either direction.
///
/// Returns the last point where the predicate is known to hold.
pub fn bisect_predicate(
    pred: impl Fn(f64) -> bool,
    from: f64,
    to: f64,
    cfg: BisectConfig,
) -> BisectResult {
    if from == to {
        return BisectResult {
            x: from,
            x_fail: None,
            iterations: 0,
            status: BisectStatus::ZeroWidth,
        };
    }
    if !pred(from) {
        return BisectResult {
            x: from,
            x_fail: Some(from),
            iterations: 0,
            status: BisectStatus::AllFalse,
        };
    }
    if pred(to) {
        return BisectResult {
            x: to,
            x_fail: None,
            iterations: 0,
            status: BisectStatus::AllTrue,
        };
    }
    let (mut good, mut bad) = (from, to);
    for it in 1..=cfg.max_iter {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            return BisectResult {
                x: good,
                x_fail: Some(bad),
                iterations: it,
                status: BisectStatus::Converged,
            };
        }
        if pred(mid) {
            good = mid;
        } else {
            bad = mid;
        }
        if cfg.done(good, bad) {
            return BisectResult {
                x: good,
                x_fail: Some(bad),
                iterations: it,
                status: BisectStatus::Converged,
            };
        }
    }
    BisectResult {
        x: good,
        x_fail: Some(bad),
        iterations: cfg.max_iter,
        status: BisectStatus::MaxIter,
    }
}

/// Root of a monotone function on `[lo, hi]`.
///
/// When `f` does not change sign, the endpoint with the smaller |f| is
/// returned with status [`BisectStatus::AllTrue`] or [`BisectStatus::AllFalse`].
pub fn bisect_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cfg: BisectConfig) -> BisectResult {
    if lo == hi {
        return BisectResult {
            x: lo,
            x_fail: None,
            iterations: 0,
            status: BisectStatus::ZeroWidth,
        };
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return BisectResult {
            x: lo,
            x_fail: None,
            iterations: 0,
            status: BisectStatus::Converged,
        };
    }
    if f_lo.signum() == f_hi.signum() {
        let (x, status) = if f_lo.abs() <= f_hi.abs() {
            (lo, BisectStatus::AllFalse)
        } else {
            (hi, BisectStatus::AllTrue)
        };
        return BisectResult {
            x,
            x_fail: None,
            iterations: 0,
            status,
        };
    }
    let sign_lo = f_lo.signum();
    let mut r = bisect_predicate(|x| f(x).signum() == sign_lo, lo, hi, cfg);
    if let Some(fail) = r.x_fail {
        r.x = 0.5 * (r.x + fail);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_root() {
        let cfg = BisectConfig {
            rel_eps: 1e-9,
            max_iter: 200,
        };
        let r = bisect_root(|x| x - 3.0, 0.0, 10.0, cfg);
        assert!((r.x - 3.0).abs() < 1e-8, "{r:?}");
        assert_eq!(r.status, BisectStatus::Converged);
    }

    #[test]
    fn step_edge_within_eps() {
        let cfg = BisectConfig {
            rel_eps: 1e-10,
            max_iter: 200,
        };
        let r = bisect_predicate(|x| (x * 10.0).floor() < 43.0, 0.0, 10.0, cfg);
        assert!(r.x < 4.3 && r.x_fail.unwrap() >= 4.3 - 1e-9);
        assert!(r.x_fail.unwrap() - r.x < 1e-9);
        let down = bisect_predicate(|x| x >= 2.5, 10.0, 0.0, cfg);
        assert!((down.x - 2.5).abs() < 1e-9 && down.x >= 2.5);
    }

    #[test]
    fn degenerate_brackets() {
        let cfg = BisectConfig::default();
        assert_eq!(bisect_root(|x| x, 2.0, 2.0, cfg).status, BisectStatus::ZeroWidth);
        assert_eq!(bisect_predicate(|_| true, 0.0, 1.0, cfg).status, BisectStatus::AllTrue);
        let r = bisect_predicate(|_| false, 0.0, 1.0, cfg);
        assert_eq!((r.status, r.x), (BisectStatus::AllFalse, 0.0));
        let r = bisect_root(|x| x + 1.0, 0.0, 1.0, cfg);
        assert_eq!((r.status, r.x), (BisectStatus::AllFalse, 0.0));
    }
}

//! Bracketing and bisection for monotone predicates.
//!
//! Both solvers in the crate (the time increment and the implicit regret
//! bound) look for the smallest argument at which a monotone predicate
//! becomes true, so the routines here work on predicates rather than signs.

/// Grows `hi` geometrically (doubling its distance from `lo`) until
/// `pred(hi)` holds. Returns the last failing point and the first passing one.
pub(crate) fn expand_upper<F>(
    mut pred: F,
    lo: f64,
    start: f64,
    max_doublings: usize,
) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> bool,
{
    let mut lo = lo;
    let mut width = start;
    for _ in 0..=max_doublings {
        let hi = lo + width;
        if !hi.is_finite() {
            return None;
        }
        if pred(hi) {
            return Some((lo, hi));
        }
        lo = hi;
        width *= 2.0;
    }
    None
}

/// Mirror of [`expand_upper`] that walks downwards; returns `(lo, hi)` with
/// `pred(lo)` false and `pred(hi)` true.
pub(crate) fn expand_lower<F>(
    mut pred: F,
    hi: f64,
    start: f64,
    max_doublings: usize,
) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> bool,
{
    let mut hi = hi;
    let mut width = start;
    for _ in 0..=max_doublings {
        let lo = hi - width;
        if !lo.is_finite() {
            return None;
        }
        if !pred(lo) {
            return Some((lo, hi));
        }
        hi = lo;
        width *= 2.0;
    }
    None
}

/// Bisection on `[lo, hi]` where `pred(lo)` is false and `pred(hi)` is true.
///
/// Stops when the bracket is narrower than `width_tol`, when the midpoint is
/// no longer representable strictly inside the bracket, or after `max_iter`
/// halvings. The returned bracket keeps the invariant.
pub(crate) fn bisect<F>(
    mut pred: F,
    mut lo: f64,
    mut hi: f64,
    width_tol: f64,
    max_iter: usize,
) -> (f64, f64)
where
    F: FnMut(f64) -> bool,
{
    for _ in 0..max_iter {
        if hi - lo <= width_tol {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

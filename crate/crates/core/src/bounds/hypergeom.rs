//! Hypergeometric probabilities and exact tail inversion.
//!
//! Counting `k` successes in a size-`s` sample drawn without replacement
//! from a size-`n` population holding `m` successes. Probabilities are
//! evaluated in log space with log-gamma and summed with a streaming
//! log-sum-exp, so they stay finite for populations in the millions.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Tails within this relative distance below `delta` are accepted by the
/// inversions. Accepting more candidates only widens the interval.
const TAIL_REL_TOL: f64 = 1e-12;

fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn check(m: u64, n: u64, s: u64, k: u64) -> Result<()> {
    if m > n || s > n || k > s {
        return Err(Error::InvalidHypergeomParams { m, n, s, k });
    }
    Ok(())
}

/// Support of the count: `max(0, s - (n - m)) ..= min(m, s)`.
fn support(m: u64, n: u64, s: u64) -> (u64, u64) {
    (s.saturating_sub(n - m), m.min(s))
}

/// Log pmf, `-inf` outside the support. Parameters must already be checked.
fn ln_pmf_unchecked(m: u64, n: u64, s: u64, k: u64) -> f64 {
    let (lo, hi) = support(m, n, s);
    if k < lo || k > hi {
        return f64::NEG_INFINITY;
    }
    ln_choose(m, k) + ln_choose(n - m, s - k) - ln_choose(n, s)
}

/// Online log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl LogSumExp {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.scaled += (x - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            0.0
        } else {
            (self.max + self.scaled.ln()).exp()
        }
    }
}

/// `P(K = k) = C(m, k) C(n - m, s - k) / C(n, s)`; zero when impossible.
pub fn hypergeom_pmf(m: u64, n: u64, s: u64, k: u64) -> Result<f64> {
    check(m, n, s, k)?;
    Ok(ln_pmf_unchecked(m, n, s, k).exp())
}

fn tail_sum(m: u64, n: u64, s: u64, from: u64, to: u64) -> f64 {
    let (lo, hi) = support(m, n, s);
    if from <= lo && to >= hi {
        return 1.0;
    }
    let from = from.max(lo);
    let to = to.min(hi);
    if from > to {
        return 0.0;
    }
    let mut acc = LogSumExp::new();
    for j in from..=to {
        acc.push(ln_pmf_unchecked(m, n, s, j));
    }
    acc.value().min(1.0)
}

/// `H+(m, n, s, k) = P(K >= k)`.
pub fn hypergeom_tail_upper(m: u64, n: u64, s: u64, k: u64) -> Result<f64> {
    check(m, n, s, k)?;
    Ok(tail_sum(m, n, s, k, s))
}

/// `H-(m, n, s, k) = P(K <= k)`.
pub fn hypergeom_tail_lower(m: u64, n: u64, s: u64, k: u64) -> Result<f64> {
    check(m, n, s, k)?;
    Ok(tail_sum(m, n, s, 0, k))
}

fn check_inversion(n: u64, s: u64, k: u64) -> Result<()> {
    if n == 0 || s > n || k > s {
        return Err(Error::InvalidHypergeomParams { m: 0, n, s, k });
    }
    Ok(())
}

/// Smallest population success count `m` with `H+(m, n, s, k) >= delta`.
///
/// `H+` is nondecreasing in `m`; it is zero below `k` and one from
/// `n - (s - k)` upward, so a binary search over that window is exact.
pub fn hypergeom_min_count(n: u64, s: u64, k: u64, delta: f64) -> Result<u64> {
    check_inversion(n, s, k)?;
    let threshold = delta * (1.0 - TAIL_REL_TOL);
    let (mut lo, mut hi) = (k, n - (s - k));
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if tail_sum(mid, n, s, k, s) >= threshold {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Largest population success count `m` with `H-(m, n, s, k) >= delta`.
pub fn hypergeom_max_count(n: u64, s: u64, k: u64, delta: f64) -> Result<u64> {
    check_inversion(n, s, k)?;
    let threshold = delta * (1.0 - TAIL_REL_TOL);
    let (mut lo, mut hi) = (k, n - (s - k));
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if tail_sum(mid, n, s, 0, k) >= threshold {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(lo)
}

/// PAC lower bound on the population success fraction `m / n`.
pub fn hypergeom_invert_lower(n: u64, s: u64, k: u64, delta: f64) -> Result<f64> {
    Ok(hypergeom_min_count(n, s, k, delta)? as f64 / n as f64)
}

/// PAC upper bound on the population success fraction `m / n`.
pub fn hypergeom_invert_upper(n: u64, s: u64, k: u64, delta: f64) -> Result<f64> {
    Ok(hypergeom_max_count(n, s, k, delta)? as f64 / n as f64)
}

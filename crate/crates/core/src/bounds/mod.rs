//! PAC bounds on the mean of a bounded function over a finite population,
//! estimated from a sample drawn uniformly without replacement.
//!
//! Three families are provided: Hoeffding (range only), empirical
//! Bernstein-Serfling (uses the sample spread and the sampling fraction),
//! and exact hypergeometric tail inversion for 0/1 data. [`bound_mean`] is
//! the single entry point the validation modules call.
//!
//! Every one-sided bound fails with probability at most `delta`; asking for
//! [`Side::Both`] therefore costs `2 * delta` in total.

mod hypergeom;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use hypergeom::{
    hypergeom_invert_lower, hypergeom_invert_upper, hypergeom_max_count, hypergeom_min_count,
    hypergeom_pmf, hypergeom_tail_lower, hypergeom_tail_upper,
};

use crate::error::{Error, Result};

/// `7/3 + 3/sqrt(2)`, the range-term constant of the empirical
/// Bernstein-Serfling bound.
pub const EBS_KAPPA: f64 = 7.0 / 3.0 + 3.0 / std::f64::consts::SQRT_2;

/// Size of the finite population and the range `[lo, hi]` of the function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    n: u64,
    lo: f64,
    hi: f64,
}

impl PopulationSpec {
    pub fn new(n: u64, lo: f64, hi: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPopulation("population size must be >= 1".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidPopulation(format!("bad range [{lo}, {hi}]")));
        }
        Ok(Self { n, lo, hi })
    }

    /// Population of 0/1 indicators.
    pub fn binary(n: u64) -> Result<Self> {
        Self::new(n, 0.0, 1.0)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// The observed function values over a sample, validated against a population.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSummary {
    values: Vec<f64>,
}

impl SampleSummary {
    pub fn new(pop: &PopulationSpec, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if values.len() as u64 > pop.n {
            return Err(Error::InvalidSampleSize {
                s: values.len() as u64,
                n: pop.n,
            });
        }
        if let Some(&value) = values.iter().find(|v| !(pop.lo <= **v && **v <= pop.hi)) {
            return Err(Error::OutOfRange {
                value,
                lo: pop.lo,
                hi: pop.hi,
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        sample_mean(&self.values).expect("validated nonempty")
    }

    pub fn sigma_hat(&self) -> f64 {
        sample_sigma_hat(&self.values).expect("validated nonempty")
    }

    fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    fn successes(&self) -> u64 {
        self.values.iter().filter(|&&v| v == 1.0).count() as u64
    }
}

/// Bound failure probability, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Confidence(f64);

impl Confidence {
    pub fn new(delta: f64) -> Result<Self> {
        if delta > 0.0 && delta < 1.0 {
            Ok(Self(delta))
        } else {
            Err(Error::InvalidDelta(delta))
        }
    }

    pub fn delta(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Confidence {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Confidence> for f64 {
    fn from(c: Confidence) -> f64 {
        c.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    Hoeffding,
    EmpiricalBernsteinSerfling,
    HypergeometricExact,
}

impl BoundMethod {
    pub const ALL: [BoundMethod; 3] = [
        BoundMethod::Hoeffding,
        BoundMethod::EmpiricalBernsteinSerfling,
        BoundMethod::HypergeometricExact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundMethod::Hoeffding => "hoeffding",
            BoundMethod::EmpiricalBernsteinSerfling => "empirical-bernstein-serfling",
            BoundMethod::HypergeometricExact => "hypergeometric-exact",
        }
    }
}

impl fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hoeffding" => Ok(BoundMethod::Hoeffding),
            "empirical-bernstein-serfling" | "ebs" => Ok(BoundMethod::EmpiricalBernsteinSerfling),
            "hypergeometric-exact" | "hypergeometric" => Ok(BoundMethod::HypergeometricExact),
            other => Err(Error::InvalidConfig(format!("unknown bound method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
    Both,
}

impl Side {
    fn lower(self) -> bool {
        matches!(self, Side::Lower | Side::Both)
    }

    fn upper(self) -> bool {
        matches!(self, Side::Upper | Side::Both)
    }
}

/// A PAC bound on a population mean. A side that was not requested is
/// reported as the trivial range endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub delta_used: Confidence,
    pub method: BoundMethod,
    pub side: Side,
    pub diagnostics: BTreeMap<String, f64>,
}

/// Ordered failure probabilities for the terms of a union bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaBudget {
    parts: Vec<Confidence>,
}

impl DeltaBudget {
    pub fn new(parts: Vec<f64>) -> Result<Self> {
        let parts = parts
            .into_iter()
            .map(Confidence::new)
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = parts.iter().map(|c| c.delta()).sum();
        if total >= 1.0 {
            return Err(Error::BudgetExhausted(total));
        }
        Ok(Self { parts })
    }

    /// `total` split into `parts` equal shares.
    pub fn equal(total: f64, parts: usize) -> Result<Self> {
        if parts == 0 {
            return Err(Error::InvalidConfig("budget needs at least one part".into()));
        }
        Self::new(vec![total / parts as f64; parts])
    }

    pub fn parts(&self) -> &[Confidence] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.parts.iter().map(|c| c.delta()).sum()
    }

    /// Checks the budget has exactly `expected` parts for the named bound.
    pub fn expect_parts(&self, what: &'static str, expected: usize) -> Result<&[Confidence]> {
        if self.parts.len() != expected {
            return Err(Error::BudgetMismatch {
                what,
                expected,
                got: self.parts.len(),
            });
        }
        Ok(&self.parts)
    }

    pub fn concat<'a>(budgets: impl IntoIterator<Item = &'a DeltaBudget>) -> Result<Self> {
        let parts: Vec<f64> = budgets
            .into_iter()
            .flat_map(|b| b.parts.iter().map(|c| c.delta()))
            .collect();
        Self::new(parts)
    }
}

/// Joint confidence `1 - sum(parts)` of simultaneously holding bounds.
pub fn union_confidence(budget: &DeltaBudget) -> Result<f64> {
    let total = budget.total();
    if total >= 1.0 {
        return Err(Error::BudgetExhausted(total));
    }
    Ok(1.0 - total)
}

pub fn sample_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation with divisor `s`, i.e. the square root of
/// `sum_{i,j} (x_i - x_j)^2 / (2 s^2)`. Computed by the centered two-pass
/// form, which is algebraically identical.
pub fn sample_sigma_hat(values: &[f64]) -> Result<f64> {
    let mean = sample_mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((ss / values.len() as f64).sqrt())
}

/// Sampling-fraction factor of the Bernstein-Serfling bound.
pub fn rho_s(n: u64, s: u64) -> Result<f64> {
    if s < 1 || s > n {
        return Err(Error::InvalidSampleSize { s, n });
    }
    let (n, s) = (n as f64, s as f64);
    Ok(if s <= n / 2.0 {
        1.0 - (s - 1.0) / n
    } else {
        (1.0 - s / n) * (1.0 + 1.0 / n)
    })
}

pub fn hoeffding_slack(width: f64, s: usize, delta: Confidence) -> f64 {
    width * ((1.0 / delta.delta()).ln() / (2.0 * s as f64)).sqrt()
}

fn symmetric(
    pop: &PopulationSpec,
    estimate: f64,
    slack: f64,
    delta: Confidence,
    method: BoundMethod,
    side: Side,
    diagnostics: BTreeMap<String, f64>,
) -> BoundResult {
    BoundResult {
        estimate,
        lower: if side.lower() {
            pop.clamp(estimate - slack)
        } else {
            pop.lo
        },
        upper: if side.upper() {
            pop.clamp(estimate + slack)
        } else {
            pop.hi
        },
        delta_used: delta,
        method,
        side,
        diagnostics,
    }
}

pub fn hoeffding_bounds(
    pop: &PopulationSpec,
    sample: &SampleSummary,
    delta: Confidence,
    side: Side,
) -> BoundResult {
    let slack = hoeffding_slack(pop.width(), sample.len(), delta);
    let diagnostics = BTreeMap::from([("slack".to_string(), slack)]);
    symmetric(
        pop,
        sample.mean(),
        slack,
        delta,
        BoundMethod::Hoeffding,
        side,
        diagnostics,
    )
}

pub fn ebs_bounds(
    pop: &PopulationSpec,
    sample: &SampleSummary,
    delta: Confidence,
    side: Side,
) -> Result<BoundResult> {
    let s = sample.len();
    let rho = rho_s(pop.n, s as u64)?;
    let sigma = sample.sigma_hat();
    let log_term = (5.0 / delta.delta()).ln();
    let variance_term = sigma * (2.0 * rho * log_term / s as f64).sqrt();
    let range_term = EBS_KAPPA * pop.width() * log_term / s as f64;
    let slack = variance_term + range_term;
    let diagnostics = BTreeMap::from([
        ("sigma_hat".to_string(), sigma),
        ("rho_s".to_string(), rho),
        ("variance_term".to_string(), variance_term),
        ("range_term".to_string(), range_term),
        ("slack".to_string(), slack),
    ]);
    Ok(symmetric(
        pop,
        sample.mean(),
        slack,
        delta,
        BoundMethod::EmpiricalBernsteinSerfling,
        side,
        diagnostics,
    ))
}

/// Exact bounds for 0/1 samples by hypergeometric tail inversion.
pub fn hypergeometric_bounds(
    pop: &PopulationSpec,
    sample: &SampleSummary,
    delta: Confidence,
    side: Side,
) -> Result<BoundResult> {
    if !method_legal(pop, sample, BoundMethod::HypergeometricExact) {
        return Err(Error::MethodRequiresBinary);
    }
    let (n, s, k) = (pop.n, sample.len() as u64, sample.successes());
    let lower = if side.lower() {
        hypergeom_invert_lower(n, s, k, delta.delta())?
    } else {
        pop.lo
    };
    let upper = if side.upper() {
        hypergeom_invert_upper(n, s, k, delta.delta())?
    } else {
        pop.hi
    };
    let diagnostics = BTreeMap::from([
        ("successes".to_string(), k as f64),
        ("population".to_string(), n as f64),
    ]);
    Ok(BoundResult {
        estimate: sample.mean(),
        lower,
        upper,
        delta_used: delta,
        method: BoundMethod::HypergeometricExact,
        side,
        diagnostics,
    })
}

/// Whether `method` may be applied to `sample` over `pop`.
pub fn method_legal(pop: &PopulationSpec, sample: &SampleSummary, method: BoundMethod) -> bool {
    match method {
        BoundMethod::HypergeometricExact => {
            pop.lo == 0.0 && pop.hi == 1.0 && sample.is_binary()
        }
        _ => true,
    }
}

/// Dispatches to the requested bound family.
pub fn bound_mean(
    pop: &PopulationSpec,
    sample: &SampleSummary,
    method: BoundMethod,
    delta: Confidence,
    side: Side,
) -> Result<BoundResult> {
    match method {
        BoundMethod::Hoeffding => Ok(hoeffding_bounds(pop, sample, delta, side)),
        BoundMethod::EmpiricalBernsteinSerfling => ebs_bounds(pop, sample, delta, side),
        BoundMethod::HypergeometricExact => hypergeometric_bounds(pop, sample, delta, side),
    }
}

/// Convenience wrapper building the population and sample from raw parts.
pub fn bound_values(
    n: u64,
    lo: f64,
    hi: f64,
    values: Vec<f64>,
    method: BoundMethod,
    delta: Confidence,
    side: Side,
) -> Result<BoundResult> {
    let pop = PopulationSpec::new(n, lo, hi)?;
    let sample = SampleSummary::new(&pop, values)?;
    bound_mean(&pop, &sample, method, delta, side)
}

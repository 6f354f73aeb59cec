//! Lower bounds on precision and recall of batch matchers.
//!
//! The recall term bounds the fraction of actual matches the holdout
//! matcher finds, from a uniform sample of actual matches. The density term
//! bounds the mean number of actual matches per x node, from a uniform
//! sample of x nodes with known matches. Precision follows from
//! `|M ∩ M̂_H| = R_H · |M|` and `|M| = |X| · mean m(x)`. Complete variants
//! subtract what the complete matcher dropped relative to the holdout one.

use serde::{Deserialize, Serialize};

use super::report::{
    guarded_ratio, Direction, InputDigest, Quantity, Terms, ValidationReport, Variant,
    DEFAULT_MIN_DENOMINATOR, FLAG_MATCH_COUNT_BOUNDED, FLAG_VACUOUS,
};
use crate::bounds::{BoundMethod, Confidence, DeltaBudget, Side};
use crate::error::{Error, Result};
use crate::graph::{MatchSet, NetworkPair, NodeIdx};

/// What is known about `|M|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchTotal {
    Known(u64),
    UpperBound(u64),
}

#[derive(Debug, Clone)]
pub struct BatchValidationInput<'a> {
    pub x_size: u64,
    pub m_hat_holdout: &'a MatchSet,
    pub m_hat_complete: Option<&'a MatchSet>,
    /// Uniform sample of actual matches.
    pub s_m: &'a [(NodeIdx, NodeIdx)],
    /// Uniform sample of x nodes with their actual match counts `m(x)`.
    pub s_x: &'a [(NodeIdx, usize)],
    /// Defaults to the upper bound `k_y · |X|` when absent.
    pub match_total: Option<MatchTotal>,
    pub k_y: usize,
    pub method: BoundMethod,
    pub budget: DeltaBudget,
    pub min_denominator: f64,
}

impl<'a> BatchValidationInput<'a> {
    pub fn new(
        pair: &NetworkPair,
        m_hat_holdout: &'a MatchSet,
        s_m: &'a [(NodeIdx, NodeIdx)],
        s_x: &'a [(NodeIdx, usize)],
        k_y: usize,
        method: BoundMethod,
        budget: DeltaBudget,
    ) -> Self {
        Self {
            x_size: pair.x().len() as u64,
            m_hat_holdout,
            m_hat_complete: None,
            s_m,
            s_x,
            match_total: None,
            k_y,
            method,
            budget,
            min_denominator: DEFAULT_MIN_DENOMINATOR,
        }
    }

    pub fn with_complete(mut self, m_hat: &'a MatchSet) -> Self {
        self.m_hat_complete = Some(m_hat);
        self
    }

    pub fn with_match_total(mut self, total: MatchTotal) -> Self {
        self.match_total = Some(total);
        self
    }

    pub fn with_budget(mut self, budget: DeltaBudget) -> Self {
        self.budget = budget;
        self
    }

    fn complete(&self) -> Result<&'a MatchSet> {
        self.m_hat_complete
            .ok_or_else(|| Error::InvalidConfig("complete match set required".into()))
    }

    fn digest(&self, check: &str) -> String {
        let mut d = InputDigest::default();
        d.tag(check)
            .u64(self.x_size)
            .match_set(self.m_hat_holdout)
            .pairs(self.s_m.iter().copied())
            .u64(self.k_y as u64)
            .method(self.method)
            .budget(&self.budget);
        d.u64(self.s_x.len() as u64);
        for &(x, m) in self.s_x {
            d.u64(x as u64).u64(m as u64);
        }
        match self.match_total {
            Some(MatchTotal::Known(n)) => d.tag("known").u64(n),
            Some(MatchTotal::UpperBound(n)) => d.tag("upper").u64(n),
            None => d.tag("default"),
        };
        if let Some(c) = self.m_hat_complete {
            d.tag("complete").match_set(c);
        }
        d.finish()
    }

    fn recall_term(&self, terms: &mut Terms, delta: Confidence) -> Result<f64> {
        if self.s_m.is_empty() {
            return Err(Error::EmptySample);
        }
        let (n, exact_ok) = match self.match_total {
            Some(MatchTotal::Known(n)) => (n, true),
            Some(MatchTotal::UpperBound(n)) => (n, false),
            None => (self.k_y as u64 * self.x_size, false),
        };
        if !exact_ok {
            terms.flag(FLAG_MATCH_COUNT_BOUNDED);
        }
        terms.set("match_total", n as f64);
        let values = self
            .s_m
            .iter()
            .map(|&(x, y)| if self.m_hat_holdout.contains(x, y) { 1.0 } else { 0.0 })
            .collect();
        terms.bound("recall_term", n, 0.0, 1.0, values, delta, Side::Lower, exact_ok)
    }

    fn density_term(&self, terms: &mut Terms, delta: Confidence) -> Result<f64> {
        if self.s_x.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(&(x, m)) = self.s_x.iter().find(|(_, m)| *m > self.k_y) {
            return Err(Error::KyViolated {
                node: format!("x index {x}"),
                count: m,
                cap: self.k_y,
            });
        }
        let values = self.s_x.iter().map(|&(_, m)| m as f64).collect();
        terms.bound(
            "match_density_term",
            self.x_size,
            0.0,
            self.k_y as f64,
            values,
            delta,
            Side::Lower,
            true,
        )
    }
}

/// Lower bound on holdout recall from the sampled actual matches.
pub fn holdout_batch_recall(input: &BatchValidationInput) -> Result<ValidationReport> {
    const CHECK: &str = "holdout-batch-recall";
    let parts = input.budget.expect_parts(CHECK, 1)?;
    let mut terms = Terms::new(input.method);
    let r = input.recall_term(&mut terms, parts[0])?;
    terms.finish(
        CHECK,
        Quantity::Recall,
        Variant::Holdout,
        Direction::Lower,
        r,
        input.budget.clone(),
        input.digest(CHECK),
    )
}

/// Lower bound on holdout precision. Budget: `[δ_recall, δ_density]`.
pub fn holdout_batch_precision(input: &BatchValidationInput) -> Result<ValidationReport> {
    const CHECK: &str = "holdout-batch-precision";
    let parts = input.budget.expect_parts(CHECK, 2)?;
    let identified = input.m_hat_holdout.len();
    if identified == 0 {
        return Err(Error::NoIdentifiedMatches);
    }
    let mut terms = Terms::new(input.method);
    let r = input.recall_term(&mut terms, parts[0])?;
    let d = input.density_term(&mut terms, parts[1])?;
    let bound = (input.x_size as f64 / identified as f64) * r * d;
    terms.finish(
        CHECK,
        Quantity::Precision,
        Variant::Holdout,
        Direction::Lower,
        bound,
        input.budget.clone(),
        input.digest(CHECK),
    )
}

/// Lower bound on complete recall. Budget: `[δ_recall, δ_density]`.
pub fn complete_batch_recall(input: &BatchValidationInput) -> Result<ValidationReport> {
    const CHECK: &str = "complete-batch-recall";
    let parts = input.budget.expect_parts(CHECK, 2)?;
    let complete = input.complete()?;
    let mut terms = Terms::new(input.method);
    let r = input.recall_term(&mut terms, parts[0])?;
    let d = input.density_term(&mut terms, parts[1])?;
    let dropped = input.m_hat_holdout.difference_len(complete);
    terms.set("disagreement_count", dropped as f64);
    let bound = if dropped == 0 {
        r
    } else {
        let denom = input.x_size as f64 * d;
        terms.set("match_total_lower", denom);
        match guarded_ratio(dropped as f64, denom, input.min_denominator) {
            Some(q) => {
                terms.set("disagreement_term", q);
                r - q
            }
            None => {
                terms.flag(FLAG_VACUOUS);
                0.0
            }
        }
    };
    terms.finish(
        CHECK,
        Quantity::Recall,
        Variant::Complete,
        Direction::Lower,
        bound,
        input.budget.clone(),
        input.digest(CHECK),
    )
}

/// Lower bound on complete precision. Budget: `[δ_recall, δ_density]`.
pub fn complete_batch_precision(input: &BatchValidationInput) -> Result<ValidationReport> {
    const CHECK: &str = "complete-batch-precision";
    let parts = input.budget.expect_parts(CHECK, 2)?;
    let complete = input.complete()?;
    let identified = complete.len();
    if identified == 0 {
        return Err(Error::NoIdentifiedMatches);
    }
    let mut terms = Terms::new(input.method);
    let r = input.recall_term(&mut terms, parts[0])?;
    let d = input.density_term(&mut terms, parts[1])?;
    let dropped = input.m_hat_holdout.difference_len(complete);
    terms.set("disagreement_count", dropped as f64);
    let bound = (input.x_size as f64 / identified as f64) * r * d - dropped as f64 / identified as f64;
    terms.finish(
        CHECK,
        Quantity::Precision,
        Variant::Complete,
        Direction::Lower,
        bound,
        input.budget.clone(),
        input.digest(CHECK),
    )
}

/// Exact `(precision, recall)`; `None` where the denominator is empty.
pub fn true_batch_metrics(m_hat: &MatchSet, m_true: &MatchSet) -> (Option<f64>, Option<f64>) {
    let hit = m_hat.intersection_len(m_true) as f64;
    let ratio = |d: usize| (d > 0).then(|| hit / d as f64);
    (ratio(m_hat.len()), ratio(m_true.len()))
}

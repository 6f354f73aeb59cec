//! Bounds for query matchers, built from per-node statistics.
//!
//! `S_X` is a node sample whose actual matches are known; `S'_X` is an
//! independent node sample on which only the two matchers are queried.
//! Statistics on `S'_X` never read actual matches.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{
    guarded_ratio, Direction, InputDigest, Quantity, Terms, ValidationReport, Variant,
    DEFAULT_MIN_DENOMINATOR, FLAG_DP_WIDENED, FLAG_SAME_MATCHER, FLAG_VACUOUS,
};
use crate::bounds::{BoundMethod, Confidence, DeltaBudget, Side};
use crate::error::{Error, Result};
use crate::graph::{MatchSet, NodeIdx, PerNodeView};
use crate::matchers::QuerySource;

/// Access to the actual matches of sampled nodes.
pub trait ActualMatches: Sync {
    fn actual(&self, x: NodeIdx) -> PerNodeView;
}

impl ActualMatches for MatchSet {
    fn actual(&self, x: NodeIdx) -> PerNodeView {
        self.view(x)
    }
}

/// `|M̂(x) ∩ M(x)| / |M̂(x)|`, undefined when nothing is identified.
pub fn single_node_precision(m_hat: &PerNodeView, m: &PerNodeView) -> Option<f64> {
    (!m_hat.is_empty()).then(|| m_hat.intersection_len(m) as f64 / m_hat.len() as f64)
}

/// `|M̂(x) ∩ M(x)| / |M(x)|`, undefined when `x` has no actual match.
pub fn single_node_recall(m_hat: &PerNodeView, m: &PerNodeView) -> Option<f64> {
    (!m.is_empty()).then(|| m_hat.intersection_len(m) as f64 / m.len() as f64)
}

/// 1 when the identified and actual match sets of `x` differ.
pub fn single_node_error(m_hat: &PerNodeView, m: &PerNodeView) -> u8 {
    u8::from(m_hat.matched != m.matched)
}

/// 1 when the holdout matcher identifies a match the complete one drops.
pub fn recall_disagreement(holdout: &PerNodeView, complete: &PerNodeView) -> u8 {
    u8::from(holdout.difference_len(complete) > 0)
}

/// Per-node precision disagreement:
/// `1 + |M̂_H(x) \ M̂(x)| / |M̂(x)|` when both matchers identify something
/// for `x` and disagree, 1 when only the holdout matcher does, else 0.
pub fn precision_disagreement(holdout: &PerNodeView, complete: &PerNodeView) -> f64 {
    match (holdout.is_empty(), complete.is_empty()) {
        (false, false) if holdout.matched != complete.matched => {
            1.0 + holdout.difference_len(complete) as f64 / complete.len() as f64
        }
        (false, true) => 1.0,
        _ => 0.0,
    }
}

/// How the complete matcher relates to the holdout matcher.
#[derive(Clone, Copy)]
pub enum CompleteSource<'a> {
    /// Same matcher: every disagreement term is exactly zero.
    SameAsHoldout,
    Distinct(&'a dyn QuerySource),
}

#[derive(Clone)]
pub struct QueryValidationInput<'a> {
    pub x_size: u64,
    pub holdout: &'a dyn QuerySource,
    pub complete: CompleteSource<'a>,
    pub truth: &'a dyn ActualMatches,
    pub s_x: &'a [NodeIdx],
    pub s_x_prime: &'a [NodeIdx],
    /// Declared maximum identified matches per node.
    pub k_cap: usize,
    pub method: BoundMethod,
    pub budget: DeltaBudget,
    pub min_denominator: f64,
}

impl<'a> QueryValidationInput<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        x_size: u64,
        holdout: &'a dyn QuerySource,
        complete: CompleteSource<'a>,
        truth: &'a dyn ActualMatches,
        s_x: &'a [NodeIdx],
        s_x_prime: &'a [NodeIdx],
        k_cap: usize,
        method: BoundMethod,
        budget: DeltaBudget,
    ) -> Self {
        Self {
            x_size,
            holdout,
            complete,
            truth,
            s_x,
            s_x_prime,
            k_cap,
            method,
            budget,
            min_denominator: DEFAULT_MIN_DENOMINATOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeSample {
    /// Sample with known actual matches.
    Verified,
    /// Independent sample, matchers only.
    Unverified,
}

/// Statistics of one sampled node. Fields that the node's sample cannot
/// provide are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerNodeStats {
    pub node: NodeIdx,
    pub sample: NodeSample,
    pub identified_holdout: bool,
    pub identified_complete: Option<bool>,
    pub has_actual: Option<bool>,
    pub p: Option<f64>,
    pub r: Option<f64>,
    pub w: Option<u8>,
    pub d_r: Option<u8>,
    pub d_p: Option<f64>,
    pub disagree: Option<u8>,
}

fn verified_stats(input: &QueryValidationInput, x: NodeIdx) -> Result<PerNodeStats> {
    let h = input.holdout.query(x)?;
    let m = input.truth.actual(x);
    Ok(PerNodeStats {
        node: x,
        sample: NodeSample::Verified,
        identified_holdout: !h.is_empty(),
        identified_complete: None,
        has_actual: Some(!m.is_empty()),
        p: single_node_precision(&h, &m),
        r: single_node_recall(&h, &m),
        w: Some(single_node_error(&h, &m)),
        d_r: None,
        d_p: None,
        disagree: None,
    })
}

fn unverified_stats(input: &QueryValidationInput, x: NodeIdx) -> Result<PerNodeStats> {
    let h = input.holdout.query(x)?;
    let c = match input.complete {
        CompleteSource::SameAsHoldout => h.clone(),
        CompleteSource::Distinct(src) => src.query(x)?,
    };
    Ok(PerNodeStats {
        node: x,
        sample: NodeSample::Unverified,
        identified_holdout: !h.is_empty(),
        identified_complete: Some(!c.is_empty()),
        has_actual: None,
        p: None,
        r: None,
        w: None,
        d_r: Some(recall_disagreement(&h, &c)),
        d_p: Some(precision_disagreement(&h, &c)),
        disagree: Some(u8::from(h.matched != c.matched)),
    })
}

/// Everything the query bounds need, gathered once from the samples.
#[derive(Debug, Clone)]
pub struct QueryEvidence {
    pub x_size: u64,
    pub k_cap: usize,
    pub same_matcher: bool,
    pub verified: Vec<PerNodeStats>,
    pub unverified: Vec<PerNodeStats>,
    pub min_denominator: f64,
    digest: InputDigest,
}

impl QueryEvidence {
    /// Queries the matchers on both samples (in parallel over nodes) and
    /// reads actual matches for `S_X` only.
    pub fn gather(input: &QueryValidationInput) -> Result<Self> {
        if input.k_cap < 1 {
            return Err(Error::InvalidConfig("k_cap must be >= 1".into()));
        }
        let verified = input
            .s_x
            .par_iter()
            .map(|&x| verified_stats(input, x))
            .collect::<Result<Vec<_>>>()?;
        let unverified = input
            .s_x_prime
            .par_iter()
            .map(|&x| unverified_stats(input, x))
            .collect::<Result<Vec<_>>>()?;
        let same_matcher = matches!(input.complete, CompleteSource::SameAsHoldout);
        let mut digest = InputDigest::default();
        digest
            .u64(input.x_size)
            .u64(input.k_cap as u64)
            .nodes(input.s_x)
            .nodes(input.s_x_prime)
            .u64(u64::from(same_matcher));
        for st in verified.iter().chain(&unverified) {
            digest
                .f64(st.p.unwrap_or(-1.0))
                .f64(st.r.unwrap_or(-1.0))
                .f64(st.d_p.unwrap_or(-1.0))
                .u64(u64::from(st.identified_holdout))
                .u64(st.identified_complete.map_or(2, u64::from))
                .u64(st.has_actual.map_or(2, u64::from))
                .u64(st.disagree.map_or(2, u64::from));
        }
        Ok(Self {
            x_size: input.x_size,
            k_cap: input.k_cap,
            same_matcher,
            verified,
            unverified,
            min_denominator: input.min_denominator,
            digest,
        })
    }

    fn digest(&self, check: &str, method: BoundMethod, budget: &DeltaBudget) -> String {
        let mut d = self.digest.clone();
        d.tag(check).method(method).budget(budget);
        d.finish()
    }

    fn unverified_values(&self, f: impl Fn(&PerNodeStats) -> f64) -> Result<Vec<f64>> {
        if self.unverified.is_empty() {
            return Err(Error::NoUsableSample("independent node sample is empty"));
        }
        Ok(self.unverified.iter().map(f).collect())
    }

    fn precision_term(&self, terms: &mut Terms, delta: Confidence) -> Result<f64> {
        let values: Vec<f64> = self.verified.iter().filter_map(|s| s.p).collect();
        if values.is_empty() {
            return Err(Error::NoUsableSample("no sampled node has identified matches"));
        }
        terms.bound("precision_term", self.x_size, 0.0, 1.0, values, delta, Side::Lower, true)
    }

    fn recall_term(&self, terms: &mut Terms, delta: Confidence) -> Result<f64> {
        let values: Vec<f64> = self.verified.iter().filter_map(|s| s.r).collect();
        if values.is_empty() {
            return Err(Error::NoUsableSample("no sampled node has actual matches"));
        }
        terms.bound("recall_term", self.x_size, 0.0, 1.0, values, delta, Side::Lower, true)
    }

    fn error_term(&self, terms: &mut Terms, delta: Confidence) -> Result<f64> {
        if self.verified.is_empty() {
            return Err(Error::EmptySample);
        }
        let values = self
            .verified
            .iter()
            .map(|s| f64::from(s.w.unwrap_or(0)))
            .collect();
        terms.bound("error_term", self.x_size, 0.0, 1.0, values, delta, Side::Upper, true)
    }

    /// Lower bound on holdout query precision. Budget: one part.
    pub fn holdout_precision(&self, method: BoundMethod, budget: &DeltaBudget) -> Result<ValidationReport> {
        const CHECK: &str = "holdout-query-precision";
        let parts = budget.expect_parts(CHECK, 1)?;
        let mut terms = Terms::new(method);
        let b = self.precision_term(&mut terms, parts[0])?;
        terms.finish(
            CHECK,
            Quantity::Precision,
            Variant::Holdout,
            Direction::Lower,
            b,
            budget.clone(),
            self.digest(CHECK, method, budget),
        )
    }

    /// Lower bound on holdout query recall. Budget: one part.
    pub fn holdout_recall(&self, method: BoundMethod, budget: &DeltaBudget) -> Result<ValidationReport> {
        const CHECK: &str = "holdout-query-recall";
        let parts = budget.expect_parts(CHECK, 1)?;
        let mut terms = Terms::new(method);
        let b = self.recall_term(&mut terms, parts[0])?;
        terms.finish(
            CHECK,
            Quantity::Recall,
            Variant::Holdout,
            Direction::Lower,
            b,
            budget.clone(),
            self.digest(CHECK, method, budget),
        )
    }

    /// Lower bound on complete query recall.
    /// Budget: `[δ_recall, δ_disagreement, δ_actual_fraction]`.
    pub fn complete_recall(&self, method: BoundMethod, budget: &DeltaBudget) -> Result<ValidationReport> {
        const CHECK: &str = "complete-query-recall";
        let parts = budget.expect_parts(CHECK, 3)?;
        let mut terms = Terms::new(method);
        let a = self.recall_term(&mut terms, parts[0])?;
        let bound = if self.same_matcher {
            terms.flag(FLAG_SAME_MATCHER);
            a
        } else {
            let d_r = self.unverified_values(|s| f64::from(s.d_r.unwrap_or(0)))?;
            let b = terms.bound("disagreement_term", self.x_size, 0.0, 1.0, d_r, parts[1], Side::Upper, true)?;
            if self.verified.is_empty() {
                return Err(Error::EmptySample);
            }
            let has_actual = self
                .verified
                .iter()
                .map(|s| if s.has_actual == Some(true) { 1.0 } else { 0.0 })
                .collect();
            let c = terms.bound(
                "actual_fraction_term",
                self.x_size,
                0.0,
                1.0,
                has_actual,
                parts[2],
                Side::Lower,
                true,
            )?;
            match guarded_ratio(b, c, self.min_denominator) {
                Some(q) => a - q,
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
            budget.clone(),
            self.digest(CHECK, method, budget),
        )
    }

    /// Range used for the precision disagreement: (-1, 2) unless an
    /// observed value exceeds 2, then (0, 1 + k_cap).
    pub fn dp_range(&self) -> (f64, f64, bool) {
        let widened = self.unverified.iter().any(|s| s.d_p.unwrap_or(0.0) > 2.0);
        if widened {
            (0.0, 1.0 + self.k_cap as f64, true)
        } else {
            (-1.0, 2.0, false)
        }
    }

    /// Lower bound on complete query precision. Budget:
    /// `[δ_holdout_fraction, δ_precision, δ_disagreement, δ_complete_fraction]`.
    pub fn complete_precision(&self, method: BoundMethod, budget: &DeltaBudget) -> Result<ValidationReport> {
        const CHECK: &str = "complete-query-precision";
        let parts = budget.expect_parts(CHECK, 4)?;
        let mut terms = Terms::new(method);
        let p = self.precision_term(&mut terms, parts[1])?;
        let bound = if self.same_matcher {
            terms.flag(FLAG_SAME_MATCHER);
            p
        } else {
            let in_h = self.unverified_values(|s| f64::from(u8::from(s.identified_holdout)))?;
            let f = terms.bound(
                "holdout_identified_fraction_term",
                self.x_size,
                0.0,
                1.0,
                in_h,
                parts[0],
                Side::Lower,
                true,
            )?;
            let (lo, hi, widened) = self.dp_range();
            if widened {
                terms.flag(FLAG_DP_WIDENED);
            }
            terms.set("dp_range_lo", lo);
            terms.set("dp_range_hi", hi);
            let d_p = self.unverified_values(|s| s.d_p.unwrap_or(0.0))?;
            let d = terms.bound("disagreement_term", self.x_size, lo, hi, d_p, parts[2], Side::Upper, true)?;
            let in_c = self.unverified_values(|s| f64::from(u8::from(s.identified_complete == Some(true))))?;
            let u = terms.bound(
                "complete_identified_fraction_term",
                self.x_size,
                0.0,
                1.0,
                in_c,
                parts[3],
                Side::Upper,
                true,
            )?;
            match guarded_ratio(f * p - d, u, self.min_denominator) {
                Some(v) => v,
                None => {
                    terms.flag(FLAG_VACUOUS);
                    0.0
                }
            }
        };
        terms.finish(
            CHECK,
            Quantity::Precision,
            Variant::Complete,
            Direction::Lower,
            bound,
            budget.clone(),
            self.digest(CHECK, method, budget),
        )
    }

    /// Upper bound on the holdout error rate. Budget: one part.
    pub fn holdout_error_rate(&self, method: BoundMethod, budget: &DeltaBudget) -> Result<ValidationReport> {
        const CHECK: &str = "holdout-error-rate";
        let parts = budget.expect_parts(CHECK, 1)?;
        let mut terms = Terms::new(method);
        let e = self.error_term(&mut terms, parts[0])?;
        terms.finish(
            CHECK,
            Quantity::ErrorRate,
            Variant::Holdout,
            Direction::Upper,
            e,
            budget.clone(),
            self.digest(CHECK, method, budget),
        )
    }

    /// Upper bound on the complete error rate: holdout error plus the rate
    /// at which the two matchers disagree. Budget: `[δ_error, δ_disagreement]`.
    pub fn complete_error_rate(&self, method: BoundMethod, budget: &DeltaBudget) -> Result<ValidationReport> {
        const CHECK: &str = "complete-error-rate";
        let parts = budget.expect_parts(CHECK, 2)?;
        let mut terms = Terms::new(method);
        let e = self.error_term(&mut terms, parts[0])?;
        let bound = if self.same_matcher {
            terms.flag(FLAG_SAME_MATCHER);
            e
        } else {
            let dis = self.unverified_values(|s| f64::from(s.disagree.unwrap_or(0)))?;
            e + terms.bound("disagreement_term", self.x_size, 0.0, 1.0, dis, parts[1], Side::Upper, true)?
        };
        terms.finish(
            CHECK,
            Quantity::ErrorRate,
            Variant::Complete,
            Direction::Upper,
            bound,
            budget.clone(),
            self.digest(CHECK, method, budget),
        )
    }
}

/// Precision and recall bounds for the holdout matcher. Budget:
/// `[δ_precision, δ_recall]`.
pub fn holdout_query_bounds(input: &QueryValidationInput) -> Result<(ValidationReport, ValidationReport)> {
    let parts = input.budget.expect_parts("holdout query bounds", 2)?;
    let ev = QueryEvidence::gather(input)?;
    let single = |c: Confidence| DeltaBudget::new(vec![c.delta()]);
    Ok((
        ev.holdout_precision(input.method, &single(parts[0])?)?,
        ev.holdout_recall(input.method, &single(parts[1])?)?,
    ))
}

pub fn complete_query_recall(input: &QueryValidationInput) -> Result<ValidationReport> {
    QueryEvidence::gather(input)?.complete_recall(input.method, &input.budget)
}

pub fn complete_query_precision(input: &QueryValidationInput) -> Result<ValidationReport> {
    QueryEvidence::gather(input)?.complete_precision(input.method, &input.budget)
}

/// Holdout error-rate bound for a one-part budget, complete for two parts.
pub fn error_rate_bounds(input: &QueryValidationInput) -> Result<ValidationReport> {
    let ev = QueryEvidence::gather(input)?;
    match input.budget.len() {
        1 => ev.holdout_error_rate(input.method, &input.budget),
        _ => ev.complete_error_rate(input.method, &input.budget),
    }
}

/// Exact query metrics `(precision, recall, error_rate)` of a matcher over
/// all of `xs`. Test oracle only: reads every node's actual matches.
pub fn true_query_metrics(
    xs: impl IntoIterator<Item = NodeIdx>,
    matcher: &dyn QuerySource,
    truth: &dyn ActualMatches,
) -> Result<(Option<f64>, Option<f64>, Option<f64>)> {
    let (mut p_sum, mut p_n, mut r_sum, mut r_n, mut w_sum, mut n) = (0.0, 0u64, 0.0, 0u64, 0u64, 0u64);
    for x in xs {
        let h = matcher.query(x)?;
        let m = truth.actual(x);
        if let Some(p) = single_node_precision(&h, &m) {
            p_sum += p;
            p_n += 1;
        }
        if let Some(r) = single_node_recall(&h, &m) {
            r_sum += r;
            r_n += 1;
        }
        w_sum += u64::from(single_node_error(&h, &m));
        n += 1;
    }
    let avg = |s: f64, k: u64| (k > 0).then(|| s / k as f64);
    Ok((avg(p_sum, p_n), avg(r_sum, r_n), avg(w_sum as f64, n)))
}

/// Walks a node order and stops once `target` visited nodes satisfy
/// `pred`. Stopping on a count of qualifying nodes keeps the qualifying
/// part a uniform sample of the qualifying population.
pub struct ExtendingSample<I, F> {
    order: I,
    pred: F,
    target: usize,
    hits: usize,
}

impl<I: Iterator<Item = NodeIdx>, F: FnMut(NodeIdx) -> bool> Iterator for ExtendingSample<I, F> {
    type Item = NodeIdx;

    fn next(&mut self) -> Option<NodeIdx> {
        if self.hits >= self.target {
            return None;
        }
        let x = self.order.next()?;
        if (self.pred)(x) {
            self.hits += 1;
        }
        Some(x)
    }
}

pub fn extend_until<I, F>(order: I, pred: F, target: usize) -> ExtendingSample<I::IntoIter, F>
where
    I: IntoIterator<Item = NodeIdx>,
    F: FnMut(NodeIdx) -> bool,
{
    ExtendingSample {
        order: order.into_iter(),
        pred,
        target,
        hits: 0,
    }
}

/// Uniformly random order of `0..n`, the draw sequence of a sample that
/// can be extended one node at a time.
pub fn random_order<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<NodeIdx> {
    let mut v: Vec<NodeIdx> = (0..n as NodeIdx).collect();
    v.shuffle(rng);
    v
}

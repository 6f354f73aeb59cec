use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{bound_mean, BoundMethod, Confidence, DeltaBudget, PopulationSpec, SampleSummary, Side};
use crate::error::Result;
use crate::graph::{MatchSet, NodeIdx};

/// A denominator bound fell to (near) zero; the reported bound is 0.
pub const FLAG_VACUOUS: &str = "vacuous-denominator";
/// `|M|` was replaced by an upper bound.
pub const FLAG_MATCH_COUNT_BOUNDED: &str = "match-count-upper-bounded";
/// The d_p range was widened past (-1, 2).
pub const FLAG_DP_WIDENED: &str = "dp-range-widened";
/// The complete matcher is the holdout matcher; disagreement terms are 0.
pub const FLAG_SAME_MATCHER: &str = "complete-equals-holdout";
/// Prefix of the flag raised when the exact method was replaced by EBS.
pub const FLAG_FALLBACK_PREFIX: &str = "fallback-ebs:";

pub const DEFAULT_MIN_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Precision,
    Recall,
    ErrorRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Holdout,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Lower,
    Upper,
}

/// Outcome of one validation bound. `bound` is a lower bound for precision
/// and recall and an upper bound for error rate; it holds with probability
/// at least `confidence = 1 - budget.total()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub check: String,
    pub quantity: Quantity,
    pub variant: Variant,
    pub direction: Direction,
    pub bound: f64,
    pub method: BoundMethod,
    pub budget: DeltaBudget,
    pub confidence: f64,
    pub terms: BTreeMap<String, f64>,
    pub flags: BTreeSet<String>,
    pub inputs_digest: String,
}

impl ValidationReport {
    pub fn is_vacuous(&self) -> bool {
        self.flags.contains(FLAG_VACUOUS)
    }

    /// JSON with keys sorted at every level.
    pub fn to_json(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }

    pub fn write_json(&self, mut w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, &self.to_json()?)?;
        writeln!(w)?;
        Ok(())
    }
}

/// Incremental SHA-256 over the inputs a report depends on.
#[derive(Debug, Clone)]
pub struct InputDigest(Sha256);

impl Default for InputDigest {
    fn default() -> Self {
        Self(Sha256::new())
    }
}

impl InputDigest {
    pub fn tag(&mut self, tag: &str) -> &mut Self {
        self.0.update((tag.len() as u64).to_le_bytes());
        self.0.update(tag.as_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.0.update(v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.0.update(v.to_bits().to_le_bytes());
        self
    }

    pub fn nodes(&mut self, nodes: &[NodeIdx]) -> &mut Self {
        self.u64(nodes.len() as u64);
        for n in nodes {
            self.0.update(n.to_le_bytes());
        }
        self
    }

    pub fn pairs(&mut self, pairs: impl ExactSizeIterator<Item = (NodeIdx, NodeIdx)>) -> &mut Self {
        self.u64(pairs.len() as u64);
        for (x, y) in pairs {
            self.0.update(x.to_le_bytes());
            self.0.update(y.to_le_bytes());
        }
        self
    }

    pub fn match_set(&mut self, ms: &MatchSet) -> &mut Self {
        self.u64(ms.len() as u64);
        for (x, y) in ms.iter() {
            self.0.update(x.to_le_bytes());
            self.0.update(y.to_le_bytes());
        }
        self
    }

    pub fn method(&mut self, m: BoundMethod) -> &mut Self {
        self.tag(m.as_str())
    }

    pub fn budget(&mut self, b: &DeltaBudget) -> &mut Self {
        self.u64(b.len() as u64);
        for c in b.parts() {
            self.f64(c.delta());
        }
        self
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

/// Collects named sub-bounds and flags while a report is assembled.
pub(crate) struct Terms {
    method: BoundMethod,
    pub(crate) terms: BTreeMap<String, f64>,
    pub(crate) flags: BTreeSet<String>,
}

impl Terms {
    pub(crate) fn new(method: BoundMethod) -> Self {
        Self {
            method,
            terms: BTreeMap::new(),
            flags: BTreeSet::new(),
        }
    }

    pub(crate) fn set(&mut self, name: &str, v: f64) {
        self.terms.insert(name.to_string(), v);
    }

    pub(crate) fn flag(&mut self, flag: impl Into<String>) {
        self.flags.insert(flag.into());
    }

    /// One-sided bound on the mean of `values` over a population of `n`
    /// items valued in `[lo, hi]`. The exact method is swapped for EBS when
    /// it does not apply or `exact_ok` is false.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn bound(
        &mut self,
        name: &str,
        n: u64,
        lo: f64,
        hi: f64,
        values: Vec<f64>,
        delta: Confidence,
        side: Side,
        exact_ok: bool,
    ) -> Result<f64> {
        let pop = PopulationSpec::new(n, lo, hi)?;
        let sample = SampleSummary::new(&pop, values)?;
        let mut method = self.method;
        if method == BoundMethod::HypergeometricExact
            && (!exact_ok || !crate::bounds::method_legal(&pop, &sample, method))
        {
            method = BoundMethod::EmpiricalBernsteinSerfling;
            self.flag(format!("{FLAG_FALLBACK_PREFIX}{name}"));
        }
        let res = bound_mean(&pop, &sample, method, delta, side)?;
        let v = match side {
            Side::Upper => res.upper,
            _ => res.lower,
        };
        self.set(name, v);
        self.set(&format!("{name}_estimate"), res.estimate);
        self.set(&format!("{name}_samples"), sample.len() as f64);
        Ok(v)
    }

    pub(crate) fn finish(
        self,
        check: &str,
        quantity: Quantity,
        variant: Variant,
        direction: Direction,
        bound: f64,
        budget: DeltaBudget,
        inputs_digest: String,
    ) -> Result<ValidationReport> {
        let confidence = crate::bounds::union_confidence(&budget)?;
        Ok(ValidationReport {
            check: check.to_string(),
            quantity,
            variant,
            direction,
            bound: bound.clamp(0.0, 1.0),
            method: self.method,
            budget,
            confidence,
            terms: self.terms,
            flags: self.flags,
            inputs_digest,
        })
    }
}

/// `a / b`, or `None` when `b` is not above the floor `eps`.
pub(crate) fn guarded_ratio(a: f64, b: f64, eps: f64) -> Option<f64> {
    (b > eps).then(|| a / b)
}

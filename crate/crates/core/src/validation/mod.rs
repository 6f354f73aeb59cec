//! PAC validation of batch and query matchers.

pub mod batch;
pub mod query;
mod report;

use serde::{Deserialize, Serialize};

pub use report::{
    Direction, InputDigest, Quantity, ValidationReport, Variant, DEFAULT_MIN_DENOMINATOR,
    FLAG_DP_WIDENED, FLAG_FALLBACK_PREFIX, FLAG_MATCH_COUNT_BOUNDED, FLAG_SAME_MATCHER, FLAG_VACUOUS,
};

use crate::bounds::{union_confidence, DeltaBudget};
use crate::error::{Error, Result};
use crate::graph::MatchSet;

/// Several bounds asserted together. All hold at once with probability at
/// least `joint_confidence = 1 - joint_budget.total()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimultaneousReport {
    pub reports: Vec<ValidationReport>,
    pub joint_budget: DeltaBudget,
    pub joint_confidence: f64,
}

pub fn simultaneous(reports: Vec<ValidationReport>) -> Result<SimultaneousReport> {
    let joint_budget = DeltaBudget::concat(reports.iter().map(|r| &r.budget))?;
    let joint_confidence = union_confidence(&joint_budget)?;
    Ok(SimultaneousReport {
        reports,
        joint_budget,
        joint_confidence,
    })
}

/// Splits `m_hat` into score bands at `cuts` and validates each band with
/// its own budget.
pub fn validate_bands<F>(
    m_hat: &MatchSet,
    cuts: &[f64],
    budgets: &[DeltaBudget],
    mut validate: F,
) -> Result<SimultaneousReport>
where
    F: FnMut(&MatchSet, &DeltaBudget) -> Result<ValidationReport>,
{
    let bands = m_hat.partition_by_score(cuts)?;
    if bands.len() != budgets.len() {
        return Err(Error::BudgetMismatch {
            what: "score bands",
            expected: bands.len(),
            got: budgets.len(),
        });
    }
    let reports = bands
        .iter()
        .zip(budgets)
        .map(|(band, b)| validate(band, b))
        .collect::<Result<Vec<_>>>()?;
    simultaneous(reports)
}

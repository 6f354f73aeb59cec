//! Monte Carlo coverage experiments.
//!
//! Each trial generates a network pair, draws the validation samples, runs
//! the holdout and complete matchers, computes every bound for every
//! method, and compares each bound with the exact metric. Trial `i` draws
//! all its randomness from stream `i` of the master seed, so results do not
//! depend on scheduling.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::PathBuf;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundMethod, DeltaBudget};
use crate::error::{Error, Result};
use crate::graph::{MatchSet, NetworkPair, NodeIdx};
use crate::matchers::{run_batch, MatcherConfig, MatcherHandle, SeedRule};
use crate::sampling::{sample_without_replacement, split_train_validation, stream_rng, SplitSpec};
use crate::synth::{generate_pair, GeneratorConfig};
use crate::validation::batch::{
    complete_batch_precision, complete_batch_recall, holdout_batch_precision, holdout_batch_recall,
    true_batch_metrics, BatchValidationInput, MatchTotal,
};
use crate::validation::query::{true_query_metrics, CompleteSource, QueryEvidence, QueryValidationInput};
use crate::validation::{Direction, ValidationReport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSizes {
    /// Verified matches handed to the holdout matcher as seeds.
    pub training: usize,
    pub s_m: usize,
    pub s_x: usize,
    pub s_x_prime: usize,
}

impl Default for SampleSizes {
    fn default() -> Self {
        Self {
            training: 60,
            s_m: 200,
            s_x: 200,
            s_x_prime: 200,
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

fn default_true() -> bool {
    true
}

/// One coverage sweep. `delta` is the total failure probability of each
/// check, split equally over that check's terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub matcher_holdout: MatcherConfig,
    /// Defaults to the holdout configuration.
    #[serde(default)]
    pub matcher_complete: Option<MatcherConfig>,
    pub sample_sizes: SampleSizes,
    pub methods: Vec<BoundMethod>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    /// Pass the true `|M|` to the recall term; otherwise use `k_y · |X|`.
    #[serde(default = "default_true")]
    pub match_total_known: bool,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            matcher_holdout: MatcherConfig::percolation(SeedRule::VerifiedSample, 2),
            matcher_complete: None,
            sample_sizes: SampleSizes::default(),
            methods: BoundMethod::ALL.to_vec(),
            delta: default_delta(),
            trials: 500,
            seed: 0,
            match_total_known: true,
            output_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.matcher_holdout.validate()?;
        if let Some(c) = &self.matcher_complete {
            c.validate()?;
        }
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("at least one bound method is required".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidDelta(self.delta));
        }
        let s = &self.sample_sizes;
        if s.s_m == 0 || s.s_x == 0 || s.s_x_prime == 0 {
            return Err(Error::InvalidConfig("sample sizes must be positive".into()));
        }
        if s.s_x.max(s.s_x_prime) > self.generator.n_entities
            || s.training + s.s_m > self.generator.n_entities
        {
            return Err(Error::InvalidConfig("sample sizes exceed the entity count".into()));
        }
        Ok(())
    }
}

/// Every check, its number of budget terms, and its direction.
pub const CHECKS: [(&str, usize, Direction); 10] = [
    ("holdout-batch-recall", 1, Direction::Lower),
    ("holdout-batch-precision", 2, Direction::Lower),
    ("complete-batch-recall", 2, Direction::Lower),
    ("complete-batch-precision", 2, Direction::Lower),
    ("holdout-query-precision", 1, Direction::Lower),
    ("holdout-query-recall", 1, Direction::Lower),
    ("complete-query-recall", 3, Direction::Lower),
    ("complete-query-precision", 4, Direction::Lower),
    ("holdout-error-rate", 1, Direction::Upper),
    ("complete-error-rate", 2, Direction::Upper),
];

/// Bound and exact value of one check in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub check: String,
    pub method: BoundMethod,
    pub bound: f64,
    /// `None` when the metric is undefined (empty denominator).
    pub truth: Option<f64>,
    pub vacuous: bool,
    pub failed: bool,
}

/// The sampled evidence and matcher outputs of one trial.
pub struct TrialData {
    pub pair: NetworkPair,
    pub truth: MatchSet,
    pub m_hat_holdout: MatchSet,
    pub m_hat_complete: MatchSet,
    pub s_m: Vec<(NodeIdx, NodeIdx)>,
    pub s_x: Vec<NodeIdx>,
    pub s_x_prime: Vec<NodeIdx>,
}

/// Generates one trial's data from stream `trial` of `cfg.seed`.
pub fn prepare_trial(cfg: &ExperimentConfig, trial: u64) -> Result<TrialData> {
    let mut rng = stream_rng(cfg.seed, trial);
    let gen = GeneratorConfig {
        rng_seed: rng.random(),
        ..cfg.generator.clone()
    };
    let (pair, truth) = generate_pair(&gen)?;
    let sizes = &cfg.sample_sizes;
    let actual: Vec<(NodeIdx, NodeIdx)> = truth.iter().collect();
    if sizes.training + sizes.s_m > actual.len() {
        return Err(Error::InvalidConfig(format!(
            "trial {trial}: {} actual matches cannot supply {} training + {} validation pairs",
            actual.len(),
            sizes.training,
            sizes.s_m
        )));
    }
    let labeled = sample_without_replacement(&actual, sizes.training + sizes.s_m, &mut rng)?;
    let split = SplitSpec {
        population_n: actual.len() as u64,
        labeled,
        t: sizes.training,
        s: sizes.s_m,
        rng_seed: rng.random(),
    };
    let (train, s_m) = split_train_validation(&split)?;

    let xs: Vec<NodeIdx> = pair.x().nodes().collect();
    if sizes.s_x.max(sizes.s_x_prime) > xs.len() {
        return Err(Error::InvalidSampleSize {
            s: sizes.s_x.max(sizes.s_x_prime) as u64,
            n: xs.len() as u64,
        });
    }
    let s_x = sample_without_replacement(&xs, sizes.s_x, &mut rng)?;
    let s_x_prime = sample_without_replacement(&xs, sizes.s_x_prime, &mut rng)?;

    let names = |ps: &[(NodeIdx, NodeIdx)]| -> Vec<(String, String)> {
        ps.iter()
            .map(|&(x, y)| (pair.x().name(x).to_string(), pair.y().name(y).to_string()))
            .collect()
    };
    let train_names = names(&train);
    let holdout = MatcherHandle::holdout(cfg.matcher_holdout.clone(), train_names.clone())?;
    let sx_set: BTreeSet<NodeIdx> = s_x.iter().copied().collect();
    let sx_truth: Vec<_> = truth.restrict_x(&sx_set).iter().collect();
    let complete = MatcherHandle::complete(
        cfg.matcher_complete.clone().unwrap_or_else(|| cfg.matcher_holdout.clone()),
        train_names,
        names(&s_m),
        names(&sx_truth),
    )?;
    let m_hat_holdout = run_batch(&holdout, &pair)?;
    let m_hat_complete = run_batch(&complete, &pair)?;
    Ok(TrialData {
        pair,
        truth,
        m_hat_holdout,
        m_hat_complete,
        s_m,
        s_x,
        s_x_prime,
    })
}

/// Exact value of every check on one trial's data.
pub fn trial_truths(data: &TrialData) -> Result<BTreeMap<&'static str, Option<f64>>> {
    let (bp_h, br_h) = true_batch_metrics(&data.m_hat_holdout, &data.truth);
    let (bp_c, br_c) = true_batch_metrics(&data.m_hat_complete, &data.truth);
    let xs = || data.pair.x().nodes();
    let (qp_h, qr_h, e_h) = true_query_metrics(xs(), &data.m_hat_holdout, &data.truth)?;
    let (qp_c, qr_c, e_c) = true_query_metrics(xs(), &data.m_hat_complete, &data.truth)?;
    Ok(BTreeMap::from([
        ("holdout-batch-recall", br_h),
        ("holdout-batch-precision", bp_h),
        ("complete-batch-recall", br_c),
        ("complete-batch-precision", bp_c),
        ("holdout-query-precision", qp_h),
        ("holdout-query-recall", qr_h),
        ("complete-query-recall", qr_c),
        ("complete-query-precision", qp_c),
        ("holdout-error-rate", e_h),
        ("complete-error-rate", e_c),
    ]))
}

/// All ten reports for one method. Each check gets `delta` split equally
/// over its terms.
pub fn trial_reports(
    cfg: &ExperimentConfig,
    data: &TrialData,
    method: BoundMethod,
) -> Result<Vec<ValidationReport>> {
    let budget = |check: &str| -> Result<DeltaBudget> {
        let parts = CHECKS
            .iter()
            .find(|c| c.0 == check)
            .map(|c| c.1)
            .expect("known check");
        DeltaBudget::equal(cfg.delta, parts)
    };
    let x_size = data.pair.x().len() as u64;
    let s_x_counts: Vec<(NodeIdx, usize)> = data.s_x.iter().map(|&x| (x, data.truth.count(x))).collect();
    let k_y = data.truth.ky_cap().unwrap_or(1);
    let mut batch = BatchValidationInput::new(
        &data.pair,
        &data.m_hat_holdout,
        &data.s_m,
        &s_x_counts,
        k_y,
        method,
        budget("holdout-batch-recall")?,
    )
    .with_complete(&data.m_hat_complete);
    if cfg.match_total_known {
        batch = batch.with_match_total(MatchTotal::Known(data.truth.len() as u64));
    }
    let two = budget("holdout-batch-precision")?;
    let mut out = vec![
        holdout_batch_recall(&batch)?,
        holdout_batch_precision(&batch.clone().with_budget(two.clone()))?,
        complete_batch_recall(&batch.clone().with_budget(two.clone()))?,
        complete_batch_precision(&batch.clone().with_budget(two))?,
    ];

    let k_cap = [&data.m_hat_holdout, &data.m_hat_complete]
        .iter()
        .flat_map(|ms| ms.x_nodes().map(|x| ms.count(x)))
        .max()
        .unwrap_or(1)
        .max(1);
    let query = QueryValidationInput::new(
        x_size,
        &data.m_hat_holdout,
        CompleteSource::Distinct(&data.m_hat_complete),
        &data.truth,
        &data.s_x,
        &data.s_x_prime,
        k_cap,
        method,
        budget("holdout-query-precision")?,
    );
    let ev = QueryEvidence::gather(&query)?;
    out.push(ev.holdout_precision(method, &budget("holdout-query-precision")?)?);
    out.push(ev.holdout_recall(method, &budget("holdout-query-recall")?)?);
    out.push(ev.complete_recall(method, &budget("complete-query-recall")?)?);
    out.push(ev.complete_precision(method, &budget("complete-query-precision")?)?);
    out.push(ev.holdout_error_rate(method, &budget("holdout-error-rate")?)?);
    out.push(ev.complete_error_rate(method, &budget("complete-error-rate")?)?);
    Ok(out)
}

/// Runs one full trial and scores every bound against the truth.
pub fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<Vec<Outcome>> {
    let data = prepare_trial(cfg, trial)?;
    let truths = trial_truths(&data)?;
    let mut outcomes = Vec::new();
    for &method in &cfg.methods {
        for rep in trial_reports(cfg, &data, method)? {
            let truth = truths[rep.check.as_str()];
            let failed = match (truth, rep.direction) {
                (Some(t), Direction::Lower) => rep.bound > t,
                (Some(t), Direction::Upper) => rep.bound < t,
                (None, _) => false,
            };
            outcomes.push(Outcome {
                check: rep.check.clone(),
                method,
                bound: rep.bound,
                truth,
                vacuous: rep.is_vacuous(),
                failed,
            });
        }
    }
    Ok(outcomes)
}

/// Aggregated coverage of one check under one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub check: String,
    pub method: BoundMethod,
    pub delta: f64,
    /// Trials where the metric was defined.
    pub trials: u64,
    pub failures: u64,
    pub failure_rate: f64,
    /// `delta + 3 sqrt(delta (1 - delta) / trials)`.
    pub tolerance: f64,
    pub mean_bound: f64,
    pub mean_truth: f64,
    pub vacuous: u64,
}

impl CoverageRow {
    pub fn within_tolerance(&self) -> bool {
        self.failure_rate <= self.tolerance
    }
}

pub const CSV_COLUMNS: [&str; 10] = [
    "check",
    "method",
    "delta",
    "trials",
    "failures",
    "failure_rate",
    "tolerance",
    "mean_bound",
    "mean_truth",
    "vacuous",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub config: ExperimentConfig,
    pub rows: Vec<CoverageRow>,
}

impl CoverageTable {
    /// Folds per-trial outcomes, given in trial order, into rows sorted by
    /// `(check, method)`.
    pub fn from_outcomes(config: &ExperimentConfig, trials: &[Vec<Outcome>]) -> Self {
        #[derive(Default)]
        struct Acc {
            n: u64,
            failures: u64,
            vacuous: u64,
            bound: f64,
            truth: f64,
        }
        let mut acc: BTreeMap<(String, BoundMethod), Acc> = BTreeMap::new();
        for trial in trials {
            for o in trial {
                let a = acc.entry((o.check.clone(), o.method)).or_default();
                if let Some(t) = o.truth {
                    a.n += 1;
                    a.failures += u64::from(o.failed);
                    a.vacuous += u64::from(o.vacuous);
                    a.bound += o.bound;
                    a.truth += t;
                }
            }
        }
        let delta = config.delta;
        let rows = acc
            .into_iter()
            .map(|((check, method), a)| {
                let n = a.n.max(1) as f64;
                CoverageRow {
                    check,
                    method,
                    delta,
                    trials: a.n,
                    failures: a.failures,
                    failure_rate: a.failures as f64 / n,
                    tolerance: delta + 3.0 * (delta * (1.0 - delta) / n).sqrt(),
                    mean_bound: a.bound / n,
                    mean_truth: a.truth / n,
                    vacuous: a.vacuous,
                }
            })
            .collect();
        Self {
            config: config.clone(),
            rows,
        }
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        out.write_record(CSV_COLUMNS).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record([
                r.check.clone(),
                r.method.to_string(),
                r.delta.to_string(),
                r.trials.to_string(),
                r.failures.to_string(),
                r.failure_rate.to_string(),
                r.tolerance.to_string(),
                r.mean_bound.to_string(),
                r.mean_truth.to_string(),
                r.vacuous.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json(&self, mut w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, &serde_json::to_value(self)?)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn row(&self, check: &str, method: BoundMethod) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.check == check && r.method == method)
    }
}

/// Runs every trial, on at most `jobs` threads when given.
pub fn run_coverage(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<CoverageTable> {
    cfg.validate()?;
    let work = || -> Result<Vec<Vec<Outcome>>> {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(cfg, t).map_err(|e| Error::InvalidConfig(format!("trial {t}: {e}"))))
            .collect()
    };
    let outcomes = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    Ok(CoverageTable::from_outcomes(cfg, &outcomes))
}

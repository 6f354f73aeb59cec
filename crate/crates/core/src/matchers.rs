//! Baseline reconciliation algorithms.
//!
//! Both matchers are deterministic: every choice between candidates is
//! settled by the higher score first and then by `(x, y)` in node-id order.
//! A holdout handle sees only its training pairs; a complete handle adds the
//! validation samples to its seed set.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{MatchRole, MatchSet, NetworkPair, NodeIdx, PerNodeView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatcherKind {
    AttributeExact,
    Percolation,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedRule {
    #[default]
    None,
    /// Pair the k highest-degree nodes of each side by rank.
    TopDegree(usize),
    /// Fixed pairs by node id.
    Pairs(Vec<(String, String)>),
    /// The training pairs handed to the handle.
    VerifiedSample,
}

fn default_threshold() -> usize {
    2
}

fn default_max_iters() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub kind: MatcherKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attr_key: Option<String>,
    #[serde(default)]
    pub seeds: SeedRule,
    /// Matched-neighbor count needed to accept a pair.
    #[serde(default = "default_threshold")]
    pub threshold: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Ascending score cut points for simultaneous per-band validation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub score_cuts: Vec<f64>,
}

impl MatcherConfig {
    pub fn percolation(seeds: SeedRule, threshold: usize) -> Self {
        Self {
            kind: MatcherKind::Percolation,
            attr_key: None,
            seeds,
            threshold,
            max_iters: default_max_iters(),
            score_cuts: Vec::new(),
        }
    }

    pub fn attribute_exact(key: impl Into<String>) -> Self {
        Self {
            kind: MatcherKind::AttributeExact,
            attr_key: Some(key.into()),
            seeds: SeedRule::None,
            threshold: 1,
            max_iters: 1,
            score_cuts: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold < 1 {
            return Err(Error::InvalidConfig("threshold must be >= 1".into()));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.kind == MatcherKind::AttributeExact && self.attr_key.is_none() {
            return Err(Error::InvalidConfig("attribute-exact matcher needs attr_key".into()));
        }
        if self.score_cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("score_cuts must be strictly ascending".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleSource {
    Training,
    ValidationMatches,
    ValidationNodes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: SampleSource,
    pub pairs: usize,
}

/// A configured matcher plus the record of which samples shaped it.
#[derive(Debug, Clone, PartialEq)]
pub struct MatcherHandle {
    config: MatcherConfig,
    training: Vec<(String, String)>,
    extra_seeds: Vec<(String, String)>,
    trained_on: Vec<Provenance>,
}

impl MatcherHandle {
    /// Matcher built without access to any validation sample.
    pub fn holdout(config: MatcherConfig, training: Vec<(String, String)>) -> Result<Self> {
        config.validate()?;
        let trained_on = vec![Provenance {
            source: SampleSource::Training,
            pairs: training.len(),
        }];
        Ok(Self {
            config,
            training,
            extra_seeds: Vec::new(),
            trained_on,
        })
    }

    /// Matcher whose seeds also include the verified validation matches
    /// (`validation_matches`) and the actual matches of the validation node
    /// sample (`validation_nodes`).
    pub fn complete(
        config: MatcherConfig,
        training: Vec<(String, String)>,
        validation_matches: Vec<(String, String)>,
        validation_nodes: Vec<(String, String)>,
    ) -> Result<Self> {
        let mut h = Self::holdout(config, training)?;
        h.trained_on.push(Provenance {
            source: SampleSource::ValidationMatches,
            pairs: validation_matches.len(),
        });
        h.trained_on.push(Provenance {
            source: SampleSource::ValidationNodes,
            pairs: validation_nodes.len(),
        });
        h.extra_seeds = validation_matches;
        h.extra_seeds.extend(validation_nodes);
        Ok(h)
    }

    pub fn config(&self) -> &MatcherConfig {
        &self.config
    }

    pub fn trained_on(&self) -> &[Provenance] {
        &self.trained_on
    }

    pub fn is_holdout(&self) -> bool {
        self.trained_on
            .iter()
            .all(|p| p.source == SampleSource::Training)
    }

    fn resolve(pair: &NetworkPair, names: &[(String, String)]) -> Result<Vec<(NodeIdx, NodeIdx)>> {
        names
            .iter()
            .map(|(x, y)| Ok((pair.x().require(x)?, pair.y().require(y)?)))
            .collect()
    }

    /// Seed pairs for this pair of networks, identity pairs dropped in
    /// self-match mode.
    pub fn seeds(&self, pair: &NetworkPair) -> Result<BTreeSet<(NodeIdx, NodeIdx)>> {
        let mut seeds: BTreeSet<(NodeIdx, NodeIdx)> = match &self.config.seeds {
            SeedRule::None => BTreeSet::new(),
            SeedRule::TopDegree(k) => top_degree_seeds(pair, *k).into_iter().collect(),
            SeedRule::Pairs(p) => Self::resolve(pair, p)?.into_iter().collect(),
            SeedRule::VerifiedSample => Self::resolve(pair, &self.training)?.into_iter().collect(),
        };
        seeds.extend(Self::resolve(pair, &self.extra_seeds)?);
        if pair.self_match_mode() {
            seeds.retain(|(x, y)| x != y);
        }
        Ok(seeds)
    }

    fn role(&self) -> MatchRole {
        if self.is_holdout() {
            MatchRole::IdentifiedHoldout
        } else {
            MatchRole::Identified
        }
    }
}

/// Ranks each side by `(degree desc, id asc)` and pairs equal ranks.
pub fn top_degree_seeds(pair: &NetworkPair, k: usize) -> Vec<(NodeIdx, NodeIdx)> {
    let ranked = |net: &crate::graph::Network| {
        let mut v: Vec<NodeIdx> = net.nodes().collect();
        v.sort_by(|a, b| net.degree(*b).cmp(&net.degree(*a)).then(a.cmp(b)));
        v.truncate(k);
        v
    };
    let xs = ranked(pair.x());
    let ys = ranked(pair.y());
    xs.into_iter()
        .zip(ys)
        .filter(|(x, y)| !(pair.self_match_mode() && x == y))
        .collect()
}

/// One round of percolation.
///
/// A candidate `(x, y)` with neither side matched yet scores the number of
/// current pairs `(u, v)` with `u` adjacent to `x` and `v` adjacent to `y`.
/// Candidates reaching `threshold` are accepted greedily by descending
/// score, then ascending `(x, y)`, skipping any whose x or y was already
/// taken. Never removes a pair.
pub fn percolate_step(current: &MatchSet, pair: &NetworkPair, threshold: usize) -> MatchSet {
    let (gx, gy) = (pair.x(), pair.y());
    let mut used_x = vec![false; gx.len()];
    let mut used_y = vec![false; gy.len()];
    for (x, y) in current.iter() {
        used_x[x as usize] = true;
        used_y[y as usize] = true;
    }
    let mut keys: Vec<u64> = Vec::new();
    for (u, v) in current.iter() {
        for &x in gx.neighbors(u) {
            if used_x[x as usize] {
                continue;
            }
            for &y in gy.neighbors(v) {
                if used_y[y as usize] || (pair.self_match_mode() && x == y) {
                    continue;
                }
                keys.push(((x as u64) << 32) | y as u64);
            }
        }
    }
    keys.sort_unstable();
    let mut candidates: Vec<(usize, NodeIdx, NodeIdx)> = Vec::new();
    for run in keys.chunk_by(|a, b| a == b) {
        if run.len() >= threshold {
            let key = run[0];
            candidates.push((run.len(), (key >> 32) as NodeIdx, key as NodeIdx));
        }
    }
    candidates.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut next = current.clone();
    for (count, x, y) in candidates {
        if used_x[x as usize] || used_y[y as usize] {
            continue;
        }
        used_x[x as usize] = true;
        used_y[y as usize] = true;
        next.insert_unchecked(x, y);
        next.set_score(x, y, count as f64);
    }
    next
}

fn run_percolation(h: &MatcherHandle, pair: &NetworkPair) -> Result<MatchSet> {
    let mut current = MatchSet::new(h.role());
    for (x, y) in h.seeds(pair)? {
        current.insert_checked(pair, x, y)?;
        current.set_score(x, y, f64::INFINITY);
    }
    for _ in 0..h.config.max_iters {
        let next = percolate_step(&current, pair, h.config.threshold);
        let grew = next.len() > current.len();
        current = next;
        if !grew {
            break;
        }
    }
    Ok(current)
}

fn attr_index(pair: &NetworkPair, key: &str) -> HashMap<String, Vec<NodeIdx>> {
    let mut index: HashMap<String, Vec<NodeIdx>> = HashMap::new();
    for y in pair.y().nodes() {
        if let Some(v) = pair.y().attr(y, key) {
            index.entry(v.to_string()).or_default().push(y);
        }
    }
    index
}

fn attribute_view(
    pair: &NetworkPair,
    key: &str,
    index: &HashMap<String, Vec<NodeIdx>>,
    seeds: &BTreeSet<(NodeIdx, NodeIdx)>,
    x: NodeIdx,
) -> PerNodeView {
    let seeded: Vec<NodeIdx> = seeds
        .range((x, NodeIdx::MIN)..=(x, NodeIdx::MAX))
        .map(|&(_, y)| y)
        .collect();
    if !seeded.is_empty() {
        return PerNodeView::new(x, seeded);
    }
    let found = pair
        .x()
        .attr(x, key)
        .and_then(|v| index.get(v))
        .map(|ys| {
            ys.iter()
                .copied()
                .filter(|&y| !(pair.self_match_mode() && x == y))
                .collect()
        })
        .unwrap_or_default();
    PerNodeView::new(x, found)
}

fn run_attribute(h: &MatcherHandle, pair: &NetworkPair) -> Result<MatchSet> {
    let key = h
        .config
        .attr_key
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("attribute-exact matcher needs attr_key".into()))?;
    let index = attr_index(pair, key);
    let seeds = h.seeds(pair)?;
    let mut out = MatchSet::new(h.role());
    for x in pair.x().nodes() {
        for y in attribute_view(pair, key, &index, &seeds, x).matched {
            out.insert_checked(pair, x, y)?;
            out.set_score(x, y, 1.0);
        }
    }
    Ok(out)
}

/// Computes every identified match.
pub fn run_batch(h: &MatcherHandle, pair: &NetworkPair) -> Result<MatchSet> {
    match h.config.kind {
        MatcherKind::AttributeExact => run_attribute(h, pair),
        MatcherKind::Percolation => run_percolation(h, pair),
    }
}

/// Anything that can report the identified matches of one x node.
pub trait QuerySource: Sync {
    fn query(&self, x: NodeIdx) -> Result<PerNodeView>;
}

impl QuerySource for MatchSet {
    fn query(&self, x: NodeIdx) -> Result<PerNodeView> {
        Ok(self.view(x))
    }
}

/// On-demand matcher bound to one network pair, counting queries.
///
/// Attribute matching answers each query locally. Percolation is a global
/// fixed point, so the first query runs it once and later queries read the
/// cached result.
pub struct QueryMatcher<'a> {
    handle: &'a MatcherHandle,
    pair: &'a NetworkPair,
    batch: OnceLock<Result<MatchSet, String>>,
    attr: OnceLock<(HashMap<String, Vec<NodeIdx>>, BTreeSet<(NodeIdx, NodeIdx)>)>,
    queries: AtomicU64,
}

impl<'a> QueryMatcher<'a> {
    pub fn new(handle: &'a MatcherHandle, pair: &'a NetworkPair) -> Self {
        Self {
            handle,
            pair,
            batch: OnceLock::new(),
            attr: OnceLock::new(),
            queries: AtomicU64::new(0),
        }
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn query_name(&self, x: &str) -> Result<PerNodeView> {
        self.query(self.pair.x().require(x)?)
    }
}

impl QuerySource for QueryMatcher<'_> {
    fn query(&self, x: NodeIdx) -> Result<PerNodeView> {
        if !self.pair.x().contains(x) {
            return Err(Error::UnknownNode(format!("x index {x}")));
        }
        self.queries.fetch_add(1, Ordering::Relaxed);
        match self.handle.config.kind {
            MatcherKind::Percolation => {
                let batch = self
                    .batch
                    .get_or_init(|| run_batch(self.handle, self.pair).map_err(|e| e.to_string()));
                match batch {
                    Ok(ms) => Ok(ms.view(x)),
                    Err(msg) => Err(Error::InvalidConfig(msg.clone())),
                }
            }
            MatcherKind::AttributeExact => {
                let key = self.handle.config.attr_key.as_deref().ok_or_else(|| {
                    Error::InvalidConfig("attribute-exact matcher needs attr_key".into())
                })?;
                if self.attr.get().is_none() {
                    let seeds = self.handle.seeds(self.pair)?;
                    let _ = self.attr.set((attr_index(self.pair, key), seeds));
                }
                let (index, seeds) = self.attr.get().expect("initialized above");
                Ok(attribute_view(self.pair, key, index, seeds, x))
            }
        }
    }
}

/// Identified matches of the x node named `x`.
pub fn run_query(h: &MatcherHandle, pair: &NetworkPair, x: &str) -> Result<PerNodeView> {
    QueryMatcher::new(h, pair).query_name(x)
}

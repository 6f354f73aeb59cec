use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NetworkPair, NodeIdx};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchRole {
    /// Ground truth `M`.
    Actual,
    /// Output of a complete matcher.
    Identified,
    /// Output of a holdout matcher.
    IdentifiedHoldout,
}

/// A set of `(x, y)` node pairs, optionally carrying a score per pair.
///
/// Pairs are stored as indices into the owning [`NetworkPair`]; build them
/// through the checked constructors so self-match and cap rules hold.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    pairs: BTreeSet<(NodeIdx, NodeIdx)>,
    scores: BTreeMap<(NodeIdx, NodeIdx), f64>,
    role: MatchRole,
    ky_cap: Option<usize>,
}

/// The identified or actual partners of one x node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerNodeView {
    pub node: NodeIdx,
    /// Sorted, deduplicated y nodes.
    pub matched: Vec<NodeIdx>,
}

impl PerNodeView {
    pub fn new(node: NodeIdx, mut matched: Vec<NodeIdx>) -> Self {
        matched.sort_unstable();
        matched.dedup();
        Self { node, matched }
    }

    pub fn empty(node: NodeIdx) -> Self {
        Self {
            node,
            matched: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.matched.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matched.is_empty()
    }

    pub fn contains(&self, y: NodeIdx) -> bool {
        self.matched.binary_search(&y).is_ok()
    }

    pub fn intersection_len(&self, other: &PerNodeView) -> usize {
        self.matched.iter().filter(|y| other.contains(**y)).count()
    }

    /// `|self \ other|`
    pub fn difference_len(&self, other: &PerNodeView) -> usize {
        self.len() - self.intersection_len(other)
    }
}

impl MatchSet {
    pub fn new(role: MatchRole) -> Self {
        Self {
            pairs: BTreeSet::new(),
            scores: BTreeMap::new(),
            role,
            ky_cap: None,
        }
    }

    pub fn from_pairs(
        pair: &NetworkPair,
        role: MatchRole,
        pairs: impl IntoIterator<Item = (NodeIdx, NodeIdx)>,
    ) -> Result<Self> {
        let mut ms = Self::new(role);
        for (x, y) in pairs {
            ms.insert_checked(pair, x, y)?;
        }
        Ok(ms)
    }

    pub fn from_names<'a>(
        pair: &NetworkPair,
        role: MatchRole,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut ms = Self::new(role);
        for (x, y) in pairs {
            let (x, y) = (pair.x().require(x)?, pair.y().require(y)?);
            ms.insert_checked(pair, x, y)?;
        }
        Ok(ms)
    }

    /// Declares the per-x cap on actual matches and validates it.
    pub fn with_cap(mut self, pair: &NetworkPair, cap: usize) -> Result<Self> {
        self.ky_cap = Some(cap);
        self.check_cap(pair)?;
        Ok(self)
    }

    fn check_cap(&self, pair: &NetworkPair) -> Result<()> {
        let Some(cap) = self.ky_cap else {
            return Ok(());
        };
        for x in self.x_nodes() {
            let count = self.count(x);
            if count > cap {
                return Err(Error::KyViolated {
                    node: pair.x().name(x).to_string(),
                    count,
                    cap,
                });
            }
        }
        Ok(())
    }

    pub fn role(&self) -> MatchRole {
        self.role
    }

    pub fn ky_cap(&self) -> Option<usize> {
        self.ky_cap
    }

    pub fn with_role(mut self, role: MatchRole) -> Self {
        self.role = role;
        self
    }

    /// Inserts after checking membership and the self-match rule.
    pub fn insert_checked(&mut self, pair: &NetworkPair, x: NodeIdx, y: NodeIdx) -> Result<bool> {
        if !pair.x().contains(x) {
            return Err(Error::UnknownNode(format!("x index {x}")));
        }
        if !pair.y().contains(y) {
            return Err(Error::UnknownNode(format!("y index {y}")));
        }
        if pair.self_match_mode() && x == y {
            return Err(Error::IdentityPair(pair.x().name(x).to_string()));
        }
        Ok(self.pairs.insert((x, y)))
    }

    pub(crate) fn insert_unchecked(&mut self, x: NodeIdx, y: NodeIdx) -> bool {
        self.pairs.insert((x, y))
    }

    pub fn set_score(&mut self, x: NodeIdx, y: NodeIdx, score: f64) {
        if self.pairs.contains(&(x, y)) {
            self.scores.insert((x, y), score);
        }
    }

    pub fn score(&self, x: NodeIdx, y: NodeIdx) -> Option<f64> {
        self.scores.get(&(x, y)).copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, x: NodeIdx, y: NodeIdx) -> bool {
        self.pairs.contains(&(x, y))
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeIdx, NodeIdx)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn partners(&self, x: NodeIdx) -> impl Iterator<Item = NodeIdx> + '_ {
        self.pairs
            .range((x, NodeIdx::MIN)..=(x, NodeIdx::MAX))
            .map(|&(_, y)| y)
    }

    pub fn view(&self, x: NodeIdx) -> PerNodeView {
        PerNodeView {
            node: x,
            matched: self.partners(x).collect(),
        }
    }

    /// Number of pairs containing `x`.
    pub fn count(&self, x: NodeIdx) -> usize {
        self.partners(x).count()
    }

    /// Distinct x nodes appearing in at least one pair.
    pub fn x_nodes(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        let mut last = None;
        self.pairs.iter().filter_map(move |&(x, _)| {
            if last == Some(x) {
                None
            } else {
                last = Some(x);
                Some(x)
            }
        })
    }

    pub fn intersection_len(&self, other: &MatchSet) -> usize {
        self.pairs.intersection(&other.pairs).count()
    }

    /// `|self \ other|`
    pub fn difference_len(&self, other: &MatchSet) -> usize {
        self.pairs.difference(&other.pairs).count()
    }

    /// Pairs as `(x name, y name)`, in index order.
    pub fn to_names(&self, pair: &NetworkPair) -> Vec<(String, String)> {
        self.pairs
            .iter()
            .map(|&(x, y)| (pair.x().name(x).to_string(), pair.y().name(y).to_string()))
            .collect()
    }

    pub fn union_with(&mut self, other: &MatchSet) {
        self.pairs.extend(other.pairs.iter().copied());
    }

    /// Restriction to pairs whose x lies in `xs`.
    pub fn restrict_x(&self, xs: &BTreeSet<NodeIdx>) -> MatchSet {
        let pairs = self
            .pairs
            .iter()
            .filter(|(x, _)| xs.contains(x))
            .copied()
            .collect();
        let scores = self
            .scores
            .iter()
            .filter(|((x, _), _)| xs.contains(x))
            .map(|(k, v)| (*k, *v))
            .collect();
        MatchSet {
            pairs,
            scores,
            role: self.role,
            ky_cap: self.ky_cap,
        }
    }

    /// Splits pairs into `cuts.len() + 1` score bands: band `i` holds pairs
    /// with `cuts[i-1] <= score < cuts[i]`. Pairs without a score land in
    /// band 0. `cuts` must be ascending.
    pub fn partition_by_score(&self, cuts: &[f64]) -> Result<Vec<MatchSet>> {
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("score cuts must be strictly ascending".into()));
        }
        let mut bands: Vec<MatchSet> = (0..=cuts.len())
            .map(|_| MatchSet {
                ky_cap: self.ky_cap,
                ..MatchSet::new(self.role)
            })
            .collect();
        for &(x, y) in &self.pairs {
            let score = self.score(x, y);
            let band = match score {
                Some(s) => cuts.iter().take_while(|&&c| c <= s).count(),
                None => 0,
            };
            bands[band].pairs.insert((x, y));
            if let Some(s) = score {
                bands[band].scores.insert((x, y), s);
            }
        }
        Ok(bands)
    }

    /// Reads `x<TAB>y[<TAB>score]` lines; `#` lines are comments.
    pub fn parse(
        reader: impl Read,
        pair: &NetworkPair,
        role: MatchRole,
        ky_cap: Option<usize>,
    ) -> Result<Self> {
        let mut ms = Self::new(role);
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(fields.len() == 2 || fields.len() == 3) || fields[0].is_empty() || fields[1].is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected x<TAB>y".into(),
                });
            }
            let x = pair.x().require(fields[0])?;
            let y = pair.y().require(fields[1])?;
            ms.insert_checked(pair, x, y)?;
            if let Some(raw) = fields.get(2) {
                let score: f64 = raw.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad score {raw:?}"),
                })?;
                ms.scores.insert((x, y), score);
            }
        }
        match ky_cap {
            Some(cap) => ms.with_cap(pair, cap),
            None => Ok(ms),
        }
    }

    pub fn load(
        path: impl AsRef<Path>,
        pair: &NetworkPair,
        role: MatchRole,
        ky_cap: Option<usize>,
    ) -> Result<Self> {
        Self::parse(File::open(path)?, pair, role, ky_cap)
    }

    pub fn write(&self, writer: impl Write, pair: &NetworkPair, with_scores: bool) -> Result<()> {
        let mut w = BufWriter::new(writer);
        for &(x, y) in &self.pairs {
            let (xn, yn) = (pair.x().name(x), pair.y().name(y));
            match self.scores.get(&(x, y)) {
                Some(s) if with_scores => writeln!(w, "{xn}\t{yn}\t{s}")?,
                _ => writeln!(w, "{xn}\t{yn}")?,
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, pair: &NetworkPair, with_scores: bool) -> Result<()> {
        self.write(File::create(path)?, pair, with_scores)
    }
}

/// Per-node view of `ms` for the x node named `x`.
pub fn matches_of(ms: &MatchSet, pair: &NetworkPair, x: &str) -> Result<PerNodeView> {
    Ok(ms.view(pair.x().require(x)?))
}

/// `m(x)`, checked against the declared cap when `ms` is ground truth.
pub fn match_count(ms: &MatchSet, pair: &NetworkPair, x: NodeIdx) -> Result<usize> {
    if !pair.x().contains(x) {
        return Err(Error::UnknownNode(format!("x index {x}")));
    }
    let count = ms.count(x);
    if let (MatchRole::Actual, Some(cap)) = (ms.role, ms.ky_cap) {
        if count > cap {
            return Err(Error::KyViolated {
                node: pair.x().name(x).to_string(),
                count,
                cap,
            });
        }
    }
    Ok(count)
}

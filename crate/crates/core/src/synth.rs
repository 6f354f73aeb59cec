//! Correlated network pairs with known ground truth.
//!
//! One base graph is drawn on `n_entities` nodes. Each copy then keeps every
//! node with probability `1 - node_drop` and every surviving edge with
//! probability `edge_retain`, independently of the other copy. The ground
//! truth is the identity correspondence on entities present in both copies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{MatchRole, MatchSet, Network, NetworkPair};
use crate::sampling::seeded_rng;

/// Attribute key holding each node's entity identifier.
pub const UID_ATTR: &str = "uid";

/// Suffix appended to a corrupted identifier.
pub const NOISE_MARKER: &str = "~";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseModel {
    ErdosRenyi { p: f64 },
    PreferentialAttachment { m_edges: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_entities: usize,
    pub base_model: BaseModel,
    pub edge_retain_x: f64,
    pub edge_retain_y: f64,
    pub node_drop_x: f64,
    pub node_drop_y: f64,
    /// Probability that a node's identifier is corrupted in the y copy.
    pub attr_noise: f64,
    pub rng_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_entities: 2000,
            base_model: BaseModel::ErdosRenyi { p: 0.005 },
            edge_retain_x: 0.8,
            edge_retain_y: 0.8,
            node_drop_x: 0.1,
            node_drop_y: 0.1,
            attr_noise: 0.0,
            rng_seed: 0,
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} = {p} is not a probability")))
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_entities < 2 {
            return Err(Error::InvalidConfig("n_entities must be >= 2".into()));
        }
        check_prob("edge_retain_x", self.edge_retain_x)?;
        check_prob("edge_retain_y", self.edge_retain_y)?;
        check_prob("node_drop_x", self.node_drop_x)?;
        check_prob("node_drop_y", self.node_drop_y)?;
        check_prob("attr_noise", self.attr_noise)?;
        match self.base_model {
            BaseModel::ErdosRenyi { p } => check_prob("p", p)?,
            BaseModel::PreferentialAttachment { m_edges } => {
                if m_edges == 0 || m_edges >= self.n_entities {
                    return Err(Error::InvalidConfig(format!(
                        "m_edges must be in 1..{}",
                        self.n_entities
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Entity names `n0007`-style, zero padded so name order is index order.
pub fn entity_name(idx: usize, n_entities: usize) -> String {
    let width = (n_entities.max(2) - 1).to_string().len();
    format!("n{idx:0width$}")
}

/// Erdos-Renyi edges by geometric skipping over the `i > j` pairs.
fn erdos_renyi<R: Rng>(n: usize, p: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    if p <= 0.0 {
        return edges;
    }
    if p >= 1.0 {
        for v in 1..n {
            for w in 0..v {
                edges.push((w, v));
            }
        }
        return edges;
    }
    let log_q = (1.0 - p).ln();
    let (mut v, mut w): (usize, i64) = (1, -1);
    while v < n {
        let r: f64 = rng.random();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edges.push((w as usize, v));
        }
    }
    edges
}

/// Preferential attachment: a clique on the first `m + 1` nodes, then each
/// new node links to `m` distinct earlier nodes chosen proportionally to
/// degree.
fn preferential_attachment<R: Rng>(n: usize, m: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    let mut endpoints: Vec<usize> = Vec::new();
    let core = (m + 1).min(n);
    for v in 1..core {
        for w in 0..v {
            edges.push((w, v));
            endpoints.extend([w, v]);
        }
    }
    let mut targets = Vec::with_capacity(m);
    for v in core..n {
        targets.clear();
        while targets.len() < m {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, v));
            endpoints.extend([t, v]);
        }
    }
    edges
}

fn sample_copy<R: Rng>(
    cfg: &GeneratorConfig,
    base: &[(usize, usize)],
    drop: f64,
    retain: f64,
    corrupt: bool,
    rng: &mut R,
) -> Result<(Network, Vec<bool>)> {
    let n = cfg.n_entities;
    let alive: Vec<bool> = (0..n).map(|_| rng.random::<f64>() >= drop).collect();
    let mut b = Network::builder();
    for (i, _) in alive.iter().enumerate().filter(|(_, a)| **a) {
        let name = entity_name(i, n);
        let mut uid = i.to_string();
        if corrupt && rng.random::<f64>() < cfg.attr_noise {
            uid.push_str(NOISE_MARKER);
        }
        b.node(name.clone())?;
        b.attr(name, UID_ATTR, uid)?;
    }
    for &(u, v) in base {
        let keep = rng.random::<f64>() < retain;
        if keep && alive[u] && alive[v] {
            b.edge(entity_name(u, n), entity_name(v, n))?;
        }
    }
    Ok((b.build()?, alive))
}

/// Builds the two copies and the ground-truth identity matches.
pub fn generate_pair(cfg: &GeneratorConfig) -> Result<(NetworkPair, MatchSet)> {
    cfg.validate()?;
    let mut rng = seeded_rng(cfg.rng_seed);
    let base = match cfg.base_model {
        BaseModel::ErdosRenyi { p } => erdos_renyi(cfg.n_entities, p, &mut rng),
        BaseModel::PreferentialAttachment { m_edges } => {
            preferential_attachment(cfg.n_entities, m_edges, &mut rng)
        }
    };
    let (x, alive_x) = sample_copy(cfg, &base, cfg.node_drop_x, cfg.edge_retain_x, false, &mut rng)?;
    let (y, alive_y) = sample_copy(cfg, &base, cfg.node_drop_y, cfg.edge_retain_y, true, &mut rng)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::Degenerate("every node was dropped from one copy".into()));
    }
    let pair = NetworkPair::new(x, y);
    let mut truth = MatchSet::new(MatchRole::Actual);
    for i in (0..cfg.n_entities).filter(|&i| alive_x[i] && alive_y[i]) {
        let name = entity_name(i, cfg.n_entities);
        let (xi, yi) = (pair.x().require(&name)?, pair.y().require(&name)?);
        truth.insert_checked(&pair, xi, yi)?;
    }
    let truth = truth.with_cap(&pair, 1)?;
    Ok((pair, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> GeneratorConfig {
        GeneratorConfig {
            n_entities: n,
            rng_seed: 11,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn lossless_copies_are_identical() {
        let c = GeneratorConfig {
            edge_retain_x: 1.0,
            edge_retain_y: 1.0,
            node_drop_x: 0.0,
            node_drop_y: 0.0,
            base_model: BaseModel::ErdosRenyi { p: 0.05 },
            ..cfg(300)
        };
        let (pair, truth) = generate_pair(&c).unwrap();
        assert_eq!(pair.x(), pair.y());
        assert_eq!(truth.len(), 300);
        assert!(truth.iter().all(|(x, y)| x == y));
    }

    #[test]
    fn all_dropped_is_degenerate() {
        let c = GeneratorConfig { node_drop_x: 1.0, ..cfg(50) };
        assert!(matches!(generate_pair(&c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn seed_determinism() {
        let c = GeneratorConfig {
            base_model: BaseModel::PreferentialAttachment { m_edges: 3 },
            attr_noise: 0.2,
            ..cfg(400)
        };
        let (a, ta) = generate_pair(&c).unwrap();
        let (b, tb) = generate_pair(&c).unwrap();
        assert_eq!(a.x(), b.x());
        assert_eq!(a.y(), b.y());
        assert_eq!(ta, tb);
        let (d, _) = generate_pair(&GeneratorConfig { rng_seed: 12, ..c }).unwrap();
        assert_ne!(a.x(), d.x());
    }

    #[test]
    fn truth_joins_same_entity_survivors() {
        let (pair, truth) = generate_pair(&cfg(1000)).unwrap();
        for (x, y) in truth.iter() {
            assert_eq!(pair.x().name(x), pair.y().name(y));
        }
        let both = pair
            .x()
            .names()
            .iter()
            .filter(|n| pair.y().index_of(n).is_some())
            .count();
        assert_eq!(truth.len(), both);
        // drops on the y side leave unmatched x nodes
        assert!(truth.len() < pair.x().len());
    }

    #[test]
    fn er_density_is_plausible() {
        let mut rng = seeded_rng(4);
        let n = 2000;
        let p = 0.005;
        let edges = erdos_renyi(n, p, &mut rng);
        let expected = p * (n * (n - 1) / 2) as f64;
        let sd = (expected * (1.0 - p)).sqrt();
        assert!((edges.len() as f64 - expected).abs() < 4.0 * sd);
        assert!(edges.iter().all(|&(w, v)| w < v && v < n));
        let mut sorted = edges.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), edges.len());
    }

    #[test]
    fn pa_edge_count() {
        let edges = preferential_attachment(100, 3, &mut seeded_rng(1));
        assert_eq!(edges.len(), 6 + 96 * 3);
    }

    #[test]
    fn noise_corrupts_y_only() {
        let c = GeneratorConfig {
            attr_noise: 1.0,
            node_drop_x: 0.0,
            node_drop_y: 0.0,
            ..cfg(20)
        };
        let (pair, _) = generate_pair(&c).unwrap();
        assert!(pair.x().nodes().all(|v| !pair.x().attr(v, UID_ATTR).unwrap().ends_with(NOISE_MARKER)));
        assert!(pair.y().nodes().all(|v| pair.y().attr(v, UID_ATTR).unwrap().ends_with(NOISE_MARKER)));
    }

    #[test]
    fn invalid_configs() {
        assert!(generate_pair(&cfg(1)).is_err());
        assert!(generate_pair(&GeneratorConfig { edge_retain_x: 1.5, ..cfg(10) }).is_err());
        let c = GeneratorConfig {
            base_model: BaseModel::PreferentialAttachment { m_edges: 10 },
            ..cfg(10)
        };
        assert!(generate_pair(&c).is_err());
    }

    #[test]
    fn config_json_shape() {
        let json = serde_json::to_value(cfg(10)).unwrap();
        assert_eq!(json["base_model"]["erdos-renyi"]["p"], 0.005);
    }
}

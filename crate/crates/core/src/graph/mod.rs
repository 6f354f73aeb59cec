//! Node universes, edges, attributes and match sets.

mod matches;
mod network;

use std::sync::Arc;

pub use matches::{match_count, matches_of, MatchRole, MatchSet, PerNodeView};
pub use network::{Network, NetworkBuilder, NodeIdx};

/// The two networks being reconciled. In self-match mode both sides are
/// the same universe and identity pairs are illegal in every match set.
#[derive(Debug, Clone)]
pub struct NetworkPair {
    x: Arc<Network>,
    y: Arc<Network>,
    self_match: bool,
}

impl NetworkPair {
    pub fn new(x: Network, y: Network) -> Self {
        Self {
            x: Arc::new(x),
            y: Arc::new(y),
            self_match: false,
        }
    }

    /// Field matching within a single universe.
    pub fn self_match(net: Network) -> Self {
        let net = Arc::new(net);
        Self {
            x: Arc::clone(&net),
            y: net,
            self_match: true,
        }
    }

    pub fn x(&self) -> &Network {
        &self.x
    }

    pub fn y(&self) -> &Network {
        &self.y
    }

    pub fn self_match_mode(&self) -> bool {
        self.self_match
    }
}

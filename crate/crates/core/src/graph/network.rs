use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Position of a node in its network's lexicographically sorted node list.
/// Comparing indices is therefore the same as comparing node ids.
pub type NodeIdx = u32;

/// Undirected simple graph with flat string attributes per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    names: Vec<String>,
    index: HashMap<String, NodeIdx>,
    adj: Vec<Vec<NodeIdx>>,
    attrs: Vec<BTreeMap<String, String>>,
    edge_count: usize,
}

#[derive(Debug, Default, Clone)]
pub struct NetworkBuilder {
    nodes: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
    attrs: BTreeMap<String, BTreeMap<String, String>>,
}

fn check_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidConfig(format!("invalid node id {id:?}")));
    }
    Ok(())
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node(&mut self, id: impl Into<String>) -> Result<&mut Self> {
        let id = id.into();
        check_id(&id)?;
        self.nodes.insert(id);
        Ok(self)
    }

    pub fn edge(&mut self, u: impl Into<String>, v: impl Into<String>) -> Result<&mut Self> {
        let (u, v) = (u.into(), v.into());
        check_id(&u)?;
        check_id(&v)?;
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        self.nodes.insert(u.clone());
        self.nodes.insert(v.clone());
        let key = if u < v { (u, v) } else { (v, u) };
        self.edges.insert(key);
        Ok(self)
    }

    pub fn attr(
        &mut self,
        node: impl Into<String>,
        key: impl Into<String>,
        value: impl Into<String>,
    ) -> Result<&mut Self> {
        let node = node.into();
        check_id(&node)?;
        self.attrs
            .entry(node)
            .or_default()
            .insert(key.into(), value.into());
        Ok(self)
    }

    /// Attributes must refer to nodes introduced by `node` or `edge`.
    pub fn build(self) -> Result<Network> {
        if let Some(unknown) = self.attrs.keys().find(|n| !self.nodes.contains(*n)) {
            return Err(Error::UnknownNode(unknown.clone()));
        }
        let names: Vec<String> = self.nodes.into_iter().collect();
        let index: HashMap<String, NodeIdx> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as NodeIdx))
            .collect();
        let mut adj = vec![Vec::new(); names.len()];
        for (u, v) in &self.edges {
            let (a, b) = (index[u], index[v]);
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let mut attrs = vec![BTreeMap::new(); names.len()];
        for (node, kv) in self.attrs {
            attrs[index[&node] as usize] = kv;
        }
        Ok(Network {
            names,
            index,
            adj,
            attrs,
            edge_count: self.edges.len(),
        })
    }
}

impl Network {
    pub fn builder() -> NetworkBuilder {
        NetworkBuilder::new()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn name(&self, idx: NodeIdx) -> &str {
        &self.names[idx as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, id: &str) -> Option<NodeIdx> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<NodeIdx> {
        self.index_of(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn contains(&self, idx: NodeIdx) -> bool {
        (idx as usize) < self.names.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeIdx> + '_ {
        0..self.names.len() as NodeIdx
    }

    pub fn neighbors(&self, idx: NodeIdx) -> &[NodeIdx] {
        &self.adj[idx as usize]
    }

    pub fn degree(&self, idx: NodeIdx) -> usize {
        self.adj[idx as usize].len()
    }

    pub fn attrs(&self, idx: NodeIdx) -> &BTreeMap<String, String> {
        &self.attrs[idx as usize]
    }

    pub fn attr(&self, idx: NodeIdx, key: &str) -> Option<&str> {
        self.attrs[idx as usize].get(key).map(String::as_str)
    }

    /// Edges as `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeIdx, NodeIdx)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, list)| {
            let u = u as NodeIdx;
            list.iter().filter(move |&&v| u < v).map(move |&v| (u, v))
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(File::open(path)?)
    }

    /// Reads the edge TSV format.
    ///
    /// * `u<TAB>v` adds an undirected edge.
    /// * `#node<TAB>id` declares a node. Once any node is declared, edge and
    ///   attribute endpoints must be declared as well.
    /// * `#attr<TAB>node<TAB>key<TAB>value` sets an attribute.
    /// * any other `#` line is a comment.
    pub fn parse(reader: impl Read) -> Result<Self> {
        let mut declared: BTreeSet<String> = BTreeSet::new();
        let mut edges: Vec<(usize, String, String)> = Vec::new();
        let mut attrs: Vec<(usize, String, String, String)> = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = |msg: &str| Error::Parse {
                line: line_no,
                msg: msg.to_string(),
            };
            match fields[0] {
                "#node" => {
                    if fields.len() != 2 || fields[1].is_empty() {
                        return Err(bad("expected #node<TAB>id"));
                    }
                    declared.insert(fields[1].to_string());
                }
                "#attr" => {
                    if fields.len() != 4 || fields[1].is_empty() || fields[2].is_empty() {
                        return Err(bad("expected #attr<TAB>node<TAB>key<TAB>value"));
                    }
                    attrs.push((
                        line_no,
                        fields[1].to_string(),
                        fields[2].to_string(),
                        fields[3].to_string(),
                    ));
                }
                f if f.starts_with('#') => {}
                _ => {
                    if fields.len() != 2 || fields[0].is_empty() || fields[1].is_empty() {
                        return Err(bad("expected u<TAB>v"));
                    }
                    edges.push((line_no, fields[0].to_string(), fields[1].to_string()));
                }
            }
        }
        let strict = !declared.is_empty();
        let mut builder = NetworkBuilder::new();
        for id in &declared {
            builder.node(id.clone())?;
        }
        for (line, u, v) in edges {
            if strict {
                for end in [&u, &v] {
                    if !declared.contains(end) {
                        return Err(Error::UnknownNode(format!("{end} (line {line})")));
                    }
                }
            }
            builder.edge(u, v)?;
        }
        for (line, node, key, value) in attrs {
            if !builder.nodes.contains(&node) {
                return Err(Error::UnknownNode(format!("{node} (line {line})")));
            }
            builder.attr(node, key, value)?;
        }
        builder.build()
    }

    /// Writes the canonical edge TSV: node declarations, attributes, edges.
    pub fn write(&self, writer: impl Write) -> Result<()> {
        let mut w = BufWriter::new(writer);
        for name in &self.names {
            writeln!(w, "#node\t{name}")?;
        }
        for (i, kv) in self.attrs.iter().enumerate() {
            for (k, v) in kv {
                writeln!(w, "#attr\t{}\t{k}\t{v}", self.names[i])?;
            }
        }
        for (u, v) in self.edges() {
            writeln!(w, "{}\t{}", self.name(u), self.name(v))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_edges() {
        let net = Network::parse("a\tb\nb\tc\n".as_bytes()).unwrap();
        assert_eq!(net.len(), 3);
        assert_eq!(net.edge_count(), 2);
        assert_eq!(net.neighbors(net.require("b").unwrap()), &[0, 2]);
    }

    #[test]
    fn duplicate_edges_collapse() {
        let net = Network::parse("a\tb\nb\ta\na\tb\n".as_bytes()).unwrap();
        assert_eq!(net.edge_count(), 1);
    }

    #[test]
    fn self_loop_rejected() {
        assert!(matches!(
            Network::parse("a\ta\n".as_bytes()),
            Err(Error::SelfLoop(n)) if n == "a"
        ));
    }

    #[test]
    fn malformed_line_reports_number() {
        match Network::parse("a\tb\n# comment\na b c\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn attributes_merge_by_node() {
        let src = "a\tb\n#attr\ta\tname\tann\n#attr\ta\tcity\tx\n";
        let net = Network::parse(src.as_bytes()).unwrap();
        let a = net.require("a").unwrap();
        assert_eq!(net.attr(a, "name"), Some("ann"));
        assert_eq!(net.attrs(a).len(), 2);
    }

    #[test]
    fn dangling_endpoints_rejected() {
        let src = "#node\ta\n#node\tb\na\tb\nb\tz\n";
        assert!(matches!(
            Network::parse(src.as_bytes()),
            Err(Error::UnknownNode(_))
        ));
        assert!(matches!(
            Network::parse("a\tb\n#attr\tq\tk\tv\n".as_bytes()),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn isolated_nodes_survive_round_trip() {
        let mut b = Network::builder();
        b.node("lonely").unwrap();
        b.edge("a", "b").unwrap();
        b.attr("lonely", "uid", "7").unwrap();
        let net = b.build().unwrap();
        let mut buf = Vec::new();
        net.write(&mut buf).unwrap();
        let back = Network::parse(buf.as_slice()).unwrap();
        assert_eq!(back, net);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(buf, again);
    }
}

//! Undirected simple graphs in compressed adjacency form, edge-list I/O,
//! ground-truth communities, train/test edge splits and BFS distances.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Hop distance marking an unreachable node.
pub const UNREACHABLE: u32 = u32::MAX;

/// Unordered node pair, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
}

impl Edge {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            Edge { u: a, v: b }
        } else {
            Edge { u: b, v: a }
        }
    }

    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }
}

/// Immutable undirected graph without self-loops or parallel edges.
#[derive(Debug, Clone)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    edge_index: HashMap<Edge, usize>,
    node_ids: Option<Vec<String>>,
}

impl Graph {
    /// Builds a graph on `num_nodes` nodes. Self-loops and duplicates are
    /// dropped; edges are stored in sorted order, which fixes edge indices.
    pub fn from_edges<I>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut list = Vec::new();
        for (a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::Shape(format!(
                    "edge ({a}, {b}) out of range for {num_nodes} nodes"
                )));
            }
            let e = Edge::new(a, b);
            if !e.is_loop() {
                list.push(e);
            }
        }
        list.sort_unstable();
        list.dedup();

        let mut degree = vec![0usize; num_nodes];
        for e in &list {
            degree[e.u] += 1;
            degree[e.v] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0; offsets[num_nodes]];
        for e in &list {
            neighbors[fill[e.u]] = e.v;
            fill[e.u] += 1;
            neighbors[fill[e.v]] = e.u;
            fill[e.v] += 1;
        }
        for v in 0..num_nodes {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        let edge_index = list.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        Ok(Graph {
            num_nodes,
            edges: list,
            offsets,
            neighbors,
            edge_index,
            node_ids: None,
        })
    }

    pub fn with_node_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.num_nodes {
            return Err(Error::Shape(format!(
                "{} node ids for {} nodes",
                ids.len(),
                self.num_nodes
            )));
        }
        self.node_ids = Some(ids);
        Ok(self)
    }

    /// Same node set, restricted to the given edges (which must be edges of
    /// this graph or at least in range).
    pub fn subgraph_with_edges(&self, edges: &[Edge]) -> Result<Self> {
        let g = Graph::from_edges(self.num_nodes, edges.iter().map(|e| (e.u, e.v)))?;
        Ok(Graph {
            node_ids: self.node_ids.clone(),
            ..g
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.edge_index.contains_key(&Edge::new(a, b))
    }

    pub fn edge_id(&self, e: &Edge) -> Option<usize> {
        self.edge_index.get(e).copied()
    }

    pub fn node_ids(&self) -> Option<&[String]> {
        self.node_ids.as_deref()
    }

    /// Display token for a node: the original label when known, else the index.
    pub fn node_token(&self, v: NodeId) -> String {
        match &self.node_ids {
            Some(ids) => ids[v].clone(),
            None => v.to_string(),
        }
    }

    /// Connected components as node lists, in order of their smallest node.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut seen = vec![false; self.num_nodes];
        let mut out = Vec::new();
        for s in 0..self.num_nodes {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &y in self.neighbors(x) {
                    if !seen[y] {
                        seen[y] = true;
                        comp.push(y);
                        queue.push_back(y);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.num_nodes == 0 || self.components().len() == 1
    }

    /// Writes one `u v` line per edge using node tokens.
    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        for e in &self.edges {
            writeln!(out, "{} {}", self.node_token(e.u), self.node_token(e.v))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split_whitespace().collect()))
        }
    })
}

/// Reads an edge list and keeps its largest connected component (the
/// earliest one on ties). Integer tokens are ordered numerically, other
/// tokens by first appearance.
pub fn load_edge_list(path: &Path) -> Result<Graph> {
    let g = load_edge_list_all(path)?;
    let comps = g.components();
    let largest = comps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
        .map(|(_, c)| c.clone())
        .unwrap_or_default();
    if largest.len() < 2 {
        return Err(Error::GraphTooSmall(format!(
            "{}: fewer than 2 nodes after cleaning",
            path.display()
        )));
    }
    if largest.len() == g.num_nodes() {
        return Ok(g);
    }
    let mut remap = vec![usize::MAX; g.num_nodes()];
    for (new, &old) in largest.iter().enumerate() {
        remap[old] = new;
    }
    let edges = g
        .edges()
        .iter()
        .filter(|e| remap[e.u] != usize::MAX)
        .map(|e| (remap[e.u], remap[e.v]));
    let ids = largest.iter().map(|&v| g.node_token(v)).collect();
    Graph::from_edges(largest.len(), edges)?.with_node_ids(ids)
}

/// Reads an edge list keeping every component.
pub fn load_edge_list_all(path: &Path) -> Result<Graph> {
    let text = read_to_string(path)?;
    let mut pairs = Vec::new();
    for (line, toks) in content_lines(&text) {
        if toks.len() < 2 {
            return Err(Error::Parse {
                line,
                msg: "expected two node tokens".into(),
            });
        }
        pairs.push((toks[0].to_string(), toks[1].to_string()));
    }

    let mut tokens: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for (a, b) in &pairs {
        for t in [a, b] {
            if seen.insert(t.clone()) {
                tokens.push(t.clone());
            }
        }
    }
    if tokens.iter().all(|t| t.parse::<u64>().is_ok()) {
        tokens.sort_by_key(|t| t.parse::<u64>().unwrap());
    }
    let index: HashMap<&str, usize> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let edges: Vec<(usize, usize)> = pairs
        .iter()
        .map(|(a, b)| (index[a.as_str()], index[b.as_str()]))
        .collect();
    let g = Graph::from_edges(tokens.len(), edges)?.with_node_ids(tokens)?;
    if g.num_nodes() < 2 {
        return Err(Error::GraphTooSmall(format!(
            "{}: fewer than 2 nodes",
            path.display()
        )));
    }
    Ok(g)
}

/// Reads `node_token label` lines; nodes absent from the graph are ignored.
pub fn load_labels(path: &Path, g: &Graph) -> Result<Vec<Option<i64>>> {
    let text = read_to_string(path)?;
    let index: HashMap<String, usize> = (0..g.num_nodes()).map(|v| (g.node_token(v), v)).collect();
    let mut labels = vec![None; g.num_nodes()];
    for (line, toks) in content_lines(&text) {
        if toks.len() < 2 {
            return Err(Error::Parse {
                line,
                msg: "expected `node label`".into(),
            });
        }
        let label: i64 = toks[1].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad label {:?}", toks[1]),
        })?;
        if let Some(&v) = index.get(toks[0]) {
            labels[v] = Some(label);
        }
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, g: &Graph, labels: &[i64]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for (v, l) in labels.iter().enumerate() {
        writeln!(out, "{} {}", g.node_token(v), l)?;
    }
    out.flush()?;
    Ok(())
}

/// One ground-truth substructure: an edge set and the nodes it touches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Community {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<Edge>,
}

impl Community {
    /// Edge-induced community; nodes are the endpoints of `edges`.
    pub fn from_edges(mut edges: Vec<Edge>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let mut nodes: Vec<NodeId> = edges.iter().flat_map(|e| [e.u, e.v]).collect();
        nodes.sort_unstable();
        nodes.dedup();
        Community { nodes, edges }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub communities: Vec<Community>,
    /// Per-node label; negative values mark background nodes.
    pub labels: Option<Vec<i64>>,
}

impl GroundTruth {
    /// Community index of every node, `None` for background nodes.
    pub fn node_membership(&self, num_nodes: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; num_nodes];
        for (i, c) in self.communities.iter().enumerate() {
            for &v in &c.nodes {
                out[v] = Some(i);
            }
        }
        out
    }

    /// Community index of an edge (the first one containing it).
    pub fn edge_membership(&self) -> HashMap<Edge, usize> {
        let mut out = HashMap::new();
        for (i, c) in self.communities.iter().enumerate() {
            for e in &c.edges {
                out.entry(*e).or_insert(i);
            }
        }
        out
    }

    /// Drops community edges that are not in `g`; empty communities vanish.
    pub fn restrict_to(&self, g: &Graph) -> GroundTruth {
        let communities = self
            .communities
            .iter()
            .map(|c| Community::from_edges(c.edges.iter().copied().filter(|e| g.has_edge(e.u, e.v)).collect()))
            .filter(|c| !c.edges.is_empty())
            .collect();
        GroundTruth {
            communities,
            labels: self.labels.clone(),
        }
    }

    pub fn to_json(&self, g: &Graph) -> serde_json::Value {
        let communities: Vec<_> = self
            .communities
            .iter()
            .map(|c| {
                serde_json::json!({
                    "edges": c.edges.iter().map(|e| g.edge_id(e)).collect::<Vec<_>>(),
                    "edge_pairs": c.edges.iter().map(|e| [g.node_token(e.u), g.node_token(e.v)]).collect::<Vec<_>>(),
                    "nodes": c.nodes.iter().map(|&v| g.node_token(v)).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "communities": communities })
    }

    /// Parses the JSON produced by [`GroundTruth::to_json`], matching edges by
    /// node token so that it survives component restriction on load.
    pub fn from_json(value: &serde_json::Value, g: &Graph) -> Result<GroundTruth> {
        let index: HashMap<String, usize> = (0..g.num_nodes()).map(|v| (g.node_token(v), v)).collect();
        let comms = value
            .get("communities")
            .and_then(|c| c.as_array())
            .ok_or_else(|| Error::Parse {
                line: 0,
                msg: "missing `communities` array".into(),
            })?;
        let mut communities = Vec::new();
        for c in comms {
            let pairs: Vec<[String; 2]> = serde_json::from_value(c.get("edge_pairs").cloned().unwrap_or_default())?;
            let edges = pairs
                .iter()
                .filter_map(|[a, b]| Some(Edge::new(*index.get(a)?, *index.get(b)?)))
                .filter(|e| g.has_edge(e.u, e.v))
                .collect::<Vec<_>>();
            if !edges.is_empty() {
                communities.push(Community::from_edges(edges));
            }
        }
        Ok(GroundTruth {
            communities,
            labels: None,
        })
    }
}

/// One community per non-negative label: the edges whose endpoints share it.
pub fn communities_from_labels(g: &Graph, labels: &[Option<i64>]) -> Result<GroundTruth> {
    if labels.len() != g.num_nodes() {
        return Err(Error::Shape(format!(
            "{} labels for {} nodes",
            labels.len(),
            g.num_nodes()
        )));
    }
    let mut dense = Vec::with_capacity(labels.len());
    for (v, l) in labels.iter().enumerate() {
        match l {
            Some(l) => dense.push(*l),
            None => return Err(Error::MissingLabel(g.node_token(v))),
        }
    }
    let mut by_label: std::collections::BTreeMap<i64, Vec<Edge>> = Default::default();
    for e in g.edges() {
        let (a, b) = (dense[e.u], dense[e.v]);
        if a == b && a >= 0 {
            by_label.entry(a).or_default().push(*e);
        }
    }
    Ok(GroundTruth {
        communities: by_label.into_values().map(Community::from_edges).collect(),
        labels: Some(dense),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSplit {
    pub train_edges: Vec<Edge>,
    pub test_edges: Vec<Edge>,
    pub test_negatives: Vec<Edge>,
}

/// Samples `count` distinct node pairs that are not edges of `g` and not in `exclude`.
pub fn sample_non_edges(
    g: &Graph,
    count: usize,
    exclude: &HashSet<Edge>,
    rng: &mut impl Rng,
) -> Result<Vec<Edge>> {
    let n = g.num_nodes();
    let pairs = n * n.saturating_sub(1) / 2;
    let available = pairs.saturating_sub(g.num_edges() + exclude.len());
    if count > available {
        return Err(Error::GraphTooSmall(format!(
            "requested {count} non-edges but only {available} available"
        )));
    }
    let mut taken = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let e = Edge::new(a, b);
        if e.is_loop() || g.has_edge(a, b) || exclude.contains(&e) || !taken.insert(e) {
            continue;
        }
        out.push(e);
    }
    Ok(out)
}

/// Random train/test split of the edges plus an equal number of negative pairs.
pub fn split_edges(g: &Graph, test_fraction: f64, seed: u64) -> Result<EdgeSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n_test = (test_fraction * g.num_edges() as f64).round() as usize;
    if n_test == 0 {
        return Err(Error::GraphTooSmall(format!(
            "{} edges yield no test edge at fraction {test_fraction}",
            g.num_edges()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = g.edges().to_vec();
    edges.shuffle(&mut rng);
    let mut test_edges = edges.split_off(edges.len() - n_test);
    let mut train_edges = edges;
    train_edges.sort_unstable();
    test_edges.sort_unstable();
    let test_negatives = sample_non_edges(g, n_test, &HashSet::new(), &mut rng)?;
    Ok(EdgeSplit {
        train_edges,
        test_edges,
        test_negatives,
    })
}

/// Unweighted single-source BFS; unreachable nodes get [`UNREACHABLE`].
pub fn bfs(g: &Graph, source: NodeId) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; g.num_nodes()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(x) = queue.pop_front() {
        let next = dist[x] + 1;
        for &y in g.neighbors(x) {
            if dist[y] == UNREACHABLE {
                dist[y] = next;
                queue.push_back(y);
            }
        }
    }
    dist
}

/// Hop distances from each anchor to every node, anchor-major.
#[derive(Debug, Clone)]
pub struct AnchorDistances {
    pub anchors: Vec<NodeId>,
    pub num_nodes: usize,
    dist: Vec<u32>,
}

impl AnchorDistances {
    pub fn get(&self, anchor_pos: usize, node: NodeId) -> u32 {
        self.dist[anchor_pos * self.num_nodes + node]
    }

    pub fn row(&self, anchor_pos: usize) -> &[u32] {
        &self.dist[anchor_pos * self.num_nodes..(anchor_pos + 1) * self.num_nodes]
    }
}

pub fn distances_to_anchor(g: &Graph, anchors: &[NodeId]) -> Result<AnchorDistances> {
    if anchors.is_empty() {
        return Err(Error::Degenerate("empty anchor set".into()));
    }
    if let Some(&a) = anchors.iter().find(|&&a| a >= g.num_nodes()) {
        return Err(Error::Shape(format!("anchor {a} out of range")));
    }
    let rows: Vec<Vec<u32>> = anchors.par_iter().map(|&a| bfs(g, a)).collect();
    Ok(AnchorDistances {
        anchors: anchors.to_vec(),
        num_nodes: g.num_nodes(),
        dist: rows.concat(),
    })
}

/// All-pairs hop distances, row `u` holding distances from `u`.
pub fn all_pairs_distances(g: &Graph) -> AnchorDistances {
    let all: Vec<NodeId> = (0..g.num_nodes()).collect();
    if all.is_empty() {
        return AnchorDistances {
            anchors: all,
            num_nodes: 0,
            dist: Vec::new(),
        };
    }
    distances_to_anchor(g, &all).expect("non-empty anchors")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    fn path_graph(n: usize) -> Graph {
        Graph::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    #[test]
    fn load_simple_path() {
        let f = write_tmp(&["a b", "b c"]);
        let g = load_edge_list(f.path()).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (3, 2));
    }

    #[test]
    fn load_drops_duplicates_and_loops() {
        let f = write_tmp(&["# comment", "a b", "b a", "a a"]);
        let g = load_edge_list(f.path()).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (2, 1));
    }

    #[test]
    fn load_keeps_first_of_equal_components() {
        let f = write_tmp(&["x y", "y z", "z x", "p q", "q r", "r p"]);
        let g = load_edge_list(f.path()).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (3, 3));
        let mut ids = g.node_ids().unwrap().to_vec();
        ids.sort();
        assert_eq!(ids, vec!["x", "y", "z"]);
    }

    #[test]
    fn load_keeps_larger_component() {
        let f = write_tmp(&["a b", "c d", "d e", "e c", "e f"]);
        let g = load_edge_list(f.path()).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (4, 4));
    }

    #[test]
    fn load_rejects_tiny_and_missing() {
        let f = write_tmp(&["a a"]);
        assert!(load_edge_list(f.path()).is_err());
        assert!(matches!(
            load_edge_list(Path::new("/nonexistent/edges.txt")),
            Err(Error::Read { .. })
        ));
    }

    #[test]
    fn numeric_tokens_keep_their_order() {
        let f = write_tmp(&["0 5", "1 2", "2 3", "3 4", "4 5"]);
        let g = load_edge_list(f.path()).unwrap();
        assert_eq!(g.node_token(5), "5");
        assert!(g.has_edge(0, 5));
    }

    #[test]
    fn communities_from_triangle() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let gt = communities_from_labels(&g, &[Some(0); 3]).unwrap();
        assert_eq!(gt.communities.len(), 1);
        assert_eq!(gt.communities[0].edges.len(), 3);
    }

    #[test]
    fn communities_skip_cross_label_edges() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let gt = communities_from_labels(&g, &[Some(0), Some(1)]).unwrap();
        assert!(gt.communities.is_empty());
        assert!(matches!(
            communities_from_labels(&g, &[Some(0), None]),
            Err(Error::MissingLabel(_))
        ));
    }

    #[test]
    fn communities_two_cliques_with_bridge() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]).unwrap();
        let labels = [0, 0, 0, 1, 1, 1].map(Some);
        let gt = communities_from_labels(&g, &labels).unwrap();
        // brute force: every labelled pair that is an edge
        for (i, c) in gt.communities.iter().enumerate() {
            let expect: Vec<Edge> = g
                .edges()
                .iter()
                .copied()
                .filter(|e| labels[e.u] == Some(i as i64) && labels[e.v] == Some(i as i64))
                .collect();
            assert_eq!(c.edges, expect);
            assert_eq!(c.edges.len(), 3);
        }
        let bridge = Edge::new(2, 3);
        assert!(gt.communities.iter().all(|c| !c.edges.contains(&bridge)));
    }

    #[test]
    fn split_counts_and_determinism() {
        let g = Graph::from_edges(20, (0..10).map(|i| (i, i + 10))).unwrap();
        let s = split_edges(&g, 0.1, 7).unwrap();
        assert_eq!((s.test_edges.len(), s.train_edges.len(), s.test_negatives.len()), (1, 9, 1));
        assert_eq!(s, split_edges(&g, 0.1, 7).unwrap());
        for n in &s.test_negatives {
            assert!(!g.has_edge(n.u, n.v));
        }
    }

    #[test]
    fn split_fails_on_complete_graph() {
        let k4 = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        assert!(matches!(split_edges(&k4, 0.2, 1), Err(Error::GraphTooSmall(_))));
        assert!(split_edges(&k4, 0.0, 1).is_err());
    }

    #[test]
    fn bfs_path_and_star() {
        let g = path_graph(3);
        let d = distances_to_anchor(&g, &[0]).unwrap();
        assert_eq!(d.get(0, 0), 0);
        assert_eq!(d.get(0, 2), 2);

        let star = Graph::from_edges(6, (1..6).map(|i| (0, i))).unwrap();
        let d = distances_to_anchor(&star, &[0]).unwrap();
        assert!((1..6).all(|v| d.get(0, v) == 1));
        assert!(distances_to_anchor(&star, &[]).is_err());
    }

    #[test]
    fn bfs_marks_unreachable() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(bfs(&g, 0)[3], UNREACHABLE);
    }

    #[test]
    fn ground_truth_json_round_trip() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]).unwrap();
        let gt = communities_from_labels(&g, &[0, 0, 0, 1, 1, 1].map(Some)).unwrap();
        let back = GroundTruth::from_json(&gt.to_json(&g), &g).unwrap();
        assert_eq!(back.communities, gt.communities);
    }

    proptest::proptest! {
        #[test]
        fn graph_invariants(n in 2usize..30, raw in proptest::collection::vec((0usize..30, 0usize..30), 0..80)) {
            let edges: Vec<_> = raw.into_iter().map(|(a, b)| (a % n, b % n)).collect();
            let g = Graph::from_edges(n, edges).unwrap();
            let mut seen = HashSet::new();
            for e in g.edges() {
                proptest::prop_assert!(e.u < e.v && e.v < n);
                proptest::prop_assert!(seen.insert(*e));
                proptest::prop_assert!(g.neighbors(e.u).contains(&e.v));
                proptest::prop_assert!(g.neighbors(e.v).contains(&e.u));
            }
            let total: usize = (0..n).map(|v| g.degree(v)).sum();
            proptest::prop_assert_eq!(total, 2 * g.num_edges());
            let d = bfs(&g, 0);
            for e in g.edges() {
                let (a, b) = (d[e.u], d[e.v]);
                if a != UNREACHABLE || b != UNREACHABLE {
                    proptest::prop_assert!(a.abs_diff(b) <= 1);
                }
            }
        }

        #[test]
        fn split_sizes_exact(n in 8usize..25, frac in 0.05f64..0.5, seed in 0u64..1000) {
            let g = Graph::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap();
            if let Ok(s) = split_edges(&g, frac, seed) {
                let expect = (frac * g.num_edges() as f64).round() as usize;
                proptest::prop_assert_eq!(s.test_edges.len(), expect);
                proptest::prop_assert_eq!(s.test_negatives.len(), expect);
                proptest::prop_assert_eq!(s.train_edges.len() + s.test_edges.len(), g.num_edges());
                for e in &s.test_negatives {
                    proptest::prop_assert!(!g.has_edge(e.u, e.v));
                }
            }
        }
    }
}

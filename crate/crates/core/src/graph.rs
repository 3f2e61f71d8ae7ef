//! Directed social graph with per-node features and typed edges.
//!
//! Edges point from followee to follower: information posted by `u` can be
//! forwarded by `v` when `(u, v)` is an edge. The detector never needs the
//! whole graph at once; it asks for the simple paths from the cascade source
//! that end with a given observed edge, which [`SocialGraph::enumerate_paths`]
//! produces with a depth bound and a count cap.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// External node identifier, shared by graph files and trace files.
pub type NodeId = u64;

/// A directed followee → follower edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
}

impl Edge {
    pub fn new(from: NodeId, to: NodeId) -> Self {
        Edge { from, to }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.from, self.to)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("node {0} already present")]
    DuplicateNode(NodeId),
    #[error("node {id} has {got} features, graph dimension is {expected}")]
    DimensionMismatch { id: NodeId, expected: usize, got: usize },
    #[error("edge endpoint {0} is not a node of the graph")]
    MissingNode(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("edge {0} already present")]
    DuplicateEdge(Edge),
    #[error("edge {0} is not part of the graph")]
    MissingEdge(Edge),
    #[error("edge class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GraphError {
    fn from(e: std::io::Error) -> Self {
        GraphError::Io(e.to_string())
    }
}

/// Bounds applied when enumerating candidate propagation paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathEnumConfig {
    /// Maximum number of edges in a path.
    pub max_path_length: usize,
    /// Maximum number of paths kept; the shortest ones survive.
    pub max_paths: usize,
}

impl Default for PathEnumConfig {
    fn default() -> Self {
        PathEnumConfig {
            max_path_length: 8,
            max_paths: 512,
        }
    }
}

impl PathEnumConfig {
    pub fn new(max_path_length: usize, max_paths: usize) -> Result<Self, GraphError> {
        if max_path_length == 0 || max_paths == 0 {
            return Err(GraphError::Parse {
                line: 0,
                msg: "path bounds must be positive".into(),
            });
        }
        Ok(PathEnumConfig {
            max_path_length,
            max_paths,
        })
    }

    /// Bounds large enough that nothing is cut on a graph of `nodes` nodes.
    pub fn unbounded(nodes: usize) -> Self {
        PathEnumConfig {
            max_path_length: nodes.max(1),
            max_paths: usize::MAX,
        }
    }
}

/// A directed path: distinct vertices joined by consecutive edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectedPath {
    vertices: Vec<NodeId>,
}

impl DirectedPath {
    /// Builds a path from its vertex sequence. Returns `None` for fewer than
    /// two vertices or repeated vertices; edge existence is not checked here.
    pub fn from_vertices(vertices: Vec<NodeId>) -> Option<Self> {
        if vertices.len() < 2 {
            return None;
        }
        let distinct: HashSet<_> = vertices.iter().collect();
        if distinct.len() != vertices.len() {
            return None;
        }
        Some(DirectedPath { vertices })
    }

    pub fn vertices(&self) -> &[NodeId] {
        &self.vertices
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.vertices.windows(2).map(|w| Edge::new(w[0], w[1]))
    }

    pub fn last_edge(&self) -> Edge {
        let n = self.vertices.len();
        Edge::new(self.vertices[n - 2], self.vertices[n - 1])
    }
}

/// Result of a bounded path enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSet {
    /// Paths in lexicographic order of their vertex sequences.
    pub paths: Vec<DirectedPath>,
    /// Set when more than `max_paths` paths existed within the length bound.
    pub truncated: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SocialGraph {
    ids: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    features: Vec<Vec<f64>>,
    dim: Option<usize>,
    // Out-neighbour indices, kept sorted by external id.
    out: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    edge_count: usize,
    edge_class: BTreeMap<Edge, usize>,
    num_classes: Option<usize>,
}

impl SocialGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: NodeId, features: Vec<f64>) -> Result<(), GraphError> {
        if self.index.contains_key(&id) {
            return Err(GraphError::DuplicateNode(id));
        }
        match self.dim {
            Some(d) if d != features.len() => {
                return Err(GraphError::DimensionMismatch {
                    id,
                    expected: d,
                    got: features.len(),
                })
            }
            Some(_) => {}
            None => self.dim = Some(features.len()),
        }
        self.index.insert(id, self.ids.len());
        self.ids.push(id);
        self.features.push(features);
        self.out.push(Vec::new());
        self.incoming.push(Vec::new());
        Ok(())
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<(), GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        let iu = *self.index.get(&u).ok_or(GraphError::MissingNode(u))?;
        let iv = *self.index.get(&v).ok_or(GraphError::MissingNode(v))?;
        let ids = &self.ids;
        let out = &mut self.out[iu];
        match out.binary_search_by_key(&v, |&i| ids[i]) {
            Ok(_) => return Err(GraphError::DuplicateEdge(Edge::new(u, v))),
            Err(pos) => out.insert(pos, iv),
        }
        let inc = &mut self.incoming[iv];
        let pos = inc.binary_search_by_key(&u, |&i| ids[i]).unwrap_or_else(|p| p);
        inc.insert(pos, iu);
        self.edge_count += 1;
        Ok(())
    }

    /// Records the classifier output for an edge.
    pub fn set_edge_class(&mut self, edge: Edge, class: usize, num_classes: usize) -> Result<(), GraphError> {
        if class >= num_classes {
            return Err(GraphError::ClassOutOfRange { class, num_classes });
        }
        if !self.has_edge(edge) {
            return Err(GraphError::MissingEdge(edge));
        }
        if let Some(z) = self.num_classes {
            if z != num_classes {
                return Err(GraphError::ClassOutOfRange { class, num_classes: z });
            }
        }
        self.num_classes = Some(num_classes);
        self.edge_class.insert(edge, class);
        Ok(())
    }

    pub fn edge_class(&self, edge: Edge) -> Option<usize> {
        self.edge_class.get(&edge).copied()
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Feature dimension, fixed by the first inserted node.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn features(&self, id: NodeId) -> Option<&[f64]> {
        self.index.get(&id).map(|&i| self.features[i].as_slice())
    }

    pub fn has_edge(&self, edge: Edge) -> bool {
        match (self.index.get(&edge.from), self.index.get(&edge.to)) {
            (Some(&iu), Some(_)) => self.out[iu]
                .binary_search_by_key(&edge.to, |&i| self.ids[i])
                .is_ok(),
            _ => false,
        }
    }

    /// Node ids in insertion order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids.iter().copied()
    }

    /// Followers of `u`, ascending by id.
    pub fn followers(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let idx = self.index.get(&u).copied();
        idx.into_iter()
            .flat_map(move |i| self.out[i].iter().map(move |&j| self.ids[j]))
    }

    /// All edges, ordered by followee insertion order then follower id.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.out.iter().enumerate().flat_map(move |(i, outs)| {
            outs.iter().map(move |&j| Edge::new(self.ids[i], self.ids[j]))
        })
    }

    /// All simple paths that start at `source` and whose final edge is
    /// `target`, with at most `cfg.max_path_length` edges.
    ///
    /// Output is sorted lexicographically by vertex sequence. When more than
    /// `cfg.max_paths` paths exist, the shortest ones are kept (ties broken
    /// lexicographically) and `truncated` is set.
    pub fn enumerate_paths(&self, source: NodeId, target: Edge, cfg: &PathEnumConfig) -> PathSet {
        let empty = PathSet {
            paths: Vec::new(),
            truncated: false,
        };
        let (Some(&s), Some(&u), Some(&v)) = (
            self.index.get(&source),
            self.index.get(&target.from),
            self.index.get(&target.to),
        ) else {
            return empty;
        };
        if !self.has_edge(target) || v == s || cfg.max_path_length == 0 {
            return empty;
        }
        if u == s {
            return PathSet {
                paths: vec![DirectedPath {
                    vertices: vec![source, target.to],
                }],
                truncated: false,
            };
        }

        // Reverse BFS distances to `u`, avoiding `v`: a lower bound on the
        // remaining edges needed from any vertex, used to prune the DFS.
        let budget = cfg.max_path_length - 1;
        let dist = self.distances_to(u, v, budget);
        if dist[s] > budget {
            return empty;
        }

        let mut found: Vec<Vec<usize>> = Vec::new();
        let mut on_path = vec![false; self.ids.len()];
        on_path[v] = true;
        let mut stack = vec![s];
        on_path[s] = true;
        self.dfs_to(s, u, budget, &dist, &mut on_path, &mut stack, &mut found);

        let mut paths: Vec<DirectedPath> = found
            .into_iter()
            .map(|mut idx| {
                idx.push(v);
                DirectedPath {
                    vertices: idx.into_iter().map(|i| self.ids[i]).collect(),
                }
            })
            .collect();
        let truncated = paths.len() > cfg.max_paths;
        if truncated {
            paths.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.vertices.cmp(&b.vertices)));
            paths.truncate(cfg.max_paths);
        }
        paths.sort_by(|a, b| a.vertices.cmp(&b.vertices));
        PathSet { paths, truncated }
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs_to(
        &self,
        at: usize,
        goal: usize,
        budget: usize,
        dist: &[usize],
        on_path: &mut [bool],
        stack: &mut Vec<usize>,
        found: &mut Vec<Vec<usize>>,
    ) {
        if at == goal {
            found.push(stack.clone());
            return;
        }
        let used = stack.len() - 1;
        for &next in &self.out[at] {
            if on_path[next] || dist[next].saturating_add(used + 1) > budget {
                continue;
            }
            on_path[next] = true;
            stack.push(next);
            self.dfs_to(next, goal, budget, dist, on_path, stack, found);
            stack.pop();
            on_path[next] = false;
        }
    }

    fn distances_to(&self, goal: usize, blocked: usize, limit: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.ids.len()];
        dist[goal] = 0;
        let mut queue = VecDeque::from([goal]);
        while let Some(x) = queue.pop_front() {
            if dist[x] >= limit {
                continue;
            }
            for &p in &self.incoming[x] {
                if p != blocked && dist[p] == usize::MAX {
                    dist[p] = dist[x] + 1;
                    queue.push_back(p);
                }
            }
        }
        dist
    }

    /// Writes the edge list as `u<TAB>v` lines.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<(), GraphError> {
        for e in self.edges() {
            writeln!(w, "{}\t{}", e.from, e.to)?;
        }
        Ok(())
    }

    /// Writes node features as `id<TAB>f1,f2,...,fd` lines.
    pub fn write_node_features<W: Write>(&self, mut w: W) -> Result<(), GraphError> {
        for (id, feats) in self.ids.iter().zip(&self.features) {
            let joined: Vec<String> = feats.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}\t{}", id, joined.join(","))?;
        }
        Ok(())
    }

    /// Loads a graph from a node-feature file (optional) and an edge list.
    /// Nodes that appear only in the edge list get empty feature vectors,
    /// which is only valid when no feature file is given.
    pub fn read<R1: BufRead, R2: BufRead>(nodes: Option<R1>, edges: R2) -> Result<Self, GraphError> {
        let mut g = SocialGraph::new();
        if let Some(nodes) = nodes {
            for (lineno, line) in nodes.lines().enumerate() {
                let line = line?;
                let line = line.trim_end_matches('\r');
                if line.is_empty() {
                    continue;
                }
                let (id, feats) = parse_feature_line(line).map_err(|msg| GraphError::Parse {
                    line: lineno + 1,
                    msg,
                })?;
                g.add_node(id, feats).map_err(|e| GraphError::Parse {
                    line: lineno + 1,
                    msg: e.to_string(),
                })?;
            }
        }
        let implicit_nodes = g.node_count() == 0;
        for (lineno, line) in edges.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| GraphError::Parse {
                line: lineno + 1,
                msg,
            };
            let mut parts = line.split('\t');
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err(format!("expected `u<TAB>v`, got {line:?}")));
            };
            let u = parse_id(a).map_err(parse_err)?;
            let v = parse_id(b).map_err(|m| GraphError::Parse {
                line: lineno + 1,
                msg: m,
            })?;
            if implicit_nodes {
                for id in [u, v] {
                    if !g.contains(id) {
                        g.add_node(id, Vec::new())?;
                    }
                }
            }
            g.add_edge(u, v).map_err(|e| GraphError::Parse {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(g)
    }
}

fn parse_id(s: &str) -> Result<NodeId, String> {
    s.trim()
        .parse::<NodeId>()
        .map_err(|_| format!("invalid node id {s:?}"))
}

fn parse_feature_line(line: &str) -> Result<(NodeId, Vec<f64>), String> {
    let (id, rest) = line
        .split_once('\t')
        .ok_or_else(|| format!("expected `id<TAB>f1,...,fd`, got {line:?}"))?;
    let id = parse_id(id)?;
    let feats = if rest.trim().is_empty() {
        Vec::new()
    } else {
        rest.split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("invalid feature value {x:?}"))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok((id, feats))
}

//! Directed road graph, synthetic grid generation and the plain-text network format.
//!
//! A two-way street is two [`Edge`]s. The only mutable state is the per-edge
//! `closed` flag, which the engine flips between time steps.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

pub type NodeId = u32;
pub type EdgeId = u32;

/// Default grid spacing in meters.
pub const DEFAULT_EDGE_LENGTH: f64 = 100.0;
/// Default urban speed limit (50 km/h) in m/s.
pub const DEFAULT_SPEED_LIMIT: f64 = 13.89;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    pub length: f64,
    pub speed_limit: f64,
    pub lane_count: u32,
    pub closed: bool,
}

/// Road network with dense storage indexed by position and id lookup tables.
#[derive(Debug, Clone, Default)]
pub struct Network {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    node_index: HashMap<NodeId, usize>,
    edge_index: HashMap<EdgeId, usize>,
    out_adjacency: BTreeMap<NodeId, Vec<EdgeId>>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Network {
    /// Builds a network, validating ids, endpoints and edge attributes.
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, NetworkError> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if node_index.insert(n.id, i).is_some() {
                return Err(NetworkError::InvalidArgument(format!("duplicate node id {}", n.id)));
            }
        }
        let mut edge_index = HashMap::with_capacity(edges.len());
        let mut out_adjacency: BTreeMap<NodeId, Vec<EdgeId>> =
            nodes.iter().map(|n| (n.id, Vec::new())).collect();
        for (i, e) in edges.iter().enumerate() {
            validate_edge(e, &node_index)?;
            if edge_index.insert(e.id, i).is_some() {
                return Err(NetworkError::InvalidArgument(format!("duplicate edge id {}", e.id)));
            }
            out_adjacency.get_mut(&e.from).expect("validated").push(e.id);
        }
        for list in out_adjacency.values_mut() {
            list.sort_unstable();
        }
        Ok(Network { nodes, edges, node_index, edge_index, out_adjacency })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.node_index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edge_index.get(&id).map(|&i| &self.edges[i])
    }

    /// Dense index of an edge, stable for the lifetime of the network.
    pub fn edge_slot(&self, id: EdgeId) -> Option<usize> {
        self.edge_index.get(&id).copied()
    }

    /// Outgoing edge ids of a node, ascending.
    pub fn out_edges(&self, node: NodeId) -> &[EdgeId] {
        self.out_adjacency.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Edges that can follow `edge` on a route (all edges leaving its head node).
    pub fn successors(&self, edge: EdgeId) -> &[EdgeId] {
        match self.edge(edge) {
            Some(e) => self.out_edges(e.to),
            None => &[],
        }
    }

    pub fn is_closed(&self, edge: EdgeId) -> bool {
        self.edge(edge).is_some_and(|e| e.closed)
    }

    /// Sets the closure flag, returning the previous value.
    pub fn set_closed(&mut self, edge: EdgeId, closed: bool) -> Option<bool> {
        let slot = self.edge_slot(edge)?;
        Some(std::mem::replace(&mut self.edges[slot].closed, closed))
    }

    /// Midpoint of the straight segment between the edge's endpoints.
    pub fn midpoint(&self, edge: &Edge) -> (f64, f64) {
        let a = self.node(edge.from).expect("edge endpoints exist");
        let b = self.node(edge.to).expect("edge endpoints exist");
        ((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)
    }

    /// Centroid of all node coordinates.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let n = self.nodes.len() as f64;
        let (sx, sy) = self.nodes.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Some((sx / n, sy / n))
    }

    /// True when every node reaches every other node over open edges.
    pub fn is_strongly_connected(&self) -> bool {
        let Some(first) = self.nodes.first() else {
            return true;
        };
        let forward = self.reach(first.id, false);
        let backward = self.reach(first.id, true);
        forward == self.nodes.len() && backward == self.nodes.len()
    }

    fn reach(&self, start: NodeId, reverse: bool) -> usize {
        let mut incoming: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        if reverse {
            for e in self.edges.iter().filter(|e| !e.closed) {
                incoming.entry(e.to).or_default().push(e.from);
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        seen[self.node_index[&start]] = true;
        let mut count = 1;
        while let Some(n) = stack.pop() {
            let next: Vec<NodeId> = if reverse {
                incoming.get(&n).cloned().unwrap_or_default()
            } else {
                self.out_edges(n)
                    .iter()
                    .filter_map(|&id| self.edge(id))
                    .filter(|e| !e.closed)
                    .map(|e| e.to)
                    .collect()
            };
            for m in next {
                let i = self.node_index[&m];
                if !seen[i] {
                    seen[i] = true;
                    count += 1;
                    stack.push(m);
                }
            }
        }
        count
    }
}

fn validate_edge(e: &Edge, nodes: &HashMap<NodeId, usize>) -> Result<(), NetworkError> {
    let bad = |msg: String| Err(NetworkError::InvalidArgument(msg));
    if !nodes.contains_key(&e.from) {
        return bad(format!("edge {} references unknown node {}", e.id, e.from));
    }
    if !nodes.contains_key(&e.to) {
        return bad(format!("edge {} references unknown node {}", e.id, e.to));
    }
    if e.from == e.to {
        return bad(format!("edge {} is a self-loop", e.id));
    }
    if !(e.length > 0.0 && e.length.is_finite()) {
        return bad(format!("edge {} has non-positive length {}", e.id, e.length));
    }
    if !(e.speed_limit > 0.0 && e.speed_limit.is_finite()) {
        return bad(format!("edge {} has non-positive speed limit {}", e.id, e.speed_limit));
    }
    if e.lane_count < 1 {
        return bad(format!("edge {} has no lanes", e.id));
    }
    Ok(())
}

/// Regular `rows × cols` lattice with a directed edge each way between
/// orthogonal neighbours. Node ids are row-major; node `(r, c)` sits at
/// `(c·edge_length, r·edge_length)`. Horizontal links are numbered first,
/// then vertical ones, and link `k` owns edges `2k` (towards higher index)
/// and `2k + 1` (reverse).
pub fn build_grid(
    rows: u32,
    cols: u32,
    edge_length: f64,
    speed_limit: f64,
    lanes: u32,
) -> Result<Network, NetworkError> {
    if rows < 2 || cols < 2 {
        return Err(NetworkError::InvalidArgument(format!(
            "grid needs at least 2x2 nodes, got {rows}x{cols}"
        )));
    }
    if !(edge_length > 0.0 && edge_length.is_finite()) {
        return Err(NetworkError::InvalidArgument(format!("edge length {edge_length} must be > 0")));
    }
    if !(speed_limit > 0.0 && speed_limit.is_finite()) {
        return Err(NetworkError::InvalidArgument(format!("speed limit {speed_limit} must be > 0")));
    }
    if lanes < 1 {
        return Err(NetworkError::InvalidArgument("lane count must be >= 1".into()));
    }

    let id = |r: u32, c: u32| r * cols + c;
    let nodes = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| Node { id: id(r, c), x: c as f64 * edge_length, y: r as f64 * edge_length })
        .collect();

    let mut links = Vec::new();
    for r in 0..rows {
        for c in 0..cols - 1 {
            links.push((id(r, c), id(r, c + 1)));
        }
    }
    for r in 0..rows - 1 {
        for c in 0..cols {
            links.push((id(r, c), id(r + 1, c)));
        }
    }
    let mut edges = Vec::with_capacity(links.len() * 2);
    for (k, (a, b)) in links.into_iter().enumerate() {
        let k = k as EdgeId;
        for (eid, from, to) in [(2 * k, a, b), (2 * k + 1, b, a)] {
            edges.push(Edge { id: eid, from, to, length: edge_length, speed_limit, lane_count: lanes, closed: false });
        }
    }
    Network::new(nodes, edges)
}

/// Undirected links of a network: edges grouped by unordered endpoint pair,
/// each group sorted by edge id, groups ordered by their smallest edge id.
pub fn links(network: &Network) -> Vec<Vec<EdgeId>> {
    let mut groups: BTreeMap<(NodeId, NodeId), Vec<EdgeId>> = BTreeMap::new();
    for e in network.edges() {
        let key = (e.from.min(e.to), e.from.max(e.to));
        groups.entry(key).or_default().push(e.id);
    }
    let mut out: Vec<Vec<EdgeId>> = groups
        .into_values()
        .map(|mut g| {
            g.sort_unstable();
            g
        })
        .collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// Edge ids of the `k` undirected links whose midpoints lie nearest to the
/// centroid of all nodes. Both directions of each chosen link are returned;
/// ties break towards the link with the smaller lowest edge id.
pub fn central_edges(network: &Network, k: usize) -> Result<Vec<EdgeId>, NetworkError> {
    if k == 0 {
        return Err(NetworkError::InvalidArgument("k must be >= 1".into()));
    }
    let centroid = network
        .centroid()
        .ok_or_else(|| NetworkError::InvalidArgument("network has no nodes".into()))?;
    let links = links(network);
    if k > links.len() {
        return Err(NetworkError::InvalidArgument(format!(
            "k = {k} exceeds the {} links of the network",
            links.len()
        )));
    }
    let mut scored: Vec<(f64, Vec<EdgeId>)> = links
        .into_iter()
        .map(|g| {
            let e = network.edge(g[0]).expect("link edges exist");
            let (mx, my) = network.midpoint(e);
            ((mx - centroid.0).hypot(my - centroid.1), g)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1[0].cmp(&b.1[0])));
    Ok(scored.into_iter().take(k).flat_map(|(_, g)| g).collect())
}

/// Serializes to the line format read by [`load_network`].
pub fn save_network(network: &Network) -> String {
    let mut out = String::new();
    out.push_str("# nodes: node <id> <x> <y>\n");
    for n in network.nodes() {
        let _ = writeln!(out, "node {} {} {}", n.id, n.x, n.y);
    }
    out.push_str("# edges: edge <id> <from> <to> <length> <speed_limit> <lanes>\n");
    for e in network.edges() {
        let _ = writeln!(out, "edge {} {} {} {} {} {}", e.id, e.from, e.to, e.length, e.speed_limit, e.lane_count);
    }
    out
}

/// Parses `node <id> <x> <y>` and `edge <id> <from> <to> <length> <speed_limit> <lanes>`
/// lines. `#` starts a comment; blank lines are skipped.
pub fn load_network(text: &str) -> Result<Network, NetworkError> {
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut edge_lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let err = |message: String| NetworkError::Parse { line: line_no, message };
        match fields[0] {
            "node" => {
                if fields.len() != 4 {
                    return Err(err(format!("expected `node <id> <x> <y>`, got {} fields", fields.len())));
                }
                nodes.push(Node {
                    id: parse_field(fields[1], "node id", line_no)?,
                    x: parse_field(fields[2], "x", line_no)?,
                    y: parse_field(fields[3], "y", line_no)?,
                });
            }
            "edge" => {
                if fields.len() != 7 {
                    return Err(err(format!(
                        "expected `edge <id> <from> <to> <length> <speed_limit> <lanes>`, got {} fields",
                        fields.len()
                    )));
                }
                edges.push(Edge {
                    id: parse_field(fields[1], "edge id", line_no)?,
                    from: parse_field(fields[2], "from node", line_no)?,
                    to: parse_field(fields[3], "to node", line_no)?,
                    length: parse_field(fields[4], "length", line_no)?,
                    speed_limit: parse_field(fields[5], "speed limit", line_no)?,
                    lane_count: parse_field(fields[6], "lane count", line_no)?,
                    closed: false,
                });
                edge_lines.push(line_no);
            }
            other => return Err(err(format!("unknown record `{other}`"))),
        }
    }
    let node_ids: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    for (e, &line) in edges.iter().zip(&edge_lines) {
        validate_edge(e, &node_ids).map_err(|err| match err {
            NetworkError::InvalidArgument(message) => NetworkError::Parse { line, message },
            other => other,
        })?;
    }
    Network::new(nodes, edges).map_err(|err| match err {
        NetworkError::InvalidArgument(message) => NetworkError::Parse { line: 0, message },
        other => other,
    })
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T, NetworkError> {
    s.parse().map_err(|_| NetworkError::Parse { line, message: format!("invalid {what} `{s}`") })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enumerate_adjacent_pairs(rows: u32, cols: u32) -> usize {
        let mut count = 0;
        for r1 in 0..rows {
            for c1 in 0..cols {
                for r2 in 0..rows {
                    for c2 in 0..cols {
                        if r1.abs_diff(r2) + c1.abs_diff(c2) == 1 {
                            count += 1;
                        }
                    }
                }
            }
        }
        count
    }

    #[test]
    fn grid_counts_match_enumeration() {
        for (rows, cols, expected) in [(3, 4, 34), (2, 2, 8), (20, 20, 1520)] {
            let net = build_grid(rows, cols, 100.0, 13.89, 1).unwrap();
            assert_eq!(net.nodes().len(), (rows * cols) as usize);
            assert_eq!(net.edges().len(), expected);
            assert_eq!(enumerate_adjacent_pairs(rows, cols), expected);
        }
    }

    #[test]
    fn grid_rejects_bad_arguments() {
        assert!(build_grid(1, 4, 100.0, 13.89, 1).is_err());
        assert!(build_grid(3, 1, 100.0, 13.89, 1).is_err());
        assert!(build_grid(3, 3, 0.0, 13.89, 1).is_err());
        assert!(build_grid(3, 3, 100.0, -1.0, 1).is_err());
        assert!(build_grid(3, 3, 100.0, 13.89, 0).is_err());
    }

    #[test]
    fn grid_is_strongly_connected() {
        for rows in 2..=10 {
            for cols in 2..=10 {
                assert!(build_grid(rows, cols, 100.0, 13.89, 1).unwrap().is_strongly_connected());
            }
        }
    }

    #[test]
    fn central_link_of_two_by_two_is_lowest_id() {
        let net = build_grid(2, 2, 50.0, 10.0, 1).unwrap();
        assert_eq!(central_edges(&net, 1).unwrap(), vec![0, 1]);
    }

    #[test]
    fn central_link_of_small_grid_matches_brute_force() {
        let net = build_grid(3, 4, 100.0, 13.89, 1).unwrap();
        let (cx, cy) = net.centroid().unwrap();
        assert_eq!((cx, cy), (150.0, 100.0));
        // Brute force over every link midpoint.
        let mut best: Option<(f64, EdgeId)> = None;
        for e in net.edges() {
            let a = net.node(e.from).unwrap();
            let b = net.node(e.to).unwrap();
            let d = (((a.x + b.x) / 2.0 - cx).powi(2) + ((a.y + b.y) / 2.0 - cy).powi(2)).sqrt();
            let low = e.id & !1;
            if best.is_none_or(|(bd, bid)| d < bd || (d == bd && low < bid)) {
                best = Some((d, low));
            }
        }
        let (_, low) = best.unwrap();
        assert_eq!(central_edges(&net, 1).unwrap(), vec![low, low + 1]);
        let e = net.edge(low).unwrap();
        assert_eq!((e.from, e.to), (5, 6));
    }

    #[test]
    fn central_links_of_large_grid_are_disjoint_pairs() {
        let net = build_grid(20, 20, 100.0, 13.89, 1).unwrap();
        let picked = central_edges(&net, 2).unwrap();
        assert_eq!(picked.len(), 4);
        let mut dedup = picked.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 4);
        for pair in picked.chunks(2) {
            let a = net.edge(pair[0]).unwrap();
            let b = net.edge(pair[1]).unwrap();
            assert_eq!((a.from, a.to), (b.to, b.from));
        }
        assert!(central_edges(&net, 761).is_err());
        assert!(central_edges(&net, 0).is_err());
    }

    #[test]
    fn load_reports_unknown_node() {
        let text = "node 0 0 0\nnode 1 100 0\nedge 0 0 7 100 13.89 1\n";
        match load_network(text) {
            Err(NetworkError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains('7'), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_rejects_malformed_lines() {
        assert!(matches!(load_network("node 0 0\n"), Err(NetworkError::Parse { line: 1, .. })));
        assert!(matches!(
            load_network("# header\nnode 0 0 0\nnode 1 1 0\nedge 0 0 1 -5 10 1\n"),
            Err(NetworkError::Parse { line: 4, .. })
        ));
        assert!(matches!(load_network("bogus 1 2\n"), Err(NetworkError::Parse { line: 1, .. })));
        assert!(matches!(load_network("node a 0 0\n"), Err(NetworkError::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_file_is_empty_network() {
        let net = load_network("").unwrap();
        assert!(net.is_empty());
        assert!(net.edges().is_empty());
    }

    #[test]
    fn round_trip_small_grid() {
        let net = build_grid(2, 2, 50.0, 10.0, 1).unwrap();
        assert_eq!(load_network(&save_network(&net)).unwrap(), net);
    }
}

//! Shortest-distance routing over edges and closure-driven rerouting.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::demand::VehicleClass;
use crate::network::{EdgeId, Network};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
}

/// Ordered edge sequence. `cost` is the summed edge length in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub edges: Vec<EdgeId>,
    pub cost: f64,
}

impl Route {
    pub fn from_edges(network: &Network, edges: Vec<EdgeId>) -> Result<Self, RoutingError> {
        let mut cost = 0.0;
        for &e in &edges {
            cost += network.edge(e).ok_or(RoutingError::UnknownEdge(e))?.length;
        }
        Ok(Route { edges, cost })
    }

    /// Consecutive edges share a node and the cost matches the summed lengths.
    pub fn is_connected(&self, network: &Network) -> bool {
        let consecutive = self.edges.windows(2).all(|w| match (network.edge(w[0]), network.edge(w[1])) {
            (Some(a), Some(b)) => a.to == b.from,
            _ => false,
        });
        let cost: f64 = self.edges.iter().filter_map(|&e| network.edge(e)).map(|e| e.length).sum();
        consecutive && !self.edges.is_empty() && (cost - self.cost).abs() <= 1e-9 * cost.max(1.0)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    edge: EdgeId,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Min-heap on (cost, edge id).
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.edge.cmp(&self.edge))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn close_enough(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Minimum-length route from `from` to `to`, both inclusive, avoiding closed
/// edges. Among equal-cost routes the lexicographically smallest edge-id
/// sequence wins. `None` when the destination cannot be reached or either
/// endpoint is closed.
pub fn shortest_path(network: &Network, from: EdgeId, to: EdgeId) -> Result<Option<Route>, RoutingError> {
    if network.is_closed(from) {
        return Ok(None);
    }
    search(network, from, to)
}

/// Like [`shortest_path`] but the start edge may be closed: a vehicle already
/// on a closing edge is allowed to finish it.
pub fn reroute_path(network: &Network, from: EdgeId, to: EdgeId) -> Result<Option<Route>, RoutingError> {
    search(network, from, to)
}

fn search(network: &Network, from: EdgeId, to: EdgeId) -> Result<Option<Route>, RoutingError> {
    let start = network.edge(from).ok_or(RoutingError::UnknownEdge(from))?;
    let target = network.edge(to).ok_or(RoutingError::UnknownEdge(to))?;
    if from == to {
        return Ok(Some(Route { edges: vec![from], cost: start.length }));
    }
    if target.closed {
        return Ok(None);
    }

    // Backward Dijkstra: remaining[e] = cheapest cost of a path e ..= to.
    let mut incoming: HashMap<u32, Vec<EdgeId>> = HashMap::new();
    for e in network.edges().iter().filter(|e| !e.closed || e.id == from) {
        incoming.entry(e.to).or_default().push(e.id);
    }
    let mut remaining: HashMap<EdgeId, f64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    remaining.insert(to, target.length);
    heap.push(Entry { cost: target.length, edge: to });
    while let Some(Entry { cost, edge }) = heap.pop() {
        if remaining.get(&edge).is_some_and(|&c| cost > c) {
            continue;
        }
        if edge == from {
            break;
        }
        let head = network.edge(edge).expect("known edge").from;
        for &prev in incoming.get(&head).map(Vec::as_slice).unwrap_or(&[]) {
            let next_cost = cost + network.edge(prev).expect("known edge").length;
            if remaining.get(&prev).is_none_or(|&c| next_cost < c) {
                remaining.insert(prev, next_cost);
                heap.push(Entry { cost: next_cost, edge: prev });
            }
        }
    }
    let Some(&total) = remaining.get(&from) else {
        return Ok(None);
    };

    // Forward walk taking the smallest-id successor that stays on an optimal path.
    let mut edges = vec![from];
    let mut current = from;
    let mut left = total;
    while current != to {
        let here = network.edge(current).expect("known edge").length;
        let next = network
            .successors(current)
            .iter()
            .copied()
            .filter(|s| !network.is_closed(*s))
            .find(|s| remaining.get(s).is_some_and(|&r| close_enough(here + r, left)))
            .expect("optimal successor exists");
        left -= here;
        edges.push(next);
        current = next;
    }
    let cost = edges.iter().map(|&e| network.edge(e).expect("known edge").length).sum();
    Ok(Some(Route { edges, cost }))
}

/// When HDV learn about closures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdvRerouting {
    /// Only on the edge leading into the closure, where the detour sign is visible.
    SignVisibility,
    /// As soon as the closure happens, like CAV.
    Immediate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReroutePolicy {
    pub hdv: HdvRerouting,
}

impl Default for ReroutePolicy {
    fn default() -> Self {
        ReroutePolicy { hdv: HdvRerouting::SignVisibility }
    }
}

/// The slice of vehicle state rerouting needs.
#[derive(Debug, Clone, Copy)]
pub struct RouteProgress<'a> {
    pub class: VehicleClass,
    pub route: &'a [EdgeId],
    pub route_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RerouteDecision {
    NoChange,
    /// Replacement route starting with the vehicle's current edge.
    Reroute(Route),
    /// A closure blocks the route and no detour exists.
    Unreachable,
}

/// Decides whether a vehicle replaces the rest of its route.
///
/// CAV react to any closed edge ahead. HDV under
/// [`HdvRerouting::SignVisibility`] react only when the first closed edge
/// ahead is the very next one on their route.
pub fn plan_reroute(
    vehicle: RouteProgress<'_>,
    network: &Network,
    policy: ReroutePolicy,
) -> Result<RerouteDecision, RoutingError> {
    let ahead = &vehicle.route[vehicle.route_index + 1..];
    let Some(offset) = ahead.iter().position(|&e| network.is_closed(e)) else {
        return Ok(RerouteDecision::NoChange);
    };
    let informed = match (vehicle.class, policy.hdv) {
        (VehicleClass::Cav, _) | (VehicleClass::Hdv, HdvRerouting::Immediate) => true,
        (VehicleClass::Hdv, HdvRerouting::SignVisibility) => offset == 0,
    };
    if !informed {
        return Ok(RerouteDecision::NoChange);
    }
    let current = vehicle.route[vehicle.route_index];
    let destination = *vehicle.route.last().expect("route is non-empty");
    Ok(match reroute_path(network, current, destination)? {
        Some(route) => RerouteDecision::Reroute(route),
        None => RerouteDecision::Unreachable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_grid;

    /// Exhaustive oracle: an optimal route is `from`, a node-simple path
    /// between the two junctions, then `to`. Enumerates every such path.
    fn brute_force_min(network: &Network, from: EdgeId, to: EdgeId) -> Option<f64> {
        fn walk(net: &Network, node: u32, goal: u32, seen: &mut Vec<u32>, cost: f64, best: &mut Option<f64>) {
            if node == goal {
                if best.is_none_or(|b| cost < b) {
                    *best = Some(cost);
                }
                return;
            }
            for &e in net.out_edges(node) {
                let edge = net.edge(e).unwrap();
                if edge.closed || seen.contains(&edge.to) {
                    continue;
                }
                seen.push(edge.to);
                walk(net, edge.to, goal, seen, cost + edge.length, best);
                seen.pop();
            }
        }
        let (a, b) = (network.edge(from).unwrap(), network.edge(to).unwrap());
        if from == to {
            return Some(a.length);
        }
        if b.closed {
            return None;
        }
        let mut best = None;
        walk(network, a.to, b.from, &mut vec![a.to], a.length + b.length, &mut best);
        best
    }

    fn edge_between(net: &Network, a: u32, b: u32) -> EdgeId {
        net.edges().iter().find(|e| e.from == a && e.to == b).unwrap().id
    }

    #[test]
    fn identity_route() {
        let net = build_grid(3, 4, 100.0, 13.89, 1).unwrap();
        let r = shortest_path(&net, 5, 5).unwrap().unwrap();
        assert_eq!(r.edges, vec![5]);
        assert_eq!(r.cost, 100.0);
    }

    #[test]
    fn corner_to_corner_is_manhattan() {
        let net = build_grid(3, 4, 100.0, 13.89, 1).unwrap();
        // Leave node 0 eastwards, arrive at node 11 from the west.
        let from = edge_between(&net, 0, 1);
        let to = edge_between(&net, 10, 11);
        let r = shortest_path(&net, from, to).unwrap().unwrap();
        assert!(r.is_connected(&net));
        // Nodes 0 -> 11 are 5 hops apart, and the route covers exactly those hops.
        assert_eq!(r.cost, 500.0);
        assert_eq!(Some(r.cost), brute_force_min(&net, from, to));
    }

    #[test]
    fn central_closure_adds_zero_or_one_detour() {
        let base = build_grid(3, 4, 100.0, 13.89, 1).unwrap();
        let mut closed = base.clone();
        for e in crate::network::central_edges(&base, 1).unwrap() {
            closed.set_closed(e, true);
        }
        let mut saw_detour = false;
        for a in base.edges().iter().filter(|e| !closed.is_closed(e.id)) {
            for b in base.edges().iter().filter(|e| !closed.is_closed(e.id)) {
                let before = shortest_path(&base, a.id, b.id).unwrap().unwrap().cost;
                let after = shortest_path(&closed, a.id, b.id).unwrap().unwrap().cost;
                assert_eq!(Some(after), brute_force_min(&closed, a.id, b.id));
                let delta = after - before;
                assert!(delta == 0.0 || delta == 200.0, "{} -> {}: {delta}", a.id, b.id);
                saw_detour |= delta == 200.0;
            }
        }
        assert!(saw_detour);
    }

    #[test]
    fn closed_destination_is_unreachable() {
        let mut net = build_grid(2, 2, 50.0, 10.0, 1).unwrap();
        net.set_closed(3, true);
        assert_eq!(shortest_path(&net, 0, 3).unwrap(), None);
        assert!(shortest_path(&net, 0, 99).is_err());
    }

    #[test]
    fn lexicographic_tie_break() {
        // On a 3x3 grid two monotone paths of equal length exist between many pairs.
        let net = build_grid(3, 3, 100.0, 13.89, 1).unwrap();
        let from = edge_between(&net, 1, 0);
        let to = edge_between(&net, 5, 8);
        let r = shortest_path(&net, from, to).unwrap().unwrap();
        // Enumerate all optimal simple paths and pick the lexicographic minimum.
        let mut best: Option<Vec<EdgeId>> = None;
        fn all(net: &Network, cur: EdgeId, to: EdgeId, path: &mut Vec<EdgeId>, cap: f64, out: &mut Vec<Vec<EdgeId>>) {
            let cost: f64 = path.iter().map(|&e| net.edge(e).unwrap().length).sum();
            if cost > cap {
                return;
            }
            if cur == to {
                out.push(path.clone());
                return;
            }
            for &s in net.successors(cur) {
                if !path.contains(&s) {
                    path.push(s);
                    all(net, s, to, path, cap, out);
                    path.pop();
                }
            }
        }
        let mut paths = Vec::new();
        all(&net, from, to, &mut vec![from], r.cost, &mut paths);
        for p in paths {
            if best.as_ref().is_none_or(|b| p < *b) {
                best = Some(p);
            }
        }
        assert_eq!(Some(r.edges), best);
    }

    #[test]
    fn reroute_decisions() {
        let mut net = build_grid(3, 6, 100.0, 13.89, 1).unwrap();
        let route: Vec<EdgeId> = (0..5).map(|c| edge_between(&net, c, c + 1)).collect();
        let policy = ReroutePolicy::default();
        let cav = RouteProgress { class: VehicleClass::Cav, route: &route, route_index: 0 };
        let hdv = RouteProgress { class: VehicleClass::Hdv, ..cav };
        assert_eq!(plan_reroute(cav, &net, policy).unwrap(), RerouteDecision::NoChange);

        net.set_closed(route[3], true);
        let RerouteDecision::Reroute(r) = plan_reroute(cav, &net, policy).unwrap() else {
            panic!("CAV should reroute");
        };
        assert_eq!(r.edges[0], route[0]);
        assert!(!r.edges.iter().any(|&e| net.is_closed(e)));
        assert_eq!(plan_reroute(hdv, &net, policy).unwrap(), RerouteDecision::NoChange);
        let hdv_at_sign = RouteProgress { route_index: 2, ..hdv };
        assert!(matches!(plan_reroute(hdv_at_sign, &net, policy).unwrap(), RerouteDecision::Reroute(_)));
        let eager = ReroutePolicy { hdv: HdvRerouting::Immediate };
        assert!(matches!(plan_reroute(hdv, &net, eager).unwrap(), RerouteDecision::Reroute(_)));

        net.set_closed(route[4], true);
        assert_eq!(plan_reroute(cav, &net, policy).unwrap(), RerouteDecision::Unreachable);
    }
}

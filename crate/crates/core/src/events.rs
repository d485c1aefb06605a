//! Timed edge closures that inject non-recurrent congestion.

use thiserror::Error;

use crate::network::{EdgeId, Network};

/// Default closure window, seconds.
pub const DEFAULT_CLOSURE_START: f64 = 1200.0;
pub const DEFAULT_CLOSURE_END: f64 = 2400.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("closure references unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("closure window [{start}, {end}) is empty or negative")]
    BadWindow { start: f64, end: f64 },
}

/// Closes `edge_ids` over the half-open window `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureEvent {
    pub edge_ids: Vec<EdgeId>,
    pub start: f64,
    pub end: f64,
}

impl ClosureEvent {
    pub fn new(edge_ids: Vec<EdgeId>, start: f64, end: f64) -> Self {
        ClosureEvent { edge_ids, start, end }
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn validate(&self, network: &Network) -> Result<(), EventError> {
        if !(0.0 <= self.start && self.start < self.end) {
            return Err(EventError::BadWindow { start: self.start, end: self.end });
        }
        match self.edge_ids.iter().find(|&&e| network.edge(e).is_none()) {
            Some(&e) => Err(EventError::UnknownEdge(e)),
            None => Ok(()),
        }
    }
}

/// A closure flag that flipped this step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub edge: EdgeId,
    pub closed: bool,
}

/// Whether `edge` is closed at time `t` under `events`.
pub fn closed_at(events: &[ClosureEvent], edge: EdgeId, t: f64) -> bool {
    events.iter().any(|ev| ev.is_active(t) && ev.edge_ids.contains(&edge))
}

/// Sets every edge's closure flag from `events` at time `t` and returns the
/// flags that changed, in network edge order. Vehicles are never evicted.
pub fn apply_events(network: &mut Network, events: &[ClosureEvent], t: f64) -> Vec<Transition> {
    let ids: Vec<EdgeId> = network.edges().iter().map(|e| e.id).collect();
    let mut transitions = Vec::new();
    for id in ids {
        let closed = closed_at(events, id, t);
        if network.set_closed(id, closed) != Some(closed) {
            transitions.push(Transition { edge: id, closed });
        }
    }
    transitions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_grid;

    #[test]
    fn window_boundaries() {
        let mut net = build_grid(3, 4, 100.0, 13.89, 1).unwrap();
        let events = vec![ClosureEvent::new(vec![12, 13], 1200.0, 2400.0)];
        assert!(apply_events(&mut net, &events, 1199.0).is_empty());
        assert!(!net.is_closed(12));
        assert_eq!(
            apply_events(&mut net, &events, 1200.0),
            vec![Transition { edge: 12, closed: true }, Transition { edge: 13, closed: true }]
        );
        assert!(net.is_closed(13));
        assert!(apply_events(&mut net, &events, 2399.0).is_empty());
        assert_eq!(apply_events(&mut net, &events, 2400.0).len(), 2);
        assert!(!net.is_closed(12));
    }

    #[test]
    fn no_events_no_transitions() {
        let mut net = build_grid(2, 2, 50.0, 10.0, 1).unwrap();
        for t in 0..100 {
            assert!(apply_events(&mut net, &[], t as f64).is_empty());
        }
    }

    #[test]
    fn closed_duration_is_independent_of_step() {
        let ev = ClosureEvent::new(vec![0], 10.0, 20.0);
        for dt in [0.1, 0.25, 0.5, 1.0, 2.0] {
            let steps = (0..(40.0 / dt) as usize).filter(|&k| ev.is_active(k as f64 * dt)).count();
            assert!(((steps as f64) * dt - 10.0).abs() < 1e-9, "dt={dt}: {steps}");
        }
    }

    #[test]
    fn validation() {
        let net = build_grid(2, 2, 50.0, 10.0, 1).unwrap();
        assert!(ClosureEvent::new(vec![0, 7], 0.0, 1.0).validate(&net).is_ok());
        assert_eq!(ClosureEvent::new(vec![8], 0.0, 1.0).validate(&net), Err(EventError::UnknownEdge(8)));
        assert!(ClosureEvent::new(vec![0], 5.0, 5.0).validate(&net).is_err());
    }

    #[test]
    fn state_is_a_function_of_time() {
        let events = vec![ClosureEvent::new(vec![1], 3.0, 6.0), ClosureEvent::new(vec![1, 2], 5.0, 9.0)];
        let mut a = build_grid(2, 2, 50.0, 10.0, 1).unwrap();
        for t in 0..12 {
            apply_events(&mut a, &events, t as f64);
            let mut fresh = build_grid(2, 2, 50.0, 10.0, 1).unwrap();
            apply_events(&mut fresh, &events, t as f64);
            assert_eq!(a, fresh);
        }
    }
}

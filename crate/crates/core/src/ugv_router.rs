//! Closed ground tour over the selected refuel stops.

use serde::{Deserialize, Serialize};

use crate::scenario::{NodeId, Scenario, ScenarioError};
use crate::setcover::RefuelStopSet;

/// Largest stop count (depot included) solved exactly.
pub const EXACT_TSP_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UgvLeg {
    pub from: NodeId,
    pub to: NodeId,
    /// Road nodes from `from` to `to` inclusive.
    pub path: Vec<NodeId>,
    pub length: f64,
    pub depart: f64,
    pub arrive: f64,
}

/// Timestamped ground tour. `ordered_stops` starts and ends at the depot
/// (a single entry when the depot is the only stop); `dwell[k]` is the wait
/// at `ordered_stops[k]` before the next departure, or before the mission
/// ends for the last entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UgvRoute {
    pub ordered_stops: Vec<NodeId>,
    pub legs: Vec<UgvLeg>,
    pub dwell: Vec<f64>,
}

impl UgvRoute {
    /// Builds legs along shortest road paths for a closed stop order
    /// (`order[0]` is the depot and is not repeated at the end).
    pub fn from_order(s: &Scenario, order: &[NodeId]) -> Result<Self, ScenarioError> {
        let mut ordered_stops = order.to_vec();
        if order.len() > 1 {
            ordered_stops.push(order[0]);
        }
        let legs = ordered_stops
            .windows(2)
            .map(|w| {
                let p = s.road.shortest_path(w[0], w[1])?;
                Ok(UgvLeg {
                    from: w[0],
                    to: w[1],
                    path: p.nodes,
                    length: p.length,
                    depart: 0.0,
                    arrive: 0.0,
                })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        let mut route = UgvRoute {
            dwell: vec![0.0; ordered_stops.len()],
            ordered_stops,
            legs,
        };
        route.retime(s.ugv.speed);
        Ok(route)
    }

    /// Recomputes leg timestamps from the dwell times.
    pub fn retime(&mut self, speed: f64) {
        let mut t = 0.0;
        for (k, leg) in self.legs.iter_mut().enumerate() {
            t += self.dwell[k];
            leg.depart = t;
            t += leg.length / speed;
            leg.arrive = t;
        }
    }

    /// The same cycle driven the other way round.
    pub fn reversed(&self, s: &Scenario) -> Result<Self, ScenarioError> {
        let n = self.ordered_stops.len();
        let mut order: Vec<NodeId> = self.ordered_stops[..n.saturating_sub(1).max(1)].to_vec();
        order[1..].reverse();
        Self::from_order(s, &order)
    }

    pub fn total_length(&self) -> f64 {
        self.legs.iter().map(|l| l.length).sum()
    }

    /// Time the vehicle is back at the depot for good.
    pub fn end_time(&self) -> f64 {
        self.legs.last().map_or(0.0, |l| l.arrive) + self.dwell.last().copied().unwrap_or(0.0)
    }

    pub fn arrival_at(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.legs[k - 1].arrive
        }
    }
}

/// Minimum-length closed tour over `stops`, timestamped at the ground
/// vehicle's speed with no dwell.
pub fn route_ugv(s: &Scenario, stops: &RefuelStopSet) -> Result<UgvRoute, ScenarioError> {
    let mut nodes = stops.stops.clone();
    nodes[1..].sort();
    let dist = distance_matrix(s, &nodes)?;
    let order = if nodes.len() <= EXACT_TSP_LIMIT {
        held_karp(&dist)
    } else {
        two_opt(&dist, nearest_neighbor(&dist))
    };
    let order: Vec<NodeId> = order.into_iter().map(|i| nodes[i]).collect();
    UgvRoute::from_order(s, &order)
}

pub(crate) fn distance_matrix(
    s: &Scenario,
    nodes: &[NodeId],
) -> Result<Vec<Vec<f64>>, ScenarioError> {
    let ids = s.road.node_ids();
    nodes
        .iter()
        .map(|&a| {
            let from_a = s.road.distances_from(a)?;
            nodes
                .iter()
                .map(|b| {
                    let i = ids
                        .binary_search(b)
                        .map_err(|_| ScenarioError::UnknownNode(*b))?;
                    Ok(from_a[i])
                })
                .collect()
        })
        .collect()
}

/// Length of the closed tour visiting `order` (indices) and returning.
pub fn tour_length(dist: &[Vec<f64>], order: &[usize]) -> f64 {
    if order.len() < 2 {
        return 0.0;
    }
    let mut len = 0.0;
    for w in order.windows(2) {
        len += dist[w[0]][w[1]];
    }
    len + dist[order[order.len() - 1]][order[0]]
}

fn tie_tol(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

/// Exact tour starting at index 0. Among optimal tours the one with the
/// lexicographically smallest index sequence is returned.
pub fn held_karp(dist: &[Vec<f64>]) -> Vec<usize> {
    let n = dist.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let m = n - 1; // cities other than the start, index c ↔ node c + 1
    let full = (1usize << m) - 1;
    // to_go[mask][c]: cheapest finish from city c having visited `mask`
    let mut to_go = vec![vec![f64::INFINITY; m]; 1 << m];
    for c in 0..m {
        to_go[full][c] = dist[c + 1][0];
    }
    for mask in (1..full).rev() {
        for c in (0..m).filter(|c| mask & (1 << c) != 0) {
            let mut best = f64::INFINITY;
            for k in (0..m).filter(|k| mask & (1 << k) == 0) {
                best = best.min(dist[c + 1][k + 1] + to_go[mask | (1 << k)][k]);
            }
            to_go[mask][c] = best;
        }
    }
    let total = (0..m)
        .map(|c| dist[0][c + 1] + to_go[1 << c][c])
        .fold(f64::INFINITY, f64::min);
    // Forward reconstruction picking the smallest admissible next city.
    let mut order = vec![0];
    let mut mask = 0usize;
    let mut remaining = total;
    let mut cur = 0usize;
    while mask != full {
        let c = (0..m)
            .filter(|c| mask & (1 << c) == 0)
            .find(|&c| dist[cur][c + 1] + to_go[mask | (1 << c)][c] <= remaining + tie_tol(total))
            .expect("an optimal continuation exists");
        remaining = to_go[mask | (1 << c)][c];
        mask |= 1 << c;
        cur = c + 1;
        order.push(cur);
    }
    order
}

pub fn nearest_neighbor(dist: &[Vec<f64>]) -> Vec<usize> {
    let n = dist.len();
    let mut order = vec![0];
    let mut used = vec![false; n];
    if n > 0 {
        used[0] = true;
    }
    while order.len() < n {
        let cur = *order.last().unwrap();
        let next = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&a, &b| dist[cur][a].total_cmp(&dist[cur][b]).then(a.cmp(&b)))
            .unwrap();
        used[next] = true;
        order.push(next);
    }
    order
}

/// First-improvement 2-opt until no segment reversal shortens the tour.
/// Index 0 stays first.
pub fn two_opt(dist: &[Vec<f64>], mut order: Vec<usize>) -> Vec<usize> {
    let n = order.len();
    if n < 4 {
        return order;
    }
    let scale = tour_length(dist, &order);
    loop {
        let mut improved = false;
        for i in 1..n - 1 {
            for j in i + 1..n {
                let (a, b) = (order[i - 1], order[i]);
                let (c, d) = (order[j], order[(j + 1) % n]);
                let delta = dist[a][c] + dist[b][d] - dist[a][b] - dist[c][d];
                if delta < -tie_tol(scale) {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let mut rev = order.clone();
    rev[1..].reverse();
    order.min(rev)
}

/// True when no 2-exchange shortens the tour.
pub fn is_two_opt_fixpoint(dist: &[Vec<f64>], order: &[usize]) -> bool {
    let n = order.len();
    let scale = tour_length(dist, order);
    for i in 1..n.saturating_sub(1) {
        for j in i + 1..n {
            let (a, b) = (order[i - 1], order[i]);
            let (c, d) = (order[j], order[(j + 1) % n]);
            if dist[a][c] + dist[b][d] - dist[a][b] - dist[c][d] < -tie_tol(scale) {
                return false;
            }
        }
    }
    true
}

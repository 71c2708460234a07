use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::{invalid, NodeId, Point2D, ScenarioError, GEOM_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadEdge {
    pub a: NodeId,
    pub b: NodeId,
    /// Stored length; may exceed the straight-line distance.
    pub length: f64,
}

/// A walk along the road network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadPath {
    pub nodes: Vec<NodeId>,
    pub length: f64,
}

/// Undirected road graph with a designated depot.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    ids: Vec<NodeId>,
    positions: Vec<Point2D>,
    edges: Vec<RoadEdge>,
    /// Per node index: (neighbor index, length), sorted by neighbor id.
    adjacency: Vec<Vec<(usize, f64)>>,
    depot: NodeId,
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl RoadNetwork {
    /// Builds the graph. Structural problems that prevent indexing (duplicate
    /// ids, dangling edges) are errors here; metric invariants are checked by
    /// [`RoadNetwork::validate`].
    pub fn new(
        nodes: impl IntoIterator<Item = (NodeId, Point2D)>,
        edges: Vec<RoadEdge>,
        depot: NodeId,
    ) -> Result<Self, ScenarioError> {
        let mut map = BTreeMap::new();
        for (id, p) in nodes {
            if map.insert(id, p).is_some() {
                return Err(invalid(format!("duplicate road node {id}")));
            }
        }
        let ids: Vec<NodeId> = map.keys().copied().collect();
        let positions: Vec<Point2D> = map.values().copied().collect();
        let index = |id: NodeId| {
            ids.binary_search(&id)
                .map_err(|_| invalid(format!("edge references unknown node {id}")))
        };
        let mut best: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in &edges {
            let (i, j) = (index(e.a)?, index(e.b)?);
            for key in [(i, j), (j, i)] {
                let slot = best.entry(key).or_insert(f64::INFINITY);
                *slot = slot.min(e.length);
            }
        }
        let mut adjacency = vec![Vec::new(); ids.len()];
        for ((i, j), len) in best {
            adjacency[i].push((j, len));
        }
        if ids.binary_search(&depot).is_err() {
            return Err(invalid(format!("depot {depot} is not a road node")));
        }
        Ok(Self {
            ids,
            positions,
            edges,
            adjacency,
            depot,
        })
    }

    pub fn depot(&self) -> NodeId {
        self.depot
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.ids.binary_search(&id).is_ok()
    }

    fn index(&self, id: NodeId) -> Result<usize, ScenarioError> {
        self.ids
            .binary_search(&id)
            .map_err(|_| ScenarioError::UnknownNode(id))
    }

    pub fn position(&self, id: NodeId) -> Option<Point2D> {
        self.index(id).ok().map(|i| self.positions[i])
    }

    /// Nodes and positions in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, Point2D)> + '_ {
        self.ids.iter().copied().zip(self.positions.iter().copied())
    }

    pub(super) fn validate(&self) -> Result<(), ScenarioError> {
        for (id, p) in self.nodes() {
            if !p.is_finite() {
                return Err(invalid(format!("road node {id} has non-finite position")));
            }
        }
        for e in &self.edges {
            if e.a == e.b {
                return Err(invalid(format!("self-loop edge at node {}", e.a)));
            }
            if !e.length.is_finite() || e.length <= 0.0 {
                return Err(invalid(format!(
                    "edge {}-{} must have positive length",
                    e.a, e.b
                )));
            }
            let pa = self.position(e.a).expect("indexed at construction");
            let pb = self.position(e.b).expect("indexed at construction");
            if e.length < pa.distance(&pb) - GEOM_EPS {
                return Err(invalid(format!(
                    "edge {}-{} is shorter than the straight-line distance",
                    e.a, e.b
                )));
            }
        }
        let dist = self.dijkstra(self.index(self.depot)?);
        if let Some(i) = dist.iter().position(|d| d.is_infinite()) {
            return Err(invalid(format!(
                "road network is not connected: node {} unreachable from depot",
                self.ids[i]
            )));
        }
        Ok(())
    }

    fn dijkstra(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.ids.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Frontier {
            dist: 0.0,
            node: source,
        });
        while let Some(Frontier { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &(next, len) in &self.adjacency[node] {
                let nd = d + len;
                if nd < dist[next] {
                    dist[next] = nd;
                    heap.push(Frontier {
                        dist: nd,
                        node: next,
                    });
                }
            }
        }
        dist
    }

    /// Road distance from `from` to every node, in [`RoadNetwork::node_ids`]
    /// order.
    pub fn distances_from(&self, from: NodeId) -> Result<Vec<f64>, ScenarioError> {
        Ok(self.dijkstra(self.index(from)?))
    }

    /// Road distance between two nodes.
    pub fn distance(&self, a: NodeId, b: NodeId) -> Result<f64, ScenarioError> {
        Ok(self.shortest_path(a, b)?.length)
    }

    /// Minimum-length walk from `a` to `b`. Among equal-length walks the
    /// lexicographically smallest node sequence wins.
    pub fn shortest_path(&self, a: NodeId, b: NodeId) -> Result<RoadPath, ScenarioError> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        // Distances to the target let the walk pick the smallest admissible
        // successor at every step.
        let to_target = self.dijkstra(ib);
        if to_target[ia].is_infinite() {
            return Err(ScenarioError::NoPath { from: a, to: b });
        }
        let mut nodes = vec![a];
        let mut length = 0.0;
        let mut cur = ia;
        while cur != ib {
            let tol = GEOM_EPS * to_target[cur].max(1.0);
            let &(next, len) = self.adjacency[cur]
                .iter()
                .find(|&&(n, len)| (len + to_target[n] - to_target[cur]).abs() <= tol)
                .expect("a shortest-path successor exists");
            nodes.push(self.ids[next]);
            length += len;
            cur = next;
        }
        Ok(RoadPath { nodes, length })
    }

    /// Road node closest to `p` in straight-line distance; ties go to the
    /// smaller id.
    pub fn nearest_node(&self, p: &Point2D) -> NodeId {
        let mut best = (f64::INFINITY, self.depot);
        for (id, q) in self.nodes() {
            let d = q.distance(p);
            if d < best.0 - GEOM_EPS {
                best = (d, id);
            }
        }
        best.1
    }
}

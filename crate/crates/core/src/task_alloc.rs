//! Splits the mission into one subproblem per ground-tour leg.
//!
//! Every mission point is labeled with its nearest covering stop on the tour.
//! The leg ending at a stop takes that stop's points; the first leg also
//! takes the depot's points, so the closing leg back to the depot carries
//! none.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{CoverageMatrix, NodeId, Scenario, GEOM_EPS};
use crate::ugv_router::UgvRoute;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AllocationError {
    #[error("mission point {0} is not covered by any stop on the tour")]
    Unlabeled(usize),
}

/// One leg of the ground tour with the mission points the UAV serves on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubProblem {
    pub index: usize,
    pub origin_stop: NodeId,
    pub dest_stop: NodeId,
    pub assigned_points: Vec<usize>,
    /// Index into [`UgvRoute::legs`]; `None` when the tour is the depot alone.
    pub leg: Option<usize>,
}

/// Tour position (index into `ordered_stops`) of each point's nearest
/// covering stop. Ties go to the stop visited first.
pub fn label_points(
    s: &Scenario,
    cov: &CoverageMatrix,
    route: &UgvRoute,
) -> Result<Vec<usize>, AllocationError> {
    let n_stops = distinct_stops(route);
    s.mission_points
        .iter()
        .map(|p| {
            let mut best: Option<(f64, usize)> = None;
            for (k, &stop) in route.ordered_stops[..n_stops].iter().enumerate() {
                if !cov.covers(stop, p.id) {
                    continue;
                }
                let at = s.road.position(stop).expect("tour stops are road nodes");
                let d = at.distance(&p.position);
                if best.is_none_or(|(bd, _)| d < bd - GEOM_EPS) {
                    best = Some((d, k));
                }
            }
            best.map(|(_, k)| k).ok_or(AllocationError::Unlabeled(p.id))
        })
        .collect()
}

fn distinct_stops(route: &UgvRoute) -> usize {
    route.ordered_stops.len().saturating_sub(1).max(1)
}

pub fn allocate(
    s: &Scenario,
    cov: &CoverageMatrix,
    route: &UgvRoute,
) -> Result<Vec<SubProblem>, AllocationError> {
    let labels = label_points(s, cov, route)?;
    let n_stops = distinct_stops(route);
    if route.legs.is_empty() {
        return Ok(vec![SubProblem {
            index: 0,
            origin_stop: route.ordered_stops[0],
            dest_stop: route.ordered_stops[0],
            assigned_points: (0..s.mission_points.len()).collect(),
            leg: None,
        }]);
    }
    let mut subproblems: Vec<SubProblem> = route
        .legs
        .iter()
        .enumerate()
        .map(|(k, leg)| SubProblem {
            index: k,
            origin_stop: leg.from,
            dest_stop: leg.to,
            assigned_points: Vec::new(),
            leg: Some(k),
        })
        .collect();
    debug_assert_eq!(subproblems.len(), n_stops);
    for (p, &k) in labels.iter().enumerate() {
        // label k > 0 belongs to the leg arriving at stop k; the depot's
        // points go to the first leg
        let sp = k.saturating_sub(1);
        subproblems[sp].assigned_points.push(p);
    }
    Ok(subproblems)
}

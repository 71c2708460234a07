//! Bi-level orchestration: outer covers, ground tours, cascaded inner solves,
//! stitched plans, metrics and the ground-only baseline.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evrp::{build_instance, solve, LegRecharge, LegSortie, SearchConfig};
use crate::scenario::{compute_coverage, NodeId, Scenario, ScenarioError};
use crate::setcover::{
    exact_cover_all_optimal, greedy_cover, CoverMethod, RefuelStopSet, DEFAULT_MAX_SOLUTIONS,
};
use crate::task_alloc::{allocate, AllocationError, SubProblem};
use crate::ugv_router::{route_ugv, UgvRoute};

/// Default distance within which a road node counts as passing a point.
pub const DEFAULT_SNAP_TOLERANCE: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OuterSelection {
    Greedy,
    Exact,
    Both,
}

impl OuterSelection {
    fn methods(self) -> &'static [CoverMethod] {
        match self {
            OuterSelection::Greedy => &[CoverMethod::Greedy],
            OuterSelection::Exact => &[CoverMethod::Exact],
            OuterSelection::Both => &[CoverMethod::Exact, CoverMethod::Greedy],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMethod {
    Exact,
    Greedy,
    UgvOnly,
}

impl From<CoverMethod> for PlanMethod {
    fn from(m: CoverMethod) -> Self {
        match m {
            CoverMethod::Greedy => PlanMethod::Greedy,
            CoverMethod::Exact => PlanMethod::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub search: SearchConfig,
    pub snap_tolerance: f64,
    /// Cap on enumerated exact optima.
    pub max_solutions: usize,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            snap_tolerance: DEFAULT_SNAP_TOLERANCE,
            max_solutions: DEFAULT_MAX_SOLUTIONS,
        }
    }
}

/// A mission point served by the ground vehicle driving past it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UgvVisit {
    pub point: usize,
    pub node: NodeId,
    pub time: f64,
}

/// Inner-level bookkeeping for one subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubproblemRecord {
    pub index: usize,
    pub origin_stop: NodeId,
    pub dest_stop: NodeId,
    /// Points the UAV was asked to serve (UGV pass-bys removed).
    pub assigned_points: Vec<usize>,
    pub start_time: f64,
    pub dest_window_open: f64,
    pub objective: f64,
    pub search_trace: Vec<f64>,
}

/// UAV side of a plan on the global clock.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UavRoute {
    pub sorties: Vec<LegSortie>,
    pub recharges: Vec<LegRecharge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleMetrics {
    /// Seconds moving (UGV) or airborne (UAV).
    pub travel_time: f64,
    pub energy: f64,
    pub missions_visited: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MissionMetrics {
    /// Both vehicles back at the depot.
    pub total_time: f64,
    pub total_energy: f64,
    pub ugv: VehicleMetrics,
    pub uav: VehicleMetrics,
    pub recharges_on_ugv: usize,
    pub recharges_at_depot: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooperativePlan {
    pub outer_method: PlanMethod,
    /// Every outer method that produced this cover.
    pub found_by: Vec<PlanMethod>,
    /// `None` for the ground-only baseline.
    pub cover_used: Option<RefuelStopSet>,
    pub ugv_route: UgvRoute,
    pub uav_route: UavRoute,
    pub ugv_visits: Vec<UgvVisit>,
    pub dropped: Vec<usize>,
    pub subproblems: Vec<SubproblemRecord>,
    pub metrics: MissionMetrics,
    pub snap_tolerance: f64,
}

impl CooperativePlan {
    pub fn found_by_method(&self, m: PlanMethod) -> bool {
        self.found_by.contains(&m)
    }

    fn rank(&self, other: &Self) -> Ordering {
        let drops = |p: &Self| !p.dropped.is_empty();
        drops(self)
            .cmp(&drops(other))
            .then(self.metrics.total_time.total_cmp(&other.metrics.total_time))
            .then(
                self.metrics
                    .uav
                    .travel_time
                    .total_cmp(&other.metrics.uav.travel_time),
            )
    }
}

/// Plans for every outer method and every enumerated cover, best first.
/// Plans with drops sort after plans without.
pub fn plan(
    s: &Scenario,
    outer: OuterSelection,
    opts: &PlanOptions,
) -> Result<Vec<CooperativePlan>, PipelineError> {
    s.validate()?;
    let cov = compute_coverage(s);
    let depot = s.depot();

    // distinct covers, remembering every method that found each
    let mut covers: Vec<(RefuelStopSet, Vec<PlanMethod>)> = Vec::new();
    for &m in outer.methods() {
        let found = match m {
            CoverMethod::Greedy => vec![greedy_cover(&cov, depot)],
            CoverMethod::Exact => exact_cover_all_optimal(&cov, depot, opts.max_solutions).covers,
        };
        for set in found {
            let key = sorted(&set.stops);
            match covers.iter_mut().find(|(c, _)| sorted(&c.stops) == key) {
                Some((_, by)) => by.push(m.into()),
                None => covers.push((set, vec![m.into()])),
            }
        }
    }

    let mut plans = covers
        .par_iter()
        .map(|(set, by)| {
            let forward = route_ugv(s, set)?;
            let backward = forward.reversed(s)?;
            let mut best = plan_for_tour(s, &cov, set, forward, by, opts)?;
            if backward.ordered_stops != best.ugv_route.ordered_stops {
                let other = plan_for_tour(s, &cov, set, backward, by, opts)?;
                if other.rank(&best) == Ordering::Less {
                    best = other;
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    plans.sort_by(|a, b| {
        a.rank(b)
            .then(a.outer_method.cmp(&b.outer_method))
            .then_with(|| {
                let key = |p: &CooperativePlan| p.cover_used.as_ref().map(|c| sorted(&c.stops));
                key(a).cmp(&key(b))
            })
    });
    Ok(plans)
}

fn sorted(ids: &[NodeId]) -> Vec<NodeId> {
    let mut v = ids.to_vec();
    v.sort();
    v
}

fn plan_for_tour(
    s: &Scenario,
    cov: &crate::scenario::CoverageMatrix,
    set: &RefuelStopSet,
    mut route: UgvRoute,
    found_by: &[PlanMethod],
    opts: &PlanOptions,
) -> Result<CooperativePlan, PipelineError> {
    let mut subproblems = allocate(s, cov, &route)?;
    // points the ground tour drives past are served by the UGV
    let passed = pass_bys(s, &route, opts.snap_tolerance)?;
    for sp in &mut subproblems {
        sp.assigned_points
            .retain(|p| passed.iter().all(|v| v.point != *p));
    }

    let mut uav = UavRoute::default();
    let mut dropped = Vec::new();
    let mut records = Vec::with_capacity(subproblems.len());
    for sp in &subproblems {
        let inst = build_instance(sp, s, &route, opts.search.drop_penalty);
        let cfg = SearchConfig {
            seed: opts.search.seed.wrapping_add(sp.index as u64),
            ..opts.search
        };
        let solved = solve(&inst, &cfg);
        cascade(&mut route, sp, &solved.schedule, s.ugv.speed);
        records.push(SubproblemRecord {
            index: sp.index,
            origin_stop: sp.origin_stop,
            dest_stop: sp.dest_stop,
            assigned_points: sp.assigned_points.clone(),
            start_time: inst.start_time,
            dest_window_open: inst.dest_window_open,
            objective: solved.objective,
            search_trace: solved.search_trace,
        });
        uav.sorties.extend(solved.sorties);
        uav.recharges.extend(solved.recharges);
        dropped.extend(solved.dropped);
    }
    dropped.sort_unstable();
    // dwell changed the clock, so pass-by times are taken afterwards
    let ugv_visits = pass_bys(s, &route, opts.snap_tolerance)?;
    let metrics = mission_metrics(s, &route, &uav, ugv_visits.len(), dropped.len());
    Ok(CooperativePlan {
        outer_method: found_by[0],
        found_by: found_by.to_vec(),
        cover_used: Some(set.clone()),
        ugv_route: route,
        uav_route: uav,
        ugv_visits,
        dropped,
        subproblems: records,
        metrics,
        snap_tolerance: opts.snap_tolerance,
    })
}

/// Folds a solved subproblem into the ground schedule: the UGV waits at the
/// origin for origin sorties and at the destination until the UAV is back.
fn cascade(route: &mut UgvRoute, sp: &SubProblem, sched: &crate::evrp::LegSchedule, speed: f64) {
    match sp.leg {
        Some(k) => {
            route.dwell[k] += sched.ugv_depart - sched.start;
            route.dwell[k + 1] += sched.end - sched.ugv_arrive;
        }
        None => route.dwell[0] += sched.end - sched.start,
    }
    route.retime(speed);
}

/// First time the tour passes within `tol` of each mission point.
fn pass_bys(s: &Scenario, route: &UgvRoute, tol: f64) -> Result<Vec<UgvVisit>, ScenarioError> {
    let ids = s.road.node_ids();
    // (node, time) along the tour in driving order
    let mut passes: Vec<(NodeId, f64)> = vec![(route.ordered_stops[0], 0.0)];
    for leg in &route.legs {
        let from = s.road.distances_from(leg.from)?;
        for &n in &leg.path[1..] {
            let i = ids
                .binary_search(&n)
                .map_err(|_| ScenarioError::UnknownNode(n))?;
            passes.push((n, leg.depart + from[i] / s.ugv.speed));
        }
    }
    let mut visits = Vec::new();
    for p in &s.mission_points {
        let hit = passes.iter().find(|(n, _)| {
            s.road
                .position(*n)
                .is_some_and(|q| q.distance(&p.position) <= tol)
        });
        if let Some(&(node, time)) = hit {
            visits.push(UgvVisit {
                point: p.id,
                node,
                time,
            });
        }
    }
    Ok(visits)
}

fn mission_metrics(
    s: &Scenario,
    route: &UgvRoute,
    uav: &UavRoute,
    ugv_visits: usize,
    dropped: usize,
) -> MissionMetrics {
    let ugv_time = route.total_length() / s.ugv.speed;
    let uav_time: f64 = uav.sorties.iter().map(|x| x.duration).sum();
    let ugv = VehicleMetrics {
        travel_time: ugv_time,
        energy: ugv_time * s.ugv.cruise_power,
        missions_visited: ugv_visits,
    };
    let uav_m = VehicleMetrics {
        travel_time: uav_time,
        energy: uav_time * s.uav.cruise_power,
        missions_visited: uav.sorties.iter().map(|x| x.visits.len()).sum(),
    };
    let at_depot = uav.recharges.iter().filter(|r| r.node == s.depot()).count();
    let uav_end = uav.recharges.iter().map(|r| r.end).fold(0.0, f64::max);
    MissionMetrics {
        total_time: route.end_time().max(uav_end),
        total_energy: ugv.energy + uav_m.energy,
        ugv,
        uav: uav_m,
        recharges_on_ugv: uav.recharges.len() - at_depot,
        recharges_at_depot: at_depot,
        dropped,
    }
}

/// The ground vehicle alone: every point snapped to its nearest road node,
/// one closed tour over those nodes.
pub fn ugv_only_baseline(s: &Scenario) -> Result<CooperativePlan, PipelineError> {
    s.validate()?;
    let depot = s.depot();
    let mut stops = vec![depot];
    let snapped: Vec<NodeId> = s
        .mission_points
        .iter()
        .map(|p| s.road.nearest_node(&p.position))
        .collect();
    let mut rest: Vec<NodeId> = snapped.iter().copied().filter(|&n| n != depot).collect();
    rest.sort();
    rest.dedup();
    stops.extend(rest);
    let set = RefuelStopSet {
        stops,
        method: CoverMethod::Greedy,
        optimum_index: 0,
    };
    let route = route_ugv(s, &set)?;
    let arrival = |n: NodeId| {
        if n == depot {
            return 0.0;
        }
        let k = route
            .ordered_stops
            .iter()
            .position(|&x| x == n)
            .expect("snapped nodes are tour stops");
        route.arrival_at(k)
    };
    let ugv_visits: Vec<UgvVisit> = s
        .mission_points
        .iter()
        .zip(&snapped)
        .map(|(p, &n)| UgvVisit {
            point: p.id,
            node: n,
            time: arrival(n),
        })
        .collect();
    let uav = UavRoute::default();
    let metrics = mission_metrics(s, &route, &uav, ugv_visits.len(), 0);
    let snap_tolerance = ugv_visits
        .iter()
        .map(|v| {
            let at = s.road.position(v.node).expect("snapped to a road node");
            at.distance(&s.point(v.point))
        })
        .fold(0.0, f64::max);
    Ok(CooperativePlan {
        outer_method: PlanMethod::UgvOnly,
        found_by: vec![PlanMethod::UgvOnly],
        cover_used: None,
        ugv_route: route,
        uav_route: uav,
        ugv_visits,
        dropped: Vec::new(),
        subproblems: Vec::new(),
        metrics,
        snap_tolerance,
    })
}

/// `100 × (baseline − value) / baseline`.
pub fn improvement_pct(baseline: f64, value: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        100.0 * (baseline - value) / baseline
    }
}

/// One compared plan, with its savings against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub method: PlanMethod,
    pub metrics: MissionMetrics,
    pub time_improvement_pct: f64,
    pub energy_improvement_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline: MissionMetrics,
    pub rows: Vec<ComparisonRow>,
}

/// One line of the summary table: a metric across plans, the baseline and
/// the per-plan improvements.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryLine {
    pub metric: &'static str,
    pub unit: &'static str,
    pub plans: Vec<f64>,
    pub baseline: f64,
    pub improvements: Vec<f64>,
}

impl ComparisonReport {
    /// Time in minutes and energy in megajoules.
    pub fn summary(&self) -> [SummaryLine; 2] {
        let time = SummaryLine {
            metric: "time",
            unit: "min",
            plans: self
                .rows
                .iter()
                .map(|r| r.metrics.total_time / 60.0)
                .collect(),
            baseline: self.baseline.total_time / 60.0,
            improvements: self.rows.iter().map(|r| r.time_improvement_pct).collect(),
        };
        let energy = SummaryLine {
            metric: "energy",
            unit: "MJ",
            plans: self
                .rows
                .iter()
                .map(|r| r.metrics.total_energy / 1e6)
                .collect(),
            baseline: self.baseline.total_energy / 1e6,
            improvements: self.rows.iter().map(|r| r.energy_improvement_pct).collect(),
        };
        [time, energy]
    }
}

/// Rows labeled `<method>` for the first plan of each method and
/// `<method>#k` for later ones.
pub fn compare(plans: &[CooperativePlan], baseline: &CooperativePlan) -> ComparisonReport {
    let name = |m: PlanMethod| match m {
        PlanMethod::Exact => "exact",
        PlanMethod::Greedy => "greedy",
        PlanMethod::UgvOnly => "ugv_only",
    };
    let mut seen: Vec<(PlanMethod, usize)> = Vec::new();
    let rows = plans
        .iter()
        .map(|p| {
            let m = p.outer_method;
            let k = match seen.iter_mut().find(|(x, _)| *x == m) {
                Some((_, c)) => {
                    *c += 1;
                    *c
                }
                None => {
                    seen.push((m, 0));
                    0
                }
            };
            let label = if k == 0 {
                name(m).to_string()
            } else {
                format!("{}#{k}", name(m))
            };
            ComparisonRow {
                label,
                method: m,
                metrics: p.metrics,
                time_improvement_pct: improvement_pct(
                    baseline.metrics.total_time,
                    p.metrics.total_time,
                ),
                energy_improvement_pct: improvement_pct(
                    baseline.metrics.total_energy,
                    p.metrics.total_energy,
                ),
            }
        })
        .collect();
    ComparisonReport {
        baseline: baseline.metrics,
        rows,
    }
}

/// Best plan found by each requested outer method, in method order.
pub fn best_per_method(plans: &[CooperativePlan], outer: OuterSelection) -> Vec<CooperativePlan> {
    outer
        .methods()
        .iter()
        .filter_map(|&m| {
            let m = PlanMethod::from(m);
            plans.iter().find(|p| p.found_by_method(m)).map(|p| {
                let mut p = p.clone();
                p.outer_method = m;
                p
            })
        })
        .collect()
}

//! Inner level: UAV routing for one subproblem as an energy-constrained VRP.
//!
//! The instance has two refuel nodes (origin and destination of the ground
//! leg) and the assigned mission points. A route is a sequence of sorties,
//! each bounded by the UAV endurance, in three phases:
//!
//! * origin sorties launch and land at the origin while the UGV waits there;
//! * at most one transfer sortie leaves the origin with the UGV and lands at
//!   the destination, hovering there if it arrives before the UGV;
//! * destination sorties launch and land at the destination while the UGV
//!   waits there.
//!
//! Without a transfer sortie the UAV rides the UGV across the leg. The
//! objective is the subproblem makespan (until both vehicles are at the
//! destination with the UAV recharged) plus a penalty per dropped visit.

mod construct;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{NodeId, Point2D, RechargeModel, Scenario};
use crate::task_alloc::SubProblem;
use crate::ugv_router::UgvRoute;

pub use construct::construct_initial;
pub use search::{local_search_fixpoint, solve, SearchConfig};

/// Relative slack for endurance checks.
pub(crate) const FEAS_EPS: f64 = 1e-9;

pub const ORIGIN: usize = 0;
pub const DEST: usize = 1;

#[derive(Debug, Error)]
pub enum EvrpError {
    #[error("instance is infeasible even with every visit dropped")]
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    OriginRefuel,
    DestRefuel,
    /// Carries the mission point id.
    Mission(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvrpNode {
    pub kind: NodeKind,
    pub position: Point2D,
}

/// Subproblem graph. Node 0 is the origin refuel stop, node 1 the
/// destination, nodes 2.. the mission points in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvrpInstance {
    pub nodes: Vec<EvrpNode>,
    pub origin_stop: NodeId,
    pub dest_stop: NodeId,
    /// Travel seconds, buffers included on refuel arcs.
    pub cost: Vec<Vec<f64>>,
    /// Joules, `cruise_power × cost`.
    pub fuel_cost: Vec<Vec<f64>>,
    /// UAV fuel capacity in joules.
    pub endurance: f64,
    pub cruise_power: f64,
    pub recharge: RechargeModel,
    pub uav_speed: f64,
    pub takeoff_buffer: f64,
    pub landing_buffer: f64,
    /// Global time the subproblem begins (both vehicles at the origin).
    pub start_time: f64,
    /// UGV driving time from origin to destination.
    pub ugv_leg_time: f64,
    /// UGV arrival at the destination if it leaves at `start_time`.
    pub dest_window_open: f64,
    pub drop_penalty: f64,
}

impl EvrpInstance {
    /// Builds an instance from raw geometry. `missions` pairs point ids with
    /// positions; they are sorted by id.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        s: &Scenario,
        origin: (NodeId, Point2D),
        dest: (NodeId, Point2D),
        missions: &[(usize, Point2D)],
        start_time: f64,
        ugv_leg_time: f64,
        drop_penalty: f64,
    ) -> Self {
        let mut missions = missions.to_vec();
        missions.sort_by_key(|m| m.0);
        let mut nodes = vec![
            EvrpNode {
                kind: NodeKind::OriginRefuel,
                position: origin.1,
            },
            EvrpNode {
                kind: NodeKind::DestRefuel,
                position: dest.1,
            },
        ];
        nodes.extend(missions.iter().map(|&(id, position)| EvrpNode {
            kind: NodeKind::Mission(id),
            position,
        }));
        let half_buffer = 0.5 * (s.takeoff_buffer + s.landing_buffer);
        let is_refuel = |i: usize| i < 2;
        let cost: Vec<Vec<f64>> = (0..nodes.len())
            .map(|i| {
                (0..nodes.len())
                    .map(|j| {
                        if i == j {
                            return 0.0;
                        }
                        let fly = nodes[i].position.distance(&nodes[j].position) / s.uav.speed;
                        let buffers = half_buffer
                            * (usize::from(is_refuel(i)) + usize::from(is_refuel(j))) as f64;
                        fly + buffers
                    })
                    .collect()
            })
            .collect();
        let fuel_cost = cost
            .iter()
            .map(|row| row.iter().map(|c| c * s.uav.cruise_power).collect())
            .collect();
        Self {
            nodes,
            origin_stop: origin.0,
            dest_stop: dest.0,
            cost,
            fuel_cost,
            endurance: s.uav.fuel_capacity,
            cruise_power: s.uav.cruise_power,
            recharge: s.uav.recharge,
            uav_speed: s.uav.speed,
            takeoff_buffer: s.takeoff_buffer,
            landing_buffer: s.landing_buffer,
            start_time,
            ugv_leg_time,
            dest_window_open: start_time + ugv_leg_time,
            drop_penalty,
        }
    }

    /// Airborne seconds available on a full charge.
    pub fn endurance_seconds(&self) -> f64 {
        self.endurance / self.cruise_power
    }

    pub fn n_missions(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn mission_nodes(&self) -> std::ops::Range<usize> {
        2..self.nodes.len()
    }

    pub fn point_id(&self, node: usize) -> usize {
        match self.nodes[node].kind {
            NodeKind::Mission(id) => id,
            _ => panic!("node {node} is a refuel node"),
        }
    }

    pub(crate) fn recharge_time(&self, flight: f64) -> f64 {
        self.recharge.recharge_time(flight * self.cruise_power)
    }
}

/// Instance for `sp` against the ground schedule as it currently stands:
/// the subproblem starts when the UGV is due to leave its origin.
pub fn build_instance(
    sp: &SubProblem,
    s: &Scenario,
    ugv_schedule: &UgvRoute,
    drop_penalty: f64,
) -> EvrpInstance {
    let (start, leg_time) = match sp.leg {
        Some(k) => {
            let leg = &ugv_schedule.legs[k];
            (leg.depart, leg.arrive - leg.depart)
        }
        None => (0.0, 0.0),
    };
    let pos = |id: NodeId| {
        s.road
            .position(id)
            .expect("subproblem stops are road nodes")
    };
    let missions: Vec<(usize, Point2D)> = sp
        .assigned_points
        .iter()
        .map(|&p| (p, s.point(p)))
        .collect();
    EvrpInstance::new(
        s,
        (sp.origin_stop, pos(sp.origin_stop)),
        (sp.dest_stop, pos(sp.dest_stop)),
        &missions,
        start,
        leg_time,
        drop_penalty,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Launch and land at the origin.
    AtOrigin,
    /// Launch at the origin, land at the destination.
    Transfer,
    /// Launch and land at the destination.
    AtDest,
}

impl Phase {
    pub fn launch(self) -> usize {
        match self {
            Phase::AtOrigin | Phase::Transfer => ORIGIN,
            Phase::AtDest => DEST,
        }
    }

    pub fn land(self) -> usize {
        match self {
            Phase::AtOrigin => ORIGIN,
            Phase::Transfer | Phase::AtDest => DEST,
        }
    }
}

/// Search-level sortie: a phase and the visited mission nodes in order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sortie {
    pub phase: Phase,
    pub visits: Vec<usize>,
}

/// Search-level route over instance node indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Route {
    pub sorties: Vec<Sortie>,
    pub dropped: Vec<usize>,
}

/// Objective breakdown of a feasible route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    /// Makespan + drop penalty.
    pub objective: f64,
    /// Total airborne seconds (tie-breaker).
    pub flight: f64,
}

impl Score {
    /// Strictly better in (objective, flight) order, with float slack.
    pub fn better_than(&self, other: &Score) -> bool {
        let tol = 1e-9 * other.objective.abs().max(1.0);
        if self.objective < other.objective - tol {
            return true;
        }
        self.objective <= other.objective + tol
            && self.flight < other.flight - 1e-9 * other.flight.abs().max(1.0)
    }
}

/// Flight time of a sortie: buffers plus cruise.
pub fn sortie_duration(inst: &EvrpInstance, phase: Phase, visits: &[usize]) -> f64 {
    let mut prev = phase.launch();
    let mut d = 0.0;
    for &v in visits {
        d += inst.cost[prev][v];
        prev = v;
    }
    d + inst.cost[prev][phase.land()]
}

/// Launch to touchdown. A transfer sortie leaves with the UGV and hovers
/// over the destination until the UGV gets there.
pub fn airborne_time(inst: &EvrpInstance, phase: Phase, visits: &[usize]) -> f64 {
    let d = sortie_duration(inst, phase, visits);
    if phase == Phase::Transfer {
        d.max(inst.ugv_leg_time)
    } else {
        d
    }
}

impl Route {
    /// Drops empty sorties and orders sorties by phase. Returns false when
    /// more than one transfer sortie remains.
    pub fn normalize(&mut self) -> bool {
        self.sorties.retain(|s| !s.visits.is_empty());
        self.sorties.sort_by_key(|s| s.phase);
        self.dropped.sort_unstable();
        self.sorties
            .iter()
            .filter(|s| s.phase == Phase::Transfer)
            .count()
            <= 1
    }

    /// `None` when some sortie exceeds the endurance or the phase order is
    /// broken.
    pub fn score(&self, inst: &EvrpInstance) -> Option<Score> {
        let limit = inst.endurance_seconds() * (1.0 + FEAS_EPS);
        let mut t: f64 = 0.0;
        let mut flight = 0.0;
        let mut last_phase = Phase::AtOrigin;
        let mut transfer_seen = false;
        let mut departed = None;
        for s in &self.sorties {
            if s.phase < last_phase || (s.phase == Phase::Transfer && transfer_seen) {
                return None;
            }
            last_phase = s.phase;
            let dur = airborne_time(inst, s.phase, &s.visits);
            if dur > limit {
                return None;
            }
            flight += dur;
            if s.phase != Phase::AtOrigin && departed.is_none() {
                departed = Some(t);
            }
            if s.phase == Phase::AtDest && !transfer_seen {
                // UAV rode across the leg
                t = t.max(departed.unwrap() + inst.ugv_leg_time);
            }
            if s.phase != Phase::AtOrigin {
                transfer_seen = true;
            }
            t += dur + inst.recharge_time(dur);
        }
        if !transfer_seen {
            t += inst.ugv_leg_time;
        }
        Some(Score {
            objective: t + inst.drop_penalty * self.dropped.len() as f64,
            flight,
        })
    }

    pub fn visited(&self) -> impl Iterator<Item = usize> + '_ {
        self.sorties.iter().flat_map(|s| s.visits.iter().copied())
    }
}

/// Timestamped sortie of a solved subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegSortie {
    pub phase: Phase,
    pub launch_node: NodeId,
    pub land_node: NodeId,
    /// Mission point ids in visiting order.
    pub visits: Vec<usize>,
    /// Global arrival time at each visit.
    pub visit_times: Vec<f64>,
    pub launch_time: f64,
    pub land_time: f64,
    pub duration: f64,
    pub fuel_used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegRecharge {
    pub node: NodeId,
    pub start: f64,
    pub end: f64,
    pub amount: f64,
}

/// Ground-side consequences of the UAV route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegSchedule {
    pub start: f64,
    /// UGV leaves the origin (after any origin sorties).
    pub ugv_depart: f64,
    pub ugv_arrive: f64,
    /// Both vehicles at the destination, UAV recharged.
    pub end: f64,
}

/// Solved subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavLegRoute {
    pub sorties: Vec<LegSortie>,
    /// Mission point ids left unvisited.
    pub dropped: Vec<usize>,
    pub recharges: Vec<LegRecharge>,
    pub schedule: LegSchedule,
    pub objective: f64,
    /// Incumbent objective after construction and after every improvement.
    pub search_trace: Vec<f64>,
}

impl UavLegRoute {
    /// Lays a feasible search route onto the global clock.
    pub fn materialize(inst: &EvrpInstance, route: &Route, search_trace: Vec<f64>) -> Self {
        let score = route.score(inst).expect("materialized routes are feasible");
        let refuel = |n: usize| {
            if n == ORIGIN {
                inst.origin_stop
            } else {
                inst.dest_stop
            }
        };
        let mut t = inst.start_time;
        let mut sorties = Vec::new();
        let mut recharges = Vec::new();
        let mut ugv_depart = None;
        let mut transfer_seen = false;
        for s in &route.sorties {
            let dur = airborne_time(inst, s.phase, &s.visits);
            if s.phase != Phase::AtOrigin && ugv_depart.is_none() {
                ugv_depart = Some(t);
            }
            let launch = if s.phase == Phase::AtDest && !transfer_seen {
                t.max(ugv_depart.unwrap() + inst.ugv_leg_time)
            } else {
                t
            };
            if s.phase != Phase::AtOrigin {
                transfer_seen = true;
            }
            let land = launch + dur;
            // physical timeline: full takeoff buffer first, then cruise
            let mut clock = launch + inst.takeoff_buffer;
            let mut prev = inst.nodes[s.phase.launch()].position;
            let mut visit_times = Vec::with_capacity(s.visits.len());
            for &v in &s.visits {
                let p = inst.nodes[v].position;
                clock += prev.distance(&p) / inst.uav_speed;
                visit_times.push(clock);
                prev = p;
            }
            let fuel = dur * inst.cruise_power;
            let rt = inst.recharge_time(dur);
            recharges.push(LegRecharge {
                node: refuel(s.phase.land()),
                start: land,
                end: land + rt,
                amount: fuel,
            });
            sorties.push(LegSortie {
                phase: s.phase,
                launch_node: refuel(s.phase.launch()),
                land_node: refuel(s.phase.land()),
                visits: s.visits.iter().map(|&v| inst.point_id(v)).collect(),
                visit_times,
                launch_time: launch,
                land_time: land,
                duration: dur,
                fuel_used: fuel,
            });
            t = land + rt;
        }
        let ugv_depart = ugv_depart.unwrap_or(t);
        let ugv_arrive = ugv_depart + inst.ugv_leg_time;
        let end = t.max(ugv_arrive);
        debug_assert!(
            (end - inst.start_time + inst.drop_penalty * route.dropped.len() as f64
                - score.objective)
                .abs()
                <= 1e-6 * score.objective.abs().max(1.0)
        );
        UavLegRoute {
            sorties,
            dropped: route.dropped.iter().map(|&v| inst.point_id(v)).collect(),
            recharges,
            schedule: LegSchedule {
                start: inst.start_time,
                ugv_depart,
                ugv_arrive,
                end,
            },
            objective: score.objective,
            search_trace,
        }
    }

    pub fn flight_time(&self) -> f64 {
        self.sorties.iter().map(|s| s.duration).sum()
    }
}

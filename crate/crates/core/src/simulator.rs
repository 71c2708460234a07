//! Fixed-timestep replay of a plan.
//!
//! The simulator takes only decisions from the plan: UGV departure times and
//! road paths, UAV launch and touchdown times, visit orders and landing
//! nodes, and the dropped list. Everything else (travel times, landings, fuel, recharge
//! durations) is recomputed from the scenario and compared with what the
//! planner claimed.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::pipeline::CooperativePlan;
use crate::scenario::{NodeId, Point2D, RechargeModel, Scenario};

/// Rendezvous distance tolerance in meters.
pub const COLOCATION_TOL: f64 = 0.05;
/// Default integration step in seconds.
pub const DEFAULT_DT: f64 = 0.1;

const FUEL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Idle,
    Transit,
    Hover,
    Recharging,
    Dwell,
}

impl Task {
    fn as_str(self) -> &'static str {
        match self {
            Task::Idle => "idle",
            Task::Transit => "transit",
            Task::Hover => "hover",
            Task::Recharging => "recharging",
            Task::Dwell => "dwell",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub task: Task,
    pub fuel: f64,
    pub position: Point2D,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Fuel,
    Endurance,
    CoLocation,
    Unvisited,
    /// A sortie launches before the previous one has landed.
    Overlap,
    /// A ground leg that is not a connected road walk.
    Road,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub time: f64,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub max_sortie_duration: f64,
    /// Lowest UAV fuel level reached, in joules.
    pub min_fuel: f64,
    /// Lowest UGV fuel level reached; informational, the ground vehicle is
    /// not fuel constrained.
    pub min_ugv_fuel: f64,
    /// First time each mission point was approached; `None` if never.
    pub visit_coverage: Vec<Option<f64>>,
    /// Largest gap between a planned and a replayed event time.
    pub time_mismatch: f64,
    /// Replayed mission end.
    pub total_time: f64,
    pub dt: f64,
}

/// One trace sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: f64,
    pub vehicle: &'static str,
    pub x: f64,
    pub y: f64,
    pub fuel: f64,
    pub task: &'static str,
}

/// Straight motion (or a wait when `p0 == p1`) between two instants.
#[derive(Debug, Clone, Copy)]
struct Segment {
    t0: f64,
    t1: f64,
    p0: Point2D,
    p1: Point2D,
    task: Task,
}

impl Segment {
    fn at(&self, t: f64) -> Point2D {
        if self.t1 <= self.t0 {
            return self.p1;
        }
        self.p0.lerp(
            &self.p1,
            ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0),
        )
    }
}

/// Piecewise-linear trajectory with segments sorted by start time.
#[derive(Debug, Default)]
struct Track {
    segments: Vec<Segment>,
}

impl Track {
    fn push(&mut self, t0: f64, t1: f64, p0: Point2D, p1: Point2D, task: Task) {
        self.segments.push(Segment {
            t0,
            t1,
            p0,
            p1,
            task,
        });
    }

    fn segment(&self, t: f64) -> Option<&Segment> {
        let i = self.segments.partition_point(|s| s.t0 <= t);
        let seg = self.segments.get(i.checked_sub(1)?)?;
        (t <= seg.t1).then_some(seg)
    }

    /// Segments that may intersect `[t0, t1]`.
    fn overlapping(&self, t0: f64, t1: f64) -> impl Iterator<Item = &Segment> {
        let first = self.segments.partition_point(|s| s.t1 < t0);
        self.segments[first..]
            .iter()
            .take_while(move |s| s.t0 <= t1)
    }

    fn end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t1)
    }
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

struct ReplayedSortie {
    launch: f64,
    land: f64,
    land_pos: Point2D,
    /// Filled once the landing is integrated.
    recharge_end: Option<f64>,
}

struct Replay<'a> {
    plan: &'a CooperativePlan,
    s: &'a Scenario,
    ugv: Track,
    uav: Track,
    sorties: Vec<ReplayedSortie>,
    violations: Vec<Violation>,
    mismatch: f64,
}

impl<'a> Replay<'a> {
    fn flag(&mut self, time: f64, kind: ViolationKind, detail: String) {
        self.violations.push(Violation { time, kind, detail });
    }

    fn event(&mut self, planned: f64, replayed: f64) {
        self.mismatch = self.mismatch.max((planned - replayed).abs());
    }

    fn node(&self, id: NodeId) -> Point2D {
        self.s
            .road
            .position(id)
            .unwrap_or(Point2D::new(f64::NAN, f64::NAN))
    }

    fn ugv_at(&self, t: f64) -> Point2D {
        match self.ugv.segment(t) {
            Some(seg) => seg.at(t),
            None if t < 0.0 => self.node(self.s.depot()),
            None => self
                .ugv
                .segments
                .last()
                .map_or(self.node(self.s.depot()), |s| s.p1),
        }
    }

    fn ugv_task(&self, t: f64) -> Task {
        self.ugv.segment(t).map_or(Task::Idle, |s| s.task)
    }

    fn build_ugv(&mut self) {
        let mut lengths: HashMap<(NodeId, NodeId), f64> = HashMap::new();
        for e in self.s.road.edges() {
            for key in [(e.a, e.b), (e.b, e.a)] {
                let l = lengths.entry(key).or_insert(e.length);
                *l = l.min(e.length);
            }
        }
        let route = &self.plan.ugv_route;
        let speed = self.s.ugv.speed;
        let mut t = 0.0;
        let mut at = self.s.depot();
        let mut track = Track::default();
        let mut events = Vec::new();
        let mut bad = Vec::new();
        for (k, leg) in route.legs.iter().enumerate() {
            if leg.from != at
                || leg.path.first() != Some(&leg.from)
                || leg.path.last() != Some(&leg.to)
            {
                bad.push((t, format!("leg {k} does not continue from node {at}")));
            }
            let depart = leg.depart.max(t);
            let here = self.node(leg.from);
            track.push(t, depart, here, here, Task::Dwell);
            t = depart;
            for w in leg.path.windows(2) {
                let Some(&len) = lengths.get(&(w[0], w[1])) else {
                    bad.push((
                        t,
                        format!("leg {k} uses missing road edge {}-{}", w[0], w[1]),
                    ));
                    continue;
                };
                let t1 = t + len / speed;
                track.push(t, t1, self.node(w[0]), self.node(w[1]), Task::Transit);
                t = t1;
            }
            events.push((leg.arrive, t));
            at = leg.to;
        }
        if at != self.s.depot() {
            bad.push((t, format!("ground tour ends at node {at}, not the depot")));
        }
        let end = route.end_time().max(t);
        let here = self.node(at);
        track.push(t, end, here, here, Task::Dwell);
        events.push((route.end_time(), end));
        self.ugv = track;
        for (time, detail) in bad {
            self.flag(time, ViolationKind::Road, detail);
        }
        for (planned, replayed) in events {
            self.event(planned, replayed);
        }
    }

    fn build_uav(&mut self) {
        let uav = self.s.uav;
        let (tb, lb) = (self.s.takeoff_buffer, self.s.landing_buffer);
        let mut order: Vec<usize> = (0..self.plan.uav_route.sorties.len()).collect();
        order.sort_by(|&a, &b| {
            let sa = &self.plan.uav_route.sorties;
            sa[a].launch_time.total_cmp(&sa[b].launch_time)
        });
        let mut track = Track::default();
        let mut prev_land = f64::NEG_INFINITY;
        for i in order {
            let sortie = &self.plan.uav_route.sorties[i];
            let launch = sortie.launch_time;
            if launch < prev_land - FUEL_EPS {
                self.flag(
                    launch,
                    ViolationKind::Overlap,
                    format!("sortie {i} launches before the previous landing at {prev_land:.3}"),
                );
            }
            let from = self.node(sortie.launch_node);
            let to = self.node(sortie.land_node);
            let ugv_pos = self.ugv_at(launch);
            if ugv_pos.distance(&from) > COLOCATION_TOL {
                self.flag(
                    launch,
                    ViolationKind::CoLocation,
                    format!(
                        "sortie {i} launches at node {} without the UGV",
                        sortie.launch_node
                    ),
                );
            }
            let mut t = launch + tb;
            track.push(launch, t, from, from, Task::Hover);
            let mut prev = from;
            let mut planned_times = Vec::new();
            for (k, &p) in sortie.visits.iter().enumerate() {
                let q = self.s.point(p);
                let t1 = t + prev.distance(&q) / uav.speed;
                track.push(t, t1, prev, q, Task::Transit);
                planned_times.push((sortie.visit_times.get(k).copied().unwrap_or(f64::NAN), t1));
                t = t1;
                prev = q;
            }
            let t1 = t + prev.distance(&to) / uav.speed;
            track.push(t, t1, prev, to, Task::Transit);
            // touchdown is a plan decision; an early arrival hovers until then
            let earliest = t1 + lb;
            let land = sortie.land_time.max(earliest);
            track.push(t1, land, to, to, Task::Hover);
            for (planned, replayed) in planned_times {
                self.event(planned, replayed);
            }
            self.event(sortie.land_time, land);
            let duration = land - launch;
            if duration > uav.endurance() * (1.0 + FUEL_EPS) {
                self.flag(
                    land,
                    ViolationKind::Endurance,
                    format!(
                        "sortie {i} lasts {duration:.3} s, endurance {:.3} s",
                        uav.endurance()
                    ),
                );
            }
            if self.ugv_at(land).distance(&to) > COLOCATION_TOL {
                self.flag(
                    land,
                    ViolationKind::CoLocation,
                    format!(
                        "sortie {i} lands at node {} without the UGV",
                        sortie.land_node
                    ),
                );
            }
            self.sorties.push(ReplayedSortie {
                launch,
                land,
                land_pos: to,
                recharge_end: None,
            });
            prev_land = land;
        }
        self.uav = track;
    }
}

/// Replays `plan` against `s` with step `dt` seconds.
pub fn simulate(plan: &CooperativePlan, s: &Scenario, dt: f64) -> SimReport {
    run(plan, s, dt, None)
}

/// [`simulate`] that also records one trace row per vehicle per step.
pub fn simulate_with_trace(
    plan: &CooperativePlan,
    s: &Scenario,
    dt: f64,
) -> (SimReport, Vec<TraceRow>) {
    let mut rows = Vec::new();
    let report = run(plan, s, dt, Some(&mut rows));
    (report, rows)
}

fn run(
    plan: &CooperativePlan,
    s: &Scenario,
    dt: f64,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> SimReport {
    assert!(dt > 0.0, "dt must be positive");
    let mut rp = Replay {
        plan,
        s,
        ugv: Track::default(),
        uav: Track::default(),
        sorties: Vec::new(),
        violations: Vec::new(),
        mismatch: 0.0,
    };
    rp.build_ugv();
    rp.build_uav();

    let cap = s.uav.fuel_capacity;
    let mut fuel = cap;
    let mut min_fuel = cap;
    let mut ugv_fuel = s.ugv.fuel_capacity;
    let mut min_ugv_fuel = ugv_fuel;

    // who is supposed to serve each point, and how close counts
    let n = s.mission_points.len();
    let uav_tol = COLOCATION_TOL.max(s.uav.speed * dt);
    let ugv_tol = plan.snap_tolerance + COLOCATION_TOL.max(s.ugv.speed * dt);
    let mut by_uav = vec![false; n];
    let mut by_ugv = vec![false; n];
    for sortie in &plan.uav_route.sorties {
        for &p in &sortie.visits {
            if p < n {
                by_uav[p] = true;
            }
        }
    }
    for v in &plan.ugv_visits {
        if v.point < n {
            by_ugv[v.point] = true;
        }
    }
    let mut coverage: Vec<Option<f64>> = vec![None; n];

    let end = rp.ugv.end().max(rp.uav.end());
    let steps = (end / dt).ceil() as usize;
    let mut fuel_flagged = false;
    for i in 0..=steps {
        let t0 = (i as f64 * dt).min(end);
        let t1 = ((i + 1) as f64 * dt).min(end);

        // sample state at t0
        let ugv_pos = rp.ugv_at(t0);
        let uav_seg = rp.uav.segment(t0).copied();
        let uav_pos = uav_seg.map_or(ugv_pos, |seg| seg.at(t0));
        for p in 0..n {
            if coverage[p].is_some() {
                continue;
            }
            let q = s.mission_points[p].position;
            if (by_uav[p] && uav_seg.is_some() && uav_pos.distance(&q) <= uav_tol)
                || (by_ugv[p] && ugv_pos.distance(&q) <= ugv_tol)
            {
                coverage[p] = Some(t0);
            }
        }
        if let Some(rows) = trace.as_deref_mut() {
            let uav_task = match uav_seg {
                Some(seg) => seg.task,
                None if rp
                    .sorties
                    .iter()
                    .any(|x| x.recharge_end.is_some_and(|e| x.land <= t0 && t0 < e)) =>
                {
                    Task::Recharging
                }
                None => Task::Idle,
            };
            rows.push(TraceRow {
                time: t0,
                vehicle: "ugv",
                x: ugv_pos.x,
                y: ugv_pos.y,
                fuel: ugv_fuel,
                task: rp.ugv_task(t0).as_str(),
            });
            rows.push(TraceRow {
                time: t0,
                vehicle: "uav",
                x: uav_pos.x,
                y: uav_pos.y,
                fuel,
                task: uav_task.as_str(),
            });
        }
        if t1 <= t0 {
            break;
        }

        // integrate [t0, t1]
        let moving: f64 = rp
            .ugv
            .overlapping(t0, t1)
            .filter(|seg| seg.task == Task::Transit)
            .map(|seg| overlap(seg.t0, seg.t1, t0, t1))
            .sum();
        ugv_fuel -= s.ugv.cruise_power * moving;
        min_ugv_fuel = min_ugv_fuel.min(ugv_fuel);

        // sorties are in launch order, so each landing and its recharge
        // are applied before the next launch burns fuel
        for k in 0..rp.sorties.len() {
            let (launch, land) = (rp.sorties[k].launch, rp.sorties[k].land);
            fuel -= s.uav.cruise_power * overlap(launch, land, t0, t1);
            min_fuel = min_fuel.min(fuel);
            if fuel < -FUEL_EPS && !fuel_flagged {
                fuel_flagged = true;
                rp.flag(
                    t1.min(land),
                    ViolationKind::Fuel,
                    format!("UAV fuel at {fuel:.3} J"),
                );
            }
            if rp.sorties[k].recharge_end.is_none() && land <= t1 {
                let deficit = cap - fuel;
                let here = rp.ugv_at(land).distance(&rp.sorties[k].land_pos) <= COLOCATION_TOL;
                let rt = if here {
                    s.uav.recharge.recharge_time(deficit)
                } else {
                    0.0
                };
                rp.sorties[k].recharge_end = Some(land + rt);
                if here && matches!(s.uav.recharge, RechargeModel::Instant) {
                    fuel = cap;
                }
            }
            if let (RechargeModel::Linear(rate), Some(re)) =
                (s.uav.recharge, rp.sorties[k].recharge_end)
            {
                fuel = (fuel + rate * overlap(land, re, t0, t1)).min(cap);
            }
        }
        min_fuel = min_fuel.min(fuel);
    }

    // rendezvous must hold until the recharge is done
    let recharge_ends: Vec<(usize, f64, Point2D)> = rp
        .sorties
        .iter()
        .enumerate()
        .filter_map(|(k, x)| x.recharge_end.map(|e| (k, e, x.land_pos)))
        .collect();
    for (k, e, at) in recharge_ends {
        if rp.ugv_at(e).distance(&at) > COLOCATION_TOL {
            rp.flag(
                e,
                ViolationKind::CoLocation,
                format!("UGV leaves before recharge {k} ends"),
            );
        }
        if let Some(r) = plan.uav_route.recharges.get(k) {
            rp.event(r.end, e);
        }
    }

    let dropped: Vec<bool> = (0..n).map(|p| plan.dropped.contains(&p)).collect();
    for p in 0..n {
        if coverage[p].is_none() && !dropped[p] {
            rp.flag(
                end,
                ViolationKind::Unvisited,
                format!("mission point {p} never visited"),
            );
        }
    }
    rp.event(plan.metrics.total_time, end);

    let max_sortie_duration = rp
        .sorties
        .iter()
        .map(|x| x.land - x.launch)
        .fold(0.0, f64::max);
    let mut violations = rp.violations;
    violations.sort_by(|a, b| a.time.total_cmp(&b.time));
    SimReport {
        ok: violations.is_empty(),
        violations,
        max_sortie_duration,
        min_fuel,
        min_ugv_fuel,
        visit_coverage: coverage,
        time_mismatch: rp.mismatch,
        total_time: end,
        dt,
    }
}

/// Writes trace rows as CSV with header `time,vehicle,x,y,fuel,task`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

//! On-disk scenario document.

use serde::{Deserialize, Serialize};

use super::{
    MissionPoint, NodeId, Point2D, RechargeModel, RoadEdge, RoadNetwork, Scenario, ScenarioError,
    VehicleParams, DEFAULT_BUFFER_S,
};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointRecord<Id> {
    id: Id,
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoadRecord {
    nodes: Vec<PointRecord<NodeId>>,
    edges: Vec<(NodeId, NodeId, f64)>,
    depot: NodeId,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleRecord {
    speed_mps: f64,
    fuel_capacity_j: f64,
    cruise_power_w: f64,
    recharge: RechargeModel,
}

impl From<VehicleRecord> for VehicleParams {
    fn from(v: VehicleRecord) -> Self {
        VehicleParams {
            speed: v.speed_mps,
            fuel_capacity: v.fuel_capacity_j,
            cruise_power: v.cruise_power_w,
            recharge: v.recharge,
        }
    }
}

impl From<&VehicleParams> for VehicleRecord {
    fn from(v: &VehicleParams) -> Self {
        VehicleRecord {
            speed_mps: v.speed,
            fuel_capacity_j: v.fuel_capacity,
            cruise_power_w: v.cruise_power,
            recharge: v.recharge,
        }
    }
}

fn default_buffer() -> f64 {
    DEFAULT_BUFFER_S
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioRecord {
    mission_points: Vec<PointRecord<usize>>,
    road: RoadRecord,
    uav: VehicleRecord,
    ugv: VehicleRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    candidate_stops: Option<Vec<NodeId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coverage_radius_m: Option<f64>,
    #[serde(default = "default_buffer")]
    takeoff_buffer_s: f64,
    #[serde(default = "default_buffer")]
    landing_buffer_s: f64,
}

pub(super) fn parse(raw: &[u8]) -> Result<Scenario, ScenarioError> {
    let rec: ScenarioRecord = serde_json::from_slice(raw)?;
    let road = RoadNetwork::new(
        rec.road
            .nodes
            .iter()
            .map(|n| (n.id, Point2D::new(n.x, n.y))),
        rec.road
            .edges
            .iter()
            .map(|&(a, b, length)| RoadEdge { a, b, length })
            .collect(),
        rec.road.depot,
    )?;
    let mut mission_points: Vec<MissionPoint> = rec
        .mission_points
        .iter()
        .map(|p| MissionPoint {
            id: p.id,
            position: Point2D::new(p.x, p.y),
        })
        .collect();
    mission_points.sort_by_key(|p| p.id);
    let mut candidate_stops = rec
        .candidate_stops
        .unwrap_or_else(|| road.node_ids().to_vec());
    candidate_stops.sort();
    let scenario = Scenario {
        mission_points,
        road,
        uav: rec.uav.into(),
        ugv: rec.ugv.into(),
        candidate_stops,
        coverage_radius: rec.coverage_radius_m,
        takeoff_buffer: rec.takeoff_buffer_s,
        landing_buffer: rec.landing_buffer_s,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub(super) fn to_json(s: &Scenario) -> String {
    let all_nodes = s.candidate_stops.as_slice() == s.road.node_ids();
    let rec = ScenarioRecord {
        mission_points: s
            .mission_points
            .iter()
            .map(|p| PointRecord {
                id: p.id,
                x: p.position.x,
                y: p.position.y,
            })
            .collect(),
        road: RoadRecord {
            nodes: s
                .road
                .nodes()
                .map(|(id, p)| PointRecord { id, x: p.x, y: p.y })
                .collect(),
            edges: s
                .road
                .edges()
                .iter()
                .map(|e| (e.a, e.b, e.length))
                .collect(),
            depot: s.road.depot(),
        },
        uav: (&s.uav).into(),
        ugv: (&s.ugv).into(),
        candidate_stops: (!all_nodes).then(|| s.candidate_stops.clone()),
        coverage_radius_m: s.coverage_radius,
        takeoff_buffer_s: s.takeoff_buffer,
        landing_buffer_s: s.landing_buffer,
    };
    let mut text = serde_json::to_string_pretty(&rec).expect("scenario serializes");
    text.push('\n');
    text
}

//! Problem instance: mission points, road network, vehicle parameters and
//! refuel-stop coverage.

mod file;
mod generate;
mod road;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use generate::{generate_random_scenario, generate_random_scenario_with};
pub use road::{RoadEdge, RoadNetwork, RoadPath};

/// Absolute tolerance for geometric comparisons, in meters.
pub const GEOM_EPS: f64 = 1e-9;

/// Safety factor applied to the half-endurance flight distance when the
/// coverage radius is derived from the vehicle parameters.
pub const COVERAGE_SAFETY: f64 = 0.9;

pub const DEFAULT_BUFFER_S: f64 = 2.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("unknown road node {0}")]
    UnknownNode(NodeId),
    #[error("no road path from {from} to {to}")]
    NoPath { from: NodeId, to: NodeId },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Point a fraction `t` of the way from `self` to `other`.
    pub fn lerp(&self, other: &Point2D, t: f64) -> Point2D {
        Point2D::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Road-network node identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionPoint {
    pub id: usize,
    pub position: Point2D,
}

/// How the UAV battery refills once landed on the ground vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RechargeModel {
    Instant,
    /// Constant charging power in watts.
    Linear(f64),
}

impl RechargeModel {
    /// Seconds needed to restore `deficit` joules.
    pub fn recharge_time(&self, deficit: f64) -> f64 {
        match *self {
            RechargeModel::Instant => 0.0,
            RechargeModel::Linear(rate) => deficit.max(0.0) / rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Cruise speed in m/s.
    pub speed: f64,
    /// Usable energy in joules.
    pub fuel_capacity: f64,
    /// Power draw while moving (or airborne), in watts.
    pub cruise_power: f64,
    pub recharge: RechargeModel,
}

impl VehicleParams {
    /// Seconds of cruise on one full charge.
    pub fn endurance(&self) -> f64 {
        self.fuel_capacity / self.cruise_power
    }

    fn validate(&self, name: &str) -> Result<(), ScenarioError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.speed) {
            return Err(invalid(format!("{name} speed must be positive")));
        }
        if !positive(self.fuel_capacity) {
            return Err(invalid(format!("{name} fuel capacity must be positive")));
        }
        if !positive(self.cruise_power) {
            return Err(invalid(format!("{name} cruise power must be positive")));
        }
        if let RechargeModel::Linear(rate) = self.recharge {
            if !positive(rate) {
                return Err(invalid(format!("{name} recharge rate must be positive")));
            }
        }
        Ok(())
    }
}

/// Parameter presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Field scale: 10 m/s aerial, 4 m/s ground, 287.7 kJ / 25.01 MJ.
    Paper,
    /// Desk scale: 0.20 m/s aerial, 0.15 m/s ground, 50 s endurance.
    Lab,
}

impl Profile {
    pub fn uav(&self) -> VehicleParams {
        match self {
            Profile::Paper => VehicleParams {
                speed: 10.0,
                fuel_capacity: 287_700.0,
                // 1186.464 kJ over 100 min of flight
                cruise_power: 1_186_464.0 / 6000.0,
                recharge: RechargeModel::Instant,
            },
            Profile::Lab => VehicleParams {
                speed: 0.20,
                fuel_capacity: 500.0,
                cruise_power: 10.0,
                recharge: RechargeModel::Instant,
            },
        }
    }

    pub fn ugv(&self) -> VehicleParams {
        match self {
            Profile::Paper => VehicleParams {
                speed: 4.0,
                fuel_capacity: 25_010_000.0,
                // 20.79 MJ over 200 min of driving
                cruise_power: 20_790_000.0 / 12_000.0,
                recharge: RechargeModel::Instant,
            },
            Profile::Lab => VehicleParams {
                speed: 0.15,
                fuel_capacity: 1_000_000.0,
                cruise_power: 20.0,
                recharge: RechargeModel::Instant,
            },
        }
    }
}

/// A validated problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Sorted by id; ids are `0..n`.
    pub mission_points: Vec<MissionPoint>,
    pub road: RoadNetwork,
    pub uav: VehicleParams,
    pub ugv: VehicleParams,
    /// Sorted ascending, contains the depot.
    pub candidate_stops: Vec<NodeId>,
    pub coverage_radius: Option<f64>,
    pub takeoff_buffer: f64,
    pub landing_buffer: f64,
}

impl Scenario {
    pub fn depot(&self) -> NodeId {
        self.road.depot()
    }

    /// Coverage radius in effect: the explicit one, or the out-and-back
    /// distance on `COVERAGE_SAFETY` of a full charge.
    pub fn effective_coverage_radius(&self) -> f64 {
        self.coverage_radius
            .unwrap_or_else(|| 0.5 * COVERAGE_SAFETY * self.uav.speed * self.uav.endurance())
    }

    pub fn point(&self, id: usize) -> Point2D {
        self.mission_points[id].position
    }

    /// Replaces both vehicle parameter sets with a preset.
    pub fn with_profile(mut self, profile: Profile) -> Result<Self, ScenarioError> {
        self.uav = profile.uav();
        self.ugv = profile.ugv();
        self.validate()?;
        Ok(self)
    }

    /// Checks every instance invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.mission_points.is_empty() {
            return Err(invalid("no mission points"));
        }
        for (i, p) in self.mission_points.iter().enumerate() {
            if p.id != i {
                return Err(invalid(format!(
                    "mission point ids must be unique and dense 0..{}; found {}",
                    self.mission_points.len(),
                    p.id
                )));
            }
            if !p.position.is_finite() {
                return Err(invalid(format!(
                    "mission point {i} has non-finite position"
                )));
            }
        }
        self.road.validate()?;
        self.uav.validate("uav")?;
        self.ugv.validate("ugv")?;
        for (name, b) in [
            ("takeoff", self.takeoff_buffer),
            ("landing", self.landing_buffer),
        ] {
            if !b.is_finite() || b < 0.0 {
                return Err(invalid(format!("{name} buffer must be nonnegative")));
            }
        }
        if let Some(r) = self.coverage_radius {
            if !r.is_finite() || r <= 0.0 {
                return Err(invalid("coverage radius must be positive"));
            }
        }
        for w in self.candidate_stops.windows(2) {
            if w[0] >= w[1] {
                return Err(invalid(format!("duplicate candidate stop {}", w[1])));
            }
        }
        for &s in &self.candidate_stops {
            if !self.road.contains(s) {
                return Err(invalid(format!("candidate stop {s} is not a road node")));
            }
        }
        if self.candidate_stops.binary_search(&self.depot()).is_err() {
            return Err(invalid("depot must be a candidate stop"));
        }
        let cov = compute_coverage(self);
        if let Some(p) = cov.first_uncovered() {
            return Err(invalid(format!("uncovered mission point {p}")));
        }
        Ok(())
    }

    /// Serializes to the scenario file format.
    pub fn to_json(&self) -> String {
        file::to_json(self)
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(raw: &[u8]) -> Result<Scenario, ScenarioError> {
    file::parse(raw)
}

/// Which candidate stops lie within the coverage radius of which mission
/// points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMatrix {
    /// Row labels, ascending.
    stops: Vec<NodeId>,
    /// `covers[row][point]`.
    covers: Vec<Vec<bool>>,
    n_points: usize,
    pub radius_used: f64,
}

impl CoverageMatrix {
    /// Builds a matrix from explicit rows. Rows are re-sorted by stop id.
    pub fn new(
        rows: Vec<(NodeId, Vec<bool>)>,
        n_points: usize,
        radius_used: f64,
    ) -> Result<Self, ScenarioError> {
        let mut rows = rows;
        rows.sort_by_key(|(id, _)| *id);
        for w in rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(invalid(format!("duplicate coverage row {}", w[0].0)));
            }
        }
        if let Some((id, _)) = rows.iter().find(|(_, r)| r.len() != n_points) {
            return Err(invalid(format!("coverage row {id} has wrong length")));
        }
        let (stops, covers) = rows.into_iter().unzip();
        Ok(Self {
            stops,
            covers,
            n_points,
            radius_used,
        })
    }

    pub fn stops(&self) -> &[NodeId] {
        &self.stops
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn row_index(&self, stop: NodeId) -> Option<usize> {
        self.stops.binary_search(&stop).ok()
    }

    pub fn row(&self, idx: usize) -> &[bool] {
        &self.covers[idx]
    }

    /// False for stops that are not rows of the matrix.
    pub fn covers(&self, stop: NodeId, point: usize) -> bool {
        self.row_index(stop)
            .map(|r| self.covers[r][point])
            .unwrap_or(false)
    }

    pub fn first_uncovered(&self) -> Option<usize> {
        (0..self.n_points).find(|&p| !self.covers.iter().any(|row| row[p]))
    }

    /// True when the given stops jointly cover every point.
    pub fn is_cover(&self, stops: &[NodeId]) -> bool {
        let rows: Vec<usize> = stops.iter().filter_map(|&s| self.row_index(s)).collect();
        (0..self.n_points).all(|p| rows.iter().any(|&r| self.covers[r][p]))
    }
}

pub fn compute_coverage(s: &Scenario) -> CoverageMatrix {
    let radius = s.effective_coverage_radius();
    let rows = s
        .candidate_stops
        .iter()
        .map(|&stop| {
            let at = s
                .road
                .position(stop)
                .expect("candidate stop is a road node");
            let row = s
                .mission_points
                .iter()
                .map(|p| at.distance(&p.position) <= radius + GEOM_EPS)
                .collect();
            (stop, row)
        })
        .collect();
    CoverageMatrix::new(rows, s.mission_points.len(), radius).expect("rows are well formed")
}

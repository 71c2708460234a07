use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    MissionPoint, NodeId, Point2D, Profile, RoadEdge, RoadNetwork, Scenario, ScenarioError,
    DEFAULT_BUFFER_S,
};

/// Random scenario with paper-scale vehicle parameters.
pub fn generate_random_scenario(
    seed: u64,
    n_points: usize,
    area: f64,
    grid: usize,
) -> Result<Scenario, ScenarioError> {
    generate_random_scenario_with(Profile::Paper, seed, n_points, area, grid)
}

/// Random scenario on a `grid × grid` road lattice spanning `[0, area]²`,
/// with uniformly placed mission points. Node 0 (the origin corner) is the
/// depot and every road node is a candidate stop.
pub fn generate_random_scenario_with(
    profile: Profile,
    seed: u64,
    n_points: usize,
    area: f64,
    grid: usize,
) -> Result<Scenario, ScenarioError> {
    if n_points == 0 {
        return Err(ScenarioError::Precondition(
            "n_points must be at least 1".into(),
        ));
    }
    if grid < 2 {
        return Err(ScenarioError::Precondition(
            "grid must be at least 2".into(),
        ));
    }
    if !(area.is_finite() && area > 0.0) {
        return Err(ScenarioError::Precondition("area must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = area / (grid - 1) as f64;
    let id = |row: usize, col: usize| NodeId((row * grid + col) as u32);
    let mut nodes = Vec::with_capacity(grid * grid);
    let mut edges = Vec::new();
    for row in 0..grid {
        for col in 0..grid {
            nodes.push((
                id(row, col),
                Point2D::new(col as f64 * spacing, row as f64 * spacing),
            ));
            if col + 1 < grid {
                edges.push(RoadEdge {
                    a: id(row, col),
                    b: id(row, col + 1),
                    length: spacing,
                });
            }
            if row + 1 < grid {
                edges.push(RoadEdge {
                    a: id(row, col),
                    b: id(row + 1, col),
                    length: spacing,
                });
            }
        }
    }
    let road = RoadNetwork::new(nodes, edges, NodeId(0))?;
    let mission_points = (0..n_points)
        .map(|i| MissionPoint {
            id: i,
            position: Point2D::new(rng.gen_range(0.0..=area), rng.gen_range(0.0..=area)),
        })
        .collect();
    let candidate_stops = road.node_ids().to_vec();
    let scenario = Scenario {
        mission_points,
        road,
        uav: profile.uav(),
        ugv: profile.ugv(),
        candidate_stops,
        coverage_radius: None,
        takeoff_buffer: DEFAULT_BUFFER_S,
        landing_buffer: DEFAULT_BUFFER_S,
    };
    scenario.validate()?;
    Ok(scenario)
}

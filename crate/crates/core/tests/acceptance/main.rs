//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Reference answers come from `oracles`, which shares no code with
//! the library.

mod oracles;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use coroute::evrp::{solve, EvrpInstance, SearchConfig};
use coroute::export;
use coroute::pipeline::{
    best_per_method, compare, plan, ugv_only_baseline, CooperativePlan, OuterSelection, PlanMethod,
    PlanOptions,
};
use coroute::scenario::{
    compute_coverage, generate_random_scenario, generate_random_scenario_with, load_scenario,
    NodeId, Point2D, Profile, Scenario,
};
use coroute::setcover::{exact_cover_all_optimal, greedy_cover, CoverMethod, RefuelStopSet};
use coroute::simulator::simulate;
use coroute::ugv_router::route_ugv;

const LAB_FIXTURE: &str = include_str!("../../fixtures/lab_12.json");

/// Name, check and runtime budget of one criterion.
type Criterion = (&'static str, fn() -> Outcome, Duration);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Random connected road: a spanning chain plus extra edges, lengths at
/// least the straight-line distance.
struct Road {
    nodes: Vec<(f64, f64)>,
    edges: Vec<(usize, usize, f64)>,
}

fn random_road(rng: &mut ChaCha8Rng, n: usize, side: f64, extra: usize) -> Road {
    let nodes: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(0.0..side), rng.gen_range(0.0..side)))
        .collect();
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    let mut add =
        |rng: &mut ChaCha8Rng, a: usize, b: usize, edges: &mut Vec<(usize, usize, f64)>| {
            if a == b || !seen.insert((a.min(b), a.max(b))) {
                return;
            }
            let (pa, pb) = (nodes[a], nodes[b]);
            let straight = ((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt();
            edges.push((a, b, straight * (1.0 + rng.gen_range(0.0..0.3)) + 1e-3));
        };
    for i in 1..n {
        let j = rng.gen_range(0..i);
        add(rng, i, j, &mut edges);
    }
    for _ in 0..extra {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        add(rng, a, b, &mut edges);
    }
    Road { nodes, edges }
}

fn scenario_json(
    road: &Road,
    points: &[(f64, f64)],
    radius: f64,
    uav: Value,
    buffer: f64,
) -> Vec<u8> {
    json!({
        "mission_points": points.iter().enumerate()
            .map(|(i, p)| json!({"id": i, "x": p.0, "y": p.1})).collect::<Vec<_>>(),
        "road": {
            "nodes": road.nodes.iter().enumerate()
                .map(|(i, p)| json!({"id": i, "x": p.0, "y": p.1})).collect::<Vec<_>>(),
            "edges": road.edges.iter().map(|&(a, b, l)| json!([a, b, l])).collect::<Vec<_>>(),
            "depot": 0,
        },
        "uav": uav,
        "ugv": {"speed_mps": 1.0, "fuel_capacity_j": 1e9, "cruise_power_w": 1.0, "recharge": "instant"},
        "coverage_radius_m": radius,
        "takeoff_buffer_s": buffer,
        "landing_buffer_s": buffer,
    })
    .to_string()
    .into_bytes()
}

fn plain_uav() -> Value {
    json!({"speed_mps": 1.0, "fuel_capacity_j": 1e6, "cruise_power_w": 1.0, "recharge": "instant"})
}

/// Road plus points that some node covers, with the raw coverage rows.
struct CoverCase {
    scenario: Scenario,
    rows: Vec<u64>,
    n_points: usize,
}

fn cover_case(rng: &mut ChaCha8Rng, max_stops: usize, max_points: usize) -> CoverCase {
    let n_nodes = rng.gen_range(3..=max_stops);
    let n_points = rng.gen_range(1..=max_points);
    let radius = 15.0;
    let road = random_road(rng, n_nodes, 60.0, n_nodes / 2);
    let points: Vec<(f64, f64)> = (0..n_points)
        .map(|_| {
            let c = road.nodes[rng.gen_range(0..n_nodes)];
            let r = radius * rng.gen_range(0.0f64..0.98).sqrt();
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            (c.0 + r * a.cos(), c.1 + r * a.sin())
        })
        .collect();
    let rows = road
        .nodes
        .iter()
        .map(|c| {
            points.iter().enumerate().fold(0u64, |acc, (i, p)| {
                let d = ((c.0 - p.0).powi(2) + (c.1 - p.1).powi(2)).sqrt();
                if d <= radius {
                    acc | 1 << i
                } else {
                    acc
                }
            })
        })
        .collect();
    let scenario = load_scenario(&scenario_json(&road, &points, radius, plain_uav(), 0.0))
        .expect("generated cover scenario is valid");
    CoverCase {
        scenario,
        rows,
        n_points,
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut wrong_size = 0;
    let mut greedy_smaller = 0;
    let mut bad_members = 0;
    for _ in 0..200 {
        let case = cover_case(&mut rng, 15, 30);
        let cov = compute_coverage(&case.scenario);
        let depot = case.scenario.depot();
        let best = oracles::all_minimum_covers(&case.rows, case.n_points)[0].len();
        let exact = exact_cover_all_optimal(&cov, depot, 64);
        let greedy = greedy_cover(&cov, depot);
        if exact.optimal_size != best {
            wrong_size += 1;
        }
        if exact
            .covers
            .iter()
            .any(|c| c.effective_size(&cov) != best || !c.is_valid_for(&cov))
        {
            bad_members += 1;
        }
        if greedy.effective_size(&cov) < exact.optimal_size {
            greedy_smaller += 1;
        }
    }
    outcome(
        wrong_size + greedy_smaller + bad_members == 0,
        format!(
            "200 instances: size mismatches {wrong_size}, non-optimal covers returned {bad_members}, greedy below exact {greedy_smaller}"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatched = 0;
    let mut multi = 0;
    for _ in 0..100 {
        let case = cover_case(&mut rng, 12, 20);
        let cov = compute_coverage(&case.scenario);
        let depot = case.scenario.depot();
        let expected: BTreeSet<Vec<u32>> = oracles::all_minimum_covers(&case.rows, case.n_points)
            .into_iter()
            .map(|c| {
                let mut ids: Vec<u32> = c.iter().map(|&i| i as u32).collect();
                if !ids.contains(&depot.0) {
                    ids.push(depot.0);
                }
                ids.sort();
                ids
            })
            .collect();
        let exact = exact_cover_all_optimal(&cov, depot, usize::MAX);
        let got: BTreeSet<Vec<u32>> = exact
            .covers
            .iter()
            .map(|c| {
                let mut ids: Vec<u32> = c.stops.iter().map(|s| s.0).collect();
                ids.sort();
                ids
            })
            .collect();
        if got.len() != exact.covers.len() || got != expected || exact.cap_exceeded {
            mismatched += 1;
        }
        if expected.len() > 1 {
            multi += 1;
        }
    }
    outcome(
        mismatched == 0,
        format!("100 instances ({multi} with several optima): optima sets differing {mismatched}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n_nodes = rng.gen_range(4..=14);
        let road = random_road(&mut rng, n_nodes, 100.0, n_nodes);
        let s = load_scenario(&scenario_json(&road, &[(0.0, 0.0)], 1e6, plain_uav(), 0.0))
            .expect("generated road scenario is valid");
        let k = rng.gen_range(1..=n_nodes.min(10));
        let mut others: Vec<usize> = (1..n_nodes).collect();
        let mut stops = vec![0usize];
        while stops.len() < k {
            stops.push(others.swap_remove(rng.gen_range(0..others.len())));
        }
        let set = RefuelStopSet {
            stops: stops.iter().map(|&i| NodeId(i as u32)).collect(),
            method: CoverMethod::Greedy,
            optimum_index: 0,
        };
        let got = route_ugv(&s, &set).expect("connected road").total_length();
        let dist = oracles::floyd_warshall(n_nodes, &road.edges);
        let want = oracles::brute_force_tour(&dist, &stops);
        worst = worst.max((got - want).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("100 instances: largest tour length gap {worst:.3e} m"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut with_drops = 0;
    let mut linear = 0;
    for case in 0..100 {
        let k = rng.gen_range(1..=6);
        let endurance = rng.gen_range(15.0..40.0);
        let drive = if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(0.0..30.0)
        };
        let power = 2.0;
        let rate = if rng.gen_bool(0.3) {
            Some(rng.gen_range(1.0..8.0))
        } else {
            None
        };
        let recharge = match rate {
            Some(r) => {
                linear += 1;
                json!({ "linear": r })
            }
            None => json!("instant"),
        };
        let uav = json!({
            "speed_mps": 1.0,
            "fuel_capacity_j": endurance * power,
            "cruise_power_w": power,
            "recharge": recharge,
        });
        let origin = (0.0, 0.0);
        let dest: (f64, f64) = (rng.gen_range(-2.0..14.0), rng.gen_range(-5.0..9.0));
        let span = (dest.0 * dest.0 + dest.1 * dest.1).sqrt();
        let road = Road {
            nodes: vec![origin, dest],
            edges: vec![(0, 1, span + 1.0)],
        };
        let points: Vec<(f64, f64)> = (0..k)
            .map(|_| (rng.gen_range(-2.0..14.0), rng.gen_range(-5.0..9.0)))
            .collect();
        let s = load_scenario(&scenario_json(&road, &points, 1e6, uav, 0.5))
            .expect("generated leg scenario is valid");
        let missions: Vec<(usize, Point2D)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, Point2D::new(p.0, p.1)))
            .collect();
        let inst = EvrpInstance::new(
            &s,
            (NodeId(0), Point2D::new(origin.0, origin.1)),
            (NodeId(1), Point2D::new(dest.0, dest.1)),
            &missions,
            0.0,
            drive,
            1e6,
        );
        let got = solve(
            &inst,
            &SearchConfig {
                seed: case,
                ..SearchConfig::default()
            },
        );
        let want = oracles::evrp_optimum(&oracles::LegProblem {
            origin,
            dest,
            points,
            speed: 1.0,
            takeoff: 0.5,
            landing: 0.5,
            endurance,
            drive,
            recharge_ratio: rate.map_or(0.0, |r| power / r),
            drop_penalty: 1e6,
        });
        if want >= 1e6 {
            with_drops += 1;
        }
        let gap = (got.objective - want).abs();
        worst = worst.max(gap);
        if gap > 1e-6 {
            failures.push(format!("#{case} got {:.6} want {want:.6}", got.objective));
        }
    }
    let mut detail = format!(
        "100 instances ({linear} linear recharge, {with_drops} with forced drops): largest objective gap {worst:.3e} s"
    );
    if !failures.is_empty() {
        detail.push_str(&format!("; off: {}", failures.join(", ")));
    }
    outcome(failures.is_empty(), detail)
}

fn criterion_5() -> Outcome {
    let s = load_scenario(LAB_FIXTURE.as_bytes()).expect("fixture loads");
    let endurance = s.uav.endurance();
    let plans = match plan(&s, OuterSelection::Both, &PlanOptions::default()) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("planning failed: {e}")),
    };
    let best = &plans[0];
    let longest = best
        .uav_route
        .sorties
        .iter()
        .map(|x| x.duration)
        .fold(0.0, f64::max);
    let report = simulate(best, &s, 0.1);
    let mismatch_pct = 100.0 * report.time_mismatch / best.metrics.total_time;
    let pass =
        best.dropped.is_empty() && longest <= endurance + 1e-9 && report.ok && mismatch_pct <= 1.0;
    outcome(
        pass,
        format!(
            "{} points, endurance {endurance} s: dropped {}, {} sorties, longest {longest:.2} s, total time {:.2} s, simulate ok {}, time mismatch {:.4}%",
            s.mission_points.len(),
            best.dropped.len(),
            best.uav_route.sorties.len(),
            best.metrics.total_time,
            report.ok,
            mismatch_pct,
        ),
    )
}

fn best_of(plans: &[CooperativePlan], m: PlanMethod) -> Option<&CooperativePlan> {
    plans.iter().find(|p| p.found_by_method(m))
}

fn criterion_6() -> Outcome {
    let mut energy_wins = 0;
    let mut differ = 0;
    let mut exact_no_worse = 0;
    let mut table_ok = true;
    let mut loss_margins: Vec<f64> = Vec::new();
    let instances = 50;
    for seed in 0..instances {
        let s = generate_random_scenario(seed, 25, 25_000.0, 6).expect("paper scenario");
        let opts = PlanOptions {
            search: SearchConfig {
                seed,
                ..SearchConfig::default()
            },
            ..PlanOptions::default()
        };
        let plans = plan(&s, OuterSelection::Both, &opts).expect("plannable");
        let baseline = ugv_only_baseline(&s).expect("baseline");
        if plans[0].metrics.total_energy < baseline.metrics.total_energy {
            energy_wins += 1;
        }
        let exact = best_of(&plans, PlanMethod::Exact).expect("exact plan");
        let greedy = best_of(&plans, PlanMethod::Greedy).expect("greedy plan");
        if !greedy.found_by_method(PlanMethod::Exact) {
            differ += 1;
            if exact.metrics.total_time <= greedy.metrics.total_time {
                exact_no_worse += 1;
            } else {
                loss_margins
                    .push(100.0 * (exact.metrics.total_time / greedy.metrics.total_time - 1.0));
            }
        }
        if seed == 0 {
            let report = compare(&best_per_method(&plans, OuterSelection::Both), &baseline);
            let mut buf = Vec::new();
            export::write_comparison_csv(&report, &mut buf).expect("in-memory write");
            let text = String::from_utf8(buf).expect("utf8");
            let lines: Vec<&str> = text.lines().collect();
            table_ok = lines.len() == 3
                && lines[0].starts_with("schema_version,metric,unit,")
                && lines[0].contains(",ugv_only,")
                && lines[1].starts_with("1,time,min,")
                && lines[2].starts_with("1,energy,MJ,");
        }
    }
    let energy_share = energy_wins as f64 / instances as f64;
    let time_share = if differ == 0 {
        1.0
    } else {
        exact_no_worse as f64 / differ as f64
    };
    loss_margins.sort_by(f64::total_cmp);
    let median_loss = loss_margins
        .get(loss_margins.len() / 2)
        .copied()
        .unwrap_or(0.0);
    outcome(
        energy_share >= 0.9 && time_share >= 0.7 && table_ok,
        format!(
            "energy below ground-only in {energy_wins}/{instances}; exact no slower than greedy in {exact_no_worse}/{differ} instances with differing covers (median excess where slower {median_loss:.1}%); comparison table rows ok {table_ok}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut simulated = 0;
    let mut failed = Vec::new();
    for (profile, name, n, area, grid, dt) in [
        (Profile::Paper, "paper", 15, 20_000.0, 5, 1.0),
        (Profile::Lab, "lab", 10, 6.0, 3, 0.1),
    ] {
        for seed in 0..100u64 {
            let s = generate_random_scenario_with(profile, seed, n, area, grid).expect("scenario");
            let opts = PlanOptions {
                search: SearchConfig {
                    seed,
                    ..SearchConfig::default()
                },
                ..PlanOptions::default()
            };
            let plans = plan(&s, OuterSelection::Both, &opts).expect("plannable");
            for (rank, p) in plans
                .iter()
                .enumerate()
                .filter(|(_, p)| p.dropped.is_empty())
            {
                simulated += 1;
                let report = simulate(p, &s, dt);
                if !report.ok {
                    let kinds: Vec<String> = report
                        .violations
                        .iter()
                        .map(|v| format!("{:?}", v.kind))
                        .collect();
                    failed.push(format!(
                        "{name} seed {seed} rank {rank}: {}",
                        kinds.join("/")
                    ));
                }
            }
        }
    }
    let mut detail = format!(
        "{simulated} zero-drop plans over 200 scenarios: {} with violations",
        failed.len()
    );
    if !failed.is_empty() {
        detail.push_str(&format!(
            " ({})",
            failed
                .iter()
                .take(5)
                .cloned()
                .collect::<Vec<_>>()
                .join("; ")
        ));
    }
    outcome(failed.is_empty(), detail)
}

fn criterion_8() -> Outcome {
    let mut differing = 0;
    let mut bad_traces = 0;
    let mut traces = 0;
    let cases = [
        (Profile::Paper, 20, 20_000.0, 5),
        (Profile::Lab, 12, 6.0, 3),
    ];
    for (profile, n, area, grid) in cases {
        for seed in 0..5u64 {
            let s = generate_random_scenario_with(profile, seed, n, area, grid).expect("scenario");
            let opts = PlanOptions {
                search: SearchConfig {
                    seed,
                    ..SearchConfig::default()
                },
                ..PlanOptions::default()
            };
            let a = plan(&s, OuterSelection::Both, &opts).expect("plannable");
            let b = plan(&s, OuterSelection::Both, &opts).expect("plannable");
            let (ja, jb) = (
                export::plans_to_json(&a).expect("serializes"),
                export::plans_to_json(&b).expect("serializes"),
            );
            if ja.as_bytes() != jb.as_bytes() {
                differing += 1;
            }
            for sp in a.iter().flat_map(|p| &p.subproblems) {
                traces += 1;
                if sp.search_trace.windows(2).any(|w| w[1] > w[0]) {
                    bad_traces += 1;
                }
            }
        }
    }
    outcome(
        differing == 0 && bad_traces == 0,
        format!("10 scenarios planned twice: differing outputs {differing}; {traces} search traces, increasing {bad_traces}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("set-cover exactness", criterion_1, Duration::from_secs(60)),
        (
            "all-optima completeness",
            criterion_2,
            Duration::from_secs(60),
        ),
        (
            "ground tour exactness",
            criterion_3,
            Duration::from_secs(120),
        ),
        (
            "sortie planner oracle equivalence",
            criterion_4,
            Duration::from_secs(120),
        ),
        (
            "lab-scale reproduction",
            criterion_5,
            Duration::from_secs(30),
        ),
        (
            "cooperative vs ground-only direction",
            criterion_6,
            Duration::MAX,
        ),
        ("end-to-end simulation gate", criterion_7, Duration::MAX),
        ("determinism", criterion_8, Duration::MAX),
    ];
    // criterion numbers on the command line run a subset
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut all = true;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = took <= *budget;
        let pass = o.pass && in_time;
        all &= pass;
        let budget_note = if *budget == Duration::MAX {
            String::new()
        } else {
            format!(" of {} s budget", budget.as_secs())
        };
        println!(
            "criterion {} ({name}): {} ({}; {:.1} s{budget_note})",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

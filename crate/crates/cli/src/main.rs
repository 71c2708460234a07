use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use coroute::evrp::SearchConfig;
use coroute::export;
use coroute::pipeline::{
    best_per_method, compare, plan, ugv_only_baseline, CooperativePlan, OuterSelection, PlanOptions,
};
use coroute::scenario::{generate_random_scenario_with, load_scenario, Profile, Scenario};
use coroute::simulator::{simulate, simulate_with_trace, write_trace_csv, DEFAULT_DT};

/// Cooperative UAV-UGV route planner.
#[derive(Parser, Debug)]
#[command(name = "coroute", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Plan a scenario; writes plan.json, metrics.csv and routes.geojson.
    Plan {
        scenario: PathBuf,
        #[command(flatten)]
        planning: Planning,
        #[command(flatten)]
        common: Common,
    },
    /// Replay plans in the simulator; writes report.json and trace.csv.
    Validate {
        /// plan.json produced by `plan`.
        plan: PathBuf,
        /// Scenario the plans were made for.
        #[arg(long)]
        scenario: PathBuf,
        /// Integration step in seconds.
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        /// Only replay the plan at this rank (0 = best).
        #[arg(long)]
        rank: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the best plan of each outer method with the UGV-only route;
    /// writes comparison.csv.
    Compare {
        scenario: PathBuf,
        #[command(flatten)]
        planning: Planning,
        #[command(flatten)]
        common: Common,
    },
    /// Write a random scenario to scenario.json.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Side of the square area in meters.
        #[arg(long, default_value_t = 20_000.0)]
        area: f64,
        /// Road lattice size (grid x grid nodes).
        #[arg(long, default_value_t = 5)]
        grid: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct Planning {
    #[arg(long, value_enum, default_value_t = Outer::Both)]
    outer: Outer,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Wall-clock limit per subproblem solve, in seconds.
    #[arg(long, default_value_t = 10.0)]
    time_limit: f64,
}

#[derive(Args, Debug)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Vehicle parameters: `custom` keeps those in the scenario file.
    #[arg(long, value_enum, default_value_t = ProfileArg::Custom)]
    profile: ProfileArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Outer {
    Greedy,
    Exact,
    Both,
}

impl From<Outer> for OuterSelection {
    fn from(o: Outer) -> Self {
        match o {
            Outer::Greedy => OuterSelection::Greedy,
            Outer::Exact => OuterSelection::Exact,
            Outer::Both => OuterSelection::Both,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum ProfileArg {
    Paper,
    Lab,
    Custom,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Violation(String),
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Plan {
            scenario,
            planning,
            common,
        } => {
            let s = read_scenario(&scenario, common.profile)?;
            let plans = make_plans(&s, &planning)?;
            let out = out_dir(&common.out)?;
            write(
                &out.join("plan.json"),
                export::plans_to_json(&plans).context("serializing plans")?,
            )?;
            let mut metrics = Vec::new();
            export::write_metrics_csv(&plans, &mut metrics).context("writing metrics")?;
            write(&out.join("metrics.csv"), metrics)?;
            if let Some(best) = plans.first() {
                let geo = export::plan_to_geojson(best, &s);
                let mut text = serde_json::to_string_pretty(&geo).context("serializing routes")?;
                text.push('\n');
                write(&out.join("routes.geojson"), text)?;
            }
            for (rank, p) in plans.iter().enumerate() {
                println!(
                    "plan {rank}: {:?} cover {} total_time {:.3} s energy {:.3} J dropped {}",
                    p.outer_method,
                    p.cover_used.as_ref().map_or(0, |c| c.stops.len()),
                    p.metrics.total_time,
                    p.metrics.total_energy,
                    p.metrics.dropped,
                );
            }
            Ok(())
        }
        Command::Validate {
            plan,
            scenario,
            dt,
            rank,
            common,
        } => {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(anyhow::anyhow!("--dt must be positive").into());
            }
            let s = read_scenario(&scenario, common.profile)?;
            let text =
                fs::read_to_string(&plan).with_context(|| format!("reading {}", plan.display()))?;
            let plans = export::plans_from_json(&text)
                .with_context(|| format!("parsing {}", plan.display()))?;
            let picked: Vec<(usize, &CooperativePlan)> = match rank {
                Some(r) => vec![(
                    r,
                    plans
                        .get(r)
                        .with_context(|| format!("no plan at rank {r}"))?,
                )],
                None => plans.iter().enumerate().collect(),
            };
            if picked.is_empty() {
                return Err(anyhow::anyhow!("{} holds no plans", plan.display()).into());
            }
            let out = out_dir(&common.out)?;
            let mut reports = Vec::new();
            let mut failed = Vec::new();
            for (i, &(r, p)) in picked.iter().enumerate() {
                let report = if i == 0 {
                    let (report, rows) = simulate_with_trace(p, &s, dt);
                    let mut buf = Vec::new();
                    write_trace_csv(&rows, &mut buf).context("writing trace")?;
                    write(&out.join("trace.csv"), buf)?;
                    report
                } else {
                    simulate(p, &s, dt)
                };
                println!(
                    "plan {r}: ok {} violations {} max_sortie {:.3} s time_mismatch {:.6} s",
                    report.ok,
                    report.violations.len(),
                    report.max_sortie_duration,
                    report.time_mismatch,
                );
                if !report.ok {
                    failed.push(r);
                }
                reports.push(serde_json::json!({ "rank": r, "report": report }));
            }
            let mut text = serde_json::to_string_pretty(&reports).context("serializing report")?;
            text.push('\n');
            write(&out.join("report.json"), text)?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Violation(format!(
                    "violations in plan(s) {failed:?}"
                )))
            }
        }
        Command::Compare {
            scenario,
            planning,
            common,
        } => {
            let s = read_scenario(&scenario, common.profile)?;
            let plans = make_plans(&s, &planning)?;
            let baseline = ugv_only_baseline(&s).context("baseline")?;
            let picked = best_per_method(&plans, planning.outer.into());
            let report = compare(&picked, &baseline);
            let out = out_dir(&common.out)?;
            let mut buf = Vec::new();
            export::write_comparison_csv(&report, &mut buf).context("writing comparison")?;
            print!("{}", String::from_utf8_lossy(&buf));
            write(&out.join("comparison.csv"), buf)?;
            Ok(())
        }
        Command::Gen {
            seed,
            points,
            area,
            grid,
            common,
        } => {
            let profile = match common.profile {
                ProfileArg::Lab => Profile::Lab,
                ProfileArg::Paper | ProfileArg::Custom => Profile::Paper,
            };
            let s = generate_random_scenario_with(profile, seed, points, area, grid)
                .context("generating scenario")?;
            let out = out_dir(&common.out)?;
            let path = out.join("scenario.json");
            write(&path, s.to_json())?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn read_scenario(path: &Path, profile: ProfileArg) -> Result<Scenario> {
    let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let s = load_scenario(&raw).with_context(|| format!("loading {}", path.display()))?;
    let s = match profile {
        ProfileArg::Custom => s,
        ProfileArg::Paper => s.with_profile(Profile::Paper)?,
        ProfileArg::Lab => s.with_profile(Profile::Lab)?,
    };
    Ok(s)
}

fn make_plans(s: &Scenario, p: &Planning) -> Result<Vec<CooperativePlan>> {
    if !(p.time_limit.is_finite() && p.time_limit > 0.0) {
        bail!("--time-limit must be positive");
    }
    let opts = PlanOptions {
        search: SearchConfig {
            seed: p.seed,
            time_limit: p.time_limit,
            ..SearchConfig::default()
        },
        ..PlanOptions::default()
    };
    Ok(plan(s, p.outer.into(), &opts)?)
}

fn out_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.to_path_buf())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

//! File formats written by the command-line tool.
//!
//! CSV headers are frozen; `schema_version` changes whenever a column does.

use std::io::Write;

use serde_json::{json, Value};

use crate::pipeline::{ComparisonReport, CooperativePlan, PlanMethod};
use crate::scenario::{Point2D, Scenario};
use crate::simulator::SimReport;

pub const SCHEMA_VERSION: u32 = 1;

pub const METRICS_HEADER: [&str; 17] = [
    "schema_version",
    "rank",
    "method",
    "found_by",
    "cover",
    "total_time_s",
    "total_energy_j",
    "ugv_travel_time_s",
    "ugv_energy_j",
    "ugv_missions_visited",
    "uav_travel_time_s",
    "uav_energy_j",
    "uav_missions_visited",
    "recharges_on_ugv",
    "recharges_at_depot",
    "dropped",
    "sorties",
];

fn method_name(m: PlanMethod) -> &'static str {
    match m {
        PlanMethod::Exact => "exact",
        PlanMethod::Greedy => "greedy",
        PlanMethod::UgvOnly => "ugv_only",
    }
}

fn pretty<T: serde::Serialize>(value: &T) -> serde_json::Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// Every plan, best first, as pretty JSON.
pub fn plans_to_json(plans: &[CooperativePlan]) -> serde_json::Result<String> {
    pretty(&plans)
}

pub fn plans_from_json(text: &str) -> serde_json::Result<Vec<CooperativePlan>> {
    serde_json::from_str(text)
}

pub fn report_to_json(report: &SimReport) -> serde_json::Result<String> {
    pretty(report)
}

/// One row per plan: time, energy, per-vehicle split and recharge counts.
pub fn write_metrics_csv<W: Write>(plans: &[CooperativePlan], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for (rank, p) in plans.iter().enumerate() {
        let m = &p.metrics;
        let found_by: Vec<&str> = p.found_by.iter().map(|&x| method_name(x)).collect();
        let cover: Vec<String> = p
            .cover_used
            .as_ref()
            .map(|c| c.stops.iter().map(|s| s.to_string()).collect())
            .unwrap_or_default();
        w.write_record([
            SCHEMA_VERSION.to_string(),
            rank.to_string(),
            method_name(p.outer_method).to_string(),
            found_by.join(";"),
            cover.join(";"),
            m.total_time.to_string(),
            m.total_energy.to_string(),
            m.ugv.travel_time.to_string(),
            m.ugv.energy.to_string(),
            m.ugv.missions_visited.to_string(),
            m.uav.travel_time.to_string(),
            m.uav.energy.to_string(),
            m.uav.missions_visited.to_string(),
            m.recharges_on_ugv.to_string(),
            m.recharges_at_depot.to_string(),
            m.dropped.to_string(),
            p.uav_route.sorties.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary table: one row per metric (time in minutes, energy in MJ), one
/// column per plan, the baseline, then one improvement column per plan.
pub fn write_comparison_csv<W: Write>(report: &ComparisonReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["schema_version".to_string(), "metric".into(), "unit".into()];
    header.extend(report.rows.iter().map(|r| r.label.clone()));
    header.push("ugv_only".into());
    header.extend(
        report
            .rows
            .iter()
            .map(|r| format!("{}_improvement_pct", r.label)),
    );
    w.write_record(&header)?;
    for line in report.summary() {
        let mut rec = vec![
            SCHEMA_VERSION.to_string(),
            line.metric.to_string(),
            line.unit.to_string(),
        ];
        rec.extend(line.plans.iter().map(|v| format!("{v:.4}")));
        rec.push(format!("{:.4}", line.baseline));
        rec.extend(line.improvements.iter().map(|v| format!("{v:.2}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn coords(points: impl IntoIterator<Item = Point2D>) -> Value {
    Value::Array(points.into_iter().map(|p| json!([p.x, p.y])).collect())
}

fn feature(geometry: Value, properties: Value) -> Value {
    json!({ "type": "Feature", "geometry": geometry, "properties": properties })
}

/// Ground legs, sorties, stops and recharge markers of one plan. Coordinates
/// are planar meters, not longitude/latitude.
pub fn plan_to_geojson(plan: &CooperativePlan, s: &Scenario) -> Value {
    let pos = |id| s.road.position(id).expect("plan nodes are road nodes");
    let mut features = Vec::new();
    for (k, leg) in plan.ugv_route.legs.iter().enumerate() {
        features.push(feature(
            json!({ "type": "LineString", "coordinates": coords(leg.path.iter().map(|&n| pos(n))) }),
            json!({ "vehicle": "ugv", "leg": k, "depart": leg.depart, "arrive": leg.arrive }),
        ));
    }
    for (k, sortie) in plan.uav_route.sorties.iter().enumerate() {
        let mut line = vec![pos(sortie.launch_node)];
        line.extend(sortie.visits.iter().map(|&p| s.point(p)));
        line.push(pos(sortie.land_node));
        features.push(feature(
            json!({ "type": "LineString", "coordinates": coords(line) }),
            json!({
                "vehicle": "uav",
                "sortie": k,
                "visits": sortie.visits,
                "launch": sortie.launch_time,
                "land": sortie.land_time,
                "duration": sortie.duration,
            }),
        ));
    }
    for (k, &stop) in plan.ugv_route.ordered_stops.iter().enumerate() {
        if k > 0 && k + 1 == plan.ugv_route.ordered_stops.len() {
            break;
        }
        let p = pos(stop);
        let kind = if stop == s.depot() { "depot" } else { "stop" };
        features.push(feature(
            json!({ "type": "Point", "coordinates": [p.x, p.y] }),
            json!({ "kind": kind, "node": stop.0, "order": k }),
        ));
    }
    for r in &plan.uav_route.recharges {
        let p = pos(r.node);
        features.push(feature(
            json!({ "type": "Point", "coordinates": [p.x, p.y] }),
            json!({ "kind": "recharge", "node": r.node.0, "start": r.start, "end": r.end, "amount": r.amount }),
        ));
    }
    for p in &s.mission_points {
        features.push(feature(
            json!({ "type": "Point", "coordinates": [p.position.x, p.position.y] }),
            json!({ "kind": "mission", "point": p.id, "dropped": plan.dropped.contains(&p.id) }),
        ));
    }
    json!({
        "type": "FeatureCollection",
        "properties": { "crs": "planar meters (x east, y north); not WGS84" },
        "features": features,
    })
}

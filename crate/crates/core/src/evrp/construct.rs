use super::{
    airborne_time, EvrpInstance, Phase, Route, Sortie, UavLegRoute, DEST, FEAS_EPS, ORIGIN,
};

/// Path-cheapest-arc construction as a search route.
pub(crate) fn cheapest_arc_route(inst: &EvrpInstance) -> Route {
    let limit = inst.endurance_seconds() * (1.0 + FEAS_EPS);
    let c = &inst.cost;
    let mut dropped = Vec::new();
    let mut unvisited: Vec<usize> = Vec::new();
    for v in inst.mission_nodes() {
        let solo = [
            c[ORIGIN][v] + c[v][ORIGIN],
            (c[ORIGIN][v] + c[v][DEST]).max(inst.ugv_leg_time),
            c[DEST][v] + c[v][DEST],
        ];
        if solo.iter().any(|&d| d <= limit) {
            unvisited.push(v);
        } else {
            dropped.push(v);
        }
    }

    // a transfer sortie is airborne for at least the whole drive
    let transfer_ok = inst.ugv_leg_time <= limit;
    let mut sorties = Vec::new();
    let mut at = ORIGIN;
    while !unvisited.is_empty() {
        let lands: &[usize] = match (at == ORIGIN, transfer_ok) {
            (true, true) => &[ORIGIN, DEST],
            (true, false) => &[ORIGIN],
            (false, _) => &[DEST],
        };
        // cheapest way home from v; ties prefer the origin
        let home = |v: usize| {
            lands
                .iter()
                .map(|&l| (c[v][l], l))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .unwrap()
        };
        let cheapest = |from: usize, used: f64, pool: &[usize]| {
            pool.iter()
                .copied()
                .filter(|&k| used + c[from][k] + home(k).0 <= limit)
                .min_by(|&a, &b| c[from][a].total_cmp(&c[from][b]).then(a.cmp(&b)))
        };
        let Some(first) = cheapest(at, 0.0, &unvisited) else {
            if at == ORIGIN {
                // nothing reachable from here: ride the ground vehicle over
                at = DEST;
                continue;
            }
            dropped.append(&mut unvisited);
            break;
        };
        unvisited.retain(|&k| k != first);
        let mut visits = vec![first];
        let mut used = c[at][first];
        while let Some(next) = cheapest(*visits.last().unwrap(), used, &unvisited) {
            used += c[*visits.last().unwrap()][next];
            unvisited.retain(|&k| k != next);
            visits.push(next);
        }
        let last = *visits.last().unwrap();
        let land =
            if unvisited.is_empty() && at == ORIGIN && transfer_ok && used + c[last][DEST] <= limit
            {
                DEST
            } else {
                home(last).1
            };
        let phase = match (at, land) {
            (ORIGIN, ORIGIN) => Phase::AtOrigin,
            (ORIGIN, _) => Phase::Transfer,
            _ => Phase::AtDest,
        };
        debug_assert!(airborne_time(inst, phase, &visits) <= limit);
        sorties.push(Sortie { phase, visits });
        at = land;
    }
    let mut route = Route { sorties, dropped };
    route.normalize();
    route
}

/// Greedy initial route: extend the current sortie along the cheapest arc
/// that still leaves enough fuel to get home, otherwise land at the nearest
/// refuel node and start over. Points no solo sortie can reach are dropped.
pub fn construct_initial(inst: &EvrpInstance) -> UavLegRoute {
    let route = cheapest_arc_route(inst);
    let score = route.score(inst).expect("construction is feasible");
    UavLegRoute::materialize(inst, &route, vec![score.objective])
}

use std::cell::RefCell;
use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::construct::cheapest_arc_route;
use super::{sortie_duration, EvrpInstance, Phase, Route, Score, Sortie, UavLegRoute, FEAS_EPS};

const PHASES: [Phase; 3] = [Phase::AtOrigin, Phase::Transfer, Phase::AtDest];

/// Largest visit pool the repartition move re-splits exactly.
const POOL_MAX: usize = 8;
/// Smallest gain, in seconds, for which a repartition is tried.
const POOL_EPS: f64 = 1e-9;
/// Relative noise on insertion costs during recreate.
const NOISE: f64 = 0.1;
/// Smallest sortie shortening `polish` acts on, in seconds.
const IMPROVE_EPS: f64 = 1e-9;
/// Stale rounds after which the walk returns to the incumbent.
const RESTART_EVERY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub seed: u64,
    /// Wall-clock budget per solve, in seconds.
    pub time_limit: f64,
    /// Perturbation rounds without a new incumbent before stopping.
    pub max_no_improve: usize,
    /// Seconds charged per dropped visit.
    pub drop_penalty: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            time_limit: 10.0,
            max_no_improve: 60,
            drop_penalty: 1e6,
        }
    }
}

/// Candidate routes reachable by one move, handed to `visit` in a fixed
/// order (shuffled by `order`). Stops early when `visit` returns true.
fn for_each_neighbor(
    parts: &Repartitions,
    route: &Route,
    order: &[usize],
    mut visit: impl FnMut(Route) -> bool,
) -> bool {
    let inst = parts.inst;
    // flattened visit positions, permuted by the seeded order
    let positions: Vec<(usize, usize)> = route
        .sorties
        .iter()
        .enumerate()
        .flat_map(|(si, s)| (0..s.visits.len()).map(move |pi| (si, pi)))
        .collect();
    let permuted: Vec<(usize, usize)> = order
        .iter()
        .filter(|&&k| k < positions.len())
        .map(|&k| positions[k])
        .collect();

    // relocate a visit anywhere, including a sortie of its own
    for &(si, pi) in &permuted {
        let mut base = route.clone();
        let v = base.sorties[si].visits.remove(pi);
        let done = for_each_insertion(&base, v, |cand| {
            if cand
                .sorties
                .get(si)
                .is_some_and(|s| s.visits.len() == route.sorties[si].visits.len())
                && cand.sorties[si].visits == route.sorties[si].visits
                && cand.sorties.len() == route.sorties.len()
            {
                return false;
            }
            visit(cand)
        });
        if done {
            return true;
        }
    }
    // swap two visits
    for (a, &(sa, pa)) in permuted.iter().enumerate() {
        for &(sb, pb) in &permuted[a + 1..] {
            let mut cand = route.clone();
            let va = cand.sorties[sa].visits[pa];
            let vb = cand.sorties[sb].visits[pb];
            cand.sorties[sa].visits[pa] = vb;
            cand.sorties[sb].visits[pb] = va;
            if visit(cand) {
                return true;
            }
        }
    }
    // 2-opt inside a sortie
    for (si, s) in route.sorties.iter().enumerate() {
        for i in 0..s.visits.len() {
            for j in i + 1..s.visits.len() {
                let mut cand = route.clone();
                cand.sorties[si].visits[i..=j].reverse();
                if visit(cand) {
                    return true;
                }
            }
        }
    }
    // exchange tails between two sorties
    for a in 0..route.sorties.len() {
        for b in 0..route.sorties.len() {
            if a == b {
                continue;
            }
            let (va, vb) = (&route.sorties[a].visits, &route.sorties[b].visits);
            for i in 0..=va.len() {
                for j in 0..=vb.len() {
                    if (i == va.len() && j == vb.len()) || (a > b && i == 0 && j == 0) {
                        continue;
                    }
                    let mut cand = route.clone();
                    let mut na = va[..i].to_vec();
                    na.extend_from_slice(&vb[j..]);
                    let mut nb = vb[..j].to_vec();
                    nb.extend_from_slice(&va[i..]);
                    cand.sorties[a].visits = na;
                    cand.sorties[b].visits = nb;
                    if visit(cand) {
                        return true;
                    }
                }
            }
        }
    }
    // merge two sorties under any phase, either part flown either way
    for a in 0..route.sorties.len() {
        for b in 0..route.sorties.len() {
            if a == b {
                continue;
            }
            for (rev_a, rev_b) in [(false, false), (false, true), (true, false), (true, true)] {
                let mut merged = route.sorties[a].visits.clone();
                if rev_a {
                    merged.reverse();
                }
                let start = merged.len();
                merged.extend_from_slice(&route.sorties[b].visits);
                if rev_b {
                    merged[start..].reverse();
                }
                for phase in PHASES {
                    let mut cand = route.clone();
                    cand.sorties[a].visits = merged.clone();
                    cand.sorties[a].phase = phase;
                    cand.sorties[b].visits.clear();
                    polish(inst, &mut cand.sorties[a]);
                    if visit(cand) {
                        return true;
                    }
                }
            }
        }
    }
    // split a sortie in two, each part under any phase
    for (si, s) in route.sorties.iter().enumerate() {
        for cut in 1..s.visits.len() {
            for head in PHASES {
                for tail in PHASES.into_iter().filter(|&p| p >= head) {
                    let mut cand = route.clone();
                    let rest = cand.sorties[si].visits.split_off(cut);
                    cand.sorties[si].phase = head;
                    cand.sorties.insert(
                        si + 1,
                        Sortie {
                            phase: tail,
                            visits: rest,
                        },
                    );
                    polish(inst, &mut cand.sorties[si]);
                    polish(inst, &mut cand.sorties[si + 1]);
                    if visit(cand) {
                        return true;
                    }
                }
            }
        }
    }
    // change a sortie's phase, from any starting visit, either way round
    for si in 0..route.sorties.len() {
        let n = route.sorties[si].visits.len();
        for phase in PHASES {
            if phase != route.sorties[si].phase {
                for shift in 0..n {
                    for reverse in [false, true] {
                        let mut cand = route.clone();
                        let visits = &mut cand.sorties[si].visits;
                        visits.rotate_left(shift);
                        if reverse {
                            visits.reverse();
                        }
                        cand.sorties[si].phase = phase;
                        polish(inst, &mut cand.sorties[si]);
                        if visit(cand) {
                            return true;
                        }
                    }
                }
            }
        }
    }
    // pool up to three sorties and re-split their visits optimally
    let n_sorties = route.sorties.len();
    let mut pools: Vec<Vec<usize>> = Vec::new();
    for a in 0..n_sorties {
        pools.push(vec![a]);
        for b in a + 1..n_sorties {
            pools.push(vec![a, b]);
            for c in b + 1..n_sorties {
                pools.push(vec![a, b, c]);
            }
        }
    }
    for pooled in pools {
        let size: usize = pooled.iter().map(|&i| route.sorties[i].visits.len()).sum();
        if size > POOL_MAX {
            continue;
        }
        let transfer_outside = route
            .sorties
            .iter()
            .enumerate()
            .any(|(i, s)| s.phase == Phase::Transfer && !pooled.contains(&i));
        let pool: Vec<usize> = pooled
            .iter()
            .flat_map(|&i| route.sorties[i].visits.clone())
            .collect();
        let Some((cost, fresh)) = parts.best(&pool, !transfer_outside) else {
            continue;
        };
        let current: Vec<&Sortie> = pooled.iter().map(|&i| &route.sorties[i]).collect();
        if cost < pooled_cost(inst, &current) - POOL_EPS {
            let mut cand = route.clone();
            for &i in &pooled {
                cand.sorties[i].visits.clear();
            }
            cand.sorties.extend(fresh);
            if visit(cand) {
                return true;
            }
        }
    }
    // reinstate a dropped visit
    for di in 0..route.dropped.len() {
        let mut base = route.clone();
        let v = base.dropped.remove(di);
        if for_each_insertion(&base, v, &mut visit) {
            return true;
        }
    }
    // drop a visit
    for &(si, pi) in &permuted {
        let mut cand = route.clone();
        let v = cand.sorties[si].visits.remove(pi);
        cand.dropped.push(v);
        if visit(cand) {
            return true;
        }
    }
    false
}

/// Improves a sortie's visiting order by segment reversal and single-visit
/// moves until neither shortens it.
fn polish(inst: &EvrpInstance, sortie: &mut Sortie) {
    let n = sortie.visits.len();
    let mut best = sortie_duration(inst, sortie.phase, &sortie.visits);
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut cand = sortie.visits.clone();
                if i < j {
                    cand[i..=j].reverse();
                    let d = sortie_duration(inst, sortie.phase, &cand);
                    if d < best - IMPROVE_EPS {
                        (sortie.visits, best, improved) = (cand.clone(), d, true);
                        continue;
                    }
                    cand.clone_from(&sortie.visits);
                }
                let v = cand.remove(i);
                cand.insert(j, v);
                let d = sortie_duration(inst, sortie.phase, &cand);
                if d < best - IMPROVE_EPS {
                    (sortie.visits, best, improved) = (cand, d, true);
                }
            }
        }
    }
}

/// Best re-split of a pool and its cost.
type Split = Option<(f64, Vec<Sortie>)>;

/// Memoized `repartition` results for one instance, keyed by the sorted
/// pool and whether a transfer sortie may be formed.
struct Repartitions<'a> {
    inst: &'a EvrpInstance,
    memo: RefCell<HashMap<(Vec<usize>, bool), Split>>,
}

impl<'a> Repartitions<'a> {
    fn new(inst: &'a EvrpInstance) -> Self {
        Self {
            inst,
            memo: RefCell::new(HashMap::new()),
        }
    }

    fn best(&self, pool: &[usize], allow_transfer: bool) -> Split {
        let mut key = pool.to_vec();
        key.sort_unstable();
        let key = (key, allow_transfer);
        if let Some(hit) = self.memo.borrow().get(&key) {
            return hit.clone();
        }
        let fresh = repartition(self.inst, &key.0, allow_transfer);
        self.memo.borrow_mut().insert(key, fresh.clone());
        fresh
    }
}

/// Cheapest way to fly every visit in `pool` as a set of sorties, by
/// dynamic programming over subsets. The optional transfer sortie is charged
/// its airborne time beyond the drive it replaces.
fn repartition(inst: &EvrpInstance, pool: &[usize], allow_transfer: bool) -> Split {
    let m = pool.len();
    let full = (1usize << m) - 1;
    let limit = inst.endurance_seconds() * (1.0 + FEAS_EPS);
    // best[p][mask] = (flight, order) over orders of `mask` under phase p
    let best: Vec<Vec<(f64, Vec<usize>)>> = PHASES
        .iter()
        .map(|&phase| best_orders(inst, pool, phase))
        .collect();
    let round_trip = |mask: usize| -> Option<(f64, usize)> {
        [0usize, 2]
            .into_iter()
            .filter_map(|p| {
                let f = best[p][mask].0;
                (f <= limit).then(|| (f + inst.recharge_time(f), p))
            })
            .min_by(|x, y| x.0.total_cmp(&y.0))
    };
    // split[mask] = (cost, first block) over partitions into round trips
    let mut split: Vec<(f64, usize)> = vec![(f64::INFINITY, 0); full + 1];
    split[0] = (0.0, 0);
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let mut sub = mask;
        while sub > 0 {
            if sub & low != 0 {
                if let Some((c, _)) = round_trip(sub) {
                    let total = c + split[mask ^ sub].0;
                    if total < split[mask].0 {
                        split[mask] = (total, sub);
                    }
                }
            }
            sub = (sub - 1) & mask;
        }
    }
    let mut choice = (split[full].0, 0usize);
    if allow_transfer {
        let mut t = full;
        while t > 0 {
            let airborne = best[1][t].0.max(inst.ugv_leg_time);
            if airborne <= limit {
                let c =
                    airborne + inst.recharge_time(airborne) - inst.ugv_leg_time + split[full ^ t].0;
                if c < choice.0 {
                    choice = (c, t);
                }
            }
            t = (t - 1) & full;
        }
    }
    if !choice.0.is_finite() {
        return None;
    }
    let visits_of = |p: usize, mask: usize| best[p][mask].1.iter().map(|&i| pool[i]).collect();
    let mut out = Vec::new();
    if choice.1 != 0 {
        out.push(Sortie {
            phase: Phase::Transfer,
            visits: visits_of(1, choice.1),
        });
    }
    let mut rest = full ^ choice.1;
    while rest != 0 {
        let block = split[rest].1;
        let (_, p) = round_trip(block).expect("chosen block is feasible");
        out.push(Sortie {
            phase: PHASES[p],
            visits: visits_of(p, block),
        });
        rest ^= block;
    }
    Some((choice.0, out))
}

/// Cost of existing sorties on the same scale as `repartition`.
fn pooled_cost(inst: &EvrpInstance, sorties: &[&Sortie]) -> f64 {
    sorties
        .iter()
        .map(|s| {
            let f = super::airborne_time(inst, s.phase, &s.visits);
            let extra = if s.phase == Phase::Transfer {
                inst.ugv_leg_time
            } else {
                0.0
            };
            f + inst.recharge_time(f) - extra
        })
        .sum()
}

/// Shortest visiting order of every subset of `pool` for one phase, as
/// indices into `pool`.
fn best_orders(inst: &EvrpInstance, pool: &[usize], phase: Phase) -> Vec<(f64, Vec<usize>)> {
    let m = pool.len();
    let size = 1usize << m;
    let (from, to) = (phase.launch(), phase.land());
    // path[mask][last]: shortest path from launch through mask ending at last
    let mut path = vec![vec![f64::INFINITY; m]; size];
    let mut prev = vec![vec![usize::MAX; m]; size];
    for i in 0..m {
        path[1 << i][i] = inst.cost[from][pool[i]];
    }
    for mask in 1..size {
        for last in 0..m {
            let here = path[mask][last];
            if mask >> last & 1 == 0 || !here.is_finite() {
                continue;
            }
            for next in 0..m {
                if mask >> next & 1 == 1 {
                    continue;
                }
                let nm = mask | 1 << next;
                let c = here + inst.cost[pool[last]][pool[next]];
                if c < path[nm][next] {
                    path[nm][next] = c;
                    prev[nm][next] = last;
                }
            }
        }
    }
    let mut out = vec![(f64::INFINITY, Vec::new()); size];
    for (mask, slot) in out.iter_mut().enumerate().skip(1) {
        let Some((last, total)) = (0..m)
            .filter(|&l| mask >> l & 1 == 1)
            .map(|l| (l, path[mask][l] + inst.cost[pool[l]][to]))
            .min_by(|x, y| x.1.total_cmp(&y.1))
        else {
            continue;
        };
        let mut order = Vec::new();
        let (mut at, mut rest) = (last, mask);
        while at != usize::MAX {
            order.push(at);
            let p = prev[rest][at];
            rest &= !(1 << at);
            at = p;
        }
        order.reverse();
        *slot = (total, order);
    }
    out
}

/// Every placement of `v` into `base`: each slot of each sortie, then a new
/// sortie of each phase.
fn for_each_insertion(base: &Route, v: usize, mut visit: impl FnMut(Route) -> bool) -> bool {
    for si in 0..base.sorties.len() {
        for pos in 0..=base.sorties[si].visits.len() {
            let mut cand = base.clone();
            cand.sorties[si].visits.insert(pos, v);
            if visit(cand) {
                return true;
            }
        }
    }
    for phase in PHASES {
        let mut cand = base.clone();
        cand.sorties.push(Sortie {
            phase,
            visits: vec![v],
        });
        if visit(cand) {
            return true;
        }
    }
    false
}

fn evaluate(inst: &EvrpInstance, mut cand: Route) -> Option<(Route, Score)> {
    if !cand.normalize() {
        return None;
    }
    let score = cand.score(inst)?;
    Some((cand, score))
}

/// First improving neighbor of `route`, if any.
fn first_improvement(
    parts: &Repartitions,
    route: &Route,
    score: &Score,
    order: &[usize],
) -> Option<(Route, Score)> {
    let mut found = None;
    for_each_neighbor(parts, route, order, |cand| {
        match evaluate(parts.inst, cand) {
            Some((r, sc)) if sc.better_than(score) => {
                found = Some((r, sc));
                true
            }
            _ => false,
        }
    });
    found
}

struct Searcher<'a> {
    inst: &'a EvrpInstance,
    parts: Repartitions<'a>,
    rng: ChaCha8Rng,
    deadline: Instant,
}

impl Searcher<'_> {
    fn expired(&self) -> bool {
        Instant::now() >= self.deadline
    }

    fn shuffled_order(&mut self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.inst.n_missions()).collect();
        order.shuffle(&mut self.rng);
        order
    }

    /// Descends to a local optimum. `on_improve` sees every accepted score.
    fn descend(
        &mut self,
        mut route: Route,
        mut score: Score,
        mut on_improve: impl FnMut(&Score),
    ) -> (Route, Score) {
        let order = self.shuffled_order();
        while !self.expired() {
            match first_improvement(&self.parts, &route, &score, &order) {
                Some((r, sc)) => {
                    route = r;
                    score = sc;
                    on_improve(&score);
                }
                None => break,
            }
        }
        (route, score)
    }

    /// Removes a few random visits, or now and then a whole sortie, and
    /// reinserts them by best insertion under a noisy cost.
    fn perturb(&mut self, route: &Route) -> (Route, Score) {
        let mut work = route.clone();
        let visited: Vec<usize> = work.visited().collect();
        let mut removed: Vec<usize> = if work.sorties.len() > 1 && self.rng.gen_bool(0.25) {
            let si = self.rng.gen_range(0..work.sorties.len());
            work.sorties[si].visits.clone()
        } else {
            let k = self.rng.gen_range(1..=visited.len().clamp(1, 3));
            visited
                .choose_multiple(&mut self.rng, k.min(visited.len()))
                .copied()
                .collect()
        };
        for s in &mut work.sorties {
            s.visits.retain(|v| !removed.contains(v));
        }
        removed.append(&mut work.dropped);
        removed.shuffle(&mut self.rng);
        work.normalize();
        for v in removed {
            let mut best: Option<(Route, f64)> = None;
            let rng = &mut self.rng;
            let inst = self.inst;
            for_each_insertion(&work, v, |cand| {
                if let Some((r, sc)) = evaluate(inst, cand) {
                    let noisy = sc.objective * (1.0 + NOISE * rng.gen::<f64>());
                    if best.as_ref().is_none_or(|(_, b)| noisy < *b) {
                        best = Some((r, noisy));
                    }
                }
                false
            });
            work = match best {
                Some((r, _)) => r,
                None => {
                    work.dropped.push(v);
                    work
                }
            };
        }
        work.normalize();
        let score = work
            .score(self.inst)
            .expect("greedy reinsertion stays feasible");
        (work, score)
    }
}

/// The walk moves to local optima that drop fewer visits or are no slower.
fn accepts(
    inst: &EvrpInstance,
    from: &Route,
    from_score: &Score,
    to: &Route,
    to_score: &Score,
) -> bool {
    let time = |r: &Route, s: &Score| s.objective - inst.drop_penalty * r.dropped.len() as f64;
    to.dropped.len() < from.dropped.len() || time(to, to_score) <= time(from, from_score)
}

/// Path-cheapest-arc construction followed by iterated local search.
///
/// Descent is first-improvement over, in order: relocate (within and across
/// sorties, or into a new sortie), swap, intra-sortie 2-opt, tail exchange
/// between sorties, sortie merge, sortie split, sortie phase change, exact
/// repartition of up to three pooled sorties, undrop and drop. Structural
/// moves re-sequence the sorties they touch. Each round perturbs the walk's
/// current local optimum by a seeded ruin-and-recreate and descends again;
/// the walk accepts results that are no worse and returns to the incumbent
/// every `RESTART_EVERY` stale rounds. The incumbent only changes on strict
/// improvement.
pub fn solve(inst: &EvrpInstance, cfg: &SearchConfig) -> UavLegRoute {
    let start = Instant::now();
    let budget = Duration::from_secs_f64(cfg.time_limit.max(0.0));
    let mut searcher = Searcher {
        inst,
        parts: Repartitions::new(inst),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        deadline: start + budget,
    };
    let initial = cheapest_arc_route(inst);
    let initial_score = initial.score(inst).expect("construction is feasible");
    let mut trace = vec![initial_score.objective];
    if inst.n_missions() == 0 {
        return UavLegRoute::materialize(inst, &initial, trace);
    }
    let (mut best, mut best_score) =
        searcher.descend(initial, initial_score, |sc| trace.push(sc.objective));

    let (mut current, mut current_score) = (best.clone(), best_score);
    let mut stale = 0;
    while stale < cfg.max_no_improve && !searcher.expired() {
        let (r, sc) = searcher.perturb(&current);
        let (r, sc) = searcher.descend(r, sc, |_| {});
        if sc.better_than(&best_score) {
            best = r.clone();
            best_score = sc;
            trace.push(sc.objective);
            stale = 0;
        } else {
            stale += 1;
        }
        if r.dropped.len() <= current.dropped.len()
            && accepts(inst, &current, &current_score, &r, &sc)
        {
            (current, current_score) = (r, sc);
        }
        if stale > 0 && stale % RESTART_EVERY == 0 {
            (current, current_score) = (best.clone(), best_score);
        }
    }
    UavLegRoute::materialize(inst, &best, trace)
}

/// True when no single move in any neighborhood improves `leg`.
pub fn local_search_fixpoint(inst: &EvrpInstance, leg: &UavLegRoute) -> bool {
    let node_of = |pid: usize| {
        inst.mission_nodes()
            .find(|&n| inst.point_id(n) == pid)
            .expect("point belongs to the instance")
    };
    let route = Route {
        sorties: leg
            .sorties
            .iter()
            .map(|s| Sortie {
                phase: s.phase,
                visits: s.visits.iter().map(|&p| node_of(p)).collect(),
            })
            .collect(),
        dropped: leg.dropped.iter().map(|&p| node_of(p)).collect(),
    };
    let Some(score) = route.score(inst) else {
        return false;
    };
    let order: Vec<usize> = (0..inst.n_missions()).collect();
    first_improvement(&Repartitions::new(inst), &route, &score, &order).is_none()
}

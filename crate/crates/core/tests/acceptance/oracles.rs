//! Brute-force reference answers, written without any of the library's
//! algorithms.

/// Every subset of `rows` (bitmask over points) that covers all `n` points
/// with the fewest members, as sorted row-index lists.
pub fn all_minimum_covers(rows: &[u64], n: usize) -> Vec<Vec<usize>> {
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut best = usize::MAX;
    let mut found = Vec::new();
    for subset in 0u32..(1u32 << rows.len()) {
        let size = subset.count_ones() as usize;
        if size > best {
            continue;
        }
        let mut covered = 0u64;
        for (i, r) in rows.iter().enumerate() {
            if subset >> i & 1 == 1 {
                covered |= r;
            }
        }
        if covered & full != full {
            continue;
        }
        if size < best {
            best = size;
            found.clear();
        }
        found.push((0..rows.len()).filter(|i| subset >> i & 1 == 1).collect());
    }
    found
}

/// All-pairs shortest path lengths.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(a, b, l) in edges {
        d[a][b] = d[a][b].min(l);
        d[b][a] = d[b][a].min(l);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Shortest closed tour through `stops` (first entry fixed as the start),
/// by trying every order.
pub fn brute_force_tour(dist: &[Vec<f64>], stops: &[usize]) -> f64 {
    fn go(
        dist: &[Vec<f64>],
        start: usize,
        at: usize,
        rest: &mut Vec<usize>,
        acc: f64,
        best: &mut f64,
    ) {
        if acc >= *best {
            return;
        }
        if rest.is_empty() {
            *best = best.min(acc + dist[at][start]);
            return;
        }
        for i in 0..rest.len() {
            let next = rest.remove(i);
            go(dist, start, next, rest, acc + dist[at][next], best);
            rest.insert(i, next);
        }
    }
    if stops.len() < 2 {
        return 0.0;
    }
    let mut rest = stops[1..].to_vec();
    let mut best = f64::INFINITY;
    go(dist, stops[0], stops[0], &mut rest, 0.0, &mut best);
    best
}

/// Parameters of one UAV routing subproblem, in the oracle's own terms.
pub struct LegProblem {
    pub origin: (f64, f64),
    pub dest: (f64, f64),
    pub points: Vec<(f64, f64)>,
    pub speed: f64,
    pub takeoff: f64,
    pub landing: f64,
    /// Airborne seconds per charge.
    pub endurance: f64,
    pub drive: f64,
    /// Recharge seconds per airborne second (0 for instant).
    pub recharge_ratio: f64,
    pub drop_penalty: f64,
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Shortest flight from `from` through every point in `mask` to `to`,
/// buffers included, over all visiting orders.
fn best_flight(p: &LegProblem, mask: usize, from: (f64, f64), to: (f64, f64)) -> f64 {
    let members: Vec<usize> = (0..p.points.len()).filter(|i| mask >> i & 1 == 1).collect();
    let mut order = members.clone();
    let mut best = f64::INFINITY;
    permute(&mut order, 0, &mut |perm| {
        let mut at = from;
        let mut d = 0.0;
        for &i in perm.iter() {
            d += dist(at, p.points[i]);
            at = p.points[i];
        }
        d += dist(at, to);
        best = best.min(d / p.speed + p.takeoff + p.landing);
    });
    best
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Minimum subproblem objective over every choice of dropped points, split
/// into sorties, visiting order and sortie type.
///
/// Sorties either return to the origin before the drive, cross with the
/// drive (at most one; airborne for at least the drive, since it leaves
/// with the ground vehicle), or fly from the destination after it. The
/// makespan is the sum of round-trip sorties (each with its recharge) plus
/// either the crossing sortie with its recharge or the bare drive.
pub fn evrp_optimum(p: &LegProblem) -> f64 {
    let k = p.points.len();
    let full = 1usize << k;
    let limit = p.endurance * (1.0 + 1e-9);
    let with_recharge = |t: f64| t + t * p.recharge_ratio;

    let mut round = vec![f64::INFINITY; full];
    let mut cross = vec![f64::INFINITY; full];
    for mask in 1..full {
        for (from, to) in [(p.origin, p.origin), (p.dest, p.dest)] {
            let f = best_flight(p, mask, from, to);
            if f <= limit {
                round[mask] = round[mask].min(with_recharge(f));
            }
        }
        let f = best_flight(p, mask, p.origin, p.dest).max(p.drive);
        if f <= limit {
            cross[mask] = with_recharge(f);
        }
    }
    // cheapest split of each set into round-trip sorties
    let mut split = vec![f64::INFINITY; full];
    split[0] = 0.0;
    for mask in 1..full {
        let low = mask & mask.wrapping_neg();
        let mut sub = mask;
        while sub > 0 {
            if sub & low != 0 && round[sub].is_finite() {
                split[mask] = split[mask].min(round[sub] + split[mask ^ sub]);
            }
            sub = (sub - 1) & mask;
        }
    }
    let mut best = f64::INFINITY;
    for visited in 0..full {
        let drops = (k - visited.count_ones() as usize) as f64 * p.drop_penalty;
        best = best.min(split[visited] + p.drive + drops);
        let mut t = visited;
        while t > 0 {
            if cross[t].is_finite() {
                best = best.min(split[visited ^ t] + cross[t] + drops);
            }
            t = (t - 1) & visited;
        }
    }
    best
}

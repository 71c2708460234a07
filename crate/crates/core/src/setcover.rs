//! Refuel-stop selection as minimum set cover.
//!
//! Two routes to the same decision: a greedy heuristic seeded with the depot,
//! and an exact include/exclude branch-and-bound that returns every
//! minimum-cardinality cover. The depot always appears in the returned stop
//! list (it starts and ends the ground tour) but only counts toward the
//! cover size when some mission point needs it.

use serde::{Deserialize, Serialize};

use crate::scenario::{CoverageMatrix, NodeId};

pub const DEFAULT_MAX_SOLUTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverMethod {
    Greedy,
    Exact,
}

/// Selected refuel stops, depot first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefuelStopSet {
    pub stops: Vec<NodeId>,
    pub method: CoverMethod,
    /// Position among the enumerated optima; always 0 for greedy.
    pub optimum_index: usize,
}

impl RefuelStopSet {
    pub fn depot(&self) -> NodeId {
        self.stops[0]
    }

    /// Cover size under the depot convention: non-depot stops, plus one if
    /// they alone leave some point uncovered.
    pub fn effective_size(&self, cov: &CoverageMatrix) -> usize {
        let others = &self.stops[1..];
        others.len() + usize::from(!cov.is_cover(others))
    }

    pub fn is_valid_for(&self, cov: &CoverageMatrix) -> bool {
        let mut sorted = self.stops.clone();
        sorted.sort();
        sorted.dedup();
        sorted.len() == self.stops.len() && cov.is_cover(&self.stops)
    }
}

/// Result of the exact enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactCovers {
    /// Lexicographic by sorted stop ids; `optimum_index` follows this order.
    pub covers: Vec<RefuelStopSet>,
    /// Minimum cover size under the depot convention.
    pub optimal_size: usize,
    /// More optima exist than were returned.
    pub cap_exceeded: bool,
}

/// Fixed-width bit set over mission points.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn empty(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }

    fn from_row(row: &[bool]) -> Self {
        let mut b = Bits::empty(row.len());
        for (i, _) in row.iter().enumerate().filter(|(_, &c)| c) {
            b.0[i / 64] |= 1 << (i % 64);
        }
        b
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn count_new(&self, covered: &Bits) -> usize {
        self.0
            .iter()
            .zip(&covered.0)
            .map(|(a, c)| (a & !c).count_ones() as usize)
            .sum()
    }

    fn union_with(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }
}

/// Depot first, then every stop covering the most still-uncovered points
/// (ties to the smaller id) until nothing is left uncovered.
pub fn greedy_cover(cov: &CoverageMatrix, depot: NodeId) -> RefuelStopSet {
    let n = cov.n_points();
    let rows: Vec<Bits> = (0..cov.stops().len())
        .map(|r| Bits::from_row(cov.row(r)))
        .collect();
    let mut covered = cov
        .row_index(depot)
        .map(|r| rows[r].clone())
        .unwrap_or_else(|| Bits::empty(n));
    let mut stops = vec![depot];
    while covered.count() < n {
        let best = rows
            .iter()
            .enumerate()
            .map(|(r, row)| (row.count_new(&covered), r))
            // max by gain, then the smaller index (ids ascend with rows)
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        match best {
            Some((gain, r)) if gain > 0 => {
                stops.push(cov.stops()[r]);
                covered.union_with(&rows[r]);
            }
            // Precondition violated: some point is uncoverable.
            _ => break,
        }
    }
    RefuelStopSet {
        stops,
        method: CoverMethod::Greedy,
        optimum_index: 0,
    }
}

struct Search<'a> {
    rows: &'a [Bits],
    ids: &'a [NodeId],
    n_points: usize,
    /// For each point, the last candidate index that covers it.
    last_cover: Vec<usize>,
    cap: usize,
    best: usize,
    found: Vec<Vec<usize>>,
    overflow: bool,
}

impl Search<'_> {
    /// Fewest remaining candidates (from `from` on) that could finish the
    /// cover, assuming their new coverage never overlaps.
    fn lower_bound(&self, from: usize, covered: &Bits) -> usize {
        let mut need = self.n_points - covered.count();
        if need == 0 {
            return 0;
        }
        let mut gains: Vec<usize> = self.rows[from..]
            .iter()
            .map(|r| r.count_new(covered))
            .filter(|&g| g > 0)
            .collect();
        gains.sort_unstable_by(|a, b| b.cmp(a));
        for (k, g) in gains.iter().enumerate() {
            if *g >= need {
                return k + 1;
            }
            need -= g;
        }
        usize::MAX
    }

    fn record(&mut self, chosen: &[usize]) {
        let size = chosen.len();
        if size < self.best {
            self.best = size;
            self.found.clear();
            self.overflow = false;
        }
        if self.found.len() < self.cap {
            self.found.push(chosen.to_vec());
        } else {
            self.overflow = true;
        }
    }

    fn branch(&mut self, i: usize, covered: &Bits, chosen: &mut Vec<usize>) {
        if covered.count() == self.n_points {
            self.record(chosen);
            return;
        }
        if i == self.rows.len() {
            return;
        }
        let lb = self.lower_bound(i, covered);
        if lb == usize::MAX || chosen.len().saturating_add(lb) > self.best {
            return;
        }
        // include: only stops that add coverage can appear in a minimum cover
        if self.rows[i].count_new(covered) > 0 {
            let mut next = covered.clone();
            next.union_with(&self.rows[i]);
            chosen.push(i);
            self.branch(i + 1, &next, chosen);
            chosen.pop();
        }
        // exclude: only if every uncovered point keeps a later candidate
        let strands_a_point = (0..self.n_points)
            .any(|p| self.last_cover[p] == i && covered.0[p / 64] & (1 << (p % 64)) == 0);
        if !strands_a_point {
            self.branch(i + 1, covered, chosen);
        }
    }
}

/// Every minimum cover (up to `max_solutions`), each with the depot prepended.
pub fn exact_cover_all_optimal(
    cov: &CoverageMatrix,
    depot: NodeId,
    max_solutions: usize,
) -> ExactCovers {
    let cap = max_solutions.max(1);
    let rows: Vec<Bits> = (0..cov.stops().len())
        .map(|r| Bits::from_row(cov.row(r)))
        .collect();
    let n = cov.n_points();
    let mut last_cover = vec![usize::MAX; n];
    for (r, row) in rows.iter().enumerate() {
        for (p, slot) in last_cover.iter_mut().enumerate() {
            if row.0[p / 64] & (1 << (p % 64)) != 0 {
                *slot = r;
            }
        }
    }
    if last_cover.contains(&usize::MAX) {
        return ExactCovers {
            covers: Vec::new(),
            optimal_size: usize::MAX,
            cap_exceeded: false,
        };
    }
    let upper = greedy_cover(cov, depot).effective_size(cov);
    let mut search = Search {
        rows: &rows,
        ids: cov.stops(),
        n_points: n,
        last_cover,
        cap,
        best: upper,
        found: Vec::new(),
        overflow: false,
    };
    search.branch(0, &Bits::empty(n), &mut Vec::new());

    let mut covers: Vec<(Vec<NodeId>, Vec<NodeId>)> = search
        .found
        .iter()
        .map(|chosen| {
            let mut stops: Vec<NodeId> = chosen
                .iter()
                .map(|&r| search.ids[r])
                .filter(|&id| id != depot)
                .collect();
            stops.sort();
            stops.insert(0, depot);
            let mut key = stops.clone();
            key.sort();
            (key, stops)
        })
        .collect();
    covers.sort();
    ExactCovers {
        covers: covers
            .into_iter()
            .enumerate()
            .map(|(k, (_, stops))| RefuelStopSet {
                stops,
                method: CoverMethod::Exact,
                optimum_index: k,
            })
            .collect(),
        optimal_size: search.best,
        cap_exceeded: search.overflow,
    }
}

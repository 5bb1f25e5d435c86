//! Bottleneck distance between persistence diagrams.
//!
//! Degrees are compared independently and the result is the maximum. Finite
//! points are matched with diagonal enrichment by binary search over the
//! candidate thresholds; essential points are matched among themselves on the
//! birth line.

use crate::diagram::PersistenceDiagram;
use crate::error::{Error, Result};

/// Points of one degree, split into finite `(birth, death)` and essential births.
#[derive(Debug, Clone, Default)]
pub struct MatchingProblem {
    pub left: Vec<(f64, f64)>,
    pub right: Vec<(f64, f64)>,
}

fn linf(p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - q.0).abs().max((p.1 - q.1).abs())
}

fn half_life(p: (f64, f64)) -> f64 {
    (p.1 - p.0) / 2.0
}

/// Size of a maximum matching of `adj` (left vertices to right indices), Hopcroft–Karp.
fn max_matching(adj: &[Vec<usize>], n_right: usize) -> usize {
    const FREE: usize = usize::MAX;
    let n_left = adj.len();
    let mut match_l = vec![FREE; n_left];
    let mut match_r = vec![FREE; n_right];
    let mut dist = vec![0usize; n_left];
    let mut size = 0;
    loop {
        // Layer the graph from the free left vertices.
        let mut queue = std::collections::VecDeque::new();
        for u in 0..n_left {
            if match_l[u] == FREE {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == FREE {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            return size;
        }
        fn augment(
            u: usize,
            adj: &[Vec<usize>],
            match_l: &mut [usize],
            match_r: &mut [usize],
            dist: &mut [usize],
        ) -> bool {
            for &v in &adj[u] {
                let w = match_r[v];
                if w == usize::MAX || (dist[w] == dist[u] + 1 && augment(w, adj, match_l, match_r, dist)) {
                    match_l[u] = v;
                    match_r[v] = u;
                    return true;
                }
            }
            dist[u] = usize::MAX;
            false
        }
        for u in 0..n_left {
            if match_l[u] == FREE && augment(u, adj, &mut match_l, &mut match_r, &mut dist) {
                size += 1;
            }
        }
    }
}

impl MatchingProblem {
    /// Whether a diagonal-enriched bijection of cost at most `eps` exists.
    ///
    /// Points farther than `eps` from the diagonal must be matched off it.
    /// By the Mendelsohn–Dulmage theorem it is enough that the long points of
    /// each side can be matched separately.
    pub fn feasible(&self, eps: f64) -> bool {
        let long_left: Vec<usize> = (0..self.left.len()).filter(|&i| half_life(self.left[i]) > eps).collect();
        let long_right: Vec<usize> = (0..self.right.len()).filter(|&j| half_life(self.right[j]) > eps).collect();
        let adj: Vec<Vec<usize>> = long_left
            .iter()
            .map(|&i| (0..self.right.len()).filter(|&j| linf(self.left[i], self.right[j]) <= eps).collect())
            .collect();
        if max_matching(&adj, self.right.len()) < long_left.len() {
            return false;
        }
        let adj: Vec<Vec<usize>> = long_right
            .iter()
            .map(|&j| (0..self.left.len()).filter(|&i| linf(self.left[i], self.right[j]) <= eps).collect())
            .collect();
        max_matching(&adj, self.left.len()) == long_right.len()
    }

    /// Exact optimum, attained at a pairwise distance or a half-lifetime.
    pub fn solve(&self) -> f64 {
        let cap = self.left.iter().chain(&self.right).map(|&p| half_life(p)).fold(0.0, f64::max);
        let mut cands: Vec<f64> = vec![0.0, cap];
        cands.extend(self.left.iter().chain(&self.right).map(|&p| half_life(p)));
        for &p in &self.left {
            for &q in &self.right {
                let c = linf(p, q);
                if c < cap {
                    cands.push(c);
                }
            }
        }
        cands.sort_by(f64::total_cmp);
        cands.dedup();
        let (mut lo, mut hi) = (0, cands.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.feasible(cands[mid]) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        cands[lo]
    }
}

fn essential_distance(a: &mut [f64], b: &mut [f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn bottleneck_distance(d1: &PersistenceDiagram, d2: &PersistenceDiagram) -> f64 {
    let degrees = d1.degree_bound().max(d2.degree_bound());
    let mut worst: f64 = 0.0;
    for s in 0..degrees {
        let ess = essential_distance(&mut d1.essential(s), &mut d2.essential(s));
        worst = worst.max(ess);
        if worst == f64::INFINITY {
            return worst;
        }
        let problem = MatchingProblem { left: d1.finite(s), right: d2.finite(s) };
        worst = worst.max(problem.solve());
    }
    worst
}

/// Bottleneck distance by enumerating every partial injection. Each degree
/// may hold at most `max_points` (itself at most 6) points per diagram.
pub fn bottleneck_bruteforce(d1: &PersistenceDiagram, d2: &PersistenceDiagram, max_points: usize) -> Result<f64> {
    if max_points > 6 {
        return Err(Error::SizeGuard(format!("brute force allows at most 6 points, asked for {max_points}")));
    }
    let degrees = d1.degree_bound().max(d2.degree_bound());
    let mut worst: f64 = 0.0;
    for s in 0..degrees {
        let (a, b) = (d1.degree(s), d2.degree(s));
        if a.len() > max_points || b.len() > max_points {
            return Err(Error::SizeGuard(format!(
                "degree {s} has {} and {} points, limit {max_points}",
                a.len(),
                b.len()
            )));
        }
        let mut used = vec![false; b.len()];
        worst = worst.max(brute(&a, &b, 0, &mut used));
    }
    Ok(worst)
}

/// Cost between two points; essential points only match essential points.
fn pair_cost(p: (f64, f64), q: (f64, f64)) -> f64 {
    match (p.1.is_infinite(), q.1.is_infinite()) {
        (true, true) => (p.0 - q.0).abs(),
        (false, false) => linf(p, q),
        _ => f64::INFINITY,
    }
}

fn diag_cost(p: (f64, f64)) -> f64 {
    if p.1.is_infinite() {
        f64::INFINITY
    } else {
        half_life(p)
    }
}

fn brute(a: &[(f64, f64)], b: &[(f64, f64)], i: usize, used: &mut [bool]) -> f64 {
    if i == a.len() {
        return b.iter().zip(used.iter()).filter(|(_, &u)| !u).map(|(&q, _)| diag_cost(q)).fold(0.0, f64::max);
    }
    let mut best = diag_cost(a[i]).max(brute(a, b, i + 1, used));
    for j in 0..b.len() {
        if used[j] {
            continue;
        }
        let c = pair_cost(a[i], b[j]);
        if c >= best {
            continue;
        }
        used[j] = true;
        best = best.min(c.max(brute(a, b, i + 1, used)));
        used[j] = false;
    }
    best
}

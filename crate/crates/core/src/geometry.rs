//! Distance functions to sampled compact sets, the generalized gradient of
//! the distance function and a probe-grid estimate of the μ-reach.
//!
//! Everything here is a diagnostic: the estimator takes `(μ, R_μ)` as inputs
//! and never calls into this module.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for ties in the closest-point set.
pub const GAMMA_TOLERANCE: f64 = 1e-9;

/// Finite sampling of a compact set `K ⊂ [0,1]^d`.
///
/// `spacing` is the largest gap between neighbouring samples along the
/// sampled set (zero when the set really is finite). It bounds how far the
/// gradient norm of the sampled set can drop below that of the continuum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloudSet {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub spacing: f64,
}

impl PointCloudSet {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_spacing(dim, points, 0.0)
    }

    pub fn with_spacing(dim: usize, points: Vec<Vec<f64>>, spacing: f64) -> Result<Self> {
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Domain("point dimension mismatch".into()));
        }
        if !(spacing >= 0.0) {
            return Err(Error::Domain("sampling spacing must be non-negative".into()));
        }
        Ok(Self { dim, points, spacing })
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `d_K(x)` and the indices of the closest points `Γ_K(x)`.
pub fn distance_function(x: &[f64], k: &PointCloudSet) -> Result<(f64, Vec<usize>)> {
    if k.is_empty() {
        return Err(Error::Domain("distance to an empty set".into()));
    }
    if x.len() != k.dim {
        return Err(Error::Domain("query dimension mismatch".into()));
    }
    let dists: Vec<f64> = k.points.iter().map(|p| dist2(x, p).sqrt()).collect();
    let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = GAMMA_TOLERANCE * min;
    let gamma = (0..dists.len()).filter(|&i| dists[i] - min <= tol).collect();
    Ok((min, gamma))
}

/// Euclidean ball given by center and radius.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    fn contains(&self, p: &[f64]) -> bool {
        dist2(&self.center, p).sqrt() <= self.radius * (1.0 + 1e-10) + 1e-14
    }
}

/// Smallest ball through all of `boundary` (circumscribed in their affine hull).
fn circumball(boundary: &[&[f64]], dim: usize) -> Option<Ball> {
    match boundary.len() {
        0 => None,
        1 => Some(Ball { center: boundary[0].to_vec(), radius: 0.0 }),
        _ => {
            let p0 = boundary[0];
            let vs: Vec<Vec<f64>> = boundary[1..]
                .iter()
                .map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect())
                .collect();
            let m = vs.len();
            // Center = p0 + Σ c_j v_j with 2 (v_i·v_j) c = |v_i|^2.
            let mut a = vec![vec![0.0; m + 1]; m];
            for i in 0..m {
                for j in 0..m {
                    a[i][j] = 2.0 * vs[i].iter().zip(&vs[j]).map(|(x, y)| x * y).sum::<f64>();
                }
                a[i][m] = vs[i].iter().map(|x| x * x).sum();
            }
            let c = solve_dense(a)?;
            let mut center = p0.to_vec();
            for (cj, v) in c.iter().zip(&vs) {
                for t in 0..dim {
                    center[t] += cj * v[t];
                }
            }
            let radius = dist2(&center, p0).sqrt();
            Some(Ball { center, radius })
        }
    }
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_dense(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    let scale = a.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs())).max(1e-300);
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        for row in 0..m {
            if row != col {
                let factor = a[row][col] / a[col][col];
                if factor != 0.0 {
                    for k in col..=m {
                        a[row][k] -= factor * a[col][k];
                    }
                }
            }
        }
    }
    Some((0..m).map(|i| a[i][m] / a[i][i]).collect())
}

fn welzl<'a>(points: &[&'a [f64]], boundary: &mut Vec<&'a [f64]>, dim: usize) -> Option<Ball> {
    if boundary.len() == dim + 1 || points.is_empty() {
        return circumball(boundary, dim);
    }
    let mut ball = circumball(boundary, dim);
    for i in 0..points.len() {
        if ball.as_ref().is_some_and(|b| b.contains(points[i])) {
            continue;
        }
        boundary.push(points[i]);
        let inner = welzl(&points[..i], boundary, dim);
        boundary.pop();
        // Degenerate (affinely dependent) supports can fail to solve; keep
        // the previous ball grown to cover the point in that case.
        ball = match inner {
            Some(b) => Some(b),
            None => ball.map(|b| Ball {
                radius: dist2(&b.center, points[i]).sqrt(),
                center: b.center,
            }),
        };
    }
    ball
}

/// Minimal enclosing ball of a finite point set.
pub fn minimal_enclosing_ball(points: &[&[f64]]) -> Result<Ball> {
    let dim = points.first().map(|p| p.len()).ok_or_else(|| Error::Domain("empty set".into()))?;
    let mut boundary = Vec::with_capacity(dim + 1);
    welzl(points, &mut boundary, dim).ok_or_else(|| Error::Internal("degenerate ball".into()))
}

/// Generalized gradient `∇_K(x) = (x − Θ_K(x)) / d_K(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub distance: f64,
    pub theta: Vec<f64>,
    pub vector: Vec<f64>,
    pub norm: f64,
    pub closest: Vec<usize>,
}

pub fn generalized_gradient(x: &[f64], k: &PointCloudSet) -> Result<Gradient> {
    let (distance, closest) = distance_function(x, k)?;
    if distance == 0.0 {
        return Err(Error::UndefinedGradient);
    }
    let gamma: Vec<&[f64]> = closest.iter().map(|&i| k.points[i].as_slice()).collect();
    let theta = minimal_enclosing_ball(&gamma)?.center;
    let vector: Vec<f64> = x.iter().zip(&theta).map(|(a, b)| (a - b) / distance).collect();
    let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(Gradient { distance, theta, vector, norm, closest })
}

/// Outcome of the probe-grid μ-reach diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MuReachEstimate {
    /// Smallest probe distance at which the gradient norm dropped below μ.
    Drop { radius: f64 },
    /// No probe showed a drop; `probe_max` is the largest probed distance.
    NoDrop { probe_max: f64 },
}

impl MuReachEstimate {
    /// The estimate as a number; `+∞` when no drop was found.
    pub fn radius(&self) -> f64 {
        match self {
            MuReachEstimate::Drop { radius } => *radius,
            MuReachEstimate::NoDrop { .. } => f64::INFINITY,
        }
    }
}

/// Cell centers of a `resolution^d` probe grid over `[0,1]^d`.
pub fn probe_grid(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    let total = resolution.pow(dim as u32);
    (0..total)
        .map(|mut i| {
            let mut p = vec![0.0; dim];
            for slot in p.iter_mut().rev() {
                *slot = ((i % resolution) as f64 + 0.5) / resolution as f64;
                i /= resolution;
            }
            p
        })
        .collect()
}

/// Largest drop of `||∇_K||` that sampling a continuum at `spacing` can cause
/// at distance `r`: two neighbouring samples at distance `r` give norm
/// `sqrt(1 − (spacing/2r)^2)`. Within two spacings of the samples (where
/// corners can produce several equidistant samples) nothing is trusted.
fn sampling_slack(spacing: f64, r: f64) -> f64 {
    if spacing == 0.0 {
        return 0.0;
    }
    let q = spacing / (2.0 * r);
    if q >= 0.25 {
        1.0
    } else {
        1.0 - (1.0 - q * q).sqrt()
    }
}

/// Upper-bound diagnostic for `reach_μ(K)`: the smallest `d_K` over probes
/// whose generalized-gradient norm is below `μ` (less the sampling slack).
///
/// The answer depends on `probe_resolution` and on how densely `K` is
/// sampled; it does not converge to the μ-reach in any proven sense.
pub fn estimate_mu_reach(k: &PointCloudSet, mu: f64, probe_resolution: usize) -> Result<MuReachEstimate> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Domain(format!("mu must lie in (0,1], got {mu}")));
    }
    if k.is_empty() || probe_resolution == 0 {
        return Err(Error::Domain("degenerate set or probe grid".into()));
    }
    let probes = probe_grid(k.dim, probe_resolution);
    let results: Vec<(f64, bool)> = probes
        .par_iter()
        .filter_map(|x| {
            let g = generalized_gradient(x, k).ok()?;
            let drop = g.norm < mu - sampling_slack(k.spacing, g.distance) - GAMMA_TOLERANCE;
            Some((g.distance, drop))
        })
        .collect();
    let drop = results.iter().filter(|r| r.1).map(|r| r.0).fold(f64::INFINITY, f64::min);
    if drop.is_finite() {
        Ok(MuReachEstimate::Drop { radius: drop })
    } else {
        let probe_max = results.iter().map(|r| r.0).fold(0.0, f64::max);
        Ok(MuReachEstimate::NoDrop { probe_max })
    }
}

/// Result of checking `d_{∂B(K,r)}(x) <= (r − d_K(x))/μ` on a probe grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetLemmaReport {
    pub probes_checked: usize,
    pub boundary_probes: usize,
    /// Largest `d_∂(x) − (r − d_K(x))/μ` seen.
    pub max_excess: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Numerical check of the offset-boundary inequality for sets of positive
/// μ-reach, at probe tolerance `2/probe_resolution`. The offset `B̄(K,r)`
/// must stay inside the unit cube for the boundary detection to be faithful.
pub fn offset_lemma_check(k: &PointCloudSet, mu: f64, r: f64, probe_resolution: usize) -> Result<OffsetLemmaReport> {
    if k.is_empty() {
        return Err(Error::Domain("empty set".into()));
    }
    let res = probe_resolution;
    let probes = probe_grid(k.dim, res);
    let dk: Vec<f64> = probes
        .par_iter()
        .map(|x| distance_function(x, k).map(|(d, _)| d))
        .collect::<Result<_>>()?;
    let dim = k.dim;
    let neighbours = |i: usize| -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * dim);
        let mut stride = 1;
        for _ in 0..dim {
            let c = (i / stride) % res;
            if c > 0 {
                out.push(i - stride);
            }
            if c + 1 < res {
                out.push(i + stride);
            }
            stride *= res;
        }
        out
    };
    // Boundary of the offset: inside probes adjacent to outside probes.
    let boundary: Vec<&[f64]> = (0..probes.len())
        .filter(|&i| dk[i] <= r && neighbours(i).iter().any(|&j| dk[j] > r))
        .map(|i| probes[i].as_slice())
        .collect();
    let inside: Vec<usize> = (0..probes.len()).filter(|&i| dk[i] > 0.0 && dk[i] <= r).collect();
    let max_excess = inside
        .par_iter()
        .map(|&i| {
            let db = boundary
                .iter()
                .map(|b| dist2(b, &probes[i]))
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            db - (r - dk[i]) / mu
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let tolerance = 2.0 / res as f64;
    Ok(OffsetLemmaReport {
        probes_checked: inside.len(),
        boundary_probes: boundary.len(),
        max_excess,
        tolerance,
        passed: boundary.is_empty() || max_excess <= tolerance,
    })
}

/// Samples of the segment `a → b` at spacing at most `step`.
pub fn sample_segment(a: &[f64], b: &[f64], step: f64) -> Vec<Vec<f64>> {
    let len = dist2(a, b).sqrt();
    let count = (len / step).ceil().max(1.0) as usize;
    (0..=count)
        .map(|i| {
            let t = i as f64 / count as f64;
            a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
        })
        .collect()
}

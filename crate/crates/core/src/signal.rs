//! Piecewise-constant signals on `[0,1]^d`, their cube integrals, the
//! ground-truth diagram, and a check of the regularity assumptions.
//!
//! A signal is an ordered list of open regions painted on a background
//! level. A point takes the level of the first region containing it; on
//! boundaries the minimum of the adjacent levels is used (lower
//! semicontinuity).

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bottleneck::bottleneck_distance;
use crate::complex::persistence_diagram;
use crate::diagram::PersistenceDiagram;
use crate::error::{Error, Result};
use crate::estimator::RegularityParams;
use crate::geometry::{estimate_mu_reach, MuReachEstimate, PointCloudSet};
use crate::grid::{GridFunction, GridFunctionJson, GridSpec};

/// Offset used to look at the regions around a boundary point.
const PROBE_EPS: f64 = 1e-9;
/// Breakpoints closer than this to a cube face are snapped onto it.
const SNAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionKind {
    /// Open box; faces lying on the domain boundary are pushed outward.
    AxisBox { lo: Vec<f64>, hi: Vec<f64> },
    Disk { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
    /// Union of open half-spaces `{x : normal·x < offset}`.
    HalfplaneUnion { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
    /// Four arms of width `width` along the square `[lo,hi]^2`; the left arm
    /// stops `gap` short of the bottom arm, leaving the two corner-adjacent.
    CrossWithCorners { lo: f64, hi: f64, width: f64, gap: f64 },
    /// Interior of a union of cells of an `n^d` grid (row-major flat indices).
    LabelGrid { n: usize, cells: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub kind: RegionKind,
    pub level: f64,
}

fn open_box_contains(lo: &[f64], hi: &[f64], x: &[f64]) -> bool {
    x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&l, &h))| {
        let l = if l <= 0.0 { f64::NEG_INFINITY } else { l };
        let h = if h >= 1.0 { f64::INFINITY } else { h };
        l < v && v < h
    })
}

fn cross_boxes(lo: f64, hi: f64, w: f64, g: f64) -> [([f64; 2], [f64; 2]); 4] {
    [
        ([lo + w, lo], [hi, lo + w]),
        ([hi - w, lo], [hi, hi]),
        ([lo, hi - w], [hi, hi]),
        ([lo, lo + w + g], [lo + w, hi]),
    ]
}

fn norm_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl RegionKind {
    fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(format!("{m} in {self:?}")));
        match self {
            RegionKind::AxisBox { lo, hi } => {
                if lo.len() != d || hi.len() != d {
                    return bad("box dimension mismatch");
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
                    return bad("empty box");
                }
            }
            RegionKind::Disk { center, radius } => {
                if center.len() != d || !(*radius > 0.0) {
                    return bad("bad disk");
                }
            }
            RegionKind::Annulus { center, inner, outer } => {
                if center.len() != d || !(*inner > 0.0) || !(outer > inner) {
                    return bad("bad annulus");
                }
            }
            RegionKind::HalfplaneUnion { normals, offsets } => {
                if normals.is_empty() || normals.len() != offsets.len() || normals.iter().any(|n| n.len() != d) {
                    return bad("bad half-plane list");
                }
            }
            RegionKind::CrossWithCorners { lo, hi, width, gap } => {
                if d != 2 || !(*width > 0.0) || !(*gap >= 0.0) || !(lo + 2.0 * width + gap < *hi) {
                    return bad("bad cross");
                }
            }
            RegionKind::LabelGrid { n, cells } => {
                let total = n.pow(d as u32);
                if *n == 0 || cells.is_empty() || cells.iter().any(|&c| c >= total) {
                    return bad("bad label grid");
                }
            }
        }
        Ok(())
    }

    /// Open-set membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            RegionKind::AxisBox { lo, hi } => open_box_contains(lo, hi, x),
            RegionKind::Disk { center, radius } => norm_dist(x, center) < *radius,
            RegionKind::Annulus { center, inner, outer } => {
                let r = norm_dist(x, center);
                *inner < r && r < *outer
            }
            RegionKind::HalfplaneUnion { normals, offsets } => normals
                .iter()
                .zip(offsets)
                .any(|(nv, &c)| nv.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() < c),
            RegionKind::CrossWithCorners { lo, hi, width, gap } => cross_boxes(*lo, *hi, *width, *gap)
                .iter()
                .any(|(l, h)| open_box_contains(l, h, x)),
            RegionKind::LabelGrid { n, cells } => label_grid_contains(*n, cells, x),
        }
    }

    /// Lower bound on the distance from `x` to the region's boundary.
    pub fn clearance(&self, x: &[f64]) -> f64 {
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let radial = |c: &[f64]| norm(&x.iter().zip(c).map(|(a, b)| a - b).collect::<Vec<_>>());
        match self {
            RegionKind::Disk { center, radius } => (radial(center) - radius).abs(),
            RegionKind::Annulus { center, inner, outer } => {
                let r = radial(center);
                (r - inner).abs().min((r - outer).abs())
            }
            RegionKind::HalfplaneUnion { normals, offsets } => normals
                .iter()
                .zip(offsets)
                .map(|(nv, o)| (nv.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - o).abs() / norm(nv))
                .fold(f64::INFINITY, f64::min),
            _ => (0..x.len())
                .flat_map(|a| self.breakpoints(a).unwrap_or_default().into_iter().map(move |b| (x[a] - b).abs()))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Coordinates along `axis` where membership can change, when the
    /// region is a union of axis-aligned boxes.
    pub fn breakpoints(&self, axis: usize) -> Option<Vec<f64>> {
        match self {
            RegionKind::AxisBox { lo, hi } => Some(vec![lo[axis], hi[axis]]),
            RegionKind::CrossWithCorners { lo, hi, width, gap } => Some(
                cross_boxes(*lo, *hi, *width, *gap)
                    .iter()
                    .flat_map(|(l, h)| [l[axis], h[axis]])
                    .collect(),
            ),
            RegionKind::LabelGrid { n, .. } => Some((0..=*n).map(|j| j as f64 / *n as f64).collect()),
            RegionKind::HalfplaneUnion { normals, offsets } => {
                let mut out = Vec::new();
                for (nv, &c) in normals.iter().zip(offsets) {
                    let nonzero: Vec<usize> = (0..nv.len()).filter(|&k| nv[k] != 0.0).collect();
                    if nonzero.len() != 1 {
                        return None;
                    }
                    if nonzero[0] == axis {
                        out.push(c / nv[axis]);
                    }
                }
                Some(out)
            }
            RegionKind::Disk { .. } | RegionKind::Annulus { .. } => None,
        }
    }
}

fn label_grid_contains(n: usize, cells: &[usize], x: &[f64]) -> bool {
    // All cells whose closure contains x must belong to the set.
    let mut ranges = Vec::with_capacity(x.len());
    for &v in x {
        let s = v * n as f64;
        let j = s.round();
        if (s - j).abs() < SNAP * n as f64 && j > 0.0 && j < n as f64 {
            ranges.push((j as usize - 1, j as usize));
        } else {
            let k = (s.floor().max(0.0) as usize).min(n - 1);
            ranges.push((k, k));
        }
    }
    let mut idx = vec![0usize; x.len()];
    loop {
        let mut flat = 0;
        for (k, r) in ranges.iter().enumerate() {
            flat = flat * n + r.0 + idx[k];
        }
        if cells.binary_search(&flat).is_err() {
            return false;
        }
        let mut axis = x.len();
        loop {
            if axis == 0 {
                return true;
            }
            axis -= 1;
            if ranges[axis].0 + idx[axis] < ranges[axis].1 {
                idx[axis] += 1;
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// A piecewise-constant signal with its claimed regularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub name: String,
    pub d: usize,
    /// Paint order: earlier regions win where regions overlap.
    pub regions: Vec<Region>,
    pub background: f64,
    pub regularity: RegularityParams,
    /// Resolution at which the ground-truth diagram is computed.
    pub oracle_n: usize,
}

impl SignalSpec {
    pub fn new(
        name: impl Into<String>,
        d: usize,
        regions: Vec<Region>,
        background: f64,
        regularity: RegularityParams,
        oracle_n: usize,
    ) -> Result<Self> {
        let mut regions = regions;
        for r in &mut regions {
            if let RegionKind::LabelGrid { cells, .. } = &mut r.kind {
                cells.sort_unstable();
                cells.dedup();
            }
        }
        let sig = Self { name: name.into(), d, regions, background, regularity, oracle_n };
        sig.validate()?;
        Ok(sig)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.oracle_n == 0 {
            return Err(Error::Validation("signal needs d >= 1 and oracle_n >= 1".into()));
        }
        if !self.background.is_finite() || self.regions.iter().any(|r| !r.level.is_finite()) {
            return Err(Error::Validation("signal levels must be finite".into()));
        }
        if self.regularity.d != self.d {
            return Err(Error::Validation("regularity dimension differs from signal dimension".into()));
        }
        self.regularity.validate()?;
        for r in &self.regions {
            r.kind.validate(self.d)?;
        }
        Ok(())
    }

    /// Signal given cell by cell on an `n^d` grid (margin 0); one region per
    /// distinct value.
    pub fn from_label_grid(json: &GridFunctionJson, regularity: RegularityParams) -> Result<Self> {
        let f = GridFunction::from_json(json)?;
        let spec = *f.spec();
        if spec.margin != 0 {
            return Err(Error::Validation("label grid must have margin 0".into()));
        }
        let mut by_level: BTreeMap<u64, (f64, Vec<usize>)> = BTreeMap::new();
        for (i, &v) in f.values().iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Validation("label grid values must be finite".into()));
            }
            by_level.entry(v.to_bits()).or_insert((v, Vec::new())).1.push(i);
        }
        let mut levels: Vec<(f64, Vec<usize>)> = by_level.into_values().collect();
        levels.sort_by(|a, b| a.0.total_cmp(&b.0));
        let background = levels.last().map(|l| l.0).unwrap_or(0.0);
        let regions = levels
            .into_iter()
            .map(|(level, cells)| Region {
                name: format!("level {level}"),
                kind: RegionKind::LabelGrid { n: spec.n, cells },
                level,
            })
            .collect();
        Self::new("custom_label_grid", spec.d, regions, background, regularity, spec.n)
    }

    /// Level of the first region whose open set contains `x`, else the background.
    pub fn interior_level(&self, x: &[f64]) -> f64 {
        self.label_of(x).map(|k| self.regions[k].level).unwrap_or(self.background)
    }

    /// Index of the first region containing `x`; `None` for the background.
    pub fn label_of(&self, x: &[f64]) -> Option<usize> {
        self.regions.iter().position(|r| r.kind.contains(x))
    }

    /// Signal value with the boundary convention: the minimum over the
    /// regions met in every direction around `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d || x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Domain(format!("point {x:?} outside [0,1]^{}", self.d)));
        }
        let mut best = f64::INFINITY;
        let mut p = vec![0.0; self.d];
        for code in 0..3usize.pow(self.d as u32) {
            let mut c = code;
            let mut zero = true;
            let mut inside = true;
            for (k, slot) in p.iter_mut().enumerate() {
                let step = (c % 3) as f64 - 1.0;
                c /= 3;
                zero &= step == 0.0;
                *slot = x[k] + PROBE_EPS * step;
                inside &= (0.0..=1.0).contains(slot);
            }
            if zero || !inside {
                continue;
            }
            best = best.min(self.interior_level(&p));
        }
        Ok(best)
    }

    pub fn levels(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.regions.iter().map(|r| r.level).chain([self.background]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn is_axis_aligned(&self) -> bool {
        (0..self.d).all(|a| self.regions.iter().all(|r| r.kind.breakpoints(a).is_some()))
    }

    /// Relative cut positions in `[0,1]` along each axis of a cube: region
    /// breakpoints for axis-aligned signals, a uniform subdivision otherwise.
    fn cube_cuts(&self, spec: &GridSpec, lo: &[f64], subsamples: usize) -> Vec<Vec<f64>> {
        let h = spec.h();
        if self.is_axis_aligned() {
            (0..self.d)
                .map(|a| {
                    let mut c = vec![0.0, 1.0];
                    for r in &self.regions {
                        for b in r.kind.breakpoints(a).unwrap_or_default() {
                            let t = (b - lo[a]) / h;
                            if t > SNAP && t < 1.0 - SNAP {
                                c.push(t);
                            }
                        }
                    }
                    c.sort_by(f64::total_cmp);
                    c.dedup();
                    c
                })
                .collect()
        } else {
            let s = subsamples.max(1);
            vec![(0..=s).map(|j| j as f64 / s as f64).collect(); self.d]
        }
    }

    /// Level of a curved-boundary signal on a cube that no region boundary
    /// comes near, where it is constant.
    fn constant_on_cube(&self, spec: &GridSpec, coords: &[usize]) -> Option<f64> {
        if self.is_axis_aligned() {
            return None;
        }
        let centre = spec.cube_center(coords);
        let half_diagonal = 0.5 * spec.h() * (self.d as f64).sqrt();
        let clear = self.regions.iter().all(|r| r.kind.clearance(&centre) > half_diagonal * (1.0 + 1e-9) + SNAP);
        clear.then(|| self.interior_level(&centre))
    }

    /// Visits every cell of the product of per-axis point lists.
    fn for_each_product(lists: &[Vec<f64>], mut f: impl FnMut(&[usize])) {
        let d = lists.len();
        let mut idx = vec![0usize; d];
        loop {
            f(&idx);
            let mut a = d;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < lists[a].len() {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    /// Mean of the signal over a cube, `+∞` on margin cubes. Exact for
    /// axis-aligned signals, midpoint rule with `subsamples^d` points otherwise.
    pub fn cube_mean(&self, spec: &GridSpec, coords: &[usize], subsamples: usize) -> f64 {
        if !spec.is_interior(coords) {
            return f64::INFINITY;
        }
        if let Some(v) = self.constant_on_cube(spec, coords) {
            return v;
        }
        let h = spec.h();
        let lo = spec.cube_lower_corner(coords);
        let cuts = self.cube_cuts(spec, &lo, subsamples);
        let spans: Vec<Vec<f64>> = cuts.iter().map(|c| c[..c.len() - 1].to_vec()).collect();
        let mut total = 0.0;
        let mut centre = vec![0.0; self.d];
        Self::for_each_product(&spans, |idx| {
            let mut frac = 1.0;
            for a in 0..self.d {
                let (t0, t1) = (cuts[a][idx[a]], cuts[a][idx[a] + 1]);
                frac *= t1 - t0;
                centre[a] = lo[a] + 0.5 * (t0 + t1) * h;
            }
            total += frac * self.interior_level(&centre);
        });
        total
    }

    /// Minimum and supremum of the signal over a closed interior cube
    /// (exact for axis-aligned signals).
    pub fn cube_extremes(&self, spec: &GridSpec, coords: &[usize], subsamples: usize) -> (f64, f64) {
        if let Some(v) = self.constant_on_cube(spec, coords) {
            return (v, v);
        }
        let h = spec.h();
        let lo = spec.cube_lower_corner(coords);
        let cuts = self.cube_cuts(spec, &lo, subsamples);
        // Cut points and the midpoints between them.
        let lattice: Vec<Vec<f64>> = cuts
            .iter()
            .map(|c| {
                let mut v = Vec::with_capacity(2 * c.len());
                for w in c.windows(2) {
                    v.push(w[0]);
                    v.push(0.5 * (w[0] + w[1]));
                }
                v.push(1.0);
                v
            })
            .collect();
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut p = vec![0.0; self.d];
        Self::for_each_product(&lattice, |idx| {
            let mut interior = true;
            for a in 0..self.d {
                p[a] = (lo[a] + lattice[a][idx[a]] * h).clamp(0.0, 1.0);
                interior &= idx[a] % 2 == 1;
            }
            if let Ok(v) = self.evaluate(&p) {
                min = min.min(v);
            }
            if interior {
                max = max.max(self.interior_level(&p));
            }
        });
        (min, max)
    }

    pub fn cube_integral(&self, spec: &GridSpec, coords: &[usize], subsamples: usize) -> f64 {
        self.cube_mean(spec, coords, subsamples) * spec.cube_volume()
    }

    /// Labels at the cell centres of an `n^d` grid: region index, or
    /// `regions.len()` for the background.
    fn sample_labels(&self, n: usize) -> Result<(GridSpec, Vec<usize>)> {
        let spec = GridSpec::new(self.d, n, 0)?;
        let bg = self.regions.len();
        let labels = (0..spec.len())
            .into_par_iter()
            .map(|i| self.label_of(&spec.cube_center(&spec.coords(i))).unwrap_or(bg))
            .collect();
        Ok((spec, labels))
    }

    fn label_level(&self, label: usize) -> f64 {
        self.regions.get(label).map(|r| r.level).unwrap_or(self.background)
    }

    /// Sublevel diagram of the cell-centre sampling at `n`.
    fn sampled_diagram(&self, n: usize) -> Result<PersistenceDiagram> {
        let spec = GridSpec::new(self.d, n, 0)?;
        let values: Result<Vec<f64>> =
            (0..spec.len()).into_par_iter().map(|i| self.evaluate(&spec.cube_center(&spec.coords(i)))).collect();
        persistence_diagram(&GridFunction::new(spec, values?)?)
    }
}

/// Ground-truth diagram, cross-checked against the sampling at twice the resolution.
pub fn true_diagram(sig: &SignalSpec, oracle_n: usize) -> Result<PersistenceDiagram> {
    let coarse = sig.sampled_diagram(oracle_n)?;
    let fine = sig.sampled_diagram(2 * oracle_n)?;
    let gap = bottleneck_distance(&coarse, &fine);
    if gap > 1e-9 {
        return Err(Error::ResolutionTooCoarse(format!(
            "diagrams at n={oracle_n} and n={} differ by {gap}",
            2 * oracle_n
        )));
    }
    Ok(coarse)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetReach {
    pub regions: Vec<String>,
    pub boundary_points: usize,
    /// `None` when no probe showed a drop.
    pub estimate: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub sample_n: usize,
    pub mu: f64,
    pub claimed_r_mu: f64,
    /// Regions that never win a sample cell.
    pub empty_regions: Vec<String>,
    pub coverage_ok: bool,
    pub boundary_samples: usize,
    pub a2_violations: usize,
    pub a2_ok: bool,
    pub subsets: Vec<SubsetReach>,
    pub reach_ok: bool,
    pub passed: bool,
}

/// Checks the regularity assumptions at resolution `sample_n`.
///
/// Boundaries are sampled at the midpoints of faces between cells with
/// different labels (boundaries relative to `[0,1]^d`, so the faces of the
/// unit cube itself are not included). Each union of region boundaries
/// passes when its estimated μ-reach is at least `R_μ − 2/sample_n`.
pub fn validate_assumptions(sig: &SignalSpec, sample_n: usize) -> Result<ValidationReport> {
    let (spec, labels) = sig.sample_labels(sample_n)?;
    let mut present: Vec<usize> = labels.clone();
    present.sort_unstable();
    present.dedup();
    if present.len() > 8 {
        return Err(Error::SubsetExplosion(present.len()));
    }
    let empty_regions: Vec<String> = (0..sig.regions.len())
        .filter(|k| present.binary_search(k).is_err())
        .map(|k| sig.regions[k].name.clone())
        .collect();
    let label_name = |l: usize| sig.regions.get(l).map(|r| r.name.clone()).unwrap_or_else(|| "background".into());

    // Faces between differently labelled neighbours.
    let h = spec.h();
    let mut faces: Vec<(Vec<f64>, usize, usize)> = Vec::new();
    for i in 0..spec.len() {
        let c = spec.coords(i);
        for a in 0..sig.d {
            if c[a] + 1 >= spec.n {
                continue;
            }
            let mut nb = c.clone();
            nb[a] += 1;
            let j = spec.index(&nb);
            if labels[i] != labels[j] {
                let mut mid = spec.cube_center(&c);
                mid[a] += 0.5 * h;
                faces.push((mid, labels[i], labels[j]));
            }
        }
    }
    let mut a2_violations = 0;
    for (mid, a, b) in &faces {
        let expect = sig.label_level(*a).min(sig.label_level(*b));
        if sig.evaluate(mid)? != expect {
            a2_violations += 1;
        }
    }

    let spacing = if sig.d == 1 { 0.0 } else { h };
    let r_mu = sig.regularity.r_mu;
    let mu = sig.regularity.mu;
    let mut subsets = Vec::new();
    for mask in 1u32..(1 << present.len()) {
        let chosen: Vec<usize> = (0..present.len()).filter(|&k| mask >> k & 1 == 1).map(|k| present[k]).collect();
        let pts: Vec<Vec<f64>> = faces
            .iter()
            .filter(|(_, a, b)| chosen.contains(a) || chosen.contains(b))
            .map(|(m, _, _)| m.clone())
            .collect();
        let names = chosen.iter().map(|&l| label_name(l)).collect();
        if pts.is_empty() {
            subsets.push(SubsetReach { regions: names, boundary_points: 0, estimate: None, passed: true });
            continue;
        }
        let cloud = PointCloudSet::with_spacing(sig.d, pts, spacing)?;
        let est = estimate_mu_reach(&cloud, mu, sample_n)?;
        let estimate = match est {
            MuReachEstimate::Drop { radius } => Some(radius),
            MuReachEstimate::NoDrop { .. } => None,
        };
        let passed = est.radius() >= r_mu - 2.0 / sample_n as f64;
        subsets.push(SubsetReach { regions: names, boundary_points: cloud.len(), estimate, passed });
    }
    let coverage_ok = empty_regions.is_empty();
    let a2_ok = a2_violations == 0;
    let reach_ok = subsets.iter().all(|s| s.passed);
    Ok(ValidationReport {
        sample_n,
        mu,
        claimed_r_mu: r_mu,
        empty_regions,
        coverage_ok,
        boundary_samples: faces.len(),
        a2_violations,
        a2_ok,
        subsets,
        reach_ok,
        passed: coverage_ok && a2_ok && reach_ok,
    })
}

// ---------------------------------------------------------------------------
// Catalog

fn params<T: for<'de> Deserialize<'de> + Default>(value: &serde_json::Value) -> Result<T> {
    if value.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(value.clone()).map_err(|e| Error::Validation(format!("signal parameters: {e}")))
}

fn boxed(name: &str, lo: &[f64], hi: &[f64], level: f64) -> Region {
    Region { name: name.into(), kind: RegionKind::AxisBox { lo: lo.to_vec(), hi: hi.to_vec() }, level }
}

fn reg(d: usize, mu: f64, r_mu: f64) -> RegularityParams {
    RegularityParams { mu, r_mu, d }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConstantParams {
    d: usize,
    c: f64,
}

impl Default for ConstantParams {
    fn default() -> Self {
        Self { d: 2, c: 0.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelGridParams {
    grid: GridFunctionJson,
    regularity: RegularityParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CrossParams {
    gap: f64,
    k: f64,
    width: f64,
}

impl Default for CrossParams {
    fn default() -> Self {
        Self { gap: 0.03, k: 10.0, width: 0.1 }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

pub const CATALOG: &[&str] = &[
    "constant",
    "step",
    "staircase",
    "half",
    "stripes",
    "box",
    "quadrant",
    "square_ring",
    "two_boxes",
    "cross",
    "disk",
    "annulus",
    "custom_label_grid",
];

/// Catalog signal by name. Parameters are a JSON object (or null for defaults).
pub fn catalog(name: &str, p: &serde_json::Value) -> Result<SignalSpec> {
    use std::f64::consts::FRAC_1_SQRT_2;
    if !matches!(name, "constant" | "cross" | "custom_label_grid") {
        params::<NoParams>(p)?;
    }
    match name {
        "constant" => {
            let p: ConstantParams = params(p)?;
            SignalSpec::new("constant", p.d, vec![], p.c, reg(p.d, 1.0, 0.5), 8)
        }
        "step" => SignalSpec::new("step", 1, vec![boxed("left", &[0.0], &[0.5], 0.0)], 1.0, reg(1, 1.0, 0.24), 8),
        "staircase" => SignalSpec::new(
            "staircase",
            1,
            vec![
                boxed("first", &[0.0], &[0.25], 1.0),
                boxed("second", &[0.25], &[0.5], 3.0),
                boxed("third", &[0.5], &[0.75], 0.0),
            ],
            2.0,
            reg(1, 1.0, 0.125),
            8,
        ),
        "half" => SignalSpec::new("half", 2, vec![boxed("left", &[0.0, 0.0], &[0.5, 1.0], 0.0)], 1.0, reg(2, 1.0, 0.5), 8),
        "stripes" => SignalSpec::new(
            "stripes",
            2,
            vec![boxed("left", &[0.0, 0.0], &[0.3, 1.0], 0.0), boxed("right", &[0.7, 0.0], &[1.0, 1.0], 1.0)],
            2.0,
            reg(2, 1.0, 0.2),
            10,
        ),
        "box" => SignalSpec::new(
            "box",
            2,
            vec![boxed("box", &[0.25, 0.25], &[0.75, 0.75], 0.0)],
            1.0,
            reg(2, FRAC_1_SQRT_2, 0.25),
            8,
        ),
        "quadrant" => SignalSpec::new(
            "quadrant",
            2,
            vec![boxed("quadrant", &[0.0, 0.0], &[0.5, 0.5], 0.0)],
            1.0,
            reg(2, FRAC_1_SQRT_2, 0.25),
            8,
        ),
        "square_ring" => SignalSpec::new(
            "square_ring",
            2,
            vec![
                boxed("hole", &[0.35, 0.35], &[0.65, 0.65], 1.0),
                boxed("ring", &[0.1, 0.1], &[0.9, 0.9], 0.0),
            ],
            1.0,
            reg(2, FRAC_1_SQRT_2, 0.125),
            20,
        ),
        "two_boxes" => SignalSpec::new(
            "two_boxes",
            2,
            vec![boxed("low", &[0.1, 0.1], &[0.4, 0.4], 0.0), boxed("high", &[0.6, 0.6], &[0.9, 0.9], 0.5)],
            2.0,
            reg(2, FRAC_1_SQRT_2, 0.1),
            10,
        ),
        "cross" => {
            let p: CrossParams = params(p)?;
            let r_mu = if p.gap > 0.0 { (p.width / 2.0).min(p.gap / 2.0) } else { p.width / 2.0 };
            SignalSpec::new(
                "cross",
                2,
                vec![Region {
                    name: "cross".into(),
                    kind: RegionKind::CrossWithCorners { lo: 0.2, hi: 0.8, width: p.width, gap: p.gap },
                    level: 0.0,
                }],
                p.k,
                reg(2, FRAC_1_SQRT_2, r_mu),
                100,
            )
        }
        "disk" => SignalSpec::new(
            "disk",
            2,
            vec![Region { name: "disk".into(), kind: RegionKind::Disk { center: vec![0.5, 0.5], radius: 0.3 }, level: 0.0 }],
            1.0,
            reg(2, 1.0, 0.3),
            64,
        ),
        "annulus" => SignalSpec::new(
            "annulus",
            2,
            vec![Region {
                name: "annulus".into(),
                kind: RegionKind::Annulus { center: vec![0.5, 0.5], inner: 0.15, outer: 0.35 },
                level: 0.0,
            }],
            1.0,
            reg(2, 1.0, 0.1),
            64,
        ),
        "custom_label_grid" => {
            if p.is_null() {
                return Err(Error::Validation("custom_label_grid needs {\"grid\", \"regularity\"} parameters".into()));
            }
            let p: LabelGridParams = serde_json::from_value(p.clone())
                .map_err(|e| Error::Validation(format!("signal parameters: {e}")))?;
            SignalSpec::from_label_grid(&p.grid, p.regularity)
        }
        other => Err(Error::UnknownSignal(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn get(name: &str) -> SignalSpec {
        catalog(name, &serde_json::Value::Null).unwrap()
    }

    #[test]
    fn evaluate_interior_and_boundary() {
        let step = get("step");
        assert_eq!(step.evaluate(&[0.2]).unwrap(), 0.0);
        assert_eq!(step.evaluate(&[0.7]).unwrap(), 1.0);
        assert_eq!(step.evaluate(&[0.5]).unwrap(), 0.0);
        assert_eq!(step.evaluate(&[0.0]).unwrap(), 0.0);
        assert_eq!(step.evaluate(&[1.0]).unwrap(), 1.0);
        assert!(matches!(step.evaluate(&[1.5]), Err(Error::Domain(_))));
        let c = catalog("constant", &json!({"d": 2, "c": 4.0})).unwrap();
        assert_eq!(c.evaluate(&[0.0, 0.3]).unwrap(), 4.0);
    }

    #[test]
    fn staircase_boundary_takes_lower_neighbour() {
        let s = get("staircase");
        assert_eq!(s.evaluate(&[0.25]).unwrap(), 1.0);
        assert_eq!(s.evaluate(&[0.5]).unwrap(), 0.0);
        assert_eq!(s.evaluate(&[0.75]).unwrap(), 0.0);
    }

    #[test]
    fn cube_integrals_are_exact_for_boxes() {
        let step = get("step");
        let spec = GridSpec::new(1, 4, 0).unwrap();
        assert_eq!(step.cube_integral(&spec, &[1], 1), 0.0);
        assert_eq!(step.cube_integral(&spec, &[3], 1), 0.25);
        let spec = GridSpec::new(1, 3, 2).unwrap();
        // Cube [1/3, 2/3] straddles the step at 1/2.
        assert!((step.cube_mean(&spec, &[3], 1) - 0.5).abs() < 1e-12);
        assert_eq!(step.cube_mean(&spec, &[0], 1), f64::INFINITY);
        let b = get("box");
        let spec = GridSpec::new(2, 3, 0).unwrap();
        // Centre cube [1/3,2/3]^2 lies inside the box.
        assert_eq!(b.cube_mean(&spec, &[1, 1], 1), 0.0);
        // Corner cube [0,1/3]^2 overlaps the box on [1/4,1/3]^2.
        let expect = 1.0 - (1.0f64 / 12.0 * 3.0).powi(2);
        assert!((b.cube_mean(&spec, &[0, 0], 1) - expect).abs() < 1e-12);
    }

    #[test]
    fn disk_integral_converges_with_subsampling() {
        let disk = get("disk");
        let spec = GridSpec::new(2, 10, 0).unwrap();
        // Cube [0.2,0.3]x[0.4,0.5] is cut by the circle.
        let coarse = disk.cube_mean(&spec, &[2, 4], 16);
        let fine = disk.cube_mean(&spec, &[2, 4], 32);
        let finer = disk.cube_mean(&spec, &[2, 4], 64);
        assert!(coarse > 0.0 && coarse < 1.0);
        // Midpoint error shrinks roughly like 1/subsamples along the boundary.
        assert!((fine - finer).abs() <= (coarse - fine).abs() + 2.0 / 32.0);
        assert!((fine - finer).abs() < 2.0 / 32.0);
    }

    #[test]
    fn true_diagrams_of_catalog() {
        let inf = f64::INFINITY;
        let c = catalog("constant", &json!({"d": 2, "c": 1.5})).unwrap();
        let dg = true_diagram(&c, c.oracle_n).unwrap();
        assert_eq!(dg.degree(0), vec![(1.5, inf)]);
        assert!(dg.degree(1).is_empty());
        let s = get("staircase");
        assert_eq!(true_diagram(&s, s.oracle_n).unwrap().degree(0), vec![(0.0, inf), (1.0, 3.0)]);
        let st = get("stripes");
        assert_eq!(true_diagram(&st, st.oracle_n).unwrap().degree(0), vec![(0.0, inf), (1.0, 2.0)]);
        let ring = get("square_ring");
        let dg = true_diagram(&ring, ring.oracle_n).unwrap();
        assert_eq!(dg.degree(0), vec![(0.0, inf)]);
        assert_eq!(dg.degree(1), vec![(0.0, 1.0)]);
        let ann = get("annulus");
        let dg = true_diagram(&ann, ann.oracle_n).unwrap();
        assert_eq!(dg.degree(1), vec![(0.0, 1.0)]);
    }

    #[test]
    fn cross_with_gap_has_no_cycle_and_touching_cross_has_one() {
        let open = get("cross");
        let dg = true_diagram(&open, open.oracle_n).unwrap();
        assert!(dg.degree(1).is_empty());
        let closed = catalog("cross", &json!({"gap": 0.0})).unwrap();
        let dg = true_diagram(&closed, closed.oracle_n).unwrap();
        assert_eq!(dg.degree(1), vec![(0.0, 10.0)]);
    }

    #[test]
    fn curved_cubes_away_from_boundaries_match_brute_force() {
        for name in ["disk", "annulus"] {
            let sig = get(name);
            let spec = GridSpec::new(2, 40, 1).unwrap();
            for i in spec.interior_indices() {
                let c = spec.coords(i);
                let lo = spec.cube_lower_corner(&c);
                let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
                for a in 0..16 {
                    for b in 0..16 {
                        let p = [lo[0] + (a as f64 + 0.5) * spec.h() / 16.0, lo[1] + (b as f64 + 0.5) * spec.h() / 16.0];
                        let v = sig.interior_level(&p);
                        sum += v;
                        min = min.min(v);
                        max = max.max(v);
                    }
                }
                assert!((sig.cube_mean(&spec, &c, 16) - sum / 256.0).abs() < 1e-12, "{name} {c:?}");
                let (lo_v, hi_v) = sig.cube_extremes(&spec, &c, 16);
                assert!(lo_v <= min && hi_v >= max, "{name} {c:?}");
            }
        }
    }

    #[test]
    fn too_coarse_oracle_is_reported() {
        let st = get("stripes");
        // At n=2 the two stripes collapse into one cell each side of the middle.
        assert!(matches!(true_diagram(&st, 2), Err(Error::ResolutionTooCoarse(_))));
    }

    #[test]
    fn validation_of_simple_signals() {
        let c = get("constant");
        let r = validate_assumptions(&c, 20).unwrap();
        assert!(r.passed && r.subsets.len() == 1 && r.boundary_samples == 0);
        let half = get("half");
        let r = validate_assumptions(&half, 60).unwrap();
        assert!(r.passed, "{r:?}");
        let cross = get("cross");
        let r = validate_assumptions(&cross, 200).unwrap();
        assert!(r.passed, "{r:?}");
        // Box corners pull the gradient norm down to 1/sqrt(2) right next to the set.
        let bx = get("box");
        let strict = SignalSpec { regularity: reg(2, 1.0, bx.regularity.r_mu), ..bx };
        let r = validate_assumptions(&strict, 100).unwrap();
        assert!(!r.reach_ok, "{r:?}");
    }

    #[test]
    fn label_grid_signal_round_trip() {
        let spec = GridSpec::new(2, 2, 0).unwrap();
        let f = GridFunction::new(spec, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let sig = SignalSpec::from_label_grid(&f.to_json(), reg(2, 1.0, 0.25)).unwrap();
        assert_eq!(sig.evaluate(&[0.25, 0.25]).unwrap(), 0.0);
        assert_eq!(sig.evaluate(&[0.25, 0.75]).unwrap(), 1.0);
        assert_eq!(sig.evaluate(&[0.5, 0.75]).unwrap(), 0.0);
        assert!(sig.is_axis_aligned());
        let via_catalog =
            catalog("custom_label_grid", &json!({"grid": f.to_json(), "regularity": {"mu": 1.0, "r_mu": 0.25, "d": 2}})).unwrap();
        assert_eq!(via_catalog, sig);
        assert!(catalog("custom_label_grid", &serde_json::Value::Null).is_err());
        let dg = true_diagram(&sig, 4).unwrap();
        assert_eq!(dg.degree(0), vec![(0.0, f64::INFINITY)]);
    }

    #[test]
    fn unknown_names_and_parameters_are_rejected() {
        assert!(matches!(catalog("nope", &serde_json::Value::Null), Err(Error::UnknownSignal(_))));
        assert!(catalog("step", &json!({"x": 1})).is_err());
        assert!(catalog("cross", &json!({"gapp": 1})).is_err());
    }
}

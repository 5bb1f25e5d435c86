//! Regular cube grids over `[0,1]^d` padded with margin layers, per-cube
//! functions on them, and Chebyshev thickening.
//!
//! Thickening a union of grid cubes by `k·h` in the ℓ∞ metric adds exactly
//! the cubes within Chebyshev index distance `k`. On cube values this is a
//! windowed minimum, which is what [`min_filter`] computes. The margin lets
//! the thickening spill outside `[0,1]^d` the same way it would in `ℝ^d`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid of `n^d` cubes of side `1/n`, padded by `margin` cubes on each side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub margin: usize,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, margin: usize) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::Domain(format!("grid needs d >= 1 and n >= 1 (got d={d}, n={n})")));
        }
        Ok(Self { d, n, margin })
    }

    /// Cube side length.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Volume of one cube, `h^d`.
    pub fn cube_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    /// Cubes per axis of the extended grid.
    pub fn extent(&self) -> usize {
        self.n + 2 * self.margin
    }

    pub fn len(&self) -> usize {
        self.extent().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn interior_len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Row-major flat index (axis 0 slowest).
    pub fn index(&self, coords: &[usize]) -> usize {
        let e = self.extent();
        coords.iter().fold(0, |acc, &c| acc * e + c)
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let e = self.extent();
        let mut out = vec![0; self.d];
        for slot in out.iter_mut().rev() {
            *slot = index % e;
            index /= e;
        }
        out
    }

    pub fn in_bounds(&self, coords: &[isize]) -> bool {
        let e = self.extent() as isize;
        coords.len() == self.d && coords.iter().all(|&c| c >= 0 && c < e)
    }

    pub fn is_interior(&self, coords: &[usize]) -> bool {
        coords.iter().all(|&c| c >= self.margin && c < self.margin + self.n)
    }

    /// Flat indices of the interior cubes, in row-major order.
    pub fn interior_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.is_interior(&self.coords(i)))
    }

    /// Lower corner of a cube in domain coordinates (may lie outside `[0,1]^d`).
    pub fn cube_lower_corner(&self, coords: &[usize]) -> Vec<f64> {
        let h = self.h();
        coords.iter().map(|&c| (c as f64 - self.margin as f64) * h).collect()
    }

    pub fn cube_center(&self, coords: &[usize]) -> Vec<f64> {
        let h = self.h();
        coords.iter().map(|&c| (c as f64 - self.margin as f64 + 0.5) * h).collect()
    }
}

/// One extended-real value per cube of the extended grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Validation(format!(
                "grid function has {} values, grid needs {}",
                values.len(),
                spec.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.is_nan() || **v == f64::NEG_INFINITY) {
            return Err(Error::Validation(format!("grid values must be finite or +inf, got {v}")));
        }
        Ok(Self { spec, values })
    }

    pub fn filled(spec: GridSpec, value: f64) -> Self {
        Self { spec, values: vec![value; spec.len()] }
    }

    /// Margin cubes at `+∞`, interior cubes from `f(coords)`.
    pub fn from_interior(spec: GridSpec, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let values = (0..spec.len())
            .map(|i| {
                let c = spec.coords(i);
                if spec.is_interior(&c) {
                    f(&c)
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, coords: &[usize]) -> f64 {
        self.values[self.spec.index(coords)]
    }

    pub fn set(&mut self, coords: &[usize], value: f64) {
        let i = self.spec.index(coords);
        self.values[i] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.spec, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Cubes whose value is at most `level`.
    pub fn sublevel(&self, level: f64) -> CubeSet {
        CubeSet {
            spec: self.spec,
            members: (0..self.values.len()).filter(|&i| self.values[i] <= level).collect(),
        }
    }

    pub fn to_json(&self) -> GridFunctionJson {
        GridFunctionJson {
            d: self.spec.d,
            n: self.spec.n,
            margin: self.spec.margin,
            values: self.values.iter().map(|&v| JsonReal::from(v)).collect(),
        }
    }

    pub fn from_json(json: &GridFunctionJson) -> Result<Self> {
        let spec = GridSpec::new(json.d, json.n, json.margin)?;
        let values = json.values.iter().map(JsonReal::to_f64).collect::<Result<Vec<_>>>()?;
        Self::new(spec, values)
    }
}

/// A number or the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonReal {
    Num(f64),
    Str(String),
}

impl From<f64> for JsonReal {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            JsonReal::Str("inf".into())
        } else {
            JsonReal::Num(v)
        }
    }
}

impl JsonReal {
    pub fn to_f64(&self) -> Result<f64> {
        match self {
            JsonReal::Num(v) => Ok(*v),
            JsonReal::Str(s) if s == "inf" || s == "+inf" => Ok(f64::INFINITY),
            JsonReal::Str(s) => Err(Error::Format(format!("expected number or \"inf\", got {s:?}"))),
        }
    }
}

/// Wire form of a [`GridFunction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFunctionJson {
    pub d: usize,
    pub n: usize,
    pub margin: usize,
    pub values: Vec<JsonReal>,
}

/// A set of cubes of the extended grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeSet {
    spec: GridSpec,
    members: BTreeSet<usize>,
}

impl CubeSet {
    pub fn new(spec: GridSpec) -> Self {
        Self { spec, members: BTreeSet::new() }
    }

    pub fn from_coords(spec: GridSpec, coords: &[Vec<usize>]) -> Result<Self> {
        let mut set = Self::new(spec);
        for c in coords {
            set.insert(c)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, coords: &[usize]) -> Result<()> {
        let signed: Vec<isize> = coords.iter().map(|&c| c as isize).collect();
        if !self.spec.in_bounds(&signed) {
            return Err(Error::Bounds(format!("cube {coords:?} outside the extended grid")));
        }
        self.members.insert(self.spec.index(coords));
        Ok(())
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn contains(&self, coords: &[usize]) -> bool {
        self.members.contains(&self.spec.index(coords))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn flat_members(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn coords(&self) -> Vec<Vec<usize>> {
        self.members.iter().map(|&i| self.spec.coords(i)).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self.coords())
    }

    pub fn from_json(spec: GridSpec, value: &serde_json::Value) -> Result<Self> {
        let coords: Vec<Vec<usize>> = serde_json::from_value(value.clone())?;
        Self::from_coords(spec, &coords)
    }
}

/// Windowed minimum over the Chebyshev ball of index radius `radius`.
///
/// `{min_filter(f, r) <= λ}` is the thickening of `{f <= λ}` by `r·h`.
pub fn min_filter(f: &GridFunction, radius: usize) -> Result<GridFunction> {
    let spec = *f.spec();
    if radius > spec.margin {
        return Err(Error::Bounds(format!(
            "min_filter radius {radius} exceeds grid margin {}",
            spec.margin
        )));
    }
    let mut values = f.values.clone();
    if radius == 0 {
        return GridFunction::new(spec, values);
    }
    let e = spec.extent();
    let mut line = vec![0.0; e];
    // The Chebyshev ball is a product of intervals, so filter one axis at a time.
    for axis in 0..spec.d {
        let stride = e.pow((spec.d - 1 - axis) as u32);
        for start in 0..spec.len() {
            if (start / stride) % e != 0 {
                continue;
            }
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = values[start + k * stride];
            }
            for k in 0..e {
                let lo = k.saturating_sub(radius);
                let hi = (k + radius).min(e - 1);
                let m = line[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min);
                values[start + k * stride] = m;
            }
        }
    }
    GridFunction::new(spec, values)
}

/// All cubes within Chebyshev index distance `radius` of a member.
pub fn thicken(s: &CubeSet, radius: usize) -> Result<CubeSet> {
    let spec = *s.spec();
    if radius > spec.margin {
        return Err(Error::Bounds(format!(
            "thicken radius {radius} exceeds grid margin {}",
            spec.margin
        )));
    }
    let e = spec.extent();
    let mut out = CubeSet::new(spec);
    for c in s.coords() {
        if c.iter().any(|&x| x < radius || x + radius >= e) {
            return Err(Error::Bounds(format!(
                "thickening cube {c:?} by {radius} leaves the extended grid"
            )));
        }
        let side = 2 * radius + 1;
        for offset in 0..side.pow(spec.d as u32) {
            let mut coords = c.clone();
            let mut o = offset;
            for slot in coords.iter_mut() {
                *slot = *slot + (o % side) - radius;
                o /= side;
            }
            out.members.insert(spec.index(&coords));
        }
    }
    Ok(out)
}

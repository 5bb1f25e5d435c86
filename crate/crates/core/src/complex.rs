//! Cubical complexes of grid functions and ordinary persistence.
//!
//! Cells live on the doubled grid: a cube with index `c` sits at doubled
//! coordinates `2c+1`, and a cell's dimension is its number of odd
//! coordinates. Faces take the minimum value of their finite cofacing cubes,
//! so the complex at level λ is the closed cube union `{f <= λ}`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::diagram::{DiagramPoint, PersistenceDiagram};
use crate::error::{Error, Result};
use crate::gf2::Reducer;
use crate::grid::{GridFunction, GridSpec};

/// Cell structure shared between filtrations.
#[derive(Debug, Clone)]
pub struct CellComplex {
    d: usize,
    shape: usize,
    ids: Vec<usize>,
    dims: Vec<u8>,
    offsets: Vec<usize>,
    facets: Vec<u32>,
}

impl CellComplex {
    /// Complex spanned by the cells of the doubled grid whose value is finite.
    /// `full` has one value per doubled-grid cell and must already satisfy
    /// the face rule.
    fn from_doubled(d: usize, shape: usize, full: &[f64]) -> Result<Self> {
        let ids: Vec<usize> = (0..full.len()).filter(|&i| full[i].is_finite()).collect();
        if ids.is_empty() {
            return Err(Error::EmptyComplex);
        }
        let mut local = vec![u32::MAX; full.len()];
        for (k, &id) in ids.iter().enumerate() {
            local[id] = k as u32;
        }
        let mut dims = Vec::with_capacity(ids.len());
        let mut offsets = Vec::with_capacity(ids.len() + 1);
        let mut facets = Vec::new();
        offsets.push(0);
        let mut coords = vec![0usize; d];
        for &id in &ids {
            decode(id, shape, &mut coords);
            let mut dim = 0u8;
            let mut stride = 1;
            for axis in (0..d).rev() {
                if coords[axis] % 2 == 1 {
                    dim += 1;
                    for face in [id - stride, id + stride] {
                        let l = local[face];
                        debug_assert!(l != u32::MAX, "face of a finite cell must be finite");
                        facets.push(l);
                    }
                }
                stride *= shape;
            }
            dims.push(dim);
            offsets.push(facets.len());
        }
        Ok(Self { d, shape, ids, dims, offsets, facets })
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self, cell: usize) -> usize {
        self.dims[cell] as usize
    }

    /// Row-major index on the doubled grid.
    pub fn id(&self, cell: usize) -> usize {
        self.ids[cell]
    }

    pub fn doubled_coords(&self, cell: usize) -> Vec<usize> {
        let mut c = vec![0; self.d];
        decode(self.ids[cell], self.shape, &mut c);
        c
    }

    pub fn facets(&self, cell: usize) -> &[u32] {
        &self.facets[self.offsets[cell]..self.offsets[cell + 1]]
    }

    /// Cells of one dimension in id order.
    pub fn cells_of_dim(&self, dim: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&c| self.dims[c] as usize == dim)
    }
}

fn decode(mut id: usize, shape: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = id % shape;
        id /= shape;
    }
}

/// Per-cell values on the full doubled grid: cubes carry `f`, faces the
/// minimum over their cofacing cubes.
pub fn doubled_values(f: &GridFunction) -> (usize, Vec<f64>) {
    let spec: &GridSpec = f.spec();
    let d = spec.d;
    let e = spec.extent();
    let shape = 2 * e + 1;
    let total = shape.pow(d as u32);
    let mut full = vec![f64::INFINITY; total];
    let mut c = vec![0usize; d];
    for (i, &v) in f.values().iter().enumerate() {
        decode(i, e, &mut c);
        let id = c.iter().fold(0, |acc, &x| acc * shape + 2 * x + 1);
        full[id] = v;
    }
    // Separable: along each axis, even positions take the min of both neighbours.
    for axis in 0..d {
        let stride = shape.pow((d - 1 - axis) as u32);
        for id in 0..total {
            let pos = (id / stride) % shape;
            if pos % 2 == 1 {
                continue;
            }
            let mut m = f64::INFINITY;
            if pos > 0 {
                m = m.min(full[id - stride]);
            }
            if pos + 1 < shape {
                m = m.min(full[id + stride]);
            }
            full[id] = m;
        }
    }
    (shape, full)
}

/// A cell complex with a monotone filtration value per cell.
#[derive(Debug, Clone)]
pub struct FiltrationComplex {
    pub complex: Arc<CellComplex>,
    pub values: Vec<f64>,
    order: Vec<u32>,
}

impl FiltrationComplex {
    pub fn new(complex: Arc<CellComplex>, values: Vec<f64>) -> Result<Self> {
        if values.len() != complex.len() {
            return Err(Error::Validation(format!(
                "{} values for {} cells",
                values.len(),
                complex.len()
            )));
        }
        check_monotone(&complex, &values)?;
        let order = filtration_order(&complex, &values);
        Ok(Self { complex, values, order })
    }

    /// Cells sorted by `(value, dimension, id)`.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(crate) fn check_monotone(complex: &CellComplex, values: &[f64]) -> Result<()> {
    for c in 0..complex.len() {
        if values[c].is_nan() {
            return Err(Error::Validation(format!("cell {c} has NaN value")));
        }
        for &f in complex.facets(c) {
            if values[f as usize] > values[c] {
                return Err(Error::Validation(format!(
                    "filtration not monotone: face {f} at {} above cell {c} at {}",
                    values[f as usize], values[c]
                )));
            }
        }
    }
    Ok(())
}

/// Sort key `(value, dim, id)`; local indices increase with id.
pub(crate) fn filtration_order(complex: &CellComplex, values: &[f64]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..complex.len() as u32).collect();
    order.sort_by(|&a, &b| {
        let (a, b) = (a as usize, b as usize);
        values[a]
            .total_cmp(&values[b])
            .then(complex.dims[a].cmp(&complex.dims[b]))
            .then(a.cmp(&b))
    });
    order
}

/// Cubical complex of the closed cube union of `f`.
pub fn build_complex(f: &GridFunction) -> Result<FiltrationComplex> {
    let (shape, full) = doubled_values(f);
    let complex = CellComplex::from_doubled(f.spec().d, shape, &full)?;
    let values = complex.ids.iter().map(|&id| full[id]).collect();
    FiltrationComplex::new(Arc::new(complex), values)
}

/// Complex spanned by the finite cells of `cod`, with the face values of
/// both functions on it.
pub(crate) fn build_shared(dom: &GridFunction, cod: &GridFunction) -> Result<(Arc<CellComplex>, Vec<f64>, Vec<f64>)> {
    if dom.spec() != cod.spec() {
        return Err(Error::Validation("domain and codomain grids differ".into()));
    }
    let (shape, full_cod) = doubled_values(cod);
    let (_, full_dom) = doubled_values(dom);
    let complex = CellComplex::from_doubled(cod.spec().d, shape, &full_cod)?;
    let g_cod = complex.ids.iter().map(|&id| full_cod[id]).collect();
    let g_dom = complex.ids.iter().map(|&id| full_dom[id]).collect();
    Ok((Arc::new(complex), g_dom, g_cod))
}

/// Column-cell to pivot-row-cell map plus the unpaired positive cells.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReductionResult {
    pub pivots: BTreeMap<usize, usize>,
    pub essential: BTreeSet<usize>,
}

/// Reduction with clearing: dimensions from the top down, skipping columns
/// already known to be positive. Pivots equal those of [`reduce_standard`].
pub fn reduce(c: &FiltrationComplex) -> Result<ReductionResult> {
    run_reduction(c, true)
}

pub fn reduce_standard(c: &FiltrationComplex) -> Result<ReductionResult> {
    run_reduction(c, false)
}

fn run_reduction(c: &FiltrationComplex, clearing: bool) -> Result<ReductionResult> {
    check_monotone(&c.complex, &c.values)?;
    let cx = &c.complex;
    let n = cx.len();
    let mut pos = vec![0u32; n];
    for (p, &cell) in c.order.iter().enumerate() {
        pos[cell as usize] = p as u32;
    }
    let mut pivots = BTreeMap::new();
    let mut is_row = vec![false; n];
    let mut negative = vec![false; n];
    for dim in (1..=cx.d).rev() {
        let mut red = Reducer::new(n);
        for &cell in &c.order {
            let cell = cell as usize;
            if cx.dim(cell) != dim || (clearing && is_row[cell]) {
                continue;
            }
            let mut col: Vec<u32> = cx.facets(cell).iter().map(|&f| pos[f as usize]).collect();
            col.sort_unstable();
            if let Some(low) = red.push(col) {
                let row = c.order[low as usize] as usize;
                pivots.insert(cell, row);
                is_row[row] = true;
                negative[cell] = true;
            }
        }
    }
    let essential = (0..n).filter(|&k| !negative[k] && !is_row[k]).collect();
    Ok(ReductionResult { pivots, essential })
}

/// Persistence diagram in degrees `0..d-1`; zero-length pairs dropped.
pub fn diagram(c: &FiltrationComplex, r: &ReductionResult) -> PersistenceDiagram {
    let cx = &c.complex;
    let mut points = Vec::new();
    for (&col, &row) in &r.pivots {
        let (b, d) = (c.values[row], c.values[col]);
        if b < d {
            points.push(DiagramPoint { degree: cx.dim(row), birth: b, death: d });
        }
    }
    for &cell in &r.essential {
        if cx.dim(cell) < cx.d {
            points.push(DiagramPoint { degree: cx.dim(cell), birth: c.values[cell], death: f64::INFINITY });
        }
    }
    PersistenceDiagram::new(points)
}

/// Sublevel persistence diagram of a grid function.
pub fn persistence_diagram(f: &GridFunction) -> Result<PersistenceDiagram> {
    let c = build_complex(f)?;
    let r = reduce(&c)?;
    Ok(diagram(&c, &r))
}

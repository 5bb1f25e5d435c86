//! Image persistence of a nested pair of sublevel filtrations on one cell
//! complex: `λ ↦ Im(H_s(A_λ) → H_s(B_λ))` with `A = {g_dom <= λ}` and
//! `B = {g_cod <= λ}`.
//!
//! The production path is a mixed-order reduction (rows in domain order,
//! columns in codomain order). [`image_rank`] and [`diagram_from_ranks`]
//! compute the same diagram from the rank function by dense elimination and
//! serve as the test oracle.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::complex::{build_shared, check_monotone, filtration_order, CellComplex};
use crate::diagram::{DiagramPoint, PersistenceDiagram};
use crate::error::{Error, Result};
use crate::gf2::{self, BitVec, Reducer};
use crate::grid::GridFunction;

#[derive(Debug, Clone)]
pub struct FiltrationPair {
    pub complex: Arc<CellComplex>,
    pub g_dom: Vec<f64>,
    pub g_cod: Vec<f64>,
}

impl FiltrationPair {
    /// Checks monotonicity of both filtrations and `g_cod <= g_dom`.
    /// `g_dom` may be `+∞` on cells that never enter the domain.
    pub fn new(complex: Arc<CellComplex>, g_dom: Vec<f64>, g_cod: Vec<f64>) -> Result<Self> {
        if g_dom.len() != complex.len() || g_cod.len() != complex.len() {
            return Err(Error::Validation("pair values do not match the complex".into()));
        }
        check_monotone(&complex, &g_dom)?;
        check_monotone(&complex, &g_cod)?;
        if let Some(k) = (0..complex.len()).find(|&k| !(g_cod[k] <= g_dom[k]) || !g_cod[k].is_finite()) {
            return Err(Error::Validation(format!(
                "cell {k}: codomain value {} must be finite and at most the domain value {}",
                g_cod[k], g_dom[k]
            )));
        }
        Ok(Self { complex, g_dom, g_cod })
    }

    /// Pair induced by two grid functions; the complex is the support of `cod`.
    pub fn from_grids(dom: &GridFunction, cod: &GridFunction) -> Result<Self> {
        let (complex, g_dom, g_cod) = build_shared(dom, cod)?;
        Self::new(complex, g_dom, g_cod)
    }

    pub fn ambient_dim(&self) -> usize {
        self.complex.ambient_dim()
    }
}

const NONE: u32 = u32::MAX;

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }
}

/// Ranks of the cells of one dimension under a filtration order.
fn ranks_in(order: &[u32], n: usize) -> Vec<u32> {
    let mut pos = vec![NONE; n];
    for (p, &c) in order.iter().enumerate() {
        pos[c as usize] = p as u32;
    }
    pos
}

/// Cells of dimension `s` that create a class in the domain filtration.
fn domain_positive(p: &FiltrationPair, dom_order: &[u32], s: usize) -> Vec<bool> {
    let cx = &p.complex;
    let n = cx.len();
    let mut positive = vec![false; n];
    let in_domain = |c: usize| p.g_dom[c].is_finite();
    if s == 0 {
        for c in cx.cells_of_dim(0) {
            positive[c] = in_domain(c);
        }
        return positive;
    }
    if s == 1 {
        let mut uf = UnionFind::new(n);
        for &c in dom_order {
            let c = c as usize;
            if cx.dim(c) != 1 || !in_domain(c) {
                continue;
            }
            let f = cx.facets(c);
            let (a, b) = (uf.find(f[0]), uf.find(f[1]));
            if a == b {
                positive[c] = true;
            } else {
                uf.parent[a as usize] = b;
            }
        }
        return positive;
    }
    let pos = ranks_in(dom_order, n);
    let mut red = Reducer::new(n);
    for &c in dom_order {
        let c = c as usize;
        if cx.dim(c) != s || !in_domain(c) {
            continue;
        }
        let mut col: Vec<u32> = cx.facets(c).iter().map(|&f| pos[f as usize]).collect();
        col.sort_unstable();
        positive[c] = red.push(col).is_none();
    }
    positive
}

/// Pivot `(row cell, column cell)` pairs of the mixed-order reduction of the
/// `(s+1)`-boundary matrix.
fn mixed_pivots(p: &FiltrationPair, dom_order: &[u32], cod_order: &[u32], s: usize) -> Vec<(usize, usize)> {
    let cx = &p.complex;
    let n = cx.len();
    let pos = ranks_in(dom_order, n);
    let mut out = Vec::new();
    if s == 0 {
        // Union-find on codomain order; each component remembers its eldest
        // vertex in domain order, and a merging edge kills the younger one.
        let mut uf = UnionFind::new(n);
        let mut eldest: Vec<u32> = (0..n as u32).collect();
        for &c in cod_order {
            let c = c as usize;
            if cx.dim(c) != 1 {
                continue;
            }
            let f = cx.facets(c);
            let (a, b) = (uf.find(f[0]), uf.find(f[1]));
            if a == b {
                continue;
            }
            let (ea, eb) = (eldest[a as usize], eldest[b as usize]);
            let (old, young) = if pos[ea as usize] < pos[eb as usize] { (ea, eb) } else { (eb, ea) };
            out.push((young as usize, c));
            uf.parent[a as usize] = b;
            eldest[b as usize] = old;
        }
        return out;
    }
    let mut red = Reducer::new(n);
    for &c in cod_order {
        let c = c as usize;
        if cx.dim(c) != s + 1 {
            continue;
        }
        let mut col: Vec<u32> = cx.facets(c).iter().map(|&f| pos[f as usize]).collect();
        col.sort_unstable();
        if let Some(low) = red.push(col) {
            out.push((dom_order[low as usize] as usize, c));
        }
    }
    out
}

fn image_degree(p: &FiltrationPair, dom_order: &[u32], cod_order: &[u32], s: usize) -> Vec<DiagramPoint> {
    let positive = domain_positive(p, dom_order, s);
    let mut consumed = vec![false; p.complex.len()];
    let mut points = Vec::new();
    for (row, col) in mixed_pivots(p, dom_order, cod_order, s) {
        consumed[row] = true;
        let (b, d) = (p.g_dom[row], p.g_cod[col]);
        if b < d {
            points.push(DiagramPoint { degree: s, birth: b, death: d });
        }
    }
    for c in p.complex.cells_of_dim(s) {
        if positive[c] && !consumed[c] {
            points.push(DiagramPoint { degree: s, birth: p.g_dom[c], death: f64::INFINITY });
        }
    }
    points
}

/// Diagram of the image module in degrees `0..d-1`, degrees in parallel.
pub fn image_diagram(p: &FiltrationPair) -> Result<PersistenceDiagram> {
    let dom_order = filtration_order(&p.complex, &p.g_dom);
    let cod_order = filtration_order(&p.complex, &p.g_cod);
    let points: Vec<DiagramPoint> = (0..p.ambient_dim())
        .into_par_iter()
        .flat_map_iter(|s| image_degree(p, &dom_order, &cod_order, s))
        .collect();
    Ok(PersistenceDiagram::new(points))
}

/// `rank(H_s(A_b) → H_s(B_d))` by dense elimination.
pub fn image_rank(p: &FiltrationPair, s: usize, b: f64, d: f64) -> Result<usize> {
    if b > d {
        return Err(Error::Domain(format!("image rank needs b <= d, got b={b}, d={d}")));
    }
    let cx = &p.complex;
    let s_cells: Vec<usize> = cx.cells_of_dim(s).collect();
    let mut s_index = vec![usize::MAX; cx.len()];
    for (k, &c) in s_cells.iter().enumerate() {
        s_index[c] = k;
    }
    let lower: Vec<usize> = if s == 0 { Vec::new() } else { cx.cells_of_dim(s - 1).collect() };
    let mut lower_index = vec![usize::MAX; cx.len()];
    for (k, &c) in lower.iter().enumerate() {
        lower_index[c] = k;
    }

    // Cycles of A_b, expressed in the s-cells of A_b, lifted to all s-cells.
    let a_cells: Vec<usize> = s_cells.iter().copied().filter(|&c| p.g_dom[c] <= b).collect();
    let images: Vec<BitVec> = a_cells
        .iter()
        .map(|&c| {
            let mut v = BitVec::zeros(lower.len());
            for &f in cx.facets(c) {
                v.flip(lower_index[f as usize]);
            }
            v
        })
        .collect();
    let cycles: Vec<BitVec> = gf2::nullspace(&images)
        .into_iter()
        .map(|combo| {
            let mut v = BitVec::zeros(s_cells.len());
            for (k, &c) in a_cells.iter().enumerate() {
                if combo.get(k) {
                    v.flip(s_index[c]);
                }
            }
            v
        })
        .collect();
    let boundaries: Vec<BitVec> = cx
        .cells_of_dim(s + 1)
        .filter(|&c| p.g_cod[c] <= d)
        .map(|c| {
            let mut v = BitVec::zeros(s_cells.len());
            for &f in cx.facets(c) {
                v.flip(s_index[f as usize]);
            }
            v
        })
        .collect();
    let rb = gf2::rank(&boundaries);
    let mut all = boundaries;
    all.extend(cycles);
    Ok(gf2::rank(&all) - rb)
}

/// Rank table over the critical values, `r[i][j]` for `i <= j` (1-based,
/// row and column 0 are the zero level below everything).
#[derive(Debug, Clone, Serialize)]
pub struct RankTable {
    pub degree: usize,
    pub levels: Vec<f64>,
    pub ranks: Vec<Vec<usize>>,
}

pub fn rank_table(p: &FiltrationPair, s: usize) -> Result<RankTable> {
    let mut levels: Vec<f64> = p.g_dom.iter().chain(&p.g_cod).copied().filter(|v| v.is_finite()).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let m = levels.len();
    let mut ranks = vec![vec![0usize; m + 1]; m + 1];
    for i in 1..=m {
        for j in i..=m {
            ranks[i][j] = image_rank(p, s, levels[i - 1], levels[j - 1])?;
        }
    }
    Ok(RankTable { degree: s, levels, ranks })
}

/// Diagram of one degree by inclusion–exclusion on the rank function.
pub fn diagram_from_ranks(p: &FiltrationPair, s: usize) -> Result<PersistenceDiagram> {
    let t = rank_table(p, s)?;
    let m = t.levels.len();
    let r = |i: usize, j: usize| t.ranks[i][j] as i64;
    let mut points = Vec::new();
    let mut emit = |mult: i64, birth: f64, death: f64| -> Result<()> {
        if mult < 0 {
            return Err(Error::Internal(format!(
                "negative multiplicity {mult} at ({birth}, {death}) in degree {s}"
            )));
        }
        for _ in 0..mult {
            points.push(DiagramPoint { degree: s, birth, death });
        }
        Ok(())
    };
    for i in 1..=m {
        for j in i + 1..=m {
            let mult = (r(i, j - 1) - r(i, j)) - (r(i - 1, j - 1) - r(i - 1, j));
            emit(mult, t.levels[i - 1], t.levels[j - 1])?;
        }
        emit(r(i, m) - r(i - 1, m), t.levels[i - 1], f64::INFINITY)?;
    }
    Ok(PersistenceDiagram::new(points))
}

/// All degrees `0..d-1` from the rank oracle.
pub fn diagram_from_ranks_all(p: &FiltrationPair) -> Result<PersistenceDiagram> {
    let mut out = PersistenceDiagram::empty();
    for s in 0..p.ambient_dim() {
        out.extend(diagram_from_ranks(p, s)?);
    }
    Ok(out)
}

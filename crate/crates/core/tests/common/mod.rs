#![allow(dead_code)]

use std::sync::Arc;

use persest::complex::build_complex;
use persest::diagram::{DiagramPoint, PersistenceDiagram};
use persest::grid::{GridFunction, GridSpec};
use persest::image::FiltrationPair;
use rand::Rng;

/// Random monotone pair on the full complex of an `n^d` grid. Values are
/// small integers so ties are common; some cells never enter the domain.
pub fn random_pair<R: Rng>(rng: &mut R, d: usize, n: usize) -> FiltrationPair {
    let spec = GridSpec::new(d, n, 0).unwrap();
    let cx = Arc::clone(&build_complex(&GridFunction::filled(spec, 0.0)).unwrap().complex);
    let m = cx.len();
    let mut cod = vec![0.0; m];
    let mut dom = vec![0.0; m];
    for dim in 0..=d {
        for k in cx.cells_of_dim(dim).collect::<Vec<_>>() {
            let floor_cod = cx.facets(k).iter().map(|&f| cod[f as usize]).fold(f64::NEG_INFINITY, f64::max);
            cod[k] = (rng.gen_range(0..5) as f64).max(floor_cod);
            let bump = if rng.gen_bool(0.1) { f64::INFINITY } else { rng.gen_range(0..3) as f64 };
            let floor_dom = cx.facets(k).iter().map(|&f| dom[f as usize]).fold(f64::NEG_INFINITY, f64::max);
            dom[k] = (cod[k] + bump).max(floor_dom);
        }
    }
    FiltrationPair::new(cx, dom, cod).unwrap()
}

/// Random diagram with up to `max_per_degree` points in each of `degrees`
/// degrees, on a coarse lattice so that ties and equal distances occur.
pub fn random_diagram<R: Rng>(rng: &mut R, degrees: usize, max_per_degree: usize) -> PersistenceDiagram {
    let mut pts = Vec::new();
    for degree in 0..degrees {
        for _ in 0..rng.gen_range(0..=max_per_degree) {
            let birth = rng.gen_range(0..12) as f64 * 0.5;
            let death = if rng.gen_bool(0.15) { f64::INFINITY } else { birth + rng.gen_range(1..10) as f64 * 0.25 };
            pts.push(DiagramPoint { degree, birth, death });
        }
    }
    PersistenceDiagram::new(pts)
}

pub fn grid(d: usize, n: usize, values: Vec<f64>) -> GridFunction {
    GridFunction::new(GridSpec::new(d, n, 0).unwrap(), values).unwrap()
}

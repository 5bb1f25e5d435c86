mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use persest::bottleneck::{bottleneck_bruteforce, bottleneck_distance};
use persest::complex::{diagram, doubled_values, persistence_diagram, reduce, FiltrationComplex};
use persest::diagram::{DiagramPoint, PersistenceDiagram};
use persest::grid::{min_filter, GridFunction, GridSpec};
use persest::image::{diagram_from_ranks_all, image_diagram, image_rank, FiltrationPair};
use persest::observation::{normal_at, normals};

use common::{grid, random_diagram, random_pair};

fn pair_from_seed(seed: u64, d: usize, n: usize) -> FiltrationPair {
    random_pair(&mut ChaCha8Rng::seed_from_u64(seed), d, n)
}

fn ordinary(p: &FiltrationPair, values: &[f64]) -> PersistenceDiagram {
    let c = FiltrationComplex::new(Arc::clone(&p.complex), values.to_vec()).unwrap();
    let r = reduce(&c).unwrap();
    diagram(&c, &r)
}

fn small_grid() -> impl Strategy<Value = GridFunction> {
    (1usize..=2).prop_flat_map(|d| {
        let max_n = if d == 1 { 10 } else { 5 };
        (1usize..=max_n).prop_flat_map(move |n: usize| {
            proptest::collection::vec(0i32..6, n.pow(d as u32)).prop_map(move |v| grid(d, n, v.into_iter().map(f64::from).collect()))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn image_reduction_matches_rank_oracle_1d(seed in any::<u64>(), n in 1usize..=8) {
        let p = pair_from_seed(seed, 1, n);
        prop_assert_eq!(image_diagram(&p).unwrap(), diagram_from_ranks_all(&p).unwrap());
    }

    #[test]
    fn image_reduction_matches_rank_oracle_2d(seed in any::<u64>(), n in 1usize..=4) {
        let p = pair_from_seed(seed, 2, n);
        prop_assert_eq!(image_diagram(&p).unwrap(), diagram_from_ranks_all(&p).unwrap());
    }

    #[test]
    fn image_rank_is_monotone_and_bounded(seed in any::<u64>(), n in 1usize..=3) {
        let p = pair_from_seed(seed, 2, n);
        let mut levels: Vec<f64> = p.g_cod.iter().chain(&p.g_dom).copied().filter(|v| v.is_finite()).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        for s in 0..2 {
            let cells = p.complex.cells_of_dim(s).count();
            let r = |i: usize, j: usize| image_rank(&p, s, levels[i], levels[j]).unwrap();
            for i in 0..levels.len() {
                for j in i..levels.len() {
                    prop_assert!(r(i, j) <= cells);
                    if j + 1 < levels.len() {
                        prop_assert!(r(i, j) >= r(i, j + 1));
                    }
                    if i + 1 <= j {
                        prop_assert!(r(i, j) <= r(i + 1, j));
                    }
                }
            }
        }
    }

    #[test]
    fn image_diagram_is_sandwiched(seed in any::<u64>(), n in 1usize..=4) {
        let p = pair_from_seed(seed, 2, n);
        prop_assume!(p.g_dom.iter().all(|v| v.is_finite()));
        let gap = p.g_dom.iter().zip(&p.g_cod).map(|(a, b)| a - b).fold(0.0, f64::max);
        let img = image_diagram(&p).unwrap();
        prop_assert!(bottleneck_distance(&img, &ordinary(&p, &p.g_dom)) <= gap);
        prop_assert!(bottleneck_distance(&img, &ordinary(&p, &p.g_cod)) <= gap);
    }

    #[test]
    fn euler_characteristic_matches_cell_count(f in small_grid()) {
        let dg = persistence_diagram(&f).unwrap();
        let (_, cells) = doubled_values(&f);
        let d = f.spec().d;
        let dims: Vec<usize> = {
            let spec = f.spec();
            let shape = 2 * spec.extent() + 1;
            (0..cells.len())
                .map(|i| {
                    let mut k = i;
                    let mut odd = 0;
                    for _ in 0..d {
                        odd += (k % shape) % 2;
                        k /= shape;
                    }
                    odd
                })
                .collect()
        };
        for level in [0.0, 1.0, 2.5, 3.0, 5.0] {
            let chi_cells: i64 = cells
                .iter()
                .zip(&dims)
                .filter(|(v, _)| **v <= level)
                .map(|(_, &k)| if k % 2 == 0 { 1 } else { -1 })
                .sum();
            let chi_dgm: i64 = dg
                .points
                .iter()
                .filter(|p| p.birth <= level && level < p.death)
                .map(|p| if p.degree % 2 == 0 { 1 } else { -1 })
                .sum();
            prop_assert_eq!(chi_cells, chi_dgm);
        }
    }

    #[test]
    fn diagram_ignores_how_ties_are_broken(f in small_grid(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rank: Vec<usize> = (0..f.values().len()).collect();
        rank.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let vals: Vec<f64> = f.values().iter().zip(&rank).map(|(v, &r)| v + 1e-6 * r as f64).collect();
        let g = GridFunction::new(*f.spec(), vals).unwrap();
        let rounded = PersistenceDiagram::new(
            persistence_diagram(&g)
                .unwrap()
                .points
                .into_iter()
                .map(|p| DiagramPoint { degree: p.degree, birth: p.birth.round(), death: p.death.round() })
                .filter(|p| p.birth < p.death)
                .collect(),
        );
        prop_assert_eq!(rounded, persistence_diagram(&f).unwrap());
    }

    #[test]
    fn diagram_follows_increasing_reparametrisation(f in small_grid()) {
        let phi = |x: f64| if x.is_finite() { x * x * x + 2.0 * x } else { x };
        let g = f.map(phi).unwrap();
        let mapped = PersistenceDiagram::new(
            persistence_diagram(&f)
                .unwrap()
                .points
                .into_iter()
                .map(|p| DiagramPoint { degree: p.degree, birth: phi(p.birth), death: phi(p.death) })
                .collect(),
        );
        prop_assert_eq!(persistence_diagram(&g).unwrap(), mapped);
    }

    #[test]
    fn diagrams_are_stable_under_perturbation(f in small_grid(), noise in proptest::collection::vec(-1.0f64..1.0, 100)) {
        let g = GridFunction::new(*f.spec(), f.values().iter().zip(&noise).map(|(v, e)| v + e).collect()).unwrap();
        let sup = f.values().iter().zip(g.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let db = bottleneck_distance(&persistence_diagram(&f).unwrap(), &persistence_diagram(&g).unwrap());
        prop_assert!(db <= sup + 1e-12, "d_b {} > sup {}", db, sup);
    }

    #[test]
    fn bottleneck_is_a_metric_and_matches_bruteforce(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_diagram(&mut rng, 2, 4);
        let b = random_diagram(&mut rng, 2, 4);
        let c = random_diagram(&mut rng, 2, 4);
        let ab = bottleneck_distance(&a, &b);
        prop_assert_eq!(bottleneck_distance(&a, &a), 0.0);
        prop_assert_eq!(ab, bottleneck_distance(&b, &a));
        prop_assert!(ab <= bottleneck_distance(&a, &c) + bottleneck_distance(&c, &b));
        prop_assert_eq!(ab, bottleneck_bruteforce(&a, &b, 6).unwrap());
    }

    #[test]
    fn min_filters_compose(f in small_grid(), a in 0usize..3, b in 0usize..3) {
        let spec = GridSpec::new(f.spec().d, f.spec().n, a + b).unwrap();
        let padded = GridFunction::from_interior(spec, |c| {
            let inner: Vec<usize> = c.iter().map(|x| x - (a + b)).collect();
            f.get(&inner)
        })
        .unwrap();
        let twice = min_filter(&min_filter(&padded, a).unwrap(), b).unwrap();
        prop_assert_eq!(twice, min_filter(&padded, a + b).unwrap());
    }

    #[test]
    fn diagram_csv_round_trips(seed in any::<u64>()) {
        let dg = random_diagram(&mut ChaCha8Rng::seed_from_u64(seed), 3, 5);
        prop_assert_eq!(PersistenceDiagram::read_csv(dg.to_csv_string().as_bytes()).unwrap(), dg);
    }

    #[test]
    fn noise_is_addressable_by_counter(seed in any::<u64>(), rep in 0u64..1000, k in 0usize..300) {
        prop_assert_eq!(normals(seed, rep, k + 1)[k], normal_at(seed, rep, k as u64));
    }
}

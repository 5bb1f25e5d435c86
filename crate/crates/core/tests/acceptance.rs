//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use persest::bench::{loglog_slope, run_monte_carlo, ExperimentConfig, SignalRef};
use persest::bottleneck::{bottleneck_bruteforce, bottleneck_distance};
use persest::complex::{build_complex, persistence_diagram};
use persest::estimator::{certify_run, compute_params, estimate_diagram, plugin_diagram, EstimatorParams};
use persest::geometry::{offset_lemma_check, sample_segment, PointCloudSet};
use persest::grid::{GridFunction, GridSpec};
use persest::image::{diagram_from_ranks, diagram_from_ranks_all, image_diagram, FiltrationPair};
use persest::observation::{concentration_check, sample_observation};
use persest::signal::{catalog, true_diagram, SignalSpec};

use common::{random_diagram, random_pair};

struct Outcome {
    passed: bool,
    detail: String,
}

fn sig(name: &str) -> SignalSpec {
    catalog(name, &serde_json::Value::Null).unwrap()
}

fn noiseless_distance(s: &SignalSpec, params: &EstimatorParams) -> f64 {
    let truth = true_diagram(s, s.oracle_n).unwrap();
    let obs = sample_observation(s, params.grid().unwrap(), 0.0, 0, 0).unwrap();
    bottleneck_distance(&estimate_diagram(&obs, params).unwrap(), &truth)
}

fn noiseless_exactness() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for name in ["half", "stripes", "box", "quadrant", "square_ring", "two_boxes", "step", "staircase"] {
        let s = sig(name);
        let p = compute_params(s.regularity, 0.0).unwrap();
        let db = noiseless_distance(&s, &p);
        worst = worst.max(db);
        parts.push(format!("{name}@n={}:{db}", p.n));
    }
    Outcome { passed: worst <= 1e-12, detail: parts.join(" ") }
}

fn certified_bound() -> Outcome {
    let mut total = 0;
    let mut good = 0;
    let mut failed = Vec::new();
    for name in ["half", "stripes"] {
        let s = sig(name);
        let truth = true_diagram(&s, s.oracle_n).unwrap();
        for theta in [0.05, 0.1] {
            let p = compute_params(s.regularity, theta).unwrap();
            let spec = p.grid().unwrap();
            let certs: Vec<_> = {
                use rayon::prelude::*;
                (0..100u64)
                    .into_par_iter()
                    .map(|rep| {
                        let obs = sample_observation(&s, spec, theta, 2024, rep).unwrap();
                        certify_run(&obs, &p, &truth, &s).unwrap()
                    })
                    .collect()
            };
            for c in certs {
                total += 1;
                if c.db <= 2.0 * c.theta * c.noise_norm + 1e-9 {
                    good += 1;
                } else {
                    failed.push(format!("{name} theta={theta} seed=2024 replicate={}", c.replicate));
                }
            }
        }
    }
    Outcome { passed: good == total, detail: format!("{good}/{total} within 2·theta·||W||_h {failed:?}") }
}

fn config(signal: &str, thetas: Vec<f64>, reps: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        signal: SignalRef { name: signal.into(), params: serde_json::Value::Null },
        regularity: None,
        theta_grid: thetas,
        reps,
        seed,
        n_override: None,
        t_grid: None,
        output_dir: std::env::temp_dir(),
    }
}

fn parametric_rate() -> Outcome {
    let r = run_monte_carlo(&config("staircase", vec![0.05, 0.1, 0.2, 0.4], 200, 31)).unwrap();
    let pts: Vec<(f64, f64)> = r.moments.iter().map(|m| (m.theta, m.mean_db)).collect();
    let slope = loglog_slope(&pts).unwrap_or(f64::NAN);
    Outcome {
        passed: (0.8..=1.2).contains(&slope) && r.failures.is_empty(),
        detail: format!("slope {slope:.4} over (theta, mean d_b) {pts:?}"),
    }
}

fn subgaussian_tail() -> Outcome {
    let reps = 500;
    let r = run_monte_carlo(&config("staircase", vec![0.1], reps, 47)).unwrap();
    let Some((c0, c1)) = r.fit else {
        return Outcome { passed: false, detail: "fit unavailable".into() };
    };
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut ok = c1 > 0.0;
    for row in &r.tail.rows {
        let env = row.envelope;
        let sigma = (env.min(1.0) * (1.0 - env.min(1.0)) / reps as f64).sqrt();
        let allowed = env + 3.0 * sigma;
        worst = worst.max(row.empirical_prob - allowed);
        if row.empirical_prob > allowed {
            ok = false;
        }
    }
    Outcome {
        passed: ok,
        detail: format!("c0={c0:.4} c1={c1:.6}, largest excess over envelope+3σ {worst:.4} on {} t values", r.tail.rows.len()),
    }
}

fn image_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    let mut mismatches = 0;
    for k in 0..300 {
        let (d, n) = if k % 2 == 0 { (1, rng.gen_range(1..=8)) } else { (2, rng.gen_range(1..=4)) };
        let p = random_pair(&mut rng, d, n);
        checked += 1;
        if image_diagram(&p).unwrap() != diagram_from_ranks_all(&p).unwrap() {
            mismatches += 1;
        }
    }
    // Hand examples: identity inclusion, and the two-vertex edge cases.
    let f = GridFunction::new(GridSpec::new(1, 5, 0).unwrap(), vec![0.0, 2.0, 1.0, 3.0, 0.5]).unwrap();
    let id = FiltrationPair::from_grids(&f, &f).unwrap();
    let hand_identity = image_diagram(&id).unwrap() == persistence_diagram(&f).unwrap()
        && diagram_from_ranks_all(&id).unwrap() == persistence_diagram(&f).unwrap();
    let edge = |v_dom: f64, v_cod: f64, e_dom: f64, e_cod: f64| {
        let one = GridFunction::new(GridSpec::new(1, 1, 0).unwrap(), vec![0.0]).unwrap();
        let cx = build_complex(&one).unwrap().complex;
        FiltrationPair::new(cx, vec![0.0, e_dom, v_dom], vec![0.0, e_cod, v_cod]).unwrap()
    };
    let p = edge(0.0, 0.0, 5.0, 1.0);
    let hand_merge = image_diagram(&p).unwrap().degree(0) == vec![(0.0, 1.0), (0.0, f64::INFINITY)]
        && diagram_from_ranks(&p, 0).unwrap().degree(0) == vec![(0.0, 1.0), (0.0, f64::INFINITY)];
    let p = edge(2.0, 1.0, 2.0, 1.0);
    let hand_discard = image_diagram(&p).unwrap().degree(0) == vec![(0.0, f64::INFINITY)]
        && diagram_from_ranks(&p, 0).unwrap().degree(0) == vec![(0.0, f64::INFINITY)];
    Outcome {
        passed: mismatches == 0 && hand_identity && hand_merge && hand_discard,
        detail: format!(
            "{mismatches} mismatches on {checked} random pairs; hand examples {hand_identity} {hand_merge} {hand_discard}"
        ),
    }
}

fn bottleneck_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..500 {
        let a = random_diagram(&mut rng, 2, 5);
        let b = random_diagram(&mut rng, 2, 5);
        if bottleneck_distance(&a, &b) != bottleneck_bruteforce(&a, &b, 5).unwrap() {
            mismatches += 1;
        }
    }
    Outcome { passed: mismatches == 0, detail: format!("{mismatches} mismatches on 500 pairs") }
}

fn plugin_failure() -> Outcome {
    let s = sig("cross");
    let k = s.background;
    let truth = true_diagram(&s, s.oracle_n).unwrap();
    let p = compute_params(s.regularity, 0.0).unwrap().with_n_override(400).unwrap();
    let est = estimate_diagram(&sample_observation(&s, p.grid().unwrap(), 0.0, 0, 0).unwrap(), &p).unwrap();
    let db_est = bottleneck_distance(&est, &truth);
    let coarse = GridSpec::new(2, 10, 0).unwrap();
    let plug = plugin_diagram(&sample_observation(&s, coarse, 0.0, 0, 0).unwrap()).unwrap();
    let db_plug = bottleneck_distance(&plug, &truth);
    Outcome {
        passed: db_plug >= k / 4.0 && db_est == 0.0,
        detail: format!("plug-in d_b {db_plug} (need >= {}), estimator d_b {db_est} at n=400", k / 4.0),
    }
}

fn noise_concentration() -> Outcome {
    let spec = GridSpec::new(1, 10, 0).unwrap();
    let t_grid: Vec<f64> = (0..=40).map(|k| 0.5 * k as f64).collect();
    let rows = concentration_check(spec, 10_000, &t_grid, 8).unwrap();
    let bad: Vec<f64> = rows.iter().filter(|r| r.empirical > r.envelope).map(|r| r.t).collect();
    let tightest = rows
        .iter()
        .filter(|r| r.envelope < 1.0)
        .map(|r| r.empirical / r.envelope)
        .fold(0.0, f64::max);
    Outcome {
        passed: bad.is_empty(),
        detail: format!("violations at t={bad:?}; largest empirical/envelope below 1: {tightest:.3}"),
    }
}

fn offset_lemma() -> Outcome {
    let circle: Vec<Vec<f64>> = (0..2000)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / 2000.0;
            vec![0.5 + 0.3 * a.cos(), 0.5 + 0.3 * a.sin()]
        })
        .collect();
    let corners = [[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]];
    let square: Vec<Vec<f64>> =
        (0..4).flat_map(|i| sample_segment(&corners[i], &corners[(i + 1) % 4], 0.001)).collect();
    let disk = offset_lemma_check(&PointCloudSet::new(2, circle).unwrap(), 1.0, 0.15, 200).unwrap();
    let bx = offset_lemma_check(&PointCloudSet::new(2, square).unwrap(), 0.7, 0.12, 200).unwrap();
    Outcome {
        passed: disk.passed && bx.passed && disk.boundary_probes > 0 && bx.boundary_probes > 0,
        detail: format!(
            "disk boundary: max excess {:.5} (tol {}); box boundary: max excess {:.5} (tol {})",
            disk.max_excess, disk.tolerance, bx.max_excess, bx.tolerance
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("noiseless exactness", noiseless_exactness),
        ("per-run certified bound", certified_bound),
        ("parametric rate", parametric_rate),
        ("sub-Gaussian tail", subgaussian_tail),
        ("image persistence oracle", image_oracle),
        ("bottleneck oracle", bottleneck_oracle),
        ("plug-in failure", plugin_failure),
        ("noise-norm concentration", noise_concentration),
        ("offset lemma", offset_lemma),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let verdict = if out.passed { "PASS" } else { "FAIL" };
        if !out.passed {
            failures += 1;
        }
        println!("criterion {} ({name}): {verdict} [{:.1}s] {}", k + 1, start.elapsed().as_secs_f64(), out.detail);
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

//! Discretised white-noise observations: per-cube integrals
//! `X(H) = ∫_H f + θ·W(H)` with `W(H) ~ N(0, h^d)` independent across cubes.
//!
//! Gaussians come from a counter-based stream: ChaCha8 keyed by the seed,
//! with the replicate index as stream id and four 32-bit words per interior
//! cube (row-major over the `n^d` interior), turned into one normal by
//! Box–Muller. Any cube of any replicate can be regenerated on its own.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridFunctionJson, GridSpec};
use crate::signal::SignalSpec;

/// Midpoint subsamples per axis for signals with curved boundaries.
pub const CURVED_SUBSAMPLES: usize = 16;

fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(a: u64, b: u64) -> f64 {
    let (u1, u2) = (unit_open(a), unit_open(b));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn stream(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Standard normal for one interior cube, addressed directly by its counter.
pub fn normal_at(seed: u64, replicate: u64, cube: u64) -> f64 {
    let mut rng = stream(seed, replicate);
    rng.set_word_pos(4 * cube as u128);
    box_muller(rng.next_u64(), rng.next_u64())
}

/// The first `count` standard normals of a replicate, in counter order.
pub fn normals(seed: u64, replicate: u64, count: usize) -> Vec<f64> {
    let mut rng = stream(seed, replicate);
    (0..count).map(|_| box_muller(rng.next_u64(), rng.next_u64())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub spec: GridSpec,
    pub theta: f64,
    pub signal: String,
    pub seed: u64,
    pub replicate: u64,
    /// `X(H)` on interior cubes, `+∞` on the margin.
    pub x_values: GridFunction,
    /// Realised `W(H)` on interior cubes, `0` on the margin.
    pub w_values: GridFunction,
    /// `∫_H f` on interior cubes, `+∞` on the margin.
    pub integrals: GridFunction,
}

fn interior_offsets(spec: &GridSpec) -> Vec<usize> {
    spec.interior_indices().collect()
}

pub fn sample_observation(sig: &SignalSpec, spec: GridSpec, theta: f64, seed: u64, replicate: u64) -> Result<Observation> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::Domain(format!("theta must be finite and >= 0, got {theta}")));
    }
    if spec.d != sig.d {
        return Err(Error::Validation(format!("grid dimension {} differs from signal dimension {}", spec.d, sig.d)));
    }
    let interior = interior_offsets(&spec);
    let z = normals(seed, replicate, interior.len());
    let scale = spec.cube_volume().sqrt();
    let vol = spec.cube_volume();
    let means: Vec<f64> =
        interior.par_iter().map(|&i| sig.cube_mean(&spec, &spec.coords(i), CURVED_SUBSAMPLES)).collect();
    let mut x = vec![f64::INFINITY; spec.len()];
    let mut w = vec![0.0; spec.len()];
    let mut integ = vec![f64::INFINITY; spec.len()];
    for (k, &i) in interior.iter().enumerate() {
        let wi = scale * z[k];
        integ[i] = means[k] * vol;
        w[i] = wi;
        x[i] = integ[i] + theta * wi;
    }
    Ok(Observation {
        spec,
        theta,
        signal: sig.name.clone(),
        seed,
        replicate,
        x_values: GridFunction::new(spec, x)?,
        w_values: GridFunction::new(spec, w)?,
        integrals: GridFunction::new(spec, integ)?,
    })
}

impl Observation {
    /// Cube averages `a(H) = X(H)/h^d`.
    pub fn averages(&self) -> Result<GridFunction> {
        let vol = self.spec.cube_volume();
        self.x_values.map(|v| v / vol)
    }

    pub fn to_json(&self) -> ObservationJson {
        ObservationJson {
            theta: self.theta,
            seed: self.seed,
            replicate: self.replicate,
            signal: self.signal.clone(),
            x_values: self.x_values.to_json(),
            w_values: self.w_values.to_json(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationJson {
    pub theta: f64,
    pub seed: u64,
    pub replicate: u64,
    pub signal: String,
    pub x_values: GridFunctionJson,
    pub w_values: GridFunctionJson,
}

/// `||W||_h = max |W(H)|/h^d` over interior cubes.
pub fn noise_norm(obs: &Observation) -> f64 {
    let vol = obs.spec.cube_volume();
    obs.spec.interior_indices().map(|i| obs.w_values.values()[i].abs() / vol).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub t: f64,
    pub empirical: f64,
    /// Binomial standard error of `empirical`.
    pub std_err: f64,
    pub envelope: f64,
}

/// Upper-tail envelope `2 h^{-d} exp(−h^d t²/2)`.
pub fn noise_envelope(spec: &GridSpec, t: f64) -> f64 {
    let v = spec.cube_volume();
    2.0 / v * (-v * t * t / 2.0).exp()
}

/// Empirical `P(||W||_h >= t)` over `reps` replicates next to the envelope.
pub fn concentration_check(spec: GridSpec, reps: usize, t_grid: &[f64], seed: u64) -> Result<Vec<ConcentrationRow>> {
    if reps < 100 {
        return Err(Error::Domain(format!("concentration check needs at least 100 replicates, got {reps}")));
    }
    let count = spec.interior_len();
    let inv_scale = 1.0 / spec.cube_volume().sqrt();
    let norms: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|r| normals(seed, r, count).into_iter().map(f64::abs).fold(0.0, f64::max) * inv_scale)
        .collect();
    Ok(t_grid
        .iter()
        .map(|&t| {
            let p = norms.iter().filter(|&&v| v >= t).count() as f64 / reps as f64;
            ConcentrationRow {
                t,
                empirical: p,
                std_err: (p * (1.0 - p) / reps as f64).sqrt(),
                envelope: noise_envelope(&spec, t),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::catalog;

    fn sig(name: &str) -> SignalSpec {
        catalog(name, &serde_json::Value::Null).unwrap()
    }

    #[test]
    fn noiseless_observation_is_the_integral() {
        let s = sig("step");
        let spec = GridSpec::new(1, 4, 2).unwrap();
        let obs = sample_observation(&s, spec, 0.0, 1, 0).unwrap();
        assert_eq!(obs.x_values.values(), obs.integrals.values());
        assert_eq!(obs.x_values.get(&[0]), f64::INFINITY);
        assert_eq!(obs.averages().unwrap().get(&[5]), 1.0);
    }

    #[test]
    fn sampling_is_deterministic_and_reconstructible() {
        let s = sig("box");
        let spec = GridSpec::new(2, 12, 3).unwrap();
        let a = sample_observation(&s, spec, 0.3, 42, 5).unwrap();
        let b = sample_observation(&s, spec, 0.3, 42, 5).unwrap();
        assert_eq!(a, b);
        let c = sample_observation(&s, spec, 0.3, 42, 6).unwrap();
        assert_ne!(a.w_values, c.w_values);
        for i in spec.interior_indices() {
            let back = a.x_values.values()[i] - 0.3 * a.w_values.values()[i];
            assert!((back - a.integrals.values()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn counter_access_matches_the_stream() {
        let seq = normals(9, 3, 50);
        for k in [0usize, 1, 17, 49] {
            assert_eq!(seq[k], normal_at(9, 3, k as u64));
        }
    }

    #[test]
    fn noise_variance_matches_cube_volume() {
        let s = sig("constant");
        let spec = GridSpec::new(2, 100, 0).unwrap();
        let theta = 0.7;
        let obs = sample_observation(&s, spec, theta, 2024, 0).unwrap();
        let diffs: Vec<f64> = obs.x_values.values().iter().zip(obs.integrals.values()).map(|(x, i)| x - i).collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
        let expect = theta * theta * spec.cube_volume();
        assert!((var / expect - 1.0).abs() < 0.05, "var {var} expect {expect}");
    }

    #[test]
    fn noise_norm_direct_cases() {
        let s = sig("step");
        let spec = GridSpec::new(1, 4, 1).unwrap();
        let mut obs = sample_observation(&s, spec, 0.0, 0, 0).unwrap();
        obs.w_values = GridFunction::filled(spec, 0.0);
        assert_eq!(noise_norm(&obs), 0.0);
        obs.w_values.set(&[2], 2.0 * spec.cube_volume());
        assert_eq!(noise_norm(&obs), 2.0);
        // Stored W agrees with the raw normals.
        let obs = sample_observation(&s, spec, 0.5, 3, 1).unwrap();
        let z = normals(3, 1, 4);
        let expect = z.iter().map(|v| v.abs()).fold(0.0, f64::max) / spec.cube_volume().sqrt();
        assert!((noise_norm(&obs) - expect).abs() < 1e-12);
    }

    #[test]
    fn concentration_edges() {
        let spec = GridSpec::new(1, 10, 0).unwrap();
        let rows = concentration_check(spec, 200, &[0.0, 100.0], 1).unwrap();
        assert_eq!(rows[0].empirical, 1.0);
        assert_eq!(rows[1].empirical, 0.0);
        assert!(rows[1].envelope < 1.0 / 200.0);
        assert!(concentration_check(spec, 10, &[0.0], 1).is_err());
    }

    #[test]
    fn negative_theta_is_rejected() {
        let spec = GridSpec::new(1, 4, 0).unwrap();
        assert!(matches!(sample_observation(&sig("step"), spec, -1.0, 0, 0), Err(Error::Domain(_))));
    }
}

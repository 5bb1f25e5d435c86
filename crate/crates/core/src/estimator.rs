//! The two-step estimator: parameter selection, the rough sublevel
//! estimator and its image-persistence regularisation, and per-run
//! certification against the ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bottleneck::bottleneck_distance;
use crate::complex::doubled_values;
use crate::diagram::{DiagramPoint, PersistenceDiagram};
use crate::error::{Error, Result};
use crate::grid::{min_filter, GridFunction, GridSpec};
use crate::image::{image_diagram, FiltrationPair};
use crate::observation::{noise_norm, Observation, CURVED_SUBSAMPLES};
use crate::signal::SignalSpec;

/// Default cap on `n` in [`compute_params`].
pub const DEFAULT_MAX_N: usize = 4096;

/// Ceiling that ignores floating-point excess of up to 1e-9 (relative), so
/// that e.g. `√2/(1/√2)` counts as exactly 2.
pub fn ceil_tol(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityParams {
    pub mu: f64,
    pub r_mu: f64,
    pub d: usize,
}

impl RegularityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::Domain(format!("mu must lie in (0,1], got {}", self.mu)));
        }
        if !(self.r_mu > 0.0) || !self.r_mu.is_finite() {
            return Err(Error::Domain(format!("R_mu must be positive, got {}", self.r_mu)));
        }
        if self.d == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub regularity: RegularityParams,
    pub r1: f64,
    pub r2: f64,
    /// Cubes per axis; `h = 1/n`.
    pub n: usize,
    /// Grid size the formulas prescribe.
    pub theorem_n: usize,
    pub theta: f64,
    /// False when `n` was overridden below `theorem_n`.
    pub on_theorem: bool,
}

impl EstimatorParams {
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn k1(&self) -> usize {
        ceil_tol(self.r1)
    }

    pub fn k2(&self) -> usize {
        ceil_tol(self.r2)
    }

    /// Margin needed for both thickenings.
    pub fn margin(&self) -> usize {
        self.k1() + self.k2()
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.regularity.d, self.n, self.margin())
    }

    /// Same parameters on an `n^d` grid. Grids coarser than prescribed are
    /// flagged off-theorem.
    pub fn with_n_override(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("n override must be positive".into()));
        }
        self.n = n;
        self.on_theorem = n >= self.theorem_n;
        Ok(self)
    }
}

pub fn compute_params(reg: RegularityParams, theta: f64) -> Result<EstimatorParams> {
    compute_params_capped(reg, theta, DEFAULT_MAX_N)
}

pub fn compute_params_capped(reg: RegularityParams, theta: f64, max_n: usize) -> Result<EstimatorParams> {
    reg.validate()?;
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::Domain(format!("theta must be finite and >= 0, got {theta}")));
    }
    let sd = (reg.d as f64).sqrt();
    let r1 = sd / reg.mu;
    let r2 = sd * (1.0 + 2.0 / (reg.mu * reg.mu)) * (sd + ceil_tol(r1) as f64);
    let k2 = ceil_tol(r2);
    // h = R_mu/(2⌈r2⌉) rounded down to 1/n.
    let n_real = 2.0 * k2 as f64 / reg.r_mu;
    if !(n_real <= max_n as f64) {
        return Err(Error::ResourceGuard(format!(
            "mu={} and R_mu={} need n={} cubes per axis, above the cap {max_n}",
            reg.mu,
            reg.r_mu,
            n_real.ceil()
        )));
    }
    let n = ceil_tol(n_real).max(1);
    let h = 1.0 / n as f64;
    if !(h < reg.r_mu * reg.mu / sd) {
        return Err(Error::Internal(format!("h={h} violates h < R_mu·mu/√d")));
    }
    Ok(EstimatorParams { regularity: reg, r1, r2, n, theorem_n: n, theta, on_theorem: true })
}

/// Cube averages and the two thickened filtrations.
#[derive(Debug, Clone)]
pub struct EstimatorFields {
    pub averages: GridFunction,
    pub g_dom: GridFunction,
    pub g_cod: GridFunction,
}

pub fn estimator_fields(obs: &Observation, params: &EstimatorParams) -> Result<EstimatorFields> {
    if obs.spec.n != params.n || obs.spec.d != params.regularity.d {
        return Err(Error::Validation(format!(
            "observation grid (d={}, n={}) does not match parameters (d={}, n={})",
            obs.spec.d, obs.spec.n, params.regularity.d, params.n
        )));
    }
    if obs.spec.margin < params.margin() {
        return Err(Error::Bounds(format!(
            "observation margin {} is below the required {}",
            obs.spec.margin,
            params.margin()
        )));
    }
    let averages = obs.averages()?;
    let g_dom = min_filter(&averages, params.k1())?;
    let g_cod = min_filter(&g_dom, params.k2())?;
    Ok(EstimatorFields { averages, g_dom, g_cod })
}

/// Image-persistence estimate of the diagram in degrees `0..d-1`.
pub fn estimate_diagram(obs: &Observation, params: &EstimatorParams) -> Result<PersistenceDiagram> {
    let fields = estimator_fields(obs, params)?;
    let pair = FiltrationPair::from_grids(&fields.g_dom, &fields.g_cod)?;
    image_diagram(&pair)
}

/// Diagram of the cube averages themselves, with no thickening.
pub fn plugin_diagram(obs: &Observation) -> Result<PersistenceDiagram> {
    crate::complex::persistence_diagram(&obs.averages()?)
}

fn restrict(d: &PersistenceDiagram, degree: usize) -> PersistenceDiagram {
    PersistenceDiagram::new(d.points.iter().copied().filter(|p| p.degree == degree).collect::<Vec<DiagramPoint>>())
}

/// Bottleneck distance per degree `0..dims`.
pub fn distance_per_degree(a: &PersistenceDiagram, b: &PersistenceDiagram, dims: usize) -> Vec<f64> {
    (0..dims).map(|s| bottleneck_distance(&restrict(a, s), &restrict(b, s))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichCheck {
    pub lambda: f64,
    /// `F_{λ−ε}` inside `F̂_λ`, on grid cells of `[0,1]^d`.
    pub lower_ok: bool,
    /// Every cube of `F̂_λ` within the index reach of `F_{λ+ε}` the upper
    /// inclusion allows (a necessary condition at grid resolution).
    pub upper_ok: bool,
    /// Cubes lying in `F_{λ−ε}` have `a(H) <= λ`.
    pub cube_rule_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub signal: String,
    pub seed: u64,
    pub replicate: u64,
    pub theta: f64,
    pub n: usize,
    pub on_theorem: bool,
    pub noise_norm: f64,
    pub bound: f64,
    pub db_per_degree: Vec<f64>,
    pub db: f64,
    pub bound_holds: bool,
    pub essential_ok: bool,
    pub sandwich: Vec<SandwichCheck>,
    /// Off-theorem runs are not failed on `bound_holds` alone.
    pub passed: bool,
    pub notes: Vec<String>,
}

fn essential_count(d: &PersistenceDiagram) -> usize {
    d.essential(0).len()
}

/// Estimates, compares with `truth`, and records the checks. Failures are
/// recorded in the certificate, not returned as errors.
pub fn certify_run(
    obs: &Observation,
    params: &EstimatorParams,
    truth: &PersistenceDiagram,
    sig: &SignalSpec,
) -> Result<Certificate> {
    let fields = estimator_fields(obs, params)?;
    let pair = FiltrationPair::from_grids(&fields.g_dom, &fields.g_cod)?;
    let estimate = image_diagram(&pair)?;
    let d = params.regularity.d;
    let wn = noise_norm(obs);
    let eps = obs.theta * wn;
    let bound = 2.0 * eps;
    let db_per_degree = distance_per_degree(&estimate, truth, d);
    let db = db_per_degree.iter().copied().fold(0.0, f64::max);
    let bound_holds = db_per_degree.iter().all(|&v| v <= bound + 1e-9);
    let mut notes = Vec::new();
    let (ne, nt) = (essential_count(&estimate), essential_count(truth));
    let essential_ok = ne == 1 && nt == 1;
    if !essential_ok {
        notes.push(format!("degree-0 essential classes: estimate {ne}, truth {nt}"));
    }
    if !params.on_theorem {
        notes.push(format!(
            "parameters off-theorem: n={} below prescribed {}; the bound is advisory",
            params.n, params.theorem_n
        ));
    }

    let levels = sig.levels();
    let lo = levels[0] - eps - 0.5;
    let hi = levels[levels.len() - 1] + eps + 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(obs.seed ^ 0x005e_ed0f_ce27);
    rng.set_stream(obs.replicate);
    let ctx = SandwichContext::new(obs, params, sig, &fields)?;
    let mut sandwich = Vec::new();
    for _ in 0..5 {
        let lambda = rng.gen_range(lo..hi);
        sandwich.push(ctx.check(lambda, eps)?);
    }
    let sandwich_ok = sandwich.iter().all(|s| s.lower_ok && s.upper_ok && s.cube_rule_ok);
    if !sandwich_ok {
        notes.push("sandwich spot check failed".into());
    }
    if !bound_holds {
        notes.push(format!("d_b={db} exceeds 2θ||W||_h={bound}"));
    }
    Ok(Certificate {
        signal: sig.name.clone(),
        seed: obs.seed,
        replicate: obs.replicate,
        theta: obs.theta,
        n: params.n,
        on_theorem: params.on_theorem,
        noise_norm: wn,
        bound,
        db_per_degree,
        db,
        bound_holds,
        essential_ok,
        sandwich,
        passed: (bound_holds || !params.on_theorem) && essential_ok && sandwich_ok,
        notes,
    })
}

/// Per-run data for the inclusion spot checks.
struct SandwichContext<'a> {
    spec: GridSpec,
    fields: &'a EstimatorFields,
    /// Signal value at the centre of every doubled-grid cell inside `[0,1]^d`.
    cell_points: Vec<(usize, f64)>,
    dom_faces: Vec<f64>,
    /// Per interior cube: (flat index, min over the closed cube, sup over it).
    cube_range: Vec<(usize, f64, f64)>,
    reach: usize,
}

impl<'a> SandwichContext<'a> {
    fn new(obs: &Observation, params: &EstimatorParams, sig: &SignalSpec, fields: &'a EstimatorFields) -> Result<Self> {
        let spec = obs.spec;
        let (shape, dom_faces) = doubled_values(&fields.g_dom);
        let d = spec.d;
        let m2 = 2 * spec.margin;
        let mut cell_points = Vec::new();
        let mut c = vec![0usize; d];
        let mut x = vec![0.0; d];
        for id in 0..dom_faces.len() {
            let mut rest = id;
            for slot in c.iter_mut().rev() {
                *slot = rest % shape;
                rest /= shape;
            }
            if c.iter().any(|&v| v < m2 || v > m2 + 2 * spec.n) {
                continue;
            }
            for k in 0..d {
                x[k] = (c[k] - m2) as f64 / (2 * spec.n) as f64;
            }
            cell_points.push((id, sig.evaluate(&x)?));
        }
        let cube_range = spec
            .interior_indices()
            .map(|i| {
                let (mn, mx) = sig.cube_extremes(&spec, &spec.coords(i), CURVED_SUBSAMPLES);
                (i, mn, mx)
            })
            .collect();
        let sd = (d as f64).sqrt();
        let k = sd + ceil_tol(sd / params.regularity.mu) as f64;
        let reach = ((k + 0.5).floor() as usize).min(spec.margin);
        Ok(Self { spec, fields, cell_points, dom_faces, cube_range, reach })
    }

    fn check(&self, lambda: f64, eps: f64) -> Result<SandwichCheck> {
        let lower_ok = self
            .cell_points
            .iter()
            .all(|&(id, v)| v > lambda - eps || self.dom_faces[id] <= lambda);
        let mut near = vec![f64::INFINITY; self.spec.len()];
        for &(i, mn, _) in &self.cube_range {
            if mn <= lambda + eps {
                near[i] = 0.0;
            }
        }
        let near = min_filter(&GridFunction::new(self.spec, near)?, self.reach)?;
        let upper_ok = self
            .fields
            .g_dom
            .values()
            .iter()
            .zip(near.values())
            .all(|(&g, &nr)| g > lambda || nr == 0.0);
        let cube_rule_ok = self
            .cube_range
            .iter()
            .all(|&(i, _, mx)| mx > lambda - eps || self.fields.averages.values()[i] <= lambda + 1e-12);
        Ok(SandwichCheck { lambda, lower_ok, upper_ok, cube_rule_ok })
    }
}

//! Monte Carlo experiments: repeated noisy estimation, tail and moment
//! tables, a sub-Gaussian tail fit, and the written report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagram::fmt_real;
use crate::error::{Error, Result};
use crate::estimator::{certify_run, compute_params, Certificate, EstimatorParams, RegularityParams};
use crate::observation::sample_observation;
use crate::signal::{catalog, true_diagram, SignalSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalRef {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

/// Experiment description, read from JSON. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub signal: SignalRef,
    /// Defaults to the catalog's claimed regularity.
    #[serde(default)]
    pub regularity: Option<RegularityParams>,
    pub theta_grid: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub n_override: Option<usize>,
    /// Values of `t` for the tail table; defaults to 25 points up to the
    /// largest observed `d_b/θ`.
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("bench-out")
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Validation("reps must be at least 1".into()));
        }
        if self.theta_grid.is_empty() || self.theta_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::Validation("theta_grid must be a non-empty list of values >= 0".into()));
        }
        if let Some(t) = &self.t_grid {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation("t_grid values must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn signal_spec(&self) -> Result<SignalSpec> {
        let mut sig = catalog(&self.signal.name, &self.signal.params)?;
        if let Some(r) = self.regularity {
            sig.regularity = r;
            sig.validate()?;
        }
        Ok(sig)
    }

    pub fn params_for(&self, sig: &SignalSpec, theta: f64) -> Result<EstimatorParams> {
        let p = compute_params(sig.regularity, theta)?;
        match self.n_override {
            Some(n) => p.with_n_override(n),
            None => Ok(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub theta: f64,
    pub t: f64,
    pub empirical_prob: f64,
    /// Fitted envelope `c0·exp(−c1·t²)`; NaN when no fit is available.
    pub envelope: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TailTable {
    pub rows: Vec<TailRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub theta: f64,
    pub runs: usize,
    pub mean_db: f64,
    pub median_db: f64,
    pub pass_rate: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub theta: f64,
    pub replicate: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub seed: u64,
    pub tail: TailTable,
    pub moments: Vec<MomentRow>,
    pub fit: Option<(f64, f64)>,
    pub certificates: Vec<Certificate>,
    pub failures: Vec<RunFailure>,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Runs every `(θ, replicate)` pair; replicate `k` of the `i`-th θ uses
/// noise stream `i·reps + k` of the master seed.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<MonteCarloResult> {
    cfg.validate()?;
    let sig = cfg.signal_spec()?;
    let truth = true_diagram(&sig, sig.oracle_n)?;
    let params: Vec<EstimatorParams> =
        cfg.theta_grid.iter().map(|&t| cfg.params_for(&sig, t)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..cfg.theta_grid.len())
        .flat_map(|i| (0..cfg.reps as u64).map(move |k| (i, i as u64 * cfg.reps as u64 + k)))
        .collect();
    let outcomes: Vec<(usize, u64, std::result::Result<Certificate, String>)> = jobs
        .par_iter()
        .map(|&(i, rep)| {
            let p = &params[i];
            let run = p
                .grid()
                .and_then(|g| sample_observation(&sig, g, p.theta, cfg.seed, rep))
                .and_then(|obs| certify_run(&obs, p, &truth, &sig));
            (i, rep, run.map_err(|e| e.to_string()))
        })
        .collect();

    let mut certificates = Vec::new();
    let mut failures = Vec::new();
    let mut per_theta: Vec<Vec<&Certificate>> = vec![Vec::new(); cfg.theta_grid.len()];
    for (i, rep, out) in &outcomes {
        match out {
            Ok(c) => certificates.push(c.clone()),
            Err(reason) => failures.push(RunFailure { theta: cfg.theta_grid[*i], replicate: *rep, reason: reason.clone() }),
        }
    }
    for c in &certificates {
        let i = cfg.theta_grid.iter().position(|&t| t == c.theta).unwrap_or(0);
        per_theta[i].push(c);
    }

    let moments: Vec<MomentRow> = cfg
        .theta_grid
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let certs = &per_theta[i];
            let mut dbs: Vec<f64> = certs.iter().map(|c| c.db).collect();
            let runs = dbs.len();
            let mean = if runs == 0 { f64::NAN } else { dbs.iter().sum::<f64>() / runs as f64 };
            let passed = certs.iter().filter(|c| c.passed).count();
            MomentRow {
                theta,
                runs,
                mean_db: mean,
                median_db: median(&mut dbs),
                pass_rate: if runs == 0 { f64::NAN } else { passed as f64 / runs as f64 },
                failures: failures.iter().filter(|f| f.theta == theta).count(),
            }
        })
        .collect();

    let t_grid = match &cfg.t_grid {
        Some(t) => t.clone(),
        None => {
            let tmax = certificates.iter().filter(|c| c.theta > 0.0).map(|c| c.db / c.theta).fold(0.0, f64::max);
            (0..25).map(|k| tmax * k as f64 / 24.0).collect()
        }
    };
    let mut rows = Vec::new();
    for (i, &theta) in cfg.theta_grid.iter().enumerate() {
        if theta == 0.0 {
            continue;
        }
        let certs = &per_theta[i];
        for &t in &t_grid {
            let hits = certs.iter().filter(|c| c.db >= t * theta).count();
            let p = if certs.is_empty() { f64::NAN } else { hits as f64 / certs.len() as f64 };
            rows.push(TailRow { theta, t, empirical_prob: p, envelope: f64::NAN });
        }
    }
    let mut tail = TailTable { rows };
    let fit = fit_subgaussian(&tail).ok();
    if let Some((c0, c1)) = fit {
        for r in &mut tail.rows {
            r.envelope = c0 * (-c1 * r.t * r.t).exp();
        }
    }
    Ok(MonteCarloResult { seed: cfg.seed, tail, moments, fit, certificates, failures })
}

/// Least-squares fit of `log p = log c0 − c1·t²` over rows with `0 < p < 1`.
pub fn fit_subgaussian(table: &TailTable) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.empirical_prob > 0.0 && r.empirical_prob < 1.0)
        .map(|r| (r.t * r.t, r.empirical_prob.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::FitUnavailable(format!("{} usable tail points, need 3", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitUnavailable("all tail points share one t".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let c1 = -slope;
    let c0 = (my - slope * mx).exp();
    if !(c1 > 0.0) {
        return Err(Error::FitUnavailable(format!("fitted c1={c1} is not positive")));
    }
    Ok((c0, c1))
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        fmt_real(v)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Writes `tail.csv`, `moments.csv`, `certificates.json`, `tail.svg` and
/// `moments.svg`. Output depends only on `results`.
pub fn emit_report(results: &MonteCarloResult, output_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(output_dir).map_err(|e| io_err(output_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = output_dir.join(name);
        std::fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        written.push(path);
        Ok(())
    };

    let mut tail = String::from("theta,t,empirical_prob,envelope\n");
    for r in &results.tail.rows {
        let _ = writeln!(tail, "{},{},{},{}", num(r.theta), num(r.t), num(r.empirical_prob), num(r.envelope));
    }
    put("tail.csv", tail)?;

    let mut moments = String::from("theta,runs,mean_db,median_db,pass_rate,failures\n");
    for m in &results.moments {
        let _ = writeln!(
            moments,
            "{},{},{},{},{},{}",
            num(m.theta),
            m.runs,
            num(m.mean_db),
            num(m.median_db),
            num(m.pass_rate),
            m.failures
        );
    }
    put("moments.csv", moments)?;

    let cert_json = serde_json::json!({
        "seed": results.seed,
        "fit": results.fit.map(|(c0, c1)| serde_json::json!({"c0": c0, "c1": c1})),
        "certificates": results.certificates,
        "failures": results.failures,
    });
    put("certificates.json", serde_json::to_string_pretty(&cert_json)? + "\n")?;
    put("tail.svg", tail_svg(results))?;
    put("moments.svg", moments_svg(results))?;
    Ok(written)
}

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for v in it.filter(|v| v.is_finite()) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * PAD)
    }

    fn py(&self, y: f64) -> f64 {
        H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * PAD)
    }
}

fn svg_frame(title: &str, xlabel: &str, ylabel: &str, ax: &Axes) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - PAD,
        W - PAD,
        H - PAD
    );
    let _ = writeln!(s, r#"<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}" stroke="black"/>"#, H - PAD);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, x, y, anchor) in [
        (ax.x0, ax.px(ax.x0), H - PAD + 16.0, "middle"),
        (ax.x1, ax.px(ax.x1), H - PAD + 16.0, "middle"),
        (ax.y0, PAD - 6.0, ax.py(ax.y0), "end"),
        (ax.y1, PAD - 6.0, ax.py(ax.y1), "end"),
    ] {
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="10">{v:.3}</text>"#);
    }
    s
}

fn polyline(points: &[(f64, f64)], ax: &Axes, color: &str, dashed: bool) -> String {
    let pts: Vec<String> = points
        .iter()
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .map(|&(x, y)| format!("{:.2},{:.2}", ax.px(x), ax.py(y)))
        .collect();
    let dash = if dashed { r#" stroke-dasharray="5,3""# } else { "" };
    format!(r#"<polyline fill="none" stroke="{color}"{dash} points="{}"/>"#, pts.join(" ")) + "\n"
}

fn tail_svg(results: &MonteCarloResult) -> String {
    let rows = &results.tail.rows;
    let ax = Axes::fit(rows.iter().map(|r| r.t), [0.0, 1.0].into_iter());
    let mut s = svg_frame("Empirical tail P(d_b >= t theta)", "t", "probability", &ax);
    let mut thetas: Vec<f64> = rows.iter().map(|r| r.theta).collect();
    thetas.dedup();
    for (k, &theta) in thetas.iter().enumerate() {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.theta == theta).map(|r| (r.t, r.empirical_prob)).collect();
        s += &polyline(&pts, &ax, COLORS[k % COLORS.len()], false);
    }
    if results.fit.is_some() {
        let mut env: Vec<(f64, f64)> = rows.iter().map(|r| (r.t, r.envelope.min(1.0))).collect();
        env.sort_by(|a, b| a.0.total_cmp(&b.0));
        env.dedup_by(|a, b| a.0 == b.0);
        s += &polyline(&env, &ax, "black", true);
    }
    s + "</svg>\n"
}

fn moments_svg(results: &MonteCarloResult) -> String {
    let pts: Vec<(f64, f64)> = results
        .moments
        .iter()
        .filter(|m| m.theta > 0.0 && m.mean_db > 0.0)
        .map(|m| (m.theta.log10(), m.mean_db.log10()))
        .collect();
    let ax = Axes::fit(pts.iter().map(|p| p.0), pts.iter().map(|p| p.1));
    let mut s = svg_frame("Mean d_b against theta (log10-log10)", "log10 theta", "log10 mean d_b", &ax);
    s += &polyline(&pts, &ax, COLORS[0], false);
    for &(x, y) in &pts {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, ax.px(x), ax.py(y), COLORS[0]);
    }
    s + "</svg>\n"
}

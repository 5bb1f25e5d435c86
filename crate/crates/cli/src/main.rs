use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use persest::bench::{emit_report, run_monte_carlo, ExperimentConfig};
use persest::bottleneck::bottleneck_distance;
use persest::diagram::PersistenceDiagram;
use persest::estimator::{certify_run, compute_params, estimate_diagram, plugin_diagram};
use persest::geometry::{estimate_mu_reach, MuReachEstimate, PointCloudSet};
use persest::observation::sample_observation;
use persest::signal::{catalog, true_diagram, validate_assumptions, SignalSpec};

/// Persistence diagram estimation for piecewise-constant signals in white noise.
#[derive(Parser)]
#[command(name = "persest", version)]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, env = "PERSEST_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SignalArgs {
    /// Catalog signal name.
    #[arg(long, conflicts_with = "signal_file")]
    signal: Option<String>,
    /// Catalog parameters as a JSON object.
    #[arg(long, default_value = "null")]
    params: String,
    /// A full signal description in JSON instead of a catalog name.
    #[arg(long)]
    signal_file: Option<PathBuf>,
}

impl SignalArgs {
    fn load(&self) -> Result<SignalSpec> {
        if let Some(path) = &self.signal_file {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let sig: SignalSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            sig.validate()?;
            return Ok(sig);
        }
        let Some(name) = &self.signal else { bail!("either --signal or --signal-file is required") };
        let params: serde_json::Value = serde_json::from_str(&self.params).context("--params is not valid JSON")?;
        Ok(catalog(name, &params)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample one observation and estimate its persistence diagram.
    Estimate {
        #[command(flatten)]
        signal: SignalArgs,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        replicate: u64,
        /// Grid size to use instead of the one the regularity prescribes.
        #[arg(long)]
        n_override: Option<usize>,
        /// Report the plug-in diagram of the raw cube averages instead.
        #[arg(long)]
        plugin: bool,
        /// Directory for `diagram.csv`, `certificate.json` and
        /// `observation.json`. Without it the
        /// diagram is printed and no certificate is computed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ground-truth diagram of a signal.
    Truth {
        #[command(flatten)]
        signal: SignalArgs,
        /// Oracle resolution (defaults to the signal's own).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo experiment from a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; replaces the one in the config.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Bottleneck distance between two diagram CSV files.
    Bottleneck { a: PathBuf, b: PathBuf },
    /// μ-reach diagnostic for a point cloud (one point per CSV row).
    MuReach {
        points: PathBuf,
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        /// Sampling spacing of the cloud, used to discount sampling artifacts.
        #[arg(long, default_value_t = 0.0)]
        spacing: f64,
    },
    /// Check a signal's regularity assumptions on a sample grid.
    Validate {
        #[command(flatten)]
        signal: SignalArgs,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read_diagram(path: &Path) -> Result<PersistenceDiagram> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    PersistenceDiagram::read_csv(f).with_context(|| format!("reading {}", path.display()))
}

fn read_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut pts = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row: Vec<f64> = rec.iter().map(str::parse).collect::<std::result::Result<_, _>>()
            .with_context(|| format!("bad coordinate in {}", path.display()))?;
        pts.push(row);
    }
    Ok(pts)
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.command {
        Command::Estimate { signal, theta, seed, replicate, n_override, plugin, out } => {
            let sig = signal.load()?;
            let mut params = compute_params(sig.regularity, theta)?;
            if let Some(n) = n_override {
                params = params.with_n_override(n)?;
            }
            let obs = sample_observation(&sig, params.grid()?, theta, seed, replicate)?;
            let dg = if plugin { plugin_diagram(&obs)? } else { estimate_diagram(&obs, &params)? };
            let Some(dir) = out else {
                write_text(None, &dg.to_csv_string())?;
                return Ok(ExitCode::SUCCESS);
            };
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            write_text(Some(&dir.join("diagram.csv")), &dg.to_csv_string())?;
            write_text(Some(&dir.join("observation.json")), &serde_json::to_string(&obs.to_json())?)?;
            let truth = true_diagram(&sig, sig.oracle_n)?;
            let cert = certify_run(&obs, &params, &truth, &sig)?;
            write_text(Some(&dir.join("certificate.json")), &(serde_json::to_string_pretty(&cert)? + "\n"))?;
            if !cert.passed {
                eprintln!("certificate failed: seed={seed} replicate={replicate}");
            }
        }
        Command::Truth { signal, n, out } => {
            let sig = signal.load()?;
            let dg = true_diagram(&sig, n.unwrap_or(sig.oracle_n))?;
            write_text(out.as_deref(), &dg.to_csv_string())?;
        }
        Command::Bench { config, seed, output_dir } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            cfg.seed = seed;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let results = run_monte_carlo(&cfg)?;
            let files = emit_report(&results, &cfg.output_dir)?;
            for m in &results.moments {
                println!(
                    "theta={} runs={} mean_db={:.6} median_db={:.6} pass_rate={:.3} failures={}",
                    m.theta, m.runs, m.mean_db, m.median_db, m.pass_rate, m.failures
                );
            }
            match results.fit {
                Some((c0, c1)) => println!("tail fit: c0={c0:.6} c1={c1:.6}"),
                None => println!("tail fit: unavailable"),
            }
            for f in &results.failures {
                eprintln!("run failed: theta={} seed={} replicate={}: {}", f.theta, cfg.seed, f.replicate, f.reason);
            }
            for c in results.certificates.iter().filter(|c| !c.passed) {
                eprintln!("certificate failed: theta={} seed={} replicate={}", c.theta, c.seed, c.replicate);
            }
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Bottleneck { a, b } => {
            let d = bottleneck_distance(&read_diagram(&a)?, &read_diagram(&b)?);
            println!("{}", persest::diagram::fmt_real(d));
        }
        Command::MuReach { points, mu, resolution, spacing } => {
            let pts = read_points(&points)?;
            let Some(dim) = pts.first().map(Vec::len) else { bail!("{} holds no points", points.display()) };
            let cloud = PointCloudSet::with_spacing(dim, pts, spacing)?;
            match estimate_mu_reach(&cloud, mu, resolution)? {
                MuReachEstimate::Drop { radius } => println!("drop at distance {radius}"),
                MuReachEstimate::NoDrop { probe_max } => println!("no drop up to distance {probe_max}"),
            }
        }
        Command::Validate { signal, n } => {
            let sig = signal.load()?;
            let report = validate_assumptions(&sig, n)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if !report.passed {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rosenblatt_hurst::harness::config::{filter_list, parse_kv};
use rosenblatt_hurst::harness::figures::{self, FigureConfig, SeAt};
use rosenblatt_hurst::harness::{run_montecarlo, ExperimentConfig};
use rosenblatt_hurst::quadrature::{constants_report, TruncationPolicy, SCHEMA_VERSION};
use rosenblatt_hurst::simulate::{fbm_path, rosenblatt_path, ProcessKind, RngStream, SamplePath};
use rosenblatt_hurst::{estimator, exec, variation, Error, Filter, HurstParam};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rhurst", version, about = "Hurst index estimation for Rosenblatt and fractional Brownian paths")]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat `key = value` file; command line flags win on conflict.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path and write it as `t,value` CSV.
    Simulate {
        #[arg(long)]
        process: Option<String>,
        #[arg(long)]
        hurst: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        oversample: Option<usize>,
        /// Replicate index within the seed.
        #[arg(long)]
        stream: Option<u64>,
    },
    /// Estimate H from a CSV path.
    Estimate {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        filter: Option<String>,
        /// Known H; adds V_N, the adjusted variation and the normalized error.
        #[arg(long)]
        true_hurst: Option<f64>,
    },
    /// Print c, c2 and optionally c1 and c3 as JSON.
    Constants {
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        hurst: Option<f64>,
        /// Comma list drawn from c1, c3.
        #[arg(long)]
        which: Option<String>,
        #[arg(long)]
        kmax: Option<usize>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        rel_tol: Option<f64>,
        /// Sample size entering c3.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Standard-error table over filter order, kind and H (CSV).
    Figures {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        min_order: Option<usize>,
        #[arg(long)]
        max_order: Option<usize>,
        /// Comma list of H values.
        #[arg(long)]
        hurst: Option<String>,
        /// `true` or `estimated`.
        #[arg(long)]
        se_at: Option<String>,
        #[arg(long)]
        oversample: Option<usize>,
    },
    /// Monte Carlo over (H, N, filter) cells; JSON report.
    Montecarlo {
        #[arg(long)]
        process: Option<String>,
        #[arg(long)]
        hurst: Option<String>,
        #[arg(long)]
        n: Option<String>,
        /// Filter strings separated by spaces or `;`.
        #[arg(long)]
        filters: Option<String>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        oversample: Option<usize>,
        #[arg(long)]
        reference_samples: Option<usize>,
        #[arg(long)]
        reference_oversample: Option<usize>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Model(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

/// Config-file values with command line overrides.
struct Settings {
    file: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&PathBuf>) -> Result<Self, Failure> {
        let mut file = BTreeMap::new();
        if let Some(p) = path {
            let text = fs::read_to_string(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?;
            for (k, v) in parse_kv(&text)? {
                file.insert(k.replace('-', "_"), v);
            }
        }
        Ok(Settings { file })
    }

    fn get<T: std::str::FromStr>(&self, key: &str, cli: Option<T>) -> Result<Option<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.file.get(key) {
            Some(v) => v.parse().map(Some).map_err(|e| Failure::Usage(format!("config key {key}: {e}"))),
            None => Ok(None),
        }
    }

    fn or<T: std::str::FromStr>(&self, key: &str, cli: Option<T>, default: T) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key, cli)?.unwrap_or(default))
    }

    fn required<T: std::str::FromStr>(&self, key: &str, cli: Option<T>) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key, cli)?.ok_or_else(|| Failure::Usage(format!("--{} is required", key.replace('_', "-"))))
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<(), Failure> {
    let settings = Settings::load(cli.config.as_ref())?;
    let seed = settings.or("seed", cli.seed, 1u64)?;
    let workers = settings.or("workers", cli.workers, 0usize)?;
    let out = settings.get::<PathBuf>("out", cli.out)?;
    match cli.command {
        Command::Simulate { process, hurst, n, oversample, stream } => {
            let process: ProcessKind = settings.or("process", process, "fbm".to_string())?.parse()?;
            let n = settings.required("n", n)?;
            let stream = RngStream::new(seed, settings.or("stream", stream, 0u64)?);
            let path = match process {
                ProcessKind::Bm => fbm_path(0.5, n, stream)?,
                ProcessKind::Fbm => fbm_path(settings.required("hurst", hurst)?, n, stream)?,
                ProcessKind::Rosenblatt => {
                    let h = HurstParam::new(settings.required("hurst", hurst)?)?;
                    rosenblatt_path(&h, n, settings.or("oversample", oversample, 16usize)?, stream)?
                }
            };
            emit(out.as_ref(), &path.to_csv())
        }
        Command::Estimate { input, filter, true_hurst } => {
            let input: PathBuf = settings.required("input", input)?;
            let text = fs::read_to_string(&input).map_err(|e| Failure::Io(format!("{}: {e}", input.display())))?;
            let path = SamplePath::from_csv(&text)?;
            let filter: Filter = settings.or("filter", filter, "fd:2".to_string())?.parse()?;
            let h_true = settings.get("true_hurst", true_hurst)?;
            let hp = h_true.map(HurstParam::new).transpose()?;
            let var = variation::variation_report(&path.values, &filter, hp.as_ref())?;
            let est = estimator::estimate_hurst(&path.values, &filter)
                .and_then(|r| match h_true {
                    Some(h) => r.with_truth(h, &filter),
                    None => Ok(r),
                });
            let (estimate, error) = match &est {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "variation": var,
                "estimate": estimate,
                "error": error,
            });
            emit(out.as_ref(), &to_json(&report))?;
            est.map(|_| ()).map_err(Failure::Model)
        }
        Command::Constants { filter, hurst, which, kmax, nodes, rel_tol, n } => {
            let filter: Filter = settings.or("filter", filter, "fd:2".to_string())?.parse()?;
            let h = HurstParam::new(settings.required("hurst", hurst)?)?;
            let which = settings.or("which", which, String::new())?;
            let mut with_c1 = false;
            let mut with_c3 = false;
            for w in which.split(',').map(str::trim).filter(|w| !w.is_empty()) {
                match w {
                    "c1" => with_c1 = true,
                    "c3" => with_c3 = true,
                    other => return Err(Failure::Usage(format!("--which accepts c1 and c3, got '{other}'"))),
                }
            }
            let defaults = TruncationPolicy::default();
            let policy = TruncationPolicy {
                k_max: settings.or("kmax", kmax, defaults.k_max)?,
                nodes_per_dim: settings.or("nodes", nodes, defaults.nodes_per_dim)?,
                rel_tol: settings.or("rel_tol", rel_tol, defaults.rel_tol)?,
                execution: exec::execution_for(workers),
                ..defaults
            };
            let c3_n = if with_c3 { Some(settings.or("n", n, 1024usize)?) } else { None };
            let report = exec::with_workers(workers, || constants_report(&filter, &h, with_c1, c3_n, &policy))?;
            emit(out.as_ref(), &to_json(&report))
        }
        Command::Figures { n, min_order, max_order, hurst, se_at, oversample } => {
            let d = FigureConfig::default();
            let hurst = match settings.get::<String>("hurst", hurst)? {
                Some(list) => list
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|e| Failure::Usage(format!("--hurst: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?,
                None => d.hurst.clone(),
            };
            let cfg = FigureConfig {
                n: settings.or("n", n, d.n)?,
                min_order: settings.or("min_order", min_order, d.min_order)?,
                max_order: settings.or("max_order", max_order, d.max_order)?,
                hurst,
                se_at: settings.or("se_at", se_at, "true".to_string())?.parse::<SeAt>()?,
                seed,
                oversample: settings.or("oversample", oversample, d.oversample)?,
                workers,
            };
            let rows = figures::figure_table(&cfg)?;
            emit(out.as_ref(), &figures::rows_to_csv(&rows))
        }
        Command::Montecarlo {
            process,
            hurst,
            n,
            filters,
            replicates,
            oversample,
            reference_samples,
            reference_oversample,
        } => {
            let mut cfg = ExperimentConfig::default();
            for (k, v) in &settings.file {
                if k != "config" {
                    cfg.apply(k, v)?;
                }
            }
            let overrides = [
                ("process", process),
                ("hurst", hurst),
                ("n", n),
                ("filters", filters.map(|f| filter_list(&f).join(" "))),
                ("replicates", replicates.map(|v| v.to_string())),
                ("oversample", oversample.map(|v| v.to_string())),
                ("reference_samples", reference_samples.map(|v| v.to_string())),
                ("reference_oversample", reference_oversample.map(|v| v.to_string())),
            ];
            for (k, v) in overrides {
                if let Some(v) = v {
                    cfg.apply(k, &v)?;
                }
            }
            cfg.seed = seed;
            cfg.workers = workers;
            cfg.out = out.as_ref().map(|p| p.display().to_string());
            let report = run_montecarlo(&cfg)?;
            emit(out.as_ref(), &to_json(&report))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(e @ (Error::DegeneratePath | Error::OutOfRange { .. }))) => {
            eprintln!("rhurst: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Model(e)) => {
            eprintln!("rhurst: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("rhurst: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("rhurst: {msg}");
            ExitCode::from(1)
        }
    }
}

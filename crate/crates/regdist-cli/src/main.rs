//! `regdist`: scenario runner for regularized distance experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod diag;
mod output;
mod scenario;

use clap::{Parser, Subcommand};
use output::{config_hash, Manifest};
use regdist::config::Config;
use regdist::Error;
use scenario::Scenario;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "regdist", version, about = "Regularized distance fields: scenarios and diagnostics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Scenario file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSVs and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "REGDIST_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tree error budget (`engine.target`).
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Kernel spec, e.g. `const:1`, `radial:1+exp(-log(t)^2)`, `radial:table.txt`.
    #[arg(long, global = true)]
    kernel: Option<String>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Ambient dimension.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Plane dimension for orth, exactness, gamma.
    #[arg(long, global = true)]
    d: Option<String>,
    /// Radii for orth (comma-separated).
    #[arg(long, global = true)]
    r: Option<String>,
    #[arg(long, global = true)]
    atoms: Option<usize>,
    #[arg(long, global = true)]
    queries: Option<usize>,
    /// Extra `key=value` overrides.
    #[arg(long = "set", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, PartialEq)]
enum Cmd {
    /// Run every diagnostic listed in a scenario file.
    Run { scenario: Option<PathBuf> },
    Field,
    Carleson,
    Cones,
    Gamma,
    Alpha,
    Exactness,
    Orth,
    Synth,
    Blowup,
    Dini,
    Bench,
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Run { .. } => "run",
            Cmd::Field => "field",
            Cmd::Carleson => "carleson",
            Cmd::Cones => "cones",
            Cmd::Gamma => "gamma",
            Cmd::Alpha => "alpha",
            Cmd::Exactness => "exactness",
            Cmd::Orth => "orth",
            Cmd::Synth => "synth",
            Cmd::Blowup => "blowup",
            Cmd::Dini => "dini",
            Cmd::Bench => "bench",
        }
    }
}

enum Failure {
    Config(String),
    Numerical { op: String, msg: String },
}

impl Failure {
    fn from_lib(op: &str, e: Error) -> Self {
        match e {
            Error::Config(_) | Error::BadSpec(_) | Error::Io(_) | Error::UnsupportedDimension(_) | Error::NotRadial => {
                Failure::Config(format!("{op}: {e}"))
            }
            e => Failure::Numerical {
                op: op.to_string(),
                msg: e.to_string(),
            },
        }
    }
}

fn build_config(cli: &Cli) -> Result<(Config, PathBuf), Failure> {
    let path = match &cli.cmd {
        Cmd::Run { scenario: Some(p) } => Some(p.clone()),
        _ => cli.config.clone(),
    };
    let (mut cfg, base) = match &path {
        Some(p) => (
            Config::load(p).map_err(|e| Failure::from_lib("config", e))?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None if matches!(cli.cmd, Cmd::Run { .. }) => {
            return Err(Failure::Config("run needs a scenario file".into()));
        }
        None => (Config::new(), PathBuf::from(".")),
    };
    let name = cli.cmd.name();
    if name != "run" {
        cfg.set("diagnostics", name);
        if !cfg.contains("name") {
            cfg.set("name", name);
        }
    }
    if let Some(k) = &cli.kernel {
        cfg.set("kernel", k);
    }
    if let Some(a) = cli.alpha {
        cfg.set("alpha", a);
    }
    if let Some(n) = cli.n {
        cfg.set("n", n);
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", s);
    }
    if let Some(t) = cli.tolerance {
        cfg.set("engine.target", t);
    }
    let target = if name == "run" { None } else { Some(name) };
    if let (Some(d), Some(t)) = (&cli.d, target) {
        cfg.set(&format!("{t}.d"), d);
    }
    if let (Some(r), Some(t)) = (&cli.r, target) {
        cfg.set(&format!("{t}.r"), r);
    }
    if let Some(a) = cli.atoms {
        cfg.set("bench.atoms", a);
    }
    if let Some(q) = cli.queries {
        cfg.set("bench.queries", q);
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects key=value, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim());
    }
    Ok((cfg, base))
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let (cfg, base) = build_config(cli)?;
    let sc = Scenario::new(cfg, base).map_err(|e| Failure::from_lib("config", e))?;
    if sc.diagnostics.is_empty() {
        return Err(Failure::Config("scenario lists no diagnostics".into()));
    }
    if let Some(bad) = sc.diagnostics.iter().find(|d| !diag::ALL.contains(&d.as_str())) {
        return Err(Failure::Config(format!("unknown diagnostic '{bad}'")));
    }
    let out = match (&cli.out, sc.config.get("out"), &cli.cmd) {
        (Some(o), _, _) => Some(o.clone()),
        (None, Some(o), _) => Some(sc.resolve(o)),
        (None, None, Cmd::Run { .. }) => Some(PathBuf::from("out").join(&sc.name)),
        _ => None,
    };
    let kernel = sc.kernel().map_err(|e| Failure::from_lib("kernel", e))?;
    let measure = if sc.diagnostics.iter().any(|d| diag::needs_measure(d)) {
        Some(sc.measure().map_err(|e| Failure::from_lib("measure", e))?)
    } else {
        None
    };
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
    }
    let ctx = diag::Context {
        sc: &sc,
        kernel,
        measure,
        out: out.as_deref(),
    };
    let mut stages = Vec::new();
    for name in &sc.diagnostics {
        let t0 = Instant::now();
        let res = diag::run(name, &ctx).map_err(|e| Failure::from_lib(name, e))?;
        let secs = t0.elapsed().as_secs_f64();
        for line in &res.summary {
            println!("{line}");
        }
        let mut files = Vec::new();
        if let Some(dir) = &out {
            for (file, table) in &res.tables {
                table.write(&dir.join(file)).map_err(|e| Failure::from_lib(name, e))?;
                files.push(file.clone());
            }
        }
        stages.push((name.clone(), secs, files));
    }
    if let Some(dir) = &out {
        let m = Manifest {
            name: sc.name.clone(),
            hash: config_hash(&sc.config.to_string(), &sc.referenced_files()),
            threads: cli.threads.unwrap_or(0),
            seed: sc.seed,
            stages,
        };
        m.write(dir).map_err(|e| Failure::from_lib("manifest", e))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match regdist::par::with_threads(threads, || execute(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical { op, msg }) => {
            eprintln!("numerical failure in {op}: {msg}");
            ExitCode::from(3)
        }
    }
}

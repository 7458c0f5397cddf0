use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use fairprobe::config::Config;
use fairprobe::http::Http;
use fairprobe::pipeline::{self, latest_run, Run, STEPS};
use fairprobe::registry;

#[derive(Parser)]
#[command(name = "fairprobe", version, about = "Use-case centred FAIR scoring of research data repositories")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all five steps in a new run and write the report.
    RunAll,
    /// Run one step. Step 1 starts a new run unless --run-id is given;
    /// later steps default to the latest run.
    Step {
        step: u8,
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Score the assessed catalogue of a run and write the report.
    Report {
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Fetch the repository list only and write it as NDJSON.
    Registry {
        /// Output file; standard output when omitted.
        #[arg(long = "to")]
        to: Option<PathBuf>,
    },
    /// Print the status of a run.
    Status {
        #[arg(long)]
        run_id: Option<String>,
    },
}

#[derive(Args)]
struct Opts {
    /// Config file, key=value lines or a JSON object.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Registry API base; pass an empty value to use the seed file only.
    #[arg(long, global = true)]
    registry_url: Option<String>,
    #[arg(long, global = true)]
    seed_file: Option<PathBuf>,
    #[arg(long, global = true)]
    allow_seed_fallback: bool,
    #[arg(long, global = true)]
    workers_harvest: Option<usize>,
    #[arg(long, global = true)]
    workers_select: Option<usize>,
    #[arg(long, global = true)]
    workers_probe: Option<usize>,
    /// Per-request timeout in seconds.
    #[arg(long, global = true)]
    timeout: Option<f64>,
    #[arg(long, global = true)]
    retries: Option<u32>,
    #[arg(long, global = true)]
    max_pages: Option<u32>,
    #[arg(long, global = true)]
    politeness_delay_ms: Option<u64>,
    #[arg(long, global = true)]
    per_host_delay_ms: Option<u64>,
    #[arg(long, global = true)]
    max_redirects: Option<u32>,
    #[arg(long, global = true)]
    doi_resolver: Option<String>,
    #[arg(long, global = true)]
    geo_require_coordinates: bool,
    /// Let a step run after a partial predecessor.
    #[arg(long, global = true)]
    allow_partial: bool,
}

impl Opts {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut put = |k: &'static str, val: Option<String>| {
            if let Some(val) = val {
                v.push((k, val));
            }
        };
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        put("registry_url", self.registry_url.clone());
        put("seed_file", self.seed_file.as_ref().map(|p| p.display().to_string()));
        put("allow_seed_fallback", self.allow_seed_fallback.then(|| "true".into()));
        put("workers_harvest", self.workers_harvest.map(|n| n.to_string()));
        put("workers_select", self.workers_select.map(|n| n.to_string()));
        put("workers_probe", self.workers_probe.map(|n| n.to_string()));
        put("timeout", self.timeout.map(|n| n.to_string()));
        put("retries", self.retries.map(|n| n.to_string()));
        put("max_pages", self.max_pages.map(|n| n.to_string()));
        put("politeness_delay_ms", self.politeness_delay_ms.map(|n| n.to_string()));
        put("per_host_delay_ms", self.per_host_delay_ms.map(|n| n.to_string()));
        put("max_redirects", self.max_redirects.map(|n| n.to_string()));
        put("doi_resolver", self.doi_resolver.clone());
        put("geo_require_coordinates", self.geo_require_coordinates.then(|| "true".into()));
        put("allow_partial", self.allow_partial.then(|| "true".into()));
        v
    }

    /// Layers file, environment and flags over `base`.
    fn layer(&self, mut base: Config) -> anyhow::Result<Config> {
        if let Some(path) = &self.config {
            base.apply_file(path)?;
        }
        base.apply_env(std::env::vars())?;
        for (k, v) in self.pairs() {
            base.set(k, &v)?;
        }
        base.validate()?;
        Ok(base)
    }
}

/// Opens an existing run with the overrides applied to its snapshot.
fn open_run(opts: &Opts, out: &std::path::Path, run_id: Option<String>) -> anyhow::Result<Run> {
    let id = match run_id {
        Some(id) => id,
        None => latest_run(out)?,
    };
    let mut run = Run::open(out, &id)?;
    let mut cfg = opts.layer(run.config().clone())?;
    cfg.out = out.to_path_buf();
    if cfg != *run.config() {
        run.set_config(cfg)?;
    }
    Ok(run)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FAIRPROBE_LOG", "info")).init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fairprobe: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let opts = &cli.opts;
    let fresh = opts.layer(Config::default())?;
    let out = fresh.out.clone();
    match cli.command {
        Command::RunAll => {
            let outcome = pipeline::run_all(fresh)?;
            println!("{}", outcome.run_dir.display());
            println!("{}", fairprobe::report::summary(&outcome.report));
        }
        Command::Step { step, run_id } => {
            if !(1..=STEPS).contains(&step) {
                bail!("no step {step}; steps are 1 to {STEPS}");
            }
            let mut run = match (step, run_id) {
                (1, None) => Run::create(fresh)?,
                (_, id) => open_run(opts, &out, id)?,
            };
            let allow = run.config().allow_partial;
            run.run_step(step, allow)?;
            println!("{}", run.dir().display());
            println!("step {step}: {}", run.status(step));
        }
        Command::Report { run_id } => {
            let mut run = open_run(opts, &out, run_id)?;
            let report = run.report()?;
            println!("{}", run.dir().display());
            println!("{}", fairprobe::report::summary(&report));
        }
        Command::Registry { to } => {
            let http = Http::new(fresh.timeout());
            let listing = registry::fetch_repository_list(
                &http,
                fresh.registry_url.as_deref(),
                fresh.seed_file.as_deref(),
                fresh.allow_seed_fallback,
                fresh.workers_registry,
            )?;
            let text = registry::to_ndjson(&listing.descriptors);
            match to {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Status { run_id } => {
            let id = match run_id {
                Some(id) => id,
                None => latest_run(&out)?,
            };
            let run = Run::open(&out, &id)?;
            println!("run {} (executed {})", run.manifest.run_id, run.manifest.execution_date);
            for s in &run.manifest.steps {
                println!("  step {} {:<9} {}", s.step, s.name, s.status);
            }
        }
    }
    Ok(())
}

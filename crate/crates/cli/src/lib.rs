//! Driver behind the `wtk` binary: configuration, verbs and artifacts.

pub mod artifacts;
pub mod config;
pub mod run;

use std::path::PathBuf;

use artifacts::{config_hash, unix_now, RunManifest, RunStatus, MANIFEST_NAME};
use config::{Needs, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Verb {
    Scan,
    Fsweep,
    Rsweep,
    Verify,
    EvalPotential,
}

impl Verb {
    fn needs(self) -> Needs {
        match self {
            Verb::Scan => Needs::Scan,
            Verb::Fsweep => Needs::Fsweep,
            Verb::Rsweep => Needs::Rsweep,
            Verb::Verify => Needs::Verify,
            Verb::EvalPotential => Needs::Eval,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verb::Scan => "scan",
            Verb::Fsweep => "fsweep",
            Verb::Rsweep => "rsweep",
            Verb::Verify => "verify",
            Verb::EvalPotential => "eval-potential",
        }
    }
}

#[derive(Debug, Clone, clap::Parser)]
#[command(name = "wtk", version, about = "Tunneling rates from spectral-density resonances")]
pub struct Cli {
    #[arg(value_enum)]
    pub verb: Verb,
    /// JSON run configuration (optional for verify)
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides output_dir in the config
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; overrides jobs in the config
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Seed for the synthetic-noise check; overrides seed in the config
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quiet: bool,
}

/// Runs one verb and returns the process exit code.
pub fn execute(cli: Cli) -> u8 {
    let started = unix_now();
    let mut config = match &cli.config {
        Some(path) => match config::load(path) {
            Ok(c) => c,
            Err(e) => return fatal(&e.to_string()),
        },
        None => RunConfig::default(),
    };
    if let Some(j) = cli.jobs {
        config.jobs = Some(j);
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = &cli.out {
        config.output_dir = Some(o.clone());
    }
    if cli.config.is_none() && cli.verb != Verb::Verify {
        return fatal(&format!("{} needs --config", cli.verb.name()));
    }
    if let Err(e) = config.validate(cli.verb.needs()) {
        return fatal(&e.to_string());
    }
    let jobs = config
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    let dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    config.output_dir = Some(dir.clone());

    let outputs = match artifacts::Outputs::create(&dir) {
        Ok(o) => o,
        Err(e) => return fatal(&format!("cannot create {}: {e}", dir.display())),
    };
    let mut ctx = run::Context {
        config: &config,
        outputs,
        quiet: cli.quiet,
        tasks: Vec::new(),
    };
    let result = match cli.verb {
        Verb::Scan => run::scan(&mut ctx),
        Verb::Fsweep => run::fsweep(&mut ctx),
        Verb::Rsweep => run::rsweep(&mut ctx),
        Verb::Verify => run::verify(&mut ctx),
        Verb::EvalPotential => run::eval_potential(&mut ctx),
    };
    let status = match &result {
        Ok(s) => *s,
        Err(e) => {
            ctx.tasks.push(artifacts::TaskRecord::failed(cli.verb.name(), e));
            RunStatus::Failed
        }
    };
    for t in ctx.tasks.iter().filter(|t| t.status == artifacts::TaskStatus::Failed) {
        if !cli.quiet {
            eprintln!("failed: {}: {}", t.name, t.error.as_deref().unwrap_or(""));
        }
    }
    let manifest = RunManifest {
        tool: "wtk".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        verb: cli.verb.name().into(),
        config_sha256: config_hash(&config),
        started_unix: started,
        finished_unix: unix_now(),
        jobs,
        status,
        tasks: ctx.tasks,
        outputs: ctx.outputs.records().to_vec(),
        config: config.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).unwrap_or_default() + "\n";
    if let Err(e) = artifacts::write_atomic(&dir.join(MANIFEST_NAME), text.as_bytes()) {
        return fatal(&format!("cannot write manifest: {e}"));
    }
    if let Err(e) = result {
        eprintln!("error: {e}");
    }
    status.exit_code()
}

fn fatal(msg: &str) -> u8 {
    eprintln!("error: {msg}");
    1
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use rulecircuit_cli::config::CONFIG_FILE;
use rulecircuit_cli::{verify, Pipeline, RunConfig, ScoringMethod};

#[derive(Parser)]
#[command(
    name = "rulecircuit",
    version,
    about = "Circuit-guided rule selection for knowledge graph completion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Abduce the rule-context matrix from the training triples.
    BuildContexts(Options),
    /// Fit the mixture-of-trees circuit to the matrix.
    LearnPc(Options),
    /// Generate singleton and greedy rule sets from the circuit.
    GenRulesets(Options),
    /// Write ranked predictions for every method and rule count.
    Predict(Options),
    /// Compute filtered Hits@k and MRR into the metrics CSV.
    Evaluate(Options),
    /// Run the oracle checks and write the verification report.
    Verify(Options),
    /// Run the five pipeline stages in order.
    Run(Options),
}

#[derive(Args, Clone)]
struct Options {
    /// JSON config file; flags given here override its values. Without it the
    /// output directory's config.json is used when present.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for all artifacts.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Dataset label in the metrics CSV.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Rule file (support, correct predictions, confidence, rule).
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    min_confidence: Option<f64>,
    #[arg(long)]
    min_support: Option<u64>,
    /// Mirror every training triple under an inverse relation.
    #[arg(long)]
    materialize_inverse: bool,
    /// Number of mixture components K.
    #[arg(long)]
    components: Option<usize>,
    /// Pseudo-count used when estimating circuit parameters.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    em_iterations: Option<usize>,
    /// Seed for EM initialization and the random verification instances.
    #[arg(long)]
    seed: Option<u64>,
    /// Greedy extension threshold.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<ScoringMethod>>,
    /// Rule counts to sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    rule_counts: Option<Vec<usize>>,
    /// Candidates kept per query.
    #[arg(long)]
    top_k: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Accept upstream artifacts produced under a different configuration.
    #[arg(long)]
    force: bool,
}

impl Options {
    /// Defaults, then the config file, then `RULECIRCUIT_SEED`, then flags.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => {
                let output = self.output.clone().unwrap_or_else(|| RunConfig::default().output);
                let previous = output.join(CONFIG_FILE);
                if previous.exists() {
                    log::info!("using settings from {}", previous.display());
                    RunConfig::from_file(&previous)?
                } else {
                    RunConfig::default()
                }
            }
        };
        cfg.apply_seed_env()?;
        let o = self.clone();
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = o.$field { cfg.$field = v; } )* };
        }
        macro_rules! set_opt {
            ($($field:ident),*) => { $( if o.$field.is_some() { cfg.$field = o.$field; } )* };
        }
        set!(
            output,
            min_confidence,
            min_support,
            components,
            alpha,
            em_iterations,
            seed,
            delta,
            methods,
            rule_counts,
            top_k
        );
        set_opt!(dataset, train, valid, test, rules);
        if o.materialize_inverse {
            cfg.materialize_inverse = true;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let options = match &cli.command {
        Command::BuildContexts(o)
        | Command::LearnPc(o)
        | Command::GenRulesets(o)
        | Command::Predict(o)
        | Command::Evaluate(o)
        | Command::Verify(o)
        | Command::Run(o) => o,
    };
    if let Some(n) = options.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let pipeline = Pipeline::new(options.resolve()?, options.force)?;
    pipeline.write_config()?;
    match cli.command {
        Command::BuildContexts(_) => pipeline.build_contexts()?,
        Command::LearnPc(_) => pipeline.learn_pc()?,
        Command::GenRulesets(_) => pipeline.gen_rulesets()?,
        Command::Predict(_) => pipeline.predict()?,
        Command::Evaluate(_) => pipeline.evaluate()?,
        Command::Run(_) => pipeline.run_all()?,
        Command::Verify(_) => {
            let outcome = verify::run(&pipeline)?;
            for line in outcome.status_lines() {
                println!("{line}");
            }
            if !outcome.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

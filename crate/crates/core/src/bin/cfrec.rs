use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cfrec::harness::{self, ExperimentConfig, ExplainOutput, SpnModeConfig, ValidityKind};
use cfrec::mio;
use cfrec::solver;
use cfrec::spn::Aggregator;
use cfrec::synth::{self, SynthConfig};
use cfrec::{Error, Result};

/// Counterfactual explanations for top-k recommendations.
#[derive(Parser)]
#[command(name = "cfrec", version)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a recommender and a likelihood network per fold.
    Train(ConfigArgs),
    /// Explain one recommendation and print the result as JSON.
    Explain {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        target: TargetArgs,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured benchmark matrix and write CSV and JSON reports.
    Benchmark(ConfigArgs),
    /// Write the optimization model of one query as free-format MPS.
    ExportMps {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Independently check a counterfactual for one query.
    Verify {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        target: TargetArgs,
        /// JSON written by `explain`.
        #[arg(long, conflicts_with = "solution", required_unless_present = "solution")]
        counterfactual: Option<PathBuf>,
        /// "name value" lines solving the model written by `export-mps`.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Generate a synthetic dataset (interactions.csv, items.csv).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        users: usize,
        #[arg(long, default_value_t = 200)]
        items: usize,
        #[arg(long, default_value_t = 15)]
        categories: usize,
        #[arg(long, default_value_t = 8.0)]
        mean_interactions: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct TargetArgs {
    #[arg(long)]
    user: String,
    #[arg(long)]
    item: String,
}

/// Config file plus flags overriding its fields.
#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    interactions: Option<PathBuf>,
    #[arg(long)]
    item_meta: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    fold_count: Option<usize>,
    #[arg(long)]
    users_sampled: Option<usize>,
    #[arg(long)]
    items_per_user: Option<usize>,
    #[arg(long)]
    time_limit_seconds: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = parse_enum::<Aggregator>)]
    aggregator: Option<Aggregator>,
    #[arg(long, value_parser = parse_enum::<ValidityKind>)]
    validity: Option<ValidityKind>,
    /// none, threshold or optimize.
    #[arg(long)]
    spn_mode: Option<String>,
    /// Weight of the likelihood term for `--spn-mode optimize`.
    #[arg(long)]
    alpha: Option<f64>,
    /// Log-likelihood floor for `--spn-mode threshold` (default: median).
    #[arg(long)]
    min_ll: Option<f64>,
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        set!(interactions, output_dir, k, lambda, seed, fold_count, users_sampled, items_per_user);
        set!(time_limit_seconds, workers, aggregator, validity);
        if self.item_meta.is_some() {
            cfg.item_meta = self.item_meta.clone();
        }
        if let Some(mode) = &self.spn_mode {
            cfg.spn_mode = match mode.as_str() {
                "none" => SpnModeConfig::None,
                "threshold" => SpnModeConfig::Threshold { min_ll: self.min_ll },
                "optimize" => SpnModeConfig::Optimize {
                    alpha: self.alpha.unwrap_or(0.1),
                },
                other => return Err(Error::Config(format!("unknown spn mode `{other}`"))),
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_json(value: &impl serde::Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| Error::Data(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let summary = harness::cmd_train(&args.resolve()?)?;
            print_json(&summary, None)
        }
        Command::Explain { config, target, out } => {
            let output = harness::cmd_explain(&config.resolve()?, &target.user, &target.item)?;
            print_json(&output, out.as_deref())
        }
        Command::Benchmark(args) => {
            let (report, csv, json) = harness::run_benchmark(&args.resolve()?)?;
            for cell in &report.cells {
                eprintln!(
                    "{:<28} success {:.2}  optimal {:.2}  l1 {}  ll {}",
                    cell.cell,
                    cell.success_rate,
                    cell.optimal_rate,
                    cell.l1_mean.map_or("-".into(), |v| format!("{v:.2}")),
                    cell.ll_mean.map_or("-".into(), |v| format!("{v:.2}")),
                );
            }
            println!("{}\n{}", csv.display(), json.display());
            Ok(())
        }
        Command::ExportMps { config, target, out } => {
            let cfg = config.resolve()?;
            let art = harness::load_artifacts(&cfg)?;
            let prepared = harness::prepare_query(&cfg, &art, &target.user, &target.item)?;
            solver::export_mps(&prepared.model, &out)?;
            println!("{}", out.display());
            Ok(())
        }
        Command::Verify {
            config,
            target,
            counterfactual,
            solution,
        } => {
            let cfg = config.resolve()?;
            let art = harness::load_artifacts(&cfg)?;
            let prepared = harness::prepare_query(&cfg, &art, &target.user, &target.item)?;
            let model = &art.models[prepared.fold];
            let cf = match (counterfactual, solution) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
                    let output: ExplainOutput = serde_json::from_str(&text)?;
                    output
                        .result
                        .counterfactual
                        .ok_or_else(|| Error::Data(format!("{} holds no counterfactual", path.display())))?
                }
                (None, Some(path)) => {
                    let values = solver::import_solution(&path, &prepared.model)?;
                    let ctx = Some(art.spn_context(prepared.fold));
                    let decoded = mio::decode(&prepared.model, &values, &prepared.query, model, ctx)?;
                    decoded.counterfactual.expect("decoded solutions carry a counterfactual")
                }
                (None, None) => unreachable!("clap requires one source"),
            };
            let report = harness::verify_ce(model, &prepared.query, &cf)?;
            print_json(&report, None)
        }
        Command::Synth {
            out,
            users,
            items,
            categories,
            mean_interactions,
            seed,
        } => {
            let cfg = SynthConfig {
                users,
                items,
                categories,
                mean_interactions,
                seed,
                ..SynthConfig::default()
            };
            synth::generate(&cfg)?.write(&out)?;
            println!("{}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hmum_cli::commands;
use hmum_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "hmum", version, about = "Heterogeneous multi-treatment uplift modeling harness")]
struct Cli {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every derived random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    /// Dataset CSV (omit to use the synthetic generator).
    #[arg(long)]
    data: Option<PathBuf>,

    /// Schema JSON for the dataset.
    #[arg(long)]
    schema: Option<PathBuf>,

    /// Separate test CSV (boundaries still fit on the training portion).
    #[arg(long)]
    test_data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trial: dataset, schema, truth sidecar, requests.
    GenData {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        treatments: Option<usize>,
        #[arg(long)]
        responses: Option<usize>,
        #[arg(long)]
        noise_sd: Option<f64>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Train one checkpoint per response.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Disable the gate-consistency term (ablation).
        #[arg(long)]
        no_kl: bool,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Rank the test split per (treatment, response) and report qini/AUUC.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        /// Directory with hum_r*.json checkpoints (default: the out dir).
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
    },
    /// Infer all users into the score store.
    Score {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
    },
    /// Train the value-weight model on a request log.
    WeightsTrain {
        /// Request log (JSON lines); default: <out>/requests.jsonl
        #[arg(long)]
        requests: Option<PathBuf>,
        /// Request schema; default: <out>/request_schema.json
        #[arg(long)]
        request_schema: Option<PathBuf>,
    },
    /// Replay requests through the decision stage and score policies
    /// against ground truth.
    Simulate {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        weight_model: Option<PathBuf>,
        #[arg(long)]
        requests: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        sigma: Option<f64>,
        /// Enable at most the single best treatment.
        #[arg(long)]
        top1: bool,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn apply_data_args(cfg: &mut RunConfig, data: &DataArgs) {
    if data.data.is_some() {
        cfg.data = data.data.clone();
    }
    if data.schema.is_some() {
        cfg.schema = data.schema.clone();
    }
    if data.test_data.is_some() {
        cfg.test_data = data.test_data.clone();
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::GenData { n, treatments, responses, noise_sd, bins } => {
            if let Some(n) = n {
                cfg.gen.n = *n;
            }
            if let Some(t) = treatments {
                cfg.gen.treatments = *t;
            }
            if let Some(r) = responses {
                cfg.gen.responses = *r;
            }
            if let Some(s) = noise_sd {
                cfg.gen.noise_sd = *s;
            }
            if let Some(b) = bins {
                cfg.gen.bins = *b;
            }
            let summary = commands::cmd_gen_data(&cfg)?;
            println!(
                "generated {} instances, {} requests -> {}",
                summary.instances,
                summary.requests,
                cfg.out.display()
            );
            Ok(0)
        }
        Command::Train { data, no_kl, max_epochs, batch_size } => {
            apply_data_args(&mut cfg, data);
            if *no_kl {
                cfg.lambda_kl = 0.0;
            }
            if let Some(e) = max_epochs {
                cfg.max_epochs = *e;
            }
            if let Some(b) = batch_size {
                cfg.batch_size = Some(*b);
            }
            let summary = commands::cmd_train(&cfg)?;
            println!("trained {} checkpoints -> {}", summary.checkpoints.len(), cfg.out.display());
            Ok(0)
        }
        Command::Evaluate { data, checkpoint_dir } => {
            apply_data_args(&mut cfg, data);
            let dir = checkpoint_dir.clone().unwrap_or_else(|| cfg.out.clone());
            let summary = commands::cmd_evaluate(&cfg, &dir)?;
            for report in &summary.reports {
                println!(
                    "treatment {} on {}: qini {:.4} auuc {:.4} ({} treated / {} control)",
                    report.treatment,
                    report.response,
                    report.qini,
                    report.auuc,
                    report.n_treated,
                    report.n_control
                );
            }
            println!("metric report -> {}", summary.report_path.display());
            Ok(0)
        }
        Command::Score { data, checkpoint_dir } => {
            apply_data_args(&mut cfg, data);
            let dir = checkpoint_dir.clone().unwrap_or_else(|| cfg.out.clone());
            let summary = commands::cmd_score(&cfg, &dir)?;
            println!(
                "scored {} users ({} skipped) -> {}",
                summary.users,
                summary.skipped,
                summary.store_path.display()
            );
            Ok(if summary.skipped > 0 { hmum_cli::EXIT_NUMERICAL } else { 0 })
        }
        Command::WeightsTrain { requests, request_schema } => {
            let requests_path = requests.clone().unwrap_or_else(|| cfg.out.join("requests.jsonl"));
            let schema_path = request_schema
                .clone()
                .unwrap_or_else(|| cfg.out.join("request_schema.json"));
            let summary = commands::cmd_weights_train(&cfg, &requests_path, &schema_path)?;
            println!(
                "weight model trained on {} requests ({} skipped) -> {}",
                summary.trained_on,
                summary.skipped,
                summary.model_path.display()
            );
            Ok(0)
        }
        Command::Simulate { store, weight_model, requests, sigma, top1 } => {
            if let Some(s) = sigma {
                cfg.sigma = *s;
            }
            if *top1 {
                cfg.top1 = true;
            }
            let store_path = store.clone().unwrap_or_else(|| cfg.out.join("score_store.csv"));
            let model_path = weight_model
                .clone()
                .unwrap_or_else(|| cfg.out.join("weight_model.json"));
            let requests_path = requests.clone().unwrap_or_else(|| cfg.out.join("requests.jsonl"));
            let report = commands::cmd_simulate(&cfg, &store_path, &model_path, &requests_path)?;
            for policy in &report.policies {
                println!(
                    "{:>12}: mean weighted outcome {:.5}",
                    policy.name, policy.mean_weighted_outcome
                );
            }
            println!("policy report -> {}", commands::simulate::report_file(&cfg).display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version through the error path with success
            // status; real usage errors exit 1.
            let code = if e.use_stderr() { hmum_cli::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(hmum_cli::exit_code(&err) as u8)
        }
    }
}

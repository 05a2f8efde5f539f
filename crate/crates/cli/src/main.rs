//! One binary wiring the library into reproducible commands.
//!
//! Exit codes: 0 success, 2 usage, 3 input parse failure, 4 planner failure,
//! 5 numeric failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "goalnet", version, about = "Goal-predicate inference and symbolic planning")]
struct Cli {
    /// Optional JSON config file; flags and environment override it.
    #[arg(long, global = true, env = "GOALNET_CONFIG")]
    config: Option<std::path::PathBuf>,
    /// Master seed for data generation, training and splits.
    #[arg(long, global = true, env = "GOALNET_SEED")]
    seed: Option<u64>,
    /// Directory with domain schema files; defaults to the bundled schemas.
    #[arg(long, global = true, env = "GOALNET_SCHEMA_DIR")]
    schema_dir: Option<std::path::PathBuf>,
    /// Word embedding table; defaults to the bundled table.
    #[arg(long, global = true, env = "GOALNET_EMBEDDINGS")]
    embeddings: Option<std::path::PathBuf>,
    /// Alias file; defaults to the bundled aliases.
    #[arg(long, global = true, env = "GOALNET_ALIASES")]
    aliases: Option<std::path::PathBuf>,
    /// Precomputed sentence vectors keyed by instruction id.
    #[arg(long, global = true, env = "GOALNET_SENTENCE_VECTORS")]
    sentence_vectors: Option<std::path::PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan an action sequence for explicit goal constraints.
    Plan(commands::PlanArgs),
    /// Generate a synthetic demonstration dataset.
    GenData(commands::GenDataArgs),
    /// Train the constraint predictor on a dataset.
    Train(commands::TrainArgs),
    /// Evaluate a checkpoint with the four goal-reaching metrics.
    Eval(commands::EvalArgs),
    /// Verify backward gradients against finite differences.
    Gradcheck(commands::GradcheckArgs),
    /// Summarize a schema, dataset or checkpoint.
    Inspect(commands::InspectArgs),
}

fn main() {
    let cli = Cli::parse();
    let ctx = match config::Context::resolve(&cli) {
        Ok(ctx) => ctx,
        Err(e) => exit_with(e),
    };
    let result = match &cli.command {
        Command::Plan(args) => commands::cmd_plan(&ctx, args),
        Command::GenData(args) => commands::cmd_gen_data(&ctx, args),
        Command::Train(args) => commands::cmd_train(&ctx, args),
        Command::Eval(args) => commands::cmd_eval(&ctx, args),
        Command::Gradcheck(args) => commands::cmd_gradcheck(&ctx, args),
        Command::Inspect(args) => commands::cmd_inspect(&ctx, args),
    };
    if let Err(e) = result {
        exit_with(e);
    }
}

fn exit_with(e: anyhow::Error) -> ! {
    eprintln!("error: {e:#}");
    std::process::exit(classify(&e));
}

/// Stable exit-code contract.
fn classify(e: &anyhow::Error) -> i32 {
    use goalnet_core::data::DataError;
    use goalnet_core::domain::DomainError;
    use goalnet_core::lang::LangError;
    use goalnet_core::model::ModelError;
    use goalnet_core::nn::NnError;
    use goalnet_core::planner::PlanError;

    for cause in e.chain() {
        if let Some(p) = cause.downcast_ref::<PlanError>() {
            return match p {
                PlanError::Domain(_) => 3,
                _ => 4,
            };
        }
        if cause.downcast_ref::<NnError>().is_some() {
            return 5;
        }
        if let Some(m) = cause.downcast_ref::<ModelError>() {
            return match m {
                ModelError::Nn(_) => 5,
                _ => 3,
            };
        }
        if cause.downcast_ref::<DomainError>().is_some()
            || cause.downcast_ref::<LangError>().is_some()
            || cause.downcast_ref::<serde_json::Error>().is_some()
            || cause.downcast_ref::<std::io::Error>().is_some()
        {
            return 3;
        }
        if let Some(d) = cause.downcast_ref::<DataError>() {
            return match d {
                DataError::Model(ModelError::Nn(_)) => 5,
                _ => 3,
            };
        }
        if cause.downcast_ref::<commands::NumericFailure>().is_some() {
            return 5;
        }
        if cause.downcast_ref::<commands::PlanFailed>().is_some() {
            return 4;
        }
    }
    1
}

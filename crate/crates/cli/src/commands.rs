use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::Args;
use serde::Serialize;

use goalnet_core::data::{
    augment, load_dataset, save_dataset_with_provenance, split_dataset, synth_generate,
    synth_generate_split, train, Demonstration, TrainConfig,
};
use goalnet_core::domain::{goal_check, GoalSpec, WorldState, WorldStateJson};
use goalnet_core::fixtures;
use goalnet_core::metrics::{
    evaluate, make_generalization_set, EvalConfig, EvalReport, GeneralizationMode, GrrDirection,
    ParaphraseRules, VerbLexicon,
};
use goalnet_core::model::{checkpoint, GoalNet, GoalNetConfig, HistoryMode, ModelDims};
use goalnet_core::planner::{plan, PlannerConfig};

use crate::config::{Context, Sources};

/// Marker error for numeric verification failures (exit code 5).
#[derive(Debug)]
pub struct NumericFailure(pub String);
impl std::fmt::Display for NumericFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
impl std::error::Error for NumericFailure {}

/// Marker error wrapping planner failures surfaced to the user (exit 4).
#[derive(Debug)]
pub struct PlanFailed(pub String);
impl std::fmt::Display for PlanFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
impl std::error::Error for PlanFailed {}

/// Resolved settings echoed into every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedRun {
    pub command: String,
    pub seed: u64,
    pub lr: f64,
    pub epochs: usize,
    pub planner_prob: f64,
    pub patience: usize,
    pub tau: f64,
    pub history_mode: String,
    pub ablations: Vec<String>,
    pub max_depth: usize,
    pub max_expansions: usize,
    pub workers: usize,
    pub sources: Sources,
}

fn planner_config(ctx: &Context, depth: Option<usize>, expansions: Option<usize>) -> PlannerConfig {
    let defaults = PlannerConfig::default();
    PlannerConfig {
        max_depth: depth.or(ctx.file.max_depth).unwrap_or(defaults.max_depth),
        max_expansions: expansions
            .or(ctx.file.max_expansions)
            .unwrap_or(defaults.max_expansions),
        restrict_to_goal_objects: true,
    }
}

// ---------------------------------------------------------------------------
// plan

#[derive(Args)]
pub struct PlanArgs {
    /// World state file (objects plus relation triples).
    #[arg(long)]
    state: PathBuf,
    /// Domain name the state belongs to.
    #[arg(long)]
    domain: String,
    /// Positive goal constraint, e.g. "OnTop(mug_1, sink)"; repeatable.
    #[arg(long = "pos")]
    positive: Vec<String>,
    /// Negative goal constraint; repeatable.
    #[arg(long = "neg")]
    negative: Vec<String>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    max_expansions: Option<usize>,
    /// Write the plan trace as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct PlanTrace {
    config: ResolvedRunLite,
    domain: String,
    positive: Vec<String>,
    negative: Vec<String>,
    actions: Vec<String>,
    expanded_nodes: usize,
    final_relations: Vec<String>,
}

#[derive(Serialize)]
struct ResolvedRunLite {
    command: String,
    seed: u64,
    max_depth: usize,
    max_expansions: usize,
    sources: Sources,
}

pub fn cmd_plan(ctx: &Context, args: &PlanArgs) -> Result<()> {
    let schema = ctx.schemas.get(&args.domain)?;
    let text = std::fs::read_to_string(&args.state)
        .with_context(|| format!("reading state {}", args.state.display()))?;
    let json: WorldStateJson = serde_json::from_str(&text).context("parsing state file")?;
    let state = WorldState::from_json(&json, schema)?;
    let mut plus = std::collections::BTreeSet::new();
    for p in &args.positive {
        plus.insert(state.parse_predicate(p)?);
    }
    let mut minus = std::collections::BTreeSet::new();
    for p in &args.negative {
        minus.insert(state.parse_predicate(p)?);
    }
    let goal = GoalSpec::new(plus, minus)?;
    let cfg = planner_config(ctx, args.max_depth, args.max_expansions);
    let result = match plan(&state, &goal, &cfg) {
        Ok(r) => r,
        Err(e) => return Err(anyhow::Error::new(PlanFailed(e.to_string()))),
    };
    debug_assert!(goal_check(&result.final_state, &goal));
    let actions: Vec<String> = result
        .actions
        .iter()
        .map(|a| a.to_string(state.universe()))
        .collect();
    for a in &actions {
        println!("{a}");
    }
    if actions.is_empty() {
        println!("(goal already satisfied; empty plan)");
    }
    let trace = PlanTrace {
        config: ResolvedRunLite {
            command: "plan".into(),
            seed: ctx.seed,
            max_depth: cfg.max_depth,
            max_expansions: cfg.max_expansions,
            sources: ctx.sources.clone(),
        },
        domain: args.domain.clone(),
        positive: args.positive.clone(),
        negative: args.negative.clone(),
        actions,
        expanded_nodes: result.expanded_nodes,
        final_relations: result
            .final_state
            .relations()
            .iter()
            .map(|p| result.final_state.pred_to_string(p))
            .collect(),
    };
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&trace)?)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gen-data

#[derive(Args)]
pub struct GenDataArgs {
    /// Number of demonstrations.
    #[arg(long, short = 'n')]
    count: usize,
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
    /// Embed 70/15/15 split tags in the file.
    #[arg(long)]
    tag_splits: bool,
}

pub fn cmd_gen_data(ctx: &Context, args: &GenDataArgs) -> Result<()> {
    let demos = if args.tag_splits {
        synth_generate_split(&ctx.schemas, ctx.seed, args.count)?
    } else {
        synth_generate(&ctx.schemas, ctx.seed, args.count)?
    };
    let provenance = serde_json::json!({
        "command": "gen-data",
        "seed": ctx.seed,
        "count": args.count,
        "tag_splits": args.tag_splits,
        "sources": ctx.sources,
    });
    std::fs::write(&args.out, save_dataset_with_provenance(&demos, provenance))
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} demonstrations to {}", demos.len(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Where to write the best-validation checkpoint.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the line-delimited training log.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, env = "GOALNET_EPOCHS")]
    epochs: Option<usize>,
    #[arg(long, env = "GOALNET_LR")]
    lr: Option<f64>,
    /// Probability of the low-fidelity self-rollout branch per step.
    #[arg(long)]
    planner_prob: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    /// Gumbel-softmax temperature.
    #[arg(long)]
    tau: Option<f64>,
    /// History cell input: "positive" (default) or "union".
    #[arg(long)]
    history_mode: Option<String>,
    /// Disable a model component; repeatable. See `--ablate help`.
    #[arg(long = "ablate")]
    ablations: Vec<String>,
    /// Grow the training split by semantic object replacement (fraction).
    #[arg(long)]
    augment: Option<f64>,
    /// Attach validation metric snapshots to the log every N epochs.
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Validate the dataset and configuration without training.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Serialize)]
struct LogHeader<'a> {
    config: &'a ResolvedRun,
    train_demos: usize,
    val_demos: usize,
    augmented: usize,
}

pub fn cmd_train(ctx: &Context, args: &TrainArgs) -> Result<()> {
    if args.ablations.iter().any(|a| a == "help") {
        println!(
            "ablatable components: {}",
            goalnet_core::model::AblationFlags::NAMES.join(", ")
        );
        return Ok(());
    }
    let text = std::fs::read_to_string(&args.data)
        .with_context(|| format!("reading {}", args.data.display()))?;
    let demos = load_dataset(&text, &ctx.schemas)?;
    let splits = split_dataset(&demos, ctx.seed)?;

    let mut config = GoalNetConfig::new(ModelDims::for_schema(ctx.schemas.first()), ctx.seed);
    config.tau = args.tau.or(ctx.file.tau).unwrap_or(config.tau);
    config.history_mode = match args.history_mode.as_deref() {
        None | Some("positive") => HistoryMode::PositiveOnly,
        Some("union") => HistoryMode::PositiveAndNegative,
        Some(other) => bail!("unknown history mode `{other}` (positive|union)"),
    };
    for name in &args.ablations {
        config
            .ablation
            .disable(name)
            .map_err(anyhow::Error::msg)?;
    }

    let defaults = TrainConfig::default();
    let train_cfg = TrainConfig {
        lr: args.lr.or(ctx.file.lr).unwrap_or(defaults.lr),
        max_epochs: args.epochs.or(ctx.file.epochs).unwrap_or(defaults.max_epochs),
        planner_prob: args
            .planner_prob
            .or(ctx.file.planner_prob)
            .unwrap_or(defaults.planner_prob),
        patience: args.patience.or(ctx.file.patience).unwrap_or(defaults.patience),
        seed: ctx.seed,
        metric_snapshot_every: args.snapshot_every.unwrap_or(0),
        ..defaults
    };
    let resolved = ResolvedRun {
        command: "train".into(),
        seed: ctx.seed,
        lr: train_cfg.lr,
        epochs: train_cfg.max_epochs,
        planner_prob: train_cfg.planner_prob,
        patience: train_cfg.patience,
        tau: config.tau,
        history_mode: format!("{:?}", config.history_mode),
        ablations: config
            .ablation
            .disabled_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        max_depth: 0,
        max_expansions: 0,
        workers: 1,
        sources: ctx.sources.clone(),
    };

    let mut train_set: Vec<Demonstration> =
        splits.train.iter().map(|&i| demos[i].clone()).collect();
    let val_set: Vec<Demonstration> = splits.val.iter().map(|&i| demos[i].clone()).collect();
    let mut augmented = 0usize;
    if let Some(budget) = args.augment {
        let extra = augment(
            &train_set,
            ctx.encoder.table(),
            budget,
            &ctx.schemas,
            &ctx.aliases,
            ctx.seed,
        )?;
        augmented = extra.len();
        train_set.extend(extra);
    }
    println!(
        "dataset ok: {} demos ({} train + {} augmented, {} val, {} test)",
        demos.len(),
        splits.train.len(),
        augmented,
        val_set.len(),
        splits.test.len()
    );
    if args.dry_run {
        println!("dry run; no training performed");
        return Ok(());
    }

    let net = GoalNet::new(config);
    let outcome = train(net, &train_set, &val_set, &ctx.encoder, &ctx.aliases, train_cfg)?;
    println!(
        "trained {} epochs; best validation loss {:.6} at epoch {}{}",
        outcome.epochs_run,
        outcome.best_val_loss,
        outcome.best_epoch,
        if outcome.stopped_early {
            " (early stop)"
        } else {
            ""
        }
    );
    if let Some(log_path) = &args.log {
        let mut lines = vec![serde_json::to_string(&LogHeader {
            config: &resolved,
            train_demos: train_set.len(),
            val_demos: val_set.len(),
            augmented,
        })?];
        for record in &outcome.log {
            lines.push(serde_json::to_string(record)?);
        }
        std::fs::write(log_path, lines.join("\n") + "\n")
            .with_context(|| format!("writing {}", log_path.display()))?;
    }
    if let Some(out) = &args.out {
        let provenance = serde_json::to_string(&resolved)?;
        checkpoint::save(out, &outcome.net, outcome.best_epoch, &provenance)
            .map_err(goalnet_core::model::ModelError::Nn)?;
        println!("checkpoint written to {}", out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Which derived split to score: test (default), val, train or all.
    #[arg(long, default_value = "test")]
    split: String,
    /// Apply a generalization transform before scoring.
    #[arg(long)]
    generalization: Option<String>,
    /// Subset direction of the goal-reaching check: prose (ground truth
    /// inside prediction, default) or formula (the reverse).
    #[arg(long, default_value = "prose")]
    grr_direction: String,
    #[arg(long, env = "GOALNET_WORKERS")]
    workers: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    max_expansions: Option<usize>,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write per-datum rollout traces (instruction, per-step constraint
    /// pairs, planned actions, terminal predicates) to this JSON file.
    #[arg(long)]
    traces: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config: &'a ResolvedRun,
    checkpoint_provenance: serde_json::Value,
    checkpoint_epoch: usize,
    split: &'a str,
    generalization: Option<&'a str>,
    report: &'a EvalReport,
}

pub fn cmd_eval(ctx: &Context, args: &EvalArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.data)
        .with_context(|| format!("reading {}", args.data.display()))?;
    let demos = load_dataset(&text, &ctx.schemas)?;
    let splits = split_dataset(&demos, ctx.seed)?;
    let indices = match args.split.as_str() {
        "train" => splits.train,
        "val" => splits.val,
        "test" => splits.test,
        "all" => (0..demos.len()).collect(),
        other => bail!("unknown split `{other}` (train|val|test|all)"),
    };
    let mut subset: Vec<Demonstration> = indices.iter().map(|&i| demos[i].clone()).collect();

    let generalization = match args.generalization.as_deref() {
        None => None,
        Some("verb") => Some(GeneralizationMode::Verb),
        Some("paraphrase") => Some(GeneralizationMode::Paraphrase),
        Some(other) => bail!("unknown generalization mode `{other}` (verb|paraphrase)"),
    };
    if let Some(mode) = generalization {
        let verbs = VerbLexicon::builtin();
        let paraphrases = ParaphraseRules::builtin();
        subset = make_generalization_set(&subset, mode, &verbs, &paraphrases);
        if subset.is_empty() {
            bail!("no datum admitted a {:?} rewrite", mode);
        }
    }

    let loaded = checkpoint::load(&args.checkpoint).map_err(goalnet_core::model::ModelError::Nn)?;
    let expected = ModelDims::for_schema(ctx.schemas.first());
    if loaded.net.config.dims != expected {
        bail!(
            "checkpoint dimensions do not match the loaded schemas \
             (checkpoint max_objects {}, schema {})",
            loaded.net.config.dims.max_objects,
            expected.max_objects
        );
    }

    let eval_cfg = EvalConfig {
        planner: planner_config(ctx, args.max_depth, args.max_expansions),
        grr_direction: match args.grr_direction.as_str() {
            "prose" => GrrDirection::GroundTruthInPredicted,
            "formula" => GrrDirection::PredictedInGroundTruth,
            other => bail!("unknown grr direction `{other}` (prose|formula)"),
        },
        workers: args.workers.or(ctx.file.workers).unwrap_or(1),
    };
    let report = evaluate(&subset, &loaded.net, &ctx.encoder, &ctx.aliases, &eval_cfg)?;
    print!("{}", report.to_table("goalnet"));

    if let Some(path) = &args.traces {
        let mut traces = Vec::with_capacity(subset.len());
        for demo in &subset {
            let rollout = loaded.net.infer_rollout(
                demo.initial_state(),
                Some(&demo.id),
                &demo.instruction,
                demo.grounding.as_ref(),
                &ctx.encoder,
                &ctx.aliases,
                &eval_cfg.planner,
            )?;
            traces.push(rollout.trace(demo.initial_state(), &demo.instruction));
        }
        std::fs::write(path, serde_json::to_string_pretty(&traces)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }

    let resolved = ResolvedRun {
        command: "eval".into(),
        seed: ctx.seed,
        lr: 0.0,
        epochs: 0,
        planner_prob: 0.0,
        patience: 0,
        tau: loaded.net.config.tau,
        history_mode: format!("{:?}", loaded.net.config.history_mode),
        ablations: loaded
            .net
            .config
            .ablation
            .disabled_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        max_depth: eval_cfg.planner.max_depth,
        max_expansions: eval_cfg.planner.max_expansions,
        workers: eval_cfg.workers,
        sources: ctx.sources.clone(),
    };
    if let Some(path) = &args.report {
        let provenance_json: serde_json::Value =
            serde_json::from_str(&loaded.provenance).unwrap_or(serde_json::Value::Null);
        let file = ReportFile {
            config: &resolved,
            checkpoint_provenance: provenance_json,
            checkpoint_epoch: loaded.epoch,
            split: &args.split,
            generalization: args.generalization.as_deref(),
            report: &report,
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gradcheck

#[derive(Args)]
pub struct GradcheckArgs {
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Failure threshold on the max relative error.
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
}

pub fn cmd_gradcheck(_ctx: &Context, args: &GradcheckArgs) -> Result<()> {
    let report = fixtures::run_gradcheck(args.eps)?;
    println!(
        "checked {} coordinates over the three-object fixture",
        report.coordinates_checked
    );
    let mut groups = report.per_group.clone();
    groups.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (name, err) in &groups {
        println!("  {name:<24} worst {err:.3e}");
    }
    println!("max relative error: {:.3e}", report.max_rel_error);
    if report.max_rel_error >= args.threshold {
        return Err(anyhow::Error::new(NumericFailure(format!(
            "gradient check failed: {:.3e} >= {:.3e}",
            report.max_rel_error, args.threshold
        ))));
    }
    println!("gradient check passed (< {:.1e})", args.threshold);
    Ok(())
}

// ---------------------------------------------------------------------------
// inspect

#[derive(Args)]
pub struct InspectArgs {
    /// Summarize a bundled or loaded schema by name.
    #[arg(long)]
    schema: Option<String>,
    /// Summarize a dataset file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Summarize a checkpoint file.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

pub fn cmd_inspect(ctx: &Context, args: &InspectArgs) -> Result<()> {
    let mut did_something = false;
    if let Some(name) = &args.schema {
        let schema = ctx.schemas.get(name)?;
        println!("schema {}", schema.name);
        println!("  objects:    {}", schema.instances.len());
        println!("  classes:    {}", schema.classes.len());
        println!("  states:     {}", schema.states.join(", "));
        println!("  properties: {}", schema.properties.join(", "));
        println!(
            "  relations:  {}",
            schema
                .relations
                .iter()
                .map(|r| r.name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        );
        println!(
            "  actions:    {}",
            schema
                .actions
                .iter()
                .map(|a| a.name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        );
        did_something = true;
    }
    if let Some(path) = &args.data {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let demos = load_dataset(&text, &ctx.schemas)?;
        let mut by_domain = std::collections::BTreeMap::new();
        let mut lengths = std::collections::BTreeMap::new();
        for d in &demos {
            *by_domain.entry(d.domain.clone()).or_insert(0usize) += 1;
            *lengths.entry(d.actions.len()).or_insert(0usize) += 1;
        }
        println!("dataset {} ({} demos)", path.display(), demos.len());
        println!("  by domain: {by_domain:?}");
        println!("  plan-length histogram: {lengths:?}");
        let mean: f64 =
            demos.iter().map(|d| d.actions.len() as f64).sum::<f64>() / demos.len().max(1) as f64;
        println!("  mean plan length: {mean:.2}");
        did_something = true;
    }
    if let Some(path) = &args.checkpoint {
        let loaded = checkpoint::load(path).map_err(goalnet_core::model::ModelError::Nn)?;
        use goalnet_core::nn::Parameters;
        println!("checkpoint {}", path.display());
        println!("  epoch: {}", loaded.epoch);
        println!("  parameters: {}", loaded.net.parameter_count());
        println!(
            "  ablations: {:?}",
            loaded.net.config.ablation.disabled_names()
        );
        println!("  tau: {}", loaded.net.config.tau);
        println!("  provenance: {}", loaded.provenance);
        did_something = true;
    }
    if !did_something {
        bail!("nothing to inspect; pass --schema, --data or --checkpoint");
    }
    Ok(())
}

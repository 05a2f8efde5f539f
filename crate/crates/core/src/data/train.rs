//! Teacher-forced sequence training with probabilistic SymSim self-rollout.
//!
//! Per datum and step, the next fed state is the recorded ground-truth
//! successor with probability 1-p, or the SymSim update of the model's own
//! prediction with probability p. Targets always come from the recorded
//! single-step diffs. The loss is the sum of the six per-head BCE terms,
//! averaged over the steps of the datum.

use serde::Serialize;

use crate::data::dataset::{extract_supervision, Demonstration};
use crate::data::DataError;
use crate::domain::{GoalSpec, WorldState};
use crate::lang::{AliasMap, SentenceEncoder};
use crate::model::net::{history_events, DatumInputs, HistEvent, StepCache, StepTargets};
use crate::model::{GoalNet, ModelError};
use crate::nn::{AdamState, DenseCache, NnError, Parameters};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub decay_every: usize,
    pub decay_factor: f64,
    /// Probability of feeding the SymSim update of the model's own
    /// prediction instead of the recorded next state.
    pub planner_prob: f64,
    pub seed: u64,
    /// Early-stopping patience on validation loss, in epochs.
    pub patience: usize,
    pub gumbel_noise: bool,
    /// Every N epochs, score the validation split with the four metrics and
    /// attach the snapshot to the log record; 0 disables snapshots.
    pub metric_snapshot_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-4,
            max_epochs: 100,
            decay_every: 50,
            decay_factor: 0.2,
            planner_prob: 0.2,
            seed: 0,
            patience: 15,
            gumbel_noise: true,
            metric_snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Absent when no validation split was supplied.
    pub val_loss: Option<f64>,
    pub lr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<MetricSnapshot>,
}

/// Goal-reaching metrics over the validation split at one epoch.
#[derive(Debug, Clone, Serialize)]
pub struct MetricSnapshot {
    pub sji: f64,
    pub ied: f64,
    pub f1: f64,
    pub grr: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Best-validation parameters.
    pub net: GoalNet,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub epochs_run: usize,
    pub stopped_early: bool,
    pub log: Vec<EpochRecord>,
}

struct PreparedDemo {
    inputs: DatumInputs,
    states: Vec<WorldState>,
    supervision: Vec<GoalSpec>,
    targets: Vec<StepTargets>,
}

fn prepare(
    demos: &[Demonstration],
    encoder: &SentenceEncoder,
    aliases: &AliasMap,
    net: &GoalNet,
) -> Result<Vec<PreparedDemo>, ModelError> {
    demos
        .iter()
        .map(|d| {
            let inputs = DatumInputs::prepare(
                d.initial_state(),
                Some(&d.id),
                &d.instruction,
                d.grounding.as_ref(),
                encoder,
                aliases,
                &net.config,
            )?;
            let supervision = extract_supervision(d);
            let targets = supervision
                .iter()
                .map(|g| StepTargets::from_goal(g, &net.config))
                .collect();
            Ok(PreparedDemo {
                inputs,
                states: d.states.clone(),
                supervision,
                targets,
            })
        })
        .collect()
}

/// Resumable trainer: epochs can be run in blocks so callers may interleave
/// evaluation without disturbing determinism.
pub struct Trainer<'a> {
    net: GoalNet,
    adam: AdamState,
    train: Vec<PreparedDemo>,
    val: Vec<PreparedDemo>,
    val_demos: Vec<Demonstration>,
    encoder: &'a SentenceEncoder,
    aliases: &'a AliasMap,
    pub cfg: TrainConfig,
    rng: Rng,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        net: GoalNet,
        train_demos: &[Demonstration],
        val_demos: &[Demonstration],
        encoder: &'a SentenceEncoder,
        aliases: &'a AliasMap,
        cfg: TrainConfig,
    ) -> Result<Self, DataError> {
        if train_demos.is_empty() {
            return Err(DataError::EmptyTrainSet);
        }
        let train = prepare(train_demos, encoder, aliases, &net)?;
        let val = prepare(val_demos, encoder, aliases, &net)?;
        let mut adam = AdamState::new(cfg.lr);
        adam.decay_every = cfg.decay_every;
        adam.decay_factor = cfg.decay_factor;
        let rng = Rng::new(cfg.seed ^ 0x7ea1);
        Ok(Trainer {
            net,
            adam,
            train,
            val,
            val_demos: val_demos.to_vec(),
            encoder,
            aliases,
            cfg,
            rng,
            epoch: 0,
        })
    }

    pub fn net(&self) -> &GoalNet {
        &self.net
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// One pass over all training demos in seeded-shuffled order; returns
    /// (mean train loss, mean validation loss).
    pub fn run_epoch(&mut self) -> Result<EpochRecord, ModelError> {
        self.adam.set_epoch(self.epoch);
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        self.rng.shuffle(&mut order);
        let mut total = 0.0;
        for &di in &order {
            let loss = self.train_datum(di)?;
            if !loss.is_finite() {
                return Err(ModelError::Nn(NnError::Diverged {
                    epoch: self.epoch,
                    message: format!("non-finite loss on datum {di}"),
                }));
            }
            total += loss;
        }
        let train_loss = total / self.train.len() as f64;
        let val_loss = self.validation_loss()?;
        if val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(ModelError::Nn(NnError::Diverged {
                epoch: self.epoch,
                message: "non-finite validation loss".into(),
            }));
        }
        let snapshot = if self.cfg.metric_snapshot_every > 0
            && (self.epoch + 1).is_multiple_of(self.cfg.metric_snapshot_every)
        {
            self.validation_snapshot()?
        } else {
            None
        };
        let record = EpochRecord {
            epoch: self.epoch,
            train_loss,
            val_loss,
            lr: self.adam.effective_lr(),
            snapshot,
        };
        self.epoch += 1;
        Ok(record)
    }

    fn train_datum(&mut self, di: usize) -> Result<f64, ModelError> {
        let steps = self.train[di].supervision.len();
        let instr_cache = self.net.project_instruction(&self.train[di].inputs.sent_vec);
        let l_vec = instr_cache.out.clone();

        let mut ctx = self.net.initial_context();
        let mut events: Vec<HistEvent> = Vec::new();
        let mut fed = self.train[di].states[0].clone();
        let mut caches: Vec<(StepCache, StepTargets)> = Vec::with_capacity(steps);
        let mut loss_sum = 0.0;
        for j in 0..steps {
            let demo = &self.train[di];
            let noise = if self.cfg.gumbel_noise {
                Some(&mut self.rng)
            } else {
                None
            };
            let (cache, prediction, new_ctx) =
                self.net
                    .step_forward(&fed, &demo.inputs, &l_vec, &ctx, &events, noise)?;
            loss_sum += self.net.step_loss(&cache, &demo.targets[j])?;
            caches.push((cache, demo.targets[j].clone()));
            ctx = new_ctx;
            if j + 1 < steps {
                if self.rng.coin(self.cfg.planner_prob) {
                    // Low-fidelity self-rollout branch.
                    let goal = prediction.goal();
                    fed = crate::planner::symsim_step(&fed, &goal);
                    events = history_events(&goal, &demo.inputs, &self.net.config);
                } else {
                    fed = demo.states[j + 1].clone();
                    events =
                        history_events(&demo.supervision[j], &demo.inputs, &self.net.config);
                }
            }
        }
        let scale = 1.0 / steps as f64;
        self.net.zero_grads();
        self.net.backward_datum(&instr_cache, &caches, scale);
        self.adam.apply(&mut self.net);
        Ok(loss_sum * scale)
    }

    /// Rollout-based metric snapshot over the validation demos.
    fn validation_snapshot(&self) -> Result<Option<MetricSnapshot>, ModelError> {
        if self.val_demos.is_empty() {
            return Ok(None);
        }
        let report = crate::metrics::evaluate(
            &self.val_demos,
            &self.net,
            self.encoder,
            self.aliases,
            &crate::metrics::EvalConfig::default(),
        )
        .map_err(|e| match e {
            crate::metrics::EvalError::Model(m) => m,
            crate::metrics::EvalError::Domain(d) => ModelError::Domain(d),
            crate::metrics::EvalError::Lang(l) => ModelError::Lang(l),
        })?;
        Ok(Some(MetricSnapshot {
            sji: report.mean_sji,
            ied: report.mean_ied,
            f1: report.mean_f1,
            grr: report.mean_grr,
        }))
    }

    /// Mean teacher-forced loss over the validation demos, noise off;
    /// `None` when no validation split was supplied.
    pub fn validation_loss(&self) -> Result<Option<f64>, ModelError> {
        if self.val.is_empty() {
            return Ok(None);
        }
        let mut total = 0.0;
        for demo in &self.val {
            total += datum_loss(&self.net, demo)?;
        }
        Ok(Some(total / self.val.len() as f64))
    }
}

/// Pure teacher-forced datum loss with noise off; shared by validation and
/// the gradient-check fixture. Returns the caches when requested so the
/// reverse pass can run on them.
type ForwardTrace = (f64, DenseCache, Vec<(StepCache, StepTargets)>);

fn datum_forward(
    net: &GoalNet,
    demo: &PreparedDemo,
    keep_caches: bool,
) -> Result<ForwardTrace, ModelError> {
    let steps = demo.supervision.len();
    let instr_cache = net.project_instruction(&demo.inputs.sent_vec);
    let mut ctx = net.initial_context();
    let mut events: Vec<HistEvent> = Vec::new();
    let mut caches = Vec::new();
    let mut loss_sum = 0.0;
    for j in 0..steps {
        let fed = &demo.states[j];
        let (cache, _prediction, new_ctx) =
            net.step_forward(fed, &demo.inputs, &instr_cache.out, &ctx, &events, None)?;
        loss_sum += net.step_loss(&cache, &demo.targets[j])?;
        if keep_caches {
            caches.push((cache, demo.targets[j].clone()));
        }
        ctx = new_ctx;
        if j + 1 < steps {
            events = history_events(&demo.supervision[j], &demo.inputs, &net.config);
        }
    }
    Ok((loss_sum / steps as f64, instr_cache, caches))
}

fn datum_loss(net: &GoalNet, demo: &PreparedDemo) -> Result<f64, ModelError> {
    Ok(datum_forward(net, demo, false)?.0)
}

/// Deterministic teacher-forced loss over one demonstration, packaged for
/// finite-difference verification of the full six-head loss.
pub struct DatumLossFixture {
    prepared: PreparedDemo,
}

impl DatumLossFixture {
    pub fn new(
        demo: &Demonstration,
        encoder: &SentenceEncoder,
        aliases: &AliasMap,
        net: &GoalNet,
    ) -> Result<Self, ModelError> {
        let mut prepared = prepare(std::slice::from_ref(demo), encoder, aliases, net)?;
        Ok(DatumLossFixture {
            prepared: prepared.remove(0),
        })
    }

    pub fn loss(&self, net: &GoalNet) -> Result<f64, ModelError> {
        datum_loss(net, &self.prepared)
    }

    /// Forward plus reverse pass; gradients accumulate into `net`.
    pub fn backward(&self, net: &mut GoalNet) -> Result<f64, ModelError> {
        let (loss, instr_cache, caches) = datum_forward(net, &self.prepared, true)?;
        let scale = 1.0 / self.prepared.supervision.len() as f64;
        net.backward_datum(&instr_cache, &caches, scale);
        Ok(loss)
    }
}

/// Full training run with early stopping; returns the best-validation
/// checkpoint and the per-epoch log.
pub fn train(
    net: GoalNet,
    train_demos: &[Demonstration],
    val_demos: &[Demonstration],
    encoder: &SentenceEncoder,
    aliases: &AliasMap,
    cfg: TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    let patience = cfg.patience;
    let max_epochs = cfg.max_epochs;
    let mut trainer =
        Trainer::new(net, train_demos, val_demos, encoder, aliases, cfg).map_err(map_data_err)?;
    let mut log = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_net = trainer.net.clone();
    let mut since_best = 0usize;
    let mut stopped_early = false;
    for _ in 0..max_epochs {
        let record = trainer.run_epoch()?;
        let val = record.val_loss.unwrap_or(record.train_loss);
        if val < best_val {
            best_val = val;
            best_epoch = record.epoch;
            best_net = trainer.net.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        log.push(record);
        if since_best >= patience {
            stopped_early = true;
            break;
        }
    }
    Ok(TrainOutcome {
        net: best_net,
        best_epoch,
        best_val_loss: best_val,
        epochs_run: trainer.epoch,
        stopped_early,
        log,
    })
}

fn map_data_err(e: DataError) -> ModelError {
    match e {
        DataError::Model(m) => m,
        other => ModelError::Nn(NnError::Checkpoint(other.to_string())),
    }
}

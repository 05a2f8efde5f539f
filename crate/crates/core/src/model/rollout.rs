//! Inference-time rollout: predict a constraint pair, plan it, execute, and
//! repeat until the model signals stop or the iteration cap is reached.

use serde::Serialize;

use crate::domain::{GoalSpec, WorldState};
use crate::lang::AliasMap;
use crate::lang::SentenceEncoder;
use crate::model::net::{history_events, ConstraintPrediction, DatumInputs};
use crate::model::params::GoalNet;
use crate::model::ModelError;
use crate::planner::{rollout_execute, PlannerConfig, RolloutResult};

/// Hard cap on predict-plan iterations.
pub const MAX_ROLLOUT_STEPS: usize = 30;

#[derive(Debug, Clone, Serialize)]
pub struct StepTrace {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub planned_actions: Vec<String>,
    pub plan_ok: bool,
}

#[derive(Debug, Serialize)]
pub struct RolloutTrace {
    pub instruction: String,
    pub steps: Vec<StepTrace>,
    pub actions: Vec<String>,
    pub final_relations: Vec<String>,
    pub hit_cap: bool,
}

#[derive(Debug)]
pub struct InferRollout {
    pub result: RolloutResult,
    pub predictions: Vec<ConstraintPrediction>,
}

impl GoalNet {
    /// Deterministic (noise-off) rollout of the model against the planner.
    #[allow(clippy::too_many_arguments)]
    pub fn infer_rollout(
        &self,
        start: &WorldState,
        instruction_id: Option<&str>,
        instruction: &str,
        groundings: Option<&std::collections::BTreeMap<String, String>>,
        encoder: &SentenceEncoder,
        aliases: &AliasMap,
        planner_cfg: &PlannerConfig,
    ) -> Result<InferRollout, ModelError> {
        let inputs = DatumInputs::prepare(
            start,
            instruction_id,
            instruction,
            groundings,
            encoder,
            aliases,
            &self.config,
        )?;
        let instr_cache = self.project_instruction(&inputs.sent_vec);
        let l_vec = instr_cache.out;

        let mut ctx = self.initial_context();
        let mut events = Vec::new();
        let mut predictions: Vec<ConstraintPrediction> = Vec::new();
        let mut step_error: Option<ModelError> = None;
        let result = rollout_execute(
            start,
            |state: &WorldState| -> GoalSpec {
                if step_error.is_some() {
                    return GoalSpec::default();
                }
                match self.step_forward(state, &inputs, &l_vec, &ctx, &events, None) {
                    Ok((_cache, prediction, new_ctx)) => {
                        let goal = prediction.goal();
                        events = history_events(&goal, &inputs, &self.config);
                        ctx = new_ctx;
                        predictions.push(prediction);
                        goal
                    }
                    Err(e) => {
                        step_error = Some(e);
                        GoalSpec::default()
                    }
                }
            },
            planner_cfg,
            MAX_ROLLOUT_STEPS,
        );
        if let Some(e) = step_error {
            return Err(e);
        }
        Ok(InferRollout {
            result,
            predictions,
        })
    }
}

impl InferRollout {
    pub fn trace(&self, start: &WorldState, instruction: &str) -> RolloutTrace {
        let mut steps = Vec::new();
        let mut action_cursor = 0usize;
        for (i, pred) in self.predictions.iter().enumerate() {
            let failed = self.result.failed_steps.contains(&i);
            let count = self.result.step_action_counts.get(i).copied().unwrap_or(0);
            let planned = self.result.actions[action_cursor..action_cursor + count]
                .iter()
                .map(|a| a.to_string(start.universe()))
                .collect();
            action_cursor += count;
            steps.push(StepTrace {
                positive: pred
                    .positive
                    .iter()
                    .map(|p| start.pred_to_string(p))
                    .collect(),
                negative: pred
                    .negative
                    .iter()
                    .map(|p| start.pred_to_string(p))
                    .collect(),
                planned_actions: planned,
                plan_ok: !failed,
            });
        }
        RolloutTrace {
            instruction: instruction.to_string(),
            steps,
            actions: self
                .result
                .actions
                .iter()
                .map(|a| a.to_string(start.universe()))
                .collect(),
            final_relations: self
                .result
                .final_state()
                .relations()
                .iter()
                .map(|p| self.result.final_state().pred_to_string(p))
                .collect(),
            hit_cap: self.result.hit_cap,
        }
    }
}

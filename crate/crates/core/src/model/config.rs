//! Model dimensions, ablation switches and decoding configuration.

use serde::{Deserialize, Serialize};

use crate::domain::DomainSchema;

pub const PRELU_SLOPE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub word_dim: usize,
    pub sent_dim: usize,
    pub hidden: usize,
    pub prop_dim: usize,
    pub state_dim: usize,
    /// Relation vocabulary size |S| (binary + unary state kinds).
    pub rel_vocab: usize,
    pub binary_rels: usize,
    pub max_objects: usize,
    pub rel_enc_depth: usize,
    pub rel_enc_out: usize,
}

impl ModelDims {
    /// Shipped configuration: 300-d word embeddings, 384-d sentence
    /// embeddings, 128-wide hidden layers, scalar relational output.
    pub fn for_schema(schema: &DomainSchema) -> Self {
        ModelDims {
            word_dim: crate::lang::WORD_DIM,
            sent_dim: crate::lang::SENT_DIM,
            hidden: 128,
            prop_dim: schema.properties.len(),
            state_dim: schema.states.len(),
            rel_vocab: schema.relations.len(),
            binary_rels: schema.binary_rel_count,
            max_objects: schema.max_objects,
            rel_enc_depth: 1,
            rel_enc_out: 1,
        }
    }

    /// Reduced widths for the gradient-check fixture; the architecture and
    /// code paths are identical, only the layer sizes shrink so that central
    /// differences over every coordinate stay cheap.
    pub fn reduced(schema: &DomainSchema, word_dim: usize, sent_dim: usize, hidden: usize) -> Self {
        ModelDims {
            word_dim,
            sent_dim,
            hidden,
            ..Self::for_schema(schema)
        }
    }

    pub fn obj_feat(&self) -> usize {
        self.prop_dim + self.state_dim + self.word_dim + self.rel_enc_out
    }

    pub fn adj_len(&self) -> usize {
        self.binary_rels * self.max_objects
    }

    /// Relation head width: the vocabulary plus the reserved NULL entry used
    /// to signal an empty head (both heads NULL means stop).
    pub fn rel_head(&self) -> usize {
        self.rel_vocab + 1
    }

    pub fn null_rel(&self) -> usize {
        self.rel_vocab
    }

    pub fn hist_in(&self) -> usize {
        self.rel_vocab + 2 * self.word_dim
    }

    pub fn goal_in(&self) -> usize {
        3 * self.hidden + self.word_dim
    }
}

/// One switch per ablation row; everything on is the full model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    pub relational: bool,
    pub instance_grounding: bool,
    pub positive_head: bool,
    pub negative_head: bool,
    pub temporal_context: bool,
    pub goal_object_attention: bool,
    pub instruction_attention: bool,
    pub grammar_mask: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        AblationFlags {
            relational: true,
            instance_grounding: true,
            positive_head: true,
            negative_head: true,
            temporal_context: true,
            goal_object_attention: true,
            instruction_attention: true,
            grammar_mask: true,
        }
    }
}

impl AblationFlags {
    /// Flag names accepted by `--ablate`.
    pub const NAMES: [&'static str; 8] = [
        "relational-info",
        "instance-grounding",
        "positive-head",
        "negative-head",
        "temporal-context",
        "goal-object-attention",
        "instruction-attention",
        "grammar-mask",
    ];

    pub fn disable(&mut self, name: &str) -> Result<(), String> {
        match name {
            "relational-info" => self.relational = false,
            "instance-grounding" => self.instance_grounding = false,
            "positive-head" => self.positive_head = false,
            "negative-head" => self.negative_head = false,
            "temporal-context" => self.temporal_context = false,
            "goal-object-attention" => self.goal_object_attention = false,
            "instruction-attention" => self.instruction_attention = false,
            "grammar-mask" => self.grammar_mask = false,
            other => {
                return Err(format!(
                    "unknown ablation `{other}`; expected one of {:?}",
                    Self::NAMES
                ))
            }
        }
        Ok(())
    }

    pub fn disabled_names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.relational {
            out.push("relational-info");
        }
        if !self.instance_grounding {
            out.push("instance-grounding");
        }
        if !self.positive_head {
            out.push("positive-head");
        }
        if !self.negative_head {
            out.push("negative-head");
        }
        if !self.temporal_context {
            out.push("temporal-context");
        }
        if !self.goal_object_attention {
            out.push("goal-object-attention");
        }
        if !self.instruction_attention {
            out.push("instruction-attention");
        }
        if !self.grammar_mask {
            out.push("grammar-mask");
        }
        out
    }
}

/// What feeds the temporal history cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HistoryMode {
    /// Default: only the previous step's decoded positive predicate.
    PositiveOnly,
    /// Exploration variant: previous positive and negative predicates.
    PositiveAndNegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalNetConfig {
    pub dims: ModelDims,
    pub ablation: AblationFlags,
    /// Gumbel-softmax temperature.
    pub tau: f64,
    pub history_mode: HistoryMode,
    pub seed: u64,
}

impl GoalNetConfig {
    pub fn new(dims: ModelDims, seed: u64) -> Self {
        GoalNetConfig {
            dims,
            ablation: AblationFlags::default(),
            tau: 0.1,
            history_mode: HistoryMode::PositiveOnly,
            seed,
        }
    }
}

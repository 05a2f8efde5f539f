//! All trainable weights of the constraint predictor.

use serde::{Deserialize, Serialize};

use crate::model::config::{GoalNetConfig, ModelDims, PRELU_SLOPE};
use crate::nn::{
    visit_dense, visit_dense_mut, visit_lstm, visit_lstm_mut, Activation, DenseLayer, Parameters,
    RecurrentCell, Tensor,
};
use crate::rng::Rng;

const REL_ENC_HIDDEN: usize = 32;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoalNetParams {
    /// Relational adjacency encoder; hidden layers PReLU, final layer sigmoid.
    pub rel_encoder: Vec<DenseLayer>,
    /// Sentence embedding projection.
    pub instr_proj: DenseLayer,
    /// Instruction-conditioned attention scorer over objects.
    pub attn: DenseLayer,
    /// Task projection after attention pooling.
    pub task_proj: DenseLayer,
    /// State-conditioned self-attention scorer over instruction objects.
    pub obj_attn: DenseLayer,
    /// Temporal history cell.
    pub history: RecurrentCell,
    /// Shared layer in front of the six decoder heads.
    pub goal_shared: DenseLayer,
    pub pos_rel: DenseLayer,
    pub pos_obj1: DenseLayer,
    pub pos_obj2: DenseLayer,
    pub neg_rel: DenseLayer,
    pub neg_obj1: DenseLayer,
    pub neg_obj2: DenseLayer,
}

impl GoalNetParams {
    pub fn new(dims: &ModelDims, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let mut rel_encoder = Vec::with_capacity(dims.rel_enc_depth);
        for i in 0..dims.rel_enc_depth {
            let in_dim = if i == 0 { dims.adj_len() } else { REL_ENC_HIDDEN };
            let last = i + 1 == dims.rel_enc_depth;
            let out_dim = if last { dims.rel_enc_out } else { REL_ENC_HIDDEN };
            let act = if last {
                Activation::Sigmoid
            } else {
                Activation::PRelu(PRELU_SLOPE)
            };
            rel_encoder.push(DenseLayer::new(in_dim, out_dim, act, &mut rng));
        }
        let prelu = Activation::PRelu(PRELU_SLOPE);
        GoalNetParams {
            rel_encoder,
            instr_proj: DenseLayer::new(dims.sent_dim, dims.hidden, prelu, &mut rng),
            attn: DenseLayer::new(
                dims.obj_feat() + dims.hidden,
                1,
                Activation::Sigmoid,
                &mut rng,
            ),
            task_proj: DenseLayer::new(dims.obj_feat(), dims.hidden, prelu, &mut rng),
            obj_attn: DenseLayer::new(
                dims.word_dim + dims.hidden,
                1,
                Activation::Sigmoid,
                &mut rng,
            ),
            history: RecurrentCell::new(dims.hist_in(), dims.hidden, &mut rng),
            goal_shared: DenseLayer::new(dims.goal_in(), dims.hidden, prelu, &mut rng),
            pos_rel: DenseLayer::new(dims.hidden, dims.rel_head(), Activation::Linear, &mut rng),
            pos_obj1: DenseLayer::new(
                dims.hidden + dims.rel_head(),
                dims.max_objects,
                Activation::Linear,
                &mut rng,
            ),
            pos_obj2: DenseLayer::new(
                dims.hidden + dims.rel_head() + dims.max_objects,
                dims.max_objects,
                Activation::Linear,
                &mut rng,
            ),
            neg_rel: DenseLayer::new(dims.hidden, dims.rel_head(), Activation::Linear, &mut rng),
            neg_obj1: DenseLayer::new(
                dims.hidden + dims.rel_head(),
                dims.max_objects,
                Activation::Linear,
                &mut rng,
            ),
            neg_obj2: DenseLayer::new(
                dims.hidden + dims.rel_head() + dims.max_objects,
                dims.max_objects,
                Activation::Linear,
                &mut rng,
            ),
        }
    }
}

impl Parameters for GoalNetParams {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        for (i, layer) in self.rel_encoder.iter().enumerate() {
            visit_dense(&format!("rel_encoder.{i}"), layer, f);
        }
        visit_dense("instr_proj", &self.instr_proj, f);
        visit_dense("attn", &self.attn, f);
        visit_dense("task_proj", &self.task_proj, f);
        visit_dense("obj_attn", &self.obj_attn, f);
        visit_lstm("history", &self.history, f);
        visit_dense("goal_shared", &self.goal_shared, f);
        visit_dense("pos_rel", &self.pos_rel, f);
        visit_dense("pos_obj1", &self.pos_obj1, f);
        visit_dense("pos_obj2", &self.pos_obj2, f);
        visit_dense("neg_rel", &self.neg_rel, f);
        visit_dense("neg_obj1", &self.neg_obj1, f);
        visit_dense("neg_obj2", &self.neg_obj2, f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (i, layer) in self.rel_encoder.iter_mut().enumerate() {
            visit_dense_mut(&format!("rel_encoder.{i}"), layer, f);
        }
        visit_dense_mut("instr_proj", &mut self.instr_proj, f);
        visit_dense_mut("attn", &mut self.attn, f);
        visit_dense_mut("task_proj", &mut self.task_proj, f);
        visit_dense_mut("obj_attn", &mut self.obj_attn, f);
        visit_lstm_mut("history", &mut self.history, f);
        visit_dense_mut("goal_shared", &mut self.goal_shared, f);
        visit_dense_mut("pos_rel", &mut self.pos_rel, f);
        visit_dense_mut("pos_obj1", &mut self.pos_obj1, f);
        visit_dense_mut("pos_obj2", &mut self.pos_obj2, f);
        visit_dense_mut("neg_rel", &mut self.neg_rel, f);
        visit_dense_mut("neg_obj1", &mut self.neg_obj1, f);
        visit_dense_mut("neg_obj2", &mut self.neg_obj2, f);
    }
}

/// Parameter set plus the configuration that fixes its shapes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoalNet {
    pub config: GoalNetConfig,
    pub params: GoalNetParams,
}

impl GoalNet {
    pub fn new(config: GoalNetConfig) -> Self {
        let params = GoalNetParams::new(&config.dims, config.seed);
        GoalNet { config, params }
    }
}

impl Parameters for GoalNet {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        self.params.visit(f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        self.params.visit_mut(f);
    }
}

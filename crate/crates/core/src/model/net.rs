//! Forward and backward passes of the constraint predictor.
//!
//! One step encodes the world state, attends with the instruction, folds in
//! the constraint history and decodes a positive and a negative constraint
//! through six autoregressive heads. Caches from the forward pass drive an
//! explicit reverse pass; the history cell backpropagates through time across
//! the steps of a datum.

use std::collections::BTreeSet;

use crate::domain::{adjacency_vector, feasible_fillers, GoalSpec, Predicate, Slot, WorldState};
use crate::lang::{extract_goal_objects, AliasMap, SentenceEncoder};
use crate::model::config::{GoalNetConfig, HistoryMode};
use crate::model::params::GoalNet;
use crate::model::ModelError;
use crate::nn::{
    bce_backward, bce_loss, gumbel_softmax, gumbel_softmax_backward, softmax, softmax_backward,
    DenseCache, LstmCache,
};
use crate::rng::Rng;

/// Per-datum constants: the sentence vector, instruction-object embeddings
/// (with grounded instances appended) and per-object class embeddings.
#[derive(Debug, Clone)]
pub struct DatumInputs {
    pub sent_vec: Vec<f64>,
    pub goal_entries: Vec<GoalEntry>,
    pub obj_embs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct GoalEntry {
    pub label: String,
    pub emb: Vec<f64>,
}

impl DatumInputs {
    pub fn prepare(
        state: &WorldState,
        instruction_id: Option<&str>,
        instruction: &str,
        groundings: Option<&std::collections::BTreeMap<String, String>>,
        encoder: &SentenceEncoder,
        aliases: &AliasMap,
        config: &GoalNetConfig,
    ) -> Result<Self, ModelError> {
        let schema = state.schema();
        let sent_vec = encoder.encode(instruction_id, instruction)?;
        let extracted = extract_goal_objects(instruction, schema, aliases, groundings);
        let table = encoder.table();
        let mut goal_entries: Vec<GoalEntry> = extracted
            .tokens
            .iter()
            .map(|t| GoalEntry {
                label: t.clone(),
                emb: table.embed(t),
            })
            .collect();
        if config.ablation.instance_grounding {
            for (token, id) in &extracted.groundings {
                if let Ok(idx) = state.universe().index_of(id) {
                    let class = &state.universe().object(idx).class;
                    goal_entries.push(GoalEntry {
                        label: format!("{token}={id}"),
                        emb: table.embed(class),
                    });
                }
            }
        }
        let obj_embs = state
            .universe()
            .objects
            .iter()
            .map(|o| table.embed(&o.class))
            .collect();
        Ok(DatumInputs {
            sent_vec,
            goal_entries,
            obj_embs,
        })
    }
}

/// Hidden/cell pair of the history LSTM plus the event pending encoding.
#[derive(Debug, Clone)]
pub struct TemporalContext {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl TemporalContext {
    pub fn zeros(hidden: usize) -> Self {
        TemporalContext {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// One history event: a decoded (or teacher-forced) predicate rendered as
/// `[one-hot relation, subject embedding, object embedding]`.
#[derive(Debug, Clone)]
pub struct HistEvent {
    pub rel: usize,
    pub subj_emb: Vec<f64>,
    pub obj_emb: Option<Vec<f64>>,
}

impl HistEvent {
    pub fn from_predicate(p: &Predicate, inputs: &DatumInputs) -> Self {
        HistEvent {
            rel: p.rel as usize,
            subj_emb: inputs.obj_embs[p.subject as usize].clone(),
            obj_emb: p.object.map(|o| inputs.obj_embs[o as usize].clone()),
        }
    }
}

/// Events feeding the history cell for the next step, derived from a
/// constraint pair per the configured history mode.
pub fn history_events(
    goal: &GoalSpec,
    inputs: &DatumInputs,
    config: &GoalNetConfig,
) -> Vec<HistEvent> {
    let mut events = Vec::new();
    if let Some(p) = goal.plus.iter().next() {
        events.push(HistEvent::from_predicate(p, inputs));
    }
    if config.history_mode == HistoryMode::PositiveAndNegative {
        if let Some(p) = goal.minus.iter().next() {
            events.push(HistEvent::from_predicate(p, inputs));
        }
    }
    events
}

/// Decoded singleton constraint pair plus the six pre-mask likelihoods.
#[derive(Debug, Clone, Default)]
pub struct ConstraintPrediction {
    pub pos_rel_probs: Vec<f64>,
    pub pos_o1_probs: Vec<f64>,
    pub pos_o2_probs: Vec<f64>,
    pub neg_rel_probs: Vec<f64>,
    pub neg_o1_probs: Vec<f64>,
    pub neg_o2_probs: Vec<f64>,
    pub positive: BTreeSet<Predicate>,
    pub negative: BTreeSet<Predicate>,
}

impl ConstraintPrediction {
    pub fn goal(&self) -> GoalSpec {
        // A predicate decoded on both heads keeps only the positive role.
        let minus: BTreeSet<Predicate> = self
            .negative
            .difference(&self.positive)
            .copied()
            .collect();
        GoalSpec {
            plus: self.positive.clone(),
            minus,
        }
    }

    /// Both heads decoded NULL.
    pub fn is_stop(&self) -> bool {
        self.positive.is_empty() && self.negative.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct HeadCache {
    pub rel_cache: DenseCache,
    pub rel_probs: Vec<f64>,
    pub phi_rel: Vec<f64>,
    pub o1_cache: DenseCache,
    pub o1_probs: Vec<f64>,
    pub phi_o1: Vec<f64>,
    pub o2_cache: DenseCache,
    pub o2_probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StepCache {
    pub n_objects: usize,
    pub obj_feats: Vec<Vec<f64>>,
    pub rel_caches: Vec<Vec<DenseCache>>,
    pub attn_caches: Vec<DenseCache>,
    pub alphas: Vec<f64>,
    pub pooled: Vec<f64>,
    pub task_cache: DenseCache,
    pub obj_attn_caches: Vec<DenseCache>,
    pub eps: Vec<f64>,
    pub l_obj: Vec<f64>,
    pub hist_caches: Vec<LstmCache>,
    pub eta: Vec<f64>,
    pub goal_cache: DenseCache,
    pub pos: Option<HeadCache>,
    pub neg: Option<HeadCache>,
}

/// Per-step supervision targets: multi-hot rows for each of the six heads,
/// NULL-hot relation rows when a side is empty.
#[derive(Debug, Clone)]
pub struct StepTargets {
    pub pos_rel: Vec<f64>,
    pub pos_o1: Vec<f64>,
    pub pos_o2: Vec<f64>,
    pub neg_rel: Vec<f64>,
    pub neg_o1: Vec<f64>,
    pub neg_o2: Vec<f64>,
}

impl StepTargets {
    pub fn from_goal(goal: &GoalSpec, config: &GoalNetConfig) -> Self {
        let dims = &config.dims;
        let side = |set: &BTreeSet<Predicate>| {
            let mut rel = vec![0.0; dims.rel_head()];
            let mut o1 = vec![0.0; dims.max_objects];
            let mut o2 = vec![0.0; dims.max_objects];
            if set.is_empty() {
                rel[dims.null_rel()] = 1.0;
            } else {
                for p in set {
                    rel[p.rel as usize] = 1.0;
                    o1[p.subject as usize] = 1.0;
                    if let Some(o) = p.object {
                        o2[o as usize] = 1.0;
                    }
                }
            }
            (rel, o1, o2)
        };
        let (pos_rel, pos_o1, pos_o2) = side(&goal.plus);
        let (neg_rel, neg_o1, neg_o2) = side(&goal.minus);
        StepTargets {
            pos_rel,
            pos_o1,
            pos_o2,
            neg_rel,
            neg_o1,
            neg_o2,
        }
    }
}

impl GoalNet {
    /// Project the raw sentence vector; computed once per datum.
    pub fn project_instruction(&self, sent_vec: &[f64]) -> DenseCache {
        self.params.instr_proj.forward(sent_vec)
    }

    /// Fresh context for step zero: one zero-input LSTM step on zero state
    /// (skipped entirely when the temporal context is ablated).
    pub fn initial_context(&self) -> TemporalContext {
        TemporalContext::zeros(self.config.dims.hidden)
    }

    /// Run one prediction step. `events` carries the previous step's
    /// constraints (empty at step zero); `noise` enables Gumbel sampling in
    /// the autoregressive forwarding (training only).
    pub fn step_forward(
        &self,
        state: &WorldState,
        inputs: &DatumInputs,
        l_vec: &[f64],
        ctx: &TemporalContext,
        events: &[HistEvent],
        mut noise: Option<&mut Rng>,
    ) -> Result<(StepCache, ConstraintPrediction, TemporalContext), ModelError> {
        let dims = &self.config.dims;
        let flags = &self.config.ablation;
        let n = state.object_count();
        if n > dims.max_objects {
            return Err(ModelError::OverCapacity {
                count: n,
                max: dims.max_objects,
            });
        }

        // World state encoder: s~_o = [p_o, q_o, e_o, r_o^d].
        let mut obj_feats = Vec::with_capacity(n);
        let mut rel_caches = Vec::with_capacity(n);
        for o in 0..n as u16 {
            let inst = state.universe().object(o);
            let mut feat = Vec::with_capacity(dims.obj_feat());
            feat.extend(inst.prop_vec.iter().map(|&b| b as u8 as f64));
            feat.extend(state.q_vec(o).iter().map(|&b| b as u8 as f64));
            feat.extend_from_slice(&inputs.obj_embs[o as usize]);
            if flags.relational {
                let adj = adjacency_vector(o, state)?;
                let mut layer_caches = Vec::with_capacity(self.params.rel_encoder.len());
                let mut x = adj;
                for layer in &self.params.rel_encoder {
                    let cache = layer.forward(&x);
                    x = cache.out.clone();
                    layer_caches.push(cache);
                }
                feat.extend_from_slice(&x);
                rel_caches.push(layer_caches);
            } else {
                feat.extend(std::iter::repeat_n(0.0, dims.rel_enc_out));
                rel_caches.push(Vec::new());
            }
            obj_feats.push(feat);
        }

        // Instruction-conditioned attention over objects.
        let mut attn_caches = Vec::new();
        let mut alphas = Vec::with_capacity(n);
        if flags.instruction_attention {
            for feat in &obj_feats {
                let mut input = feat.clone();
                input.extend_from_slice(l_vec);
                let cache = self.params.attn.forward(&input);
                alphas.push(cache.out[0]);
                attn_caches.push(cache);
            }
        } else {
            alphas = vec![1.0 / n as f64; n];
        }
        let mut pooled = vec![0.0; dims.obj_feat()];
        for (alpha, feat) in alphas.iter().zip(&obj_feats) {
            for (p, f) in pooled.iter_mut().zip(feat) {
                *p += alpha * f;
            }
        }
        let task_cache = self.params.task_proj.forward(&pooled);
        let s_task = task_cache.out.clone();

        // State-conditioned self-attention over instruction objects.
        let k = inputs.goal_entries.len();
        let mut obj_attn_caches = Vec::new();
        let mut eps = Vec::with_capacity(k);
        if k > 0 {
            if flags.goal_object_attention {
                for entry in &inputs.goal_entries {
                    let mut input = entry.emb.clone();
                    input.extend_from_slice(&s_task);
                    let cache = self.params.obj_attn.forward(&input);
                    eps.push(cache.out[0]);
                    obj_attn_caches.push(cache);
                }
            } else {
                eps = vec![1.0 / k as f64; k];
            }
        }
        let mut l_obj = vec![0.0; dims.word_dim];
        for (e, entry) in eps.iter().zip(&inputs.goal_entries) {
            for (l, v) in l_obj.iter_mut().zip(&entry.emb) {
                *l += e * v;
            }
        }

        // Temporal context: one LSTM step per previous-constraint event, or a
        // single zero-input step when there is none.
        let mut hist_caches = Vec::new();
        let (eta, new_ctx) = if flags.temporal_context {
            let mut h = ctx.h.clone();
            let mut c = ctx.c.clone();
            let inputs_list: Vec<Vec<f64>> = if events.is_empty() {
                vec![vec![0.0; dims.hist_in()]]
            } else {
                events.iter().map(|ev| self.encode_event(ev)).collect()
            };
            for x in &inputs_list {
                let cache = self.params.history.step(x, &h, &c);
                h = cache.h.clone();
                c = cache.c.clone();
                hist_caches.push(cache);
            }
            (h.clone(), TemporalContext { h, c })
        } else {
            (vec![0.0; dims.hidden], ctx.clone())
        };

        // Shared goal embedding.
        let mut goal_in = Vec::with_capacity(dims.goal_in());
        goal_in.extend_from_slice(&s_task);
        goal_in.extend_from_slice(&eta);
        goal_in.extend_from_slice(&l_obj);
        goal_in.extend_from_slice(l_vec);
        let goal_cache = self.params.goal_shared.forward(&goal_in);
        let g = goal_cache.out.clone();

        let pos = if flags.positive_head {
            Some(self.head_forward(
                &g,
                &self.params.pos_rel,
                &self.params.pos_obj1,
                &self.params.pos_obj2,
                noise.as_deref_mut(),
            )?)
        } else {
            None
        };
        let neg = if flags.negative_head {
            Some(self.head_forward(
                &g,
                &self.params.neg_rel,
                &self.params.neg_obj1,
                &self.params.neg_obj2,
                noise,
            )?)
        } else {
            None
        };

        let prediction = self.decode(state, pos.as_ref(), neg.as_ref());
        let cache = StepCache {
            n_objects: n,
            obj_feats,
            rel_caches,
            attn_caches,
            alphas,
            pooled,
            task_cache,
            obj_attn_caches,
            eps,
            l_obj,
            hist_caches,
            eta,
            goal_cache,
            pos,
            neg,
        };
        Ok((cache, prediction, new_ctx))
    }

    fn encode_event(&self, ev: &HistEvent) -> Vec<f64> {
        let dims = &self.config.dims;
        let mut x = vec![0.0; dims.hist_in()];
        x[ev.rel] = 1.0;
        let base = dims.rel_vocab;
        x[base..base + dims.word_dim].copy_from_slice(&ev.subj_emb);
        if let Some(obj) = &ev.obj_emb {
            x[base + dims.word_dim..].copy_from_slice(obj);
        }
        x
    }

    fn head_forward(
        &self,
        g: &[f64],
        rel_layer: &crate::nn::DenseLayer,
        o1_layer: &crate::nn::DenseLayer,
        o2_layer: &crate::nn::DenseLayer,
        mut noise: Option<&mut Rng>,
    ) -> Result<HeadCache, ModelError> {
        let tau = self.config.tau;
        let rel_cache = rel_layer.forward(g);
        let rel_probs = softmax(&rel_cache.out);
        let phi_rel = gumbel_softmax(&rel_cache.out, tau, noise.as_deref_mut())?;

        let mut o1_in = g.to_vec();
        o1_in.extend_from_slice(&phi_rel);
        let o1_cache = o1_layer.forward(&o1_in);
        let o1_probs = softmax(&o1_cache.out);
        let phi_o1 = gumbel_softmax(&o1_cache.out, tau, noise)?;

        let mut o2_in = g.to_vec();
        o2_in.extend_from_slice(&phi_rel);
        o2_in.extend_from_slice(&phi_o1);
        let o2_cache = o2_layer.forward(&o2_in);
        let o2_probs = softmax(&o2_cache.out);

        Ok(HeadCache {
            rel_cache,
            rel_probs,
            phi_rel,
            o1_cache,
            o1_probs,
            phi_o1,
            o2_cache,
            o2_probs,
        })
    }

    /// Decode the likelihoods into singleton constraint sets under the
    /// grammar masks. Padding slots are always masked; relation-slot
    /// feasibility applies unless the grammar mask is ablated.
    fn decode(
        &self,
        state: &WorldState,
        pos: Option<&HeadCache>,
        neg: Option<&HeadCache>,
    ) -> ConstraintPrediction {
        let mut pred = ConstraintPrediction::default();
        if let Some(head) = pos {
            pred.pos_rel_probs = head.rel_probs.clone();
            pred.pos_o1_probs = head.o1_probs.clone();
            pred.pos_o2_probs = head.o2_probs.clone();
            pred.positive = self.decode_side(state, head);
        }
        if let Some(head) = neg {
            pred.neg_rel_probs = head.rel_probs.clone();
            pred.neg_o1_probs = head.o1_probs.clone();
            pred.neg_o2_probs = head.o2_probs.clone();
            pred.negative = self.decode_side(state, head);
        }
        pred
    }

    fn decode_side(&self, state: &WorldState, head: &HeadCache) -> BTreeSet<Predicate> {
        let dims = &self.config.dims;
        let rel = argmax(&head.rel_probs);
        if rel == dims.null_rel() {
            return BTreeSet::new();
        }
        let n = state.object_count();
        let allowed = |slot: Slot| -> BTreeSet<u16> {
            if self.config.ablation.grammar_mask {
                feasible_fillers(rel, slot, state)
            } else {
                (0..n as u16).collect()
            }
        };
        let pick = |probs: &[f64], candidates: &BTreeSet<u16>| -> Option<u16> {
            candidates
                .iter()
                .copied()
                .filter(|&o| (o as usize) < n)
                .max_by(|&a, &b| {
                    probs[a as usize]
                        .total_cmp(&probs[b as usize])
                        .then(b.cmp(&a)) // prefer the lower index on ties
                })
        };
        let cands1 = allowed(Slot::First);
        let Some(o1) = pick(&head.o1_probs, &cands1) else {
            return BTreeSet::new();
        };
        let arity = state.schema().relations[rel].arity;
        if arity == 1 {
            return BTreeSet::from([Predicate::unary(rel, o1)]);
        }
        let cands2 = allowed(Slot::Second);
        let Some(o2) = pick(&head.o2_probs, &cands2) else {
            return BTreeSet::new();
        };
        BTreeSet::from([Predicate::binary(rel, o1, o2)])
    }

    /// Sum of the six BCE terms for one step (three when a head is ablated).
    pub fn step_loss(&self, cache: &StepCache, targets: &StepTargets) -> Result<f64, ModelError> {
        let mut loss = 0.0;
        if let Some(head) = &cache.pos {
            loss += bce_loss(&head.rel_probs, &targets.pos_rel)?;
            loss += bce_loss(&head.o1_probs, &targets.pos_o1)?;
            loss += bce_loss(&head.o2_probs, &targets.pos_o2)?;
        }
        if let Some(head) = &cache.neg {
            loss += bce_loss(&head.rel_probs, &targets.neg_rel)?;
            loss += bce_loss(&head.o1_probs, &targets.neg_o1)?;
            loss += bce_loss(&head.o2_probs, &targets.neg_o2)?;
        }
        Ok(loss)
    }

    /// Reverse pass over a whole datum: per-step head gradients, attention
    /// and encoder gradients, and backpropagation through time across the
    /// history cell. `scale` multiplies every step loss (1 / step count for
    /// a mean-over-steps datum loss).
    pub fn backward_datum(
        &mut self,
        instr_cache: &DenseCache,
        steps: &[(StepCache, StepTargets)],
        scale: f64,
    ) {
        let dims = self.config.dims.clone();
        let flags = self.config.ablation.clone();
        let tau = self.config.tau;
        let hidden = dims.hidden;
        let mut d_l = vec![0.0; hidden];
        let mut dh_carry = vec![0.0; hidden];
        let mut dc_carry = vec![0.0; hidden];

        for (cache, targets) in steps.iter().rev() {
            let mut d_g = vec![0.0; hidden];

            let head_backward = |params: &mut crate::model::params::GoalNetParams,
                                     head: &HeadCache,
                                     t_rel: &[f64],
                                     t_o1: &[f64],
                                     t_o2: &[f64],
                                     d_g: &mut [f64],
                                     positive: bool| {
                let (rel_layer, o1_layer, o2_layer) = if positive {
                    (&mut params.pos_rel, &mut params.pos_obj1, &mut params.pos_obj2)
                } else {
                    (&mut params.neg_rel, &mut params.neg_obj1, &mut params.neg_obj2)
                };
                let rel_head = dims.rel_head();

                // o2 head.
                let mut d_probs = bce_backward(&head.o2_probs, t_o2);
                d_probs.iter_mut().for_each(|d| *d *= scale);
                let dpre2 = softmax_backward(&head.o2_probs, &d_probs);
                let dx2 = o2_layer.backward(&head.o2_cache, &dpre2);
                for (a, b) in d_g.iter_mut().zip(&dx2[..hidden]) {
                    *a += b;
                }
                let mut d_phi_rel: Vec<f64> = dx2[hidden..hidden + rel_head].to_vec();
                let mut d_phi_o1: Vec<f64> = dx2[hidden + rel_head..].to_vec();

                // o1 head: BCE path plus Gumbel forwarding path from o2.
                let mut d_probs = bce_backward(&head.o1_probs, t_o1);
                d_probs.iter_mut().for_each(|d| *d *= scale);
                let mut dpre1 = softmax_backward(&head.o1_probs, &d_probs);
                let dphi = gumbel_softmax_backward(&head.phi_o1, &d_phi_o1, tau);
                for (a, b) in dpre1.iter_mut().zip(&dphi) {
                    *a += b;
                }
                let dx1 = o1_layer.backward(&head.o1_cache, &dpre1);
                for (a, b) in d_g.iter_mut().zip(&dx1[..hidden]) {
                    *a += b;
                }
                for (a, b) in d_phi_rel.iter_mut().zip(&dx1[hidden..]) {
                    *a += b;
                }
                d_phi_o1.clear();

                // Relation head: BCE path plus forwarding into both objects.
                let mut d_probs = bce_backward(&head.rel_probs, t_rel);
                d_probs.iter_mut().for_each(|d| *d *= scale);
                let mut dpre_r = softmax_backward(&head.rel_probs, &d_probs);
                let dphi = gumbel_softmax_backward(&head.phi_rel, &d_phi_rel, tau);
                for (a, b) in dpre_r.iter_mut().zip(&dphi) {
                    *a += b;
                }
                let dxr = rel_layer.backward(&head.rel_cache, &dpre_r);
                for (a, b) in d_g.iter_mut().zip(&dxr) {
                    *a += b;
                }
            };

            if let Some(head) = &cache.pos {
                head_backward(
                    &mut self.params,
                    head,
                    &targets.pos_rel,
                    &targets.pos_o1,
                    &targets.pos_o2,
                    &mut d_g,
                    true,
                );
            }
            if let Some(head) = &cache.neg {
                head_backward(
                    &mut self.params,
                    head,
                    &targets.neg_rel,
                    &targets.neg_o1,
                    &targets.neg_o2,
                    &mut d_g,
                    false,
                );
            }

            // Shared layer back to its four inputs.
            let d_goal_in = self.params.goal_shared.backward(&cache.goal_cache, &d_g);
            let mut ds_task: Vec<f64> = d_goal_in[..hidden].to_vec();
            let d_eta = &d_goal_in[hidden..2 * hidden];
            let d_l_obj = &d_goal_in[2 * hidden..2 * hidden + dims.word_dim];
            for (a, b) in d_l.iter_mut().zip(&d_goal_in[2 * hidden + dims.word_dim..]) {
                *a += b;
            }

            // History cell through time.
            if flags.temporal_context && !cache.hist_caches.is_empty() {
                let mut dh: Vec<f64> = d_eta.iter().zip(&dh_carry).map(|(a, b)| a + b).collect();
                let mut dc = dc_carry.clone();
                for sub in cache.hist_caches.iter().rev() {
                    let (_dx, dh_prev, dc_prev) = self.params.history.backward(sub, &dh, &dc);
                    dh = dh_prev;
                    dc = dc_prev;
                }
                dh_carry = dh;
                dc_carry = dc;
            }

            // Instruction-object attention.
            if !cache.eps.is_empty() && flags.goal_object_attention {
                for (k, oc) in cache.obj_attn_caches.iter().enumerate() {
                    let entry_emb = &oc.x[..dims.word_dim];
                    let d_eps: f64 = d_l_obj.iter().zip(entry_emb).map(|(d, e)| d * e).sum();
                    let d_in = self.params.obj_attn.backward(oc, &[d_eps]);
                    for (a, b) in ds_task.iter_mut().zip(&d_in[dims.word_dim..]) {
                        *a += b;
                    }
                    let _ = k;
                }
            }

            // Task projection and instruction-conditioned attention.
            let d_pooled = self.params.task_proj.backward(&cache.task_cache, &ds_task);
            for o in 0..cache.n_objects {
                let feat = &cache.obj_feats[o];
                let mut d_feat: Vec<f64> =
                    d_pooled.iter().map(|d| d * cache.alphas[o]).collect();
                if flags.instruction_attention {
                    let d_alpha: f64 = d_pooled.iter().zip(feat).map(|(d, f)| d * f).sum();
                    let d_in = self.params.attn.backward(&cache.attn_caches[o], &[d_alpha]);
                    for (a, b) in d_feat.iter_mut().zip(&d_in[..dims.obj_feat()]) {
                        *a += b;
                    }
                    for (a, b) in d_l.iter_mut().zip(&d_in[dims.obj_feat()..]) {
                        *a += b;
                    }
                }
                // Only the relational tail of the feature vector is learned.
                if flags.relational && !cache.rel_caches[o].is_empty() {
                    let tail = dims.obj_feat() - dims.rel_enc_out;
                    let mut d_out: Vec<f64> = d_feat[tail..].to_vec();
                    for (layer, lc) in self
                        .params
                        .rel_encoder
                        .iter_mut()
                        .zip(&cache.rel_caches[o])
                        .rev()
                    {
                        d_out = layer.backward(lc, &d_out);
                    }
                }
            }
        }

        self.params.instr_proj.backward(instr_cache, &d_l);
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

//! Goal-reaching evaluation: SJI, IED, GRR and F1 over aggregate constraint
//! sets, the constraint-set-size breakdown, and the generalization test-set
//! transforms.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::data::dataset::Demonstration;
use crate::domain::{relation_diff, DomainError, GoalSpec, GroundedAction, WorldState};
use crate::lang::{AliasMap, LangError, SentenceEncoder};
use crate::model::{GoalNet, ModelError};
use crate::planner::PlannerConfig;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Lang(#[from] LangError),
}

/// Aggregate goal predicates between an initial and a terminal state.
pub fn aggregate_predicates(s0: &WorldState, st: &WorldState) -> Result<GoalSpec, DomainError> {
    relation_diff(s0, st)
}

/// State Jaccard index over the two constraint sides. All four sets empty
/// scores 1 (a no-op instruction answered by a no-op is perfect).
pub fn sji(gt: &GoalSpec, pred: &GoalSpec) -> f64 {
    let inter =
        gt.plus.intersection(&pred.plus).count() + gt.minus.intersection(&pred.minus).count();
    let union = gt.plus.union(&pred.plus).count() + gt.minus.union(&pred.minus).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Normalized action-sequence edit similarity:
/// 1 - levenshtein / max(len); two empty sequences score 1.
pub fn ied(gt: &[GroundedAction], pred: &[GroundedAction]) -> f64 {
    let denom = gt.len().max(pred.len());
    if denom == 0 {
        return 1.0;
    }
    1.0 - levenshtein(gt, pred) as f64 / denom as f64
}

/// Two-row Levenshtein distance with exact (name, args) action equality.
fn levenshtein(a: &[GroundedAction], b: &[GroundedAction]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ai) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, bj) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ai != bj);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Which way the goal-reaching subset check points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GrrDirection {
    /// Ground-truth predicates must be present among the predicted ones.
    GroundTruthInPredicted,
    /// The typeset variant: predicted predicates inside the ground truth.
    PredictedInGroundTruth,
}

/// Goal reaching: 1 iff the subset check holds on both sides.
pub fn grr(gt: &GoalSpec, pred: &GoalSpec, direction: GrrDirection) -> f64 {
    let holds = match direction {
        GrrDirection::GroundTruthInPredicted => {
            gt.plus.is_subset(&pred.plus) && gt.minus.is_subset(&pred.minus)
        }
        GrrDirection::PredictedInGroundTruth => {
            pred.plus.is_subset(&gt.plus) && pred.minus.is_subset(&gt.minus)
        }
    };
    if holds {
        1.0
    } else {
        0.0
    }
}

fn side_f1(gt: &std::collections::BTreeSet<crate::domain::Predicate>,
           pred: &std::collections::BTreeSet<crate::domain::Predicate>) -> f64 {
    if gt.is_empty() && pred.is_empty() {
        return 1.0;
    }
    if gt.is_empty() || pred.is_empty() {
        return 0.0;
    }
    let inter = gt.intersection(pred).count() as f64;
    let precision = inter / pred.len() as f64;
    let recall = inter / gt.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Mean of the per-side F1 scores.
pub fn f1(gt: &GoalSpec, pred: &GoalSpec) -> f64 {
    (side_f1(&gt.plus, &pred.plus) + side_f1(&gt.minus, &pred.minus)) / 2.0
}

#[derive(Debug, Clone, Serialize)]
pub struct DatumScore {
    pub id: String,
    pub sji: f64,
    pub ied: f64,
    pub f1: f64,
    pub grr: f64,
    /// Size of the aggregate ground-truth constraint set.
    pub gt_size: usize,
    pub plan_failures: usize,
    pub hit_cap: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BucketStats {
    pub count: usize,
    pub sji: f64,
    pub ied: f64,
    pub f1: f64,
    pub grr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub mean_sji: f64,
    pub mean_ied: f64,
    pub mean_f1: f64,
    pub mean_grr: f64,
    pub datum_count: usize,
    /// Mean scores keyed by aggregate ground-truth set size.
    pub breakdown: BTreeMap<usize, BucketStats>,
    pub per_datum: Vec<DatumScore>,
    /// Ids of data whose rollout had at least one failed plan call.
    pub failures: Vec<String>,
}

impl EvalReport {
    fn from_scores(per_datum: Vec<DatumScore>) -> Self {
        let n = per_datum.len().max(1) as f64;
        let mean = |f: fn(&DatumScore) -> f64| per_datum.iter().map(f).sum::<f64>() / n;
        let mut buckets: BTreeMap<usize, Vec<&DatumScore>> = BTreeMap::new();
        for s in &per_datum {
            buckets.entry(s.gt_size).or_default().push(s);
        }
        let breakdown = buckets
            .into_iter()
            .map(|(k, v)| {
                let m = v.len() as f64;
                (
                    k,
                    BucketStats {
                        count: v.len(),
                        sji: v.iter().map(|s| s.sji).sum::<f64>() / m,
                        ied: v.iter().map(|s| s.ied).sum::<f64>() / m,
                        f1: v.iter().map(|s| s.f1).sum::<f64>() / m,
                        grr: v.iter().map(|s| s.grr).sum::<f64>() / m,
                    },
                )
            })
            .collect();
        EvalReport {
            mean_sji: mean(|s| s.sji),
            mean_ied: mean(|s| s.ied),
            mean_f1: mean(|s| s.f1),
            mean_grr: mean(|s| s.grr),
            datum_count: per_datum.len(),
            breakdown,
            failures: per_datum
                .iter()
                .filter(|s| s.plan_failures > 0)
                .map(|s| s.id.clone())
                .collect(),
            per_datum,
        }
    }

    /// Aligned table in SJI / IED / F1 / GRR column order.
    pub fn to_table(&self, label: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>8} {:>8} {:>8} {:>8}\n",
            "Model", "SJI", "IED", "F1", "GRR"
        ));
        out.push_str(&format!(
            "{:<24} {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
            label, self.mean_sji, self.mean_ied, self.mean_f1, self.mean_grr
        ));
        out.push_str(&format!("\n{:<24} {:>8}\n", "constraint-set size", "count"));
        for (size, b) in &self.breakdown {
            out.push_str(&format!(
                "{:<24} {:>8} {:>8.3} {:>8.3} {:>8.3} {:>8.3}\n",
                size, b.count, b.sji, b.ied, b.f1, b.grr
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub planner: PlannerConfig,
    pub grr_direction: GrrDirection,
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            planner: PlannerConfig::default(),
            grr_direction: GrrDirection::GroundTruthInPredicted,
            workers: 1,
        }
    }
}

fn score_one(
    demo: &Demonstration,
    net: &GoalNet,
    encoder: &SentenceEncoder,
    aliases: &AliasMap,
    cfg: &EvalConfig,
) -> Result<DatumScore, EvalError> {
    let gt = demo.aggregate();
    let rollout = net.infer_rollout(
        demo.initial_state(),
        Some(&demo.id),
        &demo.instruction,
        demo.grounding.as_ref(),
        encoder,
        aliases,
        &cfg.planner,
    )?;
    let pred = relation_diff(demo.initial_state(), rollout.result.final_state())?;
    Ok(DatumScore {
        id: demo.id.clone(),
        sji: sji(&gt, &pred),
        ied: ied(&demo.actions, &rollout.result.actions),
        f1: f1(&gt, &pred),
        grr: grr(&gt, &pred, cfg.grr_direction),
        gt_size: gt.len(),
        plan_failures: rollout.result.failed_steps.len(),
        hit_cap: rollout.result.hit_cap,
    })
}

/// Roll the model out on every demo and score the four metrics against the
/// recorded ground truth. Failed rollout steps still score: the metrics use
/// whatever partial trace was achieved.
pub fn evaluate(
    demos: &[Demonstration],
    net: &GoalNet,
    encoder: &SentenceEncoder,
    aliases: &AliasMap,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    let workers = cfg.workers.max(1).min(demos.len().max(1));
    let scores: Vec<DatumScore> = if workers <= 1 {
        demos
            .iter()
            .map(|d| score_one(d, net, encoder, aliases, cfg))
            .collect::<Result<_, _>>()?
    } else {
        // Per-datum parallelism with reduction in input order, so reports
        // are byte-identical regardless of worker count.
        let chunk = demos.len().div_ceil(workers);
        let mut indexed: Vec<(usize, Result<DatumScore, EvalError>)> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = demos
                    .chunks(chunk)
                    .enumerate()
                    .map(|(ci, part)| {
                        scope.spawn(move || {
                            part.iter()
                                .enumerate()
                                .map(|(k, d)| {
                                    (ci * chunk + k, score_one(d, net, encoder, aliases, cfg))
                                })
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .flat_map(|h| h.join().expect("eval worker panicked"))
                    .collect()
            });
        indexed.sort_by_key(|(i, _)| *i);
        indexed
            .into_iter()
            .map(|(_, r)| r)
            .collect::<Result<_, _>>()?
    };
    Ok(EvalReport::from_scores(scores))
}

// ---------------------------------------------------------------------------
// Generalization transforms

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneralizationMode {
    Verb,
    Paraphrase,
}

/// Seen-verb to unseen-synonym lexicon: `seen<TAB>synonym` per line; longer
/// keys match first.
#[derive(Debug, Clone)]
pub struct VerbLexicon {
    entries: Vec<(String, String)>,
}

impl VerbLexicon {
    pub fn parse(text: &str) -> Result<Self, LangError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (from, to) = line.split_once('\t').ok_or_else(|| LangError::Parse {
                line: i + 1,
                message: "expected seen<TAB>synonym".into(),
            })?;
            entries.push((from.trim().to_string(), to.trim().to_string()));
        }
        entries.sort_by_key(|(from, _)| std::cmp::Reverse(from.len()));
        Ok(VerbLexicon { entries })
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../assets/verbs.tsv")).expect("bundled verb lexicon is valid")
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    /// Replace the first matching seen verb (word-aligned) with its synonym.
    pub fn rewrite(&self, instruction: &str) -> Option<String> {
        let lower = instruction.to_lowercase();
        for (from, to) in &self.entries {
            if let Some(pos) = find_word(&lower, from) {
                let mut out = String::new();
                out.push_str(&lower[..pos]);
                out.push_str(to);
                out.push_str(&lower[pos + from.len()..]);
                return Some(out);
            }
        }
        None
    }
}

fn find_word(text: &str, needle: &str) -> Option<usize> {
    let mut start = 0;
    while let Some(rel) = text[start..].find(needle) {
        let pos = start + rel;
        let before_ok = pos == 0
            || !text[..pos]
                .chars()
                .next_back()
                .is_some_and(|c| c.is_alphanumeric());
        let after = pos + needle.len();
        let after_ok = after >= text.len()
            || !text[after..]
                .chars()
                .next()
                .is_some_and(|c| c.is_alphanumeric());
        if before_ok && after_ok {
            return Some(pos);
        }
        start = pos + needle.len();
    }
    None
}

/// Phrase-rewrite rules for paraphrase mode: `phrase<TAB>rewrite` per line,
/// applied in file order.
#[derive(Debug, Clone)]
pub struct ParaphraseRules {
    rules: Vec<(String, String)>,
}

impl ParaphraseRules {
    pub fn parse(text: &str) -> Result<Self, LangError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (from, to) = line.split_once('\t').ok_or_else(|| LangError::Parse {
                line: i + 1,
                message: "expected phrase<TAB>rewrite".into(),
            })?;
            rules.push((from.trim().to_string(), to.trim().to_string()));
        }
        Ok(ParaphraseRules { rules })
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../assets/paraphrases.tsv"))
            .expect("bundled paraphrase rules are valid")
    }

    pub fn rewrite(&self, instruction: &str) -> Option<String> {
        let mut text = instruction.to_lowercase();
        let mut changed = false;
        for (from, to) in &self.rules {
            if text.contains(from.as_str()) {
                text = text.replace(from.as_str(), to);
                changed = true;
            }
        }
        changed.then_some(text)
    }
}

/// Transform instructions while leaving states, actions and groundings (the
/// ground truth) untouched. Data with no applicable rewrite are skipped.
pub fn make_generalization_set(
    demos: &[Demonstration],
    mode: GeneralizationMode,
    verbs: &VerbLexicon,
    paraphrases: &ParaphraseRules,
) -> Vec<Demonstration> {
    demos
        .iter()
        .filter_map(|d| {
            let rewritten = match mode {
                GeneralizationMode::Verb => verbs.rewrite(&d.instruction),
                GeneralizationMode::Paraphrase => paraphrases.rewrite(&d.instruction),
            }?;
            let mut out = d.clone();
            out.instruction = rewritten;
            out.id = format!(
                "{}_{}",
                d.id,
                match mode {
                    GeneralizationMode::Verb => "verbgen",
                    GeneralizationMode::Paraphrase => "paragen",
                }
            );
            Some(out)
        })
        .collect()
}



#[cfg(test)]
mod worker_tests {
    use super::*;
    use crate::data::synth_generate;
    use crate::domain::SchemaSet;
    use crate::lang::{AliasMap, EmbeddingTable, SentenceEncoder};
    use crate::model::{GoalNet, GoalNetConfig, ModelDims};

    #[test]
    fn report_is_identical_for_any_worker_count() {
        let schemas = SchemaSet::builtin();
        let demos = synth_generate(&schemas, 51, 7).unwrap();
        let net = GoalNet::new(GoalNetConfig::new(
            ModelDims::for_schema(schemas.first()),
            2,
        ));
        let encoder = SentenceEncoder::new(EmbeddingTable::builtin());
        let aliases = AliasMap::builtin();
        let run = |workers: usize| {
            let cfg = EvalConfig {
                workers,
                ..Default::default()
            };
            serde_json::to_string(&evaluate(&demos, &net, &encoder, &aliases, &cfg).unwrap())
                .unwrap()
        };
        let single = run(1);
        assert_eq!(single, run(3));
        assert_eq!(single, run(16));
    }
}

//! Demonstration ingestion: parsing, transition validation, split assignment
//! and supervision extraction.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::DataError;
use crate::domain::{
    apply_action, ground_action, relation_diff, GoalSpec, GroundedAction, SchemaSet, Universe,
    WorldState, WorldStateJson,
};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One training datum: an instruction with its demonstrated state-action
/// sequence. `states.len() == actions.len() + 1`, validated on load.
#[derive(Debug, Clone)]
pub struct Demonstration {
    pub id: String,
    pub domain: String,
    pub instruction: String,
    pub grounding: Option<BTreeMap<String, String>>,
    pub states: Vec<WorldState>,
    pub actions: Vec<GroundedAction>,
    pub split: Option<Split>,
}

impl Demonstration {
    pub fn universe(&self) -> &Arc<Universe> {
        self.states[0].universe()
    }

    pub fn initial_state(&self) -> &WorldState {
        &self.states[0]
    }

    pub fn final_state(&self) -> &WorldState {
        self.states.last().expect("non-empty state sequence")
    }

    /// Key identifying the initial scene; used for the train/test
    /// disjointness check.
    pub fn scene_key(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(self.domain.as_bytes());
        for o in &self.states[0].universe().objects {
            eat(o.id.as_bytes());
            eat(o.class.as_bytes());
        }
        eat(&self.states[0].content_hash().to_le_bytes());
        h
    }

    /// Aggregate goal constraints of the demonstration: the relation-set
    /// difference between the final and initial states.
    pub fn aggregate(&self) -> GoalSpec {
        relation_diff(self.initial_state(), self.final_state())
            .expect("demo states share one universe")
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetJson {
    /// Resolved generator configuration, echoed for provenance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
    pub demos: Vec<DemoJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DemoJson {
    pub id: String,
    pub domain: String,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    pub states: Vec<WorldStateJson>,
    pub actions: Vec<ActionJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ActionJson {
    pub name: String,
    pub args: Vec<String>,
}

pub fn to_json(demos: &[Demonstration]) -> DatasetJson {
    DatasetJson {
        provenance: None,
        demos: demos
            .iter()
            .map(|d| DemoJson {
                id: d.id.clone(),
                domain: d.domain.clone(),
                instruction: d.instruction.clone(),
                grounding: d.grounding.clone(),
                split: d.split,
                states: d.states.iter().map(|s| s.to_json()).collect(),
                actions: d
                    .actions
                    .iter()
                    .map(|a| {
                        let universe = d.universe();
                        ActionJson {
                            name: a.name(&universe.schema).to_string(),
                            args: a
                                .args
                                .iter()
                                .map(|&i| universe.object(i).id.clone())
                                .collect(),
                        }
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn save_dataset(demos: &[Demonstration]) -> String {
    serde_json::to_string_pretty(&to_json(demos)).expect("dataset serialization")
}

/// As [`save_dataset`] with a provenance echo in the container.
pub fn save_dataset_with_provenance(
    demos: &[Demonstration],
    provenance: serde_json::Value,
) -> String {
    let mut json = to_json(demos);
    json.provenance = Some(provenance);
    serde_json::to_string_pretty(&json).expect("dataset serialization")
}

/// Parse and validate a dataset: every recorded transition must replay
/// exactly through the deterministic transition function.
pub fn load_dataset(text: &str, schemas: &SchemaSet) -> Result<Vec<Demonstration>, DataError> {
    let raw: DatasetJson =
        serde_json::from_str(text).map_err(|e| DataError::Parse(e.to_string()))?;
    let mut demos = Vec::with_capacity(raw.demos.len());
    for dj in &raw.demos {
        demos.push(demo_from_json(dj, schemas)?);
    }
    Ok(demos)
}

fn demo_from_json(dj: &DemoJson, schemas: &SchemaSet) -> Result<Demonstration, DataError> {
    let schema = schemas.get(&dj.domain)?;
    if dj.states.len() != dj.actions.len() + 1 {
        return Err(DataError::Malformed {
            id: dj.id.clone(),
            message: format!(
                "states ({}) must be actions ({}) + 1",
                dj.states.len(),
                dj.actions.len()
            ),
        });
    }
    let first = WorldState::from_json(&dj.states[0], schema)?;
    let universe = first.universe().clone();
    let mut states = vec![first];
    for sj in &dj.states[1..] {
        states.push(WorldState::from_json_with_universe(sj, universe.clone())?);
    }
    let mut actions = Vec::with_capacity(dj.actions.len());
    for aj in &dj.actions {
        let arg_refs: Vec<&str> = aj.args.iter().map(|s| s.as_str()).collect();
        actions.push(ground_action(&universe, &aj.name, &arg_refs)?);
    }
    // Transition validation: each recorded successor must equal the replay.
    for (j, action) in actions.iter().enumerate() {
        let replayed = apply_action(action, &states[j]).map_err(|e| DataError::Transition {
            id: dj.id.clone(),
            step: j,
            message: e.to_string(),
        })?;
        if replayed != states[j + 1] {
            return Err(DataError::Transition {
                id: dj.id.clone(),
                step: j,
                message: format!(
                    "recorded state {} does not match the replayed effect of {}",
                    j + 1,
                    action.to_string(&universe)
                ),
            });
        }
    }
    Ok(Demonstration {
        id: dj.id.clone(),
        domain: dj.domain.clone(),
        instruction: dj.instruction.clone(),
        grounding: dj.grounding.clone(),
        states,
        actions,
        split: dj.split,
    })
}

/// Per-step supervision: single-step relation diffs over consecutive states,
/// closed by an empty pair that serves as the stop target.
pub fn extract_supervision(demo: &Demonstration) -> Vec<GoalSpec> {
    let mut out = Vec::with_capacity(demo.states.len());
    for w in demo.states.windows(2) {
        out.push(relation_diff(&w[0], &w[1]).expect("demo states share one universe"));
    }
    out.push(GoalSpec::default());
    out
}

#[derive(Debug, Clone)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Split assignment: honored from the file when every demo carries one,
/// otherwise derived by a seeded shuffle at 70/15/15. Test initial scenes
/// must be disjoint from training scenes.
pub fn split_dataset(demos: &[Demonstration], seed: u64) -> Result<SplitIndices, DataError> {
    let splits = if demos.iter().all(|d| d.split.is_some()) {
        let mut s = SplitIndices {
            train: vec![],
            val: vec![],
            test: vec![],
        };
        for (i, d) in demos.iter().enumerate() {
            match d.split.unwrap() {
                Split::Train => s.train.push(i),
                Split::Val => s.val.push(i),
                Split::Test => s.test.push(i),
            }
        }
        s
    } else {
        let n = demos.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = Rng::new(seed ^ 0x5711_7a6e);
        rng.shuffle(&mut order);
        let n_train = n * 70 / 100;
        let n_val = n * 15 / 100;
        SplitIndices {
            train: order[..n_train].to_vec(),
            val: order[n_train..n_train + n_val].to_vec(),
            test: order[n_train + n_val..].to_vec(),
        }
    };
    let train_keys: BTreeSet<u64> = splits.train.iter().map(|&i| demos[i].scene_key()).collect();
    let leaking: Vec<&str> = splits
        .test
        .iter()
        .filter(|&&i| train_keys.contains(&demos[i].scene_key()))
        .map(|&i| demos[i].id.as_str())
        .collect();
    if !leaking.is_empty() {
        return Err(DataError::SplitLeakage {
            ids: leaking.iter().map(|s| s.to_string()).collect(),
        });
    }
    Ok(splits)
}

//! Semantic object replacement: exchange all instances of a demo's goal
//! class with a nearest-neighbor class sharing the full property vector, so
//! the replacement class appears in roles unseen in the source corpus.

use std::collections::{BTreeMap, BTreeSet};

use crate::data::dataset::{to_json, Demonstration};
use crate::data::DataError;
use crate::domain::SchemaSet;
use crate::lang::{extract_goal_objects, tokenize, AliasMap, EmbeddingTable};
use crate::rng::Rng;

/// (action name, argument position, class token) — the "role" an object
/// class plays in a corpus.
type Role = (String, usize, String);

fn corpus_roles(demos: &[Demonstration]) -> BTreeSet<Role> {
    let mut roles = BTreeSet::new();
    for d in demos {
        let universe = d.universe();
        for a in &d.actions {
            let name = a.name(&universe.schema).to_string();
            for (pos, &arg) in a.args.iter().enumerate() {
                roles.insert((name.clone(), pos, universe.object(arg).class.clone()));
            }
        }
    }
    roles
}

/// Roles the source class occupies in one demo.
fn demo_roles(demo: &Demonstration, class: &str) -> BTreeSet<(String, usize)> {
    let universe = demo.universe();
    let mut out = BTreeSet::new();
    for a in &demo.actions {
        let name = a.name(&universe.schema).to_string();
        for (pos, &arg) in a.args.iter().enumerate() {
            if universe.object(arg).class == class {
                out.insert((name.clone(), pos));
            }
        }
    }
    out
}

/// Generate up to `budget * demos.len()` replacement demos. Each picks one
/// goal class of a sampled demo, finds the most embedding-similar class with
/// an identical property vector whose use in the demo's action roles is
/// absent from the source corpus, swaps the two classes' instances through
/// states, actions, instruction and groundings, and re-validates transitions.
pub fn augment(
    demos: &[Demonstration],
    table: &EmbeddingTable,
    budget: f64,
    schemas: &SchemaSet,
    aliases: &AliasMap,
    seed: u64,
) -> Result<Vec<Demonstration>, DataError> {
    let target = (budget * demos.len() as f64).floor() as usize;
    if target == 0 || demos.is_empty() {
        return Ok(vec![]);
    }
    let roles = corpus_roles(demos);
    let mut rng = Rng::new(seed ^ 0xa06);
    let mut order: Vec<usize> = (0..demos.len()).collect();
    rng.shuffle(&mut order);
    let mut out = Vec::new();
    for (attempt, &di) in order.iter().cycle().take(demos.len() * 4).enumerate() {
        if out.len() >= target {
            break;
        }
        let demo = &demos[di];
        let schema = schemas.get(&demo.domain)?;
        let extracted = extract_goal_objects(&demo.instruction, schema, aliases, None);
        if extracted.classes.is_empty() {
            continue;
        }
        let source = extracted.classes[rng.below(extracted.classes.len())].clone();
        let Ok(src_idx) = schema.class(&source) else {
            continue;
        };
        let src_props = &schema.classes[src_idx].prop_mask;

        // Candidate classes with the same full property vector, ranked by
        // embedding similarity.
        let candidates: Vec<String> = schema
            .classes
            .iter()
            .filter(|c| c.token != source && &c.prop_mask == src_props)
            .map(|c| c.token.clone())
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let occupied = demo_roles(demo, &source);
        let ranked = table.rank_by_similarity(&source, &candidates);
        let chosen = ranked.iter().find(|(cand, _)| {
            occupied
                .iter()
                .all(|(a, p)| !roles.contains(&(a.clone(), *p, cand.clone())))
        });
        let Some((replacement, _)) = chosen else {
            continue;
        };
        if let Some(new_demo) = swap_classes(demo, &source, replacement, schemas, attempt)? {
            out.push(new_demo);
        }
    }
    Ok(out)
}

/// Instance-wise swap of two classes inside one demo. Instances pair up in
/// id order; unmatched extras stay put. Returns None when the swapped demo
/// fails transition re-validation.
fn swap_classes(
    demo: &Demonstration,
    source: &str,
    replacement: &str,
    schemas: &SchemaSet,
    tag: usize,
) -> Result<Option<Demonstration>, DataError> {
    let universe = demo.universe();
    let src_ids: Vec<String> = universe
        .objects
        .iter()
        .filter(|o| o.class == source)
        .map(|o| o.id.clone())
        .collect();
    let rep_ids: Vec<String> = universe
        .objects
        .iter()
        .filter(|o| o.class == replacement)
        .map(|o| o.id.clone())
        .collect();
    if src_ids.is_empty() || rep_ids.is_empty() {
        return Ok(None);
    }
    let pairs = src_ids.len().min(rep_ids.len());
    let mut id_map: BTreeMap<String, String> = BTreeMap::new();
    for k in 0..pairs {
        id_map.insert(src_ids[k].clone(), rep_ids[k].clone());
        id_map.insert(rep_ids[k].clone(), src_ids[k].clone());
    }
    let map_id = |id: &str| -> String { id_map.get(id).cloned().unwrap_or_else(|| id.to_string()) };

    // Rewrite the serialized form and re-validate through the loader. The
    // object population is untouched; the two classes' instances exchange
    // roles, i.e. every predicate argument and action argument maps through
    // the bijection, and state bits travel with the role.
    let mut json = to_json(std::slice::from_ref(demo));
    let dj = &mut json.demos[0];
    dj.id = format!("{}_aug{}", dj.id, tag);
    for state in &mut dj.states {
        let old_bits: BTreeMap<String, Vec<String>> = state
            .objects
            .iter()
            .map(|o| (o.id.clone(), o.states.clone()))
            .collect();
        for obj in &mut state.objects {
            obj.states = old_bits[&map_id(&obj.id)].clone();
        }
        for triple in &mut state.relations {
            triple[1] = map_id(&triple[1]);
            triple[2] = map_id(&triple[2]);
        }
    }
    for action in &mut dj.actions {
        for arg in &mut action.args {
            *arg = map_id(arg);
        }
    }
    // Instruction: rewrite every token resolving to the source class.
    dj.instruction = rewrite_instruction(&dj.instruction, source, replacement);
    if let Some(grounding) = &mut dj.grounding {
        let mut new_grounding = BTreeMap::new();
        for (token, id) in grounding.iter() {
            let new_token = if token_resolves_to(token, source) {
                replacement.to_string()
            } else {
                token.clone()
            };
            new_grounding.insert(new_token, map_id(id));
        }
        *grounding = new_grounding;
    }

    let text = serde_json::to_string(&json).map_err(|e| DataError::Parse(e.to_string()))?;
    match crate::data::dataset::load_dataset(&text, schemas) {
        Ok(mut demos) => Ok(Some(demos.remove(0))),
        Err(_) => Ok(None),
    }
}

fn token_resolves_to(token: &str, class: &str) -> bool {
    let aliases = AliasMap::builtin();
    let t = token.to_lowercase();
    let direct = t == class || aliases.resolve(&t) == Some(class);
    let plural = t
        .strip_suffix('s')
        .map(|b| b == class || aliases.resolve(b) == Some(class))
        .unwrap_or(false);
    direct || plural
}

fn rewrite_instruction(instruction: &str, source: &str, replacement: &str) -> String {
    let words = tokenize(instruction);
    let rewritten: Vec<String> = words
        .iter()
        .map(|w| {
            if token_resolves_to(w, source) {
                if w.ends_with('s') && !source.ends_with('s') && w != source {
                    format!("{replacement}s")
                } else {
                    replacement.to_string()
                }
            } else {
                w.clone()
            }
        })
        .collect();
    rewritten.join(" ")
}

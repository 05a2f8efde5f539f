//! Synthetic demonstration generator: sample a goal template, plan it
//! optimally from a randomized legal initial scene, and render an instruction
//! from per-template phrase banks.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::data::dataset::{Demonstration, Split};
use crate::data::DataError;
use crate::domain::{
    apply_action, DomainSchema, GoalSpec, Predicate, SchemaSet, Universe, WorldState,
};
use crate::planner::{plan, PlannerConfig};
use crate::rng::Rng;

const RETRY_CAP: usize = 60;

/// Verb banks. The verb-generalization lexicon maps these onto synonyms that
/// never occur here, so "unseen verb" checks hold by construction.
const FETCH_VERBS: &[&str] = &["put", "place", "keep", "move", "bring", "set"];
const STORE_VERBS: &[&str] = &["put", "place", "store", "keep"];
const TURN_ON_VERBS: &[&str] = &["turn on", "power on"];
const GATHER_VERBS: &[&str] = &["gather", "arrange", "collect"];

/// Curated goal-class pools keep the (template, object, destination)
/// combination space dense enough that a couple hundred demonstrations cover
/// it; schemas missing a pooled class simply contribute fewer combinations.
const FETCH_ITEMS: &[&str] = &[
    "mug", "plate", "fork", "spoon", "kettle", "coke", "pillow", "book", "cd", "beer",
    "xboxcontroller", "bagofchips",
];
const FETCH_SURFACES: &[&str] = &[
    "counter", "stove", "sink", "coffeetable", "loveseat", "shelf", "snacktable",
];
const STORE_CONTAINERS: &[&str] = &["fridge", "microwave", "sink", "garbagebin", "bowl", "garbagebag"];
const TURN_ON_DEVICES: &[&str] = &["light", "microwave", "sinkknob", "stoveknob", "tv", "xbox"];
const GATHER_CLASSES: &[&str] = &["plate", "longcup", "syrup", "book", "cd"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Template {
    FetchTo,
    StoreIn,
    TurnOn,
    Gather,
}

const TEMPLATES: [Template; 4] = [
    Template::FetchTo,
    Template::StoreIn,
    Template::TurnOn,
    Template::Gather,
];

pub fn synth_generate(
    schemas: &SchemaSet,
    seed: u64,
    n: usize,
) -> Result<Vec<Demonstration>, DataError> {
    let domains: Vec<_> = schemas.iter().cloned().collect();
    let mut rng = Rng::new(seed ^ 0x9e3);
    let mut seen_scenes: BTreeSet<u64> = BTreeSet::new();
    let mut demos = Vec::with_capacity(n);
    let planner_cfg = PlannerConfig {
        max_depth: 8,
        max_expansions: 400_000,
        restrict_to_goal_objects: true,
    };
    for i in 0..n {
        let schema = &domains[i % domains.len()];
        let mut attempt = 0;
        loop {
            attempt += 1;
            if attempt > RETRY_CAP {
                return Err(DataError::Generation {
                    index: i,
                    message: "retry cap exhausted; no solvable sample".into(),
                });
            }
            let template = *rng.choose(&TEMPLATES);
            let state = random_scene(schema, &mut rng);
            let Some(sample) = sample_goal(template, &state, &mut rng) else {
                continue;
            };
            let Ok(result) = plan(&state, &sample.goal, &planner_cfg) else {
                continue;
            };
            if result.actions.is_empty() {
                continue;
            }
            let mut states = vec![state.clone()];
            for action in &result.actions {
                let next = apply_action(action, states.last().unwrap()).map_err(|e| {
                    DataError::Generation {
                        index: i,
                        message: format!("replay failed: {e}"),
                    }
                })?;
                states.push(next);
            }
            let demo = Demonstration {
                id: format!("synth_{seed}_{i}"),
                domain: schema.name.clone(),
                instruction: sample.instruction,
                grounding: Some(sample.grounding),
                states,
                actions: result.actions,
                split: None,
            };
            let key = demo.scene_key();
            if !seen_scenes.insert(key) {
                continue;
            }
            demos.push(demo);
            break;
        }
    }
    Ok(demos)
}

/// As [`synth_generate`] but with explicit split tags at 70/15/15 in
/// generation order (scenes are unique, so the tags never leak).
pub fn synth_generate_split(
    schemas: &SchemaSet,
    seed: u64,
    n: usize,
) -> Result<Vec<Demonstration>, DataError> {
    let mut demos = synth_generate(schemas, seed, n)?;
    let n_train = n * 70 / 100;
    let n_val = n * 15 / 100;
    for (i, d) in demos.iter_mut().enumerate() {
        d.split = Some(if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        });
    }
    Ok(demos)
}

struct GoalSample {
    goal: GoalSpec,
    instruction: String,
    grounding: BTreeMap<String, String>,
}

/// Randomized legal initial scene over the schema's full inventory.
pub fn random_scene(schema: &Arc<DomainSchema>, rng: &mut Rng) -> WorldState {
    let universe = Universe::full(schema);
    let mut state = WorldState::empty(universe.clone());
    let n = universe.len() as u16;
    let prop = |name: &str| schema.property(name).expect("shipped property");
    let is_surface = prop("IsSurface");
    let is_graspable = prop("IsGraspable");
    let is_openable = prop("IsOpenable");
    let on_top = schema.rel("OnTop").expect("shipped relation");
    let open_ch = schema.state_channel("Open").expect("shipped state");
    let closed_ch = schema.state_channel("Closed").expect("shipped state");
    let on_ch = schema.state_channel("On").expect("shipped state");
    let off_ch = schema.state_channel("Off").expect("shipped state");

    let surfaces: Vec<u16> = (0..n)
        .filter(|&o| universe.object(o).prop_vec[is_surface])
        .collect();
    for o in 0..n {
        let inst = universe.object(o);
        if inst.prop_vec[is_graspable] && rng.coin(0.55) {
            // Plates are both graspable and surfaces; avoid self-support.
            let candidates: Vec<u16> = surfaces.iter().copied().filter(|&s| s != o).collect();
            if !candidates.is_empty() {
                let support = *rng.choose(&candidates);
                state
                    .insert(Predicate::binary(on_top, o, support))
                    .expect("legal placement");
            }
        }
        if inst.prop_vec[is_openable] {
            let ch = if rng.coin(0.8) { closed_ch } else { open_ch };
            state
                .insert(Predicate::unary(schema.channel_rel(ch), o))
                .expect("openable class declares Open/Closed");
        }
        if inst.allowed_states[on_ch] && inst.allowed_states[off_ch] {
            let ch = if rng.coin(0.85) { off_ch } else { on_ch };
            state
                .insert(Predicate::unary(schema.channel_rel(ch), o))
                .expect("device class declares On/Off");
        }
    }
    state
}

fn sample_goal(template: Template, state: &WorldState, rng: &mut Rng) -> Option<GoalSample> {
    let schema = state.schema().clone();
    let universe = state.universe().clone();
    let n = universe.len() as u16;
    let prop = |name: &str| schema.property(name).expect("shipped property");
    let (is_surface, is_graspable, is_container, is_openable, is_pressable, is_turnable) = (
        prop("IsSurface"),
        prop("IsGraspable"),
        prop("IsContainer"),
        prop("IsOpenable"),
        prop("IsPressable"),
        prop("IsTurnable"),
    );
    let on_top = schema.rel("OnTop").expect("shipped relation");
    let inside = schema.rel("Inside").expect("shipped relation");
    let closed_rel = schema.channel_rel(schema.state_channel("Closed").unwrap());
    let off_rel = schema.channel_rel(schema.state_channel("Off").unwrap());
    let on_rel = schema.channel_rel(schema.state_channel("On").unwrap());

    let objects_with = |p: usize| -> Vec<u16> {
        (0..n)
            .filter(|&o| universe.object(o).prop_vec[p])
            .collect()
    };
    // First instance of each pooled class present in this schema; grounding
    // is deterministic per class so the instance choice is learnable.
    let pooled = |pool: &[&str], prop: usize| -> Vec<u16> {
        let named: Vec<u16> = pool
            .iter()
            .filter_map(|cls| {
                (0..n).find(|&o| {
                    universe.object(o).class == *cls && universe.object(o).prop_vec[prop]
                })
            })
            .collect();
        if named.is_empty() {
            objects_with(prop)
        } else {
            named
        }
    };
    let id = |o: u16| universe.object(o).id.clone();
    let class = |o: u16| universe.object(o).class.clone();

    match template {
        Template::FetchTo => {
            let graspables = pooled(FETCH_ITEMS, is_graspable);
            let surfaces = pooled(FETCH_SURFACES, is_surface);
            if graspables.is_empty() || surfaces.is_empty() {
                return None;
            }
            let x = *rng.choose(&graspables);
            let y = *rng.choose(&surfaces);
            if x == y || state.has(&Predicate::binary(on_top, x, y)) {
                return None;
            }
            let goal = GoalSpec {
                plus: BTreeSet::from([Predicate::binary(on_top, x, y)]),
                minus: BTreeSet::new(),
            };
            let verb = *rng.choose(FETCH_VERBS);
            let instruction = format!("{verb} the {} on the {}", class(x), class(y));
            let grounding = BTreeMap::from([(class(x), id(x)), (class(y), id(y))]);
            Some(GoalSample {
                goal,
                instruction,
                grounding,
            })
        }
        Template::StoreIn => {
            let graspables = pooled(FETCH_ITEMS, is_graspable);
            let containers = pooled(STORE_CONTAINERS, is_container);
            if graspables.is_empty() || containers.is_empty() {
                return None;
            }
            let x = *rng.choose(&graspables);
            let c = *rng.choose(&containers);
            if x == c || state.has(&Predicate::binary(inside, x, c)) {
                return None;
            }
            let mut plus = BTreeSet::from([Predicate::binary(inside, x, c)]);
            // A closed openable container must end closed again, forcing the
            // open-place-close shape.
            if universe.object(c).prop_vec[is_openable]
                && state.has(&Predicate::unary(closed_rel, c))
            {
                plus.insert(Predicate::unary(closed_rel, c));
            }
            let goal = GoalSpec {
                plus,
                minus: BTreeSet::new(),
            };
            let verb = *rng.choose(STORE_VERBS);
            let instruction = format!("{verb} the {} in the {}", class(x), class(c));
            let grounding = BTreeMap::from([(class(x), id(x)), (class(c), id(c))]);
            Some(GoalSample {
                goal,
                instruction,
                grounding,
            })
        }
        Template::TurnOn => {
            let switchable: Vec<u16> = (0..n)
                .filter(|&o| {
                    let inst = universe.object(o);
                    inst.prop_vec[is_pressable] || inst.prop_vec[is_turnable]
                })
                .collect();
            let mut devices: Vec<u16> = TURN_ON_DEVICES
                .iter()
                .filter_map(|cls| {
                    switchable
                        .iter()
                        .copied()
                        .find(|&o| universe.object(o).class == *cls)
                })
                .collect();
            if devices.is_empty() {
                devices = switchable;
            }
            devices.retain(|&o| state.has(&Predicate::unary(off_rel, o)));
            if devices.is_empty() {
                return None;
            }
            let a = *rng.choose(&devices);
            let goal = GoalSpec {
                plus: BTreeSet::from([Predicate::unary(on_rel, a)]),
                minus: BTreeSet::new(),
            };
            let verb = *rng.choose(TURN_ON_VERBS);
            let instruction = format!("{verb} the {}", class(a));
            let grounding = BTreeMap::from([(class(a), id(a))]);
            Some(GoalSample {
                goal,
                instruction,
                grounding,
            })
        }
        Template::Gather => {
            // Pooled classes with at least two graspable instances; take the
            // two lowest ids so eight search steps always suffice.
            let mut by_class: BTreeMap<String, Vec<u16>> = BTreeMap::new();
            for o in 0..n {
                let inst = universe.object(o);
                if inst.prop_vec[is_graspable] {
                    by_class.entry(inst.class.clone()).or_default().push(o);
                }
            }
            let mut multi: Vec<(&String, &Vec<u16>)> = by_class
                .iter()
                .filter(|(cls, v)| v.len() >= 2 && GATHER_CLASSES.contains(&cls.as_str()))
                .collect();
            if multi.is_empty() {
                multi = by_class.iter().filter(|(_, v)| v.len() >= 2).collect();
            }
            if multi.is_empty() {
                return None;
            }
            let (cls, members) = multi[rng.below(multi.len())];
            let (a, b) = (members[0], members[1]);
            let surfaces = pooled(FETCH_SURFACES, is_surface);
            let y = *rng.choose(&surfaces);
            if y == a || y == b {
                return None;
            }
            if state.has(&Predicate::binary(on_top, a, y))
                || state.has(&Predicate::binary(on_top, b, y))
            {
                return None;
            }
            let goal = GoalSpec {
                plus: BTreeSet::from([
                    Predicate::binary(on_top, a, y),
                    Predicate::binary(on_top, b, y),
                ]),
                minus: BTreeSet::new(),
            };
            let verb = *rng.choose(GATHER_VERBS);
            let instruction = format!("{verb} the {}s on the {}", cls, class(y));
            let grounding = BTreeMap::from([(class(y), id(y))]);
            Some(GoalSample {
                goal,
                instruction,
                grounding,
            })
        }
    }
}

//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured detail. Oracles are implemented locally and independently of
//! the library paths they check.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use goalnet_core::data::{
    extract_supervision, load_dataset, random_scene, save_dataset, synth_generate, TrainConfig,
    Trainer,
};
use goalnet_core::domain::schema::{Condition, EffectArg, EffectTemplate, Term};
use goalnet_core::domain::{
    apply_action, check_preconditions, enumerate_groundings, goal_check, relation_diff,
    DomainSchema, GoalSpec, GroundedAction, Predicate, SchemaSet, Universe, WorldState,
};
use goalnet_core::lang::{AliasMap, EmbeddingTable, SentenceEncoder};
use goalnet_core::metrics::{
    evaluate, f1, grr, ied, make_generalization_set, sji, EvalConfig, GeneralizationMode,
    GrrDirection, ParaphraseRules, VerbLexicon,
};
use goalnet_core::model::{GoalNet, GoalNetConfig, ModelDims, DatumInputs, MAX_ROLLOUT_STEPS};
use goalnet_core::planner::{plan, symsim_step, PlannerConfig};
use goalnet_core::rng::Rng;

// ---------------------------------------------------------------------------
// shared helpers

fn kitchen() -> Arc<DomainSchema> {
    SchemaSet::builtin().get("kitchen").unwrap().clone()
}

/// Subset universe over named kitchen instances.
fn subset_universe(schema: &Arc<DomainSchema>, ids: &[&str]) -> Arc<Universe> {
    let members: Vec<(String, String)> = schema
        .instances
        .iter()
        .filter(|i| ids.contains(&i.id.as_str()))
        .map(|i| (i.id.clone(), i.class.clone()))
        .collect();
    assert_eq!(members.len(), ids.len(), "fixture id missing from schema");
    Universe::new(Arc::clone(schema), &members).unwrap()
}

/// Randomized legal state over an arbitrary universe: placements for
/// graspables, paired state bits for openables and switchables.
fn randomize(universe: &Arc<Universe>, rng: &mut Rng) -> WorldState {
    let schema = &universe.schema;
    let mut state = WorldState::empty(universe.clone());
    let surface = schema.property("IsSurface").unwrap();
    let graspable = schema.property("IsGraspable").unwrap();
    let openable = schema.property("IsOpenable").unwrap();
    let on_top = schema.rel("OnTop").unwrap();
    let near = schema.rel("Near").unwrap();
    let open_ch = schema.state_channel("Open").unwrap();
    let closed_ch = schema.state_channel("Closed").unwrap();
    let on_ch = schema.state_channel("On").unwrap();
    let off_ch = schema.state_channel("Off").unwrap();
    let container = schema.property("IsContainer").unwrap();
    let inside = schema.rel("Inside").unwrap();
    let connected = schema.rel("ConnectedTo").unwrap();
    let water_ch = schema.state_channel("HasWater").unwrap();
    let robot = universe.index_of("robot").ok();
    let n = universe.len() as u16;
    let surfaces: Vec<u16> = (0..n)
        .filter(|&o| universe.object(o).prop_vec[surface])
        .collect();
    let containers: Vec<u16> = (0..n)
        .filter(|&o| universe.object(o).prop_vec[container])
        .collect();
    for o in 0..n {
        let inst = universe.object(o);
        if inst.prop_vec[graspable] {
            match rng.below(5) {
                0 | 1 => {
                    let candidates: Vec<u16> =
                        surfaces.iter().copied().filter(|&s| s != o).collect();
                    if !candidates.is_empty() {
                        let support = *rng.choose(&candidates);
                        state.insert(Predicate::binary(on_top, o, support)).unwrap();
                    }
                }
                2 => {
                    let candidates: Vec<u16> =
                        containers.iter().copied().filter(|&c| c != o).collect();
                    if !candidates.is_empty() {
                        let holder = *rng.choose(&candidates);
                        state.insert(Predicate::binary(inside, o, holder)).unwrap();
                    }
                }
                3 => {
                    if let Some(r) = robot {
                        state.insert(Predicate::binary(connected, o, r)).unwrap();
                    }
                }
                _ => {}
            }
        }
        if inst.allowed_states[water_ch] && rng.coin(0.4) {
            state
                .insert(Predicate::unary(schema.channel_rel(water_ch), o))
                .unwrap();
        }
        if inst.prop_vec[openable] {
            let ch = if rng.coin(0.7) { closed_ch } else { open_ch };
            state
                .insert(Predicate::unary(schema.channel_rel(ch), o))
                .unwrap();
        }
        if inst.allowed_states[on_ch] && inst.allowed_states[off_ch] {
            let ch = if rng.coin(0.8) { off_ch } else { on_ch };
            state
                .insert(Predicate::unary(schema.channel_rel(ch), o))
                .unwrap();
        }
        if let Some(r) = robot {
            if o != r && rng.coin(0.2) {
                state.insert(Predicate::binary(near, r, o)).unwrap();
            }
        }
    }
    state
}

// ---------------------------------------------------------------------------
// criterion 1: metric oracles

mod brute {
    //! Independent set-arithmetic and DP references.
    use super::*;

    fn count_in(of: &BTreeSet<Predicate>, within: &BTreeSet<Predicate>) -> usize {
        let v: Vec<&Predicate> = within.iter().collect();
        of.iter().filter(|p| v.contains(p)).count()
    }

    pub fn sji(gt: &GoalSpec, pred: &GoalSpec) -> f64 {
        let inter = count_in(&gt.plus, &pred.plus) + count_in(&gt.minus, &pred.minus);
        let union = gt.plus.len() + gt.minus.len() + pred.plus.len() + pred.minus.len()
            - count_in(&pred.plus, &gt.plus)
            - count_in(&pred.minus, &gt.minus);
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn grr(gt: &GoalSpec, pred: &GoalSpec) -> f64 {
        let plus_ok = gt.plus.iter().all(|p| pred.plus.iter().any(|q| q == p));
        let minus_ok = gt.minus.iter().all(|p| pred.minus.iter().any(|q| q == p));
        if plus_ok && minus_ok {
            1.0
        } else {
            0.0
        }
    }

    fn f1_side(gt: &BTreeSet<Predicate>, pred: &BTreeSet<Predicate>) -> f64 {
        if gt.is_empty() && pred.is_empty() {
            return 1.0;
        }
        if gt.is_empty() || pred.is_empty() {
            return 0.0;
        }
        let tp = count_in(&gt.clone(), pred) as f64;
        let p = tp / pred.len() as f64;
        let r = tp / gt.len() as f64;
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn f1(gt: &GoalSpec, pred: &GoalSpec) -> f64 {
        (f1_side(&gt.plus, &pred.plus) + f1_side(&gt.minus, &pred.minus)) / 2.0
    }

    /// Full-matrix Levenshtein.
    pub fn levenshtein(a: &[GroundedAction], b: &[GroundedAction]) -> usize {
        let (m, n) = (a.len(), b.len());
        let mut d = vec![vec![0usize; n + 1]; m + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=n {
            d[0][j] = j;
        }
        for i in 1..=m {
            for j in 1..=n {
                let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
            }
        }
        d[m][n]
    }
}

#[test]
fn criterion_01_metric_oracles() {
    let start = Instant::now();
    let schema = kitchen();
    let universe = Universe::full(&schema);
    let mut rng = Rng::new(101);
    // Predicate pool over the first eight objects.
    let mut pool: Vec<Predicate> = Vec::new();
    for rel in 0..schema.relations.len() {
        for a in 0..8u16 {
            if schema.relations[rel].arity == 2 {
                for b in 0..8u16 {
                    pool.push(Predicate::binary(rel, a, b));
                }
            } else {
                pool.push(Predicate::unary(rel, a));
            }
        }
    }
    let sample_goal = |rng: &mut Rng| -> GoalSpec {
        let mut plus = BTreeSet::new();
        let mut minus = BTreeSet::new();
        for _ in 0..rng.below(6) {
            plus.insert(pool[rng.below(pool.len())]);
        }
        for _ in 0..rng.below(6) {
            let p = pool[rng.below(pool.len())];
            if !plus.contains(&p) {
                minus.insert(p);
            }
        }
        GoalSpec { plus, minus }
    };
    for _ in 0..1000 {
        let gt = sample_goal(&mut rng);
        let pred = sample_goal(&mut rng);
        assert_eq!(sji(&gt, &pred), brute::sji(&gt, &pred));
        assert_eq!(f1(&gt, &pred), brute::f1(&gt, &pred));
        assert_eq!(
            grr(&gt, &pred, GrrDirection::GroundTruthInPredicted),
            brute::grr(&gt, &pred)
        );
    }

    // Edit-distance oracle over random action sequences.
    let groundings = {
        let state = WorldState::empty(universe.clone());
        enumerate_groundings(&state)
    };
    for _ in 0..1000 {
        let sample_seq = |rng: &mut Rng| -> Vec<GroundedAction> {
            (0..rng.below(9))
                .map(|_| groundings[rng.below(groundings.len())].clone())
                .collect()
        };
        let a = sample_seq(&mut rng);
        let b = sample_seq(&mut rng);
        let expected = if a.is_empty() && b.is_empty() {
            1.0
        } else {
            1.0 - brute::levenshtein(&a, &b) as f64 / a.len().max(b.len()) as f64
        };
        assert_eq!(ied(&a, &b), expected);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("criterion 1 (metric oracles, 2000 pairs, {elapsed:?}): PASS");
}

// ---------------------------------------------------------------------------
// criterion 2: domain soundness

/// Independent grounding of a schema's declared effects against a state:
/// expected additions are the grounded adds not already present, expected
/// removals are the grounded/wildcard-expanded dels present and not re-added.
fn declared_effects(
    schema: &DomainSchema,
    ga: &GroundedAction,
    state: &WorldState,
) -> (BTreeSet<Predicate>, BTreeSet<Predicate>) {
    let def = &schema.actions[ga.action];
    let resolve = |t: &EffectArg| -> Option<u16> {
        match t {
            EffectArg::Param(i) => Some(ga.args[*i]),
            EffectArg::Const(id) => Some(state.universe().index_of(id).unwrap()),
            EffectArg::Wildcard => None,
        }
    };
    let expand = |tmpl: &EffectTemplate| -> Vec<Predicate> {
        let fixed: Vec<Option<u16>> = tmpl.args.iter().map(resolve).collect();
        if fixed.iter().all(Option::is_some) {
            let object = if fixed.len() == 2 { fixed[1] } else { None };
            vec![Predicate {
                rel: tmpl.rel as u16,
                subject: fixed[0].unwrap(),
                object,
            }]
        } else {
            state
                .relations()
                .iter()
                .filter(|p| {
                    p.rel as usize == tmpl.rel
                        && fixed[0].map_or(true, |s| p.subject == s)
                        && match (fixed.get(1), p.object) {
                            (Some(Some(o)), Some(po)) => po == *o,
                            (Some(None), Some(_)) => true,
                            (None, None) => true,
                            _ => false,
                        }
                })
                .copied()
                .collect()
        }
    };
    let adds: BTreeSet<Predicate> = def.add.iter().flat_map(|t| expand(t)).collect();
    let dels: BTreeSet<Predicate> = def.del.iter().flat_map(|t| expand(t)).collect();
    let expected_plus: BTreeSet<Predicate> =
        adds.iter().filter(|p| !state.has(p)).copied().collect();
    let expected_minus: BTreeSet<Predicate> = dels
        .iter()
        .filter(|p| state.has(p) && !adds.contains(p))
        .copied()
        .collect();
    (expected_plus, expected_minus)
}

#[test]
fn criterion_02_domain_soundness() {
    let start = Instant::now();
    let schema = kitchen();
    let universe = subset_universe(
        &schema,
        &[
            "robot",
            "mug_1",
            "sink",
            "counter_1",
            "fridge",
            "microwave",
            "sinkknob",
            "plate_1",
            "syrup_1",
            "coke_1",
        ],
    );
    assert_eq!(universe.len(), 10);
    let mut rng = Rng::new(202);
    let mut applied = 0usize;
    let mut covered: BTreeSet<String> = BTreeSet::new();
    for _ in 0..40 {
        let state = randomize(&universe, &mut rng);
        for ga in enumerate_groundings(&state) {
            if !check_preconditions(&ga, &state).unwrap() {
                continue;
            }
            let next = apply_action(&ga, &state).unwrap();
            let diff = relation_diff(&state, &next).unwrap();
            let (expected_plus, expected_minus) = declared_effects(&schema, &ga, &state);
            assert_eq!(
                diff.plus, expected_plus,
                "additions of {} diverge from the declaration",
                ga.to_string(&universe)
            );
            assert_eq!(
                diff.minus, expected_minus,
                "removals of {} diverge from the declaration",
                ga.to_string(&universe)
            );
            covered.insert(ga.name(&schema).to_string());
            applied += 1;
        }
    }
    assert_eq!(
        covered.len(),
        schema.actions.len(),
        "some action never fired: {covered:?}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!(
        "criterion 2 (domain soundness, {} legal applications over 40 states, {:?}): PASS",
        applied, elapsed
    );
}

// ---------------------------------------------------------------------------
// criterion 3: planner optimality

/// Shortest solution length by plain depth-staged enumeration (no pruning);
/// `None` when nothing within the bound satisfies the goal.
fn enumeration_optimum(state: &WorldState, goal: &GoalSpec, bound: usize) -> Option<usize> {
    if goal_check(state, goal) {
        return Some(0);
    }
    fn dfs(state: &WorldState, goal: &GoalSpec, depth: usize) -> bool {
        if depth == 0 {
            return false;
        }
        for ga in enumerate_groundings(state) {
            if !check_preconditions(&ga, state).unwrap() {
                continue;
            }
            let next = apply_action(&ga, state).unwrap();
            if goal_check(&next, goal) || dfs(&next, goal, depth - 1) {
                return true;
            }
        }
        false
    }
    // A sequence of exactly length L exists iff dfs at depth L reaches the
    // goal; staging by L yields the optimum.
    (1..=bound).find(|&l| dfs(state, goal, l))
}

#[test]
fn criterion_03_planner_optimality() {
    let start = Instant::now();
    let schema = kitchen();
    let universe = subset_universe(
        &schema,
        &[
            "robot", "mug_1", "sink", "counter_1", "fridge", "sinkknob", "plate_1", "coke_1",
        ],
    );
    assert!(universe.len() <= 8);
    let mut rng = Rng::new(303);
    let cfg = PlannerConfig::default();
    let mut solved = 0usize;
    while solved < 200 {
        let state = randomize(&universe, &mut rng);
        // Random legal walk of up to four steps defines a solvable goal.
        let mut cursor = state.clone();
        let walk_len = 1 + rng.below(4);
        for _ in 0..walk_len {
            let legal: Vec<GroundedAction> = enumerate_groundings(&cursor)
                .into_iter()
                .filter(|ga| check_preconditions(ga, &cursor).unwrap())
                .collect();
            if legal.is_empty() {
                break;
            }
            cursor = apply_action(&legal[rng.below(legal.len())], &cursor).unwrap();
        }
        let goal = relation_diff(&state, &cursor).unwrap();
        if goal.is_empty() {
            continue;
        }
        let result = plan(&state, &goal, &cfg).expect("walk-derived goals are solvable");
        assert!(
            goal_check(&result.final_state, &goal),
            "plan replay misses the goal"
        );
        let mut replay = state.clone();
        for a in &result.actions {
            replay = apply_action(a, &replay).unwrap();
        }
        assert!(goal_check(&replay, &goal));
        let optimum = enumeration_optimum(&state, &goal, 4)
            .expect("walk of length <= 4 bounds the optimum");
        assert_eq!(
            result.actions.len(),
            optimum,
            "plan length diverges from the enumeration optimum"
        );
        solved += 1;
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!("criterion 3 (planner optimality, 200 goals, {elapsed:?}): PASS");
}

// ---------------------------------------------------------------------------
// criterion 4: SymSim identity

#[test]
fn criterion_04_symsim_identity() {
    let start = Instant::now();
    let schemas = SchemaSet::builtin();
    let mut rng = Rng::new(404);
    for i in 0..1000 {
        let schema = if i % 2 == 0 {
            schemas.get("kitchen").unwrap()
        } else {
            schemas.get("livingroom").unwrap()
        };
        let a = random_scene(schema, &mut rng);
        let b = random_scene(schema, &mut rng);
        let diff = relation_diff(&a, &b).unwrap();
        let rebuilt = symsim_step(&a, &diff);
        assert!(rebuilt == b, "symsim(a, diff(a,b)) != b at pair {i}");
    }
    let elapsed = start.elapsed();
    println!("criterion 4 (SymSim identity, 1000 pairs, {elapsed:?}): PASS");
}

// ---------------------------------------------------------------------------
// criterion 5: gradient correctness

#[test]
fn criterion_05_gradient_correctness() {
    let start = Instant::now();
    let report = goalnet_core::fixtures::run_gradcheck(1e-4).unwrap();
    assert!(
        report.max_rel_error < 1e-4,
        "max relative error {:.3e}",
        report.max_rel_error
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "criterion 5 (gradient correctness, {} coordinates, max {:.3e}, {:?}): PASS",
        report.coordinates_checked, report.max_rel_error, elapsed
    );
}

// ---------------------------------------------------------------------------
// criterion 6: grammar safety

#[test]
fn criterion_06_grammar_safety() {
    let start = Instant::now();
    let schemas = SchemaSet::builtin();
    let encoder = SentenceEncoder::new(EmbeddingTable::builtin());
    let aliases = AliasMap::builtin();
    let phrases = [
        "put the mug on the counter",
        "place the pillow on the couch",
        "turn on the tv",
        "gather the books on the shelf",
        "store the coke in the fridge",
        "fill water in the kettle",
        "random words without nouns",
    ];
    let mut rng = Rng::new(606);
    let mut decoded = 0usize;
    let mut emitted = 0usize;
    'outer: for net_seed in 0.. {
        let schema = if net_seed % 2 == 0 {
            schemas.get("kitchen").unwrap()
        } else {
            schemas.get("livingroom").unwrap()
        };
        let dims = ModelDims::for_schema(schema);
        let net = GoalNet::new(GoalNetConfig::new(dims, net_seed));
        let state = random_scene(schema, &mut rng);
        let inputs = DatumInputs::prepare(
            &state,
            None,
            phrases[rng.below(phrases.len())],
            None,
            &encoder,
            &aliases,
            &net.config,
        )
        .unwrap();
        let l_vec = net.project_instruction(&inputs.sent_vec).out;
        let mut ctx = net.initial_context();
        let mut events = Vec::new();
        for _ in 0..500 {
            let (_cache, pred, new_ctx) = net
                .step_forward(&state, &inputs, &l_vec, &ctx, &events, Some(&mut rng))
                .unwrap();
            ctx = new_ctx;
            let goal = pred.goal();
            events = goalnet_core::model::history_events(&goal, &inputs, &net.config);
            for p in goal.plus.iter().chain(goal.minus.iter()) {
                emitted += 1;
                let def = &schema.relations[p.rel as usize];
                let rendered = state.pred_to_string(p);
                let first = goalnet_core::domain::feasible_fillers(
                    p.rel as usize,
                    goalnet_core::domain::Slot::First,
                    &state,
                );
                assert!(
                    first.contains(&p.subject),
                    "subject violates the grammar table: {rendered}"
                );
                match p.object {
                    Some(o) => {
                        assert_eq!(def.arity, 2);
                        let second = goalnet_core::domain::feasible_fillers(
                            p.rel as usize,
                            goalnet_core::domain::Slot::Second,
                            &state,
                        );
                        assert!(
                            second.contains(&o),
                            "object violates the grammar table: {rendered}"
                        );
                        // Direct schema facts, independent of the filler
                        // helper the decoder itself consults.
                        let target = state.universe().object(o);
                        match def.name.as_str() {
                            "OnTop" => assert!(
                                target.prop_vec[schema.property("IsSurface").unwrap()],
                                "{rendered}"
                            ),
                            "Inside" => assert!(
                                target.prop_vec[schema.property("IsContainer").unwrap()],
                                "{rendered}"
                            ),
                            "ConnectedTo" => assert_eq!(target.class, "robot", "{rendered}"),
                            _ => {}
                        }
                        if def.name == "Near" {
                            assert_eq!(
                                state.universe().object(p.subject).class,
                                "robot",
                                "{rendered}"
                            );
                        }
                    }
                    None => {
                        assert_eq!(def.arity, 1);
                        let channel = def.state_channel.unwrap();
                        assert!(
                            state.universe().object(p.subject).allowed_states[channel],
                            "undeclared state channel asserted: {rendered}"
                        );
                    }
                }
            }
            decoded += 1;
            if decoded >= 10_000 {
                break 'outer;
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "criterion 6 (grammar safety, {decoded} decodes, {emitted} predicates, {elapsed:?}): PASS"
    );
}

// ---------------------------------------------------------------------------
// criterion 7: rollout cap

#[test]
fn criterion_07_rollout_cap() {
    let schemas = SchemaSet::builtin();
    let schema = schemas.get("kitchen").unwrap();
    let dims = ModelDims::for_schema(schema);
    let mut net = GoalNet::new(GoalNetConfig::new(dims, 7));
    // Adversarial never-stop model: the NULL entry of both relation heads is
    // suppressed so a constraint is decoded every step.
    let null = net.config.dims.null_rel();
    net.params.pos_rel.bias.data[null] = -1e3;
    net.params.neg_rel.bias.data[null] = -1e3;
    let encoder = SentenceEncoder::new(EmbeddingTable::builtin());
    let aliases = AliasMap::builtin();
    let mut rng = Rng::new(707);
    let state = random_scene(schema, &mut rng);
    let rollout = net
        .infer_rollout(
            &state,
            None,
            "keep going forever",
            None,
            &encoder,
            &aliases,
            &PlannerConfig::default(),
        )
        .unwrap();
    assert!(rollout.result.hit_cap);
    assert_eq!(rollout.result.step_goals.len(), MAX_ROLLOUT_STEPS);
    assert_eq!(rollout.predictions.len(), MAX_ROLLOUT_STEPS);
    println!("criterion 7 (rollout cap at exactly {MAX_ROLLOUT_STEPS} iterations): PASS");
}

// ---------------------------------------------------------------------------
// criterion 8: learning sanity + temporal-context ablation direction

#[test]
fn criterion_08_learning_sanity() {
    let start = Instant::now();
    let schemas = SchemaSet::builtin();
    let demos = synth_generate(&schemas, 11, 200).unwrap();
    let (train_set, rest) = demos.split_at(140);
    let (val_set, test_set) = rest.split_at(30);
    let dims = ModelDims::for_schema(schemas.first());
    let encoder = SentenceEncoder::new(EmbeddingTable::builtin());
    let aliases = AliasMap::builtin();
    let eval_cfg = EvalConfig {
        workers: 4,
        ..Default::default()
    };

    // Train in blocks of 20 epochs, at most 200, until both thresholds hold.
    let mut config = GoalNetConfig::new(dims.clone(), 0);
    config.seed = 0;
    let mut trainer = Trainer::new(
        GoalNet::new(config),
        train_set,
        val_set,
        &encoder,
        &aliases,
        TrainConfig {
            seed: 0,
            ..Default::default()
        },
    )
    .unwrap();
    let mut full_train_grr = 0.0;
    let mut full_test_grr = 0.0;
    let mut epochs_used = 0;
    for _ in 0..10 {
        for _ in 0..20 {
            trainer.run_epoch().unwrap();
        }
        epochs_used += 20;
        full_train_grr = evaluate(train_set, trainer.net(), &encoder, &aliases, &eval_cfg)
            .unwrap()
            .mean_grr;
        full_test_grr = evaluate(test_set, trainer.net(), &encoder, &aliases, &eval_cfg)
            .unwrap()
            .mean_grr;
        if full_train_grr >= 0.90 && full_test_grr >= 0.60 {
            break;
        }
    }
    assert!(
        full_train_grr >= 0.90,
        "training-set GRR {full_train_grr:.3} < 0.90 after {epochs_used} epochs"
    );
    assert!(
        full_test_grr >= 0.60,
        "held-out GRR {full_test_grr:.3} < 0.60 after {epochs_used} epochs"
    );

    // Ablating the temporal context on the same seed must not beat the full
    // model's held-out GRR by more than 0.05.
    let mut ablated_config = GoalNetConfig::new(dims, 0);
    ablated_config.ablation.temporal_context = false;
    let mut ablated = Trainer::new(
        GoalNet::new(ablated_config),
        train_set,
        val_set,
        &encoder,
        &aliases,
        TrainConfig {
            seed: 0,
            ..Default::default()
        },
    )
    .unwrap();
    for _ in 0..epochs_used {
        ablated.run_epoch().unwrap();
    }
    let ablated_test_grr = evaluate(test_set, ablated.net(), &encoder, &aliases, &eval_cfg)
        .unwrap()
        .mean_grr;
    assert!(
        ablated_test_grr <= full_test_grr + 0.05,
        "temporal-context ablation unexpectedly improves held-out GRR: \
         {ablated_test_grr:.3} vs {full_test_grr:.3}"
    );

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 1800, "took {elapsed:?}");
    println!(
        "criterion 8 (learning sanity: {epochs_used} epochs, train GRR {full_train_grr:.3}, \
         held-out GRR {full_test_grr:.3}, ablated {ablated_test_grr:.3}, {elapsed:?}): PASS"
    );
}

// ---------------------------------------------------------------------------
// criterion 9: generalization harness

#[test]
fn criterion_09_generalization_harness() {
    let start = Instant::now();
    let schemas = SchemaSet::builtin();
    let demos = synth_generate(&schemas, 11, 120).unwrap();
    let (train_set, rest) = demos.split_at(84);
    let (val_set, test_set) = rest.split_at(18);
    let verbs = VerbLexicon::builtin();
    let paraphrases = ParaphraseRules::builtin();

    let transformed =
        make_generalization_set(test_set, GeneralizationMode::Verb, &verbs, &paraphrases);
    assert!(!transformed.is_empty(), "no datum admitted a verb rewrite");
    // The transform yields a valid dataset whose ground truth is unchanged.
    let schemas_check = SchemaSet::builtin();
    let reloaded = load_dataset(&save_dataset(&transformed), &schemas_check).unwrap();
    assert_eq!(reloaded.len(), transformed.len());
    for t in &transformed {
        let source_id = t.id.strip_suffix("_verbgen").unwrap();
        let source = test_set.iter().find(|d| d.id == source_id).unwrap();
        assert_eq!(t.states, source.states, "ground-truth states changed");
        assert_eq!(t.actions, source.actions, "ground-truth actions changed");
        assert_ne!(t.instruction, source.instruction);
    }
    // Unseen-verb check: no replacement verb occurs anywhere in the corpus.
    for (_, synonym) in verbs.entries() {
        for d in &demos {
            assert!(
                !contains_word(&d.instruction, synonym),
                "synonym `{synonym}` occurs in the source corpus"
            );
        }
    }

    // Train briefly and report GRR on the transformed set; no threshold.
    let encoder = SentenceEncoder::new(EmbeddingTable::builtin());
    let aliases = AliasMap::builtin();
    let mut trainer = Trainer::new(
        GoalNet::new(GoalNetConfig::new(ModelDims::for_schema(schemas.first()), 0)),
        train_set,
        val_set,
        &encoder,
        &aliases,
        TrainConfig {
            seed: 0,
            ..Default::default()
        },
    )
    .unwrap();
    for _ in 0..40 {
        trainer.run_epoch().unwrap();
    }
    let eval_cfg = EvalConfig {
        workers: 4,
        ..Default::default()
    };
    let report = evaluate(&transformed, trainer.net(), &encoder, &aliases, &eval_cfg).unwrap();
    let elapsed = start.elapsed();
    println!(
        "criterion 9 (generalization harness: {} verb-rewritten demos, \
         GRR {:.3} SJI {:.3} IED {:.3} F1 {:.3}, {:?}): PASS",
        transformed.len(),
        report.mean_grr,
        report.mean_sji,
        report.mean_ied,
        report.mean_f1,
        elapsed
    );
}

fn contains_word(text: &str, needle: &str) -> bool {
    let padded = format!(" {} ", text.to_lowercase());
    padded.contains(&format!(" {needle} "))
}

// ---------------------------------------------------------------------------
// criterion 10: reproducibility

#[test]
fn criterion_10_reproducibility() {
    let start = Instant::now();
    let schemas = SchemaSet::builtin();
    let encoder = SentenceEncoder::new(EmbeddingTable::builtin());
    let aliases = AliasMap::builtin();
    let run = || -> (String, String) {
        let demos = synth_generate(&schemas, 42, 16).unwrap();
        let (train_set, rest) = demos.split_at(11);
        let (val_set, test_set) = rest.split_at(2);
        let outcome = goalnet_core::data::train(
            GoalNet::new(GoalNetConfig::new(ModelDims::for_schema(schemas.first()), 42)),
            train_set,
            val_set,
            &encoder,
            &aliases,
            TrainConfig {
                seed: 42,
                max_epochs: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let log = serde_json::to_string(&outcome.log).unwrap();
        let report = evaluate(
            test_set,
            &outcome.net,
            &encoder,
            &aliases,
            &EvalConfig::default(),
        )
        .unwrap();
        (log, serde_json::to_string(&report).unwrap())
    };
    let (log_a, report_a) = run();
    let (log_b, report_b) = run();
    assert_eq!(log_a, log_b, "training logs differ between identical runs");
    assert_eq!(report_a, report_b, "reports differ between identical runs");
    let elapsed = start.elapsed();
    println!("criterion 10 (reproducibility, two identical runs, {elapsed:?}): PASS");
}

// ---------------------------------------------------------------------------
// definitional backstop: a perfect oracle replaying the recorded constraint
// sequence scores 1.0 on every metric.

#[test]
fn oracle_replay_scores_all_ones() {
    let schemas = SchemaSet::builtin();
    let demos = synth_generate(&schemas, 77, 12).unwrap();
    for demo in &demos {
        let supervision = extract_supervision(demo);
        let mut cursor = 0usize;
        let result = goalnet_core::planner::rollout_execute(
            demo.initial_state(),
            |_| {
                let goal = supervision.get(cursor).cloned().unwrap_or_default();
                cursor += 1;
                goal
            },
            &PlannerConfig::default(),
            MAX_ROLLOUT_STEPS,
        );
        assert!(result.failed_steps.is_empty());
        let gt = demo.aggregate();
        let pred = relation_diff(demo.initial_state(), result.final_state()).unwrap();
        assert_eq!(sji(&gt, &pred), 1.0);
        assert_eq!(f1(&gt, &pred), 1.0);
        assert_eq!(grr(&gt, &pred, GrrDirection::GroundTruthInPredicted), 1.0);
        assert_eq!(ied(&demo.actions, &result.actions), 1.0);
    }
    println!("oracle replay scores 1.0 on all four metrics: PASS");
}

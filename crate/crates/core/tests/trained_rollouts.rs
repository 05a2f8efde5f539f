//! Trained-model rollouts on handcrafted kitchen tasks: after overfitting a
//! two-instruction dataset, the rollout reproduces each instruction's
//! constraint sequence and reaches its goal state.

use goalnet_core::data::{train, Demonstration, TrainConfig};
use goalnet_core::domain::{
    apply_action, goal_check, ground_action, GoalSpec, Predicate, SchemaSet, Universe, WorldState,
};
use goalnet_core::lang::{AliasMap, EmbeddingTable, SentenceEncoder};
use goalnet_core::metrics::{evaluate, EvalConfig};
use goalnet_core::model::{GoalNet, GoalNetConfig, ModelDims};
use goalnet_core::planner::PlannerConfig;

fn scripted_demo(
    id: &str,
    instruction: &str,
    grounding: &[(&str, &str)],
    start: WorldState,
    script: &[(&str, &[&str])],
) -> Demonstration {
    let universe = start.universe().clone();
    let mut states = vec![start];
    let mut actions = Vec::new();
    for (name, args) in script {
        let ga = ground_action(&universe, name, args).unwrap();
        let next = apply_action(&ga, states.last().unwrap()).unwrap();
        states.push(next);
        actions.push(ga);
    }
    Demonstration {
        id: id.to_string(),
        domain: "kitchen".to_string(),
        instruction: instruction.to_string(),
        grounding: Some(
            grounding
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        ),
        states,
        actions,
        split: None,
    }
}

#[test]
fn overfit_kitchen_tasks_reach_their_goal_states() {
    let schemas = SchemaSet::builtin();
    let schema = schemas.get("kitchen").unwrap();
    let universe = Universe::full(schema);

    let mut base = WorldState::empty(universe.clone());
    let off_rel = schema.channel_rel(schema.state_channel("Off").unwrap());
    let sinkknob = universe.index_of("sinkknob").unwrap();
    base.insert(Predicate::unary(off_rel, sinkknob)).unwrap();
    let on_top = schema.rel("OnTop").unwrap();
    let mug = universe.index_of("mug_1").unwrap();
    let counter = universe.index_of("counter_1").unwrap();
    base.insert(Predicate::binary(on_top, mug, counter)).unwrap();

    let go_sink = scripted_demo(
        "go_sink",
        "go to the sink",
        &[("sink", "sink")],
        base.clone(),
        &[("MoveTo", &["robot", "sink"])],
    );
    let fill_mug = scripted_demo(
        "fill_mug",
        "fill water in the mug",
        &[("mug", "mug_1"), ("sink", "sink")],
        base.clone(),
        &[
            ("MoveTo", &["robot", "mug_1"]),
            ("Grasp", &["robot", "mug_1"]),
            ("PlaceOn", &["mug_1", "sink"]),
            ("StateOn", &["sinkknob"]),
        ],
    );
    let demos = [go_sink, fill_mug];

    let dims = ModelDims::reduced(schema, 32, 32, 32);
    let net = GoalNet::new(GoalNetConfig::new(dims, 3));
    let encoder = SentenceEncoder::with_out_dim(EmbeddingTable::new(32), 32);
    let aliases = AliasMap::builtin();
    let cfg = TrainConfig {
        seed: 1,
        max_epochs: 1500,
        patience: 1500,
        planner_prob: 0.0,
        gumbel_noise: false,
        lr: 1e-3,
        decay_every: 800,
        ..Default::default()
    };
    let outcome = train(net, &demos, &[], &encoder, &aliases, cfg).unwrap();

    // "go to the sink": first step predicts the Near constraint, second stops.
    let rollout = outcome
        .net
        .infer_rollout(
            demos[0].initial_state(),
            Some("go_sink"),
            &demos[0].instruction,
            demos[0].grounding.as_ref(),
            &encoder,
            &aliases,
            &PlannerConfig::default(),
        )
        .unwrap();
    let near = base.parse_predicate("Near(robot, sink)").unwrap();
    assert_eq!(
        rollout.predictions[0].positive,
        [near].into_iter().collect(),
        "first step should predict Near(robot, sink)"
    );
    assert!(rollout.predictions[0].negative.is_empty());
    assert!(rollout.predictions[1].is_stop(), "second step should stop");
    assert!(!rollout.result.hit_cap);

    // "fill water in the mug": the terminal state carries the instruction's
    // goal constraints.
    let rollout = outcome
        .net
        .infer_rollout(
            demos[1].initial_state(),
            Some("fill_mug"),
            &demos[1].instruction,
            demos[1].grounding.as_ref(),
            &encoder,
            &aliases,
            &PlannerConfig::default(),
        )
        .unwrap();
    let goal = GoalSpec {
        plus: [
            base.parse_predicate("OnTop(mug_1, sink)").unwrap(),
            base.parse_predicate("stateIsOn(sinkknob)").unwrap(),
        ]
        .into_iter()
        .collect(),
        minus: [base.parse_predicate("OnTop(mug_1, counter_1)").unwrap()]
            .into_iter()
            .collect(),
    };
    assert!(
        goal_check(rollout.result.final_state(), &goal),
        "terminal state misses the fill-water goal"
    );

    // The evaluation harness agrees with the direct goal check.
    let report = evaluate(&demos, &outcome.net, &encoder, &aliases, &EvalConfig::default()).unwrap();
    assert_eq!(report.mean_grr, 1.0, "both overfit tasks should be reached");
    assert_eq!(report.mean_ied, 1.0);
}

//! Fixed fixtures for numeric verification.
//!
//! The gradient check runs the full six-head loss over a three-object scene.
//! Layer widths are reduced so central differences over every parameter stay
//! cheap; the architecture and code paths are the shipped ones.

use std::sync::Arc;

use crate::data::dataset::Demonstration;
use crate::data::DatumLossFixture;
use crate::domain::{apply_action, ground_action, DomainSchema, Universe, WorldState};
use crate::lang::{AliasMap, EmbeddingTable, SentenceEncoder};
use crate::model::{GoalNet, GoalNetConfig, HistoryMode, ModelDims, ModelError};
use crate::nn::{grad_check, GradCheckReport};

const TOY_SCHEMA: &str = r#"{
  "name": "toy",
  "max_objects": 5,
  "states": [
    { "name": "Open", "relation": "stateIsOpen" },
    { "name": "Closed", "relation": "stateIsClosed" },
    { "name": "On", "relation": "stateIsOn" },
    { "name": "Off", "relation": "stateIsOff" },
    { "name": "HasWater", "relation": "stateHasWater" },
    { "name": "DoorOpen", "relation": "stateDoorOpen" },
    { "name": "DoorClosed", "relation": "stateDoorClosed" }
  ],
  "properties": [
    "IsSurface", "IsGraspable", "IsTurnable", "IsPressable", "IsOpenable",
    "IsSqueezeable", "IsContainer", "IsAddable", "IsScoopable", "IsPourable",
    "IsPlaceableOn", "IsPlaceableIn"
  ],
  "relations": ["OnTop", "Inside", "Near", "ConnectedTo"],
  "classes": [
    { "token": "robot", "properties": [], "states": [] },
    { "token": "box", "properties": ["IsGraspable", "IsPlaceableOn"], "states": [] },
    { "token": "table", "properties": ["IsSurface", "IsPressable"], "states": ["On", "Off"] }
  ],
  "instances": [
    { "id": "robot", "class": "robot" },
    { "id": "box_1", "class": "box" },
    { "id": "table_1", "class": "table" }
  ],
  "actions": [
    {
      "name": "Grasp",
      "params": [{ "name": "r", "classes": ["robot"] }, { "name": "o" }],
      "pre": ["IsGraspable(o)", "Near(r,o)", "!ConnectedTo(o,r)"],
      "add": ["ConnectedTo(o,r)"],
      "del": ["OnTop(o,*)", "Inside(o,*)"]
    },
    {
      "name": "MoveTo",
      "params": [{ "name": "r", "classes": ["robot"] }, { "name": "o" }],
      "pre": [],
      "add": ["Near(r,o)"],
      "del": []
    },
    {
      "name": "PlaceOn",
      "params": [{ "name": "o1" }, { "name": "o2" }],
      "pre": ["ConnectedTo(o1,robot)", "IsSurface(o2)"],
      "add": ["OnTop(o1,o2)"],
      "del": ["ConnectedTo(o1,robot)"]
    },
    {
      "name": "Press",
      "params": [{ "name": "o" }],
      "pre": ["Near(robot,o)", "IsPressable(o)"],
      "add": ["stateIsOn(o)"],
      "del": ["stateIsOff(o)"]
    }
  ],
  "feasibility": [
    { "relation": "OnTop", "slot": 2, "property": "IsSurface" },
    { "relation": "Near", "slot": 1, "class": "robot" },
    { "relation": "ConnectedTo", "slot": 2, "class": "robot" }
  ]
}"#;

pub fn toy_schema() -> Arc<DomainSchema> {
    DomainSchema::from_json(TOY_SCHEMA).expect("toy schema is valid")
}

/// Five-action demo over the toy scene, exercising binary relations, a
/// unary state flip and the stop step.
pub fn toy_demo(schema: &Arc<DomainSchema>) -> Demonstration {
    let universe = Universe::full(schema);
    let mut start = WorldState::empty(universe.clone());
    let table = universe.index_of("table_1").unwrap();
    let off = schema.channel_rel(schema.state_channel("Off").unwrap());
    start
        .insert(crate::domain::Predicate::unary(off, table))
        .unwrap();
    let script: [(&str, &[&str]); 5] = [
        ("MoveTo", &["robot", "box_1"]),
        ("Grasp", &["robot", "box_1"]),
        ("MoveTo", &["robot", "table_1"]),
        ("PlaceOn", &["box_1", "table_1"]),
        ("Press", &["table_1"]),
    ];
    let mut states = vec![start];
    let mut actions = Vec::new();
    for (name, args) in script {
        let ga = ground_action(&universe, name, args).unwrap();
        let next = apply_action(&ga, states.last().unwrap()).unwrap();
        states.push(next);
        actions.push(ga);
    }
    Demonstration {
        id: "toy_fixture".into(),
        domain: "toy".into(),
        instruction: "put the box on the table and press it".into(),
        grounding: Some(
            [
                ("box".to_string(), "box_1".to_string()),
                ("table".to_string(), "table_1".to_string()),
            ]
            .into_iter()
            .collect(),
        ),
        states,
        actions,
        split: None,
    }
}

/// Reduced-width model plus the deterministic teacher-forced loss over the
/// toy demo.
pub fn gradcheck_fixture() -> Result<(GoalNet, DatumLossFixture), ModelError> {
    gradcheck_fixture_with(|_| {})
}

/// As [`gradcheck_fixture`] after applying a configuration tweak, so every
/// ablation branch of the reverse pass can be verified on the same scene.
pub fn gradcheck_fixture_with(
    tweak: impl FnOnce(&mut GoalNetConfig),
) -> Result<(GoalNet, DatumLossFixture), ModelError> {
    let schema = toy_schema();
    let dims = ModelDims::reduced(&schema, 8, 10, 6);
    let mut config = GoalNetConfig::new(dims, 17);
    // The smooth temperature keeps autoregressive-forwarding gradients well
    // above the finite-difference roundoff floor; the backward path is the
    // same code for any positive tau.
    config.tau = 1.0;
    tweak(&mut config);
    let net = GoalNet::new(config);
    let table = EmbeddingTable::new(8);
    let encoder = SentenceEncoder::with_out_dim(table, 10);
    let aliases = AliasMap::parse("").expect("empty alias map");
    let demo = toy_demo(&schema);
    let fixture = DatumLossFixture::new(&demo, &encoder, &aliases, &net)?;
    Ok((net, fixture))
}

/// Central-difference verification of the full six-head loss over the
/// three-object fixture.
pub fn run_gradcheck(eps: f64) -> Result<GradCheckReport, ModelError> {
    run_gradcheck_with(eps, |_| {})
}

pub fn run_gradcheck_with(
    eps: f64,
    tweak: impl FnOnce(&mut GoalNetConfig),
) -> Result<GradCheckReport, ModelError> {
    let (mut net, fixture) = gradcheck_fixture_with(tweak)?;
    let report = grad_check(
        &mut net,
        |n: &mut GoalNet| fixture.loss(n).map_err(flatten),
        |n: &mut GoalNet| fixture.backward(n).map_err(flatten),
        eps,
    )?;
    Ok(report)
}

fn flatten(e: ModelError) -> crate::nn::NnError {
    match e {
        ModelError::Nn(inner) => inner,
        other => crate::nn::NnError::Checkpoint(other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_demo_is_transition_valid() {
        let schema = toy_schema();
        let demo = toy_demo(&schema);
        assert_eq!(demo.states.len(), demo.actions.len() + 1);
        for (j, action) in demo.actions.iter().enumerate() {
            let next = apply_action(action, &demo.states[j]).unwrap();
            assert_eq!(next, demo.states[j + 1]);
        }
    }

    #[test]
    fn full_loss_gradient_verifies_under_one_in_ten_thousand() {
        let report = run_gradcheck(1e-4).unwrap();
        assert!(
            report.max_rel_error < 1e-4,
            "max relative error {:.3e}",
            report.max_rel_error
        );
        assert!(report.coordinates_checked > 1000);
    }

    #[test]
    fn every_ablation_branch_of_the_reverse_pass_verifies() {
        // Parameters untouched by a disabled component keep zero analytic
        // and numeric gradients, so the check still covers them.
        let cases: Vec<(&str, fn(&mut GoalNetConfig))> = vec![
            ("relational off", |c| c.ablation.relational = false),
            ("temporal off", |c| c.ablation.temporal_context = false),
            ("positive head off", |c| c.ablation.positive_head = false),
            ("negative head off", |c| c.ablation.negative_head = false),
            ("goal-object attention off", |c| {
                c.ablation.goal_object_attention = false
            }),
            ("instruction attention off", |c| {
                c.ablation.instruction_attention = false
            }),
            ("union history", |c| {
                c.history_mode = HistoryMode::PositiveAndNegative
            }),
        ];
        for (label, tweak) in cases {
            let report = run_gradcheck_with(1e-4, tweak).unwrap();
            assert!(
                report.max_rel_error < 1e-4,
                "{label}: max relative error {:.3e}",
                report.max_rel_error
            );
        }
    }
}

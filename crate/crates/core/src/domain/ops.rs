//! Action semantics: grounding, precondition checking, the deterministic
//! transition, relation diffs, goal checking, adjacency encoding and grammar
//! feasibility.

use std::collections::BTreeSet;
use std::fmt;

use crate::domain::schema::{
    ActionSchema, Condition, DomainSchema, EffectArg, Term,
};
use crate::domain::state::{GoalSpec, Predicate, Universe, WorldState};
use crate::domain::DomainError;

/// An action schema with all parameters bound to objects of one universe.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundedAction {
    pub action: usize,
    pub args: Vec<u16>,
}

impl GroundedAction {
    pub fn name<'a>(&self, schema: &'a DomainSchema) -> &'a str {
        &schema.actions[self.action].name
    }

    pub fn to_string(&self, universe: &Universe) -> String {
        let schema = &universe.schema;
        let args: Vec<&str> = self
            .args
            .iter()
            .map(|&a| universe.object(a).id.as_str())
            .collect();
        format!("{}({})", schema.actions[self.action].name, args.join(", "))
    }
}

impl fmt::Display for GroundedAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "action{}({:?})", self.action, self.args)
    }
}

/// Bind an action by name and argument ids against a universe.
pub fn ground_action(
    universe: &Universe,
    name: &str,
    arg_ids: &[&str],
) -> Result<GroundedAction, DomainError> {
    let schema = &universe.schema;
    let action = schema.action(name)?;
    let def = &schema.actions[action];
    if arg_ids.len() != def.params.len() {
        return Err(DomainError::SchemaViolation(format!(
            "action {name} takes {} arguments, got {}",
            def.params.len(),
            arg_ids.len()
        )));
    }
    let mut args = Vec::with_capacity(arg_ids.len());
    for (param, id) in def.params.iter().zip(arg_ids) {
        let idx = universe.index_of(id)?;
        if let Some(classes) = &param.classes {
            let class = &universe.object(idx).class;
            if !classes.iter().any(|c| c == class) {
                return Err(DomainError::SchemaViolation(format!(
                    "argument {id} of {name} must be one of {classes:?}"
                )));
            }
        }
        args.push(idx);
    }
    Ok(GroundedAction { action, args })
}

fn resolve_term(term: &Term, args: &[u16], universe: &Universe) -> Result<u16, DomainError> {
    match term {
        Term::Param(i) => Ok(args[*i]),
        Term::Const(id) => universe.index_of(id),
    }
}

fn condition_holds(
    cond: &Condition,
    args: &[u16],
    state: &WorldState,
) -> Result<bool, DomainError> {
    match cond {
        Condition::Prop { property, arg } => {
            let obj = resolve_term(arg, args, state.universe())?;
            Ok(state.universe().object(obj).prop_vec[*property])
        }
        Condition::Pred {
            negated,
            rel,
            args: terms,
        } => {
            let subject = resolve_term(&terms[0], args, state.universe())?;
            let object = match terms.get(1) {
                Some(t) => Some(resolve_term(t, args, state.universe())?),
                None => None,
            };
            let p = Predicate {
                rel: *rel as u16,
                subject,
                object,
            };
            Ok(state.has(&p) != *negated)
        }
    }
}

/// True iff every precondition of the grounded action holds in `state`.
pub fn check_preconditions(
    action: &GroundedAction,
    state: &WorldState,
) -> Result<bool, DomainError> {
    Ok(first_violation(action, state)?.is_none())
}

/// The first violated precondition, rendered for diagnostics, or `None`.
pub fn first_violation(
    action: &GroundedAction,
    state: &WorldState,
) -> Result<Option<String>, DomainError> {
    let schema = state.schema();
    let def = schema
        .actions
        .get(action.action)
        .ok_or_else(|| DomainError::unknown("action index", &action.action.to_string()))?;
    for arg in &action.args {
        if *arg as usize >= state.object_count() {
            return Err(DomainError::UnknownObject {
                id: format!("#{arg}"),
            });
        }
    }
    for cond in &def.pre {
        if !condition_holds(cond, &action.args, state)? {
            return Ok(Some(render_condition(cond, def, schema)));
        }
    }
    Ok(None)
}

fn render_condition(cond: &Condition, def: &ActionSchema, schema: &DomainSchema) -> String {
    let term = |t: &Term| match t {
        Term::Param(i) => def.params[*i].name.clone(),
        Term::Const(c) => c.clone(),
    };
    match cond {
        Condition::Prop { property, arg } => {
            format!("{}({})", schema.properties[*property], term(arg))
        }
        Condition::Pred {
            negated,
            rel,
            args,
        } => {
            let inner = args.iter().map(term).collect::<Vec<_>>().join(", ");
            format!(
                "{}{}({})",
                if *negated { "!" } else { "" },
                schema.relations[*rel].name,
                inner
            )
        }
    }
}

/// Expand an effect template under a binding. Wildcards yield every matching
/// predicate currently in the state.
fn expand_effect(
    rel: usize,
    args: &[EffectArg],
    bound: &[u16],
    state: &WorldState,
) -> Result<Vec<Predicate>, DomainError> {
    let universe = state.universe();
    let fixed: Vec<Option<u16>> = args
        .iter()
        .map(|a| match a {
            EffectArg::Param(i) => Ok(Some(bound[*i])),
            EffectArg::Const(id) => universe.index_of(id).map(Some),
            EffectArg::Wildcard => Ok(None),
        })
        .collect::<Result<Vec<_>, DomainError>>()?;
    if fixed.iter().all(|f| f.is_some()) {
        let subject = fixed[0].unwrap();
        let object = fixed.get(1).map(|o| o.unwrap());
        return Ok(vec![Predicate {
            rel: rel as u16,
            subject,
            object,
        }]);
    }
    // Wildcard expansion against the current relation set.
    let matches = state
        .relations()
        .iter()
        .filter(|p| {
            p.rel as usize == rel
                && fixed[0].is_none_or(|s| p.subject == s)
                && match (fixed.get(1), p.object) {
                    (Some(Some(o)), Some(po)) => po == *o,
                    (Some(None), Some(_)) => true,
                    (None, None) => true,
                    _ => false,
                }
        })
        .copied()
        .collect();
    Ok(matches)
}

/// The deterministic transition: apply postconditions to a copy of `state`.
pub fn apply_action(
    action: &GroundedAction,
    state: &WorldState,
) -> Result<WorldState, DomainError> {
    if let Some(violated) = first_violation(action, state)? {
        return Err(DomainError::IllegalAction {
            action: action.to_string(state.universe()),
            violated,
        });
    }
    let schema = state.schema().clone();
    let def = &schema.actions[action.action];
    let mut next = state.clone();
    for tmpl in &def.del {
        for p in expand_effect(tmpl.rel, &tmpl.args, &action.args, state)? {
            next.remove(&p);
        }
    }
    for tmpl in &def.add {
        for p in expand_effect(tmpl.rel, &tmpl.args, &action.args, state)? {
            next.insert(p)?;
        }
    }
    Ok(next)
}

/// Single-step difference over relation sets:
/// `plus = R(b) \ R(a)`, `minus = R(a) \ R(b)`.
pub fn relation_diff(a: &WorldState, b: &WorldState) -> Result<GoalSpec, DomainError> {
    if !a.universe().same_population(b.universe()) {
        return Err(DomainError::UniverseMismatch);
    }
    let plus: BTreeSet<Predicate> = b.relations().difference(a.relations()).copied().collect();
    let minus: BTreeSet<Predicate> = a.relations().difference(b.relations()).copied().collect();
    Ok(GoalSpec { plus, minus })
}

/// Goal check: all positive constraints present, no negative one present.
pub fn goal_check(state: &WorldState, goal: &GoalSpec) -> bool {
    goal.plus.iter().all(|p| state.has(p)) && !goal.minus.iter().any(|p| state.has(p))
}

/// Fixed-length outgoing-edge encoding of one object: for each binary
/// relation type and object slot, whether `obj` has that edge. Slots beyond
/// the scene population stay zero.
pub fn adjacency_vector(obj: u16, state: &WorldState) -> Result<Vec<f64>, DomainError> {
    if obj as usize >= state.object_count() {
        return Err(DomainError::UnknownObject {
            id: format!("#{obj}"),
        });
    }
    let schema = state.schema();
    let width = schema.max_objects;
    let mut v = vec![0.0; schema.binary_rel_count * width];
    for p in state.relations() {
        if p.subject == obj {
            if let Some(o) = p.object {
                v[(p.rel as usize) * width + o as usize] = 1.0;
            }
        }
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    First,
    Second,
}

/// Objects allowed by the grammar table to fill `slot` of `rel`.
///
/// Unary relations accept only objects whose class declares the mirrored
/// state channel and have no second slot at all.
pub fn feasible_fillers(rel: usize, slot: Slot, state: &WorldState) -> BTreeSet<u16> {
    let schema = state.schema();
    let def = &schema.relations[rel];
    if def.arity == 1 {
        return match slot {
            Slot::Second => BTreeSet::new(),
            Slot::First => {
                let channel = def.state_channel.expect("unary relations mirror a channel");
                (0..state.object_count() as u16)
                    .filter(|&o| state.universe().object(o).allowed_states[channel])
                    .collect()
            }
        };
    }
    let slot_no = match slot {
        Slot::First => 1,
        Slot::Second => 2,
    };
    (0..state.object_count() as u16)
        .filter(|&o| {
            let inst = state.universe().object(o);
            schema
                .feasibility
                .iter()
                .filter(|r| r.rel == rel && r.slot == slot_no)
                .all(|r| {
                    r.requires_property.is_none_or(|p| inst.prop_vec[p])
                        && r.requires_class.as_deref().is_none_or(|c| inst.class == c)
                })
        })
        .collect()
}

/// All groundings of every action schema against a scene, pre-filtered by
/// parameter class restrictions and static (property-only, single-parameter)
/// preconditions, in lexicographic (action name, argument id) order.
pub fn enumerate_groundings(state: &WorldState) -> Vec<GroundedAction> {
    enumerate_groundings_over(state, None)
}

/// As [`enumerate_groundings`], optionally restricted to a candidate object
/// set (plus any constants the schema references).
pub fn enumerate_groundings_over(
    state: &WorldState,
    candidates: Option<&BTreeSet<u16>>,
) -> Vec<GroundedAction> {
    let schema = state.schema();
    let universe = state.universe();
    let mut order: Vec<usize> = (0..schema.actions.len()).collect();
    order.sort_by(|&a, &b| schema.actions[a].name.cmp(&schema.actions[b].name));

    let mut out = Vec::new();
    for action in order {
        let def = &schema.actions[action];
        // Candidate objects per parameter slot.
        let per_param: Vec<Vec<u16>> = def
            .params
            .iter()
            .enumerate()
            .map(|(pi, param)| {
                (0..state.object_count() as u16)
                    .filter(|&o| {
                        let inst = universe.object(o);
                        if let Some(classes) = &param.classes {
                            if !classes.contains(&inst.class) {
                                return false;
                            }
                        }
                        if let Some(cands) = candidates {
                            // Class-restricted slots (the robot) always pass.
                            if param.classes.is_none() && !cands.contains(&o) {
                                return false;
                            }
                        }
                        // Static filter: property tests naming only this param.
                        def.pre.iter().all(|c| match c {
                            Condition::Prop {
                                property,
                                arg: Term::Param(i),
                            } if *i == pi => inst.prop_vec[*property],
                            _ => true,
                        })
                    })
                    .collect()
            })
            .collect();
        if per_param.is_empty() {
            out.push(GroundedAction {
                action,
                args: vec![],
            });
            continue;
        }
        if per_param.iter().any(|c| c.is_empty()) {
            continue;
        }
        let mut cursor = vec![0usize; per_param.len()];
        loop {
            let args: Vec<u16> = cursor
                .iter()
                .zip(&per_param)
                .map(|(&i, c)| c[i])
                .collect();
            out.push(GroundedAction { action, args });
            // Odometer increment; object ids are sorted within the universe,
            // so index order is id order.
            let mut k = per_param.len();
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                cursor[k] += 1;
                if cursor[k] < per_param[k].len() {
                    break;
                }
                cursor[k] = 0;
                if k == 0 {
                    cursor.clear();
                    break;
                }
            }
            if cursor.is_empty() {
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::schema::SchemaSet;
    use crate::domain::state::{Predicate, Universe, WorldState};
    use crate::rng::Rng;
    use std::sync::Arc;

    fn kitchen_state() -> WorldState {
        let schemas = SchemaSet::builtin();
        let schema = schemas.get("kitchen").unwrap();
        WorldState::empty(Universe::full(schema))
    }

    fn pred(state: &WorldState, text: &str) -> Predicate {
        state.parse_predicate(text).unwrap()
    }

    fn act(state: &WorldState, name: &str, args: &[&str]) -> GroundedAction {
        ground_action(state.universe(), name, args).unwrap()
    }

    #[test]
    fn grasp_preconditions_hold_when_near_and_graspable() {
        let mut s = kitchen_state();
        s.insert(pred(&s, "Near(robot, mug_1)")).unwrap();
        let grasp = act(&s, "Grasp", &["robot", "mug_1"]);
        assert!(check_preconditions(&grasp, &s).unwrap());
    }

    #[test]
    fn moveto_has_no_preconditions() {
        let s = kitchen_state();
        let mv = act(&s, "MoveTo", &["robot", "sink"]);
        assert!(check_preconditions(&mv, &s).unwrap());
    }

    #[test]
    fn grasp_blocked_when_already_connected() {
        let mut s = kitchen_state();
        s.insert(pred(&s, "Near(robot, mug_1)")).unwrap();
        s.insert(pred(&s, "ConnectedTo(mug_1, robot)")).unwrap();
        let grasp = act(&s, "Grasp", &["robot", "mug_1"]);
        assert!(!check_preconditions(&grasp, &s).unwrap());
        let violated = first_violation(&grasp, &s).unwrap().unwrap();
        assert!(violated.contains("ConnectedTo"), "{violated}");
    }

    #[test]
    fn ground_action_rejects_unknown_object() {
        let s = kitchen_state();
        let err = ground_action(s.universe(), "MoveTo", &["robot", "ghost_9"]).unwrap_err();
        assert!(matches!(err, DomainError::UnknownObject { .. }));
    }

    #[test]
    fn moveto_adds_near() {
        let s = kitchen_state();
        let mv = act(&s, "MoveTo", &["robot", "sink"]);
        let next = apply_action(&mv, &s).unwrap();
        assert!(next.has(&pred(&next, "Near(robot, sink)")));
        // Value semantics: the input state is untouched.
        assert!(!s.has(&pred(&s, "Near(robot, sink)")));
    }

    #[test]
    fn state_open_swaps_closed_for_open() {
        let mut s = kitchen_state();
        s.insert(pred(&s, "stateIsClosed(fridge)")).unwrap();
        let open = act(&s, "StateOpen", &["fridge"]);
        let next = apply_action(&open, &s).unwrap();
        assert!(next.has(&pred(&next, "stateIsOpen(fridge)")));
        assert!(!next.has(&pred(&next, "stateIsClosed(fridge)")));
        let fridge = next.universe().index_of("fridge").unwrap();
        let open_ch = next.schema().state_channel("Open").unwrap();
        let closed_ch = next.schema().state_channel("Closed").unwrap();
        assert!(next.state_bit(fridge, open_ch));
        assert!(!next.state_bit(fridge, closed_ch));
    }

    #[test]
    fn illegal_action_names_first_violated_template() {
        let s = kitchen_state();
        let grasp = act(&s, "Grasp", &["robot", "mug_1"]);
        let err = apply_action(&grasp, &s).unwrap_err();
        match err {
            DomainError::IllegalAction { violated, .. } => {
                assert!(violated.contains("Near"), "{violated}")
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn relation_diff_identity_and_antisymmetry() {
        let mut a = kitchen_state();
        a.insert(pred(&a, "Near(robot, mug_1)")).unwrap();
        let same = relation_diff(&a, &a).unwrap();
        assert!(same.is_empty());

        let mut b = a.clone();
        b.insert(pred(&b, "OnTop(mug_1, sink)")).unwrap();
        let fwd = relation_diff(&a, &b).unwrap();
        let rev = relation_diff(&b, &a).unwrap();
        assert_eq!(fwd.plus, rev.minus);
        assert_eq!(fwd.minus, rev.plus);
    }

    #[test]
    fn relation_diff_composes_with_apply() {
        let mut s = kitchen_state();
        s.insert(pred(&s, "Near(robot, mug_1)")).unwrap();
        let grasp = act(&s, "Grasp", &["robot", "mug_1"]);
        let next = apply_action(&grasp, &s).unwrap();
        let diff = relation_diff(&s, &next).unwrap();
        assert_eq!(
            diff.plus,
            [pred(&s, "ConnectedTo(mug_1, robot)")].into_iter().collect()
        );
        assert!(diff.minus.is_empty());
    }

    #[test]
    fn relation_diff_rejects_different_universes() {
        let schemas = SchemaSet::builtin();
        let kitchen = kitchen_state();
        let living = WorldState::empty(Universe::full(schemas.get("livingroom").unwrap()));
        assert!(matches!(
            relation_diff(&kitchen, &living),
            Err(DomainError::UniverseMismatch)
        ));
    }

    #[test]
    fn goal_check_examples() {
        let s = kitchen_state();
        assert!(goal_check(&s, &GoalSpec::default()));

        let mut held = s.clone();
        held.insert(pred(&held, "ConnectedTo(mug_1, robot)")).unwrap();
        let place = act(&held, "PlaceOn", &["mug_1", "sink"]);
        let after = apply_action(&place, &held).unwrap();
        let goal = GoalSpec {
            plus: [pred(&after, "OnTop(mug_1, sink)")].into_iter().collect(),
            minus: Default::default(),
        };
        assert!(goal_check(&after, &goal));

        let bad = GoalSpec {
            plus: Default::default(),
            minus: [pred(&after, "OnTop(mug_1, sink)")].into_iter().collect(),
        };
        assert!(!goal_check(&after, &bad));
    }

    #[test]
    fn adjacency_vector_zero_when_isolated_and_shaped_by_schema() {
        let s = kitchen_state();
        let robot = s.universe().index_of("robot").unwrap();
        let v = adjacency_vector(robot, &s).unwrap();
        let expected_len = s.schema().binary_rel_count * s.schema().max_objects;
        assert_eq!(v.len(), expected_len);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn adjacency_vector_marks_exactly_the_near_edge() {
        let s = kitchen_state();
        let mv = act(&s, "MoveTo", &["robot", "mug_1"]);
        let next = apply_action(&mv, &s).unwrap();
        let robot = next.universe().index_of("robot").unwrap();
        let mug = next.universe().index_of("mug_1").unwrap();
        let near = next.schema().rel("Near").unwrap();
        let v = adjacency_vector(robot, &next).unwrap();
        let width = next.schema().max_objects;
        for rel in 0..next.schema().binary_rel_count {
            for slot in 0..width {
                let expected = rel == near && slot == mug as usize;
                assert_eq!(v[rel * width + slot] == 1.0, expected, "rel {rel} slot {slot}");
            }
        }
    }

    #[test]
    fn adjacency_vector_rejects_unknown_object() {
        let s = kitchen_state();
        assert!(adjacency_vector(999, &s).is_err());
    }

    #[test]
    fn feasible_fillers_follow_grammar_table() {
        let s = kitchen_state();
        let schema = s.schema();
        let on_top = schema.rel("OnTop").unwrap();
        let surface = schema.property("IsSurface").unwrap();
        let second = feasible_fillers(on_top, Slot::Second, &s);
        for o in 0..s.object_count() as u16 {
            assert_eq!(
                second.contains(&o),
                s.universe().object(o).prop_vec[surface],
                "object {}",
                s.universe().object(o).id
            );
        }
        // Unary relations have no second slot at all.
        let state_open = schema.rel("stateIsOpen").unwrap();
        assert!(feasible_fillers(state_open, Slot::Second, &s).is_empty());
        // Near's second slot is unrestricted.
        let near = schema.rel("Near").unwrap();
        assert_eq!(
            feasible_fillers(near, Slot::Second, &s).len(),
            s.object_count()
        );
    }

    #[test]
    fn state_bits_and_unary_relations_never_diverge() {
        // Random insert/remove/apply churn, then check the mirror invariant.
        let schemas = SchemaSet::builtin();
        let schema = schemas.get("kitchen").unwrap();
        let mut rng = Rng::new(77);
        let mut s = WorldState::empty(Universe::full(schema));
        let universe = Arc::clone(s.universe());
        for _ in 0..500 {
            let action = rng.below(3);
            let obj = rng.below(universe.len()) as u16;
            let channel = rng.below(schema.states.len());
            let rel = schema.channel_rel(channel);
            match action {
                0 => {
                    let _ = s.insert(Predicate::unary(rel, obj));
                }
                1 => {
                    s.remove(&Predicate::unary(rel, obj));
                }
                _ => {
                    let groundings = enumerate_groundings(&s);
                    if !groundings.is_empty() {
                        let ga = &groundings[rng.below(groundings.len())];
                        if let Ok(next) = apply_action(ga, &s) {
                            s = next;
                        }
                    }
                }
            }
            for o in 0..universe.len() as u16 {
                for ch in 0..schema.states.len() {
                    let as_bit = s.state_bit(o, ch);
                    let as_rel = s.has(&Predicate::unary(schema.channel_rel(ch), o));
                    assert_eq!(as_bit, as_rel, "mirror diverged at object {o} channel {ch}");
                }
            }
        }
    }

    #[test]
    fn apply_action_is_deterministic() {
        let mut s = kitchen_state();
        s.insert(pred(&s, "Near(robot, mug_1)")).unwrap();
        let grasp = act(&s, "Grasp", &["robot", "mug_1"]);
        let a = apply_action(&grasp, &s).unwrap();
        let b = apply_action(&grasp, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn groundings_are_lexicographically_ordered() {
        let s = kitchen_state();
        let groundings = enumerate_groundings(&s);
        let keys: Vec<(String, Vec<String>)> = groundings
            .iter()
            .map(|g| {
                (
                    g.name(s.schema()).to_string(),
                    g.args
                        .iter()
                        .map(|&a| s.universe().object(a).id.clone())
                        .collect(),
                )
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn oversized_scene_is_rejected() {
        let schemas = SchemaSet::builtin();
        let schema = schemas.get("kitchen").unwrap();
        let members: Vec<(String, String)> = (0..50)
            .map(|i| (format!("mug_{i}"), "mug".to_string()))
            .collect();
        let err = Universe::new(Arc::clone(schema), &members).unwrap_err();
        assert!(matches!(err, DomainError::OverCapacity { .. }));
    }
}

#[cfg(test)]
mod reachability_tests {
    use super::*;
    use crate::domain::schema::SchemaSet;
    use crate::domain::state::{Universe, WorldState};
    use crate::rng::Rng;

    #[test]
    fn diff_to_any_reachable_state_is_a_satisfied_goal() {
        // goal_check(s, relation_diff(s0, s)) holds for every s reached by
        // legal actions from s0.
        let schemas = SchemaSet::builtin();
        let schema = schemas.get("livingroom").unwrap();
        let mut rng = Rng::new(404);
        for _ in 0..20 {
            let s0 = WorldState::empty(Universe::full(schema));
            let mut s = s0.clone();
            for _ in 0..rng.below(8) {
                let legal: Vec<GroundedAction> = enumerate_groundings(&s)
                    .into_iter()
                    .filter(|ga| check_preconditions(ga, &s).unwrap())
                    .collect();
                if legal.is_empty() {
                    break;
                }
                s = apply_action(&legal[rng.below(legal.len())], &s).unwrap();
            }
            let goal = relation_diff(&s0, &s).unwrap();
            assert!(goal_check(&s, &goal));
            if !goal.is_empty() {
                assert!(!goal_check(&s0, &goal) || goal.plus.is_empty());
            }
        }
    }
}

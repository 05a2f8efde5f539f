//! Symbolic planning over predicted constraint pairs.
//!
//! Two fidelities, mirroring how the model is trained versus how it is run:
//! [`symsim_step`] applies a constraint pair directly to the relation set
//! without any action reasoning, while [`plan`] searches for a shortest
//! action sequence whose terminal state passes the goal check.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::domain::{
    apply_action, check_preconditions, enumerate_groundings_over, goal_check, DomainError,
    GoalSpec, GroundedAction, WorldState,
};

#[derive(Debug, Clone)]
pub struct PlannerConfig {
    /// Maximum plan length explored by the search.
    pub max_depth: usize,
    /// Node expansion budget.
    pub max_expansions: usize,
    /// Ground actions only over objects mentioned in the goal, the robot,
    /// and objects already related to the robot in the start state. Sound
    /// for this action family: goal predicates only ever mention goal
    /// objects, and any "free" parameter slot (a nearness witness such as
    /// Squeeze's target) is served equally well by an already-near object or
    /// by a goal object reached en route, so restricted plans are never
    /// longer.
    pub restrict_to_goal_objects: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            max_depth: 8,
            max_expansions: 200_000,
            restrict_to_goal_objects: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanFailure {
    /// Search space exhausted within the depth bound.
    ExhaustedDepth,
    /// Expansion budget hit before exhausting the depth bound.
    ExhaustedExpansions,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no plan within depth bound (expanded {expanded} nodes)")]
    NoPlanWithinDepth { expanded: usize },
    #[error("expansion budget exhausted after {expanded} nodes")]
    BudgetExhausted { expanded: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl PlanError {
    pub fn failure_kind(&self) -> Option<PlanFailure> {
        match self {
            PlanError::NoPlanWithinDepth { .. } => Some(PlanFailure::ExhaustedDepth),
            PlanError::BudgetExhausted { .. } => Some(PlanFailure::ExhaustedExpansions),
            PlanError::Domain(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub actions: Vec<GroundedAction>,
    pub final_state: WorldState,
    pub expanded_nodes: usize,
}

/// Low-fidelity state update: apply the constraint pair to the relation set
/// directly, without preconditions or action search. Unary constraints whose
/// subject class does not declare the mirrored channel are dropped rather
/// than corrupting the state/bit mirror.
pub fn symsim_step(state: &WorldState, goal: &GoalSpec) -> WorldState {
    let mut next = state.clone();
    for p in &goal.minus {
        next.remove(p);
    }
    for p in &goal.plus {
        let _ = next.insert(*p);
    }
    next
}

/// Breadth-first search for a shortest action sequence satisfying the goal.
/// Duplicate states are pruned on a canonical relation-set hash; ties between
/// equal-length plans resolve to the lexicographically first expansion order
/// (action name, then argument ids).
pub fn plan(
    state: &WorldState,
    goal: &GoalSpec,
    cfg: &PlannerConfig,
) -> Result<PlanResult, PlanError> {
    if goal_check(state, goal) {
        return Ok(PlanResult {
            actions: vec![],
            final_state: state.clone(),
            expanded_nodes: 0,
        });
    }

    let candidates: Option<BTreeSet<u16>> = if cfg.restrict_to_goal_objects {
        let mut set = BTreeSet::new();
        for p in goal.plus.iter().chain(goal.minus.iter()) {
            set.insert(p.subject);
            if let Some(o) = p.object {
                set.insert(o);
            }
        }
        // The robot's current relation partners serve as nearness witnesses
        // for parameter slots the goal does not mention.
        let robots: BTreeSet<u16> = (0..state.object_count() as u16)
            .filter(|&o| state.universe().object(o).class == crate::domain::ROBOT_CLASS)
            .collect();
        for p in state.relations() {
            if let Some(o) = p.object {
                if robots.contains(&p.subject) {
                    set.insert(o);
                }
                if robots.contains(&o) {
                    set.insert(p.subject);
                }
            }
        }
        Some(set)
    } else {
        None
    };
    let groundings = enumerate_groundings_over(state, candidates.as_ref());

    struct Node {
        state: WorldState,
        parent: usize,
        action: Option<GroundedAction>,
        depth: usize,
    }

    let mut nodes: Vec<Node> = vec![Node {
        state: state.clone(),
        parent: 0,
        action: None,
        depth: 0,
    }];
    let mut queue: VecDeque<usize> = VecDeque::from([0]);
    let mut seen: HashMap<u64, ()> = HashMap::new();
    seen.insert(state.content_hash(), ());
    let mut expanded = 0usize;

    while let Some(idx) = queue.pop_front() {
        if nodes[idx].depth >= cfg.max_depth {
            continue;
        }
        expanded += 1;
        if expanded > cfg.max_expansions {
            return Err(PlanError::BudgetExhausted { expanded });
        }
        for ga in &groundings {
            let applicable = check_preconditions(ga, &nodes[idx].state)?;
            if !applicable {
                continue;
            }
            let next = apply_action(ga, &nodes[idx].state)?;
            let key = next.content_hash();
            if seen.contains_key(&key) {
                continue;
            }
            seen.insert(key, ());
            let depth = nodes[idx].depth + 1;
            let reached = goal_check(&next, goal);
            nodes.push(Node {
                state: next,
                parent: idx,
                action: Some(ga.clone()),
                depth,
            });
            if reached {
                let mut actions = Vec::with_capacity(depth);
                let mut at = nodes.len() - 1;
                let final_state = nodes[at].state.clone();
                while let Some(a) = &nodes[at].action {
                    actions.push(a.clone());
                    at = nodes[at].parent;
                }
                actions.reverse();
                return Ok(PlanResult {
                    actions,
                    final_state,
                    expanded_nodes: expanded,
                });
            }
            queue.push_back(nodes.len() - 1);
        }
    }
    Err(PlanError::NoPlanWithinDepth { expanded })
}

/// Outcome of one predict-plan-execute rollout.
#[derive(Debug)]
pub struct RolloutResult {
    pub actions: Vec<GroundedAction>,
    /// Visited states; `states[0]` is the input state.
    pub states: Vec<WorldState>,
    /// Constraint pair predicted at each iteration.
    pub step_goals: Vec<GoalSpec>,
    /// Actions contributed by each iteration (zero for failed ones).
    pub step_action_counts: Vec<usize>,
    /// Iterations whose plan call failed; execution skipped them.
    pub failed_steps: Vec<usize>,
    /// True when the iteration cap stopped the rollout.
    pub hit_cap: bool,
}

impl RolloutResult {
    pub fn final_state(&self) -> &WorldState {
        self.states.last().expect("rollout keeps the input state")
    }

    pub fn any_failure(&self) -> bool {
        !self.failed_steps.is_empty()
    }
}

/// Iterate predict -> plan -> execute until the step function returns an
/// empty pair or the step cap is reached. A failed plan is skipped and
/// inference continues on the unchanged state.
pub fn rollout_execute<F>(
    start: &WorldState,
    mut step_fn: F,
    cfg: &PlannerConfig,
    max_steps: usize,
) -> RolloutResult
where
    F: FnMut(&WorldState) -> GoalSpec,
{
    let mut result = RolloutResult {
        actions: vec![],
        states: vec![start.clone()],
        step_goals: vec![],
        step_action_counts: vec![],
        failed_steps: vec![],
        hit_cap: false,
    };
    let mut current = start.clone();
    for step in 0..max_steps {
        let goal = step_fn(&current);
        if goal.is_empty() {
            return result;
        }
        result.step_goals.push(goal.clone());
        match plan(&current, &goal, cfg) {
            Ok(plan_result) => {
                result.step_action_counts.push(plan_result.actions.len());
                result.actions.extend(plan_result.actions);
                current = plan_result.final_state.clone();
                result.states.push(plan_result.final_state);
            }
            Err(_) => {
                result.step_action_counts.push(0);
                result.failed_steps.push(step);
            }
        }
    }
    result.hit_cap = true;
    result
}

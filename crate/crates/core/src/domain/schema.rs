//! Domain schema: object classes, state channels, properties, the relation
//! vocabulary, action templates and grammar feasibility rules.
//!
//! Schemas are data. The two shipped domains (`kitchen`, `livingroom`) live
//! under `assets/` and are parsed through [`DomainSchema::from_json`].

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::DomainError;

pub const ROBOT_CLASS: &str = "robot";

/// One entry of the relation vocabulary. Unary relations are state
/// constraints and carry the state channel they mirror.
#[derive(Debug, Clone)]
pub struct RelationDef {
    pub name: String,
    pub arity: u8,
    pub state_channel: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ClassDef {
    pub token: String,
    pub prop_mask: Vec<bool>,
    pub state_mask: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct InstanceDef {
    pub id: String,
    pub class: String,
}

/// Term appearing in a precondition or effect template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Param(usize),
    Const(String),
}

#[derive(Debug, Clone)]
pub enum Condition {
    /// Relation literal, possibly negated: `Near(r,o)`, `!ConnectedTo(o,r)`.
    Pred {
        negated: bool,
        rel: usize,
        args: Vec<Term>,
    },
    /// Property test on one argument: `IsGraspable(o)`.
    Prop { property: usize, arg: Term },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EffectArg {
    Param(usize),
    Const(String),
    /// `*` in a delete template: removes every matching predicate.
    Wildcard,
}

#[derive(Debug, Clone)]
pub struct EffectTemplate {
    pub rel: usize,
    pub args: Vec<EffectArg>,
}

#[derive(Debug, Clone)]
pub struct ParamDef {
    pub name: String,
    /// Restricts which classes may fill the slot (e.g. the robot slot).
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<ParamDef>,
    pub pre: Vec<Condition>,
    pub add: Vec<EffectTemplate>,
    pub del: Vec<EffectTemplate>,
}

/// Grammar feasibility rule: which objects may fill a relation slot.
#[derive(Debug, Clone)]
pub struct FeasibilityRule {
    pub rel: usize,
    pub slot: u8,
    pub requires_property: Option<usize>,
    pub requires_class: Option<String>,
}

#[derive(Debug, Clone)]
pub struct DomainSchema {
    pub name: String,
    pub max_objects: usize,
    /// Boolean state channel names (the `q_o` axes).
    pub states: Vec<String>,
    /// Property names (the `p_o` axes).
    pub properties: Vec<String>,
    /// Full relation vocabulary: binary relations first, then one unary
    /// state-constraint relation per channel.
    pub relations: Vec<RelationDef>,
    pub binary_rel_count: usize,
    pub classes: Vec<ClassDef>,
    pub instances: Vec<InstanceDef>,
    pub actions: Vec<ActionSchema>,
    pub feasibility: Vec<FeasibilityRule>,

    state_idx: BTreeMap<String, usize>,
    prop_idx: BTreeMap<String, usize>,
    rel_idx: BTreeMap<String, usize>,
    class_idx: BTreeMap<String, usize>,
    action_idx: BTreeMap<String, usize>,
}

// ---------------------------------------------------------------------------
// JSON file shape

#[derive(Debug, Serialize, Deserialize)]
struct SchemaJson {
    name: String,
    #[serde(default = "default_max_objects")]
    max_objects: usize,
    states: Vec<StateJson>,
    properties: Vec<String>,
    relations: Vec<String>,
    classes: Vec<ClassJson>,
    instances: Vec<InstanceJson>,
    actions: Vec<ActionJson>,
    #[serde(default)]
    feasibility: Vec<FeasibilityJson>,
}

fn default_max_objects() -> usize {
    45
}

#[derive(Debug, Serialize, Deserialize)]
struct StateJson {
    name: String,
    relation: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassJson {
    token: String,
    #[serde(default)]
    properties: Vec<String>,
    #[serde(default)]
    states: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceJson {
    id: String,
    class: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ActionJson {
    name: String,
    params: Vec<ParamJson>,
    #[serde(default)]
    pre: Vec<String>,
    #[serde(default)]
    add: Vec<String>,
    #[serde(default)]
    del: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamJson {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FeasibilityJson {
    relation: String,
    slot: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    property: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<String>,
}

impl DomainSchema {
    pub fn from_json(text: &str) -> Result<Arc<Self>, DomainError> {
        let raw: SchemaJson =
            serde_json::from_str(text).map_err(|e| DomainError::Parse(e.to_string()))?;
        Self::build(raw)
    }

    fn build(raw: SchemaJson) -> Result<Arc<Self>, DomainError> {
        let state_idx: BTreeMap<String, usize> = raw
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.name.clone(), i))
            .collect();
        let prop_idx: BTreeMap<String, usize> = raw
            .properties
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        if state_idx.len() != raw.states.len() {
            return Err(DomainError::SchemaViolation("duplicate state name".into()));
        }
        if prop_idx.len() != raw.properties.len() {
            return Err(DomainError::SchemaViolation(
                "duplicate property name".into(),
            ));
        }

        let mut relations: Vec<RelationDef> = raw
            .relations
            .iter()
            .map(|name| RelationDef {
                name: name.clone(),
                arity: 2,
                state_channel: None,
            })
            .collect();
        let binary_rel_count = relations.len();
        for (k, s) in raw.states.iter().enumerate() {
            relations.push(RelationDef {
                name: s.relation.clone(),
                arity: 1,
                state_channel: Some(k),
            });
        }
        let rel_idx: BTreeMap<String, usize> = relations
            .iter()
            .enumerate()
            .map(|(i, r)| (r.name.clone(), i))
            .collect();
        if rel_idx.len() != relations.len() {
            return Err(DomainError::SchemaViolation(
                "duplicate relation name".into(),
            ));
        }

        let mut classes = Vec::with_capacity(raw.classes.len());
        let mut class_idx = BTreeMap::new();
        for c in &raw.classes {
            let mut prop_mask = vec![false; raw.properties.len()];
            for p in &c.properties {
                let i = *prop_idx
                    .get(p)
                    .ok_or_else(|| DomainError::unknown("property", p))?;
                prop_mask[i] = true;
            }
            let mut state_mask = vec![false; raw.states.len()];
            for s in &c.states {
                let i = *state_idx
                    .get(s)
                    .ok_or_else(|| DomainError::unknown("state", s))?;
                state_mask[i] = true;
            }
            if class_idx
                .insert(c.token.clone(), classes.len())
                .is_some()
            {
                return Err(DomainError::SchemaViolation(format!(
                    "duplicate class {}",
                    c.token
                )));
            }
            classes.push(ClassDef {
                token: c.token.clone(),
                prop_mask,
                state_mask,
            });
        }

        let mut instances = Vec::with_capacity(raw.instances.len());
        let mut seen = BTreeMap::new();
        for inst in &raw.instances {
            if !class_idx.contains_key(&inst.class) {
                return Err(DomainError::unknown("class", &inst.class));
            }
            if seen.insert(inst.id.clone(), ()).is_some() {
                return Err(DomainError::SchemaViolation(format!(
                    "duplicate instance id {}",
                    inst.id
                )));
            }
            instances.push(InstanceDef {
                id: inst.id.clone(),
                class: inst.class.clone(),
            });
        }
        if instances.len() > raw.max_objects {
            return Err(DomainError::OverCapacity {
                count: instances.len(),
                max: raw.max_objects,
            });
        }

        let mut actions = Vec::with_capacity(raw.actions.len());
        let mut action_idx = BTreeMap::new();
        for a in &raw.actions {
            let params: Vec<ParamDef> = a
                .params
                .iter()
                .map(|p| ParamDef {
                    name: p.name.clone(),
                    classes: p.classes.clone(),
                })
                .collect();
            let param_pos: BTreeMap<&str, usize> = params
                .iter()
                .enumerate()
                .map(|(i, p)| (p.name.as_str(), i))
                .collect();
            let pre = a
                .pre
                .iter()
                .map(|s| parse_condition(s, &param_pos, &rel_idx, &prop_idx, &relations))
                .collect::<Result<Vec<_>, _>>()?;
            let add = a
                .add
                .iter()
                .map(|s| parse_effect(s, &param_pos, &rel_idx, &relations, false))
                .collect::<Result<Vec<_>, _>>()?;
            let del = a
                .del
                .iter()
                .map(|s| parse_effect(s, &param_pos, &rel_idx, &relations, true))
                .collect::<Result<Vec<_>, _>>()?;
            for added in &add {
                for deleted in &del {
                    if added.rel == deleted.rel && added.args == deleted.args {
                        return Err(DomainError::SchemaViolation(format!(
                            "action {} adds and deletes the same template",
                            a.name
                        )));
                    }
                }
            }
            if action_idx.insert(a.name.clone(), actions.len()).is_some() {
                return Err(DomainError::SchemaViolation(format!(
                    "duplicate action {}",
                    a.name
                )));
            }
            actions.push(ActionSchema {
                name: a.name.clone(),
                params,
                pre,
                add,
                del,
            });
        }

        let feasibility = raw
            .feasibility
            .iter()
            .map(|f| {
                let rel = *rel_idx
                    .get(&f.relation)
                    .ok_or_else(|| DomainError::unknown("relation", &f.relation))?;
                let requires_property = match &f.property {
                    Some(p) => Some(
                        *prop_idx
                            .get(p)
                            .ok_or_else(|| DomainError::unknown("property", p))?,
                    ),
                    None => None,
                };
                Ok(FeasibilityRule {
                    rel,
                    slot: f.slot,
                    requires_property,
                    requires_class: f.class.clone(),
                })
            })
            .collect::<Result<Vec<_>, DomainError>>()?;

        Ok(Arc::new(DomainSchema {
            name: raw.name,
            max_objects: raw.max_objects,
            states: raw.states.iter().map(|s| s.name.clone()).collect(),
            properties: raw.properties,
            relations,
            binary_rel_count,
            classes,
            instances,
            actions,
            feasibility,
            state_idx,
            prop_idx,
            rel_idx,
            class_idx,
            action_idx,
        }))
    }

    pub fn rel(&self, name: &str) -> Result<usize, DomainError> {
        self.rel_idx
            .get(name)
            .copied()
            .ok_or_else(|| DomainError::unknown("relation", name))
    }

    pub fn state_channel(&self, name: &str) -> Result<usize, DomainError> {
        self.state_idx
            .get(name)
            .copied()
            .ok_or_else(|| DomainError::unknown("state", name))
    }

    pub fn property(&self, name: &str) -> Result<usize, DomainError> {
        self.prop_idx
            .get(name)
            .copied()
            .ok_or_else(|| DomainError::unknown("property", name))
    }

    pub fn class(&self, token: &str) -> Result<usize, DomainError> {
        self.class_idx
            .get(token)
            .copied()
            .ok_or_else(|| DomainError::unknown("class", token))
    }

    pub fn action(&self, name: &str) -> Result<usize, DomainError> {
        self.action_idx
            .get(name)
            .copied()
            .ok_or_else(|| DomainError::unknown("action", name))
    }

    pub fn class_tokens(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.token.as_str())
    }

    /// The unary relation index mirroring a state channel.
    pub fn channel_rel(&self, channel: usize) -> usize {
        self.binary_rel_count + channel
    }

    /// Two schemas are vocabulary-compatible when a single model can serve
    /// both: same states, properties, relations, actions and capacity.
    pub fn compatible_with(&self, other: &DomainSchema) -> bool {
        self.states == other.states
            && self.properties == other.properties
            && self.max_objects == other.max_objects
            && self.relations.len() == other.relations.len()
            && self
                .relations
                .iter()
                .zip(&other.relations)
                .all(|(a, b)| a.name == b.name && a.arity == b.arity)
            && self.actions.len() == other.actions.len()
            && self
                .actions
                .iter()
                .zip(&other.actions)
                .all(|(a, b)| a.name == b.name)
    }
}

fn split_call(s: &str) -> Result<(&str, Vec<&str>), DomainError> {
    let s = s.trim();
    let open = s
        .find('(')
        .ok_or_else(|| DomainError::Parse(format!("expected call syntax: {s}")))?;
    if !s.ends_with(')') {
        return Err(DomainError::Parse(format!("unterminated call: {s}")));
    }
    let name = s[..open].trim();
    let inner = &s[open + 1..s.len() - 1];
    let args = if inner.trim().is_empty() {
        vec![]
    } else {
        inner.split(',').map(|a| a.trim()).collect()
    };
    Ok((name, args))
}

fn parse_condition(
    text: &str,
    params: &BTreeMap<&str, usize>,
    rel_idx: &BTreeMap<String, usize>,
    prop_idx: &BTreeMap<String, usize>,
    relations: &[RelationDef],
) -> Result<Condition, DomainError> {
    let t = text.trim();
    let (negated, body) = match t.strip_prefix('!') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (name, args) = split_call(body)?;
    let term = |a: &str| -> Term {
        match params.get(a) {
            Some(&i) => Term::Param(i),
            None => Term::Const(a.to_string()),
        }
    };
    if let Some(&p) = prop_idx.get(name) {
        if negated {
            return Err(DomainError::Parse(format!(
                "negated property test unsupported: {text}"
            )));
        }
        if args.len() != 1 {
            return Err(DomainError::Parse(format!(
                "property test takes one argument: {text}"
            )));
        }
        return Ok(Condition::Prop {
            property: p,
            arg: term(args[0]),
        });
    }
    if let Some(&r) = rel_idx.get(name) {
        if args.len() != relations[r].arity as usize {
            return Err(DomainError::Parse(format!(
                "arity mismatch for {name} in {text}"
            )));
        }
        return Ok(Condition::Pred {
            negated,
            rel: r,
            args: args.into_iter().map(term).collect(),
        });
    }
    Err(DomainError::unknown("condition head", name))
}

fn parse_effect(
    text: &str,
    params: &BTreeMap<&str, usize>,
    rel_idx: &BTreeMap<String, usize>,
    relations: &[RelationDef],
    allow_wildcard: bool,
) -> Result<EffectTemplate, DomainError> {
    let (name, args) = split_call(text)?;
    let r = *rel_idx
        .get(name)
        .ok_or_else(|| DomainError::unknown("relation", name))?;
    if args.len() != relations[r].arity as usize {
        return Err(DomainError::Parse(format!(
            "arity mismatch for {name} in {text}"
        )));
    }
    let parsed = args
        .into_iter()
        .map(|a| {
            if a == "*" {
                if !allow_wildcard {
                    return Err(DomainError::Parse(format!(
                        "wildcard only allowed in delete effects: {text}"
                    )));
                }
                Ok(EffectArg::Wildcard)
            } else if let Some(&i) = params.get(a) {
                Ok(EffectArg::Param(i))
            } else {
                Ok(EffectArg::Const(a.to_string()))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EffectTemplate {
        rel: r,
        args: parsed,
    })
}

/// The shipped schemas, keyed by domain name.
#[derive(Debug, Clone)]
pub struct SchemaSet {
    schemas: Vec<Arc<DomainSchema>>,
}

impl SchemaSet {
    pub fn new(schemas: Vec<Arc<DomainSchema>>) -> Result<Self, DomainError> {
        if schemas.is_empty() {
            return Err(DomainError::SchemaViolation("empty schema set".into()));
        }
        for s in &schemas[1..] {
            if !schemas[0].compatible_with(s) {
                return Err(DomainError::SchemaViolation(format!(
                    "schema {} is not vocabulary-compatible with {}",
                    s.name, schemas[0].name
                )));
            }
        }
        Ok(SchemaSet { schemas })
    }

    /// The kitchen and living-room domains bundled with the crate.
    pub fn builtin() -> Self {
        let kitchen = DomainSchema::from_json(include_str!("../../assets/kitchen.json"))
            .expect("bundled kitchen schema is valid");
        let livingroom = DomainSchema::from_json(include_str!("../../assets/livingroom.json"))
            .expect("bundled livingroom schema is valid");
        SchemaSet::new(vec![kitchen, livingroom]).expect("bundled schemas are compatible")
    }

    pub fn get(&self, name: &str) -> Result<&Arc<DomainSchema>, DomainError> {
        self.schemas
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| DomainError::unknown("domain", name))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<DomainSchema>> {
        self.schemas.iter()
    }

    pub fn first(&self) -> &Arc<DomainSchema> {
        &self.schemas[0]
    }
}

//! World states: object instances with boolean state/property vectors plus a
//! typed relation set.
//!
//! Unary state constraints are kept in two synchronized views: as bits on the
//! owning object (used by the encoders) and as predicates in the relation set
//! (used by diffs and goal checks). All mutation funnels through
//! [`WorldState::insert`] / [`WorldState::remove`], which keep both views
//! aligned.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::schema::DomainSchema;
use crate::domain::DomainError;

#[derive(Debug, Clone)]
pub struct ObjectInstance {
    pub id: String,
    pub class: String,
    pub class_idx: usize,
    /// Immutable property vector (`p_o`).
    pub prop_vec: Vec<bool>,
    /// Which state channels this object's class declares.
    pub allowed_states: Vec<bool>,
}

/// The fixed object population of a scene, sorted by id so that encodings and
/// likelihood indices are reproducible.
#[derive(Debug)]
pub struct Universe {
    pub schema: Arc<DomainSchema>,
    pub objects: Vec<ObjectInstance>,
    id_idx: BTreeMap<String, u16>,
}

impl Universe {
    pub fn new(
        schema: Arc<DomainSchema>,
        members: &[(String, String)],
    ) -> Result<Arc<Self>, DomainError> {
        if members.len() > schema.max_objects {
            return Err(DomainError::OverCapacity {
                count: members.len(),
                max: schema.max_objects,
            });
        }
        let mut sorted: Vec<(String, String)> = members.to_vec();
        sorted.sort();
        let mut objects = Vec::with_capacity(sorted.len());
        let mut id_idx = BTreeMap::new();
        for (id, class) in sorted {
            let class_idx = schema.class(&class)?;
            if id_idx.insert(id.clone(), objects.len() as u16).is_some() {
                return Err(DomainError::SchemaViolation(format!(
                    "duplicate object id {id}"
                )));
            }
            let c = &schema.classes[class_idx];
            objects.push(ObjectInstance {
                id,
                class,
                class_idx,
                prop_vec: c.prop_mask.clone(),
                allowed_states: c.state_mask.clone(),
            });
        }
        Ok(Arc::new(Universe {
            schema,
            objects,
            id_idx,
        }))
    }

    /// Universe over the schema's full canonical inventory.
    pub fn full(schema: &Arc<DomainSchema>) -> Arc<Self> {
        let members: Vec<(String, String)> = schema
            .instances
            .iter()
            .map(|i| (i.id.clone(), i.class.clone()))
            .collect();
        Universe::new(Arc::clone(schema), &members).expect("schema inventory is valid")
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<u16, DomainError> {
        self.id_idx
            .get(id)
            .copied()
            .ok_or_else(|| DomainError::UnknownObject { id: id.to_string() })
    }

    pub fn object(&self, idx: u16) -> &ObjectInstance {
        &self.objects[idx as usize]
    }

    pub fn same_population(&self, other: &Universe) -> bool {
        self.objects.len() == other.objects.len()
            && self
                .objects
                .iter()
                .zip(&other.objects)
                .all(|(a, b)| a.id == b.id && a.class == b.class)
    }
}

/// One relation `R(o1, o2)` or unary state constraint `R(o1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Predicate {
    pub rel: u16,
    pub subject: u16,
    pub object: Option<u16>,
}

impl Predicate {
    pub fn binary(rel: usize, subject: u16, object: u16) -> Self {
        Predicate {
            rel: rel as u16,
            subject,
            object: Some(object),
        }
    }

    pub fn unary(rel: usize, subject: u16) -> Self {
        Predicate {
            rel: rel as u16,
            subject,
            object: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    universe: Arc<Universe>,
    /// Per-object state channel bits (`q_o`).
    bits: Vec<u16>,
    relations: BTreeSet<Predicate>,
}

impl WorldState {
    pub fn empty(universe: Arc<Universe>) -> Self {
        let n = universe.len();
        WorldState {
            universe,
            bits: vec![0; n],
            relations: BTreeSet::new(),
        }
    }

    pub fn universe(&self) -> &Arc<Universe> {
        &self.universe
    }

    pub fn schema(&self) -> &Arc<DomainSchema> {
        &self.universe.schema
    }

    pub fn object_count(&self) -> usize {
        self.universe.len()
    }

    pub fn relations(&self) -> &BTreeSet<Predicate> {
        &self.relations
    }

    pub fn has(&self, p: &Predicate) -> bool {
        self.relations.contains(p)
    }

    pub fn state_bit(&self, obj: u16, channel: usize) -> bool {
        self.bits[obj as usize] & (1 << channel) != 0
    }

    /// Boolean state vector of one object in channel order.
    pub fn q_vec(&self, obj: u16) -> Vec<bool> {
        (0..self.universe.schema.states.len())
            .map(|k| self.state_bit(obj, k))
            .collect()
    }

    fn validate(&self, p: &Predicate) -> Result<(), DomainError> {
        let schema = self.schema();
        let def = schema
            .relations
            .get(p.rel as usize)
            .ok_or_else(|| DomainError::unknown("relation index", &p.rel.to_string()))?;
        if (p.object.is_some() && def.arity != 2) || (p.object.is_none() && def.arity != 1) {
            return Err(DomainError::SchemaViolation(format!(
                "arity mismatch for {}",
                def.name
            )));
        }
        if p.subject as usize >= self.universe.len() {
            return Err(DomainError::UnknownObject {
                id: format!("#{}", p.subject),
            });
        }
        if let Some(o) = p.object {
            if o as usize >= self.universe.len() {
                return Err(DomainError::UnknownObject {
                    id: format!("#{o}"),
                });
            }
        }
        Ok(())
    }

    /// Insert a predicate, mirroring unary constraints into the state bits.
    /// Setting a state the subject's class does not declare is rejected.
    pub fn insert(&mut self, p: Predicate) -> Result<(), DomainError> {
        self.validate(&p)?;
        if let Some(channel) = self.schema().relations[p.rel as usize].state_channel {
            let obj = self.universe.object(p.subject);
            if !obj.allowed_states[channel] {
                return Err(DomainError::SchemaViolation(format!(
                    "state {} not declared for class {}",
                    self.schema().states[channel],
                    obj.class
                )));
            }
            self.bits[p.subject as usize] |= 1 << channel;
        }
        self.relations.insert(p);
        Ok(())
    }

    /// Remove a predicate, clearing the mirrored state bit for unary kinds.
    pub fn remove(&mut self, p: &Predicate) -> bool {
        let present = self.relations.remove(p);
        if present {
            if let Some(channel) = self.schema().relations[p.rel as usize].state_channel {
                self.bits[p.subject as usize] &= !(1 << channel);
            }
        }
        present
    }

    /// Canonical content hash over the relation set; used for duplicate-state
    /// pruning and split bookkeeping.
    pub fn content_hash(&self) -> u64 {
        // FNV-1a over the ordered predicate triples.
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |v: u64| {
            for byte in v.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for p in &self.relations {
            eat(p.rel as u64);
            eat(p.subject as u64);
            eat(p.object.map(|o| o as u64 + 1).unwrap_or(0));
        }
        h
    }

    pub fn pred_to_string(&self, p: &Predicate) -> String {
        let rel = &self.schema().relations[p.rel as usize];
        match p.object {
            Some(o) => format!(
                "{}({}, {})",
                rel.name,
                self.universe.object(p.subject).id,
                self.universe.object(o).id
            ),
            None => format!("{}({})", rel.name, self.universe.object(p.subject).id),
        }
    }

    /// Parse a textual predicate like `OnTop(mug_1, sink)` against this
    /// state's universe.
    pub fn parse_predicate(&self, text: &str) -> Result<Predicate, DomainError> {
        let t = text.trim();
        let open = t
            .find('(')
            .ok_or_else(|| DomainError::Parse(format!("expected predicate syntax: {t}")))?;
        if !t.ends_with(')') {
            return Err(DomainError::Parse(format!("unterminated predicate: {t}")));
        }
        let rel = self.schema().rel(t[..open].trim())?;
        let args: Vec<&str> = t[open + 1..t.len() - 1]
            .split(',')
            .map(|a| a.trim())
            .filter(|a| !a.is_empty())
            .collect();
        let arity = self.schema().relations[rel].arity as usize;
        if args.len() != arity {
            return Err(DomainError::Parse(format!("arity mismatch in {t}")));
        }
        let subject = self.universe.index_of(args[0])?;
        let object = if arity == 2 {
            Some(self.universe.index_of(args[1])?)
        } else {
            None
        };
        Ok(Predicate {
            rel: rel as u16,
            subject,
            object,
        })
    }

    pub fn to_json(&self) -> WorldStateJson {
        let schema = self.schema();
        let objects = self
            .universe
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| ObjectJson {
                id: o.id.clone(),
                class: o.class.clone(),
                states: (0..schema.states.len())
                    .filter(|&k| self.state_bit(i as u16, k))
                    .map(|k| schema.states[k].clone())
                    .collect(),
            })
            .collect();
        let relations = self
            .relations
            .iter()
            .filter(|p| p.object.is_some())
            .map(|p| {
                vec![
                    schema.relations[p.rel as usize].name.clone(),
                    self.universe.object(p.subject).id.clone(),
                    self.universe.object(p.object.unwrap()).id.clone(),
                ]
            })
            .collect();
        WorldStateJson { objects, relations }
    }

    pub fn from_json(json: &WorldStateJson, schema: &Arc<DomainSchema>) -> Result<Self, DomainError> {
        let members: Vec<(String, String)> = json
            .objects
            .iter()
            .map(|o| (o.id.clone(), o.class.clone()))
            .collect();
        let universe = Universe::new(Arc::clone(schema), &members)?;
        Self::from_json_with_universe(json, universe)
    }

    /// Rebuild a state against an existing universe (demo states share one).
    pub fn from_json_with_universe(
        json: &WorldStateJson,
        universe: Arc<Universe>,
    ) -> Result<Self, DomainError> {
        let mut state = WorldState::empty(universe);
        for o in &json.objects {
            let idx = state.universe.index_of(&o.id)?;
            if state.universe.object(idx).class != o.class {
                return Err(DomainError::SchemaViolation(format!(
                    "object {} changes class across states",
                    o.id
                )));
            }
            for s in &o.states {
                let channel = state.schema().state_channel(s)?;
                let rel = state.schema().channel_rel(channel);
                state.insert(Predicate::unary(rel, idx))?;
            }
        }
        for triple in &json.relations {
            if triple.len() != 3 {
                return Err(DomainError::Parse(format!(
                    "relation triple must have 3 entries: {triple:?}"
                )));
            }
            let rel = state.schema().rel(&triple[0])?;
            if state.schema().relations[rel].arity != 2 {
                return Err(DomainError::Parse(format!(
                    "state constraints belong in object `states`, not relations: {}",
                    triple[0]
                )));
            }
            let s = state.universe.index_of(&triple[1])?;
            let o = state.universe.index_of(&triple[2])?;
            state.insert(Predicate::binary(rel, s, o))?;
        }
        Ok(state)
    }
}

impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.universe.same_population(&other.universe)
            && self.bits == other.bits
            && self.relations == other.relations
    }
}

impl Eq for WorldState {}

/// Serialized form: object list plus binary relation triples. Unary state
/// constraints ride on the objects' `states` lists.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct WorldStateJson {
    pub objects: Vec<ObjectJson>,
    pub relations: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ObjectJson {
    pub id: String,
    pub class: String,
    #[serde(default)]
    pub states: Vec<String>,
}

/// Positive and negative constraint sets (delta-plus / delta-minus).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoalSpec {
    pub plus: BTreeSet<Predicate>,
    pub minus: BTreeSet<Predicate>,
}

impl GoalSpec {
    pub fn new(plus: BTreeSet<Predicate>, minus: BTreeSet<Predicate>) -> Result<Self, DomainError> {
        if plus.intersection(&minus).next().is_some() {
            return Err(DomainError::SchemaViolation(
                "goal has overlapping positive and negative constraints".into(),
            ));
        }
        Ok(GoalSpec { plus, minus })
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty() && self.minus.is_empty()
    }

    pub fn len(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn describe(&self, state: &WorldState) -> String {
        let side = |set: &BTreeSet<Predicate>| {
            set.iter()
                .map(|p| state.pred_to_string(p))
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!("+[{}] -[{}]", side(&self.plus), side(&self.minus))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.object {
            Some(o) => write!(f, "rel{}(#{}, #{})", self.rel, self.subject, o),
            None => write!(f, "rel{}(#{})", self.rel, self.subject),
        }
    }
}

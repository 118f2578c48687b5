//! STRIPS domains and problems over interned predicates and objects.
//!
//! A [`Domain`] holds predicate signatures and action schemas, a [`Problem`]
//! holds objects, the initial state and the goal. States and goals are
//! [`AtomSet`]s: sorted, duplicate-free vectors of integer-encoded atoms.

mod grounding;
mod syntax;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

pub use grounding::{applicable_actions, apply};
pub use syntax::{parse_domain, parse_problem, ParseError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct PredicateId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct ObjectId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct SchemaId(pub u32);

impl PredicateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ObjectId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl SchemaId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub type Args = SmallVec<[ObjectId; 3]>;

/// A predicate applied to objects.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: PredicateId,
    pub args: Args,
}

impl Atom {
    pub fn new(predicate: PredicateId, args: impl IntoIterator<Item = ObjectId>) -> Self {
        Atom {
            predicate,
            args: args.into_iter().collect(),
        }
    }
}

/// A set of ground atoms kept sorted so that equal sets compare and hash equal.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomSet(Vec<Atom>);

/// States, initial states and goals are all atom sets.
pub type State = AtomSet;

impl AtomSet {
    pub fn new() -> Self {
        AtomSet(Vec::new())
    }

    pub fn from_sorted_unchecked(atoms: Vec<Atom>) -> Self {
        debug_assert!(atoms.windows(2).all(|w| w[0] < w[1]));
        AtomSet(atoms)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Atom> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Atom] {
        &self.0
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.0.binary_search(atom).is_ok()
    }

    /// All atoms of one predicate, as a contiguous slice.
    pub fn with_predicate(&self, predicate: PredicateId) -> &[Atom] {
        let lo = self.0.partition_point(|a| a.predicate < predicate);
        let hi = lo + self.0[lo..].partition_point(|a| a.predicate == predicate);
        &self.0[lo..hi]
    }

    pub fn is_subset_of(&self, other: &AtomSet) -> bool {
        if self.len() > other.len() {
            return false;
        }
        let mut rest = other.0.iter();
        'outer: for atom in &self.0 {
            for candidate in rest.by_ref() {
                match candidate.cmp(atom) {
                    std::cmp::Ordering::Less => continue,
                    std::cmp::Ordering::Equal => continue 'outer,
                    std::cmp::Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }

    pub fn intersection(&self, other: &AtomSet) -> AtomSet {
        AtomSet(self.0.iter().filter(|a| other.contains(a)).cloned().collect())
    }

    /// `(self \ remove) ∪ add`
    pub fn update(&self, remove: &[Atom], add: &[Atom]) -> AtomSet {
        let mut atoms: Vec<Atom> = self.0.iter().filter(|a| !remove.contains(a)).cloned().collect();
        atoms.extend(add.iter().cloned());
        atoms.into_iter().collect()
    }

    pub fn into_vec(self) -> Vec<Atom> {
        self.0
    }
}

impl FromIterator<Atom> for AtomSet {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        let mut atoms: Vec<Atom> = iter.into_iter().collect();
        atoms.sort_unstable();
        atoms.dedup();
        AtomSet(atoms)
    }
}

impl<'a> IntoIterator for &'a AtomSet {
    type Item = &'a Atom;
    type IntoIter = std::slice::Iter<'a, Atom>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
}

/// An atom inside an action schema; arguments are parameter positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemaAtom {
    pub predicate: PredicateId,
    pub args: SmallVec<[usize; 3]>,
}

impl SchemaAtom {
    pub fn instantiate(&self, binding: &[ObjectId]) -> Atom {
        Atom {
            predicate: self.predicate,
            args: self.args.iter().map(|&p| binding[p]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<String>,
    pub precondition: Vec<SchemaAtom>,
    pub add: Vec<SchemaAtom>,
    pub delete: Vec<SchemaAtom>,
}

impl ActionSchema {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub name: String,
    pub predicates: Vec<Predicate>,
    pub schemas: Vec<ActionSchema>,
    predicate_index: HashMap<String, PredicateId>,
}

impl Domain {
    pub(crate) fn new(name: String, predicates: Vec<Predicate>, schemas: Vec<ActionSchema>) -> Self {
        let predicate_index = predicates
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), PredicateId(i as u32)))
            .collect();
        Domain {
            name,
            predicates,
            schemas,
            predicate_index,
        }
    }

    pub fn predicate_id(&self, name: &str) -> Option<PredicateId> {
        self.predicate_index.get(name).copied()
    }

    pub fn predicate(&self, id: PredicateId) -> &Predicate {
        &self.predicates[id.index()]
    }

    pub fn schema_id(&self, name: &str) -> Option<SchemaId> {
        self.schemas
            .iter()
            .position(|s| s.name == name)
            .map(|i| SchemaId(i as u32))
    }

    pub fn schema(&self, id: SchemaId) -> &ActionSchema {
        &self.schemas[id.index()]
    }
}

/// A ground action. `schema == None` is the dummy action that leaves the
/// state unchanged; it is only offered when nothing else applies.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAction {
    pub schema: Option<SchemaId>,
    pub args: SmallVec<[ObjectId; 4]>,
}

impl GroundAction {
    pub fn new(schema: SchemaId, args: impl IntoIterator<Item = ObjectId>) -> Self {
        GroundAction {
            schema: Some(schema),
            args: args.into_iter().collect(),
        }
    }

    pub fn noop() -> Self {
        GroundAction {
            schema: None,
            args: SmallVec::new(),
        }
    }

    pub fn is_noop(&self) -> bool {
        self.schema.is_none()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanningError {
    #[error("action {action} is not applicable: precondition {missing} does not hold")]
    PreconditionViolated { action: String, missing: String },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown action schema `{0}`")]
    UnknownSchema(String),
    #[error("malformed atom `{0}`")]
    MalformedAtom(String),
    #[error("`{name}` expects {expected} arguments, got {found}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub name: String,
    pub domain: Arc<Domain>,
    pub objects: Vec<String>,
    pub init: State,
    pub goal: AtomSet,
    object_index: HashMap<String, ObjectId>,
}

impl Problem {
    pub fn new(
        name: String,
        domain: Arc<Domain>,
        objects: Vec<String>,
        init: State,
        goal: AtomSet,
    ) -> Self {
        let object_index = objects
            .iter()
            .enumerate()
            .map(|(i, o)| (o.clone(), ObjectId(i as u32)))
            .collect();
        Problem {
            name,
            domain,
            objects,
            init,
            goal,
            object_index,
        }
    }

    pub fn object_id(&self, name: &str) -> Option<ObjectId> {
        self.object_index.get(name).copied()
    }

    pub fn object_name(&self, id: ObjectId) -> &str {
        &self.objects[id.index()]
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    /// Builds an atom from a predicate name and object names.
    pub fn atom(&self, predicate: &str, args: &[&str]) -> Result<Atom, PlanningError> {
        let pid = self
            .domain
            .predicate_id(predicate)
            .ok_or_else(|| PlanningError::UnknownPredicate(predicate.to_string()))?;
        let arity = self.domain.predicate(pid).arity;
        if arity != args.len() {
            return Err(PlanningError::ArityMismatch {
                name: predicate.to_string(),
                expected: arity,
                found: args.len(),
            });
        }
        let args = args
            .iter()
            .map(|a| {
                self.object_id(a)
                    .ok_or_else(|| PlanningError::UnknownObject(a.to_string()))
            })
            .collect::<Result<Args, _>>()?;
        Ok(Atom { predicate: pid, args })
    }

    /// Builds a ground action from a schema name and object names.
    pub fn action(&self, schema: &str, args: &[&str]) -> Result<GroundAction, PlanningError> {
        if schema == "noop" && args.is_empty() && self.domain.schema_id("noop").is_none() {
            return Ok(GroundAction::noop());
        }
        let sid = self
            .domain
            .schema_id(schema)
            .ok_or_else(|| PlanningError::UnknownSchema(schema.to_string()))?;
        let arity = self.domain.schema(sid).arity();
        if arity != args.len() {
            return Err(PlanningError::ArityMismatch {
                name: schema.to_string(),
                expected: arity,
                found: args.len(),
            });
        }
        let args = args
            .iter()
            .map(|a| {
                self.object_id(a)
                    .ok_or_else(|| PlanningError::UnknownObject(a.to_string()))
            })
            .collect::<Result<SmallVec<_>, _>>()?;
        Ok(GroundAction {
            schema: Some(sid),
            args,
        })
    }

    /// Parses `(pred obj ...)`.
    pub fn parse_atom(&self, text: &str) -> Result<Atom, PlanningError> {
        let words = split_parenthesized(text)?;
        let (head, rest) = words
            .split_first()
            .ok_or_else(|| PlanningError::MalformedAtom(text.to_string()))?;
        self.atom(head, rest)
    }

    /// Parses `(schema obj ...)` or `(noop)`.
    pub fn parse_action(&self, text: &str) -> Result<GroundAction, PlanningError> {
        let words = split_parenthesized(text)?;
        let (head, rest) = words
            .split_first()
            .ok_or_else(|| PlanningError::MalformedAtom(text.to_string()))?;
        self.action(head, rest)
    }

    pub fn display_atom<'a>(&'a self, atom: &'a Atom) -> DisplayAtom<'a> {
        DisplayAtom {
            problem: self,
            atom,
        }
    }

    pub fn display_action<'a>(&'a self, action: &'a GroundAction) -> DisplayAction<'a> {
        DisplayAction {
            problem: self,
            action,
        }
    }

    pub fn atom_strings(&self, atoms: &AtomSet) -> Vec<String> {
        atoms.iter().map(|a| self.display_atom(a).to_string()).collect()
    }

    pub fn parse_atom_set<S: AsRef<str>>(&self, atoms: &[S]) -> Result<AtomSet, PlanningError> {
        atoms.iter().map(|a| self.parse_atom(a.as_ref())).collect()
    }

    /// Returns the same problem with a different name.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

fn split_parenthesized(text: &str) -> Result<Vec<&str>, PlanningError> {
    let inner = text
        .trim()
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| PlanningError::MalformedAtom(text.to_string()))?;
    Ok(inner.split_whitespace().collect())
}

pub struct DisplayAtom<'a> {
    problem: &'a Problem,
    atom: &'a Atom,
}

impl fmt::Display for DisplayAtom<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.problem.domain.predicate(self.atom.predicate).name)?;
        for &arg in &self.atom.args {
            write!(f, " {}", self.problem.object_name(arg))?;
        }
        write!(f, ")")
    }
}

pub struct DisplayAction<'a> {
    problem: &'a Problem,
    action: &'a GroundAction,
}

impl fmt::Display for DisplayAction<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.action.schema {
            None => write!(f, "(noop)"),
            Some(sid) => {
                write!(f, "({}", self.problem.domain.schema(sid).name)?;
                for &arg in &self.action.args {
                    write!(f, " {}", self.problem.object_name(arg))?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(p: u32, args: &[u32]) -> Atom {
        Atom::new(PredicateId(p), args.iter().map(|&a| ObjectId(a)))
    }

    #[test]
    fn atom_set_is_sorted_and_deduplicated() {
        let set: AtomSet = vec![atom(1, &[0]), atom(0, &[1, 2]), atom(1, &[0])].into_iter().collect();
        assert_eq!(set.len(), 2);
        assert_eq!(set.as_slice()[0], atom(0, &[1, 2]));
    }

    #[test]
    fn subset_test() {
        let big: AtomSet = vec![atom(0, &[0]), atom(0, &[1]), atom(2, &[1, 0])].into_iter().collect();
        let small: AtomSet = vec![atom(2, &[1, 0]), atom(0, &[0])].into_iter().collect();
        let other: AtomSet = vec![atom(2, &[0, 1])].into_iter().collect();
        assert!(small.is_subset_of(&big));
        assert!(AtomSet::new().is_subset_of(&big));
        assert!(big.is_subset_of(&big));
        assert!(!other.is_subset_of(&big));
        assert!(!big.is_subset_of(&small));
    }

    #[test]
    fn predicate_slices() {
        let set: AtomSet = vec![atom(0, &[0]), atom(1, &[1]), atom(1, &[2]), atom(3, &[0])]
            .into_iter()
            .collect();
        assert_eq!(set.with_predicate(PredicateId(1)).len(), 2);
        assert!(set.with_predicate(PredicateId(2)).is_empty());
        assert_eq!(set.with_predicate(PredicateId(3)).len(), 1);
    }
}

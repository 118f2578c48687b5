use sha2::{Digest, Sha256};

use crate::planning::{Domain, PredicateId, SchemaId};

/// The network's predicate symbols for one domain: the domain predicates,
/// a goal copy of each, one action predicate per schema (the action object
/// first, then the schema's parameters) and a unary predicate for the dummy
/// action. Nothing here depends on a particular problem.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    pub domain: String,
    names: Vec<String>,
    arities: Vec<usize>,
    base: usize,
    schemas: usize,
    hash: u64,
}

impl Vocabulary {
    pub fn new(domain: &Domain) -> Self {
        let mut names = Vec::new();
        let mut arities = Vec::new();
        for p in &domain.predicates {
            names.push(p.name.clone());
            arities.push(p.arity);
        }
        for p in &domain.predicates {
            names.push(format!("{}@goal", p.name));
            arities.push(p.arity);
        }
        for s in &domain.schemas {
            names.push(format!("{}@action", s.name));
            arities.push(s.arity() + 1);
        }
        names.push("noop@action".to_string());
        arities.push(1);

        let mut digest = Sha256::new();
        digest.update(domain.name.as_bytes());
        for (n, a) in names.iter().zip(&arities) {
            digest.update(format!("\n{n}/{a}").as_bytes());
        }
        let bytes = digest.finalize();
        let hash = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
        Vocabulary {
            domain: domain.name.clone(),
            names,
            arities,
            base: domain.predicates.len(),
            schemas: domain.schemas.len(),
            hash,
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn arity(&self, predicate: usize) -> usize {
        self.arities[predicate]
    }

    pub fn name(&self, predicate: usize) -> &str {
        &self.names[predicate]
    }

    pub fn hash(&self) -> u64 {
        self.hash
    }

    pub fn num_state_predicates(&self) -> usize {
        self.base
    }

    pub fn num_schemas(&self) -> usize {
        self.schemas
    }

    pub fn state_predicate(&self, p: PredicateId) -> Option<usize> {
        (p.index() < self.base).then_some(p.index())
    }

    pub fn goal_predicate(&self, p: PredicateId) -> Option<usize> {
        (p.index() < self.base).then_some(self.base + p.index())
    }

    pub fn action_predicate(&self, s: SchemaId) -> Option<usize> {
        (s.index() < self.schemas).then_some(2 * self.base + s.index())
    }

    pub fn noop_predicate(&self) -> usize {
        2 * self.base + self.schemas
    }
}

use smallvec::SmallVec;

use super::{QNetError, Vocabulary};
use crate::planning::{AtomSet, GroundAction, Problem, State};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EncodedAtom {
    pub predicate: u32,
    pub args: SmallVec<[u32; 4]>,
}

/// Atoms over the extended vocabulary. Objects `0..num_original` are the
/// problem's objects; object `num_original + i` stands for action `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedInput {
    pub vocabulary_hash: u64,
    pub atoms: Vec<EncodedAtom>,
    pub num_objects: usize,
    pub num_original: usize,
}

impl EncodedInput {
    pub fn num_actions(&self) -> usize {
        self.num_objects - self.num_original
    }

    pub fn action_object(&self, action: usize) -> usize {
        self.num_original + action
    }

    /// Renames objects with `perm` (old id -> new id) inside the original and
    /// the action blocks, keeping both blocks in place.
    pub fn permuted(&self, perm: &[usize]) -> EncodedInput {
        assert_eq!(perm.len(), self.num_objects);
        EncodedInput {
            vocabulary_hash: self.vocabulary_hash,
            atoms: self
                .atoms
                .iter()
                .map(|a| EncodedAtom {
                    predicate: a.predicate,
                    args: a.args.iter().map(|&o| perm[o as usize] as u32).collect(),
                })
                .collect(),
            num_objects: self.num_objects,
            num_original: self.num_original,
        }
    }
}

pub fn encode(
    vocabulary: &Vocabulary,
    problem: &Problem,
    state: &State,
    actions: &[GroundAction],
    goal: &AtomSet,
) -> Result<EncodedInput, QNetError> {
    let unknown = |name: String| QNetError::UnknownPredicate(name);
    let n = problem.num_objects();
    let mut atoms = Vec::with_capacity(state.len() + actions.len() + goal.len());
    for atom in state {
        let predicate = vocabulary
            .state_predicate(atom.predicate)
            .ok_or_else(|| unknown(format!("#{}", atom.predicate.0)))?;
        atoms.push(EncodedAtom {
            predicate: predicate as u32,
            args: atom.args.iter().map(|o| o.0).collect(),
        });
    }
    for (i, action) in actions.iter().enumerate() {
        let object = (n + i) as u32;
        let predicate = match action.schema {
            None => vocabulary.noop_predicate(),
            Some(s) => vocabulary
                .action_predicate(s)
                .ok_or_else(|| unknown(format!("action schema #{}", s.0)))?,
        };
        let mut args = SmallVec::with_capacity(action.args.len() + 1);
        args.push(object);
        args.extend(action.args.iter().map(|o| o.0));
        atoms.push(EncodedAtom {
            predicate: predicate as u32,
            args,
        });
    }
    for atom in goal {
        let predicate = vocabulary
            .goal_predicate(atom.predicate)
            .ok_or_else(|| unknown(format!("#{}", atom.predicate.0)))?;
        atoms.push(EncodedAtom {
            predicate: predicate as u32,
            args: atom.args.iter().map(|o| o.0).collect(),
        });
    }
    Ok(EncodedInput {
        vocabulary_hash: vocabulary.hash(),
        atoms,
        num_objects: n + actions.len(),
        num_original: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planning::{applicable_actions, Problem};
    use std::sync::Arc;

    fn blocks3() -> (Problem, Vocabulary) {
        let d = crate::domains::load("blocks").unwrap().unwrap();
        let p = Problem::new(
            "t".into(),
            Arc::clone(&d),
            vec!["b1".into(), "b2".into(), "b3".into()],
            AtomSet::new(),
            AtomSet::new(),
        );
        (p, Vocabulary::new(&d))
    }

    #[test]
    fn counts_follow_the_union() {
        let (p, v) = blocks3();
        let s = p
            .parse_atom_set(&["(holding b1)", "(on b2 b3)", "(ontable b3)", "(clear b2)"])
            .unwrap();
        let acts = applicable_actions(&p, &s);
        assert_eq!(acts.len(), 2);
        let goal = p.parse_atom_set(&["(on b1 b2)"]).unwrap();
        let e = encode(&v, &p, &s, &acts, &goal).unwrap();
        assert_eq!(e.atoms.len(), 7);
        assert_eq!(e.num_objects, 5);
        for (i, a) in e.atoms[4..6].iter().enumerate() {
            assert_eq!(a.args[0] as usize, e.action_object(i));
        }
    }

    #[test]
    fn empty_goal_and_noop() {
        let (p, v) = blocks3();
        let s = p.parse_atom_set(&["(ontable b1)"]).unwrap();
        let acts = applicable_actions(&p, &s);
        let e = encode(&v, &p, &s, &acts, &AtomSet::new()).unwrap();
        assert_eq!(e.atoms.len(), 2);
        assert_eq!(e.num_objects, 4);
        assert_eq!(e.atoms[1].predicate as usize, v.noop_predicate());
        assert_eq!(e.atoms[1].args.as_slice(), [3]);
    }

    #[test]
    fn foreign_goal_predicate_is_rejected() {
        let (p, v) = blocks3();
        let bogus = crate::planning::Atom::new(crate::planning::PredicateId(40), []);
        let goal: AtomSet = std::iter::once(bogus).collect();
        assert!(matches!(
            encode(&v, &p, &AtomSet::new(), &[], &goal),
            Err(QNetError::UnknownPredicate(_))
        ));
    }
}

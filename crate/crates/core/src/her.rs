//! Hindsight relabeling of trajectories.
//!
//! A trajectory is cut greedily, left to right, into the longest
//! non-overlapping cycle-free slices whose final state achieves a hindsight
//! goal that no earlier state of the slice achieves. The three variants only
//! differ in how the hindsight goal is computed from the final state.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{Transition, Trajectory, STEP_REWARD};
use crate::lifting::{ground_schema, LiftedGoal};
use crate::planning::{AtomSet, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HerKind {
    State,
    #[serde(alias = "propositional")]
    Prop,
    Lifted,
}

impl fmt::Display for HerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HerKind::State => "state",
            HerKind::Prop => "prop",
            HerKind::Lifted => "lifted",
        })
    }
}

impl FromStr for HerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "state" => Ok(HerKind::State),
            "prop" | "propositional" => Ok(HerKind::Prop),
            "lifted" => Ok(HerKind::Lifted),
            other => Err(format!("unknown relabeling variant `{other}` (expected state, prop or lifted)")),
        }
    }
}

/// A relabeling strategy. Lifted schemas are ordered largest first, so the
/// first one that grounds is the maximal one with the lowest canonical rank.
#[derive(Clone, Debug)]
pub enum HerVariant {
    State,
    Propositional,
    Lifted(Arc<Vec<LiftedGoal>>),
}

impl HerVariant {
    pub fn kind(&self) -> HerKind {
        match self {
            HerVariant::State => HerKind::State,
            HerVariant::Propositional => HerKind::Prop,
            HerVariant::Lifted(_) => HerKind::Lifted,
        }
    }

    /// Builds the variant for one problem; lifted schemas come from its goal.
    pub fn for_goal(kind: HerKind, goal: &AtomSet) -> Result<Self, crate::lifting::LiftError> {
        Ok(match kind {
            HerKind::State => HerVariant::State,
            HerKind::Prop => HerVariant::Propositional,
            HerKind::Lifted => HerVariant::Lifted(Arc::new(crate::lifting::enumerate_lifted_goals(goal)?)),
        })
    }
}

pub fn hindsight_goal(variant: &HerVariant, state: &State, goal: &AtomSet) -> Option<AtomSet> {
    match variant {
        HerVariant::State => Some(state.clone()),
        HerVariant::Propositional => {
            let achieved = goal.intersection(state);
            (!achieved.is_empty()).then_some(achieved)
        }
        HerVariant::Lifted(schemas) => schemas
            .iter()
            .find_map(|schema| ground_schema(schema, state, None).map(|g| g.apply(schema))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelabeledTrajectory {
    /// Index of the first transition of the slice in the source trajectory.
    pub start: usize,
    pub transitions: Vec<Transition>,
    pub hindsight_goal: AtomSet,
}

impl RelabeledTrajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn end(&self) -> usize {
        self.start + self.transitions.len()
    }
}

pub fn refine(variant: &HerVariant, trajectory: &Trajectory) -> Vec<RelabeledTrajectory> {
    let n = trajectory.len();
    if n == 0 {
        return Vec::new();
    }
    let states = trajectory.states();
    let goal = &trajectory.transitions[0].goal;
    // hindsight[t]: goal for a slice ending with transition t (state t + 1)
    let hindsight: Vec<Option<AtomSet>> = states[1..]
        .iter()
        .map(|s| hindsight_goal(variant, s, goal))
        .collect();

    // Identical states share an id so cycles are detected by integer compare.
    let mut ids: HashMap<&State, usize> = HashMap::new();
    let state_ids: Vec<usize> = states
        .iter()
        .map(|s| {
            let next = ids.len();
            *ids.entry(*s).or_insert(next)
        })
        .collect();

    let mut slices = Vec::new();
    let mut i = 0;
    while i < n {
        // Longest cycle-free stretch: states i ..= longest + 1 are distinct.
        let mut seen = vec![false; ids.len()];
        seen[state_ids[i]] = true;
        let mut longest = None;
        for t in i..n {
            let id = state_ids[t + 1];
            if seen[id] {
                break;
            }
            seen[id] = true;
            longest = Some(t);
        }
        let chosen = longest.and_then(|last| {
            (i..=last).rev().find(|&t| match &hindsight[t] {
                Some(g) => (i..=t).all(|j| !g.is_subset_of(states[j])),
                None => false,
            })
        });
        match chosen {
            Some(t) => {
                let g = hindsight[t].clone().expect("checked above");
                let transitions = trajectory.transitions[i..=t]
                    .iter()
                    .enumerate()
                    .map(|(k, tr)| Transition {
                        state: tr.state.clone(),
                        action: tr.action.clone(),
                        reward: STEP_REWARD,
                        next_state: tr.next_state.clone(),
                        goal: g.clone(),
                        terminal: i + k == t,
                    })
                    .collect();
                slices.push(RelabeledTrajectory {
                    start: i,
                    transitions,
                    hindsight_goal: g,
                });
                i = t + 1;
            }
            None => i += 1,
        }
    }
    slices
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::rollout;
    use crate::eval::generate::{gripper_problem, maze_problem};
    use crate::lifting::enumerate_lifted_goals;
    use crate::planning::Problem;
    use rand::{Rng, SeedableRng};

    fn blocks(objects: &str, goal: &[&str]) -> Problem {
        let d = crate::domains::load("blocks").unwrap().unwrap();
        let p = Problem::new(
            "t".into(),
            d,
            objects.split_whitespace().map(String::from).collect(),
            AtomSet::new(),
            AtomSet::new(),
        );
        let goal = p.parse_atom_set(goal).unwrap();
        Problem::new(p.name.clone(), p.domain.clone(), p.objects.clone(), AtomSet::new(), goal)
    }

    #[test]
    fn state_variant_returns_state() {
        let p = gripper_problem(2);
        assert_eq!(hindsight_goal(&HerVariant::State, &p.init, &p.goal), Some(p.init.clone()));
    }

    #[test]
    fn propositional_keeps_achieved_goal_atoms() {
        let p = blocks("b1 b2 b3 b4", &["(on b1 b2)", "(on b2 b3)", "(on b3 b4)"]);
        let s = p
            .parse_atom_set(&["(on b2 b3)", "(on b3 b4)", "(ontable b4)", "(clear b2)", "(holding b1)"])
            .unwrap();
        let g = hindsight_goal(&HerVariant::Propositional, &s, &p.goal).unwrap();
        assert_eq!(p.atom_strings(&g), ["(on b2 b3)", "(on b3 b4)"]);
        let s = p.parse_atom_set(&["(ontable b1)"]).unwrap();
        assert_eq!(hindsight_goal(&HerVariant::Propositional, &s, &p.goal), None);
    }

    #[test]
    fn lifted_picks_largest_grounding() {
        let p = blocks(
            "a b c d e f",
            &["(on a b)", "(on b c)", "(on c d)"],
        );
        let variant = HerVariant::Lifted(Arc::new(enumerate_lifted_goals(&p.goal).unwrap()));
        let s = p
            .parse_atom_set(&["(on c d)", "(on d e)", "(on e f)", "(clear c)", "(ontable f)", "(ontable a)"])
            .unwrap();
        let g = hindsight_goal(&variant, &s, &p.goal).unwrap();
        assert_eq!(p.atom_strings(&g), ["(on c d)", "(on d e)", "(on e f)"]);
    }

    #[test]
    fn successful_trajectory_relabels_to_original_goal() {
        let p = gripper_problem(1);
        let plan = ["(pick ball1 rooma left)", "(move rooma roomb)", "(drop ball1 roomb left)"];
        let mut k = 0;
        let traj = rollout(&p, &p.goal, 10, |_, acts| {
            let want = p.parse_action(plan[k]).unwrap();
            k += 1;
            acts.iter().position(|a| *a == want).unwrap()
        });
        assert!(traj.achieved_goal);
        let slices = refine(&HerVariant::Propositional, &traj);
        assert_eq!(slices.len(), 1);
        assert_eq!(slices[0].hindsight_goal, p.goal);
        assert_eq!(slices[0].len(), 3);
    }

    #[test]
    fn maze_walk_relabels_only_when_lifted() {
        let p = maze_problem(8, 5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let traj = rollout(&p, &p.goal, 30, |_, acts| rng.gen_range(0..acts.len()));
        assert!(!traj.achieved_goal);
        assert!(refine(&HerVariant::Propositional, &traj).is_empty());
        let lifted = HerVariant::for_goal(HerKind::Lifted, &p.goal).unwrap();
        let slices = refine(&lifted, &traj);
        assert!(!slices.is_empty());
        let at = p.domain.predicate_id("at").unwrap();
        for s in &slices {
            assert_eq!(s.hindsight_goal.len(), 1);
            assert_eq!(s.hindsight_goal.as_slice()[0].predicate, at);
        }
    }

    #[test]
    fn slices_are_disjoint_cycle_free_and_terminal_only_at_end() {
        let p = gripper_problem(3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let traj = rollout(&p, &p.goal, 60, |_, acts| rng.gen_range(0..acts.len()));
        for variant in [HerVariant::State, HerVariant::Propositional] {
            let slices = refine(&variant, &traj);
            let mut last_end = 0;
            for s in &slices {
                assert!(s.start >= last_end);
                last_end = s.end();
                let states: Vec<&State> = s
                    .transitions
                    .iter()
                    .map(|t| &t.state)
                    .chain(std::iter::once(&s.transitions.last().unwrap().next_state))
                    .collect();
                for a in 0..states.len() {
                    for b in a + 1..states.len() {
                        assert_ne!(states[a], states[b]);
                    }
                }
                for (k, t) in s.transitions.iter().enumerate() {
                    let last = k + 1 == s.len();
                    assert_eq!(t.terminal, last);
                    assert_eq!(s.hindsight_goal.is_subset_of(&t.next_state), last);
                    assert!(!s.hindsight_goal.is_subset_of(&t.state));
                }
            }
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("prop".parse::<HerKind>().unwrap(), HerKind::Prop);
        assert_eq!("propositional".parse::<HerKind>().unwrap(), HerKind::Prop);
        assert!("full".parse::<HerKind>().is_err());
        assert_eq!(HerKind::Lifted.to_string(), "lifted");
    }
}

//! Goal-conditioned episodes: fixed initial state, reward -1 on every step,
//! goal states are terminal.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planning::{applicable_actions, apply, AtomSet, GroundAction, PlanningError, Problem, State};

pub const STEP_REWARD: f64 = -1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: State,
    pub action: GroundAction,
    pub reward: f64,
    pub next_state: State,
    pub goal: AtomSet,
    pub terminal: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub achieved_goal: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// The visited states `s_0 .. s_len`.
    pub fn states(&self) -> Vec<&State> {
        let mut states: Vec<&State> = self.transitions.iter().map(|t| &t.state).collect();
        if let Some(last) = self.transitions.last() {
            states.push(&last.next_state);
        }
        states
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    /// Chained transitions, and only the last one may be terminal.
    pub fn is_well_formed(&self) -> bool {
        let chained = self
            .transitions
            .windows(2)
            .all(|w| w[0].next_state == w[1].state);
        let terminal_last = self
            .transitions
            .iter()
            .rev()
            .skip(1)
            .all(|t| !t.terminal);
        chained && terminal_last
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next: State,
    pub reward: f64,
    pub terminal: bool,
}

pub fn reset(problem: &Problem) -> State {
    problem.init.clone()
}

pub fn is_goal(state: &State, goal: &AtomSet) -> bool {
    goal.is_subset_of(state)
}

pub fn step(
    problem: &Problem,
    state: &State,
    action: &GroundAction,
    goal: &AtomSet,
) -> Result<StepOutcome, PlanningError> {
    if action.is_noop() && applicable_actions(problem, state) != [GroundAction::noop()] {
        return Err(PlanningError::PreconditionViolated {
            action: "(noop)".into(),
            missing: "no other action applicable".into(),
        });
    }
    let next = apply(problem, state, action)?;
    let terminal = is_goal(&next, goal);
    Ok(StepOutcome {
        next,
        reward: STEP_REWARD,
        terminal,
    })
}

/// Runs one episode from the initial state. `policy` receives the state and
/// its applicable actions and returns the index of the chosen action. The
/// episode stops at a goal state or after `horizon` steps.
pub fn rollout<P>(problem: &Problem, goal: &AtomSet, horizon: usize, mut policy: P) -> Trajectory
where
    P: FnMut(&State, &[GroundAction]) -> usize,
{
    let mut state = reset(problem);
    let mut trajectory = Trajectory::default();
    if is_goal(&state, goal) {
        trajectory.achieved_goal = true;
        return trajectory;
    }
    for _ in 0..horizon {
        let actions = applicable_actions(problem, &state);
        let choice = policy(&state, &actions);
        let action = actions[choice].clone();
        let outcome = step(problem, &state, &action, goal).expect("policy picked an applicable action");
        let terminal = outcome.terminal;
        trajectory.transitions.push(Transition {
            state,
            action,
            reward: outcome.reward,
            next_state: outcome.next.clone(),
            goal: goal.clone(),
            terminal,
        });
        state = outcome.next;
        if terminal {
            trajectory.achieved_goal = true;
            break;
        }
    }
    trajectory
}

/// One line of a JSON-lines trajectory dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub state: Vec<String>,
    pub action: String,
    pub reward: f64,
    pub next_state: Vec<String>,
    pub goal: Vec<String>,
    pub terminal: bool,
}

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Planning { line: usize, source: PlanningError },
    #[error("line {line}: transition does not continue from the previous one")]
    Broken { line: usize },
}

pub fn write_jsonl<W: Write>(
    problem: &Problem,
    trajectory: &Trajectory,
    mut out: W,
) -> Result<(), DumpError> {
    for t in &trajectory.transitions {
        let record = TransitionRecord {
            state: problem.atom_strings(&t.state),
            action: problem.display_action(&t.action).to_string(),
            reward: t.reward,
            next_state: problem.atom_strings(&t.next_state),
            goal: problem.atom_strings(&t.goal),
            terminal: t.terminal,
        };
        let line = serde_json::to_string(&record).map_err(|source| DumpError::Json { line: 0, source })?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(problem: &Problem, input: R) -> Result<Trajectory, DumpError> {
    let mut trajectory = Trajectory::default();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: TransitionRecord =
            serde_json::from_str(&line).map_err(|source| DumpError::Json { line: lineno, source })?;
        let planning = |source| DumpError::Planning { line: lineno, source };
        let transition = Transition {
            state: problem.parse_atom_set(&record.state).map_err(planning)?,
            action: problem.parse_action(&record.action).map_err(planning)?,
            reward: record.reward,
            next_state: problem.parse_atom_set(&record.next_state).map_err(planning)?,
            goal: problem.parse_atom_set(&record.goal).map_err(planning)?,
            terminal: record.terminal,
        };
        if let Some(prev) = trajectory.transitions.last() {
            if prev.next_state != transition.state || prev.terminal {
                return Err(DumpError::Broken { line: lineno });
            }
        }
        trajectory.achieved_goal |= transition.terminal;
        trajectory.transitions.push(transition);
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::generate::{gripper_problem, maze_problem};
    use rand::SeedableRng;

    #[test]
    fn reset_returns_init() {
        let p = gripper_problem(2);
        assert_eq!(reset(&p), p.init);
        assert_eq!(reset(&p), reset(&p));
    }

    #[test]
    fn goal_test() {
        let p = gripper_problem(1);
        let s = reset(&p);
        assert!(is_goal(&s, &AtomSet::new()));
        assert!(is_goal(&s, &s));
        assert!(!is_goal(&s, &p.goal));
    }

    #[test]
    fn reset_on_satisfied_goal_is_terminal() {
        let p = gripper_problem(1);
        let goal: AtomSet = p.init.iter().take(2).cloned().collect();
        assert!(is_goal(&reset(&p), &goal));
        let traj = rollout(&p, &goal, 10, |_, _| 0);
        assert!(traj.achieved_goal && traj.is_empty());
    }

    #[test]
    fn every_step_costs_one() {
        let p = gripper_problem(1);
        let s = reset(&p);
        let a = applicable_actions(&p, &s)[0].clone();
        let out = step(&p, &s, &a, &p.goal).unwrap();
        assert_eq!(out.reward, -1.0);
        assert!(!out.terminal);
    }

    #[test]
    fn noop_keeps_state() {
        let p = gripper_problem(1);
        // Without the robot nothing applies.
        let robot = p.atom("at-robby", &["rooma"]).unwrap();
        let s: State = p.init.iter().filter(|a| **a != robot).cloned().collect();
        let out = step(&p, &s, &GroundAction::noop(), &p.goal).unwrap();
        assert_eq!(out.next, s);
        assert_eq!(out.reward, -1.0);
        assert!(!out.terminal);
        assert!(step(&p, &p.init, &GroundAction::noop(), &p.goal).is_err());
    }

    #[test]
    fn reaching_goal_is_terminal() {
        let p = gripper_problem(1);
        let plan = ["(pick ball1 rooma left)", "(move rooma roomb)", "(drop ball1 roomb left)"];
        let mut s = reset(&p);
        let mut last = None;
        for a in plan {
            let out = step(&p, &s, &p.parse_action(a).unwrap(), &p.goal).unwrap();
            s = out.next.clone();
            last = Some(out);
        }
        assert!(last.unwrap().terminal);
    }

    #[test]
    fn truncated_rollout_sums_to_minus_length() {
        let p = maze_problem(6, 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let traj = rollout(&p, &p.goal, 20, |_, acts| rand::Rng::gen_range(&mut rng, 0..acts.len()));
        assert!(traj.is_well_formed());
        if !traj.achieved_goal {
            assert_eq!(traj.len(), 20);
            assert_eq!(traj.total_reward(), -20.0);
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let p = gripper_problem(2);
        let traj = rollout(&p, &p.goal, 15, |_, acts| acts.len() - 1);
        let mut buf = Vec::new();
        write_jsonl(&p, &traj, &mut buf).unwrap();
        assert_eq!(String::from_utf8_lossy(&buf).lines().count(), traj.len());
        let back = read_jsonl(&p, buf.as_slice()).unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn jsonl_rejects_broken_chain() {
        let p = gripper_problem(1);
        let plan = ["(pick ball1 rooma left)", "(move rooma roomb)", "(drop ball1 roomb left)"];
        let mut k = 0;
        let traj = rollout(&p, &p.goal, 3, |_, acts| {
            let want = p.parse_action(plan[k]).unwrap();
            k += 1;
            acts.iter().position(|a| *a == want).unwrap()
        });
        let mut buf = Vec::new();
        write_jsonl(&p, &traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let swapped = format!("{}\n{}\n", lines[1], lines[0]);
        assert!(matches!(read_jsonl(&p, swapped.as_bytes()), Err(DumpError::Broken { line: 2 })));
    }
}

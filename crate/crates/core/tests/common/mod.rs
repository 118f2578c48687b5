//! Independent oracles for the integration tests. Nothing here reuses the
//! library's matching code: successors are found by enumerating every
//! parameter tuple, groundings by enumerating every injective assignment.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use relher_core::lifting::LiftedGoal;
use relher_core::planning::{Atom, AtomSet, GroundAction, ObjectId, Problem, SchemaId, State};

/// Applicable (action, successor) pairs by brute force over all parameter
/// tuples. The dummy action is not included.
pub fn brute_force_successors(problem: &Problem, state: &State) -> Vec<(GroundAction, State)> {
    let n = problem.num_objects();
    let mut out = Vec::new();
    for (si, schema) in problem.domain.schemas.iter().enumerate() {
        let arity = schema.params.len();
        let total = n.checked_pow(arity as u32).expect("small problem");
        for code in 0..total {
            let mut c = code;
            let binding: Vec<ObjectId> = (0..arity)
                .map(|_| {
                    let o = ObjectId((c % n) as u32);
                    c /= n.max(1);
                    o
                })
                .collect();
            let pre_ok = schema.precondition.iter().all(|a| state.contains(&a.instantiate(&binding)));
            if !pre_ok {
                continue;
            }
            let del: Vec<Atom> = schema.delete.iter().map(|a| a.instantiate(&binding)).collect();
            let add: Vec<Atom> = schema.add.iter().map(|a| a.instantiate(&binding)).collect();
            let mut next: Vec<Atom> = state.iter().filter(|a| !del.contains(a)).cloned().collect();
            next.extend(add);
            let action = GroundAction::new(SchemaId(si as u32), binding);
            out.push((action, next.into_iter().collect()));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out.dedup_by(|a, b| a.0 == b.0);
    out
}

/// Distance to the nearest goal state from every reachable state; `None` if
/// more than `limit` states are reachable.
pub struct Bfs {
    pub distance_to_goal: HashMap<State, usize>,
    pub reachable: usize,
}

pub fn bfs(problem: &Problem, limit: usize) -> Option<Bfs> {
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut states: Vec<State> = Vec::new();
    let mut preds: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    index.insert(problem.init.clone(), 0);
    states.push(problem.init.clone());
    preds.push(Vec::new());
    queue.push_back(0);
    while let Some(i) = queue.pop_front() {
        let s = states[i].clone();
        for (_, next) in brute_force_successors(problem, &s) {
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    let j = states.len();
                    if j >= limit {
                        return None;
                    }
                    index.insert(next.clone(), j);
                    states.push(next);
                    preds.push(Vec::new());
                    queue.push_back(j);
                    j
                }
            };
            preds[j].push(i);
        }
    }
    // Backward BFS from all goal states.
    let mut dist = vec![usize::MAX; states.len()];
    let mut queue = VecDeque::new();
    for (i, s) in states.iter().enumerate() {
        if problem.goal.is_subset_of(s) {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    while let Some(j) = queue.pop_front() {
        for &i in &preds[j] {
            if dist[i] == usize::MAX {
                dist[i] = dist[j] + 1;
                queue.push_back(i);
            }
        }
    }
    let reachable = states.len();
    let distance_to_goal = states
        .into_iter()
        .zip(dist)
        .filter(|(_, d)| *d != usize::MAX)
        .collect();
    Some(Bfs {
        distance_to_goal,
        reachable,
    })
}

pub fn optimal_plan_length(problem: &Problem) -> Option<usize> {
    bfs(problem, 200_000)?.distance_to_goal.get(&problem.init).copied()
}

/// Every injective assignment of the schema's variables to `objects` objects
/// that maps all atoms into `state`.
pub fn brute_force_groundings(schema: &LiftedGoal, state: &State, objects: usize) -> Vec<Vec<ObjectId>> {
    fn go(
        schema: &LiftedGoal,
        state: &State,
        objects: usize,
        partial: &mut Vec<ObjectId>,
        out: &mut Vec<Vec<ObjectId>>,
    ) {
        if partial.len() == schema.variables {
            let ok = schema.atoms.iter().all(|a| {
                let atom = Atom::new(a.predicate, a.args.iter().map(|&v| partial[v as usize]));
                state.contains(&atom)
            });
            if ok {
                out.push(partial.clone());
            }
            return;
        }
        for o in 0..objects {
            let o = ObjectId(o as u32);
            if partial.contains(&o) {
                continue;
            }
            partial.push(o);
            go(schema, state, objects, partial, out);
            partial.pop();
        }
    }
    let mut out = Vec::new();
    go(schema, state, objects, &mut Vec::new(), &mut out);
    out
}

pub fn atoms(problem: &Problem, text: &[&str]) -> AtomSet {
    problem.parse_atom_set(text).expect("test atoms parse")
}

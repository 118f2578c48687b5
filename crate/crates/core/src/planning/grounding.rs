use smallvec::SmallVec;

use super::{ActionSchema, Atom, GroundAction, ObjectId, PlanningError, Problem, SchemaId, State};

/// Every instantiation of every schema whose precondition holds in `state`,
/// sorted by schema and arguments. When nothing applies the result is the
/// single dummy action.
pub fn applicable_actions(problem: &Problem, state: &State) -> Vec<GroundAction> {
    let mut actions = Vec::new();
    for (i, schema) in problem.domain.schemas.iter().enumerate() {
        let mut binding: Vec<Option<ObjectId>> = vec![None; schema.arity()];
        let mut order: Vec<usize> = (0..schema.precondition.len()).collect();
        // Match the rarest predicates first.
        order.sort_by_key(|&j| state.with_predicate(schema.precondition[j].predicate).len());
        match_precondition(
            problem,
            state,
            schema,
            SchemaId(i as u32),
            &order,
            &mut binding,
            &mut actions,
        );
    }
    if actions.is_empty() {
        actions.push(GroundAction::noop());
    } else {
        actions.sort();
        actions.dedup();
    }
    actions
}

fn match_precondition(
    problem: &Problem,
    state: &State,
    schema: &ActionSchema,
    id: SchemaId,
    order: &[usize],
    binding: &mut Vec<Option<ObjectId>>,
    out: &mut Vec<GroundAction>,
) {
    let Some((&next, rest)) = order.split_first() else {
        enumerate_free(problem, id, 0, binding, out);
        return;
    };
    let pattern = &schema.precondition[next];
    'candidates: for candidate in state.with_predicate(pattern.predicate) {
        let mut newly_bound: SmallVec<[usize; 4]> = SmallVec::new();
        for (&param, &obj) in pattern.args.iter().zip(&candidate.args) {
            match binding[param] {
                Some(bound) if bound != obj => {
                    for &p in &newly_bound {
                        binding[p] = None;
                    }
                    continue 'candidates;
                }
                Some(_) => {}
                None => {
                    binding[param] = Some(obj);
                    newly_bound.push(param);
                }
            }
        }
        match_precondition(problem, state, schema, id, rest, binding, out);
        for &p in &newly_bound {
            binding[p] = None;
        }
    }
}

/// Parameters that occur in no precondition atom range over all objects.
fn enumerate_free(
    problem: &Problem,
    id: SchemaId,
    from: usize,
    binding: &mut Vec<Option<ObjectId>>,
    out: &mut Vec<GroundAction>,
) {
    match (from..binding.len()).find(|&p| binding[p].is_none()) {
        None => out.push(GroundAction {
            schema: Some(id),
            args: binding.iter().map(|b| b.expect("all parameters bound")).collect(),
        }),
        Some(p) => {
            for o in 0..problem.num_objects() {
                binding[p] = Some(ObjectId(o as u32));
                enumerate_free(problem, id, p + 1, binding, out);
            }
            binding[p] = None;
        }
    }
}

/// `(state \ delete) ∪ add`. The dummy action returns the state unchanged.
pub fn apply(problem: &Problem, state: &State, action: &GroundAction) -> Result<State, PlanningError> {
    let Some(sid) = action.schema else {
        return Ok(state.clone());
    };
    let schema = problem.domain.schema(sid);
    if action.args.len() != schema.arity() {
        return Err(PlanningError::ArityMismatch {
            name: schema.name.clone(),
            expected: schema.arity(),
            found: action.args.len(),
        });
    }
    for pre in &schema.precondition {
        let atom = pre.instantiate(&action.args);
        if !state.contains(&atom) {
            return Err(PlanningError::PreconditionViolated {
                action: problem.display_action(action).to_string(),
                missing: problem.display_atom(&atom).to_string(),
            });
        }
    }
    let delete: Vec<Atom> = schema.delete.iter().map(|a| a.instantiate(&action.args)).collect();
    let add: Vec<Atom> = schema.add.iter().map(|a| a.instantiate(&action.args)).collect();
    Ok(state.update(&delete, &add))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::domains;
    use crate::planning::{parse_domain, parse_problem};

    fn blocks(init: &str) -> Problem {
        let d = Arc::new(parse_domain(domains::BLOCKS).unwrap());
        parse_problem(
            &format!("(problem p (domain blocks) (objects b1 b2) (init {init}) (goal (on b1 b2)))"),
            d,
        )
        .unwrap()
    }

    fn names(p: &Problem, actions: &[GroundAction]) -> Vec<String> {
        actions.iter().map(|a| p.display_action(a).to_string()).collect()
    }

    #[test]
    fn two_blocks_on_table() {
        let p = blocks("(ontable b1) (ontable b2) (clear b1) (clear b2) (arm-empty)");
        let acts = applicable_actions(&p, &p.init);
        assert_eq!(names(&p, &acts), ["(pick-up b1)", "(pick-up b2)"]);
    }

    #[test]
    fn dead_state_offers_noop() {
        let p = blocks("(ontable b1)");
        let acts = applicable_actions(&p, &p.init);
        assert_eq!(acts, vec![GroundAction::noop()]);
        assert_eq!(apply(&p, &p.init, &acts[0]).unwrap(), p.init);
    }

    #[test]
    fn pick_up_then_put_down() {
        let p = blocks("(ontable b1) (clear b1) (arm-empty)");
        let pick = p.action("pick-up", &["b1"]).unwrap();
        let held = apply(&p, &p.init, &pick).unwrap();
        assert_eq!(p.atom_strings(&held), ["(holding b1)"]);
        let put = p.action("put-down", &["b1"]).unwrap();
        assert_eq!(apply(&p, &held, &put).unwrap(), p.init);
    }

    #[test]
    fn inapplicable_action_is_rejected() {
        let p = blocks("(ontable b1) (clear b1)");
        let pick = p.action("pick-up", &["b1"]).unwrap();
        let err = apply(&p, &p.init, &pick).unwrap_err();
        assert_eq!(
            err,
            PlanningError::PreconditionViolated {
                action: "(pick-up b1)".into(),
                missing: "(arm-empty)".into()
            }
        );
    }

    #[test]
    fn gripper_single_ball() {
        let d = Arc::new(parse_domain(domains::GRIPPER).unwrap());
        let p = parse_problem(
            "(problem g (domain gripper) (objects rooma roomb left right ball1)
               (init (room rooma) (room roomb) (connected rooma roomb) (connected roomb rooma)
                     (gripper left) (gripper right) (ball ball1) (at-robby rooma)
                     (at ball1 rooma) (free left) (free right))
               (goal (at ball1 roomb)))",
            d,
        )
        .unwrap();
        let acts = applicable_actions(&p, &p.init);
        assert_eq!(
            names(&p, &acts),
            ["(move rooma roomb)", "(pick ball1 rooma left)", "(pick ball1 rooma right)"]
        );
    }
}

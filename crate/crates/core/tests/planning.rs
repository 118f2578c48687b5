mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relher_core::domains;
use relher_core::eval::generate::{blocks_problem, generate_instances, gripper_problem, maze_problem, SizeRange};
use relher_core::planning::{applicable_actions, apply, parse_problem, AtomSet, Problem, State};

use common::{brute_force_successors, optimal_plan_length};

fn check_successors(problem: &Problem, state: &State) {
    let expected = brute_force_successors(problem, state);
    let mut actual = applicable_actions(problem, state);
    if expected.is_empty() {
        assert_eq!(actual.len(), 1);
        assert!(actual[0].is_noop());
        return;
    }
    actual.sort();
    let names: Vec<_> = expected.iter().map(|(a, _)| a.clone()).collect();
    assert_eq!(actual, names, "state {:?}", problem.atom_strings(state));
    for (a, next) in &expected {
        assert_eq!(&apply(problem, state, a).unwrap(), next);
    }
}

/// States visited by a seeded random walk.
fn random_walk(problem: &Problem, steps: usize, seed: u64) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = problem.init.clone();
    let mut out = vec![s.clone()];
    for _ in 0..steps {
        let acts = applicable_actions(problem, &s);
        let a = &acts[rng.gen_range(0..acts.len())];
        s = apply(problem, &s, a).unwrap();
        out.push(s.clone());
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blocks_successors_match_brute_force(n in 2usize..=4, seed in any::<u64>(), steps in 0usize..30) {
        let p = blocks_problem(n, seed);
        for s in random_walk(&p, steps, seed ^ 1) {
            check_successors(&p, &s);
        }
    }

    #[test]
    fn gripper_successors_match_brute_force(balls in 1usize..=2, seed in any::<u64>()) {
        let p = gripper_problem(balls);
        for s in random_walk(&p, 25, seed) {
            check_successors(&p, &s);
        }
    }

    #[test]
    fn maze_successors_match_brute_force(seed in any::<u64>()) {
        let p = maze_problem(2, seed);
        for s in random_walk(&p, 10, seed) {
            check_successors(&p, &s);
        }
    }

    #[test]
    fn printed_problems_parse_back(n in 2usize..=6, seed in any::<u64>()) {
        let p = blocks_problem(n, seed);
        let back = parse_problem(&p.to_string(), Arc::clone(&p.domain)).unwrap();
        prop_assert_eq!(back, p);
    }
}

#[test]
fn arbitrary_blocks_states_match_brute_force() {
    // Includes unreachable states: any subset of the ground atoms over 3 blocks.
    let p = blocks_problem(3, 0);
    let mut all = Vec::new();
    for pred in &p.domain.predicates {
        let n = p.num_objects();
        let combos = n.pow(pred.arity as u32);
        for code in 0..combos {
            let mut c = code;
            let args: Vec<&str> = (0..pred.arity)
                .map(|_| {
                    let o = c % n;
                    c /= n;
                    p.objects[o].as_str()
                })
                .collect();
            all.push(p.atom(&pred.name, &args).unwrap());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..300 {
        let s: AtomSet = all.iter().filter(|_| rng.gen_bool(0.3)).cloned().collect();
        check_successors(&p, &s);
    }
}

#[test]
fn builtin_domains_round_trip_through_text() {
    for name in ["blocks", "gripper", "maze"] {
        let d = domains::load(name).unwrap().unwrap();
        let back = relher_core::planning::parse_domain(&d.to_string()).unwrap();
        assert_eq!(back.predicates, d.predicates);
        assert_eq!(back.schemas, d.schemas);
    }
}

#[test]
fn gripper_optimal_lengths_from_bfs() {
    // 3n - 1 holds for even n; odd n needs one extra trip for the last ball.
    for n in 1usize..=3 {
        let expected = 2 * n + 2 * n.div_ceil(2) - 1;
        assert_eq!(optimal_plan_length(&gripper_problem(n)), Some(expected), "{n} balls");
        if n % 2 == 0 {
            assert_eq!(expected, 3 * n - 1);
        }
    }
}

#[test]
fn generated_instances_are_solvable_and_deterministic() {
    let a = generate_instances("blocks", SizeRange { min: 2, max: 4, count: 6 }, 11).unwrap();
    let b = generate_instances("blocks", SizeRange { min: 2, max: 4, count: 6 }, 11).unwrap();
    assert_eq!(a, b);
    for p in &a {
        assert!(optimal_plan_length(p).unwrap() > 0, "{}", p.name);
    }
    let g = generate_instances("gripper", SizeRange::each(1, 3), 0).unwrap();
    assert_eq!(g.iter().map(|p| p.objects.len() - 4).collect::<Vec<_>>(), [1, 2, 3]);
    for side in 2..=4 {
        let m = maze_problem(side, side as u64);
        assert_eq!(m.goal.len(), 1);
        assert!(m.atom_strings(&m.goal)[0].starts_with("(at "));
        assert!(optimal_plan_length(&m).unwrap() > 0);
    }
    assert!(generate_instances("hiking", SizeRange::each(1, 2), 0).is_err());
}

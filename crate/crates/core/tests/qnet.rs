use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relher_core::eval::generate::{blocks_problem, gripper_problem};
use relher_core::planning::{applicable_actions, apply, Problem, State};
use relher_core::qnet::{encode, load_checkpoint, save_checkpoint, EncodedInput, QNetwork, Vocabulary};

fn walk(problem: &Problem, steps: usize, rng: &mut ChaCha8Rng) -> State {
    let mut s = problem.init.clone();
    for _ in 0..steps {
        let acts = applicable_actions(problem, &s);
        s = apply(problem, &s, &acts[rng.gen_range(0..acts.len())]).unwrap();
    }
    s
}

fn input_for(problem: &Problem, vocab: &Vocabulary, state: &State) -> EncodedInput {
    let actions = applicable_actions(problem, state);
    encode(vocab, problem, state, &actions, &problem.goal).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn q_values_follow_object_renaming(n in 2usize..=5, seed in any::<u64>(), steps in 0usize..10) {
        let p = blocks_problem(n, seed);
        let vocab = Arc::new(Vocabulary::new(&p.domain));
        let net = QNetwork::<f64>::new(Arc::clone(&vocab), 8, 3, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = input_for(&p, &vocab, &walk(&p, steps, &mut rng));
        let q = net.q_values(&input).unwrap();

        // Shuffle original objects among themselves and action objects among
        // themselves, and the atom order too.
        let mut originals: Vec<usize> = (0..input.num_original).collect();
        let mut actions: Vec<usize> = (input.num_original..input.num_objects).collect();
        originals.shuffle(&mut rng);
        actions.shuffle(&mut rng);
        let perm: Vec<usize> = originals.into_iter().chain(actions).collect();
        let mut renamed = input.permuted(&perm);
        renamed.atoms.shuffle(&mut rng);
        let q2 = net.q_values(&renamed).unwrap();
        for (i, v) in q.iter().enumerate() {
            let j = perm[input.action_object(i)] - input.num_original;
            prop_assert!((v - q2[j]).abs() < 1e-9, "action {} -> {}: {} vs {}", i, j, v, q2[j]);
        }
    }
}

#[test]
fn q_values_depend_on_the_goal() {
    let p = gripper_problem(2);
    let vocab = Arc::new(Vocabulary::new(&p.domain));
    let net = QNetwork::<f32>::new(Arc::clone(&vocab), 16, 4, 1);
    let actions = applicable_actions(&p, &p.init);
    let full = encode(&vocab, &p, &p.init, &actions, &p.goal).unwrap();
    let half: relher_core::planning::AtomSet = p.goal.iter().take(1).cloned().collect();
    let partial = encode(&vocab, &p, &p.init, &actions, &half).unwrap();
    assert_ne!(net.q_values(&full).unwrap(), net.q_values(&partial).unwrap());
}

#[test]
fn batched_and_single_forward_agree_across_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let problems = [blocks_problem(3, 1), blocks_problem(5, 2), blocks_problem(2, 3)];
    let vocab = Arc::new(Vocabulary::new(&problems[0].domain));
    let net = QNetwork::<f32>::new(Arc::clone(&vocab), 12, 3, 9);
    let inputs: Vec<EncodedInput> = problems
        .iter()
        .map(|p| input_for(p, &vocab, &walk(p, 4, &mut rng)))
        .collect();
    let refs: Vec<&EncodedInput> = inputs.iter().collect();
    let batch = net.forward(&refs).unwrap();
    for (g, input) in inputs.iter().enumerate() {
        let single = net.q_values(input).unwrap();
        for (a, b) in batch.graph(g).iter().zip(&single) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}

#[test]
fn checkpoint_reproduces_q_values() {
    let p = gripper_problem(3);
    let vocab = Arc::new(Vocabulary::new(&p.domain));
    let net = QNetwork::<f32>::new(Arc::clone(&vocab), 8, 2, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.bin");
    save_checkpoint(&net, &path, &serde_json::json!({"note": "test"})).unwrap();
    let back = load_checkpoint::<f32>(&path, Arc::clone(&vocab)).unwrap();
    let input = input_for(&p, &vocab, &p.init);
    assert_eq!(net.q_values(&input).unwrap(), back.q_values(&input).unwrap());
    let blocks = blocks_problem(3, 0);
    let other = Arc::new(Vocabulary::new(&blocks.domain));
    assert!(load_checkpoint::<f32>(&path, other).is_err());
}

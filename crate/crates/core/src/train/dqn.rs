//! Exploration, targets and loss of the DQN update.

use rand::Rng;

use crate::env::Transition;
use crate::planning::{applicable_actions, Problem};
use crate::qnet::{encode, QNetError, QNetwork, Scalar, Vocabulary};

/// Softmax of `q / temperature`, computed after subtracting the maximum.
pub fn boltzmann_probabilities(q: &[f64], temperature: f64) -> Vec<f64> {
    assert!(temperature > 0.0, "temperature must be positive");
    assert!(!q.is_empty(), "no actions to choose from");
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = q.iter().map(|&v| ((v - max) / temperature).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

pub fn boltzmann_select<R: Rng + ?Sized>(q: &[f64], temperature: f64, rng: &mut R) -> usize {
    let probs = boltzmann_probabilities(q, temperature);
    let mut u: f64 = rng.gen();
    for (i, p) in probs.iter().enumerate() {
        if u < *p {
            return i;
        }
        u -= p;
    }
    probs.len() - 1
}

pub fn huber(error: f64, delta: f64) -> f64 {
    let a = error.abs();
    if a <= delta {
        0.5 * error * error
    } else {
        delta * (a - 0.5 * delta)
    }
}

pub fn huber_grad(error: f64, delta: f64) -> f64 {
    error.clamp(-delta, delta)
}

/// `reward` alone for terminal transitions, otherwise bootstrapped through
/// the best successor value.
pub fn bootstrap_target(reward: f64, terminal: bool, next_q: &[f64], gamma: f64) -> f64 {
    if terminal {
        return reward;
    }
    let best = next_q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(best.is_finite(), "non-terminal successor without actions");
    reward + gamma * best
}

/// Target for one transition using `target` to value the successor.
pub fn compute_target<F: Scalar>(
    target: &QNetwork<F>,
    vocab: &Vocabulary,
    problem: &Problem,
    transition: &Transition,
    gamma: f64,
) -> Result<f64, QNetError> {
    if transition.terminal {
        return Ok(transition.reward);
    }
    let actions = applicable_actions(problem, &transition.next_state);
    let input = encode(vocab, problem, &transition.next_state, &actions, &transition.goal)?;
    let q: Vec<f64> = target.q_values(&input)?.into_iter().map(Scalar::as_f64).collect();
    Ok(bootstrap_target(transition.reward, false, &q, gamma))
}

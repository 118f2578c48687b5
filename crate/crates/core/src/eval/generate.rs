//! Desk-scale instance generators for the built-in domains.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domains;
use crate::planning::{Atom, AtomSet, Domain, Problem};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("no generator for domain `{0}` (expected blocks, gripper or maze)")]
    UnsupportedDomain(String),
    #[error("invalid size range {min}..={max} for {domain}: {reason}")]
    InvalidRange {
        domain: String,
        min: usize,
        max: usize,
        reason: &'static str,
    },
}

/// Inclusive range of the scaling parameter (blocks, balls or grid side)
/// and how many instances to spread evenly over it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeRange {
    pub min: usize,
    pub max: usize,
    pub count: usize,
}

impl SizeRange {
    /// One instance per size.
    pub fn each(min: usize, max: usize) -> Self {
        SizeRange {
            min,
            max,
            count: max.saturating_sub(min) + 1,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        if self.count == 0 {
            return Vec::new();
        }
        if self.count == 1 {
            return vec![self.min];
        }
        let span = (self.max - self.min) as f64;
        (0..self.count)
            .map(|i| self.min + (span * i as f64 / (self.count - 1) as f64).round() as usize)
            .collect()
    }
}

pub fn generate_instances(domain: &str, range: SizeRange, seed: u64) -> Result<Vec<Problem>, GenerateError> {
    let min_size = match domain {
        "blocks" => 2,
        "gripper" => 1,
        "maze" => 2,
        other => return Err(GenerateError::UnsupportedDomain(other.to_string())),
    };
    if range.min > range.max {
        return Err(GenerateError::InvalidRange {
            domain: domain.to_string(),
            min: range.min,
            max: range.max,
            reason: "min exceeds max",
        });
    }
    if range.min < min_size {
        return Err(GenerateError::InvalidRange {
            domain: domain.to_string(),
            min: range.min,
            max: range.max,
            reason: "size too small",
        });
    }
    Ok(range
        .sizes()
        .into_iter()
        .enumerate()
        .map(|(i, size)| {
            let instance_seed = seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(i as u64 + 1);
            let problem = match domain {
                "blocks" => blocks_problem(size, instance_seed),
                "gripper" => gripper_problem(size),
                _ => maze_problem(size, instance_seed),
            };
            problem.renamed(format!("{domain}-{size}-{i}"))
        })
        .collect())
}

fn builtin(name: &str) -> Arc<Domain> {
    domains::load(name)
        .expect("built-in domain")
        .expect("built-in domain parses")
}

struct Builder {
    problem: Problem,
    init: Vec<Atom>,
    goal: Vec<Atom>,
}

impl Builder {
    fn new(domain: &str, name: String, objects: Vec<String>) -> Self {
        Builder {
            problem: Problem::new(name, builtin(domain), objects, AtomSet::new(), AtomSet::new()),
            init: Vec::new(),
            goal: Vec::new(),
        }
    }

    fn atom(&self, predicate: &str, args: &[&str]) -> Atom {
        self.problem.atom(predicate, args).expect("generator atoms are well-formed")
    }

    fn init(&mut self, predicate: &str, args: &[&str]) {
        let a = self.atom(predicate, args);
        self.init.push(a);
    }

    fn goal(&mut self, predicate: &str, args: &[&str]) {
        let a = self.atom(predicate, args);
        self.goal.push(a);
    }

    fn finish(self) -> Problem {
        let p = self.problem;
        Problem::new(
            p.name,
            p.domain,
            p.objects,
            self.init.into_iter().collect(),
            self.goal.into_iter().collect(),
        )
    }
}

/// All balls start in `rooma` with the robot; the goal moves them to `roomb`.
pub fn gripper_problem(balls: usize) -> Problem {
    let mut objects: Vec<String> = ["rooma", "roomb", "left", "right"].map(String::from).to_vec();
    objects.extend((1..=balls).map(|i| format!("ball{i}")));
    let mut b = Builder::new("gripper", format!("gripper-{balls}"), objects);
    for r in ["rooma", "roomb"] {
        b.init("room", &[r]);
    }
    b.init("connected", &["rooma", "roomb"]);
    b.init("connected", &["roomb", "rooma"]);
    for g in ["left", "right"] {
        b.init("gripper", &[g]);
        b.init("free", &[g]);
    }
    b.init("at-robby", &["rooma"]);
    for i in 1..=balls {
        let ball = format!("ball{i}");
        b.init("ball", &[&ball]);
        b.init("at", &[&ball, "rooma"]);
        b.goal("at", &[&ball, "roomb"]);
    }
    b.finish()
}

/// Random towers: each block either starts a new tower or goes on top of an
/// existing one.
fn random_towers(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut towers: Vec<Vec<usize>> = Vec::new();
    for block in order {
        let choice = rng.gen_range(0..=towers.len());
        if choice == towers.len() {
            towers.push(vec![block]);
        } else {
            towers[choice].push(block);
        }
    }
    towers
}

/// Random initial towers and a random goal configuration given by its `on`
/// atoms. The goal is never satisfied initially.
pub fn blocks_problem(n: usize, seed: u64) -> Problem {
    assert!(n >= 2, "blocks instances need at least two blocks");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (1..=n).map(|i| format!("b{i}")).collect();
    loop {
        let mut b = Builder::new("blocks", format!("blocks-{n}"), names.clone());
        for tower in random_towers(n, &mut rng) {
            b.init("ontable", &[&names[tower[0]]]);
            for w in tower.windows(2) {
                b.init("on", &[&names[w[1]], &names[w[0]]]);
            }
            b.init("clear", &[&names[*tower.last().unwrap()]]);
        }
        b.init("arm-empty", &[]);
        for tower in random_towers(n, &mut rng) {
            for w in tower.windows(2) {
                b.goal("on", &[&names[w[1]], &names[w[0]]]);
            }
        }
        let problem = b.finish();
        if !problem.goal.is_empty() && !problem.goal.is_subset_of(&problem.init) {
            return problem;
        }
    }
}

/// Perfect maze on a `side × side` grid (random depth-first spanning tree,
/// so every cell is reachable and side branches are dead ends). Start and
/// target are the two ends of a longest shortest path.
pub fn maze_problem(side: usize, seed: u64) -> Problem {
    assert!(side >= 2, "maze needs a side of at least 2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = side * side;
    let neighbours = |c: usize| {
        let (x, y) = (c % side, c / side);
        let mut out = Vec::with_capacity(4);
        if x > 0 {
            out.push(c - 1);
        }
        if x + 1 < side {
            out.push(c + 1);
        }
        if y > 0 {
            out.push(c - side);
        }
        if y + 1 < side {
            out.push(c + side);
        }
        out
    };
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); cells];
    let mut visited = vec![false; cells];
    let mut stack = vec![rng.gen_range(0..cells)];
    visited[stack[0]] = true;
    while let Some(&current) = stack.last() {
        let open: Vec<usize> = neighbours(current).into_iter().filter(|&n| !visited[n]).collect();
        match open.choose(&mut rng) {
            Some(&next) => {
                adjacency[current].push(next);
                adjacency[next].push(current);
                visited[next] = true;
                stack.push(next);
            }
            None => {
                stack.pop();
            }
        }
    }
    let farthest = |from: usize| {
        let mut dist = vec![usize::MAX; cells];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        let mut last = from;
        while let Some(c) = queue.pop_front() {
            last = c;
            for &n in &adjacency[c] {
                if dist[n] == usize::MAX {
                    dist[n] = dist[c] + 1;
                    queue.push_back(n);
                }
            }
        }
        last
    };
    let start = farthest(0);
    let target = farthest(start);

    let name = |c: usize| format!("c{}-{}", c % side, c / side);
    let objects: Vec<String> = (0..cells).map(name).collect();
    let mut b = Builder::new("maze", format!("maze-{side}"), objects.clone());
    b.init("at", &[&objects[start]]);
    for (c, adj) in adjacency.iter().enumerate() {
        for &n in adj {
            b.init("adjacent", &[&objects[c], &objects[n]]);
        }
    }
    b.goal("at", &[&objects[target]]);
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_are_evenly_spread() {
        assert_eq!(SizeRange::each(1, 3).sizes(), [1, 2, 3]);
        assert_eq!(SizeRange { min: 2, max: 10, count: 5 }.sizes(), [2, 4, 6, 8, 10]);
        assert_eq!(SizeRange { min: 4, max: 4, count: 3 }.sizes(), [4, 4, 4]);
    }

    #[test]
    fn gripper_ball_counts() {
        let ps = generate_instances("gripper", SizeRange::each(1, 3), 0).unwrap();
        let goals: Vec<usize> = ps.iter().map(|p| p.goal.len()).collect();
        assert_eq!(goals, [1, 2, 3]);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_instances("blocks", SizeRange::each(2, 6), 11).unwrap();
        let b = generate_instances("blocks", SizeRange::each(2, 6), 11).unwrap();
        assert_eq!(a, b);
        let c = generate_instances("blocks", SizeRange::each(2, 6), 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn maze_has_single_goal_atom() {
        for side in 2..7 {
            let p = maze_problem(side, side as u64);
            assert_eq!(p.goal.len(), 1);
            assert_eq!(p.num_objects(), side * side);
            // spanning tree: 2 * (cells - 1) directed adjacency atoms
            assert_eq!(p.init.len(), 1 + 2 * (side * side - 1));
        }
    }

    #[test]
    fn unsupported_domain() {
        assert_eq!(
            generate_instances("visitall", SizeRange::each(1, 2), 0),
            Err(GenerateError::UnsupportedDomain("visitall".into()))
        );
        assert!(generate_instances("blocks", SizeRange::each(1, 2), 0).is_err());
    }
}

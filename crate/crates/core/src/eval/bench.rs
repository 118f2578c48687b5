//! Greedy evaluation of a trained network and plan-length statistics.

use std::collections::HashSet;
use std::fmt;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planning::{applicable_actions, apply, GroundAction, Problem, State};
use crate::qnet::{encode, QNetError, QNetwork, Scalar, Vocabulary};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot aggregate an empty set of results")]
    Empty,
    #[error(transparent)]
    Network(#[from] QNetError),
    #[error("report i/o: {0}")]
    Io(#[from] io::Error),
    #[error("report csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub max_steps: usize,
    pub cycle_avoidance: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            max_steps: 1000,
            cycle_avoidance: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RolloutResult {
    pub solved: bool,
    pub plan: Vec<GroundAction>,
}

/// Follows the argmax-Q action, skipping actions whose successor was already
/// visited when cycle avoidance is on. Fails when no admissible action is
/// left or the step cap is hit.
pub fn greedy_rollout<F: Scalar>(
    net: &QNetwork<F>,
    vocab: &Vocabulary,
    problem: &Problem,
    cfg: &EvalConfig,
) -> Result<RolloutResult, QNetError> {
    greedy_rollout_with(problem, cfg, |state, actions, _| {
        let input = encode(vocab, problem, state, actions, &problem.goal)?;
        Ok(net.q_values(&input)?.into_iter().map(Scalar::as_f64).collect())
    })
}

/// Greedy rollout over an arbitrary scorer of `(state, actions, successors)`;
/// the first action with the highest score wins.
pub fn greedy_rollout_with<E, S>(problem: &Problem, cfg: &EvalConfig, mut score: S) -> Result<RolloutResult, E>
where
    S: FnMut(&State, &[GroundAction], &[State]) -> Result<Vec<f64>, E>,
{
    let mut state = problem.init.clone();
    let mut visited: HashSet<State> = HashSet::new();
    visited.insert(state.clone());
    let mut plan = Vec::new();
    while !problem.goal.is_subset_of(&state) {
        if plan.len() >= cfg.max_steps {
            return Ok(RolloutResult { solved: false, plan });
        }
        let actions = applicable_actions(problem, &state);
        let successors: Vec<State> = actions
            .iter()
            .map(|a| apply(problem, &state, a).expect("applicable action"))
            .collect();
        let q = score(&state, &actions, &successors)?;
        let best = (0..actions.len())
            .filter(|&i| !cfg.cycle_avoidance || !visited.contains(&successors[i]))
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if q[b] >= q[i] => Some(b),
                _ => Some(i),
            });
        let Some(i) = best else {
            return Ok(RolloutResult { solved: false, plan });
        };
        plan.push(actions[i].clone());
        state = successors[i].clone();
        let fresh = visited.insert(state.clone());
        assert!(fresh || !cfg.cycle_avoidance, "greedy rollout revisited a state");
    }
    Ok(RolloutResult { solved: true, plan })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub solved: bool,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub coverage: usize,
    pub total_length: usize,
    pub median_length: f64,
    pub mean_length: f64,
}

/// Coverage counts solved instances; lengths are aggregated over solved
/// instances only, all zero when none is solved.
pub fn aggregate(rows: Vec<BenchRow>) -> Result<BenchReport, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut lengths: Vec<usize> = rows.iter().filter(|r| r.solved).map(|r| r.length).collect();
    lengths.sort_unstable();
    let coverage = lengths.len();
    let total_length: usize = lengths.iter().sum();
    let (median_length, mean_length) = if coverage == 0 {
        (0.0, 0.0)
    } else {
        let mid = coverage / 2;
        let median = if coverage % 2 == 1 {
            lengths[mid] as f64
        } else {
            (lengths[mid - 1] + lengths[mid]) as f64 / 2.0
        };
        (median, total_length as f64 / coverage as f64)
    };
    Ok(BenchReport {
        rows,
        coverage,
        total_length,
        median_length,
        mean_length,
    })
}

/// Greedy evaluation of every problem, spread over up to `threads` workers.
/// Rows keep the order of `problems`.
pub fn evaluate<F: Scalar>(
    net: &QNetwork<F>,
    vocab: &Vocabulary,
    problems: &[Problem],
    cfg: &EvalConfig,
    threads: usize,
) -> Result<BenchReport, BenchError> {
    let threads = threads.clamp(1, problems.len().max(1));
    let run = |p: &Problem| -> Result<BenchRow, QNetError> {
        let r = greedy_rollout(net, vocab, p, cfg)?;
        Ok(BenchRow {
            instance: p.name.clone(),
            solved: r.solved,
            length: r.plan.len(),
        })
    };
    let rows: Vec<Result<BenchRow, QNetError>> = if threads == 1 {
        problems.iter().map(run).collect()
    } else {
        let chunk = problems.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = problems
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(run).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("evaluation worker panicked"))
                .collect()
        })
    };
    aggregate(rows.into_iter().collect::<Result<_, _>>()?)
}

impl BenchReport {
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<(), BenchError> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<BenchReport, BenchError> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<Result<Vec<BenchRow>, _>>()?;
        aggregate(rows)
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .rows
            .iter()
            .map(|r| r.instance.len())
            .max()
            .unwrap_or(0)
            .max("instance".len());
        writeln!(f, "{:<width$}  {:>6}  {:>6}", "instance", "solved", "length")?;
        for r in &self.rows {
            let length = if r.solved { r.length.to_string() } else { "-".into() };
            writeln!(f, "{:<width$}  {:>6}  {:>6}", r.instance, if r.solved { "yes" } else { "no" }, length)?;
        }
        write!(
            f,
            "coverage {}/{}  total {}  median {:.1}  mean {:.1}",
            self.coverage,
            self.rows.len(),
            self.total_length,
            self.median_length,
            self.mean_length
        )
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dqn::{boltzmann_select, bootstrap_target, huber, huber_grad};
use super::metrics::{MetricsRow, MetricsWriter};
use super::optim::{Optimizer, OptimizerKind};
use super::replay::PrioritizedReplay;
use super::schedule::LinearSchedule;
use super::select::{select_checkpoint, ValidationRecord};
use super::TrainError;
use crate::env::{rollout, Trajectory};
use crate::eval::{evaluate, EvalConfig};
use crate::her::{refine, HerKind, HerVariant};
use crate::planning::{AtomSet, GroundAction, Problem, State};
use crate::qnet::{encode, save_checkpoint, EncodedInput, QNetwork, Scalar, Vocabulary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub seed: u64,
    pub gamma: f64,
    pub steps_per_episode: usize,
    pub batch_size: usize,
    pub rollouts_per_episode: usize,
    pub horizon: usize,
    pub huber_delta: f64,
    pub target_update_period: usize,
    /// `None` disables relabeling: only successful rollouts are stored.
    pub her: Option<HerKind>,
    /// Also store the original-goal transitions of successful rollouts.
    pub store_original: bool,
    pub replay_capacity: usize,
    pub priority_alpha: f64,
    pub priority_beta: f64,
    pub priority_epsilon: f64,
    pub learning_rate: LinearSchedule,
    pub temperature: LinearSchedule,
    pub optimizer: OptimizerKind,
    pub width: usize,
    pub layers: usize,
    /// Apply the loss to a readout of a uniformly sampled layer as well.
    pub aux_readout: bool,
    /// Validate every this many episodes (and after the last one); 0 turns
    /// validation off.
    pub validation_interval: usize,
    pub eval: EvalConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 600,
            seed: 0,
            gamma: 0.999,
            steps_per_episode: 32,
            batch_size: 32,
            rollouts_per_episode: 4,
            horizon: 100,
            huber_delta: 1.0,
            target_update_period: 1,
            her: Some(HerKind::Lifted),
            store_original: true,
            replay_capacity: 1000,
            priority_alpha: 0.6,
            priority_beta: 0.4,
            priority_epsilon: 1e-3,
            learning_rate: LinearSchedule::new(1e-3, 1e-6, 300),
            temperature: LinearSchedule::new(1.0, 0.1, 600),
            optimizer: OptimizerKind::Adam,
            width: 32,
            layers: 10,
            aux_readout: true,
            validation_interval: 25,
            eval: EvalConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let positive = [
            ("steps_per_episode", self.steps_per_episode),
            ("batch_size", self.batch_size),
            ("rollouts_per_episode", self.rollouts_per_episode),
            ("horizon", self.horizon),
            ("target_update_period", self.target_update_period),
            ("replay_capacity", self.replay_capacity),
            ("width", self.width),
            ("eval.max_steps", self.eval.max_steps),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(TrainError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(TrainError::Config("gamma must be in (0, 1]".into()));
        }
        if self.temperature.end <= 0.0 || self.temperature.start <= 0.0 {
            return Err(TrainError::Config("temperature must stay positive".into()));
        }
        if self.huber_delta <= 0.0 {
            return Err(TrainError::Config("huber_delta must be positive".into()));
        }
        Ok(())
    }
}

/// One stored transition, already encoded. `next` is `None` for terminal
/// transitions.
#[derive(Clone, Debug)]
pub struct ReplayEntry {
    pub input: Arc<EncodedInput>,
    pub action: usize,
    pub reward: f64,
    pub next: Option<Arc<EncodedInput>>,
    pub goal_size: usize,
}

impl ReplayEntry {
    pub fn is_terminal(&self) -> bool {
        self.next.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    pub mean_loss: Option<f64>,
    /// Mean goal size over the trajectories inserted this episode.
    pub mean_goal_size: Option<f64>,
    /// Mean length of the trajectories inserted this episode.
    pub mean_traj_len: Option<f64>,
    pub buffer_size: usize,
    pub temperature: f64,
    pub lr: f64,
    pub rollouts_solved: usize,
    pub inserted_trajectories: usize,
    pub inserted_terminal: usize,
    pub validation: Option<ValidationRecord>,
}

impl EpisodeStats {
    pub fn metrics_row(&self) -> MetricsRow {
        MetricsRow {
            episode: self.episode,
            mean_loss: self.mean_loss,
            mean_goal_size: self.mean_goal_size,
            mean_traj_len: self.mean_traj_len,
            buffer_size: self.buffer_size,
            temperature: self.temperature,
            lr: self.lr,
            val_coverage: self.validation.as_ref().map(|v| v.coverage),
            val_total_len: self.validation.as_ref().map(|v| v.total_length),
        }
    }
}

struct TrainProblem {
    problem: Arc<Problem>,
    variant: Option<HerVariant>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub history: Vec<ValidationRecord>,
    /// Index into `history` of the selected checkpoint.
    pub best: Option<usize>,
    /// Parameters of the selected checkpoint, or the final ones without
    /// validation.
    pub best_params: Vec<f32>,
    pub episodes: Vec<EpisodeStats>,
}

pub struct Trainer {
    cfg: TrainConfig,
    vocab: Arc<Vocabulary>,
    main: QNetwork<f32>,
    target: QNetwork<f32>,
    optimizer: Optimizer,
    buffer: PrioritizedReplay<ReplayEntry>,
    problems: Vec<TrainProblem>,
    rng: ChaCha8Rng,
    episode: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig, problems: Vec<Problem>) -> Result<Self, TrainError> {
        cfg.validate()?;
        let first = problems.first().ok_or(TrainError::NoProblems)?;
        let vocab = Arc::new(Vocabulary::new(&first.domain));
        let mut pool = Vec::with_capacity(problems.len());
        for p in problems {
            if Vocabulary::new(&p.domain).hash() != vocab.hash() {
                return Err(TrainError::DomainMismatch(p.name.clone()));
            }
            let variant = cfg.her.map(|k| HerVariant::for_goal(k, &p.goal)).transpose()?;
            pool.push(TrainProblem {
                problem: Arc::new(p),
                variant,
            });
        }
        let main = QNetwork::new(Arc::clone(&vocab), cfg.width, cfg.layers, cfg.seed);
        let target = main.clone();
        Ok(Trainer {
            optimizer: Optimizer::new(cfg.optimizer, main.num_params()),
            buffer: PrioritizedReplay::new(
                cfg.replay_capacity,
                cfg.priority_alpha,
                cfg.priority_beta,
                cfg.priority_epsilon,
            ),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed)),
            cfg,
            vocab,
            main,
            target,
            problems: pool,
            episode: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn main(&self) -> &QNetwork<f32> {
        &self.main
    }

    pub fn target(&self) -> &QNetwork<f32> {
        &self.target
    }

    pub fn buffer(&self) -> &PrioritizedReplay<ReplayEntry> {
        &self.buffer
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    /// Boltzmann rollout on `problem`; returns the trajectory and, per
    /// visited state, its applicable actions.
    fn explore(&mut self, idx: usize, temperature: f64) -> (Trajectory, Vec<Vec<GroundAction>>) {
        let problem = Arc::clone(&self.problems[idx].problem);
        let main = &self.main;
        let vocab = &self.vocab;
        let rng = &mut self.rng;
        let mut seen_actions = Vec::new();
        let trajectory = rollout(&problem, &problem.goal, self.cfg.horizon, |state, actions| {
            let input = encode(vocab, &problem, state, actions, &problem.goal).expect("vocabulary checked");
            let q: Vec<f64> = main
                .q_values(&input)
                .expect("vocabulary checked")
                .into_iter()
                .map(Scalar::as_f64)
                .collect();
            seen_actions.push(actions.to_vec());
            boltzmann_select(&q, temperature, rng)
        });
        (trajectory, seen_actions)
    }

    /// Pushes transitions `start..start + len` of `trajectory` under `goal`,
    /// the last one terminal.
    #[allow(clippy::too_many_arguments)]
    fn insert(
        &mut self,
        problem: &Problem,
        states: &[&State],
        actions: &[Vec<GroundAction>],
        trajectory: &Trajectory,
        start: usize,
        len: usize,
        goal: &AtomSet,
    ) -> Result<(), TrainError> {
        let inputs: Vec<Arc<EncodedInput>> = (start..start + len)
            .map(|t| encode(&self.vocab, problem, states[t], &actions[t], goal).map(Arc::new))
            .collect::<Result<_, _>>()?;
        for k in 0..len {
            let t = start + k;
            let tr = &trajectory.transitions[t];
            let action = actions[t]
                .iter()
                .position(|a| *a == tr.action)
                .expect("action was applicable");
            self.buffer.push(ReplayEntry {
                input: Arc::clone(&inputs[k]),
                action,
                reward: tr.reward,
                next: (k + 1 < len).then(|| Arc::clone(&inputs[k + 1])),
                goal_size: goal.len(),
            });
        }
        Ok(())
    }

    /// Rollouts, relabeling and buffer insertion, then the optimization
    /// steps and the target update.
    pub fn run_episode(&mut self) -> Result<EpisodeStats, TrainError> {
        let episode = self.episode;
        let temperature = self.cfg.temperature.value(episode);
        let lr = self.cfg.learning_rate.value(episode);
        let mut goal_sizes = Vec::new();
        let mut lengths = Vec::new();
        let mut solved = 0;
        let mut terminal = 0;
        for _ in 0..self.cfg.rollouts_per_episode {
            let idx = self.rng.gen_range(0..self.problems.len());
            let (trajectory, actions) = self.explore(idx, temperature);
            let problem = Arc::clone(&self.problems[idx].problem);
            let states = trajectory.states();
            if trajectory.achieved_goal {
                solved += 1;
                if self.cfg.store_original && !trajectory.is_empty() {
                    self.insert(&problem, &states, &actions, &trajectory, 0, trajectory.len(), &problem.goal)?;
                    goal_sizes.push(problem.goal.len() as f64);
                    lengths.push(trajectory.len() as f64);
                    terminal += 1;
                }
            }
            if let Some(variant) = &self.problems[idx].variant {
                let slices = refine(variant, &trajectory);
                for slice in slices {
                    self.insert(&problem, &states, &actions, &trajectory, slice.start, slice.len(), &slice.hindsight_goal)?;
                    goal_sizes.push(slice.hindsight_goal.len() as f64);
                    lengths.push(slice.len() as f64);
                    terminal += 1;
                }
            }
        }

        let mut losses = Vec::new();
        if !self.buffer.is_empty() {
            for _ in 0..self.cfg.steps_per_episode {
                losses.push(self.optimize_step(lr)?);
            }
        }
        self.episode += 1;
        if self.episode.is_multiple_of(self.cfg.target_update_period) {
            self.target.copy_params_from(&self.main);
        }
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Ok(EpisodeStats {
            episode,
            mean_loss: mean(&losses),
            mean_goal_size: mean(&goal_sizes),
            mean_traj_len: mean(&lengths),
            buffer_size: self.buffer.len(),
            temperature,
            lr,
            rollouts_solved: solved,
            inserted_trajectories: goal_sizes.len(),
            inserted_terminal: terminal,
            validation: None,
        })
    }

    /// One prioritized mini-batch update; returns the weighted mean Huber
    /// loss of the main readout.
    pub fn optimize_step(&mut self, lr: f64) -> Result<f64, TrainError> {
        if self.buffer.is_empty() {
            return Err(TrainError::EmptyBuffer);
        }
        let samples = self.buffer.sample(self.cfg.batch_size, &mut self.rng);
        let entries: Vec<&ReplayEntry> = samples.iter().map(|s| self.buffer.get(s.index)).collect();

        let nexts: Vec<&EncodedInput> = entries.iter().filter_map(|e| e.next.as_deref()).collect();
        let next_q = if nexts.is_empty() {
            None
        } else {
            Some(self.target.forward(&nexts)?)
        };
        let mut targets = Vec::with_capacity(entries.len());
        let mut j = 0;
        for e in &entries {
            if e.is_terminal() {
                targets.push(e.reward);
            } else {
                let q: Vec<f64> = next_q.as_ref().expect("has successors").graph(j).iter().map(|&v| v as f64).collect();
                targets.push(bootstrap_target(e.reward, false, &q, self.cfg.gamma));
                j += 1;
            }
        }

        let aux = self.cfg.aux_readout.then(|| self.main.sample_aux_layer(&mut self.rng));
        let inputs: Vec<&EncodedInput> = entries.iter().map(|e| e.input.as_ref()).collect();
        let q = self.main.forward_train(&inputs, aux)?;
        let n = entries.len() as f64;
        let delta = self.cfg.huber_delta;
        let mut dq = vec![0f32; q.q.len()];
        let mut daux = aux.map(|_| vec![0f32; q.q.len()]);
        let mut loss = 0.0;
        let mut errors = Vec::with_capacity(entries.len());
        for (i, (e, s)) in entries.iter().zip(&samples).enumerate() {
            let slot = q.offsets[i] + e.action;
            let err = q.q[slot] as f64 - targets[i];
            loss += s.weight * huber(err, delta);
            dq[slot] = (s.weight * huber_grad(err, delta) / n) as f32;
            if let (Some(d), Some(qa)) = (daux.as_mut(), q.aux.as_ref()) {
                let err_aux = qa[slot] as f64 - targets[i];
                d[slot] = (s.weight * huber_grad(err_aux, delta) / n) as f32;
            }
            errors.push(err);
        }
        let grads = self.main.backward(&dq, daux.as_deref())?;
        self.optimizer.step(self.main.params_mut(), &grads, lr);
        for (s, err) in samples.iter().zip(errors) {
            self.buffer.update_priority(s.index, err);
        }
        Ok(loss / n)
    }

    pub fn validate(&self, problems: &[Problem], threads: usize) -> Result<ValidationRecord, TrainError> {
        let report = evaluate(&self.main, &self.vocab, problems, &self.cfg.eval, threads)?;
        Ok(ValidationRecord {
            episode: self.episode.saturating_sub(1),
            coverage: report.coverage as f64 / problems.len() as f64,
            total_length: report.total_length,
        })
    }

    /// Trains for the configured number of episodes. With `out`, writes
    /// `metrics.csv`, a checkpoint per validation and `best.bin`.
    pub fn fit(&mut self, validation: &[Problem], threads: usize, out: Option<&Path>) -> Result<TrainOutcome, TrainError> {
        let mut writer = match out {
            Some(dir) => {
                fs::create_dir_all(dir.join("checkpoints"))?;
                Some(MetricsWriter::create(&dir.join("metrics.csv"))?)
            }
            None => None,
        };
        let mut history = Vec::new();
        let mut snapshots: Vec<(Vec<f32>, Option<PathBuf>)> = Vec::new();
        let mut episodes = Vec::new();
        let interval = self.cfg.validation_interval;
        while self.episode < self.cfg.episodes {
            let mut stats = self.run_episode()?;
            let last = self.episode == self.cfg.episodes;
            if interval > 0 && !validation.is_empty() && (self.episode.is_multiple_of(interval) || last) {
                let record = self.validate(validation, threads)?;
                log::info!(
                    "episode {}: validation coverage {:.3}, total length {}",
                    record.episode,
                    record.coverage,
                    record.total_length
                );
                let path = match out {
                    Some(dir) => {
                        let path = dir.join("checkpoints").join(format!("episode-{:05}.bin", record.episode));
                        save_checkpoint(&self.main, &path, &self.sidecar(Some(&record)))?;
                        Some(path)
                    }
                    None => None,
                };
                snapshots.push((self.main.params().to_vec(), path));
                history.push(record.clone());
                stats.validation = Some(record);
            }
            log::debug!(
                "episode {}: loss {:?} goal size {:?} buffer {}",
                stats.episode,
                stats.mean_loss,
                stats.mean_goal_size,
                stats.buffer_size
            );
            if let Some(w) = writer.as_mut() {
                w.write(&stats.metrics_row())?;
            }
            episodes.push(stats);
        }

        let best = select_checkpoint(&history, self.cfg.seed);
        let best_params = match best {
            Some(i) => snapshots[i].0.clone(),
            None => self.main.params().to_vec(),
        };
        if let Some(dir) = out {
            let best_path = dir.join("best.bin");
            match best.and_then(|i| snapshots[i].1.as_ref()) {
                Some(src) => {
                    fs::copy(src, &best_path)?;
                    fs::copy(src.with_extension("json"), best_path.with_extension("json"))?;
                }
                None => save_checkpoint(&self.main, &best_path, &self.sidecar(None))?,
            }
        }
        Ok(TrainOutcome {
            history,
            best,
            best_params,
            episodes,
        })
    }

    /// Network with the parameters of `outcome`'s selected checkpoint.
    pub fn best_network(&self, outcome: &TrainOutcome) -> QNetwork<f32> {
        let mut net = self.main.clone();
        net.params_mut().copy_from_slice(&outcome.best_params);
        net
    }

    fn sidecar(&self, record: Option<&ValidationRecord>) -> serde_json::Value {
        serde_json::json!({
            "domain": self.vocab.domain,
            "episode": self.episode.saturating_sub(1),
            "validation": record,
            "config": self.cfg,
        })
    }
}

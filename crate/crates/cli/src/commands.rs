use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relher_core::env::{read_jsonl, rollout};
use relher_core::eval::generate::{generate_instances, SizeRange};
use relher_core::eval::{evaluate as run_eval, BenchReport};
use relher_core::her::{refine, HerVariant};
use relher_core::lifting::{enumerate_lifted_goals, ground_schema};
use relher_core::planning::{parse_domain, parse_problem, Domain, Problem};
use relher_core::qnet::{load_checkpoint, Vocabulary};
use relher_core::train::Trainer;

use crate::config::RunConfig;
use crate::{EvaluateArgs, GenerateArgs, LiftArgs, RelabelArgs, TrainArgs};

/// Reported with exit code 2.
#[derive(Debug)]
pub struct MissingDomainFile(pub PathBuf);

impl std::fmt::Display for MissingDomainFile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "domain file not found: {}", self.0.display())
    }
}

impl std::error::Error for MissingDomainFile {}

/// A built-in domain name, or a path to a domain file.
pub fn load_domain(spec: &str) -> Result<(Arc<Domain>, Option<&'static str>)> {
    for name in ["blocks", "gripper", "maze"] {
        if spec == name {
            let d = relher_core::domains::load(name).expect("built-in").context("parsing built-in domain")?;
            return Ok((d, Some(name)));
        }
    }
    let path = Path::new(spec);
    if !path.is_file() {
        return Err(MissingDomainFile(path.to_path_buf()).into());
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let domain = parse_domain(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok((Arc::new(domain), None))
}

pub fn load_problem(domain: &Arc<Domain>, path: &Path) -> Result<Problem> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_problem(&text, Arc::clone(domain)).with_context(|| format!("parsing {}", path.display()))
}

/// Every regular file in `dir`, in file-name order.
pub fn load_instances(domain: &Arc<Domain>, dir: &Path) -> Result<Vec<Problem>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading instance directory {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.is_file());
    paths.sort();
    if paths.is_empty() {
        bail!("no problem files in {}", dir.display());
    }
    paths.iter().map(|p| load_problem(domain, p)).collect()
}

fn split(
    domain: &Arc<Domain>,
    builtin: Option<&str>,
    dir: Option<&Path>,
    range: SizeRange,
    seed: u64,
    what: &str,
) -> Result<Vec<Problem>> {
    match (dir, builtin) {
        (Some(dir), _) => load_instances(domain, dir),
        (None, Some(name)) => Ok(generate_instances(name, range, seed)?),
        (None, None) => bail!("{what} instances are required for a domain file"),
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let (domain, builtin) = load_domain(&args.domain)?;
    let mut cfg = RunConfig::with_file(&args.domain, args.config.as_deref())?;
    if let Some(v) = args.instances {
        cfg.instances = Some(v);
    }
    if let Some(v) = args.her {
        cfg.trainer.her = Some(v);
    }
    if let Some(v) = args.episodes {
        cfg.trainer.episodes = v;
    }
    if let Some(v) = args.seed {
        cfg.trainer.seed = v;
    }
    if let Some(v) = args.out {
        cfg.out = Some(v);
    }
    if let Some(v) = args.threads {
        cfg.threads = v;
    }
    if let Some(v) = args.layers {
        cfg.trainer.layers = v;
    }
    if let Some(v) = args.horizon {
        cfg.trainer.horizon = v;
    }
    let her = cfg.trainer.her.map_or("none".to_string(), |k| k.to_string());
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{her}-seed{}", domain.name, cfg.trainer.seed)));
    cfg.out = Some(out.clone());

    let s = &cfg.splits;
    let train = split(&domain, builtin, cfg.instances.as_deref(), s.train, s.seed, "training")?;
    let validation = split(&domain, builtin, cfg.validation_instances.as_deref(), s.validation, s.seed + 1, "validation")?;
    let test = split(&domain, builtin, cfg.test_instances.as_deref(), s.test, s.seed + 2, "test")?;

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.json"), serde_json::to_string_pretty(&cfg)? + "\n")?;
    log::info!(
        "training on {} problems, {} validation, {} test; output in {}",
        train.len(),
        validation.len(),
        test.len(),
        out.display()
    );

    let mut trainer = Trainer::new(cfg.trainer.clone(), train)?;
    let outcome = trainer.fit(&validation, cfg.threads, Some(&out))?;
    let best = trainer.best_network(&outcome);
    if let Some(i) = outcome.best {
        let r = &outcome.history[i];
        println!(
            "selected checkpoint from episode {} (validation coverage {:.3}, total length {})",
            r.episode, r.coverage, r.total_length
        );
    }
    let report = run_eval(&best, trainer.vocabulary(), &test, &cfg.trainer.eval, cfg.threads)?;
    report.save_csv(&out.join("report.csv"))?;
    println!("{report}");
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let (domain, builtin) = load_domain(&args.domain)?;
    let cfg = RunConfig::with_file(&args.domain, args.config.as_deref())?;
    let vocab = Arc::new(Vocabulary::new(&domain));
    let mut net = load_checkpoint::<f32>(&args.checkpoint, vocab)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    if let Some(l) = args.layers {
        net.set_layers(l);
    }
    let s = &cfg.splits;
    let dir = args.instances.as_deref().or(cfg.test_instances.as_deref());
    let problems = split(&domain, builtin, dir, s.test, s.seed + 2, "test")?;
    let threads = args.threads.unwrap_or(cfg.threads);
    let report: BenchReport = run_eval(&net, net.vocabulary(), &problems, &cfg.trainer.eval, threads)?;
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        report.save_csv(&out.join("report.csv"))?;
    }
    println!("{report}");
    Ok(())
}

pub fn relabel(args: RelabelArgs) -> Result<()> {
    let (domain, _) = load_domain(&args.domain)?;
    let problem = load_problem(&domain, &args.problem)?;
    let trajectory = match &args.trajectory {
        Some(path) => {
            let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            read_jsonl(&problem, BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            rollout(&problem, &problem.goal, args.horizon, |_, acts| rng.gen_range(0..acts.len()))
        }
    };
    let variant = HerVariant::for_goal(args.her, &problem.goal)?;
    let slices = refine(&variant, &trajectory);
    println!("{} transitions, {} slices", trajectory.len(), slices.len());
    for s in &slices {
        println!(
            "[{}..{}) {}",
            s.start,
            s.end(),
            problem.atom_strings(&s.hindsight_goal).join(" ")
        );
    }
    Ok(())
}

pub fn lift_goals(args: LiftArgs) -> Result<()> {
    let (domain, _) = load_domain(&args.domain)?;
    let problem = load_problem(&domain, &args.problem)?;
    let state = match &args.state {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with(';')).collect();
            Some(problem.parse_atom_set(&lines).with_context(|| format!("parsing {}", path.display()))?)
        }
        None => None,
    };
    for schema in enumerate_lifted_goals(&problem.goal)? {
        println!("{}", schema.display(&domain));
        if let Some(state) = &state {
            match ground_schema(&schema, state, None) {
                Some(g) => println!("  -> {}", problem.atom_strings(&g.apply(&schema)).join(" ")),
                None => println!("  -> none"),
            }
        }
    }
    Ok(())
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let range = SizeRange {
        min: args.min,
        max: args.max,
        count: args.count.unwrap_or(args.max.saturating_sub(args.min) + 1),
    };
    let problems = generate_instances(&args.domain, range, args.seed)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for p in &problems {
        let path = args.out.join(format!("{}.strips", p.name));
        fs::write(&path, p.to_string()).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}

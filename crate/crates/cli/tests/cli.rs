use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn relher(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relher"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

/// A tiny network and schedule so a full train run takes a second or two.
const TINY: &str = r#"{"trainer": {"width": 8, "layers": 2, "steps_per_episode": 4, "batch_size": 8, "horizon": 30, "validation_interval": 2}}"#;

#[test]
fn help_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(stdout(&relher(&["--help"], dir.path())), golden("help.txt"));
    assert_eq!(stdout(&relher(&["train", "--help"], dir.path())), golden("train-help.txt"));
}

#[test]
fn missing_domain_file_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = relher(&["train", "--domain", "no/such/domain.strips"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no/such/domain.strips"));
    let o = relher(&["lift-goals", "--domain", "missing.strips", "--problem", "p"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lift_goals_on_a_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = relher(&["lift-goals", "--domain", "blocks", "--problem", &fixture("chain4.strips")], dir.path());
    assert_eq!(stdout(&out), golden("chain4-lift-goals.txt"));

    let state = dir.path().join("state");
    fs::write(&state, "(on b3 b4)\n(on b2 b3)\n(clear b2)\n").unwrap();
    let out = relher(
        &["lift-goals", "--domain", "blocks", "--problem", &fixture("chain4.strips"), "--state", state.to_str().unwrap()],
        dir.path(),
    );
    let text = stdout(&out);
    let groundings: Vec<&str> = text.lines().filter(|l| l.starts_with("  -> ")).collect();
    assert_eq!(groundings, ["  -> none", "  -> (on b2 b3) (on b3 b4)", "  -> (on b2 b3)"]);
}

#[test]
fn generated_instances_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["generate-instances", "--domain", "blocks", "--min", "3", "--max", "5", "--count", "6", "--seed", "4", "--out", out];
    stdout(&relher(&args("a"), dir.path()));
    stdout(&relher(&args("b"), dir.path()));
    let names = |d: &str| {
        let mut v: Vec<_> = fs::read_dir(dir.path().join(d)).unwrap().map(|e| e.unwrap().file_name()).collect();
        v.sort();
        v
    };
    assert_eq!(names("a").len(), 6);
    assert_eq!(names("a"), names("b"));
    for n in names("a") {
        assert_eq!(fs::read(dir.path().join("a").join(&n)).unwrap(), fs::read(dir.path().join("b").join(&n)).unwrap());
    }
    let o = relher(&["generate-instances", "--domain", "gripper", "--min", "1", "--max", "3", "--out", "g"], dir.path());
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn maze_relabeling_needs_lifted_goals() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&relher(
        &["generate-instances", "--domain", "maze", "--min", "9", "--max", "9", "--seed", "2", "--out", "m"],
        dir.path(),
    ));
    let problem = fs::read_dir(dir.path().join("m")).unwrap().next().unwrap().unwrap().path();
    let problem = problem.to_str().unwrap();
    let prop = stdout(&relher(&["relabel", "--domain", "maze", "--problem", problem, "--her", "prop"], dir.path()));
    assert_eq!(prop.trim(), "100 transitions, 0 slices");
    let lifted = stdout(&relher(&["relabel", "--domain", "maze", "--problem", problem, "--her", "lifted"], dir.path()));
    let first = lifted.lines().next().unwrap();
    assert!(first.starts_with("100 transitions, ") && !first.ends_with(" 0 slices"), "{first}");
    assert!(lifted.lines().skip(1).all(|l| l.contains(") (at c")));
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.json"), TINY).unwrap();
    let out = relher(
        &["train", "--domain", "gripper", "--her", "lifted", "--episodes", "4", "--seed", "3", "--config", "tiny.json", "--out", "run"],
        dir.path(),
    );
    let text = stdout(&out);
    assert!(text.contains("coverage "), "{text}");
    let run = dir.path().join("run");
    let metrics = fs::read_to_string(run.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "episode,mean_loss,mean_goal_size,mean_traj_len,buffer_size,temperature,lr,val_coverage,val_total_len"
    );
    assert_eq!(lines.count(), 4);
    let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["trainer"]["episodes"], 4);
    assert_eq!(config["trainer"]["width"], 8);
    assert_eq!(config["trainer"]["her"], "lifted");
    assert!(run.join("best.bin").exists() && run.join("best.json").exists());
    assert!(run.join("checkpoints/episode-00001.bin").exists());
    let report = fs::read_to_string(run.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 2, "two test instances:\n{report}");

    stdout(&relher(&["generate-instances", "--domain", "gripper", "--min", "1", "--max", "4", "--out", "eval"], dir.path()));
    let out = relher(
        &["evaluate", "--domain", "gripper", "--checkpoint", "run/best.bin", "--instances", "eval", "--out", "report"],
        dir.path(),
    );
    stdout(&out);
    let report = fs::read_to_string(dir.path().join("report/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 4);

    // A checkpoint only loads against the vocabulary it was trained with.
    let o = relher(&["evaluate", "--domain", "blocks", "--checkpoint", "run/best.bin"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("vocabulary"));
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.json"), TINY).unwrap();
    for out in ["a", "b"] {
        stdout(&relher(
            &["train", "--domain", "blocks", "--her", "prop", "--episodes", "3", "--seed", "7", "--config", "tiny.json", "--out", out],
            dir.path(),
        ));
    }
    let read = |d: &str, f: &str| fs::read(dir.path().join(d).join(f)).unwrap();
    assert_eq!(read("a", "metrics.csv"), read("b", "metrics.csv"));
    assert_eq!(read("a", "best.bin"), read("b", "best.bin"));
    assert_eq!(read("a", "report.csv"), read("b", "report.csv"));
}

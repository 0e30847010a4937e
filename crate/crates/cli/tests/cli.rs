use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maskshift::data::load_features;
use maskshift::masking::save_mask;
use maskshift::model::{evaluate_accuracy, load_head, train_head};
use maskshift::{RngStream, TrainConfig, WeightMask};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_maskshift"));
    c.env_remove("MASKSHIFT_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn ok(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap_or(Value::Null)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SYNTH: &str = "feature_dim = 8\nnum_classes = 3\nsamples_per_class = 40\nnoise_std = 1.0\n";
const STAGE: &str = "learning_rate = 0.01\nepochs = 5\n";

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Self { dir: tempfile::tempdir().unwrap() };
        f.write("synth.toml", SYNTH);
        f.write("stage.toml", STAGE);
        ok(&["synth", "--config", s(&f.path("synth.toml")), "--out", s(f.dir.path())]);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn train(&self, out: &str) -> Value {
        ok(&[
            "train-source",
            "--data",
            s(&self.path("source.ftds")),
            "--config",
            s(&self.path("stage.toml")),
            "--seed",
            "0",
            "--out",
            s(&self.path(out)),
        ])
    }
}

#[test]
fn synth_writes_both_domains_and_fails_closed() {
    let f = Fixture::new();
    assert_eq!(load_features(f.path("source.ftds")).unwrap().len(), 120);
    assert_eq!(load_features(f.path("target.ftds")).unwrap().domain(), "target");

    let missing = f.path("nope");
    let out = run(&["synth", "--config", s(&f.path("synth.toml")), "--out", s(&missing)]);
    assert_eq!(code(&out), 3);
    assert!(!missing.exists());

    let bad = f.write("bad.toml", "feature_dims = 3\n");
    assert_eq!(code(&run(&["synth", "--config", s(&bad), "--out", s(f.dir.path())])), 2);

    let csv_dir = f.path("csv");
    std::fs::create_dir(&csv_dir).unwrap();
    ok(&["synth", "--config", s(&f.path("synth.toml")), "--out", s(&csv_dir), "--format", "csv"]);
    assert!(csv_dir.join("source.csv").is_file());
}

#[test]
fn unshifted_domains_cross_evaluate() {
    let f = Fixture::new();
    let cfg = f.write("flat.toml", "feature_dim = 8\nnum_classes = 3\nsamples_per_class = 300\nnoise_std = 1.0\nshift_magnitude = 0.0\n");
    let dir = f.path("flat");
    std::fs::create_dir(&dir).unwrap();
    ok(&["synth", "--config", s(&cfg), "--out", s(&dir)]);
    let src = load_features(dir.join("source.ftds")).unwrap();
    let tgt = load_features(dir.join("target.ftds")).unwrap();
    let tc = TrainConfig { learning_rate: 1e-2, epochs: 10, ..Default::default() };
    let a = train_head(&src, &tc, &mut RngStream::new(0)).unwrap().head;
    let b = train_head(&tgt, &tc, &mut RngStream::new(0)).unwrap().head;
    let gap = |h| (evaluate_accuracy(h, &src).unwrap() - evaluate_accuracy(h, &tgt).unwrap()).abs();
    assert!(gap(&a) <= 0.05 && gap(&b) <= 0.05, "{} {}", gap(&a), gap(&b));
}

#[test]
fn train_source_is_deterministic_and_reloads() {
    let f = Fixture::new();
    let log = f.train("a.mshd");
    f.train("b.mshd");
    assert_eq!(std::fs::read(f.path("a.mshd")).unwrap(), std::fs::read(f.path("b.mshd")).unwrap());
    let head = load_head(f.path("a.mshd")).unwrap();
    let acc = evaluate_accuracy(&head.head, &load_features(f.path("source.ftds")).unwrap()).unwrap();
    assert_eq!(log["train_accuracy"].as_f64().unwrap(), acc);
    assert!(f.path("a.log.json").is_file());

    let out = run(&["train-source", "--data", s(&f.path("source.ftds")), "--num-classes", "5", "--out", s(&f.path("c.mshd"))]);
    assert_eq!(code(&out), 2);
    let out = run(&["train-source", "--data", s(&f.path("absent.ftds")), "--out", s(&f.path("c.mshd"))]);
    assert_eq!(code(&out), 3);
}

#[test]
fn seed_falls_back_to_environment() {
    let f = Fixture::new();
    let out = bin()
        .env("MASKSHIFT_SEED", "5")
        .args(["train-source", "--data", s(&f.path("source.ftds")), "--config", s(&f.path("stage.toml")), "--out", s(&f.path("h.mshd"))])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let log: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(log["seed"], 5);
    assert_eq!(load_head(f.path("h.mshd")).unwrap().seed, 5);
}

#[test]
fn learn_mask_strategies() {
    let f = Fixture::new();
    f.train("h.mshd");
    let head = s(&f.path("h.mshd")).to_string();

    let naive = ok(&["learn-mask", "--head", &head, "--strategy", "naive", "--out", s(&f.path("n.msmk"))]);
    assert!(naive[0]["frozen_fraction"].as_f64().unwrap() > 0.0);

    assert_eq!(code(&run(&["learn-mask", "--head", &head, "--strategy", "lottery", "--out", s(&f.path("x.msmk"))])), 2);
    assert_eq!(code(&run(&["learn-mask", "--head", &head, "--strategy", "binary", "--out", s(&f.path("x.msmk"))])), 2);

    let alpha0 = f.write("alpha0.toml", "learning_rate = 0.05\nepochs = 10\nsparsity = 0.0\n");
    let bin_log = ok(&[
        "learn-mask", "--head", &head, "--strategy", "binary", "--data", s(&f.path("source.ftds")),
        "--config", s(&alpha0), "--seed", "1", "--out", s(&f.path("b.msmk")),
    ]);
    let before = bin_log[0]["source_accuracy"].as_f64().unwrap();
    let after = bin_log[0]["masked_source_accuracy"].as_f64().unwrap();
    assert!((before - after).abs() <= 0.02, "{before} {after}");

    let logs = ok(&[
        "learn-mask", "--head", &head, "--strategy", "editor", "--data", s(&f.path("source.ftds")),
        "--config", s(&f.path("stage.toml")), "--freeze-direction", "both", "--out", s(&f.path("e.msmk")),
    ]);
    assert_eq!(logs.as_array().unwrap().len(), 2);
    assert!(f.path("e.large.msmk").is_file() && f.path("e.small.msmk").is_file());
}

#[test]
fn transfer_contract() {
    let f = Fixture::new();
    f.train("h.mshd");
    let artifact = load_head(f.path("h.mshd")).unwrap();
    let (r, c) = artifact.head.weight().shape();
    save_mask(&WeightMask::filled(r, c, true), f.path("ones.msmk")).unwrap();
    save_mask(&WeightMask::filled(r, c, false), f.path("zeros.msmk")).unwrap();
    let common = |mask: Option<&str>, init: &str, out: &str, extra: &[&str]| {
        let mut args = vec![
            "transfer".to_string(), "--head".into(), s(&f.path("h.mshd")).into(), "--target".into(),
            s(&f.path("target.ftds")).into(), "--init".into(), init.into(), "--config".into(),
            s(&f.path("stage.toml")).into(), "--seed".into(), "3".into(), "--out".into(), s(&f.path(out)).into(),
        ];
        if let Some(m) = mask {
            args.extend(["--mask".to_string(), s(&f.path(m)).to_string()]);
        }
        args.extend(extra.iter().map(|a| a.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(&refs)
    };

    let log = common(Some("ones.msmk"), "random", "frozen.mshd", &["--freeze-bias"]);
    assert_eq!(log["max_frozen_drift"], 0.0);
    assert_eq!(log["max_bias_drift"], 0.0);
    assert_eq!(load_head(f.path("frozen.mshd")).unwrap().head, artifact.head);

    common(Some("zeros.msmk"), "source-final", "zeros.mshd", &[]);
    common(None, "source-init", "baseline.mshd", &[]);
    assert_eq!(load_head(f.path("zeros.mshd")).unwrap().head, load_head(f.path("baseline.mshd")).unwrap().head);

    let out = run(&["transfer", "--head", s(&f.path("h.mshd")), "--target", s(&f.path("target.ftds")), "--data", s(&f.path("source.ftds")), "--out", s(&f.path("z.mshd"))]);
    assert_eq!(code(&out), 2);
    let help = String::from_utf8(run(&["transfer", "--help"]).stdout).unwrap();
    assert!(!help.contains("--data") && !help.contains("--source"));
}

#[test]
fn verify_checks_digests() {
    let f = Fixture::new();
    f.train("h.mshd");
    let v = ok(&["verify", s(&f.path("h.mshd")), "--config", s(&f.path("stage.toml"))]);
    assert_eq!(v["match"], true);
    let other = f.write("other.toml", "learning_rate = 0.02\nepochs = 5\n");
    assert_eq!(code(&run(&["verify", s(&f.path("h.mshd")), "--config", s(&other)])), 4);
    let junk = f.write("junk.bin", "hello world");
    assert_eq!(code(&run(&["verify", s(&junk)])), 3);

    ok(&["learn-mask", "--head", s(&f.path("h.mshd")), "--strategy", "naive", "--forward-mask", "hard", "--out", s(&f.path("n.msmk"))]);
    assert_eq!(code(&run(&["verify", s(&f.path("n.msmk"))])), 4);
    ok(&["verify", s(&f.path("n.msmk")), "--forward-mask", "hard"]);
}

fn experiment_config(f: &Fixture, name: &str, body: &str) -> PathBuf {
    f.write(
        name,
        &format!(
            "source = \"source.ftds\"\ntarget = \"target.ftds\"\n{body}\n[source_training]\n{STAGE}\n[mask]\nlearning_rate = 0.05\nepochs = 3\nsparsity = 0.2\n[finetune]\n{STAGE}"
        ),
    )
}

#[test]
fn experiment_grid_reports() {
    let f = Fixture::new();
    let one = experiment_config(&f, "one.toml", "strategies = [\"binary\"]\ninits = [\"random\"]\nseeds = [4]\n");
    ok_lines(&["experiment", "--config", s(&one), "--out", s(&f.path("one"))]);
    let report: Value = serde_json::from_slice(&std::fs::read(f.path("one/report_source_target.json")).unwrap()).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 1);
    assert!(report["cells"][0]["source_gain_std"].is_null());

    let three = experiment_config(&f, "three.toml", "strategies = [\"naive\", \"binary\"]\nseeds = [0, 1, 2]\n");
    for (dir, jobs) in [("a", "1"), ("b", "3")] {
        ok_lines(&["experiment", "--config", s(&three), "--out", s(&f.path(dir)), "--format", "csv", "--jobs", jobs]);
    }
    let a = std::fs::read(f.path("a/report_source_target.csv")).unwrap();
    assert_eq!(a, std::fs::read(f.path("b/report_source_target.csv")).unwrap());
    assert_eq!(std::fs::read(f.path("a/runs_source_target.json")).unwrap(), std::fs::read(f.path("b/runs_source_target.json")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| !l.contains(",,")));
}

#[test]
fn experiment_failures() {
    let f = Fixture::new();
    let missing = f.write("missing.toml", "source = \"gone.ftds\"\ntarget = \"target.ftds\"\n");
    assert_eq!(code(&run(&["experiment", "--config", s(&missing), "--out", s(&f.path("m"))])), 2);
    assert!(!f.path("m").exists());

    let broken = f.write(
        "broken.toml",
        &format!("source = \"source.ftds\"\ntarget = \"target.ftds\"\nseeds = [0]\nstrategies = [\"naive\", \"binary\"]\n[source_training]\n{STAGE}\n[mask]\nlearning_rate = 1e308\nsparsity = 1e308\n[finetune]\n{STAGE}"),
    );
    let out = run(&["experiment", "--config", s(&broken), "--out", s(&f.path("x"))]);
    assert_eq!(code(&out), 4);
    let report: Value = serde_json::from_slice(&std::fs::read(f.path("x/report_source_target.json")).unwrap()).unwrap();
    assert_eq!(report["records"].as_array().unwrap().len(), 1);
    let runs: Value = serde_json::from_slice(&std::fs::read(f.path("x/runs_source_target.json")).unwrap()).unwrap();
    assert_eq!(runs["failures"].as_array().unwrap().len(), 1);
}

fn ok_lines(args: &[&str]) {
    let out = run(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

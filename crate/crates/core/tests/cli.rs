use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ivegan::cli::{self, checkpoint::Checkpoint, AnyModel, EvalReport, Experiment, ModelKind, RunConfig};
use ivegan::autodiff::Tensor;
use ivegan::model::{init_rng, train_rng, IveGanModel};
use ivegan::nn::Network;

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["ivegan"];
    v.extend_from_slice(args);
    cli::run(v)
}

fn tiny_config(dir: &Path, name: &str, iterations: u64) -> RunConfig {
    let mut cfg = RunConfig::ring_defaults(7, dir.join(name));
    cfg.dims.hidden = Some(16);
    cfg.train.iterations = iterations;
    cfg.train.batch_size = 32;
    cfg.train.snapshot_every = 10;
    cfg.train.snapshot_size = 100;
    cfg.eval.n_samples = 1000;
    cfg
}

fn write_config(dir: &Path, file: &str, cfg: &RunConfig) -> PathBuf {
    let p = dir.join(file);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

#[test]
fn missing_config_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["train", "--config", &s(&missing)]), 2);
    let err = cli::cmd_train(&missing, None).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("nope.json"));
}

#[test]
fn invalid_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "out", 10);
    let mut v = serde_json::to_value(&cfg).unwrap();
    v["surprise"] = serde_json::json!(1);
    let p = dir.path().join("bad.json");
    fs::write(&p, v.to_string()).unwrap();
    assert_eq!(run(&["train", "--config", &s(&p)]), 2);

    let mut cfg = tiny_config(dir.path(), "out", 10);
    cfg.train.batch_size = 1;
    let p = write_config(dir.path(), "bad2.json", &cfg);
    assert_eq!(run(&["train", "--config", &s(&p)]), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn train_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "run", 20);
    let p = write_config(dir.path(), "c.json", &cfg);
    assert_eq!(run(&["train", "--config", &s(&p)]), 0);
    let out = dir.path().join("run");
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 21);
    assert!(history.starts_with("iteration,loss_d,"));
    for it in [0, 10, 20] {
        assert!(out.join(format!("snapshots/iter_{it:06}.csv")).exists());
    }
    for it in [10, 20] {
        assert!(out.join(format!("checkpoints/iter_{it:06}.json")).exists());
    }
    let report: EvalReport = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    match report {
        EvalReport::Ring { coverage, iteration, .. } => {
            assert_eq!(iteration, 20);
            assert_eq!(coverage.n_samples, 1000);
            assert!(coverage.per_mode_counts.iter().sum::<usize>() <= coverage.n_samples);
        }
        other => panic!("{other:?}"),
    }
    let resolved: RunConfig = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(resolved, cfg);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let whole = tiny_config(dir.path(), "whole", 30);
    let p = write_config(dir.path(), "whole.json", &whole);
    assert_eq!(run(&["train", "--config", &s(&p)]), 0);

    let mut split = tiny_config(dir.path(), "split", 13);
    let p = write_config(dir.path(), "split13.json", &split);
    assert_eq!(run(&["train", "--config", &s(&p)]), 0);
    split.train.iterations = 30;
    let p = write_config(dir.path(), "split30.json", &split);
    let ck = dir.path().join("split/checkpoint.json");
    assert_eq!(run(&["train", "--config", &s(&p), "--resume", &s(&ck)]), 0);

    let read = |run: &str, f: &str| fs::read(dir.path().join(run).join(f)).unwrap();
    assert_eq!(read("whole", "history.csv"), read("split", "history.csv"));
    assert_eq!(read("whole", "checkpoint.json"), read("split", "checkpoint.json"));
    assert_eq!(read("whole", "report.json"), read("split", "report.json"));
    assert_eq!(read("whole", "snapshots/iter_000030.csv"), read("split", "snapshots/iter_000030.csv"));

    let mut other = split.clone();
    other.seed = 99;
    let p = write_config(dir.path(), "other.json", &other);
    assert_eq!(run(&["train", "--config", &s(&p), "--resume", &s(&ck)]), 2);
}

#[test]
fn checkpoint_file_roundtrip_is_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "rt", 10);
    let p = write_config(dir.path(), "c.json", &cfg);
    assert_eq!(run(&["train", "--config", &s(&p)]), 0);
    let path = dir.path().join("rt/checkpoint.json");
    let bytes = fs::read(&path).unwrap();
    let ck = Checkpoint::load(&path).unwrap();
    let again = dir.path().join("again.json");
    ck.save(&again).unwrap();
    assert_eq!(fs::read(&again).unwrap(), bytes);
    let model = ck.restore().unwrap();
    let recaptured = Checkpoint::capture(&model, ck.experiment, ck.iteration, ck.config_hash.clone(), &ck.rng);
    assert_eq!(recaptured.to_bytes(), bytes);
}

#[test]
fn sample_encode_reconstruct_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "m", 10);
    let p = write_config(dir.path(), "c.json", &cfg);
    assert_eq!(run(&["train", "--config", &s(&p)]), 0);
    let ck = s(&dir.path().join("m/checkpoint.json"));
    let f = |n: &str| dir.path().join(n);

    assert_eq!(run(&["sample", "--ckpt", &ck, "--n", "0", "--seed", "1", "--out", &s(&f("empty.csv"))]), 0);
    assert_eq!(fs::read_to_string(f("empty.csv")).unwrap(), "x0,x1\n");
    assert_eq!(run(&["sample", "--ckpt", &ck, "--n", "50", "--seed", "3", "--out", &s(&f("a.csv"))]), 0);
    assert_eq!(run(&["sample", "--ckpt", &ck, "--n", "50", "--seed", "3", "--out", &s(&f("b.csv"))]), 0);
    assert_eq!(fs::read(f("a.csv")).unwrap(), fs::read(f("b.csv")).unwrap());

    assert_eq!(run(&["encode", "--ckpt", &ck, "--in", &s(&f("a.csv")), "--out", &s(&f("z.csv"))]), 0);
    assert_eq!(run(&["reconstruct", "--ckpt", &ck, "--in", &s(&f("a.csv")), "--seed", "2", "--out", &s(&f("r.csv"))]), 0);
    let z = fs::read_to_string(f("z.csv")).unwrap();
    let r = fs::read_to_string(f("r.csv")).unwrap();
    assert!(z.starts_with("x0,x1\n"));
    assert_eq!(z.lines().count(), 51);
    assert_eq!(r.lines().count(), 51);

    fs::write(f("wide.csv"), "x0,x1,x2\n1,2,3\n").unwrap();
    assert_eq!(run(&["encode", "--ckpt", &ck, "--in", &s(&f("wide.csv")), "--out", &s(&f("w.csv"))]), 2);
    assert_eq!(run(&["encode", "--ckpt", &s(&f("missing.json")), "--in", &s(&f("a.csv")), "--out", &s(&f("w.csv"))]), 3);
}

#[test]
fn eval_is_reproducible_and_detects_collapse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "e", 10);
    let p = write_config(dir.path(), "c.json", &cfg);
    assert_eq!(run(&["train", "--config", &s(&p)]), 0);
    let ck = dir.path().join("e/checkpoint.json");
    let r1 = cli::cmd_eval(&ck, &p, &dir.path().join("r1.json")).unwrap();
    let r2 = cli::cmd_eval(&ck, &p, &dir.path().join("r2.json")).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(fs::read(dir.path().join("r1.json")).unwrap(), fs::read(dir.path().join("r2.json")).unwrap());

    // A generator whose last layer ignores its input and sits on mode 0.
    let mut m = IveGanModel::new(cfg.architecture(), &cfg.train.optim, &mut init_rng(0)).unwrap();
    let mut layers = m.generator.layers().to_vec();
    let last = layers.last_mut().unwrap();
    last.weight = Tensor::zeros(last.weight.shape());
    last.bias = Tensor::vector(vec![0.9f64.atanh(), 0.0]).unwrap();
    m.generator = Network::from_layers(layers).unwrap();
    let stub = dir.path().join("stub.json");
    Checkpoint::capture(&AnyModel::Ive(m), Experiment::Ring, 0, "stub".into(), &train_rng(0))
        .save(&stub)
        .unwrap();
    match cli::cmd_eval(&stub, &p, &dir.path().join("stub_report.json")).unwrap() {
        EvalReport::Ring { coverage, .. } => {
            assert_eq!(coverage.covered_modes, 1);
            assert_eq!(coverage.per_mode_counts[0], coverage.n_samples);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn plot_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let f = |n: &str| dir.path().join(n);
    fs::write(f("empty.csv"), "").unwrap();
    assert_eq!(run(&["plot", "--in", &s(&f("empty.csv")), "--out", &s(&f("e.pgm")), "--bins", "8"]), 0);
    let bytes = fs::read(f("e.pgm")).unwrap();
    let head = b"P5\n8 8\n255\n";
    assert_eq!(&bytes[..head.len()], head);
    assert_eq!(bytes.len(), head.len() + 64);
    assert!(bytes[head.len()..].iter().all(|&b| b == 0));

    fs::write(f("one.csv"), "x0,x1\n0.1,0.2\n").unwrap();
    assert_eq!(run(&["plot", "--in", &s(&f("one.csv")), "--out", &s(&f("o.pgm"))]), 0);
    let bytes = fs::read(f("o.pgm")).unwrap();
    let head = b"P5\n64 64\n255\n";
    assert_eq!(bytes[head.len()..].iter().filter(|&&b| b > 0).count(), 1);

    fs::write(f("bad.csv"), "x0,x1\n0.1,0.2\n0.3\n").unwrap();
    let err = cli::cmd_plot(&f("bad.csv"), &f("b.pgm"), 8).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains(":3:"), "{err}");
}

#[test]
fn vanilla_baseline_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config(dir.path(), "v", 10);
    cfg.model = ModelKind::Vanilla;
    let p = write_config(dir.path(), "v.json", &cfg);
    assert_eq!(run(&["train", "--config", &s(&p)]), 0);
    let ck = dir.path().join("v/checkpoint.json");
    match cli::cmd_eval(&ck, &p, &dir.path().join("r.json")).unwrap() {
        EvalReport::Ring { model, .. } => assert_eq!(model, ModelKind::Vanilla),
        other => panic!("{other:?}"),
    }
    let a = s(&dir.path().join("a.csv"));
    assert_eq!(run(&["sample", "--ckpt", &s(&ck), "--n", "5", "--out", &a]), 0);
    assert_eq!(run(&["encode", "--ckpt", &s(&ck), "--in", &a, "--out", &s(&dir.path().join("z.csv"))]), 2);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_ivegan");
    let status = |args: &[&str]| Command::new(bin).args(args).env(cli::LOG_ENV, "off").status().unwrap().code();
    assert_eq!(status(&["train", "--config", "/nonexistent/config.json"]), Some(2));
    assert_eq!(status(&["bogus"]), Some(2));
    assert_eq!(status(&["--help"]), Some(0));
    assert_eq!(status(&["plot", "--in", "/nonexistent.csv", "--out", "x.pgm"]), Some(3));

    let mut cfg = tiny_config(dir.path(), "blowup", 20);
    cfg.train.optim.lr_d = 1e308;
    cfg.train.optim.lr_ge = 1e308;
    let p = write_config(dir.path(), "blowup.json", &cfg);
    assert_eq!(status(&["train", "--config", &s(&p)]), Some(4));
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 3);
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uwa-dbn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.json");
    fs::write(
        &path,
        r#"{
            "kind": "awgn-denoise",
            "dataset_symbols": 600,
            "ebno_grid_db": [0, 6],
            "rbm": {"epochs": 2},
            "fine_tune": {"epochs": 2},
            "methods": ["mle", "dbn-denoise+mle", "dbn-full"],
            "trials": 3,
            "auto_extend": false
        }"#,
    )
    .unwrap();
    path
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_config_is_a_usage_error_naming_the_file() {
    let o = run(&["sweep", "--config", "missing.json", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.json"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_exits_two() {
    let o = run(&["generate", "--bogus", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, r#"{"kind": "awgn-denoise", "trials": 0}"#).unwrap();
    let o = run(&["sweep", "--config", path_str(&cfg), "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn runtime_failure_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["receive", "--input", path_str(&tmp.path().join("nothing.f32"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn generate_train_sweep_are_byte_identical_across_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let mut trees = Vec::new();
    let dir = tmp.path().join("run");
    for _ in 0..2 {
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        let data = dir.join("data");
        let den = dir.join("denoise.bin");
        let cls = dir.join("classifier.bin");
        let csv = dir.join("sweep.csv");
        let c = path_str(&cfg);
        for args in [
            vec!["generate", "--config", c, "--seed", "7", "--out", path_str(&data)],
            vec![
                "train-denoise",
                "--config",
                c,
                "--seed",
                "7",
                "--input",
                path_str(&data),
                "--out",
                path_str(&den),
            ],
            vec![
                "train-classify",
                "--config",
                c,
                "--seed",
                "7",
                "--input",
                path_str(&data),
                "--denoiser",
                path_str(&den),
                "--out",
                path_str(&cls),
            ],
            vec![
                "sweep",
                "--config",
                c,
                "--seed",
                "7",
                "--reproducible",
                "--denoiser",
                path_str(&den),
                "--classifier",
                path_str(&cls),
                "--out",
                path_str(&csv),
            ],
        ] {
            let o = run(&args);
            assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        }
        trees.push((read_tree(&data), read_tree(&dir)));
    }
    assert_eq!(trees[0].0, trees[1].0, "dataset files differ");
    assert_eq!(trees[0].1, trees[1].1, "model or sweep files differ");
}

#[test]
fn sweep_happy_path_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("mle.json");
    fs::write(
        &cfg,
        r#"{"kind": "awgn-denoise", "methods": ["mle"], "ebno_grid_db": [0, 4, 8], "trials": 5}"#,
    )
    .unwrap();
    let csv = tmp.path().join("out.csv");
    let o = run(&["sweep", "--config", path_str(&cfg), "--out", path_str(&csv)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,ebno_db,bits,errors,ber,seed,wall_ms"));
    assert_eq!(lines.count(), 3);
    let meta = fs::read_to_string(tmp.path().join("out.csv.meta.json")).unwrap();
    assert!(meta.contains("config_hash") && meta.contains("git_revision"));
}

#[test]
fn transmit_channel_receive_recovers_bits() {
    let tmp = tempfile::tempdir().unwrap();
    let tx = tmp.path().join("tx.f32");
    let rx = tmp.path().join("rx.f32");
    let o = run(&["transmit", "--seed", "3", "--out", path_str(&tx)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&[
        "channel",
        "--seed",
        "3",
        "--channel-spec",
        "awgn",
        "--ebno",
        "30",
        "--input",
        path_str(&tx),
        "--out",
        path_str(&rx),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["receive", "--input", path_str(&rx)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let sent: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("tx.f32.bits.json")).unwrap()).unwrap();
    let expected = format!("{}:{}", sent["n_bits"], sent["bits_hex"].as_str().unwrap());
    assert_eq!(report["report"]["bits"].as_str(), Some(expected.as_str()));
    assert!(report["artifact"]["config_hash"].is_string());
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sdmimo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdmimo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn sdmimo_threads(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdmimo"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const SMALL: &str =
    "n_receive = 32\nn_transmit = 4\nmethods = [\"UQ\", \"SD\"]\ngrid_points = 512\n";

#[test]
fn verify_passes_and_lists_every_check() {
    let out = sdmimo(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 10);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn verify_catches_injected_fault() {
    let out = sdmimo(&["verify", "--inject-fault"]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("FAIL pilot exactness"), "{text}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(sdmimo(&[]).status.code(), Some(2));
    assert_eq!(sdmimo(&["nmse", "--bogus"]).status.code(), Some(2));
    assert_eq!(sdmimo(&["nmse", "--trials", "many"]).status.code(), Some(2));
    assert_eq!(sdmimo(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(sdmimo(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_errors_exit_two_with_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "zero.toml",
            "n_trials = 5\nn_receive = 0\n",
            "n_receive (line 2)",
        ),
        ("unknown.toml", "n_trails = 5\n", "n_trails"),
        ("syntax.toml", "n_trials = [\n", "line"),
        ("type.toml", "spacing_ratio = \"wide\"\n", "spacing_ratio"),
    ];
    for (name, text, needle) in cases {
        let path = write_config(dir.path(), name, text);
        let out = sdmimo(&["nmse", "--config", &path]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(stderr(&out).contains(needle), "{name}: {}", stderr(&out));
    }
    let out = sdmimo(&["nmse", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/run.toml"));
}

#[test]
fn nmse_two_methods_three_snrs_gives_six_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = sdmimo(&[
        "nmse", "--config", &cfg, "--snr-db", "5,-5,0", "--trials", "4", "--seed", "9",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,snr_db,nmse,stderr,n_trials");
    assert_eq!(lines.len(), 7);
    let keys: Vec<(&str, &str)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f[4], "4");
            let v: f64 = f[2].parse().unwrap();
            assert!(v >= 0.0);
            (f[0], f[1])
        })
        .collect();
    assert_eq!(
        keys,
        [
            ("SD", "-5.0"),
            ("SD", "0.0"),
            ("SD", "5.0"),
            ("UQ", "-5.0"),
            ("UQ", "0.0"),
            ("UQ", "5.0")
        ]
    );
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let mut files = Vec::new();
    for (k, threads) in ["1", "1", "3"].iter().enumerate() {
        let path = dir.path().join(format!("run{k}.csv"));
        let out = sdmimo_threads(
            &[
                "nmse",
                "--config",
                &cfg,
                "--trials",
                "6",
                "--out",
                path.to_str().unwrap(),
            ],
            threads,
        );
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        files.push(fs::read(&path).unwrap());
    }
    assert!(!files[0].is_empty());
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);

    let seeded = dir.path().join("other.csv");
    sdmimo(&[
        "nmse",
        "--config",
        &cfg,
        "--trials",
        "6",
        "--seed",
        "77",
        "--out",
        seeded.to_str().unwrap(),
    ]);
    assert_ne!(fs::read(&seeded).unwrap(), files[0]);
}

#[test]
fn correlation_writes_one_row_per_antenna() {
    let out = sdmimo(&["correlation", "--draws", "200"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "antenna_index,corr_sd,corr_onebit,n_draws");
    assert_eq!(lines.len(), 129);
    for (i, line) in lines[1..].iter().enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], (i + 1).to_string());
        assert_eq!(f[3], "200");
    }

    let a = sdmimo_threads(&["correlation", "--draws", "300", "--snr-db", "-5"], "1");
    let b = sdmimo_threads(&["correlation", "--draws", "300", "--snr-db", "-5"], "4");
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn correlation_rejects_multiple_snrs_and_mismatched_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "snr_db_list = [-5.0, 0.0]\n");
    let out = sdmimo(&["correlation", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("snr_db_list (line 1)"));

    let cfg = write_config(dir.path(), "d.toml", "experiment = \"nmse_sweep\"\n");
    let out = sdmimo(&["correlation", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("experiment (line 1)"));

    let out = sdmimo(&["correlation", "--draws", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_output_carries_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "j.toml",
        &format!("{SMALL}output_format = \"json\"\nsnr_db_list = [0.0]\nn_trials = 3\n"),
    );
    let out = sdmimo(&["nmse", "--config", &cfg, "--seed", "12"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["base_seed"], 12);
    assert_eq!(v["config"]["n_receive"], 32);
    assert_eq!(v["config"]["n_trials"], 3);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["rows"][0]["method"], "SD");
}

#[test]
fn unwritable_output_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let target = dir.path().join("missing").join("out.csv");
    let out = sdmimo(&[
        "nmse",
        "--config",
        &cfg,
        "--trials",
        "1",
        "--snr-db",
        "0",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing"), "{}", stderr(&out));
}

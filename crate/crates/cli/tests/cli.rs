use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn trajldp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajldp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn generate(path: &Path, size: usize) {
    let out = trajldp(&[
        "generate",
        "--output",
        path.to_str().unwrap(),
        "--size",
        &size.to_string(),
        "--seed",
        "3",
    ]);
    stdout(&out);
}

#[test]
fn generate_writes_requested_size() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.txt");
    generate(&path, 250);
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 250);
    assert!(text.lines().all(|l| l.starts_with('g') && l.contains(';')));
}

#[test]
fn gridsize_reports_truncated_value() {
    let out = trajldp(&[
        "gridsize",
        "--trajectories",
        "1000000",
        "--avg-points",
        "30",
        "--epsilon",
        "1",
    ]);
    let text = stdout(&out);
    let value: f64 = text
        .split_whitespace()
        .find_map(|f| f.strip_prefix("value="))
        .unwrap()
        .parse()
        .unwrap();
    let grid: u32 = text
        .split_whitespace()
        .find_map(|f| f.strip_prefix("grid="))
        .unwrap()
        .parse()
        .unwrap();
    // 2.5 * (1e6 * 30 * (e^(1/30) - 1)^2 / e^(1/30))^(1/4)
    let x: f64 = 1.0 / 30.0;
    let expected = 2.5 * (1e6 * 30.0 * (x.exp() - 1.0).powi(2) / x.exp()).powf(0.25);
    assert!((value - expected).abs() < 1e-5, "{value} vs {expected}");
    assert_eq!(grid, expected.floor() as u32);
}

#[test]
fn gridsize_needs_a_source() {
    assert!(!trajldp(&["gridsize"]).status.success());
}

#[test]
fn synthesize_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    generate(&corpus, 600);
    let config = dir.path().join("run.conf");
    let out_dir = dir.path().join("out");
    fs::write(
        &config,
        format!(
            "# run\ninput = {}\noutput = {}\nepsilon = 0.5\ngrid = 4\nattacks = false\n",
            corpus.display(),
            out_dir.display()
        ),
    )
    .unwrap();
    let out = trajldp(&[
        "synthesize",
        "--config",
        config.to_str().unwrap(),
        "--epsilon",
        "2",
        "--repetitions",
        "2",
    ]);
    let text = stdout(&out);
    assert!(text.contains("grid=4\n"));
    assert!(text.contains("epsilon=2\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("summary ")).count(), 9);
    let written = fs::read_to_string(out_dir.join("config.txt")).unwrap();
    assert!(written.contains("epsilon = 2\n"));
    assert!(written.contains("repetitions = 2\n"));
    assert!(out_dir.join("synthetic-1.txt").exists());
    assert!(!out_dir.join("attacks.txt").exists());
}

#[test]
fn synthesize_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    generate(&corpus, 400);
    let run = |threads: &str, name: &str| {
        let out_dir = dir.path().join(name);
        let out = trajldp(&[
            "--threads",
            threads,
            "synthesize",
            "--input",
            corpus.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
            "--attack-targets",
            "30",
            "--seed",
            "9",
        ]);
        (stdout(&out), fs::read(out_dir.join("synthetic-0.txt")).unwrap())
    };
    assert_eq!(run("1", "a"), run("2", "b"));
}

#[test]
fn zero_budget_fails() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    generate(&corpus, 50);
    let out = trajldp(&["synthesize", "--input", corpus.to_str().unwrap(), "--epsilon", "0"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}

#[test]
fn malformed_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    fs::write(&config, "epsilon = 1\n\nk 0.5\n").unwrap();
    let out = trajldp(&["synthesize", "--config", config.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("3"));
}

#[test]
fn evaluate_corpus_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    generate(&corpus, 300);
    let c = corpus.to_str().unwrap();
    let text = stdout(&trajldp(&["evaluate", "--real", c, "--synthetic", c, "--record"]));
    let fields: Vec<(&str, f64)> = text
        .split_whitespace()
        .map(|f| {
            let (k, v) = f.split_once('=').unwrap();
            (k, v.parse().unwrap())
        })
        .collect();
    assert_eq!(fields.len(), 9);
    for (k, v) in fields {
        let expected = if k == "kendall_tau" || k == "pattern_f1" {
            1.0
        } else {
            0.0
        };
        assert_eq!(v, expected, "{k}");
    }
}

#[test]
fn attack_prints_both_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let real = dir.path().join("real.txt");
    let syn = dir.path().join("syn.txt");
    generate(&real, 300);
    let out = trajldp(&[
        "generate",
        "--output",
        syn.to_str().unwrap(),
        "--size",
        "300",
        "--seed",
        "4",
    ]);
    stdout(&out);
    let text = stdout(&trajldp(&[
        "attack",
        "--real",
        real.to_str().unwrap(),
        "--synthetic",
        syn.to_str().unwrap(),
        "--attack-targets",
        "50",
    ]));
    for name in ["reidentification", "outlier"] {
        let values: Vec<f64> = text
            .lines()
            .filter(|l| l.starts_with(&format!("attack={name} kappa=")))
            .map(|l| l.rsplit_once('=').unwrap().1.parse().unwrap())
            .collect();
        assert_eq!(values.len(), 9);
        assert!(values.windows(2).all(|w| w[1] <= w[0]));
        assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

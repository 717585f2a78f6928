use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CANONICAL: &str = r#"
schema = 1
seed = 11
mean = "geometric"
potential = "zero"
h = 2.0
x0 = [0.3, 0.7]
dt = 1e-3
t_end = 0.2
paths = 200

[network]
rates = [[1.0], [1.0]]

[sde]
bins = 10

[fp]
grid = 50
"#;

const THREE_SPECIES: &str = r#"
schema = 1
seed = 5
h = 0.05
x0 = [0.6, 0.3, 0.1]
dt = 1e-3
t_end = 0.1
paths = 20

[network]
rates = [[1.0, 2.0], [2.0, 1.0], [1.0, 0.25]]

[ssa]
n = 50

[cme]
n = 10
"#;

fn simplexdiff(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simplexdiff"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("SIMPLEXDIFF_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn sde_emits_trajectory_and_histogram_with_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "two_point_canonical.toml", CANONICAL);
    let out = simplexdiff(&["sde", "--config", &cfg], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let hash = simplexdiff::harness::config::sha256_hex(CANONICAL.as_bytes());
    for name in ["sde_trajectory.csv", "sde_histogram.csv"] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(
            first,
            format!("# simplexdiff sde schema=1 config_sha256={hash} seed=11")
        );
    }
    let hist = fs::read_to_string(dir.path().join("sde_histogram.csv")).unwrap();
    assert!(hist
        .lines()
        .any(|l| l == "bin_left,bin_right,count,frequency"));
    let counts: u64 = hist
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("bin"))
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap() as u64)
        .sum();
    assert_eq!(counts, 200);
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = write_config(a.path(), "c.toml", THREE_SPECIES);
    for cmd in ["ssa", "sde"] {
        assert_eq!(code(&simplexdiff(&[cmd, "--config", &cfg], a.path())), 0);
        assert_eq!(
            code(&simplexdiff(
                &[cmd, "--config", &cfg, "--threads", "1"],
                b.path()
            )),
            0
        );
    }
    for name in [
        "ssa_trajectory.csv",
        "ssa_mean.csv",
        "sde_trajectory.csv",
        "sde_histogram.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let c = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&simplexdiff(
            &["sde", "--config", &cfg, "--seed", "6"],
            c.path()
        )),
        0
    );
    assert_ne!(
        fs::read(a.path().join("sde_trajectory.csv")).unwrap(),
        fs::read(c.path().join("sde_trajectory.csv")).unwrap()
    );
}

#[test]
fn every_subcommand_runs() {
    let dir = tempfile::tempdir().unwrap();
    let three = write_config(dir.path(), "three.toml", THREE_SPECIES);
    let two = write_config(dir.path(), "two.toml", CANONICAL);
    for (cmd, cfg, file) in [
        ("ssa", &three, "ssa_trajectory.csv"),
        ("cme", &three, "cme.csv"),
        ("ode", &three, "ode.csv"),
        ("fp", &two, "fp.csv"),
        ("green", &two, "green.csv"),
        ("wf", &two, "wf_pushforward.csv"),
    ] {
        let out = simplexdiff(&[cmd, "--config", cfg], dir.path());
        assert_eq!(
            code(&out),
            0,
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(dir.path().join(file).exists(), "{cmd}");
    }
    let cme = fs::read_to_string(dir.path().join("cme.csv")).unwrap();
    let mass: f64 = cme
        .lines()
        .skip(2)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((mass - 1.0).abs() < 1e-12);
}

#[test]
fn compare_exit_status_follows_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", CANONICAL);
    assert_eq!(
        code(&simplexdiff(
            &["sde", "--config", &cfg, "--t-end", "1"],
            dir.path()
        )),
        0
    );
    assert_eq!(
        code(&simplexdiff(
            &["fp", "--config", &cfg, "--t-end", "1"],
            dir.path()
        )),
        0
    );
    let hist = dir.path().join("sde_histogram.csv");
    let fp = dir.path().join("fp.csv");
    let (hist, fp) = (hist.to_str().unwrap(), fp.to_str().unwrap());
    let out = simplexdiff(
        &[
            "compare",
            "--samples",
            hist,
            "--density",
            fp,
            "--threshold",
            "0.5",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert!(report.contains("\nl1,") && report.contains("passed,1.0"));
    let out = simplexdiff(
        &[
            "compare",
            "--samples",
            hist,
            "--density",
            fp,
            "--threshold",
            "1e-6",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn geometry_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = simplexdiff(
        &["geometry-check", "--d", "4", "--samples", "20"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let text = fs::read_to_string(dir.path().join("geometry_check.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| l.ends_with(",1.0")).count(), 20);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(
        dir.path(),
        "u.toml",
        &format!("{CANONICAL}\n[extra]\nkey = 1\n"),
    );
    let schema = write_config(
        dir.path(),
        "s.toml",
        &CANONICAL.replace("schema = 1", "schema = 9"),
    );
    let unbalanced = write_config(dir.path(), "b.toml", &THREE_SPECIES.replace("0.25", "0.5"));
    for args in [
        vec!["sde", "--config", &unknown],
        vec!["sde", "--config", &schema],
        vec!["ssa", "--config", &unbalanced],
        vec!["sde"],
        vec!["sde", "--config", "/nonexistent.toml"],
        vec!["frobnicate"],
    ] {
        let out = simplexdiff(&args, dir.path());
        assert_eq!(
            code(&out),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn numerical_failures_exit_3_with_error_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &CANONICAL.replace("grid = 50", "grid = 50\ndt = 0.1"),
    );
    let out = simplexdiff(&["fp", "--config", &cfg], dir.path());
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("UnstableTimestep"));
}

#[test]
fn json_configs_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let config: toml::Value = toml::from_str(THREE_SPECIES).unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &serde_json::to_string(&config).unwrap(),
    );
    let out = simplexdiff(&["ode", "--config", &cfg], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", THREE_SPECIES);
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_simplexdiff"))
            .args(["ssa", "--config", &cfg, "--out"])
            .arg(dir.path())
            .env("SIMPLEXDIFF_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("2")), 0);
    assert_eq!(code(&run("0")), 2);
}

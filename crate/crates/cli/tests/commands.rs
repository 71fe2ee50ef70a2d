use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tdvar_cli::io::{read_rows, Cell, MetricsRow};
use tempfile::TempDir;

fn tdvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdvar")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = tdvar(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

/// Exit code and the `error:` line of a failing run.
fn fails(args: &[&str]) -> (i32, String) {
    let out = tdvar(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8_lossy(&out.stderr).trim().to_string();
    assert!(err.starts_with("error: category="), "unparsable error: {err}");
    assert_eq!(err.lines().count(), 1);
    (out.status.code().unwrap(), err)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    /// Simulates a small four-variable panel into `sim/`.
    fn simulate(&self, subjects: usize) -> PathBuf {
        let cfg =
            self.config("sim.cfg", &format!("scenario = block\nk = 4\nl_true = 2\nsubjects = {subjects}\nlength = 60\nholdout = 10\n"));
        let out = self.path("sim");
        ok(&["simulate", "--config", s(&cfg), "--seed", "3", "--out", s(&out)]);
        out
    }

    /// A short fit of the simulated panel; `extra` lines replace base keys.
    fn fit_config(&self, name: &str, data: &Path, extra: &str) -> PathBuf {
        let base = format!(
            "data_dir = {}\nholdout = 10\nlags = 3\nrank1 = 3\nrank2 = 3\nrank3 = 2\niterations = 120\nburn_in = 60\nthin = 2\nprune_window = 20\n",
            data.display()
        );
        let overridden: Vec<&str> = extra.lines().filter_map(|l| l.split('=').next()).map(str::trim).collect();
        let mut text: String =
            base.lines().filter(|l| !overridden.contains(&l.split('=').next().unwrap().trim())).map(|l| format!("{l}\n")).collect();
        text.push_str(extra);
        self.config(name, &text)
    }
}

fn same_files(a: &Path, b: &Path, names: &[&str]) {
    for n in names {
        let (x, y) = (fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap());
        assert!(x == y, "{n} differs between {} and {}", a.display(), b.display());
    }
}

const FIT_FILES: &[&str] = &[
    "checkpoint.bin",
    "posterior_fixed.csv",
    "posterior_subject_001.csv",
    "posterior_subject_002.csv",
    "intercepts.csv",
    "lags.csv",
    "ranks.csv",
    "diagnostics.csv",
];

#[test]
fn simulate_is_reproducible_from_the_seed() {
    let run = Run::new();
    let first = run.simulate(2);
    let cfg = run.path("sim.cfg");
    let again = run.path("again");
    ok(&["simulate", "--config", s(&cfg), "--seed", "3", "--out", s(&again)]);
    same_files(&first, &again, &["data/subject_001.csv", "data/subject_002.csv", "truth_params.csv", "truth_network.csv", "manifest.txt"]);
    let manifest = fs::read_to_string(first.join("manifest.txt")).unwrap();
    assert!(manifest.contains("# command = simulate") && manifest.contains("seed = 3") && manifest.contains("prune_window = 50"));

    let single = run.path("single");
    let one = run.config("one.cfg", "k = 4\nl_true = 2\nsubjects = 1\nlength = 60\nholdout = 10\n");
    ok(&["simulate", "--config", s(&one), "--out", s(&single)]);
    assert_eq!(fs::read_dir(single.join("data")).unwrap().count(), 1);
}

#[test]
fn fit_gc_and_metrics_pipeline() {
    let run = Run::new();
    let sim = run.simulate(2);
    let cfg = run.fit_config("fit.cfg", &sim.join("data"), "chains = 2\n");
    let fit = run.path("fit");
    ok(&["fit", "--config", s(&cfg), "--seed", "11", "--out", s(&fit)]);
    for f in FIT_FILES {
        assert!(fit.join(f).exists(), "missing {f}");
    }
    let lags = fs::read_to_string(fit.join("lags.csv")).unwrap();
    assert_eq!(lags.lines().count(), 4);

    let rerun = run.path("rerun");
    ok(&["fit", "--config", s(&fit.join("manifest.txt")), "--out", s(&rerun)]);
    same_files(&fit, &rerun, FIT_FILES);

    let gc_cfg = run.config("gc.cfg", &format!("fit_dir = {}\nc = 1\n", fit.display()));
    let gc = run.path("gc");
    ok(&["gc", "--config", s(&gc_cfg), "--out", s(&gc)]);
    let manifest = fs::read_to_string(gc.join("manifest.txt")).unwrap();
    assert!(manifest.contains("# t_star = 0.5"), "{manifest}");
    for label in ["fixed", "subject_001", "subject_002"] {
        for f in [format!("network_{label}.csv"), format!("network_{label}_lags.csv"), format!("network_{label}.dot")] {
            assert!(gc.join(&f).exists(), "missing {f}");
        }
    }
    let dot = fs::read_to_string(gc.join("network_fixed.dot")).unwrap();
    assert!(dot.starts_with("digraph \"fixed\"") && dot.contains("[label=\"y1\"]"));

    let m_cfg = run.config(
        "metrics.cfg",
        &format!("fit_dir = {}\ntruth_dir = {}\ndata_dir = {}\n", fit.display(), sim.display(), sim.join("data").display()),
    );
    let metrics = run.path("metrics");
    ok(&["metrics", "--config", s(&m_cfg), "--out", s(&metrics)]);
    let rows: Vec<MetricsRow> = read_rows(&metrics.join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].method, "BPTDVAR");
    assert!(matches!(rows[0].tpr, Cell::Value(v) if (0.0..=100.0).contains(&v)));
    assert_eq!(rows[1].method, "OLS");
    assert!(matches!(rows[1].r2_in, Cell::Value(_)));
    assert_eq!(rows[1].tpr, Cell::NotApplicable);
}

#[test]
fn resumed_fit_matches_uninterrupted_fit() {
    let run = Run::new();
    let sim = run.simulate(2);
    let whole_cfg = run.fit_config("whole.cfg", &sim.join("data"), "");
    let whole = run.path("whole");
    ok(&["fit", "--config", s(&whole_cfg), "--out", s(&whole)]);

    let part_cfg = run.fit_config("part.cfg", &sim.join("data"), "halt_at = 57\n");
    let part = run.path("part");
    ok(&["fit", "--config", s(&part_cfg), "--out", s(&part)]);
    assert!(fs::read_to_string(part.join("manifest.txt")).unwrap().contains("# status = halted at iteration 57"));
    assert!(!part.join("posterior_fixed.csv").exists());

    let gc_cfg = run.config("gc.cfg", &format!("fit_dir = {}\n", part.display()));
    let (code, err) = fails(&["gc", "--config", s(&gc_cfg), "--out", s(&run.path("gc"))]);
    assert!(err.starts_with("error: category=checkpoint") && code == 7, "{err}");

    let resumed = run.path("resumed");
    ok(&["fit", "--config", s(&whole_cfg), "--resume", s(&part.join("checkpoint.bin")), "--out", s(&resumed)]);
    same_files(&whole, &resumed, FIT_FILES);

    let other = run.fit_config("other.cfg", &sim.join("data"), "thin = 3\n");
    let (_, err) = fails(&["fit", "--config", s(&other), "--resume", s(&part.join("checkpoint.bin")), "--out", s(&run.path("x"))]);
    assert!(err.starts_with("error: category=checkpoint"), "{err}");
}

#[test]
fn invalid_input_fails_before_any_compute() {
    let run = Run::new();
    let sim = run.simulate(1);
    let out = run.path("fit");

    let short = run.fit_config("short.cfg", &sim.join("data"), "lags = 50\n");
    let (code, err) = fails(&["fit", "--config", s(&short), "--out", s(&out)]);
    assert!(err.starts_with("error: category=config") && err.contains("must exceed lags") && code == 3, "{err}");
    assert!(!out.exists());

    let unknown = run.config("bad.cfg", "lag = 3\n");
    let (_, err) = fails(&["fit", "--config", s(&unknown), "--out", s(&out)]);
    assert!(err.contains("unknown key `lag`"), "{err}");

    let no_data = run.config("nodata.cfg", "lags = 2\n");
    let (_, err) = fails(&["fit", "--config", s(&no_data), "--out", s(&out)]);
    assert!(err.starts_with("error: category=config") && err.contains("data_dir"), "{err}");

    let (code, err) = fails(&["gc", "--out", s(&out), "--resume", "x.bin"]);
    assert!(err.starts_with("error: category=usage") && code == 2, "{err}");

    let (code, _) = fails(&["fit"]);
    assert_eq!(code, 2);

    let odd = run.config("odd.cfg", "k = 5\n");
    let (_, err) = fails(&["simulate", "--config", s(&odd), "--out", s(&out)]);
    assert!(err.contains("even k"), "{err}");
}

#[test]
fn least_squares_is_not_computable_when_regressors_outnumber_rows() {
    let run = Run::new();
    let sim_cfg = run.config("sim.cfg", "scenario = network\nk = 50\nl_true = 2\nsubjects = 1\nlength = 200\nholdout = 50\n");
    let sim = run.path("sim");
    ok(&["simulate", "--config", s(&sim_cfg), "--seed", "1", "--out", s(&sim)]);
    let fit_cfg = run.config(
        "fit.cfg",
        &format!(
            "data_dir = {}\nholdout = 50\nlags = 6\nrank1 = 3\nrank2 = 3\nrank3 = 2\niterations = 12\nburn_in = 6\nthin = 1\n",
            sim.join("data").display()
        ),
    );
    let fit = run.path("fit");
    ok(&["fit", "--config", s(&fit_cfg), "--out", s(&fit)]);
    let m_cfg = run.config(
        "metrics.cfg",
        &format!("fit_dir = {}\ntruth_dir = {}\ndata_dir = {}\n", fit.display(), sim.display(), sim.join("data").display()),
    );
    let metrics = run.path("metrics");
    ok(&["metrics", "--config", s(&m_cfg), "--out", s(&metrics)]);
    let rows: Vec<MetricsRow> = read_rows(&metrics.join("metrics.csv")).unwrap();
    assert_eq!(rows[0].method, "BTDVAR");
    assert_eq!((rows[1].r2_in, rows[1].r2_out), (Cell::NotComputable, Cell::NotComputable));
}

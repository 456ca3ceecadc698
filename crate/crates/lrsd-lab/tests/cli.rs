use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lrsd-lab"));
    c.env_remove("LRSD_LAB_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{stdout}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    stdout
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn cluster_config(dir: &Path) -> PathBuf {
    write_config(dir, "cluster.json", r#"{"L": 16, "model": "clifford-cluster", "seed": 11, "n_traj": 10}"#)
}

#[test]
fn sweep_writes_points_and_resumes() {
    let tmp = TempDir::new().unwrap();
    let cfg = cluster_config(tmp.path());
    let args = ["sweep", "--config", cfg.to_str().unwrap(), "--out", "runs", "--grid", "L=16", "--grid", "p_m=0.2,0.3"];
    let first = ok(&run(tmp.path(), &args));
    assert!(first.contains("2 computed, 0 reused"), "{first}");
    let runs = tmp.path().join("runs");
    for f in ["point-0000.csv", "point-0001.csv", "point-0000.summary.json", "point-0001.summary.json", "manifest.json"] {
        assert!(runs.join(f).is_file(), "missing {f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(runs.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["points"].as_array().unwrap().len(), 2);

    let second = ok(&run(tmp.path(), &args));
    assert!(second.contains("0 computed, 2 reused"), "{second}");

    // Truncating one file forces only that point to rerun.
    let p1 = runs.join("point-0001.csv");
    let original = std::fs::read(&p1).unwrap();
    std::fs::write(&p1, &original[..original.len() / 2]).unwrap();
    let third = ok(&run(tmp.path(), &args));
    assert!(third.contains("point 0: complete, skipped"), "{third}");
    assert!(third.contains("point 1: computed"), "{third}");
    assert_eq!(std::fs::read(&p1).unwrap(), original);
}

#[test]
fn output_is_byte_identical_across_threads() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "purif.json",
        r#"{"L": 6, "model": "x-basis-purification", "eta": 2.0, "p_m": 0.3, "seed": 5, "n_traj": 6}"#,
    );
    let c = cfg.to_str().unwrap();
    ok(&run(tmp.path(), &["simulate", "--config", c, "--out", "a", "--threads", "1"]));
    ok(&run(tmp.path(), &["simulate", "--config", c, "--out", "b", "--threads", "3"]));
    ok(&bin().current_dir(tmp.path()).env("LRSD_LAB_THREADS", "2").args(["simulate", "--config", c, "--out", "c"]).output().unwrap());
    let read = |d: &str, f: &str| std::fs::read(tmp.path().join(d).join(f)).unwrap();
    for f in ["run.csv", "run.summary.json"] {
        assert_eq!(read("a", f), read("b", f), "{f} differs between 1 and 3 threads");
        assert_eq!(read("a", f), read("c", f), "{f} differs with env thread count");
    }
}

#[test]
fn seed_override_changes_the_hash() {
    let tmp = TempDir::new().unwrap();
    let cfg = cluster_config(tmp.path());
    let c = cfg.to_str().unwrap();
    ok(&run(tmp.path(), &["simulate", "--config", c, "--out", "a"]));
    ok(&run(tmp.path(), &["simulate", "--config", c, "--out", "b", "--seed", "12"]));
    let header = |d: &str| std::fs::read_to_string(tmp.path().join(d).join("run.csv")).unwrap().lines().next().unwrap().to_string();
    assert!(header("a").starts_with("# lrsd-lab records v1 hash="));
    assert_ne!(header("a"), header("b"));
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["simulate", "--threads", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(tmp.path(), &["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(tmp.path(), &["simulate"]);
    assert_eq!(out.status.code(), Some(2), "missing --config");
    let cfg = cluster_config(tmp.path());
    let out = run(tmp.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--grid", "p_m=0.1"]);
    assert_eq!(out.status.code(), Some(2), "--grid outside sweep");
    let bad = write_config(tmp.path(), "bad.json", r#"{"L": 8, "model": "clifford-cluster", "bogus": 1}"#);
    let out = run(tmp.path(), &["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn plot_rejects_empty_and_foreign_input() {
    let tmp = TempDir::new().unwrap();
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = run(tmp.path(), &["plot", "--kind", "decay", "empty"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"), "{}", String::from_utf8_lossy(&out.stderr));

    std::fs::write(tmp.path().join("foreign.csv"), "a,b\n1,2\n").unwrap();
    let out = run(tmp.path(), &["plot", "--kind", "decay", "foreign.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn plot_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "purif.json",
        r#"{"L": 6, "model": "x-basis-purification", "p_m": 0.2, "seed": 3, "n_traj": 20}"#,
    );
    ok(&run(tmp.path(), &["purification", "--config", cfg.to_str().unwrap(), "--out", "run"]));
    ok(&run(tmp.path(), &["plot", "--kind", "decay", "--out", "a.svg", "run"]));
    ok(&run(tmp.path(), &["plot", "--kind", "decay", "--out", "b.svg", "run/run.csv"]));
    let a = std::fs::read_to_string(tmp.path().join("a.svg")).unwrap();
    assert!(a.starts_with("<svg") || a.starts_with("<?xml"));
    assert!(a.contains("data-sha256:"));
    assert_eq!(a, std::fs::read_to_string(tmp.path().join("b.svg")).unwrap());
}

#[test]
fn verify_fast_passes_and_fault_fails() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["verify", "--level", "fast"]);
    let text = ok(&out);
    assert!(text.contains("0 failed"), "{text}");

    let out = run(tmp.path(), &["verify", "--level", "fast", "--inject-fault", "cz-sign"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("FAIL oracle")), "{text}");
}

#[test]
fn checkpoints_and_side_outputs() {
    let tmp = TempDir::new().unwrap();
    let z = write_config(
        tmp.path(),
        "z.json",
        r#"{"L": 8, "model": "z-basis-magic", "eta": 1.0, "beta": 0.0, "p_m": 0.3, "seed": 2, "n_traj": 2}"#,
    );
    ok(&run(tmp.path(), &["simulate", "--config", z.to_str().unwrap(), "--out", "s", "--checkpoint"]));
    let state: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("s/state-0.json")).unwrap()).unwrap();
    assert_eq!(state["format"], "lrsd-tableau-v1");

    ok(&run(tmp.path(), &["magic", "--config", z.to_str().unwrap(), "--out", "m", "--dump-samples"]));
    let samples = std::fs::read_to_string(tmp.path().join("m/bell-samples.txt")).unwrap();
    assert_eq!(samples.lines().count(), 16);
    assert!(samples.lines().all(|l| l.split(':').count() == 2));

    let x = write_config(
        tmp.path(),
        "x.json",
        r#"{"L": 6, "model": "x-basis-purification", "eta": 2.0, "p_m": 0.3, "seed": 2, "n_traj": 1}"#,
    );
    ok(&run(tmp.path(), &["simulate", "--config", x.to_str().unwrap(), "--out", "x", "--checkpoint"]));
    let state: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("x/state-0.json")).unwrap()).unwrap();
    assert_eq!(state["format"], "lrsd-state-v1");

    let c = cluster_config(tmp.path());
    ok(&run(tmp.path(), &["cluster", "--config", c.to_str().unwrap(), "--out", "c", "--edges", "--entropy"]));
    let edges = std::fs::read_to_string(tmp.path().join("c/graph-0.edges")).unwrap();
    let mut lines = edges.lines();
    assert_eq!(lines.next(), Some("16"));
    for line in lines {
        let v: Vec<usize> = line.split_whitespace().map(|t| t.parse().unwrap()).collect();
        assert_eq!(v.len(), 2, "{line}");
        assert!(v[0] < 16 && v[1] < 16);
    }
}

#[test]
fn fit_and_collapse_write_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = cluster_config(tmp.path());
    let c = cfg.to_str().unwrap();
    ok(&run(tmp.path(), &["sweep", "--config", c, "--out", "runs", "--grid", "L=8,12,16", "--grid", "p_m=0.4,0.6,0.8,0.9"]));
    let text = ok(&run(tmp.path(), &["fit", "--kind", "crossing", "--observable", "n-max", "--rescale", "1", "--out", "fit", "runs"]));
    assert!(text.contains("crossing p_m"), "{text}");
    assert!(tmp.path().join("fit/fits.csv").is_file());
    assert!(tmp.path().join("fit/fits.json").is_file());
    ok(&run(
        tmp.path(),
        &["collapse", "--observable", "n-max", "--y-exp", "0.5,1.0", "--x-c", "0.5,0.8", "--out", "col", "runs"],
    ));
    let col: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("col/collapse.json")).unwrap()).unwrap();
    assert!(col["quality"].as_f64().unwrap().is_finite());
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn noether(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_noether"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

const SMALL_SOLVE: &str = r#"
[domain]
model = "flat"
x = [-1.0, 1.0]
y = [-1.0, 1.0]
resolution = 24

[problem]
kind = "p-dirichlet"
preset = "smooth"
p = 3.0

[solver]
tolerance = 1e-9

[output]
dumps = ["solution", "current", "stress"]
"#;

#[test]
fn passing_run_exits_zero_and_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL_SOLVE);
    let out = tmp.path().join("out");
    let o = noether(&["currents", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["pass"], true);
    assert_eq!(r["command"], "currents");
    for what in ["solution", "current", "stress"] {
        let f = out.join(format!("small-{what}.csv"));
        assert!(f.exists(), "missing {}", f.display());
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = noether(&["solve", "--config", "/nonexistent/run.toml"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = noether(&["solve"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", &SMALL_SOLVE.replace("p = 3.0", "p = 3.0\nexponent = 3.0"));
    let o = noether(&["solve", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exponent"));
}

#[test]
fn unmet_tolerance_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL_SOLVE.replace("[solver]\ntolerance = 1e-9", "[solver]\ntolerance = 1e-9\nmax_iterations = 3");
    let cfg = write(tmp.path(), "short.toml", &body);
    let out = tmp.path().join("out");
    let o = noether(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&out)["pass"], false);
}

#[test]
fn non_integrable_stress_is_rejected_and_flips_the_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let shipped = std::fs::read_to_string(configs().join("reconstruct-perturbed.toml")).unwrap();
    let out = tmp.path().join("out");
    let ok = write(tmp.path(), "neg.toml", &shipped);
    let o = noether(&["reconstruct", "--config", ok.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));

    let expecting_success = write(tmp.path(), "pos.toml", &shipped.replace("expect_rejection = true", ""));
    let o = noether(&["reconstruct", "--config", expecting_success.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn json_is_deterministic_and_json_only_prints_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("monodromy-torus.toml");
    let runs: Vec<String> = (0..2)
        .map(|i| {
            let out = tmp.path().join(format!("o{i}"));
            let o = noether(
                &["monodromy", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--json-only"],
                &[],
            );
            assert_eq!(o.status.code(), Some(0));
            let stdout = String::from_utf8(o.stdout).unwrap();
            let file = std::fs::read_to_string(out.join("report.json")).unwrap();
            assert_eq!(stdout.trim_end(), file.trim_end());
            serde_json::from_str::<serde_json::Value>(&stdout).expect("stdout is pure JSON");
            file
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn thread_cap_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL_SOLVE);
    let run = |threads: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = noether(
            &["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
            &[("NOETHER_THREADS", threads)],
        );
        assert_eq!(o.status.code(), Some(0));
        std::fs::read_to_string(out.join("report.json")).unwrap()
    };
    assert_eq!(run("1", "a"), run("3", "b"));
    let o = noether(&["solve", "--config", cfg.to_str().unwrap()], &[("NOETHER_THREADS", "zero")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resolution_override_applies_to_convergence_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("reconstruct-hyperbolic.toml");
    let out = tmp.path().join("out");
    let o = noether(
        &["reconstruct", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--resolution-override", "17"],
        &[],
    );
    assert!(o.status.code().is_some());
    let r = report(&out);
    let names: Vec<&str> = r["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"n17-integrability") && names.contains(&"n34-integrability"), "{names:?}");
}

#[test]
fn tolerance_overrides_are_honoured() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{SMALL_SOLVE}\n[output.tolerances]\nel-residual = 0.0\n");
    let cfg = write(tmp.path(), "strict.toml", &body);
    let out = tmp.path().join("out");
    let o = noether(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&out);
    let c = r["checks"].as_array().unwrap().iter().find(|c| c["name"] == "el-residual").unwrap();
    assert_eq!(c["tolerance"], 0.0);
    assert_eq!(c["pass"], false);
}

#[test]
fn shipped_suite_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("all.toml");
    let o = noether(&["all", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    assert_eq!(r["runs"].as_array().unwrap().len(), 14);
}

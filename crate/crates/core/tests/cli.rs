use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_piston");

const CONSTANT: &str = "\
[gas]
gamma = 2
rho_inf = 0.6666666666666666
[piston]
type = constant
w0 = 1
";

const DECAYING: &str = "\
[gas]
gamma = 1.4
rho_inf = 1e-4
[piston]
type = decaying
w_a = 1
fraction = 0.5
[solver]
n_nodes = 30
t0 = 1
t_end = 3
[monitor]
narrow_points = 10
[oracle]
n_cells = 400
";

// Accelerates hard enough to steepen a compression into a second shock.
const STEEPENING: &str = "\
[gas]
gamma = 1.4
rho_inf = 1e-4
[piston]
type = tabulated
times = 0, 1.5, 2, 20
speeds = 1, 1, 3, 3
[solver]
n_nodes = 50
t0 = 1
t_end = 10
";

fn piston(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env_remove("PISTON_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str, run_id: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("{body}[output]\nrun_id = {run_id}\n")).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn steady_writes_worked_example() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.cfg", CONSTANT, "s");
    let out = piston(tmp.path(), &["--config", cfg.to_str().unwrap(), "--out", "o", "steady"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = json(&tmp.path().join("o/s/steady.json"));
    assert!((num(&doc["tau"]) - 2.0).abs() < 1e-12);
    assert!((num(&doc["rho0"]) - 4.0 / 3.0).abs() < 1e-12);
    assert!((num(&doc["s0"]) - 2.0).abs() < 1e-12);
    assert_eq!(doc["header"]["schema"], 1);
    let echo = fs::read_to_string(tmp.path().join("o/s/config.echo")).unwrap();
    assert!(echo.contains("[gas]"));
}

#[test]
fn out_env_overrides_flag() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.cfg", CONSTANT, "s");
    let out = Command::new(BIN)
        .current_dir(tmp.path())
        .env("PISTON_OUT", tmp.path().join("env"))
        .args(["--config", cfg.to_str().unwrap(), "--out", "flag", "steady"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("env/s/steady.json").exists());
    assert!(!tmp.path().join("flag").exists());
}

#[test]
fn usage_and_config_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(piston(tmp.path(), &["launch"]).status.code(), Some(1));
    assert_eq!(piston(tmp.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(piston(tmp.path(), &["--version"]).status.code(), Some(0));

    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "[gas]\ngamma = 3.5\ncolour = red\n").unwrap();
    let out = piston(tmp.path(), &["--config", bad.to_str().unwrap(), "steady"]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("γ∈(1,3)") && msg.contains("line 2"), "{msg}");
    assert!(msg.contains("colour") && msg.contains("rho_inf"), "{msg}");

    let missing = piston(tmp.path(), &["--config", "nowhere.cfg", "steady"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_two_with_partial_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.cfg", STEEPENING, "f");
    let out = piston(
        tmp.path(),
        &["--config", cfg.to_str().unwrap(), "--out", "o", "simulate"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let run = tmp.path().join("o/f");
    let failure = json(&run.join("failure.json"));
    assert!(failure["kind"].as_str().is_some());
    assert!(run.join("shock.csv").exists() && run.join("summary.json").exists());
    assert_eq!(json(&run.join("summary.json"))["completed"], false);
}

#[test]
fn simulate_is_deterministic_and_checkable() {
    let tmp = TempDir::new().unwrap();
    let a = write_config(tmp.path(), "a.cfg", DECAYING, "a");
    let b = write_config(tmp.path(), "b.cfg", DECAYING, "b");
    for cfg in [&a, &b] {
        let out = piston(
            tmp.path(),
            &[
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                "o",
                "--plots",
                "svg",
                "simulate",
            ],
        );
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for file in [
        "snapshots.csv",
        "shock.csv",
        "records.csv",
        "tracers.csv",
        "summary.json",
        "snapshot.svg",
    ] {
        let left = fs::read(tmp.path().join("o/a").join(file)).unwrap();
        let right = fs::read(tmp.path().join("o/b").join(file)).unwrap();
        assert!(left == right, "{file} differs between identical runs");
    }
    let header = fs::read_to_string(tmp.path().join("o/a/shock.csv")).unwrap();
    let mut lines = header.lines();
    assert!(lines.next().unwrap().starts_with("# piston-core"));
    assert_eq!(lines.next().unwrap(), "t,s,s_prime,k,k_g,a,b");

    let c = write_config(tmp.path(), "c.cfg", DECAYING, "c");
    let out = piston(
        tmp.path(),
        &["--config", c.to_str().unwrap(), "--out", "o", "check", "--run", "o/a"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let check = json(&tmp.path().join("o/c/check.json"));
    assert_eq!(check["hypothesis"]["all_pass"], true);
    assert_eq!(check["narrow"]["n_fail"], 0);
    assert!(num(&check["shock_identities"]["a_plus_b"]) <= 1e-14);
}

#[test]
fn oracle_and_compare_round_trip() {
    let tmp = TempDir::new().unwrap();
    let runs = [("m", "simulate"), ("r", "oracle")];
    for (id, cmd) in runs {
        let cfg = write_config(tmp.path(), &format!("{id}.cfg"), DECAYING, id);
        let out = piston(
            tmp.path(),
            &["--config", cfg.to_str().unwrap(), "--out", "o", "--format", "json", cmd],
        );
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", stderr(&out));
    }
    assert!(tmp.path().join("o/r/snapshots.json").exists());
    let cfg = write_config(tmp.path(), "x.cfg", DECAYING, "x");
    let out = piston(
        tmp.path(),
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "o",
            "compare",
            "--moc",
            "o/m",
            "--oracle",
            "o/r",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let cmp = json(&tmp.path().join("o/x/compare.json"));
    assert_eq!(cmp["comparison"]["tainted"], false);
    // 400 cells is coarse; the acceptance suite checks the 4000-cell run
    assert!(num(&cmp["comparison"]["max_rel_u"]) < 0.05);
    assert!(num(&cmp["comparison"]["shock_rel_end"]) < 0.01);
}

#[test]
fn sweep_fits_recompute_and_jobs_agree() {
    let tmp = TempDir::new().unwrap();
    let mut fits = Vec::new();
    for (id, jobs) in [("p", "2"), ("q", "1")] {
        let cfg = write_config(tmp.path(), &format!("{id}.cfg"), "", id);
        let out = piston(
            tmp.path(),
            &[
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                "o",
                "--jobs",
                jobs,
                "sweep-kg",
            ],
        );
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        fits.push(fs::read_to_string(tmp.path().join("o").join(id).join("fits.json")).unwrap());
    }
    assert_eq!(fits[0], fits[1]);
    let doc: Value = serde_json::from_str(&fits[0]).unwrap();
    let entries: Vec<piston_core::io::artifacts::FitEntry> = serde_json::from_value(doc["fits"].clone()).unwrap();
    assert_eq!(entries.len(), 3);
    for e in &entries {
        assert!(e.pass);
        assert_eq!(e.recompute_pass(), e.pass);
    }
    let sweep = fs::read_to_string(tmp.path().join("o/p/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().nth(1), Some("gamma,rho_inf,quantity,value"));
}

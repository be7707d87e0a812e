use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ribc::io::{read_bounds_table, read_schedule, read_trajectory, Format};

const MINIMAL: &str = r#"
mode = "simulate"
n = 3
d = 1
r = [0.7, 0.7, 0.7]
model = { kind = "erdos-renyi", p = 0.5 }
"#;

fn ribc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ribc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RIBC_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bounds_table_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &MINIMAL.replace("[0.7, 0.7, 0.7]", "[1.0, 1.0, 1.0]"));
    let o = ribc(&["bounds", "--config", &cfg, "--out", "b"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_bounds_table(&dir.path().join("b/bounds.csv"), Format::Csv).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].n, rows[0].tn_star, rows[0].tn_floor), (3, 15, 38));
    assert!((rows[0].tn - 38.165).abs() < 1e-3);
    assert_eq!(rows[0].delta, 1.0 / 64.0);
}

#[test]
fn bounds_grid() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{}table_n = [3, 4, 5]\ntable_r_n = [0.5, 1.5]\n", MINIMAL);
    let cfg = write_config(dir.path(), &text);
    let o = ribc(&["bounds", "--config", &cfg, "--out", "b", "--format", "json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_bounds_table(&dir.path().join("b/bounds.json"), Format::Json).unwrap();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| (r.tn_star as f64) < r.tn));
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    for verb in ["simulate", "montecarlo", "cibc"] {
        for format in ["csv", "json"] {
            let args = ["--config", &cfg, "--out", "o", "--trials", "20", "--seed", "17", "--format", format];
            let snapshot = |cwd: &Path| {
                let mut files: Vec<_> = fs::read_dir(cwd.join("o"))
                    .unwrap()
                    .map(|e| e.unwrap().path())
                    .collect();
                files.sort();
                files.into_iter().map(|p| (p.clone(), fs::read(p).unwrap())).collect::<Vec<_>>()
            };
            let mut all = vec![verb];
            all.extend(args);
            assert!(ribc(&all, dir.path()).status.success());
            let first = snapshot(dir.path());
            fs::remove_dir_all(dir.path().join("o")).unwrap();
            assert!(ribc(&all, dir.path()).status.success());
            assert_eq!(first, snapshot(dir.path()), "{verb} {format}");
            fs::remove_dir_all(dir.path().join("o")).unwrap();
        }
    }
}

#[test]
fn seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let run = |seed: &str, out: &str| {
        assert!(ribc(&["simulate", "--config", &cfg, "--seed", seed, "--out", out], dir.path()).status.success());
        fs::read(dir.path().join(out).join("trajectory.csv")).unwrap()
    };
    assert_ne!(run("1", "a"), run("2", "b"));
}

#[test]
fn trajectory_round_trips_from_binary_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &MINIMAL.replace("d = 1", "d = 3"));
    for format in [Format::Csv, Format::Json] {
        let f = format.to_string();
        let o = ribc(&["simulate", "--config", &cfg, "--out", &f, "--format", &f, "--trials", "3"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let rows = read_trajectory(&dir.path().join(&f).join(format!("trajectory.{f}")), format).unwrap();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.x.len() == 3 && r.agent < 3 && r.trial_id < 3));
    }
    let csv = read_trajectory(&dir.path().join("csv/trajectory.csv"), Format::Csv).unwrap();
    let json = read_trajectory(&dir.path().join("json/trajectory.json"), Format::Json).unwrap();
    assert_eq!(csv, json);
}

#[test]
fn cibc_hand_traced_instance() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
mode = "cibc"
n = 3
r = [1.5, 0.5, 0.5]
model = { kind = "erdos-renyi", p = 0.5 }
init = { kind = "explicit", opinions = [[0.0], [0.4], [1.0]] }
"#;
    let cfg = write_config(dir.path(), text);
    let o = ribc(&["cibc", "--config", &cfg, "--out", "c"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("terminal time 6 (bound 46)"), "{}", stdout(&o));
    let sched = read_schedule(&dir.path().join("c/schedule.csv"), Format::Csv).unwrap();
    assert_eq!(sched.len(), 6);
    let traj = read_trajectory(&dir.path().join("c/trajectory.csv"), Format::Csv).unwrap();
    let last: Vec<f64> = traj.iter().filter(|r| r.t == 6).map(|r| r.x[0]).collect();
    assert_eq!(last, vec![0.5, 0.5, 0.5]);
}

#[test]
fn env_sets_default_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let o = Command::new(env!("CARGO_BIN_EXE_ribc"))
        .args(["bounds", "--config", &cfg])
        .current_dir(dir.path())
        .env("RIBC_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("from-env/bounds.csv").exists());
    let echo = fs::read_to_string(dir.path().join("from-env/config.toml")).unwrap();
    assert!(echo.contains("out = \"from-env\""));
    assert!(echo.contains("mode = \"bounds\""));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    assert!(ribc(&["montecarlo", "--config", &cfg, "--out", "o", "--trials", "30"], dir.path()).status.success());
    let before = fs::read(dir.path().join("o/summary.csv")).unwrap();
    let echo = dir.path().join("echo.toml");
    fs::copy(dir.path().join("o/config.toml"), &echo).unwrap();
    fs::remove_dir_all(dir.path().join("o")).unwrap();
    assert!(ribc(&["montecarlo", "--config", echo.to_str().unwrap()], dir.path()).status.success());
    assert_eq!(fs::read(dir.path().join("o/summary.csv")).unwrap(), before);
}

#[test]
fn invalid_configs_fail_with_field_messages() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (MINIMAL.replace("[0.7, 0.7, 0.7]", "[0.5, 0.7, 0.3]"), "confidence bounds must be nonincreasing"),
        (MINIMAL.replace("p = 0.5", "p = 1.0"), "strictly between 0 and 1"),
        (format!("{MINIMAL}colour = 3\n"), "colour"),
        (MINIMAL.replace("n = 3", "n = 4"), "r: expected 4"),
    ];
    for (text, needle) in cases {
        let cfg = write_config(dir.path(), &text);
        let o = ribc(&["simulate", "--config", &cfg, "--out", "x"], dir.path());
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains(needle), "{needle}: {}", stderr(&o));
    }
    let o = ribc(&["simulate", "--out", "x"], dir.path());
    assert!(stderr(&o).contains("n: required"), "{}", stderr(&o));
    let cfg = write_config(dir.path(), MINIMAL);
    let o = ribc(&["simulate", "--config", &cfg, "--format", "xml"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn verify_desk_battery_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ribc(&["verify", "--out", "v", "--seed", "5"], dir.path());
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 11, "{text}");
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v/verify.json")).unwrap()).unwrap();
    assert_eq!(report["checks"].as_array().unwrap().len(), 11);
}

#[test]
fn step_cap_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let text = MINIMAL.replace("p = 0.5", "p = 0.01");
    let cfg = write_config(dir.path(), &text);
    let o = ribc(&["montecarlo", "--config", &cfg, "--max-steps", "1", "--trials", "50", "--out", "m"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("reached the step cap"));
}

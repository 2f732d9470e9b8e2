use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "geometry": {"kind": "interleaved", "cs_rows": 4, "cs_cols": 4, "spacing_um": 5},
  "holography": {"grid": {"n": 64, "pixel_um": 0.625}},
  "simulate": {"shots": 60},
  "continuous": {"total_minutes": 0.5}
}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualarray")).current_dir(dir).args(args).output().unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.json"), SMALL).unwrap();
    dir
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = setup();
    for name in ["a", "b"] {
        ok(&run(dir.path(), &["--config", "small.json", "--seed", "3", "--out", name, "simulate"]));
    }
    ok(&run(dir.path(), &["--config", "small.json", "--seed", "4", "--out", "c", "simulate"]));
    let read = |d: &str, f: &str| fs::read_to_string(dir.path().join(d).join(f)).unwrap();
    for f in ["records.json", "summary.json", "timeline.csv", "loading_rb.csv"] {
        assert_eq!(read("a", f), read("b", f), "{f} differs between identical runs");
    }
    assert_ne!(read("a", "records.json"), read("c", "records.json"));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = setup();
    ok(&run(dir.path(), &["--config", "small.json", "--threads", "1", "--out", "one", "simulate"]));
    ok(&run(dir.path(), &["--config", "small.json", "--threads", "4", "--out", "four", "simulate"]));
    let read = |d: &str| fs::read_to_string(dir.path().join(d).join("records.json")).unwrap();
    assert_eq!(read("one"), read("four"));
}

#[test]
fn schema_errors_report_line_and_column() {
    let dir = setup();
    fs::write(dir.path().join("bad.json"), "{\n  \"simulate\": {\"shots\": 5},\n  \"bogus\": 1\n}").unwrap();
    let out = run(dir.path(), &["--config", "bad.json", "--out", "o", "simulate"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn invalid_values_fail_cleanly() {
    let dir = setup();
    fs::write(dir.path().join("p.json"), r#"{"physics": {"p_load": {"rb": 1.5, "cs": 0.5}}}"#).unwrap();
    let out = run(dir.path(), &["--config", "p.json", "--out", "o", "simulate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn seed_range_gives_one_row_per_seed() {
    let dir = setup();
    ok(&run(dir.path(), &["--config", "small.json", "--seed", "5..8", "--out", "o", "continuous", "--min-atoms", "0"]));
    let csv = fs::read_to_string(dir.path().join("o/availability.csv")).unwrap();
    let seeds: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(seeds, ["5", "6", "7", "8"]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seeds"], 4);
}

#[test]
fn seed_range_rejected_for_single_run_commands() {
    let dir = setup();
    let out = run(dir.path(), &["--config", "small.json", "--seed", "1..2", "--out", "o", "simulate"]);
    assert!(!out.status.success());
}

#[test]
fn analyze_reproduces_simulate_rates() {
    let dir = setup();
    ok(&run(dir.path(), &["--config", "small.json", "--out", "sim", "simulate"]));
    ok(&run(dir.path(), &["--out", "ana", "analyze", "--records", "sim/records.json"]));
    let read = |d: &str, f: &str| fs::read_to_string(dir.path().join(d).join(f)).unwrap();
    for f in ["loading_rb.csv", "loading_cs.csv", "loss_baseline_rb.csv", "loss_baseline_cs.csv"] {
        assert_eq!(read("sim", f), read("ana", f), "{f}");
    }
}

#[test]
fn json_format_writes_json_tables() {
    let dir = setup();
    ok(&run(dir.path(), &["--config", "small.json", "--format", "json", "--out", "o", "simulate"]));
    let text = fs::read_to_string(dir.path().join("o/loading_rb.json")).unwrap();
    let rows: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(rows.len(), 9);
    assert!(!dir.path().join("o/loading_rb.csv").exists());
}

#[test]
fn holo_and_aod_write_artifacts() {
    let dir = setup();
    ok(&run(dir.path(), &["--config", "small.json", "--out", "h", "holo", "--iters", "30"]));
    for f in ["phase_mask.pgm", "intensity.pgm", "wgs_trace.csv", "summary.json", "manifest.json"] {
        assert!(dir.path().join("h").join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("h/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["holography"]["wgs"]["max_iters"], 30);

    ok(&run(dir.path(), &["--config", "small.json", "--out", "a", "aod", "plan"]));
    let tones = fs::read_to_string(dir.path().join("a/tones.csv")).unwrap();
    assert!(tones.starts_with("axis,freq_MHz,amplitude"));
    assert_eq!(tones.lines().count(), 1 + 3 + 3);
}

#[test]
fn bitmap_geometry_override() {
    let dir = setup();
    fs::write(dir.path().join("g.txt"), "101\n020\n101\n").unwrap();
    ok(&run(dir.path(), &["--config", "small.json", "--out", "a", "aod", "plan", "--geometry", "g.txt"]));
    let sites = fs::read_to_string(dir.path().join("a/sites.csv")).unwrap();
    assert_eq!(sites.lines().count(), 1 + 4);
}

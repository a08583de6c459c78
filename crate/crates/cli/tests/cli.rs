use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn tgc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tgc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Data lines of a CSV written by the tool (comment line dropped).
fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

const TINY: &str = "\
sample_id,time_index,hr,grade
a,0,80,1
a,1,82,2
a,2,,2
b,0,70,1
b,1,71,
b,2,75,3
c,0,90,3
c,1,91,3
c,2,88,2
d,0,60,1
d,1,65,1
d,2,63,2
";

fn tiny(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.csv");
    std::fs::write(&path, TINY).unwrap();
    path
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn fit_writes_bundle_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let input = tiny(dir.path());
    let model = dir.path().join("model.json");
    ok(&tgc(&["fit", "--input", p(&input), "--model", p(&model), "--ordinal", "grade:3"]));
    let bundle = json(&model);
    assert_eq!(bundle["manifest"]["format"], "tgc-model");
    assert_eq!(bundle["manifest"]["run_config"]["config"]["ordinal"][0], "grade:3");
    let diag = json(&dir.path().join("model.diagnostics.json"));
    assert!(diag["diagnostics"]["iterations_run"].is_u64());
    assert_eq!(diag["run"]["config"]["max-iter"], 50);
}

#[test]
fn fit_records_timewise_layout() {
    let dir = tempfile::tempdir().unwrap();
    let input = tiny(dir.path());
    let model = dir.path().join("m.json");
    ok(&tgc(&["fit", "--input", p(&input), "--model", p(&model), "--layout", "timewise"]));
    assert_eq!(json(&model)["manifest"]["layout"], "TimeRows");
}

#[test]
fn missing_input_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let out = tgc(&["fit", "--input", p(&dir.path().join("absent.csv")), "--model", p(&model)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(entries(dir.path()).is_empty());
}

#[test]
fn bad_flags_and_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = tiny(dir.path());
    let model = dir.path().join("m.json");
    for args in [
        vec!["fit", "--input", p(&input), "--model", p(&model), "--rates", "0.2"],
        vec!["fit", "--input", p(&input), "--model", p(&model), "--layout", "sideways"],
        vec!["fit", "--input", p(&input), "--model", p(&model), "--ordinal", "grade"],
        vec!["fit", "--input", p(&input), "--model", p(&model), "--ordinal", "grade:2"],
        vec!["fit", "--input", p(&input)],
        vec!["fit", "--bogus"],
    ] {
        assert_eq!(tgc(&args).status.code(), Some(2), "{args:?}");
    }
    assert!(!model.exists());
}

fn fit_tiny(dir: &Path) -> PathBuf {
    let input = tiny(dir);
    let model = dir.join("model.json");
    ok(&tgc(&["fit", "--input", p(&input), "--model", p(&model), "--ordinal", "grade:3"]));
    model
}

#[test]
fn impute_fills_only_missing_cells_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_tiny(dir.path());
    let input = dir.path().join("tiny.csv");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&tgc(&["impute", "--input", p(&input), "--model", p(&model), "--output", p(&a)]));
    ok(&tgc(&["impute", "--input", p(&input), "--model", p(&model), "--output", p(&b), "--threads", "3"]));
    let lines_a = data_lines(&a);
    assert_eq!(lines_a, data_lines(&b));
    let original: Vec<&str> = TINY.lines().collect();
    assert_eq!(lines_a.len(), original.len());
    for (got, want) in lines_a.iter().zip(&original) {
        let g: Vec<&str> = got.split(',').collect();
        let w: Vec<&str> = want.split(',').collect();
        for (gv, wv) in g.iter().zip(&w) {
            assert!(!gv.is_empty(), "{got}");
            if !wv.is_empty() {
                assert_eq!(gv, wv);
            }
        }
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("# tgc {\"command\":\"impute\""));
    // Byte-identical across reruns, including the embedded run record.
    let first = std::fs::read(&a).unwrap();
    ok(&tgc(&["impute", "--input", p(&input), "--model", p(&model), "--output", p(&a)]));
    assert_eq!(std::fs::read(&a).unwrap(), first);
}

#[test]
fn impute_complete_input_is_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_tiny(dir.path());
    let complete = dir.path().join("complete.csv");
    std::fs::write(&complete, "sample_id,time_index,hr,grade\nz,0,80,1\nz,1,81.5,2\nz,2,79,3\n").unwrap();
    let out = dir.path().join("out.csv");
    ok(&tgc(&["impute", "--input", p(&complete), "--model", p(&model), "--output", p(&out)]));
    assert_eq!(
        data_lines(&out),
        vec!["sample_id,time_index,hr,grade", "z,0,80,1", "z,1,81.5,2", "z,2,79,3"]
    );
}

#[test]
fn impute_one_missing_cell() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_tiny(dir.path());
    let one = dir.path().join("one.csv");
    std::fs::write(&one, "sample_id,time_index,hr,grade\nz,0,80,1\nz,1,,2\nz,2,79,3\n").unwrap();
    let out = dir.path().join("out.csv");
    ok(&tgc(&["impute", "--input", p(&one), "--model", p(&model), "--output", p(&out)]));
    let lines = data_lines(&out);
    assert_eq!(lines[1], "z,0,80,1");
    assert_eq!(lines[3], "z,2,79,3");
    let filled: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(filled[3], "2");
    let hr: f64 = filled[2].parse().unwrap();
    assert!((60.0..=91.0).contains(&hr));
}

#[test]
fn impute_feature_mismatch_exits_2_with_diff() {
    let dir = tempfile::tempdir().unwrap();
    let model = fit_tiny(dir.path());
    let other = dir.path().join("other.csv");
    std::fs::write(&other, "sample_id,time_index,hr,spo2\nz,0,80,97\n").unwrap();
    let out = dir.path().join("out.csv");
    let res = tgc(&["impute", "--input", p(&other), "--model", p(&model), "--output", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("grade") && err.contains("spo2"), "{err}");
    assert!(!out.exists());
}

#[test]
fn synth_writes_three_consistent_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let args = [
        "synth", "--output", p(&data), "--n-samples", "12", "--n-steps", "5", "--n-features", "3",
        "--missing-rate", "0.3", "--seed", "4",
    ];
    ok(&tgc(&args));
    assert_eq!(entries(dir.path()), vec!["d.csv", "d.sigma.json", "d.truth.csv"]);
    let lines = data_lines(&data);
    let truth = data_lines(&dir.path().join("d.truth.csv"));
    assert_eq!(lines.len(), 1 + 12 * 5);
    assert_eq!(truth.len(), lines.len());
    assert!(truth.iter().skip(1).all(|l| !l.contains(",,") && !l.ends_with(',')));
    let sigma = json(&dir.path().join("d.sigma.json"));
    assert_eq!(sigma["sigma"]["dim"], 15);
    assert_eq!(sigma["run"]["config"]["seed"], 4);

    let first = std::fs::read(&data).unwrap();
    ok(&tgc(&args));
    assert_eq!(std::fs::read(&data).unwrap(), first);
}

#[test]
fn synth_rate_zero_matches_truth() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    ok(&tgc(&["synth", "--output", p(&data), "--n-samples", "6", "--marginals", "lognormal,ordinal:4,gaussian"]));
    assert_eq!(data_lines(&data), data_lines(&dir.path().join("d.truth.csv")));
}

#[test]
fn benchmark_reports_requested_cells() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let args = [
        "benchmark", "--output", p(&report), "--csv", p(&csv), "--rates", "0.2,0.8", "--reps", "2",
        "--n-samples", "40", "--n-steps", "4", "--n-features", "2", "--seed", "3",
    ];
    let out = tgc(&args);
    ok(&out);
    let table = String::from_utf8_lossy(&out.stdout);
    let header = table.lines().next().unwrap();
    assert_eq!(header.matches("mae@").count(), 2);
    let r = json(&report);
    let cells = r["cells"].as_object().unwrap();
    assert_eq!(cells.len(), 3 * 2);
    for m in ["tgc", "locf", "mean"] {
        for rate in ["0.2", "0.8"] {
            let c = &cells[&format!("{m}/{rate}")];
            assert_eq!(c["status"], "ok");
            assert_eq!(c["runs"].as_array().unwrap().len(), 2);
        }
    }
    assert_eq!(r["metadata"]["rep_seeds"], serde_json::json!([3, 4]));
    assert_eq!(r["metadata"]["run_config"]["config"]["reps"], 2);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 7);

    let first = std::fs::read(&report).unwrap();
    ok(&tgc(&args));
    assert_eq!(std::fs::read(&report).unwrap(), first);
}

#[test]
fn benchmark_on_csv_input() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    ok(&tgc(&["synth", "--output", p(&data), "--n-samples", "30", "--n-steps", "4", "--n-features", "2"]));
    let report = dir.path().join("r.json");
    let out = tgc(&[
        "benchmark", "--input", p(&data), "--output", p(&report), "--methods", "tgc,tgc-u", "--rates", "0.5",
        "--reps", "1", "--dataset-name", "physionet2012",
    ]);
    ok(&out);
    let r = json(&report);
    assert_eq!(r["cells"].as_object().unwrap().len(), 2);
    assert_eq!(r["reference"][0]["reference_mae"], 0.309);
    assert!(String::from_utf8_lossy(&out.stdout).contains("published 0.309"));
    let clash = tgc(&["benchmark", "--input", p(&data), "--output", p(&report), "--rho", "0.5"]);
    assert_eq!(clash.status.code(), Some(2));
}

#[test]
fn config_file_values_are_used_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "rates = \"0.3\"\nreps = 1\nseed = 8\nn-samples = 30\nn-steps = 3\nn-features = 2\nlayout = \"timewise\"\n",
    )
    .unwrap();
    let report = dir.path().join("r.json");
    ok(&tgc(&["benchmark", "--config", p(&cfg), "--output", p(&report), "--seed", "9"]));
    let r = json(&report);
    let config = &r["metadata"]["run_config"]["config"];
    assert_eq!(config["seed"], 9);
    assert_eq!(config["rates"], serde_json::json!([0.3]));
    assert!(config.get("layout").is_none());
    assert!(r["cells"].get("tgc/0.3").is_some());

    // A run record replays the same run.
    let replay = dir.path().join("replay.json");
    std::fs::write(&replay, serde_json::to_string(&r["metadata"]["run_config"]).unwrap()).unwrap();
    let again = dir.path().join("again.json");
    ok(&tgc(&["benchmark", "--config", p(&replay), "--output", p(&again)]));
    assert_eq!(json(&again)["cells"], r["cells"]);

    std::fs::write(&cfg, "not-a-key = 1\n").unwrap();
    assert_eq!(tgc(&["benchmark", "--config", p(&cfg), "--output", p(&report)]).status.code(), Some(2));
}

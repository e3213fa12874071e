use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use ripplecorr::synth::{realize, SynthSpec};

const SPEC: &str = r#"
m = 63
n_prime = 239
seed = 5

[[modes]]
loading = "random"
eigenvalue = 8.0
driver = { type = "ar1", coefficient = 0.0 }
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ripplecorr"));
    c.env_remove("RIPPLECORR_OUT");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

/// Writes the synthetic panel for [`SPEC`] to `dir/panel.csv`.
fn synth_panel(dir: &Path) {
    fs::write(dir.join("spec.toml"), SPEC).unwrap();
    let out = run(&["synth", "--spec", "spec.toml", "--out", "synth"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    fs::copy(dir.join("synth/panel.csv"), dir.join("panel.csv")).unwrap();
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn synth_piped_into_analyze_recovers_planted_mode() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("spec.toml"), SPEC).unwrap();
    let synth = bin()
        .args(["synth", "--spec", "spec.toml", "--stdout", "--out", "synth"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(synth.status.success());
    let mut analyze = bin()
        .args(["analyze", "--input", "-", "--out", "analysis"])
        .current_dir(dir.path())
        .stdin(Stdio::piped())
        .spawn()
        .unwrap();
    {
        use std::io::Write;
        analyze.stdin.take().unwrap().write_all(&synth.stdout).unwrap();
    }
    assert!(analyze.wait().unwrap().success());

    let rows = data_lines(&dir.path().join("analysis/eigenvalues.csv"));
    assert_eq!(rows[0], "n,eigenvalue");
    assert_eq!(rows.len() - 1, 63);

    let basis: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("analysis/basis.json")).unwrap())
            .unwrap();
    let v1: Vec<f64> = basis["eigenvectors"][0]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let planted = realize(&SynthSpec::from_toml(SPEC).unwrap()).unwrap().loadings;
    let overlap: f64 = v1.iter().zip(&planted[0]).map(|(a, b)| a * b).sum();
    assert!(overlap.abs() >= 0.9, "overlap {overlap}");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("analysis/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["command"], "analyze");
    assert_eq!(manifest["config"]["window"]["start"], "1988-01");
    assert!(manifest["version"].is_string());
}

#[test]
fn null_json_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    synth_panel(dir.path());
    for out in ["a", "b"] {
        let o = run(
            &["null", "--input", "panel.csv", "--mode", "rotational", "--samples", "100", "--seed", "7", "--out", out],
            dir.path(),
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read(dir.path().join("a/null.json")).unwrap();
    let b = fs::read(dir.path().join("b/null.json")).unwrap();
    assert_eq!(a, b);
    let doc: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(doc["samples"], 100);
    assert_eq!(doc["seed"], 7);
    assert_eq!(doc["mode"], "rotational");
    assert_eq!(doc["lambda_max"].as_array().unwrap().len(), 100);
    assert!(doc["edge"]["center"].is_number());
    assert_eq!(doc["config"]["seed"], 7);
}

#[test]
fn every_subcommand_runs_and_stays_in_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    synth_panel(dir.path());
    let cases: &[(&[&str], &[&str])] = &[
        (&["validate"], &[]),
        (&["genuine", "--samples", "50"], &["genuine.csv", "genuine.json"]),
        (&["ripple", "--k", "2"], &["final_to_intermediate.csv"]),
        (&["ripple", "--k", "2", "--source", "S.9", "--shift", "-1.5"], &["ripple.csv"]),
        (&["reduced-chi"], &["reduced_chi.json", "reduced_chi.csv"]),
        (&["cycles", "--xi", "3"], &["smoothed.csv", "lag_correlation.csv"]),
        (&["phases"], &["phases_k4.csv", "phases_averaged.csv"]),
        (&["stimuli", "--kset", "long"], &["stimuli.csv"]),
    ];
    for (i, (args, files)) in cases.iter().enumerate() {
        let out = format!("out{i}");
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--input", "panel.csv", "--out", &out]);
        let o = run(&full, dir.path());
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let produced = dir.path().join(&out);
        assert!(produced.join("manifest.json").exists());
        for f in *files {
            let text = fs::read_to_string(produced.join(f)).unwrap();
            if f.ends_with(".csv") {
                assert!(text.starts_with("# config={"), "{f}");
            } else {
                assert!(text.contains("\"config\""), "{f}");
            }
        }
    }
    let mut entries: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    entries.sort();
    let mut expected: Vec<String> = (0..cases.len()).map(|i| format!("out{i}")).collect();
    expected.extend(["panel.csv", "spec.toml", "synth"].map(String::from));
    expected.sort();
    assert_eq!(entries, expected);

    let table = data_lines(&dir.path().join("out2/final_to_intermediate.csv"));
    assert_eq!(table.len(), 20);
    let stimuli = data_lines(&dir.path().join("out7/stimuli.csv"));
    assert_eq!(stimuli[0], "date,eta1,eta2");
    assert_eq!(stimuli.len(), 240);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    synth_panel(dir.path());
    let o = bin()
        .args(["validate", "--input", "panel.csv"])
        .env("RIPPLECORR_OUT", "from-env")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("from-env/manifest.json").exists());
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["analyze"], dir.path()).status.code(), Some(2));
    assert_eq!(
        run(&["analyze", "--input", "x.csv", "--window", "1988-13:2000-01"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["null", "--input", "x.csv", "--mode", "sideways"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn data_errors_exit_one_with_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["analyze", "--input", "missing.csv", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "));

    fs::write(
        dir.path().join("bad.csv"),
        "date,P.1,P.2\n1988-01,100,100\n1988-02,101,0\n1988-03,102,99\n",
    )
    .unwrap();
    let o = run(&["validate", "--input", "bad.csv", "--out", "o", "--window", "1988-01:1988-03"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("non-positive"), "{err}");
}

//! Black-box tests of the disparity binary: output files, overwrite
//! semantics, summaries, and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn disparity(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_disparity"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_sample_csv(path: &Path) {
    let mut text = String::from("Model,Language,Dataset,Metric,Score\n");
    let noise = [
        0.3, -0.4, 0.2, -0.1, 0.5, -0.3, 0.1, -0.2, 0.4, -0.5, 0.2, -0.1,
    ];
    let mut k = 0;
    for m in ["m1", "m2"] {
        for (li, l) in ["aa", "bb", "cc"].iter().enumerate() {
            for (ti, t) in ["acc", "f1"].iter().enumerate() {
                let score = 40.0 + 6.0 * li as f64 + 9.0 * ti as f64 + noise[k];
                text.push_str(&format!("{m},{l},ds,{t},{score}\n"));
                k += 1;
            }
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn fit_writes_parameters_and_respects_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_arg = out.to_str().unwrap();

    let first = disparity(&["fit", "--out", out_arg]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("1364 records, 13 models, 53 languages, 15 tasks"));
    let fit_path = out.join("fit.json");
    let text = std::fs::read_to_string(&fit_path).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!((parsed["theta"].as_f64().unwrap() - 0.92566).abs() < 1e-4);
    assert_eq!(parsed["reference_language"], "af");
    assert_eq!(parsed["alpha"]["af"], 0.0);

    // a second run must refuse to overwrite
    let second = disparity(&["fit", "--out", out_arg]);
    assert_eq!(second.status.code(), Some(1));
    assert!(stderr(&second).contains("already exists"));

    // --force overwrites with byte-identical content
    let third = disparity(&["fit", "--out", out_arg, "--force"]);
    assert!(third.status.success());
    assert_eq!(std::fs::read_to_string(&fit_path).unwrap(), text);
}

#[test]
fn rank_languages_writes_the_language_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_arg = dir.path().to_str().unwrap();
    let run = disparity(&["rank-languages", "--out", out_arg]);
    assert!(run.status.success(), "{}", stderr(&run));
    let text = std::fs::read_to_string(dir.path().join("language_potential.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "Language,Potential,PotentialRank,MeanScore,MeanScoreRank"
    );
    let first_fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first_fields[0], "nl");
    assert_eq!(first_fields[2], "1");
    assert_eq!(first_fields[4], "2");
    assert_eq!(text.lines().count(), 54);
    assert!(stdout(&run).contains("largest rank divergences"));
}

#[test]
fn evaluate_models_reports_both_orderings() {
    let dir = tempfile::tempdir().unwrap();
    let out_arg = dir.path().to_str().unwrap();
    let run = disparity(&["evaluate-models", "--out", out_arg]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(stdout(&run).contains("most even: MuRIL   strongest mean: TuLRv6 - XXL"));
    let disparity_csv = std::fs::read_to_string(dir.path().join("model_disparity.csv")).unwrap();
    assert!(disparity_csv.starts_with("Model,MeanPRR,StdPRR,CVPRR\n"));
    assert_eq!(disparity_csv.lines().count(), 14);
    let prr_csv = std::fs::read_to_string(dir.path().join("prr_records.csv")).unwrap();
    assert_eq!(prr_csv.lines().count(), 1365);
    assert!(prr_csv.starts_with("Model,Language,Dataset,Metric,Score,Potential,PRR\n"));
}

#[test]
fn diagnose_writes_tests_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out_arg = dir.path().to_str().unwrap();
    let run = disparity(&["diagnose", "--out", out_arg]);
    assert!(run.status.success(), "{}", stderr(&run));
    let diag: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("diagnostics.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(diag["residual_kind"], "conditional");
    assert_eq!(diag["levene_center"], "median");
    let w = diag["residual_normality"]["statistic"].as_f64().unwrap();
    assert!((w - 0.979).abs() < 1e-3);
    let qq = std::fs::read_to_string(dir.path().join("qq_residuals.csv")).unwrap();
    assert_eq!(qq.lines().count(), 1365);
    let qq_u = std::fs::read_to_string(dir.path().join("qq_random_effects.csv")).unwrap();
    assert_eq!(qq_u.lines().count(), 14);
    let rv = std::fs::read_to_string(dir.path().join("residuals_vs_fitted.csv")).unwrap();
    assert_eq!(rv.lines().count(), 1365);
}

#[test]
fn diagnose_levene_center_flag_switches_the_test() {
    let dir = tempfile::tempdir().unwrap();
    let out_arg = dir.path().to_str().unwrap();
    let run = disparity(&["diagnose", "--out", out_arg, "--levene-center", "mean"]);
    assert!(run.status.success(), "{}", stderr(&run));
    let diag: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("diagnostics.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(diag["levene_center"], "mean");
    assert_eq!(diag["variance_homogeneity"]["method"], "levene_mean");
}

#[test]
fn robustness_reports_the_cv_rank_swap() {
    let dir = tempfile::tempdir().unwrap();
    let out_arg = dir.path().to_str().unwrap();
    let run = disparity(&["robustness", "--out", out_arg]);
    assert!(run.status.success(), "{}", stderr(&run));
    let text = stdout(&run);
    assert!(text.contains("dropped 10 records"));
    assert!(text.contains("mean-PRR ranking unchanged"));
    assert!(text.contains("CV-PRR ranking changed"));
    let rob: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("robustness.json")).unwrap())
            .unwrap();
    assert_eq!(rob["k"], 10);
    assert_eq!(rob["dropped"].as_array().unwrap().len(), 10);
    assert_eq!(rob["dropped"][0]["model"], "XLM-R Large");
    assert_eq!(rob["dropped"][0]["task"], "panx_f1");
}

#[test]
fn compare_defaults_to_perfect_self_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let out_arg = dir.path().to_str().unwrap();
    let run = disparity(&["compare", "--out", out_arg]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(stdout(&run).contains("53 shared languages"));
    let cmp: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("compare.json")).unwrap())
            .unwrap();
    assert_eq!(cmp["spearman"]["statistic"], 1.0);
    assert_eq!(cmp["kendall"]["statistic"], 1.0);
}

#[test]
fn compare_accepts_a_second_records_file() {
    let dir = tempfile::tempdir().unwrap();
    let sample = dir.path().join("sample.csv");
    write_sample_csv(&sample);
    let out_arg = dir.path().join("out");
    let run = disparity(&[
        "compare",
        "--records",
        sample.to_str().unwrap(),
        "--records-b",
        sample.to_str().unwrap(),
        "--out",
        out_arg.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(stdout(&run).contains("3 shared languages"));
}

#[test]
fn baseline_task_filter_restricts_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_arg = dir.path().to_str().unwrap();
    let run = disparity(&["baseline", "--task", "xnli_accuracy", "--out", out_arg]);
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(stdout(&run).contains("restricted to task xnli_accuracy"));
    let langs = std::fs::read_to_string(dir.path().join("baseline_languages.csv")).unwrap();
    // xnli covers 15 languages
    assert_eq!(langs.lines().count(), 16);
    assert!(langs.starts_with("Language,MeanScore,Rank,Records\n"));
    let models = std::fs::read_to_string(dir.path().join("baseline_models.csv")).unwrap();
    assert!(models.starts_with("Model,MeanScore,StdScore,CVScore,Records\n"));
}

#[test]
fn unknown_fixture_and_missing_file_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out_arg = dir.path().to_str().unwrap();
    let bad_fixture = disparity(&["fit", "--fixture", "nope", "--out", out_arg]);
    assert_eq!(bad_fixture.status.code(), Some(1));
    assert!(stderr(&bad_fixture).contains("unknown fixture"));

    let missing = disparity(&["fit", "--records", "/nonexistent.csv", "--out", out_arg]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn invalid_records_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    // duplicate (model, language, task) cell
    std::fs::write(
        &bad,
        "Model,Language,Dataset,Metric,Score\nm,aa,ds,acc,1.0\nm,aa,ds,acc,2.0\n",
    )
    .unwrap();
    let run = disparity(&[
        "fit",
        "--records",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(1));
    assert!(stderr(&run).contains("duplicate"));
}

#[test]
fn numerically_degenerate_designs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // language bb only ever appears with task f1: confounded dummies
    let confounded = dir.path().join("confounded.csv");
    std::fs::write(
        &confounded,
        "Model,Language,Dataset,Metric,Score\n\
         m1,aa,ds,acc,1.0\nm1,bb,ds,f1,2.0\nm2,aa,ds,acc,3.0\nm2,bb,ds,f1,4.0\n",
    )
    .unwrap();
    let run = disparity(&[
        "fit",
        "--records",
        confounded.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(2));
    assert!(stderr(&run).contains("singular"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let run = disparity(&["rank-languages", "--out", out.to_str().unwrap()]);
        assert!(run.status.success(), "{}", stderr(&run));
    }
    assert_eq!(
        std::fs::read(out_a.join("language_potential.csv")).unwrap(),
        std::fs::read(out_b.join("language_potential.csv")).unwrap()
    );
}

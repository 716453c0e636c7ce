//! Command-line front end for the disparity analysis pipeline.
//!
//! Every subcommand loads one score table (a bundled fixture or a user
//! file), runs part of the analysis, writes machine-readable outputs into
//! the chosen directory, and prints a short human-readable summary.
//!
//! Exit codes: 0 on success, 1 for usage, input, or I/O problems, 2 when
//! the data defeats the numerics (singular design, degenerate variance,
//! non-positive potentials).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use disparity_core::diagnostics::{compare_fits, diagnose, robustness_refit, ResidualKind};
use disparity_core::disparity::{
    baseline_language_means, baseline_model_stats, language_potential, model_disparity,
    rank_divergence, realisation_ratios,
};
use disparity_core::lmm::fit_lmm;
use disparity_core::records::{load_records, mega_fixture, RecordCollection, TaskId};
use disparity_core::report;
use disparity_core::stattests::{LeveneCenter, TestResult};
use disparity_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "disparity",
    version,
    about = "Language disparity analysis for multilingual evaluation scores"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Score records file, .json or .csv
    #[arg(long, value_name = "PATH", conflicts_with = "fixture")]
    records: Option<PathBuf>,
    /// Bundled dataset
    #[arg(long, value_name = "NAME", default_value = "mega")]
    fixture: String,
}

impl InputArgs {
    fn load(&self) -> Result<RecordCollection> {
        load_input(self.records.as_deref(), &self.fixture)
    }
}

fn load_input(records: Option<&std::path::Path>, fixture: &str) -> Result<RecordCollection> {
    match records {
        Some(path) => load_records(path),
        None => match fixture {
            "mega" => Ok(mega_fixture()),
            other => Err(Error::InvalidInput {
                detail: format!("unknown fixture '{other}' (available: mega)"),
            }),
        },
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overwrite existing output files
    #[arg(long)]
    force: bool,
}

impl OutputArgs {
    /// Creates the directory and refuses to clobber existing outputs
    /// unless --force is set.
    fn prepare(&self, files: &[&str]) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(&self.out)?;
        let paths: Vec<PathBuf> = files.iter().map(|f| self.out.join(f)).collect();
        if !self.force {
            for p in &paths {
                if p.exists() {
                    return Err(Error::InvalidInput {
                        detail: format!(
                            "{} already exists (use --force to overwrite)",
                            p.display()
                        ),
                    });
                }
            }
        }
        Ok(paths)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CenterArg {
    Mean,
    Median,
}

impl From<CenterArg> for LeveneCenter {
    fn from(c: CenterArg) -> Self {
        match c {
            CenterArg::Mean => LeveneCenter::Mean,
            CenterArg::Median => LeveneCenter::Median,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit the mixed model and write its parameters
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Rank languages by potential and compare with raw-mean ranks
    RankLanguages {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Count the reference task's zero offset in the task average
        #[arg(long)]
        lp_include_reference_zero: bool,
    },
    /// Score models by how evenly they realise language potential
    EvaluateModels {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Test the model's residual and random-effect assumptions
    Diagnose {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Centering for the variance homogeneity test
        #[arg(long, value_enum, default_value_t = CenterArg::Median)]
        levene_center: CenterArg,
    },
    /// Refit without the worst-fitting records and compare rankings
    Robustness {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Number of records to drop
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Correlate the language rankings of two datasets
    Compare {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Second score records file, .json or .csv
        #[arg(long, value_name = "PATH", conflicts_with = "fixture_b")]
        records_b: Option<PathBuf>,
        /// Second bundled dataset
        #[arg(long, value_name = "NAME", default_value = "mega")]
        fixture_b: String,
    },
    /// Raw per-language means and per-model score moments, no model
    Baseline {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Restrict to one task, written dataset_metric
        #[arg(long, value_name = "DATASET_METRIC")]
        task: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not failures
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit { input, output } => cmd_fit(&input, &output),
        Command::RankLanguages {
            input,
            output,
            lp_include_reference_zero,
        } => cmd_rank_languages(&input, &output, lp_include_reference_zero),
        Command::EvaluateModels { input, output } => cmd_evaluate_models(&input, &output),
        Command::Diagnose {
            input,
            output,
            levene_center,
        } => cmd_diagnose(&input, &output, levene_center.into()),
        Command::Robustness { input, output, k } => cmd_robustness(&input, &output, k),
        Command::Compare {
            input,
            output,
            records_b,
            fixture_b,
        } => cmd_compare(&input, &output, records_b.as_deref(), &fixture_b),
        Command::Baseline {
            input,
            output,
            task,
        } => cmd_baseline(&input, &output, task.as_deref()),
    }
}

fn describe(c: &RecordCollection) {
    println!(
        "{} records, {} models, {} languages, {} tasks",
        c.len(),
        c.models().len(),
        c.languages().len(),
        c.tasks().len()
    );
}

fn cmd_fit(input: &InputArgs, output: &OutputArgs) -> Result<()> {
    let c = input.load()?;
    let paths = output.prepare(&["fit.json"])?;
    let fit = fit_lmm(&c)?;
    report::write_fit_json(&fit, &paths[0])?;
    describe(&c);
    println!(
        "reference cell: language {}, task {}",
        fit.reference_language(),
        fit.reference_task()
    );
    println!("intercept            {:>10.2}", fit.mu);
    println!("theta                {:>10.4}", fit.theta);
    println!("residual variance    {:>10.2}", fit.sigma2_e);
    println!("intercept variance   {:>10.2}", fit.sigma2_u);
    println!("log-likelihood       {:>10.2}", fit.loglik);
    println!("wrote {}", paths[0].display());
    Ok(())
}

fn cmd_rank_languages(
    input: &InputArgs,
    output: &OutputArgs,
    include_reference_zero: bool,
) -> Result<()> {
    let c = input.load()?;
    let paths = output.prepare(&["language_potential.csv"])?;
    let fit = fit_lmm(&c)?;
    let potential = language_potential(&fit, include_reference_zero);
    let baseline = baseline_language_means(&c, None)?;
    report::write_language_potential_csv(&potential, &baseline, &paths[0])?;
    let divergence = rank_divergence(&baseline, &potential)?;

    describe(&c);
    println!(
        "mean task effect {:.2} ({} reference task)",
        potential.mean_task_effect,
        if include_reference_zero {
            "including"
        } else {
            "excluding"
        }
    );
    println!(
        "{:<12} {:>10} {:>6} {:>10} {:>8}",
        "Language", "Potential", "Rank", "RawMean", "RawRank"
    );
    let raw: std::collections::BTreeMap<&str, (f64, usize)> = baseline
        .iter()
        .map(|b| (b.language.as_str(), (b.mean_score, b.rank)))
        .collect();
    for e in &potential.entries {
        let (mean, rank) = raw[e.language.as_str()];
        println!(
            "{:<12} {:>10.2} {:>6} {:>10.2} {:>8}",
            e.language, e.potential, e.rank, mean, rank
        );
    }
    println!("largest rank divergences (raw minus potential):");
    for d in divergence.iter().take(5) {
        println!(
            "  {:<12} raw {:>3}  potential {:>3}  delta {:>+4}",
            d.language, d.baseline_rank, d.potential_rank, d.delta
        );
    }
    println!("wrote {}", paths[0].display());
    Ok(())
}

fn cmd_evaluate_models(input: &InputArgs, output: &OutputArgs) -> Result<()> {
    let c = input.load()?;
    let paths = output.prepare(&["model_disparity.csv", "prr_records.csv"])?;
    let fit = fit_lmm(&c)?;
    let ratios = realisation_ratios(&fit, &c)?;
    let disparity = model_disparity(&ratios)?;
    report::write_model_disparity_csv(&disparity, &paths[0])?;
    report::write_prr_records_csv(&ratios, &paths[1])?;

    describe(&c);
    println!(
        "{:<24} {:>5} {:>8} {:>8} {:>8}",
        "Model", "N", "MeanPRR", "StdPRR", "CVPRR"
    );
    for model in &disparity.cv_prr_ranking {
        let m = disparity.get(model).unwrap();
        println!(
            "{:<24} {:>5} {:>8.2} {:>8.2} {:>8.2}",
            m.model, m.n_records, m.mean_prr, m.std_prr, m.cv_prr
        );
    }
    println!(
        "most even: {}   strongest mean: {}",
        disparity.cv_prr_ranking[0], disparity.mean_prr_ranking[0]
    );
    for p in &paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn print_test(label: &str, t: &TestResult) {
    println!(
        "{label:<28} statistic {:>8.4}   p {:.3e}",
        t.statistic, t.p_value
    );
}

fn cmd_diagnose(input: &InputArgs, output: &OutputArgs, center: LeveneCenter) -> Result<()> {
    let c = input.load()?;
    let paths = output.prepare(&[
        "diagnostics.json",
        "qq_residuals.csv",
        "qq_random_effects.csv",
        "residuals_vs_fitted.csv",
    ])?;
    let fit = fit_lmm(&c)?;
    let diag = diagnose(&fit, &c, ResidualKind::Conditional, center)?;
    report::write_diagnostics_json(&diag, &paths[0])?;
    report::write_qq_csv(&diag.qq_residuals, &paths[1])?;
    report::write_qq_csv(&diag.qq_random_effects, &paths[2])?;
    report::write_residuals_vs_fitted_csv(&diag, &paths[3])?;

    describe(&c);
    print_test("residual normality", &diag.residual_normality);
    match &diag.random_effect_normality {
        Some(t) => print_test("random-effect normality", t),
        None => println!("random-effect normality      skipped (fewer than 3 models)"),
    }
    print_test("variance homogeneity", &diag.variance_homogeneity);
    for p in &paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_robustness(input: &InputArgs, output: &OutputArgs, k: usize) -> Result<()> {
    let c = input.load()?;
    let paths = output.prepare(&["robustness.json"])?;
    let rob = robustness_refit(&c, k)?;
    report::write_robustness_json(&rob, &paths[0])?;

    describe(&c);
    println!("dropped {} records with the largest residuals:", rob.k);
    for d in &rob.dropped {
        println!(
            "  #{:<5} {:<24} {:<6} {:<26} residual {:>8.2}",
            d.index, d.model, d.language, d.task, d.residual
        );
    }
    println!(
        "mean-PRR ranking {}",
        if rob.mean_ranking_changed() {
            "changed"
        } else {
            "unchanged"
        }
    );
    if rob.cv_ranking_changed() {
        println!("CV-PRR ranking changed:");
        for s in rob.cv_rank_shifts.iter().filter(|s| s.before != s.after) {
            println!("  {:<24} {} -> {}", s.model, s.before, s.after);
        }
    } else {
        println!("CV-PRR ranking unchanged");
    }
    println!("wrote {}", paths[0].display());
    Ok(())
}

fn cmd_compare(
    input: &InputArgs,
    output: &OutputArgs,
    records_b: Option<&std::path::Path>,
    fixture_b: &str,
) -> Result<()> {
    let c_a = input.load()?;
    let c_b = load_input(records_b, fixture_b)?;
    let paths = output.prepare(&["compare.json"])?;
    let fit_a = fit_lmm(&c_a)?;
    let fit_b = fit_lmm(&c_b)?;
    let result = compare_fits(&fit_a, &fit_b)?;
    report::write_compare_json(&result, &paths[0])?;

    println!("{} shared languages", result.shared_languages.len());
    print_test("rank correlation (Spearman)", &result.spearman);
    print_test("rank correlation (Kendall)", &result.kendall);
    println!("wrote {}", paths[0].display());
    Ok(())
}

fn cmd_baseline(input: &InputArgs, output: &OutputArgs, task: Option<&str>) -> Result<()> {
    let c = input.load()?;
    let paths = output.prepare(&["baseline_languages.csv", "baseline_models.csv"])?;
    let task_id = task.map(TaskId::parse).transpose()?;
    let languages = baseline_language_means(&c, task_id.as_ref())?;
    let models = baseline_model_stats(&c, task_id.as_ref())?;
    report::write_baseline_languages_csv(&languages, &paths[0])?;
    report::write_baseline_models_csv(&models, &paths[1])?;

    describe(&c);
    if let Some(t) = &task_id {
        println!("restricted to task {t}");
    }
    println!(
        "{:<12} {:>10} {:>6} {:>8}",
        "Language", "MeanScore", "Rank", "Records"
    );
    for b in &languages {
        println!(
            "{:<12} {:>10.2} {:>6} {:>8}",
            b.language, b.mean_score, b.rank, b.n_records
        );
    }
    println!(
        "{:<24} {:>5} {:>8} {:>8} {:>8}",
        "Model", "N", "Mean", "Std", "CV"
    );
    for m in &models {
        println!(
            "{:<24} {:>5} {:>8.2} {:>8.2} {:>8.2}",
            m.model, m.n_records, m.mean_score, m.std_score, m.cv_score
        );
    }
    for p in &paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

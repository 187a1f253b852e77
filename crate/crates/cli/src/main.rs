//! `opaque`: command-line front end for the structured-prior toolkit.
//!
//! Exit codes: 0 on success, 1 for usage, file and schema errors, 2 when a
//! computation fails numerically. Errors go to stderr as one JSON object.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use opaque_core::cfa::{self, CfaParams, FitSettings};
use opaque_core::chol::{derive_structure, derive_structure_blockwise, sample_structured_cov_batch};
use opaque_core::error::{Error, Result};
use opaque_core::pattern::{parse_pattern, MatrixPattern};
use opaque_core::prior::{self, sample_structured_corr, write_accepted_csv, UnivariatePrior};
use opaque_core::reproduce::{self, curve_figure, write_sbc_outputs, Output, Section};
use opaque_core::savage_dickey::{restricted_assignment, savage_dickey, Mode, SavageDickeyInput};
use opaque_core::sbc::{parse_config, sbc_run};
use opaque_core::table::SampleTable;
use opaque_core::threshold::{curves_table, emit_curves, ScaleParam, ThresholdPriorSpec, Translation};

use manifest::{io_err, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "opaque", version, about = "Structured priors for covariance and factor models")]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: available parallelism). Results do not
    /// depend on this.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rejection-sample correlation matrices implied by per-entry priors.
    ImpliedPrior(ImpliedPriorArgs),
    /// Classify the Cholesky factor of a pattern; optionally sample from it.
    CholStructure(CholArgs),
    /// Savage-Dickey Bayes factor for one or two correlations at zero.
    SavageDickey(SavageDickeyArgs),
    /// Confirmatory factor analysis.
    #[command(subcommand)]
    Cfa(CfaCommand),
    /// Simulation-based calibration.
    #[command(subcommand)]
    Sbc(SbcCommand),
    /// Implied marginal priors of ordered thresholds.
    ThresholdPrior(ThresholdArgs),
    /// Rerun a reference experiment and write a pass/fail summary.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct ImpliedPriorArgs {
    #[arg(long)]
    pattern: PathBuf,
    #[arg(long)]
    priors: PathBuf,
    /// Number of proposals.
    #[arg(long, default_value_t = 100_000)]
    n: u64,
}

#[derive(Debug, Args)]
struct CholArgs {
    #[arg(long)]
    pattern: PathBuf,
    /// Reorder variables into blocks before classifying.
    #[arg(long)]
    blockwise: bool,
    /// Draw this many covariance matrices into `--out`.
    #[arg(long)]
    sample: Option<usize>,
    /// `{"diagonal": prior, "off_diagonal": prior}` for the factor entries.
    #[arg(long)]
    priors: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Naive,
    Corrected,
}

#[derive(Debug, Args)]
struct SavageDickeyArgs {
    #[arg(long)]
    pattern: PathBuf,
    #[arg(long)]
    priors: PathBuf,
    /// Comma-separated entry labels, e.g. `y2~~y4,y2~~y6`.
    #[arg(long)]
    focal: String,
    /// Posterior draws, one column per entry label.
    #[arg(long)]
    posterior: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Corrected)]
    mode: ModeArg,
    #[arg(long, default_value_t = 100_000)]
    n_prior: u64,
    /// Comma-separated nuisance entries whose prior shifts under the null.
    #[arg(long)]
    nuisance: Option<String>,
}

#[derive(Debug, Subcommand)]
enum CfaCommand {
    /// Fit a model by Gibbs sampling.
    Fit(CfaFitArgs),
    /// Simulate data with every free loading set to one value.
    Simulate(CfaSimulateArgs),
}

#[derive(Debug, Args)]
struct CfaFitArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    priors: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 3)]
    chains: usize,
    #[arg(long, default_value_t = 500)]
    warmup: usize,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Flip factor signs so each focal loading is positive.
    #[arg(long)]
    relabel: bool,
    /// Comma-separated focal items, one per factor.
    #[arg(long)]
    focal: Option<String>,
}

#[derive(Debug, Args)]
struct CfaSimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Rows to simulate.
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    loading: f64,
}

#[derive(Debug, Subcommand)]
enum SbcCommand {
    /// Run a calibration study.
    Run(SbcRunArgs),
}

#[derive(Debug, Args)]
struct SbcRunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for per-simulation records, rank histograms and figures.
    #[arg(long)]
    plots: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TranslationArg {
    Reorder,
    #[value(alias = "lognormal-increment")]
    Logincrement,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ParamArg {
    Variance,
    Sd,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Number of thresholds.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mean: f64,
    /// Second argument of the declared normal.
    #[arg(long, default_value_t = 5.0)]
    sd_arg: f64,
    /// Whether `--sd-arg` is a variance or a standard deviation.
    #[arg(long, value_enum, default_value_t = ParamArg::Variance)]
    param: ParamArg,
    #[arg(long, value_enum)]
    translation: TranslationArg,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Section id, or `all`.
    #[arg(long)]
    section: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report_error("usage", &e.render().to_string(), None, 1);
            return ExitCode::from(1);
        }
    };
    let workers = cli
        .workers
        .map(|w| w as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let arguments: Vec<String> = std::env::args().skip(1).collect();
    match opaque_core::rng::with_workers(workers, || run(&cli, arguments, workers)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.is_numerical() { 2 } else { 1 };
            let path = match &e {
                Error::Schema { path, .. } => Some(path.clone()),
                Error::Io { path, .. } => Some(path.display().to_string()),
                _ => None,
            };
            report_error(error_kind(&e), &e.to_string(), path, code);
            ExitCode::from(code)
        }
    }
}

fn report_error(kind: &str, message: &str, path: Option<String>, code: u8) {
    let mut v = json!({"error": kind, "message": message.trim_end(), "exit_code": code});
    if let Some(p) = path {
        v["path"] = json!(p);
    }
    eprintln!("{v}");
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Pattern(_) => "pattern",
        Error::Prior(_) => "prior",
        Error::Model(_) => "model",
        Error::InvalidArgument(_) | Error::TooFewPoints { .. } => "invalid_argument",
        Error::Schema { .. } => "schema",
        Error::Io { .. } => "io",
        Error::Csv(_) => "csv",
        _ => "numerical",
    }
}

fn svg_enabled() -> bool {
    std::env::var("OPAQUE_NO_SVG").map_or(true, |v| v != "1")
}

fn require_out<'a>(out: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    out.as_deref()
        .ok_or_else(|| Error::InvalidArgument(format!("--out <path> is required: {what}")))
}

fn dir_of(file: &Path) -> PathBuf {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn create_parent(file: &Path) -> Result<()> {
    let d = dir_of(file);
    std::fs::create_dir_all(&d).map_err(|e| io_err(&d, e))
}

fn write_table(t: &SampleTable, path: &Path) -> Result<()> {
    create_parent(path)?;
    t.write_csv_file(path)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn entry_list(pattern: &MatrixPattern, list: &str) -> Result<Vec<(usize, usize)>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| pattern.parse_entry_label(s))
        .collect()
}

fn run(cli: &Cli, arguments: Vec<String>, workers: usize) -> Result<()> {
    let manifest = |cmd: &str| RunManifest::new(cmd, arguments.clone(), cli.seed, workers);
    match &cli.command {
        Command::ImpliedPrior(a) => implied_prior(cli, a, manifest("implied-prior")),
        Command::CholStructure(a) => chol_structure(cli, a, manifest("chol-structure")),
        Command::SavageDickey(a) => savage_dickey_cmd(cli, a, manifest("savage-dickey")),
        Command::Cfa(CfaCommand::Fit(a)) => cfa_fit(cli, a, manifest("cfa fit")),
        Command::Cfa(CfaCommand::Simulate(a)) => cfa_simulate(cli, a, manifest("cfa simulate")),
        Command::Sbc(SbcCommand::Run(a)) => sbc_cmd(cli, a, manifest("sbc run")),
        Command::ThresholdPrior(a) => threshold_prior(cli, a, manifest("threshold-prior")),
        Command::Reproduce(a) => reproduce_cmd(cli, a, manifest("reproduce")),
    }
}

fn implied_prior(cli: &Cli, a: &ImpliedPriorArgs, mut m: RunManifest) -> Result<()> {
    let out = require_out(&cli.out, "accepted draws are written there")?;
    let pattern = parse_pattern(&m.read_input("pattern", &a.pattern)?)?;
    let assignment = prior::parse_priors(&m.read_input("priors", &a.priors)?, &pattern)?;
    let result = sample_structured_corr(&assignment, a.n, cli.seed)?;
    create_parent(out)?;
    write_accepted_csv(&result, out)?;
    m.write_to(&[dir_of(out)])?;
    println!(
        "proposals {}  accepted {}  rejected {}  rejection_rate {:.5}",
        result.n_proposed,
        result.n_accepted(),
        result.n_rejected,
        result.rejection_rate()
    );
    Ok(())
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct CholPriorsDoc {
    diagonal: UnivariatePrior,
    off_diagonal: UnivariatePrior,
}

fn chol_structure(cli: &Cli, a: &CholArgs, mut m: RunManifest) -> Result<()> {
    let pattern = parse_pattern(&m.read_input("pattern", &a.pattern)?)?;
    let s = if a.blockwise {
        derive_structure_blockwise(&pattern)?
    } else {
        derive_structure(&pattern)?
    };
    let rows = s.table();
    let w = rows.iter().map(|(r, c, _)| r.len().max(c.len())).max().unwrap_or(3).max(3);
    println!("{:<w$}  {:<w$}  class", "row", "col");
    for (r, c, k) in &rows {
        println!("{r:<w$}  {c:<w$}  {k}");
    }
    let Some(n) = a.sample else {
        return Ok(());
    };
    let out = require_out(&cli.out, "sampled matrices are written there")?;
    let (diag, off) = match &a.priors {
        Some(p) => {
            let text = m.read_input("priors", p)?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            let doc: CholPriorsDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
            (doc.diagonal, doc.off_diagonal)
        }
        None => (
            UnivariatePrior::Gamma { shape: 1.0, rate: 0.5 },
            UnivariatePrior::Normal { mean: 0.0, variance: 1.0 },
        ),
    };
    let draws = sample_structured_cov_batch(&s, &diag, &off, n, cli.seed)?;
    let names = s.names();
    let mut labels = Vec::new();
    for i in 0..s.dim() {
        for j in 0..=i {
            labels.push(format!("{}~~{}", names[i], names[j]));
        }
    }
    let mut t = SampleTable::new(labels)?;
    for d in &draws {
        let row: Vec<f64> = (0..s.dim()).flat_map(|i| (0..=i).map(move |j| (i, j))).map(|(i, j)| d.get(i, j)).collect();
        t.push_row(&row);
    }
    write_table(&t, out)?;
    m.write_to(&[dir_of(out)])
}

fn savage_dickey_cmd(cli: &Cli, a: &SavageDickeyArgs, mut m: RunManifest) -> Result<()> {
    let pattern = parse_pattern(&m.read_input("pattern", &a.pattern)?)?;
    let declared = prior::parse_priors(&m.read_input("priors", &a.priors)?, &pattern)?;
    let posterior = SampleTable::read_csv(m.read_input("posterior", &a.posterior)?.as_bytes())?;
    let focal = entry_list(&pattern, &a.focal)?;
    let prior_draws = sample_structured_corr(&declared, a.n_prior, cli.seed)?;
    let mut input = SavageDickeyInput::from_pattern(&declared, &focal, &prior_draws, &posterior)?;
    if let Some(list) = &a.nuisance {
        let nuisance = entry_list(&pattern, list)?;
        let restricted = sample_structured_corr(&restricted_assignment(&declared, &focal)?, a.n_prior, cli.seed.wrapping_add(1))?;
        input = input.with_nuisance(&pattern, &nuisance, &restricted)?;
    }
    let mode = match a.mode {
        ModeArg::Naive => Mode::Naive,
        ModeArg::Corrected => Mode::Corrected,
    };
    let report = savage_dickey(&input, mode)?;
    let mut v = serde_json::to_value(report).expect("report serializes");
    v["focal"] = json!(input.focal);
    v["log_bf10"] = json!(report.log_bf10());
    let text = serde_json::to_string_pretty(&v).expect("report serializes") + "\n";
    print!("{text}");
    if let Some(out) = &cli.out {
        write_text(out, &text)?;
        m.write_to(&[dir_of(out)])?;
    }
    Ok(())
}

fn load_model(m: &mut RunManifest, path: &Path, focal: Option<&str>) -> Result<cfa::CfaModel> {
    let model = cfa::parse_model(&m.read_input("model", path)?)?;
    let Some(list) = focal else {
        return Ok(model);
    };
    let idx = list
        .split(',')
        .map(str::trim)
        .map(|n| {
            model
                .item_names()
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown focal item '{n}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    model.with_focal(idx)
}

fn cfa_fit(cli: &Cli, a: &CfaFitArgs, mut m: RunManifest) -> Result<()> {
    let out = require_out(&cli.out, "posterior draws are written there")?;
    let model = load_model(&mut m, &a.model, a.focal.as_deref())?;
    let priors = cfa::parse_priors(&m.read_input("priors", &a.priors)?)?;
    let data = SampleTable::read_csv(m.read_input("data", &a.data)?.as_bytes())?;
    let settings = FitSettings {
        chains: a.chains,
        warmup: a.warmup,
        iters: a.iters,
        seed: cli.seed,
    };
    let mut draws = cfa::gibbs_fit(&model, &priors, &data, &settings)?;
    if a.relabel {
        draws = cfa::relabel(&draws, &model)?;
    }
    write_table(&draws.table, out)?;
    m.write_to(&[dir_of(out)])?;
    for (name, mean) in draws.means(&model)? {
        println!("{name:<12} {mean:>10.4}");
    }
    Ok(())
}

fn cfa_simulate(cli: &Cli, a: &CfaSimulateArgs, mut m: RunManifest) -> Result<()> {
    let out = require_out(&cli.out, "simulated data are written there")?;
    let model = load_model(&mut m, &a.model, None)?;
    let data = cfa::generate_data(&model, &CfaParams::uniform(&model, a.loading), a.n, cli.seed)?;
    write_table(&data, out)?;
    m.write_to(&[dir_of(out)])
}

fn sbc_cmd(cli: &Cli, a: &SbcRunArgs, mut m: RunManifest) -> Result<()> {
    let out = require_out(&cli.out, "the per-parameter report is written there")?;
    let config = parse_config(&m.read_input("config", &a.config)?, cli.seed)?;
    let report = sbc_run(&config)?;
    let mut buf = Vec::new();
    report.summary_csv(&mut buf)?;
    create_parent(out)?;
    std::fs::write(out, &buf).map_err(|e| io_err(out, e))?;
    let mut dirs = vec![dir_of(out)];
    if let Some(plots) = &a.plots {
        std::fs::create_dir_all(plots).map_err(|e| io_err(plots, e))?;
        let o = Output {
            dir: plots.clone(),
            svg: svg_enabled(),
        };
        write_sbc_outputs(&report, &o, &mut Vec::new())?;
        dirs.push(plots.clone());
    }
    m.write_to(&dirs)?;
    for p in &report.parameters {
        let sign = p.sign.map_or("-".to_string(), |s| format!("{} (r={:.3}, |r|={:.3})", s.verdict, s.corr_signed, s.corr_abs));
        println!("{:<12} rank p={:.4}  sign {sign}", p.name, p.p_value);
    }
    if let Ok(v) = reproduce::pooled_verdict(&report) {
        println!(
            "pooled loadings: verdict {}  r={:.3}  rank p={}",
            v.verdict,
            v.corr_signed,
            report.pooled_loading_p_value.map_or("-".into(), |p| format!("{p:.4}"))
        );
    }
    for (sim, why) in &report.excluded {
        println!("excluded sim {sim}: {why}");
    }
    Ok(())
}

fn threshold_prior(cli: &Cli, a: &ThresholdArgs, m: RunManifest) -> Result<()> {
    let out = require_out(&cli.out, "curves are written there")?;
    let translation = match a.translation {
        TranslationArg::Reorder => Translation::Reorder,
        TranslationArg::Logincrement => Translation::LognormalIncrement,
    };
    let param = match a.param {
        ParamArg::Variance => ScaleParam::Variance,
        ParamArg::Sd => ScaleParam::Sd,
    };
    let spec = ThresholdPriorSpec::declared(a.n, a.mean, a.sd_arg, param, translation)?;
    let curves = emit_curves(&spec, cli.seed)?;
    write_table(&curves_table(&curves)?, out)?;
    let mut dirs = vec![dir_of(out)];
    if let (Some(svg), true) = (&a.svg, svg_enabled()) {
        write_text(svg, &curve_figure(&curves, "Implied threshold priors").to_svg())?;
        dirs.push(dir_of(svg));
    }
    m.write_to(&dirs)?;
    for c in &curves {
        let name = if c.which == 0 { "base".to_string() } else { format!("g{}", c.which) };
        println!("{name:<5} mode {:>9.4}  mean {:>9.4}  mass {:.5}", c.mode(), c.mean(), c.trapezoid_mass());
    }
    Ok(())
}

fn reproduce_cmd(cli: &Cli, a: &ReproduceArgs, m: RunManifest) -> Result<()> {
    let out = require_out(&cli.out, "reports are written into that directory")?;
    let sections: Vec<(Section, PathBuf)> = if a.section == "all" {
        Section::ALL.iter().map(|&s| (s, out.join(s.id()))).collect()
    } else {
        vec![(a.section.parse()?, out.to_path_buf())]
    };
    let mut failed = 0;
    for (section, dir) in sections {
        let o = Output {
            dir: dir.clone(),
            svg: svg_enabled(),
        };
        let report = reproduce::reproduce(section, cli.seed, &o)?;
        m.write_to(&[dir])?;
        for c in &report.checks {
            println!(
                "{} {section} {}: measured {} target {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.target
            );
        }
        failed += usize::from(!report.passed());
    }
    if failed > 0 {
        println!("{failed} section(s) with failing checks");
    }
    Ok(())
}

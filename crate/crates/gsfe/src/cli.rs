//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gsfe_core::dgp::simulate_population;
use gsfe_core::exposure::compute_exposures;
use gsfe_core::fe::fit;
use gsfe_core::harness::{run_placebos, run_study, Panel, Sample, SpecResult};
use gsfe_core::oracle::{
    att_survivors_enumerate, attenuation_check, attenuation_fit, bias_oracle, ols_bias_closed_form, AttReport,
    AttenuationReport, BiasPrediction, OracleCheck,
};
use gsfe_core::panel::{Gender, RowDiagnostic};
use gsfe_core::report::{placebo_table, render_study, results_table, study_tables, term_label, TextTable};
use gsfe_core::rng::{derive_seed, Domain};
use serde::Serialize;

use crate::config::{Inputs, RunConfig};
use crate::error::{CliError, Result};
use crate::exec::Parallel;
use crate::io;
use crate::manifest::Manifest;

pub const ERROR_FILE: &str = "error.json";
const DEFAULT_OUT: &str = "gsfe-out";
const DEFAULT_REPS: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "gsfe", version, about = "Selection-bias laboratory for sibling fixed-effects designs")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; required by every stochastic step.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Monte Carlo replications.
    #[arg(long, global = true, value_name = "N")]
    pub reps: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    #[arg(long, value_name = "PATH")]
    pub persons: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub death_rates: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub exposures: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic population and write it as CSV with its truth.
    Simulate,
    /// Compute exposures from persons and death rates.
    Exposure(InputArgs),
    /// Fit the [fit] specification.
    Fit(InputArgs),
    /// Run the full regression battery.
    Study(InputArgs),
    /// Compare closed-form predictions with Monte Carlo estimates.
    Oracle,
    /// Shifted-exposure placebo regressions.
    Placebo(InputArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Exposure(_) => "exposure",
            Command::Fit(_) => "fit",
            Command::Study(_) => "study",
            Command::Oracle => "oracle",
            Command::Placebo(_) => "placebo",
        }
    }

    fn inputs(&self) -> Option<&InputArgs> {
        match self {
            Command::Exposure(a) | Command::Fit(a) | Command::Study(a) | Command::Placebo(a) => Some(a),
            _ => None,
        }
    }
}

/// Parses `args`, runs, and returns the process exit status. Failures are
/// reported on stderr and as `error.json` in the output directory.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let _ = e.print();
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            let err = CliError::Usage(first.trim_start_matches("error: ").to_string());
            write_error(Path::new("."), &err);
            return err.exit_code();
        }
    };
    let mut out = cli.out.clone();
    match run(&cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let dir = out.unwrap_or_else(|| PathBuf::from("."));
            write_error(&dir, &e);
            e.exit_code()
        }
    }
}

fn write_error(dir: &Path, e: &CliError) {
    let dir = if std::fs::create_dir_all(dir).is_ok() { dir } else { Path::new(".") };
    let _ = io::write_json(&dir.join(ERROR_FILE), &e.to_json());
}

/// Loads the configuration and applies command-line overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.reps.is_some() {
        cfg.reps = cli.reps;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if let Some(a) = cli.command.inputs() {
        let set = |dst: &mut Option<PathBuf>, src: &Option<PathBuf>| {
            if src.is_some() {
                *dst = src.clone();
            }
        };
        set(&mut cfg.inputs.persons, &a.persons);
        set(&mut cfg.inputs.death_rates, &a.death_rates);
        set(&mut cfg.inputs.exposures, &a.exposures);
    }
    cfg.resolve();
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, out_slot: &mut Option<PathBuf>) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    *out_slot = Some(out.clone());
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::config("out", format!("cannot create {}: {e}", out.display())))?;
    let _ = std::fs::remove_file(out.join(ERROR_FILE));
    let name = cli.command.name();
    let reps = (name == "oracle").then(|| cfg.reps.unwrap_or(DEFAULT_REPS));
    let mut ctx = Ctx {
        manifest: Manifest::new(name, cfg.seed, reps, &cfg.canonical()),
        exec: Parallel::from_env()?,
        cfg,
        out,
    };
    match &cli.command {
        Command::Simulate => simulate(&mut ctx)?,
        Command::Exposure(_) => exposure(&mut ctx)?,
        Command::Fit(_) => fit_cmd(&mut ctx)?,
        Command::Study(_) => study(&mut ctx)?,
        Command::Oracle => oracle(&mut ctx, reps.unwrap_or(DEFAULT_REPS))?,
        Command::Placebo(_) => placebo(&mut ctx)?,
    }
    ctx.manifest.write(&ctx.out)
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    manifest: Manifest,
    exec: Parallel,
}

impl Ctx {
    fn seed(&self, why: &str) -> Result<u64> {
        self.cfg
            .seed
            .ok_or_else(|| CliError::config("seed", format!("a seed is required to {why}")))
    }

    fn emit(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        write(&self.out.join(name))?;
        self.manifest.add_artifact(&self.out, name)
    }

    fn emit_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.emit(name, |p| io::write_json(p, value))
    }

    fn emit_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.emit(name, |p| io::write_text(p, text))
    }
}

#[derive(Debug, Default, Serialize)]
struct InputDiagnostics {
    persons: Vec<RowDiagnostic>,
    death_rates: Vec<RowDiagnostic>,
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| CliError::config(key, format!("an input file is required (--{flag})")))
}

/// The panel from input files when a persons file is given, otherwise
/// simulated from [dgp].
fn load_panel(ctx: &mut Ctx) -> Result<(Panel, InputDiagnostics)> {
    let inputs: Inputs = ctx.cfg.inputs.clone();
    let mut diags = InputDiagnostics::default();
    let Some(persons_path) = &inputs.persons else {
        let seed = ctx.seed("simulate a panel")?;
        let pop = simulate_population(&ctx.cfg.dgp, seed).map_err(dgp_key)?;
        return Ok((Panel::from_population(&pop), diags));
    };
    ctx.manifest.add_input("persons", persons_path)?;
    let table = io::load_persons(persons_path, &ctx.cfg.schema)?;
    diags.persons = table.diagnostics;
    let death_rates = match &inputs.death_rates {
        Some(p) => {
            ctx.manifest.add_input("death_rates", p)?;
            let (t, d) = io::load_death_rates(p)?;
            diags.death_rates = d;
            Some(t)
        }
        None => None,
    };
    let exposures = match (&inputs.exposures, &death_rates) {
        (Some(p), _) => {
            ctx.manifest.add_input("exposures", p)?;
            io::align_exposures(&table.persons, io::load_exposures(p)?)?
        }
        (None, Some(t)) => compute_exposures(&table.persons, t, &ctx.cfg.exposure_config())?,
        (None, None) => {
            return Err(CliError::config(
                "inputs.death_rates",
                "death rates or precomputed exposures are required with a persons file",
            ))
        }
    };
    Ok((Panel::new(table.persons, exposures, death_rates, table.aux)?, diags))
}

fn report_diagnostics(ctx: &mut Ctx, d: &InputDiagnostics) -> Result<()> {
    if !d.persons.is_empty() {
        eprintln!("{} person row(s) rejected; see diagnostics.json", d.persons.len());
    }
    if !d.death_rates.is_empty() {
        eprintln!("{} county(ies) without baseline death rates", d.death_rates.len());
    }
    ctx.emit_json("diagnostics.json", d)
}

fn simulate(ctx: &mut Ctx) -> Result<()> {
    let seed = ctx.seed("simulate")?;
    let pop = simulate_population(&ctx.cfg.dgp, seed).map_err(dgp_key)?;
    ctx.emit("persons.csv", |p| io::write_persons(p, &pop.persons, &pop.aux))?;
    if let Some(t) = &pop.death_rates {
        ctx.emit("death_rates.csv", |p| io::write_death_rates(p, t))?;
    }
    ctx.emit("exposures.csv", |p| io::write_exposures(p, &pop.exposures))?;
    ctx.emit("latents.csv", |p| io::write_latents(p, &pop.latents))?;
    ctx.emit_json("truth.json", &pop.truth)
}

fn exposure(ctx: &mut Ctx) -> Result<()> {
    let inputs = ctx.cfg.inputs.clone();
    let persons_path = required(&inputs.persons, "inputs.persons", "persons")?;
    let rates_path = required(&inputs.death_rates, "inputs.death_rates", "death-rates")?;
    ctx.manifest.add_input("persons", persons_path)?;
    ctx.manifest.add_input("death_rates", rates_path)?;
    let table = io::load_persons(persons_path, &ctx.cfg.schema)?;
    let (rates, rate_diags) = io::load_death_rates(rates_path)?;
    let exposures = compute_exposures(&table.persons, &rates, &ctx.cfg.exposure_config())?;
    ctx.emit("exposures.csv", |p| io::write_exposures(p, &exposures))?;
    report_diagnostics(
        ctx,
        &InputDiagnostics {
            persons: table.diagnostics,
            death_rates: rate_diags,
        },
    )
}

#[derive(Serialize)]
struct FitOutput<'a> {
    n_sample: usize,
    result: &'a SpecResult,
}

fn fit_cmd(ctx: &mut Ctx) -> Result<()> {
    let spec = ctx
        .cfg
        .fit
        .clone()
        .ok_or_else(|| CliError::config("fit", "a [fit] section with the regression specification is required"))?;
    let (panel, diags) = load_panel(ctx)?;
    report_diagnostics(ctx, &diags)?;
    let plan = &ctx.cfg.study;
    let sample = Sample::new(&panel, plan, &plan.cohort_filter)?;
    let result = fit(&spec, &sample.frame, &ctx.cfg.fit_options())?;
    let r = SpecResult {
        label: "(1)".into(),
        outcome: spec.outcome.clone(),
        terms: spec.regressors.clone(),
        spec: Some(spec.clone()),
        fit: Some(result),
        error: None,
    };
    let table = results_table(
        &spec.outcome,
        vec![vec![String::new(), r.label.clone()]],
        &[&r],
        &term_label,
    );
    ctx.emit_json(
        "fit.json",
        &FitOutput {
            n_sample: sample.len(),
            result: &r,
        },
    )?;
    ctx.emit_text("fit.txt", &table.render())
}

fn emit_tables(ctx: &mut Ctx, prefix: &str, tables: &[TextTable]) -> Result<()> {
    for (k, t) in tables.iter().enumerate() {
        ctx.emit_text(&format!("{prefix}_{:02}.csv", k + 1), &t.to_csv())?;
    }
    Ok(())
}

fn study(ctx: &mut Ctx) -> Result<()> {
    let (panel, diags) = load_panel(ctx)?;
    report_diagnostics(ctx, &diags)?;
    let report = run_study(&ctx.exec, &ctx.cfg.study, &panel)?;
    ctx.emit_json("study.json", &report)?;
    ctx.emit_text("study.txt", &render_study(&report))?;
    emit_tables(ctx, "table", &study_tables(&report))
}

fn placebo(ctx: &mut Ctx) -> Result<()> {
    let (panel, diags) = load_panel(ctx)?;
    report_diagnostics(ctx, &diags)?;
    let plan = &ctx.cfg.study;
    let sample = Sample::new(&panel, plan, &plan.cohort_filter)?;
    let report = run_placebos(&ctx.exec, plan, &sample)?;
    let table = placebo_table(&report);
    ctx.emit_json("placebo.json", &report)?;
    ctx.emit_text("placebo.txt", &table.render())?;
    emit_tables(ctx, "placebo", &[table])
}

#[derive(Debug, Serialize)]
struct OracleOutput {
    pass: bool,
    replications: usize,
    predictions: Vec<BiasPrediction>,
    checks: Vec<OracleCheck>,
    attenuation: Option<AttenuationReport>,
    discrete: Vec<AttReport>,
}

fn oracle(ctx: &mut Ctx, reps: usize) -> Result<()> {
    let seed = ctx.seed("run Monte Carlo replications")?;
    let dgp = &ctx.cfg.dgp;
    let predictions = vec![
        ols_bias_closed_form(dgp, Gender::Male).map_err(dgp_key)?,
        ols_bias_closed_form(dgp, Gender::Female).map_err(dgp_key)?,
    ];
    let mut checks = bias_oracle(&ctx.exec, dgp, reps, seed).map_err(dgp_key)?;
    let attenuation = match dgp.attenuation {
        Some(_) => {
            let panel = gsfe_core::dgp::simulate_attenuation_panel(dgp, derive_seed(seed, Domain::Replication, u64::MAX))
                .map_err(dgp_key)?;
            let report = attenuation_check(dgp, &attenuation_fit(&panel)?)?;
            checks.push(OracleCheck::new(
                "attenuation_ratio",
                report.predicted_ratio,
                report.fitted_ratio,
                ctx.cfg.oracle.attenuation_tol * report.predicted_ratio.abs(),
            ));
            Some(report)
        }
        None => None,
    };
    let mut discrete = Vec::with_capacity(ctx.cfg.oracle.discrete.len());
    for (k, inst) in ctx.cfg.oracle.discrete.iter().enumerate() {
        let r = att_survivors_enumerate(inst)?;
        checks.push(OracleCheck::new(
            format!("discrete_{}_identity", k + 1),
            r.conditional_mean,
            r.plim_formula,
            1e-12,
        ));
        discrete.push(r);
    }
    let output = OracleOutput {
        pass: checks.iter().all(|c| c.pass),
        replications: reps,
        predictions,
        checks,
        attenuation,
        discrete,
    };
    let text = render_oracle(&output);
    ctx.emit_json("oracle.json", &output)?;
    ctx.emit_text("oracle.txt", &text)
}

/// Config errors raised on the [dgp] section, keyed by their full path.
fn dgp_key(e: gsfe_core::Error) -> CliError {
    match e {
        gsfe_core::Error::Config { key, message } => CliError::config(&format!("dgp.{key}"), message),
        other => other.into(),
    }
}

fn render_oracle(o: &OracleOutput) -> String {
    let rows = o
        .checks
        .iter()
        .map(|c| {
            vec![
                c.name.clone(),
                format!("{:.6}", c.predicted),
                format!("{:.6}", c.estimated),
                format!("{:.6}", c.deviation),
                format!("{:.6}", c.tolerance),
                if c.pass { "pass" } else { "FAIL" }.to_string(),
            ]
        })
        .collect();
    let table = TextTable {
        title: "Oracle checks".into(),
        header: vec![["check", "predicted", "estimated", "deviation", "tolerance", ""]
            .map(String::from)
            .to_vec()],
        rows,
        notes: vec![format!("{} Monte Carlo replications.", o.replications)],
    };
    let mut s = table.render();
    let _ = writeln!(s, "Overall: {}", if o.pass { "pass" } else { "FAIL" });
    s
}

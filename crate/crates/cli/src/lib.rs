//! `amp` — command-line driver for the sample-amplification library.
//!
//! Subcommands: `amplify`, `mstar`, `bound`, `verify`, `experiment`,
//! `certify`. Every run is deterministic given its flags: randomness is
//! a counter-based generator seeded by `--seed`, so rerunning a command
//! reproduces its output byte for byte.
//!
//! Exit codes: 0 on success, 1 for validation or other recoverable
//! failures, 2 when the request is mathematically impossible (not merely
//! unimplemented), such as amplifying a rank-d covariance from fewer
//! than d observations.

pub mod config;
pub mod io;
pub mod setup;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use amp_core::lower_bounds::product_lower_certificate;
use amp_core::numerics::RngState;
use amp_core::verify::{detector_battery, tv_mc_suffstat, AmplifierClass};
use amp_core::{AmpError, Result};

use config::Task;
use io::{ReportRow, VerifierRow};
use setup::FamilyOptions;

#[derive(Parser)]
#[command(
    name = "amp",
    version,
    about = "Turn n i.i.d. samples into n + m with a certified total-variation error"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Amplify a sample: read or draw n observations, emit n + m.
    Amplify(AmplifyArgs),
    /// Largest m whose certified error stays within --eps.
    Mstar(MstarArgs),
    /// Certified error of a method at (n, m), without running it.
    Bound(BoundArgs),
    /// Run the detector battery against an amplifier or baseline.
    Verify(VerifyArgs),
    /// Run a seeded grid of computations from a config file.
    Experiment(ExperimentArgs),
    /// Monte Carlo lower-bound certificate for a product family.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct AmplifyArgs {
    /// Family name (see README for the list).
    #[arg(long)]
    family: String,
    /// Data dimension, or alphabet size for symbol families.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Sample size to draw; with --input, must match the file if given.
    #[arg(long)]
    n: Option<usize>,
    /// Number of additional samples to produce.
    #[arg(long)]
    m: usize,
    /// Amplification method: sufficiency or shuffle.
    #[arg(long, default_value = "sufficiency")]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Input sample CSV; drawn from the canonical family when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output CSV for the n + m rows (stdout when absent); a report row
    /// goes to the sibling file <output stem>.report.csv.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MstarArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    n: usize,
    /// Search ceiling for m (default one million).
    #[arg(long)]
    m: Option<usize>,
    /// Error budget in [0, 1].
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value = "sufficiency")]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional CSV report (one row, at m = m*).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// sufficiency, shuffle, or exact (Gaussian mean only).
    #[arg(long, default_value = "sufficiency")]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Amplifier (sufficiency, shuffle) or baseline to test
    /// (copy_append, plain_append, uniform_fake).
    #[arg(long, default_value = "sufficiency")]
    method: String,
    /// Detector level (false-rejection rate on genuine data).
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Candidate replicates per detector.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Optional verifier CSV (one row per detector).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Config file of flat key = value lines (see README).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CertifyArgs {
    /// Scalar component: gaussian_unit_variance, poisson, exponential,
    /// or bernoulli.
    #[arg(long)]
    family: String,
    /// Number of product coordinates.
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    n: usize,
    /// Amplification amount to refute; defaults to ceil(n / sqrt(dim)).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo replicates per total-variation estimate.
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    /// Optional CSV report (one certificate_gap row).
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Parse and run a full command line (excluding or including the binary
/// name — clap expects it as the first element). Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successes; anything else is a
            // validation failure (exit 2 is reserved for impossibility).
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.cmd {
        Cmd::Amplify(a) => cmd_amplify(a),
        Cmd::Mstar(a) => cmd_mstar(a),
        Cmd::Bound(a) => cmd_bound(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Experiment(a) => cmd_experiment(a),
        Cmd::Certify(a) => cmd_certify(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            match e {
                AmpError::Impossibility(_) => 2,
                _ => 1,
            }
        }
    }
}

fn opt_display(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write one report row to `path` (header + row).
fn write_report_file(path: &Path, row: ReportRow) -> Result<()> {
    let w = io::out_writer(Some(path))?;
    io::write_report_csv(w, &[row])
}

fn cmd_amplify(a: AmplifyArgs) -> Result<i32> {
    let family = setup::build_family(&a.family, a.dim, &FamilyOptions::default())?;
    let mut rng = RngState::new(a.seed, 0);
    let data = match &a.input {
        Some(path) => {
            let data = io::read_dataset_csv(path, &family.spec())?;
            if let Some(n) = a.n {
                if n != data.rows.nrows() {
                    return Err(AmpError::validation(format!(
                        "--n {} does not match the {} rows in {}",
                        n,
                        data.rows.nrows(),
                        path.display()
                    )));
                }
            }
            data
        }
        None => {
            let n = a.n.ok_or_else(|| {
                AmpError::validation("--n is required when no --input sample is given")
            })?;
            family.sample(n, &mut rng)?
        }
    };
    let n = data.rows.nrows();
    let outcome = setup::run_amplifier(&family, &data, a.m, &a.method, &mut rng)?;

    let report = ReportRow {
        family: a.family.clone(),
        d: a.dim,
        n,
        m: a.m,
        method: a.method.clone(),
        kind: "bound".into(),
        value: Some(outcome.bound.value),
        stderr: outcome.bound.stderr,
        formula: outcome.bound.formula.clone(),
        seed: a.seed,
        error: String::new(),
    };
    eprintln!(
        "amplified {n} -> {} rows with {} (bound {} stderr {} formula {})",
        n + a.m,
        outcome.method,
        outcome.bound.value,
        opt_display(outcome.bound.stderr),
        outcome.bound.formula
    );
    for note in &outcome.bound.notes {
        eprintln!("note: {note}");
    }
    match &a.output {
        Some(path) => {
            io::write_dataset_csv(io::out_writer(Some(path))?, &outcome.data)?;
            let mut report_path = path.clone();
            report_path.set_extension("report.csv");
            write_report_file(&report_path, report)?;
        }
        None => io::write_dataset_csv(io::out_writer(None)?, &outcome.data)?,
    }
    Ok(0)
}

fn cmd_mstar(a: MstarArgs) -> Result<i32> {
    let family = setup::build_family(&a.family, a.dim, &FamilyOptions::default())?;
    let ceiling = a.m.unwrap_or(1_000_000);
    let m_star = setup::largest_amplification(&family, a.n, a.eps, &a.method, ceiling)?;
    let (report, kind) = setup::compute_bound(&family, a.n, m_star, &a.method)?;
    println!(
        "family={} d={} n={} eps={} method={} m_star={} error_at_m_star={}",
        a.family, a.dim, a.n, a.eps, a.method, m_star, report.value
    );
    if let Some(path) = &a.output {
        write_report_file(
            path,
            ReportRow {
                family: a.family.clone(),
                d: a.dim,
                n: a.n,
                m: m_star,
                method: a.method.clone(),
                kind: kind.into(),
                value: Some(report.value),
                stderr: report.stderr,
                formula: report.formula.clone(),
                seed: a.seed,
                error: String::new(),
            },
        )?;
    }
    Ok(0)
}

fn cmd_bound(a: BoundArgs) -> Result<i32> {
    let family = setup::build_family(&a.family, a.dim, &FamilyOptions::default())?;
    let (report, kind) = setup::compute_bound(&family, a.n, a.m, &a.method)?;
    println!(
        "family={} d={} n={} m={} method={} kind={} value={} stderr={} formula={}",
        a.family,
        a.dim,
        a.n,
        a.m,
        a.method,
        kind,
        report.value,
        opt_display(report.stderr),
        report.formula
    );
    if report.unclipped != report.value {
        println!("note: formula value before clipping to [0, 1]: {}", report.unclipped);
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    if let Some(path) = &a.output {
        write_report_file(
            path,
            ReportRow {
                family: a.family.clone(),
                d: a.dim,
                n: a.n,
                m: a.m,
                method: a.method.clone(),
                kind: kind.into(),
                value: Some(report.value),
                stderr: report.stderr,
                formula: report.formula.clone(),
                seed: a.seed,
                error: String::new(),
            },
        )?;
    }
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> Result<i32> {
    let all_methods: Vec<&str> = setup::METHOD_NAMES
        .iter()
        .chain(setup::BASELINE_NAMES.iter())
        .copied()
        .filter(|m| *m != "exact")
        .collect();
    if !all_methods.contains(&a.method.as_str()) {
        return Err(AmpError::validation(format!(
            "unknown verify method '{}'; choose one of {}",
            a.method,
            all_methods.join(", ")
        )));
    }
    let family = setup::build_family(&a.family, a.dim, &FamilyOptions::default())?;
    let learner = if a.method == "plain_append" {
        Some(setup::whole_row_learner(&family)?)
    } else {
        None
    };
    let mut rng = RngState::new(a.seed, 0);
    let candidate_family = family.clone();
    let method = a.method.clone();
    let candidate = |r: &mut RngState| {
        setup::candidate_dataset(&candidate_family, a.n, a.m, &method, learner.as_ref(), r)
    };
    let reports = detector_battery(&family, a.n, a.m, candidate, a.eps, a.reps, &mut rng)?;

    let mut rows = Vec::new();
    for report in &reports {
        println!(
            "test={} level={} rejection={} tv_lower={} stderr={} replicates={}",
            report.test,
            report.level,
            report.rejection,
            report.tv_lower_estimate,
            report.stderr,
            report.replicates
        );
        for note in &report.notes {
            println!("note: {note}");
        }
        rows.push(VerifierRow {
            test: report.test.clone(),
            family: a.family.clone(),
            d: a.dim,
            n: a.n,
            m: a.m,
            method: a.method.clone(),
            level: report.level,
            rejection: report.rejection,
            tv_lower: report.tv_lower_estimate,
            stderr: report.stderr,
            seed: a.seed,
        });
    }
    if let Some(path) = &a.output {
        io::write_verifier_csv(io::out_writer(Some(path))?, &rows)?;
    }
    Ok(0)
}

fn cmd_certify(a: CertifyArgs) -> Result<i32> {
    let component = setup::component_from_name(&a.family)?;
    if a.dim == 0 || a.n == 0 {
        return Err(AmpError::validation("--dim and --n must be positive"));
    }
    let m = a
        .m
        .unwrap_or_else(|| ((a.n as f64) / (a.dim as f64).sqrt()).ceil().max(1.0) as usize);
    let mut rng = RngState::new(a.seed, 0);
    match product_lower_certificate(component, a.n, m, a.dim, a.reps, &mut rng) {
        Ok(cert) => {
            println!("{}", cert.to_key_value_block());
            if let Some(path) = &a.output {
                write_report_file(
                    path,
                    ReportRow {
                        family: a.family.clone(),
                        d: a.dim,
                        n: a.n,
                        m,
                        method: "voting_certificate".into(),
                        kind: "certificate_gap".into(),
                        value: Some(cert.bayes_risk_gap),
                        stderr: None,
                        formula: "bayes_risk_gap".into(),
                        seed: a.seed,
                        error: String::new(),
                    },
                )?;
            }
            Ok(0)
        }
        // Not a refutation: report it as the run's (successful) outcome.
        Err(AmpError::Inconclusive(msg)) => {
            println!("inconclusive: {msg}");
            Ok(0)
        }
        Err(other) => Err(other),
    }
}

/// True for failures that indicate a malformed request rather than a
/// statistical limitation of the run.
fn is_structural(e: &AmpError) -> bool {
    matches!(
        e,
        AmpError::Validation(_) | AmpError::Impossibility(_) | AmpError::Unsupported(_)
    )
}

fn run_cell(cell: &config::Cell, cfg: &config::ExperimentConfig, rng: &mut RngState) -> Result<(String, Option<f64>, Option<f64>, String)> {
    let family = setup::build_family(&cell.family, cell.dim, &cfg.opts)?;
    match cfg.task {
        Task::Bound => {
            let (report, kind) = setup::compute_bound(&family, cell.n, cell.m, &cell.method)?;
            Ok((kind.into(), Some(report.value), report.stderr, report.formula))
        }
        Task::TvMc => {
            let class = match cell.method.as_str() {
                "sufficiency" => AmplifierClass::SufficiencyIdentity,
                "shuffle" => AmplifierClass::Shuffle,
                other => {
                    return Err(AmpError::validation(format!(
                        "task tv_mc needs an amplifier method (sufficiency or shuffle), got '{other}'"
                    )))
                }
            };
            let est = tv_mc_suffstat(&family, cell.n, cell.m, class, cfg.reps, rng)?;
            Ok((
                "mc_estimate".into(),
                Some(est.value),
                Some(est.stderr),
                "tv_mc_suffstat".into(),
            ))
        }
    }
}

fn cmd_experiment(a: ExperimentArgs) -> Result<i32> {
    let mut cfg = config::parse_file(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let output: Option<PathBuf> = a.output.or_else(|| cfg.output.clone().map(PathBuf::from));
    let cells = cfg.cells()?;

    let mut rows = Vec::with_capacity(cells.len());
    let mut structural_failure = false;
    for (idx, cell) in cells.iter().enumerate() {
        // One derived stream per cell, in grid order.
        let mut rng = RngState::new(cfg.seed, 1 + idx as u64);
        let mut row = ReportRow {
            family: cell.family.clone(),
            d: cell.dim,
            n: cell.n,
            m: cell.m,
            method: cell.method.clone(),
            kind: String::new(),
            value: None,
            stderr: None,
            formula: String::new(),
            seed: cfg.seed,
            error: String::new(),
        };
        match run_cell(cell, &cfg, &mut rng) {
            Ok((kind, value, stderr, formula)) => {
                row.kind = kind;
                row.value = value;
                row.stderr = stderr;
                row.formula = formula;
            }
            Err(e) => {
                structural_failure |= is_structural(&e);
                row.error = e.to_string();
            }
        }
        rows.push(row);
    }
    io::write_report_csv(io::out_writer(output.as_deref())?, &rows)?;
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    if failed > 0 {
        eprintln!(
            "{failed} of {} grid cells failed (see the error column)",
            rows.len()
        );
    }
    Ok(if structural_failure { 1 } else { 0 })
}

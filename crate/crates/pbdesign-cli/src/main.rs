//! Command-line driver: optimize, evaluate, enumerate and compare block
//! designs described by a TOML run configuration.
//!
//! Exit codes: 0 success, 2 config parse/validation failure (including an
//! enumeration cap overflow), 3 infeasible design or no feasible design
//! found, 1 I/O failure.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{parse_config, ConfigError, Resolved};
use pbdesign::{
    anneal, balanced_reference, design_class_count, exhaustive_search, marginal_information,
    objective, relative_efficiency, BlockWeights, Criterion, Error as CoreError,
    DEFAULT_CLASS_CAP,
};
use report::{
    matrix_rows, BlockDetail, CompareReport, CompareRow, DesignReport, EvaluateReport,
    ExhaustiveReport, PriorsReport, ReferenceReport, SearchReport, SCHEMA_VERSION,
};

#[derive(Parser)]
#[command(
    name = "pbdesign",
    version,
    about = "Locally optimal block designs for Poisson mixed models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for an optimal design by simulated annealing
    Optimize(CommonArgs),
    /// Score one explicit design from the config
    Evaluate(CommonArgs),
    /// Enumerate every design class and return the exact optimum
    Enumerate(CommonArgs),
    /// Rank the config's designs by objective value
    Compare(CommonArgs),
}

impl Command {
    fn args(&self) -> &CommonArgs {
        match self {
            Command::Optimize(a)
            | Command::Evaluate(a)
            | Command::Enumerate(a)
            | Command::Compare(a) => a,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Random seed (overrides PBDESIGN_SEED and the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Criterion override: DA or C
    #[arg(long)]
    criterion: Option<String>,
    /// Number of annealing restarts (overrides the config)
    #[arg(long)]
    restarts: Option<u32>,
    /// Include per-block weight vectors and matrices in evaluate reports
    #[arg(long)]
    debug: bool,
    /// Write the report to this path instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output rendering
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy)]
enum Format {
    Json,
    Csv,
    Text,
}

enum CmdError {
    Io(String),
    Config(String),
    Infeasible(String),
}

impl CmdError {
    fn code(&self) -> u8 {
        match self {
            CmdError::Io(_) => 1,
            CmdError::Config(_) => 2,
            CmdError::Infeasible(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CmdError::Io(m) | CmdError::Config(m) | CmdError::Infeasible(m) => m,
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(err: ConfigError) -> Self {
        CmdError::Config(err.to_string())
    }
}

fn from_core(err: CoreError) -> CmdError {
    match err {
        CoreError::NoFeasibleDesign => CmdError::Infeasible(err.to_string()),
        other => CmdError::Config(other.to_string()),
    }
}

struct CmdOutput {
    body: String,
    exit: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.args();
    match run(&cli) {
        Ok(output) => {
            let destination = args.output.clone();
            match write_output(&output.body, destination.as_deref()) {
                Ok(()) => ExitCode::from(output.exit),
                Err(err) => {
                    eprintln!("error: {}", err.message());
                    ExitCode::from(err.code())
                }
            }
        }
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn write_output(body: &str, path: Option<&std::path::Path>) -> Result<(), CmdError> {
    match path {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CmdError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<CmdOutput, CmdError> {
    let args = cli.command.args();
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CmdError::Io(format!("cannot read {}: {e}", args.config.display())))?;
    let config = parse_config(&text)?;
    let mut resolved = config.resolve()?;

    // precedence: flag, then environment, then config, then built-in default
    if let Some(seed) = resolve_seed(args)? {
        resolved.anneal.seed = seed;
    }
    if let Some(restarts) = args.restarts {
        resolved.anneal.restarts = restarts;
        resolved
            .anneal
            .validate()
            .map_err(|e| CmdError::Config(e.to_string()))?;
    }
    let criterion = match &args.criterion {
        Some(text) => text
            .parse::<Criterion>()
            .map_err(|e| CmdError::Config(e.to_string()))?,
        None => resolved.criterion,
    };

    let output = match &cli.command {
        Command::Optimize(args) => cmd_optimize(&config, &resolved, criterion, args.format),
        Command::Enumerate(args) => cmd_enumerate(&config, &resolved, criterion, args.format),
        Command::Evaluate(args) => {
            cmd_evaluate(&config, &resolved, criterion, args.format, args.debug)
        }
        Command::Compare(args) => cmd_compare(&config, &resolved, criterion, args.format),
    }?;

    // --output beats output_path from the config
    if args.output.is_none() {
        if let Some(path) = &config.output_path {
            write_output(&output.body, Some(std::path::Path::new(path)))?;
            return Ok(CmdOutput {
                body: String::new(),
                exit: output.exit,
            });
        }
    }
    Ok(output)
}

fn resolve_seed(args: &CommonArgs) -> Result<Option<u64>, CmdError> {
    if let Some(seed) = args.seed {
        return Ok(Some(seed));
    }
    match std::env::var("PBDESIGN_SEED") {
        Ok(text) => text
            .parse::<u64>()
            .map(Some)
            .map_err(|_| CmdError::Config(format!("PBDESIGN_SEED is not a valid seed: {text:?}"))),
        Err(_) => Ok(None),
    }
}

fn reference_report(
    t: usize,
    b: usize,
    k: usize,
    resolved: &Resolved,
    criterion: Criterion,
    best: &pbdesign::DesignScore,
) -> Option<ReferenceReport> {
    let reference = balanced_reference(t, b, k).ok()?;
    let score = objective(&reference, &resolved.priors, &resolved.contrasts, criterion).ok()?;
    if !score.is_feasible() {
        return None;
    }
    let efficiency = relative_efficiency(&score, best).ok()?;
    Some(ReferenceReport {
        design: reference.rows(),
        objective: score.value(),
        efficiency,
    })
}

fn render_search(report: &SearchReport, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        Format::Csv => report.to_csv(),
        Format::Text => report.to_text(),
    }
}

fn cmd_optimize(
    config: &config::RunConfig,
    resolved: &Resolved,
    criterion: Criterion,
    format: Format,
) -> Result<CmdOutput, CmdError> {
    let (t, b, k) = (config.t, config.b, config.k);
    let result = anneal(
        &resolved.priors,
        t,
        b,
        k,
        &resolved.contrasts,
        criterion,
        &resolved.anneal,
    )
    .map_err(from_core)?;

    let exhaustive = match design_class_count(t, b, k) {
        Some(classes) if classes <= DEFAULT_CLASS_CAP as u128 => {
            exhaustive_search(&resolved.priors, t, b, k, &resolved.contrasts, criterion)
                .ok()
                .map(|exact| {
                    let v = exact.best_score.value();
                    ExhaustiveReport {
                        classes: classes as u64,
                        objective: v,
                        agrees: (result.best_score.value() - v).abs() <= 1e-10 * v.abs().max(1.0),
                    }
                })
        }
        _ => None,
    };

    let report = SearchReport {
        schema_version: SCHEMA_VERSION,
        command: "optimize".into(),
        priors: PriorsReport::new(t, b, k, &resolved.priors, criterion),
        seed: Some(resolved.anneal.seed),
        restarts: Some(resolved.anneal.restarts),
        evaluations: result.evaluations,
        objective: result.best_score.value(),
        best: DesignReport::new(&result.best_design.canonical_form()),
        reference: reference_report(t, b, k, resolved, criterion, &result.best_score),
        exhaustive,
    };
    Ok(CmdOutput {
        body: render_search(&report, format),
        exit: 0,
    })
}

fn cmd_enumerate(
    config: &config::RunConfig,
    resolved: &Resolved,
    criterion: Criterion,
    format: Format,
) -> Result<CmdOutput, CmdError> {
    let (t, b, k) = (config.t, config.b, config.k);
    let result = exhaustive_search(&resolved.priors, t, b, k, &resolved.contrasts, criterion)
        .map_err(from_core)?;

    let report = SearchReport {
        schema_version: SCHEMA_VERSION,
        command: "enumerate".into(),
        priors: PriorsReport::new(t, b, k, &resolved.priors, criterion),
        seed: None,
        restarts: None,
        evaluations: result.evaluations,
        objective: result.best_score.value(),
        best: DesignReport::new(&result.best_design),
        reference: reference_report(t, b, k, resolved, criterion, &result.best_score),
        exhaustive: None,
    };
    Ok(CmdOutput {
        body: render_search(&report, format),
        exit: 0,
    })
}

fn cmd_evaluate(
    config: &config::RunConfig,
    resolved: &Resolved,
    criterion: Criterion,
    format: Format,
    debug: bool,
) -> Result<CmdOutput, CmdError> {
    let (t, b, k) = (config.t, config.b, config.k);
    if resolved.designs.len() != 1 {
        return Err(CmdError::Config(format!(
            "evaluate needs exactly one [[designs]] entry, found {}",
            resolved.designs.len()
        )));
    }
    let (id, design) = &resolved.designs[0];
    let score =
        objective(design, &resolved.priors, &resolved.contrasts, criterion).map_err(from_core)?;
    let information = marginal_information(design, &resolved.priors);

    let blocks = debug.then(|| {
        (0..design.blocks())
            .map(|i| {
                let weights = BlockWeights::new(design.block(i), &resolved.priors);
                BlockDetail {
                    block: i + 1,
                    ell: weights.ell,
                    omega: matrix_rows(&weights.omega),
                }
            })
            .collect()
    });

    let report = EvaluateReport {
        schema_version: SCHEMA_VERSION,
        command: "evaluate".into(),
        priors: PriorsReport::new(t, b, k, &resolved.priors, criterion),
        id: id.clone(),
        feasible: score.is_feasible(),
        objective: score.is_feasible().then(|| score.value()),
        information: matrix_rows(&information),
        design: DesignReport::new(design),
        blocks,
    };
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Format::Csv => report.to_csv(),
        Format::Text => report.to_text(),
    };
    Ok(CmdOutput {
        body,
        exit: if score.is_feasible() { 0 } else { 3 },
    })
}

fn cmd_compare(
    config: &config::RunConfig,
    resolved: &Resolved,
    criterion: Criterion,
    format: Format,
) -> Result<CmdOutput, CmdError> {
    let (t, b, k) = (config.t, config.b, config.k);
    if resolved.designs.len() < 2 {
        return Err(CmdError::Config(format!(
            "compare needs at least two [[designs]] entries, found {}",
            resolved.designs.len()
        )));
    }

    let scored: Vec<(String, pbdesign::DesignScore)> = resolved
        .designs
        .iter()
        .map(|(id, design)| {
            objective(design, &resolved.priors, &resolved.contrasts, criterion)
                .map(|score| (id.clone(), score))
                .map_err(from_core)
        })
        .collect::<Result<_, _>>()?;

    let best = scored
        .iter()
        .filter(|(_, s)| s.is_feasible())
        .min_by(|a, b| a.1.value().partial_cmp(&b.1.value()).unwrap());
    let Some((best_id, best_score)) = best else {
        return Err(CmdError::Infeasible(
            "every design in the list is infeasible".into(),
        ));
    };
    let worst = scored
        .iter()
        .filter(|(_, s)| s.is_feasible())
        .map(|(_, s)| s.value())
        .fold(f64::NEG_INFINITY, f64::max);

    let rows: Vec<CompareRow> = scored
        .iter()
        .map(|(id, score)| {
            let feasible = score.is_feasible();
            CompareRow {
                id: id.clone(),
                feasible,
                objective: feasible.then(|| score.value()),
                rel_efficiency: feasible.then(|| best_score.value() / score.value()),
                eff_vs_worst: feasible.then(|| score.value() / worst),
            }
        })
        .collect();

    let report = CompareReport {
        schema_version: SCHEMA_VERSION,
        command: "compare".into(),
        priors: PriorsReport::new(t, b, k, &resolved.priors, criterion),
        best_id: best_id.clone(),
        rows,
    };
    let body = match format {
        Format::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        Format::Csv => report.to_csv(),
        Format::Text => report.to_text(),
    };
    Ok(CmdOutput { body, exit: 0 })
}

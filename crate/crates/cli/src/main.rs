//! `qlspb`: generate ensembles, run and calibrate the solver, sweep Δ,
//! compare against baseline tables and emit reports.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use shortcut_core::bench::{
    compare, ingest_baseline, sweep_delta, CompareOptions, Comparison, CostAssumptions, Report, ReportFormat,
    SweepReport,
};
use shortcut_core::engine::{known_norm_run, EtaRule, RunRecord};
use shortcut_core::instance::io::{ensemble_to_json, load_ensemble, summary_csv, EnsembleHeader};
use shortcut_core::instance::{EnsembleSpec, InstanceKind};
use shortcut_core::norm_search::{
    evaluate_unknown_norm, CalibrationMode, CalibrationReport, Calibrator, DEFAULT_NODES,
};
use shortcut_core::Instance;

use config::Config;

const THREADS_VAR: &str = "QLSPB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "qlspb", version, about = "Kernel-reflection linear-solver simulator and cost benchmarks")]
struct Cli {
    /// TOML file with one table per subcommand; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded ensemble file.
    Generate(GenerateArgs),
    /// Single-stage runs with t = ‖x‖.
    RunKnown(RunKnownArgs),
    /// Norm-averaged runs over t ∈ [1, κ].
    RunUnknown(RunUnknownArgs),
    /// Find the largest η meeting an error target.
    Calibrate(CalibrateArgs),
    /// Calibrate over a Δ grid and model total cost with a filter stage.
    Sweep(SweepArgs),
    /// Cost ratio against a baseline CSV.
    Compare(CompareArgs),
    /// Flatten a calibrate/sweep/compare output into CSV or JSON rows.
    Report(ReportArgs),
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GenerateArgs {
    /// nh, pd or sp
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Exact condition number (dense kinds).
    #[arg(long)]
    pub kappa: Option<f64>,
    /// `lo,hi` condition-number band (sparse).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub band: Option<Vec<f64>>,
    /// Off-band perturbation density (sparse).
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a per-instance CSV summary here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunKnownArgs {
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// `worst-case` (η = ε/√2), `calibrated`, or a literal η.
    #[arg(long)]
    pub eta_rule: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunUnknownArgs {
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    /// Fixed η; calibrated against --target-delta when absent.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub target_delta: Option<f64>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct CalibrateArgs {
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    /// Error target: Bures Δ (unknown norm) or ε (known norm).
    #[arg(long)]
    pub target_delta: Option<f64>,
    /// `unknown` (default) or `known`.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepArgs {
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub delta_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Failed filter runs cost half their degree (default true).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub early_halving: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub double_stage1: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct CompareArgs {
    /// Output of `qlspb sweep`.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    /// Baseline CSV: method,kappa,delta,cost,mean_error,alpha_avg
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Count baseline stage-1 calls twice.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub double_stage1: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ReportArgs {
    /// Output of `calibrate`, `sweep` or `compare`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct KnownRunOutput {
    epsilon: f64,
    eta: f64,
    eta_rule: String,
    mean_error: f64,
    mean_cost: f64,
    runs: Vec<RunRecord>,
}

#[derive(Debug, Serialize)]
struct UnknownRun {
    instance_id: String,
    q_succ: f64,
    mu_sq_avg: f64,
    bures_delta: f64,
    ua_calls: usize,
    cost: f64,
}

#[derive(Debug, Serialize)]
struct UnknownRunOutput {
    eta: f64,
    nodes: usize,
    mean_error: f64,
    mean_cost: f64,
    runs: Vec<UnknownRun>,
}

/// What `compare` writes: the comparison plus what `report` needs to label it.
#[derive(Debug, Serialize, Deserialize)]
struct ComparisonFile {
    kind: InstanceKind,
    dimension: usize,
    comparison: Comparison,
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| validation(format!("--{flag} is required")))
}

fn validation(msg: impl Into<String>) -> anyhow::Error {
    shortcut_core::Error::Validation(msg.into()).into()
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                // A closed pipe (`qlspb report | head`) is not an error.
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.context("writing to stdout"),
            }
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    emit(out, &serde_json::to_string_pretty(value)?)
}

fn load(path: &Path) -> Result<Vec<Instance>> {
    let e = load_ensemble::<f64>(path).with_context(|| format!("loading ensemble {}", path.display()))?;
    Ok(e.instances)
}

fn parse_mode(mode: Option<&str>, nodes: Option<usize>) -> Result<CalibrationMode> {
    match mode.unwrap_or("unknown") {
        "known" => Ok(CalibrationMode::KnownNorm),
        "unknown" => Ok(CalibrationMode::UnknownNorm {
            nodes: nodes.unwrap_or(DEFAULT_NODES),
        }),
        other => Err(validation(format!("unknown mode `{other}` (known or unknown)"))),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let kind = InstanceKind::parse(a.kind.as_deref().unwrap_or("nh"))?;
    let n = required(a.n, "n")?;
    let count = a.count.unwrap_or(100);
    let seed = a.seed.unwrap_or(0);
    let spec = if kind == InstanceKind::Sparse {
        let band = required(a.band, "band")?;
        EnsembleSpec::sparse(n, (band[0], band[1]), a.density.unwrap_or(0.0), count, seed)
    } else {
        EnsembleSpec::dense(kind, n, required(a.kappa, "kappa")?, count, seed)
    };
    let instances: Vec<Instance> = spec.generate()?;
    emit(a.out.as_deref(), &ensemble_to_json(&EnsembleHeader::for_spec(&spec), &instances)?)?;
    if let Some(p) = a.summary {
        std::fs::write(&p, summary_csv(&instances)?).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn run_known(a: RunKnownArgs) -> Result<()> {
    let instances = load(&required(a.ensemble, "ensemble")?)?;
    let epsilon = required(a.epsilon, "epsilon")?;
    let rule_name = a.eta_rule.unwrap_or_else(|| "worst-case".into());
    let rule = match rule_name.as_str() {
        "worst-case" => EtaRule::WorstCase,
        "calibrated" => {
            let r = Calibrator::new(&instances, CalibrationMode::KnownNorm)?.calibrate(epsilon)?;
            EtaRule::Calibrated(r.eta)
        }
        lit => EtaRule::Calibrated(
            lit.parse()
                .map_err(|_| validation(format!("--eta-rule `{lit}`: expected worst-case, calibrated or a number")))?,
        ),
    };
    let eta = rule.eta(epsilon)?;
    let runs = instances
        .iter()
        .map(|i| Ok(known_norm_run(i, epsilon, rule)?.record(&i.id)))
        .collect::<Result<Vec<_>>>()?;
    let k = runs.len() as f64;
    emit_json(
        a.out.as_deref(),
        &KnownRunOutput {
            epsilon,
            eta,
            eta_rule: rule_name,
            mean_error: runs.iter().map(|r| r.error_l2).sum::<f64>() / k,
            mean_cost: runs.iter().map(|r| r.cost).sum::<f64>() / k,
            runs,
        },
    )
}

fn run_unknown(a: RunUnknownArgs) -> Result<()> {
    let instances = load(&required(a.ensemble, "ensemble")?)?;
    let nodes = a.nodes.unwrap_or(DEFAULT_NODES);
    let eta = match (a.eta, a.target_delta) {
        (Some(eta), _) => eta,
        (None, Some(target)) => {
            Calibrator::new(&instances, CalibrationMode::UnknownNorm { nodes })?
                .calibrate(target)?
                .eta
        }
        (None, None) => bail!(validation("one of --eta or --target-delta is required")),
    };
    let runs = instances
        .iter()
        .map(|i| {
            let r = evaluate_unknown_norm(i, eta, nodes)?;
            Ok(UnknownRun {
                instance_id: i.id.clone(),
                q_succ: r.q_succ,
                mu_sq_avg: r.mu_sq_avg,
                bures_delta: r.bures_delta,
                ua_calls: r.ua_calls,
                cost: r.cost(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let k = runs.len() as f64;
    emit_json(
        a.out.as_deref(),
        &UnknownRunOutput {
            eta,
            nodes,
            mean_error: runs.iter().map(|r| r.bures_delta).sum::<f64>() / k,
            mean_cost: runs.iter().map(|r| r.cost).sum::<f64>() / k,
            runs,
        },
    )
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let instances = load(&required(a.ensemble, "ensemble")?)?;
    let target = required(a.target_delta, "target-delta")?;
    let mode = parse_mode(a.mode.as_deref(), a.nodes)?;
    let r = Calibrator::new(&instances, mode)?.calibrate(target)?;
    emit_json(a.out.as_deref(), &CalibrationReport::new(&instances, mode, target, &r))
}

fn sweep(a: SweepArgs) -> Result<()> {
    let instances = load(&required(a.ensemble, "ensemble")?)?;
    let grid = required(a.delta_grid, "delta-grid")?;
    let epsilons = a.epsilons.unwrap_or_default();
    let mode = parse_mode(a.mode.as_deref(), a.nodes)?;
    let assumptions = CostAssumptions {
        early_halving: a.early_halving.unwrap_or(true),
        doubled_stage1: a.double_stage1.unwrap_or(false),
    };
    let report = sweep_delta(&instances, &grid, &epsilons, mode, assumptions)?;
    for f in &report.flagged {
        eprintln!("warning: Δ = {} flagged: {}", f.delta, f.reason);
    }
    emit_json(a.out.as_deref(), &report)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| shortcut_core::Error::Parse {
            location: path.display().to_string(),
            message: e.to_string(),
        })
        .map_err(Into::into)
}

fn compare_cmd(a: CompareArgs) -> Result<()> {
    let sweep: SweepReport = read_json(&required(a.sweep, "sweep")?)?;
    let baseline = ingest_baseline(&required(a.baseline, "baseline")?)?;
    let opts = CompareOptions {
        double_stage1: a.double_stage1.unwrap_or(false),
        ..CompareOptions::default()
    };
    let comparison = compare(&sweep.stage1_points(), &baseline, &opts)?;
    emit_json(
        a.out.as_deref(),
        &ComparisonFile {
            kind: sweep.kind,
            dimension: sweep.dimension,
            comparison,
        },
    )
}

fn report(a: ReportArgs) -> Result<()> {
    let path = required(a.input, "input")?;
    let format: ReportFormat = a.format.as_deref().unwrap_or("csv").parse()?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let report = if let Ok(r) = serde_json::from_str::<CalibrationReport>(&text) {
        Report::from_calibration(&r)
    } else if let Ok(r) = serde_json::from_str::<SweepReport>(&text) {
        Report::from_sweep(&r)
    } else if let Ok(c) = serde_json::from_str::<ComparisonFile>(&text) {
        Report::from_comparison(&c.comparison, c.kind, c.dimension)
    } else {
        bail!(validation(format!(
            "{} is not a calibrate, sweep or compare output",
            path.display()
        )));
    };
    emit(a.out.as_deref(), report.render(format)?.trim_end())
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| validation(format!("{THREADS_VAR}={raw}: expected a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| anyhow!("thread pool: {e}"))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Generate(a) => generate(cfg.generate(a)),
        Command::RunKnown(a) => run_known(cfg.run_known(a)),
        Command::RunUnknown(a) => run_unknown(cfg.run_unknown(a)),
        Command::Calibrate(a) => calibrate(cfg.calibrate(a)),
        Command::Sweep(a) => sweep(cfg.sweep(a)),
        Command::Compare(a) => compare_cmd(cfg.compare(a)),
        Command::Report(a) => report(cfg.report(a)),
    }
}

/// 3 for numerical failures, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|c| c.downcast_ref::<shortcut_core::Error>())
        .map_or(2, |e| if e.is_numerical() { 3 } else { 2 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_errors_map_to_three() {
        let e: anyhow::Error = shortcut_core::Error::DivergentCost.into();
        assert_eq!(exit_code(&e), 3);
        let e = anyhow::Error::from(shortcut_core::Error::NonFinite("x")).context("while sweeping");
        assert_eq!(exit_code(&e), 3);
        assert_eq!(exit_code(&validation("bad")), 2);
        assert_eq!(exit_code(&anyhow!("io")), 2);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(parse_mode(None, Some(40)).unwrap(), CalibrationMode::UnknownNorm { nodes: 40 });
        assert_eq!(parse_mode(Some("known"), None).unwrap(), CalibrationMode::KnownNorm);
        assert!(parse_mode(Some("both"), None).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}

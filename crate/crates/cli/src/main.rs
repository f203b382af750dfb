//! `dioarray` — array generation and co-array analysis, sampling plans,
//! Monte Carlo sweeps and reproduction recipes.
//!
//! Exit codes: 0 success, 2 domain or parameter error, 3 resource limit,
//! 1 I/O failure. Errors are reported as one JSON object on stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::value::RawValue;

use dioarray::coarray::{
    symmetric_difference_2q, third_order_signed_set, weight_tau, ArrayGeometry, LagReport,
};
use dioarray::experiment::{raw_f64, run_sweep, ExperimentConfig};
use dioarray::geometry::{dio3_array, fourth_order_array, sixth_order_array, ConstructionParams};
use dioarray::sampling::{
    compare_delays, coprime_plan, n_sampler_delay_bound, n_sampler_plan, n_sampler_snapshot_floor,
    three_sampler_delay_bound, three_sampler_plan, SamplingPlan,
};
use dioarray::Error;

#[derive(Parser)]
#[command(
    name = "dioarray",
    version,
    about = "Diophantine sampling and sparse array toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or analyze sparse arrays.
    #[command(subcommand)]
    Array(ArrayCmd),
    /// Build sampling plans and delay reports.
    #[command(subcommand)]
    Sample(SampleCmd),
    /// Run RMSE-versus-SNR Monte Carlo sweeps.
    Sim(SimArgs),
    /// Reproduce summary tables and histogram data.
    #[command(subcommand)]
    Repro(ReproCmd),
}

#[derive(Args)]
struct ArraySpec {
    /// coprime, nested, shifted_nested, shifted_coprime, extended_coprime,
    /// dio3, fourth_order, sixth_order, layered_2q
    family: String,
    /// Integer parameters in the family's documented order.
    #[arg(allow_negative_numbers = true)]
    params: Vec<i64>,
}

#[derive(Subcommand)]
enum ArrayCmd {
    /// Build an array and write its geometry JSON.
    Gen {
        #[command(flatten)]
        spec: ArraySpec,
        /// Geometry JSON path (stdout if omitted).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Enumerate the co-array of an array at a given order.
    Analyze {
        #[command(flatten)]
        spec: ArraySpec,
        /// 3 for the third-order signed set, otherwise an even order 2q.
        #[arg(long, default_value_t = 2)]
        order: u32,
        /// Require all 2q indices distinct (even orders only).
        #[arg(long)]
        distinct: bool,
        /// Lag report JSON path (stdout if omitted).
        #[arg(long)]
        json: Option<PathBuf>,
        /// Spacing histogram CSV path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, default_value_t = 0)]
    gamma: i64,
    #[arg(long)]
    k: i64,
    #[arg(long)]
    l: i64,
    /// Nyquist interval in seconds, for delay in seconds.
    #[arg(long)]
    ts: Option<f64>,
    /// Full plan JSON path.
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SampleCmd {
    /// Three samplers at (2+Γ, 3+Γ, 5+Γ).
    Three(PlanArgs),
    /// Distributed plan over n samplers at i+Γ.
    N {
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        args: PlanArgs,
    },
    /// Co-prime baseline with rates (m1, m2).
    Coprime {
        #[arg(long)]
        m1: i64,
        #[arg(long)]
        m2: i64,
        #[command(flatten)]
        args: PlanArgs,
    },
    /// Co-prime (2+Γ, 3+Γ) against three samplers at the same Γ.
    Compare {
        #[arg(long, default_value_t = 0)]
        gamma: i64,
        #[arg(long)]
        k: i64,
        #[arg(long)]
        l: i64,
        #[arg(long)]
        ts: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SimKind {
    Freq,
    Doa,
}

#[derive(Args)]
struct SimArgs {
    kind: SimKind,
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides, `key=value`; applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// RMSE-versus-SNR CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Summary JSON path (stdout if omitted).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ReproCmd {
    /// Delay and DoF summary for the sampling schemes and arrays.
    Table1 {
        /// Also enumerate the sixth-order example (slow).
        #[arg(long)]
        with_sixth: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Spacing histograms of the example arrays, one CSV each.
    FigHistograms {
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

enum Failure {
    Lib(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Array(cmd) => run_array(cmd),
        Command::Sample(cmd) => run_sample(cmd),
        Command::Sim(args) => run_sim(args),
        Command::Repro(cmd) => run_repro(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (kind, message, code) = match f {
                Failure::Lib(e) => {
                    let code = if matches!(e, Error::ResourceLimit(_)) {
                        3
                    } else {
                        2
                    };
                    (e.kind().to_string(), e.to_string(), code)
                }
                Failure::Io(m) => ("Io".to_string(), m, 1),
            };
            let body = serde_json::json!({ "error": kind, "message": message });
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}

fn emit(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text)?,
        None => {
            // a closed pipe (e.g. `| head`) is not an error worth reporting
            let mut out = std::io::stdout().lock();
            if let Err(e) = writeln!(out, "{}", text.trim_end()) {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn build(spec: &ArraySpec) -> Result<ArrayGeometry, Error> {
    ConstructionParams::parse(&spec.family, &spec.params)?.build()
}

fn analyze(g: &ArrayGeometry, order: u32, distinct: bool) -> Result<LagReport, Error> {
    let lags = match order {
        3 if distinct => {
            return Err(Error::Domain(
                "--distinct applies to even orders only".into(),
            ));
        }
        3 => third_order_signed_set(g)?,
        o if o >= 2 && o % 2 == 0 => symmetric_difference_2q(g, o / 2, !distinct)?,
        o => {
            return Err(Error::Domain(format!(
                "order must be 3 or an even number >= 2, got {o}"
            )))
        }
    };
    Ok(LagReport::new(g, order, &lags, &weight_tau(g)?))
}

fn run_array(cmd: ArrayCmd) -> CliResult {
    match cmd {
        ArrayCmd::Gen { spec, json } => {
            let g = build(&spec)?;
            emit(json.as_deref(), &g.to_json())
        }
        ArrayCmd::Analyze {
            spec,
            order,
            distinct,
            json,
            csv,
        } => {
            let g = build(&spec)?;
            let report = analyze(&g, order, distinct)?;
            if let Some(p) = csv {
                fs::write(p, weight_tau(&g)?.to_csv())?;
            }
            emit(json.as_deref(), &to_json(&report))
        }
    }
}

#[derive(Serialize)]
struct PlanReport {
    kind: String,
    rates: Vec<i64>,
    k: i64,
    l: i64,
    delay_ticks: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    delay_seconds: Option<Box<RawValue>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delay_bound_ticks: Option<i64>,
    virtual_snapshots_per_lag: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    snapshot_floor: Option<u64>,
    physical_samples: usize,
}

fn plan_report(
    plan: &SamplingPlan,
    args: &PlanArgs,
    bound: Option<i64>,
    floor: Option<u64>,
) -> PlanReport {
    let kind = serde_json::to_value(plan.kind)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    PlanReport {
        kind,
        rates: plan.rates.clone(),
        k: args.k,
        l: args.l,
        delay_ticks: plan.delay_ticks,
        delay_seconds: args.ts.map(|ts| raw_f64(plan.delay_seconds(ts))),
        delay_bound_ticks: bound,
        virtual_snapshots_per_lag: plan.virtual_snapshots_per_lag(),
        snapshot_floor: floor,
        physical_samples: plan.physical_samples(),
    }
}

fn finish_plan(
    plan: &SamplingPlan,
    args: &PlanArgs,
    bound: Option<i64>,
    floor: Option<u64>,
) -> CliResult {
    if let Some(p) = &args.plan {
        fs::write(p, plan.to_json())?;
    }
    emit(None, &to_json(&plan_report(plan, args, bound, floor)))
}

fn check_ts(ts: Option<f64>) -> Result<(), Error> {
    match ts {
        Some(t) if !(t > 0.0 && t.is_finite()) => {
            Err(Error::Domain(format!("--ts must be positive, got {t}")))
        }
        _ => Ok(()),
    }
}

fn run_sample(cmd: SampleCmd) -> CliResult {
    match cmd {
        SampleCmd::Three(args) => {
            check_ts(args.ts)?;
            let plan = three_sampler_plan(args.gamma, args.k, args.l)?;
            let bound = three_sampler_delay_bound(args.gamma, args.k, args.l);
            finish_plan(&plan, &args, Some(bound), None)
        }
        SampleCmd::N { n, args } => {
            check_ts(args.ts)?;
            let plan = n_sampler_plan(n, args.gamma, args.k, args.l)?;
            let bound = n_sampler_delay_bound(n, args.gamma, args.k, args.l);
            let floor = n_sampler_snapshot_floor(n, args.l);
            finish_plan(&plan, &args, Some(bound), Some(floor))
        }
        SampleCmd::Coprime { m1, m2, args } => {
            check_ts(args.ts)?;
            let plan = coprime_plan(m1, m2, args.k, args.l)?;
            finish_plan(&plan, &args, None, None)
        }
        SampleCmd::Compare { gamma, k, l, ts } => {
            check_ts(ts)?;
            let c = compare_delays(gamma, k, l)?;
            #[derive(Serialize)]
            struct Comparison {
                gamma: i64,
                k: i64,
                l: i64,
                coprime_delay_ticks: i64,
                diophantine_delay_ticks: i64,
                ratio: Box<RawValue>,
                #[serde(skip_serializing_if = "Option::is_none")]
                coprime_delay_seconds: Option<Box<RawValue>>,
                #[serde(skip_serializing_if = "Option::is_none")]
                diophantine_delay_seconds: Option<Box<RawValue>>,
            }
            let out = Comparison {
                gamma,
                k,
                l,
                coprime_delay_ticks: c.coprime_delay_ticks,
                diophantine_delay_ticks: c.diophantine_delay_ticks,
                ratio: raw_f64(c.ratio),
                coprime_delay_seconds: ts.map(|t| raw_f64(c.coprime_delay_ticks as f64 * t)),
                diophantine_delay_seconds: ts
                    .map(|t| raw_f64(c.diophantine_delay_ticks as f64 * t)),
            };
            emit(None, &to_json(&out))
        }
    }
}

fn parse_override(s: &str) -> Result<(String, String), Error> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::Domain(format!("override '{s}' is not key=value")))
}

fn run_sim(args: SimArgs) -> CliResult {
    let text = match &args.config {
        Some(p) => fs::read_to_string(p)?,
        None => String::new(),
    };
    let kind = match args.kind {
        SimKind::Freq => "freq",
        SimKind::Doa => "doa",
    };
    let mut overrides = vec![("kind".to_string(), kind.to_string())];
    for s in &args.overrides {
        overrides.push(parse_override(s)?);
    }
    let cfg = ExperimentConfig::parse(&text, &overrides)?;
    let result = run_sweep(&cfg)?;
    if let Some(p) = &args.csv {
        fs::write(p, result.to_csv())?;
    }
    emit(args.json.as_deref(), &result.to_json())
}

#[derive(Serialize)]
struct SamplingRow {
    scheme: String,
    rates: String,
    k: i64,
    l: i64,
    delay_ticks: i64,
    delay_bound_ticks: Option<i64>,
    virtual_snapshots_per_lag: usize,
    physical_samples: usize,
}

#[derive(Serialize)]
struct ArrayRow {
    array: String,
    order: u32,
    sensors: usize,
    min_spacing: i64,
    consecutive_radius: u64,
    consecutive_dof: u64,
    distinct_lags: u64,
}

#[derive(Serialize)]
struct Table1 {
    sampling: Vec<SamplingRow>,
    delay_ratio_coprime_over_three: Box<RawValue>,
    arrays: Vec<ArrayRow>,
}

fn sampling_row(
    scheme: &str,
    plan: &SamplingPlan,
    k: i64,
    l: i64,
    bound: Option<i64>,
) -> SamplingRow {
    SamplingRow {
        scheme: scheme.into(),
        rates: plan
            .rates
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(","),
        k,
        l,
        delay_ticks: plan.delay_ticks,
        delay_bound_ticks: bound,
        virtual_snapshots_per_lag: plan.virtual_snapshots_per_lag(),
        physical_samples: plan.physical_samples(),
    }
}

fn array_row(g: &ArrayGeometry, order: u32) -> Result<ArrayRow, Error> {
    let r = analyze(g, order, false)?;
    Ok(ArrayRow {
        array: g.label.clone(),
        order,
        sensors: r.sensors,
        min_spacing: r.min_spacing,
        consecutive_radius: r.consecutive_radius,
        consecutive_dof: r.consecutive_dof,
        distinct_lags: r.dof,
    })
}

fn run_repro(cmd: ReproCmd) -> CliResult {
    match cmd {
        ReproCmd::Table1 { with_sixth, json } => {
            let (gamma, k, l) = (1_000_000, 50, 50);
            let co = coprime_plan(2 + gamma, 3 + gamma, k, l)?;
            let three = three_sampler_plan(gamma, k, l)?;
            let n10 = n_sampler_plan(10, gamma, k, l)?;
            let sampling = vec![
                sampling_row("coprime", &co, k, l, None),
                sampling_row(
                    "three",
                    &three,
                    k,
                    l,
                    Some(three_sampler_delay_bound(gamma, k, l)),
                ),
                sampling_row(
                    "distributed(n=10)",
                    &n10,
                    k,
                    l,
                    Some(n_sampler_delay_bound(10, gamma, k, l)),
                ),
            ];
            let mut arrays = vec![
                array_row(&dio3_array(4, 3, 5)?, 3)?,
                array_row(&dio3_array(13, 7, 11)?, 3)?,
                array_row(&fourth_order_array([5; 4], 25, 24)?, 4)?,
            ];
            if with_sixth {
                arrays.push(array_row(&sixth_order_array([5; 6], 125, 124)?, 6)?);
            }
            let table = Table1 {
                delay_ratio_coprime_over_three: raw_f64(
                    co.delay_ticks as f64 / three.delay_ticks as f64,
                ),
                sampling,
                arrays,
            };
            emit(json.as_deref(), &to_json(&table))
        }
        ReproCmd::FigHistograms { out } => {
            fs::create_dir_all(&out)?;
            let arrays = [
                ("dio3_4_3_5", dio3_array(4, 3, 5)?),
                ("dio3_13_7_11", dio3_array(13, 7, 11)?),
                (
                    "fourth_order_5_5_5_5_25_24",
                    fourth_order_array([5; 4], 25, 24)?,
                ),
                (
                    "sixth_order_5x6_125_124",
                    sixth_order_array([5; 6], 125, 124)?,
                ),
            ];
            let mut written = Vec::new();
            for (name, g) in &arrays {
                let path = out.join(format!("{name}_spacing.csv"));
                fs::write(&path, weight_tau(g)?.to_csv())?;
                written.push(path.display().to_string());
            }
            emit(None, &to_json(&serde_json::json!({ "written": written })))
        }
    }
}

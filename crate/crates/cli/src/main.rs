//! `nodebound`: bound evaluation, oracle verification, training and the
//! experiment sweeps.

mod bound;
mod config;
mod train;

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nodebound::experiments::{
    blob_fallback_dataset, box_stats, load_idx, plot, sweep_lambda, sweep_width, LambdaSweepConfig, LipGapConfig,
    WidthSweepConfig,
};
use nodebound::oracles::{format_table, run_oracle_suite};
use nodebound::SweepResult;
use serde_json::{json, Value};

use crate::config::{from_value, manifest_inputs, read_params, resolve, OutputDir};

/// Exit status and message of a failed run.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn from_display(e: impl Display) -> Self {
        Self::invalid(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "nodebound", version, about = "Neural ODE generalization bounds and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON parameter file; a manifest from an earlier run also works.
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "nodebound-out")]
    out: PathBuf,
    /// Override one config key, e.g. `--set epochs=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct Seeded {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one bound from a JSON parameter file.
    Bound {
        #[command(flatten)]
        common: Common,
    },
    /// Run every oracle check.
    Verify {
        #[arg(long, value_name = "DIR", default_value = "nodebound-out")]
        out: PathBuf,
    },
    /// Train one model and write its per-epoch record.
    Train {
        #[command(flatten)]
        run: Seeded,
        #[arg(long, value_name = "FILE")]
        images: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        labels: Option<PathBuf>,
    },
    /// Hidden-width sweep on the sine task.
    SweepWidth {
        #[command(flatten)]
        run: Seeded,
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Penalty-weight sweep on the linear task.
    SweepLambda {
        #[command(flatten)]
        run: Seeded,
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Lipschitz constant against the generalization gap over training.
    LipGap {
        #[command(flatten)]
        run: Seeded,
        /// IDX image file; Gaussian blobs are used when absent.
        #[arg(long, value_name = "FILE", requires = "labels")]
        images: Option<PathBuf>,
        #[arg(long, value_name = "FILE", requires = "images")]
        labels: Option<PathBuf>,
    },
}

fn seed_flag(seed: Option<u64>) -> Vec<(&'static str, Value)> {
    seed.map(|s| ("seed", json!(s))).into_iter().collect()
}

fn path_input(flag: Option<PathBuf>, params: Option<&Path>, key: &str) -> Option<PathBuf> {
    flag.or_else(|| {
        let inputs = manifest_inputs(params?)?;
        Some(PathBuf::from(inputs.get(key)?.as_str()?))
    })
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("NODEBOUND_THREADS") else { return Ok(()) };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::invalid(format!("NODEBOUND_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(Failure::from_display)
}

fn write_sweep(
    out: &mut OutputDir,
    result: &SweepResult,
    tag: &str,
    x_label: &str,
    metric: &str,
) -> Result<(), Failure> {
    let mut buf = Vec::new();
    result.write_records_csv(&mut buf).map_err(Failure::from_display)?;
    out.write("records.csv", &buf)?;
    buf.clear();
    result.write_sweep_csv(&mut buf).map_err(Failure::from_display)?;
    out.write("sweep.csv", &buf)?;
    buf.clear();
    result.write_summary_csv(&mut buf).map_err(Failure::from_display)?;
    out.write(&format!("summary_{tag}.csv"), &buf)?;
    let boxes: Vec<_> = result
        .summaries
        .iter()
        .map(|s| (s.sweep_value, if metric == "gap" { s.gap } else { s.eval_loss }))
        .collect();
    let y_label = if metric == "gap" { "generalization gap" } else { "test loss" };
    out.write(&format!("{tag}_box.svg"), plot::box_svg(&format!("{y_label} by {x_label}"), x_label, y_label, &boxes))?;
    for (value, trial) in &result.divergent {
        eprintln!("warning: trial {trial} at {x_label} = {value} diverged");
    }
    match result.correlation {
        Some(rho) => println!("spearman({x_label}, mean {y_label}) = {rho:.4}"),
        None => println!("spearman({x_label}, mean {y_label}) undefined"),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bound { common } => {
            let Some(path) = common.params.as_deref() else {
                return Err(Failure::invalid("bound needs --params FILE"));
            };
            let mut value = read_params(path)?;
            if let Some(inner) = value.as_object_mut().and_then(|m| m.values_mut().next()).and_then(Value::as_object_mut)
            {
                config::apply_overrides(inner, &common.overrides)?;
            } else if !common.overrides.is_empty() {
                return Err(Failure::invalid("overrides need a parameter object"));
            }
            let params: bound::BoundParams = from_value(value)?;
            let evaluated = bound::evaluate(&params)?;
            print!("{}", evaluated.table);
            let mut out = OutputDir::create(&common.out)?;
            out.write_json("bound_report.json", &evaluated.json)?;
            out.finish("bound", &params, None)
        }
        Command::Verify { out } => {
            let checks = run_oracle_suite();
            print!("{}", format_table(&checks));
            let summary: Vec<Value> =
                checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect();
            let mut dir = OutputDir::create(&out)?;
            dir.write_json("verify.json", &summary)?;
            dir.finish("verify", &json!({}), None)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(Failure { code: 2, message: format!("{failed} oracle check(s) failed") });
            }
            Ok(())
        }
        Command::Train { run, images, labels } => {
            let params = run.common.params.as_deref();
            let resolved: train::TrainRun = resolve(params, &run.common.overrides, seed_flag(run.seed))?;
            let inputs = train::IdxInputs {
                images: path_input(images, params, "images"),
                labels: path_input(labels, params, "labels"),
            };
            let data = train::load_dataset(&resolved, &inputs)?;
            let trained = train::run(&resolved, &data)?;
            if let Some(epoch) = trained.record.diverged_at {
                eprintln!("warning: training diverged at epoch {epoch}");
            }
            if let Some(last) = trained.record.final_row() {
                println!("final train loss {:.6}, eval loss {:.6}, gap {:.6}", last.train_loss, last.eval_loss, last.gen_gap);
            }
            let mut out = OutputDir::create(&run.common.out)?;
            out.write("record.csv", trained.record.to_csv_string())?;
            out.write("model.json", train::model_json(&trained.model))?;
            let inputs = (resolved.data == train::DataSource::Idx).then(|| json!(inputs));
            out.finish("train", &resolved, inputs)
        }
        Command::SweepWidth { run, widths, trials } => {
            let mut flags = seed_flag(run.seed);
            flags.extend(widths.map(|w| ("widths", json!(w))));
            flags.extend(trials.map(|t| ("trials", json!(t))));
            let config: WidthSweepConfig = resolve(run.common.params.as_deref(), &run.common.overrides, flags)?;
            let result = sweep_width(&config).map_err(Failure::from_display)?;
            let mut out = OutputDir::create(&run.common.out)?;
            write_sweep(&mut out, &result, "width", "width", "eval")?;
            let points: Vec<(f64, f64)> = result
                .points
                .iter()
                .filter_map(|p| Some((p.sweep_value, p.record.final_row()?.eval_loss)))
                .collect();
            out.write("width_scatter.svg", plot::scatter_svg("test loss by width", "width", "test loss", &points))?;
            out.finish("sweep-width", &config, None)
        }
        Command::SweepLambda { run, lambdas, trials } => {
            let mut flags = seed_flag(run.seed);
            flags.extend(lambdas.map(|l| ("lambdas", json!(l))));
            flags.extend(trials.map(|t| ("trials", json!(t))));
            let config: LambdaSweepConfig = resolve(run.common.params.as_deref(), &run.common.overrides, flags)?;
            let result = sweep_lambda(&config).map_err(Failure::from_display)?;
            let mut out = OutputDir::create(&run.common.out)?;
            write_sweep(&mut out, &result, "lambda", "lambda", "gap")?;
            out.finish("sweep-lambda", &config, None)
        }
        Command::LipGap { run, images, labels } => {
            let params = run.common.params.as_deref();
            let config: LipGapConfig = resolve(params, &run.common.overrides, seed_flag(run.seed))?;
            let images = path_input(images, params, "images");
            let labels = path_input(labels, params, "labels");
            let (data, inputs) = match (&images, &labels) {
                (Some(i), Some(l)) => {
                    let data = load_idx(i, l, Some(config.n_train + config.n_test)).map_err(Failure::from_display)?;
                    (data, Some(json!({"images": i, "labels": l})))
                }
                _ => {
                    eprintln!("no IDX files given; using the Gaussian-blob stand-in");
                    (blob_fallback_dataset(&config).map_err(Failure::from_display)?, None)
                }
            };
            let result = nodebound::experiments::lip_gap_run(&data, &config).map_err(Failure::from_display)?;
            let mut out = OutputDir::create(&run.common.out)?;
            let mut buf = Vec::new();
            result.write_csv(&mut buf).map_err(Failure::from_display)?;
            out.write("lip_gap.csv", &buf)?;
            out.write("record.csv", result.record.to_csv_string())?;
            let points: Vec<(f64, f64)> = result.lipschitz.iter().copied().zip(result.error_gaps.iter().copied()).collect();
            out.write("lip_gap.svg", plot::scatter_svg("error gap against Lipschitz constant", "Lipschitz constant", "error gap", &points))?;
            if let Some(stats) = box_stats(&result.lipschitz) {
                println!("lipschitz range [{:.4}, {:.4}]", stats.min, stats.max);
            }
            match result.correlation {
                Some(rho) => println!("spearman(lipschitz, error gap) = {rho:.4}"),
                None => println!("spearman(lipschitz, error gap) undefined"),
            }
            out.finish("lip-gap", &config, inputs)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match init_threads().and_then(|()| dispatch(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

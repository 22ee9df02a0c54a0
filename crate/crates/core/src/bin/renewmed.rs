use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use renewmed::engine::{
    load_checkpoint, read_batch, read_scaling, render, save_checkpoint, MediationStream, OutcomeModel, ReportFormat,
    Standardization, StreamConfig,
};
use renewmed::sim::{run_replications, BatchSplit, CaseSpec, SimOptions};
use renewmed::{Error, ModelDims, Result, TestConfig};

/// Streaming mediation analysis with renewable estimation.
#[derive(Parser)]
#[command(name = "renewmed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Linear,
    Logistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Create an empty stream state file.
    Init {
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Number of mediators.
        #[arg(long)]
        p: usize,
        /// Number of confounders.
        #[arg(long)]
        q: usize,
        /// Add intercepts to the outcome and mediator regressions.
        #[arg(long)]
        intercept: bool,
        #[arg(long)]
        state: PathBuf,
        /// Family-wise significance level stored as the report default.
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Exposure contrast `x,x*` stored as the report default.
        #[arg(long, value_parser = parse_contrast, allow_hyphen_values = true)]
        contrast: Option<(f64, f64)>,
        /// Standardize columns with parameters computed from the first batch.
        #[arg(long, conflicts_with = "scaling")]
        standardize_first_batch: bool,
        /// Fixed standardization parameters (CSV: column,mean,scale).
        #[arg(long)]
        scaling: Option<PathBuf>,
        /// Overwrite an existing state file.
        #[arg(long)]
        force: bool,
    },
    /// Fold one CSV batch into the stream.
    Update {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        batch: PathBuf,
        /// Expected 1-based index of this batch; guards against re-sending.
        #[arg(long)]
        index: Option<u64>,
    },
    /// Print estimates, tests, selections and effects.
    Report {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, value_parser = parse_contrast, allow_hyphen_values = true)]
        contrast: Option<(f64, f64)>,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Run Monte Carlo replications of a simulation case.
    Simulate {
        #[arg(long)]
        case: u8,
        #[arg(long)]
        n_total: Option<usize>,
        /// Comma-separated batch counts.
        #[arg(long, value_delimiter = ',', required = true)]
        batches: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads.
        #[arg(long)]
        parallel: Option<usize>,
        /// Allow batch sizes that differ by one when N is not divisible by k.
        #[arg(long)]
        near_equal_batches: bool,
    },
}

fn parse_contrast(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected X1,X0, got '{s}'"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number"));
    Ok((num(a)?, num(b)?))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Init {
            model,
            p,
            q,
            intercept,
            state,
            delta,
            contrast,
            standardize_first_batch,
            scaling,
            force,
        } => {
            if state.exists() && !force {
                return Err(Error::Input(format!(
                    "{} already exists; pass --force to overwrite it",
                    state.display()
                )));
            }
            let model = match model {
                ModelArg::Linear => OutcomeModel::Linear,
                ModelArg::Logistic => OutcomeModel::Logistic,
            };
            let dims = ModelDims::new(p, q).with_intercepts(intercept, intercept);
            let mut config = StreamConfig::new(model, dims);
            config.tests = TestConfig {
                delta,
                contrast: contrast.unwrap_or(TestConfig::default().contrast),
            };
            if standardize_first_batch {
                config.standardization = Standardization::FromFirstBatch;
            } else if let Some(path) = scaling {
                config.standardization = Standardization::Fixed(read_scaling(&path, &config.dims)?);
            }
            let stream = MediationStream::new(config)?;
            save_checkpoint(&stream, &state)?;
            info!("initialized {} stream at {}", model, state.display());
            Ok(())
        }
        Command::Update { state, batch, index } => {
            let mut stream = load_checkpoint(&state)?;
            if let Some(k) = index {
                let next = stream.batch_count() + 1;
                if k != next {
                    return Err(Error::Input(format!(
                        "batch index {k} does not match the stream, which expects batch {next}"
                    )));
                }
            }
            let raw = read_batch(&batch, stream.config())?;
            stream.update_raw(&raw)?;
            save_checkpoint(&stream, &state)?;
            info!(
                "applied batch {} ({} rows); N = {}",
                stream.batch_count(),
                raw.n,
                stream.n_total()
            );
            Ok(())
        }
        Command::Report {
            state,
            delta,
            contrast,
            format,
        } => {
            let mut stream = load_checkpoint(&state)?;
            let mut tests = stream.config().tests;
            if let Some(d) = delta {
                tests.delta = d;
            }
            if let Some(c) = contrast {
                tests.contrast = c;
            }
            stream.set_tests(tests)?;
            let format = match format {
                FormatArg::Text => ReportFormat::Text,
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Json => ReportFormat::Json,
            };
            print!("{}", render(&stream.analyze()?, format));
            Ok(())
        }
        Command::Simulate {
            case,
            n_total,
            batches,
            reps,
            seed,
            delta,
            out,
            parallel,
            near_equal_batches,
        } => {
            let mut spec = CaseSpec::case(case)?;
            if let Some(n) = n_total {
                spec = spec.with_n_total(n);
            }
            let mut options = SimOptions::new(batches, reps, seed);
            options.delta = delta;
            options.threads = parallel;
            if near_equal_batches {
                options.split = BatchSplit::NearEqual;
            }
            let table = run_replications(&spec, &options)?;
            fs::write(&out, table.to_csv()).map_err(|e| Error::Io { path: out.clone(), source: e })?;
            for path in &table.paths {
                if !path.is_complete() {
                    eprintln!(
                        "warning: path {} has {} failed replications, e.g. {}",
                        path.label,
                        path.failed,
                        path.failures.first().map_or("", String::as_str)
                    );
                }
            }
            info!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

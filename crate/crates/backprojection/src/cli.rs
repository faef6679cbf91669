//! Command-line front end. [`run`] returns the process exit code.

use std::io::Write;
use std::path::PathBuf;

use backprojection_core::data::{three_blobs, two_blobs};
use backprojection_core::{ActivationKind, KernelKind, LossKind, Procedure, TrainConfig};
use clap::{Args, Parser, Subcommand};

use crate::config::{default_architecture, Algorithm, DatasetSpec, ExperimentConfig, KernelName, KernelSpec};
use crate::error::{AppError, AppResult};
use crate::experiment::run_experiment;
use crate::formats::{write_dataset_csv, write_json};
use crate::gradcheck::{gradcheck, GradcheckSpec};
use crate::grid::{export_decision_grid, Bounds};
use crate::model::Model;
use crate::timing::{epoch_timing_comparison, TimingSetup};

#[derive(Debug, Parser)]
#[command(name = "backproj", version, about = "Backprojection training experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one experiment and write its artifacts.
    Run(RunArgs),
    /// Run several config files concurrently.
    Sweep {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Compare per-layer gradients with finite differences and the Kronecker form.
    Gradcheck(GradcheckArgs),
    /// Export a decision-boundary grid for a trained 2-D model.
    Grid(GridArgs),
    /// Write a generated dataset as CSV.
    Datagen(DatagenArgs),
    /// Time epochs of all three algorithms on one architecture.
    Timing(TimingArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON config; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// two_blobs, three_blobs, or a CSV path.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub dataset_seed: Option<u64>,
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    #[arg(long)]
    pub procedure: Option<Procedure>,
    /// linear or rbf.
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub no_shuffle: bool,
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Also write trace.csv with one row per layer update.
    #[arg(long)]
    pub trace: bool,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) -> AppResult<()> {
        if let Some(d) = &self.dataset {
            config.dataset = Some(DatasetSpec::from_flag(d, self.dataset_seed.unwrap_or(0)));
        } else if let Some(seed) = self.dataset_seed {
            config.dataset.get_or_insert_with(DatasetSpec::default).set_seed(seed);
        }
        if let Some(a) = self.algorithm {
            config.algorithm = Some(a);
        }
        if let Some(k) = &self.kernel {
            let kind = match k.as_str() {
                "linear" => KernelName::Linear,
                "rbf" => KernelName::Rbf,
                other => return Err(AppError::config(format!("unknown kernel {other:?}"))),
            };
            config.kernel = Some(KernelSpec { kind, gamma: None });
        }
        if let Some(g) = self.gamma {
            config
                .kernel
                .as_mut()
                .ok_or_else(|| AppError::config("--gamma needs a kernel"))?
                .gamma = Some(g);
        }
        let t = &mut config.train;
        t.procedure = self.procedure.or(t.procedure);
        t.learning_rate = self.learning_rate.or(t.learning_rate);
        t.batch_size = self.batch_size.or(t.batch_size);
        t.epochs = self.epochs.or(t.epochs);
        t.seed = self.seed.or(t.seed);
        if self.no_shuffle {
            t.shuffle = Some(false);
        }
        if self.no_standardize {
            config.standardize = Some(false);
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = Some(dir.clone());
        }
        if self.trace {
            config.trace = Some(true);
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Input dimension then layer widths, e.g. 3,4,2.
    #[arg(long, value_delimiter = ',', default_value = "3,4,2")]
    pub dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "elu,sigmoid")]
    pub activations: Vec<ActivationKind>,
    #[arg(long, value_delimiter = ',', default_value = "mse")]
    pub losses: Vec<LossKind>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// model.json written by `run`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub resolution: usize,
    /// x1_min,x1_max,x2_min,x2_max; defaults to the training bounding box padded by 20%.
    #[arg(long)]
    pub bounds: Option<String>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    /// two_blobs or three_blobs.
    #[arg(long, default_value = "two_blobs")]
    pub dataset: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TimingArgs {
    /// two_blobs, three_blobs, or a CSV path.
    #[arg(long, default_value = "two_blobs")]
    pub dataset: String,
    #[arg(long, default_value_t = 0)]
    pub dataset_seed: u64,
    #[arg(long)]
    pub procedure: Option<Procedure>,
    /// Timed epochs, after the warm-up.
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2)]
    pub warmup: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> AppResult<i32> {
    match command {
        Command::Run(args) => {
            let mut config = match &args.config {
                Some(path) => ExperimentConfig::from_file(path)?,
                None => ExperimentConfig::default(),
            };
            args.overrides.apply(&mut config)?;
            let outcome = run_experiment(&config)?;
            let r = &outcome.report;
            println!(
                "{} final_accuracy={:.4} mean_epoch_seconds={:.3e} output_dir={}",
                r.config.algorithm.name(),
                r.final_accuracy,
                r.timing.mean_epoch_seconds,
                r.config.output_dir.display()
            );
            Ok(0)
        }
        Command::Sweep { configs } => sweep(&configs),
        Command::Gradcheck(args) => {
            let spec = GradcheckSpec {
                dims: args.dims,
                activations: args.activations,
                losses: args.losses,
                trials: args.trials,
                tolerance: args.tolerance,
                batch_size: args.batch_size,
                seed: args.seed,
                ..GradcheckSpec::default()
            };
            let report = gradcheck(&spec)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            println!("{}", if report.pass { "PASS" } else { "FAIL" });
            Ok(if report.pass { 0 } else { 1 })
        }
        Command::Grid(args) => {
            let model = Model::load(&args.model)?;
            let bounds = match &args.bounds {
                Some(text) => Bounds::parse(text)?,
                None => Bounds::padded(&model.data_bounds, 0.2)?,
            };
            match &args.out {
                Some(path) => {
                    let file = std::fs::File::create(path).map_err(|e| AppError::io(path, e))?;
                    export_decision_grid(&model, &bounds, args.resolution, std::io::BufWriter::new(file))?;
                }
                None => {
                    export_decision_grid(&model, &bounds, args.resolution, std::io::stdout().lock())?;
                }
            }
            Ok(0)
        }
        Command::Datagen(args) => {
            let data = match args.dataset.as_str() {
                "two_blobs" => two_blobs(args.seed),
                "three_blobs" => three_blobs(args.seed),
                other => return Err(AppError::config(format!("unknown generated dataset {other:?}"))),
            };
            write_dataset_csv(&data, &args.out)?;
            Ok(0)
        }
        Command::Timing(args) => {
            let data = DatasetSpec::from_flag(&args.dataset, args.dataset_seed).load()?;
            let mut architecture = default_architecture();
            architecture.last_mut().expect("default is non-empty").units =
                Some(backprojection_core::data::label_dim(data.n_classes));
            let shapes = architecture
                .iter()
                .map(|l| backprojection_core::LayerShape::new(l.units.expect("set above"), l.activation, l.loss))
                .collect();
            let setup = TimingSetup {
                shapes,
                config: TrainConfig {
                    procedure: args.procedure.unwrap_or(TrainConfig::default().procedure),
                    epochs: args.epochs,
                    seed: args.seed,
                    ..TrainConfig::default()
                },
                warmup_epochs: args.warmup,
                kernel: KernelKind::rbf_for_dim(data.dim()),
                kernel_learning_rate: Algorithm::KernelBackprojection.default_learning_rate(),
            };
            let table = epoch_timing_comparison(&data, &setup)?;
            match &args.out {
                Some(path) => write_json(&table, path)?,
                None => {
                    let mut out = std::io::stdout().lock();
                    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&table).expect("table serializes"));
                }
            }
            Ok(0)
        }
    }
}

/// Each config trains on its own thread with its own network and output directory.
/// The exit code is the most severe one among the runs.
fn sweep(paths: &[PathBuf]) -> AppResult<i32> {
    let mut configs = Vec::with_capacity(paths.len());
    for path in paths {
        configs.push(ExperimentConfig::from_file(path)?);
    }
    let mut dirs: Vec<PathBuf> = configs
        .iter()
        .map(|c| c.output_dir.clone().unwrap_or_else(|| PathBuf::from("out")))
        .collect();
    dirs.sort();
    if dirs.windows(2).any(|w| w[0] == w[1]) {
        return Err(AppError::config("sweep configs must use distinct output directories"));
    }
    let results: Vec<AppResult<f64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|config| scope.spawn(move || run_experiment(config).map(|o| o.report.final_accuracy)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut code = 0;
    for (path, result) in paths.iter().zip(results) {
        match result {
            Ok(acc) => println!("{}: final_accuracy={acc:.4}", path.display()),
            Err(e) => {
                eprintln!("{}: error: {e}", path.display());
                code = code.max(e.exit_code());
            }
        }
    }
    Ok(code)
}

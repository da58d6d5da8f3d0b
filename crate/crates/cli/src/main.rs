//! `dfgforge` — single entry point for the design-space exploration
//! pipeline: kernel lowering, dataset synthesis, predictor training, RL
//! search, baselines, Pareto sweeps, and cost evaluation.
//!
//! Conventions shared by every subcommand:
//! - exit 0 on success (including `--help`/`--version`), 1 on validation
//!   or usage errors, 2 on I/O errors;
//! - stdout carries machine-readable results (CSV with a header row, LF
//!   line endings); progress notes go to stderr and `--quiet` silences
//!   them;
//! - file outputs are written atomically (temp file + rename);
//! - the root seed resolves as `--seed` flag, then a `seed` line in
//!   `--config`, then the `DFGFORGE_SEED` environment variable, then 0;
//!   every other setting resolves as CLI flag, then config key, then
//!   built-in default.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use dfgforge_core::baselines::{
    exhaustive_search, genetic_search, simulated_annealing, GaParams, SaParams,
};
use dfgforge_core::ct;
use dfgforge_core::datagen::{build_dataset, load_dataset, DatasetConfig, DatasetError};
use dfgforge_core::dfg::{Dfg, DfgJsonError};
use dfgforge_core::evaluator::OracleEvaluator;
use dfgforge_core::explore::{
    compare_csv, compare_report, frontier_csv, max_dsp, parse_records_csv, parse_targets,
    records_csv, sweep_pareto, DseMethod, SweepConfig,
};
use dfgforge_core::features::GraphTensors;
use dfgforge_core::gpp::{self, GppTrainConfig, LabeledGraph};
use dfgforge_core::io::{atomic_write, CheckpointError};
use dfgforge_core::oracle;
use dfgforge_core::rlmd::{
    fine_tune, infer_assignment, train_rlmd, FineTuneConfig, RlTrainConfig,
};
use dfgforge_core::{ActorCritic, GppModel, Real, RewardParams};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "dfgforge",
    version,
    about = "Data-flow-graph design-space exploration: lower kernels, train a GNN cost \
             predictor, and search multiplier directives with RL and classic baselines."
)]
struct Cli {
    /// Root RNG seed (overrides the config file and DFGFORGE_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Plain-text `key=value` config file overriding built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Suppress progress notes on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Rlmd,
    Sa,
    Ga,
    Exhaustive,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum BaselineArg {
    Sa,
    Ga,
    Exhaustive,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a kernel, lower it to a data-flow graph, and write the graph
    /// as canonical JSON.
    Transform {
        /// Kernel source file.
        #[arg(long)]
        src: PathBuf,
        /// Output graph JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Also re-emit the lowered kernel as annotated source.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Generate an oracle-labeled dataset of random graphs.
    GenDataset {
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Distinct topologies [config: dataset.topologies].
        #[arg(long)]
        topologies: Option<usize>,
        /// Directive variants per topology [config: dataset.variants].
        #[arg(long)]
        variants: Option<usize>,
        /// Leading topologies forming the training split
        /// [config: dataset.train-topologies].
        #[arg(long)]
        train_topologies: Option<usize>,
    },
    /// Train the graph cost predictor on a dataset's training split.
    TrainGpp {
        /// Dataset directory from `gen-dataset`.
        #[arg(long)]
        dataset: PathBuf,
        /// Output checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Training epochs [config: gpp.epochs].
        #[arg(long)]
        epochs: Option<usize>,
        /// Optional CSV of per-epoch training losses.
        #[arg(long)]
        losses: Option<PathBuf>,
    },
    /// Predict costs for one graph with a trained predictor.
    Predict {
        /// Graph JSON file.
        #[arg(long)]
        dfg: PathBuf,
        /// Predictor checkpoint.
        #[arg(long)]
        model: PathBuf,
    },
    /// Pretrain the RL agent over a dataset's training topologies.
    TrainRlmd {
        /// Dataset directory from `gen-dataset`.
        #[arg(long)]
        dataset: PathBuf,
        /// Predictor checkpoint the agent's state embedding uses.
        #[arg(long)]
        gpp: PathBuf,
        /// Training episodes [config: rl.episodes].
        #[arg(long)]
        episodes: Option<usize>,
        /// Output agent checkpoint path.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-episode training log CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Fine-tune a pretrained agent on one graph and DSP target.
    Finetune {
        /// Graph JSON file.
        #[arg(long)]
        dfg: PathBuf,
        /// Pretrained agent checkpoint.
        #[arg(long)]
        agent: PathBuf,
        /// Predictor checkpoint.
        #[arg(long)]
        gpp: PathBuf,
        /// DSP usage target.
        #[arg(long)]
        dsp_target: u32,
        /// Exact-evaluation budget [config: finetune.budget].
        #[arg(long)]
        budget: Option<usize>,
        /// Output path for the tuned agent.
        #[arg(long)]
        out: PathBuf,
    },
    /// Search one graph for a directive assignment hitting a DSP target;
    /// writes assignment JSON, annotated source, and exact costs.
    Dse {
        /// Graph JSON file.
        #[arg(long)]
        dfg: PathBuf,
        /// DSP usage target.
        #[arg(long)]
        dsp_target: u32,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Pretrained agent checkpoint (RL mode; requires --gpp).
        #[arg(long)]
        agent: Option<PathBuf>,
        /// Predictor checkpoint (RL mode).
        #[arg(long)]
        gpp: Option<PathBuf>,
        /// Fine-tuning budget in exact evaluations; 0 decodes greedily
        /// with no search (RL mode).
        #[arg(long)]
        finetune: Option<usize>,
        /// Classic engine instead of the RL agent.
        #[arg(long, value_enum)]
        baseline: Option<BaselineArg>,
        /// Evaluation budget for sa/ga [config: budget].
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Sweep DSP targets with one engine; writes the frontier CSV and a
    /// sibling `<stem>.records.csv` with per-target records.
    Pareto {
        /// Graph JSON file.
        #[arg(long)]
        dfg: PathBuf,
        /// Search engine.
        #[arg(long, value_enum)]
        engine: EngineArg,
        /// Target grid: `LO:HI:STEP%` of the unflagged DSP usage, or a
        /// comma-separated list of absolute targets.
        #[arg(long, default_value = "20:80:10%")]
        targets: String,
        /// Frontier CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Pretrained agent checkpoint (rlmd engine).
        #[arg(long)]
        agent: Option<PathBuf>,
        /// Predictor checkpoint (rlmd engine).
        #[arg(long)]
        gpp: Option<PathBuf>,
        /// Per-target evaluation budget [config: budget].
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Aggregate `*.records.csv` sweeps from a directory into a
    /// per-engine comparison report.
    Compare {
        /// Directory containing `*.records.csv` files.
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        /// Report CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Count a target as met when DSP usage is at or below it,
        /// instead of exactly equal.
        #[arg(long)]
        slack: bool,
    },
    /// Print the exact oracle costs of one graph.
    Eval {
        /// Graph JSON file.
        #[arg(long)]
        dfg: PathBuf,
    },
}

enum CliError {
    /// Bad input, bad flags, failed validation: exit 1.
    Validation(String),
    /// Filesystem trouble: exit 2.
    Io(String),
}

fn io_ctx(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn json_err(e: DfgJsonError) -> CliError {
    match e {
        DfgJsonError::Io { .. } => CliError::Io(e.to_string()),
        DfgJsonError::Parse(_) => CliError::Validation(e.to_string()),
    }
}

fn ckpt_err(e: CheckpointError) -> CliError {
    match e {
        CheckpointError::Io { .. } => CliError::Io(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn dataset_err(e: DatasetError) -> CliError {
    match e {
        DatasetError::Io { .. } => CliError::Io(e.to_string()),
        DatasetError::Graph(g) => json_err(g),
        other => CliError::Validation(other.to_string()),
    }
}

/// Settings resolved from global flags plus the optional config file.
struct Settings {
    seed_flag: Option<u64>,
    values: BTreeMap<String, String>,
    quiet: bool,
}

const CONFIG_KEYS: &[&str] = &[
    "seed",
    "budget",
    "alpha",
    "beta",
    "lambda",
    "sa.t0",
    "sa.cooling",
    "ga.pop",
    "ga.crossover",
    "ga.tournament",
    "ga.elitism",
    "gpp.epochs",
    "gpp.batch",
    "gpp.lr0",
    "gpp.lr-decay",
    "rl.episodes",
    "rl.gamma",
    "rl.lr",
    "rl.epsilon0",
    "rl.epsilon-decay",
    "dataset.topologies",
    "dataset.variants",
    "dataset.train-topologies",
    "finetune.budget",
];

impl Settings {
    fn new(seed_flag: Option<u64>, config: Option<&Path>, quiet: bool) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path).map_err(|e| io_ctx(path, e))?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Validation(format!(
                        "{} line {}: expected key=value, got `{raw}`",
                        path.display(),
                        idx + 1
                    ))
                })?;
                let key = key.trim();
                if !CONFIG_KEYS.contains(&key) {
                    return Err(CliError::Validation(format!(
                        "{} line {}: unknown config key `{key}`",
                        path.display(),
                        idx + 1
                    )));
                }
                values.insert(key.to_string(), value.trim().to_string());
            }
        }
        Ok(Settings {
            seed_flag,
            values,
            quiet,
        })
    }

    fn log(&self, msg: impl std::fmt::Display) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Validation(format!("config key `{key}`: bad value `{raw}`"))
            }),
        }
    }

    /// CLI flag beats config key beats default.
    fn resolve<T: FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn seed(&self) -> Result<u64, CliError> {
        if let Some(s) = self.seed_flag {
            return Ok(s);
        }
        if let Some(s) = self.get("seed")? {
            return Ok(s);
        }
        match std::env::var("DFGFORGE_SEED") {
            Ok(raw) => raw.parse().map_err(|_| {
                CliError::Validation(format!("DFGFORGE_SEED: bad value `{raw}`"))
            }),
            Err(_) => Ok(0),
        }
    }

    fn reward_params(&self) -> Result<RewardParams, CliError> {
        let d = RewardParams::default();
        Ok(RewardParams {
            alpha: self.get("alpha")?.unwrap_or(d.alpha),
            beta: self.get("beta")?.unwrap_or(d.beta),
            lambda: self.get("lambda")?.unwrap_or(d.lambda),
        })
    }

    fn sa_params(&self) -> Result<SaParams<Real>, CliError> {
        let d = SaParams::default();
        Ok(SaParams {
            initial_temp: self.get("sa.t0")?.unwrap_or(d.initial_temp),
            cooling: self.get("sa.cooling")?.unwrap_or(d.cooling),
        })
    }

    fn ga_params(&self) -> Result<GaParams<Real>, CliError> {
        let d = GaParams::default();
        Ok(GaParams {
            population: self.get("ga.pop")?.unwrap_or(d.population),
            crossover_prob: self.get("ga.crossover")?.unwrap_or(d.crossover_prob),
            tournament_k: self.get("ga.tournament")?.unwrap_or(d.tournament_k),
            elitism: self.get("ga.elitism")?.unwrap_or(d.elitism),
        })
    }

    fn rl_config(&self, episodes_flag: Option<usize>) -> Result<RlTrainConfig<Real>, CliError> {
        let d = RlTrainConfig::default();
        Ok(RlTrainConfig {
            episodes: self.resolve(episodes_flag, "rl.episodes", d.episodes)?,
            gamma: self.get("rl.gamma")?.unwrap_or(d.gamma),
            lr: self.get("rl.lr")?.unwrap_or(d.lr),
            epsilon0: self.get("rl.epsilon0")?.unwrap_or(d.epsilon0),
            epsilon_decay: self.get("rl.epsilon-decay")?.unwrap_or(d.epsilon_decay),
            seed: self.seed()?,
            reward: self.reward_params()?,
        })
    }

    fn finetune_config(&self, budget_flag: Option<usize>) -> Result<FineTuneConfig<Real>, CliError> {
        let rl = self.rl_config(None)?;
        Ok(FineTuneConfig {
            budget: self.resolve(budget_flag, "finetune.budget", 2000)?,
            gamma: rl.gamma,
            lr: rl.lr,
            epsilon0: rl.epsilon0,
            epsilon_decay: rl.epsilon_decay,
            seed: rl.seed,
            reward: rl.reward,
        })
    }
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let settings = match Settings::new(cli.seed, cli.config.as_deref(), cli.quiet) {
        Ok(s) => s,
        Err(e) => return report(e),
    };
    match dispatch(&settings, cli.command) {
        Ok(()) => 0,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> i32 {
    match e {
        CliError::Validation(msg) => {
            eprintln!("error: {msg}");
            1
        }
        CliError::Io(msg) => {
            eprintln!("I/O error: {msg}");
            2
        }
    }
}

fn dispatch(s: &Settings, command: Command) -> Result<(), CliError> {
    match command {
        Command::Transform { src, out, emit } => cmd_transform(s, &src, &out, emit.as_deref()),
        Command::GenDataset {
            out,
            topologies,
            variants,
            train_topologies,
        } => cmd_gen_dataset(s, &out, topologies, variants, train_topologies),
        Command::TrainGpp {
            dataset,
            out,
            epochs,
            losses,
        } => cmd_train_gpp(s, &dataset, &out, epochs, losses.as_deref()),
        Command::Predict { dfg, model } => cmd_predict(&dfg, &model),
        Command::TrainRlmd {
            dataset,
            gpp,
            episodes,
            out,
            log,
        } => cmd_train_rlmd(s, &dataset, &gpp, episodes, &out, log.as_deref()),
        Command::Finetune {
            dfg,
            agent,
            gpp,
            dsp_target,
            budget,
            out,
        } => cmd_finetune(s, &dfg, &agent, &gpp, dsp_target, budget, &out),
        Command::Dse {
            dfg,
            dsp_target,
            out,
            agent,
            gpp,
            finetune,
            baseline,
            budget,
        } => cmd_dse(
            s, &dfg, dsp_target, &out, agent, gpp, finetune, baseline, budget,
        ),
        Command::Pareto {
            dfg,
            engine,
            targets,
            out,
            agent,
            gpp,
            budget,
        } => cmd_pareto(s, &dfg, engine, &targets, &out, agent, gpp, budget),
        Command::Compare { input, out, slack } => cmd_compare(s, &input, &out, slack),
        Command::Eval { dfg } => cmd_eval(&dfg),
    }
}

fn read_dfg_validated(path: &Path) -> Result<Dfg, CliError> {
    let dfg = Dfg::read_json(path).map_err(json_err)?;
    let violations = dfg.validate();
    if !violations.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: invalid graph: {violations:?}",
            path.display()
        )));
    }
    Ok(dfg)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    atomic_write(path, text.as_bytes()).map_err(|e| io_ctx(path, e))
}

fn costs_csv_text(dfg: &Dfg) -> String {
    let costs = oracle::evaluate_unchecked::<Real>(dfg);
    let latency = oracle::latency(dfg);
    format!(
        "lut,dsp,cp_ns,latency\n{},{},{},{latency}\n",
        costs.lut, costs.dsp, costs.cp_ns
    )
}

fn cmd_transform(
    s: &Settings,
    src: &Path,
    out: &Path,
    emit: Option<&Path>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(src).map_err(|e| io_ctx(src, e))?;
    let program = ct::parse(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", src.display())))?;
    let lowered = ct::lower(&program)
        .map_err(|e| CliError::Validation(format!("{}: {e}", src.display())))?;
    let mut dfg = lowered.dfg;
    if let Some(stem) = src.file_stem().and_then(|s| s.to_str()) {
        dfg.set_name(stem);
    }
    dfg.write_json(out).map_err(json_err)?;
    if let Some(path) = emit {
        write_text(path, &ct::emit_code(&dfg))?;
    }
    s.log(format_args!(
        "lowered {}: {} nodes ({} muls), latency {}",
        src.display(),
        dfg.node_count(),
        dfg.mul_count(),
        oracle::latency(&dfg)
    ));
    Ok(())
}

fn cmd_gen_dataset(
    s: &Settings,
    out: &Path,
    topologies: Option<usize>,
    variants: Option<usize>,
    train_topologies: Option<usize>,
) -> Result<(), CliError> {
    let defaults = DatasetConfig::default();
    let cfg = DatasetConfig {
        topologies: s.resolve(topologies, "dataset.topologies", defaults.topologies)?,
        variants: s.resolve(variants, "dataset.variants", defaults.variants)?,
        train_topologies: s.resolve(
            train_topologies,
            "dataset.train-topologies",
            defaults.train_topologies,
        )?,
        seed: s.seed()?,
        topo: defaults.topo,
    };
    let manifest = build_dataset(out, &cfg).map_err(dataset_err)?;
    s.log(format_args!(
        "wrote {} graphs ({} train / {} test topologies) to {}",
        manifest.files.len(),
        manifest.train_topologies.len(),
        manifest.test_topologies.len(),
        out.display()
    ));
    Ok(())
}

fn cmd_train_gpp(
    s: &Settings,
    dataset: &Path,
    out: &Path,
    epochs: Option<usize>,
    losses_path: Option<&Path>,
) -> Result<(), CliError> {
    let ds = load_dataset(dataset).map_err(dataset_err)?;
    let defaults = GppTrainConfig::default();
    let cfg = GppTrainConfig {
        epochs: s.resolve(epochs, "gpp.epochs", defaults.epochs)?,
        batch_size: s.get("gpp.batch")?.unwrap_or(defaults.batch_size),
        lr0: s.get("gpp.lr0")?.unwrap_or(defaults.lr0),
        lr_decay: s.get("gpp.lr-decay")?.unwrap_or(defaults.lr_decay),
        seed: s.seed()?,
        scale_by_nodes: defaults.scale_by_nodes,
    };

    let mut samples = Vec::new();
    for entry in ds.train_entries() {
        let tensors = GraphTensors::new(&entry.dfg).map_err(|v| {
            CliError::Validation(format!("{}: invalid graph: {v:?}", entry.file))
        })?;
        samples.push(LabeledGraph::with_labels(
            tensors,
            entry.lut as Real,
            entry.dsp as Real,
            entry.cp_ns,
        ));
    }
    s.log(format_args!(
        "training on {} samples for {} epochs",
        samples.len(),
        cfg.epochs
    ));
    let (model, losses) =
        gpp::train::<Real>(&samples, &cfg).map_err(|e| CliError::Validation(e.to_string()))?;
    model.save(out).map_err(ckpt_err)?;

    if let Some(path) = losses_path {
        let mut csv = String::from("epoch,lut_mae,dsp_msle,cp_msle\n");
        for (epoch, l) in losses.iter().enumerate() {
            writeln!(csv, "{epoch},{},{},{}", l.lut_mae, l.dsp_msle, l.cp_msle)
                .expect("string write");
        }
        write_text(path, &csv)?;
    }

    // Held-out quality on the test split, when the dataset has one.
    let (mut lut_p, mut lut_y) = (Vec::new(), Vec::new());
    let (mut cp_p, mut cp_y) = (Vec::new(), Vec::new());
    let (mut dsp_p, mut dsp_y) = (Vec::new(), Vec::new());
    for entry in ds.test_entries() {
        let pred = model.predict_dfg(&entry.dfg).map_err(|v| {
            CliError::Validation(format!("{}: invalid graph: {v:?}", entry.file))
        })?;
        lut_p.push(pred.lut);
        lut_y.push(entry.lut as Real);
        cp_p.push(pred.cp_ns);
        cp_y.push(entry.cp_ns);
        dsp_p.push(pred.dsp);
        dsp_y.push(entry.dsp as Real);
    }
    if lut_p.is_empty() {
        s.log("dataset has no test split; skipping held-out metrics");
        return Ok(());
    }
    let lut_mape =
        gpp::mape(&lut_p, &lut_y).map_err(|e| CliError::Validation(e.to_string()))?;
    let cp_mape = gpp::mape(&cp_p, &cp_y).map_err(|e| CliError::Validation(e.to_string()))?;
    let dsp_rmse =
        gpp::rmse(&dsp_p, &dsp_y).map_err(|e| CliError::Validation(e.to_string()))?;
    println!("lut_mape,cp_mape,dsp_rmse\n{lut_mape},{cp_mape},{dsp_rmse}");
    Ok(())
}

fn cmd_predict(dfg_path: &Path, model_path: &Path) -> Result<(), CliError> {
    let model = GppModel::load(model_path).map_err(ckpt_err)?;
    let dfg = read_dfg_validated(dfg_path)?;
    let pred = model
        .predict_dfg(&dfg)
        .map_err(|v| CliError::Validation(format!("invalid graph: {v:?}")))?;
    println!("lut_p,dsp_p,cp_p\n{},{},{}", pred.lut, pred.dsp, pred.cp_ns);
    Ok(())
}

/// One unflagged base graph per training topology, paired with the
/// default 20–80% DSP target grid.
fn rl_tasks(dataset: &Path) -> Result<Vec<(Dfg, u32)>, CliError> {
    let ds = load_dataset(dataset).map_err(dataset_err)?;
    let mut bases: BTreeMap<usize, Dfg> = BTreeMap::new();
    for entry in ds.train_entries() {
        bases.entry(entry.topology).or_insert_with(|| {
            entry
                .dfg
                .with_assignment(&vec![false; entry.dfg.mul_count()])
                .expect("assignment sized to the graph")
        });
    }
    let mut tasks = Vec::new();
    for base in bases.values() {
        for target in dfgforge_core::explore::default_target_grid(base) {
            tasks.push((base.clone(), target));
        }
    }
    if tasks.is_empty() {
        return Err(CliError::Validation(
            "dataset has no training topologies".to_string(),
        ));
    }
    Ok(tasks)
}

fn cmd_train_rlmd(
    s: &Settings,
    dataset: &Path,
    gpp_path: &Path,
    episodes: Option<usize>,
    out: &Path,
    log_path: Option<&Path>,
) -> Result<(), CliError> {
    let gpp = GppModel::load(gpp_path).map_err(ckpt_err)?;
    let tasks = rl_tasks(dataset)?;
    let cfg = s.rl_config(episodes)?;
    s.log(format_args!(
        "pretraining over {} (graph, target) tasks for {} episodes",
        tasks.len(),
        cfg.episodes
    ));
    let (agent, stats) =
        train_rlmd(&gpp, &tasks, &cfg).map_err(|e| CliError::Validation(e.to_string()))?;
    agent.save(out).map_err(ckpt_err)?;
    if let Some(path) = log_path {
        let mut csv = String::from("episode,task,reward,loss,epsilon\n");
        for st in &stats {
            writeln!(
                csv,
                "{},{},{},{},{}",
                st.episode, st.task, st.reward, st.loss, st.epsilon
            )
            .expect("string write");
        }
        write_text(path, &csv)?;
    }
    s.log(format_args!("saved agent to {}", out.display()));
    Ok(())
}

fn cmd_finetune(
    s: &Settings,
    dfg_path: &Path,
    agent_path: &Path,
    gpp_path: &Path,
    dsp_target: u32,
    budget: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let gpp = GppModel::load(gpp_path).map_err(ckpt_err)?;
    let mut agent = ActorCritic::load(agent_path).map_err(ckpt_err)?;
    let dfg = read_dfg_validated(dfg_path)?;
    let cfg = s.finetune_config(budget)?;
    let mut ev = OracleEvaluator::new(&dfg);
    let result = fine_tune(&mut agent, &gpp, &dfg, dsp_target, &mut ev, &cfg)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    agent.save(out).map_err(ckpt_err)?;
    println!(
        "reward,evaluator_calls,episodes\n{},{},{}",
        result.reward, result.evaluator_calls, result.episodes
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_dse(
    s: &Settings,
    dfg_path: &Path,
    dsp_target: u32,
    out: &Path,
    agent_path: Option<PathBuf>,
    gpp_path: Option<PathBuf>,
    finetune_budget: Option<usize>,
    baseline: Option<BaselineArg>,
    budget: Option<usize>,
) -> Result<(), CliError> {
    let dfg = read_dfg_validated(dfg_path)?;
    let reward_params = s.reward_params()?;
    let seed = s.seed()?;
    let budget = s.resolve(budget, "budget", 2000)?;

    let assignment = match (&agent_path, baseline) {
        (Some(_), Some(_)) => {
            return Err(CliError::Validation(
                "choose either --agent or --baseline, not both".to_string(),
            ))
        }
        (None, None) => {
            return Err(CliError::Validation(
                "one of --agent or --baseline is required".to_string(),
            ))
        }
        (None, Some(engine)) => {
            let mut ev = OracleEvaluator::new(&dfg);
            match engine {
                BaselineArg::Exhaustive => {
                    exhaustive_search(&mut ev, dsp_target, &reward_params)
                        .map_err(|e| CliError::Validation(e.to_string()))?
                        .assignment
                }
                BaselineArg::Sa => {
                    simulated_annealing(
                        &mut ev,
                        dsp_target,
                        &reward_params,
                        budget,
                        seed,
                        &s.sa_params()?,
                    )
                    .assignment
                }
                BaselineArg::Ga => {
                    genetic_search(
                        &mut ev,
                        dsp_target,
                        &reward_params,
                        budget,
                        seed,
                        &s.ga_params()?,
                        None,
                    )
                    .assignment
                }
            }
        }
        (Some(agent_file), None) => {
            let gpp_file = gpp_path.as_ref().ok_or_else(|| {
                CliError::Validation("--agent requires --gpp".to_string())
            })?;
            let gpp = GppModel::load(gpp_file).map_err(ckpt_err)?;
            let mut agent = ActorCritic::load(agent_file).map_err(ckpt_err)?;
            let tune = finetune_budget.unwrap_or(0);
            if tune == 0 {
                infer_assignment(&agent, &gpp, &dfg, dsp_target)
                    .map_err(|v| CliError::Validation(format!("invalid graph: {v:?}")))?
            } else {
                let cfg = s.finetune_config(Some(tune))?;
                let mut ev = OracleEvaluator::new(&dfg);
                fine_tune(&mut agent, &gpp, &dfg, dsp_target, &mut ev, &cfg)
                    .map_err(|e| CliError::Validation(e.to_string()))?
                    .assignment
            }
        }
    };

    let assigned = dfg
        .with_assignment(&assignment)
        .expect("searchers preserve assignment length");
    std::fs::create_dir_all(out).map_err(|e| io_ctx(out, e))?;
    let bits: Vec<u8> = assignment.iter().map(|&b| u8::from(b)).collect();
    let mut assignment_json = serde_json::json!({ "bits": bits }).to_string();
    assignment_json.push('\n');
    write_text(&out.join("assignment.json"), &assignment_json)?;
    write_text(&out.join("design.ct"), &ct::emit_code(&assigned))?;
    let costs = costs_csv_text(&assigned);
    write_text(&out.join("costs.csv"), &costs)?;
    print!("{costs}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_pareto(
    s: &Settings,
    dfg_path: &Path,
    engine: EngineArg,
    targets_spec: &str,
    out: &Path,
    agent_path: Option<PathBuf>,
    gpp_path: Option<PathBuf>,
    budget: Option<usize>,
) -> Result<(), CliError> {
    let dfg = read_dfg_validated(dfg_path)?;
    let targets =
        parse_targets(targets_spec, max_dsp(&dfg)).map_err(CliError::Validation)?;
    if targets.is_empty() {
        return Err(CliError::Validation(format!(
            "target spec `{targets_spec}` produced an empty grid"
        )));
    }
    let cfg = SweepConfig {
        budget: s.resolve(budget, "budget", 2000)?,
        seed: s.seed()?,
        reward: s.reward_params()?,
        sa: s.sa_params()?,
        ga: s.ga_params()?,
        fine_tune: s.finetune_config(None)?,
    };

    // The rlmd engine borrows its models, so they must outlive the method.
    let loaded = match engine {
        EngineArg::Rlmd => {
            let agent_file = agent_path.ok_or_else(|| {
                CliError::Validation("--engine rlmd requires --agent".to_string())
            })?;
            let gpp_file = gpp_path.ok_or_else(|| {
                CliError::Validation("--engine rlmd requires --gpp".to_string())
            })?;
            Some((
                ActorCritic::load(&agent_file).map_err(ckpt_err)?,
                GppModel::load(&gpp_file).map_err(ckpt_err)?,
            ))
        }
        _ => None,
    };
    let method = match (&engine, &loaded) {
        (EngineArg::Sa, _) => DseMethod::Annealing,
        (EngineArg::Ga, _) => DseMethod::Genetic,
        (EngineArg::Exhaustive, _) => DseMethod::Exhaustive,
        (EngineArg::Rlmd, Some((agent, gpp))) => DseMethod::Rlmd { agent, gpp },
        (EngineArg::Rlmd, None) => unreachable!("models loaded above"),
    };

    let report = sweep_pareto(&method, &dfg, Some(&targets), &cfg);
    for err in &report.errors {
        s.log(format_args!(
            "target {} failed: {}",
            err.dsp_target, err.message
        ));
    }
    if report.records.is_empty() {
        return Err(CliError::Validation(
            "every target failed; no frontier to write".to_string(),
        ));
    }
    let frontier = frontier_csv(&report.records);
    write_text(out, &frontier)?;
    let records_path = out.with_extension("records.csv");
    write_text(&records_path, &records_csv(&report.records))?;
    s.log(format_args!(
        "wrote {} and {}",
        out.display(),
        records_path.display()
    ));
    print!("{frontier}");
    Ok(())
}

fn cmd_compare(s: &Settings, input: &Path, out: &Path, slack: bool) -> Result<(), CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(input)
        .map_err(|e| io_ctx(input, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".records.csv"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Validation(format!(
            "no *.records.csv files in {}",
            input.display()
        )));
    }
    let mut records = Vec::new();
    for path in &paths {
        let text = std::fs::read_to_string(path).map_err(|e| io_ctx(path, e))?;
        let mut parsed = parse_records_csv::<Real>(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        records.append(&mut parsed);
    }
    let summaries = compare_report(&records, slack);
    let csv = compare_csv(&summaries);
    write_text(out, &csv)?;
    s.log(format_args!(
        "compared {} engines over {} records",
        summaries.len(),
        records.len()
    ));
    print!("{csv}");
    Ok(())
}

fn cmd_eval(dfg_path: &Path) -> Result<(), CliError> {
    let dfg = read_dfg_validated(dfg_path)?;
    print!("{}", costs_csv_text(&dfg));
    Ok(())
}

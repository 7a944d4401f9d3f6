//! `rcsl`: run the offline-RL experiments and emit CSV or JSON reports.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rcsl_core::environments::{
    build_grid_maze, build_linearq, build_linearq_dataset, build_reward_ambiguity_pair,
    build_stitch_counterexample, generate_maze_dataset,
};
use rcsl_core::experiments::{
    linearq_sim, lower_bound, mbrcsl_maze, reward_ambiguity, stitching, AmbiguityConfig, LinearQSimConfig,
    MazeConfig, WidthSpec,
};
use rcsl_core::mdp::{write_jsonl, MdpSpec, Trajectory};
use rcsl_core::nn::{OptimizerKind, TrainConfig};
use rcsl_core::ExperimentReport;

const EXIT_USAGE: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "rcsl",
    version,
    about = "Return-conditioned supervised learning experiments on tabular MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train MLP-RCSL and Q-learning on LinearQ and report gaps to optimal.
    LinearqSim(LinearqSimArgs),
    /// Check one of the two counterexamples exactly.
    Counterexample(CounterexampleArgs),
    /// Compare MBRCSL against plain RCSL on the grid maze.
    MbrcslMaze(MazeArgs),
    /// Hidden-width lower bounds for the LinearQ reward.
    LowerBound(LowerBoundArgs),
    /// Build environments and their offline datasets.
    Env {
        #[command(subcommand)]
        command: EnvCommand,
    },
}

#[derive(Subcommand, Debug)]
enum EnvCommand {
    /// Write the MDP as JSON and its dataset as JSON lines.
    Build(EnvBuildArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Output {
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug, Clone)]
struct Train {
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, value_enum, default_value_t = Optimizer::Adam)]
    optimizer: Optimizer,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Optimizer {
    Sgd,
    Adam,
}

impl Train {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: 0,
            optimizer: match self.optimizer {
                Optimizer::Sgd => OptimizerKind::Sgd,
                Optimizer::Adam => OptimizerKind::Adam,
            },
        }
    }
}

fn parse_width(s: &str) -> std::result::Result<WidthSpec, String> {
    s.parse().map_err(|e: rcsl_core::Error| e.to_string())
}

#[derive(Args, Debug)]
struct LinearqSimArgs {
    #[arg(long, value_delimiter = ',', default_value = "16")]
    u: Vec<usize>,
    /// RCSL hidden width(s); `u`-relative forms like `2u` or `u/2` allowed.
    #[arg(long, value_delimiter = ',', default_value = "16", value_parser = parse_width)]
    width: Vec<WidthSpec>,
    #[arg(long, value_delimiter = ',', default_value = "16,u/2,u,2u,4u", value_parser = parse_width)]
    ql_widths: Vec<WidthSpec>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    seeds: Vec<u64>,
    /// Copies of each behavior policy in the dataset.
    #[arg(long, default_value_t = 1)]
    dataset_n: usize,
    #[arg(long, default_value_t = 10)]
    target_update_epochs: usize,
    #[command(flatten)]
    train: Train,
    #[command(flatten)]
    output: Output,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum CounterexampleKind {
    RewardAmbiguity,
    Stitching,
}

#[derive(Args, Debug)]
struct CounterexampleArgs {
    #[arg(long, value_enum)]
    kind: CounterexampleKind,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    seeds: Vec<u64>,
    /// Half-horizons for the reward-ambiguity pair.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    h0: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    width: usize,
    /// Monte Carlo episodes per seed for the stitching cross-check.
    #[arg(long, default_value_t = 10_000)]
    mc_episodes: usize,
    #[command(flatten)]
    train: Train,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct MazeArgs {
    #[arg(long, default_value_t = 8)]
    horizon: usize,
    /// Trajectories per scripted route in the offline dataset.
    #[arg(long, default_value_t = 10)]
    n_per_script: usize,
    #[arg(long, default_value_t = 100)]
    n_target: usize,
    #[arg(long, default_value_t = 10_000)]
    max_attempts: usize,
    #[arg(long, default_value_t = 100)]
    eval_episodes: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 16)]
    width: usize,
    #[command(flatten)]
    train: Train,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct LowerBoundArgs {
    #[arg(long, value_delimiter = ',', default_value = "16,32,48,64,80,96,112,128,144,160")]
    u: Vec<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum EnvKind {
    Linearq,
    RewardAmbiguity,
    Stitching,
    Maze,
}

#[derive(Args, Debug)]
struct EnvBuildArgs {
    #[arg(long, value_enum)]
    kind: EnvKind,
    #[arg(long, default_value_t = 16)]
    u: usize,
    /// LinearQ dataset multiplicity, or maze trajectories per route.
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    h0: usize,
    #[arg(long, default_value_t = 8)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn emit(report: &ExperimentReport, output: &Output) -> Result<()> {
    let write = |w: &mut dyn Write| -> rcsl_core::Result<()> {
        match output.format {
            Format::Csv => report.write_csv(w),
            Format::Json => report.write_json(w),
        }
    };
    match &output.out {
        Some(path) => {
            let mut w =
                BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            write(&mut w)?;
            w.flush()?;
        }
        None => write(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn write_env(dir: &Path, name: &str, mdp: &MdpSpec, data: &[Trajectory]) -> Result<()> {
    let mdp_path = dir.join(format!("{name}.mdp.json"));
    fs::write(&mdp_path, serde_json::to_string_pretty(mdp)? + "\n")
        .with_context(|| format!("writing {}", mdp_path.display()))?;
    let data_path = dir.join(format!("{name}.dataset.jsonl"));
    let mut w = BufWriter::new(
        File::create(&data_path).with_context(|| format!("creating {}", data_path.display()))?,
    );
    write_jsonl(&mut w, data)?;
    w.flush()?;
    eprintln!("wrote {} and {} ({} trajectories)", mdp_path.display(), data_path.display(), data.len());
    Ok(())
}

fn env_build(args: &EnvBuildArgs) -> Result<()> {
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    match args.kind {
        EnvKind::Linearq => {
            let env = build_linearq(args.u)?;
            let data = build_linearq_dataset(args.u, args.n, args.seed)?;
            write_env(&args.out, &format!("linearq_u{}", args.u), &env.mdp, &data)
        }
        EnvKind::RewardAmbiguity => {
            let pair = build_reward_ambiguity_pair(args.h0, args.n, 1.0, 0.0)?;
            write_env(&args.out, "ambiguity_m1", &pair.m1, &pair.d1)?;
            write_env(&args.out, "ambiguity_m2", &pair.m2, &pair.d2)
        }
        EnvKind::Stitching => {
            let c = build_stitch_counterexample();
            write_env(&args.out, "stitching", &c.mdp, &c.dataset)
        }
        EnvKind::Maze => {
            let maze = build_grid_maze(args.horizon)?;
            let data = generate_maze_dataset(&maze, args.n, args.n, args.seed)?;
            write_env(&args.out, "maze", &maze.mdp, &data)
        }
    }
}

/// Runs the command; `Ok(false)` means a checked property failed.
fn run(cli: Cli) -> Result<bool> {
    let (report, output) = match cli.command {
        Command::LinearqSim(a) => {
            let cfg = LinearQSimConfig {
                u_list: a.u,
                rcsl_widths: a.width,
                ql_widths: a.ql_widths,
                seeds: a.seeds,
                train: a.train.config(),
                dataset_n: a.dataset_n,
                target_update_epochs: a.target_update_epochs,
            };
            (linearq_sim(&cfg)?, a.output)
        }
        Command::Counterexample(a) => {
            let report = match a.kind {
                CounterexampleKind::RewardAmbiguity => reward_ambiguity(&AmbiguityConfig {
                    h0_list: a.h0,
                    seeds: a.seeds,
                    width: a.width,
                    train: a.train.config(),
                })?,
                CounterexampleKind::Stitching => stitching(&a.seeds, a.mc_episodes)?,
            };
            (report, a.output)
        }
        Command::MbrcslMaze(a) => {
            let cfg = MazeConfig {
                horizon: a.horizon,
                n_per_script: a.n_per_script,
                n_target: a.n_target,
                max_attempts: a.max_attempts,
                seeds: a.seeds,
                width: a.width,
                eval_episodes: a.eval_episodes,
                train: a.train.config(),
            };
            (mbrcsl_maze(&cfg)?, a.output)
        }
        Command::LowerBound(a) => (lower_bound(&a.u)?, a.output),
        Command::Env { command: EnvCommand::Build(a) } => {
            env_build(&a)?;
            return Ok(true);
        }
    };
    emit(&report, &output)?;
    for row in report.failures() {
        eprintln!(
            "check failed: {} {} seed {:?}: achieved {:?}, optimal {:?}, gap {:?}; {}",
            row.method, row.instance, row.seed, row.achieved_return, row.optimal_return, row.gap, row.note
        );
    }
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

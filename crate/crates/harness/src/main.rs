use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use subgoal_core::env::GridReward;
use subgoal_core::SeededRng;
use subgoal_harness::checkpoint::Checkpoint;
use subgoal_harness::config::{load_config, save_config, under_output_root, PROTOCOL_EPISODES};
use subgoal_harness::run::{load_run_report, train};
use subgoal_harness::{compare, evaluate, oracle_csv, output};
use subgoal_harness::{ExperimentConfig, LearnerKind, Mode, Result, TaskKind};

#[derive(Parser)]
#[command(name = "subgoal", version, about = "Curriculum vs flat training on MiniBuild and GridNav")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardArg {
    Sparse,
    StepCost,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a JSON config and write report, curves, checkpoint and eval.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write every stored replay tuple as JSON lines (dqn only).
        #[arg(long)]
        dump_replay: bool,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = PROTOCOL_EPISODES)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare curriculum and flat runs (run directories or report.json files).
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        curriculum: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        flat: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Exact Q* of a GridNav layout (`gridnav5` etc.) as CSV.
    Oracle {
        #[arg(long)]
        env: String,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = RewardArg::StepCost)]
        reward: RewardArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print or write a fully resolved default config.
    DumpConfig {
        #[arg(long, value_enum)]
        task: TaskKind,
        #[arg(long, value_enum, default_value_t = Mode::Curriculum)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = LearnerKind::Ppo)]
        learner: LearnerKind,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn write_or_print(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => output::write_text(&under_output_root(p), text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train {
            config,
            seed,
            output,
            dump_replay,
        } => {
            let mut c: ExperimentConfig = load_config(&config)?;
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(o) = output {
                c.output_dir = o;
            }
            let dir = under_output_root(&c.output_dir);
            let out = train(&c, &dir, dump_replay)?;
            let eval = out.report.eval.as_ref();
            println!(
                "{}: {} samples, eval mean {:.3} max {:.3}, checkpoint {}",
                dir.display(),
                out.report.report.total_samples,
                eval.map_or(f64::NAN, |e| e.mean),
                eval.map_or(f64::NAN, |e| e.max),
                out.checkpoint_hash
            );
            Ok(())
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
            output,
        } => {
            let (c, hash) = Checkpoint::load(&checkpoint)?;
            let report = evaluate::evaluate(&c, hash, episodes, &mut SeededRng::new(seed))?;
            write_or_print(output.as_deref(), &serde_json::to_string_pretty(&report)?)
        }
        Command::Compare {
            curriculum,
            flat,
            output,
        } => {
            let load = |paths: &[PathBuf]| paths.iter().map(|p| load_run_report(p)).collect::<Result<Vec<_>>>();
            let cmp = compare::compare(&load(&curriculum)?, &load(&flat)?)?;
            print!("{}", compare::render(&cmp));
            if let Some(p) = output {
                output::write_json(&under_output_root(&p), &cmp)?;
            }
            Ok(())
        }
        Command::Oracle {
            env,
            gamma,
            reward,
            output,
        } => {
            let reward = match reward {
                RewardArg::Sparse => GridReward::SparseGoal,
                RewardArg::StepCost => GridReward::StepCost,
            };
            let path = under_output_root(&output);
            let s = oracle_csv::export(&env, gamma, reward, &path)?;
            println!("{}: {} sweeps, residual {:e}", path.display(), s.iterations, s.residual);
            Ok(())
        }
        Command::DumpConfig {
            task,
            mode,
            learner,
            seed,
            output,
        } => {
            let c = ExperimentConfig::defaults(task, mode, learner, seed)?;
            match output {
                Some(p) => save_config(&c, &under_output_root(&p)),
                None => write_or_print(None, &c.to_json()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

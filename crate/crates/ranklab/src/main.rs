//! Thin CLI over the library pipeline. All logic lives in
//! `ranklab::harness`; this binary only parses flags and maps errors to
//! exit codes (0 ok, 2 config, 3 missing dependency, 4 oracle failure).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ranklab::harness::{all_checks, ExperimentConfig, Pipeline};

#[derive(Parser)]
#[command(name = "ranklab", version, about = "slate-ranking experiment lab")]
struct Cli {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for pipeline artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Added to every replicate seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,

    /// Worker threads for session-level parallelism (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the world and write world.json.
    GenWorld,
    /// Simulate sessions for an arm (or `bootstrap` exploration traffic).
    Simulate {
        #[arg(long)]
        arm: String,
    },
    /// Build the training set for an arm from bootstrap traffic.
    BuildLabels {
        #[arg(long)]
        arm: String,
    },
    /// Train an arm's predictor from its labels.
    Train {
        #[arg(long)]
        arm: String,
    },
    /// Search ensemble weights for an arm on held-out traffic.
    Tune {
        #[arg(long)]
        arm: String,
    },
    /// Log homepage ranking decisions for an arm.
    Rank {
        #[arg(long)]
        arm: String,
    },
    /// Log feed re-ranking decisions (pointwise vs beam) for an arm.
    Rerank {
        #[arg(long)]
        arm: String,
    },
    /// Per-arm reports and lift tables for configured comparisons.
    Report,
    /// Full paired A/B pipeline for two arms.
    RunExperiment { arm_a: String, arm_b: String },
    /// Run every brute-force oracle suite; nonzero exit on any failure.
    OracleCheck,
}

fn pipeline(cli: &Cli) -> ranklab::Result<Pipeline> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| ranklab::Error::Config("--config is required".into()))?;
    let config = ExperimentConfig::load(config_path)?;
    let out = cli
        .out
        .clone()
        .or_else(|| config.experiment.out_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            ranklab::Error::Config("no output dir: pass --out or set experiment.out_dir".into())
        })?;
    Ok(Pipeline::new(config, out, cli.seed_offset))
}

fn run(cli: &Cli) -> ranklab::Result<i32> {
    match &cli.command {
        Command::OracleCheck => {
            let mut failed = 0;
            for check in all_checks() {
                let status = if check.passed { "PASS" } else { "FAIL" };
                println!("[{status}] {}: {}", check.name, check.detail);
                failed += (!check.passed) as i32;
            }
            return Ok(if failed > 0 { 4 } else { 0 });
        }
        _ => {}
    }

    let p = pipeline(cli)?;
    match &cli.command {
        Command::GenWorld => {
            let world = p.gen_world()?;
            println!(
                "world: {} users, {} items, {} categories -> {}",
                world.users.len(),
                world.items.len(),
                world.categories.len(),
                p.world_path().display()
            );
        }
        Command::Simulate { arm } => {
            let world = p.load_world()?;
            let replicates = p.simulate_arm(arm, &world)?;
            let sessions: usize = replicates.iter().map(Vec::len).sum();
            println!("simulated {} replicate(s), {} sessions", replicates.len(), sessions);
        }
        Command::BuildLabels { arm } => {
            let world = p.load_world()?;
            let samples = p.build_labels(arm, &world)?;
            println!("built {} samples -> {}", samples.len(), p.labels_path(arm).display());
        }
        Command::Train { arm } => {
            let model = p.train_arm(arm)?;
            println!(
                "trained {} heads -> {}",
                model.heads.len(),
                p.model_path(arm).display()
            );
        }
        Command::Tune { arm } => {
            let world = p.load_world()?;
            let artifact = p.tune_arm(arm, &world)?;
            let w = artifact.result.best_weights;
            println!(
                "best objective {:.4} (default {:.4}) at weights ({:.3}, {:.3}, {:.3})",
                artifact.result.best_objective,
                artifact.result.default_objective,
                w.w1,
                w.w2,
                w.w3
            );
        }
        Command::Rank { arm } => {
            let world = p.load_world()?;
            let n = p.rank_batch(arm, &world)?;
            println!("logged {n} homepage rankings -> {}", p.ranks_path(arm).display());
        }
        Command::Rerank { arm } => {
            let world = p.load_world()?;
            let decisions = p.rerank_batch(arm, &world)?;
            let table = ranklab::harness::hitrate_table(&decisions, &[1, 3, 5])
                .unwrap_or_default();
            let summary: Vec<String> =
                table.iter().map(|(k, v)| format!("{k}={v:.3}")).collect();
            println!("{} decisions ({})", decisions.len(), summary.join(", "));
        }
        Command::Report => {
            let tables = p.report_all()?;
            for t in &tables {
                print!("{}", t.render());
            }
        }
        Command::RunExperiment { arm_a, arm_b } => {
            let lift = p.run_experiment(arm_a, arm_b)?;
            print!("{}", lift.render());
        }
        Command::OracleCheck => unreachable!("handled above"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok();
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

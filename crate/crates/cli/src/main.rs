use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use lanehrl_core::harness::{
    evaluate_policy, export, rollout, train_adjustment, train_decision, write_csv_file, write_curves, write_episode,
    write_episodes_csv, AdjustModule, EpisodeMetrics, ExportKind, ModelSet, Purpose, ScenarioChoice, TrainConfig,
    DECISION_DIR, FOLLOWING_DIR, LANE_CHANGE_DIR,
};
use lanehrl_core::agent::Exploration;
use lanehrl_core::value::{load_quadratic, save_dqn, save_quadratic};
use lanehrl_core::Error;

/// Hierarchical RL lane-change agent: training curriculum, evaluation and export.
#[derive(Debug, Parser)]
#[command(name = "lanehrl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Key-value config file; every field is addressable by dotted key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seeds model initialisation, exploration and scenario sampling
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "runs/latest")]
    out: PathBuf,

    /// Overrides `total_steps`.
    #[arg(long, global = true)]
    steps: Option<u64>,

    /// Model directory to read from (defaults to `--out`).
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the car-following adjustment module.
    TrainFollowing,
    /// Train the gap-alignment adjustment module.
    TrainLanechange,
    /// Train the decision network with both adjustment modules frozen.
    TrainDecision,
    /// Evaluate the full hierarchy on fresh scenarios and the canonical scene.
    Eval,
    /// Record one greedy episode on the scenario drawn from `--seed`.
    Rollout,
    /// Export metrics, a trajectory or checkpoints from a run directory.
    Export {
        #[arg(value_parser = ["metrics", "trajectory", "checkpoint"])]
        what: String,
    },
}

impl Cli {
    fn train_config(&self) -> lanehrl_core::Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => TrainConfig::load(path)?,
            None => TrainConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(steps) = self.steps {
            cfg.total_steps = steps;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn model_dir(&self) -> &Path {
        self.checkpoint.as_deref().unwrap_or(&self.out)
    }
}

fn progress(name: &'static str) -> impl FnMut(&EpisodeMetrics) {
    move |m| {
        if (m.episode + 1) % 50 == 0 {
            eprintln!(
                "{name}: episode {} reward {:.2} steps {} {}",
                m.episode + 1,
                m.cumulative_reward,
                m.steps,
                m.cause.as_str()
            );
        }
    }
}

fn save_config(cfg: &TrainConfig, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    cfg.save(&out.join("config.txt"))?;
    Ok(())
}

fn train_adjust(cli: &Cli, module: AdjustModule, dir: &str) -> Result<()> {
    let cfg = cli.train_config()?;
    save_config(&cfg, &cli.out)?;
    let run = train_adjustment(module, &cfg, &mut progress(module.name()))?;
    save_quadratic(&cli.out.join(dir), &run.model, cfg.gamma, cfg.total_steps)?;
    write_curves(&cli.out, module.name(), &run.curves)?;
    let (first, last) = run.curves.reward_trend(0.1).unwrap_or((f64::NAN, f64::NAN));
    println!(
        "{}: {} episodes, mean reward first 10% {first:.3}, last 10% {last:.3}",
        module.name(),
        run.curves.episodes.len()
    );
    Ok(())
}

fn train_decision_cmd(cli: &Cli) -> Result<()> {
    let cfg = cli.train_config()?;
    let from = cli.model_dir();
    let (following, _) = load_quadratic(&from.join(FOLLOWING_DIR)).context("loading the car-following module")?;
    let (lane_change, _) = load_quadratic(&from.join(LANE_CHANGE_DIR)).context("loading the lane-change module")?;
    save_config(&cfg, &cli.out)?;
    let run = train_decision(&cfg, &following, &lane_change, &mut progress("decision"))?;
    save_dqn(&cli.out.join(DECISION_DIR), &run.model, cfg.gamma, cfg.total_steps)?;
    if from != cli.out.as_path() {
        save_quadratic(&cli.out.join(FOLLOWING_DIR), &following, cfg.gamma, 0)?;
        save_quadratic(&cli.out.join(LANE_CHANGE_DIR), &lane_change, cfg.gamma, 0)?;
    }
    write_curves(&cli.out, "decision", &run.curves)?;
    let (first, last) = run.curves.reward_trend(0.1).unwrap_or((f64::NAN, f64::NAN));
    println!(
        "decision: {} episodes, mean reward first 10% {first:.3}, last 10% {last:.3}",
        run.curves.episodes.len()
    );
    Ok(())
}

fn load_models(cli: &Cli, seed: u64) -> Result<ModelSet> {
    let (models, missing) = ModelSet::load_or_fresh(cli.model_dir(), seed)?;
    for name in missing {
        eprintln!("warning: no {name} model in {}, using a fresh one", cli.model_dir().display());
    }
    Ok(models)
}

fn eval_cmd(cli: &Cli) -> Result<()> {
    let cfg = cli.train_config()?;
    let models = load_models(cli, cfg.seed)?;
    let report = evaluate_policy(
        models.view(),
        &cfg,
        Purpose::Full,
        ScenarioChoice::Random,
        cfg.eval_episodes,
        cfg.seed,
        Exploration::GREEDY,
        false,
    )?;
    let rows: Vec<EpisodeMetrics> = report.episodes.iter().map(|e| e.metrics.clone()).collect();
    write_csv_file(&cli.out.join("eval_episodes.csv"), |w| write_episodes_csv(w, &rows))?;
    let canonical = evaluate_policy(
        models.view(),
        &cfg,
        Purpose::Full,
        ScenarioChoice::Canonical,
        1,
        cfg.seed,
        Exploration::GREEDY,
        true,
    )?;
    write_episode(&cli.out.join("canonical"), &canonical.episodes[0])?;
    let settle = report
        .mean_settling_time
        .map_or_else(|| "n/a".to_owned(), |t| format!("{t:.1} s"));
    println!(
        "eval: {} episodes, collision rate {:.3}, completion rate {:.3}, mean settling time {settle}",
        report.episodes.len(),
        report.collision_rate,
        report.completion_rate
    );
    Ok(())
}

fn rollout_cmd(cli: &Cli) -> Result<()> {
    let cfg = cli.train_config()?;
    let models = match &cli.checkpoint {
        Some(_) => load_models(cli, cfg.seed)?,
        None => ModelSet::fresh(cfg.seed)?,
    };
    let record = rollout(&models, &cfg, cfg.seed)?;
    write_episode(&cli.out, &record)?;
    println!(
        "rollout: seed {} steps {} cause {}",
        cfg.seed,
        record.metrics.steps,
        record.metrics.cause.as_str()
    );
    Ok(())
}

fn export_cmd(cli: &Cli, what: &str) -> Result<()> {
    let cfg = cli.train_config()?;
    let Some(run_dir) = &cli.checkpoint else {
        bail!(Error::Config("export needs --checkpoint <run dir>".into()));
    };
    let kind = ExportKind::from_name(what).expect("validated by clap");
    for path in export(run_dir, kind, &cli.out, &cfg)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::TrainFollowing => train_adjust(cli, AdjustModule::CarFollowing, FOLLOWING_DIR),
        Command::TrainLanechange => train_adjust(cli, AdjustModule::LaneChange, LANE_CHANGE_DIR),
        Command::TrainDecision => train_decision_cmd(cli),
        Command::Eval => eval_cmd(cli),
        Command::Rollout => rollout_cmd(cli),
        Command::Export { what } => export_cmd(cli, what),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Parse { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

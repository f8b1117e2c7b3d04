//! Command-line front end: `train`, `eval`, `compare`, `dump-targets`, `dump-config`.

mod manifest;
mod metrics;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use manifest::{unix_now, RunManifest};
pub use metrics::{MetricsRow, MetricsWriter, METRICS_HEADER, TIMING_HEADER};

use crate::algorithm::{
    collect_segments, evaluate, model_predictions, ActionSelection, Agent, ConfigOverrides, EvalSummary, Mode,
    ModeArg, RolloutRecord, ScheduleKind, TrainConfig, Trainer,
};
use crate::checkpoint;
use crate::envs::{make_env, EnvId, EnvOptions, VecEnv};
use crate::error::{Error, Result};
use crate::seeding::{rng_for, streams};
use crate::targets::{compute_tables, write_dump, DeltaSource, MedianScope, TargetParams};

pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "final.ckpt";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

#[derive(Debug, Parser)]
#[command(name = "pome", version, about = "PPO and POME on small discrete MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one configuration and write metrics, manifest and checkpoint.
    Train(TrainArgs),
    /// Roll out a checkpoint and print return statistics.
    Eval(EvalArgs),
    /// Train every (mode, seed) cell and print an aggregate table.
    Compare(CompareArgs),
    /// Write the per-timestep target table for a checkpoint rollout.
    DumpTargets(DumpTargetsArgs),
    /// Print the fully resolved configuration as TOML.
    DumpConfig(ConfigArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        s == Switch::On
    }
}

/// Hyperparameter flags shared by every training command.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with config values; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// chain<N>, detgrid<N> or noisycorridor.
    #[arg(long)]
    pub env: Option<EnvId>,
    #[arg(long)]
    pub sparse_reward: bool,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub total_steps: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long, value_enum)]
    pub alpha_schedule: Option<ScheduleKind>,
    #[arg(long, value_enum)]
    pub bonus_clip: Option<Switch>,
    #[arg(long)]
    pub clip_ratio: Option<f64>,
    #[arg(long, value_enum)]
    pub clip_schedule: Option<ScheduleKind>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub cv: Option<f64>,
    #[arg(long)]
    pub ct: Option<f64>,
    #[arg(long)]
    pub cr: Option<f64>,
    #[arg(long)]
    pub entropy_coef: Option<f64>,
    #[arg(long)]
    pub lr0: Option<f64>,
    #[arg(long, value_enum)]
    pub lr_schedule: Option<ScheduleKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub minibatches: Option<usize>,
    #[arg(long, value_enum)]
    pub adv_norm: Option<Switch>,
    #[arg(long, value_parser = parse_scope)]
    pub median_scope: Option<MedianScope>,
}

fn parse_scope(s: &str) -> std::result::Result<MedianScope, String> {
    match s {
        "worker" => Ok(MedianScope::Worker),
        "batch" => Ok(MedianScope::Batch),
        _ => Err(format!("expected worker or batch, got {s:?}")),
    }
}

impl ConfigArgs {
    pub fn flag_overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            env: self.env,
            sparse_reward: self.sparse_reward.then_some(true),
            mode: self.mode,
            gamma: self.gamma,
            lambda: self.lambda,
            k: self.k,
            workers: self.workers,
            clip_ratio: self.clip_ratio,
            clip_schedule: self.clip_schedule,
            alpha0: self.alpha0,
            alpha_schedule: self.alpha_schedule,
            bonus_clip: self.bonus_clip.map(bool::from),
            beta: self.beta,
            cv: self.cv,
            ct: self.ct,
            cr: self.cr,
            entropy_coef: self.entropy_coef,
            lr0: self.lr0,
            lr_schedule: self.lr_schedule,
            epochs: self.epochs,
            minibatches: self.minibatches,
            adv_norm: self.adv_norm.map(bool::from),
            median_scope: self.median_scope,
            total_steps: self.total_steps,
            seed: self.seed,
        }
    }

    /// Flags over file values over defaults.
    pub fn overrides(&self) -> Result<ConfigOverrides> {
        let file = match &self.config {
            Some(path) => ConfigOverrides::from_file(path)?,
            None => ConfigOverrides::default(),
        };
        Ok(file.layered(&self.flag_overrides()))
    }

    pub fn resolve(&self) -> Result<TrainConfig> {
        self.overrides()?.resolve()
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Rerun the exact configuration stored in a previous run's manifest.
    #[arg(long, conflicts_with = "config")]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "runs/train")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub env: EnvId,
    #[arg(long)]
    pub sparse_reward: bool,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub episodes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ActionSelection::Greedy)]
    pub selection: ActionSelection,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub modes: Vec<ModeArg>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    #[arg(long, default_value = "runs/compare")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DumpTargetsArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Rollout length per worker; defaults to the config's k.
    #[arg(long)]
    pub steps: Option<usize>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => 2,
        _ => 1,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Eval(args) => cmd_eval(&args).map(|_| ()),
        Command::Compare(args) => cmd_compare(&args).map(|_| ()),
        Command::DumpTargets(args) => cmd_dump_targets(&args).map(|_| ()),
        Command::DumpConfig(args) => {
            print!("{}", args.resolve()?.to_toml());
            Ok(())
        }
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let config = match &args.manifest {
        Some(path) => {
            let mut config = RunManifest::load(path)?.config;
            // Flags still apply on top of the manifest.
            let flags = args.config.flag_overrides();
            if flags != ConfigOverrides::default() {
                config = overrides_from(&config).layered(&flags).resolve()?;
            }
            config
        }
        None => args.config.resolve()?,
    };
    let outcome = train_run(&config, &args.out_dir)?;
    println!(
        "finished {} iterations, {} steps: mean_return={} median_return={} episodes={}",
        outcome.iterations, outcome.total_steps, outcome.mean_return, outcome.median_return, outcome.episodes
    );
    Ok(())
}

fn overrides_from(config: &TrainConfig) -> ConfigOverrides {
    let mode = match config.mode {
        Mode::Ppo => ModeArg::Ppo,
        Mode::PpoModelBased => ModeArg::PpoModelBased,
        Mode::Pome => ModeArg::Pome,
    };
    ConfigOverrides {
        env: Some(config.env),
        sparse_reward: Some(config.sparse_reward),
        mode: Some(mode),
        gamma: Some(config.gamma),
        lambda: Some(config.lambda),
        k: Some(config.k),
        workers: Some(config.workers),
        clip_ratio: Some(config.clip_ratio),
        clip_schedule: Some(config.clip_schedule),
        alpha0: (config.mode == Mode::Pome).then_some(config.alpha0),
        alpha_schedule: Some(config.alpha_schedule),
        bonus_clip: Some(config.bonus_clip),
        beta: Some(config.beta),
        cv: Some(config.cv),
        ct: Some(config.ct),
        cr: Some(config.cr),
        entropy_coef: Some(config.entropy_coef),
        lr0: Some(config.lr0),
        lr_schedule: Some(config.lr_schedule),
        epochs: Some(config.epochs),
        minibatches: Some(config.minibatches),
        adv_norm: Some(config.adv_norm),
        median_scope: Some(config.median_scope),
        total_steps: Some(config.total_steps),
        seed: Some(config.seed),
    }
}

/// Summary of a completed training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub iterations: usize,
    pub total_steps: usize,
    pub mean_return: f64,
    pub median_return: f64,
    pub episodes: usize,
}

/// Trains `config` to completion, writing every artifact into `out_dir`.
/// Metrics rows are flushed as they are produced, so a failed run keeps its prefix.
pub fn train_run(config: &TrainConfig, out_dir: &Path) -> Result<TrainOutcome> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest::new(config);
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    let mut writer = MetricsWriter::create(&out_dir.join(METRICS_FILE), &out_dir.join(TIMING_FILE))?;

    let start = Instant::now();
    let mut trainer = Trainer::new(config.clone())?;
    while !trainer.is_finished() {
        let report = trainer.train_iteration()?;
        writer.append(&MetricsRow::from(&report), start.elapsed().as_secs_f64())?;
    }
    checkpoint::save(&out_dir.join(CHECKPOINT_FILE), &trainer.agent().params)?;
    manifest.finished_unix = Some(unix_now());
    manifest.save(&out_dir.join(MANIFEST_FILE))?;

    let (mean_return, median_return) = trainer.recent_returns();
    Ok(TrainOutcome {
        iterations: trainer.iteration(),
        total_steps: trainer.steps_done(),
        mean_return,
        median_return,
        episodes: trainer.episode_returns().len(),
    })
}

/// Loads a checkpoint and checks it against the environment's dimensions.
pub fn load_agent(path: &Path, env: EnvId, options: EnvOptions) -> Result<Agent> {
    let params = checkpoint::load(path)?;
    let agent = Agent::from_params(params)?;
    let spec = make_env(env, options).spec().clone();
    if agent.observation_dim() != spec.observation_dim || agent.action_count() != spec.action_count {
        return Err(Error::shape(
            "checkpoint (observation_dim, action_count)",
            &[spec.observation_dim, spec.action_count],
            &[agent.observation_dim(), agent.action_count()],
        ));
    }
    Ok(agent)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalSummary> {
    let options = EnvOptions {
        sparse_reward: args.sparse_reward,
    };
    let agent = load_agent(&args.checkpoint, args.env, options)?;
    let mut env = make_env(args.env, options);
    let summary = evaluate(&agent, env.as_mut(), args.episodes as usize, args.seed, args.selection)?;
    println!(
        "episodes={} mean={} median={} stddev={}",
        summary.episodes, summary.mean, summary.median, summary.stddev
    );
    Ok(summary)
}

/// One row of the compare table.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeAggregate {
    pub mode: ModeArg,
    /// Final-window mean return per seed; `None` where the cell failed.
    pub finals: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub best: bool,
}

pub fn mode_name(mode: ModeArg) -> &'static str {
    match mode {
        ModeArg::Ppo => "ppo",
        ModeArg::Pome => "pome",
        ModeArg::PomeNondecay => "pome_nondecay",
        ModeArg::PpoModelBased => "ppo_model_based",
    }
}

/// Mean over the cells that succeeded and best-mode marking (ties all marked).
pub fn aggregate(modes: &[ModeArg], finals: Vec<Vec<Option<f64>>>) -> Vec<ModeAggregate> {
    let mut rows: Vec<ModeAggregate> = modes
        .iter()
        .zip(finals)
        .map(|(&mode, finals)| {
            let ok: Vec<f64> = finals.iter().flatten().copied().collect();
            let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
            ModeAggregate {
                mode,
                finals,
                mean,
                best: false,
            }
        })
        .collect();
    let best = rows.iter().filter_map(|r| r.mean).fold(f64::NEG_INFINITY, f64::max);
    for r in &mut rows {
        r.best = r.mean == Some(best);
    }
    rows
}

pub fn cmd_compare(args: &CompareArgs) -> Result<Vec<ModeAggregate>> {
    let base = args.config.overrides()?;
    let mut finals = Vec::with_capacity(args.modes.len());
    let mut failures = 0usize;
    for &mode in &args.modes {
        let mut row = Vec::with_capacity(args.seeds.len());
        for &seed in &args.seeds {
            let cell = ConfigOverrides {
                mode: Some(mode),
                seed: Some(seed),
                ..Default::default()
            };
            let dir = args.out_dir.join(mode_name(mode)).join(format!("seed{seed}"));
            let result = base.clone().layered(&cell).resolve().and_then(|c| train_run(&c, &dir));
            match result {
                Ok(outcome) => {
                    println!("{} seed {seed}: final mean return {}", mode_name(mode), outcome.mean_return);
                    row.push(Some(outcome.mean_return));
                }
                Err(e) => {
                    eprintln!("{} seed {seed}: failed: {e}", mode_name(mode));
                    failures += 1;
                    row.push(None);
                }
            }
        }
        finals.push(row);
    }
    let rows = aggregate(&args.modes, finals);
    std::fs::create_dir_all(&args.out_dir)?;
    let table = format_aggregate(&rows, &args.seeds);
    std::fs::write(args.out_dir.join(AGGREGATE_FILE), &table)?;
    print!("{table}");
    if failures > 0 {
        return Err(Error::Contract(format!("{failures} compare cell(s) failed")));
    }
    Ok(rows)
}

/// CSV: mode, one column per seed, mean, best ("*" marks the winner).
pub fn format_aggregate(rows: &[ModeAggregate], seeds: &[u64]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "failed".to_owned(), |x| x.to_string());
    let mut out = String::from("mode");
    for s in seeds {
        out.push_str(&format!(",seed{s}"));
    }
    out.push_str(",mean,best\n");
    for r in rows {
        out.push_str(mode_name(r.mode));
        for &f in &r.finals {
            out.push(',');
            out.push_str(&cell(f));
        }
        out.push_str(&format!(",{},{}\n", cell(r.mean), if r.best { "*" } else { "" }));
    }
    out
}

/// Mean ε inside and outside the environment's stochastic region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneSummary {
    pub inside_mean: f64,
    pub inside_count: usize,
    pub outside_mean: f64,
    pub outside_count: usize,
}

pub fn zone_summary(venv: &VecEnv, record: &RolloutRecord) -> ZoneSummary {
    let (mut si, mut ni, mut so, mut no) = (0.0, 0usize, 0.0, 0usize);
    for (seg, tab) in record.segments.iter().zip(&record.tables) {
        for (obs, &eps) in seg.observations.iter().zip(&tab.eps) {
            if venv.in_stochastic_region(obs) {
                si += eps;
                ni += 1;
            } else {
                so += eps;
                no += 1;
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    ZoneSummary {
        inside_mean: mean(si, ni),
        inside_count: ni,
        outside_mean: mean(so, no),
        outside_count: no,
    }
}

/// Rolls the agent out for `steps` per worker under `config` and computes its target tables
/// with α at its initial value.
pub fn rollout_targets(agent: &Agent, config: &TrainConfig, steps: usize) -> Result<(VecEnv, RolloutRecord)> {
    let mut venv = VecEnv::from_id(config.env, config.env_options(), config.workers)?;
    let mut observations = venv.reset(config.seed);
    let mut rngs: Vec<_> = (0..config.workers)
        .map(|w| rng_for(config.seed, streams::POLICY + w as u64))
        .collect();
    let mut returns = Vec::new();
    let segments = collect_segments(agent, &mut venv, &mut observations, &mut rngs, steps, &mut returns)?;
    let predictions = model_predictions(agent, &segments)?;
    let source = match config.mode {
        Mode::Ppo => DeltaSource::ModelFree,
        Mode::Pome => DeltaSource::Pome {
            alpha: config.alpha0,
            clip: config.bonus_clip,
        },
        Mode::PpoModelBased => DeltaSource::ModelBased,
    };
    let params = TargetParams {
        gamma: config.gamma,
        lambda: config.lambda,
        median_scope: config.median_scope,
        source,
    };
    let tables = compute_tables(&segments, &predictions, &params)?;
    Ok((venv, RolloutRecord { segments, tables }))
}

pub fn cmd_dump_targets(args: &DumpTargetsArgs) -> Result<ZoneSummary> {
    let config = args.config.resolve()?;
    let agent = load_agent(&args.checkpoint, config.env, config.env_options())?;
    let steps = args.steps.unwrap_or(config.k);
    if steps == 0 {
        return Err(Error::config("steps", "must be positive"));
    }
    let (venv, record) = rollout_targets(&agent, &config, steps)?;
    match &args.out {
        Some(path) => {
            let file = std::io::BufWriter::new(std::fs::File::create(path)?);
            write_dump(file, &record.segments, &record.tables)?;
        }
        None => write_dump(std::io::stdout().lock(), &record.segments, &record.tables)?,
    }
    let zone = zone_summary(&venv, &record);
    let mut err = std::io::stderr().lock();
    writeln!(
        err,
        "eps inside stochastic region: mean={} n={}; outside: mean={} n={}",
        zone.inside_mean, zone.inside_count, zone.outside_mean, zone.outside_count
    )?;
    Ok(zone)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_marks_best_and_skips_failures() {
        let rows = aggregate(
            &[ModeArg::Ppo, ModeArg::Pome],
            vec![vec![Some(0.5), Some(1.0)], vec![Some(1.0), None]],
        );
        assert_eq!(rows[0].mean, Some(0.75));
        assert_eq!(rows[1].mean, Some(1.0));
        assert!(!rows[0].best && rows[1].best);
        let table = format_aggregate(&rows, &[0, 1]);
        assert_eq!(table, "mode,seed0,seed1,mean,best\nppo,0.5,1,0.75,\npome,1,failed,1,*\n");
    }

    #[test]
    fn manifest_overrides_round_trip() {
        for mode in [ModeArg::Ppo, ModeArg::Pome, ModeArg::PomeNondecay, ModeArg::PpoModelBased] {
            let cfg = ConfigOverrides {
                mode: Some(mode),
                ..Default::default()
            }
            .resolve()
            .unwrap();
            assert_eq!(overrides_from(&cfg).resolve().unwrap(), cfg);
        }
    }
}

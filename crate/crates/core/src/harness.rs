//! Config-driven experiment orchestration: seeded runs, multi-seed sweeps,
//! CSV record streams, and plot-data emission.
//!
//! One master seed drives each run; child randomness comes from fixed
//! labeled ChaCha streams (agent sampling, observation noise, environment
//! setup, offline data), so adding a consumer never perturbs the others.

use crate::games::{
    cumulative_regret, mesh_for_target, run_game, stackelberg_wrap, AdversaryView, GameEnv,
    GameError, RoundRecord, SimplexGrid,
};
use crate::gp::{ConfidenceConfig, GpError, Observation, PosteriorModel};
use crate::kernels::{GamePoint, KernelSpec};
use crate::policies::{
    eta_for_horizon, exp3_default_mixing, Agent, BestOfflineAgent, Exp3Agent, FixedActionAgent,
    GpUcbAgent, HedgeAgent, MaxMinAgent, PolicyError, SingleOpponentAgent, StackelUcbAgent,
};
use crate::synthetic::{StackelbergParams, StackelbergSyntheticEnv, SyntheticEnv, SyntheticParams};
use crate::traffic::{RoadNetwork, TrafficEnv, TrafficParams};
use crate::wildlife::{build_wildlife_env, WildlifeEnv, WildlifeParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Labeled child streams of the master seed.
pub mod streams {
    pub const AGENT: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const ENV_SETUP: u64 = 3;
    pub const OFFLINE: u64 = 4;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical consistency error: {0}")]
    Numerical(String),
    #[error(transparent)]
    Game(GameError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 for config problems, 3 for numerical
    /// inconsistencies, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numerical(_) => 3,
            _ => 1,
        }
    }
}

fn classify_game_error(err: GameError) -> HarnessError {
    if let GameError::Policy(PolicyError::Gp(g)) = &err {
        match g {
            GpError::NegativeVariance { .. } | GpError::FactorizationFailed => {
                return HarnessError::Numerical(g.to_string());
            }
            _ => {}
        }
    }
    HarnessError::Game(err)
}

fn default_scale() -> f64 {
    0.01
}
fn default_lambda() -> f64 {
    1.0
}
fn default_n_offline() -> usize {
    1000
}
fn default_l_b() -> f64 {
    1.0
}
fn default_grid_cap() -> usize {
    100_000
}

/// Which environment to play.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    Synthetic {
        #[serde(default)]
        params: SyntheticParams,
    },
    Traffic {
        network: PathBuf,
        #[serde(default = "default_scale")]
        scale: f64,
        params: TrafficParams,
    },
    Wildlife {
        park: PathBuf,
    },
    StackelbergSynthetic {
        #[serde(default)]
        params: StackelbergParams,
        #[serde(default = "default_l_b")]
        response_lipschitz: f64,
        #[serde(default = "default_grid_cap")]
        grid_cap: usize,
    },
}

/// Which agent plays the learner.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentConfig {
    Stackelucb,
    SingleUcb,
    Hedge,
    Exp3,
    GpUcb,
    MaxMin,
    BestOffline {
        #[serde(default = "default_n_offline")]
        n_offline: usize,
    },
    FixedAction {
        index: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub kernel: KernelSpec,
    pub confidence: ConfidenceConfig,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub eta_override: Option<f64>,
    #[serde(default)]
    pub gamma_mix_override: Option<f64>,
}

impl ExperimentConfig {
    /// Loads and validates a config file; fixture paths are resolved
    /// relative to the config's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        match &mut cfg.env {
            EnvConfig::Traffic { network, .. } => {
                if network.is_relative() {
                    *network = base.join(&network);
                }
            }
            EnvConfig::Wildlife { park } => {
                if park.is_relative() {
                    *park = base.join(&park);
                }
            }
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.horizon < 1 {
            return Err(HarnessError::Config("horizon must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("need at least one seed".into()));
        }
        if self.lambda <= 0.0 {
            return Err(HarnessError::Config("lambda must be positive".into()));
        }
        self.kernel
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        self.confidence
            .validate()
            .map_err(|_| HarnessError::Config("invalid confidence parameters".into()))?;
        match &self.env {
            EnvConfig::Traffic { network, .. } => {
                if !network.exists() {
                    return Err(HarnessError::Config(format!(
                        "network fixture not found: {}",
                        network.display()
                    )));
                }
            }
            EnvConfig::Wildlife { park } => {
                if !park.exists() {
                    return Err(HarnessError::Config(format!(
                        "park fixture not found: {}",
                        park.display()
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// A concrete environment built for one seeded run.
pub enum BuiltEnv {
    Synthetic(SyntheticEnv),
    Traffic(TrafficEnv),
    Wildlife(WildlifeEnv),
    Stackelberg(Box<crate::games::GridStackelbergEnv<StackelbergSyntheticEnv>>),
}

impl BuiltEnv {
    pub fn as_game_env(&self) -> &dyn GameEnv {
        match self {
            BuiltEnv::Synthetic(e) => e,
            BuiltEnv::Traffic(e) => e,
            BuiltEnv::Wildlife(e) => e,
            BuiltEnv::Stackelberg(e) => e.as_ref(),
        }
    }
}

/// Builds the configured environment with the run's master seed.
pub fn build_env(config: &ExperimentConfig, seed: u64) -> Result<BuiltEnv, HarnessError> {
    let mut setup_rng = ChaCha8Rng::seed_from_u64(seed);
    setup_rng.set_stream(streams::ENV_SETUP);
    match &config.env {
        EnvConfig::Synthetic { params } => {
            Ok(BuiltEnv::Synthetic(SyntheticEnv::new(params, &mut setup_rng)))
        }
        EnvConfig::Traffic {
            network,
            scale,
            params,
        } => {
            let net = RoadNetwork::from_file(network, *scale)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let env = TrafficEnv::new(net, params, seed)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            Ok(BuiltEnv::Traffic(env))
        }
        EnvConfig::Wildlife { park } => {
            let text = std::fs::read_to_string(park)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", park.display())))?;
            let params: WildlifeParams = serde_json::from_str(&text)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", park.display())))?;
            Ok(BuiltEnv::Wildlife(build_wildlife_env(&params, seed)))
        }
        EnvConfig::StackelbergSynthetic {
            params,
            response_lipschitz,
            grid_cap,
        } => {
            let base = StackelbergSyntheticEnv::new(params, &mut setup_rng);
            let l_r = {
                use crate::games::SimplexLeaderGame;
                base.oracle().lipschitz()
            };
            let mesh = mesh_for_target(
                params.n_targets,
                l_r,
                *response_lipschitz,
                config.horizon,
                *grid_cap,
            );
            let grid = SimplexGrid::new(params.n_targets, mesh.resolution);
            Ok(BuiltEnv::Stackelberg(Box::new(stackelberg_wrap(base, grid))))
        }
    }
}

/// The constant opponent type used by single-opponent agents: the type the
/// environment emits at round 0 with empty history.
fn theta_bar_of(env: &dyn GameEnv) -> Vec<f64> {
    env.type_at(
        0,
        &AdversaryView {
            strategies: &[],
            realized_actions: &[],
        },
    )
}

/// Builds the configured agent against a built environment. The agent
/// borrows the environment's reward oracle.
pub fn build_agent<'e>(
    config: &ExperimentConfig,
    built: &'e BuiltEnv,
    seed: u64,
) -> Result<Box<dyn Agent + 'e>, HarnessError> {
    let env = built.as_game_env();
    let actions = env.actions().to_vec();
    let n = actions.len();
    let horizon = config.horizon;
    let mut agent_rng = ChaCha8Rng::seed_from_u64(seed);
    agent_rng.set_stream(streams::AGENT);
    let eta = config.eta_override.unwrap_or(eta_for_horizon(n, horizon));
    let wrap_policy = |e: PolicyError| classify_game_error(GameError::Policy(e));

    match &config.agent {
        AgentConfig::Stackelucb => {
            let model = PosteriorModel::new(config.kernel.clone(), config.lambda, env.response_dim());
            let agent = StackelUcbAgent::new(
                actions,
                env.oracle(),
                model,
                config.confidence.clone(),
                eta,
                env.reward_range(),
                agent_rng,
            )
            .map_err(wrap_policy)?;
            Ok(Box::new(agent))
        }
        AgentConfig::SingleUcb => {
            let model = PosteriorModel::new(config.kernel.clone(), config.lambda, env.response_dim());
            let agent = SingleOpponentAgent::new(
                actions,
                env.oracle(),
                model,
                config.confidence.clone(),
                theta_bar_of(env),
            )
            .map_err(wrap_policy)?;
            Ok(Box::new(agent))
        }
        AgentConfig::Hedge => {
            let agent =
                HedgeAgent::new(n, eta, env.reward_range(), agent_rng).map_err(wrap_policy)?;
            Ok(Box::new(agent))
        }
        AgentConfig::Exp3 => {
            let gamma = config
                .gamma_mix_override
                .unwrap_or(exp3_default_mixing(n, horizon));
            let exp3_eta = config.eta_override.unwrap_or(gamma / n as f64);
            let agent = Exp3Agent::new(n, exp3_eta, gamma, env.reward_range(), agent_rng)
                .map_err(wrap_policy)?;
            Ok(Box::new(agent))
        }
        AgentConfig::GpUcb => {
            // this baseline regresses observed rewards, so its assumed noise
            // scale follows the rewards' range rather than the response's
            let (lo, hi) = env.reward_range();
            let mut conf = config.confidence.clone();
            conf.sigma_noise = 0.02 * (hi - lo);
            let model = PosteriorModel::new(config.kernel.clone(), config.lambda, 1);
            let agent = GpUcbAgent::new(actions, model, conf, theta_bar_of(env))
                .map_err(wrap_policy)?;
            Ok(Box::new(agent))
        }
        AgentConfig::MaxMin => {
            let samples: Vec<Vec<f64>> = match built {
                BuiltEnv::Wildlife(w) => w.candidates().iter().map(|c| c.to_vec()).collect(),
                _ => {
                    let theta = theta_bar_of(env);
                    actions.iter().map(|x| env.respond(x, &theta)).collect()
                }
            };
            let agent =
                MaxMinAgent::new(env.oracle(), &actions, &samples).map_err(wrap_policy)?;
            Ok(Box::new(agent))
        }
        AgentConfig::BestOffline { n_offline } => {
            let theta = theta_bar_of(env);
            let mut offline_rng = ChaCha8Rng::seed_from_u64(seed);
            offline_rng.set_stream(streams::OFFLINE);
            let mut model =
                PosteriorModel::new(config.kernel.clone(), config.lambda, env.response_dim());
            let sigma = env.noise_sigma();
            use rand::Rng;
            use rand_distr::{Distribution, StandardNormal};
            for _ in 0..*n_offline {
                let idx = offline_rng.random_range(0..n);
                let y: Vec<f64> = env
                    .respond(&actions[idx], &theta)
                    .iter()
                    .map(|v| {
                        let eps: f64 = StandardNormal.sample(&mut offline_rng);
                        v + sigma * eps
                    })
                    .collect();
                model
                    .update(Observation::new(
                        GamePoint::new(actions[idx].clone(), theta.clone()),
                        y,
                    ))
                    .map_err(|e| classify_game_error(GameError::Policy(e.into())))?;
            }
            let agent = BestOfflineAgent::new(&model, env.oracle(), &actions, &theta)
                .map_err(wrap_policy)?;
            Ok(Box::new(agent))
        }
        AgentConfig::FixedAction { index } => {
            if *index >= n {
                return Err(HarnessError::Config(format!(
                    "fixed_action index {index} out of range (env has {n} actions)"
                )));
            }
            Ok(Box::new(FixedActionAgent::new(*index)))
        }
    }
}

/// Per-run derived metrics.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub cumulative_reward: f64,
    pub final_regret: f64,
    pub time_avg_regret: Vec<f64>,
    /// Mean reward over the last ten rounds; the settled performance level.
    pub tail_reward_mean: f64,
    pub avg_congestion: Option<f64>,
    pub rounds_to_within_5pct_of_opt: Option<usize>,
    pub opt_reward: Option<f64>,
}

/// Full output of one seeded run.
pub struct RunResult {
    pub seed: u64,
    pub records: Vec<RoundRecord>,
    pub regret: Vec<f64>,
    pub summary: RunSummary,
}

/// Executes the full game loop for one seed and derives the summary.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<RunResult, HarnessError> {
    config.validate()?;
    let built = build_env(config, seed)?;
    let env = built.as_game_env();
    let mut agent = build_agent(config, &built, seed)?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(streams::NOISE);
    let records = run_game(env, agent.as_mut(), config.horizon, noise_rng)
        .map_err(classify_game_error)?;
    let regret = cumulative_regret(&records, env);

    let time_avg_regret: Vec<f64> = regret
        .iter()
        .enumerate()
        .map(|(t, r)| r / (t + 1) as f64)
        .collect();
    let avg_congestion = match &built {
        BuiltEnv::Traffic(_) => Some(
            records.iter().map(|r| r.y_true[0]).sum::<f64>() / records.len().max(1) as f64,
        ),
        _ => None,
    };
    let (opt_reward, rounds_to_within) = match &built {
        BuiltEnv::Wildlife(w) => {
            let (_, opt) = w.optimal_action();
            let threshold = opt - 0.05 * opt.abs();
            let first = records.iter().find(|r| r.reward >= threshold).map(|r| r.t + 1);
            (Some(opt), first)
        }
        _ => (None, None),
    };
    let tail = records.len().saturating_sub(10);
    let tail_reward_mean =
        records[tail..].iter().map(|r| r.reward).sum::<f64>() / (records.len() - tail).max(1) as f64;
    let summary = RunSummary {
        seed,
        cumulative_reward: records.last().map_or(0.0, |r| r.cumulative_reward),
        final_regret: regret.last().copied().unwrap_or(0.0),
        time_avg_regret,
        tail_reward_mean,
        avg_congestion,
        rounds_to_within_5pct_of_opt: rounds_to_within,
        opt_reward,
    };
    Ok(RunResult {
        seed,
        records,
        regret,
        summary,
    })
}

/// Mean and standard error of a metric across runs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    pub stderr: f64,
}

pub fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Aggregate { mean, stderr: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Aggregate {
        mean,
        stderr: (var / n).sqrt(),
    }
}

/// Independent seeded runs, optionally in parallel; results come back in
/// seed order regardless of scheduling.
pub fn sweep(
    config: &ExperimentConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<RunResult>, HarnessError> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one seed".into()));
    }
    if jobs <= 1 {
        seeds.iter().map(|&s| run_experiment(config, s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        pool.install(|| {
            seeds
                .par_iter()
                .map(|&s| run_experiment(config, s))
                .collect()
        })
    }
}

fn fmt_f(v: f64) -> String {
    // 17 significant digits round-trip f64 exactly
    format!("{:.16e}", v)
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(";")
}

/// Writes the per-round record stream; one row per round, header first.
pub fn write_records_csv(
    records: &[RoundRecord],
    regret: &[f64],
    path: &Path,
) -> Result<(), HarnessError> {
    let mut out = String::from(
        "t,action_index,theta,y_observed,y_true,reward,optimistic_reward,cumulative_reward,cumulative_regret,strategy_entropy,solver_fallback\n",
    );
    for (rec, reg) in records.iter().zip(regret) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            rec.t,
            rec.action_index,
            fmt_vec(&rec.theta),
            fmt_vec(&rec.y_observed),
            fmt_vec(&rec.y_true),
            fmt_f(rec.reward),
            rec.optimistic_reward.map(fmt_f).unwrap_or_default(),
            fmt_f(rec.cumulative_reward),
            fmt_f(*reg),
            rec.strategy_entropy.map(fmt_f).unwrap_or_default(),
            u8::from(rec.solver_fallback),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes per-seed summaries plus mean/stderr aggregate rows.
pub fn write_summary_csv(summaries: &[RunSummary], path: &Path) -> Result<(), HarnessError> {
    let mut out = String::from(
        "seed,cumulative_reward,final_regret,tail_reward_mean,avg_congestion,rounds_to_within_5pct_of_opt,opt_reward\n",
    );
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.seed,
            fmt_f(s.cumulative_reward),
            fmt_f(s.final_regret),
            fmt_f(s.tail_reward_mean),
            s.avg_congestion.map(fmt_f).unwrap_or_default(),
            s.rounds_to_within_5pct_of_opt
                .map(|r| r.to_string())
                .unwrap_or_default(),
            s.opt_reward.map(fmt_f).unwrap_or_default(),
        ));
    }
    let rewards = aggregate(&summaries.iter().map(|s| s.cumulative_reward).collect::<Vec<_>>());
    let regrets = aggregate(&summaries.iter().map(|s| s.final_regret).collect::<Vec<_>>());
    let tails = aggregate(&summaries.iter().map(|s| s.tail_reward_mean).collect::<Vec<_>>());
    for (label, pick) in [
        ("mean", 0usize),
        ("stderr", 1usize),
    ] {
        let get = |a: Aggregate| if pick == 0 { a.mean } else { a.stderr };
        out.push_str(&format!(
            "{label},{},{},{},,,\n",
            fmt_f(get(rewards)),
            fmt_f(get(regrets)),
            fmt_f(get(tails)),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Per-edge time-averaged congestion of a traffic run, recomputed from the
/// recorded types.
pub fn traffic_edge_congestion(
    env: &TrafficEnv,
    records: &[RoundRecord],
) -> Result<Vec<f64>, HarnessError> {
    let n_edges = env.network().edges.len();
    let mut acc = vec![0.0; n_edges];
    for rec in records {
        let plan = &env.actions()[rec.action_index];
        let z = env
            .occupancy(plan, &rec.theta)
            .map_err(|e| HarnessError::Numerical(e.to_string()))?;
        for (e, &load) in z.iter().enumerate() {
            acc[e] += crate::traffic::edge_congestion(env.network().edges[e].capacity, load)
                .map_err(|e| HarnessError::Numerical(e.to_string()))?;
        }
    }
    let t = records.len().max(1) as f64;
    for a in &mut acc {
        *a /= t;
    }
    Ok(acc)
}

pub fn write_edge_congestion_csv(
    env: &TrafficEnv,
    records: &[RoundRecord],
    path: &Path,
) -> Result<(), HarnessError> {
    let avg = traffic_edge_congestion(env, records)?;
    let mut out = String::from("edge_id,from,to,time_avg_congestion\n");
    for (e, c) in avg.iter().enumerate() {
        let edge = &env.network().edges[e];
        out.push_str(&format!(
            "{},{},{},{}\n",
            e,
            edge.from + 1,
            edge.to + 1,
            fmt_f(*c)
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes everything a run produces under `out_dir`.
pub fn write_run_outputs(
    config: &ExperimentConfig,
    result: &RunResult,
    out_dir: &Path,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    let records_path = out_dir.join(format!("records_seed{}.csv", result.seed));
    write_records_csv(&result.records, &result.regret, &records_path)?;
    if let EnvConfig::Traffic { .. } = &config.env {
        // rebuild the env to recover per-edge structure for the map
        if let BuiltEnv::Traffic(env) = build_env(config, result.seed)? {
            let path = out_dir.join(format!("edge_congestion_seed{}.csv", result.seed));
            write_edge_congestion_csv(&env, &result.records, &path)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    TimeAvgRegret,
    RewardCurve,
    CongestionMap,
}

impl std::str::FromStr for PlotKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "time_avg_regret" => Ok(PlotKind::TimeAvgRegret),
            "reward_curve" => Ok(PlotKind::RewardCurve),
            "congestion_map" => Ok(PlotKind::CongestionMap),
            _ => Err(format!("unknown plot kind: {s}")),
        }
    }
}

fn list_sorted(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>, HarnessError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(prefix) && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn read_column(path: &Path, column: &str) -> Result<Vec<f64>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Config(format!("{}: empty csv", path.display())))?;
    let idx = header
        .split(',')
        .position(|c| c == column)
        .ok_or_else(|| HarnessError::Config(format!("{}: no column {column}", path.display())))?;
    let mut out = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let field = line.split(',').nth(idx).unwrap_or("");
        out.push(field.parse::<f64>().map_err(|e| {
            HarnessError::Config(format!("{}: bad value in {column}: {e}", path.display()))
        })?);
    }
    Ok(out)
}

/// Aggregates run CSVs in `in_dir` into plot data: `(t, mean, stderr)` rows
/// for curves, `(edge_id, from, to, time_avg_congestion)` for maps.
pub fn emit_plot_data(
    in_dir: &Path,
    kind: PlotKind,
    out_dir: &Path,
) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    match kind {
        PlotKind::TimeAvgRegret | PlotKind::RewardCurve => {
            let files = list_sorted(in_dir, "records_seed")?;
            if files.is_empty() {
                return Err(HarnessError::Config(format!(
                    "no records_seed*.csv in {}",
                    in_dir.display()
                )));
            }
            let (column, name) = match kind {
                PlotKind::TimeAvgRegret => ("cumulative_regret", "plot_time_avg_regret.csv"),
                _ => ("reward", "plot_reward_curve.csv"),
            };
            let mut series: Vec<Vec<f64>> = Vec::new();
            for f in &files {
                let mut col = read_column(f, column)?;
                if kind == PlotKind::TimeAvgRegret {
                    for (t, v) in col.iter_mut().enumerate() {
                        *v /= (t + 1) as f64;
                    }
                }
                series.push(col);
            }
            let t_max = series.iter().map(|s| s.len()).min().unwrap_or(0);
            let mut out = String::from("t,mean,stderr\n");
            for t in 0..t_max {
                let vals: Vec<f64> = series.iter().map(|s| s[t]).collect();
                let agg = aggregate(&vals);
                out.push_str(&format!(
                    "{},{},{}\n",
                    t + 1,
                    fmt_f(agg.mean),
                    fmt_f(agg.stderr)
                ));
            }
            let path = out_dir.join(name);
            std::fs::write(&path, out)?;
            Ok(path)
        }
        PlotKind::CongestionMap => {
            let files = list_sorted(in_dir, "edge_congestion_seed")?;
            if files.is_empty() {
                return Err(HarnessError::Config(format!(
                    "no edge_congestion_seed*.csv in {}",
                    in_dir.display()
                )));
            }
            let mut sums: Vec<f64> = Vec::new();
            let mut meta: Vec<(String, String)> = Vec::new();
            for (i, f) in files.iter().enumerate() {
                let text = std::fs::read_to_string(f)?;
                for (row, line) in text.lines().skip(1).enumerate() {
                    let fields: Vec<&str> = line.split(',').collect();
                    if fields.len() != 4 {
                        continue;
                    }
                    if i == 0 {
                        sums.push(0.0);
                        meta.push((fields[1].to_string(), fields[2].to_string()));
                    }
                    sums[row] += fields[3].parse::<f64>().map_err(|e| {
                        HarnessError::Config(format!("{}: {e}", f.display()))
                    })?;
                }
            }
            let mut out = String::from("edge_id,from,to,time_avg_congestion\n");
            for (e, sum) in sums.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    e,
                    meta[e].0,
                    meta[e].1,
                    fmt_f(sum / files.len() as f64)
                ));
            }
            let path = out_dir.join("plot_congestion_map.csv");
            std::fs::write(&path, out)?;
            Ok(path)
        }
    }
}

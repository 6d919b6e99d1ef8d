//! Decision rules for the learner: the optimistic multiplicative-weights
//! algorithm, its single-opponent bilevel specialization, and the baseline
//! policies (Hedge, Exp3, GP-UCB, Max-Min, Best-offline).

mod agents;
pub mod solver;

pub use agents::{
    Agent, AgentReport, BestOfflineAgent, Exp3Agent, FixedActionAgent, GpUcbAgent, HedgeAgent,
    MaxMinAgent, RoundOutcome, SingleOpponentAgent, StackelUcbAgent,
};
pub use solver::BoxMax;

use crate::gp::{ConfidenceConfig, GpError, PosteriorModel};
use crate::kernels::GamePoint;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("action set is empty")]
    EmptyActionSet,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("reward {0} outside [0, 1] after rescaling")]
    RewardOutOfRange(f64),
    #[error("played action has zero probability")]
    ZeroProbabilityPlayed,
    #[error("full-information feedback required but not supplied")]
    MissingFullInformation,
    #[error("non-finite reward")]
    NonFiniteReward,
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// A probability vector over a finite action set. Entries stay nonnegative
/// and renormalized to sum 1 after every update.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    probs: Vec<f64>,
}

impl Strategy {
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "strategy needs at least one action");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn from_probs(probs: Vec<f64>) -> Result<Self, PolicyError> {
        if probs.is_empty() {
            return Err(PolicyError::EmptyActionSet);
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(PolicyError::InvalidStrategy(
                "entries must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if sum <= 0.0 {
            return Err(PolicyError::InvalidStrategy("all entries zero".into()));
        }
        let mut s = Self { probs };
        s.renormalize();
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn renormalize(&mut self) {
        let sum: f64 = self.probs.iter().sum();
        for p in &mut self.probs {
            *p /= sum;
        }
    }

    /// Multiplicative-weights step: `p'[i] ∝ p[i] · exp(η · reward[i])`.
    /// Computed in log space, so a constant shift of the rewards leaves the
    /// result unchanged.
    pub fn mw_update(&self, rewards: &[f64], eta: f64) -> Result<Strategy, PolicyError> {
        if rewards.len() != self.probs.len() {
            return Err(PolicyError::LengthMismatch {
                expected: self.probs.len(),
                got: rewards.len(),
            });
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(PolicyError::NonFiniteReward);
        }
        let logw: Vec<f64> = self
            .probs
            .iter()
            .zip(rewards)
            .map(|(p, r)| p.max(f64::MIN_POSITIVE).ln() + eta * r)
            .collect();
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut next = Strategy {
            probs: logw.iter().map(|l| (l - max).exp()).collect(),
        };
        next.renormalize();
        Ok(next)
    }

    /// Samples an index by inverse CDF using exactly one uniform draw.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = i;
            }
            cum += p;
            if u < cum {
                return i;
            }
        }
        last_positive
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }
}

/// The learner's known reward function `r(x, y)` together with its
/// maximization over a response box.
///
/// `eval` must be Lipschitz in `(x, y)` under the 1-norm with the constant
/// reported by `lipschitz`; `maximize_over_box` must dominate `eval` at
/// every response inside the box up to solver tolerance.
pub trait RewardOracle {
    fn eval(&self, action: &[f64], response: &[f64]) -> f64;

    /// Lipschitz constant of `eval` under ‖·‖₁, from configuration.
    fn lipschitz(&self) -> f64;

    fn maximize_over_box(&self, action: &[f64], lcb: &[f64], ucb: &[f64]) -> BoxMax {
        solver::maximize_over_box(|y| self.eval(action, y), lcb, ucb)
    }
}

impl<T: RewardOracle + ?Sized> RewardOracle for &T {
    fn eval(&self, action: &[f64], response: &[f64]) -> f64 {
        (**self).eval(action, response)
    }

    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }

    fn maximize_over_box(&self, action: &[f64], lcb: &[f64], ucb: &[f64]) -> BoxMax {
        (**self).maximize_over_box(action, lcb, ucb)
    }
}

/// Largest reward consistent with the confidence box around the unknown
/// response at `(action, theta)`.
#[derive(Debug, Clone)]
pub struct OptimisticReward {
    pub value: f64,
    pub argmax_response: Vec<f64>,
    pub solver_fallback: bool,
}

/// Computes the optimistic reward `max_y r(x, y)` subject to
/// `y ∈ [lcb(x,θ), ucb(x,θ)]` (a per-dimension box for vector responses).
pub fn optimistic_reward<O: RewardOracle + ?Sized>(
    oracle: &O,
    model: &PosteriorModel,
    conf: &ConfidenceConfig,
    action: &[f64],
    theta: &[f64],
) -> Result<OptimisticReward, PolicyError> {
    let query = GamePoint::new(action.to_vec(), theta.to_vec());
    let (lcb, ucb) = model.conf_bounds(conf, &query)?;
    let bm = oracle.maximize_over_box(action, &lcb, &ucb);
    Ok(OptimisticReward {
        value: bm.value,
        argmax_response: bm.argmax,
        solver_fallback: bm.fallback,
    })
}

/// Theorem learning step `η = √(8 log|X| / T)`.
pub fn eta_for_horizon(n_actions: usize, horizon: usize) -> f64 {
    (8.0 * (n_actions as f64).ln() / horizon as f64).sqrt()
}

/// Standard Exp3 mixing level `min(1, √(|X| ln|X| / ((e−1) T)))`.
pub fn exp3_default_mixing(n_actions: usize, horizon: usize) -> f64 {
    let n = n_actions as f64;
    (n * n.ln() / ((std::f64::consts::E - 1.0) * horizon as f64))
        .sqrt()
        .min(1.0)
}

/// Full-information multiplicative-weights update (Hedge).
pub fn hedge_update(
    strategy: &Strategy,
    full_rewards: &[f64],
    eta: f64,
) -> Result<Strategy, PolicyError> {
    strategy.mw_update(full_rewards, eta)
}

/// Bandit multiplicative-weights update with uniform mixing (Exp3).
///
/// The strategy is the sampling distribution itself; the played entry gets
/// the importance-weighted boost `exp(η · reward / p[played])` and the
/// result is mixed with the uniform distribution at level `gamma_mix`.
/// Rewards must already be rescaled into [0, 1].
pub fn exp3_update(
    strategy: &Strategy,
    played: usize,
    reward: f64,
    eta: f64,
    gamma_mix: f64,
) -> Result<Strategy, PolicyError> {
    let n = strategy.len();
    if played >= n {
        return Err(PolicyError::LengthMismatch {
            expected: n,
            got: played,
        });
    }
    if !(0.0..=1.0).contains(&reward) || !reward.is_finite() {
        return Err(PolicyError::RewardOutOfRange(reward));
    }
    let p_played = strategy.probs[played];
    if p_played <= 0.0 {
        return Err(PolicyError::ZeroProbabilityPlayed);
    }
    let mut boost = vec![0.0; n];
    boost[played] = reward / p_played;
    let reweighted = strategy.mw_update(&boost, eta)?;
    let uniform = 1.0 / n as f64;
    Strategy::from_probs(
        reweighted
            .probs
            .iter()
            .map(|p| (1.0 - gamma_mix) * p + gamma_mix * uniform)
            .collect(),
    )
}

/// Single-opponent bilevel rule: the action maximizing the optimistic reward
/// against the known type. Ties break toward the lowest index.
pub fn single_opponent_act<O: RewardOracle + ?Sized>(
    oracle: &O,
    model: &PosteriorModel,
    conf: &ConfidenceConfig,
    actions: &[Vec<f64>],
    theta_bar: &[f64],
) -> Result<(usize, OptimisticReward), PolicyError> {
    if actions.is_empty() {
        return Err(PolicyError::EmptyActionSet);
    }
    let mut best: Option<(usize, OptimisticReward)> = None;
    for (i, action) in actions.iter().enumerate() {
        let opt = optimistic_reward(oracle, model, conf, action, theta_bar)?;
        if best.as_ref().is_none_or(|(_, b)| opt.value > b.value) {
            best = Some((i, opt));
        }
    }
    Ok(best.expect("nonempty action set"))
}

/// GP-UCB over the composite objective: argmax of `μ_g + β σ_g` where the
/// model regresses observed rewards directly.
pub fn gp_ucb_act(
    model: &PosteriorModel,
    conf: &ConfidenceConfig,
    actions: &[Vec<f64>],
    theta_bar: &[f64],
) -> Result<usize, PolicyError> {
    if actions.is_empty() {
        return Err(PolicyError::EmptyActionSet);
    }
    let beta = conf.beta_t(model);
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, action) in actions.iter().enumerate() {
        let q = GamePoint::new(action.clone(), theta_bar.to_vec());
        let mu = model.posterior_mean(&q)?[0];
        let sd = model.posterior_var_scalar(&q)?.sqrt();
        let score = mu + beta * sd;
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(best.0)
}

/// Worst-case rule: argmax over actions of the minimum reward over a sample
/// of candidate responses.
pub fn max_min_act<O: RewardOracle + ?Sized>(
    oracle: &O,
    actions: &[Vec<f64>],
    response_samples: &[Vec<f64>],
) -> Result<usize, PolicyError> {
    if actions.is_empty() {
        return Err(PolicyError::EmptyActionSet);
    }
    if response_samples.is_empty() {
        return Err(PolicyError::LengthMismatch {
            expected: 1,
            got: 0,
        });
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, action) in actions.iter().enumerate() {
        let worst = response_samples
            .iter()
            .map(|y| oracle.eval(action, y))
            .fold(f64::INFINITY, f64::min);
        if worst > best.1 {
            best = (i, worst);
        }
    }
    Ok(best.0)
}

/// Offline rule: argmax over actions of the reward at the offline posterior
/// mean response.
pub fn best_offline_act<O: RewardOracle + ?Sized>(
    offline_model: &PosteriorModel,
    oracle: &O,
    actions: &[Vec<f64>],
    theta_bar: &[f64],
) -> Result<usize, PolicyError> {
    if actions.is_empty() {
        return Err(PolicyError::EmptyActionSet);
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, action) in actions.iter().enumerate() {
        let q = GamePoint::new(action.clone(), theta_bar.to_vec());
        let mu = offline_model.posterior_mean(&q)?;
        let v = oracle.eval(action, &mu);
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok(best.0)
}

/// Affine map of a reward into [0, 1] given the environment's declared
/// range; inputs are clamped to the range first so observation noise cannot
/// push the result outside the unit interval.
pub fn rescale_reward(value: f64, range: (f64, f64)) -> f64 {
    let (lo, hi) = range;
    debug_assert!(hi > lo, "declared reward range must have positive width");
    ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
}

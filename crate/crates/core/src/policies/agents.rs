//! Round-by-round agents wrapping the decision rules.
//!
//! The game loop calls [`Agent::choose`] before the opponent's type is
//! revealed, then hands the revealed type and the (noisy) response to
//! [`Agent::observe`]. Full-information feedback is only supplied to agents
//! that declare needing it.

use super::{
    best_offline_act, exp3_update, hedge_update, max_min_act, rescale_reward, PolicyError,
    RewardOracle, Strategy,
};
use crate::gp::{ConfidenceConfig, Observation, PosteriorModel, TrackedQueries};
use crate::kernels::GamePoint;
use rand_chacha::ChaCha8Rng;

/// Everything revealed to the agent after one round.
#[derive(Debug)]
pub struct RoundOutcome<'a> {
    pub t: usize,
    pub action_index: usize,
    pub theta: &'a [f64],
    pub y_observed: &'a [f64],
    /// Reward computed from the observed (noisy) response.
    pub reward_observed: f64,
    /// True rewards of every action this round; present only for
    /// full-information agents.
    pub full_rewards: Option<&'a [f64]>,
}

/// Per-round bookkeeping the agent reports back for logging.
#[derive(Debug, Clone, Default)]
pub struct AgentReport {
    pub optimistic_reward: Option<f64>,
    pub solver_fallback: bool,
}

pub trait Agent {
    /// Picks the action index for the current round. Called before the
    /// opponent's type is revealed.
    fn choose(&mut self) -> Result<usize, PolicyError>;

    /// Digests the revealed type and response.
    fn observe(&mut self, outcome: &RoundOutcome) -> Result<AgentReport, PolicyError>;

    /// Current randomized strategy, when the agent plays one.
    fn strategy(&self) -> Option<&Strategy> {
        None
    }

    fn needs_full_info(&self) -> bool {
        false
    }
}

/// Small exact-match cache of per-type tracked query sets. The traffic
/// opponent draws a fresh type every round (no reuse), while synthetic and
/// wildlife opponents cycle through a handful, so a short list suffices.
struct TypeCache {
    entries: Vec<(Vec<f64>, TrackedQueries)>,
    capacity: usize,
}

impl TypeCache {
    fn new(capacity: usize) -> Self {
        Self {
            entries: Vec::new(),
            capacity,
        }
    }

    fn get_or_insert(
        &mut self,
        model: &PosteriorModel,
        actions: &[Vec<f64>],
        theta: &[f64],
    ) -> Result<&mut TrackedQueries, PolicyError> {
        if let Some(pos) = self.entries.iter().position(|(k, _)| k == theta) {
            let entry = self.entries.remove(pos);
            self.entries.push(entry);
        } else {
            let queries = actions
                .iter()
                .map(|a| GamePoint::new(a.clone(), theta.to_vec()))
                .collect();
            let tracked = TrackedQueries::new(model, queries)?;
            if self.entries.len() == self.capacity {
                self.entries.remove(0);
            }
            self.entries.push((theta.to_vec(), tracked));
        }
        let tracked = &mut self.entries.last_mut().expect("just inserted").1;
        tracked.sync(model)?;
        Ok(tracked)
    }
}

/// The optimistic multiplicative-weights learner for adversarial type
/// sequences.
///
/// Each round it scores every action by the largest reward consistent with
/// the current confidence box at the revealed type, performs the
/// multiplicative-weights step on those optimistic rewards (rescaled into
/// [0, 1] by the environment's declared range), and only then absorbs the
/// new observation into the regression model.
pub struct StackelUcbAgent<O: RewardOracle> {
    actions: Vec<Vec<f64>>,
    oracle: O,
    strategy: Strategy,
    model: PosteriorModel,
    conf: ConfidenceConfig,
    eta: f64,
    reward_range: (f64, f64),
    rng: ChaCha8Rng,
    cache: TypeCache,
}

impl<O: RewardOracle> StackelUcbAgent<O> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        actions: Vec<Vec<f64>>,
        oracle: O,
        model: PosteriorModel,
        conf: ConfidenceConfig,
        eta: f64,
        reward_range: (f64, f64),
        rng: ChaCha8Rng,
    ) -> Result<Self, PolicyError> {
        if actions.is_empty() {
            return Err(PolicyError::EmptyActionSet);
        }
        let strategy = Strategy::uniform(actions.len());
        Ok(Self {
            actions,
            oracle,
            strategy,
            model,
            conf,
            eta,
            reward_range,
            rng,
            cache: TypeCache::new(8),
        })
    }

    pub fn model(&self) -> &PosteriorModel {
        &self.model
    }
}

impl<O: RewardOracle> Agent for StackelUcbAgent<O> {
    fn choose(&mut self) -> Result<usize, PolicyError> {
        Ok(self.strategy.sample(&mut self.rng))
    }

    fn observe(&mut self, outcome: &RoundOutcome) -> Result<AgentReport, PolicyError> {
        if outcome.y_observed.iter().any(|v| !v.is_finite()) {
            return Err(PolicyError::NonFiniteReward);
        }
        // optimistic rewards from the pre-update bounds
        let tracked = self
            .cache
            .get_or_insert(&self.model, &self.actions, outcome.theta)?;
        let mut optimistic = Vec::with_capacity(self.actions.len());
        let mut fallback = false;
        for (i, action) in self.actions.iter().enumerate() {
            let (lcb, ucb) = tracked.conf_bounds(&self.model, &self.conf, i)?;
            let bm = self.oracle.maximize_over_box(action, &lcb, &ucb);
            fallback |= bm.fallback;
            optimistic.push(bm.value);
        }
        let played_opt = optimistic[outcome.action_index];
        let scaled: Vec<f64> = optimistic
            .iter()
            .map(|r| rescale_reward(*r, self.reward_range))
            .collect();
        self.strategy = self.strategy.mw_update(&scaled, self.eta)?;
        // model update happens after the strategy step
        self.model.update(Observation::new(
            GamePoint::new(
                self.actions[outcome.action_index].clone(),
                outcome.theta.to_vec(),
            ),
            outcome.y_observed.to_vec(),
        ))?;
        Ok(AgentReport {
            optimistic_reward: Some(played_opt),
            solver_fallback: fallback,
        })
    }

    fn strategy(&self) -> Option<&Strategy> {
        Some(&self.strategy)
    }
}

/// Bilevel optimistic rule for a single known opponent type: plays the
/// action with the highest optimistic reward every round.
pub struct SingleOpponentAgent<O: RewardOracle> {
    actions: Vec<Vec<f64>>,
    oracle: O,
    model: PosteriorModel,
    conf: ConfidenceConfig,
    theta_bar: Vec<f64>,
    tracked: TrackedQueries,
    pending: Option<(usize, f64, bool)>,
}

impl<O: RewardOracle> SingleOpponentAgent<O> {
    pub fn new(
        actions: Vec<Vec<f64>>,
        oracle: O,
        model: PosteriorModel,
        conf: ConfidenceConfig,
        theta_bar: Vec<f64>,
    ) -> Result<Self, PolicyError> {
        if actions.is_empty() {
            return Err(PolicyError::EmptyActionSet);
        }
        let queries = actions
            .iter()
            .map(|a| GamePoint::new(a.clone(), theta_bar.clone()))
            .collect();
        let tracked = TrackedQueries::new(&model, queries)?;
        Ok(Self {
            actions,
            oracle,
            model,
            conf,
            theta_bar,
            tracked,
            pending: None,
        })
    }

    pub fn model(&self) -> &PosteriorModel {
        &self.model
    }
}

impl<O: RewardOracle> Agent for SingleOpponentAgent<O> {
    fn choose(&mut self) -> Result<usize, PolicyError> {
        self.tracked.sync(&self.model)?;
        let mut best: Option<(usize, f64, bool)> = None;
        for (i, action) in self.actions.iter().enumerate() {
            let (lcb, ucb) = self.tracked.conf_bounds(&self.model, &self.conf, i)?;
            let bm = self.oracle.maximize_over_box(action, &lcb, &ucb);
            if best.is_none_or(|(_, v, _)| bm.value > v) {
                best = Some((i, bm.value, bm.fallback));
            }
        }
        let chosen = best.expect("nonempty action set");
        self.pending = Some(chosen);
        Ok(chosen.0)
    }

    fn observe(&mut self, outcome: &RoundOutcome) -> Result<AgentReport, PolicyError> {
        if outcome.y_observed.iter().any(|v| !v.is_finite()) {
            return Err(PolicyError::NonFiniteReward);
        }
        self.model.update(Observation::new(
            GamePoint::new(
                self.actions[outcome.action_index].clone(),
                self.theta_bar.clone(),
            ),
            outcome.y_observed.to_vec(),
        ))?;
        let report = match self.pending.take() {
            Some((idx, value, fallback)) if idx == outcome.action_index => AgentReport {
                optimistic_reward: Some(value),
                solver_fallback: fallback,
            },
            _ => AgentReport::default(),
        };
        Ok(report)
    }
}

/// Full-information multiplicative weights; an idealized benchmark that
/// needs the true rewards of all actions every round.
pub struct HedgeAgent {
    strategy: Strategy,
    eta: f64,
    reward_range: (f64, f64),
    rng: ChaCha8Rng,
}

impl HedgeAgent {
    pub fn new(
        n_actions: usize,
        eta: f64,
        reward_range: (f64, f64),
        rng: ChaCha8Rng,
    ) -> Result<Self, PolicyError> {
        if n_actions == 0 {
            return Err(PolicyError::EmptyActionSet);
        }
        Ok(Self {
            strategy: Strategy::uniform(n_actions),
            eta,
            reward_range,
            rng,
        })
    }
}

impl Agent for HedgeAgent {
    fn choose(&mut self) -> Result<usize, PolicyError> {
        Ok(self.strategy.sample(&mut self.rng))
    }

    fn observe(&mut self, outcome: &RoundOutcome) -> Result<AgentReport, PolicyError> {
        let rewards = outcome
            .full_rewards
            .ok_or(PolicyError::MissingFullInformation)?;
        let scaled: Vec<f64> = rewards
            .iter()
            .map(|r| rescale_reward(*r, self.reward_range))
            .collect();
        self.strategy = hedge_update(&self.strategy, &scaled, self.eta)?;
        Ok(AgentReport::default())
    }

    fn strategy(&self) -> Option<&Strategy> {
        Some(&self.strategy)
    }

    fn needs_full_info(&self) -> bool {
        true
    }
}

/// Bandit multiplicative weights with uniform mixing.
pub struct Exp3Agent {
    strategy: Strategy,
    eta: f64,
    gamma_mix: f64,
    reward_range: (f64, f64),
    rng: ChaCha8Rng,
}

impl Exp3Agent {
    pub fn new(
        n_actions: usize,
        eta: f64,
        gamma_mix: f64,
        reward_range: (f64, f64),
        rng: ChaCha8Rng,
    ) -> Result<Self, PolicyError> {
        if n_actions == 0 {
            return Err(PolicyError::EmptyActionSet);
        }
        Ok(Self {
            strategy: Strategy::uniform(n_actions),
            eta,
            gamma_mix,
            reward_range,
            rng,
        })
    }
}

impl Agent for Exp3Agent {
    fn choose(&mut self) -> Result<usize, PolicyError> {
        Ok(self.strategy.sample(&mut self.rng))
    }

    fn observe(&mut self, outcome: &RoundOutcome) -> Result<AgentReport, PolicyError> {
        let reward = rescale_reward(outcome.reward_observed, self.reward_range);
        self.strategy = exp3_update(
            &self.strategy,
            outcome.action_index,
            reward,
            self.eta,
            self.gamma_mix,
        )?;
        Ok(AgentReport::default())
    }

    fn strategy(&self) -> Option<&Strategy> {
        Some(&self.strategy)
    }
}

/// Single-level GP-UCB baseline: regresses the observed rewards directly and
/// plays the highest upper confidence bound.
pub struct GpUcbAgent {
    actions: Vec<Vec<f64>>,
    model: PosteriorModel,
    conf: ConfidenceConfig,
    theta_bar: Vec<f64>,
    tracked: TrackedQueries,
}

impl GpUcbAgent {
    pub fn new(
        actions: Vec<Vec<f64>>,
        model: PosteriorModel,
        conf: ConfidenceConfig,
        theta_bar: Vec<f64>,
    ) -> Result<Self, PolicyError> {
        if actions.is_empty() {
            return Err(PolicyError::EmptyActionSet);
        }
        if model.outputs() != 1 {
            return Err(PolicyError::LengthMismatch {
                expected: 1,
                got: model.outputs(),
            });
        }
        let queries = actions
            .iter()
            .map(|a| GamePoint::new(a.clone(), theta_bar.clone()))
            .collect();
        let tracked = TrackedQueries::new(&model, queries)?;
        Ok(Self {
            actions,
            model,
            conf,
            theta_bar,
            tracked,
        })
    }
}

impl Agent for GpUcbAgent {
    fn choose(&mut self) -> Result<usize, PolicyError> {
        self.tracked.sync(&self.model)?;
        let beta = self.conf.beta_t(&self.model);
        let mut best = (0usize, f64::NEG_INFINITY);
        for i in 0..self.actions.len() {
            let (mean, var) = self.tracked.mean_var(&self.model, i)?;
            let score = mean[0] + beta * var.sqrt();
            if score > best.1 {
                best = (i, score);
            }
        }
        Ok(best.0)
    }

    fn observe(&mut self, outcome: &RoundOutcome) -> Result<AgentReport, PolicyError> {
        if !outcome.reward_observed.is_finite() {
            return Err(PolicyError::NonFiniteReward);
        }
        self.model.update(Observation::scalar(
            GamePoint::new(
                self.actions[outcome.action_index].clone(),
                self.theta_bar.clone(),
            ),
            outcome.reward_observed,
        ))?;
        Ok(AgentReport::default())
    }
}

/// Plays the action maximizing the worst-case reward over a response sample,
/// fixed for the whole run.
pub struct MaxMinAgent {
    index: usize,
}

impl MaxMinAgent {
    pub fn new<O: RewardOracle + ?Sized>(
        oracle: &O,
        actions: &[Vec<f64>],
        response_samples: &[Vec<f64>],
    ) -> Result<Self, PolicyError> {
        Ok(Self {
            index: max_min_act(oracle, actions, response_samples)?,
        })
    }
}

impl Agent for MaxMinAgent {
    fn choose(&mut self) -> Result<usize, PolicyError> {
        Ok(self.index)
    }

    fn observe(&mut self, _outcome: &RoundOutcome) -> Result<AgentReport, PolicyError> {
        Ok(AgentReport::default())
    }
}

/// Plays the action with the best reward at the offline posterior mean,
/// fixed for the whole run.
pub struct BestOfflineAgent {
    index: usize,
}

impl BestOfflineAgent {
    pub fn new<O: RewardOracle + ?Sized>(
        offline_model: &PosteriorModel,
        oracle: &O,
        actions: &[Vec<f64>],
        theta_bar: &[f64],
    ) -> Result<Self, PolicyError> {
        Ok(Self {
            index: best_offline_act(offline_model, oracle, actions, theta_bar)?,
        })
    }
}

impl Agent for BestOfflineAgent {
    fn choose(&mut self) -> Result<usize, PolicyError> {
        Ok(self.index)
    }

    fn observe(&mut self, _outcome: &RoundOutcome) -> Result<AgentReport, PolicyError> {
        Ok(AgentReport::default())
    }
}

/// Plays one fixed action index forever.
pub struct FixedActionAgent {
    index: usize,
}

impl FixedActionAgent {
    pub fn new(index: usize) -> Self {
        Self { index }
    }
}

impl Agent for FixedActionAgent {
    fn choose(&mut self) -> Result<usize, PolicyError> {
        Ok(self.index)
    }

    fn observe(&mut self, _outcome: &RoundOutcome) -> Result<AgentReport, PolicyError> {
        Ok(AgentReport::default())
    }
}

/// Reference implementations kept deliberately naive for cross-checking the
/// incremental agents in tests.
#[cfg(test)]
pub(crate) mod reference {
    use super::*;
    use crate::policies::{optimistic_reward, single_opponent_act};

    /// Direct (non-cached) scoring of the single-opponent rule.
    pub fn single_opponent_direct<O: RewardOracle>(
        oracle: &O,
        model: &PosteriorModel,
        conf: &ConfidenceConfig,
        actions: &[Vec<f64>],
        theta_bar: &[f64],
    ) -> usize {
        single_opponent_act(oracle, model, conf, actions, theta_bar)
            .unwrap()
            .0
    }

    /// Direct optimistic-reward vector for all actions.
    pub fn optimistic_all<O: RewardOracle>(
        oracle: &O,
        model: &PosteriorModel,
        conf: &ConfidenceConfig,
        actions: &[Vec<f64>],
        theta: &[f64],
    ) -> Vec<f64> {
        actions
            .iter()
            .map(|a| {
                optimistic_reward(oracle, model, conf, a, theta)
                    .unwrap()
                    .value
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use approx::assert_relative_eq;
    use rand::prelude::*;

    struct YReward;
    impl RewardOracle for YReward {
        fn eval(&self, _action: &[f64], response: &[f64]) -> f64 {
            response[0]
        }
        fn lipschitz(&self) -> f64 {
            1.0
        }
    }

    fn seeded(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn actions_1d(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect()
    }

    #[test]
    fn stackelucb_updates_match_direct_path() {
        let actions = actions_1d(4);
        let conf = ConfidenceConfig::new(0.5, 1.0, 0.1);
        let model = PosteriorModel::new(KernelSpec::rbf(0.7), 1.0, 1);
        let mut agent = StackelUcbAgent::new(
            actions.clone(),
            YReward,
            model.clone(),
            conf.clone(),
            0.3,
            (-2.0, 2.0),
            seeded(3),
        )
        .unwrap();

        let mut direct_model = model;
        let mut direct_strategy = Strategy::uniform(actions.len());
        let mut rng = seeded(99);
        for t in 0..12 {
            let theta = vec![rng.random_range(0.0..1.0_f64).round()]; // two types
            let idx = agent.choose().unwrap();
            let y = [0.3 * theta[0] - 0.1];
            let outcome = RoundOutcome {
                t,
                action_index: idx,
                theta: &theta,
                y_observed: &y,
                reward_observed: y[0],
                full_rewards: None,
            };
            agent.observe(&outcome).unwrap();

            // replicate with the uncached reference path
            let opts =
                reference::optimistic_all(&YReward, &direct_model, &conf, &actions, &theta);
            let scaled: Vec<f64> = opts
                .iter()
                .map(|r| rescale_reward(*r, (-2.0, 2.0)))
                .collect();
            direct_strategy = direct_strategy.mw_update(&scaled, 0.3).unwrap();
            direct_model
                .update(Observation::new(
                    GamePoint::new(actions[idx].clone(), theta.clone()),
                    y.to_vec(),
                ))
                .unwrap();

            for (a, b) in agent
                .strategy()
                .unwrap()
                .probs()
                .iter()
                .zip(direct_strategy.probs())
            {
                assert_relative_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn stackelucb_equal_optimistic_rewards_keep_strategy() {
        // constant reward oracle → identical optimistic rewards → MW no-op
        struct ConstReward;
        impl RewardOracle for ConstReward {
            fn eval(&self, _a: &[f64], _r: &[f64]) -> f64 {
                0.7
            }
            fn lipschitz(&self) -> f64 {
                0.0
            }
        }
        let model = PosteriorModel::new(KernelSpec::rbf(1.0), 1.0, 1);
        let conf = ConfidenceConfig::new(0.5, 1.0, 0.1);
        let mut agent = StackelUcbAgent::new(
            actions_1d(3),
            ConstReward,
            model,
            conf,
            0.5,
            (0.0, 1.0),
            seeded(1),
        )
        .unwrap();
        let before = agent.strategy().unwrap().clone();
        let idx = agent.choose().unwrap();
        let outcome = RoundOutcome {
            t: 0,
            action_index: idx,
            theta: &[0.0],
            y_observed: &[0.1],
            reward_observed: 0.7,
            full_rewards: None,
        };
        agent.observe(&outcome).unwrap();
        for (a, b) in before
            .probs()
            .iter()
            .zip(agent.strategy().unwrap().probs())
        {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn stackelucb_rejects_non_finite_response() {
        let model = PosteriorModel::new(KernelSpec::rbf(1.0), 1.0, 1);
        let conf = ConfidenceConfig::new(0.5, 1.0, 0.1);
        let mut agent = StackelUcbAgent::new(
            actions_1d(3),
            YReward,
            model,
            conf,
            0.5,
            (0.0, 1.0),
            seeded(1),
        )
        .unwrap();
        let before = agent.strategy().unwrap().clone();
        let outcome = RoundOutcome {
            t: 0,
            action_index: 0,
            theta: &[0.0],
            y_observed: &[f64::NAN],
            reward_observed: 0.0,
            full_rewards: None,
        };
        assert!(agent.observe(&outcome).is_err());
        // round rejected: strategy unchanged, model empty
        assert_eq!(before.probs(), agent.strategy().unwrap().probs());
        assert_eq!(agent.model().len(), 0);
    }

    #[test]
    fn single_opponent_agent_matches_free_function() {
        let actions = actions_1d(5);
        let conf = ConfidenceConfig::new(0.2, 1.0, 0.1).with_beta(1.0);
        let model = PosteriorModel::new(KernelSpec::rbf(0.5), 1.0, 1);
        let theta_bar = vec![0.5];
        let mut agent = SingleOpponentAgent::new(
            actions.clone(),
            YReward,
            model.clone(),
            conf.clone(),
            theta_bar.clone(),
        )
        .unwrap();
        let mut shadow = model;
        let mut rng = seeded(5);
        for t in 0..15 {
            let idx = agent.choose().unwrap();
            let expect =
                reference::single_opponent_direct(&YReward, &shadow, &conf, &actions, &theta_bar);
            assert_eq!(idx, expect, "round {t}");
            let y = [rng.random_range(-0.5..0.5)];
            let outcome = RoundOutcome {
                t,
                action_index: idx,
                theta: &theta_bar,
                y_observed: &y,
                reward_observed: y[0],
                full_rewards: None,
            };
            agent.observe(&outcome).unwrap();
            shadow
                .update(Observation::new(
                    GamePoint::new(actions[idx].clone(), theta_bar.clone()),
                    y.to_vec(),
                ))
                .unwrap();
        }
    }

    #[test]
    fn hedge_requires_full_information() {
        let mut agent = HedgeAgent::new(3, 0.5, (0.0, 1.0), seeded(2)).unwrap();
        assert!(agent.needs_full_info());
        let outcome = RoundOutcome {
            t: 0,
            action_index: 0,
            theta: &[],
            y_observed: &[0.0],
            reward_observed: 0.5,
            full_rewards: None,
        };
        assert!(matches!(
            agent.observe(&outcome),
            Err(PolicyError::MissingFullInformation)
        ));
    }

    #[test]
    fn exp3_agent_clamps_noisy_rewards() {
        let mut agent = Exp3Agent::new(3, 0.2, 0.1, (0.0, 1.0), seeded(4)).unwrap();
        let outcome = RoundOutcome {
            t: 0,
            action_index: 1,
            theta: &[],
            y_observed: &[0.0],
            reward_observed: 1.7, // outside the declared range; clamped
            full_rewards: None,
        };
        agent.observe(&outcome).unwrap();
        assert!(agent.strategy().unwrap().probs()[1] > 1.0 / 3.0);
    }

    #[test]
    fn fixed_agents_never_change_action() {
        let mut fixed = FixedActionAgent::new(2);
        for _ in 0..5 {
            assert_eq!(fixed.choose().unwrap(), 2);
        }
    }
}

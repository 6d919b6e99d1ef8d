//! The repeated-game protocol, regret accounting, and the simplex
//! discretization layer for Stackelberg leaders.
//!
//! Each round: the learner samples an action from its strategy, the
//! (possibly adaptive) adversary picks a type knowing past strategies and
//! past realized actions but not the current draw, the environment computes
//! the true response and adds observation noise, and the agent digests the
//! revealed type and noisy response. Reward accounting uses the noiseless
//! response; the noise model concerns observations, not payoffs.

use crate::policies::{Agent, PolicyError, RewardOracle, RoundOutcome};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("environment has no actions")]
    NoActions,
    #[error("agent chose action {got} but the environment has {n_actions}")]
    ActionOutOfRange { got: usize, n_actions: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// What an adaptive adversary may condition on when picking the round's
/// type: the learner's randomized strategies up to and including the current
/// round, and the realized actions of strictly earlier rounds.
#[derive(Debug)]
pub struct AdversaryView<'a> {
    pub strategies: &'a [Option<Vec<f64>>],
    pub realized_actions: &'a [usize],
}

/// A repeated sequential game: finite action set, type process, hidden
/// response function, known reward, and observation noise.
pub trait GameEnv {
    fn actions(&self) -> &[Vec<f64>];

    fn response_dim(&self) -> usize;

    /// The opponent type for round `t` (0-based).
    fn type_at(&self, t: usize, view: &AdversaryView) -> Vec<f64>;

    /// The true response `b(x, θ)`; deterministic in its inputs.
    fn respond(&self, action: &[f64], theta: &[f64]) -> Vec<f64>;

    fn oracle(&self) -> &dyn RewardOracle;

    /// Standard deviation of the additive observation noise on the response.
    fn noise_sigma(&self) -> f64;

    /// Declared range of the reward, used for rescaling by the
    /// multiplicative-weights agents.
    fn reward_range(&self) -> (f64, f64);
}

/// Per-round log entry.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub t: usize,
    pub action_index: usize,
    pub theta: Vec<f64>,
    pub y_observed: Vec<f64>,
    pub y_true: Vec<f64>,
    /// Reward of the played action at the noiseless response.
    pub reward: f64,
    pub optimistic_reward: Option<f64>,
    pub cumulative_reward: f64,
    pub strategy_entropy: Option<f64>,
    pub solver_fallback: bool,
}

/// Mutable state of one game between an environment and an agent.
pub struct GameLoop<'a, E: GameEnv + ?Sized, A: Agent + ?Sized> {
    env: &'a E,
    agent: &'a mut A,
    noise_rng: ChaCha8Rng,
    strategies: Vec<Option<Vec<f64>>>,
    realized_actions: Vec<usize>,
    records: Vec<RoundRecord>,
    cumulative_reward: f64,
}

impl<'a, E: GameEnv + ?Sized, A: Agent + ?Sized> GameLoop<'a, E, A> {
    pub fn new(env: &'a E, agent: &'a mut A, noise_rng: ChaCha8Rng) -> Result<Self, GameError> {
        if env.actions().is_empty() {
            return Err(GameError::NoActions);
        }
        Ok(Self {
            env,
            agent,
            noise_rng,
            strategies: Vec::new(),
            realized_actions: Vec::new(),
            records: Vec::new(),
            cumulative_reward: 0.0,
        })
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<RoundRecord> {
        self.records
    }

    /// Executes protocol steps for round `t`: sample action, reveal type,
    /// observe noisy response, update the agent, append the record.
    pub fn play_round(&mut self, t: usize) -> Result<&RoundRecord, GameError> {
        let strategy = self.agent.strategy().map(|s| s.probs().to_vec());
        let entropy = self.agent.strategy().map(|s| s.entropy());
        self.strategies.push(strategy);

        let action_index = self.agent.choose()?;
        let actions = self.env.actions();
        if action_index >= actions.len() {
            return Err(GameError::ActionOutOfRange {
                got: action_index,
                n_actions: actions.len(),
            });
        }
        let action = &actions[action_index];

        // the adversary sees p_1..p_t and x_1..x_{t-1}, never x_t
        let view = AdversaryView {
            strategies: &self.strategies,
            realized_actions: &self.realized_actions,
        };
        let theta = self.env.type_at(t, &view);

        let y_true = self.env.respond(action, &theta);
        let sigma = self.env.noise_sigma();
        let y_observed: Vec<f64> = y_true
            .iter()
            .map(|y| {
                let eps: f64 = StandardNormal.sample(&mut self.noise_rng);
                y + sigma * eps
            })
            .collect();

        let oracle = self.env.oracle();
        let reward = oracle.eval(action, &y_true);
        let reward_observed = oracle.eval(action, &y_observed);

        let full_rewards = if self.agent.needs_full_info() {
            Some(
                actions
                    .iter()
                    .map(|x| oracle.eval(x, &self.env.respond(x, &theta)))
                    .collect::<Vec<f64>>(),
            )
        } else {
            None
        };

        let outcome = RoundOutcome {
            t,
            action_index,
            theta: &theta,
            y_observed: &y_observed,
            reward_observed,
            full_rewards: full_rewards.as_deref(),
        };
        let report = self.agent.observe(&outcome)?;

        self.realized_actions.push(action_index);
        self.cumulative_reward += reward;
        self.records.push(RoundRecord {
            t,
            action_index,
            theta,
            y_observed,
            y_true,
            reward,
            optimistic_reward: report.optimistic_reward,
            cumulative_reward: self.cumulative_reward,
            strategy_entropy: entropy,
            solver_fallback: report.solver_fallback,
        });
        Ok(self.records.last().expect("just pushed"))
    }
}

/// Runs a full game for `horizon` rounds and returns the record stream.
pub fn run_game<E: GameEnv + ?Sized, A: Agent + ?Sized>(
    env: &E,
    agent: &mut A,
    horizon: usize,
    noise_rng: ChaCha8Rng,
) -> Result<Vec<RoundRecord>, GameError> {
    let mut game = GameLoop::new(env, agent, noise_rng)?;
    for t in 0..horizon {
        game.play_round(t)?;
    }
    Ok(game.into_records())
}

/// Cumulative regret after each prefix: the best fixed action in hindsight
/// (exhaustive sweep over the finite action set, O(|X|·T) response
/// evaluations) minus the realized cumulative reward.
pub fn cumulative_regret<E: GameEnv + ?Sized>(records: &[RoundRecord], env: &E) -> Vec<f64> {
    let actions = env.actions();
    let oracle = env.oracle();
    let t_max = records.len();
    // prefix sums of each fixed action's hindsight rewards
    let mut best_prefix = vec![f64::NEG_INFINITY; t_max];
    for action in actions {
        let mut acc = 0.0;
        for (t, rec) in records.iter().enumerate() {
            acc += oracle.eval(action, &env.respond(action, &rec.theta));
            if acc > best_prefix[t] {
                best_prefix[t] = acc;
            }
        }
    }
    records
        .iter()
        .enumerate()
        .map(|(t, rec)| best_prefix[t] - rec.cumulative_reward)
        .collect()
}

/// Uniform rational grid over the probability simplex: all compositions
/// `(i_1, …, i_n)/m` with `Σ i_j = m`, in ascending lexicographic order.
#[derive(Debug, Clone)]
pub struct SimplexGrid {
    n: usize,
    resolution: usize,
    points: Vec<Vec<f64>>,
}

impl SimplexGrid {
    pub fn new(n: usize, resolution: usize) -> Self {
        assert!(n >= 1 && resolution >= 1);
        let mut points = Vec::new();
        let mut current = vec![0usize; n];
        compositions(resolution, 0, &mut current, &mut points);
        Self {
            n,
            resolution,
            points,
        }
    }

    pub fn dims(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Worst-case 1-norm distance from any simplex point to this grid.
    pub fn covering_radius(&self) -> f64 {
        covering_radius(self.n, self.resolution)
    }

    /// Nearest grid point in 1-norm; ties resolve to the lexicographically
    /// smallest point. Returns the index into `points`.
    pub fn project(&self, x: &[f64]) -> usize {
        assert_eq!(x.len(), self.n);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b).abs()).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

fn compositions(remaining: usize, dim: usize, current: &mut [usize], out: &mut Vec<Vec<f64>>) {
    let n = current.len();
    if dim == n - 1 {
        current[dim] = remaining;
        let m: f64 = current.iter().sum::<usize>() as f64;
        out.push(current.iter().map(|&i| i as f64 / m).collect());
        return;
    }
    for i in 0..=remaining {
        current[dim] = i;
        compositions(remaining - i, dim + 1, current, out);
    }
}

/// 1-norm covering radius of the resolution-`m` grid on the `n`-simplex:
/// largest-remainder rounding leaves per-coordinate errors summing to at
/// most `n/(2m)`, and that bound is attained for even `n`.
pub fn covering_radius(n: usize, m: usize) -> f64 {
    n as f64 / (2.0 * m as f64)
}

/// Outcome of choosing a grid resolution for a regret target.
#[derive(Debug, Clone, Copy)]
pub struct MeshChoice {
    pub resolution: usize,
    pub radius: f64,
    /// Set when the uncapped resolution would exceed the point budget; the
    /// returned resolution is the largest affordable one.
    pub capped: bool,
}

/// Smallest resolution whose covering radius meets the discretization
/// target `(L_r (1 + L_b))⁻¹ √(n_l / T)`, capped so the grid stays within
/// `max_points`.
pub fn mesh_for_target(
    n_l: usize,
    l_r: f64,
    l_b: f64,
    horizon: usize,
    max_points: usize,
) -> MeshChoice {
    assert!(n_l >= 1 && horizon >= 1 && l_r > 0.0 && l_b >= 0.0);
    let target = (n_l as f64 / horizon as f64).sqrt() / (l_r * (1.0 + l_b));
    let wanted = ((n_l as f64 / (2.0 * target)).ceil() as usize).max(1);
    let mut m = wanted;
    while m > 1 && grid_size(n_l, m) > max_points {
        m -= 1;
    }
    MeshChoice {
        resolution: m,
        radius: covering_radius(n_l, m),
        capped: m < wanted,
    }
}

/// Number of grid points `C(m + n − 1, n − 1)` without building the grid.
pub fn grid_size(n: usize, m: usize) -> usize {
    // binomial via incremental product to dodge overflow for sane inputs
    let k = n - 1;
    let mut result = 1usize;
    for i in 0..k {
        result = result.saturating_mul(m + i + 1) / (i + 1);
    }
    result
}

/// A game whose learner decision is a point of the probability simplex
/// rather than a member of a finite set.
pub trait SimplexLeaderGame {
    /// Number of leader pure actions (simplex dimension).
    fn leader_dims(&self) -> usize;
    fn response_dim(&self) -> usize;
    fn type_at(&self, t: usize, view: &AdversaryView) -> Vec<f64>;
    fn respond(&self, mixed_strategy: &[f64], theta: &[f64]) -> Vec<f64>;
    fn oracle(&self) -> &dyn RewardOracle;
    fn noise_sigma(&self) -> f64;
    fn reward_range(&self) -> (f64, f64);
}

/// Finite environment whose action set is a simplex grid; response and
/// reward delegate to the base game at the grid point.
pub struct GridStackelbergEnv<G: SimplexLeaderGame> {
    base: G,
    grid: SimplexGrid,
}

impl<G: SimplexLeaderGame> GridStackelbergEnv<G> {
    pub fn grid(&self) -> &SimplexGrid {
        &self.grid
    }

    pub fn base(&self) -> &G {
        &self.base
    }
}

/// Wraps a continuous-leader game into a finite one over the given grid.
pub fn stackelberg_wrap<G: SimplexLeaderGame>(base: G, grid: SimplexGrid) -> GridStackelbergEnv<G> {
    assert_eq!(base.leader_dims(), grid.dims());
    GridStackelbergEnv { base, grid }
}

impl<G: SimplexLeaderGame> GameEnv for GridStackelbergEnv<G> {
    fn actions(&self) -> &[Vec<f64>] {
        self.grid.points()
    }

    fn response_dim(&self) -> usize {
        self.base.response_dim()
    }

    fn type_at(&self, t: usize, view: &AdversaryView) -> Vec<f64> {
        self.base.type_at(t, view)
    }

    fn respond(&self, action: &[f64], theta: &[f64]) -> Vec<f64> {
        self.base.respond(action, theta)
    }

    fn oracle(&self) -> &dyn RewardOracle {
        self.base.oracle()
    }

    fn noise_sigma(&self) -> f64 {
        self.base.noise_sigma()
    }

    fn reward_range(&self) -> (f64, f64) {
        self.base.reward_range()
    }
}

/// Draws a uniform point of the `n`-simplex (Dirichlet(1,…,1)) via
/// exponential spacings.
pub fn sample_simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut draws: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            -(1.0 - u).ln()
        })
        .collect();
    let sum: f64 = draws.iter().sum();
    for d in &mut draws {
        *d /= sum;
    }
    draws
}

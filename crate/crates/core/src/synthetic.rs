//! Small seeded environments with known ground truth: a response function
//! sampled from the kernel's function class played against cyclic types, and
//! a toy Stackelberg game over a discretized mixed-strategy simplex.

use crate::games::{AdversaryView, GameEnv, SimplexLeaderGame};
use crate::kernels::{GamePoint, KernelSpec};
use crate::policies::RewardOracle;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// A finite kernel expansion `f(z) = Σ_j a_j k(z, z_j)` with known RKHS
/// norm, one coefficient vector per output dimension.
#[derive(Debug, Clone)]
pub struct RkhsFunction {
    kernel: KernelSpec,
    centers: Vec<GamePoint>,
    coeffs: Vec<Vec<f64>>,
}

impl RkhsFunction {
    /// Draws standard-normal coefficients and rescales each output's vector
    /// so its RKHS norm equals `target_norm` exactly.
    pub fn sample<R: Rng>(
        kernel: KernelSpec,
        centers: Vec<GamePoint>,
        outputs: usize,
        target_norm: f64,
        rng: &mut R,
    ) -> Self {
        let gram = kernel.gram(&centers).expect("consistent center dims");
        let mut coeffs = Vec::with_capacity(outputs);
        for _ in 0..outputs {
            let mut a: Vec<f64> = (0..centers.len())
                .map(|_| StandardNormal.sample(rng))
                .collect();
            let norm = quadratic_norm(&gram, &a).sqrt();
            for v in &mut a {
                *v *= target_norm / norm;
            }
            coeffs.push(a);
        }
        Self {
            kernel,
            centers,
            coeffs,
        }
    }

    pub fn eval(&self, z: &GamePoint) -> Vec<f64> {
        let cross = self
            .kernel
            .cross(z, &self.centers)
            .expect("consistent dims");
        self.coeffs
            .iter()
            .map(|a| a.iter().zip(&cross).map(|(ai, ki)| ai * ki).sum())
            .collect()
    }

    /// RKHS norm `√(aᵀ K a)` of one output dimension.
    pub fn rkhs_norm(&self, output: usize) -> f64 {
        let gram = self.kernel.gram(&self.centers).expect("consistent dims");
        quadratic_norm(&gram, &self.coeffs[output]).sqrt()
    }
}

fn quadratic_norm(gram: &[Vec<f64>], a: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, row) in gram.iter().enumerate() {
        for (j, k) in row.iter().enumerate() {
            s += a[i] * k * a[j];
        }
    }
    s.max(0.0)
}

/// Parameters of the RKHS-sampled environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub n_actions: usize,
    pub n_types: usize,
    pub action_dim: usize,
    pub type_dim: usize,
    pub kernel: KernelSpec,
    /// RKHS norm the hidden response is scaled to.
    pub rkhs_norm: f64,
    pub n_centers: usize,
    pub noise_sigma: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n_actions: 20,
            n_types: 5,
            action_dim: 1,
            type_dim: 1,
            kernel: KernelSpec::rbf(0.4),
            rkhs_norm: 1.5,
            n_centers: 40,
            noise_sigma: 0.05,
        }
    }
}

/// Reward `r(x, y) = clamp(1 − |y − x[0]|, 0, 1)`: 1-Lipschitz under ‖·‖₁
/// with range [0, 1], peaked where the response matches the action's first
/// coordinate.
pub struct SyntheticOracle;

impl RewardOracle for SyntheticOracle {
    fn eval(&self, action: &[f64], response: &[f64]) -> f64 {
        (1.0 - (response[0] - action[0]).abs()).clamp(0.0, 1.0)
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// Finite game against a hidden kernel-expansion response and a cyclic type
/// sequence.
pub struct SyntheticEnv {
    actions: Vec<Vec<f64>>,
    types: Vec<Vec<f64>>,
    response: RkhsFunction,
    noise_sigma: f64,
    oracle: SyntheticOracle,
}

impl SyntheticEnv {
    /// Builds the environment from its own rng stream; actions, types,
    /// centers and the hidden response are all drawn from `rng`.
    pub fn new(params: &SyntheticParams, rng: &mut ChaCha8Rng) -> Self {
        let actions: Vec<Vec<f64>> = (0..params.n_actions)
            .map(|_| (0..params.action_dim).map(|_| rng.random()).collect())
            .collect();
        let types: Vec<Vec<f64>> = (0..params.n_types)
            .map(|_| (0..params.type_dim).map(|_| rng.random()).collect())
            .collect();
        let centers: Vec<GamePoint> = (0..params.n_centers)
            .map(|_| {
                GamePoint::new(
                    (0..params.action_dim).map(|_| rng.random()).collect(),
                    (0..params.type_dim).map(|_| rng.random()).collect(),
                )
            })
            .collect();
        let response = RkhsFunction::sample(
            params.kernel.clone(),
            centers,
            1,
            params.rkhs_norm,
            rng,
        );
        Self {
            actions,
            types,
            response,
            noise_sigma: params.noise_sigma,
            oracle: SyntheticOracle,
        }
    }

    pub fn response_fn(&self) -> &RkhsFunction {
        &self.response
    }

    pub fn types(&self) -> &[Vec<f64>] {
        &self.types
    }
}

impl GameEnv for SyntheticEnv {
    fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }

    fn response_dim(&self) -> usize {
        1
    }

    fn type_at(&self, t: usize, _view: &AdversaryView) -> Vec<f64> {
        self.types[t % self.types.len()].clone()
    }

    fn respond(&self, action: &[f64], theta: &[f64]) -> Vec<f64> {
        self.response
            .eval(&GamePoint::new(action.to_vec(), theta.to_vec()))
    }

    fn oracle(&self) -> &dyn RewardOracle {
        &self.oracle
    }

    fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    fn reward_range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

/// Parameters of the toy Stackelberg game.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StackelbergParams {
    /// Number of leader pure actions (targets), also the simplex dimension.
    pub n_targets: usize,
    pub n_types: usize,
    pub noise_sigma: f64,
}

impl Default for StackelbergParams {
    fn default() -> Self {
        Self {
            n_targets: 3,
            n_types: 4,
            noise_sigma: 0.01,
        }
    }
}

/// Leader reward at an attacked target: 1 when covered, `1 − damage`
/// otherwise, interpolated by the coverage probability.
pub struct StackelbergOracle {
    damages: Vec<f64>,
}

impl StackelbergOracle {
    fn target_of(&self, y: f64) -> usize {
        let n = self.damages.len();
        ((y * (n - 1) as f64).round() as usize).min(n - 1)
    }
}

impl RewardOracle for StackelbergOracle {
    fn eval(&self, action: &[f64], response: &[f64]) -> f64 {
        let j = self.target_of(response[0].clamp(0.0, 1.0));
        1.0 - (1.0 - action[j]) * self.damages[j]
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }
}

/// Security-style Stackelberg game: the follower of type θ attacks the
/// target maximizing `θ_j (1 − x_j)`; the response is the attacked target's
/// normalized position in [0, 1].
pub struct StackelbergSyntheticEnv {
    n_targets: usize,
    types: Vec<Vec<f64>>,
    oracle: StackelbergOracle,
    noise_sigma: f64,
}

impl StackelbergSyntheticEnv {
    pub fn new(params: &StackelbergParams, rng: &mut ChaCha8Rng) -> Self {
        let n = params.n_targets;
        let types: Vec<Vec<f64>> = (0..params.n_types)
            .map(|_| (0..n).map(|_| rng.random_range(0.2..1.0)).collect())
            .collect();
        let damages: Vec<f64> = (0..n).map(|_| rng.random_range(0.3..1.0)).collect();
        Self {
            n_targets: n,
            types,
            oracle: StackelbergOracle { damages },
            noise_sigma: params.noise_sigma,
        }
    }
}

impl SimplexLeaderGame for StackelbergSyntheticEnv {
    fn leader_dims(&self) -> usize {
        self.n_targets
    }

    fn response_dim(&self) -> usize {
        1
    }

    fn type_at(&self, t: usize, _view: &AdversaryView) -> Vec<f64> {
        self.types[t % self.types.len()].clone()
    }

    fn respond(&self, mixed_strategy: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (j, (th, x)) in theta.iter().zip(mixed_strategy).enumerate() {
            let u = th * (1.0 - x);
            if u > best.1 {
                best = (j, u);
            }
        }
        vec![best.0 as f64 / (self.n_targets - 1) as f64]
    }

    fn oracle(&self) -> &dyn RewardOracle {
        &self.oracle
    }

    fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    fn reward_range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

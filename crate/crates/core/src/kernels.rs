//! Positive-definite kernels over joint (action, opponent-type) inputs.
//!
//! A [`GamePoint`] bundles the learner's action vector with the opponent's
//! type vector; kernels act on the concatenation of the two. Supported
//! families: linear, inhomogeneous polynomial, RBF (squared-exponential)
//! and Matérn with ν ∈ {1/2, 3/2, 5/2}.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("dimension mismatch: point has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid kernel parameter: {0}")]
    InvalidParam(String),
}

/// A joint input to the kernel: learner action `x` paired with opponent type `theta`.
///
/// Lengths of both parts are fixed per game instance; all points in one
/// dataset must agree on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamePoint {
    pub action: Vec<f64>,
    pub opponent_type: Vec<f64>,
}

impl GamePoint {
    pub fn new(action: Vec<f64>, opponent_type: Vec<f64>) -> Self {
        Self {
            action,
            opponent_type,
        }
    }

    /// Total number of coordinates (action part + type part).
    pub fn dim(&self) -> usize {
        self.action.len() + self.opponent_type.len()
    }

    /// Iterates the concatenated coordinate vector (action ‖ type).
    pub fn coords(&self) -> impl Iterator<Item = f64> + '_ {
        self.action
            .iter()
            .chain(self.opponent_type.iter())
            .copied()
    }
}

/// Lengthscale of a stationary kernel: one shared value or one per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LengthScale {
    Shared(f64),
    PerDim(Vec<f64>),
}

impl LengthScale {
    fn validate(&self) -> Result<(), KernelError> {
        let ok = match self {
            LengthScale::Shared(l) => *l > 0.0 && l.is_finite(),
            LengthScale::PerDim(ls) => {
                !ls.is_empty() && ls.iter().all(|l| *l > 0.0 && l.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(KernelError::InvalidParam(
                "lengthscale must be positive and finite".into(),
            ))
        }
    }

    fn at(&self, i: usize) -> f64 {
        match self {
            LengthScale::Shared(l) => *l,
            LengthScale::PerDim(ls) => ls[i % ls.len()],
        }
    }

    fn check_dim(&self, dim: usize) -> Result<(), KernelError> {
        if let LengthScale::PerDim(ls) = self {
            if ls.len() != dim {
                return Err(KernelError::DimensionMismatch {
                    expected: ls.len(),
                    got: dim,
                });
            }
        }
        Ok(())
    }
}

/// Matérn smoothness parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaternNu {
    #[serde(rename = "1/2")]
    Half,
    #[serde(rename = "3/2")]
    ThreeHalves,
    #[serde(rename = "5/2")]
    FiveHalves,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Linear,
    /// Inhomogeneous polynomial `(z·z'/scale + 1)^degree`; strictly
    /// positive-definite for scale > 0.
    Polynomial { degree: u32, scale: f64 },
    Rbf { lengthscale: LengthScale },
    Matern { nu: MaternNu, lengthscale: LengthScale },
}

/// A kernel family plus an overall variance scale.
///
/// With `variance_scale = 1` the RBF and Matérn kernels satisfy
/// `k(z, z) = 1`, the normalization the confidence schedule assumes.
///
/// Hyperparameters come from the experiment config. Reasonable starting
/// points when nothing better is known: RBF/Matérn lengthscale around the
/// median pairwise distance of the inputs, polynomial scale around the
/// median squared norm, `variance_scale = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    #[serde(default = "default_variance_scale")]
    pub variance_scale: f64,
}

fn default_variance_scale() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn rbf(lengthscale: f64) -> Self {
        Self {
            family: KernelFamily::Rbf {
                lengthscale: LengthScale::Shared(lengthscale),
            },
            variance_scale: 1.0,
        }
    }

    pub fn matern(nu: MaternNu, lengthscale: f64) -> Self {
        Self {
            family: KernelFamily::Matern {
                nu,
                lengthscale: LengthScale::Shared(lengthscale),
            },
            variance_scale: 1.0,
        }
    }

    pub fn linear() -> Self {
        Self {
            family: KernelFamily::Linear,
            variance_scale: 1.0,
        }
    }

    pub fn polynomial(degree: u32, scale: f64) -> Self {
        Self {
            family: KernelFamily::Polynomial { degree, scale },
            variance_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.variance_scale > 0.0 && self.variance_scale.is_finite()) {
            return Err(KernelError::InvalidParam(
                "variance_scale must be positive and finite".into(),
            ));
        }
        match &self.family {
            KernelFamily::Linear => Ok(()),
            KernelFamily::Polynomial { degree, scale } => {
                if *degree == 0 {
                    return Err(KernelError::InvalidParam(
                        "polynomial degree must be >= 1".into(),
                    ));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(KernelError::InvalidParam(
                        "polynomial scale must be positive and finite".into(),
                    ));
                }
                Ok(())
            }
            KernelFamily::Rbf { lengthscale } => lengthscale.validate(),
            KernelFamily::Matern { lengthscale, .. } => lengthscale.validate(),
        }
    }

    /// Evaluates `k(a, b)` on the concatenated coordinates. Symmetric in its
    /// two point arguments.
    pub fn eval(&self, a: &GamePoint, b: &GamePoint) -> Result<f64, KernelError> {
        if a.dim() != b.dim() {
            return Err(KernelError::DimensionMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        let raw = match &self.family {
            KernelFamily::Linear => dot(a, b),
            KernelFamily::Polynomial { degree, scale } => {
                (dot(a, b) / scale + 1.0).powi(*degree as i32)
            }
            KernelFamily::Rbf { lengthscale } => {
                lengthscale.check_dim(a.dim())?;
                let r2 = scaled_sq_dist(a, b, lengthscale);
                (-0.5 * r2).exp()
            }
            KernelFamily::Matern { nu, lengthscale } => {
                lengthscale.check_dim(a.dim())?;
                let r = scaled_sq_dist(a, b, lengthscale).sqrt();
                match nu {
                    MaternNu::Half => (-r).exp(),
                    MaternNu::ThreeHalves => {
                        let s = 3f64.sqrt() * r;
                        (1.0 + s) * (-s).exp()
                    }
                    MaternNu::FiveHalves => {
                        let s = 5f64.sqrt() * r;
                        (1.0 + s + s * s / 3.0) * (-s).exp()
                    }
                }
            }
        };
        Ok(self.variance_scale * raw)
    }

    /// Builds the t×t Gram matrix `K[i][j] = k(z_i, z_j)` over a point list.
    pub fn gram(&self, points: &[GamePoint]) -> Result<Vec<Vec<f64>>, KernelError> {
        let t = points.len();
        let mut k = vec![vec![0.0; t]; t];
        for i in 0..t {
            for j in i..t {
                let v = self.eval(&points[i], &points[j])?;
                k[i][j] = v;
                k[j][i] = v;
            }
        }
        Ok(k)
    }

    /// Kernel evaluations of the query against each history point, in order.
    pub fn cross(&self, query: &GamePoint, points: &[GamePoint]) -> Result<Vec<f64>, KernelError> {
        points.iter().map(|p| self.eval(query, p)).collect()
    }
}

fn dot(a: &GamePoint, b: &GamePoint) -> f64 {
    a.coords().zip(b.coords()).map(|(x, y)| x * y).sum()
}

fn scaled_sq_dist(a: &GamePoint, b: &GamePoint, ls: &LengthScale) -> f64 {
    a.coords()
        .zip(b.coords())
        .enumerate()
        .map(|(i, (x, y))| {
            let d = (x - y) / ls.at(i);
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, d: usize, p: usize) -> GamePoint {
        GamePoint::new(
            (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
            (0..p).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
    }

    fn all_families() -> Vec<KernelSpec> {
        vec![
            KernelSpec::linear(),
            KernelSpec::polynomial(3, 2.0),
            KernelSpec::rbf(1.0),
            KernelSpec::matern(MaternNu::Half, 0.7),
            KernelSpec::matern(MaternNu::ThreeHalves, 1.3),
            KernelSpec::matern(MaternNu::FiveHalves, 1.0),
        ]
    }

    #[test]
    fn rbf_identity_is_one() {
        let spec = KernelSpec::rbf(1.0);
        let z = GamePoint::new(vec![0.3, -1.0], vec![2.0]);
        assert_eq!(spec.eval(&z, &z).unwrap(), 1.0);
    }

    #[test]
    fn linear_orthogonal_is_zero() {
        let spec = KernelSpec::linear();
        let a = GamePoint::new(vec![1.0], vec![0.0]);
        let b = GamePoint::new(vec![0.0], vec![1.0]);
        assert_eq!(spec.eval(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn rbf_at_unit_distance() {
        // exp(-0.5) for concatenated vectors one apart
        let spec = KernelSpec::rbf(1.0);
        let a = GamePoint::new(vec![0.0, 0.0], vec![0.0]);
        let b = GamePoint::new(vec![1.0, 0.0], vec![0.0]);
        assert_relative_eq!(
            spec.eval(&a, &b).unwrap(),
            0.6065306597126334,
            epsilon = 1e-12
        );
    }

    #[test]
    fn polynomial_matches_hand_value() {
        // (dot/s + 1)^3 with dot = 11, s = 2 -> 6.5^3
        let spec = KernelSpec::polynomial(3, 2.0);
        let a = GamePoint::new(vec![1.0, 2.0], vec![]);
        let b = GamePoint::new(vec![3.0, 4.0], vec![]);
        assert_relative_eq!(spec.eval(&a, &b).unwrap(), 6.5f64.powi(3), epsilon = 1e-12);
    }

    #[test]
    fn matern_identity_and_decay() {
        for nu in [MaternNu::Half, MaternNu::ThreeHalves, MaternNu::FiveHalves] {
            let spec = KernelSpec::matern(nu, 1.0);
            let a = GamePoint::new(vec![0.0], vec![0.0]);
            let b = GamePoint::new(vec![3.0], vec![0.0]);
            assert_eq!(spec.eval(&a, &a).unwrap(), 1.0);
            let v = spec.eval(&a, &b).unwrap();
            assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let spec = KernelSpec::rbf(1.0);
        let a = GamePoint::new(vec![1.0], vec![0.0]);
        let b = GamePoint::new(vec![1.0, 2.0], vec![0.0]);
        assert!(matches!(
            spec.eval(&a, &b),
            Err(KernelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn per_dim_lengthscale_weights_coordinates() {
        let spec = KernelSpec {
            family: KernelFamily::Rbf {
                lengthscale: LengthScale::PerDim(vec![1.0, 10.0]),
            },
            variance_scale: 1.0,
        };
        let a = GamePoint::new(vec![0.0], vec![0.0]);
        let b = GamePoint::new(vec![0.0], vec![1.0]);
        // second coordinate damped by lengthscale 10
        assert_relative_eq!(spec.eval(&a, &b).unwrap(), (-0.005f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn symmetry_exact_over_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in all_families() {
            for _ in 0..1000 {
                let a = random_point(&mut rng, 2, 2);
                let b = random_point(&mut rng, 2, 2);
                assert_eq!(spec.eval(&a, &b).unwrap(), spec.eval(&b, &a).unwrap());
            }
        }
    }

    #[test]
    fn gram_single_point_rbf() {
        let spec = KernelSpec::rbf(1.0);
        let z = GamePoint::new(vec![0.5], vec![0.5]);
        let k = spec.gram(&[z]).unwrap();
        assert_eq!(k, vec![vec![1.0]]);
    }

    #[test]
    fn gram_identical_points_all_equal() {
        let spec = KernelSpec::rbf(1.0);
        let z = GamePoint::new(vec![0.5], vec![-0.5]);
        let k = spec.gram(&[z.clone(), z]).unwrap();
        for row in &k {
            for &v in row {
                assert_eq!(v, 1.0);
            }
        }
    }

    #[test]
    fn gram_matches_entrywise_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for spec in all_families() {
            let pts: Vec<_> = (0..3).map(|_| random_point(&mut rng, 2, 1)).collect();
            let k = spec.gram(&pts).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(k[i][j], spec.eval(&pts[i], &pts[j]).unwrap());
                }
            }
        }
    }

    #[test]
    fn cross_vector_shapes_and_values() {
        let spec = KernelSpec::rbf(1.0);
        let z = GamePoint::new(vec![0.1], vec![0.2]);
        assert_eq!(spec.cross(&z, &[]).unwrap(), Vec::<f64>::new());
        assert_eq!(spec.cross(&z, &[z.clone()]).unwrap(), vec![1.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<_> = (0..3).map(|_| random_point(&mut rng, 1, 1)).collect();
        let c = spec.cross(&z, &pts).unwrap();
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(c[i], spec.eval(&z, p).unwrap());
        }
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        // smallest eigenvalue of random Gram matrices stays above -1e-8
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for spec in all_families() {
            for trial in 0..5 {
                let n = 3 + (trial * 4) % 18;
                let pts: Vec<_> = (0..n).map(|_| random_point(&mut rng, 2, 2)).collect();
                let k = spec.gram(&pts).unwrap();
                let mat = nalgebra::DMatrix::from_fn(n, n, |i, j| k[i][j]);
                let eigs = mat.symmetric_eigenvalues();
                let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(min >= -1e-8, "{spec:?}: min eigenvalue {min}");
            }
        }
    }

    #[test]
    fn unit_variance_kernels_bounded_by_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let stationary = [
            KernelSpec::rbf(0.8),
            KernelSpec::matern(MaternNu::Half, 1.0),
            KernelSpec::matern(MaternNu::ThreeHalves, 1.0),
            KernelSpec::matern(MaternNu::FiveHalves, 1.0),
        ];
        for spec in &stationary {
            for _ in 0..200 {
                let a = random_point(&mut rng, 2, 2);
                let b = random_point(&mut rng, 2, 2);
                let v = spec.eval(&a, &b).unwrap();
                assert!(v > 0.0 && v <= 1.0, "{spec:?}: {v}");
            }
        }
    }

    #[test]
    fn validate_rejects_bad_params() {
        assert!(KernelSpec::rbf(0.0).validate().is_err());
        assert!(KernelSpec::polynomial(0, 1.0).validate().is_err());
        assert!(KernelSpec::polynomial(2, -1.0).validate().is_err());
        let mut s = KernelSpec::linear();
        s.variance_scale = f64::NAN;
        assert!(s.validate().is_err());
    }

    #[test]
    fn kernel_spec_deserializes_from_config_json() {
        let json = r#"{"family": {"rbf": {"lengthscale": 0.5}}, "variance_scale": 2.0}"#;
        let spec: KernelSpec = serde_json::from_str(json).unwrap();
        assert_eq!(
            spec,
            KernelSpec {
                family: KernelFamily::Rbf {
                    lengthscale: LengthScale::Shared(0.5)
                },
                variance_scale: 2.0,
            }
        );
        let json = r#"{"family": {"matern": {"nu": "5/2", "lengthscale": [1.0, 2.0]}}}"#;
        let spec: KernelSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.variance_scale, 1.0);
        assert!(matches!(
            spec.family,
            KernelFamily::Matern {
                nu: MaternNu::FiveHalves,
                ..
            }
        ));
    }
}

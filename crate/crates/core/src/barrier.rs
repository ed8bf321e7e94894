//! Barrier functions, their gradients, and extended class-K functions.

use nalgebra::{Matrix2, RowDVector, RowVector2, Vector2};
use thiserror::Error;

use crate::dynamics::UncertainAffineSystem;

pub type State = Vector2<f64>;

#[derive(Debug, Error)]
pub enum BarrierError {
    #[error("barrier matrix must be symmetric: |a12 - a21| = {0:e}")]
    NotSymmetric(f64),
    #[error("barrier matrix must be positive definite (eigenvalues {0}, {1})")]
    NotPositiveDefinite(f64, f64),
    #[error("class-K rate must be positive, got {0}")]
    NonPositiveRate(f64),
}

/// Quadratic barrier h(x) = 1 - x'Ax/2 with a symmetric positive-definite A.
///
/// The safe set is the ellipse {x : h(x) >= 0}. The eigenvalues of A are
/// computed once at construction from the closed-form 2x2 formula and cached;
/// they drive the gradient-norm bounds used by the level-set solvers.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticBarrier {
    a: Matrix2<f64>,
    lambda_min: f64,
    lambda_max: f64,
}

impl QuadraticBarrier {
    /// Builds A from the weights q1 [1/rad] and q2 [s/rad]:
    /// A = [[2 q1^2, q1 q2], [q1 q2, 2 q2^2]].
    pub fn from_weights(q1: f64, q2: f64) -> Result<Self, BarrierError> {
        let a = Matrix2::new(2.0 * q1 * q1, q1 * q2, q1 * q2, 2.0 * q2 * q2);
        Self::from_matrix(a)
    }

    pub fn from_matrix(a: Matrix2<f64>) -> Result<Self, BarrierError> {
        let skew = (a[(0, 1)] - a[(1, 0)]).abs();
        let scale = a.norm().max(1.0);
        if skew > 1e-12 * scale {
            return Err(BarrierError::NotSymmetric(skew));
        }
        let (lambda_min, lambda_max) = sym_eigenvalues(&a);
        if lambda_min <= 0.0 {
            return Err(BarrierError::NotPositiveDefinite(lambda_min, lambda_max));
        }
        Ok(Self {
            a,
            lambda_min,
            lambda_max,
        })
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.a
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// h(x) = 1 - x'Ax/2.
    pub fn eval(&self, x: &State) -> f64 {
        1.0 - 0.5 * (x.transpose() * self.a * x)[(0, 0)]
    }

    /// grad h(x) = -x'A as a row vector.
    pub fn gradient(&self, x: &State) -> RowVector2<f64> {
        -(self.a * x).transpose()
    }

    pub fn gradient_norm(&self, x: &State) -> f64 {
        (self.a * x).norm()
    }

    /// Lie derivatives of h along the nominal vector fields:
    /// L_f h = grad h . f and L_g h = grad h . g, so that the known part of
    /// dh/dt is L_f h + L_g h u.
    pub fn lie_derivatives(
        &self,
        sys: &UncertainAffineSystem,
        t: f64,
        x: &State,
    ) -> (f64, RowDVector<f64>) {
        let grad = self.gradient(x);
        let lf = grad * sys.drift(t, x);
        let lg = grad * sys.input_map(t, x);
        (lf[(0, 0)], lg)
    }

    /// A point on the boundary {x : h(x) = h_star}, parameterized by angle.
    ///
    /// Uses x(theta) = sqrt(2(1 - h_star)) A^{-1/2} [cos theta, sin theta]',
    /// which covers the boundary ellipse exactly for any h_star <= 1.
    pub fn boundary_point(&self, h_star: f64, theta: f64) -> State {
        let r = (2.0 * (1.0 - h_star)).max(0.0).sqrt();
        let v = Vector2::new(theta.cos(), theta.sin());
        r * (self.inv_sqrt() * v)
    }

    /// A^{-1/2} from the 2x2 spectral decomposition.
    fn inv_sqrt(&self) -> Matrix2<f64> {
        let (e1, e2) = sym_eigenvectors(&self.a, self.lambda_min, self.lambda_max);
        let d1 = 1.0 / self.lambda_min.sqrt();
        let d2 = 1.0 / self.lambda_max.sqrt();
        d1 * e1 * e1.transpose() + d2 * e2 * e2.transpose()
    }
}

/// Closed-form eigenvalues of a symmetric 2x2 matrix, ascending.
fn sym_eigenvalues(a: &Matrix2<f64>) -> (f64, f64) {
    let mean = 0.5 * (a[(0, 0)] + a[(1, 1)]);
    let half_diff = 0.5 * (a[(0, 0)] - a[(1, 1)]);
    let disc = (half_diff * half_diff + a[(0, 1)] * a[(1, 0)]).sqrt();
    (mean - disc, mean + disc)
}

/// Orthonormal eigenvectors paired with (lambda_min, lambda_max).
fn sym_eigenvectors(a: &Matrix2<f64>, lambda_min: f64, lambda_max: f64) -> (Vector2<f64>, Vector2<f64>) {
    let b = a[(0, 1)];
    if b.abs() < 1e-14 * (a[(0, 0)].abs() + a[(1, 1)].abs()).max(1.0) {
        if a[(0, 0)] <= a[(1, 1)] {
            return (Vector2::x(), Vector2::y());
        }
        return (Vector2::y(), Vector2::x());
    }
    let e1 = Vector2::new(b, lambda_min - a[(0, 0)]).normalize();
    let e2 = Vector2::new(b, lambda_max - a[(0, 0)]).normalize();
    (e1, e2)
}

/// Linear extended class-K function alpha(r) = alpha_c r with alpha_c > 0.
#[derive(Debug, Clone, Copy)]
pub struct LinearClassKe {
    alpha_c: f64,
}

impl LinearClassKe {
    pub fn new(alpha_c: f64) -> Result<Self, BarrierError> {
        if !(alpha_c > 0.0) || !alpha_c.is_finite() {
            return Err(BarrierError::NonPositiveRate(alpha_c));
        }
        Ok(Self { alpha_c })
    }

    pub fn rate(&self) -> f64 {
        self.alpha_c
    }

    pub fn apply(&self, r: f64) -> f64 {
        self.alpha_c * r
    }

    pub fn inverse(&self, s: f64) -> f64 {
        s / self.alpha_c
    }
}

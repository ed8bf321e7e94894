//! Control-affine system models with additive/multiplicative uncertainty
//! channels, plus the inverted pendulum benchmark plant.

use nalgebra::{DVector, Matrix2xX, Vector2};
use thiserror::Error;

use crate::barrier::State;

pub type Input = DVector<f64>;

type VectorField = Box<dyn Fn(f64, &State) -> State + Send + Sync>;
type MatrixField = Box<dyn Fn(f64, &State) -> Matrix2xX<f64> + Send + Sync>;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid plant parameter {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("disturbance step times must be finite, nonnegative and ascending: {0:?}")]
    BadStepTimes([f64; 3]),
}

/// dx/dt = f(t,x) + g(t,x) u + f_tilde(t,x) + g_tilde(t,x) u, where f and g
/// are the known nominal fields and the tilde channels are the model
/// uncertainty. The controller only ever sees the nominal part.
pub struct UncertainAffineSystem {
    input_dim: usize,
    f: VectorField,
    g: MatrixField,
    f_tilde: VectorField,
    g_tilde: MatrixField,
}

impl UncertainAffineSystem {
    pub fn new(
        input_dim: usize,
        f: VectorField,
        g: MatrixField,
        f_tilde: VectorField,
        g_tilde: MatrixField,
    ) -> Self {
        Self {
            input_dim,
            f,
            g,
            f_tilde,
            g_tilde,
        }
    }

    pub fn state_dim(&self) -> usize {
        2
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn drift(&self, t: f64, x: &State) -> State {
        (self.f)(t, x)
    }

    pub fn input_map(&self, t: f64, x: &State) -> Matrix2xX<f64> {
        (self.g)(t, x)
    }

    pub fn uncertainty_drift(&self, t: f64, x: &State) -> State {
        (self.f_tilde)(t, x)
    }

    pub fn uncertainty_input_map(&self, t: f64, x: &State) -> Matrix2xX<f64> {
        (self.g_tilde)(t, x)
    }

    pub fn nominal_rhs(&self, t: f64, x: &State, u: &Input) -> State {
        self.drift(t, x) + self.input_map(t, x) * u
    }

    pub fn true_rhs(&self, t: f64, x: &State, u: &Input) -> State {
        self.nominal_rhs(t, x, u)
            + self.uncertainty_drift(t, x)
            + self.uncertainty_input_map(t, x) * u
    }
}

/// Pendulum parameters (Table-style defaults: g = 10 m/s^2, m = 2 kg,
/// l = 1 m, F_bar = 2 N, Kp = 0.6 1/s^2, Kd = 0.6 1/s).
#[derive(Debug, Clone, Copy)]
pub struct PendulumParams {
    pub grav: f64,
    pub mass: f64,
    pub length: f64,
    pub f_bar: f64,
    pub kp: f64,
    pub kd: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            grav: 10.0,
            mass: 2.0,
            length: 1.0,
            f_bar: 2.0,
            kp: 0.6,
            kd: 0.6,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let checks = [
            ("mass", self.mass, self.mass > 0.0),
            ("length", self.length, self.length > 0.0),
            ("f_bar", self.f_bar, self.f_bar >= 0.0),
            ("grav", self.grav, self.grav.is_finite()),
            ("kp", self.kp, self.kp.is_finite()),
            ("kd", self.kd, self.kd.is_finite()),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(DynamicsError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Bound p = F_bar / (m l) on the norm of the uncertainty drift.
    pub fn uncertainty_bound(&self) -> f64 {
        self.f_bar / (self.mass * self.length)
    }
}

/// Piecewise-constant horizontal force
/// F(t) = F_bar (1 - 2 s(t - t1) + s(t - t2) + s(t - t3))
/// with the Heaviside convention s(0) = 1, so F is right-continuous.
#[derive(Debug, Clone)]
pub struct StepDisturbance {
    f_bar: f64,
    step_times: [f64; 3],
}

impl StepDisturbance {
    pub const STEP_COEFFS: [f64; 3] = [-2.0, 1.0, 1.0];

    pub fn new(f_bar: f64, step_times: [f64; 3]) -> Result<Self, DynamicsError> {
        let ok = step_times.iter().all(|t| t.is_finite() && *t >= 0.0)
            && step_times[0] < step_times[1]
            && step_times[1] < step_times[2];
        if !ok {
            return Err(DynamicsError::BadStepTimes(step_times));
        }
        Ok(Self { f_bar, step_times })
    }

    pub fn f_bar(&self) -> f64 {
        self.f_bar
    }

    pub fn step_times(&self) -> [f64; 3] {
        self.step_times
    }

    /// F(t), right-continuous at the step instants.
    pub fn value(&self, t: f64) -> f64 {
        self.multiplier(t, |tau| tau >= 0.0) * self.f_bar
    }

    /// Left limit F(t-), for recording both sides of a jump.
    pub fn left_value(&self, t: f64) -> f64 {
        self.multiplier(t, |tau| tau > 0.0) * self.f_bar
    }

    fn multiplier(&self, t: f64, step: impl Fn(f64) -> bool) -> f64 {
        let mut m = 1.0;
        for (tk, ck) in self.step_times.iter().zip(Self::STEP_COEFFS) {
            if step(t - tk) {
                m += ck;
            }
        }
        m
    }
}

/// Assembles the pendulum as an uncertain control-affine system:
/// f = [x2, (g/l) sin x1], g = [0, 1/(m l^2)], f_tilde = [0, F(t) cos(x1)/(m l)],
/// g_tilde = 0.
pub fn pendulum_system(params: &PendulumParams, dist: StepDisturbance) -> UncertainAffineSystem {
    let PendulumParams {
        grav, mass, length, ..
    } = *params;
    let inertia = mass * length * length;
    let ml = mass * length;
    UncertainAffineSystem::new(
        1,
        Box::new(move |_t, x| Vector2::new(x[1], grav / length * x[0].sin())),
        Box::new(move |_t, _x| Matrix2xX::from_column_slice(&[0.0, 1.0 / inertia])),
        Box::new(move |t, x| Vector2::new(0.0, dist.value(t) * x[0].cos() / ml)),
        Box::new(|_t, _x| Matrix2xX::zeros(1)),
    )
}

/// Feedback-linearizing PD torque
/// k_d(x) = m l^2 (-(g/l) sin x1 - Kp x1 - Kd x2).
pub fn desired_controller(params: &PendulumParams, x: &State) -> f64 {
    let inertia = params.mass * params.length * params.length;
    inertia * (-params.grav / params.length * x[0].sin() - params.kp * x[0] - params.kd * x[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn default_dist() -> StepDisturbance {
        StepDisturbance::new(2.0, [5.0, 10.0, 15.0]).unwrap()
    }

    #[test]
    fn disturbance_profile() {
        let d = default_dist();
        assert_eq!(d.value(0.0), 2.0);
        assert_eq!(d.value(7.0), -2.0);
        assert_eq!(d.value(12.0), 0.0);
        assert_eq!(d.value(16.0), 2.0);
        // right-continuity at the step instants
        assert_eq!(d.value(5.0), -2.0);
        assert_eq!(d.left_value(5.0), 2.0);
        assert_eq!(d.value(10.0), 0.0);
        assert_eq!(d.left_value(10.0), -2.0);
        assert_eq!(d.value(15.0), 2.0);
        assert_eq!(d.left_value(15.0), 0.0);
    }

    #[test]
    fn disturbance_bounded() {
        let d = default_dist();
        let mut t = 0.0;
        while t < 25.0 {
            assert!(d.value(t).abs() <= d.f_bar() + 1e-12);
            t += 0.01;
        }
    }

    #[test]
    fn rejects_unordered_step_times() {
        assert!(StepDisturbance::new(2.0, [5.0, 5.0, 15.0]).is_err());
        assert!(StepDisturbance::new(2.0, [-1.0, 10.0, 15.0]).is_err());
    }

    #[test]
    fn pendulum_fields() {
        let params = PendulumParams::default();
        let sys = pendulum_system(&params, default_dist());
        let f = sys.drift(0.0, &Vector2::new(0.0, 1.0));
        assert_eq!(f, Vector2::new(1.0, 0.0));
        let g = sys.input_map(0.0, &Vector2::new(0.3, -0.2));
        assert_eq!(g[(0, 0)], 0.0);
        assert_eq!(g[(1, 0)], 0.5);
        let ft = sys.uncertainty_drift(2.0, &Vector2::zeros());
        assert_eq!(ft, Vector2::new(0.0, 1.0));
    }

    #[test]
    fn desired_controller_examples() {
        let params = PendulumParams::default();
        assert_eq!(desired_controller(&params, &Vector2::zeros()), 0.0);
        assert_relative_eq!(
            desired_controller(&params, &Vector2::new(0.25, 0.0)),
            2.0 * (-10.0 * 0.25_f64.sin() - 0.6 * 0.25),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            desired_controller(&params, &Vector2::new(0.0, 1.0)),
            -1.2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn uncertainty_drift_within_bound() {
        let params = PendulumParams::default();
        let p = params.uncertainty_bound();
        assert_eq!(p, 1.0);
        let sys = pendulum_system(&params, default_dist());
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10_000 {
            let t = rng.gen_range(0.0..25.0);
            let x = Vector2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            assert!(sys.uncertainty_drift(t, &x).norm() <= p + 1e-12);
        }
    }

    #[test]
    fn true_minus_nominal_is_uncertainty() {
        let params = PendulumParams::default();
        let sys = pendulum_system(&params, default_dist());
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..1000 {
            let t = rng.gen_range(0.0..25.0);
            let x = Vector2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let u = Input::from_vec(vec![rng.gen_range(-50.0..50.0)]);
            let diff = sys.true_rhs(t, &x, &u) - sys.nominal_rhs(t, &x, &u);
            assert!((diff - sys.uncertainty_drift(t, &x)).norm() <= 1e-12 * (1.0 + diff.norm()));
            // multiplicative channel is identically zero for the pendulum
            assert_eq!(sys.uncertainty_input_map(t, &x), Matrix2xX::zeros(1));
        }
    }

    #[test]
    fn validates_parameters() {
        let mut p = PendulumParams::default();
        p.mass = 0.0;
        assert!(p.validate().is_err());
        let mut p = PendulumParams::default();
        p.f_bar = -1.0;
        assert!(p.validate().is_err());
        assert!(PendulumParams::default().validate().is_ok());
    }
}

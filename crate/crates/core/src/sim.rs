//! Closed-loop simulation of the true uncertain pendulum dynamics under the
//! filtered controller, with runtime monitors for the certified level bound.
//!
//! Fixed-step RK4 with the controller re-evaluated at every stage. The step
//! grid is built so that every disturbance step time lands exactly on a grid
//! point, and the uncertainty channels are sampled at the segment midpoint,
//! so each RK4 step only ever sees a smooth right-hand side.

use thiserror::Error;

use crate::barrier::{LinearClassKe, QuadraticBarrier, State};
use crate::compensation::CompensationTerm;
use crate::dynamics::{
    desired_controller, pendulum_system, Input, PendulumParams, StepDisturbance,
    UncertainAffineSystem,
};
use crate::filter::{safety_filter, FilterError};
use crate::levelset::LevelSetCertificate;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("state became non-finite at t = {t}: x = [{x1}, {x2}]")]
    NonFiniteState { t: f64, x1: f64, x2: f64 },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("invalid simulation setting {name}: {value}")]
    InvalidSetting { name: &'static str, value: f64 },
}

/// A simulation abort carrying the trajectory integrated so far.
#[derive(Debug, Error)]
#[error("simulation aborted after {} samples: {error}", partial.samples.len())]
pub struct SimFailure {
    pub partial: Trajectory,
    #[source]
    pub error: SimError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: State,
    pub u: f64,
    pub disturbance: f64,
    pub h: f64,
    pub sigma: f64,
    /// dh_n/dt - sigma + alpha(h) at the applied input; the filter keeps
    /// this nonnegative.
    pub constraint_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub dt: f64,
    pub metadata: String,
}

impl Trajectory {
    /// Minimum of h over the samples and the time where it is attained.
    pub fn min_h(&self) -> Option<(f64, f64)> {
        self.samples
            .iter()
            .map(|s| (s.h, s.t))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Monitor {
    pub min_h: f64,
    pub min_h_time: f64,
    pub h_star_ref: f64,
    pub violated: bool,
}

/// Checks a trajectory against a certified level: violated when
/// min_t h(x(t)) < h_star - tol.
pub fn monitor(traj: &Trajectory, cert: &LevelSetCertificate, tol: f64) -> Monitor {
    let (min_h, min_h_time) = traj.min_h().expect("trajectory must be nonempty");
    Monitor {
        min_h,
        min_h_time,
        h_star_ref: cert.h_star,
        violated: min_h < cert.h_star - tol,
    }
}

/// Classical 4-stage Runge-Kutta update for a smooth right-hand side.
pub fn rk4_step(
    rhs: impl Fn(f64, &State) -> State,
    t: f64,
    x: &State,
    dt: f64,
) -> Result<State, SimError> {
    let k1 = rhs(t, x);
    let k2 = rhs(t + 0.5 * dt, &(x + 0.5 * dt * k1));
    let k3 = rhs(t + 0.5 * dt, &(x + 0.5 * dt * k2));
    let k4 = rhs(t + dt, &(x + dt * k3));
    let next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if !next.iter().all(|v| v.is_finite()) {
        return Err(SimError::NonFiniteState {
            t: t + dt,
            x1: next[0],
            x2: next[1],
        });
    }
    Ok(next)
}

/// Everything needed to run one closed-loop experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub params: PendulumParams,
    pub disturbance: StepDisturbance,
    pub barrier: QuadraticBarrier,
    pub class_k: LinearClassKe,
    pub compensation: CompensationTerm,
    pub x0: State,
    pub dt: f64,
    pub horizon: f64,
}

impl Scenario {
    pub fn metadata(&self) -> String {
        let p = &self.params;
        let st = self.disturbance.step_times();
        format!(
            "scenario={} grav={} mass={} length={} f_bar={} kp={} kd={} steps={},{},{} \
             compensation={:?} x0={},{} dt={} horizon={}",
            self.name,
            p.grav,
            p.mass,
            p.length,
            p.f_bar,
            p.kp,
            p.kd,
            st[0],
            st[1],
            st[2],
            self.compensation,
            self.x0[0],
            self.x0[1],
            self.dt,
            self.horizon
        )
    }
}

struct Loop<'a> {
    sc: &'a Scenario,
    sys: UncertainAffineSystem,
}

impl<'a> Loop<'a> {
    fn control(&self, t: f64, x: &State) -> Result<f64, SimError> {
        let u_des = Input::from_vec(vec![desired_controller(&self.sc.params, x)]);
        let r = safety_filter(
            &self.sys,
            &self.sc.barrier,
            &self.sc.class_k,
            &self.sc.compensation,
            t,
            x,
            &u_des,
        )?;
        Ok(r.u[0])
    }

    /// True closed-loop right-hand side with the uncertainty channels frozen
    /// at t_unc (the midpoint of the current smooth segment).
    fn rhs(&self, t: f64, t_unc: f64, x: &State) -> Result<State, SimError> {
        let u = Input::from_vec(vec![self.control(t, x)?]);
        Ok(self.sys.nominal_rhs(t, x, &u)
            + self.sys.uncertainty_drift(t_unc, x)
            + self.sys.uncertainty_input_map(t_unc, x) * &u)
    }

    fn step(&self, ta: f64, tb: f64, x: &State) -> Result<State, SimError> {
        let t_unc = 0.5 * (ta + tb);
        let dt = tb - ta;
        let err = std::cell::RefCell::new(None);
        let next = rk4_step(
            |t, x| match self.rhs(t, t_unc, x) {
                Ok(v) => v,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    State::zeros()
                }
            },
            ta,
            x,
            dt,
        );
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        next
    }

    fn sample(&self, t: f64, x: &State, disturbance: f64) -> Result<Sample, SimError> {
        let u = self.control(t, x)?;
        let h = self.sc.barrier.eval(x);
        let sigma = self.sc.compensation.evaluate(&self.sc.barrier, t, x, None);
        let (lf, lg) = self.sc.barrier.lie_derivatives(&self.sys, t, x);
        let constraint_residual = lf + lg[0] * u - sigma + self.sc.class_k.apply(h);
        Ok(Sample {
            t,
            x: *x,
            u,
            disturbance,
            h,
            sigma,
            constraint_residual,
        })
    }
}

/// Integration grid: uniform dt steps over [0, horizon], with every
/// disturbance step time inserted as an extra grid point when it does not
/// already land on one.
fn build_grid(dt: f64, horizon: f64, events: &[f64]) -> Vec<f64> {
    let n = (horizon / dt).round().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| (i as f64 * dt).min(horizon)).collect();
    for &e in events {
        if e <= 0.0 || e >= horizon {
            continue;
        }
        if grid.iter().all(|&g| (g - e).abs() > 1e-9) {
            grid.push(e);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    grid
}

pub fn simulate(sc: &Scenario) -> Result<Trajectory, Box<SimFailure>> {
    let mut traj = Trajectory {
        samples: Vec::new(),
        dt: sc.dt,
        metadata: sc.metadata(),
    };
    let fail = |traj: Trajectory, error: SimError| Box::new(SimFailure { partial: traj, error });
    if !(sc.dt > 0.0) {
        return Err(fail(traj, SimError::InvalidSetting { name: "dt", value: sc.dt }));
    }
    if !(sc.horizon > 0.0) {
        return Err(fail(
            traj,
            SimError::InvalidSetting { name: "horizon", value: sc.horizon },
        ));
    }

    let lp = Loop {
        sc,
        sys: pendulum_system(&sc.params, sc.disturbance.clone()),
    };
    let events = sc.disturbance.step_times();
    let grid = build_grid(sc.dt, sc.horizon, &events);
    let is_event = |t: f64| events.iter().any(|&e| (t - e).abs() <= 1e-9 && t > 0.0);

    let mut x = sc.x0;
    for (i, &t) in grid.iter().enumerate() {
        if is_event(t) {
            // duplicate sample recording the left limit of the disturbance
            match lp.sample(t, &x, sc.disturbance.left_value(t)) {
                Ok(s) => traj.samples.push(s),
                Err(e) => return Err(fail(traj, e)),
            }
        }
        match lp.sample(t, &x, sc.disturbance.value(t)) {
            Ok(s) => traj.samples.push(s),
            Err(e) => return Err(fail(traj, e)),
        }
        if let Some(&tb) = grid.get(i + 1) {
            match lp.step(t, tb, &x) {
                Ok(next) => x = next,
                Err(e) => return Err(fail(traj, e)),
            }
        }
    }
    Ok(traj)
}

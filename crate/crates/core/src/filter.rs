//! Minimally invasive safety filter: project the desired input onto the
//! half-space of inputs satisfying the robustified barrier constraint.
//!
//! With a = L_g h and b0 = -alpha(h) + sigma - L_f h the constraint reads
//! a u >= b0, and the minimizer of ||u - u_des||^2 subject to it is the
//! Euclidean projection of u_des onto that half-space. No QP solver is
//! needed: the constraint is a single affine inequality with an identity
//! Hessian, so the KKT solution is explicit.

use nalgebra::RowDVector;
use thiserror::Error;

use crate::barrier::{LinearClassKe, QuadraticBarrier, State};
use crate::compensation::CompensationTerm;
use crate::dynamics::{Input, UncertainAffineSystem};

const DEGENERATE_NORM2: f64 = 1e-24;

#[derive(Debug, Error)]
pub enum FilterError {
    /// L_g h = 0 while the constraint requires a positive bound: no input
    /// can help, the barrier condition itself fails at this state.
    #[error("safety constraint infeasible at t = {t}: L_g h = 0 and bound {bound} > 0 at x = [{x1}, {x2}]")]
    Infeasible { t: f64, x1: f64, x2: f64, bound: f64 },
}

#[derive(Debug, Clone)]
pub struct FilterResult {
    pub u: Input,
    /// Constraint active at the solution (u differs from the desired input).
    pub active: bool,
    /// Constraint value minus requirement, a u - b0, at the returned input.
    pub slack: f64,
    pub feasible: bool,
}

pub fn safety_filter(
    sys: &UncertainAffineSystem,
    barrier: &QuadraticBarrier,
    class_k: &LinearClassKe,
    compensation: &CompensationTerm,
    t: f64,
    x: &State,
    u_des: &Input,
) -> Result<FilterResult, FilterError> {
    debug_assert!(compensation.input_independent());
    let h = barrier.eval(x);
    let (lf, lg) = barrier.lie_derivatives(sys, t, x);
    let sigma = compensation.evaluate(barrier, t, x, Some(u_des));
    let bound = -class_k.apply(h) + sigma - lf;
    Ok(project_half_space(&lg, bound, t, x, u_des)?)
}

fn project_half_space(
    a: &RowDVector<f64>,
    bound: f64,
    t: f64,
    x: &State,
    u_des: &Input,
) -> Result<FilterResult, FilterError> {
    let norm2 = a.norm_squared();
    if norm2 < DEGENERATE_NORM2 {
        if bound > 0.0 {
            return Err(FilterError::Infeasible {
                t,
                x1: x[0],
                x2: x[1],
                bound,
            });
        }
        return Ok(FilterResult {
            u: u_des.clone(),
            active: false,
            slack: -bound,
            feasible: true,
        });
    }
    let margin = (a * u_des)[(0, 0)] - bound;
    if margin >= 0.0 {
        return Ok(FilterResult {
            u: u_des.clone(),
            active: false,
            slack: margin,
            feasible: true,
        });
    }
    let u = u_des + a.transpose() * (-margin / norm2);
    let slack = (a * &u)[(0, 0)] - bound;
    Ok(FilterResult {
        u,
        active: true,
        slack,
        feasible: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{desired_controller, pendulum_system, PendulumParams, StepDisturbance};
    use approx::assert_relative_eq;
    use nalgebra::Vector2;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    struct Setup {
        sys: UncertainAffineSystem,
        barrier: QuadraticBarrier,
        class_k: LinearClassKe,
        params: PendulumParams,
    }

    fn setup() -> Setup {
        let params = PendulumParams::default();
        let dist = StepDisturbance::new(params.f_bar, [5.0, 10.0, 15.0]).unwrap();
        Setup {
            sys: pendulum_system(&params, dist),
            barrier: QuadraticBarrier::from_weights(4.0, 2.0).unwrap(),
            class_k: LinearClassKe::new(8.0).unwrap(),
            params,
        }
    }

    #[test]
    fn inactive_when_desired_input_is_safe() {
        let s = setup();
        let x = Vector2::new(0.25, 0.0);
        let u_des = Input::from_vec(vec![desired_controller(&s.params, &x)]);
        let r = safety_filter(
            &s.sys,
            &s.barrier,
            &s.class_k,
            &CompensationTerm::none(),
            0.0,
            &x,
            &u_des,
        )
        .unwrap();
        assert!(!r.active);
        assert_eq!(r.u, u_des);
        assert!(r.slack >= 0.0);
    }

    #[test]
    fn active_case_matches_closed_form() {
        let s = setup();
        let x = Vector2::new(0.25, 0.0);
        let u_des = Input::from_vec(vec![desired_controller(&s.params, &x)]);
        let c = CompensationTerm::robust_bound(1.0).unwrap();
        let r = safety_filter(&s.sys, &s.barrier, &s.class_k, &c, 0.0, &x, &u_des).unwrap();
        assert!(r.active);
        // a = -1, b0 = sqrt(68) + 2 * 10 sin(0.25), so u = -b0
        let expected = -(68.0_f64.sqrt() + 20.0 * 0.25_f64.sin());
        assert_relative_eq!(r.u[0], expected, epsilon = 1e-12);
        assert!(r.slack.abs() <= 1e-9);
    }

    #[test]
    fn degenerate_gradient_inside_safe_set() {
        let s = setup();
        let x = Vector2::zeros();
        let u_des = Input::from_vec(vec![3.0]);
        let c = CompensationTerm::robust_bound(1.0).unwrap();
        let r = safety_filter(&s.sys, &s.barrier, &s.class_k, &c, 0.0, &x, &u_des).unwrap();
        assert!(r.feasible && !r.active);
        assert_eq!(r.u, u_des);
    }

    #[test]
    fn degenerate_gradient_with_positive_bound_is_infeasible() {
        let x = Vector2::zeros();
        let a = RowDVector::zeros(1);
        let err = project_half_space(&a, 0.5, 1.0, &x, &Input::from_vec(vec![0.0]));
        assert!(matches!(err, Err(FilterError::Infeasible { .. })));
    }

    #[test]
    fn constraint_satisfied_on_random_instances() {
        let s = setup();
        let mut rng = StdRng::seed_from_u64(31);
        let mut checked = 0;
        while checked < 10_000 {
            let t = rng.gen_range(0.0..20.0);
            let x = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let (_, lg) = s.barrier.lie_derivatives(&s.sys, t, &x);
            if lg.norm() < 1e-6 {
                continue;
            }
            let u_des = Input::from_vec(vec![rng.gen_range(-50.0..50.0)]);
            let c = CompensationTerm::robust_bound(rng.gen_range(0.0..2.0)).unwrap();
            let r = safety_filter(&s.sys, &s.barrier, &s.class_k, &c, t, &x, &u_des).unwrap();
            assert!(r.slack >= -1e-9, "slack {} at x = {x:?}", r.slack);
            checked += 1;
        }
    }

    #[test]
    fn idempotent() {
        let s = setup();
        let mut rng = StdRng::seed_from_u64(32);
        let c = CompensationTerm::robust_bound(1.5).unwrap();
        let mut checked = 0;
        while checked < 1000 {
            let t = rng.gen_range(0.0..20.0);
            let x = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let (_, lg) = s.barrier.lie_derivatives(&s.sys, t, &x);
            if lg.norm() < 1e-3 {
                continue;
            }
            let u_des = Input::from_vec(vec![rng.gen_range(-50.0..50.0)]);
            let r1 = safety_filter(&s.sys, &s.barrier, &s.class_k, &c, t, &x, &u_des).unwrap();
            let r2 = safety_filter(&s.sys, &s.barrier, &s.class_k, &c, t, &x, &r1.u).unwrap();
            assert!((r2.u[0] - r1.u[0]).abs() <= 1e-12 * (1.0 + r1.u[0].abs()));
            checked += 1;
        }
    }

    #[test]
    fn continuous_away_from_degeneracy() {
        let s = setup();
        let mut rng = StdRng::seed_from_u64(33);
        let c = CompensationTerm::robust_bound(1.0).unwrap();
        let mut checked = 0;
        while checked < 1000 {
            let t = rng.gen_range(0.0..20.0);
            let x = Vector2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let (lf, lg) = s.barrier.lie_derivatives(&s.sys, t, &x);
            if lg.norm() < 1.0 {
                continue;
            }
            let b0 = -s.class_k.apply(s.barrier.eval(&x)) + c.evaluate(&s.barrier, t, &x, None) - lf;
            if (b0 / lg[0]).abs() > 50.0 {
                continue;
            }
            let u_des = Input::from_vec(vec![rng.gen_range(-20.0..20.0)]);
            let r1 = safety_filter(&s.sys, &s.barrier, &s.class_k, &c, t, &x, &u_des).unwrap();
            let xp = x + Vector2::new(1e-8, 1e-8);
            let r2 = safety_filter(&s.sys, &s.barrier, &s.class_k, &c, t, &xp, &u_des).unwrap();
            assert!(
                (r2.u[0] - r1.u[0]).abs() <= 1e-5,
                "jump {} at x = {x:?}",
                (r2.u[0] - r1.u[0]).abs()
            );
            checked += 1;
        }
    }

    #[test]
    fn grid_search_oracle_confirms_minimality() {
        let s = setup();
        let mut rng = StdRng::seed_from_u64(34);
        let c = CompensationTerm::robust_bound(2.0).unwrap();
        let mut checked = 0;
        while checked < 100 {
            let t = rng.gen_range(0.0..20.0);
            let x = Vector2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let (lf, lg) = s.barrier.lie_derivatives(&s.sys, t, &x);
            let a = lg[0];
            if a.abs() < 0.1 {
                continue;
            }
            let h = s.barrier.eval(&x);
            let sigma = c.evaluate(&s.barrier, t, &x, None);
            let b0 = -s.class_k.apply(h) + sigma - lf;
            if (b0 / a).abs() > 90.0 {
                continue;
            }
            let u_des = Input::from_vec(vec![rng.gen_range(-80.0..80.0)]);
            let r = safety_filter(&s.sys, &s.barrier, &s.class_k, &c, t, &x, &u_des).unwrap();
            if !r.active {
                continue;
            }
            // dense scan over u in [-100, 100] at 1e-4 resolution
            let mut best = f64::INFINITY;
            let mut best_u = f64::NAN;
            let n = 2_000_000usize;
            for i in 0..=n {
                let u = -100.0 + i as f64 * 1e-4;
                if a * u >= b0 {
                    let d = (u - u_des[0]).abs();
                    if d < best {
                        best = d;
                        best_u = u;
                    }
                }
            }
            assert!((r.u[0] - best_u).abs() <= 1e-3, "closed form {} vs grid {}", r.u[0], best_u);
            checked += 1;
        }
    }
}

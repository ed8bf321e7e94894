//! End-to-end verification suite: quantitative checks of every guarantee the
//! toolkit makes on the pendulum benchmark, runnable via the `verify` CLI
//! subcommand or the `acceptance` integration test.

use nalgebra::Vector2;
use rand::{rngs::StdRng, Rng, SeedableRng};

use crate::barrier::{LinearClassKe, QuadraticBarrier};
use crate::compensation::CompensationTerm;
use crate::dynamics::{pendulum_system, Input, PendulumParams, StepDisturbance};
use crate::filter::safety_filter;
use crate::levelset::{
    solve_hstar_issf, solve_hstar_issf_pbf, solve_hstar_rcbf, GradientNormBounds,
};
use crate::sim::{simulate, Scenario, Trajectory};

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CriterionResult {
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {}: {} - {} ({})",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.details
        )
    }
}

struct Bench {
    params: PendulumParams,
    barrier: QuadraticBarrier,
    class_k: LinearClassKe,
    bounds: GradientNormBounds,
    p: f64,
}

impl Bench {
    fn new() -> Self {
        let params = PendulumParams::default();
        let barrier = QuadraticBarrier::from_weights(4.0, 2.0).unwrap();
        Self {
            params,
            barrier,
            class_k: LinearClassKe::new(8.0).unwrap(),
            bounds: GradientNormBounds::from_barrier(&barrier),
            p: params.uncertainty_bound(),
        }
    }

    fn scenario(&self, compensation: CompensationTerm, dt: f64) -> Scenario {
        Scenario {
            name: "acceptance".into(),
            params: self.params,
            disturbance: StepDisturbance::new(self.params.f_bar, [5.0, 10.0, 15.0]).unwrap(),
            barrier: self.barrier,
            class_k: self.class_k,
            compensation,
            x0: Vector2::zeros(),
            dt,
            horizon: 20.0,
        }
    }

    fn run(&self, compensation: CompensationTerm, dt: f64) -> Result<Trajectory, String> {
        simulate(&self.scenario(compensation, dt)).map_err(|e| e.to_string())
    }
}

fn min_h(traj: &Trajectory) -> f64 {
    traj.min_h().map(|(h, _)| h).unwrap_or(f64::NAN)
}

fn sign_scan_root(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Option<f64> {
    let step = (hi - lo) / n as f64;
    let mut prev = f(lo);
    for i in 1..=n {
        let h = lo + i as f64 * step;
        let cur = f(h);
        if prev == 0.0 || prev.signum() != cur.signum() {
            return Some(h - 0.5 * step);
        }
        prev = cur;
    }
    None
}

pub fn run_all() -> Vec<CriterionResult> {
    let b = Bench::new();
    vec![
        criterion_1(&b),
        criterion_2(&b),
        criterion_3(&b),
        criterion_4(&b),
        criterion_5(&b),
        criterion_6(&b),
        criterion_7(&b),
        criterion_8(&b),
    ]
}

/// Exact compensation keeps the trajectory safe, robustly to the step size.
fn criterion_1(b: &Bench) -> CriterionResult {
    let name = "robust safety with exact bound";
    let run = |dt: f64| b.run(CompensationTerm::robust_bound(b.p).unwrap(), dt);
    let (fine, finer) = match (run(1e-3), run(5e-4)) {
        (Ok(a), Ok(c)) => (a, c),
        (Err(e), _) | (_, Err(e)) => return fail(1, name, e),
    };
    let m = min_h(&fine);
    let shift = (m - min_h(&finer)).abs();
    let passed = m >= -1e-4 && shift < 1e-5;
    CriterionResult {
        id: 1,
        name,
        passed,
        details: format!("min_h = {m:.6e}, dt-halving shift = {shift:.2e}"),
    }
}

/// Under-approximated bound: certified degradation level holds in closed loop.
fn criterion_2(b: &Bench) -> CriterionResult {
    let name = "safety degradation certified (p_hat = p/2)";
    let p_hat = 0.5 * b.p;
    let cert = match solve_hstar_rcbf(&b.class_k, &b.bounds, p_hat, b.p) {
        Ok(c) => c,
        Err(e) => return fail(2, name, e.to_string()),
    };
    let f = |h: f64| b.class_k.apply(h) - b.bounds.upper(h).unwrap() * (p_hat - b.p);
    let oracle = sign_scan_root(&f, -5.0, 1.0, 1_000_000).unwrap_or(f64::NAN);
    let traj = match b.run(CompensationTerm::robust_bound(p_hat).unwrap(), 1e-3) {
        Ok(t) => t,
        Err(e) => return fail(2, name, e),
    };
    let m = min_h(&traj);
    let passed = cert.residual <= 1e-10
        && (cert.h_star - oracle).abs() <= 1e-5
        && (cert.h_star + 0.670189).abs() <= 1e-3
        && m >= cert.h_star - 1e-4;
    CriterionResult {
        id: 2,
        name,
        passed,
        details: format!(
            "h* = {:.6}, residual = {:.2e}, min_h = {:.6} (left S: {})",
            cert.h_star,
            cert.residual,
            m,
            m < 0.0
        ),
    }
}

/// Over-approximated bound: conservativeness level holds and the run stays
/// inside the original safe set.
fn criterion_3(b: &Bench) -> CriterionResult {
    let name = "conservativeness certified (p_hat = 2p)";
    let p_hat = 2.0 * b.p;
    let cert = match solve_hstar_rcbf(&b.class_k, &b.bounds, p_hat, b.p) {
        Ok(c) => c,
        Err(e) => return fail(3, name, e.to_string()),
    };
    let f = |h: f64| b.class_k.apply(h) - b.bounds.lower(h).unwrap() * (p_hat - b.p);
    let oracle = sign_scan_root(&f, -5.0, 1.0, 1_000_000).unwrap_or(f64::NAN);
    let traj = match b.run(CompensationTerm::robust_bound(p_hat).unwrap(), 1e-3) {
        Ok(t) => t,
        Err(e) => return fail(3, name, e),
    };
    let m = min_h(&traj);
    let passed = cert.residual <= 1e-10
        && (cert.h_star - oracle).abs() <= 1e-5
        && (cert.h_star - 0.339346).abs() <= 1e-3
        && m >= cert.h_star - 1e-4
        && m >= 0.0;
    CriterionResult {
        id: 3,
        name,
        passed,
        details: format!("h* = {:.6}, min_h = {:.6}", cert.h_star, m),
    }
}

/// ISSf levels: closed form for a flat epsilon, fixed-point oracle for the
/// tuned one.
fn criterion_4(b: &Bench) -> CriterionResult {
    let name = "issf level solver agrees with closed form and fixed point";
    let flat = match solve_hstar_issf(&b.class_k, 1.0, 0.0, b.p) {
        Ok(c) => c,
        Err(e) => return fail(4, name, e.to_string()),
    };
    let closed_form = -1.0 * b.p * b.p / (4.0 * b.class_k.rate());
    let tuned = match solve_hstar_issf(&b.class_k, 1.0, 4.0, b.p) {
        Ok(c) => c,
        Err(e) => return fail(4, name, e.to_string()),
    };
    let mut fp: f64 = 0.0;
    for _ in 0..500 {
        fp = b.class_k.inverse(-(4.0 * fp).exp() * b.p * b.p / 4.0);
    }
    let passed = (flat.h_star - closed_form).abs() <= 1e-10
        && (tuned.h_star - fp).abs() <= 1e-10
        && (tuned.h_star + 0.027945).abs() <= 1e-5;
    CriterionResult {
        id: 4,
        name,
        passed,
        details: format!(
            "flat h* = {:.6} (closed form {closed_form:.6}), tuned h* = {:.6} (fixed point {fp:.6})",
            flat.h_star, tuned.h_star
        ),
    }
}

/// The refined level improves on the ISSf level, its validity condition
/// holds, both closed-loop runs respect it, and tuning trades margin.
fn criterion_5(b: &Bench) -> CriterionResult {
    let name = "refined level tightens issf and holds in closed loop";
    let mut min_hs = Vec::new();
    for lambda in [0.0, 4.0] {
        let issf = match solve_hstar_issf(&b.class_k, 1.0, lambda, b.p) {
            Ok(c) => c,
            Err(e) => return fail(5, name, e.to_string()),
        };
        let pbf = match solve_hstar_issf_pbf(&b.class_k, &b.bounds, 1.0, lambda, b.p) {
            Ok(c) => c,
            Err(e) => return fail(5, name, e.to_string()),
        };
        if !(pbf.h_star > issf.h_star && pbf.conditions_ok) {
            return fail(
                5,
                name,
                format!("ordering/validity failed at lambda = {lambda}"),
            );
        }
        let traj = match b.run(CompensationTerm::issf(1.0, lambda).unwrap(), 1e-3) {
            Ok(t) => t,
            Err(e) => return fail(5, name, e),
        };
        let m = min_h(&traj);
        if m < pbf.h_star - 1e-4 {
            return fail(
                5,
                name,
                format!("min_h {m:.6} below refined h* {:.6} at lambda = {lambda}", pbf.h_star),
            );
        }
        min_hs.push(m);
    }
    let passed = min_hs[1] < min_hs[0];
    CriterionResult {
        id: 5,
        name,
        passed,
        details: format!(
            "min_h(lambda=0) = {:.6}, min_h(lambda=4) = {:.6}",
            min_hs[0], min_hs[1]
        ),
    }
}

/// The closed-form filter matches a dense grid-search minimizer on active
/// instances and never violates the constraint.
fn criterion_6(b: &Bench) -> CriterionResult {
    let name = "filter optimality vs grid-search oracle";
    let sys = pendulum_system(
        &b.params,
        StepDisturbance::new(b.params.f_bar, [5.0, 10.0, 15.0]).unwrap(),
    );
    let mut rng = StdRng::seed_from_u64(1234);
    let mut checked = 0;
    let mut worst_gap: f64 = 0.0;
    let mut worst_slack = f64::INFINITY;
    while checked < 1000 {
        let t = rng.gen_range(0.0..20.0);
        let x = Vector2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
        let (lf, lg) = b.barrier.lie_derivatives(&sys, t, &x);
        let a = lg[0];
        if a.abs() < 0.05 {
            continue;
        }
        let c = CompensationTerm::robust_bound(rng.gen_range(0.5..2.5)).unwrap();
        let sigma = c.evaluate(&b.barrier, t, &x, None);
        let b0 = -b.class_k.apply(b.barrier.eval(&x)) + sigma - lf;
        if (b0 / a).abs() > 90.0 {
            continue;
        }
        let u_des = Input::from_vec(vec![rng.gen_range(-80.0..80.0)]);
        let r = match safety_filter(&sys, &b.barrier, &b.class_k, &c, t, &x, &u_des) {
            Ok(r) => r,
            Err(e) => return fail(6, name, e.to_string()),
        };
        if !r.active {
            continue;
        }
        worst_slack = worst_slack.min(r.slack);
        // oracle: dense scan over u in [-100, 100] at 1e-4 resolution
        let mut best_d = f64::INFINITY;
        let mut best_u = f64::NAN;
        for i in 0..=2_000_000u32 {
            let u = -100.0 + f64::from(i) * 1e-4;
            if a * u >= b0 {
                let d = (u - u_des[0]).abs();
                if d < best_d {
                    best_d = d;
                    best_u = u;
                }
            }
        }
        worst_gap = worst_gap.max((r.u[0] - best_u).abs());
        checked += 1;
    }
    let passed = worst_gap <= 1e-3 && worst_slack >= -1e-9;
    CriterionResult {
        id: 6,
        name,
        passed,
        details: format!("worst |closed form - grid| = {worst_gap:.2e}, worst slack = {worst_slack:.2e}"),
    }
}

/// Completion of squares and compensation sufficiency at random samples.
fn criterion_7(b: &Bench) -> CriterionResult {
    let name = "inequality suite";
    let sys = pendulum_system(
        &b.params,
        StepDisturbance::new(b.params.f_bar, [5.0, 10.0, 15.0]).unwrap(),
    );
    let issf = CompensationTerm::issf(1.0, 4.0).unwrap();
    let robust = CompensationTerm::robust_bound(1.5 * b.p).unwrap();
    let mut rng = StdRng::seed_from_u64(4321);
    let mut violations = 0usize;
    for _ in 0..10_000 {
        let t = rng.gen_range(0.0..25.0);
        let x = Vector2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let g = b.barrier.gradient_norm(&x);
        let eps = issf.epsilon(b.barrier.eval(&x)).unwrap();
        if g * g / eps - g * b.p < -eps * b.p * b.p / 4.0 - 1e-12 {
            violations += 1;
        }
        let lft = (b.barrier.gradient(&x) * sys.uncertainty_drift(t, &x))[(0, 0)];
        if lft + robust.evaluate(&b.barrier, t, &x, None) < -1e-12 {
            violations += 1;
        }
    }
    CriterionResult {
        id: 7,
        name,
        passed: violations == 0,
        details: format!("{violations} violations in 2 x 10^4 samples"),
    }
}

/// Gradient norms over level-set boundaries stay inside the closed-form
/// sandwich.
fn criterion_8(b: &Bench) -> CriterionResult {
    let name = "gradient-norm sandwich on level-set boundaries";
    let mut worst: f64 = 0.0;
    for li in 0..20 {
        let h_star = -2.0 + 2.9 * li as f64 / 19.0; // spans [-2, 0.9]
        let lo = b.bounds.lower(h_star).unwrap();
        let hi = b.bounds.upper(h_star).unwrap();
        for pi in 0..50 {
            let theta = pi as f64 * std::f64::consts::TAU / 50.0;
            let x = b.barrier.boundary_point(h_star, theta);
            let g = b.barrier.gradient_norm(&x);
            worst = worst.max(lo - g).max(g - hi);
        }
    }
    CriterionResult {
        id: 8,
        name,
        passed: worst <= 1e-9,
        details: format!("worst sandwich violation = {worst:.2e} over 20 x 50 boundary points"),
    }
}

fn fail(id: usize, name: &'static str, details: String) -> CriterionResult {
    CriterionResult {
        id,
        name,
        passed: false,
        details,
    }
}

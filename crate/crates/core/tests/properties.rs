//! Randomized invariants over the parsers, writers, and the filter.

use nalgebra::Vector2;
use proptest::prelude::*;

use pbf_safety::barrier::{LinearClassKe, QuadraticBarrier};
use pbf_safety::compensation::CompensationTerm;
use pbf_safety::config::ScenarioConfig;
use pbf_safety::dynamics::{pendulum_system, Input, PendulumParams, StepDisturbance};
use pbf_safety::filter::safety_filter;
use pbf_safety::report::{
    format_float, read_certificate_csv, read_sweep_csv, read_trajectory_csv,
    write_certificate_csv, write_sweep_csv, write_trajectory_csv, CertificateRecord, SweepRow,
};
use pbf_safety::sim::{Sample, Trajectory};

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

proptest! {
    #[test]
    fn format_float_round_trips_exactly(v in finite()) {
        let parsed: f64 = format_float(v).parse().unwrap();
        prop_assert_eq!(parsed.to_bits(), v.to_bits());
    }

    #[test]
    fn config_parser_never_panics(text in "\\PC{0,200}") {
        let _ = ScenarioConfig::parse_str(&text);
    }

    #[test]
    fn config_round_trips_through_rendering(
        mass in 0.1f64..10.0,
        length in 0.1f64..5.0,
        f_bar in 0.0f64..5.0,
        alpha_c in 0.1f64..20.0,
        eps0 in 0.01f64..10.0,
        lambda in 0.0f64..8.0,
        x0 in (-1.0f64..1.0, -1.0f64..1.0),
        dt in 1e-4f64..1e-1,
    ) {
        let text = format!(
            "plant.mass = {}\nplant.length = {}\nplant.f_bar = {}\n\
             class_k.alpha_c = {}\ncompensation.variant = issf\n\
             compensation.eps0 = {}\ncompensation.lambda = {}\n\
             sim.x0 = {}, {}\nsim.dt = {}\n",
            format_float(mass), format_float(length), format_float(f_bar),
            format_float(alpha_c), format_float(eps0), format_float(lambda),
            format_float(x0.0), format_float(x0.1), format_float(dt),
        );
        let cfg = ScenarioConfig::parse_str(&text).unwrap();
        prop_assert_eq!(cfg.mass, mass);
        prop_assert_eq!(cfg.length, length);
        prop_assert_eq!(cfg.f_bar, f_bar);
        prop_assert_eq!(cfg.alpha_c, alpha_c);
        prop_assert_eq!(cfg.eps0, eps0);
        prop_assert_eq!(cfg.lambda, lambda);
        prop_assert_eq!(cfg.x0, [x0.0, x0.1]);
        prop_assert_eq!(cfg.dt, dt);
    }

    #[test]
    fn trajectory_csv_round_trips(rows in prop::collection::vec(
        (finite(), finite(), finite(), finite(), finite(), finite(), finite(), finite()),
        0..50,
    )) {
        let samples: Vec<Sample> = rows
            .iter()
            .map(|&(t, x1, x2, u, dist, h, sigma, res)| Sample {
                t,
                x: Vector2::new(x1, x2),
                u,
                disturbance: dist,
                h,
                sigma,
                constraint_residual: res,
            })
            .collect();
        let traj = Trajectory {
            samples: samples.clone(),
            dt: 1e-3,
            metadata: String::new(),
        };
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &mut buf).unwrap();
        let back = read_trajectory_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, samples);
    }

    #[test]
    fn certificate_csv_round_trips(
        records in prop::collection::vec(
            ("[a-z_]{1,12}", finite(), finite(), any::<bool>(), "[ -~&&[^,]]{0,20}(, [ -~&&[^,]]{0,20}){0,2}"),
            0..10,
        )
    ) {
        let records: Vec<CertificateRecord> = records
            .into_iter()
            .map(|(equation, h_star, residual, conditions_ok, annotation)| CertificateRecord {
                equation,
                h_star,
                residual,
                conditions_ok,
                annotation,
            })
            .collect();
        let mut buf = Vec::new();
        write_certificate_csv(&records, &mut buf).unwrap();
        let back = read_certificate_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, records);
    }

    #[test]
    fn sweep_csv_round_trips(
        rows in prop::collection::vec(
            (
                "[a-z_]{1,8}",
                finite(),
                prop::option::of(finite()),
                prop::option::of(finite()),
                prop::option::of(finite()),
                finite(),
                any::<bool>(),
            ),
            0..10,
        )
    ) {
        let rows: Vec<SweepRow> = rows
            .into_iter()
            .map(|(parameter, value, a, b, c, min_h, violated)| SweepRow {
                parameter,
                value,
                h_star_rcbf: a,
                h_star_issf: b,
                h_star_issf_pbf: c,
                min_h,
                violated,
            })
            .collect();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let back = read_sweep_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, rows);
    }

    #[test]
    fn filter_output_always_satisfies_constraint(
        t in 0.0f64..20.0,
        x1 in -1.0f64..1.0,
        x2 in -1.0f64..1.0,
        u_des in -50.0f64..50.0,
        p_hat in 0.0f64..2.0,
    ) {
        let params = PendulumParams::default();
        let sys = pendulum_system(
            &params,
            StepDisturbance::new(params.f_bar, [5.0, 10.0, 15.0]).unwrap(),
        );
        let barrier = QuadraticBarrier::from_weights(4.0, 2.0).unwrap();
        let class_k = LinearClassKe::new(8.0).unwrap();
        let comp = CompensationTerm::robust_bound(p_hat).unwrap();
        let x = Vector2::new(x1, x2);
        let u = Input::from_vec(vec![u_des]);
        match safety_filter(&sys, &barrier, &class_k, &comp, t, &x, &u) {
            Ok(r) => {
                prop_assert!(r.slack >= -1e-9);
                if !r.active {
                    prop_assert_eq!(r.u[0], u_des);
                }
            }
            // only the degenerate-gradient case may be infeasible
            Err(_) => prop_assert!((x1 + x2).abs() < 1e-10),
        }
    }
}

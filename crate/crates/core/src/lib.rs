//! Safety-critical control toolkit for uncertain control-affine systems.
//!
//! The library pairs a minimally invasive control barrier function (CBF)
//! safety filter, robustified against bounded model uncertainty, with a
//! level-set certification engine: given the compensation design and the
//! true uncertainty bound, it solves for the barrier level h* whose
//! superlevel set is guaranteed invariant. h* < 0 quantifies safety
//! degradation (the system may leave the nominal safe set but not the
//! enlarged one), h* > 0 quantifies conservativeness (the system stays in a
//! strict subset). Closed-loop simulation of the inverted pendulum benchmark
//! with runtime monitors checks the certified bounds empirically.

pub mod acceptance;
pub mod barrier;
pub mod compensation;
pub mod config;
pub mod dynamics;
pub mod filter;
pub mod levelset;
pub mod report;
pub mod sim;

pub use barrier::{LinearClassKe, QuadraticBarrier, State};
pub use compensation::CompensationTerm;
pub use config::ScenarioConfig;
pub use dynamics::{
    desired_controller, pendulum_system, Input, PendulumParams, StepDisturbance,
    UncertainAffineSystem,
};
pub use filter::{safety_filter, FilterResult};
pub use levelset::{
    compare_certificates, solve_hstar_issf, solve_hstar_issf_pbf, solve_hstar_rcbf, CertEquation,
    GradientNormBounds, LevelSetCertificate,
};
pub use sim::{monitor, rk4_step, simulate, Monitor, Sample, Scenario, Trajectory};

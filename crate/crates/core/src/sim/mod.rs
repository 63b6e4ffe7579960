//! Worked example families, simulation and empirical verification of
//! composed certificates. Double precision only.

mod integrate;
mod lyap_eq;
mod models;
mod verify;

pub use integrate::{integrate, rk4_step, Signal, Trajectory, DIVERGENCE_NORM};
pub use lyap_eq::{lyapunov_residual, solve_lyapunov_eq, MAX_LYAPUNOV_DIM};
pub use models::{cg_gains, linear_gains, CohenGrossberg, LinearGains, LinearInterconnection, SystemModel};
pub use verify::{
    check_decrease, check_iss_bound, DecreaseReport, DecreaseSpec, InputSampling, IssReport, IssSpec, RunResult,
    CONTRACTION, SETTLE_SLACK, V_DRIFT,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("NotHurwitz: Lyapunov equation has no positive definite solution (residual {residual:e})")]
    NotHurwitz { residual: f64 },
    #[error("BadParameters: {0}")]
    BadParameters(String),
    #[error("Diverged: state norm exceeded 1e12 at t = {t}")]
    Diverged { t: f64, trajectory: Box<Trajectory> },
}

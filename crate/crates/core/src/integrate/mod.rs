//! Time integration: Euler-Maruyama ensembles, adaptive Runge-Kutta and
//! the Ito-to-Stratonovich drift correction.

pub mod config;
pub mod engine;
pub mod rk;
pub mod stratonovich;

pub use config::IntegratorConfig;
pub use engine::{
    run_particles, sample_initial, simulate, simulate_frozen, simulate_full, FrozenSystem, FullSystem, InitialCondition,
    InitialSampler, SdeModel,
};
pub use rk::{rk_solve, DensePath};
pub use stratonovich::ito_to_stratonovich_drift;

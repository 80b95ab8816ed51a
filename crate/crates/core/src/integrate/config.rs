use crate::error::{invalid, Result};

/// Step size, horizon, ensemble size and seed for a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_particles: usize,
    pub seed: u64,
    /// Time discarded before accumulating ergodic averages.
    pub burn_in: f64,
    /// Local error tolerance of the adaptive Runge-Kutta solver.
    pub rk_tol: f64,
    /// Snapshot every this many steps (the final time is always kept).
    pub record_every: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64, n_particles: usize, seed: u64) -> Result<Self> {
        let cfg = Self { dt, t_end, n_particles, seed, burn_in: 0.0, rk_tol: 1e-9, record_every: 1 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Result<Self> {
        self.burn_in = burn_in;
        self.validate()?;
        Ok(self)
    }

    /// Record a snapshot every `k` steps.
    pub fn with_record_every(mut self, k: usize) -> Result<Self> {
        self.record_every = k;
        self.validate()?;
        Ok(self)
    }

    /// Record snapshots roughly every `interval` time units.
    pub fn with_record_interval(self, interval: f64) -> Result<Self> {
        let k = (interval / self.dt).round().max(1.0) as usize;
        self.with_record_every(k)
    }

    pub fn with_rk_tol(mut self, tol: f64) -> Result<Self> {
        self.rk_tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return invalid(format!("horizon {} must be at least dt = {}", self.t_end, self.dt));
        }
        if self.n_particles == 0 {
            return invalid("ensemble size must be at least 1");
        }
        if !(self.burn_in >= 0.0 && self.burn_in <= self.t_end) {
            return invalid(format!("burn-in {} must lie in [0, {}]", self.burn_in, self.t_end));
        }
        if !(self.rk_tol > 0.0) {
            return invalid("Runge-Kutta tolerance must be positive");
        }
        if self.record_every == 0 {
            return invalid("record_every must be at least 1");
        }
        Ok(())
    }

    /// Number of steps; the horizon is rounded to a whole number of steps.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    /// First step index at or after the burn-in time.
    pub fn burn_in_steps(&self) -> usize {
        ((self.burn_in / self.dt) - 1e-9).ceil().max(0.0) as usize
    }
}

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::integrate::{rk_solve, sample_initial, simulate, InitialCondition, IntegratorConfig, SdeModel};
use crate::linear_gaussian::{gyongy_drift_linear, PlanarInitialLaw};
use crate::model::{CoefficientField, EnsembleTrajectory, Snapshot};
use crate::rng::STREAM_LAYOUT;
use crate::table::{Cell, Table};

/// Which reduction produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducedKind {
    Averaged,
    Projected,
    Gyongy,
}

impl ReducedKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Averaged => "averaged",
            Self::Projected => "projected",
            Self::Gyongy => "gyongy",
        }
    }
}

/// Where the coefficients came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Analytic,
    MonteCarlo { particles: usize, samples: usize },
}

/// Fallible drift `(t, x, out)`.
pub type DriftFn = dyn Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync;

/// Binned coefficients of a scalar reduced model at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct BinTable {
    pub time: f64,
    pub centers: Vec<f64>,
    pub counts: Vec<usize>,
    pub usable: Vec<bool>,
    pub drift: Vec<f64>,
    pub drift_se: Vec<f64>,
    /// Square root of the binned mean of the slow diffusion matrix.
    pub diffusion: Vec<f64>,
    pub diffusion_se: Vec<f64>,
}

impl BinTable {
    fn usable_points(&self) -> Vec<(f64, f64, f64)> {
        (0..self.centers.len())
            .filter(|&i| self.usable[i])
            .map(|i| (self.centers[i], self.drift[i], self.diffusion[i]))
            .collect()
    }
}

/// Piecewise-linear interpolation over usable bins, constant outside.
#[derive(Debug, Clone, PartialEq)]
struct Interpolant {
    time: f64,
    xs: Vec<f64>,
    drift: Vec<f64>,
    diffusion: Vec<f64>,
}

impl Interpolant {
    fn eval(values: &[f64], xs: &[f64], x: f64) -> f64 {
        let n = xs.len();
        if x <= xs[0] {
            return values[0];
        }
        if x >= xs[n - 1] {
            return values[n - 1];
        }
        let k = xs.partition_point(|c| *c <= x) - 1;
        let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
        values[k] * (1.0 - w) + values[k + 1] * w
    }
}

enum Coefficients {
    Analytic { drift: Arc<DriftFn>, diffusion: CoefficientField },
    Binned { tables: Vec<BinTable>, interpolants: Vec<Interpolant> },
}

/// A reduced SDE `dX = F(t, X) dt + S(t, X) dB` on the slow variable.
pub struct ReducedModel {
    kind: ReducedKind,
    dim: usize,
    coefficients: Coefficients,
    time_domain: Option<(f64, f64)>,
    provenance: Provenance,
}

impl std::fmt::Debug for ReducedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReducedModel")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("time_domain", &self.time_domain)
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl ReducedModel {
    /// Closed-form coefficients. `diffusion` is the `dim x dim` noise matrix
    /// as a field of `(t, x)`.
    pub fn analytic<F>(kind: ReducedKind, dim: usize, drift: F, diffusion: CoefficientField, time_domain: Option<(f64, f64)>) -> Result<Self>
    where
        F: Fn(f64, &[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    {
        if diffusion.rows() != dim || diffusion.cols() != dim || diffusion.x_dim() != dim || diffusion.y_dim() != 0 {
            return Err(Error::Dimension { what: "reduced diffusion", expected: dim, got: diffusion.rows() });
        }
        if let Some((a, b)) = time_domain {
            if !(b > a) {
                return invalid("empty time domain");
            }
        }
        Ok(Self {
            kind,
            dim,
            coefficients: Coefficients::Analytic { drift: Arc::new(drift), diffusion },
            time_domain,
            provenance: Provenance::Analytic,
        })
    }

    /// Scalar model `dX = (slope X + offset) dt + sigma dB`.
    pub fn scalar_linear(kind: ReducedKind, slope: f64, offset: f64, sigma: f64) -> Result<Self> {
        let diffusion = if sigma == 0.0 {
            CoefficientField::zero(1, 1, 1, 0)
        } else {
            CoefficientField::scaled_identity(1, sigma, 1, 0)
        };
        Self::analytic(
            kind,
            1,
            move |_, x, out| {
                out[0] = slope * x[0] + offset;
                Ok(())
            },
            diffusion,
            None,
        )
    }

    /// Closed-form mimicking model of the planar counterexample on `[0, t_end]`.
    pub fn gyongy_planar(init: PlanarInitialLaw, t_end: f64) -> Result<Self> {
        Self::analytic(
            ReducedKind::Gyongy,
            1,
            move |t, x, out| {
                out[0] = gyongy_drift_linear(t, x[0], &init)?;
                Ok(())
            },
            CoefficientField::zero(1, 1, 1, 0),
            Some((0.0, t_end)),
        )
    }

    /// Binned scalar model from tables at increasing times (one table for
    /// an autonomous model). Between table times the coefficients are held
    /// at the most recent table.
    pub fn binned(kind: ReducedKind, tables: Vec<BinTable>, provenance: Provenance, time_domain: Option<(f64, f64)>) -> Result<Self> {
        if tables.is_empty() {
            return invalid("binned model needs at least one table");
        }
        if tables.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return invalid("table times must be strictly increasing");
        }
        let interpolants = tables
            .iter()
            .map(|t| {
                let pts = t.usable_points();
                if pts.is_empty() {
                    return Err(Error::InsufficientCoverage { usable: 0, required: 1 });
                }
                Ok(Interpolant {
                    time: t.time,
                    xs: pts.iter().map(|p| p.0).collect(),
                    drift: pts.iter().map(|p| p.1).collect(),
                    diffusion: pts.iter().map(|p| p.2).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, dim: 1, coefficients: Coefficients::Binned { tables, interpolants }, time_domain, provenance })
    }

    pub fn kind(&self) -> ReducedKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time_domain(&self) -> Option<(f64, f64)> {
        self.time_domain
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn tables(&self) -> Option<&[BinTable]> {
        match &self.coefficients {
            Coefficients::Binned { tables, .. } => Some(tables),
            Coefficients::Analytic { .. } => None,
        }
    }

    /// True when the noise coefficient vanishes identically.
    pub fn is_deterministic(&self) -> bool {
        match &self.coefficients {
            Coefficients::Analytic { diffusion, .. } => diffusion.is_zero(),
            Coefficients::Binned { interpolants, .. } => interpolants.iter().all(|i| i.diffusion.iter().all(|v| *v == 0.0)),
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if let Some((a, b)) = self.time_domain {
            let slack = 1e-9 * b.abs().max(1.0);
            if t < a - slack || t > b + slack {
                return Err(Error::OutsideTimeDomain { t, start: a, end: b });
            }
        }
        Ok(())
    }

    fn interpolant(interpolants: &[Interpolant], t: f64) -> &Interpolant {
        let k = interpolants.partition_point(|i| i.time <= t + 1e-12 * t.abs().max(1.0));
        &interpolants[k.saturating_sub(1)]
    }

    pub fn drift_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_time(t)?;
        match &self.coefficients {
            Coefficients::Analytic { drift, .. } => drift(t, x, out),
            Coefficients::Binned { interpolants, .. } => {
                let ip = Self::interpolant(interpolants, t);
                out[0] = Interpolant::eval(&ip.drift, &ip.xs, x[0]);
                Ok(())
            }
        }
    }

    pub fn drift(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(t, x, &mut out)?;
        Ok(out)
    }

    /// Noise matrix at `(t, x)`.
    pub fn diffusion(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_time(t)?;
        Ok(match &self.coefficients {
            Coefficients::Analytic { diffusion, .. } => diffusion.eval(t, x, &[]),
            Coefficients::Binned { interpolants, .. } => {
                let ip = Self::interpolant(interpolants, t);
                DMatrix::from_element(1, 1, Interpolant::eval(&ip.diffusion, &ip.xs, x[0]))
            }
        })
    }

    /// Binned coefficients as CSV with columns
    /// `t, x_bin_center, count, usable, drift, drift_se, diffusion, diffusion_se`.
    pub fn to_table(&self) -> Option<Table> {
        let tables = self.tables()?;
        let mut out = Table::new(&["t", "x_bin_center", "count", "usable", "drift", "drift_se", "diffusion", "diffusion_se"]);
        for t in tables {
            for i in 0..t.centers.len() {
                out.push(vec![
                    Cell::F(t.time),
                    Cell::F(t.centers[i]),
                    Cell::U(t.counts[i]),
                    Cell::B(t.usable[i]),
                    Cell::F(t.drift[i]),
                    Cell::F(t.drift_se[i]),
                    Cell::F(t.diffusion[i]),
                    Cell::F(t.diffusion_se[i]),
                ]);
            }
        }
        Some(out)
    }
}

struct ReducedSde<'a> {
    model: &'a ReducedModel,
}

impl SdeModel for ReducedSde<'_> {
    fn dim(&self) -> usize {
        self.model.dim
    }

    fn noise_dim(&self) -> usize {
        self.model.dim
    }

    fn work_len(&self) -> usize {
        2 * self.model.dim + self.model.dim * self.model.dim
    }

    fn em_step(&self, t: f64, dt: f64, z: &mut [f64], dw: &[f64], work: &mut [f64]) {
        let d = self.model.dim;
        let (drift, rest) = work.split_at_mut(d);
        let (inc, scratch) = rest.split_at_mut(d);
        if self.model.drift_into(t, z, drift).is_err() {
            // surfaces as a non-finite state with its location
            drift.iter_mut().for_each(|v| *v = f64::NAN);
        }
        inc.iter_mut().for_each(|v| *v = 0.0);
        match &self.model.coefficients {
            Coefficients::Analytic { diffusion, .. } => diffusion.apply_add(t, z, &[], dw, 1.0, inc, scratch),
            Coefficients::Binned { interpolants, .. } => {
                let ip = ReducedModel::interpolant(interpolants, t);
                inc[0] = Interpolant::eval(&ip.diffusion, &ip.xs, z[0]) * dw[0];
            }
        }
        for i in 0..d {
            z[i] += drift[i] * dt + inc[i];
        }
    }
}

/// Ensemble of the reduced dynamics on the Euler-Maruyama time grid of
/// `cfg`. Deterministic models are integrated per particle by the adaptive
/// Runge-Kutta solver and sampled on the same grid.
pub fn simulate_reduced(model: &ReducedModel, init: &InitialCondition, cfg: &IntegratorConfig) -> Result<EnsembleTrajectory> {
    cfg.validate()?;
    model.check_time(0.0)?;
    model.check_time(cfg.t_end)?;
    if !model.is_deterministic() {
        return simulate(&ReducedSde { model }, init, cfg);
    }
    let d = model.dim;
    let n_steps = cfg.n_steps();
    let recorded: Vec<usize> = (0..=n_steps).filter(|s| s % cfg.record_every == 0 || *s == n_steps).collect();
    let times: Vec<f64> = recorded.iter().map(|s| *s as f64 * cfg.dt).collect();
    let t_end = *times.last().expect("at least one time");
    let starts = sample_initial(init, d, cfg.seed, cfg.n_particles)?;
    let paths = (0..cfg.n_particles)
        .into_par_iter()
        .map(|p| {
            let x0 = starts.row(p);
            let path = rk_solve(|t, x, out| model.drift_into(t, x, out), x0, 0.0, t_end, cfg.rk_tol)?;
            let mut vals = vec![0.0; times.len() * d];
            for (k, t) in times.iter().enumerate() {
                path.eval_into(*t, &mut vals[k * d..(k + 1) * d])?;
            }
            Ok(vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let states = (0..times.len())
        .map(|k| {
            let mut data = Vec::with_capacity(cfg.n_particles * d);
            for path in &paths {
                data.extend_from_slice(&path[k * d..(k + 1) * d]);
            }
            Snapshot::new(cfg.n_particles, d, data)
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleTrajectory::new(times, states, cfg.seed, STREAM_LAYOUT)
}

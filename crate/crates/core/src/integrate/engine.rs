//! Euler-Maruyama ensembles with per-particle random streams.

use std::sync::Arc;

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrate::config::IntegratorConfig;
use crate::model::{validate_covariance, EnsembleTrajectory, GaussianMeasure, SlowFastSystem, Snapshot};
use crate::rng::{initial_stream, noise_stream, STREAM_LAYOUT};

/// A stochastic model advanced by explicit Euler-Maruyama steps.
pub trait SdeModel: Sync {
    fn dim(&self) -> usize;

    /// Number of independent standard Brownian components consumed per step.
    fn noise_dim(&self) -> usize;

    /// Scratch space needed by `em_step`.
    fn work_len(&self) -> usize {
        0
    }

    /// `z <- z + b(t, z) dt + sigma(t, z) dw` with coefficients at the old state.
    fn em_step(&self, t: f64, dt: f64, z: &mut [f64], dw: &[f64], work: &mut [f64]);
}

/// Sampler signature for custom initial laws.
pub type InitialSampler = dyn Fn(&mut ChaCha8Rng, &mut [f64]) + Send + Sync;

/// Initial state of every particle.
#[derive(Clone)]
pub enum InitialCondition {
    Fixed(Vec<f64>),
    Gaussian(GaussianMeasure),
    Sampler(Arc<InitialSampler>),
}

impl std::fmt::Debug for InitialCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fixed(v) => f.debug_tuple("Fixed").field(v).finish(),
            Self::Gaussian(g) => f.debug_tuple("Gaussian").field(g).finish(),
            Self::Sampler(_) => f.write_str("Sampler(..)"),
        }
    }
}

enum Prepared<'a> {
    Fixed(&'a [f64]),
    Gaussian { mean: Vec<f64>, factor: Vec<f64>, dim: usize },
    Sampler(&'a InitialSampler),
}

impl InitialCondition {
    fn prepare(&self, dim: usize) -> Result<Prepared<'_>> {
        match self {
            Self::Fixed(v) => {
                if v.len() != dim {
                    return Err(Error::Dimension { what: "initial state", expected: dim, got: v.len() });
                }
                Ok(Prepared::Fixed(v))
            }
            Self::Gaussian(g) => {
                if g.dim() != dim {
                    return Err(Error::Dimension { what: "initial law", expected: dim, got: g.dim() });
                }
                // factor L = V sqrt(Lambda), so L L^T = cov even when singular
                let cov = validate_covariance(g.cov())?;
                let eig = SymmetricEigen::new(cov);
                let mut factor = vec![0.0; dim * dim];
                for i in 0..dim {
                    for j in 0..dim {
                        factor[i * dim + j] = eig.eigenvectors[(i, j)] * eig.eigenvalues[j].max(0.0).sqrt();
                    }
                }
                Ok(Prepared::Gaussian { mean: g.mean().iter().copied().collect(), factor, dim })
            }
            Self::Sampler(s) => Ok(Prepared::Sampler(s.as_ref())),
        }
    }
}

impl Prepared<'_> {
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            Prepared::Fixed(v) => out.copy_from_slice(v),
            Prepared::Gaussian { mean, factor, dim } => {
                let xi: Vec<f64> = (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..*dim {
                    out[i] = mean[i] + (0..*dim).map(|j| factor[i * dim + j] * xi[j]).sum::<f64>();
                }
            }
            Prepared::Sampler(s) => s(rng, out),
        }
    }
}

/// Draws the initial state of each particle from its own stream, as the
/// simulation engine does.
pub fn sample_initial(init: &InitialCondition, dim: usize, seed: u64, n: usize) -> Result<Snapshot> {
    let prepared = init.prepare(dim)?;
    let mut data = vec![0.0; n * dim];
    for (p, row) in data.chunks_exact_mut(dim).enumerate() {
        prepared.sample(&mut initial_stream(seed, p), row);
    }
    Snapshot::new(n, dim, data)
}

/// Runs every particle independently and folds its path into an
/// accumulator. `visit(acc, step, t, state)` sees the initial state at
/// step 0 and the state after every step. Accumulators come back in
/// particle order, so reductions over them are deterministic.
pub fn run_particles<M, A, I, V>(model: &M, init: &InitialCondition, cfg: &IntegratorConfig, make: I, visit: V) -> Result<Vec<A>>
where
    M: SdeModel,
    A: Send,
    I: Fn(usize) -> A + Sync,
    V: Fn(&mut A, usize, f64, &[f64]) + Sync,
{
    cfg.validate()?;
    let dim = model.dim();
    let k = model.noise_dim();
    let prepared = init.prepare(dim)?;
    let n_steps = cfg.n_steps();
    let dt = cfg.dt;
    let sqrt_dt = dt.sqrt();

    (0..cfg.n_particles)
        .into_par_iter()
        .map(|p| {
            let mut z = vec![0.0; dim];
            prepared.sample(&mut initial_stream(cfg.seed, p), &mut z);
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { particle: p, time: 0.0, step: 0 });
            }
            let mut acc = make(p);
            visit(&mut acc, 0, 0.0, &z);
            let mut rng = noise_stream(cfg.seed, p);
            let mut dw = vec![0.0; k];
            let mut work = vec![0.0; model.work_len()];
            for s in 1..=n_steps {
                let t = (s - 1) as f64 * dt;
                for w in dw.iter_mut() {
                    let xi: f64 = rng.sample(StandardNormal);
                    *w = sqrt_dt * xi;
                }
                model.em_step(t, dt, &mut z, &dw, &mut work);
                let t_new = s as f64 * dt;
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { particle: p, time: t_new, step: s });
                }
                visit(&mut acc, s, t_new, &z);
            }
            Ok(acc)
        })
        .collect()
}

/// Simulates an ensemble, recording every `cfg.record_every` steps and at the horizon.
pub fn simulate<M: SdeModel>(model: &M, init: &InitialCondition, cfg: &IntegratorConfig) -> Result<EnsembleTrajectory> {
    let n_steps = cfg.n_steps();
    let every = cfg.record_every;
    let recorded: Vec<usize> = (0..=n_steps).filter(|s| s % every == 0 || *s == n_steps).collect();
    let dim = model.dim();
    // (states, next recorded step) per particle; avoids a division per step
    let per_particle = run_particles(
        model,
        init,
        cfg,
        |_| (Vec::with_capacity(recorded.len() * dim), 0usize),
        |acc: &mut (Vec<f64>, usize), s, _, z| {
            if s == acc.1 {
                acc.0.extend_from_slice(z);
                acc.1 = if s + every > n_steps && s != n_steps { n_steps } else { s + every };
            }
        },
    )?;
    let n = cfg.n_particles;
    let states = (0..recorded.len())
        .map(|k| {
            let mut data = Vec::with_capacity(n * dim);
            for (path, _) in &per_particle {
                data.extend_from_slice(&path[k * dim..(k + 1) * dim]);
            }
            Snapshot::new(n, dim, data)
        })
        .collect::<Result<Vec<_>>>()?;
    let times = recorded.iter().map(|s| *s as f64 * cfg.dt).collect();
    EnsembleTrajectory::new(times, states, cfg.seed, STREAM_LAYOUT)
}

/// The full slow-fast system on `z = (x, y)`. Per step the increments are
/// laid out as `d` slow components (omitted when `alpha` is zero) followed
/// by `m` fast components (omitted when both `beta` and `alpha12` are zero).
pub struct FullSystem<'a> {
    sys: &'a SlowFastSystem,
    du: usize,
    dw: usize,
    inv_eps: f64,
    inv_sqrt_eps: f64,
    affine: Option<AffineStep>,
}

/// `z + (a z + b) dt + c dw` with the `eps` scalings folded in, used when
/// every drift is affine and every diffusion constant.
struct AffineStep {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl AffineStep {
    fn build(sys: &SlowFastSystem, du: usize, dw: usize) -> Option<Self> {
        let (d, m) = (sys.slow_dim(), sys.fast_dim());
        let n = d + m;
        let k = du + dw;
        let eps = sys.eps_or_one();
        let (fs, fo) = sys.slow_drift().affine_parts()?;
        let (gs, go) = sys.fast_drift().affine_parts()?;
        let alpha = sys.slow_diffusion().constant_value()?;
        let beta = sys.fast_diffusion().constant_value()?;
        let alpha12 = match sys.cross_diffusion() {
            Some(c) => Some(c.constant_value()?),
            None => None,
        };
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        for j in 0..n {
            for i in 0..d {
                a[i * n + j] = fs[(i, j)];
            }
            for i in 0..m {
                a[(d + i) * n + j] = gs[(i, j)] / eps;
            }
        }
        for i in 0..d {
            b[i] = fo[i];
        }
        for i in 0..m {
            b[d + i] = go[i] / eps;
        }
        let mut c = vec![0.0; n * k];
        for i in 0..d {
            for j in 0..du {
                c[i * k + j] = alpha[(i, j)];
            }
            if let Some(a12) = &alpha12 {
                for j in 0..dw {
                    c[i * k + du + j] = a12[(i, j)];
                }
            }
        }
        for i in 0..m {
            for j in 0..dw {
                c[(d + i) * k + du + j] = beta[(i, j)] / eps.sqrt();
            }
        }
        Some(Self { a, b, c })
    }

    #[inline(always)]
    fn step(&self, dt: f64, z: &mut [f64], dw: &[f64], work: &mut [f64]) {
        let n = z.len();
        let k = dw.len();
        // unrolled planar cases carry the heavy ensembles
        if n == 2 && k <= 2 {
            let (a, b, c) = (&self.a[..4], &self.b[..2], &self.c[..2 * k]);
            let (x, y) = (z[0], z[1]);
            let mut nx = (b[0] + a[0] * x + a[1] * y) * dt;
            let mut ny = (b[1] + a[2] * x + a[3] * y) * dt;
            if k == 1 {
                nx += c[0] * dw[0];
                ny += c[1] * dw[0];
            } else if k == 2 {
                nx += c[0] * dw[0] + c[1] * dw[1];
                ny += c[2] * dw[0] + c[3] * dw[1];
            }
            z[0] = x + nx;
            z[1] = y + ny;
            return;
        }
        let next = &mut work[..n];
        for i in 0..n {
            let drift = self.b[i] + self.a[i * n..(i + 1) * n].iter().zip(&z[..n]).map(|(a, v)| a * v).sum::<f64>();
            let noise: f64 = self.c[i * k..(i + 1) * k].iter().zip(&dw[..k]).map(|(c, w)| c * w).sum();
            next[i] = z[i] + drift * dt + noise;
        }
        z[..n].copy_from_slice(next);
    }
}

impl<'a> FullSystem<'a> {
    pub fn new(sys: &'a SlowFastSystem) -> Self {
        let eps = sys.eps_or_one();
        let (du, dw) = (sys.slow_noise_dim(), sys.fast_noise_dim());
        let affine = AffineStep::build(sys, du, dw);
        Self { sys, du, dw, inv_eps: 1.0 / eps, inv_sqrt_eps: 1.0 / eps.sqrt(), affine }
    }
}

impl SdeModel for FullSystem<'_> {
    fn dim(&self) -> usize {
        self.sys.slow_dim() + self.sys.fast_dim()
    }

    fn noise_dim(&self) -> usize {
        self.du + self.dw
    }

    fn work_len(&self) -> usize {
        let (d, m) = (self.sys.slow_dim(), self.sys.fast_dim());
        2 * (d + m) + d.max(m) * d.max(m)
    }

    #[inline(always)]
    fn em_step(&self, t: f64, dt: f64, z: &mut [f64], dw: &[f64], work: &mut [f64]) {
        match &self.affine {
            Some(affine) => affine.step(dt, z, dw, work),
            None => self.general_step(t, dt, z, dw, work),
        }
    }
}

impl FullSystem<'_> {
    #[inline(never)]
    fn general_step(&self, t: f64, dt: f64, z: &mut [f64], dw: &[f64], work: &mut [f64]) {
        let (d, m) = (self.sys.slow_dim(), self.sys.fast_dim());
        let (drift, rest) = work.split_at_mut(d + m);
        let (inc, scratch) = rest.split_at_mut(d + m);
        {
            let (x, y) = z.split_at(d);
            let (fx, gy) = drift.split_at_mut(d);
            self.sys.slow_drift().eval_into(t, x, y, fx);
            self.sys.fast_drift().eval_into(t, x, y, gy);
            inc.iter_mut().for_each(|v| *v = 0.0);
            let (ix, iy) = inc.split_at_mut(d);
            let (du, dwf) = dw.split_at(self.du);
            if self.du > 0 {
                self.sys.slow_diffusion().apply_add(t, x, y, du, 1.0, ix, scratch);
            }
            if self.dw > 0 {
                if let Some(a12) = self.sys.cross_diffusion() {
                    a12.apply_add(t, x, y, dwf, 1.0, ix, scratch);
                }
                self.sys.fast_diffusion().apply_add(t, x, y, dwf, self.inv_sqrt_eps, iy, scratch);
            }
        }
        for i in 0..d {
            z[i] += drift[i] * dt + inc[i];
        }
        for i in d..d + m {
            z[i] += drift[i] * self.inv_eps * dt + inc[i];
        }
    }
}

/// The frozen fast process `dY = g(x, Y) dt + beta(x, Y) dW` at fixed `x`.
/// No scale parameter enters: the frozen process is defined at unit speed.
pub struct FrozenSystem<'a> {
    sys: &'a SlowFastSystem,
    x: Vec<f64>,
    noisy: bool,
}

impl<'a> FrozenSystem<'a> {
    pub fn new(sys: &'a SlowFastSystem, x: &[f64]) -> Result<Self> {
        if x.len() != sys.slow_dim() {
            return Err(Error::Dimension { what: "frozen slow state", expected: sys.slow_dim(), got: x.len() });
        }
        Ok(Self { sys, x: x.to_vec(), noisy: !sys.fast_diffusion().is_zero() })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }
}

impl SdeModel for FrozenSystem<'_> {
    fn dim(&self) -> usize {
        self.sys.fast_dim()
    }

    fn noise_dim(&self) -> usize {
        if self.noisy {
            self.sys.fast_dim()
        } else {
            0
        }
    }

    fn work_len(&self) -> usize {
        let m = self.sys.fast_dim();
        2 * m + m * m
    }

    #[inline]
    fn em_step(&self, t: f64, dt: f64, z: &mut [f64], dw: &[f64], work: &mut [f64]) {
        let m = self.sys.fast_dim();
        let (drift, rest) = work.split_at_mut(m);
        let (inc, scratch) = rest.split_at_mut(m);
        self.sys.fast_drift().eval_into(t, &self.x, z, drift);
        inc.iter_mut().for_each(|v| *v = 0.0);
        if self.noisy {
            self.sys.fast_diffusion().apply_add(t, &self.x, z, dw, 1.0, inc, scratch);
        }
        for i in 0..m {
            z[i] += drift[i] * dt + inc[i];
        }
    }
}

/// Euler-Maruyama ensemble of the full system (`eps` scaling applied to the fast channel).
pub fn simulate_full(system: &SlowFastSystem, init: &InitialCondition, cfg: &IntegratorConfig) -> Result<EnsembleTrajectory> {
    simulate(&FullSystem::new(system), init, cfg)
}

/// Euler-Maruyama ensemble of the frozen fast process at slow state `x`.
pub fn simulate_frozen(
    system: &SlowFastSystem,
    x: &[f64],
    init_y: &InitialCondition,
    cfg: &IntegratorConfig,
) -> Result<EnsembleTrajectory> {
    simulate(&FrozenSystem::new(system, x)?, init_y, cfg)
}

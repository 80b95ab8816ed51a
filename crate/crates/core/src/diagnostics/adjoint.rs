//! Divergence-form Fokker-Planck adjoint on uniform grids.
//!
//! All stencils are centered and second order, applied to products of
//! coefficients with the density. The outermost ring of nodes has no
//! stencil; it is left at zero and excluded from every norm.

use crate::coarse_grain::ReducedModel;
use crate::error::{invalid, Error, Result};
use crate::model::{Density1D, GridDensity2D, SlowFastSystem, UniformGrid};

/// Smallest number of nodes per direction accepted by the stencils.
pub const MIN_NODES: usize = 9;
/// Boundary-to-peak density ratio above which a report carries a warning.
pub const BOUNDARY_DECAY: f64 = 1e-10;
/// Decay ratios (coarse / fine) accepted as second order.
pub const SECOND_ORDER_RANGE: (f64, f64) = (3.4, 4.6);
/// A residual counts as non-decaying when the fine norm is at least this
/// fraction of the coarse norm.
pub const NON_DECAY_FRACTION: f64 = 0.5;

/// Sup and discrete L2 norms over interior nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub sup: f64,
    pub l2: f64,
}

/// A scalar field on a 2-D grid, stored `values[ix * ny + iy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField2D {
    pub x: UniformGrid,
    pub y: UniformGrid,
    pub values: Vec<f64>,
}

impl GridField2D {
    fn zeros(x: UniformGrid, y: UniformGrid) -> Self {
        Self { x, y, values: vec![0.0; x.len() * y.len()] }
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.y.len() + iy]
    }

    /// Norms over nodes with a full stencil.
    pub fn interior_norms(&self) -> Norms {
        let (nx, ny) = (self.x.len(), self.y.len());
        let (mut sup, mut sq) = (0.0f64, 0.0);
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let v = self.value(i, j);
                sup = sup.max(v.abs());
                sq += v * v;
            }
        }
        Norms { sup, l2: (sq * self.x.step() * self.y.step()).sqrt() }
    }

    /// Pointwise sum of two fields on the same grid.
    pub fn add(&self, other: &Self) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Self { x: self.x, y: self.y, values }
    }
}

/// The three parts of the adjoint applied to a density: slow, cross and fast.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointParts {
    pub slow: GridField2D,
    pub cross: GridField2D,
    pub fast: GridField2D,
}

impl AdjointParts {
    pub fn total(&self) -> GridField2D {
        self.slow.add(&self.cross).add(&self.fast)
    }
}

/// Coefficient-density products on every node.
struct Products {
    f: Vec<f64>,
    g: Vec<f64>,
    a11: Vec<f64>,
    a12: Vec<f64>,
    a22: Vec<f64>,
}

fn planar_products(rho: &GridDensity2D, system: &SlowFastSystem) -> Result<Products> {
    if system.slow_dim() != 1 || system.fast_dim() != 1 {
        return invalid("grid adjoint needs scalar slow and fast variables");
    }
    let (xg, yg) = (rho.x_grid(), rho.y_grid());
    if xg.len() < MIN_NODES || yg.len() < MIN_NODES {
        return Err(Error::GridTooCoarse { nx: xg.len(), ny: yg.len() });
    }
    let n = xg.len() * yg.len();
    let mut p = Products { f: vec![0.0; n], g: vec![0.0; n], a11: vec![0.0; n], a12: vec![0.0; n], a22: vec![0.0; n] };
    for i in 0..xg.len() {
        for j in 0..yg.len() {
            let (x, y) = ([xg.point(i)], [yg.point(j)]);
            let k = i * yg.len() + j;
            let nu = rho.values()[k];
            let (f, g) = system.full_drift(&x, &y);
            let (a11, a12, a22) = system.generator_diffusion(&x, &y);
            p.f[k] = f[0] * nu;
            p.g[k] = g[0] * nu;
            p.a11[k] = a11[(0, 0)] * nu;
            p.a12[k] = a12[(0, 0)] * nu;
            p.a22[k] = a22[(0, 0)] * nu;
        }
    }
    Ok(p)
}

struct Stencil {
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Stencil {
    fn dx(&self, u: &[f64], k: usize) -> f64 {
        (u[k + self.ny] - u[k - self.ny]) / (2.0 * self.hx)
    }
    fn dy(&self, u: &[f64], k: usize) -> f64 {
        (u[k + 1] - u[k - 1]) / (2.0 * self.hy)
    }
    fn dxx(&self, u: &[f64], k: usize) -> f64 {
        (u[k + self.ny] - 2.0 * u[k] + u[k - self.ny]) / (self.hx * self.hx)
    }
    fn dyy(&self, u: &[f64], k: usize) -> f64 {
        (u[k + 1] - 2.0 * u[k] + u[k - 1]) / (self.hy * self.hy)
    }
    fn dxy(&self, u: &[f64], k: usize) -> f64 {
        let ny = self.ny;
        (u[k + ny + 1] - u[k + ny - 1] - u[k - ny + 1] + u[k - ny - 1]) / (4.0 * self.hx * self.hy)
    }
}

fn interior(rho: &GridDensity2D) -> (Stencil, impl Iterator<Item = usize>) {
    let (xg, yg) = (*rho.x_grid(), *rho.y_grid());
    let ny = yg.len();
    let s = Stencil { ny, hx: xg.step(), hy: yg.step() };
    let it = (1..xg.len() - 1).flat_map(move |i| (1..ny - 1).map(move |j| i * ny + j));
    (s, it)
}

/// Slow, cross and fast parts of the adjoint applied to `rho`:
///
/// ```text
/// slow  = -d_x(f rho) + d_xx(A11 rho)
/// cross = 2 d_xy(A12 rho)
/// fast  = -d_y(g rho / eps) + d_yy(A22 rho)
/// ```
///
/// with `A = sigma sigma^T / 2` including the time-scale factors.
pub fn fp_adjoint_parts(rho: &GridDensity2D, system: &SlowFastSystem) -> Result<AdjointParts> {
    let p = planar_products(rho, system)?;
    let (xg, yg) = (*rho.x_grid(), *rho.y_grid());
    let mut parts = AdjointParts { slow: GridField2D::zeros(xg, yg), cross: GridField2D::zeros(xg, yg), fast: GridField2D::zeros(xg, yg) };
    let (s, nodes) = interior(rho);
    for k in nodes {
        parts.slow.values[k] = -s.dx(&p.f, k) + s.dxx(&p.a11, k);
        parts.cross.values[k] = 2.0 * s.dxy(&p.a12, k);
        parts.fast.values[k] = -s.dy(&p.g, k) + s.dyy(&p.a22, k);
    }
    Ok(parts)
}

/// The full adjoint applied to `rho` in a single stencil pass.
pub fn fp_adjoint(rho: &GridDensity2D, system: &SlowFastSystem) -> Result<GridField2D> {
    let p = planar_products(rho, system)?;
    let mut out = GridField2D::zeros(*rho.x_grid(), *rho.y_grid());
    let (s, nodes) = interior(rho);
    let ny = s.ny;
    for k in nodes {
        // flux differences gathered per neighbour
        let c = -2.0 * p.a11[k] / (s.hx * s.hx) - 2.0 * p.a22[k] / (s.hy * s.hy);
        let east = -p.f[k + ny] / (2.0 * s.hx) + p.a11[k + ny] / (s.hx * s.hx);
        let west = p.f[k - ny] / (2.0 * s.hx) + p.a11[k - ny] / (s.hx * s.hx);
        let north = -p.g[k + 1] / (2.0 * s.hy) + p.a22[k + 1] / (s.hy * s.hy);
        let south = p.g[k - 1] / (2.0 * s.hy) + p.a22[k - 1] / (s.hy * s.hy);
        let diag = (p.a12[k + ny + 1] - p.a12[k + ny - 1] - p.a12[k - ny + 1] + p.a12[k - ny - 1]) / (2.0 * s.hx * s.hy);
        out.values[k] = c + east + west + north + south + diag;
    }
    Ok(out)
}

/// Largest density value on the outer ring relative to the peak, when it
/// exceeds [`BOUNDARY_DECAY`].
fn boundary_warning(values: &[f64], nx: usize, ny: usize) -> Option<String> {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut edge = 0.0f64;
    for i in 0..nx {
        for j in 0..ny {
            if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                edge = edge.max(values[i * ny + j]);
            }
        }
    }
    (peak > 0.0 && edge > BOUNDARY_DECAY * peak)
        .then(|| format!("density at the window boundary is {:.3e} of its peak", edge / peak))
}

/// Residual norms at one grid resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop41Norms {
    pub h_x: f64,
    pub h_y: f64,
    /// Slow plus cross parts.
    pub slow_cross: Norms,
    pub fast: Norms,
    pub full: Norms,
}

/// Convergence evidence for one residual between two resolutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decay {
    /// Coarse sup norm over fine sup norm.
    pub ratio: f64,
    pub second_order: bool,
    pub non_decaying: bool,
}

impl Decay {
    pub fn between(coarse: f64, fine: f64) -> Self {
        let ratio = coarse / fine;
        Self {
            ratio,
            second_order: ratio >= SECOND_ORDER_RANGE.0 && ratio <= SECOND_ORDER_RANGE.1,
            non_decaying: fine >= NON_DECAY_FRACTION * coarse,
        }
    }
}

/// Whether the frozen fast law matches the equilibrium conditional law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prop41Verdict {
    Coincide,
    DoNotCoincide,
}

impl Prop41Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Coincide => "coincide",
            Self::DoNotCoincide => "do not coincide",
        }
    }
}

/// Outcome of checking `L'_x rho + L'_xy rho = 0` and `L'_y rho = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prop41Report {
    pub x_window: (f64, f64),
    pub y_window: (f64, f64),
    pub tol: f64,
    pub fine: Prop41Norms,
    pub coarse: Prop41Norms,
    pub slow_cross_decay: Decay,
    pub fast_decay: Decay,
    pub full_decay: Decay,
    /// Smallest x-marginal over interior columns.
    pub min_marginal: f64,
    pub verdict: Prop41Verdict,
    pub warning: Option<String>,
}

fn prop41_norms(rho: &GridDensity2D, system: &SlowFastSystem) -> Result<Prop41Norms> {
    let parts = fp_adjoint_parts(rho, system)?;
    Ok(Prop41Norms {
        h_x: rho.x_grid().step(),
        h_y: rho.y_grid().step(),
        slow_cross: parts.slow.add(&parts.cross).interior_norms(),
        fast: parts.fast.interior_norms(),
        full: parts.total().interior_norms(),
    })
}

/// Evaluates both residuals of the coincidence criterion on the given grid
/// and on the grid of every other node. The verdict is "coincide" when both
/// fine-grid sup norms are at most `tol`.
pub fn check_prop41(rho: &GridDensity2D, system: &SlowFastSystem, tol: f64) -> Result<Prop41Report> {
    let (xg, yg) = (*rho.x_grid(), *rho.y_grid());
    let marginal = rho.marginal_x();
    let min_marginal = marginal.values()[1..xg.len() - 1].iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if !(min_marginal > 0.0) {
        let i = (1..xg.len() - 1).find(|&i| !(marginal.values()[i] > 0.0)).unwrap_or(1);
        return Err(Error::VanishingMarginal { x: xg.point(i), marginal: marginal.values()[i] });
    }
    let fine = prop41_norms(rho, system)?;
    let coarse = prop41_norms(&rho.coarsened()?, system)?;
    let verdict = if fine.slow_cross.sup <= tol && fine.fast.sup <= tol {
        Prop41Verdict::Coincide
    } else {
        Prop41Verdict::DoNotCoincide
    };
    Ok(Prop41Report {
        x_window: (xg.start(), xg.end()),
        y_window: (yg.start(), yg.end()),
        tol,
        slow_cross_decay: Decay::between(coarse.slow_cross.sup, fine.slow_cross.sup),
        fast_decay: Decay::between(coarse.fast.sup, fine.fast.sup),
        full_decay: Decay::between(coarse.full.sup, fine.full.sup),
        fine,
        coarse,
        min_marginal,
        verdict,
        warning: boundary_warning(rho.values(), xg.len(), yg.len()),
    })
}

/// Stationarity residual of a 1-D density under a scalar reduced model.
#[derive(Debug, Clone, PartialEq)]
pub struct SolvabilityReport {
    pub h: f64,
    pub fine: Norms,
    pub coarse: Norms,
    pub decay: Decay,
    pub warning: Option<String>,
}

impl SolvabilityReport {
    pub fn stationary_at(&self, tol: f64) -> bool {
        self.fine.sup <= tol
    }
}

/// `-d_x(b rho) + d_xx(a rho)` with `a = sigma^2 / 2`, on interior nodes.
pub fn adjoint_1d(rho: &Density1D, model: &ReducedModel, t: f64) -> Result<Vec<f64>> {
    if model.dim() != 1 {
        return invalid("1-D adjoint needs a scalar reduced model");
    }
    let g = *rho.grid();
    if g.len() < MIN_NODES {
        return Err(Error::GridTooCoarse { nx: g.len(), ny: 1 });
    }
    let mut bf = Vec::with_capacity(g.len());
    let mut af = Vec::with_capacity(g.len());
    for (i, nu) in rho.values().iter().enumerate() {
        let x = [g.point(i)];
        bf.push(model.drift(t, &x)?[0] * nu);
        let s = model.diffusion(t, &x)?[(0, 0)];
        af.push(0.5 * s * s * nu);
    }
    let h = g.step();
    let mut r = vec![0.0; g.len()];
    for i in 1..g.len() - 1 {
        r[i] = -(bf[i + 1] - bf[i - 1]) / (2.0 * h) + (af[i + 1] - 2.0 * af[i] + af[i - 1]) / (h * h);
    }
    Ok(r)
}

fn norms_1d(r: &[f64], h: f64) -> Norms {
    let inner = &r[1..r.len() - 1];
    Norms {
        sup: inner.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        l2: (inner.iter().map(|v| v * v).sum::<f64>() * h).sqrt(),
    }
}

/// Checks that `rho` is stationary for the reduced dynamics at time `t`,
/// at the given resolution and on every other node.
pub fn check_solvability(rho: &Density1D, model: &ReducedModel, t: f64) -> Result<SolvabilityReport> {
    let g = *rho.grid();
    let cg = g.coarsened()?;
    let coarse_rho = Density1D::new(cg, rho.values().iter().step_by(2).copied().collect())?;
    let fine = norms_1d(&adjoint_1d(rho, model, t)?, g.step());
    let coarse = norms_1d(&adjoint_1d(&coarse_rho, model, t)?, cg.step());
    let peak = rho.values().iter().fold(0.0f64, |m, v| m.max(*v));
    let edge = rho.values()[0].max(rho.values()[g.len() - 1]);
    let warning = (peak > 0.0 && edge > BOUNDARY_DECAY * peak)
        .then(|| format!("density at the window boundary is {:.3e} of its peak", edge / peak));
    Ok(SolvabilityReport { h: g.step(), fine, coarse, decay: Decay::between(coarse.sup, fine.sup), warning })
}

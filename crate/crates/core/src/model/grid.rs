//! Densities on uniform grids with trapezoid quadrature.

use crate::error::{invalid, Error, Result};

/// Uniform grid `start, start + step, ..., start + (n-1) step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    start: f64,
    step: f64,
    n: usize,
}

impl UniformGrid {
    /// `n` equally spaced points from `start` to `end` inclusive.
    pub fn new(start: f64, end: f64, n: usize) -> Result<Self> {
        if n < 2 || !(end > start) || !start.is_finite() || !end.is_finite() {
            return invalid(format!("grid needs n >= 2 and start < end, got [{start}, {end}] with n = {n}"));
        }
        Ok(Self { start, step: (end - start) / (n - 1) as f64, n })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.point(self.n - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Index of the grid point closest to `x` (clamped to the grid).
    pub fn nearest(&self, x: f64) -> usize {
        let r = ((x - self.start) / self.step).round();
        r.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Every other point, keeping both endpoints when `n` is odd.
    pub fn coarsened(&self) -> Result<Self> {
        if self.n.is_multiple_of(2) {
            return invalid("coarsening needs an odd number of grid points");
        }
        Ok(Self { start: self.start, step: 2.0 * self.step, n: self.n.div_ceil(2) })
    }

    /// Trapezoid rule over the grid.
    pub fn trapz(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let inner: f64 = values[1..self.n - 1].iter().sum();
        self.step * (inner + 0.5 * (values[0] + values[self.n - 1]))
    }
}

/// A density on a 1-D uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1D {
    grid: UniformGrid,
    values: Vec<f64>,
}

impl Density1D {
    pub fn new(grid: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension { what: "density values", expected: grid.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("density values must be finite and non-negative");
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.trapz(&self.values)
    }

    pub fn normalize(&self) -> Result<Self> {
        let mass = self.mass();
        if !(mass > 0.0) {
            return Err(Error::DegenerateDensity { mass });
        }
        Ok(Self { grid: self.grid, values: self.values.iter().map(|v| v / mass).collect() })
    }

    /// Value at the grid point nearest `x`.
    pub fn at(&self, x: f64) -> f64 {
        self.values[self.grid.nearest(x)]
    }

    /// Trapezoid expectation of `h` (density assumed normalized).
    pub fn expect(&self, h: impl Fn(f64) -> f64) -> f64 {
        let w: Vec<f64> = self.values.iter().enumerate().map(|(i, v)| v * h(self.grid.point(i))).collect();
        self.grid.trapz(&w)
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }
}

/// A density on a rectangular `(x, y)` grid, stored `values[ix * ny + iy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity2D {
    x: UniformGrid,
    y: UniformGrid,
    values: Vec<f64>,
}

impl GridDensity2D {
    pub fn new(x: UniformGrid, y: UniformGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != x.len() * y.len() {
            return Err(Error::Dimension { what: "grid density values", expected: x.len() * y.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("density values must be finite and non-negative");
        }
        Ok(Self { x, y, values })
    }

    pub fn from_fn(x: UniformGrid, y: UniformGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(x.len() * y.len());
        for i in 0..x.len() {
            for j in 0..y.len() {
                values.push(f(x.point(i), y.point(j)));
            }
        }
        Self::new(x, y, values)
    }

    pub fn x_grid(&self) -> &UniformGrid {
        &self.x
    }

    pub fn y_grid(&self) -> &UniformGrid {
        &self.y
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix * self.y.len() + iy]
    }

    /// Column `x = x_i` as a function of `y`.
    pub fn column(&self, ix: usize) -> &[f64] {
        let ny = self.y.len();
        &self.values[ix * ny..(ix + 1) * ny]
    }

    /// Trapezoid-rule total mass.
    pub fn mass(&self) -> f64 {
        let cols: Vec<f64> = (0..self.x.len()).map(|i| self.y.trapz(self.column(i))).collect();
        self.x.trapz(&cols)
    }

    /// Rescales to unit trapezoid mass.
    pub fn normalize_density(&self) -> Result<Self> {
        let mass = self.mass();
        if !(mass > 0.0) {
            return Err(Error::DegenerateDensity { mass });
        }
        Ok(Self { x: self.x, y: self.y, values: self.values.iter().map(|v| v / mass).collect() })
    }

    /// The same density restricted to every other grid node in each direction.
    pub fn coarsened(&self) -> Result<Self> {
        let (x, y) = (self.x.coarsened()?, self.y.coarsened()?);
        let mut values = Vec::with_capacity(x.len() * y.len());
        for i in 0..x.len() {
            for j in 0..y.len() {
                values.push(self.value(2 * i, 2 * j));
            }
        }
        Ok(Self { x, y, values })
    }

    /// x-marginal by trapezoid integration over `y` in each column.
    pub fn marginal_x(&self) -> Density1D {
        let values = (0..self.x.len()).map(|i| self.y.trapz(self.column(i))).collect();
        Density1D { grid: self.x, values }
    }

    /// `rho(y | x) = rho(x, y) / rho_bar(x)` at the grid column nearest `x`.
    pub fn conditional_y_given_x(&self, x: f64) -> Result<Density1D> {
        let ix = self.x.nearest(x);
        let col = self.column(ix);
        let marginal = self.y.trapz(col);
        if !(marginal >= 1e-12) {
            return Err(Error::VanishingMarginal { x: self.x.point(ix), marginal });
        }
        Ok(Density1D { grid: self.y, values: col.iter().map(|v| v / marginal).collect() })
    }
}

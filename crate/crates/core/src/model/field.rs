//! Coefficient fields `(t, x, y) -> R^{rows x cols}`.
//!
//! Zero, constant and affine fields are evaluated inline without dynamic
//! dispatch; everything else goes through a shared closure. Matrix values
//! are laid out row-major.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Signature of a general coefficient closure: `(t, x, y, out)`.
pub type FieldFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
enum FieldKind {
    Zero,
    Constant(Vec<f64>),
    /// Vector-valued `slope * [x; y] + offset`, slope row-major `rows x (x_dim + y_dim)`.
    Affine { slope: Vec<f64>, offset: Vec<f64> },
    Function(Arc<FieldFn>),
}

/// A vector- or matrix-valued coefficient with declared shape and arity.
#[derive(Clone)]
pub struct CoefficientField {
    rows: usize,
    cols: usize,
    x_dim: usize,
    y_dim: usize,
    time_dependent: bool,
    y_dependent: bool,
    kind: FieldKind,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            FieldKind::Zero => "zero",
            FieldKind::Constant(_) => "constant",
            FieldKind::Affine { .. } => "affine",
            FieldKind::Function(_) => "function",
        };
        f.debug_struct("CoefficientField")
            .field("shape", &(self.rows, self.cols))
            .field("inputs", &(self.x_dim, self.y_dim))
            .field("time_dependent", &self.time_dependent)
            .field("y_dependent", &self.y_dependent)
            .field("kind", &kind)
            .finish()
    }
}

impl CoefficientField {
    pub fn zero(rows: usize, cols: usize, x_dim: usize, y_dim: usize) -> Self {
        Self {
            rows,
            cols,
            x_dim,
            y_dim,
            time_dependent: false,
            y_dependent: false,
            kind: FieldKind::Zero,
        }
    }

    pub fn constant(value: &DMatrix<f64>, x_dim: usize, y_dim: usize) -> Self {
        let (rows, cols) = value.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(value[(i, j)]);
            }
        }
        Self {
            rows,
            cols,
            x_dim,
            y_dim,
            time_dependent: false,
            y_dependent: false,
            kind: FieldKind::Constant(data),
        }
    }

    /// Constant scalar `c` times the `n x n` identity.
    pub fn scaled_identity(n: usize, c: f64, x_dim: usize, y_dim: usize) -> Self {
        Self::constant(&(DMatrix::identity(n, n) * c), x_dim, y_dim)
    }

    /// Vector field `slope * [x; y] + offset`.
    pub fn affine(slope: &DMatrix<f64>, offset: &DVector<f64>, x_dim: usize) -> Result<Self> {
        let (rows, cols) = slope.shape();
        if offset.len() != rows {
            return Err(Error::Dimension {
                what: "affine offset",
                expected: rows,
                got: offset.len(),
            });
        }
        if cols < x_dim {
            return Err(Error::Dimension {
                what: "affine slope columns",
                expected: x_dim,
                got: cols,
            });
        }
        let y_dim = cols - x_dim;
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(slope[(i, j)]);
            }
        }
        let y_dependent = (0..rows).any(|i| (x_dim..cols).any(|j| slope[(i, j)] != 0.0));
        Ok(Self {
            rows,
            cols: 1,
            x_dim,
            y_dim,
            time_dependent: false,
            y_dependent,
            kind: FieldKind::Affine {
                slope: data,
                offset: offset.iter().copied().collect(),
            },
        })
    }

    /// General closure-backed field. Arity flags default to
    /// time-independent and y-dependent; adjust with the builder methods.
    pub fn function<F>(rows: usize, cols: usize, x_dim: usize, y_dim: usize, f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            rows,
            cols,
            x_dim,
            y_dim,
            time_dependent: false,
            y_dependent: y_dim > 0,
            kind: FieldKind::Function(Arc::new(f)),
        }
    }

    pub fn time_dependent(mut self, yes: bool) -> Self {
        self.time_dependent = yes;
        self
    }

    pub fn y_dependent(mut self, yes: bool) -> Self {
        self.y_dependent = yes;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    pub fn y_dim(&self) -> usize {
        self.y_dim
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn is_y_dependent(&self) -> bool {
        self.y_dependent
    }

    /// True when the field is structurally zero (not merely zero-valued).
    pub fn is_zero(&self) -> bool {
        matches!(self.kind, FieldKind::Zero)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, FieldKind::Zero | FieldKind::Constant(_))
    }

    /// Constant value, if the field is structurally constant.
    pub fn constant_value(&self) -> Option<DMatrix<f64>> {
        match &self.kind {
            FieldKind::Zero => Some(DMatrix::zeros(self.rows, self.cols)),
            FieldKind::Constant(v) => Some(DMatrix::from_row_slice(self.rows, self.cols, v)),
            _ => None,
        }
    }

    /// `(slope, offset)` when the field is affine in `[x; y]` (constants
    /// and zeros included, as vector fields).
    pub fn affine_parts(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let n_in = self.x_dim + self.y_dim;
        match &self.kind {
            FieldKind::Zero if self.cols == 1 => {
                Some((DMatrix::zeros(self.rows, n_in), DVector::zeros(self.rows)))
            }
            FieldKind::Constant(v) if self.cols == 1 => Some((
                DMatrix::zeros(self.rows, n_in),
                DVector::from_column_slice(v),
            )),
            FieldKind::Affine { slope, offset } => Some((
                DMatrix::from_row_slice(self.rows, n_in, slope),
                DVector::from_column_slice(offset),
            )),
            _ => None,
        }
    }

    /// Evaluate into `out` (length `rows * cols`, row-major).
    #[inline]
    pub fn eval_into(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.rows * self.cols);
        match &self.kind {
            FieldKind::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            FieldKind::Constant(v) => out.copy_from_slice(v),
            FieldKind::Affine { slope, offset } => {
                let n_in = self.x_dim + self.y_dim;
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &slope[i * n_in..(i + 1) * n_in];
                    let mut acc = offset[i];
                    for (a, xv) in row[..self.x_dim].iter().zip(x) {
                        acc += a * xv;
                    }
                    for (a, yv) in row[self.x_dim..].iter().zip(y) {
                        acc += a * yv;
                    }
                    *o = acc;
                }
            }
            FieldKind::Function(f) => f(t, x, y, out),
        }
    }

    /// Evaluate as a matrix (vectors come back as a single column).
    pub fn eval(&self, t: f64, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let mut buf = vec![0.0; self.len()];
        self.eval_into(t, x, y, &mut buf);
        DMatrix::from_row_slice(self.rows, self.cols, &buf)
    }

    /// Evaluate a vector field.
    pub fn eval_vector(&self, t: f64, x: &[f64], y: &[f64]) -> DVector<f64> {
        let mut buf = vec![0.0; self.len()];
        self.eval_into(t, x, y, &mut buf);
        DVector::from_vec(buf)
    }

    /// `out += scale * M(t, x, y) * dw` for a matrix field `M`.
    ///
    /// `scratch` must hold at least `rows * cols` values; it is only touched
    /// for closure-backed fields.
    #[inline]
    pub fn apply_add(
        &self,
        t: f64,
        x: &[f64],
        y: &[f64],
        dw: &[f64],
        scale: f64,
        out: &mut [f64],
        scratch: &mut [f64],
    ) {
        let m: &[f64] = match &self.kind {
            FieldKind::Zero => return,
            FieldKind::Constant(v) => v,
            FieldKind::Affine { .. } | FieldKind::Function(_) => {
                let buf = &mut scratch[..self.rows * self.cols];
                self.eval_into(t, x, y, buf);
                buf
            }
        };
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            let row = &m[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (a, w) in row.iter().zip(dw) {
                acc += a * w;
            }
            *o += scale * acc;
        }
    }

    /// `out += M M^T` evaluated at `(t, x, y)`; `out` is `rows x rows` row-major.
    pub fn add_outer_into(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        let m: &[f64] = match &self.kind {
            FieldKind::Zero => return,
            FieldKind::Constant(v) => v,
            _ => {
                let buf = &mut scratch[..self.rows * self.cols];
                self.eval_into(t, x, y, buf);
                buf
            }
        };
        let (r, c) = (self.rows, self.cols);
        for i in 0..r {
            for j in 0..r {
                let mut acc = 0.0;
                for k in 0..c {
                    acc += m[i * c + k] * m[j * c + k];
                }
                out[i * r + j] += acc;
            }
        }
    }
}

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::model::field::CoefficientField;

/// A slow-fast system
///
/// ```text
/// dX = f(X,Y) dt + alpha(X,Y) dU + alpha12(X,Y) dW
/// dY = g(X,Y)/eps dt + beta(X,Y)/sqrt(eps) dW
/// ```
///
/// with `X` in `R^d`, `Y` in `R^m` and independent Brownian motions `U`, `W`.
/// Without a scale parameter the system is read with `eps = 1`.
#[derive(Debug, Clone)]
pub struct SlowFastSystem {
    d: usize,
    m: usize,
    f: CoefficientField,
    g: CoefficientField,
    alpha: CoefficientField,
    beta: CoefficientField,
    alpha12: Option<CoefficientField>,
    eps: Option<f64>,
}

fn check_shape(field: &CoefficientField, what: &'static str, rows: usize, cols: usize, d: usize, m: usize) -> Result<()> {
    if field.rows() != rows {
        return Err(Error::Dimension { what, expected: rows, got: field.rows() });
    }
    if field.cols() != cols {
        return Err(Error::Dimension { what, expected: cols, got: field.cols() });
    }
    if field.x_dim() != d {
        return Err(Error::Dimension { what, expected: d, got: field.x_dim() });
    }
    if field.y_dim() != m {
        return Err(Error::Dimension { what, expected: m, got: field.y_dim() });
    }
    Ok(())
}

impl SlowFastSystem {
    pub fn new(
        f: CoefficientField,
        g: CoefficientField,
        alpha: CoefficientField,
        beta: CoefficientField,
    ) -> Result<Self> {
        let d = f.rows();
        let m = g.rows();
        if d == 0 || m == 0 {
            return invalid("slow and fast dimensions must be at least 1");
        }
        check_shape(&f, "slow drift", d, 1, d, m)?;
        check_shape(&g, "fast drift", m, 1, d, m)?;
        check_shape(&alpha, "slow diffusion", d, d, d, m)?;
        check_shape(&beta, "fast diffusion", m, m, d, m)?;
        Ok(Self { d, m, f, g, alpha, beta, alpha12: None, eps: None })
    }

    /// Adds a cross-diffusion `alpha12` driving the slow variable with the fast noise.
    pub fn with_cross_diffusion(mut self, alpha12: CoefficientField) -> Result<Self> {
        check_shape(&alpha12, "cross diffusion", self.d, self.m, self.d, self.m)?;
        self.alpha12 = if alpha12.is_zero() { None } else { Some(alpha12) };
        Ok(self)
    }

    /// Sets the time-scale parameter; `eps` must lie in `(0, 1]`.
    pub fn with_scale(mut self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return invalid(format!("scale parameter must lie in (0, 1], got {eps}"));
        }
        self.eps = Some(eps);
        Ok(self)
    }

    pub fn slow_dim(&self) -> usize {
        self.d
    }

    pub fn fast_dim(&self) -> usize {
        self.m
    }

    pub fn scale(&self) -> Option<f64> {
        self.eps
    }

    /// `eps`, or 1 when the system carries no scale parameter.
    pub fn eps_or_one(&self) -> f64 {
        self.eps.unwrap_or(1.0)
    }

    pub fn slow_drift(&self) -> &CoefficientField {
        &self.f
    }

    pub fn fast_drift(&self) -> &CoefficientField {
        &self.g
    }

    pub fn slow_diffusion(&self) -> &CoefficientField {
        &self.alpha
    }

    pub fn fast_diffusion(&self) -> &CoefficientField {
        &self.beta
    }

    pub fn cross_diffusion(&self) -> Option<&CoefficientField> {
        self.alpha12.as_ref()
    }

    /// Number of independent `U` components actually driving the system.
    pub(crate) fn slow_noise_dim(&self) -> usize {
        if self.alpha.is_zero() {
            0
        } else {
            self.d
        }
    }

    /// Number of independent `W` components actually driving the system.
    pub(crate) fn fast_noise_dim(&self) -> usize {
        if self.beta.is_zero() && self.alpha12.is_none() {
            0
        } else {
            self.m
        }
    }

    /// Effective slow diffusion matrix `alpha alpha^T + alpha12 alpha12^T` at `(x, y)`.
    pub fn slow_diffusion_matrix(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let d = self.d;
        let mut out = vec![0.0; d * d];
        let mut scratch = vec![0.0; d * d.max(self.m)];
        self.alpha.add_outer_into(0.0, x, y, &mut out, &mut scratch);
        if let Some(a12) = &self.alpha12 {
            a12.add_outer_into(0.0, x, y, &mut out, &mut scratch);
        }
        DMatrix::from_row_slice(d, d, &out)
    }

    /// The full generator diffusion `A = 1/2 sigma sigma^T` as blocks
    /// `(A11, A12, A22)`, including the `eps` scaling of the fast channel.
    pub fn generator_diffusion(&self, x: &[f64], y: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let eps = self.eps_or_one();
        let a11 = self.slow_diffusion_matrix(x, y) * 0.5;
        let beta = self.beta.eval(0.0, x, y) / eps.sqrt();
        let a22 = &beta * beta.transpose() * 0.5;
        let a12 = match &self.alpha12 {
            Some(c) => c.eval(0.0, x, y) * beta.transpose() * 0.5,
            None => DMatrix::zeros(self.d, self.m),
        };
        (a11, a12, a22)
    }

    /// Drift of the full system including the `1/eps` fast scaling.
    pub fn full_drift(&self, x: &[f64], y: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let eps = self.eps_or_one();
        (self.f.eval_vector(0.0, x, y), self.g.eval_vector(0.0, x, y) / eps)
    }

    /// Linear-Gaussian form `dZ = A Z dt + C dB` (with `Z = (X, Y)`), when
    /// every coefficient is affine with zero offset and the diffusions are constant.
    pub fn as_linear(&self) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        let (d, m) = (self.d, self.m);
        let n = d + m;
        let eps = self.eps_or_one();
        let (fs, fo) = self.f.affine_parts()?;
        let (gs, go) = self.g.affine_parts()?;
        if fo.iter().any(|v| *v != 0.0) || go.iter().any(|v| *v != 0.0) {
            return None;
        }
        let alpha = self.alpha.constant_value()?;
        let beta = self.beta.constant_value()?;
        let alpha12 = match &self.alpha12 {
            Some(c) => c.constant_value()?,
            None => DMatrix::zeros(d, m),
        };
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (d, n)).copy_from(&fs);
        a.view_mut((d, 0), (m, n)).copy_from(&(gs / eps));
        let mut c = DMatrix::zeros(n, n);
        c.view_mut((0, 0), (d, d)).copy_from(&alpha);
        c.view_mut((0, d), (d, m)).copy_from(&alpha12);
        c.view_mut((d, d), (m, m)).copy_from(&(beta / eps.sqrt()));
        Some((a, c))
    }
}

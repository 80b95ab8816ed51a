//! Dormand-Prince 5(4) with step-size control and 4th-order dense output.

use crate::error::{invalid, Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

// difference between the 5th- and 4th-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const MAX_STEPS: usize = 10_000_000;

/// Continuous solution of an ODE on `[t0, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensePath {
    dim: usize,
    starts: Vec<f64>,
    steps: Vec<f64>,
    /// Five interpolation coefficient vectors per step.
    coeffs: Vec<f64>,
    t0: f64,
    t_end: f64,
    y0: Vec<f64>,
    y_end: Vec<f64>,
}

impl DensePath {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    /// Accepted step boundaries, including both endpoints.
    pub fn mesh(&self) -> Vec<f64> {
        let mut m = self.starts.clone();
        m.push(self.t_end);
        m
    }

    pub fn final_state(&self) -> &[f64] {
        &self.y_end
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let slack = 1e-12 * self.t_end.abs().max(self.t0.abs()).max(1.0);
        if t < self.t0 - slack || t > self.t_end + slack {
            return Err(Error::OutsideTimeDomain { t, start: self.t0, end: self.t_end });
        }
        if self.steps.is_empty() || t <= self.t0 {
            out.copy_from_slice(&self.y0);
            return Ok(());
        }
        if t >= self.t_end {
            out.copy_from_slice(&self.y_end);
            return Ok(());
        }
        let k = self.starts.partition_point(|s| *s <= t).saturating_sub(1);
        let s = (t - self.starts[k]) / self.steps[k];
        let s1 = 1.0 - s;
        let n = self.dim;
        let c = &self.coeffs[5 * n * k..5 * n * (k + 1)];
        for i in 0..n {
            out[i] = c[i] + (c[n + i] + (c[2 * n + i] + (c[3 * n + i] + c[4 * n + i] * s1) * s) * s1) * s;
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }
}

fn err_norm(err: &[f64], y: &[f64], y_new: &[f64], tol: f64) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sk = tol + tol * a.abs().max(b.abs());
            (e / sk) * (e / sk)
        })
        .sum();
    (sum / n).sqrt()
}

/// Solves `dx/dt = field(t, x)` from `x0` at `t0` to `t_end` with mixed
/// absolute/relative local error tolerance `tol`.
///
/// The field may fail (for example a drift that is singular at the start
/// time); its error is returned unchanged.
pub fn rk_solve<F>(mut field: F, x0: &[f64], t0: f64, t_end: f64, tol: f64) -> Result<DensePath>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    if !(t_end >= t0) || !t0.is_finite() || !t_end.is_finite() {
        return invalid(format!("invalid time span [{t0}, {t_end}]"));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("initial state".into()));
    }
    let n = x0.len();
    let mut path = DensePath {
        dim: n,
        starts: Vec::new(),
        steps: Vec::new(),
        coeffs: Vec::new(),
        t0,
        t_end,
        y0: x0.to_vec(),
        y_end: x0.to_vec(),
    };
    if t_end == t0 {
        return Ok(path);
    }

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut y = x0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut t = t0;
    field(t, &y, &mut k[0])?;
    if k[0].iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(format!("vector field at t = {t}")));
    }

    // initial step estimate
    let span = t_end - t0;
    let mut h = {
        let scale: Vec<f64> = y.iter().map(|v| tol + tol * v.abs()).collect();
        let rms = |v: &[f64]| (v.iter().zip(&scale).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / n.max(1) as f64).sqrt();
        let d0 = rms(&y);
        let d1 = rms(&k[0]);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span);
        for i in 0..n {
            stage[i] = y[i] + h0 * k[0][i];
        }
        let mut f1 = vec![0.0; n];
        field(t + h0, &stage, &mut f1)?;
        let diff: Vec<f64> = f1.iter().zip(&k[0]).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        if h1.is_finite() {
            (100.0 * h0).min(h1).min(span)
        } else {
            h0
        }
    };

    let mut last_rejected = false;
    for _ in 0..MAX_STEPS {
        if t >= t_end {
            break;
        }
        if t + h > t_end || t + 1.01 * h >= t_end {
            h = t_end - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s].iter().enumerate().take(s) {
                    acc += a * k[j][i];
                }
                stage[i] = y[i] + h * acc;
            }
            field(t + C[s] * h, &stage, &mut k[s])?;
        }
        // the last stage is evaluated at the 5th-order solution
        y_new.copy_from_slice(&stage);
        for i in 0..n {
            err[i] = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
        }
        let finite = y_new.iter().chain(&err).all(|v| v.is_finite()) && k[6].iter().all(|v| v.is_finite());
        let e = if finite { err_norm(&err, &y, &y_new, tol) } else { f64::INFINITY };

        if e <= 1.0 {
            path.starts.push(t);
            path.steps.push(h);
            let base = path.coeffs.len();
            path.coeffs.resize(base + 5 * n, 0.0);
            let c = &mut path.coeffs[base..];
            for i in 0..n {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                c[i] = y[i];
                c[n + i] = ydiff;
                c[2 * n + i] = bspl;
                c[3 * n + i] = ydiff - h * k[6][i] - bspl;
                c[4 * n + i] = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
            }
            t += h;
            y.copy_from_slice(&y_new);
            let k6 = k[6].clone();
            k[0].copy_from_slice(&k6);
            let fac = (0.9 * e.max(1e-10).powf(-0.2)).clamp(0.2, 10.0);
            let h_next = h * fac;
            h = if last_rejected { h_next.min(h) } else { h_next };
            last_rejected = false;
        } else {
            let fac = if e.is_finite() { (0.9 * e.powf(-0.2)).clamp(0.2, 1.0) } else { 0.25 };
            h *= fac;
            last_rejected = true;
        }
    }
    if t < t_end {
        return Err(Error::StepSizeUnderflow { t, h });
    }
    path.t_end = t_end;
    path.y_end = y;
    Ok(path)
}

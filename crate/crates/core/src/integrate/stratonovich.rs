use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::CoefficientField;

/// Converts an Ito drift `b` with diffusion `sigma` into the equivalent
/// Stratonovich drift
///
/// ```text
/// B_i = b_i - 1/2 sum_{j,k} sigma_jk d(sigma_ik)/dx_j
/// ```
///
/// Both fields are functions of `(t, x)` only (`y_dim == 0`). The Jacobian
/// uses centered differences with step `1e-5 * max(1, |x_j|)`.
pub fn ito_to_stratonovich_drift(b: &CoefficientField, sigma: &CoefficientField) -> Result<CoefficientField> {
    let d = b.rows();
    if b.cols() != 1 {
        return Err(Error::Dimension { what: "drift columns", expected: 1, got: b.cols() });
    }
    if sigma.rows() != d || sigma.x_dim() != d || b.x_dim() != d {
        return Err(Error::Dimension { what: "diffusion rows", expected: d, got: sigma.rows() });
    }
    if sigma.is_constant() {
        return Ok(b.clone());
    }
    let k = sigma.cols();
    let (b, sigma) = (Arc::new(b.clone()), Arc::new(sigma.clone()));
    let time_dependent = b.is_time_dependent() || sigma.is_time_dependent();
    Ok(CoefficientField::function(d, 1, d, 0, move |t, x, _, out| {
        b.eval_into(t, x, &[], out);
        let mut s = vec![0.0; d * k];
        sigma.eval_into(t, x, &[], &mut s);
        let mut xp = x.to_vec();
        let mut plus = vec![0.0; d * k];
        let mut minus = vec![0.0; d * k];
        for j in 0..d {
            let h = 1e-5 * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            sigma.eval_into(t, &xp, &[], &mut plus);
            xp[j] = x[j] - h;
            sigma.eval_into(t, &xp, &[], &mut minus);
            xp[j] = x[j];
            for i in 0..d {
                for c in 0..k {
                    let deriv = (plus[i * k + c] - minus[i * k + c]) / (2.0 * h);
                    out[i] -= 0.5 * s[j * k + c] * deriv;
                }
            }
        }
    })
    .time_dependent(time_dependent)
    .y_dependent(false))
}

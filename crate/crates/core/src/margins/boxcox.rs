use crate::error::{domain, Error, Result};

/// Below this `|lambda|` the series expansion around `ln y` is used.
const LAMBDA_SMALL: f64 = 1e-12;

/// Box-Cox transform `(y^lambda - 1) / lambda`, `ln y` at `lambda = 0`.
pub fn boxcox(y: f64, lambda: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(domain(format!("Box-Cox needs y > 0, got {y}")));
    }
    let ly = y.ln();
    if lambda.abs() < LAMBDA_SMALL {
        Ok(ly)
    } else {
        // expm1 keeps precision for small lambda * ln y
        Ok((lambda * ly).exp_m1() / lambda)
    }
}

/// Inverse Box-Cox transform. Fails when `1 + lambda * z <= 0`.
pub fn boxcox_inverse(z: f64, lambda: f64) -> Result<f64> {
    if lambda.abs() < LAMBDA_SMALL {
        return Ok(z.exp());
    }
    let base = 1.0 + lambda * z;
    if !(base > 0.0) {
        return Err(Error::Numeric {
            message: format!("inverse Box-Cox undefined at z = {z}, lambda = {lambda}"),
            residual: base,
        });
    }
    Ok(((lambda * z).ln_1p() / lambda).exp())
}

//! Standard normal tail quantities evaluated without cancellation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

use crate::error::{Error, Result};

/// `½ log 2π`
pub(crate) const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// Above this the Mills-ratio continued fraction is used instead of erfc.
const CF_SWITCH: f64 = 8.0;
const CF_TERMS: usize = 80;

/// `log φ(z)`
#[inline]
pub fn log_pdf_std(z: f64) -> f64 {
    -0.5 * z * z - HALF_LN_2PI
}

/// Mills ratio `(1 - Φ(z)) / φ(z)` by backward evaluation of Laplace's
/// continued fraction. Accurate to machine precision for `z >= 8`.
fn mills_ratio_cf(z: f64) -> f64 {
    let mut tail = z;
    for k in (1..=CF_TERMS).rev() {
        tail = z + k as f64 / tail;
    }
    1.0 / tail
}

/// `log(1 - Φ(z))` for finite `z`; no input checks.
#[inline]
pub(crate) fn log_sf(z: f64) -> f64 {
    if z < 0.0 {
        (-0.5 * erfc(-z * FRAC_1_SQRT_2)).ln_1p()
    } else if z <= CF_SWITCH {
        (0.5 * erfc(z * FRAC_1_SQRT_2)).ln()
    } else {
        log_pdf_std(z) + mills_ratio_cf(z).ln()
    }
}

/// Inverse Mills ratio `λ(z) = φ(z) / (1 - Φ(z))`, the standard normal hazard.
#[inline]
pub(crate) fn inv_mills(z: f64) -> f64 {
    if z > CF_SWITCH {
        1.0 / mills_ratio_cf(z)
    } else {
        (log_pdf_std(z) - log_sf(z)).exp()
    }
}

/// Stable `log(1 - Φ(z))`, the log survival function of the standard normal.
pub fn log_survival_std(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::invalid(format!("log_survival_std: z = {z} is not finite")));
    }
    Ok(log_sf(z))
}

/// Standard normal CDF.
pub fn cdf_std(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

#[allow(dead_code)]
pub(crate) fn pdf_std(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

use crate::error::{Error, Result};

/// Shape and scale of the general robust kernel
/// `ρ(x) = |α−2|/α · (((x/c)²/|α−2| + 1)^{α/2} − 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustKernelParams {
    pub alpha: f64,
    pub c: f64,
}

impl Default for RobustKernelParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            c: 0.05,
        }
    }
}

impl RobustKernelParams {
    pub fn new(alpha: f64, c: f64) -> Result<Self> {
        let p = Self { alpha, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "robust scale c = {}",
                self.c
            )));
        }
        if !(self.alpha.is_finite() && self.alpha <= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "robust shape alpha = {} (must be ≤ 2)",
                self.alpha
            )));
        }
        Ok(())
    }
}

pub fn robust_kernel(x: f64, p: &RobustKernelParams) -> f64 {
    let z = x / p.c;
    let z2 = z * z;
    if p.alpha == 2.0 {
        0.5 * z2
    } else if p.alpha == 0.0 {
        (0.5 * z2).ln_1p()
    } else {
        let b = (p.alpha - 2.0).abs();
        b / p.alpha * ((z2 / b + 1.0).powf(p.alpha / 2.0) - 1.0)
    }
}

/// `dρ/dx = (x/c²)·((x/c)²/|α−2| + 1)^{α/2 − 1}`.
pub fn robust_kernel_grad(x: f64, p: &RobustKernelParams) -> f64 {
    let c2 = p.c * p.c;
    if p.alpha == 2.0 {
        x / c2
    } else if p.alpha == 0.0 {
        2.0 * x / (x * x + 2.0 * c2)
    } else {
        let b = (p.alpha - 2.0).abs();
        x / c2 * ((x * x / c2) / b + 1.0).powf(p.alpha / 2.0 - 1.0)
    }
}

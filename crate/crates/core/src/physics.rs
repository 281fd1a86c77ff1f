//! Constitutive functions of the quadratic relative-permeability model.
//!
//! With viscosity ratio `M = mu_d / mu_i` (defending over invading):
//!
//! ```text
//! lambda_tot(s) = M s^2 + (1 - s)^2
//! f(s)          = M s^2 / lambda_tot(s)
//! H(s)          = kappa * M s^2 (1 - s)^2 / lambda_tot(s)
//! ```
//!
//! The checked free functions validate `s in [0,1]`. The solver kernels call
//! the unchecked methods on [`FluidModel`] directly, since regularized models
//! may carry saturations outside the unit interval. Those methods extend each
//! function by its boundary value, so a cell below zero carries no invading
//! phase and cannot drain further.

use crate::error::{FlowError, Result};

/// Samples used for the derivative and diffusion bounds.
const BOUND_SAMPLES: usize = 10_001;
const BOUND_MARGIN: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidModel {
    pub viscosity_ratio: f64,
}

impl FluidModel {
    pub fn new(viscosity_ratio: f64) -> Result<Self> {
        if !(viscosity_ratio > 0.0) || !viscosity_ratio.is_finite() {
            return Err(FlowError::Domain {
                name: "viscosity_ratio",
                value: viscosity_ratio,
                domain: "(0, inf)",
            });
        }
        Ok(FluidModel { viscosity_ratio })
    }

    #[inline]
    pub fn mobility(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let r = 1.0 - s;
        self.viscosity_ratio * s * s + r * r
    }

    #[inline]
    pub fn frac_flow(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let a = self.viscosity_ratio * s * s;
        let r = 1.0 - s;
        a / (a + r * r)
    }

    #[inline]
    pub fn frac_flow_slope(&self, s: f64) -> f64 {
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        let m = self.viscosity_ratio;
        let d = self.mobility(s);
        2.0 * m * s * (1.0 - s) / (d * d)
    }

    /// Nonlinear diffusion coefficient for a cell (or edge) with permeability `kappa`.
    #[inline]
    pub fn diffusion(&self, s: f64, kappa: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let r = 1.0 - s;
        kappa * self.viscosity_ratio * s * s * r * r / self.mobility(s)
    }

    /// Upper bound on `|f'|` over `[0,1]` for CFL estimates.
    pub fn slope_bound(&self) -> f64 {
        fractional_flow_derivative_bound(self)
    }

    /// Upper bound on `H(s)/kappa` over `[0,1]`.
    pub fn diffusion_bound(&self) -> f64 {
        BOUND_MARGIN * sample_max(|s| self.diffusion(s, 1.0))
    }
}

fn check_saturation(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(FlowError::Domain {
            name: "saturation",
            value: s,
            domain: "[0, 1]",
        })
    }
}

pub fn fractional_flow(s: f64, model: &FluidModel) -> Result<f64> {
    check_saturation(s)?;
    Ok(model.frac_flow(s))
}

pub fn total_mobility(s: f64, model: &FluidModel) -> Result<f64> {
    check_saturation(s)?;
    Ok(model.mobility(s))
}

pub fn diffusion_h(s: f64, kappa: f64, model: &FluidModel) -> Result<f64> {
    check_saturation(s)?;
    if !(kappa > 0.0) {
        return Err(FlowError::Domain {
            name: "kappa",
            value: kappa,
            domain: "(0, inf)",
        });
    }
    Ok(model.diffusion(s, kappa))
}

fn sample_max(g: impl Fn(f64) -> f64) -> f64 {
    let n = BOUND_SAMPLES - 1;
    (0..=n)
        .map(|k| g(k as f64 / n as f64).abs())
        .fold(0.0, f64::max)
}

/// `sup |f'(s)|` on `[0,1]` from dense sampling, with a 1% margin.
pub fn fractional_flow_derivative_bound(model: &FluidModel) -> f64 {
    BOUND_MARGIN * sample_max(|s| model.frac_flow_slope(s))
}

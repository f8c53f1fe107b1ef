//! Static-field ADK rate for an s state.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum AdkError {
    #[error("ionization potential must be positive, got {0}")]
    Ip(f64),
    #[error("field must be positive, got {0}")]
    Field(f64),
    #[error("residual charge must be positive, got {0}")]
    Charge(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdkParams {
    pub ip: f64,
    /// Residual charge.
    pub z: f64,
    pub field: f64,
}

impl AdkParams {
    pub fn new(ip: f64, z: f64, field: f64) -> Result<Self, AdkError> {
        let p = AdkParams { ip, z, field };
        p.check()?;
        Ok(p)
    }

    pub fn hydrogen(field: f64) -> Result<Self, AdkError> {
        AdkParams::new(0.5, 1.0, field)
    }

    fn check(&self) -> Result<(), AdkError> {
        if !(self.ip > 0.0 && self.ip.is_finite()) {
            return Err(AdkError::Ip(self.ip));
        }
        if !(self.field > 0.0 && self.field.is_finite()) {
            return Err(AdkError::Field(self.field));
        }
        if !(self.z > 0.0 && self.z.is_finite()) {
            return Err(AdkError::Charge(self.z));
        }
        Ok(())
    }

    /// `n* = Z / √(2 Ip)`
    pub fn n_star(&self) -> f64 {
        self.z / (2.0 * self.ip).sqrt()
    }
}

/// `ln w` with
/// `w = C² Ip (2κ³/F)^{2n*-1} exp(-2κ³/3F)`, `κ = √(2Ip)`,
/// `C² = 2^{2n*} / (n* Γ(n*+l*+1) Γ(n*-l*))`, `l* = n* - 1`.
pub fn adk_ln_rate(p: &AdkParams) -> Result<f64, AdkError> {
    p.check()?;
    let n = p.n_star();
    let k3 = (2.0 * p.ip).powf(1.5);
    let ln_c2 = 2.0 * n * std::f64::consts::LN_2 - n.ln() - ln_gamma(2.0 * n);
    Ok(ln_c2 + p.ip.ln() + (2.0 * n - 1.0) * (2.0 * k3 / p.field).ln() - 2.0 * k3 / (3.0 * p.field))
}

/// ADK rate in a.u. Rates below the smallest positive double are reported
/// as that value.
pub fn adk_rate(p: &AdkParams) -> Result<f64, AdkError> {
    Ok(adk_ln_rate(p)?.exp().max(f64::MIN_POSITIVE))
}

/// ADK rate with the level shifted by `stark_shift` (negative for a level
/// pushed down): the effective ionization potential is `Ip - stark_shift`.
pub fn adk_rate_shifted(p: &AdkParams, stark_shift: f64) -> Result<f64, AdkError> {
    let q = AdkParams {
        ip: p.ip - stark_shift,
        ..*p
    };
    adk_rate(&q)
}

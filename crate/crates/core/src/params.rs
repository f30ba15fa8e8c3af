use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensionless constants of the ferronematic energy.
///
/// `l1` and `l2` weigh the nematic and magnetic elastic terms, `c` is the
/// nemato-magnetic coupling and `xi` the relative strength of the magnetic
/// part of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub l1: f64,
    pub l2: f64,
    pub c: f64,
    pub xi: f64,
}

impl ModelParams {
    pub fn new(l1: f64, l2: f64, c: f64, xi: f64) -> Result<Self> {
        let check = |name: &str, v: f64, allow_zero: bool| {
            let ok = v.is_finite() && if allow_zero { v >= 0.0 } else { v > 0.0 };
            if ok {
                Ok(())
            } else {
                let bound = if allow_zero { ">= 0" } else { "> 0" };
                Err(Error::InvalidParameter(format!("{name} must be finite and {bound}, got {v}")))
            }
        };
        check("l1", l1, false)?;
        check("l2", l2, false)?;
        check("c", c, true)?;
        check("xi", xi, false)?;
        Ok(Self { l1, l2, c, xi })
    }

    /// Equal elastic constants `l1 = l2 = l` and `xi = 1`.
    pub fn symmetric(l: f64, c: f64) -> Result<Self> {
        Self::new(l, l, c, 1.0)
    }

    /// Copy with both elastic constants replaced by `l`.
    pub fn with_l(&self, l: f64) -> Result<Self> {
        Self::new(l, l, self.c, self.xi)
    }
}

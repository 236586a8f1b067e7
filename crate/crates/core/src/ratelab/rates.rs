//! Theorem constants and the rate multipliers `r` they guarantee.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which result the constants are meant for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    /// Almost-sure rate with summable entropy, sieve and `H*`-ball conditions.
    Theorem1,
    /// Single-sequence form of `Theorem1`; its `c1` enters as `c1 + c2`.
    Corollary1,
    /// In-probability rate with a Kullback-Leibler/`V` neighborhood.
    #[serde(alias = "corollary3")]
    Theorem2,
    /// Shell-entropy conditions against the `K,V` ball; rate `r_n -> inf`.
    #[serde(alias = "corollary4")]
    Theorem3,
    /// Shell-entropy conditions against the `H*` ball; almost sure.
    #[serde(alias = "corollary5")]
    Theorem4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConstants {
    /// Exponent in the Hausdorff entropy, `0 <= alpha < 1`.
    pub alpha: f64,
    /// Lower constant in `n eps^2 >= c0 log n`; only used by `theorem4`.
    #[serde(default)]
    pub c0: f64,
    /// Entropy budget `J <= n eps^2 c1`.
    #[serde(default)]
    pub c1: f64,
    /// Summability or neighborhood exponent.
    #[serde(default)]
    pub c2: f64,
    /// Prior concentration exponent `Pi(W_eps) >= e^(-n eps^2 c3)`.
    #[serde(default)]
    pub c3: f64,
    pub which: Which,
}

impl RateConstants {
    /// Checks the hypotheses on the constants required by `which`.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        for (name, v) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a finite nonnegative number, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1), got {}", self.alpha));
        }
        match self.which {
            Which::Theorem1 => {
                if self.c1 <= 0.0 || self.c2 <= 0.0 {
                    return bad("theorem1 needs c1 > 0 and c2 > 0".into());
                }
            }
            Which::Corollary1 => {
                if self.c2 <= 0.0 {
                    return bad("corollary1 needs c2 > 0".into());
                }
            }
            Which::Theorem2 => {
                if self.c1 <= 0.0 {
                    return bad("theorem2 needs c1 > 0".into());
                }
            }
            Which::Theorem3 | Which::Theorem4 => {
                if self.alpha <= 0.0 {
                    return bad("theorem3 and theorem4 need 0 < alpha < 1".into());
                }
                let cap = (1.0 - self.alpha) / 18.0;
                if self.c1 >= cap {
                    return bad(format!("c1 = {} must be below (1 - alpha)/18 = {cap}", self.c1));
                }
                if self.which == Which::Theorem4 && !(self.c0 > 0.0 && self.c2 > 1.0 / self.c0) {
                    return bad(format!("theorem4 needs c0 > 0 and c2 > 1/c0, got c0 = {}, c2 = {}", self.c0, self.c2));
                }
            }
        }
        Ok(())
    }
}

/// The infimal `r` in the conclusion: the posterior mass of `{H(f0, f) >= r eps_n}`
/// vanishes for every larger `r`.
///
/// Only the formula's own domain is enforced (`alpha < 1`, constants
/// nonnegative); see [`RateConstants::validate`] for the full hypotheses.
/// `theorem3` and `theorem4` give no explicit multiplier and return `+inf`.
pub fn rate_multiplier(k: &RateConstants) -> Result<f64> {
    if !(k.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be below 1, got {}", k.alpha)));
    }
    if !(k.alpha >= 0.0) || [k.c1, k.c2, k.c3].iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::InvalidArgument("alpha and c1, c2, c3 must be nonnegative".into()));
    }
    let a = k.alpha;
    let inner = match k.which {
        Which::Theorem1 => 3.0 * a + 2.0 * a * k.c2 + a * k.c3 + k.c1,
        Which::Corollary1 => 3.0 * a + 2.0 * a * k.c2 + a * k.c3 + k.c1 + k.c2,
        Which::Theorem2 => 2.0 * a + a * k.c2 + k.c1,
        Which::Theorem3 | Which::Theorem4 => return Ok(f64::INFINITY),
    };
    Ok(2.0 + (2.0 * inner / (1.0 - a)).sqrt())
}

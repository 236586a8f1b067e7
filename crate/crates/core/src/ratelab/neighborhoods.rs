//! Neighborhoods of the true density used by the conditions and bounds.

use serde::{Deserialize, Serialize};

use crate::divergences::{hellinger, hstar, kl, v_divergence};
use crate::error::{Error, Result};
use crate::grid::GridDensity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodKind {
    /// `W_eps = {f : H*(f0, f) <= eps}`
    Wstar,
    /// `B_{eps^2} = {f : K(f0, f) < eps^2 and V(f0, f) < eps^2}`
    Kv,
    /// `A_eps = {f : H(f0, f) >= eps}`
    HellingerComplement,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborhoodSpec {
    pub kind: NeighborhoodKind,
    pub radius: f64,
}

impl NeighborhoodSpec {
    pub fn new(kind: NeighborhoodKind, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("neighborhood radius must be positive, got {radius}")));
        }
        Ok(Self { kind, radius })
    }

    /// Membership of `f`; a divergence that cannot be evaluated (`f` vanishing
    /// where `H*` needs it, or a grid mismatch) means "not a member".
    pub fn contains(&self, f0: &GridDensity, f: &GridDensity) -> bool {
        let r = self.radius;
        match self.kind {
            NeighborhoodKind::Wstar => hstar(f0, f).map(|h| h <= r).unwrap_or(false),
            NeighborhoodKind::Kv => {
                let r2 = r * r;
                matches!((kl(f0, f), v_divergence(f0, f)), (Ok(k), Ok(v)) if k < r2 && v < r2)
            }
            NeighborhoodKind::HellingerComplement => hellinger(f0, f).map(|h| h >= r).unwrap_or(false),
        }
    }
}

pub fn neighborhood_predicate<'a>(spec: NeighborhoodSpec, f0: &'a GridDensity) -> impl Fn(&GridDensity) -> bool + 'a {
    move |f| spec.contains(f0, f)
}

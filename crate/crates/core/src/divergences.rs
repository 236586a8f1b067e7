//! Hellinger distance, the modified Hellinger distance `H*`, Kullback-Leibler
//! divergence, the second log-moment `V`, and the sup-ratio `||f0/f||_inf`.
//!
//! All functionals are midpoint sums over the shared grid. The sup norm is a
//! nodal maximum, so it is the essential supremum of the discretized model.
//! On a grid no null sets exist, which settles what `||f0/f||_inf` means when
//! the ratio blows up: it is infinite exactly when some node has `f = 0 < f0`.
//!
//! `hstar` is directional. The first argument always plays the role of the
//! true density `f0`, and there is deliberately no symmetric variant.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridDensity;

fn same_grid(a: &GridDensity, b: &GridDensity) -> Result<()> {
    a.grid().check_same(b.grid())
}

/// `(sum (sqrt f - sqrt g)^2 w)^(1/2)`.
pub fn hellinger(f: &GridDensity, g: &GridDensity) -> Result<f64> {
    same_grid(f, g)?;
    Ok(hellinger_unchecked(f.values(), g.values(), f.grid().weight()))
}

pub(crate) fn hellinger_unchecked(f: &[f64], g: &[f64], w: f64) -> f64 {
    // Summation is symmetric term by term, so H(f,g) == H(g,f) bitwise.
    let s: f64 = f
        .iter()
        .zip(g)
        .map(|(&a, &b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum();
    (s * w).sqrt()
}

/// Modified Hellinger distance with the root-ratio weight `(2/3) sqrt(f0/f) + 1/3`.
///
/// Fails on the first node where `f` vanishes.
pub fn hstar(f0: &GridDensity, f: &GridDensity) -> Result<f64> {
    same_grid(f0, f)?;
    let mut s = 0.0;
    for (node, (&a, &b)) in f0.values().iter().zip(f.values()).enumerate() {
        if b <= 0.0 {
            return Err(Error::ZeroDensity { node });
        }
        let d = a.sqrt() - b.sqrt();
        s += d * d * (2.0 / 3.0 * (a / b).sqrt() + 1.0 / 3.0);
    }
    Ok((s * f0.grid().weight()).sqrt())
}

/// `sum f0 log(f0/f) w`, with `0 log(0/.) = 0` and `+inf` where `f = 0 < f0`.
pub fn kl(f0: &GridDensity, f: &GridDensity) -> Result<f64> {
    same_grid(f0, f)?;
    let mut s = 0.0;
    for (&a, &b) in f0.values().iter().zip(f.values()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        s += a * (a / b).ln();
    }
    Ok(s * f0.grid().weight())
}

/// `sum f0 (log(f0/f))^2 w`; infinite under the same condition as [`kl`].
pub fn v_divergence(f0: &GridDensity, f: &GridDensity) -> Result<f64> {
    same_grid(f0, f)?;
    let mut s = 0.0;
    for (&a, &b) in f0.values().iter().zip(f.values()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        let l = (a / b).ln();
        s += a * l * l;
    }
    Ok(s * f0.grid().weight())
}

/// Nodal `max f0/f`; nodes where both vanish are skipped.
pub fn sup_ratio(f0: &GridDensity, f: &GridDensity) -> Result<f64> {
    same_grid(f0, f)?;
    let mut best = 0.0f64;
    for (&a, &b) in f0.values().iter().zip(f.values()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        best = best.max(a / b);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub hellinger: f64,
    pub hstar: f64,
    #[serde(with = "crate::real")]
    pub kl: f64,
    #[serde(with = "crate::real")]
    pub v: f64,
    #[serde(with = "crate::real")]
    pub sup_ratio: f64,
    /// Either density had values lifted by its floor.
    pub clamped: bool,
}

/// All five functionals for the ordered pair `(f0, f)`.
pub fn divergence_report(f0: &GridDensity, f: &GridDensity) -> Result<DivergenceReport> {
    Ok(DivergenceReport {
        hellinger: hellinger(f0, f)?,
        hstar: hstar(f0, f)?,
        kl: kl(f0, f)?,
        v: v_divergence(f0, f)?,
        sup_ratio: sup_ratio(f0, f)?,
        clamped: f0.clamped() || f.clamped(),
    })
}

/// `integral sqrt(f0/f) f0`, the expected root likelihood ratio under `f0`.
///
/// Equals `1 + 1.5 hstar(f0, f)^2` exactly for normalized pairs.
pub fn expected_root_ratio(f0: &GridDensity, f: &GridDensity) -> Result<f64> {
    same_grid(f0, f)?;
    let h: Vec<f64> = f0
        .values()
        .iter()
        .zip(f.values())
        .map(|(&a, &b)| (a / b).sqrt() * a)
        .collect();
    f0.grid().integrate(&h)
}

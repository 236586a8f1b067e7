//! Empirical contraction curves: how fast the posterior radius shrinks with `n`.

use rayon::prelude::*;
use serde::Serialize;

use crate::divergences::hellinger;
use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::posterior::{sample_iid, PosteriorState};
use crate::priors::AtomicPrior;

pub const DEFAULT_MASS_TARGET: f64 = 0.5;

/// Smallest `rho` in `{0} u {H(f0, f_j)}` with `Pi_n(H(f0, f) > rho) <= mass_target`.
///
/// This is the infimum of the radii `rho` with `Pi_n(H(f0, f) >= rho) <= mass_target`.
pub fn posterior_radius(weights: &[f64], dist: &[f64], mass_target: f64) -> f64 {
    let mut order: Vec<usize> = (0..dist.len()).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]));
    let mut radius = order.first().map(|&i| dist[i]).unwrap_or(0.0);
    let mut beyond = 0.0;
    let mut k = 0;
    while k < order.len() {
        let level = dist[order[k]];
        while k < order.len() && dist[order[k]] == level {
            beyond += weights[order[k]];
            k += 1;
        }
        let next = if k < order.len() { dist[order[k]] } else { 0.0 };
        if beyond > mass_target {
            break;
        }
        radius = next;
    }
    radius
}

/// Type-7 quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub reps: usize,
    pub median_radius: f64,
    pub q25: f64,
    pub q75: f64,
}

fn validate(ns: &[usize], mass_target: f64) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::Empty("sample sizes"));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("sample sizes must be strictly increasing".into()));
    }
    if !(mass_target > 0.0 && mass_target < 1.0) {
        return Err(Error::InvalidArgument(format!("mass_target must lie in (0, 1), got {mass_target}")));
    }
    Ok(())
}

/// `H(f0, f_j)` for every atom.
pub fn atom_distances(prior: &AtomicPrior, f0: &GridDensity) -> Result<Vec<f64>> {
    prior.atoms().iter().map(|a| hellinger(f0, a)).collect()
}

/// Radii for one replication: one sample of size `max(ns)` drawn with `seed`,
/// whose prefixes feed the posterior at each `n`.
pub fn curve_replication(
    prior: &AtomicPrior,
    f0: &GridDensity,
    dist: &[f64],
    ns: &[usize],
    mass_target: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    validate(ns, mass_target)?;
    let sample = sample_iid(f0, *ns.last().unwrap(), seed);
    let mut state = PosteriorState::new(prior);
    let mut done = 0;
    let mut radii = Vec::with_capacity(ns.len());
    for &n in ns {
        state = state.update(&sample.slice(done, n))?;
        done = n;
        radii.push(posterior_radius(&state.weights(), dist, mass_target));
    }
    Ok(radii)
}

/// Median and quartiles over replications of each column of `radii`.
pub fn summarize(ns: &[usize], radii: &[Vec<f64>]) -> Vec<CurvePoint> {
    ns.iter()
        .enumerate()
        .map(|(k, &n)| {
            let mut col: Vec<f64> = radii.iter().map(|r| r[k]).collect();
            col.sort_by(f64::total_cmp);
            CurvePoint {
                n,
                reps: col.len(),
                median_radius: quantile(&col, 0.5),
                q25: quantile(&col, 0.25),
                q75: quantile(&col, 0.75),
            }
        })
        .collect()
}

/// Replication `i` uses seed `seed + i`.
pub fn contraction_curve(
    prior: &AtomicPrior,
    f0: &GridDensity,
    ns: &[usize],
    mass_target: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    validate(ns, mass_target)?;
    if reps == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    let dist = atom_distances(prior, f0)?;
    let radii: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|i| curve_replication(prior, f0, &dist, ns, mass_target, seed.wrapping_add(i)))
        .collect::<Result<_>>()?;
    Ok(summarize(ns, &radii))
}

/// Least-squares slope of `log median_radius` against `log n`.
pub fn log_log_slope(points: &[CurvePoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.median_radius.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Number of consecutive pairs where the median radius goes up.
pub fn inversions(points: &[CurvePoint]) -> usize {
    points.windows(2).filter(|w| w[1].median_radius > w[0].median_radius).count()
}

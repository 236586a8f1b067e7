//! Concrete density families and the covering constructions built on them.
//!
//! * Bernstein densities: mixtures of `beta(j, k - j + 1)` kernels.
//! * Exponential splines of order 1 (histograms) or 2 (hat functions) on
//!   uniform knots, `f(x) = exp(sum theta_j B_j(x) - c(theta))`.
//! * A smooth `d`-parameter exponential family over user-chosen features,
//!   whose Hellinger metric constants are measured rather than assumed.
//! * The lift of a sup-norm root cover to an `H*` cover, and the recipe that
//!   turns any cover into a partition.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::divergences::{hellinger, hstar};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridDensity, DEFAULT_FLOOR};

const SUM_TOL: f64 = 1e-12;

/// Beta density `Gamma(a+b)/(Gamma(a)Gamma(b)) x^(a-1) (1-x)^(b-1)` on `(0, 1)`.
pub fn beta_density(x: f64, a: f64, b: f64) -> f64 {
    let log_norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    (log_norm + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()).exp()
}

// ---------------------------------------------------------------------------
// Bernstein
// ---------------------------------------------------------------------------

/// Order `k` and the increments `F(j/k) - F((j-1)/k)` of the mixing distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernsteinSpec {
    pub k: usize,
    pub weights: Vec<f64>,
}

impl BernsteinSpec {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let spec = Self {
            k: weights.len(),
            weights,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidSpec("Bernstein order k must be at least 1".into()));
        }
        if self.weights.len() != self.k {
            return Err(Error::InvalidSpec(format!(
                "Bernstein order {} needs {} weights, got {}",
                self.k,
                self.k,
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSpec("Bernstein weights must be finite and >= 0".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidSpec(format!("Bernstein weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// `sum_j w_j beta(x; j, k - j + 1)` at the nodes, normalized.
pub fn bernstein_density(spec: &BernsteinSpec, grid: &Grid) -> Result<GridDensity> {
    bernstein_density_with_floor(spec, grid, DEFAULT_FLOOR)
}

pub fn bernstein_density_with_floor(spec: &BernsteinSpec, grid: &Grid, floor: f64) -> Result<GridDensity> {
    spec.validate()?;
    let k = spec.k as f64;
    let values = grid
        .nodes()
        .iter()
        .map(|&x| {
            spec.weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(j, w)| {
                    let a = (j + 1) as f64;
                    w * beta_density(x, a, k - a + 1.0)
                })
                .sum()
        })
        .collect();
    GridDensity::normalize(values, grid, floor)
}

// ---------------------------------------------------------------------------
// Exponential splines
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineExpSpec {
    /// Spline order, 1 or 2.
    pub q: usize,
    /// Number of equal knot cells.
    pub cells: usize,
    /// `q + cells - 1` coefficients summing to zero.
    pub theta: Vec<f64>,
    /// Box bound on every coefficient.
    pub bound: f64,
}

impl SplineExpSpec {
    pub fn dimension(&self) -> usize {
        self.q + self.cells - 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q == 1 || self.q == 2) {
            return Err(Error::InvalidSpec(format!("spline order must be 1 or 2, got {}", self.q)));
        }
        if self.cells == 0 {
            return Err(Error::InvalidSpec("spline needs at least one knot cell".into()));
        }
        if self.theta.len() != self.dimension() {
            return Err(Error::InvalidSpec(format!(
                "order {} spline on {} cells has {} coefficients, got {}",
                self.q,
                self.cells,
                self.dimension(),
                self.theta.len()
            )));
        }
        if !(self.bound > 0.0) {
            return Err(Error::InvalidSpec("spline box bound must be positive".into()));
        }
        let total: f64 = self.theta.iter().sum();
        if total.abs() > SUM_TOL {
            return Err(Error::InvalidSpec(format!("spline coefficients sum to {total}, not 0")));
        }
        if let Some(t) = self.theta.iter().find(|t| !(t.abs() <= self.bound)) {
            return Err(Error::InvalidSpec(format!(
                "spline coefficient {t} outside [-{b}, {b}]",
                b = self.bound
            )));
        }
        Ok(())
    }
}

/// B-spline basis of order 1 (cell indicators) or 2 (hats on knots `j/cells`).
///
/// Both bases sum to one at every point of `[0, 1]`.
pub fn spline_basis(q: usize, cells: usize, x: f64) -> Vec<f64> {
    let scaled = x * cells as f64;
    match q {
        1 => {
            let mut b = vec![0.0; cells];
            let i = (scaled.floor().max(0.0) as usize).min(cells - 1);
            b[i] = 1.0;
            b
        }
        2 => (0..=cells)
            .map(|j| (1.0 - (scaled - j as f64).abs()).max(0.0))
            .collect(),
        _ => panic!("spline order {q} not supported"),
    }
}

fn spline_log_shape(q: usize, cells: usize, theta: &[f64], grid: &Grid) -> Vec<f64> {
    grid.nodes()
        .iter()
        .map(|&x| {
            spline_basis(q, cells, x)
                .iter()
                .zip(theta)
                .map(|(b, t)| b * t)
                .sum()
        })
        .collect()
}

/// Exponentiates and normalizes without checking the sum-zero constraint.
pub(crate) fn spline_exp_raw(q: usize, cells: usize, theta: &[f64], grid: &Grid) -> Result<GridDensity> {
    let logs = spline_log_shape(q, cells, theta, grid);
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let values = logs.iter().map(|l| (l - top).exp()).collect();
    GridDensity::normalize(values, grid, DEFAULT_FLOOR)
}

pub fn spline_exp_density(spec: &SplineExpSpec, grid: &Grid) -> Result<GridDensity> {
    spec.validate()?;
    spline_exp_raw(spec.q, spec.cells, &spec.theta, grid)
}

/// The log normalizer `c(theta) = log integral exp(sum theta_j B_j)` on the grid.
pub fn spline_log_normalizer(spec: &SplineExpSpec, grid: &Grid) -> Result<f64> {
    spec.validate()?;
    let logs = spline_log_shape(spec.q, spec.cells, &spec.theta, grid);
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    Ok(top + (sum * grid.weight()).ln())
}

/// `||log f_theta||_inf / ||theta||_inf`, the ratio bounding the constant `d`
/// with `d ||theta||_inf <= ||log f_theta||_inf`. Zero `theta` gives `inf`.
pub fn spline_sup_log_ratio(spec: &SplineExpSpec, grid: &Grid) -> Result<f64> {
    let f = spline_exp_density(spec, grid)?;
    let log_sup = f.values().iter().map(|v| v.ln().abs()).fold(0.0, f64::max);
    let theta_sup = spec.theta.iter().map(|t| t.abs()).fold(0.0, f64::max);
    Ok(if theta_sup == 0.0 { f64::INFINITY } else { log_sup / theta_sup })
}

/// Projects onto the sum-zero hyperplane by subtracting the mean.
pub fn project_sum_zero(theta: &[f64]) -> Vec<f64> {
    let mean = theta.iter().sum::<f64>() / theta.len() as f64;
    theta.iter().map(|t| t - mean).collect()
}

// ---------------------------------------------------------------------------
// Smooth finite-dimensional family
// ---------------------------------------------------------------------------

/// A bounded feature function on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeatureMap {
    /// `(x - 1/2)^power`
    Power { power: u32 },
    /// `cos(2 pi freq x)`
    Cosine { freq: u32 },
    /// `sin(2 pi freq x)`
    Sine { freq: u32 },
    /// Explicit nodal values; length must match the grid.
    Tabulated { values: Vec<f64> },
}

impl FeatureMap {
    pub fn evaluate(&self, grid: &Grid) -> Result<Vec<f64>> {
        use std::f64::consts::TAU;
        let nodes = grid.nodes();
        Ok(match self {
            FeatureMap::Power { power } => nodes.iter().map(|x| (x - 0.5).powi(*power as i32)).collect(),
            FeatureMap::Cosine { freq } => nodes.iter().map(|x| (TAU * *freq as f64 * x).cos()).collect(),
            FeatureMap::Sine { freq } => nodes.iter().map(|x| (TAU * *freq as f64 * x).sin()).collect(),
            FeatureMap::Tabulated { values } => {
                if values.len() != grid.m() {
                    return Err(Error::LengthMismatch {
                        expected: grid.m(),
                        got: values.len(),
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec("tabulated feature has non-finite values".into()));
                }
                values.clone()
            }
        })
    }
}

fn default_beta() -> f64 {
    1.0
}

/// `f_theta ∝ exp(sum theta_i phi_i(x))` with `theta` in a compact box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothFamilySpec {
    pub features: Vec<FeatureMap>,
    /// One `[lo, hi]` interval per feature.
    pub theta_box: Vec<[f64; 2]>,
    /// Exponent in `a1 |d theta|^beta <= H <= a2 |d theta|^beta`.
    #[serde(default = "default_beta")]
    pub beta: f64,
}

impl SmoothFamilySpec {
    pub fn dimension(&self) -> usize {
        self.features.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::InvalidSpec("smooth family needs at least one feature".into()));
        }
        if self.theta_box.len() != self.features.len() {
            return Err(Error::InvalidSpec(format!(
                "{} features but {} box intervals",
                self.features.len(),
                self.theta_box.len()
            )));
        }
        for [lo, hi] in &self.theta_box {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidSpec(format!("box interval [{lo}, {hi}] has empty interior")));
            }
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidSpec("beta must be positive".into()));
        }
        Ok(())
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dimension()
            && theta
                .iter()
                .zip(&self.theta_box)
                .all(|(t, [lo, hi])| lo <= t && t <= hi)
    }

    pub(crate) fn feature_values(&self, grid: &Grid) -> Result<Vec<Vec<f64>>> {
        self.features.iter().map(|f| f.evaluate(grid)).collect()
    }
}

pub(crate) fn smooth_from_features(features: &[Vec<f64>], theta: &[f64], grid: &Grid) -> Result<GridDensity> {
    let logs: Vec<f64> = (0..grid.m())
        .map(|i| features.iter().zip(theta).map(|(f, t)| f[i] * t).sum())
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    GridDensity::normalize(logs.iter().map(|l| (l - top).exp()).collect(), grid, DEFAULT_FLOOR)
}

pub fn smooth_family_density(spec: &SmoothFamilySpec, theta: &[f64], grid: &Grid) -> Result<GridDensity> {
    spec.validate()?;
    if !spec.contains(theta) {
        return Err(Error::InvalidArgument(format!("theta {theta:?} lies outside the parameter box")));
    }
    smooth_from_features(&spec.feature_values(grid)?, theta, grid)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricEquivalence {
    /// Smallest observed `H / |d theta|^beta`.
    pub a1: f64,
    /// Largest observed `sqrt(3) H* / |d theta|^beta`.
    pub a2: f64,
    pub pairs: usize,
}

/// Measures `a1` and `a2` empirically over `samples` random parameter pairs.
///
/// Pairs along the direction of least feature variance are always included,
/// so a family that is flat along some direction reports `a1 = 0` and fails.
pub fn measure_metric_equivalence(
    spec: &SmoothFamilySpec,
    grid: &Grid,
    samples: usize,
    seed: u64,
) -> Result<MetricEquivalence> {
    spec.validate()?;
    if samples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 samples, got {samples}")));
    }
    let features = spec.feature_values(grid)?;
    let d = spec.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(samples + 8);
    for _ in 0..samples {
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            spec.theta_box.iter().map(|[lo, hi]| rng.gen_range(*lo..=*hi)).collect()
        };
        pairs.push((draw(&mut rng), draw(&mut rng)));
    }

    // Flattest direction of the centered feature covariance.
    let m = grid.m() as f64;
    let means: Vec<f64> = features.iter().map(|f| f.iter().sum::<f64>() / m).collect();
    let cov = DMatrix::from_fn(d, d, |a, b| {
        features[a]
            .iter()
            .zip(&features[b])
            .map(|(x, y)| (x - means[a]) * (y - means[b]))
            .sum::<f64>()
            / m
    });
    let eig = SymmetricEigen::new(cov);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let dir: Vec<f64> = eig.eigenvectors.column(imin).iter().cloned().collect();
    let center: Vec<f64> = spec.theta_box.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect();
    let reach = dir
        .iter()
        .zip(&spec.theta_box)
        .filter(|(v, _)| v.abs() > 1e-12)
        .map(|(v, [lo, hi])| 0.5 * (hi - lo) / v.abs())
        .fold(f64::INFINITY, f64::min);
    for frac in [0.1, 0.5, 0.9] {
        let t = reach * frac;
        let a: Vec<f64> = center.iter().zip(&dir).map(|(c, v)| c + t * v).collect();
        let b: Vec<f64> = center.iter().zip(&dir).map(|(c, v)| c - t * v).collect();
        pairs.push((a, b));
    }

    let mut a1 = f64::INFINITY;
    let mut a2 = 0.0f64;
    let mut used = 0;
    for (t1, t2) in &pairs {
        let dist = t1.iter().zip(t2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if dist < 1e-12 {
            continue;
        }
        let scale = dist.powf(spec.beta);
        let f1 = smooth_from_features(&features, t1, grid)?;
        let f2 = smooth_from_features(&features, t2, grid)?;
        a1 = a1.min(hellinger(&f1, &f2)? / scale);
        a2 = a2.max(3f64.sqrt() * hstar(&f1, &f2)? / scale);
        used += 1;
    }
    if !(a1 > 1e-9) {
        return Err(Error::DegenerateFamily { a1 });
    }
    Ok(MetricEquivalence { a1, a2, pairs: used })
}

// ---------------------------------------------------------------------------
// Covering constructions
// ---------------------------------------------------------------------------

/// Lifts a sup-norm root cover `{f : |sqrt f - sqrt g_j| <= eps}` to densities
/// `f_j = (sqrt g_j + eps)^2 / integral (sqrt g_j + eps)^2`.
///
/// Every density within `eps` of `g_j` in root sup norm then satisfies
/// `hstar(f, f_j) <= 8 eps`.
pub fn lift_sup_cover(gs: &[Vec<f64>], eps: f64, grid: &Grid) -> Result<Vec<GridDensity>> {
    if gs.is_empty() {
        return Err(Error::Empty("sup-norm cover has no centers"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1], got {eps}")));
    }
    gs.iter()
        .map(|g| {
            if g.len() != grid.m() {
                return Err(Error::LengthMismatch {
                    expected: grid.m(),
                    got: g.len(),
                });
            }
            let lifted = g
                .iter()
                .enumerate()
                .map(|(node, &v)| {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::BadValue { node, value: v });
                    }
                    let r = v.sqrt() + eps;
                    Ok(r * r)
                })
                .collect::<Result<Vec<_>>>()?;
            GridDensity::normalize(lifted, grid, 0.0)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub blocks: Vec<BTreeSet<usize>>,
    /// Positions of blocks that came out empty.
    pub empty: Vec<usize>,
}

/// `P_1 = O_1 ∩ U`, `P_i = (O_i \ (P_1 ∪ .. ∪ P_{i-1})) ∩ U`.
///
/// Block order and count follow the cover; elements outside `universe` are dropped.
pub fn cover_to_partition(cover: &[BTreeSet<usize>], universe: &BTreeSet<usize>) -> Result<Partition> {
    if let Some(&missing) = universe.iter().find(|a| !cover.iter().any(|o| o.contains(a))) {
        return Err(Error::NotCovering { missing });
    }
    let mut taken = BTreeSet::new();
    let mut blocks = Vec::with_capacity(cover.len());
    let mut empty = Vec::new();
    for (i, o) in cover.iter().enumerate() {
        let block: BTreeSet<usize> = o
            .iter()
            .filter(|a| universe.contains(a) && !taken.contains(*a))
            .cloned()
            .collect();
        taken.extend(block.iter().cloned());
        if block.is_empty() {
            empty.push(i);
        }
        blocks.push(block);
    }
    Ok(Partition { blocks, empty })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::hellinger;

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().cloned().collect()
    }

    #[test]
    fn bernstein_order_one_is_uniform() {
        let g = Grid::new(64).unwrap();
        let d = bernstein_density(&BernsteinSpec::new(vec![1.0]).unwrap(), &g).unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn bernstein_uniform_weights_collapse() {
        let g = Grid::new(257).unwrap();
        for k in 1..=50 {
            let spec = BernsteinSpec::new(vec![1.0 / k as f64; k]).unwrap();
            let d = bernstein_density(&spec, &g).unwrap();
            let worst = d.values().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-10, "k = {k}: {worst}");
        }
    }

    #[test]
    fn bernstein_two_kernels_at_midpoint() {
        // 0.3 * 2(1-x) + 0.7 * 2x at x = 1/2 is 1, and the mixture is linear
        // so the midpoint rule integrates it exactly.
        let g = Grid::new(3).unwrap();
        let d = bernstein_density(&BernsteinSpec::new(vec![0.3, 0.7]).unwrap(), &g).unwrap();
        assert!((d.value(1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bernstein_rejects_bad_specs() {
        assert!(BernsteinSpec::new(vec![]).is_err());
        assert!(BernsteinSpec::new(vec![0.5, 0.6]).is_err());
        assert!(BernsteinSpec::new(vec![1.5, -0.5]).is_err());
        let bad = BernsteinSpec {
            k: 3,
            weights: vec![0.5, 0.5],
        };
        assert!(bernstein_density(&bad, &Grid::new(4).unwrap()).is_err());
    }

    #[test]
    fn beta_density_large_orders_stay_finite() {
        let v = beta_density(0.5, 200.0, 201.0);
        assert!(v.is_finite() && v > 1.0);
    }

    #[test]
    fn spline_zero_theta_is_uniform() {
        let g = Grid::new(128).unwrap();
        for (q, cells) in [(1, 4), (2, 5)] {
            let spec = SplineExpSpec {
                q,
                cells,
                theta: vec![0.0; q + cells - 1],
                bound: 1.0,
            };
            let d = spline_exp_density(&spec, &g).unwrap();
            assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
            assert!(spline_log_normalizer(&spec, &g).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn spline_histogram_two_cells() {
        let g = Grid::new(64).unwrap();
        let t = 2f64.ln();
        let spec = SplineExpSpec {
            q: 1,
            cells: 2,
            theta: vec![t, -t],
            bound: 1.0,
        };
        let d = spline_exp_density(&spec, &g).unwrap();
        let left = t.exp() / (0.5 * t.exp() + 0.5 * (-t).exp());
        assert!((left - 1.6).abs() < 1e-15);
        assert!((d.value(0) - 1.6).abs() < 1e-12);
        assert!((d.value(63) - 0.4).abs() < 1e-12);
        let scaled = SplineExpSpec {
            theta: vec![0.0, 0.0],
            ..spec
        };
        let u = spline_exp_density(&scaled, &g).unwrap();
        assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn spline_constant_shift_is_invisible() {
        let g = Grid::new(200).unwrap();
        let theta = vec![0.4, -0.1, 0.3, -0.6];
        let base = spline_exp_raw(2, 3, &theta, &g).unwrap();
        let shifted: Vec<f64> = theta.iter().map(|t| t + 0.77).collect();
        let again = spline_exp_raw(2, 3, &project_sum_zero(&shifted), &g).unwrap();
        let raw_shift = spline_exp_raw(2, 3, &shifted, &g).unwrap();
        for i in 0..g.m() {
            assert!((base.value(i) - again.value(i)).abs() < 1e-12);
            assert!((base.value(i) - raw_shift.value(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn spline_rejects_bad_specs() {
        let g = Grid::new(16).unwrap();
        let mut spec = SplineExpSpec {
            q: 3,
            cells: 2,
            theta: vec![0.0; 4],
            bound: 1.0,
        };
        assert!(spline_exp_density(&spec, &g).is_err());
        spec.q = 2;
        spec.theta = vec![0.5, 0.0, 0.0];
        assert!(spline_exp_density(&spec, &g).is_err());
        spec.theta = vec![2.0, -2.0, 0.0];
        assert!(spline_exp_density(&spec, &g).is_err());
    }

    #[test]
    fn spline_basis_partitions_unity() {
        for q in [1, 2] {
            for i in 0..=40 {
                let x = i as f64 / 40.0;
                let s: f64 = spline_basis(q, 5, x).iter().sum();
                assert!((s - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn spline_d_constant_is_positive() {
        let g = Grid::new(128).unwrap();
        let spec = SplineExpSpec {
            q: 2,
            cells: 3,
            theta: vec![0.5, -0.25, 0.0, -0.25],
            bound: 1.0,
        };
        let r = spline_sup_log_ratio(&spec, &g).unwrap();
        assert!(r > 0.0 && r.is_finite());
    }

    fn linear_family(lo: f64, hi: f64) -> SmoothFamilySpec {
        SmoothFamilySpec {
            features: vec![FeatureMap::Power { power: 1 }],
            theta_box: vec![[lo, hi]],
            beta: 1.0,
        }
    }

    #[test]
    fn smooth_family_basics() {
        let g = Grid::new(256).unwrap();
        let spec = linear_family(-1.0, 3.0);
        let u = smooth_family_density(&spec, &[0.0], &g).unwrap();
        assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        let a = smooth_family_density(&spec, &[2.0], &g).unwrap();
        let b = smooth_family_density(&spec, &[2.0], &g).unwrap();
        assert_eq!(hellinger(&a, &b).unwrap(), 0.0);
        assert!(smooth_family_density(&spec, &[3.5], &g).is_err());
        assert!(smooth_family_density(&spec, &[0.0, 0.0], &g).is_err());
    }

    #[test]
    fn smooth_family_separates_parameters() {
        let g = Grid::new(128).unwrap();
        let spec = SmoothFamilySpec {
            features: vec![FeatureMap::Power { power: 1 }, FeatureMap::Cosine { freq: 1 }],
            theta_box: vec![[-1.0, 1.0], [-1.0, 1.0]],
            beta: 1.0,
        };
        let pts: Vec<f64> = (0..5).map(|i| -1.0 + 0.5 * i as f64).collect();
        let thetas: Vec<[f64; 2]> = pts.iter().flat_map(|&a| pts.iter().map(move |&b| [a, b])).collect();
        for t1 in &thetas {
            for t2 in &thetas {
                if t1 == t2 {
                    continue;
                }
                let f1 = smooth_family_density(&spec, t1, &g).unwrap();
                let f2 = smooth_family_density(&spec, t2, &g).unwrap();
                assert!(hellinger(&f1, &f2).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn metric_equivalence_linear_family() {
        let g = Grid::new(256).unwrap();
        let spec = linear_family(-1.0, 1.0);
        let eq = measure_metric_equivalence(&spec, &g, 10_000, 11).unwrap();
        assert!(eq.a1 > 0.0);
        assert!(eq.a1 <= eq.a2);
        // local Fisher scale: H ~ |dtheta| sqrt(Var(x)) / 2 = |dtheta| / (2 sqrt 12)
        assert!(eq.a1 < 1.0 / (2.0 * 12f64.sqrt()) + 1e-3);
        assert!(measure_metric_equivalence(&spec, &g, 99, 0).is_err());
    }

    #[test]
    fn metric_equivalence_flags_duplicate_features() {
        let g = Grid::new(128).unwrap();
        let spec = SmoothFamilySpec {
            features: vec![FeatureMap::Power { power: 1 }, FeatureMap::Power { power: 1 }],
            theta_box: vec![[-1.0, 1.0], [-1.0, 1.0]],
            beta: 1.0,
        };
        assert!(matches!(
            measure_metric_equivalence(&spec, &g, 200, 3),
            Err(Error::DegenerateFamily { .. })
        ));
    }

    #[test]
    fn lift_of_uniform_is_uniform() {
        let g = Grid::new(32).unwrap();
        let fs = lift_sup_cover(&[vec![1.0; 32]], 0.1, &g).unwrap();
        assert!(fs[0].values().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn lift_near_density_stays_close() {
        let g = Grid::new(512).unwrap();
        let gj = GridDensity::from_fn(&g, 0.0, |x| 0.5 + x).unwrap();
        let fj = &lift_sup_cover(&[gj.values().to_vec()], 1e-3, &g).unwrap()[0];
        let h = hstar(&gj, fj).unwrap();
        assert!(h <= 8e-3, "{h}");
        assert!(hellinger(&gj, fj).unwrap() < 1e-3);
    }

    #[test]
    fn lift_rejects_bad_input() {
        let g = Grid::new(4).unwrap();
        assert!(lift_sup_cover(&[], 0.1, &g).is_err());
        assert!(lift_sup_cover(&[vec![1.0; 4]], 0.0, &g).is_err());
        assert!(lift_sup_cover(&[vec![1.0; 4]], 1.5, &g).is_err());
        assert!(lift_sup_cover(&[vec![1.0, -1.0, 1.0, 1.0]], 0.1, &g).is_err());
    }

    #[test]
    fn partition_recipe_examples() {
        let u = set(&[1, 2, 3]);
        let p = cover_to_partition(&[set(&[1, 2]), set(&[2, 3])], &u).unwrap();
        assert_eq!(p.blocks, vec![set(&[1, 2]), set(&[3])]);
        assert!(p.empty.is_empty());

        let disjoint = vec![set(&[1]), set(&[2, 3])];
        assert_eq!(cover_to_partition(&disjoint, &u).unwrap().blocks, disjoint);

        let p = cover_to_partition(&[set(&[1]), set(&[1])], &set(&[1])).unwrap();
        assert_eq!(p.blocks, vec![set(&[1]), set(&[])]);
        assert_eq!(p.empty, vec![1]);

        assert!(matches!(
            cover_to_partition(&[set(&[1])], &set(&[1, 2])),
            Err(Error::NotCovering { missing: 2 })
        ));
    }

    #[test]
    fn partition_recipe_exhaustive_small_covers() {
        // every family of <= 3 subsets of {0..3} that covers {0..3}
        let universe = set(&[0, 1, 2, 3]);
        let subsets: Vec<BTreeSet<usize>> = (0u32..16)
            .map(|mask| (0..4).filter(|i| mask >> i & 1 == 1).collect())
            .collect();
        let mut checked = 0;
        for count in 1..=3usize {
            let total = 16usize.pow(count as u32);
            for code in 0..total {
                let cover: Vec<BTreeSet<usize>> =
                    (0..count).map(|i| subsets[code / 16usize.pow(i as u32) % 16].clone()).collect();
                let union: BTreeSet<usize> = cover.iter().flatten().cloned().collect();
                let result = cover_to_partition(&cover, &universe);
                if union != universe {
                    assert!(result.is_err());
                    continue;
                }
                let p = result.unwrap();
                checked += 1;
                let mut seen = BTreeSet::new();
                for (b, o) in p.blocks.iter().zip(&cover) {
                    assert!(b.is_subset(o));
                    assert!(b.is_disjoint(&seen));
                    seen.extend(b.iter().cloned());
                }
                assert_eq!(seen, universe);
            }
        }
        assert!(checked > 0);
    }
}

//! JSON experiment configuration.
//!
//! Unknown keys are rejected everywhere. Relative input paths (density CSVs,
//! saved priors) are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::curve::DEFAULT_MASS_TARGET;
use super::rates::RateConstants;
use crate::error::{Error, Result};
use crate::families::{
    bernstein_density_with_floor, smooth_family_density, spline_exp_density, BernsteinSpec, SmoothFamilySpec,
    SplineExpSpec,
};
use crate::grid::{Grid, GridDensity, DEFAULT_FLOOR, DEFAULT_M};
use crate::priors::{
    bernstein_prior, sieve_mixture, smooth_lattice_prior, AtomicPrior, SieveSpec, DEFAULT_ATOM_CAP,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Divergence,
    Entropy,
    Lemma1,
    Conditions,
    Curve,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Divergence => "divergence",
            Experiment::Entropy => "entropy",
            Experiment::Lemma1 => "lemma1",
            Experiment::Conditions => "conditions",
            Experiment::Curve => "curve",
        }
    }
}

/// A single density on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Uniform {},
    /// Beta mixture with weights `w_1..w_k`.
    Bernstein { weights: Vec<f64> },
    /// `exp(sum theta_j B_j(x) - c(theta))` with B-splines of order `q`.
    SplineExp {
        q: usize,
        cells: usize,
        theta: Vec<f64>,
        bound: f64,
    },
    /// `exp(theta . phi(x) - c(theta))` for a smooth feature map.
    Smooth { family: SmoothFamilySpec, theta: Vec<f64> },
    /// Nodal values, normalized.
    Values { values: Vec<f64> },
    /// A `node,value` CSV file.
    Csv { path: PathBuf },
}

impl DensitySpec {
    pub fn build(&self, grid: &Grid, floor: f64) -> Result<GridDensity> {
        match self {
            DensitySpec::Uniform {} => Ok(GridDensity::uniform(grid)),
            DensitySpec::Bernstein { weights } => {
                bernstein_density_with_floor(&BernsteinSpec::new(weights.clone())?, grid, floor)
            }
            DensitySpec::SplineExp { q, cells, theta, bound } => spline_exp_density(
                &SplineExpSpec {
                    q: *q,
                    cells: *cells,
                    theta: theta.clone(),
                    bound: *bound,
                },
                grid,
            ),
            DensitySpec::Smooth { family, theta } => smooth_family_density(family, theta, grid),
            DensitySpec::Values { values } => GridDensity::normalize(values.clone(), grid, floor),
            DensitySpec::Csv { path } => {
                let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
                let d = GridDensity::read_csv(file, floor)?;
                grid.check_same(d.grid())?;
                Ok(d)
            }
        }
    }

    fn resolve(&mut self, base: &Path) {
        if let DensitySpec::Csv { path } = self {
            *path = base.join(&*path);
        }
    }
}

/// Weights `rho(k)` on Bernstein orders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhoSpec {
    /// Equal weight on `1..=kmax`.
    Uniform {},
    /// `(1 - ratio) ratio^(k-1)`.
    Geometric { ratio: f64 },
    /// `rho(k) ∝ k^(-c0 k)`, normalized over all orders.
    PowerTail { c0: f64 },
    /// `rho(k) = values[k-1]`.
    Explicit { values: Vec<f64> },
}

impl RhoSpec {
    fn function(&self, kmax: usize) -> Result<Box<dyn Fn(usize) -> f64>> {
        Ok(match self.clone() {
            RhoSpec::Uniform {} => Box::new(move |_| 1.0 / kmax as f64),
            RhoSpec::Geometric { ratio } => {
                if !(ratio > 0.0 && ratio < 1.0) {
                    return Err(Error::InvalidSpec(format!("geometric ratio must lie in (0, 1), got {ratio}")));
                }
                Box::new(move |k| (1.0 - ratio) * ratio.powi(k as i32 - 1))
            }
            RhoSpec::PowerTail { c0 } => {
                if !(c0 > 0.0 && c0.is_finite()) {
                    return Err(Error::InvalidSpec(format!("power-tail c0 must be positive, got {c0}")));
                }
                let raw = move |k: usize| (-(c0 * k as f64 * (k as f64).ln())).exp();
                let total: f64 = (1..=200).map(raw).sum();
                Box::new(move |k| raw(k) / total)
            }
            RhoSpec::Explicit { values } => {
                if values.len() < kmax {
                    return Err(Error::InvalidSpec(format!(
                        "explicit rho has {} values but kmax is {kmax}",
                        values.len()
                    )));
                }
                Box::new(move |k| values[k - 1])
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SieveLevel {
    pub weight: f64,
    pub atoms: Vec<DensitySpec>,
}

fn default_atom_cap() -> usize {
    DEFAULT_ATOM_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// Explicit atoms; equal weights unless given.
    Atoms {
        atoms: Vec<DensitySpec>,
        weights: Option<Vec<f64>>,
        labels: Option<Vec<String>>,
    },
    /// Bernstein densities of orders `1..=kmax` with lattice weights.
    Bernstein {
        kmax: usize,
        weight_cells: usize,
        rho: RhoSpec,
        #[serde(default = "default_atom_cap")]
        atom_cap: usize,
    },
    /// Smooth family on an equally spaced parameter lattice, uniform weights.
    SmoothLattice {
        family: SmoothFamilySpec,
        points_per_axis: usize,
        #[serde(default = "default_atom_cap")]
        atom_cap: usize,
    },
    /// `sum_j a_j mu_j` with `mu_j` uniform on level `j`.
    Sieve {
        levels: Vec<SieveLevel>,
        truncate_at: Option<usize>,
    },
    /// A directory written by [`AtomicPrior::save`].
    Saved { path: PathBuf },
}

impl PriorSpec {
    pub fn build(&self, grid: &Grid, floor: f64) -> Result<AtomicPrior> {
        match self {
            PriorSpec::Atoms { atoms, weights, labels } => {
                let built = atoms.iter().map(|a| a.build(grid, floor)).collect::<Result<Vec<_>>>()?;
                let w = weights.clone().unwrap_or_else(|| vec![1.0; built.len()]);
                AtomicPrior::new(built, w, labels.clone())
            }
            PriorSpec::Bernstein {
                kmax,
                weight_cells,
                rho,
                atom_cap,
            } => {
                let rho = rho.function(*kmax)?;
                Ok(bernstein_prior(&*rho, *kmax, *weight_cells, grid, *atom_cap)?.prior)
            }
            PriorSpec::SmoothLattice {
                family,
                points_per_axis,
                atom_cap,
            } => smooth_lattice_prior(family, *points_per_axis, grid, *atom_cap),
            PriorSpec::Sieve { levels, truncate_at } => {
                let spec = SieveSpec {
                    levels: levels
                        .iter()
                        .map(|l| l.atoms.iter().map(|a| a.build(grid, floor)).collect())
                        .collect::<Result<Vec<_>>>()?,
                    level_weights: levels.iter().map(|l| l.weight).collect(),
                };
                sieve_mixture(&spec, truncate_at.unwrap_or(levels.len()))
            }
            PriorSpec::Saved { path } => {
                let p = AtomicPrior::load(path, floor)?;
                grid.check_same(p.grid())?;
                Ok(p)
            }
        }
    }

    fn resolve(&mut self, base: &Path) {
        match self {
            PriorSpec::Atoms { atoms, .. } => atoms.iter_mut().for_each(|a| a.resolve(base)),
            PriorSpec::Sieve { levels, .. } => levels
                .iter_mut()
                .flat_map(|l| l.atoms.iter_mut())
                .for_each(|a| a.resolve(base)),
            PriorSpec::Saved { path } => *path = base.join(&*path),
            _ => {}
        }
    }
}

fn default_grid_m() -> usize {
    DEFAULT_M
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR
}

fn default_mass_target() -> f64 {
    DEFAULT_MASS_TARGET
}

fn default_reps() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_grid_m")]
    pub grid_m: usize,
    #[serde(default = "default_floor")]
    pub floor: f64,
    pub f0: Option<DensitySpec>,
    pub f: Option<DensitySpec>,
    pub prior: Option<PriorSpec>,
    pub constants: Option<RateConstants>,
    /// Atom indices of the sieve, or the set `G` for entropy; all atoms if absent.
    pub sieve: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub ns: Option<Vec<usize>>,
    pub eps: Option<f64>,
    pub c: Option<f64>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(default = "default_mass_target")]
    pub mass_target: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

fn require<'a, T>(v: &'a Option<T>, key: &str, experiment: Experiment) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::InvalidSpec(format!("`{key}` is required for the {} experiment", experiment.name())))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads and parses a config file; relative input paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in [&mut cfg.f0, &mut cfg.f].into_iter().flatten() {
            d.resolve(base);
        }
        if let Some(p) = cfg.prior.as_mut() {
            p.resolve(base);
        }
        Ok(cfg)
    }

    /// Checks that every key the experiment needs is present and in range.
    pub fn validate(&self) -> Result<()> {
        let e = self.experiment;
        Grid::new(self.grid_m)?;
        if !(self.floor >= 0.0 && self.floor.is_finite()) {
            return Err(Error::InvalidSpec(format!("floor must be finite and nonnegative, got {}", self.floor)));
        }
        let positive = |v: f64, key: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("`{key}` must be positive, got {v}")))
            }
        };
        match e {
            Experiment::Divergence => {
                require(&self.f0, "f0", e)?;
                require(&self.f, "f", e)?;
            }
            Experiment::Entropy => {
                require(&self.prior, "prior", e)?;
                positive(*require(&self.delta, "delta", e)?, "delta")?;
                let a = *require(&self.alpha, "alpha", e)?;
                if !(0.0..=1.0).contains(&a) {
                    return Err(Error::InvalidSpec(format!("`alpha` must lie in [0, 1], got {a}")));
                }
            }
            Experiment::Lemma1 => {
                require(&self.prior, "prior", e)?;
                require(&self.f0, "f0", e)?;
                require(&self.n, "n", e)?;
                positive(*require(&self.eps, "eps", e)?, "eps")?;
                positive(*require(&self.c, "c", e)?, "c")?;
                if self.reps == 0 {
                    return Err(Error::InvalidSpec("`reps` must be at least 1".into()));
                }
            }
            Experiment::Conditions => {
                require(&self.prior, "prior", e)?;
                require(&self.f0, "f0", e)?;
                require(&self.constants, "constants", e)?;
                positive(*require(&self.eps, "eps", e)?, "eps")?;
                if self.n.is_none() && self.ns.is_none() {
                    return Err(Error::InvalidSpec("`n` or `ns` is required for the conditions experiment".into()));
                }
            }
            Experiment::Curve => {
                require(&self.prior, "prior", e)?;
                require(&self.f0, "f0", e)?;
                let ns = require(&self.ns, "ns", e)?;
                if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidSpec("`ns` must be nonempty and strictly increasing".into()));
                }
                if !(self.mass_target > 0.0 && self.mass_target < 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "`mass_target` must lie in (0, 1), got {}",
                        self.mass_target
                    )));
                }
                if self.reps == 0 {
                    return Err(Error::InvalidSpec("`reps` must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid_m)
    }

    /// Sample sizes: `ns` if given, else `[n]`.
    pub fn sample_sizes(&self) -> Vec<usize> {
        self.ns.clone().or(self.n.map(|n| vec![n])).unwrap_or_default()
    }
}

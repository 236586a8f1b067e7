//! Finitely supported priors over grid densities.
//!
//! Every prior here ends up as an [`AtomicPrior`]: a list of density atoms
//! with positive weights. Infinite mixtures are truncated, and the mass that
//! truncation discards is kept in `tail_mass` so that checkers can count it
//! against the sieve.
//!
//! The Bernstein prior discretizes each order's weight simplex on a lattice
//! with `weight_cells` points per axis, i.e. weights in `{0, 1/r, .., 1}` with
//! `r = weight_cells - 1`. The law of the mixing distribution is otherwise
//! free, and a lattice keeps the posterior exactly computable.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::families::{bernstein_density, smooth_from_features, BernsteinSpec, SmoothFamilySpec};
use crate::grid::{Grid, GridDensity};

/// Default bound on the number of atoms any constructor may produce.
pub const DEFAULT_ATOM_CAP: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct AtomicPrior {
    atoms: Vec<GridDensity>,
    weights: Vec<f64>,
    labels: Vec<String>,
    tail_mass: f64,
}

impl AtomicPrior {
    /// Builds a prior from positive weights, renormalizing them to sum to one.
    pub fn new(atoms: Vec<GridDensity>, weights: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty("prior has no atoms"));
        }
        if weights.len() != atoms.len() {
            return Err(Error::LengthMismatch {
                expected: atoms.len(),
                got: weights.len(),
            });
        }
        let grid = atoms[0].grid();
        for a in &atoms[1..] {
            grid.check_same(a.grid())?;
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidArgument(format!("prior weights must be positive, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        let labels = match labels {
            Some(l) if l.len() != atoms.len() => {
                return Err(Error::LengthMismatch {
                    expected: atoms.len(),
                    got: l.len(),
                })
            }
            Some(l) => l,
            None => (0..atoms.len()).map(|i| format!("atom{i}")).collect(),
        };
        Ok(Self {
            atoms,
            weights,
            labels,
            tail_mass: 0.0,
        })
    }

    pub fn with_tail_mass(mut self, tail: f64) -> Self {
        self.tail_mass = tail;
        self
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        self.atoms[0].grid()
    }

    pub fn atoms(&self) -> &[GridDensity] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &GridDensity {
        &self.atoms[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Mass of the infinite mixture discarded by truncation.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Writes `prior.json` plus one `atom_<i>.csv` per atom, or a single
    /// `atoms.csv` with columns `node,<label>...` when `packed`.
    pub fn save(&self, dir: &Path, packed: bool) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = Manifest {
            grid_m: self.grid().m(),
            weights: self.weights.clone(),
            labels: self.labels.clone(),
            tail_mass: self.tail_mass,
            packed,
        };
        let path = dir.join("prior.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        if packed {
            let path = dir.join("atoms.csv");
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = csv::Writer::from_writer(file);
            let mut header = vec!["node".to_string()];
            header.extend(self.labels.iter().cloned());
            w.write_record(&header)?;
            for (i, x) in self.grid().nodes().iter().enumerate() {
                let mut row = vec![x.to_string()];
                row.extend(self.atoms.iter().map(|a| a.value(i).to_string()));
                w.write_record(&row)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        } else {
            for (i, atom) in self.atoms.iter().enumerate() {
                let path = dir.join(format!("atom_{i}.csv"));
                let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                atom.write_csv(file)?;
            }
        }
        Ok(())
    }

    /// Reads a prior written by [`AtomicPrior::save`]; atoms pass through
    /// normalization again with the given floor.
    pub fn load(dir: &Path, floor: f64) -> Result<Self> {
        let path = dir.join("prior.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        let grid = Grid::new(manifest.grid_m)?;
        let atoms = if manifest.packed {
            let path = dir.join("atoms.csv");
            let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            let mut r = csv::Reader::from_reader(file);
            let mut columns = vec![Vec::with_capacity(grid.m()); manifest.weights.len()];
            for row in r.records() {
                let row = row?;
                for (c, col) in columns.iter_mut().enumerate() {
                    let v: f64 = row[c + 1]
                        .parse()
                        .map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))?;
                    col.push(v);
                }
            }
            columns
                .into_iter()
                .map(|c| GridDensity::normalize(c, &grid, floor))
                .collect::<Result<Vec<_>>>()?
        } else {
            (0..manifest.weights.len())
                .map(|i| {
                    let path = dir.join(format!("atom_{i}.csv"));
                    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
                    let d = GridDensity::read_csv(file, floor)?;
                    grid.check_same(d.grid())?;
                    Ok(d)
                })
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self::new(atoms, manifest.weights, Some(manifest.labels))?.with_tail_mass(manifest.tail_mass))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    grid_m: usize,
    weights: Vec<f64>,
    labels: Vec<String>,
    tail_mass: f64,
    packed: bool,
}

/// Equal weights `1/N`; duplicates are kept as separate atoms.
pub fn uniform_atoms(atoms: Vec<GridDensity>) -> Result<AtomicPrior> {
    let n = atoms.len();
    AtomicPrior::new(atoms, vec![1.0; n], None)
}

/// Levels of a sieve prior `sum_j a_j mu_j`, each `mu_j` uniform on its level.
#[derive(Clone, Debug)]
pub struct SieveSpec {
    pub levels: Vec<Vec<GridDensity>>,
    pub level_weights: Vec<f64>,
}

impl SieveSpec {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Empty("sieve has no levels"));
        }
        if self.levels.len() != self.level_weights.len() {
            return Err(Error::LengthMismatch {
                expected: self.levels.len(),
                got: self.level_weights.len(),
            });
        }
        if self.levels.iter().any(|l| l.is_empty()) {
            return Err(Error::Empty("sieve level without atoms"));
        }
        if self.level_weights.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidSpec("sieve level weights must be positive".into()));
        }
        let total: f64 = self.level_weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidSpec(format!("sieve level weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Keeps levels `1..=truncate_at`; atom `i` of level `j` gets `a_j / N_j`
/// before renormalization. The discarded `sum_{j > truncate_at} a_j` is
/// recorded as tail mass.
pub fn sieve_mixture(spec: &SieveSpec, truncate_at: usize) -> Result<AtomicPrior> {
    spec.validate()?;
    if truncate_at == 0 {
        return Err(Error::InvalidArgument("truncation level must be at least 1".into()));
    }
    let keep = truncate_at.min(spec.levels.len());
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut labels = Vec::new();
    for (j, (level, a)) in spec.levels[..keep].iter().zip(&spec.level_weights).enumerate() {
        let each = a / level.len() as f64;
        for (i, atom) in level.iter().enumerate() {
            atoms.push(atom.clone());
            weights.push(each);
            labels.push(format!("level={},atom={}", j + 1, i));
        }
    }
    let tail: f64 = spec.level_weights[keep..].iter().sum();
    Ok(AtomicPrior::new(atoms, weights, Some(labels))?.with_tail_mass(tail))
}

/// A Bernstein prior together with its tail diagnostics.
#[derive(Clone, Debug)]
pub struct BernsteinPrior {
    pub prior: AtomicPrior,
    /// `min_j (-log rho(j)) / (j log j)` over `j = 2..=kmax`; the largest `c0`
    /// with `rho(j) <= j^(-j c0)` on the kept orders.
    pub c0_max: f64,
    /// Atoms per order, index `k - 1`.
    pub order_sizes: Vec<usize>,
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

/// Lattice points of the `k`-part simplex with resolution `r`: `C(r + k - 1, k - 1)`.
pub fn simplex_lattice_size(k: usize, r: usize) -> Option<usize> {
    binomial(r + k - 1, k - 1)
}

fn compositions(total: usize, parts: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(left: usize, parts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for first in (0..=left).rev() {
            cur.push(first);
            rec(left - first, parts - 1, cur, out);
            cur.pop();
        }
    }
    rec(total, parts, &mut Vec::with_capacity(parts), out);
}

/// Order mixture `sum_k rho(k) Pi_k` with each `Pi_k` uniform on the lattice
/// of Bernstein weight vectors of order `k`.
///
/// `rho` is renormalized over `1..=kmax`. When `rho` is a probability on all
/// orders, `1 - sum_{k <= kmax} rho(k)` is recorded as tail mass.
pub fn bernstein_prior(
    rho: &dyn Fn(usize) -> f64,
    kmax: usize,
    weight_cells: usize,
    grid: &Grid,
    atom_cap: usize,
) -> Result<BernsteinPrior> {
    if kmax == 0 {
        return Err(Error::InvalidArgument("kmax must be at least 1".into()));
    }
    if weight_cells < 2 {
        return Err(Error::InvalidArgument("weight_cells must be at least 2".into()));
    }
    let r = weight_cells - 1;
    let mut order_sizes = Vec::with_capacity(kmax);
    let mut count = 0usize;
    for k in 1..=kmax {
        let size = simplex_lattice_size(k, r).unwrap_or(usize::MAX);
        count = count.saturating_add(size);
        if count > atom_cap {
            return Err(Error::AtomCap { count, cap: atom_cap });
        }
        order_sizes.push(size);
    }
    let rhos: Vec<f64> = (1..=kmax).map(rho).collect();
    if let Some((j, v)) = rhos.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidArgument(format!("rho({}) = {v} must be positive", j + 1)));
    }
    let kept: f64 = rhos.iter().sum();
    let c0_max = (2..=kmax)
        .map(|j| -rhos[j - 1].ln() / (j as f64 * (j as f64).ln()))
        .fold(f64::INFINITY, f64::min);

    let mut atoms = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    let mut lattice = Vec::new();
    for k in 1..=kmax {
        lattice.clear();
        compositions(r, k, &mut lattice);
        debug_assert_eq!(lattice.len(), order_sizes[k - 1]);
        let each = rhos[k - 1] / lattice.len() as f64;
        for (cell, point) in lattice.iter().enumerate() {
            let w: Vec<f64> = point.iter().map(|&i| i as f64 / r as f64).collect();
            let spec = BernsteinSpec::new(w)?;
            atoms.push(bernstein_density(&spec, grid)?);
            weights.push(each);
            labels.push(format!("k={k},cell={cell}"));
        }
    }
    let prior = AtomicPrior::new(atoms, weights, Some(labels))?.with_tail_mass((1.0 - kept).max(0.0));
    Ok(BernsteinPrior {
        prior,
        c0_max,
        order_sizes,
    })
}

/// Total weight of atoms satisfying `predicate`.
pub fn prior_mass(prior: &AtomicPrior, predicate: impl Fn(&GridDensity) -> bool) -> f64 {
    prior
        .atoms
        .iter()
        .zip(&prior.weights)
        .filter(|(a, _)| predicate(a))
        .map(|(_, w)| w)
        .sum()
}

/// Uniform prior on the lattice with `points_per_axis` equally spaced values
/// per coordinate of the parameter box, one atom per lattice point.
pub fn smooth_lattice_prior(
    spec: &SmoothFamilySpec,
    points_per_axis: usize,
    grid: &Grid,
    atom_cap: usize,
) -> Result<AtomicPrior> {
    spec.validate()?;
    if points_per_axis < 2 {
        return Err(Error::InvalidArgument("points_per_axis must be at least 2".into()));
    }
    let d = spec.dimension();
    let count = (points_per_axis as u128).pow(d as u32);
    if count > atom_cap as u128 {
        return Err(Error::AtomCap {
            count: count.min(usize::MAX as u128) as usize,
            cap: atom_cap,
        });
    }
    let features = spec.feature_values(grid)?;
    let step = |axis: usize, t: usize| {
        let [lo, hi] = spec.theta_box[axis];
        lo + (hi - lo) * t as f64 / (points_per_axis - 1) as f64
    };
    let mut atoms = Vec::with_capacity(count as usize);
    let mut labels = Vec::with_capacity(count as usize);
    let mut index = vec![0usize; d];
    loop {
        let theta: Vec<f64> = index.iter().enumerate().map(|(a, &t)| step(a, t)).collect();
        atoms.push(smooth_from_features(&features, &theta, grid)?);
        let coords: Vec<String> = theta.iter().map(|t| format!("{t}")).collect();
        labels.push(format!("theta=({})", coords.join(",")));
        let mut axis = d;
        loop {
            if axis == 0 {
                let n = atoms.len();
                return AtomicPrior::new(atoms, vec![1.0; n], Some(labels));
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < points_per_axis {
                break;
            }
            index[axis] = 0;
        }
    }
}

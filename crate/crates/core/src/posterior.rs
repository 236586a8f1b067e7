//! Exact posterior updating over an [`AtomicPrior`].
//!
//! Observations are mapped to their grid cell and every atom is evaluated at
//! the cell midpoint, which is the likelihood of the discretized model. All
//! arithmetic stays in log space: per-atom log-likelihood sums plus a
//! max-shifted log-sum-exp for normalization, so large `n` and large atom
//! counts cannot overflow. States are immutable; `update` returns a new one.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridDensity};
use crate::priors::AtomicPrior;

/// Observations in `[0, 1]` together with their grid cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    m: usize,
    values: Vec<f64>,
    cells: Vec<usize>,
    seed: Option<u64>,
}

impl Sample {
    pub fn new(values: Vec<f64>, grid: &Grid) -> Result<Self> {
        if let Some(x) = values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidArgument(format!("observation {x} lies outside [0, 1]")));
        }
        let cells = values.iter().map(|&x| grid.cell_of(x)).collect();
        Ok(Self {
            m: grid.m(),
            values,
            cells,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Observations `start..end`, keeping the seed lineage.
    pub fn slice(&self, start: usize, end: usize) -> Sample {
        Sample {
            m: self.m,
            values: self.values[start..end].to_vec(),
            cells: self.cells[start..end].to_vec(),
            seed: self.seed,
        }
    }
}

/// Inverse-CDF sampling on the grid: a cell by cumulative mass, then a
/// uniform position inside it. Deterministic in `seed`.
pub fn sample_iid(f0: &GridDensity, n: usize, seed: u64) -> Sample {
    let grid = f0.grid();
    let w = grid.weight();
    let mut cum = Vec::with_capacity(grid.m());
    let mut acc = 0.0;
    for v in f0.values() {
        acc += v * w;
        cum.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = grid.m() as f64;
    let mut values = Vec::with_capacity(n);
    let mut cells = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * total;
        let cell = cum.partition_point(|&c| c <= u).min(grid.m() - 1);
        let offset: f64 = rng.gen();
        values.push(((cell as f64 + offset) / m).min(1.0));
        cells.push(cell);
    }
    Sample {
        m: grid.m(),
        values,
        cells,
        seed: Some(seed),
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + xs.map(|x| (x - top).exp()).sum::<f64>().ln()
}

/// Posterior over the atoms of a prior after `n` observations.
#[derive(Clone, Debug)]
pub struct PosteriorState<'a> {
    prior: &'a AtomicPrior,
    loglik: Vec<f64>,
    log_post: Vec<f64>,
    observed: Vec<usize>,
    seeds: Vec<u64>,
}

impl<'a> PosteriorState<'a> {
    pub fn new(prior: &'a AtomicPrior) -> Self {
        let log_post = prior.weights().iter().map(|w| w.ln()).collect();
        Self {
            prior,
            loglik: vec![0.0; prior.len()],
            log_post,
            observed: Vec::new(),
            seeds: Vec::new(),
        }
    }

    pub fn prior(&self) -> &'a AtomicPrior {
        self.prior
    }

    pub fn n(&self) -> usize {
        self.observed.len()
    }

    /// `sum_i log f_j(X_i)` per atom.
    pub fn loglik(&self) -> &[f64] {
        &self.loglik
    }

    /// Normalized log posterior weights.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_post
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_post.iter().map(|l| l.exp()).collect()
    }

    pub fn observed_cells(&self) -> &[usize] {
        &self.observed
    }

    pub fn seed_lineage(&self) -> &[u64] {
        &self.seeds
    }

    /// Adds the sample's log-likelihood to every atom, one observation at a
    /// time in sample order; splitting a sample across calls gives the same sums.
    pub fn update(&self, sample: &Sample) -> Result<PosteriorState<'a>> {
        if sample.m != self.prior.grid().m() {
            return Err(Error::GridMismatch {
                left: self.prior.grid().m(),
                right: sample.m,
            });
        }
        let cells = sample.cells();
        let loglik: Vec<f64> = self
            .prior
            .atoms()
            .par_iter()
            .zip(self.loglik.par_iter())
            .map(|(atom, &start)| {
                let v = atom.values();
                cells.iter().fold(start, |acc, &c| acc + v[c].ln())
            })
            .collect();
        let joint: Vec<f64> = self
            .prior
            .weights()
            .iter()
            .zip(&loglik)
            .map(|(w, l)| w.ln() + l)
            .collect();
        let norm = log_sum_exp(joint.iter().cloned());
        if norm == f64::NEG_INFINITY {
            let observation = cells
                .iter()
                .position(|&c| self.prior.atoms().iter().all(|a| a.value(c) == 0.0))
                .map(|i| self.n() + i)
                .unwrap_or(self.n());
            return Err(Error::PosteriorUndefined { observation });
        }
        let log_post = joint.iter().map(|j| j - norm).collect();
        let mut observed = self.observed.clone();
        observed.extend_from_slice(cells);
        let mut seeds = self.seeds.clone();
        seeds.extend(sample.seed());
        Ok(PosteriorState {
            prior: self.prior,
            loglik,
            log_post,
            observed,
            seeds,
        })
    }

    /// Writes the `atom_label,log_weight` snapshot table.
    pub fn write_snapshot_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["atom_label", "log_weight"])?;
        for (label, lw) in self.prior.labels().iter().zip(&self.log_post) {
            w.write_record([label.as_str(), &lw.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn snapshot_header(&self) -> SnapshotHeader {
        SnapshotHeader {
            n: self.n(),
            atoms: self.prior.len(),
            seeds: self.seeds.clone(),
        }
    }
}

/// JSON header accompanying a snapshot table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SnapshotHeader {
    pub n: usize,
    pub atoms: usize,
    /// Seeds of the samples folded in, in order.
    pub seeds: Vec<u64>,
}

/// Posterior mass of the atoms satisfying `predicate`.
pub fn posterior_mass(state: &PosteriorState<'_>, predicate: impl Fn(&GridDensity) -> bool) -> f64 {
    state
        .prior
        .atoms()
        .iter()
        .zip(&state.log_post)
        .filter(|(a, _)| predicate(a))
        .map(|(_, l)| l.exp())
        .sum()
}

/// `log integral R_n(f) Pi(df)` with `R_n(f) = prod f(X_i) / f0(X_i)`.
///
/// Infinite when `f0` vanishes at an observed cell.
pub fn marginal_likelihood_ratio(state: &PosteriorState<'_>, f0: &GridDensity) -> Result<f64> {
    state.prior.grid().check_same(f0.grid())?;
    let log_f0: f64 = state.observed.iter().map(|&c| f0.value(c).ln()).sum();
    let joint = state
        .prior
        .weights()
        .iter()
        .zip(&state.loglik)
        .map(|(w, l)| w.ln() + l);
    let log_marginal = log_sum_exp(joint);
    if log_f0 == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(log_marginal - log_f0)
}

/// Posterior-weighted mixture of the atoms in `block`, renormalized to the block.
pub fn predictive_density(state: &PosteriorState<'_>, block: &[usize]) -> Result<GridDensity> {
    if block.is_empty() {
        return Err(Error::Empty("predictive block"));
    }
    if let Some(&bad) = block.iter().find(|&&i| i >= state.prior.len()) {
        return Err(Error::InvalidArgument(format!("atom index {bad} out of range")));
    }
    let top = block
        .iter()
        .map(|&i| state.log_post[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::ZeroBlockMass);
    }
    let grid = state.prior.grid();
    let mut values = vec![0.0; grid.m()];
    let mut total = 0.0;
    let mut floor = f64::INFINITY;
    for &i in block {
        let w = (state.log_post[i] - top).exp();
        total += w;
        let atom = state.prior.atom(i);
        floor = floor.min(atom.floor());
        for (v, a) in values.iter_mut().zip(atom.values()) {
            *v += w * a;
        }
    }
    for v in values.iter_mut() {
        *v /= total;
    }
    GridDensity::normalize(values, grid, floor.min(f64::MAX))
}

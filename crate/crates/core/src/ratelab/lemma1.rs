//! Monte Carlo check of the small-ball bound
//! `P( integral R_n dPi <= e^(-n eps^2 (3 + 2c)) Pi(W_eps) ) <= e^(-n eps^2 c)`.

use rayon::prelude::*;
use serde::Serialize;

use super::neighborhoods::{NeighborhoodKind, NeighborhoodSpec};
use crate::error::{Error, Result};
use crate::grid::GridDensity;
use crate::posterior::{marginal_likelihood_ratio, sample_iid, PosteriorState};
use crate::priors::{prior_mass, AtomicPrior};

pub const MIN_REPS: usize = 1000;

/// `-n eps^2 (3 + 2c) + log Pi(W_eps)`.
pub fn lemma1_threshold(n: usize, eps: f64, c: f64, prior_w_mass: f64) -> f64 {
    -(n as f64) * eps * eps * (3.0 + 2.0 * c) + prior_w_mass.ln()
}

/// `e^(-n eps^2 c)`.
pub fn lemma1_bound(n: usize, eps: f64, c: f64) -> f64 {
    (-(n as f64) * eps * eps * c).exp()
}

/// `Pi(W_eps)` over the prior's atoms.
pub fn wstar_mass(prior: &AtomicPrior, f0: &GridDensity, eps: f64) -> Result<f64> {
    let w = NeighborhoodSpec::new(NeighborhoodKind::Wstar, eps)?;
    Ok(prior_mass(prior, |f| w.contains(f0, f)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Lemma1Draw {
    pub seed: u64,
    /// `log integral R_n dPi`; `-inf` when every atom vanishes at some observation.
    #[serde(with = "crate::real")]
    pub log_ratio: f64,
    pub event: bool,
}

/// One replication: `n` draws from `f0` under `seed`.
pub fn lemma1_draw(prior: &AtomicPrior, f0: &GridDensity, n: usize, threshold: f64, seed: u64) -> Result<Lemma1Draw> {
    let sample = sample_iid(f0, n, seed);
    let log_ratio = match PosteriorState::new(prior).update(&sample) {
        Ok(state) => marginal_likelihood_ratio(&state, f0)?,
        Err(Error::PosteriorUndefined { .. }) => f64::NEG_INFINITY,
        Err(e) => return Err(e),
    };
    Ok(Lemma1Draw {
        seed,
        log_ratio,
        event: log_ratio <= threshold,
    })
}

/// Decision rule: the empirical frequency may exceed the bound by three
/// binomial standard errors `sqrt(b (1 - b) / reps)` evaluated at the bound.
pub fn lemma1_pass(events: usize, reps: usize, bound: f64) -> (f64, f64, bool) {
    let p = events as f64 / reps as f64;
    let b = bound.min(1.0);
    let sigma = (b * (1.0 - b) / reps as f64).sqrt();
    (p, sigma, p <= bound + 3.0 * sigma)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Lemma1Outcome {
    pub n: usize,
    pub eps: f64,
    pub c: f64,
    pub reps: usize,
    pub prior_w_mass: f64,
    #[serde(with = "crate::real")]
    pub threshold: f64,
    pub events: usize,
    pub empirical_prob: f64,
    pub bound: f64,
    pub sigma: f64,
    pub pass: bool,
    /// `Pi(W_eps) = 0`: the bound says nothing.
    pub vacuous: bool,
}

/// Replication `i` uses seed `seed + i`.
pub fn verify_lemma1(
    prior: &AtomicPrior,
    f0: &GridDensity,
    n: usize,
    eps: f64,
    c: f64,
    reps: usize,
    seed: u64,
) -> Result<Lemma1Outcome> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
    }
    if reps < MIN_REPS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_REPS} replications, got {reps}")));
    }
    prior.grid().check_same(f0.grid())?;
    let pw = wstar_mass(prior, f0, eps)?;
    let threshold = lemma1_threshold(n, eps, c, pw);
    let bound = lemma1_bound(n, eps, c);
    let draws: Vec<Lemma1Draw> = (0..reps as u64)
        .into_par_iter()
        .map(|i| lemma1_draw(prior, f0, n, threshold, seed.wrapping_add(i)))
        .collect::<Result<_>>()?;
    let events = draws.iter().filter(|d| d.event).count();
    let (empirical_prob, sigma, pass) = lemma1_pass(events, reps, bound);
    Ok(Lemma1Outcome {
        n,
        eps,
        c,
        reps,
        prior_w_mass: pw,
        threshold,
        events,
        empirical_prob,
        bound,
        sigma,
        pass,
        vacuous: pw == 0.0,
    })
}

//! Covering numbers `N(delta, G)` and the Hausdorff alpha-entropy
//! `J(delta, G, alpha) = log min sum_j Pi(B_j)^alpha` over finite atom sets.
//!
//! Balls are closed Hellinger balls `H(center, .) <= delta`. Candidate centers
//! are all atoms of the prior, not only those in `G`; restricting a covering of
//! a larger set to a subset then stays a covering, which makes `J` monotone in
//! `G` exactly. Because centers are atoms rather than arbitrary densities, the
//! computed `J` upper-bounds the continuum one.
//!
//! A block's contribution is `mass^alpha` with `0^0 = 1`, so at `alpha = 0`
//! every nonempty block counts once and `J = log N`.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::divergences::hellinger_unchecked;
use crate::error::{Error, Result};
use crate::families::cover_to_partition;
use crate::priors::AtomicPrior;

/// Largest `|G|` solved exactly by set-cover branch and bound.
pub const EXACT_COVER_LIMIT: usize = 25;
/// Largest `|G|` solved exactly by the partition dynamic program.
pub const EXACT_PARTITION_LIMIT: usize = 12;

const AUDIT_SLACK: f64 = 1e-10;
const ANNEAL_SEED: u64 = 0x5eed_a11e;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Greedy,
}

/// Which solver to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Solver {
    /// Exact below the size limits, greedy above.
    #[default]
    Auto,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Block {
    /// Prior atom index of the ball center.
    pub center: usize,
    /// Prior atom indices, ascending.
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringReport {
    pub delta: f64,
    pub alpha: f64,
    pub blocks: Vec<Block>,
    pub covering_number: usize,
    /// `log sum_j Pi(B_j)^alpha` of the blocks; `-inf` for an empty set.
    #[serde(with = "crate::real")]
    pub j_value: f64,
    pub method: Method,
    pub optimal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabeledBlock {
    pub center: String,
    pub members: Vec<String>,
}

/// [`CoveringReport`] with atom labels in place of indices.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabeledReport {
    pub delta: f64,
    pub alpha: f64,
    pub blocks: Vec<LabeledBlock>,
    pub covering_number: usize,
    #[serde(with = "crate::real")]
    pub j_value: f64,
    pub method: Method,
    pub optimal: bool,
}

impl CoveringReport {
    pub fn labeled(&self, prior: &AtomicPrior) -> LabeledReport {
        let name = |i: usize| prior.labels()[i].clone();
        LabeledReport {
            delta: self.delta,
            alpha: self.alpha,
            blocks: self
                .blocks
                .iter()
                .map(|b| LabeledBlock {
                    center: name(b.center),
                    members: b.members.iter().map(|&i| name(i)).collect(),
                })
                .collect(),
            covering_number: self.covering_number,
            j_value: self.j_value,
            method: self.method,
            optimal: self.optimal,
        }
    }
}

fn contribution(mass: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        mass.powf(alpha)
    }
}

/// The atoms of `G` and, for every candidate center, which of them it covers.
struct Instance {
    g: Vec<usize>,
    mass: Vec<f64>,
    /// `cands[i]`: centers within delta of `g[i]`.
    cands: Vec<Vec<usize>>,
    /// Distinct member sets (positions into `g`) with one center each.
    balls: Vec<(usize, Vec<usize>)>,
}

impl Instance {
    fn new(atoms: &[usize], prior: &AtomicPrior, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        let g: Vec<usize> = atoms.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        if let Some(&bad) = g.iter().find(|&&i| i >= prior.len()) {
            return Err(Error::InvalidArgument(format!(
                "atom index {bad} out of range for a prior of {} atoms",
                prior.len()
            )));
        }
        let w = prior.grid().weight();
        let cands: Vec<Vec<usize>> = g
            .par_iter()
            .map(|&a| {
                let va = prior.atom(a).values();
                (0..prior.len())
                    .filter(|&c| hellinger_unchecked(va, prior.atom(c).values(), w) <= delta)
                    .collect()
            })
            .collect();
        let mut by_center: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, cs) in cands.iter().enumerate() {
            for &c in cs {
                by_center.entry(c).or_default().push(i);
            }
        }
        let mut seen: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for (c, members) in by_center {
            seen.entry(members).or_insert(c);
        }
        let balls = seen.into_iter().map(|(m, c)| (c, m)).collect();
        let mass = g.iter().map(|&a| prior.weights()[a]).collect();
        Ok(Self { g, mass, cands, balls })
    }

    fn mask_balls(&self) -> Vec<(usize, u32)> {
        self.balls
            .iter()
            .map(|(c, m)| (*c, m.iter().fold(0u32, |acc, &i| acc | (1 << i))))
            .collect()
    }

    /// Turns chosen balls (in order) into disjoint blocks.
    fn blocks_from_cover(&self, chosen: &[usize]) -> Result<Vec<Block>> {
        let cover: Vec<BTreeSet<usize>> = chosen.iter().map(|&b| self.balls[b].1.iter().cloned().collect()).collect();
        let universe: BTreeSet<usize> = (0..self.g.len()).collect();
        let part = cover_to_partition(&cover, &universe)?;
        Ok(part
            .blocks
            .into_iter()
            .zip(chosen)
            .filter(|(b, _)| !b.is_empty())
            .map(|(b, &ball)| Block {
                center: self.balls[ball].0,
                members: b.into_iter().map(|i| self.g[i]).collect(),
            })
            .collect())
    }

    fn objective(&self, blocks: &[Block], prior: &AtomicPrior, alpha: f64) -> f64 {
        blocks
            .iter()
            .map(|b| contribution(b.members.iter().map(|&a| prior.weights()[a]).sum(), alpha))
            .sum()
    }

    /// Largest-uncovered-first; ties go to the earlier ball.
    fn greedy_cover(&self) -> Vec<usize> {
        let mut covered = vec![false; self.g.len()];
        let mut left = self.g.len();
        let mut chosen = Vec::new();
        while left > 0 {
            let (best, gain) = self
                .balls
                .iter()
                .enumerate()
                .map(|(b, (_, m))| (b, m.iter().filter(|&&i| !covered[i]).count()))
                .fold((0, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
            debug_assert!(gain > 0);
            for &i in &self.balls[best].1 {
                if !covered[i] {
                    covered[i] = true;
                    left -= 1;
                }
            }
            chosen.push(best);
        }
        chosen
    }

    fn exact_cover(&self) -> Vec<usize> {
        let masks = self.mask_balls();
        // Drop balls contained in another ball.
        let keep: Vec<usize> = (0..masks.len())
            .filter(|&i| {
                !(0..masks.len()).any(|j| {
                    j != i && masks[i].1 & masks[j].1 == masks[i].1 && (masks[i].1 != masks[j].1 || j < i)
                })
            })
            .collect();
        let full = if self.g.len() == 32 { u32::MAX } else { (1u32 << self.g.len()) - 1 };
        let mut best = self.greedy_cover();
        let mut stack = Vec::new();
        cover_search(&masks, &keep, full, &mut stack, &mut best);
        best
    }
}

fn cover_search(masks: &[(usize, u32)], keep: &[usize], uncovered: u32, stack: &mut Vec<usize>, best: &mut Vec<usize>) {
    if uncovered == 0 {
        if stack.len() < best.len() {
            *best = stack.clone();
        }
        return;
    }
    let widest = keep
        .iter()
        .map(|&b| (masks[b].1 & uncovered).count_ones())
        .max()
        .unwrap_or(0);
    let need = uncovered.count_ones().div_ceil(widest.max(1)) as usize;
    if stack.len() + need >= best.len() {
        return;
    }
    // Branch on the uncovered element with the fewest balls through it.
    let mut pivot = 0;
    let mut fewest = usize::MAX;
    let mut bits = uncovered;
    while bits != 0 {
        let e = bits.trailing_zeros();
        bits &= bits - 1;
        let k = keep.iter().filter(|&&b| masks[b].1 >> e & 1 == 1).count();
        if k < fewest {
            fewest = k;
            pivot = e;
        }
    }
    let mut options: Vec<usize> = keep.iter().cloned().filter(|&b| masks[b].1 >> pivot & 1 == 1).collect();
    options.sort_by_key(|&b| std::cmp::Reverse((masks[b].1 & uncovered).count_ones()));
    for b in options {
        stack.push(b);
        cover_search(masks, keep, uncovered & !masks[b].1, stack, best);
        stack.pop();
    }
}

fn empty_report(delta: f64, alpha: f64) -> CoveringReport {
    CoveringReport {
        delta,
        alpha,
        blocks: Vec::new(),
        covering_number: 0,
        j_value: f64::NEG_INFINITY,
        method: Method::Exact,
        optimal: true,
    }
}

/// Minimal number of closed delta-balls centered at prior atoms covering `atoms`.
///
/// The report carries the induced partition and `j_value = log N`.
pub fn covering_number(atoms: &[usize], prior: &AtomicPrior, delta: f64) -> Result<CoveringReport> {
    covering_number_with(atoms, prior, delta, Solver::Auto)
}

pub fn covering_number_with(atoms: &[usize], prior: &AtomicPrior, delta: f64, solver: Solver) -> Result<CoveringReport> {
    let inst = Instance::new(atoms, prior, delta)?;
    if inst.g.is_empty() {
        return Ok(empty_report(delta, 0.0));
    }
    let exact = solver == Solver::Auto && inst.g.len() <= EXACT_COVER_LIMIT;
    let chosen = if exact { inst.exact_cover() } else { inst.greedy_cover() };
    let blocks = inst.blocks_from_cover(&chosen)?;
    let n = blocks.len();
    Ok(CoveringReport {
        delta,
        alpha: 0.0,
        blocks,
        covering_number: n,
        j_value: (n as f64).ln(),
        method: if exact { Method::Exact } else { Method::Greedy },
        optimal: exact,
    })
}

/// `J(delta, G, alpha)`: the least `log sum_j Pi(B_j)^alpha` over partitions of
/// `atoms` into blocks that each fit in one delta-ball.
pub fn hausdorff_entropy(atoms: &[usize], prior: &AtomicPrior, delta: f64, alpha: f64) -> Result<CoveringReport> {
    hausdorff_entropy_with(atoms, prior, delta, alpha, Solver::Auto)
}

pub fn hausdorff_entropy_with(
    atoms: &[usize],
    prior: &AtomicPrior,
    delta: f64,
    alpha: f64,
    solver: Solver,
) -> Result<CoveringReport> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let inst = Instance::new(atoms, prior, delta)?;
    if inst.g.is_empty() {
        return Ok(empty_report(delta, alpha));
    }
    let exact = solver == Solver::Auto && inst.g.len() <= EXACT_PARTITION_LIMIT;
    let cover_exact = solver == Solver::Auto && inst.g.len() <= EXACT_COVER_LIMIT;
    let cover = if cover_exact { inst.exact_cover() } else { inst.greedy_cover() };
    let covering_number = cover.len();
    let (blocks, total) = if exact {
        partition_dp(&inst, alpha)
    } else {
        let start = inst.blocks_from_cover(&cover)?;
        anneal(&inst, prior, alpha, &start)
    };
    Ok(CoveringReport {
        delta,
        alpha,
        blocks,
        covering_number,
        j_value: total.ln(),
        method: if exact { Method::Exact } else { Method::Greedy },
        optimal: exact,
    })
}

/// Subset dynamic program over `2^|G|` masks; each step peels off a feasible
/// block holding the lowest remaining atom.
fn partition_dp(inst: &Instance, alpha: f64) -> (Vec<Block>, f64) {
    let k = inst.g.len();
    let size = 1usize << k;
    let mut center = vec![usize::MAX; size];
    for (c, m) in inst.mask_balls() {
        let m = m as usize;
        if center[m] == usize::MAX || c < center[m] {
            center[m] = c;
        }
    }
    // Every subset of a ball is feasible with the same center.
    for bit in 0..k {
        for mask in (0..size).rev() {
            if mask >> bit & 1 == 1 {
                let sub = mask ^ (1 << bit);
                if center[mask] < center[sub] {
                    center[sub] = center[mask];
                }
            }
        }
    }
    let mut mass = vec![0.0; size];
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        mass[mask] = mass[mask & (mask - 1)] + inst.mass[low];
    }
    let cost: Vec<f64> = (0..size)
        .map(|m| if center[m] == usize::MAX { f64::INFINITY } else { contribution(mass[m], alpha) })
        .collect();
    let mut best = vec![f64::INFINITY; size];
    let mut pick = vec![0usize; size];
    best[0] = 0.0;
    for mask in 1..size {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let block = sub | low;
            let v = cost[block] + best[mask ^ block];
            if v < best[mask] {
                best[mask] = v;
                pick[mask] = block;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    let mut blocks = Vec::new();
    let mut mask = size - 1;
    while mask != 0 {
        let block = pick[mask];
        blocks.push(Block {
            center: center[block],
            members: (0..k).filter(|i| block >> i & 1 == 1).map(|i| inst.g[i]).collect(),
        });
        mask ^= block;
    }
    (blocks, best[size - 1])
}

/// Simulated annealing over atom-to-center assignments, started from `start`.
fn anneal(inst: &Instance, prior: &AtomicPrior, alpha: f64, start: &[Block]) -> (Vec<Block>, f64) {
    let pos: BTreeMap<usize, usize> = inst.g.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let mut assign = vec![0usize; inst.g.len()];
    for b in start {
        for a in &b.members {
            assign[pos[a]] = b.center;
        }
    }
    let mut load: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (i, &c) in assign.iter().enumerate() {
        let e = load.entry(c).or_insert((0.0, 0));
        e.0 += inst.mass[i];
        e.1 += 1;
    }
    let term = |m: f64, count: usize| if count == 0 { 0.0 } else { contribution(m, alpha) };
    let mut current: f64 = load.values().map(|&(m, c)| term(m, c)).sum();
    let initial = inst.objective(start, prior, alpha);
    let mut best_total = initial;
    let mut best_assign = assign.clone();

    let movable: Vec<usize> = (0..inst.g.len()).filter(|&i| inst.cands[i].len() > 1).collect();
    if !movable.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(ANNEAL_SEED);
        let iters = (400 * inst.g.len()).min(400_000);
        let t0 = 0.05 * current.max(1e-300);
        let t1 = 1e-6 * t0;
        for step in 0..iters {
            let t = t0 * (t1 / t0).powf(step as f64 / iters as f64);
            let i = movable[rng.gen_range(0..movable.len())];
            let to = inst.cands[i][rng.gen_range(0..inst.cands[i].len())];
            let from = assign[i];
            if to == from {
                continue;
            }
            let (mf, cf) = load[&from];
            let (mt, ct) = load.get(&to).cloned().unwrap_or((0.0, 0));
            let w = inst.mass[i];
            let delta = term(mf - w, cf - 1) + term(mt + w, ct + 1) - term(mf, cf) - term(mt, ct);
            if delta <= 0.0 || rng.gen::<f64>() < (-delta / t).exp() {
                assign[i] = to;
                if cf == 1 {
                    load.remove(&from);
                } else {
                    load.insert(from, (mf - w, cf - 1));
                }
                load.insert(to, (mt + w, ct + 1));
                current += delta;
                if current < best_total - 1e-12 {
                    // Recompute to keep drift out of the comparison.
                    current = load.values().map(|&(m, c)| term(m, c)).sum();
                    if current < best_total {
                        best_total = current;
                        best_assign = assign.clone();
                    }
                }
            }
        }
    }
    let mut grouped: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in best_assign.iter().enumerate() {
        grouped.entry(c).or_default().push(inst.g[i]);
    }
    let blocks: Vec<Block> = grouped
        .into_iter()
        .map(|(center, members)| Block { center, members })
        .collect();
    let total = inst.objective(&blocks, prior, alpha);
    (blocks, total)
}

/// Checks `Pi(G)^alpha <= e^J <= Pi(G)^alpha N^(1-alpha)` with a `1e-10` slack.
///
/// Only exact reports qualify; the greedy value is an upper bound on `J` and
/// need not respect the lower side.
pub fn sandwich_audit(report: &CoveringReport, prior: &AtomicPrior, atoms: &[usize]) -> Result<bool> {
    if report.method != Method::Exact {
        return Err(Error::InexactReport);
    }
    let g: BTreeSet<usize> = atoms.iter().cloned().collect();
    if g.is_empty() {
        return Ok(report.j_value == f64::NEG_INFINITY);
    }
    let n = covering_number(atoms, prior, report.delta)?;
    if n.method != Method::Exact {
        return Err(Error::TooLargeForExact {
            size: g.len(),
            limit: EXACT_COVER_LIMIT,
        });
    }
    let a = report.alpha;
    let pg: f64 = g.iter().map(|&i| prior.weights()[i]).sum();
    let lower = contribution(pg, a);
    let upper = lower * (n.covering_number as f64).powf(1.0 - a);
    let ej = report.j_value.exp();
    Ok(lower <= ej + AUDIT_SLACK && ej <= upper + AUDIT_SLACK)
}

/// `e^J(g1 u g2) <= e^J(g1) + e^J(g2)` and `J(g1) <= J(g1 u g2)`, both exact.
pub fn subadditivity_check(prior: &AtomicPrior, g1: &[usize], g2: &[usize], delta: f64, alpha: f64) -> Result<bool> {
    let union: BTreeSet<usize> = g1.iter().chain(g2).cloned().collect();
    if union.len() > EXACT_PARTITION_LIMIT {
        return Err(Error::TooLargeForExact {
            size: union.len(),
            limit: EXACT_PARTITION_LIMIT,
        });
    }
    let union: Vec<usize> = union.into_iter().collect();
    let j = |set: &[usize]| hausdorff_entropy(set, prior, delta, alpha).map(|r| r.j_value.exp());
    let (e1, e2, eu) = (j(g1)?, j(g2)?, j(&union)?);
    Ok(eu <= e1 + e2 + AUDIT_SLACK && e1 <= eu + AUDIT_SLACK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergences::hellinger;
    use crate::grid::{Grid, GridDensity};
    use crate::priors::uniform_atoms;

    /// `a L + (1-a) R` with `L`, `R` the normalized half-interval indicators;
    /// two members have `H^2 = 2 - 2 (sqrt(ab) + sqrt((1-a)(1-b)))`.
    fn halves(g: &Grid, a: f64) -> GridDensity {
        GridDensity::from_fn(g, 0.0, |x| if x < 0.5 { 2.0 * a } else { 2.0 * (1.0 - a) }).unwrap()
    }

    fn at_angle(g: &Grid, theta: f64) -> GridDensity {
        halves(g, theta.cos().powi(2))
    }

    /// Atoms on the quarter circle; `H = 2 sin(|t1 - t2| / 2)`.
    fn arc_prior(angles: &[f64], weights: Vec<f64>) -> AtomicPrior {
        let g = Grid::new(8).unwrap();
        let atoms = angles.iter().map(|&t| at_angle(&g, t)).collect();
        AtomicPrior::new(atoms, weights, None).unwrap()
    }

    fn brute_force(prior: &AtomicPrior, g: &[usize], delta: f64, alpha: f64) -> f64 {
        fn go(
            i: usize,
            g: &[usize],
            blocks: &mut Vec<Vec<usize>>,
            ok: &dyn Fn(&[usize]) -> bool,
            score: &dyn Fn(&[Vec<usize>]) -> f64,
            best: &mut f64,
        ) {
            if i == g.len() {
                if blocks.iter().all(|b| ok(b)) {
                    *best = best.min(score(blocks));
                }
                return;
            }
            for b in 0..blocks.len() {
                blocks[b].push(g[i]);
                go(i + 1, g, blocks, ok, score, best);
                blocks[b].pop();
            }
            blocks.push(vec![g[i]]);
            go(i + 1, g, blocks, ok, score, best);
            blocks.pop();
        }
        let ok = |b: &[usize]| {
            (0..prior.len()).any(|c| b.iter().all(|&a| hellinger(prior.atom(c), prior.atom(a)).unwrap() <= delta))
        };
        let score = |bs: &[Vec<usize>]| {
            bs.iter()
                .map(|b| {
                    let m: f64 = b.iter().map(|&a| prior.weights()[a]).sum();
                    if alpha == 0.0 { 1.0 } else { m.powf(alpha) }
                })
                .sum::<f64>()
        };
        let mut best = f64::INFINITY;
        go(0, g, &mut Vec::new(), &ok, &score, &mut best);
        best.ln()
    }

    #[test]
    fn single_atom_and_empty_set() {
        let p = arc_prior(&[0.3], vec![1.0]);
        for d in [1e-6, 0.5, 2.0] {
            let r = covering_number(&[0], &p, d).unwrap();
            assert_eq!(r.covering_number, 1);
            assert_eq!(r.j_value, 0.0);
        }
        let r = covering_number(&[], &p, 0.1).unwrap();
        assert_eq!(r.covering_number, 0);
        assert_eq!(r.j_value, f64::NEG_INFINITY);
        let r = hausdorff_entropy(&[], &p, 0.1, 0.5).unwrap();
        assert_eq!(r.j_value, f64::NEG_INFINITY);
        assert!(r.blocks.is_empty());
        assert!(covering_number(&[0], &p, 0.0).is_err());
        assert!(covering_number(&[3], &p, 0.1).is_err());
    }

    #[test]
    fn two_atoms_at_half_distance() {
        let g = Grid::new(8).unwrap();
        let a = halves(&g, 1.0);
        let b = halves(&g, 0.875 * 0.875);
        assert!((hellinger(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        let p = uniform_atoms(vec![a, b]).unwrap();
        assert_eq!(covering_number(&[0, 1], &p, 0.6).unwrap().covering_number, 1);
        assert_eq!(covering_number(&[0, 1], &p, 0.3).unwrap().covering_number, 2);
    }

    #[test]
    fn center_outside_the_set_can_merge() {
        // 0 and 2 are 2 sin(0.2) ~ 0.397 apart; atom 1 sits midway.
        let p = arc_prior(&[0.2, 0.4, 0.6], vec![1.0; 3]);
        let r = covering_number(&[0, 2], &p, 0.25).unwrap();
        assert_eq!(r.covering_number, 1);
        assert_eq!(r.blocks[0].center, 1);
    }

    #[test]
    fn alpha_zero_is_log_n_and_one_ball_collapses() {
        let angles: Vec<f64> = (0..9).map(|i| 0.15 * i as f64).collect();
        let p = arc_prior(&angles, (1..=9).map(|i| i as f64).collect());
        let all: Vec<usize> = (0..9).collect();
        let n = covering_number(&all, &p, 0.2).unwrap();
        let j0 = hausdorff_entropy(&all, &p, 0.2, 0.0).unwrap();
        assert!((j0.j_value - (n.covering_number as f64).ln()).abs() < 1e-12);
        assert_eq!(j0.covering_number, n.covering_number);

        let r = hausdorff_entropy(&[3, 4, 5], &p, 0.5, 0.7).unwrap();
        let pg: f64 = [3, 4, 5].iter().map(|&i| p.weights()[i]).sum();
        assert_eq!(r.blocks.len(), 1);
        assert!((r.j_value.exp() - pg.powf(0.7)).abs() < 1e-14);
    }

    #[test]
    fn eight_atoms_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let angles: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.5)).collect();
            let w: Vec<f64> = (0..8).map(|_| rng.gen_range(0.01..1.0)).collect();
            let p = arc_prior(&angles, w);
            let all: Vec<usize> = (0..8).collect();
            for alpha in [0.0, 0.3, 1.0] {
                let r = hausdorff_entropy(&all, &p, 0.25, alpha).unwrap();
                assert!(r.optimal);
                let oracle = brute_force(&p, &all, 0.25, alpha);
                assert!((r.j_value - oracle).abs() < 1e-12, "{} vs {oracle}", r.j_value);
                assert!(sandwich_audit(&r, &p, &all).unwrap());
            }
        }
    }

    #[test]
    fn report_invariants_hold() {
        let angles: Vec<f64> = (0..11).map(|i| 0.13 * i as f64).collect();
        let p = arc_prior(&angles, vec![1.0; 11]);
        let g: Vec<usize> = vec![0, 2, 3, 5, 7, 8, 10];
        for solver in [Solver::Auto, Solver::Greedy] {
            let r = hausdorff_entropy_with(&g, &p, 0.3, 0.5, solver).unwrap();
            let mut seen: Vec<usize> = r.blocks.iter().flat_map(|b| b.members.clone()).collect();
            seen.sort();
            assert_eq!(seen, g);
            for b in &r.blocks {
                for &a in &b.members {
                    assert!(hellinger(p.atom(b.center), p.atom(a)).unwrap() <= 0.3);
                }
            }
        }
    }

    #[test]
    fn two_clusters_are_strictly_inside_the_sandwich() {
        // Two tight clusters far apart, masses 0.6 and 0.4.
        let p = arc_prior(
            &[0.1, 0.12, 0.14, 1.3, 1.32, 1.34],
            vec![0.2, 0.2, 0.2, 0.1, 0.15, 0.15],
        );
        let all: Vec<usize> = (0..6).collect();
        let r = hausdorff_entropy(&all, &p, 0.1, 0.5).unwrap();
        assert_eq!(r.covering_number, 2);
        assert!(sandwich_audit(&r, &p, &all).unwrap());
        let expected = 0.6f64.sqrt() + 0.4f64.sqrt();
        assert!((r.j_value.exp() - expected).abs() < 1e-12);
        assert!(r.j_value.exp() < 2f64.sqrt() - 1e-3);
    }

    #[test]
    fn alpha_one_hits_prior_mass_with_one_ball() {
        let p = arc_prior(&[0.1, 0.11, 0.9], vec![0.3, 0.3, 0.4]);
        let r = hausdorff_entropy(&[0, 1], &p, 0.1, 1.0).unwrap();
        assert!((r.j_value.exp() - 0.6).abs() < 1e-14);
        assert!(sandwich_audit(&r, &p, &[0, 1]).unwrap());
    }

    #[test]
    fn greedy_reports_refuse_the_audit() {
        let p = arc_prior(&[0.1, 0.5], vec![1.0, 1.0]);
        let r = hausdorff_entropy_with(&[0, 1], &p, 0.1, 0.5, Solver::Greedy).unwrap();
        assert!(!r.optimal);
        assert!(matches!(sandwich_audit(&r, &p, &[0, 1]), Err(Error::InexactReport)));
        assert!(hausdorff_entropy(&[0], &p, 0.1, 1.5).is_err());
    }

    #[test]
    fn greedy_never_beats_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let angles: Vec<f64> = (0..15).map(|_| rng.gen_range(0.0..1.5)).collect();
            let w: Vec<f64> = (0..15).map(|_| rng.gen_range(0.01..1.0)).collect();
            let p = arc_prior(&angles, w);
            let all: Vec<usize> = (0..15).collect();
            let e = covering_number(&all, &p, 0.2).unwrap();
            let gr = covering_number_with(&all, &p, 0.2, Solver::Greedy).unwrap();
            assert!(e.optimal);
            assert!(gr.covering_number >= e.covering_number);
            let sub: Vec<usize> = (0..10).collect();
            let je = hausdorff_entropy(&sub, &p, 0.2, 0.5).unwrap();
            let jg = hausdorff_entropy_with(&sub, &p, 0.2, 0.5, Solver::Greedy).unwrap();
            assert!(jg.j_value >= je.j_value - 1e-12);
        }
    }

    #[test]
    fn larger_sets_fall_back_to_greedy() {
        let angles: Vec<f64> = (0..30).map(|i| 0.05 * i as f64).collect();
        let p = arc_prior(&angles, vec![1.0; 30]);
        let all: Vec<usize> = (0..30).collect();
        let r = covering_number(&all, &p, 0.12).unwrap();
        assert_eq!(r.method, Method::Greedy);
        assert!(!r.optimal);
        let r = hausdorff_entropy(&all[..20], &p, 0.12, 0.5).unwrap();
        assert_eq!(r.method, Method::Greedy);
        assert!(r.j_value <= (r.covering_number as f64).ln() + 1e-12);
        assert!(matches!(
            subadditivity_check(&p, &all[..10], &all[10..20], 0.1, 0.5),
            Err(Error::TooLargeForExact { size: 20, .. })
        ));
    }

    #[test]
    fn subadditivity_cases() {
        let p = arc_prior(&[0.1, 0.12, 0.3, 1.2, 1.25, 1.4], vec![0.1, 0.2, 0.1, 0.3, 0.2, 0.1]);
        assert!(subadditivity_check(&p, &[0, 1, 2], &[0, 1, 2], 0.1, 0.5).unwrap());
        // Clusters sit more than 2 delta apart: no ball spans both.
        let e = |s: &[usize]| hausdorff_entropy(s, &p, 0.1, 0.5).unwrap().j_value.exp();
        assert!((e(&[0, 1, 2, 3, 4, 5]) - e(&[0, 1, 2]) - e(&[3, 4, 5])).abs() < 1e-12);
        assert!(subadditivity_check(&p, &[0, 1, 2], &[3, 4, 5], 0.1, 0.5).unwrap());
    }

    #[test]
    fn j_shrinks_as_delta_grows() {
        let angles: Vec<f64> = (0..10).map(|i| 0.16 * i as f64).collect();
        let p = arc_prior(&angles, (1..=10).map(|i| i as f64).collect());
        let all: Vec<usize> = (0..10).collect();
        let mut last = f64::INFINITY;
        for d in [0.05, 0.1, 0.2, 0.4, 0.8, 1.5] {
            let j = hausdorff_entropy(&all, &p, d, 0.4).unwrap().j_value;
            assert!(j <= last + 1e-12);
            last = j;
        }
    }

    #[test]
    fn labeled_json() {
        let p = arc_prior(&[0.1, 0.12], vec![1.0, 1.0]);
        let r = hausdorff_entropy(&[0, 1], &p, 0.1, 0.5).unwrap();
        let v = serde_json::to_value(r.labeled(&p)).unwrap();
        assert_eq!(v["method"], "exact");
        assert_eq!(v["blocks"][0]["members"], serde_json::json!(["atom0", "atom1"]));
        let e = hausdorff_entropy(&[], &p, 0.1, 0.5).unwrap();
        assert_eq!(serde_json::to_value(&e).unwrap()["j_value"], "-inf");
    }
}

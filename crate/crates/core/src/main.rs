use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;

use postrate::ratelab::{
    read_records, run_divergence, run_entropy, run_experiment, write_summary, Experiment, ExperimentConfig,
};
use postrate::Error;

const COMMON_KEYS: &str = "\
Config keys shared by every subcommand:
  experiment    which computation the file describes; must match the subcommand
  grid_m        number of midpoint cells m on [0,1]; every density is a vector of m
                nodal values integrated with weight 1/m (default 1024)
  floor         lower clamp applied before normalizing tabulated densities
                (default 1e-10)
  seed          base seed; replication i uses seed + i (default 0)
  output_path   where data is written (overridden by --out)

Density specs (f0, f, prior atoms) are objects tagged by \"kind\":
  uniform {}                          the constant density 1
  bernstein {weights}                 sum_j w_j beta(x; j, k-j+1), k = len(weights)
  spline_exp {q, cells, theta, bound} exp(sum theta_j B_j(x) - c(theta)), B-splines of
                                      order q in {1,2} on equal cells, sum theta_j = 0
  smooth {family, theta}              exp(theta . phi(x) - c(theta)); family holds
                                      features, theta_box and beta
  values {values}                     nodal values, normalized
  csv {path}                          a node,value file

Prior specs are tagged by \"kind\":
  atoms {atoms, weights?, labels?}    explicit atoms, equal weights by default
  bernstein {kmax, weight_cells, rho} Bernstein densities of orders 1..kmax with
                                      lattice weights; rho weights the orders
                                      (uniform, geometric {ratio}, power_tail {c0}
                                      with rho(k) ∝ k^(-c0 k), explicit {values})
  smooth_lattice {family, points_per_axis}
                                      uniform prior on a parameter lattice
  sieve {levels, truncate_at?}        sum_j a_j mu_j, mu_j uniform on level j;
                                      dropped levels become tail mass
  saved {path}                        a directory written by the library

Almost-sure and in-probability conclusions are asymptotic. These tools check
their finite-n ingredients only.";

const DIVERGENCE_KEYS: &str = "\
Keys:
  f0   the true density; the first argument of the directional H* and of K, V
  f    the comparison density
Output: JSON with hellinger, hstar, kl, v, sup_ratio and whether a floor clamped.";

const ENTROPY_KEYS: &str = "\
Keys:
  prior  the atoms and their masses Pi
  sieve  atom indices forming the set G (default: all atoms)
  delta  Hellinger radius of the covering balls, delta > 0
  alpha  exponent in J = log min sum_j Pi(B_j)^alpha, 0 <= alpha <= 1
Output: JSON with the optimal partition for J, the minimal cover N(delta, G), and the
audit of Pi(G)^alpha <= e^J <= Pi(G)^alpha N^(1-alpha) when both are exact.";

const LEMMA1_KEYS: &str = "\
Keys:
  f0     sampling density of the observations
  prior  prior Pi over densities
  n      sample size
  eps    radius of W_eps = {f : H*(f0, f) <= eps}
  c      exponent in the bound e^(-n eps^2 c), c > 0
  reps   number of replications
Each replication draws n observations and records whether
log integral R_n dPi <= -n eps^2 (3 + 2c) + log Pi(W_eps).
Output: one JSONL record per replication.";

const CONDITIONS_KEYS: &str = "\
Keys:
  f0         the true density
  prior      prior Pi over densities
  sieve      atom indices of the sieve G_n (default: all atoms)
  eps        the rate eps_n at which the conditions are evaluated
  n or ns    sample size(s)
  constants  {alpha, c0, c1, c2, c3, which}; which selects the result:
             theorem1 (entropy, sieve remainder, H*-ball mass; almost sure),
             corollary1, theorem2 (K-V ball; in probability),
             theorem3 (shell entropies against the K-V ball),
             theorem4 (shell entropies against the H*-ball)
Each condition is evaluated at the given n on the log scale; sequence conditions
become \"the n-th term is at most 1\".
Output: one JSONL record per n.";

const CURVE_KEYS: &str = "\
Keys:
  f0           the true density
  prior        prior Pi over densities
  ns           strictly increasing sample sizes
  mass_target  posterior mass allowed outside the radius (default 0.5)
  reps         number of replications
For each replication one sample of size max(ns) is drawn and its prefixes give the
posterior at each n; the radius is the smallest rho with Pi_n(H(f0, f) > rho) at most
mass_target.
Output: one JSONL record per (replication, n).";

#[derive(Parser)]
#[command(name = "postrate", version, about = "Posterior contraction laboratory for densities on [0, 1]")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// Override the base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of grid cells
    #[arg(long = "grid-m")]
    grid_m: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Hellinger, H*, Kullback-Leibler, V and sup-ratio between two densities
    #[command(after_help = format!("{DIVERGENCE_KEYS}\n\n{COMMON_KEYS}"))]
    Divergence(Common),
    /// Covering number and Hausdorff alpha-entropy of an atom set
    #[command(after_help = format!("{ENTROPY_KEYS}\n\n{COMMON_KEYS}"))]
    Entropy(Common),
    /// Monte Carlo check of the small-ball probability bound
    #[command(after_help = format!("{LEMMA1_KEYS}\n\n{COMMON_KEYS}"))]
    Lemma1(Common),
    /// Hypotheses of a rate result at one sample size, with its rate multiplier
    #[command(after_help = format!("{CONDITIONS_KEYS}\n\n{COMMON_KEYS}"))]
    Conditions(Common),
    /// Posterior radius against sample size
    #[command(after_help = format!("{CURVE_KEYS}\n\n{COMMON_KEYS}"))]
    Curve(Common),
    /// Aggregate a JSONL record file into its summary CSV
    #[command(after_help = "\
Summary columns:
  curve        n,reps,median_radius,q25,q75
  lemma1       n,eps,c,empirical_prob,bound,pass
  conditions   n,eps,n_eps2,j_value,remainder_mass,neighborhood_mass,rate_multiplier,all_hold")]
    Report {
        /// JSONL records
        #[arg(long = "in")]
        input: PathBuf,
        /// Summary CSV
        #[arg(long)]
        out: PathBuf,
    },
}

/// Whether an error is the user's input (exit 1) rather than a failure while running (exit 2).
fn is_validation(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<Error>(),
        Some(
            Error::InvalidSpec(_)
                | Error::InvalidArgument(_)
                | Error::GridTooSmall { .. }
                | Error::LengthMismatch { .. }
                | Error::BadValue { .. }
                | Error::AllZero
                | Error::Empty(_)
                | Error::AtomCap { .. }
                | Error::GridMismatch { .. }
        )
    )
}

fn load(common: &Common, expected: Experiment) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if cfg.experiment != expected {
        return Err(Error::InvalidSpec(format!(
            "config describes a {} experiment, not {}",
            cfg.experiment.name(),
            expected.name()
        ))
        .into());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = common.grid_m {
        cfg.grid_m = m;
    }
    if let Some(o) = &common.out {
        cfg.output_path = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Divergence(c) => {
            let cfg = load(&c, Experiment::Divergence)?;
            let report = run_divergence(&cfg)?;
            write_output(cfg.output_path.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))
        }
        Command::Entropy(c) => {
            let cfg = load(&c, Experiment::Entropy)?;
            let out = run_entropy(&cfg)?;
            info!(
                "J = {} ({:?}), N = {}",
                out.entropy.j_value, out.entropy.method, out.cover.covering_number
            );
            write_output(cfg.output_path.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))
        }
        Command::Lemma1(c) => records(load(&c, Experiment::Lemma1)?),
        Command::Conditions(c) => records(load(&c, Experiment::Conditions)?),
        Command::Curve(c) => records(load(&c, Experiment::Curve)?),
        Command::Report { input, out } => {
            let recs = read_records(&input)?;
            let mut buf = Vec::new();
            write_summary(&recs, &mut buf)?;
            fs::write(&out, buf).with_context(|| format!("writing {}", out.display()))?;
            info!("{} records summarized into {}", recs.len(), out.display());
            Ok(())
        }
    }
}

fn records(cfg: ExperimentConfig) -> anyhow::Result<()> {
    let start = std::time::Instant::now();
    let recs = run_experiment(&cfg)?;
    info!(
        "{}: {} records in {:.2?}",
        cfg.experiment.name(),
        recs.len(),
        start.elapsed()
    );
    if cfg.output_path.is_none() {
        let mut text = String::new();
        for r in &recs {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        write_output(None, &text)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_validation(&e) { 1 } else { 2 })
        }
    }
}

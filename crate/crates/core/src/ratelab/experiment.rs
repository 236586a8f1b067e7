//! Running configured experiments and aggregating their JSONL records.
//!
//! Replication `i` always uses seed `seed + i`, so a run can be resumed: the
//! complete records already on disk are kept, a torn final line is dropped,
//! and only the missing replications are computed and appended. Replications
//! run in parallel in batches; a single writer appends each batch in order.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::conditions::check_conditions;
use super::config::{Experiment, ExperimentConfig};
use super::curve::{atom_distances, curve_replication, quantile};
use super::lemma1::{lemma1_bound, lemma1_draw, lemma1_pass, lemma1_threshold, wstar_mass};
use crate::divergences::{divergence_report, DivergenceReport};
use crate::entropy::{covering_number, hausdorff_entropy, sandwich_audit, LabeledReport, Method, EXACT_COVER_LIMIT};
use crate::error::{Error, Result};

const BATCH: usize = 64;

/// One replication's measurements, one JSONL line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentRecord {
    pub seed: u64,
    pub n: usize,
    pub eps: Option<f64>,
    pub experiment: Experiment,
    #[serde(with = "crate::real::map")]
    pub quantities: BTreeMap<String, f64>,
}

fn record(seed: u64, n: usize, eps: Option<f64>, experiment: Experiment, q: &[(&str, f64)]) -> ExperimentRecord {
    ExperimentRecord {
        seed,
        n,
        eps,
        experiment,
        quantities: q.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

type Replication<'a> = Box<dyn Fn(u64) -> Result<Vec<ExperimentRecord>> + Sync + 'a>;

/// Runs a `lemma1`, `conditions` or `curve` experiment. With `output_path`
/// set, records are appended there (resuming if the file already has some);
/// the full record list is returned either way.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let exp = cfg.experiment;
    if matches!(exp, Experiment::Divergence | Experiment::Entropy) {
        return Err(Error::InvalidSpec(format!(
            "the {} experiment produces a report, not replication records",
            exp.name()
        )));
    }
    let f0 = cfg.f0.as_ref().unwrap().build(&grid, cfg.floor)?;
    let prior = cfg.prior.as_ref().unwrap().build(&grid, cfg.floor)?;
    let base = cfg.seed;

    let (reps, per_rep, run): (usize, usize, Replication) = match exp {
        Experiment::Lemma1 => {
            let (n, eps, c) = (cfg.n.unwrap(), cfg.eps.unwrap(), cfg.c.unwrap());
            let pw = wstar_mass(&prior, &f0, eps)?;
            let threshold = lemma1_threshold(n, eps, c, pw);
            let bound = lemma1_bound(n, eps, c);
            let (prior, f0) = (&prior, &f0);
            (
                cfg.reps,
                1,
                Box::new(move |seed| {
                    let d = lemma1_draw(prior, f0, n, threshold, seed)?;
                    Ok(vec![record(
                        seed,
                        n,
                        Some(eps),
                        exp,
                        &[
                            ("log_ratio", d.log_ratio),
                            ("threshold", threshold),
                            ("event", flag(d.event)),
                            ("prior_w_mass", pw),
                            ("bound", bound),
                            ("c", c),
                        ],
                    )])
                }),
            )
        }
        Experiment::Curve => {
            let ns = cfg.ns.clone().unwrap();
            let dist = atom_distances(&prior, &f0)?;
            let target = cfg.mass_target;
            let k = ns.len();
            let (prior, f0) = (&prior, &f0);
            (
                cfg.reps,
                k,
                Box::new(move |seed| {
                    let radii = curve_replication(prior, f0, &dist, &ns, target, seed)?;
                    Ok(ns
                        .iter()
                        .zip(radii)
                        .map(|(&n, r)| record(seed, n, None, exp, &[("radius", r), ("mass_target", target)]))
                        .collect())
                }),
            )
        }
        Experiment::Conditions => {
            let ns = cfg.sample_sizes();
            let eps = cfg.eps.unwrap();
            let constants = cfg.constants.unwrap();
            let sieve: Vec<usize> = cfg.sieve.clone().unwrap_or_else(|| (0..prior.len()).collect());
            let k = ns.len();
            let (prior, f0) = (&prior, &f0);
            (
                1,
                k,
                Box::new(move |seed| {
                    ns.iter()
                        .map(|&n| {
                            let r = check_conditions(prior, f0, &sieve, eps, &constants, n)?;
                            let mut q: Vec<(String, f64)> = vec![
                                ("n_eps2".into(), r.n_eps2),
                                ("j_value".into(), r.j_value),
                                ("remainder_mass".into(), r.remainder_mass),
                                ("neighborhood_mass".into(), r.neighborhood_mass),
                                ("rate_multiplier".into(), r.rate_multiplier),
                                ("constants_valid".into(), flag(r.constants_valid)),
                                ("all_hold".into(), flag(r.all_hold)),
                            ];
                            for c in &r.conditions {
                                q.push((format!("{}.log_lhs", c.name), c.log_lhs));
                                q.push((format!("{}.log_rhs", c.name), c.log_rhs));
                                q.push((format!("{}.holds", c.name), flag(c.holds)));
                            }
                            Ok(ExperimentRecord {
                                seed,
                                n,
                                eps: Some(eps),
                                experiment: exp,
                                quantities: q.into_iter().collect(),
                            })
                        })
                        .collect()
                }),
            )
        }
        Experiment::Divergence | Experiment::Entropy => unreachable!(),
    };

    let mut records = Vec::new();
    let mut sink = None;
    let mut done = 0;
    if let Some(path) = &cfg.output_path {
        let (existing, complete) = resume(path, exp, base, per_rep)?;
        done = complete.min(reps);
        records = existing;
        records.truncate(done * per_rep);
        let file = fs::OpenOptions::new()
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| Error::io(path.to_path_buf(), e))?;
        sink = Some((path, file));
    }
    while done < reps {
        let end = (done + BATCH).min(reps);
        let batch: Vec<Vec<ExperimentRecord>> = (done..end)
            .into_par_iter()
            .map(|i| run(base.wrapping_add(i as u64)))
            .collect::<Result<_>>()?;
        for rs in batch {
            if let Some((path, file)) = sink.as_mut() {
                let mut text = String::new();
                for r in &rs {
                    text.push_str(&serde_json::to_string(r)?);
                    text.push('\n');
                }
                file.write_all(text.as_bytes()).map_err(|e| Error::io(path.to_path_buf(), e))?;
            }
            records.extend(rs);
        }
        if let Some((path, file)) = sink.as_mut() {
            file.flush().map_err(|e| Error::io(path.to_path_buf(), e))?;
        }
        done = end;
    }
    Ok(records)
}

/// Keeps the complete replications already in `path` and truncates the file
/// after the last one. Returns the kept records and their replication count.
fn resume(path: &Path, exp: Experiment, base: u64, per_rep: usize) -> Result<(Vec<ExperimentRecord>, usize)> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut lines: Vec<&str> = text.split_inclusive('\n').collect();
    if lines.last().is_some_and(|l| !l.ends_with('\n')) {
        lines.pop();
    }
    let mut records = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let r: ExperimentRecord = serde_json::from_str(line).map_err(|e| Error::Record {
            path: path.to_path_buf(),
            record: i,
            message: e.to_string(),
        })?;
        let expected = base.wrapping_add((i / per_rep) as u64);
        if r.experiment != exp || r.seed != expected {
            return Err(Error::Record {
                path: path.to_path_buf(),
                record: i,
                message: format!(
                    "found {} record with seed {}, expected {} with seed {expected}; the file belongs to a different run",
                    r.experiment.name(),
                    r.seed,
                    exp.name()
                ),
            });
        }
        records.push(r);
    }
    let complete = records.len() / per_rep;
    let keep = complete * per_rep;
    let kept_bytes: usize = lines[..keep].iter().map(|l| l.len()).sum();
    if kept_bytes != text.len() {
        let file = fs::OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
        file.set_len(kept_bytes as u64).map_err(|e| Error::io(path.to_path_buf(), e))?;
    }
    records.truncate(keep);
    Ok((records, complete))
}

/// Parses a JSONL record file.
pub fn read_records(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Record {
                path: path.to_path_buf(),
                record: i,
                message: e.to_string(),
            })
        })
        .collect()
}

fn quantity(r: &ExperimentRecord, key: &str, index: usize) -> Result<f64> {
    r.quantities.get(key).cloned().ok_or_else(|| Error::Record {
        path: "<records>".into(),
        record: index,
        message: format!("missing quantity `{key}`"),
    })
}

/// Writes the summary table for a homogeneous record list:
/// `n,reps,median_radius,q25,q75` for curves, `n,eps,c,empirical_prob,bound,pass`
/// for the small-ball bound, and one row per `n` for condition checks.
pub fn write_summary<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let Some(first) = records.first() else {
        return Err(Error::Empty("record file"));
    };
    let exp = first.experiment;
    if let Some(i) = records.iter().position(|r| r.experiment != exp) {
        return Err(Error::Record {
            path: "<records>".into(),
            record: i,
            message: "records from different experiments cannot share a summary".into(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    match exp {
        Experiment::Curve => {
            w.write_record(["n", "reps", "median_radius", "q25", "q75"])?;
            let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for (i, r) in records.iter().enumerate() {
                by_n.entry(r.n).or_default().push(quantity(r, "radius", i)?);
            }
            for (n, mut radii) in by_n {
                radii.sort_by(f64::total_cmp);
                w.write_record([
                    n.to_string(),
                    radii.len().to_string(),
                    quantile(&radii, 0.5).to_string(),
                    quantile(&radii, 0.25).to_string(),
                    quantile(&radii, 0.75).to_string(),
                ])?;
            }
        }
        Experiment::Lemma1 => {
            w.write_record(["n", "eps", "c", "empirical_prob", "bound", "pass"])?;
            let mut groups: BTreeMap<(usize, u64, u64), (usize, usize, f64, f64, f64)> = BTreeMap::new();
            for (i, r) in records.iter().enumerate() {
                let eps = r.eps.unwrap_or(f64::NAN);
                let c = quantity(r, "c", i)?;
                let g = groups
                    .entry((r.n, eps.to_bits(), c.to_bits()))
                    .or_insert((0, 0, quantity(r, "bound", i)?, eps, c));
                g.0 += 1;
                g.1 += (quantity(r, "event", i)? != 0.0) as usize;
            }
            for ((n, _, _), (reps, events, bound, eps, c)) in groups {
                let (p, _, pass) = lemma1_pass(events, reps, bound);
                w.write_record([
                    n.to_string(),
                    eps.to_string(),
                    c.to_string(),
                    p.to_string(),
                    bound.to_string(),
                    pass.to_string(),
                ])?;
            }
        }
        Experiment::Conditions => {
            let cols = [
                "n_eps2",
                "j_value",
                "remainder_mass",
                "neighborhood_mass",
                "rate_multiplier",
                "all_hold",
            ];
            let mut header = vec!["n", "eps"];
            header.extend(cols);
            w.write_record(&header)?;
            for (i, r) in records.iter().enumerate() {
                let mut row = vec![r.n.to_string(), r.eps.unwrap_or(f64::NAN).to_string()];
                for c in cols {
                    row.push(quantity(r, c, i)?.to_string());
                }
                w.write_record(&row)?;
            }
        }
        Experiment::Divergence | Experiment::Entropy => {
            return Err(Error::InvalidSpec(format!("no summary table for {} records", exp.name())));
        }
    }
    w.flush().map_err(|e| Error::io("<summary>", e))?;
    Ok(())
}

/// All five divergences of `(f0, f)`.
pub fn run_divergence(cfg: &ExperimentConfig) -> Result<DivergenceReport> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let f0 = cfg.f0.as_ref().unwrap().build(&grid, cfg.floor)?;
    let f = cfg.f.as_ref().unwrap().build(&grid, cfg.floor)?;
    divergence_report(&f0, &f)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyOutput {
    pub entropy: LabeledReport,
    pub cover: LabeledReport,
    /// Sandwich inequality audit; absent when either solver was not exact.
    pub sandwich: Option<bool>,
}

/// `J(delta, G, alpha)` and `N(delta, G)` for the configured atom set.
pub fn run_entropy(cfg: &ExperimentConfig) -> Result<EntropyOutput> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let prior = cfg.prior.as_ref().unwrap().build(&grid, cfg.floor)?;
    let g: Vec<usize> = cfg.sieve.clone().unwrap_or_else(|| (0..prior.len()).collect());
    let (delta, alpha) = (cfg.delta.unwrap(), cfg.alpha.unwrap());
    let j = hausdorff_entropy(&g, &prior, delta, alpha)?;
    let n = covering_number(&g, &prior, delta)?;
    let sandwich = if j.method == Method::Exact && g.len() <= EXACT_COVER_LIMIT {
        Some(sandwich_audit(&j, &prior, &g)?)
    } else {
        None
    };
    Ok(EntropyOutput {
        entropy: j.labeled(&prior),
        cover: n.labeled(&prior),
        sandwich,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lemma1_config(reps: usize, out: Option<&Path>) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::from_json(
            r#"{"experiment":"lemma1","grid_m":64,
                "f0":{"kind":"uniform"},
                "prior":{"kind":"atoms","atoms":[{"kind":"uniform"},{"kind":"values","values":[1,2]}]},
                "n":20,"eps":0.3,"c":1,"seed":500}"#,
        )
        .unwrap();
        cfg.grid_m = 2;
        cfg.reps = reps;
        cfg.output_path = out.map(Path::to_path_buf);
        cfg
    }

    #[test]
    fn seed_schedule_and_determinism() {
        let a = run_experiment(&lemma1_config(10, None)).unwrap();
        assert_eq!(a.len(), 10);
        let seeds: Vec<u64> = a.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, (500..510).collect::<Vec<_>>());
        let b = run_experiment(&lemma1_config(1, None)).unwrap();
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn resume_after_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.jsonl");
        let full = run_experiment(&lemma1_config(10, Some(&path))).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 10);

        // cut in the middle of the fifth line
        let cut: usize = text.split_inclusive('\n').take(4).map(str::len).sum::<usize>() + 7;
        fs::write(&path, &text[..cut]).unwrap();
        let resumed = run_experiment(&lemma1_config(10, Some(&path))).unwrap();
        assert_eq!(resumed, full);
        assert_eq!(fs::read_to_string(&path).unwrap(), text);

        // an already complete file is left alone
        run_experiment(&lemma1_config(10, Some(&path))).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), text);
    }

    #[test]
    fn foreign_files_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("runs.jsonl");
        run_experiment(&lemma1_config(3, Some(&path))).unwrap();
        let mut other = lemma1_config(5, Some(&path));
        other.seed = 1;
        assert!(matches!(run_experiment(&other), Err(Error::Record { record: 0, .. })));
        fs::write(&path, "not json\n").unwrap();
        assert!(matches!(run_experiment(&lemma1_config(3, Some(&path))), Err(Error::Record { .. })));
    }

    #[test]
    fn curve_records_and_summary() {
        let mut cfg = ExperimentConfig::from_json(
            r#"{"experiment":"curve","grid_m":16,"f0":{"kind":"uniform"},
                "prior":{"kind":"atoms","atoms":[{"kind":"uniform"},
                    {"kind":"smooth","family":{"features":[{"kind":"power","power":1}],"theta_box":[[-2,2]]},"theta":[1]}]},
                "ns":[4,16,64],"reps":5,"seed":3}"#,
        )
        .unwrap();
        let recs = run_experiment(&cfg).unwrap();
        assert_eq!(recs.len(), 15);
        let mut buf = Vec::new();
        write_summary(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,reps,median_radius,q25,q75");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("4,5,"));
        cfg.reps = 0;
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn lemma1_summary_groups() {
        let recs = run_experiment(&lemma1_config(20, None)).unwrap();
        let mut buf = Vec::new();
        write_summary(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,eps,c,empirical_prob,bound,pass");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("20,0.3,1,"));
    }

    #[test]
    fn conditions_experiment() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment":"conditions","grid_m":32,"f0":{"kind":"uniform"},
                "prior":{"kind":"atoms","atoms":[{"kind":"uniform"},{"kind":"values","values":[1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,1,2,2,2,2,2,2,2,2,2,2,2,2,2,2,2,2]}]},
                "constants":{"alpha":0.5,"c1":1,"c2":1,"c3":1,"which":"theorem1"},
                "eps":0.2,"ns":[10,100]}"#,
        )
        .unwrap();
        let recs = run_experiment(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs[0].quantities.contains_key("entropy.holds"));
        let mut buf = Vec::new();
        write_summary(&recs, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    #[test]
    fn divergence_and_entropy_reports() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment":"divergence","grid_m":4096,"f0":{"kind":"uniform"},"f":{"kind":"bernstein","weights":[0,1]}}"#,
        )
        .unwrap();
        let r = run_divergence(&cfg).unwrap();
        assert!((r.hellinger - 0.33820).abs() < 1e-3);

        let cfg = ExperimentConfig::from_json(
            r#"{"experiment":"entropy","grid_m":64,
                "prior":{"kind":"bernstein","kmax":3,"weight_cells":3,"rho":{"kind":"uniform"}},
                "delta":0.2,"alpha":0.5}"#,
        )
        .unwrap();
        let out = run_entropy(&cfg).unwrap();
        assert_eq!(out.sandwich, Some(true));
        assert!(out.entropy.j_value <= (out.cover.covering_number as f64).ln() + 1e-12);
    }
}

//! Random sampling patterns and Monte-Carlo completability sweeps.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checker::{check_finite_pattern, check_unique_pattern, CheckerLimits, FiniteVerdict, RequiredCount, UniqueVerdict};
use crate::constraint::check_assumption1;
use crate::error::{Error, Result};
use crate::oracle::{full_rank, reduced_rank, variety_rank, OracleOptions};
use crate::pattern::{MixedRadix, SamplingPattern};
use crate::seed::{derive_seed, rng_at};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub dims: Vec<usize>,
    /// Per-cell inclusion probability.
    pub p: f64,
    pub seed: u64,
    /// Top up sparse rows of the last matricization to `rank` entries.
    pub enforce_assumption1: bool,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generated {
    pub pattern: SamplingPattern,
    /// Entries added by the top-up.
    pub forced: usize,
}

/// Bernoulli(p) pattern over all cells, in mixed-radix order.
pub fn generate_pattern(cfg: &GenConfig) -> Result<Generated> {
    if !(0.0..=1.0).contains(&cfg.p) {
        return Err(Error::InvalidParameter(format!("p must lie in [0, 1], got {}", cfg.p)));
    }
    if cfg.dims.is_empty() || cfg.dims.contains(&0) {
        return Err(Error::InvalidShape(format!("dims {:?} must be nonempty and positive", cfg.dims)));
    }
    let mut rng = rng_at(cfg.seed, &[]);
    let d = cfg.dims.len();
    let radix = MixedRadix::new(cfg.dims.clone());
    let mut observed: Vec<Vec<usize>> = radix.iter().filter(|_| rng.random_bool(cfg.p)).collect();
    let mut forced = 0;
    if cfg.enforce_assumption1 {
        let per_row: usize = cfg.dims[..d - 1].iter().product();
        if per_row < cfg.rank {
            return Err(Error::InvalidParameter(format!(
                "rows of the last matricization hold {per_row} cells, fewer than rank {}",
                cfg.rank
            )));
        }
        let lead = MixedRadix::new(cfg.dims[..d - 1].to_vec());
        let mut taken = vec![vec![false; per_row]; cfg.dims[d - 1]];
        for t in &observed {
            taken[t[d - 1]][lead.encode(&t[..d - 1])] = true;
        }
        for (y, row) in taken.iter().enumerate() {
            let have = row.iter().filter(|&&b| b).count();
            if have >= cfg.rank {
                continue;
            }
            let free: Vec<usize> = (0..per_row).filter(|&k| !row[k]).collect();
            for k in sample(&mut rng, free.len(), cfg.rank - have) {
                let mut t = lead.decode(free[k]);
                t.push(y);
                observed.push(t);
                forced += 1;
            }
        }
    }
    Ok(Generated {
        pattern: SamplingPattern::new(cfg.dims.clone(), observed)?,
        forced,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checker {
    OracleReduced,
    OracleFull,
    Combinatorial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dims: Vec<usize>,
    pub rank: usize,
    pub p_grid: Vec<f64>,
    pub trials_per_p: usize,
    pub seed: u64,
    pub checker: Checker,
    pub enforce_assumption1: bool,
    pub limits: CheckerLimits,
    pub oracle_trials: usize,
}

impl ExperimentConfig {
    pub fn new(dims: Vec<usize>, rank: usize, p_grid: Vec<f64>, trials_per_p: usize, seed: u64) -> Self {
        Self {
            dims,
            rank,
            p_grid,
            trials_per_p,
            seed,
            checker: Checker::OracleReduced,
            enforce_assumption1: false,
            limits: CheckerLimits::default(),
            oracle_trials: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub p: f64,
    pub finite_fraction: f64,
    pub unique_fraction: f64,
    /// Mean over trials whose last-mode rows all hold `rank` entries; `None` if none do.
    pub mean_reduced_rank: Option<f64>,
    pub assumption1_failure_fraction: f64,
    /// Trials where the selected checker could not decide.
    pub inconclusive_fraction: f64,
}

struct TrialOutcome {
    finite: Option<bool>,
    unique: bool,
    reduced: Option<i64>,
    assumption1: bool,
}

/// `p` grid from `start` to `stop` inclusive, rounded to kill drift.
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(Error::InvalidParameter(format!("bad grid {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    if cfg.trials_per_p == 0 {
        return Err(Error::InvalidParameter("trials per p must be at least 1".into()));
    }
    if cfg.rank == 0 {
        return Err(Error::InvalidRank);
    }
    if cfg.p_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("p grid must be sorted ascending".into()));
    }
    let d = cfg.dims.len();
    let required = RequiredCount::new(&cfg.dims[..d - 1], cfg.rank).value();
    let base_opts = OracleOptions {
        trials: cfg.oracle_trials,
        seed: cfg.seed,
        ..OracleOptions::default()
    };
    let variety = match cfg.checker {
        Checker::OracleFull => Some(variety_rank(&cfg.dims, cfg.rank, &base_opts)?),
        _ => None,
    };

    cfg.p_grid
        .iter()
        .enumerate()
        .map(|(pi, &p)| {
            let outcomes: Vec<TrialOutcome> = (0..cfg.trials_per_p)
                .into_par_iter()
                .map(|t| {
                    let trial_seed = derive_seed(cfg.seed, &[pi as u64, t as u64]);
                    let generated = generate_pattern(&GenConfig {
                        dims: cfg.dims.clone(),
                        p,
                        seed: trial_seed,
                        enforce_assumption1: cfg.enforce_assumption1,
                        rank: cfg.rank,
                    })?;
                    let pattern = generated.pattern;
                    let opts = OracleOptions {
                        seed: derive_seed(trial_seed, &[1]),
                        ..base_opts.clone()
                    };
                    let limits = CheckerLimits {
                        seed: derive_seed(trial_seed, &[2]),
                        ..cfg.limits.clone()
                    };
                    let assumption1 = check_assumption1(&pattern, cfg.rank).passes;
                    let reduced = if assumption1 {
                        Some(reduced_rank(&pattern, cfg.rank, &opts)?)
                    } else {
                        None
                    };
                    let finite = match cfg.checker {
                        Checker::OracleReduced => Some(reduced == Some(required)),
                        Checker::OracleFull => Some(Some(full_rank(&pattern, cfg.rank, &opts)?) == variety),
                        Checker::Combinatorial => match check_finite_pattern(&pattern, cfg.rank, &limits)? {
                            FiniteVerdict::Finite { .. } => Some(true),
                            FiniteVerdict::NotFinite { .. } => Some(false),
                            FiniteVerdict::Inconclusive { .. } => None,
                        },
                    };
                    let unique = matches!(
                        check_unique_pattern(&pattern, cfg.rank, &limits)?,
                        UniqueVerdict::Unique { .. }
                    );
                    Ok(TrialOutcome {
                        finite,
                        unique,
                        reduced,
                        assumption1,
                    })
                })
                .collect::<Result<_>>()?;
            let n = outcomes.len() as f64;
            let frac = |f: &dyn Fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / n;
            let ranks: Vec<i64> = outcomes.iter().filter_map(|o| o.reduced).collect();
            Ok(ExperimentRow {
                p,
                finite_fraction: frac(&|o| o.finite == Some(true)),
                unique_fraction: frac(&|o| o.unique),
                mean_reduced_rank: (!ranks.is_empty()).then(|| ranks.iter().sum::<i64>() as f64 / ranks.len() as f64),
                assumption1_failure_fraction: frac(&|o| !o.assumption1),
                inconclusive_fraction: frac(&|o| o.finite.is_none()),
            })
        })
        .collect()
}

pub fn experiment_csv(rows: &[ExperimentRow]) -> String {
    let mut out = String::from(
        "p,finite_fraction,unique_fraction,mean_reduced_rank,assumption1_failure_fraction,inconclusive_fraction\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.p,
            r.finite_fraction,
            r.unique_fraction,
            r.mean_reduced_rank.map(|m| m.to_string()).unwrap_or_default(),
            r.assumption1_failure_fraction,
            r.inconclusive_fraction
        ));
    }
    out
}

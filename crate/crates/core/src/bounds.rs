//! Closed-form sample-complexity bounds for `n × … × n` tensors.
//!
//! Logarithms are natural throughout. Strict inequalities of the form
//! `l > max{…}` are reported as the threshold itself; [`strict_integer`]
//! gives the smallest integer sample count exceeding it. Out-of-regime
//! parameters still evaluate, with the failed conditions flagged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
}

impl Condition {
    fn new(name: &str, holds: bool) -> Self {
        Self {
            name: name.to_string(),
            holds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    /// Samples needed per column of the relevant unfolding.
    pub per_column_l: f64,
    pub total_samples: f64,
    pub columns: f64,
    pub probability_lower_bound: Option<f64>,
    pub applicability: Vec<Condition>,
}

impl BoundResult {
    pub fn in_regime(&self) -> bool {
        self.applicability.iter().all(|c| c.holds)
    }
}

/// Smallest integer strictly above `x`.
pub fn strict_integer(x: f64) -> f64 {
    x.floor() + 1.0
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(eps))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be at least 1, got {v}")))
    }
}

/// Per-column threshold for an `n × N` rank-`k` matrix:
/// `max{12 ln(n/ε) + 12, 2k}`.
pub fn matrix_bound_l(n: f64, k: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    check_positive("n", n)?;
    Ok((12.0 * (n / eps).ln() + 12.0).max(2.0 * k))
}

/// Matrix bound with its regime flags; `columns` is `N`.
pub fn matrix_bound(n: f64, columns: f64, k: f64, eps: f64) -> Result<BoundResult> {
    let l = matrix_bound_l(n, k, eps)?;
    Ok(BoundResult {
        per_column_l: l,
        total_samples: columns * l,
        columns,
        probability_lower_bound: Some(1.0 - eps),
        applicability: vec![
            Condition::new("k <= n/6", k <= n / 6.0),
            Condition::new("k(n-k) <= N", k * (n - k) <= columns),
        ],
    })
}

/// Bound through the unfolding with `isize` row modes.
pub fn unfolding_bound(n: f64, d: usize, r: f64, eps: f64, isize: usize) -> Result<BoundResult> {
    check_eps(eps)?;
    check_positive("n", n)?;
    if isize == 0 || isize >= d {
        return Err(Error::InvalidIsize { isize, order: d });
    }
    let i = isize as f64;
    let rows_ln = i * n.ln();
    let l = (12.0 * (rows_ln + r.ln() - eps.ln()) + 12.0).max(2.0 * r);
    let columns = n.powi((d - isize) as i32);
    let rows = n.powi(isize as i32);
    Ok(BoundResult {
        per_column_l: l,
        total_samples: columns * l,
        columns,
        probability_lower_bound: Some(1.0 - eps),
        applicability: vec![
            Condition::new("|I| < d/2", 2 * isize < d),
            Condition::new("r <= n/6", r <= n / 6.0),
            Condition::new("r(N_I - r) <= N_complement", r * (rows - r) <= columns),
        ],
    })
}

/// Row-mode count that minimizes the unfolding total among `|I| < d/2`.
pub fn best_unfolding_isize(d: usize) -> usize {
    ((d.saturating_sub(1)) / 2).max(1)
}

pub fn best_unfolding_bound(n: f64, d: usize, r: f64, eps: f64) -> Result<BoundResult> {
    unfolding_bound(n, d, r, eps, best_unfolding_isize(d))
}

fn cp_threshold(n_arg: f64, r_arg: f64, r: f64, eps: f64) -> f64 {
    (27.0 * (n_arg / eps).ln() + 9.0 * (r_arg / eps).ln() + 18.0).max(6.0 * r)
}

fn cp_bound(n: f64, d: usize, r: f64, eps: f64, unique: bool) -> Result<BoundResult> {
    check_eps(eps)?;
    check_positive("n", n)?;
    check_positive("r", r)?;
    if d <= 2 {
        return Err(Error::OrderTooSmall(d));
    }
    let dm2 = (d - 2) as f64;
    let (l, size_floor) = if unique {
        (cp_threshold(2.0 * n, 8.0 * r * dm2, r, eps), (r + 2.0) * dm2)
    } else {
        (cp_threshold(n, 2.0 * r * dm2, r, eps), r * dm2)
    };
    let columns = n * n;
    let size_name = if unique { "n > (r+2)(d-2)" } else { "n > r(d-2)" };
    Ok(BoundResult {
        per_column_l: l,
        total_samples: columns * l,
        columns,
        probability_lower_bound: Some(1.0 - eps),
        applicability: vec![
            Condition::new("d > 2", true),
            Condition::new("n > 200", n > 200.0),
            Condition::new(size_name, n > size_floor),
            Condition::new("r <= n/6", r <= n / 6.0),
        ],
    })
}

/// Samples for finite completability through the CP route.
pub fn cp_finite_bound(n: f64, d: usize, r: f64, eps: f64) -> Result<BoundResult> {
    cp_bound(n, d, r, eps, false)
}

/// Samples for unique completability through the CP route.
pub fn cp_unique_bound(n: f64, d: usize, r: f64, eps: f64) -> Result<BoundResult> {
    cp_bound(n, d, r, eps, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Finite,
    Unique,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingProbability {
    /// Per-entry sampling probability above which the guarantee applies.
    pub p_bound: f64,
    /// `(1 - ε)(1 - exp(-sqrt(n^(d-2))/2))^(n²)`
    pub success_probability: f64,
    pub per_column_l: f64,
    pub applicability: Vec<Condition>,
}

pub fn sampling_probability_bound(n: f64, d: usize, r: f64, eps: f64, variant: Variant) -> Result<SamplingProbability> {
    let count = match variant {
        Variant::Finite => cp_finite_bound(n, d, r, eps)?,
        Variant::Unique => cp_unique_bound(n, d, r, eps)?,
    };
    let column_len = n.powi((d - 2) as i32);
    let p_bound = count.per_column_l / column_len + column_len.powf(-0.25);
    let tail = (-column_len.sqrt() / 2.0).exp();
    let success_probability = (1.0 - eps) * (n * n * (-tail).ln_1p()).exp();
    Ok(SamplingProbability {
        p_bound,
        success_probability,
        per_column_l: count.per_column_l,
        applicability: count.applicability,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Figure1Row {
    pub r: usize,
    pub unfolding_total: f64,
    pub cp_total: f64,
}

/// Best unfolding total against the CP finite total for each rank.
pub fn figure1_table(n: f64, d: usize, r_min: usize, r_max: usize, eps: f64) -> Result<Vec<Figure1Row>> {
    if r_min == 0 || r_min > r_max {
        return Err(Error::InvalidParameter(format!("rank range {r_min}..={r_max} is empty or starts at 0")));
    }
    (r_min..=r_max)
        .map(|r| {
            Ok(Figure1Row {
                r,
                unfolding_total: best_unfolding_bound(n, d, r as f64, eps)?.total_samples,
                cp_total: cp_finite_bound(n, d, r as f64, eps)?.total_samples,
            })
        })
        .collect()
}

pub fn figure1_csv(rows: &[Figure1Row]) -> String {
    let mut out = String::from("r,unfolding_total,cp_total\n");
    for row in rows {
        out.push_str(&format!("{},{},{}\n", row.r, row.unfolding_total, row.cp_total));
    }
    out
}

//! Ground-truth completability via the generic rank of the Jacobian of the
//! sample map `A ↦ (U(x))_{x ∈ Ω}` over GF(2^31 - 1).
//!
//! Three ranks are available. The reduced rank fixes the canonical pattern
//! (an `r × r` block of `A_0` and one all-ones row in each of `A_1 .. A_{d-2}`),
//! keeps the last factor free and subtracts the `r·n_d` equations spent on
//! pinning it down. The full rank leaves every factor entry free, and the
//! variety rank is the full rank with every cell observed.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checker::{check_finite_pattern, CheckerLimits, FiniteVerdict, RequiredCount};
use crate::constraint::{check_assumption1, default_basis, BasisChoice, ConstraintTensor};
use crate::error::{Error, Result};
use crate::field::{self, EchelonBasis, Fp, PRIME};
use crate::pattern::SamplingPattern;
use crate::seed::rng_at;

pub const FIELD_PRIME: u64 = PRIME;
/// Fresh random points tried before a singular basis system is reported.
pub const SINGULAR_RETRIES: usize = 10;

/// Factor matrices `A_i` of shape `n_i × r`, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorMatrices {
    rank: usize,
    dims: Vec<usize>,
    data: Vec<Vec<Fp>>,
}

impl FactorMatrices {
    pub fn new(dims: Vec<usize>, rank: usize, data: Vec<Vec<Fp>>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidRank);
        }
        if data.len() != dims.len() {
            return Err(Error::InvalidShape(format!("{} matrices for {} modes", data.len(), dims.len())));
        }
        for (i, (m, &n)) in data.iter().zip(&dims).enumerate() {
            if m.len() != n * rank {
                return Err(Error::InvalidShape(format!(
                    "factor {i} holds {} entries, expected {n} × {rank}",
                    m.len()
                )));
            }
        }
        Ok(Self { rank, dims, data })
    }

    pub fn constant(dims: Vec<usize>, rank: usize, value: Fp) -> Self {
        let data = dims.iter().map(|&n| vec![value; n * rank]).collect();
        Self { rank, dims, data }
    }

    /// Every entry uniform over the nonzero field elements.
    pub fn random<R: Rng + ?Sized>(dims: Vec<usize>, rank: usize, rng: &mut R) -> Self {
        let data = dims
            .iter()
            .map(|&n| (0..n * rank).map(|_| Fp::random_nonzero(rng)).collect())
            .collect();
        Self { rank, dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn get(&self, mode: usize, row: usize, l: usize) -> Fp {
        self.data[mode][row * self.rank + l]
    }

    pub fn set(&mut self, mode: usize, row: usize, l: usize, value: Fp) {
        self.data[mode][row * self.rank + l] = value;
    }

    pub fn row(&self, mode: usize, row: usize) -> &[Fp] {
        &self.data[mode][row * self.rank..(row + 1) * self.rank]
    }

    /// `U(x) = Σ_l Π_i A_i[x_i, l]`
    pub fn evaluate_entry(&self, x: &[usize]) -> Result<Fp> {
        if x.len() != self.order() || x.iter().zip(&self.dims).any(|(&c, &n)| c >= n) {
            return Err(Error::OutOfBounds {
                tuple: x.to_vec(),
                dims: self.dims.clone(),
            });
        }
        Ok((0..self.rank)
            .map(|l| x.iter().enumerate().map(|(i, &xi)| self.get(i, xi, l)).product::<Fp>())
            .sum())
    }

    /// Keeps the first `count` factors.
    pub fn leading(&self, count: usize) -> Self {
        Self {
            rank: self.rank,
            dims: self.dims[..count].to_vec(),
            data: self.data[..count].to_vec(),
        }
    }
}

/// How the fixed `r × r` block is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QBlock {
    /// Random nonzero entries, redrawn until invertible.
    #[default]
    Generic,
    Identity,
}

/// Fixed entries selecting one decomposition per equivalence class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalPattern {
    pub j: usize,
    /// Rows of `A_j` holding the fixed block.
    pub q_rows: Vec<usize>,
    /// (mode, row) pairs fixed to all ones.
    pub ones_rows: Vec<(usize, usize)>,
    pub q_block: QBlock,
}

impl CanonicalPattern {
    /// `j = 0`, block in the first `r` rows, ones in row 0 of `A_1 .. A_{d-2}`.
    /// `dims` covers all `d` modes.
    pub fn standard(dims: &[usize], rank: usize, q_block: QBlock) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidRank);
        }
        let d = dims.len();
        if d < 2 {
            return Err(Error::InvalidShape("the sample map needs at least two modes".into()));
        }
        if dims[0] < rank {
            return Err(Error::CanonicalPatternDoesNotFit {
                mode: 0,
                rank,
                rows: dims[0],
            });
        }
        Ok(Self {
            j: 0,
            q_rows: (0..rank).collect(),
            ones_rows: (1..d - 1).map(|i| (i, 0)).collect(),
            q_block,
        })
    }

    /// Places the fixed entries on rows a slice selection touches: the block
    /// goes to the mode with the most touched rows (padded with untouched
    /// rows when fewer than `r`), the ones rows to a touched row of every
    /// other leading mode. `touched[i]` lists the touched rows of mode `i`
    /// for the `d - 1` leading modes.
    pub fn covering(dims: &[usize], rank: usize, touched: &[Vec<usize>], q_block: QBlock) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidRank);
        }
        let lead = dims.len().saturating_sub(1);
        if lead == 0 || touched.len() != lead {
            return Err(Error::InvalidShape(format!(
                "need touched rows for {lead} leading modes, got {}",
                touched.len()
            )));
        }
        let j = (0..lead)
            .filter(|&i| dims[i] >= rank)
            .max_by_key(|&i| (touched[i].len(), std::cmp::Reverse(i)))
            .ok_or(Error::CanonicalPatternDoesNotFit {
                mode: 0,
                rank,
                rows: dims[0],
            })?;
        let mut q_rows: Vec<usize> = touched[j].iter().copied().take(rank).collect();
        let mut spare = (0..dims[j]).filter(|x| !touched[j].contains(x));
        while q_rows.len() < rank {
            q_rows.push(spare.next().expect("mode holds at least r rows"));
        }
        let ones_rows = (0..lead)
            .filter(|&i| i != j)
            .map(|i| (i, touched[i].first().copied().unwrap_or(0)))
            .collect();
        Ok(Self { j, q_rows, ones_rows, q_block })
    }

    pub fn fixed_count(&self) -> usize {
        let r = self.q_rows.len();
        r * r + r * self.ones_rows.len()
    }

    fn is_fixed(&self, mode: usize, row: usize) -> bool {
        (mode == self.j && self.q_rows.contains(&row)) || self.ones_rows.contains(&(mode, row))
    }

    /// Writes the fixed constants into `a`.
    pub fn apply<R: Rng + ?Sized>(&self, a: &mut FactorMatrices, rng: &mut R) {
        let r = a.rank();
        match self.q_block {
            QBlock::Identity => {
                for (k, &row) in self.q_rows.iter().enumerate() {
                    for l in 0..r {
                        a.set(self.j, row, l, if k == l { Fp::ONE } else { Fp::ZERO });
                    }
                }
            }
            QBlock::Generic => loop {
                let q: Vec<Vec<Fp>> = (0..r).map(|_| (0..r).map(|_| Fp::random_nonzero(rng)).collect()).collect();
                if field::rank(r, q.clone()) == r {
                    for (qrow, &row) in q.iter().zip(&self.q_rows) {
                        for (l, &v) in qrow.iter().enumerate() {
                            a.set(self.j, row, l, v);
                        }
                    }
                    break;
                }
            },
        }
        for &(mode, row) in &self.ones_rows {
            for l in 0..r {
                a.set(mode, row, l, Fp::ONE);
            }
        }
    }
}

/// Column index of every free factor entry.
struct Layout {
    rank: usize,
    var: Vec<Vec<Option<u32>>>,
    nvars: usize,
}

impl Layout {
    fn new(dims: &[usize], rank: usize, canonical: Option<&CanonicalPattern>) -> Self {
        let mut nvars = 0u32;
        let var = dims
            .iter()
            .enumerate()
            .map(|(mode, &n)| {
                (0..n * rank)
                    .map(|k| {
                        let fixed = canonical.is_some_and(|c| c.is_fixed(mode, k / rank));
                        (!fixed).then(|| {
                            nvars += 1;
                            nvars - 1
                        })
                    })
                    .collect()
            })
            .collect();
        Self {
            rank,
            var,
            nvars: nvars as usize,
        }
    }

    /// Gradient of `U(x)` with respect to the free entries.
    fn jacobian_row(&self, a: &FactorMatrices, x: &[usize]) -> Vec<Fp> {
        let d = x.len();
        let mut row = vec![Fp::ZERO; self.nvars];
        let mut suffix = vec![Fp::ONE; d + 1];
        for l in 0..self.rank {
            for i in (0..d).rev() {
                suffix[i] = suffix[i + 1] * a.get(i, x[i], l);
            }
            let mut prefix = Fp::ONE;
            for i in 0..d {
                if let Some(v) = self.var[i][x[i] * self.rank + l] {
                    row[v as usize] += prefix * suffix[i + 1];
                }
                prefix *= a.get(i, x[i], l);
            }
        }
        row
    }
}

/// Coefficient matrix of row `y`'s basis equations in the last factor.
fn basis_system(a: &FactorMatrices, tuples: &[Vec<usize>]) -> Vec<Vec<Fp>> {
    let lead = a.order() - 1;
    tuples
        .iter()
        .map(|b| {
            (0..a.rank())
                .map(|l| (0..lead).map(|i| a.get(i, b[i], l)).product())
                .collect()
        })
        .collect()
}

/// Solves each row of the last factor from its basis samples.
///
/// `leading` holds `A_1 .. A_{d-1}`; `sample` returns the observed value at
/// a full d-way tuple.
pub fn solve_last_factor<F>(leading: &FactorMatrices, basis: &BasisChoice, sample: F) -> Result<Vec<Vec<Fp>>>
where
    F: Fn(&[usize]) -> Fp,
{
    let r = leading.rank();
    let mut padded = leading.clone();
    padded.dims.push(0);
    padded.data.push(Vec::new());
    basis
        .per_row()
        .iter()
        .enumerate()
        .map(|(y, tuples)| {
            if tuples.len() != r {
                return Err(Error::InvalidBasis(format!("row {y} has {} basis entries", tuples.len())));
            }
            let c = basis_system(&padded, tuples);
            let rhs = tuples.iter().map(|b| sample(b)).collect();
            field::solve(c, rhs).ok_or(Error::SingularSystem { row: y, attempts: 1 })
        })
        .collect()
}

/// A random point with the canonical constants in place and every
/// basis system invertible.
fn draw_point(
    dims: &[usize],
    rank: usize,
    canonical: Option<&CanonicalPattern>,
    rows: &[&[Vec<usize>]],
    rng: &mut ChaCha8Rng,
) -> Result<FactorMatrices> {
    let mut last_bad = 0;
    for _ in 0..SINGULAR_RETRIES {
        let mut a = FactorMatrices::random(dims.to_vec(), rank, rng);
        if let Some(c) = canonical {
            c.apply(&mut a, rng);
        }
        match rows.iter().position(|t| field::rank(rank, basis_system(&a, t)) < rank) {
            None => return Ok(a),
            Some(k) => last_bad = rows[k][0][dims.len() - 1],
        }
    }
    Err(Error::SingularSystem {
        row: last_bad,
        attempts: SINGULAR_RETRIES,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    Reduced,
    Full,
    Variety,
    /// Every rank the pattern admits.
    All,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub trials: usize,
    pub seed: u64,
    pub q_block: QBlock,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            trials: 3,
            seed: 0,
            q_block: QBlock::Generic,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRanks {
    pub reduced: Vec<i64>,
    /// Rank of the basis equations alone; `r·n_d` whenever elimination works.
    pub basis: Vec<usize>,
    pub full: Vec<usize>,
    pub variety: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub mode: OracleMode,
    pub dims: Vec<usize>,
    pub rank: usize,
    pub assumption1: bool,
    pub required_count: i64,
    pub reduced_rank: Option<i64>,
    pub full_rank: Option<usize>,
    pub variety_rank: Option<usize>,
    /// Finite iff the reduced rank reaches the required count. A pattern
    /// with an under-observed last-mode row is never finite.
    pub verdict_paper: Option<bool>,
    /// Finite iff the observed samples reach the variety rank.
    pub verdict_variety: Option<bool>,
    pub trial_ranks: TrialRanks,
    /// Every trial produced the maximum rank.
    pub stable: bool,
    pub trials: usize,
    pub field_prime: u64,
    pub seed: u64,
    pub q_block: QBlock,
}

const STREAM_REDUCED: u64 = 0;
const STREAM_FULL: u64 = 1;
const STREAM_VARIETY: u64 = 2;
const STREAM_SELECTION: u64 = 3;

fn per_trial<T, F>(opts: &OracleOptions, stream: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    (0..opts.trials.max(1) as u64)
        .into_par_iter()
        .map(|t| f(&mut rng_at(opts.seed, &[stream, t])))
        .collect()
}

fn full_rank_trials(pattern: &SamplingPattern, rank: usize, opts: &OracleOptions, stream: u64) -> Result<Vec<usize>> {
    let layout = Layout::new(pattern.dims(), rank, None);
    per_trial(opts, stream, |rng| {
        let a = FactorMatrices::random(pattern.dims().to_vec(), rank, rng);
        Ok(field::rank(
            layout.nvars,
            pattern.observed().iter().map(|x| layout.jacobian_row(&a, x)),
        ))
    })
}

fn reduced_trials(pattern: &SamplingPattern, rank: usize, opts: &OracleOptions) -> Result<Vec<(usize, usize)>> {
    let basis = default_basis(pattern, rank)?;
    let dims = pattern.dims();
    let canonical = CanonicalPattern::standard(dims, rank, opts.q_block)?;
    let layout = Layout::new(dims, rank, Some(&canonical));
    let rows: Vec<&[Vec<usize>]> = basis.per_row().iter().map(Vec::as_slice).collect();
    per_trial(opts, STREAM_REDUCED, |rng| {
        let a = draw_point(dims, rank, Some(&canonical), &rows, rng)?;
        let mut eb = EchelonBasis::new(layout.nvars);
        for b in basis.tuples() {
            eb.insert(layout.jacobian_row(&a, b));
        }
        let basis_rank = eb.rank();
        for x in pattern.observed() {
            if eb.rank() == layout.nvars {
                break;
            }
            if !basis.contains(x) {
                eb.insert(layout.jacobian_row(&a, x));
            }
        }
        Ok((eb.rank(), basis_rank))
    })
}

/// Reduced rank alone, maximized over trials.
pub fn reduced_rank(pattern: &SamplingPattern, rank: usize, opts: &OracleOptions) -> Result<i64> {
    let offset = (rank * pattern.dims()[pattern.order() - 1]) as i64;
    let best = reduced_trials(pattern, rank, opts)?.into_iter().map(|(t, _)| t).max().unwrap_or(0);
    Ok(best as i64 - offset)
}

/// Full rank of the observed samples alone, maximized over trials.
pub fn full_rank(pattern: &SamplingPattern, rank: usize, opts: &OracleOptions) -> Result<usize> {
    Ok(full_rank_trials(pattern, rank, opts, STREAM_FULL)?.into_iter().max().unwrap_or(0))
}

/// Rank with every cell observed.
pub fn variety_rank(dims: &[usize], rank: usize, opts: &OracleOptions) -> Result<usize> {
    let full = SamplingPattern::full(dims.to_vec())?;
    Ok(full_rank_trials(&full, rank, opts, STREAM_VARIETY)?.into_iter().max().unwrap_or(0))
}

/// Generic Jacobian rank of the sample map, maximized over seeded trials.
pub fn generic_jacobian_rank(
    pattern: &SamplingPattern,
    rank: usize,
    mode: OracleMode,
    opts: &OracleOptions,
) -> Result<OracleReport> {
    if rank == 0 {
        return Err(Error::InvalidRank);
    }
    let dims = pattern.dims().to_vec();
    let d = dims.len();
    let required = RequiredCount::new(&dims[..d - 1], rank).value();
    let assumption1 = check_assumption1(pattern, rank).passes;
    let mut trial_ranks = TrialRanks::default();

    let want_reduced = matches!(mode, OracleMode::Reduced | OracleMode::All);
    let want_full = matches!(mode, OracleMode::Full | OracleMode::All);
    let want_variety = !matches!(mode, OracleMode::Reduced);

    let mut reduced_rank = None;
    if want_reduced && (assumption1 || mode == OracleMode::Reduced) {
        let offset = (rank * dims[d - 1]) as i64;
        for (total, basis) in reduced_trials(pattern, rank, opts)? {
            trial_ranks.reduced.push(total as i64 - offset);
            trial_ranks.basis.push(basis);
        }
        reduced_rank = trial_ranks.reduced.iter().copied().max();
    }
    let mut full_rank = None;
    if want_full {
        trial_ranks.full = full_rank_trials(pattern, rank, opts, STREAM_FULL)?;
        full_rank = trial_ranks.full.iter().copied().max();
    }
    let mut variety_rank = None;
    if want_variety {
        let full = SamplingPattern::full(dims.clone())?;
        trial_ranks.variety = full_rank_trials(&full, rank, opts, STREAM_VARIETY)?;
        variety_rank = trial_ranks.variety.iter().copied().max();
    }

    let verdict_paper = if want_reduced {
        Some(assumption1 && reduced_rank == Some(required))
    } else {
        None
    };
    let verdict_variety = full_rank.zip(variety_rank).map(|(f, v)| f == v);
    let stable = all_equal(&trial_ranks.reduced) && all_equal(&trial_ranks.full) && all_equal(&trial_ranks.variety);
    Ok(OracleReport {
        mode,
        dims,
        rank,
        assumption1,
        required_count: required,
        reduced_rank,
        full_rank,
        variety_rank,
        verdict_paper,
        verdict_variety,
        trial_ranks,
        stable,
        trials: opts.trials.max(1),
        field_prime: FIELD_PRIME,
        seed: opts.seed,
        q_block: opts.q_block,
    })
}

fn all_equal<T: PartialEq>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

/// Independent count among the reduced polynomials of a slice selection:
/// the rank of its extra equations together with the basis equations of
/// the rows it uses, less `r` per such row. Uses the standard canonical
/// pattern, as the reduced mode does.
pub fn selection_reduced_rank(ct: &ConstraintTensor, ids: &[usize], opts: &OracleOptions) -> Result<i64> {
    let mut dims = ct.dims().to_vec();
    dims.push(ct.last_dim());
    let canonical = CanonicalPattern::standard(&dims, ct.rank(), opts.q_block)?;
    selection_reduced_rank_with(ct, ids, Some(&canonical), opts)
}

/// Rows of each leading mode touched by a slice selection.
pub fn touched_rows(ct: &ConstraintTensor, ids: &[usize]) -> Result<Vec<Vec<usize>>> {
    let lead = ct.order() - 1;
    let mut touched = vec![BTreeSet::new(); lead];
    for &id in ids {
        let slice = ct.slices().get(id).ok_or(Error::SliceOutOfRange { id, count: ct.len() })?;
        for t in slice.support() {
            for (i, &x) in t.iter().enumerate().take(lead) {
                touched[i].insert(x);
            }
        }
    }
    Ok(touched.into_iter().map(|s| s.into_iter().collect()).collect())
}

/// [`selection_reduced_rank`] with an explicit gauge; `None` leaves every
/// factor entry free.
pub fn selection_reduced_rank_with(
    ct: &ConstraintTensor,
    ids: &[usize],
    canonical: Option<&CanonicalPattern>,
    opts: &OracleOptions,
) -> Result<i64> {
    let rank = ct.rank();
    let mut dims = ct.dims().to_vec();
    dims.push(ct.last_dim());
    let layout = Layout::new(&dims, rank, canonical);
    let mut rows_used = BTreeSet::new();
    for &id in ids {
        let slice = ct.slices().get(id).ok_or(Error::SliceOutOfRange { id, count: ct.len() })?;
        rows_used.insert(slice.row);
    }
    let per_row = ct.basis().per_row();
    let systems: Vec<&[Vec<usize>]> = rows_used.iter().map(|&y| per_row[y].as_slice()).collect();
    let extras: Vec<Vec<usize>> = ids.iter().map(|&id| ct.slices()[id].extra_entry()).collect();
    let ranks = per_trial(opts, STREAM_SELECTION, |rng| {
        let a = draw_point(&dims, rank, canonical, &systems, rng)?;
        let rows = systems
            .iter()
            .flat_map(|t| t.iter())
            .chain(&extras)
            .map(|x| layout.jacobian_row(&a, x));
        Ok(field::rank(layout.nvars, rows))
    })?;
    let best = ranks.into_iter().max().unwrap_or(0);
    Ok(best as i64 - (rank * rows_used.len()) as i64)
}

/// Agreement between the combinatorial verdict and both oracle verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub combinatorial: FiniteVerdict,
    pub oracle: OracleReport,
    pub verdict_paper: bool,
    pub verdict_variety: bool,
    pub paper_vs_variety: bool,
    /// `None` when the combinatorial check was inconclusive.
    pub combinatorial_vs_paper: Option<bool>,
    pub combinatorial_vs_variety: Option<bool>,
}

/// Largest instance cross-validation accepts, in cells.
pub const CROSS_VALIDATE_MAX_CELLS: usize = 10_000;

pub fn cross_validate(
    pattern: &SamplingPattern,
    rank: usize,
    limits: &CheckerLimits,
    opts: &OracleOptions,
) -> Result<CrossValidation> {
    if pattern.cell_count() > CROSS_VALIDATE_MAX_CELLS {
        return Err(Error::InvalidParameter(format!(
            "cross-validation is limited to {CROSS_VALIDATE_MAX_CELLS} cells, pattern has {}",
            pattern.cell_count()
        )));
    }
    let combinatorial = check_finite_pattern(pattern, rank, limits)?;
    let oracle = generic_jacobian_rank(pattern, rank, OracleMode::All, opts)?;
    let verdict_paper = oracle.verdict_paper.unwrap_or(false);
    let verdict_variety = oracle.verdict_variety.unwrap_or(false);
    let comb = combinatorial.is_conclusive().then(|| combinatorial.is_finite());
    Ok(CrossValidation {
        paper_vs_variety: verdict_paper == verdict_variety,
        combinatorial_vs_paper: comb.map(|c| c == verdict_paper),
        combinatorial_vs_variety: comb.map(|c| c == verdict_variety),
        combinatorial,
        oracle,
        verdict_paper,
        verdict_variety,
    })
}

/// Floating-point rank of the full Jacobian at a random real point, using a
/// singular-value cutoff of `1e-9 · σ_max`. Meant for inspection only; the
/// exact field rank is authoritative.
pub fn float_full_rank(pattern: &SamplingPattern, rank: usize, seed: u64) -> usize {
    let dims = pattern.dims();
    let mut rng = rng_at(seed, &[STREAM_FULL]);
    let vals: Vec<Vec<f64>> = dims
        .iter()
        .map(|&n| {
            (0..n * rank)
                .map(|_| {
                    let v: f64 = rng.random_range(0.5..1.5);
                    if rng.random_bool(0.5) {
                        v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, &n| {
            let o = *acc;
            *acc += n * rank;
            Some(o)
        })
        .collect();
    let nvars: usize = dims.iter().sum::<usize>() * rank;
    let rows = pattern.len();
    if rows == 0 || nvars == 0 {
        return 0;
    }
    let mut j = DMatrix::<f64>::zeros(rows, nvars);
    for (k, x) in pattern.observed().iter().enumerate() {
        for l in 0..rank {
            for i in 0..x.len() {
                let partial: f64 = (0..x.len())
                    .filter(|&m| m != i)
                    .map(|m| vals[m][x[m] * rank + l])
                    .product();
                j[(k, offsets[i] + x[i] * rank + l)] += partial;
            }
        }
    }
    let sv = j.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > 1e-9 * max).count()
}

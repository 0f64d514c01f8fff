//! Counting conditions on slice selections of a constraint tensor, and the
//! searches for finite and unique completability certificates built on them.
//!
//! For a nonempty selection `S` with per-mode counts `m_i` the independence
//! bound is `f(S) = r (Σ m_i - min(max m_i, r) - (d - 2))`; a selection is
//! admissible when every nonempty subset `T` has `f(T) >= |T|`.
//!
//! Writing `N(S)` for the set of (mode, index) positions touched by `S`,
//! `f(S) >= r|N(S)| - r² - r(d-2)` with equality whenever `max m_i >= r`.
//! The right-hand side is a scaled coverage function, so the subset test
//! against it reduces to one max-flow per focus slice. When every nonempty
//! selection is forced to have `max m_i >= r` (always for `r <= 2`, and for
//! `d = 2` where the two bounds flag the same violators), the flow test is
//! exact and the admissible selections are the independent sets of a matroid
//! (Edmonds: `|T| <= g(T)` with `g` integral, submodular and nondecreasing),
//! so greedy search is exact too. Otherwise the flow is only a sufficient
//! certificate and exhaustive or randomized checks take over.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraint::{check_assumption1, constraint_tensor, ConstraintTensor};
use crate::error::{Error, Result};
use crate::flow::max_excess;
use crate::pattern::{ModeCounts, SamplingPattern};

/// Number of algebraically independent polynomials needed for finiteness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequiredCount(pub i64);

impl RequiredCount {
    /// `first_dims` holds `n_1 .. n_{d-1}`.
    pub fn new(first_dims: &[usize], rank: usize) -> Self {
        let r = rank as i64;
        let sum: i64 = first_dims.iter().map(|&n| n as i64).sum();
        let d = first_dims.len() as i64 + 1;
        Self(r * sum - r * r - r * (d - 2))
    }

    pub fn of(ct: &ConstraintTensor) -> Self {
        Self::new(ct.dims(), ct.rank())
    }

    pub fn value(self) -> i64 {
        self.0
    }

    /// Witness size; a nonpositive count needs no polynomials at all.
    pub fn target(self) -> usize {
        self.0.max(0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckerLimits {
    pub max_subset_exhaustive: usize,
    /// Node budget of the backtracking search.
    pub max_candidate_search: usize,
    /// Random subsets tried when exhaustive enumeration is out of reach.
    pub random_samples: usize,
    pub seed: u64,
}

impl Default for CheckerLimits {
    fn default() -> Self {
        Self {
            max_subset_exhaustive: 20,
            max_candidate_search: 100_000,
            random_samples: 10_000,
            seed: 0,
        }
    }
}

/// A set of slice ids with the per-mode counts of their union support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceSelection {
    ids: Vec<usize>,
    counts: ModeCounts,
}

impl SliceSelection {
    pub fn new(ct: &ConstraintTensor, mut ids: Vec<usize>) -> Result<Self> {
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!("slice {} selected twice", w[0])));
        }
        if let Some(&id) = ids.iter().find(|&&id| id >= ct.len()) {
            return Err(Error::SliceOutOfRange { id, count: ct.len() });
        }
        let modes = ct.dims().len();
        let counts = if ids.is_empty() {
            ModeCounts(vec![0; modes])
        } else {
            crate::pattern::mode_counts(ids.iter().flat_map(|&k| ct.slices()[k].support()), modes)?
        };
        Ok(Self { ids, counts })
    }

    pub fn all(ct: &ConstraintTensor) -> Self {
        Self::new(ct, (0..ct.len()).collect()).expect("ids are in range")
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn counts(&self) -> &ModeCounts {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

fn eq8(m: &[usize], r: usize) -> i64 {
    let sum: usize = m.iter().sum();
    let max = m.iter().copied().max().unwrap_or(0);
    let r = r as i64;
    r * (sum as i64 - max.min(r as usize) as i64 - (m.len() as i64 - 1))
}

/// Upper bound on the number of independent polynomials in `sel`.
pub fn independence_upper_bound(sel: &SliceSelection, r: usize, d: usize) -> Result<i64> {
    if sel.is_empty() {
        return Err(Error::EmptySelection);
    }
    if sel.counts.0.len() + 1 != d {
        return Err(Error::InvalidParameter(format!(
            "selection spans {} modes, order {d} expects {}",
            sel.counts.0.len(),
            d - 1
        )));
    }
    Ok(eq8(&sel.counts.0, r))
}

pub fn satisfies_eq9(sel: &SliceSelection, r: usize, d: usize) -> Result<bool> {
    Ok(independence_upper_bound(sel, r, d)? >= sel.len() as i64)
}

/// True when the flow test against the coverage bound decides the subset
/// condition exactly (and admissible selections form a matroid).
pub fn flow_is_exact(rank: usize, order: usize) -> bool {
    let modes = order.saturating_sub(1) as u32;
    modes <= 1
        || (rank as u64 - 1)
            .checked_pow(modes)
            .is_some_and(|cells| cells < rank as u64 + 1)
}

/// Support positions of every slice as dense vertex ids.
struct Incidence {
    rank: usize,
    modes: usize,
    /// All distinct vertices of each slice.
    verts: Vec<Vec<u32>>,
    /// [mode][slice] distinct vertices of that mode.
    per_mode: Vec<Vec<Vec<u32>>>,
    mode_of: Vec<usize>,
}

impl Incidence {
    fn new(ct: &ConstraintTensor) -> Self {
        let dims = ct.dims();
        let modes = dims.len();
        let offsets: Vec<usize> = dims
            .iter()
            .scan(0, |acc, &n| {
                let o = *acc;
                *acc += n;
                Some(o)
            })
            .collect();
        let mode_of = dims
            .iter()
            .enumerate()
            .flat_map(|(m, &n)| std::iter::repeat_n(m, n))
            .collect();
        let mut per_mode = vec![Vec::with_capacity(ct.len()); modes];
        let mut verts = Vec::with_capacity(ct.len());
        for s in ct.slices() {
            let mut all = Vec::new();
            for (mode, list) in per_mode.iter_mut().enumerate() {
                let mut v: Vec<u32> = s.support().map(|t| (offsets[mode] + t[mode]) as u32).collect();
                v.sort_unstable();
                v.dedup();
                all.extend_from_slice(&v);
                list.push(v);
            }
            verts.push(all);
        }
        Self {
            rank: ct.rank(),
            modes,
            verts,
            per_mode,
            mode_of,
        }
    }

    fn exact(&self) -> bool {
        flow_is_exact(self.rank, self.modes + 1)
    }

    fn bound_of(&self, set: &[usize]) -> i64 {
        let mut counter = Counter::new(self);
        for &s in set {
            counter.add(s);
        }
        counter.bound()
    }

    fn violates(&self, set: &[usize]) -> bool {
        !set.is_empty() && self.bound_of(set) < set.len() as i64
    }

    /// Largest-excess subset of `members` containing `focus` under the
    /// coverage bound, when its excess is positive.
    fn flow_violation(&self, members: &[usize], focus: usize) -> Option<Vec<usize>> {
        let r = self.rank as i64;
        let c = r * r + r * (self.modes as i64 - 1);
        let got = max_excess(members, focus, |s| self.verts[s].as_slice(), r, c);
        (got.excess > 0).then_some(got.set)
    }

    /// Does every subset of `members` containing `focus` satisfy
    /// `m_mode(T) - offset >= |T|`?
    fn mode_condition(&self, members: &[usize], focus: usize, mode: usize, offset: usize) -> bool {
        let lists = &self.per_mode[mode];
        max_excess(members, focus, |s| lists[s].as_slice(), 1, offset as i64).excess <= 0
    }
}

/// Incremental per-vertex multiplicities for subset enumeration.
struct Counter<'a> {
    inc: &'a Incidence,
    mult: Vec<u32>,
    m: Vec<usize>,
    size: usize,
}

impl<'a> Counter<'a> {
    fn new(inc: &'a Incidence) -> Self {
        Self {
            inc,
            mult: vec![0; inc.mode_of.len()],
            m: vec![0; inc.modes],
            size: 0,
        }
    }

    fn add(&mut self, s: usize) {
        for &v in &self.inc.verts[s] {
            let v = v as usize;
            if self.mult[v] == 0 {
                self.m[self.inc.mode_of[v]] += 1;
            }
            self.mult[v] += 1;
        }
        self.size += 1;
    }

    fn remove(&mut self, s: usize) {
        for &v in &self.inc.verts[s] {
            let v = v as usize;
            self.mult[v] -= 1;
            if self.mult[v] == 0 {
                self.m[self.inc.mode_of[v]] -= 1;
            }
        }
        self.size -= 1;
    }

    fn bound(&self) -> i64 {
        eq8(&self.m, self.inc.rank)
    }

    fn violated(&self) -> bool {
        self.size > 0 && self.bound() < self.size as i64
    }
}

/// Gray-code walk over subsets of `free`, each joined with `forced`. Returns
/// the first violating subset met.
fn exhaustive_violation(inc: &Incidence, free: &[usize], forced: Option<usize>) -> Option<Vec<usize>> {
    let mut counter = Counter::new(inc);
    if let Some(f) = forced {
        counter.add(f);
        if counter.violated() {
            return Some(vec![f]);
        }
    }
    let mut inside = vec![false; free.len()];
    for step in 1u64..1 << free.len() {
        let bit = step.trailing_zeros() as usize;
        if inside[bit] {
            counter.remove(free[bit]);
        } else {
            counter.add(free[bit]);
        }
        inside[bit] = !inside[bit];
        if counter.violated() {
            let mut set: Vec<usize> = free
                .iter()
                .zip(&inside)
                .filter(|(_, &on)| on)
                .map(|(&s, _)| s)
                .chain(forced)
                .collect();
            set.sort_unstable();
            return Some(set);
        }
    }
    None
}

/// Drops elements while the set keeps violating, until none can go.
fn shrink(inc: &Incidence, mut set: Vec<usize>) -> Vec<usize> {
    let mut k = 0;
    while k < set.len() {
        let mut trial = set.clone();
        trial.remove(k);
        if inc.violates(&trial) {
            set = trial;
        } else {
            k += 1;
        }
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Extend {
    Yes,
    No,
    Unknown,
}

/// Can `e` join the admissible set `indep` without creating a violation?
fn extends(inc: &Incidence, indep: &[usize], e: usize, limits: &CheckerLimits) -> Extend {
    let mut members = indep.to_vec();
    members.push(e);
    let Some(candidate) = inc.flow_violation(&members, e) else {
        return Extend::Yes;
    };
    if inc.exact() || inc.violates(&candidate) {
        return Extend::No;
    }
    if members.len() <= limits.max_subset_exhaustive {
        return match exhaustive_violation(inc, indep, Some(e)) {
            Some(_) => Extend::No,
            None => Extend::Yes,
        };
    }
    Extend::Unknown
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum SubsetCheck {
    Verified,
    Refuted { witness: Vec<usize> },
    Inconclusive,
}

/// Exhaustive check of every nonempty subset, whatever its size.
pub fn all_subsets_satisfy_eq9_exhaustive(ct: &ConstraintTensor, sel: &SliceSelection) -> SubsetCheck {
    let inc = Incidence::new(ct);
    match exhaustive_violation(&inc, sel.ids(), None) {
        Some(w) => SubsetCheck::Refuted { witness: shrink(&inc, w) },
        None => SubsetCheck::Verified,
    }
}

/// Does every nonempty subset of `sel` satisfy the independence bound?
///
/// Up to `max_subset_exhaustive` slices the check enumerates every subset.
/// Beyond that it runs the flow test per slice, then seeded random
/// falsification when the flow alone cannot decide.
pub fn all_subsets_satisfy_eq9(ct: &ConstraintTensor, sel: &SliceSelection, limits: &CheckerLimits) -> SubsetCheck {
    let inc = Incidence::new(ct);
    let ids = sel.ids();
    if ids.len() <= limits.max_subset_exhaustive {
        return match exhaustive_violation(&inc, ids, None) {
            Some(w) => SubsetCheck::Refuted { witness: shrink(&inc, w) },
            None => SubsetCheck::Verified,
        };
    }
    let mut undecided = false;
    for &e in ids {
        if let Some(candidate) = inc.flow_violation(ids, e) {
            if inc.exact() || inc.violates(&candidate) {
                return SubsetCheck::Refuted {
                    witness: shrink(&inc, candidate),
                };
            }
            undecided = true;
        }
    }
    if !undecided {
        return SubsetCheck::Verified;
    }
    match random_violation(&inc, ids, limits) {
        Some(w) => SubsetCheck::Refuted { witness: shrink(&inc, w) },
        None => SubsetCheck::Inconclusive,
    }
}

fn random_violation(inc: &Incidence, ids: &[usize], limits: &CheckerLimits) -> Option<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(limits.seed);
    let t = ids.len();
    for round in 0..limits.random_samples {
        let set: Vec<usize> = if round % 2 == 0 {
            let k = rng.random_range(1..=t);
            sample(&mut rng, t, k).into_iter().map(|i| ids[i]).collect()
        } else {
            // grow a cluster of slices that share support positions
            let mut set = vec![ids[rng.random_range(0..t)]];
            let goal = rng.random_range(1..=t);
            let mut touched: Vec<u32> = inc.verts[set[0]].clone();
            for &s in ids {
                if set.len() >= goal {
                    break;
                }
                if !set.contains(&s) && inc.verts[s].iter().any(|v| touched.contains(v)) {
                    set.push(s);
                    touched.extend_from_slice(&inc.verts[s]);
                }
            }
            set
        };
        if inc.violates(&set) {
            let mut set = set;
            set.sort_unstable();
            return Some(set);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NotFiniteReason {
    /// A row of the last matricization has fewer than `r` observations.
    Assumption1 { row: usize, observed: usize },
    TooFewSlices { slices: usize, required: usize },
    /// The bound over all slices is already short of the requirement.
    BoundBelowRequired { bound: i64, required: usize },
    /// Greedy is exact here and its basis is too small.
    MatroidRank { rank: usize, required: usize },
    /// Backtracking visited every admissible selection without success.
    SearchExhausted { nodes: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FiniteVerdict {
    Finite { witness: Vec<usize> },
    NotFinite { reason: NotFiniteReason },
    Inconclusive { nodes: usize },
}

impl FiniteVerdict {
    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite { .. })
    }

    pub fn is_conclusive(&self) -> bool {
        !matches!(self, Self::Inconclusive { .. })
    }
}

/// Searches for `dReq` slices whose every nonempty subset meets the bound.
pub fn check_finite(ct: &ConstraintTensor, limits: &CheckerLimits) -> FiniteVerdict {
    let target = RequiredCount::of(ct).target();
    if target == 0 {
        return FiniteVerdict::Finite { witness: Vec::new() };
    }
    if ct.len() < target {
        return FiniteVerdict::NotFinite {
            reason: NotFiniteReason::TooFewSlices {
                slices: ct.len(),
                required: target,
            },
        };
    }
    let inc = Incidence::new(ct);
    let all: Vec<usize> = (0..ct.len()).collect();
    let bound = inc.bound_of(&all);
    if bound < target as i64 {
        return FiniteVerdict::NotFinite {
            reason: NotFiniteReason::BoundBelowRequired { bound, required: target },
        };
    }
    if inc.exact() {
        let mut indep = Vec::with_capacity(target);
        for e in 0..ct.len() {
            if extends(&inc, &indep, e, limits) == Extend::Yes {
                indep.push(e);
                if indep.len() == target {
                    return FiniteVerdict::Finite { witness: indep };
                }
            }
        }
        return FiniteVerdict::NotFinite {
            reason: NotFiniteReason::MatroidRank {
                rank: indep.len(),
                required: target,
            },
        };
    }
    let mut search = Search {
        inc: &inc,
        limits,
        target,
        total: ct.len(),
        nodes: 0,
        uncertain: false,
        aborted: false,
        indep: Vec::with_capacity(target),
    };
    if search.descend(0) {
        return FiniteVerdict::Finite { witness: search.indep };
    }
    if search.aborted || search.uncertain {
        FiniteVerdict::Inconclusive { nodes: search.nodes }
    } else {
        FiniteVerdict::NotFinite {
            reason: NotFiniteReason::SearchExhausted { nodes: search.nodes },
        }
    }
}

/// Depth-first enumeration of admissible selections in lexicographic order.
/// Admissibility is inherited by subsets, so visiting every admissible set
/// without reaching the target proves none exists.
struct Search<'a> {
    inc: &'a Incidence,
    limits: &'a CheckerLimits,
    target: usize,
    total: usize,
    nodes: usize,
    uncertain: bool,
    aborted: bool,
    indep: Vec<usize>,
}

impl Search<'_> {
    fn descend(&mut self, next: usize) -> bool {
        if self.indep.len() == self.target {
            return true;
        }
        for e in next..self.total {
            if self.indep.len() + (self.total - e) < self.target {
                break;
            }
            self.nodes += 1;
            if self.nodes > self.limits.max_candidate_search {
                self.aborted = true;
                return false;
            }
            match extends(self.inc, &self.indep, e, self.limits) {
                Extend::Yes => {
                    self.indep.push(e);
                    if self.descend(e + 1) {
                        return true;
                    }
                    self.indep.pop();
                    if self.aborted {
                        return false;
                    }
                }
                Extend::No => {}
                Extend::Unknown => self.uncertain = true,
            }
        }
        false
    }
}

/// Certificate for unique completability: a finite witness plus `2d - 2`
/// further disjoint selections. The first `d - 1` extras serve modes
/// `0 .. d-2` with offset 1, the rest serve the same modes with offset `r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniqueWitness {
    pub finite_part: Vec<usize>,
    pub extras: Vec<Vec<usize>>,
}

impl UniqueWitness {
    /// (mode, offset, required size) for each extra selection.
    pub fn targets(ct: &ConstraintTensor) -> Vec<(usize, usize, usize)> {
        let dims = ct.dims();
        let r = ct.rank();
        let ones = dims.iter().enumerate().map(|(m, &n)| (m, 1, n.saturating_sub(1)));
        let rs = dims.iter().enumerate().map(|(m, &n)| (m, r, n.saturating_sub(r)));
        ones.chain(rs).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum UniqueVerdict {
    Unique { witness: UniqueWitness },
    Inconclusive { reason: String },
    NotApplicable { reason: String },
}

impl UniqueVerdict {
    pub fn is_conclusive(&self) -> bool {
        !matches!(self, Self::Inconclusive { .. })
    }
}

/// Sufficient test for unique completability. Each extra selection is
/// filled greedily from slices outside the finite witness; within one
/// selection greedy is exact, but the split across selections is not, so a
/// failure is reported as inconclusive.
pub fn check_unique(ct: &ConstraintTensor, limits: &CheckerLimits) -> UniqueVerdict {
    let finite_part = match check_finite(ct, limits) {
        FiniteVerdict::Finite { witness } => witness,
        FiniteVerdict::NotFinite { reason } => {
            return UniqueVerdict::NotApplicable {
                reason: format!("not finitely completable: {reason:?}"),
            }
        }
        FiniteVerdict::Inconclusive { nodes } => {
            return UniqueVerdict::Inconclusive {
                reason: format!("finite search inconclusive after {nodes} nodes"),
            }
        }
    };
    let inc = Incidence::new(ct);
    let mut used = vec![false; ct.len()];
    for &s in &finite_part {
        used[s] = true;
    }
    let targets = UniqueWitness::targets(ct);
    let mut extras = vec![Vec::new(); targets.len()];
    // the offset-r selections are the harder ones to fill, so they go first
    let order: Vec<usize> = (ct.dims().len()..targets.len()).chain(0..ct.dims().len()).collect();
    for i in order {
        let (mode, offset, size) = targets[i];
        let sel = &mut extras[i];
        for (s, taken) in used.iter_mut().enumerate() {
            if sel.len() == size {
                break;
            }
            if *taken {
                continue;
            }
            let mut members = sel.clone();
            members.push(s);
            if inc.mode_condition(&members, s, mode, offset) {
                sel.push(s);
                *taken = true;
            }
        }
        if sel.len() < size {
            return UniqueVerdict::Inconclusive {
                reason: format!(
                    "extra selection {i} (mode {mode}, offset {offset}) reached {} of {size} slices",
                    sel.len()
                ),
            };
        }
    }
    UniqueVerdict::Unique {
        witness: UniqueWitness { finite_part, extras },
    }
}

/// Exhaustive form of the per-selection condition of the unique test:
/// `m_mode(T) - offset >= |T|` for every nonempty `T ⊆ ids`.
pub fn mode_condition_holds(ct: &ConstraintTensor, ids: &[usize], mode: usize, offset: usize) -> bool {
    (1u64..1 << ids.len()).all(|mask| {
        let mut rows: Vec<usize> = Vec::new();
        let mut size = 0;
        for (b, &s) in ids.iter().enumerate() {
            if mask >> b & 1 == 1 {
                size += 1;
                rows.extend(ct.slices()[s].support().map(|t| t[mode]));
            }
        }
        rows.sort_unstable();
        rows.dedup();
        rows.len() >= size + offset
    })
}

/// Finite check straight from a pattern with the default basis. A pattern
/// with a last-mode row holding fewer than `rank` entries cannot be finitely completable.
pub fn check_finite_pattern(pattern: &SamplingPattern, rank: usize, limits: &CheckerLimits) -> Result<FiniteVerdict> {
    if rank == 0 {
        return Err(Error::InvalidRank);
    }
    let report = check_assumption1(pattern, rank);
    if let Some(f) = report.first_failure() {
        return Ok(FiniteVerdict::NotFinite {
            reason: NotFiniteReason::Assumption1 {
                row: f.row,
                observed: f.observed,
            },
        });
    }
    Ok(check_finite(&constraint_tensor(pattern, rank)?, limits))
}

pub fn check_unique_pattern(pattern: &SamplingPattern, rank: usize, limits: &CheckerLimits) -> Result<UniqueVerdict> {
    if rank == 0 {
        return Err(Error::InvalidRank);
    }
    let report = check_assumption1(pattern, rank);
    if let Some(f) = report.first_failure() {
        return Ok(UniqueVerdict::NotApplicable {
            reason: format!("row {} holds {} observations, fewer than rank {rank}", f.row, f.observed),
        });
    }
    Ok(check_unique(&constraint_tensor(pattern, rank)?, limits))
}

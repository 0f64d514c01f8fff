//! Constraint tensor construction.
//!
//! For every row `y` of the last matricization, `r` observed entries are set
//! aside as the basis that pins row `y` of the last factor. Each remaining
//! observation in that row becomes one slice: the `r` basis positions plus
//! the extra position, all projected onto the first `d - 1` modes.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{format_tuples, SamplingPattern};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowOccupancy {
    pub row: usize,
    pub observed: usize,
    pub passes: bool,
}

/// Per-row occupancy of the last matricization against the rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assumption1Report {
    pub rank: usize,
    pub rows: Vec<RowOccupancy>,
    pub passes: bool,
}

impl Assumption1Report {
    pub fn first_failure(&self) -> Option<&RowOccupancy> {
        self.rows.iter().find(|r| !r.passes)
    }

    fn into_result(self) -> Result<()> {
        match self.first_failure() {
            Some(f) => Err(Error::Assumption1Violated {
                row: f.row,
                observed: f.observed,
                rank: self.rank,
            }),
            None => Ok(()),
        }
    }
}

pub fn check_assumption1(pattern: &SamplingPattern, rank: usize) -> Assumption1Report {
    let last = pattern.order() - 1;
    let counts = pattern.row_counts(last).expect("last mode is in range");
    let rows: Vec<RowOccupancy> = counts
        .into_iter()
        .enumerate()
        .map(|(row, observed)| RowOccupancy {
            row,
            observed,
            passes: observed >= rank,
        })
        .collect();
    let passes = rows.iter().all(|r| r.passes);
    Assumption1Report { rank, rows, passes }
}

/// Observed tuples grouped by their last coordinate, each group sorted.
fn rows_of(pattern: &SamplingPattern) -> Vec<Vec<&[usize]>> {
    let last = pattern.order() - 1;
    let mut rows = vec![Vec::new(); pattern.dims()[last]];
    for t in pattern.observed() {
        rows[t[last]].push(t.as_slice());
    }
    rows
}

/// The `r` observed entries chosen in each row of the last matricization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisChoice {
    per_row: Vec<Vec<Vec<usize>>>,
}

impl BasisChoice {
    /// Validates an explicit choice given as full d-way tuples in any order.
    pub fn from_tuples(pattern: &SamplingPattern, rank: usize, tuples: &[Vec<usize>]) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidRank);
        }
        let d = pattern.order();
        let mut per_row = vec![Vec::new(); pattern.dims()[d - 1]];
        for t in tuples {
            if t.len() != d {
                return Err(Error::InvalidBasis(format!("{t:?} has the wrong length")));
            }
            if !pattern.contains(t) {
                return Err(Error::BasisNotObserved { tuple: t.clone() });
            }
            per_row[t[d - 1]].push(t.clone());
        }
        for (row, group) in per_row.iter_mut().enumerate() {
            group.sort_unstable();
            group.dedup();
            if group.len() != rank {
                return Err(Error::InvalidBasis(format!(
                    "row {row} has {} basis entries, expected {rank}",
                    group.len()
                )));
            }
        }
        Ok(Self { per_row })
    }

    pub fn per_row(&self) -> &[Vec<Vec<usize>>] {
        &self.per_row
    }

    pub fn rank(&self) -> usize {
        self.per_row.first().map_or(0, Vec::len)
    }

    pub fn tuples(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.per_row.iter().flatten()
    }

    pub fn contains(&self, tuple: &[usize]) -> bool {
        let row = tuple[tuple.len() - 1];
        self.per_row
            .get(row)
            .is_some_and(|g| g.iter().any(|b| b == tuple))
    }
}

/// Lexicographically smallest `r` observed tuples per row.
pub fn default_basis(pattern: &SamplingPattern, rank: usize) -> Result<BasisChoice> {
    if rank == 0 {
        return Err(Error::InvalidRank);
    }
    check_assumption1(pattern, rank).into_result()?;
    let per_row = rows_of(pattern)
        .into_iter()
        .map(|g| g.into_iter().take(rank).map(<[usize]>::to_vec).collect())
        .collect();
    Ok(BasisChoice { per_row })
}

/// Uniformly random `r`-subset of each row.
pub fn random_basis<R: Rng + ?Sized>(pattern: &SamplingPattern, rank: usize, rng: &mut R) -> Result<BasisChoice> {
    if rank == 0 {
        return Err(Error::InvalidRank);
    }
    check_assumption1(pattern, rank).into_result()?;
    let per_row = rows_of(pattern)
        .into_iter()
        .map(|g| {
            let mut pick: Vec<Vec<usize>> = sample(rng, g.len(), rank)
                .into_iter()
                .map(|k| g[k].to_vec())
                .collect();
            pick.sort_unstable();
            pick
        })
        .collect();
    Ok(BasisChoice { per_row })
}

/// One polynomial: the basis positions of its row plus one extra position,
/// all over the first `d - 1` modes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub row: usize,
    pub basis: Vec<Vec<usize>>,
    pub extra: Vec<usize>,
}

impl Slice {
    /// The `r + 1` nonzero positions: basis first, extra last.
    pub fn support(&self) -> impl Iterator<Item = &[usize]> {
        self.basis
            .iter()
            .map(Vec::as_slice)
            .chain(std::iter::once(self.extra.as_slice()))
    }

    fn lift(&self, t: &[usize]) -> Vec<usize> {
        let mut full = t.to_vec();
        full.push(self.row);
        full
    }

    /// The observed d-way entry behind the extra position.
    pub fn extra_entry(&self) -> Vec<usize> {
        self.lift(&self.extra)
    }

    /// The observed d-way entries behind every nonzero.
    pub fn entries(&self) -> Vec<Vec<usize>> {
        self.support().map(|t| self.lift(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintTensor {
    /// n_1 .. n_{d-1}
    dims: Vec<usize>,
    last_dim: usize,
    rank: usize,
    slices: Vec<Slice>,
    /// k_y per row of the last matricization.
    k: Vec<usize>,
    basis: BasisChoice,
}

impl ConstraintTensor {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// d of the original pattern.
    pub fn order(&self) -> usize {
        self.dims.len() + 1
    }

    pub fn last_dim(&self) -> usize {
        self.last_dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    /// K
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn k(&self) -> &[usize] {
        &self.k
    }

    pub fn basis(&self) -> &BasisChoice {
        &self.basis
    }

    /// Row of the last matricization each slice came from.
    pub fn block_of_slice(&self) -> Vec<usize> {
        self.slices.iter().map(|s| s.row).collect()
    }

    /// Nonzeros as (d-1)+1 tuples, the last coordinate being the slice index.
    pub fn nonzeros(&self) -> Vec<Vec<usize>> {
        let mut nz: Vec<Vec<usize>> = self
            .slices
            .iter()
            .enumerate()
            .flat_map(|(k, s)| {
                s.support().map(move |t| {
                    let mut v = t.to_vec();
                    v.push(k);
                    v
                })
            })
            .collect();
        nz.sort_unstable();
        nz
    }

    /// Pattern-format text over dims (n_1 .. n_{d-1}, K).
    pub fn to_pattern_text(&self, one_based: bool) -> String {
        let mut dims = self.dims.clone();
        dims.push(self.len());
        format_tuples(&dims, &self.nonzeros(), one_based)
    }

    /// Sidecar text: `slice row` per line.
    pub fn sidecar_text(&self, one_based: bool) -> String {
        let shift = usize::from(one_based);
        let mut out = String::from("# slice row\n");
        for (k, s) in self.slices.iter().enumerate() {
            let _ = writeln!(out, "{} {}", k + shift, s.row + shift);
        }
        out
    }
}

pub fn build_constraint_tensor(pattern: &SamplingPattern, rank: usize, basis: &BasisChoice) -> Result<ConstraintTensor> {
    if rank == 0 {
        return Err(Error::InvalidRank);
    }
    check_assumption1(pattern, rank).into_result()?;
    let d = pattern.order();
    let rows = rows_of(pattern);
    if basis.per_row().len() != rows.len() {
        return Err(Error::InvalidBasis(format!(
            "basis covers {} rows, pattern has {}",
            basis.per_row().len(),
            rows.len()
        )));
    }
    let mut slices = Vec::with_capacity(pattern.len().saturating_sub(rank * rows.len()));
    let mut k = Vec::with_capacity(rows.len());
    for (y, (group, chosen)) in rows.iter().zip(basis.per_row()).enumerate() {
        if chosen.len() != rank {
            return Err(Error::InvalidBasis(format!(
                "row {y} has {} basis entries, expected {rank}",
                chosen.len()
            )));
        }
        for b in chosen {
            if b.len() != d || b[d - 1] != y || !pattern.contains(b) {
                return Err(Error::BasisNotObserved { tuple: b.clone() });
            }
        }
        let projected: Vec<Vec<usize>> = chosen.iter().map(|b| b[..d - 1].to_vec()).collect();
        let extras: Vec<&[usize]> = group.iter().copied().filter(|t| !chosen.iter().any(|b| b == t)).collect();
        k.push(extras.len());
        slices.extend(extras.into_iter().map(|t| Slice {
            row: y,
            basis: projected.clone(),
            extra: t[..d - 1].to_vec(),
        }));
    }
    Ok(ConstraintTensor {
        dims: pattern.dims()[..d - 1].to_vec(),
        last_dim: pattern.dims()[d - 1],
        rank,
        slices,
        k,
        basis: basis.clone(),
    })
}

/// Constraint tensor with the default basis.
pub fn constraint_tensor(pattern: &SamplingPattern, rank: usize) -> Result<ConstraintTensor> {
    let basis = default_basis(pattern, rank)?;
    build_constraint_tensor(pattern, rank, &basis)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn zero_based(tuples: &[[usize; 3]]) -> Vec<Vec<usize>> {
        tuples.iter().map(|t| t.iter().map(|x| x - 1).collect()).collect()
    }

    fn example1() -> SamplingPattern {
        let s = [
            [1, 1, 1],
            [1, 2, 1],
            [2, 3, 1],
            [3, 3, 1],
            [1, 1, 2],
            [2, 1, 2],
            [3, 2, 2],
            [1, 3, 3],
            [3, 2, 3],
        ];
        SamplingPattern::new(vec![3, 3, 3], zero_based(&s)).unwrap()
    }

    fn motivating() -> SamplingPattern {
        SamplingPattern::new(
            vec![2, 2, 2],
            vec![vec![0, 0, 0], vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]],
        )
        .unwrap()
    }

    #[test]
    fn assumption1_reports() {
        let rep = check_assumption1(&motivating(), 1);
        assert!(rep.passes);
        assert_eq!(rep.rows.iter().map(|r| r.observed).collect::<Vec<_>>(), vec![3, 1]);
        let rep = check_assumption1(&example1(), 2);
        assert!(rep.passes);
        assert_eq!(rep.rows.iter().map(|r| r.observed).collect::<Vec<_>>(), vec![4, 3, 2]);
        let rep = check_assumption1(&example1(), 3);
        assert!(!rep.passes);
        assert_eq!(rep.first_failure().unwrap().row, 2);
    }

    #[test]
    fn default_basis_is_lexicographic() {
        let b = default_basis(&motivating(), 1).unwrap();
        assert_eq!(b.per_row(), &[vec![vec![0, 0, 0]], vec![vec![0, 0, 1]]]);
        assert!(matches!(
            default_basis(&example1(), 3),
            Err(Error::Assumption1Violated { row: 2, observed: 2, rank: 3 })
        ));
        // row 2 has exactly r = 2 observations: basis is all of them
        let b = default_basis(&example1(), 2).unwrap();
        assert_eq!(b.per_row()[2], zero_based(&[[1, 3, 3], [3, 2, 3]]));
    }

    #[test]
    fn example1_with_explicit_basis() {
        let basis_tuples = zero_based(&[[2, 3, 1], [3, 3, 1], [1, 1, 2], [2, 1, 2], [1, 3, 3], [3, 2, 3]]);
        let basis = BasisChoice::from_tuples(&example1(), 2, &basis_tuples).unwrap();
        let ct = build_constraint_tensor(&example1(), 2, &basis).unwrap();
        assert_eq!(ct.k(), &[2, 1, 0]);
        assert_eq!(ct.len(), 3);
        let got: BTreeSet<Vec<usize>> = ct.nonzeros().into_iter().collect();
        let want: BTreeSet<Vec<usize>> = zero_based(&[
            [1, 1, 1],
            [1, 2, 2],
            [2, 3, 1],
            [2, 3, 2],
            [3, 3, 1],
            [3, 3, 2],
            [1, 1, 3],
            [2, 1, 3],
            [3, 2, 3],
        ])
        .into_iter()
        .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn basis_must_be_observed() {
        let bad = zero_based(&[[2, 2, 1], [3, 3, 1], [1, 1, 2], [2, 1, 2], [1, 3, 3], [3, 2, 3]]);
        assert!(matches!(
            BasisChoice::from_tuples(&example1(), 2, &bad),
            Err(Error::BasisNotObserved { .. })
        ));
        let short = zero_based(&[[2, 3, 1], [1, 1, 2], [2, 1, 2], [1, 3, 3], [3, 2, 3]]);
        assert!(matches!(
            BasisChoice::from_tuples(&example1(), 2, &short),
            Err(Error::InvalidBasis(_))
        ));
    }

    #[test]
    fn slice_counts() {
        let ct = constraint_tensor(&motivating(), 1).unwrap();
        assert_eq!(ct.len(), 2);
        let full = SamplingPattern::full(vec![2, 2, 2]).unwrap();
        let ct = constraint_tensor(&full, 1).unwrap();
        assert_eq!(ct.len(), 6);
        assert!(ct.slices().iter().all(|s| s.support().count() == 2));
    }

    #[test]
    fn sidecar_and_text() {
        let ct = constraint_tensor(&motivating(), 1).unwrap();
        assert_eq!(ct.sidecar_text(false), "# slice row\n0 0\n1 0\n");
        assert_eq!(
            ct.to_pattern_text(false),
            "dims: 2 2 2\n0 0 0\n0 0 1\n0 1 0\n1 0 1\n"
        );
    }

    #[test]
    fn random_basis_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = example1();
        for _ in 0..10 {
            let b = random_basis(&p, 2, &mut rng).unwrap();
            assert!(b.tuples().all(|t| p.contains(t)));
            assert!(b.per_row().iter().all(|g| g.len() == 2));
            build_constraint_tensor(&p, 2, &b).unwrap();
        }
    }
}

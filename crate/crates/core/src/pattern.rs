//! Binary sampling patterns, unfoldings and the plain-text pattern format.
//!
//! A pattern is stored in canonical form: a lexicographically sorted,
//! duplicate-free list of observed multi-indices. All coordinates are 0-based.
//!
//! The text format is a `dims:` header followed by one observed tuple per
//! line. Lines starting with `#` and blank lines are ignored. A body made of
//! single-token lines of `0`/`1` digits is read as a dense row-major tensor
//! instead.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SamplingPattern {
    dims: Vec<usize>,
    observed: Vec<Vec<usize>>,
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidShape(format!(
            "need at least 2 modes, got {}",
            dims.len()
        )));
    }
    if let Some(pos) = dims.iter().position(|&n| n == 0) {
        return Err(Error::InvalidShape(format!("mode {pos} has size 0")));
    }
    Ok(())
}

impl SamplingPattern {
    /// Builds a pattern from arbitrary-order tuples. Duplicates and
    /// out-of-range coordinates are rejected.
    pub fn new(dims: Vec<usize>, mut observed: Vec<Vec<usize>>) -> Result<Self> {
        check_dims(&dims)?;
        for t in &observed {
            if t.len() != dims.len() || t.iter().zip(&dims).any(|(&x, &n)| x >= n) {
                return Err(Error::Bounds {
                    line: 0,
                    tuple: t.clone(),
                    dims: dims.clone(),
                });
            }
        }
        observed.sort_unstable();
        if let Some(w) = observed.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateEntry {
                line: None,
                tuple: w[0].clone(),
            });
        }
        Ok(Self { dims, observed })
    }

    pub fn empty(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, Vec::new())
    }

    /// Every cell observed.
    pub fn full(dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims)?;
        let observed = MixedRadix::new(dims.clone()).iter().collect();
        Ok(Self { dims, observed })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn observed(&self) -> &[Vec<usize>] {
        &self.observed
    }

    /// N_Ω of the whole tensor.
    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn contains(&self, tuple: &[usize]) -> bool {
        self.observed
            .binary_search_by(|t| t.as_slice().cmp(tuple))
            .is_ok()
    }

    /// Copy with one more observed entry; a no-op if it is already observed.
    pub fn with_entry(&self, tuple: Vec<usize>) -> Result<Self> {
        if tuple.len() != self.order() || tuple.iter().zip(&self.dims).any(|(&x, &n)| x >= n) {
            return Err(Error::Bounds {
                line: 0,
                tuple,
                dims: self.dims.clone(),
            });
        }
        let mut observed = self.observed.clone();
        if let Err(pos) = observed.binary_search(&tuple) {
            observed.insert(pos, tuple);
        }
        Ok(Self {
            dims: self.dims.clone(),
            observed,
        })
    }

    /// Reorders modes: new mode `k` is old mode `perm[k]`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<Self> {
        let d = self.order();
        let mut seen = vec![false; d];
        if perm.len() != d || perm.iter().any(|&p| p >= d || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidShape(format!("{perm:?} is not a permutation of 0..{d}")));
        }
        let dims = perm.iter().map(|&p| self.dims[p]).collect();
        let observed = self
            .observed
            .iter()
            .map(|t| perm.iter().map(|&p| t[p]).collect())
            .collect();
        Self::new(dims, observed)
    }

    /// Observation count in every row of the `mode`-th matricization.
    pub fn row_counts(&self, mode: usize) -> Result<Vec<usize>> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        let mut counts = vec![0; self.dims[mode]];
        for t in &self.observed {
            counts[t[mode]] += 1;
        }
        Ok(counts)
    }

    pub fn mode_counts(&self) -> Result<ModeCounts> {
        mode_counts(self.observed.iter().map(Vec::as_slice), self.order())
    }
}

/// m_i: number of nonzero rows of each matricization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeCounts(pub Vec<usize>);

impl ModeCounts {
    pub fn sum(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn max(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }
}

/// Distinct coordinate values per mode over a set of tuples of length `order`.
pub fn mode_counts<'a, I>(tuples: I, order: usize) -> Result<ModeCounts>
where
    I: IntoIterator<Item = &'a [usize]>,
{
    let mut seen: Vec<Vec<usize>> = vec![Vec::new(); order];
    let mut any = false;
    for t in tuples {
        any = true;
        for (mode, &x) in t.iter().enumerate().take(order) {
            seen[mode].push(x);
        }
    }
    if !any {
        return Err(Error::EmptyInput);
    }
    Ok(ModeCounts(
        seen.into_iter()
            .map(|mut v| {
                v.sort_unstable();
                v.dedup();
                v.len()
            })
            .collect(),
    ))
}

/// Nonempty set of modes, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    modes: Vec<usize>,
}

impl IndexSet {
    pub fn new(mut modes: Vec<usize>, order: usize) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::EmptyIndexSet);
        }
        modes.sort_unstable();
        modes.dedup();
        if let Some(&mode) = modes.iter().find(|&&m| m >= order) {
            return Err(Error::ModeOutOfRange { mode, order });
        }
        Ok(Self { modes })
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn complement(&self, order: usize) -> Vec<usize> {
        (0..order).filter(|m| !self.modes.contains(m)).collect()
    }
}

/// Mixed-radix bijection between coordinate tuples and `0..product`.
/// The first radix is the most significant digit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixedRadix {
    radices: Vec<usize>,
}

impl MixedRadix {
    pub fn new(radices: Vec<usize>) -> Self {
        Self { radices }
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn size(&self) -> usize {
        self.radices.iter().product()
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.radices.len());
        digits
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&x, &n)| acc * n + x)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.radices.len()];
        for (slot, &n) in digits.iter_mut().zip(&self.radices).rev() {
            *slot = index % n;
            index /= n;
        }
        digits
    }

    /// All tuples in increasing encoded (= lexicographic) order.
    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.size()).map(move |i| self.decode(i))
    }
}

/// Sparse 0/1 matrix Ũ_(I) of a pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnfoldingMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Sorted (row, col) pairs.
    pub nonzeros: Vec<(usize, usize)>,
    pub row_modes: Vec<usize>,
    pub col_modes: Vec<usize>,
    pub row_map: MixedRadix,
    pub col_map: MixedRadix,
}

impl UnfoldingMatrix {
    /// Nonzeros per row.
    pub fn row_occupancy(&self) -> Vec<usize> {
        let mut occ = vec![0; self.rows];
        for &(r, _) in &self.nonzeros {
            occ[r] += 1;
        }
        occ
    }

    /// Nonzeros per column.
    pub fn col_occupancy(&self) -> Vec<usize> {
        let mut occ = vec![0; self.cols];
        for &(_, c) in &self.nonzeros {
            occ[c] += 1;
        }
        occ
    }

    /// Tensor coordinates of cell (row, col).
    pub fn tuple_of(&self, row: usize, col: usize) -> Vec<usize> {
        let mut t = vec![0; self.row_modes.len() + self.col_modes.len()];
        for (&m, x) in self.row_modes.iter().zip(self.row_map.decode(row)) {
            t[m] = x;
        }
        for (&m, x) in self.col_modes.iter().zip(self.col_map.decode(col)) {
            t[m] = x;
        }
        t
    }

    pub fn cell_of(&self, tuple: &[usize]) -> (usize, usize) {
        let rd: Vec<usize> = self.row_modes.iter().map(|&m| tuple[m]).collect();
        let cd: Vec<usize> = self.col_modes.iter().map(|&m| tuple[m]).collect();
        (self.row_map.encode(&rd), self.col_map.encode(&cd))
    }
}

pub fn unfold(pattern: &SamplingPattern, index_set: &IndexSet) -> Result<UnfoldingMatrix> {
    let d = pattern.order();
    if let Some(&mode) = index_set.modes().iter().find(|&&m| m >= d) {
        return Err(Error::ModeOutOfRange { mode, order: d });
    }
    if index_set.len() == d {
        return Err(Error::FullIndexSet);
    }
    let row_modes = index_set.modes().to_vec();
    let col_modes = index_set.complement(d);
    let row_map = MixedRadix::new(row_modes.iter().map(|&m| pattern.dims()[m]).collect());
    let col_map = MixedRadix::new(col_modes.iter().map(|&m| pattern.dims()[m]).collect());
    let mut matrix = UnfoldingMatrix {
        rows: row_map.size(),
        cols: col_map.size(),
        nonzeros: Vec::with_capacity(pattern.len()),
        row_modes,
        col_modes,
        row_map,
        col_map,
    };
    matrix.nonzeros = pattern.observed().iter().map(|t| matrix.cell_of(t)).collect();
    matrix.nonzeros.sort_unstable();
    Ok(matrix)
}

/// The `mode`-th matricization, i.e. `unfold` with I = {mode}.
pub fn matricization(pattern: &SamplingPattern, mode: usize) -> Result<UnfoldingMatrix> {
    if mode >= pattern.order() {
        return Err(Error::ModeOutOfRange {
            mode,
            order: pattern.order(),
        });
    }
    unfold(pattern, &IndexSet { modes: vec![mode] })
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("expected a nonnegative integer, found {tok:?}"),
    })
}

/// Parses the text format. With `one_based`, tuple coordinates start at 1.
pub fn parse_pattern(text: &str, one_based: bool) -> Result<SamplingPattern> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing `dims:` header".into(),
    })?;
    let rest = header.strip_prefix("dims:").ok_or_else(|| Error::Parse {
        line: hline,
        message: "expected `dims: n_1 ... n_d` header".into(),
    })?;
    let dims = rest
        .split_whitespace()
        .map(|t| parse_usize(t, hline))
        .collect::<Result<Vec<_>>>()?;
    check_dims(&dims).map_err(|e| Error::Parse {
        line: hline,
        message: e.to_string(),
    })?;
    let d = dims.len();

    let body: Vec<(usize, Vec<&str>)> = lines
        .map(|(i, l)| (i, l.split_whitespace().collect()))
        .collect();
    let dense = !body.is_empty()
        && body
            .iter()
            .all(|(_, toks)| toks.len() == 1 && toks[0].bytes().all(|b| b == b'0' || b == b'1'));

    if dense {
        let radix = MixedRadix::new(dims.clone());
        let digits: Vec<(usize, u8)> = body
            .iter()
            .flat_map(|(i, toks)| toks[0].bytes().map(move |b| (*i, b)))
            .collect();
        if digits.len() != radix.size() {
            let line = body.last().map_or(hline, |(i, _)| *i);
            return Err(Error::Parse {
                line,
                message: format!(
                    "dense body has {} digits, expected {}",
                    digits.len(),
                    radix.size()
                ),
            });
        }
        let observed = digits
            .iter()
            .enumerate()
            .filter(|(_, (_, b))| *b == b'1')
            .map(|(k, _)| radix.decode(k))
            .collect();
        return Ok(SamplingPattern { dims, observed });
    }

    let mut observed = Vec::with_capacity(body.len());
    let mut lines_of = Vec::with_capacity(body.len());
    for (line, toks) in body {
        if toks.len() != d {
            return Err(Error::Parse {
                line,
                message: format!("expected {d} coordinates, found {}", toks.len()),
            });
        }
        let mut tuple = Vec::with_capacity(d);
        for tok in toks {
            let x = parse_usize(tok, line)?;
            if one_based && x == 0 {
                return Err(Error::Bounds {
                    line,
                    tuple: vec![0],
                    dims: dims.clone(),
                });
            }
            tuple.push(if one_based { x - 1 } else { x });
        }
        if tuple.iter().zip(&dims).any(|(&x, &n)| x >= n) {
            return Err(Error::Bounds {
                line,
                tuple,
                dims: dims.clone(),
            });
        }
        observed.push(tuple);
        lines_of.push(line);
    }
    let mut order: Vec<usize> = (0..observed.len()).collect();
    order.sort_by(|&a, &b| observed[a].cmp(&observed[b]));
    if let Some(w) = order.windows(2).find(|w| observed[w[0]] == observed[w[1]]) {
        return Err(Error::DuplicateEntry {
            line: Some(lines_of[w[0]].max(lines_of[w[1]])),
            tuple: observed[w[0]].clone(),
        });
    }
    let observed = order.into_iter().map(|k| observed[k].clone()).collect();
    Ok(SamplingPattern { dims, observed })
}

pub fn format_tuples(dims: &[usize], tuples: &[Vec<usize>], one_based: bool) -> String {
    let mut out = String::new();
    let join = |v: &[usize], shift: usize| {
        v.iter()
            .map(|x| (x + shift).to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(out, "dims: {}", join(dims, 0));
    for t in tuples {
        let _ = writeln!(out, "{}", join(t, usize::from(one_based)));
    }
    out
}

pub fn format_pattern(pattern: &SamplingPattern) -> String {
    format_tuples(pattern.dims(), pattern.observed(), false)
}

pub fn read_pattern(path: impl AsRef<Path>, one_based: bool) -> Result<SamplingPattern> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_pattern(&text, one_based)
}

pub fn write_pattern(pattern: &SamplingPattern, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_pattern(pattern)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

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
        SamplingPattern::new(
            vec![3, 3, 3],
            s.iter().map(|t| t.iter().map(|x| x - 1).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn origin_maps_to_origin() {
        let p = SamplingPattern::new(vec![2, 2, 2], vec![vec![0, 0, 0]]).unwrap();
        let u = unfold(&p, &IndexSet::new(vec![0], 3).unwrap()).unwrap();
        assert_eq!(u.nonzeros, vec![(0, 0)]);
        assert_eq!((u.rows, u.cols), (2, 4));
    }

    #[test]
    fn example1_last_matricization_rows() {
        let m = matricization(&example1(), 2).unwrap();
        assert_eq!(m.row_occupancy(), vec![4, 3, 2]);
        assert_eq!(example1().row_counts(2).unwrap(), vec![4, 3, 2]);
    }

    #[test]
    fn full_observation_unfolding() {
        let p = SamplingPattern::full(vec![2, 3, 4]).unwrap();
        let u = unfold(&p, &IndexSet::new(vec![0, 1], 3).unwrap()).unwrap();
        assert_eq!((u.rows, u.cols, u.nonzeros.len()), (6, 4, 24));
    }

    #[test]
    fn mixed_radix_first_mode_most_significant() {
        let r = MixedRadix::new(vec![2, 3, 4]);
        assert_eq!(r.encode(&[1, 0, 0]), 12);
        assert_eq!(r.encode(&[0, 1, 0]), 4);
        assert_eq!(r.decode(23), vec![1, 2, 3]);
    }

    #[test]
    fn matricization_small() {
        let p = SamplingPattern::new(vec![2, 2, 2], vec![vec![0, 0, 0], vec![1, 0, 0]]).unwrap();
        let m = matricization(&p, 0).unwrap();
        assert_eq!(m.nonzeros, vec![(0, 0), (1, 0)]);
        let motivating = SamplingPattern::new(
            vec![2, 2, 2],
            vec![vec![0, 0, 0], vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]],
        )
        .unwrap();
        assert_eq!(matricization(&motivating, 2).unwrap().row_occupancy(), vec![3, 1]);
    }

    #[test]
    fn unfolding_errors() {
        let p = SamplingPattern::full(vec![2, 2]).unwrap();
        assert!(matches!(IndexSet::new(vec![], 2), Err(Error::EmptyIndexSet)));
        let all = IndexSet::new(vec![0, 1], 2).unwrap();
        assert!(matches!(unfold(&p, &all), Err(Error::FullIndexSet)));
        assert!(matches!(
            matricization(&p, 2),
            Err(Error::ModeOutOfRange { mode: 2, order: 2 })
        ));
    }

    #[test]
    fn mode_count_examples() {
        let one = SamplingPattern::new(vec![3, 4, 5], vec![vec![2, 1, 4]]).unwrap();
        assert_eq!(one.mode_counts().unwrap(), ModeCounts(vec![1, 1, 1]));
        assert_eq!(example1().mode_counts().unwrap(), ModeCounts(vec![3, 3, 3]));
        let two = SamplingPattern::new(vec![3, 4, 5], vec![vec![0, 1, 4], vec![2, 1, 4]]).unwrap();
        assert_eq!(two.mode_counts().unwrap(), ModeCounts(vec![2, 1, 1]));
        let empty = SamplingPattern::empty(vec![2, 2]).unwrap();
        assert!(matches!(empty.mode_counts(), Err(Error::EmptyInput)));
    }

    #[test]
    fn one_based_matches_zero_based() {
        let p = example1();
        let zero = format_tuples(p.dims(), p.observed(), false);
        let one = format_tuples(p.dims(), p.observed(), true);
        assert_ne!(zero, one);
        assert_eq!(parse_pattern(&one, true).unwrap(), p);
        assert_eq!(parse_pattern(&zero, false).unwrap(), p);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_pattern("dims: 2 2\n0 0\n0 2\n", false).unwrap_err();
        assert!(matches!(err, Error::Bounds { line: 3, .. }), "{err}");
        let err = parse_pattern("dims: 2 2\n# c\n1 1\n1 1\n", false).unwrap_err();
        assert!(matches!(err, Error::DuplicateEntry { line: Some(4), .. }), "{err}");
        let err = parse_pattern("dims: 2 2\n1 x\n", false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_pattern("0 0\n", false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse_pattern("dims: 2 2\n0 0 0\n", false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_pattern("dims: 2 2\n0 1\n", true).unwrap_err();
        assert!(matches!(err, Error::Bounds { line: 2, .. }), "{err}");
    }

    #[test]
    fn dense_body() {
        let p = parse_pattern("dims: 2 2 2\n1110\n1000\n", false).unwrap();
        let expected = SamplingPattern::new(
            vec![2, 2, 2],
            vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]],
        )
        .unwrap();
        assert_eq!(p, expected);
        assert!(parse_pattern("dims: 2 2 2\n111\n", false).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ex1.pat");
        write_pattern(&example1(), &path).unwrap();
        assert_eq!(read_pattern(&path, false).unwrap(), example1());
        assert!(matches!(
            read_pattern(dir.path().join("missing.pat"), false),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(SamplingPattern::new(vec![3], vec![]).is_err());
        assert!(SamplingPattern::new(vec![3, 0], vec![]).is_err());
        assert!(matches!(
            SamplingPattern::new(vec![2, 2], vec![vec![1, 1], vec![1, 1]]),
            Err(Error::DuplicateEntry { .. })
        ));
        assert!(matches!(
            SamplingPattern::new(vec![2, 2], vec![vec![1, 2]]),
            Err(Error::Bounds { .. })
        ));
    }
}

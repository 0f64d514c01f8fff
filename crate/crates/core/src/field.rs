//! Arithmetic in GF(p) for p = 2^31 - 1 and exact linear algebra over it.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;

/// The Mersenne prime 2^31 - 1.
pub const PRIME: u64 = (1 << 31) - 1;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Fp(u32);

impl Fp {
    pub const ZERO: Fp = Fp(0);
    pub const ONE: Fp = Fp(1);

    pub fn new(v: u64) -> Self {
        Fp((v % PRIME) as u32)
    }

    pub fn from_i64(v: i64) -> Self {
        Fp(v.rem_euclid(PRIME as i64) as u32)
    }

    pub fn value(self) -> u64 {
        u64::from(self.0)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Uniform over the nonzero elements.
    pub fn random_nonzero<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Fp(rng.random_range(1..PRIME as u32))
    }

    pub fn pow(self, mut e: u64) -> Self {
        let mut base = self;
        let mut acc = Fp::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(self) -> Option<Self> {
        (!self.is_zero()).then(|| self.pow(PRIME - 2))
    }
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for Fp {
    type Output = Fp;
    fn add(self, rhs: Fp) -> Fp {
        let s = self.0 + rhs.0;
        Fp(if s >= PRIME as u32 { s - PRIME as u32 } else { s })
    }
}

impl Sub for Fp {
    type Output = Fp;
    fn sub(self, rhs: Fp) -> Fp {
        self + (-rhs)
    }
}

impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        if self.0 == 0 {
            self
        } else {
            Fp(PRIME as u32 - self.0)
        }
    }
}

impl Mul for Fp {
    type Output = Fp;
    fn mul(self, rhs: Fp) -> Fp {
        let prod = u64::from(self.0) * u64::from(rhs.0);
        // 2^31 = 1 mod p
        let folded = (prod & PRIME) + (prod >> 31);
        Fp::new(folded)
    }
}

impl AddAssign for Fp {
    fn add_assign(&mut self, rhs: Fp) {
        *self = *self + rhs;
    }
}

impl SubAssign for Fp {
    fn sub_assign(&mut self, rhs: Fp) {
        *self = *self - rhs;
    }
}

impl MulAssign for Fp {
    fn mul_assign(&mut self, rhs: Fp) {
        *self = *self * rhs;
    }
}

impl std::iter::Sum for Fp {
    fn sum<I: Iterator<Item = Fp>>(iter: I) -> Fp {
        iter.fold(Fp::ZERO, Add::add)
    }
}

impl std::iter::Product for Fp {
    fn product<I: Iterator<Item = Fp>>(iter: I) -> Fp {
        iter.fold(Fp::ONE, Mul::mul)
    }
}

/// Row space accumulated one vector at a time, kept in reduced echelon
/// form keyed by pivot column.
#[derive(Debug, Clone)]
pub struct EchelonBasis {
    width: usize,
    /// (pivot column, row normalized so the pivot is 1)
    rows: Vec<(usize, Vec<Fp>)>,
}

impl EchelonBasis {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Reduces `v` against the basis; inserts it and returns true when it is
    /// independent of the rows seen so far.
    pub fn insert(&mut self, mut v: Vec<Fp>) -> bool {
        debug_assert_eq!(v.len(), self.width);
        for (pivot, row) in &self.rows {
            let c = v[*pivot];
            if !c.is_zero() {
                for (x, &y) in v.iter_mut().zip(row) {
                    *x -= c * y;
                }
            }
        }
        let Some(pivot) = v.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = v[pivot].inv().expect("nonzero pivot");
        for x in &mut v {
            *x *= inv;
        }
        for (_, row) in &mut self.rows {
            let c = row[pivot];
            if !c.is_zero() {
                for (x, &y) in row.iter_mut().zip(&v) {
                    *x -= c * y;
                }
            }
        }
        self.rows.push((pivot, v));
        true
    }
}

/// Rank of a dense matrix given as rows.
pub fn rank<I: IntoIterator<Item = Vec<Fp>>>(width: usize, rows: I) -> usize {
    let mut basis = EchelonBasis::new(width);
    for r in rows {
        basis.insert(r);
        if basis.rank() == width {
            break;
        }
    }
    basis.rank()
}

/// Solves the square system `a x = b`; `None` when `a` is singular.
pub fn solve(mut a: Vec<Vec<Fp>>, mut b: Vec<Fp>) -> Option<Vec<Fp>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].inv()?;
        for x in &mut a[col] {
            *x *= inv;
        }
        b[col] *= inv;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let c = a[r][col];
                let pivot_row = a[col].clone();
                for (x, y) in a[r].iter_mut().zip(pivot_row) {
                    *x -= c * y;
                }
                let bc = b[col];
                b[r] -= c * bc;
            }
        }
    }
    Some(b)
}

//! Exact rational and integer linear algebra.
//!
//! Rationals are `num_rational::BigRational`, which keeps every value
//! reduced with a positive denominator. Vectors are plain `Vec`s; matrices
//! of integers get a small wrapper so unimodular transforms can be checked.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Int = BigInt;
pub type Rat = BigRational;
pub type IVec = Vec<BigInt>;
pub type QVec = Vec<Rat>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("zero vector has no primitive direction")]
    ZeroVector,
    #[error("invalid rational {input:?} at byte {pos}: {reason}")]
    ParseRat {
        input: String,
        pos: usize,
        reason: String,
    },
}

pub fn int(n: i64) -> Int {
    BigInt::from(n)
}

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: &Int) -> Rat {
    Rat::from_integer(n.clone())
}

pub fn ivec(v: &[i64]) -> IVec {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

pub fn qvec(v: &[(i64, i64)]) -> QVec {
    v.iter().map(|&(n, d)| rat(n, d)).collect()
}

pub fn to_qvec(v: &[Int]) -> QVec {
    v.iter().map(rat_int).collect()
}

/// Parses `"p/q"` or `"p"`. Whitespace around the parts is not accepted.
pub fn parse_rat(s: &str) -> Result<Rat, ExactError> {
    let err = |pos: usize, reason: &str| ExactError::ParseRat {
        input: s.to_string(),
        pos,
        reason: reason.to_string(),
    };
    let parse_int = |part: &str, offset: usize| -> Result<BigInt, ExactError> {
        if part.is_empty() {
            return Err(err(offset, "empty integer"));
        }
        let digits = part.strip_prefix(['-', '+']).unwrap_or(part);
        if digits.is_empty() {
            return Err(err(offset, "sign without digits"));
        }
        if let Some(i) = digits.bytes().position(|c| !c.is_ascii_digit()) {
            let at = offset + (part.len() - digits.len()) + i;
            return Err(err(at, "unexpected character"));
        }
        part.parse::<BigInt>().map_err(|_| err(offset, "bad integer"))
    };
    match s.split_once('/') {
        None => Ok(Rat::from_integer(parse_int(s, 0)?)),
        Some((p, q)) => {
            let num = parse_int(p, 0)?;
            let den = parse_int(q, p.len() + 1)?;
            if den.is_zero() {
                return Err(err(p.len() + 1, "zero denominator"));
            }
            Ok(Rat::new(num, den))
        }
    }
}

pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn floor_rat(r: &Rat) -> Int {
    r.numer().div_floor(r.denom())
}

pub fn ceil_rat(r: &Rat) -> Int {
    -((-r.numer()).div_floor(r.denom()))
}

pub fn is_integer(r: &Rat) -> bool {
    r.denom().is_one()
}

/// Distance from `r` to the nearest integer.
pub fn dist_to_int(r: &Rat) -> Rat {
    let f = r - rat_int(&floor_rat(r));
    let g = Rat::one() - &f;
    if f < g {
        f
    } else {
        g
    }
}

pub fn lcm_denoms<'a>(it: impl IntoIterator<Item = &'a Rat>) -> Int {
    it.into_iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

pub fn to_i64(n: &Int) -> Option<i64> {
    n.to_i64()
}

pub fn dot_int(a: &[Int], b: &[Int]) -> Int {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dot_iq(a: &[Int], b: &[Rat]) -> Rat {
    let mut acc = Rat::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() {
            acc += y * x;
        }
    }
    acc
}

pub fn norm2(a: &[Int]) -> Int {
    a.iter().map(|x| x * x).sum()
}

pub fn gcd_vec(v: &[Int]) -> Int {
    v.iter().fold(BigInt::zero(), |g, x| g.gcd(x))
}

pub fn primitivize(v: &[Int]) -> Result<(IVec, Int), ExactError> {
    let g = gcd_vec(v);
    if g.is_zero() {
        return Err(ExactError::ZeroVector);
    }
    Ok((v.iter().map(|x| x / &g).collect(), g))
}

/// Simplest rational (smallest denominator, then smallest magnitude) in the
/// closed interval `[lo, hi]`, by continued-fraction descent.
pub fn simplest_between(lo: &Rat, hi: &Rat) -> Rat {
    assert!(lo <= hi);
    if !lo.is_positive() && !hi.is_negative() {
        return Rat::zero();
    }
    if hi.is_negative() {
        return -simplest_between(&-hi, &-lo);
    }
    let fl = floor_rat(lo);
    if is_integer(lo) {
        return lo.clone();
    }
    let up = rat_int(&(&fl + 1));
    if up <= *hi {
        return up;
    }
    let flq = rat_int(&fl);
    let inner = simplest_between(&(hi - &flq).recip(), &(lo - &flq).recip());
    flq + inner.recip()
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<Int>>,
}

impl IMat {
    pub fn new(data: Vec<Vec<Int>>) -> IMat {
        let rows = data.len();
        let cols = data.first().map_or(0, |r| r.len());
        assert!(data.iter().all(|r| r.len() == cols), "ragged matrix");
        IMat { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> IMat {
        IMat {
            rows,
            cols,
            data: vec![vec![BigInt::zero(); cols]; rows],
        }
    }

    pub fn from_i64(rows: &[&[i64]]) -> IMat {
        IMat::new(rows.iter().map(|r| ivec(r)).collect())
    }

    pub fn identity(n: usize) -> IMat {
        let mut m = IMat::zeros(n, n);
        for i in 0..n {
            m.data[i][i] = BigInt::one();
        }
        m
    }

    pub fn transpose(&self) -> IMat {
        let mut t = IMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j][i] = self.data[i][j].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IMat) -> IMat {
        assert_eq!(self.cols, other.rows);
        let mut out = IMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let x = &self.data[i][k];
                if x.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i][j] += x * &other.data[k][j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Int]) -> IVec {
        self.data.iter().map(|r| dot_int(r, v)).collect()
    }

    pub fn mul_qvec(&self, v: &[Rat]) -> QVec {
        self.data.iter().map(|r| dot_iq(r, v)).collect()
    }

    pub fn to_rat(&self) -> Vec<QVec> {
        self.data.iter().map(|r| to_qvec(r)).collect()
    }

    pub fn det(&self) -> Int {
        assert_eq!(self.rows, self.cols);
        det_exact(&self.to_rat()).to_integer()
    }

    pub fn is_unimodular(&self) -> bool {
        self.rows == self.cols && self.det().abs().is_one()
    }

    /// Inverse of a unimodular matrix, which is again integral.
    pub fn unimodular_inverse(&self) -> Option<IMat> {
        if !self.is_unimodular() {
            return None;
        }
        let inv = rat_inverse(&self.to_rat())?;
        Some(IMat::new(
            inv.into_iter()
                .map(|r| r.into_iter().map(|x| x.to_integer()).collect())
                .collect(),
        ))
    }
}

impl fmt::Display for IMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.data {
            let cells: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

fn swap_rows(m: &mut IMat, i: usize, j: usize) {
    m.data.swap(i, j);
}

/// Replaces rows `i`, `j` by `(p*ri + q*rj, r*ri + s*rj)`.
fn combine_rows(m: &mut IMat, i: usize, j: usize, p: &Int, q: &Int, r: &Int, s: &Int) {
    for c in 0..m.cols {
        let a = m.data[i][c].clone();
        let b = m.data[j][c].clone();
        m.data[i][c] = p * &a + q * &b;
        m.data[j][c] = r * &a + s * &b;
    }
}

fn add_row_multiple(m: &mut IMat, target: usize, src: usize, factor: &Int) {
    if factor.is_zero() {
        return;
    }
    for c in 0..m.cols {
        let v = &m.data[src][c] * factor;
        m.data[target][c] -= v;
    }
}

fn negate_row(m: &mut IMat, i: usize) {
    for x in m.data[i].iter_mut() {
        *x = -x.clone();
    }
}

/// Row-style Hermite normal form: returns `(H, U)` with `U * M = H`,
/// `U` unimodular, `H` in row echelon form with positive pivots and the
/// entries above each pivot reduced into `[0, pivot)`.
pub fn hnf(m: &IMat) -> (IMat, IMat) {
    let mut h = m.clone();
    let mut u = IMat::identity(m.rows);
    let mut prow = 0;
    for col in 0..m.cols {
        if prow == m.rows {
            break;
        }
        // fold every nonzero entry below prow into prow with gcd steps
        for r in (prow + 1)..m.rows {
            if h.data[r][col].is_zero() {
                continue;
            }
            if h.data[prow][col].is_zero() {
                swap_rows(&mut h, prow, r);
                swap_rows(&mut u, prow, r);
                continue;
            }
            let a = h.data[prow][col].clone();
            let b = h.data[r][col].clone();
            let eg = a.extended_gcd(&b);
            let (g, x, y) = (eg.gcd, eg.x, eg.y);
            let ag = &a / &g;
            let bg = &b / &g;
            // [x y; -b/g a/g] has determinant 1
            let nbg = -bg;
            combine_rows(&mut h, prow, r, &x, &y, &nbg, &ag);
            combine_rows(&mut u, prow, r, &x, &y, &nbg, &ag);
        }
        if h.data[prow][col].is_zero() {
            continue;
        }
        if h.data[prow][col].is_negative() {
            negate_row(&mut h, prow);
            negate_row(&mut u, prow);
        }
        let piv = h.data[prow][col].clone();
        for r in 0..prow {
            let q = h.data[r][col].div_floor(&piv);
            add_row_multiple(&mut h, r, prow, &q);
            add_row_multiple(&mut u, r, prow, &q);
        }
        prow += 1;
    }
    (h, u)
}

/// Rank of an integer matrix.
pub fn rank_int(m: &IMat) -> usize {
    let (h, _) = hnf(m);
    h.data.iter().filter(|r| r.iter().any(|x| !x.is_zero())).count()
}

/// Basis of the integer kernel lattice `{x in Z^n : M x = 0}` for an
/// `m x n` matrix, plus a unimodular `V` (columns) with `M V = [B | 0]`.
/// The kernel basis is the last `n - rank` columns of `V`.
pub fn kernel_lattice(m: &IMat, n: usize) -> (Vec<IVec>, IMat, usize) {
    let mt = if m.rows == 0 {
        IMat::zeros(n, 0)
    } else {
        m.transpose()
    };
    let (h, u) = hnf(&mt);
    let rank = h.data.iter().filter(|r| r.iter().any(|x| !x.is_zero())).count();
    let v = u.transpose();
    let basis = (rank..n)
        .map(|j| (0..n).map(|i| v.data[i][j].clone()).collect())
        .collect();
    (basis, v, rank)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Solution {
    Unique(QVec),
    NoSolution,
    Underdetermined,
}

/// Row reduction of `[A | b]`; returns the reduced rows and pivot columns.
fn row_reduce(aug: &mut [QVec], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == aug.len() {
            break;
        }
        let Some(p) = (r..aug.len()).find(|&i| !aug[i][c].is_zero()) else {
            continue;
        };
        aug.swap(r, p);
        let inv = aug[r][c].recip();
        for x in aug[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..aug.len() {
            if i != r && !aug[i][c].is_zero() {
                let f = aug[i][c].clone();
                let (top, rest) = if i < r {
                    let (a, b) = aug.split_at_mut(r);
                    (&mut a[i], &b[0])
                } else {
                    let (a, b) = aug.split_at_mut(i);
                    (&mut b[0], &a[r])
                };
                for (x, y) in top.iter_mut().zip(rest.iter()) {
                    if !y.is_zero() {
                        *x -= y * &f;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn solve_exact(a: &[QVec], b: &[Rat]) -> Solution {
    assert_eq!(a.len(), b.len());
    let ncols = a.first().map_or(0, |r| r.len());
    let mut aug: Vec<QVec> = a
        .iter()
        .zip(b)
        .map(|(r, bi)| {
            let mut row = r.clone();
            row.push(bi.clone());
            row
        })
        .collect();
    let pivots = row_reduce(&mut aug, ncols);
    for row in aug.iter().skip(pivots.len()) {
        if !row[ncols].is_zero() {
            return Solution::NoSolution;
        }
    }
    if pivots.len() < ncols {
        return Solution::Underdetermined;
    }
    Solution::Unique((0..ncols).map(|i| aug[i][ncols].clone()).collect())
}

pub fn rank_rat(a: &[QVec]) -> usize {
    let ncols = a.first().map_or(0, |r| r.len());
    let mut m = a.to_vec();
    row_reduce(&mut m, ncols).len()
}

pub fn det_exact(a: &[QVec]) -> Rat {
    let n = a.len();
    let mut m = a.to_vec();
    let mut det = Rat::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else {
            return Rat::zero();
        };
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        let piv = m[c][c].clone();
        det *= &piv;
        for i in (c + 1)..n {
            if m[i][c].is_zero() {
                continue;
            }
            let f = &m[i][c] / &piv;
            for j in c..n {
                let v = &m[c][j] * &f;
                m[i][j] -= v;
            }
        }
    }
    det
}

pub fn rat_inverse(a: &[QVec]) -> Option<Vec<QVec>> {
    let n = a.len();
    let mut aug: Vec<QVec> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { Rat::one() } else { Rat::zero() }));
            row
        })
        .collect();
    let piv = row_reduce(&mut aug, n);
    if piv.len() < n {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub mod serde_rat {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(serde::de::Error::custom)
    }
}

pub mod serde_rat_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rat], s: S) -> Result<S::Ok, S::Error> {
        let strs: Vec<String> = v.iter().map(fmt_rat).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rat>, D::Error> {
        let strs = Vec::<String>::deserialize(d)?;
        strs.iter()
            .map(|s| parse_rat(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

pub mod serde_int_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Int], s: S) -> Result<S::Ok, S::Error> {
        let xs: Vec<serde_json::Value> = v
            .iter()
            .map(|x| match x.to_i64() {
                Some(i) => serde_json::Value::from(i),
                None => serde_json::Value::from(x.to_string()),
            })
            .collect();
        xs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Int>, D::Error> {
        let xs = Vec::<serde_json::Value>::deserialize(d)?;
        xs.iter()
            .map(|x| match x {
                serde_json::Value::Number(n) => n
                    .as_i64()
                    .map(BigInt::from)
                    .ok_or_else(|| serde::de::Error::custom("non-integer normal entry")),
                serde_json::Value::String(s) => s
                    .parse::<BigInt>()
                    .map_err(|_| serde::de::Error::custom("bad integer string")),
                _ => Err(serde::de::Error::custom("expected integer")),
            })
            .collect()
    }
}

/// Wrapper used where a bare rational has to round-trip through JSON.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RatStr(pub Rat);

impl Serialize for RatStr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serde_rat::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for RatStr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        serde_rat::deserialize(d).map(RatStr)
    }
}

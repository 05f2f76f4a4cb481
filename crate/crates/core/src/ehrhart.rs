//! Real-parameter Ehrhart step functions.
//!
//! `L_P(s)` on a window `(lo, hi]` is built by a sweep: every lattice point
//! of the window's bounding box gets its lifespan `{s : x ∈ sP}`, the
//! endpoints are ranked against each other and bucketed, and the buckets
//! become breakpoints. `count` and `facet_point_count` work directly from
//! integer thresholds and serve as independent checks on the sweep.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::Debug;
use std::ops::{Add, Sub};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactmath::{self, dot_iq, fmt_rat, Int, Rat, RatStr};
use crate::polytope::{FacetKind, HPolytope};

pub const DEFAULT_POINT_BUDGET: u64 = 10_000_000;
pub const BUDGET_ENV: &str = "EHRHART_POINT_BUDGET";

/// Point budget from the environment, or the default.
pub fn point_budget() -> u64 {
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_POINT_BUDGET)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EhrhartError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("window needs {points} lattice points, budget is {budget}")]
    WindowTooLarge { points: u128, budget: u64 },
    #[error("polytope is not full-dimensional")]
    NotFullDimensional,
    #[error("{0} is not a breakpoint")]
    NotABreakpoint(String),
    #[error("window ({0}, {1}] is empty or negative")]
    BadWindow(String, String),
    #[error("coordinates exceed machine integers")]
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Lifespan {
    Empty,
    Closed(Rat, Rat),
    RightUnbounded(Rat),
}

impl Lifespan {
    pub fn contains(&self, s: &Rat) -> bool {
        match self {
            Lifespan::Empty => false,
            Lifespan::Closed(a, b) => a <= s && s <= b,
            Lifespan::RightUnbounded(a) => a <= s,
        }
    }
}

pub fn lifespan(p: &HPolytope, x: &[Int]) -> Result<Lifespan, EhrhartError> {
    if x.len() != p.dim() {
        return Err(EhrhartError::DimensionMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    let xq = exactmath::to_qvec(x);
    let mut alpha = Rat::zero();
    let mut beta: Option<Rat> = None;
    for ine in p.ineqs() {
        let dot = dot_iq(&ine.a, &xq);
        match FacetKind::of(&ine.b) {
            FacetKind::Neutral => {
                if dot.is_positive() {
                    return Ok(Lifespan::Empty);
                }
            }
            FacetKind::Front => {
                let t = dot / &ine.b;
                if t > alpha {
                    alpha = t;
                }
            }
            FacetKind::Back => {
                let t = dot / &ine.b;
                if beta.as_ref().map_or(true, |b| t < *b) {
                    beta = Some(t);
                }
            }
        }
    }
    Ok(match beta {
        None => Lifespan::RightUnbounded(alpha),
        Some(b) if b < alpha => Lifespan::Empty,
        Some(b) => Lifespan::Closed(alpha, b),
    })
}

/// Values a step function can carry: integer counts, or rationals after
/// cleaning.
pub trait StepValue:
    Clone + PartialEq + Debug + Add<Output = Self> + Sub<Output = Self>
{
    fn zero_value() -> Self;
}

impl StepValue for i64 {
    fn zero_value() -> Self {
        0
    }
}

impl StepValue for Rat {
    fn zero_value() -> Self {
        Rat::zero()
    }
}

#[derive(Clone, Debug)]
pub struct Break<V> {
    pub s: Rat,
    pub at: V,
    pub after: V,
    /// Lattice points whose lifespan starts at `s` (sweep output only).
    pub entering: i64,
    /// Lattice points whose lifespan ends at `s` (sweep output only).
    pub leaving: i64,
}

/// Piecewise-constant function on `(lo, hi]`.
#[derive(Clone, Debug)]
pub struct StepFn<V> {
    pub lo: Rat,
    pub hi: Rat,
    pub base: V,
    pub breaks: Vec<Break<V>>,
}

pub type QStepFunction = StepFn<i64>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpReport {
    #[serde(with = "exactmath::serde_rat")]
    pub s0: Rat,
    pub left_jump: i64,
    pub right_jump: i64,
    pub entering: i64,
    pub leaving: i64,
}

impl<V: StepValue> StepFn<V> {
    pub fn constant(lo: Rat, hi: Rat, v: V) -> Self {
        StepFn {
            lo,
            hi,
            base: v,
            breaks: Vec::new(),
        }
    }

    pub fn in_domain(&self, s: &Rat) -> bool {
        self.lo < *s && *s <= self.hi
    }

    /// Value at `s`; panics outside `(lo, hi]`.
    pub fn eval(&self, s: &Rat) -> V {
        assert!(self.in_domain(s), "{} outside the domain", fmt_rat(s));
        match self.breaks.binary_search_by(|b| b.s.cmp(s)) {
            Ok(i) => self.breaks[i].at.clone(),
            Err(0) => self.base.clone(),
            Err(i) => self.breaks[i - 1].after.clone(),
        }
    }

    /// Value on the open interval just left of breakpoint `i`.
    pub fn before(&self, i: usize) -> V {
        if i == 0 {
            self.base.clone()
        } else {
            self.breaks[i - 1].after.clone()
        }
    }

    /// Value just right of `s`, for `lo <= s < hi`.
    pub fn right_limit(&self, s: &Rat) -> V {
        match self.breaks.binary_search_by(|b| b.s.cmp(s)) {
            Ok(i) => self.breaks[i].after.clone(),
            Err(0) => self.base.clone(),
            Err(i) => self.breaks[i - 1].after.clone(),
        }
    }

    /// Merges breakpoints that carry no jump.
    pub fn normalized(&self) -> Self {
        let mut out = StepFn {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            base: self.base.clone(),
            breaks: Vec::new(),
        };
        let mut prev = self.base.clone();
        for b in &self.breaks {
            if b.at != prev || b.after != prev {
                prev = b.after.clone();
                out.breaks.push(b.clone());
            }
        }
        out
    }

    /// First point where two functions on the same domain disagree.
    pub fn first_difference(&self, other: &Self) -> Option<Rat> {
        let mut pts: Vec<&Rat> = self
            .breaks
            .iter()
            .chain(other.breaks.iter())
            .map(|b| &b.s)
            .collect();
        pts.sort();
        pts.dedup();
        let mut probe = self.lo.clone();
        for p in pts {
            let mid = (&probe + p) / Rat::from_integer(2.into());
            if self.in_domain(&mid) && self.eval(&mid) != other.eval(&mid) {
                return Some(mid);
            }
            if self.eval(p) != other.eval(p) {
                return Some(p.clone());
            }
            probe = p.clone();
        }
        let mid = (&probe + &self.hi) / Rat::from_integer(2.into());
        if probe < self.hi && self.eval(&mid) != other.eval(&mid) {
            return Some(mid);
        }
        None
    }

    /// Same function on a subwindow `(lo', hi']`.
    pub fn restrict(&self, lo: &Rat, hi: &Rat) -> Self {
        assert!(self.lo <= *lo && lo < hi && *hi <= self.hi);
        let base = if *lo == self.lo {
            self.base.clone()
        } else {
            self.right_limit(lo)
        };
        StepFn {
            lo: lo.clone(),
            hi: hi.clone(),
            base,
            breaks: self
                .breaks
                .iter()
                .filter(|b| *lo < b.s && b.s <= *hi)
                .cloned()
                .collect(),
        }
    }

    /// Pointwise `self - other` on a common domain.
    pub fn minus(&self, other: &Self) -> Self {
        assert!(self.lo == other.lo && self.hi == other.hi);
        let mut pts: Vec<Rat> = self
            .breaks
            .iter()
            .chain(other.breaks.iter())
            .map(|b| b.s.clone())
            .collect();
        pts.sort();
        pts.dedup();
        let breaks = pts
            .into_iter()
            .map(|s| {
                let at = self.eval(&s) - other.eval(&s);
                let after = self.right_limit(&s) - other.right_limit(&s);
                Break {
                    s,
                    at,
                    after,
                    entering: 0,
                    leaving: 0,
                }
            })
            .collect();
        StepFn {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            base: self.base.clone() - other.base.clone(),
            breaks,
        }
    }

    /// `(s, left jump)` for every breakpoint with a nonzero left jump.
    pub fn left_jumps(&self) -> Vec<(Rat, V)> {
        let zero = V::zero_value();
        (0..self.breaks.len())
            .filter_map(|i| {
                let j = self.breaks[i].at.clone() - self.before(i);
                (j != zero).then(|| (self.breaks[i].s.clone(), j))
            })
            .collect()
    }
}

impl<V: StepValue> PartialEq for StepFn<V> {
    fn eq(&self, other: &Self) -> bool {
        let a = self.normalized();
        let b = other.normalized();
        a.lo == b.lo
            && a.hi == b.hi
            && a.base == b.base
            && a.breaks.len() == b.breaks.len()
            && a
                .breaks
                .iter()
                .zip(&b.breaks)
                .all(|(x, y)| x.s == y.s && x.at == y.at && x.after == y.after)
    }
}

impl QStepFunction {
    pub fn to_rat(&self) -> StepFn<Rat> {
        let r = |v: i64| Rat::from_integer(BigInt::from(v));
        StepFn {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            base: r(self.base),
            breaks: self
                .breaks
                .iter()
                .map(|b| Break {
                    s: b.s.clone(),
                    at: r(b.at),
                    after: r(b.after),
                    entering: b.entering,
                    leaving: b.leaving,
                })
                .collect(),
        }
    }

    /// Plot samples: every breakpoint and the midpoint of every piece.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,value\n");
        let two = Rat::from_integer(2.into());
        let mut prev = self.lo.clone();
        for b in &self.breaks {
            let mid = (&prev + &b.s) / &two;
            out += &format!("{},{}\n", fmt_rat(&mid), self.eval(&mid));
            out += &format!("{},{}\n", fmt_rat(&b.s), b.at);
            prev = b.s.clone();
        }
        if prev < self.hi {
            let mid = (&prev + &self.hi) / &two;
            out += &format!("{},{}\n", fmt_rat(&mid), self.eval(&mid));
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct RawBreak {
    s: RatStr,
    at: i64,
    after: i64,
}

#[derive(Serialize, Deserialize)]
struct RawStepFn {
    domain: (RatStr, RatStr),
    base: i64,
    breaks: Vec<RawBreak>,
}

impl Serialize for StepFn<i64> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawStepFn {
            domain: (RatStr(self.lo.clone()), RatStr(self.hi.clone())),
            base: self.base,
            breaks: self
                .breaks
                .iter()
                .map(|b| RawBreak {
                    s: RatStr(b.s.clone()),
                    at: b.at,
                    after: b.after,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StepFn<i64> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawStepFn::deserialize(d)?;
        let f = StepFn {
            lo: raw.domain.0 .0,
            hi: raw.domain.1 .0,
            base: raw.base,
            breaks: raw
                .breaks
                .into_iter()
                .map(|b| Break {
                    s: b.s.0,
                    at: b.at,
                    after: b.after,
                    entering: 0,
                    leaving: 0,
                })
                .collect(),
        };
        let sorted = f.breaks.windows(2).all(|w| w[0].s < w[1].s);
        let inside = f.breaks.iter().all(|b| f.in_domain(&b.s));
        if f.lo >= f.hi || !sorted || !inside {
            return Err(serde::de::Error::custom("breakpoints must be increasing and inside the domain"));
        }
        Ok(f)
    }
}

/// Exact fraction with machine-size parts, denominator positive.
#[derive(Clone, Copy, Debug)]
struct Frac {
    n: i128,
    d: i128,
}

impl Frac {
    fn from_rat(r: &Rat) -> Option<Frac> {
        Some(Frac {
            n: r.numer().to_i128()?,
            d: r.denom().to_i128()?,
        })
    }

    fn to_rat(self) -> Rat {
        Rat::new(BigInt::from(self.n), BigInt::from(self.d))
    }
}

impl PartialEq for Frac {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for Frac {}

impl PartialOrd for Frac {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Frac {
    fn cmp(&self, o: &Self) -> Ordering {
        (self.n * o.d).cmp(&(o.n * self.d))
    }
}

fn box_size(bx: &[(i64, i64)]) -> u128 {
    bx.iter()
        .map(|(l, u)| (u - l + 1).max(0) as u128)
        .fold(1u128, |a, b| a.saturating_mul(b))
}

fn int_box(p: &HPolytope, lo: &Rat, hi: &Rat, budget: u64) -> Result<Vec<(i64, i64)>, EhrhartError> {
    let bx: Option<Vec<(i64, i64)>> = p
        .window_box(lo, hi)
        .into_iter()
        .map(|(l, u)| Some((l.to_i64()?, u.to_i64()?)))
        .collect();
    let bx = bx.ok_or(EhrhartError::Overflow)?;
    let n = box_size(&bx);
    if n > budget as u128 {
        return Err(EhrhartError::WindowTooLarge { points: n, budget });
    }
    Ok(bx)
}

/// Calls `f` on every point of an integer box, in lexicographic order.
fn for_each_point(bx: &[(i64, i64)], mut f: impl FnMut(&[i64])) {
    if bx.iter().any(|(l, u)| l > u) {
        return;
    }
    let mut x: Vec<i64> = bx.iter().map(|b| b.0).collect();
    loop {
        f(&x);
        let mut j = bx.len();
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if x[j] < bx[j].1 {
                x[j] += 1;
                break;
            }
            x[j] = bx[j].0;
        }
    }
}

fn dot64(a: &[i64], x: &[i64]) -> i64 {
    a.iter().zip(x).map(|(p, q)| p * q).sum()
}

fn dot_range(a: &[i64], bx: &[(i64, i64)]) -> (i64, i64) {
    let mut mn = 0;
    let mut mx = 0;
    for (c, (l, u)) in a.iter().zip(bx) {
        let (p, q) = (c * l, c * u);
        mn += p.min(q);
        mx += p.max(q);
    }
    (mn, mx)
}

/// Largest table of candidate lifespan endpoints the sweep will build.
const MAX_TABLE: u128 = 20_000_000;

/// `L_P` on `(0, s_max]`.
pub fn step_function(p: &HPolytope, s_max: &Rat) -> Result<QStepFunction, EhrhartError> {
    step_function_window(p, &Rat::zero(), s_max, point_budget())
}

/// `L_P` on `(lo, hi]`, `0 <= lo < hi`.
pub fn step_function_window(
    p: &HPolytope,
    lo: &Rat,
    hi: &Rat,
    budget: u64,
) -> Result<QStepFunction, EhrhartError> {
    if lo.is_negative() || lo >= hi {
        return Err(EhrhartError::BadWindow(fmt_rat(lo), fmt_rat(hi)));
    }
    let bx = int_box(p, lo, hi, budget)?;
    let normals = p.normals_i64().ok_or(EhrhartError::Overflow)?;
    let rhs: Vec<Frac> = p
        .rhs()
        .iter()
        .map(Frac::from_rat)
        .collect::<Option<_>>()
        .ok_or(EhrhartError::Overflow)?;
    let flo = Frac::from_rat(lo).ok_or(EhrhartError::Overflow)?;
    let fhi = Frac::from_rat(hi).ok_or(EhrhartError::Overflow)?;

    // candidate endpoints dot/b inside (lo, hi], per inequality
    let ranges: Vec<(i64, i64)> = normals.iter().map(|a| dot_range(a, &bx)).collect();
    let table: u128 = ranges.iter().map(|(l, u)| (u - l + 1) as u128).sum();
    if table > MAX_TABLE {
        return Err(EhrhartError::WindowTooLarge {
            points: table,
            budget,
        });
    }
    let ratio = |dot: i64, b: Frac| -> Frac {
        // dot / (n/d) = dot*d / n, sign moved to the denominator side
        let (n, d) = (dot as i128 * b.d, b.n);
        if d < 0 {
            Frac { n: -n, d: -d }
        } else {
            Frac { n, d }
        }
    };
    let mut values: Vec<Frac> = Vec::new();
    for (i, &(l, u)) in ranges.iter().enumerate() {
        if rhs[i].n == 0 {
            continue;
        }
        for dot in l..=u {
            let v = ratio(dot, rhs[i]);
            if v > flo && v <= fhi {
                values.push(v);
            }
        }
    }
    values.sort();
    values.dedup();
    let n = values.len() as u32;
    let over = n + 1;
    let rank_of = |v: Frac| -> u32 {
        if v <= flo {
            0
        } else if v > fhi {
            over
        } else {
            values.binary_search(&v).expect("value in table") as u32 + 1
        }
    };
    let tables: Vec<Vec<u32>> = ranges
        .iter()
        .enumerate()
        .map(|(i, &(l, u))| {
            if rhs[i].n == 0 {
                return Vec::new();
            }
            (l..=u).map(|dot| rank_of(ratio(dot, rhs[i]))).collect()
        })
        .collect();

    let m = normals.len();
    let mut base: i64 = 0;
    let mut enter = vec![0i64; n as usize + 2];
    let mut leave = vec![0i64; n as usize + 2];
    for_each_point(&bx, |x| {
        let mut lower = 0u32;
        let mut upper = over;
        for i in 0..m {
            let dot = dot64(&normals[i], x);
            if rhs[i].n == 0 {
                if dot > 0 {
                    return;
                }
                continue;
            }
            let r = tables[i][(dot - ranges[i].0) as usize];
            if rhs[i].n > 0 {
                lower = lower.max(r);
            } else {
                upper = upper.min(r);
            }
        }
        if lower > n || upper == 0 || lower > upper {
            return;
        }
        if lower == 0 {
            base += 1;
        } else {
            enter[lower as usize] += 1;
        }
        if upper <= n {
            leave[upper as usize] += 1;
        }
    });

    let mut breaks = Vec::new();
    let mut cur = base;
    for r in 1..=n as usize {
        if enter[r] == 0 && leave[r] == 0 {
            continue;
        }
        let at = cur + enter[r];
        let after = at - leave[r];
        breaks.push(Break {
            s: values[r - 1].to_rat(),
            at,
            after,
            entering: enter[r],
            leaving: leave[r],
        });
        cur = after;
    }
    Ok(StepFn {
        lo: lo.clone(),
        hi: hi.clone(),
        base,
        breaks,
    })
}

/// `⟨a_i, x⟩ <= s b_i` as integer thresholds `floor(s b_i)`, plus whether
/// equality is attainable (`s b_i` integral).
struct Thresholds {
    normals: Vec<Vec<i64>>,
    floor: Vec<i64>,
    exact: Vec<bool>,
}

impl Thresholds {
    fn new(p: &HPolytope, s: &Rat) -> Result<Thresholds, EhrhartError> {
        let normals = p.normals_i64().ok_or(EhrhartError::Overflow)?;
        let mut floor = Vec::new();
        let mut exact = Vec::new();
        for b in p.rhs() {
            let t = &b * s;
            floor.push(exactmath::floor_rat(&t).to_i64().ok_or(EhrhartError::Overflow)?);
            exact.push(exactmath::is_integer(&t));
        }
        Ok(Thresholds {
            normals,
            floor,
            exact,
        })
    }

    fn inside(&self, x: &[i64]) -> bool {
        self.normals
            .iter()
            .zip(&self.floor)
            .all(|(a, f)| dot64(a, x) <= *f)
    }
}

/// `#(sP ∩ Z^d)` by enumeration, with `count(P, 0) = 1`.
pub fn count(p: &HPolytope, s: &Rat) -> Result<u64, EhrhartError> {
    count_with_budget(p, s, point_budget())
}

pub fn count_with_budget(p: &HPolytope, s: &Rat, budget: u64) -> Result<u64, EhrhartError> {
    if s.is_negative() {
        return Err(EhrhartError::BadWindow(fmt_rat(s), fmt_rat(s)));
    }
    if s.is_zero() {
        return Ok(1);
    }
    let bx = int_box(p, s, s, budget)?;
    let th = Thresholds::new(p, s)?;
    let mut n = 0u64;
    for_each_point(&bx, |x| {
        if th.inside(x) {
            n += 1;
        }
    });
    Ok(n)
}

pub fn jumps(f: &QStepFunction) -> Vec<JumpReport> {
    f.breaks
        .iter()
        .enumerate()
        .map(|(i, b)| JumpReport {
            s0: b.s.clone(),
            left_jump: b.at - f.before(i),
            right_jump: b.at - b.after,
            entering: b.entering,
            leaving: b.leaving,
        })
        .collect()
}

/// Front and back facet indices of a full-dimensional polytope, computed
/// once so that many dilates can be probed.
pub struct FacetCounter<'a> {
    p: &'a HPolytope,
    front: Vec<usize>,
    back: Vec<usize>,
}

impl<'a> FacetCounter<'a> {
    pub fn new(p: &'a HPolytope) -> Result<Self, EhrhartError> {
        if !p.is_full_dimensional() {
            return Err(EhrhartError::NotFullDimensional);
        }
        let d = p.dim();
        let mut front = Vec::new();
        let mut back = Vec::new();
        for f in p.faces_report() {
            if !f.is_facet(d) {
                continue;
            }
            match f.kind {
                FacetKind::Front => front.push(f.index),
                FacetKind::Back => back.push(f.index),
                FacetKind::Neutral => {}
            }
        }
        Ok(FacetCounter { p, front, back })
    }

    /// Lattice points of `s0 P` on the union of the chosen facets. Each
    /// facet hyperplane is walked separately; a set removes points shared
    /// by several facets.
    pub fn count(&self, s0: &Rat, side: FacetKind) -> Result<u64, EhrhartError> {
        let facets = match side {
            FacetKind::Front => &self.front,
            FacetKind::Back => &self.back,
            FacetKind::Neutral => return Ok(0),
        };
        if facets.is_empty() || !s0.is_positive() {
            return Ok(0);
        }
        let th = Thresholds::new(self.p, s0)?;
        let bx = int_box(self.p, s0, s0, point_budget())?;
        let mut seen: HashSet<Vec<i64>> = HashSet::new();
        for &i in facets {
            if !th.exact[i] {
                continue;
            }
            let a = &th.normals[i];
            let t = th.floor[i];
            let piv = (0..a.len()).max_by_key(|&j| a[j].abs()).expect("nonzero normal");
            let rest: Vec<(i64, i64)> = bx
                .iter()
                .enumerate()
                .map(|(j, &r)| if j == piv { (0, 0) } else { r })
                .collect();
            for_each_point(&rest, |y| {
                let partial = dot64(a, y);
                let num = t - partial;
                if num % a[piv] != 0 {
                    return;
                }
                let xp = num / a[piv];
                if xp < bx[piv].0 || xp > bx[piv].1 {
                    return;
                }
                let mut x = y.to_vec();
                x[piv] = xp;
                if th.inside(&x) {
                    seen.insert(x);
                }
            });
        }
        Ok(seen.len() as u64)
    }
}

/// Lattice points of `s0 P` on the union of its front (or back) facets.
pub fn facet_point_count(p: &HPolytope, s0: &Rat, side: FacetKind) -> Result<u64, EhrhartError> {
    FacetCounter::new(p)?.count(s0, side)
}

/// Raises everything right of `s0` by the drop at `s0`.
pub fn lift_at(f: &QStepFunction, s0: &Rat) -> Result<QStepFunction, EhrhartError> {
    let i = f
        .breaks
        .binary_search_by(|b| b.s.cmp(s0))
        .map_err(|_| EhrhartError::NotABreakpoint(fmt_rat(s0)))?;
    let delta = f.breaks[i].at - f.breaks[i].after;
    let mut g = f.clone();
    g.breaks[i].after += delta;
    g.breaks[i].leaving = 0;
    for b in g.breaks[i + 1..].iter_mut() {
        b.at += delta;
        b.after += delta;
    }
    Ok(g)
}

/// All right drops removed, left to right. On a domain starting at 0 the
/// value at 0 is taken to be 1 (the origin), so a function that starts at 0
/// on `(0, ε)` is first lifted by the origin's drop at `s = 0`.
pub fn lifting(f: &QStepFunction) -> QStepFunction {
    let mut g = f.clone();
    if g.lo.is_zero() && g.base < 1 {
        let delta = 1 - g.base;
        g.base += delta;
        for b in g.breaks.iter_mut() {
            b.at += delta;
            b.after += delta;
        }
    }
    for b in &f.breaks {
        g = lift_at(&g, &b.s).expect("breakpoint of f");
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactmath::{int, ivec, qvec, rat};
    use proptest::prelude::*;

    fn square() -> HPolytope {
        HPolytope::from_i64(
            2,
            &[
                (&[1, 0], (1, 1)),
                (&[0, 1], (1, 3)),
                (&[-1, 0], (-2, 3)),
                (&[0, -1], (0, 1)),
            ],
        )
        .unwrap()
    }

    fn box12() -> HPolytope {
        HPolytope::cube(&qvec(&[(1, 1), (0, 1)]), &qvec(&[(2, 1), (1, 1)])).unwrap()
    }

    fn closed_form(s: &Rat) -> i64 {
        let f = exactmath::floor_rat(s);
        let c = exactmath::ceil_rat(&(s * rat(2, 3)));
        let g = exactmath::floor_rat(&(s * rat(1, 3)));
        let v: Int = (f - c + 1) * (g + 1);
        v.to_i64().unwrap().max(0)
    }

    #[test]
    fn lifespan_examples() {
        let p = square();
        assert_eq!(
            lifespan(&p, &ivec(&[1, 0])).unwrap(),
            Lifespan::Closed(rat(1, 1), rat(3, 2))
        );
        assert_eq!(
            lifespan(&p, &ivec(&[2, 1])).unwrap(),
            Lifespan::Closed(rat(3, 1), rat(3, 1))
        );
        let c = HPolytope::cube(&qvec(&[(-1, 1), (-1, 1)]), &qvec(&[(1, 1), (1, 2)])).unwrap();
        assert_eq!(
            lifespan(&c, &ivec(&[0, 0])).unwrap(),
            Lifespan::RightUnbounded(rat(0, 1))
        );
        assert!(lifespan(&p, &ivec(&[1])).is_err());
        // x = (0,1) lies on no dilate: y <= s/3 and x >= 2s/3 force s = 0 but y = 1
        assert_eq!(lifespan(&p, &ivec(&[0, 1])).unwrap(), Lifespan::Empty);
    }

    #[test]
    fn square_step_function() {
        let f = step_function(&square(), &rat(7, 2)).unwrap();
        let got: Vec<(Rat, i64, i64)> =
            f.breaks.iter().map(|b| (b.s.clone(), b.at, b.after)).collect();
        assert_eq!(
            got,
            vec![
                (rat(1, 1), 1, 1),
                (rat(3, 2), 1, 0),
                (rat(2, 1), 1, 1),
                (rat(3, 1), 4, 2)
            ]
        );
        assert_eq!(f.base, 0);
        for k in 1..=70 {
            let s = rat(k, 20);
            assert_eq!(f.eval(&s), closed_form(&s), "s = {}", s);
        }
    }

    #[test]
    fn box_step_function() {
        let f = step_function(&box12(), &rat(5, 4)).unwrap();
        let got: Vec<(Rat, i64, i64)> =
            f.breaks.iter().map(|b| (b.s.clone(), b.at, b.after)).collect();
        assert_eq!(got, vec![(rat(1, 2), 1, 1), (rat(1, 1), 4, 2)]);
    }

    #[test]
    fn unit_interval_floor_plus_one() {
        let p = HPolytope::from_i64(1, &[(&[1], (1, 1)), (&[-1], (0, 1))]).unwrap();
        let f = step_function(&p, &rat(3, 1)).unwrap();
        for k in 1..=300 {
            let s = rat(k, 100);
            assert_eq!(f.eval(&s) as u64, count(&p, &s).unwrap());
            assert_eq!(f.eval(&s), exactmath::floor_rat(&s).to_i64().unwrap() + 1);
        }
    }

    #[test]
    fn count_examples() {
        assert_eq!(count(&square(), &rat(3, 1)).unwrap(), 4);
        assert_eq!(count(&square(), &rat(0, 1)).unwrap(), 1);
        let u = HPolytope::cube(&qvec(&[(0, 1), (0, 1)]), &qvec(&[(1, 1), (1, 1)])).unwrap();
        assert_eq!(count(&u, &rat(2, 1)).unwrap(), 9);
        assert!(matches!(
            count_with_budget(&u, &rat(1000, 1), 100),
            Err(EhrhartError::WindowTooLarge { .. })
        ));
    }

    #[test]
    fn jumps_examples() {
        let f = step_function(&square(), &rat(7, 2)).unwrap();
        let j = jumps(&f);
        let at3 = j.iter().find(|r| r.s0 == rat(3, 1)).unwrap();
        assert_eq!((at3.left_jump, at3.right_jump), (3, 2));
        assert_eq!((at3.entering, at3.leaving), (3, 2));
        let at1 = j.iter().find(|r| r.s0 == rat(1, 1)).unwrap();
        assert_eq!((at1.left_jump, at1.right_jump), (1, 0));
        let at32 = j.iter().find(|r| r.s0 == rat(3, 2)).unwrap();
        assert_eq!((at32.left_jump, at32.right_jump), (0, 1));
        let c = HPolytope::cube(&qvec(&[(-1, 2), (-1, 3)]), &qvec(&[(2, 3), (3, 4)])).unwrap();
        assert!(c.faces_report().iter().all(|f| f.kind != FacetKind::Back));
        let f = step_function(&c, &rat(9, 1)).unwrap();
        assert!(jumps(&f).iter().all(|r| r.right_jump == 0));
    }

    #[test]
    fn facet_point_count_examples() {
        let p = square();
        assert_eq!(facet_point_count(&p, &rat(3, 1), FacetKind::Front).unwrap(), 3);
        assert_eq!(facet_point_count(&p, &rat(3, 1), FacetKind::Back).unwrap(), 2);
        assert_eq!(facet_point_count(&p, &rat(5, 4), FacetKind::Front).unwrap(), 0);
        let seg = HPolytope::from_i64(
            2,
            &[(&[1, 0], (1, 1)), (&[-1, 0], (-1, 1)), (&[0, 1], (1, 1)), (&[0, -1], (0, 1))],
        )
        .unwrap();
        assert_eq!(
            facet_point_count(&seg, &rat(1, 1), FacetKind::Front),
            Err(EhrhartError::NotFullDimensional)
        );
    }

    fn indicator_01() -> QStepFunction {
        StepFn {
            lo: rat(0, 1),
            hi: rat(2, 1),
            base: 1,
            breaks: vec![Break {
                s: rat(1, 1),
                at: 1,
                after: 0,
                entering: 0,
                leaving: 1,
            }],
        }
    }

    #[test]
    fn lift_at_examples() {
        let g = lift_at(&indicator_01(), &rat(1, 1)).unwrap();
        assert_eq!(g, StepFn::constant(rat(0, 1), rat(2, 1), 1));
        let f = step_function(&square(), &rat(7, 2)).unwrap();
        assert_eq!(lift_at(&f, &rat(1, 1)).unwrap(), f);
        let g = lift_at(&f, &rat(3, 2)).unwrap();
        assert_eq!(g.eval(&rat(7, 4)), 1);
        assert_eq!(g.eval(&rat(3, 2)), 1);
        assert!(matches!(
            lift_at(&f, &rat(5, 4)),
            Err(EhrhartError::NotABreakpoint(_))
        ));
    }

    #[test]
    fn lifting_examples() {
        let f = step_function(&box12(), &rat(5, 4)).unwrap();
        let g = lifting(&f);
        assert_eq!(g.eval(&rat(1, 4)), 1);
        assert_eq!(g.eval(&rat(1, 2)), 2);
        assert_eq!(g.eval(&rat(3, 4)), 2);
        assert_eq!(g.eval(&rat(1, 1)), 5);
        let c = HPolytope::cube(&qvec(&[(-1, 1), (-1, 1)]), &qvec(&[(1, 1), (1, 1)])).unwrap();
        let f = step_function(&c, &rat(4, 1)).unwrap();
        assert_eq!(lifting(&f), f);
    }

    #[test]
    fn window_matches_full_sweep() {
        let p = square();
        let full = step_function(&p, &rat(9, 1)).unwrap();
        let w = step_function_window(&p, &rat(5, 2), &rat(6, 1), DEFAULT_POINT_BUDGET).unwrap();
        assert_eq!(full.restrict(&rat(5, 2), &rat(6, 1)), w);
        let w = step_function_window(&p, &rat(3, 1), &rat(4, 1), DEFAULT_POINT_BUDGET).unwrap();
        assert_eq!(w.base, 2);
    }

    #[test]
    fn json_and_csv() {
        let f = step_function(&square(), &rat(7, 2)).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.starts_with(r#"{"domain":["0","7/2"],"base":0,"breaks":[{"s":"1","at":1,"after":1}"#));
        let g: QStepFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        let csv = f.to_csv();
        assert!(csv.contains("3,4\n"));
        assert!(csv.contains("13/4,2\n"));
        let bad = r#"{"domain":["0","1"],"base":0,"breaks":[{"s":"2","at":1,"after":1}]}"#;
        assert!(serde_json::from_str::<QStepFunction>(bad).is_err());
    }

    #[test]
    fn far_window_is_quiet() {
        let f = step_function(&box12(), &rat(1, 10)).unwrap();
        assert_eq!(f.base, 0);
        assert!(f.breaks.is_empty());
    }

    #[test]
    fn normalized_equality() {
        let mut f = indicator_01();
        f.breaks.insert(
            0,
            Break {
                s: rat(1, 2),
                at: 1,
                after: 1,
                entering: 0,
                leaving: 0,
            },
        );
        assert_eq!(f, indicator_01());
        assert_eq!(f.normalized().breaks.len(), 1);
    }

    /// Random bounded polygons around a small rational center.
    fn arb_poly() -> impl Strategy<Value = HPolytope> {
        (
            prop::collection::vec((-4i64..=4, -4i64..=4, 1i64..=4, 1i64..=6), 4..=7),
            (-2i64..=2, -2i64..=2, 1i64..=3),
        )
            .prop_filter_map("bounded", |(rows, (cx, cy, cd))| {
                let c = [rat(cx, cd), rat(cy, cd)];
                let rows: Vec<(Vec<Int>, Rat)> = rows
                    .iter()
                    .filter(|r| (r.0, r.1) != (0, 0))
                    .map(|&(x, y, r, q)| {
                        let v = rat(x, 1) * &c[0] + rat(y, 1) * &c[1] + rat(r, 4);
                        let b = Rat::from_integer(exactmath::ceil_rat(&(v * rat(q, 1)))) / rat(q, 1);
                        (vec![int(x), int(y)], b)
                    })
                    .collect();
                let p = HPolytope::new(2, rows).ok()?;
                p.is_full_dimensional().then_some(p)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sweep_agrees_with_count(p in arb_poly(), ks in prop::collection::vec((1i64..=80, 1i64..=8), 25)) {
            let f = step_function(&p, &rat(10, 1)).unwrap();
            for (n, d) in ks {
                let s = rat(n % (10 * d) + 1, d);
                prop_assert_eq!(f.eval(&s) as u64, count(&p, &s).unwrap());
            }
        }

        #[test]
        fn jumps_are_facet_counts(p in arb_poly()) {
            let f = step_function(&p, &rat(6, 1)).unwrap();
            for j in jumps(&f) {
                prop_assert_eq!(j.left_jump, j.entering);
                prop_assert_eq!(j.right_jump, j.leaving);
                prop_assert_eq!(j.left_jump as u64, facet_point_count(&p, &j.s0, FacetKind::Front).unwrap());
                prop_assert_eq!(j.right_jump as u64, facet_point_count(&p, &j.s0, FacetKind::Back).unwrap());
            }
        }

        #[test]
        fn origin_inside_means_nondecreasing(lo in prop::collection::vec((1i64..=5, 1i64..=4), 2), hi in prop::collection::vec((0i64..=5, 1i64..=4), 2)) {
            let lo: Vec<Rat> = lo.iter().map(|&(n, d)| -rat(n, d)).collect();
            let hi: Vec<Rat> = hi.iter().map(|&(n, d)| rat(n, d)).collect();
            let p = HPolytope::cube(&lo, &hi).unwrap();
            let f = step_function(&p, &rat(8, 1)).unwrap();
            let mut prev = f.base;
            for b in &f.breaks {
                prop_assert_eq!(b.at, b.after);
                prop_assert!(b.at >= prev);
                prev = b.after;
            }
        }

        #[test]
        fn windows_partition(p in arb_poly(), cut in (1i64..=39, 1i64..=4)) {
            let hi = rat(10, 1);
            let c = rat(cut.0, cut.1);
            prop_assume!(c < hi);
            let full = step_function(&p, &hi).unwrap();
            let right = step_function_window(&p, &c, &hi, DEFAULT_POINT_BUDGET).unwrap();
            prop_assert_eq!(full.restrict(&c, &hi), right);
        }
    }
}

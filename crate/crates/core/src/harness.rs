//! Scenario checks over generated and handcrafted instances.

use std::collections::BTreeMap;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ehrhart::{
    count, lifting, step_function, Break, EhrhartError, FacetCounter, QStepFunction, StepFn,
};
use crate::exactmath::{
    self, ceil_rat, dot_int, floor_rat, int, is_integer, kernel_lattice, primitivize, rat, rat_int,
    simplest_between, solve_exact, IMat, IVec, Int, QVec, Rat, RatStr, Solution,
};
use crate::polytope::{FacetKind, HPolytope, HyperplaneFrame, PolytopeError};
use crate::reconstruct::{
    recover, verify, EhrhartOracle, HiddenOracle, QueryStats, ReconConfig, ReconError,
    ReconstructionReport, Verification,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("codimension {0} is not handled here")]
    BadCodimension(usize),
    #[error("no admissible dilation factor in the list")]
    EmptyGrid,
    #[error("hyperplane identification failed: {0}")]
    Identification(String),
    #[error("bad instance spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Ehrhart(#[from] EhrhartError),
    #[error(transparent)]
    Recon(#[from] ReconError),
}

fn default_normal_bound() -> i64 {
    4
}

fn default_den_bound() -> i64 {
    6
}

fn default_s_max() -> RatStr {
    RatStr(rat(10, 1))
}

fn default_translates() -> i64 {
    5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub dim: usize,
    #[serde(default = "default_normal_bound")]
    pub normal_bound: i64,
    #[serde(default = "default_den_bound")]
    pub den_bound: i64,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Step functions are examined on `(0, s_max]`.
    #[serde(default = "default_s_max")]
    pub s_max: RatStr,
    /// Translates `k = 0..=translates` in the distinctness check.
    #[serde(default = "default_translates")]
    pub translates: i64,
}

impl InstanceSpec {
    pub fn new(dim: usize, count: usize, seed: u64) -> InstanceSpec {
        InstanceSpec {
            dim,
            normal_bound: default_normal_bound(),
            den_bound: default_den_bound(),
            count,
            seed,
            s_max: default_s_max(),
            translates: default_translates(),
        }
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        if !(1..=4).contains(&self.dim) {
            return Err(HarnessError::BadSpec(format!("dim {} outside 1..=4", self.dim)));
        }
        if self.normal_bound < 1 || self.den_bound < 1 {
            return Err(HarnessError::BadSpec("bounds must be positive".into()));
        }
        if !self.s_max.0.is_positive() {
            return Err(HarnessError::BadSpec("s_max must be positive".into()));
        }
        if self.translates < 0 {
            return Err(HarnessError::BadSpec("translates must be nonnegative".into()));
        }
        Ok(())
    }
}

/// A bounded full-dimensional polytope around a small rational center, with
/// primitive normals bounded by `normal_bound` and right-hand sides of
/// denominator at most `den_bound`.
pub fn random_polytope(rng: &mut ChaCha8Rng, spec: &InstanceSpec) -> HPolytope {
    let d = spec.dim;
    let nb = spec.normal_bound;
    loop {
        let n = rng.gen_range(d + 1..=d + 4);
        let center: QVec = (0..d).map(|_| rat(rng.gen_range(-6..=6), 6)).collect();
        let mut ineqs = Vec::with_capacity(n);
        for _ in 0..n {
            let a = loop {
                let v: IVec = (0..d).map(|_| int(rng.gen_range(-nb..=nb))).collect();
                if let Ok((p, _)) = primitivize(&v) {
                    break p;
                }
            };
            let q = rng.gen_range(1..=spec.den_bound);
            let r = rat(rng.gen_range(1..=6), 6);
            let t = (exactmath::dot_iq(&a, &center) + r) * rat(q, 1);
            let b = rat_int(&ceil_rat(&t)) / rat(q, 1);
            ineqs.push((a, b));
        }
        if let Ok(p) = HPolytope::new(d, ineqs) {
            if p.is_full_dimensional() {
                return p;
            }
        }
    }
}

pub fn generate(spec: &InstanceSpec) -> Vec<HPolytope> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.count).map(|_| random_polytope(&mut rng, spec)).collect()
}

/// A rational point of `P` with small denominators, preferring short
/// vectors.
fn small_point(p: &HPolytope) -> Option<QVec> {
    let d = p.dim();
    for q in 1..=12i64 {
        let qr = rat(q, 1);
        let bx: Vec<(i64, i64)> = (0..d)
            .map(|i| {
                let lo = p.vertices().iter().map(|v| &v[i] * &qr).min().expect("vertex");
                let hi = p.vertices().iter().map(|v| &v[i] * &qr).max().expect("vertex");
                (
                    ceil_rat(&lo).to_i64().unwrap_or(0),
                    floor_rat(&hi).to_i64().unwrap_or(-1),
                )
            })
            .collect();
        let mut best: Option<(i64, Vec<i64>)> = None;
        let mut x: Vec<i64> = bx.iter().map(|b| b.0).collect();
        if bx.iter().any(|(l, u)| l > u) {
            continue;
        }
        'walk: loop {
            if x.iter().any(|&c| c != 0) {
                let pt: QVec = x.iter().map(|&c| rat(c, q)).collect();
                if p.contains(&pt) {
                    let norm: i64 = x.iter().map(|c| c.abs()).sum();
                    // shortest first, then the lexicographically largest
                    let better = match &best {
                        None => true,
                        Some((n0, x0)) => norm < *n0 || (norm == *n0 && x > *x0),
                    };
                    if better {
                        best = Some((norm, x.clone()));
                    }
                }
            }
            let mut j = d;
            loop {
                if j == 0 {
                    break 'walk;
                }
                j -= 1;
                if x[j] < bx[j].1 {
                    x[j] += 1;
                    break;
                }
                x[j] = bx[j].0;
            }
        }
        if let Some((_, x)) = best {
            return Some(x.iter().map(|&c| rat(c, q)).collect());
        }
    }
    None
}

/// An integer `w` for which the translates `P + k w`, `k >= 0`, have
/// pairwise distinct Ehrhart functions.
pub fn find_translation_witness(p: &HPolytope) -> Result<IVec, HarnessError> {
    let d = p.dim();
    let hull = p.affine_hull();
    match d - hull.hull_dim {
        0 => {
            let v = small_point(p)
                .or_else(|| p.vertices().iter().find(|v| v.iter().any(|x| !x.is_zero())).cloned())
                .ok_or_else(|| HarnessError::BadSpec("no nonzero point".into()))?;
            let l = exactmath::lcm_denoms(v.iter());
            let mut w: IVec = v.iter().map(|x| (x * rat_int(&l)).to_integer()).collect();
            loop {
                let neg: QVec = w.iter().map(|x| rat_int(&-x)).collect();
                if !p.contains(&neg) {
                    return Ok(w);
                }
                w = w.iter().map(|x| x * 2u32).collect();
            }
        }
        1 => Ok(p.flatten_codim1()?.frame.a),
        c => Err(HarnessError::BadCodimension(c)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result")]
pub enum PairResult {
    Differ {
        #[serde(with = "exactmath::serde_rat")]
        s: Rat,
    },
    EqualOnWindow {
        #[serde(with = "exactmath::serde_rat")]
        window: Rat,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairVerdict {
    pub i: i64,
    pub j: i64,
    pub result: PairResult,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistinctReport {
    #[serde(with = "exactmath::serde_int_vec")]
    pub w: IVec,
    /// `vol ppyr(P + k w)` for `k = 0..=K`.
    pub volumes: Vec<RatStr>,
    /// Second route to the same volumes (hull triangulation).
    pub volumes_agree: bool,
    pub volumes_increasing: bool,
    pub pairs: Vec<PairVerdict>,
    /// Counts at integer `s <= S` agree across all translates.
    pub integer_contrast_equal: bool,
}

impl DistinctReport {
    pub fn all_distinct(&self) -> bool {
        self.pairs
            .iter()
            .all(|p| matches!(p.result, PairResult::Differ { .. }))
    }

    pub fn passed(&self) -> bool {
        self.volumes_agree && self.volumes_increasing && self.all_distinct() && self.integer_contrast_equal
    }
}

const MAX_DOUBLINGS: u32 = 2;

/// Compares `L_{P + k w}` for `k = 0..=K`: exact pseudopyramid volumes and
/// direct comparison on `(0, S]`, `S` doubled when a pair looks equal.
pub fn check_translates_distinct(
    p: &HPolytope,
    w: &[Int],
    k_max: i64,
    s: &Rat,
) -> Result<DistinctReport, HarnessError> {
    let d = p.dim();
    let hull = p.affine_hull();
    let codim = d - hull.hull_dim;
    let translates: Vec<HPolytope> = (0..=k_max)
        .map(|k| {
            let kw: IVec = w.iter().map(|x| x * k).collect();
            p.translate_int(&kw)
        })
        .collect::<Result<_, _>>()?;

    let mut volumes = Vec::new();
    let mut agree = true;
    match codim {
        0 => {
            for t in &translates {
                let v = t.ppyr_volume()?;
                agree &= v.decomposition == v.hull;
                volumes.push(v.decomposition);
            }
        }
        1 => {
            let fl = p.flatten_codim1()?;
            let rv = p.rvol();
            let aw = rat_int(&dot_int(&fl.frame.a, w));
            let dq = rat(d as i64, 1);
            for (k, t) in translates.iter().enumerate() {
                let v = &rv * (&fl.frame.b + &aw * rat(k as i64, 1)) / &dq;
                agree &= v == t.ppyr_hull_volume();
                volumes.push(v);
            }
        }
        c => return Err(HarnessError::BadCodimension(c)),
    }
    let increasing = volumes.windows(2).all(|v| v[0] < v[1]);

    let mut cache: BTreeMap<(usize, u32), QStepFunction> = BTreeMap::new();
    let mut get = |k: usize, level: u32| -> Result<QStepFunction, HarnessError> {
        if let Some(f) = cache.get(&(k, level)) {
            return Ok(f.clone());
        }
        let window = s * rat(1 << level, 1);
        let f = step_function(&translates[k], &window)?;
        cache.insert((k, level), f.clone());
        Ok(f)
    };
    let mut pairs = Vec::new();
    for i in 0..translates.len() {
        for j in i + 1..translates.len() {
            let mut result = None;
            for level in 0..=MAX_DOUBLINGS {
                let fi = get(i, level)?;
                let fj = get(j, level)?;
                if let Some(x) = fi.first_difference(&fj) {
                    result = Some(PairResult::Differ { s: x });
                    break;
                }
            }
            pairs.push(PairVerdict {
                i: i as i64,
                j: j as i64,
                result: result.unwrap_or_else(|| PairResult::EqualOnWindow {
                    window: s * rat(1 << MAX_DOUBLINGS, 1),
                }),
            });
        }
    }

    let mut contrast = true;
    let top = floor_rat(s).to_i64().unwrap_or(0).max(1);
    for t in 1..=top {
        let t = rat(t, 1);
        let base = count(&translates[0], &t)?;
        for q in &translates[1..] {
            contrast &= count(q, &t)? == base;
        }
    }

    Ok(DistinctReport {
        w: w.to_vec(),
        volumes: volumes.into_iter().map(RatStr).collect(),
        volumes_agree: agree,
        volumes_increasing: increasing,
        pairs,
        integer_contrast_equal: contrast,
    })
}

/// Whether `{x : E x = r}` contains an integer point.
pub fn lattice_meets(eqs: &[IVec], rhs: &[Rat], d: usize) -> bool {
    if eqs.is_empty() {
        return true;
    }
    let m = IMat::new(eqs.to_vec());
    let (_, v, rank) = kernel_lattice(&m, d);
    // E V = [B | 0]; integer points are V y with B y_1 = r
    let ev = m.mul(&v);
    let b: Vec<QVec> = ev
        .data
        .iter()
        .map(|row| row[..rank].iter().map(rat_int).collect())
        .collect();
    match solve_exact(&b, rhs) {
        Solution::Unique(y) => y.iter().all(is_integer),
        _ => false,
    }
}

/// `|L_{P+v}(s) / s^{dim P} - rvol P|` for the listed `s` at which the
/// affine hull of `s (P + v)` meets the lattice.
pub fn rvol_limit_check(
    p: &HPolytope,
    v: &[Rat],
    s_list: &[Rat],
) -> Result<Vec<(Rat, Rat)>, HarnessError> {
    let q = p.translate(v)?;
    let hull = q.affine_hull();
    let rv = q.rvol();
    let k = hull.hull_dim;
    let base_rhs: QVec = hull
        .equalities
        .iter()
        .map(|e| exactmath::dot_iq(e, &hull.point))
        .collect();
    let mut out = Vec::new();
    for s in s_list {
        if !s.is_positive() {
            continue;
        }
        let rhs: QVec = base_rhs.iter().map(|r| r * s).collect();
        if !lattice_meets(&hull.equalities, &rhs, q.dim()) {
            continue;
        }
        let l = rat(count(&q, s)? as i64, 1);
        let dev = (l / num_traits::pow(s.clone(), k) - &rv).abs();
        out.push((s.clone(), dev));
    }
    if out.is_empty() {
        return Err(HarnessError::EmptyGrid);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeFit {
    /// `sup s * dev(s)` over the fitting range.
    pub c: RatStr,
    pub dev_at_40: RatStr,
    pub passed: bool,
}

pub const FIT_RANGE: (i64, i64) = (10, 20);

/// Fits `dev(s) <= C / s` for a full-dimensional `P` with `C` the exact
/// supremum of `s * dev(s)` over [`FIT_RANGE`], then checks `s = 40`.
/// On a piece where `L` is constant, `|L - vol s^d| / s^(d-1)` is monotone,
/// so the supremum is attained at a breakpoint value or one-sided limit.
pub fn envelope_fit(p: &HPolytope, budget: u64) -> Result<EnvelopeFit, HarnessError> {
    if !p.is_full_dimensional() {
        return Err(HarnessError::BadCodimension(p.dim() - p.affine_hull().hull_dim));
    }
    let d = p.dim();
    let vol = p.rvol();
    let (lo, hi) = (rat(FIT_RANGE.0, 1), rat(FIT_RANGE.1, 1));
    let f = crate::ehrhart::step_function_window(p, &(&lo - rat(1, 64)), &hi, budget)?;
    let g = |s: &Rat, l: i64| {
        (rat(l, 1) - &vol * num_traits::pow(s.clone(), d)).abs() / num_traits::pow(s.clone(), d - 1)
    };
    let mut c = g(&lo, f.eval(&lo)).max(g(&lo, f.right_limit(&lo))).max(g(&hi, f.eval(&hi)));
    for (i, b) in f.breaks.iter().enumerate() {
        if b.s < lo || b.s > hi {
            continue;
        }
        c = c.max(g(&b.s, f.before(i))).max(g(&b.s, b.at)).max(g(&b.s, b.after));
    }
    let forty = rat(40, 1);
    let l40 = crate::ehrhart::count_with_budget(p, &forty, budget)?;
    let dev = (rat(l40 as i64, 1) / num_traits::pow(forty.clone(), d) - &vol).abs();
    let passed = dev <= &c / &forty;
    Ok(EnvelopeFit {
        c: RatStr(c),
        dev_at_40: RatStr(dev),
        passed,
    })
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
struct F128 {
    n: i128,
    d: i128,
}

impl F128 {
    fn new(n: i128, d: i128) -> F128 {
        if d < 0 {
            F128 { n: -n, d: -d }
        } else {
            F128 { n, d }
        }
    }

    fn lt(self, o: F128) -> bool {
        self.n * o.d < o.n * self.d
    }
}

/// `s -> #(s ppyr(P) ∩ Z^d)` on `(0, S]` by direct enumeration: a point
/// counts from the start of its dilation interval on.
pub fn brute_ppyr_step(p: &HPolytope, s_max: &Rat) -> Result<QStepFunction, HarnessError> {
    let d = p.dim();
    let normals = p.normals_i64().ok_or(EhrhartError::Overflow)?;
    let rhs: Vec<F128> = p
        .rhs()
        .iter()
        .map(|b| {
            Some(F128::new(
                b.numer().to_i128()?,
                b.denom().to_i128()?,
            ))
        })
        .collect::<Option<_>>()
        .ok_or(EhrhartError::Overflow)?;
    let bx: Vec<(i64, i64)> = (0..d)
        .map(|i| {
            let vals = p.vertices().iter().map(|v| &v[i] * s_max);
            let lo = vals.clone().min().expect("vertex").min(Rat::zero());
            let hi = vals.max().expect("vertex").max(Rat::zero());
            (
                floor_rat(&lo).to_i64().unwrap_or(i64::MIN),
                ceil_rat(&hi).to_i64().unwrap_or(i64::MAX),
            )
        })
        .collect();
    let size: u128 = bx.iter().map(|(l, u)| (u - l + 1) as u128).product();
    let budget = crate::ehrhart::point_budget();
    if size > budget as u128 {
        return Err(EhrhartError::WindowTooLarge {
            points: size,
            budget,
        }
        .into());
    }
    let smax = F128::new(
        s_max.numer().to_i128().ok_or(EhrhartError::Overflow)?,
        s_max.denom().to_i128().ok_or(EhrhartError::Overflow)?,
    );
    let zero = F128::new(0, 1);
    let mut starts: Vec<F128> = Vec::new();
    let mut x: Vec<i64> = bx.iter().map(|b| b.0).collect();
    loop {
        let mut alpha = zero;
        let mut beta: Option<F128> = None;
        let mut alive = true;
        for (a, b) in normals.iter().zip(&rhs) {
            let dot: i128 = a.iter().zip(&x).map(|(p, q)| *p as i128 * *q as i128).sum();
            if b.n == 0 {
                if dot > 0 {
                    alive = false;
                    break;
                }
                continue;
            }
            let t = F128::new(dot * b.d, b.n);
            if b.n > 0 {
                if alpha.lt(t) {
                    alpha = t;
                }
            } else if beta.map_or(true, |bt| t.lt(bt)) {
                beta = Some(t);
            }
        }
        if alive && beta.map_or(true, |bt| !bt.lt(alpha)) && !smax.lt(alpha) {
            starts.push(alpha);
        }
        let mut j = d;
        loop {
            if j == 0 {
                break;
            }
            j -= 1;
            if x[j] < bx[j].1 {
                x[j] += 1;
                break;
            }
            x[j] = bx[j].0;
        }
        if j == 0 && x[0] == bx[0].0 && x.iter().zip(&bx).all(|(c, b)| *c == b.0) {
            break;
        }
    }
    let mut by_start: BTreeMap<Rat, i64> = BTreeMap::new();
    let mut base = 0i64;
    for a in starts {
        if a.n == 0 {
            base += 1;
        } else {
            *by_start
                .entry(Rat::new(BigInt::from(a.n), BigInt::from(a.d)))
                .or_insert(0) += 1;
        }
    }
    let mut cur = base;
    let breaks = by_start
        .into_iter()
        .map(|(s, n)| {
            cur += n;
            Break {
                s,
                at: cur,
                after: cur,
                entering: n,
                leaving: 0,
            }
        })
        .collect();
    Ok(StepFn {
        lo: Rat::zero(),
        hi: s_max.clone(),
        base,
        breaks,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JumpCheck {
    pub breakpoints: usize,
    pub mismatches: Vec<String>,
}

/// Left and right jumps of `L_P` on `(0, S]` against front and back facet
/// lattice counts.
pub fn check_jumps(p: &HPolytope, s_max: &Rat) -> Result<JumpCheck, HarnessError> {
    let f = step_function(p, s_max)?;
    let fc = FacetCounter::new(p)?;
    let mut mismatches = Vec::new();
    let reports = crate::ehrhart::jumps(&f);
    for r in &reports {
        let front = fc.count(&r.s0, FacetKind::Front)? as i64;
        let back = fc.count(&r.s0, FacetKind::Back)? as i64;
        if front != r.left_jump || back != r.right_jump {
            mismatches.push(format!(
                "s={} left {} vs {} right {} vs {}",
                exactmath::fmt_rat(&r.s0),
                r.left_jump,
                front,
                r.right_jump,
                back
            ));
        }
    }
    Ok(JumpCheck {
        breakpoints: reports.len(),
        mismatches,
    })
}

const GRID_COARSE: i64 = 128;
const GRID_FINE: i64 = 32;

fn tolerance() -> Rat {
    Rat::new(BigInt::one(), BigInt::from(10u64).pow(12))
}

/// Oracle for the flattened `(d-1)`-dimensional polytope `P'`, built only
/// from a `d`-dimensional oracle of the hidden codimension-one `P`:
/// `L_{P'+w'}(s) = L_{P+w}(s)` whenever `s (b + z_1)` is an integer, where
/// `w = V (z_1, w')`. Breakpoints are located by bracketing between such
/// grid points and reading off the simplest rational in a tiny bracket.
pub struct GridOracle {
    inner: Box<dyn EhrhartOracle>,
    frame: HyperplaneFrame,
    stats: Mutex<QueryStats>,
}

impl GridOracle {
    pub fn new(inner: Box<dyn EhrhartOracle>, frame: HyperplaneFrame) -> GridOracle {
        GridOracle {
            inner,
            frame,
            stats: Mutex::new(QueryStats::default()),
        }
    }

    pub fn inner(&self) -> &dyn EhrhartOracle {
        self.inner.as_ref()
    }

    pub fn frame(&self) -> &HyperplaneFrame {
        &self.frame
    }

    /// Exact values at the grid points `m / c` in `(lo, hi]`, for a `c`
    /// giving about `n` of them.
    fn samples(
        &self,
        wp: &[Int],
        lo: &Rat,
        hi: &Rat,
        n: i64,
    ) -> Result<Vec<(Rat, i64)>, ReconError> {
        let need = rat(n, 1) / (hi - lo);
        let z1 = ceil_rat(&(need - &self.frame.b)).max(Int::one());
        let c = &self.frame.b + rat_int(&z1);
        let w = self.frame.lift_translation(&z1, wp);
        let g = self.inner.query(&w, lo, hi)?;
        let m_lo = floor_rat(&(lo * &c)) + 1u32;
        let m_hi = floor_rat(&(hi * &c));
        let mut out = Vec::new();
        let mut m = m_lo;
        while m <= m_hi {
            let s = rat_int(&m) / &c;
            out.push((s.clone(), g.eval(&s)));
            m += 1u32;
        }
        Ok(out)
    }

    fn left_of(&self, wp: &[Int], x: &Rat) -> Result<i64, ReconError> {
        let lo = x - tolerance();
        let pts = self.samples(wp, &lo, x, 4)?;
        Ok(pts
            .iter()
            .rev()
            .find(|(s, _)| s < x)
            .expect("grid is dense enough")
            .1)
    }

    fn right_of(&self, wp: &[Int], x: &Rat) -> Result<(Rat, i64), ReconError> {
        let hi = x + tolerance();
        let pts = self.samples(wp, x, &hi, 4)?;
        Ok(pts[0].clone())
    }

    /// `L_{P'+w'}(t)` when some grid passes through `t`.
    fn value_at(&self, wp: &[Int], t: &Rat) -> Result<Option<i64>, ReconError> {
        let q = t.denom().to_i64().unwrap_or(i64::MAX);
        if q > 1_000_000 {
            return Ok(None);
        }
        for z in 1..=q {
            let z1 = int(z);
            let c = &self.frame.b + rat_int(&z1);
            if is_integer(&(t * &c)) {
                let w = self.frame.lift_translation(&z1, wp);
                let lo = t - Rat::one() / (c * rat(4, 1));
                let lo = if lo.is_negative() { t / rat(2, 1) } else { lo };
                let g = self.inner.query(&w, &lo, t)?;
                return Ok(Some(g.eval(t)));
            }
        }
        Ok(None)
    }

    fn refine(
        &self,
        wp: &[Int],
        mut left: (Rat, i64),
        mut right: (Rat, i64),
    ) -> Result<Break<i64>, ReconError> {
        let tol = tolerance();
        while &right.0 - &left.0 > tol {
            let mut chain = vec![left.clone()];
            chain.extend(
                self.samples(wp, &left.0, &right.0, GRID_FINE)?
                    .into_iter()
                    .filter(|(s, _)| *s < right.0),
            );
            chain.push(right.clone());
            let i = (0..chain.len() - 1)
                .find(|&i| chain[i].1 != chain[i + 1].1)
                .expect("endpoints differ");
            left = chain[i].clone();
            right = chain[i + 1].clone();
        }
        let t = simplest_between(&left.0, &right.0);
        let (at, after, before) = if t == left.0 {
            (left.1, right.1, self.left_of(wp, &t)?)
        } else if t == right.0 {
            (right.1, self.right_of(wp, &t)?.1, left.1)
        } else {
            let guess = left.1.max(right.1);
            (self.value_at(wp, &t)?.unwrap_or(guess), right.1, left.1)
        };
        let _ = before;
        Ok(Break {
            s: t,
            at,
            after,
            entering: 0,
            leaving: 0,
        })
    }
}

impl EhrhartOracle for GridOracle {
    fn dim(&self) -> usize {
        self.frame.a.len() - 1
    }

    fn query(&self, wp: &[Int], lo: &Rat, hi: &Rat) -> Result<QStepFunction, ReconError> {
        {
            let mut st = self.stats.lock().expect("stats lock");
            st.calls += 1;
            st.total_length += hi - lo;
        }
        let mut chain = vec![self.right_of(wp, lo)?];
        let first = chain[0].0.clone();
        chain.extend(
            self.samples(wp, lo, hi, GRID_COARSE)?
                .into_iter()
                .filter(|(s, _)| *s > first),
        );
        if chain.last().expect("nonempty").0 != *hi {
            match self.value_at(wp, hi)? {
                Some(v) => chain.push((hi.clone(), v)),
                None => {
                    let v = self.left_of(wp, hi)?;
                    let last = chain.last().expect("nonempty").1;
                    if v != last {
                        // a change just left of hi that the coarse grid missed
                        let pts = self.samples(wp, &(hi - tolerance()), hi, 4)?;
                        if let Some(p) = pts.into_iter().rev().find(|(s, _)| s < hi) {
                            chain.push(p);
                        }
                    }
                }
            }
        }
        let mut breaks: Vec<Break<i64>> = Vec::new();
        for i in 0..chain.len() - 1 {
            if chain[i].1 != chain[i + 1].1 {
                let b = self.refine(wp, chain[i].clone(), chain[i + 1].clone())?;
                if !breaks.iter().any(|x| x.s == b.s) {
                    breaks.push(b);
                }
            }
        }
        breaks.sort_by(|a, b| a.s.cmp(&b.s));
        Ok(StepFn {
            lo: lo.clone(),
            hi: hi.clone(),
            base: chain[0].1,
            breaks,
        })
    }

    fn stats(&self) -> QueryStats {
        self.stats.lock().expect("stats lock").clone()
    }

    fn mirror(&self, candidate: &HPolytope) -> Result<Box<dyn EhrhartOracle>, ReconError> {
        let lifted = self.frame.lift(candidate)?;
        Ok(Box::new(GridOracle::new(
            self.inner.mirror(&lifted)?,
            self.frame.clone(),
        )))
    }
}

fn rational_gcd(xs: &[Rat]) -> Rat {
    let l = exactmath::lcm_denoms(xs.iter());
    let g = xs
        .iter()
        .map(|x| (x * rat_int(&l)).to_integer())
        .fold(Int::zero(), |acc, n| acc.gcd(&n));
    rat_int(&g) / rat_int(&l)
}

const PROBE_START: i64 = 8;

/// `|b + <a, w>|` read off the oracle: the function is a train of spikes
/// on `(1/|c|) Z` unless `c = 0`.
fn probe_offset(oracle: &dyn EhrhartOracle, w: &[Int]) -> Result<Rat, HarnessError> {
    let lo = rat(PROBE_START, 1);
    let mut len = 4i64;
    while len <= 256 {
        let f = oracle.query(w, &lo, &(&lo + rat(len, 1)))?;
        let spikes = f.base == 0
            && f.breaks
                .iter()
                .enumerate()
                .all(|(i, b)| f.before(i) == 0 && b.after == 0);
        if !spikes {
            return Ok(Rat::zero());
        }
        if f.breaks.len() >= 4 {
            let pos: Vec<Rat> = f.breaks.iter().map(|b| b.s.clone()).collect();
            return Ok(Rat::one() / rational_gcd(&pos));
        }
        len *= 2;
    }
    Err(HarnessError::Identification(
        "too few lattice hits to read the spacing".into(),
    ))
}

/// Recovers the hyperplane `<a, x> = b` containing the hidden polytope,
/// oriented as in [`HPolytope::flatten_codim1`].
pub fn identify_hyperplane(oracle: &dyn EhrhartOracle) -> Result<(IVec, Rat), HarnessError> {
    let d = oracle.dim();
    let unit = |i: usize, k: i64| -> IVec {
        (0..d).map(|j| if i == j { int(k) } else { Int::zero() }).collect()
    };
    let mut bases = vec![vec![Int::zero(); d]];
    for i in 0..d {
        bases.push(unit(i, 1));
        bases.push(unit(i, -1));
    }
    let mut base = None;
    for w in bases {
        let c = probe_offset(oracle, &w)?;
        if !c.is_zero() {
            base = Some((w, c));
            break;
        }
    }
    let (wb, cb) = base.ok_or_else(|| HarnessError::Identification("every probe is flat".into()))?;
    // orientation with c(w_b) > 0
    let mut a = Vec::with_capacity(d);
    for i in 0..d {
        let w1: IVec = wb.iter().zip(unit(i, 1)).map(|(x, y)| x + y).collect();
        let w2: IVec = wb.iter().zip(unit(i, 2)).map(|(x, y)| x + y).collect();
        let m1 = probe_offset(oracle, &w1)?;
        let m2 = probe_offset(oracle, &w2)?;
        let found = [&m1 - &cb, -&m1 - &cb].into_iter().find(|ai| {
            is_integer(ai) && (&cb + ai * rat(2, 1)).abs() == m2
        });
        let ai = found.ok_or_else(|| {
            HarnessError::Identification(format!("inconsistent offsets along axis {i}"))
        })?;
        a.push(ai.to_integer());
    }
    let mut b = &cb - rat_int(&dot_int(&a, &wb));
    let (ap, g) = primitivize(&a)
        .map_err(|_| HarnessError::Identification("zero normal".into()))?;
    if !g.is_one() {
        return Err(HarnessError::Identification("normal is not primitive".into()));
    }
    let mut a = ap;
    let first_neg = a.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative());
    if b.is_negative() || (b.is_zero() && first_neg) {
        a = a.iter().map(|x| -x).collect();
        b = -b;
    }
    Ok((a, b))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Codim1Report {
    #[serde(with = "exactmath::serde_int_vec")]
    pub a: IVec,
    #[serde(with = "exactmath::serde_rat")]
    pub b: Rat,
    pub reconstruction: ReconstructionReport,
    pub lifted: Option<HPolytope>,
    /// Exact comparison in the original space.
    pub verification: Verification,
}

impl Codim1Report {
    pub fn passed(&self) -> bool {
        self.reconstruction.passed() && matches!(self.verification, Verification::Passed { .. })
    }
}

/// Normals of the flattened polytope, in the frame the demo rebuilds.
pub fn projected_normals(hidden: &HPolytope) -> Result<Vec<IVec>, HarnessError> {
    Ok(hidden.flatten_codim1()?.projected.normals())
}

/// Identifies the hyperplane of a hidden codimension-one polytope, recovers
/// its flattening through a [`GridOracle`], lifts the result back and checks
/// it against the original oracle.
pub fn codim1_reconstruction_demo(
    hidden: &HPolytope,
    normals: &[IVec],
    config: &ReconConfig,
) -> Result<Codim1Report, HarnessError> {
    let d = hidden.dim();
    let codim = d - hidden.affine_hull().hull_dim;
    if codim != 1 {
        return Err(HarnessError::BadCodimension(codim));
    }
    let inner: Box<dyn EhrhartOracle> = Box::new(HiddenOracle::new(hidden.clone()));
    let (a, b) = identify_hyperplane(inner.as_ref())?;
    let frame = HyperplaneFrame::new(a.clone(), b.clone());
    let grid = GridOracle::new(inner, frame.clone());
    let reconstruction = recover(&grid, normals, config)?;
    let (lifted, verification) = match &reconstruction.polytope {
        Some(q) if reconstruction.passed() => {
            let lifted = frame.lift(q)?;
            let v = verify(grid.inner(), &lifted, config.verify_windows, config.seed ^ 0x5eed)?;
            (Some(lifted), v)
        }
        _ => (
            None,
            Verification::NoCandidate {
                reason: "reconstruction did not pass".into(),
            },
        ),
    };
    Ok(Codim1Report {
        a,
        b,
        reconstruction,
        lifted,
        verification,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteRecord {
    pub instance: usize,
    pub dim: usize,
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

fn record(instance: usize, dim: usize, check: &str, r: Result<(bool, String), HarnessError>) -> SuiteRecord {
    let (passed, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
    SuiteRecord {
        instance,
        dim,
        check: check.into(),
        passed,
        detail,
    }
}

/// Lemma checks on one instance: jumps, lifting, decomposition, translates.
pub fn instance_checks(
    idx: usize,
    p: &HPolytope,
    s_max: &Rat,
    translates: i64,
) -> Vec<SuiteRecord> {
    let d = p.dim();
    let mut out = Vec::new();
    out.push(record(idx, d, "jumps", (|| {
        let j = check_jumps(p, s_max)?;
        Ok((
            j.mismatches.is_empty(),
            if j.mismatches.is_empty() {
                format!("{} breakpoints", j.breakpoints)
            } else {
                j.mismatches.join("; ")
            },
        ))
    })()));
    out.push(record(idx, d, "lifting", (|| {
        let lifted = lifting(&step_function(p, s_max)?);
        let brute = brute_ppyr_step(p, s_max)?;
        let ok = lifted == brute;
        Ok((
            ok,
            match lifted.first_difference(&brute) {
                None => format!("{} breakpoints", brute.breaks.len()),
                Some(s) => format!("differ at {}", exactmath::fmt_rat(&s)),
            },
        ))
    })()));
    out.push(record(idx, d, "decomposition", (|| {
        let v = p.ppyr_volume()?;
        Ok((
            v.decomposition == v.hull,
            format!(
                "{} vs {}",
                exactmath::fmt_rat(&v.decomposition),
                exactmath::fmt_rat(&v.hull)
            ),
        ))
    })()));
    out.push(record(idx, d, "translates", (|| {
        let w = find_translation_witness(p)?;
        let r = check_translates_distinct(p, &w, translates, &rat(2, 1))?;
        Ok((
            r.passed(),
            format!(
                "w={:?} increasing={} distinct={} contrast={}",
                w.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                r.volumes_increasing,
                r.all_distinct(),
                r.integer_contrast_equal
            ),
        ))
    })()));
    out
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub per_check: BTreeMap<String, (usize, usize)>,
}

impl SuiteSummary {
    pub fn from_records(records: &[SuiteRecord]) -> SuiteSummary {
        let mut per_check: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for r in records {
            let e = per_check.entry(r.check.clone()).or_default();
            e.1 += 1;
            if r.passed {
                e.0 += 1;
            }
        }
        SuiteSummary { per_check }
    }

    pub fn all_passed(&self) -> bool {
        self.per_check.values().all(|(p, t)| p == t)
    }
}

pub fn run_suite(spec: &InstanceSpec) -> Result<Vec<SuiteRecord>, HarnessError> {
    spec.check()?;
    let mut out = Vec::new();
    for (i, p) in generate(spec).iter().enumerate() {
        out.extend(instance_checks(i, p, &spec.s_max.0, spec.translates));
    }
    Ok(out)
}

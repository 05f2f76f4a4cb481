//! Recovering right-hand sides from translated Ehrhart functions.
//!
//! The engine only talks to an [`EhrhartOracle`]. For every normal, taken in
//! order of nonincreasing length, it places small windows `(alpha_k,
//! alpha_k + eps_k)` where only the current normal's hyperplane can produce
//! left discontinuities, reads off candidate right-hand sides, and finally
//! checks the assembled polytope against fresh oracle windows.

use std::collections::BTreeSet;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ehrhart::{point_budget, step_function_window, Break, EhrhartError, QStepFunction, StepFn};
use crate::exactmath::{
    self, ceil_rat, dot_int, floor_rat, fmt_rat, int, is_integer, kernel_lattice, norm2, rat,
    rat_int, IMat, IVec, Int, Rat,
};
use crate::polytope::{HPolytope, PolytopeError};

#[derive(Debug, Error)]
pub enum ReconError {
    #[error(transparent)]
    Oracle(#[from] EhrhartError),
    #[error("oracle failure: {0}")]
    Query(String),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error("no vector orthogonal to the leading normal separates the others (search radius {0})")]
    NoSeparatingVector(i64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no candidate survives")]
    EmptyCandidates,
    #[error("coefficient vectors are linearly dependent")]
    LinearlyDependent,
    #[error("query budget exhausted: {used} of {cap} window length units")]
    BudgetExceeded { used: String, cap: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub calls: u64,
    pub total_length: Rat,
}

/// Access to `s -> L_{P+w}(s)` for a hidden `P`.
pub trait EhrhartOracle: Send + Sync {
    fn dim(&self) -> usize;
    /// `L_{P+w}` on `(lo, hi]`.
    fn query(&self, w: &[Int], lo: &Rat, hi: &Rat) -> Result<QStepFunction, ReconError>;
    fn stats(&self) -> QueryStats;
    /// An oracle of the same kind, answering for `candidate` instead.
    fn mirror(&self, candidate: &HPolytope) -> Result<Box<dyn EhrhartOracle>, ReconError>;
}

/// Oracle backed by an explicit polytope and the exact sweep.
pub struct HiddenOracle {
    hidden: HPolytope,
    budget: u64,
    stats: Mutex<QueryStats>,
}

impl HiddenOracle {
    pub fn new(hidden: HPolytope) -> HiddenOracle {
        HiddenOracle::with_budget(hidden, point_budget())
    }

    pub fn with_budget(hidden: HPolytope, budget: u64) -> HiddenOracle {
        HiddenOracle {
            hidden,
            budget,
            stats: Mutex::new(QueryStats::default()),
        }
    }
}

impl EhrhartOracle for HiddenOracle {
    fn dim(&self) -> usize {
        self.hidden.dim()
    }

    fn query(&self, w: &[Int], lo: &Rat, hi: &Rat) -> Result<QStepFunction, ReconError> {
        {
            let mut st = self.stats.lock().expect("stats lock");
            st.calls += 1;
            st.total_length += hi - lo;
        }
        let moved = self.hidden.translate_int(w)?;
        Ok(step_function_window(&moved, lo, hi, self.budget)?)
    }

    fn stats(&self) -> QueryStats {
        self.stats.lock().expect("stats lock").clone()
    }

    fn mirror(&self, candidate: &HPolytope) -> Result<Box<dyn EhrhartOracle>, ReconError> {
        Ok(Box::new(HiddenOracle::with_budget(
            candidate.clone(),
            self.budget,
        )))
    }
}

fn default_schedule() -> Vec<i64> {
    vec![8, 12, 16, 24, 32, 48, 64]
}

fn default_extensions() -> Vec<Vec<i64>> {
    vec![vec![10, 20, 30, 40, 60], vec![18, 36, 56, 72, 90]]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconConfig {
    pub schedule: Vec<i64>,
    /// Extra scales tried, one list per further round.
    pub extensions: Vec<Vec<i64>>,
    /// Two jumps `J1 <= J2` count as alike when `J2 <= ratio_band * J1`.
    #[serde(with = "exactmath::serde_rat")]
    pub ratio_band: Rat,
    #[serde(with = "exactmath::serde_rat")]
    pub theta: Rat,
    /// Candidates are searched in `[-b_bound, b_bound]`, doubled each round.
    pub b_bound: i64,
    pub max_den: i64,
    /// Cap on the total window length asked of the oracle.
    pub window_budget: i64,
    pub verify_windows: usize,
    pub seed: u64,
    pub search_radius: i64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            schedule: default_schedule(),
            extensions: default_extensions(),
            ratio_band: rat(2, 1),
            theta: rat(1, 100),
            b_bound: 16,
            max_den: 64,
            window_budget: 500,
            verify_windows: 8,
            seed: 0,
            search_radius: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    #[serde(with = "exactmath::serde_int_vec")]
    pub w0: IVec,
    pub tau: i64,
    /// `<a_1, w0> = tau * |a_1|^2`.
    #[serde(with = "exactmath::serde_rat")]
    pub h: Rat,
    #[serde(with = "exactmath::serde_rat")]
    pub epsilon: Rat,
    #[serde(with = "exactmath::serde_rat")]
    pub epsilon_prime: Rat,
    #[serde(with = "exactmath::serde_rat")]
    pub epsilon0: Rat,
    pub k_schedule: Vec<i64>,
}

impl WindowPlan {
    pub fn alpha(&self, k: i64) -> Rat {
        rat(k, 1) + &self.epsilon / (&self.epsilon_prime * rat(k, 1))
    }

    pub fn eps_k(&self, k: i64) -> Rat {
        &self.epsilon0 / rat(k, 1)
    }

    /// The open window `(alpha_k, alpha_k + eps_k)` as its endpoints.
    pub fn window(&self, k: i64) -> (Rat, Rat) {
        let a = self.alpha(k);
        let b = &a + self.eps_k(k);
        (a, b)
    }
}

fn coefficient_vectors(dim: usize, r: i64) -> Vec<Vec<i64>> {
    // all vectors with max-norm exactly r, lexicographic
    let mut out = Vec::new();
    let mut cur = vec![-r; dim];
    loop {
        if cur.iter().any(|c| c.abs() == r) {
            out.push(cur.clone());
        }
        let mut i = dim;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < r {
                cur[i] += 1;
                break;
            }
            cur[i] = -r;
        }
    }
}

/// Isolating plan for `normals[0]`, which must be (weakly) the longest.
pub fn choose_w0(normals: &[IVec], search_radius: i64) -> Result<WindowPlan, ReconError> {
    choose_w0_avoiding(normals, &[], search_radius)
}

const MAX_TAU: i64 = 4096;

/// Like [`choose_w0`], also keeping `<a, w0>` off the positive multiples of
/// `<a_1, w0>` for the already recovered normals in `prefix`: otherwise every
/// discontinuity of the facet under test can sit on a masked position.
pub fn choose_w0_avoiding(
    normals: &[IVec],
    prefix: &[IVec],
    search_radius: i64,
) -> Result<WindowPlan, ReconError> {
    let a1 = normals
        .first()
        .ok_or_else(|| ReconError::Precondition("no normals".into()))?;
    let d = a1.len();
    let n1 = norm2(a1);
    for a in normals {
        if a.len() != d {
            return Err(ReconError::Precondition("normals of mixed dimension".into()));
        }
        if exactmath::gcd_vec(a) != BigInt::one() {
            return Err(ReconError::Precondition(format!(
                "normal {:?} is not primitive",
                a.iter().map(|x| x.to_string()).collect::<Vec<_>>()
            )));
        }
        if norm2(a) > n1 {
            return Err(ReconError::Precondition("leading normal is not the longest".into()));
        }
    }
    let neg1: IVec = a1.iter().map(|x| -x).collect();
    let others: Vec<&IVec> = normals[1..].iter().collect();
    if others.iter().any(|a| *a == a1) {
        return Err(ReconError::Precondition("repeated normal".into()));
    }

    let zero: IVec = vec![BigInt::zero(); d];
    let mut shifts = Vec::new();
    if d == 1 {
        shifts.push(zero.clone());
    } else {
        let (basis, _, _) = kernel_lattice(&IMat::new(vec![a1.clone()]), d);
        for r in 1..=search_radius {
            for coef in coefficient_vectors(basis.len(), r) {
                let mut w = zero.clone();
                for (c, v) in coef.iter().zip(&basis) {
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi += vi * c;
                    }
                }
                if others
                    .iter()
                    .copied()
                    .chain(prefix)
                    .filter(|a| **a != neg1)
                    .all(|a| !dot_int(a, &w).is_zero())
                {
                    shifts.push(w);
                }
            }
        }
    }

    // Smallest tau making a_1 dominate with every product nonzero. A
    // positive product dividing h would let that hyperplane's
    // discontinuities pass for a_1's with a scaled b on every window.
    let admissible = |w0: &IVec, h: &Int| {
        others.iter().all(|a| {
            let c = dot_int(a, w0);
            !c.is_zero() && c < *h && !(c.is_positive() && (h % &c).is_zero())
        }) && prefix.iter().all(|a| {
            let c = dot_int(a, w0);
            !(c.is_positive() && (&c % h).is_zero())
        })
    };
    let mut found = None;
    'search: for w_prime in &shifts {
        for tau in 1..=MAX_TAU {
            let w0: IVec = w_prime
                .iter()
                .zip(a1)
                .map(|(w, a)| w + a * tau)
                .collect();
            if admissible(&w0, &(&n1 * tau)) {
                found = Some((w0, tau));
                break 'search;
            }
        }
    }
    let (w0, tau) = found.ok_or(ReconError::NoSeparatingVector(search_radius))?;
    let h = rat_int(&(&n1 * tau));

    let mut eps_p = &h / rat(4, 1);
    for a in &others {
        let c = rat_int(&dot_int(a, &w0));
        let gap = &h - &c;
        let half_gap = gap / rat(2, 1);
        if half_gap < eps_p {
            eps_p = half_gap;
        }
        if c.is_positive() {
            let half = c / rat(2, 1);
            if half < eps_p {
                eps_p = half;
            }
        }
    }
    let one = Rat::one();
    let hm = &h - &eps_p;
    let eps = (&one / &hm - &one / &h) / ((&one / &eps_p + &one / &hm) * rat(2, 1));
    let eps0 = (&one - &eps) / &hm - &eps / &eps_p;
    let plan = WindowPlan {
        w0,
        tau,
        h: h.clone(),
        epsilon: eps,
        epsilon_prime: eps_p,
        epsilon0: eps0,
        k_schedule: default_schedule(),
    };
    debug_assert!(&one / &h < plan.epsilon0 && plan.epsilon0 < rat(2, 1) / &h);
    debug_assert!(plan.epsilon.is_positive() && plan.epsilon < one);
    Ok(plan)
}

/// `sum_{m=1}^{n} m^p`.
fn power_sum(n: &Int, p: u32) -> Int {
    if n.is_negative() || n.is_zero() {
        return Int::zero();
    }
    let n1 = n + 1u32;
    match p {
        0 => n.clone(),
        1 => n * &n1 / 2u32,
        2 => n * &n1 * (n * 2u32 + 1u32) / 6u32,
        3 => {
            let t = n * &n1 / 2u32;
            &t * &t
        }
        _ => {
            let mut acc = Int::zero();
            let mut m = Int::one();
            while &m <= n {
                acc += num_traits::pow(m.clone(), p as usize);
                m += 1u32;
            }
            acc
        }
    }
}

/// The staircase `S(x) = 0^{d-1} + 1^{d-1} + ... + floor(x)^{d-1}` for
/// `x >= 0`; for `x < 0` it counts, with a minus sign, the levels strictly
/// above `x`, so that the corresponding jumps sit on the right.
pub fn staircase(x: &Rat, d: usize) -> Int {
    let p = (d - 1) as u32;
    if !x.is_negative() {
        let zero_term = if p == 0 { Int::one() } else { Int::zero() };
        zero_term + power_sum(&floor_rat(x), p)
    } else {
        let n = ceil_rat(&-x) - 1u32;
        -power_sum(&n, p)
    }
}

/// An already recovered facet, as seen from the translate by `w`.
#[derive(Clone, Debug)]
pub struct KnownFacet {
    pub b: Rat,
    pub gamma: Rat,
    /// `<a, w>`
    pub aw: Rat,
}

impl KnownFacet {
    fn shifted(&self) -> Rat {
        &self.b + &self.aw
    }
}

fn staircase_term(known: &KnownFacet, d: usize, lo: &Rat, hi: &Rat) -> StepFn<Rat> {
    let t = known.shifted();
    if t.is_zero() || known.gamma.is_zero() {
        return StepFn::constant(lo.clone(), hi.clone(), Rat::zero());
    }
    let scale = &known.gamma / num_traits::pow(t.abs(), d - 1);
    let value = |s: &Rat| rat_int(&staircase(&(s * &t), d)) * &scale;
    let mid_right = |s: &Rat| {
        // value on the open piece just right of s
        let step = Rat::one() / (t.abs() * rat(4, 1));
        value(&(s + step.min(hi - s) / rat(2, 1)))
    };
    // breakpoints: s * t integral
    let (m_lo, m_hi) = if t.is_positive() {
        (floor_rat(&(lo * &t)) + 1u32, floor_rat(&(hi * &t)))
    } else {
        (ceil_rat(&(hi * &t)), ceil_rat(&(lo * &t)) - 1u32)
    };
    let mut breaks = Vec::new();
    let mut m = m_lo;
    while m <= m_hi {
        let s = rat_int(&m) / &t;
        breaks.push(Break {
            at: value(&s),
            after: if s == *hi { value(&s) } else { mid_right(&s) },
            s,
            entering: 0,
            leaving: 0,
        });
        m += 1u32;
    }
    breaks.sort_by(|a, b| a.s.cmp(&b.s));
    let base = if breaks.is_empty() {
        value(hi)
    } else {
        let first = &breaks[0].s;
        value(&((lo + first) / rat(2, 1)))
    };
    StepFn {
        lo: lo.clone(),
        hi: hi.clone(),
        base,
        breaks,
    }
}

/// `f - sum_i gamma_i S(s (b_i + <a_i, w>)) / |b_i + <a_i, w>|^{d-1}`; each
/// term jumps by `gamma_i s^{d-1}` where the known hyperplane meets the
/// lattice.
pub fn clean(f: &QStepFunction, known: &[KnownFacet], d: usize) -> StepFn<Rat> {
    let mut g = f.to_rat();
    for kf in known {
        g = g.minus(&staircase_term(kf, d, &f.lo, &f.hi));
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Good,
    NotSoGood,
    Bad,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discontinuity {
    #[serde(with = "exactmath::serde_rat")]
    pub s: Rat,
    pub left_jump: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowObservation {
    pub k: i64,
    #[serde(with = "exactmath::serde_rat")]
    pub lo: Rat,
    #[serde(with = "exactmath::serde_rat")]
    pub hi: Rat,
    pub discontinuities: Vec<Discontinuity>,
    pub classification: Classification,
    pub vk: i64,
    /// Discontinuities dropped because a known hyperplane sits there.
    pub masked: usize,
    /// Set when the oracle refused the window (point budget).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

/// Recovered facets used to clean later windows.
#[derive(Clone, Debug, Default)]
pub struct CleaningState {
    pub known: Vec<(IVec, Rat, Rat)>,
}

impl CleaningState {
    pub fn push(&mut self, a: IVec, b: Rat, gamma: Rat) {
        self.known.push((a, b, gamma));
    }

    fn at(&self, w: &[Int]) -> Vec<KnownFacet> {
        self.known
            .iter()
            .map(|(a, b, g)| KnownFacet {
                b: b.clone(),
                gamma: g.clone(),
                aw: rat_int(&dot_int(a, w)),
            })
            .collect()
    }
}

pub fn classify(discs: &[Discontinuity], ratio_band: &Rat) -> Classification {
    match discs {
        [_] => Classification::Good,
        [x, y] => {
            let (j1, j2) = if x.left_jump <= y.left_jump {
                (x.left_jump, y.left_jump)
            } else {
                (y.left_jump, x.left_jump)
            };
            if j1 > 0 && rat(j2, 1) <= ratio_band * rat(j1, 1) {
                Classification::NotSoGood
            } else {
                Classification::Bad
            }
        }
        _ => Classification::Bad,
    }
}

fn budgeted_query(
    oracle: &dyn EhrhartOracle,
    w: &[Int],
    lo: &Rat,
    hi: &Rat,
    cap: Option<&Rat>,
) -> Result<QStepFunction, ReconError> {
    if let Some(cap) = cap {
        let used = oracle.stats().total_length + (hi - lo);
        if used > *cap {
            return Err(ReconError::BudgetExceeded {
                used: fmt_rat(&used),
                cap: fmt_rat(cap),
            });
        }
    }
    oracle.query(w, lo, hi)
}

fn scan(
    oracle: &dyn EhrhartOracle,
    plan: &WindowPlan,
    k: i64,
    cleaner: &CleaningState,
    ratio_band: &Rat,
    cap: Option<&Rat>,
) -> Result<WindowObservation, ReconError> {
    let d = oracle.dim();
    let w: IVec = plan.w0.iter().map(|x| x * k).collect();
    let (lo, hi) = plan.window(k);
    let f = budgeted_query(oracle, &w, &lo, &hi, cap)?;
    let known = cleaner.at(&w);
    let g = clean(&f, &known, d);
    let mut discs = Vec::new();
    let mut masked = 0;
    for (s, j) in g.left_jumps() {
        if s == hi {
            continue;
        }
        let on_known = known.iter().any(|kf| {
            let t = kf.shifted();
            t.is_positive() && is_integer(&(&s * &t))
        });
        if on_known {
            masked += 1;
            continue;
        }
        debug_assert!(is_integer(&j));
        let j = j.to_integer().to_i64().unwrap_or(i64::MAX);
        if j != 0 {
            discs.push(Discontinuity { s, left_jump: j });
        }
    }
    let classification = classify(&discs, ratio_band);
    let vk = discs.iter().map(|x| x.left_jump).sum();
    Ok(WindowObservation {
        k,
        lo,
        hi,
        discontinuities: discs,
        classification,
        vk,
        masked,
        skipped: None,
    })
}

/// Queries `L_{P + k w0}` on the plan's window, cleans the known facets out,
/// and classifies what is left.
pub fn window_scan(
    oracle: &dyn EhrhartOracle,
    plan: &WindowPlan,
    k: i64,
    cleaner: &CleaningState,
    ratio_band: &Rat,
) -> Result<WindowObservation, ReconError> {
    scan(oracle, plan, k, cleaner, ratio_band, None)
}

/// Solutions `b` of `s_l (b + K_l c) in Z` for all equations, with
/// `b_lo <= b <= b_hi` and denominator at most `max_den`.
pub fn pseudo_diophantine_solve(
    eqs: &[(Rat, i64)],
    c: &Rat,
    bounds: (&Rat, &Rat, i64),
) -> Result<Vec<Rat>, ReconError> {
    let (b_lo, b_hi, max_den) = bounds;
    let Some((s0, k0)) = eqs.first() else {
        return Err(ReconError::Precondition("no equations".into()));
    };
    for (s, _) in eqs {
        if is_integer(s) || !s.is_positive() {
            return Err(ReconError::Precondition(format!(
                "s = {} must be a positive non-integer",
                fmt_rat(s)
            )));
        }
    }
    let shift0 = c * rat(*k0, 1);
    let m_lo = ceil_rat(&(s0 * (b_lo + &shift0)));
    let m_hi = floor_rat(&(s0 * (b_hi + &shift0)));
    if &m_hi - &m_lo > int(10_000_000) {
        return Err(ReconError::Precondition("search box too large".into()));
    }
    let max_den = int(max_den);
    let mut out = Vec::new();
    let mut m = m_lo;
    while m <= m_hi {
        let b = rat_int(&m) / s0 - &shift0;
        if b.denom() <= &max_den
            && eqs[1..]
                .iter()
                .all(|(s, k)| is_integer(&(s * (&b + c * rat(*k, 1)))))
        {
            out.push(b);
        }
        m += 1u32;
    }
    if out.is_empty() {
        return Err(ReconError::EmptyCandidates);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateScore {
    #[serde(with = "exactmath::serde_rat")]
    pub b: Rat,
    /// Number of usable windows whose discontinuities all lie on this
    /// candidate's hyperplane.
    pub score: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    Facet {
        #[serde(with = "exactmath::serde_rat")]
        b: Rat,
        #[serde(with = "exactmath::serde_rat")]
        rvol: Rat,
    },
    NonFacet {
        #[serde(with = "exactmath::serde_rat")]
        support: Rat,
    },
    Unresolved,
}

impl Verdict {
    pub fn b(&self) -> Option<&Rat> {
        match self {
            Verdict::Facet { b, .. } => Some(b),
            Verdict::NonFacet { support } => Some(support),
            Verdict::Unresolved => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndexReport {
    #[serde(with = "exactmath::serde_int_vec")]
    pub normal: IVec,
    pub verdict: Verdict,
    pub plan: Option<WindowPlan>,
    pub observations: Vec<WindowObservation>,
    /// Best few candidates, best first.
    pub candidates: Vec<CandidateScore>,
    /// `max V_k / k^{d-1}` over usable late windows.
    pub facet_statistic: Option<exactmath::RatStr>,
    pub rvol_estimate: Option<exactmath::RatStr>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum Verification {
    Passed {
        windows: usize,
    },
    Failed {
        #[serde(with = "exactmath::serde_int_vec")]
        w: IVec,
        #[serde(with = "exactmath::serde_rat")]
        lo: Rat,
        #[serde(with = "exactmath::serde_rat")]
        hi: Rat,
        #[serde(with = "exactmath::serde_rat")]
        first_difference: Rat,
    },
    /// The recovered data did not even form a polytope.
    NoCandidate {
        reason: String,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconstructionReport {
    /// In the caller's order.
    pub entries: Vec<IndexReport>,
    pub verification: Verification,
    pub rounds: usize,
    pub polytope: Option<HPolytope>,
    pub queries: u64,
    #[serde(with = "exactmath::serde_rat")]
    pub total_window_length: Rat,
}

impl ReconstructionReport {
    pub fn passed(&self) -> bool {
        matches!(self.verification, Verification::Passed { .. })
    }

    /// Recovered right-hand sides in the caller's order.
    pub fn b_vector(&self) -> Option<Vec<Rat>> {
        self.entries.iter().map(|e| e.verdict.b().cloned()).collect()
    }
}

fn median(ks: &[i64]) -> i64 {
    let mut v = ks.to_vec();
    v.sort();
    v[v.len() / 2]
}

fn consistent(obs: &WindowObservation, b: &Rat, h: &Rat) -> bool {
    let t = b + h * rat(obs.k, 1);
    if !t.is_positive() {
        return obs.discontinuities.is_empty();
    }
    obs.discontinuities.iter().all(|x| is_integer(&(&x.s * &t)))
}

fn usable(obs: &WindowObservation) -> bool {
    obs.classification != Classification::Bad
}

/// Per-window estimate of the facet's relative volume.
fn window_rvol(obs: &WindowObservation, d: usize) -> Rat {
    let kd = num_traits::pow(rat(obs.k, 1), d - 1);
    let v = rat(obs.vk, 1) / kd;
    match obs.classification {
        Classification::NotSoGood => v / rat(2, 1),
        _ => v,
    }
}

struct Round<'a> {
    oracle: &'a dyn EhrhartOracle,
    config: &'a ReconConfig,
    schedule: Vec<i64>,
    bound: Rat,
    cap: Rat,
}

struct Resolved {
    facet: Option<(Rat, Rat)>,
    /// Well-supported candidate of an index whose statistic stayed below
    /// theta, with its rvol estimate. Later indices mask it like a facet;
    /// assembly tries it as one when verification fails.
    fallback: Option<(Rat, Rat)>,
    observations: Vec<WindowObservation>,
    candidates: Vec<CandidateScore>,
    statistic: Option<Rat>,
}

impl Round<'_> {
    fn resolve(
        &self,
        plan: &WindowPlan,
        cleaner: &CleaningState,
    ) -> Result<Resolved, ReconError> {
        let d = self.oracle.dim();
        let mut observations = Vec::new();
        for &k in &self.schedule {
            let obs = scan(
                self.oracle,
                plan,
                k,
                cleaner,
                &self.config.ratio_band,
                Some(&self.cap),
            );
            observations.push(match obs {
                Err(ReconError::Oracle(e @ EhrhartError::WindowTooLarge { .. })) => {
                    let (lo, hi) = plan.window(k);
                    WindowObservation {
                        k,
                        lo,
                        hi,
                        discontinuities: vec![],
                        classification: Classification::Bad,
                        vk: 0,
                        masked: 0,
                        skipped: Some(e.to_string()),
                    }
                }
                other => other?,
            });
        }
        let h = &plan.h;
        let mut cands: BTreeSet<Rat> = BTreeSet::new();
        for obs in observations.iter().filter(|o| usable(o)) {
            match obs.classification {
                Classification::Good => {
                    let s = obs.discontinuities[0].s.clone();
                    let found = pseudo_diophantine_solve(
                        &[(s, obs.k)],
                        h,
                        (&-self.bound.clone(), &self.bound, self.config.max_den),
                    );
                    match found {
                        Ok(v) => cands.extend(v),
                        Err(ReconError::EmptyCandidates) => {}
                        Err(e) => return Err(e),
                    }
                }
                Classification::NotSoGood => {
                    let gap = &obs.discontinuities[1].s - &obs.discontinuities[0].s;
                    let b = Rat::one() / gap - h * rat(obs.k, 1);
                    if b.denom() <= &int(self.config.max_den) && b.abs() <= self.bound {
                        cands.insert(b);
                    }
                }
                Classification::Bad => {}
            }
        }
        let usable_obs: Vec<&WindowObservation> =
            observations.iter().filter(|o| usable(o)).collect();
        let mut scored: Vec<CandidateScore> = cands
            .into_iter()
            .map(|b| {
                let score = usable_obs.iter().filter(|o| consistent(o, &b, h)).count();
                CandidateScore { b, score }
            })
            .collect();
        scored.sort_by(|x, y| {
            y.score
                .cmp(&x.score)
                .then_with(|| x.b.denom().cmp(y.b.denom()))
                .then_with(|| x.b.abs().cmp(&y.b.abs()))
                .then_with(|| x.b.cmp(&y.b))
        });
        scored.truncate(5);

        let late = median(&self.schedule);
        let statistic = usable_obs
            .iter()
            .filter(|o| o.k >= late)
            .map(|o| {
                rat(o.vk, 1) / num_traits::pow(rat(o.k, 1), d - 1)
            })
            .max();
        let is_facet = statistic
            .as_ref()
            .is_some_and(|m| *m > self.config.theta)
            && scored.first().is_some_and(|c| c.score >= FALLBACK_SCORE);
        let with_gamma = |b: &Rat| {
            let gamma = usable_obs
                .iter()
                .filter(|o| consistent(o, b, h))
                .map(|o| window_rvol(o, d))
                .min()
                .unwrap_or_else(Rat::zero);
            (b.clone(), gamma)
        };
        let facet = is_facet.then(|| with_gamma(&scored[0].b));
        let fallback = scored
            .first()
            .filter(|c| facet.is_none() && c.score >= FALLBACK_SCORE)
            .map(|c| with_gamma(&c.b));
        Ok(Resolved {
            facet,
            fallback,
            observations,
            candidates: scored,
            statistic,
        })
    }
}

const FALLBACK_SCORE: usize = 3;

fn verification_windows(d: usize, count: usize, seed: u64) -> Vec<(IVec, Rat, Rat)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let w: IVec = (0..d).map(|_| int(rng.gen_range(-4..=4))).collect();
            let lo = rat(rng.gen_range(4..=32), 4);
            let len = rat(rng.gen_range(4..=8), 4);
            let hi = &lo + len;
            (w, lo, hi)
        })
        .collect()
}

/// Compares the oracle against the candidate's mirror on fresh windows.
pub fn verify(
    oracle: &dyn EhrhartOracle,
    candidate: &HPolytope,
    windows: usize,
    seed: u64,
) -> Result<Verification, ReconError> {
    let mirror = oracle.mirror(candidate)?;
    for (w, lo, hi) in verification_windows(oracle.dim(), windows, seed) {
        let f = oracle.query(&w, &lo, &hi)?;
        let g = mirror.query(&w, &lo, &hi)?;
        if f != g {
            let first_difference = f.first_difference(&g).unwrap_or_else(|| hi.clone());
            return Ok(Verification::Failed {
                w,
                lo,
                hi,
                first_difference,
            });
        }
    }
    Ok(Verification::Passed { windows })
}

fn check_normals(d: usize, normals: &[IVec]) -> Result<(), ReconError> {
    if normals.len() < d + 1 {
        return Err(ReconError::Precondition(format!(
            "{} normals cannot bound a polytope in dimension {d}",
            normals.len()
        )));
    }
    for (i, a) in normals.iter().enumerate() {
        if a.len() != d {
            return Err(ReconError::Precondition(format!("normal {i} has wrong length")));
        }
        if exactmath::gcd_vec(a) != BigInt::one() {
            return Err(ReconError::Precondition(format!("normal {i} is not primitive")));
        }
        if normals[..i].contains(a) {
            return Err(ReconError::Precondition(format!("normal {i} is repeated")));
        }
    }
    Ok(())
}

/// Recovers the right-hand sides of the oracle's hidden polytope for the
/// given normal directions.
pub fn recover(
    oracle: &dyn EhrhartOracle,
    normals: &[IVec],
    config: &ReconConfig,
) -> Result<ReconstructionReport, ReconError> {
    let d = oracle.dim();
    check_normals(d, normals)?;
    if config.schedule.is_empty() || config.schedule.iter().any(|&k| k < 2) {
        return Err(ReconError::Precondition("schedule needs scales k >= 2".into()));
    }
    let mut order: Vec<usize> = (0..normals.len()).collect();
    order.sort_by(|&i, &j| norm2(&normals[j]).cmp(&norm2(&normals[i])));
    let sorted: Vec<IVec> = order.iter().map(|&i| normals[i].clone()).collect();
    let plans: Vec<WindowPlan> = (0..sorted.len())
        .map(|p| choose_w0_avoiding(&sorted[p..], &sorted[..p], config.search_radius))
        .collect::<Result<_, _>>()?;

    let cap = rat(config.window_budget, 1);
    let mut schedule = config.schedule.clone();
    let mut last: Option<ReconstructionReport> = None;
    for round in 0..=config.extensions.len() {
        if round > 0 {
            schedule.extend(&config.extensions[round - 1]);
            schedule.sort();
            schedule.dedup();
        }
        let r = Round {
            oracle,
            config,
            schedule: schedule.clone(),
            bound: rat(config.b_bound, 1) * rat(1 << round.min(30), 1),
            cap: cap.clone(),
        };
        let mut cleaner = CleaningState::default();
        let mut resolved = Vec::with_capacity(sorted.len());
        for (p, plan) in plans.iter().enumerate() {
            let res = r.resolve(plan, &cleaner)?;
            if let Some((b, gamma)) = res.facet.as_ref().or(res.fallback.as_ref()) {
                cleaner.push(sorted[p].clone(), b.clone(), gamma.clone());
            }
            resolved.push(res);
        }

        let seed = config.seed.wrapping_add(round as u64);
        let base: Vec<Option<Rat>> = resolved
            .iter()
            .map(|r| r.facet.as_ref().map(|(b, _)| b.clone()))
            .collect();
        let promotable: Vec<usize> = (0..resolved.len())
            .filter(|&i| resolved[i].fallback.is_some())
            .collect();
        let mut attempts = vec![base.clone()];
        if !promotable.is_empty() {
            let promote = |set: &[usize]| {
                let mut a = base.clone();
                for &i in set {
                    a[i] = resolved[i].fallback.as_ref().map(|(b, _)| b.clone());
                }
                a
            };
            attempts.push(promote(&promotable));
            if promotable.len() > 1 {
                attempts.extend(promotable.iter().map(|&i| promote(&[i])));
            }
        }
        let mut outcome = None;
        for facets in &attempts {
            let (verdicts, polytope, verification) = match assemble(d, &sorted, facets) {
                Ok((q, verdicts)) => {
                    let v = verify(oracle, &q, config.verify_windows, seed)?;
                    (verdicts, Some(q), v)
                }
                Err(reason) => (
                    vec![Verdict::Unresolved; sorted.len()],
                    None,
                    Verification::NoCandidate { reason },
                ),
            };
            let done = matches!(verification, Verification::Passed { .. });
            if outcome.is_none() || done {
                outcome = Some((verdicts, polytope, verification));
            }
            if done {
                break;
            }
        }
        let (verdicts, polytope, verification) = outcome.expect("at least one attempt");
        let passed = matches!(verification, Verification::Passed { .. });
        let mut entries: Vec<Option<IndexReport>> = vec![None; normals.len()];
        for (p, res) in resolved.into_iter().enumerate() {
            entries[order[p]] = Some(IndexReport {
                normal: sorted[p].clone(),
                verdict: if passed {
                    verdicts[p].clone()
                } else {
                    Verdict::Unresolved
                },
                plan: Some(plans[p].clone()),
                observations: res.observations,
                candidates: res.candidates,
                facet_statistic: res.statistic.map(exactmath::RatStr),
                rvol_estimate: res.facet.map(|(_, g)| exactmath::RatStr(g)),
            });
        }
        let stats = oracle.stats();
        let report = ReconstructionReport {
            entries: entries.into_iter().map(|e| e.expect("every index")).collect(),
            verification,
            rounds: round + 1,
            polytope,
            queries: stats.calls,
            total_window_length: stats.total_length,
        };
        if passed {
            return Ok(report);
        }
        last = Some(report);
    }
    Ok(last.expect("at least one round"))
}

/// Builds the candidate polytope from the facet decisions and reads the final
/// verdicts off it.
fn assemble(
    d: usize,
    sorted: &[IVec],
    facets: &[Option<Rat>],
) -> Result<(HPolytope, Vec<Verdict>), String> {
    let chosen = facets;
    let facets: Vec<(IVec, Rat)> = sorted
        .iter()
        .zip(chosen)
        .filter_map(|(a, b)| b.as_ref().map(|b| (a.clone(), b.clone())))
        .collect();
    let core = HPolytope::new(d, facets).map_err(|e| e.to_string())?;
    if !core.is_full_dimensional() {
        return Err("recovered facets bound a flat polytope".into());
    }
    let full: Vec<(IVec, Rat)> = sorted
        .iter()
        .zip(chosen)
        .map(|(a, b)| match b {
            Some(b) => (a.clone(), b.clone()),
            None => (a.clone(), core.support(a)),
        })
        .collect();
    let q = HPolytope::new(d, full).map_err(|e| e.to_string())?;
    let verdicts = q
        .faces_report()
        .iter()
        .map(|f| {
            let b = q.ineqs()[f.index].b.clone();
            if f.is_facet(d) {
                let rvol = q.face(f.index).map(|x| x.rvol()).unwrap_or_else(|_| Rat::zero());
                Verdict::Facet { b, rvol }
            } else {
                // a row resolved as a facet can still turn out slack here
                Verdict::NonFacet {
                    support: q.support(&q.ineqs()[f.index].a),
                }
            }
        })
        .collect();
    Ok((q, verdicts))
}

/// Minimal period and one period of `k -> gcd(zeta k + gamma, xi k + eta)`,
/// starting at `k = 1`.
pub fn gcd_sequence_period(
    zeta: i64,
    gamma: i64,
    xi: i64,
    eta: i64,
) -> Result<(u64, Vec<i64>), ReconError> {
    let (z, g, x, e) = (zeta as i128, gamma as i128, xi as i128, eta as i128);
    let det = z * e - g * x;
    if det == 0 {
        return Err(ReconError::LinearlyDependent);
    }
    // every term divides det, and shifting k by det / gcd(zeta, xi) moves
    // both arguments by multiples of det
    let bound = (det.abs() / z.gcd(&x)) as u64;
    let term = |k: i128| (z * k + g).gcd(&(x * k + e)) as i64;
    let seq: Vec<i64> = (1..=bound as i128).map(term).collect();
    for p in 1..=bound {
        if bound % p != 0 {
            continue;
        }
        let p = p as usize;
        if (p..seq.len()).all(|i| seq[i] == seq[i - p]) {
            return Ok((p as u64, seq[..p].to_vec()));
        }
    }
    unreachable!("the bound itself is a period")
}

/// Smallest `k` in `1..=N^n` putting every `k b_i` strictly within `1/N` of
/// an integer (pigeonhole on `N^n + 1` multiples gives the strict bound).
pub fn dirichlet_simultaneous(b: &[Rat], n: u64) -> u64 {
    assert!(n >= 1, "N must be positive");
    let limit = (n as u128).saturating_pow(b.len() as u32).min(u64::MAX as u128) as u64;
    let tol = Rat::new(BigInt::one(), BigInt::from(n));
    (1..=limit.max(1))
        .find(|&k| {
            let k = rat_int(&BigInt::from(k));
            b.iter().all(|x| exactmath::dist_to_int(&(x * &k)) < tol)
        })
        .expect("Dirichlet's theorem guarantees a solution")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ehrhart::step_function;
    use crate::exactmath::ivec;
    use proptest::prelude::*;

    fn square() -> HPolytope {
        HPolytope::cube(&[rat(2, 3), rat(0, 1)], &[rat(1, 1), rat(1, 3)]).unwrap()
    }

    fn square_normals() -> Vec<IVec> {
        vec![ivec(&[1, 0]), ivec(&[0, 1]), ivec(&[-1, 0]), ivec(&[0, -1])]
    }

    fn plan_ok(normals: &[IVec], plan: &WindowPlan) -> bool {
        let a1 = &normals[0];
        let h = rat_int(&dot_int(a1, &plan.w0));
        normals.iter().all(|a| !dot_int(a, &plan.w0).is_zero())
            && h == rat_int(&norm2(a1)) * rat(plan.tau, 1)
            && h.is_positive()
            && Rat::one() / &h < plan.epsilon0
            && plan.epsilon0 < rat(2, 1) / &h
            && plan.k_schedule.iter().all(|&k| plan.alpha(k) > rat(k, 1))
    }

    #[test]
    fn square_plan() {
        let n = square_normals();
        let plan = choose_w0(&n, 8).unwrap();
        assert!(plan_ok(&n, &plan));
        // tau = 1, 2 fail: the products +-1, +-2 of (0, +-1) divide h
        assert_eq!(plan.tau, 3);
        assert_eq!(plan.w0[0], int(3));
        assert_eq!(plan.w0[1].abs(), int(2));
        assert_eq!(plan.epsilon_prime, rat(1, 2));
        assert_eq!(plan.epsilon, rat(1, 72));
        assert_eq!(plan.epsilon0, rat(11, 30));
        // alpha_k - k and eps_k shrink along the schedule
        let ks = &plan.k_schedule;
        for p in ks.windows(2) {
            assert!(plan.alpha(p[1]) - rat(p[1], 1) < plan.alpha(p[0]) - rat(p[0], 1));
            assert!(plan.eps_k(p[1]) < plan.eps_k(p[0]));
        }
    }

    #[test]
    fn opposite_pair_plan() {
        let n = vec![ivec(&[1, 0]), ivec(&[-1, 0])];
        let plan = choose_w0(&n, 8).unwrap();
        assert!(plan_ok(&n, &plan));
        assert!(!plan.w0[0].is_zero());
    }

    #[test]
    fn plan_matches_exhaustive_search() {
        // some w0 with |coords| <= 20 satisfies the two product conditions;
        // ours must satisfy the full list
        let n = square_normals();
        let a1 = &n[0];
        let exists = (-20..=20).any(|x| {
            (-20..=20).any(|y| {
                let w = ivec(&[x, y]);
                let h = dot_int(a1, &w);
                h.is_positive()
                    && n.iter().all(|a| !dot_int(a, &w).is_zero())
                    && n[1..].iter().all(|a| dot_int(a, &w) < h)
            })
        });
        assert!(exists);
        assert!(plan_ok(&n, &choose_w0(&n, 8).unwrap()));
    }

    #[test]
    fn unsorted_normals_rejected() {
        let n = vec![ivec(&[1, 0]), ivec(&[1, 1])];
        assert!(matches!(choose_w0(&n, 8), Err(ReconError::Precondition(_))));
    }

    #[test]
    fn staircase_values() {
        // d = 2: 0 + 1 + ... + floor(x)
        assert_eq!(staircase(&rat(7, 2), 2), int(6));
        assert_eq!(staircase(&rat(3, 1), 3), int(14));
        assert_eq!(staircase(&rat(5, 1), 6), int(1 + 32 + 243 + 1024 + 3125));
        assert_eq!(staircase(&rat(2, 1), 1), int(3));
        assert_eq!(staircase(&rat(-1, 2), 2), int(0));
        assert_eq!(staircase(&rat(-1, 1), 2), int(0));
        assert_eq!(staircase(&rat(-3, 2), 2), int(-1));
    }

    #[test]
    fn clean_without_known_is_identity() {
        let f = step_function(&square(), &rat(7, 2)).unwrap();
        assert_eq!(clean(&f, &[], 2), f.to_rat());
    }

    #[test]
    fn clean_zero_gamma_is_noop() {
        let f = step_function(&square(), &rat(7, 2)).unwrap();
        let kf = KnownFacet {
            b: rat(1, 1),
            gamma: Rat::zero(),
            aw: rat(3, 1),
        };
        assert_eq!(clean(&f, &[kf], 2), f.to_rat());
    }

    #[test]
    fn clean_term_jumps_by_gamma_s_pow() {
        // staircase alone: left jump gamma * s^{d-1} at each s with s t in Z
        let f = QStepFunction::constant(rat(10, 1), rat(11, 1), 0);
        let kf = KnownFacet {
            b: rat(1, 3),
            gamma: rat(1, 2),
            aw: rat(2, 1),
        };
        for d in 1..=3 {
            let g = clean(&f, &[kf.clone()], d);
            let t = rat(7, 3);
            let jumps = g.left_jumps();
            assert!(!jumps.is_empty());
            for (s, j) in jumps {
                assert!(is_integer(&(&s * &t)));
                let expect = -(&kf.gamma) * num_traits::pow(s.clone(), d - 1);
                assert_eq!(j, expect);
            }
        }
    }

    #[test]
    fn cleaning_a_known_facet_shrinks_its_jumps() {
        // a big square, facet x <= b with rvol 2: after cleaning, the jumps
        // at its positions are O(1) instead of O(s)
        let p = HPolytope::cube(&[rat(0, 1), rat(0, 1)], &[rat(5, 2), rat(2, 1)]).unwrap();
        let w = ivec(&[3, 1]);
        let moved = p.translate_int(&w).unwrap();
        let f = step_function_window(&moved, &rat(20, 1), &rat(21, 1), 10_000_000).unwrap();
        let kf = KnownFacet {
            b: rat(5, 2),
            gamma: rat(2, 1),
            aw: rat(3, 1),
        };
        let g = clean(&f, &[kf], 2);
        let t = rat(11, 2);
        let raw: Vec<(Rat, i64)> = f.left_jumps();
        for (s, j) in &raw {
            if is_integer(&(s * &t)) {
                let cleaned: Rat = g
                    .left_jumps()
                    .into_iter()
                    .find(|(x, _)| x == s)
                    .map(|(_, v)| v)
                    .unwrap_or_else(Rat::zero);
                assert!(*j >= 40);
                assert!(cleaned.abs() <= rat(6, 1), "residual {} at {}", cleaned, s);
            }
        }
    }

    #[test]
    fn square_window_matches_hidden_truth() {
        let p = square();
        let n = square_normals();
        let oracle = HiddenOracle::new(p.clone());
        let plan = choose_w0(&n, 8).unwrap();
        for k in [12, 24, 48] {
            let obs =
                window_scan(&oracle, &plan, k, &CleaningState::default(), &rat(2, 1)).unwrap();
            assert!(matches!(obs.discontinuities.len(), 1 | 2));
            let t = rat(1, 1) + &plan.h * rat(k, 1);
            for x in &obs.discontinuities {
                assert!(is_integer(&(&x.s * &t)));
            }
        }
        // hand-checked window at k = 12
        let obs = window_scan(&oracle, &plan, 12, &CleaningState::default(), &rat(2, 1)).unwrap();
        assert_eq!(obs.classification, Classification::Good);
        // t = 37, the facet x = 445 meets y = 289..292 (or their negatives)
        assert_eq!(obs.discontinuities[0].s, rat(445, 37));
        assert_eq!(obs.vk, 4);
    }

    #[test]
    fn empty_window_is_bad() {
        assert_eq!(classify(&[], &rat(2, 1)), Classification::Bad);
        let d = |s, j| Discontinuity { s: rat(s, 7), left_jump: j };
        assert_eq!(classify(&[d(1, 3), d(2, 1)], &rat(2, 1)), Classification::Bad);
        assert_eq!(classify(&[d(1, 2), d(2, 3)], &rat(2, 1)), Classification::NotSoGood);
        assert_eq!(classify(&[d(1, 2)], &rat(2, 1)), Classification::Good);
    }

    #[test]
    fn pseudo_diophantine_collapses() {
        let c = rat(1, 1);
        let one = pseudo_diophantine_solve(&[(rat(21, 10), 3)], &c, (&rat(-2, 1), &rat(2, 1), 12))
            .unwrap();
        assert!(one.len() > 1);
        assert!(one.contains(&rat(1, 3)));
        // a second window at k = 6 with s (1/3 + 6) = 20
        let s2 = rat(60, 19);
        assert!(is_integer(&(&s2 * (rat(1, 3) + rat(6, 1)))));
        let two = pseudo_diophantine_solve(
            &[(rat(21, 10), 3), (s2, 6)],
            &c,
            (&rat(-2, 1), &rat(2, 1), 12),
        )
        .unwrap();
        assert_eq!(two, vec![rat(1, 3)]);
    }

    #[test]
    fn pseudo_diophantine_rejects_integer_s() {
        let r = pseudo_diophantine_solve(&[(rat(3, 1), 2)], &rat(1, 1), (&rat(-1, 1), &rat(1, 1), 8));
        assert!(matches!(r, Err(ReconError::Precondition(_))));
        let r = pseudo_diophantine_solve(&[], &rat(1, 1), (&rat(-1, 1), &rat(1, 1), 8));
        assert!(matches!(r, Err(ReconError::Precondition(_))));
    }

    #[test]
    fn recover_square() {
        let oracle = HiddenOracle::new(square());
        let rep = recover(&oracle, &square_normals(), &ReconConfig::default()).unwrap();
        assert!(rep.passed(), "{:?}", rep.verification);
        assert_eq!(
            rep.b_vector().unwrap(),
            vec![rat(1, 1), rat(1, 3), rat(-2, 3), rat(0, 1)]
        );
        for e in &rep.entries {
            assert_eq!(
                e.verdict,
                Verdict::Facet {
                    b: e.verdict.b().unwrap().clone(),
                    rvol: rat(1, 3)
                }
            );
        }
        assert!(rep.total_window_length <= rat(500, 1));
    }

    #[test]
    fn recover_redundant_direction() {
        let p = HPolytope::cube(&[rat(0, 1), rat(0, 1)], &[rat(1, 1), rat(1, 1)]).unwrap();
        let mut n = square_normals();
        n.push(ivec(&[1, 1]));
        let rep = recover(&HiddenOracle::new(p), &n, &ReconConfig::default()).unwrap();
        assert!(rep.passed(), "{:?}", rep.verification);
        assert_eq!(rep.entries[4].verdict, Verdict::NonFacet { support: rat(2, 1) });
    }

    #[test]
    fn recover_simplex_3d() {
        let p = HPolytope::new(
            3,
            vec![
                (ivec(&[1, 1, 1]), rat(5, 2)),
                (ivec(&[-1, 0, 0]), rat(0, 1)),
                (ivec(&[0, -1, 0]), rat(0, 1)),
                (ivec(&[0, 0, -1]), rat(0, 1)),
            ],
        )
        .unwrap();
        let n = p.normals();
        let rep = recover(&HiddenOracle::new(p), &n, &ReconConfig::default()).unwrap();
        assert!(rep.passed(), "{:?}", rep.verification);
        assert_eq!(
            rep.b_vector().unwrap(),
            vec![rat(5, 2), rat(0, 1), rat(0, 1), rat(0, 1)]
        );
    }

    #[test]
    fn short_schedule_is_unresolved() {
        let config = ReconConfig {
            schedule: vec![8],
            extensions: vec![],
            ..ReconConfig::default()
        };
        let rep = recover(&HiddenOracle::new(square()), &square_normals(), &config).unwrap();
        assert!(!rep.passed());
        assert!(rep.entries.iter().all(|e| e.verdict == Verdict::Unresolved));
    }

    #[test]
    fn gcd_examples() {
        assert_eq!(gcd_sequence_period(2, 1, 3, 2).unwrap(), (1, vec![1]));
        assert_eq!(gcd_sequence_period(1, 0, 1, 2).unwrap(), (2, vec![1, 2]));
        assert_eq!(gcd_sequence_period(0, 5, 1, 0).unwrap(), (5, vec![1, 1, 1, 1, 5]));
        assert!(matches!(
            gcd_sequence_period(2, 4, 1, 2),
            Err(ReconError::LinearlyDependent)
        ));
    }

    #[test]
    fn dirichlet_examples() {
        assert_eq!(dirichlet_simultaneous(&[rat(1, 3)], 3), 3);
        assert_eq!(dirichlet_simultaneous(&[rat(1, 2), rat(1, 3)], 6), 6);
        let b = [rat(2, 7), rat(3, 5)];
        let brute = (1..=16u64)
            .find(|&k| {
                b.iter().all(|x| {
                    let v = x * rat(k as i64, 1);
                    let f = &v - rat_int(&v.floor().to_integer());
                    f < rat(1, 4) || f > rat(3, 4)
                })
            })
            .unwrap();
        assert_eq!(dirichlet_simultaneous(&b, 4), brute);
    }

    proptest! {
        #[test]
        fn gcd_profile_matches_direct(
            z in -30i64..30, g in -30i64..30, x in -30i64..30, e in -30i64..30
        ) {
            prop_assume!(z * e - g * x != 0);
            let (p, prof) = gcd_sequence_period(z, g, x, e).unwrap();
            for k in 1..=(10 * p as i64) {
                let direct = num_integer::gcd(z * k + g, x * k + e);
                prop_assert_eq!(direct, prof[((k - 1) as u64 % p) as usize]);
            }
            // minimality
            for q in 1..p {
                let shifted = (1..=p as i64).all(|k| {
                    num_integer::gcd(z * k + g, x * k + e)
                        == num_integer::gcd(z * (k + q as i64) + g, x * (k + q as i64) + e)
                });
                prop_assert!(!shifted);
            }
        }

        #[test]
        fn true_b_always_survives(
            num in -48i64..48, den in 1i64..12, k1 in 2i64..40, k2 in 2i64..40,
            m1 in 1i64..5, m2 in 1i64..5
        ) {
            prop_assume!(k1 != k2);
            let b = rat(num, den);
            prop_assume!(b.abs() <= rat(4, 1) && (&b + rat(k1.min(k2), 1)).is_positive());
            let c = rat(1, 1);
            // s chosen so that s (b + k) is an integer just above k (b + k)
            let mk = |k: i64, m: i64| {
                let t = &b + rat(k, 1);
                let target = floor_rat(&(&t * rat(k, 1))) + m;
                rat_int(&target) / t
            };
            let (s1, s2) = (mk(k1, m1), mk(k2, m2));
            prop_assume!(!is_integer(&s1) && !is_integer(&s2) && s1.is_positive() && s2.is_positive());
            let sol = pseudo_diophantine_solve(
                &[(s1, k1), (s2, k2)], &c, (&rat(-4, 1), &rat(4, 1), 12)).unwrap();
            prop_assert!(sol.contains(&b));
        }
    }
}

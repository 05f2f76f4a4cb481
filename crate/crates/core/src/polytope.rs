//! Rational polytopes in H-representation.
//!
//! A polytope is `{x : <a_i, x> <= b_i}` with primitive integer normals and
//! rational right-hand sides. Validation normalizes the inequalities and
//! enumerates vertices once; everything else (volumes, faces, hulls) is
//! derived from that vertex list with exact arithmetic.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactmath::{
    self, dot_iq, gcd_vec, kernel_lattice, lcm_denoms, primitivize, rank_rat, rat_int,
    solve_exact, IMat, IVec, Int, QVec, Rat, Solution,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolytopeError {
    #[error("polytope is empty")]
    EmptyPolytope,
    #[error("polytope is unbounded")]
    UnboundedPolytope,
    #[error("inequality {0} has a zero normal")]
    ZeroNormal(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("polytope is not full-dimensional")]
    NotFullDimensional,
    #[error("polytope is not of codimension one (affine hull has dimension {0})")]
    NotCodimensionOne(usize),
    #[error("need dim >= 1 and at least one inequality")]
    NoInequalities,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ineq {
    #[serde(with = "exactmath::serde_int_vec")]
    pub a: IVec,
    #[serde(with = "exactmath::serde_rat")]
    pub b: Rat,
}

/// Unvalidated H-data, as read from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RawPolytope {
    pub dim: usize,
    pub ineqs: Vec<Ineq>,
}

#[derive(Clone, Debug)]
pub struct HPolytope {
    dim: usize,
    ineqs: Vec<Ineq>,
    vertices: Vec<QVec>,
    tight: Vec<Vec<usize>>,
}

impl PartialEq for HPolytope {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.ineqs == other.ineqs
    }
}

impl Eq for HPolytope {}

impl Serialize for HPolytope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_raw().serialize(s)
    }
}

impl<'de> Deserialize<'de> for HPolytope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawPolytope::deserialize(d)?;
        validate(raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FacetKind {
    Front,
    Back,
    Neutral,
}

impl FacetKind {
    pub fn of(b: &Rat) -> FacetKind {
        if b.is_positive() {
            FacetKind::Front
        } else if b.is_negative() {
            FacetKind::Back
        } else {
            FacetKind::Neutral
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facet {
    pub index: usize,
    pub kind: FacetKind,
    pub face_dim: i64,
}

impl Facet {
    pub fn is_facet(&self, d: usize) -> bool {
        self.face_dim == d as i64 - 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineHull {
    pub point: QVec,
    pub lattice_dirs: Vec<IVec>,
    pub hull_dim: usize,
    /// Normals of the implicit equalities, as found in the inequality list.
    pub equalities: Vec<IVec>,
    /// Unimodular matrix whose last `hull_dim` columns are `lattice_dirs`.
    pub transform: IMat,
}

/// Both routes to `vol ppyr(P)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PpyrVolumes {
    pub decomposition: Rat,
    pub hull: Rat,
}

/// Lattice coordinates adapted to a hyperplane `<a, x> = b`: `x = V y`
/// with `<a, x> = y_1`, `V` unimodular.
#[derive(Clone, Debug)]
pub struct HyperplaneFrame {
    pub a: IVec,
    pub b: Rat,
    pub v: IMat,
    pub v_inv: IMat,
}

/// A codimension-one polytope rewritten as a full-dimensional one in `d - 1`
/// coordinates; it sits at `y_1 = b` of its frame.
#[derive(Clone, Debug)]
pub struct Flattening {
    pub projected: HPolytope,
    pub frame: HyperplaneFrame,
}

/// Where a translate `P + w` lands after flattening.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMap {
    pub w_prime: IVec,
    /// `b + <a, w>`; the grid is `s * c` integral.
    pub c: Rat,
    /// `c = 0`: the hyperplane passes through the origin, every `s` is on the grid.
    pub degenerate: bool,
}

impl HyperplaneFrame {
    /// `a` must be primitive.
    pub fn new(a: IVec, b: Rat) -> HyperplaneFrame {
        let d = a.len();
        let (_, v, _) = kernel_lattice(&IMat::new(vec![a.clone()]), d);
        let v_inv = v.unimodular_inverse().expect("kernel transform is unimodular");
        debug_assert_eq!(v.transpose().mul_vec(&a)[0], BigInt::one());
        HyperplaneFrame { a, b, v, v_inv }
    }

    pub fn map_translation(&self, w: &[Int]) -> GridMap {
        let z = self.v_inv.mul_vec(w);
        let c = &self.b + rat_int(&z[0]);
        GridMap {
            w_prime: z[1..].to_vec(),
            degenerate: c.is_zero(),
            c,
        }
    }

    /// Translation of the original space that realizes `(z_1, w')`.
    pub fn lift_translation(&self, z1: &Int, w_prime: &[Int]) -> IVec {
        let mut z = vec![z1.clone()];
        z.extend_from_slice(w_prime);
        self.v.mul_vec(&z)
    }

    pub fn on_grid(map: &GridMap, s: &Rat) -> bool {
        map.degenerate || exactmath::is_integer(&(s * &map.c))
    }

    /// Rebuilds the polytope in the original coordinates from a polytope in
    /// the flattened ones (normally a reconstruction of `projected`).
    pub fn lift(&self, q: &HPolytope) -> Result<HPolytope, PolytopeError> {
        let d = self.a.len();
        let vinv_t = self.v_inv.transpose();
        let mut ineqs = vec![
            Ineq {
                a: self.a.clone(),
                b: self.b.clone(),
            },
            Ineq {
                a: self.a.iter().map(|x| -x).collect(),
                b: -self.b.clone(),
            },
        ];
        for ine in q.ineqs() {
            let mut full = vec![BigInt::zero()];
            full.extend_from_slice(&ine.a);
            debug_assert_eq!(full.len(), d);
            ineqs.push(Ineq {
                a: vinv_t.mul_vec(&full),
                b: ine.b.clone(),
            });
        }
        validate(RawPolytope { dim: d, ineqs })
    }
}

fn sub_q(a: &[Rat], b: &[Rat]) -> QVec {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Dimension of the affine hull of a set of points.
pub fn affine_dim(points: &[&QVec]) -> i64 {
    if points.is_empty() {
        return -1;
    }
    let base = points[0];
    let diffs: Vec<QVec> = points[1..].iter().map(|p| sub_q(p, base)).collect();
    if diffs.is_empty() {
        return 0;
    }
    rank_rat(&diffs) as i64
}

fn scale_to_int(v: &[Rat]) -> IVec {
    let l = lcm_denoms(v.iter());
    v.iter()
        .map(|x| (x * rat_int(&l)).to_integer())
        .collect()
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + n - k {
            return;
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All k-subsets of 0..n, lexicographic.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 {
        out.push(vec![]);
        return out;
    }
    combinations(n, k, |s| out.push(s.to_vec()));
    out
}

fn normalize_ineqs(dim: usize, raw: Vec<Ineq>) -> Result<Vec<Ineq>, PolytopeError> {
    let mut out: Vec<Ineq> = Vec::new();
    for (i, ine) in raw.into_iter().enumerate() {
        if ine.a.len() != dim {
            return Err(PolytopeError::DimensionMismatch {
                expected: dim,
                got: ine.a.len(),
            });
        }
        let (a, g) = primitivize(&ine.a).map_err(|_| PolytopeError::ZeroNormal(i))?;
        let b = ine.b / rat_int(&g);
        match out.iter_mut().find(|o| o.a == a) {
            Some(o) => {
                if b < o.b {
                    o.b = b;
                }
            }
            None => out.push(Ineq { a, b }),
        }
    }
    Ok(out)
}

fn is_bounded(dim: usize, ineqs: &[Ineq]) -> bool {
    let rows: Vec<QVec> = ineqs.iter().map(|i| exactmath::to_qvec(&i.a)).collect();
    if rank_rat(&rows) < dim {
        return false;
    }
    // pointed cone {x : Ax <= 0}: nonzero iff some extreme ray exists, and
    // every extreme ray is cut out by dim-1 independent tight rows
    let mut bounded = true;
    let sets = subsets(ineqs.len(), dim - 1);
    for s in sets {
        let m = IMat::new(s.iter().map(|&i| ineqs[i].a.clone()).collect());
        let (basis, _, rank) = if s.is_empty() {
            (vec![vec![BigInt::one()]], IMat::identity(1), 0)
        } else {
            kernel_lattice(&m, dim)
        };
        if rank + 1 != dim || basis.len() != 1 {
            continue;
        }
        let r = &basis[0];
        for sign in [1i64, -1] {
            let ok = ineqs
                .iter()
                .all(|i| (exactmath::dot_int(&i.a, r) * sign) <= BigInt::zero());
            if ok {
                bounded = false;
            }
        }
        if !bounded {
            break;
        }
    }
    bounded
}

fn enumerate_vertices(dim: usize, ineqs: &[Ineq]) -> (Vec<QVec>, Vec<Vec<usize>>) {
    let mut verts: BTreeSet<QVec> = BTreeSet::new();
    for s in subsets(ineqs.len(), dim) {
        let a: Vec<QVec> = s.iter().map(|&i| exactmath::to_qvec(&ineqs[i].a)).collect();
        let b: QVec = s.iter().map(|&i| ineqs[i].b.clone()).collect();
        if let Solution::Unique(x) = solve_exact(&a, &b) {
            if ineqs.iter().all(|i| dot_iq(&i.a, &x) <= i.b) {
                verts.insert(x);
            }
        }
    }
    let verts: Vec<QVec> = verts.into_iter().collect();
    let tight = verts
        .iter()
        .map(|v| {
            (0..ineqs.len())
                .filter(|&i| dot_iq(&ineqs[i].a, v) == ineqs[i].b)
                .collect()
        })
        .collect();
    (verts, tight)
}

/// The only constructor from external data: normalizes, rejects zero
/// normals, and proves boundedness and nonemptiness exactly.
pub fn validate(raw: RawPolytope) -> Result<HPolytope, PolytopeError> {
    if raw.dim == 0 || raw.ineqs.is_empty() {
        return Err(PolytopeError::NoInequalities);
    }
    let dim = raw.dim;
    let ineqs = normalize_ineqs(dim, raw.ineqs)?;
    if !is_bounded(dim, &ineqs) {
        return Err(PolytopeError::UnboundedPolytope);
    }
    let (vertices, tight) = enumerate_vertices(dim, &ineqs);
    if vertices.is_empty() {
        return Err(PolytopeError::EmptyPolytope);
    }
    Ok(HPolytope {
        dim,
        ineqs,
        vertices,
        tight,
    })
}

impl HPolytope {
    pub fn new(dim: usize, ineqs: Vec<(IVec, Rat)>) -> Result<HPolytope, PolytopeError> {
        validate(RawPolytope {
            dim,
            ineqs: ineqs.into_iter().map(|(a, b)| Ineq { a, b }).collect(),
        })
    }

    /// Convenience constructor from small integer data, `b` as `(num, den)`.
    pub fn from_i64(dim: usize, rows: &[(&[i64], (i64, i64))]) -> Result<HPolytope, PolytopeError> {
        HPolytope::new(
            dim,
            rows.iter()
                .map(|(a, (n, d))| (exactmath::ivec(a), exactmath::rat(*n, *d)))
                .collect(),
        )
    }

    /// Axis-parallel box `prod [lo_i, hi_i]`, inequalities ordered
    /// `x_1 <= hi_1, ..., x_d <= hi_d, -x_1 <= -lo_1, ...`.
    pub fn cube(lo: &[Rat], hi: &[Rat]) -> Result<HPolytope, PolytopeError> {
        let d = lo.len();
        let mut rows = Vec::new();
        for i in 0..d {
            let mut a = vec![BigInt::zero(); d];
            a[i] = BigInt::one();
            rows.push((a, hi[i].clone()));
        }
        for i in 0..d {
            let mut a = vec![BigInt::zero(); d];
            a[i] = -BigInt::one();
            rows.push((a, -lo[i].clone()));
        }
        HPolytope::new(d, rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ineqs(&self) -> &[Ineq] {
        &self.ineqs
    }

    pub fn normals(&self) -> Vec<IVec> {
        self.ineqs.iter().map(|i| i.a.clone()).collect()
    }

    pub fn rhs(&self) -> Vec<Rat> {
        self.ineqs.iter().map(|i| i.b.clone()).collect()
    }

    pub fn to_raw(&self) -> RawPolytope {
        RawPolytope {
            dim: self.dim,
            ineqs: self.ineqs.clone(),
        }
    }

    pub fn vertices(&self) -> &[QVec] {
        &self.vertices
    }

    /// Indices of the inequalities tight at each vertex.
    pub fn tight_sets(&self) -> &[Vec<usize>] {
        &self.tight
    }

    pub fn contains(&self, x: &[Rat]) -> bool {
        self.ineqs.iter().all(|i| dot_iq(&i.a, x) <= i.b)
    }

    pub fn contains_int(&self, x: &[Int]) -> bool {
        self.contains(&exactmath::to_qvec(x))
    }

    /// Same normals, `b_i + <a_i, v>`. Vertices shift by `v`.
    pub fn translate(&self, v: &[Rat]) -> Result<HPolytope, PolytopeError> {
        if v.len() != self.dim {
            return Err(PolytopeError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let ineqs = self
            .ineqs
            .iter()
            .map(|i| Ineq {
                a: i.a.clone(),
                b: &i.b + dot_iq(&i.a, v),
            })
            .collect();
        let vertices = self
            .vertices
            .iter()
            .map(|p| p.iter().zip(v).map(|(x, y)| x + y).collect())
            .collect();
        Ok(HPolytope {
            dim: self.dim,
            ineqs,
            vertices,
            tight: self.tight.clone(),
        })
    }

    pub fn translate_int(&self, w: &[Int]) -> Result<HPolytope, PolytopeError> {
        self.translate(&exactmath::to_qvec(w))
    }

    /// `sP` for `s > 0`.
    pub fn dilate(&self, s: &Rat) -> HPolytope {
        assert!(s.is_positive());
        HPolytope {
            dim: self.dim,
            ineqs: self
                .ineqs
                .iter()
                .map(|i| Ineq {
                    a: i.a.clone(),
                    b: &i.b * s,
                })
                .collect(),
            vertices: self
                .vertices
                .iter()
                .map(|p| p.iter().map(|x| x * s).collect())
                .collect(),
            tight: self.tight.clone(),
        }
    }

    pub fn affine_hull(&self) -> AffineHull {
        let eq_rows: Vec<IVec> = (0..self.ineqs.len())
            .filter(|&i| self.tight.iter().all(|t| t.contains(&i)))
            .map(|i| self.ineqs[i].a.clone())
            .collect();
        let m = IMat::new(eq_rows.clone());
        let (basis, v, rank) = kernel_lattice(&m, self.dim);
        let n = self.vertices.len();
        let mut point = vec![Rat::zero(); self.dim];
        for p in &self.vertices {
            for (acc, x) in point.iter_mut().zip(p) {
                *acc += x;
            }
        }
        let nq = Rat::from_integer(BigInt::from(n));
        for x in point.iter_mut() {
            *x /= &nq;
        }
        AffineHull {
            point,
            lattice_dirs: basis,
            hull_dim: self.dim - rank,
            equalities: eq_rows,
            transform: v,
        }
    }

    pub fn is_full_dimensional(&self) -> bool {
        let refs: Vec<&QVec> = self.vertices.iter().collect();
        affine_dim(&refs) == self.dim as i64
    }

    fn face_vertices(&self, i: usize) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| self.tight[v].contains(&i))
            .collect()
    }

    pub fn faces_report(&self) -> Vec<Facet> {
        (0..self.ineqs.len())
            .map(|i| {
                let vs = self.face_vertices(i);
                let pts: Vec<&QVec> = vs.iter().map(|&v| &self.vertices[v]).collect();
                Facet {
                    index: i,
                    kind: FacetKind::of(&self.ineqs[i].b),
                    face_dim: affine_dim(&pts),
                }
            })
            .collect()
    }

    /// The face `P ∩ {<a_i, x> = b_i}` as a polytope of its own.
    pub fn face(&self, i: usize) -> Result<HPolytope, PolytopeError> {
        let mut ineqs = self.ineqs.clone();
        ineqs.push(Ineq {
            a: self.ineqs[i].a.iter().map(|x| -x).collect(),
            b: -self.ineqs[i].b.clone(),
        });
        validate(RawPolytope {
            dim: self.dim,
            ineqs,
        })
    }

    /// Simplices (as vertex-index lists) of a fan triangulation of the face
    /// spanned by `ids`, which has dimension `k`.
    fn triangulate(&self, ids: &[usize], k: usize, out: &mut Vec<Vec<usize>>) {
        if k == 0 {
            out.push(vec![ids[0]]);
            return;
        }
        let apex = ids[0];
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        for i in 0..self.ineqs.len() {
            let sub: Vec<usize> = ids
                .iter()
                .copied()
                .filter(|&v| self.tight[v].contains(&i))
                .collect();
            if sub.is_empty() || sub.len() == ids.len() || sub.contains(&apex) {
                continue;
            }
            if !seen.insert(sub.clone()) {
                continue;
            }
            let pts: Vec<&QVec> = sub.iter().map(|&v| &self.vertices[v]).collect();
            if affine_dim(&pts) != k as i64 - 1 {
                continue;
            }
            let mut inner = Vec::new();
            self.triangulate(&sub, k - 1, &mut inner);
            for mut s in inner {
                s.insert(0, apex);
                out.push(s);
            }
        }
    }

    /// Exact d-volume; 0 unless full-dimensional.
    pub fn volume(&self) -> Rat {
        if !self.is_full_dimensional() {
            return Rat::zero();
        }
        let ids: Vec<usize> = (0..self.vertices.len()).collect();
        let mut simplices = Vec::new();
        self.triangulate(&ids, self.dim, &mut simplices);
        let mut fact = BigInt::one();
        for i in 2..=self.dim {
            fact *= BigInt::from(i);
        }
        let mut total = Rat::zero();
        for s in simplices {
            let v0 = &self.vertices[s[0]];
            let m: Vec<QVec> = s[1..]
                .iter()
                .map(|&v| sub_q(&self.vertices[v], v0))
                .collect();
            total += exactmath::det_exact(&m).abs();
        }
        total / rat_int(&fact)
    }

    /// The closed set `{λ >= 0 : x ∈ λP}` as `(lo, hi)` with `hi = None` for
    /// unbounded; `None` if empty.
    pub fn lambda_interval(&self, x: &[Rat]) -> Option<(Rat, Option<Rat>)> {
        let mut lo = Rat::zero();
        let mut hi: Option<Rat> = None;
        for ine in &self.ineqs {
            let dot = dot_iq(&ine.a, x);
            if ine.b.is_zero() {
                if dot.is_positive() {
                    return None;
                }
                continue;
            }
            let t = dot / &ine.b;
            if ine.b.is_positive() {
                if t > lo {
                    lo = t;
                }
            } else if hi.as_ref().map_or(true, |h| t < *h) {
                hi = Some(t);
            }
        }
        match &hi {
            Some(h) if *h < lo => None,
            _ => Some((lo, hi)),
        }
    }

    /// Membership of `x` in `s * ppyr(P)`, by intersecting the λ-interval
    /// with `[0, s]`.
    pub fn ppyr_membership(&self, x: &[Rat], s: &Rat) -> Result<bool, PolytopeError> {
        if x.len() != self.dim {
            return Err(PolytopeError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(match self.lambda_interval(x) {
            None => false,
            Some((lo, _)) => lo <= *s,
        })
    }

    pub fn rvol(&self) -> Rat {
        let hull = self.affine_hull();
        if hull.hull_dim == 0 {
            return Rat::one();
        }
        if hull.hull_dim == self.dim {
            return self.volume();
        }
        self.project_to_hull(&hull)
            .expect("projection of a valid polytope is valid")
            .volume()
    }

    /// Rewrites `P` in lattice coordinates of its affine hull.
    pub fn project_to_hull(&self, hull: &AffineHull) -> Result<HPolytope, PolytopeError> {
        let d = self.dim;
        let r = d - hull.hull_dim;
        let vt = hull.transform.transpose();
        let mut ineqs = Vec::new();
        for ine in &self.ineqs {
            let full = vt.mul_vec(&ine.a);
            let part: IVec = full[r..].to_vec();
            let rhs = &ine.b - dot_iq(&ine.a, &hull.point);
            if part.iter().all(|x| x.is_zero()) {
                debug_assert!(!rhs.is_negative());
                continue;
            }
            ineqs.push(Ineq { a: part, b: rhs });
        }
        validate(RawPolytope {
            dim: hull.hull_dim,
            ineqs,
        })
    }

    pub fn ppyr_volume(&self) -> Result<PpyrVolumes, PolytopeError> {
        if !self.is_full_dimensional() {
            return Err(PolytopeError::NotFullDimensional);
        }
        let d = Rat::from_integer(BigInt::from(self.dim));
        let mut dec = self.volume();
        for f in self.faces_report() {
            if f.kind == FacetKind::Back && f.is_facet(self.dim) {
                let face = self.face(f.index)?;
                dec += self.ineqs[f.index].b.abs() * face.rvol() / &d;
            }
        }
        let mut pts: Vec<QVec> = self.vertices.clone();
        pts.push(vec![Rat::zero(); self.dim]);
        let hull = hull_volume(&pts, self.dim);
        Ok(PpyrVolumes {
            decomposition: dec,
            hull,
        })
    }

    /// Volume of `conv(P ∪ {0})` by the hull route only; works for any
    /// dimension of `P`.
    pub fn ppyr_hull_volume(&self) -> Rat {
        let mut pts: Vec<QVec> = self.vertices.clone();
        pts.push(vec![Rat::zero(); self.dim]);
        hull_volume(&pts, self.dim)
    }

    pub fn flatten_codim1(&self) -> Result<Flattening, PolytopeError> {
        let hull = self.affine_hull();
        if hull.hull_dim + 1 != self.dim {
            return Err(PolytopeError::NotCodimensionOne(hull.hull_dim));
        }
        let mut a = primitivize(&hull.equalities[0]).expect("nonzero normal").0;
        let mut b = dot_iq(&a, &hull.point);
        let first_neg = a.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative());
        if b.is_negative() || (b.is_zero() && first_neg) {
            a = a.iter().map(|x| -x).collect();
            b = -b;
        }
        let frame = HyperplaneFrame::new(a, b.clone());
        let vt = frame.v.transpose();
        let mut ineqs = Vec::new();
        for ine in &self.ineqs {
            let full = vt.mul_vec(&ine.a);
            let part: IVec = full[1..].to_vec();
            let rhs = &ine.b - rat_int(&full[0]) * &b;
            if part.iter().all(|x| x.is_zero()) {
                continue;
            }
            ineqs.push(Ineq { a: part, b: rhs });
        }
        let projected = validate(RawPolytope {
            dim: self.dim - 1,
            ineqs,
        })?;
        Ok(Flattening { projected, frame })
    }

    /// Integer bounding box `[floor(min), ceil(max)]` per coordinate of the
    /// union of `lo*P` and `hi*P` (which contains every `sP`, `lo <= s <= hi`).
    pub fn window_box(&self, lo: &Rat, hi: &Rat) -> Vec<(Int, Int)> {
        (0..self.dim)
            .map(|j| {
                let mut mn: Option<Rat> = None;
                let mut mx: Option<Rat> = None;
                for v in &self.vertices {
                    for s in [lo, hi] {
                        let x = &v[j] * s;
                        if mn.as_ref().map_or(true, |m| x < *m) {
                            mn = Some(x.clone());
                        }
                        if mx.as_ref().map_or(true, |m| x > *m) {
                            mx = Some(x);
                        }
                    }
                }
                (
                    exactmath::floor_rat(&mn.unwrap()),
                    exactmath::ceil_rat(&mx.unwrap()),
                )
            })
            .collect()
    }

    /// Normals as machine integers, for the enumeration kernels.
    pub fn normals_i64(&self) -> Option<Vec<Vec<i64>>> {
        self.ineqs
            .iter()
            .map(|i| i.a.iter().map(|x| x.to_i64()).collect())
            .collect()
    }

    /// Support value `max_{x in P} <a, x>`.
    pub fn support(&self, a: &[Int]) -> Rat {
        self.vertices
            .iter()
            .map(|v| dot_iq(a, v))
            .max()
            .expect("nonempty")
    }
}

/// Volume of the convex hull of a point set, via its facet hyperplanes.
pub fn hull_volume(points: &[QVec], dim: usize) -> Rat {
    let refs: Vec<&QVec> = points.iter().collect();
    if affine_dim(&refs) < dim as i64 {
        return Rat::zero();
    }
    let mut found: BTreeSet<(IVec, Rat)> = BTreeSet::new();
    for s in subsets(points.len(), dim) {
        let base = &points[s[0]];
        let diffs: Vec<IVec> = s[1..]
            .iter()
            .map(|&i| scale_to_int(&sub_q(&points[i], base)))
            .collect();
        let normal = if dim == 1 {
            vec![BigInt::one()]
        } else {
            let (basis, _, rank) = kernel_lattice(&IMat::new(diffs), dim);
            if rank + 1 != dim {
                continue;
            }
            basis[0].clone()
        };
        let c = dot_iq(&normal, base);
        let vals: Vec<Rat> = points.iter().map(|p| dot_iq(&normal, p)).collect();
        let le = vals.iter().all(|v| *v <= c);
        let ge = vals.iter().all(|v| *v >= c);
        if le {
            found.insert((normal.clone(), c.clone()));
        }
        if ge {
            found.insert((normal.iter().map(|x| -x).collect(), -c));
        }
    }
    let ineqs = found
        .into_iter()
        .map(|(a, b)| {
            let g = gcd_vec(&a);
            Ineq {
                a: a.iter().map(|x| x / &g).collect(),
                b: b / rat_int(&g),
            }
        })
        .collect();
    validate(RawPolytope { dim, ineqs })
        .expect("hull of a full-dimensional point set is a valid polytope")
        .volume()
}

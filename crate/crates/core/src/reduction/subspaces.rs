//! Subspaces moved off themselves by a matrix: W ∩ AW = 0, optionally totally
//! singular and perpendicular to AW.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formspace::{scan_span, search_span, solve_conic, FormKind, FormedSpace, Subspace, SCAN_CAP};
use crate::gf::{Fe, Field};
use crate::matfq::{combine, is_zero_vec, unit_vec, vec_axpy, vec_scale, Mat, Vector};

/// dim(W + AW) = 2 dim W.
pub fn meets_image_trivially(a: &Mat, w: &Subspace) -> bool {
    let aw: Vec<Vector> = w.basis().iter().map(|v| a.apply(v)).collect();
    w.add_vectors(&aw).dim() == 2 * w.dim()
}

/// B(w, Aw') = 0 for all w, w' in W.
pub fn perp_to_image(space: &FormedSpace, a: &Mat, w: &Subspace) -> bool {
    let aw: Vec<Vector> = w.basis().iter().map(|v| a.apply(v)).collect();
    w.basis().iter().all(|x| aw.iter().all(|y| space.form(x, y).is_zero()))
}

/// No eigenvalue in F_q.
pub fn no_rational_eigenvalue(a: &Mat) -> bool {
    a.charpoly_factor().iter().all(|(g, _)| g.degree() > 1)
}

fn unit_basis(n: usize) -> Vec<Vector> {
    (0..n).map(|i| unit_vec(n, i)).collect()
}

/// v keeps {W, AW, v, Av} independent.
fn extends(s: &Subspace, a: &Mat, v: &Vector) -> bool {
    s.add_vectors(&[v.clone(), a.apply(v)]).dim() == s.dim() + 2
}

/// Greedy W with dim t and W ∩ AW = 0, for A whose F_q-eigenvalues are all 1.
pub fn find_w_linear(a: &Mat, t: usize) -> Result<Subspace> {
    let (f, n) = (a.field().clone(), a.n());
    if !a.only_unit_rational_eigenvalue() {
        return Err(Error::Precondition("A has an eigenvalue in F_q other than 1".into()));
    }
    if 2 * t > a.degree() {
        return Err(Error::Precondition(format!("t = {t} exceeds deg(A)/2 = {}", a.degree() / 2)));
    }
    let basis = unit_basis(n);
    let mut w: Vec<Vector> = Vec::new();
    let mut s = Subspace::zero(&f, n);
    for _ in 0..t {
        let v = scan_span(&f, n, &basis, SCAN_CAP, |v| extends(&s, a, v))
            .ok_or_else(|| Error::Internal("no vector extends W".into()))?;
        s = s.add_vectors(&[v.clone(), a.apply(&v)]);
        w.push(v);
    }
    Ok(Subspace::span(&f, n, &w))
}

/// Totally singular W with dim t and W ∩ AW = 0, for A with no eigenvalue in F_q.
pub fn find_w_singular(space: &FormedSpace, a: &Mat, t: usize) -> Result<Subspace> {
    let (f, n) = (space.field().clone(), space.n());
    if !space.has_form() {
        return Err(Error::NoForm);
    }
    if t == 0 {
        return Ok(Subspace::zero(&f, n));
    }
    if n < 3 {
        return Err(Error::Precondition("singular search needs n >= 3".into()));
    }
    if 6 * t > n {
        return Err(Error::Precondition(format!("t = {t} exceeds n/6 for n = {n}")));
    }
    if !no_rational_eigenvalue(a) {
        return Err(Error::Precondition("A has an eigenvalue in F_q".into()));
    }
    let w = grow_singular(space, a, t)?;
    if w.dim() < t {
        return Err(Error::Internal("no singular vector extends W".into()));
    }
    Ok(w)
}

/// Greedy totally singular W with W ∩ AW = 0, stopping at dim t or when stuck.
fn grow_singular(space: &FormedSpace, a: &Mat, t: usize) -> Result<Subspace> {
    let (f, n) = (space.field().clone(), space.n());
    let mut w: Vec<Vector> = Vec::new();
    let mut s = Subspace::zero(&f, n);
    while w.len() < t {
        let perp = space.perp_of(&w)?;
        let Some(v) = search_span(&f, n, perp.basis(), None, |v| space.is_singular(v) && extends(&s, a, v)) else {
            break;
        };
        s = s.add_vectors(&[v.clone(), a.apply(&v)]);
        w.push(v);
    }
    Ok(Subspace::span(&f, n, &w))
}

/// Nonzero v in `cur` with B(v, Av) = 0: three vectors with vanishing cross terms and a
/// conic (or a norm equation in the unitary case), then a direct scan when `cur` is too
/// small for the triple.
fn perp_vector(space: &FormedSpace, a: &Mat, ainv: &Mat, cur: &Subspace) -> Result<Option<Vector>> {
    let f = space.field();
    let n = space.n();
    let val = |v: &Vector| space.form(v, &a.apply(v));
    let mut picked: Vec<Vector> = Vec::new();
    let mut within = cur.clone();
    for _ in 0..3 {
        let Some(v) = within.basis().first().cloned() else { break };
        if val(&v).is_zero() {
            return Ok(Some(v));
        }
        within = within.intersect(&space.perp_of(&[a.apply(&v), ainv.apply(&v)])?);
        picked.push(v);
    }
    if picked.len() == 3 {
        let b: Vec<Fe> = picked.iter().map(val).collect();
        let coeffs = match space.kind() {
            FormKind::Unitary => norm_combination(f, &b)?,
            _ => {
                let (x, y, z) = solve_conic(f, b[0], b[1], b[2])?;
                vec![x, y, z]
            }
        };
        let v = combine(f, n, &coeffs, &picked);
        if is_zero_vec(&v) || !val(&v).is_zero() {
            return Err(Error::Internal("combination is not perpendicular to its image".into()));
        }
        return Ok(Some(v));
    }
    Ok(scan_span(f, n, cur.basis(), SCAN_CAP, |v| val(v).is_zero()))
}

/// x_i with Σ N(x_i) b_i = 0, not all zero: an E-linear relation among the b_i, E the
/// σ-fixed subfield, lifted through the norm.
fn norm_combination(f: &Field, b: &[Fe]) -> Result<Vec<Fe>> {
    let fixed: Vec<Fe> = f.elements().filter(|&x| f.is_fixed(x).unwrap_or(false)).collect();
    for &a1 in &fixed {
        for &a2 in &fixed {
            for &a3 in &fixed {
                let a = [a1, a2, a3];
                if a.iter().all(|x| x.is_zero()) {
                    continue;
                }
                let s = (0..3).fold(Fe::ZERO, |acc, i| f.add(acc, f.mul(a[i], b[i])));
                if !s.is_zero() {
                    continue;
                }
                let lift = |t: Fe| f.elements().find(|&x| f.norm(x).ok() == Some(t));
                return a
                    .iter()
                    .map(|&t| lift(t).ok_or_else(|| Error::Internal("norm is not onto the fixed field".into())))
                    .collect();
            }
        }
    }
    Err(Error::Internal("three elements of a 2-dimensional space are independent".into()))
}

/// W′ ⊆ W with W′ ⊥ AW′, for totally singular W and an isometry A.
pub fn find_w_perp_in(space: &FormedSpace, a: &Mat, w: &Subspace) -> Result<Subspace> {
    let (f, n) = (space.field().clone(), space.n());
    if !space.has_form() {
        return Err(Error::NoForm);
    }
    if !space.is_totally_singular(w) {
        return Err(Error::Precondition("W is not totally singular".into()));
    }
    if !space.is_isometry(a) {
        return Err(Error::Precondition("A is not an isometry".into()));
    }
    let ainv = a.inverse()?;
    let mut out: Vec<Vector> = Vec::new();
    let mut cur = w.clone();
    while cur.dim() > 0 {
        let Some(v) = perp_vector(space, a, &ainv, &cur)? else { break };
        let next = cur.intersect(&space.perp_of(&[a.apply(&v), ainv.apply(&v)])?);
        cur = drop_direction(&next, &v);
        out.push(v);
    }
    Ok(Subspace::span(&f, n, &out))
}

/// A hyperplane of `s` missing v, where v ∈ s.
fn drop_direction(s: &Subspace, v: &Vector) -> Subspace {
    let (f, n) = (s.field(), s.ambient_dim());
    let b = s.basis();
    for i in 0..b.len() {
        let rest: Vec<Vector> = b.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| x.clone()).collect();
        let sub = Subspace::span(f, n, &rest);
        if !sub.contains(v) {
            return sub;
        }
    }
    s.clone()
}

/// Basis vectors of `big` completing `small` (a subspace of it).
fn complement_within(big: &Subspace, small: &Subspace) -> Vec<Vector> {
    let mut acc = small.clone();
    let mut out = Vec::new();
    for v in big.basis() {
        if !acc.contains(v) {
            acc = acc.add_vectors(std::slice::from_ref(v));
            out.push(v.clone());
        }
    }
    out
}

/// Coordinates of y in an independent list.
fn coords(f: &Field, basis: &[Vector], y: &Vector) -> Result<Vec<Fe>> {
    let mut cols = basis.to_vec();
    cols.push(y.clone());
    let (r, pivots) = Mat::from_cols(f, &cols).rref();
    let m = basis.len();
    if pivots.len() != m || pivots.iter().enumerate().any(|(i, &p)| p != i) {
        return Err(Error::Internal("vector outside the span".into()));
    }
    Ok((0..m).map(|i| r.get(i, m)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadicalBranch {
    Large,
    Small,
}

#[derive(Clone, Debug)]
pub struct FormedW {
    pub w: Subspace,
    pub branch: RadicalBranch,
    /// dim V_r for V_r = V_A ∩ V_A^⊥
    pub radical_dim: usize,
    /// ⌈k/32 - 7/4⌉
    pub dim_bound: i64,
    /// the √Q correction was applied
    pub repaired: bool,
}

pub fn formed_dim_bound(k: usize) -> i64 {
    (k as f64 / 32.0 - 1.75).ceil() as i64
}

/// Totally singular W with W ∩ AW = 0 and W ⊥ AW, for an isometry A whose
/// eigenvalues are 1 or outside F_q. The radical V_r of the fixed space decides the
/// branch against a = k/4 + 1.
pub fn find_w_formed(space: &FormedSpace, a: &Mat) -> Result<FormedW> {
    let (f, n) = (space.field().clone(), space.n());
    if !space.has_form() {
        return Err(Error::NoForm);
    }
    if !space.is_isometry(a) {
        return Err(Error::Precondition("A is not an isometry".into()));
    }
    if !a.only_unit_rational_eigenvalue() {
        return Err(Error::Precondition("A has an eigenvalue in F_q other than 1".into()));
    }
    let k = a.degree();
    let id = Mat::identity(&f, n);
    let va = Subspace::span(&f, n, &a.sub(&id).kernel());
    let va_perp = space.orth_complement(&va)?;
    let vr = va.intersect(&va_perp);
    let split = k as f64 / 4.0 + 1.0;
    let char2_orth = space.kind() == FormKind::Orthogonal && f.p() == 2;
    let mut repaired = false;
    let (w, branch) = if vr.dim() as f64 >= split {
        let mut pairs: Vec<Vector> = Vec::new();
        let mut partners: Vec<Vector> = Vec::new();
        loop {
            let within = space.perp_of(&pairs)?;
            let vri = vr.intersect(&within);
            let Some(v) = scan_span(&f, n, vri.basis(), SCAN_CAP, |v| space.is_singular(v)) else { break };
            let w = space.hyperbolic_complete_within(&v, &within, None)?;
            pairs.push(v);
            pairs.push(w.clone());
            partners.push(w);
        }
        let wr = Subspace::span(&f, n, &partners);
        (find_w_perp_in(space, a, &wr)?, RadicalBranch::Large)
    } else {
        let c = complement_within(&va_perp, &vr);
        let m = c.len();
        let v0 = if char2_orth { vr.basis().iter().find(|v| !space.qvalue(v).is_zero()).cloned() } else { None };
        let wr: Vec<Vector> = if m / 6 == 0 {
            Vec::new()
        } else {
            let gram = Mat::from_fn(&f, m, m, |i, j| space.form(&c[i], &c[j]));
            let quotient = match (space.kind(), &v0) {
                (FormKind::Orthogonal, Some(_)) => FormedSpace::new(FormKind::Symplectic, &f, Some(gram), None)?,
                (FormKind::Orthogonal, None) => {
                    let u = Mat::from_fn(&f, m, m, |i, j| match i.cmp(&j) {
                        std::cmp::Ordering::Less => gram.get(i, j),
                        std::cmp::Ordering::Equal => space.qvalue(&c[i]),
                        std::cmp::Ordering::Greater => Fe::ZERO,
                    });
                    FormedSpace::new(FormKind::Orthogonal, &f, None, Some(u))?
                }
                (kind, _) => FormedSpace::new(kind, &f, Some(gram), None)?,
            };
            let full: Vec<Vector> = c.iter().chain(vr.basis()).cloned().collect();
            let mut cols = Vec::with_capacity(m);
            for ci in &c {
                let x = coords(&f, &full, &a.apply(ci))?;
                cols.push(x[..m].to_vec());
            }
            let a_quot = Mat::from_cols(&f, &cols);
            // A′ may keep eigenvalue 1 on V′ (longer unipotent blocks), so grow without the guard
            let wq = grow_singular(&quotient, &a_quot, m / 6).map_err(|e| e.at("quotient search"))?;
            wq.basis().iter().map(|x| combine(&f, n, x, &c)).collect()
        };
        let wr = match v0 {
            Some(v0) => {
                repaired = !wr.is_empty();
                let s = f.sqrt_char2(space.qvalue(&v0))?;
                let v0 = vec_scale(&f, &v0, f.inv(s));
                wr.iter().map(|v| vec_axpy(&f, v, f.sqrt_char2(space.qvalue(v)).unwrap(), &v0)).collect()
            }
            None => wr,
        };
        let wr = Subspace::span(&f, n, &wr);
        (find_w_perp_in(space, a, &wr)?, RadicalBranch::Small)
    };
    let out = FormedW { dim_bound: formed_dim_bound(k), radical_dim: vr.dim(), branch, repaired, w };
    if !space.is_totally_singular(&out.w) || !meets_image_trivially(a, &out.w) || !perp_to_image(space, a, &out.w) {
        return Err(Error::Internal(format!("{:?} branch produced a subspace violating its clauses", branch)));
    }
    if (out.w.dim() as i64) < out.dim_bound {
        return Err(Error::Internal(format!("dim W = {} below {}", out.w.dim(), out.dim_bound)));
    }
    Ok(out)
}

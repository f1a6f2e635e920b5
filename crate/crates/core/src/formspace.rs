//! Formed spaces (V, B, Q, σ): singularity, complements, Witt decompositions and
//! constructive extension of isometries.
//!
//! Conventions: B(v, w) = vᵀ G σ(w), linear in the first argument. For orthogonal
//! spaces Q is stored as an upper-triangular matrix U with Q(v) = Σ_{i≤j} U_ij v_i v_j and
//! G = U + Uᵀ. Unitary spaces live over F_{q²} with σ the q-power map.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gf::{Fe, Field, FieldDesc};
use crate::matfq::{combine, is_zero_vec, rank_of, unit_vec, vec_axpy, vec_scale, Mat, Vector};

// ---------------------------------------------------------------------------
// Subspaces

/// A subspace of F_q^n held as a reduced row echelon basis, so equality is structural.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Subspace {
    n: usize,
    field: Field,
    basis: Vec<Vector>,
}

impl Subspace {
    pub fn zero(field: &Field, n: usize) -> Subspace {
        Subspace { n, field: field.clone(), basis: Vec::new() }
    }

    pub fn full(field: &Field, n: usize) -> Subspace {
        Subspace { n, field: field.clone(), basis: (0..n).map(|i| unit_vec(n, i)).collect() }
    }

    pub fn span(field: &Field, n: usize, vs: &[Vector]) -> Subspace {
        if vs.is_empty() {
            return Subspace::zero(field, n);
        }
        let (r, piv) = Mat::from_rows(field, vs).rref();
        Subspace { n, field: field.clone(), basis: (0..piv.len()).map(|i| r.row(i).to_vec()).collect() }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }
    pub fn ambient_dim(&self) -> usize {
        self.n
    }
    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }
    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn basis_matrix(&self) -> Mat {
        if self.basis.is_empty() {
            return Mat::zeros(&self.field, 0, self.n);
        }
        Mat::from_rows(&self.field, &self.basis)
    }

    pub fn contains(&self, v: &[Fe]) -> bool {
        if is_zero_vec(v) {
            return true;
        }
        let mut rows = self.basis.clone();
        rows.push(v.to_vec());
        rank_of(&self.field, self.n, &rows) == self.dim()
    }

    pub fn contains_space(&self, o: &Subspace) -> bool {
        o.basis.iter().all(|v| self.contains(v))
    }

    pub fn sum(&self, o: &Subspace) -> Subspace {
        let mut vs = self.basis.clone();
        vs.extend(o.basis.iter().cloned());
        Subspace::span(&self.field, self.n, &vs)
    }

    pub fn add_vectors(&self, vs: &[Vector]) -> Subspace {
        let mut all = self.basis.clone();
        all.extend(vs.iter().cloned());
        Subspace::span(&self.field, self.n, &all)
    }

    /// {x : b·x = 0 for every basis vector b}, with the plain dot product.
    pub fn annihilator(&self) -> Subspace {
        if self.basis.is_empty() {
            return Subspace::full(&self.field, self.n);
        }
        Subspace::span(&self.field, self.n, &self.basis_matrix().kernel())
    }

    pub fn intersect(&self, o: &Subspace) -> Subspace {
        self.annihilator().sum(&o.annihilator()).annihilator()
    }

    /// Unit vectors extending the basis to one of the whole space.
    pub fn complement_basis(&self) -> Vec<Vector> {
        let pivots: Vec<usize> =
            self.basis.iter().map(|b| b.iter().position(|a| !a.is_zero()).unwrap()).collect();
        (0..self.n).filter(|i| !pivots.contains(i)).map(|i| unit_vec(self.n, i)).collect()
    }

    pub fn image(&self, a: &Mat) -> Subspace {
        let vs: Vec<Vector> = self.basis.iter().map(|b| a.apply(b)).collect();
        Subspace::span(&self.field, self.n, &vs)
    }

    pub fn random_vector(&self, rng: &mut impl Rng) -> Vector {
        let q = self.field.q();
        let c: Vec<Fe> = (0..self.dim()).map(|_| Fe(rng.gen_range(0..q) as u16)).collect();
        combine(&self.field, self.n, &c, &self.basis)
    }
}

/// Coefficient tuples of length k up to scaling: by increasing support size, supports
/// in lexicographic order, first nonzero coefficient 1, remaining coefficients by an
/// odometer over the nonzero elements.
pub struct ProjectiveScan {
    k: usize,
    q: u32,
    support: Vec<usize>,
    vals: Vec<u32>,
    done: bool,
}

impl ProjectiveScan {
    pub fn new(k: usize, q: u32) -> ProjectiveScan {
        ProjectiveScan { k, q, support: vec![0], vals: Vec::new(), done: k == 0 }
    }

    fn advance(&mut self) {
        for v in self.vals.iter_mut().rev() {
            if *v + 1 < self.q {
                *v += 1;
                return;
            }
            *v = 1;
        }
        let w = self.support.len();
        // next combination
        let mut i = w;
        while i > 0 {
            i -= 1;
            if self.support[i] < self.k - w + i {
                self.support[i] += 1;
                for j in i + 1..w {
                    self.support[j] = self.support[j - 1] + 1;
                }
                return;
            }
        }
        if w == self.k {
            self.done = true;
            return;
        }
        self.support = (0..=w).collect();
        self.vals = vec![1; w];
    }
}

impl Iterator for ProjectiveScan {
    type Item = Vec<Fe>;
    fn next(&mut self) -> Option<Vec<Fe>> {
        if self.done {
            return None;
        }
        let mut c = vec![Fe::ZERO; self.k];
        c[self.support[0]] = Fe::ONE;
        for (i, &pos) in self.support.iter().enumerate().skip(1) {
            c[pos] = Fe(self.vals[i - 1] as u16);
        }
        self.advance();
        Some(c)
    }
}

/// Default number of candidates a deterministic scan may try before giving up.
pub const SCAN_CAP: usize = 2_000_000;

/// First vector of span(basis), in scan order, satisfying `pred`.
pub fn scan_span(
    field: &Field,
    n: usize,
    basis: &[Vector],
    cap: usize,
    mut pred: impl FnMut(&Vector) -> bool,
) -> Option<Vector> {
    ProjectiveScan::new(basis.len(), field.q())
        .take(cap)
        .map(|c| combine(field, n, &c, basis))
        .find(|v| pred(v))
}

/// Random sampling first, then the deterministic scan.
pub fn search_span(
    field: &Field,
    n: usize,
    basis: &[Vector],
    rng: Option<&mut ChaCha8Rng>,
    mut pred: impl FnMut(&Vector) -> bool,
) -> Option<Vector> {
    if let Some(rng) = rng {
        let q = field.q();
        for _ in 0..(64 * q as usize).max(256) {
            let c: Vec<Fe> = (0..basis.len()).map(|_| Fe(rng.gen_range(0..q) as u16)).collect();
            let v = combine(field, n, &c, basis);
            if !is_zero_vec(&v) && pred(&v) {
                return Some(v);
            }
        }
    }
    scan_span(field, n, basis, SCAN_CAP, pred)
}

// ---------------------------------------------------------------------------
// Formed spaces

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKind {
    Linear,
    Symplectic,
    Orthogonal,
    Unitary,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormedSpace {
    kind: FormKind,
    n: usize,
    field: Field,
    gram: Option<Mat>,
    qform: Option<Mat>,
}

/// Gram matrix of the polar form of Q: U + Uᵀ.
pub fn polarize(qform: &Mat) -> Mat {
    qform.add(&qform.transpose())
}

/// Hyperbolic pairs, and a basis of the anisotropic remainder.
#[derive(Clone, Debug)]
pub struct WittDecomposition {
    pub pairs: Vec<(Vector, Vector)>,
    pub anisotropic: Vec<Vector>,
}

impl WittDecomposition {
    pub fn basis(&self) -> Vec<Vector> {
        let mut out: Vec<Vector> = Vec::new();
        for (v, w) in &self.pairs {
            out.push(v.clone());
            out.push(w.clone());
        }
        out.extend(self.anisotropic.iter().cloned());
        out
    }
}

/// Options for [`FormedSpace::extend_isometry`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ExtendOpts {
    /// Randomise the complement map with this seed; deterministic when absent.
    pub seed: Option<u64>,
    /// Force determinant 1 (SL, SU and the orthogonal groups' special subgroup).
    pub special: bool,
}

impl FormedSpace {
    pub fn linear(field: &Field, n: usize) -> FormedSpace {
        FormedSpace { kind: FormKind::Linear, n, field: field.clone(), gram: None, qform: None }
    }

    /// Basis e_1..e_m, f_1..f_m with B(e_i, f_i) = 1.
    pub fn symplectic(field: &Field, n: usize) -> Result<FormedSpace> {
        if !n.is_multiple_of(2) || n == 0 {
            return Err(Error::InvalidForm(format!("symplectic dimension {n} must be even and positive")));
        }
        let m = n / 2;
        let mut g = Mat::zeros(field, n, n);
        for i in 0..m {
            g.set(i, m + i, Fe::ONE);
            g.set(m + i, i, field.neg(Fe::ONE));
        }
        FormedSpace::new(FormKind::Symplectic, field, Some(g), None)
    }

    /// Split form Σ x_i x_{m+i}, plus x_n² when n is odd.
    pub fn orthogonal_split(field: &Field, n: usize) -> Result<FormedSpace> {
        if n == 0 {
            return Err(Error::InvalidForm("zero-dimensional space".into()));
        }
        let m = n / 2;
        let mut u = Mat::zeros(field, n, n);
        for i in 0..m {
            u.set(i, m + i, Fe::ONE);
        }
        if n % 2 == 1 {
            u.set(n - 1, n - 1, Fe::ONE);
        }
        FormedSpace::new(FormKind::Orthogonal, field, None, Some(u))
    }

    /// Hermitian form with B(e_i, e_{m+i}) = 1, plus B(e_n, e_n) = 1 when n is odd.
    /// `field` is F_{q²}.
    pub fn unitary(field: &Field, n: usize) -> Result<FormedSpace> {
        if n == 0 {
            return Err(Error::InvalidForm("zero-dimensional space".into()));
        }
        let m = n / 2;
        let mut g = Mat::zeros(field, n, n);
        for i in 0..m {
            g.set(i, m + i, Fe::ONE);
            g.set(m + i, i, Fe::ONE);
        }
        if n % 2 == 1 {
            g.set(n - 1, n - 1, Fe::ONE);
        }
        FormedSpace::new(FormKind::Unitary, field, Some(g), None)
    }

    pub fn new(kind: FormKind, field: &Field, gram: Option<Mat>, qform: Option<Mat>) -> Result<FormedSpace> {
        let n = match (&gram, &qform) {
            (Some(g), _) => g.rows(),
            (None, Some(u)) => u.rows(),
            (None, None) => return Err(Error::InvalidForm("missing form data".into())),
        };
        for m in gram.iter().chain(qform.iter()) {
            if m.rows() != n || m.cols() != n {
                return Err(Error::InvalidForm("form matrices must be n x n".into()));
            }
            if m.field() != field {
                return Err(Error::MixedFields);
            }
        }
        let f = field;
        let gram = match kind {
            FormKind::Linear => return Ok(FormedSpace::linear(field, n)),
            FormKind::Symplectic => {
                let g = gram.ok_or_else(|| Error::InvalidForm("symplectic space needs a gram matrix".into()))?;
                for i in 0..n {
                    if !g.get(i, i).is_zero() {
                        return Err(Error::InvalidForm("alternating gram needs a zero diagonal".into()));
                    }
                    for j in 0..n {
                        if g.get(j, i) != f.neg(g.get(i, j)) {
                            return Err(Error::InvalidForm("gram is not alternating".into()));
                        }
                    }
                }
                g
            }
            FormKind::Orthogonal => {
                let u = qform.as_ref().ok_or_else(|| Error::InvalidForm("orthogonal space needs qvals".into()))?;
                for i in 0..n {
                    for j in 0..i {
                        if !u.get(i, j).is_zero() {
                            return Err(Error::InvalidForm("qvals must be upper triangular".into()));
                        }
                    }
                }
                let g = polarize(u);
                if let Some(given) = &gram {
                    if *given != g {
                        return Err(Error::InvalidForm("gram is not the polarization of Q".into()));
                    }
                }
                g
            }
            FormKind::Unitary => {
                if !f.has_involution() {
                    return Err(Error::NoInvolution(f.e()));
                }
                let g = gram.ok_or_else(|| Error::InvalidForm("unitary space needs a gram matrix".into()))?;
                for i in 0..n {
                    for j in 0..n {
                        if g.get(j, i) != f.sigma_unchecked(g.get(i, j)) {
                            return Err(Error::InvalidForm("gram is not Hermitian".into()));
                        }
                    }
                }
                g
            }
        };
        let space = FormedSpace { kind, n, field: field.clone(), gram: Some(gram), qform: if kind == FormKind::Orthogonal { qform } else { None } };
        let rad = space.radical()?;
        match rad.dim() {
            0 => {}
            1 if kind == FormKind::Orthogonal && f.p() == 2 => {
                if space.qvalue(&rad.basis()[0]).is_zero() {
                    return Err(Error::InvalidForm("Q vanishes on the radical".into()));
                }
            }
            d => return Err(Error::InvalidForm(format!("degenerate form with radical of dimension {d}"))),
        }
        Ok(space)
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn field(&self) -> &Field {
        &self.field
    }
    pub fn gram(&self) -> Option<&Mat> {
        self.gram.as_ref()
    }
    pub fn qform(&self) -> Option<&Mat> {
        self.qform.as_ref()
    }
    pub fn has_form(&self) -> bool {
        self.kind != FormKind::Linear
    }

    #[inline]
    pub fn sigma(&self, a: Fe) -> Fe {
        if self.kind == FormKind::Unitary {
            self.field.sigma_unchecked(a)
        } else {
            a
        }
    }

    pub fn sigma_vec(&self, v: &[Fe]) -> Vector {
        v.iter().map(|&a| self.sigma(a)).collect()
    }

    /// B(v, w); zero for the linear kind.
    pub fn form(&self, v: &[Fe], w: &[Fe]) -> Fe {
        let Some(g) = &self.gram else { return Fe::ZERO };
        let f = &self.field;
        let sw = self.sigma_vec(w);
        let gw = g.apply(&sw);
        v.iter().zip(&gw).fold(Fe::ZERO, |acc, (&a, &b)| f.add(acc, f.mul(a, b)))
    }

    /// Q(v) for orthogonal spaces; B(v, v) otherwise.
    pub fn qvalue(&self, v: &[Fe]) -> Fe {
        let Some(u) = &self.qform else { return self.form(v, v) };
        let f = &self.field;
        let mut acc = Fe::ZERO;
        for i in 0..self.n {
            if v[i].is_zero() {
                continue;
            }
            for j in i..self.n {
                let c = u.get(i, j);
                if !c.is_zero() && !v[j].is_zero() {
                    acc = f.add(acc, f.mul(c, f.mul(v[i], v[j])));
                }
            }
        }
        acc
    }

    pub fn is_singular(&self, v: &[Fe]) -> bool {
        if !self.has_form() {
            return true;
        }
        self.form(v, v).is_zero() && self.qvalue(v).is_zero()
    }

    pub fn is_totally_singular_vecs(&self, vs: &[Vector]) -> bool {
        vs.iter().all(|v| self.is_singular(v)) && vs.iter().all(|v| vs.iter().all(|w| self.form(v, w).is_zero()))
    }

    pub fn is_totally_singular(&self, w: &Subspace) -> bool {
        self.is_totally_singular_vecs(w.basis())
    }

    /// W^⊥ for W spanned by `vs`.
    pub fn perp_of(&self, vs: &[Vector]) -> Result<Subspace> {
        let Some(g) = &self.gram else { return Err(Error::NoForm) };
        if vs.is_empty() {
            return Ok(Subspace::full(&self.field, self.n));
        }
        // v ⊥ w  iff  v · (G σ(w)) = 0
        let rows: Vec<Vector> = vs.iter().map(|w| g.apply(&self.sigma_vec(w))).collect();
        Ok(Subspace::span(&self.field, self.n, &rows).annihilator())
    }

    pub fn orth_complement(&self, w: &Subspace) -> Result<Subspace> {
        self.perp_of(w.basis())
    }

    pub fn radical(&self) -> Result<Subspace> {
        self.orth_complement(&Subspace::full(&self.field, self.n))
    }

    /// Partner w with B(v, w) = 1 and w singular.
    pub fn hyperbolic_complete(&self, v: &[Fe]) -> Result<Vector> {
        self.hyperbolic_complete_within(v, &Subspace::full(&self.field, self.n), None)
    }

    /// Partner for v taken from `within`; v must be singular and pair nontrivially with it.
    pub fn hyperbolic_complete_within(&self, v: &[Fe], within: &Subspace, rng: Option<&mut ChaCha8Rng>) -> Result<Vector> {
        if !self.has_form() {
            return Err(Error::NoForm);
        }
        if is_zero_vec(v) || !self.is_singular(v) {
            return Err(Error::Precondition("hyperbolic completion needs a nonzero singular vector".into()));
        }
        let f = &self.field;
        let mut wp = within
            .basis()
            .iter()
            .find(|u| !self.form(v, u).is_zero())
            .cloned()
            .ok_or(Error::RadicalVector)?;
        if let Some(rng) = rng {
            // add a random vector of v^⊥ ∩ within so partners vary
            let vp = self.perp_of(&[v.to_vec()])?.intersect(within);
            wp = vec_axpy(f, &wp, Fe::ONE, &vp.random_vector(rng));
        }
        let b = self.form(v, &wp);
        // B(v, c w') = σ(c) B(v, w')
        let c = self.sigma(f.inv(b));
        let wp = vec_scale(f, &wp, c);
        let w = match self.kind {
            FormKind::Symplectic => wp,
            FormKind::Orthogonal => vec_axpy(f, &wp, f.neg(self.qvalue(&wp)), v),
            FormKind::Unitary => {
                let target = self.form(&wp, &wp);
                let k = f
                    .elements()
                    .find(|&k| f.add(k, f.sigma_unchecked(k)) == target)
                    .ok_or_else(|| Error::Internal("trace map not onto the fixed field".into()))?;
                vec_axpy(f, &wp, f.neg(k), v)
            }
            FormKind::Linear => unreachable!(),
        };
        debug_assert!(self.form(v, &w) == Fe::ONE && self.is_singular(&w));
        Ok(w)
    }

    pub fn witt_decompose(&self) -> Result<WittDecomposition> {
        self.witt_decompose_within(&Subspace::full(&self.field, self.n), None)
    }

    /// Greedy decomposition of a subspace U with U ∩ U^⊥ inside the radical of V.
    pub fn witt_decompose_within(&self, u: &Subspace, mut rng: Option<&mut ChaCha8Rng>) -> Result<WittDecomposition> {
        if !self.has_form() {
            return Err(Error::NoForm);
        }
        let mut pairs = Vec::new();
        let mut cur = u.clone();
        loop {
            let basis = cur.basis().to_vec();
            let found = search_span(&self.field, self.n, &basis, rng.as_deref_mut(), |v| {
                self.is_singular(v) && basis.iter().any(|b| !self.form(v, b).is_zero())
            });
            let Some(v) = found else { break };
            let w = self.hyperbolic_complete_within(&v, &cur, rng.as_deref_mut())?;
            cur = cur.intersect(&self.perp_of(&[v.clone(), w.clone()])?);
            pairs.push((v, w));
        }
        Ok(WittDecomposition { pairs, anisotropic: cur.basis().to_vec() })
    }

    pub fn max_totally_singular(&self) -> Result<Subspace> {
        let wd = self.witt_decompose()?;
        let vs: Vec<Vector> = wd.pairs.into_iter().map(|p| p.0).collect();
        Ok(Subspace::span(&self.field, self.n, &vs))
    }

    pub fn is_isometry(&self, a: &Mat) -> bool {
        if a.rows() != self.n || a.cols() != self.n || a.field() != &self.field {
            return false;
        }
        match self.kind {
            FormKind::Linear => !a.det().is_zero(),
            _ => {
                let g = self.gram.as_ref().unwrap();
                let sa = a.map(|x| self.sigma(x));
                if a.transpose().mul(g).mul(&sa) != *g {
                    return false;
                }
                match &self.qform {
                    Some(u) => fold_upper(&a.transpose().mul(u).mul(a)) == *u,
                    None => true,
                }
            }
        }
    }

    /// An element g of the isometry group (SL_n for the linear kind) with g w_i = x_i.
    pub fn isometry_extend(&self, w: &[Vector], x: &[Vector]) -> Result<Mat> {
        self.extend_isometry(w, x, ExtendOpts { seed: None, special: self.kind == FormKind::Linear })
    }

    pub fn extend_isometry(&self, w: &[Vector], x: &[Vector], opts: ExtendOpts) -> Result<Mat> {
        let t = w.len();
        if x.len() != t {
            return Err(Error::Dimension("embedding needs one image per basis vector".into()));
        }
        if w.iter().chain(x).any(|v| v.len() != self.n) {
            return Err(Error::Dimension("vector length differs from the space dimension".into()));
        }
        let f = &self.field;
        if rank_of(f, self.n, w) != t {
            return Err(Error::Precondition("domain vectors are dependent".into()));
        }
        if rank_of(f, self.n, x) != t {
            return Err(Error::NotIsometric("images are dependent".into()));
        }
        let mut rng = opts.seed.map(ChaCha8Rng::seed_from_u64);
        if self.kind == FormKind::Linear {
            return self.extend_linear(w, x, rng.as_mut(), opts.special);
        }
        for i in 0..t {
            if self.qvalue(&w[i]) != self.qvalue(&x[i]) {
                return Err(Error::NotIsometric(format!("Q differs on basis vector {i}")));
            }
            for j in 0..t {
                if self.form(&w[i], &w[j]) != self.form(&x[i], &x[j]) {
                    return Err(Error::NotIsometric(format!("B differs on ({i}, {j})")));
                }
            }
        }
        let rad = self.radical()?;
        for side in [w, x] {
            if rad.dim() > 0 && rank_of(f, self.n, &[side, rad.basis()].concat()) != t + rad.dim() {
                return Err(Error::MeetsRadical);
            }
        }
        // coefficient vectors α with Σ α_i w_i in W^⊥
        let gram_w = Mat::from_fn(f, t.max(1), t.max(1), |i, j| if i < t && j < t { self.form(&w[i], &w[j]) } else { Fe::ZERO });
        let alphas: Vec<Vector> = if t == 0 { Vec::new() } else { gram_w.transpose().kernel() };
        let betas = Subspace::span(f, t, &alphas).complement_basis();
        let comb = |cs: &[Vector], vs: &[Vector]| -> Vec<Vector> { cs.iter().map(|c| combine(f, self.n, c, vs)).collect() };
        let (rs, ns) = (comb(&alphas, w), comb(&betas, w));
        let (rx, nx) = (comb(&alphas, x), comb(&betas, x));
        if self.kind == FormKind::Orthogonal && rs.iter().any(|r| !self.qvalue(r).is_zero()) {
            return Err(Error::Unsupported(
                "extension across a B-isotropic vector with nonzero Q in characteristic 2".into(),
            ));
        }
        let ps = self.dual_partners(&rs, &ns)?;
        let px = self.dual_partners(&rx, &nx)?;
        let cs = self.perp_of(&[w, &ps[..]].concat())?;
        let cx = self.perp_of(&[x, &px[..]].concat())?;
        let ws = self.witt_decompose_within(&cs, None)?;
        let wx = self.witt_decompose_within(&cx, rng.as_mut())?;
        if ws.pairs.len() != wx.pairs.len() || ws.anisotropic.len() != wx.anisotropic.len() {
            return Err(Error::Internal("complements have different Witt indices".into()));
        }
        let aniso_img = self
            .match_anisotropic(&ws.anisotropic, &wx.anisotropic, rng.as_mut())
            .ok_or_else(|| Error::Internal("anisotropic parts do not match".into()))?;
        let mut src: Vec<Vector> = [w, &ps[..]].concat();
        let mut dst: Vec<Vector> = [x, &px[..]].concat();
        src.extend(ws.basis());
        let mut img_pairs: Vec<(Vector, Vector)> = wx.pairs.clone();
        let mut aniso_img = aniso_img;
        // provisional images, then a determinant correction inside the complement
        let assemble = |pairs: &[(Vector, Vector)], an: &[Vector]| -> Vec<Vector> {
            let mut out = Vec::new();
            for (v, u) in pairs {
                out.push(v.clone());
                out.push(u.clone());
            }
            out.extend(an.iter().cloned());
            out
        };
        let s_mat = Mat::from_cols(f, &src);
        let s_inv = s_mat.inverse().map_err(|_| Error::Internal("source basis is singular".into()))?;
        let mut full_dst = dst.clone();
        full_dst.extend(assemble(&img_pairs, &aniso_img));
        let mut g = Mat::from_cols(f, &full_dst).mul(&s_inv);
        if opts.special && g.det() != Fe::ONE {
            let d = g.det();
            let fixed = self.correct_det(d, &mut img_pairs, &mut aniso_img);
            if !fixed {
                return Err(Error::Precondition("no room in the complement to correct the determinant".into()));
            }
            dst.extend(assemble(&img_pairs, &aniso_img));
            g = Mat::from_cols(f, &dst).mul(&s_inv);
        }
        if !self.is_isometry(&g) || (0..t).any(|i| g.apply(&w[i]) != x[i]) {
            return Err(Error::Internal("extension failed its own check".into()));
        }
        Ok(g)
    }

    /// Rescales complement images so the determinant d is multiplied by d^{-1}.
    fn correct_det(&self, d: Fe, pairs: &mut [(Vector, Vector)], aniso: &mut [Vector]) -> bool {
        let f = &self.field;
        let want = f.inv(d);
        match self.kind {
            FormKind::Unitary => {
                // (v, w) -> (λ v, σ(λ)^{-1} w) has determinant λ / σ(λ)
                if let Some((v, u)) = pairs.first_mut() {
                    if let Some(l) = f.nonzero().find(|&l| f.div(l, f.sigma_unchecked(l)) == want) {
                        *v = vec_scale(f, v, l);
                        *u = vec_scale(f, u, f.inv(f.sigma_unchecked(l)));
                        return true;
                    }
                }
                // a -> μ a with N(μ) = 1 on an anisotropic vector
                if let Some(a) = aniso.first_mut() {
                    if f.mul(want, f.sigma_unchecked(want)) == Fe::ONE {
                        *a = vec_scale(f, a, want);
                        return true;
                    }
                }
                false
            }
            FormKind::Orthogonal => {
                // det is ±1; swapping a pair or negating an anisotropic vector flips it
                if want != f.neg(Fe::ONE) {
                    return false;
                }
                if let Some((v, u)) = pairs.first_mut() {
                    std::mem::swap(v, u);
                    return true;
                }
                if let Some(a) = aniso.first_mut() {
                    *a = vec_scale(f, a, f.neg(Fe::ONE));
                    return true;
                }
                false
            }
            _ => false,
        }
    }

    fn extend_linear(&self, w: &[Vector], x: &[Vector], rng: Option<&mut ChaCha8Rng>, special: bool) -> Result<Mat> {
        let f = &self.field;
        let n = self.n;
        let t = w.len();
        let complete = |vs: &[Vector], rng: Option<&mut ChaCha8Rng>| -> Vec<Vector> {
            let mut out = vs.to_vec();
            match rng {
                Some(rng) => {
                    while out.len() < n {
                        let v: Vector = (0..n).map(|_| Fe(rng.gen_range(0..f.q()) as u16)).collect();
                        let mut trial = out.clone();
                        trial.push(v);
                        if rank_of(f, n, &trial) == trial.len() {
                            out = trial;
                        }
                    }
                }
                None => out.extend(Subspace::span(f, n, vs).complement_basis()),
            }
            out
        };
        let src = complete(w, None);
        let mut dst = complete(x, rng);
        let s = Mat::from_cols(f, &src);
        let ds = s.det();
        let dt = Mat::from_cols(f, &dst).det();
        if special && ds != dt {
            if t == n {
                return Err(Error::Precondition("determinant-1 extension of a full-rank embedding needs det match".into()));
            }
            let last = dst.last_mut().unwrap();
            *last = vec_scale(f, last, f.div(ds, dt));
        }
        let g = Mat::from_cols(f, &dst).mul(&s.inverse()?);
        debug_assert!((0..t).all(|i| g.apply(&w[i]) == x[i]));
        Ok(g)
    }

    /// Partners r'_a with B(r_a, r'_b) = δ_ab, r'_a singular, mutually orthogonal and
    /// orthogonal to the vectors `ns`.
    fn dual_partners(&self, rs: &[Vector], ns: &[Vector]) -> Result<Vec<Vector>> {
        let mut partners: Vec<Vector> = Vec::new();
        for a in 0..rs.len() {
            let mut cons: Vec<Vector> = ns.to_vec();
            cons.extend(rs.iter().enumerate().filter(|(b, _)| *b != a).map(|(_, r)| r.clone()));
            cons.extend(partners.iter().cloned());
            let amb = self.perp_of(&cons)?;
            partners.push(self.hyperbolic_complete_within(&rs[a], &amb, None)?);
        }
        Ok(partners)
    }

    /// Isometric images of `src` inside span(`tgt`) by backtracking.
    fn match_anisotropic(&self, src: &[Vector], tgt: &[Vector], rng: Option<&mut ChaCha8Rng>) -> Option<Vec<Vector>> {
        let f = &self.field;
        let k = tgt.len();
        let total = (f.q() as u64).checked_pow(k as u32)?;
        let mut cands: Vec<Vector> = (1..total)
            .map(|mut code| {
                let c: Vec<Fe> = (0..k)
                    .map(|_| {
                        let d = (code % f.q() as u64) as u16;
                        code /= f.q() as u64;
                        Fe(d)
                    })
                    .collect();
                combine(f, self.n, &c, tgt)
            })
            .collect();
        if let Some(rng) = rng {
            cands.shuffle(rng);
        }
        let mut out = Vec::new();
        if self.match_rec(src, &cands, &mut out) {
            Some(out)
        } else {
            None
        }
    }

    fn match_rec(&self, src: &[Vector], cands: &[Vector], out: &mut Vec<Vector>) -> bool {
        let i = out.len();
        if i == src.len() {
            return true;
        }
        for y in cands {
            if self.qvalue(y) != self.qvalue(&src[i]) || self.form(y, y) != self.form(&src[i], &src[i]) {
                continue;
            }
            if (0..i).any(|j| self.form(y, &out[j]) != self.form(&src[i], &src[j]) || self.form(&out[j], y) != self.form(&src[j], &src[i])) {
                continue;
            }
            let mut trial = out.clone();
            trial.push(y.clone());
            if rank_of(&self.field, self.n, &trial) != trial.len() {
                continue;
            }
            out.push(y.clone());
            if self.match_rec(src, cands, out) {
                return true;
            }
            out.pop();
        }
        false
    }

    /// A pseudo-random element of the isometry group (SL_n for the linear kind).
    pub fn random_isometry(&self, seed: u64, special: bool) -> Result<Mat> {
        if self.kind == FormKind::Linear {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = &self.field;
            loop {
                let m = Mat::from_fn(f, self.n, self.n, |_, _| Fe(rng.gen_range(0..f.q()) as u16));
                let d = m.det();
                if d.is_zero() {
                    continue;
                }
                if !special {
                    return Ok(m);
                }
                let mut m = m;
                let inv = f.inv(d);
                for i in 0..self.n {
                    let v = f.mul(m.get(i, 0), inv);
                    m.set(i, 0, v);
                }
                return Ok(m);
            }
        }
        self.extend_isometry(&[], &[], ExtendOpts { seed: Some(seed), special })
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "kind": self.kind,
            "n": self.n,
            "field": self.field.desc(),
        });
        if let Some(g) = &self.gram {
            v["gram"] = g.to_json();
        }
        if let Some(u) = &self.qform {
            v["qvals"] = u.to_json();
        }
        v
    }

    pub fn from_json(v: &Value) -> Result<FormedSpace> {
        let kind: FormKind = serde_json::from_value(v.get("kind").cloned().unwrap_or(Value::Null))?;
        let fd: FieldDesc = serde_json::from_value(v.get("field").cloned().unwrap_or(Value::Null))?;
        let field = Field::from_desc(&fd)?;
        let n = v.get("n").and_then(|x| x.as_u64()).ok_or_else(|| Error::Parse("form needs n".into()))? as usize;
        let gram = v.get("gram").map(|g| Mat::from_json(&field, g)).transpose()?;
        let qform = v.get("qvals").map(|g| Mat::from_json(&field, g)).transpose()?;
        if kind == FormKind::Linear {
            return Ok(FormedSpace::linear(&field, n));
        }
        let s = FormedSpace::new(kind, &field, gram, qform)?;
        if s.n != n {
            return Err(Error::Parse("form dimension disagrees with n".into()));
        }
        Ok(s)
    }
}

/// Folds a square matrix into the upper-triangular matrix of the same quadratic form.
pub fn fold_upper(m: &Mat) -> Mat {
    let f = m.field().clone();
    Mat::from_fn(&f, m.rows(), m.cols(), |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => f.add(m.get(i, j), m.get(j, i)),
        std::cmp::Ordering::Equal => m.get(i, i),
        std::cmp::Ordering::Greater => Fe::ZERO,
    })
}

/// Nontrivial (x, y, z) with a x² + b y² + c z² = 0 for nonzero a, b, c.
pub fn solve_conic(field: &Field, a: Fe, b: Fe, c: Fe) -> Result<(Fe, Fe, Fe)> {
    if a.is_zero() || b.is_zero() || c.is_zero() {
        return Err(Error::Precondition("conic coefficients must be nonzero".into()));
    }
    let f = field;
    if f.p() == 2 {
        // every element is a square: a x² = b y² with y = 1
        let x = f.sqrt_char2(f.div(b, a))?;
        return Ok((x, Fe::ONE, Fe::ZERO));
    }
    // a x² + c lies in -bS for some x, by counting square classes
    for x in f.elements() {
        let t = f.neg(f.div(f.add(f.mul(a, f.mul(x, x)), c), b));
        if let Some(y) = f.sqrt(t) {
            return Ok((x, y, Fe::ONE));
        }
    }
    Err(Error::Internal("conic without a solution".into()))
}

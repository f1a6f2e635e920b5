//! Words for arbitrary elements of SL_n(p) and Sp_2m(p) in the standard generators.
//!
//! Root elements are built from the generators by conjugation with the cycle and by
//! commutators (balanced, so lengths stay polynomial in n), then a target matrix is
//! reduced to the identity by row operations that are themselves root elements.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::gf::{Fe, Field};
use crate::group::{standard_gens, Family, GenSet, GroupSpec};
use crate::matfq::Mat;
use crate::word::{Letter, WordProgram};

/// Root subgroups. `Sl(i, j)` is I + aE_ij; for Sp on e_0..e_{m-1}, f_0..f_{m-1}:
/// `X(i, j)`: e_j -> e_j + a e_i, f_i -> f_i - a f_j;
/// `Y(i, j)`: f_j -> f_j + a e_i, f_i -> f_i + a e_j (one term when i = j);
/// `Z(i, j)`: e_j -> e_j + a f_i, e_i -> e_i + a f_j (one term when i = j).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Root {
    Sl(usize, usize),
    X(usize, usize),
    Y(usize, usize),
    Z(usize, usize),
}

impl Root {
    fn canonical(self) -> Root {
        match self {
            Root::Y(i, j) if i > j => Root::Y(j, i),
            Root::Z(i, j) if i > j => Root::Z(j, i),
            r => r,
        }
    }

    /// (row, col, sign) terms of the nilpotent part.
    fn terms(self, m: usize) -> Vec<(usize, usize, bool)> {
        let (e, f) = (|i: usize| i, |i: usize| m + i);
        match self {
            Root::Sl(i, j) => vec![(i, j, false)],
            Root::X(i, j) => vec![(e(i), e(j), false), (f(j), f(i), true)],
            Root::Y(i, j) if i == j => vec![(e(i), f(i), false)],
            Root::Y(i, j) => vec![(e(i), f(j), false), (e(j), f(i), false)],
            Root::Z(i, j) if i == j => vec![(f(i), e(i), false)],
            Root::Z(i, j) => vec![(f(i), e(j), false), (f(j), e(i), false)],
        }
    }
}

pub struct WordSolver {
    family: Family,
    field: Field,
    n: usize,
    m: usize,
    gens: Vec<Mat>,
    prog: WordProgram,
    roots: HashMap<Root, (usize, Fe)>,
    cycle_pows: HashMap<usize, (usize, Mat)>,
    omegas: HashMap<usize, (usize, Mat)>,
    mats: HashMap<usize, Mat>,
}

const T: u32 = 0;

impl WordSolver {
    /// `gs` must start with the standard generators of `group`; F_q must be a prime field.
    pub fn new(group: &GroupSpec, gs: &GenSet) -> Result<WordSolver> {
        let f = group.field().clone();
        if f.e() != 1 {
            return Err(Error::Unsupported("constructive words over non-prime fields".into()));
        }
        if !matches!(group.family, Family::SL | Family::Sp) {
            return Err(Error::Unsupported(format!("constructive words for {:?}", group.family)));
        }
        let std = standard_gens(group)?;
        if gs.len() < std.len() || gs.gens()[..std.len()] != *std.gens() {
            return Err(Error::Unsupported("constructive words need the standard generators".into()));
        }
        let n = group.n;
        Ok(WordSolver {
            family: group.family,
            field: f,
            n,
            m: if group.family == Family::Sp { n / 2 } else { n },
            gens: gs.gens().to_vec(),
            prog: WordProgram::new(&gs.id),
            roots: HashMap::new(),
            cycle_pows: HashMap::new(),
            omegas: HashMap::new(),
            mats: HashMap::new(),
        })
    }

    pub fn program(&self) -> &WordProgram {
        &self.prog
    }
    pub fn program_mut(&mut self) -> &mut WordProgram {
        &mut self.prog
    }
    pub fn into_program(self) -> WordProgram {
        self.prog
    }

    pub fn root_matrix(&self, r: Root, a: Fe) -> Mat {
        let f = &self.field;
        let mut mat = Mat::identity(f, self.n);
        let half = if self.family == Family::Sp { self.m } else { 0 };
        for (i, j, neg) in r.terms(half) {
            mat.set(i, j, if neg { f.neg(a) } else { a });
        }
        mat
    }

    /// Left multiplication by the root element, as row operations.
    pub fn apply_root_left(&self, h: &mut Mat, r: Root, a: Fe) {
        let f = &self.field;
        let half = if self.family == Family::Sp { self.m } else { 0 };
        for (i, j, neg) in r.canonical().terms(half) {
            let c = if neg { f.neg(a) } else { a };
            for col in 0..self.n {
                let v = f.add(h.get(i, col), f.mul(c, h.get(j, col)));
                h.set(i, col, v);
            }
        }
    }

    fn letter_node(&mut self, gen: u32) -> usize {
        let node = self.prog.letter(Letter::new(gen, false));
        self.mats.insert(node, self.gens[gen as usize].clone());
        node
    }

    fn cycle_letter(&self) -> u32 {
        match self.family {
            Family::SL => 1,
            _ => 3,
        }
    }

    fn cycle_pow(&mut self, k: usize) -> (usize, Mat) {
        if let Some(x) = self.cycle_pows.get(&k) {
            return x.clone();
        }
        let c = self.letter_node(self.cycle_letter());
        let node = self.prog.power(c, k as u128);
        let mat = self.gens[self.cycle_letter() as usize].pow(k as u128);
        self.cycle_pows.insert(k, (node, mat.clone()));
        (node, mat)
    }

    /// Reads the coefficient of `r` off `mat`, checking that it is exactly a root element.
    fn identify(&self, r: Root, mat: &Mat) -> Result<Fe> {
        let half = if self.family == Family::Sp { self.m } else { 0 };
        let (i, j, neg) = r.terms(half)[0];
        let raw = mat.get(i, j);
        let s = if neg { self.field.neg(raw) } else { raw };
        if s.is_zero() || *mat != self.root_matrix(r, s) {
            return Err(Error::Internal(format!("construction of {r:?} produced a non-root element")));
        }
        Ok(s)
    }

    fn record(&mut self, r: Root, node: usize, mat: &Mat) -> Result<(usize, Fe)> {
        let s = self.identify(r, mat)?;
        self.roots.insert(r, (node, s));
        Ok((node, s))
    }

    fn conjugated(&mut self, by: (usize, Mat), inner: usize) -> (usize, Mat) {
        let node = self.prog.conjugate(by.0, inner);
        let mat = by.1.mul(&self.mats[&inner]).mul(&by.1.inverse().expect("group element"));
        (node, mat)
    }

    /// A node evaluating to the root element r(s) for some nonzero s.
    fn unit_root(&mut self, r: Root) -> Result<(usize, Fe)> {
        let r = r.canonical();
        if let Some(&x) = self.roots.get(&r) {
            return Ok(x);
        }
        let modm = |x: isize, m: usize| x.rem_euclid(m as isize) as usize;
        let (node, mat) = match r {
            Root::Sl(i, j) | Root::X(i, j) => {
                if i == j {
                    return Err(Error::Precondition("diagonal root".into()));
                }
                let d = modm(j as isize - i as isize, self.m);
                let make = |i, j| if matches!(r, Root::Sl(..)) { Root::Sl(i, j) } else { Root::X(i, j) };
                if i != 0 {
                    let inner = self.root(make(0, d), Fe::ONE)?;
                    let cp = self.cycle_pow(i);
                    self.conjugated(cp, inner)
                } else if d == 1 {
                    let node = self.letter_node(if matches!(r, Root::Sl(..)) { T } else { 2 });
                    (node, self.mats[&node].clone())
                } else {
                    let k = d / 2;
                    let a = self.root(make(0, k), Fe::ONE)?;
                    let b = self.root(make(k, d), Fe::ONE)?;
                    let node = self.prog.commutator(a, b);
                    (node, Mat::commutator(&self.mats[&a], &self.mats[&b])?)
                }
            }
            Root::Y(i, j) if i == j => {
                if i == 0 {
                    let node = self.letter_node(T);
                    (node, self.mats[&node].clone())
                } else {
                    let inner = self.root(Root::Y(0, 0), Fe::ONE)?;
                    let cp = self.cycle_pow(i);
                    self.conjugated(cp, inner)
                }
            }
            Root::Y(i, j) => {
                let a = self.root(Root::X(i, j), Fe::ONE)?;
                let b = self.root(Root::Y(j, j), Fe::ONE)?;
                let comm = self.prog.commutator(a, b);
                let cm = Mat::commutator(&self.mats[&a], &self.mats[&b])?;
                let half = self.m;
                let extra = cm.get(i, half + i);
                let fix = self.root(Root::Y(i, i), self.field.neg(extra))?;
                let node = self.prog.concat(&[comm, fix]);
                (node, cm.mul(&self.mats[&fix]))
            }
            Root::Z(i, j) => {
                let inner = self.root(Root::Y(i, j), Fe::ONE)?;
                let mut by = self.omega(i);
                if i != j {
                    let oj = self.omega(j);
                    by = (self.prog.concat(&[by.0, oj.0]), by.1.mul(&oj.1));
                }
                self.conjugated(by, inner)
            }
        };
        self.mats.insert(node, mat.clone());
        self.record(r, node, &mat)
    }

    /// e_k -> -f_k, f_k -> e_k.
    fn omega(&mut self, k: usize) -> (usize, Mat) {
        if let Some(x) = self.omegas.get(&k) {
            return x.clone();
        }
        let w = self.letter_node(1);
        let out = if k == 0 {
            (w, self.gens[1].clone())
        } else {
            let cp = self.cycle_pow(k);
            self.conjugated(cp, w)
        };
        self.mats.insert(out.0, out.1.clone());
        self.omegas.insert(k, out.clone());
        out
    }

    /// A node for r(a); node 0 when a = 0.
    pub fn root(&mut self, r: Root, a: Fe) -> Result<usize> {
        if a.is_zero() {
            return Ok(self.prog.identity());
        }
        let (node, s) = self.unit_root(r)?;
        let f = &self.field;
        let k = f.div(a, s).value() as u128;
        if k == 1 {
            return Ok(node);
        }
        let out = self.prog.power(node, k);
        let mat = self.root_matrix(r.canonical(), a);
        self.mats.insert(out, mat);
        Ok(out)
    }

    /// Root elements whose product, read left to right, is `g`.
    pub fn factor(&self, g: &Mat) -> Result<Vec<(Root, Fe)>> {
        if g.n() != self.n || g.field() != &self.field {
            return Err(Error::Dimension("element does not match the group".into()));
        }
        let mut h = g.clone();
        let mut ops: Vec<(Root, Fe)> = Vec::new();
        let mut apply = |h: &mut Mat, r: Root, a: Fe, ops: &mut Vec<(Root, Fe)>| {
            if !a.is_zero() {
                self.apply_root_left(h, r, a);
                ops.push((r, a));
            }
        };
        match self.family {
            Family::SL => self.reduce_sl(&mut h, &mut ops, &mut apply)?,
            _ => self.reduce_sp(&mut h, &mut ops, &mut apply)?,
        }
        if !h.is_identity() {
            return Err(Error::Precondition("element is not in the group".into()));
        }
        let f = &self.field;
        Ok(ops.into_iter().map(|(r, a)| (r, f.neg(a))).collect())
    }

    fn reduce_sl(
        &self,
        h: &mut Mat,
        ops: &mut Vec<(Root, Fe)>,
        apply: &mut impl FnMut(&mut Mat, Root, Fe, &mut Vec<(Root, Fe)>),
    ) -> Result<()> {
        let f = &self.field;
        let n = self.n;
        for j in 0..n {
            if h.get(j, j).is_zero() {
                let i = (j + 1..n).find(|&i| !h.get(i, j).is_zero()).ok_or(Error::Singular)?;
                apply(h, Root::Sl(j, i), Fe::ONE, ops);
            }
            let piv = h.get(j, j);
            for i in 0..n {
                if i != j && !h.get(i, j).is_zero() {
                    let c = f.neg(f.div(h.get(i, j), piv));
                    apply(h, Root::Sl(i, j), c, ops);
                }
            }
        }
        // diagonal with product 1: push each entry onto its successor
        for i in 0..n.saturating_sub(1) {
            let d = h.get(i, i);
            if d == Fe::ONE {
                continue;
            }
            // w(-1) w(d) = diag(d^-1, d) on rows i, i+1
            let t = d;
            for (a, b) in [(t, f.neg(f.inv(t))), (f.neg(Fe::ONE), Fe::ONE)] {
                apply(h, Root::Sl(i, i + 1), a, ops);
                apply(h, Root::Sl(i + 1, i), b, ops);
                apply(h, Root::Sl(i, i + 1), a, ops);
            }
        }
        Ok(())
    }

    fn reduce_sp(
        &self,
        h: &mut Mat,
        ops: &mut Vec<(Root, Fe)>,
        apply: &mut impl FnMut(&mut Mat, Root, Fe, &mut Vec<(Root, Fe)>),
    ) -> Result<()> {
        let f = &self.field;
        let m = self.m;
        let (e, fi) = (|k: usize| k, |k: usize| m + k);
        for i in 0..m {
            // image of e_i: coordinates a_k on e_k, b_k on f_k, k >= i
            let col = |h: &Mat, r: usize| h.get(r, e(i));
            if (i..m).all(|k| col(h, e(k)).is_zero()) {
                let l = (i..m).find(|&k| !col(h, fi(k)).is_zero()).ok_or(Error::Singular)?;
                apply(h, Root::Y(l, l), Fe::ONE, ops);
            }
            if col(h, e(i)).is_zero() {
                let l = (i..m).find(|&k| !col(h, e(k)).is_zero()).unwrap();
                apply(h, Root::X(i, l), Fe::ONE, ops);
            }
            let ai = col(h, e(i));
            for k in i + 1..m {
                let ak = col(h, e(k));
                if !ak.is_zero() {
                    apply(h, Root::X(k, i), f.neg(f.div(ak, ai)), ops);
                }
            }
            let ai = col(h, e(i));
            if ai != Fe::ONE {
                let bi = col(h, fi(i));
                apply(h, Root::Z(i, i), f.div(f.sub(Fe::ONE, bi), ai), ops);
                apply(h, Root::Y(i, i), f.sub(Fe::ONE, ai), ops);
            }
            apply(h, Root::Z(i, i), f.neg(col(h, fi(i))), ops);
            for l in i + 1..m {
                apply(h, Root::Z(i, l), f.neg(col(h, fi(l))), ops);
            }
            // image of f_i, now paired with e_i
            let colf = |h: &Mat, r: usize| h.get(r, fi(i));
            for l in i + 1..m {
                apply(h, Root::X(i, l), colf(h, fi(l)), ops);
            }
            apply(h, Root::Y(i, i), f.neg(colf(h, e(i))), ops);
            for l in i + 1..m {
                apply(h, Root::Y(i, l), f.neg(colf(h, e(l))), ops);
            }
        }
        Ok(())
    }

    /// A node of the program evaluating to g.
    pub fn solve(&mut self, g: &Mat) -> Result<usize> {
        let ops = self.factor(g)?;
        let mut parts = Vec::with_capacity(ops.len());
        for (r, a) in ops {
            parts.push(self.root(r, a)?);
        }
        Ok(self.prog.concat(&parts))
    }
}

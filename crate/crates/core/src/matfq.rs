//! Dense matrices over F_q: elimination, characteristic polynomials, orders.

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde_json::Value;

use crate::arith;
use crate::error::{Error, Result};
use crate::gf::{Fe, Field};
use crate::poly::Poly;

pub type Vector = Vec<Fe>;

#[derive(Clone)]
pub struct Mat {
    rows: usize,
    cols: usize,
    field: Field,
    data: Vec<Fe>,
}

impl PartialEq for Mat {
    fn eq(&self, o: &Self) -> bool {
        self.rows == o.rows && self.cols == o.cols && self.data == o.data && self.field == o.field
    }
}
impl Eq for Mat {}

impl Hash for Mat {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rows.hash(state);
        self.data.hash(state);
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} over {:?}", self.rows, self.cols, self.field)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|&a| self.field.fmt_elem(a)).collect();
            writeln!(f, "  [{}]", row.join(" "))?;
        }
        Ok(())
    }
}

impl Mat {
    pub fn zeros(field: &Field, rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, field: field.clone(), data: vec![Fe::ZERO; rows * cols] }
    }

    pub fn identity(field: &Field, n: usize) -> Mat {
        let mut m = Mat::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = Fe::ONE;
        }
        m
    }

    pub fn from_fn(field: &Field, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Fe) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, field: field.clone(), data }
    }

    pub fn from_rows(field: &Field, rows: &[Vector]) -> Mat {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Mat { rows: rows.len(), cols, field: field.clone(), data: rows.concat() }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(field: &Field, cols: &[Vector]) -> Mat {
        Mat::from_rows(field, cols).transpose()
    }

    /// Prime-field matrix from integer entries.
    pub fn from_ints(field: &Field, rows: &[Vec<i64>]) -> Mat {
        let rows: Vec<Vector> = rows.iter().map(|r| r.iter().map(|&v| field.from_int(v)).collect()).collect();
        Mat::from_rows(field, &rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn n(&self) -> usize {
        self.rows
    }
    pub fn field(&self) -> &Field {
        &self.field
    }
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
    pub fn entries(&self) -> &[Fe] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Fe {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Fe) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Fe] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vector {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn row_vecs(&self) -> Vec<Vector> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn check_same_field(&self, o: &Mat) -> Result<()> {
        if self.field != o.field {
            return Err(Error::MixedFields);
        }
        Ok(())
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(&self.field, self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(Fe) -> Fe) -> Mat {
        Mat { rows: self.rows, cols: self.cols, field: self.field.clone(), data: self.data.iter().map(|&a| f(a)).collect() }
    }

    pub fn add(&self, o: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        let f = &self.field;
        Mat { data: self.data.iter().zip(&o.data).map(|(&a, &b)| f.add(a, b)).collect(), ..self.clone() }
    }

    pub fn sub(&self, o: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        let f = &self.field;
        Mat { data: self.data.iter().zip(&o.data).map(|(&a, &b)| f.sub(a, b)).collect(), ..self.clone() }
    }

    pub fn scale(&self, c: Fe) -> Mat {
        let f = &self.field;
        self.map(|a| f.mul(a, c))
    }

    pub fn mul(&self, o: &Mat) -> Mat {
        assert_eq!(self.cols, o.rows, "shape mismatch in product");
        let f = &self.field;
        let mut out = vec![Fe::ZERO; self.rows * o.cols];
        for i in 0..self.rows {
            let orow = &mut out[i * o.cols..(i + 1) * o.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                let brow = &o.data[k * o.cols..(k + 1) * o.cols];
                if a == Fe::ONE {
                    for (x, &b) in orow.iter_mut().zip(brow) {
                        *x = f.add(*x, b);
                    }
                } else {
                    for (x, &b) in orow.iter_mut().zip(brow) {
                        if !b.is_zero() {
                            *x = f.add(*x, f.mul(a, b));
                        }
                    }
                }
            }
        }
        Mat { rows: self.rows, cols: o.cols, field: self.field.clone(), data: out }
    }

    pub fn checked_mul(&self, o: &Mat) -> Result<Mat> {
        self.check_same_field(o)?;
        if self.cols != o.rows {
            return Err(Error::Dimension(format!("{}x{} times {}x{}", self.rows, self.cols, o.rows, o.cols)));
        }
        Ok(self.mul(o))
    }

    /// A v for a column vector v.
    pub fn apply(&self, v: &[Fe]) -> Vector {
        let f = &self.field;
        (0..self.rows)
            .map(|i| {
                self.row(i).iter().zip(v).fold(Fe::ZERO, |acc, (&a, &b)| {
                    if a.is_zero() || b.is_zero() {
                        acc
                    } else {
                        f.add(acc, f.mul(a, b))
                    }
                })
            })
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..self.cols).all(|j| self.get(i, j) == if i == j { Fe::ONE } else { Fe::ZERO }))
    }

    pub fn is_scalar(&self) -> bool {
        let d = self.get(0, 0);
        (0..self.rows).all(|i| (0..self.cols).all(|j| self.get(i, j) == if i == j { d } else { Fe::ZERO }))
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (Mat, Vec<usize>) {
        let mut m = self.clone();
        let pivots = m.rref_in_place();
        (m, pivots)
    }

    fn rref_in_place(&mut self) -> Vec<usize> {
        let f = self.field.clone();
        let (rows, cols) = (self.rows, self.cols);
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..cols {
            if r == rows {
                break;
            }
            let Some(pr) = (r..rows).find(|&i| !self.get(i, c).is_zero()) else { continue };
            if pr != r {
                for j in 0..cols {
                    self.data.swap(pr * cols + j, r * cols + j);
                }
            }
            let inv = f.inv(self.get(r, c));
            for j in c..cols {
                let v = f.mul(self.get(r, j), inv);
                self.set(r, j, v);
            }
            for i in 0..rows {
                if i == r {
                    continue;
                }
                let fac = self.get(i, c);
                if fac.is_zero() {
                    continue;
                }
                for j in c..cols {
                    let a = self.get(r, j);
                    if !a.is_zero() {
                        let v = f.sub(self.get(i, j), f.mul(fac, a));
                        self.set(i, j, v);
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right null space {x : A x = 0}.
    pub fn kernel(&self) -> Vec<Vector> {
        let (r, pivots) = self.rref();
        let f = &self.field;
        let mut out = Vec::new();
        for free in 0..self.cols {
            if pivots.contains(&free) {
                continue;
            }
            let mut v = vec![Fe::ZERO; self.cols];
            v[free] = Fe::ONE;
            for (i, &pc) in pivots.iter().enumerate() {
                v[pc] = f.neg(r.get(i, free));
            }
            out.push(v);
        }
        out
    }

    /// deg(A) = rank(A - I).
    pub fn degree(&self) -> usize {
        self.sub(&Mat::identity(&self.field, self.rows)).rank()
    }

    pub fn inverse(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::Dimension("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut aug = Mat::from_fn(&self.field, n, 2 * n, |i, j| {
            if j < n {
                self.get(i, j)
            } else if j - n == i {
                Fe::ONE
            } else {
                Fe::ZERO
            }
        });
        let pivots = aug.rref_in_place();
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(Error::Singular);
        }
        Ok(Mat::from_fn(&self.field, n, n, |i, j| aug.get(i, j + n)))
    }

    pub fn det(&self) -> Fe {
        assert!(self.is_square());
        let f = self.field.clone();
        let n = self.rows;
        let mut m = self.clone();
        let mut det = Fe::ONE;
        for c in 0..n {
            let Some(pr) = (c..n).find(|&i| !m.get(i, c).is_zero()) else { return Fe::ZERO };
            if pr != c {
                for j in 0..n {
                    m.data.swap(pr * n + j, c * n + j);
                }
                det = f.neg(det);
            }
            let p = m.get(c, c);
            det = f.mul(det, p);
            let inv = f.inv(p);
            for i in c + 1..n {
                let fac = f.mul(m.get(i, c), inv);
                if fac.is_zero() {
                    continue;
                }
                for j in c..n {
                    let v = f.sub(m.get(i, j), f.mul(fac, m.get(c, j)));
                    m.set(i, j, v);
                }
            }
        }
        det
    }

    pub fn pow(&self, mut e: u128) -> Mat {
        let mut acc = Mat::identity(&self.field, self.rows);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Characteristic polynomial det(xI - A) via reduction to Hessenberg form.
    pub fn charpoly(&self) -> Poly {
        assert!(self.is_square());
        let f = self.field.clone();
        let n = self.rows;
        let mut h = self.clone();
        for m in 1..n.saturating_sub(1) {
            let Some(i) = (m..n).find(|&i| !h.get(i, m - 1).is_zero()) else { continue };
            if i != m {
                for j in 0..n {
                    h.data.swap(i * n + j, m * n + j);
                }
                for r in 0..n {
                    h.data.swap(r * n + i, r * n + m);
                }
            }
            let inv = f.inv(h.get(m, m - 1));
            for i in m + 1..n {
                let u = f.mul(h.get(i, m - 1), inv);
                if u.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let v = f.sub(h.get(i, j), f.mul(u, h.get(m, j)));
                    h.set(i, j, v);
                }
                for r in 0..n {
                    let v = f.add(h.get(r, m), f.mul(u, h.get(r, i)));
                    h.set(r, m, v);
                }
            }
        }
        // p_m = (x - h_mm) p_{m-1} - sum_i h_im (h_{m,m-1} ... h_{i+1,i}) p_{i-1}
        let mut ps: Vec<Poly> = vec![Poly::one(&f)];
        for m in 0..n {
            let mut pm = Poly::linear(&f, h.get(m, m)).mul(&ps[m]);
            let mut t = Fe::ONE;
            for i in (0..m).rev() {
                t = f.mul(t, h.get(i + 1, i));
                if t.is_zero() {
                    break;
                }
                let c = f.mul(h.get(i, m), t);
                if !c.is_zero() {
                    pm = pm.sub(&ps[i].scale(c));
                }
            }
            ps.push(pm);
        }
        ps.pop().unwrap()
    }

    pub fn charpoly_factor(&self) -> Vec<(Poly, usize)> {
        self.charpoly().factor()
    }

    /// g(A) by Horner's rule.
    pub fn eval_poly(&self, g: &Poly) -> Mat {
        let n = self.rows;
        let mut acc = Mat::zeros(&self.field, n, n);
        for &c in g.coeffs().iter().rev() {
            acc = acc.mul(self);
            for i in 0..n {
                let v = self.field.add(acc.get(i, i), c);
                acc.set(i, i, v);
            }
        }
        acc
    }

    /// Multiplicative order, assembled from the charpoly factorization: each irreducible
    /// factor g contributes ord(x mod g) times the least power of p covering the size of
    /// its largest Jordan-type block.
    pub fn order(&self) -> Result<u128> {
        let n = self.rows;
        if self.det().is_zero() {
            return Err(Error::Singular);
        }
        let p = self.field.p() as u128;
        let mut total = 1u128;
        for (g, t) in self.charpoly_factor() {
            let s = if t == 1 {
                1
            } else {
                let gm = self.eval_poly(&g);
                let target = t * g.degree();
                let mut pw = gm.clone();
                let mut s = 1;
                while n - pw.rank() < target {
                    pw = pw.mul(&gm);
                    s += 1;
                }
                s
            };
            let part = ord_x_mod(&g)?
                .checked_mul(p.pow(arith::ceil_log(p, s as u128)))
                .ok_or(Error::Overflow("matrix order"))?;
            total = arith::lcm(total, part)?;
        }
        debug_assert!(self.pow(total).is_identity());
        Ok(total)
    }

    /// For each charpoly factor g: its multiplicity and the given primes dividing ord(x mod g).
    pub fn eigen_prime_sets(&self, primes: &[u64]) -> Result<Vec<(Poly, usize, BTreeSet<u64>)>> {
        if self.det().is_zero() {
            return Err(Error::Singular);
        }
        self.charpoly_factor()
            .into_iter()
            .map(|(g, t)| {
                let o = ord_x_mod(&g)?;
                let set = primes.iter().copied().filter(|&r| o % r as u128 == 0).collect();
                Ok((g, t, set))
            })
            .collect()
    }

    /// True when the only eigenvalue lying in F_q is 1.
    pub fn only_unit_rational_eigenvalue(&self) -> bool {
        self.charpoly_factor().iter().all(|(g, _)| g.degree() > 1 || g.coeff(0) == self.field.neg(Fe::ONE))
    }

    pub fn companion(g: &Poly) -> Result<Mat> {
        if !g.is_monic() || g.degree() == 0 {
            return Err(Error::NotMonic);
        }
        let f = g.field();
        let d = g.degree();
        let mut m = Mat::zeros(f, d, d);
        for i in 1..d {
            m.set(i, i - 1, Fe::ONE);
        }
        for i in 0..d {
            m.set(i, d - 1, f.neg(g.coeff(i)));
        }
        Ok(m)
    }

    pub fn block_diag(field: &Field, blocks: &[Mat]) -> Mat {
        let n: usize = blocks.iter().map(|b| b.rows).sum();
        let mut m = Mat::zeros(field, n, n);
        let mut off = 0;
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    m.set(off + i, off + j, b.get(i, j));
                }
            }
            off += b.rows;
        }
        m
    }

    pub fn commutator(a: &Mat, b: &Mat) -> Result<Mat> {
        a.check_same_field(b)?;
        if a.rows != b.rows || !a.is_square() || !b.is_square() {
            return Err(Error::Dimension("commutator of differently sized matrices".into()));
        }
        let c = a.mul(b).mul(&a.inverse()?).mul(&b.inverse()?);
        debug_assert!(c.degree() <= 2 * a.degree().min(b.degree()));
        Ok(c)
    }

    /// Row-major nested arrays; entries are coefficient vectors.
    pub fn to_json(&self) -> Value {
        Value::Array(
            (0..self.rows)
                .map(|i| Value::Array(self.row(i).iter().map(|&a| fe_to_json(&self.field, a)).collect()))
                .collect(),
        )
    }

    pub fn from_json(field: &Field, v: &Value) -> Result<Mat> {
        let rows = v.as_array().ok_or_else(|| Error::Parse("matrix must be an array of rows".into()))?;
        let rows: Vec<Vector> = rows
            .iter()
            .map(|r| {
                r.as_array()
                    .ok_or_else(|| Error::Parse("matrix row must be an array".into()))?
                    .iter()
                    .map(|x| fe_from_json(field, x))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse("ragged matrix".into()));
        }
        Ok(Mat::from_rows(field, &rows))
    }
}

/// Bare integers over a prime field, coefficient vectors otherwise.
pub fn fe_to_json(field: &Field, a: Fe) -> Value {
    if field.e() == 1 {
        return Value::from(field.coeffs(a)[0]);
    }
    Value::Array(field.coeffs(a).into_iter().map(Value::from).collect())
}

/// Accepts a coefficient vector or, for convenience, a bare integer in the prime field.
pub fn fe_from_json(field: &Field, v: &Value) -> Result<Fe> {
    match v {
        Value::Number(n) => {
            let x = n.as_i64().ok_or_else(|| Error::Parse(format!("bad field entry {n}")))?;
            if x < 0 || x >= field.p() as i64 {
                return Err(Error::BadElement(x.unsigned_abs()));
            }
            Ok(field.from_int(x))
        }
        Value::Array(cs) => {
            let cs: Vec<u32> = cs
                .iter()
                .map(|c| c.as_u64().map(|x| x as u32).ok_or_else(|| Error::Parse("bad coefficient".into())))
                .collect::<Result<_>>()?;
            field.from_coeffs(&cs)
        }
        _ => Err(Error::Parse("field entry must be an integer or coefficient list".into())),
    }
}

pub fn vec_to_json(field: &Field, v: &[Fe]) -> Value {
    Value::Array(v.iter().map(|&a| fe_to_json(field, a)).collect())
}

pub fn vec_from_json(field: &Field, v: &Value) -> Result<Vector> {
    v.as_array()
        .ok_or_else(|| Error::Parse("vector must be an array".into()))?
        .iter()
        .map(|x| fe_from_json(field, x))
        .collect()
}

/// Order of x in F_q[x]/(g) for irreducible g with g(0) != 0.
pub fn ord_x_mod(g: &Poly) -> Result<u128> {
    let f = g.field();
    if g.degree() == 1 {
        return Ok(f.mult_order(f.neg(g.coeff(0)))? as u128);
    }
    let d = g.degree() as u32;
    let n = (f.q() as u128).checked_pow(d).ok_or(Error::Overflow("q^d"))? - 1;
    let x = Poly::x(f);
    Ok(arith::order_dividing(n, |e| x.powmod(e, g).is_one()))
}

// ---- vector helpers ----

pub fn vec_add(f: &Field, a: &[Fe], b: &[Fe]) -> Vector {
    a.iter().zip(b).map(|(&x, &y)| f.add(x, y)).collect()
}

pub fn vec_sub(f: &Field, a: &[Fe], b: &[Fe]) -> Vector {
    a.iter().zip(b).map(|(&x, &y)| f.sub(x, y)).collect()
}

pub fn vec_scale(f: &Field, a: &[Fe], c: Fe) -> Vector {
    a.iter().map(|&x| f.mul(x, c)).collect()
}

/// a + c b
pub fn vec_axpy(f: &Field, a: &[Fe], c: Fe, b: &[Fe]) -> Vector {
    a.iter().zip(b).map(|(&x, &y)| f.add(x, f.mul(c, y))).collect()
}

pub fn unit_vec(n: usize, i: usize) -> Vector {
    let mut v = vec![Fe::ZERO; n];
    v[i] = Fe::ONE;
    v
}

pub fn is_zero_vec(v: &[Fe]) -> bool {
    v.iter().all(|a| a.is_zero())
}

/// Rank of a list of row vectors of length n.
pub fn rank_of(field: &Field, n: usize, vs: &[Vector]) -> usize {
    if vs.is_empty() {
        return 0;
    }
    debug_assert!(vs.iter().all(|v| v.len() == n));
    Mat::from_rows(field, vs).rank()
}

/// Linear combination sum c_i v_i.
pub fn combine(field: &Field, n: usize, coeffs: &[Fe], vs: &[Vector]) -> Vector {
    let mut out = vec![Fe::ZERO; n];
    for (&c, v) in coeffs.iter().zip(vs) {
        if !c.is_zero() {
            out = vec_axpy(field, &out, c, v);
        }
    }
    out
}

//! Univariate polynomials over F_q and their factorization.
//!
//! Factoring runs squarefree decomposition, distinct-degree splitting and then
//! Cantor-Zassenhaus equal-degree splitting (the trace-map variant in characteristic 2).

use std::cmp::Ordering;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gf::{Fe, Field};

#[derive(Clone, PartialEq, Eq)]
pub struct Poly {
    field: Field,
    /// little-endian, no trailing zeros
    c: Vec<Fe>,
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.c.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &a) in self.c.iter().enumerate().rev() {
            if a.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let coeff = self.field.fmt_elem(a);
            match (i, a == Fe::ONE) {
                (0, _) => write!(f, "{coeff}")?,
                (1, true) => write!(f, "x")?,
                (1, false) => write!(f, "{coeff}x")?,
                (_, true) => write!(f, "x^{i}")?,
                (_, false) => write!(f, "{coeff}x^{i}")?,
            }
        }
        Ok(())
    }
}

impl std::hash::Hash for Poly {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.c.hash(state);
    }
}

impl PartialOrd for Poly {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Degree first, then coefficients from the leading one down.
impl Ord for Poly {
    fn cmp(&self, other: &Self) -> Ordering {
        self.c
            .len()
            .cmp(&other.c.len())
            .then_with(|| self.c.iter().rev().cmp(other.c.iter().rev()))
    }
}

impl Poly {
    pub fn new(field: &Field, mut c: Vec<Fe>) -> Poly {
        while c.last().is_some_and(|a| a.is_zero()) {
            c.pop();
        }
        Poly { field: field.clone(), c }
    }

    pub fn zero(field: &Field) -> Poly {
        Poly { field: field.clone(), c: Vec::new() }
    }

    pub fn one(field: &Field) -> Poly {
        Poly::constant(field, Fe::ONE)
    }

    pub fn constant(field: &Field, a: Fe) -> Poly {
        Poly::new(field, vec![a])
    }

    pub fn x(field: &Field) -> Poly {
        Poly::new(field, vec![Fe::ZERO, Fe::ONE])
    }

    /// x - a
    pub fn linear(field: &Field, a: Fe) -> Poly {
        Poly::new(field, vec![field.neg(a), Fe::ONE])
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn coeffs(&self) -> &[Fe] {
        &self.c
    }

    pub fn coeff(&self, i: usize) -> Fe {
        self.c.get(i).copied().unwrap_or(Fe::ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.c.len() == 1 && self.c[0] == Fe::ONE
    }

    /// Degree, with the zero polynomial given degree 0.
    pub fn degree(&self) -> usize {
        self.c.len().saturating_sub(1)
    }

    pub fn lead(&self) -> Fe {
        self.c.last().copied().unwrap_or(Fe::ZERO)
    }

    pub fn is_monic(&self) -> bool {
        self.lead() == Fe::ONE
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        self.scale(self.field.inv(self.lead()))
    }

    pub fn scale(&self, a: Fe) -> Poly {
        let f = &self.field;
        Poly::new(f, self.c.iter().map(|&x| f.mul(x, a)).collect())
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let f = &self.field;
        let n = self.c.len().max(o.c.len());
        Poly::new(f, (0..n).map(|i| f.add(self.coeff(i), o.coeff(i))).collect())
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        let f = &self.field;
        let n = self.c.len().max(o.c.len());
        Poly::new(f, (0..n).map(|i| f.sub(self.coeff(i), o.coeff(i))).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero(&self.field);
        }
        let f = &self.field;
        let mut out = vec![Fe::ZERO; self.c.len() + o.c.len() - 1];
        for (i, &a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in o.c.iter().enumerate() {
                out[i + j] = f.add(out[i + j], f.mul(a, b));
            }
        }
        Poly::new(f, out)
    }

    pub fn pow(&self, mut e: u64) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::one(&self.field);
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

    /// Quotient and remainder; panics on division by zero.
    pub fn divrem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "polynomial division by zero");
        let f = &self.field;
        if self.c.len() < d.c.len() {
            return (Poly::zero(f), self.clone());
        }
        let mut r = self.c.clone();
        let dd = d.c.len() - 1;
        let inv = f.inv(d.lead());
        let mut q = vec![Fe::ZERO; self.c.len() - dd];
        for i in (dd..r.len()).rev() {
            let c = f.mul(r[i], inv);
            if c.is_zero() {
                continue;
            }
            q[i - dd] = c;
            for (j, &dj) in d.c.iter().enumerate() {
                let k = i - dd + j;
                r[k] = f.sub(r[k], f.mul(c, dj));
            }
        }
        r.truncate(dd);
        (Poly::new(f, q), Poly::new(f, r))
    }

    pub fn rem(&self, d: &Poly) -> Poly {
        self.divrem(d).1
    }

    pub fn div_exact(&self, d: &Poly) -> Poly {
        let (q, r) = self.divrem(d);
        debug_assert!(r.is_zero());
        q
    }

    pub fn divides(&self, o: &Poly) -> bool {
        o.rem(self).is_zero()
    }

    /// Monic gcd (zero when both inputs are zero).
    pub fn gcd(&self, o: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn mulmod(&self, o: &Poly, m: &Poly) -> Poly {
        self.mul(o).rem(m)
    }

    pub fn powmod(&self, mut e: u128, m: &Poly) -> Poly {
        let mut base = self.rem(m);
        let mut acc = Poly::one(&self.field).rem(m);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mulmod(&base, m);
            }
            e >>= 1;
            if e > 0 {
                base = base.mulmod(&base, m);
            }
        }
        acc
    }

    pub fn eval(&self, x: Fe) -> Fe {
        let f = &self.field;
        self.c.iter().rev().fold(Fe::ZERO, |acc, &a| f.add(f.mul(acc, x), a))
    }

    pub fn derivative(&self) -> Poly {
        let f = &self.field;
        Poly::new(
            f,
            self.c.iter().enumerate().skip(1).map(|(i, &a)| f.mul(f.from_int(i as i64), a)).collect(),
        )
    }

    /// Applies a coefficient map, e.g. the field involution.
    pub fn map_coeffs(&self, g: impl Fn(Fe) -> Fe) -> Poly {
        Poly::new(&self.field, self.c.iter().map(|&a| g(a)).collect())
    }

    /// P(x)^{1/p} for a polynomial in x^p.
    fn pth_root(&self) -> Poly {
        let f = &self.field;
        let p = f.p() as usize;
        Poly::new(f, self.c.iter().step_by(p).map(|&a| f.pth_root(a)).collect())
    }

    /// Rabin-style irreducibility test via distinct-degree splitting.
    pub fn is_irreducible(&self) -> bool {
        if self.degree() == 0 || self.is_zero() {
            return false;
        }
        let m = self.monic();
        let d = m.degree();
        let q = self.field.q() as u128;
        let x = Poly::x(&self.field);
        let mut h = x.rem(&m);
        for _ in 1..=d / 2 {
            h = h.powmod(q, &m);
            if !h.sub(&x).gcd(&m).is_one() {
                return false;
            }
        }
        true
    }

    /// Complete factorization into monic irreducibles with multiplicity, sorted by
    /// the polynomial order. The unit factor is dropped.
    pub fn factor(&self) -> Vec<(Poly, usize)> {
        assert!(!self.is_zero(), "factoring the zero polynomial");
        let mut out: Vec<(Poly, usize)> = Vec::new();
        for (sq, mult) in squarefree(&self.monic()) {
            for (g, d) in distinct_degree(&sq) {
                for h in equal_degree(&g, d) {
                    match out.iter_mut().find(|(k, _)| *k == h) {
                        Some(e) => e.1 += mult,
                        None => out.push((h, mult)),
                    }
                }
            }
        }
        out.sort();
        out
    }
}

/// (squarefree part, multiplicity) pairs whose product with powers is f.
fn squarefree(f: &Poly) -> Vec<(Poly, usize)> {
    let mut out = Vec::new();
    if f.degree() == 0 {
        return out;
    }
    let p = f.field().p() as usize;
    let d = f.derivative();
    if d.is_zero() {
        for (g, m) in squarefree(&f.pth_root()) {
            out.push((g, m * p));
        }
        return out;
    }
    let mut c = f.gcd(&d);
    let mut w = f.div_exact(&c);
    let mut i = 1;
    while !w.is_one() {
        let y = w.gcd(&c);
        let fac = w.div_exact(&y);
        if fac.degree() > 0 {
            out.push((fac, i));
        }
        i += 1;
        w = y;
        c = c.div_exact(&w);
    }
    if c.degree() > 0 {
        for (g, m) in squarefree(&c.pth_root()) {
            out.push((g, m * p));
        }
    }
    out
}

/// Splits a monic squarefree f into products of irreducibles of equal degree.
fn distinct_degree(f: &Poly) -> Vec<(Poly, usize)> {
    let field = f.field().clone();
    let q = field.q() as u128;
    let x = Poly::x(&field);
    let mut out = Vec::new();
    let mut f = f.clone();
    let mut h = x.rem(&f);
    let mut i = 1;
    while f.degree() >= 2 * i {
        h = h.powmod(q, &f);
        let g = h.sub(&x).gcd(&f);
        if !g.is_one() {
            f = f.div_exact(&g);
            h = h.rem(&f);
            out.push((g, i));
        }
        i += 1;
    }
    if f.degree() > 0 {
        let d = f.degree();
        out.push((f, d));
    }
    out
}

/// Cantor-Zassenhaus splitting of a product of distinct irreducibles of degree d.
fn equal_degree(f: &Poly, d: usize) -> Vec<Poly> {
    if f.degree() == d {
        return vec![f.clone()];
    }
    let field = f.field().clone();
    let seed = f.c.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, a| (h ^ a.value() as u64).wrapping_mul(0x100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = f.degree();
    loop {
        let a = Poly::new(&field, (0..n).map(|_| Fe(rng.gen_range(0..field.q()) as u16)).collect());
        if a.degree() == 0 {
            continue;
        }
        let g = a.gcd(f);
        let g = if !g.is_one() {
            g
        } else {
            let b = if field.p() == 2 {
                // T(a) = a + a^2 + ... + a^{2^{ed-1}}
                let mut t = a.rem(f);
                let mut cur = t.clone();
                for _ in 1..(field.e() as usize * d) {
                    cur = cur.mulmod(&cur, f);
                    t = t.add(&cur);
                }
                t
            } else {
                // a^{(q^d-1)/2} as the product of the Frobenius images of a^{(q-1)/2}
                let half = a.powmod(((field.q() - 1) / 2) as u128, f);
                let mut acc = half.clone();
                let mut cur = half;
                for _ in 1..d {
                    cur = cur.powmod(field.q() as u128, f);
                    acc = acc.mulmod(&cur, f);
                }
                acc.sub(&Poly::one(&field))
            };
            b.gcd(f)
        };
        if g.degree() > 0 && g.degree() < n {
            let mut out = equal_degree(&g, d);
            out.extend(equal_degree(&f.div_exact(&g), d));
            return out;
        }
    }
}

/// The m-th cyclotomic polynomial reduced into F_q.
pub fn cyclotomic(field: &Field, m: u64) -> Poly {
    // integer division of x^m - 1 by Φ_d for proper divisors d
    fn integer_cyclotomic(m: u64) -> Vec<i64> {
        let mut num = vec![0i64; m as usize + 1];
        num[0] = -1;
        num[m as usize] = 1;
        for d in 1..m {
            if m.is_multiple_of(d) {
                let den = integer_cyclotomic(d);
                let mut quo = vec![0i64; num.len() - den.len() + 1];
                for i in (0..quo.len()).rev() {
                    let c = num[i + den.len() - 1];
                    quo[i] = c;
                    for (j, &dj) in den.iter().enumerate() {
                        num[i + j] -= c * dj;
                    }
                }
                num = quo;
            }
        }
        num
    }
    let c = integer_cyclotomic(m);
    Poly::new(field, c.into_iter().map(|v| field.from_int(v)).collect())
}

/// Least irreducible factor of Φ_m over F_q in the polynomial order.
pub fn least_cyclotomic_factor(field: &Field, m: u64) -> Poly {
    cyclotomic(field, m).factor().into_iter().map(|(g, _)| g).min().expect("nonconstant")
}

//! Arithmetic in F_q = F_p[x]/(m(x)) backed by log/exp tables.
//!
//! Elements are encoded as the integer sum c_0 + c_1 p + ... + c_{e-1} p^{e-1} of their
//! coefficients in the polynomial basis, so equality and hashing are plain integer
//! comparisons.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::arith;
use crate::error::{Error, Result};

/// Largest field order the table representation accepts.
pub const HARD_Q_CAP: u64 = 1024;
/// Default cap used by configuration-facing constructors.
pub const DEFAULT_Q_CAP: u64 = 81;

/// A field element in canonical integer encoding.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Fe(pub(crate) u16);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    pub fn value(self) -> u32 {
        self.0 as u32
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug)]
struct FieldSpec {
    p: u32,
    e: u32,
    q: u32,
    modulus: Vec<u32>,
    add: Vec<u16>,
    neg: Vec<u16>,
    exp: Vec<u16>,
    log: Vec<u32>,
}

/// Shared handle to an immutable field description.
#[derive(Clone)]
pub struct Field(Arc<FieldSpec>);

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.p == other.0.p && self.0.modulus == other.0.modulus)
    }
}
impl Eq for Field {}

impl std::hash::Hash for Field {
    fn hash<H: std::hash::Hasher>(&self, h: &mut H) {
        self.0.p.hash(h);
        self.0.modulus.hash(h);
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.0.q)?;
        if self.0.e > 1 {
            write!(f, "[mod {:?}]", self.0.modulus)?;
        }
        Ok(())
    }
}

/// Serialized form of a field: `{"p": 2, "e": 2, "modulus": [1, 1, 1]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDesc {
    pub p: u32,
    #[serde(default = "one")]
    pub e: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<Vec<u32>>,
}

fn one() -> u32 {
    1
}

// ---- prime-field polynomial helpers used only during construction ----

fn pp_trim(mut a: Vec<u32>) -> Vec<u32> {
    while a.last() == Some(&0) {
        a.pop();
    }
    a
}

fn pp_rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let mut r = pp_trim(a.to_vec());
    let dm = m.len() - 1;
    let inv_lead = inv_mod(m[dm], p);
    while r.len() > dm {
        let d = r.len() - 1;
        let c = r[d] * inv_lead % p;
        for i in 0..=dm {
            let t = r[d - dm + i] + p - c * m[i] % p;
            r[d - dm + i] = t % p;
        }
        r = pp_trim(r);
    }
    r
}

fn pp_mulmod(a: &[u32], b: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u32; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x * y) % p;
        }
    }
    pp_rem(&out, m, p)
}

fn inv_mod(a: u32, p: u32) -> u32 {
    arith::pow_mod(a as u128, (p - 2) as u128, p as u128) as u32
}

/// Trial division by every monic polynomial of degree <= e/2.
fn pp_irreducible(m: &[u32], p: u32) -> bool {
    let e = m.len() - 1;
    for d in 1..=e / 2 {
        let count = (p as u64).pow(d as u32);
        for code in 0..count {
            let mut g = decode(code as u32, p, d);
            g.push(1);
            if pp_rem(m, &g, p).is_empty() {
                return false;
            }
        }
    }
    true
}

fn decode(mut v: u32, p: u32, len: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(v % p);
        v /= p;
    }
    out
}

fn encode(c: &[u32], p: u32) -> u32 {
    c.iter().rev().fold(0, |acc, &x| acc * p + x)
}

impl Field {
    /// Builds F_{p^e}. Without a modulus the least monic irreducible in the integer
    /// encoding of its lower coefficients is used.
    pub fn new(p: u32, e: u32, modulus: Option<&[u32]>) -> Result<Field> {
        Self::with_cap(p, e, modulus, HARD_Q_CAP)
    }

    pub fn with_cap(p: u32, e: u32, modulus: Option<&[u32]>, cap: u64) -> Result<Field> {
        if !arith::is_prime(p as u64) {
            return Err(Error::NotPrime(p as u64));
        }
        if e == 0 {
            return Err(Error::BadModulus("extension degree must be at least 1".into()));
        }
        let q = (p as u64).checked_pow(e).unwrap_or(u64::MAX);
        let cap = cap.min(HARD_Q_CAP);
        if q > cap {
            return Err(Error::FieldTooLarge { q, cap });
        }
        let q = q as u32;
        let modulus = match modulus {
            Some(m) => {
                if m.len() != e as usize + 1 || m[e as usize] != 1 {
                    return Err(Error::BadModulus(format!(
                        "expected a monic polynomial of degree {e} as {} coefficients",
                        e + 1
                    )));
                }
                if m.iter().any(|&c| c >= p) {
                    return Err(Error::BadModulus("coefficient out of range".into()));
                }
                if !pp_irreducible(m, p) {
                    return Err(Error::ReducibleModulus(e));
                }
                m.to_vec()
            }
            None => (0..(p as u64).pow(e))
                .map(|code| {
                    let mut m = decode(code as u32, p, e as usize);
                    m.push(1);
                    m
                })
                .find(|m| pp_irreducible(m, p))
                .expect("irreducible polynomials exist in every degree"),
        };
        Ok(Field(Arc::new(build_tables(p, e, q, modulus))))
    }

    pub fn prime(p: u32) -> Result<Field> {
        Field::new(p, 1, None)
    }

    pub fn from_desc(d: &FieldDesc) -> Result<Field> {
        Field::new(d.p, d.e, d.modulus.as_deref())
    }

    pub fn desc(&self) -> FieldDesc {
        FieldDesc {
            p: self.0.p,
            e: self.0.e,
            modulus: if self.0.e > 1 { Some(self.0.modulus.clone()) } else { None },
        }
    }

    pub fn p(&self) -> u32 {
        self.0.p
    }
    pub fn e(&self) -> u32 {
        self.0.e
    }
    pub fn q(&self) -> u32 {
        self.0.q
    }
    pub fn modulus(&self) -> &[u32] {
        &self.0.modulus
    }

    /// The root of the modulus, i.e. the class of x.
    pub fn gen(&self) -> Fe {
        if self.0.e == 1 {
            self.from_int(-(self.0.modulus[0] as i64))
        } else {
            Fe(self.0.p as u16)
        }
    }

    pub fn elem(&self, v: u32) -> Result<Fe> {
        if v >= self.0.q {
            return Err(Error::BadElement(v as u64));
        }
        Ok(Fe(v as u16))
    }

    pub fn from_coeffs(&self, c: &[u32]) -> Result<Fe> {
        if c.len() > self.0.e as usize || c.iter().any(|&x| x >= self.0.p) {
            return Err(Error::BadElement(encode(c, self.0.p.max(2)) as u64));
        }
        Ok(Fe(encode(c, self.0.p) as u16))
    }

    pub fn coeffs(&self, a: Fe) -> Vec<u32> {
        decode(a.0 as u32, self.0.p, self.0.e as usize)
    }

    /// Image of an integer in the prime subfield.
    pub fn from_int(&self, v: i64) -> Fe {
        Fe(v.rem_euclid(self.0.p as i64) as u16)
    }

    /// Integer representative of a prime-subfield element.
    pub fn to_int(&self, a: Fe) -> Option<u32> {
        ((a.0 as u32) < self.0.p).then_some(a.0 as u32)
    }

    pub fn elements(&self) -> impl Iterator<Item = Fe> {
        (0..self.0.q).map(|v| Fe(v as u16))
    }

    pub fn nonzero(&self) -> impl Iterator<Item = Fe> {
        (1..self.0.q).map(|v| Fe(v as u16))
    }

    #[inline]
    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        Fe(self.0.add[a.0 as usize * self.0.q as usize + b.0 as usize])
    }

    #[inline]
    pub fn neg(&self, a: Fe) -> Fe {
        Fe(self.0.neg[a.0 as usize])
    }

    #[inline]
    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        if a.0 == 0 || b.0 == 0 {
            return Fe::ZERO;
        }
        let s = &self.0;
        let l = s.log[a.0 as usize] + s.log[b.0 as usize];
        let m = s.q - 1;
        Fe(s.exp[(if l >= m { l - m } else { l }) as usize])
    }

    /// Inverse of a nonzero element. Panics on zero; see [`Field::checked_inv`].
    #[inline]
    pub fn inv(&self, a: Fe) -> Fe {
        assert!(a.0 != 0, "inverse of zero");
        let s = &self.0;
        let l = s.log[a.0 as usize];
        Fe(s.exp[((s.q - 1 - l) % (s.q - 1)) as usize])
    }

    pub fn checked_inv(&self, a: Fe) -> Result<Fe> {
        if a.is_zero() {
            return Err(Error::ZeroInverse);
        }
        Ok(self.inv(a))
    }

    pub fn div(&self, a: Fe, b: Fe) -> Fe {
        self.mul(a, self.inv(b))
    }

    pub fn pow(&self, a: Fe, n: u128) -> Fe {
        if n == 0 {
            return Fe::ONE;
        }
        if a.is_zero() {
            return Fe::ZERO;
        }
        let m = (self.0.q - 1) as u128;
        let l = (self.0.log[a.0 as usize] as u128 * (n % m)) % m;
        Fe(self.0.exp[l as usize])
    }

    /// Signed power; negative exponents need a nonzero base.
    pub fn powi(&self, a: Fe, n: i64) -> Result<Fe> {
        if n >= 0 {
            Ok(self.pow(a, n as u128))
        } else {
            Ok(self.pow(self.checked_inv(a)?, n.unsigned_abs() as u128))
        }
    }

    pub fn mult_order(&self, a: Fe) -> Result<u64> {
        if a.is_zero() {
            return Err(Error::ZeroInverse);
        }
        let m = (self.0.q - 1) as u64;
        let l = self.0.log[a.0 as usize] as u64;
        Ok(m / num_integer::gcd(l, m))
    }

    /// A generator of the multiplicative group.
    pub fn primitive(&self) -> Fe {
        Fe(self.0.exp[if self.0.q > 2 { 1 } else { 0 }])
    }

    /// The absolute Frobenius a -> a^p.
    pub fn frobenius(&self, a: Fe) -> Fe {
        self.pow(a, self.0.p as u128)
    }

    pub fn has_involution(&self) -> bool {
        self.0.e.is_multiple_of(2)
    }

    /// The order-2 automorphism a -> a^{p^{e/2}}.
    pub fn sigma(&self, a: Fe) -> Result<Fe> {
        if !self.has_involution() {
            return Err(Error::NoInvolution(self.0.e));
        }
        Ok(self.sigma_unchecked(a))
    }

    pub(crate) fn sigma_unchecked(&self, a: Fe) -> Fe {
        self.pow(a, (self.0.p as u128).pow(self.0.e / 2))
    }

    /// Order of the σ-fixed subfield.
    pub fn fixed_order(&self) -> Result<u32> {
        if !self.has_involution() {
            return Err(Error::NoInvolution(self.0.e));
        }
        Ok(self.0.p.pow(self.0.e / 2))
    }

    pub fn is_fixed(&self, a: Fe) -> Result<bool> {
        Ok(self.sigma(a)? == a)
    }

    /// tr(a) = a + σ(a).
    pub fn trace(&self, a: Fe) -> Result<Fe> {
        Ok(self.add(a, self.sigma(a)?))
    }

    /// N(a) = a σ(a).
    pub fn norm(&self, a: Fe) -> Result<Fe> {
        Ok(self.mul(a, self.sigma(a)?))
    }

    /// Unique square root in characteristic 2, a^{q/2}.
    pub fn sqrt_char2(&self, a: Fe) -> Result<Fe> {
        if self.0.p != 2 {
            return Err(Error::NotChar2(self.0.p));
        }
        Ok(self.pow(a, (self.0.q / 2) as u128))
    }

    /// Inverse of the absolute Frobenius, a^{p^{e-1}}.
    pub fn pth_root(&self, a: Fe) -> Fe {
        self.pow(a, (self.0.p as u128).pow(self.0.e - 1))
    }

    pub fn is_square(&self, a: Fe) -> bool {
        a.is_zero() || self.0.p == 2 || self.0.log[a.0 as usize].is_multiple_of(2)
    }

    /// Some square root of a square; `None` for non-squares.
    pub fn sqrt(&self, a: Fe) -> Option<Fe> {
        if a.is_zero() {
            return Some(Fe::ZERO);
        }
        if self.0.p == 2 {
            return self.sqrt_char2(a).ok();
        }
        let l = self.0.log[a.0 as usize];
        l.is_multiple_of(2).then(|| Fe(self.0.exp[(l / 2) as usize]))
    }

    pub fn fmt_elem(&self, a: Fe) -> String {
        if self.0.e == 1 {
            a.0.to_string()
        } else {
            format!("{:?}", self.coeffs(a))
        }
    }
}

fn build_tables(p: u32, e: u32, q: u32, modulus: Vec<u32>) -> FieldSpec {
    let qs = q as usize;
    let elems: Vec<Vec<u32>> = (0..q).map(|v| decode(v, p, e as usize)).collect();
    let mut add = vec![0u16; qs * qs];
    let mut neg = vec![0u16; qs];
    for a in 0..qs {
        neg[a] = encode(&elems[a].iter().map(|&c| (p - c) % p).collect::<Vec<_>>(), p) as u16;
        for b in 0..qs {
            let s: Vec<u32> = elems[a].iter().zip(&elems[b]).map(|(x, y)| (x + y) % p).collect();
            add[a * qs + b] = encode(&s, p) as u16;
        }
    }
    // find a primitive element by walking powers of each candidate
    let mut exp = Vec::new();
    if q == 2 {
        exp.push(1);
    } else {
        for g in 2..q {
            let gp = pp_trim(elems[g as usize].clone());
            let mut cur = vec![1u32];
            let mut seq = Vec::with_capacity(qs - 1);
            let mut ok = true;
            for i in 0..q - 1 {
                let code = encode(&cur, p) as u16;
                if i > 0 && code == 1 {
                    ok = false;
                    break;
                }
                seq.push(code);
                cur = pp_mulmod(&cur, &gp, &modulus, p);
            }
            if ok {
                exp = seq;
                break;
            }
        }
    }
    let mut log = vec![0u32; qs];
    for (i, &v) in exp.iter().enumerate() {
        log[v as usize] = i as u32;
    }
    FieldSpec { p, e, q, modulus, add, neg, exp, log }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields() -> Vec<Field> {
        [(2, 1), (3, 1), (2, 2), (5, 1), (7, 1), (2, 3), (3, 2), (2, 4), (3, 4)]
            .iter()
            .map(|&(p, e)| Field::new(p, e, None).unwrap())
            .collect()
    }

    // schoolbook multiplication of coefficient vectors as an oracle
    fn oracle_mul(f: &Field, a: Fe, b: Fe) -> Fe {
        let p = f.p();
        let r = pp_mulmod(&f.coeffs(a), &f.coeffs(b), f.modulus(), p);
        Fe(encode(&r, p) as u16)
    }

    #[test]
    fn construction() {
        let f2 = Field::new(2, 1, None).unwrap();
        assert_eq!(f2.q(), 2);
        let f4 = Field::new(2, 2, None).unwrap();
        assert_eq!(f4.modulus(), &[1, 1, 1]);
        assert_eq!(Field::new(2, 3, None).unwrap().modulus(), &[1, 1, 0, 1]);
        assert_eq!(Field::new(3, 2, None).unwrap().modulus(), &[1, 0, 1]);
        assert!(matches!(Field::new(4, 1, None), Err(Error::NotPrime(4))));
        assert!(matches!(Field::new(2, 2, Some(&[1, 0, 1])), Err(Error::ReducibleModulus(2))));
        assert!(Field::new(2, 2, Some(&[1, 1, 0])).is_err());
        assert!(matches!(Field::with_cap(3, 5, None, DEFAULT_Q_CAP), Err(Error::FieldTooLarge { .. })));
    }

    #[test]
    fn documented_values() {
        let f4 = Field::new(2, 2, None).unwrap();
        let w = f4.gen();
        assert_eq!(f4.coeffs(w), vec![0, 1]);
        let w1 = f4.from_coeffs(&[1, 1]).unwrap();
        assert_eq!(f4.mul(w, w), w1);
        assert_eq!(f4.sigma(w).unwrap(), w1);
        assert_eq!(f4.sqrt_char2(w).unwrap(), w1);
        assert_eq!(f4.mult_order(w).unwrap(), 3);
        assert_eq!(f4.norm(w).unwrap(), Fe::ONE);
        let f5 = Field::prime(5).unwrap();
        assert_eq!(f5.inv(Fe(2)), Fe(3));
        assert_eq!(f5.mult_order(Fe(2)).unwrap(), 4);
        let f3 = Field::prime(3).unwrap();
        assert!(matches!(f3.sqrt_char2(Fe(1)), Err(Error::NotChar2(3))));
        assert!(matches!(f3.sigma(Fe(1)), Err(Error::NoInvolution(1))));
        assert!(f4.checked_inv(Fe::ZERO).is_err());
    }

    #[test]
    fn axioms_exhaustive() {
        for f in fields() {
            let q = f.q() as u128;
            for a in f.elements() {
                assert_eq!(f.add(a, f.neg(a)), Fe::ZERO);
                assert_eq!(f.mul(a, Fe::ONE), a);
                if !a.is_zero() {
                    assert_eq!(f.mul(a, f.inv(a)), Fe::ONE);
                    assert_eq!(f.pow(a, q - 1), Fe::ONE);
                    assert_eq!((q as u64 - 1) % f.mult_order(a).unwrap(), 0);
                }
                for b in f.elements() {
                    assert_eq!(f.mul(a, b), oracle_mul(&f, a, b));
                    assert_eq!(f.add(a, b), f.add(b, a));
                }
            }
        }
    }

    #[test]
    fn sigma_trace_norm() {
        for f in fields().into_iter().filter(|f| f.has_involution()) {
            let r = f.fixed_order().unwrap() as u128;
            let mut norm_counts = std::collections::HashMap::new();
            for a in f.elements() {
                assert_eq!(f.sigma(f.sigma(a).unwrap()).unwrap(), a);
                let t = f.trace(a).unwrap();
                assert_eq!(f.pow(t, r), t);
                if !a.is_zero() {
                    *norm_counts.entry(f.norm(a).unwrap()).or_insert(0) += 1;
                }
            }
            // N is onto the fixed subfield's units with fibres of size r+1
            assert_eq!(norm_counts.len() as u128, r - 1);
            assert!(norm_counts.values().all(|&c| c as u128 == r + 1));
        }
        let f9 = Field::new(3, 2, None).unwrap();
        for a in f9.elements() {
            assert_eq!(f9.sigma(a).unwrap(), f9.pow(a, 3));
        }
    }

    #[test]
    fn char2_roots() {
        for f in fields().into_iter().filter(|f| f.p() == 2) {
            for a in f.elements() {
                let r = f.sqrt_char2(a).unwrap();
                assert_eq!(f.mul(r, r), a);
            }
        }
    }

    #[test]
    fn odd_square_roots() {
        for f in fields().into_iter().filter(|f| f.p() != 2) {
            let squares: std::collections::HashSet<Fe> = f.elements().map(|a| f.mul(a, a)).collect();
            for a in f.elements() {
                assert_eq!(f.is_square(a), squares.contains(&a));
                if let Some(r) = f.sqrt(a) {
                    assert_eq!(f.mul(r, r), a);
                }
            }
        }
    }
}

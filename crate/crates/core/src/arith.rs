//! Integer helpers shared by the field, order and prime modules.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_integer::Integer;

use crate::error::{Error, Result};

pub fn is_prime(n: u64) -> bool {
    num_prime::nt_funcs::is_prime64(n)
}

pub fn checked_pow(base: u128, exp: u32) -> Option<u128> {
    base.checked_pow(exp)
}

pub fn lcm(a: u128, b: u128) -> Result<u128> {
    if a == 0 || b == 0 {
        return Ok(0);
    }
    (a / a.gcd(&b)).checked_mul(b).ok_or(Error::Overflow("lcm"))
}

/// Prime factorization as ascending (prime, exponent) pairs. Results are memoised
/// because the same q^d - 1 values recur across order computations.
pub fn factorize(n: u128) -> Vec<(u128, u32)> {
    type Factorizations = HashMap<u128, Vec<(u128, u32)>>;
    static CACHE: OnceLock<Mutex<Factorizations>> = OnceLock::new();
    if n < 2 {
        return Vec::new();
    }
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(f) = cache.lock().unwrap().get(&n) {
        return f.clone();
    }
    let f: Vec<(u128, u32)> = num_prime::nt_funcs::factorize128(n)
        .into_iter()
        .map(|(p, e)| (p, e as u32))
        .collect();
    cache.lock().unwrap().insert(n, f.clone());
    f
}

/// Least divisor d of `n` with `is_identity(d)`, given that `is_identity(n)` holds.
pub fn order_dividing(n: u128, mut is_identity: impl FnMut(u128) -> bool) -> u128 {
    let mut ord = n;
    for (r, _) in factorize(n) {
        while ord.is_multiple_of(r) && is_identity(ord / r) {
            ord /= r;
        }
    }
    ord
}

/// Multiplicative order of `a` modulo `m`; `None` when gcd(a, m) != 1.
pub fn mult_order_mod(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(1);
    }
    if a.gcd(&m) != 1 {
        return None;
    }
    let phi: u128 = factorize(m as u128)
        .iter()
        .map(|&(p, e)| (p - 1) * p.pow(e - 1))
        .product();
    let m128 = m as u128;
    Some(order_dividing(phi, |d| pow_mod(a as u128 % m128, d, m128) == 1) as u64)
}

pub fn pow_mod(mut base: u128, mut exp: u128, m: u128) -> u128 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

fn mul_mod(a: u128, b: u128, m: u128) -> u128 {
    match a.checked_mul(b) {
        Some(x) => x % m,
        None => {
            // double-and-add keeps everything below 2m
            let (mut a, mut b, mut acc) = (a % m, b, 0u128);
            while b > 0 {
                if b & 1 == 1 {
                    acc = (acc + a) % m;
                }
                a = (a + a) % m;
                b >>= 1;
            }
            acc
        }
    }
}

/// Smallest a with p^a >= s.
pub fn ceil_log(p: u128, s: u128) -> u32 {
    let mut a = 0;
    let mut v = 1u128;
    while v < s {
        v *= p;
        a += 1;
    }
    a
}


/// u128 as a decimal string: tagged enums buffer through a format without 128-bit integers.
pub(crate) mod decimal {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(x)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

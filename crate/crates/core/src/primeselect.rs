//! Primes coprime to p(q-1), their bundles (lcm and sum of p_i - 1) and the choice of r.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::arith::{factorize, is_prime};
use crate::error::{Error, Result};

/// Default cap on prime searches.
pub const SIEVE_CAP: u64 = 1_000_000;

pub fn sieve(limit: u64) -> Vec<u64> {
    let limit = limit as usize;
    if limit < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

fn coprime_to(p0: u64, q0: u64, l: u64) -> bool {
    l != p0 && !(q0 - 1).is_multiple_of(l)
}

fn check_field(p0: u64, q0: u64) -> Result<()> {
    if !is_prime(p0) {
        return Err(Error::NotPrime(p0));
    }
    let mut x = q0;
    while x.is_multiple_of(p0) && x > 1 {
        x /= p0;
    }
    if x != 1 || q0 < p0 {
        return Err(Error::Precondition(format!("{q0} is not a power of {p0}")));
    }
    Ok(())
}

/// Primes in ascending order that divide neither p0 nor q0 - 1.
pub fn coprime_primes(p0: u64, q0: u64) -> Result<impl Iterator<Item = u64>> {
    check_field(p0, q0)?;
    Ok((2..).filter(move |&l| is_prime(l) && coprime_to(p0, q0, l)))
}

/// The first r primes coprime to p0 (q0 - 1).
pub fn primes_coprime(p0: u64, q0: u64, r: usize) -> Result<Vec<u64>> {
    let out: Vec<u64> = coprime_primes(p0, q0)?.take_while(|&l| l <= SIEVE_CAP).take(r).collect();
    if out.len() < r {
        return Err(Error::BudgetExhausted(format!("fewer than {r} coprime primes below {SIEVE_CAP}")));
    }
    Ok(out)
}

/// A prefix of the coprime primes with M = lcm(p_i - 1) kept factored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeBundle {
    pub p0: u64,
    pub q0: u64,
    pub primes: Vec<u64>,
    /// prime -> exponent in M
    pub m_factors: BTreeMap<u64, u32>,
    pub sigma: u64,
}

impl PrimeBundle {
    pub fn r(&self) -> usize {
        self.primes.len()
    }

    pub fn largest(&self) -> Option<u64> {
        self.primes.last().copied()
    }

    /// M when it fits in a u128.
    pub fn m(&self) -> Option<u128> {
        self.m_factors
            .iter()
            .try_fold(1u128, |acc, (&l, &e)| acc.checked_mul((l as u128).checked_pow(e)?))
    }

    pub fn ln_m(&self) -> f64 {
        self.m_factors.iter().map(|(&l, &e)| e as f64 * (l as f64).ln()).sum()
    }

    fn push(&mut self, l: u64) {
        for (f, e) in factorize(l as u128 - 1) {
            let slot = self.m_factors.entry(f as u64).or_insert(0);
            *slot = (*slot).max(e);
        }
        self.sigma += l - 1;
        self.primes.push(l);
    }

    /// M > bound, exactly.
    pub fn m_exceeds(&self, bound: u128) -> bool {
        self.m().is_none_or(|m| m > bound)
    }
}

pub fn bundle_make(p0: u64, q0: u64, primes: &[u64]) -> Result<PrimeBundle> {
    check_field(p0, q0)?;
    let mut b = PrimeBundle { p0, q0, primes: Vec::new(), m_factors: BTreeMap::new(), sigma: 0 };
    for &l in primes {
        if !is_prime(l) {
            return Err(Error::NotPrime(l));
        }
        if !coprime_to(p0, q0, l) {
            return Err(Error::Precondition(format!("{l} is not coprime to {p0}*({q0}-1)")));
        }
        if b.primes.last().is_some_and(|&last| last >= l) {
            return Err(Error::Precondition("bundle primes must be increasing".into()));
        }
        b.push(l);
    }
    Ok(b)
}

/// Least r with M > n^4 and p_r > c1 ln q0.
pub fn choose_r(n: u64, q0: u64, p0: u64, c1: f64) -> Result<PrimeBundle> {
    let mut b = bundle_make(p0, q0, &[])?;
    let n4 = (n as u128).pow(4);
    let floor = c1 * (q0 as f64).ln();
    for l in coprime_primes(p0, q0)? {
        if l > SIEVE_CAP {
            return Err(Error::BudgetExhausted(format!("no suitable bundle below {SIEVE_CAP}")));
        }
        b.push(l);
        if b.m_exceeds(n4) && (l as f64) > floor {
            return Ok(b);
        }
    }
    unreachable!()
}

pub fn largest_prime_factor(m: u64) -> Result<u64> {
    if m < 2 {
        return Err(Error::Precondition("largest prime factor needs m >= 2".into()));
    }
    Ok(factorize(m as u128).last().unwrap().0 as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeLemmaRow {
    pub r: usize,
    pub p_r: u64,
    pub ln_m: f64,
    pub sigma: u64,
    pub sigma_le_pr2: bool,
    /// p_r² / (ln M)³; infinite while M = 1 is impossible since p_1 ≥ 3
    pub ratio: f64,
    /// ratio ≤ c2
    pub within_c2: bool,
}

/// One row per prefix of the coprime primes up to `p_r_max`.
pub fn verify_prime_lemma(p0: u64, q0: u64, p_r_max: u64, c2: f64) -> Result<Vec<PrimeLemmaRow>> {
    check_field(p0, q0)?;
    if p_r_max > SIEVE_CAP {
        return Err(Error::BudgetExhausted(format!("p_r_max above the sieve cap {SIEVE_CAP}")));
    }
    let mut b = bundle_make(p0, q0, &[])?;
    let mut rows = Vec::new();
    for l in sieve(p_r_max).into_iter().filter(|&l| coprime_to(p0, q0, l)) {
        b.push(l);
        let ln_m = b.ln_m();
        let ratio = (l as f64).powi(2) / ln_m.powi(3);
        rows.push(PrimeLemmaRow {
            r: b.r(),
            p_r: l,
            ln_m,
            sigma: b.sigma,
            sigma_le_pr2: (b.sigma as u128) <= (l as u128).pow(2),
            ratio,
            within_c2: ratio <= c2,
        });
    }
    Ok(rows)
}

pub fn prime_rows_csv(rows: &[PrimeLemmaRow]) -> String {
    let mut s = String::from("r,p_r,log_M,Sigma,sigma_le_pr2,ratio,within_c2\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:.6},{},{},{:.6},{}", r.r, r.p_r, r.ln_m, r.sigma, r.sigma_le_pr2, r.ratio, r.within_c2);
    }
    s
}

/// Primes p ≤ x whose p - 1 has a prime factor above p^δ, and that count over x / ln x.
pub fn fouvry_density(x: u64, delta: f64) -> (usize, f64) {
    let count = sieve(x)
        .into_iter()
        .filter(|&p| p > 2 && (largest_prime_factor(p - 1).unwrap() as f64) > (p as f64).powf(delta))
        .count();
    (count, count as f64 * (x as f64).ln() / x as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division_prime(n: u64) -> bool {
        n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn sieve_matches_trial_division() {
        let s = sieve(2000);
        let t: Vec<u64> = (0..=2000).filter(|&n| trial_division_prime(n)).collect();
        assert_eq!(s, t);
    }

    #[test]
    fn coprime_examples() {
        assert_eq!(primes_coprime(2, 2, 3).unwrap(), vec![3, 5, 7]);
        assert_eq!(primes_coprime(2, 4, 3).unwrap(), vec![5, 7, 11]);
        assert_eq!(primes_coprime(3, 3, 3).unwrap(), vec![5, 7, 11]);
        assert!(primes_coprime(4, 4, 1).is_err());
        assert!(primes_coprime(2, 6, 1).is_err());
    }

    #[test]
    fn bundle_examples() {
        let b = bundle_make(2, 2, &[3, 5, 7]).unwrap();
        assert_eq!((b.m(), b.sigma), (Some(12), 12));
        let b = bundle_make(2, 2, &[3]).unwrap();
        assert_eq!((b.m(), b.sigma), (Some(2), 2));
        let b = bundle_make(2, 4, &[5, 7, 11]).unwrap();
        assert_eq!((b.m(), b.sigma), (Some(60), 20));
        assert!(bundle_make(2, 4, &[3]).is_err());
        assert!(bundle_make(2, 2, &[5, 3]).is_err());
    }

    #[test]
    fn choose_r_examples() {
        let b = choose_r(2, 2, 2, 1.0).unwrap();
        assert_eq!(b.primes, vec![3, 5, 7, 11]);
        assert_eq!(b.m(), Some(60));
        assert_eq!(choose_r(2, 2, 2, 0.0).unwrap().primes, vec![3, 5, 7, 11]);
        assert_eq!(choose_r(1, 2, 2, 1.0).unwrap().primes, vec![3]);
    }

    #[test]
    fn choose_r_is_minimal() {
        for (p0, q0) in [(2, 2), (3, 3), (2, 8), (5, 25)] {
            for n in 2..40u64 {
                let b = choose_r(n, q0, p0, 1.0).unwrap();
                let n4 = (n as u128).pow(4);
                assert!(b.m_exceeds(n4));
                let prefix = bundle_make(p0, q0, &b.primes[..b.r() - 1]).unwrap();
                let floor = (q0 as f64).ln();
                assert!(!prefix.m_exceeds(n4) || (prefix.largest().unwrap_or(0) as f64) <= floor);
            }
        }
    }

    #[test]
    fn largest_prime_factor_examples() {
        assert_eq!(largest_prime_factor(12).unwrap(), 3);
        assert_eq!(largest_prime_factor(7).unwrap(), 7);
        assert_eq!(largest_prime_factor(100).unwrap(), 5);
        assert!(largest_prime_factor(1).is_err());
    }

    #[test]
    fn lemma_rows() {
        let rows = verify_prime_lemma(2, 2, 7, 10.0).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!((rows[0].sigma, rows[0].p_r), (2, 3));
        assert_eq!((rows[2].sigma, rows[2].p_r), (12, 7));
        assert!(rows.iter().all(|r| r.sigma_le_pr2));
        let csv = prime_rows_csv(&rows);
        assert!(csv.starts_with("r,p_r,log_M,Sigma"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn m_grows_by_divisibility() {
        let rows = primes_coprime(2, 2, 40).unwrap();
        let mut prev = 1u128;
        for r in 1..=rows.len() {
            let m = bundle_make(2, 2, &rows[..r]).unwrap().m().unwrap();
            assert_eq!(m % prev, 0);
            prev = m;
        }
    }

    #[test]
    fn density_report_runs() {
        let (count, c0) = fouvry_density(1000, 2.0 / 3.0);
        assert!(count > 0 && c0 > 0.0);
    }
}

//! Matrices with primitive p_i-th roots of unity among their eigenvalues, and the power
//! map that trades such a matrix for one of a quarter of its degree.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::arith::mult_order_mod;
use crate::error::{Error, Result};
use crate::gf::Field;
use crate::matfq::Mat;
use crate::poly::least_cyclotomic_factor;

/// o_m(q), the degree of any irreducible factor of Φ_m over F_q.
pub fn min_degree_for_root(m: u64, field: &Field) -> Result<u64> {
    if m == 0 || num_integer::gcd(m, field.p() as u64) != 1 {
        return Err(Error::Precondition(format!("{m} is not coprime to the characteristic")));
    }
    Ok(mult_order_mod(field.q() as u64 % m, m).unwrap_or(1))
}

/// Companion blocks of the least irreducible factor of each Φ_{p_i}, padded by the identity to t x t.
pub fn build_pblock(primes: &[u64], t: usize, field: &Field) -> Result<Mat> {
    let blocks: Vec<Mat> = primes
        .iter()
        .map(|&l| Mat::companion(&least_cyclotomic_factor(field, l)))
        .collect::<Result<_>>()?;
    let k: usize = blocks.iter().map(|b| b.rows()).sum();
    if k > t {
        return Err(Error::Precondition(format!("blocks need dimension {k}, only {t} available")));
    }
    let mut all = blocks;
    if t > k {
        all.push(Mat::identity(field, t - k));
    }
    Ok(Mat::block_diag(field, &all))
}

pub fn pblock_degree(primes: &[u64], field: &Field) -> Result<usize> {
    primes.iter().map(|&l| min_degree_for_root(l, field).map(|d| d as usize)).sum()
}

pub fn is_p_matrix(a: &Mat, primes: &[u64]) -> Result<bool> {
    let mut seen = BTreeSet::new();
    for (_, _, s) in a.eigen_prime_sets(primes)? {
        seen.extend(s);
    }
    Ok(primes.iter().all(|l| seen.contains(l)))
}

/// Groups of primes that share one eigenvalue, with the least total degree over all
/// such groupings. A group G costs o_m(q) for m the product of G.
pub fn min_cover(primes: &[u64], field: &Field) -> Result<Vec<(Vec<u64>, u64)>> {
    let r = primes.len();
    if r > 20 {
        return Err(Error::BudgetExhausted("cover search over more than 20 primes".into()));
    }
    let ords: Vec<u64> = primes.iter().map(|&l| min_degree_for_root(l, field)).collect::<Result<_>>()?;
    let full = (1usize << r) - 1;
    let mut cost = vec![0u64; full + 1];
    for mask in 1..=full {
        let low = mask.trailing_zeros() as usize;
        let rest = cost[mask & (mask - 1)];
        cost[mask] = if rest == 0 { ords[low] } else { num_integer::lcm(rest, ords[low]) };
    }
    let mut best = vec![u64::MAX; full + 1];
    let mut choice = vec![0usize; full + 1];
    best[0] = 0;
    for mask in 1..=full {
        // the group holding the lowest set bit
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let g = sub | low;
            let c = cost[g].saturating_add(best[mask ^ g]);
            if c < best[mask] {
                best[mask] = c;
                choice[mask] = g;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    let mut out = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let g = choice[mask];
        out.push(((0..r).filter(|i| g >> i & 1 == 1).map(|i| primes[i]).collect(), cost[g]));
        mask ^= g;
    }
    Ok(out)
}

/// Block-diagonal P(r)-matrix of least degree: one companion block per cover group.
pub fn min_pmatrix(primes: &[u64], field: &Field) -> Result<Mat> {
    let blocks: Vec<Mat> = min_cover(primes, field)?
        .into_iter()
        .map(|(g, _)| Mat::companion(&least_cyclotomic_factor(field, g.iter().product())))
        .collect::<Result<_>>()?;
    Ok(Mat::block_diag(field, &blocks))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionStep {
    pub input_degree: usize,
    pub prime: u64,
    #[serde(with = "crate::arith::decimal")]
    pub exponent: u128,
    #[serde(with = "crate::arith::decimal")]
    pub order: u128,
    pub output_degree: usize,
    /// (p_i, n(i)) for every bundle prime
    pub counts: Vec<(u64, usize)>,
    /// every F_q-eigenvalue of the output equals 1
    pub rational_eigenvalues_one: bool,
}

impl ReductionStep {
    pub fn holds(&self) -> bool {
        self.output_degree > 0 && 4 * self.output_degree <= self.input_degree && self.rational_eigenvalues_one
    }
}

/// Raises A to order/p for the prime p hit by the fewest eigenvalues (counted with
/// multiplicity), smallest such prime on ties. No assertion on the result.
pub fn power_step(a: &Mat, primes: &[u64]) -> Result<(ReductionStep, Mat)> {
    if primes.is_empty() {
        return Err(Error::Precondition("empty prime bundle".into()));
    }
    let sets = a.eigen_prime_sets(primes)?;
    let counts: Vec<(u64, usize)> = primes
        .iter()
        .map(|&l| (l, sets.iter().filter(|(_, _, s)| s.contains(&l)).map(|(g, t, _)| g.degree() * t).sum()))
        .collect();
    if counts.iter().any(|&(_, c)| c == 0) {
        return Err(Error::Precondition("not a P(r)-matrix".into()));
    }
    let &(prime, _) = counts.iter().min_by_key(|&&(l, c)| (c, l)).unwrap();
    let order = a.order()?;
    let exponent = order / prime as u128;
    let b = a.pow(exponent);
    let step = ReductionStep {
        input_degree: a.degree(),
        prime,
        exponent,
        order,
        output_degree: b.degree(),
        counts,
        rational_eigenvalues_one: b.only_unit_rational_eigenvalue(),
    };
    Ok((step, b))
}

/// [`power_step`] with its conclusion enforced: the power is nontrivial, has at most a
/// quarter of the input degree, and no eigenvalue in F_q other than 1.
pub fn reduce_degree(a: &Mat, primes: &[u64]) -> Result<(ReductionStep, Mat)> {
    let (step, b) = power_step(a, primes)?;
    if !step.holds() {
        return Err(Error::HypothesisFailure(format!(
            "degree {} -> {} via prime {} (counts {:?}, F_q-eigenvalues only 1: {})",
            step.input_degree, step.output_degree, step.prime, step.counts, step.rational_eigenvalues_one
        )));
    }
    Ok((step, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::Fe;
    use crate::poly::Poly;

    fn f(p: u32, e: u32) -> Field {
        Field::new(p, e, None).unwrap()
    }

    fn brute_order_mod(q: u64, m: u64) -> u64 {
        let mut x = q % m;
        let mut k = 1;
        while x != 1 {
            x = x * q % m;
            k += 1;
        }
        k
    }

    #[test]
    fn min_degree_examples() {
        assert_eq!(min_degree_for_root(5, &f(2, 1)).unwrap(), 4);
        assert_eq!(min_degree_for_root(3, &f(2, 2)).unwrap(), 1);
        assert_eq!(min_degree_for_root(7, &f(2, 1)).unwrap(), 3);
        assert!(min_degree_for_root(6, &f(2, 1)).is_err());
        for m in [3u64, 5, 7, 11, 13, 17, 19, 23] {
            assert_eq!(min_degree_for_root(m, &f(2, 1)).unwrap(), brute_order_mod(2, m));
        }
    }

    #[test]
    fn pblock_examples() {
        let f2 = f(2, 1);
        let phi3 = Poly::new(&f2, vec![Fe::ONE, Fe::ONE, Fe::ONE]);
        assert_eq!(build_pblock(&[3], 2, &f2).unwrap(), Mat::companion(&phi3).unwrap());
        let a = build_pblock(&[3, 5], 6, &f2).unwrap();
        assert_eq!(a.degree(), 6);
        let b = build_pblock(&[3, 5], 7, &f2).unwrap();
        assert_eq!((b.rows(), b.degree()), (7, 6));
        assert!(build_pblock(&[3, 5], 5, &f2).is_err());
        assert!(is_p_matrix(&a, &[3, 5]).unwrap());
        assert!(!is_p_matrix(&Mat::identity(&f2, 4), &[3]).unwrap());
        assert!(!is_p_matrix(&Mat::companion(&phi3).unwrap(), &[3, 5]).unwrap());
    }

    #[test]
    fn companion_degree_lower_bound() {
        // any matrix with a primitive m-th root eigenvalue has degree at least o_m(q)
        for (p, e) in [(2, 1), (3, 1), (2, 2), (5, 1)] {
            let fl = f(p, e);
            for m in [3u64, 5, 7, 11, 13] {
                if m % p as u64 == 0 {
                    continue;
                }
                let c = Mat::companion(&least_cyclotomic_factor(&fl, m)).unwrap();
                let padded = Mat::block_diag(&fl, &[c, Mat::identity(&fl, 2)]);
                assert!(padded.degree() as u64 >= min_degree_for_root(m, &fl).unwrap());
            }
        }
    }

    #[test]
    fn reduction_examples() {
        let f2 = f(2, 1);
        // n(3) = 2 exceeds 6/4
        let a = build_pblock(&[3, 5], 6, &f2).unwrap();
        let (step, _) = power_step(&a, &[3, 5]).unwrap();
        assert_eq!(step.counts, vec![(3, 2), (5, 4)]);
        assert_eq!((step.prime, step.order, step.exponent), (3, 15, 5));
        assert!(matches!(reduce_degree(&a, &[3, 5]), Err(Error::HypothesisFailure(_))));

        let a = build_pblock(&[3, 11], 12, &f2).unwrap();
        let (step, b) = reduce_degree(&a, &[3, 11]).unwrap();
        assert_eq!(step.counts, vec![(3, 2), (11, 10)]);
        assert_eq!((step.prime, step.exponent, step.output_degree), (3, 11, 2));
        let c3 = build_pblock(&[3], 2, &f2).unwrap();
        assert_eq!(b, Mat::block_diag(&f2, &[c3.pow(11), Mat::identity(&f2, 10)]));

        let a = build_pblock(&[3], 2, &f2).unwrap();
        let (step, b) = power_step(&a, &[3]).unwrap();
        assert_eq!((step.exponent, b), (1, a.clone()));
        assert!(matches!(reduce_degree(&a, &[3]), Err(Error::HypothesisFailure(_))));
        assert!(matches!(reduce_degree(&Mat::identity(&f2, 3), &[3]), Err(Error::Precondition(_))));
    }

    #[test]
    fn power_matches_blockwise() {
        let f3 = f(3, 1);
        let blocks: Vec<Mat> = [5u64, 7, 13]
            .iter()
            .map(|&l| Mat::companion(&least_cyclotomic_factor(&f3, l)).unwrap())
            .collect();
        let a = Mat::block_diag(&f3, &blocks);
        let (step, b) = power_step(&a, &[5, 7, 13]).unwrap();
        let oracle: Vec<Mat> = blocks.iter().map(|m| m.pow(step.exponent)).collect();
        assert_eq!(b, Mat::block_diag(&f3, &oracle));
    }

    #[test]
    fn cover_groups_primes() {
        let f2 = f(2, 1);
        // o_3 = 2, o_5 = 4, o_7 = 3: {3, 5} share degree 4
        let cover = min_cover(&[3, 5, 7], &f2).unwrap();
        let total: u64 = cover.iter().map(|(_, d)| d).sum();
        assert_eq!(total, 7);
        let m = min_pmatrix(&[3, 5, 7], &f2).unwrap();
        assert_eq!(m.degree(), 7);
        assert!(is_p_matrix(&m, &[3, 5, 7]).unwrap());
    }
}

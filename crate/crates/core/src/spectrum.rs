//! Cayley-graph spectra, the diameter bound on the spectral gap, and exact lazy
//! random walks.
//!
//! Floating-point routines are generic over the scalar; `f64` aliases sit at the end.

use nalgebra::{DMatrix, RealField};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Closure, GenSet};

pub const SPECTRUM_CAP: usize = 4096;
pub const EIGEN_TOL: f64 = 1e-9;
pub const DEFAULT_KAPPA_MIX: f64 = 4.0;

/// 1 / (diam² s), exactly.
pub fn spectral_gap_lower(diam: u64, s: u64) -> Result<BigRational> {
    if diam == 0 || s == 0 {
        return Err(Error::Precondition("diameter and generator count must be positive".into()));
    }
    Ok(BigRational::new(BigInt::one(), BigInt::from(diam) * BigInt::from(diam) * BigInt::from(s)))
}

/// κ_mix ln(order) / gap.
pub fn mixing_time_upper<T: Float>(gap: T, order: T, kappa_mix: T) -> Result<T> {
    if gap <= T::zero() {
        return Err(Error::Precondition("spectral gap must be positive".into()));
    }
    Ok(kappa_mix * order.ln() / gap)
}

/// log₂ of q^{-C n (ln n + ln q)³}, a formula evaluation with a user constant.
pub fn corollary_gap_log2(q: u32, n: usize, c: f64) -> f64 {
    let l = (n as f64).ln() + (q as f64).ln();
    -c * n as f64 * l.powi(3) * (q as f64).log2()
}

/// Right multiplication by each alphabet letter, as element indices.
fn neighbour_table(cl: &Closure, gs: &GenSet) -> Result<Vec<Vec<usize>>> {
    cl.elements
        .iter()
        .map(|g| {
            gs.alphabet()
                .iter()
                .map(|(_, s)| cl.index.get(&g.mul(s)).copied().ok_or_else(|| Error::Internal("closure not closed".into())))
                .collect()
        })
        .collect()
}

fn closure_within(gs: &GenSet, cap: usize) -> Result<Closure> {
    Closure::build(gs, cap).map_err(|e| match e {
        Error::FrontierCap(c) => Error::BudgetExhausted(format!("group exceeds the cap of {c} elements")),
        e => e,
    })
}

/// Normalised adjacency (1/|S ∪ S⁻¹|) Σ_s P_s of the Cayley graph.
pub fn cayley_adjacency<T: RealField + Float>(gs: &GenSet, cl: &Closure) -> Result<DMatrix<T>> {
    let table = neighbour_table(cl, gs)?;
    let n = cl.len();
    let w = T::one() / T::from(gs.alphabet().len()).unwrap();
    let mut a = DMatrix::<T>::zeros(n, n);
    for (i, row) in table.iter().enumerate() {
        for &j in row {
            a[(i, j)] += w;
        }
    }
    Ok(a)
}

/// Eigenvalues of the normalised adjacency operator, descending.
pub fn exact_cayley_spectrum<T: RealField + Float>(gs: &GenSet, cap: usize) -> Result<Vec<T>> {
    let cl = closure_within(gs, cap.min(SPECTRUM_CAP))?;
    let a = cayley_adjacency::<T>(gs, &cl)?;
    // 10⁻⁹, or a few ulps for narrower scalars
    let tol = Float::max(T::from(EIGEN_TOL).unwrap(), T::from(64.0).unwrap() * T::epsilon());
    if (&a - a.transpose()).amax() > tol {
        return Err(Error::Internal("adjacency is not symmetric".into()));
    }
    let eig = a.symmetric_eigen();
    let mut ev: Vec<T> = eig.eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    // Gershgorin: rows sum to 1 with nonnegative entries
    if ev.iter().any(|&x| Float::abs(x) > T::one() + tol) {
        return Err(Error::Internal("eigenvalue outside [-1, 1]".into()));
    }
    Ok(ev)
}

/// Exact lazy-walk distributions μ^{(0)}, μ^{(1)}, ... over an enumerated group, with
/// μ = ½ δ_e + (1 / 2|S|) Σ_s δ_s.
pub struct LazyWalk {
    table: Vec<Vec<usize>>,
    dist: Vec<BigRational>,
    step_weight: BigRational,
    pub steps: usize,
}

impl LazyWalk {
    pub fn new(gs: &GenSet, cap: usize) -> Result<LazyWalk> {
        let cl = closure_within(gs, cap)?;
        let table = neighbour_table(&cl, gs)?;
        let mut dist = vec![BigRational::zero(); cl.len()];
        dist[0] = BigRational::one();
        let step_weight = BigRational::new(BigInt::one(), BigInt::from(2 * gs.alphabet().len()));
        Ok(LazyWalk { table, dist, step_weight, steps: 0 })
    }

    pub fn order(&self) -> usize {
        self.dist.len()
    }

    pub fn distribution(&self) -> &[BigRational] {
        &self.dist
    }

    pub fn step(&mut self) {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let mut next: Vec<BigRational> = self.dist.iter().map(|p| p * &half).collect();
        for (i, p) in self.dist.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let share = p * &self.step_weight;
            for &j in &self.table[i] {
                next[j] += &share;
            }
        }
        self.dist = next;
        self.steps += 1;
    }

    /// max_g |μ^{(k)}(g) - 1/|G||
    pub fn linf_distance(&self) -> BigRational {
        let u = BigRational::new(BigInt::one(), BigInt::from(self.order()));
        self.dist.iter().map(|p| (p - &u).abs()).max().unwrap()
    }

    /// The ℓ∞ distance is at most 1/(2|G|).
    pub fn mixed(&self) -> bool {
        self.linf_distance() <= BigRational::new(BigInt::one(), BigInt::from(2 * self.order()))
    }
}

/// ℓ∞ distance of μ^{(k)} from uniform.
pub fn lazy_walk_distance(gs: &GenSet, k: usize, cap: usize) -> Result<BigRational> {
    let mut w = LazyWalk::new(gs, cap)?;
    for _ in 0..k {
        w.step();
    }
    Ok(w.linf_distance())
}

/// Least k with ‖μ^{(k)} - U‖∞ ≤ 1/(2|G|), searched up to `kmax`; distances per step.
pub fn empirical_mixing_time(gs: &GenSet, kmax: usize, cap: usize) -> Result<(Option<usize>, Vec<f64>)> {
    let mut w = LazyWalk::new(gs, cap)?;
    let mut trace = Vec::new();
    loop {
        trace.push(w.linf_distance().to_f64().unwrap_or(f64::NAN));
        if w.mixed() {
            return Ok((Some(w.steps), trace));
        }
        if w.steps >= kmax {
            return Ok((None, trace));
        }
        w.step();
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub order: usize,
    pub generators: usize,
    pub diameter: u32,
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    /// 1/(diam² |S|) as an exact fraction
    pub diam_gap_bound: String,
    pub gap_bound_holds: bool,
    pub kappa_mix: f64,
    pub empirical_mixing: Option<usize>,
    pub bound_mixing: f64,
    pub mixing_within_bound: Option<bool>,
    pub walk_distances: Vec<f64>,
}

/// Spectrum, gap bound and mixing time for one enumerable group. |S| counts the
/// distinct matrices of S ∪ S⁻¹, the degree of the Cayley graph.
pub fn spectrum_report(gs: &GenSet, walk_kmax: usize, kappa_mix: f64) -> Result<SpectrumReport> {
    let cl = closure_within(gs, SPECTRUM_CAP)?;
    let ev = exact_cayley_spectrum::<f64>(gs, SPECTRUM_CAP)?;
    let gap = if ev.len() > 1 { ev[0] - ev[1] } else { 1.0 };
    let diameter = cl.diameter();
    let s = gs.alphabet().len() as u64;
    let bound = spectral_gap_lower(diameter.max(1) as u64, s)?;
    let bound_f = bound.to_f64().unwrap();
    let (empirical, walk) = empirical_mixing_time(gs, walk_kmax, SPECTRUM_CAP)?;
    let bound_mixing = mixing_time_upper(gap, cl.len() as f64, kappa_mix)?;
    Ok(SpectrumReport {
        order: cl.len(),
        generators: s as usize,
        diameter,
        gap_bound_holds: gap >= bound_f - EIGEN_TOL,
        eigenvalues: ev,
        gap,
        diam_gap_bound: bound.to_string(),
        kappa_mix,
        mixing_within_bound: empirical.map(|k| k as f64 <= bound_mixing),
        empirical_mixing: empirical,
        bound_mixing,
        walk_distances: walk,
    })
}

pub fn spectrum_f64(gs: &GenSet) -> Result<Vec<f64>> {
    exact_cayley_spectrum::<f64>(gs, SPECTRUM_CAP)
}

pub fn mixing_time_upper_f64(gap: f64, order: f64) -> Result<f64> {
    mixing_time_upper(gap, order, DEFAULT_KAPPA_MIX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::Field;
    use crate::matfq::Mat;

    fn hexagon() -> GenSet {
        let f = Field::prime(2).unwrap();
        GenSet::new(
            "hex",
            vec![Mat::from_ints(&f, &[vec![1, 1], vec![0, 1]]), Mat::from_ints(&f, &[vec![0, 1], vec![1, 0]])],
        )
        .unwrap()
    }

    fn order_two() -> GenSet {
        let f = Field::prime(2).unwrap();
        GenSet::new("c2", vec![Mat::from_ints(&f, &[vec![0, 1], vec![1, 0]])]).unwrap()
    }

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn gap_formula() {
        assert_eq!(spectral_gap_lower(1, 1).unwrap(), q(1, 1));
        assert_eq!(spectral_gap_lower(3, 2).unwrap(), q(1, 18));
        assert_eq!(spectral_gap_lower(10, 4).unwrap(), q(1, 400));
        assert!(spectral_gap_lower(0, 2).is_err());
    }

    #[test]
    fn mixing_formula() {
        let e = std::f64::consts::E;
        assert!((mixing_time_upper(1.0, e, 3.0).unwrap() - 3.0).abs() < 1e-12);
        let v = mixing_time_upper(1.0 / 18.0, 6.0, 2.0).unwrap();
        assert!((v - 18.0 * 2.0 * 6f64.ln()).abs() < 1e-9);
        assert!(mixing_time_upper(0.0, 6.0, 1.0).is_err());
        let v32 = mixing_time_upper(0.5f32, 6.0f32, 1.0f32).unwrap();
        assert!((v32 - 2.0 * 6f32.ln()).abs() < 1e-5);
    }

    #[test]
    fn known_spectra() {
        let ev = spectrum_f64(&order_two()).unwrap();
        assert!((ev[0] - 1.0).abs() < EIGEN_TOL && (ev[1] + 1.0).abs() < EIGEN_TOL);
        let ev = spectrum_f64(&hexagon()).unwrap();
        let mut cos: Vec<f64> = (0..6).map(|k| (2.0 * std::f64::consts::PI * k as f64 / 6.0).cos()).collect();
        cos.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in ev.iter().zip(&cos) {
            assert!((a - b).abs() < EIGEN_TOL, "{ev:?}");
        }
        let ev32 = exact_cayley_spectrum::<f32>(&hexagon(), 100).unwrap();
        assert!((ev32[1] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn walks() {
        assert_eq!(lazy_walk_distance(&hexagon(), 0, 100).unwrap(), q(5, 6));
        assert_eq!(lazy_walk_distance(&order_two(), 1, 100).unwrap(), q(0, 1));
        let (t, _) = empirical_mixing_time(&order_two(), 10, 100).unwrap();
        assert_eq!(t, Some(1));
        let mut w = LazyWalk::new(&hexagon(), 100).unwrap();
        for _ in 0..5 {
            w.step();
            let total: BigRational = w.distribution().iter().sum();
            assert_eq!(total, q(1, 1));
        }
        let r = spectrum_report(&hexagon(), 200, DEFAULT_KAPPA_MIX).unwrap();
        assert_eq!(r.diameter, 3);
        assert!(r.gap_bound_holds);
        assert_eq!(r.mixing_within_bound, Some(true), "{r:?}");
    }

    #[test]
    fn capped() {
        let f = Field::prime(5).unwrap();
        let gs = GenSet::new(
            "sl3f5",
            vec![
                Mat::from_ints(&f, &[vec![1, 1, 0], vec![0, 1, 0], vec![0, 0, 1]]),
                Mat::from_ints(&f, &[vec![0, 0, 1], vec![1, 0, 0], vec![0, 1, 0]]),
            ],
        )
        .unwrap();
        assert!(matches!(spectrum_f64(&gs), Err(Error::BudgetExhausted(_))));
    }
}

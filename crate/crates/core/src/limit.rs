//! Limiting laws `η_m^{*d}` (sums of `d` independent uniform `m`-th roots of
//! unity, or of uniform points on the circle when `m = ∞`), their mixtures,
//! the constants `c_{m,d}`, and the number-theoretic side conditions.

use std::collections::BTreeMap;

use num::bigint::{BigInt, BigUint};
use num::complex::Complex64;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::number_theory::{factorize, mobius, rational_to_f64, root_of_unity, CompensatedSum};
use crate::seed::rng_for;

pub use crate::number_theory::{euler_totient, mobius as mobius_function};

/// Atoms closer than this are merged.
pub const DEDUP_TOLERANCE: f64 = 1e-9;

/// Samples per Monte Carlo chunk; chunk `i` draws from `rng_for(seed, [i])`.
pub const MC_CHUNK: u64 = 1 << 16;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Complex64,
    pub weight: BigRational,
}

/// A finitely supported measure with exact rational weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicDistribution {
    pub atoms: Vec<Atom>,
}

impl AtomicDistribution {
    /// Merges atoms within [`DEDUP_TOLERANCE`]; weights are summed, never
    /// dropped. Output is sorted by `(re, im)` of the representatives.
    pub fn from_weighted(mut points: Vec<(Complex64, BigRational)>) -> Self {
        points.sort_by(|a, b| {
            a.0.re
                .total_cmp(&b.0.re)
                .then(a.0.im.total_cmp(&b.0.im))
        });
        let mut atoms: Vec<Atom> = Vec::new();
        for (z, w) in points {
            let mut merged = false;
            for atom in atoms.iter_mut().rev() {
                if atom.location.re < z.re - DEDUP_TOLERANCE {
                    break;
                }
                if (atom.location - z).norm() <= DEDUP_TOLERANCE {
                    atom.weight += &w;
                    merged = true;
                    break;
                }
            }
            if !merged {
                atoms.push(Atom { location: z, weight: w });
            }
        }
        atoms.retain(|a| !a.weight.is_zero());
        atoms.sort_by(|a, b| {
            a.location
                .re
                .total_cmp(&b.location.re)
                .then(a.location.im.total_cmp(&b.location.im))
        });
        Self { atoms }
    }

    pub fn total_weight(&self) -> BigRational {
        self.atoms
            .iter()
            .fold(BigRational::zero(), |acc, a| acc + &a.weight)
    }

    pub fn locations(&self) -> Vec<Complex64> {
        self.atoms.iter().map(|a| a.location).collect()
    }

    /// Exact weight of atoms within distance `tol` of `z`.
    pub fn mass_near(&self, z: Complex64, tol: f64) -> BigRational {
        self.atoms
            .iter()
            .filter(|a| (a.location - z).norm() <= tol)
            .fold(BigRational::zero(), |acc, a| acc + &a.weight)
    }

    /// `Σ w · a^k · conj(a)^l`.
    pub fn mixed_moment(&self, k: u32, l: u32) -> Complex64 {
        let mut acc = CompensatedSum::default();
        for a in &self.atoms {
            let term = a.location.powu(k) * a.location.conj().powu(l);
            acc.add(term * rational_to_f64(&a.weight));
        }
        acc.value()
    }

    pub fn scaled(&self, factor: &BigRational) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location,
                    weight: &a.weight * factor,
                })
                .collect(),
        }
    }
}

/// The order parameter of a limit law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitOrder {
    Finite(u64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitSpec {
    pub order: LimitOrder,
    pub d: u32,
}

impl LimitSpec {
    pub fn new(order: LimitOrder, d: u32) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d must be at least 1"));
        }
        if order == LimitOrder::Finite(0) {
            return Err(Error::invalid("root-of-unity order must be at least 1"));
        }
        Ok(Self { order, d })
    }

    /// One draw: a sum of `d` independent uniform points of `R_m` (or the
    /// circle).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let mut acc = CompensatedSum::default();
        for _ in 0..self.d {
            let z = match self.order {
                LimitOrder::Finite(m) => root_of_unity(rng.gen_range(0..m) as u128, m as u128),
                LimitOrder::Infinite => {
                    let t: f64 = rng.gen();
                    let (s, c) = (std::f64::consts::TAU * t).sin_cos();
                    Complex64::new(c, s)
                }
            };
            acc.add(z);
        }
        acc.value()
    }

    /// Mixed moment `∫ z^k conj(z)^l`. For `m = ∞` this is evaluated on the
    /// proxy `η_{k+l+1}^{*d}`, which agrees exactly up to that degree.
    pub fn mixed_moment(&self, k: u32, l: u32, atom_cap: u64) -> Result<Complex64> {
        let m = match self.order {
            LimitOrder::Finite(m) => m,
            LimitOrder::Infinite => (k + l + 1) as u64,
        };
        Ok(eta_atoms(m, self.d, atom_cap)?.mixed_moment(k, l))
    }
}

fn check_atom_cap(m: u64, d: u32, cap: u64) -> Result<()> {
    if m == 0 || d == 0 {
        return Err(Error::invalid(format!("need m ≥ 1 and d ≥ 1, got m={m}, d={d}")));
    }
    match m.checked_pow(d) {
        Some(v) if v <= cap => Ok(()),
        _ => Err(Error::cap("atom count m^d", format!("{m}^{d}"), cap)),
    }
}

/// `η_m^{*d}` as exact atoms.
///
/// Tuples are enumerated as multisets `k_1 ≤ … ≤ k_d` carrying their
/// multinomial multiplicity, which is the same measure as summing over all
/// `m^d` ordered tuples.
pub fn eta_atoms(m: u64, d: u32, atom_cap: u64) -> Result<AtomicDistribution> {
    check_atom_cap(m, d, atom_cap)?;
    let roots: Vec<Complex64> = (0..m).map(|k| root_of_unity(k as u128, m as u128)).collect();
    let total = BigInt::from(m).pow(d);
    let factorials: Vec<BigUint> = (0..=d)
        .scan(BigUint::one(), |acc, i| {
            if i > 0 {
                *acc *= BigUint::from(i);
            }
            Some(acc.clone())
        })
        .collect();
    let mut points = Vec::new();
    let mut counts = vec![0u32; m as usize];
    multisets(m as usize, d, 0, &mut counts, &mut |counts| {
        let mut acc = CompensatedSum::default();
        let mut denom = BigUint::one();
        for (k, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                acc.add(roots[k]);
            }
            denom *= &factorials[c as usize];
        }
        let mult = &factorials[d as usize] / denom;
        points.push((
            acc.value(),
            BigRational::new(BigInt::from(mult), total.clone()),
        ));
    });
    Ok(AtomicDistribution::from_weighted(points))
}

fn multisets(m: usize, remaining: u32, start: usize, counts: &mut [u32], visit: &mut dyn FnMut(&[u32])) {
    if remaining == 0 {
        visit(counts);
        return;
    }
    for k in start..m {
        counts[k] += 1;
        multisets(m, remaining - 1, k, counts, visit);
        counts[k] -= 1;
    }
}

/// The sumset `dR_m` (distinct atom locations).
pub fn sumset_roots(m: u64, d: u32, atom_cap: u64) -> Result<Vec<Complex64>> {
    Ok(eta_atoms(m, d, atom_cap)?.locations())
}

/// Exact mass of `η_n^{*d}` at `point`.
///
/// A point of modulus `d` is hit only when all `d` roots coincide (equality
/// in the triangle inequality), so its mass is `1/n^d` if it is `d` times an
/// `n`-th root of unity and 0 otherwise. Other points fall back to the atoms.
pub fn eta_point_mass(n: u64, d: u32, point: Complex64, atom_cap: u64) -> Result<BigRational> {
    check_atom_cap(n, d, atom_cap)?;
    if (point.norm() - d as f64).abs() <= DEDUP_TOLERANCE {
        let unit = point / d as f64;
        let turns = unit.arg().rem_euclid(std::f64::consts::TAU) / std::f64::consts::TAU;
        let k = (turns * n as f64).round() as u64 % n;
        let candidate = root_of_unity(k as u128, n as u128) * d as f64;
        return Ok(if (candidate - point).norm() <= DEDUP_TOLERANCE {
            BigRational::new(BigInt::one(), BigInt::from(n).pow(d))
        } else {
            BigRational::zero()
        });
    }
    Ok(eta_atoms(n, d, atom_cap)?.mass_near(point, DEDUP_TOLERANCE))
}

/// `g_m(n) = 1/n^d` if `m | n`, else 0.
pub fn g_function(m: u64, d: u32, n: u64) -> BigRational {
    if n.is_multiple_of(m) {
        BigRational::new(BigInt::one(), BigInt::from(n).pow(d))
    } else {
        BigRational::zero()
    }
}

/// Smallest nonzero modulus in `dR_m`.
pub fn min_nonzero_modulus(m: u64, d: u32, atom_cap: u64) -> Result<f64> {
    eta_atoms(m, d, atom_cap)?
        .atoms
        .iter()
        .map(|a| a.location.norm())
        .filter(|&r| r > DEDUP_TOLERANCE)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::invalid("sumset has no nonzero element"))
}

/// `d^{1−φ(m)}`, the lower bound on nonzero sums of `d` roots of unity.
pub fn root_sum_lower_bound(m: u64, d: u32) -> f64 {
    (d as f64).powf(1.0 - euler_totient(m) as f64)
}

/// Closed-ball mass `η_m^{*d}(B̄(z, r))`. The boundary carries a `1e-12`
/// allowance for rounding in the atom locations.
pub fn small_ball_mass(m: u64, d: u32, z: Complex64, r: f64, atom_cap: u64) -> Result<BigRational> {
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("radius must be non-negative, got {r}")));
    }
    Ok(eta_atoms(m, d, atom_cap)?.mass_near(z, r + 1e-12))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LogConstant {
    Finite(f64),
    /// `0 ∈ dR_m`, so `log|z|` is not integrable.
    MinusInfinity,
}

impl LogConstant {
    pub fn finite(&self) -> Option<f64> {
        match self {
            LogConstant::Finite(v) => Some(*v),
            LogConstant::MinusInfinity => None,
        }
    }
}

/// `c_{m,d} = ∫ log|z| dη_m^{*d}`.
pub fn c_constant(m: u64, d: u32, atom_cap: u64) -> Result<LogConstant> {
    let atoms = eta_atoms(m, d, atom_cap)?;
    let mut acc = CompensatedSum::default();
    for a in &atoms.atoms {
        let r = a.location.norm();
        if r <= DEDUP_TOLERANCE {
            return Ok(LogConstant::MinusInfinity);
        }
        acc.add(Complex64::new(rational_to_f64(&a.weight) * r.ln(), 0.0));
    }
    Ok(LogConstant::Finite(acc.value().re))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub samples: u64,
}

/// Monte Carlo estimate of `c_{∞,d} = E log|Z_1 + … + Z_d|` with `Z_j`
/// uniform on the circle. Chunks of [`MC_CHUNK`] samples are seeded by
/// index and reduced in order, so the result ignores the worker count.
pub fn c_infinity(d: u32, samples: u64, seed: u64) -> Result<McEstimate> {
    if d == 0 {
        return Err(Error::invalid("d must be at least 1"));
    }
    if d == 1 {
        return Ok(McEstimate {
            estimate: 0.0,
            standard_error: 0.0,
            samples,
        });
    }
    if samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let spec = LimitSpec::new(LimitOrder::Infinite, d)?;
    let chunks = samples.div_ceil(MC_CHUNK);
    let partials: Vec<(f64, f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng_for(seed, &[c]);
            let n = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut sum = CompensatedSum::default();
            let mut sum_sq = CompensatedSum::default();
            for _ in 0..n {
                let v = spec.sample(&mut rng).norm().ln();
                sum.add(Complex64::new(v, 0.0));
                sum_sq.add(Complex64::new(v * v, 0.0));
            }
            let (s, q) = (sum.value().re, sum_sq.value().re);
            (s, q, n as f64, 0.0)
        })
        .collect();
    let mut sum = CompensatedSum::default();
    let mut sum_sq = CompensatedSum::default();
    for (s, q, _, _) in &partials {
        sum.add(Complex64::new(*s, 0.0));
        sum_sq.add(Complex64::new(*q, 0.0));
    }
    let n = samples as f64;
    let mean = sum.value().re / n;
    let var = ((sum_sq.value().re - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate {
        estimate: mean,
        standard_error: (var / n).sqrt(),
        samples,
    })
}

/// `log(d)/2 − γ/2`, the large-`d` approximation of `c_{∞,d}`.
pub fn c_infinity_asymptote(d: u32) -> f64 {
    (d as f64).ln() / 2.0 - EULER_GAMMA / 2.0
}

/// Whether `0 ∈ dR_n`, i.e. `d` is a non-negative integer combination of
/// the prime factors of `n`.
pub fn lam_leung_zero_in_sumset(n: u64, d: u64) -> Result<bool> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let primes: Vec<u64> = factorize(n)
        .into_iter()
        .map(|(p, _)| p)
        .filter(|&p| p <= d)
        .collect();
    Ok(representable(d, &primes))
}

fn representable(d: u64, parts: &[u64]) -> bool {
    let d = d as usize;
    let mut reach = vec![false; d + 1];
    reach[0] = true;
    for &p in parts {
        let p = p as usize;
        for v in p..=d {
            if reach[v - p] {
                reach[v] = true;
            }
        }
    }
    reach[d]
}

/// Fraction of `n ≤ N` with `0 ∉ dR_n`.
pub fn alpha_density_estimate(d: u64, big_n: u64) -> Result<BigRational> {
    if big_n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let small_primes: Vec<u64> = (2..=d).filter(|&p| factorize(p).len() == 1 && factorize(p)[0].1 == 1).collect();
    let mut cache: BTreeMap<Vec<u64>, bool> = BTreeMap::new();
    let mut count = 0u64;
    for n in 1..=big_n {
        let key: Vec<u64> = small_primes.iter().copied().filter(|p| n % p == 0).collect();
        let zero = *cache
            .entry(key)
            .or_insert_with_key(|k| representable(d, k));
        if !zero {
            count += 1;
        }
    }
    Ok(BigRational::new(BigInt::from(count), BigInt::from(big_n)))
}

/// `sup_{n ≤ N} |m^d Σ_{k≤K} μ(k) g_{km}(n) − δ_m(n)|`; the point at
/// infinity contributes 0.
pub fn mobius_approx_error(m: u64, d: u32, k_max: u64, big_n: u64) -> Result<BigRational> {
    if m == 0 || k_max == 0 || big_n == 0 {
        return Err(Error::invalid("m, K and N must be at least 1"));
    }
    // At n = m·q the sum collapses to (m/n)^d · Σ_{k ≤ K, k | q} μ(k).
    let mus: Vec<i64> = (1..=k_max).map(|k| mobius(k) as i64).collect();
    let mut sup = BigRational::zero();
    for q in 1..=big_n / m {
        let s: i64 = (1..=k_max.min(q))
            .filter(|k| q % k == 0)
            .map(|k| mus[(k - 1) as usize])
            .sum();
        let delta = i64::from(q == 1);
        if s == delta {
            continue;
        }
        let err = if q == 1 {
            BigRational::from_integer(BigInt::from((s - delta).abs()))
        } else {
            BigRational::new(BigInt::from(s.abs()), BigInt::from(q).pow(d))
        };
        if err > sup {
            sup = err;
        }
    }
    Ok(sup)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub order: u64,
    pub weight: BigRational,
    /// `η_order^{*d}` with unscaled weights.
    pub law: AtomicDistribution,
}

/// `Σ_m ρ({m}) η_m^{*d}`, with any missing mass assigned to `m = ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureLimit {
    pub d: u32,
    pub components: Vec<MixtureComponent>,
    pub infinite_weight: BigRational,
}

impl MixtureLimit {
    pub fn new(rho: &BTreeMap<u64, BigRational>, d: u32, atom_cap: u64) -> Result<Self> {
        let mut total = BigRational::zero();
        let mut components = Vec::new();
        for (&m, w) in rho {
            if w.is_negative() {
                return Err(Error::invalid(format!("negative weight {w} at order {m}")));
            }
            if w.is_zero() {
                continue;
            }
            total += w;
            components.push(MixtureComponent {
                order: m,
                weight: w.clone(),
                law: eta_atoms(m, d, atom_cap)?,
            });
        }
        if total > BigRational::one() {
            return Err(Error::invalid(format!("weights sum to {total} > 1")));
        }
        Ok(Self {
            d,
            components,
            infinite_weight: BigRational::one() - total,
        })
    }

    /// The finite part merged into one atomic measure of mass `1 − ρ({∞})`.
    pub fn finite_atoms(&self) -> AtomicDistribution {
        let points = self
            .components
            .iter()
            .flat_map(|c| {
                c.law
                    .atoms
                    .iter()
                    .map(move |a| (a.location, &a.weight * &c.weight))
            })
            .collect();
        AtomicDistribution::from_weighted(points)
    }

    pub fn mixed_moment(&self, k: u32, l: u32, atom_cap: u64) -> Result<Complex64> {
        let mut acc = self.finite_atoms().mixed_moment(k, l);
        if !self.infinite_weight.is_zero() {
            let inf = LimitSpec::new(LimitOrder::Infinite, self.d)?.mixed_moment(k, l, atom_cap)?;
            acc += inf * rational_to_f64(&self.infinite_weight);
        }
        Ok(acc)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Complex64> {
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        for c in &self.components {
            cum += rational_to_f64(&c.weight);
            if u < cum {
                return Ok(LimitSpec::new(LimitOrder::Finite(c.order), self.d)?.sample(rng));
            }
        }
        if self.infinite_weight.is_zero() {
            // rounding at the top of the cumulative sum
            let last = self.components.last().expect("non-empty mixture");
            return Ok(LimitSpec::new(LimitOrder::Finite(last.order), self.d)?.sample(rng));
        }
        Ok(LimitSpec::new(LimitOrder::Infinite, self.d)?.sample(rng))
    }
}

/// Draws `count` points of a limit law with a seeded generator.
pub fn sample_points(spec: &LimitSpec, count: usize, rng: &mut dyn RngCore) -> Vec<Complex64> {
    (0..count).map(|_| spec.sample(rng)).collect()
}

//! Exact moments of the random spectral moment
//! `W_{k,z} = (1/|G|) Σ_γ |λ(γ) − z|^{2k}`.
//!
//! Expanding the `2k` factors and averaging over characters turns `W` into a
//! sum over index patterns `(P, j)` of indicator events
//! `Σ_i p(k,i,j) X_i = 0`. The engine groups patterns by the pair of sizes
//! `(|P ∩ [k]|, |P \ [k]|)`, which fixes the `z`-dependence, and by the
//! resulting vector `p`, which fixes the event. Everything is accumulated as
//! exact rationals and only converted to floating point at the end.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Neg;

use num::bigint::BigInt;
use num::complex::{Complex, Complex64};
use num::rational::BigRational;
use num::{Num, One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::circulant::SparseCirculant;
use crate::error::{Error, Result};
use crate::group::FiniteAbelianGroup;
use crate::number_theory::{format_rational, gcd_all, rational_to_f64, CompensatedSum};
use crate::seed::rng_for;

/// A Gaussian rational `a + bi`.
pub type ExactComplex = Complex<BigRational>;

pub fn exact_complex(z: Complex64) -> Result<ExactComplex> {
    let conv = |v: f64| {
        BigRational::from_float(v).ok_or_else(|| Error::invalid(format!("non-finite value {v}")))
    };
    Ok(Complex::new(conv(z.re)?, conv(z.im)?))
}

pub fn exact_to_f64(z: &ExactComplex) -> Complex64 {
    Complex64::new(rational_to_f64(&z.re), rational_to_f64(&z.im))
}

/// `P ⊆ [2k]` with a colour `j_l ∈ [d]` for every `l ∈ P` (all 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexPattern {
    pub k: usize,
    pub assignment: BTreeMap<usize, usize>,
}

impl IndexPattern {
    pub fn new(k: usize, assignment: BTreeMap<usize, usize>) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if let Some((&l, _)) = assignment.iter().find(|(&l, &j)| l == 0 || l > 2 * k || j == 0) {
            return Err(Error::invalid(format!("position {l} or its colour is out of range")));
        }
        Ok(Self { k, assignment })
    }

    pub fn positions(&self) -> BTreeSet<usize> {
        self.assignment.keys().copied().collect()
    }

    /// `(|[k] \ P|, |{k+1..2k} \ P|)`.
    pub fn missing(&self) -> (u32, u32) {
        let first = self.assignment.keys().filter(|&&l| l <= self.k).count();
        let second = self.assignment.len() - first;
        ((self.k - first) as u32, (self.k - second) as u32)
    }
}

/// `p(k,i,j)` for `i = 1..d`.
pub fn p_counts(pattern: &IndexPattern, d: usize) -> Result<Vec<i64>> {
    let mut p = vec![0i64; d];
    for (&l, &j) in &pattern.assignment {
        if j > d {
            return Err(Error::invalid(format!("colour {j} exceeds d = {d}")));
        }
        p[j - 1] += if l <= pattern.k { 1 } else { -1 };
    }
    Ok(p)
}

/// `c(k,P,z) = (−z)^{|[k]\P|} (−z̄)^{|{k+1..2k}\P|}` with `0^0 = 1`.
pub fn c_coefficient<T>(k: usize, positions: &BTreeSet<usize>, z: &Complex<T>) -> Complex<T>
where
    T: Clone + Num + Neg<Output = T>,
{
    let first = positions.iter().filter(|&&l| (1..=k).contains(&l)).count();
    let second = positions.iter().filter(|&&l| (k + 1..=2 * k).contains(&l)).count();
    monomial(z, (k - first) as u32, (k - second) as u32)
}

/// `(−z)^a (−z̄)^b`.
fn monomial<T>(z: &Complex<T>, a: u32, b: u32) -> Complex<T>
where
    T: Clone + Num + Neg<Output = T>,
{
    let minus = -z.clone();
    minus.powu(a) * minus.conj().powu(b)
}

/// `P(Σ_i p_i X_i = 0) = τ_G(gcd(p))`.
pub fn event_probability(group: &FiniteAbelianGroup, p: &[i64]) -> BigRational {
    group.torsion_proportion(gcd_all(p.iter().copied()))
}

/// A 2×2 integer basis of a sublattice of `Z²` in Hermite form, with the
/// integer combinations expressing each basis row in terms of the inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeBasis {
    pub rows: [[i64; 2]; 2],
    /// `rows[r] = Σ_i coefficients[r][i] · vectors[i]`.
    pub coefficients: [Vec<i64>; 2],
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        return if a < 0 { (-a, -1, 0) } else { (a, 1, 0) };
    }
    let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
    (g, y, x - a.div_euclid(b) * y)
}

fn to_i64(v: i128) -> Result<i64> {
    i64::try_from(v).map_err(|_| Error::Overflow("lattice reduction"))
}

/// Hermite basis of the lattice spanned by `vectors`; `None` when every
/// vector is zero. The output is `[[a, b], [0, c]]` with `a, c ≥ 0` and
/// `0 ≤ b < c` whenever `c > 0`; if `a = 0` the single generator sits in the
/// first row.
pub fn generator_matrix_2x2(vectors: &[[i64; 2]]) -> Result<Option<LatticeBasis>> {
    let n = vectors.len();
    if vectors.iter().all(|v| v[0] == 0 && v[1] == 0) {
        return Ok(None);
    }
    let vecs: Vec<[i128; 2]> = vectors.iter().map(|v| [v[0] as i128, v[1] as i128]).collect();

    // first column: gcd of first coordinates and a row realising it
    let mut top = [0i128; 2];
    let mut top_c = vec![0i128; n];
    for (i, v) in vecs.iter().enumerate() {
        let (g, x, y) = ext_gcd(top[0], v[0]);
        if g == top[0] && y == 0 {
            continue;
        }
        top = [x * top[0] + y * v[0], x * top[1] + y * v[1]];
        for c in top_c.iter_mut() {
            *c *= x;
        }
        top_c[i] += y;
    }

    // second column: the lattice meets the y-axis in (0, h)
    let mut bottom = 0i128;
    let mut bottom_c = vec![0i128; n];
    for (i, v) in vecs.iter().enumerate() {
        let q = if top[0] == 0 { 0 } else { v[0] / top[0] };
        let y_part = v[1] - q * top[1];
        let (g, x, y) = ext_gcd(bottom, y_part);
        if g == bottom && y == 0 {
            continue;
        }
        bottom = g;
        for c in bottom_c.iter_mut() {
            *c *= x;
        }
        bottom_c[i] += y;
        for (c, t) in bottom_c.iter_mut().zip(&top_c) {
            *c -= y * q * t;
        }
    }

    if top[0] == 0 {
        let rows = [[0, to_i64(bottom)?], [0, 0]];
        let coefficients = [
            bottom_c.into_iter().map(to_i64).collect::<Result<_>>()?,
            vec![0; n],
        ];
        return Ok(Some(LatticeBasis { rows, coefficients }));
    }
    if bottom > 0 {
        let shift = top[1].div_euclid(bottom);
        top[1] -= shift * bottom;
        for (t, b) in top_c.iter_mut().zip(&bottom_c) {
            *t -= shift * b;
        }
    }
    let rows = [[to_i64(top[0])?, to_i64(top[1])?], [0, to_i64(bottom)?]];
    let coefficients = [
        top_c.into_iter().map(to_i64).collect::<Result<_>>()?,
        bottom_c.into_iter().map(to_i64).collect::<Result<_>>()?,
    ];
    Ok(Some(LatticeBasis { rows, coefficients }))
}

/// `(d1, d2)` with `d1` the gcd of the entries and `d2 = |det| / d1`.
pub fn snf_diagonal_2x2(a: [[i64; 2]; 2]) -> Result<(u64, u64)> {
    let d1 = gcd_all([a[0][0], a[0][1], a[1][0], a[1][1]]);
    if d1 == 0 {
        return Err(Error::invalid("the zero matrix has no Smith form diagonal here"));
    }
    let det = (a[0][0] as i128) * (a[1][1] as i128) - (a[0][1] as i128) * (a[1][0] as i128);
    let d2 = det.unsigned_abs() / d1 as u128;
    Ok((d1, u64::try_from(d2).map_err(|_| Error::Overflow("2x2 determinant"))?))
}

/// `Cov(1_{Σ p_i X_i = 0}, 1_{Σ p'_i X_i = 0})`.
pub fn covariance_exact(group: &FiniteAbelianGroup, p: &[i64], p_prime: &[i64]) -> Result<BigRational> {
    if p.len() != p_prime.len() {
        return Err(Error::invalid("pattern vectors must have the same length"));
    }
    let vectors: Vec<[i64; 2]> = p.iter().zip(p_prime).map(|(&a, &b)| [a, b]).collect();
    let joint = match generator_matrix_2x2(&vectors)? {
        None => BigRational::one(),
        Some(basis) => {
            let (d1, d2) = snf_diagonal_2x2(basis.rows)?;
            group.torsion_proportion(d1) * group.torsion_proportion(d2)
        }
    };
    Ok(joint - event_probability(group, p) * event_probability(group, p_prime))
}

/// Distribution of `p(k,·,j)` over all `j ∈ [d]^P` for a `P` with `plus`
/// positions in `[k]` and `minus` positions after it.
pub(crate) fn p_vector_tally(d: usize, plus: usize, minus: usize) -> BTreeMap<Vec<i64>, u64> {
    let mut tally: BTreeMap<Vec<i64>, u64> = [(vec![0; d], 1)].into();
    for step in 0..plus + minus {
        let sign = if step < plus { 1 } else { -1 };
        let mut next = BTreeMap::new();
        for (v, c) in &tally {
            for i in 0..d {
                let mut w = v.clone();
                w[i] += sign;
                *next.entry(w).or_insert(0) += c;
            }
        }
        tally = next;
    }
    tally
}

fn binomial(n: usize, r: usize) -> BigInt {
    (0..r).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

fn check_budget(what: &str, k: u32, d: usize, k_cap: u32, d_cap: u32) -> Result<()> {
    if k == 0 || d == 0 {
        return Err(Error::invalid("k and d must be at least 1"));
    }
    if k > k_cap || d > d_cap as usize {
        return Err(Error::Budget(format!(
            "{what} with k={k}, d={d} exceeds the configured budget k ≤ {k_cap}, d ≤ {d_cap}"
        )));
    }
    Ok(())
}

/// `E[W_{k,z}] = Σ_{a,b} Q_{a,b} (−z)^a (−z̄)^b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationPolynomial {
    pub k: u32,
    pub terms: BTreeMap<(u32, u32), BigRational>,
}

impl ExpectationPolynomial {
    pub fn evaluate_exact(&self, z: &ExactComplex) -> BigRational {
        let total = self
            .terms
            .iter()
            .fold(ExactComplex::zero(), |acc, (&(a, b), q)| {
                acc + monomial(z, a, b).scale(q.clone())
            });
        debug_assert!(total.im.is_zero());
        total.re
    }

    pub fn evaluate(&self, z: Complex64) -> f64 {
        let mut acc = CompensatedSum::default();
        for (&(a, b), q) in &self.terms {
            acc.add(monomial(&z, a, b) * rational_to_f64(q));
        }
        acc.value().re
    }
}

pub fn expectation_polynomial(
    group: &FiniteAbelianGroup,
    d: usize,
    k: u32,
    caps: &Caps,
) -> Result<ExpectationPolynomial> {
    check_budget("expectation", k, d, caps.expectation_k, caps.expectation_d)?;
    let ku = k as usize;
    let pairs: Vec<(usize, usize)> = (0..=ku).flat_map(|s| (0..=ku).map(move |t| (s, t))).collect();
    let terms = pairs
        .par_iter()
        .map(|&(s, t)| {
            let mut sum = BigRational::zero();
            let mut tau_cache: HashMap<u64, BigRational> = HashMap::new();
            for (p, count) in p_vector_tally(d, s, t) {
                let g = gcd_all(p.iter().copied());
                let tau = tau_cache
                    .entry(g)
                    .or_insert_with(|| group.torsion_proportion(g));
                sum += &*tau * BigInt::from(count);
            }
            let mult = binomial(ku, s) * binomial(ku, t);
            (((ku - s) as u32, (ku - t) as u32), sum * mult)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    Ok(ExpectationPolynomial { k, terms })
}

pub fn expected_moment_exact(
    group: &FiniteAbelianGroup,
    d: usize,
    k: u32,
    z: &ExactComplex,
    caps: &Caps,
) -> Result<BigRational> {
    Ok(expectation_polynomial(group, d, k, caps)?.evaluate_exact(z))
}

/// `Var(W_{k,z}) = Σ R_{a,b,a',b'} (−z)^a (−z̄)^b (−z̄)^{a'} (−z)^{b'}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePolynomial {
    pub k: u32,
    pub terms: BTreeMap<(u32, u32, u32, u32), BigRational>,
    /// Smallest covariance met during the expansion.
    pub min_covariance: BigRational,
}

impl VariancePolynomial {
    pub fn evaluate_exact(&self, z: &ExactComplex) -> BigRational {
        let total = self
            .terms
            .iter()
            .fold(ExactComplex::zero(), |acc, (&(a, b, a2, b2), q)| {
                acc + (monomial(z, a, b) * monomial(z, b2, a2)).scale(q.clone())
            });
        total.re
    }
}

pub fn variance_polynomial(
    group: &FiniteAbelianGroup,
    d: usize,
    k: u32,
    caps: &Caps,
) -> Result<VariancePolynomial> {
    check_budget("variance", k, d, caps.variance_k, caps.variance_d)?;
    let ku = k as usize;
    let tallies: BTreeMap<(usize, usize), Vec<(Vec<i64>, u64)>> = (0..=ku)
        .flat_map(|s| (0..=ku).map(move |t| (s, t)))
        .map(|(s, t)| ((s, t), p_vector_tally(d, s, t).into_iter().collect()))
        .collect();
    let keys: Vec<(usize, usize)> = tallies.keys().copied().collect();
    let quads: Vec<((usize, usize), (usize, usize))> = keys
        .iter()
        .flat_map(|&a| keys.iter().map(move |&b| (a, b)))
        .collect();
    let partials = quads
        .par_iter()
        .map(|&((s, t), (s2, t2))| -> Result<_> {
            let mut sum = BigRational::zero();
            let mut min_cov: Option<BigRational> = None;
            for (p, c) in &tallies[&(s, t)] {
                for (p2, c2) in &tallies[&(s2, t2)] {
                    let cov = covariance_exact(group, p, p2)?;
                    if min_cov.as_ref().is_none_or(|m| &cov < m) {
                        min_cov = Some(cov.clone());
                    }
                    sum += cov * BigInt::from(c * c2);
                }
            }
            let mult = binomial(ku, s) * binomial(ku, t) * binomial(ku, s2) * binomial(ku, t2);
            let key = ((ku - s) as u32, (ku - t) as u32, (ku - s2) as u32, (ku - t2) as u32);
            Ok((key, sum * mult, min_cov.unwrap_or_else(BigRational::zero)))
        })
        .collect::<Vec<_>>();
    let mut terms = BTreeMap::new();
    let mut min_covariance: Option<BigRational> = None;
    for part in partials {
        let (key, sum, m) = part?;
        if min_covariance.as_ref().is_none_or(|cur| &m < cur) {
            min_covariance = Some(m);
        }
        terms.insert(key, sum);
    }
    Ok(VariancePolynomial {
        k,
        terms,
        min_covariance: min_covariance.unwrap_or_else(BigRational::zero),
    })
}

/// Exact variance as a rational. A negative value below `−1e−12` signals an
/// inconsistency and is an error; anything above is clamped to `≥ 0`.
pub fn variance_exact(
    group: &FiniteAbelianGroup,
    d: usize,
    k: u32,
    z: &ExactComplex,
    caps: &Caps,
) -> Result<BigRational> {
    let v = variance_polynomial(group, d, k, caps)?.evaluate_exact(z);
    if rational_to_f64(&v) < -1e-12 {
        return Err(Error::Invalid(format!("variance evaluated to {}", format_rational(&v))));
    }
    Ok(if v.is_negative() { BigRational::zero() } else { v })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean: f64,
    pub standard_error: f64,
    pub samples: u64,
}

/// Monte Carlo estimate of `E[W_{k,z}]`; trial `t` uses `rng_for(seed, [t])`.
pub fn moment_monte_carlo(
    group: &FiniteAbelianGroup,
    d: usize,
    k: u32,
    z: Complex64,
    trials: u64,
    seed: u64,
    caps: &Caps,
) -> Result<SampleStats> {
    if trials < 2 {
        return Err(Error::invalid("need at least two trials"));
    }
    let values = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let mut rng = rng_for(seed, &[t]);
            let c = crate::circulant::sample_with_replacement(group, d, &mut rng)?;
            Ok(c.spectrum(caps.enumeration)?.shifted_moment(k, z))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(sample_stats(&values))
}

pub(crate) fn sample_stats(values: &[f64]) -> SampleStats {
    let n = values.len() as f64;
    let mean = crate::number_theory::compensated_sum(values.iter().copied()) / n;
    let var = if values.len() > 1 {
        crate::number_theory::compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / (n - 1.0)
    } else {
        0.0
    };
    SampleStats {
        mean,
        standard_error: (var / n).sqrt(),
        samples: values.len() as u64,
    }
}

/// Mean and variance of `W_{k,z}` over all `|G|^d` equally likely supports.
pub fn moment_bruteforce(
    group: &FiniteAbelianGroup,
    d: usize,
    k: u32,
    z: Complex64,
    caps: &Caps,
) -> Result<(f64, f64)> {
    let card = group.checked_cardinality()?;
    let total = u32::try_from(d)
        .ok()
        .and_then(|e| card.checked_pow(e))
        .filter(|&t| t <= caps.brute_force)
        .ok_or_else(|| Error::cap("support count |G|^d", format!("{card}^{d}"), caps.brute_force))?;
    let values = (0..total)
        .into_par_iter()
        .map(|idx| -> Result<f64> {
            let mut rest = idx;
            let mut support = Vec::with_capacity(d);
            for _ in 0..d {
                support.push(group.element_at(rest % card));
                rest /= card;
            }
            let c = SparseCirculant::new(group.clone(), support)?;
            Ok(c.spectrum(caps.enumeration)?.shifted_moment(k, z))
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = crate::number_theory::compensated_sum(values.iter().copied()) / n;
    let var = crate::number_theory::compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / n;
    Ok((mean, var))
}

/// One way of computing the moments of `W_{k,z}`.
#[derive(Debug, Clone)]
pub struct MomentProblem {
    pub group: FiniteAbelianGroup,
    pub d: usize,
    pub k: u32,
    pub z: ExactComplex,
    pub trials: u64,
    pub seed: u64,
    pub caps: Caps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub expectation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expectation_exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub trait MomentMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn compute(&self, problem: &MomentProblem) -> Result<MethodResult>;
}

pub struct ExactFormula;
pub struct BruteForce;
pub struct MonteCarlo;

impl MomentMethod for ExactFormula {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn compute(&self, pr: &MomentProblem) -> Result<MethodResult> {
        let e = expected_moment_exact(&pr.group, pr.d, pr.k, &pr.z, &pr.caps)?;
        let (variance, variance_exact, note) = match variance_exact(&pr.group, pr.d, pr.k, &pr.z, &pr.caps) {
            Ok(v) => (Some(rational_to_f64(&v)), Some(format_rational(&v)), None),
            Err(Error::Budget(msg)) => (None, None, Some(msg)),
            Err(e) => return Err(e),
        };
        Ok(MethodResult {
            method: self.name().into(),
            expectation: rational_to_f64(&e),
            expectation_exact: Some(format_rational(&e)),
            standard_error: None,
            variance,
            variance_exact,
            note,
        })
    }
}

impl MomentMethod for BruteForce {
    fn name(&self) -> &'static str {
        "bruteforce"
    }

    fn compute(&self, pr: &MomentProblem) -> Result<MethodResult> {
        let (mean, var) = moment_bruteforce(&pr.group, pr.d, pr.k, exact_to_f64(&pr.z), &pr.caps)?;
        Ok(MethodResult {
            method: self.name().into(),
            expectation: mean,
            expectation_exact: None,
            standard_error: None,
            variance: Some(var),
            variance_exact: None,
            note: None,
        })
    }
}

impl MomentMethod for MonteCarlo {
    fn name(&self) -> &'static str {
        "monte-carlo"
    }

    fn compute(&self, pr: &MomentProblem) -> Result<MethodResult> {
        let s = moment_monte_carlo(&pr.group, pr.d, pr.k, exact_to_f64(&pr.z), pr.trials, pr.seed, &pr.caps)?;
        Ok(MethodResult {
            method: self.name().into(),
            expectation: s.mean,
            expectation_exact: None,
            standard_error: Some(s.standard_error),
            variance: None,
            variance_exact: None,
            note: None,
        })
    }
}

pub fn moment_methods() -> Vec<Box<dyn MomentMethod>> {
    vec![Box::new(ExactFormula), Box::new(BruteForce), Box::new(MonteCarlo)]
}

pub fn moment_method(name: &str) -> Result<Box<dyn MomentMethod>> {
    let methods = moment_methods();
    let known = methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(", ");
    methods
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or(Error::Unknown {
            kind: "moment method",
            name: name.into(),
            known,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub group: FiniteAbelianGroup,
    pub d: usize,
    pub k: u32,
    pub z: [String; 2],
    pub seed: u64,
    pub trials: u64,
    pub caps: Caps,
    pub results: Vec<MethodResult>,
    /// Methods that could not run, with the reason (usually a cap).
    pub skipped: BTreeMap<String, String>,
}

/// Runs every registered method; capped methods are recorded as skipped.
pub fn moment_report(problem: &MomentProblem) -> Result<MomentReport> {
    let mut results = Vec::new();
    let mut skipped = BTreeMap::new();
    for method in moment_methods() {
        match method.compute(problem) {
            Ok(r) => results.push(r),
            Err(e @ (Error::CapExceeded { .. } | Error::Budget(_))) => {
                skipped.insert(method.name().to_string(), e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(MomentReport {
        group: problem.group.clone(),
        d: problem.d,
        k: problem.k,
        z: [format_rational(&problem.z.re), format_rational(&problem.z.im)],
        seed: problem.seed,
        trials: problem.trials,
        caps: problem.caps,
        results,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number_theory::ratio;
    use proptest::prelude::*;

    fn g(s: &str) -> FiniteAbelianGroup {
        s.parse().unwrap()
    }

    fn pattern(k: usize, pairs: &[(usize, usize)]) -> IndexPattern {
        IndexPattern::new(k, pairs.iter().copied().collect()).unwrap()
    }

    fn zq(re: (i64, i64), im: (i64, i64)) -> ExactComplex {
        Complex::new(ratio(re.0, re.1), ratio(im.0, im.1))
    }

    /// Brute-force covariance over all pairs `(x, x')` in `G²`.
    fn brute_cov(group: &FiniteAbelianGroup, p: &[i64], q: &[i64]) -> BigRational {
        let n = group.checked_cardinality().unwrap();
        let zero = group.identity();
        let (mut both, mut first, mut second) = (0i64, 0i64, 0i64);
        let elems: Vec<_> = group.enumerate_elements(1000).unwrap().collect();
        // each equation i: p_i x + q_i x' = 0
        for x in &elems {
            for y in &elems {
                let ok = p.iter().zip(q).all(|(&a, &b)| {
                    group.add(&group.scale(a, x), &group.scale(b, y)) == zero
                });
                if ok {
                    both += 1;
                }
            }
        }
        for x in &elems {
            if p.iter().all(|&a| group.scale(a, x) == zero) {
                first += 1;
            }
            if q.iter().all(|&b| group.scale(b, x) == zero) {
                second += 1;
            }
        }
        let n = n as i64;
        ratio(both, n * n) - ratio(first, n) * ratio(second, n)
    }

    #[test]
    fn p_count_examples() {
        assert_eq!(p_counts(&pattern(2, &[(1, 1), (2, 1)]), 2).unwrap(), vec![2, 0]);
        assert_eq!(p_counts(&pattern(1, &[(1, 1), (2, 1)]), 1).unwrap(), vec![0]);
        assert_eq!(p_counts(&pattern(3, &[]), 4).unwrap(), vec![0; 4]);
        assert!(IndexPattern::new(1, [(3, 1)].into()).is_err());
    }

    #[test]
    fn c_coefficient_examples() {
        let full: BTreeSet<usize> = (1..=4).collect();
        assert_eq!(c_coefficient(2, &full, &Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
        let empty = BTreeSet::new();
        assert_eq!(c_coefficient(1, &empty, &Complex64::new(2.0, 0.0)), Complex64::new(4.0, 0.0));
        let part: BTreeSet<usize> = [1].into();
        assert_eq!(c_coefficient(1, &part, &zq((0, 1), (0, 1))), ExactComplex::zero());
        // (−z)(−z̄) = |z|² exactly
        let z = zq((1, 2), (1, 3));
        assert_eq!(c_coefficient(1, &empty, &z), zq((13, 36), (0, 1)));
    }

    #[test]
    fn event_probability_examples() {
        assert_eq!(event_probability(&g("5"), &[0, 0]), BigRational::one());
        assert_eq!(event_probability(&g("4"), &[2, 0]), ratio(1, 2));
        assert_eq!(event_probability(&g("2,3"), &[6, 0]), BigRational::one());
    }

    #[test]
    fn expectation_examples() {
        let caps = Caps::default();
        let zero = ExactComplex::zero();
        assert_eq!(expected_moment_exact(&g("2"), 1, 1, &zero, &caps).unwrap(), BigRational::one());
        let one = zq((1, 1), (0, 1));
        assert_eq!(expected_moment_exact(&g(""), 2, 1, &one, &caps).unwrap(), BigRational::one());
        for (grp, d) in [("8", 3usize), ("2,2", 2), ("3", 4), ("6", 1)] {
            let group = g(grp);
            let e = expected_moment_exact(&group, d, 1, &zero, &caps).unwrap();
            let n = group.checked_cardinality().unwrap() as i64;
            let d = d as i64;
            assert_eq!(e, ratio(d, 1) + ratio(d * (d - 1), n));
            assert!(e >= ratio(d, 1) && e <= ratio(d * d, 1));
        }
    }

    #[test]
    fn budgets_are_enforced() {
        let caps = Caps::default();
        let zero = ExactComplex::zero();
        assert!(matches!(expected_moment_exact(&g("3"), 5, 1, &zero, &caps), Err(Error::Budget(_))));
        assert!(matches!(variance_exact(&g("3"), 2, 3, &zero, &caps), Err(Error::Budget(_))));
        let wide = Caps { variance_k: 3, ..caps };
        assert!(variance_exact(&g("2"), 1, 3, &zero, &wide).is_ok());
    }

    #[test]
    fn generator_examples() {
        let b = generator_matrix_2x2(&[[2, 0], [0, 3]]).unwrap().unwrap();
        assert_eq!(b.rows, [[2, 0], [0, 3]]);
        assert!(generator_matrix_2x2(&[[0, 0], [0, 0]]).unwrap().is_none());
        let b = generator_matrix_2x2(&[[1, 1]]).unwrap().unwrap();
        assert_eq!(b.rows, [[1, 1], [0, 0]]);
    }

    fn in_lattice(rows: [[i64; 2]; 2], v: [i64; 2]) -> bool {
        let [[a, b], [_, c]] = rows;
        if a == 0 {
            // single generator (0, b)
            return v[0] == 0 && if b == 0 { v[1] == 0 } else { v[1] % b == 0 };
        }
        if v[0] % a != 0 {
            return false;
        }
        let rest = v[1] - (v[0] / a) * b;
        if c == 0 { rest == 0 } else { rest % c == 0 }
    }

    proptest! {
        #[test]
        fn generator_spans_the_same_lattice(vs in proptest::collection::vec((-6i64..=6, -6i64..=6), 1..5)) {
            let vectors: Vec<[i64; 2]> = vs.iter().map(|&(a, b)| [a, b]).collect();
            match generator_matrix_2x2(&vectors).unwrap() {
                None => prop_assert!(vectors.iter().all(|v| *v == [0, 0])),
                Some(basis) => {
                    for v in &vectors {
                        prop_assert!(in_lattice(basis.rows, *v));
                    }
                    for (r, coeffs) in basis.rows.iter().zip(&basis.coefficients) {
                        let mut acc = [0i64; 2];
                        for (c, v) in coeffs.iter().zip(&vectors) {
                            acc[0] += c * v[0];
                            acc[1] += c * v[1];
                        }
                        prop_assert_eq!(acc, *r);
                    }
                }
            }
        }

        #[test]
        fn covariances_are_nonnegative_and_match_brute_force(
            p in proptest::collection::vec(-4i64..=4, 2),
            q in proptest::collection::vec(-4i64..=4, 2),
            grp in prop::sample::select(vec!["4", "6", "2,2", "3,3", "2,4"]),
        ) {
            let group = g(grp);
            let cov = covariance_exact(&group, &p, &q).unwrap();
            prop_assert!(!cov.is_negative());
            prop_assert_eq!(cov, brute_cov(&group, &p, &q));
        }
    }

    #[test]
    fn snf_2x2_examples() {
        assert_eq!(snf_diagonal_2x2([[2, 0], [0, 3]]).unwrap(), (1, 6));
        assert_eq!(snf_diagonal_2x2([[2, 2], [0, 0]]).unwrap(), (2, 0));
        assert_eq!(snf_diagonal_2x2([[1, 0], [0, 1]]).unwrap(), (1, 1));
        assert!(snf_diagonal_2x2([[0, 0], [0, 0]]).is_err());
    }

    #[test]
    fn covariance_examples() {
        assert_eq!(covariance_exact(&g("4"), &[2], &[2]).unwrap(), ratio(1, 4));
        assert_eq!(covariance_exact(&g("3"), &[1], &[1]).unwrap(), ratio(2, 9));
        assert_eq!(covariance_exact(&g("3"), &[0, 0], &[0, 0]).unwrap(), BigRational::zero());
        let group = g("2,3^2");
        for a in 0..8i64 {
            for b in 0..8i64 {
                let expected = group.torsion_proportion(gcd_all([a, b]))
                    - group.torsion_proportion(a as u64) * group.torsion_proportion(b as u64);
                assert_eq!(covariance_exact(&group, &[a, 0], &[b, 0]).unwrap(), expected);
            }
        }
    }

    #[test]
    fn variance_examples() {
        let caps = Caps::default();
        let z = zq((-1, 1), (0, 1));
        assert_eq!(variance_exact(&g(""), 3, 2, &z, &caps).unwrap(), BigRational::zero());
        let v = variance_exact(&g("2"), 1, 1, &z, &caps).unwrap();
        let (_, brute) = moment_bruteforce(&g("2"), 1, 1, Complex64::new(-1.0, 0.0), &caps).unwrap();
        assert!((rational_to_f64(&v) - brute).abs() < 1e-12);
        let small = variance_exact(&g("3^4"), 2, 2, &z, &caps).unwrap();
        let large = variance_exact(&g("3^8"), 2, 2, &z, &caps).unwrap();
        assert!(large < small, "{small} vs {large}");
    }

    #[test]
    fn bruteforce_examples() {
        let caps = Caps::default();
        let z = Complex64::new(0.0, 0.0);
        let (m, v) = moment_bruteforce(&g("2"), 1, 1, z, &caps).unwrap();
        assert!((m - 1.0).abs() < 1e-12 && v.abs() < 1e-12);
        let (m, v) = moment_bruteforce(&g("3"), 1, 1, z, &caps).unwrap();
        assert!((m - 1.0).abs() < 1e-12 && v.abs() < 1e-12);
        let (m, _) = moment_bruteforce(&g("2"), 2, 1, z, &caps).unwrap();
        let e = expected_moment_exact(&g("2"), 2, 1, &ExactComplex::zero(), &caps).unwrap();
        assert!((m - rational_to_f64(&e)).abs() < 1e-12);
        assert!(moment_bruteforce(&g("10"), 7, 1, z, &caps).is_err());
    }

    #[test]
    fn exact_matches_bruteforce_on_a_small_grid() {
        let caps = Caps::default();
        let zs = [zq((0, 1), (0, 1)), zq((1, 1), (0, 1)), zq((1, 2), (1, 2))];
        for grp in ["2", "4", "2,3"] {
            let group = g(grp);
            for d in 1..=2 {
                for k in 1..=2 {
                    for z in &zs {
                        let zf = exact_to_f64(z);
                        let (m, v) = moment_bruteforce(&group, d, k, zf, &caps).unwrap();
                        let e = expected_moment_exact(&group, d, k, z, &caps).unwrap();
                        let var = variance_exact(&group, d, k, z, &caps).unwrap();
                        assert!((rational_to_f64(&e) - m).abs() < 1e-9);
                        assert!((rational_to_f64(&var) - v).abs() < 1e-9);
                        let poly = expectation_polynomial(&group, d, k, &caps).unwrap();
                        assert!((poly.evaluate(zf) - m).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn monte_carlo_examples() {
        let caps = Caps::default();
        let s = moment_monte_carlo(&g(""), 2, 1, Complex64::new(0.0, 0.0), 10, 1, &caps).unwrap();
        assert_eq!((s.mean, s.standard_error), (4.0, 0.0));
        for (grp, k, z) in [("8", 1, (0, 0)), ("2,3", 2, (1, 1))] {
            let zc = zq((z.0, 1), (z.1, 1));
            let s = moment_monte_carlo(&g(grp), 2, k, exact_to_f64(&zc), 10_000, 11, &caps).unwrap();
            let e = rational_to_f64(&expected_moment_exact(&g(grp), 2, k, &zc, &caps).unwrap());
            assert!((s.mean - e).abs() <= 4.0 * s.standard_error, "{grp}: {s:?} vs {e}");
        }
    }

    #[test]
    fn report_runs_all_methods() {
        let problem = MomentProblem {
            group: g("2,3"),
            d: 2,
            k: 1,
            z: ExactComplex::zero(),
            trials: 1000,
            seed: 7,
            caps: Caps::default(),
        };
        let report = moment_report(&problem).unwrap();
        assert_eq!(report.results.len(), 3);
        assert!(report.skipped.is_empty());
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"monte-carlo\""));
        assert!(moment_method("nope").is_err());
        assert_eq!(moment_method("exact").unwrap().name(), "exact");
    }
}

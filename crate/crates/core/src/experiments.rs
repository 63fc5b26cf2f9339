//! Seeded desk-scale experiments: convergence of empirical spectral
//! distributions to their limit laws, determinant statistics and order
//! distributions along families of groups.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::complex::Complex64;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::circulant::{sample_with_replacement, SparseCirculant, Spectrum, ZeroPolicy};
use crate::error::{Error, Result};
use crate::group::FiniteAbelianGroup;
use crate::limit::{AtomicDistribution, LimitOrder, LimitSpec, MixtureLimit};
use crate::moments::p_vector_tally;
use crate::number_theory::{gcd_all, ratio, rational_to_f64, CompensatedSum};
use crate::seed::{derive_seed, rng_for};

/// Largest total degree `k + l` accepted by the moment diagnostics.
pub const MAX_MOMENT_DEGREE: u32 = 8;

/// Size of the reference sample standing in for a law with a continuous part
/// in the binned diagnostic.
pub const REFERENCE_SAMPLE: usize = 20_000;

/// The order-distribution limit `ρ` of a family: finite atoms, with the
/// remaining mass at `∞`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderLimit {
    pub finite: BTreeMap<u64, BigRational>,
}

impl OrderLimit {
    pub fn point(m: u64) -> Self {
        Self {
            finite: [(m, BigRational::one())].into(),
        }
    }

    pub fn infinite() -> Self {
        Self {
            finite: BTreeMap::new(),
        }
    }

    pub fn infinite_mass(&self) -> BigRational {
        BigRational::one() - self.finite.values().fold(BigRational::zero(), |a, w| a + w)
    }

    /// Weight assigned to an event `Σ p_i Z_i = 0` by the mixture of
    /// `η_m^{*d}`: `m | p` componentwise for finite `m`, `p = 0` at `∞`.
    fn event_weight(&self, p: &[i64]) -> BigRational {
        let g = gcd_all(p.iter().copied());
        let mut w = BigRational::zero();
        for (&m, rho) in &self.finite {
            if g % m == 0 {
                w += rho;
            }
        }
        if g == 0 {
            w += self.infinite_mass();
        }
        w
    }
}

/// A rule `n ↦ G_n`.
pub trait GroupFamily: Send + Sync {
    fn name(&self) -> String;
    fn group(&self, n: u64) -> Result<FiniteAbelianGroup>;
    fn limit(&self) -> OrderLimit;
}

/// `G_n = Z/n`.
pub struct Cyclic;

/// `G_n = (Z/m)^n`.
pub struct Homocyclic(pub u64);

/// `G_n = Z/2 ⊕ (Z/3)^n`.
pub struct TwistedHomocyclic;

impl GroupFamily for Cyclic {
    fn name(&self) -> String {
        "cyclic".into()
    }

    fn group(&self, n: u64) -> Result<FiniteAbelianGroup> {
        FiniteAbelianGroup::cyclic(n)
    }

    fn limit(&self) -> OrderLimit {
        OrderLimit::infinite()
    }
}

impl GroupFamily for Homocyclic {
    fn name(&self) -> String {
        format!("homocyclic:{}", self.0)
    }

    fn group(&self, n: u64) -> Result<FiniteAbelianGroup> {
        let n = usize::try_from(n).map_err(|_| Error::invalid("rank too large"))?;
        FiniteAbelianGroup::homocyclic(self.0, n)
    }

    fn limit(&self) -> OrderLimit {
        OrderLimit::point(self.0)
    }
}

impl GroupFamily for TwistedHomocyclic {
    fn name(&self) -> String {
        "twisted".into()
    }

    fn group(&self, n: u64) -> Result<FiniteAbelianGroup> {
        let n = usize::try_from(n).map_err(|_| Error::invalid("rank too large"))?;
        let mut factors = vec![2];
        factors.extend(std::iter::repeat_n(3, n));
        FiniteAbelianGroup::new(factors)
    }

    fn limit(&self) -> OrderLimit {
        OrderLimit {
            finite: [(3, ratio(1, 2)), (6, ratio(1, 2))].into(),
        }
    }
}

pub const FAMILY_NAMES: &[&str] = &["cyclic", "homocyclic:m", "twisted"];

/// Looks a family up by name: `cyclic`, `homocyclic:m` or `twisted`.
pub fn family_by_name(name: &str) -> Result<Box<dyn GroupFamily>> {
    let unknown = || Error::Unknown {
        kind: "group family",
        name: name.into(),
        known: FAMILY_NAMES.join(", "),
    };
    match name.split_once(':') {
        None if name == "cyclic" => Ok(Box::new(Cyclic)),
        None if name == "twisted" => Ok(Box::new(TwistedHomocyclic)),
        Some(("homocyclic", m)) => {
            let m: u64 = m.parse().map_err(|_| unknown())?;
            if m < 2 {
                return Err(Error::invalid("homocyclic family needs m ≥ 2"));
            }
            Ok(Box::new(Homocyclic(m)))
        }
        _ => Err(unknown()),
    }
}

/// Anything with mixed moments `∫ z^k z̄^l`.
pub trait MixedMoments {
    fn mixed_moment(&self, k: u32, l: u32) -> Complex64;
}

impl MixedMoments for Spectrum {
    fn mixed_moment(&self, k: u32, l: u32) -> Complex64 {
        let mut acc = CompensatedSum::default();
        for z in &self.eigenvalues {
            acc.add(z.powu(k) * z.conj().powu(l));
        }
        acc.value() / self.len() as f64
    }
}

impl MixedMoments for AtomicDistribution {
    fn mixed_moment(&self, k: u32, l: u32) -> Complex64 {
        AtomicDistribution::mixed_moment(self, k, l)
    }
}

/// Finitely many weighted points; the common currency of the diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedPoints {
    pub points: Vec<(Complex64, f64)>,
}

impl WeightedPoints {
    pub fn uniform(points: &[Complex64]) -> Self {
        let w = 1.0 / points.len() as f64;
        Self {
            points: points.iter().map(|&z| (z, w)).collect(),
        }
    }

    pub fn shifted(&self, by: Complex64) -> Self {
        Self {
            points: self.points.iter().map(|&(z, w)| (z + by, w)).collect(),
        }
    }
}

impl From<&Spectrum> for WeightedPoints {
    fn from(s: &Spectrum) -> Self {
        Self::uniform(&s.eigenvalues)
    }
}

impl From<&AtomicDistribution> for WeightedPoints {
    fn from(a: &AtomicDistribution) -> Self {
        Self {
            points: a
                .atoms
                .iter()
                .map(|atom| (atom.location, rational_to_f64(&atom.weight)))
                .collect(),
        }
    }
}

impl MixedMoments for WeightedPoints {
    fn mixed_moment(&self, k: u32, l: u32) -> Complex64 {
        let mut acc = CompensatedSum::default();
        for &(z, w) in &self.points {
            acc.add(z.powu(k) * z.conj().powu(l) * w);
        }
        acc.value()
    }
}

/// Exact real moments indexed by `(k, l)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentTable {
    pub entries: BTreeMap<(u32, u32), BigRational>,
}

impl MixedMoments for MomentTable {
    fn mixed_moment(&self, k: u32, l: u32) -> Complex64 {
        self.entries
            .get(&(k, l))
            .map_or(Complex64::new(f64::NAN, f64::NAN), |q| Complex64::new(rational_to_f64(q), 0.0))
    }
}

fn check_degree(max_total_degree: u32) -> Result<()> {
    if max_total_degree > MAX_MOMENT_DEGREE {
        return Err(Error::invalid(format!(
            "moment degree {max_total_degree} exceeds {MAX_MOMENT_DEGREE}"
        )));
    }
    Ok(())
}

fn degree_pairs(max_total_degree: u32) -> impl Iterator<Item = (u32, u32)> {
    (0..=max_total_degree).flat_map(move |k| (0..=max_total_degree - k).map(move |l| (k, l)))
}

/// `max_{k+l ≤ D} |∫ z^k z̄^l dμ − ∫ z^k z̄^l dν|`.
pub fn moment_distance(mu: &dyn MixedMoments, nu: &dyn MixedMoments, max_total_degree: u32) -> Result<f64> {
    check_degree(max_total_degree)?;
    Ok(degree_pairs(max_total_degree)
        .map(|(k, l)| (mu.mixed_moment(k, l) - nu.mixed_moment(k, l)).norm())
        .fold(0.0, f64::max))
}

/// The same distance computed on exact tables.
pub fn moment_distance_exact(mu: &MomentTable, nu: &MomentTable) -> Result<BigRational> {
    let mut best = BigRational::zero();
    for (key, a) in &mu.entries {
        let b = nu
            .entries
            .get(key)
            .ok_or_else(|| Error::invalid(format!("moment {key:?} missing from table")))?;
        let diff = (a - b).abs();
        if diff > best {
            best = diff;
        }
    }
    Ok(best)
}

/// ESD moments of a circulant, exactly: `∫ z^k z̄^l dμ_C` is the number of
/// `(j, j') ∈ [d]^k × [d]^l` with `Σ X_j − Σ X_{j'} = 0`.
pub fn esd_moment_table(c: &SparseCirculant, max_total_degree: u32) -> Result<MomentTable> {
    check_degree(max_total_degree)?;
    let zero = c.group.identity();
    let entries = degree_pairs(max_total_degree)
        .map(|(k, l)| {
            let count = p_vector_tally(c.d, k as usize, l as usize)
                .into_iter()
                .filter(|(p, _)| {
                    p.iter()
                        .zip(&c.support)
                        .fold(zero.clone(), |acc, (&pi, x)| c.group.add(&acc, &c.group.scale(pi, x)))
                        == zero
                })
                .map(|(_, n)| n)
                .sum::<u64>();
            ((k, l), BigRational::from_integer(BigInt::from(count)))
        })
        .collect();
    Ok(MomentTable { entries })
}

/// Moments of `Σ_m ρ(m) η_m^{*d}` (with `η_∞` for the missing mass), exactly.
pub fn limit_moment_table(limit: &OrderLimit, d: usize, max_total_degree: u32) -> Result<MomentTable> {
    check_degree(max_total_degree)?;
    let entries = degree_pairs(max_total_degree)
        .map(|(k, l)| {
            let value = p_vector_tally(d, k as usize, l as usize)
                .into_iter()
                .fold(BigRational::zero(), |acc, (p, n)| {
                    acc + limit.event_weight(&p) * BigInt::from(n)
                });
            ((k, l), value)
        })
        .collect();
    Ok(MomentTable { entries })
}

/// Half the L1 distance between histograms on a `grid × grid` partition of
/// `[−extent, extent]²`. Cells are closed on the right; points outside are
/// clamped to the border cells.
pub fn binned_discrepancy(mu: &WeightedPoints, nu: &WeightedPoints, grid_size: usize, extent: f64) -> Result<f64> {
    if grid_size == 0 || !(extent > 0.0) {
        return Err(Error::invalid("grid size and extent must be positive"));
    }
    let cell = |x: f64| -> usize {
        let t = (x + extent) / (2.0 * extent) * grid_size as f64;
        (t.ceil() as i64 - 1).clamp(0, grid_size as i64 - 1) as usize
    };
    let histogram = |pts: &WeightedPoints| {
        let mut h = vec![0.0f64; grid_size * grid_size];
        for &(z, w) in &pts.points {
            h[cell(z.re) * grid_size + cell(z.im)] += w;
        }
        h
    };
    let (a, b) = (histogram(mu), histogram(nu));
    let l1 = crate::number_theory::compensated_sum(a.iter().zip(&b).map(|(x, y)| (x - y).abs()));
    Ok((l1 / 2.0).clamp(0.0, 1.0))
}

/// Type-7 sample quantile (linear interpolation between order statistics).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

pub fn interquartile_range(values: &[f64]) -> f64 {
    quantile(values, 0.75) - quantile(values, 0.25)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: String,
    pub d: usize,
    pub n_list: Vec<u64>,
    pub trials: u64,
    pub seed: u64,
    pub caps: Caps,
    pub max_degree: u32,
    pub grid_size: usize,
    pub zero_policy: ZeroPolicy,
}

impl ExperimentConfig {
    pub fn new(family: &str, d: usize, n_list: Vec<u64>, trials: u64, seed: u64) -> Self {
        Self {
            family: family.into(),
            d,
            n_list,
            trials,
            seed,
            caps: Caps::default(),
            max_degree: 4,
            grid_size: 16,
            zero_policy: ZeroPolicy::default(),
        }
    }

    fn validate(&self) -> Result<Box<dyn GroupFamily>> {
        if self.d == 0 {
            return Err(Error::invalid("d must be at least 1"));
        }
        if self.trials == 0 || self.n_list.is_empty() {
            return Err(Error::invalid("need at least one trial and one n"));
        }
        family_by_name(&self.family)
    }
}

fn sample_trial(group: &FiniteAbelianGroup, d: usize, seed: u64, n: u64, trial: u64) -> Result<SparseCirculant> {
    let mut rng = rng_for(seed, &[n, trial]);
    sample_with_replacement(group, d, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: u64,
    pub trial: u64,
    pub trial_seed: u64,
    pub moment_distance: f64,
    pub binned_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub n: u64,
    pub group: FiniteAbelianGroup,
    pub cardinality: u64,
    pub trials: u64,
    pub seed: u64,
    pub median_distance: f64,
    pub mean_distance: f64,
    pub iqr_distance: f64,
    pub median_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: ExperimentConfig,
    pub records: Vec<ConvergenceRecord>,
    pub trials: Vec<TrialRecord>,
}

impl ConvergenceReport {
    /// Median distance at the largest `n` below half the median at the
    /// smallest.
    pub fn halves(&self) -> bool {
        match (self.records.first(), self.records.last()) {
            (Some(a), Some(b)) => b.median_distance < a.median_distance / 2.0,
            _ => false,
        }
    }
}

/// Points representing the family's limit law in the binned diagnostic:
/// exact atoms when the law is atomic, a seeded sample otherwise.
pub fn limit_reference_points(limit: &OrderLimit, d: usize, seed: u64, atom_cap: u64) -> Result<WeightedPoints> {
    let d32 = u32::try_from(d).map_err(|_| Error::invalid("d too large"))?;
    let mixture = MixtureLimit::new(&limit.finite, d32, atom_cap)?;
    if mixture.infinite_weight.is_zero() {
        return Ok(WeightedPoints::from(&mixture.finite_atoms()));
    }
    let mut rng = rng_for(seed, &[u64::MAX]);
    let pts: Vec<Complex64> = (0..REFERENCE_SAMPLE)
        .map(|_| mixture.sample(&mut rng))
        .collect::<Result<_>>()?;
    Ok(WeightedPoints::uniform(&pts))
}

/// Samples `trials` circulants per `n` and measures the distance of each
/// empirical spectral distribution to the family's limit law. Moments are
/// compared exactly, so samples whose ESD matches the limit moments to the
/// tested degree report distance 0.
pub fn esd_convergence_experiment(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let family = config.validate()?;
    let limit = family.limit();
    let target = limit_moment_table(&limit, config.d, config.max_degree)?;
    let reference = limit_reference_points(&limit, config.d, config.seed, config.caps.atoms)?;
    let extent = config.d as f64;
    let mut records = Vec::new();
    let mut trials = Vec::new();
    for &n in &config.n_list {
        let group = family.group(n)?;
        let cardinality = group.checked_cardinality()?;
        let per_trial = (0..config.trials)
            .into_par_iter()
            .map(|t| -> Result<TrialRecord> {
                let c = sample_trial(&group, config.d, config.seed, n, t)?;
                let dist = moment_distance_exact(&esd_moment_table(&c, config.max_degree)?, &target)?;
                let spectrum = c.spectrum(config.caps.enumeration)?;
                let disc = binned_discrepancy(&WeightedPoints::from(&spectrum), &reference, config.grid_size, extent)?;
                Ok(TrialRecord {
                    n,
                    trial: t,
                    trial_seed: derive_seed(config.seed, &[n, t]),
                    moment_distance: rational_to_f64(&dist),
                    binned_discrepancy: disc,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let dists: Vec<f64> = per_trial.iter().map(|r| r.moment_distance).collect();
        let discs: Vec<f64> = per_trial.iter().map(|r| r.binned_discrepancy).collect();
        records.push(ConvergenceRecord {
            n,
            group,
            cardinality,
            trials: config.trials,
            seed: config.seed,
            median_distance: median(&dists),
            mean_distance: crate::number_theory::compensated_sum(dists.iter().copied()) / dists.len() as f64,
            iqr_distance: interquartile_range(&dists),
            median_discrepancy: median(&discs),
        });
        trials.extend(per_trial);
    }
    Ok(ConvergenceReport {
        config: config.clone(),
        records,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantTrial {
    pub n: u64,
    pub trial: u64,
    pub trial_seed: u64,
    /// `(1/|G|) log|det C|`, absent for singular samples.
    pub log_abs_det: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantSummary {
    pub n: u64,
    pub group: FiniteAbelianGroup,
    pub cardinality: u64,
    pub zero_tolerance: f64,
    /// Mean over non-singular trials only.
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub nonsingular: u64,
    pub singular: u64,
    pub singular_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantReport {
    pub config: ExperimentConfig,
    pub summaries: Vec<DeterminantSummary>,
    pub trials: Vec<DeterminantTrial>,
}

pub fn determinant_experiment(config: &ExperimentConfig) -> Result<DeterminantReport> {
    let family = config.validate()?;
    let mut summaries = Vec::new();
    let mut trials = Vec::new();
    for &n in &config.n_list {
        let group = family.group(n)?;
        let cardinality = group.checked_cardinality()?;
        let tol = config.zero_policy.tolerance(&group, config.d)?;
        let per_trial = (0..config.trials)
            .into_par_iter()
            .map(|t| -> Result<DeterminantTrial> {
                let c = sample_trial(&group, config.d, config.seed, n, t)?;
                Ok(DeterminantTrial {
                    n,
                    trial: t,
                    trial_seed: derive_seed(config.seed, &[n, t]),
                    log_abs_det: c.log_abs_det_normalized(tol, config.caps.enumeration)?.finite(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = per_trial.iter().filter_map(|t| t.log_abs_det).collect();
        let singular = per_trial.len() as u64 - values.len() as u64;
        let (mean, stddev) = if values.is_empty() {
            (None, None)
        } else {
            let s = crate::moments::sample_stats(&values);
            let sd = s.standard_error * (values.len() as f64).sqrt();
            (Some(s.mean), Some(sd))
        };
        summaries.push(DeterminantSummary {
            n,
            group,
            cardinality,
            zero_tolerance: tol,
            mean,
            stddev,
            nonsingular: values.len() as u64,
            singular,
            singular_fraction: singular as f64 / per_trial.len() as f64,
        });
        trials.extend(per_trial);
    }
    Ok(DeterminantReport {
        config: config.clone(),
        summaries,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderCheck {
    pub n: u64,
    pub group: FiniteAbelianGroup,
    pub distribution: BTreeMap<u64, BigRational>,
    /// Half the L1 distance to the limit, counting the atom at `∞`.
    pub tv_distance: BigRational,
    /// Mass the limit puts at `∞` (the finite groups put none there).
    pub escaping_mass: BigRational,
}

pub fn order_distribution_limit_check(family: &dyn GroupFamily, n_list: &[u64], cap: u64) -> Result<Vec<OrderCheck>> {
    let limit = family.limit();
    let escaping_mass = limit.infinite_mass();
    n_list
        .iter()
        .map(|&n| {
            let group = family.group(n)?;
            let distribution = group.order_distribution(cap)?;
            let mut l1 = escaping_mass.clone();
            for m in distribution.keys().chain(limit.finite.keys()).collect::<std::collections::BTreeSet<_>>() {
                let a = distribution.get(m).cloned().unwrap_or_else(BigRational::zero);
                let b = limit.finite.get(m).cloned().unwrap_or_else(BigRational::zero);
                l1 += (a - b).abs();
            }
            Ok(OrderCheck {
                n,
                group,
                distribution,
                tv_distance: l1 / BigInt::from(2),
                escaping_mass: escaping_mass.clone(),
            })
        })
        .collect()
}

/// The sampleable limit law of the family (`m = ∞` for non-atomic limits).
pub fn family_limit_spec(family: &dyn GroupFamily, d: u32) -> Result<Option<LimitSpec>> {
    let limit = family.limit();
    match limit.finite.len() {
        0 => Ok(Some(LimitSpec::new(LimitOrder::Infinite, d)?)),
        1 if limit.infinite_mass().is_zero() => {
            let m = *limit.finite.keys().next().expect("one atom");
            Ok(Some(LimitSpec::new(LimitOrder::Finite(m), d)?))
        }
        _ => Ok(None),
    }
}

//! The random sparse circulant model `C = Σ_j 1_{X_j}` over a finite abelian
//! group, and its spectrum.
//!
//! Eigenvalues are read off the characters directly:
//! `λ(γ) = Σ_j e(-⟨γ, X_j⟩)`, one per character in enumeration order. The
//! dense matrix exists only as an oracle for the eigenvector check.

use std::collections::{BTreeMap, HashMap};

use num::complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{FiniteAbelianGroup, GroupElement};
use crate::number_theory::{compensated_sum, euler_totient, is_prime_power, root_of_unity, CompensatedSum};

/// Trig tables are used for exponents up to this size.
const TABLE_LIMIT: u64 = 1 << 20;
const CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseCirculant {
    pub group: FiniteAbelianGroup,
    pub d: usize,
    pub support: Vec<GroupElement>,
}

impl SparseCirculant {
    pub fn new(group: FiniteAbelianGroup, support: Vec<GroupElement>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::invalid("support must contain at least one element"));
        }
        for x in &support {
            group.check(x)?;
        }
        Ok(Self {
            d: support.len(),
            group,
            support,
        })
    }

    /// The row function `S(x) = #{j : X_j = x}`, restricted to its support.
    pub fn row_function(&self) -> BTreeMap<GroupElement, usize> {
        let mut s = BTreeMap::new();
        for x in &self.support {
            *s.entry(x.clone()).or_insert(0) += 1;
        }
        s
    }

    /// `Σ_x S(x)²`.
    pub fn energy(&self) -> usize {
        self.row_function().values().map(|c| c * c).sum()
    }

    pub fn spectrum(&self, enumeration_cap: u64) -> Result<Spectrum> {
        let card = self.group.checked_cardinality()?;
        if card > enumeration_cap {
            return Err(Error::cap("spectrum size", card, enumeration_cap));
        }
        let exponent = self.group.exponent()? as u128;
        let scaled: Vec<Vec<u128>> = self
            .support
            .iter()
            .map(|x| {
                self.group
                    .factors()
                    .iter()
                    .zip(&x.residues)
                    .map(|(&m, &a)| a as u128 * (exponent / m as u128))
                    .collect()
            })
            .collect();
        let table: Option<Vec<Complex64>> = (exponent <= TABLE_LIMIT as u128)
            .then(|| (0..exponent).map(|k| root_of_unity(k, exponent)).collect());
        let root = |num: u128| match &table {
            Some(t) => t[num as usize],
            None => root_of_unity(num, exponent),
        };

        let factors = self.group.factors();
        let n_chunks = card.div_ceil(CHUNK);
        let chunks: Vec<Vec<Complex64>> = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| {
                let start = chunk * CHUNK;
                let end = (start + CHUNK).min(card);
                let mut gamma = self.group.element_at(start).residues;
                let mut out = Vec::with_capacity((end - start) as usize);
                for _ in start..end {
                    let mut acc = CompensatedSum::default();
                    for s in &scaled {
                        let mut num: u128 = 0;
                        for (&g, &si) in gamma.iter().zip(s) {
                            num = (num + (g as u128 * si) % exponent) % exponent;
                        }
                        // e(-num/L)
                        acc.add(root((exponent - num) % exponent));
                    }
                    out.push(acc.value());
                    increment(&mut gamma, factors);
                }
                out
            })
            .collect();
        Ok(Spectrum {
            eigenvalues: chunks.into_iter().flatten().collect(),
        })
    }

    /// `A_{x,y} = S(x - y)`, rows and columns in enumeration order.
    pub fn dense_matrix(&self, dense_cap: u64) -> Result<DenseMatrix> {
        let n = self.group.checked_cardinality()?;
        if n > dense_cap {
            return Err(Error::cap("dense matrix size", n, dense_cap));
        }
        let s: HashMap<u64, u32> = self
            .row_function()
            .into_iter()
            .map(|(x, c)| (self.group.index_of(&x), c as u32))
            .collect();
        let elements: Vec<GroupElement> = self.group.enumerate_elements(dense_cap)?.collect();
        let mut entries = vec![0u32; (n * n) as usize];
        for (i, x) in elements.iter().enumerate() {
            for (j, y) in elements.iter().enumerate() {
                let diff = self.group.index_of(&self.group.sub(x, y));
                entries[i * n as usize + j] = s.get(&diff).copied().unwrap_or(0);
            }
        }
        Ok(DenseMatrix {
            size: n as usize,
            entries,
        })
    }

    /// Max over characters of `‖A v_γ − λ(γ) v_γ‖_∞` with `v_γ(x) = γ(x)`.
    pub fn verify_normality(&self, dense_cap: u64) -> Result<f64> {
        let a = self.dense_matrix(dense_cap)?;
        let spectrum = self.spectrum(dense_cap)?;
        let elements: Vec<GroupElement> = self.group.enumerate_elements(dense_cap)?.collect();
        let exponent = self.group.exponent()?;
        let n = a.size;
        let residual = elements
            .par_iter()
            .zip(spectrum.eigenvalues.par_iter())
            .map(|(gamma, &lambda)| {
                let v: Vec<Complex64> = elements
                    .iter()
                    .map(|x| {
                        root_of_unity(
                            self.group.pairing_numerator(gamma, x, exponent),
                            exponent as u128,
                        )
                    })
                    .collect();
                let mut worst = 0.0f64;
                for row in 0..n {
                    let mut acc = CompensatedSum::default();
                    for col in 0..n {
                        let e = a.entries[row * n + col];
                        if e != 0 {
                            acc.add(v[col] * e as f64);
                        }
                    }
                    worst = worst.max((acc.value() - lambda * v[row]).norm());
                }
                worst
            })
            .reduce(|| 0.0, f64::max);
        Ok(residual)
    }

    pub fn log_abs_det_normalized(&self, zero_tolerance: f64, enumeration_cap: u64) -> Result<DetValue> {
        Ok(self.spectrum(enumeration_cap)?.log_abs_det_normalized(zero_tolerance))
    }

    pub fn shifted_singular_values(&self, z: Complex64, enumeration_cap: u64) -> Result<Vec<f64>> {
        Ok(self.spectrum(enumeration_cap)?.shifted_singular_values(z))
    }
}

fn increment(residues: &mut [u64], factors: &[u64]) {
    for (r, &m) in residues.iter_mut().zip(factors).rev() {
        *r += 1;
        if *r < m {
            return;
        }
        *r = 0;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseMatrix {
    pub size: usize,
    /// Row-major entries.
    pub entries: Vec<u32>,
}

impl DenseMatrix {
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.entries[row * self.size + col]
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.entries
            .chunks(self.size)
            .map(|r| r.iter().map(|&e| e as u64).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.size)
            .map(|c| (0..self.size).map(|r| self.get(r, c) as u64).sum())
            .collect()
    }
}

/// Eigenvalues indexed by characters in enumeration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DetValue {
    Finite(f64),
    Singular,
}

impl DetValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            DetValue::Finite(v) => Some(*v),
            DetValue::Singular => None,
        }
    }
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `(1/|G|) Σ_γ log|λ(γ)|`, or `Singular` if some `|λ| ≤ zero_tolerance`.
    pub fn log_abs_det_normalized(&self, zero_tolerance: f64) -> DetValue {
        if self.eigenvalues.iter().any(|l| l.norm() <= zero_tolerance) {
            return DetValue::Singular;
        }
        let total = compensated_sum(self.eigenvalues.iter().map(|l| l.norm().ln()));
        DetValue::Finite(total / self.len() as f64)
    }

    /// The multiset `{|λ(γ) − z|}`.
    pub fn shifted_singular_values(&self, z: Complex64) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| (l - z).norm()).collect()
    }

    /// `(1/|G|) Σ |λ − z|^{2k}`.
    pub fn shifted_moment(&self, k: u32, z: Complex64) -> f64 {
        compensated_sum(self.eigenvalues.iter().map(|l| (l - z).norm_sqr().powi(k as i32)))
            / self.len() as f64
    }
}

/// How near-zero eigenvalues are classified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ZeroPolicy {
    Threshold(f64),
    /// For prime-power exponent `m`, use `min(1e-10, d^{1−φ(m)}/2)`, which
    /// classifies exactly when it dominates the accumulated rounding error.
    RootSumCertified,
}

pub const DEFAULT_ZERO_TOLERANCE: f64 = 1e-10;

impl Default for ZeroPolicy {
    fn default() -> Self {
        ZeroPolicy::Threshold(DEFAULT_ZERO_TOLERANCE)
    }
}

impl ZeroPolicy {
    pub fn tolerance(&self, group: &FiniteAbelianGroup, d: usize) -> Result<f64> {
        match *self {
            ZeroPolicy::Threshold(t) if t >= 0.0 => Ok(t),
            ZeroPolicy::Threshold(t) => Err(Error::invalid(format!("negative zero tolerance {t}"))),
            ZeroPolicy::RootSumCertified => {
                let m = group.exponent()?;
                if m == 1 {
                    // every eigenvalue is exactly d
                    return Ok(DEFAULT_ZERO_TOLERANCE);
                }
                if !is_prime_power(m) {
                    return Err(Error::invalid(format!(
                        "certified zero detection needs a prime-power exponent, got {m}"
                    )));
                }
                let bound = (d as f64).powf(1.0 - euler_totient(m) as f64);
                // each term carries ~2 ulp, plus compensated summation
                let rounding = 8.0 * d as f64 * f64::EPSILON;
                if bound / 2.0 <= rounding {
                    return Err(Error::invalid(format!(
                        "root-sum bound {bound:e} for m={m}, d={d} is below floating resolution"
                    )));
                }
                Ok(DEFAULT_ZERO_TOLERANCE.min(bound / 2.0))
            }
        }
    }
}

/// A strategy for drawing the support tuple `(X_1, …, X_d)`.
pub trait SupportSampler: Send + Sync {
    fn name(&self) -> &'static str;
    fn sample(&self, group: &FiniteAbelianGroup, d: usize, rng: &mut dyn RngCore) -> Result<SparseCirculant>;
}

/// `X_j` i.i.d. uniform on the group.
#[derive(Debug, Default, Clone, Copy)]
pub struct WithReplacement;

impl SupportSampler for WithReplacement {
    fn name(&self) -> &'static str {
        "with-replacement"
    }

    fn sample(&self, group: &FiniteAbelianGroup, d: usize, rng: &mut dyn RngCore) -> Result<SparseCirculant> {
        if d == 0 {
            return Err(Error::invalid("d must be at least 1"));
        }
        let support = (0..d).map(|_| group.sample_uniform(rng)).collect();
        SparseCirculant::new(group.clone(), support)
    }
}

/// Uniform ordered tuple of distinct elements: each coordinate is redrawn
/// until it differs from the earlier ones.
#[derive(Debug, Default, Clone, Copy)]
pub struct Distinct;

impl SupportSampler for Distinct {
    fn name(&self) -> &'static str {
        "distinct"
    }

    fn sample(&self, group: &FiniteAbelianGroup, d: usize, rng: &mut dyn RngCore) -> Result<SparseCirculant> {
        if d == 0 {
            return Err(Error::invalid("d must be at least 1"));
        }
        let card = group.cardinality();
        if num::BigUint::from(d) > card {
            return Err(Error::invalid(format!(
                "cannot draw {d} distinct elements from a group of order {card}"
            )));
        }
        let mut support: Vec<GroupElement> = Vec::with_capacity(d);
        while support.len() < d {
            let x = group.sample_uniform(rng);
            if !support.contains(&x) {
                support.push(x);
            }
        }
        SparseCirculant::new(group.clone(), support)
    }
}

pub fn sample_with_replacement(group: &FiniteAbelianGroup, d: usize, rng: &mut dyn RngCore) -> Result<SparseCirculant> {
    WithReplacement.sample(group, d, rng)
}

pub fn sample_distinct(group: &FiniteAbelianGroup, d: usize, rng: &mut dyn RngCore) -> Result<SparseCirculant> {
    Distinct.sample(group, d, rng)
}

pub fn samplers() -> Vec<Box<dyn SupportSampler>> {
    vec![Box::new(WithReplacement), Box::new(Distinct)]
}

pub fn sampler_by_name(name: &str) -> Result<Box<dyn SupportSampler>> {
    let all = samplers();
    let known = all.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ");
    all.into_iter().find(|s| s.name() == name).ok_or(Error::Unknown {
        kind: "support sampler",
        name: name.into(),
        known,
    })
}

//! Finite abelian groups presented as products of cyclic factors
//! `Z/m_1 ⊕ … ⊕ Z/m_t`.
//!
//! The dual group is identified with the group itself through the pairing
//! `⟨γ, x⟩ = Σ γ_i x_i / m_i (mod 1)`, so characters are ordinary
//! [`GroupElement`]s.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num::bigint::{BigInt, BigUint};
use num::rational::BigRational;
use num::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::number_theory::{divisors, gcd_u64, lcm_u64, mobius};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement {
    pub residues: Vec<u64>,
}

/// Characters share the representation of elements.
pub type Character = GroupElement;

impl GroupElement {
    pub fn new(residues: Vec<u64>) -> Self {
        Self { residues }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, r) in self.residues.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FiniteAbelianGroup {
    factors: Vec<u64>,
}

impl FiniteAbelianGroup {
    pub fn new(factors: Vec<u64>) -> Result<Self> {
        if let Some(pos) = factors.iter().position(|&m| m == 0) {
            return Err(Error::invalid(format!(
                "cyclic factor {pos} is zero; factors must be positive"
            )));
        }
        Ok(Self { factors })
    }

    pub fn cyclic(n: u64) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn homocyclic(m: u64, n: usize) -> Result<Self> {
        Self::new(vec![m; n])
    }

    pub fn factors(&self) -> &[u64] {
        &self.factors
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    /// `|G| = Π m_i`, in arbitrary precision.
    pub fn cardinality(&self) -> BigUint {
        self.factors
            .iter()
            .fold(BigUint::one(), |acc, &m| acc * BigUint::from(m))
    }

    /// `|G|` when it fits in a `u64`.
    pub fn checked_cardinality(&self) -> Result<u64> {
        self.factors
            .iter()
            .try_fold(1u64, |acc, &m| acc.checked_mul(m))
            .ok_or(Error::Overflow("group cardinality"))
    }

    /// Least `r ≥ 1` with `r·x = 0` for every `x`, i.e. `lcm(m_1, …, m_t)`.
    pub fn exponent(&self) -> Result<u64> {
        self.factors
            .iter()
            .try_fold(1u64, |acc, &m| lcm_u64(acc, m))
            .ok_or(Error::Overflow("group exponent"))
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::new(vec![0; self.rank()])
    }

    pub fn contains(&self, x: &GroupElement) -> bool {
        x.residues.len() == self.rank()
            && x.residues.iter().zip(&self.factors).all(|(&r, &m)| r < m)
    }

    pub fn check(&self, x: &GroupElement) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::invalid(format!("element {x} is not in group {self}")))
        }
    }

    pub fn add(&self, x: &GroupElement, y: &GroupElement) -> GroupElement {
        GroupElement::new(
            self.factors
                .iter()
                .zip(x.residues.iter().zip(&y.residues))
                .map(|(&m, (&a, &b))| ((a as u128 + b as u128) % m as u128) as u64)
                .collect(),
        )
    }

    pub fn neg(&self, x: &GroupElement) -> GroupElement {
        GroupElement::new(
            self.factors
                .iter()
                .zip(&x.residues)
                .map(|(&m, &a)| if a == 0 { 0 } else { m - a })
                .collect(),
        )
    }

    pub fn sub(&self, x: &GroupElement, y: &GroupElement) -> GroupElement {
        self.add(x, &self.neg(y))
    }

    /// `r·x` for an arbitrary integer `r`.
    pub fn scale(&self, r: i64, x: &GroupElement) -> GroupElement {
        GroupElement::new(
            self.factors
                .iter()
                .zip(&x.residues)
                .map(|(&m, &a)| {
                    let prod = (r as i128 * a as i128).rem_euclid(m as i128);
                    prod as u64
                })
                .collect(),
        )
    }

    /// `lcm_i m_i / gcd(x_i, m_i)`.
    pub fn element_order(&self, x: &GroupElement) -> u64 {
        self.factors
            .iter()
            .zip(&x.residues)
            .map(|(&m, &a)| m / gcd_u64(a, m))
            .fold(1, |acc, o| {
                lcm_u64(acc, o).expect("element order divides the exponent")
            })
    }

    /// `τ_G(r)`: the proportion of `x` with `r·x = 0`, with `τ_G(0) = 1`.
    pub fn torsion_proportion(&self, r: u64) -> BigRational {
        if r == 0 {
            return BigRational::one();
        }
        let mut num = BigInt::one();
        let mut den = BigInt::one();
        for &m in &self.factors {
            num *= BigInt::from(gcd_u64(r, m));
            den *= BigInt::from(m);
        }
        BigRational::new(num, den)
    }

    /// The pairing angle `⟨γ, x⟩ ∈ [0, 1)` as `numerator / exponent(G)`.
    pub fn pairing_numerator(&self, gamma: &Character, x: &GroupElement, exponent: u64) -> u128 {
        let l = exponent as u128;
        let mut acc: u128 = 0;
        for ((&m, &g), &a) in self.factors.iter().zip(&gamma.residues).zip(&x.residues) {
            let m = m as u128;
            let t = (g as u128 * a as u128) % m;
            acc = (acc + t * (l / m)) % l;
        }
        acc
    }

    /// The pairing angle `⟨γ, x⟩` as an exact rational in `[0, 1)`.
    pub fn pairing(&self, gamma: &Character, x: &GroupElement) -> Result<BigRational> {
        self.check(gamma)?;
        self.check(x)?;
        let l = self.exponent()?;
        let num = self.pairing_numerator(gamma, x, l);
        Ok(BigRational::new(BigInt::from(num), BigInt::from(l)))
    }

    /// Element with the given mixed-radix index (last coordinate fastest).
    pub fn element_at(&self, mut index: u64) -> GroupElement {
        let mut residues = vec![0; self.rank()];
        for (slot, &m) in residues.iter_mut().zip(&self.factors).rev() {
            *slot = index % m;
            index /= m;
        }
        GroupElement::new(residues)
    }

    /// Inverse of [`element_at`](Self::element_at).
    pub fn index_of(&self, x: &GroupElement) -> u64 {
        self.factors
            .iter()
            .zip(&x.residues)
            .fold(0u64, |acc, (&m, &a)| acc * m + a)
    }

    /// Every element exactly once, in lexicographic order.
    pub fn enumerate_elements(&self, cap: u64) -> Result<ElementIter<'_>> {
        let card = self.checked_cardinality()?;
        if card > cap {
            return Err(Error::cap("group enumeration", card, cap));
        }
        Ok(ElementIter {
            group: self,
            next: 0,
            len: card,
        })
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        GroupElement::new(self.factors.iter().map(|&m| rng.gen_range(0..m)).collect())
    }

    /// `ρ_G`: the law of the order of a uniform element. Groups within the
    /// enumeration cap are counted directly; larger ones use the closed form.
    pub fn order_distribution(&self, cap: u64) -> Result<BTreeMap<u64, BigRational>> {
        match self.checked_cardinality() {
            Ok(card) if card <= cap => self.order_distribution_enumerated(cap),
            _ => self.order_distribution_closed_form(),
        }
    }

    pub fn order_distribution_enumerated(&self, cap: u64) -> Result<BTreeMap<u64, BigRational>> {
        let card = self.checked_cardinality()?;
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for x in self.enumerate_elements(cap)? {
            *counts.entry(self.element_order(&x)).or_default() += 1;
        }
        Ok(counts
            .into_iter()
            .map(|(o, c)| (o, BigRational::new(BigInt::from(c), BigInt::from(card))))
            .collect())
    }

    /// Counts elements of exact order `r` by Möbius inversion of
    /// `#{x : s·x = 0} = Π gcd(s, m_i)` over the divisors of the exponent.
    pub fn order_distribution_closed_form(&self) -> Result<BTreeMap<u64, BigRational>> {
        let exponent = self.exponent()?;
        let card = BigInt::from(self.cardinality());
        let divs = divisors(exponent);
        let killed: BTreeMap<u64, BigInt> = divs
            .iter()
            .map(|&s| {
                let n = self
                    .factors
                    .iter()
                    .fold(BigInt::one(), |acc, &m| acc * BigInt::from(gcd_u64(s, m)));
                (s, n)
            })
            .collect();
        let mut out = BTreeMap::new();
        for &r in &divs {
            let mut count = BigInt::zero();
            for s in divisors(r) {
                match mobius(r / s) {
                    1 => count += &killed[&s],
                    -1 => count -= &killed[&s],
                    _ => {}
                }
            }
            if !count.is_zero() {
                out.insert(r, BigRational::new(count, card.clone()));
            }
        }
        Ok(out)
    }
}

impl fmt::Display for FiniteAbelianGroup {
    /// Group literal: comma-separated factors, runs written as `m^k`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut i = 0;
        while i < self.factors.len() {
            let m = self.factors[i];
            let mut j = i;
            while j < self.factors.len() && self.factors[j] == m {
                j += 1;
            }
            if !first {
                write!(f, ",")?;
            }
            first = false;
            if j - i == 1 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{m}^{}", j - i)?;
            }
            i = j;
        }
        Ok(())
    }
}

impl FromStr for FiniteAbelianGroup {
    type Err = Error;

    /// Parses `"2,3^8"`; the empty string is the trivial group with no factors.
    fn from_str(s: &str) -> Result<Self> {
        let err = |reason: String| Error::Parse {
            what: "group",
            input: s.to_string(),
            reason,
        };
        let t = s.trim();
        if t.is_empty() {
            return Self::new(Vec::new());
        }
        let mut factors = Vec::new();
        for part in t.split(',') {
            let part = part.trim();
            let (base, count) = match part.split_once('^') {
                Some((b, e)) => {
                    let count: usize = e
                        .trim()
                        .parse()
                        .map_err(|_| err(format!("bad power in {part:?}")))?;
                    if count == 0 {
                        return Err(err(format!("zero power in {part:?}")));
                    }
                    (b.trim(), count)
                }
                None => (part, 1),
            };
            let m: u64 = base
                .parse()
                .map_err(|_| err(format!("bad factor {base:?}")))?;
            if m == 0 {
                return Err(err("factor 0".into()));
            }
            factors.extend(std::iter::repeat_n(m, count));
        }
        Self::new(factors)
    }
}

impl TryFrom<String> for FiniteAbelianGroup {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FiniteAbelianGroup> for String {
    fn from(g: FiniteAbelianGroup) -> String {
        g.to_string()
    }
}

pub struct ElementIter<'a> {
    group: &'a FiniteAbelianGroup,
    next: u64,
    len: u64,
}

impl Iterator for ElementIter<'_> {
    type Item = GroupElement;

    fn next(&mut self) -> Option<GroupElement> {
        if self.next >= self.len {
            return None;
        }
        let x = self.group.element_at(self.next);
        self.next += 1;
        Some(x)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rem = (self.len - self.next) as usize;
        (rem, Some(rem))
    }
}

impl ExactSizeIterator for ElementIter<'_> {}

/// Sum of order-distribution weights over the divisors of `r`; equals
/// `τ_G(r)` for `r ≥ 1`.
pub fn torsion_from_orders(orders: &BTreeMap<u64, BigRational>, r: u64) -> BigRational {
    orders
        .iter()
        .filter(|(&o, _)| r.is_multiple_of(o))
        .fold(BigRational::zero(), |acc, (_, w)| acc + w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number_theory::ratio;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn g(s: &str) -> FiniteAbelianGroup {
        s.parse().unwrap()
    }

    /// Smallest r ≥ 1 with r·x = 0, by repeated addition.
    fn brute_order(group: &FiniteAbelianGroup, x: &GroupElement) -> u64 {
        let mut acc = x.clone();
        let mut r = 1;
        while acc != group.identity() {
            acc = group.add(&acc, x);
            r += 1;
        }
        r
    }

    #[test]
    fn cardinality_and_exponent() {
        assert_eq!(g("2,3").checked_cardinality().unwrap(), 6);
        assert_eq!(g("").checked_cardinality().unwrap(), 1);
        assert_eq!(g("3,3,3").checked_cardinality().unwrap(), 27);
        assert_eq!(g("2,3").exponent().unwrap(), 6);
        assert_eq!(g("4,2").exponent().unwrap(), 4);
        assert_eq!(g("1").exponent().unwrap(), 1);
    }

    #[test]
    fn cardinality_overflow_is_reported() {
        let big = FiniteAbelianGroup::homocyclic(1 << 32, 3).unwrap();
        assert_eq!(big.checked_cardinality(), Err(Error::Overflow("group cardinality")));
        assert_eq!(big.cardinality(), BigUint::from(1u8) << 96);
    }

    #[test]
    fn zero_factor_rejected() {
        assert!(FiniteAbelianGroup::new(vec![2, 0]).is_err());
        assert!("2,0".parse::<FiniteAbelianGroup>().is_err());
        assert!("3^0".parse::<FiniteAbelianGroup>().is_err());
        assert!("x".parse::<FiniteAbelianGroup>().is_err());
    }

    #[test]
    fn element_orders() {
        let z4 = g("4");
        assert_eq!(z4.element_order(&GroupElement::new(vec![2])), 2);
        let z23 = g("2,3");
        assert_eq!(z23.element_order(&z23.identity()), 1);
        let x = GroupElement::new(vec![1, 1]);
        assert_eq!(z23.element_order(&x), 6);
        assert_eq!(brute_order(&z23, &x), 6);
        for s in ["4", "2,3", "2,2", "6,4", "3^3", "12"] {
            let grp = g(s);
            let e = grp.exponent().unwrap();
            for x in grp.enumerate_elements(1000).unwrap() {
                let o = grp.element_order(&x);
                assert_eq!(o, brute_order(&grp, &x));
                assert_eq!(e % o, 0);
            }
        }
    }

    #[test]
    fn order_distribution_examples() {
        let d = g("4").order_distribution(1000).unwrap();
        assert_eq!(d[&1], ratio(1, 4));
        assert_eq!(d[&2], ratio(1, 4));
        assert_eq!(d[&4], ratio(1, 2));

        let twisted = g("2,3^8");
        let d = twisted.order_distribution(1_000_000).unwrap();
        let p8 = 3i64.pow(8);
        assert_eq!(d[&3], ratio(p8 - 1, 2 * p8));
        assert_eq!(d[&6], ratio(p8 - 1, 2 * p8));
        assert_eq!(d[&1], ratio(1, 2 * p8));
        assert_eq!(d[&2], ratio(1, 2 * p8));

        let d = g("1").order_distribution(10).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[&1], BigRational::one());
    }

    #[test]
    fn closed_form_matches_enumeration() {
        for s in ["4", "2,3", "2,2", "6,4", "3^3", "12", "2,4,8", "9,3", "1", ""] {
            let grp = g(s);
            assert_eq!(
                grp.order_distribution_enumerated(10_000).unwrap(),
                grp.order_distribution_closed_form().unwrap(),
                "{s}"
            );
        }
    }

    #[test]
    fn closed_form_beyond_cap() {
        let grp = g("3^30");
        let d = grp.order_distribution(1_000_000).unwrap();
        let total = d.values().fold(BigRational::zero(), |a, w| a + w);
        assert_eq!(total, BigRational::one());
        let p = BigInt::from(3u8).pow(30);
        assert_eq!(d[&1], BigRational::new(BigInt::one(), p));
    }

    #[test]
    fn torsion_examples() {
        assert_eq!(g("6").torsion_proportion(4), ratio(1, 3));
        assert_eq!(g("6").torsion_proportion(0), BigRational::one());
        assert_eq!(g("2,3").torsion_proportion(2), ratio(1, 3));
    }

    #[test]
    fn torsion_matches_order_distribution() {
        for s in ["4", "2,3", "2,2", "6,4", "3^3", "12", "2,4,8", "9,3,5"] {
            let grp = g(s);
            let orders = grp.order_distribution(1000).unwrap();
            for r in 1..40 {
                let brute = grp
                    .enumerate_elements(1000)
                    .unwrap()
                    .filter(|x| grp.scale(r as i64, x) == grp.identity())
                    .count();
                let card = grp.checked_cardinality().unwrap();
                assert_eq!(grp.torsion_proportion(r), ratio(brute as i64, card as i64));
                assert_eq!(grp.torsion_proportion(r), torsion_from_orders(&orders, r));
            }
        }
    }

    #[test]
    fn pairing_examples() {
        let z4 = g("4");
        let one = GroupElement::new(vec![1]);
        assert_eq!(z4.pairing(&one, &one).unwrap(), ratio(1, 4));
        let z23 = g("2,3");
        let p = z23
            .pairing(&GroupElement::new(vec![1, 1]), &GroupElement::new(vec![1, 2]))
            .unwrap();
        assert_eq!(p, ratio(1, 6));
        assert_eq!(z23.pairing(&z23.identity(), &GroupElement::new(vec![1, 2])).unwrap(), BigRational::zero());
    }

    #[test]
    fn enumeration_order_and_cap() {
        let items: Vec<_> = g("2").enumerate_elements(10).unwrap().collect();
        assert_eq!(items, vec![GroupElement::new(vec![0]), GroupElement::new(vec![1])]);
        assert_eq!(g("1").enumerate_elements(10).unwrap().count(), 1);
        let items: Vec<_> = g("2,2").enumerate_elements(10).unwrap().collect();
        assert_eq!(items.len(), 4);
        assert_eq!(items[1], GroupElement::new(vec![0, 1]));
        assert!(matches!(
            g("2^10").enumerate_elements(1000),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(g("1").sample_uniform(&mut rng), GroupElement::new(vec![0]));

        let z2 = g("2");
        let ones = (0..100_000)
            .filter(|_| z2.sample_uniform(&mut rng).residues[0] == 1)
            .count();
        let freq = ones as f64 / 1e5;
        assert!((0.49..=0.51).contains(&freq), "{freq}");

        let z23 = g("2,3");
        let trials = 60_000;
        let mut counts = vec![0usize; 6];
        for _ in 0..trials {
            counts[z23.index_of(&z23.sample_uniform(&mut rng)) as usize] += 1;
        }
        let p = 1.0 / 6.0;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - trials as f64 * p).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn literal_examples() {
        assert_eq!(g("2,3^8").factors(), &[2, 3, 3, 3, 3, 3, 3, 3, 3]);
        assert_eq!(g("2,3^8").to_string(), "2,3^8");
        assert_eq!(g("3,3").to_string(), "3^2");
        assert_eq!(g("").to_string(), "");
    }

    fn arb_group() -> impl Strategy<Value = FiniteAbelianGroup> {
        prop::collection::vec(1u64..13, 0..5).prop_map(|f| FiniteAbelianGroup::new(f).unwrap())
    }

    proptest! {
        #[test]
        fn literal_round_trip(grp in arb_group()) {
            let printed = grp.to_string();
            let reparsed: FiniteAbelianGroup = printed.parse().unwrap();
            prop_assert_eq!(&reparsed, &grp);
            prop_assert_eq!(reparsed.to_string(), printed);
        }

        #[test]
        fn pairing_is_biadditive(grp in arb_group(), seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gamma = grp.sample_uniform(&mut rng);
            let x = grp.sample_uniform(&mut rng);
            let y = grp.sample_uniform(&mut rng);
            let lhs = grp.pairing(&gamma, &grp.add(&x, &y)).unwrap();
            let mut rhs = grp.pairing(&gamma, &x).unwrap() + grp.pairing(&gamma, &y).unwrap();
            if rhs >= BigRational::one() {
                rhs -= BigRational::one();
            }
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn order_weights_sum_to_one(grp in arb_group()) {
            let d = grp.order_distribution(100_000).unwrap();
            let total = d.values().fold(BigRational::zero(), |a, w| a + w);
            prop_assert_eq!(total, BigRational::one());
            let e = grp.exponent().unwrap();
            prop_assert!(d.keys().all(|o| e % o == 0));
        }
    }
}

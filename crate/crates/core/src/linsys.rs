//! Densities of solutions of homogeneous integer linear systems `Ax = 0`
//! over a finite abelian group, via the Smith normal form.

use std::fmt;
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::FiniteAbelianGroup;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegerMatrix {
    rows: Vec<Vec<i64>>,
}

impl IntegerMatrix {
    pub fn new(rows: Vec<Vec<i64>>, entry_cap: i64) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || width == 0 {
            return Err(Error::invalid("matrix needs at least one row and one column"));
        }
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::invalid("rows have different lengths"));
        }
        if let Some(&a) = rows.iter().flatten().find(|a| a.unsigned_abs() > entry_cap.unsigned_abs()) {
            return Err(Error::cap("matrix entry", a, entry_cap.unsigned_abs()));
        }
        Ok(Self { rows })
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.rows
    }

    pub fn transpose(&self) -> Self {
        let rows = (0..self.col_count())
            .map(|j| self.rows.iter().map(|r| r[j]).collect())
            .collect();
        Self { rows }
    }
}

impl fmt::Display for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| r.iter().map(i64::to_string).collect::<Vec<_>>().join(","))
            .collect();
        f.write_str(&rows.join(";"))
    }
}

/// Rows separated by `;`, entries by `,`, e.g. `2,0;0,3`.
impl FromStr for IntegerMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |reason: String| Error::Parse {
            what: "matrix",
            input: s.to_string(),
            reason,
        };
        let rows = s
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|e| e.trim().parse::<i64>().map_err(|err| parse_err(format!("{e:?}: {err}"))))
                    .collect::<Result<Vec<i64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows, i64::MAX).map_err(|e| parse_err(e.to_string()))
    }
}

fn checked(v: Option<i64>) -> Result<i64> {
    v.ok_or(Error::Overflow("Smith normal form"))
}

/// Smith diagonal `d_1 | d_2 | …` of length `min(r, s)`, computed with
/// unimodular row and column operations in checked integer arithmetic.
pub fn snf_diagonal(a: &IntegerMatrix) -> Result<Vec<u64>> {
    let mut m: Vec<Vec<i64>> = a.rows.clone();
    let (r, s) = (a.row_count(), a.col_count());
    let n = r.min(s);
    let mut diag = Vec::with_capacity(n);
    for t in 0..n {
        loop {
            // pivot: smallest nonzero |entry| in the trailing block
            let pivot = (t..r)
                .flat_map(|i| (t..s).map(move |j| (i, j)))
                .filter(|&(i, j)| m[i][j] != 0)
                .min_by_key(|&(i, j)| m[i][j].unsigned_abs());
            let Some((pi, pj)) = pivot else {
                diag.extend(std::iter::repeat_n(0, n - t));
                return finish(diag);
            };
            m.swap(t, pi);
            for row in m.iter_mut() {
                row.swap(t, pj);
            }
            let p = m[t][t];
            let mut clean = true;
            for i in t + 1..r {
                let q = m[i][t] / p;
                if q != 0 {
                    for j in t..s {
                        m[i][j] = checked(m[i][j].checked_sub(checked(q.checked_mul(m[t][j]))?))?;
                    }
                }
                clean &= m[i][t] == 0;
            }
            for j in t + 1..s {
                let q = m[t][j] / p;
                if q != 0 {
                    for i in t..r {
                        m[i][j] = checked(m[i][j].checked_sub(checked(q.checked_mul(m[i][t]))?))?;
                    }
                }
                clean &= m[t][j] == 0;
            }
            if !clean {
                continue;
            }
            // the pivot must divide the rest of the block
            let offender = (t + 1..r)
                .flat_map(|i| (t + 1..s).map(move |j| (i, j)))
                .find(|&(i, j)| m[i][j] % p != 0);
            match offender {
                Some((i, _)) => {
                    for j in t..s {
                        m[t][j] = checked(m[t][j].checked_add(m[i][j]))?;
                    }
                }
                None => {
                    diag.push(p.unsigned_abs());
                    break;
                }
            }
        }
    }
    finish(diag)
}

fn finish(diag: Vec<u64>) -> Result<Vec<u64>> {
    debug_assert!(diag.windows(2).all(|w| w[1] == 0 || w[1] % w[0] == 0));
    Ok(diag)
}

/// `P_{x ∈ G^s}(Ax = 0) = Π_i τ_G(d_i)`.
pub fn solution_density(a: &IntegerMatrix, group: &FiniteAbelianGroup) -> Result<BigRational> {
    Ok(snf_diagonal(a)?
        .into_iter()
        .fold(BigRational::one(), |acc, d| acc * group.torsion_proportion(d)))
}

/// The same density by counting all `|G|^s` tuples.
pub fn solution_density_bruteforce(a: &IntegerMatrix, group: &FiniteAbelianGroup, cap: u64) -> Result<BigRational> {
    let card = group.checked_cardinality()?;
    let s = a.col_count();
    let total = u32::try_from(s)
        .ok()
        .and_then(|e| card.checked_pow(e))
        .filter(|&t| t <= cap)
        .ok_or_else(|| Error::cap("tuple count |G|^s", format!("{card}^{s}"), cap))?;
    let elements: Vec<_> = group.enumerate_elements(u64::MAX)?.collect();
    let zero = group.identity();
    let mut hits: u64 = 0;
    for idx in 0..total {
        let mut rest = idx;
        let x: Vec<_> = (0..s)
            .map(|_| {
                let e = &elements[(rest % card) as usize];
                rest /= card;
                e
            })
            .collect();
        let solves = a.rows.iter().all(|row| {
            row.iter()
                .zip(&x)
                .fold(zero.clone(), |acc, (&c, xi)| group.add(&acc, &group.scale(c, xi)))
                == zero
        });
        if solves {
            hits += 1;
        }
    }
    Ok(BigRational::new(BigInt::from(hits), BigInt::from(total)))
}

/// Whether `Ax = 0` and `Aᵀy = 0` have the same solution density.
pub fn transpose_duality_check(a: &IntegerMatrix, group: &FiniteAbelianGroup) -> Result<bool> {
    Ok(solution_density(a, group)? == solution_density(&a.transpose(), group)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number_theory::{gcd_all, ratio};
    use proptest::prelude::*;

    fn mat(s: &str) -> IntegerMatrix {
        s.parse().unwrap()
    }

    fn g(s: &str) -> FiniteAbelianGroup {
        s.parse().unwrap()
    }

    #[test]
    fn literal_round_trip() {
        assert_eq!(mat("2,0;0,3").to_string(), "2,0;0,3");
        assert_eq!(mat(" -1 , 4 ").rows(), &[vec![-1, 4]]);
        assert!("1,2;3".parse::<IntegerMatrix>().is_err());
        assert!("".parse::<IntegerMatrix>().is_err());
        assert!("1,x".parse::<IntegerMatrix>().is_err());
        assert!(IntegerMatrix::new(vec![vec![7]], 5).is_err());
    }

    #[test]
    fn snf_examples() {
        assert_eq!(snf_diagonal(&mat("2,0;0,3")).unwrap(), vec![1, 6]);
        assert_eq!(snf_diagonal(&mat("0,0;0,0")).unwrap(), vec![0, 0]);
        assert_eq!(snf_diagonal(&mat("2,4")).unwrap(), vec![2]);
        assert_eq!(snf_diagonal(&mat("2,4,4;-6,6,12;10,-4,-16")).unwrap(), vec![2, 6, 12]);
    }

    #[test]
    fn density_examples() {
        assert_eq!(solution_density(&mat("2"), &g("4")).unwrap(), ratio(1, 2));
        assert_eq!(solution_density(&mat("2,2"), &g("4")).unwrap(), ratio(1, 2));
        for grp in ["5", "2,3", "3^3"] {
            let group = g(grp);
            let n = group.checked_cardinality().unwrap() as i64;
            assert_eq!(solution_density(&mat("1"), &group).unwrap(), ratio(1, n));
            assert_eq!(solution_density_bruteforce(&mat("1"), &group, 1_000_000).unwrap(), ratio(1, n));
        }
        assert_eq!(solution_density_bruteforce(&mat("2"), &g("4"), 100).unwrap(), ratio(1, 2));
        assert_eq!(solution_density_bruteforce(&mat("2,2"), &g("4"), 100).unwrap(), ratio(1, 2));
        assert!(solution_density_bruteforce(&mat("1,1,1"), &g("200"), 1_000_000).is_err());
    }

    #[test]
    fn duality_examples() {
        assert!(transpose_duality_check(&mat("2,2"), &g("4")).unwrap());
        assert!(transpose_duality_check(&mat("1,2;2,5"), &g("6")).unwrap());
        let a = mat("1;1");
        assert_eq!(solution_density(&a, &g("6")).unwrap(), ratio(1, 6));
        assert!(transpose_duality_check(&a, &g("6")).unwrap());
    }

    fn det2(m: [[i64; 2]; 2]) -> i64 {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// gcd of all maximal minors, by cofactor enumeration.
    fn minor_gcd(a: &IntegerMatrix) -> u64 {
        let rows = a.rows();
        let (r, s) = (a.row_count(), a.col_count());
        assert_eq!(r.min(s), 2);
        let mut minors = Vec::new();
        if r == 2 {
            for j in 0..s {
                for l in j + 1..s {
                    minors.push(det2([[rows[0][j], rows[0][l]], [rows[1][j], rows[1][l]]]));
                }
            }
        } else {
            for i in 0..r {
                for k in i + 1..r {
                    minors.push(det2([[rows[i][0], rows[i][1]], [rows[k][0], rows[k][1]]]));
                }
            }
        }
        gcd_all(minors)
    }

    fn matrix_strategy(max_r: usize, max_s: usize) -> impl Strategy<Value = IntegerMatrix> {
        (1..=max_r, 1..=max_s).prop_flat_map(|(r, s)| {
            proptest::collection::vec(proptest::collection::vec(-5i64..=5, s), r)
                .prop_map(|rows| IntegerMatrix::new(rows, 5).unwrap())
        })
    }

    proptest! {
        #[test]
        fn divisibility_chain_and_minors(a in matrix_strategy(3, 3)) {
            let diag = snf_diagonal(&a).unwrap();
            prop_assert_eq!(diag.len(), a.row_count().min(a.col_count()));
            for w in diag.windows(2) {
                prop_assert!(w[1] == 0 || (w[0] != 0 && w[1] % w[0] == 0));
            }
            if a.row_count().min(a.col_count()) == 2 && a.row_count().max(a.col_count()) <= 3 {
                let prod = if diag.contains(&0) { 0 } else { diag.iter().product() };
                prop_assert_eq!(prod, minor_gcd(&a));
            }
            prop_assert_eq!(snf_diagonal(&a.transpose()).unwrap(), diag);
        }

        #[test]
        fn density_matches_enumeration(
            a in matrix_strategy(3, 3),
            grp in prop::sample::select(vec!["2", "3", "4", "6", "2,2", "2,3", "9", "12"]),
        ) {
            let group = g(grp);
            prop_assert_eq!(
                solution_density(&a, &group).unwrap(),
                solution_density_bruteforce(&a, &group, 1_000_000).unwrap()
            );
            prop_assert!(transpose_duality_check(&a, &group).unwrap());
        }
    }
}

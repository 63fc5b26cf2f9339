//! Integer helpers shared by the group, limit-law and lattice code.
//!
//! All gcd-style functions follow the convention that the gcd of an
//! all-zero (or empty) list is 0.

use num::bigint::BigInt;
use num::complex::Complex64;
use num::rational::BigRational;
use num::{One, Zero};

use crate::error::{Error, Result};

pub fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn gcd_i64(a: i64, b: i64) -> u64 {
    gcd_u64(a.unsigned_abs(), b.unsigned_abs())
}

/// gcd of a list of integers; 0 when every entry is 0.
pub fn gcd_all<I: IntoIterator<Item = i64>>(values: I) -> u64 {
    values.into_iter().fold(0, |g, v| gcd_u64(g, v.unsigned_abs()))
}

pub fn lcm_u64(a: u64, b: u64) -> Option<u64> {
    if a == 0 || b == 0 {
        return Some(0);
    }
    (a / gcd_u64(a, b)).checked_mul(b)
}

/// Prime factorisation by trial division, as `(prime, exponent)` pairs in
/// increasing order. `factorize(1)` is empty.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    assert!(n > 0, "factorize(0)");
    let mut out = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// All positive divisors of `n`, sorted.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut divs = vec![1u64];
    for (p, e) in factorize(n) {
        let len = divs.len();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                divs.push(divs[i] * pk);
            }
        }
    }
    divs.sort_unstable();
    divs
}

/// Euler's totient.
pub fn euler_totient(m: u64) -> u64 {
    assert!(m > 0, "totient of 0");
    factorize(m)
        .into_iter()
        .fold(m, |acc, (p, _)| acc / p * (p - 1))
}

/// Möbius function.
pub fn mobius(k: u64) -> i8 {
    assert!(k > 0, "mobius of 0");
    let mut sign = 1i8;
    for (_, e) in factorize(k) {
        if e > 1 {
            return 0;
        }
        sign = -sign;
    }
    sign
}

pub fn is_prime_power(m: u64) -> bool {
    m > 1 && factorize(m).len() == 1
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    use num::ToPrimitive;
    q.to_f64().unwrap_or(f64::NAN)
}

/// Formats a rational as `p/q`, or `p` when the denominator is 1.
pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses an exact rational from `p`, `p/q` or a plain decimal like `-0.25`.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let err = |reason: &str| Error::Parse {
        what: "rational",
        input: s.to_string(),
        reason: reason.to_string(),
    };
    let t = s.trim();
    if t.is_empty() {
        return Err(err("empty"));
    }
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| err("bad numerator"))?;
        let q: BigInt = q.trim().parse().map_err(|_| err("bad denominator"))?;
        if q.is_zero() {
            return Err(err("zero denominator"));
        }
        return Ok(BigRational::new(p, q));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("no digits"));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err("expected digits"));
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| err("bad digits"))?
    };
    let denom = num::pow(BigInt::from(10), frac_part.len());
    let q = BigRational::new(numer, denom);
    Ok(if neg { -q } else { q })
}

/// `e(num/den) = exp(2πi·num/den)` with the argument reduced exactly mod 1.
///
/// Evaluation goes through the first octant so that quarter-turn values are
/// exact and `e(-x)` is bitwise the conjugate of `e(x)`.
pub fn root_of_unity(num: u128, den: u128) -> Complex64 {
    assert!(den > 0, "root_of_unity with zero denominator");
    let num = num % den;
    if num == 0 {
        return Complex64::new(1.0, 0.0);
    }
    if num > den - num {
        return root_of_unity(den - num, den).conj();
    }
    // quadrant index and remainder: 4·num = quadrant·den + rem
    let Some(four) = num.checked_mul(4) else {
        // denominators beyond 2^126 never arise from enumerable groups
        let (s, c) = (std::f64::consts::TAU * (num as f64 / den as f64)).sin_cos();
        return Complex64::new(c, s);
    };
    let (quadrant, rem) = (four / den, four % den);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let (c, s) = if rem.saturating_mul(2) <= den {
        let (s, c) = (half_pi * (rem as f64 / den as f64)).sin_cos();
        (c, s)
    } else {
        let (s, c) = (half_pi * ((den - rem) as f64 / den as f64)).sin_cos();
        (s, c)
    };
    match quadrant {
        0 => Complex64::new(c, s),
        1 => Complex64::new(-s, c),
        2 => Complex64::new(-c, -s),
        _ => Complex64::new(s, -c),
    }
}

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: f64,
    re_c: f64,
    im: f64,
    im_c: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, &mut self.re_c, z.re);
        neumaier(&mut self.im, &mut self.im_c, z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_c, self.im + self.im_c)
    }
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

/// Compensated sum of real values.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for v in values {
        neumaier(&mut s, &mut c, v);
    }
    s + c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totient_values() {
        assert_eq!(euler_totient(1), 1);
        assert_eq!(euler_totient(12), 4);
        assert_eq!(euler_totient(7), 6);
        for m in 1..200u64 {
            let brute = (1..=m).filter(|&k| gcd_u64(k, m) == 1).count() as u64;
            assert_eq!(euler_totient(m), brute, "m={m}");
        }
    }

    #[test]
    fn mobius_values() {
        assert_eq!(mobius(1), 1);
        assert_eq!(mobius(6), 1);
        assert_eq!(mobius(12), 0);
        assert_eq!(mobius(30), -1);
        // Σ_{d|n} μ(d) = [n = 1]
        for n in 1..300u64 {
            let s: i64 = divisors(n).into_iter().map(|d| mobius(d) as i64).sum();
            assert_eq!(s, (n == 1) as i64);
        }
    }

    #[test]
    fn gcd_zero_convention() {
        assert_eq!(gcd_all([0, 0, 0]), 0);
        assert_eq!(gcd_all([]), 0);
        assert_eq!(gcd_all([0, -4, 6]), 2);
    }

    #[test]
    fn divisors_sorted() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(1), vec![1]);
    }

    #[test]
    fn rational_literals() {
        assert_eq!(parse_rational("1/2").unwrap(), ratio(1, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), ratio(-1, 4));
        assert_eq!(parse_rational("3").unwrap(), ratio(3, 1));
        assert_eq!(parse_rational(".5").unwrap(), ratio(1, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert_eq!(format_rational(&ratio(6, 4)), "3/2");
        assert_eq!(format_rational(&ratio(4, 2)), "2");
    }

    #[test]
    fn roots_of_unity_exact_quarters() {
        assert_eq!(root_of_unity(0, 4), Complex64::new(1.0, 0.0));
        assert_eq!(root_of_unity(1, 4), Complex64::new(0.0, 1.0));
        assert_eq!(root_of_unity(2, 4), Complex64::new(-1.0, 0.0));
        assert_eq!(root_of_unity(3, 4), Complex64::new(0.0, -1.0));
        assert_eq!(root_of_unity(5, 4), Complex64::new(0.0, 1.0));
    }

    #[test]
    fn roots_of_unity_conjugate_bitwise() {
        for den in 1..60u128 {
            for num in 0..den {
                let z = root_of_unity(num, den);
                let w = root_of_unity(den - num, den);
                assert_eq!(z.conj(), w, "{num}/{den}");
                let t = std::f64::consts::TAU * num as f64 / den as f64;
                assert!((z.re - t.cos()).abs() < 4e-15 && (z.im - t.sin()).abs() < 4e-15);
            }
        }
    }
}

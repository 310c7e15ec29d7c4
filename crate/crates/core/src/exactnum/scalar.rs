use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::ExactError;

/// An element of ℚ(√r₁, …, √rₙ), stored as rational coordinates over square-free keys.
///
/// The key `1` holds the rational part; a key `k > 1` holds the coefficient of `√k`.
/// Keys are kept sorted and zero coefficients are never stored, so structural
/// equality coincides with numeric equality.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct ExactScalar {
    terms: Vec<(u64, BigRational)>,
}

/// Exact zero/rationality classification of a scalar.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub is_zero: bool,
    pub is_rational: bool,
    pub rational_value: Option<BigRational>,
}

impl ExactScalar {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::from_integer(1)
    }

    pub fn from_integer(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Self::from_rational(BigRational::from_integer(n))
    }

    /// `num/den`; panics if `den == 0`.
    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_rational(q: BigRational) -> Self {
        Self::term(q, 1)
    }

    /// `coeff * √key` for a square-free `key`.
    pub(crate) fn term(coeff: BigRational, key: u64) -> Self {
        debug_assert!(key >= 1);
        if coeff.is_zero() {
            Self::zero()
        } else {
            Self {
                terms: vec![(key, coeff)],
            }
        }
    }

    /// Exact `√n`, with square factors pulled out (`√8 = 2√2`).
    ///
    /// No radicand restriction is applied here; see [`super::RadicandSet::sqrt`].
    pub fn sqrt(n: u64) -> Self {
        if n == 0 {
            return Self::zero();
        }
        let (outer, inner) = square_free_decompose(n);
        Self::term(BigRational::from_integer(BigInt::from(outer)), inner)
    }

    /// Builds a scalar from raw `(key, coefficient)` pairs. Keys must be square-free.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (u64, BigRational)>,
    {
        let mut acc: BTreeMap<u64, BigRational> = BTreeMap::new();
        for (k, c) in terms {
            debug_assert!(k >= 1 && square_free_decompose(k).0 == 1, "key {k} not square-free");
            *acc.entry(k).or_insert_with(BigRational::zero) += c;
        }
        Self::from_map(acc)
    }

    fn from_map(acc: BTreeMap<u64, BigRational>) -> Self {
        Self {
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn terms(&self) -> &[(u64, BigRational)] {
        &self.terms
    }

    pub fn keys(&self) -> impl Iterator<Item = u64> + '_ {
        self.terms.iter().map(|(k, _)| *k)
    }

    pub fn coeff(&self, key: u64) -> Option<&BigRational> {
        self.terms
            .binary_search_by_key(&key, |(k, _)| *k)
            .ok()
            .map(|i| &self.terms[i].1)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_rational(&self) -> bool {
        self.terms.iter().all(|(k, _)| *k == 1)
    }

    pub fn rational_value(&self) -> Option<BigRational> {
        match self.terms.as_slice() {
            [] => Some(BigRational::zero()),
            [(1, c)] => Some(c.clone()),
            _ => None,
        }
    }

    /// Exact integer value, if the scalar is an integer.
    pub fn integer_value(&self) -> Option<BigInt> {
        self.rational_value().filter(|q| q.is_integer()).map(|q| q.to_integer())
    }

    pub fn classify(&self) -> Classification {
        let rational_value = self.rational_value();
        Classification {
            is_zero: self.is_zero(),
            is_rational: rational_value.is_some(),
            rational_value,
        }
    }

    pub fn mul_rational(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(k, c)| (*k, c * q)).collect(),
        }
    }

    pub fn mul_integer(&self, n: i64) -> Self {
        self.mul_rational(&BigRational::from_integer(BigInt::from(n)))
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self, ExactError> {
        Ok(self * &rhs.inverse()?)
    }

    /// Multiplicative inverse, computed by multiplying through by Galois conjugates
    /// until the denominator becomes rational.
    pub fn inverse(&self) -> Result<Self, ExactError> {
        if self.is_zero() {
            return Err(ExactError::DivisionByZero);
        }
        let mut numerator = Self::one();
        let mut reduced = self.clone();
        for p in self.primes() {
            let conj = reduced.conjugate(p);
            numerator = &numerator * &conj;
            reduced = &reduced * &conj;
        }
        let norm = reduced
            .rational_value()
            .expect("product over all conjugates is rational");
        debug_assert!(!norm.is_zero());
        Ok(numerator.mul_rational(&norm.recip()))
    }

    /// The automorphism `√p ↦ −√p` for a prime `p`.
    fn conjugate(&self, p: u64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| if k % p == 0 { (*k, -c) } else { (*k, c.clone()) })
                .collect(),
        }
    }

    fn primes(&self) -> Vec<u64> {
        let mut ps: Vec<u64> = self.keys().flat_map(prime_factors).collect();
        ps.sort_unstable();
        ps.dedup();
        ps
    }

    /// Common denominator of all coefficients.
    pub fn denominator_lcm(&self) -> BigInt {
        self.terms.iter().fold(BigInt::one(), |acc, (_, c)| acc.lcm(c.denom()))
    }

    /// Exact sign.
    pub fn signum(&self) -> Ordering {
        match self.terms.as_slice() {
            [] => return Ordering::Equal,
            [(_, c)] => return sign_of(c),
            _ => {}
        }
        if let Some(s) = self.fast_sign() {
            return s;
        }
        let (_, ints) = self.integer_form();
        let mut bits = 64u32;
        loop {
            let (lo, hi) = interval_scaled(&ints, bits);
            if lo.is_positive() {
                return Ordering::Greater;
            }
            if hi.is_negative() {
                return Ordering::Less;
            }
            bits *= 2;
        }
    }

    fn fast_sign(&self) -> Option<Ordering> {
        let mut sum = 0.0f64;
        let mut mag = 0.0f64;
        for (k, c) in &self.terms {
            let t = c.to_f64()? * (*k as f64).sqrt();
            if !t.is_finite() {
                return None;
            }
            sum += t;
            mag += t.abs();
        }
        let bound = (8.0 + self.terms.len() as f64) * f64::EPSILON * mag;
        if !(mag > 0.0 && mag.is_finite()) {
            return None;
        }
        if sum > bound {
            Some(Ordering::Greater)
        } else if sum < -bound {
            Some(Ordering::Less)
        } else {
            None
        }
    }

    /// Clears denominators: `self = (Σ aₖ √k) / den` with integer `aₖ`.
    fn integer_form(&self) -> (BigInt, Vec<(u64, BigInt)>) {
        let den = self.denominator_lcm();
        let ints = self
            .terms
            .iter()
            .map(|(k, c)| (*k, c.numer() * (&den / c.denom())))
            .collect();
        (den, ints)
    }

    /// Double-precision approximation with relative error below 2⁻⁵⁰.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let same_sign =
            self.terms.iter().all(|(_, c)| c.is_positive()) || self.terms.iter().all(|(_, c)| c.is_negative());
        if same_sign {
            let s: f64 = self
                .terms
                .iter()
                .map(|(k, c)| c.to_f64().unwrap_or(f64::NAN) * (*k as f64).sqrt())
                .sum();
            if s.is_finite() && s != 0.0 {
                return s;
            }
        }
        let (den, ints) = self.integer_form();
        let mut bits = 96u32;
        loop {
            let (lo, hi) = interval_scaled(&ints, bits);
            let width = &hi - &lo;
            // relative width ≤ 2⁻⁵² once the interval excludes zero
            if lo.sign() == hi.sign() && lo.sign() != Sign::NoSign {
                let lo_abs = lo.abs().min(hi.abs());
                if (width.clone() << 52u32) <= lo_abs {
                    let q = BigRational::new(lo, den << bits);
                    return q.to_f64().unwrap_or(f64::NAN);
                }
            }
            bits *= 2;
        }
    }

    /// Canonical textual form, e.g. `1 - 3/2*sqrt(2)`.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

fn sign_of(c: &BigRational) -> Ordering {
    if c.is_positive() {
        Ordering::Greater
    } else if c.is_negative() {
        Ordering::Less
    } else {
        Ordering::Equal
    }
}

/// Bounds `[lo, hi]` on `2^bits · Σ aₖ √k`.
fn interval_scaled(ints: &[(u64, BigInt)], bits: u32) -> (BigInt, BigInt) {
    let mut lo = BigInt::zero();
    let mut hi = BigInt::zero();
    for (k, a) in ints {
        if *k == 1 {
            let v = a << bits;
            lo += &v;
            hi += v;
            continue;
        }
        let s = (BigInt::from(*k) << (2 * bits)).sqrt();
        let lo_term = a * &s;
        let hi_term = a * (&s + 1u32);
        if a.is_positive() {
            lo += lo_term;
            hi += hi_term;
        } else {
            lo += hi_term;
            hi += lo_term;
        }
    }
    (lo, hi)
}

/// Writes `n = outer² · inner` with `inner` square-free.
pub(crate) fn square_free_decompose(mut n: u64) -> (u64, u64) {
    debug_assert!(n > 0);
    let mut outer = 1u64;
    let mut inner = 1u64;
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        let mut e = 0;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        outer *= p.pow(e / 2);
        if e % 2 == 1 {
            inner *= p;
        }
        p += if p == 2 { 1 } else { 2 };
    }
    inner *= n;
    (outer, inner)
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// `√a · √b = g · √(ab/g²)` for square-free `a`, `b` with `g = gcd(a, b)`.
fn key_product(a: u64, b: u64) -> (u64, u64) {
    let g = a.gcd(&b);
    let key = (a / g).checked_mul(b / g).expect("radicand product overflows u64");
    (key, g)
}

impl<'a> Add<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;

    fn add(self, rhs: &'a ExactScalar) -> ExactScalar {
        let mut out = Vec::with_capacity(self.terms.len() + rhs.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < rhs.terms.len() {
            let (ka, ca) = &self.terms[i];
            let (kb, cb) = &rhs.terms[j];
            match ka.cmp(kb) {
                Ordering::Less => {
                    out.push((*ka, ca.clone()));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((*kb, cb.clone()));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = ca + cb;
                    if !c.is_zero() {
                        out.push((*ka, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.terms[i..]);
        out.extend_from_slice(&rhs.terms[j..]);
        ExactScalar { terms: out }
    }
}

impl<'a> Sub<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;

    fn sub(self, rhs: &'a ExactScalar) -> ExactScalar {
        self + &(-rhs)
    }
}

impl Neg for &ExactScalar {
    type Output = ExactScalar;

    fn neg(self) -> ExactScalar {
        ExactScalar {
            terms: self.terms.iter().map(|(k, c)| (*k, -c)).collect(),
        }
    }
}

impl Neg for ExactScalar {
    type Output = ExactScalar;

    fn neg(self) -> ExactScalar {
        -&self
    }
}

impl<'a> Mul<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;

    fn mul(self, rhs: &'a ExactScalar) -> ExactScalar {
        if self.is_zero() || rhs.is_zero() {
            return ExactScalar::zero();
        }
        if let [(1, c)] = self.terms.as_slice() {
            return rhs.mul_rational(c);
        }
        if let [(1, c)] = rhs.terms.as_slice() {
            return self.mul_rational(c);
        }
        let mut acc: BTreeMap<u64, BigRational> = BTreeMap::new();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &rhs.terms {
                let (key, factor) = key_product(*ka, *kb);
                let mut c = ca * cb;
                if factor != 1 {
                    c *= BigRational::from_integer(BigInt::from(factor));
                }
                *acc.entry(key).or_insert_with(BigRational::zero) += c;
            }
        }
        ExactScalar::from_map(acc)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<ExactScalar> for ExactScalar {
            type Output = ExactScalar;
            fn $m(self, rhs: ExactScalar) -> ExactScalar {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a ExactScalar> for ExactScalar {
            type Output = ExactScalar;
            fn $m(self, rhs: &'a ExactScalar) -> ExactScalar {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl PartialOrd for ExactScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Numeric order. Equality is structural, so this is consistent with `Eq`.
impl Ord for ExactScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        if let (Some(a), Some(b)) = (self.rational_value(), other.rational_value()) {
            return a.cmp(&b);
        }
        (self - other).signum()
    }
}

impl From<i64> for ExactScalar {
    fn from(n: i64) -> Self {
        Self::from_integer(n)
    }
}

impl From<BigRational> for ExactScalar {
    fn from(q: BigRational) -> Self {
        Self::from_rational(q)
    }
}

fn write_rational(f: &mut fmt::Formatter<'_>, q: &BigRational) -> fmt::Result {
    if q.is_integer() {
        write!(f, "{}", q.numer())
    } else {
        write!(f, "{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (idx, (k, c)) in self.terms.iter().enumerate() {
            let mag = c.abs();
            if idx == 0 {
                if c.is_negative() {
                    f.write_str("-")?;
                }
            } else if c.is_negative() {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            if *k == 1 {
                write_rational(f, &mag)?;
            } else if mag.is_one() {
                write!(f, "sqrt({k})")?;
            } else {
                write_rational(f, &mag)?;
                write!(f, "*sqrt({k})")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExactScalar({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> ExactScalar {
        ExactScalar::from_ratio(n, d)
    }

    #[test]
    fn basis_closure() {
        let r = &ExactScalar::sqrt(2) * &ExactScalar::sqrt(3);
        assert_eq!(r, ExactScalar::sqrt(6));
        let r = &ExactScalar::sqrt(6) * &ExactScalar::sqrt(10);
        assert_eq!(r, ExactScalar::sqrt(15).mul_integer(2));
    }

    #[test]
    fn difference_of_squares() {
        let a = &ExactScalar::one() + &ExactScalar::sqrt(2);
        let b = &ExactScalar::one() - &ExactScalar::sqrt(2);
        assert_eq!(&a * &b, ExactScalar::from_integer(-1));
    }

    #[test]
    fn rationalization() {
        let r = ExactScalar::one().checked_div(&ExactScalar::sqrt(2)).unwrap();
        assert_eq!(
            r,
            ExactScalar::sqrt(2).mul_rational(&BigRational::new(1.into(), 2.into()))
        );
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let err = ExactScalar::one().checked_div(&ExactScalar::zero()).unwrap_err();
        assert!(matches!(err, ExactError::DivisionByZero));
    }

    #[test]
    fn inverse_in_triquadratic_field() {
        let x = ExactScalar::from_terms([
            (1, BigRational::from_integer(3.into())),
            (2, BigRational::from_integer((-1).into())),
            (15, BigRational::new(2.into(), 7.into())),
            (30, BigRational::from_integer(5.into())),
        ]);
        let inv = x.inverse().unwrap();
        assert_eq!(&x * &inv, ExactScalar::one());
    }

    #[test]
    fn classification() {
        let c = ExactScalar::sqrt(2).classify();
        assert!(!c.is_rational && !c.is_zero);
        let c = q(6, 4).classify();
        assert!(c.is_rational);
        assert_eq!(c.rational_value, Some(BigRational::new(3.into(), 2.into())));
        let c = (&ExactScalar::sqrt(2) - &ExactScalar::sqrt(2)).classify();
        assert!(c.is_zero && c.is_rational);
    }

    #[test]
    fn approximations() {
        assert_eq!(q(3, 2).to_f64(), 1.5);
        assert!((ExactScalar::sqrt(2).to_f64() - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(ExactScalar::zero().to_f64(), 0.0);
        // 99 - 70√2 ≈ 0.00505, heavy cancellation
        let x = &ExactScalar::from_integer(99) - &ExactScalar::sqrt(2).mul_integer(70);
        let expect = 1.0 / (99.0 + 70.0 * std::f64::consts::SQRT_2);
        assert!(((x.to_f64() - expect) / expect).abs() < 2f64.powi(-50));
    }

    #[test]
    fn sign_under_cancellation() {
        // (1+√2)^20 - round: 47321 + 33461√2 vs its conjugate-ish neighbours
        let x = &ExactScalar::from_integer(665857) - &ExactScalar::sqrt(2).mul_integer(470832);
        assert_eq!(x.signum(), Ordering::Greater);
        assert_eq!((-&x).signum(), Ordering::Less);
        assert!(ExactScalar::sqrt(3) > ExactScalar::sqrt(2));
        assert!(q(-1, 3) < ExactScalar::zero());
    }

    #[test]
    fn display_forms() {
        let x = &ExactScalar::one() - &ExactScalar::sqrt(2).mul_rational(&BigRational::new(3.into(), 2.into()));
        assert_eq!(x.to_string(), "1 - 3/2*sqrt(2)");
        assert_eq!((-ExactScalar::sqrt(6)).to_string(), "-sqrt(6)");
        assert_eq!(ExactScalar::zero().to_string(), "0");
        assert_eq!(ExactScalar::sqrt(8).to_string(), "2*sqrt(2)");
    }

    #[test]
    fn square_free_parts() {
        assert_eq!(square_free_decompose(72), (6, 2));
        assert_eq!(square_free_decompose(30), (1, 30));
        assert_eq!(square_free_decompose(49), (7, 1));
    }
}

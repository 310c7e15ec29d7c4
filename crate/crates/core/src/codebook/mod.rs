//! Monomials in the off-diagonal channel entries and the codebooks `W_{N,d}` they span.

pub mod embed;
pub mod sumset;

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{offdiag_positions, ChannelMatrix};
use crate::exactnum::ExactScalar;
use embed::{Embedding, Point};
pub use sumset::{Limits, SumsetError};
use sumset::{Sumset, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum CodebookError {
    #[error("{0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Resource(#[from] SumsetError),
    #[error("codebook values do not fit in 64-bit lattice coordinates")]
    Overflow,
}

/// Binomial `C(K(K−1)+d, d)`: the number of monomials of degree ≤ d in K(K−1) variables.
pub fn phi(k: usize, d: u32) -> BigUint {
    let n = k * k.saturating_sub(1);
    let mut acc = BigUint::one();
    for i in 1..=d as usize {
        acc = acc * BigUint::from(n + i) / BigUint::from(i);
    }
    acc
}

/// Exponent vector over the off-diagonal entries, in ĥ order.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial {
    exponents: Vec<u32>,
}

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self { exponents }
    }

    pub fn constant(vars: usize) -> Self {
        Self {
            exponents: vec![0; vars],
        }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn evaluate(&self, hhat: &[ExactScalar]) -> ExactScalar {
        let mut acc = ExactScalar::one();
        for (h, &e) in hhat.iter().zip(&self.exponents) {
            for _ in 0..e {
                acc = &acc * h;
            }
        }
        acc
    }

    /// Formats as e.g. `h12^2*h31`, naming variables by their channel position.
    pub fn display(&self, k: usize) -> String {
        let pos = offdiag_positions(k);
        let parts: Vec<String> = self
            .exponents
            .iter()
            .zip(&pos)
            .filter(|(e, _)| **e > 0)
            .map(|(e, (i, j))| {
                if *e == 1 {
                    format!("h{}{}", i + 1, j + 1)
                } else {
                    format!("h{}{}^{}", i + 1, j + 1, e)
                }
            })
            .collect();
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("*")
        }
    }
}

/// All monomials of degree ≤ d in K(K−1) variables: by degree, then lexicographically
/// descending (`h12 > h13 > … > hK,K−1`). The constant monomial comes first.
pub fn enumerate_monomials(k: usize, d: u32) -> Vec<Monomial> {
    let vars = k * k.saturating_sub(1);
    let mut out = Vec::new();
    let mut cur = vec![0u32; vars];
    for deg in 0..=d {
        compositions(&mut cur, 0, deg, &mut out);
    }
    out
}

fn compositions(cur: &mut Vec<u32>, idx: usize, left: u32, out: &mut Vec<Monomial>) {
    if idx + 1 >= cur.len() {
        if let Some(last) = cur.len().checked_sub(1) {
            cur[last] = left;
            out.push(Monomial::new(cur.clone()));
            cur[last] = 0;
        } else if left == 0 {
            out.push(Monomial::new(Vec::new()));
        }
        return;
    }
    for e in (0..=left).rev() {
        cur[idx] = e;
        compositions(cur, idx + 1, left - e, out);
    }
    cur[idx] = 0;
}

/// Integer polynomial in the off-diagonal entries.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct IntPolynomial {
    terms: BTreeMap<Monomial, BigInt>,
}

#[derive(Serialize, Deserialize)]
struct PolyTerm {
    exponents: Vec<u32>,
    coeff: String,
}

impl Serialize for IntPolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<PolyTerm> = self
            .terms
            .iter()
            .map(|(m, c)| PolyTerm {
                exponents: m.exponents.clone(),
                coeff: c.to_string(),
            })
            .collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<PolyTerm>::deserialize(d)?;
        let mut p = IntPolynomial::zero();
        for t in v {
            let c: BigInt = t.coeff.parse().map_err(serde::de::Error::custom)?;
            p.add_term(Monomial::new(t.exponents), c);
        }
        Ok(p)
    }
}

impl IntPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn add_term(&mut self, m: Monomial, c: BigInt) {
        let e = self.terms.entry(m.clone()).or_insert_with(BigInt::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    /// `Σ coeffs[i]·monomials[i]`.
    pub fn from_coefficients(monomials: &[Monomial], coeffs: &[i64]) -> Self {
        let mut p = Self::zero();
        for (m, c) in monomials.iter().zip(coeffs) {
            if *c != 0 {
                p.add_term(m.clone(), BigInt::from(*c));
            }
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> BigInt {
        self.terms.values().map(|c| c.abs()).max().unwrap_or_default()
    }

    pub fn evaluate(&self, hhat: &[ExactScalar]) -> ExactScalar {
        self.terms.iter().fold(ExactScalar::zero(), |acc, (m, c)| {
            &acc + &m
                .evaluate(hhat)
                .mul_rational(&num_rational::BigRational::from_integer(c.clone()))
        })
    }

    /// Splits into `(positive part, negated negative part)`, both with nonnegative coefficients.
    pub fn split_signs(&self) -> (IntPolynomial, IntPolynomial) {
        let mut pos = Self::zero();
        let mut neg = Self::zero();
        for (m, c) in &self.terms {
            if c.is_positive() {
                pos.add_term(m.clone(), c.clone());
            } else {
                neg.add_term(m.clone(), -c);
            }
        }
        (pos, neg)
    }

    /// Coefficients in the order of `monomials`; `None` if a term is not listed.
    pub fn coefficients(&self, monomials: &[Monomial]) -> Option<Vec<i64>> {
        let mut out = vec![0i64; monomials.len()];
        for (m, c) in &self.terms {
            let idx = monomials.iter().position(|x| x == m)?;
            out[idx] = c.to_i64()?;
        }
        Some(out)
    }

    pub fn display(&self, k: usize) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (idx, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            if idx == 0 {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let a = c.abs();
            let mono = m.display(k);
            match (a.is_one(), mono.as_str()) {
                (true, _) => s.push_str(&mono),
                (false, "1") => s.push_str(&a.to_string()),
                _ => s.push_str(&format!("{a}*{mono}")),
            }
        }
        s
    }
}

/// Monomials of equal value, in order of first occurrence.
#[derive(Debug, Clone)]
pub(crate) struct ValueGroup {
    pub value: ExactScalar,
    pub members: Vec<usize>,
}

pub(crate) fn group_by_value(values: &[ExactScalar]) -> Vec<ValueGroup> {
    let mut index: std::collections::HashMap<&ExactScalar, usize> = Default::default();
    let mut groups: Vec<ValueGroup> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        match index.get(v) {
            Some(&g) => groups[g].members.push(i),
            None => {
                index.insert(v, groups.len());
                groups.push(ValueGroup {
                    value: v.clone(),
                    members: vec![i],
                });
            }
        }
    }
    groups
}

/// Lattice sumset `{ Σ_g a_g·v_g : a_g ∈ [lo·μ_g, hi·μ_g] }` over value groups, together with
/// the data needed to expand group multipliers into per-monomial coefficients.
#[derive(Debug, Clone)]
pub(crate) struct GroupedSumset {
    pub embedding: Embedding,
    pub groups: Vec<ValueGroup>,
    pub sumset: Sumset,
    pub per_monomial: (i64, i64),
    pub n_monomials: usize,
}

impl GroupedSumset {
    /// Each monomial coefficient ranges over `[lo, hi]` (with `lo ≤ 0 ≤ hi`).
    pub fn build(
        values: &[ExactScalar],
        lo: i64,
        hi: i64,
        keep_layers: bool,
        limits: &Limits,
    ) -> Result<Self, CodebookError> {
        let groups = group_by_value(values);
        let embedding = Embedding::covering(groups.iter().map(|g| &g.value));
        let mut terms = Vec::with_capacity(groups.len());
        for g in &groups {
            let point = embedding.embed(&g.value).ok_or(CodebookError::Overflow)?;
            let mu = g.members.len() as i64;
            terms.push(Term {
                point,
                lo: lo.checked_mul(mu).ok_or(CodebookError::Overflow)?,
                hi: hi.checked_mul(mu).ok_or(CodebookError::Overflow)?,
            });
        }
        let sumset = Sumset::build(embedding.dim(), terms, keep_layers, limits)?;
        Ok(Self {
            embedding,
            groups,
            sumset,
            per_monomial: (lo, hi),
            n_monomials: values.len(),
        })
    }

    /// Per-monomial coefficients for a member point, filling each group greedily.
    pub fn coefficients(&self, p: &[i64]) -> Option<Vec<i64>> {
        let mult = self.sumset.decompose(p)?;
        Some(self.expand(&mult))
    }

    pub fn expand(&self, mult: &[i64]) -> Vec<i64> {
        let (lo, hi) = self.per_monomial;
        let mut out = vec![0i64; self.n_monomials];
        for (g, &a) in self.groups.iter().zip(mult) {
            let mut left = a;
            for &m in &g.members {
                let take = left.clamp(lo, hi);
                out[m] = take;
                left -= take;
            }
            debug_assert_eq!(left, 0);
        }
        out
    }
}

/// The value-collapsed set `W_{N,d} = { Σ a_i f_i(ĥ) : a_i ∈ 0..N−1 }`.
#[derive(Debug, Clone)]
pub struct CodebookSet {
    n: u64,
    d: u32,
    k: usize,
    hhat: Vec<ExactScalar>,
    monomials: Vec<Monomial>,
    inner: GroupedSumset,
}

impl CodebookSet {
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn hhat(&self) -> &[ExactScalar] {
        &self.hhat
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn len(&self) -> u64 {
        self.inner.sumset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn embedding(&self) -> &Embedding {
        &self.inner.embedding
    }

    /// Values in canonical order (ascending when all values are rational).
    pub fn values(&self) -> Vec<ExactScalar> {
        self.points().iter().map(|p| self.inner.embedding.scalar(p)).collect()
    }

    pub(crate) fn points(&self) -> Vec<Point> {
        self.inner.sumset.sorted_points()
    }

    pub fn contains(&self, x: &ExactScalar) -> bool {
        self.inner
            .embedding
            .embed(x)
            .is_some_and(|p| self.inner.sumset.contains(&p))
    }

    /// A coefficient vector `a ∈ {0..N−1}^φ(d)` producing `x`, if `x ∈ W`.
    pub fn witness(&self, x: &ExactScalar) -> Option<Vec<u64>> {
        let p = self.inner.embedding.embed(x)?;
        let c = self.inner.coefficients(&p)?;
        Some(c.into_iter().map(|a| a as u64).collect())
    }

    /// `Σ a_i f_i(ĥ)`.
    pub fn evaluate(&self, coeffs: &[u64]) -> ExactScalar {
        let signed: Vec<i64> = coeffs.iter().map(|&a| a as i64).collect();
        IntPolynomial::from_coefficients(&self.monomials, &signed).evaluate(&self.hhat)
    }
}

fn check_n(n: u64) -> Result<(), CodebookError> {
    if n == 0 {
        return Err(CodebookError::InvalidParameter("N must be at least 1".into()));
    }
    if n - 1 > i64::MAX as u64 / 4 {
        return Err(CodebookError::Overflow);
    }
    Ok(())
}

fn monomial_values(hhat: &[ExactScalar], monomials: &[Monomial]) -> Vec<ExactScalar> {
    // each monomial is a lower-degree one times a single variable
    let mut cache: std::collections::HashMap<&Monomial, ExactScalar> = Default::default();
    let mut out = Vec::with_capacity(monomials.len());
    for m in monomials {
        let v = match m.exponents.iter().position(|&e| e > 0) {
            None => ExactScalar::one(),
            Some(j) => {
                let mut lower = m.exponents.clone();
                lower[j] -= 1;
                match cache.get(&Monomial::new(lower.clone())) {
                    Some(prev) => prev * &hhat[j],
                    None => m.evaluate(hhat),
                }
            }
        };
        cache.insert(m, v.clone());
        out.push(v);
    }
    out
}

/// Builds `W_{N,d}` for the off-diagonal entries of `h`.
pub fn build_w(h: &ChannelMatrix, n: u64, d: u32, limits: &Limits) -> Result<CodebookSet, CodebookError> {
    build_w_from_hhat(h.k(), h.offdiag_vector(), n, d, limits)
}

pub fn build_w_from_hhat(
    k: usize,
    hhat: Vec<ExactScalar>,
    n: u64,
    d: u32,
    limits: &Limits,
) -> Result<CodebookSet, CodebookError> {
    check_n(n)?;
    let monomials = enumerate_monomials(k, d);
    let values = monomial_values(&hhat, &monomials);
    let inner = GroupedSumset::build(&values, 0, (n - 1) as i64, true, limits)?;
    Ok(CodebookSet {
        n,
        d,
        k,
        hhat,
        monomials,
        inner,
    })
}

/// `|W_{N,d}|` without keeping intermediate layers.
pub fn count_w(h: &ChannelMatrix, n: u64, d: u32, limits: &Limits) -> Result<u64, CodebookError> {
    let hhat = h.offdiag_vector();
    check_n(n)?;
    let monomials = enumerate_monomials(h.k(), d);
    let values = monomial_values(&hhat, &monomials);
    Ok(GroupedSumset::build(&values, 0, (n - 1) as i64, false, limits)?
        .sumset
        .len())
}

/// Monomial values `f_i(ĥ)` for degree ≤ d, in enumeration order.
pub fn evaluate_monomials(h: &ChannelMatrix, d: u32) -> (Vec<Monomial>, Vec<ExactScalar>) {
    let monomials = enumerate_monomials(h.k(), d);
    let values = monomial_values(&h.offdiag_vector(), &monomials);
    (monomials, values)
}

/// `N^d`, checked.
pub fn n_pow(n: u64, d: u32) -> Result<u64, CodebookError> {
    n.checked_pow(d).ok_or(CodebookError::Overflow)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub d: u32,
    pub cardinality: u64,
    pub cardinality_next: u64,
    /// `log|W_{N^{d+1},d+1}| / log|W_{N^d,d}|`.
    pub log_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truncation {
    pub d: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSeries {
    pub rows: Vec<RatioRow>,
    pub truncated: Option<Truncation>,
}

impl RatioSeries {
    /// CSV with columns `d,cardinality,cardinality_next,log_ratio` and a trailing
    /// `# truncated: …` row when a cap was hit.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("d,cardinality,cardinality_next,log_ratio\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{:.12}\n",
                r.d, r.cardinality, r.cardinality_next, r.log_ratio
            ));
        }
        if let Some(t) = &self.truncated {
            s.push_str(&format!("# truncated: {} at d={}\n", t.reason, t.d));
        }
        s
    }

    pub fn min_ratio(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.log_ratio).reduce(f64::min)
    }
}

/// Cardinality ratios of consecutive codebooks `W_{N^d,d}` for `d = 1..=d_max`.
pub fn ratio_series(h: &ChannelMatrix, n: u64, d_max: u32, limits: &Limits) -> Result<RatioSeries, CodebookError> {
    if n < 2 {
        return Err(CodebookError::InvalidParameter("ratio series requires N > 1".into()));
    }
    let mut rows = Vec::new();
    let mut cards: BTreeMap<u32, u64> = BTreeMap::new();
    let mut card = |d: u32| -> Result<u64, CodebookError> {
        if let Some(c) = cards.get(&d) {
            return Ok(*c);
        }
        let c = count_w(h, n_pow(n, d)?, d, limits)?;
        cards.insert(d, c);
        Ok(c)
    };
    for d in 1..=d_max {
        let pair = card(d).and_then(|a| Ok((a, card(d + 1)?)));
        match pair {
            Ok((a, b)) => rows.push(RatioRow {
                d,
                cardinality: a,
                cardinality_next: b,
                log_ratio: (b as f64).ln() / (a as f64).ln(),
            }),
            Err(CodebookError::Resource(e)) => {
                return Ok(RatioSeries {
                    rows,
                    truncated: Some(Truncation {
                        d,
                        reason: e.to_string(),
                    }),
                })
            }
            Err(CodebookError::Overflow) => {
                return Ok(RatioSeries {
                    rows,
                    truncated: Some(Truncation {
                        d,
                        reason: CodebookError::Overflow.to_string(),
                    }),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RatioSeries { rows, truncated: None })
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = (1..).find(|k| k * (k - 1) >= self.exponents.len()).unwrap_or(1);
        f.write_str(&self.display(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> ExactScalar {
        x.parse().unwrap()
    }

    fn ones() -> ChannelMatrix {
        ChannelMatrix::with_diagonal(&[s("sqrt(2)"), s("sqrt(3)"), s("sqrt(5)")], &ExactScalar::one())
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi(3, 0), BigUint::from(1u32));
        assert_eq!(phi(3, 1), BigUint::from(7u32));
        assert_eq!(phi(3, 2), BigUint::from(28u32));
        assert_eq!(phi(3, 6), BigUint::from(924u32));
    }

    #[test]
    fn monomial_order() {
        let m = enumerate_monomials(3, 1);
        assert_eq!(m.len(), 7);
        assert_eq!(m[0], Monomial::constant(6));
        assert_eq!(m[1].exponents(), &[1, 0, 0, 0, 0, 0]);
        assert_eq!(m[6].exponents(), &[0, 0, 0, 0, 0, 1]);
        let m2 = enumerate_monomials(3, 2);
        assert_eq!(m2[7].exponents(), &[2, 0, 0, 0, 0, 0]);
        assert_eq!(m2[8].exponents(), &[1, 1, 0, 0, 0, 0]);
        assert_eq!(m2[8].display(3), "h12*h13");
        assert_eq!(m2[7].display(3), "h12^2");
    }

    #[test]
    fn all_ones_codebooks() {
        let w = build_w(&ones(), 2, 1, &Limits::default()).unwrap();
        assert_eq!(w.values(), (0..8).map(ExactScalar::from_integer).collect::<Vec<_>>());
        assert_eq!(w.witness(&s("3")).unwrap(), vec![1, 1, 1, 0, 0, 0, 0]);
        assert_eq!(build_w(&ones(), 3, 1, &Limits::default()).unwrap().len(), 15);
        assert_eq!(build_w(&ones(), 9, 2, &Limits::default()).unwrap().len(), 225);
        assert_eq!(build_w(&ones(), 27, 3, &Limits::default()).unwrap().len(), 2185);
    }

    #[test]
    fn one_radical_entry() {
        let h = ChannelMatrix::from_strs(&[&["1", "sqrt(2)", "1"], &["1", "1", "1"], &["1", "1", "1"]]);
        let w = build_w(&h, 2, 1, &Limits::default()).unwrap();
        assert_eq!(w.len(), 14);
        for p in 0..=6 {
            for q in 0..=1 {
                let v = &ExactScalar::from_integer(p) + &ExactScalar::sqrt(2).mul_integer(q);
                assert!(w.contains(&v));
                assert_eq!(w.evaluate(&w.witness(&v).unwrap()), v);
            }
        }
    }

    #[test]
    fn cap_is_reported() {
        let err = build_w(&ones(), 27, 3, &Limits::default().with_max_values(100)).unwrap_err();
        assert!(matches!(
            err,
            CodebookError::Resource(SumsetError::ValueCap { cap: 100, .. })
        ));
    }

    #[test]
    fn ratio_series_all_ones() {
        let r = ratio_series(&ones(), 3, 2, &Limits::default()).unwrap();
        assert_eq!(r.rows[0].cardinality, 15);
        assert_eq!(r.rows[0].cardinality_next, 225);
        assert!((r.rows[0].log_ratio - 2.0).abs() < 1e-12);
        assert!((r.rows[1].log_ratio - 2185f64.ln() / 225f64.ln()).abs() < 1e-12);
        let t = ratio_series(&ones(), 3, 3, &Limits::default().with_max_values(3000)).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.truncated.as_ref().unwrap().d, 3);
        assert!(t.to_csv().ends_with("at d=3\n"));
        assert!(ratio_series(&ones(), 1, 3, &Limits::default()).is_err());
    }

    #[test]
    fn polynomial_display_and_eval() {
        let ms = enumerate_monomials(3, 2);
        let p = IntPolynomial::from_coefficients(&ms, &[-1, 0, 0, 0, 0, 0, 0, 0, 2]);
        assert_eq!(p.display(3), "2*h12*h13 - 1");
        let h = ChannelMatrix::from_strs(&[&["1", "sqrt(2)", "sqrt(3)"], &["1", "1", "1"], &["1", "1", "1"]]);
        assert_eq!(p.evaluate(&h.offdiag_vector()), s("2*sqrt(6) - 1"));
        let (pos, neg) = p.split_signs();
        assert_eq!(pos.display(3), "2*h12*h13");
        assert_eq!(neg.display(3), "1");
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<IntPolynomial>(&json).unwrap(), p);
    }
}

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rustc_hash::FxHashMap;
use serde::ser::SerializeSeq;
use serde::Serialize;
use smallvec::SmallVec;

use super::DofError;
use crate::codebook::embed::{Embedding, LinearMap, Point};
use crate::codebook::{CodebookSet, Limits, SumsetError};
use crate::exactnum::{ExactScalar, RationalSpan};

/// Finitely supported distribution on field elements with exact rational probabilities.
///
/// Values are stored as lattice points of an [`Embedding`], sorted and distinct; the
/// probability of an atom is `weight / total`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteDistribution {
    embedding: Embedding,
    atoms: Vec<(Point, u128)>,
    total: u128,
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl DiscreteDistribution {
    fn normalized(embedding: Embedding, mut atoms: Vec<(Point, u128)>, total: u128) -> Self {
        atoms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        let mut g = total;
        for (_, w) in &atoms {
            if g == 1 {
                break;
            }
            g = gcd_u128(g, *w);
        }
        if g > 1 {
            atoms.iter_mut().for_each(|(_, w)| *w /= g);
        }
        Self {
            embedding,
            atoms,
            total: total / g.max(1),
        }
    }

    /// Atoms with positive integer weights; equal values are merged.
    pub fn from_weights<I: IntoIterator<Item = (ExactScalar, u128)>>(items: I) -> Result<Self, DofError> {
        let items: Vec<(ExactScalar, u128)> = items.into_iter().collect();
        if items.is_empty() {
            return Err(DofError::Empty);
        }
        if items.iter().any(|(_, w)| *w == 0) {
            return Err(DofError::Invalid("weights must be positive".into()));
        }
        let embedding = Embedding::spanning(items.iter().map(|(v, _)| v));
        let mut merged: BTreeMap<Point, u128> = BTreeMap::new();
        let mut total: u128 = 0;
        for (v, w) in &items {
            let p = embedding.embed(v).ok_or(DofError::Overflow)?;
            let slot = merged.entry(p).or_insert(0);
            *slot = slot.checked_add(*w).ok_or(DofError::Overflow)?;
            total = total.checked_add(*w).ok_or(DofError::Overflow)?;
        }
        Ok(Self::normalized(embedding, merged.into_iter().collect(), total))
    }

    /// Atoms with exact positive probabilities summing to 1.
    pub fn from_probabilities<I: IntoIterator<Item = (ExactScalar, BigRational)>>(items: I) -> Result<Self, DofError> {
        let items: Vec<(ExactScalar, BigRational)> = items.into_iter().collect();
        if items.iter().any(|(_, p)| !p.is_positive_rational()) {
            return Err(DofError::Invalid("probabilities must be positive".into()));
        }
        let sum = items.iter().fold(BigRational::zero(), |acc, (_, p)| acc + p);
        if !sum.is_one() {
            return Err(DofError::Invalid(format!("probabilities sum to {sum}, not 1")));
        }
        let den = items.iter().fold(BigInt::one(), |acc, (_, p)| acc.lcm(p.denom()));
        let weights = items
            .into_iter()
            .map(|(v, p)| {
                let w = (p * BigRational::from_integer(den.clone())).to_integer();
                w.to_u128().map(|w| (v, w)).ok_or(DofError::Overflow)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_weights(weights)
    }

    /// Uniform on a set; repeated values count once.
    pub fn uniform(values: &[ExactScalar]) -> Result<Self, DofError> {
        if values.is_empty() {
            return Err(DofError::Empty);
        }
        let mut d = Self::from_weights(values.iter().map(|v| (v.clone(), 1)))?;
        d.atoms.iter_mut().for_each(|(_, w)| *w = 1);
        d.total = d.atoms.len() as u128;
        Ok(d)
    }

    /// Uniform on the values of a codebook, without materializing scalars.
    pub fn uniform_on_codebook(w: &CodebookSet) -> Self {
        let atoms: Vec<(Point, u128)> = w.points().into_iter().map(|p| (p, 1)).collect();
        let total = atoms.len() as u128;
        Self {
            embedding: w.embedding().clone(),
            atoms,
            total,
        }
    }

    pub fn point_mass(v: ExactScalar) -> Self {
        Self::from_weights([(v, 1)]).expect("single positive atom")
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.atoms.len() == 1
    }

    pub fn values(&self) -> Vec<ExactScalar> {
        self.atoms.iter().map(|(p, _)| self.embedding.scalar(p)).collect()
    }

    /// `(value, probability)` pairs in canonical order.
    pub fn atoms(&self) -> Vec<(ExactScalar, BigRational)> {
        let total = BigInt::from(self.total);
        self.atoms
            .iter()
            .map(|(p, w)| {
                (
                    self.embedding.scalar(p),
                    BigRational::new(BigInt::from(*w), total.clone()),
                )
            })
            .collect()
    }

    pub fn probability(&self, x: &ExactScalar) -> BigRational {
        let w = self
            .embedding
            .embed(x)
            .and_then(|p| self.atoms.binary_search_by(|a| a.0.cmp(&p)).ok())
            .map_or(0, |i| self.atoms[i].1);
        BigRational::new(BigInt::from(w), BigInt::from(self.total))
    }

    /// Shannon entropy in bits, `log₂ T − (1/T)·Σ w·log₂ w` over integer weights `w` with
    /// total `T`, with equal weights grouped and compensated summation.
    pub fn entropy(&self) -> f64 {
        let mut counts: FxHashMap<u128, u64> = FxHashMap::default();
        for (_, w) in &self.atoms {
            *counts.entry(*w).or_insert(0) += 1;
        }
        let mut groups: Vec<(u128, u64)> = counts.into_iter().filter(|(w, _)| *w > 1).collect();
        groups.sort_unstable();
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for (w, c) in groups {
            let term = c as f64 * w as f64 * (w as f64).log2();
            let t = sum + term;
            comp += if sum.abs() >= term.abs() {
                (sum - t) + term
            } else {
                (term - t) + sum
            };
            sum = t;
        }
        let t = self.total as f64;
        (t.log2() - (sum + comp) / t).max(0.0)
    }

    /// Distribution of `c·X`.
    pub fn scaled(&self, c: &ExactScalar) -> Result<Self, DofError> {
        if c.is_zero() {
            return Ok(Self::point_mass(ExactScalar::zero()));
        }
        if c.is_rational() && c.rational_value().is_some_and(|r| r.is_one()) {
            return Ok(self.clone());
        }
        let images: Vec<ExactScalar> = self.embedding.units().iter().map(|u| c * u).collect();
        let target = Embedding::spanning(images.iter());
        let map = LinearMap::multiplication(c, &self.embedding, &target).ok_or(DofError::Overflow)?;
        let atoms = self
            .atoms
            .iter()
            .map(|(p, w)| map.apply(p).map(|q| (q, *w)).ok_or(DofError::Overflow))
            .collect::<Result<Vec<_>, _>>()?;
        let mut out = Self {
            embedding: target,
            atoms,
            total: self.total,
        };
        out.atoms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    fn reembed(&self, target: &Embedding) -> Result<Vec<(Point, u128)>, DofError> {
        if &self.embedding == target {
            return Ok(self.atoms.clone());
        }
        let map = LinearMap::multiplication(&ExactScalar::one(), &self.embedding, target).ok_or(DofError::Overflow)?;
        self.atoms
            .iter()
            .map(|(p, w)| map.apply(p).map(|q| (q, *w)).ok_or(DofError::Overflow))
            .collect()
    }

    /// Distribution of `X + Y` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &Self, limits: &Limits) -> Result<Self, DofError> {
        let total = self.total.checked_mul(other.total).ok_or(DofError::Overflow)?;
        let units: Vec<ExactScalar> = self
            .embedding
            .units()
            .into_iter()
            .chain(other.embedding.units())
            .collect();
        let joint = Embedding::spanning(units.iter());
        let a = self.reembed(&joint)?;
        let b = other.reembed(&joint)?;
        let atoms = match (joint.dim() == 1).then(|| convolve_line(&a, &b, limits)).transpose()? {
            Some(Some(atoms)) => atoms,
            _ => convolve_sparse(&a, &b, limits)?,
        };
        Ok(Self::normalized(joint, atoms, total))
    }

    /// ℚ-span of `{x − x₀ : x ∈ support}`.
    pub fn difference_span(&self) -> RationalSpan {
        let dim = self.embedding.dim();
        let mut rows: Vec<(usize, Vec<i128>)> = Vec::new();
        let mut exact_fallback = false;
        if let Some((p0, _)) = self.atoms.first() {
            for (p, _) in &self.atoms[1..] {
                if rows.len() == dim {
                    break;
                }
                let v: Vec<i128> = p.iter().zip(p0).map(|(a, b)| *a as i128 - *b as i128).collect();
                match reduce_row(&rows, v) {
                    Some(Some(r)) => {
                        let pivot = r.iter().position(|x| *x != 0).expect("nonzero");
                        rows.push((pivot, r));
                    }
                    Some(None) => {}
                    None => {
                        exact_fallback = true;
                        break;
                    }
                }
            }
        }
        if exact_fallback {
            let p0 = self.embedding.scalar(&self.atoms[0].0);
            let mut span = RationalSpan::new();
            for (p, _) in &self.atoms[1..] {
                span.insert(&(&self.embedding.scalar(p) - &p0));
                if span.dim() == dim {
                    break;
                }
            }
            return span;
        }
        let den = self.embedding.units();
        RationalSpan::from_values(
            rows.iter()
                .map(|(_, r)| {
                    r.iter().zip(&den).fold(ExactScalar::zero(), |acc, (c, u)| {
                        &acc + &u.mul_rational(&BigRational::from_integer(BigInt::from(*c)))
                    })
                })
                .collect::<Vec<_>>()
                .iter(),
        )
    }
}

/// Fraction-free reduction of `v` against echelon rows. `Some(None)` if `v` lies in their
/// span, `None` on overflow.
fn reduce_row(rows: &[(usize, Vec<i128>)], mut v: Vec<i128>) -> Option<Option<Vec<i128>>> {
    for (pivot, r) in rows {
        let x = v[*pivot];
        if x == 0 {
            continue;
        }
        let a = r[*pivot];
        for (vi, ri) in v.iter_mut().zip(r) {
            *vi = vi.checked_mul(a)?.checked_sub(ri.checked_mul(x)?)?;
        }
        let g = v.iter().fold(0i128, |g, x| g.gcd(x));
        if g > 1 {
            v.iter_mut().for_each(|x| *x /= g);
        }
    }
    Some(v.iter().any(|x| *x != 0).then_some(v))
}

/// Maximal runs `(start, end_exclusive, weight)` of equal nonzero weight.
fn runs(w: &[u128]) -> Vec<(usize, usize, u128)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < w.len() {
        if w[i] == 0 {
            i += 1;
            continue;
        }
        let start = i;
        while i < w.len() && w[i] == w[start] {
            i += 1;
        }
        out.push((start, i, w[start]));
    }
    out
}

fn convolve_line(
    a: &[(Point, u128)],
    b: &[(Point, u128)],
    limits: &Limits,
) -> Result<Option<Vec<(Point, u128)>>, DofError> {
    let line = |atoms: &[(Point, u128)]| -> (i64, i64, i64) {
        let min = atoms.iter().map(|(p, _)| p[0]).min().expect("nonempty");
        let max = atoms.iter().map(|(p, _)| p[0]).max().expect("nonempty");
        let g = atoms.iter().fold(0i64, |g, (p, _)| g.gcd(&(p[0] - min)));
        (min, max, g)
    };
    let (min_a, max_a, ga) = line(a);
    let (min_b, max_b, gb) = line(b);
    let g = ga.gcd(&gb).max(1);
    let len_a = ((max_a - min_a) / g + 1) as usize;
    let len_b = ((max_b - min_b) / g + 1) as usize;
    let out_len = len_a + len_b - 1;
    let dense_cap = limits.max_values.saturating_mul(4).max(1 << 20);
    if out_len as u64 > dense_cap {
        return Ok(None);
    }
    let dense = |atoms: &[(Point, u128)], min: i64, len: usize| {
        let mut w = vec![0u128; len];
        for (p, x) in atoms {
            w[((p[0] - min) / g) as usize] = *x;
        }
        w
    };
    let wa = dense(a, min_a, len_a);
    let wb = dense(b, min_b, len_b);
    let (ra, rb) = (runs(&wa), runs(&wb));
    let (kernel_runs, other) = if ra.len() <= rb.len() { (ra, &wb) } else { (rb, &wa) };
    let run_cost = (kernel_runs.len() as u64).saturating_mul(out_len as u64);
    let direct_cost = (a.len() as u64).saturating_mul(b.len() as u64);
    if run_cost.min(direct_cost) > limits.max_work {
        return Err(SumsetError::WorkCap { cap: limits.max_work }.into());
    }
    let mut out = vec![0u128; out_len];
    if run_cost <= direct_cost {
        let mut prefix = vec![0u128; other.len() + 1];
        for (i, w) in other.iter().enumerate() {
            prefix[i + 1] = prefix[i] + w;
        }
        let last = other.len() - 1;
        for (n, &(s, e, w)) in kernel_runs.iter().enumerate() {
            if n % 64 == 0 {
                limits.check_deadline()?;
            }
            // out[t] += w · Σ other[x] over t − x ∈ [s, e − 1]
            for (t, slot) in out.iter_mut().enumerate().take(e - 1 + last + 1).skip(s) {
                let hi = (t - s).min(last);
                let lo = t.saturating_sub(e - 1);
                if lo <= hi {
                    *slot += w * (prefix[hi + 1] - prefix[lo]);
                }
            }
        }
    } else {
        let nz = |w: &[u128]| -> Vec<(usize, u128)> {
            w.iter()
                .enumerate()
                .filter(|(_, x)| **x != 0)
                .map(|(i, x)| (i, *x))
                .collect()
        };
        let (na, nb) = (nz(&wa), nz(&wb));
        for (n, (i, x)) in na.iter().enumerate() {
            if n % 1024 == 0 {
                limits.check_deadline()?;
            }
            for (j, y) in &nb {
                out[i + j] += x * y;
            }
        }
    }
    let count = out.iter().filter(|w| **w != 0).count() as u64;
    if count > limits.max_values {
        return Err(SumsetError::ValueCap {
            cap: limits.max_values,
            reached: count,
        }
        .into());
    }
    let base = min_a + min_b;
    Ok(Some(
        out.into_iter()
            .enumerate()
            .filter(|(_, w)| *w != 0)
            .map(|(i, w)| (SmallVec::from_slice(&[base + g * i as i64]), w))
            .collect(),
    ))
}

fn convolve_sparse(a: &[(Point, u128)], b: &[(Point, u128)], limits: &Limits) -> Result<Vec<(Point, u128)>, DofError> {
    let work = (a.len() as u64).saturating_mul(b.len() as u64);
    if work > limits.max_work {
        return Err(SumsetError::WorkCap { cap: limits.max_work }.into());
    }
    let mut acc: FxHashMap<Point, u128> = FxHashMap::default();
    for (n, (p, x)) in a.iter().enumerate() {
        if n % 256 == 0 {
            limits.check_deadline()?;
            if acc.len() as u64 > limits.max_values {
                return Err(SumsetError::ValueCap {
                    cap: limits.max_values,
                    reached: acc.len() as u64,
                }
                .into());
            }
        }
        for (q, y) in b {
            let s: Point = p
                .iter()
                .zip(q)
                .map(|(u, v)| u.checked_add(*v))
                .collect::<Option<_>>()
                .ok_or(DofError::Overflow)?;
            *acc.entry(s).or_insert(0) += x * y;
        }
    }
    if acc.len() as u64 > limits.max_values {
        return Err(SumsetError::ValueCap {
            cap: limits.max_values,
            reached: acc.len() as u64,
        }
        .into());
    }
    Ok(acc.into_iter().collect())
}

impl Serialize for DiscreteDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.atoms.len()))?;
        for (v, p) in self.atoms() {
            seq.serialize_element(&(v.to_string(), p.to_string()))?;
        }
        seq.end()
    }
}

trait PositiveRational {
    fn is_positive_rational(&self) -> bool;
}

impl PositiveRational for BigRational {
    fn is_positive_rational(&self) -> bool {
        num_traits::Signed::is_positive(self)
    }
}

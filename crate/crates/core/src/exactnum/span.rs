use num_rational::BigRational;
use num_traits::{One, Zero};

use super::ExactScalar;

/// A ℚ-linear subspace of the field, kept as a fully reduced echelon basis.
///
/// Each basis vector has a pivot key (its largest key) with coefficient 1, and
/// no other basis vector has a nonzero coefficient at that pivot.
#[derive(Clone, Debug, Default)]
pub struct RationalSpan {
    basis: Vec<(u64, ExactScalar)>,
}

impl RationalSpan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_values<'a, I: IntoIterator<Item = &'a ExactScalar>>(values: I) -> Self {
        let mut s = Self::new();
        for v in values {
            s.insert(v);
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> impl Iterator<Item = &ExactScalar> {
        self.basis.iter().map(|(_, b)| b)
    }

    pub fn reduce(&self, v: &ExactScalar) -> ExactScalar {
        let mut r = v.clone();
        for (pivot, b) in &self.basis {
            if let Some(c) = r.coeff(*pivot).cloned() {
                r = &r - &b.mul_rational(&c);
            }
        }
        r
    }

    pub fn contains(&self, v: &ExactScalar) -> bool {
        self.reduce(v).is_zero()
    }

    /// Adds `v`; returns whether the dimension grew.
    pub fn insert(&mut self, v: &ExactScalar) -> bool {
        let r = self.reduce(v);
        let Some((pivot, c)) = r.terms().last().cloned() else {
            return false;
        };
        let r = r.mul_rational(&(BigRational::one() / c));
        for (_, b) in self.basis.iter_mut() {
            if let Some(c) = b.coeff(pivot).cloned() {
                if !c.is_zero() {
                    *b = &*b - &r.mul_rational(&c);
                }
            }
        }
        self.basis.push((pivot, r));
        true
    }

    pub fn sum(&self, other: &Self) -> Self {
        let mut s = self.clone();
        for b in other.basis() {
            s.insert(b);
        }
        s
    }

    /// Whether `self ∩ other = {0}`.
    pub fn is_independent_of(&self, other: &Self) -> bool {
        self.sum(other).dim() == self.dim() + other.dim()
    }

    /// The image `{ h·v : v ∈ self }`.
    pub fn scaled(&self, h: &ExactScalar) -> Self {
        Self::from_values(self.basis().map(|b| b * h).collect::<Vec<_>>().iter())
    }
}

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use smallvec::SmallVec;

use crate::exactnum::ExactScalar;

/// Integer coordinates of a field element relative to an [`Embedding`].
pub type Point = SmallVec<[i64; 4]>;

/// Maps the ℚ-span of a finite set of scalars onto `ℤ^m` by clearing a common denominator.
///
/// Coordinates are indexed by square-free keys; two scalars are equal iff their points are.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Embedding {
    keys: Vec<u64>,
    den: BigInt,
}

impl Embedding {
    pub fn covering<'a, I: IntoIterator<Item = &'a ExactScalar>>(values: I) -> Self {
        let mut keys = vec![1u64];
        let mut den = BigInt::one();
        for v in values {
            keys.extend(v.keys());
            den = den.lcm(&v.denominator_lcm());
        }
        keys.sort_unstable();
        keys.dedup();
        Self { keys, den }
    }

    /// Like [`Self::covering`] but only with the keys the values actually use.
    pub fn spanning<'a, I: IntoIterator<Item = &'a ExactScalar>>(values: I) -> Self {
        let mut keys = Vec::new();
        let mut den = BigInt::one();
        for v in values {
            keys.extend(v.keys());
            den = den.lcm(&v.denominator_lcm());
        }
        keys.sort_unstable();
        keys.dedup();
        Self { keys, den }
    }

    /// The scalars `e_k / den` whose integer combinations are the lattice.
    pub fn units(&self) -> Vec<ExactScalar> {
        self.keys
            .iter()
            .map(|k| ExactScalar::from_terms([(*k, BigRational::new(BigInt::one(), self.den.clone()))]))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.keys.len()
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn zero(&self) -> Point {
        SmallVec::from_elem(0, self.dim())
    }

    /// `None` if `x` is outside the lattice or a coordinate overflows `i64`.
    pub fn embed(&self, x: &ExactScalar) -> Option<Point> {
        let mut p = self.zero();
        for (k, c) in x.terms() {
            let idx = self.keys.binary_search(k).ok()?;
            let scaled = c * BigRational::from_integer(self.den.clone());
            if !scaled.is_integer() {
                return None;
            }
            p[idx] = scaled.to_integer().to_i64()?;
        }
        Some(p)
    }

    pub fn scalar(&self, p: &[i64]) -> ExactScalar {
        ExactScalar::from_terms(
            self.keys
                .iter()
                .zip(p)
                .filter(|(_, c)| **c != 0)
                .map(|(k, c)| (*k, BigRational::new(BigInt::from(*c), self.den.clone()))),
        )
    }

    /// Whether every coordinate lives on the rational key.
    pub fn is_rational(&self) -> bool {
        self.keys == [1]
    }
}

/// Exact multiplication by a fixed scalar, expressed on points of one embedding and
/// landing (when possible) in another.
#[derive(Clone, Debug)]
pub struct LinearMap {
    /// `out[r] = Σ num[r][c]·in[c] / den`; rows beyond `target.dim()` must vanish.
    num: Vec<Vec<i128>>,
    den: i128,
    out_dim: usize,
}

impl LinearMap {
    /// Multiplication by `h`, from `source` coordinates into `target` coordinates.
    /// `None` if the coefficients do not fit in `i128`.
    pub fn multiplication(h: &ExactScalar, source: &Embedding, target: &Embedding) -> Option<Self> {
        // image of each source basis vector, as a scalar
        let images: Vec<ExactScalar> = source
            .keys
            .iter()
            .map(|k| {
                let unit = ExactScalar::from_terms([(*k, BigRational::new(BigInt::one(), source.den.clone()))]);
                &(h * &unit) * &ExactScalar::from_rational(BigRational::from_integer(target.den.clone()))
            })
            .collect();
        let mut out_keys = target.keys.clone();
        for img in &images {
            for k in img.keys() {
                if !out_keys.contains(&k) {
                    out_keys.push(k);
                }
            }
        }
        let den = images
            .iter()
            .fold(BigInt::one(), |acc, img| acc.lcm(&img.denominator_lcm()));
        let mut num = vec![vec![0i128; source.dim()]; out_keys.len()];
        for (c, img) in images.iter().enumerate() {
            for (k, coeff) in img.terms() {
                let r = out_keys.iter().position(|x| x == k).expect("collected above");
                let v = coeff * BigRational::from_integer(den.clone());
                num[r][c] = v.to_integer().to_i128()?;
            }
        }
        Some(Self {
            num,
            den: den.to_i128()?,
            out_dim: target.dim(),
        })
    }

    /// Image of `p`, or `None` if it leaves the target lattice or overflows.
    pub fn apply(&self, p: &[i64]) -> Option<Point> {
        let mut out = SmallVec::with_capacity(self.out_dim);
        for (r, row) in self.num.iter().enumerate() {
            let mut acc: i128 = 0;
            for (a, x) in row.iter().zip(p) {
                if *a != 0 && *x != 0 {
                    acc = acc.checked_add(a.checked_mul(*x as i128)?)?;
                }
            }
            if r >= self.out_dim {
                if acc != 0 {
                    return None;
                }
                continue;
            }
            if acc % self.den != 0 {
                return None;
            }
            out.push(i64::try_from(acc / self.den).ok()?);
        }
        Some(out)
    }

    /// Whether the map is identically zero.
    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|r| r.iter().all(Zero::is_zero))
    }
}

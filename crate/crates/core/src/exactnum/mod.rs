//! Exact arithmetic over ℚ extended by square roots of a configured radicand set.

mod parse;
mod scalar;
mod span;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::parse_scalar;
pub use scalar::{Classification, ExactScalar};
pub use span::RationalSpan;

pub(crate) use scalar::square_free_decompose;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("sqrt({radicand}) is outside the field generated by sqrt of {allowed:?}")]
    UnsupportedField { radicand: u64, allowed: Vec<u64> },
    #[error("invalid radicand set: {0}")]
    InvalidRadicandSet(String),
    #[error("cannot parse {input:?} at byte {position}: {message}")]
    Parse {
        input: String,
        position: usize,
        message: String,
    },
}

/// Square-free, pairwise coprime radicands generating the working field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct RadicandSet {
    radicands: Vec<u64>,
}

impl Default for RadicandSet {
    fn default() -> Self {
        Self {
            radicands: vec![2, 3, 5],
        }
    }
}

impl TryFrom<Vec<u64>> for RadicandSet {
    type Error = ExactError;

    fn try_from(v: Vec<u64>) -> Result<Self, ExactError> {
        Self::new(v)
    }
}

impl From<RadicandSet> for Vec<u64> {
    fn from(s: RadicandSet) -> Self {
        s.radicands
    }
}

impl RadicandSet {
    pub fn new(mut radicands: Vec<u64>) -> Result<Self, ExactError> {
        radicands.sort_unstable();
        radicands.dedup();
        for &r in &radicands {
            if r < 2 || square_free_decompose(r).0 != 1 {
                return Err(ExactError::InvalidRadicandSet(format!(
                    "{r} is not a square-free integer > 1"
                )));
            }
        }
        for (i, &a) in radicands.iter().enumerate() {
            for &b in &radicands[i + 1..] {
                if num_integer::gcd(a, b) != 1 {
                    return Err(ExactError::InvalidRadicandSet(format!("{a} and {b} share a factor")));
                }
            }
        }
        Ok(Self { radicands })
    }

    pub fn radicands(&self) -> &[u64] {
        &self.radicands
    }

    /// All products of subsets of the radicands, ascending (starts with 1).
    pub fn basis_keys(&self) -> Vec<u64> {
        let mut keys = vec![1u64];
        for &r in &self.radicands {
            let more: Vec<u64> = keys.iter().map(|k| k * r).collect();
            keys.extend(more);
        }
        keys.sort_unstable();
        keys
    }

    /// Whether `√key` (key square-free) lies in the field.
    pub fn allows_key(&self, key: u64) -> bool {
        let mut rest = key;
        for &r in &self.radicands {
            if rest % r == 0 {
                rest /= r;
            }
        }
        rest == 1
    }

    /// `√n`, or an error if it leaves the field.
    pub fn sqrt(&self, n: u64) -> Result<ExactScalar, ExactError> {
        let s = ExactScalar::sqrt(n);
        self.check(&s).map_err(|_| ExactError::UnsupportedField {
            radicand: n,
            allowed: self.radicands.clone(),
        })?;
        Ok(s)
    }

    pub fn check(&self, x: &ExactScalar) -> Result<(), ExactError> {
        match x.keys().find(|k| !self.allows_key(*k)) {
            None => Ok(()),
            Some(k) => Err(ExactError::UnsupportedField {
                radicand: k,
                allowed: self.radicands.clone(),
            }),
        }
    }
}

//! Serde helpers that print exact values in their text syntax.

use num_rational::BigRational;
use serde::ser::SerializeSeq;
use serde::Serializer;

use crate::exactnum::ExactScalar;

pub fn rational<S: Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&ExactScalar::from_rational(q.clone()).to_string())
}

pub fn scalar<S: Serializer>(x: &ExactScalar, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

pub fn scalars<S: Serializer>(xs: &[ExactScalar], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&x.to_string())?;
    }
    seq.end()
}

pub fn opt_rational<S: Serializer>(q: &Option<BigRational>, s: S) -> Result<S::Ok, S::Error> {
    match q {
        Some(q) => rational(q, s),
        None => s.serialize_none(),
    }
}

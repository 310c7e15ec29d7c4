//! Channel matrices, topology, row/column scaling and DoF accounting.
//!
//! Users are 0-based in the API. Reports and verdict strings print them 1-based.

pub mod random;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::{parse_scalar, ExactError, ExactScalar, RadicandSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Fewer than three users.
    UserCount { k: usize },
    /// `h_ii = 0`.
    ZeroDiagonal { user: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UserCount { k } => write!(f, "K={k}: at least 3 users are required"),
            Violation::ZeroDiagonal { user } => write!(f, "h_{0}{0} = 0", user + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("malformed matrix: {0}")]
    Shape(String),
    #[error("invalid channel: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("{side} factor {index} is zero", index = .index + 1)]
    ZeroFactor { side: &'static str, index: usize },
    #[error("matrix is not fully connected")]
    NotFullyConnected,
    #[error("link h_{}{} vanishes", .i + 1, .j + 1)]
    VanishingLink { i: usize, j: usize },
    #[error("user indices must be distinct and below K")]
    BadIndices,
    #[error(transparent)]
    Scalar(#[from] ExactError),
}

/// A K×K channel matrix with cached topology.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ChannelMatrix {
    k: usize,
    entries: Vec<ExactScalar>,
    zeros: Vec<(usize, usize)>,
}

impl ChannelMatrix {
    pub fn new(rows: Vec<Vec<ExactScalar>>) -> Result<Self, ChannelError> {
        let k = rows.len();
        if k == 0 {
            return Err(ChannelError::Shape("no rows".into()));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != k) {
            return Err(ChannelError::Shape(format!(
                "row {} has {} entries, expected {k}",
                i + 1,
                r.len()
            )));
        }
        Ok(Self::from_flat(k, rows.into_iter().flatten().collect()))
    }

    fn from_flat(k: usize, entries: Vec<ExactScalar>) -> Self {
        let zeros = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && entries[i * k + j].is_zero())
            .collect();
        Self { k, entries, zeros }
    }

    /// Parses a matrix of scalar strings.
    pub fn parse<S: AsRef<str>>(rows: &[Vec<S>], field: &RadicandSet) -> Result<Self, ChannelError> {
        let parsed = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|s| parse_scalar(s.as_ref(), field))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(parsed)
    }

    /// Shorthand for tests and examples; panics on malformed input.
    pub fn from_strs(rows: &[&[&str]]) -> Self {
        let rows: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
        Self::parse(&rows, &RadicandSet::default()).expect("valid matrix literal")
    }

    /// Matrix with the given diagonal and every off-diagonal entry equal to `off`.
    pub fn with_diagonal(diag: &[ExactScalar], off: &ExactScalar) -> Self {
        let k = diag.len();
        let entries = (0..k * k)
            .map(|idx| {
                if idx / k == idx % k {
                    diag[idx / k].clone()
                } else {
                    off.clone()
                }
            })
            .collect();
        Self::from_flat(k, entries)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> &ExactScalar {
        &self.entries[i * self.k + j]
    }

    pub fn diag(&self, i: usize) -> &ExactScalar {
        self.get(i, i)
    }

    pub fn rows(&self) -> Vec<Vec<ExactScalar>> {
        self.entries.chunks(self.k).map(|r| r.to_vec()).collect()
    }

    /// Vanishing off-diagonal links `(i, j)`, row-major.
    pub fn zero_set(&self) -> &[(usize, usize)] {
        &self.zeros
    }

    pub fn is_fully_connected(&self) -> bool {
        self.zeros.is_empty()
    }

    /// Positions of ĥ: row-major, skipping the diagonal.
    pub fn offdiag_positions(&self) -> Vec<(usize, usize)> {
        offdiag_positions(self.k)
    }

    /// The off-diagonal vector ĥ in the order of [`Self::offdiag_positions`].
    pub fn offdiag_vector(&self) -> Vec<ExactScalar> {
        self.offdiag_positions()
            .into_iter()
            .map(|(i, j)| self.get(i, j).clone())
            .collect()
    }

    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut v = Vec::new();
        if self.k < 3 {
            v.push(Violation::UserCount { k: self.k });
        }
        v.extend(
            (0..self.k)
                .filter(|&i| self.diag(i).is_zero())
                .map(|user| Violation::ZeroDiagonal { user }),
        );
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// Relabels users: new user `i` is old user `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.k);
        let k = self.k;
        let entries = (0..k * k)
            .map(|idx| self.get(perm[idx / k], perm[idx % k]).clone())
            .collect();
        Self::from_flat(k, entries)
    }

    /// Whether every entry lies in ℚ.
    pub fn is_rational(&self) -> bool {
        self.entries.iter().all(ExactScalar::is_rational)
    }

    pub fn entries_as_strings(&self) -> Vec<Vec<String>> {
        self.rows()
            .into_iter()
            .map(|r| r.iter().map(|x| x.to_string()).collect())
            .collect()
    }
}

pub fn offdiag_positions(k: usize) -> Vec<(usize, usize)> {
    (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

impl fmt::Display for ChannelMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = self.entries_as_strings();
        let width = rows.iter().flatten().map(|s| s.chars().count()).max().unwrap_or(1);
        for r in rows {
            let cells: Vec<String> = r.iter().map(|s| format!("{s:>width$}")).collect();
            writeln!(f, "[ {} ]", cells.join("  "))?;
        }
        Ok(())
    }
}

impl fmt::Debug for ChannelMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChannelMatrix{:?}", self.entries_as_strings())
    }
}

/// Row and column factors of a scaling `H ↦ D H D'`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalingPair {
    rows: Vec<ExactScalar>,
    cols: Vec<ExactScalar>,
}

impl ScalingPair {
    pub fn new(rows: Vec<ExactScalar>, cols: Vec<ExactScalar>) -> Result<Self, ChannelError> {
        if rows.len() != cols.len() {
            return Err(ChannelError::Shape("row and column factor counts differ".into()));
        }
        if let Some(i) = rows.iter().position(ExactScalar::is_zero) {
            return Err(ChannelError::ZeroFactor { side: "row", index: i });
        }
        if let Some(j) = cols.iter().position(ExactScalar::is_zero) {
            return Err(ChannelError::ZeroFactor {
                side: "column",
                index: j,
            });
        }
        Ok(Self { rows, cols })
    }

    pub fn identity(k: usize) -> Self {
        Self {
            rows: vec![ExactScalar::one(); k],
            cols: vec![ExactScalar::one(); k],
        }
    }

    pub fn rows(&self) -> &[ExactScalar] {
        &self.rows
    }

    pub fn cols(&self) -> &[ExactScalar] {
        &self.cols
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    /// Componentwise product: scaling by `self` then `other`.
    pub fn compose(&self, other: &Self) -> Self {
        let mul = |a: &[ExactScalar], b: &[ExactScalar]| a.iter().zip(b).map(|(x, y)| x * y).collect();
        Self {
            rows: mul(&self.rows, &other.rows),
            cols: mul(&self.cols, &other.cols),
        }
    }

    /// Same scaling expressed for relabeled users (see [`ChannelMatrix::permute`]).
    pub fn permute(&self, perm: &[usize]) -> Self {
        Self {
            rows: perm.iter().map(|&p| self.rows[p].clone()).collect(),
            cols: perm.iter().map(|&p| self.cols[p].clone()).collect(),
        }
    }

    /// Inverse of [`Self::permute`].
    pub fn unpermute(&self, perm: &[usize]) -> Self {
        let mut rows = self.rows.clone();
        let mut cols = self.cols.clone();
        for (new, &old) in perm.iter().enumerate() {
            rows[old] = self.rows[new].clone();
            cols[old] = self.cols[new].clone();
        }
        Self { rows, cols }
    }
}

/// `r_i · h_ij · c_j`.
pub fn scale(h: &ChannelMatrix, s: &ScalingPair) -> Result<ChannelMatrix, ChannelError> {
    h.validate().map_err(ChannelError::Invalid)?;
    if s.k() != h.k() {
        return Err(ChannelError::Shape(format!(
            "scaling has {} factors, matrix has K={}",
            s.k(),
            h.k()
        )));
    }
    let k = h.k();
    let entries = (0..k * k)
        .map(|idx| {
            let (i, j) = (idx / k, idx % k);
            &(&s.rows[i] * h.get(i, j)) * &s.cols[j]
        })
        .collect();
    Ok(ChannelMatrix::from_flat(k, entries))
}

/// Scales a fully connected matrix so that the last row and last column are 1 off the
/// diagonal and `h_21 = 1`.
pub fn canonical_scale(h: &ChannelMatrix) -> Result<(ChannelMatrix, ScalingPair), ChannelError> {
    h.validate().map_err(ChannelError::Invalid)?;
    if !h.is_fully_connected() {
        return Err(ChannelError::NotFullyConnected);
    }
    let k = h.k();
    let last = k - 1;
    let inv = |x: &ExactScalar| x.inverse().expect("nonzero entry");
    let h21 = h.get(1, 0);
    let h2k = h.get(1, last);
    let hk1 = h.get(last, 0);
    let rows: Vec<ExactScalar> = (0..k)
        .map(|i| {
            if i == 1 {
                inv(h21)
            } else if i == last {
                inv(hk1)
            } else {
                h2k * &inv(&(h21 * h.get(i, last)))
            }
        })
        .collect();
    let cols: Vec<ExactScalar> = (0..k)
        .map(|j| {
            if j == last {
                h21 * &inv(h2k)
            } else {
                hk1 * &inv(h.get(last, j))
            }
        })
        .collect();
    let s = ScalingPair::new(rows, cols)?;
    let out = scale(h, &s)?;
    Ok((out, s))
}

/// `h_ii · h_kj / (h_ij · h_ki)`.
pub fn cross_ratio(h: &ChannelMatrix, i: usize, j: usize, k: usize) -> Result<ExactScalar, ChannelError> {
    let n = h.k();
    if i >= n || j >= n || k >= n || i == j || j == k || i == k {
        return Err(ChannelError::BadIndices);
    }
    if h.get(i, j).is_zero() {
        return Err(ChannelError::VanishingLink { i, j });
    }
    if h.get(k, i).is_zero() {
        return Err(ChannelError::VanishingLink { i: k, j: i });
    }
    let num = h.diag(i) * h.get(k, j);
    let den = h.get(i, j) * h.get(k, i);
    Ok(num.checked_div(&den)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DofAccounting {
    /// Number of totally disconnected users.
    pub l: usize,
    /// `L + (K − L)/2`.
    #[serde(serialize_with = "crate::serial::rational")]
    pub total_dof_if_half_each: BigRational,
    pub disconnected_users: Vec<usize>,
}

/// Users with no nonzero link in or out achieve 1 DoF; the rest are credited 1/2.
pub fn dof_accounting(h: &ChannelMatrix) -> DofAccounting {
    let k = h.k();
    let disconnected_users: Vec<usize> = (0..k)
        .filter(|&u| {
            (0..k)
                .filter(|&v| v != u)
                .all(|v| h.get(u, v).is_zero() && h.get(v, u).is_zero())
        })
        .collect();
    let l = disconnected_users.len();
    let total = BigRational::from_integer(BigInt::from(l)) + BigRational::new(BigInt::from(k - l), BigInt::from(2));
    DofAccounting {
        l,
        total_dof_if_half_each: total,
        disconnected_users,
    }
}

impl Serialize for ChannelMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.entries_as_strings().serialize(s)
    }
}

impl Serialize for ScalingPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let text = |v: &[ExactScalar]| v.iter().map(ToString::to_string).collect::<Vec<_>>();
        let mut st = s.serialize_struct("ScalingPair", 2)?;
        st.serialize_field("rows", &text(&self.rows))?;
        st.serialize_field("cols", &text(&self.cols))?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> ExactScalar {
        x.parse().unwrap()
    }

    fn ones(k: usize) -> ChannelMatrix {
        ChannelMatrix::with_diagonal(&vec![ExactScalar::one(); k], &ExactScalar::one())
    }

    #[test]
    fn validation() {
        assert!(ones(3).validate().is_ok());
        let h = ChannelMatrix::from_strs(&[&["1", "1", "1"], &["1", "0", "1"], &["1", "1", "1"]]);
        assert_eq!(h.validate(), Err(vec![Violation::ZeroDiagonal { user: 1 }]));
        assert_eq!(ones(2).validate(), Err(vec![Violation::UserCount { k: 2 }]));
        assert!(ChannelMatrix::new(vec![vec![s("1"), s("2")]]).is_err());
    }

    #[test]
    fn offdiag_order() {
        assert_eq!(
            offdiag_positions(3),
            vec![(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
        );
    }

    #[test]
    fn scaling() {
        let h = ones(3);
        assert_eq!(scale(&h, &ScalingPair::identity(3)).unwrap(), h);
        let sp = ScalingPair::new(vec![s("2"), s("1"), s("1")], vec![s("1"); 3]).unwrap();
        let out = scale(&h, &sp).unwrap();
        assert!((0..3).all(|j| *out.get(0, j) == s("2")));
        assert!(matches!(
            ScalingPair::new(vec![s("1"), s("0"), s("1")], vec![s("1"); 3]),
            Err(ChannelError::ZeroFactor { side: "row", index: 1 })
        ));
    }

    #[test]
    fn canonical_form_fixed_point() {
        let h = ChannelMatrix::from_strs(&[&["sqrt(2)", "3", "1"], &["1", "sqrt(3)", "1"], &["1", "1", "sqrt(5)"]]);
        let (out, sp) = canonical_scale(&h).unwrap();
        assert_eq!(out, h);
        assert_eq!(sp, ScalingPair::identity(3));
    }

    #[test]
    fn canonical_form_pattern() {
        let h = ChannelMatrix::from_strs(&[
            &["sqrt(2)", "2", "3"],
            &["1+sqrt(2)", "5", "1/2"],
            &["7", "-sqrt(2)", "1"],
        ]);
        let (out, sp) = canonical_scale(&h).unwrap();
        for (i, j) in [(2, 0), (2, 1), (0, 2), (1, 2), (1, 0)] {
            assert_eq!(*out.get(i, j), ExactScalar::one(), "entry ({i},{j})");
        }
        assert_eq!(scale(&h, &sp).unwrap(), out);
        let missing = ChannelMatrix::from_strs(&[&["1", "0", "1"], &["1", "1", "1"], &["1", "1", "1"]]);
        assert_eq!(canonical_scale(&missing).unwrap_err(), ChannelError::NotFullyConnected);
    }

    #[test]
    fn cross_ratios() {
        assert_eq!(cross_ratio(&ones(3), 0, 1, 2).unwrap(), ExactScalar::one());
        let h = ChannelMatrix::with_diagonal(&[s("sqrt(2)"), s("sqrt(3)"), s("sqrt(5)")], &ExactScalar::one());
        assert_eq!(cross_ratio(&h, 0, 1, 2).unwrap(), s("sqrt(2)"));
        let z = ChannelMatrix::from_strs(&[&["1", "0", "1"], &["1", "1", "1"], &["1", "1", "1"]]);
        assert_eq!(
            cross_ratio(&z, 0, 1, 2).unwrap_err(),
            ChannelError::VanishingLink { i: 0, j: 1 }
        );
        assert_eq!(cross_ratio(&z, 0, 0, 2).unwrap_err(), ChannelError::BadIndices);
    }

    #[test]
    fn accounting() {
        let diag = ChannelMatrix::with_diagonal(&[s("1"), s("2"), s("3")], &ExactScalar::zero());
        let a = dof_accounting(&diag);
        assert_eq!(
            (a.l, a.total_dof_if_half_each.clone()),
            (3, BigRational::from_integer(3.into()))
        );
        let a = dof_accounting(&ones(3));
        assert_eq!(a.total_dof_if_half_each, BigRational::new(3.into(), 2.into()));
        let h = ChannelMatrix::from_strs(&[
            &["1", "1", "1", "0"],
            &["1", "1", "1", "0"],
            &["1", "1", "1", "0"],
            &["0", "0", "0", "1"],
        ]);
        let a = dof_accounting(&h);
        assert_eq!(a.l, 1);
        assert_eq!(a.disconnected_users, vec![3]);
        assert_eq!(a.total_dof_if_half_each, BigRational::new(5.into(), 2.into()));
    }

    #[test]
    fn permutation_roundtrip() {
        let h = ChannelMatrix::from_strs(&[&["1", "2", "3"], &["4", "5", "6"], &["7", "8", "9"]]);
        let p = h.permute(&[2, 0, 1]);
        assert_eq!(*p.get(0, 1), s("7"));
        let sp = ScalingPair::new(vec![s("2"), s("3"), s("5")], vec![s("7"), s("11"), s("13")]).unwrap();
        let a = scale(&h, &sp).unwrap().permute(&[2, 0, 1]);
        let b = scale(&p, &sp.permute(&[2, 0, 1])).unwrap();
        assert_eq!(a, b);
        assert_eq!(sp.permute(&[2, 0, 1]).unpermute(&[2, 0, 1]), sp);
    }
}

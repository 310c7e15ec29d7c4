//! Iterated sumsets `Σ_t { a·v_t : a ∈ [lo_t, hi_t] }` over integer points.
//!
//! One-dimensional instances use bitsets with a sliding window per residue class;
//! everything else uses hash sets. Intermediate layers can be kept so that any member
//! can be decomposed back into per-term multipliers.

use std::time::Instant;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::embed::Point;

/// Largest one-dimensional span handled with bitsets.
const DENSE_SPAN: i64 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum SumsetError {
    #[error("value cap {cap} exceeded ({reached} values)")]
    ValueCap { cap: u64, reached: u64 },
    #[error("work cap {cap} exceeded")]
    WorkCap { cap: u64 },
    #[error("time limit reached")]
    Deadline,
    #[error("integer overflow in lattice coordinates")]
    Overflow,
}

/// Resource limits for set construction and scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    /// Maximum number of values in any generated set.
    pub max_values: u64,
    /// Maximum elementary steps (pair checks, hash insertions) per operation.
    pub max_work: u64,
    /// Wall-clock deadline, if any.
    #[serde(skip)]
    pub deadline: Option<Instant>,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_values: 10_000_000,
            max_work: 50_000_000,
            deadline: None,
        }
    }
}

impl Limits {
    pub fn with_max_values(mut self, n: u64) -> Self {
        self.max_values = n;
        self
    }

    pub fn with_max_work(mut self, n: u64) -> Self {
        self.max_work = n;
        self
    }

    pub fn check_deadline(&self) -> Result<(), SumsetError> {
        match self.deadline {
            Some(t) if Instant::now() >= t => Err(SumsetError::Deadline),
            _ => Ok(()),
        }
    }
}

/// One summand family `{ a·point : a ∈ [lo, hi] }`.
#[derive(Debug, Clone)]
pub struct Term {
    pub point: Point,
    pub lo: i64,
    pub hi: i64,
}

#[derive(Debug, Clone)]
enum Layer {
    Dense {
        min: i64,
        len: usize,
        bits: Vec<u64>,
        count: u64,
    },
    Sparse(FxHashSet<Point>),
}

impl Layer {
    fn len(&self) -> u64 {
        match self {
            Layer::Dense { count, .. } => *count,
            Layer::Sparse(s) => s.len() as u64,
        }
    }

    fn contains(&self, p: &[i64]) -> bool {
        match self {
            Layer::Dense { min, len, bits, .. } => {
                let Some(off) = p[0].checked_sub(*min) else {
                    return false;
                };
                off >= 0 && (off as usize) < *len && get_bit(bits, off as usize)
            }
            Layer::Sparse(s) => s.contains(p),
        }
    }
}

fn get_bit(bits: &[u64], i: usize) -> bool {
    bits[i >> 6] >> (i & 63) & 1 == 1
}

fn set_bit(bits: &mut [u64], i: usize) {
    bits[i >> 6] |= 1 << (i & 63);
}

#[derive(Debug, Clone)]
pub struct Sumset {
    dim: usize,
    terms: Vec<Term>,
    /// `layers[t]` is the sumset of the first `t` terms; only the last is kept
    /// unless decomposition was requested.
    layers: Vec<Layer>,
    keep_layers: bool,
}

impl Sumset {
    pub fn build(dim: usize, terms: Vec<Term>, keep_layers: bool, limits: &Limits) -> Result<Self, SumsetError> {
        debug_assert!(terms.iter().all(|t| t.point.len() == dim && t.lo <= t.hi));
        let dense = dim == 1 && dense_span(&terms).is_some_and(|s| s <= DENSE_SPAN);
        let origin = Point::from_elem(0, dim);
        let mut current = if dense {
            Layer::Dense {
                min: 0,
                len: 1,
                bits: vec![1],
                count: 1,
            }
        } else {
            let mut s = FxHashSet::default();
            s.insert(origin);
            Layer::Sparse(s)
        };
        let mut layers = Vec::new();
        for term in &terms {
            limits.check_deadline()?;
            let next = match &current {
                Layer::Dense { min, len, bits, .. } => dense_step(*min, *len, bits, term)?,
                Layer::Sparse(set) => sparse_step(set, term, limits)?,
            };
            if next.len() > limits.max_values {
                return Err(SumsetError::ValueCap {
                    cap: limits.max_values,
                    reached: next.len(),
                });
            }
            let prev = std::mem::replace(&mut current, next);
            if keep_layers {
                layers.push(prev);
            }
        }
        layers.push(current);
        Ok(Self {
            dim,
            terms,
            layers,
            keep_layers,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    fn last(&self) -> &Layer {
        self.layers.last().expect("at least one layer")
    }

    pub fn len(&self) -> u64 {
        self.last().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        p.len() == self.dim && self.last().contains(p)
    }

    /// Members in lexicographic coordinate order (numeric order when one-dimensional).
    pub fn sorted_points(&self) -> Vec<Point> {
        match self.last() {
            Layer::Dense { min, len, bits, .. } => (0..*len)
                .filter(|&i| get_bit(bits, i))
                .map(|i| Point::from_elem(min + i as i64, 1))
                .collect(),
            Layer::Sparse(s) => {
                let mut v: Vec<Point> = s.iter().cloned().collect();
                v.sort_unstable();
                v
            }
        }
    }

    /// One-dimensional members as plain integers, ascending.
    pub fn sorted_integers(&self) -> Option<Vec<i64>> {
        match self.last() {
            Layer::Dense { min, len, bits, .. } => Some(
                (0..*len)
                    .filter(|&i| get_bit(bits, i))
                    .map(|i| min + i as i64)
                    .collect(),
            ),
            Layer::Sparse(_) if self.dim == 1 => Some(self.sorted_points().into_iter().map(|p| p[0]).collect()),
            Layer::Sparse(_) => None,
        }
    }

    /// Multipliers `a_t` with `p = Σ a_t·v_t`, preferring small `|a_t|` (positive first),
    /// chosen from the last term backwards. Requires layers to have been kept.
    pub fn decompose(&self, p: &[i64]) -> Option<Vec<i64>> {
        assert!(self.keep_layers || self.terms.is_empty(), "layers were not kept");
        if !self.contains(p) {
            return None;
        }
        let mut x: Point = p.into();
        let mut mult = vec![0i64; self.terms.len()];
        for t in (0..self.terms.len()).rev() {
            let term = &self.terms[t];
            let prev = &self.layers[t];
            let found = small_first(term.lo, term.hi).find_map(|a| {
                let y: Option<Point> = x
                    .iter()
                    .zip(&term.point)
                    .map(|(xi, vi)| vi.checked_mul(a).and_then(|av| xi.checked_sub(av)))
                    .collect();
                y.filter(|y| prev.contains(y)).map(|y| (a, y))
            });
            let (a, y) = found.expect("member of layer t+1 decomposes through layer t");
            mult[t] = a;
            x = y;
        }
        debug_assert!(x.iter().all(|c| *c == 0));
        Some(mult)
    }
}

/// `0, 1, −1, 2, −2, …` restricted to `[lo, hi]`.
fn small_first(lo: i64, hi: i64) -> impl Iterator<Item = i64> {
    let start = 0i64.clamp(lo, hi);
    let reach = (hi - start).max(start - lo);
    (0..=reach).flat_map(move |m| {
        let up = start + m;
        let down = start - m;
        let a = (up <= hi).then_some(up);
        let b = (m > 0 && down >= lo).then_some(down);
        a.into_iter().chain(b)
    })
}

fn dense_span(terms: &[Term]) -> Option<i64> {
    let mut lo = 0i64;
    let mut hi = 0i64;
    for t in terms {
        let v = t.point[0];
        let a = t.lo.checked_mul(v)?;
        let b = t.hi.checked_mul(v)?;
        lo = lo.checked_add(a.min(b))?;
        hi = hi.checked_add(a.max(b))?;
    }
    hi.checked_sub(lo)?.checked_add(1)
}

fn dense_step(omin: i64, olen: usize, old: &[u64], term: &Term) -> Result<Layer, SumsetError> {
    let v = term.point[0];
    let s = v.unsigned_abs() as usize;
    // shifts are {c·s : c ∈ [clo, chi]}
    let (clo, chi) = if v > 0 {
        (term.lo, term.hi)
    } else {
        (-term.hi, -term.lo)
    };
    let of = || SumsetError::Overflow;
    if s == 0 {
        return Ok(Layer::Dense {
            min: omin,
            len: olen,
            bits: old.to_vec(),
            count: old.iter().map(|w| w.count_ones() as u64).sum(),
        });
    }
    let width = (chi - clo + 1) as usize;
    let nmin = omin
        .checked_add(clo.checked_mul(s as i64).ok_or_else(of)?)
        .ok_or_else(of)?;
    let nlen = olen + (width - 1) * s;
    let mut bits = vec![0u64; nlen.div_ceil(64)];
    let mut count = 0u64;
    let reach = width * s;
    // new[X] = any old[X − t·s], t ∈ [0, width)
    for r in 0..s.min(nlen) {
        let mut window = 0u32;
        let mut x = r;
        while x < nlen {
            if x < olen && get_bit(old, x) {
                window += 1;
            }
            if x >= reach && x - reach < olen && get_bit(old, x - reach) {
                window -= 1;
            }
            if window > 0 {
                set_bit(&mut bits, x);
                count += 1;
            }
            x += s;
        }
    }
    Ok(Layer::Dense {
        min: nmin,
        len: nlen,
        bits,
        count,
    })
}

fn sparse_step(old: &FxHashSet<Point>, term: &Term, limits: &Limits) -> Result<Layer, SumsetError> {
    let width = (term.hi - term.lo + 1) as u64;
    let work = (old.len() as u64).saturating_mul(width);
    if work > limits.max_work {
        return Err(SumsetError::WorkCap { cap: limits.max_work });
    }
    let mut next: FxHashSet<Point> = FxHashSet::default();
    next.reserve((old.len() as u64 * width.min(4)) as usize);
    let of = || SumsetError::Overflow;
    for (n, p) in old.iter().enumerate() {
        if n % 4096 == 0 {
            limits.check_deadline()?;
        }
        let mut q: Point = p
            .iter()
            .zip(&term.point)
            .map(|(x, v)| v.checked_mul(term.lo).and_then(|d| x.checked_add(d)))
            .collect::<Option<_>>()
            .ok_or_else(of)?;
        for a in term.lo..=term.hi {
            if a > term.lo {
                for (qi, vi) in q.iter_mut().zip(&term.point) {
                    *qi = qi.checked_add(*vi).ok_or_else(of)?;
                }
            }
            next.insert(q.clone());
        }
        if next.len() as u64 > limits.max_values {
            return Err(SumsetError::ValueCap {
                cap: limits.max_values,
                reached: next.len() as u64,
            });
        }
    }
    Ok(Layer::Sparse(next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use smallvec::smallvec;

    fn brute(dim: usize, terms: &[Term]) -> Vec<Point> {
        let mut acc: Vec<Point> = vec![Point::from_elem(0, dim)];
        for t in terms {
            let mut next = Vec::new();
            for p in &acc {
                for a in t.lo..=t.hi {
                    next.push(p.iter().zip(&t.point).map(|(x, v)| x + a * v).collect());
                }
            }
            next.sort();
            next.dedup();
            acc = next;
        }
        acc
    }

    fn t1(v: i64, lo: i64, hi: i64) -> Term {
        Term {
            point: smallvec![v],
            lo,
            hi,
        }
    }

    #[test]
    fn dense_matches_brute_force() {
        let terms = vec![t1(3, 0, 4), t1(-5, -2, 3), t1(7, 0, 1), t1(2, -3, -1)];
        let s = Sumset::build(1, terms.clone(), true, &Limits::default()).unwrap();
        let got = s.sorted_points();
        assert_eq!(got, brute(1, &terms));
        for p in &got {
            let m = s.decompose(p).unwrap();
            let back: i64 = m.iter().zip(&terms).map(|(a, t)| a * t.point[0]).sum();
            assert_eq!(back, p[0]);
            assert!(m.iter().zip(&terms).all(|(a, t)| t.lo <= *a && *a <= t.hi));
        }
        assert!(s.decompose(&[1000]).is_none());
    }

    #[test]
    fn sparse_matches_brute_force() {
        let terms = vec![
            Term {
                point: smallvec![1, 0],
                lo: 0,
                hi: 3,
            },
            Term {
                point: smallvec![1, 1],
                lo: -1,
                hi: 2,
            },
            Term {
                point: smallvec![0, 2],
                lo: 0,
                hi: 2,
            },
        ];
        let s = Sumset::build(2, terms.clone(), true, &Limits::default()).unwrap();
        assert_eq!(s.sorted_points(), brute(2, &terms));
        for p in s.sorted_points() {
            let m = s.decompose(&p).unwrap();
            for d in 0..2 {
                let back: i64 = m.iter().zip(&terms).map(|(a, t)| a * t.point[d]).sum();
                assert_eq!(back, p[d]);
            }
        }
    }

    #[test]
    fn caps() {
        let terms = vec![t1(1, 0, 100)];
        let err = Sumset::build(1, terms, false, &Limits::default().with_max_values(50)).unwrap_err();
        assert_eq!(err, SumsetError::ValueCap { cap: 50, reached: 101 });
        let terms = vec![
            Term {
                point: smallvec![1, 0],
                lo: 0,
                hi: 100,
            },
            Term {
                point: smallvec![0, 1],
                lo: 0,
                hi: 100,
            },
        ];
        let err = Sumset::build(2, terms, false, &Limits::default().with_max_work(1000)).unwrap_err();
        assert_eq!(err, SumsetError::WorkCap { cap: 1000 });
    }

    #[test]
    fn small_first_order() {
        assert_eq!(small_first(-2, 3).collect::<Vec<_>>(), vec![0, 1, -1, 2, -2, 3]);
        assert_eq!(small_first(2, 4).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert_eq!(small_first(-4, -2).collect::<Vec<_>>(), vec![-2, -3, -4]);
    }
}

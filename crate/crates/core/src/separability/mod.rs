//! Injectivity of `(w1, w2) ↦ w1 + h_ii·w2` on codebooks, integer-polynomial witnesses
//! `h_ii·Q − P = 0`, rational cross-ratio obstructions, and the 3-user decision procedure.

mod three_user;

pub use three_user::{classify_3user, ThreeUserOutcome, Topology};

use num_bigint::BigInt;
use num_rational::BigRational;
use rustc_hash::FxHashMap;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{cross_ratio, ChannelError, ChannelMatrix};
use crate::codebook::embed::{LinearMap, Point};
use crate::codebook::{
    build_w, enumerate_monomials, evaluate_monomials, CodebookError, CodebookSet, GroupedSumset, IntPolynomial, Limits,
    Monomial, SumsetError,
};
use crate::exactnum::{ExactScalar, RationalSpan};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum SeparabilityError {
    #[error("h_ii must be nonzero")]
    ZeroGain,
    #[error("{0}")]
    Precondition(String),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    #[serde(skip)]
    Channel(#[from] ChannelError),
}

impl From<SumsetError> for SeparabilityError {
    fn from(e: SumsetError) -> Self {
        SeparabilityError::Codebook(CodebookError::Resource(e))
    }
}

impl SeparabilityError {
    pub fn is_resource(&self) -> bool {
        matches!(self, SeparabilityError::Codebook(CodebookError::Resource(_)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectivityStatus {
    InjectiveUpToBounds,
    Violated,
}

/// Two distinct pairs with `w1 + h·w2 = w̃1 + h·w̃2`, each value with a coefficient witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Collision {
    #[serde(serialize_with = "crate::serial::scalar")]
    pub h: ExactScalar,
    #[serde(serialize_with = "crate::serial::scalars")]
    pub first: Vec<ExactScalar>,
    #[serde(serialize_with = "crate::serial::scalars")]
    pub second: Vec<ExactScalar>,
    /// Coefficient vectors for `first[0], first[1], second[0], second[1]`.
    pub coefficients: Vec<Vec<u64>>,
}

impl Collision {
    /// Exact re-check of the collision identity.
    pub fn verify(&self) -> bool {
        let lhs = &self.first[0] + &(&self.h * &self.first[1]);
        let rhs = &self.second[0] + &(&self.h * &self.second[1]);
        self.first != self.second && (&lhs - &rhs).classify().is_zero
    }

    /// The equivalent polynomial witness `Q = a(w2) − a(w̃2)`, `P = a(w̃1) − a(w1)`.
    pub fn to_polynomials(&self, monomials: &[Monomial]) -> PolynomialWitness {
        let diff = |a: &[u64], b: &[u64]| -> Vec<i64> { a.iter().zip(b).map(|(x, y)| *x as i64 - *y as i64).collect() };
        let c = &self.coefficients;
        PolynomialWitness {
            p: IntPolynomial::from_coefficients(monomials, &diff(&c[2], &c[0])),
            q: IntPolynomial::from_coefficients(monomials, &diff(&c[1], &c[3])),
        }
    }
}

/// Nonzero integer polynomials with `h·Q(ĥ) − P(ĥ) = 0` and `Q(ĥ) ≠ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialWitness {
    pub p: IntPolynomial,
    pub q: IntPolynomial,
}

impl PolynomialWitness {
    pub fn verify(&self, h: &ExactScalar, hhat: &[ExactScalar]) -> bool {
        let qv = self.q.evaluate(hhat);
        let pv = self.p.evaluate(hhat);
        !self.p.is_zero() && !self.q.is_zero() && !qv.is_zero() && (&(h * &qv) - &pv).classify().is_zero
    }

    /// The equivalent collision, splitting `Q = Q⁺ − Q⁻` and `P = P⁺ − P⁻`:
    /// `(P⁻, Q⁺)` and `(P⁺, Q⁻)` collide. Coefficients are returned in `monomials` order.
    pub fn to_collision(&self, h: &ExactScalar, hhat: &[ExactScalar], monomials: &[Monomial]) -> Option<Collision> {
        let (pp, pn) = self.p.split_signs();
        let (qp, qn) = self.q.split_signs();
        let coeffs = |p: &IntPolynomial| -> Option<Vec<u64>> {
            Some(p.coefficients(monomials)?.into_iter().map(|c| c as u64).collect())
        };
        Some(Collision {
            h: h.clone(),
            first: vec![pn.evaluate(hhat), qp.evaluate(hhat)],
            second: vec![pp.evaluate(hhat), qn.evaluate(hhat)],
            coefficients: vec![coeffs(&pn)?, coeffs(&qp)?, coeffs(&pp)?, coeffs(&qn)?],
        })
    }

    pub fn display(&self, k: usize) -> String {
        format!("P = {}, Q = {}", self.p.display(k), self.q.display(k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectivityVerdict {
    pub status: InjectivityStatus,
    pub collision: Option<Collision>,
    pub polynomial_witness: Option<PolynomialWitness>,
    /// `(N, d)` codebooks scanned.
    pub bounds: Vec<(u64, u32)>,
    /// `(deg_bound, coeff_bound)` of the polynomial search, if run.
    pub polynomial_bounds: Option<(u32, u64)>,
}

/// Pairwise collision scanner over one codebook, reusable across gains `h`.
///
/// Differences `w_a − w_b` are tabulated over all ordered pairs (first pair kept); then
/// pairs `(j, l)` are scanned in lexicographic order for `h·(w_j − w_l)` in the table.
/// A hit `h·(w_j − w_l) = w_k − w_i` is the collision `(w_i, w_j)` vs `(w_k, w_l)`.
pub struct CollisionScanner<'a> {
    w: &'a CodebookSet,
    points: Vec<Point>,
    diffs: FxHashMap<Point, (u32, u32)>,
}

impl<'a> CollisionScanner<'a> {
    pub fn new(w: &'a CodebookSet, limits: &Limits) -> Result<Self, SeparabilityError> {
        let n = w.len();
        let pairs = n.saturating_mul(n);
        if pairs > limits.max_work {
            return Err(SumsetError::WorkCap { cap: limits.max_work }.into());
        }
        let points = w.points();
        let mut diffs: FxHashMap<Point, (u32, u32)> = FxHashMap::default();
        for (a, pa) in points.iter().enumerate() {
            if a % 256 == 0 {
                limits.check_deadline()?;
            }
            for (b, pb) in points.iter().enumerate() {
                if a != b {
                    let d: Point = pa.iter().zip(pb).map(|(x, y)| x - y).collect();
                    diffs.entry(d).or_insert((a as u32, b as u32));
                }
            }
        }
        Ok(Self { w, points, diffs })
    }

    /// First collision for gain `h`, as indices `(i, j, k, l)`.
    pub fn scan_indices(
        &self,
        h: &ExactScalar,
        limits: &Limits,
    ) -> Result<Option<(usize, usize, usize, usize)>, SeparabilityError> {
        if h.is_zero() {
            return Err(SeparabilityError::ZeroGain);
        }
        let emb = self.w.embedding();
        let Some(map) = LinearMap::multiplication(h, emb, emb) else {
            return Err(CodebookError::Overflow.into());
        };
        for (j, pj) in self.points.iter().enumerate() {
            if j % 256 == 0 {
                limits.check_deadline()?;
            }
            for (l, pl) in self.points.iter().enumerate() {
                if j == l {
                    continue;
                }
                let q: Point = pj.iter().zip(pl).map(|(x, y)| x - y).collect();
                if let Some(t) = map.apply(&q) {
                    if let Some(&(k, i)) = self.diffs.get(&t) {
                        return Ok(Some((i as usize, j, k as usize, l)));
                    }
                }
            }
        }
        Ok(None)
    }

    pub fn scan(&self, h: &ExactScalar, limits: &Limits) -> Result<Option<Collision>, SeparabilityError> {
        let Some((i, j, k, l)) = self.scan_indices(h, limits)? else {
            return Ok(None);
        };
        let val = |idx: usize| self.w.embedding().scalar(&self.points[idx]);
        let vals = [val(i), val(j), val(k), val(l)];
        let coefficients = vals.iter().map(|v| self.w.witness(v).expect("member of W")).collect();
        let [a, b, c, d] = vals;
        Ok(Some(Collision {
            h: h.clone(),
            first: vec![a, b],
            second: vec![c, d],
            coefficients,
        }))
    }
}

/// Exhaustive collision test of `(w1, w2) ↦ w1 + h·w2` on `W × W`.
pub fn test_injectivity(
    w: &CodebookSet,
    h: &ExactScalar,
    limits: &Limits,
) -> Result<InjectivityVerdict, SeparabilityError> {
    if h.is_zero() {
        return Err(SeparabilityError::ZeroGain);
    }
    let collision = CollisionScanner::new(w, limits)?.scan(h, limits)?;
    Ok(InjectivityVerdict {
        status: if collision.is_some() {
            InjectivityStatus::Violated
        } else {
            InjectivityStatus::InjectiveUpToBounds
        },
        collision,
        polynomial_witness: None,
        bounds: vec![(w.n(), w.d())],
        polynomial_bounds: None,
    })
}

/// Spreads `total` over `count` slots with `|slot| ≤ bound`, front-loaded.
fn spread(total: i64, count: usize, bound: i64) -> Vec<i64> {
    let mut left = total;
    (0..count)
        .map(|_| {
            let take = left.clamp(-bound, bound);
            left -= take;
            take
        })
        .collect()
}

/// Searches integer polynomials `P, Q` of degree ≤ `deg_bound` with coefficients bounded
/// by `coeff_bound` in absolute value such that `h_ii·Q(ĥ) = P(ĥ) ≠ 0`.
///
/// Three stages: a subspace certificate (if `U ∩ h_ii·U = {0}` for the ℚ-span `U` of the
/// monomial values, no witness exists at any bounds), a pass over pairs of value
/// classes with a rational ratio, and an exhaustive signed-sumset search.
pub fn search_polynomial_witness(
    h: &ChannelMatrix,
    i: usize,
    deg_bound: u32,
    coeff_bound: u64,
    limits: &Limits,
) -> Result<Option<PolynomialWitness>, SeparabilityError> {
    let hii = h.diag(i).clone();
    if hii.is_zero() {
        return Err(SeparabilityError::ZeroGain);
    }
    let (monomials, values) = evaluate_monomials(h, deg_bound);
    let c = i64::try_from(coeff_bound).map_err(|_| CodebookError::Overflow)?;
    let hhat = h.offdiag_vector();
    let found = search_in_values(&hii, &monomials, &values, c, limits)?;
    if let Some(w) = &found {
        assert!(w.verify(&hii, &hhat), "polynomial witness failed exact re-check");
    }
    Ok(found)
}

fn search_in_values(
    hii: &ExactScalar,
    monomials: &[Monomial],
    values: &[ExactScalar],
    c: i64,
    limits: &Limits,
) -> Result<Option<PolynomialWitness>, SeparabilityError> {
    if c == 0 {
        return Ok(None);
    }
    let groups = crate::codebook::group_by_value(values);
    let span = RationalSpan::from_values(groups.iter().map(|g| &g.value));
    if span.is_independent_of(&span.scaled(hii)) {
        return Ok(None);
    }

    let poly = |members: &[usize], total: i64| {
        let mut coeffs = vec![0i64; monomials.len()];
        for (m, a) in members.iter().zip(spread(total, members.len(), c)) {
            coeffs[*m] = a;
        }
        IntPolynomial::from_coefficients(monomials, &coeffs)
    };

    // h·v_g / v_p = a/b  ⇒  Q = b·f_g, P = a·f_p
    for g in &groups {
        let image = hii * &g.value;
        for p in &groups {
            let ratio = image.checked_div(&p.value).expect("nonzero group value");
            let Some(r) = ratio.rational_value() else { continue };
            let (Some(a), Some(b)) = (to_i64(r.numer()), to_i64(r.denom())) else {
                continue;
            };
            let cap_q = c.saturating_mul(g.members.len() as i64);
            let cap_p = c.saturating_mul(p.members.len() as i64);
            if b <= cap_q && a.abs() <= cap_p {
                return Ok(Some(PolynomialWitness {
                    p: poly(&p.members, a),
                    q: poly(&g.members, b),
                }));
            }
        }
    }

    let signed = GroupedSumset::build(values, -c, c, true, limits)?;
    let Some(map) = LinearMap::multiplication(hii, &signed.embedding, &signed.embedding) else {
        return Err(CodebookError::Overflow.into());
    };
    for (n, q) in signed.sumset.sorted_points().into_iter().enumerate() {
        if n % 4096 == 0 {
            limits.check_deadline()?;
        }
        match q.iter().find(|x| **x != 0) {
            Some(x) if *x > 0 => {}
            _ => continue,
        }
        let Some(t) = map.apply(&q) else { continue };
        if signed.sumset.contains(&t) {
            let qc = signed.coefficients(&q).expect("member");
            let pc = signed.coefficients(&t).expect("member");
            return Ok(Some(PolynomialWitness {
                p: IntPolynomial::from_coefficients(monomials, &pc),
                q: IntPolynomial::from_coefficients(monomials, &qc),
            }));
        }
    }
    Ok(None)
}

fn to_i64(x: &BigInt) -> Option<i64> {
    num_traits::ToPrimitive::to_i64(x)
}

/// Runs the collision scan over a grid of codebooks and the polynomial search for user `i`.
pub fn injectivity_grid(
    h: &ChannelMatrix,
    i: usize,
    grid: &[(u64, u32)],
    polynomial_bounds: Option<(u32, u64)>,
    limits: &Limits,
) -> Result<InjectivityVerdict, SeparabilityError> {
    let hii = h.diag(i);
    let mut collision = None;
    let mut searched = Vec::new();
    for &(n, d) in grid {
        let w = build_w(h, n, d, limits)?;
        searched.push((n, d));
        if let Some(c) = CollisionScanner::new(&w, limits)?.scan(hii, limits)? {
            collision = Some(c);
            break;
        }
    }
    let polynomial_witness = match polynomial_bounds {
        Some((deg, coeff)) => search_polynomial_witness(h, i, deg, coeff, limits)?,
        None => None,
    };
    let violated = collision.is_some() || polynomial_witness.is_some();
    Ok(InjectivityVerdict {
        status: if violated {
            InjectivityStatus::Violated
        } else {
            InjectivityStatus::InjectiveUpToBounds
        },
        collision,
        polynomial_witness,
        bounds: searched,
        polynomial_bounds,
    })
}

/// A distinct triple whose cross ratio `h_ii·h_kj/(h_ij·h_ki)` is a nonzero rational.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatioObstruction {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    #[serde(serialize_with = "crate::serial::rational")]
    pub ratio: BigRational,
}

fn triples(n: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..n)
        .flat_map(move |i| (0..n).flat_map(move |j| (0..n).map(move |k| (i, j, k))))
        .filter(|&(i, j, k)| i != j && j != k && i != k)
}

/// First triple (lexicographic) with a rational nonzero cross ratio. Such a triple rules
/// out half a DoF per user for the matrix and every scaled version of it.
pub fn rational_ratio_obstruction(h: &ChannelMatrix) -> Option<RatioObstruction> {
    triples(h.k()).find_map(|(i, j, k)| {
        if h.get(i, j).is_zero() || h.get(k, i).is_zero() {
            return None;
        }
        let r = cross_ratio(h, i, j, k).ok()?.rational_value()?;
        (!num_traits::Zero::is_zero(&r)).then_some(RatioObstruction { i, j, k, ratio: r })
    })
}

fn nonzero_rational(x: &ExactScalar) -> bool {
    !x.is_zero() && x.is_rational()
}

fn rational_links(h: &ChannelMatrix, i: usize, j: usize, k: usize) -> bool {
    [h.get(i, j), h.diag(i), h.get(k, j), h.get(k, i)]
        .into_iter()
        .all(nonzero_rational)
}

/// First triple (lexicographic) with `h_ij, h_ii, h_kj, h_ki` all nonzero rationals; such a
/// 3-user channel has total DoF strictly below 3/2.
pub fn rational_link_triple(h: &ChannelMatrix) -> Result<Option<(usize, usize, usize)>, SeparabilityError> {
    if h.k() != 3 {
        return Err(SeparabilityError::Precondition(
            "the rational-link triple check needs K = 3".into(),
        ));
    }
    Ok(triples(3).find(|&(i, j, k)| rational_links(h, i, j, k)))
}

/// Same as [`rational_link_triple`] restricted to triples with first index `i`.
pub fn rational_link_triple_for_user(h: &ChannelMatrix, i: usize) -> Option<(usize, usize, usize)> {
    triples(3)
        .filter(|t| t.0 == i)
        .find(|&(i, j, k)| rational_links(h, i, j, k))
}

/// Monomials of degree ≤ d for K users, re-exported for witness replay.
pub fn monomials_for(k: usize, d: u32) -> Vec<Monomial> {
    enumerate_monomials(k, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::build_w_from_hhat;

    fn s(x: &str) -> ExactScalar {
        x.parse().unwrap()
    }

    fn diag_sqrt() -> ChannelMatrix {
        ChannelMatrix::with_diagonal(&[s("sqrt(2)"), s("sqrt(3)"), s("sqrt(5)")], &ExactScalar::one())
    }

    fn all_ones() -> ChannelMatrix {
        ChannelMatrix::with_diagonal(&[s("1"), s("1"), s("1")], &ExactScalar::one())
    }

    /// `W_{n,0} = {0..n−1}`.
    fn range_w(n: u64) -> CodebookSet {
        build_w_from_hhat(3, vec![ExactScalar::one(); 6], n, 0, &Limits::default()).unwrap()
    }

    #[test]
    fn irrational_gain_is_injective_on_integers() {
        let w = build_w(&all_ones(), 2, 1, &Limits::default()).unwrap();
        assert_eq!(w.len(), 8);
        let v = test_injectivity(&w, &s("sqrt(2)"), &Limits::default()).unwrap();
        assert_eq!(v.status, InjectivityStatus::InjectiveUpToBounds);
    }

    #[test]
    fn unit_gain_collides() {
        let v = test_injectivity(&range_w(2), &s("1"), &Limits::default()).unwrap();
        let c = v.collision.unwrap();
        assert_eq!(c.first, vec![s("1"), s("0")]);
        assert_eq!(c.second, vec![s("0"), s("1")]);
        assert!(c.verify());
    }

    #[test]
    fn three_halves_gain_collides() {
        let v = test_injectivity(&range_w(4), &s("3/2"), &Limits::default()).unwrap();
        let c = v.collision.unwrap();
        assert_eq!(c.first, vec![s("3"), s("0")]);
        assert_eq!(c.second, vec![s("0"), s("2")]);
        assert!(c.verify());
    }

    #[test]
    fn pair_cap() {
        let w = range_w(100);
        let err = test_injectivity(&w, &s("sqrt(2)"), &Limits::default().with_max_work(1000)).unwrap_err();
        assert!(err.is_resource());
    }

    #[test]
    fn polynomial_witness_examples() {
        let w = search_polynomial_witness(&all_ones(), 0, 3, 16, &Limits::default())
            .unwrap()
            .unwrap();
        assert_eq!(w.p.display(3), "1");
        assert_eq!(w.q.display(3), "1");
        let h = ChannelMatrix::from_strs(&[&["sqrt(6)", "sqrt(2)", "sqrt(3)"], &["1", "1", "1"], &["1", "1", "1"]]);
        let w = search_polynomial_witness(&h, 0, 2, 2, &Limits::default())
            .unwrap()
            .unwrap();
        assert_eq!(w.p.display(3), "h12*h13");
        assert_eq!(w.q.display(3), "1");
        assert!(search_polynomial_witness(&diag_sqrt(), 0, 3, 8, &Limits::default())
            .unwrap()
            .is_none());
    }

    #[test]
    fn exhaustive_stage_finds_combined_witness() {
        // h = 1 + √2 over values {1, √2}: needs Q = 1, P = 1 + √2 (two classes at once)
        let h = ChannelMatrix::from_strs(&[&["1+sqrt(2)", "sqrt(2)", "0"], &["0", "1", "0"], &["0", "0", "1"]]);
        let w = search_polynomial_witness(&h, 0, 1, 1, &Limits::default())
            .unwrap()
            .unwrap();
        assert!(w.verify(h.diag(0), &h.offdiag_vector()));
        let grid = injectivity_grid(&h, 0, &[(2, 1)], None, &Limits::default()).unwrap();
        assert_eq!(grid.status, InjectivityStatus::Violated);
    }

    #[test]
    fn witness_conversions() {
        let h = ChannelMatrix::from_strs(&[&["3/2", "1", "0"], &["0", "1", "1"], &["1", "0", "2"]]);
        let w = build_w(&h, 3, 1, &Limits::default()).unwrap();
        let c = test_injectivity(&w, h.diag(0), &Limits::default())
            .unwrap()
            .collision
            .unwrap();
        let pw = c.to_polynomials(w.monomials());
        assert!(pw.verify(h.diag(0), &h.offdiag_vector()));
        let back = pw.to_collision(h.diag(0), &h.offdiag_vector(), w.monomials()).unwrap();
        assert!(back.verify());
    }

    #[test]
    fn ratio_obstruction() {
        let o = rational_ratio_obstruction(&all_ones()).unwrap();
        assert_eq!((o.i, o.j, o.k), (0, 1, 2));
        assert_eq!(o.ratio, BigRational::from_integer(1.into()));
        assert!(rational_ratio_obstruction(&diag_sqrt()).is_none());
    }

    #[test]
    fn rational_link_triples() {
        assert_eq!(rational_link_triple(&all_ones()).unwrap(), Some((0, 1, 2)));
        assert_eq!(rational_link_triple(&diag_sqrt()).unwrap(), None);
        let h = ChannelMatrix::from_strs(&[&["1/2", "0", "1"], &["1", "sqrt(2)", "1"], &["1", "1", "sqrt(3)"]]);
        assert_eq!(rational_link_triple(&h).unwrap(), Some((0, 2, 1)));
    }
}

//! Exact input distributions, entropies of linear combinations, per-user DoF lower bounds
//! for self-similar inputs, and the sufficiency pipeline over growing codebooks.

mod dist;

pub use dist::DiscreteDistribution;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{ChannelError, ChannelMatrix, ScalingPair};
use crate::codebook::{build_w, n_pow, ratio_series, CodebookError, Limits, RatioSeries, SumsetError, Truncation};
use crate::exactnum::{ExactScalar, RationalSpan};
use crate::separability::{injectivity_grid, InjectivityVerdict};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum DofError {
    #[error("distribution needs at least one atom")]
    Empty,
    #[error("{0}")]
    Invalid(String),
    #[error("arithmetic overflow in exact weights or coordinates")]
    Overflow,
    #[error(transparent)]
    Resource(#[from] SumsetError),
    #[error(transparent)]
    Codebook(CodebookError),
    #[error(transparent)]
    #[serde(skip)]
    Channel(#[from] ChannelError),
}

impl From<CodebookError> for DofError {
    fn from(e: CodebookError) -> Self {
        match e {
            CodebookError::Resource(r) => DofError::Resource(r),
            CodebookError::Overflow => DofError::Overflow,
            other => DofError::Codebook(other),
        }
    }
}

impl DofError {
    /// Errors that mean "ran out of budget" rather than "bad input".
    pub fn is_resource(&self) -> bool {
        matches!(self, DofError::Resource(_) | DofError::Overflow)
    }
}

pub fn dist_uniform(values: &[ExactScalar]) -> Result<DiscreteDistribution, DofError> {
    DiscreteDistribution::uniform(values)
}

pub fn entropy(d: &DiscreteDistribution) -> f64 {
    d.entropy()
}

fn check_lengths(coeffs: &[ExactScalar], dists: &[DiscreteDistribution]) -> Result<(), DofError> {
    if coeffs.len() != dists.len() {
        return Err(DofError::Invalid(format!(
            "{} coefficients for {} distributions",
            coeffs.len(),
            dists.len()
        )));
    }
    Ok(())
}

/// Exact distribution of `Σ c_j X_j` for independent `X_j`.
pub fn dist_lincomb(
    coeffs: &[ExactScalar],
    dists: &[DiscreteDistribution],
    limits: &Limits,
) -> Result<DiscreteDistribution, DofError> {
    check_lengths(coeffs, dists)?;
    let mut acc = DiscreteDistribution::point_mass(ExactScalar::zero());
    for (c, d) in coeffs.iter().zip(dists) {
        if c.is_zero() {
            continue;
        }
        acc = acc.convolve(&d.scaled(c)?, limits)?;
    }
    Ok(acc)
}

/// Sum of difference spans.
fn joint_span<'a, I: IntoIterator<Item = &'a RationalSpan>>(spans: I) -> RationalSpan {
    spans.into_iter().fold(RationalSpan::new(), |acc, s| acc.sum(s))
}

/// `H(Σ c_j X_j)` in bits.
///
/// A summand whose support spans a ℚ-subspace meeting the span of all other summands only
/// in 0 is recovered from the sum, so its entropy splits off exactly; only the remaining
/// summands are convolved.
pub fn lincomb_entropy(
    coeffs: &[ExactScalar],
    dists: &[DiscreteDistribution],
    limits: &Limits,
) -> Result<f64, DofError> {
    check_lengths(coeffs, dists)?;
    let mut terms = Vec::new();
    for (c, d) in coeffs.iter().zip(dists) {
        if !c.is_zero() && !d.is_degenerate() {
            terms.push((d, d.scaled(c)?));
        }
    }
    let spans: Vec<RationalSpan> = terms.iter().map(|(_, s)| s.difference_span()).collect();
    let mut bits = 0.0;
    let mut rest: Option<DiscreteDistribution> = None;
    for (t, (base, scaled)) in terms.iter().enumerate() {
        let others = joint_span(spans.iter().enumerate().filter(|(u, _)| *u != t).map(|(_, s)| s));
        if spans[t].is_independent_of(&others) {
            bits += base.entropy();
        } else {
            rest = Some(match rest {
                None => scaled.clone(),
                Some(acc) => acc.convolve(scaled, limits)?,
            });
        }
    }
    Ok(bits + rest.map_or(0.0, |d| d.entropy()))
}

/// Entropies and additivity of the receive sum at one user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Separability {
    /// Signal and interference supports never collide in the receive sum.
    pub additive: bool,
    /// `H(signal) + H(interference) − H(receive)`, exactly 0 when additive.
    pub gap: f64,
    pub h_signal: f64,
    pub h_interference: f64,
    pub h_receive: f64,
}

fn check_inputs(h: &ChannelMatrix, dists: &[DiscreteDistribution]) -> Result<(), DofError> {
    if let Err(v) = h.validate() {
        return Err(ChannelError::Invalid(v).into());
    }
    if dists.len() != h.k() {
        return Err(DofError::Invalid(format!(
            "{} distributions for K = {}",
            dists.len(),
            h.k()
        )));
    }
    Ok(())
}

fn separability_unchecked(
    h: &ChannelMatrix,
    i: usize,
    dists: &[DiscreteDistribution],
    limits: &Limits,
) -> Result<Separability, DofError> {
    let k = h.k();
    let signal = dists[i].scaled(h.diag(i))?;
    let int_coeffs: Vec<ExactScalar> = (0..k)
        .map(|j| {
            if j == i {
                ExactScalar::zero()
            } else {
                h.get(i, j).clone()
            }
        })
        .collect();
    let h_signal = dists[i].entropy();
    let mut int_spans = Vec::new();
    for (c, d) in int_coeffs.iter().zip(dists) {
        if !c.is_zero() && !d.is_degenerate() {
            int_spans.push(d.scaled(c)?.difference_span());
        }
    }
    if signal.difference_span().is_independent_of(&joint_span(&int_spans)) {
        let h_interference = lincomb_entropy(&int_coeffs, dists, limits)?;
        return Ok(Separability {
            additive: true,
            gap: 0.0,
            h_signal,
            h_interference,
            h_receive: h_signal + h_interference,
        });
    }
    let interference = dist_lincomb(&int_coeffs, dists, limits)?;
    let receive = signal.convolve(&interference, limits)?;
    let additive = receive.len() == signal.len() * interference.len();
    let (h_interference, h_receive) = (interference.entropy(), receive.entropy());
    Ok(Separability {
        additive,
        gap: if additive {
            0.0
        } else {
            h_signal + h_interference - h_receive
        },
        h_signal,
        h_interference,
        h_receive,
    })
}

/// Whether `H(h_ii X_i + Σ_{j≠i} h_ij X_j) = H(h_ii X_i) + H(Σ_{j≠i} h_ij X_j)`, decided on supports.
pub fn separability_check(
    h: &ChannelMatrix,
    i: usize,
    dists: &[DiscreteDistribution],
    limits: &Limits,
) -> Result<Separability, DofError> {
    check_inputs(h, dists)?;
    separability_unchecked(h, i, dists, limits)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserBound {
    /// `min{H(receive)/log(1/r), 1} − min{H(interference)/log(1/r), 1}`.
    pub bound: f64,
    #[serde(flatten)]
    pub terms: Separability,
}

fn log2_big(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 960 {
        x.to_f64().expect("finite").log2()
    } else {
        let shift = bits - 64;
        (x >> shift).to_f64().expect("finite").log2() + shift as f64
    }
}

/// `log₂(1/r)` for rational `r ∈ (0, 1)`.
pub fn log2_inverse(r: &BigRational) -> Result<f64, DofError> {
    if !r.is_positive() || *r >= BigRational::one() {
        return Err(DofError::Invalid(format!("r = {r} must lie in (0, 1)")));
    }
    Ok(log2_big(r.denom()) - log2_big(r.numer()))
}

fn bound_from(terms: Separability, log_inv_r: f64) -> UserBound {
    let bound = (terms.h_receive / log_inv_r).min(1.0) - (terms.h_interference / log_inv_r).min(1.0);
    UserBound { bound, terms }
}

/// Per-user DoF lower bounds for self-similar inputs with digit distributions `dists`.
pub fn self_similar_bound(
    h: &ChannelMatrix,
    dists: &[DiscreteDistribution],
    r: &BigRational,
    limits: &Limits,
) -> Result<Vec<UserBound>, DofError> {
    self_similar_bound_log(h, dists, log2_inverse(r)?, limits)
}

/// As [`self_similar_bound`] with `log₂(1/r)` given directly (for `r` not of the form `1/q`).
pub fn self_similar_bound_log(
    h: &ChannelMatrix,
    dists: &[DiscreteDistribution],
    log_inv_r: f64,
    limits: &Limits,
) -> Result<Vec<UserBound>, DofError> {
    check_inputs(h, dists)?;
    if !(log_inv_r > 0.0 && log_inv_r.is_finite()) {
        return Err(DofError::Invalid("log(1/r) must be positive".into()));
    }
    (0..h.k())
        .into_par_iter()
        .map(|i| Ok(bound_from(separability_unchecked(h, i, dists, limits)?, log_inv_r)))
        .collect()
}

/// Inputs for the scaled channel: `X'_i = X_i / c_i`, so every receive sum of
/// `scale(h, s)` is the original one times `r_i`.
pub fn scaled_input_compensation(
    h: &ChannelMatrix,
    s: &ScalingPair,
    dists: &[DiscreteDistribution],
) -> Result<Vec<DiscreteDistribution>, DofError> {
    if s.k() != h.k() || dists.len() != h.k() {
        return Err(DofError::Invalid(
            "scaling, matrix and distributions disagree on K".into(),
        ));
    }
    s.cols()
        .iter()
        .zip(dists)
        .enumerate()
        .map(|(index, (c, d))| {
            let inv = c
                .inverse()
                .map_err(|_| ChannelError::ZeroFactor { side: "column", index })?;
            d.scaled(&inv)
        })
        .collect()
}

/// `⌊2^m x⌋ / 2^m`.
pub fn quantize(x: &ExactScalar, m: u32) -> BigRational {
    let scale = BigInt::one() << m;
    let y = x.mul_rational(&BigRational::from_integer(scale.clone()));
    let floor = match y.rational_value() {
        Some(q) => q.floor().to_integer(),
        None => {
            let mut f = num_traits::FromPrimitive::from_f64(y.to_f64().floor()).unwrap_or_else(BigInt::zero);
            let at = |f: &BigInt| (&y - &ExactScalar::from_bigint(f.clone())).signum();
            while at(&f).is_lt() {
                f -= 1;
            }
            while at(&(&f + 1)).is_ge() {
                f += 1;
            }
            f
        }
    };
    BigRational::new(floor, scale)
}

/// [`quantize`] on the exact binary value of a finite float.
pub fn quantize_f64(x: f64, m: u32) -> Option<BigRational> {
    let q = BigRational::from_float(x)?;
    Some(quantize(&ExactScalar::from_rational(q), m))
}

/// Self-similar input `X = Σ_{k≥0} r^k Ψ_k` with iid digits `Ψ_k ~ base`. Only described,
/// never sampled: the DoF bounds depend on the digit entropy alone.
#[derive(Debug, Clone, Serialize)]
pub struct SelfSimilarCode {
    base: DiscreteDistribution,
    #[serde(serialize_with = "crate::serial::rational")]
    ratio: BigRational,
}

impl SelfSimilarCode {
    pub fn new(base: DiscreteDistribution, ratio: BigRational) -> Result<Self, DofError> {
        log2_inverse(&ratio)?;
        Ok(Self { base, ratio })
    }

    pub fn base(&self) -> &DiscreteDistribution {
        &self.base
    }

    pub fn ratio(&self) -> &BigRational {
        &self.ratio
    }

    /// `H(Ψ) / log(1/r)`.
    pub fn normalized_digit_entropy(&self) -> f64 {
        self.base.entropy() / log2_inverse(&self.ratio).expect("checked in new")
    }

    pub fn describe(&self) -> String {
        format!(
            "X = sum_k r^k Psi_k, r = {}, Psi on {} atoms with H(Psi) = {:.6} bits",
            self.ratio,
            self.base.len(),
            self.base.entropy()
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DofRow {
    pub d: u32,
    /// Coefficient range `N^d` of the codebook.
    pub codebook_n: u64,
    pub cardinality: u64,
    /// `log₂(1/r)` with `r = |W|⁻²`.
    pub log_inv_r: f64,
    pub users: Vec<UserBound>,
    /// `1 − log|W_next| / (2 log|W|)`, when the next codebook fits the caps.
    pub summing_bound: Option<f64>,
}

impl DofRow {
    pub fn bounds(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.bound).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UserInjectivity {
    pub user: usize,
    pub verdict: Option<InjectivityVerdict>,
    /// Why no verdict was reached.
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DoFReport {
    pub k: usize,
    pub n: u64,
    pub d_max: u32,
    pub limits: Limits,
    pub rows: Vec<DofRow>,
    pub injectivity: Vec<UserInjectivity>,
    pub ratio_series: Option<RatioSeries>,
    pub truncated: Option<Truncation>,
}

impl DoFReport {
    pub fn last_row(&self) -> Option<&DofRow> {
        self.rows.last()
    }

    /// `d,cardinality,bound_user_1..K,summing_bound,separable_flags` with one flag digit per user.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("d,cardinality");
        for u in 1..=self.k {
            out.push_str(&format!(",bound_user_{u}"));
        }
        out.push_str(",summing_bound,separable_flags\n");
        for row in &self.rows {
            out.push_str(&format!("{},{}", row.d, row.cardinality));
            for u in &row.users {
                out.push_str(&format!(",{:.12}", u.bound));
            }
            let summing = row.summing_bound.map_or(String::new(), |b| format!("{b:.12}"));
            let flags: String = row
                .users
                .iter()
                .map(|u| if u.terms.additive { '1' } else { '0' })
                .collect();
            out.push_str(&format!(",{summing},{flags}\n"));
        }
        if let Some(t) = &self.truncated {
            out.push_str(&format!("# truncated: {} at d={}\n", t.reason, t.d));
        }
        out
    }
}

fn pipeline_row(h: &ChannelMatrix, n: u64, d: u32, limits: &Limits) -> Result<DofRow, DofError> {
    let codebook_n = n_pow(n, d)?;
    let w = build_w(h, codebook_n, d, limits)?;
    let psi = DiscreteDistribution::uniform_on_codebook(&w);
    drop(w);
    let cardinality = psi.len() as u64;
    let log_inv_r = 2.0 * (cardinality as f64).log2();
    let dists = vec![psi; h.k()];
    let users = if cardinality > 1 {
        self_similar_bound_log(h, &dists, log_inv_r, limits)?
    } else {
        Vec::new()
    };
    Ok(DofRow {
        d,
        codebook_n,
        cardinality,
        log_inv_r,
        users,
        summing_bound: None,
    })
}

/// Polynomial search bounds used for the per-user injectivity verdicts of the pipeline.
pub fn pipeline_search_bounds(n: u64, d_max: u32) -> (u32, u64) {
    (d_max, n_pow(n, d_max).map_or(u64::MAX, |x| x - 1))
}

/// Per-user injectivity verdicts: collision scan over `grid` plus the polynomial search.
/// A user whose budget runs out gets a note instead of a verdict.
pub fn user_injectivity(
    h: &ChannelMatrix,
    grid: &[(u64, u32)],
    search: Option<(u32, u64)>,
    limits: &Limits,
) -> Vec<UserInjectivity> {
    (0..h.k())
        .into_par_iter()
        .map(|user| match injectivity_grid(h, user, grid, search, limits) {
            Ok(v) => UserInjectivity {
                user,
                verdict: Some(v),
                note: None,
            },
            Err(e) => UserInjectivity {
                user,
                verdict: None,
                note: Some(e.to_string()),
            },
        })
        .collect()
}

fn check_pipeline_inputs(h: &ChannelMatrix, n: u64) -> Result<(), DofError> {
    if let Err(v) = h.validate() {
        return Err(ChannelError::Invalid(v).into());
    }
    let k = h.k();
    if n < k as u64 {
        return Err(DofError::Invalid(format!("N = {n} must exceed K − 1 = {}", k - 1)));
    }
    Ok(())
}

/// Self-similar inputs with digits uniform on `W_{N^d,d}` and `r = |W|⁻²`, for
/// `d = 1..=d_max`: per-user bounds, the cardinality-ratio bound, and additivity of each
/// receive sum. Budget exhaustion truncates the report at the first failing `d`.
pub fn sufficiency_pipeline(h: &ChannelMatrix, n: u64, d_max: u32, limits: &Limits) -> Result<DoFReport, DofError> {
    check_pipeline_inputs(h, n)?;
    let injectivity = user_injectivity(h, &[(n, 1)], Some(pipeline_search_bounds(n, d_max)), limits);
    sufficiency_report(h, n, d_max, injectivity, limits)
}

/// As [`sufficiency_pipeline`] with injectivity verdicts computed by the caller.
pub fn sufficiency_report(
    h: &ChannelMatrix,
    n: u64,
    d_max: u32,
    injectivity: Vec<UserInjectivity>,
    limits: &Limits,
) -> Result<DoFReport, DofError> {
    check_pipeline_inputs(h, n)?;
    let results: Vec<Result<DofRow, DofError>> = (1..=d_max)
        .into_par_iter()
        .map(|d| pipeline_row(h, n, d, limits))
        .collect();
    let mut rows = Vec::new();
    let mut truncated = None;
    for (d, r) in (1..=d_max).zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) if e.is_resource() => {
                truncated = Some(Truncation {
                    d,
                    reason: e.to_string(),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let series = if n >= 2 {
        Some(ratio_series(h, n, d_max, limits)?)
    } else {
        None
    };
    if let Some(s) = &series {
        for row in &mut rows {
            if let Some(r) = s.rows.iter().find(|r| r.d == row.d) {
                row.summing_bound =
                    Some(1.0 - (r.cardinality_next as f64).log2() / (2.0 * (r.cardinality as f64).log2()));
            }
        }
    }

    Ok(DoFReport {
        k: h.k(),
        n,
        d_max,
        limits: *limits,
        rows,
        injectivity,
        ratio_series: series,
        truncated,
    })
}

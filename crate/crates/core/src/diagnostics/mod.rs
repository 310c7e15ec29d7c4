//! Entropy-balance windows and executable checks of the sumset entropy inequalities used
//! in the converse arguments, with seeded randomized sweeps.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{ChannelError, ChannelMatrix};
use crate::codebook::Limits;
use crate::dofengine::{lincomb_entropy, DiscreteDistribution, DofError};
use crate::exactnum::ExactScalar;

/// Absolute tolerance on entropy comparisons, in bits.
pub const TOLERANCE: f64 = 1e-9;

/// `[(1−2ε)/(1+2ε), (1+2ε)/(1−2ε)]`.
pub fn ratio_window(eps: f64) -> (f64, f64) {
    (
        (1.0 - 2.0 * eps) / (1.0 + 2.0 * eps),
        (1.0 + 2.0 * eps) / (1.0 - 2.0 * eps),
    )
}

/// `[2(1−2ε)/(1+2ε)², 1 + (1+2ε)/(1−2ε)]`.
pub fn receive_window(eps: f64) -> (f64, f64) {
    let a = 1.0 + 2.0 * eps;
    let b = 1.0 - 2.0 * eps;
    (2.0 * b / (a * a), 1.0 + a / b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceKind {
    /// `H(Σ_{j≠i} h_ij V_j) / H(V_i)`.
    InterferenceToSignal,
    /// `H(V_i) / H(V_j)`.
    SignalToSignal,
    /// `H(Σ_j h_ij V_j) / H(V_i)`.
    ReceiveToSignal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceCheck {
    pub kind: BalanceKind,
    pub i: usize,
    /// Second user for [`BalanceKind::SignalToSignal`].
    pub j: Option<usize>,
    pub ratio: f64,
    pub window: (f64, f64),
    pub pass: bool,
    /// Smallest ε in (0, 1/2) whose window contains `ratio`, if any.
    pub minimal_epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub epsilon: f64,
    pub checks: Vec<BalanceCheck>,
    /// Smallest ε passing every check.
    pub minimal_epsilon: Option<f64>,
}

impl BalanceReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn minimal_ratio_epsilon(x: f64) -> Option<f64> {
    let y = x.max(1.0 / x);
    let eps = (y - 1.0) / (2.0 * (y + 1.0));
    (eps < 0.5).then_some(eps)
}

fn minimal_receive_epsilon(x: f64) -> Option<f64> {
    let inside = |e: f64| {
        let (lo, hi) = receive_window(e);
        lo <= x && x <= hi
    };
    if !(x > 0.0 && x.is_finite()) {
        return None;
    }
    if inside(0.0) {
        return Some(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Entropy-balance checks at tolerance `ε` for a fully connected channel and inputs `V_i`.
pub fn balance_report(
    h: &ChannelMatrix,
    dists: &[DiscreteDistribution],
    eps: f64,
    limits: &Limits,
) -> Result<BalanceReport, DofError> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(DofError::Invalid(format!("epsilon = {eps} must lie in (0, 1/2)")));
    }
    if !h.is_fully_connected() {
        return Err(ChannelError::NotFullyConnected.into());
    }
    let k = h.k();
    if dists.len() != k {
        return Err(DofError::Invalid(format!("{} distributions for K = {k}", dists.len())));
    }
    if let Some(i) = dists.iter().position(DiscreteDistribution::is_degenerate) {
        return Err(DofError::Invalid(format!(
            "V_{} is degenerate, ratios undefined",
            i + 1
        )));
    }
    let hv: Vec<f64> = dists.iter().map(DiscreteDistribution::entropy).collect();
    let per_user: Vec<(f64, f64)> = (0..k)
        .into_par_iter()
        .map(|i| {
            let row: Vec<ExactScalar> = (0..k).map(|j| h.get(i, j).clone()).collect();
            let mut int = row.clone();
            int[i] = ExactScalar::zero();
            Ok((
                lincomb_entropy(&int, dists, limits)?,
                lincomb_entropy(&row, dists, limits)?,
            ))
        })
        .collect::<Result<_, DofError>>()?;

    let a = ratio_window(eps);
    let b = receive_window(eps);
    let within = |x: f64, w: (f64, f64)| w.0 <= x && x <= w.1;
    let mut checks = Vec::new();
    for i in 0..k {
        let x = per_user[i].0 / hv[i];
        checks.push(BalanceCheck {
            kind: BalanceKind::InterferenceToSignal,
            i,
            j: None,
            ratio: x,
            window: a,
            pass: within(x, a),
            minimal_epsilon: minimal_ratio_epsilon(x),
        });
    }
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            let x = hv[i] / hv[j];
            checks.push(BalanceCheck {
                kind: BalanceKind::SignalToSignal,
                i,
                j: Some(j),
                ratio: x,
                window: a,
                pass: within(x, a),
                minimal_epsilon: minimal_ratio_epsilon(x),
            });
        }
    }
    for i in 0..k {
        let x = per_user[i].1 / hv[i];
        checks.push(BalanceCheck {
            kind: BalanceKind::ReceiveToSignal,
            i,
            j: None,
            ratio: x,
            window: b,
            pass: within(x, b),
            minimal_epsilon: minimal_receive_epsilon(x),
        });
    }
    let minimal_epsilon = checks
        .iter()
        .map(|c| c.minimal_epsilon)
        .try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e)));
    Ok(BalanceReport {
        epsilon: eps,
        checks,
        minimal_epsilon,
    })
}

/// One evaluated inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Inequality {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs + TOLERANCE,
        }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

fn h_sum(coeffs: &[ExactScalar], dists: &[&DiscreteDistribution], limits: &Limits) -> Result<f64, DofError> {
    let owned: Vec<DiscreteDistribution> = dists.iter().map(|d| (*d).clone()).collect();
    lincomb_entropy(coeffs, &owned, limits)
}

fn int(n: i64) -> ExactScalar {
    ExactScalar::from_integer(n)
}

/// `⌊log₂|n|⌋` for `n ≠ 0`.
fn floor_log2(n: i64) -> i64 {
    63 - n.unsigned_abs().leading_zeros() as i64
}

/// `H(pX+qY) − H(X+Y) ≤ τ_{p,q}·(2H(X+Y) − H(X) − H(Y))`, `τ_{p,q} = 7⌊log|p|⌋ + 7⌊log|q|⌋ + 2`.
pub fn ineq_dilated_sum(
    p: i64,
    q: i64,
    x: &DiscreteDistribution,
    y: &DiscreteDistribution,
    limits: &Limits,
) -> Result<Inequality, DofError> {
    if p == 0 || q == 0 {
        return Err(DofError::Invalid("p and q must be nonzero".into()));
    }
    let tau = (7 * floor_log2(p) + 7 * floor_log2(q) + 2) as f64;
    let hxy = h_sum(&[int(1), int(1)], &[x, y], limits)?;
    let lhs = h_sum(&[int(p), int(q)], &[x, y], limits)? - hxy;
    let rhs = tau * (2.0 * hxy - x.entropy() - y.entropy());
    Ok(Inequality::new(lhs, rhs))
}

/// `H(X + ΣY_i) − H(X) ≤ Σ_i (H(X + Y_i) − H(X))`.
pub fn ineq_submodular_sum(
    x: &DiscreteDistribution,
    ys: &[DiscreteDistribution],
    limits: &Limits,
) -> Result<Inequality, DofError> {
    let hx = x.entropy();
    let all: Vec<&DiscreteDistribution> = std::iter::once(x).chain(ys).collect();
    let ones = vec![int(1); all.len()];
    let lhs = h_sum(&ones, &all, limits)? - hx;
    let mut rhs = 0.0;
    for y in ys {
        rhs += h_sum(&[int(1), int(1)], &[x, y], limits)? - hx;
    }
    Ok(Inequality::new(lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IidDiff {
    /// `(H(X1+X2) − H(X)) / (H(X1−X2) − H(X))`, absent when the denominator vanishes.
    pub ratio: Option<f64>,
    pub holds: bool,
}

impl IidDiff {
    pub fn is_vacuous(&self) -> bool {
        self.ratio.is_none()
    }
}

/// `1/2 ≤ (H(X1+X2) − H(X)) / (H(X1−X2) − H(X)) ≤ 2` for iid `X1, X2`.
pub fn ineq_iid_diff(x: &DiscreteDistribution, limits: &Limits) -> Result<IidDiff, DofError> {
    let hx = x.entropy();
    let num = h_sum(&[int(1), int(1)], &[x, x], limits)? - hx;
    let den = h_sum(&[int(1), int(-1)], &[x, x], limits)? - hx;
    if den.abs() <= TOLERANCE {
        return Ok(IidDiff {
            ratio: None,
            holds: true,
        });
    }
    let ratio = num / den;
    Ok(IidDiff {
        ratio: Some(ratio),
        holds: (0.5 - TOLERANCE..=2.0 + TOLERANCE).contains(&ratio),
    })
}

/// `Δ(X, X') = H(X − X') − H(X)/2 − H(X')/2` for an independent copy `X'`.
pub fn ruzsa_distance(x: &DiscreteDistribution, limits: &Limits) -> Result<f64, DofError> {
    Ok(h_sum(&[int(1), int(-1)], &[x, x], limits)? - x.entropy())
}

/// `H(pX + Z) ≤ H((p−r)X + rX' + Z) + Δ(X, X')`.
pub fn ineq_split_copy(
    x: &DiscreteDistribution,
    z: &DiscreteDistribution,
    p: &ExactScalar,
    r: &ExactScalar,
    limits: &Limits,
) -> Result<Inequality, DofError> {
    let lhs = h_sum(&[p.clone(), int(1)], &[x, z], limits)?;
    let rhs = h_sum(&[p - r, r.clone(), int(1)], &[x, x, z], limits)? + ruzsa_distance(x, limits)?;
    Ok(Inequality::new(lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    DilatedSum,
    SubmodularSum,
    IidDiff,
    SplitCopy,
}

impl Oracle {
    pub const ALL: [Oracle; 4] = [
        Oracle::DilatedSum,
        Oracle::SubmodularSum,
        Oracle::IidDiff,
        Oracle::SplitCopy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Oracle::DilatedSum => "dilated_sum",
            Oracle::SubmodularSum => "submodular_sum",
            Oracle::IidDiff => "iid_diff",
            Oracle::SplitCopy => "split_copy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub case_id: u64,
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub seed: u64,
    pub cases: u64,
    pub records: Vec<SweepRecord>,
}

impl SweepReport {
    pub fn failures(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(|r| !r.holds)
    }

    pub fn all_hold(&self) -> bool {
        self.failures().next().is_none()
    }

    /// `case_id,inequality,lhs,rhs,margin`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("case_id,inequality,lhs,rhs,margin\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{:.12},{:.12},{:.12}\n",
                r.case_id, r.inequality, r.lhs, r.rhs, r.margin
            ));
        }
        out
    }
}

/// Random distribution on at most `max_atoms` integers in `[−6, 6]` with weights in `1..=6`.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, min_atoms: usize, max_atoms: usize) -> DiscreteDistribution {
    let n = rng.gen_range(min_atoms..=max_atoms);
    let mut pool: Vec<i64> = (-6..=6).collect();
    pool.shuffle(rng);
    DiscreteDistribution::from_weights(pool[..n].iter().map(|&v| (int(v), rng.gen_range(1..=6u128))))
        .expect("nonempty positive weights")
}

fn nonzero_in<R: Rng + ?Sized>(rng: &mut R, lo: i64, hi: i64) -> i64 {
    loop {
        let v = rng.gen_range(lo..=hi);
        if v != 0 {
            return v;
        }
    }
}

const MAX_ATOMS: usize = 8;

fn run_case(oracle: Oracle, case_id: u64, rng: &mut ChaCha8Rng, limits: &Limits) -> Result<Vec<SweepRecord>, DofError> {
    let record = |name: &str, ineq: Inequality| SweepRecord {
        case_id,
        inequality: name.to_string(),
        lhs: ineq.lhs,
        rhs: ineq.rhs,
        margin: ineq.margin(),
        holds: ineq.holds,
    };
    Ok(match oracle {
        Oracle::DilatedSum => {
            let (p, q) = (nonzero_in(rng, -4, 4), nonzero_in(rng, -4, 4));
            let x = random_distribution(rng, 1, MAX_ATOMS);
            let y = random_distribution(rng, 1, MAX_ATOMS);
            vec![record("dilated_sum", ineq_dilated_sum(p, q, &x, &y, limits)?)]
        }
        Oracle::SubmodularSum => {
            let x = random_distribution(rng, 1, MAX_ATOMS);
            let m = rng.gen_range(1..=3);
            let ys: Vec<_> = (0..m).map(|_| random_distribution(rng, 1, MAX_ATOMS)).collect();
            vec![record("submodular_sum", ineq_submodular_sum(&x, &ys, limits)?)]
        }
        Oracle::IidDiff => {
            let x = random_distribution(rng, 2, MAX_ATOMS);
            let r = ineq_iid_diff(&x, limits)?;
            match r.ratio {
                Some(ratio) => vec![
                    SweepRecord {
                        case_id,
                        inequality: "iid_diff_lower".into(),
                        lhs: 0.5,
                        rhs: ratio,
                        margin: ratio - 0.5,
                        holds: r.holds,
                    },
                    SweepRecord {
                        case_id,
                        inequality: "iid_diff_upper".into(),
                        lhs: ratio,
                        rhs: 2.0,
                        margin: 2.0 - ratio,
                        holds: r.holds,
                    },
                ],
                None => vec![SweepRecord {
                    case_id,
                    inequality: "iid_diff_vacuous".into(),
                    lhs: 0.0,
                    rhs: 0.0,
                    margin: 0.0,
                    holds: true,
                }],
            }
        }
        Oracle::SplitCopy => {
            const SCALARS: [&str; 5] = ["1", "-1", "2", "-2", "sqrt(2)"];
            let pick = |rng: &mut ChaCha8Rng| -> ExactScalar { SCALARS.choose(rng).unwrap().parse().unwrap() };
            let (p, r) = (pick(rng), pick(rng));
            let x = random_distribution(rng, 1, MAX_ATOMS);
            let z = random_distribution(rng, 1, MAX_ATOMS);
            vec![record("split_copy", ineq_split_copy(&x, &z, &p, &r, limits)?)]
        }
    })
}

/// Runs `cases` seeded random instances of each oracle. Case `c` of oracle `o` draws from
/// its own ChaCha stream, so results do not depend on scheduling.
pub fn run_sweeps(seed: u64, cases: u64, limits: &Limits) -> Result<SweepReport, DofError> {
    let jobs: Vec<(usize, Oracle, u64)> = Oracle::ALL
        .iter()
        .enumerate()
        .flat_map(|(o, oracle)| (0..cases).map(move |c| (o, *oracle, c)))
        .collect();
    let chunks: Vec<Vec<SweepRecord>> = jobs
        .par_iter()
        .map(|&(o, oracle, c)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((o as u64) << 40) | c);
            run_case(oracle, c, &mut rng, limits)
        })
        .collect::<Result<_, _>>()?;
    Ok(SweepReport {
        seed,
        cases,
        records: chunks.into_iter().flatten().collect(),
    })
}

//! Decision procedure for 3-user channels with at least one missing link: relabel into
//! one of eight zero patterns, scale to a normal form whose nonzero off-diagonal entries
//! are all 1, then either find a scaling with an all-irrational diagonal or report a
//! triple of rational links that rules out 3/2 total DoF.

use serde::Serialize;

use super::{rational_link_triple_for_user, search_polynomial_witness, SeparabilityError};
use crate::channel::{scale, ChannelMatrix, ScalingPair};
use crate::codebook::Limits;
use crate::exactnum::ExactScalar;

/// Zero patterns of a 3-user channel up to relabeling, with `(row, col)` 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// `h12 = h21 = 0`, other links arbitrary.
    ReciprocalPair,
    /// Zeros at `h13, h21, h32`.
    Cycle,
    /// Only `h12 = 0`.
    SingleLink,
    /// Zeros at `h12, h13`: receiver 1 sees no interference.
    RowPair,
    /// Zeros at `h12, h23`.
    Chain,
    /// Zeros at `h12, h31`.
    ChainWrapped,
    /// Zeros at `h21, h31`: transmitter 1 interferes with nobody.
    ColumnPair,
    /// Zeros at `h12, h13, h23`.
    Transitive,
}

const SCAN_ORDER: [Topology; 8] = [
    Topology::ReciprocalPair,
    Topology::Cycle,
    Topology::SingleLink,
    Topology::RowPair,
    Topology::Chain,
    Topology::ChainWrapped,
    Topology::ColumnPair,
    Topology::Transitive,
];

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

impl Topology {
    fn matches(self, zeros: &[(usize, usize)]) -> bool {
        let exactly = |set: &[(usize, usize)]| zeros.len() == set.len() && set.iter().all(|z| zeros.contains(z));
        match self {
            Topology::ReciprocalPair => zeros.contains(&(0, 1)) && zeros.contains(&(1, 0)),
            Topology::Cycle => exactly(&[(0, 2), (1, 0), (2, 1)]),
            Topology::SingleLink => exactly(&[(0, 1)]),
            Topology::RowPair => exactly(&[(0, 1), (0, 2)]),
            Topology::Chain => exactly(&[(0, 1), (1, 2)]),
            Topology::ChainWrapped => exactly(&[(0, 1), (2, 0)]),
            Topology::ColumnPair => exactly(&[(1, 0), (2, 0)]),
            Topology::Transitive => exactly(&[(0, 1), (0, 2), (1, 2)]),
        }
    }

    /// Diagonal entries fixed to `√2` in the normal form.
    fn pinned_diagonal(self) -> &'static [usize] {
        match self {
            Topology::SingleLink => &[],
            Topology::Cycle => &[0, 1],
            Topology::ChainWrapped => &[2],
            Topology::Transitive => &[0, 2],
            _ => &[0],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ThreeUserOutcome {
    /// `scale(H, scaling) = scaled` has an all-irrational diagonal and off-diagonals in
    /// `{0, 1}`, so every user meets the injectivity condition.
    Satisfiable {
        topology: Topology,
        relabeling: Vec<usize>,
        scaling: ScalingPair,
        scaled: ChannelMatrix,
        /// `(deg_bound, coeff_bound)` of the polynomial search run on every user of `scaled`.
        witness_search: (u32, u64),
    },
    /// The triple `(i, j, k)` of the normal form has `h_ij, h_ii, h_kj, h_ki` nonzero rational.
    Obstructed {
        topology: Topology,
        relabeling: Vec<usize>,
        triple: (usize, usize, usize),
        normal_form: ChannelMatrix,
    },
}

impl ThreeUserOutcome {
    pub fn topology(&self) -> Topology {
        match self {
            ThreeUserOutcome::Satisfiable { topology, .. } | ThreeUserOutcome::Obstructed { topology, .. } => *topology,
        }
    }
}

const WITNESS_SEARCH: (u32, u64) = (3, 4);

/// Solves `r_i·h_ij·c_j = t_ij` over a forest of pinned entries; free factors are 1.
fn solve_pins(h: &ChannelMatrix, pins: &[((usize, usize), ExactScalar)]) -> Result<ScalingPair, SeparabilityError> {
    // nodes 0..3 are rows, 3..6 columns
    let mut parent: Vec<usize> = (0..6).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    for ((i, j), _) in pins {
        let (a, b) = (find(&mut parent, *i), find(&mut parent, 3 + j));
        if a == b {
            return Err(SeparabilityError::Precondition("pinned entries form a cycle".into()));
        }
        parent[a] = b;
    }
    let mut value: Vec<Option<ExactScalar>> = vec![None; 6];
    loop {
        let mut progress = false;
        for ((i, j), t) in pins {
            let hij = h.get(*i, *j);
            match (&value[*i], &value[3 + j]) {
                (Some(r), None) => {
                    value[3 + j] = Some(t.checked_div(&(r * hij)).expect("nonzero"));
                    progress = true;
                }
                (None, Some(c)) => {
                    value[*i] = Some(t.checked_div(&(c * hij)).expect("nonzero"));
                    progress = true;
                }
                _ => {}
            }
        }
        if !progress {
            match value.iter().position(Option::is_none) {
                Some(free) => value[free] = Some(ExactScalar::one()),
                None => break,
            }
        }
    }
    let value: Vec<ExactScalar> = value.into_iter().map(Option::unwrap).collect();
    Ok(ScalingPair::new(value[..3].to_vec(), value[3..].to_vec())?)
}

fn factors(rows: [ExactScalar; 3], cols: [ExactScalar; 3]) -> ScalingPair {
    ScalingPair::new(rows.to_vec(), cols.to_vec()).expect("nonzero factors")
}

fn all_irrational(h: &ChannelMatrix) -> bool {
    (0..3).all(|i| !h.diag(i).is_rational())
}

enum Decision {
    Scale(ScalingPair),
    Obstruct(usize),
}

/// Case analysis on a normal form with diagonal `(g1, g2, g3)`.
fn decide(t: Topology, nf: &ChannelMatrix) -> Decision {
    let one = ExactScalar::one;
    let rational = |i: usize| nf.diag(i).is_rational();
    let g = |i: usize| nf.diag(i).clone();
    let s3 = ExactScalar::sqrt(3);
    let over = |a: &ExactScalar, b: &ExactScalar| a.checked_div(b).expect("nonzero");
    let identity = || Decision::Scale(ScalingPair::identity(3));
    match t {
        Topology::ReciprocalPair => {
            if !rational(1) && !rational(2) {
                return identity();
            }
            // rows 1,2 by √3/g2 and column 3 by g2/√3
            let bar = factors(
                [over(&s3, &g(1)), over(&s3, &g(1)), one()],
                [one(), one(), over(&g(1), &s3)],
            );
            // then row 3 by √15/(g2·g3) and columns 1,2 by its inverse
            let sc = ExactScalar::sqrt(15);
            let f = over(&sc, &(&g(1) * &g(2)));
            let finv = over(&one(), &f);
            let prime = bar.compose(&factors([one(), one(), f], [finv.clone(), finv, one()]));
            let order = if rational(1) { [bar, prime] } else { [prime, bar] };
            for s in order {
                if all_irrational(&scale(nf, &s).expect("valid")) {
                    return Decision::Scale(s);
                }
            }
            unreachable!("one of the two rescalings has an irrational diagonal")
        }
        Topology::Cycle => {
            if rational(2) {
                Decision::Scale(factors(
                    [one(), one(), over(&s3, &g(2))],
                    [over(&g(2), &s3), one(), one()],
                ))
            } else {
                identity()
            }
        }
        Topology::SingleLink => match (0..3).find(|&i| rational(i)) {
            Some(i) => Decision::Obstruct(i),
            None => identity(),
        },
        Topology::RowPair | Topology::ColumnPair => match (1..3).find(|&i| rational(i)) {
            Some(i) => Decision::Obstruct(i),
            None => identity(),
        },
        Topology::Chain => {
            if rational(1) {
                Decision::Obstruct(1)
            } else if rational(2) {
                Decision::Scale(factors(
                    [over(&g(2), &s3), one(), one()],
                    [one(), one(), over(&s3, &g(2))],
                ))
            } else {
                identity()
            }
        }
        Topology::ChainWrapped => {
            let s = if rational(1) {
                factors([one(), one(), over(&g(1), &s3)], [one(), over(&s3, &g(1)), one()])
            } else {
                ScalingPair::identity(3)
            };
            if rational(0) {
                Decision::Obstruct(0)
            } else {
                Decision::Scale(s)
            }
        }
        Topology::Transitive => {
            if rational(1) {
                Decision::Obstruct(1)
            } else {
                identity()
            }
        }
    }
}

/// Classifies a 3-user channel with at least one zero off-diagonal entry.
///
/// Relabelings are tried identity-first in lexicographic order and, for each, the zero
/// patterns in a fixed order; the first match is used. Everything reported is in the
/// original user labels except `normal_form`, which is in the matched labeling
/// (`relabeling[i]` is the original index of relabeled user `i`).
pub fn classify_3user(h: &ChannelMatrix, limits: &Limits) -> Result<ThreeUserOutcome, SeparabilityError> {
    if h.k() != 3 {
        return Err(SeparabilityError::Precondition(
            "the 3-user procedure needs K = 3".into(),
        ));
    }
    if let Err(v) = h.validate() {
        return Err(crate::channel::ChannelError::Invalid(v).into());
    }
    if h.is_fully_connected() {
        return Err(SeparabilityError::Precondition(
            "the 3-user procedure needs at least one zero off-diagonal entry".into(),
        ));
    }
    let (perm, topology) = PERMUTATIONS
        .iter()
        .find_map(|p| {
            let hp = h.permute(p);
            SCAN_ORDER.iter().find(|t| t.matches(hp.zero_set())).map(|t| (*p, *t))
        })
        .expect("every zero pattern of a 3-user channel matches some relabeling");

    let hp = h.permute(&perm);
    let sqrt2 = ExactScalar::sqrt(2);
    let mut pins: Vec<((usize, usize), ExactScalar)> = topology
        .pinned_diagonal()
        .iter()
        .map(|&i| ((i, i), sqrt2.clone()))
        .collect();
    pins.extend(
        hp.offdiag_positions()
            .into_iter()
            .filter(|&(i, j)| !hp.get(i, j).is_zero())
            .map(|p| (p, ExactScalar::one())),
    );
    let to_normal = solve_pins(&hp, &pins)?;
    let nf = scale(&hp, &to_normal)?;
    debug_assert!(pins.iter().all(|((i, j), t)| nf.get(*i, *j) == t));

    let inverse: Vec<usize> = (0..3).map(|x| perm.iter().position(|&p| p == x).unwrap()).collect();
    match decide(topology, &nf) {
        Decision::Obstruct(user) => {
            let (i, j, k) =
                rational_link_triple_for_user(&nf, user).expect("rational diagonal in a normal form yields a triple");
            Ok(ThreeUserOutcome::Obstructed {
                topology,
                relabeling: perm.to_vec(),
                triple: (perm[i], perm[j], perm[k]),
                normal_form: nf,
            })
        }
        Decision::Scale(extra) => {
            let sp = to_normal.compose(&extra);
            let scaled_p = scale(&hp, &sp)?;
            assert!(all_irrational(&scaled_p), "rescaled diagonal must be irrational");
            let scaling = sp.unpermute(&perm);
            let scaled = scaled_p.permute(&inverse);
            debug_assert_eq!(scale(h, &scaling)?, scaled);
            for i in 0..3 {
                let found = search_polynomial_witness(&scaled, i, WITNESS_SEARCH.0, WITNESS_SEARCH.1, limits)?;
                assert!(
                    found.is_none(),
                    "irrational gain over integer codebook admits no witness"
                );
            }
            Ok(ThreeUserOutcome::Satisfiable {
                topology,
                relabeling: perm.to_vec(),
                scaling,
                scaled,
                witness_search: WITNESS_SEARCH,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[&str]]) -> ChannelMatrix {
        ChannelMatrix::from_strs(rows)
    }

    fn classify(h: &ChannelMatrix) -> ThreeUserOutcome {
        classify_3user(h, &Limits::default()).unwrap()
    }

    fn triple(o: &ThreeUserOutcome) -> Option<(usize, usize, usize)> {
        match o {
            ThreeUserOutcome::Obstructed { triple, .. } => Some(*triple),
            _ => None,
        }
    }

    fn check_satisfiable(h: &ChannelMatrix, o: &ThreeUserOutcome) {
        let ThreeUserOutcome::Satisfiable { scaling, scaled, .. } = o else {
            panic!("expected satisfiable, got {o:?}");
        };
        assert_eq!(&scale(h, scaling).unwrap(), scaled);
        assert!(all_irrational(scaled));
        for (i, j) in scaled.offdiag_positions() {
            let v = scaled.get(i, j);
            assert!(v.is_zero() || *v == ExactScalar::one());
        }
    }

    #[test]
    fn single_link_with_rational_first_gain() {
        let h = m(&[&["1/2", "0", "1"], &["1", "sqrt(3)", "1"], &["1", "1", "sqrt(5)"]]);
        let o = classify(&h);
        assert_eq!(o.topology(), Topology::SingleLink);
        assert_eq!(triple(&o), Some((0, 2, 1)));
    }

    #[test]
    fn row_pair_with_rational_middle_gain() {
        let h = m(&[&["sqrt(2)", "0", "0"], &["1", "2", "1"], &["1", "1", "sqrt(3)"]]);
        let o = classify(&h);
        assert_eq!(o.topology(), Topology::RowPair);
        assert_eq!(triple(&o), Some((1, 0, 2)));
    }

    #[test]
    fn reciprocal_pair_always_satisfiable() {
        for diag in [
            ["1", "2", "3"],
            ["2", "sqrt(3)", "1"],
            ["1", "3", "sqrt(3)"],
            ["1", "sqrt(5)", "2"],
        ] {
            let h = m(&[&[diag[0], "0", "1"], &["0", diag[1], "2"], &["3", "1", diag[2]]]);
            let o = classify(&h);
            assert_eq!(o.topology(), Topology::ReciprocalPair);
            check_satisfiable(&h, &o);
        }
    }

    #[test]
    fn cycle_with_rational_gains() {
        let h = m(&[&["1", "2", "0"], &["0", "3", "1/2"], &["5", "0", "7"]]);
        let o = classify(&h);
        assert_eq!(o.topology(), Topology::Cycle);
        check_satisfiable(&h, &o);
    }

    #[test]
    fn relabeled_pattern_maps_back() {
        // zeros at (2,1),(3,1): column pair in the identity labeling
        let h = m(&[&["sqrt(2)", "1", "1"], &["0", "3", "1"], &["0", "1", "sqrt(5)"]]);
        let o = classify(&h);
        assert_eq!(o.topology(), Topology::ColumnPair);
        assert_eq!(triple(&o), Some((1, 2, 0)));
        // single zero at (3,2): needs relabeling
        let h = m(&[&["sqrt(2)", "1", "1"], &["1", "sqrt(3)", "1"], &["1", "0", "sqrt(5)"]]);
        let o = classify(&h);
        assert_eq!(o.topology(), Topology::SingleLink);
        check_satisfiable(&h, &o);
    }

    #[test]
    fn chain_cases() {
        let h = m(&[&["1", "0", "2"], &["1", "sqrt(2)", "0"], &["1", "1", "4"]]);
        let o = classify(&h);
        assert_eq!(o.topology(), Topology::Chain);
        check_satisfiable(&h, &o);
        let h = m(&[&["1", "0", "2"], &["1", "3", "0"], &["1", "1", "4"]]);
        assert_eq!(triple(&classify(&h)), Some((1, 0, 2)));
    }

    #[test]
    fn preconditions() {
        let full = ChannelMatrix::with_diagonal(&vec![ExactScalar::one(); 3], &ExactScalar::one());
        assert!(classify_3user(&full, &Limits::default()).is_err());
    }
}

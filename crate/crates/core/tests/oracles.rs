//! Brute-force references for the exact engines.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use alignkit_core::channel::random::sqrt2_matrix;
use alignkit_core::channel::ChannelMatrix;
use alignkit_core::codebook::{build_w, count_w, enumerate_monomials, phi, Limits};
use alignkit_core::diagnostics::random_distribution;
use alignkit_core::dofengine::{lincomb_entropy, DiscreteDistribution};
use alignkit_core::exactnum::ExactScalar;
use alignkit_core::separability::test_injectivity;

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Every sum `Σ c_m · m(ĥ)` with `c_m < n`, by walking all coefficient vectors.
fn brute_codebook(h: &ChannelMatrix, n: u64, d: u32) -> BTreeSet<ExactScalar> {
    let hhat = h.offdiag_vector();
    let values: Vec<ExactScalar> = enumerate_monomials(h.k(), d)
        .iter()
        .map(|m| m.evaluate(&hhat))
        .collect();
    let mut out = BTreeSet::new();
    let mut coeffs = vec![0u64; values.len()];
    loop {
        let mut acc = ExactScalar::zero();
        for (c, v) in coeffs.iter().zip(&values) {
            if *c > 0 {
                acc = &acc + &v.mul_integer(*c as i64);
            }
        }
        out.insert(acc);
        let Some(pos) = coeffs.iter().position(|c| *c + 1 < n) else {
            break;
        };
        coeffs[pos] += 1;
        coeffs[..pos].iter_mut().for_each(|c| *c = 0);
    }
    out
}

fn brute_entropy(atoms: &BTreeMap<ExactScalar, BigRational>) -> f64 {
    atoms
        .values()
        .map(|p| {
            let p = p.to_f64().unwrap();
            -p * p.log2()
        })
        .sum()
}

#[test]
fn monomial_counts_match_binomials() {
    for k in 2..=4usize {
        for d in 0..=4u32 {
            let vars = (k * (k - 1)) as u64;
            let expect = binomial(vars + d as u64, d as u64);
            assert_eq!(enumerate_monomials(k, d).len() as u64, expect);
            assert_eq!(phi(k, d).to_u64().unwrap(), expect);
        }
    }
}

#[test]
fn monomials_are_graded_descending_lex() {
    let ms = enumerate_monomials(3, 3);
    for pair in ms.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert!(a.degree() < b.degree() || (a.degree() == b.degree() && a.exponents() > b.exponents()));
    }
    assert_eq!(ms[1].display(3), "h12");
    assert_eq!(ms[6].display(3), "h32");
}

#[test]
fn codebooks_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let limits = Limits::default();
    let ones = ChannelMatrix::with_diagonal(&vec![ExactScalar::one(); 3], &ExactScalar::one());
    let mut matrices = vec![ones];
    matrices.extend((0..6).map(|_| sqrt2_matrix(&mut rng)));
    for h in &matrices {
        for (n, d) in [(2, 0), (3, 0), (2, 1), (3, 1), (4, 1)] {
            let expect = brute_codebook(h, n, d);
            let w = build_w(h, n, d, &limits).unwrap();
            let got: BTreeSet<ExactScalar> = w.values().into_iter().collect();
            assert_eq!(got, expect, "N={n} d={d} for {h:?}");
            assert_eq!(count_w(h, n, d, &limits).unwrap(), expect.len() as u64);
        }
    }
}

#[test]
fn all_ones_codebook_is_an_interval() {
    let ones = ChannelMatrix::with_diagonal(&vec![ExactScalar::one(); 3], &ExactScalar::one());
    for n in 2..=4u64 {
        for d in 0..=3u32 {
            let w = build_w(&ones, n, d, &Limits::default()).unwrap();
            let top = phi(3, d).to_u64().unwrap() * (n - 1);
            assert_eq!(w.len(), top + 1);
            assert!(w.contains(&ExactScalar::from_integer(top as i64)));
        }
    }
}

#[test]
fn collision_scan_matches_quadruple_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let limits = Limits::default();
    for _ in 0..12 {
        let h = sqrt2_matrix(&mut rng);
        for (n, d) in [(2, 0), (3, 0), (2, 1)] {
            let w = build_w(&h, n, d, &limits).unwrap();
            let vals = w.values();
            for i in 0..3 {
                let g = h.diag(i);
                let mut seen = BTreeSet::new();
                let mut collides = false;
                'outer: for a in &vals {
                    for b in &vals {
                        if !seen.insert(a + &(g * b)) {
                            collides = true;
                            break 'outer;
                        }
                    }
                }
                let v = test_injectivity(&w, g, &limits).unwrap();
                assert_eq!(v.collision.is_some(), collides, "user {i} N={n} d={d} for {h:?}");
            }
        }
    }
}

#[test]
fn lincomb_entropy_matches_dictionary_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let limits = Limits::default();
    let coeffs: Vec<ExactScalar> = ["1", "sqrt(2)", "3/2", "1+sqrt(2)"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    for _ in 0..40 {
        let dists: Vec<DiscreteDistribution> = (0..3).map(|_| random_distribution(&mut rng, 1, 5)).collect();
        let pick: Vec<ExactScalar> = (0..3)
            .map(|j| coeffs[(j + dists[j].len()) % coeffs.len()].clone())
            .collect();
        let mut acc: BTreeMap<ExactScalar, BigRational> = BTreeMap::new();
        acc.insert(ExactScalar::zero(), BigRational::from_integer(BigInt::from(1)));
        for (c, d) in pick.iter().zip(&dists) {
            let mut next = BTreeMap::new();
            for (x, p) in &acc {
                for (y, q) in d.atoms() {
                    *next
                        .entry(x + &(c * &y))
                        .or_insert_with(|| BigRational::from_integer(BigInt::from(0))) += p * &q;
                }
            }
            acc = next;
        }
        let got = lincomb_entropy(&pick, &dists, &limits).unwrap();
        assert!(
            (got - brute_entropy(&acc)).abs() < 1e-9,
            "{got} vs {}",
            brute_entropy(&acc)
        );
    }
}

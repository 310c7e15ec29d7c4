//! Seeded sampling of small rational and radical channels, for tests and sweeps.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{ChannelMatrix, ScalingPair};
use crate::exactnum::ExactScalar;

/// `±p/q` with `p, q ∈ 1..=max`.
pub fn signed_ratio<R: Rng + ?Sized>(rng: &mut R, max: i64) -> ExactScalar {
    let v = ExactScalar::from_ratio(rng.gen_range(1..=max), rng.gen_range(1..=max));
    if rng.gen_bool(0.5) {
        -v
    } else {
        v
    }
}

/// `p/q` with `p, q ∈ 1..=max`.
pub fn positive_ratio<R: Rng + ?Sized>(rng: &mut R, max: i64) -> ExactScalar {
    ExactScalar::from_ratio(rng.gen_range(1..=max), rng.gen_range(1..=max))
}

/// K×K matrix whose off-diagonals vanish with probability `zero_prob`.
pub fn sample_matrix<R, F, G>(rng: &mut R, k: usize, zero_prob: f64, mut diag: G, mut off: F) -> ChannelMatrix
where
    R: Rng + ?Sized,
    G: FnMut(&mut R) -> ExactScalar,
    F: FnMut(&mut R) -> ExactScalar,
{
    let rows = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        diag(rng)
                    } else if rng.gen_bool(zero_prob) {
                        ExactScalar::zero()
                    } else {
                        off(rng)
                    }
                })
                .collect()
        })
        .collect();
    ChannelMatrix::new(rows).expect("square by construction")
}

/// Rational matrix: off-diagonals `0` with probability 0.3, else `±p/q`; diagonal `p/q`; `p, q ≤ 3`.
pub fn rational_matrix<R: Rng + ?Sized>(rng: &mut R, k: usize) -> ChannelMatrix {
    sample_matrix(rng, k, 0.3, |r| positive_ratio(r, 3), |r| signed_ratio(r, 3))
}

/// 3×3 matrix over ℚ(√2) with off-diagonals in `{0, 1, √2}` and a diagonal drawn from a
/// small pool of rational and irrational elements.
pub fn sqrt2_matrix<R: Rng + ?Sized>(rng: &mut R) -> ChannelMatrix {
    const DIAG: [&str; 10] = [
        "1",
        "2",
        "1/2",
        "3/2",
        "sqrt(2)",
        "2*sqrt(2)",
        "1+sqrt(2)",
        "sqrt(2)/2",
        "3-sqrt(2)",
        "1/2+sqrt(2)",
    ];
    const OFF: [&str; 5] = ["0", "0", "0", "1", "sqrt(2)"];
    sample_matrix(
        rng,
        3,
        0.0,
        |r| DIAG.choose(r).unwrap().parse().unwrap(),
        |r| OFF.choose(r).unwrap().parse().unwrap(),
    )
}

/// Random nonzero factors of the form `(p/q)·u` with `u ∈ {1, √2, √3, 1+√2}`.
pub fn scaling_pair<R: Rng + ?Sized>(rng: &mut R, k: usize) -> ScalingPair {
    const UNITS: [&str; 4] = ["1", "sqrt(2)", "sqrt(3)", "1+sqrt(2)"];
    let factor = |r: &mut R| {
        let u: ExactScalar = UNITS.choose(r).unwrap().parse().unwrap();
        &signed_ratio(r, 5) * &u
    };
    let rows = (0..k).map(|_| factor(rng)).collect();
    let cols = (0..k).map(|_| factor(rng)).collect();
    ScalingPair::new(rows, cols).expect("nonzero by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            assert!(rational_matrix(&mut rng, 4).is_rational());
            assert!(sqrt2_matrix(&mut rng).validate().is_ok());
            assert_eq!(scaling_pair(&mut rng, 3).k(), 3);
        }
    }
}

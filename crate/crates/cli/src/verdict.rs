use std::fmt;

use alignkit_core::channel::DofAccounting;

/// The single conclusion of `analyze`. The wording is fixed; scripts may parse it.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// 1-based triple with a rational nonzero cross ratio.
    RationalRatio {
        triple: (usize, usize, usize),
        ratio: String,
    },
    /// Replayed collision for a 1-based user, written as `h·Q(ĥ) = P(ĥ)`.
    Collision {
        user: usize,
        witness: String,
    },
    /// No witness within bounds; per-user bound at the last completed depth.
    Evidence {
        d: u32,
        bounds: Vec<f64>,
    },
    Inconclusive,
}

impl Verdict {
    /// Exit status: caps exhaustion is the only non-zero outcome of a completed analysis.
    pub fn exit_code(&self) -> u8 {
        match self {
            Verdict::Inconclusive => crate::EXIT_TRUNCATED,
            _ => 0,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::RationalRatio {
                triple: (i, j, k),
                ratio,
            } => {
                write!(
                    f,
                    "obstruction: rational cross-ratio triple ({i},{j},{k}), ratio {ratio}"
                )
            }
            Verdict::Collision { user, witness } => write!(f, "obstruction: collision for user {user}: {witness}"),
            Verdict::Evidence { d, bounds } => {
                let b: Vec<String> = bounds.iter().map(|x| format!("{x:.6}")).collect();
                write!(
                    f,
                    "evidence for injectivity up to bounds; per-user bound b({d}) = {}",
                    b.join(", ")
                )
            }
            Verdict::Inconclusive => f.write_str("inconclusive (caps)"),
        }
    }
}

pub fn accounting_line(a: &DofAccounting) -> String {
    format!(
        "accounting: L={} totally disconnected; total DoF {}",
        a.l, a.total_dof_if_half_each
    )
}

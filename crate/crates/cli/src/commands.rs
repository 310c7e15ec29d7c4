use std::fs;
use std::path::{Path, PathBuf};

use num_bigint::Sign;
use serde::Serialize;

use alignkit_core::channel::{cross_ratio, dof_accounting, ChannelMatrix, DofAccounting};
use alignkit_core::codebook::{build_w, ratio_series, IntPolynomial, Limits};
use alignkit_core::diagnostics::{balance_report, run_sweeps, BalanceReport};
use alignkit_core::dofengine::{
    dist_lincomb, sufficiency_report, user_injectivity, DiscreteDistribution, DoFReport, UserInjectivity,
};
use alignkit_core::separability::{
    classify_3user, monomials_for, rational_ratio_obstruction, InjectivityStatus, PolynomialWitness, RatioObstruction,
    SeparabilityError, ThreeUserOutcome,
};

use crate::config::AnalysisConfig;
use crate::verdict::{accounting_line, Verdict};
use crate::{CliError, EXIT_INEQUALITY};

/// Where and how a command writes its artifacts.
pub struct Sink {
    dir: PathBuf,
}

impl Sink {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        body.push('\n');
        self.write(name, &body)
    }
}

#[derive(Serialize)]
struct BalanceEntry {
    epsilon: f64,
    report: Option<BalanceReport>,
    note: Option<String>,
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    config: &'a AnalysisConfig,
    accounting: DofAccounting,
    ratio_obstruction: Option<RatioObstruction>,
    classify3: Option<ThreeUserOutcome>,
    injectivity: Vec<UserInjectivity>,
    dof: Option<DoFReport>,
    balance: Vec<BalanceEntry>,
    verdict: String,
}

fn resource_or(e: SeparabilityError) -> CliError {
    if e.is_resource() {
        CliError::Truncated(e.to_string())
    } else {
        CliError::Config(e.to_string())
    }
}

fn one_based((i, j, k): (usize, usize, usize)) -> (usize, usize, usize) {
    (i + 1, j + 1, k + 1)
}

fn ratio_verdict(h: &ChannelMatrix, (i, j, k): (usize, usize, usize)) -> Verdict {
    let ratio = cross_ratio(h, i, j, k).expect("reported triple has nonzero links");
    assert!(ratio.is_rational() && !ratio.is_zero(), "reported triple must replay");
    Verdict::RationalRatio {
        triple: one_based((i, j, k)),
        ratio: ratio.to_string(),
    }
}

/// First violated connected user, with its replayed witness.
fn collision_verdict(h: &ChannelMatrix, injectivity: &[UserInjectivity], skip: &[usize]) -> Option<Verdict> {
    injectivity.iter().filter(|u| !skip.contains(&u.user)).find_map(|u| {
        let v = u.verdict.as_ref()?;
        if v.status != InjectivityStatus::Violated {
            return None;
        }
        let hhat = h.offdiag_vector();
        let hii = h.diag(u.user);
        let witness = match (&v.collision, &v.polynomial_witness) {
            (Some(c), _) => {
                assert!(c.verify(), "collision must replay");
                let d = v.bounds.last().map_or(0, |b| b.1);
                c.to_polynomials(&monomials_for(h.k(), d))
            }
            (None, Some(p)) => p.clone(),
            (None, None) => unreachable!("violated verdicts carry a witness"),
        };
        let witness = with_positive_lead(witness);
        assert!(witness.verify(hii, &hhat), "polynomial witness must replay");
        let name = format!("h{0}{0}", u.user + 1);
        Some(Verdict::Collision {
            user: u.user + 1,
            witness: format!("{name}·Q(ĥ) = P(ĥ) with {}", witness.display(h.k())),
        })
    })
}

/// `(−P, −Q)` when the first coefficient of `Q` is negative.
fn with_positive_lead(w: PolynomialWitness) -> PolynomialWitness {
    let negative = w.q.terms().next().is_some_and(|(_, c)| c.sign() == Sign::Minus);
    if !negative {
        return w;
    }
    let neg = |p: &IntPolynomial| {
        let mut out = IntPolynomial::zero();
        for (m, c) in p.terms() {
            out.add_term(m.clone(), -c);
        }
        out
    };
    PolynomialWitness {
        p: neg(&w.p),
        q: neg(&w.q),
    }
}

fn balance_entries(h: &ChannelMatrix, cfg: &AnalysisConfig, limits: &Limits) -> Vec<BalanceEntry> {
    if cfg.epsilons.is_empty() {
        return Vec::new();
    }
    let inputs = build_w(h, cfg.n, 1, limits).map(|w| vec![DiscreteDistribution::uniform_on_codebook(&w); h.k()]);
    cfg.epsilons
        .iter()
        .map(|&epsilon| {
            let r = match &inputs {
                Ok(d) => balance_report(h, d, epsilon, limits).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            match r {
                Ok(report) => BalanceEntry {
                    epsilon,
                    report: Some(report),
                    note: None,
                },
                Err(note) => BalanceEntry {
                    epsilon,
                    report: None,
                    note: Some(note),
                },
            }
        })
        .collect()
}

/// Full analysis: accounting, cross ratios, 3-user procedure, injectivity grid, DoF pipeline.
pub fn analyze(cfg: &AnalysisConfig, sink: &Sink) -> Result<u8, CliError> {
    let h = cfg.matrix()?;
    let k = h.k();
    if cfg.n < k as u64 {
        return Err(CliError::Config(format!(
            "n: N = {} must exceed K − 1 = {}",
            cfg.n,
            k - 1
        )));
    }
    let limits = cfg.limits();
    let accounting = dof_accounting(&h);
    let ratio_obstruction = rational_ratio_obstruction(&h);

    let mut classify3 = None;
    let mut injectivity = Vec::new();
    let mut dof = None;
    let verdict = if let Some(o) = &ratio_obstruction {
        ratio_verdict(&h, (o.i, o.j, o.k))
    } else {
        if k == 3 && !h.is_fully_connected() {
            classify3 = Some(classify_3user(&h, &limits).map_err(resource_or)?);
        }
        match &classify3 {
            Some(ThreeUserOutcome::Obstructed { triple, .. }) => ratio_verdict(&h, *triple),
            _ => {
                injectivity = user_injectivity(&h, &cfg.grid(), Some(cfg.search_bounds()), &limits);
                for u in &mut injectivity {
                    if accounting.disconnected_users.contains(&u.user) {
                        u.note = Some("totally disconnected: needs no separability".into());
                    }
                }
                let connected_gap = injectivity
                    .iter()
                    .any(|u| u.verdict.is_none() && !accounting.disconnected_users.contains(&u.user));
                match collision_verdict(&h, &injectivity, &accounting.disconnected_users) {
                    Some(v) => v,
                    None => {
                        let report =
                            sufficiency_report(&h, cfg.n, cfg.d_max, std::mem::take(&mut injectivity), &limits)
                                .map_err(|e| CliError::Config(e.to_string()))?;
                        let v = match report.last_row() {
                            Some(row) if report.truncated.is_none() && !connected_gap => Verdict::Evidence {
                                d: row.d,
                                bounds: row.bounds(),
                            },
                            _ => Verdict::Inconclusive,
                        };
                        dof = Some(report);
                        v
                    }
                }
            }
        }
    };
    let balance = balance_entries(&h, cfg, &limits);

    let mut summary = vec![
        format!("channel: K={k}, N={}, d_max={}", cfg.n, cfg.d_max),
        accounting_line(&accounting),
    ];
    if let Some(o) = &classify3 {
        let kind = match o {
            ThreeUserOutcome::Satisfiable { .. } => "satisfiable by scaling",
            ThreeUserOutcome::Obstructed { .. } => "obstructed",
        };
        summary.push(format!("classify3: {}, {kind}", topology_name(o)));
    }
    summary.push(format!("verdict: {verdict}"));
    if verdict == Verdict::Inconclusive {
        if let Some(t) = dof.as_ref().and_then(|r| r.truncated.as_ref()) {
            summary.push(format!("note: {} at d={}", t.reason, t.d));
        }
        let notes = dof.as_ref().map_or(&injectivity, |r| &r.injectivity);
        for u in notes.iter().filter(|u| u.verdict.is_none()) {
            summary.push(format!(
                "note: user {}: {}",
                u.user + 1,
                u.note.as_deref().unwrap_or("no verdict")
            ));
        }
    }
    let mut summary = summary.join("\n");
    summary.push('\n');

    if let Some(r) = &dof {
        sink.write(&cfg.outputs.dof_csv, &r.to_csv())?;
    }
    let report = AnalyzeReport {
        config: cfg,
        accounting,
        ratio_obstruction,
        classify3,
        injectivity,
        dof,
        balance,
        verdict: verdict.to_string(),
    };
    sink.write_json(&cfg.outputs.report, &report)?;
    sink.write(&cfg.outputs.summary, &summary)?;
    print!("{summary}");
    Ok(verdict.exit_code())
}

fn topology_name(o: &ThreeUserOutcome) -> String {
    serde_json::to_value(o.topology())
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// Cardinality series of the codebooks `W_{N^d,d}`.
pub fn codebook(cfg: &AnalysisConfig, sink: &Sink) -> Result<u8, CliError> {
    let h = cfg.matrix()?;
    if cfg.n < 2 {
        return Err(CliError::Config(format!(
            "n: the cardinality series needs N > 1, got {}",
            cfg.n
        )));
    }
    let series = ratio_series(&h, cfg.n, cfg.d_max, &cfg.limits()).map_err(|e| CliError::Config(e.to_string()))?;
    let csv = series.to_csv();
    sink.write(&cfg.outputs.codebook_csv, &csv)?;
    print!("{csv}");
    Ok(if series.truncated.is_some() {
        crate::EXIT_TRUNCATED
    } else {
        0
    })
}

#[derive(Serialize)]
struct EntropyReport {
    entropy_bits: f64,
    support: usize,
    distribution: DiscreteDistribution,
}

/// Entropy of `Σ c_j X_j` for the independent inputs of the `entropy` section.
pub fn entropy(cfg: &AnalysisConfig, sink: &Sink) -> Result<u8, CliError> {
    let (coeffs, dists) = cfg.lincomb()?;
    let dist = dist_lincomb(&coeffs, &dists, &cfg.limits()).map_err(|e| {
        if e.is_resource() {
            CliError::Truncated(e.to_string())
        } else {
            CliError::Config(format!("entropy: {e}"))
        }
    })?;
    let report = EntropyReport {
        entropy_bits: dist.entropy(),
        support: dist.len(),
        distribution: dist,
    };
    println!(
        "entropy: {:.12} bits over {} atoms",
        report.entropy_bits, report.support
    );
    sink.write_json(&cfg.outputs.entropy, &report)?;
    Ok(0)
}

/// Seeded sweeps of the four entropy-inequality oracles; any violation fails the command.
pub fn check_inequalities(cfg: &AnalysisConfig, seed: u64, cases: u64, sink: &Sink) -> Result<u8, CliError> {
    let report = run_sweeps(seed, cases, &cfg.limits()).map_err(|e| CliError::Truncated(e.to_string()))?;
    sink.write(&cfg.outputs.inequalities_csv, &report.to_csv())?;
    let failures: Vec<_> = report.failures().collect();
    if failures.is_empty() {
        println!("inequalities: all hold ({} checks, seed {seed})", report.records.len());
        Ok(0)
    } else {
        for f in &failures {
            println!(
                "violated: {} case {}: lhs {} > rhs {}",
                f.inequality, f.case_id, f.lhs, f.rhs
            );
        }
        println!(
            "inequalities: {} of {} checks fail (seed {seed})",
            failures.len(),
            report.records.len()
        );
        Ok(EXIT_INEQUALITY)
    }
}

/// The 3-user decision procedure on its own.
pub fn classify3(cfg: &AnalysisConfig, sink: &Sink) -> Result<u8, CliError> {
    let h = cfg.matrix()?;
    let outcome = classify_3user(&h, &cfg.limits()).map_err(resource_or)?;
    println!("topology: {}", topology_name(&outcome));
    match &outcome {
        ThreeUserOutcome::Obstructed { triple, .. } => {
            let (i, j, k) = one_based(*triple);
            let ratio = cross_ratio(&h, triple.0, triple.1, triple.2).map_err(|e| CliError::Config(e.to_string()))?;
            println!("outcome: obstructed by rational-link triple ({i},{j},{k}), cross ratio {ratio}");
        }
        ThreeUserOutcome::Satisfiable { scaled, .. } => {
            let diag: Vec<String> = (0..3).map(|i| scaled.diag(i).to_string()).collect();
            println!("outcome: satisfiable; scaled diagonal {}", diag.join(", "));
        }
    }
    sink.write_json(&cfg.outputs.classify, &outcome)?;
    Ok(0)
}

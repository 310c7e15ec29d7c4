//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use alignkit_core::channel::random::{rational_matrix, scaling_pair, sqrt2_matrix};
use alignkit_core::channel::{cross_ratio, scale, ChannelMatrix};
use alignkit_core::codebook::{build_w, enumerate_monomials, phi, ratio_series, Limits};
use alignkit_core::diagnostics::run_sweeps;
use alignkit_core::dofengine::{
    log2_inverse, scaled_input_compensation, self_similar_bound, sufficiency_pipeline, DiscreteDistribution,
    SelfSimilarCode,
};
use alignkit_core::exactnum::ExactScalar;
use alignkit_core::separability::{
    classify_3user, rational_ratio_obstruction, search_polynomial_witness, test_injectivity, ThreeUserOutcome, Topology,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `H(U + U')` for iid `U` uniform on `m` consecutive integers, from the triangular law.
fn triangular_entropy(m: u64) -> f64 {
    let total = (m as f64) * (m as f64);
    let mut acc = 0.0;
    for w in 1..=m {
        let count = if w == m { 1.0 } else { 2.0 };
        acc += count * (w as f64) * (w as f64).log2();
    }
    total.log2() - acc / total
}

fn sufficiency_convergence() -> Outcome {
    let h = ChannelMatrix::from_strs(&[&["sqrt(2)", "1", "1"], &["1", "sqrt(3)", "1"], &["1", "1", "sqrt(5)"]]);
    let start = Instant::now();
    let report = sufficiency_pipeline(&h, 3, 6, &Limits::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(report.truncated.is_none() && report.rows.len() == 6, || {
        "pipeline truncated".into()
    })?;
    for row in &report.rows {
        let b = row.bounds();
        ensure(b.iter().all(|x| (x - b[0]).abs() <= 1e-9), || {
            format!("users differ at d={}: {b:?}", row.d)
        })?;
        // off-diagonals all 1: W is {0..φ(d)(3^d − 1)}
        let m = phi(3, row.d).to_string().parse::<u64>().unwrap() * (3u64.pow(row.d) - 1) + 1;
        ensure(row.cardinality == m, || {
            format!("|W| = {} at d={}, closed form {m}", row.cardinality, row.d)
        })?;
        let oracle = 1.0 - triangular_entropy(m) / (2.0 * (m as f64).log2());
        ensure((b[0] - oracle).abs() <= 1e-9, || {
            format!("bound {} vs convolution oracle {oracle} at d={}", b[0], row.d)
        })?;
        let summing = row.summing_bound.ok_or("missing summing bound")?;
        ensure(summing <= b[0] + 1e-9, || {
            format!("summing bound {summing} exceeds {} at d={}", b[0], row.d)
        })?;
    }
    let last = report.rows[5].bounds()[0];
    ensure(last >= 0.45, || format!("bound at d=6 is {last}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("runtime {elapsed:?}"))?;
    Ok(format!(
        "d=6 bound {last:.6}, summing bound {:.6}, {:.1}s",
        report.rows[5].summing_bound.unwrap(),
        elapsed.as_secs_f64()
    ))
}

fn ratio_series_check() -> Outcome {
    let h = ChannelMatrix::with_diagonal(&vec![ExactScalar::one(); 3], &ExactScalar::one());
    // raw enumeration of W_{3,1}: every coefficient vector over 7 monomials
    let monomials = enumerate_monomials(3, 1);
    let mut values = std::collections::BTreeSet::new();
    for code in 0..3u32.pow(monomials.len() as u32) {
        let (mut c, mut sum) = (code, 0u32);
        for _ in &monomials {
            sum += c % 3;
            c /= 3;
        }
        values.insert(sum);
    }
    ensure(values.len() == 15, || format!("enumerated |W_3,1| = {}", values.len()))?;
    let series = ratio_series(&h, 3, 6, &Limits::default()).map_err(|e| e.to_string())?;
    ensure(series.truncated.is_none() && series.rows.len() == 6, || {
        "series truncated".into()
    })?;
    ensure(
        series.rows[0].cardinality == 15 && series.rows[0].cardinality_next == 225,
        || format!("d=1 cardinalities {:?}", series.rows[0]),
    )?;
    ensure((series.rows[0].log_ratio - 2.0).abs() <= 1e-12, || {
        format!("d=1 ratio {}", series.rows[0].log_ratio)
    })?;
    let expect = 2185f64.ln() / 225f64.ln();
    ensure((series.rows[1].log_ratio - expect).abs() <= 1e-12, || {
        format!("d=2 ratio {}", series.rows[1].log_ratio)
    })?;
    ensure((series.rows[1].log_ratio - 1.419).abs() < 1e-3, || {
        "d=2 ratio not ≈1.419".into()
    })?;
    ensure(series.rows.iter().all(|r| r.log_ratio >= 1.0), || {
        "ratio below 1".into()
    })?;
    let min = series.min_ratio().unwrap();
    ensure(min <= 1.2, || format!("minimum ratio {min}"))?;
    Ok(format!(
        "ratios 2.0, {:.4}, …; minimum {min:.4}",
        series.rows[1].log_ratio
    ))
}

fn half_identity() -> Outcome {
    let matrices = [
        ChannelMatrix::with_diagonal(&vec![ExactScalar::one(); 3], &ExactScalar::one()),
        ChannelMatrix::from_strs(&[&["1", "sqrt(2)", "0"], &["1", "1", "1/2"], &["sqrt(3)", "2", "1"]]),
        ChannelMatrix::from_strs(&[&["1", "1+sqrt(2)", "1"], &["1/3", "1", "sqrt(2)"], &["1", "1", "1"]]),
    ];
    let mut tested = 0;
    let mut worst: f64 = 0.0;
    for h in &matrices {
        for (n, d) in [(2, 1), (3, 1), (4, 1), (2, 2), (3, 2)] {
            let Ok(w) = build_w(h, n, d, &Limits::default()) else {
                continue;
            };
            let psi = DiscreteDistribution::uniform_on_codebook(&w);
            let m = BigInt::from(w.len());
            let r = BigRational::new(BigInt::from(1), &m * &m);
            let code = SelfSimilarCode::new(psi, r.clone()).map_err(|e| e.to_string())?;
            let v = code.normalized_digit_entropy();
            worst = worst.max((v - 0.5).abs());
            ensure((v - 0.5).abs() <= 1e-12, || {
                format!("ratio {v} for |W| = {m}, log(1/r) = {:?}", log2_inverse(&r))
            })?;
            tested += 1;
        }
    }
    Ok(format!("{tested} codebooks, max deviation {worst:.1e}"))
}

fn obstruction_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b57);
    let (mut by_ratio, mut by_collision) = (0, 0);
    for case in 0..100 {
        for k in [3, 4] {
            let h = rational_matrix(&mut rng, k);
            if let Some(o) = rational_ratio_obstruction(&h) {
                let again = cross_ratio(&h, o.i, o.j, o.k).map_err(|e| e.to_string())?;
                ensure(again.rational_value() == Some(o.ratio.clone()), || {
                    format!("case {case}: ratio replay failed")
                })?;
                by_ratio += 1;
                continue;
            }
            let mut found = false;
            'grid: for n in 2..=4 {
                for d in 0..=1 {
                    let w = build_w(&h, n, d, &Limits::default()).map_err(|e| e.to_string())?;
                    for i in 0..k {
                        let v = test_injectivity(&w, h.diag(i), &Limits::default()).map_err(|e| e.to_string())?;
                        if let Some(c) = v.collision {
                            ensure(c.verify(), || format!("case {case}: collision replay failed"))?;
                            let p = c.to_polynomials(w.monomials());
                            ensure(p.verify(h.diag(i), w.hhat()), || {
                                format!("case {case}: polynomial replay failed")
                            })?;
                            found = true;
                            break 'grid;
                        }
                    }
                }
            }
            ensure(found, || {
                format!("case {case}: rational {k}x{k} matrix without obstruction: {h:?}")
            })?;
            by_collision += 1;
        }
    }
    Ok(format!(
        "200 matrices: {by_ratio} by rational cross ratio, {by_collision} by collision"
    ))
}

fn decision_procedure() -> Outcome {
    let limits = Limits::default();
    let run = |rows: &[&[&str]]| -> Result<(ChannelMatrix, ThreeUserOutcome), String> {
        let h = ChannelMatrix::from_strs(rows);
        let o = classify_3user(&h, &limits).map_err(|e| e.to_string())?;
        Ok((h, o))
    };
    let expect_triple = |rows: &[&[&str]], topology: Topology, triple: (usize, usize, usize)| -> Result<(), String> {
        let (h, o) = run(rows)?;
        ensure(o.topology() == topology, || {
            format!("{rows:?}: topology {:?}", o.topology())
        })?;
        match o {
            ThreeUserOutcome::Obstructed { triple: t, .. } => {
                ensure(t == triple, || format!("{rows:?}: triple {t:?}, expected {triple:?}"))?;
                let (i, j, k) = t;
                let ratio = cross_ratio(&h, i, j, k).map_err(|e| e.to_string())?;
                ensure(ratio.is_rational() && !ratio.is_zero(), || {
                    format!("{rows:?}: reported triple has cross ratio {ratio}")
                })
            }
            other => Err(format!("{rows:?}: expected obstruction, got {other:?}")),
        }
    };
    let expect_scaled = |rows: &[&[&str]], topology: Topology| -> Result<(), String> {
        let (h, o) = run(rows)?;
        ensure(o.topology() == topology, || {
            format!("{rows:?}: topology {:?}", o.topology())
        })?;
        match o {
            ThreeUserOutcome::Satisfiable { scaling, scaled, .. } => {
                ensure(scale(&h, &scaling).map_err(|e| e.to_string())? == scaled, || {
                    "scaling replay failed".into()
                })?;
                ensure((0..3).all(|i| !scaled.diag(i).is_rational()), || {
                    format!("{rows:?}: rational diagonal")
                })?;
                for (i, j) in scaled.offdiag_positions() {
                    let v = scaled.get(i, j);
                    ensure(v.is_zero() || *v == ExactScalar::one(), || {
                        format!("{rows:?}: off-diagonal {v}")
                    })?;
                }
                for i in 0..3 {
                    let w = search_polynomial_witness(&scaled, i, 2, 4, &limits).map_err(|e| e.to_string())?;
                    ensure(w.is_none(), || format!("{rows:?}: witness for user {}", i + 1))?;
                }
                Ok(())
            }
            other => Err(format!("{rows:?}: expected scaling, got {other:?}")),
        }
    };

    // reciprocal pair: satisfiable for every diagonal
    expect_scaled(
        &[&["sqrt(2)", "0", "1"], &["0", "sqrt(3)", "1"], &["1", "1", "sqrt(5)"]],
        Topology::ReciprocalPair,
    )?;
    expect_scaled(
        &[&["sqrt(2)", "0", "1"], &["0", "2", "1"], &["1", "1", "sqrt(3)"]],
        Topology::ReciprocalPair,
    )?;
    expect_scaled(
        &[&["sqrt(2)", "0", "1"], &["0", "sqrt(5)", "1"], &["1", "1", "3"]],
        Topology::ReciprocalPair,
    )?;
    expect_scaled(
        &[&["sqrt(2)", "0", "0"], &["0", "3", "1"], &["1", "0", "4"]],
        Topology::ReciprocalPair,
    )?;
    // cycle: rational g3 absorbed by scaling
    expect_scaled(
        &[&["sqrt(2)", "1", "0"], &["0", "sqrt(2)", "1"], &["1", "0", "2"]],
        Topology::Cycle,
    )?;
    expect_scaled(
        &[&["sqrt(2)", "1", "0"], &["0", "sqrt(2)", "1"], &["1", "0", "sqrt(5)"]],
        Topology::Cycle,
    )?;
    // single missing link
    expect_triple(
        &[&["3", "0", "1"], &["1", "sqrt(2)", "1"], &["1", "1", "sqrt(3)"]],
        Topology::SingleLink,
        (0, 2, 1),
    )?;
    expect_triple(
        &[&["sqrt(2)", "0", "1"], &["1", "2", "1"], &["1", "1", "sqrt(3)"]],
        Topology::SingleLink,
        (1, 0, 2),
    )?;
    expect_triple(
        &[&["sqrt(2)", "0", "1"], &["1", "sqrt(3)", "1"], &["1", "1", "1/2"]],
        Topology::SingleLink,
        (2, 0, 1),
    )?;
    expect_scaled(
        &[&["sqrt(2)", "0", "1"], &["1", "sqrt(3)", "1"], &["1", "1", "sqrt(5)"]],
        Topology::SingleLink,
    )?;
    // receiver 1 interference-free
    expect_triple(
        &[&["sqrt(2)", "0", "0"], &["1", "2", "1"], &["1", "1", "sqrt(3)"]],
        Topology::RowPair,
        (1, 0, 2),
    )?;
    expect_triple(
        &[&["sqrt(2)", "0", "0"], &["1", "sqrt(3)", "1"], &["1", "1", "5"]],
        Topology::RowPair,
        (2, 0, 1),
    )?;
    expect_scaled(
        &[&["sqrt(2)", "0", "0"], &["1", "sqrt(3)", "1"], &["1", "1", "sqrt(5)"]],
        Topology::RowPair,
    )?;
    // chain
    expect_triple(
        &[&["sqrt(2)", "0", "1"], &["1", "2", "0"], &["1", "1", "sqrt(3)"]],
        Topology::Chain,
        (1, 0, 2),
    )?;
    expect_scaled(
        &[&["sqrt(2)", "0", "1"], &["1", "sqrt(3)", "0"], &["1", "1", "2"]],
        Topology::Chain,
    )?;
    // wrapped chain
    expect_triple(
        &[&["1/2", "0", "1"], &["1", "sqrt(3)", "1"], &["0", "1", "sqrt(2)"]],
        Topology::ChainWrapped,
        (0, 2, 1),
    )?;
    expect_scaled(
        &[&["sqrt(5)", "0", "1"], &["1", "3", "1"], &["0", "1", "sqrt(2)"]],
        Topology::ChainWrapped,
    )?;
    // transmitter 1 silent towards others
    expect_triple(
        &[&["sqrt(2)", "1", "1"], &["0", "2", "1"], &["0", "1", "sqrt(3)"]],
        Topology::ColumnPair,
        (1, 2, 0),
    )?;
    expect_triple(
        &[&["sqrt(2)", "1", "1"], &["0", "sqrt(3)", "1"], &["0", "1", "3"]],
        Topology::ColumnPair,
        (2, 1, 0),
    )?;
    expect_scaled(
        &[&["sqrt(2)", "1", "1"], &["0", "sqrt(3)", "1"], &["0", "1", "sqrt(5)"]],
        Topology::ColumnPair,
    )?;
    // three missing links, acyclic
    expect_triple(
        &[&["sqrt(2)", "0", "0"], &["1", "4", "0"], &["1", "1", "sqrt(2)"]],
        Topology::Transitive,
        (1, 0, 2),
    )?;
    expect_scaled(
        &[&["sqrt(2)", "0", "0"], &["1", "sqrt(3)", "0"], &["1", "1", "sqrt(2)"]],
        Topology::Transitive,
    )?;
    // relabeled and unnormalized instance: zero at (3,2) only, rational first gain
    expect_triple(
        &[&["2", "5", "1/3"], &["1", "sqrt(2)", "7"], &["3", "0", "sqrt(3)"]],
        Topology::SingleLink,
        (0, 2, 1),
    )?;
    Ok("8 zero patterns, 23 instances".into())
}

fn inequality_oracles() -> Outcome {
    let report = run_sweeps(2024, 1000, &Limits::default()).map_err(|e| e.to_string())?;
    if let Some(f) = report.failures().next() {
        return Err(format!(
            "{} case {} fails: lhs {} rhs {}",
            f.inequality, f.case_id, f.lhs, f.rhs
        ));
    }
    let min_margin = report.records.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(format!(
        "{} checks over 4 × 1000 cases, min margin {min_margin:.3e}",
        report.records.len()
    ))
}

fn cross_oracle_injectivity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc2055);
    let limits = Limits::default();
    let (mut violated, mut clean) = (0, 0);
    for case in 0..50 {
        let h = sqrt2_matrix(&mut rng);
        for n in [2u64, 3] {
            for d in 0..=2u32 {
                let w = build_w(&h, n, d, &limits).map_err(|e| e.to_string())?;
                for i in 0..3 {
                    let hii = h.diag(i);
                    let scan = test_injectivity(&w, hii, &limits).map_err(|e| e.to_string())?;
                    let poly = search_polynomial_witness(&h, i, d, n - 1, &limits).map_err(|e| e.to_string())?;
                    let tag = || format!("case {case} N={n} d={d} user {}: {h:?}", i + 1);
                    ensure(scan.collision.is_some() == poly.is_some(), || {
                        format!(
                            "{}: scan {:?} vs polynomial {:?}",
                            tag(),
                            scan.collision.is_some(),
                            poly.is_some()
                        )
                    })?;
                    if let Some(c) = &scan.collision {
                        ensure(c.verify(), || format!("{}: collision fails replay", tag()))?;
                        let p = c.to_polynomials(w.monomials());
                        ensure(p.verify(hii, w.hhat()), || {
                            format!("{}: converted polynomials fail", tag())
                        })?;
                        violated += 1;
                    } else {
                        clean += 1;
                    }
                    if let Some(p) = &poly {
                        ensure(p.verify(hii, w.hhat()), || format!("{}: witness fails replay", tag()))?;
                        let c = p
                            .to_collision(hii, w.hhat(), w.monomials())
                            .ok_or("witness not convertible")?;
                        ensure(c.verify(), || format!("{}: converted collision fails", tag()))?;
                        ensure(w.contains(&c.first[0]) && w.contains(&c.second[1]), || {
                            format!("{}: converted pair outside W", tag())
                        })?;
                    }
                }
            }
        }
    }
    Ok(format!(
        "{} user/grid checks: {violated} violated, {clean} injective, all agreeing",
        violated + clean
    ))
}

fn invariance_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a7);
    let limits = Limits::default();
    let matrices = [
        ChannelMatrix::from_strs(&[&["sqrt(2)", "1", "1"], &["1", "sqrt(3)", "1"], &["1", "1", "sqrt(5)"]]),
        ChannelMatrix::from_strs(&[&["1", "2", "1/2"], &["3", "1", "1"], &["1", "-1", "2"]]),
        ChannelMatrix::from_strs(&[&["1+sqrt(2)", "sqrt(2)", "1"], &["1", "2", "0"], &["sqrt(3)", "1", "1"]]),
        rational_matrix(&mut rng, 4),
    ];
    let mut checks = 0;
    for (m, h) in matrices.iter().enumerate() {
        let k = h.k();
        let dists: Vec<DiscreteDistribution> = (0..k)
            .map(|j| {
                let vals: Vec<ExactScalar> = (0..(2 + j as i64))
                    .map(|v| ExactScalar::from_integer(v * v + j as i64))
                    .collect();
                DiscreteDistribution::uniform(&vals).unwrap()
            })
            .collect();
        let r = BigRational::new(BigInt::from(1), BigInt::from(64));
        let base = self_similar_bound(h, &dists, &r, &limits).map_err(|e| e.to_string())?;
        for t in 0..20 {
            let sp = scaling_pair(&mut rng, k);
            let scaled = scale(h, &sp).map_err(|e| e.to_string())?;
            for i in 0..k {
                for j in 0..k {
                    for l in 0..k {
                        if i == j || j == l || i == l {
                            continue;
                        }
                        let (a, b) = (cross_ratio(h, i, j, l), cross_ratio(&scaled, i, j, l));
                        ensure(a.is_ok() == b.is_ok(), || {
                            format!("matrix {m} trial {t}: definedness changed")
                        })?;
                        if let (Ok(a), Ok(b)) = (a, b) {
                            ensure(a == b, || {
                                format!("matrix {m} trial {t}: cross ratio ({i},{j},{l}) {a} vs {b}")
                            })?;
                            checks += 1;
                        }
                    }
                }
            }
            let comp = scaled_input_compensation(h, &sp, &dists).map_err(|e| e.to_string())?;
            let moved = self_similar_bound(&scaled, &comp, &r, &limits).map_err(|e| e.to_string())?;
            for (x, y) in base.iter().zip(&moved) {
                ensure((x.bound - y.bound).abs() <= 1e-9, || {
                    format!("matrix {m} trial {t}: bound {} vs {}", x.bound, y.bound)
                })?;
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} invariance checks over 4 matrices × 20 scalings"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("sufficiency pipeline convergence", sufficiency_convergence),
        ("cardinality ratio series", ratio_series_check),
        ("half-entropy identity for uniform digits", half_identity),
        ("rational-matrix obstruction soundness", obstruction_soundness),
        ("3-user decision procedure branches", decision_procedure),
        ("entropy inequality oracles", inequality_oracles),
        (
            "collision scan vs polynomial witness agreement",
            cross_oracle_injectivity,
        ),
        ("scaling invariance", invariance_suite),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({detail}; {secs:.2}s)", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL ({why})", n + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

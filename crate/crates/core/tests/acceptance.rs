//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest harness
//! so the lines are always printed.

use std::path::PathBuf;
use std::time::Instant;

use num_rational::Ratio;

use idealcore::asymptotics::{core, oracle_core, CoreConfig};
use idealcore::constructions::{
    core_equality_experiment, core_stability_check, rk_matrix, sufficiency_certificate, CertificateConfig,
    StabilityOutcome,
};
use idealcore::harness::{render, run_suite, ExperimentConfig, OutputFormat};
use idealcore::ideals::{Ideal, SetDescription};
use idealcore::index_map::IndexMap;
use idealcore::matrices::{cesaro, random_nonnegative, transform};
use idealcore::regularity::{
    allen_check, cfo_check, leo_check, row_functional, silverman_toeplitz_check, CheckConfig, RowFunctional, Status,
    TestFamily, Witness,
};
use idealcore::sequences::{constant, corpus, corpus_entry, geometric, harmonic, indicator};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn fin_oplus_evens() -> Ideal {
    Ideal::fin_oplus_full(SetDescription::evens()).unwrap()
}

fn fin_oplus_odds() -> Ideal {
    Ideal::fin_oplus_full(SetDescription::odds()).unwrap()
}

/// Cores worked out by hand for the structured corpus.
fn hand_cores() -> Vec<(&'static str, &'static str, f64, f64)> {
    let t = 1.0 / 3.0;
    vec![
        ("fin", "(-1)^n", -1.0, 1.0),
        ("fin", "1_evens", 0.0, 1.0),
        ("fin", "1_squares", 0.0, 1.0),
        ("fin", "1_blocks", 0.0, 1.0),
        ("fin", "1_AP(1,3)", 0.0, 1.0),
        ("fin", "1_F-1_G blocks", -1.0, 1.0),
        ("fin", "1_F-1_G squares", -1.0, 1.0),
        ("fin", "periodic(0,1/2,1)", 0.0, 1.0),
        ("fin", "blockwise{0,1/3,1}", 0.0, 1.0),
        ("z", "(-1)^n", -1.0, 1.0),
        ("z", "1_evens", 0.0, 1.0),
        ("z", "1_squares", 0.0, 0.0),
        ("z", "1_blocks", 0.0, 1.0),
        ("z", "1_AP(1,3)", 0.0, 1.0),
        ("z", "1_F-1_G blocks", -1.0, 1.0),
        ("z", "1_F-1_G squares", -1.0, 0.0),
        ("z", "periodic(0,1/2,1)", 0.0, 1.0),
        ("z", "blockwise{0,1/3,1}", 0.0, t),
        ("evens", "(-1)^n", 1.0, 1.0),
        ("evens", "1_evens", 1.0, 1.0),
        ("evens", "1_squares", 0.0, 1.0),
        ("evens", "1_blocks", 0.0, 1.0),
        ("evens", "1_AP(1,3)", 0.0, 1.0),
        ("evens", "1_F-1_G blocks", 0.0, 1.0),
        ("evens", "1_F-1_G squares", -1.0, 1.0),
        ("evens", "periodic(0,1/2,1)", 0.0, 1.0),
        ("evens", "blockwise{0,1/3,1}", 0.0, 1.0),
        ("odds", "(-1)^n", -1.0, -1.0),
        ("odds", "1_evens", 0.0, 0.0),
        ("odds", "1_squares", 0.0, 1.0),
        ("odds", "1_blocks", 0.0, 1.0),
        ("odds", "1_AP(1,3)", 0.0, 1.0),
        ("odds", "1_F-1_G blocks", -1.0, 1.0),
        ("odds", "1_F-1_G squares", 0.0, 1.0),
        ("odds", "periodic(0,1/2,1)", 0.0, 1.0),
        ("odds", "blockwise{0,1/3,1}", 0.0, 1.0),
    ]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cfg = CoreConfig::default();
    let grid = cfg.grid;
    let ideal = |name: &str| match name {
        "fin" => Ideal::fin(),
        "z" => Ideal::density_zero(),
        "evens" => fin_oplus_evens(),
        _ => fin_oplus_odds(),
    };
    let mut pairs = 0;
    let mut numeric_pairs = 0;
    for (iname, label, lo, hi) in hand_cores() {
        let i = ideal(iname);
        let x = corpus_entry(label).ok_or(format!("missing corpus entry {label}"))?;
        ensure(x.is_structured(), format!("{label} is not structured"))?;
        let expected = oracle_core(&x, &i).map_err(|e| format!("{label}/{i}: {e}"))?;
        ensure(
            (expected.lo - lo).abs() < 1e-12 && (expected.hi - hi).abs() < 1e-12,
            format!("{label}/{i}: oracle [{}, {}], by hand [{lo}, {hi}]", expected.lo, expected.hi),
        )?;
        let got = core(&x, &i, &cfg).map_err(|e| format!("{label}/{i}: {e}"))?;
        ensure(
            got.deviation(&expected) <= grid,
            format!("{label}/{i}: core [{}, {}] vs oracle [{lo}, {hi}]", got.lo, got.hi),
        )?;
        pairs += 1;
        // purely sample-based estimator, for ideals decided by tail hits
        if iname != "z" {
            let num = core(&x, &i, &cfg.numeric()).map_err(|e| format!("{label}/{i} numeric: {e}"))?;
            ensure(
                num.deviation(&expected) <= grid,
                format!("{label}/{i}: numeric core [{}, {}] vs oracle [{lo}, {hi}]", num.lo, num.hi),
            )?;
            numeric_pairs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(pairs >= 20, format!("only {pairs} pairs"))?;
    ensure(secs < 30.0, format!("runtime {secs:.1}s >= 30s"))?;
    Ok(format!(
        "{pairs} pairs within {grid} of the oracle at N = {} ({numeric_pairs} also via the sample-only estimator), {secs:.1}s",
        cfg.horizon
    ))
}

fn criterion_2() -> Outcome {
    let c = cesaro();
    let v = silverman_toeplitz_check(&c, &Ideal::fin(), &Ideal::fin(), &TestFamily::default_for(&Ideal::fin(), 0), &CheckConfig::default())
        .map_err(|e| e.to_string())?;
    ensure(v.status == Status::Satisfied, format!("status {:?}", v.status))?;
    let mut worst = 0.0f64;
    for n in 0..=10_000u64 {
        let row = c.row(n);
        let exact: Ratio<u64> = row
            .entries()
            .map(|(_, a)| {
                ensure(a == 1.0 / (n + 1) as f64, format!("row {n} entry {a}")).map(|_| Ratio::new(1, n + 1))
            })
            .sum::<Result<Ratio<u64>, String>>()?;
        ensure(exact == Ratio::from_integer(1), format!("row {n} sums to {exact}"))?;
        worst = worst.max((row.sum() - 1.0).abs());
    }
    ensure(worst <= 1e-12, format!("row-sum deviation {worst:e}"))?;
    let top = c.row(10_000).max_entry();
    let want = 1.0 / 10_001.0;
    ensure((top - want).abs() <= 1e-12, format!("max entry {top} vs {want}"))?;
    Ok(format!("Satisfied, row-sum deviation {worst:e}, max entry of row 10^4 = {top:.12}"))
}

fn criterion_3() -> Outcome {
    let c = cesaro();
    let fin = Ideal::fin();
    let v = allen_check(&c, &TestFamily::default_for(&fin, 0), &CheckConfig::default()).map_err(|e| e.to_string())?;
    ensure(v.status == Status::Violated, format!("status {:?}", v.status))?;
    ensure(
        v.witness == Some(Witness::Set(SetDescription::squares())),
        format!("witness {:?}", v.witness),
    )?;
    let f = RowFunctional {
        set: Some(SetDescription::squares()),
        absolute: true,
    };
    let evidence = row_functional(&c, &f, 10_001)[10_000];
    // 101 squares in [0, 10^4]
    ensure((evidence - 101.0 / 10_001.0).abs() < 1e-12, format!("evidence {evidence}"))?;
    ensure(evidence <= 0.02, format!("evidence {evidence} > 0.02"))?;

    let alt = corpus_entry("(-1)^n").unwrap();
    let rep = core_equality_experiment(&c, &fin, &fin, &[alt], &CoreConfig::default());
    let row = rep.row("(-1)^n").ok_or("missing row")?;
    let (cx, cax) = (row.core_x.ok_or("no core_x")?, row.core_ax.ok_or("no core_Ax")?);
    ensure(cx.lo == -1.0 && cx.hi == 1.0, format!("core_x [{}, {}]", cx.lo, cx.hi))?;
    ensure(
        cax.lo.abs() <= 0.02 && cax.hi.abs() <= 0.02,
        format!("core_Ax [{}, {}]", cax.lo, cax.hi),
    )?;
    Ok(format!(
        "Violated with witness squares, evidence {evidence:.4}; core_Cx = [{:.3}, {:.3}] vs core_x = [-1, 1]",
        cax.lo, cax.hi
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let a = rk_matrix(IndexMap::enumeration_of(SetDescription::evens()));
    for n in [0u64, 1, 7, 4_999] {
        let row: Vec<_> = a.row(n).entries().collect();
        ensure(row == vec![(2 * n, 1.0)], format!("row {n} = {row:?}"))?;
    }
    let i = fin_oplus_evens();
    let fin = Ideal::fin();
    let v = leo_check(&a, &i, &fin, &TestFamily::default_for(&i, 0), &CheckConfig::default()).map_err(|e| e.to_string())?;
    ensure(v.status == Status::Satisfied, format!("leo status {:?}", v.status))?;
    let cfg = CoreConfig::default();
    let all = corpus();
    let rep = core_equality_experiment(&a, &i, &fin, &all, &cfg);
    ensure(rep.errors().count() == 0, format!("errors: {:?}", rep.errors().collect::<Vec<_>>()))?;
    ensure(rep.rows.len() == all.len(), "missing rows")?;
    ensure(rep.max_deviation <= 1e-2, format!("max deviation {}", rep.max_deviation))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("runtime {secs:.1}s >= 60s"))?;
    Ok(format!(
        "leo Satisfied; max deviation {:e} over {} corpus entries at N = {}, {secs:.1}s",
        rep.max_deviation,
        all.len(),
        cfg.horizon
    ))
}

fn criterion_5() -> Outcome {
    let cfg = CoreConfig::default();
    let x = |l: &str| corpus_entry(l).unwrap();
    let cases = [
        (x("(-1)^n"), x("(-1)^n").add(&harmonic()), Ideal::fin()),
        (x("1_evens"), x("1_evens").add(&geometric()), Ideal::fin()),
        (x("(-1)^n"), x("(-1)^n").add(&x("1_squares")), Ideal::density_zero()),
        (
            x("periodic(0,1/2,1)"),
            x("periodic(0,1/2,1)").add(&x("1_squares")),
            Ideal::density_zero(),
        ),
        (
            x("1_AP(1,3)"),
            x("1_AP(1,3)").add(&indicator(SetDescription::explicit([0, 1, 2, 3, 4]))),
            Ideal::fin(),
        ),
    ];
    let mut worst = 0.0f64;
    for (x, y, i) in &cases {
        match core_stability_check(x, y, i, &cfg, 1e-2) {
            StabilityOutcome::Confirmed { deviation, .. } => worst = worst.max(deviation),
            other => return Err(format!("{} vs {} under {i}: {other:?}", x.label(), y.label())),
        }
    }
    let shifted = x("(-1)^n").add(&constant(1.0));
    ensure(
        matches!(
            core_stability_check(&x("(-1)^n"), &shifted, &Ideal::fin(), &cfg, 1e-2),
            StabilityOutcome::NotApplicable { .. }
        ),
        "x + 1 not reported NotApplicable",
    )?;
    Ok(format!("{} pairs Confirmed, max deviation {worst:e}", cases.len()))
}

fn criterion_6() -> Outcome {
    let a = rk_matrix(IndexMap::enumeration_of(SetDescription::evens()));
    let i = fin_oplus_evens();
    let fin = Ideal::fin();
    let cfg = CertificateConfig::default();
    let mut rows = 0;
    for x in [corpus_entry("1_evens").unwrap(), indicator(SetDescription::progression(0, 4))] {
        for eps in [0.1, 0.01] {
            let c = sufficiency_certificate(&a, &x, eps, &i, &fin, &cfg).map_err(|e| format!("{} ε={eps}: {e}", x.label()))?;
            let tag = format!("{} ε={eps}", x.label());
            ensure(c.lower_margin >= 0.0 && c.upper_margin >= 0.0, format!("{tag}: margins {} {}", c.lower_margin, c.upper_margin))?;
            ensure(c.s_count > 0 && c.s_prime_count > 0, format!("{tag}: empty S or S'"))?;
            let want_delta = (eps / (2.0 + c.eta + c.kappa + 4.0 * (x.bound() + c.kappa))).min(1.0);
            ensure((c.delta - want_delta).abs() < 1e-15, format!("{tag}: δ = {} vs {want_delta}", c.delta))?;
            let shifted = x.affine(1.0, c.kappa);
            let eta = c.eta + c.kappa;
            for (members, e_set, lower) in [(&c.s, &c.e_set, true), (&c.s_prime, &c.e_prime_set, false)] {
                for &n in members {
                    ensure(n < 10_000, format!("{tag}: row {n} beyond horizon"))?;
                    let row = a.row(n);
                    let ax = transform(&a, &shifted, n);
                    if lower {
                        ensure(ax >= eta - eps - 1e-12, format!("{tag}: A_{n}x = {ax}"))?;
                    } else {
                        ensure(ax <= eta + eps + 1e-12, format!("{tag}: A_{n}x = {ax}"))?;
                    }
                    let neg: f64 = row.entries().map(|(_, v)| (-v).max(0.0)).sum();
                    let outside: f64 = row.entries().filter(|&(k, _)| !e_set.contains(k)).map(|(_, v)| v.max(0.0)).sum();
                    ensure(neg <= 2.0 * c.delta && outside <= 2.0 * c.delta, format!("{tag}: row {n} masses {neg} {outside}"))?;
                    rows += 1;
                }
            }
        }
    }
    Ok(format!("4 certificates hold; both mass bounds rechecked on {rows} rows below 10^4"))
}

fn criterion_7() -> Outcome {
    let cfg = CheckConfig::default();
    let pairs = [
        (Ideal::fin(), Ideal::fin()),
        (Ideal::density_zero(), Ideal::density_zero()),
        (fin_oplus_evens(), Ideal::fin()),
    ];
    let mut agree = 0;
    let mut satisfied = 0;
    for index in 0..20 {
        let a = random_nonnegative(7, index);
        ensure(a.is_nonnegative_below(1_000).is_ok(), format!("{} has a negative entry", a.label()))?;
        for (i, j) in &pairs {
            let family = TestFamily::default_for(i, 7);
            let leo = leo_check(&a, i, j, &family, &cfg).map_err(|e| e.to_string())?;
            let cfo = cfo_check(&a, i, j, &family, &cfg).map_err(|e| e.to_string())?;
            ensure(
                leo.status == cfo.status,
                format!("{} {i}/{j}: leo {:?} cfo {:?}", a.label(), leo.status, cfo.status),
            )?;
            agree += 1;
            if i.is_fin() && j.is_fin() {
                let allen = allen_check(&a, &family, &cfg).map_err(|e| e.to_string())?;
                ensure(
                    allen.status == leo.status,
                    format!("{}: allen {:?} leo {:?}", a.label(), allen.status, leo.status),
                )?;
                satisfied += usize::from(allen.status == Status::Satisfied);
            }
        }
    }
    Ok(format!(
        "leo = cfo on {agree} (matrix, pair) cases; allen = leo on 20 matrices at Fin/Fin ({satisfied} Satisfied)"
    ))
}

fn criterion_8() -> Outcome {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(configs_dir()).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e == "json") {
            names.push(path);
        }
    }
    names.sort();
    ensure(names.len() >= 7, format!("only {} bundled configs", names.len()))?;
    for path in &names {
        let cfg = ExperimentConfig::from_file(path.to_str().unwrap()).map_err(|e| e.to_string())?;
        let a = run_suite(&cfg).map_err(|e| e.to_string())?;
        let b = run_suite(&cfg).map_err(|e| e.to_string())?;
        for format in [OutputFormat::Json, OutputFormat::Csv] {
            let (ra, rb) = (render(&a, format).map_err(|e| e.to_string())?, render(&b, format).map_err(|e| e.to_string())?);
            ensure(ra == rb, format!("{} differs between runs ({format:?})", path.display()))?;
        }
    }
    Ok(format!("{} bundled configs give byte-identical JSON and CSV on repeat", names.len()))
}

/// Each bundled config reproduces its criterion from a single command.
fn bundled_configs() -> Outcome {
    let expect = [
        ("acc1_oracle.json", 0),
        ("acc2_cesaro_st.json", 0),
        ("knopp.json", 1),
        ("rk_selection.json", 0),
        ("acc5_stability.json", 0),
        ("acc6_certificate.json", 0),
    ];
    for (name, code) in expect {
        let cfg = ExperimentConfig::from_file(configs_dir().join(name).to_str().unwrap()).map_err(|e| e.to_string())?;
        let bundle = run_suite(&cfg).map_err(|e| e.to_string())?;
        ensure(bundle.exit_code == code, format!("{name}: exit code {} (want {code})", bundle.exit_code))?;
    }
    let knopp = run_suite(&ExperimentConfig::from_file(configs_dir().join("knopp.json").to_str().unwrap()).unwrap()).unwrap();
    let allen = knopp.items.iter().find(|i| i.kind == "allen").ok_or("no allen item")?;
    ensure(allen.detail["witness"]["set"] == "squares", format!("knopp witness {}", allen.detail["witness"]))?;
    let rk = run_suite(&ExperimentConfig::from_file(configs_dir().join("rk_selection.json").to_str().unwrap()).unwrap()).unwrap();
    let eq = rk.items.iter().find(|i| i.kind == "core_equality").ok_or("no equality item")?;
    ensure(
        eq.detail["max_deviation"].as_f64().is_some_and(|d| d <= 1e-2),
        format!("rk-selection deviation {}", eq.detail["max_deviation"]),
    )?;
    for row in eq.detail["rows"].as_array().ok_or("no rows")? {
        let label = row["label"].as_str().unwrap_or_default();
        let structured = corpus_entry(label).is_some_and(|x| x.is_structured());
        ensure(
            !structured || row["deviation"] == 0.0,
            format!("rk-selection {label}: deviation {}", row["deviation"]),
        )?;
    }
    Ok(format!("{} configs give their expected exit codes", expect.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 core representation", criterion_1),
        ("2 Cesaro regularity", criterion_2),
        ("3 Knopp core failure of Cesaro", criterion_3),
        ("4 RK construction", criterion_4),
        ("5 core stability", criterion_5),
        ("6 sufficiency certificate", criterion_6),
        ("7 checker coherence", criterion_7),
        ("8 determinism", criterion_8),
        ("bundled configs", bundled_configs),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}


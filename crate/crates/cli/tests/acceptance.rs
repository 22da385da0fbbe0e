//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! hard failure. Run with `cargo test -p nnround-cli --test acceptance`.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use nnround_cli::report::{PROJECTION_CSV, SCORES_CSV, TALLY_CSV};
use nnround_cli::{check_winner_fixture, emit_reports, run_grid, EvalConfig, GridOutcome};
use nnround_core::fixtures::{
    parse_winner_fixture, tally_all, tally_by_pair, REFERENCE_WINNER_TABLES,
};
use nnround_core::{
    achieved_percentage, build_index_map, format_percent, lower_bound, margin_of_error, mse,
    resize_nn, round_value, ssim, PixelBuffer, RoundingRule, ScalePair, SsimParams, Z_95,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use RoundingRule::*;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ac1_rounding() -> Check {
    let inputs = [11.5, 12.5, -11.5, -12.5];
    let table: [(RoundingRule, [i64; 4]); 5] = [
        (HalfToEven, [12, 12, -12, -12]),
        (HalfAwayFromZero, [12, 13, -12, -13]),
        (TowardZero, [11, 12, -11, -12]),
        (Ceil, [12, 13, -11, -12]),
        (Floor, [11, 12, -12, -13]),
    ];
    let mut cells = 0;
    for (rule, row) in table {
        for (x, want) in inputs.into_iter().zip(row) {
            let got = round_value(x, rule).map_err(|e| e.to_string())?;
            ensure(got == want, || format!("{rule}({x}) = {got}, want {want}"))?;
            cells += 1;
        }
    }
    Ok(format!("{cells}/20 cells"))
}

fn ac2_index_map() -> Check {
    let pair = ScalePair::new(4, 7).map_err(|e| e.to_string())?;
    let columns = [
        (Floor, [1, 1, 1, 2, 2, 3, 4]),
        (Ceil, [1, 2, 2, 3, 3, 4, 4]),
        (HalfAwayFromZero, [1, 1, 2, 2, 3, 3, 4]),
    ];
    for (rule, want) in columns {
        let got: Vec<u32> = build_index_map(pair, rule).src_indices().collect();
        ensure(got == want, || {
            format!("{rule} column {got:?}, want {want:?}")
        })?;
    }
    let floor = build_index_map(pair, Floor);
    let first = floor.entries()[0];
    ensure(
        first.rounded == 0 && first.src_index == 1 && first.clamped && floor.clamp_count() == 1,
        || format!("floor at dst 1: {first:?}"),
    )?;
    let strip = PixelBuffer::gray(4, 1, b"ABCD".to_vec()).map_err(|e| e.to_string())?;
    let out = resize_nn(&strip, 7, 1, Ceil).map_err(|e| e.to_string())?;
    ensure(out.samples() == b"ABBCCDD", || {
        format!("strip {:?}", String::from_utf8_lossy(out.samples()))
    })?;
    Ok("floor/ceil/round columns, clamp flag, strip ABBCCDD".into())
}

fn ac3_ratio_two() -> Check {
    let start = Instant::now();
    for src in 1..=64u32 {
        let pair = ScalePair::new(src, 2 * src).map_err(|e| e.to_string())?;
        let (c, r) = (
            build_index_map(pair, Ceil),
            build_index_map(pair, HalfAwayFromZero),
        );
        ensure(c.same_indices(&r), || {
            format!("index maps differ at src {src}")
        })?;
    }

    let images = (
        1usize..=64,
        1usize..=64,
        prop_oneof![Just(1usize), Just(3usize)],
    )
        .prop_flat_map(|(w, h, c)| {
            proptest::collection::vec(any::<u8>(), w * h * c)
                .prop_map(move |s| PixelBuffer::new(w, h, c, s).unwrap())
        });
    let mut runner = TestRunner::new(Config {
        cases: 96,
        failure_persistence: None,
        ..Config::default()
    });
    let compared_ssim = Cell::new(0u32);
    let result = runner.run(&images, |img| {
        let (w, h) = (2 * img.width() as u32, 2 * img.height() as u32);
        let c = resize_nn(&img, w, h, Ceil).unwrap();
        let r = resize_nn(&img, w, h, HalfAwayFromZero).unwrap();
        prop_assert_eq!(c.samples(), r.samples());
        let reference = resize_nn(&img, w, h, Floor).unwrap();
        prop_assert_eq!(mse(&reference, &c).unwrap(), mse(&reference, &r).unwrap());
        if let (Ok(sc), Ok(sr)) = (
            ssim(&reference, &c, &SsimParams::default()),
            ssim(&reference, &r, &SsimParams::default()),
        ) {
            prop_assert_eq!(sc.to_bits(), sr.to_bits());
            compared_ssim.set(compared_ssim.get() + 1);
        }
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "src 1..=64 maps identical; 96 random images identical, MSE tie, SSIM tie on {}; {secs:.2}s",
        compared_ssim.get()
    ))
}

fn ac4_margin() -> Check {
    let expected = [(800, 6.93), (8_000, 7.67), (80_000, 7.74), (800_000, 7.75)];
    let mut margins = Vec::new();
    for (population, want) in expected {
        let m = margin_of_error(160, population, 0.5, Z_95).map_err(|e| e.to_string())? * 100.0;
        ensure((m - want).abs() <= 0.005, || {
            format!("N={population}: {m:.4}%, want {want}%")
        })?;
        margins.push(format!("{m:.3}%"));
    }
    let m = margin_of_error(160, 800_000, 0.5, Z_95).map_err(|e| e.to_string())?;
    for (p_hat, want) in [(0.7875, "71%"), (0.35, "27.25%"), (0.225, "14.75%")] {
        let got = format_percent(lower_bound(p_hat, m));
        ensure(got == want, || {
            format!("lower bound of {p_hat}: {got}, want {want}")
        })?;
    }
    Ok(format!(
        "margins {}; lower bounds 71%, 27.25%, 14.75%",
        margins.join(", ")
    ))
}

fn ac5_fixture() -> Check {
    let rows = parse_winner_fixture(REFERENCE_WINNER_TABLES).map_err(|e| e.to_string())?;
    let want = [
        ("1&2", [7, 27, 10]),
        ("3&4", [6, 25, 12]),
        ("5&6", [7, 24, 11]),
        ("7&8", [9, 26, 12]),
        ("9&10", [7, 24, 11]),
    ];
    let per_pair = tally_by_pair(&rows, &[Floor, Ceil, HalfAwayFromZero]);
    for (pair, counts) in want {
        let t = per_pair
            .iter()
            .find(|(p, _)| p == pair)
            .map(|(_, t)| t)
            .ok_or_else(|| format!("pair {pair} missing"))?;
        let got = [Floor, Ceil, HalfAwayFromZero].map(|r| t.achieved(r));
        ensure(got == counts, || {
            format!("pair {pair}: {got:?}, want {counts:?}")
        })?;
    }
    let total = tally_all(&rows);
    let mut summary = Vec::new();
    for (rule, n, pct) in [
        (Ceil, 126, "78.75%"),
        (HalfAwayFromZero, 56, "35%"),
        (Floor, 36, "22.5%"),
    ] {
        let got = total.achieved(rule);
        let p = format_percent(achieved_percentage(&total, rule).map_err(|e| e.to_string())?);
        ensure(got == n && total.targeted() == 160 && p == pct, || {
            format!("{rule}: {got}/{} {p}", total.targeted())
        })?;
        summary.push(format!("{}={n}/160 {pct}", rule.letter()));
    }
    let check = check_winner_fixture(REFERENCE_WINNER_TABLES, true).map_err(|e| e.to_string())?;
    ensure(check.passed, || check.lines.join("; "))?;
    Ok(format!("5 tables match; {}", summary.join(", ")))
}

/// Direct windowed SSIM: every 11x11 valid window, Gaussian weights from
/// scratch, no separable filtering.
fn brute_force_ssim(a: &PixelBuffer, b: &PixelBuffer) -> f64 {
    let (k, sigma) = (11usize, 1.5f64);
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut w = vec![0.0; k * k];
    let center = (k as f64 - 1.0) / 2.0;
    for i in 0..k {
        for j in 0..k {
            let (dy, dx) = (i as f64 - center, j as f64 - center);
            w[i * k + j] = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        }
    }
    let norm: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= norm);

    let px = |img: &PixelBuffer, x: usize, y: usize| img.get(x, y, 0) as f64;
    let (mut sum, mut count) = (0.0, 0usize);
    for y0 in 0..=a.height() - k {
        for x0 in 0..=a.width() - k {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    ma += w[i * k + j] * px(a, x0 + j, y0 + i);
                    mb += w[i * k + j] * px(b, x0 + j, y0 + i);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let da = px(a, x0 + j, y0 + i) - ma;
                    let db = px(b, x0 + j, y0 + i) - mb;
                    va += w[i * k + j] * da * da;
                    vb += w[i * k + j] * db * db;
                    cov += w[i * k + j] * da * db;
                }
            }
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    sum / count as f64
}

fn ac6_metrics() -> Check {
    let params = SsimParams::default();
    let x = PixelBuffer::gray(
        32,
        32,
        (0..32 * 32)
            .map(|i| ((i * 37 + i / 32 * 11) % 251) as u8)
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let e = |e: nnround_core::MetricError| e.to_string();
    ensure(mse(&x, &x).map_err(e)? == 0.0, || "mse(x,x) != 0".into())?;
    let s = ssim(&x, &x, &params).map_err(e)?;
    ensure((s - 1.0).abs() <= 1e-12, || format!("ssim(x,x) = {s}"))?;

    let mut worst = 0.0f64;
    for (u, v) in [(0u8, 255u8), (100, 140), (30, 30), (200, 17)] {
        let a = PixelBuffer::filled(32, 32, 1, u).map_err(|e| e.to_string())?;
        let b = PixelBuffer::filled(32, 32, 1, v).map_err(|e| e.to_string())?;
        let (u, v) = (u as f64, v as f64);
        let closed = (2.0 * u * v + params.c1()) / (u * u + v * v + params.c1());
        let brute = brute_force_ssim(&a, &b);
        let got = ssim(&a, &b, &params).map_err(e)?;
        worst = worst.max((closed - brute).abs()).max((got - brute).abs());
    }
    ensure(worst <= 1e-9, || {
        format!("constant-image deviation {worst:e}")
    })?;
    Ok(format!(
        "mse(x,x)=0, |ssim(x,x)-1|={:.1e}, constant images within {worst:.1e}",
        (s - 1.0).abs()
    ))
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("data")
}

fn desk_config(out: &Path) -> Result<EvalConfig, String> {
    let data = data_dir();
    let mut body = String::from(
        "ratios = [2, 3, 4, 5]\nrules = [\"floor\", \"ceil\", \"round\"]\n\
         [[metrics]]\nname = \"MSE\"\n[[metrics]]\nname = \"SSIM\"\n",
    );
    for (id, file) in [
        ("camera", "camera.pgm"),
        ("astronaut", "astronaut.ppm"),
        ("moon", "moon.pgm"),
    ] {
        let path = data.join(file);
        body.push_str(&format!(
            "[[images]]\nid = \"{id}\"\npath = {:?}\n",
            path.display().to_string()
        ));
    }
    let cfg = EvalConfig::from_toml(&body, out).map_err(|e| e.to_string())?;
    Ok(EvalConfig {
        output_dir: out.to_path_buf(),
        ..cfg
    })
}

fn desk_run(out: &Path) -> Result<GridOutcome, String> {
    let cfg = desk_config(out)?;
    let outcome = run_grid(&cfg).map_err(|e| e.to_string())?;
    emit_reports(&outcome, out).map_err(|e| e.to_string())?;
    Ok(outcome)
}

struct Desk {
    outcome: GridOutcome,
    identical: Result<(), String>,
    secs: f64,
}

fn desk() -> Result<Desk, String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let outcome = desk_run(&a)?;
    desk_run(&b)?;
    let secs = start.elapsed().as_secs_f64();
    let mut identical = Ok(());
    for f in [SCORES_CSV, TALLY_CSV, PROJECTION_CSV] {
        let (x, y) = (fs::read(a.join(f)), fs::read(b.join(f)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => identical = Err(format!("{f} differs between runs")),
        }
    }
    Ok(Desk {
        outcome,
        identical,
        secs,
    })
}

fn ac7a(d: &Desk) -> Check {
    d.identical.clone()?;
    let cases = d.outcome.cases.len();
    ensure(cases == 24 && d.outcome.exclusions.is_empty(), || {
        format!("{cases} cases, {} exclusions", d.outcome.exclusions.len())
    })?;
    ensure(d.secs < 60.0, || format!("two runs took {:.1}s", d.secs))?;
    Ok(format!(
        "scores/tally/projection CSVs byte-identical; 2 runs in {:.1}s",
        d.secs
    ))
}

fn ac7b(d: &Desk) -> Check {
    let mut n = 0;
    for c in d.outcome.cases.iter().filter(|c| c.case.ratio == 2) {
        let s = &c.case.scores;
        let (ceil, round) = (s.get(&Ceil), s.get(&HalfAwayFromZero));
        ensure(ceil.is_some() && ceil == round, || {
            format!(
                "{} {} ratio 2: ceil {ceil:?} vs round {round:?}",
                c.case.image_id,
                c.case.metric.name()
            )
        })?;
        n += 1;
    }
    ensure(n == 6, || format!("{n} ratio-2 cases"))?;
    Ok(format!("ceil == round on all {n} ratio-2 cases"))
}

fn ac7c(d: &Desk) -> (bool, String) {
    let mut misses = Vec::new();
    let mut counts: BTreeMap<char, u32> = BTreeMap::new();
    for c in &d.outcome.cases {
        match &c.winners {
            Some(w) => {
                for r in w.rules() {
                    *counts.entry(r.letter()).or_default() += 1;
                }
                if !w.contains(Ceil) {
                    misses.push(format!(
                        "{}/{}/r{}={w}",
                        c.case.image_id,
                        c.case.metric.name(),
                        c.case.ratio
                    ));
                }
            }
            None => misses.push(format!(
                "{}/{}/r{}=unranked",
                c.case.image_id,
                c.case.metric.name(),
                c.case.ratio
            )),
        }
    }
    let tally: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    if misses.is_empty() {
        (
            true,
            format!(
                "ceil wins all {} cases ({})",
                d.outcome.cases.len(),
                tally.join(" ")
            ),
        )
    } else {
        (
            false,
            format!("ceil missing from {}: {}", misses.len(), misses.join(", ")),
        )
    }
}

fn main() -> ExitCode {
    let mut hard_failures = 0;
    let mut report = |label: &str, result: Check| match result {
        Ok(detail) => println!("[PASS] {label}: {detail}"),
        Err(detail) => {
            hard_failures += 1;
            println!("[FAIL] {label}: {detail}");
        }
    };

    report("AC1 rounding golden suite", ac1_rounding());
    report("AC2 index-map golden suite", ac2_index_map());
    report("AC3 ratio-2 ceil/round equivalence", ac3_ratio_two());
    report("AC4 margin-of-error regression", ac4_margin());
    report("AC5 tally fixture regression", ac5_fixture());
    report("AC6 metric identities", ac6_metrics());
    match desk() {
        Ok(d) => {
            report("AC7a desk run reproducible", ac7a(&d));
            report("AC7b desk run ratio-2 ties", ac7b(&d));
            let (ok, detail) = ac7c(&d);
            let tag = if ok { "PASS" } else { "INFO" };
            println!("[{tag}] AC7c ceil in every MSE/SSIM winner set (soft): {detail}");
        }
        Err(e) => report("AC7 desk run", Err(e)),
    }
    let ac8 = ac5_fixture()
        .map(|_| "no-reference rows checked through the fixture tally only".to_string());
    report("AC8 no-reference rows via fixtures", ac8);

    if hard_failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{hard_failures} criterion check(s) failed");
        ExitCode::FAILURE
    }
}

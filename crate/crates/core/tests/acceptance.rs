//! Acceptance run: one PASS/FAIL/WAIVED line per criterion. Exits nonzero if
//! any criterion fails.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use common::{max_abs, oracle, Lcg};
use sncp::calibration::{self, QuantileRequest};
use sncp::forecast::{self, Family};
use sncp::ingest::{self, IngestOptions, Measure};
use sncp::segmentation::DetectConfig;
use sncp::simulation::{self, MultiCpConfig, SizePowerConfig};
use sncp::sn::{SnConfig, SnScanner};

const SEED: u64 = 0;

enum Outcome {
    Pass(String),
    Fail(String),
    Waived(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn critical_values() -> Outcome {
    let req = QuantileRequest {
        levels: vec![0.90, 0.95, 0.99],
        replications: 10_000,
        grid_n: 1000,
        ..QuantileRequest::default()
    };
    let table = calibration::limiting_quantiles(&req, SEED).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (level, reference) in [(0.90, 24.959), (0.95, 32.727), (0.99, 53.645)] {
        let q = table.get(level).unwrap();
        let rel = q / reference - 1.0;
        ok &= rel.abs() <= 0.06;
        detail.push(format!("{:.0}%: {q:.3} vs {reference} ({:+.1}%)", level * 100.0, rel * 100.0));
    }
    verdict(ok, detail.join(", "))
}

fn size_and_power() -> (Outcome, Outcome) {
    let cfg = SizePowerConfig {
        n: 500,
        rhos: vec![-0.5, -0.2, 0.0, 0.2, 0.5],
        alphas: vec![0.05],
        replications: 1000,
        seed: SEED,
        ..SizePowerConfig::default()
    };
    let rows = simulation::run_size_power(&cfg).unwrap();
    let mut size_ok = true;
    let mut size_detail = Vec::new();
    for (rho, reference) in [(-0.5, 0.022), (0.0, 0.036), (0.5, 0.057)] {
        let row = rows.iter().find(|r| r.rho == rho).unwrap();
        size_ok &= within(row.size, reference, 0.02);
        size_detail.push(format!("rho={rho}: {:.3} vs {reference}", row.size));
    }
    let power_ok = rows.iter().all(|r| r.power >= 0.99);
    let power_detail = rows
        .iter()
        .map(|r| format!("rho={}: {:.3}", r.rho, r.power))
        .collect::<Vec<_>>()
        .join(", ");
    (verdict(size_ok, size_detail.join(", ")), verdict(power_ok, power_detail))
}

fn multiple_change_points() -> Outcome {
    let cfg = MultiCpConfig {
        replications: 1000,
        rhos: vec![0.0, 0.5],
        detect: DetectConfig {
            seed: SEED,
            ..DetectConfig::default()
        },
        ..MultiCpConfig::default()
    };
    let rows = simulation::run_multi_cp(&cfg).unwrap();
    let m = simulation::multi_cp_spec().breakpoints.len();
    let (r0, r5) = (&rows[0], &rows[1]);
    let p0 = r0.share_off(m, Some(0));
    let p5 = r5.share_off(m, Some(0));
    let checks = [
        (within(p0, 0.950, 0.05), format!("rho=0 P(m=3) {p0:.3} vs 0.950±0.05")),
        (within(r0.ari, 0.849, 0.05), format!("ARI {:.3} vs 0.849±0.05", r0.ari)),
        (within(r0.dh, 4.141, 1.0), format!("dH {:.3} vs 4.141±1.0", r0.dh)),
        (within(p5, 0.808, 0.07), format!("rho=0.5 P(m=3) {p5:.3} vs 0.808±0.07")),
    ];
    let ok = checks.iter().all(|c| c.0);
    let detail = checks
        .iter()
        .map(|(ok, d)| format!("{d} [{}]", if *ok { "ok" } else { "miss" }))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(ok, detail)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = Lcg(SEED ^ 0x5eed);
    let cfg = SnConfig::default();
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    let mut mismatched_feasibility = 0usize;
    for _ in 0..50 {
        let n = 50 + rng.below(31);
        let y: Vec<f64> = (1..=n)
            .map(|t| {
                let s = t as f64 / n as f64;
                1.0 + 2.0 * s - if s > 0.5 { 3.0 * (s - 0.5) } else { 0.0 } + 0.3 * rng.normal()
            })
            .collect();
        let scanner = SnScanner::from_values(&y, &cfg).unwrap();
        let trim = cfg.d(n).max(1);
        for (k, _) in scanner.profile(1, n).unwrap() {
            let want = oracle(&y, 1, k, n, 1, trim);
            let got = scanner.evaluate(1, k, n);
            match (want, got) {
                (Some(w), Ok(g)) => {
                    let rel = |a: &[f64], b: &[f64]| {
                        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                        max_abs(&d) / max_abs(a).max(f64::MIN_POSITIVE)
                    };
                    worst = worst.max(rel(&w.contrast, &g.contrast));
                    let wv: Vec<f64> = w.normalizer.concat();
                    let gv: Vec<f64> = g.normalizer.concat();
                    worst = worst.max(rel(&wv, &gv));
                    if let Some(t) = w.statistic {
                        worst = worst.max((t - g.statistic).abs() / t.abs());
                        compared += 1;
                    }
                }
                (None, Err(_)) => {}
                _ => mismatched_feasibility += 1,
            }
        }
    }
    verdict(
        worst <= 1e-10 && mismatched_feasibility == 0 && compared > 0,
        format!("{compared} statistics, max relative deviation {worst:.2e}, feasibility mismatches {mismatched_feasibility}"),
    )
}

fn invariance_suite() -> Outcome {
    let mut rng = Lcg(SEED ^ 0x1a7);
    let cfg = SnConfig::default();
    let mut worst = 0.0f64;
    let mut tie_rule = true;
    for _ in 0..100 {
        let n = 40 + rng.below(100);
        let y: Vec<f64> = (1..=n)
            .map(|t| 2.0 * t as f64 / n as f64 + 0.5 * rng.normal())
            .collect();
        let c = if rng.uniform() < 0.5 { -1.0 } else { 1.0 } * 10f64.powf(4.0 * rng.uniform() - 2.0);
        let (a0, a1) = (40.0 * rng.uniform() - 20.0, 40.0 * rng.uniform() - 20.0);
        let shifted: Vec<f64> = y
            .iter()
            .enumerate()
            .map(|(i, v)| c * v + a0 + a1 * (i + 1) as f64 / n as f64)
            .collect();
        let base = SnScanner::from_values(&y, &cfg).unwrap();
        let other = SnScanner::from_values(&shifted, &cfg).unwrap();
        let (pa, pb) = (base.profile(1, n).unwrap(), other.profile(1, n).unwrap());
        for ((_, x), (_, z)) in pa.iter().zip(&pb) {
            if let (Some(x), Some(z)) = (x, z) {
                worst = worst.max((x - z).abs() / x.abs().max(z.abs()));
            }
        }
        let best = pa.iter().filter_map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let first = pa.iter().find(|p| p.1 == Some(best)).map(|p| p.0);
        tie_rule &= Some(base.max_stat(1, n).unwrap().k) == first;
    }
    let cps = [vec![], vec![50], vec![20, 60, 90]];
    let identities = cps.iter().all(|c| {
        simulation::hausdorff(c, c, 100) == (0, 0, 0) && simulation::adjusted_rand_index(c, c, 100) == 1.0
    });
    verdict(
        worst <= 1e-6 && tie_rule && identities,
        format!("max relative deviation {worst:.2e} over 100 cases, tie rule {tie_rule}, dH/ARI identities {identities}"),
    )
}

fn logistic_fit() -> Outcome {
    let n = 100;
    let truth = [12.0, 30.0, 0.8];
    let s: Vec<f64> = (41..=n).map(|t| t as f64 / n as f64).collect();
    let y: Vec<f64> = s.iter().map(|&x| truth[0] / (1.0 + (-truth[1] * (x - truth[2])).exp())).collect();
    let fit = forecast::fit_logistic(&s, &y).unwrap();
    let recovery = fit
        .params
        .iter()
        .zip(truth)
        .map(|(g, w)| (g / w - 1.0).abs())
        .fold(0.0, f64::max);
    let mut rng = Lcg(SEED ^ 0x106);
    let mut jac = 0.0f64;
    for _ in 0..10 {
        let p = [1.0 + 19.0 * rng.uniform(), 0.5 + 39.0 * rng.uniform(), 0.2 + rng.uniform()];
        let x = p[2] + (8.0 * rng.uniform() - 4.0) / p[1];
        let g = forecast::logistic_gradient(p, x);
        let f = |q: [f64; 3]| q[0] / (1.0 + (-q[1] * (x - q[2])).exp());
        for a in 0..3 {
            let (mut up, mut dn) = (p, p);
            up[a] += 1e-6;
            dn[a] -= 1e-6;
            let fd = (f(up) - f(dn)) / 2e-6;
            jac = jac.max((fd - g[a]).abs() / g[a].abs());
        }
    }
    verdict(
        fit.converged && recovery <= 1e-4 && jac <= 1e-5,
        format!("recovery error {recovery:.2e}, Jacobian vs finite differences {jac:.2e}"),
    )
}

fn snapshot_reproduction() -> Outcome {
    let Some(path) = std::env::var_os("SNCP_OWID_SNAPSHOT") else {
        return Outcome::Waived("SNCP_OWID_SNAPSHOT not set; no 2020-05-27 data snapshot supplied".into());
    };
    let path = PathBuf::from(path);
    let date = |m, d| NaiveDate::from_ymd_opt(2020, m, d).unwrap();
    let mut opts = IngestOptions::new("United States", Measure::Cases);
    opts.end_date = Some(date(5, 27));
    let cases = match ingest::ingest_csv(&path, &opts) {
        Ok(c) => c,
        Err(e) => return Outcome::Fail(format!("cannot read snapshot: {e}")),
    };
    let mut ok = cases.start_date == date(2, 22) && cases.len() == 96;
    let mut detail = vec![format!("US cases start {} n={}", cases.start_date, cases.len())];
    let table = [
        (date(4, 27), 65067.0),
        (date(5, 4), 77178.0),
        (date(5, 11), 88128.0),
        (date(5, 18), 97573.0),
        (date(5, 25), 103923.0),
    ];
    for (end, reference) in table {
        let mut opts = IngestOptions::new("United States", Measure::Deaths);
        opts.end_date = Some(end);
        let result = ingest::ingest_csv(&path, &opts)
            .and_then(|d| d.series())
            .and_then(|y| forecast::forecast_pipeline(&y, &DetectConfig::default(), Family::Logistic, 5, false));
        match result {
            Ok(f) => {
                let rel = f.count_rounded as f64 / reference - 1.0;
                ok &= rel.abs() <= 0.01;
                detail.push(format!("{end}: {} vs {reference} ({:+.2}%)", f.count_rounded, rel * 100.0));
            }
            Err(e) => {
                ok = false;
                detail.push(format!("{end}: {e}"));
            }
        }
    }
    verdict(ok, detail.join(", "))
}

fn determinism() -> Outcome {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let series = fixtures.join("toy_series.csv");
    let owid = fixtures.join("owid_toy.csv");
    let runs: Vec<Vec<String>> = vec![
        vec!["detect".into(), "--series".into(), series.display().to_string(), "--M".into(), "100".into(), "--B".into(), "200".into()],
        vec![
            "forecast".into(), "--input".into(), owid.display().to_string(), "--country".into(), "Testland".into(),
            "--measure".into(), "deaths".into(), "--end-date".into(), "2020-05-20".into(), "--M".into(), "100".into(),
            "--B".into(), "200".into(),
        ],
        vec!["simulate".into(), "--table".into(), "multi-cp".into(), "--reps".into(), "20".into(), "--rhos".into(), "0,0.5".into(), "--B".into(), "100".into()],
        vec!["simulate".into(), "--table".into(), "size-power".into(), "--reps".into(), "40".into(), "--n".into(), "200".into()],
        vec!["calibrate".into(), "--B".into(), "300".into(), "--grid-n".into(), "200".into()],
    ];
    let mut failures = Vec::new();
    for args in &runs {
        let first = tempfile::tempdir().unwrap();
        let second = tempfile::tempdir().unwrap();
        let mut argv = vec!["sncp".to_string()];
        argv.extend(args.iter().cloned());
        argv.extend(["--threads".into(), "1".into(), "--out-dir".into(), first.path().display().to_string()]);
        if sncp::cli::run(&argv) != 0 {
            failures.push(format!("{} did not run", args[0]));
            continue;
        }
        let replay = [
            "sncp".to_string(),
            "replay".into(),
            "--manifest".into(),
            first.path().join("manifest.json").display().to_string(),
            "--threads".into(),
            "4".into(),
            "--out-dir".into(),
            second.path().display().to_string(),
        ];
        if sncp::cli::run(&replay) != 0 {
            failures.push(format!("{} replay differs", args[0]));
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} commands replayed byte-identically with 1 and 4 workers", runs.len())
        } else {
            failures.join(", ")
        },
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Waived(d) => ("WAIVED", d),
        };
        println!("criterion {id} [{name}]: {tag} ({secs:.1}s) {detail}");
    };
    report(1, "critical values", &mut critical_values);
    let mut size_power = None;
    report(2, "size", &mut || {
        let (s, p) = size_and_power();
        size_power = Some(p);
        s
    });
    report(3, "size-adjusted power", &mut || size_power.take().unwrap());
    report(4, "multiple change-points", &mut multiple_change_points);
    report(5, "oracle equivalence", &mut oracle_equivalence);
    report(6, "invariance suite", &mut invariance_suite);
    report(7, "logistic least squares", &mut logistic_fit);
    report(8, "snapshot reproduction", &mut snapshot_reproduction);
    report(9, "determinism", &mut determinism);
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}

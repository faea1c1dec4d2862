//! Command-line front end. Every run writes its artifacts plus a
//! `manifest.json` from which `replay` can rebuild them.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use chrono::{Days, NaiveDate};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{acf_pacf, country_summary, fit_segments, pooled_residuals};
use crate::calibration::{self, NullNoise, QuantileRequest};
use crate::error::{Result, SncpError};
use crate::forecast::{forecast_pipeline, Family};
use crate::ingest::{self, IngestOptions, Measure};
use crate::regression::TimeSeries;
use crate::segmentation::{detect, DetectConfig};
use crate::simulation::{self, MultiCpConfig, SizePowerConfig};
use crate::sn::SnConfig;

pub const MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "sncp", version, about = "Self-normalized change-point detection for trending series")]
pub struct Cli {
    /// Directory receiving the artifacts.
    #[arg(long, global = true, default_value = "sncp-out")]
    pub out_dir: PathBuf,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Simulate critical values of the limiting scan statistic.
    Calibrate(CalibrateArgs),
    /// Detect change-points in one series.
    Detect(DetectArgs),
    /// Run a simulation table.
    Simulate(SimulateArgs),
    /// Segment-wise growth analysis of one or more countries.
    Analyze(AnalyzeArgs),
    /// Two-stage forecast from the last detected segment.
    Forecast(ForecastArgs),
    /// Re-run a recorded manifest and compare the artifacts.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SnArgs {
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.02)]
    pub delta: f64,
    /// Polynomial order of the trend.
    #[arg(long = "p", default_value_t = 1)]
    pub p: usize,
}

impl SnArgs {
    fn config(&self) -> Result<SnConfig> {
        SnConfig::new(self.epsilon, self.delta, self.p)
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct NotArgs {
    /// Number of random intervals.
    #[arg(long = "M", default_value_t = 300)]
    pub m: usize,
    /// Null replicates for the threshold.
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.95)]
    pub threshold_level: f64,
}

impl NotArgs {
    fn config(&self, sn: SnConfig) -> DetectConfig {
        DetectConfig {
            sn,
            intervals: self.m,
            replications: self.b,
            threshold_level: self.threshold_level,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureArg {
    Cases,
    Deaths,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Cases => Measure::Cases,
            MeasureArg::Deaths => Measure::Deaths,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct InputArgs {
    /// OWID-style CSV with date, location, total_cases and total_deaths.
    #[arg(long, conflicts_with = "series")]
    pub input: Option<PathBuf>,
    /// CSV with a `value` column (and optionally `date`), used as is.
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long, default_value = "cases")]
    pub measure: MeasureArg,
    #[arg(long, default_value_t = 20.0)]
    pub start_threshold: f64,
    #[arg(long)]
    pub end_date: Option<NaiveDate>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub sn: SnArgs,
    /// Replicates.
    #[arg(long = "B", default_value_t = 10_000)]
    pub b: usize,
    /// Length of the simulated surrogate series.
    #[arg(long, default_value_t = 1000)]
    pub grid_n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = calibration::DEFAULT_LEVELS)]
    pub levels: Vec<f64>,
    #[arg(long, default_value = "gaussian")]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseArg {
    Gaussian,
    Uniform,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub country: Option<String>,
    #[command(flatten)]
    pub sn: SnArgs,
    #[command(flatten)]
    pub not: NotArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableArg {
    SizePower,
    MultiCp,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub table: TableArg,
    /// Monte Carlo replicates per configuration.
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Series length of the size/power design.
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-0.5, -0.2, 0.0, 0.2, 0.5])]
    pub rhos: Vec<f64>,
    #[command(flatten)]
    pub sn: SnArgs,
    #[command(flatten)]
    pub not: NotArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Countries, comma separated or repeated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub country: Vec<String>,
    #[arg(long, default_value_t = 30)]
    pub max_lag: usize,
    #[command(flatten)]
    pub sn: SnArgs,
    #[command(flatten)]
    pub not: NotArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Snl,
    Snq,
    Snlg,
    Logistic,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub country: Option<String>,
    #[arg(long, default_value = "snlg")]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 5)]
    pub horizon: usize,
    /// OWID-style CSV holding the realised count `horizon` days after the
    /// last observation.
    #[arg(long, conflicts_with = "truth_value")]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub truth_value: Option<f64>,
    #[command(flatten)]
    pub sn: SnArgs,
    #[command(flatten)]
    pub not: NotArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub run: Command,
    pub artifacts: Vec<String>,
    /// Seconds since the Unix epoch; the only field that varies between replays.
    pub created_unix: u64,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cli.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(|e| SncpError::config(e.to_string()))?
    };
    pool.install(|| match &cli.command {
        Command::Replay(r) => replay(&r.manifest, &cli.out_dir),
        cmd => run_recorded(cmd, &cli.out_dir).map(|_| ()),
    })
}

/// Runs a command, writes its artifacts and the manifest; returns the
/// artifact names.
fn run_recorded(cmd: &Command, out_dir: &Path) -> Result<Vec<String>> {
    let cmd = absolutize(cmd)?;
    fs::create_dir_all(out_dir)?;
    let artifacts = match &cmd {
        Command::Calibrate(a) => calibrate_cmd(a, out_dir)?,
        Command::Detect(a) => detect_cmd(a, out_dir)?,
        Command::Simulate(a) => simulate_cmd(a, out_dir)?,
        Command::Analyze(a) => analyze_cmd(a, out_dir)?,
        Command::Forecast(a) => forecast_cmd(a, out_dir)?,
        Command::Replay(_) => return Err(SncpError::argument("a replay cannot be recorded")),
    };
    let manifest = Manifest {
        tool: "sncp".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        run: cmd,
        artifacts: artifacts.clone(),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
    };
    write_json(&out_dir.join(MANIFEST), &manifest)?;
    Ok(artifacts)
}

/// Input paths are stored absolute so a manifest replays from anywhere.
fn absolutize(cmd: &Command) -> Result<Command> {
    fn fix(p: &mut Option<PathBuf>) -> Result<()> {
        if let Some(path) = p {
            *path = fs::canonicalize(&*path)
                .map_err(|e| SncpError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
    let mut cmd = cmd.clone();
    match &mut cmd {
        Command::Detect(a) => {
            fix(&mut a.input.input)?;
            fix(&mut a.input.series)?;
        }
        Command::Analyze(a) => {
            fix(&mut a.input.input)?;
            fix(&mut a.input.series)?;
        }
        Command::Forecast(a) => {
            fix(&mut a.input.input)?;
            fix(&mut a.input.series)?;
            fix(&mut a.truth)?;
        }
        _ => {}
    }
    Ok(cmd)
}

fn replay(manifest_path: &Path, out_dir: &Path) -> Result<()> {
    let text = fs::read_to_string(manifest_path)
        .map_err(|e| SncpError::Io(format!("{}: {e}", manifest_path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let recorded_dir = manifest_path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(out_dir)?;
    if fs::canonicalize(recorded_dir)? == fs::canonicalize(out_dir)? {
        return Err(SncpError::argument("replay needs an --out-dir different from the recorded run"));
    }
    let produced = run_recorded(&manifest.run, out_dir)?;
    let mut differing = Vec::new();
    for name in &manifest.artifacts {
        let old = fs::read(recorded_dir.join(name))?;
        let new = if produced.contains(name) { fs::read(out_dir.join(name))? } else { Vec::new() };
        let same = old == new;
        println!("{name}: {}", if same { "identical" } else { "differs" });
        if !same {
            differing.push(name.clone());
        }
    }
    if differing.is_empty() {
        Ok(())
    } else {
        Err(SncpError::ReplayMismatch(differing.join(", ")))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    fs::write(path, body)?;
    Ok(())
}

fn write_text(path: &Path, body: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(body)?;
    Ok(())
}

/// A series together with a description of where it came from.
struct Loaded {
    series: TimeSeries,
    source: Value,
}

fn load_series(input: &InputArgs, country: Option<&str>) -> Result<Loaded> {
    match (&input.input, &input.series) {
        (Some(path), None) => {
            let country = country.ok_or_else(|| SncpError::argument("--country is required with --input"))?;
            let opts = ingest_options(input, country);
            let data = ingest::ingest_csv(path, &opts)?;
            Ok(Loaded {
                series: data.series()?,
                source: json!({
                    "country": data.country,
                    "measure": data.measure,
                    "threshold": data.threshold,
                    "start_date": data.start_date,
                    "end_date": data.dates.last(),
                    "n": data.len(),
                    "filled_dates": data.filled,
                    "warnings": data.warnings,
                }),
            })
        }
        (None, Some(path)) => {
            let series = ingest::read_value_series_file(path)?;
            Ok(Loaded {
                source: json!({ "n": series.len() }),
                series,
            })
        }
        _ => Err(SncpError::argument("exactly one of --input and --series is required")),
    }
}

fn ingest_options(input: &InputArgs, country: &str) -> IngestOptions {
    IngestOptions {
        country: country.to_string(),
        measure: input.measure.into(),
        threshold: input.start_threshold,
        end_date: input.end_date,
    }
}

fn labels_of(series: &TimeSeries, idx: &[usize]) -> Option<Vec<NaiveDate>> {
    series.labels()?;
    idx.iter().map(|&t| series.label(t)).collect()
}

fn calibrate_cmd(a: &CalibrateArgs, out: &Path) -> Result<Vec<String>> {
    let req = QuantileRequest {
        epsilon: a.sn.epsilon,
        delta: a.sn.delta,
        order: a.sn.p,
        levels: a.levels.clone(),
        replications: a.b,
        grid_n: a.grid_n,
        noise: match a.noise {
            NoiseArg::Gaussian => NullNoise::Gaussian,
            NoiseArg::Uniform => NullNoise::CenteredUniform,
        },
    };
    let mut stats = calibration::null_statistics(&req, a.seed)?;
    calibration::sort(&mut stats);
    let mut rows = Vec::new();
    let mut csv = String::from("level,quantile,standard_error,reference\n");
    for &level in &a.levels {
        let q = calibration::empirical_quantile(&stats, level);
        let se = calibration::quantile_standard_error(&stats, level);
        let reference = if a.sn.p == 1 {
            calibration::reference_critical_value(a.sn.epsilon, a.sn.delta, level)
        } else {
            None
        };
        csv.push_str(&format!(
            "{level},{q},{se},{}\n",
            reference.map_or(String::new(), |r| r.to_string())
        ));
        rows.push(json!({
            "level": level,
            "quantile": q,
            "standard_error": se,
            "reference": reference,
        }));
    }
    let body = json!({
        "epsilon": a.sn.epsilon,
        "delta": a.sn.delta,
        "p": a.sn.p,
        "replications": a.b,
        "grid_n": a.grid_n,
        "noise": req.noise,
        "seed": a.seed,
        "quantiles": rows,
    });
    write_json(&out.join("calibrate.json"), &body)?;
    write_text(&out.join("calibrate.csv"), csv.as_bytes())?;
    Ok(vec!["calibrate.json".into(), "calibrate.csv".into()])
}

fn detect_cmd(a: &DetectArgs, out: &Path) -> Result<Vec<String>> {
    let loaded = load_series(&a.input, a.country.as_deref())?;
    let cfg = a.not.config(a.sn.config()?);
    let report = detect(&loaded.series, &cfg)?;
    let body = json!({
        "source": loaded.source,
        "config": cfg,
        "n": report.n,
        "m_hat": report.m_hat,
        "tau_hat": report.tau_hat,
        "change_dates": labels_of(&loaded.series, &report.tau_hat),
        "zeta": report.zeta,
        "segments": report.segments,
        "detections": report.detections,
    });
    write_json(&out.join("detect.json"), &body)?;
    Ok(vec!["detect.json".into()])
}

fn simulate_cmd(a: &SimulateArgs, out: &Path) -> Result<Vec<String>> {
    let sn = a.sn.config()?;
    match a.table {
        TableArg::SizePower => {
            let cfg = SizePowerConfig {
                n: a.n,
                rhos: a.rhos.clone(),
                replications: a.reps,
                sn,
                seed: a.not.seed,
                ..SizePowerConfig::default()
            };
            let rows = simulation::run_size_power(&cfg)?;
            let mut buf = Vec::new();
            simulation::write_size_power_csv(&rows, &mut buf)?;
            write_text(&out.join("size_power.csv"), &buf)?;
            let body = json!({
                "config": cfg,
                "power_adjustment": "rejection rate against the empirical null quantile of matched replicates",
                "rows": rows,
            });
            write_json(&out.join("size_power.json"), &body)?;
            Ok(vec!["size_power.csv".into(), "size_power.json".into()])
        }
        TableArg::MultiCp => {
            let cfg = MultiCpConfig {
                replications: a.reps,
                rhos: a.rhos.clone(),
                detect: a.not.config(sn),
                ..MultiCpConfig::default()
            };
            let rows = simulation::run_multi_cp(&cfg)?;
            let true_m = simulation::multi_cp_spec().breakpoints.len();
            let mut buf = Vec::new();
            simulation::write_multi_cp_csv(&rows, true_m, &mut buf)?;
            write_text(&out.join("multi_cp.csv"), &buf)?;
            write_json(&out.join("multi_cp.json"), &json!({ "config": cfg, "rows": rows }))?;
            Ok(vec!["multi_cp.csv".into(), "multi_cp.json".into()])
        }
    }
}

fn analyze_cmd(a: &AnalyzeArgs, out: &Path) -> Result<Vec<String>> {
    if a.input.input.is_none() {
        return Err(SncpError::argument("analyze reads an --input country file"));
    }
    let cfg = a.not.config(a.sn.config()?);
    let mut reports = Vec::new();
    let mut table = String::from("country,s_max,s_cur,ratio,days_between,rho_hat\n");
    let mut slopes = String::from("x,y,group\n");
    let mut timing = String::from("x,y,group\n");
    for country in &a.country {
        let loaded = load_series(&a.input, Some(country))?;
        let y = &loaded.series;
        let report = detect(y, &cfg)?;
        let fits = fit_segments(y, &report.result(), a.sn.p)?;
        let resid = pooled_residuals(y, &fits)?;
        let summary = country_summary(&fits, &resid)?;
        let (acf, pacf) = if resid.len() > a.max_lag {
            let (acf, pacf) = acf_pacf(&resid, a.max_lag)?;
            (Some(acf), Some(pacf))
        } else {
            (None, None)
        };
        let name = loaded.source["country"].as_str().unwrap_or(country).to_string();
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_field(&name),
            summary.s_max,
            summary.s_cur,
            opt(summary.ratio),
            summary.days_between,
            opt(summary.rho_hat)
        ));
        slopes.push_str(&format!("{},{},{}\n", summary.s_max, summary.s_cur, csv_field(&name)));
        if let Some(r) = summary.ratio {
            timing.push_str(&format!("{},{},{}\n", summary.days_between, r, csv_field(&name)));
        }
        reports.push(json!({
            "country": name,
            "source": loaded.source,
            "m_hat": report.m_hat,
            "tau_hat": report.tau_hat,
            "change_dates": labels_of(y, &report.tau_hat),
            "zeta": report.zeta,
            "segments": fits,
            "summary": summary,
            "acf": acf,
            "pacf": pacf,
        }));
    }
    write_json(&out.join("analyze.json"), &json!({ "config": cfg, "countries": reports }))?;
    write_text(&out.join("analyze.csv"), table.as_bytes())?;
    write_text(&out.join("plot_smax_scur.csv"), slopes.as_bytes())?;
    write_text(&out.join("plot_days_ratio.csv"), timing.as_bytes())?;
    Ok(vec![
        "analyze.json".into(),
        "analyze.csv".into(),
        "plot_smax_scur.csv".into(),
        "plot_days_ratio.csv".into(),
    ])
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn forecast_cmd(a: &ForecastArgs, out: &Path) -> Result<Vec<String>> {
    let loaded = load_series(&a.input, a.country.as_deref())?;
    let y = &loaded.series;
    let cfg = a.not.config(a.sn.config()?);
    let (family, baseline) = match a.family {
        FamilyArg::Snl => (Family::Linear, false),
        FamilyArg::Snq => (Family::Quadratic, false),
        FamilyArg::Snlg => (Family::Logistic, false),
        FamilyArg::Logistic => (Family::Logistic, true),
    };
    let mut result = forecast_pipeline(y, &cfg, family, a.horizon, baseline)?;
    let target_date = y
        .label(y.len())
        .and_then(|d| d.checked_add_days(Days::new(a.horizon as u64)));
    let truth = match (&a.truth, a.truth_value) {
        (Some(path), _) => {
            let date = target_date.ok_or_else(|| SncpError::argument("--truth needs a dated series"))?;
            let country = a.country.as_deref().ok_or_else(|| SncpError::argument("--truth needs --country"))?;
            let mut opts = ingest_options(&a.input, country);
            opts.end_date = Some(date);
            let data = ingest::ingest_csv(path, &opts)?;
            match data.dates.last() {
                Some(&d) if d == date => Some(*data.counts.last().unwrap()),
                _ => return Err(SncpError::NotFound(format!("truth value on {date}"))),
            }
        }
        (None, v) => v,
    };
    if let Some(t) = truth {
        result = result.with_truth(t)?;
    }
    let body = json!({
        "source": loaded.source,
        "config": cfg,
        "family": a.family,
        "k": result.k,
        "target_date": target_date,
        "y_hat": result.y_hat,
        "count_hat": result.count_hat,
        "count_rounded": result.count_rounded,
        "rounding": "half-up",
        "truth": truth,
        "relative_error": result.relative_error,
        "fallback_to_quadratic": result.fallback,
        "change_points": result.change_points,
        "change_dates": labels_of(y, &result.change_points),
        "fit": result.fit,
    });
    write_json(&out.join("forecast.json"), &body)?;
    Ok(vec!["forecast.json".into()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run(["sncp", "frobnicate"]), 2);
        assert_eq!(run(["sncp", "detect", "--epsilon", "abc"]), 2);
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let cli = Cli::try_parse_from([
            "sncp", "simulate", "--table", "multi-cp", "--rhos", "-0.5,0", "--M", "50", "--B", "20",
        ])
        .unwrap();
        let text = serde_json::to_string(&cli.command).unwrap();
        let back: Command = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        match back {
            Command::Simulate(s) => {
                assert_eq!(s.rhos, vec![-0.5, 0.0]);
                assert_eq!((s.not.m, s.not.b), (50, 20));
            }
            _ => panic!("wrong command"),
        }
    }
}

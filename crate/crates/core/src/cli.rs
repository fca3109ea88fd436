//! The `podnet` command line.
//!
//! Exit status: 0 on success (or an accepted null hypothesis), 1 when a
//! t-test rejects, 2 on configuration or input errors, 3 when a simulation
//! runs out of its event budget.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{
    self, calibrate, load_measurements_path, pooled_t_test, predict_deploy_time, predict_total_time, summarize, Calibration,
    CalibrationError, SummaryStats, DEFAULT_ALPHA,
};
use crate::format::sig6;
use crate::k8s::{simulate_replications, K8sError, Scenario, SimResult};
use crate::planner::{recommend, PlanConfig, PlanError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "podnet", version, about = "Simulate, calibrate and plan container deployments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run replications of a scenario file.
    Simulate {
        config: PathBuf,
        /// Seed of the first replication; later ones use seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "max-events")]
        max_events: Option<u64>,
    },
    /// Build creation-time and overhead tables from a measurement CSV.
    Calibrate {
        measurements: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Pooled two-sample t-test. Exits 1 when the means differ.
    Ttest {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recommend a pods-per-container layout.
    Plan {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict deployment and total time from the closed-form model.
    Predict {
        containers: u64,
        pods: u64,
        machines: u64,
        /// Per-container creation time in seconds, or a `calibrate` JSON file.
        creation: String,
        /// Image download time in seconds.
        #[arg(default_value_t = 0.0)]
        download_s: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Written next to every output so a run can be repeated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<InputFile>,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub alpha: Option<f64>,
    pub max_events: Option<u64>,
    pub out: Option<String>,
    pub version: String,
    pub outputs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        RunManifest {
            command: command.into(),
            inputs: vec![],
            seed: None,
            replications: None,
            alpha: None,
            max_events: None,
            out: None,
            version: env!("CARGO_PKG_VERSION").into(),
            outputs: vec![],
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_CONFIG, message: message.to_string() }
    }
}

impl From<K8sError> for Failure {
    fn from(e: K8sError) -> Self {
        let code = match e {
            K8sError::Sim(podnet_petri::SimError::BudgetExceeded(_)) => EXIT_BUDGET,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<CalibrationError> for Failure {
    fn from(e: CalibrationError) -> Self {
        Failure::config(e)
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        Failure::config(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(e)
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> Outcome {
    match command {
        Command::Simulate { config, seed, reps, out, max_events } => cmd_simulate(&config, seed, reps, out.as_deref(), max_events, stdout),
        Command::Calibrate { measurements, out, alpha } => cmd_calibrate(&measurements, out.as_deref(), alpha, stdout),
        Command::Ttest { a, b, alpha, out } => cmd_ttest(&a, &b, alpha, out.as_deref(), stdout),
        Command::Plan { config, out } => cmd_plan(&config, out.as_deref(), stdout),
        Command::Predict { containers, pods, machines, creation, download_s, out } => {
            cmd_predict(containers, pods, machines, &creation, download_s, out.as_deref(), stdout)
        }
    }
}

fn read_input(path: &Path, manifest: &mut RunManifest) -> std::result::Result<Vec<u8>, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    manifest.inputs.push(InputFile { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
    Ok(bytes)
}

/// Collects output files and writes them with the manifest.
struct OutDir {
    dir: Option<PathBuf>,
    files: Vec<(String, Vec<u8>)>,
}

impl OutDir {
    fn new(dir: Option<&Path>) -> Self {
        OutDir { dir: dir.map(Path::to_path_buf), files: vec![] }
    }

    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        if self.dir.is_some() {
            self.files.push((name.into(), bytes.into()));
        }
    }

    fn finish(self, mut manifest: RunManifest) -> std::result::Result<(), Failure> {
        let Some(dir) = self.dir else { return Ok(()) };
        manifest.out = Some(dir.display().to_string());
        manifest.outputs = self.files.iter().map(|(n, _)| n.clone()).collect();
        manifest.outputs.sort();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, bytes).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        }
        std::fs::create_dir_all(&dir)?;
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

const STATS_HEADER: &str = "mean,std,count,ci_low,ci_high,alpha";

fn stats_row(s: &SummaryStats) -> String {
    format!("{},{},{},{},{},{}", sig6(s.mean), sig6(s.std), s.count, sig6(s.ci_low), sig6(s.ci_high), sig6(s.alpha))
}

/// Like `summarize`, but a single value gives a zero-width interval.
fn stats_of(values: &[f64], alpha: f64) -> Option<SummaryStats> {
    match values {
        [] => None,
        [v] => Some(SummaryStats { mean: *v, std: 0.0, count: 1, ci_low: *v, ci_high: *v, alpha }),
        _ => summarize(values, alpha).ok(),
    }
}

fn cmd_simulate(
    config: &Path,
    seed: Option<u64>,
    reps: Option<usize>,
    out: Option<&Path>,
    max_events: Option<u64>,
    stdout: &mut dyn Write,
) -> Outcome {
    let mut manifest = RunManifest::new("simulate");
    let text = read_input(config, &mut manifest)?;
    let text = String::from_utf8(text).map_err(|e| Failure::config(format!("{}: {e}", config.display())))?;
    let scenario = Scenario::from_json(&text)?;
    let deployment = scenario.deployment()?;
    let mut opts = scenario.run_options();
    if let Some(s) = seed {
        opts.seed = s;
    }
    if let Some(m) = max_events {
        opts.max_events = m;
    }
    let reps = reps.unwrap_or(scenario.run.replications);
    if reps == 0 {
        return Err(Failure::config("--reps must be >= 1"));
    }
    manifest.seed = Some(opts.seed);
    manifest.replications = Some(reps);
    manifest.max_events = Some(opts.max_events);

    let results: Vec<SimResult> =
        simulate_replications(&scenario.cluster, &deployment, &opts, reps).into_iter().collect::<Result<_, _>>()?;

    let mut files = OutDir::new(out);
    let (c, pods, n) = (deployment.containers, deployment.pods.len(), scenario.cluster.n());
    let mut series = String::from("replication,seed,C,pods,n,deploy_time_s,download_time_s,total_time_s\n");
    for (i, r) in results.iter().enumerate() {
        files.add(format!("replications/rep_{i:04}.json"), to_json(r));
        files.add(format!("traces/rep_{i:04}.ndjson"), r.trace.to_ndjson());
        let opt = |v: Option<f64>| v.map(sig6).unwrap_or_default();
        let _ = writeln!(
            series,
            "{i},{},{c},{pods},{n},{},{},{}",
            r.seed,
            opt(r.deploy_time_s),
            sig6(r.download_time_s),
            opt(r.total_time_s)
        );
    }
    files.add("series.csv", series);

    let alpha = DEFAULT_ALPHA;
    let metrics: [(&str, Vec<f64>); 4] = [
        ("deploy_time_s", results.iter().filter_map(|r| r.deploy_time_s).collect()),
        ("download_time_s", results.iter().map(|r| r.download_time_s).collect()),
        ("total_time_s", results.iter().filter_map(|r| r.total_time_s).collect()),
        ("termination_s", results.iter().flat_map(|r| r.termination_times()).collect()),
    ];
    let mut summary = format!("metric,{STATS_HEADER}\n");
    for (name, values) in &metrics {
        if let Some(s) = stats_of(values, alpha) {
            let _ = writeln!(summary, "{name},{}", stats_row(&s));
        }
    }
    files.add("summary.csv", summary.clone());
    stdout.write_all(summary.as_bytes())?;
    files.finish(manifest)?;
    Ok(EXIT_OK)
}

fn cmd_calibrate(measurements: &Path, out: Option<&Path>, alpha: f64, stdout: &mut dyn Write) -> Outcome {
    let mut manifest = RunManifest::new("calibrate");
    manifest.alpha = Some(alpha);
    read_input(measurements, &mut manifest)?;
    let samples = load_measurements_path(measurements)?;
    if samples.is_empty() {
        return Err(Failure::config(format!("{}: no measurements to calibrate", measurements.display())));
    }
    let cal = calibrate(&samples)?;

    let mut groups: std::collections::BTreeMap<_, Vec<f64>> = Default::default();
    for s in &samples {
        groups.entry((s.experiment.clone(), s.n, s.pods, s.containers, s.metric)).or_default().push(s.value);
    }
    #[derive(Serialize)]
    struct Row<'a> {
        experiment: &'a str,
        n: u32,
        pods: u32,
        containers: u32,
        metric: calibration::Metric,
        #[serde(flatten)]
        stats: SummaryStats,
    }
    let mut rows = Vec::new();
    let mut summary = format!("experiment,n,pods,containers,metric,{STATS_HEADER}\n");
    for ((exp, n, pods, c, metric), values) in &groups {
        let Some(stats) = stats_of(values, alpha) else { continue };
        let _ = writeln!(summary, "{exp},{n},{pods},{c},{metric},{}", stats_row(&stats));
        rows.push(Row { experiment: exp, n: *n, pods: *pods, containers: *c, metric: *metric, stats });
    }

    let mut series = String::from("rho,n,C,creation_s\n");
    if let Some(t) = &cal.table {
        for e in &t.entries {
            let _ = writeln!(series, "{},{},{},{}", sig6(e.rho), e.n, e.containers, sig6(e.creation_s));
        }
    }
    let mut overhead = String::from("rho,alpha\n");
    for p in &cal.overhead.points {
        let _ = writeln!(overhead, "{},{}", sig6(p.rho), sig6(p.alpha));
    }

    let mut files = OutDir::new(out);
    files.add("calibration.json", to_json(&cal));
    files.add("summary.csv", summary);
    files.add("summary.json", to_json(&rows));
    files.add("creation_series.csv", series);
    files.add("overhead.csv", overhead);
    stdout.write_all(to_json(&cal).as_bytes())?;
    files.finish(manifest)?;
    Ok(EXIT_OK)
}

/// Reads one side of a t-test: either a measurement CSV (all values of a
/// single metric) or a CSV with `mean,std,count` columns (first row).
pub fn load_sample(path: &Path, alpha: f64) -> calibration::Result<SummaryStats> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CalibrationError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let first = text.lines().next().unwrap_or_default();
    let cols: Vec<&str> = first.split(',').map(str::trim).collect();
    if cols == calibration::HEADER {
        let samples = calibration::load_measurements(text.as_bytes())?;
        if let Some(s) = samples.iter().find(|s| s.metric != samples[0].metric) {
            return Err(CalibrationError::Schema(format!(
                "{}: mixes {} and {}",
                path.display(),
                samples[0].metric,
                s.metric
            )));
        }
        let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
        return summarize(&values, alpha);
    }
    let idx = |name: &str| cols.iter().position(|c| *c == name);
    let (Some(m), Some(sd), Some(k)) = (idx("mean"), idx("std"), idx("count")) else {
        return Err(CalibrationError::Schema(format!(
            "{}: expected the measurement header or mean,std,count columns",
            path.display()
        )));
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let Some(row) = rdr.records().next() else {
        return Err(CalibrationError::InsufficientData { needed: 2, got: 0 });
    };
    let row = row.map_err(|e| CalibrationError::Schema(e.to_string()))?;
    let num = |i: usize| -> calibration::Result<f64> {
        row.get(i)
            .unwrap_or_default()
            .parse::<f64>()
            .map_err(|e| CalibrationError::Schema(format!("{}: column {}: {e}", path.display(), cols[i])))
    };
    let count = num(k)?;
    if count < 0.0 || count.fract() != 0.0 {
        return Err(CalibrationError::Schema(format!("{}: count must be a whole number", path.display())));
    }
    let std = num(sd)?;
    if std < 0.0 {
        return Err(CalibrationError::NegativeValue { line: 2, reason: "std must be >= 0".into() });
    }
    SummaryStats::from_moments(num(m)?, std, count as usize, alpha)
}

fn cmd_ttest(a: &Path, b: &Path, alpha: f64, out: Option<&Path>, stdout: &mut dyn Write) -> Outcome {
    let mut manifest = RunManifest::new("ttest");
    manifest.alpha = Some(alpha);
    read_input(a, &mut manifest)?;
    read_input(b, &mut manifest)?;
    let sa = load_sample(a, alpha)?;
    let sb = load_sample(b, alpha)?;
    let decision = pooled_t_test(&sa, &sb, alpha)?;
    let json = to_json(&decision);
    stdout.write_all(json.as_bytes())?;
    let mut files = OutDir::new(out);
    files.add("ttest.json", json);
    files.finish(manifest)?;
    Ok(if decision.reject_h0 { EXIT_REJECT } else { EXIT_OK })
}

fn cmd_plan(config: &Path, out: Option<&Path>, stdout: &mut dyn Write) -> Outcome {
    let mut manifest = RunManifest::new("plan");
    let text = read_input(config, &mut manifest)?;
    let text = String::from_utf8(text).map_err(|e| Failure::config(format!("{}: {e}", config.display())))?;
    let cfg = PlanConfig::from_json(&text)?;
    if let Some(f) = &cfg.calibration_file {
        let base = config.parent().unwrap_or(Path::new("."));
        read_input(&base.join(f), &mut manifest)?;
    }
    let input = cfg.into_input(config.parent().unwrap_or(Path::new(".")))?;
    let plan = recommend(&input)?;
    let json = to_json(&plan);
    stdout.write_all(json.as_bytes())?;
    let mut files = OutDir::new(out);
    files.add("plan.json", json);
    files.add("plan.txt", plan.explain());
    files.finish(manifest)?;
    Ok(EXIT_OK)
}

fn cmd_predict(c: u64, pods: u64, n: u64, creation: &str, download_s: f64, out: Option<&Path>, stdout: &mut dyn Write) -> Outcome {
    let mut manifest = RunManifest::new("predict");
    if c == 0 || pods == 0 || n == 0 || pods > c {
        return Err(Failure::config(format!("need 1 <= pods <= C and n >= 1, got C={c} pods={pods} n={n}")));
    }
    if !(download_s >= 0.0 && download_s.is_finite()) {
        return Err(Failure::config(format!("download time must be >= 0, got {download_s}")));
    }
    let tc = match creation.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => v,
        Ok(v) => return Err(Failure::config(format!("creation time must be >= 0, got {v}"))),
        Err(_) => {
            let path = Path::new(creation);
            let bytes = read_input(path, &mut manifest)?;
            let cal: Calibration =
                serde_json::from_slice(&bytes).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            let table = cal.table.ok_or_else(|| Failure::config(format!("{}: no creation-time table", path.display())))?;
            let to32 = |v: u64| u32::try_from(v).unwrap_or(u32::MAX);
            table.creation_time(pods as f64 / c as f64, to32(n), to32(c))?
        }
    };
    let deploy = predict_deploy_time(c, pods, n, tc);
    let total = predict_total_time(deploy, download_s);
    let text = format!("C,pods,n,creation_s,deploy_time_s,download_time_s,total_time_s\n{c},{pods},{n},{},{},{},{}\n", sig6(tc), sig6(deploy), sig6(download_s), sig6(total));
    stdout.write_all(text.as_bytes())?;
    let mut files = OutDir::new(out);
    files.add("prediction.csv", text);
    files.finish(manifest)?;
    Ok(EXIT_OK)
}

//! Trials, CSV rows, sweeps and certificate round trips.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dhc::dhc::{dhc1, dhc2, DhcOptions};
use dhc::graph::{generate_gnp, GnpParams, Graph};
use dhc::rotation::{run_dra, run_dra_with_transcript};
use dhc::runtime::{derive_seed, CongestStats, SimulationReport};
use dhc::upcast::{upcast, UpcastOptions};
use dhc::verify::{check_certificate, Certificate};
use thiserror::Error;

use crate::config::{Algo, ConfigError, ExperimentConfig};

pub const HEADER: [&str; 17] = [
    "algo",
    "n",
    "p",
    "c",
    "delta",
    "seed",
    "trial",
    "success",
    "rounds",
    "steps",
    "messages",
    "phase1_rounds",
    "phase2_rounds",
    "peak_mem_max_node",
    "peak_mem_root",
    "failure_reason",
    "wall_ms",
];

/// Index of `wall_ms`, the one column that differs between identical runs.
pub const WALL_MS_COLUMN: usize = 16;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: header does not match the result columns")]
    Header { path: PathBuf },
    #[error("{path} row {row}: {msg}")]
    Row { path: PathBuf, row: usize, msg: String },
    #[error("a sweep needs at least two values of n")]
    SingleSize,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Csv { path: path.to_path_buf(), source }
}

/// One CSV line: a trial, summed over its attempts.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub algo: Algo,
    pub n: usize,
    pub p: f64,
    pub c: Option<f64>,
    pub delta: f64,
    /// Graph seed of this trial: the base seed plus `trial`.
    pub seed: u64,
    pub trial: u32,
    pub success: bool,
    pub rounds: u64,
    pub steps: u64,
    pub messages: u64,
    pub phase1_rounds: u64,
    pub phase2_rounds: u64,
    pub peak_mem_max_node: u64,
    pub peak_mem_root: u64,
    pub failure_reason: String,
    pub wall_ms: u64,
}

impl ResultRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.algo.to_string(),
            self.n.to_string(),
            self.p.to_string(),
            self.c.map(|c| c.to_string()).unwrap_or_default(),
            self.delta.to_string(),
            self.seed.to_string(),
            self.trial.to_string(),
            self.success.to_string(),
            self.rounds.to_string(),
            self.steps.to_string(),
            self.messages.to_string(),
            self.phase1_rounds.to_string(),
            self.phase2_rounds.to_string(),
            self.peak_mem_max_node.to_string(),
            self.peak_mem_root.to_string(),
            self.failure_reason.clone(),
            self.wall_ms.to_string(),
        ]
    }

    pub fn from_record(rec: &csv::StringRecord) -> Result<ResultRow, String> {
        if rec.len() != HEADER.len() {
            return Err(format!("expected {} fields, got {}", HEADER.len(), rec.len()));
        }
        fn num<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, String> {
            rec[i].parse().map_err(|_| format!("bad {} {:?}", HEADER[i], &rec[i]))
        }
        Ok(ResultRow {
            algo: rec[0].parse().map_err(|e: ConfigError| e.to_string())?,
            n: num(rec, 1)?,
            p: num(rec, 2)?,
            c: if rec[3].is_empty() { None } else { Some(num(rec, 3)?) },
            delta: num(rec, 4)?,
            seed: num(rec, 5)?,
            trial: num(rec, 6)?,
            success: num(rec, 7)?,
            rounds: num(rec, 8)?,
            steps: num(rec, 9)?,
            messages: num(rec, 10)?,
            phase1_rounds: num(rec, 11)?,
            phase2_rounds: num(rec, 12)?,
            peak_mem_max_node: num(rec, 13)?,
            peak_mem_root: num(rec, 14)?,
            failure_reason: rec[15].to_string(),
            wall_ms: num(rec, 16)?,
        })
    }
}

/// One trial's row plus what it produced.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub row: ResultRow,
    pub certificate: Option<Certificate>,
    /// Per attempt, when transcripts were requested.
    pub transcripts: Vec<Vec<String>>,
    /// Bandwidth accounting of every attempt.
    pub congest: Vec<CongestStats>,
}

struct Attempt {
    report: SimulationReport,
    certificate: Option<Certificate>,
    transcript: Option<Vec<String>>,
    root: u32,
}

fn attempt(cfg: &ExperimentConfig, g: &Graph, seed: u64) -> Attempt {
    let transcript = cfg.transcript.is_some();
    match cfg.algo {
        Algo::Dra => {
            let r = if transcript {
                run_dra_with_transcript(g, seed, cfg.step_mult)
            } else {
                run_dra(g, seed, cfg.step_mult)
            };
            Attempt { report: r.report, certificate: r.certificate, transcript: r.transcript, root: 0 }
        }
        Algo::Dhc1 | Algo::Dhc2 => {
            let opts = DhcOptions { step_mult: cfg.step_mult, transcript, ..DhcOptions::default() };
            let r = if cfg.algo == Algo::Dhc1 { dhc1(g, seed, &opts) } else { dhc2(g, seed, cfg.delta, &opts) };
            Attempt { report: r.report, certificate: r.certificate, transcript: r.transcript, root: 0 }
        }
        Algo::Upcast => {
            let opts = UpcastOptions { c_prime: cfg.c_prime, step_mult: cfg.step_mult, transcript };
            let r = upcast(g, seed, &opts);
            Attempt { report: r.report, certificate: r.certificate, transcript: r.transcript, root: r.trace.root }
        }
    }
}

/// Rounds of the second phase: the rotation, the merging or hypernode
/// stage, or the solve and downcast at the root.
fn phase2_rounds(algo: Algo, report: &SimulationReport) -> u64 {
    match algo {
        Algo::Dra => report.phase("dra"),
        Algo::Dhc1 | Algo::Dhc2 => report.phases_with_prefix("phase2."),
        Algo::Upcast => report.phase("upcast.solve") + report.phase("upcast.assign"),
    }
}

/// The generated graph of trial `trial`.
pub fn trial_graph(cfg: &ExperimentConfig, trial: u32) -> Result<Graph, ExperimentError> {
    let p = cfg.validate()?;
    let params = GnpParams::new(cfg.n, p, cfg.seed + trial as u64)
        .map_err(|e| ExperimentError::Config(ConfigError::BadValue { key: "p".into(), value: e.to_string() }))?;
    Ok(generate_gnp(params))
}

/// Runs trial `trial`: attempt 0 uses the trial seed, retry `a` uses
/// `derive_seed(trial seed, a)`, all on the same graph.
///
/// # Panics
///
/// If an algorithm reports success with a certificate the checker rejects.
pub fn run_trial(cfg: &ExperimentConfig, trial: u32) -> Result<TrialOutcome, ExperimentError> {
    let p = cfg.validate()?;
    let g = trial_graph(cfg, trial)?;
    let seed = cfg.seed + trial as u64;
    let start = Instant::now();
    let mut row = ResultRow {
        algo: cfg.algo,
        n: cfg.n,
        p,
        c: cfg.c(),
        delta: cfg.delta,
        seed,
        trial,
        success: false,
        rounds: 0,
        steps: 0,
        messages: 0,
        phase1_rounds: 0,
        phase2_rounds: 0,
        peak_mem_max_node: 0,
        peak_mem_root: 0,
        failure_reason: String::new(),
        wall_ms: 0,
    };
    let mut transcripts = Vec::new();
    let mut congest = Vec::new();
    let mut certificate = None;
    for a in 0..=cfg.retries {
        let s = if a == 0 { seed } else { derive_seed(seed, a as u64) };
        let at = attempt(cfg, &g, s);
        let rep = &at.report;
        if let Some(c) = &at.certificate {
            assert!(rep.success);
            if let Err(e) = check_certificate(&g, c) {
                panic!("{} reported success on trial {trial} but the certificate is rejected: {e}", cfg.algo);
            }
        }
        let p2 = phase2_rounds(cfg.algo, rep);
        row.rounds += rep.rounds;
        row.steps += rep.steps;
        row.messages += rep.messages;
        row.phase1_rounds += rep.rounds - p2;
        row.phase2_rounds += p2;
        row.peak_mem_max_node = row.peak_mem_max_node.max(rep.max_peak_memory());
        row.peak_mem_root = row.peak_mem_root.max(rep.peak_memory_words.get(at.root as usize).copied().unwrap_or(0));
        row.success = rep.success;
        row.failure_reason = rep.failure_reason.map(|f| f.to_string()).unwrap_or_default();
        transcripts.extend(at.transcript);
        congest.push(rep.congest.clone());
        if rep.success {
            certificate = at.certificate;
            break;
        }
    }
    row.wall_ms = start.elapsed().as_millis() as u64;
    Ok(TrialOutcome { row, certificate, transcripts, congest })
}

/// All trials of `cfg`, in trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialOutcome>, ExperimentError> {
    cfg.validate()?;
    (0..cfg.trials).map(|t| run_trial(cfg, t)).collect()
}

fn certs_dir(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".certs");
    PathBuf::from(s)
}

/// Certificate file of the data row with 0-based index `row`.
pub fn cert_path(csv: &Path, row: usize) -> PathBuf {
    certs_dir(csv).join(format!("row{row}.txt"))
}

fn read_rows(path: &Path) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = rdr.headers().map_err(csv_err(path))?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(ExperimentError::Header { path: path.to_path_buf() });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        rows.push(ResultRow::from_record(&rec).map_err(|msg| ExperimentError::Row {
            path: path.to_path_buf(),
            row: i,
            msg,
        })?);
    }
    Ok(rows)
}

/// Appends the rows to `path` (creating it with a header), and stores each
/// success's certificate next to it. The CSV is rewritten to a temporary
/// file and renamed into place, so readers see all new rows or none.
pub fn append_csv(path: &Path, outcomes: &[TrialOutcome]) -> Result<(), ExperimentError> {
    let old = if path.exists() { read_rows(path)? } else { Vec::new() };
    let dir = certs_dir(path);
    if outcomes.iter().any(|o| o.certificate.is_some()) {
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    for (i, o) in outcomes.iter().enumerate() {
        if let Some(c) = &o.certificate {
            let cp = cert_path(path, old.len() + i);
            fs::write(&cp, c.to_text()).map_err(io_err(&cp))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut w = csv::Writer::from_path(&tmp).map_err(csv_err(&tmp))?;
        w.write_record(HEADER).map_err(csv_err(&tmp))?;
        for r in old.iter().chain(outcomes.iter().map(|o| &o.row)) {
            w.write_record(r.record()).map_err(csv_err(&tmp))?;
        }
        w.flush().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Reads a results CSV and re-checks every success row's stored
/// certificate against its regenerated graph.
pub fn load_verified(path: &Path) -> Result<Vec<ResultRow>, ExperimentError> {
    let rows = read_rows(path)?;
    for (i, r) in rows.iter().enumerate().filter(|(_, r)| r.success) {
        let bad = |msg: String| ExperimentError::Row { path: path.to_path_buf(), row: i, msg };
        let cp = cert_path(path, i);
        let text = fs::read_to_string(&cp).map_err(|e| bad(format!("{}: {e}", cp.display())))?;
        let cert = Certificate::from_text(&text).map_err(|e| bad(e.to_string()))?;
        let params = GnpParams::new(r.n, r.p, r.seed).map_err(|e| bad(e.to_string()))?;
        check_certificate(&generate_gnp(params), &cert).map_err(|e| bad(format!("certificate rejected: {e}")))?;
    }
    Ok(rows)
}

/// Transcript text: a `# trial T attempt A` line before each attempt.
pub fn transcript_text(outcomes: &[TrialOutcome]) -> String {
    let mut s = String::new();
    for o in outcomes {
        for (a, t) in o.transcripts.iter().enumerate() {
            s.push_str(&format!("# trial {} attempt {a}\n", o.row.trial));
            for line in t {
                s.push_str(line);
                s.push('\n');
            }
        }
    }
    s
}

/// CSV text with the `wall_ms` column dropped, for determinism checks.
pub fn deterministic_text(rows: &[ResultRow]) -> String {
    let mut s = HEADER[..WALL_MS_COLUMN].join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.record()[..WALL_MS_COLUMN].join(","));
        s.push('\n');
    }
    s
}

/// Median of the successful trials' rounds.
pub fn median_rounds(rows: &[ResultRow]) -> Option<f64> {
    let mut r: Vec<u64> = rows.iter().filter(|r| r.success).map(|r| r.rounds).collect();
    if r.is_empty() {
        return None;
    }
    r.sort_unstable();
    let m = r.len() / 2;
    Some(if r.len() % 2 == 1 { r[m] as f64 } else { (r[m - 1] + r[m]) as f64 / 2.0 })
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub n: usize,
    pub p: f64,
    pub median_rounds: Option<f64>,
    pub outcomes: Vec<TrialOutcome>,
}

/// Consecutive sizes compared: measured against `(n₂/n₁)^δ (ln n₂/ln n₁)²`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRatio {
    pub n1: usize,
    pub n2: usize,
    pub measured: Option<f64>,
    pub predicted: f64,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub ratios: Vec<SweepRatio>,
}

pub fn predicted_ratio(n1: usize, n2: usize, delta: f64) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    (b / a).powf(delta) * (b.ln() / a.ln()).powi(2)
}

/// Runs `cfg` at every size in `ns`.
pub fn sweep(cfg: &ExperimentConfig, ns: &[usize]) -> Result<SweepReport, ExperimentError> {
    if ns.len() < 2 {
        return Err(ExperimentError::SingleSize);
    }
    let mut points = Vec::new();
    for &n in ns {
        let c = ExperimentConfig { n, ..cfg.clone() };
        let p = c.validate()?;
        let outcomes = run_experiment(&c)?;
        let rows: Vec<ResultRow> = outcomes.iter().map(|o| o.row.clone()).collect();
        points.push(SweepPoint { n, p, median_rounds: median_rounds(&rows), outcomes });
    }
    let ratios = points
        .windows(2)
        .map(|w| SweepRatio {
            n1: w[0].n,
            n2: w[1].n,
            measured: w[0].median_rounds.zip(w[1].median_rounds).map(|(a, b)| b / a),
            predicted: predicted_ratio(w[0].n, w[1].n, cfg.delta),
        })
        .collect();
    Ok(SweepReport { points, ratios })
}

impl SweepReport {
    pub fn table(&self) -> String {
        let mut s = String::from("n\tp\tsuccesses\tmedian_rounds\n");
        for pt in &self.points {
            let wins = pt.outcomes.iter().filter(|o| o.row.success).count();
            let med = pt.median_rounds.map(|m| m.to_string()).unwrap_or_else(|| "-".into());
            s.push_str(&format!("{}\t{:.4}\t{}/{}\t{}\n", pt.n, pt.p, wins, pt.outcomes.len(), med));
        }
        for r in &self.ratios {
            let m = r.measured.map(|m| format!("{m:.3}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!("rounds({})/rounds({}) = {m}, predicted {:.3}\n", r.n2, r.n1, r.predicted));
        }
        s
    }
}

/// A plotting script for a results CSV: median rounds against n.
pub fn plot_script(csv: &Path) -> String {
    format!(
        "# Median rounds of successful trials against n.\n\
         import sys\n\
         import pandas as pd\n\
         import matplotlib.pyplot as plt\n\n\
         path = sys.argv[1] if len(sys.argv) > 1 else {csv:?}\n\
         df = pd.read_csv(path)\n\
         ok = df[df.success]\n\
         for algo, g in ok.groupby('algo'):\n    \
             m = g.groupby('n').rounds.median()\n    \
             plt.loglog(m.index, m.values, 'o-', label=algo)\n\
         plt.xlabel('n')\n\
         plt.ylabel('median rounds')\n\
         plt.legend()\n\
         plt.savefig(path + '.png')\n",
        csv = csv.display().to_string()
    )
}

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dhc::graph::Graph;
use dhc::verify::{check_certificate, Certificate};
use dhc_cli::{
    append_csv, load_verified, plot_script, run_experiment, sweep, transcript_text, trial_graph, Algo, PartialConfig,
    TrialOutcome, HEADER,
};

#[derive(Parser)]
#[command(name = "dhc", about = "Distributed Hamiltonian cycle experiments on G(n, p)")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run trials and write one CSV row per trial.
    Run(Params),
    /// Run trials at several sizes and report median-round ratios.
    Sweep {
        #[command(flatten)]
        params: Params,
        /// Sizes to run, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<usize>,
    },
    /// Check a certificate against a graph, or every success in a CSV.
    VerifyCert {
        /// Certificate file (`node pred succ` lines).
        #[arg(long, conflicts_with = "csv", requires = "graph")]
        cert: Option<PathBuf>,
        /// Graph file as written by dump-graph.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Results CSV whose stored certificates are re-checked.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the graph of one trial.
    DumpGraph {
        #[command(flatten)]
        params: Params,
        #[arg(long, default_value_t = 0)]
        trial: u32,
    },
}

#[derive(Args)]
struct Params {
    /// `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algo>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// With --delta, sets p = c ln n / n^delta.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Upcast sample constant.
    #[arg(long)]
    cprime: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    retries: Option<u32>,
    /// Rotation budget is this times s ln s steps.
    #[arg(long)]
    max_steps_mult: Option<f64>,
    /// CSV output; rows are appended. Standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write message transcripts here.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

impl Params {
    fn merged(self, n_optional: bool) -> Result<dhc_cli::ExperimentConfig> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                PartialConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => PartialConfig::default(),
        };
        let flags = PartialConfig {
            algo: self.algo,
            n: self.n,
            p: self.p,
            c: self.c,
            delta: self.delta,
            seed: self.seed,
            trials: self.trials,
            retries: self.retries,
            c_prime: self.cprime,
            step_mult: self.max_steps_mult,
            out: self.out,
            transcript: self.transcript,
        };
        Ok(file.overridden_by(flags).build(n_optional)?)
    }
}

fn emit(cfg: &dhc_cli::ExperimentConfig, outcomes: &[TrialOutcome]) -> Result<()> {
    match &cfg.out {
        Some(path) => append_csv(path, outcomes)?,
        None => {
            println!("{}", HEADER.join(","));
            for o in outcomes {
                println!("{}", o.row.record().join(","));
            }
        }
    }
    if let Some(path) = &cfg.transcript {
        fs::write(path, transcript_text(outcomes)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run(params) => {
            let cfg = params.merged(false)?;
            let outcomes = run_experiment(&cfg)?;
            emit(&cfg, &outcomes)?;
            let wins = outcomes.iter().filter(|o| o.row.success).count();
            eprintln!("{wins}/{} trials succeeded", outcomes.len());
        }
        Cmd::Sweep { params, ns } => {
            let cfg = params.merged(true)?;
            let report = sweep(&cfg, &ns)?;
            let all: Vec<TrialOutcome> = report.points.iter().flat_map(|p| p.outcomes.iter().cloned()).collect();
            emit(&cfg, &all)?;
            if let Some(path) = &cfg.out {
                let mut script = path.as_os_str().to_owned();
                script.push(".plot.py");
                fs::write(&script, plot_script(path)).context("writing plot script")?;
            }
            eprint!("{}", report.table());
        }
        Cmd::VerifyCert { cert, graph, csv } => {
            if let Some(csv) = csv {
                let rows = load_verified(&csv)?;
                let wins = rows.iter().filter(|r| r.success).count();
                println!("{wins} certificates accepted ({} rows)", rows.len());
            } else {
                let (Some(cert), Some(graph)) = (cert, graph) else {
                    bail!("give --cert with --graph, or --csv");
                };
                let g = Graph::from_text(&fs::read_to_string(&graph).with_context(|| graph.display().to_string())?)?;
                let c =
                    Certificate::from_text(&fs::read_to_string(&cert).with_context(|| cert.display().to_string())?)?;
                match check_certificate(&g, &c) {
                    Ok(()) => println!("accepted"),
                    Err(e) => bail!("rejected: {e}"),
                }
            }
        }
        Cmd::DumpGraph { params, trial } => {
            let cfg = params.merged(false)?;
            let text = trial_graph(&cfg, trial)?.to_text();
            match &cfg.out {
                Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

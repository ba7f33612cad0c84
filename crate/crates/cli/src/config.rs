//! Experiment configuration and the `key = value` file format.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algo {
    Dra,
    Dhc1,
    Dhc2,
    Upcast,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Dra => "dra",
            Algo::Dhc1 => "dhc1",
            Algo::Dhc2 => "dhc2",
            Algo::Upcast => "upcast",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Algo, ConfigError> {
        match s {
            "dra" => Ok(Algo::Dra),
            "dhc1" => Ok(Algo::Dhc1),
            "dhc2" => Ok(Algo::Dhc2),
            "upcast" => Ok(Algo::Upcast),
            _ => Err(ConfigError::UnknownAlgo(s.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown algorithm {0:?} (expected dra, dhc1, dhc2 or upcast)")]
    UnknownAlgo(String),
    #[error("p = {p} exceeds 1 for c = {c}, n = {n}, delta = {delta}")]
    DerivedPTooLarge { c: f64, n: usize, delta: f64, p: f64 },
    #[error("p = {0} is outside [0, 1]")]
    BadP(f64),
    #[error("give either p or c, not both")]
    BothPAndC,
    #[error("no edge probability: set p, or c (with delta)")]
    NoProbability,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("n must be at least 1")]
    EmptyGraph,
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("bad value {value:?} for {key}")]
    BadValue { key: String, value: String },
}

/// Edge probability, given directly or as `c · ln n / n^δ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbSpec {
    Explicit(f64),
    Derived { c: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub algo: Algo,
    pub n: usize,
    pub prob: ProbSpec,
    /// Exponent in the derived `p`; also sets the color count of `dhc2`.
    pub delta: f64,
    pub seed: u64,
    pub trials: u32,
    pub retries: u32,
    pub c_prime: f64,
    pub step_mult: f64,
    pub out: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(algo: Algo, n: usize, prob: ProbSpec) -> ExperimentConfig {
        ExperimentConfig {
            algo,
            n,
            prob,
            delta: 0.5,
            seed: 0,
            trials: 1,
            retries: 0,
            c_prime: 3.0,
            step_mult: 7.0,
            out: None,
            transcript: None,
        }
    }

    /// The edge probability for this `n`, rejecting anything above 1.
    pub fn p(&self) -> Result<f64, ConfigError> {
        match self.prob {
            ProbSpec::Explicit(p) if (0.0..=1.0).contains(&p) => Ok(p),
            ProbSpec::Explicit(p) => Err(ConfigError::BadP(p)),
            ProbSpec::Derived { c } => {
                let p = derived_p(c, self.n, self.delta);
                if p > 1.0 {
                    Err(ConfigError::DerivedPTooLarge { c, n: self.n, delta: self.delta, p })
                } else if p.is_nan() || p < 0.0 {
                    Err(ConfigError::BadP(p))
                } else {
                    Ok(p)
                }
            }
        }
    }

    pub fn c(&self) -> Option<f64> {
        match self.prob {
            ProbSpec::Derived { c } => Some(c),
            ProbSpec::Explicit(_) => None,
        }
    }

    pub fn validate(&self) -> Result<f64, ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::NoTrials);
        }
        if self.n == 0 {
            return Err(ConfigError::EmptyGraph);
        }
        self.p()
    }
}

/// `c · ln n / n^δ`.
pub fn derived_p(c: f64, n: usize, delta: f64) -> f64 {
    let n = n as f64;
    c * n.ln() / n.powf(delta)
}

/// Settings read from a file or the command line, all optional.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PartialConfig {
    pub algo: Option<Algo>,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub c: Option<f64>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<u32>,
    pub retries: Option<u32>,
    pub c_prime: Option<f64>,
    pub step_mult: Option<f64>,
    pub out: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.to_string(), value: value.to_string() })
}

impl PartialConfig {
    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<PartialConfig, ConfigError> {
        let mut cfg = PartialConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: i + 1, msg: format!("expected key = value, got {raw:?}") });
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "algo" => cfg.algo = Some(value.parse()?),
                "n" => cfg.n = Some(parse_value(key, value)?),
                "p" => cfg.p = Some(parse_value(key, value)?),
                "c" => cfg.c = Some(parse_value(key, value)?),
                "delta" => cfg.delta = Some(parse_value(key, value)?),
                "seed" => cfg.seed = Some(parse_value(key, value)?),
                "trials" => cfg.trials = Some(parse_value(key, value)?),
                "retries" => cfg.retries = Some(parse_value(key, value)?),
                "cprime" => cfg.c_prime = Some(parse_value(key, value)?),
                "max-steps-mult" => cfg.step_mult = Some(parse_value(key, value)?),
                "out" => cfg.out = Some(PathBuf::from(value)),
                "transcript" => cfg.transcript = Some(PathBuf::from(value)),
                _ => return Err(ConfigError::Syntax { line: i + 1, msg: format!("unknown key {key:?}") }),
            }
        }
        Ok(cfg)
    }

    /// Fields set in `over` win.
    pub fn overridden_by(self, over: PartialConfig) -> PartialConfig {
        PartialConfig {
            algo: over.algo.or(self.algo),
            n: over.n.or(self.n),
            // p and c are one setting: whichever the override names wins.
            p: if over.p.is_some() || over.c.is_some() { over.p } else { self.p },
            c: if over.p.is_some() || over.c.is_some() { over.c } else { self.c },
            delta: over.delta.or(self.delta),
            seed: over.seed.or(self.seed),
            trials: over.trials.or(self.trials),
            retries: over.retries.or(self.retries),
            c_prime: over.c_prime.or(self.c_prime),
            step_mult: over.step_mult.or(self.step_mult),
            out: over.out.or(self.out),
            transcript: over.transcript.or(self.transcript),
        }
    }

    /// Fills defaults. `n` is left to the caller when `n_optional` is set
    /// (sweeps take a list instead).
    pub fn build(self, n_optional: bool) -> Result<ExperimentConfig, ConfigError> {
        let algo = self.algo.ok_or(ConfigError::Missing("algo"))?;
        let n = match self.n {
            Some(n) => n,
            None if n_optional => 1,
            None => return Err(ConfigError::Missing("n")),
        };
        let prob = match (self.p, self.c) {
            (Some(_), Some(_)) => return Err(ConfigError::BothPAndC),
            (Some(p), None) => ProbSpec::Explicit(p),
            (None, Some(c)) => ProbSpec::Derived { c },
            (None, None) => return Err(ConfigError::NoProbability),
        };
        let mut cfg = ExperimentConfig::new(algo, n, prob);
        cfg.delta = self.delta.unwrap_or(cfg.delta);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.trials = self.trials.unwrap_or(cfg.trials);
        cfg.retries = self.retries.unwrap_or(cfg.retries);
        cfg.c_prime = self.c_prime.unwrap_or(cfg.c_prime);
        cfg.step_mult = self.step_mult.unwrap_or(cfg.step_mult);
        cfg.out = self.out;
        cfg.transcript = self.transcript;
        if cfg.trials == 0 {
            return Err(ConfigError::NoTrials);
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huge_constant_is_rejected() {
        let mut cfg = ExperimentConfig::new(Algo::Dhc1, 16, ProbSpec::Derived { c: 86.0 });
        cfg.delta = 0.5;
        match cfg.p() {
            Err(ConfigError::DerivedPTooLarge { c, n, delta, p }) => {
                assert_eq!((c, n, delta), (86.0, 16, 0.5));
                assert!((p - 86.0 * 16f64.ln() / 4.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_then_flags() {
        let file = PartialConfig::parse("algo = dhc2\nn = 64 # small\n\nc = 2\ndelta=0.4\ntrials = 3\n").unwrap();
        let flags = PartialConfig { p: Some(0.5), trials: Some(5), ..PartialConfig::default() };
        let cfg = file.overridden_by(flags).build(false).unwrap();
        assert_eq!(cfg.algo, Algo::Dhc2);
        assert_eq!(cfg.n, 64);
        assert_eq!(cfg.prob, ProbSpec::Explicit(0.5));
        assert_eq!(cfg.delta, 0.4);
        assert_eq!(cfg.trials, 5);
    }

    #[test]
    fn bad_lines() {
        assert!(matches!(PartialConfig::parse("n 5"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(PartialConfig::parse("\nspeed = 3"), Err(ConfigError::Syntax { line: 2, .. })));
        assert!(matches!(PartialConfig::parse("n = x"), Err(ConfigError::BadValue { .. })));
        let both =
            PartialConfig { algo: Some(Algo::Dra), n: Some(5), p: Some(0.5), c: Some(1.0), ..Default::default() };
        assert_eq!(both.build(false), Err(ConfigError::BothPAndC));
    }

    #[test]
    fn explicit_p_out_of_range() {
        let cfg = ExperimentConfig::new(Algo::Dra, 10, ProbSpec::Explicit(1.5));
        assert_eq!(cfg.p(), Err(ConfigError::BadP(1.5)));
    }
}

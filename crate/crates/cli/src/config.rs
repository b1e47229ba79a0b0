//! Run configuration: command-line flags merged over an optional
//! `key=value` configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use kfree_core::{Budget, TupleConfig};

use crate::CliError;

/// Parses a non-negative integer, accepting scientific notation (`1e6`).
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64) {
        return Err(format!("expected a non-negative integer, got {s}"));
    }
    Ok(v as u64)
}

/// Parses a floating-point value (scientific notation accepted).
pub fn parse_real(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("not a number: {s}"))
}

/// A comma-separated shift list such as `0,2,6`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shifts(pub Vec<u64>);

pub fn parse_shifts(s: &str) -> Result<Shifts, String> {
    s.split(',')
        .map(|t| parse_count(t.trim()))
        .collect::<Result<_, _>>()
        .map(Shifts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Bucketing for small `Q·x`, the spectral route otherwise.
    Auto,
    Brute,
    Spectral,
}

/// Flags shared by every command. Unset flags fall back to the configuration
/// file, then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Configuration file with one `key=value` per line (`#` starts a comment).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// The power k of k-free numbers.
    #[arg(long, global = true, value_parser = parse_count)]
    pub k: Option<u64>,
    /// Number of shifts; must match the length of --h when given.
    #[arg(long, global = true, value_parser = parse_count)]
    pub r: Option<u64>,
    /// Shifts h_1 < … < h_r as a comma list without spaces.
    #[arg(long, global = true, value_parser = parse_shifts)]
    pub h: Option<Shifts>,
    #[arg(long, global = true, value_parser = parse_count)]
    pub x: Option<u64>,
    /// Largest modulus Q.
    #[arg(long = "Q", global = true, value_parser = parse_count)]
    pub q: Option<u64>,
    /// Farey order γ.
    #[arg(long, global = true, value_parser = parse_count)]
    pub gamma: Option<u64>,
    /// Largest modulus for identity suites.
    #[arg(long, global = true, value_parser = parse_count)]
    pub qmax: Option<u64>,
    /// Tolerance for the ρ bracket.
    #[arg(long, global = true, value_parser = parse_real)]
    pub tol: Option<f64>,
    /// Worker threads (default: hardware parallelism).
    #[arg(long, global = true, value_parser = parse_count)]
    pub threads: Option<u64>,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Variance route.
    #[arg(long, global = true, value_enum)]
    pub method: Option<Method>,
    /// Raise the budget on x.
    #[arg(long, global = true, value_parser = parse_count)]
    pub max_x: Option<u64>,
    /// Raise the budget on Q.
    #[arg(long, global = true, value_parser = parse_count)]
    pub max_q: Option<u64>,
    /// Euler-product cut-off for the main-term engine.
    #[arg(long, global = true, value_parser = parse_count)]
    pub p_max: Option<u64>,
    /// The moment exponent 𝔠 used in the reported error budget.
    #[arg(long, global = true, value_parser = parse_real)]
    pub frak_c: Option<f64>,
}

/// The fully resolved configuration of a run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub k: u32,
    pub h: Vec<u64>,
    pub x: Option<u64>,
    pub q: Option<u64>,
    pub gamma: Option<u64>,
    pub qmax: Option<u64>,
    pub tol: f64,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub method: Method,
    pub budget: Budget,
    pub p_max: u64,
    pub frak_c: Option<f64>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn read_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config file {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            config_err(format!("{}:{}: expected key=value", path.display(), i + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn from_file<T>(
    map: &BTreeMap<String, String>,
    key: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Option<T>, CliError> {
    map.get(key)
        .map(|v| parse(v).map_err(|e| config_err(format!("config key {key}: {e}"))))
        .transpose()
}

fn enum_from_file<T: ValueEnum>(
    map: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>, CliError> {
    from_file(map, key, |v| T::from_str(v, true))
}

impl Common {
    /// Merges flags over the configuration file.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => read_file(p)?,
            None => BTreeMap::new(),
        };
        const KNOWN: [&str; 16] = [
            "k", "r", "h", "x", "Q", "gamma", "qmax", "tol", "threads", "output", "format",
            "method", "max_x", "max_q", "p_max", "frak_c",
        ];
        if let Some(bad) = file.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(config_err(format!("unknown config key {bad}")));
        }
        let k = self.k.or(from_file(&file, "k", parse_count)?).unwrap_or(2);
        let h = match &self.h {
            Some(h) => h.0.clone(),
            None => from_file(&file, "h", parse_shifts)?.map_or_else(|| vec![0], |s| s.0),
        };
        if let Some(r) = self.r.or(from_file(&file, "r", parse_count)?) {
            if r as usize != h.len() {
                return Err(config_err(format!("r = {r} but h has {} shifts", h.len())));
            }
        }
        let k = u32::try_from(k).map_err(|_| config_err(format!("k = {k} is too large")))?;
        let mut budget = Budget::default();
        if let Some(v) = self.max_x.or(from_file(&file, "max_x", parse_count)?) {
            budget.max_x = v;
            budget.max_sieve = budget.max_sieve.max(v + 64);
        }
        if let Some(v) = self.max_q.or(from_file(&file, "max_q", parse_count)?) {
            budget.max_q = v;
        }
        let tol = self
            .tol
            .or(from_file(&file, "tol", parse_real)?)
            .unwrap_or(1e-12);
        let threads = self
            .threads
            .or(from_file(&file, "threads", parse_count)?)
            .map(|t| t as usize);
        if threads == Some(0) {
            return Err(config_err("--threads must be at least 1"));
        }
        Ok(RunConfig {
            k,
            h,
            x: self.x.or(from_file(&file, "x", parse_count)?),
            q: self.q.or(from_file(&file, "Q", parse_count)?),
            gamma: self.gamma.or(from_file(&file, "gamma", parse_count)?),
            qmax: self.qmax.or(from_file(&file, "qmax", parse_count)?),
            tol,
            threads,
            output: self
                .output
                .clone()
                .or(file.get("output").map(PathBuf::from)),
            format: match self.format {
                Some(f) => Some(f),
                None => enum_from_file(&file, "format")?,
            },
            method: match self.method {
                Some(m) => m,
                None => enum_from_file(&file, "method")?.unwrap_or(Method::Auto),
            },
            budget,
            p_max: self
                .p_max
                .or(from_file(&file, "p_max", parse_count)?)
                .unwrap_or(kfree_core::analytic::DEFAULT_P_MAX),
            frak_c: self.frak_c.or(from_file(&file, "frak_c", parse_real)?),
        })
    }
}

impl RunConfig {
    /// The tuple configuration, checked for admissibility.
    pub fn tuple(&self) -> Result<TupleConfig, CliError> {
        let mut cfg = TupleConfig::new(self.k, &self.h)?;
        if let Some(c) = self.frak_c {
            cfg = cfg.with_frak_c(c)?;
        }
        kfree_core::sieve::require_admissible(&cfg)?;
        Ok(cfg)
    }

    pub fn require_x(&self) -> Result<u64, CliError> {
        self.x.ok_or_else(|| config_err("--x is required"))
    }

    pub fn require_q(&self) -> Result<u64, CliError> {
        self.q.ok_or_else(|| config_err("--Q is required"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("1.5e5"), Ok(150_000));
        assert_eq!(parse_count("42"), Ok(42));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert_eq!(parse_shifts("0,2,6"), Ok(Shifts(vec![0, 2, 6])));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# twins\nk=2\nh=0,1\nx=1e4\nQ=50\nformat=json\n").unwrap();
        let common = Common {
            config: Some(path.clone()),
            q: Some(20),
            ..Common::default()
        };
        let rc = common.resolve().unwrap();
        assert_eq!(
            (rc.k, rc.h.clone(), rc.x, rc.q),
            (2, vec![0, 1], Some(10_000), Some(20))
        );
        assert_eq!(rc.format, Some(Format::Json));
        std::fs::write(&path, "bogus=1\n").unwrap();
        assert!(matches!(
            Common {
                config: Some(path),
                ..Common::default()
            }
            .resolve(),
            Err(CliError::Config(_))
        ));
    }
}

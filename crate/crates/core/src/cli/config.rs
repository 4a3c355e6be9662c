//! Flat `key = value` experiment configuration.
//!
//! Keys use underscores in files and dashes on the command line
//! (`t_final` / `--t-final`); either spelling is accepted in both places.
//! Flags override file values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::Scheme;
use crate::integrator::default_dt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Simulate,
    SampleInvariant,
    Invariance,
    ExitTime,
    Repulsion,
    EntropyBalance,
    TwoTime,
    LdpFeasibility,
    LdpRate,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Simulate,
        ExperimentKind::SampleInvariant,
        ExperimentKind::Invariance,
        ExperimentKind::ExitTime,
        ExperimentKind::Repulsion,
        ExperimentKind::EntropyBalance,
        ExperimentKind::TwoTime,
        ExperimentKind::LdpFeasibility,
        ExperimentKind::LdpRate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::SampleInvariant => "sample-invariant",
            ExperimentKind::Invariance => "invariance",
            ExperimentKind::ExitTime => "exit-time",
            ExperimentKind::Repulsion => "repulsion",
            ExperimentKind::EntropyBalance => "entropy-balance",
            ExperimentKind::TwoTime => "two-time",
            ExperimentKind::LdpFeasibility => "ldp-feasibility",
            ExperimentKind::LdpRate => "ldp-rate",
        }
    }

    /// Keys that must be set for this kind.
    pub fn required(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Simulate => &["n", "mobility_exponent", "beta", "t_final", "scheme", "seed", "out"],
            ExperimentKind::SampleInvariant => &["n", "beta", "samples", "seed", "out"],
            ExperimentKind::Invariance => &["n", "mobility_exponent", "beta", "t_final", "samples", "seed", "out"],
            ExperimentKind::ExitTime => {
                &["n", "mobility_exponent", "beta", "t_final", "scheme", "samples", "seed", "out"]
            }
            ExperimentKind::Repulsion => &["n", "beta", "samples", "seed", "out"],
            ExperimentKind::EntropyBalance => {
                &["n", "mobility_exponent", "beta", "t_final", "scheme", "samples", "seed", "out"]
            }
            ExperimentKind::TwoTime => &["n", "mobility_exponent", "beta", "delta_t", "samples", "seed", "out"],
            ExperimentKind::LdpFeasibility => &["m_min", "m_max", "m_step", "out"],
            ExperimentKind::LdpRate => &["mobility_exponent", "gamma", "eta", "t_final", "out"],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(unknown_experiment(s)))
    }
}

fn unknown_experiment(s: &str) -> String {
    let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.as_str()).collect();
    format!("unknown experiment '{s}' (expected one of {})", names.join(", "))
}

/// Starting state of simulated trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    /// `h ≡ 1`.
    #[default]
    Flat,
    /// An independent draw from the invariant measure per trajectory.
    Invariant,
}

impl InitialState {
    pub fn as_str(self) -> &'static str {
        match self {
            InitialState::Flat => "flat",
            InitialState::Invariant => "invariant",
        }
    }
}

/// Every accepted key, in echo order.
pub const KEYS: [&str; 21] = [
    "experiment",
    "n",
    "mobility_exponent",
    "beta",
    "dt",
    "t_final",
    "scheme",
    "seed",
    "samples",
    "delta_x",
    "delta_t",
    "record_stride",
    "initial",
    "h_max",
    "gamma",
    "eta",
    "m_min",
    "m_max",
    "m_step",
    "out",
    "threads",
];

/// Raw values with the place each came from, for error messages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<&'static str, (String, String)>,
}

fn canonical_key(key: &str) -> Option<&'static str> {
    let normalized = key.trim().replace('-', "_");
    KEYS.iter().copied().find(|k| *k == normalized)
}

impl RawConfig {
    /// Parses `key = value` lines. Blank lines and lines starting with `#`
    /// are skipped; a key may appear once per file.
    pub fn parse_str(text: &str, origin: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let place = format!("{origin}:{}", i + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{place}: expected 'key = value', got '{line}'")))?;
            let name = canonical_key(key)
                .ok_or_else(|| Error::Config(format!("{place}: unknown key '{}'", key.trim())))?;
            if raw.entries.contains_key(name) {
                return Err(Error::Config(format!("{place}: key '{name}' given twice")));
            }
            raw.entries.insert(name, (value.trim().to_string(), place));
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text, &path.display().to_string())
    }

    /// Sets `key` from a command-line flag, replacing any file value.
    pub fn set_flag(&mut self, key: &str, value: &str) -> Result<()> {
        let name = canonical_key(key).ok_or_else(|| Error::Config(format!("unknown key '{key}'")))?;
        let flag = format!("--{}", name.replace('_', "-"));
        self.entries.insert(name, (value.trim().to_string(), flag));
        Ok(())
    }

    fn get(&self, key: &'static str) -> Option<&(String, String)> {
        self.entries.get(key)
    }

    fn parsed<T: FromStr>(&self, key: &'static str, expected: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some((value, place)) => value.parse::<T>().map(Some).map_err(|_| {
                Error::Config(format!("{place}: invalid value '{value}' for '{key}': expected {expected}"))
            }),
        }
    }

    fn float(&self, key: &'static str) -> Result<Option<f64>> {
        let v = self.parsed::<f64>(key, "a number")?;
        if let (Some(x), Some((_, place))) = (v, self.get(key)) {
            if !x.is_finite() && key != "beta" {
                return Err(Error::Config(format!("{place}: '{key}' must be finite, got {x}")));
            }
        }
        Ok(v)
    }
}

/// Fully resolved configuration. Optional fields are those a given
/// experiment kind may leave unset.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: Option<usize>,
    pub m: Option<f64>,
    pub beta: Option<f64>,
    /// Defaults to `1e-10·(50/N)⁴` when `n` is known.
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    /// Unset means both schemes where an experiment supports that.
    pub scheme: Option<Scheme>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub delta_x: f64,
    pub delta_t: Option<f64>,
    pub record_stride: u64,
    pub initial: InitialState,
    pub h_max: f64,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub m_min: Option<f64>,
    pub m_max: Option<f64>,
    pub m_step: Option<f64>,
    pub out: PathBuf,
    /// Worker threads; `None` uses the machine's parallelism.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let experiment: ExperimentKind = match raw.get("experiment") {
            Some((v, place)) => ExperimentKind::ALL
                .into_iter()
                .find(|k| k.as_str() == v)
                .ok_or_else(|| Error::Config(format!("{place}: {}", unknown_experiment(v))))?,
            None => return Err(Error::Config("missing required key 'experiment'".into())),
        };
        let n = raw.parsed::<usize>("n", "an integer >= 2")?;
        let scheme = match raw.get("scheme") {
            None => None,
            Some((v, place)) => Some(v.parse::<Scheme>().map_err(|_| {
                Error::Config(format!(
                    "{place}: invalid value '{v}' for 'scheme': expected 'gruen-rumpf' or 'central-difference'"
                ))
            })?),
        };
        let initial = match raw.get("initial").map(|(v, p)| (v.as_str(), p)) {
            None | Some(("flat", _)) => InitialState::Flat,
            Some(("invariant", _)) => InitialState::Invariant,
            Some((v, place)) => {
                return Err(Error::Config(format!(
                    "{place}: invalid value '{v}' for 'initial': expected 'flat' or 'invariant'"
                )))
            }
        };
        let threads = raw.parsed::<usize>("threads", "an integer >= 1")?;
        if threads == Some(0) {
            return Err(Error::Config("'threads' must be >= 1".into()));
        }
        let dt = raw.float("dt")?.or(n.map(default_dt));
        let out = raw
            .get("out")
            .map(|(v, _)| PathBuf::from(v))
            .unwrap_or_else(|| PathBuf::from("."));
        let cfg = Self {
            experiment,
            n,
            m: raw.float("mobility_exponent")?,
            beta: raw.float("beta")?,
            dt,
            t_final: raw.float("t_final")?,
            scheme,
            seed: raw.parsed::<u64>("seed", "a non-negative integer")?,
            samples: raw.parsed::<usize>("samples", "a positive integer")?,
            delta_x: raw.float("delta_x")?.unwrap_or(0.1),
            delta_t: raw.float("delta_t")?,
            record_stride: raw.parsed::<u64>("record_stride", "a non-negative integer")?.unwrap_or(0),
            initial,
            h_max: raw.float("h_max")?.unwrap_or(0.5),
            gamma: raw.float("gamma")?,
            eta: raw.float("eta")?,
            m_min: raw.float("m_min")?,
            m_max: raw.float("m_max")?,
            m_step: raw.float("m_step")?,
            out,
            threads,
        };
        for key in experiment.required() {
            if raw.get(key).is_none() {
                return Err(Error::Config(format!(
                    "missing required key '{key}' for experiment '{experiment}'"
                )));
            }
        }
        Ok(cfg)
    }

    /// Resolved settings as `(key, value)` pairs, for provenance headers.
    /// The output directory and thread count are left out so that artifacts
    /// compare equal across locations and worker counts.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let mut v: Vec<(&'static str, String)> = vec![("experiment", self.experiment.to_string())];
        let mut push = |k: &'static str, x: Option<String>| {
            if let Some(x) = x {
                v.push((k, x));
            }
        };
        push("n", self.n.map(|x| x.to_string()));
        push("mobility_exponent", self.m.map(fmt_float));
        push("beta", self.beta.map(fmt_float));
        push("dt", self.dt.map(fmt_float));
        push("t_final", self.t_final.map(fmt_float));
        push("scheme", self.scheme.map(|x| x.to_string()));
        push("seed", self.seed.map(|x| x.to_string()));
        push("samples", self.samples.map(|x| x.to_string()));
        push("delta_x", Some(fmt_float(self.delta_x)));
        push("delta_t", self.delta_t.map(fmt_float));
        push("record_stride", Some(self.record_stride.to_string()));
        push("initial", Some(self.initial.as_str().to_string()));
        push("h_max", Some(fmt_float(self.h_max)));
        push("gamma", self.gamma.map(fmt_float));
        push("eta", self.eta.map(fmt_float));
        push("m_min", self.m_min.map(fmt_float));
        push("m_max", self.m_max.map(fmt_float));
        push("m_step", self.m_step.map(fmt_float));
        v
    }
}

/// Shortest round-trip text; scientific outside `[1e-4, 1e15)`.
fn fmt_float(v: f64) -> String {
    if v != 0.0 && !(1e-4..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Reads the optional file, applies flag overrides and resolves.
pub fn parse_config(file: Option<&Path>, flags: &[(&str, String)]) -> Result<ExperimentConfig> {
    let mut raw = match file {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    for (key, value) in flags {
        raw.set_flag(key, value)?;
    }
    ExperimentConfig::resolve(&raw)
}

/// Value of an optional field that the caller has already required.
pub(crate) fn need<T: Copy>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
}

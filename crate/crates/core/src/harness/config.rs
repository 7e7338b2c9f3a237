//! Experiment configuration: a flat `key = value` text format.
//!
//! One assignment per line, `#` starts a comment, values are numbers,
//! bare or double-quoted strings, or lists written `[a, b, c]`. Later
//! assignments override earlier ones; unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Converge,
    Fluct,
    Clt,
    Gp,
    Minimize,
    Scatter,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Converge,
        Experiment::Fluct,
        Experiment::Clt,
        Experiment::Gp,
        Experiment::Minimize,
        Experiment::Scatter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Converge => "converge",
            Experiment::Fluct => "fluct",
            Experiment::Clt => "clt",
            Experiment::Gp => "gp",
            Experiment::Minimize => "minimize",
            Experiment::Scatter => "scatter",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Initial many-body state for the exact runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialData {
    /// `W(√N φ)Ω`
    Coherent,
    /// `φ^{⊗N}` in the N-particle sector
    Product,
}

/// Lattice pair potential family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    Zero,
    Gaussian,
}

/// Radial profile for the scattering problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialKind {
    Zero,
    SoftSphere,
    Bump,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,

    // lattice model for the exact runs
    pub sites: usize,
    pub spacing: f64,
    pub potential: PotentialKind,
    pub strength: f64,
    pub width: f64,
    /// Amplitude of the cosine trap; 0 disables it.
    pub trap: f64,
    /// Initial orbital before normalization, as site values.
    pub orbital_re: Vec<f64>,
    pub orbital_im: Vec<f64>,
    pub initial: InitialData,

    // dynamics
    pub n_list: Vec<usize>,
    pub t_final: f64,
    pub dt: f64,
    /// Output times for the exact runs; each must be a multiple of `dt`.
    pub output_times: Vec<f64>,

    // truncation: N_max = ceil(N + sigmas·√N + offset)
    pub cutoff_sigmas: f64,
    pub cutoff_offset: f64,
    pub basis_cap: usize,
    pub tail_tol: f64,
    pub truncation_tol: f64,
    pub krylov_tol: f64,
    pub krylov_dim: usize,

    // acceptance windows
    pub slope_min: f64,
    pub slope_max: f64,
    pub fluct_spread: f64,

    // fluctuation statistics
    /// Diagonal of the one-body observable in the site basis.
    pub observable: Vec<f64>,
    /// Largest `M^N` enumerated exactly.
    pub clt_budget: u64,
    /// Sample configurations when the budget is exceeded.
    pub sampling: bool,
    pub samples: usize,
    pub variance_tol: f64,

    // scattering
    pub radial: RadialKind,
    pub radial_strength: f64,
    pub radial_range: f64,
    pub scale_n: f64,

    // Gross-Pitaevskii runs and minimizer
    pub gp_sites: usize,
    pub gp_length: f64,
    /// Kernel widths as fractions of the box length.
    pub widths: Vec<f64>,
    pub gp_t: f64,
    pub mu_list: Vec<f64>,
    pub min_tol: f64,
    pub min_iterations: usize,

    pub out: PathBuf,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    /// Defaults for one experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let minimize = experiment == Experiment::Minimize;
        Self {
            experiment,
            sites: 4,
            spacing: 1.0,
            potential: PotentialKind::Gaussian,
            strength: 1.0,
            width: 1.0,
            trap: if minimize { 2.0 } else { 0.0 },
            orbital_re: vec![1.0, 0.6, 0.3, 0.5],
            orbital_im: vec![0.0, 0.3, -0.2, 0.1],
            initial: InitialData::Coherent,
            n_list: if experiment == Experiment::Clt { vec![4, 8] } else { vec![4, 8, 16, 32] },
            t_final: 0.5,
            dt: 1e-3,
            output_times: vec![0.0, 0.25, 0.5],
            cutoff_sigmas: 8.0,
            cutoff_offset: 10.0,
            basis_cap: crate::fock::DEFAULT_BASIS_CAP,
            tail_tol: 1e-12,
            truncation_tol: 1e-8,
            krylov_tol: 1e-10,
            krylov_dim: 40,
            slope_min: -1.3,
            slope_max: -0.7,
            fluct_spread: 0.5,
            observable: vec![1.0, -0.5, 2.0, 0.0],
            clt_budget: 65_536,
            sampling: false,
            samples: 100_000,
            variance_tol: 0.2,
            radial: RadialKind::Bump,
            radial_strength: 3.0,
            radial_range: 1.0,
            scale_n: 16.0,
            gp_sites: if minimize { 32 } else { 64 },
            gp_length: 8.0,
            widths: vec![0.4, 0.2, 0.1],
            gp_t: 1.0,
            mu_list: vec![0.0, 1.0, 10.0],
            min_tol: 1e-8,
            min_iterations: 20_000,
            out: PathBuf::from("results"),
            seed: None,
        }
    }

    /// Defaults overridden by a config file.
    pub fn from_file(experiment: Experiment, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::defaults(experiment);
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Apply every assignment in `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, strip_prefix(e))))?;
        }
        Ok(())
    }

    /// Apply an override written `key=value`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not `key=value`")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = Value(value);
        match key {
            "experiment" => {
                let e = Experiment::parse(&v.string()?)?;
                if e != self.experiment {
                    return Err(Error::Config(format!(
                        "config is for `{}` but the command runs `{}`",
                        e.name(),
                        self.experiment.name()
                    )));
                }
            }
            "sites" => self.sites = v.usize()?,
            "spacing" => self.spacing = v.f64()?,
            "potential" => {
                self.potential = match v.string()?.as_str() {
                    "zero" => PotentialKind::Zero,
                    "gaussian" => PotentialKind::Gaussian,
                    s => return Err(Error::Config(format!("unknown potential `{s}`"))),
                }
            }
            "strength" => self.strength = v.f64()?,
            "width" => self.width = v.f64()?,
            "trap" => self.trap = v.f64()?,
            "orbital_re" => self.orbital_re = v.f64_list()?,
            "orbital_im" => self.orbital_im = v.f64_list()?,
            "initial" => {
                self.initial = match v.string()?.as_str() {
                    "coherent" => InitialData::Coherent,
                    "product" => InitialData::Product,
                    s => return Err(Error::Config(format!("unknown initial state `{s}`"))),
                }
            }
            "n_list" => self.n_list = v.usize_list()?,
            "t_final" => self.t_final = v.f64()?,
            "dt" => self.dt = v.f64()?,
            "output_times" => self.output_times = v.f64_list()?,
            "cutoff_sigmas" => self.cutoff_sigmas = v.f64()?,
            "cutoff_offset" => self.cutoff_offset = v.f64()?,
            "basis_cap" => self.basis_cap = v.usize()?,
            "tail_tol" => self.tail_tol = v.f64()?,
            "truncation_tol" => self.truncation_tol = v.f64()?,
            "krylov_tol" => self.krylov_tol = v.f64()?,
            "krylov_dim" => self.krylov_dim = v.usize()?,
            "slope_min" => self.slope_min = v.f64()?,
            "slope_max" => self.slope_max = v.f64()?,
            "fluct_spread" => self.fluct_spread = v.f64()?,
            "observable" => self.observable = v.f64_list()?,
            "clt_budget" => self.clt_budget = v.usize()? as u64,
            "sampling" => self.sampling = v.bool()?,
            "samples" => self.samples = v.usize()?,
            "variance_tol" => self.variance_tol = v.f64()?,
            "radial" => {
                self.radial = match v.string()?.as_str() {
                    "zero" => RadialKind::Zero,
                    "soft_sphere" => RadialKind::SoftSphere,
                    "bump" => RadialKind::Bump,
                    s => return Err(Error::Config(format!("unknown radial profile `{s}`"))),
                }
            }
            "radial_strength" => self.radial_strength = v.f64()?,
            "radial_range" => self.radial_range = v.f64()?,
            "scale_n" => self.scale_n = v.f64()?,
            "gp_sites" => self.gp_sites = v.usize()?,
            "gp_length" => self.gp_length = v.f64()?,
            "widths" => self.widths = v.f64_list()?,
            "gp_t" => self.gp_t = v.f64()?,
            "mu_list" => self.mu_list = v.f64_list()?,
            "min_tol" => self.min_tol = v.f64()?,
            "min_iterations" => self.min_iterations = v.usize()?,
            "out" => self.out = PathBuf::from(v.string()?),
            "seed" => self.seed = Some(v.u64()?),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Reject values that cannot describe a run.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("spacing", self.spacing),
            ("width", self.width),
            ("t_final", self.t_final),
            ("dt", self.dt),
            ("tail_tol", self.tail_tol),
            ("truncation_tol", self.truncation_tol),
            ("krylov_tol", self.krylov_tol),
            ("fluct_spread", self.fluct_spread),
            ("variance_tol", self.variance_tol),
            ("radial_range", self.radial_range),
            ("scale_n", self.scale_n),
            ("gp_length", self.gp_length),
            ("gp_t", self.gp_t),
            ("min_tol", self.min_tol),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {x}")));
            }
        }
        let nonneg = [
            ("strength", self.strength),
            ("trap", self.trap),
            ("cutoff_sigmas", self.cutoff_sigmas),
            ("cutoff_offset", self.cutoff_offset),
            ("radial_strength", self.radial_strength),
        ];
        for (name, x) in nonneg {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {x}")));
            }
        }
        if self.sites < 2 || self.gp_sites < 2 {
            return Err(Error::Config("lattices need at least 2 sites".into()));
        }
        if self.krylov_dim < 2 || self.min_iterations == 0 || self.samples == 0 {
            return Err(Error::Config("krylov_dim, min_iterations and samples must be positive".into()));
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::Config("n_list must be a nonempty list of positive integers".into()));
        }
        if self.orbital_re.len() != self.sites || self.orbital_im.len() != self.sites {
            return Err(Error::Config(format!(
                "orbital_re and orbital_im need {} entries (one per site)",
                self.sites
            )));
        }
        if self.observable.len() != self.sites {
            return Err(Error::Config(format!("observable needs {} diagonal entries", self.sites)));
        }
        if self.slope_min >= self.slope_max {
            return Err(Error::Config("slope_min must be below slope_max".into()));
        }
        if self.widths.iter().any(|w| !(*w > 0.0)) || self.widths.is_empty() {
            return Err(Error::Config("widths must be positive".into()));
        }
        if self.mu_list.iter().any(|m| !(*m >= 0.0)) || self.mu_list.is_empty() {
            return Err(Error::Config("mu_list must be nonnegative".into()));
        }
        for &t in &self.output_times {
            let steps = t / self.dt;
            if !(0.0..=self.t_final * (1.0 + 1e-12)).contains(&t) || (steps - steps.round()).abs() > 1e-6 {
                return Err(Error::Config(format!(
                    "output time {t} must lie in [0, t_final] on the dt grid"
                )));
            }
        }
        if self.experiment == Experiment::Clt && self.sampling && self.seed.is_none() {
            return Err(Error::Config("sampling needs an explicit seed".into()));
        }
        Ok(())
    }

    /// Output times sorted, deduplicated, and including `t_final`.
    pub fn times(&self) -> Vec<f64> {
        let mut t = self.output_times.clone();
        t.push(self.t_final);
        t.sort_by(f64::total_cmp);
        t.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        t
    }

    pub fn fock_options(&self) -> crate::fock::FockOptions {
        crate::fock::FockOptions {
            krylov: crate::krylov::KrylovOptions {
                tol: self.krylov_tol,
                max_dim: self.krylov_dim,
                ..Default::default()
            },
            truncation_tol: self.truncation_tol,
            tail_tol: self.tail_tol,
        }
    }

    /// Fock cutoff used for `n` particles with coherent data.
    pub fn cutoff(&self, n: usize) -> usize {
        crate::fock::FockBasis::cutoff_with(n as f64, self.cutoff_sigmas, self.cutoff_offset)
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(s) => s,
        other => other.to_string(),
    }
}

struct Value<'a>(&'a str);

impl Value<'_> {
    fn string(&self) -> Result<String> {
        let s = self.0.trim();
        if let Some(inner) = s.strip_prefix('"') {
            return inner
                .strip_suffix('"')
                .map(str::to_string)
                .ok_or_else(|| Error::Config(format!("unterminated string {s}")));
        }
        if s.is_empty() {
            return Err(Error::Config("empty value".into()));
        }
        Ok(s.to_string())
    }

    fn f64(&self) -> Result<f64> {
        let s = self.string()?;
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::Config(format!("expected a number, got `{s}`")))
    }

    fn u64(&self) -> Result<u64> {
        let s = self.string()?;
        s.parse().map_err(|_| Error::Config(format!("expected a nonnegative integer, got `{s}`")))
    }

    fn usize(&self) -> Result<usize> {
        Ok(self.u64()? as usize)
    }

    fn bool(&self) -> Result<bool> {
        match self.string()?.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            s => Err(Error::Config(format!("expected true or false, got `{s}`"))),
        }
    }

    fn items(&self) -> Result<Vec<Value<'_>>> {
        let s = self.0.trim();
        let inner = match s.strip_prefix('[') {
            Some(rest) => rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("unterminated list {s}")))?,
            None => s,
        };
        if inner.trim().is_empty() {
            return Ok(Vec::new());
        }
        Ok(inner.split(',').map(|x| Value(x.trim())).collect())
    }

    fn f64_list(&self) -> Result<Vec<f64>> {
        self.items()?.iter().map(Value::f64).collect()
    }

    fn usize_list(&self) -> Result<Vec<usize>> {
        self.items()?.iter().map(Value::usize).collect()
    }
}

//! Experiment configuration: flat `key = value` lines with dotted section
//! prefixes (`solver.cfl_factor = 0.25`), read as TOML.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ahflow_core::diagnostics::{KappaDecayOptions, Slack};
use ahflow_core::evolution::Formulation;
use ahflow_core::SolverConfig;
use toml::Value;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", at(*line))]
    Syntax {
        line: Option<usize>,
        message: String,
    },
    #[error("{}: unknown key `{field}`", at(*line))]
    UnknownKey { line: Option<usize>, field: String },
    #[error("{}: `{field}` {message}", at(*line))]
    Invalid {
        line: Option<usize>,
        field: String,
        message: String,
    },
}

impl ConfigError {
    pub fn field(&self) -> Option<&str> {
        match self {
            Self::UnknownKey { field, .. } | Self::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Syntax { line, .. }
            | Self::UnknownKey { line, .. }
            | Self::Invalid { line, .. } => *line,
            Self::Read { .. } => None,
        }
    }
}

fn at(line: Option<usize>) -> String {
    line.map_or_else(|| "command line".to_string(), |l| format!("line {l}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Hyperbolic,
    GaussianBump,
    PolynomialBump,
    CustomTable,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Hyperbolic => "hyperbolic",
            Self::GaussianBump => "gaussian_bump",
            Self::PolynomialBump => "polynomial_bump",
            Self::CustomTable => "custom_table",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Self::Hyperbolic,
            Self::GaussianBump,
            Self::PolynomialBump,
            Self::CustomTable,
        ]
        .into_iter()
        .find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    pub family: FamilyKind,
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    /// Two-column `r,lambda` CSV for `custom_table`, relative to the config file.
    pub table: Option<PathBuf>,
    /// Size of a seeded random smooth perturbation added to the family.
    pub perturbation: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            family: FamilyKind::GaussianBump,
            amplitude: -0.5,
            center: 0.0,
            width: 1.0,
            table: None,
            perturbation: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Amplitude,
    Center,
    Width,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Amplitude => "amplitude",
            Self::Center => "center",
            Self::Width => "width",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Self::Amplitude, Self::Center, Self::Width]
            .into_iter()
            .find(|p| p.name() == s)
    }

    pub fn apply(self, initial: &mut InitialConfig, value: f64) {
        match self {
            Self::Amplitude => initial.amplitude = value,
            Self::Center => initial.center = value,
            Self::Width => initial.width = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            parameter: SweepParameter::Amplitude,
            values: vec![1.05, 1.1, 1.15, 1.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    /// Random admissible profiles in the identity suite.
    pub random_profiles: usize,
    /// Horizon of the envelope matrix runs.
    pub t_end: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            random_profiles: 100,
            t_end: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dimension: usize,
    pub grid: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub initial: InitialConfig,
    pub solver: SolverConfig,
    pub slack: Slack,
    pub kappa: KappaDecayOptions,
    pub sweep: SweepConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dimension: 3,
            grid: 256,
            seed: 0,
            output: PathBuf::from("out"),
            initial: InitialConfig::default(),
            solver: SolverConfig::default(),
            slack: Slack::default(),
            kappa: KappaDecayOptions::default(),
            sweep: SweepConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

/// Flag values that replace config keys after the file is read.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub dimension: Option<usize>,
    pub grid: Option<usize>,
    pub t_end: Option<f64>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let Some(table) = &cfg.initial.table {
            if table.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.initial.table = Some(base.join(table));
            }
        }
        cfg.apply(overrides)?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table =
            text.parse()
                .map_err(|e: toml::de::Error| ConfigError::Syntax {
                    line: e.span().map(|s| line_at(text, s.start)),
                    message: e.message().to_string(),
                })?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);
        let mut cfg = Self::default();
        for (key, value) in entries {
            let line = find_line(text, &key);
            cfg.set(&key, &value).map_err(|e| e.located(&key, line))?;
        }
        cfg.validate().map_err(|e| match e {
            ConfigError::Invalid { field, message, .. } => ConfigError::Invalid {
                line: find_line(text, &field),
                field,
                message,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(n) = o.dimension {
            self.dimension = n;
        }
        if let Some(n) = o.grid {
            self.grid = n;
        }
        if let Some(t) = o.t_end {
            self.solver.t_end = t;
        }
        if let Some(p) = &o.output {
            self.output = p.clone();
        }
        self.validate()
    }

    fn set(&mut self, key: &str, v: &Value) -> Result<(), FieldError> {
        let s = &mut self.solver;
        match key {
            "dimension" => self.dimension = uint(v)?,
            "grid" => self.grid = uint(v)?,
            "seed" => self.seed = uint(v)? as u64,
            "output" => self.output = PathBuf::from(string(v)?),
            "initial.family" => {
                self.initial.family = FamilyKind::parse(string(v)?).ok_or_else(|| {
                    FieldError::new(
                        "must be hyperbolic, gaussian_bump, polynomial_bump or custom_table",
                    )
                })?
            }
            "initial.amplitude" => self.initial.amplitude = float(v)?,
            "initial.center" => self.initial.center = float(v)?,
            "initial.width" => self.initial.width = float(v)?,
            "initial.table" => self.initial.table = Some(PathBuf::from(string(v)?)),
            "initial.perturbation" => self.initial.perturbation = float(v)?,
            "solver.formulation" => {
                s.formulation = Formulation::parse(string(v)?)
                    .ok_or_else(|| FieldError::new("must be lambda_primary or w_oracle"))?
            }
            "solver.cfl_factor" => s.cfl_factor = float(v)?,
            "solver.t_end" => s.t_end = float(v)?,
            "solver.blowup_threshold" => s.blowup_threshold = float(v)?,
            "solver.neckpinch_threshold" => s.neckpinch_threshold = float(v)?,
            "solver.convergence_tol" => s.convergence_tol = float(v)?,
            "solver.record_interval" => s.record_interval = float(v)?,
            "solver.snapshot_stride" => s.snapshot_stride = uint(v)?,
            "solver.w_radius" => s.w_radius = float(v)?,
            "solver.w_nodes" => s.w_nodes = uint(v)?,
            "solver.coefficient_defect" => s.coefficient_defect = float(v)?,
            "diagnostics.atol" => self.slack.atol = float(v)?,
            "diagnostics.ctol" => self.slack.ctol = float(v)?,
            "diagnostics.b" => self.kappa.b = float(v)?,
            "diagnostics.rate_window" => match floats(v)?[..] {
                [lo, hi] => self.kappa.rate_window = (lo, hi),
                _ => return Err(FieldError::new("must be a two-element list")),
            },
            "diagnostics.tail_fraction" => self.kappa.tail_fraction = float(v)?,
            "diagnostics.max_fit_rms" => self.kappa.max_fit_rms = float(v)?,
            "sweep.parameter" => {
                self.sweep.parameter = SweepParameter::parse(string(v)?)
                    .ok_or_else(|| FieldError::new("must be amplitude, center or width"))?
            }
            "sweep.values" => self.sweep.values = floats(v)?,
            "verify.random_profiles" => self.verify.random_profiles = uint(v)?,
            "verify.t_end" => self.verify.t_end = float(v)?,
            _ => return Err(FieldError::unknown()),
        }
        Ok(())
    }

    /// Range checks; each failure names the offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |field: &str, message: &str| {
            Err(ConfigError::Invalid {
                line: None,
                field: field.to_string(),
                message: message.to_string(),
            })
        };
        if self.dimension < 3 {
            return fail("dimension", "must be at least 3");
        }
        if self.grid < ahflow_core::RadialGrid::MIN_SIZE {
            return fail(
                "grid",
                &format!("must be at least {}", ahflow_core::RadialGrid::MIN_SIZE),
            );
        }
        let i = &self.initial;
        if !(i.width > 0.0 && i.width.is_finite()) {
            return fail("initial.width", "must be positive");
        }
        if !(i.center >= 0.0 && i.center.is_finite()) {
            return fail("initial.center", "must be nonnegative");
        }
        if !i.amplitude.is_finite() {
            return fail("initial.amplitude", "must be finite");
        }
        if !(i.perturbation >= 0.0 && i.perturbation.is_finite()) {
            return fail("initial.perturbation", "must be nonnegative");
        }
        if i.family == FamilyKind::CustomTable && i.table.is_none() {
            return fail("initial.table", "is required for custom_table");
        }
        let s = &self.solver;
        if !(s.cfl_factor > 0.0 && s.cfl_factor <= 1.0) {
            return fail("solver.cfl_factor", "must lie in (0, 1]");
        }
        let solver_fields = [
            ("solver.t_end", s.t_end >= 0.0 && s.t_end.is_finite()),
            ("solver.blowup_threshold", s.blowup_threshold > 0.0),
            (
                "solver.neckpinch_threshold",
                s.neckpinch_threshold > 0.0 && s.neckpinch_threshold < 1.0,
            ),
            ("solver.convergence_tol", s.convergence_tol >= 0.0),
            (
                "solver.record_interval",
                s.record_interval > 0.0 && s.record_interval.is_finite(),
            ),
            ("solver.snapshot_stride", s.snapshot_stride > 0),
            (
                "solver.w_radius",
                s.w_radius > 0.0 && s.w_radius.is_finite(),
            ),
            ("solver.w_nodes", s.w_nodes >= 16),
            (
                "solver.coefficient_defect",
                s.coefficient_defect.is_finite(),
            ),
        ];
        if let Some((field, _)) = solver_fields.iter().find(|(_, ok)| !ok) {
            return fail(field, "is out of range");
        }
        let d = [
            ("diagnostics.atol", self.slack.atol >= 0.0),
            ("diagnostics.ctol", self.slack.ctol >= 0.0),
            ("diagnostics.b", self.kappa.b > 0.0 && self.kappa.b < 1.0),
            (
                "diagnostics.rate_window",
                self.kappa.rate_window.0 < self.kappa.rate_window.1,
            ),
            (
                "diagnostics.tail_fraction",
                self.kappa.tail_fraction > 0.0 && self.kappa.tail_fraction <= 1.0,
            ),
            ("diagnostics.max_fit_rms", self.kappa.max_fit_rms > 0.0),
            (
                "verify.t_end",
                self.verify.t_end > 0.0 && self.verify.t_end.is_finite(),
            ),
        ];
        if let Some((field, _)) = d.iter().find(|(_, ok)| !ok) {
            return fail(field, "is out of range");
        }
        if self.sweep.values.is_empty() {
            return fail("sweep.values", "must not be empty");
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return fail("sweep.values", "must be finite");
        }
        Ok(())
    }

    /// Every key with its effective value; parsing this text reproduces `self`.
    pub fn resolved(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: Value| {
            let _ = writeln!(out, "{k} = {v}");
        };
        let f = Value::Float;
        let i = |n: usize| Value::Integer(n as i64);
        let st = |s: &str| Value::String(s.to_string());
        let path = |p: &Path| Value::String(p.to_string_lossy().into_owned());
        let list = |xs: &[f64]| Value::Array(xs.iter().map(|&x| Value::Float(x)).collect());
        put("dimension", i(self.dimension));
        put("grid", i(self.grid));
        put("seed", Value::Integer(self.seed as i64));
        put("output", path(&self.output));
        let ini = &self.initial;
        put("initial.family", st(ini.family.name()));
        put("initial.amplitude", f(ini.amplitude));
        put("initial.center", f(ini.center));
        put("initial.width", f(ini.width));
        if let Some(t) = &ini.table {
            put("initial.table", path(t));
        }
        put("initial.perturbation", f(ini.perturbation));
        let s = &self.solver;
        put("solver.formulation", st(s.formulation.name()));
        put("solver.cfl_factor", f(s.cfl_factor));
        put("solver.t_end", f(s.t_end));
        put("solver.blowup_threshold", f(s.blowup_threshold));
        put("solver.neckpinch_threshold", f(s.neckpinch_threshold));
        put("solver.convergence_tol", f(s.convergence_tol));
        put("solver.record_interval", f(s.record_interval));
        put("solver.snapshot_stride", i(s.snapshot_stride));
        put("solver.w_radius", f(s.w_radius));
        put("solver.w_nodes", i(s.w_nodes));
        put("solver.coefficient_defect", f(s.coefficient_defect));
        put("diagnostics.atol", f(self.slack.atol));
        put("diagnostics.ctol", f(self.slack.ctol));
        put("diagnostics.b", f(self.kappa.b));
        put(
            "diagnostics.rate_window",
            list(&[self.kappa.rate_window.0, self.kappa.rate_window.1]),
        );
        put("diagnostics.tail_fraction", f(self.kappa.tail_fraction));
        put("diagnostics.max_fit_rms", f(self.kappa.max_fit_rms));
        put("sweep.parameter", st(self.sweep.parameter.name()));
        put("sweep.values", list(&self.sweep.values));
        put("verify.random_profiles", i(self.verify.random_profiles));
        put("verify.t_end", f(self.verify.t_end));
        out
    }

    pub fn kappa_options(&self) -> KappaDecayOptions {
        KappaDecayOptions {
            blowup_threshold: self.solver.blowup_threshold,
            ..self.kappa
        }
    }
}

/// A value-level error before its line is known.
#[derive(Debug)]
struct FieldError {
    unknown: bool,
    message: String,
}

impl FieldError {
    fn new(message: &str) -> Self {
        Self {
            unknown: false,
            message: message.to_string(),
        }
    }

    fn unknown() -> Self {
        Self {
            unknown: true,
            message: String::new(),
        }
    }

    fn located(self, field: &str, line: Option<usize>) -> ConfigError {
        let field = field.to_string();
        if self.unknown {
            ConfigError::UnknownKey { line, field }
        } else {
            ConfigError::Invalid {
                line,
                field,
                message: self.message,
            }
        }
    }
}

fn float(v: &Value) -> Result<f64, FieldError> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(n) => Ok(*n as f64),
        _ => Err(FieldError::new("must be a number")),
    }
}

fn uint(v: &Value) -> Result<usize, FieldError> {
    match v {
        Value::Integer(n) if *n >= 0 => Ok(*n as usize),
        _ => Err(FieldError::new("must be a nonnegative integer")),
    }
}

fn string(v: &Value) -> Result<&str, FieldError> {
    v.as_str()
        .ok_or_else(|| FieldError::new("must be a quoted string"))
}

fn floats(v: &Value) -> Result<Vec<f64>, FieldError> {
    match v {
        Value::Array(xs) => xs.iter().map(float).collect(),
        _ => Err(FieldError::new("must be a list of numbers")),
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// First line that assigns `key`, either dotted or under a `[section]` header.
fn find_line(text: &str, key: &str) -> Option<usize> {
    let (section, leaf) = key.rsplit_once('.').unwrap_or(("", key));
    let assigns = |line: &str, k: &str| {
        line.strip_prefix(k)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    };
    let mut current = "";
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = h.trim();
            continue;
        }
        if assigns(line, key) || (current == section && assigns(line, leaf)) {
            return Some(i + 1);
        }
    }
    None
}

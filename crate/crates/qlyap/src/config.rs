//! Flat `key=value` run configuration.
//!
//! A config file holds one `key=value` pair per line; blank lines and lines
//! starting with `#` are ignored. Keys are the long flag names without the
//! leading dashes, and flags given on the command line override file values.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use qlyap_core::ensemble::Mode;
use qlyap_core::model::Domain;
use qlyap_core::sim::KillingRule;
use qlyap_core::spectral;
use qlyap_core::zoo::{self, Params};
use qlyap_core::SdeModel;

use crate::error::{CliError, CliResult};

/// Ordered `(key, value)` pairs; later entries win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(Vec<(String, String)>);

impl Settings {
    pub fn new() -> Self {
        Settings(Vec::new())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.0.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.0.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Overlays `other` on top of `self`.
    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in other.iter() {
            self.set(k, v);
        }
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut out = Settings::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {}: expected key=value", no + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(CliError::usage(format!("config line {}: empty key", no + 1)));
            }
            out.set(k, v.trim());
        }
        Ok(out)
    }

    pub fn read(path: &str) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::Io { path: path.to_string(), source })?;
        Settings::parse(&text)
    }
}

/// Domain override as written on the command line.
///
/// `a:b` is an interval, `box:lo1,lo2:hi1,hi2` a box, and `ball:r` or
/// `ball:c1,c2:r` a ball (centered at the origin when no center is given).
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Interval { a: f64, b: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Option<Vec<f64>>, radius: f64 },
}

impl DomainSpec {
    pub fn resolve(&self, dim: usize) -> CliResult<Domain> {
        let d = match self {
            DomainSpec::Interval { a, b } => Domain::interval(*a, *b),
            DomainSpec::Box { lo, hi } => Domain::boxed(lo.clone(), hi.clone()),
            DomainSpec::Ball { center, radius } => {
                Domain::ball(center.clone().unwrap_or_else(|| vec![0.0; dim]), *radius)
            }
        };
        Ok(d?)
    }
}

impl FromStr for DomainSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let bad = || CliError::usage(format!("cannot parse domain '{s}' (expected a:b, box:lo:hi or ball:[c:]r)"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["box", lo, hi] => Ok(DomainSpec::Box { lo: parse_list(lo)?, hi: parse_list(hi)? }),
            ["ball", r] => Ok(DomainSpec::Ball { center: None, radius: parse_f64("domain", r)? }),
            ["ball", c, r] => Ok(DomainSpec::Ball { center: Some(parse_list(c)?), radius: parse_f64("domain", r)? }),
            [a, b] => Ok(DomainSpec::Interval { a: parse_f64("domain", a)?, b: parse_f64("domain", b)? }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainSpec::Interval { a, b } => write!(f, "{a:?}:{b:?}"),
            DomainSpec::Box { lo, hi } => write!(f, "box:{}:{}", format_list(lo), format_list(hi)),
            DomainSpec::Ball { center: None, radius } => write!(f, "ball:{radius:?}"),
            DomainSpec::Ball { center: Some(c), radius } => write!(f, "ball:{}:{radius:?}", format_list(c)),
        }
    }
}

/// Sweep values: `lo:hi:step` or an explicit comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueList {
    Range { lo: f64, hi: f64, step: f64 },
    List(Vec<f64>),
}

impl ValueList {
    pub fn values(&self) -> Vec<f64> {
        match self {
            ValueList::Range { lo, hi, step } => {
                let n = ((hi - lo) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| lo + k as f64 * step).collect()
            }
            ValueList::List(v) => v.clone(),
        }
    }
}

impl FromStr for ValueList {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let list = if let [lo, hi, step] = s.split(':').collect::<Vec<_>>().as_slice() {
            let (lo, hi, step) = (parse_f64("values", lo)?, parse_f64("values", hi)?, parse_f64("values", step)?);
            if !(step > 0.0) || !(hi > lo) {
                return Err(CliError::usage(format!("values range '{s}' needs lo < hi and step > 0")));
            }
            ValueList::Range { lo, hi, step }
        } else {
            ValueList::List(parse_list(s)?)
        };
        let v = list.values();
        if v.len() < 2 {
            return Err(CliError::usage("a sweep needs at least two values"));
        }
        if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::usage(format!("sweep values '{s}' must be finite and strictly increasing")));
        }
        Ok(list)
    }
}

impl fmt::Display for ValueList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueList::Range { lo, hi, step } => write!(f, "{lo:?}:{hi:?}:{step:?}"),
            ValueList::List(v) => f.write_str(&format_list(v)),
        }
    }
}

/// Conditioning scheme; `Auto` picks rejection for short horizons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    Auto,
    Fixed(Mode),
}

impl FromStr for ModeChoice {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "auto" => Ok(ModeChoice::Auto),
            "rejection" => Ok(ModeChoice::Fixed(Mode::Rejection)),
            "fv" => Ok(ModeChoice::Fixed(Mode::FlemingViot)),
            _ => Err(CliError::usage(format!("mode must be rejection, fv or auto, got '{s}'"))),
        }
    }
}

impl fmt::Display for ModeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeChoice::Auto => "auto",
            ModeChoice::Fixed(Mode::Rejection) => "rejection",
            ModeChoice::Fixed(Mode::FlemingViot) => "fv",
        })
    }
}

fn parse_killing(s: &str) -> CliResult<KillingRule> {
    match s {
        "bridge" => Ok(KillingRule::Bridge),
        "segment" => Ok(KillingRule::Segment),
        _ => Err(CliError::usage(format!("killing must be bridge or segment, got '{s}'"))),
    }
}

fn killing_name(k: KillingRule) -> &'static str {
    match k {
        KillingRule::Bridge => "bridge",
        KillingRule::Segment => "segment",
    }
}

fn parse_f64(key: &str, s: &str) -> CliResult<f64> {
    s.trim().parse::<f64>().map_err(|_| CliError::usage(format!("{key}: '{s}' is not a number")))
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',').map(|v| parse_f64("list", v)).collect()
}

fn format_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn parse_points(s: &str) -> CliResult<Vec<Vec<f64>>> {
    s.split(';').map(parse_list).collect()
}

fn format_points(p: &[Vec<f64>]) -> String {
    p.iter().map(|v| format_list(v)).collect::<Vec<_>>().join(";")
}

/// Every non-model key the config understands, in serialization order.
pub const KEYS: &[&str] = &[
    "model", "sigma", "domain", "n", "dt", "t", "N", "seed", "mode", "killing", "islands", "x0", "v0",
    "sep", "t-grid", "eps", "tol", "rho", "bins", "q", "r", "h", "h1", "h2", "lambda", "x0s",
    "directions", "path-id", "param", "values", "out", "svg", "check-spectral",
];

/// Model parameter keys across the zoo.
pub fn model_parameter_keys() -> Vec<&'static str> {
    let mut keys: Vec<&str> = zoo::ZOO_NAMES.iter().flat_map(|n| zoo::parameter_names(n).iter().copied()).collect();
    keys.sort_unstable();
    keys.dedup();
    keys
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: String,
    /// Model parameters sorted by name.
    pub params: Vec<(String, f64)>,
    pub sigma: f64,
    pub domain: Option<DomainSpec>,
    /// Interior grid points of spectral solves.
    pub n: usize,
    pub dt: f64,
    pub t: f64,
    pub particles: usize,
    pub seed: u64,
    pub mode: ModeChoice,
    pub killing: KillingRule,
    pub islands: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub v0: Option<Vec<f64>>,
    /// Initial separation of synchronization pairs along `e_1`.
    pub sep: f64,
    pub t_grid: Option<Vec<f64>>,
    pub eps: Option<f64>,
    pub tol: Option<f64>,
    /// Allowed fraction of non-synchronizing pairs.
    pub rho: f64,
    pub bins: usize,
    pub q: f64,
    pub r: f64,
    pub h: String,
    pub h1: String,
    pub h2: String,
    /// Reference exponent where no spectral solve is available.
    pub lambda: Option<f64>,
    pub x0s: Option<Vec<Vec<f64>>>,
    pub directions: usize,
    pub path_id: u64,
    pub param: Option<String>,
    pub values: Option<ValueList>,
    pub out: Option<String>,
    pub svg: Option<String>,
    pub check_spectral: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: "pitchfork".into(),
            params: Vec::new(),
            sigma: 1.0,
            domain: None,
            n: spectral::DEFAULT_POINTS,
            dt: 1e-3,
            t: 10.0,
            particles: 10_000,
            seed: 1,
            mode: ModeChoice::Auto,
            killing: KillingRule::Bridge,
            islands: None,
            x0: None,
            v0: None,
            sep: 1e-3,
            t_grid: None,
            eps: None,
            tol: None,
            rho: 0.2,
            bins: 64,
            q: 0.75,
            r: 0.25,
            h: "x".into(),
            h1: "x".into(),
            h2: "x".into(),
            lambda: None,
            x0s: None,
            directions: 4,
            path_id: 0,
            param: None,
            values: None,
            out: None,
            svg: None,
            check_spectral: false,
        }
    }
}

fn positive(key: &str, v: f64) -> CliResult<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::usage(format!("{key} must be positive and finite, got {v}")))
    }
}

fn positive_int(key: &str, s: &str) -> CliResult<usize> {
    match s.trim().parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(CliError::usage(format!("{key} must be a positive integer, got '{s}'"))),
    }
}

fn parse_bool(key: &str, s: &str) -> CliResult<bool> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::usage(format!("{key} must be true or false, got '{s}'"))),
    }
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> CliResult<Self> {
        let mut c = RunConfig::default();
        let param_keys = model_parameter_keys();
        for (k, v) in s.iter() {
            match k {
                "model" => c.model = v.to_string(),
                "sigma" => c.sigma = positive(k, parse_f64(k, v)?)?,
                "domain" => c.domain = Some(v.parse()?),
                "n" => c.n = positive_int(k, v)?,
                "dt" => c.dt = positive(k, parse_f64(k, v)?)?,
                "t" => c.t = positive(k, parse_f64(k, v)?)?,
                "N" => c.particles = positive_int(k, v)?,
                "seed" => c.seed = v.parse().map_err(|_| CliError::usage(format!("seed must be a u64, got '{v}'")))?,
                "mode" => c.mode = v.parse()?,
                "killing" => c.killing = parse_killing(v)?,
                "islands" => c.islands = Some(positive_int(k, v)?),
                "x0" => c.x0 = Some(parse_list(v)?),
                "v0" => c.v0 = Some(parse_list(v)?),
                "sep" => c.sep = positive(k, parse_f64(k, v)?)?,
                "t-grid" => {
                    let g = parse_list(v)?;
                    for t in &g {
                        positive(k, *t)?;
                    }
                    c.t_grid = Some(g)
                }
                "eps" => c.eps = Some(positive(k, parse_f64(k, v)?)?),
                "tol" => c.tol = Some(positive(k, parse_f64(k, v)?)?),
                "rho" => c.rho = parse_f64(k, v)?,
                "bins" => c.bins = positive_int(k, v)?,
                "q" => c.q = parse_f64(k, v)?,
                "r" => c.r = parse_f64(k, v)?,
                "h" => c.h = v.to_string(),
                "h1" => c.h1 = v.to_string(),
                "h2" => c.h2 = v.to_string(),
                "lambda" => c.lambda = Some(parse_f64(k, v)?),
                "x0s" => c.x0s = Some(parse_points(v)?),
                "directions" => c.directions = positive_int(k, v)?,
                "path-id" => c.path_id = v.parse().map_err(|_| CliError::usage(format!("path-id must be a u64, got '{v}'")))?,
                "param" => c.param = Some(v.to_string()),
                "values" => c.values = Some(v.parse()?),
                "out" => c.out = Some(v.to_string()),
                "svg" => c.svg = Some(v.to_string()),
                "check-spectral" => c.check_spectral = parse_bool(k, v)?,
                p if param_keys.contains(&p) => {
                    let value = parse_f64(p, v)?;
                    match c.params.iter_mut().find(|(name, _)| name == p) {
                        Some(slot) => slot.1 = value,
                        None => c.params.push((p.to_string(), value)),
                    }
                }
                other => return Err(CliError::usage(format!("unknown option '{other}'"))),
            }
        }
        c.params.sort_by(|a, b| a.0.cmp(&b.0));
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> CliResult<()> {
        if !zoo::ZOO_NAMES.contains(&self.model.as_str()) {
            return Err(CliError::usage(format!(
                "unknown model '{}', expected one of {:?}",
                self.model,
                zoo::ZOO_NAMES
            )));
        }
        let accepted = zoo::parameter_names(&self.model);
        if let Some((p, _)) = self.params.iter().find(|(p, _)| !accepted.contains(&p.as_str())) {
            return Err(CliError::usage(format!("model '{}' has no parameter '{p}'", self.model)));
        }
        if self.n < 8 {
            return Err(CliError::usage("n must be at least 8"));
        }
        Ok(())
    }

    /// Serializes to the `key=value` form accepted by [`Settings::parse`].
    pub fn to_settings(&self) -> Settings {
        let mut s = Settings::new();
        s.set("model", self.model.clone());
        for (k, v) in &self.params {
            s.set(k, format!("{v:?}"));
        }
        s.set("sigma", format!("{:?}", self.sigma));
        if let Some(d) = &self.domain {
            s.set("domain", d.to_string());
        }
        s.set("n", self.n.to_string());
        s.set("dt", format!("{:?}", self.dt));
        s.set("t", format!("{:?}", self.t));
        s.set("N", self.particles.to_string());
        s.set("seed", self.seed.to_string());
        s.set("mode", self.mode.to_string());
        s.set("killing", killing_name(self.killing));
        if let Some(i) = self.islands {
            s.set("islands", i.to_string());
        }
        if let Some(x) = &self.x0 {
            s.set("x0", format_list(x));
        }
        if let Some(v) = &self.v0 {
            s.set("v0", format_list(v));
        }
        s.set("sep", format!("{:?}", self.sep));
        if let Some(g) = &self.t_grid {
            s.set("t-grid", format_list(g));
        }
        if let Some(e) = self.eps {
            s.set("eps", format!("{e:?}"));
        }
        if let Some(t) = self.tol {
            s.set("tol", format!("{t:?}"));
        }
        s.set("rho", format!("{:?}", self.rho));
        s.set("bins", self.bins.to_string());
        s.set("q", format!("{:?}", self.q));
        s.set("r", format!("{:?}", self.r));
        s.set("h", self.h.clone());
        s.set("h1", self.h1.clone());
        s.set("h2", self.h2.clone());
        if let Some(l) = self.lambda {
            s.set("lambda", format!("{l:?}"));
        }
        if let Some(p) = &self.x0s {
            s.set("x0s", format_points(p));
        }
        s.set("directions", self.directions.to_string());
        s.set("path-id", self.path_id.to_string());
        if let Some(p) = &self.param {
            s.set("param", p.clone());
        }
        if let Some(v) = &self.values {
            s.set("values", v.to_string());
        }
        if let Some(o) = &self.out {
            s.set("out", o.clone());
        }
        if let Some(o) = &self.svg {
            s.set("svg", o.clone());
        }
        s.set("check-spectral", self.check_spectral.to_string());
        s
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_settings().iter() {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn model_params(&self) -> Params {
        let mut p = Params::new();
        for (k, v) in &self.params {
            p.set(k, *v);
        }
        p
    }

    pub fn build_model(&self) -> CliResult<SdeModel> {
        let params = self.model_params();
        // dimension of the default entry decides the ball center
        let dim = zoo::build(&self.model, &params, self.sigma, None)?.model.dim();
        let domain = self.domain.as_ref().map(|d| d.resolve(dim)).transpose()?;
        Ok(zoo::build(&self.model, &params, self.sigma, domain)?.model)
    }

    /// Sets a model parameter or `sigma` (used by sweeps).
    pub fn with_value(&self, name: &str, value: f64) -> CliResult<RunConfig> {
        let mut c = self.clone();
        if name == "sigma" {
            c.sigma = positive("sigma", value)?;
            return Ok(c);
        }
        if !zoo::parameter_names(&self.model).contains(&name) {
            return Err(CliError::usage(format!("model '{}' has no parameter '{name}'", self.model)));
        }
        match c.params.iter_mut().find(|(k, _)| k == name) {
            Some(slot) => slot.1 = value,
            None => c.params.push((name.to_string(), value)),
        }
        c.params.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(c)
    }
}

/// A parameter sweep over spectral solves.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
    pub template: RunConfig,
}

impl SweepSpec {
    pub fn from_config(c: &RunConfig) -> CliResult<Self> {
        let param = c.param.clone().ok_or_else(|| CliError::usage("sweep needs --param"))?;
        let values = c.values.as_ref().ok_or_else(|| CliError::usage("sweep needs --values"))?.values();
        // validates the parameter name
        c.with_value(&param, values[0])?;
        Ok(SweepSpec { param, values, template: c.clone() })
    }
}

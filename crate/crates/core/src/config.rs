//! Run configuration: flat `key = value` text with `#` comments.

use std::fmt;

use thiserror::Error;

use crate::presets::{Preset, PresetKind};
use crate::stepper::{DragMode, Scheme};

#[derive(Debug, Error, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "{k}: ")?;
        }
        f.write_str(&self.message)
    }
}

fn err(line: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, key: Some(key.to_string()), message: message.into() }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub nz_a: usize,
    pub nz_o: usize,
    pub p_s: f64,
    pub lambda: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub drag_mode: DragMode,
    pub forcing: Preset,
    pub init: Preset,
    pub output_every: u64,
    pub out_dir: String,
}

impl RunConfig {
    /// A configuration with the given grid and step and defaults elsewhere.
    pub fn new(nx: usize, ny: usize, nz_a: usize, nz_o: usize, dt: f64, t_end: f64) -> Self {
        Self {
            nx,
            ny,
            nz_a,
            nz_o,
            p_s: 1.0,
            lambda: 0.0,
            dt,
            t_end,
            scheme: Scheme::BackwardEuler,
            picard_tol: 1e-11,
            picard_max: 25,
            drag_mode: DragMode::SemiImplicitLag,
            forcing: Preset::zero(),
            init: Preset::random(1.0, 0),
            output_every: 10,
            out_dir: "out".to_string(),
        }
    }

    pub fn step_config(&self) -> crate::stepper::StepConfig {
        crate::stepper::StepConfig {
            scheme: self.scheme,
            picard_tol: self.picard_tol,
            picard_max: self.picard_max,
            lambda: self.lambda,
            drag_mode: self.drag_mode,
            ..crate::stepper::StepConfig::new(self.dt)
        }
    }

    /// Canonical text form; parsing it yields an equal configuration.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("nx", self.nx.to_string());
        kv("ny", self.ny.to_string());
        kv("nz_a", self.nz_a.to_string());
        kv("nz_o", self.nz_o.to_string());
        kv("p_s", format!("{:?}", self.p_s));
        kv("lambda", format!("{:?}", self.lambda));
        kv("dt", format!("{:?}", self.dt));
        kv("t_end", format!("{:?}", self.t_end));
        kv("scheme", scheme_name(self.scheme).into());
        kv("picard_tol", format!("{:?}", self.picard_tol));
        kv("picard_max", self.picard_max.to_string());
        kv("drag_mode", drag_name(self.drag_mode).into());
        for (prefix, p) in [("forcing", &self.forcing), ("init", &self.init)] {
            kv(prefix, p.kind.name().into());
            kv(&format!("{prefix}_amplitude"), format!("{:?}", p.amplitude));
            kv(&format!("{prefix}_seed"), p.seed.to_string());
            kv(&format!("{prefix}_decay"), format!("{:?}", p.decay));
        }
        kv("output_every", self.output_every.to_string());
        kv("out_dir", self.out_dir.clone());
        s
    }
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::BackwardEuler => "backward_euler",
        Scheme::CrankNicolson => "crank_nicolson",
    }
}

fn drag_name(d: DragMode) -> &'static str {
    match d {
        DragMode::SemiImplicitLag => "semi_implicit_lag",
        DragMode::Explicit => "explicit",
        DragMode::Linear => "linear",
        DragMode::Off => "off",
    }
}

const KEYS: &[&str] = &[
    "nx", "ny", "nz_a", "nz_o", "p_s", "lambda", "dt", "t_end", "scheme", "picard_tol", "picard_max",
    "drag_mode", "forcing", "forcing_amplitude", "forcing_seed", "forcing_decay", "init",
    "init_amplitude", "init_seed", "init_decay", "output_every", "out_dir",
];

struct Entries(Vec<(String, String, usize)>);

impl Entries {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.0.iter().find(|e| e.0 == key).map(|e| (e.1.as_str(), e.2))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<(T, Option<usize>), ConfigError> {
        match self.get(key) {
            None => Ok((default, None)),
            Some((v, line)) => v
                .parse::<T>()
                .map(|x| (x, Some(line)))
                .map_err(|_| err(Some(line), key, format!("cannot parse `{v}`"))),
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries = Entries(Vec::new());
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError {
                line: Some(line),
                key: None,
                message: format!("expected `key = value`, found `{content}`"),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(err(Some(line), k, "unknown key"));
        }
        if let Some((_, first)) = entries.get(k) {
            return Err(err(Some(line), k, format!("duplicate key (first set on line {first})")));
        }
        entries.0.push((k.to_string(), v.to_string(), line));
    }
    // required keys are checked where they are read, so a range error on an
    // earlier key wins over a later missing one
    let require = |key: &str| -> Result<(), ConfigError> {
        match entries.get(key) {
            Some(_) => Ok(()),
            None => Err(err(None, key, "missing required key")),
        }
    };
    let d = RunConfig::new(0, 0, 0, 0, 0.0, 0.0);

    let grid = |key: &str, min: usize, even: bool| -> Result<usize, ConfigError> {
        require(key)?;
        let (n, line) = entries.parsed::<usize>(key, 0)?;
        if n < min || (even && n % 2 != 0) {
            let rule = if even { format!("{key} must be even, ≥ {min}") } else { format!("{key} must be ≥ {min}") };
            return Err(err(line, key, format!("{rule} (got {n})")));
        }
        Ok(n)
    };
    let nx = grid("nx", 4, true)?;
    let ny = grid("ny", 4, true)?;
    let nz_a = grid("nz_a", 3, false)?;
    let nz_o = grid("nz_o", 3, false)?;

    let positive = |key: &str, default: f64| -> Result<f64, ConfigError> {
        let (v, line) = entries.parsed::<f64>(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(err(line, key, format!("{key} must be positive (got {v})")));
        }
        Ok(v)
    };
    let nonneg = |key: &str, default: f64| -> Result<f64, ConfigError> {
        let (v, line) = entries.parsed::<f64>(key, default)?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(err(line, key, format!("{key} must be ≥ 0 (got {v})")));
        }
        Ok(v)
    };
    let p_s = positive("p_s", d.p_s)?;
    let lambda = nonneg("lambda", d.lambda)?;
    require("dt")?;
    let dt = positive("dt", d.dt)?;
    require("t_end")?;
    let t_end = nonneg("t_end", d.t_end)?;
    let picard_tol = positive("picard_tol", d.picard_tol)?;
    let (picard_max, line) = entries.parsed::<usize>("picard_max", d.picard_max)?;
    if picard_max == 0 {
        return Err(err(line, "picard_max", "picard_max must be ≥ 1"));
    }
    let scheme = match entries.get("scheme") {
        None => d.scheme,
        Some(("backward_euler", _)) => Scheme::BackwardEuler,
        Some(("crank_nicolson", _)) => Scheme::CrankNicolson,
        Some((v, l)) => {
            return Err(err(Some(l), "scheme", format!("expected backward_euler or crank_nicolson, found `{v}`")))
        }
    };
    let drag_mode = match entries.get("drag_mode") {
        None => d.drag_mode,
        Some(("semi_implicit_lag", _)) => DragMode::SemiImplicitLag,
        Some(("explicit", _)) => DragMode::Explicit,
        Some(("linear", _)) => DragMode::Linear,
        Some(("off", _)) => DragMode::Off,
        Some((v, l)) => {
            return Err(err(
                Some(l),
                "drag_mode",
                format!("expected semi_implicit_lag, explicit, linear or off, found `{v}`"),
            ))
        }
    };
    let preset = |prefix: &str, default: Preset| -> Result<Preset, ConfigError> {
        let kind = match entries.get(prefix) {
            None => default.kind,
            Some((v, l)) => PresetKind::parse(v)
                .ok_or_else(|| err(Some(l), prefix, format!("expected zero, smooth or random, found `{v}`")))?,
        };
        let amplitude = nonneg(&format!("{prefix}_amplitude"), default.amplitude)?;
        let (seed, _) = entries.parsed::<u64>(&format!("{prefix}_seed"), default.seed)?;
        let (decay, _) = entries.parsed::<f64>(&format!("{prefix}_decay"), default.decay)?;
        Ok(Preset { kind, amplitude, seed, decay })
    };
    let forcing = preset("forcing", d.forcing)?;
    let init = preset("init", d.init)?;
    let (output_every, line) = entries.parsed::<u64>("output_every", d.output_every)?;
    if output_every == 0 {
        return Err(err(line, "output_every", "output_every must be ≥ 1"));
    }
    let out_dir = entries.get("out_dir").map_or(d.out_dir.clone(), |(v, _)| v.to_string());

    Ok(RunConfig {
        nx,
        ny,
        nz_a,
        nz_o,
        p_s,
        lambda,
        dt,
        t_end,
        scheme,
        picard_tol,
        picard_max,
        drag_mode,
        forcing,
        init,
        output_every,
        out_dir,
    })
}

//! Flat key = value experiment configuration. One assignment per line, `#`
//! starts a comment. Every knob has a default, so an empty config is valid;
//! a file (if given) is applied first, then `--set key=value` overrides in
//! order. `emit` round-trips: parsing its output reproduces the struct
//! exactly, including floats.

use std::fmt::Write as _;
use std::path::Path;

use super::fmt_float;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Space dimension n of the hyperbolic space.
    pub n: usize,
    /// Mass shift c in omega^2 = lambda^2 + rho^2 + c; -rho^2 is the shifted
    /// wave equation, 0 the Klein-Gordon one.
    pub mass_shift: f64,
    /// Nonlinearity power.
    pub b: f64,
    /// Margin sigma in the admissible range of b.
    pub sigma: f64,
    /// Weight offset h in the strengthened norms.
    pub h: f64,
    /// Secondary Lorentz exponent d of the solution norms.
    pub d: f64,
    /// Nonlinearity size mu.
    pub mu: f64,
    /// Nonlinearity sign: +1 or -1.
    pub sign: f64,
    pub r_max: f64,
    pub r_panels: usize,
    pub r_per_panel: usize,
    pub lambda_max: f64,
    pub lambda_panels: usize,
    pub lambda_per_panel: usize,
    pub t_max: f64,
    /// Graded panels on (0, t0].
    pub t_core: usize,
    /// Uniform panels on (t0, t_max].
    pub t_tail: usize,
    /// Data norm the initial pair is scaled to before solving.
    pub eps: f64,
    /// Support radius of the bump initial velocity.
    pub data_radius: f64,
    /// Picard stopping tolerance in the solution norm.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Worker threads; 0 keeps the library default.
    pub threads: usize,
    /// Output directory for CSV files and the effective config.
    pub out: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 3,
            mass_shift: -1.0,
            b: 2.7,
            sigma: 0.05,
            h: 0.0,
            d: f64::INFINITY,
            mu: 1.0,
            sign: 1.0,
            r_max: 10.0,
            r_panels: 40,
            r_per_panel: 12,
            lambda_max: 24.0,
            lambda_panels: 48,
            lambda_per_panel: 10,
            t_max: 6.0,
            t_core: 48,
            t_tail: 64,
            eps: 0.05,
            data_radius: 2.0,
            tol: 1e-8,
            max_iter: 30,
            seed: 7,
            threads: 0,
            out: "out".into(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| {
        Error::Config(format!("cannot parse {key} = {value:?} as a number"))
    })
}

impl ExperimentConfig {
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        match key {
            "n" => self.n = parse_num(key, value)?,
            "mass_shift" => self.mass_shift = parse_num(key, value)?,
            "b" => self.b = parse_num(key, value)?,
            "sigma" => self.sigma = parse_num(key, value)?,
            "h" => self.h = parse_num(key, value)?,
            "d" => self.d = parse_num(key, value)?,
            "mu" => self.mu = parse_num(key, value)?,
            "sign" => self.sign = parse_num(key, value)?,
            "r_max" => self.r_max = parse_num(key, value)?,
            "r_panels" => self.r_panels = parse_num(key, value)?,
            "r_per_panel" => self.r_per_panel = parse_num(key, value)?,
            "lambda_max" => self.lambda_max = parse_num(key, value)?,
            "lambda_panels" => self.lambda_panels = parse_num(key, value)?,
            "lambda_per_panel" => self.lambda_per_panel = parse_num(key, value)?,
            "t_max" => self.t_max = parse_num(key, value)?,
            "t_core" => self.t_core = parse_num(key, value)?,
            "t_tail" => self.t_tail = parse_num(key, value)?,
            "eps" => self.eps = parse_num(key, value)?,
            "data_radius" => self.data_radius = parse_num(key, value)?,
            "tol" => self.tol = parse_num(key, value)?,
            "max_iter" => self.max_iter = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            "out" => self.out = value.to_string(),
            other => {
                return Err(Error::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    /// Applies `key = value` assignments line by line.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {raw:?}", lineno + 1))
            })?;
            self.set_key(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_str(&text)
    }

    /// A single `key=value` override as passed on the command line.
    pub fn apply_set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            Error::Config(format!("--set expects key=value, got {assignment:?}"))
        })?;
        self.set_key(key, value)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_max", self.r_max),
            ("lambda_max", self.lambda_max),
            ("t_max", self.t_max),
            ("eps", self.eps),
            ("data_radius", self.data_radius),
            ("tol", self.tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("r_panels", self.r_panels),
            ("r_per_panel", self.r_per_panel),
            ("lambda_panels", self.lambda_panels),
            ("lambda_per_panel", self.lambda_per_panel),
            ("t_core", self.t_core),
            ("t_tail", self.t_tail),
            ("max_iter", self.max_iter),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.n < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if self.data_radius >= self.r_max {
            return Err(Error::Config(format!(
                "data_radius {} must sit inside r_max {}",
                self.data_radius, self.r_max
            )));
        }
        Ok(())
    }

    /// Flat serialization; parsing this text reproduces the config.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let f = fmt_float;
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "mass_shift = {}", f(self.mass_shift));
        let _ = writeln!(s, "b = {}", f(self.b));
        let _ = writeln!(s, "sigma = {}", f(self.sigma));
        let _ = writeln!(s, "h = {}", f(self.h));
        let _ = writeln!(s, "d = {}", f(self.d));
        let _ = writeln!(s, "mu = {}", f(self.mu));
        let _ = writeln!(s, "sign = {}", f(self.sign));
        let _ = writeln!(s, "r_max = {}", f(self.r_max));
        let _ = writeln!(s, "r_panels = {}", self.r_panels);
        let _ = writeln!(s, "r_per_panel = {}", self.r_per_panel);
        let _ = writeln!(s, "lambda_max = {}", f(self.lambda_max));
        let _ = writeln!(s, "lambda_panels = {}", self.lambda_panels);
        let _ = writeln!(s, "lambda_per_panel = {}", self.lambda_per_panel);
        let _ = writeln!(s, "t_max = {}", f(self.t_max));
        let _ = writeln!(s, "t_core = {}", self.t_core);
        let _ = writeln!(s, "t_tail = {}", self.t_tail);
        let _ = writeln!(s, "eps = {}", f(self.eps));
        let _ = writeln!(s, "data_radius = {}", f(self.data_radius));
        let _ = writeln!(s, "tol = {}", f(self.tol));
        let _ = writeln!(s, "max_iter = {}", self.max_iter);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(s, "out = {}", self.out);
        s
    }
}

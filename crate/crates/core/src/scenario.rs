//! Scenario documents: a line-oriented `key = value` format with sections
//! for the inflow, permeability and Brinkman parameters.
//!
//! ```text
//! model = VE
//! nx = 200
//! nz = 200
//! viscosity_ratio = 5
//! end_time = 0.3
//!
//! [inflow]
//! default = 0
//! 0.4 .. 0.6 -> 0.9
//!
//! [permeability]
//! default = 1
//! 0 .. 0.5 -> 0.5
//! 0.2 .. 0.4, 0 .. 1 -> 2
//! ```
//!
//! Profile rows cover the half-open interval `(lo, hi]`. A permeability row
//! with one range is a horizontal layer; with two ranges it is an `x` by `z`
//! rectangle. Numbers may be written as fractions such as `1/32`.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::brinkman::{bve_initial_condition, BrinkmanParams, DEFAULT_HELMHOLTZ_TOL};
use crate::error::{FlowError, Result};
use crate::grid::{Piece, PiecewiseProfile, RectPiece, RectProfile};
use crate::problem::Problem;
use crate::tp::DEFAULT_PRESSURE_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Full two-phase flow on the scaled domain.
    Tp,
    /// Vertical equilibrium.
    Ve,
    /// Vertically integrated: vertical equilibrium on a single layer.
    Vi,
    /// Asymptotic multiscale.
    Ms,
    /// Brinkman two-phase flow.
    Btp,
    /// Brinkman vertical equilibrium.
    Bve,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Tp,
        ModelKind::Ve,
        ModelKind::Vi,
        ModelKind::Ms,
        ModelKind::Btp,
        ModelKind::Bve,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Tp => "TP",
            ModelKind::Ve => "VE",
            ModelKind::Vi => "VI",
            ModelKind::Ms => "MS",
            ModelKind::Btp => "BTP",
            ModelKind::Bve => "BVE",
        }
    }

    pub fn needs_gamma(self) -> bool {
        matches!(self, ModelKind::Tp | ModelKind::Btp)
    }

    pub fn is_brinkman(self) -> bool {
        matches!(self, ModelKind::Btp | ModelKind::Bve)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| FlowError::Validation {
                field: "model".into(),
                message: format!("unknown model '{s}', expected one of TP, VE, VI, MS, BTP, BVE"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition {
    /// Domain initially filled with the defending fluid.
    Zero,
    /// Rapid smooth decay from the inflow values at `x = 0`.
    Decay,
}

impl InitialCondition {
    fn name(self) -> &'static str {
        match self {
            InitialCondition::Zero => "zero",
            InitialCondition::Decay => "decay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BrinkmanSpec {
    /// Effective viscosity with domain height and length. Without a length
    /// the Brinkman two-phase model uses `height / gamma`.
    Physical {
        mu_e: f64,
        height: f64,
        length: Option<f64>,
    },
    /// Direct coefficients; `eps` defaults to `sqrt(beta)`.
    Explicit {
        beta_x: f64,
        beta_z: f64,
        eps_x: Option<f64>,
        eps_z: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub model: ModelKind,
    pub nx: usize,
    pub nz: usize,
    pub gamma: Option<f64>,
    pub viscosity_ratio: f64,
    pub end_time: f64,
    pub cfl: f64,
    pub porosity: f64,
    pub inflow: PiecewiseProfile,
    pub permeability: RectProfile,
    pub snapshots: Vec<f64>,
    pub initial: Option<InitialCondition>,
    pub brinkman: Option<BrinkmanSpec>,
    pub pressure_tol: f64,
    pub helmholtz_tol: f64,
}

impl Scenario {
    /// A scenario with default numerics, unit permeability and porosity.
    pub fn new(
        model: ModelKind,
        nx: usize,
        nz: usize,
        viscosity_ratio: f64,
        end_time: f64,
        inflow: PiecewiseProfile,
    ) -> Self {
        Scenario {
            name: None,
            model,
            nx,
            nz,
            gamma: None,
            viscosity_ratio,
            end_time,
            cfl: crate::DEFAULT_CFL,
            porosity: 1.0,
            inflow,
            permeability: RectProfile::constant(1.0),
            snapshots: Vec::new(),
            initial: None,
            brinkman: None,
            pressure_tol: DEFAULT_PRESSURE_TOL,
            helmholtz_tol: DEFAULT_HELMHOLTZ_TOL,
        }
    }

    /// Name for tables: the model, plus gamma where it applies.
    pub fn label(&self) -> String {
        match (self.model.needs_gamma(), self.gamma) {
            (true, Some(g)) => format!("{}(g={})", self.model, fmt_number(g)),
            _ => self.model.to_string(),
        }
    }

    /// The same physical setup under another model.
    ///
    /// Brinkman parameters are dropped for Darcy models. A Brinkman length
    /// implied by `gamma` is made explicit before `gamma` stops applying.
    pub fn with_model(&self, model: ModelKind) -> Result<Scenario> {
        let mut sc = self.clone();
        sc.model = model;
        if !model.is_brinkman() {
            sc.brinkman = None;
        } else if let Some(BrinkmanSpec::Physical {
            mu_e,
            height,
            length: None,
        }) = sc.brinkman
        {
            if !model.needs_gamma() {
                let g = self.gamma.ok_or_else(|| FlowError::Missing("brinkman.length".into()))?;
                sc.brinkman = Some(BrinkmanSpec::Physical {
                    mu_e,
                    height,
                    length: Some(height / g),
                });
            }
        }
        if model.is_brinkman() && sc.brinkman.is_none() {
            return Err(FlowError::Missing("brinkman".into()));
        }
        if !model.needs_gamma() {
            sc.gamma = None;
        } else if sc.gamma.is_none() {
            return Err(FlowError::Missing("gamma".into()));
        }
        if self.initial.is_none() && model.is_brinkman() != self.model.is_brinkman() {
            sc.initial = Some(self.initial_condition());
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn initial_condition(&self) -> InitialCondition {
        self.initial.unwrap_or(if self.model.is_brinkman() {
            InitialCondition::Decay
        } else {
            InitialCondition::Zero
        })
    }

    pub fn inflow_max(&self) -> f64 {
        self.inflow.max_value()
    }

    /// Brinkman coefficients, with `gamma` attached when present.
    pub fn brinkman_params(&self) -> Result<BrinkmanParams> {
        let spec = self
            .brinkman
            .ok_or_else(|| FlowError::Missing("brinkman".into()))?;
        let mut params = match spec {
            BrinkmanSpec::Physical {
                mu_e,
                height,
                length,
            } => {
                let length = match (length, self.gamma) {
                    (Some(l), _) => l,
                    (None, Some(g)) if g > 0.0 => height / g,
                    _ => return Err(FlowError::Missing("brinkman.length".into())),
                };
                BrinkmanParams::from_viscosity(mu_e, height, length)?
            }
            BrinkmanSpec::Explicit {
                beta_x,
                beta_z,
                eps_x,
                eps_z,
            } => BrinkmanParams::new(
                beta_x,
                beta_z,
                eps_x.unwrap_or(beta_x.max(0.0).sqrt()),
                eps_z.unwrap_or(beta_z.max(0.0).sqrt()),
            )?,
        };
        if let Some(g) = self.gamma {
            params = params.with_gamma(g)?;
        }
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |field: &str, message: String| {
            Err(FlowError::Validation {
                field: field.into(),
                message,
            })
        };
        if self.nx == 0 || self.nz == 0 {
            return invalid("nx", format!("grid {}x{} has no cells", self.nx, self.nz));
        }
        let positive = [
            ("viscosity_ratio", self.viscosity_ratio),
            ("porosity", self.porosity),
            ("pressure_tol", self.pressure_tol),
            ("helmholtz_tol", self.helmholtz_tol),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(field, format!("must be positive, got {v}"));
            }
        }
        if !(self.end_time >= 0.0 && self.end_time.is_finite()) {
            return invalid("end_time", format!("must be nonnegative, got {}", self.end_time));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return invalid("cfl", format!("must lie in (0, 1], got {}", self.cfl));
        }
        match self.gamma {
            Some(g) if !(g > 0.0 && g.is_finite()) => {
                return invalid("gamma", format!("must be positive, got {g}"))
            }
            None if self.model.needs_gamma() => {
                return Err(FlowError::Missing("gamma".into()));
            }
            _ => {}
        }
        let inflow_values = self
            .inflow
            .pieces
            .iter()
            .map(|p| p.value)
            .chain([self.inflow.default]);
        for v in inflow_values {
            if !(0.0..=1.0).contains(&v) {
                return invalid("inflow", format!("value {v} outside [0, 1]"));
            }
        }
        let kappa_values = self
            .permeability
            .pieces
            .iter()
            .map(|p| p.value)
            .chain([self.permeability.default]);
        for v in kappa_values {
            if !(v > 0.0 && v.is_finite()) {
                return invalid("permeability", format!("value {v} must be positive"));
            }
        }
        if let Some(&t) = self.snapshots.iter().find(|&&t| !(0.0..=self.end_time).contains(&t)) {
            return invalid("snapshots", format!("time {t} outside [0, {}]", self.end_time));
        }
        match (self.model.is_brinkman(), self.brinkman.is_some()) {
            (true, false) => return Err(FlowError::Missing("brinkman".into())),
            (false, true) => {
                return invalid("brinkman", format!("model {} takes no Brinkman parameters", self.model))
            }
            (true, true) => {
                self.brinkman_params()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Canonical document; parsing it yields an equal scenario.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(name) = &self.name {
            kv("name", name.clone());
        }
        kv("model", self.model.to_string());
        kv("nx", self.nx.to_string());
        kv("nz", self.nz.to_string());
        if let Some(g) = self.gamma {
            kv("gamma", fmt_number(g));
        }
        kv("viscosity_ratio", fmt_number(self.viscosity_ratio));
        kv("end_time", fmt_number(self.end_time));
        kv("cfl", fmt_number(self.cfl));
        kv("porosity", fmt_number(self.porosity));
        if !self.snapshots.is_empty() {
            let list: Vec<String> = self.snapshots.iter().map(|&t| fmt_number(t)).collect();
            kv("snapshots", list.join(", "));
        }
        if let Some(ic) = self.initial {
            kv("initial", ic.name().into());
        }
        kv("pressure_tol", fmt_number(self.pressure_tol));
        kv("helmholtz_tol", fmt_number(self.helmholtz_tol));

        let _ = writeln!(out, "\n[inflow]");
        let _ = writeln!(out, "default = {}", fmt_number(self.inflow.default));
        for p in &self.inflow.pieces {
            let _ = writeln!(out, "{} .. {} -> {}", fmt_number(p.lo), fmt_number(p.hi), fmt_number(p.value));
        }
        let _ = writeln!(out, "\n[permeability]");
        let _ = writeln!(out, "default = {}", fmt_number(self.permeability.default));
        for p in &self.permeability.pieces {
            let _ = writeln!(
                out,
                "{} .. {}, {} .. {} -> {}",
                fmt_number(p.x0),
                fmt_number(p.x1),
                fmt_number(p.z0),
                fmt_number(p.z1),
                fmt_number(p.value)
            );
        }
        if let Some(spec) = self.brinkman {
            let _ = writeln!(out, "\n[brinkman]");
            match spec {
                BrinkmanSpec::Physical {
                    mu_e,
                    height,
                    length,
                } => {
                    let _ = writeln!(out, "mu_e = {}", fmt_number(mu_e));
                    let _ = writeln!(out, "height = {}", fmt_number(height));
                    if let Some(l) = length {
                        let _ = writeln!(out, "length = {}", fmt_number(l));
                    }
                }
                BrinkmanSpec::Explicit {
                    beta_x,
                    beta_z,
                    eps_x,
                    eps_z,
                } => {
                    let _ = writeln!(out, "beta_x = {}", fmt_number(beta_x));
                    let _ = writeln!(out, "beta_z = {}", fmt_number(beta_z));
                    if let Some(e) = eps_x {
                        let _ = writeln!(out, "eps_x = {}", fmt_number(e));
                    }
                    if let Some(e) = eps_z {
                        let _ = writeln!(out, "eps_z = {}", fmt_number(e));
                    }
                }
            }
        }
        out
    }
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_number(v: f64) -> String {
    format!("{v:?}")
}

/// Initial saturation of a scenario on its discretization.
pub fn initial_state(scenario: &Scenario, problem: &Problem) -> Vec<f64> {
    match scenario.initial_condition() {
        InitialCondition::Zero => vec![0.0; problem.grid.cells()],
        InitialCondition::Decay => bve_initial_condition(&problem.inflow, problem.grid)
            .expect("inflow validated by the problem")
            .values,
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| FlowError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Main,
    Inflow,
    Permeability,
    Brinkman,
}

fn parse_error(line: usize, message: impl Into<String>) -> FlowError {
    FlowError::Parse {
        line,
        message: message.into(),
    }
}

/// A decimal number or a fraction `a/b`.
fn parse_number(text: &str, line: usize) -> Result<f64> {
    let text = text.trim();
    let parsed = match text.split_once('/') {
        Some((a, b)) => a
            .trim()
            .parse::<f64>()
            .and_then(|a| b.trim().parse::<f64>().map(|b| a / b)),
        None => text.parse::<f64>(),
    };
    match parsed {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(line, format!("expected a number, found '{text}'"))),
    }
}

fn parse_count(text: &str, line: usize) -> Result<usize> {
    text.trim()
        .parse::<usize>()
        .map_err(|_| parse_error(line, format!("expected a positive integer, found '{}'", text.trim())))
}

fn parse_range(text: &str, line: usize) -> Result<(f64, f64)> {
    let (lo, hi) = text
        .split_once("..")
        .ok_or_else(|| parse_error(line, format!("expected 'lo .. hi', found '{}'", text.trim())))?;
    Ok((parse_number(lo, line)?, parse_number(hi, line)?))
}

#[derive(Default)]
struct Draft {
    name: Option<String>,
    model: Option<ModelKind>,
    nx: Option<usize>,
    nz: Option<usize>,
    gamma: Option<f64>,
    viscosity_ratio: Option<f64>,
    end_time: Option<f64>,
    cfl: Option<f64>,
    porosity: Option<f64>,
    snapshots: Option<Vec<f64>>,
    initial: Option<InitialCondition>,
    pressure_tol: Option<f64>,
    helmholtz_tol: Option<f64>,
    inflow_seen: bool,
    inflow_default: Option<f64>,
    inflow: Vec<Piece>,
    kappa_default: Option<f64>,
    kappa: Vec<RectPiece>,
    brinkman_seen: bool,
    mu_e: Option<f64>,
    height: Option<f64>,
    length: Option<f64>,
    beta_x: Option<f64>,
    beta_z: Option<f64>,
    eps_x: Option<f64>,
    eps_z: Option<f64>,
}

fn set_once<T>(slot: &mut Option<T>, value: T, key: &str, line: usize) -> Result<()> {
    if slot.is_some() {
        return Err(parse_error(line, format!("duplicate key '{key}'")));
    }
    *slot = Some(value);
    Ok(())
}

impl Draft {
    fn main_key(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let num = || parse_number(value, line);
        match key {
            "name" => set_once(&mut self.name, value.to_string(), key, line),
            "model" => {
                let m = value
                    .parse::<ModelKind>()
                    .map_err(|e| parse_error(line, e.to_string()))?;
                set_once(&mut self.model, m, key, line)
            }
            "nx" => set_once(&mut self.nx, parse_count(value, line)?, key, line),
            "nz" => set_once(&mut self.nz, parse_count(value, line)?, key, line),
            "gamma" => set_once(&mut self.gamma, num()?, key, line),
            "viscosity_ratio" => set_once(&mut self.viscosity_ratio, num()?, key, line),
            "end_time" => set_once(&mut self.end_time, num()?, key, line),
            "cfl" => set_once(&mut self.cfl, num()?, key, line),
            "porosity" => set_once(&mut self.porosity, num()?, key, line),
            "pressure_tol" => set_once(&mut self.pressure_tol, num()?, key, line),
            "helmholtz_tol" => set_once(&mut self.helmholtz_tol, num()?, key, line),
            "snapshots" => {
                let times = value
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| parse_number(t, line))
                    .collect::<Result<Vec<_>>>()?;
                set_once(&mut self.snapshots, times, key, line)
            }
            "initial" => {
                let ic = match value {
                    "zero" => InitialCondition::Zero,
                    "decay" => InitialCondition::Decay,
                    other => {
                        return Err(parse_error(
                            line,
                            format!("initial must be 'zero' or 'decay', found '{other}'"),
                        ))
                    }
                };
                set_once(&mut self.initial, ic, key, line)
            }
            _ => Err(parse_error(line, format!("unknown key '{key}'"))),
        }
    }

    fn brinkman_key(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let v = parse_number(value, line)?;
        match key {
            "mu_e" => set_once(&mut self.mu_e, v, key, line),
            "height" => set_once(&mut self.height, v, key, line),
            "length" => set_once(&mut self.length, v, key, line),
            "beta" => {
                set_once(&mut self.beta_x, v, "beta_x", line)?;
                set_once(&mut self.beta_z, v, "beta_z", line)
            }
            "beta_x" => set_once(&mut self.beta_x, v, key, line),
            "beta_z" => set_once(&mut self.beta_z, v, key, line),
            "eps_x" => set_once(&mut self.eps_x, v, key, line),
            "eps_z" => set_once(&mut self.eps_z, v, key, line),
            _ => Err(parse_error(line, format!("unknown brinkman key '{key}'"))),
        }
    }

    fn profile_row(&mut self, section: Section, text: &str, line: usize) -> Result<()> {
        let (ranges, value) = text
            .split_once("->")
            .ok_or_else(|| parse_error(line, format!("expected 'range -> value', found '{text}'")))?;
        let value = parse_number(value, line)?;
        let ranges: Vec<&str> = ranges.split(',').collect();
        match (section, ranges.as_slice()) {
            (Section::Inflow, [z]) => {
                let (lo, hi) = parse_range(z, line)?;
                self.inflow.push(Piece { lo, hi, value });
            }
            (Section::Permeability, [z]) => {
                let (z0, z1) = parse_range(z, line)?;
                self.kappa.push(RectPiece {
                    x0: 0.0,
                    x1: 1.0,
                    z0,
                    z1,
                    value,
                });
            }
            (Section::Permeability, [x, z]) => {
                let (x0, x1) = parse_range(x, line)?;
                let (z0, z1) = parse_range(z, line)?;
                self.kappa.push(RectPiece {
                    x0,
                    x1,
                    z0,
                    z1,
                    value,
                });
            }
            _ => return Err(parse_error(line, format!("malformed profile row '{text}'"))),
        }
        Ok(())
    }

    fn finish(self) -> Result<Scenario> {
        let model = self.model.ok_or_else(|| FlowError::Missing("model".into()))?;
        let nx = self.nx.ok_or_else(|| FlowError::Missing("nx".into()))?;
        let nz = self.nz.ok_or_else(|| FlowError::Missing("nz".into()))?;
        let viscosity_ratio = self
            .viscosity_ratio
            .ok_or_else(|| FlowError::Missing("viscosity_ratio".into()))?;
        let end_time = self.end_time.ok_or_else(|| FlowError::Missing("end_time".into()))?;
        if !self.inflow_seen {
            return Err(FlowError::Missing("inflow".into()));
        }
        let inflow = PiecewiseProfile::new(self.inflow, self.inflow_default.unwrap_or(0.0))
            .map_err(|e| relabel(e, "inflow"))?;
        let permeability = RectProfile::new(self.kappa, self.kappa_default.unwrap_or(1.0))?;
        let brinkman = if !self.brinkman_seen {
            None
        } else if let Some(mu_e) = self.mu_e {
            if self.beta_x.is_some() || self.beta_z.is_some() {
                return Err(FlowError::Validation {
                    field: "brinkman".into(),
                    message: "give either mu_e/height/length or beta values, not both".into(),
                });
            }
            Some(BrinkmanSpec::Physical {
                mu_e,
                height: self
                    .height
                    .ok_or_else(|| FlowError::Missing("brinkman.height".into()))?,
                length: self.length,
            })
        } else {
            Some(BrinkmanSpec::Explicit {
                beta_x: self
                    .beta_x
                    .ok_or_else(|| FlowError::Missing("brinkman.beta_x".into()))?,
                beta_z: self
                    .beta_z
                    .ok_or_else(|| FlowError::Missing("brinkman.beta_z".into()))?,
                eps_x: self.eps_x,
                eps_z: self.eps_z,
            })
        };
        let sc = Scenario {
            name: self.name,
            model,
            nx,
            nz,
            gamma: self.gamma,
            viscosity_ratio,
            end_time,
            cfl: self.cfl.unwrap_or(crate::DEFAULT_CFL),
            porosity: self.porosity.unwrap_or(1.0),
            inflow,
            permeability,
            snapshots: self.snapshots.unwrap_or_default(),
            initial: self.initial,
            brinkman,
            pressure_tol: self.pressure_tol.unwrap_or(DEFAULT_PRESSURE_TOL),
            helmholtz_tol: self.helmholtz_tol.unwrap_or(DEFAULT_HELMHOLTZ_TOL),
        };
        sc.validate()?;
        Ok(sc)
    }
}

fn relabel(e: FlowError, field: &str) -> FlowError {
    match e {
        FlowError::Validation { message, .. } => FlowError::Validation {
            field: field.into(),
            message,
        },
        other => other,
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut draft = Draft::default();
    let mut section = Section::Main;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let name = header
                .strip_suffix(']')
                .ok_or_else(|| parse_error(line, format!("unterminated section header '{content}'")))?
                .trim();
            section = match name {
                "inflow" => Section::Inflow,
                "permeability" => Section::Permeability,
                "brinkman" => Section::Brinkman,
                other => return Err(parse_error(line, format!("unknown section '{other}'"))),
            };
            let seen = match section {
                Section::Inflow => &mut draft.inflow_seen,
                Section::Brinkman => &mut draft.brinkman_seen,
                _ => continue,
            };
            if *seen {
                return Err(parse_error(line, format!("duplicate section '{name}'")));
            }
            *seen = true;
            continue;
        }
        match section {
            Section::Main | Section::Brinkman => {
                let (key, value) = content
                    .split_once('=')
                    .ok_or_else(|| parse_error(line, format!("expected 'key = value', found '{content}'")))?;
                let (key, value) = (key.trim(), value.trim());
                if section == Section::Main {
                    draft.main_key(key, value, line)?;
                } else {
                    draft.brinkman_key(key, value, line)?;
                }
            }
            Section::Inflow | Section::Permeability => {
                if let Some((key, value)) = content.split_once('=') {
                    if key.trim() != "default" {
                        return Err(parse_error(line, format!("unknown key '{}'", key.trim())));
                    }
                    let v = parse_number(value, line)?;
                    let slot = if section == Section::Inflow {
                        &mut draft.inflow_default
                    } else {
                        &mut draft.kappa_default
                    };
                    set_once(slot, v, "default", line)?;
                } else {
                    draft.profile_row(section, content, line)?;
                }
            }
        }
    }
    draft.finish()
}

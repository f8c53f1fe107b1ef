//! Run configuration: a versioned JSON document. Unknown keys are errors and
//! every semantic problem is reported, not just the first.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wtk_core::potential::{CustomWell, PotentialError, PotentialSpec, TailKind, WellModel};
use wtk_core::resonance::{ResonanceControls, TrackControls};
use wtk_core::spectral::AsymptoticModel;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub potential: Option<PotentialConfig>,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub fsweep: Option<FsweepConfig>,
    #[serde(default)]
    pub rsweep: Option<RsweepConfig>,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub controls: ControlsConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Seeds the synthetic-noise check of `verify`.
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            potential: None,
            scan: None,
            fsweep: None,
            rsweep: None,
            eval: EvalConfig::default(),
            controls: ControlsConfig::default(),
            output_dir: None,
            jobs: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailConfig {
    Decaying,
    Confining,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    SoftCore {
        #[serde(default = "sqrt2")]
        a: f64,
        #[serde(default)]
        field: f64,
    },
    DoubleWell {
        #[serde(default = "sqrt2")]
        a: f64,
        r: f64,
        #[serde(default)]
        field: f64,
    },
    Harmonic {
        omega: f64,
        #[serde(default)]
        field: f64,
    },
    SquareWell {
        depth: f64,
        width: f64,
        #[serde(default)]
        field: f64,
    },
    Custom {
        expr: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
        tail: TailConfig,
        #[serde(default)]
        field: f64,
    },
}

fn sqrt2() -> f64 {
    std::f64::consts::SQRT_2
}

impl PotentialConfig {
    pub fn field(&self) -> f64 {
        match self {
            PotentialConfig::SoftCore { field, .. }
            | PotentialConfig::DoubleWell { field, .. }
            | PotentialConfig::Harmonic { field, .. }
            | PotentialConfig::SquareWell { field, .. }
            | PotentialConfig::Custom { field, .. } => *field,
        }
    }

    pub fn well(&self) -> Result<WellModel, PotentialError> {
        Ok(match self {
            PotentialConfig::SoftCore { a, .. } => WellModel::SoftCoreAtom { a: *a },
            PotentialConfig::DoubleWell { a, r, .. } => WellModel::DoubleWell { a: *a, r: *r },
            PotentialConfig::Harmonic { omega, .. } => WellModel::Harmonic { omega: *omega },
            PotentialConfig::SquareWell { depth, width, .. } => WellModel::SquareWell {
                depth: *depth,
                width: *width,
            },
            PotentialConfig::Custom { expr, params, tail, .. } => {
                let tail = match tail {
                    TailConfig::Decaying => TailKind::Decaying,
                    TailConfig::Confining => TailKind::Confining,
                };
                WellModel::Custom(CustomWell::new(expr, params.clone(), tail)?)
            }
        })
    }

    pub fn spec(&self) -> Result<PotentialSpec, PotentialError> {
        PotentialSpec::new(self.well()?, self.field())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub e_min: f64,
    pub e_max: f64,
    pub n_points: usize,
    #[serde(default = "default_scan_epsilon")]
    pub epsilon: f64,
    #[serde(default = "yes")]
    pub refine: bool,
}

fn default_scan_epsilon() -> f64 {
    1e-4
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsweepConfig {
    pub fields: Vec<f64>,
    /// Field-free level the tracked state starts from (0 = ground).
    #[serde(default)]
    pub state: usize,
    /// Residual charge for the ADK comparison.
    #[serde(default = "one")]
    pub charge: f64,
    /// Spacing of the field grid the state is tracked on, from zero up to
    /// the largest requested field. The angular average reads its rate
    /// curve from this grid.
    #[serde(default = "default_track_step")]
    pub track_step: f64,
}

fn one() -> f64 {
    1.0
}

fn default_track_step() -> f64 {
    0.0025
}

fn default_states() -> Vec<usize> {
    vec![0, 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsweepConfig {
    pub separations: Vec<f64>,
    #[serde(default = "default_states")]
    pub states: Vec<usize>,
    pub fields: Vec<f64>,
    #[serde(default = "default_track_step")]
    pub track_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            x_min: -20.0,
            x_max: 20.0,
            n_points: 401,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelConfig {
    Wkb,
    Airy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlsConfig {
    pub rel_tol: f64,
    pub m_rel_tol: f64,
    pub model: ModelConfig,
    pub eps_initial: f64,
    pub eps_factor: f64,
    pub eps_min: f64,
    pub ratio_min: f64,
    pub stability: f64,
    pub max_iter: usize,
    pub window_widths: f64,
    pub window_points: usize,
    pub max_rms: f64,
    pub search_half_width: f64,
    pub search_points: usize,
    pub ambiguity_tol: f64,
}

impl Default for ControlsConfig {
    fn default() -> Self {
        let t = TrackControls::default();
        let r = t.resonance;
        ControlsConfig {
            rel_tol: r.spectral.step.rel_tol,
            m_rel_tol: r.spectral.m_rel_tol,
            model: ModelConfig::Wkb,
            eps_initial: r.eps_initial,
            eps_factor: r.eps_factor,
            eps_min: r.eps_min,
            ratio_min: r.ratio_min,
            stability: r.stability,
            max_iter: r.max_iter,
            window_widths: r.window_widths,
            window_points: r.window_points,
            max_rms: r.max_rms,
            search_half_width: t.search_half_width,
            search_points: t.search_points,
            ambiguity_tol: t.ambiguity_tol,
        }
    }
}

impl ControlsConfig {
    pub fn resonance(&self) -> ResonanceControls {
        let mut r = ResonanceControls::default();
        r.spectral.step.rel_tol = self.rel_tol;
        r.spectral.m_rel_tol = self.m_rel_tol;
        r.spectral.model = match self.model {
            ModelConfig::Wkb => AsymptoticModel::Wkb,
            ModelConfig::Airy => AsymptoticModel::Airy,
        };
        r.eps_initial = self.eps_initial;
        r.eps_factor = self.eps_factor;
        r.eps_min = self.eps_min;
        r.ratio_min = self.ratio_min;
        r.stability = self.stability;
        r.max_iter = self.max_iter;
        r.window_widths = self.window_widths;
        r.window_points = self.window_points;
        r.max_rms = self.max_rms;
        r
    }

    pub fn track(&self) -> TrackControls {
        TrackControls {
            resonance: self.resonance(),
            search_half_width: self.search_half_width,
            search_points: self.search_points,
            ambiguity_tol: self.ambiguity_tol,
        }
    }

    fn validate(&self, errors: &mut Vec<String>) {
        let mut range = |name: &str, v: f64, lo: f64, hi: f64, lo_open: bool| {
            let ok = v.is_finite() && (if lo_open { v > lo } else { v >= lo }) && v <= hi;
            if !ok {
                let open = if lo_open { "(" } else { "[" };
                errors.push(format!("controls.{name} = {v} is outside {open}{lo}, {hi}]"));
            }
        };
        range("rel_tol", self.rel_tol, 1e-14, 1e-2, false);
        range("m_rel_tol", self.m_rel_tol, 0.0, 1e-2, true);
        range("eps_initial", self.eps_initial, 0.0, 1.0, true);
        range("eps_factor", self.eps_factor, 1.0, 1e3, true);
        range("eps_min", self.eps_min, 0.0, self.eps_initial.max(0.0), true);
        range("ratio_min", self.ratio_min, 1.0, 1e6, false);
        range("stability", self.stability, 0.0, 0.5, true);
        range("window_widths", self.window_widths, 0.0, 100.0, true);
        range("max_rms", self.max_rms, 0.0, 1.0, true);
        range("search_half_width", self.search_half_width, 0.0, 10.0, true);
        range("ambiguity_tol", self.ambiguity_tol, 0.0, 10.0, true);
        if self.max_iter == 0 {
            errors.push("controls.max_iter must be at least 1".into());
        }
        if self.window_points < 7 {
            errors.push(format!(
                "controls.window_points = {} must be at least 7",
                self.window_points
            ));
        }
        if self.search_points < 3 {
            errors.push(format!(
                "controls.search_points = {} must be at least 3",
                self.search_points
            ));
        }
    }
}

/// What a verb needs from the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    Scan,
    Fsweep,
    Rsweep,
    Eval,
    Verify,
}

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse(serde_json::Error),
    Invalid(Vec<String>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse(e) => write!(f, "config is not valid: {e}"),
            ConfigError::Invalid(list) => {
                writeln!(f, "config has {} problem(s):", list.len())?;
                for (i, e) in list.iter().enumerate() {
                    writeln!(f, "  {}. {e}", i + 1)?;
                }
                Ok(())
            }
        }
    }
}

pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(ConfigError::Parse)
}

fn check_fields(name: &str, fields: &[f64], errors: &mut Vec<String>) {
    if fields.is_empty() {
        errors.push(format!("{name}.fields must not be empty"));
    }
    for (i, f) in fields.iter().enumerate() {
        if !(f.is_finite() && *f >= 0.0) {
            errors.push(format!("{name}.fields[{i}] = {f} must be finite and non-negative"));
        }
    }
}

fn check_step(name: &str, step: f64, errors: &mut Vec<String>) {
    if !(step > 0.0 && step <= 0.05) {
        errors.push(format!("{name}.track_step = {step} must lie in (0, 0.05]"));
    }
}

impl RunConfig {
    /// Every problem that stops `needs` from running.
    pub fn validate(&self, needs: Needs) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        if self.version != CONFIG_VERSION {
            errors.push(format!(
                "version = {} is not supported (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        if self.jobs == Some(0) {
            errors.push("jobs must be at least 1".into());
        }
        self.controls.validate(&mut errors);
        match &self.potential {
            Some(p) => {
                if let Err(e) = p.spec() {
                    errors.push(format!("potential: {e}"));
                }
            }
            None if needs != Needs::Verify => errors.push("potential is required".into()),
            None => {}
        }
        match needs {
            Needs::Scan => match &self.scan {
                None => errors.push("scan section is required".into()),
                Some(s) => {
                    if !(s.e_min.is_finite() && s.e_max.is_finite() && s.e_min < s.e_max) {
                        errors.push(format!(
                            "scan window [{}, {}] must be finite with e_min < e_max",
                            s.e_min, s.e_max
                        ));
                    }
                    if s.n_points < 3 {
                        errors.push(format!("scan.n_points = {} must be at least 3", s.n_points));
                    }
                    if !(s.epsilon > 0.0 && s.epsilon.is_finite()) {
                        errors.push(format!("scan.epsilon = {} must be positive", s.epsilon));
                    }
                }
            },
            Needs::Fsweep => match &self.fsweep {
                None => errors.push("fsweep section is required".into()),
                Some(s) => {
                    check_fields("fsweep", &s.fields, &mut errors);
                    check_step("fsweep", s.track_step, &mut errors);
                    if !(s.charge > 0.0 && s.charge.is_finite()) {
                        errors.push(format!("fsweep.charge = {} must be positive", s.charge));
                    }
                }
            },
            Needs::Rsweep => {
                match &self.rsweep {
                    None => errors.push("rsweep section is required".into()),
                    Some(s) => {
                        check_fields("rsweep", &s.fields, &mut errors);
                        check_step("rsweep", s.track_step, &mut errors);
                        if s.separations.is_empty() {
                            errors.push("rsweep.separations must not be empty".into());
                        }
                        for (i, r) in s.separations.iter().enumerate() {
                            if !(r.is_finite() && *r >= 0.0) {
                                errors.push(format!("rsweep.separations[{i}] = {r} must be finite and non-negative"));
                            }
                        }
                        if s.states.is_empty() {
                            errors.push("rsweep.states must not be empty".into());
                        }
                    }
                }
                if !matches!(self.potential, Some(PotentialConfig::DoubleWell { .. }) | None) {
                    errors.push("rsweep needs a double_well potential".into());
                }
            }
            Needs::Eval => {
                let e = &self.eval;
                if !(e.x_min.is_finite() && e.x_max.is_finite() && e.x_min < e.x_max) {
                    errors.push(format!(
                        "eval window [{}, {}] must be finite with x_min < x_max",
                        e.x_min, e.x_max
                    ));
                }
                if e.n_points < 2 {
                    errors.push(format!("eval.n_points = {} must be at least 2", e.n_points));
                }
            }
            Needs::Verify => {}
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig, serde_json::Error> {
        serde_json::from_str(s)
    }

    #[test]
    fn minimal_scan_config() {
        let c = parse(
            r#"{"version": 1, "potential": {"model": "harmonic", "omega": 1.0},
                "scan": {"e_min": 0, "e_max": 3, "n_points": 301}}"#,
        )
        .unwrap();
        c.validate(Needs::Scan).unwrap();
        assert_eq!(c.scan.as_ref().unwrap().epsilon, 1e-4);
        assert_eq!(c.controls, ControlsConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse(r#"{"version": 1, "potentail": {}}"#).is_err());
        assert!(parse(r#"{"version": 1, "controls": {"rel_tol": 1e-9, "ratio": 3}}"#).is_err());
        assert!(parse(r#"{"version": 1, "potential": {"model": "harmonic", "omega": 1, "w": 2}}"#).is_err());
    }

    #[test]
    fn all_problems_are_listed() {
        let c = parse(
            r#"{"version": 2, "potential": {"model": "soft_core", "a": -1},
                "controls": {"rel_tol": 0.5, "window_points": 3},
                "scan": {"e_min": 1, "e_max": 0, "n_points": 2, "epsilon": 0}}"#,
        )
        .unwrap();
        let Err(ConfigError::Invalid(list)) = c.validate(Needs::Scan) else {
            panic!("accepted");
        };
        assert_eq!(list.len(), 7, "{list:#?}");
    }

    #[test]
    fn expression_errors_name_the_position() {
        let c =
            parse(r#"{"version": 1, "potential": {"model": "custom", "expr": "-1/sqrt(x^2 + 2", "tail": "decaying"}}"#)
                .unwrap();
        let Err(ConfigError::Invalid(list)) = c.validate(Needs::Eval) else {
            panic!("accepted");
        };
        assert!(list[0].contains("position 15"), "{list:?}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = parse(r#"{"version": 1, "potential": {"model": "double_well", "r": 6}}"#).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(parse(&text).unwrap(), c);
        assert!(text.contains("\"eps_min\":1e-13"));
    }
}

//! Scenario configuration files.
//!
//! Configurations are TOML documents. Every scenario names its `kind` and
//! then supplies the sections that kind needs; see `configs/` in this crate
//! for one complete file per kind.

use std::fmt;
use std::path::Path;

use cavint::direct::{cvec, DiscreteMode, DiscreteModeSet, SpectralSettings};
use cavint::greens::{Layer, LayerStack, MirrorSpec};
use cavint::mediator::Mediator;
use cavint::oracle::FockModel;
use cavint::{check_distinct, CVec3, Emitter, UnitSystem, Vec3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    DirectFreeSpace,
    DirectLayered,
    TruncationStudy,
    MediatorSweep,
    TraceoutValidation,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::DirectFreeSpace => "direct_free_space",
            ScenarioKind::DirectLayered => "direct_layered",
            ScenarioKind::TruncationStudy => "truncation_study",
            ScenarioKind::MediatorSweep => "mediator_sweep",
            ScenarioKind::TraceoutValidation => "traceout_validation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    /// Emitter pair reported in the convergence tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<[usize; 2]>,
    #[serde(default)]
    pub units: UnitsConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub emitters: Vec<EmitterConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<CutoffConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mediators: Vec<MediatorConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<ModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standing_wave: Option<StandingWaveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock: Option<FockConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureConfig>,
}

/// Scales of ħ, c and ε₀ in the caller's units. Frequencies in the file are
/// converted to natural units on input; couplings and energies are converted
/// back on output. Lengths are used as given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsConfig {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub eps0: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for UnitsConfig {
    fn default() -> Self {
        Self { hbar: 1.0, c: 1.0, eps0: 1.0 }
    }
}

impl UnitsConfig {
    pub fn system(&self) -> UnitSystem {
        UnitSystem { hbar_scale: self.hbar, c_scale: self.c, eps0_scale: self.eps0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterConfig {
    pub position: [f64; 3],
    pub dipole: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvironmentConfig {
    FreeSpace,
    /// Image-dipole mirror: plane `normal · r = offset`, reflection strength in [-1, 1].
    Mirror {
        normal: [f64; 3],
        offset: f64,
        strength: f64,
    },
    /// Planar stack ordered along +z.
    Layered {
        first_interface: f64,
        emitter_layer: usize,
        layers: Vec<Layer>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    Gaussian,
    Hard,
}

/// Cutoff grid, given either as frequencies or as `ρ/Λ` for the reported pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffConfig {
    pub kind: CutoffKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_over_lambda: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediatorConfig {
    pub position: [f64; 3],
    pub dipole: [f64; 3],
    /// Matter coupling `Γ` as `[re, im]`.
    pub coupling: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub frequency: f64,
    /// Real part of the mode field at each site.
    pub fields: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields_im: Option<Vec<[f64; 3]>>,
}

/// One-dimensional standing-wave ladder: mode `n = 1..=count` has frequency
/// `n · fundamental` and field `amplitude · sin(nπx/length) / n` along
/// `polarization`, with `x` the first site coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandingWaveConfig {
    pub count: usize,
    pub fundamental: f64,
    pub length: f64,
    pub amplitude: f64,
    pub polarization: [f64; 3],
}

/// Inclusive linear grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepConfig {
    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|k| self.start + k as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockConfig {
    pub n_max: usize,
    pub eps_over_omega: Vec<f64>,
}

/// Overrides for the spectral-integral quadrature; unset fields keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_subdivisions: Option<usize>,
}

impl QuadratureConfig {
    pub fn settings(&self) -> SpectralSettings {
        let mut s = SpectralSettings::default();
        if let Some(v) = self.rel_tol {
            s.quad.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            s.quad.abs_tol = v;
        }
        if let Some(v) = self.max_subdivisions {
            s.quad.max_subdivisions = v;
        }
        s
    }
}

/// One schema violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Core objects built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub emitters: Vec<Emitter>,
    pub mediators: Vec<Mediator>,
    pub modes: Option<DiscreteModeSet>,
    pub fock: Option<FockModel>,
    pub units: UnitSystem,
}

pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

impl ScenarioConfig {
    /// Canonical TOML form: fixed field order, defaults filled in.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn spectral_settings(&self) -> SpectralSettings {
        self.quadrature.map(|q| q.settings()).unwrap_or_default()
    }

    pub fn pair_indices(&self) -> [usize; 2] {
        self.pair.unwrap_or([0, 1])
    }

    /// Check every field and build the core objects, without computing anything.
    pub fn prepare(&self) -> Result<Prepared, Vec<FieldError>> {
        let mut v = Validator::default();
        let units = self.units.system();
        if let Err(e) = units.validate() {
            v.push("units", e.to_string());
        }
        let emitters = self.check_emitters(&mut v);
        self.check_environment(&mut v);
        let mediators = self.check_mediators(&mut v);

        use ScenarioKind::*;
        match self.kind {
            DirectFreeSpace | DirectLayered | TruncationStudy => {
                if emitters.len() < 2 {
                    v.push("emitters", "at least two emitters are required");
                }
                let [a, b] = self.pair_indices();
                if a == b || a >= emitters.len().max(2) || b >= emitters.len().max(2) {
                    v.push("pair", format!("[{a}, {b}] is not a pair of distinct emitter indices"));
                }
            }
            MediatorSweep => {
                if mediators.len() < 2 {
                    v.push("mediators", "at least two mediators are required");
                }
            }
            TraceoutValidation => {
                if emitters.is_empty() {
                    v.push("emitters", "at least one emitter is required");
                }
            }
        }
        match self.kind {
            DirectFreeSpace => {
                if !matches!(self.environment, None | Some(EnvironmentConfig::FreeSpace)) {
                    v.push("environment", "direct_free_space takes no environment (use direct_layered)");
                }
                match &self.cutoff {
                    None => v.push("cutoff", "missing section"),
                    Some(c) if c.kind != CutoffKind::Gaussian => {
                        v.push("cutoff.kind", "free-space convergence study needs a gaussian cutoff")
                    }
                    Some(_) => {}
                }
            }
            DirectLayered => {
                if matches!(self.environment, None | Some(EnvironmentConfig::FreeSpace)) {
                    v.push("environment", "direct_layered needs a mirror or layered environment");
                }
            }
            TruncationStudy => {
                if self.cutoff.is_none() {
                    v.push("cutoff", "missing section");
                }
            }
            MediatorSweep => match &self.sweep {
                None => v.push("sweep", "missing section"),
                Some(s) => {
                    if s.points == 0 {
                        v.push("sweep.points", "must be at least 1");
                    }
                    if !(s.start > 0.0 && s.stop > 0.0 && s.start.is_finite() && s.stop.is_finite()) {
                        v.push("sweep", "frequencies must be positive");
                    }
                }
            },
            TraceoutValidation => match &self.fock {
                None => v.push("fock", "missing section"),
                Some(f) => {
                    if f.n_max < 1 {
                        v.push("fock.n_max", "must be at least 1");
                    }
                    if f.eps_over_omega.is_empty() {
                        v.push("fock.eps_over_omega", "grid is empty");
                    }
                    for (k, x) in f.eps_over_omega.iter().enumerate() {
                        if !(*x >= 0.0 && x.is_finite()) {
                            v.push(format!("fock.eps_over_omega[{k}]"), "must be non-negative");
                        }
                    }
                }
            },
        }
        if let Some(c) = &self.cutoff {
            self.check_cutoff(c, &mut v);
        }
        if let Some(q) = &self.quadrature {
            for (name, val) in [("rel_tol", q.rel_tol), ("abs_tol", q.abs_tol)] {
                if val.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
                    v.push(format!("quadrature.{name}"), "must be non-negative");
                }
            }
            if q.max_subdivisions == Some(0) {
                v.push("quadrature.max_subdivisions", "must be at least 1");
            }
        }

        let needs_modes = matches!(self.kind, MediatorSweep | TraceoutValidation);
        let sites = if self.kind == MediatorSweep {
            mediators.iter().map(|m| m.position).collect::<Vec<_>>()
        } else {
            emitters.iter().map(|e| e.position).collect()
        };
        let modes = if needs_modes { self.check_modes(&sites, &mut v) } else { None };

        let mut fock = None;
        if self.kind == TraceoutValidation {
            if let (Some(f), Some(m)) = (&self.fock, &modes) {
                if v.errors.is_empty() {
                    match FockModel::new(emitters.clone(), vec![0.0; emitters.len()], m.clone(), f.n_max) {
                        Ok(model) => fock = Some(model),
                        Err(e) => v.push("fock", e.to_string()),
                    }
                }
            }
        }

        if v.errors.is_empty() {
            Ok(Prepared { emitters, mediators, modes, fock, units })
        } else {
            Err(v.errors)
        }
    }

    fn check_emitters(&self, v: &mut Validator) -> Vec<Emitter> {
        let mut out = Vec::with_capacity(self.emitters.len());
        for (k, e) in self.emitters.iter().enumerate() {
            let pos = Vec3::from_array(e.position);
            let dip = Vec3::from_array(e.dipole);
            if !pos.is_finite() {
                v.push(format!("emitters[{k}].position"), "must be finite");
            }
            if !dip.is_finite() {
                v.push(format!("emitters[{k}].dipole"), "must be finite");
            }
            out.push(Emitter::new(pos, dip));
        }
        if let Err((i, j)) = check_distinct(&out) {
            v.push("emitters", format!("emitters {i} and {j} are at the same position"));
        }
        out
    }

    fn check_mediators(&self, v: &mut Validator) -> Vec<Mediator> {
        let start = self.sweep.map(|s| s.start).unwrap_or(1.0);
        let mut out = Vec::with_capacity(self.mediators.len());
        for (k, m) in self.mediators.iter().enumerate() {
            let med = Mediator {
                position: Vec3::from_array(m.position),
                dipole: CVec3::from_real(Vec3::from_array(m.dipole)),
                frequency: self.units.system().frequency_to_natural(start),
                coupling: Complex64::new(m.coupling[0], m.coupling[1]),
            };
            if let Err(e) = med.validate() {
                v.push(format!("mediators[{k}]"), e.to_string());
            }
            out.push(med);
        }
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                if out[i].position == out[j].position {
                    v.push("mediators", format!("mediators {i} and {j} are at the same position"));
                }
            }
        }
        out
    }

    fn check_environment(&self, v: &mut Validator) {
        match &self.environment {
            None | Some(EnvironmentConfig::FreeSpace) => {}
            Some(EnvironmentConfig::Mirror { normal, offset, strength }) => {
                let m = MirrorSpec { normal: Vec3::from_array(*normal), offset: *offset, strength: *strength };
                if let Err(e) = m.validate() {
                    v.push("environment", e.to_string());
                }
            }
            Some(EnvironmentConfig::Layered { first_interface, emitter_layer, layers }) => {
                let stack = LayerStack {
                    layers: layers.clone(),
                    first_interface: *first_interface,
                    emitter_layer: *emitter_layer,
                };
                if let Err(e) = stack.validate() {
                    v.push("environment", e.to_string());
                    return;
                }
                for (k, e) in self.emitters.iter().enumerate() {
                    if let Err(err) = stack.check_inside(&Vec3::from_array(e.position)) {
                        v.push(format!("emitters[{k}].position"), err.to_string());
                    }
                }
            }
        }
    }

    fn check_cutoff(&self, c: &CutoffConfig, v: &mut Validator) {
        match (&c.omega, &c.rho_over_lambda) {
            (Some(_), Some(_)) => v.push("cutoff", "give either omega or rho_over_lambda, not both"),
            (None, None) => v.push("cutoff", "give omega or rho_over_lambda"),
            (Some(g), None) => {
                if g.is_empty() {
                    v.push("cutoff.omega", "grid is empty");
                }
                for (k, w) in g.iter().enumerate() {
                    if !(*w > 0.0 && w.is_finite()) {
                        v.push(format!("cutoff.omega[{k}]"), "cutoff frequency must be positive");
                    }
                }
            }
            (None, Some(g)) => {
                if g.is_empty() {
                    v.push("cutoff.rho_over_lambda", "grid is empty");
                }
                for (k, x) in g.iter().enumerate() {
                    if !(*x > 0.0 && x.is_finite()) {
                        v.push(format!("cutoff.rho_over_lambda[{k}]"), "must be positive");
                    }
                }
            }
        }
        if self.kind == ScenarioKind::TruncationStudy {
            let grid = c.omega.as_ref().or(c.rho_over_lambda.as_ref());
            if let Some(g) = grid {
                if g.windows(2).any(|w| !(w[1] > w[0])) {
                    v.push("cutoff", "grid must be strictly ascending");
                }
            }
        }
    }

    fn check_modes(&self, sites: &[Vec3], v: &mut Validator) -> Option<DiscreteModeSet> {
        let to_nat = |w: f64| self.units.system().frequency_to_natural(w);
        let modes: Vec<DiscreteMode> = match (&self.standing_wave, self.modes.is_empty()) {
            (Some(_), false) => {
                v.push("modes", "give either [[modes]] or [standing_wave], not both");
                return None;
            }
            (None, true) => {
                v.push("modes", "missing [[modes]] or [standing_wave]");
                return None;
            }
            (Some(s), true) => {
                let mut ok = true;
                for (name, val) in [("fundamental", s.fundamental), ("length", s.length)] {
                    if !(val > 0.0 && val.is_finite()) {
                        v.push(format!("standing_wave.{name}"), "must be positive");
                        ok = false;
                    }
                }
                if s.count == 0 {
                    v.push("standing_wave.count", "must be at least 1");
                    ok = false;
                }
                if !ok {
                    return None;
                }
                let pol = Vec3::from_array(s.polarization);
                (1..=s.count)
                    .map(|n| {
                        let nf = n as f64;
                        DiscreteMode {
                            frequency: to_nat(nf * s.fundamental),
                            fields: sites
                                .iter()
                                .map(|r| {
                                    let a = s.amplitude / nf * (nf * std::f64::consts::PI * r.x / s.length).sin();
                                    cvec(a * pol.x, a * pol.y, a * pol.z)
                                })
                                .collect(),
                        }
                    })
                    .collect()
            }
            (None, false) => {
                let mut out = Vec::new();
                for (k, m) in self.modes.iter().enumerate() {
                    if m.fields.len() != sites.len() {
                        v.push(
                            format!("modes[{k}].fields"),
                            format!("{} entries for {} sites", m.fields.len(), sites.len()),
                        );
                        continue;
                    }
                    let im = match &m.fields_im {
                        Some(im) if im.len() != sites.len() => {
                            v.push(format!("modes[{k}].fields_im"), "length differs from fields");
                            continue;
                        }
                        Some(im) => im.clone(),
                        None => vec![[0.0; 3]; sites.len()],
                    };
                    let fields = m
                        .fields
                        .iter()
                        .zip(&im)
                        .map(|(re, im)| {
                            CVec3::new(
                                Complex64::new(re[0], im[0]),
                                Complex64::new(re[1], im[1]),
                                Complex64::new(re[2], im[2]),
                            )
                        })
                        .collect();
                    out.push(DiscreteMode { frequency: to_nat(m.frequency), fields });
                }
                out
            }
        };
        match DiscreteModeSet::new(modes, sites.len()) {
            Ok(m) => Some(m),
            Err(e) => {
                v.push("modes", e.to_string());
                None
            }
        }
    }
}

#[derive(Default)]
struct Validator {
    errors: Vec<FieldError>,
}

impl Validator {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError { field: field.into(), message: message.into() });
    }
}

//! Run configuration: a TOML file with `physical`, `numerics`, `scenario`,
//! `sweep` and `output` sections. Frequencies are entered in Hz without
//! the 2π and converted on load.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::InitialState;
use crate::units::{self, PhysicalParams, ATOMIC_MASS_UNIT};

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "BLOCH_CAVITY_OUT";
/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "BLOCH_CAVITY_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    pub bloch_frequency_hz: f64,
    pub cavity_decay_hz: f64,
    /// U₀/2π; zero selects the static-lattice limit at `target_depth`.
    pub light_shift_hz: f64,
    pub atom_number: f64,
    pub wavelength_nm: f64,
    pub atom_mass_amu: f64,
    /// (Δ_c − NU₀)/κ. Exactly one of this and `delta0_kappa` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_kappa: Option<f64>,
    /// δ₀/κ = (Δ_c − NU₀γ₀)/κ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0_kappa: Option<f64>,
    /// Lattice depth in E_r held by the static field α₀; fixes η.
    pub target_depth: f64,
    pub atomic_linewidth_hz: f64,
    pub atom_detuning_hz: f64,
}

impl PhysicalSection {
    /// The parameters behind every figure preset.
    pub fn sr88(offset_kappa: f64) -> Self {
        Self {
            bloch_frequency_hz: 744.5,
            cavity_decay_hz: 1000.0,
            light_shift_hz: -1.0,
            atom_number: 1000.0,
            wavelength_nm: 689.0,
            atom_mass_amu: 87.905_612_257_1,
            offset_kappa: Some(offset_kappa),
            delta0_kappa: None,
            target_depth: -3.0,
            atomic_linewidth_hz: 7.6e3,
            atom_detuning_hz: -10e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.offset_kappa, self.delta0_kappa) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(Error::param(
                    "physical",
                    "set exactly one of offset_kappa and delta0_kappa",
                ))
            }
        }
        if !(self.target_depth < 0.0) {
            return Err(Error::param(
                "target_depth",
                "must be negative (red-detuned lattice, in recoil energies)",
            ));
        }
        if self.light_shift_hz > 0.0 {
            return Err(Error::param("light_shift_hz", "must be negative or zero"));
        }
        if !(self.bloch_frequency_hz > 0.0) {
            return Err(Error::param("bloch_frequency_hz", "must be positive"));
        }
        self.physical(0.0, 0.0)?.validate()
    }

    /// SI parameters with the given pump rate and cavity detuning (rad/s).
    pub fn physical(&self, pump_rate: f64, cavity_detuning: f64) -> Result<PhysicalParams> {
        let wavelength = self.wavelength_nm * 1e-9;
        Ok(PhysicalParams {
            atom_mass: self.atom_mass_amu * ATOMIC_MASS_UNIT,
            lattice_wavelength: wavelength,
            bias_force: units::force_for_bloch_frequency(2.0 * PI * self.bloch_frequency_hz, wavelength / 2.0),
            cavity_decay: 2.0 * PI * self.cavity_decay_hz,
            pump_rate,
            cavity_detuning,
            atom_light_shift: 2.0 * PI * self.light_shift_hz,
            atom_number: self.atom_number,
            atomic_linewidth: 2.0 * PI * self.atomic_linewidth_hz,
            atom_detuning: 2.0 * PI * self.atom_detuning_hz,
            pump_frequency: 2.0 * PI * units::SPEED_OF_LIGHT / wavelength,
        })
    }

    pub fn static_lattice_limit(&self) -> bool {
        self.light_shift_hz == 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsSection {
    pub box_sites: usize,
    pub points_per_site: usize,
    /// Requested step; reduced so that a Bloch period holds a whole number
    /// of steps.
    pub dt: f64,
    pub periods: f64,
    pub samples_per_period: usize,
    /// Box used to diagonalise the tilted lattice.
    pub basis_sites: usize,
    /// Edge-to-peak density ratio at which a run aborts.
    pub edge_tolerance: f64,
    /// Transient discarded before fits, in units of 1/κ.
    pub transient_kappa: f64,
    /// Fail instead of warning when u₁/ω_B ≥ 1.
    pub strict: bool,
}

impl Default for NumericsSection {
    fn default() -> Self {
        Self {
            box_sites: 256,
            points_per_site: 16,
            dt: 0.0019,
            periods: 101.0,
            samples_per_period: 64,
            basis_sites: 32,
            edge_tolerance: 1e-2,
            transient_kappa: 3.0,
            strict: false,
        }
    }
}

impl NumericsSection {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        if !(self.periods >= 1.0) {
            return Err(Error::param("periods", "must be at least 1"));
        }
        if self.samples_per_period < 20 {
            return Err(Error::param("samples_per_period", "need at least 20 samples per Bloch period"));
        }
        if !(self.edge_tolerance > 0.0) {
            return Err(Error::param("edge_tolerance", "must be positive"));
        }
        if !(self.transient_kappa >= 0.0) {
            return Err(Error::param("transient_kappa", "must be non-negative"));
        }
        if self.basis_sites < 2 * crate::wannier_stark::EDGE_MARGIN_SITES as usize + 2 {
            return Err(Error::param("basis_sites", "too small to hold interior states"));
        }
        crate::grid::SpatialGrid::new(self.box_sites, self.points_per_site)?;
        crate::grid::SpatialGrid::new(self.basis_sites, self.points_per_site)?;
        Ok(())
    }

    /// (dt, stride) with stride·samples_per_period·dt = T_B and dt ≤ the
    /// requested step.
    pub fn snapped_step(&self, bloch_period: f64) -> (f64, usize) {
        let per_sample = bloch_period / self.samples_per_period as f64;
        let stride = (per_sample / self.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (per_sample / stride as f64, stride)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Full,
    Ladder,
    Both,
}

impl Model {
    pub fn full(self) -> bool {
        matches!(self, Model::Full | Model::Both)
    }

    pub fn ladder(self) -> bool {
        matches!(self, Model::Ladder | Model::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default = "default_initial")]
    pub initial_state: InitialState,
    #[serde(default = "default_model")]
    pub model: Model,
    /// Freeze the lattice at `target_depth` and switch off backaction.
    #[serde(default)]
    pub static_lattice: bool,
}

fn default_initial() -> InitialState {
    InitialState::Delocalized {
        center_site: 0,
        width_sites: 20.0,
    }
}

fn default_model() -> Model {
    Model::Both
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            preset: None,
            initial_state: default_initial(),
            model: default_model(),
            static_lattice: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    OffsetKappa,
    Delta0Kappa,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// The file as written by a user: every section optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    physical: Option<PhysicalSection>,
    numerics: Option<NumericsSection>,
    scenario: Option<ScenarioSection>,
    sweep: Option<SweepSection>,
    output: Option<OutputSection>,
}

/// A fully resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physical: PhysicalSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.physical.validate()?;
        self.numerics.validate()?;
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(Error::param("sweep.values", "must not be empty"));
            }
            if sw.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("sweep.values", "must be finite"));
            }
        }
        if let InitialState::Delocalized { width_sites, .. } = self.scenario.initial_state {
            if !(width_sites > 0.0) {
                return Err(Error::param("width_sites", "must be positive"));
            }
        }
        if self.scenario.model.ladder() && matches!(self.scenario.initial_state, InitialState::Wannier { .. }) && !self.scenario.model.full() {
            return Err(Error::param(
                "scenario.model",
                "a Wannier initial state needs the full model to provide its ladder amplitudes",
            ));
        }
        Ok(())
    }

    /// Points of the sweep as (parameter, value) physical sections.
    pub fn points(&self) -> Vec<PhysicalSection> {
        match &self.sweep {
            None => vec![self.physical.clone()],
            Some(sw) => sw
                .values
                .iter()
                .map(|&v| {
                    let mut p = self.physical.clone();
                    match sw.parameter {
                        SweepParameter::OffsetKappa => {
                            p.offset_kappa = Some(v);
                            p.delta0_kappa = None;
                        }
                        SweepParameter::Delta0Kappa => {
                            p.delta0_kappa = Some(v);
                            p.offset_kappa = None;
                        }
                    }
                    p
                })
                .collect(),
        }
    }

    /// TOML that loads back to this configuration. The preset name is
    /// dropped because the physical block is now explicit.
    pub fn to_toml(&self) -> Result<String> {
        let mut plain = self.clone();
        plain.scenario.preset = None;
        toml::to_string(&plain).map_err(|e| Error::Config {
            path: PathBuf::from("<manifest>"),
            message: e.to_string(),
        })
    }
}

pub const PRESETS: &[(&str, &str)] = &[
    ("fig2a_uphill", "20-site packet, (Δc − NU0)/κ = 1.3: drifts uphill"),
    ("fig2a_downhill", "20-site packet, (Δc − NU0)/κ = −0.7: drifts downhill"),
    ("fig2b_breathing", "atoms in one well, (Δc − NU0)/κ = −0.7: breathes without drift"),
    ("fig4", "spectra and force loops for the uphill and downhill detunings"),
    ("fig5_sweep", "transport velocity over δ0/κ = −2.5 … 2.5 at depth −3 Er"),
    ("static_control", "lattice frozen at −3 Er with no backaction"),
];

pub fn preset(name: &str) -> Result<RunConfig> {
    let base = |offset: f64| RunConfig {
        physical: PhysicalSection::sr88(offset),
        numerics: NumericsSection::default(),
        scenario: ScenarioSection {
            preset: Some(name.to_string()),
            ..ScenarioSection::default()
        },
        sweep: None,
        output: OutputSection {
            dir: PathBuf::from("out").join(name),
        },
    };
    let cfg = match name {
        "fig2a_uphill" => base(1.3),
        "fig2a_downhill" => base(-0.7),
        "fig2b_breathing" => {
            let mut c = base(-0.7);
            c.scenario.initial_state = InitialState::Wannier { center_site: 0 };
            c.scenario.model = Model::Full;
            c
        }
        "fig4" => {
            let mut c = base(1.3);
            c.scenario.model = Model::Full;
            c.sweep = Some(SweepSection {
                parameter: SweepParameter::OffsetKappa,
                values: vec![1.3, -0.7],
            });
            c
        }
        "fig5_sweep" => {
            let mut c = base(0.0);
            c.physical.offset_kappa = None;
            c.physical.delta0_kappa = Some(0.0);
            c.sweep = Some(SweepSection {
                parameter: SweepParameter::Delta0Kappa,
                values: (-5..=5).map(|k| k as f64 * 0.5).collect(),
            });
            c
        }
        "static_control" => {
            let mut c = base(1.3);
            c.scenario.static_lattice = true;
            c.scenario.model = Model::Full;
            c.numerics.periods = 20.0;
            c
        }
        _ => {
            let known: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            return Err(Error::param(
                "preset",
                format!("unknown preset `{name}`; known presets: {}", known.join(", ")),
            ));
        }
    };
    Ok(cfg)
}

fn config_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Parse and validate a configuration. `preset_override` replaces any
/// preset named in the file.
pub fn parse_config(text: &str, path: &Path, preset_override: Option<&str>) -> Result<RunConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| config_error(path, e.to_string()))?;
    let scenario_preset = file.scenario.as_ref().and_then(|s| s.preset.clone());
    let preset_name = preset_override.map(str::to_string).or(scenario_preset);
    let mut cfg = match (preset_name, file.physical) {
        (Some(_), Some(_)) => {
            return Err(config_error(
                path,
                "a preset and a [physical] section are mutually exclusive",
            ))
        }
        (None, None) => {
            return Err(config_error(
                path,
                "either [scenario] preset or a [physical] section is required",
            ))
        }
        (Some(name), None) => {
            let mut cfg = preset(&name).map_err(|e| config_error(path, e.to_string()))?;
            if let Some(s) = file.scenario {
                let preset_scenario = cfg.scenario.clone();
                cfg.scenario = ScenarioSection {
                    preset: Some(name),
                    ..preset_scenario
                };
                if s.initial_state != default_initial() || s.model != default_model() || s.static_lattice {
                    return Err(config_error(
                        path,
                        "scenario settings other than the preset name cannot be combined with a preset",
                    ));
                }
            }
            if file.sweep.is_some() {
                return Err(config_error(path, "a preset fixes its own sweep"));
            }
            cfg
        }
        (None, Some(physical)) => RunConfig {
            physical,
            numerics: NumericsSection::default(),
            scenario: file.scenario.unwrap_or_default(),
            sweep: file.sweep,
            output: OutputSection::default(),
        },
    };
    if let Some(n) = file.numerics {
        cfg.numerics = n;
    }
    if let Some(o) = file.output {
        cfg.output = o;
    }
    cfg.validate().map_err(|e| config_error(path, e.to_string()))?;
    Ok(cfg)
}

pub fn load_config(path: &Path, preset_override: Option<&str>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(path, e.to_string()))?;
    parse_config(&text, path, preset_override)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig> {
        parse_config(s, Path::new("test.toml"), None)
    }

    #[test]
    fn empty_file_is_a_config_error() {
        let e = parse("").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse("[scenario]\npreset = \"fig2a_uphill\"\ncolour = 3\n").unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
        let e = parse("[numerics]\nbogus = 1\n[scenario]\npreset = \"fig2a_uphill\"\n").unwrap_err();
        assert!(e.to_string().contains("bogus"));
    }

    #[test]
    fn preset_and_physical_are_exclusive() {
        let phys = toml::to_string(&PhysicalSection::sr88(1.3)).unwrap();
        let text = format!("[scenario]\npreset = \"fig2a_uphill\"\n[physical]\n{phys}");
        assert!(parse(&text).is_err());
        let text = format!("[physical]\n{phys}");
        let cfg = parse(&text).unwrap();
        assert_eq!(cfg.physical.offset_kappa, Some(1.3));
    }

    #[test]
    fn presets_resolve() {
        let up = preset("fig2a_uphill").unwrap();
        assert_eq!(up.physical.offset_kappa, Some(1.3));
        assert_eq!(
            up.scenario.initial_state,
            InitialState::Delocalized {
                center_site: 0,
                width_sites: 20.0
            }
        );
        let br = preset("fig2b_breathing").unwrap();
        assert_eq!(br.physical.offset_kappa, Some(-0.7));
        assert!(matches!(br.scenario.initial_state, InitialState::Wannier { .. }));
        let sw = preset("fig5_sweep").unwrap();
        assert_eq!(sw.points().len(), 11);
        for (name, _) in PRESETS {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(preset("fig9").is_err());
    }

    #[test]
    fn numerics_override_a_preset() {
        let cfg = parse("[scenario]\npreset = \"fig2a_uphill\"\n[numerics]\nperiods = 12.0\n").unwrap();
        assert_eq!(cfg.numerics.periods, 12.0);
        assert_eq!(cfg.numerics.box_sites, 256);
        let cfg = parse_config("[numerics]\nperiods = 12.0\n", Path::new("x"), Some("fig2a_downhill")).unwrap();
        assert_eq!(cfg.physical.offset_kappa, Some(-0.7));
    }

    #[test]
    fn detuning_must_be_given_once() {
        let mut p = PhysicalSection::sr88(1.0);
        p.delta0_kappa = Some(0.5);
        assert!(p.validate().is_err());
        p.offset_kappa = None;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut cfg = preset("fig5_sweep").unwrap();
        let text = cfg.to_toml().unwrap();
        cfg.scenario.preset = None;
        let back = parse(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn snapped_step_divides_the_period() {
        let n = NumericsSection::default();
        let tb = 40.34;
        let (dt, stride) = n.snapped_step(tb);
        assert!(dt <= n.dt);
        assert!((dt * (stride * n.samples_per_period) as f64 - tb).abs() < 1e-12);
    }
}

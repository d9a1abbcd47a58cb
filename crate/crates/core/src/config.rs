//! TOML run configuration.
//!
//! Every table is optional and falls back to the documented defaults, so
//! `scenario = "minimal"` is a complete file. Unknown keys are rejected and
//! constraint violations are collected in one pass, each with the line it
//! came from when the key was written explicitly.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ExperimentContext, FitFamily, GainCurveModel, DEFAULT_CASCADE_STEPS};
use crate::detection::DetectionChain;
use crate::oam::MIN_RESOLUTION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: String,
    pub rng_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub experiment: ExperimentContext,
    pub seed_beam: SeedBeamConfig,
    pub channel: ChannelConfig,
    pub detection: DetectionChain,
    pub gain_curve: GainCurveModel,
    pub sweep: SweepConfig,
    pub attenuation: AttenuationConfig,
    pub image: ImageConfig,
    pub mc: McConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            rng_seed: 0,
            output_dir: None,
            experiment: ExperimentContext::default(),
            seed_beam: SeedBeamConfig::default(),
            channel: ChannelConfig::default(),
            detection: DetectionChain::default(),
            gain_curve: GainCurveModel::default(),
            sweep: SweepConfig::default(),
            attenuation: AttenuationConfig::default(),
            image: ImageConfig::default(),
            mc: McConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedBeamConfig {
    /// Coherent amplitude |α| of the seed; the mean flux is its square.
    pub amplitude: f64,
    /// Seed power, carried as metadata.
    pub power_uw: f64,
    /// Topological charge of the seed.
    pub charge: i32,
}

impl Default for SeedBeamConfig {
    fn default() -> Self {
        Self {
            amplitude: 1e3,
            power_uw: 9.2,
            charge: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelFamily {
    Ideal,
    LossBeforeGain,
    LossAfterGain,
    Cascade,
}

impl ChannelFamily {
    pub fn fit_family(self, steps: usize) -> FitFamily {
        match self {
            ChannelFamily::Ideal => FitFamily::Ideal,
            ChannelFamily::LossBeforeGain => FitFamily::LossBeforeGain,
            ChannelFamily::LossAfterGain => FitFamily::LossAfterGain,
            ChannelFamily::Cascade => FitFamily::Cascade { steps },
        }
    }
}

/// Channel parameters, or fit targets that determine them.
///
/// With `target_gains` the family is fitted to the gains (and to
/// `target_nsf_db` if given). With only `target_nsf_db` and the
/// `loss_after_gain` family, `gain` is kept and a common transmission is
/// solved for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub family: ChannelFamily,
    pub gain: f64,
    pub eta_probe: f64,
    pub eta_conj: f64,
    pub steps: usize,
    pub gamma_total: f64,
    pub alpha_probe_total: f64,
    pub alpha_conj_total: f64,
    pub target_gains: Option<[f64; 2]>,
    pub target_nsf_db: Option<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            family: ChannelFamily::Ideal,
            gain: 2.0,
            eta_probe: 1.0,
            eta_conj: 1.0,
            steps: DEFAULT_CASCADE_STEPS,
            gamma_total: 0.5,
            alpha_probe_total: 0.0,
            alpha_conj_total: 0.0,
            target_gains: None,
            target_nsf_db: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub start_mhz: f64,
    pub stop_mhz: f64,
    pub step_mhz: f64,
    /// Channel family fitted to the gain curve at each detuning.
    pub family: ChannelFamily,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            start_mhz: -50.0,
            stop_mhz: 16.0,
            step_mhz: 1.0,
            family: ChannelFamily::LossBeforeGain,
        }
    }
}

impl SweepConfig {
    /// Grid points from start to stop inclusive.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop_mhz - self.start_mhz) / self.step_mhz + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| self.start_mhz + i as f64 * self.step_mhz)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttenuationConfig {
    pub t_min: f64,
    pub t_max: f64,
    /// Extra transmission at which the noise factor is also reported.
    pub t_probe: Option<f64>,
}

impl Default for AttenuationConfig {
    fn default() -> Self {
        Self {
            t_min: 0.01,
            t_max: 1.0,
            t_probe: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageConfig {
    /// Seed charge for rendering.
    pub l: i32,
    pub l_pump: i32,
    pub p: u32,
    pub waist_um: f64,
    pub wavelength_nm: f64,
    pub extent_um: f64,
    pub resolution: usize,
    pub z_um: f64,
    pub fringes: f64,
    pub tilt_angle_deg: f64,
    pub bit_depth: u8,
    /// Radius of the winding loop as a fraction of the half extent.
    pub radius_fraction: f64,
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self {
            l: -1,
            l_pump: 0,
            p: 0,
            waist_um: 370.0,
            wavelength_nm: 894.6,
            extent_um: 1480.0,
            resolution: 256,
            z_um: 0.0,
            fringes: 24.0,
            tilt_angle_deg: 0.0,
            bit_depth: 16,
            radius_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    /// Sampling cross-check size; 0 disables it.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Missing {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("syntax error{}: {message}", line_suffix(*.line))]
    Syntax {
        line: Option<usize>,
        message: String,
    },
    #[error("invalid key or type{}: {message}", line_suffix(*.line))]
    Schema {
        line: Option<usize>,
        message: String,
    },
    #[error("{} constraint violation(s):\n{}", .0.len(), join_violations(.0))]
    Constraint(Vec<Violation>),
}

fn line_suffix(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[table]` (or the top level when `table` is empty).
fn locate(src: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            continue;
        }
        if current != table {
            continue;
        }
        if let Some(rest) = line.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                return Some(i + 1);
            }
        }
    }
    None
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Missing {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&src)
    }

    pub fn from_toml_str(src: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = toml::from_str(src).map_err(|e| ConfigError::Syntax {
            line: e.span().map(|s| line_of(src, s.start)),
            message: e.message().to_string(),
        })?;
        let _ = table;
        let cfg: RunConfig = toml::from_str(src).map_err(|e| ConfigError::Schema {
            line: e.span().map(|s| line_of(src, s.start)),
            message: e.message().to_string(),
        })?;
        let violations = cfg.violations(Some(src));
        if violations.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Constraint(violations))
        }
    }

    /// Checks all constraints of a config built in code.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let v = self.violations(None);
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Constraint(v))
        }
    }

    /// Every constraint violation, in file order of the tables.
    pub fn violations(&self, src: Option<&str>) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |table: &str, key: &str, message: String| {
            let field = if table.is_empty() {
                key.to_string()
            } else {
                format!("{table}.{key}")
            };
            let line = src.and_then(|s| locate(s, table, key));
            out.push(Violation {
                field,
                line,
                message,
            });
        };
        let finite = |v: f64| v.is_finite();

        if self.scenario.trim().is_empty() {
            push("", "scenario", "must not be empty".into());
        }

        for name in self.experiment.non_positive_fields() {
            push("experiment", name, "must be finite and > 0".into());
        }
        if !finite(self.experiment.two_photon_detuning_mhz) {
            push(
                "experiment",
                "two_photon_detuning_mhz",
                "must be finite".into(),
            );
        }

        let s = &self.seed_beam;
        if !(s.amplitude > 0.0 && finite(s.amplitude)) {
            push(
                "seed_beam",
                "amplitude",
                format!("must be finite and > 0, got {}", s.amplitude),
            );
        } else if s.amplitude * s.amplitude < crate::gaussian::BRIGHT_FLUX_MIN {
            push(
                "seed_beam",
                "amplitude",
                format!(
                    "flux {} is below the bright-beam minimum {}",
                    s.amplitude * s.amplitude,
                    crate::gaussian::BRIGHT_FLUX_MIN
                ),
            );
        }
        if !(s.power_uw > 0.0 && finite(s.power_uw)) {
            push(
                "seed_beam",
                "power_uw",
                format!("must be finite and > 0, got {}", s.power_uw),
            );
        }

        let c = &self.channel;
        if !(c.gain >= 1.0 && finite(c.gain)) {
            push(
                "channel",
                "gain",
                format!("must be finite and >= 1, got {}", c.gain),
            );
        }
        for (key, v) in [("eta_probe", c.eta_probe), ("eta_conj", c.eta_conj)] {
            if !(0.0..=1.0).contains(&v) || v == 0.0 {
                push("channel", key, format!("must lie in (0, 1], got {v}"));
            }
        }
        if c.steps == 0 {
            push("channel", "steps", "must be >= 1".into());
        }
        for (key, v) in [
            ("gamma_total", c.gamma_total),
            ("alpha_probe_total", c.alpha_probe_total),
            ("alpha_conj_total", c.alpha_conj_total),
        ] {
            if !(v >= 0.0 && finite(v)) {
                push("channel", key, format!("must be finite and >= 0, got {v}"));
            }
        }
        if let Some([gp, gc]) = c.target_gains {
            if !(gp > 0.0 && finite(gp) && gc >= 0.0 && finite(gc)) {
                push(
                    "channel",
                    "target_gains",
                    format!("need g_p > 0 and g_c >= 0, got [{gp}, {gc}]"),
                );
            }
        }
        if let Some(db) = c.target_nsf_db {
            if !finite(db) {
                push("channel", "target_nsf_db", "must be finite".into());
            } else if c.target_gains.is_none() && c.family != ChannelFamily::LossAfterGain {
                push(
                    "channel",
                    "target_nsf_db",
                    "without target_gains a noise target needs family = \"loss_after_gain\"".into(),
                );
            }
        }

        let d = &self.detection;
        if !(0.0..=1.0).contains(&d.quantum_efficiency) || d.quantum_efficiency == 0.0 {
            push(
                "detection",
                "quantum_efficiency",
                format!("must lie in (0, 1], got {}", d.quantum_efficiency),
            );
        }
        if !(d.electronic_noise >= 0.0 && finite(d.electronic_noise)) {
            push(
                "detection",
                "electronic_noise",
                format!("must be finite and >= 0, got {}", d.electronic_noise),
            );
        }
        for (key, v) in [
            ("transimpedance_v_per_a", d.transimpedance_v_per_a),
            ("analysis_frequency_mhz", d.analysis_frequency_mhz),
            ("rbw_khz", d.rbw_khz),
            ("vbw_hz", d.vbw_hz),
        ] {
            if !(v > 0.0 && finite(v)) {
                push("detection", key, format!("must be finite and > 0, got {v}"));
            }
        }

        if let Err(e) = self.gain_curve.validate() {
            // the model reports all of its fields in one message
            for part in e.to_string().split("; ") {
                let part = part.trim_start_matches("validation error: ");
                let key = part.split_whitespace().next().unwrap_or("gain_curve");
                push(
                    "gain_curve",
                    key,
                    part.trim_start_matches(key).trim().to_string(),
                );
            }
        }

        let w = &self.sweep;
        if !(finite(w.start_mhz) && finite(w.stop_mhz) && w.start_mhz <= w.stop_mhz) {
            push(
                "sweep",
                "stop_mhz",
                format!(
                    "need finite start <= stop, got [{}, {}]",
                    w.start_mhz, w.stop_mhz
                ),
            );
        }
        if !(w.step_mhz > 0.0 && finite(w.step_mhz)) {
            push(
                "sweep",
                "step_mhz",
                format!("must be finite and > 0, got {}", w.step_mhz),
            );
        } else if (w.stop_mhz - w.start_mhz) / w.step_mhz > 1e6 {
            push("sweep", "step_mhz", "more than 1e6 sweep points".into());
        }

        let a = &self.attenuation;
        if !(0.0 < a.t_min && a.t_min < a.t_max && a.t_max <= 1.0) {
            push(
                "attenuation",
                "t_min",
                format!(
                    "need 0 < t_min < t_max <= 1, got [{}, {}]",
                    a.t_min, a.t_max
                ),
            );
        }
        if let Some(t) = a.t_probe {
            if !(t > 0.0 && t <= 1.0) {
                push(
                    "attenuation",
                    "t_probe",
                    format!("must lie in (0, 1], got {t}"),
                );
            }
        }

        let im = &self.image;
        for (key, v) in [
            ("waist_um", im.waist_um),
            ("wavelength_nm", im.wavelength_nm),
            ("extent_um", im.extent_um),
        ] {
            if !(v > 0.0 && finite(v)) {
                push("image", key, format!("must be finite and > 0, got {v}"));
            }
        }
        if im.resolution < MIN_RESOLUTION {
            push(
                "image",
                "resolution",
                format!("must be >= {MIN_RESOLUTION}, got {}", im.resolution),
            );
        }
        if !finite(im.z_um) {
            push("image", "z_um", "must be finite".into());
        }
        if !(im.fringes >= crate::oam::MIN_FRINGES && finite(im.fringes)) {
            push(
                "image",
                "fringes",
                format!("must be >= {}, got {}", crate::oam::MIN_FRINGES, im.fringes),
            );
        }
        if !finite(im.tilt_angle_deg) {
            push("image", "tilt_angle_deg", "must be finite".into());
        }
        if im.bit_depth != 8 && im.bit_depth != 16 {
            push(
                "image",
                "bit_depth",
                format!("must be 8 or 16, got {}", im.bit_depth),
            );
        }
        if !(im.radius_fraction > 0.0 && im.radius_fraction < 1.0) {
            push(
                "image",
                "radius_fraction",
                format!("must lie in (0, 1), got {}", im.radius_fraction),
            );
        }

        if self.mc.samples != 0 && self.mc.samples < crate::gaussian::mc::MIN_SAMPLES {
            push(
                "mc",
                "samples",
                format!(
                    "must be 0 or >= {}, got {}",
                    crate::gaussian::mc::MIN_SAMPLES,
                    self.mc.samples
                ),
            );
        }
        out
    }

    /// SHA-256 of the resolved configuration, as lowercase hex.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Built-in scenarios written by `twinbeam presets`.
pub const PRESETS: [(&str, &str); 3] = [
    ("high-gain", PRESET_FIG2),
    ("detuning-sweep", PRESET_FIG3),
    ("non-amplifying", PRESET_FIG4),
];

const PRESET_FIG2: &str = r#"# Amplifying regime on two-photon resonance with an l = -1 seed.
# Gain is the conjugate-plus-probe output over the 9.2 uW seed; the
# balanced transmission is solved so the difference noise is -4.9 dB.
scenario = "high-gain"
rng_seed = 1

[experiment]
two_photon_detuning_mhz = 0.0
pump_power_mw = 550.0
cell_temperature_c = 112.0

[seed_beam]
amplitude = 1000.0
power_uw = 9.2
charge = -1

[channel]
family = "loss_after_gain"
gain = 6.26086957
target_nsf_db = -4.9

[detection]
# detector loss is folded into the fitted transmission
quantum_efficiency = 1.0

[image]
l = -1
l_pump = 0
waist_um = 370.0

[mc]
samples = 200000
"#;

const PRESET_FIG3: &str = r#"# Gain and noise against two-photon detuning at low pump power.
scenario = "detuning-sweep"
rng_seed = 1

[experiment]
pump_power_mw = 740.0
cell_temperature_c = 80.0

[sweep]
start_mhz = -50.0
stop_mhz = 16.0
step_mhz = 1.0
family = "loss_before_gain"

[attenuation]
t_min = 0.01
t_max = 1.0
"#;

const PRESET_FIG4: &str = r#"# Non-amplifying point at delta = -19 MHz, with the probe attenuation scan.
scenario = "non-amplifying"
rng_seed = 1

[experiment]
two_photon_detuning_mhz = -19.0
pump_power_mw = 740.0
cell_temperature_c = 80.0

[seed_beam]
charge = -1

[channel]
family = "loss_before_gain"
target_gains = [0.84, 0.16]

[detection]
# losses are folded into the fitted channel
quantum_efficiency = 1.0

[attenuation]
t_min = 0.01
t_max = 1.0
t_probe = 0.33
"#;

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_valid() {
        let cfg = RunConfig::from_toml_str("scenario = \"minimal\"\n").unwrap();
        assert_eq!(cfg.scenario, "minimal");
        assert_eq!(cfg.detection.quantum_efficiency, 0.98);
        assert_eq!(cfg.channel.steps, 800);
        assert_eq!(cfg.image.bit_depth, 16);
        assert_eq!(cfg.sweep.points().len(), 67);
    }

    #[test]
    fn presets_parse() {
        for (name, src) in PRESETS {
            let cfg = RunConfig::from_toml_str(src).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.scenario, name);
        }
        assert!(preset("non-amplifying").is_some());
        assert!(preset("nope").is_none());
    }

    #[test]
    fn syntax_error_has_line() {
        let err = RunConfig::from_toml_str("scenario = \"x\"\n[channel\ngain = 2\n").unwrap_err();
        match err {
            ConfigError::Syntax { line, .. } => assert_eq!(line, Some(2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::from_toml_str("[channel]\ngain = 2\ngian = 3\n").unwrap_err();
        match err {
            ConfigError::Schema { line, message } => {
                assert_eq!(line, Some(3));
                assert!(message.contains("gian"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            RunConfig::from_toml_str("bogus = 1\n"),
            Err(ConfigError::Schema { .. })
        ));
    }

    #[test]
    fn all_violations_listed() {
        let src = "scenario = \"bad\"\n[channel]\ngain = 0.5\neta_probe = 1.5\n\n[detection]\nquantum_efficiency = 2.0\n[image]\nresolution = 32\n";
        let err = RunConfig::from_toml_str(src).unwrap_err();
        let ConfigError::Constraint(v) = err else {
            panic!("{err:?}")
        };
        let lines: Vec<_> = v.iter().map(|x| (x.field.as_str(), x.line)).collect();
        assert_eq!(
            lines,
            vec![
                ("channel.gain", Some(3)),
                ("channel.eta_probe", Some(4)),
                ("detection.quantum_efficiency", Some(7)),
                ("image.resolution", Some(9)),
            ]
        );
    }

    #[test]
    fn missing_file() {
        let err = RunConfig::from_path(Path::new("/nonexistent/run.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Missing { .. }));
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.rng_seed = 7;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}

//! Subcommand drivers. Each one computes its results from a validated
//! [`RunConfig`], writes its files into the output directory and returns a
//! report; nothing here depends on wall-clock time, so outputs are
//! byte-identical across runs.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::channel::{
    fit_balanced_efficiency, fit_channel, seeded_pair, CascadeSpec, ChannelSpec, FitResult,
    GainPair, LossPlacement, LumpedChannelSpec,
};
use crate::config::{ChannelFamily, ConfigError, RunConfig, PRESETS};
use crate::detection::{
    from_decibel, measure_noise, optimize_probe_attenuation, AttenuationOptimum, NoiseMeasurement,
    Observable,
};
use crate::gaussian::mc::{mc_nsf_oracle, Beam, LinearStep, McEstimate};
use crate::gaussian::{GaussianState, SqueezerSpec};
use crate::oam::{
    check_oam_conservation, conjugate_charge, fork_dislocation_order, interfere_plane_wave,
    lg_field, tilt_for_fringes, topological_charge, LGModeSpec,
};
use crate::output::{
    csv_document, encode_pgm, provenance_lines, summary_csv, SWEEP_COLUMNS, TOOL_NAME, TOOL_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    SweepDetuning,
    RenderBeams,
    Fit,
    OptimizeAttenuation,
    Presets,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::SweepDetuning => "sweep-detuning",
            Command::RenderBeams => "render-beams",
            Command::Fit => "fit",
            Command::OptimizeAttenuation => "optimize-attenuation",
            Command::Presets => "presets",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub format: Format,
    /// Worker threads for parallel sweeps; `None` uses rayon's default.
    pub threads: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] crate::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
}

/// What a subcommand produced. `failures` lists requested results that
/// could not be achieved (for instance an unreachable fit target); the
/// files are still written so the partial result can be inspected.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Value,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub failures: Vec<String>,
}

/// Channel actually used by a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedChannel {
    pub spec: ChannelSpec,
    pub fit: Option<FitResult>,
}

/// Builds the channel from explicit parameters or by fitting the targets.
pub fn resolve_channel(cfg: &RunConfig) -> crate::Result<ResolvedChannel> {
    let c = &cfg.channel;
    let nsf_target = c.target_nsf_db.map(from_decibel);
    if let Some([g_p, g_c]) = c.target_gains {
        let fit = fit_channel(
            GainPair::new(g_p, g_c)?,
            nsf_target,
            c.family.fit_family(c.steps),
        )?;
        return Ok(ResolvedChannel {
            spec: fit.spec,
            fit: Some(fit),
        });
    }
    let lumped = |eta_probe, eta_conj, placement| {
        ChannelSpec::Lumped(LumpedChannelSpec {
            gain: c.gain,
            eta_probe,
            eta_conj,
            placement,
        })
    };
    let spec = match (c.family, nsf_target) {
        (ChannelFamily::LossAfterGain, Some(target)) => {
            let eta = fit_balanced_efficiency(c.gain, target)?;
            lumped(eta, eta, LossPlacement::LossAfterGain)
        }
        (ChannelFamily::Ideal, _) => ChannelSpec::Ideal(SqueezerSpec::new(c.gain)?),
        (ChannelFamily::LossBeforeGain, _) => {
            lumped(c.eta_probe, c.eta_conj, LossPlacement::LossBeforeGain)
        }
        (ChannelFamily::LossAfterGain, None) => {
            lumped(c.eta_probe, c.eta_conj, LossPlacement::LossAfterGain)
        }
        (ChannelFamily::Cascade, _) => ChannelSpec::Cascade(CascadeSpec {
            steps: c.steps,
            gamma_total: c.gamma_total,
            alpha_probe_total: c.alpha_probe_total,
            alpha_conj_total: c.alpha_conj_total,
        }),
    };
    spec.validate()?;
    Ok(ResolvedChannel { spec, fit: None })
}

fn fit_failures(resolved: &ResolvedChannel) -> Vec<String> {
    match &resolved.fit {
        Some(f) if !f.reachable => vec![format!(
            "fit target not reachable by this channel family (residual {:.3e})",
            f.residual
        )],
        _ => Vec::new(),
    }
}

/// Seeded probe/conjugate pair after the channel.
pub fn output_state(
    cfg: &RunConfig,
    spec: &ChannelSpec,
) -> crate::Result<(GaussianState, usize, usize)> {
    let seed = Complex64::new(cfg.seed_beam.amplitude, 0.0);
    let (state, p, c) = seeded_pair(seed, cfg.seed_beam.charge)?;
    Ok((spec.apply(&state, p, c)?, p, c))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McCheck {
    pub estimate: McEstimate,
    /// Analytic difference-noise factor of the same scenario.
    pub analytic_nsf: f64,
    /// (estimate − analytic) / standard error.
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttenuationReport {
    pub optimum: AttenuationOptimum,
    pub t_probe: Option<f64>,
    pub nsf_at_t_probe: Option<NoiseMeasurement>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub channel: ResolvedChannel,
    pub gains: GainPair,
    pub noise: Vec<NoiseMeasurement>,
    pub attenuation: AttenuationReport,
    pub mc: Option<McCheck>,
    pub charges: ChargeBookkeeping,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChargeBookkeeping {
    pub pump: i32,
    pub probe: i32,
    pub conjugate: i32,
    pub conserved: bool,
}

pub fn attenuation_report(cfg: &RunConfig, spec: &ChannelSpec) -> crate::Result<AttenuationReport> {
    let (state, p, c) = output_state(cfg, spec)?;
    let a = &cfg.attenuation;
    let optimum = optimize_probe_attenuation(&state, p, c, &cfg.detection, (a.t_min, a.t_max))?;
    let nsf_at_t_probe = match a.t_probe {
        Some(t) => Some(measure_noise(
            &state.beamsplit_loss(p, t)?,
            p,
            c,
            &cfg.detection,
            Observable::Difference,
        )?),
        None => None,
    };
    Ok(AttenuationReport {
        optimum,
        t_probe: a.t_probe,
        nsf_at_t_probe,
    })
}

pub fn simulate(cfg: &RunConfig) -> crate::Result<SimulationResult> {
    let channel = resolve_channel(cfg)?;
    let spec = channel.spec;
    let (state, p, c) = output_state(cfg, &spec)?;
    state.check_physical()?;
    let noise = Observable::ALL
        .iter()
        .map(|&w| measure_noise(&state, p, c, &cfg.detection, w))
        .collect::<crate::Result<Vec<_>>>()?;

    let mc = if cfg.mc.samples > 0 {
        let eta = cfg.detection.quantum_efficiency;
        let mut scenario = spec.mc_scenario(Complex64::new(cfg.seed_beam.amplitude, 0.0))?;
        scenario.steps.push(LinearStep::Loss {
            beam: Beam::Probe,
            eta,
        });
        scenario.steps.push(LinearStep::Loss {
            beam: Beam::Conjugate,
            eta,
        });
        let mut estimate = mc_nsf_oracle(&scenario, cfg.mc.samples, cfg.rng_seed)?;
        estimate.nsf += cfg.detection.electronic_noise;
        let analytic_nsf = noise[2].nsf_linear;
        Some(McCheck {
            estimate,
            analytic_nsf,
            z_score: (estimate.nsf - analytic_nsf) / estimate.std_error,
        })
    } else {
        None
    };

    let probe = cfg.seed_beam.charge;
    let conjugate = conjugate_charge(cfg.image.l_pump, probe);
    Ok(SimulationResult {
        gains: spec.gains()?,
        channel,
        noise,
        attenuation: attenuation_report(cfg, &spec)?,
        mc,
        charges: ChargeBookkeeping {
            pump: cfg.image.l_pump,
            probe,
            conjugate,
            conserved: check_oam_conservation(cfg.image.l_pump, probe, conjugate),
        },
    })
}

/// One row of the detuning sweep, in [`SWEEP_COLUMNS`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta_mhz: f64,
    pub g_p: f64,
    pub g_c: f64,
    pub g_sum: f64,
    pub nsf_linear: f64,
    pub nsf_db: f64,
    pub t_star: f64,
    pub nsf_star_db: f64,
    pub extrapolated: bool,
    pub reachable: bool,
}

impl SweepRow {
    pub fn values(&self) -> Vec<f64> {
        vec![
            self.delta_mhz,
            self.g_p,
            self.g_c,
            self.g_sum,
            self.nsf_linear,
            self.nsf_db,
            self.t_star,
            self.nsf_star_db,
        ]
    }
}

fn sweep_point(cfg: &RunConfig, delta: f64) -> crate::Result<SweepRow> {
    let sample = cfg.gain_curve.evaluate(delta);
    let family = cfg.sweep.family.fit_family(cfg.channel.steps);
    let fit = fit_channel(sample.gains, None, family)?;
    let (state, p, c) = output_state(cfg, &fit.spec)?;
    let noise = measure_noise(&state, p, c, &cfg.detection, Observable::Difference)?;
    let a = &cfg.attenuation;
    let opt = optimize_probe_attenuation(&state, p, c, &cfg.detection, (a.t_min, a.t_max))?;
    Ok(SweepRow {
        delta_mhz: delta,
        g_p: sample.gains.g_p,
        g_c: sample.gains.g_c,
        g_sum: sample.gains.sum(),
        nsf_linear: noise.nsf_linear,
        nsf_db: noise.nsf_db,
        t_star: opt.t_star,
        nsf_star_db: opt.nsf_star_db,
        extrapolated: sample.extrapolated,
        reachable: fit.reachable,
    })
}

/// Evaluates the sweep grid in parallel; rows come back in grid order.
pub fn sweep_detuning(cfg: &RunConfig, threads: Option<usize>) -> Result<Vec<SweepRow>, RunError> {
    let points = cfg.sweep.points();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Pool(e.to_string()))?;
    let rows = pool.install(|| {
        points
            .par_iter()
            .map(|&d| sweep_point(cfg, d))
            .collect::<crate::Result<Vec<_>>>()
    })?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamRender {
    pub name: String,
    pub charge: i32,
    pub measured_charge: i32,
    pub fork_order: i32,
    pub warnings: Vec<String>,
}

/// Named images belonging to one beam.
pub type BeamImages = Vec<(String, crate::oam::ImageGrid)>;

/// Intensity and fork images of the seed, probe and conjugate.
pub fn render_beams(cfg: &RunConfig) -> crate::Result<Vec<(BeamRender, BeamImages)>> {
    let im = &cfg.image;
    let conj = conjugate_charge(im.l_pump, im.l);
    let mut out = Vec::new();
    for (name, l) in [("seed", im.l), ("probe", im.l), ("conjugate", conj)] {
        let spec = LGModeSpec {
            l,
            p: im.p,
            waist_um: im.waist_um,
            wavelength_nm: im.wavelength_nm,
        };
        let field = lg_field(&spec, im.extent_um, im.resolution, im.z_um)?;
        let tilt = tilt_for_fringes(&field.geometry, im.fringes, im.tilt_angle_deg.to_radians());
        let fork = interfere_plane_wave(&field, tilt)?;
        let measured_charge = topological_charge(&field, im.radius_fraction)?;
        let fork_order = fork_dislocation_order(&fork, tilt, im.radius_fraction)?;
        let mut warnings = field.warnings.clone();
        warnings.extend(fork.warnings.iter().cloned());
        warnings.dedup();
        out.push((
            BeamRender {
                name: name.into(),
                charge: l,
                measured_charge,
                fork_order,
                warnings,
            },
            vec![
                (name.to_string(), field.intensity()),
                (format!("{name}_fork"), fork),
            ],
        ));
    }
    Ok(out)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    std::fs::write(path, bytes).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn header(cfg: &RunConfig, cmd: Command, hash: &str) -> Value {
    json!({
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "command": cmd.name(),
        "scenario": cfg.scenario,
        "rng_seed": cfg.rng_seed,
        "config_sha256": hash,
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

/// Runs one subcommand and writes its outputs under `opts.out_dir`.
pub fn run(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport, RunError> {
    cfg.validate()?;
    std::fs::create_dir_all(&opts.out_dir).map_err(|source| RunError::Io {
        path: opts.out_dir.clone(),
        source,
    })?;
    let hash = cfg.digest();
    let mut summary = header(cfg, cmd, &hash);
    let mut files = Vec::new();
    let mut warnings = Vec::new();
    let mut failures = Vec::new();
    let body: Value;

    match cmd {
        Command::Simulate => {
            let r = simulate(cfg)?;
            failures.extend(fit_failures(&r.channel));
            if let Some(m) = &r.mc {
                if m.z_score.abs() > 5.0 {
                    warnings.push(format!(
                        "sampling check deviates by {:.1} standard errors",
                        m.z_score
                    ));
                }
            }
            body = json!({ "config": cfg, "result": r });
        }
        Command::Fit => {
            if cfg.channel.target_gains.is_none() && cfg.channel.target_nsf_db.is_none() {
                return Err(crate::Error::Validation(
                    "fit needs channel.target_gains or channel.target_nsf_db".into(),
                )
                .into());
            }
            let resolved = resolve_channel(cfg)?;
            failures.extend(fit_failures(&resolved));
            let (state, p, c) = output_state(cfg, &resolved.spec)?;
            let nsf = state.intensity_difference_nsf(p, c)?;
            body = json!({
                "config": cfg,
                "channel": resolved,
                "gains": resolved.spec.gains()?,
                "source_nsf_linear": nsf,
                "source_nsf_db": crate::detection::to_decibel(nsf)?,
            });
        }
        Command::OptimizeAttenuation => {
            let resolved = resolve_channel(cfg)?;
            failures.extend(fit_failures(&resolved));
            let report = attenuation_report(cfg, &resolved.spec)?;
            if report.optimum.dense_fallback {
                warnings.push(
                    "noise factor not unimodal on the coarse scan; used the dense grid".into(),
                );
            }
            body = json!({ "config": cfg, "channel": resolved, "attenuation": report });
        }
        Command::SweepDetuning => {
            let rows = sweep_detuning(cfg, opts.threads)?;
            let values: Vec<Vec<f64>> = rows.iter().map(SweepRow::values).collect();
            let path = opts.out_dir.join("sweep.csv");
            write(
                &path,
                csv_document(&hash, &SWEEP_COLUMNS, &values).as_bytes(),
            )?;
            files.push(path);
            let unreachable: Vec<f64> = rows
                .iter()
                .filter(|r| !r.reachable)
                .map(|r| r.delta_mhz)
                .collect();
            if !unreachable.is_empty() {
                failures.push(format!(
                    "{} sweep point(s) not reachable by the fitted family: {:?}",
                    unreachable.len(),
                    unreachable
                ));
            }
            let extrapolated = rows.iter().filter(|r| r.extrapolated).count();
            if extrapolated > 0 {
                warnings.push(format!(
                    "{extrapolated} sweep point(s) outside the calibrated gain-curve range"
                ));
            }
            let window = crate::channel::nonamplifying_window(&cfg.gain_curve);
            let mut b =
                json!({ "config": cfg, "points": rows.len(), "nonamplifying_window": window });
            if opts.format == Format::Json {
                b["rows"] = to_value(&rows);
            }
            body = b;
        }
        Command::RenderBeams => {
            let renders = render_beams(cfg)?;
            let mut comments = provenance_lines(&hash);
            comments.push(format!("scenario={}", cfg.scenario));
            let mut beams = Vec::new();
            for (info, images) in renders {
                for (name, image) in images {
                    let mut c = comments.clone();
                    c.push(format!("image={name} charge={}", info.charge));
                    let path = opts.out_dir.join(format!("{name}.pgm"));
                    write(&path, &encode_pgm(&image, cfg.image.bit_depth, &c)?)?;
                    files.push(path);
                }
                if info.measured_charge != info.charge || info.fork_order != info.charge {
                    failures.push(format!(
                        "{}: expected charge {}, field winding {}, fork order {}",
                        info.name, info.charge, info.measured_charge, info.fork_order
                    ));
                }
                warnings.extend(info.warnings.iter().map(|w| format!("{}: {w}", info.name)));
                beams.push(info);
            }
            let conserved =
                check_oam_conservation(cfg.image.l_pump, beams[1].charge, beams[2].charge);
            body = json!({ "config": cfg, "beams": beams, "oam_conserved": conserved });
        }
        Command::Presets => {
            for (name, src) in PRESETS {
                let path = opts.out_dir.join(format!("{name}.toml"));
                write(&path, src.as_bytes())?;
                files.push(path);
            }
            body = json!({ "presets": PRESETS.iter().map(|(n, _)| *n).collect::<Vec<_>>() });
        }
    }

    if let (Value::Object(s), Value::Object(b)) = (&mut summary, body) {
        s.extend(b);
    }
    summary["warnings"] = to_value(&warnings);
    summary["failures"] = to_value(&failures);
    summary["files"] = to_value(
        &files
            .iter()
            .map(|p| {
                p.file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .to_string()
            })
            .collect::<Vec<_>>(),
    );
    let stem = cmd.name();
    let path = match opts.format {
        Format::Json => {
            let path = opts.out_dir.join(format!("{stem}.json"));
            let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            text.push('\n');
            write(&path, text.as_bytes())?;
            path
        }
        Format::Csv => {
            let path = opts.out_dir.join(format!("{stem}.csv"));
            write(&path, summary_csv(&hash, &summary).as_bytes())?;
            path
        }
    };
    files.push(path);
    Ok(RunReport {
        summary,
        files,
        warnings,
        failures,
    })
}

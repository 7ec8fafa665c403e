//! Experiment configuration: a TOML file of `key = value` lines under `[section]`
//! headers. Unknown keys are rejected and every numeric field is range checked.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::align::{AlignmentMap, CommunicationKernel};
use crate::error::{Error, Result};
use crate::initial::{BumpShape, GridSpec, SmoothPreset, VDomain};
use crate::kinetic::{Scheme, SUPPORT_CUTOFF, VACUUM_THRESHOLD};
use crate::metrics::DEFAULT_MAX_ATOMS;
use crate::particle::{Domain, ParticleInit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Particle,
    Kinetic,
    Hydro,
    LimitSweep,
    Isothermal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HydroSolverKind {
    Lagrangian,
    Eulerian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMode {
    /// Quadrature next to the closed form; needs p = 2k.
    ClosedForm,
    Quadrature,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    kernel: RawKernel,
    #[serde(default)]
    map: RawMap,
    #[serde(default)]
    domain: RawDomain,
    #[serde(default)]
    discretization: RawDisc,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    isothermal: RawIso,
    #[serde(default)]
    tolerances: RawTol,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    family: Option<String>,
    alpha: Option<f64>,
    value: Option<f64>,
    radii: Option<Vec<f64>>,
    values: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    p: Option<f64>,
    h_coeffs: Option<Vec<f64>>,
    h_exponents: Option<Vec<f64>>,
    q: Option<f64>,
    holder_coeff: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    length: Option<f64>,
    dim: Option<usize>,
    periodic: Option<bool>,
    v_domain: Option<String>,
    v_min: Option<f64>,
    v_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDisc {
    nx: Option<usize>,
    nv: Option<usize>,
    pad_cells: Option<usize>,
    dt: Option<f64>,
    n_particles: Option<usize>,
    markers: Option<usize>,
    scheme: Option<String>,
    hydro_solver: Option<HydroSolverKind>,
    hydro_scheme: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    t_final: Option<f64>,
    output_interval: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    preset: Option<String>,
    rho_amplitude: Option<f64>,
    u_amplitude: Option<f64>,
    u_mean: Option<f64>,
    bump: Option<String>,
    epsilon: Option<f64>,
    jitter: Option<f64>,
    velocity_mean: Option<f64>,
    velocity_spread: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    epsilon_list: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIso {
    z_min: Option<f64>,
    z_max: Option<f64>,
    n_points: Option<usize>,
    quad_order: Option<usize>,
    mode: Option<PsiMode>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTol {
    vacuum_threshold: Option<f64>,
    support_cutoff: Option<f64>,
    cfl: Option<f64>,
    regime_m: Option<f64>,
    max_atoms: Option<usize>,
}

/// Parameters of the map spec as written, kept so runs can be reported.
#[derive(Clone, Debug, PartialEq)]
pub enum MapSpec {
    Power { p: f64 },
    /// h(r) = Σ c_k r^{e_k} with declared Hölder order q and constant C.
    General { coeffs: Vec<f64>, exponents: Vec<f64>, q: f64, holder_coeff: f64 },
}

impl MapSpec {
    pub fn build(&self) -> Result<AlignmentMap> {
        match self {
            MapSpec::Power { p } => AlignmentMap::p_power(*p),
            MapSpec::General { coeffs, exponents, q, holder_coeff } => {
                let terms: Vec<(f64, f64)> = coeffs.iter().copied().zip(exponents.iter().copied()).collect();
                let label = terms.iter().map(|(c, e)| format!("{c}r^{e}")).collect::<Vec<_>>().join(" + ");
                let c = *holder_coeff;
                AlignmentMap::general(
                    label,
                    move |r| terms.iter().map(|(c, e)| if *e == 0.0 { *c } else { c * r.powf(*e) }).sum(),
                    *q,
                    move |_| c,
                )
            }
        }
    }

    /// q used to annotate rates; min{p-2, 1} with q = 1 at p = 2.
    pub fn q(&self) -> f64 {
        match self {
            MapSpec::Power { p } if *p == 2.0 => 1.0,
            MapSpec::Power { p } => (p - 2.0).min(1.0),
            MapSpec::General { q, .. } => *q,
        }
    }
}

#[derive(Clone, Debug)]
pub struct IsothermalSpec {
    pub z_min: f64,
    pub z_max: f64,
    pub n_points: usize,
    pub quad_order: usize,
    pub mode: PsiMode,
}

#[derive(Clone, Debug)]
pub struct Tolerances {
    pub vacuum_threshold: f64,
    pub support_cutoff: f64,
    pub cfl: f64,
    pub regime_m: f64,
    pub max_atoms: usize,
}

/// Fully validated configuration with defaults applied.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub kernel: CommunicationKernel,
    pub map: MapSpec,
    pub length: f64,
    pub dim: usize,
    pub periodic: bool,
    pub grid: GridSpec,
    pub kinetic_scheme: Scheme,
    pub dt: f64,
    pub n_particles: usize,
    pub markers: usize,
    pub hydro_solver: HydroSolverKind,
    pub hydro_scheme: Scheme,
    pub t_final: f64,
    pub output_interval: f64,
    pub preset: SmoothPreset,
    pub bump: BumpShape,
    pub epsilon: f64,
    pub particle_init: ParticleInit,
    pub epsilon_list: Vec<f64>,
    pub isothermal: IsothermalSpec,
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    pub fn alignment_map(&self) -> Result<AlignmentMap> {
        self.map.build()
    }

    pub fn particle_domain(&self) -> Domain {
        if self.periodic {
            Domain::Torus { period: self.length }
        } else {
            Domain::Free
        }
    }
}

pub const DEFAULT_T_FINAL: f64 = 1.0;
/// Sweep horizon: the default preset leaves the strong-solution regime near t = 0.75.
pub const DEFAULT_SWEEP_T_FINAL: f64 = 0.5;
pub const DEFAULT_REGIME_M: f64 = 20.0;
pub const DEFAULT_EPSILON_LIST: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        msg: e.message().to_string(),
    })?;
    validate(raw)
}

fn bad<T>(key: &str, msg: impl Into<String>) -> Result<T> {
    Err(Error::ConfigValue { key: key.into(), msg: msg.into() })
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        bad(key, format!("must be finite and > 0, got {v}"))
    }
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        bad(key, format!("must be finite, got {v}"))
    }
}

fn parse_scheme(key: &str, s: Option<&str>, default: Scheme) -> Result<Scheme> {
    match s {
        None => Ok(default),
        Some("upwind") => Ok(Scheme::Upwind),
        Some("muscl") => Ok(Scheme::Muscl),
        Some(other) => bad(key, format!("expected `upwind` or `muscl`, got `{other}`")),
    }
}

fn kernel(raw: &RawKernel) -> Result<CommunicationKernel> {
    let family = raw.family.as_deref().unwrap_or("inverse_power");
    let k = match family {
        "inverse_power" => {
            let a = raw.alpha.unwrap_or(1.0);
            if !(a >= 0.0 && a.is_finite()) {
                return bad("kernel.alpha", format!("must be finite and >= 0, got {a}"));
            }
            CommunicationKernel::inverse_power(a)
        }
        "constant" => {
            let v = raw.value.unwrap_or(1.0);
            if !(v >= 0.0 && v.is_finite()) {
                return bad("kernel.value", format!("must be finite and >= 0, got {v}"));
            }
            CommunicationKernel::constant(v)
        }
        "table" => {
            let (Some(r), Some(v)) = (&raw.radii, &raw.values) else {
                return bad("kernel.radii", "table kernel needs `radii` and `values`");
            };
            CommunicationKernel::table(r.clone(), v.clone())
        }
        other => return bad("kernel.family", format!("expected inverse_power, constant or table, got `{other}`")),
    };
    k.map_err(|e| Error::ConfigValue { key: "kernel".into(), msg: e.to_string() })
}

fn map_spec(raw: &RawMap) -> Result<MapSpec> {
    let general = raw.h_coeffs.is_some() || raw.h_exponents.is_some();
    if general {
        if raw.p.is_some() {
            return bad("map.p", "give either `p` or `h_coeffs`/`h_exponents`, not both");
        }
        let (Some(c), Some(e)) = (&raw.h_coeffs, &raw.h_exponents) else {
            return bad("map.h_coeffs", "`h_coeffs` and `h_exponents` go together");
        };
        if c.is_empty() || c.len() != e.len() {
            return bad("map.h_coeffs", "needs as many coefficients as exponents, at least one");
        }
        if c.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return bad("map.h_coeffs", "coefficients must be finite and >= 0");
        }
        if e.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return bad("map.h_exponents", "exponents must be finite and >= 0");
        }
        let Some(q) = raw.q else {
            return bad("map.q", "required for a general map");
        };
        if !(q > 0.0 && q <= 1.0) {
            return bad("map.q", format!("constraint 0 < q <= 1, got {q}"));
        }
        let Some(h) = raw.holder_coeff else {
            return bad("map.holder_coeff", "required for a general map");
        };
        if !(h >= 0.0 && h.is_finite()) {
            return bad("map.holder_coeff", format!("must be finite and >= 0, got {h}"));
        }
        return Ok(MapSpec::General { coeffs: c.clone(), exponents: e.clone(), q, holder_coeff: h });
    }
    if raw.q.is_some() || raw.holder_coeff.is_some() {
        return bad("map.q", "`q` and `holder_coeff` only apply to a general map");
    }
    let p = raw.p.unwrap_or(2.5);
    if !(p >= 2.0 && p.is_finite()) {
        return bad("map.p", format!("constraint p >= 2, got {p}"));
    }
    Ok(MapSpec::Power { p })
}

fn validate(raw: RawConfig) -> Result<ExperimentConfig> {
    let experiment = raw.experiment;
    let kernel = kernel(&raw.kernel)?;
    let map = map_spec(&raw.map)?;

    let d = &raw.domain;
    let length = positive("domain.length", d.length.unwrap_or(1.0))?;
    let dim = d.dim.unwrap_or(1);
    if !(dim == 1 || dim == 2) {
        return bad("domain.dim", format!("must be 1 or 2, got {dim}"));
    }
    if dim == 2 && experiment != Experiment::Particle {
        return bad("domain.dim", "only particle runs support dim = 2");
    }
    let vdomain = match d.v_domain.as_deref() {
        None | Some("hull") => VDomain::Hull,
        Some("spread") => VDomain::Spread,
        Some(o) => return bad("domain.v_domain", format!("expected `hull` or `spread`, got `{o}`")),
    };
    let vdomain = match (d.v_min, d.v_max) {
        (None, None) => vdomain,
        (Some(a), Some(b)) => {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return bad("domain.v_min", format!("need finite v_min < v_max, got [{a}, {b}]"));
            }
            VDomain::Window { v_min: a, v_max: b }
        }
        _ => return bad("domain.v_min", "`v_min` and `v_max` go together"),
    };

    let s = &raw.discretization;
    let nx = s.nx.unwrap_or(64);
    let nv = s.nv.unwrap_or(128);
    let pad_cells = s.pad_cells.unwrap_or(4);
    if nx < 4 {
        return bad("discretization.nx", format!("must be >= 4, got {nx}"));
    }
    if nv < 2 * pad_cells + 4 {
        return bad("discretization.nv", format!("must be >= 2·pad_cells + 4 = {}, got {nv}", 2 * pad_cells + 4));
    }
    let default_dt = if experiment == Experiment::Particle { 0.01 } else { 1e-3 };
    let dt = positive("discretization.dt", s.dt.unwrap_or(default_dt))?;
    let n_particles = s.n_particles.unwrap_or(64);
    if n_particles < 2 {
        return bad("discretization.n_particles", format!("must be >= 2, got {n_particles}"));
    }
    let markers = s.markers.unwrap_or(512);
    if markers < 4 {
        return bad("discretization.markers", format!("must be >= 4, got {markers}"));
    }
    let kinetic_scheme = parse_scheme("discretization.scheme", s.scheme.as_deref(), Scheme::Upwind)?;
    let hydro_scheme = parse_scheme("discretization.hydro_scheme", s.hydro_scheme.as_deref(), Scheme::Muscl)?;
    let hydro_solver = s.hydro_solver.unwrap_or(HydroSolverKind::Lagrangian);

    let default_t = if experiment == Experiment::LimitSweep { DEFAULT_SWEEP_T_FINAL } else { DEFAULT_T_FINAL };
    let t_final = positive("time.t_final", raw.time.t_final.unwrap_or(default_t))?;
    let output_interval = positive("time.output_interval", raw.time.output_interval.unwrap_or(t_final / 10.0))?;
    if output_interval > t_final {
        return bad("time.output_interval", format!("must not exceed t_final = {t_final}"));
    }

    let i = &raw.initial;
    match i.preset.as_deref() {
        None | Some("smooth") => {}
        Some(o) => return bad("initial.preset", format!("only `smooth` is available, got `{o}`")),
    }
    let def = SmoothPreset::default();
    let preset = SmoothPreset {
        rho_amplitude: finite("initial.rho_amplitude", i.rho_amplitude.unwrap_or(def.rho_amplitude))?,
        u_amplitude: finite("initial.u_amplitude", i.u_amplitude.unwrap_or(def.u_amplitude))?,
        u_mean: finite("initial.u_mean", i.u_mean.unwrap_or(def.u_mean))?,
        length,
    };
    preset.validate()?;
    let bump = match i.bump.as_deref() {
        None | Some("forward") => BumpShape::Forward,
        Some("centred") | Some("centered") => BumpShape::Centred,
        Some(o) => return bad("initial.bump", format!("expected `forward` or `centred`, got `{o}`")),
    };
    let epsilon = positive("initial.epsilon", i.epsilon.unwrap_or(0.1))?;
    let jitter = i.jitter.unwrap_or(0.5);
    if !(0.0..1.0).contains(&jitter) {
        return bad("initial.jitter", format!("must lie in [0, 1), got {jitter}"));
    }
    let spread = i.velocity_spread.unwrap_or(1.0);
    if !(spread >= 0.0 && spread.is_finite()) {
        return bad("initial.velocity_spread", format!("must be finite and >= 0, got {spread}"));
    }
    let particle_init = ParticleInit {
        length,
        jitter,
        velocity_mean: finite("initial.velocity_mean", i.velocity_mean.unwrap_or(0.0))?,
        velocity_spread: spread,
    };

    let epsilon_list = raw.sweep.epsilon_list.clone().unwrap_or_else(|| DEFAULT_EPSILON_LIST.to_vec());
    if epsilon_list.is_empty() {
        return bad("sweep.epsilon_list", "must not be empty");
    }
    if epsilon_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return bad("sweep.epsilon_list", "entries must be finite and > 0");
    }
    if experiment == Experiment::LimitSweep && epsilon_list.windows(2).any(|w| w[1] >= w[0]) {
        return bad("sweep.epsilon_list", format!("must be strictly decreasing, got {epsilon_list:?}"));
    }

    let r = &raw.isothermal;
    let isothermal = IsothermalSpec {
        z_min: finite("isothermal.z_min", r.z_min.unwrap_or(-3.0))?,
        z_max: finite("isothermal.z_max", r.z_max.unwrap_or(3.0))?,
        n_points: r.n_points.unwrap_or(61),
        quad_order: r.quad_order.unwrap_or(64),
        mode: r.mode.unwrap_or(PsiMode::ClosedForm),
    };
    if isothermal.z_min > isothermal.z_max {
        return bad("isothermal.z_min", "must not exceed z_max");
    }
    if isothermal.n_points < 2 {
        return bad("isothermal.n_points", "must be >= 2");
    }
    if isothermal.quad_order < 8 {
        return bad("isothermal.quad_order", format!("must be >= 8, got {}", isothermal.quad_order));
    }

    let t = &raw.tolerances;
    let tolerances = Tolerances {
        vacuum_threshold: positive("tolerances.vacuum_threshold", t.vacuum_threshold.unwrap_or(VACUUM_THRESHOLD))?,
        support_cutoff: positive("tolerances.support_cutoff", t.support_cutoff.unwrap_or(SUPPORT_CUTOFF))?,
        cfl: t.cfl.unwrap_or(0.9),
        regime_m: positive("tolerances.regime_m", t.regime_m.unwrap_or(DEFAULT_REGIME_M))?,
        max_atoms: t.max_atoms.unwrap_or(DEFAULT_MAX_ATOMS),
    };
    if !(tolerances.cfl > 0.0 && tolerances.cfl <= 0.9) {
        return bad("tolerances.cfl", format!("constraint 0 < cfl <= 0.9, got {}", tolerances.cfl));
    }
    if tolerances.max_atoms < 4 {
        return bad("tolerances.max_atoms", "must be >= 4");
    }

    Ok(ExperimentConfig {
        experiment,
        seed: raw.seed.unwrap_or(1),
        output_dir: raw.output_dir,
        kernel,
        map,
        length,
        dim,
        periodic: d.periodic.unwrap_or(true),
        grid: GridSpec { nx, nv, vdomain, pad_cells },
        kinetic_scheme,
        dt,
        n_particles,
        markers,
        hydro_solver,
        hydro_scheme,
        t_final,
        output_interval,
        preset,
        bump,
        epsilon,
        particle_init,
        epsilon_list,
        isothermal,
        tolerances,
    })
}

use crate::align::{AlignmentMap, CommunicationKernel};
use crate::error::{Error, Result};
use crate::kinetic::Scheme;
use crate::series::DiagnosticSeries;

use super::{eulerian_step, lagrangian_step, lipschitz_monitor, HydroState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HydroSolver {
    Lagrangian,
    Eulerian,
}

#[derive(Clone, Debug)]
pub struct HydroConfig {
    pub kernel: CommunicationKernel,
    pub map: AlignmentMap,
    /// Reconstruction for the Eulerian solver; ignored by markers.
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    pub output_interval: f64,
    /// Bound M on ‖∂_x u‖_∞ past which the run stops.
    pub regime_m: f64,
    pub keep_snapshots: bool,
}

impl HydroConfig {
    pub fn new(kernel: CommunicationKernel, map: AlignmentMap, dt: f64, t_final: f64, output_interval: f64) -> Self {
        Self {
            kernel,
            map,
            scheme: Scheme::Muscl,
            dt,
            t_final,
            output_interval,
            regime_m: 20.0,
            keep_snapshots: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegimeCause {
    /// ‖∂_x u‖_∞ exceeded M.
    Lipschitz,
    /// Two markers met.
    Crossing,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeExit {
    pub time: f64,
    pub lip: f64,
    pub cause: RegimeCause,
}

#[derive(Clone, Debug)]
pub struct HydroRun {
    pub series: DiagnosticSeries,
    pub snapshots: Vec<HydroState>,
    pub final_state: HydroState,
    pub regime_exit: Option<RegimeExit>,
}

pub fn hydro_columns() -> Vec<&'static str> {
    vec!["t", "mass", "momentum", "energy", "lip_u", "V", "u_min", "u_max", "regime_exit"]
}

fn row(s: &HydroState, exited: bool) -> Vec<f64> {
    let (lo, hi) = s.velocity_range();
    vec![
        s.time(),
        s.total_mass(),
        s.total_momentum(),
        s.energy(),
        lipschitz_monitor(s),
        hi - lo,
        lo,
        hi,
        if exited { 1.0 } else { 0.0 },
    ]
}

fn step(cfg: &HydroConfig, s: &HydroState, dt: f64) -> Result<HydroState> {
    Ok(match s {
        HydroState::Lagrangian(m) => HydroState::Lagrangian(lagrangian_step(m, &cfg.kernel, &cfg.map, dt)?),
        HydroState::Eulerian(g) => HydroState::Eulerian(eulerian_step(g, &cfg.kernel, &cfg.map, dt, cfg.scheme)?),
    })
}

/// Advance with fixed steps of at most `dt`, shortened to land on every output
/// time. Leaving the strong-solution regime (Lipschitz bound or marker crossing)
/// ends the run early with a report; other faults are errors.
pub fn run_hydro(cfg: &HydroConfig, initial: &HydroState) -> Result<HydroRun> {
    let bad = |key: &str, msg: String| Err(Error::ConfigValue { key: key.into(), msg });
    if !(cfg.dt > 0.0) {
        return bad("discretization.dt", format!("must be > 0, got {}", cfg.dt));
    }
    if !(cfg.t_final >= 0.0 && cfg.t_final.is_finite()) {
        return bad("time.t_final", format!("must be >= 0, got {}", cfg.t_final));
    }
    if !(cfg.output_interval > 0.0) {
        return bad("time.output_interval", format!("must be > 0, got {}", cfg.output_interval));
    }
    if !(cfg.regime_m > 0.0) {
        return bad("tolerances.regime_m", format!("must be > 0, got {}", cfg.regime_m));
    }
    let mut series = DiagnosticSeries::new(&hydro_columns());
    let mut snapshots = Vec::new();
    let mut s = initial.clone();
    let t0 = s.time();
    let t_end = t0 + cfg.t_final;
    let mut regime_exit = None;
    series.push(row(&s, false))?;
    if cfg.keep_snapshots {
        snapshots.push(s.clone());
    }
    let mut k = 1usize;
    'outer: while s.time() < t_end {
        let t_out = (t0 + k as f64 * cfg.output_interval).min(t_end);
        while s.time() < t_out {
            let remaining = t_out - s.time();
            // absorb a sliver shorter than a rounding error into this step
            let dt = if remaining < cfg.dt * (1.0 + 1e-9) { remaining } else { cfg.dt };
            match step(cfg, &s, dt) {
                Ok(mut next) => {
                    if dt == remaining {
                        match &mut next {
                            HydroState::Lagrangian(m) => m.time = t_out,
                            HydroState::Eulerian(g) => g.time = t_out,
                        }
                    }
                    s = next;
                }
                Err(Error::Crossing { time, .. }) => {
                    regime_exit = Some(RegimeExit { time, lip: f64::INFINITY, cause: RegimeCause::Crossing });
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
            let lip = lipschitz_monitor(&s);
            if lip > cfg.regime_m {
                regime_exit = Some(RegimeExit { time: s.time(), lip, cause: RegimeCause::Lipschitz });
                break 'outer;
            }
        }
        series.push(row(&s, false))?;
        if cfg.keep_snapshots {
            snapshots.push(s.clone());
        }
        k += 1;
    }
    if regime_exit.is_some() && s.time() > series.last("t").unwrap_or(f64::NEG_INFINITY) {
        series.push(row(&s, true))?;
        if cfg.keep_snapshots {
            snapshots.push(s.clone());
        }
    }
    Ok(HydroRun { series, snapshots, final_state: s, regime_exit })
}

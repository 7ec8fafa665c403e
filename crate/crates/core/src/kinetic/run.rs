use crate::align::{AlignmentMap, CommunicationKernel};
use crate::error::{Error, Result};
use crate::series::DiagnosticSeries;

use super::diagnostics::{discrepancies_with, energies_with};
use super::step::{kinetic_step_budget, max_speed, CFL_LIMIT};
use super::{
    alignment_field_with, discrepancy_bound, moments, support_diameters, GridTables, PhaseDensity,
    Scheme, SUPPORT_CUTOFF, VACUUM_THRESHOLD,
};

#[derive(Clone, Debug)]
pub struct KineticConfig {
    pub kernel: CommunicationKernel,
    pub map: AlignmentMap,
    pub scheme: Scheme,
    pub t_final: f64,
    pub output_interval: f64,
    /// Safety factor applied to both CFL constraints, at most 0.9.
    pub cfl: f64,
    pub vacuum_threshold: f64,
    pub support_cutoff: f64,
    /// Keep a copy of f at every output time.
    pub keep_snapshots: bool,
}

impl KineticConfig {
    pub fn new(kernel: CommunicationKernel, map: AlignmentMap, t_final: f64, output_interval: f64) -> Self {
        Self {
            kernel,
            map,
            scheme: Scheme::Upwind,
            t_final,
            output_interval,
            cfl: CFL_LIMIT,
            vacuum_threshold: VACUUM_THRESHOLD,
            support_cutoff: SUPPORT_CUTOFF,
            keep_snapshots: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KineticRun {
    pub series: DiagnosticSeries,
    pub snapshots: Vec<PhaseDensity>,
    pub final_state: PhaseDensity,
    pub steps: usize,
}

pub fn kinetic_columns() -> Vec<&'static str> {
    vec![
        "t",
        "E_kin",
        "D1",
        "D2",
        "E_mac",
        "D_mac",
        "Delta",
        "G_norm",
        "G_pairing",
        "disc_bound",
        "R_trace",
        "S",
        "V",
        "mass",
        "momentum",
        "min_f",
        "int_D1",
        "int_D2",
        "int_D2_over_eps",
        "energy_residual",
    ]
}

#[derive(Default)]
struct Budget {
    d1: f64,
    d2: f64,
    d2_over_eps: f64,
}

fn record(
    f: &PhaseDensity,
    cfg: &KineticConfig,
    tables: &GridTables,
    e0: f64,
    acc: &Budget,
    series: &mut DiagnosticSeries,
) -> Result<()> {
    let e = energies_with(f, &cfg.map, tables, cfg.vacuum_threshold);
    let d = discrepancies_with(f, &cfg.map, tables, cfg.vacuum_threshold);
    let mom = moments(f, cfg.vacuum_threshold);
    let (s, v) = support_diameters(f, cfg.support_cutoff);
    let bound = discrepancy_bound(f, &cfg.kernel, &cfg.map, e.d2);
    series.push(vec![
        f.time,
        e.e_kin,
        e.d1,
        e.d2,
        e.e_mac,
        e.d_mac,
        d.delta,
        d.g_norm,
        d.pairing(&mom.u),
        bound,
        d.r_trace,
        s,
        v,
        f.mass(),
        f.momentum(),
        f.min_value(),
        acc.d1,
        acc.d2,
        acc.d2_over_eps,
        e.e_kin - e0 + acc.d1 + acc.d2_over_eps,
    ])
}

fn validate(f: &PhaseDensity, cfg: &KineticConfig) -> Result<()> {
    let bad = |key: &str, msg: String| Err(Error::ConfigValue { key: key.into(), msg });
    if !(cfg.t_final >= 0.0 && cfg.t_final.is_finite()) {
        return bad("time.t_final", format!("must be >= 0, got {}", cfg.t_final));
    }
    if !(cfg.output_interval > 0.0) {
        return bad("time.output_interval", format!("must be > 0, got {}", cfg.output_interval));
    }
    if !(cfg.cfl > 0.0 && cfg.cfl <= CFL_LIMIT) {
        return bad("discretization.cfl", format!("must be in (0, {CFL_LIMIT}], got {}", cfg.cfl));
    }
    if f.min_value() < 0.0 {
        return Err(Error::Domain("initial density has negative cells".into()));
    }
    Ok(())
}

/// Advance `f0` to `t_final`, recording diagnostics at multiples of
/// `output_interval` and at the final time. The step is the largest one allowed by
/// `cfl` for both transports, using the force bound of the previous step; a step
/// rejected by the CFL check is retried with half the size.
pub fn run_kinetic(cfg: &KineticConfig, f0: &PhaseDensity) -> Result<KineticRun> {
    validate(f0, cfg)?;
    let tables = GridTables::new(f0, &cfg.kernel, &cfg.map);
    let mut series = DiagnosticSeries::new(&kinetic_columns());
    let mut snapshots = Vec::new();
    let mut f = f0.clone();
    let e0 = energies_with(&f, &cfg.map, &tables, cfg.vacuum_threshold).e_kin;
    let mut acc = Budget::default();
    record(&f, cfg, &tables, e0, &acc, &mut series)?;
    if cfg.keep_snapshots {
        snapshots.push(f.clone());
    }

    let vmax = max_speed(&f);
    let dt_x = if vmax > 0.0 { cfg.cfl * f.dx() / vmax } else { f64::INFINITY };
    let mut force_bound = alignment_field_with(&f, &tables)
        .iter()
        .fold(0.0f64, |a, b| a.max(b.abs()));
    let mut steps = 0usize;
    let mut k = 1usize;
    let t0 = f.time;
    loop {
        let t_out = (t0 + k as f64 * cfg.output_interval).min(t0 + cfg.t_final);
        while f.time < t_out {
            let dt_v = if force_bound > 0.0 { cfg.cfl * f.dv() / (1.1 * force_bound) } else { f64::INFINITY };
            let mut dt = dt_x.min(dt_v).min(t_out - f.time);
            if !dt.is_finite() {
                dt = t_out - f.time;
            }
            let (mut g, budget) = loop {
                match kinetic_step_budget(&f, &tables, dt, cfg.scheme) {
                    Ok(r) => break r,
                    Err(Error::Cfl { .. }) if dt > 1e-14 => dt *= 0.5,
                    Err(Error::Fault { msg, .. }) => return Err(Error::Fault { time: f.time, msg }),
                    Err(e) => return Err(e),
                }
            };
            // land exactly on the output time
            if (t_out - g.time).abs() < 1e-12 * t_out.abs().max(1.0) {
                g.time = t_out;
            }
            acc.d1 += budget.d1_dt;
            acc.d2 += budget.d2_int;
            acc.d2_over_eps += budget.d2_over_eps_int;
            force_bound = budget.max_force;
            f = g;
            steps += 1;
            if !f.values.iter().all(|v| v.is_finite()) {
                return Err(Error::BlowUp { step: steps });
            }
        }
        if f.time > series.last("t").unwrap_or(f64::NEG_INFINITY) {
            record(&f, cfg, &tables, e0, &acc, &mut series)?;
            if cfg.keep_snapshots {
                snapshots.push(f.clone());
            }
        }
        if t_out >= t0 + cfg.t_final {
            break;
        }
        k += 1;
    }
    Ok(KineticRun { series, snapshots, final_state: f, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(nx: usize, nv: usize, eps: f64) -> PhaseDensity {
        let mut f = PhaseDensity::zeros(nx, nv, 1.0, -0.5, 0.5, eps).unwrap();
        for i in 0..nx {
            let u = 0.2 * (2.0 * std::f64::consts::PI * f.x(i)).sin();
            for j in 0..nv {
                let z = (f.v(j) - u) / 0.08;
                f.values[i * nv + j] = (1.0 - z * z).max(0.0);
            }
        }
        let m = f.mass();
        f.values.iter_mut().for_each(|v| *v /= m);
        f
    }

    #[test]
    fn hits_output_times() {
        let k = CommunicationKernel::inverse_power(1.0).unwrap();
        let map = AlignmentMap::p_power(2.5).unwrap();
        let cfg = KineticConfig::new(k, map, 0.3, 0.1);
        let run = run_kinetic(&cfg, &bump(32, 64, 0.1)).unwrap();
        let t = run.series.column("t").unwrap();
        assert_eq!(t.len(), 4);
        for (a, b) in t.iter().zip([0.0, 0.1, 0.2, 0.3]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_residual_small() {
        let k = CommunicationKernel::inverse_power(1.0).unwrap();
        let map = AlignmentMap::p_power(2.5).unwrap();
        let cfg = KineticConfig::new(k, map, 0.2, 0.1);
        let run = run_kinetic(&cfg, &bump(32, 64, 0.1)).unwrap();
        let r = run.series.last("energy_residual").unwrap();
        let e0 = run.series.rows()[0][1];
        assert!(r.abs() < 0.05 * e0, "{r}");
    }
}

//! Experiment drivers: single runs, the ε-sweep toward the hydrodynamic limit and
//! the isothermal Ψ table. Each driver has a pure part returning results and a
//! `cmd_*` wrapper writing CSV artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::align::{psi_closed_form, psi_with, AlignmentMap, GaussHermite};
use crate::config::{Experiment, ExperimentConfig, HydroSolverKind, PsiMode};
use crate::error::{Error, Result};
use crate::hydro::{run_hydro, HydroConfig, HydroRun, HydroState};
use crate::initial::prepare_initial;
use crate::kinetic::{moments, run_kinetic, KineticConfig, KineticRun};
use crate::metrics::{
    auto_coarsen, density_gap_bound, fit_rate, kinetic_relative_entropy, phase_w1, phase_w1_upper,
    relative_entropy, w1_circle_cells, RateFit,
};
use crate::particle::{run_particle, ParticleConfig, ParticleRun};
use crate::series::{DiagnosticSeries, Table};

/// Result of a command: a one-line summary, the files written and any failed
/// invariant checks.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    pub violations: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Options {
    pub check_invariants: bool,
}

fn save(table: &Table, dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    table.save(&path)?;
    files.push(path);
    Ok(())
}

fn kinetic_config(cfg: &ExperimentConfig, map: &AlignmentMap, keep: bool) -> KineticConfig {
    let mut k = KineticConfig::new(cfg.kernel.clone(), map.clone(), cfg.t_final, cfg.output_interval);
    k.scheme = cfg.kinetic_scheme;
    k.cfl = cfg.tolerances.cfl;
    k.vacuum_threshold = cfg.tolerances.vacuum_threshold;
    k.support_cutoff = cfg.tolerances.support_cutoff;
    k.keep_snapshots = keep;
    k
}

fn hydro_config(cfg: &ExperimentConfig, map: &AlignmentMap, keep: bool) -> HydroConfig {
    let mut h = HydroConfig::new(cfg.kernel.clone(), map.clone(), cfg.dt, cfg.t_final, cfg.output_interval);
    h.scheme = cfg.hydro_scheme;
    h.regime_m = cfg.tolerances.regime_m;
    h.keep_snapshots = keep;
    h
}

/// Hydro initial state of the preset at the configured resolution.
pub fn hydro_initial(cfg: &ExperimentConfig) -> Result<HydroState> {
    match cfg.hydro_solver {
        HydroSolverKind::Lagrangian => cfg.preset.markers(cfg.markers),
        HydroSolverKind::Eulerian => cfg.preset.euler_grid(cfg.markers),
    }
}

pub fn particle_config(cfg: &ExperimentConfig, map: &AlignmentMap) -> ParticleConfig {
    ParticleConfig {
        n: cfg.n_particles,
        dim: cfg.dim,
        domain: cfg.particle_domain(),
        dt: cfg.dt,
        t_final: cfg.t_final,
        output_interval: cfg.output_interval,
        kernel: cfg.kernel.clone(),
        map: map.clone(),
        seed: cfg.seed,
        init: cfg.particle_init.clone(),
    }
}

/// Tolerances of the invariant checks.
const MASS_TOL: f64 = 1e-10;
const MOMENTUM_TOL_PER_TIME: f64 = 1e-8;
const INEQ_SLACK: f64 = 1e-12;
const ENERGY_BALANCE_TOL: f64 = 0.05;
const RELAXATION_FACTOR: f64 = 1.1;

fn col(s: &DiagnosticSeries, name: &str) -> Vec<f64> {
    s.column(name).unwrap_or_default()
}

fn check_conservation(label: &str, s: &DiagnosticSeries, out: &mut Vec<String>) {
    let t = col(s, "t");
    let mass = col(s, "mass");
    let mom = col(s, "momentum");
    for k in 1..t.len() {
        let dm = (mass[k] - mass[0]).abs();
        if dm > MASS_TOL {
            out.push(format!("{label}: mass drift {dm:.3e} at t = {}", t[k]));
            break;
        }
    }
    for k in 1..t.len() {
        let dp = (mom[k] - mom[0]).abs();
        if dp > MOMENTUM_TOL_PER_TIME * (t[k] - t[0]) + 1e-15 {
            out.push(format!("{label}: momentum drift {dp:.3e} at t = {}", t[k]));
            break;
        }
    }
}

/// Positivity, conservation, the discrepancy bound, the moment inequalities, the
/// energy balance and, when `epsilon` is given, the relaxation bound.
pub fn check_kinetic(label: &str, run: &KineticRun, epsilon: f64, out: &mut Vec<String>) {
    let s = &run.series;
    check_conservation(label, s, out);
    let t = col(s, "t");
    let min_f = col(s, "min_f");
    let delta = col(s, "Delta");
    let bound = col(s, "disc_bound");
    let (e_kin, e_mac) = (col(s, "E_kin"), col(s, "E_mac"));
    let (d1, d_mac) = (col(s, "D1"), col(s, "D_mac"));
    for k in 0..t.len() {
        if min_f[k] < 0.0 {
            out.push(format!("{label}: negative f {:.3e} at t = {}", min_f[k], t[k]));
        }
        if delta[k].abs() > bound[k] + INEQ_SLACK {
            out.push(format!("{label}: |Delta| = {:.3e} exceeds bound {:.3e} at t = {}", delta[k].abs(), bound[k], t[k]));
        }
        if e_mac[k] > e_kin[k] + INEQ_SLACK {
            out.push(format!("{label}: E_mac > E_kin at t = {}", t[k]));
        }
        if d_mac[k] > d1[k] + delta[k].abs() + INEQ_SLACK {
            out.push(format!("{label}: D_mac > D1 + |Delta| at t = {}", t[k]));
        }
    }
    let (rel, _) = energy_balance(s);
    if rel > ENERGY_BALANCE_TOL {
        out.push(format!("{label}: energy balance residual {:.2}% of the largest term", 100.0 * rel));
    }
    let int_d2 = s.last("int_D2").unwrap_or(0.0);
    let e0 = e_kin.first().copied().unwrap_or(0.0);
    if int_d2 > RELAXATION_FACTOR * epsilon * e0 {
        out.push(format!("{label}: int D2 = {int_d2:.3e} exceeds 1.1 eps E(0) = {:.3e}", RELAXATION_FACTOR * epsilon * e0));
    }
}

/// (residual / largest term, residual) of the integrated energy balance at the
/// last record.
pub fn energy_balance(s: &DiagnosticSeries) -> (f64, f64) {
    let e = col(s, "E_kin");
    let de = e.last().copied().unwrap_or(0.0) - e.first().copied().unwrap_or(0.0);
    let i1 = s.last("int_D1").unwrap_or(0.0);
    let i2 = s.last("int_D2_over_eps").unwrap_or(0.0);
    let r = s.last("energy_residual").unwrap_or(0.0).abs();
    let big = de.abs().max(i1.abs()).max(i2.abs());
    (if big > 0.0 { r / big } else { r }, r)
}

fn check_hydro(run: &HydroRun, out: &mut Vec<String>) {
    check_conservation("hydro", &run.series, out);
    let t = col(&run.series, "t");
    let (lo, hi) = (col(&run.series, "u_min"), col(&run.series, "u_max"));
    for k in 1..t.len() {
        if lo[k] < lo[k - 1] - 1e-8 || hi[k] > hi[k - 1] + 1e-8 {
            out.push(format!("hydro: velocity range grew at t = {}", t[k]));
            break;
        }
    }
}

fn check_particle(run: &ParticleRun, dim: usize, out: &mut Vec<String>) {
    let s = &run.series;
    let t = col(s, "t");
    let v = col(s, "V");
    for k in 1..t.len() {
        if v[k] > v[k - 1] + 1e-8 {
            out.push(format!("particle: velocity diameter grew at t = {}", t[k]));
            break;
        }
    }
    let names: &[&str] = if dim == 1 { &["mean_v"] } else { &["mean_v_x", "mean_v_y"] };
    for name in names {
        let m = col(s, name);
        for k in 1..t.len() {
            if (m[k] - m[0]).abs() > MOMENTUM_TOL_PER_TIME * t[k] + 1e-15 {
                out.push(format!("particle: {name} drifted by {:.3e} at t = {}", (m[k] - m[0]).abs(), t[k]));
                break;
            }
        }
    }
}

fn particle_snapshot(run: &ParticleRun) -> Result<Table> {
    let e = &run.final_state;
    let cols: &[&str] = if e.dim == 1 { &["x", "v"] } else { &["x", "y", "v_x", "v_y"] };
    let mut s = Table::new(cols);
    for i in 0..e.len() {
        let mut row = e.positions[i * e.dim..(i + 1) * e.dim].to_vec();
        row.extend_from_slice(&e.velocities[i * e.dim..(i + 1) * e.dim]);
        s.push(row)?;
    }
    Ok(s)
}

/// `experiment` ∈ {particle, kinetic, hydro}: run, write `series.csv` and the final
/// snapshot, summarise the last record.
pub fn cmd_run(cfg: &ExperimentConfig, out_dir: &Path, opts: Options) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let map = cfg.alignment_map()?;
    let mut o = Outcome::default();
    match cfg.experiment {
        Experiment::Particle => {
            let run = run_particle(&particle_config(cfg, &map))?;
            save(run.series.as_table(), out_dir, "series.csv", &mut o.files)?;
            save(&particle_snapshot(&run)?, out_dir, "final_particles.csv", &mut o.files)?;
            o.summary = format!(
                "particle: N = {} t = {} S = {:.6e} V = {:.6e}",
                cfg.n_particles,
                run.final_state.time,
                run.series.last("S").unwrap_or(f64::NAN),
                run.series.last("V").unwrap_or(f64::NAN)
            );
            if opts.check_invariants {
                check_particle(&run, cfg.dim, &mut o.violations);
            }
        }
        Experiment::Kinetic => {
            let prep = prepare_initial(&cfg.preset, cfg.epsilon, &cfg.grid, cfg.bump)?;
            let run = run_kinetic(&kinetic_config(cfg, &map, false), &prep.f)?;
            save(run.series.as_table(), out_dir, "series.csv", &mut o.files)?;
            let path = out_dir.join("final_f.txt");
            run.final_state.save(&path)?;
            o.files.push(path);
            let (rel, res) = energy_balance(&run.series);
            o.summary = format!(
                "kinetic: eps = {} t = {} E = {:.6e} D2 = {:.6e} energy residual = {res:.3e} ({:.2}%) steps = {}",
                cfg.epsilon,
                run.final_state.time,
                run.series.last("E_kin").unwrap_or(f64::NAN),
                run.series.last("D2").unwrap_or(f64::NAN),
                100.0 * rel,
                run.steps
            );
            if opts.check_invariants {
                check_kinetic("kinetic", &run, cfg.epsilon, &mut o.violations);
            }
        }
        Experiment::Hydro => {
            let run = run_hydro(&hydro_config(cfg, &map, false), &hydro_initial(cfg)?)?;
            save(run.series.as_table(), out_dir, "series.csv", &mut o.files)?;
            let path = out_dir.join("final_hydro.txt");
            run.final_state.save(&path)?;
            o.files.push(path);
            o.summary = format!(
                "hydro: t = {} energy = {:.6e} lip_u = {:.6e}",
                run.final_state.time(),
                run.series.last("energy").unwrap_or(f64::NAN),
                run.series.last("lip_u").unwrap_or(f64::NAN)
            );
            if let Some(x) = run.regime_exit {
                let _ = write!(o.summary, " regime_exit = {:?} at t = {} (lip = {:.3e})", x.cause, x.time, x.lip);
            }
            if opts.check_invariants {
                check_hydro(&run, &mut o.violations);
            }
        }
        other => {
            return Err(Error::ConfigValue {
                key: "experiment".into(),
                msg: format!("`run` handles particle, kinetic and hydro, got {other:?}"),
            })
        }
    }
    Ok(o)
}

/// One ε of the sweep.
#[derive(Clone, Debug)]
pub struct EpsilonRun {
    pub epsilon: f64,
    /// Plan bound on W1 between the lifted datum and the monokinetic profile.
    pub w1_initial: f64,
    pub kinetic: KineticRun,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    /// Sorted by decreasing ε.
    pub runs: Vec<EpsilonRun>,
    pub hydro: HydroRun,
    /// One row per (ε, output time); see [`sweep_columns`].
    pub table: Table,
    /// Fit of η_ε(T) + W1²(ρ, ρ_ε)(T) against ε; needs three ε values.
    pub fit: Option<RateFit>,
    pub phase_fit: Option<RateFit>,
    pub q: f64,
}

pub fn sweep_columns() -> Vec<&'static str> {
    vec![
        "epsilon",
        "t",
        "eta",
        "eta_K",
        "W1_rho",
        "eta_plus_W1_rho_sq",
        "W1_phase",
        "W1_phase_err",
        "W1_phase_upper",
        "Delta",
        "G_norm",
        "density_gap_bound",
    ]
}

pub fn rates_columns() -> Vec<&'static str> {
    vec!["q", "rate_bound", "slope", "intercept", "r2", "n_eps", "W1_phase_slope"]
}

impl SweepResult {
    fn rows_for(&self, eps: f64) -> impl Iterator<Item = &Vec<f64>> {
        self.table.rows().iter().filter(move |r| r[0] == eps)
    }

    /// Value of a sweep column at the final time of ε.
    pub fn final_value(&self, eps: f64, column: &str) -> Option<f64> {
        let c = self.table.index_of(column)?;
        self.rows_for(eps).last().map(|r| r[c])
    }

    pub fn rates(&self) -> Result<Option<Table>> {
        let Some(fit) = self.fit else { return Ok(None) };
        let mut s = Table::new(&rates_columns());
        s.push(vec![
            self.q,
            self.q / (2.0 - self.q),
            fit.slope,
            fit.intercept,
            fit.r2,
            self.runs.len() as f64,
            self.phase_fit.map(|f| f.slope).unwrap_or(0.0),
        ])?;
        Ok(Some(s))
    }
}

pub fn sweep_epsilon(cfg: &ExperimentConfig, map: &AlignmentMap, epsilon: f64) -> Result<EpsilonRun> {
    let prep = prepare_initial(&cfg.preset, epsilon, &cfg.grid, cfg.bump)?;
    let kinetic = run_kinetic(&kinetic_config(cfg, map, true), &prep.f)?;
    Ok(EpsilonRun { epsilon, w1_initial: prep.w1_upper, kinetic })
}

/// Hydro reference of the sweep; leaving the strong-solution regime before T is a
/// fault because the limit comparison is then meaningless.
pub fn sweep_hydro(cfg: &ExperimentConfig, map: &AlignmentMap) -> Result<HydroRun> {
    let run = run_hydro(&hydro_config(cfg, map, true), &hydro_initial(cfg)?)?;
    if let Some(x) = run.regime_exit {
        return Err(Error::Fault {
            time: x.time,
            msg: format!(
                "hydro reference left the strong-solution regime ({:?}, lip = {:.3e}); lower time.t_final",
                x.cause, x.lip
            ),
        });
    }
    Ok(run)
}

/// Metrics of one ε against the hydro reference at every shared output time.
fn sweep_rows(cfg: &ExperimentConfig, hydro: &HydroRun, run: &EpsilonRun) -> Result<Vec<Vec<f64>>> {
    let k = &run.kinetic;
    if k.snapshots.len() != hydro.snapshots.len() {
        return Err(Error::GridMismatch(format!(
            "{} kinetic vs {} hydro output times",
            k.snapshots.len(),
            hydro.snapshots.len()
        )));
    }
    let lip = col(&hydro.series, "lip_u").into_iter().fold(0.0, f64::max);
    let delta = col(&k.series, "Delta");
    let g = col(&k.series, "G_norm");
    let mut rows = Vec::with_capacity(k.snapshots.len());
    for (n, (f, h)) in k.snapshots.iter().zip(&hydro.snapshots).enumerate() {
        if (f.time - h.time()).abs() > 1e-9 * (1.0 + f.time.abs()) {
            return Err(Error::GridMismatch(format!("kinetic t = {} vs hydro t = {}", f.time, h.time())));
        }
        let mom = moments(f, cfg.tolerances.vacuum_threshold);
        let eta = relative_entropy(&mom, h, f.length, true)?;
        let eta_k = kinetic_relative_entropy(f, h, true)?;
        let rho_k: Vec<f64> = f.cell_masses().chunks(f.nv).map(|c| c.iter().sum()).collect();
        let rho_h = h.mass_on_cells(f.nx);
        let (sk, sh): (f64, f64) = (rho_k.iter().sum(), rho_h.iter().sum());
        let rho_h: Vec<f64> = rho_h.iter().map(|m| m * sk / sh).collect();
        let w1_rho = w1_circle_cells(&rho_k, &rho_h, f.length)?;
        let c = auto_coarsen(f, h, cfg.tolerances.max_atoms);
        let pw = phase_w1(f, h, c, cfg.tolerances.max_atoms)?;
        let upper = phase_w1_upper(f, h)?;
        rows.push(vec![
            run.epsilon,
            f.time,
            eta,
            eta_k,
            w1_rho,
            eta + w1_rho * w1_rho,
            pw.value,
            pw.error_bar,
            upper,
            delta[n],
            g[n],
            0.0,
        ]);
    }
    let times: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let etas: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let gap = density_gap_bound(&times, &etas, rows[0][4], cfg.t_final, lip);
    for (r, b) in rows.iter_mut().zip(gap) {
        r[11] = b;
    }
    Ok(rows)
}

fn fits(result_rows: &[(f64, f64, f64)]) -> (Option<RateFit>, Option<RateFit>) {
    if result_rows.len() < 3 {
        return (None, None);
    }
    let err: Vec<(f64, f64)> = result_rows.iter().map(|r| (r.0, r.1)).collect();
    let phase: Vec<(f64, f64)> = result_rows.iter().map(|r| (r.0, r.2)).collect();
    (fit_rate(&err).ok(), fit_rate(&phase).ok())
}

fn assemble(cfg: &ExperimentConfig, hydro: HydroRun, mut runs: Vec<EpsilonRun>) -> Result<SweepResult> {
    runs.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    let per_eps: Vec<Vec<Vec<f64>>> =
        runs.par_iter().map(|r| sweep_rows(cfg, &hydro, r)).collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&sweep_columns());
    let mut finals = Vec::new();
    for rows in per_eps {
        if let Some(last) = rows.last() {
            finals.push((last[0], last[5], last[6]));
        }
        for r in rows {
            table.push(r)?;
        }
    }
    let (fit, phase_fit) = fits(&finals);
    Ok(SweepResult { runs, hydro, table, fit, phase_fit, q: cfg.map.q() })
}

/// All ε-instances and the hydro reference run concurrently.
pub fn limit_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let map = cfg.alignment_map()?;
    let (hydro, runs) = rayon::join(
        || sweep_hydro(cfg, &map),
        || cfg.epsilon_list.par_iter().map(|&e| sweep_epsilon(cfg, &map, e)).collect::<Result<Vec<_>>>(),
    );
    assemble(cfg, hydro?, runs?)
}

fn eps_file(eps: f64) -> String {
    format!("kinetic_eps_{eps}.csv")
}

fn write_manifest(dir: &Path, files: &[PathBuf], errors: &[String]) -> Result<PathBuf> {
    let mut text = String::from("status = \"failed\"\n");
    text.push_str("errors = [\n");
    for e in errors {
        let _ = writeln!(text, "  {:?},", e);
    }
    text.push_str("]\nfiles = [\n");
    for f in files {
        let name = f.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let _ = writeln!(text, "  {:?},", name);
    }
    text.push_str("]\n");
    let path = dir.join("manifest.toml");
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Writes `sweep.csv`, `rates.csv`, `hydro.csv` and one kinetic series per ε. A
/// solver fault still writes what finished, plus `manifest.toml`, and returns the
/// first error.
pub fn cmd_limit_sweep(cfg: &ExperimentConfig, out_dir: &Path, opts: Options) -> Result<Outcome> {
    if cfg.experiment != Experiment::LimitSweep {
        return Err(Error::ConfigValue {
            key: "experiment".into(),
            msg: format!("`sweep` needs experiment = \"limit_sweep\", got {:?}", cfg.experiment),
        });
    }
    std::fs::create_dir_all(out_dir)?;
    let map = cfg.alignment_map()?;
    let (hydro, runs) = rayon::join(
        || sweep_hydro(cfg, &map),
        || cfg.epsilon_list.par_iter().map(|&e| (e, sweep_epsilon(cfg, &map, e))).collect::<Vec<_>>(),
    );
    let mut o = Outcome::default();
    let mut errors = Vec::new();
    let mut ok_runs = Vec::new();
    let mut first_err = None;
    for (eps, r) in runs {
        match r {
            Ok(run) => {
                save(run.kinetic.series.as_table(), out_dir, &eps_file(eps), &mut o.files)?;
                ok_runs.push(run);
            }
            Err(e) => {
                errors.push(format!("eps = {eps}: {e}"));
                first_err.get_or_insert(e);
            }
        }
    }
    let hydro = match hydro {
        Ok(h) => {
            save(h.series.as_table(), out_dir, "hydro.csv", &mut o.files)?;
            Some(h)
        }
        Err(e) => {
            errors.push(format!("hydro: {e}"));
            first_err.get_or_insert(e);
            None
        }
    };
    let result = match (hydro, first_err) {
        (Some(h), None) => assemble(cfg, h, ok_runs),
        (_, Some(e)) => Err(e),
        (None, None) => unreachable!(),
    };
    let result = match result {
        Ok(r) => r,
        Err(e) => {
            if errors.is_empty() {
                errors.push(e.to_string());
            }
            write_manifest(out_dir, &o.files, &errors)?;
            return Err(e);
        }
    };
    save(&result.table, out_dir, "sweep.csv", &mut o.files)?;
    if let Some(rates) = result.rates()? {
        save(&rates, out_dir, "rates.csv", &mut o.files)?;
    }
    let mut summary = String::from("sweep:");
    for r in &result.runs {
        let _ = write!(
            summary,
            " eps = {} err = {:.3e};",
            r.epsilon,
            result.final_value(r.epsilon, "eta_plus_W1_rho_sq").unwrap_or(f64::NAN)
        );
    }
    match result.fit {
        Some(f) => {
            let _ = write!(summary, " slope = {:.3} (q = {}, bound rate {:.3})", f.slope, result.q, result.q / (2.0 - result.q));
        }
        None => summary.push_str(" slope needs at least three eps values"),
    }
    o.summary = summary;
    if opts.check_invariants {
        for r in &result.runs {
            check_kinetic(&format!("eps = {}", r.epsilon), &r.kinetic, r.epsilon, &mut o.violations);
        }
        check_hydro(&result.hydro, &mut o.violations);
    }
    Ok(o)
}

/// Rows (z, Ψ by quadrature, closed form, |difference|); the closed-form columns
/// are omitted in quadrature mode.
pub fn isothermal_table(cfg: &ExperimentConfig) -> Result<Table> {
    let map = cfg.alignment_map()?;
    let spec = &cfg.isothermal;
    let k = match (spec.mode, cfg.map.clone()) {
        (PsiMode::Quadrature, _) => None,
        (PsiMode::ClosedForm, crate::config::MapSpec::Power { p }) => {
            let half = p / 2.0;
            if half.fract() != 0.0 || half < 1.0 {
                return Err(Error::ConfigValue {
                    key: "isothermal.mode".into(),
                    msg: format!("closed form needs p = 2k, got p = {p}; use mode = \"quadrature\""),
                });
            }
            Some(half as u32)
        }
        (PsiMode::ClosedForm, _) => {
            return Err(Error::ConfigValue {
                key: "isothermal.mode".into(),
                msg: "closed form exists only for the power family; use mode = \"quadrature\"".into(),
            })
        }
    };
    let rule = GaussHermite::new(spec.quad_order)?;
    let mut s = match k {
        Some(_) => Table::new(&["z", "psi_quadrature", "psi_closed_form", "abs_err"]),
        None => Table::new(&["z", "psi_quadrature"]),
    };
    let n = spec.n_points;
    for i in 0..n {
        let z = spec.z_min + (spec.z_max - spec.z_min) * i as f64 / (n - 1) as f64;
        let q = psi_with(&map, &rule, z);
        match k {
            Some(k) => {
                let c = psi_closed_form(k, z)?;
                s.push(vec![z, q, c, (q - c).abs()])?;
            }
            None => s.push(vec![z, q])?,
        }
    }
    Ok(s)
}

pub fn cmd_isothermal(cfg: &ExperimentConfig, out_dir: &Path, opts: Options) -> Result<Outcome> {
    std::fs::create_dir_all(out_dir)?;
    let table = isothermal_table(cfg)?;
    let mut o = Outcome::default();
    save(&table, out_dir, "psi.csv", &mut o.files)?;
    let worst = table.column("abs_err").map(|c| c.into_iter().fold(0.0, f64::max));
    o.summary = match worst {
        Some(w) => format!("isothermal: {} rows, max |quadrature - closed form| = {w:.3e}", table.len()),
        None => format!("isothermal: {} rows (quadrature only)", table.len()),
    };
    if opts.check_invariants {
        if let Some(w) = worst {
            if w > 1e-8 {
                o.violations.push(format!("isothermal: quadrature differs from the closed form by {w:.3e}"));
            }
        }
    }
    Ok(o)
}

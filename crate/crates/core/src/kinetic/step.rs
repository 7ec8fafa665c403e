use crate::align::{AlignmentMap, CommunicationKernel};
use crate::error::{Error, Result};

use super::{alignment_field_with, GridTables, PhaseDensity, VACUUM_THRESHOLD};

/// Reconstruction used by the x-transport substep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Upwind,
    /// Second-order upwind with minmod-limited slopes.
    Muscl,
}

pub const CFL_LIMIT: f64 = 0.9;
const NEG_TOL: f64 = -1e-14;

/// Energy bookkeeping of one split step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepBudget {
    /// dt·𝓓_1 evaluated where the alignment substep starts.
    pub d1_dt: f64,
    /// ∫ 𝓓_2 ds over the exact relaxation flow, ½ ε (1 - λ²) 𝓓_2.
    pub d2_int: f64,
    /// ∫ ε⁻¹ 𝓓_2 ds over the same flow.
    pub d2_over_eps_int: f64,
    /// max|F| seen by the alignment substep.
    pub max_force: f64,
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

fn check_nonneg(f: &PhaseDensity, stage: &str) -> Result<()> {
    let m = f.min_value();
    if m < NEG_TOL {
        return Err(Error::Fault {
            time: f.time,
            msg: format!("negative density {m:e} after {stage}"),
        });
    }
    Ok(())
}

/// Largest |v| over cell centres.
pub fn max_speed(f: &PhaseDensity) -> f64 {
    f.v(0).abs().max(f.v(f.nv - 1).abs())
}

fn x_transport(f: &mut PhaseDensity, dt: f64, scheme: Scheme) {
    let (nx, nv) = (f.nx, f.nv);
    let dx = f.dx();
    let mut row = vec![0.0; nx];
    let mut flux = vec![0.0; nx];
    for j in 0..nv {
        let v = f.v(j);
        if v == 0.0 {
            continue;
        }
        for i in 0..nx {
            row[i] = f.values[i * nv + j];
        }
        let c = v.abs() * dt / dx;
        // flux[i] is the flux through the right face of cell i
        for i in 0..nx {
            let (up, down, upup) = if v > 0.0 {
                (i, (i + 1) % nx, (i + nx - 1) % nx)
            } else {
                ((i + 1) % nx, i, (i + 2) % nx)
            };
            let mut face = row[up];
            if scheme == Scheme::Muscl {
                let s = minmod(row[up] - row[upup], row[down] - row[up]);
                face += 0.5 * (1.0 - c) * s;
            }
            flux[i] = v * face;
        }
        for i in 0..nx {
            let left = flux[(i + nx - 1) % nx];
            f.values[i * nv + j] = row[i] - dt / dx * (flux[i] - left);
        }
    }
}

/// Donor-cell v-transport with cell-centred speeds: a fraction F dt/Δv of each cell
/// moves one cell along F. Total momentum changes by dt Σ F M, which vanishes by
/// antisymmetry of the alignment sum. Returns the work Σ v F M.
fn v_transport(f: &mut PhaseDensity, force: &[f64], dt: f64) -> f64 {
    let nv = f.nv;
    let dv = f.dv();
    let vol = f.cell_volume();
    let mut work = 0.0;
    let mut out = vec![0.0; nv];
    for i in 0..f.nx {
        let col = &mut f.values[i * nv..(i + 1) * nv];
        let fc = &force[i * nv..(i + 1) * nv];
        out.copy_from_slice(col);
        for j in 0..nv {
            let m = col[j];
            if m == 0.0 {
                continue;
            }
            work += (f.v_min + (j as f64 + 0.5) * dv) * fc[j] * m * vol;
            let c = fc[j] * dt / dv;
            if c > 0.0 && j + 1 < nv {
                out[j] -= c * m;
                out[j + 1] += c * m;
            } else if c < 0.0 && j > 0 {
                out[j] += c * m;
                out[j - 1] -= c * m;
            }
        }
        col.copy_from_slice(&out);
    }
    work
}

/// Exact contraction v ↦ u + (v - u)λ per column, deposited back with linear
/// weights, which keeps column mass and momentum. Returns Σ|v - u|² M before the
/// contraction.
fn relax(f: &mut PhaseDensity, lambda: f64) -> f64 {
    let nv = f.nv;
    let dv = f.dv();
    let v0 = f.v(0);
    let mut d2 = 0.0;
    let mut out = vec![0.0; nv];
    for i in 0..f.nx {
        let col = &mut f.values[i * nv..(i + 1) * nv];
        let rho: f64 = col.iter().sum::<f64>() * dv;
        if rho < VACUUM_THRESHOLD {
            continue;
        }
        let mom: f64 = col.iter().enumerate().map(|(j, x)| (v0 + j as f64 * dv) * x).sum::<f64>() * dv;
        let u = mom / rho;
        out.iter_mut().for_each(|o| *o = 0.0);
        for j in 0..nv {
            let m = col[j];
            if m == 0.0 {
                continue;
            }
            let v = v0 + j as f64 * dv;
            d2 += (v - u) * (v - u) * m;
            let s = ((u + (v - u) * lambda) - v0) / dv;
            let k = (s.floor() as isize).clamp(0, nv as isize - 1) as usize;
            let theta = (s - k as f64).clamp(0.0, 1.0);
            if k + 1 < nv {
                out[k] += (1.0 - theta) * m;
                out[k + 1] += theta * m;
            } else {
                out[k] += m;
            }
        }
        col.copy_from_slice(&out);
    }
    d2 * f.cell_volume()
}

/// One Lie-split step: x-transport, alignment in v, exact relaxation.
pub fn kinetic_step(
    f: &PhaseDensity,
    kernel: &CommunicationKernel,
    map: &AlignmentMap,
    dt: f64,
    scheme: Scheme,
) -> Result<PhaseDensity> {
    let tables = GridTables::new(f, kernel, map);
    kinetic_step_budget(f, &tables, dt, scheme).map(|(g, _)| g)
}

/// As [`kinetic_step`], with prebuilt tables and the step's energy budget.
pub fn kinetic_step_budget(
    f: &PhaseDensity,
    tables: &GridTables,
    dt: f64,
    scheme: Scheme,
) -> Result<(PhaseDensity, StepBudget)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt must be > 0, got {dt}")));
    }
    let cx = dt * max_speed(f) / f.dx();
    if cx > CFL_LIMIT {
        return Err(Error::Cfl { constraint: "dt*max|v|/dx", value: cx, limit: CFL_LIMIT });
    }
    let mut g = f.clone();
    x_transport(&mut g, dt, scheme);
    check_nonneg(&g, "x-transport")?;

    let force = alignment_field_with(&g, tables);
    let max_force = force.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let cv = dt * max_force / g.dv();
    if cv > CFL_LIMIT {
        return Err(Error::Cfl { constraint: "dt*max|F|/dv", value: cv, limit: CFL_LIMIT });
    }
    let work = v_transport(&mut g, &force, dt);
    check_nonneg(&g, "v-transport")?;

    let mut budget = StepBudget { d1_dt: -work * dt, max_force, ..Default::default() };
    if g.epsilon.is_finite() {
        let lambda = (-dt / g.epsilon).exp();
        let d2 = relax(&mut g, lambda);
        let frac = 0.5 * (1.0 - lambda * lambda);
        budget.d2_over_eps_int = frac * d2;
        budget.d2_int = frac * d2 * g.epsilon;
        check_nonneg(&g, "relaxation")?;
    }
    g.time = f.time + dt;
    Ok((g, budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::moments;

    fn bump(nx: usize, nv: usize, eps: f64) -> PhaseDensity {
        let mut f = PhaseDensity::zeros(nx, nv, 1.0, -0.6, 0.6, eps).unwrap();
        for i in 0..nx {
            let u = 0.25 * (2.0 * std::f64::consts::PI * f.x(i)).sin();
            let rho = 1.0 + 0.5 * (2.0 * std::f64::consts::PI * f.x(i)).cos();
            for j in 0..nv {
                let z = (f.v(j) - u) / 0.1;
                f.values[i * nv + j] = rho * (-z * z).exp();
            }
        }
        let m = f.mass();
        f.values.iter_mut().for_each(|v| *v /= m);
        f
    }

    #[test]
    fn zero_force_no_relaxation_is_noop_for_uniform_x() {
        let mut f = PhaseDensity::zeros(8, 16, 1.0, -1.0, 1.0, f64::INFINITY).unwrap();
        for i in 0..8 {
            for j in 0..16 {
                f.values[i * 16 + j] = (j as f64 * 0.3).cos().abs();
            }
        }
        let k = CommunicationKernel::constant(0.0).unwrap();
        let map = AlignmentMap::p_power(2.5).unwrap();
        let g = kinetic_step(&f, &k, &map, 0.01, Scheme::Upwind).unwrap();
        for (a, b) in f.values.iter().zip(&g.values) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn relaxation_keeps_column_momentum() {
        let mut f = PhaseDensity::zeros(3, 10, 1.0, -1.0, 1.0, 0.1).unwrap();
        for i in 0..3 {
            f.values[i * 10 + 2 + i] = 1.0 + i as f64;
            f.values[i * 10 + 7] = 2.0;
        }
        let before = moments(&f, VACUUM_THRESHOLD);
        let mut g = f.clone();
        relax(&mut g, 0.3);
        let after = moments(&g, VACUUM_THRESHOLD);
        for i in 0..3 {
            assert!((before.rho[i] - after.rho[i]).abs() < 1e-13);
            assert!((before.momentum[i] - after.momentum[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn step_conserves_mass_and_momentum() {
        let k = CommunicationKernel::inverse_power(1.0).unwrap();
        let map = AlignmentMap::p_power(2.5).unwrap();
        for scheme in [Scheme::Upwind, Scheme::Muscl] {
            let f = bump(32, 48, 0.05);
            let (m0, p0) = (f.mass(), f.momentum());
            let mut g = f.clone();
            for _ in 0..20 {
                g = kinetic_step(&g, &k, &map, 0.02, scheme).unwrap();
            }
            assert!((g.mass() - m0).abs() < 1e-13);
            assert!((g.momentum() - p0).abs() < 1e-14);
            assert!(g.min_value() >= 0.0);
        }
    }

    #[test]
    fn cfl_errors_name_constraint() {
        let k = CommunicationKernel::inverse_power(1.0).unwrap();
        let map = AlignmentMap::p_power(2.5).unwrap();
        let f = bump(32, 48, 0.05);
        match kinetic_step(&f, &k, &map, 0.5, Scheme::Upwind) {
            Err(Error::Cfl { constraint, .. }) => assert_eq!(constraint, "dt*max|v|/dx"),
            other => panic!("expected CFL error, got {other:?}"),
        }
        let strong = CommunicationKernel::constant(1e4).unwrap();
        match kinetic_step(&f, &strong, &map, 0.01, Scheme::Upwind) {
            Err(Error::Cfl { constraint, .. }) => assert_eq!(constraint, "dt*max|F|/dv"),
            other => panic!("expected CFL error, got {other:?}"),
        }
    }
}

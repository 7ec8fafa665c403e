//! Smooth periodic initial data and its well-prepared kinetic lift.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hydro::{EulerGrid, HydroState, Markers};
use crate::kinetic::PhaseDensity;

/// ρ⁰(x) = (1 + a sin kx)/L and u⁰(x) = c + b sin kx with k = 2π/L.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothPreset {
    pub rho_amplitude: f64,
    pub u_amplitude: f64,
    pub u_mean: f64,
    pub length: f64,
}

impl Default for SmoothPreset {
    fn default() -> Self {
        Self { rho_amplitude: 0.5, u_amplitude: 0.25, u_mean: 0.0, length: 1.0 }
    }
}

impl SmoothPreset {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(Error::ConfigValue { key: "domain.length".into(), msg: format!("must be > 0, got {}", self.length) });
        }
        if !(self.rho_amplitude.abs() < 1.0) {
            return Err(Error::ConfigValue {
                key: "initial.rho_amplitude".into(),
                msg: format!("|a| < 1 keeps the density positive, got {}", self.rho_amplitude),
            });
        }
        if !self.u_amplitude.is_finite() || !self.u_mean.is_finite() {
            return Err(Error::ConfigValue { key: "initial.u_amplitude".into(), msg: "must be finite".into() });
        }
        Ok(())
    }

    fn k(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn rho(&self, x: f64) -> f64 {
        (1.0 + self.rho_amplitude * (self.k() * x).sin()) / self.length
    }

    pub fn u(&self, x: f64) -> f64 {
        self.u_mean + self.u_amplitude * (self.k() * x).sin()
    }

    /// ∫_{x0}^{x1} ρ⁰
    pub fn cell_mass(&self, x0: f64, x1: f64) -> f64 {
        let k = self.k();
        ((x1 - x0) - self.rho_amplitude / k * ((k * x1).cos() - (k * x0).cos())) / self.length
    }

    pub fn lipschitz(&self) -> f64 {
        self.u_amplitude.abs() * self.k()
    }

    pub fn u_range(&self) -> (f64, f64) {
        (self.u_mean - self.u_amplitude.abs(), self.u_mean + self.u_amplitude.abs())
    }

    fn centres(&self, n: usize) -> Vec<f64> {
        let h = self.length / n as f64;
        (0..n).map(|i| (i as f64 + 0.5) * h).collect()
    }

    fn masses(&self, n: usize) -> Vec<f64> {
        let h = self.length / n as f64;
        (0..n).map(|i| self.cell_mass(i as f64 * h, (i + 1) as f64 * h)).collect()
    }

    /// Markers at cell centres carrying the exact cell masses.
    pub fn markers(&self, n: usize) -> Result<HydroState> {
        let x = self.centres(n);
        let u = x.iter().map(|x| self.u(*x)).collect();
        Ok(HydroState::Lagrangian(Markers::new(x, u, self.masses(n), self.length)?))
    }

    /// Exact cell averages of ρ⁰ and point values of u⁰ at the centres.
    pub fn euler_grid(&self, n: usize) -> Result<HydroState> {
        let h = self.length / n as f64;
        let rho = self.masses(n).iter().map(|m| m / h).collect();
        let u = self.centres(n).iter().map(|x| self.u(*x)).collect();
        Ok(HydroState::Eulerian(EulerGrid::new(rho, u, self.length)?))
    }
}

/// Placement of the velocity bump relative to u⁰(x).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BumpShape {
    /// Supported on [u⁰, u⁰ + σ].
    Forward,
    /// Supported on [u⁰ - σ/2, u⁰ + σ/2].
    Centred,
}

/// How the truncated velocity interval is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VDomain {
    /// Hull of the initial velocity support.
    Hull,
    /// [min u⁰ - V⁰, max u⁰ + V⁰] with V⁰ the initial velocity diameter.
    Spread,
    /// The whole velocity grid, padding included.
    Window { v_min: f64, v_max: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub nv: usize,
    pub vdomain: VDomain,
    pub pad_cells: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 64, nv: 128, vdomain: VDomain::Hull, pad_cells: 4 }
    }
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub f: PhaseDensity,
    /// Upper bound on W1(f_ε⁰, ρ⁰ δ_{v = u⁰}) from an explicit transport plan.
    pub w1_upper: f64,
}

/// Raised-cosine CDF on [0, 1].
fn bump_cdf(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    z - (2.0 * PI * z).sin() / (2.0 * PI)
}

/// As [`lift_initial`], failing unless the plan bound on W1 to the monokinetic
/// profile is below ε.
pub fn prepare_initial(preset: &SmoothPreset, epsilon: f64, grid: &GridSpec, bump: BumpShape) -> Result<Prepared> {
    let prep = lift_initial(preset, epsilon, grid, bump)?;
    if !(prep.w1_upper < epsilon) {
        return Err(Error::NotWellPrepared { w1: prep.w1_upper, epsilon });
    }
    Ok(prep)
}

/// f_ε⁰(x, v) = ρ⁰(x) B_σ(v - u⁰(x)) with σ = ε/2, integrated exactly over each
/// velocity cell and scaled so every column carries the exact cell mass of ρ⁰.
pub fn lift_initial(preset: &SmoothPreset, epsilon: f64, grid: &GridSpec, bump: BumpShape) -> Result<Prepared> {
    preset.validate()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be > 0, got {epsilon}")));
    }
    if grid.nx == 0 || grid.nv <= 2 * grid.pad_cells {
        return Err(Error::ConfigValue {
            key: "discretization.nv".into(),
            msg: format!("needs more than 2·pad = {} cells", 2 * grid.pad_cells),
        });
    }
    let sigma = 0.5 * epsilon;
    let offset = match bump {
        BumpShape::Forward => 0.0,
        BumpShape::Centred => -0.5 * sigma,
    };
    let (umin, umax) = preset.u_range();
    let (lo, hi) = (umin + offset, umax + offset + sigma);
    let pad = grid.pad_cells as f64;
    let (lo, hi) = match grid.vdomain {
        VDomain::Hull => (lo, hi),
        VDomain::Spread => (umin - (hi - lo), umax + (hi - lo)),
        VDomain::Window { v_min, v_max } => {
            if !(v_min < v_max) {
                return Err(Error::ConfigValue {
                    key: "domain.v_min".into(),
                    msg: format!("need v_min < v_max, got [{v_min}, {v_max}]"),
                });
            }
            let dv = (v_max - v_min) / grid.nv as f64;
            (v_min + pad * dv, v_max - pad * dv)
        }
    };
    let dv = (hi - lo) / (grid.nv as f64 - 2.0 * pad);
    let mut f = PhaseDensity::zeros(grid.nx, grid.nv, preset.length, lo - pad * dv, hi + pad * dv, epsilon)?;
    let vol = f.cell_volume();
    let dx = f.dx();
    let mut plan = 0.0;
    for i in 0..f.nx {
        let x = f.x(i);
        let u = preset.u(x);
        let start = u + offset;
        let mass = preset.cell_mass(i as f64 * dx, (i + 1) as f64 * dx);
        let col = &mut f.values[i * grid.nv..(i + 1) * grid.nv];
        let mut total = 0.0;
        for (j, c) in col.iter_mut().enumerate() {
            let a = f.v_min + j as f64 * dv;
            *c = bump_cdf((a + dv - start) / sigma) - bump_cdf((a - start) / sigma);
            total += *c;
        }
        if !(total > 0.0) {
            return Err(Error::Domain(format!("bump missed the velocity grid in column {i}")));
        }
        for (j, c) in col.iter_mut().enumerate() {
            let m = *c / total * mass;
            *c = m / vol;
            plan += (f.v_min + (j as f64 + 0.5) * dv - u).abs() * m;
        }
    }
    let w1_upper = plan + 0.5 * dx * (1.0 + preset.lipschitz().powi(2)).sqrt();
    Ok(Prepared { f, w1_upper })
}

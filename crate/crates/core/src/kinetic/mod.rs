//! The ε-relaxed kinetic alignment equation on a periodic-x, truncated-v grid.

mod diagnostics;
mod run;
mod step;

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::align::{AlignmentMap, CommunicationKernel};
use crate::error::{Error, Result};
use crate::series::fmt_f64;

pub use diagnostics::{
    discrepancies, discrepancy_bound, energies, support_diameters, velocity_support, Discrepancies,
    Energies,
};
pub use run::{kinetic_columns, run_kinetic, KineticConfig, KineticRun};
pub use step::{max_speed, kinetic_step, kinetic_step_budget, Scheme, StepBudget};

pub const VACUUM_THRESHOLD: f64 = 1e-12;
pub const SUPPORT_CUTOFF: f64 = 1e-12;

/// Cell averages of f_ε. `values[i * nv + j]` is the cell at x_i, v_j.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDensity {
    pub nx: usize,
    pub nv: usize,
    pub length: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub values: Vec<f64>,
    pub time: f64,
    /// `f64::INFINITY` switches relaxation off.
    pub epsilon: f64,
}

impl PhaseDensity {
    pub fn zeros(nx: usize, nv: usize, length: f64, v_min: f64, v_max: f64, epsilon: f64) -> Result<Self> {
        if nx == 0 || nv == 0 {
            return Err(Error::Domain("grid needs nx, nv >= 1".into()));
        }
        if !(length > 0.0) || !(v_max > v_min) {
            return Err(Error::Domain(format!(
                "bad grid extents: L = {length}, v in [{v_min}, {v_max}]"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Domain(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self { nx, nv, length, v_min, v_max, values: vec![0.0; nx * nv], time: 0.0, epsilon })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    #[inline]
    pub fn dv(&self) -> f64 {
        (self.v_max - self.v_min) / self.nv as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    #[inline]
    pub fn v(&self, j: usize) -> f64 {
        self.v_min + (j as f64 + 0.5) * self.dv()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nv + j]
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx() * self.dv()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn momentum(&self) -> f64 {
        let vol = self.cell_volume();
        self.values
            .chunks(self.nv)
            .map(|col| col.iter().enumerate().map(|(j, f)| self.v(j) * f).sum::<f64>())
            .sum::<f64>()
            * vol
    }

    /// Cell masses f·Δx·Δv.
    pub fn cell_masses(&self) -> Vec<f64> {
        let vol = self.cell_volume();
        self.values.iter().map(|f| f * vol).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "nx nv L v_min v_max time epsilon")?;
        writeln!(
            out,
            "{} {} {} {} {} {} {}",
            self.nx,
            self.nv,
            fmt_f64(self.length),
            fmt_f64(self.v_min),
            fmt_f64(self.v_max),
            fmt_f64(self.time),
            fmt_f64(self.epsilon)
        )?;
        for col in self.values.chunks(self.nv) {
            let line: Vec<String> = col.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_snapshot(f)
    }

    pub fn read_snapshot<R: BufRead>(input: R) -> Result<Self> {
        let mut tokens = Vec::new();
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty snapshot".into()))??;
        if header.split_whitespace().collect::<Vec<_>>() != ["nx", "nv", "L", "v_min", "v_max", "time", "epsilon"] {
            return Err(Error::Parse(format!("unexpected snapshot header `{header}`")));
        }
        for line in lines {
            tokens.extend(line?.split_whitespace().map(str::to_string));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
        if tokens.len() < 7 {
            return Err(Error::Parse("snapshot header values missing".into()));
        }
        let nx: usize = tokens[0].parse().map_err(|_| Error::Parse("bad nx".into()))?;
        let nv: usize = tokens[1].parse().map_err(|_| Error::Parse("bad nv".into()))?;
        let mut f = Self::zeros(nx, nv, num(&tokens[2])?, num(&tokens[3])?, num(&tokens[4])?, num(&tokens[6])?)?;
        f.time = num(&tokens[5])?;
        let body = &tokens[7..];
        if body.len() != nx * nv {
            return Err(Error::Parse(format!("expected {} values, found {}", nx * nv, body.len())));
        }
        for (dst, s) in f.values.iter_mut().zip(body) {
            *dst = num(s)?;
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_snapshot(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// ρ_ε, ρ_ε u_ε and u_ε per x-cell, as densities in x.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentFields {
    pub rho: Vec<f64>,
    pub momentum: Vec<f64>,
    pub u: Vec<f64>,
    pub vacuum_mask: Vec<bool>,
}

pub fn moments(f: &PhaseDensity, vacuum_threshold: f64) -> MomentFields {
    let dv = f.dv();
    let n = f.nx;
    let mut rho = vec![0.0; n];
    let mut mom = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut vac = vec![false; n];
    for i in 0..n {
        let col = &f.values[i * f.nv..(i + 1) * f.nv];
        let r: f64 = col.iter().sum::<f64>() * dv;
        let m: f64 = col.iter().enumerate().map(|(j, x)| f.v(j) * x).sum::<f64>() * dv;
        rho[i] = r;
        mom[i] = m;
        if r >= vacuum_threshold {
            u[i] = m / r;
        } else {
            vac[i] = true;
        }
    }
    MomentFields { rho, momentum: mom, u, vacuum_mask: vac }
}

/// φ and Φ tabulated on grid offsets.
pub struct GridTables {
    /// φ(torus distance of k cells), k in 0..nx
    pub phi_x: Vec<f64>,
    /// Φ(k Δv) at index k + nv - 1
    pub phi_v: Vec<f64>,
    /// h(|k Δv|)·(k Δv)², the integrand of 𝓓_1
    pub pw_v: Vec<f64>,
}

impl GridTables {
    pub fn new(f: &PhaseDensity, kernel: &CommunicationKernel, map: &AlignmentMap) -> Self {
        let dx = f.dx();
        let dv = f.dv();
        let phi_x = (0..f.nx)
            .map(|k| kernel.phi(k.min(f.nx - k) as f64 * dx))
            .collect();
        let off = |k: usize| (k as f64 - (f.nv as f64 - 1.0)) * dv;
        let phi_v = (0..2 * f.nv - 1).map(|k| map.phi_scalar(off(k))).collect();
        let pw_v = (0..2 * f.nv - 1)
            .map(|k| {
                let z = off(k);
                if z == 0.0 {
                    0.0
                } else {
                    map.factor(z.abs()) * z * z
                }
            })
            .collect();
        Self { phi_x, phi_v, pw_v }
    }

    #[inline]
    pub fn phi_xy(&self, i: usize, k: usize) -> f64 {
        let n = self.phi_x.len();
        self.phi_x[if i >= k { i - k } else { i + n - k }]
    }
}

/// Σ_{y,l} φ(x_i - y) K(v_l - v_j) M_{y,l} for an offset table K.
pub(crate) fn double_convolution(f: &PhaseDensity, masses: &[f64], tables: &GridTables, kv: &[f64]) -> Vec<f64> {
    let nv = f.nv;
    let nx = f.nx;
    // g[y][j] = Σ_l K(v_l - v_j) M[y][l]
    let mut g = vec![0.0; nx * nv];
    g.par_chunks_mut(nv).enumerate().for_each(|(y, gy)| {
        let my = &masses[y * nv..(y + 1) * nv];
        for (j, out) in gy.iter_mut().enumerate() {
            let base = nv - 1 - j;
            let mut acc = 0.0;
            for (l, m) in my.iter().enumerate() {
                if *m != 0.0 {
                    acc += kv[base + l] * m;
                }
            }
            *out = acc;
        }
    });
    let mut out = vec![0.0; nx * nv];
    out.par_chunks_mut(nv).enumerate().for_each(|(x, row)| {
        for y in 0..nx {
            let w = tables.phi_xy(x, y);
            if w == 0.0 {
                continue;
            }
            let gy = &g[y * nv..(y + 1) * nv];
            for (o, gv) in row.iter_mut().zip(gy) {
                *o += w * gv;
            }
        }
    });
    out
}

/// F(f)(x, v) = ∫∫ φ(x - y) Φ(w - v) f(y, w) dy dw at every cell centre.
pub fn alignment_field(f: &PhaseDensity, kernel: &CommunicationKernel, map: &AlignmentMap) -> Vec<f64> {
    let tables = GridTables::new(f, kernel, map);
    alignment_field_with(f, &tables)
}

pub(crate) fn alignment_field_with(f: &PhaseDensity, tables: &GridTables) -> Vec<f64> {
    double_convolution(f, &f.cell_masses(), tables, &tables.phi_v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_moments() {
        let mut f = PhaseDensity::zeros(4, 8, 1.0, -1.0, 1.0, 0.1).unwrap();
        let (i, j) = (2, 5);
        f.values[i * 8 + j] = 1.0 / f.cell_volume();
        let m = moments(&f, VACUUM_THRESHOLD);
        assert!((m.rho[i] - 1.0 / f.dx()).abs() < 1e-12);
        assert!((m.u[i] - f.v(j)).abs() < 1e-15);
        assert!(m.vacuum_mask[0] && !m.vacuum_mask[i]);
        assert_eq!(m.u[0], 0.0);
    }

    #[test]
    fn symmetric_profile_has_zero_velocity() {
        let mut f = PhaseDensity::zeros(3, 6, 1.0, -1.0, 1.0, 0.1).unwrap();
        for i in 0..3 {
            for (j, w) in [0.1, 0.4, 1.0, 1.0, 0.4, 0.1].iter().enumerate() {
                f.values[i * 6 + j] = *w * (i + 1) as f64;
            }
        }
        let m = moments(&f, VACUUM_THRESHOLD);
        assert!(m.u.iter().all(|u| u.abs() < 1e-15));
    }

    #[test]
    fn two_column_field() {
        // φ ≡ 1, p = 4: F at (x1, v1) = m2 Φ(v2 - v1)
        let mut f = PhaseDensity::zeros(4, 8, 1.0, -1.0, 1.0, 0.1).unwrap();
        let (m1, m2) = (0.3, 0.7);
        f.values[0 * 8 + 2] = m1 / f.cell_volume();
        f.values[3 * 8 + 6] = m2 / f.cell_volume();
        let k = CommunicationKernel::constant(1.0).unwrap();
        let map = AlignmentMap::p_power(4.0).unwrap();
        let field = alignment_field(&f, &k, &map);
        let expect = m2 * map.phi_scalar(f.v(6) - f.v(2));
        assert!((field[2] - expect).abs() < 1e-14);
        let expect = m1 * map.phi_scalar(f.v(2) - f.v(6));
        assert!((field[3 * 8 + 6] - expect).abs() < 1e-14);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut f = PhaseDensity::zeros(3, 4, 1.0, -0.5, 0.7, 0.05).unwrap();
        for (k, v) in f.values.iter_mut().enumerate() {
            *v = (k as f64).sin().abs() / 3.0;
        }
        f.time = 0.125;
        let mut buf = Vec::new();
        f.write_snapshot(&mut buf).unwrap();
        let back = PhaseDensity::read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back, f);
        let mut g = f.clone();
        g.epsilon = f64::INFINITY;
        let mut buf = Vec::new();
        g.write_snapshot(&mut buf).unwrap();
        assert_eq!(PhaseDensity::read_snapshot(buf.as_slice()).unwrap(), g);
    }
}

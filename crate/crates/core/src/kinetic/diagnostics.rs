//! Energies, enstrophies and nonlinearity discrepancies of a phase density.
//!
//! Every double integral over (x, v, y, w) factors through the tabulated kernels:
//! a v-convolution per column followed by an x-convolution, so a full set costs
//! O(nx·nv² + nx²·nv) instead of O((nx·nv)²).

use crate::align::{AlignmentMap, CommunicationKernel};

use super::{double_convolution, moments, GridTables, MomentFields, PhaseDensity};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Energies {
    /// ½ ∫|v|² f
    pub e_kin: f64,
    /// ½ ∫∫ φ |w - v|^p f f'
    pub d1: f64,
    /// ∫ |v - u_ε|² f
    pub d2: f64,
    /// ½ ∫ ρ_ε |u_ε|²
    pub e_mac: f64,
    /// ½ ∫∫ φ |u_ε(y) - u_ε(x)|^p ρ_ε ρ_ε'
    pub d_mac: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Discrepancies {
    pub delta: f64,
    /// ∫|𝓖_ε| dx
    pub g_norm: f64,
    /// ∫ tr 𝓡_ε dx
    pub r_trace: f64,
    /// 𝓖_ε integrated over each x-cell.
    pub g_cells: Vec<f64>,
}

impl Discrepancies {
    /// ∫ 𝓖_ε · u dx for a test velocity sampled at the x-cell centres.
    pub fn pairing(&self, u: &[f64]) -> f64 {
        self.g_cells.iter().zip(u).map(|(g, u)| g * u).sum()
    }
}

/// Per-column cell-mass moments Σ M, Σ v M, Σ v² M.
fn column_moments(f: &PhaseDensity, masses: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let nv = f.nv;
    let mut r = vec![0.0; f.nx];
    let mut m = vec![0.0; f.nx];
    let mut e = vec![0.0; f.nx];
    for i in 0..f.nx {
        for j in 0..nv {
            let c = masses[i * nv + j];
            let v = f.v(j);
            r[i] += c;
            m[i] += v * c;
            e[i] += v * v * c;
        }
    }
    (r, m, e)
}

fn d2_of(f: &PhaseDensity, masses: &[f64], mom: &MomentFields) -> f64 {
    let mut d2 = 0.0;
    for i in 0..f.nx {
        let u = mom.u[i];
        for j in 0..f.nv {
            let z = f.v(j) - u;
            d2 += z * z * masses[i * f.nv + j];
        }
    }
    d2
}

pub fn energies(
    f: &PhaseDensity,
    kernel: &CommunicationKernel,
    map: &AlignmentMap,
    vacuum_threshold: f64,
) -> Energies {
    let tables = GridTables::new(f, kernel, map);
    energies_with(f, map, &tables, vacuum_threshold)
}

pub(crate) fn energies_with(
    f: &PhaseDensity,
    map: &AlignmentMap,
    tables: &GridTables,
    vacuum_threshold: f64,
) -> Energies {
    let masses = f.cell_masses();
    let mom = moments(f, vacuum_threshold);
    let dx = f.dx();
    let e_kin = 0.5
        * (0..f.nx)
            .map(|i| (0..f.nv).map(|j| f.v(j) * f.v(j) * masses[i * f.nv + j]).sum::<f64>())
            .sum::<f64>();
    let conv = double_convolution(f, &masses, tables, &tables.pw_v);
    let d1 = 0.5 * masses.iter().zip(&conv).map(|(m, c)| m * c).sum::<f64>();
    let d2 = d2_of(f, &masses, &mom);
    let mut e_mac = 0.0;
    let mut d_mac = 0.0;
    for i in 0..f.nx {
        if mom.vacuum_mask[i] {
            continue;
        }
        let ri = mom.rho[i] * dx;
        e_mac += 0.5 * ri * mom.u[i] * mom.u[i];
        for k in 0..f.nx {
            if mom.vacuum_mask[k] {
                continue;
            }
            let z = (mom.u[k] - mom.u[i]).abs();
            if z == 0.0 {
                continue;
            }
            d_mac += tables.phi_xy(i, k) * map.factor(z) * z * z * ri * mom.rho[k] * dx;
        }
    }
    Energies { e_kin, d1, d2, e_mac, d_mac: 0.5 * d_mac }
}

/// Δ_ε, ‖𝓖_ε‖_{L¹} and ∫tr 𝓡_ε. For p = 2 the integrands vanish pointwise and
/// both discrepancies are returned as exact zeros.
pub fn discrepancies(
    f: &PhaseDensity,
    kernel: &CommunicationKernel,
    map: &AlignmentMap,
    vacuum_threshold: f64,
) -> Discrepancies {
    let tables = GridTables::new(f, kernel, map);
    discrepancies_with(f, map, &tables, vacuum_threshold)
}

pub(crate) fn discrepancies_with(
    f: &PhaseDensity,
    map: &AlignmentMap,
    tables: &GridTables,
    vacuum_threshold: f64,
) -> Discrepancies {
    let masses = f.cell_masses();
    let mom = moments(f, vacuum_threshold);
    let r_trace = d2_of(f, &masses, &mom);
    if map.is_linear() {
        return Discrepancies { delta: 0.0, g_norm: 0.0, r_trace, g_cells: vec![0.0; f.nx] };
    }
    let nx = f.nx;
    let nv = f.nv;
    let (rc, mc, ec) = column_moments(f, &masses);
    let conv = double_convolution(f, &masses, tables, &tables.pw_v);
    let d1 = 0.5 * masses.iter().zip(&conv).map(|(m, c)| m * c).sum::<f64>();
    let force = double_convolution(f, &masses, tables, &tables.phi_v);

    let mut macro_part = 0.0;
    let mut g_cells = vec![0.0; nx];
    for i in 0..nx {
        let mut gi: f64 = (0..nv).map(|j| masses[i * nv + j] * force[i * nv + j]).sum();
        for k in 0..nx {
            let w = tables.phi_xy(i, k);
            if w == 0.0 {
                continue;
            }
            let h = map.factor((mom.u[k] - mom.u[i]).abs());
            // Σ_{v,w} |w - v|² M(x,v) M(y,w) and Σ (w - v) M M
            let s2 = rc[i] * ec[k] - 2.0 * mc[i] * mc[k] + ec[i] * rc[k];
            let s1 = rc[i] * mc[k] - mc[i] * rc[k];
            macro_part += w * h * s2;
            gi -= w * h * s1;
        }
        g_cells[i] = gi;
    }
    let delta = d1 - 0.5 * macro_part;
    let g_norm = g_cells.iter().map(|g| g.abs()).sum();
    Discrepancies { delta, g_norm, r_trace, g_cells }
}

/// Velocity support of f (cells with f > cutoff): (v_lo, v_hi) of the occupied
/// cell centres, or None for an empty density.
pub fn velocity_support(f: &PhaseDensity, cutoff: f64) -> Option<(f64, f64)> {
    let mut lo = usize::MAX;
    let mut hi = 0;
    for col in f.values.chunks(f.nv) {
        for (j, v) in col.iter().enumerate() {
            if *v > cutoff {
                lo = lo.min(j);
                hi = hi.max(j);
            }
        }
    }
    (lo != usize::MAX).then(|| (f.v(lo), f.v(hi)))
}

/// (S, V): torus diameter of the occupied x-cells and width of the occupied v-range.
pub fn support_diameters(f: &PhaseDensity, cutoff: f64) -> (f64, f64) {
    let occupied: Vec<usize> = (0..f.nx)
        .filter(|&i| f.values[i * f.nv..(i + 1) * f.nv].iter().any(|v| *v > cutoff))
        .collect();
    let v = velocity_support(f, cutoff).map_or(0.0, |(a, b)| b - a);
    let mut s = 0usize;
    for (a, &i) in occupied.iter().enumerate() {
        for &k in &occupied[a + 1..] {
            let d = k - i;
            s = s.max(d.min(f.nx - d));
        }
    }
    (s as f64 * f.dx(), v)
}

/// (C_p/2)·𝓓_2^{q/2} with the sup-norms measured on the strict support of f:
/// C_p = 8 c_p(R) ‖φ‖_∞ ‖v‖²_∞ and R the velocity diameter.
pub fn discrepancy_bound(
    f: &PhaseDensity,
    kernel: &CommunicationKernel,
    map: &AlignmentMap,
    d2: f64,
) -> f64 {
    let Some((lo, hi)) = velocity_support(f, 0.0) else {
        return 0.0;
    };
    let vsup = lo.abs().max(hi.abs());
    let c_p = 8.0 * map.holder_coeff(hi - lo) * kernel.sup_norm * vsup * vsup;
    let q = map.q();
    0.5 * c_p * d2.max(0.0).powf(q / 2.0)
}

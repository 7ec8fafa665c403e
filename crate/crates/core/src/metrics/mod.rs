//! Distances between kinetic and hydrodynamic states: relative entropies,
//! Wasserstein-1 (exact in 1D and on small phase-space instances) and rate fits.

mod ot;

use crate::error::{Error, Result};
use crate::hydro::{cic_deposit, HydroState};
use crate::kinetic::{MomentFields, PhaseDensity};

pub use ot::transport_cost;

pub const DEFAULT_MAX_ATOMS: usize = 400;
const MASS_TOL: f64 = 1e-12;

/// Point masses in one or two dimensions. `points` is row-major, `dim` values per atom.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    pub dim: usize,
    pub points: Vec<f64>,
    pub masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(dim: usize, points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() != dim * masses.len() {
            return Err(Error::Domain(format!(
                "{} coordinates do not fit {} atoms in dimension {dim}",
                points.len(),
                masses.len()
            )));
        }
        if masses.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::Domain("atom masses must be >= 0".into()));
        }
        Ok(Self { dim, points, masses })
    }

    pub fn from_1d(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(1, atoms.iter().map(|a| a.0).collect(), atoms.iter().map(|a| a.1).collect())
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }
}

fn check_masses(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    let (a, b) = (mu.total_mass(), nu.total_mass());
    if (a - b).abs() > MASS_TOL * a.abs().max(1.0) {
        return Err(Error::MassMismatch { mu: a, nu: b });
    }
    Ok(())
}

/// ∫ |F_μ - F_ν| over the merged sorted support.
pub fn w1_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    if mu.dim != 1 || nu.dim != 1 {
        return Err(Error::Domain("w1_1d needs 1D measures".into()));
    }
    check_masses(mu, nu)?;
    let mut ev: Vec<(f64, f64)> = mu
        .points
        .iter()
        .zip(&mu.masses)
        .map(|(x, m)| (*x, *m))
        .chain(nu.points.iter().zip(&nu.masses).map(|(x, m)| (*x, -*m)))
        .collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cdf = 0.0;
    let mut total = 0.0;
    for w in ev.windows(2) {
        cdf += w[0].1;
        total += cdf.abs() * (w[1].0 - w[0].0);
    }
    Ok(total)
}

/// W1 on the circle of circumference `length` between two mass vectors on the
/// same uniform cell centres: min over the constant c of Σ |D_k - c| Δx, with D the
/// cumulative difference, attained at its median.
pub fn w1_circle_cells(a: &[f64], b: &[f64], length: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} vs {} cells", a.len(), b.len())));
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > MASS_TOL * sa.abs().max(1.0) {
        return Err(Error::MassMismatch { mu: sa, nu: sb });
    }
    let dx = length / a.len() as f64;
    let mut d = Vec::with_capacity(a.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x - y;
        d.push(acc);
    }
    let mut sorted = d.clone();
    sorted.sort_by(f64::total_cmp);
    let c = sorted[sorted.len() / 2];
    Ok(d.iter().map(|v| (v - c).abs()).sum::<f64>() * dx)
}

/// Ground metric for exact transport.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GroundMetric {
    Euclidean,
    /// Euclidean with the first coordinate on a circle of this period.
    PeriodicX(f64),
}

impl GroundMetric {
    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for (k, (x, y)) in a.iter().zip(b).enumerate() {
            let mut d = (x - y).abs();
            if let (GroundMetric::PeriodicX(l), 0) = (self, k) {
                d = d.rem_euclid(*l);
                d = d.min(l - d);
            }
            s += d * d;
        }
        s.sqrt()
    }
}

/// Exact optimal transport cost with Euclidean ground metric.
pub fn w1_discrete_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure, max_atoms: usize) -> Result<f64> {
    w1_discrete_exact_with(mu, nu, max_atoms, GroundMetric::Euclidean)
}

pub fn w1_discrete_exact_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    max_atoms: usize,
    metric: GroundMetric,
) -> Result<f64> {
    if mu.dim != nu.dim {
        return Err(Error::Domain(format!("dimension {} vs {}", mu.dim, nu.dim)));
    }
    let atoms = mu.len().max(nu.len());
    if atoms > max_atoms {
        return Err(Error::TooLarge { atoms, max: max_atoms });
    }
    check_masses(mu, nu)?;
    // zero atoms carry nothing; dropping them keeps the basis small
    let keep = |m: &DiscreteMeasure| (0..m.len()).filter(|&k| m.masses[k] > 0.0).collect::<Vec<_>>();
    let (ia, ib) = (keep(mu), keep(nu));
    let a: Vec<f64> = ia.iter().map(|&k| mu.masses[k]).collect();
    let mut b: Vec<f64> = ib.iter().map(|&k| nu.masses[k]).collect();
    // absorb the rounding gap between totals into ν so the simplex is balanced
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if sb > 0.0 {
        b.iter_mut().for_each(|x| *x *= sa / sb);
    }
    let cost: Vec<f64> = ia
        .iter()
        .flat_map(|&i| ib.iter().map(move |&j| (i, j)))
        .map(|(i, j)| metric.dist(mu.point(i), nu.point(j)))
        .collect();
    transport_cost(&a, &b, &cost)
}

/// Phase-space W1 between a kinetic density and the graph measure of a hydro state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseW1 {
    pub value: f64,
    /// Bound on |value - W1 of the unprojected measures|.
    pub error_bar: f64,
    pub coarsen: usize,
    pub atoms: (usize, usize),
}

/// ρ δ_{v = u(x)} of the hydro state deposited with bilinear weights on the
/// kinetic grid, as cell masses.
pub fn hydro_phase_masses(f: &PhaseDensity, hydro: &HydroState) -> Vec<f64> {
    let (nx, nv) = (f.nx, f.nv);
    let dv = f.dv();
    let mut out = vec![0.0; nx * nv];
    let mut col = vec![0.0; nx];
    for (x, u, m) in hydro.atoms() {
        col.iter_mut().for_each(|c| *c = 0.0);
        cic_deposit(&mut col, f.length, x, m);
        let s = ((u - f.v_min) / dv - 0.5).clamp(0.0, (nv - 1) as f64);
        let k = (s.floor() as usize).min(nv - 1);
        let th = s - k as f64;
        for (i, c) in col.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            out[i * nv + k] += (1.0 - th) * c;
            if k + 1 < nv {
                out[i * nv + k + 1] += th * c;
            }
        }
    }
    out
}

fn coarse_measure(f: &PhaseDensity, masses: &[f64], c: usize, cutoff: f64) -> (DiscreteMeasure, f64) {
    let (nx, nv) = (f.nx, f.nv);
    let (bx, bv) = (nx.div_ceil(c), nv.div_ceil(c));
    let mut blocks = vec![0.0; bx * bv];
    let mut wx = vec![0.0; bx * bv];
    let mut wv = vec![0.0; bx * bv];
    for i in 0..nx {
        for j in 0..nv {
            let b = (i / c) * bv + j / c;
            blocks[b] += masses[i * nv + j];
        }
    }
    // block centres, clipped to the grid for partial blocks
    for bi in 0..bx {
        let (i0, i1) = (bi * c, ((bi + 1) * c).min(nx));
        for bj in 0..bv {
            let (j0, j1) = (bj * c, ((bj + 1) * c).min(nv));
            wx[bi * bv + bj] = 0.5 * (i0 + i1) as f64 * f.dx();
            wv[bi * bv + bj] = f.v_min + 0.5 * (j0 + j1) as f64 * f.dv();
        }
    }
    let mut pts = Vec::new();
    let mut ms = Vec::new();
    let mut dropped = 0.0;
    for b in 0..blocks.len() {
        if blocks[b] > cutoff {
            pts.push(wx[b]);
            pts.push(wv[b]);
            ms.push(blocks[b]);
        } else {
            dropped += blocks[b];
        }
    }
    (DiscreteMeasure { dim: 2, points: pts, masses: ms }, dropped)
}

/// Blocks of `coarsen`×`coarsen` cells become single atoms at their centres; the
/// hydro graph measure is first deposited on the kinetic grid. The error bar adds
/// the coarse block diameter, one fine cell diameter for the deposit, and the
/// dropped sub-cutoff mass times the domain diameter.
pub fn phase_w1(f: &PhaseDensity, hydro: &HydroState, coarsen: usize, max_atoms: usize) -> Result<PhaseW1> {
    if coarsen == 0 {
        return Err(Error::Domain("coarsening factor must be >= 1".into()));
    }
    if (hydro.length() - f.length).abs() > 1e-12 * f.length {
        return Err(Error::GridMismatch(format!("period {} vs {}", hydro.length(), f.length)));
    }
    let cutoff = 1e-14;
    let (mu, d1) = coarse_measure(f, &f.cell_masses(), coarsen, cutoff);
    let (nu, d2) = coarse_measure(f, &hydro_phase_masses(f, hydro), coarsen, cutoff);
    let mut nu = nu;
    let (sa, sb) = (mu.total_mass(), nu.total_mass());
    if (sa - sb).abs() > 1e-10 * sa.max(1.0) {
        return Err(Error::MassMismatch { mu: sa, nu: sb });
    }
    nu.masses.iter_mut().for_each(|m| *m *= sa / sb);
    let value = w1_discrete_exact_with(&mu, &nu, max_atoms, GroundMetric::PeriodicX(f.length))?;
    let c = coarsen as f64;
    let coarse_diam = ((c * f.dx()).powi(2) + (c * f.dv()).powi(2)).sqrt();
    let fine_diam = (f.dx().powi(2) + f.dv().powi(2)).sqrt();
    let domain_diam = ((0.5 * f.length).powi(2) + (f.v_max - f.v_min).powi(2)).sqrt();
    Ok(PhaseW1 {
        value,
        error_bar: coarse_diam + fine_diam + (d1 + d2) * domain_diam,
        coarsen,
        atoms: (mu.len(), nu.len()),
    })
}

/// Smallest coarsening factor whose atom counts fit under `max_atoms`.
pub fn auto_coarsen(f: &PhaseDensity, hydro: &HydroState, max_atoms: usize) -> usize {
    let hm = hydro_phase_masses(f, hydro);
    let fm = f.cell_masses();
    (1..=f.nx.max(f.nv))
        .find(|&c| {
            coarse_measure(f, &fm, c, 1e-14).0.len() <= max_atoms
                && coarse_measure(f, &hm, c, 1e-14).0.len() <= max_atoms
        })
        .unwrap_or(f.nx.max(f.nv))
}

/// Cheap upper bound on phase-space W1 through an explicit plan: move ρ_ε onto the
/// hydro density along x, then each column onto the graph point along v.
/// W1 ≤ (1 + L) W1(ρ_ε, ρ) + Σ |v - u(x)| f Δx Δv, with L the slope of u.
pub fn phase_w1_upper(f: &PhaseDensity, hydro: &HydroState) -> Result<f64> {
    let xs: Vec<f64> = (0..f.nx).map(|i| f.x(i)).collect();
    let u = hydro.velocity_at(&xs);
    let masses = f.cell_masses();
    let rho_k: Vec<f64> = masses.chunks(f.nv).map(|c| c.iter().sum()).collect();
    let rho_h = hydro.mass_on_cells(f.nx);
    let sh: f64 = rho_h.iter().sum();
    let sk: f64 = rho_k.iter().sum();
    let rho_h: Vec<f64> = rho_h.iter().map(|m| m * sk / sh).collect();
    let w_rho = w1_circle_cells(&rho_k, &rho_h, f.length)?;
    let n = f.nx;
    let lip = (0..n)
        .map(|i| (u[(i + 1) % n] - u[i]).abs() / f.dx())
        .fold(0.0, f64::max);
    let mut spread = 0.0;
    for i in 0..n {
        for j in 0..f.nv {
            spread += (f.v(j) - u[i]).abs() * masses[i * f.nv + j];
        }
    }
    Ok((1.0 + lip) * w_rho + spread)
}

fn hydro_u_on(mom_len: usize, hydro: &HydroState, length: f64, interpolate: bool) -> Result<Vec<f64>> {
    match hydro {
        HydroState::Eulerian(g) if g.rho.len() == mom_len && (g.length - length).abs() <= 1e-12 * length => {
            Ok(g.u.clone())
        }
        _ if interpolate => {
            let dx = length / mom_len as f64;
            let xs: Vec<f64> = (0..mom_len).map(|i| (i as f64 + 0.5) * dx).collect();
            Ok(hydro.velocity_at(&xs))
        }
        _ => Err(Error::GridMismatch(format!(
            "hydro state with {} points does not sit on the {mom_len}-cell kinetic grid; enable interpolation",
            hydro.len()
        ))),
    }
}

/// η_ε = ½ Σ ρ_ε |u_ε - u|² Δx over non-vacuum cells.
pub fn relative_entropy(mom: &MomentFields, hydro: &HydroState, length: f64, interpolate: bool) -> Result<f64> {
    let u = hydro_u_on(mom.rho.len(), hydro, length, interpolate)?;
    Ok(relative_entropy_with(mom, &u, length))
}

/// η_ε against a velocity already sampled at the kinetic cell centres.
pub fn relative_entropy_with(mom: &MomentFields, u: &[f64], length: f64) -> f64 {
    let dx = length / mom.rho.len() as f64;
    let mut s = 0.0;
    for i in 0..mom.rho.len() {
        if !mom.vacuum_mask[i] {
            let d = mom.u[i] - u[i];
            s += mom.rho[i] * d * d;
        }
    }
    0.5 * s * dx
}

/// η^K_ε = ½ Σ |v - u(x)|² f Δx Δv.
pub fn kinetic_relative_entropy(f: &PhaseDensity, hydro: &HydroState, interpolate: bool) -> Result<f64> {
    let u = hydro_u_on(f.nx, hydro, f.length, interpolate)?;
    Ok(kinetic_relative_entropy_with(f, &u))
}

pub fn kinetic_relative_entropy_with(f: &PhaseDensity, u: &[f64]) -> f64 {
    let vol = f.cell_volume();
    let mut s = 0.0;
    for i in 0..f.nx {
        for j in 0..f.nv {
            let d = f.v(j) - u[i];
            s += d * d * f.at(i, j);
        }
    }
    0.5 * s * vol
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares on (ln x, ln y).
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::Domain(format!("log-log fit needs positive data, got ({x}, {y})")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit { slope, intercept, r2 })
}

/// Right-hand side C (W1²(ρ⁰, ρ⁰_ε) + ∫₀ᵗ η_ε) with C = 2(1 + T) e^{2MT}, at every
/// sample time; the integral is the trapezoid rule over the samples.
pub fn density_gap_bound(times: &[f64], eta: &[f64], w1_rho0: f64, t_final: f64, m: f64) -> Vec<f64> {
    let c = 2.0 * (1.0 + t_final) * (2.0 * m * t_final).exp();
    let mut integral = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        if k > 0 {
            integral += 0.5 * (eta[k] + eta[k - 1]) * (times[k] - times[k - 1]);
        }
        out.push(c * (w1_rho0 * w1_rho0 + integral));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro::{EulerGrid, Markers};

    #[test]
    fn w1_1d_examples() {
        let d0 = DiscreteMeasure::from_1d(&[(0.0, 1.0)]).unwrap();
        let d1 = DiscreteMeasure::from_1d(&[(1.0, 1.0)]).unwrap();
        assert_eq!(w1_1d(&d0, &d1).unwrap(), 1.0);
        assert_eq!(w1_1d(&d0, &d0).unwrap(), 0.0);
        let split = DiscreteMeasure::from_1d(&[(0.0, 0.5), (2.0, 0.5)]).unwrap();
        assert!((w1_1d(&split, &d1).unwrap() - 1.0).abs() < 1e-15);
        let light = DiscreteMeasure::from_1d(&[(0.0, 0.5)]).unwrap();
        assert!(matches!(w1_1d(&light, &d1), Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn exact_examples() {
        let a = DiscreteMeasure::new(2, vec![0.0, 0.0], vec![1.0]).unwrap();
        let b = DiscreteMeasure::new(2, vec![3.0, 4.0], vec![1.0]).unwrap();
        assert!((w1_discrete_exact(&a, &b, 400).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(w1_discrete_exact(&a, &a, 400).unwrap(), 0.0);
        let big = DiscreteMeasure::from_1d(&(0..401).map(|k| (k as f64, 1.0)).collect::<Vec<_>>()).unwrap();
        assert!(matches!(w1_discrete_exact(&big, &big, 400), Err(Error::TooLarge { atoms: 401, max: 400 })));
    }

    #[test]
    fn periodic_metric_wraps() {
        let m = GroundMetric::PeriodicX(1.0);
        assert!((m.dist(&[0.05, 0.0], &[0.95, 0.0]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn circle_w1() {
        // half the mass in cell 0, half in cell 7 of 8: shortest way is across the seam
        let a = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let b = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert!((w1_circle_cells(&a, &b, 1.0).unwrap() - 0.125).abs() < 1e-15);
        let c = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert!((w1_circle_cells(&a, &c, 1.0).unwrap() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn relative_entropy_examples() {
        let mom = MomentFields {
            rho: vec![1.0; 4],
            momentum: vec![0.3; 4],
            u: vec![0.3; 4],
            vacuum_mask: vec![false; 4],
        };
        let g = EulerGrid::new(vec![1.0; 4], vec![0.1; 4], 1.0).unwrap();
        let eta = relative_entropy(&mom, &HydroState::Eulerian(g.clone()), 1.0, false).unwrap();
        assert!((eta - 0.02).abs() < 1e-15);
        let g8 = EulerGrid::new(vec![1.0; 8], vec![0.1; 8], 1.0).unwrap();
        assert!(matches!(
            relative_entropy(&mom, &HydroState::Eulerian(g8.clone()), 1.0, false),
            Err(Error::GridMismatch(_))
        ));
        assert!(relative_entropy(&mom, &HydroState::Eulerian(g8), 1.0, true).is_ok());
    }

    #[test]
    fn monokinetic_phase_w1_within_cell() {
        let mut f = PhaseDensity::zeros(16, 32, 1.0, -0.5, 0.5, 0.1).unwrap();
        let x: Vec<f64> = (0..16).map(|i| f.x(i)).collect();
        let u: Vec<f64> = x.iter().map(|x| 0.2 * (2.0 * std::f64::consts::PI * x).sin()).collect();
        for i in 0..16 {
            let j = ((u[i] - f.v_min) / f.dv()) as usize;
            f.values[i * 32 + j] = 1.0 / 16.0 / f.cell_volume();
        }
        let hydro = HydroState::Lagrangian(Markers::new(x, u, vec![1.0 / 16.0; 16], 1.0).unwrap());
        let w = phase_w1(&f, &hydro, 1, 400).unwrap();
        let diam = (f.dx().powi(2) + f.dv().powi(2)).sqrt();
        assert!(w.value <= diam, "{} > {diam}", w.value);
        let up = phase_w1_upper(&f, &hydro).unwrap();
        assert!(up + 1e-12 >= w.value - diam);
    }

    #[test]
    fn rate_fit() {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025].iter().map(|e: &f64| (*e, e.powf(1.0 / 3.0))).collect();
        let fit = fit_rate(&pts).unwrap();
        assert!((fit.slope - 1.0 / 3.0).abs() < 1e-12 && (fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit_rate(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)]).is_err());
    }
}

//! The nonlinear Cucker–Smale particle system in one or two dimensions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::{AlignmentMap, CommunicationKernel};
use crate::error::{domain, Error, Result};
use crate::series::DiagnosticSeries;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Free,
    Torus { period: f64 },
}

impl Domain {
    /// Minimal-image displacement on the torus.
    #[inline]
    pub fn displacement(&self, a: f64, b: f64) -> f64 {
        let d = b - a;
        match *self {
            Domain::Free => d,
            Domain::Torus { period } => d - period * (d / period).round(),
        }
    }

    #[inline]
    fn wrap(&self, x: f64) -> f64 {
        match *self {
            Domain::Free => x,
            Domain::Torus { period } => x.rem_euclid(period),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub dim: usize,
    pub domain: Domain,
    /// N×dim, row per particle.
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub time: f64,
    /// Number of steps taken so far.
    pub steps: usize,
}

impl ParticleEnsemble {
    pub fn new(dim: usize, domain: Domain, positions: Vec<f64>, velocities: Vec<f64>) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return crate::error::domain(format!("dimension must be 1 or 2, got {dim}"));
        }
        if positions.is_empty() || positions.len() % dim != 0 || positions.len() != velocities.len() {
            return crate::error::domain("positions and velocities must be non-empty N×dim arrays");
        }
        Ok(Self { dim, domain, positions, velocities, time: 0.0, steps: 0 })
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn mean_velocity(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim)
            .map(|c| self.velocities.iter().skip(c).step_by(self.dim).sum::<f64>() / n)
            .collect()
    }

    /// ½ N⁻¹ Σ|v_i|²
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.velocities.iter().map(|v| v * v).sum::<f64>() / self.len() as f64
    }
}

/// (dx, dv) with dv_i = N⁻¹ Σ_j φ(|x_i - x_j|) Φ(v_j - v_i). Each pair is
/// evaluated once and applied with opposite signs.
pub fn particle_rhs(
    ens: &ParticleEnsemble,
    kernel: &CommunicationKernel,
    map: &AlignmentMap,
) -> (Vec<f64>, Vec<f64>) {
    let mut dv = vec![0.0; ens.velocities.len()];
    rhs_into(ens.dim, ens.domain, &ens.positions, &ens.velocities, kernel, map, &mut dv);
    (ens.velocities.clone(), dv)
}

fn rhs_into(
    dim: usize,
    domain: Domain,
    x: &[f64],
    v: &[f64],
    kernel: &CommunicationKernel,
    map: &AlignmentMap,
    dv: &mut [f64],
) {
    let n = x.len() / dim;
    let inv_n = 1.0 / n as f64;
    dv.iter_mut().for_each(|d| *d = 0.0);
    if dim == 1 {
        for i in 0..n {
            for j in i + 1..n {
                let r = domain.displacement(x[i], x[j]).abs();
                let f = kernel.phi(r) * map.phi_scalar(v[j] - v[i]) * inv_n;
                dv[i] += f;
                dv[j] -= f;
            }
        }
    } else {
        for i in 0..n {
            for j in i + 1..n {
                let dx0 = domain.displacement(x[2 * i], x[2 * j]);
                let dx1 = domain.displacement(x[2 * i + 1], x[2 * j + 1]);
                let w = kernel.phi((dx0 * dx0 + dx1 * dx1).sqrt());
                let z0 = v[2 * j] - v[2 * i];
                let z1 = v[2 * j + 1] - v[2 * i + 1];
                let s = (z0 * z0 + z1 * z1).sqrt();
                if s == 0.0 {
                    continue;
                }
                let c = w * map.factor(s) * inv_n;
                dv[2 * i] += c * z0;
                dv[2 * i + 1] += c * z1;
                dv[2 * j] -= c * z0;
                dv[2 * j + 1] -= c * z1;
            }
        }
    }
}

/// Classical RK4 on (x, v).
pub fn step_rk4(
    ens: &ParticleEnsemble,
    kernel: &CommunicationKernel,
    map: &AlignmentMap,
    dt: f64,
) -> Result<ParticleEnsemble> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return domain(format!("dt must be finite and >= 0, got {dt}"));
    }
    if dt == 0.0 {
        return Ok(ens.clone());
    }
    let m = ens.positions.len();
    let (x0, v0) = (&ens.positions, &ens.velocities);
    let rhs = |x: &[f64], v: &[f64], out: &mut [f64]| {
        rhs_into(ens.dim, ens.domain, x, v, kernel, map, out)
    };
    let mut a1 = vec![0.0; m];
    let mut a2 = vec![0.0; m];
    let mut a3 = vec![0.0; m];
    let mut a4 = vec![0.0; m];
    let axpy = |base: &[f64], k: &[f64], h: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, k)| b + h * k).collect()
    };
    rhs(x0, v0, &mut a1);
    let (x2, v2) = (axpy(x0, v0, 0.5 * dt), axpy(v0, &a1, 0.5 * dt));
    rhs(&x2, &v2, &mut a2);
    let (x3, v3) = (axpy(x0, &v2, 0.5 * dt), axpy(v0, &a2, 0.5 * dt));
    rhs(&x3, &v3, &mut a3);
    let (x4, v4) = (axpy(x0, &v3, dt), axpy(v0, &a3, dt));
    rhs(&x4, &v4, &mut a4);
    let h6 = dt / 6.0;
    let mut out = ens.clone();
    for k in 0..m {
        out.positions[k] =
            ens.domain.wrap(x0[k] + h6 * (v0[k] + 2.0 * v2[k] + 2.0 * v3[k] + v4[k]));
        out.velocities[k] = v0[k] + h6 * (a1[k] + 2.0 * a2[k] + 2.0 * a3[k] + a4[k]);
    }
    out.time += dt;
    out.steps += 1;
    if out.positions.iter().chain(&out.velocities).any(|c| !c.is_finite()) {
        return Err(Error::BlowUp { step: out.steps });
    }
    Ok(out)
}

/// Exact |w(t)| for two particles, φ ≡ 1: |w|' = -|w|^{p-1}.
pub fn two_particle_exact(w0: f64, p: f64, t: f64) -> f64 {
    if w0 == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        return w0 * (-t).exp();
    }
    let e = p - 2.0;
    (w0.powf(-e) + e * t).powf(-1.0 / e)
}

/// (S, V): largest pairwise position distance (torus metric when periodic) and
/// largest pairwise velocity distance.
pub fn diameters(ens: &ParticleEnsemble) -> (f64, f64) {
    let n = ens.len();
    let d = ens.dim;
    let (mut s2, mut v2) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            let mut a = 0.0;
            let mut b = 0.0;
            for c in 0..d {
                let dx = ens.domain.displacement(ens.positions[i * d + c], ens.positions[j * d + c]);
                let dv = ens.velocities[j * d + c] - ens.velocities[i * d + c];
                a += dx * dx;
                b += dv * dv;
            }
            s2 = s2.max(a);
            v2 = v2.max(b);
        }
    }
    (s2.sqrt(), v2.sqrt())
}

/// Lattice positions with a seeded jitter; seeded uniform velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleInit {
    /// Side length of the sampling box (the period on a torus).
    pub length: f64,
    /// Jitter as a fraction of the lattice spacing, in [0, 1).
    pub jitter: f64,
    pub velocity_mean: f64,
    /// Velocities are drawn uniformly from mean ± spread/2 per component.
    pub velocity_spread: f64,
}

#[derive(Clone, Debug)]
pub struct ParticleConfig {
    pub n: usize,
    pub dim: usize,
    pub domain: Domain,
    pub dt: f64,
    pub t_final: f64,
    pub output_interval: f64,
    pub kernel: CommunicationKernel,
    pub map: AlignmentMap,
    pub seed: u64,
    pub init: ParticleInit,
}

pub fn sample_initial(cfg: &ParticleConfig) -> Result<ParticleEnsemble> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = &cfg.init;
    let n = cfg.n;
    let mut x = Vec::with_capacity(n * cfg.dim);
    let mut v = Vec::with_capacity(n * cfg.dim);
    let side = if cfg.dim == 1 { n } else { (n as f64).sqrt().ceil() as usize };
    let h = init.length / side as f64;
    for i in 0..n {
        let cell = if cfg.dim == 1 { vec![i] } else { vec![i % side, i / side] };
        for c in cell {
            let jit = init.jitter * (rng.gen::<f64>() - 0.5);
            x.push((c as f64 + 0.5 + jit) * h);
        }
        for _ in 0..cfg.dim {
            v.push(init.velocity_mean + init.velocity_spread * (rng.gen::<f64>() - 0.5));
        }
    }
    ParticleEnsemble::new(cfg.dim, cfg.domain, x, v)
}

pub fn particle_columns(dim: usize) -> Vec<&'static str> {
    if dim == 1 {
        vec!["t", "S", "V", "mean_v", "kinetic_energy"]
    } else {
        vec!["t", "S", "V", "mean_v_x", "mean_v_y", "kinetic_energy"]
    }
}

#[derive(Clone, Debug)]
pub struct ParticleRun {
    pub series: DiagnosticSeries,
    pub final_state: ParticleEnsemble,
}

fn record(series: &mut DiagnosticSeries, ens: &ParticleEnsemble) -> Result<()> {
    let (s, v) = diameters(ens);
    let mut row = vec![ens.time, s, v];
    row.extend(ens.mean_velocity());
    row.push(ens.kinetic_energy());
    series.push(row)
}

pub fn validate_particle(cfg: &ParticleConfig) -> Result<()> {
    let bad = |k: &str, m: &str| Err(Error::ConfigValue { key: k.into(), msg: m.into() });
    if cfg.n == 0 {
        return bad("n_particles", "must be >= 1");
    }
    if !(cfg.dim == 1 || cfg.dim == 2) {
        return bad("dim", "must be 1 or 2");
    }
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return bad("dt", "must be > 0");
    }
    if !(cfg.t_final > 0.0 && cfg.t_final.is_finite()) {
        return bad("t_final", "must be > 0");
    }
    if !(cfg.output_interval > 0.0) {
        return bad("output_interval", "must be > 0");
    }
    if !(cfg.init.length > 0.0) {
        return bad("length", "must be > 0");
    }
    if !(0.0..1.0).contains(&cfg.init.jitter) {
        return bad("jitter", "must lie in [0, 1)");
    }
    if !(cfg.init.velocity_spread >= 0.0) {
        return bad("velocity_spread", "must be >= 0");
    }
    Ok(())
}

/// Integrates to `t_final`, recording (t, S, V, mean velocity, kinetic energy) every
/// `output_interval`. Output times are hit exactly.
pub fn run_particle(cfg: &ParticleConfig) -> Result<ParticleRun> {
    validate_particle(cfg)?;
    let mut ens = sample_initial(cfg)?;
    let mut series = DiagnosticSeries::new(&particle_columns(cfg.dim));
    record(&mut series, &ens)?;
    let n_out = (cfg.t_final / cfg.output_interval - 1e-9).ceil().max(1.0) as usize;
    for k in 1..=n_out {
        let t_out = (k as f64 * cfg.output_interval).min(cfg.t_final);
        let span = t_out - ens.time;
        let steps = (span / cfg.dt - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            ens = step_rk4(&ens, &cfg.kernel, &cfg.map, h)?;
        }
        ens.time = t_out;
        record(&mut series, &ens)?;
    }
    Ok(ParticleRun { series, final_state: ens })
}

/// Checks the decay-rate inequality V' ≤ -2^{2-p} φ(S) V^{p-1} on consecutive
/// records with forward differences. Returns the largest violation beyond `tol`
/// scaled by the local derivative size (≤ 0 means it holds).
pub fn sddi_violation(
    series: &DiagnosticSeries,
    kernel: &CommunicationKernel,
    p: f64,
    tol: f64,
) -> f64 {
    let t = series.column("t").unwrap();
    let s = series.column("S").unwrap();
    let v = series.column("V").unwrap();
    let c = 2f64.powf(2.0 - p);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..t.len().saturating_sub(1) {
        let h = t[k + 1] - t[k];
        let dv = (v[k + 1] - v[k]) / h;
        let rate = |i: usize| c * kernel.phi(s[i]) * v[i].powf(p - 1.0);
        let bound = -rate(k).min(rate(k + 1));
        let scale = rate(k).max(dv.abs()).max(1e-300);
        worst = worst.max((dv - bound) / scale - tol);
    }
    worst
}

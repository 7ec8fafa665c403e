//! The pressureless Euler-alignment system in one space dimension, solved along
//! characteristics (markers carrying fixed mass) and, as a cross-check, by finite
//! volumes on a fixed grid.

mod eulerian;
mod lagrangian;
mod run;

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::align::{AlignmentMap, CommunicationKernel};
use crate::error::{Error, Result};
use crate::series::fmt_f64;

pub use eulerian::eulerian_step;
pub use lagrangian::{first_crossing, lagrangian_step};
pub use run::{hydro_columns, run_hydro, HydroConfig, HydroRun, HydroSolver, RegimeCause, RegimeExit};

/// Flow-map samples. Positions are unwrapped and strictly increasing, with
/// `x[n-1] < x[0] + length` while the map stays injective.
#[derive(Clone, Debug, PartialEq)]
pub struct Markers {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub m: Vec<f64>,
    /// Initial spacing, kept for reference.
    pub w: Vec<f64>,
    pub length: f64,
    pub time: f64,
}

/// Cell averages on a uniform periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerGrid {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub length: f64,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum HydroState {
    Lagrangian(Markers),
    Eulerian(EulerGrid),
}

impl Markers {
    pub fn new(x: Vec<f64>, u: Vec<f64>, m: Vec<f64>, length: f64) -> Result<Self> {
        let n = x.len();
        if n == 0 || u.len() != n || m.len() != n {
            return Err(Error::Domain("markers need matching non-empty x, u, m".into()));
        }
        if !(length > 0.0) {
            return Err(Error::Domain(format!("period must be > 0, got {length}")));
        }
        if m.iter().any(|m| *m < 0.0) {
            return Err(Error::Domain("marker masses must be >= 0".into()));
        }
        let mut w = vec![0.0; n];
        for i in 0..n {
            let next = if i + 1 < n { x[i + 1] } else { x[0] + length };
            w[i] = next - x[i];
            if !(w[i] > 0.0) {
                return Err(Error::Domain(format!("markers {i} and {} are not ordered", (i + 1) % n)));
            }
        }
        Ok(Self { x, u, m, w, length, time: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// X_{i+1} - X_i with periodic wrap at the last marker.
    pub fn gap(&self, i: usize) -> f64 {
        let n = self.len();
        if i + 1 < n {
            self.x[i + 1] - self.x[i]
        } else {
            self.x[0] + self.length - self.x[n - 1]
        }
    }

    /// ρ(X_i) = m_i / ((X_{i+1} - X_{i-1}) / 2).
    pub fn density(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let left = self.gap((i + n - 1) % n);
                let right = self.gap(i);
                self.m[i] / (0.5 * (left + right))
            })
            .collect()
    }
}

impl EulerGrid {
    pub fn new(rho: Vec<f64>, u: Vec<f64>, length: f64) -> Result<Self> {
        if rho.is_empty() || rho.len() != u.len() {
            return Err(Error::Domain("grid needs matching non-empty rho, u".into()));
        }
        if !(length > 0.0) {
            return Err(Error::Domain(format!("period must be > 0, got {length}")));
        }
        if rho.iter().any(|r| *r < 0.0) {
            return Err(Error::Domain("density must be >= 0".into()));
        }
        Ok(Self { rho, u, length, time: 0.0 })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.rho.len() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx()
    }
}

fn wrap(x: f64, length: f64) -> f64 {
    let y = x.rem_euclid(length);
    if y >= length {
        0.0
    } else {
        y
    }
}

/// Periodic piecewise-linear interpolation through (xs, ys); `xs` increasing
/// within one period, any offset.
fn interp_periodic(xs: &[f64], ys: &[f64], length: f64, at: f64) -> f64 {
    let n = xs.len();
    if n == 1 {
        return ys[0];
    }
    // rotate to start at the smallest wrapped abscissa
    let w: Vec<f64> = xs.iter().map(|x| wrap(*x, length)).collect();
    let start = (0..n).min_by(|&a, &b| w[a].total_cmp(&w[b])).unwrap();
    let node = |k: usize| {
        let i = (start + k) % n;
        let mut x = w[i];
        if k > 0 && x < w[start] {
            x += length;
        }
        (x, ys[i])
    };
    let t = wrap(at, length);
    let (x0, _) = node(0);
    let t = if t < x0 { t + length } else { t };
    // binary search for the interval [node(k), node(k+1)]
    let (mut lo, mut hi) = (0usize, n);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if node(mid).0 <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (xa, ya) = node(lo);
    let (xb, yb) = if lo + 1 < n {
        node(lo + 1)
    } else {
        let (x, y) = node(0);
        (x + length, y)
    };
    if xb <= xa {
        return ya;
    }
    let s = (t - xa) / (xb - xa);
    ya + s * (yb - ya)
}

/// Mass `m` at `x` split linearly between the two nearest cell centres.
pub(crate) fn cic_deposit(out: &mut [f64], length: f64, x: f64, m: f64) {
    let n = out.len();
    let dx = length / n as f64;
    let s = wrap(x, length) / dx - 0.5;
    let k = s.floor();
    let theta = s - k;
    let k = (k as isize).rem_euclid(n as isize) as usize;
    out[k] += (1.0 - theta) * m;
    out[(k + 1) % n] += theta * m;
}

impl HydroState {
    pub fn time(&self) -> f64 {
        match self {
            HydroState::Lagrangian(m) => m.time,
            HydroState::Eulerian(g) => g.time,
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            HydroState::Lagrangian(m) => m.length,
            HydroState::Eulerian(g) => g.length,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            HydroState::Lagrangian(m) => m.len(),
            HydroState::Eulerian(g) => g.rho.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn velocities(&self) -> &[f64] {
        match self {
            HydroState::Lagrangian(m) => &m.u,
            HydroState::Eulerian(g) => &g.u,
        }
    }

    /// (position, velocity, mass) of every marker or cell.
    pub fn atoms(&self) -> Vec<(f64, f64, f64)> {
        match self {
            HydroState::Lagrangian(m) => (0..m.len()).map(|i| (wrap(m.x[i], m.length), m.u[i], m.m[i])).collect(),
            HydroState::Eulerian(g) => {
                let dx = g.dx();
                (0..g.rho.len()).map(|j| (g.x(j), g.u[j], g.rho[j] * dx)).collect()
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms().iter().map(|a| a.2).sum()
    }

    pub fn total_momentum(&self) -> f64 {
        self.atoms().iter().map(|a| a.1 * a.2).sum()
    }

    /// ½ ∫ ρ |u|²
    pub fn energy(&self) -> f64 {
        0.5 * self.atoms().iter().map(|a| a.1 * a.1 * a.2).sum::<f64>()
    }

    /// (min u, max u)
    pub fn velocity_range(&self) -> (f64, f64) {
        let u = self.velocities();
        let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Linear periodic interpolation of u at arbitrary points.
    pub fn velocity_at(&self, xs: &[f64]) -> Vec<f64> {
        match self {
            HydroState::Lagrangian(m) => xs.iter().map(|x| interp_periodic(&m.x, &m.u, m.length, *x)).collect(),
            HydroState::Eulerian(g) => {
                let centres: Vec<f64> = (0..g.rho.len()).map(|j| g.x(j)).collect();
                xs.iter().map(|x| interp_periodic(&centres, &g.u, g.length, *x)).collect()
            }
        }
    }

    /// Mass per cell of a uniform nx-cell grid. Eulerian states on the same grid
    /// are copied; anything else is deposited with linear weights.
    pub fn mass_on_cells(&self, nx: usize) -> Vec<f64> {
        if let HydroState::Eulerian(g) = self {
            if g.rho.len() == nx {
                return g.rho.iter().map(|r| r * g.dx()).collect();
            }
        }
        let mut out = vec![0.0; nx];
        for (x, _, m) in self.atoms() {
            cic_deposit(&mut out, self.length(), x, m);
        }
        out
    }

    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "representation n time")?;
        match self {
            HydroState::Lagrangian(m) => {
                writeln!(out, "lagrangian {} {}", m.len(), fmt_f64(m.time))?;
                writeln!(out, "# L = {}", fmt_f64(m.length))?;
                for i in 0..m.len() {
                    writeln!(out, "{} {} {}", fmt_f64(m.x[i]), fmt_f64(m.u[i]), fmt_f64(m.m[i]))?;
                }
            }
            HydroState::Eulerian(g) => {
                writeln!(out, "eulerian {} {}", g.rho.len(), fmt_f64(g.time))?;
                writeln!(out, "# L = {}", fmt_f64(g.length))?;
                for j in 0..g.rho.len() {
                    writeln!(out, "{} {} {}", fmt_f64(g.x(j)), fmt_f64(g.rho[j]), fmt_f64(g.u[j]))?;
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_snapshot(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_snapshot<R: BufRead>(input: R) -> Result<Self> {
        let lines: Vec<String> = input.lines().collect::<std::io::Result<_>>()?;
        let perr = |m: String| Error::Parse(m);
        if lines.first().map(|l| l.split_whitespace().collect::<Vec<_>>()) != Some(vec!["representation", "n", "time"]) {
            return Err(perr("missing `representation n time` header".into()));
        }
        let head: Vec<&str> = lines.get(1).map(|l| l.split_whitespace().collect()).unwrap_or_default();
        if head.len() != 3 {
            return Err(perr("bad snapshot header line".into()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
        let n: usize = head[1].parse().map_err(|_| perr(format!("bad count `{}`", head[1])))?;
        let time = num(head[2])?;
        let length = lines
            .get(2)
            .and_then(|l| l.strip_prefix("# L = "))
            .ok_or_else(|| perr("missing period line".into()))
            .and_then(|s| num(s.trim()))?;
        let rows = &lines[3..];
        if rows.len() != n {
            return Err(perr(format!("expected {n} rows, found {}", rows.len())));
        }
        let mut cols = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for r in rows {
            let vals: Vec<&str> = r.split_whitespace().collect();
            if vals.len() != 3 {
                return Err(perr(format!("row `{r}` needs 3 values")));
            }
            for (c, v) in cols.iter_mut().zip(vals) {
                c.push(num(v)?);
            }
        }
        let [a, b, c] = cols;
        match head[0] {
            "lagrangian" => {
                let mut m = Markers::new(a, b, c, length)?;
                m.time = time;
                Ok(HydroState::Lagrangian(m))
            }
            "eulerian" => {
                let mut g = EulerGrid::new(b, c, length)?;
                g.time = time;
                Ok(HydroState::Eulerian(g))
            }
            other => Err(perr(format!("unknown representation `{other}`"))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_snapshot(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Torus distance between two points of period `length`.
#[inline]
pub(crate) fn torus_dist(a: f64, b: f64, length: f64) -> f64 {
    let d = (a - b).rem_euclid(length);
    d.min(length - d)
}

/// A_i = Σ_j φ(|X_i - X_j|) Φ(u_j - u_i) m_j on the torus.
pub(crate) fn accel_raw(
    x: &[f64],
    u: &[f64],
    m: &[f64],
    length: f64,
    kernel: &CommunicationKernel,
    map: &AlignmentMap,
) -> Vec<f64> {
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut a = 0.0;
            for j in 0..x.len() {
                let du = u[j] - u[i];
                if du == 0.0 || m[j] == 0.0 {
                    continue;
                }
                a += kernel.phi(torus_dist(x[i], x[j], length)) * map.phi_scalar(du) * m[j];
            }
            a
        })
        .collect()
}

/// Per-marker or per-cell alignment acceleration A[ρ, u].
pub fn alignment_accel(state: &HydroState, kernel: &CommunicationKernel, map: &AlignmentMap) -> Vec<f64> {
    match state {
        HydroState::Lagrangian(mk) => accel_raw(&mk.x, &mk.u, &mk.m, mk.length, kernel, map),
        HydroState::Eulerian(g) => {
            let dx = g.dx();
            let x: Vec<f64> = (0..g.rho.len()).map(|j| g.x(j)).collect();
            let m: Vec<f64> = g.rho.iter().map(|r| r * dx).collect();
            accel_raw(&x, &g.u, &m, g.length, kernel, map)
        }
    }
}

/// max |∂_x u| by one-sided differences between neighbouring markers or cells.
pub fn lipschitz_monitor(state: &HydroState) -> f64 {
    match state {
        HydroState::Lagrangian(mk) => {
            let n = mk.len();
            if n < 2 {
                return 0.0;
            }
            (0..n)
                .map(|i| (mk.u[(i + 1) % n] - mk.u[i]).abs() / mk.gap(i))
                .fold(0.0, f64::max)
        }
        HydroState::Eulerian(g) => {
            let n = g.rho.len();
            if n < 2 {
                return 0.0;
            }
            let dx = g.dx();
            (0..n).map(|j| (g.u[(j + 1) % n] - g.u[j]).abs() / dx).fold(0.0, f64::max)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_markers(n: usize) -> Markers {
        let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let u = x.iter().map(|x| (2.0 * PI * x).sin()).collect();
        Markers::new(x, u, vec![1.0 / n as f64; n], 1.0).unwrap()
    }

    #[test]
    fn two_marker_accel() {
        let mk = Markers::new(vec![0.1, 0.6], vec![0.0, 1.0], vec![0.5, 0.5], 1.0).unwrap();
        let k = CommunicationKernel::constant(1.0).unwrap();
        let map = AlignmentMap::p_power(4.0).unwrap();
        let a = alignment_accel(&HydroState::Lagrangian(mk), &k, &map);
        assert!((a[0] - 0.5).abs() < 1e-15 && (a[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_velocity_has_no_accel() {
        let mut mk = sine_markers(40);
        mk.u.iter_mut().for_each(|u| *u = 0.3);
        let k = CommunicationKernel::inverse_power(1.0).unwrap();
        let map = AlignmentMap::p_power(2.5).unwrap();
        let a = alignment_accel(&HydroState::Lagrangian(mk), &k, &map);
        assert!(a.iter().all(|a| a.abs() <= 1e-14));
    }

    #[test]
    fn accel_is_momentum_neutral() {
        let mk = sine_markers(64);
        let k = CommunicationKernel::inverse_power(1.0).unwrap();
        let map = AlignmentMap::p_power(3.5).unwrap();
        let a = alignment_accel(&HydroState::Lagrangian(mk.clone()), &k, &map);
        let s: f64 = a.iter().zip(&mk.m).map(|(a, m)| a * m).sum();
        assert!(s.abs() < 1e-13);
    }

    #[test]
    fn lipschitz_of_sine() {
        let st = HydroState::Lagrangian(sine_markers(2000));
        let l = lipschitz_monitor(&st);
        assert!((l - 2.0 * PI).abs() < 0.02 * 2.0 * PI, "{l}");
        let mut g = EulerGrid::new(vec![1.0; 10], vec![0.7; 10], 1.0).unwrap();
        assert_eq!(lipschitz_monitor(&HydroState::Eulerian(g.clone())), 0.0);
        g.u[3] = 0.8;
        assert!(lipschitz_monitor(&HydroState::Eulerian(g)) > 0.0);
    }

    #[test]
    fn interpolation_is_periodic_and_exact_at_nodes() {
        let mut mk = sine_markers(16);
        // shift by a period: same profile
        mk.x.iter_mut().for_each(|x| *x += 3.0);
        let st = HydroState::Lagrangian(mk.clone());
        let back = st.velocity_at(&mk.x);
        for (a, b) in back.iter().zip(&mk.u) {
            assert!((a - b).abs() < 1e-14);
        }
        let mid = st.velocity_at(&[0.0])[0];
        let expect = 0.5 * (mk.u[0] + mk.u[15]);
        assert!((mid - expect).abs() < 1e-14);
    }

    #[test]
    fn cic_keeps_mass_and_first_moment() {
        let mut out = vec![0.0; 8];
        cic_deposit(&mut out, 1.0, 0.3, 0.7);
        cic_deposit(&mut out, 1.0, 0.99, 0.3);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(out[0] > 0.0 && out[7] > 0.0);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut mk = sine_markers(5);
        mk.time = 0.25;
        let st = HydroState::Lagrangian(mk);
        let mut buf = Vec::new();
        st.write_snapshot(&mut buf).unwrap();
        let back = HydroState::read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back.atoms(), st.atoms());
        assert_eq!(back.time(), 0.25);
        let mut g = EulerGrid::new(vec![1.0, 2.0, 0.5], vec![0.1, -0.2, 0.3], 2.0).unwrap();
        g.time = 1.5;
        let st = HydroState::Eulerian(g);
        let mut buf = Vec::new();
        st.write_snapshot(&mut buf).unwrap();
        assert_eq!(HydroState::read_snapshot(buf.as_slice()).unwrap(), st);
    }
}

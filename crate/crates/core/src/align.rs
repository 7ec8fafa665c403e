//! Communication kernels, alignment maps Φ and the isothermal map Ψ = Φ∗𝓜.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{domain, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum KernelFamily {
    /// φ(r) = (1+r)^{-α}
    InversePower { alpha: f64 },
    Constant { value: f64 },
    /// Piecewise linear through (radii, values), constant past the last radius.
    Table { radii: Vec<f64>, values: Vec<f64> },
}

/// Radial weight φ: bounded, Lipschitz, non-increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct CommunicationKernel {
    pub family: KernelFamily,
    pub lower_bound: Option<f64>,
    pub lipschitz_const: f64,
    pub sup_norm: f64,
}

impl CommunicationKernel {
    pub fn inverse_power(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return domain(format!("alpha must be finite and >= 0, got {alpha}"));
        }
        Ok(Self {
            family: KernelFamily::InversePower { alpha },
            lower_bound: if alpha == 0.0 { Some(1.0) } else { None },
            lipschitz_const: alpha,
            sup_norm: 1.0,
        })
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return domain(format!("constant kernel needs a finite value >= 0, got {value}"));
        }
        Ok(Self {
            family: KernelFamily::Constant { value },
            lower_bound: Some(value),
            lipschitz_const: 0.0,
            sup_norm: value,
        })
    }

    pub fn table(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.len() != values.len() {
            return domain("kernel table needs matching, non-empty radii and values");
        }
        if radii[0] != 0.0 {
            return domain("kernel table must start at r = 0");
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return domain("kernel table radii must be strictly increasing");
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return domain("kernel table values must be finite and >= 0");
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return domain("kernel table values must be non-increasing");
        }
        let lip = radii
            .windows(2)
            .zip(values.windows(2))
            .map(|(r, v)| (v[0] - v[1]) / (r[1] - r[0]))
            .fold(0.0, f64::max);
        Ok(Self {
            lower_bound: Some(*values.last().unwrap()),
            lipschitz_const: lip,
            sup_norm: values[0],
            family: KernelFamily::Table { radii, values },
        })
    }

    /// φ(r), rejecting negative or non-finite radii.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return domain(format!("kernel radius must be >= 0, got {r}"));
        }
        Ok(self.phi(r))
    }

    /// Unchecked evaluation for hot loops; `r` must be a distance.
    #[inline]
    pub fn phi(&self, r: f64) -> f64 {
        match &self.family {
            KernelFamily::InversePower { alpha } => {
                if *alpha == 0.0 {
                    1.0
                } else if *alpha == 1.0 {
                    1.0 / (1.0 + r)
                } else {
                    (1.0 + r).powf(-alpha)
                }
            }
            KernelFamily::Constant { value } => *value,
            KernelFamily::Table { radii, values } => {
                let k = radii.partition_point(|&x| x <= r);
                if k >= radii.len() {
                    return *values.last().unwrap();
                }
                let (r0, r1) = (radii[k - 1], radii[k]);
                let t = (r - r0) / (r1 - r0);
                values[k - 1] + t * (values[k] - values[k - 1])
            }
        }
    }

    /// Lower bound of φ over distances up to `diameter`; non-increasing φ makes this φ(diameter).
    pub fn lower_bound_on(&self, diameter: f64) -> f64 {
        self.phi(diameter.max(0.0))
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum MapKind {
    /// Φ(z) = |z|^{p-2} z
    PPower { p: f64 },
    /// Φ(z) = h(|z|) z with h Hölder of order q and user-supplied constant C_R.
    General {
        label: String,
        h: ScalarFn,
        q: f64,
        c_r: ScalarFn,
    },
}

impl fmt::Debug for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapKind::PPower { p } => write!(f, "PPower {{ p: {p} }}"),
            MapKind::General { label, q, .. } => write!(f, "General {{ {label}, q: {q} }}"),
        }
    }
}

/// Velocity coupling Φ together with its Hölder data.
#[derive(Clone, Debug)]
pub struct AlignmentMap {
    pub kind: MapKind,
    exponent: f64,
}

impl AlignmentMap {
    pub fn p_power(p: f64) -> Result<Self> {
        if !(p >= 2.0 && p.is_finite()) {
            return Err(Error::Domain(format!("p must satisfy p >= 2, got {p}")));
        }
        Ok(Self {
            kind: MapKind::PPower { p },
            exponent: p - 2.0,
        })
    }

    pub fn general(
        label: impl Into<String>,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        q: f64,
        c_r: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return domain(format!("Hölder exponent q must lie in (0, 1], got {q}"));
        }
        Ok(Self {
            kind: MapKind::General {
                label: label.into(),
                h: Arc::new(h),
                q,
                c_r: Arc::new(c_r),
            },
            exponent: f64::NAN,
        })
    }

    /// p for the power family.
    pub fn p(&self) -> Option<f64> {
        match self.kind {
            MapKind::PPower { p } => Some(p),
            MapKind::General { .. } => None,
        }
    }

    /// Φ is the identity (p = 2), so every nonlinearity discrepancy vanishes identically.
    pub fn is_linear(&self) -> bool {
        self.exponent == 0.0
    }

    /// Hölder exponent q = min{p-2, 1}. For p = 2 the Hölder constant is zero and we
    /// report q = 1, which keeps q/(2-q) equal to the linear-case rate.
    pub fn q(&self) -> f64 {
        match &self.kind {
            MapKind::PPower { p } => {
                if *p == 2.0 {
                    1.0
                } else {
                    (p - 2.0).min(1.0)
                }
            }
            MapKind::General { q, .. } => *q,
        }
    }

    /// c_p for the power family, C_R for the general one.
    pub fn holder_coeff(&self, r: f64) -> f64 {
        match &self.kind {
            MapKind::PPower { p } => {
                if *p == 2.0 {
                    0.0
                } else if *p <= 3.0 {
                    1.0
                } else {
                    (p - 2.0) * r.powf(p - 3.0)
                }
            }
            MapKind::General { c_r, .. } => c_r(r),
        }
    }

    /// Scalar weight h(r) with Φ(z) = h(|z|) z; r^{p-2} for the power family.
    #[inline]
    pub fn factor(&self, r: f64) -> f64 {
        match &self.kind {
            MapKind::PPower { .. } => {
                let e = self.exponent;
                if e == 0.0 {
                    1.0
                } else if r == 0.0 {
                    0.0
                } else if e == 0.5 {
                    r.sqrt()
                } else if e == 1.0 {
                    r
                } else if e == 2.0 {
                    r * r
                } else {
                    r.powf(e)
                }
            }
            MapKind::General { h, .. } => h(r),
        }
    }

    /// Φ in one dimension.
    #[inline]
    pub fn phi_scalar(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.0;
        }
        self.factor(z.abs()) * z
    }

    pub fn phi(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.iter().any(|c| !c.is_finite()) {
            return domain("phi_map needs a finite velocity");
        }
        let r = z.iter().map(|c| c * c).sum::<f64>().sqrt();
        if r == 0.0 {
            return Ok(vec![0.0; z.len()]);
        }
        let w = self.factor(r);
        Ok(z.iter().map(|c| w * c).collect())
    }

    /// (|h(a) - h(b)|, C_R |a-b|^q) for a, b in [0, R].
    pub fn holder_gap(&self, a: f64, b: f64, r: f64) -> Result<(f64, f64)> {
        let inside = |x: f64| (0.0..=r).contains(&x);
        if !(inside(a) && inside(b)) {
            return domain(format!("holder_gap needs 0 <= a, b <= R; got a={a}, b={b}, R={r}"));
        }
        let gap = (self.factor(a) - self.factor(b)).abs();
        let d = (a - b).abs();
        let q = self.q();
        let bound = self.holder_coeff(r) * if q == 1.0 { d } else { d.powf(q) };
        Ok((gap, bound))
    }
}

/// Gauss–Hermite rule for ∫ g(s) e^{-s²} ds.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Newton iteration on the orthonormal Hermite recurrence; nodes come out
    /// exactly symmetric.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return domain("Gauss-Hermite order must be positive");
        }
        let pim4 = PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = (n + 1) / 2;
        let nf = n as f64;
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            let mut converged = false;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z1.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return domain(format!("Gauss-Hermite Newton iteration stalled at order {n}"));
            }
            if n % 2 == 1 && i == m - 1 {
                z = 0.0;
                // recompute the weight at the exact centre
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        Ok(Self { nodes: x, weights: w })
    }
}

pub const DEFAULT_QUAD_ORDER: usize = 64;

/// The normal profile 𝓜(z) = (4π)^{-d/2} e^{-|z|²/4}.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianProfile {
    pub dim: usize,
}

impl GaussianProfile {
    pub fn density(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|c| c * c).sum();
        (4.0 * PI).powf(-(self.dim as f64) / 2.0) * (-r2 / 4.0).exp()
    }
}

/// Ψ(z) = ∫ Φ(z - a) 𝓜(a) da in one dimension, with a = 2s so that
/// Ψ(z) = π^{-1/2} Σ w_i Φ(z + 2 s_i).
pub fn psi_map(map: &AlignmentMap, z: &[f64], quad_order: usize) -> Result<Vec<f64>> {
    if z.len() != 1 {
        return Err(Error::Unimplemented(format!(
            "psi_map is only available in one dimension (got d = {})",
            z.len()
        )));
    }
    if quad_order < 8 {
        return domain(format!("quad_order must be >= 8, got {quad_order}"));
    }
    let rule = GaussHermite::new(quad_order)?;
    Ok(vec![psi_with(map, &rule, z[0])])
}

/// Ψ with a precomputed rule. Symmetric node pairs are summed together, which makes
/// the result exactly odd in z.
pub fn psi_with(map: &AlignmentMap, rule: &GaussHermite, z: f64) -> f64 {
    let n = rule.nodes.len();
    let mut acc = 0.0;
    for i in 0..n / 2 {
        let s = 2.0 * rule.nodes[i];
        acc += rule.weights[i] * (map.phi_scalar(z + s) + map.phi_scalar(z - s));
    }
    if n % 2 == 1 {
        acc += rule.weights[n / 2] * map.phi_scalar(z);
    }
    acc / PI.sqrt()
}

/// k-th moment of 𝓜 in one dimension: 2^k Γ((k+1)/2)/Γ(1/2) for even k.
pub fn gaussian_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    // 2^j (2j-1)!!
    (1..=k / 2).map(|i| 2.0 * (2 * i - 1) as f64).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Closed form of Ψ for p = 2k.
pub fn psi_closed_form(k: u32, z: f64) -> Result<f64> {
    if k < 1 {
        return domain("psi_closed_form needs k >= 1");
    }
    let n = 2 * k - 1;
    Ok((0..k)
        .map(|j| binomial(n, 2 * j) * gaussian_moment(2 * j) * z.powi((n - 2 * j) as i32))
        .sum())
}

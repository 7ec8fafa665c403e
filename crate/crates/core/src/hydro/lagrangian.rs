use crate::align::{AlignmentMap, CommunicationKernel};
use crate::error::{Error, Result};

use super::{accel_raw, Markers};

/// Earliest time in (t0, t0 + dt] at which neighbouring gaps, interpolated
/// linearly over the step, reach zero.
pub fn first_crossing(before: &Markers, after: &Markers, dt: f64) -> Option<(f64, usize)> {
    let n = after.len();
    let mut best: Option<(f64, usize)> = None;
    for i in 0..n {
        let g1 = after.gap(i);
        if g1 > 0.0 {
            continue;
        }
        let g0 = before.gap(i);
        let s = if g0 > g1 { g0 / (g0 - g1) } else { 1.0 };
        let t = before.time + s.clamp(0.0, 1.0) * dt;
        if best.map_or(true, |(b, _)| t < b) {
            best = Some((t, i));
        }
    }
    best
}

/// Classical RK4 for X' = u, u' = A[X, u] with markers carrying fixed mass.
pub fn lagrangian_step(
    state: &Markers,
    kernel: &CommunicationKernel,
    map: &AlignmentMap,
    dt: f64,
) -> Result<Markers> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt must be > 0, got {dt}")));
    }
    let n = state.len();
    let l = state.length;
    let acc = |x: &[f64], u: &[f64]| accel_raw(x, u, &state.m, l, kernel, map);
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + s * b).collect() };

    let (x0, u0) = (&state.x, &state.u);
    let k1x = u0.clone();
    let k1u = acc(x0, u0);
    let x1 = axpy(x0, 0.5 * dt, &k1x);
    let u1 = axpy(u0, 0.5 * dt, &k1u);
    let k2x = u1.clone();
    let k2u = acc(&x1, &u1);
    let x2 = axpy(x0, 0.5 * dt, &k2x);
    let u2 = axpy(u0, 0.5 * dt, &k2u);
    let k3x = u2.clone();
    let k3u = acc(&x2, &u2);
    let x3 = axpy(x0, dt, &k3x);
    let u3 = axpy(u0, dt, &k3u);
    let k4x = u3;
    let k4u = acc(&x3, &k4x);

    let mut next = state.clone();
    for i in 0..n {
        next.x[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
        next.u[i] += dt / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
    }
    next.time = state.time + dt;
    if let Some((time, index)) = first_crossing(state, &next, dt) {
        return Err(Error::Crossing { time, index, next: (index + 1) % n });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn markers(n: usize, u0: impl Fn(f64) -> f64) -> Markers {
        let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let u = x.iter().map(|x| u0(*x)).collect();
        let m = x.iter().map(|x| (1.0 + 0.5 * (2.0 * PI * x).sin()) / n as f64).collect();
        Markers::new(x, u, m, 1.0).unwrap()
    }

    #[test]
    fn constant_velocity_translates() {
        let k = CommunicationKernel::inverse_power(1.0).unwrap();
        let map = AlignmentMap::p_power(3.0).unwrap();
        let mut s = markers(32, |_| 0.4);
        let x0 = s.x.clone();
        for _ in 0..100 {
            s = lagrangian_step(&s, &k, &map, 0.01).unwrap();
        }
        for (a, b) in s.x.iter().zip(&x0) {
            assert!((a - b - 0.4).abs() < 1e-12);
        }
        assert!(s.u.iter().all(|u| *u == 0.4));
    }

    #[test]
    fn linear_constant_kernel_closed_form() {
        // u(t, X(t, x)) = ū + (u⁰(x) - ū) e^{-t} with unit total mass
        let k = CommunicationKernel::constant(1.0).unwrap();
        let map = AlignmentMap::p_power(2.0).unwrap();
        let mut s = markers(64, |x| 0.2 * (2.0 * PI * x).cos() + 0.05);
        let total: f64 = s.m.iter().sum();
        s.m.iter_mut().for_each(|m| *m /= total);
        let ubar: f64 = s.u.iter().zip(&s.m).map(|(u, m)| u * m).sum();
        let u0 = s.u.clone();
        for _ in 0..1000 {
            s = lagrangian_step(&s, &k, &map, 1e-3).unwrap();
        }
        let decay = (-1.0f64).exp();
        for (u, a) in s.u.iter().zip(&u0) {
            assert!((u - (ubar + (a - ubar) * decay)).abs() < 1e-6);
        }
    }

    #[test]
    fn free_transport_crossing() {
        // φ ≡ 0, u⁰ = -b sin 2πx: characteristics meet at t = 1/(2πb)
        let k = CommunicationKernel::constant(0.0).unwrap();
        let map = AlignmentMap::p_power(2.5).unwrap();
        let b = 1.0;
        let mut s = markers(200, |x| -b * (2.0 * PI * x).sin());
        let t_star = 1.0 / (2.0 * PI * b);
        let err = loop {
            match lagrangian_step(&s, &k, &map, 1e-3) {
                Ok(next) => s = next,
                Err(e) => break e,
            }
            assert!(s.time < 1.0, "no crossing detected");
        };
        match err {
            Error::Crossing { time, .. } => assert!((time - t_star).abs() < 5e-3, "{time} vs {t_star}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}

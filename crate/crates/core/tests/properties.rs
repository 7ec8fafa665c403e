//! Invariants as property tests over random inputs.

use proptest::prelude::*;

use palign::align::{gaussian_moment, psi_map, AlignmentMap, CommunicationKernel};
use palign::hydro::{alignment_accel, run_hydro, EulerGrid, HydroConfig, HydroState, Markers};
use palign::kinetic::{run_kinetic, KineticConfig, PhaseDensity, Scheme};
use palign::metrics::{w1_1d, w1_discrete_exact, DiscreteMeasure};
use palign::particle::{run_particle, sddi_violation, Domain, ParticleConfig, ParticleInit};
use palign::{DiagnosticSeries, Table};

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cases(2000))]

    #[test]
    fn holder_gap_low_branch(p in 2.0001f64..=3.0, r in 0.01f64..10.0, sa in 0.0f64..=1.0, sb in 0.0f64..=1.0) {
        let m = AlignmentMap::p_power(p).unwrap();
        let (gap, bound) = m.holder_gap(sa * r, sb * r, r).unwrap();
        prop_assert!(gap <= bound + 1e-12, "p={p} gap={gap} bound={bound}");
    }

    #[test]
    fn holder_gap_high_branch(p in 3.0001f64..8.0, r in 0.01f64..5.0, sa in 0.0f64..=1.0, sb in 0.0f64..=1.0) {
        let m = AlignmentMap::p_power(p).unwrap();
        let (gap, bound) = m.holder_gap(sa * r, sb * r, r).unwrap();
        prop_assert!(gap <= bound + 1e-12 * (1.0 + bound), "p={p} gap={gap} bound={bound}");
    }

    #[test]
    fn phi_is_monotone(k in 0usize..4, z1 in -10.0f64..10.0, z2 in -10.0f64..10.0) {
        let p = [2.0, 2.5, 3.0, 4.0][k];
        let m = AlignmentMap::p_power(p).unwrap();
        prop_assert!((z1 - z2) * (m.phi_scalar(z1) - m.phi_scalar(z2)) >= -1e-12);
    }
}

proptest! {
    #![proptest_config(cases(200))]

    #[test]
    fn psi_is_odd(p in 2.0f64..6.0, z in -4.0f64..4.0) {
        let m = AlignmentMap::p_power(p).unwrap();
        let a = psi_map(&m, &[z], 64).unwrap()[0];
        let b = psi_map(&m, &[-z], 64).unwrap()[0];
        prop_assert!((a + b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn w1_1d_matches_exact_transport(
        a in prop::collection::vec((-5.0f64..5.0, 0.01f64..1.0), 1..20),
        b in prop::collection::vec((-5.0f64..5.0, 0.01f64..1.0), 1..20),
    ) {
        let (sa, sb): (f64, f64) = (a.iter().map(|x| x.1).sum(), b.iter().map(|x| x.1).sum());
        let b: Vec<(f64, f64)> = b.iter().map(|(x, m)| (*x, m * sa / sb)).collect();
        let mu = DiscreteMeasure::from_1d(&a).unwrap();
        let nu = DiscreteMeasure::from_1d(&b).unwrap();
        let fast = w1_1d(&mu, &nu).unwrap();
        let exact = w1_discrete_exact(&mu, &nu, 400).unwrap();
        prop_assert!((fast - exact).abs() <= 1e-9, "{fast} vs {exact}");
    }

    #[test]
    fn w1_metric_axioms(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 9),
        w in prop::collection::vec(0.05f64..1.0, 9),
    ) {
        let measure = |k: usize| {
            let idx = [3 * k, 3 * k + 1, 3 * k + 2];
            let s: f64 = idx.iter().map(|&i| w[i]).sum();
            let points = idx.iter().flat_map(|&i| [pts[i].0, pts[i].1]).collect();
            DiscreteMeasure::new(2, points, idx.iter().map(|&i| w[i] / s).collect()).unwrap()
        };
        let (x, y, z) = (measure(0), measure(1), measure(2));
        let d = |a: &DiscreteMeasure, b: &DiscreteMeasure| w1_discrete_exact(a, b, 400).unwrap();
        prop_assert!(d(&x, &x).abs() <= 1e-12);
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() <= 1e-12);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-10);
        prop_assert!(d(&x, &y) >= 0.0);
    }

    #[test]
    fn table_csv_round_trips(rows in prop::collection::vec(prop::collection::vec(-1e300f64..1e300, 3), 0..20)) {
        let mut t = Table::new(&["a", "b", "c"]);
        for r in &rows {
            t.push(r.clone()).unwrap();
        }
        let back = Table::read_csv(t.to_csv_string().as_bytes()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn series_csv_round_trips(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..20)) {
        let mut s = DiagnosticSeries::new(&["t", "x"]);
        for (k, v) in vals.iter().enumerate() {
            s.push(vec![k as f64 * 0.1, *v]).unwrap();
        }
        let back = DiagnosticSeries::read_csv(s.to_csv_string().as_bytes()).unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn gaussian_moments_match_trapezoid() {
    let n = 400_000;
    let (a, b) = (-40.0f64, 40.0f64);
    let h = (b - a) / n as f64;
    for j in 0..=4u32 {
        let g = |z: f64| z.powi(2 * j as i32) * (-z * z / 4.0).exp() / (4.0 * std::f64::consts::PI).sqrt();
        let mut s = 0.5 * (g(a) + g(b));
        for k in 1..n {
            s += g(a + k as f64 * h);
        }
        let expect = s * h;
        let got = gaussian_moment(2 * j);
        assert!((got - expect).abs() <= 1e-9 * expect.max(1.0), "j={j}: {got} vs {expect}");
    }
}

fn particle_case(n: usize, p: f64, alpha: f64, seed: u64, domain: Domain) -> ParticleConfig {
    ParticleConfig {
        n,
        dim: 1,
        domain,
        dt: 1e-3,
        t_final: 0.5,
        output_interval: 0.05,
        kernel: CommunicationKernel::inverse_power(alpha).unwrap(),
        map: AlignmentMap::p_power(p).unwrap(),
        seed,
        init: ParticleInit { length: 1.0, jitter: 0.9, velocity_mean: 0.3, velocity_spread: 2.0 },
    }
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn particle_invariants(n in 2usize..12, p in 2.0f64..4.0, alpha in 0.0f64..2.0, seed in any::<u64>()) {
        let cfg = particle_case(n, p, alpha, seed, Domain::Free);
        let run = run_particle(&cfg).unwrap();
        let s = &run.series;
        let (t, m, v, sd) = (s.column("t").unwrap(), s.column("mean_v").unwrap(), s.column("V").unwrap(), s.column("S").unwrap());
        for k in 1..t.len() {
            prop_assert!((m[k] - m[0]).abs() <= 1e-10 * t[k] + 1e-15, "momentum drift at {}", t[k]);
            prop_assert!(v[k] <= v[k - 1] + 1e-6, "V grew at {}", t[k]);
            prop_assert!(sd[k] <= sd[0] + t[k] * v[0] + 1e-6, "S bound at {}", t[k]);
        }
        if p > 2.0 {
            let worst = sddi_violation(s, &cfg.kernel, p, 10.0 * cfg.output_interval);
            prop_assert!(worst <= 0.0, "sddi violated by {worst}");
        }
    }
}

/// Random nonnegative density on an interior velocity band, unit mass.
fn random_phase(nx: usize, nv: usize, vals: &[f64], eps: f64) -> PhaseDensity {
    let mut f = PhaseDensity::zeros(nx, nv, 1.0, -1.0, 1.0, eps).unwrap();
    let pad = nv / 4;
    for i in 0..nx {
        for j in pad..nv - pad {
            f.values[i * nv + j] = vals[(i * nv + j) % vals.len()];
        }
    }
    let m = f.mass();
    f.values.iter_mut().for_each(|x| *x /= m);
    f
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn kinetic_invariants(
        vals in prop::collection::vec(0.0f64..1.0, 64),
        k in 0usize..4,
        eps in 0.05f64..0.5,
        muscl in any::<bool>(),
    ) {
        let p = [2.0, 2.5, 3.0, 4.0][k];
        let f0 = random_phase(16, 32, &vals, eps);
        let mut cfg = KineticConfig::new(
            CommunicationKernel::inverse_power(1.0).unwrap(),
            AlignmentMap::p_power(p).unwrap(),
            0.1,
            0.02,
        );
        cfg.scheme = if muscl { Scheme::Muscl } else { Scheme::Upwind };
        let run = run_kinetic(&cfg, &f0).unwrap();
        let s = &run.series;
        let col = |n: &str| s.column(n).unwrap();
        let (t, mass, mom, min_f) = (col("t"), col("mass"), col("momentum"), col("min_f"));
        let (delta, bound, pairing, g) = (col("Delta"), col("disc_bound"), col("G_pairing"), col("G_norm"));
        let (e_kin, e_mac, d1, d_mac) = (col("E_kin"), col("E_mac"), col("D1"), col("D_mac"));
        for n in 0..t.len() {
            prop_assert!((mass[n] - 1.0).abs() <= 1e-10);
            prop_assert!((mom[n] - mom[0]).abs() <= 1e-8 * t[n] + 1e-15);
            prop_assert!(min_f[n] >= -1e-14);
            prop_assert!(delta[n].abs() <= bound[n] + 1e-12, "|Delta| {} > {}", delta[n].abs(), bound[n]);
            prop_assert!(pairing[n].abs() <= bound[n] + 1e-12, "pairing {} > {}", pairing[n].abs(), bound[n]);
            prop_assert!(e_mac[n] <= e_kin[n] + 1e-12);
            prop_assert!(d_mac[n] <= d1[n] + delta[n].abs() + 1e-12);
            if p == 2.0 {
                prop_assert_eq!(delta[n], 0.0);
                prop_assert_eq!(g[n], 0.0);
            }
        }
    }
}

fn wavy(n: usize, a: &[f64; 4]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let s = |x: f64, c: f64, k: f64| c * (2.0 * std::f64::consts::PI * k * x).sin();
    let rho = x.iter().map(|x| 1.0 + s(*x, a[0], 1.0) + s(*x, a[1], 2.0)).collect();
    let u = x.iter().map(|x| s(*x, a[2], 1.0) + s(*x, a[3], 3.0)).collect();
    (x, rho, u)
}

proptest! {
    #![proptest_config(cases(12))]

    #[test]
    fn hydro_invariants(
        amp in prop::array::uniform4(-0.1f64..0.1),
        p in 2.0f64..4.0,
        eulerian in any::<bool>(),
    ) {
        let n = 64;
        let (x, rho, u) = wavy(n, &amp);
        let state = if eulerian {
            HydroState::Eulerian(EulerGrid::new(rho, u, 1.0).unwrap())
        } else {
            let m = rho.iter().map(|r| r / n as f64).collect();
            HydroState::Lagrangian(Markers::new(x, u, m, 1.0).unwrap())
        };
        let cfg = HydroConfig::new(
            CommunicationKernel::inverse_power(1.0).unwrap(),
            AlignmentMap::p_power(p).unwrap(),
            2e-3,
            0.1,
            0.01,
        );
        let run = run_hydro(&cfg, &state).unwrap();
        prop_assert!(run.regime_exit.is_none());
        let s = &run.series;
        let col = |n: &str| s.column(n).unwrap();
        let (t, mass, mom, lo, hi) = (col("t"), col("mass"), col("momentum"), col("u_min"), col("u_max"));
        for k in 1..t.len() {
            prop_assert!((mass[k] - mass[0]).abs() <= 1e-10);
            prop_assert!((mom[k] - mom[0]).abs() <= 1e-8 * t[k] + 1e-15);
            prop_assert!(lo[k] >= lo[k - 1] - 1e-8 && hi[k] <= hi[k - 1] + 1e-8, "range grew at {}", t[k]);
        }
    }

    #[test]
    fn flocked_hydro_is_fixed(c in -2.0f64..2.0, p in 2.0f64..4.0, amp in -0.5f64..0.5) {
        let n = 32;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let m: Vec<f64> = x.iter().map(|x| (1.0 + amp * (2.0 * std::f64::consts::PI * x).sin()) / n as f64).collect();
        let k = CommunicationKernel::inverse_power(1.0).unwrap();
        let map = AlignmentMap::p_power(p).unwrap();
        let lag = HydroState::Lagrangian(Markers::new(x.clone(), vec![c; n], m.clone(), 1.0).unwrap());
        let eul = HydroState::Eulerian(EulerGrid::new(m.iter().map(|m| m * n as f64).collect(), vec![c; n], 1.0).unwrap());
        for s in [lag, eul] {
            prop_assert!(alignment_accel(&s, &k, &map).iter().all(|a| a.abs() <= 1e-14));
        }
    }
}

use super::*;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

fn test_manifolds() -> Vec<(&'static str, Manifold)> {
    vec![
        ("torus", Manifold::flat_torus(2).unwrap()),
        ("sphere", Manifold::round_sphere(2).unwrap()),
        ("pendulum", Manifold::spherical_pendulum(3.5).unwrap()),
        (
            "product",
            Manifold::product(
                Manifold::round_sphere(2).unwrap(),
                Manifold::flat_torus(1).unwrap(),
            )
            .unwrap(),
        ),
        ("ellipsoid", Manifold::triaxial_ellipsoid(0.5, 0.8, 1.3).unwrap()),
    ]
}

fn random_chart_point(m: &Manifold, rng: &mut impl Rng) -> DVector<f64> {
    let n = m.dim();
    let mut x = DVector::zeros(n);
    for i in 0..n {
        x[i] = match m.periods()[i] {
            Some(p) => rng.gen_range(0.0..p),
            None => rng.gen_range(0.3..std::f64::consts::PI - 0.3),
        };
    }
    x
}

#[test]
fn hamiltonian_flat_torus_unit_covector() {
    let m = Manifold::flat_torus(2).unwrap();
    let rho = m.phase_point(&v2(0.0, 0.0), &v2(1.0, 0.0)).unwrap();
    assert!(m.hamiltonian(&rho).unwrap().abs() < 1e-15);
}

#[test]
fn hamiltonian_pendulum_zero_energy_profile() {
    // α = sin r, V = E − 2 cos r with E = 0; at r = π/2, ξ = 0: p = −V = 0
    let m = Manifold::revolution(Profile::Sin, Some(Profile::Pendulum { e: 0.0 })).unwrap();
    let rho = m
        .phase_point(&v2(std::f64::consts::FRAC_PI_2, 0.0), &v2(0.0, 0.0))
        .unwrap();
    assert!(m.hamiltonian(&rho).unwrap().abs() < 1e-15);
}

#[test]
fn hamiltonian_sphere_norm_two() {
    let m = Manifold::round_sphere(2).unwrap();
    let x = v2(1.1, 0.4);
    // covector of g-norm 2: 2 · (unit radial covector)
    let xi = v2(2.0, 0.0);
    let rho = m.phase_point(&x, &xi).unwrap();
    assert!((m.hamiltonian(&rho).unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn hamiltonian_rejects_pole_guard() {
    let m = Manifold::round_sphere(2).unwrap();
    let bad = v2(1e-9, 0.0);
    assert!(matches!(
        m.check_chart(&bad),
        Err(GeobeamError::Domain(_))
    ));
}

#[test]
fn metric_flat_torus_identity_and_zero_christoffel() {
    let m = Manifold::flat_torus(2).unwrap();
    let (g, gamma) = m.metric_and_derivatives(&v2(0.2, 0.7)).unwrap();
    assert_eq!(g, DMatrix::identity(2, 2));
    for gk in gamma {
        assert_eq!(gk, DMatrix::zeros(2, 2));
    }
}

#[test]
fn metric_revolution_diag() {
    let m = Manifold::spherical_pendulum(3.5).unwrap();
    let r0 = 1.0;
    let g = m.metric(&v2(r0, 0.3));
    assert!((g[(0, 0)] - 1.0).abs() < 1e-15);
    assert!((g[(1, 1)] - r0.sin().powi(2)).abs() < 1e-15);
}

#[test]
fn sphere_christoffel_matches_symbolic() {
    let m = Manifold::round_sphere(2).unwrap();
    let r = 0.9;
    let gamma = m.christoffel(&v2(r, 1.0));
    // Γ^r_{θθ} = −sin r cos r, Γ^θ_{rθ} = cot r
    assert!((gamma[0][(1, 1)] + r.sin() * r.cos()).abs() < 1e-12);
    assert!((gamma[1][(0, 1)] - r.cos() / r.sin()).abs() < 1e-12);
}

#[test]
fn metric_spd_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (name, m) in test_manifolds() {
        for _ in 0..1000 {
            let x = random_chart_point(&m, &mut rng);
            let g = m.metric(&x);
            let sym = (&g - &g.transpose()).norm();
            assert!(sym < 1e-14, "{name}: metric not symmetric at {x:?}");
            let chol = g.clone().cholesky();
            assert!(chol.is_some(), "{name}: metric not positive definite at {x:?}");
        }
    }
}

#[test]
fn christoffel_reproduces_metric_derivatives() {
    // ∂_k g_ij = Γ^l_{ki} g_lj + Γ^l_{kj} g_il, checked against finite differences of g
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (name, m) in test_manifolds() {
        let n = m.dim();
        for _ in 0..60 {
            let x = random_chart_point(&m, &mut rng);
            let gamma = m.christoffel(&x);
            let g = m.metric(&x);
            let h = 1e-6;
            for k in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (m.metric(&xp) - m.metric(&xm)) / (2.0 * h);
                let mut pred = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            s += gamma[l][(k, i)] * g[(l, j)] + gamma[l][(k, j)] * g[(i, l)];
                        }
                        pred[(i, j)] = s;
                    }
                }
                let scale = fd.norm().max(1.0);
                assert!(
                    (&fd - &pred).norm() / scale < 1e-6,
                    "{name}: Christoffel identity off at {x:?} coord {k}"
                );
            }
        }
    }
}

#[test]
fn sasaki_zero_iff_equal() {
    let m = Manifold::flat_torus(2).unwrap();
    let a = m.shell_point(&v2(0.1, 0.2), &v2(1.0, 0.0)).unwrap();
    let d = m.sasaki_distance(&a, &a);
    assert!(d.value < 1e-12 && !d.flagged);
}

#[test]
fn sasaki_flat_torus_translation() {
    let m = Manifold::flat_torus(2).unwrap();
    let a = m.shell_point(&v2(0.0, 0.0), &v2(1.0, 0.0)).unwrap();
    let b = m.shell_point(&v2(0.3, 0.0), &v2(1.0, 0.0)).unwrap();
    let d = m.sasaki_distance(&a, &b);
    assert!((d.value - 0.3).abs() < 1e-14 && !d.flagged);
}

#[test]
fn sasaki_flat_torus_covector_rotation() {
    let m = Manifold::flat_torus(2).unwrap();
    let a = m.shell_point(&v2(0.0, 0.0), &v2(1.0, 0.0)).unwrap();
    let b = m.shell_point(&v2(0.0, 0.0), &v2(0.0, 1.0)).unwrap();
    let d = m.sasaki_distance(&a, &b);
    assert!((d.value - std::f64::consts::SQRT_2).abs() < 1e-14);
}

#[test]
fn sasaki_triangle_inequality_sampled() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (name, m) in test_manifolds() {
        let slack = if name == "torus" { 1e-9 } else { 1e-4 };
        let mut checked = 0;
        while checked < 1000 {
            let x = random_chart_point(&m, &mut rng);
            // three nearby phase points so that no proxy flag triggers
            let mut pts = Vec::new();
            for _ in 0..3 {
                let mut y = x.clone();
                for i in 0..m.dim() {
                    y[i] += rng.gen_range(-0.02..0.02);
                }
                if m.check_chart(&y).is_err() {
                    continue;
                }
                let mut dir = DVector::zeros(m.dim());
                for i in 0..m.dim() {
                    dir[i] = rng.gen_range(-1.0..1.0);
                }
                if dir.norm() < 1e-3 {
                    dir[0] = 1.0;
                }
                pts.push(m.shell_point(&y, &dir).unwrap());
            }
            if pts.len() < 3 {
                continue;
            }
            let dab = m.sasaki_distance(&pts[0], &pts[1]);
            let dbc = m.sasaki_distance(&pts[1], &pts[2]);
            let dac = m.sasaki_distance(&pts[0], &pts[2]);
            if dab.flagged || dbc.flagged || dac.flagged {
                continue;
            }
            assert!(
                dac.value <= dab.value + dbc.value + slack,
                "{name}: triangle inequality violated: {} > {} + {}",
                dac.value,
                dab.value,
                dbc.value
            );
            checked += 1;
        }
    }
}

#[test]
fn sasaki_proxy_flagged_beyond_injectivity() {
    let m = Manifold::flat_torus(2).unwrap();
    let a = m.shell_point(&v2(0.0, 0.0), &v2(1.0, 0.0)).unwrap();
    let b = m.shell_point(&v2(0.4, 0.3), &v2(1.0, 0.0)).unwrap();
    // base distance 0.5 ≥ inj/2 = 0.25
    let d = m.sasaki_distance(&a, &b);
    assert!(d.flagged);
}

#[test]
fn fiber_sample_four_equiangular() {
    let m = Manifold::flat_torus(2).unwrap();
    let pts = m.fiber_sample(&v2(0.0, 0.0), 4).unwrap();
    assert_eq!(pts.len(), 4);
    let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
    for (p, e) in pts.iter().zip(expect.iter()) {
        assert!((p.xi[0] - e[0]).abs() < 1e-12 && (p.xi[1] - e[1]).abs() < 1e-12);
    }
}

#[test]
fn fiber_sample_on_shell_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (name, m) in test_manifolds() {
        let x = random_chart_point(&m, &mut rng);
        for p in m.fiber_sample(&x, 257).unwrap() {
            assert!(
                p.energy.abs() <= 1e-10,
                "{name}: fiber sample off shell: {}",
                p.energy
            );
        }
    }
}

#[test]
fn fiber_sample_gap_bound_large_count() {
    let m = Manifold::flat_torus(2).unwrap();
    let pts = m.fiber_sample(&v2(0.0, 0.0), 10_000).unwrap();
    let mut angles: Vec<f64> = pts.iter().map(|p| p.xi[1].atan2(p.xi[0])).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut max_gap: f64 = 0.0;
    for w in angles.windows(2) {
        max_gap = max_gap.max(w[1] - w[0]);
    }
    max_gap = max_gap.max(angles[0] + std::f64::consts::TAU - angles[angles.len() - 1]);
    assert!(max_gap <= std::f64::consts::TAU / 10_000.0 * (1.0 + 1e-6));
}

#[test]
fn integrable_profile_check_pendulum() {
    let m = Manifold::spherical_pendulum(3.5).unwrap();
    let chk = check_integrable_profile(&m).unwrap();
    // single non-degenerate max of sin r √(3.5 − 2 cos r): at cos r = −0.2374...
    assert!((chk.r_s - 1.8105).abs() < 1e-3, "r_s = {}", chk.r_s);
    assert!(chk.second_derivative < 0.0);
    assert!((chk.ell_s - 1.9367).abs() < 1e-3);
}

#[test]
fn ellipsoid_requires_ordered_axes() {
    assert!(Manifold::triaxial_ellipsoid(1.0, 0.5, 2.0).is_err());
    assert!(Manifold::triaxial_ellipsoid(0.5, 1.0, 2.0).is_ok());
}

#[test]
fn curvature_operator_round_sphere_unit() {
    // on the unit sphere K = 1: R(e_r, v)v = e_r for unit v = e_θ direction
    let m = Manifold::round_sphere(2).unwrap();
    let x = v2(std::f64::consts::FRAC_PI_2, 0.3);
    // unit tangent in θ direction: v = (0, 1/sin r) has |v|_g = 1
    let v = v2(0.0, 1.0 / x[0].sin());
    let op = m.curvature_operator(&x, &v);
    // apply to unit radial vector e_r = (1, 0): expect back (≈1, 0)
    let j = v2(1.0, 0.0);
    let out = &op * &j;
    assert!((out[0] - 1.0).abs() < 1e-6, "K e_r = {out:?}");
    assert!(out[1].abs() < 1e-8);
}

#[test]
fn displacement_uses_nearest_representative() {
    let m = Manifold::flat_torus(2).unwrap();
    let d = m.displacement(&v2(0.9, 0.0), &v2(0.05, 0.0));
    assert!((d[0] - 0.15).abs() < 1e-14);
}

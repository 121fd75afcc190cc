use super::*;
use crate::manifold::Manifold;
use nalgebra::{DMatrix, DVector};

fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

fn torus() -> Manifold {
    Manifold::flat_torus(2).unwrap()
}

fn pendulum() -> Manifold {
    Manifold::spherical_pendulum(3.5).unwrap()
}

/// Test-only oracle: crossings of the transversal through x for a straight
/// line on the unit torus are nearest-approach times to lattice points.
fn lattice_crossing_oracle(theta: f64, window: (f64, f64)) -> Vec<(f64, f64)> {
    let (ct, st) = theta.sin_cos();
    let (ct, st) = (st, ct); // sin_cos returns (sin, cos); want (cos, sin)
    let mut out = Vec::new();
    for p in -7i64..=7 {
        for q in -7i64..=7 {
            let t = p as f64 * ct + q as f64 * st;
            let miss = (-(p as f64) * st + q as f64 * ct).abs();
            if miss < 0.25 && t >= window.0 - 1e-9 && t <= window.1 + 1e-9 {
                out.push((t, miss));
            }
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

#[test]
fn straight_line_on_flat_torus() {
    let m = torus();
    let rho = m.shell_point(&v2(0.0, 0.0), &v2(1.0, 0.0)).unwrap();
    let traj = integrate(&m, &rho, 0.7, &FlowOpts::default()).unwrap();
    let end = traj.phase_point_at(&m, 0.7);
    assert!((end.x[0] - 0.7).abs() < 1e-10);
    assert!(end.x[1].abs() < 1e-12);
    assert!((end.xi[0] - 1.0).abs() < 1e-12 && end.xi[1].abs() < 1e-12);
}

#[test]
fn sphere_great_circle_returns_at_two_pi() {
    let m = Manifold::round_sphere(2).unwrap();
    let x = v2(std::f64::consts::FRAC_PI_2, 0.3);
    for dir in [v2(0.0, 1.0), v2(0.5, 0.9), v2(-0.3, 1.2)] {
        let rho = m.shell_point(&x, &dir).unwrap();
        let traj = integrate(&m, &rho, std::f64::consts::TAU, &FlowOpts::default()).unwrap();
        let end = traj.phase_point_at(&m, std::f64::consts::TAU);
        let d = m.sasaki_distance(&rho, &end);
        assert!(d.value < 1e-8, "return distance {} for dir {dir:?}", d.value);
    }
}

#[test]
fn reversibility_within_1e8() {
    for m in [torus(), pendulum()] {
        let x = v2(std::f64::consts::FRAC_PI_2, 0.2);
        let x = if matches!(m.kind, crate::manifold::ManifoldKind::FlatTorus { .. }) {
            v2(0.1, 0.2)
        } else {
            x
        };
        let rho = m.shell_point(&x, &v2(0.6, 0.8)).unwrap();
        let fwd = integrate(&m, &rho, 10.0, &FlowOpts::default()).unwrap();
        let mid = fwd.phase_point_at(&m, 10.0);
        let back = integrate(&m, &mid, -10.0, &FlowOpts::default()).unwrap();
        let end = back.phase_point_at(&m, -10.0);
        let d = m.sasaki_distance(&rho, &end);
        assert!(d.value < 1e-8, "reversibility defect {}", d.value);
    }
}

#[test]
fn energy_drift_bounds() {
    let m = pendulum();
    let rho = m
        .shell_point(&v2(std::f64::consts::FRAC_PI_2, 0.0), &v2(0.4, 1.0))
        .unwrap();
    let opts = FlowOpts::default();
    let traj = integrate(&m, &rho, 10.0, &opts).unwrap();
    let mut drift10: f64 = 0.0;
    for k in 0..=1000 {
        let t = 10.0 * k as f64 / 1000.0;
        let p = traj.phase_point_at(&m, t);
        drift10 = drift10.max((p.energy - rho.energy).abs());
    }
    assert!(drift10 <= 1e-9, "drift over |t|<=10: {drift10}");
    let traj100 = integrate(&m, &rho, 100.0, &opts).unwrap();
    let mut drift100: f64 = 0.0;
    for k in 0..=2000 {
        let t = 100.0 * k as f64 / 2000.0;
        let p = traj100.phase_point_at(&m, t);
        drift100 = drift100.max((p.energy - rho.energy).abs());
    }
    assert!(drift100 <= 1e-7, "drift over |t|<=100: {drift100}");
}

#[test]
fn group_law_composition() {
    let m = pendulum();
    let rho = m
        .shell_point(&v2(std::f64::consts::FRAC_PI_2, 0.1), &v2(0.7, 0.7))
        .unwrap();
    let opts = FlowOpts::default();
    let s = 3.3;
    let t = 8.1;
    let first = integrate(&m, &rho, s, &opts).unwrap();
    let mid = first.phase_point_at(&m, s);
    let second = integrate(&m, &mid, t - s, &opts).unwrap();
    let via = second.phase_point_at(&m, t - s);
    let direct = integrate(&m, &rho, t, &opts).unwrap().phase_point_at(&m, t);
    let d = m.sasaki_distance(&via, &direct);
    assert!(d.value < 1e-8, "group law defect {}", d.value);
}

#[test]
fn horizon_guard() {
    let m = torus();
    let rho = m.shell_point(&v2(0.0, 0.0), &v2(1.0, 0.0)).unwrap();
    assert!(integrate(&m, &rho, 2e3, &FlowOpts::default()).is_err());
}

#[test]
fn variational_identity_at_zero() {
    let m = torus();
    let rho = m.shell_point(&v2(0.0, 0.0), &v2(0.6, 0.8)).unwrap();
    let frame = variational(&m, &rho, &[0.0], &FlowOpts::default()).unwrap();
    assert_eq!(frame.matrices[0], DMatrix::identity(4, 4));
}

#[test]
fn variational_flat_torus_linear_growth() {
    let m = torus();
    let rho = m.shell_point(&v2(0.2, 0.1), &v2(0.6, 0.8)).unwrap();
    let times = [1.0, 3.0, 7.0, 10.0];
    let frame = variational(&m, &rho, &times, &FlowOpts::default()).unwrap();
    for (t, norm) in times.iter().zip(frame.norms()) {
        assert!(norm <= 1.0 + t + 1e-6, "norm {norm} at t={t}");
    }
}

#[test]
fn variational_symplectic_and_unimodular() {
    for m in [torus(), pendulum()] {
        let x = if matches!(m.kind, crate::manifold::ManifoldKind::FlatTorus { .. }) {
            v2(0.1, 0.9)
        } else {
            v2(std::f64::consts::FRAC_PI_2, 0.4)
        };
        let rho = m.shell_point(&x, &v2(0.48, 0.88)).unwrap();
        let frame = variational(&m, &rho, &[2.0, 10.0], &FlowOpts::default()).unwrap();
        assert!(frame.symplectic_defect() <= 1e-6, "symplectic defect {}", frame.symplectic_defect());
        for mat in &frame.matrices {
            assert!((mat.determinant() - 1.0).abs() <= 1e-6);
        }
    }
}

#[test]
fn variational_matches_finite_difference_flow() {
    let m = pendulum();
    let x = v2(std::f64::consts::FRAC_PI_2, 0.7);
    let rho = m.shell_point(&x, &v2(0.6, 1.1)).unwrap();
    let t = 5.0;
    let opts = FlowOpts::default();
    let frame = variational(&m, &rho, &[t], &opts).unwrap();
    let dphi = &frame.matrices[0];
    let eps = 1e-6;
    for j in 0..4 {
        let mut plus = rho.clone();
        let mut minus = rho.clone();
        if j < 2 {
            plus.x[j] += eps;
            minus.x[j] -= eps;
        } else {
            plus.xi[j - 2] += eps;
            minus.xi[j - 2] -= eps;
        }
        // keep the raw (off-shell) perturbation: dφ acts on the full phase space
        let plus = crate::manifold::PhasePoint {
            energy: m.energy(&plus.x, &plus.xi),
            ..plus
        };
        let minus = crate::manifold::PhasePoint {
            energy: m.energy(&minus.x, &minus.xi),
            ..minus
        };
        let fp = integrate(&m, &plus, t, &opts).unwrap().state_at(t);
        let fm = integrate(&m, &minus, t, &opts).unwrap().state_at(t);
        let fd = (fp - fm) / (2.0 * eps);
        let col = dphi.column(j);
        let scale = col.norm().max(1.0);
        assert!(
            (fd - col).norm() / scale <= 1e-4,
            "finite-difference mismatch in column {j}"
        );
    }
}

#[test]
fn lambda_max_flat_torus_bounded() {
    let m = torus();
    let opts = FlowOpts::default();
    let (lm, diag) = lambda_max(&m, &v2(0.0, 0.0), 8, 50.0, &opts).unwrap();
    // linear growth of the flat variational block form: ‖dφ_T‖ ≤ 1 + T/|ξ|,
    // and the sampled shell perturbations reach |ξ| = 0.9
    assert!(
        lm.value <= (1.0 + 50.0 / 0.9_f64).ln() / 50.0 + 1e-9,
        "lambda {}",
        lm.value
    );
    assert!(!diag.growth_rates.is_empty());
}

#[test]
fn lambda_max_floor_flag() {
    let m = torus();
    let mut opts = FlowOpts::default();
    opts.lambda_floor = 0.2; // above the torus growth estimate at this probe time
    let (lm, _) = lambda_max(&m, &v2(0.0, 0.0), 4, 50.0, &opts).unwrap();
    assert!(lm.replaced_zero);
    assert_eq!(lm.value, 0.2);
}

#[test]
fn ehrenfest_direct_substitution() {
    let h = (-2.0_f64).exp();
    assert!((ehrenfest_time(h, 1.0) - 1.0).abs() < 1e-14);
}

#[test]
fn crossing_diagonal_direction() {
    let m = torus();
    let x = v2(0.0, 0.0);
    let rho = m.shell_point(&x, &v2(1.0, 1.0)).unwrap();
    let events = transversal_crossings(&m, &x, &rho, (1.0, 3.0), &FlowOpts::default()).unwrap();
    // lattice oracle: returns at √2 (lattice (1,1)) and 2√2 (lattice (2,2))
    let oracle = lattice_crossing_oracle(std::f64::consts::FRAC_PI_4, (1.0, 3.0));
    assert_eq!(events.len(), oracle.len());
    assert!((events[0].t - std::f64::consts::SQRT_2).abs() < 1e-8);
    assert!(events[0].fiber_distance < 1e-8);
    assert!((events[1].t - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-8);
}

#[test]
fn crossing_axis_direction_window() {
    let m = torus();
    let x = v2(0.0, 0.0);
    let rho = m.shell_point(&x, &v2(1.0, 0.0)).unwrap();
    let events = transversal_crossings(&m, &x, &rho, (1.6, 2.7), &FlowOpts::default()).unwrap();
    assert_eq!(events.len(), 1);
    assert!((events[0].t - 2.0).abs() < 1e-8);
}

#[test]
fn crossing_golden_direction_misses_fiber() {
    let m = torus();
    let x = v2(0.0, 0.0);
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let rho = m.shell_point(&x, &v2(1.0, phi)).unwrap();
    let events = transversal_crossings(&m, &x, &rho, (1.6, 2.7), &FlowOpts::default()).unwrap();
    for e in &events {
        assert!(e.fiber_distance >= 0.01, "unexpected near-return: {e:?}");
    }
}

#[test]
fn crossing_window_preconditions() {
    let m = torus();
    let x = v2(0.0, 0.0);
    let rho = m.shell_point(&x, &v2(1.0, 0.0)).unwrap();
    assert!(transversal_crossings(&m, &x, &rho, (2.0, 1.0), &FlowOpts::default()).is_err());
    assert!(transversal_crossings(&m, &x, &rho, (0.0, 1.0), &FlowOpts::default()).is_err());
}

#[test]
fn crossing_completeness_360_directions() {
    let m = torus();
    let x = v2(0.0, 0.0);
    let opts = FlowOpts::default();
    for k in 0..360 {
        let theta = std::f64::consts::TAU * k as f64 / 360.0;
        let rho = m
            .shell_point(&x, &v2(theta.cos(), theta.sin()))
            .unwrap();
        let events = transversal_crossings(&m, &x, &rho, (1.0, 5.0), &opts).unwrap();
        let oracle = lattice_crossing_oracle(theta, (1.0, 5.0));
        assert_eq!(
            events.len(),
            oracle.len(),
            "direction {k}: got {:?}, oracle {:?}",
            events.iter().map(|e| e.t).collect::<Vec<_>>(),
            oracle
        );
        for (e, (t_o, miss_o)) in events.iter().zip(oracle.iter()) {
            assert!((e.t - t_o).abs() < 1e-8, "direction {k}: time {} vs {}", e.t, t_o);
            assert!((e.base_distance - miss_o).abs() < 1e-8);
        }
    }
}

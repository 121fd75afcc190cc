//! Detection of transversal crossings: times where a flow line re-crosses
//! the hypersurface 𝓛 = {F = 0} through a base point x, with
//! F(y, η) = ⟨exp_x⁻¹(y), η⟩ evaluated on nearest chart representatives.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{integrate_lossy, FlowOpts, Trajectory};
use crate::error::{GeobeamError, Result};
use crate::manifold::{Manifold, PhasePoint};

/// A detected crossing of the transversal surface through x.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossingEvent {
    pub t: f64,
    pub point: PhasePoint,
    /// Sasaki distance from the crossing point to the fiber S*ₓM
    pub fiber_distance: f64,
    /// sign of dF/dt at the crossing
    pub sign: i8,
    /// base distance d_g(y, x) at the crossing
    pub base_distance: f64,
}

/// Sasaki distance from an arbitrary phase point to the fiber S*ₓM
/// (distance to the whole cosphere as a set).
pub fn fiber_distance(m: &Manifold, x: &DVector<f64>, rho: &PhasePoint) -> f64 {
    let base = m.base_distance(x, &rho.x);
    let moved = m.transport_covector(&rho.x, &rho.xi, x);
    let ginv = m.metric_inv(x);
    let norm = (moved.transpose() * &ginv * &moved)[(0, 0)].max(0.0).sqrt();
    let radial = (norm - m.shell_radius(x)).abs();
    (base * base + radial * radial).sqrt()
}

struct FScan<'a> {
    m: &'a Manifold,
    x: &'a DVector<f64>,
    n: usize,
}

impl<'a> FScan<'a> {
    /// F value and the integer representative offsets used (for detecting
    /// branch switches of the periodic chart).
    fn eval(&self, y: &DVector<f64>) -> (f64, Vec<i64>) {
        let n = self.n;
        let pos = y.rows(0, n).into_owned();
        let xi = y.rows(n, n).into_owned();
        let mut disp = &pos - self.x;
        let mut reps = Vec::with_capacity(n);
        for (i, p) in self.m.periods().iter().enumerate() {
            if let Some(period) = p {
                let k = (disp[i] / period).round();
                disp[i] -= period * k;
                reps.push(k as i64);
            } else {
                reps.push(0);
            }
        }
        (disp.dot(&xi), reps)
    }
}

/// Scan a trajectory for transversal crossings within [t0, t1] (0 < t0 < t1
/// along the flow direction). Only events with base distance < inj/2 are
/// valid returns; others are discarded.
pub fn trajectory_crossings(
    m: &Manifold,
    x: &DVector<f64>,
    traj: &Trajectory,
    window: (f64, f64),
    dt_scan: f64,
) -> Vec<CrossingEvent> {
    // window comparisons are inclusive with a 1e-9 tolerance throughout
    const WINDOW_EPS: f64 = 1e-9;
    let (w0, w1) = window;
    let dir = traj.t_final.signum();
    let lo = w0.min(w1) - WINDOW_EPS;
    let hi = w0.max(w1) + WINDOW_EPS;
    let reach = traj.reached.abs();
    let scan_lo = lo.max(0.0);
    let scan_hi = hi.min(reach);
    if scan_hi <= scan_lo {
        return Vec::new();
    }
    let f = FScan { m, x, n: traj.dim() };
    let steps = ((scan_hi - scan_lo) / dt_scan).ceil() as usize;
    let steps = steps.max(2);
    let mut events = Vec::new();
    let mut prev_t = scan_lo;
    let (mut prev_f, mut prev_rep) = f.eval(&traj.state_at(dir * prev_t));
    let mut samples: Vec<(f64, f64, Vec<i64>)> = Vec::with_capacity(steps + 1);
    samples.push((prev_t, prev_f, prev_rep.clone()));
    for k in 1..=steps {
        let t = scan_lo + (scan_hi - scan_lo) * k as f64 / steps as f64;
        let (fv, rep) = f.eval(&traj.state_at(dir * t));
        samples.push((t, fv, rep.clone()));
        if rep == prev_rep && prev_f.signum() != fv.signum() && prev_f != 0.0 {
            if let Some(ev) = refine(m, x, traj, &f, dir, prev_t, t) {
                events.push(ev);
            }
        }
        prev_t = t;
        prev_f = fv;
        prev_rep = rep;
    }
    // dip refinement: local |F| minima that stay one-signed may hide a pair of
    // crossings when dt_scan is coarse; halve locally up to 4 times
    for w in samples.windows(3) {
        let (ta, fa, ra) = (&w[0].0, w[0].1, &w[0].2);
        let (_tb, fb, rb) = (&w[1].0, w[1].1, &w[1].2);
        let (tc, fc, rc) = (&w[2].0, w[2].1, &w[2].2);
        if ra != rb || rb != rc {
            continue;
        }
        if fa.signum() == fb.signum() && fb.signum() == fc.signum() && fb.abs() < fa.abs() && fb.abs() < fc.abs() {
            // suspicious dip: rescan the bracket at finer resolution
            let mut sub_dt = (tc - ta) / 2.0;
            'halving: for _ in 0..4 {
                sub_dt *= 0.5;
                let sub_steps = ((tc - ta) / sub_dt).ceil() as usize;
                let mut pt = *ta;
                let (mut pf, mut pr) = f.eval(&traj.state_at(dir * pt));
                for k in 1..=sub_steps {
                    let t = ta + (tc - ta) * k as f64 / sub_steps as f64;
                    let (fv, rep) = f.eval(&traj.state_at(dir * t));
                    if rep == pr && pf.signum() != fv.signum() && pf != 0.0 {
                        if let Some(ev) = refine(m, x, traj, &f, dir, pt, t) {
                            events.push(ev);
                        }
                        if let Some(ev) = refine(m, x, traj, &f, dir, t, *tc) {
                            events.push(ev);
                        }
                        break 'halving;
                    }
                    pt = t;
                    pf = fv;
                    pr = rep;
                }
            }
        }
    }
    events.sort_by(|a, b| a.t.abs().partial_cmp(&b.t.abs()).unwrap());
    events.dedup_by(|a, b| (a.t - b.t).abs() < 1e-9);
    events
}

fn refine(
    m: &Manifold,
    x: &DVector<f64>,
    traj: &Trajectory,
    f: &FScan<'_>,
    dir: f64,
    mut ta: f64,
    mut tb: f64,
) -> Option<CrossingEvent> {
    let (mut fa, _) = f.eval(&traj.state_at(dir * ta));
    for _ in 0..200 {
        let tm = 0.5 * (ta + tb);
        let (fm, _) = f.eval(&traj.state_at(dir * tm));
        if fm.abs() <= 1e-10 && (tb - ta) < 1e-10 {
            break;
        }
        if fa.signum() == fm.signum() {
            ta = tm;
            fa = fm;
        } else {
            tb = tm;
        }
        if tb - ta < 1e-14 {
            break;
        }
    }
    let t_cross = 0.5 * (ta + tb);
    let point = traj.phase_point_at(m, dir * t_cross);
    let base = m.base_distance(x, &point.x);
    if base >= 0.5 * m.injectivity_lower() {
        return None;
    }
    // sign of dF/dt from a small secant
    let h = 1e-7;
    let (f_after, _) = f.eval(&traj.state_at(dir * (t_cross + h)));
    let (f_before, _) = f.eval(&traj.state_at(dir * (t_cross - h)));
    let sign = if f_after - f_before >= 0.0 { 1 } else { -1 };
    Some(CrossingEvent {
        t: dir * t_cross,
        fiber_distance: fiber_distance(m, x, &point),
        base_distance: base,
        point,
        sign,
    })
}

/// Integrate from ρ and report all transversal crossings with times in
/// [t0, T], 0 < t0 < T.
pub fn transversal_crossings(
    m: &Manifold,
    x: &DVector<f64>,
    rho: &PhasePoint,
    window: (f64, f64),
    opts: &FlowOpts,
) -> Result<Vec<CrossingEvent>> {
    let (t0, t1) = window;
    if !(0.0 < t0 && t0 < t1) {
        return Err(GeobeamError::Config(format!(
            "crossing window must satisfy 0 < t0 < T, got [{t0}, {t1}]"
        )));
    }
    if rho.energy.abs() > 1e-6 {
        return Err(GeobeamError::Domain(format!(
            "seed is off shell: |p| = {}",
            rho.energy.abs()
        )));
    }
    // integrate slightly past T so the inclusive window tolerance is covered
    let t_end = (t1 + 1e-6).min(opts.horizon);
    let traj = integrate_lossy(m, rho, t_end, opts)?;
    Ok(trajectory_crossings(m, x, &traj, window, opts.dt_scan))
}

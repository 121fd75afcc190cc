//! Hamiltonian flow φ_t = exp(tH_p): adaptive embedded Runge–Kutta
//! integration with per-step energy renormalization and dense output,
//! the linearized flow, transversal-crossing detection, and the maximal
//! expansion rate / Ehrenfest time.

mod crossing;
mod lambda;
mod variational;

pub use crossing::{fiber_distance, transversal_crossings, trajectory_crossings, CrossingEvent};
pub use lambda::{ehrenfest_time, lambda_max, LambdaDiagnostics, LambdaMax};
pub use variational::{variational, VariationalFrame};

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{GeobeamError, Result};
use crate::manifold::{Manifold, PhasePoint};

/// Integrator and scan options.
#[derive(Debug, Clone, Serialize)]
pub struct FlowOpts {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// hard cap on |t_final|
    pub horizon: f64,
    pub max_step: f64,
    /// event-scan step; tube machinery overrides with min(dt_scan, R/4)
    pub dt_scan: f64,
    /// floor used when the measured expansion rate is indistinguishable from zero
    pub lambda_floor: f64,
}

impl Default for FlowOpts {
    fn default() -> Self {
        FlowOpts {
            abs_tol: 1e-11,
            rel_tol: 1e-11,
            horizon: 1e3,
            max_step: 0.2,
            dt_scan: 0.01,
            lambda_floor: 1e-3,
        }
    }
}

/// One accepted integrator step with its dense-output polynomial.
#[derive(Debug, Clone)]
pub struct Step {
    pub t0: f64,
    pub t1: f64,
    rcont: [DVector<f64>; 5],
}

impl Step {
    /// Evaluate the quartic dense-output interpolant inside this step.
    pub fn interpolate(&self, t: f64) -> DVector<f64> {
        let h = self.t1 - self.t0;
        let theta = if h == 0.0 { 0.0 } else { (t - self.t0) / h };
        let th1 = 1.0 - theta;
        &self.rcont[0]
            + theta
                * (&self.rcont[1]
                    + th1 * (&self.rcont[2] + theta * (&self.rcont[3] + th1 * &self.rcont[4])))
    }
}

/// A solved flow line: seed, accepted steps (dense output), and node states.
/// Positions are kept unwrapped along the trajectory; exported phase points
/// are wrapped into the fundamental domain.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub seed: PhasePoint,
    pub t_final: f64,
    /// time actually reached (|reached| ≤ |t_final|)
    pub reached: f64,
    /// set when integration stopped early (step-size underflow)
    pub truncated: Option<String>,
    pub steps: Vec<Step>,
    dim: usize,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Raw (unwrapped) state [x, ξ] at time t, clamped to the reached span.
    pub fn state_at(&self, t: f64) -> DVector<f64> {
        if self.steps.is_empty() {
            let mut y = DVector::zeros(2 * self.dim);
            y.rows_mut(0, self.dim).copy_from(&self.seed.x);
            y.rows_mut(self.dim, self.dim).copy_from(&self.seed.xi);
            return y;
        }
        let forward = self.t_final >= 0.0;
        let t = if forward {
            t.clamp(0.0, self.reached)
        } else {
            t.clamp(self.reached, 0.0)
        };
        // binary search for the step containing t
        let mut lo = 0usize;
        let mut hi = self.steps.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let s = &self.steps[mid];
            let inside = if forward { t <= s.t1 } else { t >= s.t1 };
            if inside {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        self.steps[lo].interpolate(t)
    }

    /// Wrapped phase point at time t. The energy renormalization applied at
    /// each accepted step is extended to dense-output samples: the covector
    /// is projected back to the seed's energy shell (a positive rescaling,
    /// which leaves transversal-crossing zeros untouched).
    pub fn phase_point_at(&self, m: &Manifold, t: f64) -> PhasePoint {
        let y = self.state_at(t);
        let x = y.rows(0, self.dim).into_owned();
        let xi_raw = y.rows(self.dim, self.dim).into_owned();
        let xw = m.wrap_position(&x);
        let xi = m.project_to_energy(&xw, &xi_raw, self.seed.energy);
        let energy = m.energy(&xw, &xi);
        PhasePoint { x: xw, xi, energy }
    }

    /// Export as CSV rows: t, x…, ξ…, p.
    pub fn to_csv(&self, m: &Manifold, dt: f64) -> String {
        let mut out = String::new();
        let n = self.dim;
        out.push_str("t");
        for i in 0..n {
            out.push_str(&format!(",x{i}"));
        }
        for i in 0..n {
            out.push_str(&format!(",xi{i}"));
        }
        out.push_str(",p\n");
        let span = self.reached;
        let count = (span.abs() / dt).ceil() as usize;
        for k in 0..=count {
            let t = span * k as f64 / count.max(1) as f64;
            let p = self.phase_point_at(m, t);
            out.push_str(&format!("{t:.12e}"));
            for i in 0..n {
                out.push_str(&format!(",{:.12e}", p.x[i]));
            }
            for i in 0..n {
                out.push_str(&format!(",{:.12e}", p.xi[i]));
            }
            out.push_str(&format!(",{:.12e}\n", p.energy));
        }
        out
    }
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Right-hand side abstraction: phase field, optionally augmented.
pub(crate) trait Rhs {
    fn eval(&self, y: &DVector<f64>, dy: &mut DVector<f64>) -> std::result::Result<(), String>;
    /// Renormalize the state after an accepted step (energy projection).
    fn project(&self, y: &mut DVector<f64>);
}

pub(crate) struct HamiltonianRhs<'a> {
    pub m: &'a Manifold,
    pub n: usize,
    pub target_energy: f64,
}

impl<'a> HamiltonianRhs<'a> {
    fn chart_ok(&self, x: &DVector<f64>) -> std::result::Result<(), String> {
        let wrapped = self.m.wrap_position(x);
        self.m.check_chart(&wrapped).map_err(|e| e.to_string())
    }
}

impl<'a> Rhs for HamiltonianRhs<'a> {
    fn eval(&self, y: &DVector<f64>, dy: &mut DVector<f64>) -> std::result::Result<(), String> {
        let n = self.n;
        let x = y.rows(0, n).into_owned();
        self.chart_ok(&x)?;
        let xw = self.m.wrap_position(&x);
        let xi = y.rows(n, n).into_owned();
        let (xd, xid) = self.m.hamiltonian_field(&xw, &xi);
        dy.rows_mut(0, n).copy_from(&xd);
        dy.rows_mut(n, n).copy_from(&xid);
        Ok(())
    }

    fn project(&self, y: &mut DVector<f64>) {
        let n = self.n;
        let x = self.m.wrap_position(&y.rows(0, n).into_owned());
        let xi = y.rows(n, n).into_owned();
        let fixed = self.m.project_to_energy(&x, &xi, self.target_energy);
        y.rows_mut(n, n).copy_from(&fixed);
    }
}

/// Core adaptive DP5(4) loop with dense output. Returns the step list and
/// either the reached time (== t_final) or a truncation message.
pub(crate) fn dp54(
    rhs: &dyn Rhs,
    y0: DVector<f64>,
    t_final: f64,
    opts: &FlowOpts,
) -> (Vec<Step>, f64, Option<String>) {
    let mut steps: Vec<Step> = Vec::new();
    if t_final == 0.0 {
        return (steps, 0.0, None);
    }
    let dir = t_final.signum();
    let dim = y0.len();
    let mut t = 0.0_f64;
    let mut y = y0;
    let mut k1 = DVector::zeros(dim);
    if rhs.eval(&y, &mut k1).is_err() {
        return (steps, 0.0, Some("field evaluation failed at the seed".into()));
    }
    let mut h = (opts.max_step * 0.1).min(t_final.abs()) * dir;
    let h_min = 1e-14 * t_final.abs().max(1.0);
    let mut stages: Vec<DVector<f64>> = (0..7).map(|_| DVector::zeros(dim)).collect();
    loop {
        if (t_final - t) * dir <= 1e-15 * t_final.abs().max(1.0) {
            return (steps, t_final, None);
        }
        if h.abs() > (t_final - t).abs() {
            h = t_final - t;
        }
        if h.abs() < h_min {
            return (
                steps,
                t,
                Some(format!("step-size underflow at t = {t} (pole guard or stiffness)")),
            );
        }
        stages[0].copy_from(&k1);
        let mut failed_eval = false;
        for s in 0..6 {
            let mut ys = y.clone();
            for (j, stage) in stages.iter().take(s + 1).enumerate() {
                if A[s][j] != 0.0 {
                    ys.axpy(h * A[s][j], stage, 1.0);
                }
            }
            let _ = C; // stage times unused: autonomous field
            let (head, tail) = stages.split_at_mut(s + 1);
            let _ = head;
            if rhs.eval(&ys, &mut tail[0]).is_err() {
                failed_eval = true;
                break;
            }
        }
        if failed_eval {
            h *= 0.3;
            continue;
        }
        // 5th-order solution is stage row 6 of A applied to k1..k6 (FSAL)
        let mut y1 = y.clone();
        for (j, stage) in stages.iter().take(6).enumerate() {
            if A[5][j] != 0.0 {
                y1.axpy(h * A[5][j], stage, 1.0);
            }
        }
        // k7 = f(y1)
        let mut k7 = DVector::zeros(dim);
        if rhs.eval(&y1, &mut k7).is_err() {
            h *= 0.3;
            continue;
        }
        stages[6] = k7;
        // error estimate
        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (s, stage) in stages.iter().enumerate() {
                if E[s] != 0.0 {
                    e += E[s] * stage[i];
                }
            }
            e *= h;
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y1[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / dim as f64).sqrt();
        if err <= 1.0 {
            // accept: build dense output
            let dy = &y1 - &y;
            let rcont0 = y.clone();
            let rcont1 = dy.clone();
            let rcont2 = &stages[0] * h - &dy;
            let rcont3 = &dy - &stages[6] * h - &rcont2;
            let mut rcont4 = DVector::zeros(dim);
            for (s, stage) in stages.iter().enumerate() {
                if D[s] != 0.0 {
                    rcont4.axpy(D[s] * h, stage, 1.0);
                }
            }
            let mut y_next = y1;
            rhs.project(&mut y_next);
            steps.push(Step {
                t0: t,
                t1: t + h,
                rcont: [rcont0, rcont1, rcont2, rcont3, rcont4],
            });
            t += h;
            y = y_next;
            // FSAL stage must be refreshed after projection
            if rhs.eval(&y, &mut k1).is_err() {
                return (steps, t, Some(format!("field evaluation failed at t = {t}")));
            }
            let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            h = (h * factor).clamp(-opts.max_step, opts.max_step);
            if h == 0.0 {
                h = dir * opts.max_step;
            }
        } else {
            let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= factor;
        }
    }
}

/// Integrate the Hamiltonian flow from ρ for time t_final (either sign).
/// Fails if the seed is off its declared shell or the horizon is exceeded.
pub fn integrate(m: &Manifold, rho: &PhasePoint, t_final: f64, opts: &FlowOpts) -> Result<Trajectory> {
    let traj = integrate_lossy(m, rho, t_final, opts)?;
    if let Some(msg) = &traj.truncated {
        return Err(GeobeamError::Integration(format!(
            "{msg}; partial trajectory reaches t = {}",
            traj.reached
        )));
    }
    Ok(traj)
}

/// Same as [`integrate`] but returns the partial trajectory on early
/// termination instead of failing.
pub fn integrate_lossy(
    m: &Manifold,
    rho: &PhasePoint,
    t_final: f64,
    opts: &FlowOpts,
) -> Result<Trajectory> {
    if t_final.abs() > opts.horizon {
        return Err(GeobeamError::Integration(format!(
            "|t_final| = {} exceeds horizon {}",
            t_final.abs(),
            opts.horizon
        )));
    }
    m.check_chart(&rho.x)?;
    let n = m.dim();
    let mut y0 = DVector::zeros(2 * n);
    y0.rows_mut(0, n).copy_from(&rho.x);
    y0.rows_mut(n, n).copy_from(&rho.xi);
    let rhs = HamiltonianRhs {
        m,
        n,
        target_energy: rho.energy,
    };
    let (steps, reached, truncated) = dp54(&rhs, y0, t_final, opts);
    Ok(Trajectory {
        seed: rho.clone(),
        t_final,
        reached,
        truncated,
        steps,
        dim: n,
    })
}

#[cfg(test)]
mod tests;

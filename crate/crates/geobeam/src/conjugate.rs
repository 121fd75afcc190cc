//! Jacobi fields along geodesics, conjugate-point detection with
//! multiplicity, and the distance test for the conjugate sets 𝒞ₓ^{r,t}.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeobeamError, Result};
use crate::flow::{dp54, FlowOpts, HamiltonianRhs, Rhs};
use crate::manifold::{Manifold, PhasePoint};

/// Relative threshold separating true rank drops from integrator noise.
const MULTIPLICITY_REL_TOL: f64 = 1e-8;

/// A detected conjugate time with its multiplicity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConjugateTime {
    pub t: f64,
    pub multiplicity: usize,
}

/// The (n−1) normal Jacobi fields J_b with J_b(0) = 0 and J_b′(0) an
/// orthonormal normal frame, integrated in a parallel frame along the
/// geodesic from (x, ξ).
#[derive(Debug, Clone)]
pub struct JacobiProfile {
    pub seed: PhasePoint,
    pub horizon: f64,
    /// sample times of the stored singular values
    pub times: Vec<f64>,
    /// singular values of the (n−1)×(n−1) Jacobi matrix per time node
    pub singular_values: Vec<Vec<f64>>,
    pub conjugate_times: Vec<ConjugateTime>,
    /// geodesic base positions (chart, wrapped) at the sample times
    pub positions: Vec<DVector<f64>>,
    dim: usize,
    steps: Vec<crate::flow::Step>,
    state_len: usize,
}

impl JacobiProfile {
    fn raw_state(&self, t: f64) -> DVector<f64> {
        debug_assert!(!self.steps.is_empty());
        let t = t.clamp(0.0, self.horizon);
        let mut lo = 0usize;
        let mut hi = self.steps.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if t <= self.steps[mid].t1 {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        self.steps[lo].interpolate(t)
    }

    fn jacobi_matrix(&self, t: f64) -> DMatrix<f64> {
        let n = self.dim;
        let k = n - 1;
        let y = self.raw_state(t);
        let off = 2 * n + n * k;
        let mut s = DMatrix::zeros(k, k);
        for col in 0..k {
            for row in 0..k {
                s[(row, col)] = y[off + col * k + row];
            }
        }
        s
    }

    /// ‖J(t)‖ for the field with J(0) = 0, J′(0) = Σ_b c_b e_b.
    pub fn field_norm(&self, t: f64, coeffs: &DVector<f64>) -> f64 {
        (self.jacobi_matrix(t) * coeffs).norm()
    }

    /// Geodesic position at time t (wrapped chart point).
    pub fn position(&self, m: &Manifold, t: f64) -> DVector<f64> {
        let y = self.raw_state(t);
        m.wrap_position(&y.rows(0, self.dim).into_owned())
    }

    /// Components of a chart normal vector v in the initial normal frame.
    pub fn frame_coefficients(&self, m: &Manifold, v: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let k = n - 1;
        let y = self.raw_state(0.0);
        let g = m.metric_only().metric(&self.seed.x);
        let mut out = DVector::zeros(k);
        for b in 0..k {
            let e = y.rows(2 * n + b * n, n).into_owned();
            out[b] = (v.transpose() * &g * &e)[(0, 0)];
        }
        out
    }
}

struct JacobiRhs<'a> {
    base: HamiltonianRhs<'a>,
    n: usize,
}

impl<'a> Rhs for JacobiRhs<'a> {
    fn eval(&self, y: &DVector<f64>, dy: &mut DVector<f64>) -> std::result::Result<(), String> {
        let n = self.n;
        let k = n - 1;
        let m = self.base.m;
        let z = y.rows(0, 2 * n).into_owned();
        let mut fz = DVector::zeros(2 * n);
        self.base.eval(&z, &mut fz)?;
        dy.rows_mut(0, 2 * n).copy_from(&fz);
        let x = m.wrap_position(&y.rows(0, n).into_owned());
        let gamma = m.christoffel(&x);
        let xdot = fz.rows(0, n).into_owned();
        // parallel transport of the frame: ė^i = −Γ^i_{jk} ẋ^j e^k
        for b in 0..k {
            let e = y.rows(2 * n + b * n, n).into_owned();
            let mut ed = DVector::zeros(n);
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    for l in 0..n {
                        s -= gamma[i][(j, l)] * xdot[j] * e[l];
                    }
                }
                ed[i] = s;
            }
            dy.rows_mut(2 * n + b * n, n).copy_from(&ed);
        }
        // curvature in the frame: K_{ab} = g(R(e_b, γ̇)γ̇, e_a)
        let op = m.curvature_operator(&x, &xdot);
        let g = m.metric(&x);
        let mut kmat = DMatrix::zeros(k, k);
        for b in 0..k {
            let e_b = y.rows(2 * n + b * n, n).into_owned();
            let re = &op * &e_b;
            for a in 0..k {
                let e_a = y.rows(2 * n + a * n, n).into_owned();
                kmat[(a, b)] = (e_a.transpose() * &g * &re)[(0, 0)];
            }
        }
        // S″ = −K S
        let off_s = 2 * n + n * k;
        let off_sd = off_s + k * k;
        for col in 0..k {
            let sd = y.rows(off_sd + col * k, k).into_owned();
            dy.rows_mut(off_s + col * k, k).copy_from(&sd);
            let s = y.rows(off_s + col * k, k).into_owned();
            let acc = -(&kmat * &s);
            dy.rows_mut(off_sd + col * k, k).copy_from(&acc);
        }
        Ok(())
    }

    fn project(&self, y: &mut DVector<f64>) {
        let n = self.n;
        let mut z = y.rows(0, 2 * n).into_owned();
        self.base.project(&mut z);
        y.rows_mut(0, 2 * n).copy_from(&z);
    }
}

/// Integrate the normal Jacobi fields along the geodesic from x in covector
/// direction ξ up to time T; detect conjugate times with multiplicity.
pub fn jacobi_profile(
    m: &Manifold,
    x: &DVector<f64>,
    xi: &DVector<f64>,
    t_final: f64,
    opts: &FlowOpts,
) -> Result<JacobiProfile> {
    if t_final <= 0.0 {
        return Err(GeobeamError::Config("jacobi_profile needs T > 0".into()));
    }
    let metric = m.metric_only();
    let n = metric.dim();
    let k = n - 1;
    let rho = metric.shell_point(x, xi)?;
    // initial orthonormal normal frame by Gram–Schmidt against γ̇(0)
    let g = metric.metric(&rho.x);
    let gdot = metric.metric_inv(&rho.x) * &rho.xi;
    let mut frame: Vec<DVector<f64>> = Vec::with_capacity(k);
    let inner = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
    let mut cand = 0usize;
    while frame.len() < k && cand < n {
        let mut v = DVector::zeros(n);
        v[cand] = 1.0;
        cand += 1;
        let mut w = v.clone();
        w -= &gdot * (inner(&v, &gdot) / inner(&gdot, &gdot));
        for e in &frame {
            w -= e * inner(&w, e);
        }
        let norm = inner(&w, &w).sqrt();
        if norm > 1e-8 {
            frame.push(w / norm);
        }
    }
    if frame.len() < k {
        return Err(GeobeamError::Numeric("failed to build normal frame".into()));
    }
    let state_len = 2 * n + n * k + 2 * k * k;
    let mut y0 = DVector::zeros(state_len);
    y0.rows_mut(0, n).copy_from(&rho.x);
    y0.rows_mut(n, n).copy_from(&rho.xi);
    for (b, e) in frame.iter().enumerate() {
        y0.rows_mut(2 * n + b * n, n).copy_from(e);
    }
    // S(0) = 0, S′(0) = I
    let off_sd = 2 * n + n * k + k * k;
    for i in 0..k {
        y0[off_sd + i * k + i] = 1.0;
    }
    let rhs = JacobiRhs {
        base: HamiltonianRhs {
            m: &metric,
            n,
            target_energy: rho.energy,
        },
        n,
    };
    let (steps, reached, truncated) = dp54(&rhs, y0, t_final, opts);
    if let Some(msg) = truncated {
        return Err(GeobeamError::Integration(format!(
            "jacobi integration stopped at t = {reached}: {msg}"
        )));
    }
    let mut profile = JacobiProfile {
        seed: rho,
        horizon: t_final,
        times: vec![],
        singular_values: vec![],
        conjugate_times: vec![],
        positions: vec![],
        dim: n,
        steps,
        state_len,
    };
    let _ = profile.state_len;
    detect_conjugate_times(m, &mut profile, opts);
    Ok(profile)
}

fn svals(s: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = s.clone().svd(false, false).singular_values.iter().cloned().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn detect_conjugate_times(m: &Manifold, profile: &mut JacobiProfile, opts: &FlowOpts) {
    let dt = opts.dt_scan.min(0.01);
    let count = (profile.horizon / dt).ceil() as usize;
    let mut scale: f64 = 0.0;
    let mut prev_det = 0.0_f64;
    let mut prev_t = 0.0_f64;
    let mut prev_smin = 0.0_f64;
    let mut dip_candidate: Option<(f64, f64)> = None;
    for kk in 0..=count {
        let t = profile.horizon * kk as f64 / count as f64;
        let s = profile.jacobi_matrix(t);
        let sv = svals(&s);
        let smax = *sv.last().unwrap();
        let smin = sv[0];
        scale = scale.max(smax);
        profile.times.push(t);
        profile.positions.push(profile.position(m, t));
        profile.singular_values.push(sv);
        let det = s.determinant();
        if kk > 0 && t > 1e-9 {
            if prev_det != 0.0 && prev_det.signum() != det.signum() && prev_t > 1e-9 {
                if let Some(ct) = refine_zero(profile, prev_t, t, scale) {
                    profile.conjugate_times.push(ct);
                }
            } else if let Some((tm, fm)) = dip_candidate {
                // one-signed dip: possible even-multiplicity touch
                if smin > fm && prev_smin > fm && fm < 1e-5 * scale.max(1e-300) {
                    if let Some(ct) = refine_dip(profile, tm - dt, tm + dt, scale) {
                        profile.conjugate_times.push(ct);
                    }
                    dip_candidate = None;
                }
            }
        }
        if kk > 0 && smin < prev_smin {
            dip_candidate = Some((t, smin));
        }
        prev_det = det;
        prev_t = t;
        prev_smin = smin;
    }
    profile
        .conjugate_times
        .sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    profile.conjugate_times.dedup_by(|a, b| (a.t - b.t).abs() < 1e-7);
}

fn multiplicity_at(profile: &JacobiProfile, t: f64, scale: f64) -> usize {
    let sv = svals(&profile.jacobi_matrix(t));
    sv.iter()
        .filter(|s| **s < MULTIPLICITY_REL_TOL * scale.max(1e-300))
        .count()
}

fn refine_zero(profile: &JacobiProfile, mut ta: f64, mut tb: f64, scale: f64) -> Option<ConjugateTime> {
    let det_at = |t: f64| profile.jacobi_matrix(t).determinant();
    let mut fa = det_at(ta);
    for _ in 0..120 {
        let tm = 0.5 * (ta + tb);
        let fm = det_at(tm);
        if fa.signum() == fm.signum() {
            ta = tm;
            fa = fm;
        } else {
            tb = tm;
        }
        if tb - ta < 1e-12 {
            break;
        }
    }
    let t = 0.5 * (ta + tb);
    let mult = multiplicity_at(profile, t, scale).max(1);
    Some(ConjugateTime { t, multiplicity: mult })
}

fn refine_dip(profile: &JacobiProfile, mut ta: f64, mut tb: f64, scale: f64) -> Option<ConjugateTime> {
    // golden-section minimization of σ_min
    let smin_at = |t: f64| *svals(&profile.jacobi_matrix(t)).first().unwrap();
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = tb - phi * (tb - ta);
    let mut d = ta + phi * (tb - ta);
    let mut fc = smin_at(c);
    let mut fd = smin_at(d);
    for _ in 0..80 {
        if fc < fd {
            tb = d;
            d = c;
            fd = fc;
            c = tb - phi * (tb - ta);
            fc = smin_at(c);
        } else {
            ta = c;
            c = d;
            fc = fd;
            d = ta + phi * (tb - ta);
            fd = smin_at(d);
        }
        if tb - ta < 1e-12 {
            break;
        }
    }
    let t = 0.5 * (ta + tb);
    let mult = multiplicity_at(profile, t, scale);
    if mult == 0 {
        return None;
    }
    Some(ConjugateTime { t, multiplicity: mult })
}

/// Witness for a positive conjugate-set membership test.
#[derive(Debug, Clone, Serialize)]
pub struct ConjugateWitness {
    pub contributing_times: Vec<ConjugateTime>,
    pub total_multiplicity: usize,
}

/// True iff the conjugate multiplicities summed over times in (t−r, t+r)
/// reach n−1.
pub fn in_conjugate_set(profile: &JacobiProfile, t: f64, r: f64) -> Result<(bool, ConjugateWitness)> {
    if !(0.0 < r && r < t && t <= profile.horizon + 1e-12) {
        return Err(GeobeamError::Config(format!(
            "in_conjugate_set needs 0 < r < t <= horizon, got r={r}, t={t}"
        )));
    }
    let needed = profile.dim - 1;
    let contributing: Vec<ConjugateTime> = profile
        .conjugate_times
        .iter()
        .filter(|c| c.t > t - r && c.t < t + r)
        .cloned()
        .collect();
    let total: usize = contributing.iter().map(|c| c.multiplicity).sum();
    Ok((
        total >= needed,
        ConjugateWitness {
            contributing_times: contributing,
            total_multiplicity: total,
        },
    ))
}

/// One failing direction in a hypothesis check.
#[derive(Debug, Clone, Serialize)]
pub struct NoConjWitness {
    pub direction_index: usize,
    pub t: f64,
    pub r_t: f64,
    pub endpoint_distance: f64,
    pub total_multiplicity: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoConjReport {
    pub a: f64,
    pub direction_count: usize,
    pub per_t: Vec<NoConjEntry>,
    /// angular sampling resolution note
    pub resolution: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NoConjEntry {
    pub t: f64,
    pub r_t: f64,
    pub pass: bool,
    pub witnesses: Vec<NoConjWitness>,
}

impl NoConjReport {
    pub fn all_pass(&self) -> bool {
        self.per_t.iter().all(|e| e.pass)
    }
}

/// Check the hypothesis inf d(x, 𝒞ₓ^{r_t,t}) ≥ r_t with r_t = e^{−at}/a by
/// sampling geodesic directions from x: a direction fails at t when its
/// endpoint carries n−1 conjugate points in the window and lies within r_t
/// of x.
pub fn noconj_hypothesis_check(
    m: &Manifold,
    x: &DVector<f64>,
    a: f64,
    t_grid: &[f64],
    direction_count: usize,
    opts: &FlowOpts,
) -> Result<NoConjReport> {
    if a <= 0.0 {
        return Err(GeobeamError::Config("decay rate a must be positive".into()));
    }
    let metric = m.metric_only();
    let t_max = t_grid.iter().cloned().fold(0.0_f64, f64::max);
    let r_max = (-a * t_grid[0]).exp() / a;
    let horizon = t_max + r_max + 0.1;
    let dirs = metric.fiber_sample(x, direction_count)?;
    let profiles: Vec<Result<JacobiProfile>> = dirs
        .par_iter()
        .map(|d| jacobi_profile(&metric, x, &d.xi, horizon, opts))
        .collect();
    let mut per_t = Vec::new();
    for &t in t_grid {
        let r_t = (-a * t).exp() / a;
        let mut witnesses = Vec::new();
        for (idx, prof) in profiles.iter().enumerate() {
            let prof = match prof {
                Ok(p) => p,
                Err(_) => continue, // direction hit a pole guard; flagged in resolution note
            };
            let (inside, witness) = in_conjugate_set(prof, t, r_t)?;
            if !inside {
                continue;
            }
            let endpoint = prof.position(&metric, t);
            let d = metric.base_distance(x, &endpoint);
            if d < r_t {
                witnesses.push(NoConjWitness {
                    direction_index: idx,
                    t,
                    r_t,
                    endpoint_distance: d,
                    total_multiplicity: witness.total_multiplicity,
                });
            }
        }
        per_t.push(NoConjEntry {
            t,
            r_t,
            pass: witnesses.is_empty(),
            witnesses,
        });
    }
    Ok(NoConjReport {
        a,
        direction_count,
        per_t,
        resolution: std::f64::consts::TAU / direction_count as f64,
    })
}

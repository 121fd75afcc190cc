//! Surface-of-revolution bad-set construction via action-angle data:
//! half-swing times and angular advances from turning-point quadratures,
//! rational-torus detection through the rotation-number map, and a
//! per-center return-mismatch prediction for the loop classification.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::cover::TubeCover;
use crate::error::{GeobeamError, Result};
use crate::manifold::{check_integrable_profile, Manifold, ManifoldKind};

use super::WINDOW_EPS;

/// Gauss–Legendre nodes on [-1, 1], 64 points (weights symmetric).
fn gauss64() -> (&'static [f64], &'static [f64]) {
    use std::sync::OnceLock;
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (n, w) = NODES.get_or_init(|| {
        // Golub–Welsch via symmetric tridiagonal eigenvalues
        let m = 64usize;
        let mut beta = vec![0.0_f64; m - 1];
        for (i, b) in beta.iter_mut().enumerate() {
            let k = (i + 1) as f64;
            *b = k / ((4.0 * k * k - 1.0) as f64).sqrt();
        }
        let mut tri = nalgebra::DMatrix::zeros(m, m);
        for i in 0..m - 1 {
            tri[(i, i + 1)] = beta[i];
            tri[(i + 1, i)] = beta[i];
        }
        let eig = tri.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..m)
            .map(|i| {
                let x = eig.eigenvalues[i];
                let v0 = eig.eigenvectors[(0, i)];
                (x, 2.0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        (
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    });
    (n, w)
}

/// Half-swing data at angular momentum ℓ ≥ 0 from the base radius r0:
/// times and θ-advances of the upward (r0 → r₊ → r0) and downward swings.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SwingData {
    pub ell: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    pub tau_up: f64,
    pub theta_up: f64,
    pub tau_down: f64,
    pub theta_down: f64,
}

impl SwingData {
    pub fn period(&self) -> f64 {
        self.tau_up + self.tau_down
    }

    pub fn delta_theta(&self) -> f64 {
        self.theta_up + self.theta_down
    }

    /// winding number per full r-cycle
    pub fn winding(&self) -> f64 {
        self.delta_theta() / std::f64::consts::TAU
    }
}

struct RevolutionGeometry {
    alpha: crate::manifold::Profile,
    v: crate::manifold::Profile,
    r0: f64,
    ell_max: f64,
}

impl RevolutionGeometry {
    fn new(m: &Manifold, x: &nalgebra::DVector<f64>) -> Result<RevolutionGeometry> {
        let (alpha, v) = match &m.kind {
            ManifoldKind::Revolution {
                alpha,
                potential: Some(v),
            } => (alpha.clone(), v.clone()),
            _ => {
                return Err(GeobeamError::Unsupported(
                    "revolution bad set needs a revolution surface with potential".into(),
                ))
            }
        };
        let r0 = x[0];
        let ell_max = alpha.eval(r0) * v.eval(r0).max(0.0).sqrt();
        Ok(RevolutionGeometry { alpha, v, r0, ell_max })
    }

    /// f(r) = V(r) − ℓ²/α(r)² (radial kinetic term on the shell)
    fn radial(&self, r: f64, ell: f64) -> f64 {
        let a = self.alpha.eval(r);
        self.v.eval(r) - ell * ell / (a * a)
    }

    fn turning_points(&self, ell: f64) -> Result<(f64, f64)> {
        let guard = 1e-9;
        let lo_lim = guard;
        let hi_lim = std::f64::consts::PI - guard;
        let f = |r: f64| self.radial(r, ell);
        if f(self.r0) < 0.0 {
            return Err(GeobeamError::Numeric(format!(
                "no radial motion at ℓ = {ell}: f(r0) < 0"
            )));
        }
        let bisect = |mut a: f64, mut b: f64| {
            // f(a) and f(b) straddle zero
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                if f(a).signum() == f(mid).signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        };
        // walk outward from r0 in small steps until f < 0
        let step = 1e-3;
        let mut r_hi = hi_lim;
        let mut r = self.r0;
        loop {
            let next = (r + step).min(hi_lim);
            if f(next) < 0.0 {
                r_hi = bisect(r, next);
                break;
            }
            if next >= hi_lim {
                break;
            }
            r = next;
        }
        let mut r_lo = lo_lim;
        let mut r = self.r0;
        loop {
            let next = (r - step).max(lo_lim);
            if f(next) < 0.0 {
                r_lo = bisect(next, r);
                break;
            }
            if next <= lo_lim {
                break;
            }
            r = next;
        }
        Ok((r_lo, r_hi))
    }

    /// Quadratures of dt = dr/(2√f) and dθ = (2ℓ/α²)·dt over [a, b] where
    /// the singular turning-point end is `b_singular` (true: b, false: a).
    fn swing_segment(&self, a: f64, b: f64, ell: f64, singular_hi: bool) -> (f64, f64) {
        let (nodes, weights) = gauss64();
        // substitute to absorb the 1/√ endpoint singularity:
        // singular at b: r = a + (b−a) sin²(π u /4 + π/4)… simpler: r = b − (b−a) s², s ∈ [0,1]
        let mut t_acc = 0.0;
        let mut th_acc = 0.0;
        for (u, w) in nodes.iter().zip(weights.iter()) {
            // map [-1,1] → s ∈ [0,1]
            let s = 0.5 * (u + 1.0);
            let ds = 0.5 * w;
            let (r, jac) = if singular_hi {
                (b - (b - a) * s * s, 2.0 * (b - a) * s)
            } else {
                (a + (b - a) * s * s, 2.0 * (b - a) * s)
            };
            let fr = self.radial(r, ell).max(1e-300);
            let dt = jac * ds / (2.0 * fr.sqrt());
            let aa = self.alpha.eval(r);
            t_acc += dt;
            th_acc += dt * 2.0 * ell / (aa * aa);
        }
        (t_acc, th_acc)
    }

    fn swing(&self, ell: f64) -> Result<SwingData> {
        let (r_lo, r_hi) = self.turning_points(ell)?;
        let (tu, thu) = if r_hi > self.r0 + 1e-12 {
            let (t, th) = self.swing_segment(self.r0, r_hi, ell, true);
            (2.0 * t, 2.0 * th)
        } else {
            (0.0, 0.0)
        };
        let (td, thd) = if r_lo < self.r0 - 1e-12 {
            // singular end at r_lo: integrate [r_lo, r0] with singularity at a
            let (t, th) = self.swing_segment(r_lo, self.r0, ell, false);
            (2.0 * t, 2.0 * th)
        } else {
            (0.0, 0.0)
        };
        Ok(SwingData {
            ell,
            r_lo,
            r_hi,
            tau_up: tu,
            theta_up: thu,
            tau_down: td,
            theta_down: thd,
        })
    }

    /// θ-advance accumulated from r0 to r within a half-swing (quadrature of
    /// dθ = (2ℓ/α²) dt = ℓ dr / (α²√f) along the monotone leg).
    fn theta_between(&self, ell: f64, r_near: f64, r_far: f64) -> f64 {
        let (nodes, weights) = gauss64();
        let (a, b) = if r_near < r_far {
            (r_near, r_far)
        } else {
            (r_far, r_near)
        };
        let mut acc = 0.0;
        for (u, w) in nodes.iter().zip(weights.iter()) {
            let s = a + (b - a) * 0.5 * (u + 1.0);
            let ds = (b - a) * 0.5 * w;
            let fr = self.radial(s, ell).max(1e-14);
            let aa = self.alpha.eval(s);
            acc += ds * ell / (aa * aa * fr.sqrt());
        }
        acc
    }

    /// Radial distance |r − r0| at the point of the next half-swing where
    /// the θ-advance reaches `residual` (mid-swing grazing miss). Returns
    /// None when the alignment does not occur within that half-swing.
    fn graze_miss(&self, swing: &SwingData, ell: f64, down: bool, residual: f64) -> Option<f64> {
        let half_total = if down {
            swing.theta_down
        } else {
            swing.theta_up
        };
        if residual > half_total {
            return None;
        }
        // advance measured from r0; the swing is symmetric about its turning
        // point, so map the second half back onto the first
        let target = if residual <= half_total / 2.0 {
            residual
        } else {
            half_total - residual
        };
        let (mut near, mut far) = if down {
            (self.r0, swing.r_lo)
        } else {
            (self.r0, swing.r_hi)
        };
        // bisect r between r0 and the turning point on θ-advance
        for _ in 0..60 {
            let mid = 0.5 * (near + far);
            let adv = self.theta_between(ell, self.r0, mid).abs();
            if adv < target {
                near = mid;
            } else {
                far = mid;
            }
            if (far - near).abs() < 1e-12 {
                break;
            }
        }
        Some((0.5 * (near + far) - self.r0).abs())
    }
}

/// Rotation-number scan over the fiber's torus range.
#[derive(Debug, Clone, Serialize)]
pub struct RotationScan {
    pub ells: Vec<f64>,
    pub winding: Vec<f64>,
    pub period: Vec<f64>,
    pub monotone: bool,
}

/// One detected rational torus W(ℓ*) = m/k with closed-orbit period k·T_r ≤ T.
#[derive(Debug, Clone, Serialize)]
pub struct RationalTorus {
    pub ell: f64,
    pub m: i64,
    pub k: i64,
    pub period: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RevolutionDiagnostics {
    pub ell_max: f64,
    pub singular_band_halfwidth: f64,
    pub singular_count: usize,
    pub predicted_count: usize,
    pub rational_tori: Vec<RationalTorus>,
    pub rotation_monotone: bool,
    /// fitted β per the cardinality bound β T³ R^{1−α₁} + R^{−α₁}
    pub beta_fit: f64,
    pub cardinality_bound: f64,
    pub t0: f64,
    pub t_max: f64,
    pub radius: f64,
    pub alpha1: f64,
}

/// Scan the rotation number over the action interval (4096 samples).
pub fn rotation_scan(m: &Manifold, x: &nalgebra::DVector<f64>, samples: usize) -> Result<RotationScan> {
    let geom = RevolutionGeometry::new(m, x)?;
    let n = samples.max(16);
    let mut ells = Vec::with_capacity(n);
    let mut winding = Vec::with_capacity(n);
    let mut period = Vec::with_capacity(n);
    for k in 0..n {
        let frac = (k as f64 + 0.5) / n as f64;
        let ell = geom.ell_max * frac * 0.999;
        let s = geom.swing(ell)?;
        ells.push(ell);
        winding.push(s.winding());
        period.push(s.period());
    }
    let mut monotone = true;
    for w in winding.windows(2) {
        if w[1] >= w[0] {
            monotone = false;
        }
    }
    // strictly decreasing OR strictly increasing both count as monotone
    if !monotone {
        let mut inc = true;
        for w in winding.windows(2) {
            if w[1] <= w[0] {
                inc = false;
            }
        }
        monotone = inc;
    }
    Ok(RotationScan {
        ells,
        winding,
        period,
        monotone,
    })
}

/// Locate rational tori W(ℓ) = m/k with closed-orbit period k·T_r(ℓ) ≤ T by
/// bisection on the scan grid (1e-10 in the rotation number).
pub fn rational_tori(
    m: &Manifold,
    x: &nalgebra::DVector<f64>,
    scan: &RotationScan,
    t_max: f64,
) -> Result<Vec<RationalTorus>> {
    let geom = RevolutionGeometry::new(m, x)?;
    let t_r_min = scan.period.iter().cloned().fold(f64::INFINITY, f64::min);
    let k_max = (t_max / t_r_min).floor() as i64;
    let mut out = Vec::new();
    for k in 1..=k_max.max(0) {
        let mut seen: BTreeSet<i64> = BTreeSet::new();
        for win in 0..scan.ells.len() - 1 {
            let (w0, w1) = (scan.winding[win], scan.winding[win + 1]);
            let lo = w0.min(w1) * k as f64;
            let hi = w0.max(w1) * k as f64;
            for m_int in (lo.floor() as i64)..=(hi.ceil() as i64) {
                if m_int <= 0 || gcd(m_int.unsigned_abs(), k.unsigned_abs()) != 1 {
                    continue;
                }
                let target = m_int as f64 / k as f64;
                if target < w0.min(w1) || target > w0.max(w1) {
                    continue;
                }
                if seen.contains(&m_int) {
                    continue;
                }
                // bisection in ℓ
                let mut a = scan.ells[win];
                let mut b = scan.ells[win + 1];
                let wind_at = |ell: f64| geom.swing(ell).map(|s| s.winding());
                let mut fa = wind_at(a)? - target;
                for _ in 0..100 {
                    let mid = 0.5 * (a + b);
                    let fm = wind_at(mid)? - target;
                    if fa.signum() == fm.signum() {
                        a = mid;
                        fa = fm;
                    } else {
                        b = mid;
                    }
                    if fa.abs() < 1e-10 || (b - a) < 1e-13 {
                        break;
                    }
                }
                let ell = 0.5 * (a + b);
                let s = geom.swing(ell)?;
                let period = k as f64 * s.period();
                if period <= t_max + WINDOW_EPS {
                    seen.insert(m_int);
                    out.push(RationalTorus {
                        ell,
                        m: m_int,
                        k,
                        period,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| a.ell.partial_cmp(&b.ell).unwrap().then(a.k.cmp(&b.k)));
    Ok(out)
}

/// Predict whether the center direction at signed angular momentum ℓ with
/// initial radial sign loops through the fiber within [t0, T]: enumerate
/// r0-crossings from the swing data, test the wrapped θ-advance against the
/// tube-pair meeting threshold 2R, and additionally test mid-swing grazing
/// returns (θ-alignment while the radial oscillation hovers near r0).
#[allow(clippy::too_many_arguments)]
fn center_loops(
    geom: &RevolutionGeometry,
    swing: &SwingData,
    ell_signed: f64,
    radial_up: bool,
    t0: f64,
    t_max: f64,
    radius: f64,
    alpha_r0: f64,
    safety: f64,
) -> bool {
    let tau = std::f64::consts::TAU;
    let sign = ell_signed.signum();
    let threshold = safety * 2.0 * radius;
    let ell_abs = swing.ell;
    let (mut t, mut th) = (0.0_f64, 0.0_f64);
    let mut up = radial_up;
    for _ in 0..512 {
        if up {
            t += swing.tau_up;
            th += sign * swing.theta_up;
        } else {
            t += swing.tau_down;
            th += sign * swing.theta_down;
        }
        up = !up;
        if t > t_max + WINDOW_EPS {
            return false;
        }
        // alignment at the r0-crossing itself
        if t >= t0 - WINDOW_EPS {
            let wrapped = {
                let mut w = th.rem_euclid(tau);
                if w > std::f64::consts::PI {
                    w -= tau;
                }
                w
            };
            if alpha_r0 * wrapped.abs() <= threshold {
                return true;
            }
        }
        // grazing alignment during the next half-swing
        let tau_next = if up { swing.tau_up } else { swing.tau_down };
        if t + tau_next >= t0 - WINDOW_EPS && t <= t_max + WINDOW_EPS {
            let residual = if sign > 0.0 {
                (-th).rem_euclid(tau)
            } else {
                th.rem_euclid(tau)
            };
            if let Some(miss) = geom.graze_miss(swing, ell_abs, !up, residual) {
                if miss <= threshold {
                    return true;
                }
            }
        }
    }
    false
}

/// Construct the bad tube set ℬ for a revolution surface with potential:
/// (a) a singular band around the fiber's tangency directions,
/// (b) every center whose predicted return mismatch within [t0, T] falls
/// below the meeting threshold (near-rational directions).
#[allow(clippy::too_many_arguments)]
pub fn revolution_bad_set(
    m: &Manifold,
    x: &nalgebra::DVector<f64>,
    cover: &TubeCover,
    t0: f64,
    t_max: f64,
    alpha1: f64,
    opts: &RevolutionOpts,
) -> Result<(BTreeSet<usize>, RevolutionDiagnostics)> {
    m.check_chart(x)?;
    check_integrable_profile(m)?;
    let radius = cover.radius;
    if t_max >= opts.window_cap_constant * radius.powf(alpha1 - 1.0) {
        return Err(GeobeamError::Config(format!(
            "T = {t_max} violates T < c·R^(α₁−1) = {}",
            opts.window_cap_constant * radius.powf(alpha1 - 1.0)
        )));
    }
    let geom = RevolutionGeometry::new(m, x)?;
    let scan = rotation_scan(m, x, opts.scan_samples)?;
    if !scan.monotone {
        return Err(GeobeamError::Structural(
            "rotation-number map is not monotone: iso-energetic non-degeneracy violated".into(),
        ));
    }
    let tori = rational_tori(m, x, &scan, t_max)?;
    let alpha_r0 = geom.alpha.eval(geom.r0);
    let fiber_radius = m.shell_radius(x);
    // singular band (a): arc distance to the tangency directions ξ_r = 0
    let w_a = opts.singular_band_scale * radius.powf(1.0 - alpha1);
    let mut bad = BTreeSet::new();
    let mut singular = 0usize;
    for tube in &cover.tubes {
        let xi = &tube.center.xi;
        let ell = xi[1];
        let xi_r = xi[0];
        // fiber arc distance to the tangency points (where ξ_r = 0)
        let ang = (xi_r / fiber_radius).clamp(-1.0, 1.0).asin().abs();
        let arc = fiber_radius * ang;
        if arc <= w_a {
            bad.insert(tube.index);
            singular += 1;
            continue;
        }
        let ell_abs = ell.abs().min(geom.ell_max * (1.0 - 1e-9));
        let swing = match geom.swing(ell_abs) {
            Ok(s) => s,
            Err(_) => {
                bad.insert(tube.index);
                continue;
            }
        };
        if center_loops(
            &geom,
            &swing,
            if ell >= 0.0 { ell.max(1e-12) } else { ell },
            xi_r >= 0.0,
            t0,
            t_max,
            radius,
            alpha_r0,
            opts.safety,
        ) {
            bad.insert(tube.index);
        }
    }
    let predicted = bad.len() - singular;
    let beta_fit = ((bad.len() as f64 - radius.powf(-alpha1)).max(0.0))
        / (t_max.powi(3) * radius.powf(1.0 - alpha1));
    let diagnostics = RevolutionDiagnostics {
        ell_max: geom.ell_max,
        singular_band_halfwidth: w_a,
        singular_count: singular,
        predicted_count: predicted,
        rational_tori: tori,
        rotation_monotone: scan.monotone,
        beta_fit,
        cardinality_bound: beta_fit * t_max.powi(3) * radius.powf(1.0 - alpha1)
            + radius.powf(-alpha1),
        t0,
        t_max,
        radius,
        alpha1,
    };
    Ok((bad, diagnostics))
}

/// Options for the revolution bad-set construction.
#[derive(Debug, Clone, Serialize)]
pub struct RevolutionOpts {
    /// samples of the rotation-number scan
    pub scan_samples: usize,
    /// κ in the singular-band half-width κ·R^{1−α₁}
    pub singular_band_scale: f64,
    /// multiplicative safety on the meeting threshold
    pub safety: f64,
    /// c in the admissibility requirement T < c·R^{α₁−1}
    pub window_cap_constant: f64,
}

impl Default for RevolutionOpts {
    fn default() -> Self {
        RevolutionOpts {
            // κ = 1/8 keeps the singular removal at the covering-number
            // scale ⌈R^{−α₁}⌉ (2 tangency points × 2 sides × R/2 spacing)
            singular_band_scale: 0.125,
            scan_samples: 4096,
            safety: 1.1,
            window_cap_constant: 2.0,
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

//! (𝔇, τ, R)-good covers of the cosphere fiber S*ₓM by geodesic tubes:
//! greedy separated centers, tube construction, disjoint-family coloring,
//! and sampled cover verification.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeobeamError, Result};
use crate::flow::{integrate_lossy, trajectory_crossings, CrossingEvent, FlowOpts};
use crate::manifold::{Manifold, PhasePoint};

/// Cover-construction options.
#[derive(Debug, Clone, Serialize)]
pub struct CoverOpts {
    /// max tube half-length τ₀
    pub tau_max: f64,
    /// max tube radius R₀
    pub r_max: f64,
    /// family-count cap; exceeding it signals a membership-test bug
    pub family_cap: usize,
    /// coverage-verification sample count
    pub verify_samples: usize,
    pub seed: u64,
    pub flow: FlowOpts,
}

impl Default for CoverOpts {
    fn default() -> Self {
        CoverOpts {
            tau_max: 0.2,
            r_max: 0.2,
            family_cap: 64,
            verify_samples: 10_000,
            seed: 7,
            flow: FlowOpts::default(),
        }
    }
}

/// A geodesic tube Λ_ρ^τ(R).
#[derive(Debug, Clone)]
pub struct Tube {
    pub index: usize,
    pub center: PhasePoint,
    pub radius: f64,
    pub half_length: f64,
    /// disjoint-family color
    pub color: usize,
    /// center trajectory sampled over |t| ≤ τ+R at spacing ≤ R/8
    pub center_path: Vec<(f64, PhasePoint)>,
}

/// Verification record of a constructed cover.
#[derive(Debug, Clone, Serialize)]
pub struct CoverVerification {
    pub sample_count: usize,
    pub uncovered: usize,
    pub max_overlap: usize,
    pub min_center_separation: f64,
    pub family_disjoint_violations: usize,
}

/// A (𝔇, τ, R)-good cover of S*ₓM.
#[derive(Debug, Clone)]
pub struct TubeCover {
    pub base_point: DVector<f64>,
    pub tau: f64,
    pub radius: f64,
    pub family_count: usize,
    pub tubes: Vec<Tube>,
    pub families: Vec<Vec<usize>>,
    pub verification: CoverVerification,
}

impl TubeCover {
    pub fn len(&self) -> usize {
        self.tubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tubes.is_empty()
    }
}

/// Greedy maximal r/2-separated subset of a dense fiber sample.
/// Every fiber sample ends up within r/2 of an accepted center.
pub fn separated_centers(m: &Manifold, x: &DVector<f64>, r: f64, opts: &CoverOpts) -> Result<Vec<PhasePoint>> {
    if !(r > 0.0 && r <= opts.r_max) {
        return Err(GeobeamError::Config(format!(
            "separation radius must lie in (0, {}], got {r}",
            opts.r_max
        )));
    }
    let n = m.dim();
    let dense_floor = (10.0 / r).powi(n as i32 - 1).ceil() as usize;
    let count = match n {
        2 => ((16.0 * m.fiber_measure(x) / r).ceil() as usize).max(dense_floor),
        3 => {
            let per_axis = (14.0 / r).ceil();
            ((per_axis * per_axis) as usize).max(dense_floor)
        }
        _ => dense_floor.max(4),
    };
    let samples = m.fiber_sample(x, count)?;
    // density post-check: nearest-neighbor gap must resolve r/4
    let gap = match n {
        2 => m.fiber_measure(x) / count as f64,
        _ => (m.fiber_measure(x) / count as f64).sqrt() * 2.0,
    };
    if gap > r / 4.0 {
        let suggested = (count as f64 * gap / (r / 4.0)).ceil() as usize;
        return Err(GeobeamError::Density {
            msg: format!("fiber sample gap {gap} exceeds r/4 = {}", r / 4.0),
            suggested,
        });
    }
    // work in the orthonormal coframe: fiber distances are Euclidean there
    let frame = m.orthonormal_coframe(x);
    let inv = frame
        .clone()
        .lu()
        .solve(&nalgebra::DMatrix::identity(n, n))
        .ok_or_else(|| GeobeamError::Numeric("coframe inversion failed".into()))?;
    let coords: Vec<DVector<f64>> = samples.iter().map(|p| &inv * &p.xi).collect();
    let mut accepted: Vec<usize> = Vec::new();
    let half = r / 2.0;
    for (i, c) in coords.iter().enumerate() {
        let ok = accepted
            .iter()
            .all(|&j| (c - &coords[j]).norm() >= half);
        if ok {
            accepted.push(i);
        }
    }
    // maximality post-check on the sample set
    for (i, c) in coords.iter().enumerate() {
        let near = accepted.iter().any(|&j| (c - &coords[j]).norm() < half + 1e-12);
        if !near {
            return Err(GeobeamError::Density {
                msg: format!("sample {i} not within r/2 of any accepted center"),
                suggested: count * 2,
            });
        }
    }
    Ok(accepted.into_iter().map(|i| samples[i].clone()).collect())
}

/// Deterministic seed points of the cap 𝓛 ∩ B(ρ, radius) around a fiber
/// center ρ = (x, ξ). Coordinates: one position offset direction paired to
/// zero against the momentum, plus the full covector fiber; the remaining
/// position component solves the 𝓛-constraint exactly.
pub fn cap_seeds(
    m: &Manifold,
    x: &DVector<f64>,
    xi: &DVector<f64>,
    radius: f64,
    count: usize,
) -> Vec<PhasePoint> {
    let n = m.dim();
    let frame = m.orthonormal_coframe(x); // covector frame columns
    let ginv = m.metric_inv(x);
    // g-orthonormal position vectors: v_i = g⁻¹ f_i
    let vecs: Vec<DVector<f64>> = (0..n).map(|i| &ginv * frame.column(i).into_owned()).collect();
    // split position directions: those pairing to zero with ξ vs the rest
    let mut perp: Vec<DVector<f64>> = Vec::new();
    let mut par: Option<DVector<f64>> = None;
    for v in &vecs {
        if (v.dot(xi)).abs() < 1e-9 {
            perp.push(v.clone());
        } else if par.is_none() {
            par = Some(v.clone());
        } else {
            // Gram–Schmidt the pairing against the stored parallel direction
            perp.push(v.clone() - par.as_ref().unwrap() * (v.dot(xi) / par.as_ref().unwrap().dot(xi)));
        }
    }
    let par = par.unwrap_or_else(|| vecs[0].clone());
    let center = PhasePoint {
        x: m.wrap_position(x),
        xi: xi.clone(),
        energy: m.energy(&m.wrap_position(x), xi),
    };
    let mut out = Vec::with_capacity(count + 1);
    let mut push_seed = |dx_perp: &DVector<f64>, dxi: &DVector<f64>| {
        let mut scale = 1.0;
        // the 𝓛-constraint correction is second order; one corrective
        // rescale keeps seeds inside the nominal ball
        for _ in 0..3 {
            let dxi_s = dxi * scale;
            let dx_s = dx_perp * scale;
            // solve the parallel position component so that ⟨δx, ξ+δξ⟩ = 0
            let xi_new = xi + &dxi_s;
            let denom = par.dot(&xi_new);
            let s = if denom.abs() > 1e-12 {
                -dx_s.dot(&xi_new) / denom
            } else {
                0.0
            };
            let dx = &dx_s + &par * s;
            let pos = x + dx;
            let wrapped = m.wrap_position(&pos);
            if m.check_chart(&wrapped).is_err() {
                return;
            }
            let energy = m.energy(&wrapped, &xi_new);
            let candidate = PhasePoint {
                x: wrapped,
                xi: xi_new,
                energy,
            };
            let d = m.sasaki_distance(&center, &candidate).value;
            if d <= radius * (1.0 + 1e-12) || radius == 0.0 {
                out.push(candidate);
                return;
            }
            scale *= radius / d * (1.0 - 1e-9);
        }
    };
    // center seed first
    push_seed(&DVector::zeros(n), &DVector::zeros(n));
    if count == 0 {
        return out;
    }
    // deterministic ball points: golden-angle directions over (perp ⊕ fiber)
    let dim_ball = perp.len() + n;
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15);
    for k in 0..count {
        let rad = radius * (((k % 4) as f64 + 1.0) / 4.0);
        let mut dir = DVector::zeros(dim_ball);
        if dim_ball <= 2 {
            let ang = std::f64::consts::TAU * k as f64 / count as f64;
            dir[0] = ang.cos();
            if dim_ball > 1 {
                dir[1] = ang.sin();
            }
        } else {
            for d in dir.iter_mut() {
                *d = rng.gen_range(-1.0..1.0_f64);
            }
            let nn = dir.norm();
            if nn < 1e-9 {
                dir[0] = 1.0;
            } else {
                dir /= nn;
            }
        }
        let mut dx = DVector::zeros(n);
        for (i, p) in perp.iter().enumerate() {
            dx += p * (rad * dir[i]);
        }
        let mut dxi = DVector::zeros(n);
        for i in 0..n {
            dxi += frame.column(i) * (rad * dir[perp.len() + i]);
        }
        push_seed(&dx, &dxi);
    }
    out
}

/// All transversal-cap crossings of the flow line through ρ over |t| ≤ span.
/// The transversal is the global surface {⟨exp_x⁻¹(y), η⟩ = 0} through x that
/// carries every tube cap of a fiber cover.
pub fn fiber_cap_crossings(
    m: &Manifold,
    x: &DVector<f64>,
    rho: &PhasePoint,
    span: f64,
    flow: &FlowOpts,
) -> Result<Vec<CrossingEvent>> {
    let mut events = Vec::new();
    let scan = flow.dt_scan.min(span / 8.0).max(1e-4);
    for sign in [1.0, -1.0] {
        let traj = integrate_lossy(m, rho, sign * span, flow)?;
        let mut opts_scan = trajectory_crossings(m, x, &traj, (0.0, span), scan);
        events.append(&mut opts_scan);
    }
    // t = 0 membership: fiber-cap points satisfy F = 0 exactly at the seed
    let disp = m.displacement(x, &rho.x);
    if disp.dot(&rho.xi).abs() <= 1e-10 {
        let base = m.base_distance(x, &rho.x);
        if base < 0.5 * m.injectivity_lower() {
            events.push(CrossingEvent {
                t: 0.0,
                fiber_distance: crate::flow::fiber_distance(m, x, rho),
                base_distance: base,
                point: rho.clone(),
                sign: 0,
            });
        }
    }
    events.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    Ok(events)
}

/// Membership test for tube j: ρ ∈ Λ_{ρ_j}^τ(R) iff some transversal-cap
/// crossing within |t| ≤ τ+R lies within Sasaki distance R of ρ_j.
/// Returns the witness (t, cap distance) of the closest crossing.
pub fn tube_contains(
    m: &Manifold,
    cover: &TubeCover,
    j: usize,
    rho: &PhasePoint,
    flow: &FlowOpts,
) -> Result<(bool, Option<(f64, f64)>)> {
    if rho.energy.abs() > 1e-6 {
        return Err(GeobeamError::Domain(format!(
            "tube_contains expects a shell point, |p| = {}",
            rho.energy.abs()
        )));
    }
    tube_contains_relaxed(m, cover, j, rho, flow)
}

/// Same as [`tube_contains`] without the shell precondition (used internally
/// on full-dimensional tube points).
pub fn tube_contains_relaxed(
    m: &Manifold,
    cover: &TubeCover,
    j: usize,
    rho: &PhasePoint,
    flow: &FlowOpts,
) -> Result<(bool, Option<(f64, f64)>)> {
    let span = cover.tau + cover.radius;
    let events = fiber_cap_crossings(m, &cover.base_point, rho, span, flow)?;
    let center = &cover.tubes[j].center;
    let mut best: Option<(f64, f64)> = None;
    for e in &events {
        let d = m.sasaki_distance(&e.point, center);
        if d.flagged {
            continue;
        }
        if best.is_none() || d.value < best.unwrap().1 {
            best = Some((e.t, d.value));
        }
    }
    match best {
        Some((t, d)) if d <= cover.radius => Ok((true, Some((t, d)))),
        other => Ok((false, other)),
    }
}

/// Build a (𝔇, τ, R)-good cover of S*ₓM.
pub fn build_good_cover(
    m: &Manifold,
    x: &DVector<f64>,
    tau: f64,
    radius: f64,
    opts: &CoverOpts,
) -> Result<TubeCover> {
    if !(tau > 0.0 && tau <= opts.tau_max) {
        return Err(GeobeamError::Config(format!(
            "τ must lie in (0, {}], got {tau}",
            opts.tau_max
        )));
    }
    // flow-box injectivity: tubes of extent τ+R must not self-overlap in time
    if tau + radius > m.injectivity_lower() / 2.0 + 1e-12 {
        return Err(GeobeamError::Config(format!(
            "τ + R = {} exceeds inj/2 = {}",
            tau + radius,
            m.injectivity_lower() / 2.0
        )));
    }
    let centers = separated_centers(m, x, radius, opts)?;
    let span = tau + radius;
    let path_dt = radius / 8.0;
    let tubes: Vec<Tube> = centers
        .par_iter()
        .enumerate()
        .map(|(index, center)| {
            let mut center_path = Vec::new();
            for sign in [-1.0, 1.0] {
                if let Ok(traj) = integrate_lossy(m, center, sign * span, &opts.flow) {
                    let steps = (span / path_dt).ceil() as usize;
                    for k in 0..=steps {
                        let t = sign * span * k as f64 / steps as f64;
                        if sign > 0.0 && k == 0 {
                            continue; // avoid duplicating t = 0
                        }
                        center_path.push((t, traj.phase_point_at(m, t)));
                    }
                }
            }
            center_path.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            Tube {
                index,
                center: center.clone(),
                radius,
                half_length: tau,
                color: usize::MAX,
                center_path,
            }
        })
        .collect();
    let mut cover = TubeCover {
        base_point: x.clone(),
        tau,
        radius,
        family_count: 0,
        tubes,
        families: vec![],
        verification: CoverVerification {
            sample_count: 0,
            uncovered: 0,
            max_overlap: 0,
            min_center_separation: f64::INFINITY,
            family_disjoint_violations: 0,
        },
    };
    color_cover(m, &mut cover, opts)?;
    verify_cover(m, &mut cover, opts)?;
    Ok(cover)
}

/// Dilation bound: max ‖dφ_t‖ over |t| ≤ window, sampled over 8 fiber
/// directions.
pub fn dilation_bound(m: &Manifold, x: &DVector<f64>, window: f64, flow: &FlowOpts) -> f64 {
    let dirs = match m.fiber_sample(x, 8) {
        Ok(d) => d,
        Err(_) => return 2.0 + window,
    };
    let mut l: f64 = 1.0;
    for d in dirs {
        if let Ok(frame) = crate::flow::variational(m, &d, &[window, -window], flow) {
            for norm in frame.norms() {
                l = l.max(norm);
            }
        }
    }
    l
}

fn color_cover(m: &Manifold, cover: &mut TubeCover, opts: &CoverOpts) -> Result<()> {
    let r = cover.radius;
    let tau = cover.tau;
    let n = cover.tubes.len();
    let dil = dilation_bound(m, &cover.base_point, tau + 3.0 * r, &opts.flow);
    let prefilter = 6.0 * r * (1.0 + dil * (tau + 3.0 * r));
    // candidate pairs by center distance
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = m
                .sasaki_distance(&cover.tubes[i].center, &cover.tubes[j].center)
                .value;
            if d <= prefilter {
                candidates.push((i, j));
            }
        }
    }
    let conflicts: Vec<(usize, usize)> = candidates
        .par_iter()
        .filter(|(i, j)| {
            tubes_conflict(m, cover, *i, *j, 3.0 * r, r / 10.0, 8, &opts.flow).unwrap_or(true)
        })
        .cloned()
        .collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j) in &conflicts {
        adj[*i].push(*j);
        adj[*j].push(*i);
    }
    // n = 2 fibers have angular-window conflict graphs (circulant-like):
    // color by angular rank mod K for the smallest proper K, which tracks
    // the clique number and is seam-insensitive; otherwise fall back to
    // smallest-last greedy
    let colors = if m.dim() == 2 {
        modular_circle_coloring(cover, &adj, opts.family_cap)
    } else {
        None
    }
    .unwrap_or_else(|| degeneracy_greedy_coloring(&adj));
    let max_color = colors.iter().cloned().max().unwrap_or(0);
    if max_color + 1 > opts.family_cap {
        return Err(GeobeamError::Structural(format!(
            "coloring exceeded the family cap {} (membership-test bug?)",
            opts.family_cap
        )));
    }
    cover.family_count = max_color + 1;
    cover.families = vec![Vec::new(); cover.family_count];
    for (i, &c) in colors.iter().enumerate() {
        cover.tubes[i].color = c;
        cover.families[c].push(i);
    }
    Ok(())
}

/// Angular-rank modular coloring for circle fibers: with tubes sorted by
/// fiber angle, take the smallest K such that c_i = rank_i mod K separates
/// every conflicting pair.
fn modular_circle_coloring(
    cover: &TubeCover,
    adj: &[Vec<usize>],
    cap: usize,
) -> Option<Vec<usize>> {
    let n = cover.tubes.len();
    if n == 0 {
        return Some(vec![]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let angle = |i: usize| -> f64 {
        let xi = &cover.tubes[i].center.xi;
        xi[1].atan2(xi[0]).rem_euclid(std::f64::consts::TAU)
    };
    order.sort_by(|a, b| angle(*a).partial_cmp(&angle(*b)).unwrap());
    let mut rank = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos;
    }
    let start = adj.iter().map(|a| a.len() / 2 + 1).max().unwrap_or(1);
    for k in start..=cap.max(start) {
        let proper = adj.iter().enumerate().all(|(i, nbrs)| {
            nbrs.iter().all(|&j| rank[i] % k != rank[j] % k)
        });
        if proper {
            return Some((0..n).map(|i| rank[i] % k).collect());
        }
    }
    None
}

fn degeneracy_greedy_coloring(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut removed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best = usize::MAX;
        let mut best_deg = usize::MAX;
        for i in 0..n {
            if !removed[i] && degree[i] < best_deg {
                best = i;
                best_deg = degree[i];
            }
        }
        removed[best] = true;
        order.push(best);
        for &j in &adj[best] {
            if !removed[j] {
                degree[j] = degree[j].saturating_sub(1);
            }
        }
    }
    let mut colors = vec![usize::MAX; n];
    for &i in order.iter().rev() {
        let used: Vec<usize> = adj[i]
            .iter()
            .filter_map(|&j| (colors[j] != usize::MAX).then_some(colors[j]))
            .collect();
        let mut c = 0;
        while used.contains(&c) {
            c += 1;
        }
        colors[i] = c;
    }
    colors
}

/// Conflict test between the 3R-inflations of tubes i and j. Centers closer
/// than twice the inflated radius conflict outright (their caps share the
/// fiber midpoint at t = 0); beyond that, flow sampled points of tube i's
/// inflated cap over |t| ≤ τ+3R and look for a crossing within
/// (inflated radius + margin) of ρ_j.
fn tubes_conflict(
    m: &Manifold,
    cover: &TubeCover,
    i: usize,
    j: usize,
    inflated: f64,
    margin: f64,
    ring: usize,
    flow: &FlowOpts,
) -> Result<bool> {
    let ci = &cover.tubes[i].center;
    let cj = &cover.tubes[j].center;
    let dist = m.sasaki_distance(ci, cj);
    if !dist.flagged && dist.value <= 2.0 * inflated + margin {
        return Ok(true);
    }
    let span = cover.tau + inflated;
    let seeds = cap_seeds(m, &cover.base_point, &ci.xi, inflated, ring);
    for s in &seeds {
        let events = fiber_cap_crossings(m, &cover.base_point, s, span, flow)?;
        for e in &events {
            let d = m.sasaki_distance(&e.point, cj);
            if !d.flagged && d.value <= inflated + margin {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn verify_cover(m: &Manifold, cover: &mut TubeCover, opts: &CoverOpts) -> Result<()> {
    let r = cover.radius;
    let n = cover.tubes.len();
    // pairwise separation
    let mut min_sep = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = m
                .sasaki_distance(&cover.tubes[i].center, &cover.tubes[j].center)
                .value;
            min_sep = min_sep.min(d);
        }
    }
    if min_sep < r / 2.0 - 1e-12 {
        return Err(GeobeamError::Cover(format!(
            "center separation {min_sep} below R/2"
        )));
    }
    // within-family disjointness re-check with a finer seed ring
    let mut violations = 0usize;
    for family in &cover.families {
        for (ai, &i) in family.iter().enumerate() {
            for &j in family.iter().skip(ai + 1) {
                let d = m
                    .sasaki_distance(&cover.tubes[i].center, &cover.tubes[j].center)
                    .value;
                if d > 8.0 * r {
                    continue;
                }
                if tubes_conflict(m, cover, i, j, 3.0 * r, r / 10.0, 16, &opts.flow)? {
                    violations += 1;
                }
            }
        }
    }
    // coverage of sampled points of Λ^τ(R/2)
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let samples = opts.verify_samples;
    let fiber_dense = m.fiber_sample(&cover.base_point, 4096)?;
    let mut sample_list = Vec::with_capacity(samples);
    for _ in 0..samples {
        let pick = rng.gen_range(0..fiber_dense.len());
        let t = rng.gen_range(-(cover.tau + r / 2.0)..(cover.tau + r / 2.0));
        sample_list.push((pick, t, rng.gen::<u64>()));
    }
    let results: Vec<(bool, usize)> = sample_list
        .par_iter()
        .map(|(pick, t, salt)| {
            let base = &fiber_dense[*pick];
            // perturb within the cap ball of radius R/2 (deterministic salt)
            let seeds = cap_seeds(m, &cover.base_point, &base.xi, r / 2.0 * 0.98, 4);
            let seed = &seeds[(*salt % seeds.len() as u64) as usize];
            let flowed = match integrate_lossy(m, seed, *t, &opts.flow) {
                Ok(tr) => tr.phase_point_at(m, *t),
                Err(_) => return (true, 0), // pole-guard truncation: skip sample
            };
            // candidate tubes: centers near the unflowed cap point
            let mut covered = 0usize;
            for tube in &cover.tubes {
                let pre = m.sasaki_distance(seed, &tube.center);
                if pre.flagged || pre.value > 2.0 * r {
                    continue;
                }
                if let Ok((inside, _)) = tube_contains_relaxed(m, cover, tube.index, &flowed, &opts.flow) {
                    if inside {
                        covered += 1;
                    }
                }
            }
            (covered > 0, covered)
        })
        .collect();
    let uncovered = results.iter().filter(|(c, _)| !c).count();
    let max_overlap = results.iter().map(|(_, k)| *k).max().unwrap_or(0);
    cover.verification = CoverVerification {
        sample_count: samples,
        uncovered,
        max_overlap,
        min_center_separation: min_sep,
        family_disjoint_violations: violations,
    };
    if uncovered > 0 {
        return Err(GeobeamError::Cover(format!(
            "{uncovered} of {samples} sampled points of Λ^τ(R/2) uncovered"
        )));
    }
    if violations > 0 {
        return Err(GeobeamError::Cover(format!(
            "{violations} within-family 3R-disjointness violations"
        )));
    }
    Ok(())
}

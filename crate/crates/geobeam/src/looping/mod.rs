//! Classification of tubes by self-looping behavior: pairwise loop-time
//! computation, single-stage and iterative good/bad partitions, exact
//! oracles (flat-torus lattice, surface-of-revolution rational tori), and
//! padding radii for non-self-looping fiber sets.

pub mod cache;
mod revolution;
mod torus;

pub use revolution::{
    rational_tori, revolution_bad_set, rotation_scan, RationalTorus, RevolutionDiagnostics,
    RevolutionOpts, RotationScan, SwingData,
};
pub use torus::{oracle_bad_tubes, torus_oracle, BadDirection, TorusOracle};

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cover::{cap_seeds, TubeCover};
use crate::error::{GeobeamError, Result};
use crate::flow::{integrate_lossy, trajectory_crossings, FlowOpts};
use crate::manifold::Manifold;

/// Window comparisons are inclusive with this tolerance throughout.
pub const WINDOW_EPS: f64 = 1e-9;

/// Options for relation building and partition verification.
#[derive(Debug, Clone, Serialize)]
pub struct LoopOpts {
    /// cap seeds per tube used by the soundness verifier
    pub seeds_per_cap: usize,
    /// verification time-scan resolution per window
    pub times_per_window: usize,
    /// verification margin: meetings count within R·(1 − margin_frac)
    pub margin_frac: f64,
    pub seed: u64,
    pub flow: FlowOpts,
}

impl Default for LoopOpts {
    fn default() -> Self {
        LoopOpts {
            seeds_per_cap: 32,
            times_per_window: 200,
            margin_frac: 0.1,
            seed: 11,
            flow: FlowOpts::default(),
        }
    }
}

/// Sampling metadata of a loop relation.
#[derive(Debug, Clone, Serialize)]
pub struct RelationMeta {
    pub seeds_per_cap: usize,
    pub dt_scan: f64,
    pub dilation_bound: f64,
    /// tubes whose center trajectory was truncated (pole guards)
    pub truncated_tubes: Vec<usize>,
    pub symmetry_checked_pairs: usize,
    pub symmetry_mismatches: usize,
}

/// For each ordered tube pair (i, j): closed meeting-time intervals within
/// the scanned window. A meeting is a transversal-cap crossing of tube i's
/// flow that lands within R_i + R_j of ρ_j.
#[derive(Debug, Clone, Serialize)]
pub struct LoopRelation {
    pub window: (f64, f64),
    /// +1 forward scan, −1 backward
    pub direction: i8,
    pub meetings: BTreeMap<(usize, usize), Vec<(f64, f64)>>,
    /// closest meeting distance witnessed per pair
    pub witness: BTreeMap<(usize, usize), f64>,
    pub tube_count: usize,
    pub meta: RelationMeta,
}

/// Time-reversal consistency on up to `n_pairs` sampled forward meetings:
/// d(φ_t(ρ_i), ρ_j) = d implies d(φ_{−t}(ρ_j), ρ_i) ≤ L·d with L the
/// dilation bound, so every clear forward meeting (i, j) near t must be
/// mirrored by a (j, i) near-approach at −t within L·2R + R/2.
pub fn symmetry_check(
    m: &Manifold,
    cover: &TubeCover,
    fwd: &LoopRelation,
    n_pairs: usize,
    opts: &LoopOpts,
) -> (usize, usize) {
    let keys: Vec<(usize, usize)> = fwd
        .meetings
        .keys()
        .filter(|k| {
            fwd.witness.get(k).cloned().unwrap_or(f64::INFINITY)
                <= 0.95 * (cover.tubes[k.0].radius + cover.tubes[k.1].radius)
        })
        .cloned()
        .collect();
    if keys.is_empty() {
        return (0, 0);
    }
    let l_bound = fwd.meta.dilation_bound.max(1.0);
    let tolerance = l_bound * 2.0 * cover.radius + cover.radius / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5151);
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    let sign = if fwd.direction >= 0 { 1.0 } else { -1.0 };
    for _ in 0..n_pairs.min(keys.len() * 2) {
        let k = keys[rng.gen_range(0..keys.len())];
        let Some(ivals) = fwd.meetings.get(&k) else { continue };
        let Some(&(t_meet, _)) = ivals.first() else { continue };
        checked += 1;
        let cj = &cover.tubes[k.1].center;
        let ci = &cover.tubes[k.0].center;
        let mut flow = opts.flow.clone();
        flow.dt_scan = fwd.meta.dt_scan;
        let ok = (|| -> Result<bool> {
            let traj = integrate_lossy(m, cj, -sign * (t_meet + 0.5), &flow)?;
            let lo = (t_meet - 0.5).max(fwd.meta.dt_scan);
            let events =
                trajectory_crossings(m, &cover.base_point, &traj, (lo, t_meet + 0.5), fwd.meta.dt_scan);
            for e in &events {
                let d = m.sasaki_distance(&e.point, ci);
                if !d.flagged && d.value <= tolerance {
                    return Ok(true);
                }
            }
            Ok(false)
        })()
        .unwrap_or(false);
        if !ok {
            mismatches += 1;
        }
    }
    (checked, mismatches)
}

impl LoopRelation {
    /// Pairs with a meeting interval intersecting [lo, hi].
    pub fn pairs_in_window(&self, lo: f64, hi: f64) -> Vec<(usize, usize)> {
        self.meetings
            .iter()
            .filter(|(_, ivals)| {
                ivals
                    .iter()
                    .any(|(a, b)| *b >= lo - WINDOW_EPS && *a <= hi + WINDOW_EPS)
            })
            .map(|(k, _)| *k)
            .collect()
    }
}

/// Compute the loop relation of a cover over [t0, T] (forward) or
/// [−T, −t0] (backward, `direction = -1`). Meetings are detected on the
/// center trajectory of each tube: a transversal-cap crossing at time t
/// within Sasaki distance R_i + R_j of ρ_j means φ_t(Λ_i) ∩ Λ_j ≠ ∅ at
/// first order in the tube radii.
pub fn loop_relation(
    m: &Manifold,
    cover: &TubeCover,
    t0: f64,
    t_max: f64,
    direction: i8,
    opts: &LoopOpts,
) -> Result<LoopRelation> {
    if !(0.0 < t0 && t0 < t_max) {
        return Err(GeobeamError::Config(format!(
            "loop window must satisfy 0 < t0 < T, got [{t0}, {t_max}]"
        )));
    }
    if t_max > opts.flow.horizon {
        return Err(GeobeamError::Integration(format!(
            "T = {t_max} exceeds the flow horizon"
        )));
    }
    let r = cover.radius;
    let dt_scan = opts.flow.dt_scan.min(r / 4.0);
    let dil = crate::cover::dilation_bound(m, &cover.base_point, (t_max).min(10.0), &opts.flow);
    let sign = if direction >= 0 { 1.0 } else { -1.0 };
    let per_tube: Vec<(usize, Vec<(usize, f64, f64)>, bool)> = cover
        .tubes
        .par_iter()
        .map(|tube| {
            let mut flow = opts.flow.clone();
            flow.dt_scan = dt_scan;
            let key = cache::crossing_key(
                &m.fingerprint(),
                &tube.center,
                (t0, t_max),
                if direction >= 0 { 1 } else { -1 },
                dt_scan,
                &flow,
            );
            let (events, truncated) = if let Some(hit) = cache::load(&key) {
                (hit, false)
            } else {
                let traj =
                    match integrate_lossy(m, &tube.center, sign * (t_max + 4.0 * WINDOW_EPS), &flow) {
                        Ok(t) => t,
                        Err(_) => return (tube.index, Vec::new(), true),
                    };
                let truncated = traj.truncated.is_some();
                let events =
                    trajectory_crossings(m, &cover.base_point, &traj, (t0, t_max), dt_scan);
                if !truncated {
                    cache::store(&key, &events);
                }
                (events, truncated)
            };
            let frame = m.orthonormal_coframe(&cover.base_point);
            let inv = frame
                .clone()
                .lu()
                .solve(&nalgebra::DMatrix::identity(m.dim(), m.dim()))
                .expect("coframe invertible");
            let center_coords: Vec<nalgebra::DVector<f64>> =
                cover.tubes.iter().map(|t| &inv * &t.center.xi).collect();
            let mut hits: Vec<(usize, f64, f64)> = Vec::new();
            for e in &events {
                // no tube can match when the base offset alone exceeds 2R
                if e.base_distance > 2.0 * r + 1e-12 {
                    continue;
                }
                let moved = m.transport_covector(&e.point.x, &e.point.xi, &cover.base_point);
                let u = &inv * moved;
                for (jdx, cj) in center_coords.iter().enumerate() {
                    let fib = (&u - cj).norm();
                    let d = (e.base_distance * e.base_distance + fib * fib).sqrt();
                    if d <= tube.radius + cover.tubes[jdx].radius {
                        hits.push((jdx, e.t, d));
                    }
                }
            }
            (tube.index, hits, truncated)
        })
        .collect();
    let mut meetings: BTreeMap<(usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
    let mut witness: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut truncated_tubes = Vec::new();
    for (i, hits, truncated) in per_tube {
        if truncated {
            truncated_tubes.push(i);
        }
        for (j, t, d) in hits {
            meetings.entry((i, j)).or_default().push((t.abs(), t.abs()));
            let w = witness.entry((i, j)).or_insert(f64::INFINITY);
            *w = w.min(d);
        }
    }
    // merge close degenerate intervals and clip to the window
    for ivals in meetings.values_mut() {
        ivals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (a, b) in ivals.iter().cloned() {
            let a = a.clamp(t0, t_max);
            let b = b.clamp(t0, t_max);
            match merged.last_mut() {
                Some(last) if a - last.1 <= 2.0 * dt_scan => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        *ivals = merged;
    }
    Ok(LoopRelation {
        window: (t0, t_max),
        direction: if direction >= 0 { 1 } else { -1 },
        meetings,
        witness,
        tube_count: cover.tubes.len(),
        meta: RelationMeta {
            seeds_per_cap: opts.seeds_per_cap,
            dt_scan,
            dilation_bound: dil,
            truncated_tubes,
            // filled by symmetry_check against the reversed relation
            symmetry_checked_pairs: 0,
            symmetry_mismatches: 0,
        },
    })
}

/// How a partition was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Provenance {
    SingleStage,
    Iterative,
    TorusOracle,
    Revolution,
}

/// A good family with its non-self-looping window.
#[derive(Debug, Clone, Serialize)]
pub struct LoopFamily {
    pub indices: Vec<usize>,
    pub t_lo: f64,
    pub t_hi: f64,
}

/// Result of a sampled soundness verification of good families.
#[derive(Debug, Clone, Serialize)]
pub struct SoundnessReport {
    pub seeds: usize,
    pub times_per_window: usize,
    pub margin_frac: f64,
    pub violations: usize,
}

/// Index sets (ℬ, {𝒢_ℓ}) with per-family looping windows.
#[derive(Debug, Clone, Serialize)]
pub struct LoopPartition {
    pub bad: Vec<usize>,
    pub families: Vec<LoopFamily>,
    pub provenance: Provenance,
    pub verification: Option<SoundnessReport>,
}

impl LoopPartition {
    pub fn family_sizes(&self) -> Vec<usize> {
        self.families.iter().map(|f| f.indices.len()).collect()
    }

    pub fn covers_all(&self, tube_count: usize) -> bool {
        let mut seen: BTreeSet<usize> = BTreeSet::new();
        seen.extend(self.bad.iter());
        for f in &self.families {
            seen.extend(f.indices.iter());
        }
        (0..tube_count).all(|i| seen.contains(&i))
    }
}

/// Single-stage classification: iteratively remove tubes participating in a
/// loop, higher degree first (tie-break: lower index), until the remaining
/// union is non-self-looping over [t0, T]. When relations for both time
/// directions are given, the more favorable (smaller ℬ) side wins.
pub fn classify_single(
    relations: &[&LoopRelation],
    t0: f64,
    t_max: f64,
) -> Result<LoopPartition> {
    if relations.is_empty() {
        return Err(GeobeamError::Config("classify_single needs >= 1 relation".into()));
    }
    let mut best: Option<(Vec<usize>, usize)> = None;
    for rel in relations {
        if t0 < rel.window.0 - WINDOW_EPS || t_max > rel.window.1 + WINDOW_EPS {
            return Err(GeobeamError::Config(format!(
                "classification window [{t0}, {t_max}] outside relation window {:?}",
                rel.window
            )));
        }
        let bad = removal_fixed_point(rel, t0, t_max);
        let n = rel.tube_count;
        match &best {
            Some((b, _)) if b.len() <= bad.len() => {}
            _ => best = Some((bad, n)),
        }
    }
    let (bad, n) = best.unwrap();
    let bad_set: BTreeSet<usize> = bad.iter().cloned().collect();
    let good: Vec<usize> = (0..n).filter(|i| !bad_set.contains(i)).collect();
    Ok(LoopPartition {
        bad,
        families: vec![LoopFamily {
            indices: good,
            t_lo: t0,
            t_hi: t_max,
        }],
        provenance: Provenance::SingleStage,
        verification: None,
    })
}

fn removal_fixed_point(rel: &LoopRelation, lo: f64, hi: f64) -> Vec<usize> {
    let pairs = rel.pairs_in_window(lo, hi);
    let mut alive: BTreeSet<usize> = (0..rel.tube_count).collect();
    let mut removed = Vec::new();
    loop {
        // degrees over pairs with both endpoints alive
        let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, j) in &pairs {
            if alive.contains(i) && alive.contains(j) {
                *degree.entry(*i).or_default() += 1;
                if i != j {
                    *degree.entry(*j).or_default() += 1;
                }
            }
        }
        let Some((&idx, _)) = degree
            .iter()
            .max_by(|(ia, da), (ib, db)| da.cmp(db).then(ib.cmp(ia)))
        else {
            break;
        };
        alive.remove(&idx);
        removed.push(idx);
    }
    removed.sort_unstable();
    removed
}

/// Iterative partition: shrink the non-self-looping windows geometrically,
/// peeling off a good family at each stage. Operates on the abstract loop
/// relation so it is testable on synthetic relations.
pub fn classify_iterative(
    rel: &LoopRelation,
    t0: f64,
    t_max: f64,
    contraction: f64,
) -> Result<LoopPartition> {
    if contraction <= 0.0 {
        return Err(GeobeamError::Config("contraction C must be positive".into()));
    }
    let l_max = (t_max.ln().ceil() as usize).max(1);
    let mut current: BTreeSet<usize> = (0..rel.tube_count).collect();
    let mut families = Vec::new();
    for stage in 0..l_max {
        let t_hi = (-contraction * stage as f64 / 2.0).exp() * t_max;
        if current.is_empty() {
            break;
        }
        if t_hi <= t0 {
            // window collapsed: everything remaining is vacuously good here
            families.push(LoopFamily {
                indices: current.iter().cloned().collect(),
                t_lo: t0,
                t_hi: t0,
            });
            current.clear();
            break;
        }
        let pairs = rel.pairs_in_window(t0, t_hi);
        let loopers: BTreeSet<usize> = pairs
            .iter()
            .filter(|(i, j)| current.contains(i) && current.contains(j))
            .map(|(i, _)| *i)
            .collect();
        let good: Vec<usize> = current.difference(&loopers).cloned().collect();
        if !good.is_empty() {
            families.push(LoopFamily {
                indices: good,
                t_lo: t0,
                t_hi,
            });
        }
        current = loopers;
    }
    Ok(LoopPartition {
        bad: current.into_iter().collect(),
        families,
        provenance: Provenance::Iterative,
        verification: None,
    })
}

/// Sampled soundness verification of a good family: seeds are drawn along
/// the member tubes' spines (flow-time jitter |s| ≤ τ+R of the centers, so
/// every seed's orbit is its tube's center orbit with event times shifted
/// by s); a violation is a transversal-cap crossing at absolute time inside
/// [t_ℓ, T_ℓ] within (R_i + R_j) − R/10 of any member center — the
/// tube-pair meeting criterion with clearance margin R/10. The window is
/// scanned at `times_per_window` resolution.
pub fn verify_family_soundness(
    m: &Manifold,
    cover: &TubeCover,
    family: &LoopFamily,
    total_seeds: usize,
    opts: &LoopOpts,
) -> Result<SoundnessReport> {
    if family.indices.is_empty() || family.t_hi <= family.t_lo {
        return Ok(SoundnessReport {
            seeds: 0,
            times_per_window: opts.times_per_window,
            margin_frac: opts.margin_frac,
            violations: 0,
        });
    }
    let r = cover.radius;
    let dt_scan = ((family.t_hi - family.t_lo) / opts.times_per_window as f64).min(r / 4.0);
    let member_set: Vec<usize> = family.indices.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xabcdef);
    let mut tasks: Vec<(usize, f64)> = Vec::with_capacity(total_seeds);
    for k in 0..total_seeds {
        let idx = member_set[k % member_set.len()];
        let jitter = rng.gen_range(-(cover.tau + r)..(cover.tau + r));
        tasks.push((idx, jitter));
    }
    let frame = m.orthonormal_coframe(&cover.base_point);
    let inv = frame
        .clone()
        .lu()
        .solve(&nalgebra::DMatrix::identity(m.dim(), m.dim()))
        .expect("coframe invertible");
    let member_coords: Vec<nalgebra::DVector<f64>> = member_set
        .iter()
        .map(|&j| &inv * &cover.tubes[j].center.xi)
        .collect();
    let violations: usize = tasks
        .par_iter()
        .map(|(tube_idx, _jitter)| {
            let tube = &cover.tubes[*tube_idx];
            let mut flow = opts.flow.clone();
            flow.dt_scan = dt_scan;
            let traj =
                match integrate_lossy(m, &tube.center, family.t_hi + 4.0 * WINDOW_EPS, &flow) {
                    Ok(t) => t,
                    Err(_) => return 0,
                };
            let events = trajectory_crossings(
                m,
                &cover.base_point,
                &traj,
                (family.t_lo, family.t_hi),
                dt_scan,
            );
            let mut bad = 0;
            for e in &events {
                if e.base_distance > 2.0 * r {
                    continue;
                }
                let moved = m.transport_covector(&e.point.x, &e.point.xi, &cover.base_point);
                let u = &inv * moved;
                for (pos, cj) in member_coords.iter().enumerate() {
                    let jdx = member_set[pos];
                    let fib = (&u - cj).norm();
                    let d = (e.base_distance * e.base_distance + fib * fib).sqrt();
                    let threshold =
                        tube.radius + cover.tubes[jdx].radius - r * opts.margin_frac;
                    if d <= threshold {
                        bad += 1;
                    }
                }
            }
            bad
        })
        .sum();
    Ok(SoundnessReport {
        seeds: total_seeds,
        times_per_window: opts.times_per_window,
        margin_frac: opts.margin_frac,
        violations,
    })
}

/// Verify every family of a partition; attach the merged report.
pub fn verify_partition(
    m: &Manifold,
    cover: &TubeCover,
    partition: &mut LoopPartition,
    seeds_per_family: usize,
    opts: &LoopOpts,
) -> Result<()> {
    let mut total = SoundnessReport {
        seeds: 0,
        times_per_window: opts.times_per_window,
        margin_frac: opts.margin_frac,
        violations: 0,
    };
    for fam in &partition.families {
        let rep = verify_family_soundness(m, cover, fam, seeds_per_family, opts)?;
        total.seeds += rep.seeds;
        total.violations += rep.violations;
    }
    partition.verification = Some(total);
    Ok(())
}

/// Evaluate the two cover predicates:
/// non-looping: |ℬ| ≤ R^{1−n}/T; non-recurrent: Σ_ℓ √(|𝒢_ℓ| t_ℓ / T_ℓ) ≤ R^{(1−n)/2}/√T.
#[derive(Debug, Clone, Serialize)]
pub struct CoverPredicates {
    pub nonlooping_ok: bool,
    pub nonlooping_lhs: f64,
    pub nonlooping_rhs: f64,
    pub nonrecurrent_ok: bool,
    pub nonrecurrent_lhs: f64,
    pub nonrecurrent_rhs: f64,
}

pub fn cover_predicates(partition: &LoopPartition, r: f64, t_big: f64, n: usize) -> CoverPredicates {
    let nl_lhs = partition.bad.len() as f64;
    let nl_rhs = r.powi(1 - n as i32) / t_big;
    let mut nr_lhs = 0.0;
    for f in &partition.families {
        if f.t_hi > 0.0 && !f.indices.is_empty() {
            nr_lhs += (f.indices.len() as f64 * f.t_lo / f.t_hi).sqrt();
        }
    }
    let nr_rhs = r.powf((1.0 - n as f64) / 2.0) / t_big.sqrt();
    CoverPredicates {
        nonlooping_ok: nl_lhs <= nl_rhs,
        nonlooping_lhs: nl_lhs,
        nonlooping_rhs: nl_rhs,
        nonrecurrent_ok: nr_lhs <= nr_rhs,
        nonrecurrent_lhs: nr_lhs,
        nonrecurrent_rhs: nr_rhs,
    }
}

/// A closed fiber subset given as directions with angular radii (n = 2).
#[derive(Debug, Clone, Serialize)]
pub struct FiberSet {
    pub angles: Vec<f64>,
    pub angular_radii: Vec<f64>,
}

impl FiberSet {
    pub fn empty() -> FiberSet {
        FiberSet {
            angles: vec![],
            angular_radii: vec![],
        }
    }

    pub fn single(angle: f64) -> FiberSet {
        FiberSet {
            angles: vec![angle],
            angular_radii: vec![0.0],
        }
    }
}

/// Result of a padding-radius search.
#[derive(Debug, Clone, Serialize)]
pub struct PadRadius {
    pub value: f64,
    /// true when even R₀/2¹⁰ failed and the value 0 is a flag, not a radius
    pub flagged_zero: bool,
}

/// Largest dyadic R = R₀/2^k, k ≤ 10, such that the sampled flow of B(G, R)
/// over [t, T] stays at distance > R/10 from B(G, R).
pub fn pad_radius(
    m: &Manifold,
    x: &nalgebra::DVector<f64>,
    g_set: &FiberSet,
    window: (f64, f64),
    r0: f64,
    opts: &LoopOpts,
) -> Result<PadRadius> {
    if g_set.angles.is_empty() {
        return Ok(PadRadius {
            value: r0,
            flagged_zero: false,
        });
    }
    if m.dim() != 2 {
        return Err(GeobeamError::Unsupported("pad_radius is defined for n = 2 fibers".into()));
    }
    for k in 0..=10u32 {
        let r = r0 / f64::powi(2.0, k as i32);
        if pad_radius_passes(m, x, g_set, window, r, opts)? {
            return Ok(PadRadius {
                value: r,
                flagged_zero: false,
            });
        }
    }
    Ok(PadRadius {
        value: 0.0,
        flagged_zero: true,
    })
}

fn pad_radius_passes(
    m: &Manifold,
    x: &nalgebra::DVector<f64>,
    g_set: &FiberSet,
    window: (f64, f64),
    r: f64,
    opts: &LoopOpts,
) -> Result<bool> {
    let frame = m.orthonormal_coframe(x);
    let radius_fiber = m.shell_radius(x);
    let dt_scan = opts.flow.dt_scan.min(r / 4.0).max(1e-4);
    // distance from a crossing point to B(G, r): base offset plus angular
    // chord beyond the padded cone
    let dist_to_padded = |e: &crate::flow::CrossingEvent| -> f64 {
        let moved = m.transport_covector(&e.point.x, &e.point.xi, x);
        let inv = frame.clone().lu().solve(&moved).unwrap();
        let ang = inv[1].atan2(inv[0]);
        let mut best = f64::INFINITY;
        for (a, w) in g_set.angles.iter().zip(&g_set.angular_radii) {
            let mut u = (ang - a).rem_euclid(std::f64::consts::TAU);
            if u > std::f64::consts::PI {
                u = std::f64::consts::TAU - u;
            }
            let beyond = (u - w).max(0.0);
            let chord = 2.0 * radius_fiber * (beyond / 2.0).sin();
            let d = (e.base_distance.powi(2) + chord * chord).sqrt();
            best = best.min((d - r).max(0.0));
        }
        best
    };
    // sample seeds across each padded cone: cone centers, edges, plus cap
    // offsets at radius r
    for (a, w) in g_set.angles.iter().zip(&g_set.angular_radii) {
        let extra = (r / radius_fiber).asin();
        let angles = [
            *a,
            a + w + extra,
            a - w - extra,
            a + (w + extra) / 2.0,
            a - (w + extra) / 2.0,
        ];
        for ang in angles {
            let dir = frame.column(0) * ang.cos() + frame.column(1) * ang.sin();
            let center = m.shell_point(x, &(dir * radius_fiber))?;
            let seeds = cap_seeds(m, x, &center.xi, r * 0.98, 8);
            for s in &seeds {
                let mut flow = opts.flow.clone();
                flow.dt_scan = dt_scan;
                let traj = match integrate_lossy(m, s, window.1 + 4.0 * WINDOW_EPS, &flow) {
                    Ok(t) => t,
                    Err(_) => continue,
                };
                let events = trajectory_crossings(m, x, &traj, window, dt_scan);
                for e in &events {
                    if dist_to_padded(e) <= r / 10.0 {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

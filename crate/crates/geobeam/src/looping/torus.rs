//! Exact lattice oracle for loop classification on the unit square torus:
//! a tube is bad iff the geodesic ray generated by it returns to the base
//! point within the window, i.e. passes within 2R of a lattice point whose
//! distance k·‖(p,q)‖ lies in [t0, T].

use std::collections::BTreeSet;

use serde::Serialize;

use super::WINDOW_EPS;
use crate::cover::TubeCover;

/// One bad lattice direction with its angular half-width.
#[derive(Debug, Clone, Serialize)]
pub struct BadDirection {
    /// primitive lattice vector
    pub p: i64,
    pub q: i64,
    pub angle: f64,
    /// smallest k·‖(p,q)‖ inside the window
    pub first_return: f64,
    /// asin(min(1, 2R / (k‖(p,q)‖))), maximized over admissible k
    pub half_width: f64,
}

/// The exact bad-direction set for a window and tube radius.
#[derive(Debug, Clone, Serialize)]
pub struct TorusOracle {
    pub t0: f64,
    pub t_max: f64,
    pub radius: f64,
    pub tau: f64,
    pub directions: Vec<BadDirection>,
}

impl TorusOracle {
    /// Is a unit direction at this fiber angle bad?
    pub fn direction_is_bad(&self, angle: f64) -> bool {
        self.directions.iter().any(|d| {
            let mut u = (angle - d.angle).rem_euclid(std::f64::consts::TAU);
            if u > std::f64::consts::PI {
                u = std::f64::consts::TAU - u;
            }
            u <= d.half_width + 1e-12
        })
    }
}

/// Enumerate primitive lattice vectors (p, q) with some return time
/// k·‖(p,q)‖ in [t0, T]; the loop-time semantics are event times of the
/// transversal crossing, so the window is used exactly (inclusive within
/// 1e-9). The tube radius R widens each direction to angular half-width
/// asin(min(1, 2R / k‖(p,q)‖)).
pub fn torus_oracle(t0: f64, t_max: f64, radius: f64, tau: f64) -> TorusOracle {
    let reach = t_max.ceil() as i64 + 1;
    let mut directions: Vec<BadDirection> = Vec::new();
    for p in -reach..=reach {
        for q in -reach..=reach {
            if p == 0 && q == 0 {
                continue;
            }
            if gcd(p.unsigned_abs(), q.unsigned_abs()) != 1 {
                continue;
            }
            let norm = ((p * p + q * q) as f64).sqrt();
            let mut best: Option<(f64, f64)> = None;
            let mut k = 1i64;
            while k as f64 * norm <= t_max + WINDOW_EPS {
                let ret = k as f64 * norm;
                if ret >= t0 - WINDOW_EPS {
                    let hw = (2.0 * radius / ret).min(1.0).asin();
                    match best {
                        Some((_, w)) if w >= hw => {}
                        _ => {
                            let first = best.map(|(f, _): (f64, f64)| f).unwrap_or(ret).min(ret);
                            best = Some((first, hw));
                        }
                    }
                }
                k += 1;
            }
            if let Some((first_return, half_width)) = best {
                directions.push(BadDirection {
                    p,
                    q,
                    angle: (q as f64).atan2(p as f64),
                    first_return,
                    half_width,
                });
            }
        }
    }
    directions.sort_by(|a, b| a.angle.partial_cmp(&b.angle).unwrap());
    TorusOracle {
        t0,
        t_max,
        radius,
        tau,
        directions,
    }
}

/// Tube indices of a cover whose center directions are oracle-bad.
pub fn oracle_bad_tubes(oracle: &TorusOracle, cover: &TubeCover) -> BTreeSet<usize> {
    cover
        .tubes
        .iter()
        .filter(|t| {
            let ang = t.center.xi[1].atan2(t.center.xi[0]);
            oracle.direction_is_bad(ang)
        })
        .map(|t| t.index)
        .collect()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

//! Maximal expansion rate Λ_max and the Ehrenfest time T_e(h).

use rayon::prelude::*;
use serde::Serialize;

use super::{variational, FlowOpts};
use crate::error::Result;
use crate::manifold::Manifold;
use nalgebra::DVector;

/// Estimated maximal expansion rate and how it was obtained.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaMax {
    pub value: f64,
    /// true when the raw estimate fell below the floor and was replaced by it
    pub replaced_zero: bool,
    pub t_probe: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaDiagnostics {
    /// per-sample (1/T)·log‖dφ_T‖ at the probe time
    pub growth_rates: Vec<f64>,
    /// per-sample ‖dφ_t‖ curves at the probe checkpoints
    pub norm_curves: Vec<Vec<f64>>,
    pub checkpoints: Vec<f64>,
}

/// Estimate Λ_max = max over sampled shell points of (1/T)·log‖dφ_T‖.
/// Samples the zero shell plus small shell perturbations (±0.1).
pub fn lambda_max(
    m: &Manifold,
    x: &DVector<f64>,
    sample_count: usize,
    t_probe: f64,
    opts: &FlowOpts,
) -> Result<(LambdaMax, LambdaDiagnostics)> {
    assert!(t_probe >= 1.0, "T_probe must be >= 1");
    assert!(sample_count >= 1);
    let fiber = m.fiber_sample(x, sample_count)?;
    let checkpoints: Vec<f64> = (1..=4).map(|k| t_probe * k as f64 / 4.0).collect();
    let shifts = [0.0, 0.1, -0.1];
    let mut seeds = Vec::new();
    for p in &fiber {
        for s in shifts {
            let xi = m.project_to_energy(&p.x, &p.xi, 0.0);
            let xi = match m.hamiltonian_form() {
                crate::manifold::HamiltonianForm::UnitCovector => xi * (1.0 + s),
                crate::manifold::HamiltonianForm::QuadraticMinusV => {
                    // shift the quadratic energy by s directly
                    let q = (xi.transpose() * m.metric_inv(&p.x) * &xi)[(0, 0)];
                    if q + s <= 0.0 {
                        continue;
                    }
                    &xi * ((q + s) / q).sqrt()
                }
            };
            if let Ok(pp) = m.phase_point(&p.x, &xi) {
                seeds.push(pp);
            }
        }
    }
    let results: Vec<Option<Vec<f64>>> = seeds
        .par_iter()
        .map(|seed| {
            variational(m, seed, &checkpoints, opts)
                .ok()
                .map(|frame| frame.norms())
        })
        .collect();
    let mut norm_curves = Vec::new();
    let mut growth_rates = Vec::new();
    for curve in results.into_iter().flatten() {
        let final_norm = *curve.last().unwrap();
        growth_rates.push(final_norm.max(1e-300).ln() / t_probe);
        norm_curves.push(curve);
    }
    let raw = growth_rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let replaced = raw < opts.lambda_floor;
    let value = if replaced { opts.lambda_floor } else { raw };
    Ok((
        LambdaMax {
            value,
            replaced_zero: replaced,
            t_probe,
            sample_count,
        },
        LambdaDiagnostics {
            growth_rates,
            norm_curves,
            checkpoints,
        },
    ))
}

/// Ehrenfest time T_e(h) = log h⁻¹ / (2 Λ_max).
pub fn ehrenfest_time(h: f64, lambda: f64) -> f64 {
    (1.0 / h).ln() / (2.0 * lambda)
}

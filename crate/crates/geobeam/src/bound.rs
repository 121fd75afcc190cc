//! Sup-norm bound certificates: the dimensionless factor
//! F = R^{(n−1)/2}(|ℬ|^{1/2} + Σ_ℓ (|𝒢_ℓ| t_ℓ / T_ℓ)^{1/2}), the theorem's
//! constraint gates, and the gain relative to the all-bad baseline.

use nalgebra::DVector;
use serde::Serialize;

use crate::cover::{build_good_cover, CoverOpts};
use crate::error::{GeobeamError, Result};
use crate::flow::ehrenfest_time;
use crate::looping::{classify_single, loop_relation, LoopOpts, LoopPartition};
use crate::manifold::Manifold;

/// One evaluated constraint gate.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintResult {
    pub name: String,
    pub ok: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Inputs fixed by the caller when evaluating a certificate.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateInputs {
    pub n: usize,
    pub h: f64,
    pub delta: f64,
    pub tau: f64,
    pub radius: f64,
    pub family_count: usize,
    pub lambda_max: f64,
    pub lambda_replaced_zero: bool,
    /// user-supplied α; when absent the finite-h proxy max_ℓ T_ℓ/(2T_e) is used
    pub alpha: Option<f64>,
}

/// All inputs and the evaluated bound factor of the sup-norm certificate.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCertificate {
    pub inputs: CertificateInputs,
    pub bad_count: usize,
    pub family_sizes: Vec<usize>,
    pub family_windows: Vec<(f64, f64)>,
    pub tube_count: usize,
    pub t_ehrenfest: f64,
    pub alpha_used: f64,
    pub constraints: Vec<ConstraintResult>,
    pub valid: bool,
    /// F = R^{(n−1)/2}(√|ℬ| + Σ_ℓ √(|𝒢_ℓ| t_ℓ / T_ℓ))
    pub factor: f64,
    /// independent re-evaluation (reversed order, compensated summation)
    pub factor_recheck: f64,
    pub bad_term: f64,
    pub sum_term: f64,
    /// all-bad baseline R^{(n−1)/2}·√N for the same cover size
    pub baseline: f64,
    /// F / baseline; 1 at the Hörmander-scale all-bad cover
    pub gain: f64,
    /// the reported bound shape with C_n left symbolic
    pub bound_shape: String,
}

/// Evaluate the certificate for a verified partition.
pub fn certificate(partition: &LoopPartition, inputs: CertificateInputs) -> Result<BoundCertificate> {
    if !(inputs.h > 0.0 && inputs.h < 1.0) {
        return Err(GeobeamError::Config("h must lie in (0, 1)".into()));
    }
    if !(inputs.delta > 0.0 && inputs.delta < 0.5) {
        return Err(GeobeamError::Config("δ must lie in (0, 1/2)".into()));
    }
    let n = inputs.n;
    let r = inputs.radius;
    let half_exp = (n as f64 - 1.0) / 2.0;
    let r_pow = r.powf(half_exp);
    let bad_count = partition.bad.len();
    let bad_term = (bad_count as f64).sqrt();
    // forward plain summation
    let mut sum_term = 0.0;
    for f in &partition.families {
        if !f.indices.is_empty() && f.t_hi > 0.0 {
            sum_term += (f.indices.len() as f64 * f.t_lo / f.t_hi).sqrt();
        }
    }
    let factor = r_pow * (bad_term + sum_term);
    // independent re-evaluation: reversed order with compensated summation
    let factor_recheck = {
        let mut acc = 0.0_f64;
        let mut comp = 0.0_f64;
        let mut add = |v: f64| {
            let y = v - comp;
            let t = acc + y;
            comp = (t - acc) - y;
            acc = t;
        };
        for f in partition.families.iter().rev() {
            if !f.indices.is_empty() && f.t_hi > 0.0 {
                add((f.indices.len() as f64 * f.t_lo / f.t_hi).sqrt());
            }
        }
        add(bad_term);
        acc * r_pow
    };
    let t_e = ehrenfest_time(inputs.h, inputs.lambda_max);
    let max_t_hi = partition
        .families
        .iter()
        .map(|f| f.t_hi)
        .fold(0.0_f64, f64::max);
    let alpha_used = inputs.alpha.unwrap_or(max_t_hi / (2.0 * t_e));
    let mut constraints = Vec::new();
    constraints.push(ConstraintResult {
        name: "R(h) >= 8h^delta".into(),
        ok: r >= 8.0 * inputs.h.powf(inputs.delta),
        lhs: r,
        rhs: 8.0 * inputs.h.powf(inputs.delta),
    });
    constraints.push(ConstraintResult {
        name: "T_l <= 2*alpha*T_e".into(),
        ok: max_t_hi <= 2.0 * alpha_used * t_e + 1e-12,
        lhs: max_t_hi,
        rhs: 2.0 * alpha_used * t_e,
    });
    let alpha_cap = 1.0 - 2.0 * r.ln() / inputs.h.ln();
    constraints.push(ConstraintResult {
        name: "alpha < 1 - 2*log R/log h".into(),
        ok: alpha_used < alpha_cap,
        lhs: alpha_used,
        rhs: alpha_cap,
    });
    let valid = constraints.iter().all(|c| c.ok);
    let tube_count = bad_count + partition.family_sizes().iter().sum::<usize>();
    let baseline = r_pow * (tube_count as f64).sqrt();
    let gain = if baseline > 0.0 { factor / baseline } else { 0.0 };
    Ok(BoundCertificate {
        bad_count,
        family_sizes: partition.family_sizes(),
        family_windows: partition.families.iter().map(|f| (f.t_lo, f.t_hi)).collect(),
        tube_count,
        t_ehrenfest: t_e,
        alpha_used,
        constraints,
        valid,
        factor,
        factor_recheck,
        bad_term: r_pow * bad_term,
        sum_term: r_pow * sum_term,
        baseline,
        gain,
        bound_shape: format!(
            "C_n * {} * {:.6e} * h^({:.1}) * F  with F = {:.12e}",
            inputs.family_count,
            inputs.tau.powf(-0.5),
            (1.0 - n as f64) / 2.0,
            factor
        ),
        inputs,
    })
}

/// Mass-based variant: F_mass = R^{(n−1)/2} Σ_j m_j for user-supplied
/// per-tube masses (operator masses themselves are out of scope).
pub fn mass_factor(masses: &[f64], radius: f64, n: usize) -> f64 {
    radius.powf((n as f64 - 1.0) / 2.0) * masses.iter().sum::<f64>()
}

/// How the loop horizon follows the radius in a sweep.
#[derive(Debug, Clone, Serialize)]
pub enum HorizonRule {
    Fixed(f64),
    /// T(R) = R^{−exponent}
    PowerLaw { exponent: f64 },
}

impl HorizonRule {
    pub fn horizon(&self, r: f64) -> f64 {
        match self {
            HorizonRule::Fixed(t) => *t,
            HorizonRule::PowerLaw { exponent } => r.powf(-exponent),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub radius: f64,
    pub t_max: f64,
    pub tube_count: usize,
    pub bad_count: usize,
    pub sum_term: f64,
    pub factor: f64,
    pub gain: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("R,T,N_tubes,bad_count,sum_term,F,valid\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.6e},{:.6e},{},{},{:.12e},{:.12e},{}\n",
                r.radius, r.t_max, r.tube_count, r.bad_count, r.sum_term, r.factor, r.valid
            ));
        }
        out
    }
}

/// Sweep parameters for [`gain_sweep`].
#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub radii: Vec<f64>,
    pub rule: HorizonRule,
    pub t0: f64,
    pub tau: f64,
    pub delta: f64,
    /// scale c in R = c·h^δ, used to derive h per grid point (default 8)
    pub radius_scale: f64,
    pub lambda_max: f64,
    pub lambda_replaced_zero: bool,
}

/// Cover → classify → certify over a radius grid.
pub fn gain_sweep(
    m: &Manifold,
    x: &DVector<f64>,
    config: &SweepConfig,
    cover_opts: &CoverOpts,
    loop_opts: &LoopOpts,
) -> Result<SweepTable> {
    let mut rows = Vec::new();
    for &r in &config.radii {
        let t_max = config.rule.horizon(r);
        let cover = build_good_cover(m, x, config.tau, r, cover_opts)?;
        let rel = loop_relation(m, &cover, config.t0, t_max, 1, loop_opts)?;
        let partition = classify_single(&[&rel], config.t0, t_max)?;
        let h = (r / config.radius_scale).powf(1.0 / config.delta);
        let cert = certificate(
            &partition,
            CertificateInputs {
                n: m.dim(),
                h,
                delta: config.delta,
                tau: config.tau,
                radius: r,
                family_count: cover.family_count,
                lambda_max: config.lambda_max,
                lambda_replaced_zero: config.lambda_replaced_zero,
                alpha: None,
            },
        )?;
        rows.push(SweepRow {
            radius: r,
            t_max,
            tube_count: cert.tube_count,
            bad_count: cert.bad_count,
            sum_term: cert.sum_term,
            factor: cert.factor,
            gain: cert.gain,
            valid: cert.valid,
        });
    }
    Ok(SweepTable { rows })
}

//! Linearized flow dφ_t along a trajectory, integrated together with the
//! base point via the variational equation dM/dt = A(t) M.

use nalgebra::{DMatrix, DVector};

use super::{dp54, FlowOpts, HamiltonianRhs, Rhs};
use crate::error::{GeobeamError, Result};
use crate::manifold::{Manifold, PhasePoint};

/// dφ_t matrices at requested times along a base trajectory.
#[derive(Debug, Clone)]
pub struct VariationalFrame {
    pub seed: PhasePoint,
    pub times: Vec<f64>,
    pub matrices: Vec<DMatrix<f64>>,
}

impl VariationalFrame {
    /// ‖dφ_t‖ (spectral norm) at each requested time.
    pub fn norms(&self) -> Vec<f64> {
        self.matrices
            .iter()
            .map(|m| m.clone().svd(false, false).singular_values.max())
            .collect()
    }

    /// max over requested times of ‖(dφ_t)ᵀ J dφ_t − J‖ (symplectic defect).
    pub fn symplectic_defect(&self) -> f64 {
        let n2 = self.matrices[0].nrows();
        let j = symplectic_j(n2 / 2);
        self.matrices
            .iter()
            .map(|m| (m.transpose() * &j * m - &j).norm())
            .fold(0.0, f64::max)
    }
}

pub fn symplectic_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

struct AugmentedRhs<'a> {
    base: HamiltonianRhs<'a>,
    n2: usize,
    fd_step: f64,
}

impl<'a> AugmentedRhs<'a> {
    fn field_jacobian(&self, z: &DVector<f64>) -> std::result::Result<DMatrix<f64>, String> {
        let n2 = self.n2;
        let mut jac = DMatrix::zeros(n2, n2);
        let mut fp = DVector::zeros(n2);
        let mut fm = DVector::zeros(n2);
        for j in 0..n2 {
            let h = self.fd_step * (1.0 + z[j].abs());
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            self.base.eval(&zp, &mut fp)?;
            self.base.eval(&zm, &mut fm)?;
            for i in 0..n2 {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

impl<'a> Rhs for AugmentedRhs<'a> {
    fn eval(&self, y: &DVector<f64>, dy: &mut DVector<f64>) -> std::result::Result<(), String> {
        let n2 = self.n2;
        let z = y.rows(0, n2).into_owned();
        let mut fz = DVector::zeros(n2);
        self.base.eval(&z, &mut fz)?;
        dy.rows_mut(0, n2).copy_from(&fz);
        let a = self.field_jacobian(&z)?;
        // M stored column-major after the phase block
        for col in 0..n2 {
            let mcol = y.rows(n2 + col * n2, n2).into_owned();
            let out = &a * &mcol;
            dy.rows_mut(n2 + col * n2, n2).copy_from(&out);
        }
        Ok(())
    }

    fn project(&self, y: &mut DVector<f64>) {
        let n2 = self.n2;
        let mut z = y.rows(0, n2).into_owned();
        self.base.project(&mut z);
        y.rows_mut(0, n2).copy_from(&z);
    }
}

/// Integrate the variational equation along the trajectory from ρ and return
/// dφ_t at the requested times (sorted by absolute value internally; output
/// order matches the input).
pub fn variational(
    m: &Manifold,
    rho: &PhasePoint,
    times: &[f64],
    opts: &FlowOpts,
) -> Result<VariationalFrame> {
    let n = m.dim();
    let n2 = 2 * n;
    if times.is_empty() {
        return Ok(VariationalFrame {
            seed: rho.clone(),
            times: vec![],
            matrices: vec![],
        });
    }
    let pos: Vec<f64> = times.iter().cloned().filter(|t| *t > 0.0).collect();
    let neg: Vec<f64> = times.iter().cloned().filter(|t| *t < 0.0).collect();
    let mut found: Vec<(f64, DMatrix<f64>)> = Vec::new();
    if times.iter().any(|t| *t == 0.0) {
        found.push((0.0, DMatrix::identity(n2, n2)));
    }
    for side in [pos, neg] {
        if side.is_empty() {
            continue;
        }
        let t_end = side.iter().cloned().fold(0.0_f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if t_end.abs() > opts.horizon {
            return Err(GeobeamError::Integration(format!(
                "variational time {} exceeds horizon",
                t_end
            )));
        }
        let mut y0 = DVector::zeros(n2 + n2 * n2);
        y0.rows_mut(0, n).copy_from(&rho.x);
        y0.rows_mut(n, n).copy_from(&rho.xi);
        for i in 0..n2 {
            y0[n2 + i * n2 + i] = 1.0;
        }
        let rhs = AugmentedRhs {
            base: HamiltonianRhs {
                m,
                n,
                target_energy: rho.energy,
            },
            n2,
            fd_step: 1e-6,
        };
        let (steps, reached, truncated) = dp54(&rhs, y0, t_end, opts);
        if let Some(msg) = truncated {
            return Err(GeobeamError::Integration(format!(
                "variational integration stopped at t = {reached}: {msg}"
            )));
        }
        let traj = super::Trajectory {
            seed: rho.clone(),
            t_final: t_end,
            reached,
            truncated: None,
            steps,
            dim: n2 + n2 * n2, // raw state dim bookkeeping unused here
        };
        for t in side {
            let y = traj.state_at(t);
            let mut mat = DMatrix::zeros(n2, n2);
            for col in 0..n2 {
                for row in 0..n2 {
                    mat[(row, col)] = y[n2 + col * n2 + row];
                }
            }
            found.push((t, mat));
        }
    }
    // restore input order
    let mut matrices = Vec::with_capacity(times.len());
    for t in times {
        let idx = found
            .iter()
            .position(|(s, _)| s == t)
            .expect("every requested time was computed");
        matrices.push(found[idx].1.clone());
    }
    Ok(VariationalFrame {
        seed: rho.clone(),
        times: times.to_vec(),
        matrices,
    })
}

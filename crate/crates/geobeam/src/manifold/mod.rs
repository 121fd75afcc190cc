//! Chart-based Riemannian/Hamiltonian geometry for the built-in model
//! manifolds: metrics, Hamiltonians, cosphere fibers, and Sasaki-type
//! phase-space distances.

pub mod profile;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GeobeamError, Result};
pub use profile::Profile;

/// Default tolerance for points created on an energy shell.
pub const SHELL_TOL: f64 = 1e-10;
/// Poles of polar-type charts are excluded by this guard.
pub const POLE_GUARD: f64 = 1e-6;

const GOLDEN_ANGLE: f64 = 2.399963229728653; // 2π(1 − 1/φ)

/// A point ρ = (x, ξ) on the cotangent bundle in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    /// chart position
    pub x: DVector<f64>,
    /// covector components
    pub xi: DVector<f64>,
    /// cached energy p(x, ξ)
    pub energy: f64,
}

impl PhasePoint {
    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Which Hamiltonian generates the flow on this manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HamiltonianForm {
    /// p(x, ξ) = |ξ|_g − 1 (unit-speed geodesic flow)
    UnitCovector,
    /// p(x, ξ) = |ξ|²_g − V(r) (revolution surface with potential)
    QuadraticMinusV,
}

#[derive(Debug, Clone)]
pub enum ManifoldKind {
    FlatTorus {
        dim: usize,
    },
    /// Round 2-sphere in the polar chart (r, θ), g = dr² + sin²r dθ².
    RoundSphere,
    /// Surface of revolution (r, θ), g = dr² + α(r)² dθ², optional potential V(r).
    Revolution {
        alpha: Profile,
        potential: Option<Profile>,
    },
    Product {
        first: Box<Manifold>,
        second: Box<Manifold>,
    },
    /// {a²x² + b²y² + c²z² = 1} with 0 < a < b < c, chart (u, v) from the
    /// spherical parametrization of semi-axes (1/a, 1/b, 1/c).
    TriaxialEllipsoid {
        a: f64,
        b: f64,
        c: f64,
    },
}

/// An immutable model manifold; all operations are pure and read-only.
#[derive(Debug, Clone)]
pub struct Manifold {
    pub kind: ManifoldKind,
    dim: usize,
    /// period of each chart coordinate, None for non-periodic
    periods: Vec<Option<f64>>,
    inj_lower: f64,
    pub pole_guard: f64,
    pub shell_tol: f64,
}

impl Manifold {
    pub fn flat_torus(dim: usize) -> Result<Manifold> {
        if dim == 0 {
            return Err(GeobeamError::Config("flat torus needs dim >= 1".into()));
        }
        Ok(Manifold {
            kind: ManifoldKind::FlatTorus { dim },
            dim,
            periods: vec![Some(1.0); dim],
            inj_lower: 0.5,
            pole_guard: 0.0,
            shell_tol: SHELL_TOL,
        })
    }

    pub fn round_sphere(n: usize) -> Result<Manifold> {
        if n != 2 {
            return Err(GeobeamError::Unsupported(
                "round sphere is implemented for n = 2; higher-dimensional fibers \
                 are reached through product manifolds"
                    .into(),
            ));
        }
        Ok(Manifold {
            kind: ManifoldKind::RoundSphere,
            dim: 2,
            periods: vec![None, Some(std::f64::consts::TAU)],
            inj_lower: std::f64::consts::PI,
            pole_guard: POLE_GUARD,
            shell_tol: SHELL_TOL,
        })
    }

    pub fn revolution(alpha: Profile, potential: Option<Profile>) -> Result<Manifold> {
        // α must be positive on the open interval
        for k in 1..256 {
            let r = std::f64::consts::PI * k as f64 / 256.0;
            if alpha.eval(r) <= 0.0 {
                return Err(GeobeamError::Config(format!(
                    "revolution profile α must be positive on (0, π); α({r}) <= 0"
                )));
            }
        }
        Ok(Manifold {
            kind: ManifoldKind::Revolution { alpha, potential },
            dim: 2,
            periods: vec![None, Some(std::f64::consts::TAU)],
            inj_lower: 0.5,
            pole_guard: POLE_GUARD,
            shell_tol: SHELL_TOL,
        })
    }

    /// The spherical pendulum: α = sin r, V = E − 2 cos r.
    pub fn spherical_pendulum(energy: f64) -> Result<Manifold> {
        if energy <= 2.0 {
            return Err(GeobeamError::Config(
                "spherical pendulum needs E > 2 so that V > 0 everywhere".into(),
            ));
        }
        Manifold::revolution(Profile::Sin, Some(Profile::Pendulum { e: energy }))
    }

    pub fn product(first: Manifold, second: Manifold) -> Result<Manifold> {
        let dim = first.dim + second.dim;
        let mut periods = first.periods.clone();
        periods.extend(second.periods.iter().cloned());
        let inj_lower = first.inj_lower.min(second.inj_lower);
        let pole_guard = first.pole_guard.max(second.pole_guard);
        if first.hamiltonian_form() != HamiltonianForm::UnitCovector
            || second.hamiltonian_form() != HamiltonianForm::UnitCovector
        {
            return Err(GeobeamError::Unsupported(
                "products are supported for pure metric factors".into(),
            ));
        }
        Ok(Manifold {
            kind: ManifoldKind::Product {
                first: Box::new(first),
                second: Box::new(second),
            },
            dim,
            periods,
            inj_lower,
            pole_guard,
            shell_tol: SHELL_TOL,
        })
    }

    pub fn triaxial_ellipsoid(a: f64, b: f64, c: f64) -> Result<Manifold> {
        if !(0.0 < a && a < b && b < c) {
            return Err(GeobeamError::Config(
                "ellipsoid semi-axes must satisfy 0 < a < b < c".into(),
            ));
        }
        // inj ≥ π/√K_max with K_max = A²/(B²C²) for semi-axes A ≥ B ≥ C
        let inj_lower = std::f64::consts::PI * a / (b * c);
        Ok(Manifold {
            kind: ManifoldKind::TriaxialEllipsoid { a, b, c },
            dim: 2,
            periods: vec![None, Some(std::f64::consts::TAU)],
            inj_lower,
            pole_guard: POLE_GUARD,
            shell_tol: SHELL_TOL,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn injectivity_lower(&self) -> f64 {
        self.inj_lower
    }

    pub fn periods(&self) -> &[Option<f64>] {
        &self.periods
    }

    pub fn hamiltonian_form(&self) -> HamiltonianForm {
        match &self.kind {
            ManifoldKind::Revolution { potential: Some(_), .. } => HamiltonianForm::QuadraticMinusV,
            _ => HamiltonianForm::UnitCovector,
        }
    }

    /// The same manifold with any potential stripped, so that the flow is the
    /// unit-speed geodesic flow of the metric. Jacobi fields and conjugate
    /// points are metric notions and always use this view.
    pub fn metric_only(&self) -> Manifold {
        match &self.kind {
            ManifoldKind::Revolution { alpha, potential: Some(_) } => Manifold {
                kind: ManifoldKind::Revolution {
                    alpha: alpha.clone(),
                    potential: None,
                },
                ..self.clone()
            },
            _ => self.clone(),
        }
    }

    /// Short fingerprint of the manifold's defining data (used for cache keys).
    pub fn fingerprint(&self) -> String {
        match &self.kind {
            ManifoldKind::FlatTorus { dim } => format!("torus{dim}"),
            ManifoldKind::RoundSphere => "sphere2".into(),
            ManifoldKind::Revolution { alpha, potential } => {
                let a = match alpha {
                    Profile::Sin => "sin".to_string(),
                    Profile::Constant(c) => format!("const{c}"),
                    Profile::Pendulum { e } => format!("pend{e}"),
                    Profile::Spline(_) => "spline".to_string(),
                };
                let v = match potential {
                    None => "none".to_string(),
                    Some(Profile::Pendulum { e }) => format!("pend{e}"),
                    Some(Profile::Constant(c)) => format!("const{c}"),
                    Some(_) => "profile".to_string(),
                };
                format!("rev[{a};{v}]")
            }
            ManifoldKind::Product { first, second } => {
                format!("prod[{};{}]", first.fingerprint(), second.fingerprint())
            }
            ManifoldKind::TriaxialEllipsoid { a, b, c } => format!("ell[{a},{b},{c}]"),
        }
    }

    /// Check that the chart point is inside the domain (pole guards included).
    pub fn check_chart(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(GeobeamError::Domain(format!(
                "chart point has dim {}, manifold has dim {}",
                x.len(),
                self.dim
            )));
        }
        match &self.kind {
            ManifoldKind::FlatTorus { .. } => Ok(()),
            ManifoldKind::RoundSphere
            | ManifoldKind::Revolution { .. }
            | ManifoldKind::TriaxialEllipsoid { .. } => {
                let r = x[0];
                if r <= self.pole_guard || r >= std::f64::consts::PI - self.pole_guard {
                    Err(GeobeamError::Domain(format!(
                        "radial coordinate {r} inside pole guard"
                    )))
                } else {
                    Ok(())
                }
            }
            ManifoldKind::Product { first, second } => {
                let (x1, x2) = split_vec(x, first.dim);
                first.check_chart(&x1)?;
                second.check_chart(&x2)
            }
        }
    }

    /// Metric tensor g(x).
    pub fn metric(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            ManifoldKind::FlatTorus { dim } => DMatrix::identity(*dim, *dim),
            ManifoldKind::RoundSphere => {
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, x[0].sin().powi(2)]))
            }
            ManifoldKind::Revolution { alpha, .. } => {
                let a = alpha.eval(x[0]);
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, a * a]))
            }
            ManifoldKind::Product { first, second } => {
                let (x1, x2) = split_vec(x, first.dim);
                block_diag(&first.metric(&x1), &second.metric(&x2))
            }
            ManifoldKind::TriaxialEllipsoid { a, b, c } => {
                let (xu, xv) = ellipsoid_first_derivs(x[0], x[1], 1.0 / a, 1.0 / b, 1.0 / c);
                let mut g = DMatrix::zeros(2, 2);
                g[(0, 0)] = dot3(&xu, &xu);
                g[(0, 1)] = dot3(&xu, &xv);
                g[(1, 0)] = g[(0, 1)];
                g[(1, 1)] = dot3(&xv, &xv);
                g
            }
        }
    }

    /// Inverse metric g⁻¹(x).
    pub fn metric_inv(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            ManifoldKind::FlatTorus { dim } => DMatrix::identity(*dim, *dim),
            ManifoldKind::RoundSphere => {
                let s = x[0].sin();
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0 / (s * s)]))
            }
            ManifoldKind::Revolution { alpha, .. } => {
                let a = alpha.eval(x[0]);
                DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0 / (a * a)]))
            }
            ManifoldKind::Product { first, second } => {
                let (x1, x2) = split_vec(x, first.dim);
                block_diag(&first.metric_inv(&x1), &second.metric_inv(&x2))
            }
            ManifoldKind::TriaxialEllipsoid { .. } => {
                let g = self.metric(x);
                let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
                let mut inv = DMatrix::zeros(2, 2);
                inv[(0, 0)] = g[(1, 1)] / det;
                inv[(1, 1)] = g[(0, 0)] / det;
                inv[(0, 1)] = -g[(0, 1)] / det;
                inv[(1, 0)] = -g[(1, 0)] / det;
                inv
            }
        }
    }

    /// Coordinate derivatives of the metric: result[k] = ∂_k g.
    pub fn metric_derivs(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        match &self.kind {
            ManifoldKind::FlatTorus { dim } => vec![DMatrix::zeros(*dim, *dim); *dim],
            ManifoldKind::RoundSphere => {
                let mut dr = DMatrix::zeros(2, 2);
                dr[(1, 1)] = 2.0 * x[0].sin() * x[0].cos();
                vec![dr, DMatrix::zeros(2, 2)]
            }
            ManifoldKind::Revolution { alpha, .. } => {
                let a = alpha.eval(x[0]);
                let ap = alpha.d1(x[0]);
                let mut dr = DMatrix::zeros(2, 2);
                dr[(1, 1)] = 2.0 * a * ap;
                vec![dr, DMatrix::zeros(2, 2)]
            }
            ManifoldKind::Product { first, second } => {
                let (x1, x2) = split_vec(x, first.dim);
                let d1 = first.metric_derivs(&x1);
                let d2 = second.metric_derivs(&x2);
                let z1 = DMatrix::zeros(first.dim, first.dim);
                let z2 = DMatrix::zeros(second.dim, second.dim);
                let mut out = Vec::with_capacity(self.dim);
                for dk in &d1 {
                    out.push(block_diag(dk, &z2));
                }
                for dk in &d2 {
                    out.push(block_diag(&z1, dk));
                }
                out
            }
            ManifoldKind::TriaxialEllipsoid { a, b, c } => {
                ellipsoid_metric_derivs(x[0], x[1], 1.0 / a, 1.0 / b, 1.0 / c)
            }
        }
    }

    /// Christoffel symbols Γ^k_{ij}; returned as one matrix per upper index k.
    pub fn christoffel(&self, x: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let n = self.dim;
        let ginv = self.metric_inv(x);
        let dg = self.metric_derivs(x);
        let mut out = vec![DMatrix::zeros(n, n); n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    out[k][(i, j)] = 0.5 * s;
                }
            }
        }
        out
    }

    /// Metric and Christoffel symbols, with a degeneracy check.
    pub fn metric_and_derivatives(
        &self,
        x: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        self.check_chart(x)?;
        let g = self.metric(x);
        let svd = g.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smin <= 0.0 || smax / smin > 1e12 {
            return Err(GeobeamError::Numeric(format!(
                "metric condition number {} exceeds 1e12",
                smax / smin
            )));
        }
        Ok((g, self.christoffel(x)))
    }

    /// Potential V(x) for the quadratic Hamiltonian (zero for pure metrics).
    pub fn potential(&self, x: &DVector<f64>) -> f64 {
        match &self.kind {
            ManifoldKind::Revolution { potential: Some(v), .. } => v.eval(x[0]),
            _ => 0.0,
        }
    }

    fn potential_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        if let ManifoldKind::Revolution { potential: Some(v), .. } = &self.kind {
            out[0] = v.d1(x[0]);
        }
        out
    }

    /// Energy p(x, ξ) of a covector.
    pub fn energy(&self, x: &DVector<f64>, xi: &DVector<f64>) -> f64 {
        let ginv = self.metric_inv(x);
        let q = (xi.transpose() * &ginv * xi)[(0, 0)];
        match self.hamiltonian_form() {
            HamiltonianForm::UnitCovector => q.sqrt() - 1.0,
            HamiltonianForm::QuadraticMinusV => q - self.potential(x),
        }
    }

    /// Hamiltonian p(ρ) at a phase point, with domain checks.
    pub fn hamiltonian(&self, rho: &PhasePoint) -> Result<f64> {
        self.check_chart(&rho.x)?;
        Ok(self.energy(&rho.x, &rho.xi))
    }

    /// Hamiltonian vector field (ẋ, ξ̇) = (∂_ξ p, −∂_x p).
    pub fn hamiltonian_field(&self, x: &DVector<f64>, xi: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.dim;
        let ginv = self.metric_inv(x);
        let w = &ginv * xi; // raised covector
        let dg = self.metric_derivs(x);
        match self.hamiltonian_form() {
            HamiltonianForm::UnitCovector => {
                let s = (xi.dot(&w)).sqrt();
                let xdot = &w / s;
                let mut xidot = DVector::zeros(n);
                for k in 0..n {
                    xidot[k] = (w.transpose() * &dg[k] * &w)[(0, 0)] / (2.0 * s);
                }
                (xdot, xidot)
            }
            HamiltonianForm::QuadraticMinusV => {
                let xdot = 2.0 * &w;
                let dv = self.potential_grad(x);
                let mut xidot = DVector::zeros(n);
                for k in 0..n {
                    xidot[k] = (w.transpose() * &dg[k] * &w)[(0, 0)] + dv[k];
                }
                (xdot, xidot)
            }
        }
    }

    /// Covector norm |ξ|_g on the shell when p = 0.
    pub fn shell_radius(&self, x: &DVector<f64>) -> f64 {
        match self.hamiltonian_form() {
            HamiltonianForm::UnitCovector => 1.0,
            HamiltonianForm::QuadraticMinusV => self.potential(x).max(0.0).sqrt(),
        }
    }

    /// Rescale ξ so that p(x, ξ) equals the given target energy.
    pub fn project_to_energy(&self, x: &DVector<f64>, xi: &DVector<f64>, target: f64) -> DVector<f64> {
        let ginv = self.metric_inv(x);
        let q = (xi.transpose() * &ginv * xi)[(0, 0)];
        let want = match self.hamiltonian_form() {
            HamiltonianForm::UnitCovector => (1.0 + target).max(1e-300),
            HamiltonianForm::QuadraticMinusV => (self.potential(x) + target).max(0.0).sqrt(),
        };
        xi * (want / q.sqrt())
    }

    /// Construct a phase point on the zero-energy shell from a covector direction.
    pub fn shell_point(&self, x: &DVector<f64>, xi_direction: &DVector<f64>) -> Result<PhasePoint> {
        self.check_chart(x)?;
        let xi = self.project_to_energy(x, xi_direction, 0.0);
        let x = self.wrap_position(x);
        let energy = self.energy(&x, &xi);
        if energy.abs() > self.shell_tol {
            return Err(GeobeamError::Numeric(format!(
                "shell projection left |p| = {}",
                energy.abs()
            )));
        }
        Ok(PhasePoint { x, xi, energy })
    }

    /// A phase point at arbitrary energy (no shell constraint).
    pub fn phase_point(&self, x: &DVector<f64>, xi: &DVector<f64>) -> Result<PhasePoint> {
        self.check_chart(x)?;
        let x = self.wrap_position(x);
        let energy = self.energy(&x, xi);
        Ok(PhasePoint { x, xi: xi.clone(), energy })
    }

    /// Wrap periodic coordinates into their canonical fundamental domain.
    pub fn wrap_position(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        for (i, p) in self.periods.iter().enumerate() {
            if let Some(period) = p {
                out[i] = out[i].rem_euclid(*period);
            }
        }
        out
    }

    /// Nearest chart representative of y − x (per-coordinate for periodic dims).
    pub fn displacement(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut d = y - x;
        for (i, p) in self.periods.iter().enumerate() {
            if let Some(period) = p {
                d[i] -= period * (d[i] / period).round();
            }
        }
        d
    }

    /// Local geodesic distance between nearby chart points (chart-segment
    /// quadrature; exact on the flat torus).
    pub fn base_distance(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let d = self.displacement(x, y);
        if matches!(self.kind, ManifoldKind::FlatTorus { .. }) {
            return d.norm();
        }
        // 4-point Gauss–Legendre along the chart segment
        const NODES: [f64; 4] = [
            0.069431844202973714,
            0.33000947820757187,
            0.66999052179242813,
            0.93056815579702623,
        ];
        const WEIGHTS: [f64; 4] = [
            0.17392742256872693,
            0.32607257743127307,
            0.32607257743127307,
            0.17392742256872693,
        ];
        let mut len = 0.0;
        for (s, w) in NODES.iter().zip(WEIGHTS.iter()) {
            let p = x + &d * *s;
            let g = self.metric(&p);
            let v = (d.transpose() * &g * &d)[(0, 0)].max(0.0);
            len += w * v.sqrt();
        }
        len
    }

    /// First-order parallel transport of the covector ξ from x₂ to x₁ along
    /// the chart-straight segment (identity on the flat torus).
    pub fn transport_covector(
        &self,
        x2: &DVector<f64>,
        xi2: &DVector<f64>,
        x1: &DVector<f64>,
    ) -> DVector<f64> {
        if matches!(self.kind, ManifoldKind::FlatTorus { .. }) {
            return xi2.clone();
        }
        let dx = self.displacement(x2, x1);
        let mid = x2 + &dx * 0.5;
        let gamma = self.christoffel(&mid);
        let n = self.dim;
        let mut out = xi2.clone();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += gamma[k][(i, j)] * dx[j] * xi2[k];
                }
            }
            out[i] += s;
        }
        out
    }

    /// Sasaki distance between phase points, with a flagged upper proxy when
    /// the base distance reaches the injectivity-radius lower bound.
    pub fn sasaki_distance(&self, r1: &PhasePoint, r2: &PhasePoint) -> SasakiDistance {
        let base = self.base_distance(&r1.x, &r2.x);
        if base >= self.inj_lower {
            let raw = (&r1.xi - &r2.xi).norm();
            return SasakiDistance {
                value: (base * base + raw * raw).sqrt(),
                flagged: true,
            };
        }
        let moved = self.transport_covector(&r2.x, &r2.xi, &r1.x);
        let diff = &r1.xi - &moved;
        let ginv = self.metric_inv(&r1.x);
        let fib = (diff.transpose() * &ginv * &diff)[(0, 0)].max(0.0);
        SasakiDistance {
            value: (base * base + fib).sqrt(),
            flagged: false,
        }
    }

    /// Orthonormal co-frame at x: columns f_i with f_iᵀ g⁻¹ f_j = δ_ij.
    pub fn orthonormal_coframe(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let g = self.metric(x);
        g.cholesky().expect("metric must be positive definite").l()
    }

    /// Deterministic low-discrepancy sample of the cosphere fiber
    /// {p = 0} ∩ T*ₓM. Every returned point satisfies |p| ≤ shell_tol.
    pub fn fiber_sample(&self, x: &DVector<f64>, count: usize) -> Result<Vec<PhasePoint>> {
        self.check_chart(x)?;
        if count == 0 {
            return Err(GeobeamError::Config("fiber_sample needs count >= 1".into()));
        }
        let frame = self.orthonormal_coframe(x);
        let radius = self.shell_radius(x);
        if radius <= 0.0 {
            return Err(GeobeamError::Domain(
                "empty cosphere fiber: potential not positive here".into(),
            ));
        }
        let n = self.dim;
        let mut out = Vec::with_capacity(count);
        match n {
            1 => {
                for k in 0..count.min(2) {
                    let s = if k == 0 { 1.0 } else { -1.0 };
                    let xi = frame.column(0) * (s * radius);
                    out.push(self.shell_point(x, &xi.into_owned())?);
                }
            }
            2 => {
                for k in 0..count {
                    let theta = std::f64::consts::TAU * k as f64 / count as f64;
                    let dir = frame.column(0) * theta.cos() + frame.column(1) * theta.sin();
                    out.push(self.shell_point(x, &(dir * radius))?);
                }
            }
            3 => {
                // Fibonacci sphere
                for k in 0..count {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    let phi = GOLDEN_ANGLE * k as f64;
                    let dir = frame.column(0) * (rho * phi.cos())
                        + frame.column(1) * (rho * phi.sin())
                        + frame.column(2) * z;
                    out.push(self.shell_point(x, &(dir * radius))?);
                }
            }
            _ => {
                return Err(GeobeamError::Unsupported(format!(
                    "fiber sampling implemented for n <= 3, got {n}"
                )))
            }
        }
        Ok(out)
    }

    /// Fiber "size": circumference for n = 2, area for n = 3, in Sasaki units.
    pub fn fiber_measure(&self, x: &DVector<f64>) -> f64 {
        let radius = self.shell_radius(x);
        match self.dim {
            1 => 2.0,
            2 => std::f64::consts::TAU * radius,
            _ => 2.0 * std::f64::consts::TAU * radius * radius,
        }
    }

    /// Curvature operator along v: matrix M with (M J)^i = (R(J, v)v)^i.
    /// Christoffel derivatives use 5-point stencils on the analytic symbols.
    pub fn curvature_operator(&self, x: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim;
        if matches!(self.kind, ManifoldKind::FlatTorus { .. }) {
            return DMatrix::zeros(n, n);
        }
        let gamma = self.christoffel(x);
        // ∂_k Γ by 5-point stencil
        let h = 2e-4;
        let mut dgamma: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(n);
        for k in 0..n {
            let shifted = |s: f64| {
                let mut xx = x.clone();
                xx[k] += s * h;
                self.christoffel(&xx)
            };
            let gm2 = shifted(-2.0);
            let gm1 = shifted(-1.0);
            let gp1 = shifted(1.0);
            let gp2 = shifted(2.0);
            let mut dk = Vec::with_capacity(n);
            for up in 0..n {
                let m = (&gm2[up] - &gp2[up] + 8.0 * (&gp1[up] - &gm1[up])) / (12.0 * h);
                dk.push(m);
            }
            dgamma.push(dk);
        }
        // R^i_{jkl} = ∂_k Γ^i_{lj} − ∂_l Γ^i_{kj} + Γ^i_{km} Γ^m_{lj} − Γ^i_{lm} Γ^m_{kj}
        // (M J)^i = R^i_{jkl} v^j J^k v^l
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for kk in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    for l in 0..n {
                        let mut r = dgamma[kk][i][(l, j)] - dgamma[l][i][(kk, j)];
                        for mm in 0..n {
                            r += gamma[i][(kk, mm)] * gamma[mm][(l, j)]
                                - gamma[i][(l, mm)] * gamma[mm][(kk, j)];
                        }
                        acc += r * v[j] * v[l];
                    }
                }
                m[(i, kk)] = acc;
            }
        }
        m
    }
}

/// A Sasaki distance value, flagged when it is only an upper proxy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SasakiDistance {
    pub value: f64,
    pub flagged: bool,
}

fn split_vec(x: &DVector<f64>, n1: usize) -> (DVector<f64>, DVector<f64>) {
    (
        DVector::from_iterator(n1, x.iter().take(n1).cloned()),
        DVector::from_iterator(x.len() - n1, x.iter().skip(n1).cloned()),
    )
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n1, n2) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(n1 + n2, n1 + n2);
    out.view_mut((0, 0), (n1, n1)).copy_from(a);
    out.view_mut((n1, n1), (n2, n2)).copy_from(b);
    out
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn ellipsoid_first_derivs(u: f64, v: f64, aa: f64, bb: f64, cc: f64) -> ([f64; 3], [f64; 3]) {
    let (su, cu) = u.sin_cos();
    let (sv, cv) = v.sin_cos();
    let xu = [aa * cu * cv, bb * cu * sv, -cc * su];
    let xv = [-aa * su * sv, bb * su * cv, 0.0];
    (xu, xv)
}

fn ellipsoid_metric_derivs(u: f64, v: f64, aa: f64, bb: f64, cc: f64) -> Vec<DMatrix<f64>> {
    let (su, cu) = u.sin_cos();
    let (sv, cv) = v.sin_cos();
    let xu = [aa * cu * cv, bb * cu * sv, -cc * su];
    let xv = [-aa * su * sv, bb * su * cv, 0.0];
    let xuu = [-aa * su * cv, -bb * su * sv, -cc * cu];
    let xuv = [-aa * cu * sv, bb * cu * cv, 0.0];
    let xvv = [-aa * su * cv, -bb * su * sv, 0.0];
    let mut du = DMatrix::zeros(2, 2);
    du[(0, 0)] = 2.0 * dot3(&xu, &xuu);
    du[(0, 1)] = dot3(&xuu, &xv) + dot3(&xu, &xuv);
    du[(1, 0)] = du[(0, 1)];
    du[(1, 1)] = 2.0 * dot3(&xv, &xuv);
    let mut dv = DMatrix::zeros(2, 2);
    dv[(0, 0)] = 2.0 * dot3(&xu, &xuv);
    dv[(0, 1)] = dot3(&xuv, &xv) + dot3(&xu, &xvv);
    dv[(1, 0)] = dv[(0, 1)];
    dv[(1, 1)] = 2.0 * dot3(&xv, &xvv);
    vec![du, dv]
}

/// Result of checking the integrable-analysis hypothesis on a revolution
/// profile: r ↦ α(r)√V(r) has a single interior critical point which is a
/// non-degenerate maximum.
#[derive(Debug, Clone, Serialize)]
pub struct IntegrableProfileCheck {
    pub r_s: f64,
    pub ell_s: f64,
    pub second_derivative: f64,
}

/// Grid check of the single-nondegenerate-maximum hypothesis for α√V.
pub fn check_integrable_profile(m: &Manifold) -> Result<IntegrableProfileCheck> {
    let (alpha, v) = match &m.kind {
        ManifoldKind::Revolution { alpha, potential: Some(v) } => (alpha, v),
        _ => {
            return Err(GeobeamError::Unsupported(
                "integrable profile check needs a revolution surface with potential".into(),
            ))
        }
    };
    let f = |r: f64| alpha.eval(r) * v.eval(r).max(0.0).sqrt();
    let grid = 4096usize;
    let lo = 1e-4;
    let hi = std::f64::consts::PI - 1e-4;
    let mut crit: Vec<f64> = Vec::new();
    let df = |r: f64| {
        let h = 1e-6;
        (f(r + h) - f(r - h)) / (2.0 * h)
    };
    let mut prev_r = lo;
    let mut prev = df(lo);
    for k in 1..=grid {
        let r = lo + (hi - lo) * k as f64 / grid as f64;
        let cur = df(r);
        if prev == 0.0 || prev.signum() != cur.signum() {
            // bisect
            let (mut a, mut b) = (prev_r, r);
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                if df(a).signum() == df(mid).signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            crit.push(0.5 * (a + b));
        }
        prev = cur;
        prev_r = r;
    }
    if crit.len() != 1 {
        return Err(GeobeamError::Structural(format!(
            "profile α√V has {} interior critical points, expected exactly 1",
            crit.len()
        )));
    }
    let r_s = crit[0];
    let h = 1e-4;
    let d2 = (f(r_s + h) - 2.0 * f(r_s) + f(r_s - h)) / (h * h);
    if d2 >= 0.0 {
        return Err(GeobeamError::Structural(
            "critical point of α√V is not a non-degenerate maximum".into(),
        ));
    }
    Ok(IntegrableProfileCheck {
        r_s,
        ell_s: f(r_s),
        second_derivative: d2,
    })
}

#[cfg(test)]
mod tests;

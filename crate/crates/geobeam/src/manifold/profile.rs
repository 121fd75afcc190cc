//! Radial profile functions for surfaces of revolution: named built-ins and
//! tabulated cubic splines with analytic first and second derivatives.

use crate::error::{GeobeamError, Result};

/// A scalar profile r ↦ f(r) with two derivatives.
#[derive(Debug, Clone)]
pub enum Profile {
    /// f(r) = sin r
    Sin,
    /// f(r) = c
    Constant(f64),
    /// f(r) = e − 2 cos r (spherical-pendulum potential at energy e)
    Pendulum { e: f64 },
    /// Natural cubic spline through tabulated (r, value) nodes.
    Spline(CubicSpline),
}

impl Profile {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::Sin => r.sin(),
            Profile::Constant(c) => *c,
            Profile::Pendulum { e } => e - 2.0 * r.cos(),
            Profile::Spline(s) => s.eval(r),
        }
    }

    pub fn d1(&self, r: f64) -> f64 {
        match self {
            Profile::Sin => r.cos(),
            Profile::Constant(_) => 0.0,
            Profile::Pendulum { .. } => 2.0 * r.sin(),
            Profile::Spline(s) => s.d1(r),
        }
    }

    pub fn d2(&self, r: f64) -> f64 {
        match self {
            Profile::Sin => -r.sin(),
            Profile::Constant(_) => 0.0,
            Profile::Pendulum { .. } => 2.0 * r.cos(),
            Profile::Spline(s) => s.d2(r),
        }
    }

    /// Parse a two-column CSV (r, value) into a spline profile.
    pub fn from_csv(text: &str) -> Result<Profile> {
        let mut rs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let r: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| {
                    GeobeamError::Config(format!("profile csv line {}: bad r column", lineno + 1))
                })?;
            let v: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| {
                    GeobeamError::Config(format!(
                        "profile csv line {}: bad value column",
                        lineno + 1
                    ))
                })?;
            rs.push(r);
            vs.push(v);
        }
        if rs.len() < 512 {
            return Err(GeobeamError::Config(format!(
                "tabulated profile needs at least 512 nodes, got {}",
                rs.len()
            )));
        }
        Ok(Profile::Spline(CubicSpline::new(rs, vs)?))
    }
}

/// Natural cubic spline with exact piecewise-polynomial derivatives.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// second derivatives at the nodes
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<CubicSpline> {
        let n = xs.len();
        if n < 3 || ys.len() != n {
            return Err(GeobeamError::Config("spline needs >= 3 matched nodes".into()));
        }
        for w in xs.windows(2) {
            if w[1] <= w[0] {
                return Err(GeobeamError::Config("spline nodes must be strictly increasing".into()));
            }
        }
        // Tridiagonal solve for natural boundary conditions (m[0] = m[n-1] = 0).
        let mut m = vec![0.0; n];
        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = xs[i] - xs[i - 1];
            let h1 = xs[i + 1] - xs[i];
            let a = h0;
            let b = 2.0 * (h0 + h1);
            let c = h1;
            let d = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            let denom = b - a * c_prime[i - 1];
            c_prime[i] = c / denom;
            d_prime[i] = (d - a * d_prime[i - 1]) / denom;
        }
        for i in (1..n - 1).rev() {
            m[i] = d_prime[i] - c_prime[i] * m[i + 1];
        }
        Ok(CubicSpline { xs, ys, m })
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.partition_point(|&t| t <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn d1(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        (self.ys[i + 1] - self.ys[i]) / h
            + ((3.0 * b * b - 1.0) * self.m[i + 1] - (3.0 * a * a - 1.0) * self.m[i]) * h / 6.0
    }

    pub fn d2(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.m[i] + b * self.m[i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_sin_with_derivatives() {
        let n = 1024;
        let xs: Vec<f64> = (0..n).map(|i| std::f64::consts::PI * i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let s = CubicSpline::new(xs, ys).unwrap();
        for k in 1..40 {
            let x = 0.07 + 3.0 * k as f64 / 41.0;
            assert!((s.eval(x) - x.sin()).abs() < 1e-9, "value at {x}");
            assert!((s.d1(x) - x.cos()).abs() < 1e-6, "d1 at {x}");
            assert!((s.d2(x) + x.sin()).abs() < 1e-3, "d2 at {x}");
        }
    }

    #[test]
    fn pendulum_profile_values() {
        let v = Profile::Pendulum { e: 3.5 };
        assert!((v.eval(std::f64::consts::FRAC_PI_2) - 3.5).abs() < 1e-14);
        assert!((v.d1(0.3) - 2.0 * 0.3f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn csv_rejects_short_tables() {
        let text = "0.0,0.0\n0.5,0.4\n1.0,0.8\n";
        assert!(Profile::from_csv(text).is_err());
    }
}

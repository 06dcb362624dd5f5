//! Boundary-value solver for `phi' v'' - P(tau) v = Phi(tau) - lambda k(tau)`
//! on a uniform grid, where the homogeneous operator has (up to
//! exponentially small boundary effects) the one-dimensional kernel `k`.
//!
//! The second derivative is discretized with the fourth-order Numerov
//! stencil. The unknown multiplier `lambda` is fixed together with the
//! solution by requiring `<v, k> = constraint` (trapezoidal inner
//! product), which removes the kernel component. A consistent right-hand
//! side gives `lambda` of the size of the discretization error.

use crate::numerics::linalg::{LinalgError, TridiagLu};

#[derive(Debug, Clone)]
pub struct BorderedProblem<'a> {
    pub tau0: f64,
    pub h: f64,
    pub dphi: f64,
    /// `P` at the grid nodes.
    pub potential: &'a [f64],
    /// `Phi` at the grid nodes.
    pub rhs: &'a [f64],
    /// `k` at the grid nodes.
    pub kernel: &'a [f64],
    pub left: f64,
    pub right: f64,
    pub constraint: f64,
}

#[derive(Debug, Clone)]
pub struct BorderedSolution {
    pub v: Vec<f64>,
    pub multiplier: f64,
}

impl BorderedProblem<'_> {
    pub fn len(&self) -> usize {
        self.potential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potential.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.tau0 + i as f64 * self.h
    }

    /// Trapezoidal inner product with the kernel.
    pub fn kernel_product(&self, v: &[f64]) -> f64 {
        let n = v.len();
        let mut s = 0.5 * (self.kernel[0] * v[0] + self.kernel[n - 1] * v[n - 1]);
        for i in 1..n - 1 {
            s += self.kernel[i] * v[i];
        }
        s * self.h
    }

    fn stencil(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.len();
        let w = self.h * self.h / 12.0 / self.dphi;
        let q: Vec<f64> = self.potential.iter().map(|p| p * w).collect();
        let m = n - 2;
        let mut sub = vec![0.0; m - 1];
        let mut diag = vec![0.0; m];
        let mut sup = vec![0.0; m - 1];
        for r in 0..m {
            let i = r + 1;
            diag[r] = -(2.0 + 10.0 * q[i]);
            if r > 0 {
                sub[r - 1] = 1.0 - q[i - 1];
            }
            if r + 1 < m {
                sup[r] = 1.0 - q[i + 1];
            }
        }
        (sub, diag, sup)
    }

    fn weighted(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        let w = self.h * self.h / 12.0 / self.dphi;
        (1..n - 1).map(|i| w * (f[i - 1] + 10.0 * f[i] + f[i + 1])).collect()
    }

    /// Residual of the Numerov equations for a full nodal vector.
    pub fn numerov_residual(&self, v: &[f64], multiplier: f64) -> Vec<f64> {
        let n = self.len();
        let w = self.h * self.h / 12.0 / self.dphi;
        let q = |i: usize| self.potential[i] * w;
        let s = |i: usize| self.rhs[i] - multiplier * self.kernel[i];
        (1..n - 1)
            .map(|i| {
                let lhs = (1.0 - q(i - 1)) * v[i - 1] - (2.0 + 10.0 * q(i)) * v[i] + (1.0 - q(i + 1)) * v[i + 1];
                lhs - w * (s(i - 1) + 10.0 * s(i) + s(i + 1))
            })
            .collect()
    }

    /// Residual of the plain second-order difference equation
    /// `phi' (v[i+1] - 2 v[i] + v[i-1]) / h^2 - P v - (Phi - lambda k)`.
    pub fn central_residual(&self, v: &[f64], multiplier: f64) -> Vec<f64> {
        let n = self.len();
        let ih2 = 1.0 / (self.h * self.h);
        (1..n - 1)
            .map(|i| {
                self.dphi * (v[i + 1] - 2.0 * v[i] + v[i - 1]) * ih2 - self.potential[i] * v[i]
                    - (self.rhs[i] - multiplier * self.kernel[i])
            })
            .collect()
    }

    pub fn solve(&self) -> Result<BorderedSolution, LinalgError> {
        let n = self.len();
        if n < 5 || self.rhs.len() != n || self.kernel.len() != n {
            return Err(LinalgError::Dimension);
        }
        let (sub, diag, sup) = self.stencil();
        let lu = TridiagLu::new(&sub, &diag, &sup)?;
        let w = self.h * self.h / 12.0 / self.dphi;
        let mut b = self.weighted(self.rhs);
        let m = n - 2;
        b[0] -= (1.0 - self.potential[0] * w) * self.left;
        b[m - 1] -= (1.0 - self.potential[n - 1] * w) * self.right;
        let z = self.weighted(self.kernel);

        let embed = |inner: &[f64], l: f64, r: f64| {
            let mut v = Vec::with_capacity(n);
            v.push(l);
            v.extend_from_slice(inner);
            v.push(r);
            v
        };
        let y = lu.solve(&b);
        let wz = lu.solve(&z);
        let gw = self.kernel_product(&embed(&wz, 0.0, 0.0));
        if gw == 0.0 || !gw.is_finite() {
            return Err(LinalgError::Singular(0));
        }
        let gy = self.kernel_product(&embed(&y, self.left, self.right));
        let mut lambda = (gy - self.constraint) / gw;
        let mut inner: Vec<f64> = y.iter().zip(&wz).map(|(a, b)| a - lambda * b).collect();

        // iterative refinement of the bordered system
        for _ in 0..2 {
            let full = embed(&inner, self.left, self.right);
            let r1: Vec<f64> = self.numerov_residual(&full, lambda).iter().map(|r| -r).collect();
            let r2 = self.constraint - self.kernel_product(&full);
            let dy = lu.solve(&r1);
            let gdy = self.kernel_product(&embed(&dy, 0.0, 0.0));
            let dl = (gdy - r2) / gw;
            for i in 0..m {
                inner[i] += dy[i] - dl * wz[i];
            }
            lambda += dl;
        }
        if inner.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::Singular(0));
        }
        Ok(BorderedSolution { v: embed(&inner, self.left, self.right), multiplier: lambda })
    }
}

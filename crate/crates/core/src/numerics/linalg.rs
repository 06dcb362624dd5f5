//! Banded and small dense linear solvers.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("singular matrix at row {0}")]
    Singular(usize),
    #[error("dimension mismatch")]
    Dimension,
}

/// Tridiagonal solve with partial pivoting (the LAPACK `gtsv` scheme).
///
/// `sub[i]` is `A[i+1][i]`, `diag[i]` is `A[i][i]`, `sup[i]` is `A[i][i+1]`.
#[derive(Debug, Clone)]
pub struct TridiagLu {
    n: usize,
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    piv: Vec<bool>,
}

impl TridiagLu {
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self, LinalgError> {
        let n = diag.len();
        if n == 0 || sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(LinalgError::Dimension);
        }
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut piv = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return Err(LinalgError::Singular(i));
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                piv[i] = true;
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
            }
        }
        if d[n - 1] == 0.0 {
            return Err(LinalgError::Singular(n - 1));
        }
        Ok(Self { n, dl, d, du, du2, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n - 1 {
            if self.piv[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.dl[i] * x[i];
        }
        x[n - 1] /= self.d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.d[i];
        }
        x
    }
}

/// Periodic tridiagonal system with corner entries `A[0][n-1] = sub[0]` and
/// `A[n-1][0] = sup[n-1]`, solved by the Sherman–Morrison correction.
#[derive(Debug, Clone)]
pub struct CyclicTridiag {
    lu: TridiagLu,
    z: Vec<f64>,
    gamma: f64,
    beta: f64,
}

impl CyclicTridiag {
    /// `sub`, `diag`, `sup` all have length `n`; `sub[i]` multiplies
    /// `x[i-1]` in row `i` (wrapping), `sup[i]` multiplies `x[i+1]`.
    pub fn new(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self, LinalgError> {
        let n = diag.len();
        if n < 3 || sub.len() != n || sup.len() != n {
            return Err(LinalgError::Dimension);
        }
        let alpha = sup[n - 1]; // A[n-1][0]
        let beta = sub[0]; // A[0][n-1]
        let gamma = -diag[0];
        let mut dd = diag.to_vec();
        dd[0] -= gamma;
        dd[n - 1] -= alpha * beta / gamma;
        let lu = TridiagLu::new(&sub[1..], &dd, &sup[..n - 1])?;
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = alpha;
        let z = lu.solve(&u);
        Ok(Self { lu, z, gamma, beta })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x = self.lu.solve(b);
        let fact = (x[0] + self.beta * x[n - 1] / self.gamma)
            / (1.0 + self.z[0] + self.beta * self.z[n - 1] / self.gamma);
        for i in 0..n {
            x[i] -= fact * self.z[i];
        }
        x
    }
}

/// Dense Gaussian elimination with partial pivoting; `a` is row-major n×n.
pub fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>, LinalgError> {
    let n = b.len();
    if a.len() != n * n {
        return Err(LinalgError::Dimension);
    }
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
            .unwrap();
        if a[p * n + k] == 0.0 {
            return Err(LinalgError::Singular(k));
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        for i in k + 1..n {
            let f = a[i * n + k] / a[k * n + k];
            if f != 0.0 {
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k * n + j] * b[j];
        }
        b[k] = s / a[k * n + k];
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri_mul(sub: &[f64], d: &[f64], sup: &[f64], x: &[f64]) -> Vec<f64> {
        let n = d.len();
        (0..n)
            .map(|i| {
                let mut s = d[i] * x[i];
                if i > 0 {
                    s += sub[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let sub = [1.0, 2.0, -1.0, 0.5];
        let d = [0.0, 1.0, 0.0, 3.0, 1.0];
        let sup = [2.0, 1.0, 1.0, -2.0];
        let x: Vec<f64> = (0..5).map(|i| (i as f64 + 1.0).sin()).collect();
        let b = tri_mul(&sub, &d, &sup, &x);
        let got = TridiagLu::new(&sub, &d, &sup).unwrap().solve(&b);
        for i in 0..5 {
            assert!((got[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cyclic_matches_dense() {
        let n = 7;
        let sub: Vec<f64> = (0..n).map(|i| 0.3 + 0.1 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| -0.2 + 0.05 * i as f64).collect();
        let d: Vec<f64> = (0..n).map(|i| 2.0 + (i as f64).cos()).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = d[i];
            a[i * n + (i + n - 1) % n] += sub[i];
            a[i * n + (i + 1) % n] += sup[i];
        }
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let want = dense_solve(a, b.clone()).unwrap();
        let got = CyclicTridiag::new(&sub, &d, &sup).unwrap().solve(&b);
        for i in 0..n {
            assert!((got[i] - want[i]).abs() < 1e-12, "{i}");
        }
    }
}

//! Numerical building blocks shared by the solvers.

pub mod fit;
pub mod linalg;
pub mod ode;
pub mod quad;
pub mod spline;

/// `n` Chebyshev–Lobatto points mapped onto `[a, b]`, increasing.
pub fn chebyshev_lobatto(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let m = (n - 1) as f64;
    (0..n)
        .map(|k| a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / m).cos()))
        .collect()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Bisection for a sign change of `f` on `[a, b]` down to `tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

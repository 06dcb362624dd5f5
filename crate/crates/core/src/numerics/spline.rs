//! Piecewise polynomial interpolants: not-a-knot cubic splines, tensor
//! bicubic splines on rectangular grids and quintic Hermite curves.

use super::linalg::TridiagLu;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplineError {
    #[error("need at least two nodes, got {0}")]
    TooFewNodes(usize),
    #[error("nodes must be strictly increasing")]
    NotIncreasing,
    #[error("data length mismatch")]
    Length,
}

fn check_nodes(x: &[f64]) -> Result<(), SplineError> {
    if x.len() < 2 {
        return Err(SplineError::TooFewNodes(x.len()));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SplineError::NotIncreasing);
    }
    Ok(())
}

/// Index of the cell containing `x`, clamped to the end cells.
pub fn locate(nodes: &[f64], x: f64) -> usize {
    let n = nodes.len();
    let i = nodes.partition_point(|&v| v <= x);
    i.saturating_sub(1).min(n - 2)
}

/// Slopes of the not-a-knot cubic spline through `(x, y)`.
pub fn not_a_knot_slopes(x: &[f64], y: &[f64]) -> Result<Vec<f64>, SplineError> {
    check_nodes(x)?;
    if y.len() != x.len() {
        return Err(SplineError::Length);
    }
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return Ok(vec![del[0]; 2]);
    }
    if n == 3 {
        // the not-a-knot spline on three nodes is the interpolating parabola
        let c = (del[1] - del[0]) / (x[2] - x[0]);
        let b = del[0] - c * (x[0] + x[1]);
        return Ok(x.iter().map(|&xi| b + 2.0 * c * xi).collect());
    }
    let mut sub = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n - 1];
    let mut rhs = vec![0.0; n];
    let d0 = x[2] - x[0];
    diag[0] = h[1];
    sup[0] = d0;
    rhs[0] = ((h[0] + 2.0 * d0) * h[1] * del[0] + h[0] * h[0] * del[1]) / d0;
    for i in 1..n - 1 {
        sub[i - 1] = h[i];
        diag[i] = 2.0 * (h[i - 1] + h[i]);
        sup[i] = h[i - 1];
        rhs[i] = 3.0 * (h[i] * del[i - 1] + h[i - 1] * del[i]);
    }
    let dn = x[n - 1] - x[n - 3];
    sub[n - 2] = dn;
    diag[n - 1] = h[n - 3];
    rhs[n - 1] = (h[n - 2] * h[n - 2] * del[n - 3] + (2.0 * dn + h[n - 2]) * h[n - 3] * del[n - 2]) / dn;
    let lu = TridiagLu::new(&sub, &diag, &sup).expect("not-a-knot system is nonsingular");
    Ok(lu.solve(&rhs))
}

/// Cubic Hermite basis on a cell of width `h` at local coordinate `s`:
/// returns `[[h00, h10, h01, h11]; 4]` for derivative orders 0..=3 in the
/// physical variable; the slope bases already carry the factor `h`.
pub fn cubic_hermite_basis(s: f64, h: f64) -> [[f64; 4]; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    let ih = 1.0 / h;
    [
        [2.0 * s3 - 3.0 * s2 + 1.0, h * (s3 - 2.0 * s2 + s), -2.0 * s3 + 3.0 * s2, h * (s3 - s2)],
        [
            (6.0 * s2 - 6.0 * s) * ih,
            3.0 * s2 - 4.0 * s + 1.0,
            (-6.0 * s2 + 6.0 * s) * ih,
            3.0 * s2 - 2.0 * s,
        ],
        [
            (12.0 * s - 6.0) * ih * ih,
            (6.0 * s - 4.0) * ih,
            (-12.0 * s + 6.0) * ih * ih,
            (6.0 * s - 2.0) * ih,
        ],
        [12.0 * ih * ih * ih, 6.0 * ih * ih, -12.0 * ih * ih * ih, 6.0 * ih * ih],
    ]
}

/// Value and first three derivatives of a cubic Hermite segment.
pub fn cubic_hermite(x0: f64, x1: f64, y0: f64, s0: f64, y1: f64, s1: f64, x: f64) -> [f64; 4] {
    let h = x1 - x0;
    let b = cubic_hermite_basis((x - x0) / h, h);
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = b[k][0] * y0 + b[k][1] * s0 + b[k][2] * y1 + b[k][3] * s1;
    }
    out
}

#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
}

impl CubicSpline {
    pub fn not_a_knot(x: &[f64], y: &[f64]) -> Result<Self, SplineError> {
        let s = not_a_knot_slopes(x, y)?;
        Ok(Self { x: x.to_vec(), y: y.to_vec(), s })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn slopes(&self) -> &[f64] {
        &self.s
    }

    /// Value and first three derivatives; outside the node range the end
    /// cubic is extended.
    pub fn eval_all(&self, x: f64) -> [f64; 4] {
        let i = locate(&self.x, x);
        cubic_hermite(self.x[i], self.x[i + 1], self.y[i], self.s[i], self.y[i + 1], self.s[i + 1], x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_all(x)[0]
    }
}

/// Derivatives of a smooth field in two variables `(x, t)`:
/// `[f, f_x, f_xx, f_t, f_xt, f_xxt]`.
pub type Jet2 = [f64; 6];

/// Tensor-product not-a-knot bicubic spline on a rectangular grid, stored
/// in Hermite form (values, `f_x`, `f_t`, `f_xt` at every node).
#[derive(Debug, Clone)]
pub struct BicubicSpline {
    xs: Vec<f64>,
    ts: Vec<f64>,
    f: Vec<f64>,
    fx: Vec<f64>,
    ft: Vec<f64>,
    fxt: Vec<f64>,
}

impl BicubicSpline {
    /// `values[j * xs.len() + i]` is the value at `(xs[i], ts[j])`.
    pub fn new(xs: &[f64], ts: &[f64], values: &[f64]) -> Result<Self, SplineError> {
        check_nodes(xs)?;
        check_nodes(ts)?;
        let (nx, nt) = (xs.len(), ts.len());
        if values.len() != nx * nt {
            return Err(SplineError::Length);
        }
        let mut fx = vec![0.0; nx * nt];
        for j in 0..nt {
            let row = &values[j * nx..(j + 1) * nx];
            let s = not_a_knot_slopes(xs, row)?;
            fx[j * nx..(j + 1) * nx].copy_from_slice(&s);
        }
        let mut ft = vec![0.0; nx * nt];
        let mut fxt = vec![0.0; nx * nt];
        let mut col = vec![0.0; nt];
        for i in 0..nx {
            for j in 0..nt {
                col[j] = values[j * nx + i];
            }
            let s = not_a_knot_slopes(ts, &col)?;
            for j in 0..nt {
                ft[j * nx + i] = s[j];
                col[j] = fx[j * nx + i];
            }
            let s = not_a_knot_slopes(ts, &col)?;
            for j in 0..nt {
                fxt[j * nx + i] = s[j];
            }
        }
        Ok(Self { xs: xs.to_vec(), ts: ts.to_vec(), f: values.to_vec(), fx, ft, fxt })
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.ts[0], *self.ts.last().unwrap())
    }

    pub fn eval(&self, x: f64, t: f64) -> Jet2 {
        let nx = self.xs.len();
        let i = locate(&self.xs, x);
        let j = locate(&self.ts, t);
        let hx = self.xs[i + 1] - self.xs[i];
        let ht = self.ts[j + 1] - self.ts[j];
        let bx = cubic_hermite_basis((x - self.xs[i]) / hx, hx);
        let bt = cubic_hermite_basis((t - self.ts[j]) / ht, ht);
        let mut out = [0.0; 6];
        // (derivative order in x, order in t) for each jet slot
        const ORD: [(usize, usize); 6] = [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1)];
        for p in 0..2 {
            for q in 0..2 {
                let k = (j + q) * nx + i + p;
                let (f, fx, ft, fxt) = (self.f[k], self.fx[k], self.ft[k], self.fxt[k]);
                for (slot, &(dx, dt)) in ORD.iter().enumerate() {
                    let vx = bx[dx][2 * p];
                    let sx = bx[dx][2 * p + 1];
                    let vt = bt[dt][2 * q];
                    let st = bt[dt][2 * q + 1];
                    out[slot] += vx * vt * f + sx * vt * fx + vx * st * ft + sx * st * fxt;
                }
            }
        }
        out
    }
}

const QUINTIC: [[f64; 6]; 6] = [
    // value at left, slope at left, curvature at left, then right
    [1.0, 0.0, 0.0, -10.0, 15.0, -6.0],
    [0.0, 1.0, 0.0, -6.0, 8.0, -3.0],
    [0.0, 0.0, 0.5, -1.5, 1.5, -0.5],
    [0.0, 0.0, 0.0, 10.0, -15.0, 6.0],
    [0.0, 0.0, 0.0, -4.0, 7.0, -3.0],
    [0.0, 0.0, 0.0, 0.5, -1.0, 0.5],
];

/// Quintic Hermite basis at local coordinate `s` on a cell of width `h`,
/// for derivative orders 0..=3 in the physical variable. The slope and
/// curvature bases carry the factors `h` and `h^2`.
pub fn quintic_hermite_basis(s: f64, h: f64) -> [[f64; 6]; 4] {
    let mut out = [[0.0; 6]; 4];
    let scale = [1.0, h, h * h, 1.0, h, h * h];
    for (b, coef) in QUINTIC.iter().enumerate() {
        for d in 0..4 {
            // d-th derivative in s of sum coef[k] s^k
            let mut acc = 0.0;
            for k in (d..6).rev() {
                let mut fall = 1.0;
                for m in 0..d {
                    fall *= (k - m) as f64;
                }
                acc = acc * s + coef[k] * fall;
            }
            // acc was accumulated with Horner over k >= d, i.e. in powers s^(k-d)
            out[d][b] = acc * scale[b] / h.powi(d as i32);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn not_a_knot_reproduces_cubics() {
        let x: Vec<f64> = [0.0, 0.3, 0.7, 1.2, 1.5, 2.4, 3.0].to_vec();
        let f = |x: f64| 2.0 - x + 0.5 * x * x - 0.3 * x * x * x;
        let y: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        let sp = CubicSpline::not_a_knot(&x, &y).unwrap();
        for k in 0..50 {
            let z = 3.0 * k as f64 / 49.0;
            let e = sp.eval_all(z);
            assert!((e[0] - f(z)).abs() < 1e-12);
            assert!((e[1] - (-1.0 + z - 0.9 * z * z)).abs() < 1e-11);
            assert!((e[2] - (1.0 - 1.8 * z)).abs() < 1e-10);
            assert!((e[3] + 1.8).abs() < 1e-9);
        }
    }

    #[test]
    fn bicubic_reproduces_tensor_cubics() {
        let xs: Vec<f64> = (0..9).map(|i| -1.0 + 0.27 * i as f64 + 0.01 * (i * i) as f64).collect();
        let ts: Vec<f64> = (0..6).map(|j| 0.2 * j as f64).collect();
        let f = |x: f64, t: f64| (1.0 + x - x * x * x) * (2.0 - t + t * t * t);
        let mut v = vec![];
        for &t in &ts {
            for &x in &xs {
                v.push(f(x, t));
            }
        }
        let sp = BicubicSpline::new(&xs, &ts, &v).unwrap();
        let (x, t) = (0.37, 0.55);
        let j = sp.eval(x, t);
        let px = 1.0 + x - x * x * x;
        let pxd = 1.0 - 3.0 * x * x;
        let pxdd = -6.0 * x;
        let pt = 2.0 - t + t * t * t;
        let ptd = -1.0 + 3.0 * t * t;
        let want = [px * pt, pxd * pt, pxdd * pt, px * ptd, pxd * ptd, pxdd * ptd];
        for k in 0..6 {
            assert!((j[k] - want[k]).abs() < 1e-10, "slot {k}: {} vs {}", j[k], want[k]);
        }
    }

    #[test]
    fn quintic_basis_interpolates_endpoint_data() {
        let h = 0.7;
        let b0 = quintic_hermite_basis(0.0, h);
        let b1 = quintic_hermite_basis(1.0, h);
        // data (value, slope, curvature) at both ends
        let data = [1.3, -0.4, 2.2, -0.5, 0.9, 1.7];
        let ev = |b: &[[f64; 6]; 4], d: usize| (0..6).map(|k| b[d][k] * data[k]).sum::<f64>();
        assert!((ev(&b0, 0) - 1.3).abs() < 1e-14);
        assert!((ev(&b0, 1) + 0.4).abs() < 1e-13);
        assert!((ev(&b0, 2) - 2.2).abs() < 1e-12);
        assert!((ev(&b1, 0) + 0.5).abs() < 1e-13);
        assert!((ev(&b1, 1) - 0.9).abs() < 1e-12);
        assert!((ev(&b1, 2) - 1.7).abs() < 1e-11);
    }
}

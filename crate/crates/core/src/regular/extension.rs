//! Left extension `u1^-` of the first correction's plateau value off the
//! discontinuity curve.
//!
//! `u1^-` solves the homogeneous linearized transport equation
//! `a0 u_t + (b0 + c0 u0) u_x + c0 u0_x u = 0` with `u = nu1(t)` on the
//! curve `x = phi(t)`. Characteristics are launched from points of the
//! curve in both time directions. Where the curve's characteristics do not
//! reach (the part of the window cut off by `t = 0` or `t = T_eff`), data on
//! that time line continue the curve data smoothly: the value and the first
//! three space derivatives at the corner are matched and the continuation
//! decays away from the corner. The result is resampled onto a grid covering the whole
//! window so that it can be evaluated on both sides of the curve.

use std::ops::ControlFlow;

use rayon::prelude::*;

use super::{RegularError, RegularField};
use crate::jet::Jet;
use crate::numerics::linspace;
use crate::numerics::ode::{self, DenseTrajectory, Dopri5Options};
use crate::numerics::spline::CubicSpline;
use crate::phase::{PhaseCurve, PointData};
use crate::scenario::Scenario;

/// Relative speed `|A / a0|` below which the curve counts as tangent to the
/// characteristics.
pub const TRANSVERSALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct ExtensionOptions {
    /// Grid refinement factor relative to the scenario grid.
    pub refine: usize,
    pub ode: Dopri5Options,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        Self { refine: 3, ode: Dopri5Options { rtol: 1e-11, atol: 1e-13, ..Default::default() } }
    }
}

#[derive(Debug, Clone)]
pub struct Extension {
    pub field: RegularField,
    pub t_eff: f64,
    /// Sign of `A / a0`: `+1` when the curve overtakes the characteristics.
    pub orientation: f64,
}

/// A characteristic of the transport operator, possibly made of a backward
/// and a forward half around its launch time.
struct Ray {
    back: Option<DenseTrajectory<2>>,
    fwd: Option<DenseTrajectory<2>>,
    t_launch: f64,
}

impl Ray {
    fn at(&self, t: f64) -> Option<[f64; 2]> {
        let half = if t <= self.t_launch { self.back.as_ref().or(self.fwd.as_ref()) } else { self.fwd.as_ref() };
        half.and_then(|p| if p.contains(t) { p.eval(t) } else { None })
    }
}

fn transport_rhs(s: &Scenario, u0: &RegularField, t: f64, y: &[f64; 2]) -> Result<[f64; 2], RegularError> {
    let c = &s.coeffs;
    let x = y[0];
    let a0 = c.a0.value(x, t)?;
    let b0 = c.b0.value(x, t)?;
    let c0 = c.c0.value(x, t)?;
    let u = u0.eval_extrapolated(x, t);
    Ok([(b0 + c0 * u.v) / a0, -c0 * u.x / a0 * y[1]])
}

const BINOM: [[f64; 4]; 4] = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];

/// Coefficients of `u_t = p1 u_x + p0 u` and their first three
/// x-derivatives at `(x, t)`, by central differences.
fn transport_coeff_derivs(s: &Scenario, u0: &RegularField, x: f64, t: f64) -> Result<[[f64; 4]; 2], RegularError> {
    let c = &s.coeffs;
    let coeff = |x: f64| -> Result<[f64; 2], RegularError> {
        let a0 = c.a0.value(x, t)?;
        let u = u0.eval_extrapolated(x, t);
        let c0 = c.c0.value(x, t)?;
        Ok([-(c.b0.value(x, t)? + c0 * u.v) / a0, -c0 * u.x / a0])
    };
    let dx = 0.02;
    let f: Vec<[f64; 2]> = (-3..=3).map(|m| coeff(x + m as f64 * dx)).collect::<Result<_, _>>()?;
    let mut out = [[0.0; 4]; 2];
    for q in 0..2 {
        let g = |m: i32| f[(m + 3) as usize][q];
        out[q] = [
            g(0),
            (-g(2) + 8.0 * g(1) - 8.0 * g(-1) + g(-2)) / (12.0 * dx),
            (-g(2) + 16.0 * g(1) - 30.0 * g(0) + 16.0 * g(-1) - g(-2)) / (12.0 * dx * dx),
            (-g(3) + 8.0 * g(2) - 13.0 * g(1) + 13.0 * g(-1) - 8.0 * g(-2) + g(-3)) / (8.0 * dx * dx * dx),
        ];
    }
    Ok(out)
}

/// Transport data on the curve at one time.
struct CurvePoint {
    t: f64,
    phi: f64,
    /// `A / a0`.
    rel: f64,
}

impl Extension {
    pub fn zero(x_range: (f64, f64), t_eff: f64) -> Self {
        Self { field: RegularField::zero(x_range, (0.0, t_eff)), t_eff, orientation: 1.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.field.is_zero()
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<Jet, RegularError> {
        self.field.eval(x, t)
    }

    /// Builds `u1^-` from the plateau values `nu1` given as a spline in `t`
    /// on `[0, curve.t_eff]`, over the space range `x_range`.
    pub fn solve(
        s: &Scenario,
        u0: &RegularField,
        curve: &PhaseCurve,
        nu1: &CubicSpline,
        x_range: (f64, f64),
        opts: &ExtensionOptions,
    ) -> Result<Extension, RegularError> {
        let t_eff = curve.t_eff;
        if nu1.values().iter().all(|v| *v == 0.0) {
            return Ok(Self::zero(x_range, t_eff));
        }
        let refine = opts.refine.max(1);
        let nx = (s.n_x - 1) * refine + 1;
        let nt = (s.n_t - 1) * refine + 1;
        let (xl, xr) = x_range;
        let width = xr - xl;
        let hx = width / (nx - 1) as f64;
        let xs = linspace(xl, xr, nx);
        let ts = linspace(0.0, t_eff, nt);

        let curve_point = |t: f64| -> Result<CurvePoint, RegularError> {
            let st = curve.eval(t).map_err(|_| RegularError::OutOfDomain { x: f64::NAN, t })?;
            let d = PointData::at(s, u0, st.phi, t).map_err(|_| RegularError::OutOfDomain { x: st.phi, t })?;
            let rel = d.relative_speed(st.dphi) / d.a0;
            if rel.abs() <= TRANSVERSALITY_TOL {
                return Err(RegularError::TransversalityLoss { t });
            }
            Ok(CurvePoint { t, phi: st.phi, rel })
        };

        // characteristic speed bound and spread of the curve launches
        let probe = linspace(0.0, t_eff, 4 * nt);
        let samples: Vec<CurvePoint> = probe.iter().map(|&t| curve_point(t)).collect::<Result<_, _>>()?;
        let orientation = samples[0].rel.signum();
        if let Some(p) = samples.iter().find(|p| p.rel.signum() != orientation) {
            return Err(RegularError::TransversalityLoss { t: p.t });
        }
        let rel_max = samples.iter().map(|p| p.rel.abs()).fold(0.0, f64::max);
        let mut s_max: f64 = 0.0;
        for &t in &linspace(0.0, t_eff, 9) {
            for &x in &linspace(xl - width, xr + width, 4 * nx) {
                let c = &s.coeffs;
                let u = u0.eval_extrapolated(x, t).v;
                s_max = s_max.max(((c.b0.value(x, t)? + c.c0.value(x, t)? * u) / c.a0.value(x, t)?).abs());
            }
        }

        // launch times along the curve
        let n_launch = (4 * nt).max((rel_max * t_eff / (0.5 * hx)).ceil() as usize + 1);
        let launch = linspace(0.0, t_eff, n_launch);
        let on_curve: Vec<CurvePoint> = launch.iter().map(|&t| curve_point(t)).collect::<Result<_, _>>()?;

        // space derivatives D_k = d^k u / dx^k on the curve. Differentiating
        // u_t = p1 u_x + p0 u (p1 = -alpha/a0, p0 = -c0 u0_x/a0) k times in x
        // and using d/dt D_k = (d^k u_t / dx^k) + phi' D_{k+1} gives
        // (A/a0) D_{k+1} = D_k' - sum_{j>=1} C(k,j) p1^(j) D_{k-j+1}
        //                 - sum_{j>=0} C(k,j) p0^(j) D_{k-j}.
        let p_derivs: Vec<[[f64; 4]; 2]> =
            on_curve.iter().map(|p| transport_coeff_derivs(s, u0, p.phi, p.t)).collect::<Result<_, _>>()?;
        let mut levels: Vec<Vec<f64>> = vec![on_curve.iter().map(|p| nu1.eval(p.t)).collect()];
        for k in 0..3 {
            let dk = CubicSpline::not_a_knot(&launch, &levels[k])?;
            let next: Vec<f64> = (0..launch.len())
                .map(|i| {
                    let [p1, p0] = &p_derivs[i];
                    let mut acc = if k == 0 { nu1.eval_all(launch[i])[1] } else { dk.eval_all(launch[i])[1] };
                    for j in 0..=k {
                        let binom = BINOM[k][j];
                        if j >= 1 {
                            acc -= binom * p1[j] * levels[k - j + 1][i];
                        }
                        acc -= binom * p0[j] * levels[k - j][i];
                    }
                    acc / on_curve[i].rel
                })
                .collect();
            levels.push(next);
        }

        let ode_opts = opts.ode;
        let rhs = |t: f64, y: &[f64; 2]| transport_rhs(s, u0, t, y);
        let run = |t0: f64, y0: [f64; 2], t1: f64| -> Result<Option<DenseTrajectory<2>>, RegularError> {
            if t0 == t1 {
                return Ok(None);
            }
            let (path, _) = ode::integrate(rhs, t0, y0, t1, &ode_opts, |_, _| ControlFlow::<()>::Continue(()))?;
            Ok(Some(path))
        };

        let mut rays: Vec<Ray> = launch
            .par_iter()
            .zip(&on_curve)
            .map(|(&t, p)| -> Result<Ray, RegularError> {
                let y0 = [p.phi, nu1.eval(t)];
                Ok(Ray { back: run(t, y0, 0.0)?, fwd: run(t, y0, t_eff)?, t_launch: t })
            })
            .collect::<Result<_, _>>()?;

        // continuation data on t = 0 (the side the curve leaves behind) and
        // on t = T_eff (the other side): the cubic Taylor polynomial of the
        // curve data at the corner times a flat cutoff, so the seam along the
        // corner characteristic is C^3
        let extent = width + t_eff * (s_max + rel_max) + 0.2 * width;
        let n_seg = (extent / (0.5 * hx)).ceil() as usize;
        let scale = 0.25 * width;
        for (end, side) in [(0usize, -orientation), (launch.len() - 1, orientation)] {
            let p = &on_curve[end];
            let d: Vec<f64> = levels.iter().map(|l| l[end]).collect();
            let t_target = if end == 0 { t_eff } else { 0.0 };
            let seg: Vec<Ray> = (1..=n_seg)
                .into_par_iter()
                .map(|k| -> Result<Ray, RegularError> {
                    let ds = side * k as f64 * 0.5 * hx;
                    let taylor = d[0] + ds * (d[1] + ds * (d[2] / 2.0 + ds * d[3] / 6.0));
                    let u = taylor * (-(ds / scale).powi(4)).exp();
                    let path = run(p.t, [p.phi + ds, u], t_target)?;
                    Ok(if end == 0 {
                        Ray { back: None, fwd: path, t_launch: p.t }
                    } else {
                        Ray { back: path, fwd: None, t_launch: p.t }
                    })
                })
                .collect::<Result<_, _>>()?;
            rays.extend(seg);
        }

        let rows: Vec<Vec<f64>> = ts
            .par_iter()
            .map(|&t| -> Result<Vec<f64>, RegularError> {
                let mut pts: Vec<[f64; 2]> = rays.iter().filter_map(|r| r.at(t)).collect();
                pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
                let mut px = Vec::with_capacity(pts.len());
                let mut pu = Vec::with_capacity(pts.len());
                for q in pts {
                    if px.last().is_some_and(|&l: &f64| q[0] - l <= 1e-9 * hx) {
                        continue;
                    }
                    px.push(q[0]);
                    pu.push(q[1]);
                }
                if px.len() < 4 || px[0] > xl || *px.last().unwrap() < xr {
                    return Err(RegularError::OutOfDomain { x: if px.is_empty() { xl } else { px[0] }, t });
                }
                let sp = CubicSpline::not_a_knot(&px, &pu)?;
                Ok(xs.iter().map(|&x| sp.eval(x)).collect())
            })
            .collect::<Result<_, _>>()?;
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Extension { field: RegularField::from_grid(&xs, &ts, &values)?, t_eff, orientation })
    }

    /// Largest deviation of the trace on the curve from `nu1` at `n`
    /// uniformly spaced times.
    pub fn trace_defect(&self, curve: &PhaseCurve, nu1: &CubicSpline, n: usize) -> Result<f64, RegularError> {
        let mut worst: f64 = 0.0;
        for &t in &linspace(0.0, self.t_eff, n) {
            let phi = curve.eval(t).map_err(|_| RegularError::OutOfDomain { x: f64::NAN, t })?.phi;
            worst = worst.max((self.eval(phi, t)?.v - nu1.eval(t)).abs());
        }
        Ok(worst)
    }
}

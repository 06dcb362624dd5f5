//! Regular part of the expansion: `u0` from the quasi-linear transport
//! equation and `u1` from its linearization, both by the method of
//! characteristics, plus the left extension term used by the plateau form.
//!
//! A fan of characteristics is launched from a padded range of initial
//! points. Each characteristic carries its position `X`, the Jacobian
//! `w = dX/dxi` (which gives `u0_x = g'(xi)/w` without differencing) and
//! the first-order correction `u1`. The fan is resampled onto a tensor grid
//! and interpolated with bicubic splines.

pub mod extension;

use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::exprdsl::ExprError;
use crate::jet::Jet;
use crate::numerics::ode::{self, DenseTrajectory, Dopri5Options, OdeError};
use crate::numerics::spline::{BicubicSpline, CubicSpline, SplineError};
use crate::numerics::{bisect, linspace};
use crate::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum RegularError {
    #[error("characteristics cross at t = {t_break:.6} (gradient catastrophe before the horizon)")]
    GradientCatastrophe { t_break: f64 },
    #[error("point ({x}, {t}) is outside the region covered by the regular part")]
    OutOfDomain { x: f64, t: f64 },
    #[error("characteristic slope matches the curve speed at t = {t} (curve not transversal)")]
    TransversalityLoss { t: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("characteristic integration failed: {0}")]
    Ode(#[from] OdeError),
    #[error("interpolation failed: {0}")]
    Spline(#[from] SplineError),
}

/// An interpolated smooth field on a rectangle of the `(x, t)` plane.
#[derive(Debug, Clone)]
pub struct RegularField {
    spline: Option<BicubicSpline>,
    x_range: (f64, f64),
    t_range: (f64, f64),
}

impl RegularField {
    pub fn zero(x_range: (f64, f64), t_range: (f64, f64)) -> Self {
        Self { spline: None, x_range, t_range }
    }

    /// Builds a field from grid values; an all-zero grid is stored as the
    /// exact zero field.
    pub fn from_grid(xs: &[f64], ts: &[f64], values: &[f64]) -> Result<Self, SplineError> {
        let x_range = (xs[0], *xs.last().unwrap());
        let t_range = (ts[0], *ts.last().unwrap());
        if values.iter().all(|v| *v == 0.0) {
            return Ok(Self::zero(x_range, t_range));
        }
        Ok(Self { spline: Some(BicubicSpline::new(xs, ts, values)?), x_range, t_range })
    }

    pub fn is_zero(&self) -> bool {
        self.spline.is_none()
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.x_range
    }

    pub fn t_range(&self) -> (f64, f64) {
        self.t_range
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        let tol_x = 1e-9 * (1.0 + self.x_range.0.abs().max(self.x_range.1.abs()));
        let tol_t = 1e-9 * (1.0 + self.t_range.1.abs());
        x >= self.x_range.0 - tol_x
            && x <= self.x_range.1 + tol_x
            && t >= self.t_range.0 - tol_t
            && t <= self.t_range.1 + tol_t
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<Jet, RegularError> {
        if !self.contains(x, t) {
            return Err(RegularError::OutOfDomain { x, t });
        }
        Ok(self.eval_extrapolated(x, t))
    }

    /// Evaluates without the domain check, extending the boundary cells.
    pub fn eval_extrapolated(&self, x: f64, t: f64) -> Jet {
        match &self.spline {
            None => Jet::ZERO,
            Some(s) => Jet::from_array(s.eval(x, t)),
        }
    }

    pub fn value(&self, x: f64, t: f64) -> Result<f64, RegularError> {
        Ok(self.eval(x, t)?.v)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RegularOptions {
    /// Fan points per grid cell of the space window.
    pub fan_density: f64,
    pub ode: Dopri5Options,
    /// Threshold on the divided difference `dX/dxi` that signals crossing.
    pub crossing_threshold: f64,
    /// When set, breaking before the horizon truncates the solution instead
    /// of failing.
    pub allow_breaking: bool,
}

impl Default for RegularOptions {
    fn default() -> Self {
        Self {
            fan_density: 2.0,
            ode: Dopri5Options { rtol: 1e-11, atol: 1e-12, ..Default::default() },
            crossing_threshold: 1e-10,
            allow_breaking: false,
        }
    }
}

/// One characteristic: launch point, carried value `g(xi)` and the dense
/// trajectory of `[X, dX/dxi, u1]`.
#[derive(Debug, Clone)]
pub struct Characteristic {
    pub xi: f64,
    pub u0: f64,
    pub path: DenseTrajectory<3>,
}

#[derive(Debug, Clone)]
pub struct Regular {
    pub u0: RegularField,
    pub u1: RegularField,
    pub fan: Vec<Characteristic>,
    /// Crossing time of the fan, if it happens within the horizon.
    pub t_break: Option<f64>,
    /// Upper end of the time interval on which the fields are valid.
    pub t_valid: f64,
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
}

fn characteristic_rhs(
    s: &Scenario,
    g: f64,
    dg: f64,
    t: f64,
    y: &[f64; 3],
) -> Result<[f64; 3], ExprError> {
    let (x, w, u1) = (y[0], y[1], y[2]);
    let c = &s.coeffs;
    let a0 = c.a0.eval(x, t)?;
    let b0 = c.b0.eval(x, t)?;
    let c0 = c.c0.eval(x, t)?;
    let speed = (b0.v + c0.v * g) / a0.v;
    let dspeed = ((b0.x + c0.x * g) * a0.v - (b0.v + c0.v * g) * a0.x) / (a0.v * a0.v);
    let u0x = dg / w;
    let u0t = -speed * u0x;
    let f1 = -(c.a1.value(x, t)? * u0t + c.b1.value(x, t)? * u0x + c.c1.value(x, t)? * g * u0x);
    Ok([speed, dspeed * w + c0.v / a0.v * dg, (f1 - c0.v * u0x * u1) / a0.v])
}

/// Solves for `u0` and `u1` on the scenario window over `[0, T]`.
pub fn solve_regular(s: &Scenario, opts: &RegularOptions) -> Result<Regular, RegularError> {
    let width = s.x_max - s.x_min;
    let hx = width / (s.n_x - 1) as f64;
    let t_end = s.t_end;

    // bound the characteristic speed to size the launch padding
    let probe = linspace(s.x_min - width, s.x_max + width, 4 * s.n_x);
    let mut g_lo = f64::INFINITY;
    let mut g_hi = f64::NEG_INFINITY;
    for &x in &probe {
        let g = s.initial_u0(x)?;
        g_lo = g_lo.min(g);
        g_hi = g_hi.max(g);
    }
    let mut s_max: f64 = 0.0;
    for &t in &linspace(0.0, t_end, 16) {
        for &x in &probe {
            let (a0, b0, c0) = (s.coeffs.a0.value(x, t)?, s.coeffs.b0.value(x, t)?, s.coeffs.c0.value(x, t)?);
            for g in [g_lo, g_hi] {
                s_max = s_max.max(((b0 + c0 * g) / a0).abs());
            }
        }
    }
    let margin = 0.1 * width;
    let pad = t_end * s_max + 2.0 * margin;
    let lo = s.x_min - pad;
    let hi = s.x_max + pad;
    let n_fan = (((hi - lo) / hx * opts.fan_density).ceil() as usize + 1).clamp(64, 40_000);
    let launch = linspace(lo, hi, n_fan);

    let fan: Vec<Characteristic> = launch
        .par_iter()
        .map(|&xi| -> Result<Characteristic, RegularError> {
            let g = s.u0_init.value(xi, 0.0)?;
            let dg = s.u0_init.dx.eval(xi, 0.0)?;
            let u10 = s.u1_init.value(xi, 0.0)?;
            let jac_floor = 1e-8;
            let (mut path, stop) = ode::integrate(
                |t, y: &[f64; 3]| characteristic_rhs(s, g, dg, t, y),
                0.0,
                [xi, 1.0, u10],
                t_end,
                &opts.ode,
                |_t, y: &[f64; 3]| if y[1] <= jac_floor { ControlFlow::Break(()) } else { ControlFlow::Continue(()) },
            )?;
            if stop.is_some() {
                // locate where the Jacobian reaches the floor inside the last step
                let seg = path.segments.last().expect("stopped after a step");
                let tc = bisect(|t| seg.eval(t)[1] - jac_floor, seg.t0, seg.t1(), 1e-14);
                path.truncate_at(tc);
            }
            Ok(Characteristic { xi, u0: g, path })
        })
        .collect::<Result<_, _>>()?;

    let t_jac = fan.iter().map(|c| c.path.t_end()).fold(t_end, f64::min);
    let min_dd = |t: f64| -> f64 {
        let mut m = f64::INFINITY;
        for pair in fan.windows(2) {
            let x0 = pair[0].path.eval(t).map_or(f64::NAN, |y| y[0]);
            let x1 = pair[1].path.eval(t).map_or(f64::NAN, |y| y[0]);
            m = m.min((x1 - x0) / (pair[1].xi - pair[0].xi));
        }
        m
    };
    let scan = linspace(0.0, t_jac, 8 * s.n_t);
    let mut t_break = None;
    for k in 1..scan.len() {
        if min_dd(scan[k]) <= opts.crossing_threshold {
            let tb = bisect(|t| min_dd(t) - opts.crossing_threshold, scan[k - 1], scan[k], 1e-3 * t_end);
            t_break = Some(tb);
            break;
        }
    }
    if t_break.is_none() && t_jac < t_end {
        t_break = Some(t_jac);
    }
    let t_valid = match t_break {
        Some(tb) if !opts.allow_breaking => return Err(RegularError::GradientCatastrophe { t_break: tb }),
        // stay clear of the crossing so the resampling below is well posed
        Some(tb) => tb - 2e-3 * t_end,
        None => t_end,
    };

    let n_pad = (margin / hx).round() as usize;
    let xs = linspace(s.x_min - n_pad as f64 * hx, s.x_max + n_pad as f64 * hx, s.n_x + 2 * n_pad);
    let ts = linspace(0.0, t_valid, s.n_t);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = ts
        .par_iter()
        .map(|&t| -> Result<_, RegularError> {
            let mut px = Vec::with_capacity(fan.len());
            let mut p0 = Vec::with_capacity(fan.len());
            let mut p1 = Vec::with_capacity(fan.len());
            for c in &fan {
                let y = c.path.eval(t).expect("fan covers the valid interval");
                px.push(y[0]);
                p0.push(c.u0);
                p1.push(y[2]);
            }
            let s0 = CubicSpline::not_a_knot(&px, &p0)?;
            let s1 = CubicSpline::not_a_knot(&px, &p1)?;
            Ok((xs.iter().map(|&x| s0.eval(x)).collect(), xs.iter().map(|&x| s1.eval(x)).collect()))
        })
        .collect::<Result<_, _>>()?;
    let mut v0 = Vec::with_capacity(xs.len() * ts.len());
    let mut v1 = Vec::with_capacity(xs.len() * ts.len());
    for (r0, r1) in rows {
        v0.extend(r0);
        v1.extend(r1);
    }
    let u0 = RegularField::from_grid(&xs, &ts, &v0)?;
    let u1 = RegularField::from_grid(&xs, &ts, &v1)?;
    Ok(Regular { u0, u1, fan, t_break, t_valid, xs, ts })
}

impl Regular {
    /// Largest deviation of the interpolated `u0` from the value carried by
    /// each characteristic, over grid times and window points.
    pub fn conservation_defect(&self) -> f64 {
        let (xl, xr) = self.u0.x_range();
        let mut worst: f64 = 0.0;
        for c in &self.fan {
            for &t in &self.ts {
                if let Some(y) = c.path.eval(t) {
                    if y[0] >= xl && y[0] <= xr {
                        let u = self.u0.eval_extrapolated(y[0], t).v;
                        worst = worst.max((u - c.u0).abs());
                    }
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(extra: &str) -> Scenario {
        let doc = format!(
            r#"
a0 = "1"
b0 = "1"
c0 = "1"
phi0 = 0.0
dphi0 = 2.0
T = 1.0
x_min = -2.0
x_max = 3.0
n_x = 101
n_t = 41
{extra}
"#
        );
        Scenario::from_toml(&doc).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_fields() {
        let r = solve_regular(&scenario("u0_init = \"0\""), &RegularOptions::default()).unwrap();
        assert!(r.u0.is_zero() && r.u1.is_zero());
        assert_eq!(r.u0.eval(0.3, 0.5).unwrap().x, 0.0);
        assert!(r.t_break.is_none());
    }

    #[test]
    fn linear_data_closed_form() {
        let r = solve_regular(&scenario("u0_init = \"x\"\na1 = \"1\""), &RegularOptions::default()).unwrap();
        for &(x, t) in &[(0.0, 0.0), (1.3, 0.4), (-1.7, 1.0), (2.9, 0.77)] {
            let j = r.u0.eval(x, t).unwrap();
            assert!((j.v - (x - t) / (1.0 + t)).abs() < 1e-8, "u0 at ({x},{t})");
            assert!((j.x - 1.0 / (1.0 + t)).abs() < 1e-8);
            assert!((j.t + (1.0 + x) / (1.0 + t).powi(2)).abs() < 1e-4);
            let u1 = r.u1.eval(x, t).unwrap();
            assert!((u1.v - (1.0 + x) * t / (1.0 + t).powi(2)).abs() < 1e-7, "u1 at ({x},{t}): {}", u1.v);
        }
        assert!((r.u0.eval(0.0, 1.0).unwrap().x - 0.5).abs() < 1e-9);
        assert!(r.conservation_defect() < 1e-8);
        assert!(matches!(r.u0.eval(0.0, 1.5), Err(RegularError::OutOfDomain { .. })));
    }

    #[test]
    fn breaking_detected() {
        let mut s = scenario("u0_init = \"-x\"");
        s.t_end = 2.0;
        match solve_regular(&s, &RegularOptions::default()) {
            Err(RegularError::GradientCatastrophe { t_break }) => assert!((t_break - 1.0).abs() < 0.02, "{t_break}"),
            other => panic!("expected breaking, got {:?}", other.map(|r| r.t_break)),
        }
        let r = solve_regular(&s, &RegularOptions { allow_breaking: true, ..Default::default() }).unwrap();
        assert!(r.t_valid < 1.0);
        assert!(matches!(r.u0.eval(0.0, 1.2), Err(RegularError::OutOfDomain { .. })));
    }
}

//! Dormand–Prince 5(4) integrator with the standard fourth-order dense output.
//!
//! The right-hand side is fallible: when it returns an error the step is
//! rejected and retried with a smaller step, and if the step size collapses
//! the integration ends with [`OdeError::StepUnderflow`]. A monitor closure
//! sees every accepted step and can end the integration early; the caller
//! then has the dense output up to that step and can locate the event
//! inside the last segment by itself.

use std::ops::ControlFlow;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),
    #[error("right-hand side failed at the initial point t = {t}")]
    InitialRhs { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-10,
            h_init: None,
            h_max: f64::INFINITY,
            h_min: 1e-13,
            max_steps: 200_000,
        }
    }
}

/// One accepted step together with its continuous extension.
#[derive(Debug, Clone)]
pub struct DenseSegment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> DenseSegment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> [f64; N] {
        self.rcont[0]
    }

    pub fn end(&self) -> [f64; N] {
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = self.rcont[0][i] + self.rcont[1][i];
        }
        y
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let r = &self.rcont;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])));
        }
        y
    }
}

/// Piecewise dense output of an integration run, ordered in the direction of
/// integration.
#[derive(Debug, Clone)]
pub struct DenseTrajectory<const N: usize> {
    pub t_start: f64,
    pub y_start: [f64; N],
    pub segments: Vec<DenseSegment<N>>,
}

impl<const N: usize> DenseTrajectory<N> {
    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(self.t_start, |s| s.t1())
    }

    pub fn y_end(&self) -> [f64; N] {
        self.segments.last().map_or(self.y_start, |s| s.end())
    }

    pub fn span(&self) -> (f64, f64) {
        let (a, b) = (self.t_start, self.t_end());
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.span();
        t >= lo - 1e-14 * (1.0 + lo.abs()) && t <= hi + 1e-14 * (1.0 + hi.abs())
    }

    /// Evaluates the interpolant; `None` outside the integrated span.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        if !self.contains(t) {
            return None;
        }
        if self.segments.is_empty() {
            return Some(self.y_start);
        }
        let forward = self.segments[0].h > 0.0;
        // segments are monotone in time along the integration direction
        let idx = self.segments.partition_point(|s| {
            if forward {
                s.t1() < t
            } else {
                s.t1() > t
            }
        });
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        Some(seg.eval(t))
    }

    /// Drops everything after `t` (in the integration direction) so the
    /// trajectory ends exactly at `t`.
    pub fn truncate_at(&mut self, t: f64) {
        let forward = self.segments.first().is_none_or(|s| s.h > 0.0);
        let keep = self.segments.partition_point(|s| {
            if forward {
                s.t0 < t
            } else {
                s.t0 > t
            }
        });
        self.segments.truncate(keep);
        if let Some(last) = self.segments.last_mut() {
            let y_t = last.eval(t);
            let y0 = last.start();
            // re-parameterize the final segment onto [t0, t]
            let f0 = derivative_at(last, last.t0);
            let f1 = derivative_at(last, t);
            let h = t - last.t0;
            let mut r = [[0.0; N]; 5];
            for i in 0..N {
                let ydiff = y_t[i] - y0[i];
                let bspl = h * f0[i] - ydiff;
                r[0][i] = y0[i];
                r[1][i] = ydiff;
                r[2][i] = bspl;
                r[3][i] = ydiff - h * f1[i] - bspl;
                r[4][i] = 0.0;
            }
            last.h = h;
            last.rcont = r;
        }
    }
}

/// Time derivative of the segment interpolant.
pub fn derivative_at<const N: usize>(seg: &DenseSegment<N>, t: f64) -> [f64; N] {
    let s = (t - seg.t0) / seg.h;
    let r = &seg.rcont;
    let mut d = [0.0; N];
    for i in 0..N {
        // y = r0 + s(r1 + (1-s)(r2 + s(r3 + (1-s) r4)))
        let q = r[3][i] + (1.0 - s) * r[4][i];
        let dq = -r[4][i];
        let p = r[2][i] + s * q;
        let dp = q + s * dq;
        let m = r[1][i] + (1.0 - s) * p;
        let dm = -p + (1.0 - s) * dp;
        let dy = m + s * dm;
        d[i] = dy / seg.h;
    }
    d
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction).
///
/// Returns the dense trajectory; when `monitor` breaks, the trajectory ends
/// at the last accepted step and the break payload is returned alongside.
pub fn integrate<const N: usize, E, B, F, M>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &Dopri5Options,
    mut monitor: M,
) -> Result<(DenseTrajectory<N>, Option<B>), OdeError>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
    M: FnMut(f64, &[f64; N]) -> ControlFlow<B>,
{
    let mut traj = DenseTrajectory { t_start: t0, y_start: y0, segments: Vec::new() };
    if t_end == t0 {
        return Ok((traj, None));
    }
    let dir = (t_end - t0).signum();
    let span = (t_end - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y).map_err(|_| OdeError::InitialRhs { t })?;

    let mut h = match opts.h_init {
        Some(h) => h.abs(),
        None => initial_step(&mut rhs, t, &y, &k1, dir, opts).unwrap_or(span * 1e-3),
    }
    .min(opts.h_max)
    .min(span);
    let mut steps = 0usize;
    let mut fac_old: f64 = 1e-4;
    let mut last_reject = false;

    loop {
        if steps >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        let remaining = (t_end - t) * dir;
        if remaining <= 1e-15 * (1.0 + t.abs()) {
            break;
        }
        if h >= remaining {
            h = remaining;
        }
        if h < opts.h_min * (1.0 + t.abs()) {
            return Err(OdeError::StepUnderflow { t });
        }
        steps += 1;
        let hs = h * dir;
        let stages = (|| -> Result<_, E> {
            let k2 = rhs(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]))?;
            let k3 = rhs(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = rhs(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = rhs(
                t + C5 * hs,
                &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = rhs(
                t + hs,
                &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            )?;
            let y_new = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = rhs(t + hs, &y_new)?;
            Ok((k2, k3, k4, k5, k6, k7, y_new))
        })();
        let Ok((_k2, k3, k4, k5, k6, k7, y_new)) = stages else {
            h *= 0.25;
            last_reject = true;
            continue;
        };

        let mut err = 0.0;
        for i in 0..N {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
            last_reject = true;
            continue;
        }

        // PI step-size control as in Hairer's DOPRI5
        let beta = 0.04;
        let expo1 = 0.2 - beta * 0.75;
        let fac11 = err.powf(expo1);
        let mut fac = fac11 / fac_old.powf(beta);
        fac = (fac / 0.9).clamp(0.1, 5.0);
        let h_new = h / fac;

        if err <= 1.0 {
            fac_old = err.max(1e-4);
            let mut rcont = [[0.0; N]; 5];
            for i in 0..N {
                let ydiff = y_new[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                rcont[0][i] = y[i];
                rcont[1][i] = ydiff;
                rcont[2][i] = bspl;
                rcont[3][i] = ydiff - hs * k7[i] - bspl;
                rcont[4][i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            traj.segments.push(DenseSegment { t0: t, h: hs, rcont });
            t += hs;
            y = y_new;
            k1 = k7;
            if let ControlFlow::Break(b) = monitor(t, &y) {
                return Ok((traj, Some(b)));
            }
            h = if last_reject { h_new.min(h) } else { h_new };
            h = h.min(opts.h_max);
            last_reject = false;
        } else {
            h /= (fac11 / 0.9).clamp(1.0, 10.0);
            last_reject = true;
        }
    }
    Ok((traj, None))
}

fn initial_step<const N: usize, E, F>(
    rhs: &mut F,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    opts: &Dopri5Options,
) -> Option<f64>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
{
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..N {
        let sk = opts.atol + opts.rtol * y[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
    h = h.min(opts.h_max);
    let y1 = axpy(y, h * dir, &[(1.0, f0)]);
    let f1 = rhs(t + h * dir, &y1).ok()?;
    let mut der2 = 0.0;
    for i in 0..N {
        let sk = opts.atol + opts.rtol * y[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(0.2) };
    Some((100.0 * h).min(h1).min(opts.h_max))
}

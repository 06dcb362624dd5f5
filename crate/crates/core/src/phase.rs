//! The curve `x = phi(t)` along which the soliton travels.
//!
//! `phi` solves a second-order ODE whose coefficients come from the
//! solvability condition of the first correction:
//!
//! ```text
//! (q2 p^2 + q1 p + q0) phi'' + r4 p^4 + r3 p^3 + r2 p^2 + r1 p = 0,   p = phi'
//! ```
//!
//! with every coefficient evaluated at `(phi, t)`. A soliton exists only
//! while the margin `phi' * (phi' a0 - b0 - c0 u0)` stays positive.

use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

use serde::Serialize;

use crate::exprdsl::ExprError;
use crate::numerics::bisect;
use crate::numerics::ode::{self, DenseTrajectory, Dopri5Options, OdeError};
use crate::regular::{RegularError, RegularField};
use crate::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum PhaseError {
    #[error("inadmissible start: phi'(0) * A(phi(0), 0) = {margin} is not positive")]
    InadmissibleStart { margin: f64 },
    #[error("phase integration broke down near t = {t}")]
    Blowup { t: f64 },
    #[error("t = {t} is outside the phase interval [0, {t_eff}]")]
    OutOfDomain { t: f64, t_eff: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Regular(#[from] RegularError),
    #[error(transparent)]
    Ode(OdeError),
}

/// Coefficients of the phase equation at one point of the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseCoeffs {
    /// Multipliers of `phi''`: coefficients of `p^2`, `p`, `1`.
    pub bracket: [f64; 3],
    /// Forcing: coefficients of `p^4`, `p^3`, `p^2`, `p`.
    pub forcing: [f64; 4],
    /// Background transport speed numerator `b0 + c0 u0`.
    pub alpha: f64,
}

impl PhaseCoeffs {
    pub fn bracket_at(&self, p: f64) -> f64 {
        let [q2, q1, q0] = self.bracket;
        (q2 * p + q1) * p + q0
    }

    pub fn forcing_at(&self, p: f64) -> f64 {
        let [r4, r3, r2, r1] = self.forcing;
        (((r4 * p + r3) * p + r2) * p + r1) * p
    }
}

/// Local data on the curve that the coefficients are built from.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointData {
    pub a0: f64,
    pub a0x: f64,
    pub a0t: f64,
    pub b0: f64,
    pub b0x: f64,
    pub b0t: f64,
    pub c0: f64,
    pub c0x: f64,
    pub c0t: f64,
    pub u0: f64,
    pub u0x: f64,
    pub u0t: f64,
}

impl PointData {
    pub fn at(s: &Scenario, u0: &RegularField, x: f64, t: f64) -> Result<PointData, PhaseError> {
        let a0 = s.coeffs.a0.eval(x, t)?;
        let b0 = s.coeffs.b0.eval(x, t)?;
        let c0 = s.coeffs.c0.eval(x, t)?;
        let u = u0.eval(x, t)?;
        Ok(PointData {
            a0: a0.v,
            a0x: a0.x,
            a0t: a0.t,
            b0: b0.v,
            b0x: b0.x,
            b0t: b0.t,
            c0: c0.v,
            c0x: c0.x,
            c0t: c0.t,
            u0: u.v,
            u0x: u.x,
            u0t: u.t,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.b0 + self.c0 * self.u0
    }

    pub fn alpha_x(&self) -> f64 {
        self.b0x + self.c0x * self.u0 + self.c0 * self.u0x
    }

    pub fn alpha_t(&self) -> f64 {
        self.b0t + self.c0t * self.u0 + self.c0 * self.u0t
    }

    /// Relative speed `A = p a0 - b0 - c0 u0`.
    pub fn relative_speed(&self, p: f64) -> f64 {
        p * self.a0 - self.alpha()
    }

    pub fn coeffs(&self) -> PhaseCoeffs {
        let d = self;
        let (a0, c0) = (d.a0, d.c0);
        let al = d.alpha();
        let alx = d.alpha_x();
        let alt = d.alpha_t();
        let bracket = [24.0 * a0 * a0 * c0, -8.0 * a0 * c0 * al, -c0 * al * al];
        let r4 = -40.0 * d.c0x * a0 * a0 + 30.0 * a0 * d.a0x * c0;
        let r3 = 60.0 * a0 * d.c0x * al + 20.0 * a0 * d.a0t * c0 - 24.0 * a0 * a0 * d.c0t - 30.0 * a0 * c0 * alx
            - 15.0 * d.a0x * c0 * al
            + 20.0 * a0 * c0 * c0 * d.u0x;
        let r2 = -20.0 * a0 * c0 * alt - 5.0 * d.a0t * c0 * al + 15.0 * c0 * al * alx + 28.0 * a0 * d.c0t * al
            - 20.0 * c0 * c0 * d.u0x * al
            - 20.0 * d.c0x * al * al;
        let r1 = 5.0 * c0 * al * alt - 4.0 * d.c0t * al * al;
        PhaseCoeffs { bracket, forcing: [r4, r3, r2, r1], alpha: al }
    }
}

pub fn phase_coeffs(s: &Scenario, u0: &RegularField, phi: f64, t: f64) -> Result<PhaseCoeffs, PhaseError> {
    Ok(PointData::at(s, u0, phi, t)?.coeffs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Horizon,
    SingularBracket,
    AdmissibilityLost,
    LeftWindow,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Horizon => "reached the horizon",
            StopReason::SingularBracket => "leading coefficient of phi'' vanished",
            StopReason::AdmissibilityLost => "admissibility margin reached zero",
            StopReason::LeftWindow => "curve left the space window",
        })
    }
}

/// Value and derivatives of the curve at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub phi: f64,
    pub dphi: f64,
    pub ddphi: f64,
}

#[derive(Debug, Clone)]
pub struct PhaseCurve {
    scenario: Arc<Scenario>,
    u0: Arc<RegularField>,
    path: DenseTrajectory<2>,
    pub t_eff: f64,
    pub stop: StopReason,
    pub admissible: bool,
    /// `(t, margin)` at every accepted step.
    pub margins: Vec<(f64, f64)>,
    /// Multiplier applied to the displacement `phi - phi(0)`; 1 for the
    /// solved curve. Other values give deliberately wrong curves for
    /// sensitivity checks.
    scale: f64,
}

fn rhs(s: &Scenario, u0: &RegularField, t: f64, y: &[f64; 2]) -> Result<[f64; 2], PhaseError> {
    let c = phase_coeffs(s, u0, y[0], t)?;
    let p = y[1];
    let br = c.bracket_at(p);
    if br == 0.0 {
        return Err(PhaseError::Blowup { t });
    }
    Ok([p, -c.forcing_at(p) / br])
}

fn bracket_tolerance(c: &PhaseCoeffs, p: f64) -> f64 {
    1e-10 * (1.0f64).max(c.bracket[0].abs() * p * p)
}

pub fn admissibility_margin_at(s: &Scenario, u0: &RegularField, phi: f64, dphi: f64, t: f64) -> Result<f64, PhaseError> {
    let d = PointData::at(s, u0, phi, t)?;
    Ok(dphi * d.relative_speed(dphi))
}

/// Integrates the phase equation from the scenario's start.
pub fn solve_phase(s: Arc<Scenario>, u0: Arc<RegularField>, t_end: f64) -> Result<PhaseCurve, PhaseError> {
    solve_phase_with(s, u0, t_end, &Dopri5Options { rtol: 1e-9, atol: 1e-10, ..Default::default() })
}

pub fn solve_phase_with(
    s: Arc<Scenario>,
    u0: Arc<RegularField>,
    t_end: f64,
    opts: &Dopri5Options,
) -> Result<PhaseCurve, PhaseError> {
    let m0 = admissibility_margin_at(&s, &u0, s.phi0, s.dphi0, 0.0)?;
    if !(m0 > 0.0) {
        return Err(PhaseError::InadmissibleStart { margin: m0 });
    }
    let (xl, xr) = (s.x_min, s.x_max);
    let mut margins = vec![(0.0, m0)];
    // signed distance to each stopping condition; negative means stop
    let guard = |t: f64, y: &[f64; 2]| -> [f64; 3] {
        let Ok(d) = PointData::at(&s, &u0, y[0], t) else {
            return [-1.0, -1.0, -1.0];
        };
        let c = d.coeffs();
        let p = y[1];
        [
            c.bracket_at(p).abs() - bracket_tolerance(&c, p),
            p * d.relative_speed(p),
            (y[0] - xl).min(xr - y[0]),
        ]
    };
    let (mut path, stop) = ode::integrate(
        |t, y: &[f64; 2]| rhs(&s, &u0, t, y),
        0.0,
        [s.phi0, s.dphi0],
        t_end,
        opts,
        |t, y: &[f64; 2]| {
            let g = guard(t, y);
            margins.push((t, g[1]));
            match g.iter().position(|v| *v <= 0.0) {
                Some(k) => ControlFlow::Break(k),
                None => ControlFlow::Continue(()),
            }
        },
    )
    .map_err(|e| match e {
        OdeError::StepUnderflow { t } => PhaseError::Blowup { t },
        e => PhaseError::Ode(e),
    })?;
    let stop_reason = match stop {
        None => StopReason::Horizon,
        Some(k) => {
            margins.pop();
            let seg = path.segments.last().expect("stopped after a step").clone();
            let tc = bisect(|t| guard(t, &seg.eval(t))[k], seg.t0, seg.t1(), 1e-13);
            // back off so the stored curve keeps a strictly positive margin
            let t_cut = (tc - 1e-9 * (1.0 + tc)).max(seg.t0);
            path.truncate_at(t_cut);
            margins.push((t_cut, guard(t_cut, &path.y_end())[1]));
            [StopReason::SingularBracket, StopReason::AdmissibilityLost, StopReason::LeftWindow][k]
        }
    };
    let t_eff = path.t_end();
    let admissible = margins.iter().all(|m| m.1 > 0.0);
    Ok(PhaseCurve { scenario: s, u0, path, t_eff, stop: stop_reason, admissible, margins, scale: 1.0 })
}

impl PhaseCurve {
    pub fn eval(&self, t: f64) -> Result<PhaseState, PhaseError> {
        let tol = 1e-12 * (1.0 + self.t_eff);
        if t < -tol || t > self.t_eff + tol {
            return Err(PhaseError::OutOfDomain { t, t_eff: self.t_eff });
        }
        let t = t.clamp(0.0, self.t_eff);
        let y = self.path.eval(t).ok_or(PhaseError::OutOfDomain { t, t_eff: self.t_eff })?;
        let ddphi = rhs(&self.scenario, &self.u0, t, &y)?[1];
        let f = self.scale;
        Ok(PhaseState { phi: self.scenario.phi0 + f * (y[0] - self.scenario.phi0), dphi: f * y[1], ddphi: f * ddphi })
    }

    /// A copy whose displacement from `phi(0)` is multiplied by `factor`,
    /// so that `phi'` is inflated by the same factor.
    pub fn perturbed(&self, factor: f64) -> PhaseCurve {
        let mut c = self.clone();
        c.scale *= factor;
        c
    }

    pub fn is_perturbed(&self) -> bool {
        self.scale != 1.0
    }

    pub fn margin(&self, t: f64) -> Result<f64, PhaseError> {
        let st = self.eval(t)?;
        admissibility_margin_at(&self.scenario, &self.u0, st.phi, st.dphi, t)
    }

    pub fn steps(&self) -> usize {
        self.path.segments.len()
    }
}

//! Piecewise assembly of the asymptotic solution.
//!
//! Away from the curve the solution is the regular part `u0 + eps u1`; the
//! plateau form adds `eps u1^-` on the left. In the strip
//! `|x - phi(t)| <= eps * tau_max` the singular terms are added: the soliton
//! `V0` and, at first order, the correction `V1`. In the plateau form the
//! correction is `v1 + (u1^- - nu1) eta`, which joins the left extension
//! continuously at the strip boundary.

use std::sync::Arc;

use serde::Serialize;

use crate::jet::Jet;
use crate::numerics::linspace;
use crate::phase::{solve_phase, PhaseCurve, PhaseError};
use crate::regular::extension::{Extension, ExtensionOptions};
use crate::regular::{solve_regular, Regular, RegularError, RegularOptions};
use crate::scenario::{Form, Scenario};
use crate::singular::{DecayClass, Singular, SingularError, SingularOptions, TimeView};

#[derive(Debug, thiserror::Error)]
pub enum AssembleError {
    #[error("form {requested} is not available: {reason}")]
    FormUnavailable { requested: Form, reason: String },
    #[error("order {0} is not supported (0 or 1)")]
    UnsupportedOrder(usize),
    #[error(transparent)]
    Regular(#[from] RegularError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Singular(#[from] SingularError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    Dminus,
    Omega,
    Dplus,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Dminus => "Dminus",
            Region::Omega => "Omega",
            Region::Dplus => "Dplus",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub order: usize,
    /// Overrides the scenario's form.
    pub form: Option<Form>,
    pub regular: RegularOptions,
    pub singular: SingularOptions,
    pub extension: ExtensionOptions,
    /// Drops every singular term, leaving the regular part.
    pub suppress_soliton: bool,
    /// Inflates the curve's displacement (and so `phi'`) by this factor;
    /// produces a deliberately wrong solution for sensitivity checks.
    pub phase_scale: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            order: 1,
            form: None,
            regular: RegularOptions::default(),
            singular: SingularOptions::default(),
            extension: ExtensionOptions::default(),
            suppress_soliton: false,
            phase_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AsymptoticSolution {
    pub scenario: Arc<Scenario>,
    pub regular: Arc<Regular>,
    pub curve: Arc<PhaseCurve>,
    pub singular: Option<Singular>,
    pub extension: Option<Extension>,
    pub order: usize,
    /// Resolved form, `Theorem1` or `Theorem2`.
    pub form: Form,
    pub tau_max: f64,
    pub suppress_soliton: bool,
}

pub fn build_solution(scenario: Arc<Scenario>, opts: &BuildOptions) -> Result<AsymptoticSolution, AssembleError> {
    if opts.order > 1 {
        return Err(AssembleError::UnsupportedOrder(opts.order));
    }
    let requested = opts.form.unwrap_or(scenario.form);
    let regular = Arc::new(solve_regular(&scenario, &opts.regular)?);
    let mut curve = solve_phase(scenario.clone(), Arc::new(regular.u0.clone()), scenario.t_end)?;
    if opts.phase_scale != 1.0 {
        curve = curve.perturbed(opts.phase_scale);
    }
    let curve = Arc::new(curve);

    let singular = if opts.order >= 1 {
        let mut sopts = opts.singular;
        if curve.is_perturbed() {
            // a wrong curve violates solvability by design; keep going so
            // that the verification can measure the damage
            sopts.solvability_tol = None;
        }
        Some(Singular::build(scenario.clone(), regular.clone(), curve.clone(), &sopts)?)
    } else {
        None
    };
    let decaying = singular.as_ref().is_none_or(|s| s.decay.class == DecayClass::Decaying);
    let form = match requested {
        Form::Theorem1 if !decaying => {
            return Err(AssembleError::FormUnavailable {
                requested,
                reason: "the first correction has a nonzero left limit (plateau classification)".into(),
            })
        }
        Form::Auto if decaying => Form::Theorem1,
        Form::Auto => Form::Theorem2,
        f => f,
    };
    let extension = match (&singular, form) {
        (Some(sg), Form::Theorem2) => Some(
            Extension::solve(&scenario, &regular.u0, &curve, sg.nu1_spline(), regular.u0.x_range(), &opts.extension)
                .map_err(|e| match e {
                    RegularError::TransversalityLoss { .. } | RegularError::OutOfDomain { .. } => {
                        AssembleError::FormUnavailable { requested, reason: format!("extension term: {e}") }
                    }
                    e => AssembleError::Regular(e),
                })?,
        ),
        _ => None,
    };
    let tau_max = match &singular {
        Some(sg) => sg.tau_max,
        None => {
            let sopts = &opts.singular;
            let k0 = crate::singular::OnCurve::new(&scenario, &regular, &curve, 0.0)?.kappa;
            sopts.tau_max.or(scenario.tau_max).unwrap_or_else(|| 40f64.max(60.0 / k0))
        }
    };
    Ok(AsymptoticSolution {
        scenario,
        regular,
        curve,
        singular,
        extension,
        order: opts.order,
        form,
        tau_max,
        suppress_soliton: opts.suppress_soliton,
    })
}

/// The solution frozen at one time, for repeated evaluation in `x`.
pub struct SolutionAt<'a> {
    sol: &'a AsymptoticSolution,
    pub t: f64,
    pub phi: f64,
    pub dphi: f64,
    view: Option<TimeView<'a>>,
    core: crate::singular::OnCurve,
}

/// Evaluated solution with its region tag.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub jet: Jet,
    pub region: Region,
}

impl AsymptoticSolution {
    pub fn t_eff(&self) -> f64 {
        self.curve.t_eff
    }

    /// Half-width of the strip around the curve.
    pub fn strip_half_width(&self, eps: f64) -> f64 {
        eps * self.tau_max
    }

    pub fn at(&self, t: f64) -> Result<SolutionAt<'_>, AssembleError> {
        let st = self.curve.eval(t)?;
        let view = match &self.singular {
            Some(sg) => Some(sg.at(t)?),
            None => None,
        };
        let core = match &view {
            Some(v) => v.oc,
            None => crate::singular::OnCurve::new(&self.scenario, &self.regular, &self.curve, t)?,
        };
        Ok(SolutionAt { sol: self, t, phi: st.phi, dphi: st.dphi, view, core })
    }

    pub fn eval(&self, x: f64, t: f64, eps: f64) -> Result<Sample, AssembleError> {
        self.at(t)?.eval(x, eps)
    }

    /// Largest jump of the piecewise solution across the strip boundary at
    /// `n` times.
    pub fn boundary_jump(&self, eps: f64, n: usize) -> Result<f64, AssembleError> {
        let mut worst: f64 = 0.0;
        for &t in &linspace(0.0, self.t_eff(), n) {
            let at = self.at(t)?;
            let w = self.strip_half_width(eps);
            for x in [at.phi - w, at.phi + w] {
                let inner = at.inner(x, eps)?;
                let outer = at.outer(x, eps)?;
                worst = worst.max((inner.v - outer.v).abs());
            }
        }
        Ok(worst)
    }
}

impl SolutionAt<'_> {
    pub fn region(&self, x: f64, eps: f64) -> Region {
        let tau = (x - self.phi) / eps;
        if tau.abs() <= self.sol.tau_max {
            Region::Omega
        } else if tau < 0.0 {
            Region::Dminus
        } else {
            Region::Dplus
        }
    }

    fn regular_part(&self, x: f64, eps: f64) -> Result<Jet, AssembleError> {
        let reg = &self.sol.regular;
        let mut y = reg.u0.eval(x, self.t)?;
        if self.sol.order >= 1 {
            y = y + reg.u1.eval(x, self.t)?.scale(eps);
        }
        Ok(y)
    }

    /// The form used outside the strip, evaluated at any `x`.
    pub fn outer(&self, x: f64, eps: f64) -> Result<Jet, AssembleError> {
        let mut y = self.regular_part(x, eps)?;
        if x < self.phi {
            if let Some(ext) = &self.sol.extension {
                y = y + ext.eval(x, self.t)?.scale(eps);
            }
        }
        Ok(y)
    }

    /// The form used inside the strip, evaluated at any `x`.
    pub fn inner(&self, x: f64, eps: f64) -> Result<Jet, AssembleError> {
        let mut y = self.regular_part(x, eps)?;
        if self.sol.suppress_soliton {
            return Ok(y);
        }
        let tau = (x - self.phi) / eps;
        y = y + Jet::from_stretched(&self.core.v0(tau), self.dphi, eps);
        if let Some(view) = &self.view {
            let mut v1 = Jet::from_stretched(&view.v1(tau), self.dphi, eps);
            if let Some(ext) = &self.sol.extension {
                let eta = Jet::from_stretched(&view.eta(tau), self.dphi, eps);
                let nu = Jet { v: view.nu1, t: view.nu1_dt, ..Jet::ZERO };
                v1 = v1 + (ext.eval(x, self.t)? - nu) * eta;
            }
            y = y + v1.scale(eps);
        }
        Ok(y)
    }

    pub fn eval(&self, x: f64, eps: f64) -> Result<Sample, AssembleError> {
        let region = self.region(x, eps);
        let jet = match region {
            Region::Omega => self.inner(x, eps)?,
            _ => self.outer(x, eps)?,
        };
        Ok(Sample { jet, region })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONSTANT: &str = "a0 = \"1\"\nb0 = \"1\"\nc0 = \"1\"\nphi0 = 0.0\ndphi0 = 2.0\nT = 1.0\nx_min = -8.0\nx_max = 10.0\nn_x = 64\nn_t = 16\ntau_max = 40\n";

    fn constant(order: usize) -> AsymptoticSolution {
        let s = Arc::new(Scenario::from_toml(CONSTANT).unwrap());
        build_solution(s, &BuildOptions { order, ..Default::default() }).unwrap()
    }

    #[test]
    fn constant_coefficients_reduce_to_the_soliton() {
        let sol = constant(0);
        assert_eq!(sol.form, Form::Theorem1);
        let eps = 0.1;
        let kappa = 0.5 * 0.5f64.sqrt();
        for &t in &[0.0, 0.4, 1.0] {
            let at = sol.at(t).unwrap();
            assert!((at.phi - 2.0 * t).abs() < 1e-12);
            let peak = at.eval(at.phi, eps).unwrap();
            assert!((peak.jet.v - 3.0).abs() < 1e-12);
            assert!(peak.jet.x.abs() < 1e-12);
            for &x in &[-1.0, 0.3, 1.7, 2.2] {
                let s = at.eval(x, eps).unwrap();
                let tau = (x - 2.0 * t) / eps;
                if tau.abs() <= 40.0 {
                    let exact = 3.0 / (kappa * tau).cosh().powi(2);
                    assert!((s.jet.v - exact).abs() < 1e-10);
                }
            }
            let far = at.eval(at.phi + 10.0 * 0.1 * 4.5, eps).unwrap();
            assert_eq!(far.region, Region::Dplus);
            assert_eq!(far.jet.v, 0.0);
        }
    }

    #[test]
    fn first_order_constant_solution_matches_zeroth() {
        let s0 = constant(0);
        let s1 = constant(1);
        assert_eq!(s1.form, Form::Theorem1);
        for &x in &[-0.5, 0.1, 0.45, 0.6] {
            let a = s0.eval(x, 0.5, 0.05).unwrap().jet;
            let b = s1.eval(x, 0.5, 0.05).unwrap().jet;
            assert!((a.v - b.v).abs() < 1e-12);
            assert!((a.xxt - b.xxt).abs() < 1e-8 * (1.0 + a.xxt.abs()));
        }
    }

    #[test]
    fn epsilon_scaling_of_the_soliton() {
        let sol = constant(0);
        let at = sol.at(0.7).unwrap();
        for &x in &[1.3, 1.38, 1.41, 1.5] {
            let a = at.eval(x, 0.1).unwrap().jet.v;
            let b = at.eval((x - at.phi) / 2.0 + at.phi, 0.05).unwrap().jet.v;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn suppressed_soliton_leaves_zero() {
        let s = Arc::new(Scenario::from_toml(CONSTANT).unwrap());
        let sol = build_solution(s, &BuildOptions { order: 0, suppress_soliton: true, ..Default::default() }).unwrap();
        assert_eq!(sol.eval(0.0, 0.0, 0.1).unwrap().jet, Jet::ZERO);
    }
}

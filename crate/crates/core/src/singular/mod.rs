//! Singular part of the expansion in the stretched variable
//! `tau = (x - phi(t)) / eps`.
//!
//! On a set of time slices clustered at both ends of `[0, T_eff]` this
//! module evaluates the soliton core `v0`, integrates the source of the
//! first correction to get `Phi1`, its left limit and the plateau value
//! `nu1`, checks the solvability (orthogonality) condition, classifies the
//! correction as decaying or plateau, and solves the correction equation
//! `L v1 = Phi1` with a bordered Numerov scheme. Between slices the nodal
//! data are interpolated by cubic splines in `t`; in `tau` by quintic
//! Hermite interpolation of `(v1, v1', v1'')`.

pub mod bordered;
pub mod profile;

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::jet::StretchedDerivs;
use crate::numerics::linalg::LinalgError;
use crate::numerics::quad;
use crate::numerics::spline::{cubic_hermite_basis, locate, not_a_knot_slopes, quintic_hermite_basis, CubicSpline};
use crate::numerics::chebyshev_lobatto;
use crate::phase::{PhaseCurve, PhaseError};
use crate::regular::Regular;
use crate::scenario::Scenario;

pub use bordered::{BorderedProblem, BorderedSolution};
pub use profile::OnCurve;

#[derive(Debug, thiserror::Error)]
pub enum SingularError {
    #[error("solvability condition fails at t = {t}: normalized orthogonality residual {residual:.3e}")]
    Solvability { t: f64, residual: f64 },
    #[error("correction solve failed at t = {t}: {source}")]
    LinearSolve {
        t: f64,
        #[source]
        source: LinalgError,
    },
    #[error("quadrature did not reach tolerance at t = {t}")]
    Quadrature { t: f64 },
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

#[derive(Debug, Clone, Copy)]
pub struct SingularOptions {
    pub slices: usize,
    pub h: f64,
    /// Overrides the scenario cutoff.
    pub tau_max: Option<f64>,
    /// Fail when the solvability condition is violated by more than this.
    pub solvability_tol: Option<f64>,
}

impl Default for SingularOptions {
    fn default() -> Self {
        Self { slices: 65, h: 0.05, tau_max: None, solvability_tol: Some(1e-5) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayClass {
    Decaying,
    Plateau,
}

/// Scalars of one time slice.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SliceScalars {
    pub t: f64,
    /// Left limit of `Phi1`, fixed so that `Phi1(+inf) = 0`.
    pub e1: f64,
    /// Left limit of `v1`.
    pub nu1: f64,
    pub orthogonality: f64,
    /// Closed-form prediction of `e1`.
    pub e1_predicted: f64,
    pub phi1_max: f64,
    /// Multiplier of the kernel in the bordered solve.
    pub multiplier: f64,
    pub plateau: bool,
}

#[derive(Debug, Clone)]
pub struct Slice {
    pub oc: OnCurve,
    pub phi1: Vec<f64>,
    pub v: Vec<f64>,
    pub vp: Vec<f64>,
    pub vpp: Vec<f64>,
    pub scalars: SliceScalars,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub class: DecayClass,
    /// Slices where the quadrature test and the closed form disagree
    /// (one below 1e-6, the other above 1e-3).
    pub mismatches: Vec<f64>,
    pub max_abs_e1: f64,
    pub max_abs_predicted: f64,
    /// Largest `|e1 - e1_predicted|`.
    pub max_gap: f64,
}

#[derive(Debug, Clone)]
pub struct Singular {
    scenario: Arc<Scenario>,
    regular: Arc<Regular>,
    curve: Arc<PhaseCurve>,
    pub tau_max: f64,
    pub h: f64,
    pub taus: Vec<f64>,
    pub slices: Vec<Slice>,
    pub t_nodes: Vec<f64>,
    /// Per-node slopes in `t` for `v`, `v'`, `v''`, indexed `[slice][node]`.
    dv_dt: [Vec<Vec<f64>>; 3],
    nu1: CubicSpline,
    multiplier: CubicSpline,
    pub decay: DecayReport,
    kernel_shift: f64,
}

/// Integrates the source over each grid cell with adaptive Gauss–Kronrod.
fn cell_integrals<F: Fn(f64) -> f64>(f: &F, taus: &[f64], t: f64) -> Result<Vec<f64>, SingularError> {
    taus.windows(2)
        .map(|w| {
            let r = quad::integrate(f, w[0], w[1], 1e-14, 1e-13);
            if r.converged && r.error <= 1e-11 {
                Ok(r.value)
            } else {
                Err(SingularError::Quadrature { t })
            }
        })
        .collect()
}

/// Normalized orthogonality residual `int F v0 / int |F v0|`.
pub fn orthogonality_residual(oc: &OnCurve, taus: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for w in taus.windows(2) {
        let f = |tau: f64| oc.source(tau) * oc.v0_all(tau).0[0];
        num += quad::integrate(f, w[0], w[1], 1e-16, 1e-13).value;
        den += quad::integrate(|tau| f(tau).abs(), w[0], w[1], 1e-16, 1e-10).value;
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Integrated source data on a grid: `(Phi1 at nodes, e1)`.
pub fn integrate_source(oc: &OnCurve, taus: &[f64]) -> Result<(Vec<f64>, f64), SingularError> {
    let cells = cell_integrals(&|tau| oc.source(tau), taus, oc.t)?;
    let total: f64 = cells.iter().sum();
    let e1 = -total;
    let mut phi1 = Vec::with_capacity(taus.len());
    let mut acc = e1;
    phi1.push(acc);
    for c in &cells {
        acc += c;
        phi1.push(acc);
    }
    // the right end is zero by construction; remove the roundoff
    *phi1.last_mut().unwrap() = 0.0;
    Ok((phi1, e1))
}

fn fourth_order_slopes(v: &[f64], f: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h) - h / 12.0 * (f[i + 1] - f[i - 1]);
    }
    // ends: integrate v'' across the last cell with the trapezoidal rule
    // corrected by the third derivative estimate
    d[0] = d[1] - 0.5 * h * (f[0] + f[1]) + h * h / 12.0 * (f[2] - f[0]) / 2.0;
    d[n - 1] = d[n - 2] + 0.5 * h * (f[n - 1] + f[n - 2]) + h * h / 12.0 * (f[n - 1] - f[n - 3]) / 2.0;
    d
}

impl Singular {
    pub fn build(
        scenario: Arc<Scenario>,
        regular: Arc<Regular>,
        curve: Arc<PhaseCurve>,
        opts: &SingularOptions,
    ) -> Result<Singular, SingularError> {
        let t_nodes = chebyshev_lobatto(0.0, curve.t_eff, opts.slices.max(2));
        let ocs: Vec<OnCurve> = t_nodes
            .iter()
            .map(|&t| OnCurve::new(&scenario, &regular, &curve, t))
            .collect::<Result<_, _>>()?;
        let kappa_min = ocs.iter().map(|o| o.kappa).fold(f64::INFINITY, f64::min);
        let tau_req = opts.tau_max.or(scenario.tau_max).unwrap_or_else(|| 40f64.max(60.0 / kappa_min));
        let h = opts.h;
        let half = (tau_req / h).ceil() as usize;
        let tau_max = half as f64 * h;
        let n = 2 * half + 1;
        let taus: Vec<f64> = (0..n).map(|i| -tau_max + i as f64 * h).collect();
        let kernel_shift = scenario.kernel_shift;

        let slices: Vec<Slice> = ocs
            .par_iter()
            .map(|oc| Self::solve_slice(oc, &taus, h, kernel_shift))
            .collect::<Result<_, _>>()?;

        if let Some(tol) = opts.solvability_tol {
            if let Some(s) = slices.iter().find(|s| s.scalars.orthogonality.abs() > tol) {
                return Err(SingularError::Solvability { t: s.scalars.t, residual: s.scalars.orthogonality });
            }
        }

        let nt = slices.len();
        let mut dv_dt: [Vec<Vec<f64>>; 3] = [vec![vec![0.0; n]; nt], vec![vec![0.0; n]; nt], vec![vec![0.0; n]; nt]];
        let mut col = vec![0.0; nt];
        for i in 0..n {
            for (q, store) in dv_dt.iter_mut().enumerate() {
                for (j, s) in slices.iter().enumerate() {
                    col[j] = match q {
                        0 => s.v[i],
                        1 => s.vp[i],
                        _ => s.vpp[i],
                    };
                }
                let sl = not_a_knot_slopes(&t_nodes, &col).expect("slice times increase");
                for j in 0..nt {
                    store[j][i] = sl[j];
                }
            }
        }
        let nu: Vec<f64> = slices.iter().map(|s| s.scalars.nu1).collect();
        let lam: Vec<f64> = slices.iter().map(|s| s.scalars.multiplier).collect();
        let nu1 = CubicSpline::not_a_knot(&t_nodes, &nu).expect("slice times increase");
        let multiplier = CubicSpline::not_a_knot(&t_nodes, &lam).expect("slice times increase");
        let decay = classify(&slices);
        Ok(Singular {
            scenario,
            regular,
            curve,
            tau_max,
            h,
            taus,
            slices,
            t_nodes,
            dv_dt,
            nu1,
            multiplier,
            decay,
            kernel_shift,
        })
    }

    fn solve_slice(oc: &OnCurve, taus: &[f64], h: f64, kernel_shift: f64) -> Result<Slice, SingularError> {
        let t = oc.t;
        let (phi1, e1) = integrate_source(oc, taus)?;
        let nu1 = -e1 / oc.rel_speed;
        let orth = orthogonality_residual(oc, taus);
        let potential: Vec<f64> = taus.iter().map(|&tau| oc.potential(tau)).collect();
        let kernel: Vec<f64> = taus.iter().map(|&tau| oc.kernel(tau).0).collect();
        let eta: Vec<f64> = taus.iter().map(|&tau| oc.eta(tau).g).collect();
        let mut prob = BorderedProblem {
            tau0: taus[0],
            h,
            dphi: oc.dphi,
            potential: &potential,
            rhs: &phi1,
            kernel: &kernel,
            left: nu1,
            right: 0.0,
            constraint: 0.0,
        };
        prob.constraint = nu1 * prob.kernel_product(&eta);
        let sol = prob.solve().map_err(|source| SingularError::LinearSolve { t, source })?;
        let lam = sol.multiplier;
        let mut v = sol.v;
        if kernel_shift != 0.0 {
            for (vi, k) in v.iter_mut().zip(&kernel) {
                *vi -= kernel_shift * k;
            }
        }
        // v'' from the equation itself; the kernel shift is annihilated by L
        let vpp: Vec<f64> = (0..taus.len())
            .map(|i| (phi1[i] - lam * kernel[i] + potential[i] * v[i]) / oc.dphi)
            .collect();
        let vp = fourth_order_slopes(&v, &vpp, h);
        let phi1_max = phi1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let e1_predicted = oc.predicted_left_flux();
        let plateau = e1.abs() > 1e-8 * (1.0 + phi1_max);
        Ok(Slice {
            oc: *oc,
            phi1,
            v,
            vp,
            vpp,
            scalars: SliceScalars { t, e1, nu1, orthogonality: orth, e1_predicted, phi1_max, multiplier: lam, plateau },
        })
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn regular(&self) -> &Arc<Regular> {
        &self.regular
    }

    pub fn curve(&self) -> &Arc<PhaseCurve> {
        &self.curve
    }

    pub fn t_eff(&self) -> f64 {
        self.curve.t_eff
    }

    pub fn scalars(&self) -> Vec<SliceScalars> {
        self.slices.iter().map(|s| s.scalars).collect()
    }

    /// Plateau value `nu1(t)` and its time derivative.
    pub fn nu1(&self, t: f64) -> (f64, f64) {
        let e = self.nu1.eval_all(t);
        (e[0], e[1])
    }

    pub fn nu1_spline(&self) -> &CubicSpline {
        &self.nu1
    }

    /// Prepares evaluation at one time.
    pub fn at(&self, t: f64) -> Result<TimeView<'_>, SingularError> {
        let oc = OnCurve::new(&self.scenario, &self.regular, &self.curve, t)?;
        let j = locate(&self.t_nodes, t);
        let (t0, t1) = (self.t_nodes[j], self.t_nodes[j + 1]);
        let ht = t1 - t0;
        let basis = cubic_hermite_basis((t - t0) / ht, ht);
        let lam = self.multiplier.eval(t);
        let (nu, dnu) = self.nu1(t);
        Ok(TimeView { sing: self, oc, j, tb: [basis[0], basis[1]], multiplier: lam, nu1: nu, nu1_dt: dnu })
    }
}

fn classify(slices: &[Slice]) -> DecayReport {
    let mut mismatches = Vec::new();
    let mut max_gap: f64 = 0.0;
    let mut max_e1: f64 = 0.0;
    let mut max_pred: f64 = 0.0;
    for s in slices {
        let sc = &s.scalars;
        let (q, r) = (sc.e1.abs(), sc.e1_predicted.abs());
        max_e1 = max_e1.max(q);
        max_pred = max_pred.max(r);
        max_gap = max_gap.max((sc.e1 - sc.e1_predicted).abs());
        if (q <= 1e-6 && r >= 1e-3) || (r <= 1e-6 && q >= 1e-3) {
            mismatches.push(sc.t);
        }
    }
    let class = if slices.iter().any(|s| s.scalars.plateau) { DecayClass::Plateau } else { DecayClass::Decaying };
    DecayReport { class, mismatches, max_abs_e1: max_e1, max_abs_predicted: max_pred, max_gap }
}

/// Evaluation of the singular terms at a fixed time.
pub struct TimeView<'a> {
    sing: &'a Singular,
    pub oc: OnCurve,
    j: usize,
    /// Cubic Hermite basis in `t`: values and first derivatives.
    tb: [[f64; 4]; 2],
    pub multiplier: f64,
    pub nu1: f64,
    pub nu1_dt: f64,
}

impl TimeView<'_> {
    pub fn v0(&self, tau: f64) -> StretchedDerivs {
        self.oc.v0(tau)
    }

    pub fn eta(&self, tau: f64) -> StretchedDerivs {
        self.oc.eta(tau)
    }

    /// Nodal quantity `q` (0: v, 1: v', 2: v'') at node `i`, interpolated
    /// in time: `(value, d/dt)`.
    fn nodal(&self, q: usize, i: usize) -> (f64, f64) {
        let s = &self.sing.slices;
        let j = self.j;
        let val = |k: usize| match q {
            0 => s[k].v[i],
            1 => s[k].vp[i],
            _ => s[k].vpp[i],
        };
        let (y0, y1) = (val(j), val(j + 1));
        let (d0, d1) = (self.sing.dv_dt[q][j][i], self.sing.dv_dt[q][j + 1][i]);
        let b = &self.tb;
        (
            b[0][0] * y0 + b[0][1] * d0 + b[0][2] * y1 + b[0][3] * d1,
            b[1][0] * y0 + b[1][1] * d0 + b[1][2] * y1 + b[1][3] * d1,
        )
    }

    /// First correction `v1` with derivatives. The third `tau`-derivative
    /// is taken from the correction equation so that it holds exactly at
    /// every evaluation point.
    pub fn v1(&self, tau: f64) -> StretchedDerivs {
        let sing = self.sing;
        let n = sing.taus.len();
        let i = (((tau - sing.taus[0]) / sing.h).floor().max(0.0) as usize).min(n - 2);
        let h = sing.h;
        let s = (tau - sing.taus[i]) / h;
        let qb = quintic_hermite_basis(s, h);
        let mut vals = [0.0; 6];
        let mut dts = [0.0; 6];
        for (slot, (q, node)) in [(0, i), (1, i), (2, i), (0, i + 1), (1, i + 1), (2, i + 1)].iter().enumerate() {
            let (v, vt) = self.nodal(*q, *node);
            vals[slot] = v;
            dts[slot] = vt;
        }
        let comb = |d: usize, data: &[f64; 6]| (0..6).map(|k| qb[d][k] * data[k]).sum::<f64>();
        let v = comb(0, &vals);
        let v_tau = comb(1, &vals);
        let v_tau2 = comb(2, &vals);
        let oc = &self.oc;
        let (v0, _) = oc.v0_all(tau);
        let (k, k_tau) = (v0[1], v0[2]);
        let shift = sing.kernel_shift;
        // the kernel shift satisfies L k = 0, so remove it before using the equation
        let (w, w_tau) = (v + shift * k, v_tau + shift * k_tau);
        let w_tau3 = (oc.source(tau) - self.multiplier * k_tau + (oc.rel_speed - oc.d.c0 * v0[0]) * w_tau
            - oc.d.c0 * v0[1] * w)
            / oc.dphi;
        let v_tau3 = w_tau3 - shift * v0[3];
        StretchedDerivs {
            g: v,
            tau: v_tau,
            tau2: v_tau2,
            tau3: v_tau3,
            t: comb(0, &dts),
            tau_t: comb(1, &dts),
            tau2_t: comb(2, &dts),
        }
    }

    /// `Phi1` at a grid node of the slice data interpolated in time.
    pub fn phi1_node(&self, i: usize) -> f64 {
        let s = &self.sing.slices;
        let w = (self.oc.t - self.sing.t_nodes[self.j]) / (self.sing.t_nodes[self.j + 1] - self.sing.t_nodes[self.j]);
        (1.0 - w) * s[self.j].phi1[i] + w * s[self.j + 1].phi1[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::solve_phase;
    use crate::regular::{solve_regular, RegularOptions};

    fn build(doc: &str) -> Singular {
        let s = Arc::new(Scenario::from_toml(doc).unwrap());
        let reg = Arc::new(solve_regular(&s, &RegularOptions::default()).unwrap());
        let curve = Arc::new(solve_phase(s.clone(), Arc::new(reg.u0.clone()), s.t_end).unwrap());
        Singular::build(s, reg, curve, &SingularOptions::default()).unwrap()
    }

    const CONSTANT: &str = "a0 = \"1\"\nb0 = \"1\"\nc0 = \"1\"\nphi0 = 0.0\ndphi0 = 2.0\nT = 1.0\nx_min = -8.0\nx_max = 10.0\nn_x = 64\nn_t = 16\ntau_max = 40\n";

    #[test]
    fn constant_coefficients_have_no_correction() {
        let sg = build(CONSTANT);
        for s in &sg.slices {
            assert_eq!(s.scalars.e1, 0.0);
            assert_eq!(s.scalars.orthogonality, 0.0);
            assert!(s.v.iter().all(|v| v.abs() < 1e-14));
            assert!((s.oc.amp - 3.0).abs() < 1e-14);
        }
        assert_eq!(sg.decay.class, DecayClass::Decaying);
        let view = sg.at(0.3).unwrap();
        assert!((view.v0(0.0).g - 3.0).abs() < 1e-14);
        assert!(view.v0(sg.tau_max).g.abs() < 1e-10);
    }
}

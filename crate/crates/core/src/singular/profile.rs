//! Closed-form soliton profile on the curve and the source of the first
//! correction equation.

use crate::jet::StretchedDerivs;
use crate::phase::{PhaseCurve, PhaseError, PointData};
use crate::regular::Regular;
use crate::scenario::Scenario;

/// `d^k/dy^k (1 - tanh(y)^2)` as a polynomial in `T = tanh(y)`,
/// coefficients in increasing powers of `T`.
const SECH2_DERIVS: [[f64; 8]; 6] = [
    [1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, -2.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0],
    [-2.0, 0.0, 8.0, 0.0, -6.0, 0.0, 0.0, 0.0],
    [0.0, 16.0, 0.0, -40.0, 0.0, 24.0, 0.0, 0.0],
    [16.0, 0.0, -136.0, 0.0, 240.0, 0.0, -120.0, 0.0],
    [0.0, -272.0, 0.0, 1232.0, 0.0, -1680.0, 0.0, 720.0],
];

/// `d^k/dy^k sech^2(y)` for `k = 0..=5`.
pub fn sech2_derivs(y: f64) -> [f64; 6] {
    let tt = y.tanh();
    let mut out = [0.0; 6];
    for (k, c) in SECH2_DERIVS.iter().enumerate() {
        let mut acc = 0.0;
        for &ci in c.iter().rev() {
            acc = acc * tt + ci;
        }
        out[k] = acc;
    }
    out
}

/// Everything the singular construction needs at one time on the curve.
#[derive(Debug, Clone, Copy)]
pub struct OnCurve {
    pub t: f64,
    pub phi: f64,
    pub dphi: f64,
    pub ddphi: f64,
    pub d: PointData,
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub u1: f64,
    /// `A = phi' a0 - b0 - c0 u0`.
    pub rel_speed: f64,
    /// `dA/dt` along the curve.
    pub rel_speed_dt: f64,
    pub amp: f64,
    pub amp_dt: f64,
    pub kappa: f64,
    pub kappa_dt: f64,
    pub center_offset: f64,
}

impl OnCurve {
    pub fn new(s: &Scenario, reg: &Regular, curve: &PhaseCurve, t: f64) -> Result<OnCurve, PhaseError> {
        let st = curve.eval(t)?;
        let (x, p, pp) = (st.phi, st.dphi, st.ddphi);
        let d = PointData::at(s, &reg.u0, x, t)?;
        let c = &s.coeffs;
        let rel_speed = d.relative_speed(p);
        let rel_speed_dt = pp * d.a0 + p * (d.a0x * p + d.a0t)
            - (d.b0x * p + d.b0t)
            - (d.c0x * p + d.c0t) * d.u0
            - d.c0 * (d.u0x * p + d.u0t);
        let c0_dt = d.c0x * p + d.c0t;
        let amp = 3.0 * rel_speed / d.c0;
        let amp_dt = 3.0 * (rel_speed_dt * d.c0 - rel_speed * c0_dt) / (d.c0 * d.c0);
        let kappa = 0.5 * (rel_speed / p).sqrt();
        let kappa_dt = 0.5 * kappa * (rel_speed_dt / rel_speed - pp / p);
        Ok(OnCurve {
            t,
            phi: x,
            dphi: p,
            ddphi: pp,
            d,
            a1: c.a1.value(x, t)?,
            b1: c.b1.value(x, t)?,
            c1: c.c1.value(x, t)?,
            u1: reg.u1.value(x, t)?,
            rel_speed,
            rel_speed_dt,
            amp,
            amp_dt,
            kappa,
            kappa_dt,
            center_offset: s.center_offset,
        })
    }

    /// `[v0, v0_tau, ..., d^5 v0/dtau^5]` and the `t`-derivatives of the
    /// first four.
    pub fn v0_all(&self, tau: f64) -> ([f64; 6], [f64; 4]) {
        let s = tau + self.center_offset;
        let dd = sech2_derivs(self.kappa * s);
        let mut v = [0.0; 6];
        let mut vt = [0.0; 4];
        let mut kk = 1.0;
        for k in 0..6 {
            v[k] = self.amp * kk * dd[k];
            if k < 4 {
                // d/dt (amp kappa^k D_k(kappa s)) = (amp kappa^k)' D_k + amp kappa^k D_{k+1} kappa' s
                let dk = self.amp_dt * kk
                    + if k > 0 { self.amp * k as f64 * kk / self.kappa * self.kappa_dt } else { 0.0 };
                vt[k] = dk * dd[k] + self.amp * kk * dd[k + 1] * self.kappa_dt * s;
            }
            kk *= self.kappa;
        }
        (v, vt)
    }

    pub fn v0(&self, tau: f64) -> StretchedDerivs {
        let (v, vt) = self.v0_all(tau);
        StretchedDerivs { g: v[0], tau: v[1], tau2: v[2], tau3: v[3], t: vt[0], tau_t: vt[1], tau2_t: vt[2] }
    }

    /// Kernel function of the correction operator, `v0_tau`, and its
    /// derivative.
    pub fn kernel(&self, tau: f64) -> (f64, f64) {
        let (v, _) = self.v0_all(tau);
        (v[1], v[2])
    }

    /// Source term of the first correction equation at `tau`.
    pub fn source(&self, tau: f64) -> f64 {
        let (v, vt) = self.v0_all(tau);
        let d = &self.d;
        let p = self.dphi;
        let stretch = d.c0x * d.u0 + d.c0 * d.u0x - p * d.a0x + d.b0x;
        let transport = d.c0 * self.u1 + self.c1 * d.u0 - p * self.a1 + self.b1;
        -d.a0 * vt[0] - d.c0 * d.u0x * v[0] - stretch * tau * v[1] - (d.c0x * tau + self.c1) * v[0] * v[1]
            - transport * v[1]
            + vt[2]
    }

    /// The potential `A - c0 v0` of the correction operator
    /// `L v = phi' v'' - (A - c0 v0) v`.
    pub fn potential(&self, tau: f64) -> f64 {
        let (v, _) = self.v0_all(tau);
        self.rel_speed - self.d.c0 * v[0]
    }

    /// Applies the correction operator to a function given by its value
    /// and second derivative.
    pub fn apply_operator(&self, tau: f64, w: f64, w_tautau: f64) -> f64 {
        self.dphi * w_tautau - self.potential(tau) * w
    }

    /// Reference step `eta = (1 - tanh(kappa tau)) / 2` with derivatives.
    pub fn eta(&self, tau: f64) -> StretchedDerivs {
        let k = self.kappa;
        let kt = self.kappa_dt;
        let dd = sech2_derivs(k * tau);
        // d^m/dtau^m eta = -kappa^m D_{m-1} / 2 for m >= 1
        StretchedDerivs {
            g: 0.5 * (1.0 - (k * tau).tanh()),
            tau: -0.5 * k * dd[0],
            tau2: -0.5 * k * k * dd[1],
            tau3: -0.5 * k * k * k * dd[2],
            t: -0.5 * dd[0] * kt * tau,
            tau_t: -0.5 * (kt * dd[0] + k * dd[1] * kt * tau),
            tau2_t: -0.5 * (2.0 * k * kt * dd[1] + k * k * dd[2] * kt * tau),
        }
    }

    /// Left limit of the integrated source predicted in closed form:
    /// `12 (a0 S' + S (a0x phi' - b0x - c0x u0 - c0x A / c0))` with
    /// `S = sqrt(A phi') / c0`. It equals `-int source dtau`.
    pub fn predicted_left_flux(&self) -> f64 {
        let d = &self.d;
        let (p, pp) = (self.dphi, self.ddphi);
        let a = self.rel_speed;
        let root = (a * p).sqrt();
        let s = root / d.c0;
        let c0_dt = d.c0x * p + d.c0t;
        let root_dt = (self.rel_speed_dt * p + a * pp) / (2.0 * root);
        let s_dt = (root_dt * d.c0 - root * c0_dt) / (d.c0 * d.c0);
        12.0 * (d.a0 * s_dt + s * (d.a0x * p - d.b0x - d.c0x * d.u0 - d.c0x * a / d.c0))
    }

    /// Pointwise defect of `phi'/2 v0_tau^2 = A/2 v0^2 - c0/6 v0^3`.
    pub fn energy_defect(&self, tau: f64) -> f64 {
        let (v, _) = self.v0_all(tau);
        0.5 * self.dphi * v[1] * v[1] - 0.5 * self.rel_speed * v[0] * v[0] + self.d.c0 / 6.0 * v[0].powi(3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sech2_derivative_table() {
        let y: f64 = 0.37;
        let h = 1e-4;
        let d = sech2_derivs(y);
        let dp = sech2_derivs(y + h);
        let dm = sech2_derivs(y - h);
        assert!((d[0] - 1.0 / y.cosh().powi(2)).abs() < 1e-15);
        for k in 0..5 {
            let fd = (dp[k] - dm[k]) / (2.0 * h);
            assert!((fd - d[k + 1]).abs() < 1e-5 * (1.0 + d[k + 1].abs()), "k={k}");
        }
    }
}

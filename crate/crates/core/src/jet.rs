//! Values of a field of `(x, t)` together with the partial derivatives the
//! residual needs: `[f, f_x, f_xx, f_t, f_xt, f_xxt]`.

use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub x: f64,
    pub xx: f64,
    pub t: f64,
    pub xt: f64,
    pub xxt: f64,
}

impl Jet {
    pub const ZERO: Jet = Jet { v: 0.0, x: 0.0, xx: 0.0, t: 0.0, xt: 0.0, xxt: 0.0 };

    pub fn from_array(a: [f64; 6]) -> Jet {
        Jet { v: a[0], x: a[1], xx: a[2], t: a[3], xt: a[4], xxt: a[5] }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.v, self.x, self.xx, self.t, self.xt, self.xxt]
    }

    pub fn constant(v: f64) -> Jet {
        Jet { v, ..Jet::ZERO }
    }

    pub fn scale(self, s: f64) -> Jet {
        Jet {
            v: s * self.v,
            x: s * self.x,
            xx: s * self.xx,
            t: s * self.t,
            xt: s * self.xt,
            xxt: s * self.xxt,
        }
    }

    /// Converts derivatives of `G(t, tau)` with `tau = (x - phi(t)) / eps`
    /// into `(x, t)` derivatives. `g` holds `[G, G_tau, G_tautau,
    /// G_tautautau, G_t, G_taut, G_tautaut]`.
    pub fn from_stretched(g: &StretchedDerivs, dphi: f64, eps: f64) -> Jet {
        let ie = 1.0 / eps;
        Jet {
            v: g.g,
            x: g.tau * ie,
            xx: g.tau2 * ie * ie,
            t: g.t - dphi * ie * g.tau,
            xt: (g.tau_t - dphi * ie * g.tau2) * ie,
            xxt: (g.tau2_t - dphi * ie * g.tau3) * ie * ie,
        }
    }
}

/// Partial derivatives of a function of `(t, tau)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StretchedDerivs {
    pub g: f64,
    pub tau: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub t: f64,
    pub tau_t: f64,
    pub tau2_t: f64,
}

impl StretchedDerivs {
    pub fn scale(self, s: f64) -> Self {
        StretchedDerivs {
            g: s * self.g,
            tau: s * self.tau,
            tau2: s * self.tau2,
            tau3: s * self.tau3,
            t: s * self.t,
            tau_t: s * self.tau_t,
            tau2_t: s * self.tau2_t,
        }
    }
}

impl Add for StretchedDerivs {
    type Output = StretchedDerivs;
    fn add(self, o: StretchedDerivs) -> StretchedDerivs {
        StretchedDerivs {
            g: self.g + o.g,
            tau: self.tau + o.tau,
            tau2: self.tau2 + o.tau2,
            tau3: self.tau3 + o.tau3,
            t: self.t + o.t,
            tau_t: self.tau_t + o.tau_t,
            tau2_t: self.tau2_t + o.tau2_t,
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            x: self.x + o.x,
            xx: self.xx + o.xx,
            t: self.t + o.t,
            xt: self.xt + o.xt,
            xxt: self.xxt + o.xxt,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + o.scale(-1.0)
    }
}

/// Product rule.
impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let (f, g) = (self, o);
        Jet {
            v: f.v * g.v,
            x: f.x * g.v + f.v * g.x,
            xx: f.xx * g.v + 2.0 * f.x * g.x + f.v * g.xx,
            t: f.t * g.v + f.v * g.t,
            xt: f.xt * g.v + f.x * g.t + f.t * g.x + f.v * g.xt,
            xxt: f.xxt * g.v
                + f.xx * g.t
                + 2.0 * (f.xt * g.x + f.x * g.xt)
                + f.t * g.xx
                + f.v * g.xxt,
        }
    }
}

//! Shared scenario documents and builders for the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use bbm_soliton::phase::{solve_phase, PhaseCurve};
use bbm_soliton::regular::{solve_regular, Regular, RegularOptions};
use bbm_soliton::scenario::Scenario;
use bbm_soliton::singular::{Singular, SingularOptions};

pub const CONSTANT: &str = r#"
a0 = "1"
b0 = "1"
c0 = "1"
u0_init = "0"
phi0 = 0.0
dphi0 = 2.0
T = 1.0
x_min = -8.0
x_max = 10.0
n_x = 128
n_t = 32
tau_max = 40
"#;

pub const BENCHMARK: &str = r#"
a0 = "1"
b0 = "1"
c0 = "1 + 0.1*sin(0.2*x)"
u0_init = "0"
phi0 = 0.0
dphi0 = 2.0
T = 1.0
x_min = -8.0
x_max = 10.0
n_x = 256
n_t = 64
tau_max = 40
"#;

/// Background speed growing in space: the curve decelerates relative to
/// the background and the correction keeps a plateau.
pub const GRADED_SPEED: &str = r#"
a0 = "1"
b0 = "1 + 0.3*x"
c0 = "1"
u0_init = "0"
phi0 = 0.0
dphi0 = 2.0
T = 1.0
x_min = -2.0
x_max = 4.0
n_x = 128
n_t = 64
tau_max = 40
"#;

pub fn scenario(doc: &str) -> Arc<Scenario> {
    Arc::new(Scenario::from_toml(doc).expect("valid scenario"))
}

pub struct Pieces {
    pub scenario: Arc<Scenario>,
    pub regular: Arc<Regular>,
    pub curve: Arc<PhaseCurve>,
}

pub fn pieces(doc: &str) -> Pieces {
    let s = scenario(doc);
    let regular = Arc::new(solve_regular(&s, &RegularOptions::default()).expect("regular part"));
    let curve = Arc::new(solve_phase(s.clone(), Arc::new(regular.u0.clone()), s.t_end).expect("phase curve"));
    Pieces { scenario: s, regular, curve }
}

pub fn singular(p: &Pieces, opts: &SingularOptions) -> Singular {
    Singular::build(p.scenario.clone(), p.regular.clone(), p.curve.clone(), opts).expect("singular part")
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Trapezoidal rule with `n` intervals; spectrally accurate for the
/// rapidly decaying analytic integrands used here.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + i as f64 * h);
    }
    s * h
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

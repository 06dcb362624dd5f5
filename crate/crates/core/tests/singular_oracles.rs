//! Independent checks of the soliton core, the first-correction source and
//! its integrals, the phase-equation coefficients, and the correction solve.

mod common;

use bbm_soliton::exprdsl::{parse, Expr, Var};
use bbm_soliton::phase::phase_coeffs;
use bbm_soliton::singular::{orthogonality_residual, DecayClass, OnCurve, Singular, SingularOptions};

use common::*;

/// The soliton core written as a symbolic expression in `(tau, t)` (the
/// expression variable `x` plays the role of `tau`), for `a0 = b0 = 1`,
/// `u0 = 0` and `c0 = c0(phi)`, along the curve `phi = p t + q t^2 / 2`.
/// Exact at `t = 0` for the value, `phi'` and `phi''`.
struct SymbolicCore {
    v0: Expr,
    source: Expr,
}

impl SymbolicCore {
    /// `c0` and `c0_x` are templates in the placeholder `X`.
    fn new(c0: &str, c0_x: &str, p: f64, q: f64) -> SymbolicCore {
        let phi = format!("(({p:?})*t + ({:?})*t^2)", 0.5 * q);
        let dphi = format!("(({p:?}) + ({q:?})*t)");
        let c0 = format!("({})", c0.replace('X', &phi));
        let c0_x = format!("({})", c0_x.replace('X', &phi));
        let a = format!("({dphi} - 1)");
        let v0_src = format!("3*{a}/{c0} * sech(0.5*sqrt({a}/{dphi})*x)^2");
        let v0 = parse(&v0_src).unwrap();
        let v0_x = v0.diff(Var::X);
        let v0_t = v0.diff(Var::T);
        let v0_xxt = v0_x.diff(Var::X).diff(Var::T);
        // -a0 v0_t - (c0_x tau + c1) v0 v0_tau + v0_tautau_t; every other
        // group of the source vanishes for these coefficients
        let c0_x = parse(&c0_x).unwrap();
        let tau = Expr::Var(Var::X);
        let nonlinear = Expr::bin(
            bbm_soliton::exprdsl::BinOp::Mul,
            Expr::bin(bbm_soliton::exprdsl::BinOp::Mul, c0_x, tau),
            Expr::bin(bbm_soliton::exprdsl::BinOp::Mul, v0.clone(), v0_x),
        );
        let source = Expr::bin(
            bbm_soliton::exprdsl::BinOp::Sub,
            Expr::bin(bbm_soliton::exprdsl::BinOp::Sub, Expr::neg(v0_t), nonlinear),
            Expr::neg(v0_xxt),
        )
        .fold();
        SymbolicCore { v0, source }
    }

    fn source_at(&self, tau: f64) -> f64 {
        self.source.eval(tau, 0.0).unwrap()
    }

    fn v0_at(&self, tau: f64) -> f64 {
        self.v0.eval(tau, 0.0).unwrap()
    }
}

#[test]
fn source_matches_symbolic_assembly_on_the_benchmark() {
    let p = pieces(BENCHMARK);
    let oc = OnCurve::new(&p.scenario, &p.regular, &p.curve, 0.0).unwrap();
    let sym = SymbolicCore::new("1 + 0.1*sin(0.2*X)", "0.02*cos(0.2*X)", oc.dphi, oc.ddphi);
    for tau in [1.0, -0.7, 2.5] {
        let lib = oc.source(tau);
        let oracle = sym.source_at(tau);
        assert!((lib - oracle).abs() <= 1e-10 * oracle.abs(), "tau {tau}: {lib} vs {oracle}");
        assert!((oc.v0(tau).g - sym.v0_at(tau)).abs() <= 1e-13);
    }
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, piv);
        b.swap(k, piv);
        let (top, rest) = a.split_at_mut(k + 1);
        let pivot = &top[k];
        for (i, row) in rest.iter_mut().enumerate() {
            let f = row[k] / pivot[k];
            for (r, p) in row[k..].iter_mut().zip(&pivot[k..]) {
                *r -= f * p;
            }
            b[k + 1 + i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// The phase coefficients follow from requiring the source to be orthogonal
/// to the core. For `c0 = 1 + 0.1 x` the orthogonality integral is linear in
/// `phi''`; solving it at four speeds and dividing out the leading bracket
/// recovers the four forcing coefficients independently.
#[test]
fn phase_coefficients_match_orthogonality_quadrature() {
    let doc = BENCHMARK.replace("1 + 0.1*sin(0.2*x)", "1 + 0.1*x");
    let p = pieces(&doc);
    let lib = phase_coeffs(&p.scenario, &p.regular.u0, 0.0, 0.0).unwrap();
    // a0 = c0 = alpha = 1 at the origin: 24 a0^2 c0, -8 a0 c0 alpha, -c0 alpha^2
    assert_eq!(lib.bracket, [24.0, -8.0, -1.0]);

    let speeds = [1.5, 2.0, 3.0, 4.0];
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for &v in &speeds {
        let integral = |q: f64| {
            let sym = SymbolicCore::new("1 + 0.1*X", "0.1", v, q);
            let kappa = 0.5 * ((v - 1.0) / v).sqrt();
            let l = 60.0 / kappa;
            trapezoid(|tau| sym.source_at(tau) * sym.v0_at(tau), -l, l, (2.0 * l / 0.02) as usize)
        };
        let (i0, i1) = (integral(0.0), integral(1.0));
        let q_star = -i0 / (i1 - i0);
        let bracket = (24.0 * v - 8.0) * v - 1.0;
        rows.push(vec![v.powi(4), v.powi(3), v.powi(2), v]);
        rhs.push(-q_star * bracket);
        // the solved curve's acceleration at this speed
        assert!((q_star + lib.forcing_at(v) / lib.bracket_at(v)).abs() < 1e-11, "speed {v}");
    }
    let recovered = solve_dense(rows, rhs);
    let scale = max_abs(lib.forcing);
    for (k, (r, l)) in recovered.iter().zip(&lib.forcing).enumerate() {
        assert!((r - l).abs() <= 1e-12 * scale, "forcing[{k}]: oracle {r}, library {l}");
    }
}

#[test]
fn core_identities_hold_on_every_slice() {
    let p = pieces(BENCHMARK);
    let sg = singular(&p, &SingularOptions::default());
    for s in &sg.slices {
        let oc = &s.oc;
        let mut kernel_defect: f64 = 0.0;
        let mut kernel_norm: f64 = 0.0;
        for &tau in &sg.taus {
            let (v, _) = oc.v0_all(tau);
            kernel_defect = kernel_defect.max((oc.dphi * v[3] - oc.potential(tau) * v[1]).abs());
            kernel_norm = kernel_norm.max(v[1].abs());
            assert!(oc.energy_defect(tau).abs() <= 1e-10, "energy identity at t {} tau {tau}", oc.t);
        }
        assert!(kernel_defect <= 1e-8 * kernel_norm, "kernel identity at t {}", oc.t);
        // core evenness and the tail bound
        for d in [0.5, 3.0, 11.0] {
            assert!((oc.v0(d).g - oc.v0(-d).g).abs() <= 1e-12 * oc.amp.abs());
        }
        let l = 60.0 / oc.kappa;
        assert!(oc.v0(l).g.abs() <= 1e-12 && oc.v0(-l).g.abs() <= 1e-12);
        assert!(oc.source(l).abs() <= 1e-10 && oc.source(-l).abs() <= 1e-10);
    }
}

#[test]
fn plateau_values_match_simpson_quadrature() {
    let p = pieces(BENCHMARK);
    let sg = singular(&p, &SingularOptions::default());
    let tm = sg.tau_max;
    for s in &sg.slices {
        let total = simpson(|tau| s.oc.source(tau), -tm, tm, 16_000);
        let nu1 = total / s.oc.rel_speed;
        assert!((s.scalars.nu1 - nu1).abs() <= 1e-8, "t {}: {} vs {nu1}", s.oc.t, s.scalars.nu1);
        // right limit of the integrated source vanishes once e1 is fixed
        assert!((s.scalars.e1 + total).abs() <= 1e-9);
        assert!(s.phi1.last().unwrap().abs() <= 1e-9);
    }
}

#[test]
fn orthogonality_holds_on_the_solved_curve_and_fails_on_a_wrong_one() {
    let p = pieces(BENCHMARK);
    let sg = singular(&p, &SingularOptions::default());
    assert_eq!(sg.slices.len(), 65);
    let worst = max_abs(sg.scalars().iter().map(|s| s.orthogonality));
    assert!(worst <= 1e-6, "{worst}");

    let wrong = std::sync::Arc::new(p.curve.perturbed(1.05));
    let taus = &sg.taus;
    let worst_wrong = max_abs(sg.t_nodes.iter().map(|&t| {
        let oc = OnCurve::new(&p.scenario, &p.regular, &wrong, t).unwrap();
        orthogonality_residual(&oc, taus)
    }));
    assert!(worst_wrong > 1e-3, "{worst_wrong}");
}

#[test]
fn correction_is_insensitive_to_the_cutoff() {
    let p = pieces(BENCHMARK);
    let short = singular(&p, &SingularOptions { tau_max: Some(40.0), ..Default::default() });
    let long = singular(&p, &SingularOptions { tau_max: Some(80.0), ..Default::default() });
    let offset = ((long.tau_max - short.tau_max) / short.h).round() as usize;
    let mut worst: f64 = 0.0;
    for (a, b) in short.slices.iter().zip(&long.slices) {
        assert_eq!(a.oc.t, b.oc.t);
        for (i, v) in a.v.iter().enumerate() {
            worst = worst.max((v - b.v[i + offset]).abs());
        }
    }
    assert!(worst <= 1e-7, "{worst}");
}

fn check_correction_invariants(sg: &Singular) {
    let h = sg.h;
    for s in &sg.slices {
        let oc = &s.oc;
        let n = s.v.len();
        let nu = s.scalars.nu1;
        assert!((s.v[0] - nu).abs() <= 1e-6 * (1.0 + nu.abs()), "left limit at t {}", oc.t);
        assert!(s.v[n - 1].abs() <= 1e-6, "right limit at t {}", oc.t);
        // compact fourth-order residual of L v = Phi1 - lambda v0_tau, with
        // v'' at the nodes taken from the equation
        let lam = s.scalars.multiplier;
        let f: Vec<f64> = (0..n)
            .map(|i| {
                let tau = sg.taus[i];
                (s.phi1[i] - lam * oc.kernel(tau).0 + oc.potential(tau) * s.v[i]) / oc.dphi
            })
            .collect();
        let phi_max = max_abs(s.phi1.iter().copied());
        let mut worst: f64 = 0.0;
        for i in 1..n - 1 {
            let d2 = (s.v[i + 1] - 2.0 * s.v[i] + s.v[i - 1]) / (h * h);
            worst = worst.max(oc.dphi * (d2 - (f[i + 1] + 10.0 * f[i] + f[i - 1]) / 12.0).abs());
        }
        assert!(worst <= 1e-6 * phi_max.max(1e-300), "t {}: {worst} vs {phi_max}", oc.t);
        // v1 - nu1 eta decays at both ends
        let ends = [0, n - 1];
        for &i in &ends {
            assert!((s.v[i] - nu * oc.eta(sg.taus[i]).g).abs() <= 1e-6);
        }
    }
}

#[test]
fn correction_meets_its_boundary_and_decay_conditions() {
    let p = pieces(BENCHMARK);
    let sg = singular(&p, &SingularOptions::default());
    check_correction_invariants(&sg);
    assert_eq!(sg.decay.class, DecayClass::Plateau);
    assert!(sg.decay.mismatches.is_empty(), "{:?}", sg.decay.mismatches);
    assert!(sg.decay.max_gap <= 1e-9, "{}", sg.decay.max_gap);
}

#[test]
fn graded_background_speed_gives_a_plateau() {
    let p = pieces(GRADED_SPEED);
    let sg = singular(&p, &SingularOptions::default());
    assert_eq!(sg.decay.class, DecayClass::Plateau);
    assert!(sg.decay.mismatches.is_empty());
    let nu_min = sg.scalars().iter().map(|s| s.nu1.abs()).fold(f64::INFINITY, f64::min);
    assert!(nu_min > 1e-3, "{nu_min}");
    // the plateau equals the integrated source over the relative speed
    for s in sg.slices.iter().step_by(8) {
        let total = simpson(|tau| s.oc.source(tau), -sg.tau_max, sg.tau_max, 16_000);
        assert!((s.scalars.nu1 - total / s.oc.rel_speed).abs() <= 1e-8);
    }
    check_correction_invariants(&sg);
}

//! Acceptance suite: runs every acceptance criterion, prints one line per
//! criterion with its outcome and wall time, and exits non-zero if any
//! criterion fails. Built without the libtest harness.

mod common;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use bbm_soliton::assemble::{build_solution, BuildOptions};
use bbm_soliton::numerics::linspace;
use bbm_soliton::regular::{solve_regular, RegularOptions};
use bbm_soliton::scenario::Scenario;
use bbm_soliton::singular::bordered::BorderedProblem;
use bbm_soliton::singular::{orthogonality_residual, DecayClass, OnCurve, SingularOptions};
use bbm_soliton::verify::direct::{direct_solve, DirectOptions};
use bbm_soliton::verify::{compare, order_sweep, residual_grid, SamplingOptions};

use common::*;

type Outcome = Result<String, String>;

/// Name, time limit and check of one criterion.
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Constant coefficients at zeroth order: the assembled solution is the
/// exact travelling wave `3(a-1) sech^2(sqrt((a-1)/a) (x - a t) / (2 eps))`
/// with `a = 2`, so the residual vanishes to rounding.
fn constant_exactness() -> Outcome {
    let sol = build_solution(scenario(CONSTANT), &BuildOptions { order: 0, ..Default::default() }).map_err(|e| e.to_string())?;
    let a: f64 = 2.0;
    let mut worst_res: f64 = 0.0;
    let mut worst_profile: f64 = 0.0;
    for eps in [0.1, 0.05, 0.025, 0.0125] {
        let pts = residual_grid(&sol, eps, &SamplingOptions::default()).map_err(|e| e.to_string())?;
        for p in &pts {
            worst_res = worst_res.max(p.residual.abs());
            let exact = 3.0 * (a - 1.0) / (0.5 * ((a - 1.0) / a).sqrt() * (p.x - a * p.t) / eps).cosh().powi(2);
            worst_profile = worst_profile.max((p.value - exact).abs());
        }
    }
    check(worst_res <= 1e-7 && worst_profile <= 1e-10, format!("max residual {worst_res:.2e}, profile error {worst_profile:.2e}"))
}

/// Constant coefficients give a straight curve `phi(0) + phi'(0) t`.
fn linear_phase() -> Outcome {
    let p = pieces(CONSTANT);
    let mut worst: f64 = 0.0;
    for t in linspace(0.0, 1.0, 1001) {
        let phi = p.curve.eval(t).map_err(|e| e.to_string())?.phi;
        worst = worst.max((phi - 2.0 * t).abs());
    }
    check(worst <= 1e-8, format!("max deviation {worst:.2e}"))
}

/// The solvability integral vanishes along the solved curve and not along
/// one with a 5% faster start.
fn orthogonality() -> Outcome {
    let p = pieces(BENCHMARK);
    let sg = singular(&p, &SingularOptions::default());
    let solved = max_abs(sg.scalars().iter().map(|s| s.orthogonality));
    let wrong = Arc::new(p.curve.perturbed(1.05));
    let mut perturbed: f64 = 0.0;
    for &t in &sg.t_nodes {
        let oc = OnCurve::new(&p.scenario, &p.regular, &wrong, t).map_err(|e| e.to_string())?;
        perturbed = perturbed.max(orthogonality_residual(&oc, &sg.taus).abs());
    }
    check(
        sg.slices.len() == 65 && solved <= 1e-6 && perturbed > 1e-3,
        format!("{} slices, solved {solved:.2e}, perturbed {perturbed:.2e}", sg.slices.len()),
    )
}

/// Recovers `w = sech^2(k tau) tanh(k tau)` from `Phi = L w` with the
/// operator of the unit soliton (`phi' = 2`, potential `1 - 3 sech^2`).
fn manufactured_error(h: f64, k: f64) -> Result<f64, String> {
    let kappa = 0.5 * 0.5f64.sqrt();
    let tau_max = 40.0;
    let n = (2.0 * tau_max / h).round() as usize + 1;
    let taus: Vec<f64> = (0..n).map(|i| -tau_max + i as f64 * h).collect();
    let sech2 = |y: f64| 1.0 / y.cosh().powi(2);
    let w = |tau: f64| sech2(k * tau) * (k * tau).tanh();
    // (T - T^3)'' = k^2 (-8T + 20T^3 - 12T^5) with T = tanh(k tau)
    let w2 = |tau: f64| {
        let t = (k * tau).tanh();
        k * k * (-8.0 * t + 20.0 * t.powi(3) - 12.0 * t.powi(5))
    };
    let pot: Vec<f64> = taus.iter().map(|&t| 1.0 - 3.0 * sech2(kappa * t)).collect();
    let ker: Vec<f64> = taus.iter().map(|&t| -6.0 * kappa * sech2(kappa * t) * (kappa * t).tanh()).collect();
    let rhs: Vec<f64> = taus.iter().zip(&pot).map(|(&t, p)| 2.0 * w2(t) - p * w(t)).collect();
    let exact: Vec<f64> = taus.iter().map(|&t| w(t)).collect();
    let mut prob = BorderedProblem {
        tau0: -tau_max,
        h,
        dphi: 2.0,
        potential: &pot,
        rhs: &rhs,
        kernel: &ker,
        left: exact[0],
        right: exact[n - 1],
        constraint: 0.0,
    };
    prob.constraint = prob.kernel_product(&exact);
    let sol = prob.solve().map_err(|e| e.to_string())?;
    Ok(sol.v.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn bordered_solver() -> Outcome {
    let kappa = 0.5 * 0.5f64.sqrt();
    let mut parts = Vec::new();
    let mut ok = true;
    // the kernel itself, and a profile outside the kernel
    for k in [kappa, 1.3 * kappa] {
        let coarse = manufactured_error(0.1, k)?;
        let fine = manufactured_error(0.05, k)?;
        let slope = (coarse / fine).log2();
        ok &= fine <= 1e-6 && slope >= 1.7;
        parts.push(format!("k={k:.3}: error {fine:.2e} at h=0.05, slope {slope:.2}"));
    }
    check(ok, parts.join("; "))
}

fn accuracy_orders() -> Outcome {
    let sol = build_solution(scenario(BENCHMARK), &BuildOptions::default()).map_err(|e| e.to_string())?;
    let rep = order_sweep(&sol, &[0.1, 0.05, 0.025, 0.0125], &SamplingOptions::default()).map_err(|e| e.to_string())?;
    let (near, far) = (rep.near_slope.unwrap_or(f64::NAN), rep.far_slope.unwrap_or(f64::NAN));
    check(far >= 1.7 && near >= 0.7, format!("near slope {near:.3}, far slope {far:.3}"))
}

/// Least-squares speed of the tracked peak.
fn fitted_speed(times: &[f64], peaks: &[(f64, f64)]) -> f64 {
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let mx = peaks.iter().map(|p| p.0).sum::<f64>() / n;
    let sxy: f64 = times.iter().zip(peaks).map(|(t, p)| (t - mt) * (p.0 - mx)).sum();
    let sxx: f64 = times.iter().map(|t| (t - mt) * (t - mt)).sum();
    sxy / sxx
}

fn direct_cross_check() -> Outcome {
    let eps = 0.1;
    let s = scenario(CONSTANT);
    let sol = build_solution(s.clone(), &BuildOptions { order: 0, ..Default::default() }).map_err(|e| e.to_string())?;
    let kappa = 0.5 * 0.5f64.sqrt();
    let at0 = sol.at(0.0).map_err(|e| e.to_string())?;
    let init = |x: f64| at0.eval(x, eps).map(|y| y.jet.v).unwrap_or(f64::NAN);
    let d = direct_solve(&s, eps, &init, 0.5, &DirectOptions::resolving(eps, kappa, 128.0)).map_err(|e| e.to_string())?;
    let amp_drift = d.peaks.iter().map(|p| (p.1 / 3.0 - 1.0).abs()).fold(0.0, f64::max);
    let speed = fitted_speed(&d.times, &d.peaks);
    let sup = compare(&sol, &d).map_err(|e| e.to_string())?.sup;
    let mass = d.mass_drift();
    check(
        amp_drift <= 0.01 && (speed / 2.0 - 1.0).abs() <= 0.02 && sup <= 1e-3 && mass <= 5e-3,
        format!("amplitude drift {amp_drift:.2e}, speed {speed:.5}, sup {sup:.2e}, mass drift {mass:.1e}"),
    )
}

fn invariants() -> Outcome {
    let p = pieces(BENCHMARK);
    let sg = singular(&p, &SingularOptions::default());
    let (mut kernel, mut energy, mut limit): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for s in &sg.slices {
        let oc = &s.oc;
        let (mut defect, mut norm): (f64, f64) = (0.0, 0.0);
        for &tau in &sg.taus {
            let (v, _) = oc.v0_all(tau);
            defect = defect.max((oc.dphi * v[3] - oc.potential(tau) * v[1]).abs());
            norm = norm.max(v[1].abs());
            energy = energy.max(oc.energy_defect(tau).abs());
        }
        kernel = kernel.max(defect / norm);
        let total = simpson(|tau| oc.source(tau), -sg.tau_max, sg.tau_max, 16_000);
        limit = limit.max((s.scalars.e1 + total).abs()).max(s.phi1.last().unwrap().abs());
    }

    let doc = "a0 = \"1\"\nb0 = \"1\"\nc0 = \"1\"\nu0_init = \"0.3*sin(x)\"\nphi0 = 0.0\ndphi0 = 2.0\nT = 1.0\nx_min = -3.0\nx_max = 3.0\nn_x = 481\nn_t = 161\n";
    let s = Scenario::from_toml(doc).map_err(|e| e.to_string())?;
    let constancy = solve_regular(&s, &RegularOptions::default()).map_err(|e| e.to_string())?.conservation_defect();

    let constant = singular(&pieces(CONSTANT), &SingularOptions::default());
    let consistent = [&sg, &constant].iter().all(|g| {
        let any_plateau = g.scalars().iter().any(|s| s.plateau);
        g.decay.mismatches.is_empty() && g.decay.max_gap <= 1e-9 && (g.decay.class == DecayClass::Plateau) == any_plateau
    }) && sg.decay.class == DecayClass::Plateau
        && constant.decay.class == DecayClass::Decaying;

    check(
        kernel <= 1e-8 && energy <= 1e-10 && limit <= 1e-9 && constancy <= 1e-8 && consistent,
        format!(
            "kernel {kernel:.1e}, energy {energy:.1e}, right limit {limit:.1e}, characteristic defect {constancy:.1e}, classifier consistent {consistent}"
        ),
    )
}

fn exit_code(name: &str, extra: &[&str], out: &Path) -> (Option<i32>, serde_json::Value) {
    let sc = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"));
    let status = Command::new(env!("CARGO_BIN_EXE_bbm-soliton"))
        .args(["build", "--scenario", sc.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(extra)
        .output()
        .map(|o| o.status.code())
        .unwrap_or(None);
    let manifest = std::fs::read_to_string(out.join("manifest.json"))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or(serde_json::Value::Null);
    (status, manifest)
}

fn failure_taxonomy() -> Outcome {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    let (breaking, m) = exit_code("breaking", &[], dirs[0].path());
    let t_break = m["t_break"].as_f64().unwrap_or(f64::NAN);
    let (inadmissible, _) = exit_code("inadmissible", &[], dirs[1].path());
    let (form, _) = exit_code("benchmark", &["--form", "theorem1"], dirs[2].path());
    check(
        breaking == Some(3) && (t_break - 1.0).abs() <= 0.02 && inadmissible == Some(4) && form == Some(2),
        format!("breaking exit {breaking:?} at t_break {t_break:.6}, inadmissible exit {inadmissible:?}, theorem1 exit {form:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("constant-coefficient exactness", Duration::from_secs(10), constant_exactness),
        ("phase reduction", Duration::from_secs(1), linear_phase),
        ("orthogonality cross-validation", Duration::from_secs(60), orthogonality),
        ("correction solver oracle", Duration::from_secs(10), bordered_solver),
        ("accuracy orders", Duration::from_secs(300), accuracy_orders),
        ("direct-solver cross-check", Duration::from_secs(120), direct_cross_check),
        ("invariant suite", Duration::from_secs(30), invariants),
        ("failure taxonomy", Duration::from_secs(60), failure_taxonomy),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) => (elapsed <= *limit, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {} ({detail}) [{:.2} s, limit {} s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

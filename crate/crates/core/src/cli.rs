//! Command-line driver: builds, verifies and cross-checks asymptotic
//! solutions from scenario files, writes artifacts into a fixed directory
//! layout and maps every failure to a documented exit code.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | unreadable or invalid input, I/O failure |
//! | 2 | requested form not available (e.g. `theorem1` under a plateau) |
//! | 3 | gradient catastrophe of the regular part before the horizon |
//! | 4 | inadmissible starting data for the curve |
//! | 5 | residual orders below their thresholds |
//! | 6 | direct solver time step above the stability bound |
//! | 7 | other numerical failure (solvability, linear solve, quadrature) |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::assemble::{build_solution, AssembleError, AsymptoticSolution, BuildOptions};
use crate::output::{self, CompareExtra, RunManifest};
use crate::phase::PhaseError;
use crate::regular::RegularError;
use crate::scenario::{Form, Scenario};
use crate::singular::OnCurve;
use crate::verify::{
    compare, compare_table, direct_solve, order_sweep, residual_grid, Boundary, DirectError, DirectOptions,
    ResidualReport, SamplingOptions, VerifyError,
};

#[derive(Debug, Parser)]
#[command(name = "bbm-soliton", version, about = "Asymptotic soliton-like solutions of the variable-coefficient BBM equation")]
pub struct Cli {
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the asymptotic solution and write its artifacts.
    Build(BuildArgs),
    /// Residual order sweep over eps.
    Verify(VerifyArgs),
    /// Compare with a direct finite-difference integration.
    Direct(DirectArgs),
    /// Print a summary of the artifacts in an output directory.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormArg {
    Theorem1,
    Theorem2,
    Auto,
}

impl From<FormArg> for Form {
    fn from(f: FormArg) -> Form {
        match f {
            FormArg::Theorem1 => Form::Theorem1,
            FormArg::Theorem2 => Form::Theorem2,
            FormArg::Auto => Form::Auto,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub order: u8,
    /// Overrides the scenario's form.
    #[arg(long, value_enum)]
    pub form: Option<FormArg>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the scenario's eps list.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Debug: inflate the curve displacement by this factor.
    #[arg(long, default_value_t = 1.0, hide = true)]
    pub phase_scale: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    /// Boundary values follow the asymptotic solution.
    Asymptotic,
    Periodic,
}

#[derive(Debug, Clone, Args)]
pub struct DirectArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.5)]
    pub t_run: f64,
    /// Fixed time step; chosen from the stability bound when absent.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Grid points across the soliton width.
    #[arg(long, default_value_t = 128.0)]
    pub points: f64,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Asymptotic)]
    pub boundary: BoundaryArg,
    /// Diagnostic: start from zero and compare with the regular part only.
    #[arg(long)]
    pub zero_init: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Failure classes and their exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Input,
    FormUnavailable,
    GradientCatastrophe,
    InadmissibleStart,
    SlopeFailure,
    Cfl,
    Numerical,
}

impl Failure {
    pub fn code(self) -> i32 {
        match self {
            Failure::Input => 1,
            Failure::FormUnavailable => 2,
            Failure::GradientCatastrophe => 3,
            Failure::InadmissibleStart => 4,
            Failure::SlopeFailure => 5,
            Failure::Cfl => 6,
            Failure::Numerical => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Failure::Input => "input",
            Failure::FormUnavailable => "form_unavailable",
            Failure::GradientCatastrophe => "gradient_catastrophe",
            Failure::InadmissibleStart => "inadmissible_start",
            Failure::SlopeFailure => "slope_failure",
            Failure::Cfl => "cfl_violation",
            Failure::Numerical => "numerical",
        }
    }
}

fn classify_regular(e: &RegularError) -> (Failure, Option<f64>) {
    match e {
        RegularError::GradientCatastrophe { t_break } => (Failure::GradientCatastrophe, Some(*t_break)),
        RegularError::Expr(_) => (Failure::Input, None),
        _ => (Failure::Numerical, None),
    }
}

fn classify_phase(e: &PhaseError) -> (Failure, Option<f64>) {
    match e {
        PhaseError::InadmissibleStart { .. } => (Failure::InadmissibleStart, None),
        PhaseError::Regular(r) => classify_regular(r),
        PhaseError::Expr(_) => (Failure::Input, None),
        _ => (Failure::Numerical, None),
    }
}

fn classify_assemble(e: &AssembleError) -> (Failure, Option<f64>) {
    match e {
        AssembleError::FormUnavailable { .. } => (Failure::FormUnavailable, None),
        AssembleError::UnsupportedOrder(_) => (Failure::Input, None),
        AssembleError::Regular(r) => classify_regular(r),
        AssembleError::Phase(p) => classify_phase(p),
        AssembleError::Singular(crate::singular::SingularError::Phase(p)) => classify_phase(p),
        AssembleError::Singular(_) => (Failure::Numerical, None),
    }
}

/// Failure class of an error and the breaking time when it is a gradient
/// catastrophe.
pub fn classify(err: &anyhow::Error) -> (Failure, Option<f64>) {
    if let Some(e) = err.downcast_ref::<AssembleError>() {
        return classify_assemble(e);
    }
    if let Some(e) = err.downcast_ref::<VerifyError>() {
        return match e {
            VerifyError::Assemble(a) => classify_assemble(a),
            VerifyError::TooFewEps { .. } => (Failure::Input, None),
            _ => (Failure::Numerical, None),
        };
    }
    if let Some(e) = err.downcast_ref::<DirectError>() {
        return match e {
            DirectError::Cfl { .. } => (Failure::Cfl, None),
            DirectError::Grid(_) => (Failure::Input, None),
            _ => (Failure::Numerical, None),
        };
    }
    if let Some(e) = err.downcast_ref::<PhaseError>() {
        return classify_phase(e);
    }
    if err.is::<SlopeFailure>() {
        return (Failure::SlopeFailure, None);
    }
    (Failure::Input, None)
}

/// Residual orders below their thresholds.
#[derive(Debug, thiserror::Error)]
#[error("residual orders below thresholds: near slope {near:?} (need {near_thr}), far slope {far:?} (need {far_thr})")]
pub struct SlopeFailure {
    pub near: Option<f64>,
    pub far: Option<f64>,
    pub near_thr: f64,
    pub far_thr: f64,
}

/// Collects manifest entries and stage timings during one run.
struct Run {
    manifest: RunManifest,
    clock: Instant,
}

impl Run {
    fn new(command: &str, common: &Common) -> Run {
        Run {
            manifest: RunManifest {
                command: command.into(),
                scenario: common.scenario.clone(),
                output_dir: common.out.clone(),
                order: Some(common.order as usize),
                form_requested: common.form.map(|f| Form::from(f).to_string()),
                ..Default::default()
            },
            clock: Instant::now(),
        }
    }

    /// Times one stage.
    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> anyhow::Result<T>) -> anyhow::Result<T> {
        let start = Instant::now();
        let r = f();
        self.manifest.timings.insert(name.into(), start.elapsed().as_secs_f64());
        r
    }

    fn output(&mut self, dir: &Path, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.into());
        dir.join(name)
    }

    fn record_solution(&mut self, sol: &AsymptoticSolution, opts: &BuildOptions) {
        let m = &mut self.manifest;
        m.form_resolved = Some(sol.form.to_string());
        m.t_eff = Some(sol.t_eff());
        m.t_break = sol.regular.t_break;
        m.stop_reasons.insert("phase".into(), sol.curve.stop.to_string());
        if let Some(sg) = &sol.singular {
            let class = serde_json::to_value(sg.decay.class).unwrap_or_default();
            m.stop_reasons.insert("decay_class".into(), class.as_str().unwrap_or_default().into());
        }
        let s = &mut m.settings;
        s.insert("regular.ode.rtol".into(), json!(opts.regular.ode.rtol));
        s.insert("regular.ode.atol".into(), json!(opts.regular.ode.atol));
        s.insert("regular.fan_density".into(), json!(opts.regular.fan_density));
        s.insert("singular.slices".into(), json!(opts.singular.slices));
        s.insert("singular.h".into(), json!(opts.singular.h));
        s.insert("singular.solvability_tol".into(), json!(opts.singular.solvability_tol));
        s.insert("extension.refine".into(), json!(opts.extension.refine));
        s.insert("tau_max".into(), json!(sol.tau_max));
        s.insert("phase_scale".into(), json!(opts.phase_scale));
        s.insert("seed".into(), serde_json::Value::Null);
    }

    /// Writes the manifest and returns the exit code.
    fn finish(mut self, dir: &Path, result: anyhow::Result<()>) -> i32 {
        self.manifest.timings.insert("total".into(), self.clock.elapsed().as_secs_f64());
        let code = match &result {
            Ok(()) => 0,
            Err(e) => {
                let (failure, t_break) = classify(e);
                eprintln!("error: {e:#}");
                self.manifest.failure = Some(failure.name().into());
                self.manifest.error = Some(format!("{e:#}"));
                if t_break.is_some() {
                    self.manifest.t_break = t_break;
                }
                failure.code()
            }
        };
        self.manifest.exit_code = code;
        let written = std::fs::create_dir_all(dir)
            .map_err(anyhow::Error::from)
            .and_then(|_| output::write_json(&dir.join("manifest.json"), &self.manifest));
        match written {
            Ok(()) => code,
            Err(e) => {
                eprintln!("error: cannot write manifest: {e:#}");
                if code == 0 {
                    Failure::Input.code()
                } else {
                    code
                }
            }
        }
    }
}

fn load(common: &Common) -> anyhow::Result<Arc<Scenario>> {
    let s = Scenario::load(&common.scenario).with_context(|| format!("reading {}", common.scenario.display()))?;
    for w in &s.warnings {
        log::warn!("{w}");
    }
    Ok(Arc::new(s))
}

fn build_options(common: &Common) -> BuildOptions {
    BuildOptions {
        order: common.order as usize,
        form: common.form.map(Form::from),
        phase_scale: common.phase_scale,
        ..Default::default()
    }
}

fn eps_list(common: &Common, s: &Scenario) -> Vec<f64> {
    common.eps.clone().unwrap_or_else(|| s.eps.clone())
}

fn build_stage(run: &mut Run, common: &Common) -> anyhow::Result<(Arc<Scenario>, AsymptoticSolution, BuildOptions)> {
    let s = run.stage("load", || load(common))?;
    run.manifest.eps = eps_list(common, &s);
    let opts = build_options(common);
    let sol = run.stage("assemble", || Ok(build_solution(s.clone(), &opts)?))?;
    run.record_solution(&sol, &opts);
    Ok((s, sol, opts))
}

fn cmd_build(run: &mut Run, args: &BuildArgs) -> anyhow::Result<()> {
    let common = &args.common;
    let (s, sol, _) = build_stage(run, common)?;
    let dir = common.out.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let phase_path = run.output(&dir, "phase.csv");
    let regular_path = run.output(&dir, "regular.csv");
    let singular_paths = sol
        .singular
        .as_ref()
        .map(|_| (run.output(&dir, "singular.csv"), run.output(&dir, "singular_scalars.csv")));
    run.stage("write_fields", || {
        output::write_phase(&phase_path, &sol.curve, s.n_t + 1)?;
        output::write_regular(&regular_path, &sol)?;
        if let (Some(sg), Some((data, scalars))) = (&sol.singular, &singular_paths) {
            output::write_singular(data, sg, 401)?;
            output::write_singular_scalars(scalars, sg)?;
        }
        Ok(())
    })?;
    let sampling = SamplingOptions::default();
    for eps in run.manifest.eps.clone() {
        let name = output::solution_file_name(eps);
        let path = run.output(&dir, &name);
        run.stage(&format!("solution_eps{eps}"), || {
            let grid = residual_grid(&sol, eps, &sampling)?;
            output::write_solution(&path, eps, &grid)
        })?;
    }
    println!("built {} form, order {}, t_eff = {}", sol.form, sol.order, sol.t_eff());
    Ok(())
}

fn print_report(rep: &ResidualReport) {
    println!("{:>10}  {:>12}  {:>12}", "eps", "near sup", "far sup");
    for ((e, n), f) in rep.eps.iter().zip(&rep.near_norms).zip(&rep.far_norms) {
        println!("{e:>10}  {n:>12.4e}  {f:>12.4e}");
    }
    let show = |s: Option<f64>, floor: bool| match (s, floor) {
        (_, true) => "floor".to_string(),
        (Some(s), _) => format!("{s:.3}"),
        (None, _) => "n/a".to_string(),
    };
    println!(
        "near slope {} (threshold {}), far slope {} (threshold {}), boundary jump {:.3e}: {}",
        show(rep.near_slope, rep.near_floor),
        rep.near_threshold,
        show(rep.far_slope, rep.far_floor),
        rep.far_threshold,
        rep.boundary_jump_max,
        if rep.passed { "PASS" } else { "FAIL" }
    );
}

fn cmd_verify(run: &mut Run, args: &VerifyArgs) -> anyhow::Result<()> {
    let common = &args.common;
    let (_, sol, _) = build_stage(run, common)?;
    let eps = run.manifest.eps.clone();
    let sampling = SamplingOptions::default();
    {
        let s = &mut run.manifest.settings;
        s.insert("sampling.n_t".into(), json!(sampling.n_t));
        s.insert("sampling.n_x".into(), json!(sampling.n_x));
        s.insert("sampling.n_tau".into(), json!(sampling.n_tau));
    }
    let rep = run.stage("order_sweep", || Ok(order_sweep(&sol, &eps, &sampling)?))?;
    std::fs::create_dir_all(&common.out)?;
    let path = run.output(&common.out, "residual_report.json");
    output::write_report(&path, &rep)?;
    print_report(&rep);
    if rep.passed {
        Ok(())
    } else {
        Err(SlopeFailure {
            near: rep.near_slope,
            far: rep.far_slope,
            near_thr: rep.near_threshold,
            far_thr: rep.far_threshold,
        }
        .into())
    }
}

/// Peak speed from a least-squares line through the peak positions.
fn peak_speed(times: &[f64], peaks: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = times.iter().zip(peaks).map(|(t, p)| (*t, p.0)).collect();
    crate::numerics::fit::linear_fit(&pts).map(|f| f.slope).unwrap_or(f64::NAN)
}

fn cmd_direct(run: &mut Run, args: &DirectArgs) -> anyhow::Result<()> {
    let common = &args.common;
    let (s, mut sol, _) = build_stage(run, common)?;
    if args.zero_init {
        sol.suppress_soliton = true;
    }
    if !(args.t_run > 0.0) || args.t_run > sol.t_eff() {
        anyhow::bail!("t_run = {} must lie in (0, {}]", args.t_run, sol.t_eff());
    }
    let kappa = OnCurve::new(&s, &sol.regular, &sol.curve, 0.0)?.kappa;
    let eps = run.manifest.eps.clone();
    {
        let st = &mut run.manifest.settings;
        st.insert("direct.t_run".into(), json!(args.t_run));
        st.insert("direct.points_per_width".into(), json!(args.points));
        st.insert("direct.dt".into(), json!(args.dt));
        st.insert("direct.boundary".into(), json!(format!("{:?}", args.boundary).to_lowercase()));
        st.insert("direct.zero_init".into(), json!(args.zero_init));
    }
    let mut rows = Vec::new();
    let mut extra = Vec::new();
    for &e in &eps {
        let sol_ref = &sol;
        let (x_min, x_max) = (s.x_min, s.x_max);
        let boundary_dt = move |t: f64| -> [f64; 2] {
            let bt = |x: f64| sol_ref.eval(x, t, e).map(|smp| smp.jet.t).unwrap_or(0.0);
            [bt(x_min), bt(x_max)]
        };
        let boundary = match args.boundary {
            BoundaryArg::Periodic => Boundary::Periodic,
            BoundaryArg::Asymptotic => Boundary::Dirichlet(&boundary_dt),
        };
        let opts = DirectOptions { dt: args.dt, boundary, ..DirectOptions::resolving(e, kappa, args.points) };
        let at0 = sol.at(0.0)?;
        let init = |x: f64| at0.eval(x, e).map(|smp| smp.jet.v).unwrap_or(f64::NAN);
        let d = run.stage(&format!("direct_eps{e}"), || Ok(direct_solve(&s, e, &init, args.t_run, &opts)?))?;
        run.manifest.settings.insert(format!("direct.eps{e}.dx"), json!(d.dx));
        run.manifest.settings.insert(format!("direct.eps{e}.dt"), json!(d.dt));
        run.manifest.settings.insert(format!("direct.eps{e}.steps"), json!(d.steps));
        let row = compare(&sol, &d)?;
        let (a0, a1) = (d.peaks[0].1, d.peaks.last().unwrap().1);
        let span = d.times.last().unwrap() - d.times[0];
        let expected_speed = (sol.curve.eval(args.t_run)?.phi - sol.curve.eval(0.0)?.phi) / span;
        extra.push(CompareExtra {
            amplitude_drift: if a0 == 0.0 { 0.0 } else { (a1 / a0 - 1.0).abs() },
            speed: if args.zero_init { 0.0 } else { peak_speed(&d.times, &d.peaks) },
            expected_speed,
            mass_drift: d.mass_drift(),
        });
        println!("eps {e}: sup |direct - asymptotic| = {:.4e} at x = {:.4}, t = {:.4}", row.sup, row.argmax.0, row.argmax.1);
        rows.push(row);
    }
    let table = compare_table(rows);
    std::fs::create_dir_all(&common.out)?;
    let path = run.output(&common.out, "compare.csv");
    output::write_compare(&path, &table, &extra)?;
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> anyhow::Result<()> {
    let dir = &args.out;
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("manifest.json")).with_context(|| format!("no manifest in {}", dir.display()))?,
    )?;
    println!(
        "last command: {} (exit {}), scenario {}",
        manifest["command"].as_str().unwrap_or("?"),
        manifest["exit_code"],
        manifest["scenario"].as_str().unwrap_or("?")
    );
    if let Some(e) = manifest["error"].as_str() {
        println!("error: {e}");
    }
    if let Some(t) = manifest["timings"].as_object() {
        let timings: BTreeMap<_, _> = t.iter().collect();
        for (k, v) in timings {
            println!("  {k:<24} {:.3} s", v.as_f64().unwrap_or(f64::NAN));
        }
    }
    let report = dir.join("residual_report.json");
    if report.exists() {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report)?)?;
        println!(
            "residual report: order {}, form {}, near slope {}, far slope {}, passed {}",
            v["order"], v["form"], v["near_slope"], v["far_slope"], v["passed"]
        );
    }
    let cmp = dir.join("compare.csv");
    if cmp.exists() {
        println!("comparison table:");
        for line in std::fs::read_to_string(&cmp)?.lines() {
            println!("  {line}");
        }
    }
    Ok(())
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(jobs) = cli.jobs {
        // fails only when a pool already exists, which keeps the old bound
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    match cli.command {
        Command::Build(a) => {
            let mut run = Run::new("build", &a.common);
            let r = cmd_build(&mut run, &a);
            run.finish(&a.common.out, r)
        }
        Command::Verify(a) => {
            let mut run = Run::new("verify", &a.common);
            let r = cmd_verify(&mut run, &a);
            run.finish(&a.common.out, r)
        }
        Command::Direct(a) => {
            let mut run = Run::new("direct", &a.common);
            let r = cmd_direct(&mut run, &a);
            run.finish(&a.common.out, r)
        }
        Command::Report(a) => match cmd_report(&a) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e:#}");
                Failure::Input.code()
            }
        },
    }
}


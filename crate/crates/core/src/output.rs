//! Artifact writers: gnuplot-compatible CSV files with `#` comment headers
//! and the JSON run manifest.
//!
//! Every floating value is written with 17 significant digits so that the
//! files read back to the exact binary values.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::assemble::AsymptoticSolution;
use crate::phase::PhaseCurve;
use crate::numerics::linspace;
use crate::singular::{DecayClass, Singular};
use crate::verify::{CompareTable, ResidualPoint, ResidualReport};

/// Round-trip exact representation of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Streaming CSV writer with a comment preamble and a commented column line.
pub struct CsvWriter {
    out: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, comments: &[String], columns: &[&str]) -> io::Result<CsvWriter> {
        let mut out = BufWriter::new(File::create(path)?);
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "# {}", columns.join(","))?;
        Ok(CsvWriter { out, columns: columns.len() })
    }

    pub fn row(&mut self, values: &[f64]) -> io::Result<()> {
        self.row_with(values, &[])
    }

    /// Numeric fields followed by text fields.
    pub fn row_with(&mut self, values: &[f64], text: &[&str]) -> io::Result<()> {
        debug_assert_eq!(values.len() + text.len(), self.columns);
        let mut fields: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        fields.extend(text.iter().map(|s| s.to_string()));
        writeln!(self.out, "{}", fields.join(","))
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// File name of the solution grid for one `eps`.
pub fn solution_file_name(eps: f64) -> String {
    format!("solution_eps{eps}.csv")
}

/// `(t, phi, phi', phi'', margin)` at `n` uniform times and at every
/// accepted integrator step.
pub fn write_phase(path: &Path, curve: &PhaseCurve, n: usize) -> anyhow::Result<()> {
    let mut ts: Vec<f64> = linspace(0.0, curve.t_eff, n);
    ts.extend(curve.margins.iter().map(|(t, _)| *t));
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let comments = vec![
        format!("t_eff = {}", fmt_f64(curve.t_eff)),
        format!("stop = {:?}", curve.stop),
        format!("admissible = {}", curve.admissible),
    ];
    let mut w = CsvWriter::create(path, &comments, &["t", "phi", "dphi", "ddphi", "margin"])?;
    for t in ts {
        let st = curve.eval(t)?;
        w.row(&[t, st.phi, st.dphi, st.ddphi, curve.margin(t)?])?;
    }
    w.finish()?;
    Ok(())
}

/// Regular fields on the scenario grid. The left extension column is
/// present only for the plateau form and is `NaN` where it is not defined
/// (to the right of the curve or past the end of the curve).
pub fn write_regular(path: &Path, sol: &AsymptoticSolution) -> anyhow::Result<()> {
    let reg = &sol.regular;
    let mut cols = vec!["x", "t", "u0", "u1"];
    if sol.extension.is_some() {
        cols.push("u1_minus");
    }
    let comments = vec![format!("t_valid = {}", fmt_f64(reg.t_valid))];
    let mut w = CsvWriter::create(path, &comments, &cols)?;
    for &t in &reg.ts {
        let phi = if t <= sol.t_eff() { Some(sol.curve.eval(t)?.phi) } else { None };
        for &x in &reg.xs {
            let mut row = vec![x, t, reg.u0.value(x, t)?, reg.u1.value(x, t)?];
            if let Some(ext) = &sol.extension {
                let v = match phi {
                    Some(p) if x <= p => ext.eval(x, t).map(|j| j.v).unwrap_or(f64::NAN),
                    _ => f64::NAN,
                };
                row.push(v);
            }
            w.row(&row)?;
        }
    }
    w.finish()?;
    Ok(())
}

/// Slice data `(t, tau, v0, v1, F1, Phi1)` with at most `max_tau` points per
/// slice (every node when the grid is small enough).
pub fn write_singular(path: &Path, sg: &Singular, max_tau: usize) -> anyhow::Result<()> {
    let stride = sg.taus.len().div_ceil(max_tau.max(2)).max(1);
    let comments = vec![
        format!("tau_max = {}", fmt_f64(sg.tau_max)),
        format!("h = {}", fmt_f64(sg.h)),
        format!("node stride = {stride}"),
    ];
    let mut w = CsvWriter::create(path, &comments, &["t", "tau", "v0", "v1", "F1", "Phi1"])?;
    let last = sg.taus.len() - 1;
    for s in &sg.slices {
        for i in (0..=last).filter(|i| i % stride == 0 || *i == last) {
            let tau = sg.taus[i];
            w.row(&[s.oc.t, tau, s.oc.v0(tau).g, s.v[i], s.oc.source(tau), s.phi1[i]])?;
        }
    }
    w.finish()?;
    Ok(())
}

/// Per-slice scalars with the decay class of each slice.
pub fn write_singular_scalars(path: &Path, sg: &Singular) -> anyhow::Result<()> {
    let comments = vec![format!(
        "classification = {}",
        match sg.decay.class {
            DecayClass::Decaying => "decaying",
            DecayClass::Plateau => "plateau",
        }
    )];
    let cols = ["t", "E1", "nu1", "orth_residual", "E1_predicted", "multiplier", "decay_class"];
    let mut w = CsvWriter::create(path, &comments, &cols)?;
    for sc in sg.scalars() {
        let class = if sc.plateau { "plateau" } else { "decaying" };
        w.row_with(&[sc.t, sc.e1, sc.nu1, sc.orthogonality, sc.e1_predicted, sc.multiplier], &[class])?;
    }
    w.finish()?;
    Ok(())
}

/// Solution samples `(x, t, eps, Y, region)`.
pub fn write_solution(path: &Path, eps: f64, points: &[ResidualPoint]) -> anyhow::Result<()> {
    let mut w = CsvWriter::create(path, &[], &["x", "t", "eps", "Y", "region"])?;
    for p in points {
        w.row_with(&[p.x, p.t, eps, p.value], &[p.region.name()])?;
    }
    w.finish()?;
    Ok(())
}

pub fn write_compare(path: &Path, table: &CompareTable, extra: &[CompareExtra]) -> anyhow::Result<()> {
    let mut comments = Vec::new();
    if let Some(s) = table.slope {
        comments.push(format!("slope = {}", fmt_f64(s)));
    }
    let cols = ["eps", "sup", "x_argmax", "t_argmax", "amplitude_drift", "speed", "expected_speed", "mass_drift"];
    let mut w = CsvWriter::create(path, &comments, &cols)?;
    for (r, e) in table.rows.iter().zip(extra) {
        w.row(&[r.eps, r.sup, r.argmax.0, r.argmax.1, e.amplitude_drift, e.speed, e.expected_speed, e.mass_drift])?;
    }
    w.finish()?;
    Ok(())
}

/// Soliton diagnostics that accompany a comparison row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompareExtra {
    /// Relative change of the peak amplitude over the run.
    pub amplitude_drift: f64,
    /// Mean peak speed over the run.
    pub speed: f64,
    /// Mean curve speed over the same interval.
    pub expected_speed: f64,
    pub mass_drift: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn write_report(path: &Path, report: &ResidualReport) -> anyhow::Result<()> {
    write_json(path, report)
}

/// Record of one command invocation.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: PathBuf,
    pub output_dir: PathBuf,
    pub order: Option<usize>,
    pub form_requested: Option<String>,
    pub form_resolved: Option<String>,
    pub eps: Vec<f64>,
    /// Numerical settings actually used. The pipeline is deterministic and
    /// uses no random seeds.
    pub settings: BTreeMap<String, serde_json::Value>,
    /// Why each stage stopped where it did.
    pub stop_reasons: BTreeMap<String, String>,
    pub t_eff: Option<f64>,
    pub t_break: Option<f64>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
    pub exit_code: i32,
    pub failure: Option<String>,
    pub error: Option<String>,
}

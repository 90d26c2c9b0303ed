//! `osc-lab` command line: reproduction recipes and artifact emission.
//!
//! Every run writes `summary.json` into `--out`. Exit status is 0 on success,
//! 2 on invalid configuration and 3 on numerical failure; failed runs still
//! leave a summary naming the error.

use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::Error;
use crate::family::{integrate_family, FiveParamSpec, DEFAULT_ALPHA2};
use crate::integrator::{
    integrate_adaptive, integrate_fixed, AdaptiveConfig, FixedStepConfig, Status, Stepper, Trajectory,
};
use crate::interp::UniformCubic;
use crate::invariant::{build_coeffs, drift_report, DriftReport};
use crate::io::{read_hill_csv, write_csv, write_json, write_trajectory};
use crate::model::{GSource, OscillatorSpec};
use crate::normalform::{reduce, HillSpec, ReduceConfig};
use crate::plot::{Mark, Plot, Series};
use crate::poincare::{strobe_section, Interval};
use crate::stability::{i0_crit, scan, z_crit, BoundednessConfig, ScanConfig};

#[derive(Debug, Parser)]
#[command(name = "osc-lab", version, about = "Invariants, stroboscopic sections and stability scans for z'' + w^2 z + g(t) z^m = 0")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write z(t), p(t).
    Simulate(RunArgs),
    /// Integrate and track the relative drift of the quadratic invariant.
    Drift(RunArgs),
    /// Strobe the flow at t_k = k*pi/omega and compare with the analytic phase curve.
    Poincare(PoincareArgs),
    /// Last bounded start amplitude per omega against the analytic threshold.
    StabilityScan(ScanArgs),
    /// Print the critical amplitude for the cubic nonlinearity.
    Crit(CritArgs),
    /// Reduce a sampled Hill part plus nonlinearity to constant-frequency form.
    Reduce(ReduceArgs),
    /// Integrate the five-parameter family jointly with its coefficient equation.
    Family(FamilyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig1,
    Sec3ref,
    Fig2,
    Fig3,
    Fig4Bounded,
    Fig4Unbounded,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Sec3ref => "sec3ref",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4Bounded => "fig4-bounded",
            Preset::Fig4Unbounded => "fig4-unbounded",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// Oscillator spec as JSON.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long = "A")]
    pub a: Option<f64>,
    #[arg(long = "B")]
    pub b: Option<f64>,
    #[arg(long = "C")]
    pub c: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub m: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct IntegratorArgs {
    /// Fixed RK4 step; adaptive Dormand-Prince when absent.
    #[arg(long = "h")]
    pub h: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Stop once |z| or |p| exceeds this bound.
    #[arg(long)]
    pub escape: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, overrides_with = "no_svg")]
    pub svg: bool,
    #[arg(long = "no-svg", overrides_with = "svg")]
    pub no_svg: bool,
    /// Write every n-th row of long series.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub integ: IntegratorArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[arg(long)]
    pub z0: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PoincareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of strobe returns.
    #[arg(long)]
    pub kmax: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Inclusive range `start:stop:step`.
    #[arg(long)]
    pub omegas: Option<String>,
    #[arg(long)]
    pub dz0: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub escape: Option<f64>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// Worker threads (`OSC_LAB_THREADS` when absent, else all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CritArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Also write summary.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReduceArgs {
    /// CSV with columns t,f,g on a uniform grid over one period.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, alias = "T")]
    pub period: f64,
    #[arg(long)]
    pub m: u32,
    #[arg(long, default_value_t = 2001)]
    pub n_grid: usize,
    #[arg(long, default_value_t = crate::normalform::DEFAULT_TOL)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    /// Five-parameter spec as JSON: {"omega", "C1", "C2", "alpha2"}.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long = "C1")]
    pub c1: Option<f64>,
    #[arg(long = "C2")]
    pub c2: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub z0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p0: f64,
    #[arg(long, default_value_t = 100.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-14)]
    pub atol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug)]
pub enum Failure {
    Config { name: &'static str, message: String },
    Numerical(Error),
    /// Numerical failure whose summary has already been written.
    Reported(&'static str),
    Io(io::Error),
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure::Config { name: "invalid_config", message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config { .. } => 2,
            Failure::Numerical(_) | Failure::Reported(_) => 3,
            Failure::Io(_) => 1,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Failure::Config { name, .. } => name,
            Failure::Numerical(e) => e.name(),
            Failure::Reported(name) => name,
            Failure::Io(_) => "io",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config { message, .. } => message.clone(),
            Failure::Numerical(e) => e.to_string(),
            Failure::Reported(name) => format!("run stopped with status {name}"),
            Failure::Io(e) => e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e)
        } else {
            Failure::Config { name: e.name(), message: e.to_string() }
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first) and runs; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    run(cli)
}

pub fn run(cli: Cli) -> i32 {
    let (name, out) = match &cli.command {
        Command::Simulate(a) => ("simulate", Some(a.output.out.clone())),
        Command::Drift(a) => ("drift", Some(a.output.out.clone())),
        Command::Poincare(a) => ("poincare", Some(a.run.output.out.clone())),
        Command::StabilityScan(a) => ("stability-scan", Some(a.output.out.clone())),
        Command::Crit(a) => ("crit", a.out.clone()),
        Command::Reduce(a) => ("reduce", Some(a.output.out.clone())),
        Command::Family(a) => ("family", Some(a.output.out.clone())),
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Drift(a) => drift(&a),
        Command::Poincare(a) => poincare(&a),
        Command::StabilityScan(a) => stability_scan(&a),
        Command::Crit(a) => crit(&a),
        Command::Reduce(a) => reduce_cmd(&a),
        Command::Family(a) => family(&a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("osc-lab {name}: {} ({})", f.message(), f.name());
            if let (Some(dir), false) = (out, matches!(f, Failure::Reported(_))) {
                let summary = json!({
                    "command": name,
                    "status": "error",
                    "error": f.name(),
                    "message": f.message(),
                });
                if fs::create_dir_all(&dir).is_ok() {
                    let _ = write_json(&dir.join("summary.json"), &summary);
                }
            }
            f.exit_code()
        }
    }
}

/// Fully resolved run parameters: defaults, then preset, then spec file, then flags.
#[derive(Debug, Clone)]
struct Resolved {
    preset: Option<Preset>,
    spec: OscillatorSpec,
    z0: f64,
    p0: f64,
    t_end: f64,
    h: Option<f64>,
    rtol: f64,
    atol: f64,
    escape: Option<f64>,
    k_max: usize,
    omegas: Vec<f64>,
    dz0: f64,
    y_range: Option<(f64, f64)>,
}

struct PresetValues {
    a: f64,
    b: f64,
    c: f64,
    omega: f64,
    z0: f64,
    h: Option<f64>,
    escape: Option<f64>,
    y_range: Option<(f64, f64)>,
}

fn preset_values(p: Option<Preset>) -> PresetValues {
    let base = PresetValues { a: 1.3, b: 0.9, c: 0.0, omega: 1.0, z0: 0.1, h: None, escape: None, y_range: None };
    match p {
        None | Some(Preset::Fig2) => base,
        Some(Preset::Fig1) => PresetValues { h: Some(1e-3), ..base },
        Some(Preset::Sec3ref) => PresetValues { omega: 1.23, z0: 0.35, h: Some(1e-3), ..base },
        Some(Preset::Fig3) => PresetValues { escape: Some(50.0), ..base },
        Some(Preset::Fig4Bounded) => {
            PresetValues { omega: 1.4, z0: 1.2, escape: Some(50.0), y_range: Some((-5.0, 5.0)), ..base }
        }
        Some(Preset::Fig4Unbounded) => {
            PresetValues { omega: 1.4, z0: 1.4, escape: Some(50.0), y_range: Some((-5.0, 5.0)), ..base }
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn resolve_spec(sys: &SystemArgs, pv: &PresetValues) -> CliResult<OscillatorSpec> {
    let file: Option<OscillatorSpec> = sys.spec.as_deref().map(read_json).transpose()?;
    let trig_flags = sys.a.is_some() || sys.b.is_some() || sys.c.is_some();
    match file {
        Some(spec) if spec.trig_alpha().is_none() => {
            if trig_flags || sys.omega.is_some() || sys.m.is_some() {
                return Err(Failure::config("--A/--B/--C/--omega/--m only combine with trig specs"));
            }
            Ok(spec)
        }
        file => {
            let (a, b, c, omega, m) = match &file {
                Some(s) => {
                    let t = s.trig_alpha().expect("trig spec");
                    (t.a(), t.b(), t.c(), s.omega(), s.m())
                }
                None => (pv.a, pv.b, pv.c, pv.omega, 2),
            };
            Ok(OscillatorSpec::trig(
                sys.a.unwrap_or(a),
                sys.b.unwrap_or(b),
                sys.c.unwrap_or(c),
                sys.omega.unwrap_or(omega),
                sys.m.unwrap_or(m),
            )?)
        }
    }
}

fn fig3_omegas() -> Vec<f64> {
    vec![0.8, 1.0, 1.2, 1.4, 1.6, 1.8]
}

fn resolve(sys: &SystemArgs, integ: Option<&IntegratorArgs>, z0: Option<f64>, p0: Option<f64>) -> CliResult<Resolved> {
    let pv = preset_values(sys.preset);
    let spec = resolve_spec(sys, &pv)?;
    let mut r = Resolved {
        preset: sys.preset,
        spec,
        z0: z0.unwrap_or(pv.z0),
        p0: p0.unwrap_or(0.0),
        t_end: 600.0,
        h: pv.h,
        rtol: 1e-12,
        atol: 1e-14,
        escape: pv.escape,
        k_max: 190,
        omegas: fig3_omegas(),
        dz0: 0.02,
        y_range: pv.y_range,
    };
    if let Some(i) = integ {
        if i.h.is_some() && (i.rtol.is_some() || i.atol.is_some()) {
            return Err(Failure::config("--h selects the fixed-step method; drop --rtol/--atol"));
        }
        if i.rtol.is_some() || i.atol.is_some() {
            r.h = None;
        }
        r.h = i.h.or(r.h);
        r.rtol = i.rtol.unwrap_or(r.rtol);
        r.atol = i.atol.unwrap_or(r.atol);
        r.t_end = i.tmax.unwrap_or(r.t_end);
        r.escape = i.escape.or(r.escape);
    }
    if !(r.t_end > 0.0 && r.t_end.is_finite()) {
        return Err(Failure::config(format!("--tmax must be positive, got {}", r.t_end)));
    }
    if !(r.z0.is_finite() && r.p0.is_finite()) {
        return Err(Failure::config("initial state must be finite"));
    }
    Ok(r)
}

fn ensure_dir(out: &OutputArgs) -> CliResult<()> {
    if out.stride == 0 {
        return Err(Failure::config("--stride must be at least 1"));
    }
    fs::create_dir_all(&out.out)
        .map_err(|e| Failure::config(format!("cannot create {}: {e}", out.out.display())))
}

fn emit_svg(out: &OutputArgs) -> bool {
    !out.no_svg
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Completed => "completed",
        Status::Escaped => "escaped",
        Status::CoefficientSingular => "coefficient_singular",
    }
}

fn short(x: f64) -> String {
    format!("{x:.3e}")
}

fn method_json(r: &Resolved) -> Value {
    match r.h {
        Some(h) => json!({"kind": "rk4", "h": h}),
        None => json!({"kind": "dopri5", "rtol": r.rtol, "atol": r.atol}),
    }
}

/// Integrates the resolved system; five-parameter specs carry `(α₂, α₂', α₂'')` along.
fn integrate(r: &Resolved) -> CliResult<Trajectory> {
    let traj = match r.spec.g_source() {
        GSource::FiveParam(fp) => {
            let [a0, a1, a2] = fp.alpha2_initial();
            let y0 = [r.z0, r.p0, a0, a1, a2];
            match r.h {
                Some(h) => integrate_fixed(fp.field(), 0.0, &y0, FixedStepConfig { h, t_end: r.t_end, escape: r.escape })?,
                None => integrate_adaptive(fp.field(), 0.0, &y0, adaptive(r))?,
            }
        }
        _ => {
            let y0 = [r.z0, r.p0];
            match r.h {
                Some(h) => integrate_fixed(&r.spec, 0.0, &y0, FixedStepConfig { h, t_end: r.t_end, escape: r.escape })?,
                None => integrate_adaptive(&r.spec, 0.0, &y0, adaptive(r))?,
            }
        }
    };
    Ok(traj)
}

fn adaptive(r: &Resolved) -> AdaptiveConfig {
    AdaptiveConfig { escape: r.escape, ..AdaptiveConfig::new(r.rtol, r.atol, r.t_end) }
}

const ALPHA_COLUMNS: [&str; 3] = ["alpha2", "alpha2_d1", "alpha2_d2"];

fn write_traj(path: &Path, traj: &Trajectory, stride: usize) -> io::Result<()> {
    let extra: &[&str] = if traj.dim() == 5 { &ALPHA_COLUMNS } else { &[] };
    if stride == 1 {
        return write_trajectory(path, traj, extra);
    }
    let mut header = vec!["t", "z", "p"];
    header.extend_from_slice(extra);
    let last = traj.len() - 1;
    write_csv(
        path,
        &header,
        (0..traj.len()).filter(|i| i % stride == 0 || *i == last).map(|i| {
            let mut row = vec![traj.time(i)];
            row.extend_from_slice(traj.row(i));
            row
        }),
    )
}

fn base_summary(cmd: &str, r: &Resolved) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(cmd));
    m.insert("preset".into(), json!(r.preset.map(Preset::name)));
    m.insert("spec".into(), serde_json::to_value(&r.spec).unwrap_or(Value::Null));
    m.insert("z0".into(), json!(r.z0));
    m.insert("p0".into(), json!(r.p0));
    m
}

fn finish(out: &Path, mut summary: serde_json::Map<String, Value>, status: Status) -> CliResult<()> {
    summary.insert("status".into(), json!(status_name(status)));
    if status == Status::CoefficientSingular {
        summary.insert("error".into(), json!("coefficient_singular"));
    }
    write_json(&out.join("summary.json"), &Value::Object(summary))?;
    match status {
        Status::CoefficientSingular => Err(Failure::Reported("coefficient_singular")),
        _ => Ok(()),
    }
}

fn simulate(a: &RunArgs) -> CliResult<()> {
    let r = resolve(&a.system, Some(&a.integ), a.z0, a.p0)?;
    ensure_dir(&a.output)?;
    let traj = integrate(&r)?;
    let out = &a.output.out;
    write_traj(&out.join("trajectory.csv"), &traj, a.output.stride)?;
    if emit_svg(&a.output) {
        let pts: Vec<(f64, f64)> = traj.rows().map(|(t, y)| (t, y[0])).collect();
        let mut plot = Plot::new(&format!("z(t), z0 = {}", r.z0), "t", "z")
            .x_range(0.0, r.t_end)
            .with(Series::new(pts, Mark::Line, "black"));
        if let Some((lo, hi)) = r.y_range {
            plot = plot.y_range(lo, hi);
        }
        fs::write(out.join("trajectory.svg"), plot.render())?;
    }
    let last = traj.last();
    let mut s = base_summary("simulate", &r);
    s.insert("method".into(), method_json(&r));
    s.insert("t_end".into(), json!(r.t_end));
    s.insert("escape".into(), json!(r.escape));
    s.insert("t_final".into(), json!(last.t));
    s.insert("z_final".into(), json!(last.z));
    s.insert("p_final".into(), json!(last.p));
    s.insert("max_abs_z".into(), json!(traj.max_abs(0)));
    s.insert("n_points".into(), json!(traj.len()));
    s.insert("steps".into(), serde_json::to_value(traj.steps).unwrap_or(Value::Null));
    finish(out, s, traj.status)
}

fn drift_series_rows(report: &DriftReport) -> (&'static str, &[(f64, f64)]) {
    match report {
        DriftReport::Relative(d) => ("rel_drift", &d.series),
        DriftReport::Absolute(d) => ("abs_drift", &d.series),
    }
}

fn write_drift(out: &OutputArgs, report: &DriftReport, title: &str, t_end: f64) -> CliResult<()> {
    let (col, series) = drift_series_rows(report);
    let last = series.len().saturating_sub(1);
    write_csv(
        &out.out.join("drift.csv"),
        &["t", col],
        series.iter().enumerate().filter(|(i, _)| i % out.stride == 0 || *i == last).map(|(_, &(t, d))| [t, d]),
    )?;
    if emit_svg(out) {
        let plot = Plot::new(title, "t", if col == "rel_drift" { "I(t)/I(0) - 1" } else { "I(t) - I(0)" })
            .x_range(0.0, t_end)
            .y_range(-1e-5, 1e-5)
            .with(Series::new(series.to_vec(), Mark::Line, "black"));
        fs::write(out.out.join("drift.svg"), plot.render())?;
    }
    Ok(())
}

fn drift_fields(s: &mut serde_json::Map<String, Value>, report: &DriftReport) {
    let i0 = match report {
        DriftReport::Relative(d) => d.i0,
        DriftReport::Absolute(d) => d.i0,
    };
    s.insert("i0".into(), json!(i0));
    s.insert("max_rel_drift".into(), json!(report.max_rel()));
    s.insert("max_abs_drift".into(), json!(report.max_abs()));
    s.insert(
        "display".into(),
        json!({
            "max_rel_drift": report.max_rel().map(short),
            "max_abs_drift": short(report.max_abs()),
        }),
    );
}

fn drift(a: &RunArgs) -> CliResult<()> {
    let r = resolve(&a.system, Some(&a.integ), a.z0, a.p0)?;
    ensure_dir(&a.output)?;
    let coeffs = match r.spec.g_source() {
        GSource::FiveParam(fp) => build_coeffs(&fp.oscillator())?,
        _ => build_coeffs(&r.spec)?,
    };
    let traj = integrate(&r)?;
    let usable = match traj.status {
        Status::CoefficientSingular => {
            // the final state sits on the singular floor
            let mut t = traj.clone();
            t.status = Status::Completed;
            t
        }
        _ => traj.clone(),
    };
    let report = drift_report(&usable, &coeffs)?;
    write_drift(&a.output, &report, "invariant drift", r.t_end)?;
    let mut s = base_summary("drift", &r);
    s.insert("method".into(), method_json(&r));
    s.insert("t_end".into(), json!(r.t_end));
    s.insert("t_final".into(), json!(traj.last().t));
    s.insert("n_points".into(), json!(traj.len()));
    drift_fields(&mut s, &report);
    finish(&a.output.out, s, traj.status)
}

fn curve_rows(pts: &[(f64, f64, f64)], intervals: &[Interval]) -> Vec<Vec<(f64, f64)>> {
    let mut branches = Vec::new();
    let mut i = 0;
    for _ in intervals {
        if i >= pts.len() {
            break;
        }
        let start = pts[i].0;
        let mut j = i + 1;
        while j < pts.len() && pts[j].0 > pts[j - 1].0 {
            j += 1;
        }
        let seg = &pts[i..j];
        let mut loop_pts: Vec<(f64, f64)> = seg.iter().map(|&(z, p, _)| (z, p)).collect();
        loop_pts.extend(seg.iter().rev().map(|&(z, _, m)| (z, m)));
        if seg.len() > 1 || start.is_finite() {
            branches.push(loop_pts);
        }
        i = j;
    }
    branches
}

fn poincare(a: &PoincareArgs) -> CliResult<()> {
    let r = resolve(&a.run.system, Some(&a.run.integ), a.run.z0, a.run.p0)?;
    ensure_dir(&a.run.output)?;
    let k_max = a.kmax.unwrap_or(r.k_max);
    let stepper = match r.h {
        Some(h) => Stepper::Fixed { h },
        None => Stepper::adaptive(r.rtol, r.atol),
    };
    let sec = strobe_section(&r.spec, r.z0, r.p0, k_max, r.escape, stepper)?;
    let out = &a.run.output.out;
    let n_strobe = match sec.strobe.status {
        Status::Completed => sec.strobe.len(),
        _ => sec.strobe.len() - 1,
    };
    let strobe: Vec<(f64, f64)> = sec.strobe.states().take(n_strobe).map(|s| (s.z, s.p)).collect();
    write_csv(&out.join("strobe.csv"), &["z", "p"], strobe.iter().map(|&(z, p)| [z, p]))?;

    let bounded_here = sec.curve.interval_containing(r.z0).is_some_and(|iv| iv.is_bounded());
    let pts = if bounded_here {
        sec.curve.curve_points(400)
    } else {
        let (lo, hi) = strobe.iter().fold((r.z0, r.z0), |(lo, hi), &(z, _)| (lo.min(z), hi.max(z)));
        let pad = 0.2 * (hi - lo).max(0.1);
        sec.curve.curve_points_clipped(400, lo - pad, hi + pad)
    };
    let branches = curve_rows(&pts, &sec.curve.intervals);
    write_csv(&out.join("curve.csv"), &["z", "p"], branches.iter().flatten().map(|&(z, p)| [z, p]))?;
    if emit_svg(&a.run.output) {
        let mut plot = Plot::new("stroboscopic section t_k = k pi / omega", "z", "p");
        for b in &branches {
            plot = plot.with(Series::new(b.clone(), Mark::Line, "black"));
        }
        plot = plot.with(Series::new(strobe.clone(), Mark::Dots, "red"));
        fs::write(out.join("poincare.svg"), plot.render())?;
    }
    let mut s = base_summary("poincare", &r);
    s.insert("method".into(), method_json(&r));
    s.insert("k_max".into(), json!(k_max));
    s.insert("n_strobe".into(), json!(n_strobe));
    s.insert("i0".into(), json!(sec.curve.i0));
    s.insert("curve".into(), json!({"c_p2": sec.curve.c_p2, "c_z2": sec.curve.c_z2, "c_z3": sec.curve.c_z3}));
    s.insert("radicand_roots".into(), json!(sec.curve.radicand_roots()));
    s.insert("max_rel_residual".into(), json!(sec.residual));
    s.insert("display".into(), json!({"max_rel_residual": short(sec.residual)}));
    finish(out, s, sec.strobe.status)
}

fn parse_omegas(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Failure::config(format!("--omegas expects start:stop:step, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let (start, stop, step) = (v[0], v[1], v[2]);
    if !(step > 0.0 && stop >= start && start > 0.0) {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| {
        let w = start + i as f64 * step;
        // keep grid values tidy: 0.8 + 2*0.2 prints as 1.2
        (w * 1e12).round() / 1e12
    }).collect())
}

fn worker_count(flag: Option<usize>) -> CliResult<usize> {
    if let Some(n) = flag {
        return if n > 0 { Ok(n) } else { Err(Failure::config("--threads must be positive")) };
    }
    match std::env::var("OSC_LAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Failure::config(format!("OSC_LAB_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn stability_scan(a: &ScanArgs) -> CliResult<()> {
    let r = resolve(&a.system, None, None, None)?;
    let t = r
        .spec
        .trig_alpha()
        .filter(|_| r.spec.m() == 2)
        .ok_or_else(|| Failure::config("stability-scan needs the m = 2 trig family"))?;
    ensure_dir(&a.output)?;
    let defaults = BoundednessConfig::default();
    let cfg = ScanConfig {
        a: t.a(),
        b: t.b(),
        c: t.c(),
        omegas: match &a.omegas {
            Some(text) => parse_omegas(text)?,
            None if a.system.omega.is_some() => vec![r.spec.omega()],
            None => r.omegas.clone(),
        },
        dz0: a.dz0.unwrap_or(r.dz0),
        bounded: BoundednessConfig {
            t_max: a.tmax.unwrap_or(defaults.t_max),
            z_escape: a.escape.unwrap_or(defaults.z_escape),
            rtol: a.rtol.unwrap_or(defaults.rtol),
            atol: a.atol.unwrap_or(defaults.atol),
        },
    };
    let threads = worker_count(a.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::config(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| scan(&cfg))?;
    let out = &a.output.out;
    write_csv(
        &out.join("scan.csv"),
        &["omega", "z_last_bounded", "z_crit"],
        rows.iter().map(|row| [row.omega, row.z_last_bounded, row.z_crit_analytic]),
    )?;
    if emit_svg(&a.output) {
        let (w0, w1) = cfg.omegas.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &w| (lo.min(w), hi.max(w)));
        let r_mod = cfg.b.hypot(cfg.c);
        let (lo, hi) = (0.9 * w0, 1.05 * w1.max(w0 + 1e-3));
        let curve: Vec<(f64, f64)> = (0..=200)
            .map(|i| lo + (hi - lo) * i as f64 / 200.0)
            .map(|w| (w, z_crit(cfg.a, r_mod, w).unwrap_or(f64::NAN)))
            .collect();
        let dots: Vec<(f64, f64)> = rows.iter().map(|row| (row.omega, row.z_last_bounded)).collect();
        let plot = Plot::new("stability boundary", "omega", "z0")
            .x_range(lo, hi)
            .with(Series::new(curve, Mark::Line, "black"))
            .with(Series::new(dots, Mark::Dots, "black"));
        fs::write(out.join("scan.svg"), plot.render())?;
    }
    let mut s = serde_json::Map::new();
    s.insert("command".into(), json!("stability-scan"));
    s.insert("preset".into(), json!(r.preset.map(Preset::name)));
    s.insert("A".into(), json!(cfg.a));
    s.insert("B".into(), json!(cfg.b));
    s.insert("C".into(), json!(cfg.c));
    s.insert("dz0".into(), json!(cfg.dz0));
    s.insert("t_max".into(), json!(cfg.bounded.t_max));
    s.insert("z_escape".into(), json!(cfg.bounded.z_escape));
    s.insert("rows".into(), serde_json::to_value(&rows).unwrap_or(Value::Null));
    s.insert("all_agree".into(), json!(rows.iter().all(|r| r.agrees)));
    s.insert("status".into(), json!("completed"));
    write_json(&out.join("summary.json"), &Value::Object(s))?;
    Ok(())
}

fn crit(a: &CritArgs) -> CliResult<()> {
    let r = resolve(&a.system, None, None, None)?;
    let t = r.spec.trig_alpha().ok_or_else(|| Failure::config("crit needs a trig spec"))?;
    let omega = r.spec.omega();
    let zc = z_crit(t.a(), t.r(), omega)?;
    let ic = i0_crit(t.a(), t.r(), omega)?;
    println!("{zc:.2}");
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
        let summary = json!({
            "command": "crit",
            "A": t.a(),
            "R": t.r(),
            "omega": omega,
            "z_crit": zc,
            "i0_crit": ic,
            "display": {"z_crit": format!("{zc:.2}")},
            "status": "completed",
        });
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(())
}

fn periodic_samples(values: &[(f64, f64)], period: f64) -> CliResult<UniformCubic> {
    let n = values.len();
    if n < 4 {
        return Err(Failure::config("reduce needs at least four samples"));
    }
    let t0 = values[0].0;
    let closed = ((values[n - 1].0 - t0) - period).abs() <= 1e-9 * period;
    let vals: Vec<f64> = values[..if closed { n - 1 } else { n }].iter().map(|v| v.1).collect();
    let dt = period / vals.len() as f64;
    for (i, &(t, _)) in values.iter().enumerate().take(vals.len()) {
        if (t - (t0 + i as f64 * dt)).abs() > 1e-6 * dt {
            return Err(Failure::config("samples must cover one period on a uniform grid"));
        }
    }
    Ok(UniformCubic::periodic(t0, period, vals)?)
}

fn reduce_cmd(a: &ReduceArgs) -> CliResult<()> {
    let samples = read_hill_csv(&a.input)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", a.input.display())))?;
    if !(a.period > 0.0 && a.period.is_finite()) {
        return Err(Failure::config("--period must be positive"));
    }
    let fc = periodic_samples(&samples.iter().map(|s| (s.t, s.f)).collect::<Vec<_>>(), a.period)?;
    let gc = periodic_samples(&samples.iter().map(|s| (s.t, s.g)).collect::<Vec<_>>(), a.period)?;
    ensure_dir(&a.output)?;
    let hill = HillSpec::new(move |t| fc.eval(t).unwrap_or(f64::NAN), a.period)?;
    let nf = reduce(&hill, move |t| gc.eval(t).unwrap_or(f64::NAN), a.m, ReduceConfig { n_grid: a.n_grid, tol: a.tol })?;
    let out = &a.output.out;
    let env = &nf.envelope;
    write_csv(
        &out.join("envelope.csv"),
        &["t", "w", "wp", "phi"],
        (0..env.t.len()).map(|i| [env.t[i], env.w[i], env.wp[i], env.phi[i]]),
    )?;
    write_csv(&out.join("g_nf.csv"), &["s", "g_nf"], nf.s_grid.iter().zip(&nf.g_nf_grid).map(|(&s, &g)| [s, g]))?;
    if emit_svg(&a.output) {
        let w: Vec<(f64, f64)> = env.t.iter().copied().zip(env.w.iter().copied()).collect();
        let g: Vec<(f64, f64)> = nf.s_grid.iter().copied().zip(nf.g_nf_grid.iter().copied()).collect();
        let pw = Plot::new("envelope w(t)", "t", "w").with(Series::new(w, Mark::Line, "black"));
        let pg = Plot::new("reduced nonlinear coefficient", "s", "g_nf").with(Series::new(g, Mark::Line, "black"));
        fs::write(out.join("envelope.svg"), pw.render())?;
        fs::write(out.join("g_nf.svg"), pg.render())?;
    }
    let mono = &nf.monodromy;
    let summary = json!({
        "command": "reduce",
        "input": a.input.file_name().map(|f| f.to_string_lossy().into_owned()),
        "period": a.period,
        "m": a.m,
        "n_grid": a.n_grid,
        "omega_nf": nf.omega_nf,
        "monodromy": {
            "M": mono.m,
            "trace": mono.trace,
            "det": mono.det(),
            "mu": mono.mu,
            "beta0": mono.beta0,
            "alpha": mono.alpha,
            "gamma0": mono.gamma0,
        },
        "phase_total": env.phase_total(),
        "periodicity_defect": [env.periodicity_defect.0, env.periodicity_defect.1],
        "display": {"omega_nf": format!("{:.6}", nf.omega_nf)},
        "status": "completed",
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(())
}

fn family(a: &FamilyArgs) -> CliResult<()> {
    let fp = match &a.spec {
        Some(path) => {
            if a.omega.is_some() || a.c1.is_some() || a.c2.is_some() {
                return Err(Failure::config("--omega/--C1/--C2 do not combine with --spec"));
            }
            read_json::<FiveParamSpec>(path)?
        }
        None => FiveParamSpec::new(a.omega.unwrap_or(1.0), a.c1.unwrap_or(0.05), a.c2.unwrap_or(0.0), DEFAULT_ALPHA2)?,
    };
    ensure_dir(&a.output)?;
    let cfg = AdaptiveConfig::new(a.rtol, a.atol, a.tmax);
    let run = integrate_family(&fp, a.z0, a.p0, cfg)?;
    let out = &a.output.out;
    write_traj(&out.join("trajectory.csv"), &run.trajectory, a.output.stride)?;
    write_drift(&a.output, &run.drift, "invariant drift, five-parameter family", a.tmax)?;
    let mut s = serde_json::Map::new();
    s.insert("command".into(), json!("family"));
    s.insert("spec".into(), serde_json::to_value(fp).unwrap_or(Value::Null));
    s.insert("z0".into(), json!(a.z0));
    s.insert("p0".into(), json!(a.p0));
    s.insert("method".into(), json!({"kind": "dopri5", "rtol": a.rtol, "atol": a.atol}));
    s.insert("t_end".into(), json!(a.tmax));
    s.insert("n_points".into(), json!(run.trajectory.len()));
    drift_fields(&mut s, &run.drift);
    if let Some(trig) = fp.equivalent_trig() {
        let trig = trig?;
        let dev = run
            .trajectory
            .rows()
            .map(|(t, row)| (row[2] - trig.eval(t).value).abs())
            .fold(0.0, f64::max);
        s.insert("equivalent_trig".into(), json!({"A": trig.a(), "B": trig.b(), "C": trig.c()}));
        s.insert("max_alpha2_deviation".into(), json!(dev));
    }
    finish(out, s, run.trajectory.status)
}

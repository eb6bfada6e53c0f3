//! The `lmg` command line.
//!
//! Exit status: 0 on success, 2 on usage errors, 1 on computation errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{
    extract_extremum, fit_model, scaling_study, Curve, CurveMeta, CutSpec, ExtremumKind, FitModel, Quantity,
    ScalingQuery, ScalingRow,
};
use crate::coherent::{coherent_angles, coherent_qgt_closed_form, coherent_qgt_numeric, coherent_vector, Branch};
use crate::error::{Error, Result};
use crate::geometry::{scalar_curvature_at, scalar_curvature_field};
use crate::holstein_primakoff::{
    e_max, hp_broken_berry, hp_broken_metric, hp_broken_quadratic, hp_ground_metric, hp_highest_metric,
    hp_symmetric_metric, HpMetricPoint,
};
use crate::io::{self, format_f64};
use crate::qgt::{
    qgt_mesh, qgt_overlap_oracle, qgt_perturbative_with, Grid, MeshMethod, Method, QgtOptions, QgtPoint,
    DEFAULT_OVERLAP_DELTA,
};
use crate::semiclassical::{
    classical_energy, coherent_expectations, critical_lines, lyapunov_exponent, stationary_points,
};
use crate::spectral::{density_of_states, Spectrum, StateSelector};
use crate::spin::{ModelParams, SpinMagnitude};
use crate::util::linspace;

/// Inclusive `start:stop:count` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.count)
    }
}

impl std::str::FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 1 {
            let v: f64 = parts[0].parse().map_err(|e| format!("{s:?}: {e}"))?;
            return Ok(Range { start: v, stop: v, count: 1 });
        }
        if parts.len() != 3 {
            return Err(format!("{s:?}: expected start:stop:count"));
        }
        let start: f64 = parts[0].parse().map_err(|e| format!("{s:?}: start: {e}"))?;
        let stop: f64 = parts[1].parse().map_err(|e| format!("{s:?}: stop: {e}"))?;
        let count: usize = parts[2].parse().map_err(|e| format!("{s:?}: count: {e}"))?;
        if !(start.is_finite() && stop.is_finite()) {
            return Err(format!("{s:?}: bounds must be finite"));
        }
        if count == 0 {
            return Err(format!("{s:?}: count must be at least 1"));
        }
        if start > stop || (count == 1 && start != stop) {
            return Err(format!("{s:?}: need start <= stop (and start = stop for a single point)"));
        }
        Ok(Range { start, stop, count })
    }
}

fn parse_spin(s: &str) -> std::result::Result<SpinMagnitude, String> {
    let v: f64 = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    SpinMagnitude::new(v).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QgtMethod {
    Parity,
    Dense,
    Overlap,
}

#[derive(Debug, Parser)]
#[command(name = "lmg", version, about = "Quantum geometry of the extended Lipkin-Meshkov-Glick model")]
pub struct Cli {
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Point {
    #[arg(long = "omega-x", allow_negative_numbers = true)]
    pub omega_x: f64,
    #[arg(long = "xi-y", allow_negative_numbers = true)]
    pub xi_y: f64,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
}

impl Point {
    fn params(&self) -> ModelParams {
        ModelParams::new(self.omega_x, self.xi_y).with_omega(self.omega)
    }
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of the Hamiltonian.
    Spectrum {
        #[arg(long, value_parser = parse_spin)]
        j: SpinMagnitude,
        #[command(flatten)]
        point: Point,
        #[command(flatten)]
        output: Output,
    },
    /// Histogram of E/j.
    Dos {
        #[arg(long, value_parser = parse_spin)]
        j: SpinMagnitude,
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value_t = 40)]
        bins: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Geometric tensor at one point.
    Qgt {
        #[arg(long, value_parser = parse_spin)]
        j: SpinMagnitude,
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value = "ground")]
        state: StateSelector,
        #[arg(long, value_enum, default_value_t = QgtMethod::Parity)]
        method: QgtMethod,
        /// Overlap step for `--method overlap`.
        #[arg(long, default_value_t = DEFAULT_OVERLAP_DELTA)]
        delta: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Geometric tensor on a grid, written as a field file.
    Mesh {
        #[arg(long, value_parser = parse_spin)]
        j: SpinMagnitude,
        #[arg(long = "omega-x")]
        omega_x: Range,
        #[arg(long = "xi-y")]
        xi_y: Range,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, default_value = "ground")]
        state: StateSelector,
        #[arg(long, value_enum, default_value_t = QgtMethod::Parity)]
        method: QgtMethod,
        #[arg(long, default_value_t = DEFAULT_OVERLAP_DELTA)]
        delta: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Scalar curvature of a field file.
    Curvature {
        #[arg(long = "in")]
        input: PathBuf,
        /// Ω of the field (not stored in the file).
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Classical limit.
    Classical {
        #[command(subcommand)]
        verb: ClassicalVerb,
    },
    /// Holstein-Primakoff layer.
    Hp {
        #[command(subcommand)]
        verb: HpVerb,
    },
    /// Bloch coherent states.
    Coherent {
        #[command(subcommand)]
        verb: CoherentVerb,
    },
    /// Extrema along Ωx, from a field file or by direct sweeps over j.
    Peaks {
        /// Field file; one extremum per ξy row.
        #[arg(long = "in", conflicts_with = "j")]
        input: Option<PathBuf>,
        /// Comma-separated spins for a sweep.
        #[arg(long, value_parser = parse_spin, value_delimiter = ',')]
        j: Option<Vec<SpinMagnitude>>,
        #[arg(long = "xi-y", allow_negative_numbers = true)]
        xi_y: Option<f64>,
        /// Cut range for sweeps.
        #[arg(long = "omega-x")]
        omega_x: Option<Range>,
        #[arg(long, default_value = "highest")]
        state: StateSelector,
        #[arg(long, default_value = "g22")]
        quantity: Quantity,
        #[arg(long, default_value = "max")]
        kind: ExtremumKind,
        #[arg(long, default_value_t = 2)]
        zoom: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Least-squares fit of two CSV columns.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "j")]
        x: String,
        #[arg(long, default_value = "value")]
        y: String,
        #[arg(long)]
        model: FitModel,
        /// Comma-separated initial parameters.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        init: Vec<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Exact, Holstein-Primakoff and coherent-state values of the highest state side by side.
    Compare {
        #[arg(long, value_parser = parse_spin)]
        j: SpinMagnitude,
        #[arg(long = "xi-y")]
        xi_y: f64,
        #[arg(long = "omega-x")]
        omega_x: Range,
        /// Include the scalar curvature columns.
        #[arg(long)]
        curvature: bool,
        #[command(flatten)]
        output: Output,
    },
}

impl Command {
    fn label(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Dos { .. } => "dos",
            Command::Qgt { .. } => "qgt",
            Command::Mesh { .. } => "mesh",
            Command::Curvature { .. } => "curvature",
            Command::Classical { .. } => "classical",
            Command::Hp { .. } => "hp",
            Command::Coherent { .. } => "coherent",
            Command::Peaks { .. } => "peaks",
            Command::Fit { .. } => "fit",
            Command::Compare { .. } => "compare",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum ClassicalVerb {
    /// Stationary points with energies and stability.
    Points {
        #[command(flatten)]
        point: Point,
        #[command(flatten)]
        output: Output,
    },
    /// Lyapunov exponent of x1 and the critical lines.
    Lyapunov {
        #[command(flatten)]
        point: Point,
        #[command(flatten)]
        output: Output,
    },
    /// Classical energy per spin on a (Q, P) grid.
    Surface {
        #[command(flatten)]
        point: Point,
        #[arg(long, allow_hyphen_values = true)]
        q: Range,
        #[arg(long, allow_hyphen_values = true)]
        p: Range,
        #[command(flatten)]
        output: Output,
    },
    /// Observables in a coherent state.
    Observables {
        #[arg(long, value_parser = parse_spin)]
        j: SpinMagnitude,
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        theta: f64,
        #[arg(long, allow_negative_numbers = true)]
        phi: f64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Subcommand)]
pub enum HpVerb {
    Ground(HpArgs),
    Symmetric(HpArgs),
    Broken(HpArgs),
    Berry(HpArgs),
    Emax {
        #[command(flatten)]
        point: Point,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args)]
pub struct HpArgs {
    #[arg(long, value_parser = parse_spin)]
    pub j: SpinMagnitude,
    #[command(flatten)]
    pub point: Point,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Subcommand)]
pub enum CoherentVerb {
    /// Coefficients of |θ, φ>.
    State {
        #[arg(long, value_parser = parse_spin)]
        j: SpinMagnitude,
        #[arg(long)]
        theta: f64,
        #[arg(long, allow_negative_numbers = true)]
        phi: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Geometric tensor of the coherent state on a branch.
    Qgt {
        #[arg(long, value_parser = parse_spin)]
        j: SpinMagnitude,
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value = "broken")]
        branch: Branch,
        /// Use the chain-rule evaluation instead of the closed form.
        #[arg(long)]
        numeric: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Scalar curvature of the broken-branch metric.
    Curvature {
        #[arg(long, value_parser = parse_spin)]
        j: SpinMagnitude,
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value_t = 2e-4)]
        h: f64,
        #[command(flatten)]
        output: Output,
    },
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let label = cli.command.label();
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n as usize).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Failure::Compute(e.to_string())),
        },
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Compute(m)) => {
            eprintln!("error: {label}: {m}");
            1
        }
    }
}

fn sink(out: &Option<PathBuf>) -> std::result::Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| Failure::Compute(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn fmt_or(o: &Output, default: Format) -> Format {
    o.format.unwrap_or(default)
}

/// Shortest round-trip form, in exponent notation when tiny or huge.
fn fmt_text(x: f64) -> String {
    let x = x + 0.0;
    if x != 0.0 && x.is_finite() && !(1e-4..1e16).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// Key/value output for single-point results.
fn write_pairs<T: Serialize>(o: &Output, pairs: &[(&str, f64)], json: &T) -> Outcome {
    let mut w = sink(&o.out)?;
    match fmt_or(o, Format::Text) {
        Format::Text => {
            for (k, v) in pairs {
                writeln!(w, "{k} = {}", fmt_text(*v))?;
            }
        }
        Format::Csv => {
            let header: Vec<&str> = pairs.iter().map(|p| p.0).collect();
            writeln!(w, "{}", header.join(","))?;
            let row: Vec<String> = pairs.iter().map(|p| format_f64(p.1)).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Format::Json => io::write_json(json, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn write_table(o: &Output, header: &[&str], rows: &[Vec<String>], json: &impl Serialize) -> Outcome {
    let mut w = sink(&o.out)?;
    match fmt_or(o, Format::Csv) {
        Format::Json => io::write_json(json, &mut w)?,
        Format::Csv | Format::Text => {
            writeln!(w, "{}", header.join(","))?;
            for r in rows {
                writeln!(w, "{}", r.join(","))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn qgt_pairs(q: &QgtPoint) -> Vec<(&'static str, f64)> {
    vec![
        ("g11", q.g11),
        ("g12", q.g12),
        ("g22", q.g22),
        ("f12", q.f12.unwrap_or(f64::NAN)),
        ("det_g", q.det_g),
        ("min_gap", q.min_gap),
    ]
}

fn hp_pairs(h: &HpMetricPoint) -> Vec<(&'static str, f64)> {
    vec![("g11", h.g11), ("g12", h.g12), ("g22", h.g22), ("det_g", h.det_g), ("frequency", h.frequency)]
}

fn mesh_method(method: QgtMethod, delta: f64) -> MeshMethod {
    match method {
        QgtMethod::Parity => MeshMethod::Perturbative(QgtOptions::default()),
        QgtMethod::Dense => MeshMethod::Perturbative(QgtOptions { method: Method::Dense, ..QgtOptions::default() }),
        QgtMethod::Overlap => MeshMethod::Overlap { delta },
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Spectrum { j, point, output } => {
            let s = Spectrum::of_model(j, &point.params())?;
            let jj = j.j();
            let rows: Vec<Vec<String>> = s
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(k, e)| vec![k.to_string(), format_f64(*e), format_f64(e / jj)])
                .collect();
            write_table(&output, &["index", "energy", "energy_per_j"], &rows, &s.eigenvalues)
        }
        Command::Dos { j, point, bins, output } => {
            let s = Spectrum::of_model(j, &point.params())?;
            let h = density_of_states(&s, bins)?;
            let mut w = sink(&output.out)?;
            match fmt_or(&output, Format::Csv) {
                Format::Json => io::write_json(&h, &mut w)?,
                _ => io::write_dos_to(&h, &mut w)?,
            }
            w.flush()?;
            Ok(())
        }
        Command::Qgt { j, point, state, method, delta, output } => {
            let p = point.params();
            let q = match method {
                QgtMethod::Overlap => qgt_overlap_oracle(j, &p, state, delta)?,
                QgtMethod::Parity => qgt_perturbative_with(j, &p, state, &QgtOptions::default())?,
                QgtMethod::Dense => {
                    qgt_perturbative_with(j, &p, state, &QgtOptions { method: Method::Dense, ..QgtOptions::default() })?
                }
            };
            write_pairs(&output, &qgt_pairs(&q), &q)
        }
        Command::Mesh { j, omega_x, xi_y, omega, state, method, delta, output } => {
            let grid = Grid::new(omega_x.values(), xi_y.values())?.with_omega(omega);
            let field = qgt_mesh(j, &grid, state, mesh_method(method, delta));
            let mut w = sink(&output.out)?;
            match fmt_or(&output, Format::Csv) {
                Format::Json => io::write_json(&io::field_records(&field), &mut w)?,
                _ => io::write_field_to(&field, &mut w)?,
            }
            w.flush()?;
            let failed = field.nodes.iter().filter(|n| n.is_err()).count();
            if let Some((k, Err(e))) = field.nodes.iter().enumerate().find(|(_, n)| n.is_err()) {
                let p = grid.params(k % grid.nx(), k / grid.nx());
                eprintln!(
                    "warning: {failed} of {} nodes failed, first at omega_x = {}, xi_y = {}: {e}",
                    field.nodes.len(),
                    p.omega_x,
                    p.xi_y
                );
            }
            Ok(())
        }
        Command::Curvature { input, omega, output } => {
            let field = io::read_field(&input, omega, StateSelector::Ground)
                .map_err(|e| Failure::Compute(format!("{}: {e}", input.display())))?;
            let c = scalar_curvature_field(&field)?;
            let mut w = sink(&output.out)?;
            match fmt_or(&output, Format::Csv) {
                Format::Json => io::write_json(&io::curvature_records(&c), &mut w)?,
                _ => io::write_curvature_to(&c, &mut w)?,
            }
            w.flush()?;
            Ok(())
        }
        Command::Classical { verb } => classical(verb),
        Command::Hp { verb } => hp(verb),
        Command::Coherent { verb } => coherent(verb),
        Command::Peaks { input, j, xi_y, omega_x, state, quantity, kind, zoom, output } => {
            peaks(input, j, xi_y, omega_x, state, quantity, kind, zoom, output)
        }
        Command::Fit { input, x, y, model, init, output } => fit(&input, &x, &y, model, &init, &output),
        Command::Compare { j, xi_y, omega_x, curvature, output } => compare(j, xi_y, omega_x, curvature, &output),
    }
}

fn classical(verb: ClassicalVerb) -> Outcome {
    match verb {
        ClassicalVerb::Points { point, output } => {
            let pts = stationary_points(&point.params())?;
            let rows: Vec<Vec<String>> = pts
                .iter()
                .map(|s| {
                    vec![
                        s.label.to_string(),
                        format_f64(s.point.q),
                        format_f64(s.point.p),
                        format_f64(s.point.theta),
                        format_f64(s.point.phi),
                        format_f64(s.energy),
                        serde_json::to_value(s.stability).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                        format_f64(s.lyapunov),
                    ]
                })
                .collect();
            write_table(&output, &["label", "q", "p", "theta", "phi", "energy", "stability", "lyapunov"], &rows, &pts)
        }
        ClassicalVerb::Lyapunov { point, output } => {
            let p = point.params();
            let l = lyapunov_exponent(&p)?;
            let c = critical_lines(&p)?;
            let pairs = [
                ("lyapunov", l),
                ("omega_xc", c.omega_xc.unwrap_or(f64::NAN)),
                ("separatrix_xi", c.separatrix_xi),
                ("esqpt_energy", c.esqpt_energy),
            ];
            #[derive(Serialize)]
            struct Out {
                lyapunov: f64,
                #[serde(flatten)]
                lines: crate::semiclassical::CriticalLines,
            }
            write_pairs(&output, &pairs, &Out { lyapunov: l, lines: c })
        }
        ClassicalVerb::Surface { point, q, p, output } => {
            let params = point.params();
            let mut rows = Vec::new();
            let mut json = Vec::new();
            for pp in p.values() {
                for qq in q.values() {
                    let e = classical_energy(&params, qq, pp).unwrap_or(f64::NAN);
                    rows.push(vec![format_f64(qq), format_f64(pp), format_f64(e)]);
                    json.push((qq, pp, if e.is_finite() { Some(e) } else { None }));
                }
            }
            write_table(&output, &["q", "p", "energy"], &rows, &json)
        }
        ClassicalVerb::Observables { j, point, theta, phi, output } => {
            let o = coherent_expectations(j, theta, phi, &point.params())?;
            let pairs = [("jx", o.jx), ("jy", o.jy), ("jz", o.jz), ("jy2", o.jy2), ("energy", o.energy)];
            write_pairs(&output, &pairs, &o)
        }
    }
}

fn hp(verb: HpVerb) -> Outcome {
    match verb {
        HpVerb::Ground(a) => {
            let h = hp_ground_metric(a.j, &a.point.params())?;
            write_pairs(&a.output, &hp_pairs(&h), &h)
        }
        HpVerb::Symmetric(a) => {
            let h = hp_symmetric_metric(a.j, &a.point.params())?;
            write_pairs(&a.output, &hp_pairs(&h), &h)
        }
        HpVerb::Broken(a) => {
            let p = a.point.params();
            let h = hp_broken_metric(a.j, &p)?;
            let q = hp_broken_quadratic(a.j, &p)?;
            let mut pairs = hp_pairs(&h);
            pairs.extend([("constant", q.constant), ("c_pp", q.c_pp), ("c_qq", q.c_qq), ("c_qp", q.c_qp)]);
            #[derive(Serialize)]
            struct Out {
                metric: HpMetricPoint,
                quadratic: crate::holstein_primakoff::QuadraticHamiltonian,
            }
            write_pairs(&a.output, &pairs, &Out { metric: h, quadratic: q })
        }
        HpVerb::Berry(a) => {
            let f = hp_broken_berry(a.j, &a.point.params())?;
            write_pairs(&a.output, &[("f12", f)], &serde_json::json!({ "f12": f }))
        }
        HpVerb::Emax { point, output } => {
            let e = e_max(&point.params());
            write_pairs(&output, &[("e_max", e)], &serde_json::json!({ "e_max": e }))
        }
    }
}

fn coherent(verb: CoherentVerb) -> Outcome {
    match verb {
        CoherentVerb::State { j, theta, phi, output } => {
            let s = coherent_vector(j, theta, phi)?;
            let rows: Vec<Vec<String>> = s
                .coefficients
                .iter()
                .enumerate()
                .map(|(k, c)| vec![format_f64(j.m(k)), format_f64(c.re), format_f64(c.im)])
                .collect();
            write_table(&output, &["m", "re", "im"], &rows, &s)
        }
        CoherentVerb::Qgt { j, point, branch, numeric, output } => {
            let p = point.params();
            let c = if numeric { coherent_qgt_numeric(j, &p, branch)? } else { coherent_qgt_closed_form(j, &p, branch)? };
            let mut pairs = qgt_pairs(&c.qgt);
            pairs.pop();
            pairs.push(("degenerate", if c.degenerate { 1.0 } else { 0.0 }));
            let (theta, phi) = coherent_angles(&p, branch)?;
            pairs.extend([("theta", theta), ("phi", phi)]);
            write_pairs(&output, &pairs, &c)
        }
        CoherentVerb::Curvature { j, point, h, output } => {
            let p = point.params();
            let m = |x: [f64; 2]| -> Result<[f64; 3]> {
                let q = ModelParams { omega_x: x[0], xi_y: x[1], ..p };
                Ok(coherent_qgt_closed_form(j, &q, Branch::Broken)?.qgt.metric())
            };
            let r = scalar_curvature_at(&m, [p.omega_x, p.xi_y], h)?;
            write_pairs(&output, &[("R", r)], &serde_json::json!({ "R": r }))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn peaks(
    input: Option<PathBuf>,
    j: Option<Vec<SpinMagnitude>>,
    xi_y: Option<f64>,
    omega_x: Option<Range>,
    state: StateSelector,
    quantity: Quantity,
    kind: ExtremumKind,
    zoom: usize,
    output: Output,
) -> Outcome {
    if let Some(path) = input {
        if quantity == Quantity::R {
            return Err(Failure::Usage("--quantity R needs a sweep (--j), field files carry the metric only".into()));
        }
        let field = io::read_field(&path, 1.0, state).map_err(|e| Failure::Compute(format!("{}: {e}", path.display())))?;
        let g = &field.grid;
        let mut rows = Vec::new();
        let mut json = Vec::new();
        for iy in 0..g.ny() {
            let ys: Vec<f64> = (0..g.nx())
                .map(|ix| match field.node(ix, iy) {
                    Ok(q) => match quantity {
                        Quantity::G11 => q.g11,
                        Quantity::G12 => q.g12,
                        Quantity::G22 => q.g22,
                        _ => q.det_g,
                    },
                    Err(_) => f64::NAN,
                })
                .collect();
            let meta = CurveMeta { j: None, fixed: vec![("xi_y".into(), g.xi_y[iy])], quantity: quantity.name().into() };
            let found = Curve::with_meta(g.omega_x.clone(), ys, meta).and_then(|c| extract_extremum(&c, kind));
            let (loc, val, status) = match found {
                Ok((l, v)) => (l, v, "ok"),
                Err(_) => (f64::NAN, f64::NAN, "failed"),
            };
            rows.push(vec![format_f64(g.xi_y[iy]), format_f64(loc), format_f64(val), status.to_string()]);
            json.push(serde_json::json!({ "xi_y": g.xi_y[iy], "location": loc, "value": val, "status": status }));
        }
        return write_table(&output, &["xi_y", "location", "value", "status"], &rows, &json);
    }
    let (Some(js), Some(xi), Some(r)) = (j, xi_y, omega_x) else {
        return Err(Failure::Usage("peaks needs --in, or --j with --xi-y and --omega-x".into()));
    };
    let cut = CutSpec { xi_y: xi, start: r.start, stop: r.stop, count: r.count, state };
    let rows: Vec<ScalingRow> = scaling_study(&js, &ScalingQuery::Peak { cut, kind, zoom }, quantity)?;
    let table: Vec<Vec<String>> =
        rows.iter().map(|r| vec![format_f64(r.j), format_f64(r.location), format_f64(r.value)]).collect();
    write_table(&output, &["j", "location", "value"], &table, &rows)
}

fn fit(input: &Path, x: &str, y: &str, model: FitModel, init: &[f64], output: &Output) -> Outcome {
    let mut r = csv::Reader::from_path(input).map_err(|e| Failure::Compute(format!("{}: {e}", input.display())))?;
    let header = r.headers().map_err(|e| Failure::Compute(e.to_string()))?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h.trim() == name).ok_or_else(|| Failure::Compute(Error::SchemaColumn(name.into()).to_string()))
    };
    let (cx, cy) = (col(x)?, col(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| Failure::Compute(e.to_string()))?;
        let parse = |k: usize| rec[k].trim().parse::<f64>().map_err(|e| Failure::Compute(format!("{}: {e}", &rec[k])));
        let (a, b) = (parse(cx)?, parse(cy)?);
        if a.is_finite() && b.is_finite() {
            xs.push(a);
            ys.push(b);
        }
    }
    let curve = Curve::new(xs, ys)?;
    let f = fit_model(&curve, model, init)?;
    let mut pairs: Vec<(&str, f64)> = Vec::new();
    let names = ["a", "b", "c", "d"];
    for (k, v) in f.parameters.iter().enumerate() {
        pairs.push((names[k], *v));
    }
    pairs.push(("residual_rms", f.residual_rms));
    pairs.push(("converged", if f.converged { 1.0 } else { 0.0 }));
    write_pairs(output, &pairs, &f)?;
    if !f.converged {
        return Err(Failure::Compute(Error::FitNoConvergence { iterations: f.iterations }.to_string()));
    }
    Ok(())
}

#[derive(Serialize)]
struct CompareRow {
    omega_x: f64,
    xi_y: f64,
    phase: &'static str,
    exact: [f64; 3],
    hp: [f64; 3],
    coherent: [f64; 3],
    r: Option<[f64; 3]>,
}

fn compare(j: SpinMagnitude, xi_y: f64, omega_x: Range, with_r: bool, output: &Output) -> Outcome {
    use rayon::prelude::*;
    let jj = j.j();
    let rows: Vec<CompareRow> = omega_x
        .values()
        .into_par_iter()
        .map(|ox| {
            let p = ModelParams::new(ox, xi_y);
            let nan = [f64::NAN; 3];
            let broken = 4.0 * xi_y * xi_y - ox * ox - 1.0 > 0.0 && xi_y > 0.0;
            // Tunnelling partner dropped in the broken phase, as in the quadratic expansion.
            let opts = QgtOptions { drop_partner_below: broken.then_some(1e-6), ..QgtOptions::default() };
            let exact = qgt_perturbative_with(j, &p, StateSelector::Highest, &opts).map(|q| q.metric()).unwrap_or(nan);
            let hp = hp_highest_metric(j, &p).map(|h| h.metric()).unwrap_or(nan);
            let branch = if broken { Branch::Broken } else { Branch::Symmetric };
            let coherent = coherent_qgt_closed_form(j, &p, branch).map(|c| c.qgt.metric()).unwrap_or(nan);
            let r = with_r.then(|| {
                let re = crate::analysis::evaluate(j, &p, StateSelector::Highest, Quantity::R).unwrap_or(f64::NAN);
                let hm = |x: [f64; 2]| -> Result<[f64; 3]> { Ok(hp_highest_metric(j, &ModelParams::new(x[0], x[1]))?.metric()) };
                let rh = scalar_curvature_at(&hm, [ox, xi_y], 1e-3).unwrap_or(f64::NAN);
                let rc = if broken { 4.0 / jj } else { f64::NAN };
                [re, rh, rc]
            });
            CompareRow { omega_x: ox, xi_y, phase: if broken { "broken" } else { "symmetric" }, exact, hp, coherent, r }
        })
        .collect();
    let mut header = vec![
        "omega_x", "xi_y", "phase", "exact_g11", "exact_g12", "exact_g22", "hp_g11", "hp_g12", "hp_g22", "coherent_g11",
        "coherent_g12", "coherent_g22",
    ];
    if with_r {
        header.extend(["exact_R", "hp_R", "coherent_R"]);
    }
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![format_f64(r.omega_x), format_f64(r.xi_y), r.phase.to_string()];
            v.extend(r.exact.iter().chain(&r.hp).chain(&r.coherent).map(|x| format_f64(*x)));
            if let Some(rr) = r.r {
                v.extend(rr.iter().map(|x| format_f64(*x)));
            }
            v
        })
        .collect();
    write_table(output, &header, &table, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!("0:8:81".parse::<Range>().unwrap(), Range { start: 0.0, stop: 8.0, count: 81 });
        assert_eq!("-6:6:3".parse::<Range>().unwrap().values(), vec![-6.0, 0.0, 6.0]);
        assert_eq!("2.5".parse::<Range>().unwrap().count, 1);
        assert!("1:0:5".parse::<Range>().is_err());
        assert!("0:1:0".parse::<Range>().is_err());
        assert!("0:1".parse::<Range>().is_err());
        assert!("0:1:1".parse::<Range>().is_err());
    }

    #[test]
    fn text_numbers() {
        assert_eq!(fmt_text(0.25), "0.25");
        assert_eq!(fmt_text(-0.0), "0");
        assert_eq!(fmt_text(2.2737367544323206e-13), "2.2737367544323206e-13");
        assert_eq!(fmt_text(f64::NAN), "NaN");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["lmg", "qgt", "--j", "0.5"]), 2);
        assert_eq!(run(["lmg", "qgt", "--j", "0.3", "--omega-x", "0", "--xi-y", "1"]), 2);
        assert_eq!(run(["lmg", "mesh", "--j", "2", "--omega-x", "1:0:3", "--xi-y", "0:1:3"]), 2);
        assert_eq!(run(["lmg", "--threads", "0", "hp", "emax", "--omega-x", "0", "--xi-y", "1"]), 2);
        assert_eq!(run(["lmg", "frobnicate"]), 2);
    }

    #[test]
    fn computation_errors_exit_1() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.txt");
        let o = out.to_str().unwrap();
        assert_eq!(run(["lmg", "hp", "broken", "--j", "8", "--omega-x", "6", "--xi-y", "2.3", "--out", o]), 1);
        assert_eq!(run(["lmg", "qgt", "--j", "2", "--omega-x", "0", "--xi-y", "1", "--state", "9", "--out", o]), 1);
        assert_eq!(run(["lmg", "curvature", "--in", "/nonexistent/f.csv", "--out", o]), 1);
        assert_eq!(run(["lmg", "hp", "emax", "--omega-x", "0", "--xi-y", "1", "--out", o]), 0);
    }
}

//! Peaks along parameter cuts and least-squares fits of finite-size scaling.

use faer::prelude::*;
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::scalar_curvature_at;
use crate::qgt::qgt_perturbative;
use crate::spectral::StateSelector;
use crate::spin::{ModelParams, SpinMagnitude};
use crate::util::linspace;

/// Step of the pointwise curvature stencil used on cuts. Near the separatrix
/// the metric varies on a scale that shrinks with `j`, so the step does too.
pub fn cut_curvature_step(j: SpinMagnitude) -> f64 {
    (0.128 / j.j()).min(1e-3)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub j: Option<f64>,
    pub fixed: Vec<(String, f64)>,
    pub quantity: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub abscissa: Vec<f64>,
    pub ordinate: Vec<f64>,
    pub meta: CurveMeta,
}

impl Curve {
    pub fn new(abscissa: Vec<f64>, ordinate: Vec<f64>) -> Result<Self> {
        Self::with_meta(abscissa, ordinate, CurveMeta::default())
    }

    pub fn with_meta(abscissa: Vec<f64>, ordinate: Vec<f64>, meta: CurveMeta) -> Result<Self> {
        if abscissa.len() != ordinate.len() {
            return Err(Error::InvalidCurve(format!(
                "{} abscissae for {} ordinates",
                abscissa.len(),
                ordinate.len()
            )));
        }
        if abscissa.len() < 3 {
            return Err(Error::InvalidCurve(format!("need at least 3 points, got {}", abscissa.len())));
        }
        let up = abscissa[1] > abscissa[0];
        if abscissa.windows(2).any(|w| if up { !(w[1] > w[0]) } else { !(w[1] < w[0]) }) {
            return Err(Error::InvalidCurve("abscissa is not strictly monotone".into()));
        }
        if abscissa.iter().chain(&ordinate).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve("non-finite value".into()));
        }
        Ok(Self { abscissa, ordinate, meta })
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
}

impl std::str::FromStr for ExtremumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(ExtremumKind::Max),
            "min" => Ok(ExtremumKind::Min),
            _ => Err(Error::Domain(format!("extremum kind must be max or min, got {s:?}"))),
        }
    }
}

/// Interior extremum `(location, value)`, refined by the parabola through the
/// discrete extremum and its neighbours.
pub fn extract_extremum(c: &Curve, kind: ExtremumKind) -> Result<(f64, f64)> {
    let sign = match kind {
        ExtremumKind::Max => 1.0,
        ExtremumKind::Min => -1.0,
    };
    let mut k = 0;
    for (i, &y) in c.ordinate.iter().enumerate() {
        if sign * y > sign * c.ordinate[k] {
            k = i;
        }
    }
    if k == 0 || k + 1 == c.len() {
        return Err(Error::ExtremumOnBoundary(k));
    }
    let (x0, x1, x2) = (c.abscissa[k - 1], c.abscissa[k], c.abscissa[k + 1]);
    let (y0, y1, y2) = (c.ordinate[k - 1], c.ordinate[k], c.ordinate[k + 1]);
    // Newton form y = y1 + a (x − x1) + b (x − x1)²
    let d0 = (y1 - y0) / (x1 - x0);
    let d2 = (y2 - y1) / (x2 - x1);
    let b = (d2 - d0) / (x2 - x0);
    if b == 0.0 {
        return Ok((x1, y1));
    }
    let a = d0 + b * (x1 - x0);
    let t = (-a / (2.0 * b)).clamp(x0 - x1, x2 - x1);
    Ok((x1 + t, y1 + a * t + b * t * t))
}

/// Named fit forms. Parameters in the order listed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `a + b x`
    Linear,
    /// `a + b x^(−d)`
    PowerLaw,
    /// `a + b (x − c)^(−d)`
    ShiftedPowerLaw,
    /// `a + b (x² − c)^(−d)`
    ShiftedSquarePowerLaw,
    /// `a + b (x − c)^(−2)`
    InverseSquare,
    /// `a + b e^(c x)`
    Exponential,
    /// `ln y = a + b ln x`
    LogLinear,
    /// `1/(a + b x)`
    ReciprocalLinear,
    /// `(a + b x)²`
    SquaredLinear,
}

impl FitModel {
    pub const ALL: [FitModel; 9] = [
        FitModel::Linear,
        FitModel::PowerLaw,
        FitModel::ShiftedPowerLaw,
        FitModel::ShiftedSquarePowerLaw,
        FitModel::InverseSquare,
        FitModel::Exponential,
        FitModel::LogLinear,
        FitModel::ReciprocalLinear,
        FitModel::SquaredLinear,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FitModel::Linear => "linear",
            FitModel::PowerLaw => "power_law",
            FitModel::ShiftedPowerLaw => "shifted_power_law",
            FitModel::ShiftedSquarePowerLaw => "shifted_square_power_law",
            FitModel::InverseSquare => "inverse_square",
            FitModel::Exponential => "exponential",
            FitModel::LogLinear => "log_linear",
            FitModel::ReciprocalLinear => "reciprocal_linear",
            FitModel::SquaredLinear => "squared_linear",
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            FitModel::Linear | FitModel::LogLinear | FitModel::ReciprocalLinear | FitModel::SquaredLinear => 2,
            FitModel::PowerLaw | FitModel::InverseSquare | FitModel::Exponential => 3,
            FitModel::ShiftedPowerLaw | FitModel::ShiftedSquarePowerLaw => 4,
        }
    }

    /// Model value and gradient with respect to the parameters. For
    /// [`FitModel::LogLinear`] this is the value of `ln y`.
    fn eval(&self, p: &[f64], x: f64, grad: &mut [f64]) -> f64 {
        match self {
            FitModel::Linear | FitModel::LogLinear => {
                let x = if *self == FitModel::LogLinear { x.ln() } else { x };
                grad[0] = 1.0;
                grad[1] = x;
                p[0] + p[1] * x
            }
            FitModel::PowerLaw => {
                let t = x.powf(-p[2]);
                grad[0] = 1.0;
                grad[1] = t;
                grad[2] = -p[1] * t * x.ln();
                p[0] + p[1] * t
            }
            FitModel::ShiftedPowerLaw | FitModel::ShiftedSquarePowerLaw => {
                let base = if *self == FitModel::ShiftedPowerLaw { x } else { x * x };
                let u = base - p[2];
                let t = u.powf(-p[3]);
                grad[0] = 1.0;
                grad[1] = t;
                grad[2] = p[1] * p[3] * t / u;
                grad[3] = -p[1] * t * u.ln();
                p[0] + p[1] * t
            }
            FitModel::InverseSquare => {
                let u = x - p[2];
                grad[0] = 1.0;
                grad[1] = 1.0 / (u * u);
                grad[2] = 2.0 * p[1] / (u * u * u);
                p[0] + p[1] / (u * u)
            }
            FitModel::Exponential => {
                let e = (p[2] * x).exp();
                grad[0] = 1.0;
                grad[1] = e;
                grad[2] = p[1] * x * e;
                p[0] + p[1] * e
            }
            FitModel::ReciprocalLinear => {
                let v = 1.0 / (p[0] + p[1] * x);
                grad[0] = -v * v;
                grad[1] = -v * v * x;
                v
            }
            FitModel::SquaredLinear => {
                let l = p[0] + p[1] * x;
                grad[0] = 2.0 * l;
                grad[1] = 2.0 * l * x;
                l * l
            }
        }
    }

    /// Model value at `x` (for [`FitModel::LogLinear`], `y` itself).
    pub fn predict(&self, p: &[f64], x: f64) -> f64 {
        let mut g = [0.0; 4];
        let v = self.eval(p, x, &mut g);
        if *self == FitModel::LogLinear {
            v.exp()
        } else {
            v
        }
    }
}

impl std::str::FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FitModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown fit model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model_name: String,
    pub parameters: Vec<f64>,
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    /// The result itself if converged, otherwise [`Error::FitNoConvergence`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::FitNoConvergence { iterations: self.iterations })
        }
    }
}

const MAX_ITERATIONS: usize = 2000;

/// Damped least squares (Levenberg-Marquardt).
///
/// Converged when an accepted step changes every parameter by less than
/// `1e-10` relative, or the residual vanishes. Otherwise the best parameters
/// found are returned with `converged = false`.
pub fn fit_model(data: &Curve, model: FitModel, initial: &[f64]) -> Result<FitResult> {
    let np = model.n_params();
    if initial.len() != np {
        return Err(Error::Domain(format!("{} needs {np} initial parameters, got {}", model.name(), initial.len())));
    }
    if data.len() < np + 1 {
        return Err(Error::InvalidCurve(format!("{} needs at least {} points, got {}", model.name(), np + 1, data.len())));
    }
    let target: Vec<f64> = if model == FitModel::LogLinear {
        if data.ordinate.iter().chain(&data.abscissa).any(|&v| v <= 0.0) {
            return Err(Error::Domain("log-linear fit needs positive data".into()));
        }
        data.ordinate.iter().map(|y| y.ln()).collect()
    } else {
        data.ordinate.clone()
    };

    let n = data.len();
    let residuals = |p: &[f64], jac: Option<&mut Mat<f64>>| -> (Vec<f64>, f64) {
        let mut g = [0.0; 4];
        let mut r = vec![0.0; n];
        let mut cost = 0.0;
        let mut jm = jac;
        for i in 0..n {
            let v = model.eval(p, data.abscissa[i], &mut g);
            r[i] = v - target[i];
            cost += r[i] * r[i];
            if let Some(jm) = jm.as_deref_mut() {
                for k in 0..np {
                    jm[(i, k)] = g[k];
                }
            }
        }
        (r, if cost.is_finite() { cost } else { f64::INFINITY })
    };

    let mut p = initial.to_vec();
    let mut jac = Mat::<f64>::zeros(n, np);
    let (mut r, mut cost) = residuals(&p, Some(&mut jac));
    if !cost.is_finite() {
        return Err(Error::Domain(format!("{} is undefined at the initial parameters", model.name())));
    }
    let mut lambda = 1e-3;
    let mut converged = cost == 0.0;
    let mut it = 0;
    while !converged && it < MAX_ITERATIONS {
        it += 1;
        let jtj = jac.transpose() * &jac;
        let jtr: Mat<f64> = jac.transpose() * Mat::from_fn(n, 1, |i, _| r[i]);
        let mut accepted = false;
        while lambda < 1e20 {
            let a = Mat::from_fn(np, np, |i, k| jtj[(i, k)] + if i == k { lambda * jtj[(i, i)].max(1e-300) } else { 0.0 });
            let step = a.partial_piv_lu().solve(&jtr);
            let trial: Vec<f64> = (0..np).map(|k| p[k] - step[(k, 0)]).collect();
            let (_, c) = residuals(&trial, None);
            if c.is_finite() && c <= cost {
                let small = (0..np).all(|k| step[(k, 0)].abs() <= 1e-10 * trial[k].abs().max(1e-300));
                p = trial;
                let (r2, c2) = residuals(&p, Some(&mut jac));
                r = r2;
                cost = c2;
                lambda = (lambda * 0.3).max(1e-15);
                accepted = true;
                converged = small || cost == 0.0;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left at machine precision
            converged = true;
        }
    }
    Ok(FitResult {
        model_name: model.name().to_string(),
        parameters: p,
        residual_rms: (cost / n as f64).sqrt(),
        converged,
        iterations: it,
    })
}

/// Quantity sampled along cuts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    G11,
    G12,
    G22,
    DetG,
    R,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::G11 => "g11",
            Quantity::G12 => "g12",
            Quantity::G22 => "g22",
            Quantity::DetG => "det_g",
            Quantity::R => "R",
        }
    }
}

impl std::str::FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g11" => Ok(Quantity::G11),
            "g12" => Ok(Quantity::G12),
            "g22" => Ok(Quantity::G22),
            "det_g" | "det" => Ok(Quantity::DetG),
            "R" | "r" => Ok(Quantity::R),
            _ => Err(Error::Domain(format!("unknown quantity {s:?}"))),
        }
    }
}

/// Exact-diagonalization value of `q` at `p`.
pub fn evaluate(j: SpinMagnitude, p: &ModelParams, state: StateSelector, q: Quantity) -> Result<f64> {
    if q == Quantity::R {
        let m = |x: [f64; 2]| -> Result<[f64; 3]> {
            Ok(qgt_perturbative(j, &ModelParams { omega_x: x[0], xi_y: x[1], ..*p }, state)?.metric())
        };
        return scalar_curvature_at(&m, [p.omega_x, p.xi_y], cut_curvature_step(j));
    }
    let g = qgt_perturbative(j, p, state)?;
    Ok(match q {
        Quantity::G11 => g.g11,
        Quantity::G12 => g.g12,
        Quantity::G22 => g.g22,
        Quantity::DetG => g.det_g,
        Quantity::R => unreachable!(),
    })
}

/// Cut along `Ωx` at fixed `ξy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutSpec {
    pub xi_y: f64,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub state: StateSelector,
}

impl CutSpec {
    pub fn params(&self) -> Result<Vec<ModelParams>> {
        if self.count < 3 || !(self.start < self.stop) {
            return Err(Error::InvalidGrid(format!(
                "cut {}:{}:{} needs start < stop and at least 3 points",
                self.start, self.stop, self.count
            )));
        }
        Ok(linspace(self.start, self.stop, self.count).into_iter().map(|ox| ModelParams::new(ox, self.xi_y)).collect())
    }
}

/// Samples `q` along the cut.
pub fn sample_cut(j: SpinMagnitude, cut: &CutSpec, q: Quantity) -> Result<Curve> {
    let ps = cut.params()?;
    let ys = ps.iter().map(|p| evaluate(j, p, cut.state, q)).collect::<Result<Vec<_>>>()?;
    let meta = CurveMeta { j: Some(j.j()), fixed: vec![("xi_y".into(), cut.xi_y)], quantity: q.name().into() };
    Curve::with_meta(ps.iter().map(|p| p.omega_x).collect(), ys, meta)
}

/// What a scaling study records for each `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ScalingQuery {
    /// Extremum along a cut, re-sampled `zoom` times on ±1 step around the
    /// current discrete extremum with the same number of points.
    Peak { cut: CutSpec, kind: ExtremumKind, zoom: usize },
    /// Value at a fixed point.
    Point { omega_x: f64, xi_y: f64, state: StateSelector },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub j: f64,
    pub location: f64,
    pub value: f64,
}

/// Peak of `q` along `cut`, with zoom passes.
pub fn find_peak(j: SpinMagnitude, cut: &CutSpec, q: Quantity, kind: ExtremumKind, zoom: usize) -> Result<(f64, f64)> {
    let mut c = *cut;
    let mut curve = sample_cut(j, &c, q)?;
    let mut best = extract_extremum(&curve, kind)?;
    for _ in 0..zoom {
        let step = (c.stop - c.start) / (c.count - 1) as f64;
        let k = nearest(&curve.abscissa, best.0);
        let centre = curve.abscissa[k];
        c = CutSpec { start: centre - step, stop: centre + step, ..c };
        curve = sample_cut(j, &c, q)?;
        best = extract_extremum(&curve, kind)?;
    }
    Ok(best)
}

fn nearest(xs: &[f64], x: f64) -> usize {
    let mut k = 0;
    for (i, v) in xs.iter().enumerate() {
        if (v - x).abs() < (xs[k] - x).abs() {
            k = i;
        }
    }
    k
}

/// One row per `j`, computed in parallel and returned in input order.
pub fn scaling_study(j_list: &[SpinMagnitude], query: &ScalingQuery, q: Quantity) -> Result<Vec<ScalingRow>> {
    j_list
        .par_iter()
        .map(|&j| match *query {
            ScalingQuery::Peak { cut, kind, zoom } => {
                let (location, value) = find_peak(j, &cut, q, kind, zoom)?;
                Ok(ScalingRow { j: j.j(), location, value })
            }
            ScalingQuery::Point { omega_x, xi_y, state } => {
                let value = evaluate(j, &ModelParams::new(omega_x, xi_y), state, q)?;
                Ok(ScalingRow { j: j.j(), location: omega_x, value })
            }
        })
        .collect()
}

/// Rows as a curve of `value` against `j`.
pub fn rows_to_curve(rows: &[ScalingRow], quantity: &str) -> Result<Curve> {
    let meta = CurveMeta { j: None, fixed: vec![], quantity: quantity.into() };
    Curve::with_meta(rows.iter().map(|r| r.j).collect(), rows.iter().map(|r| r.value).collect(), meta)
}

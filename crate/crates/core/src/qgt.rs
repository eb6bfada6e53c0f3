//! Quantum geometric tensor of a selected eigenstate.
//!
//! `Q_ij = Σ_{m≠n} <n|∂_i H|m><m|∂_j H|n> / (E_m − E_n)²` over the coordinates
//! `x = (Ωx, ξy)`. The metric is `g_ij = Re Q_ij` and the Berry curvature is
//! `F12 = −2 Im Q12`.
//!
//! Two evaluations of the sum are provided. [`Method::Dense`] uses the full
//! eigendecomposition of `H` and rejects states whose gap to any other level is
//! below the degeneracy guard. [`Method::ParityResolved`] (the default) works in
//! the rotated frame of [`ParityResolved`]: writing `|n> = e^{-iβJy}|n0>`,
//!
//! `Q_ij = β_i β_j <n0|Jy²|n0> + Σ_{b≠n0, same parity} <n0|A_i|b><b|A_j|n0> / (E_b − E_n)²`
//!
//! with `A_1 = (Ωx/r) Jz`, `A_2 = Jy²/j`, `β_1 = Ω/r²`, `β_2 = 0`. Terms between
//! opposite parities have their energy denominators cancel exactly, so the
//! tunnelling-split doublets of the broken phase, whose splitting is far below
//! double precision, contribute without loss of accuracy.
//!
//! [`qgt_overlap_oracle`] is an independent check from fidelities of
//! neighbouring eigenvectors.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{ParityResolved, Spectrum, StateSelector};
use crate::spin::{jy2_bands, ModelParams, SpinMagnitude};
use crate::util::KahanSum;

/// Default relative degeneracy guard.
pub const DEFAULT_DEGENERACY_GUARD: f64 = 1e-12;
/// Default step of the overlap oracle.
pub const DEFAULT_OVERLAP_DELTA: f64 = 1e-4;
/// Overlap below which state tracking is declared lost.
const TRACKING_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    ParityResolved,
    Dense,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "parity" | "parity-resolved" => Ok(Method::ParityResolved),
            "dense" => Ok(Method::Dense),
            _ => Err(format!("unknown method {s:?} (expected parity or dense)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QgtOptions {
    pub method: Method,
    /// Gaps at or below `guard × (E_max − E_min)` are treated as degenerate.
    pub degeneracy_guard: f64,
    /// When set, the term of the closest opposite-parity level is dropped if
    /// its gap is below this fraction of the spectral width. This gives the
    /// metric of the symmetry-broken state inside a quasi-degenerate doublet.
    /// Only used by [`Method::ParityResolved`].
    pub drop_partner_below: Option<f64>,
}

impl Default for QgtOptions {
    fn default() -> Self {
        Self { method: Method::ParityResolved, degeneracy_guard: DEFAULT_DEGENERACY_GUARD, drop_partner_below: None }
    }
}

/// Geometric tensor at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QgtPoint {
    pub params: ModelParams,
    pub state: StateSelector,
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
    /// `None` when the method cannot recover the Berry curvature.
    pub f12: Option<f64>,
    pub det_g: f64,
    /// Smallest `|E_m − E_n|` over the other levels of the spectrum.
    pub min_gap: f64,
}

impl QgtPoint {
    pub fn metric(&self) -> [f64; 3] {
        [self.g11, self.g12, self.g22]
    }

    /// Eigenvalues of the 2×2 metric, ascending.
    pub fn metric_eigenvalues(&self) -> [f64; 2] {
        sym2_eigenvalues(self.g11, self.g12, self.g22)
    }
}

pub(crate) fn sym2_eigenvalues(a: f64, b: f64, c: f64) -> [f64; 2] {
    let mean = 0.5 * (a + c);
    let rad = (0.5 * (a - c)).hypot(b);
    [mean - rad, mean + rad]
}

fn point(params: ModelParams, state: StateSelector, g: [f64; 3], f12: Option<f64>, min_gap: f64) -> QgtPoint {
    QgtPoint { params, state, g11: g[0], g12: g[1], g22: g[2], f12, det_g: g[0] * g[2] - g[1] * g[1], min_gap }
}

/// QGT by the spectral sum with default options.
pub fn qgt_perturbative(j: SpinMagnitude, p: &ModelParams, sel: StateSelector) -> Result<QgtPoint> {
    qgt_perturbative_with(j, p, sel, &QgtOptions::default())
}

pub fn qgt_perturbative_with(j: SpinMagnitude, p: &ModelParams, sel: StateSelector, opts: &QgtOptions) -> Result<QgtPoint> {
    p.validate()?;
    match opts.method {
        Method::ParityResolved => parity_qgt(j, p, sel, opts),
        Method::Dense => dense_qgt(j, p, sel, opts.degeneracy_guard),
    }
}

/// `y = B x` for the banded `Jy²` restricted to a parity block.
fn jy2_block_apply(basis: &[usize], diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
    let n = basis.len();
    (0..n)
        .map(|a| {
            let mut y = diag[basis[a]] * x[a];
            if a > 0 {
                y += off[basis[a - 1]] * x[a - 1];
            }
            if a + 1 < n {
                y += off[basis[a]] * x[a + 1];
            }
            y
        })
        .collect()
}

/// `Vᵀ w` for the columns of a block eigenvector matrix.
fn project(v: &faer::Mat<f64>, w: &[f64]) -> Vec<f64> {
    let n = w.len();
    (0..v.ncols())
        .map(|b| {
            let mut s = 0.0;
            for a in 0..n {
                s += v[(a, b)] * w[a];
            }
            s
        })
        .collect()
}

fn parity_qgt(j: SpinMagnitude, p: &ModelParams, sel: StateSelector, opts: &QgtOptions) -> Result<QgtPoint> {
    let pr = ParityResolved::new(j, p)?;
    let (s, n) = pr.locate(sel)?;
    let sec = &pr.sectors[s];
    let other = &pr.sectors[1 - s];
    let e_n = sec.eigenvalues[n];

    let all = pr.eigenvalues();
    let width = all[all.len() - 1] - all[0];
    let guard = opts.degeneracy_guard * width;

    let v: Vec<f64> = (0..sec.len()).map(|a| sec.eigenvectors[(a, n)]).collect();
    let (jd, joff) = jy2_bands(j);
    let inv_j = 1.0 / j.j();
    let jy2v = jy2_block_apply(&sec.basis, &jd, &joff, &v);
    let w1: Vec<f64> = sec.basis.iter().zip(&v).map(|(&k, &x)| p.omega_x / pr.r * j.m(k) * x).collect();
    let c1 = project(&sec.eigenvectors, &w1);
    let c2: Vec<f64> = project(&sec.eigenvectors, &jy2v).into_iter().map(|x| x * inv_j).collect();

    let mut sums = [KahanSum::default(); 3];
    let mut min_same = f64::INFINITY;
    for b in 0..sec.len() {
        if b == n {
            continue;
        }
        let gap = sec.eigenvalues[b] - e_n;
        min_same = min_same.min(gap.abs());
        let g2 = gap * gap;
        sums[0].add(c1[b] * c1[b] / g2);
        sums[1].add(c1[b] * c2[b] / g2);
        sums[2].add(c2[b] * c2[b] / g2);
    }
    if min_same <= guard {
        return Err(Error::DegenerateState { gap: min_same, guard });
    }

    let jy2_exp: f64 = v.iter().zip(&jy2v).map(|(a, b)| a * b).sum();
    let beta1 = p.omega / (pr.r * pr.r);
    let mut rot = jy2_exp;

    let mut min_other = f64::INFINITY;
    let mut partner = None;
    for (b, &e) in other.eigenvalues.iter().enumerate() {
        let gap = (e - e_n).abs();
        if gap < min_other {
            min_other = gap;
            partner = Some(b);
        }
    }
    if let (Some(frac), Some(b)) = (opts.drop_partner_below, partner) {
        if min_other < frac * width {
            let amp = jy_element(&pr, 1 - s, b, s, n);
            rot -= amp * amp;
        }
    }

    let g = [sums[0].value() + beta1 * beta1 * rot, sums[1].value(), sums[2].value()];
    Ok(point(*p, sel, g, Some(0.0), min_same.min(min_other)))
}

/// `<a|K|b>` between `H0` eigenvectors, with `K = (J+ − J−)/2` so that
/// `|<a|Jy|b>| = |<a|K|b>|`.
fn jy_element(pr: &ParityResolved, sa: usize, la: usize, sb: usize, lb: usize) -> f64 {
    let j = pr.j;
    let a = pr.h0_vector(sa, la);
    let b = pr.h0_vector(sb, lb);
    let d = j.dim();
    let mut s = KahanSum::default();
    for k in 0..d {
        let mut kb = 0.0;
        if k > 0 {
            kb += 0.5 * j.raising(j.m(k - 1)) * b[k - 1];
        }
        if k + 1 < d {
            kb -= 0.5 * j.raising(j.m(k)) * b[k + 1];
        }
        s.add(a[k] * kb);
    }
    s.value()
}

fn dense_qgt(j: SpinMagnitude, p: &ModelParams, sel: StateSelector, rel_guard: f64) -> Result<QgtPoint> {
    let spec = Spectrum::of_model(j, p)?;
    let n = sel.resolve(spec.dim())?;
    let d = spec.dim();
    let ev = &spec.eigenvalues;
    let width = ev[d - 1] - ev[0];
    let guard = rel_guard * width;

    let v = spec.eigenvector(n);
    let (jd, joff) = jy2_bands(j);
    let inv_j = 1.0 / j.j();
    let mut w1 = vec![0.0; d];
    let mut w2 = vec![0.0; d];
    for k in 0..d {
        let mut x = 0.0;
        if k > 0 {
            x += 0.5 * j.raising(j.m(k - 1)) * v[k - 1];
        }
        if k + 1 < d {
            x += 0.5 * j.raising(j.m(k)) * v[k + 1];
        }
        w1[k] = x;
        let mut y = jd[k] * v[k];
        if k >= 2 {
            y += joff[k - 2] * v[k - 2];
        }
        if k + 2 < d {
            y += joff[k] * v[k + 2];
        }
        w2[k] = y * inv_j;
    }
    let c1 = project(&spec.eigenvectors, &w1);
    let c2 = project(&spec.eigenvectors, &w2);

    let mut min_gap = f64::INFINITY;
    for m in 0..d {
        if m != n {
            min_gap = min_gap.min((ev[m] - ev[n]).abs());
        }
    }
    if min_gap <= guard {
        return Err(Error::DegenerateState { gap: min_gap, guard });
    }
    let mut sums = [KahanSum::default(); 3];
    for m in 0..d {
        if m == n {
            continue;
        }
        let g2 = (ev[m] - ev[n]).powi(2);
        sums[0].add(c1[m] * c1[m] / g2);
        sums[1].add(c1[m] * c2[m] / g2);
        sums[2].add(c2[m] * c2[m] / g2);
    }
    let g = [sums[0].value(), sums[1].value(), sums[2].value()];
    Ok(point(*p, sel, g, Some(0.0), min_gap))
}

/// Eigenvector at a displaced point, followed by maximal overlap with `reference`.
fn tracked_vector(j: SpinMagnitude, p: &ModelParams, reference: &[f64]) -> Result<Vec<f64>> {
    let spec = Spectrum::of_model(j, p)?;
    let ov = project(&spec.eigenvectors, reference);
    let (best, val) = ov
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (k, &o)| if o.abs() > acc.1.abs() { (k, o) } else { acc });
    if val.abs() < TRACKING_THRESHOLD {
        return Err(Error::StateTrackingLost(val.abs()));
    }
    let sign = val.signum();
    Ok(spec.eigenvector(best).into_iter().map(|x| x * sign).collect())
}

/// `1 − |<a|b>|` computed as `‖a − b‖²/2` for phase-aligned unit vectors.
fn infidelity(a: &[f64], b: &[f64]) -> f64 {
    let mut s = KahanSum::default();
    for (x, y) in a.iter().zip(b) {
        s.add((x - y) * (x - y));
    }
    0.5 * s.value()
}

/// Metric from fidelities of neighbouring eigenvectors.
///
/// Along a direction `u` the symmetric combination of `1 − |<n(x)|n(x ± δu)>|`
/// gives `g(u,u)` to second order in `δ`; one Richardson step with `δ/2`
/// removes the leading error. `g12` comes from the diagonal direction. The
/// Berry curvature is not recoverable from overlap moduli and is reported as
/// `None`.
pub fn qgt_overlap_oracle(j: SpinMagnitude, p: &ModelParams, sel: StateSelector, delta: f64) -> Result<QgtPoint> {
    p.validate()?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("overlap step must be positive, got {delta}")));
    }
    let spec = Spectrum::of_model(j, p)?;
    let n = sel.resolve(spec.dim())?;
    let v0 = spec.eigenvector(n);
    let mut min_gap = f64::INFINITY;
    for (m, e) in spec.eigenvalues.iter().enumerate() {
        if m != n {
            min_gap = min_gap.min((e - spec.eigenvalues[n]).abs());
        }
    }

    let along = |u: (f64, f64), h: f64| -> Result<f64> {
        let plus = tracked_vector(j, &p.offset(u.0 * h, u.1 * h), &v0)?;
        let minus = tracked_vector(j, &p.offset(-u.0 * h, -u.1 * h), &v0)?;
        Ok((infidelity(&v0, &plus) + infidelity(&v0, &minus)) / (h * h))
    };
    let richardson = |u: (f64, f64)| -> Result<f64> {
        let coarse = along(u, delta)?;
        let fine = along(u, 0.5 * delta)?;
        Ok((4.0 * fine - coarse) / 3.0)
    };
    let g11 = richardson((1.0, 0.0))?;
    let g22 = richardson((0.0, 1.0))?;
    let gd = richardson((1.0, 1.0))?;
    let g12 = 0.5 * (gd - g11 - g22);
    Ok(point(*p, sel, [g11, g12, g22], None, min_gap))
}

/// Rectangular parameter mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub omega_x: Vec<f64>,
    pub xi_y: Vec<f64>,
    pub omega: f64,
}

impl Grid {
    pub fn new(omega_x: Vec<f64>, xi_y: Vec<f64>) -> Result<Self> {
        check_axis(&omega_x, "omega_x")?;
        check_axis(&xi_y, "xi_y")?;
        Ok(Self { omega_x, xi_y, omega: 1.0 })
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn nx(&self) -> usize {
        self.omega_x.len()
    }

    pub fn ny(&self) -> usize {
        self.xi_y.len()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index with `Ωx` fastest.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx() + ix
    }

    pub fn params(&self, ix: usize, iy: usize) -> ModelParams {
        ModelParams { omega: self.omega, omega_x: self.omega_x[ix], xi_y: self.xi_y[iy] }
    }
}

fn check_axis(v: &[f64], name: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} axis is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid(format!("{name} axis has non-finite values")));
    }
    let inc = v.windows(2).all(|w| w[1] > w[0]);
    let dec = v.windows(2).all(|w| w[1] < w[0]);
    if !(inc || dec) {
        return Err(Error::InvalidGrid(format!("{name} axis is not strictly monotone")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshMethod {
    Perturbative(QgtOptions),
    Overlap { delta: f64 },
}

impl Default for MeshMethod {
    fn default() -> Self {
        MeshMethod::Perturbative(QgtOptions::default())
    }
}

/// Tensor on every node of a grid; failed nodes keep their error.
#[derive(Debug, Clone)]
pub struct QgtField {
    pub grid: Grid,
    pub nodes: Vec<Result<QgtPoint>>,
}

impl QgtField {
    pub fn node(&self, ix: usize, iy: usize) -> &Result<QgtPoint> {
        &self.nodes[self.grid.index(ix, iy)]
    }
}

/// Evaluates every grid node in parallel. The output order is the grid order
/// regardless of scheduling.
pub fn qgt_mesh(j: SpinMagnitude, grid: &Grid, sel: StateSelector, method: MeshMethod) -> QgtField {
    let nx = grid.nx();
    let nodes = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let p = grid.params(idx % nx, idx / nx);
            match method {
                MeshMethod::Perturbative(opts) => qgt_perturbative_with(j, &p, sel, &opts),
                MeshMethod::Overlap { delta } => qgt_overlap_oracle(j, &p, sel, delta),
            }
        })
        .collect();
    QgtField { grid: grid.clone(), nodes }
}

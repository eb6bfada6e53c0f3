//! Bloch coherent states and their geometric tensor.
//!
//! `|θ,φ> = Σ_m c_m |j,m>` with
//! `c_m = C(2j, j+m)^{1/2} sin^{j+m}(θ/2) cos^{j−m}(θ/2) e^{−i(j+m)φ}`,
//! so `θ = 0` is `|j,−j>` and `<J>/j = (sinθ cosφ, sinθ sinφ, −cosθ)`.
//! The parameter dependence enters through the angles of the classical
//! maximum on the selected branch.

use faer::c64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qgt::QgtPoint;
use crate::spectral::StateSelector;
use crate::spin::{ModelParams, SpinMagnitude};

/// Step for the central differences of the branch angles.
pub const ANGLE_DELTA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherentState {
    pub j: SpinMagnitude,
    pub theta: f64,
    pub phi: f64,
    /// Amplitudes ordered `m = −j … j`, serialized as `[re, im]` pairs.
    #[serde(serialize_with = "pairs")]
    pub coefficients: Vec<c64>,
}

fn pairs<S: serde::Serializer>(v: &[c64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|z| [z.re, z.im]))
}

/// Stationary point the coherent state sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `x4`, above the separatrix.
    Broken,
    /// `x1`, on or below the separatrix.
    Symmetric,
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "broken" | "x4" => Ok(Branch::Broken),
            "symmetric" | "x1" => Ok(Branch::Symmetric),
            _ => Err(Error::Domain(format!("unknown branch {s:?} (expected broken or symmetric)"))),
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Broken => "broken",
            Branch::Symmetric => "symmetric",
        })
    }
}

/// Coherent-state QGT. `degenerate` marks a metric with zero determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherentQgt {
    pub branch: Branch,
    pub qgt: QgtPoint,
    pub degenerate: bool,
}

/// `ln C(n, k)` by a running sum, exact enough for `n` in the thousands.
fn ln_binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// `C(n,k)^{1/2} a^p b^q` with `0^0 = 1`, evaluated in log space.
fn weighted(lnc: f64, a: f64, p: u32, b: f64, q: u32) -> f64 {
    if (p > 0 && a == 0.0) || (q > 0 && b == 0.0) {
        return 0.0;
    }
    let mut l = 0.5 * lnc;
    let mut sign = 1.0;
    if p > 0 {
        l += p as f64 * a.abs().ln();
        if a < 0.0 && p % 2 == 1 {
            sign = -sign;
        }
    }
    if q > 0 {
        l += q as f64 * b.abs().ln();
        if b < 0.0 && q % 2 == 1 {
            sign = -sign;
        }
    }
    sign * l.exp()
}

pub fn coherent_vector(j: SpinMagnitude, theta: f64, phi: f64) -> Result<CoherentState> {
    if !(theta.is_finite() && phi.is_finite()) {
        return Err(Error::Domain(format!("coherent angles must be finite, got ({theta}, {phi})")));
    }
    let n = j.twice_j();
    let (s, c) = (0.5 * theta).sin_cos();
    let coefficients = (0..=n)
        .map(|k| {
            let amp = weighted(ln_binomial(n, k), s, k, c, n - k);
            c64::cis(-(k as f64) * phi) * amp
        })
        .collect();
    Ok(CoherentState { j, theta, phi, coefficients })
}

/// `(∂θ c_m, ∂φ c_m)`.
fn angle_derivatives(j: SpinMagnitude, theta: f64, phi: f64) -> (Vec<c64>, Vec<c64>) {
    let n = j.twice_j();
    let (s, c) = (0.5 * theta).sin_cos();
    let mut dt = Vec::with_capacity(n as usize + 1);
    let mut dp = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        let lnc = ln_binomial(n, k);
        let ph = c64::cis(-(k as f64) * phi);
        // d/dθ s^k c^(n−k) = (k/2) s^(k−1) c^(n−k+1) − ((n−k)/2) s^(k+1) c^(n−k−1)
        let up = if k > 0 { 0.5 * k as f64 * weighted(lnc, s, k - 1, c, n - k + 1) } else { 0.0 };
        let down = if k < n { 0.5 * (n - k) as f64 * weighted(lnc, s, k + 1, c, n - k - 1) } else { 0.0 };
        dt.push(ph * (up - down));
        dp.push(ph * weighted(lnc, s, k, c, n - k) * c64::new(0.0, -(k as f64)));
    }
    (dt, dp)
}

/// Angles of the classical maximum on `branch`, reduced units.
fn branch_angles(ox: f64, xi: f64, branch: Branch) -> Result<(f64, f64)> {
    let d = 4.0 * xi * xi - ox * ox - 1.0;
    match branch {
        Branch::Broken => {
            if !(d > 0.0 && xi > 0.0) {
                return Err(Error::Domain(format!(
                    "broken branch needs ξy > √(1+Ωx²)/2, got Ωx = {ox}, ξy = {xi}"
                )));
            }
            let theta = (-1.0 / (2.0 * xi)).acos();
            let phi = (ox / (4.0 * xi * xi - 1.0).sqrt()).clamp(-1.0, 1.0).acos();
            Ok((theta, phi))
        }
        Branch::Symmetric => {
            if d > 0.0 && xi > 0.0 {
                return Err(Error::Domain(format!(
                    "symmetric branch needs ξy ≤ √(1+Ωx²)/2, got Ωx = {ox}, ξy = {xi}"
                )));
            }
            // θ = π − arctan Ωx keeps the maximum smooth through Ωx = 0
            Ok((std::f64::consts::PI - ox.atan(), 0.0))
        }
    }
}

/// Angles `(θ, φ)` of the coherent state of `branch` at `p`.
pub fn coherent_angles(p: &ModelParams, branch: Branch) -> Result<(f64, f64)> {
    let (ox, xi, _) = reduced(p)?;
    branch_angles(ox, xi, branch)
}

fn reduced(p: &ModelParams) -> Result<(f64, f64, f64)> {
    p.validate()?;
    if p.omega <= 0.0 {
        return Err(Error::Domain(format!("coherent layer needs Ω > 0, got {}", p.omega)));
    }
    Ok((p.omega_x / p.omega, p.xi_y / p.omega, p.omega))
}

fn finish(p: &ModelParams, branch: Branch, g: [f64; 3], f12: f64, degenerate: bool) -> CoherentQgt {
    let w2 = p.omega * p.omega;
    let [g11, g12, g22] = g.map(|x| x / w2);
    let det_g = if degenerate { 0.0 } else { g11 * g22 - g12 * g12 };
    CoherentQgt {
        branch,
        qgt: QgtPoint {
            params: *p,
            state: StateSelector::Highest,
            g11,
            g12,
            g22,
            f12: Some(f12 / w2),
            det_g,
            min_gap: f64::NAN,
        },
        degenerate,
    }
}

/// QGT from the coefficient derivatives, chained through the branch angles.
pub fn coherent_qgt_numeric(j: SpinMagnitude, p: &ModelParams, branch: Branch) -> Result<CoherentQgt> {
    let (ox, xi, _) = reduced(p)?;
    let (theta, phi) = branch_angles(ox, xi, branch)?;
    let h = ANGLE_DELTA;
    let diff = |u: (f64, f64)| -> Result<[f64; 2]> {
        let a = branch_angles(ox + u.0 * h, xi + u.1 * h, branch)?;
        let b = branch_angles(ox - u.0 * h, xi - u.1 * h, branch)?;
        Ok([(a.0 - b.0) / (2.0 * h), (a.1 - b.1) / (2.0 * h)])
    };
    // jac[i] = (∂θ/∂x_i, ∂φ/∂x_i)
    let jac = [diff((1.0, 0.0))?, diff((0.0, 1.0))?];

    let psi = coherent_vector(j, theta, phi)?.coefficients;
    let (dt, dp) = angle_derivatives(j, theta, phi);
    let dot = |a: &[c64], b: &[c64]| -> c64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let d: [Vec<c64>; 2] = [0, 1].map(|i| {
        dt.iter().zip(&dp).map(|(a, b)| a * jac[i][0] + b * jac[i][1]).collect::<Vec<c64>>()
    });
    let q = |a: usize, b: usize| dot(&d[a], &d[b]) - dot(&d[a], &psi) * dot(&psi, &d[b]);
    let g = [q(0, 0).re, q(0, 1).re, q(1, 1).re];
    let f12 = -2.0 * q(0, 1).im;
    Ok(finish(p, branch, g, f12, branch == Branch::Symmetric))
}

/// Closed-form coherent-state QGT of both branches.
pub fn coherent_qgt_closed_form(j: SpinMagnitude, p: &ModelParams, branch: Branch) -> Result<CoherentQgt> {
    let (ox, xi, _) = reduced(p)?;
    let jj = j.j();
    let d = 4.0 * xi * xi - ox * ox - 1.0;
    match branch {
        Branch::Broken => {
            if d == 0.0 {
                return Err(Error::SingularAt(format!("separatrix (Ωx = {}, ξy = {})", p.omega_x, p.xi_y)));
            }
            branch_angles(ox, xi, branch)?;
            let h = 0.5 * jj;
            let g11 = h * (4.0 * xi * xi - 1.0) / (4.0 * xi * xi * d);
            let g12 = -h * ox / (xi * d);
            let g22 = h * (ox * ox + 1.0) / (xi * xi * d);
            let f12 = -h / (xi * xi * d.sqrt());
            let mut out = finish(p, branch, [g11, g12, g22], f12, false);
            out.qgt.det_g = jj * jj / (16.0 * xi.powi(4) * d) / p.omega.powi(4);
            Ok(out)
        }
        Branch::Symmetric => {
            branch_angles(ox, xi, branch)?;
            let g11 = 0.5 * jj / (1.0 + ox * ox).powi(2);
            Ok(finish(p, branch, [g11, 0.0, 0.0], 0.0, true))
        }
    }
}

/// Branch on which the classical maximum lies at `p`.
pub fn maximum_branch(p: &ModelParams) -> Result<Branch> {
    let (ox, xi, _) = reduced(p)?;
    Ok(if xi > 0.0 && 4.0 * xi * xi - ox * ox - 1.0 > 0.0 { Branch::Broken } else { Branch::Symmetric })
}

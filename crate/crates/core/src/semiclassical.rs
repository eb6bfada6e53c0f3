//! Classical limit: energy surface, stationary points, instability and
//! critical lines.
//!
//! The analytic results below are written for `Ω = 1`. Other positive `Ω` are
//! handled by scaling `(Ωx, ξy) → (Ωx/Ω, ξy/Ω)` and multiplying energies and
//! rates by `Ω`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spin::{ModelParams, SpinMagnitude};

/// Canonical and angular coordinates of a phase-space point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
    pub theta: f64,
    pub phi: f64,
}

impl PhasePoint {
    /// From canonical coordinates; the angles follow from
    /// `Q²+P² = 2(1 − cos θ)` and `(Q, P) ∝ (cos φ, −sin φ)`.
    pub fn from_canonical(q: f64, p: f64) -> Result<Self> {
        let rho2 = q * q + p * p;
        if rho2 > 4.0 * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("Q²+P² = {rho2} exceeds 4")));
        }
        let theta = (1.0 - 0.5 * rho2).clamp(-1.0, 1.0).acos();
        let phi = if rho2 == 0.0 { 0.0 } else { (-p).atan2(q) };
        Ok(Self { q, p, theta, phi })
    }

    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let rho = (2.0 * (1.0 - theta.cos())).max(0.0).sqrt();
        Self { q: rho * phi.cos(), p: -rho * phi.sin(), theta, phi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PointLabel {
    #[serde(rename = "x1")]
    X1,
    #[serde(rename = "x2")]
    X2,
    #[serde(rename = "x3")]
    X3,
    #[serde(rename = "x3'")]
    X3Prime,
    #[serde(rename = "x4")]
    X4,
    #[serde(rename = "x4'")]
    X4Prime,
}

impl std::fmt::Display for PointLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PointLabel::X1 => "x1",
            PointLabel::X2 => "x2",
            PointLabel::X3 => "x3",
            PointLabel::X3Prime => "x3'",
            PointLabel::X4 => "x4",
            PointLabel::X4Prime => "x4'",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    /// Minimum of the energy surface.
    StableCenter,
    /// Maximum of the energy surface.
    UnstableCenter,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub label: PointLabel,
    pub point: PhasePoint,
    /// Energy per spin, `e = h` at the point.
    pub energy: f64,
    pub stability: Stability,
    pub lyapunov: f64,
}

/// Reduced parameters `(Ωx/Ω, ξy/Ω)` and the scale `Ω`.
fn reduced(p: &ModelParams) -> Result<(f64, f64, f64)> {
    p.validate()?;
    if p.omega <= 0.0 {
        return Err(Error::Domain(format!("analytic layer needs Ω > 0, got {}", p.omega)));
    }
    Ok((p.omega_x / p.omega, p.xi_y / p.omega, p.omega))
}

/// `h(Q, P)`, the classical energy per spin.
pub fn classical_energy(p: &ModelParams, q: f64, pp: f64) -> Result<f64> {
    p.validate()?;
    let rho2 = q * q + pp * pp;
    if rho2 > 4.0 {
        return Err(Error::Domain(format!("Q²+P² = {rho2} exceeds 4")));
    }
    let w = 1.0 - rho2 / 4.0;
    Ok(0.5 * p.omega * rho2 - p.omega + p.omega_x * q * w.sqrt() + p.xi_y * pp * pp * w)
}

/// `h(θ, φ) = −Ω cos θ + Ωx sin θ cos φ + ξy sin²θ sin²φ`.
pub fn classical_energy_angles(p: &ModelParams, theta: f64, phi: f64) -> f64 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    -p.omega * ct + p.omega_x * st * cp + p.xi_y * st * st * sp * sp
}

/// `(dQ/dt, dP/dt) = (∂h/∂P, −∂h/∂Q)`.
pub fn equations_of_motion(p: &ModelParams, q: f64, pp: f64) -> Result<(f64, f64)> {
    p.validate()?;
    let rho2 = q * q + pp * pp;
    if rho2 >= 4.0 {
        return Err(Error::Domain(format!("Q²+P² = {rho2} is not below 4")));
    }
    let s = (4.0 - rho2).sqrt();
    let (om, ox, xi) = (p.omega, p.omega_x, p.xi_y);
    let dq = 0.5 * pp * (2.0 * om - xi * (2.0 * pp * pp + q * q - 4.0) - ox * q / s);
    let dp = 0.5 * (xi * pp * pp * q + ox * q * q / s - ox * s - 2.0 * om * q);
    Ok((dq, dp))
}

/// Separatrix `ξy = √(1+Ωx²)/2`.
pub fn separatrix_xi(omega_x: f64) -> f64 {
    0.5 * (1.0 + omega_x * omega_x).sqrt()
}

/// `Ωxc = √(4ξy² − 1)`, defined for `ξy ≥ 1/2`.
pub fn omega_xc(xi_y: f64) -> Result<f64> {
    if !(xi_y >= 0.5) {
        return Err(Error::Domain(format!("critical Ωx needs ξy ≥ 1/2, got {xi_y}")));
    }
    Ok((4.0 * xi_y * xi_y - 1.0).sqrt())
}

/// `E_ESQPT/j = √(1+Ωx²)`.
pub fn esqpt_energy(omega_x: f64) -> f64 {
    (1.0 + omega_x * omega_x).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalLines {
    /// `None` when `ξy < 1/2`.
    pub omega_xc: Option<f64>,
    pub separatrix_xi: f64,
    pub esqpt_energy: f64,
}

pub fn critical_lines(p: &ModelParams) -> Result<CriticalLines> {
    let (ox, xi, om) = reduced(p)?;
    Ok(CriticalLines {
        omega_xc: omega_xc(xi).ok().map(|v| v * om),
        separatrix_xi: separatrix_xi(ox) * om,
        esqpt_energy: esqpt_energy(ox) * om,
    })
}

/// Lyapunov exponent of `x1`: `√(√(1+Ωx²)(2ξy − √(1+Ωx²)))` above the
/// separatrix, zero otherwise.
pub fn lyapunov_exponent(p: &ModelParams) -> Result<f64> {
    let (ox, xi, om) = reduced(p)?;
    let r = (1.0 + ox * ox).sqrt();
    Ok(if 2.0 * xi > r { om * (r * (2.0 * xi - r)).sqrt() } else { 0.0 })
}

/// All stationary points that exist at `p`.
///
/// `x1` sits on the side of the sphere selected by the sign of `Ωx`, so that
/// its energy is `+√(1+Ωx²)` for either sign.
pub fn stationary_points(p: &ModelParams) -> Result<Vec<StationaryPoint>> {
    let (ox, xi, om) = reduced(p)?;
    let r = (1.0 + ox * ox).sqrt();
    let sgn = if ox < 0.0 { -1.0 } else { 1.0 };
    let mut out = Vec::with_capacity(4);

    let x1_lyap = if 2.0 * xi > r { (r * (2.0 * xi - r)).sqrt() } else { 0.0 };
    out.push(StationaryPoint {
        label: PointLabel::X1,
        point: PhasePoint::from_canonical(sgn * (2.0 + 2.0 / r).sqrt(), 0.0)?,
        energy: r * om,
        stability: if 2.0 * xi > r { Stability::Hyperbolic } else { Stability::UnstableCenter },
        lyapunov: x1_lyap * om,
    });
    let x2_lyap = if -2.0 * xi > r { (r * (-2.0 * xi - r)).sqrt() } else { 0.0 };
    out.push(StationaryPoint {
        label: PointLabel::X2,
        point: PhasePoint::from_canonical(-sgn * (2.0 - 2.0 / r).max(0.0).sqrt(), 0.0)?,
        energy: -r * om,
        stability: if -2.0 * xi > r { Stability::Hyperbolic } else { Stability::StableCenter },
        lyapunov: x2_lyap * om,
    });

    let e34 = ((1.0 + ox * ox) / (4.0 * xi) + xi) * om;
    let pair = |q: f64, labels: (PointLabel, PointLabel), stab: Stability, out: &mut Vec<StationaryPoint>| -> Result<()> {
        let den = (xi * (2.0 * xi - 1.0)).sqrt();
        let pm = (4.0 * xi * xi - ox * ox - 1.0).max(0.0).sqrt() / den;
        for (label, pv) in [(labels.0, -pm), (labels.1, pm)] {
            out.push(StationaryPoint {
                label,
                point: PhasePoint::from_canonical(q / den, pv)?,
                energy: e34,
                stability: stab,
                lyapunov: 0.0,
            });
        }
        Ok(())
    };
    if 2.0 * xi <= -r {
        pair(-ox, (PointLabel::X3, PointLabel::X3Prime), Stability::StableCenter, &mut out)?;
    }
    if 2.0 * xi >= r {
        pair(ox, (PointLabel::X4, PointLabel::X4Prime), Stability::UnstableCenter, &mut out)?;
    }
    Ok(out)
}

/// Expectation values per spin in a coherent state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observables {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    /// `<Jy²>/j²`, including the `1/(2j)` fluctuation term.
    pub jy2: f64,
    /// `<H>/j`.
    pub energy: f64,
}

/// Observables in the coherent state `(θ, φ)`, where `θ = 0` is `|j, −j>`.
pub fn coherent_expectations(j: SpinMagnitude, theta: f64, phi: f64, p: &ModelParams) -> Result<Observables> {
    p.validate()?;
    if !(theta.is_finite() && phi.is_finite()) {
        return Err(Error::Domain("non-finite angle".into()));
    }
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let (jx, jy, jz) = (st * cp, st * sp, -ct);
    // <(J·a)²> = j² (a·n)² + (j/2)(1 − (a·n)²) for unit a
    let jy2 = jy * jy + (1.0 - jy * jy) / (2.0 * j.j());
    let energy = p.omega * jz + p.omega_x * jx + p.xi_y * jy2;
    Ok(Observables { jx, jy, jz, jy2, energy })
}

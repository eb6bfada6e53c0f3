//! Truncated Holstein-Primakoff layer.
//!
//! Around the ground state and around the highest state of the symmetric
//! phase the metric has closed forms. In the broken phase the quadratic
//! Hamiltonian is known but the metric is not written out, so it is computed
//! here from the explicit Gaussian state: a squeezed boson vacuum placed on the
//! classical maximum `x4` by an SU(2) rotation, whose geometric tensor is taken
//! from overlaps of neighbouring states.

use faer::c64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spin::{ModelParams, SpinMagnitude};
use crate::util::KahanSum;

/// Overlap step for the broken-phase Gaussian metric.
pub const GAUSSIAN_DELTA: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HpPhase {
    Ground,
    SymmetricHighest,
    BrokenHighest,
}

impl std::fmt::Display for HpPhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HpPhase::Ground => "ground",
            HpPhase::SymmetricHighest => "symmetric_highest",
            HpPhase::BrokenHighest => "broken_highest",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HpMetricPoint {
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
    pub det_g: f64,
    pub j: SpinMagnitude,
    pub phase: HpPhase,
    pub frequency: f64,
}

impl HpMetricPoint {
    pub fn metric(&self) -> [f64; 3] {
        [self.g11, self.g12, self.g22]
    }
}

/// `constant + c_pp P² + c_qq Q² + c_qp (QP + PQ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticHamiltonian {
    pub constant: f64,
    pub c_pp: f64,
    pub c_qq: f64,
    pub c_qp: f64,
    pub frequency: f64,
}

/// `(Ωx/Ω, ξy/Ω, Ω)`.
fn reduced(p: &ModelParams) -> Result<(f64, f64, f64)> {
    p.validate()?;
    if p.omega <= 0.0 {
        return Err(Error::Domain(format!("Holstein-Primakoff layer needs Ω > 0, got {}", p.omega)));
    }
    Ok((p.omega_x / p.omega, p.xi_y / p.omega, p.omega))
}

/// Shared closed form of the ground and symmetric-phase metrics, `s = r ± 2ξy`.
fn closed_form(j: SpinMagnitude, ox: f64, xi: f64, s: f64, omega: f64, phase: HpPhase) -> HpMetricPoint {
    let jj = j.j();
    let q = 1.0 + ox * ox;
    let r = q.sqrt();
    let g11 = jj / (2.0 * q.powf(1.75) * s.sqrt()) + xi * xi * ox * ox / (8.0 * q * q * s * s);
    let g12 = -xi * ox / (8.0 * q * s * s);
    let g22 = 1.0 / (8.0 * s * s);
    let det = jj / (16.0 * q.powf(1.75) * s.powf(2.5));
    let w2 = omega * omega;
    HpMetricPoint {
        g11: g11 / w2,
        g12: g12 / w2,
        g22: g22 / w2,
        det_g: det / (w2 * w2),
        j,
        phase,
        frequency: omega * (r * s).sqrt(),
    }
}

/// Ground-state metric, `s = √(1+Ωx²) + 2ξy`.
pub fn hp_ground_metric(j: SpinMagnitude, p: &ModelParams) -> Result<HpMetricPoint> {
    let (ox, xi, omega) = reduced(p)?;
    let s = (1.0 + ox * ox).sqrt() + 2.0 * xi;
    if s == 0.0 {
        return Err(Error::SingularAt(format!("ξy = −√(1+Ωx²)/2 (Ωx = {})", p.omega_x)));
    }
    if s < 0.0 {
        return Err(Error::Domain(format!("ground expansion needs √(1+Ωx²)+2ξy > 0, got {s}")));
    }
    Ok(closed_form(j, ox, xi, s, omega, HpPhase::Ground))
}

/// Highest-state metric below the separatrix, `s = √(1+Ωx²) − 2ξy`.
pub fn hp_symmetric_metric(j: SpinMagnitude, p: &ModelParams) -> Result<HpMetricPoint> {
    let (ox, xi, omega) = reduced(p)?;
    let s = (1.0 + ox * ox).sqrt() - 2.0 * xi;
    if s == 0.0 {
        return Err(Error::SingularAt(format!("separatrix (Ωx = {}, ξy = {})", p.omega_x, p.xi_y)));
    }
    if s < 0.0 {
        return Err(Error::Domain(format!(
            "symmetric phase needs ξy < √(1+Ωx²)/2, got Ωx = {}, ξy = {}",
            p.omega_x, p.xi_y
        )));
    }
    Ok(closed_form(j, ox, xi, s, omega, HpPhase::SymmetricHighest))
}

/// `4ξy² − Ωx² − 1` in reduced units, rejecting the symmetric side.
fn broken_distance(ox: f64, xi: f64) -> Result<f64> {
    let d = 4.0 * xi * xi - ox * ox - 1.0;
    if d < 0.0 || xi <= 0.0 {
        return Err(Error::Domain(format!("broken phase needs ξy > √(1+Ωx²)/2, got Ωx = {ox}, ξy = {xi}")));
    }
    Ok(d)
}

/// Quadratic Hamiltonian around `x4`. On the separatrix the frequency is 0.
pub fn hp_broken_quadratic(j: SpinMagnitude, p: &ModelParams) -> Result<QuadraticHamiltonian> {
    let (ox, xi, omega) = reduced(p)?;
    let d = broken_distance(ox, xi)?;
    let k = 4.0 * xi * xi - 1.0;
    if k == 0.0 {
        return Err(Error::SingularAt("Ωx = 0, ξy = 1/2".into()));
    }
    let jj = j.j();
    Ok(QuadraticHamiltonian {
        constant: omega * jj * (4.0 * xi * xi + ox * ox + 1.0) / (4.0 * xi),
        c_pp: -omega * xi * d / k,
        c_qq: -omega * (16.0 * xi.powi(4) - 8.0 * xi * xi + ox * ox + 1.0) / (4.0 * xi * k),
        c_qp: omega * ox * d.sqrt() / (2.0 * k),
        frequency: omega * d.sqrt(),
    })
}

/// Broken-phase Berry curvature `F12`.
pub fn hp_broken_berry(j: SpinMagnitude, p: &ModelParams) -> Result<f64> {
    let (ox, xi, omega) = reduced(p)?;
    let d = broken_distance(ox, xi)?;
    if d == 0.0 {
        return Err(Error::SingularAt(format!("separatrix (Ωx = {}, ξy = {})", p.omega_x, p.xi_y)));
    }
    let jj = j.j();
    let f = -(2.0 * jj + 1.0) / (4.0 * xi * xi * d.sqrt()) + (16.0 * xi * xi - ox * ox + 1.0) / (16.0 * xi.powi(3) * d);
    Ok(f / (omega * omega))
}

/// Maximal energy per spin in the thermodynamic limit.
pub fn e_max(p: &ModelParams) -> f64 {
    let ox = p.omega_x;
    let xi = p.xi_y;
    let w = p.omega;
    let sym = (w * w + ox * ox).sqrt();
    if xi > 0.0 && 2.0 * xi > sym {
        (w * w + ox * ox + 4.0 * xi * xi) / (4.0 * xi)
    } else {
        sym
    }
}

/// Gaussian state on the `x4` maximum (branch `Jy > 0`), reduced units.
fn gaussian_state(j: SpinMagnitude, ox: f64, xi: f64) -> Result<Vec<c64>> {
    let d = broken_distance(ox, xi)?;
    if d == 0.0 {
        return Err(Error::SingularAt(format!("separatrix (Ωx = {ox}, ξy = {xi})")));
    }
    let k = 4.0 * xi * xi - 1.0;

    // Rotated frame: e3 points away from the classical spin, e1 is ẑ projected
    // onto the orthogonal plane. In this frame the quadratic form is exactly
    // the one of hp_broken_quadratic.
    let inv = 1.0 / (2.0 * xi);
    let e3 = [-ox * inv, -d.sqrt() * inv, -inv];
    let mut e1 = [-e3[2] * e3[0], -e3[2] * e3[1], 1.0 - e3[2] * e3[2]];
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|x| *x /= n1);
    let e2 = [
        e3[1] * e1[2] - e3[2] * e1[1],
        e3[2] * e1[0] - e3[0] * e1[2],
        e3[0] * e1[1] - e3[1] * e1[0],
    ];
    // rot[row][col] with columns e1, e2, e3.
    let rot = [[e1[0], e2[0], e3[0]], [e1[1], e2[1], e3[1]], [e1[2], e2[2], e3[2]]];

    // Positive form a P² + b Q² + c (QP+PQ) of −H.
    let a = xi * d / k;
    let b = (16.0 * xi.powi(4) - 8.0 * xi * xi + ox * ox + 1.0) / (4.0 * xi * k);
    let c = -ox * d.sqrt() / (2.0 * k);
    let w = (a * b - c * c).sqrt();
    let z = c64::new(w, c) / a;
    let t = (z - 1.0) / (z + 1.0);

    let dim = j.dim();
    let mut g = vec![c64::new(0.0, 0.0); dim];
    g[0] = c64::new(1.0, 0.0);
    let mut k2 = 0;
    while k2 + 2 < dim {
        let f = (((k2 + 1) as f64) / ((k2 + 2) as f64)).sqrt();
        g[k2 + 2] = g[k2] * (-t) * f;
        k2 += 2;
    }
    normalize(&mut g);

    // ZYZ Euler angles of rot.
    let beta = rot[2][2].clamp(-1.0, 1.0).acos();
    let alpha = rot[1][2].atan2(rot[0][2]);
    let gamma = rot[2][1].atan2(-rot[2][0]);
    apply_jz_phase(j, &mut g, gamma);
    rotate_y(j, &mut g, beta);
    apply_jz_phase(j, &mut g, alpha);
    Ok(g)
}

fn normalize(v: &mut [c64]) {
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// `v ← e^{−iφJz} v`.
fn apply_jz_phase(j: SpinMagnitude, v: &mut [c64], phi: f64) {
    for (k, x) in v.iter_mut().enumerate() {
        *x *= c64::cis(-phi * j.m(k));
    }
}

/// `v ← e^{−iβJy} v = e^{−βK} v` with the real tridiagonal `K = (J+ − J−)/2`,
/// by a scaled Taylor series.
fn rotate_y(j: SpinMagnitude, v: &mut [c64], beta: f64) {
    let dim = v.len();
    let half: Vec<f64> = (0..dim.saturating_sub(1)).map(|k| 0.5 * j.raising(j.m(k))).collect();
    let bound = 2.0 * half.iter().cloned().fold(0.0, f64::max) * beta.abs();
    let steps = (bound / 0.5).ceil().max(1.0) as usize;
    let tau = -beta / steps as f64;
    let apply_k = |x: &[c64]| -> Vec<c64> {
        let mut y = vec![c64::new(0.0, 0.0); dim];
        for k in 0..dim - 1 {
            y[k + 1] += x[k] * half[k];
            y[k] -= x[k + 1] * half[k];
        }
        y
    };
    for _ in 0..steps {
        let mut term = v.to_vec();
        let mut acc = v.to_vec();
        for n in 1..60 {
            term = apply_k(&term);
            let s = tau / n as f64;
            term.iter_mut().for_each(|x| *x *= s);
            let size: f64 = term.iter().map(|x| x.norm_sqr()).sum();
            acc.iter_mut().zip(&term).for_each(|(a, t)| *a += t);
            if size < 1e-36 {
                break;
            }
        }
        v.copy_from_slice(&acc);
    }
}

/// `1 − |<a|b>|` as `‖a − s b‖²/2` with the phase `s` aligning `b` to `a`.
fn infidelity(a: &[c64], b: &[c64]) -> f64 {
    let s = phase_to(a, b);
    let mut acc = KahanSum::default();
    for (x, y) in a.iter().zip(b) {
        acc.add((x - y * s).norm_sqr());
    }
    0.5 * acc.value()
}

/// Unit phase `s` maximizing `Re <a|s b>`.
fn phase_to(a: &[c64], b: &[c64]) -> c64 {
    let ov: c64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let n = ov.norm();
    if n == 0.0 {
        c64::new(1.0, 0.0)
    } else {
        ov.conj() / n
    }
}

/// Geometric tensor of the Gaussian family in reduced units.
///
/// The metric is the Richardson-extrapolated overlap estimate, the Berry
/// curvature comes from gauge-fixed central differences.
fn gaussian_qgt(j: SpinMagnitude, ox: f64, xi: f64, delta: f64) -> Result<([f64; 3], f64)> {
    let psi = gaussian_state(j, ox, xi)?;
    let along = |u: (f64, f64), h: f64| -> Result<f64> {
        let plus = gaussian_state(j, ox + u.0 * h, xi + u.1 * h)?;
        let minus = gaussian_state(j, ox - u.0 * h, xi - u.1 * h)?;
        Ok((infidelity(&psi, &plus) + infidelity(&psi, &minus)) / (h * h))
    };
    let richardson = |u: (f64, f64)| -> Result<f64> {
        let coarse = along(u, delta)?;
        let fine = along(u, 0.5 * delta)?;
        Ok((4.0 * fine - coarse) / 3.0)
    };
    let g11 = richardson((1.0, 0.0))?;
    let g22 = richardson((0.0, 1.0))?;
    let g12 = 0.5 * (richardson((1.0, 1.0))? - g11 - g22);

    let derivative = |u: (f64, f64)| -> Result<Vec<c64>> {
        let mut plus = gaussian_state(j, ox + u.0 * delta, xi + u.1 * delta)?;
        let mut minus = gaussian_state(j, ox - u.0 * delta, xi - u.1 * delta)?;
        let sp = phase_to(&psi, &plus);
        let sm = phase_to(&psi, &minus);
        plus.iter_mut().for_each(|x| *x *= sp);
        minus.iter_mut().for_each(|x| *x *= sm);
        Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * delta)).collect())
    };
    let d1 = derivative((1.0, 0.0))?;
    let d2 = derivative((0.0, 1.0))?;
    let dot = |a: &[c64], b: &[c64]| -> c64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let q12 = dot(&d1, &d2) - dot(&d1, &psi) * dot(&psi, &d2);
    Ok(([g11, g12, g22], -2.0 * q12.im))
}

/// Broken-phase metric of the highest state from the Gaussian family.
pub fn hp_broken_metric(j: SpinMagnitude, p: &ModelParams) -> Result<HpMetricPoint> {
    let (ox, xi, omega) = reduced(p)?;
    let d = broken_distance(ox, xi)?;
    if d == 0.0 {
        return Err(Error::SingularAt(format!("separatrix (Ωx = {}, ξy = {})", p.omega_x, p.xi_y)));
    }
    let (g, _) = gaussian_qgt(j, ox, xi, GAUSSIAN_DELTA)?;
    let w2 = omega * omega;
    let [g11, g12, g22] = g.map(|x| x / w2);
    Ok(HpMetricPoint {
        g11,
        g12,
        g22,
        det_g: g11 * g22 - g12 * g12,
        j,
        phase: HpPhase::BrokenHighest,
        frequency: omega * d.sqrt(),
    })
}

/// Berry curvature of the Gaussian family itself, as a check on [`hp_broken_berry`].
pub fn hp_broken_gaussian_berry(j: SpinMagnitude, p: &ModelParams) -> Result<f64> {
    let (ox, xi, omega) = reduced(p)?;
    let (_, f) = gaussian_qgt(j, ox, xi, GAUSSIAN_DELTA)?;
    Ok(f / (omega * omega))
}

/// Highest-state metric on whichever side of the separatrix `p` lies.
pub fn hp_highest_metric(j: SpinMagnitude, p: &ModelParams) -> Result<HpMetricPoint> {
    let (ox, xi, _) = reduced(p)?;
    if 4.0 * xi * xi - ox * ox - 1.0 > 0.0 && xi > 0.0 {
        hp_broken_metric(j, p)
    } else {
        hp_symmetric_metric(j, p)
    }
}

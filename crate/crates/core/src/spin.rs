//! Collective spin operators and the model Hamiltonian.
//!
//! The basis is ordered `m = -j, -j+1, ..., +j`, so row/column 0 is `m = -j`.

use faer::{c64, Mat};

use crate::error::{Error, Result};

/// Tolerance used when validating Hermiticity of a matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Spin magnitude `j = N/2`, stored as the integer `2j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinMagnitude {
    twice_j: u32,
}

impl SpinMagnitude {
    /// Builds a spin magnitude from `j`. `2j` must be a positive integer.
    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !j.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-9 || twice > u32::MAX as f64 {
            return Err(Error::InvalidSpin(j));
        }
        Ok(Self { twice_j: twice.round() as u32 })
    }

    /// Builds a spin magnitude from `N = 2j`.
    pub fn from_twice(twice_j: u32) -> Result<Self> {
        if twice_j == 0 {
            return Err(Error::InvalidSpin(0.0));
        }
        Ok(Self { twice_j })
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn twice_j(&self) -> u32 {
        self.twice_j
    }

    /// Hilbert space dimension `2j + 1`.
    pub fn dim(&self) -> usize {
        self.twice_j as usize + 1
    }

    /// Magnetic quantum number of basis index `k`.
    pub fn m(&self, k: usize) -> f64 {
        k as f64 - self.j()
    }

    /// `<m+1|J+|m>`.
    pub fn raising(&self, m: f64) -> f64 {
        let j = self.j();
        (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
    }
}

impl std::fmt::Display for SpinMagnitude {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice_j.is_multiple_of(2) {
            write!(f, "{}", self.twice_j / 2)
        } else {
            write!(f, "{}/2", self.twice_j)
        }
    }
}

impl serde::Serialize for SpinMagnitude {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.j())
    }
}

/// Point `(Ωx, ξy)` of the parameter plane, with the energy scale `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub omega: f64,
    pub omega_x: f64,
    pub xi_y: f64,
}

impl ModelParams {
    /// Parameters with `Ω = 1`.
    pub fn new(omega_x: f64, xi_y: f64) -> Self {
        Self { omega: 1.0, omega_x, xi_y }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega.is_finite() {
            return Err(Error::NonFiniteParameter("omega"));
        }
        if !self.omega_x.is_finite() {
            return Err(Error::NonFiniteParameter("omega_x"));
        }
        if !self.xi_y.is_finite() {
            return Err(Error::NonFiniteParameter("xi_y"));
        }
        Ok(())
    }

    /// Shifted copy.
    pub fn offset(&self, d_omega_x: f64, d_xi_y: f64) -> Self {
        Self { omega: self.omega, omega_x: self.omega_x + d_omega_x, xi_y: self.xi_y + d_xi_y }
    }
}

/// Dense Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    entries: Mat<c64>,
}

impl HermitianOperator {
    /// Wraps a square matrix, checking Hermiticity entrywise.
    pub fn new(entries: Mat<c64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), got: entries.ncols() });
        }
        let dev = hermitian_deviation(&entries);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { entries })
    }

    /// Wraps a real symmetric matrix.
    pub fn from_real(m: &Mat<f64>) -> Result<Self> {
        Self::new(Mat::from_fn(m.nrows(), m.ncols(), |r, c| c64::new(m[(r, c)], 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Mat<c64> {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        self.entries[(r, c)]
    }

    /// Largest absolute imaginary part over all entries.
    pub fn max_imag(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for c in 0..n {
            for r in 0..n {
                worst = worst.max(self.entries[(r, c)].im.abs());
            }
        }
        worst
    }

    /// Real part of the entries.
    pub fn real_part(&self) -> Mat<f64> {
        Mat::from_fn(self.dim(), self.dim(), |r, c| self.entries[(r, c)].re)
    }

    /// Operator product, returned as a plain matrix.
    pub fn matmul(&self, other: &HermitianOperator) -> Mat<c64> {
        &self.entries * &other.entries
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Mat<c64>) -> f64 {
        max_abs_diff(&self.entries, other)
    }
}

pub(crate) fn max_abs_diff(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
    let mut worst = 0.0f64;
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            worst = worst.max((a[(r, c)] - b[(r, c)]).norm());
        }
    }
    worst
}

fn hermitian_deviation(m: &Mat<c64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for c in 0..n {
        for r in 0..=c {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// The collective operators at fixed `j`.
///
/// `jplus` and `jminus` are not Hermitian and are kept as real matrices.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub jx: HermitianOperator,
    pub jy: HermitianOperator,
    pub jz: HermitianOperator,
    pub jy2: HermitianOperator,
    pub jplus: Mat<f64>,
    pub jminus: Mat<f64>,
}

pub fn build_spin_operators(j: SpinMagnitude) -> SpinOperators {
    let d = j.dim();
    let jplus = Mat::from_fn(d, d, |r, c| if r == c + 1 { j.raising(j.m(c)) } else { 0.0 });
    let jminus = jplus.transpose().to_owned();
    let jx = Mat::from_fn(d, d, |r, c| c64::new(0.5 * (jplus[(r, c)] + jminus[(r, c)]), 0.0));
    // (J+ - J-)/(2i) = -i (J+ - J-)/2
    let jy = Mat::from_fn(d, d, |r, c| c64::new(0.0, -0.5 * (jplus[(r, c)] - jminus[(r, c)])));
    let jz = Mat::from_fn(d, d, |r, c| c64::new(if r == c { j.m(c) } else { 0.0 }, 0.0));
    let jy2 = &jy * &jy;
    let wrap = |m: Mat<c64>| HermitianOperator::new(m).expect("spin operators are Hermitian by construction");
    SpinOperators { jx: wrap(jx), jy: wrap(jy), jz: wrap(jz), jy2: wrap(jy2), jplus, jminus }
}

/// Real matrix of `Jx`.
pub(crate) fn jx_real(j: SpinMagnitude) -> Mat<f64> {
    let d = j.dim();
    Mat::from_fn(d, d, |r, c| {
        if r == c + 1 {
            0.5 * j.raising(j.m(c))
        } else if c == r + 1 {
            0.5 * j.raising(j.m(r))
        } else {
            0.0
        }
    })
}

/// Nonzero entries of the real matrix `Jy²`, as `(diagonal, second off-diagonal)`.
///
/// `offdiag[k] = <k+2|Jy²|k>`.
pub(crate) fn jy2_bands(j: SpinMagnitude) -> (Vec<f64>, Vec<f64>) {
    let d = j.dim();
    let a = |m: f64| j.raising(m);
    let diag = (0..d)
        .map(|k| {
            let m = j.m(k);
            0.25 * (a(m).powi(2) + a(m - 1.0).powi(2))
        })
        .collect();
    let off = (0..d.saturating_sub(2))
        .map(|k| {
            let m = j.m(k);
            -0.25 * a(m) * a(m + 1.0)
        })
        .collect();
    (diag, off)
}

pub(crate) fn jy2_real(j: SpinMagnitude) -> Mat<f64> {
    let d = j.dim();
    let (diag, off) = jy2_bands(j);
    Mat::from_fn(d, d, |r, c| {
        if r == c {
            diag[r]
        } else if r == c + 2 {
            off[c]
        } else if c == r + 2 {
            off[r]
        } else {
            0.0
        }
    })
}

/// Real symmetric matrix of the Hamiltonian.
pub(crate) fn hamiltonian_real(j: SpinMagnitude, p: &ModelParams) -> Mat<f64> {
    let d = j.dim();
    let (diag, off) = jy2_bands(j);
    let s = p.xi_y / j.j();
    Mat::from_fn(d, d, |r, c| {
        if r == c {
            p.omega * j.m(r) + s * diag[r]
        } else if r == c + 1 {
            0.5 * p.omega_x * j.raising(j.m(c))
        } else if c == r + 1 {
            0.5 * p.omega_x * j.raising(j.m(r))
        } else if r == c + 2 {
            s * off[c]
        } else if c == r + 2 {
            s * off[r]
        } else {
            0.0
        }
    })
}

/// `H = Ω Jz + Ωx Jx + (ξy/j) Jy²`.
pub fn build_hamiltonian(j: SpinMagnitude, p: &ModelParams) -> Result<HermitianOperator> {
    p.validate()?;
    HermitianOperator::from_real(&hamiltonian_real(j, p))
}

/// `∂H/∂Ωx` and `∂H/∂ξy`.
#[derive(Debug, Clone)]
pub struct ParameterDerivatives {
    pub d_omega_x: HermitianOperator,
    pub d_xi_y: HermitianOperator,
}

pub fn build_parameter_derivatives(j: SpinMagnitude) -> ParameterDerivatives {
    let jy2 = jy2_real(j);
    let scaled = Mat::from_fn(j.dim(), j.dim(), |r, c| jy2[(r, c)] / j.j());
    ParameterDerivatives {
        d_omega_x: HermitianOperator::from_real(&jx_real(j)).expect("symmetric"),
        d_xi_y: HermitianOperator::from_real(&scaled).expect("symmetric"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> SpinMagnitude {
        SpinMagnitude::new(0.5).unwrap()
    }

    fn cplx(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn rejects_bad_spin() {
        assert!(SpinMagnitude::new(0.0).is_err());
        assert!(SpinMagnitude::new(0.3).is_err());
        assert!(SpinMagnitude::new(-1.0).is_err());
        assert!(SpinMagnitude::new(f64::NAN).is_err());
        assert_eq!(SpinMagnitude::new(1.5).unwrap().dim(), 4);
    }

    #[test]
    fn spin_half_is_pauli_over_two() {
        let ops = build_spin_operators(half());
        // basis (m=-1/2, m=+1/2): sigma_z/2 = diag(-1/2, 1/2) in this ordering
        let jx = ops.jx.entries();
        let jy = ops.jy.entries();
        let jz = ops.jz.entries();
        assert!((jx[(0, 1)] - cplx(0.5, 0.0)).norm() < 1e-15);
        assert!((jx[(1, 0)] - cplx(0.5, 0.0)).norm() < 1e-15);
        assert!((jy[(1, 0)] - cplx(0.0, -0.5)).norm() < 1e-15);
        assert!((jy[(0, 1)] - cplx(0.0, 0.5)).norm() < 1e-15);
        assert!((jz[(0, 0)] - cplx(-0.5, 0.0)).norm() < 1e-15);
        assert!((jz[(1, 1)] - cplx(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn commutators_and_casimir() {
        for &j in &[0.5, 1.0, 3.5, 12.0, 40.0] {
            let s = SpinMagnitude::new(j).unwrap();
            let ops = build_spin_operators(s);
            let xy = ops.jx.matmul(&ops.jy);
            let yx = ops.jy.matmul(&ops.jx);
            let comm = &xy - &yx;
            let ijz = Mat::from_fn(s.dim(), s.dim(), |r, c| ops.jz.get(r, c) * cplx(0.0, 1.0));
            assert!(max_abs_diff(&comm, &ijz) < 1e-10, "j={j}");

            let cas = &(&ops.jx.matmul(&ops.jx) + ops.jy2.entries()) + &ops.jz.matmul(&ops.jz);
            let id = Mat::from_fn(s.dim(), s.dim(), |r, c| if r == c { cplx(j * (j + 1.0), 0.0) } else { cplx(0.0, 0.0) });
            assert!(max_abs_diff(&cas, &id) < 1e-10, "j={j}");
        }
    }

    #[test]
    fn banded_jy2_matches_product() {
        for &j in &[0.5, 1.0, 2.5, 7.0] {
            let s = SpinMagnitude::new(j).unwrap();
            let ops = build_spin_operators(s);
            let banded = jy2_real(s);
            let prod = ops.jy2.entries();
            for r in 0..s.dim() {
                for c in 0..s.dim() {
                    assert!((prod[(r, c)].re - banded[(r, c)]).abs() < 1e-12);
                    assert!(prod[(r, c)].im.abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_trivial_cases() {
        let one = SpinMagnitude::new(1.0).unwrap();
        let h = build_hamiltonian(one, &ModelParams::new(0.0, 0.0)).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { r as f64 - 1.0 } else { 0.0 };
                assert!((h.get(r, c).re - want).abs() < 1e-15);
            }
        }

        let (ox, xi) = (0.7, 1.9);
        let h = build_hamiltonian(half(), &ModelParams::new(ox, xi)).unwrap();
        // (ξ/j) Jy² = 2ξ · 1/4
        let shift = 0.5 * xi;
        assert!((h.get(0, 0).re - (-0.5 + shift)).abs() < 1e-15);
        assert!((h.get(1, 1).re - (0.5 + shift)).abs() < 1e-15);
        assert!((h.get(0, 1).re - 0.5 * ox).abs() < 1e-15);
        assert!(h.max_imag() <= 1e-14);
    }

    #[test]
    fn rejects_non_finite_params() {
        let s = half();
        assert_eq!(
            build_hamiltonian(s, &ModelParams::new(f64::NAN, 0.0)).unwrap_err(),
            Error::NonFiniteParameter("omega_x")
        );
        assert!(build_hamiltonian(s, &ModelParams::new(0.0, f64::INFINITY)).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for &j in &[0.5, 2.0, 9.5] {
            let s = SpinMagnitude::new(j).unwrap();
            let d = build_parameter_derivatives(s);
            let p = ModelParams::new(0.37, 1.3);
            let fd = |dp: (f64, f64)| {
                let a = build_hamiltonian(s, &p.offset(dp.0, dp.1)).unwrap();
                let b = build_hamiltonian(s, &p.offset(-dp.0, -dp.1)).unwrap();
                Mat::from_fn(s.dim(), s.dim(), |r, c| (a.get(r, c) - b.get(r, c)) / c64::new(2.0 * h, 0.0))
            };
            assert!(d.d_omega_x.max_abs_diff(&fd((h, 0.0))) < 1e-9);
            assert!(d.d_xi_y.max_abs_diff(&fd((0.0, h))) < 1e-9);
        }
        let d = build_parameter_derivatives(half());
        assert!((d.d_xi_y.get(0, 0).re - 0.5).abs() < 1e-15);
        assert!(d.d_xi_y.get(0, 1).norm() < 1e-15);
    }

    #[test]
    fn hermitian_validation() {
        let bad = Mat::from_fn(2, 2, |r, c| if r == 0 && c == 1 { cplx(1.0, 0.0) } else { cplx(0.0, 0.0) });
        assert!(matches!(HermitianOperator::new(bad), Err(Error::NotHermitian(_))));
        let rect = Mat::<c64>::zeros(2, 3);
        assert!(matches!(HermitianOperator::new(rect), Err(Error::DimensionMismatch { .. })));
    }
}

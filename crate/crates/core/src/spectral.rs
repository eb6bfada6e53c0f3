//! Eigendecomposition, state selection and density of states.

use std::str::FromStr;

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};
use crate::spin::{hamiltonian_real, jy2_bands, HermitianOperator, ModelParams, SpinMagnitude};

/// Largest imaginary part tolerated by the real symmetric path.
const REAL_TOL: f64 = 1e-14;

/// Ascending eigenvalues and orthonormal real eigenvectors (one per column).
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<f64>,
    /// Set when the spectrum was built from the model Hamiltonian.
    pub model: Option<(SpinMagnitude, ModelParams)>,
}

impl Spectrum {
    /// Builds and diagonalizes the model Hamiltonian.
    pub fn of_model(j: SpinMagnitude, p: &ModelParams) -> Result<Self> {
        p.validate()?;
        let mut s = diagonalize_real(hamiltonian_real(j, p))?;
        s.model = Some((j, *p));
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        (0..self.dim()).map(|r| self.eigenvectors[(r, k)]).collect()
    }
}

/// Diagonalizes a real symmetric operator.
pub fn diagonalize(h: &HermitianOperator) -> Result<Spectrum> {
    let imag = h.max_imag();
    if imag > REAL_TOL {
        return Err(Error::Domain(format!(
            "real symmetric path needs a real operator (max imaginary part {imag:e})"
        )));
    }
    diagonalize_real(h.real_part())
}

pub(crate) fn diagonalize_real(h: Mat<f64>) -> Result<Spectrum> {
    let (values, vectors) = eigh_real(&h)?;
    Ok(Spectrum { eigenvalues: values, eigenvectors: vectors, model: None })
}

/// Ascending eigenpairs of a real symmetric matrix with the sign convention
/// applied.
pub(crate) fn eigh_real(h: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = h.nrows();
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenNoConvergence)?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values: Vec<f64> = order.iter().map(|&k| s[k]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenNoConvergence);
    }
    let mut vectors = Mat::from_fn(n, n, |r, c| u[(r, order[c])]);
    for c in 0..n {
        let mut best = 0usize;
        for r in 0..n {
            if vectors[(r, c)].abs() > vectors[(best, c)].abs() {
                best = r;
            }
        }
        if vectors[(best, c)] < 0.0 {
            for r in 0..n {
                vectors[(r, c)] = -vectors[(r, c)];
            }
        }
    }
    Ok((values, vectors))
}

/// Eigendecomposition of a general Hermitian operator.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<c64>,
}

/// Diagonalizes a complex Hermitian operator. The largest-magnitude component
/// of each eigenvector is made real and positive.
pub fn diagonalize_hermitian(h: &HermitianOperator) -> Result<HermitianSpectrum> {
    let n = h.dim();
    let evd = h.entries().self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenNoConvergence)?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| s[k].re).collect();
    let mut eigenvectors = Mat::from_fn(n, n, |r, c| u[(r, order[c])]);
    for c in 0..n {
        let mut best = 0usize;
        for r in 0..n {
            if eigenvectors[(r, c)].norm() > eigenvectors[(best, c)].norm() {
                best = r;
            }
        }
        let z = eigenvectors[(best, c)];
        let phase = z.conj() / c64::new(z.norm(), 0.0);
        for r in 0..n {
            eigenvectors[(r, c)] *= phase;
        }
    }
    Ok(HermitianSpectrum { eigenvalues, eigenvectors })
}

/// Which eigenstate to follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateSelector {
    Ground,
    Highest,
    Index(usize),
}

impl StateSelector {
    /// Position in the ascending spectrum of dimension `dim`.
    pub fn resolve(&self, dim: usize) -> Result<usize> {
        match *self {
            StateSelector::Ground => Ok(0),
            StateSelector::Highest => Ok(dim - 1),
            StateSelector::Index(k) if k < dim => Ok(k),
            StateSelector::Index(k) => Err(Error::StateOutOfRange { index: k, dim }),
        }
    }
}

impl std::fmt::Display for StateSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StateSelector::Ground => write!(f, "ground"),
            StateSelector::Highest => write!(f, "highest"),
            StateSelector::Index(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for StateSelector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ground" => Ok(StateSelector::Ground),
            "highest" => Ok(StateSelector::Highest),
            _ => s
                .parse::<usize>()
                .map(StateSelector::Index)
                .map_err(|_| format!("expected ground, highest or an index, got {s:?}")),
        }
    }
}

pub fn select_state(s: &Spectrum, sel: StateSelector) -> Result<usize> {
    sel.resolve(s.dim())
}

/// Histogram of `E/j`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DosHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl DosHistogram {
    /// Index of the bin holding `x`; the last bin is closed on the right.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let n = self.counts.len();
        if x < self.bin_edges[0] || x > self.bin_edges[n] {
            return None;
        }
        let k = self.bin_edges[1..].partition_point(|&e| e <= x);
        Some(k.min(n - 1))
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    /// Index of the first bin with the largest count.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &c) in self.counts.iter().enumerate() {
            if c > self.counts[best] {
                best = k;
            }
        }
        best
    }
}

/// Equal-width histogram of `E_k/j` over `[E_min/j, E_max/j]`.
///
/// The scale `j` comes from the spectrum's model; spectra built from a bare
/// operator are binned unscaled.
pub fn density_of_states(s: &Spectrum, bins: usize) -> Result<DosHistogram> {
    if bins < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 bins, got {bins}")));
    }
    let scale = s.model.map(|(j, _)| j.j()).unwrap_or(1.0);
    let e: Vec<f64> = s.eigenvalues.iter().map(|v| v / scale).collect();
    let lo = e[0];
    let mut hi = e[e.len() - 1];
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins).map(|k| if k == bins { hi } else { lo + width * k as f64 }).collect();
    let mut counts = vec![0usize; bins];
    for v in e {
        let k = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(DosHistogram { bin_edges, counts })
}

/// Decomposition of the Hamiltonian into two parity blocks.
///
/// `H(Ωx, ξy) = e^{-iβJy} H0 e^{iβJy}` with `H0 = r Jz + (ξy/j) Jy²`,
/// `r = √(Ω² + Ωx²)` and `β = atan2(Ωx, Ω)`. `H0` couples only `m` values of
/// equal parity, so it splits into two tridiagonal blocks whose eigenvalues
/// together are the spectrum of `H`. Near-degenerate doublets in the full
/// spectrum fall into different blocks and stay resolved.
#[derive(Debug, Clone)]
pub struct ParityResolved {
    pub j: SpinMagnitude,
    pub params: ModelParams,
    pub r: f64,
    pub beta: f64,
    pub sectors: [ParitySector; 2],
}

/// One parity block: basis indices `k` with `k % 2 == parity`.
#[derive(Debug, Clone)]
pub struct ParitySector {
    pub basis: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<f64>,
}

impl ParitySector {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
}

impl ParityResolved {
    pub fn new(j: SpinMagnitude, p: &ModelParams) -> Result<Self> {
        p.validate()?;
        let r = p.omega.hypot(p.omega_x);
        let beta = p.omega_x.atan2(p.omega);
        let (jd, joff) = jy2_bands(j);
        let s = p.xi_y / j.j();
        let build = |parity: usize| -> Result<ParitySector> {
            let basis: Vec<usize> = (parity..j.dim()).step_by(2).collect();
            let n = basis.len();
            let block = Mat::from_fn(n, n, |a, b| {
                if a == b {
                    r * j.m(basis[a]) + s * jd[basis[a]]
                } else if a == b + 1 {
                    s * joff[basis[b]]
                } else if b == a + 1 {
                    s * joff[basis[a]]
                } else {
                    0.0
                }
            });
            let (eigenvalues, eigenvectors) = eigh_real(&block)?;
            Ok(ParitySector { basis, eigenvalues, eigenvectors })
        };
        Ok(Self { j, params: *p, r, beta, sectors: [build(0)?, build(1)?] })
    }

    /// All `(sector, level)` pairs in ascending energy order; ties keep the
    /// even sector first.
    pub fn merged_order(&self) -> Vec<(usize, usize)> {
        let mut all: Vec<(f64, usize, usize)> = Vec::with_capacity(self.j.dim());
        for (s, sec) in self.sectors.iter().enumerate() {
            for (k, &e) in sec.eigenvalues.iter().enumerate() {
                all.push((e, s, k));
            }
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().map(|(_, s, k)| (s, k)).collect()
    }

    /// Full spectrum, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.merged_order().into_iter().map(|(s, k)| self.sectors[s].eigenvalues[k]).collect()
    }

    /// `(sector, level)` of the selected state.
    pub fn locate(&self, sel: StateSelector) -> Result<(usize, usize)> {
        let dim = self.j.dim();
        let idx = sel.resolve(dim)?;
        Ok(self.merged_order()[idx])
    }

    /// Eigenvector of `H0` for `(sector, level)` embedded in the full basis.
    pub fn h0_vector(&self, sector: usize, level: usize) -> Vec<f64> {
        let sec = &self.sectors[sector];
        let mut v = vec![0.0; self.j.dim()];
        for (a, &k) in sec.basis.iter().enumerate() {
            v[k] = sec.eigenvectors[(a, level)];
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::build_hamiltonian;

    fn spin(j: f64) -> SpinMagnitude {
        SpinMagnitude::new(j).unwrap()
    }

    fn residual_and_orthonormality(h: &Mat<f64>, s: &Spectrum) -> (f64, f64) {
        let n = s.dim();
        let v = &s.eigenvectors;
        let hv = h * v;
        let mut norm_h = 0.0f64;
        for c in 0..n {
            for r in 0..n {
                norm_h += h[(r, c)].powi(2);
            }
        }
        let norm_h = norm_h.sqrt().max(1e-300);
        let mut res = 0.0f64;
        for k in 0..n {
            let mut r2 = 0.0;
            for r in 0..n {
                r2 += (hv[(r, k)] - s.eigenvalues[k] * v[(r, k)]).powi(2);
            }
            res = res.max(r2.sqrt() / norm_h);
        }
        let vtv = v.transpose() * v;
        let mut orth = 0.0f64;
        for c in 0..n {
            for r in 0..n {
                let want = if r == c { 1.0 } else { 0.0 };
                orth = orth.max((vtv[(r, c)] - want).abs());
            }
        }
        (res, orth)
    }

    #[test]
    fn jz_spectrum_is_basis() {
        let s = Spectrum::of_model(spin(1.0), &ModelParams::new(0.0, 0.0)).unwrap();
        assert_eq!(s.eigenvalues.len(), 3);
        for (k, e) in s.eigenvalues.iter().enumerate() {
            assert!((e - (k as f64 - 1.0)).abs() < 1e-14);
            assert!((s.eigenvectors[(k, k)] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_hamiltonian_spectrum() {
        for &(j, ox) in &[(0.5, 0.3), (3.0, 1.7), (10.5, -2.2)] {
            let s = Spectrum::of_model(spin(j), &ModelParams::new(ox, 0.0)).unwrap();
            let r = (1.0f64 + ox * ox).sqrt();
            for (k, e) in s.eigenvalues.iter().enumerate() {
                let m = k as f64 - j;
                assert!((e - m * r).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn residuals_and_orthonormality() {
        let pts = [(0.5, 0.9, -0.4), (1.0, -1.3, 2.2), (32.0, 0.775, 2.0), (32.0, 4.4, 2.3)];
        for &(j, ox, xi) in &pts {
            let js = spin(j);
            let p = ModelParams::new(ox, xi);
            let h = hamiltonian_real(js, &p);
            let s = Spectrum::of_model(js, &p).unwrap();
            let (res, orth) = residual_and_orthonormality(&h, &s);
            assert!(res <= 1e-10, "residual {res}");
            assert!(orth <= 1e-12, "orthonormality {orth}");
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn sign_convention() {
        let s = Spectrum::of_model(spin(4.0), &ModelParams::new(0.8, 1.1)).unwrap();
        for k in 0..s.dim() {
            let v = s.eigenvector(k);
            let big = v.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn diagonalize_rejects_complex() {
        let m = Mat::from_fn(2, 2, |r, c| match (r, c) {
            (0, 1) => c64::new(0.0, 1.0),
            (1, 0) => c64::new(0.0, -1.0),
            _ => c64::new(0.0, 0.0),
        });
        let h = HermitianOperator::new(m).unwrap();
        assert!(diagonalize(&h).is_err());
        let hs = diagonalize_hermitian(&h).unwrap();
        assert!((hs.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((hs.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_path_agrees_with_real_path() {
        let js = spin(5.5);
        let p = ModelParams::new(1.2, 0.9);
        let h = build_hamiltonian(js, &p).unwrap();
        let a = diagonalize(&h).unwrap();
        let b = diagonalize_hermitian(&h).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn selectors() {
        let s = Spectrum::of_model(spin(1.0), &ModelParams::new(0.3, 0.4)).unwrap();
        assert_eq!(select_state(&s, StateSelector::Ground).unwrap(), 0);
        assert_eq!(select_state(&s, StateSelector::Highest).unwrap(), 2);
        assert_eq!(select_state(&s, StateSelector::Index(1)).unwrap(), 1);
        assert_eq!(
            select_state(&s, StateSelector::Index(3)).unwrap_err(),
            Error::StateOutOfRange { index: 3, dim: 3 }
        );
        assert_eq!("highest".parse::<StateSelector>().unwrap(), StateSelector::Highest);
        assert_eq!("7".parse::<StateSelector>().unwrap(), StateSelector::Index(7));
        assert!("top".parse::<StateSelector>().is_err());
    }

    #[test]
    fn reflection_symmetry_of_spectrum() {
        let js = spin(20.0);
        for &(ox, xi) in &[(0.6, 1.4), (2.5, -0.8)] {
            let a = Spectrum::of_model(js, &ModelParams::new(ox, xi)).unwrap();
            let b = Spectrum::of_model(js, &ModelParams::new(-ox, xi)).unwrap();
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dos_conserves_counts() {
        let s = Spectrum::of_model(spin(4.0), &ModelParams::new(0.4, 1.7)).unwrap();
        let h = density_of_states(&s, 3).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), 9);
        assert_eq!(h.bin_edges.len(), 4);
        assert!(h.bin_edges.windows(2).all(|w| w[0] < w[1]));
        assert!(density_of_states(&s, 1).is_err());
    }

    #[test]
    fn dos_flat_for_linear_spectrum() {
        let s = Spectrum::of_model(spin(200.0), &ModelParams::new(0.5, 0.0)).unwrap();
        let h = density_of_states(&s, 20).unwrap();
        let inner = &h.counts[1..h.counts.len() - 1];
        let max = *inner.iter().max().unwrap() as f64;
        let min = *inner.iter().min().unwrap() as f64;
        assert!(max / min <= 1.5);
    }

    #[test]
    fn bin_lookup() {
        let h = DosHistogram { bin_edges: vec![0.0, 1.0, 2.0, 3.0], counts: vec![1, 2, 3] };
        assert_eq!(h.bin_of(0.0), Some(0));
        assert_eq!(h.bin_of(1.0), Some(1));
        assert_eq!(h.bin_of(2.5), Some(2));
        assert_eq!(h.bin_of(3.0), Some(2));
        assert_eq!(h.bin_of(3.1), None);
        assert_eq!(h.argmax(), 2);
    }

    #[test]
    fn parity_blocks_reproduce_full_spectrum() {
        for &(j, ox, xi) in &[(0.5, 0.4, 1.0), (3.0, 1.1, 2.3), (16.0, 2.0, 2.3), (16.5, -0.7, -1.2)] {
            let js = spin(j);
            let p = ModelParams::new(ox, xi);
            let dense = Spectrum::of_model(js, &p).unwrap();
            let pr = ParityResolved::new(js, &p).unwrap();
            let ev = pr.eigenvalues();
            assert_eq!(ev.len(), dense.dim());
            for (a, b) in ev.iter().zip(&dense.eigenvalues) {
                assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
            }
        }
    }
}

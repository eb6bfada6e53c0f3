//! Scalar curvature of a two-dimensional metric.
//!
//! With `√g = √(g11 g22 − g12²)` the curvature is `R = (𝒜 + ℬ)/√g` where
//!
//! ```text
//! 𝒜 = ∂1[ g12/(g11 √g) ∂2 g11 − (1/√g) ∂1 g22 ]
//! ℬ = ∂2[ (2/√g) ∂1 g12 − (1/√g) ∂2 g11 − g12/(g11 √g) ∂1 g11 ]
//! ```
//!
//! All derivatives are central differences, so both the pointwise and the
//! tabulated routes are second-order accurate in the step.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qgt::{sym2_eigenvalues, Grid, QgtField};

/// Relative singularity floor: `det g ≤ DET_FLOOR · scale²` is singular.
pub const DET_FLOOR: f64 = 1e-14;

/// A metric `x ↦ (g11, g12, g22)` on a region of the plane.
pub trait MetricFunction {
    fn metric(&self, x: [f64; 2]) -> Result<[f64; 3]>;
}

impl<F> MetricFunction for F
where
    F: Fn([f64; 2]) -> Result<[f64; 3]>,
{
    fn metric(&self, x: [f64; 2]) -> Result<[f64; 3]> {
        self(x)
    }
}

/// Adapter for metrics that cannot fail.
pub struct Infallible<F>(pub F);

impl<F> MetricFunction for Infallible<F>
where
    F: Fn([f64; 2]) -> [f64; 3],
{
    fn metric(&self, x: [f64; 2]) -> Result<[f64; 3]> {
        Ok((self.0)(x))
    }
}

fn det_floor(g: &[f64; 3]) -> f64 {
    let scale = g[0].abs().max(g[2].abs()).max(g[1].abs());
    DET_FLOOR * scale * scale
}

fn checked(g: [f64; 3]) -> Result<[f64; 3]> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite metric component".into()));
    }
    let det = g[0] * g[2] - g[1] * g[1];
    let floor = det_floor(&g);
    if det <= floor {
        return Err(Error::SingularMetric { det, floor });
    }
    Ok(g)
}

/// The two bracketed quantities of the curvature formula at one point, given
/// the metric there and its first derivatives.
fn inner_terms(g: [f64; 3], d1: [f64; 3], d2: [f64; 3]) -> (f64, f64) {
    let [g11, g12, g22] = g;
    let sg = (g11 * g22 - g12 * g12).sqrt();
    let s1 = g12 / (g11 * sg) * d2[0] - d1[2] / sg;
    let s2 = 2.0 / sg * d1[1] - d2[0] / sg - g12 / (g11 * sg) * d1[0];
    (s1, s2)
}

fn central(plus: [f64; 3], minus: [f64; 3], h: f64) -> [f64; 3] {
    [(plus[0] - minus[0]) / (2.0 * h), (plus[1] - minus[1]) / (2.0 * h), (plus[2] - minus[2]) / (2.0 * h)]
}

/// Scalar curvature at `x` by nested central differences with step `h`.
pub fn scalar_curvature_at<M: MetricFunction + ?Sized>(m: &M, x: [f64; 2], h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    stencil_curvature(|a, b| checked(m.metric([x[0] + a as f64 * h, x[1] + b as f64 * h])?), h, h)
}

/// Curvature from metric values at offsets `(a, b)` steps from the centre.
fn stencil_curvature(g: impl Fn(i32, i32) -> Result<[f64; 3]>, h1: f64, h2: f64) -> Result<f64> {
    let g00 = g(0, 0)?;
    let (gp0, gm0, g0p, g0m) = (g(1, 0)?, g(-1, 0)?, g(0, 1)?, g(0, -1)?);
    let (gpp, gpm, gmp, gmm) = (g(1, 1)?, g(1, -1)?, g(-1, 1)?, g(-1, -1)?);
    let (g20, gn20, g02, g0n2) = (g(2, 0)?, g(-2, 0)?, g(0, 2)?, g(0, -2)?);

    // first bracket at x ± h e1, second at x ± h e2
    let (s1_p, _) = inner_terms(gp0, central(g20, g00, h1), central(gpp, gpm, h2));
    let (s1_m, _) = inner_terms(gm0, central(g00, gn20, h1), central(gmp, gmm, h2));
    let (_, s2_p) = inner_terms(g0p, central(gpp, gmp, h1), central(g02, g00, h2));
    let (_, s2_m) = inner_terms(g0m, central(gpm, gmm, h1), central(g00, g0n2, h2));

    let a = (s1_p - s1_m) / (2.0 * h1);
    let b = (s2_p - s2_m) / (2.0 * h2);
    Ok((a + b) / (g00[0] * g00[2] - g00[1] * g00[1]).sqrt())
}

/// Gaussian curvature `K = R/2`.
pub fn gaussian_curvature(r: f64) -> f64 {
    0.5 * r
}

/// Determinant and definiteness of a metric at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricCheck {
    pub det: f64,
    pub eigenvalues: [f64; 2],
    pub positive_definite: bool,
}

pub fn metric_checks(g: [f64; 3]) -> MetricCheck {
    let det = g[0] * g[2] - g[1] * g[1];
    let eigenvalues = sym2_eigenvalues(g[0], g[1], g[2]);
    let positive_definite = eigenvalues[0] > 0.0 && det > det_floor(&g);
    MetricCheck { det, eigenvalues, positive_definite }
}

/// Curvature value at one node of a field.
#[derive(Debug, Clone, PartialEq)]
pub enum CurvatureNode {
    Defined(f64),
    /// The stencil does not fit inside the grid.
    Boundary,
    Failed(Error),
}

impl CurvatureNode {
    pub fn value(&self) -> Option<f64> {
        match self {
            CurvatureNode::Defined(r) => Some(*r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurvatureField {
    pub grid: Grid,
    pub nodes: Vec<CurvatureNode>,
}

impl CurvatureField {
    pub fn node(&self, ix: usize, iy: usize) -> &CurvatureNode {
        &self.nodes[self.grid.index(ix, iy)]
    }
}

/// Uniform step of an axis.
fn uniform_step(v: &[f64], name: &'static str) -> Result<f64> {
    if v.len() < 5 {
        return Err(Error::InvalidGrid(format!("{name} axis needs at least 5 nodes, has {}", v.len())));
    }
    let h = (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64;
    if v.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h.abs()) {
        return Err(Error::NonUniformGrid(name));
    }
    Ok(h)
}

/// Scalar curvature on the interior of a tabulated field.
///
/// A node is defined when the nodes two steps away along both axes exist and
/// every metric on the stencil was computed and is nonsingular.
pub fn scalar_curvature_field(f: &QgtField) -> Result<CurvatureField> {
    let grid = &f.grid;
    let h1 = uniform_step(&grid.omega_x, "omega_x")?;
    let h2 = uniform_step(&grid.xi_y, "xi_y")?;
    let (nx, ny) = (grid.nx(), grid.ny());
    let metric = |ix: usize, iy: usize| -> Result<[f64; 3]> {
        match f.node(ix, iy) {
            Ok(q) => checked(q.metric()),
            Err(e) => Err(e.clone()),
        }
    };
    let nodes = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (ix, iy) = (idx % nx, idx / nx);
            if ix < 2 || iy < 2 || ix + 2 >= nx || iy + 2 >= ny {
                return CurvatureNode::Boundary;
            }
            let run = || {
                stencil_curvature(
                    |a, b| metric((ix as isize + a as isize) as usize, (iy as isize + b as isize) as usize),
                    h1,
                    h2,
                )
            };
            match run() {
                Ok(r) => CurvatureNode::Defined(r),
                Err(e) => CurvatureNode::Failed(e),
            }
        })
        .collect();
    Ok(CurvatureField { grid: grid.clone(), nodes })
}

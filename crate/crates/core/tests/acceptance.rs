//! Acceptance criteria 1-11, one PASS/FAIL line each. Exits non-zero if
//! any criterion fails.

use std::time::Instant;

use lmg_qgt::analysis::{
    evaluate, find_peak, fit_model, rows_to_curve, scaling_study, CutSpec, ExtremumKind, FitModel, Quantity,
    ScalingQuery,
};
use lmg_qgt::coherent::{coherent_qgt_closed_form, Branch};
use lmg_qgt::geometry::{scalar_curvature_at, scalar_curvature_field, CurvatureNode, Infallible};
use lmg_qgt::holstein_primakoff::{hp_broken_berry, hp_broken_metric, hp_ground_metric};
use lmg_qgt::qgt::{
    qgt_mesh, qgt_overlap_oracle, qgt_perturbative, qgt_perturbative_with, Grid, MeshMethod, QgtField, QgtOptions,
    QgtPoint,
};
use lmg_qgt::semiclassical::{omega_xc, separatrix_xi};
use lmg_qgt::spectral::density_of_states;
use lmg_qgt::{ModelParams, Result, SpinMagnitude, Spectrum, StateSelector};

type Verdict = std::result::Result<String, String>;

fn spin(j: f64) -> SpinMagnitude {
    SpinMagnitude::new(j).unwrap()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k + 1 == n { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Deterministic uniform samples in `[0, 1)`.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Interior curvature values of a field.
fn interior(field: &QgtField) -> Result<Vec<f64>> {
    let r = scalar_curvature_field(field)?;
    Ok(r.nodes.iter().filter_map(CurvatureNode::value).collect())
}

fn max_f12(field: &QgtField) -> f64 {
    field.nodes.iter().flatten().map(|q| q.f12.unwrap_or(f64::INFINITY).abs()).fold(0.0, f64::max)
}

fn sphere(x: [f64; 2]) -> [f64; 3] {
    let s = x[0].sin();
    [1.0, 0.0, s * s]
}

fn c1() -> Verdict {
    let m = Infallible(sphere);
    let mut rng = Lcg(1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x = [0.3 + 2.5 * rng.next(), 6.0 * rng.next()];
        let r = scalar_curvature_at(&m, x, 1e-3).map_err(|e| e.to_string())?;
        worst = worst.max((r - 2.0).abs());
    }
    let grid = Grid::new(linspace(0.9, 1.3, 21), linspace(0.0, 0.4, 21)).unwrap();
    let nodes = (0..grid.len())
        .map(|k| {
            let p = grid.params(k % grid.nx(), k / grid.nx());
            let g = sphere([p.omega_x, p.xi_y]);
            Ok(QgtPoint {
                params: p,
                state: StateSelector::Ground,
                g11: g[0],
                g12: g[1],
                g22: g[2],
                f12: Some(0.0),
                det_g: g[0] * g[2],
                min_gap: 1.0,
            })
        })
        .collect();
    let field = QgtField { grid, nodes };
    let values = interior(&field).map_err(|e| e.to_string())?;
    let worst_field = values.iter().map(|r| (r - 2.0).abs()).fold(0.0, f64::max);
    check(
        worst < 1e-5 && worst_field < 1e-3 && values.len() == 17 * 17,
        format!("pointwise max |R-2| = {worst:.2e}; 21x21 field max |R-2| = {worst_field:.2e} over {} nodes", values.len()),
    )
}

fn ground_field(j: f64) -> QgtField {
    let grid = Grid::new(linspace(-6.0, 6.0, 49), linspace(0.5, 3.0, 26)).unwrap();
    qgt_mesh(spin(j), &grid, StateSelector::Ground, MeshMethod::Perturbative(QgtOptions::default()))
}

fn c2(fields: &[(f64, QgtField)]) -> Verdict {
    let mut rng = Lcg(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (ox, xi) = (-6.0 + 12.0 * rng.next(), 3.0 * rng.next());
        let p = ModelParams::new(ox, xi);
        let s = 1.0 + 2.0 * xi;
        let m = |x: [f64; 2]| -> Result<[f64; 3]> { Ok(hp_ground_metric(spin(120.0), &ModelParams::new(x[0], x[1]))?.metric()) };
        let r = scalar_curvature_at(&m, [p.omega_x, p.xi_y], 2e-4 * s.min(1.0)).map_err(|e| e.to_string())?;
        worst = worst.max((r + 4.0).abs());
    }
    let mut lines = vec![format!("closed form max |R+4| = {worst:.2e} at 50 points")];
    let mut ok = worst < 1e-4;
    for (j, field) in fields {
        let values = interior(field).map_err(|e| e.to_string())?;
        let max_dev = values.iter().map(|r| (r + 4.0).abs()).fold(0.0, f64::max);
        lines.push(format!("j={j} field: interior max |R+4| = {max_dev:.3}"));
        if *j == 120.0 {
            ok &= max_dev <= 0.3;
        }
    }
    // The mesh spacing limits the field; the trend in j is read pointwise.
    let probes = [(-4.0, 0.8), (-1.0, 2.5), (0.0, 1.0), (0.5, 2.3), (2.0, 1.5), (5.0, 2.8)];
    let mut previous = f64::INFINITY;
    let mut trend = Vec::new();
    for j in [30.0, 60.0, 120.0, 240.0] {
        let mut dev = 0.0;
        for &(ox, xi) in &probes {
            let r = evaluate(spin(j), &ModelParams::new(ox, xi), StateSelector::Ground, Quantity::R).map_err(|e| e.to_string())?;
            dev += (r + 4.0).abs() / probes.len() as f64;
        }
        ok &= dev < previous;
        previous = dev;
        trend.push(format!("{dev:.4}"));
    }
    lines.push(format!("pointwise mean |R+4| for j = 30, 60, 120, 240: {}", trend.join(", ")));
    check(ok, lines.join("; "))
}

fn c3() -> Verdict {
    let j = spin(120.0);
    let mut worst = [0.0f64; 3];
    for ox in linspace(-6.0, 6.0, 49) {
        let p = ModelParams::new(ox, 2.3);
        let q = qgt_perturbative(j, &p, StateSelector::Ground).map_err(|e| e.to_string())?;
        let h = hp_ground_metric(j, &p).map_err(|e| e.to_string())?;
        for (k, (a, b)) in q.metric().iter().zip(h.metric()).enumerate() {
            let e = if b == 0.0 { a.abs() } else { rel(*a, b) };
            worst[k] = worst[k].max(e);
        }
    }
    check(
        worst.iter().all(|&e| e < 0.05),
        format!("max relative deviation g11 {:.2e}, g12 {:.2e}, g22 {:.2e}", worst[0], worst[1], worst[2]),
    )
}

fn c4() -> Verdict {
    let mut worst_oracle = 0.0f64;
    let mut worst_closed = 0.0f64;
    for &j in &[0.5, 1.0] {
        for &(ox, xi) in &[(0.0, 1.0), (0.7, 0.3), (-1.5, 2.3), (2.0, 0.0), (0.0, 2.3)] {
            let p = ModelParams::new(ox, xi);
            let a = qgt_perturbative(spin(j), &p, StateSelector::Ground).map_err(|e| e.to_string())?;
            let b = qgt_overlap_oracle(spin(j), &p, StateSelector::Ground, 1e-3).map_err(|e| e.to_string())?;
            for (x, y) in a.metric().iter().zip(b.metric()) {
                worst_oracle = worst_oracle.max((x - y).abs());
            }
            if j == 0.5 {
                let g11 = 1.0 / (4.0 * (1.0 + ox * ox).powi(2));
                for (x, y) in a.metric().iter().zip([g11, 0.0, 0.0]) {
                    worst_closed = worst_closed.max((x - y).abs());
                }
            }
            if j == 1.0 && ox == 0.0 {
                // Ground state lies in span{|1>, |-1>}, a two-level problem with
                // field (-ξ/2, 0, 1); |0> sits at energy ξ.
                let a2 = (1.0 + xi * xi / 4.0).sqrt();
                let (u, v) = (-xi / 2.0, -(a2 + 1.0));
                let n2 = u * u + v * v;
                let g11 = (u + v).powi(2) / n2 / 2.0 / (xi / 2.0 + a2).powi(2);
                let g22 = 1.0 / (4.0 + xi * xi).powi(2);
                for (x, y) in a.metric().iter().zip([g11, 0.0, g22]) {
                    worst_closed = worst_closed.max((x - y).abs());
                }
            }
        }
    }
    check(
        worst_oracle < 1e-6 && worst_closed < 1e-6,
        format!("max deviation from overlap oracle {worst_oracle:.2e}, from closed forms {worst_closed:.2e}"),
    )
}

fn c5() -> Verdict {
    let mut worst_r = 0.0f64;
    for &j in &[8.0, 96.0, 512.0] {
        for &(ox, xi) in &[(0.5, 2.3), (2.0, 2.3), (1.0, 1.5)] {
            let m = |x: [f64; 2]| -> Result<[f64; 3]> {
                Ok(coherent_qgt_closed_form(spin(j), &ModelParams::new(x[0], x[1]), Branch::Broken)?.qgt.metric())
            };
            let r = scalar_curvature_at(&m, [ox, xi], 2e-4).map_err(|e| e.to_string())?;
            worst_r = worst_r.max((r - 4.0 / j).abs());
        }
    }
    let mut worst_g = 0.0f64;
    for &j in &[0.5, 4.0, 32.0, 120.0] {
        for &ox in &[-3.0, -0.4, 0.0, 1.0, 5.0] {
            let q = qgt_perturbative(spin(j), &ModelParams::new(ox, 0.0), StateSelector::Ground).map_err(|e| e.to_string())?;
            let g11 = j / (2.0 * (1.0 + ox * ox).powi(2));
            worst_g = worst_g.max(rel(q.g11, g11));
        }
    }
    check(
        worst_r < 1e-6 && worst_g < 1e-8,
        format!("max |R-4/j| = {worst_r:.2e}; max relative g11 deviation at xi_y=0 = {worst_g:.2e}"),
    )
}

fn c6() -> Verdict {
    let xc = omega_xc(2.3).map_err(|e| e.to_string())?;
    let mut locations = Vec::new();
    for &j in &[32.0, 64.0, 128.0, 256.0] {
        let cut = CutSpec { xi_y: 2.3, start: 3.0, stop: 5.5, count: 11, state: StateSelector::Highest };
        let (loc, _) = find_peak(spin(j), &cut, Quantity::G22, ExtremumKind::Max, 2).map_err(|e| e.to_string())?;
        locations.push(loc);
    }
    let monotone = locations.windows(2).all(|w| (w[1] - xc).abs() < (w[0] - xc).abs() && w[1] > w[0]);
    check(
        (xc - 4.490).abs() <= 1e-3 && monotone,
        format!("Omega_xc(2.3) = {xc:.4}; g22 peaks at {:.3?} for j = 32, 64, 128, 256", locations),
    )
}

fn c7() -> Verdict {
    let p = ModelParams::new(0.2 * 15f64.sqrt(), 2.0);
    let s = Spectrum::of_model(spin(256.0), &p).map_err(|e| e.to_string())?;
    let h = density_of_states(&s, 40).map_err(|e| e.to_string())?;
    let k = h.argmax();
    let w = h.bin_width();
    let (lo, hi) = (h.bin_edges[k], h.bin_edges[k + 1]);
    let target = (1.0 + p.omega_x * p.omega_x).sqrt();
    check(
        lo - w <= target && target <= hi + w && (target - 1.265).abs() < 5e-4,
        format!("maximal bin [{lo:.4}, {hi:.4}] (width {w:.4}); saddle energy {target:.4}"),
    )
}

fn c8(fields: &[&QgtField]) -> Verdict {
    let numeric = fields.iter().map(|f| max_f12(f)).fold(0.0, f64::max);
    let j = spin(96.0);
    let mut worst_ratio = f64::INFINITY;
    for ox in linspace(0.0, 4.0, 20) {
        let xs = separatrix_xi(ox);
        let near = hp_broken_berry(j, &ModelParams::new(ox, xs + 0.01)).map_err(|e| e.to_string())?;
        let far = hp_broken_berry(j, &ModelParams::new(ox, xs + 0.1)).map_err(|e| e.to_string())?;
        worst_ratio = worst_ratio.min((near / far).abs());
    }
    check(
        numeric <= 1e-10 && worst_ratio >= 3.0,
        format!("numeric max |f12| = {numeric:.1e}; analytic |F(d=0.01)/F(d=0.1)| >= {worst_ratio:.2} at 20 points"),
    )
}

fn c9() -> Verdict {
    let start = Instant::now();
    let js: Vec<SpinMagnitude> =
        [32.0, 48.0, 64.0, 96.0, 128.0, 160.0, 192.0, 256.0, 300.0, 384.0, 512.0].into_iter().map(spin).collect();
    let cut = CutSpec { xi_y: 2.3, start: 3.0, stop: 5.5, count: 11, state: StateSelector::Highest };
    let peak = ScalingQuery::Peak { cut, kind: ExtremumKind::Max, zoom: 2 };
    let at = |ox, xi| ScalingQuery::Point { omega_x: ox, xi_y: xi, state: StateSelector::Highest };
    let fit = |q: &ScalingQuery, quantity: Quantity, model: FitModel, init: &[f64]| -> std::result::Result<(Vec<f64>, Vec<f64>), String> {
        let rows = scaling_study(&js, q, quantity).map_err(|e| e.to_string())?;
        let curve = rows_to_curve(&rows, quantity.name()).map_err(|e| e.to_string())?;
        let f = fit_model(&curve, model, init).and_then(|f| f.require_converged()).map_err(|e| e.to_string())?;
        Ok((f.parameters, curve.ordinate))
    };
    let (g22, _) = fit(&peak, Quantity::G22, FitModel::LogLinear, &[-2.7, 1.4])?;
    let (rmax, _) = fit(&peak, Quantity::R, FitModel::ShiftedPowerLaw, &[0.418, 1.563, 0.913, 0.68])?;
    let (r05, _) = fit(&at(0.0, 0.5), Quantity::R, FitModel::ShiftedSquarePowerLaw, &[-2.183, 3.43, 6.206, 0.284])?;
    let (r0, r0_values) = fit(&at(0.0, 2.3), Quantity::R, FitModel::ReciprocalLinear, &[0.131, 0.238])?;
    let decreasing = r0_values.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0);
    let elapsed = start.elapsed().as_secs_f64();
    check(
        (1.24..=1.54).contains(&g22[1])
            && (0.32..=0.52).contains(&rmax[0])
            && (-2.5..=-1.9).contains(&r05[0])
            && decreasing
            && r0[1] > 0.0
            && elapsed < 3600.0,
        format!(
            "g22 peak slope {:.3}; R max asymptote {:.3}; R(0, 0.5) asymptote {:.3}; R(0, 2.3) = 1/({:.3} + {:.3} j) decreasing to {:.4}; {elapsed:.0} s",
            g22[1],
            rmax[0],
            r05[0],
            r0[0],
            r0[1],
            r0_values.last().unwrap()
        ),
    )
}

fn highest_field() -> QgtField {
    let grid = Grid::new(linspace(0.0, 8.0, 33), linspace(0.5, 3.0, 11)).unwrap();
    qgt_mesh(spin(96.0), &grid, StateSelector::Highest, MeshMethod::Perturbative(QgtOptions::default()))
}

fn c10(field: &QgtField) -> Verdict {
    let j = spin(96.0);
    let r_sym = evaluate(j, &ModelParams::new(6.5, 2.3), StateSelector::Highest, Quantity::R).map_err(|e| e.to_string())?;
    let r_brk = evaluate(j, &ModelParams::new(1.0, 2.3), StateSelector::Highest, Quantity::R).map_err(|e| e.to_string())?;
    let ok_nodes: Vec<&QgtPoint> = field.nodes.iter().flatten().collect();
    let min_det = ok_nodes.iter().map(|q| q.det_g).fold(f64::INFINITY, f64::min);
    check(
        (r_sym + 4.0).abs() <= 0.4 && r_brk.abs() <= 0.5 && min_det > 0.0,
        format!(
            "R(6.5) = {r_sym:.3}; R(1) = {r_brk:.3}; min det g = {min_det:.2e} over {} of {} nodes",
            ok_nodes.len(),
            field.nodes.len()
        ),
    )
}

fn c11() -> Verdict {
    let j = spin(96.0);
    let drop = QgtOptions { drop_partner_below: Some(1e-6), ..QgtOptions::default() };
    let mut worst = [0.0f64; 3];
    for ox in [1.0, 2.0, 3.0] {
        let p = ModelParams::new(ox, 2.3);
        let h = hp_broken_metric(j, &p).map_err(|e| e.to_string())?;
        let full = qgt_perturbative(j, &p, StateSelector::Highest).map_err(|e| e.to_string())?;
        let single = qgt_perturbative_with(j, &p, StateSelector::Highest, &drop).map_err(|e| e.to_string())?;
        worst[0] = worst[0].max(rel(h.g11, single.g11));
        worst[1] = worst[1].max(rel(h.g12, full.g12));
        worst[2] = worst[2].max(rel(h.g22, full.g22));
    }
    check(
        worst.iter().all(|&e| e < 0.05),
        format!(
            "max relative deviation g11 (partner removed) {:.3}, g12 {:.3}, g22 {:.3}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn main() {
    let ground: Vec<(f64, QgtField)> = [120.0].into_iter().map(|j| (j, ground_field(j))).collect();
    let highest = highest_field();
    let results: Vec<(usize, &str, Verdict)> = vec![
        (1, "sphere sanity", c1()),
        (2, "ground-state hyperbolicity", c2(&ground)),
        (3, "ground-state metric vs closed form", c3()),
        (4, "small-system oracles", c4()),
        (5, "coherent-state layer", c5()),
        (6, "critical line and g22 peaks", c6()),
        (7, "ESQPT density of states", c7()),
        (8, "Berry curvature dichotomy", c8(&[&ground[0].1, &highest])),
        (9, "finite-size scaling", c9()),
        (10, "phase plateaus", c10(&highest)),
        (11, "broken-phase Gaussian metric", c11()),
    ];
    let mut failed = Vec::new();
    for (k, name, verdict) in &results {
        match verdict {
            Ok(d) => println!("PASS {k:>2} {name}: {d}"),
            Err(d) => {
                println!("FAIL {k:>2} {name}: {d}");
                failed.push(*k);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

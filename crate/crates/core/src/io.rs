//! CSV and JSON files.
//!
//! Field file, one row per node, `omega_x` varying fastest:
//!
//! ```text
//! omega_x,xi_y,g11,g12,g22,f12,det_g,min_gap,status
//! ```
//!
//! Curvature file: `omega_x,xi_y,R,status`. Density of states:
//! `bin_left,bin_right,count`. Floats are written with 17 significant digits
//! and missing values as `nan`. `status` is `ok` or `failed` (curvature files
//! also use `boundary`).

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{CurvatureField, CurvatureNode};
use crate::qgt::{Grid, QgtField, QgtPoint};
use crate::spectral::{DosHistogram, StateSelector};
use crate::spin::ModelParams;

pub const FIELD_COLUMNS: [&str; 9] = ["omega_x", "xi_y", "g11", "g12", "g22", "f12", "det_g", "min_gap", "status"];
pub const CURVATURE_COLUMNS: [&str; 4] = ["omega_x", "xi_y", "R", "status"];
pub const DOS_COLUMNS: [&str; 3] = ["bin_left", "bin_right", "count"];

/// `x` with 17 significant digits, `nan` for non-finite values.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x + 0.0)
    } else {
        "nan".to_string()
    }
}

fn parse_f64(s: &str, line: usize, col: &str) -> Result<f64> {
    if s.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    s.trim().parse::<f64>().map_err(|e| Error::Parse { line, msg: format!("column {col}: {e}") })
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        other => Error::Parse { line, msg: format!("{other:?}") },
    }
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records after checking the header against `expected`.
fn read_rows<R: Read>(input: R, expected: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    for (i, name) in expected.iter().enumerate() {
        if header.get(i).map(str::trim) != Some(*name) {
            return Err(Error::SchemaColumn(name.to_string()));
        }
    }
    if let Some(extra) = header.get(expected.len()) {
        return Err(Error::SchemaColumn(extra.to_string()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, rec));
    }
    Ok(rows)
}

fn field_row(ox: f64, xi: f64, node: &Result<QgtPoint>) -> Vec<String> {
    let mut row = vec![format_f64(ox), format_f64(xi)];
    match node {
        Ok(q) => {
            for v in [q.g11, q.g12, q.g22, q.f12.unwrap_or(f64::NAN), q.det_g, q.min_gap] {
                row.push(format_f64(v));
            }
            row.push("ok".into());
        }
        Err(_) => {
            row.extend(std::iter::repeat_n("nan".to_string(), 6));
            row.push("failed".into());
        }
    }
    row
}

pub fn write_field_to<W: Write>(f: &QgtField, out: W) -> Result<()> {
    let g = &f.grid;
    let rows = (0..g.len()).map(|idx| {
        let (ix, iy) = (idx % g.nx(), idx / g.nx());
        field_row(g.omega_x[ix], g.xi_y[iy], &f.nodes[idx])
    });
    write_rows(out, &FIELD_COLUMNS, rows)
}

pub fn write_field(f: &QgtField, path: &Path) -> Result<()> {
    write_field_to(f, std::fs::File::create(path)?)
}

/// Axes of a row-major table whose first two columns are `omega_x, xi_y`.
fn rectangular_axes(coords: &[(usize, f64, f64)]) -> Result<Grid> {
    let first_xi = coords.first().ok_or_else(|| Error::InvalidGrid("file has no data rows".into()))?.2;
    let nx = coords.iter().take_while(|c| c.2 == first_xi).count();
    if !coords.len().is_multiple_of(nx) {
        return Err(Error::InvalidGrid(format!("{} rows do not fill rows of {nx} nodes", coords.len())));
    }
    let ox: Vec<f64> = coords[..nx].iter().map(|c| c.1).collect();
    let xi: Vec<f64> = coords.iter().step_by(nx).map(|c| c.2).collect();
    for (idx, &(line, x, y)) in coords.iter().enumerate() {
        if x != ox[idx % nx] || y != xi[idx / nx] {
            return Err(Error::InvalidGrid(format!("line {line} breaks the rectangular row-major layout")));
        }
    }
    Grid::new(ox, xi)
}

/// Reads a field file. The file does not record `Ω` or the state, so they are
/// supplied by the caller.
pub fn read_field_from<R: Read>(input: R, omega: f64, state: StateSelector) -> Result<QgtField> {
    let rows = read_rows(input, &FIELD_COLUMNS)?;
    let mut coords = Vec::with_capacity(rows.len());
    let mut nodes = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let mut v = [0.0; 8];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = parse_f64(&rec[k], *line, FIELD_COLUMNS[k])?;
        }
        coords.push((*line, v[0], v[1]));
        let params = ModelParams { omega, omega_x: v[0], xi_y: v[1] };
        nodes.push(match rec[8].trim() {
            "ok" => Ok(QgtPoint {
                params,
                state,
                g11: v[2],
                g12: v[3],
                g22: v[4],
                f12: if v[5].is_nan() { None } else { Some(v[5]) },
                det_g: v[6],
                min_gap: v[7],
            }),
            "failed" => Err(Error::Domain(format!("node marked failed at line {line}"))),
            other => return Err(Error::Parse { line: *line, msg: format!("unknown status {other:?}") }),
        });
    }
    let grid = rectangular_axes(&coords)?.with_omega(omega);
    Ok(QgtField { grid, nodes })
}

pub fn read_field(path: &Path, omega: f64, state: StateSelector) -> Result<QgtField> {
    read_field_from(std::fs::File::open(path)?, omega, state)
}

pub fn write_curvature_to<W: Write>(f: &CurvatureField, out: W) -> Result<()> {
    let g = &f.grid;
    let rows = (0..g.len()).map(|idx| {
        let (ix, iy) = (idx % g.nx(), idx / g.nx());
        let (r, status) = match &f.nodes[idx] {
            CurvatureNode::Defined(r) => (*r, "ok"),
            CurvatureNode::Boundary => (f64::NAN, "boundary"),
            CurvatureNode::Failed(_) => (f64::NAN, "failed"),
        };
        vec![format_f64(g.omega_x[ix]), format_f64(g.xi_y[iy]), format_f64(r), status.to_string()]
    });
    write_rows(out, &CURVATURE_COLUMNS, rows)
}

pub fn write_curvature(f: &CurvatureField, path: &Path) -> Result<()> {
    write_curvature_to(f, std::fs::File::create(path)?)
}

pub fn read_curvature_from<R: Read>(input: R) -> Result<CurvatureField> {
    let rows = read_rows(input, &CURVATURE_COLUMNS)?;
    let mut coords = Vec::with_capacity(rows.len());
    let mut nodes = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let x = parse_f64(&rec[0], *line, "omega_x")?;
        let y = parse_f64(&rec[1], *line, "xi_y")?;
        let r = parse_f64(&rec[2], *line, "R")?;
        coords.push((*line, x, y));
        nodes.push(match rec[3].trim() {
            "ok" => CurvatureNode::Defined(r),
            "boundary" => CurvatureNode::Boundary,
            "failed" => CurvatureNode::Failed(Error::Domain(format!("node marked failed at line {line}"))),
            other => return Err(Error::Parse { line: *line, msg: format!("unknown status {other:?}") }),
        });
    }
    Ok(CurvatureField { grid: rectangular_axes(&coords)?, nodes })
}

pub fn write_dos_to<W: Write>(h: &DosHistogram, out: W) -> Result<()> {
    let rows = h
        .counts
        .iter()
        .enumerate()
        .map(|(k, c)| vec![format_f64(h.bin_edges[k]), format_f64(h.bin_edges[k + 1]), c.to_string()]);
    write_rows(out, &DOS_COLUMNS, rows)
}

pub fn read_dos_from<R: Read>(input: R) -> Result<DosHistogram> {
    let rows = read_rows(input, &DOS_COLUMNS)?;
    let mut edges = Vec::with_capacity(rows.len() + 1);
    let mut counts = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let l = parse_f64(&rec[0], *line, "bin_left")?;
        let r = parse_f64(&rec[1], *line, "bin_right")?;
        if edges.is_empty() {
            edges.push(l);
        } else if edges.last() != Some(&l) {
            return Err(Error::Parse { line: *line, msg: "bins are not contiguous".into() });
        }
        edges.push(r);
        counts.push(rec[2].trim().parse().map_err(|e| Error::Parse { line: *line, msg: format!("column count: {e}") })?);
    }
    Ok(DosHistogram { bin_edges: edges, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldRecord {
    pub omega_x: f64,
    pub xi_y: f64,
    pub g11: Option<f64>,
    pub g12: Option<f64>,
    pub g22: Option<f64>,
    pub f12: Option<f64>,
    pub det_g: Option<f64>,
    pub min_gap: Option<f64>,
    pub status: &'static str,
}

/// JSON rows with the field-file schema; missing values are `null`.
pub fn field_records(f: &QgtField) -> Vec<FieldRecord> {
    let g = &f.grid;
    (0..g.len())
        .map(|idx| {
            let (ox, xi) = (g.omega_x[idx % g.nx()], g.xi_y[idx / g.nx()]);
            let fin = |v: f64| if v.is_finite() { Some(v) } else { None };
            match &f.nodes[idx] {
                Ok(q) => FieldRecord {
                    omega_x: ox,
                    xi_y: xi,
                    g11: fin(q.g11),
                    g12: fin(q.g12),
                    g22: fin(q.g22),
                    f12: q.f12.and_then(fin),
                    det_g: fin(q.det_g),
                    min_gap: fin(q.min_gap),
                    status: "ok",
                },
                Err(_) => FieldRecord {
                    omega_x: ox,
                    xi_y: xi,
                    g11: None,
                    g12: None,
                    g22: None,
                    f12: None,
                    det_g: None,
                    min_gap: None,
                    status: "failed",
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureRecord {
    pub omega_x: f64,
    pub xi_y: f64,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    pub status: &'static str,
}

pub fn curvature_records(f: &CurvatureField) -> Vec<CurvatureRecord> {
    let g = &f.grid;
    (0..g.len())
        .map(|idx| {
            let (omega_x, xi_y) = (g.omega_x[idx % g.nx()], g.xi_y[idx / g.nx()]);
            let (r, status) = match &f.nodes[idx] {
                CurvatureNode::Defined(r) => (Some(*r), "ok"),
                CurvatureNode::Boundary => (None, "boundary"),
                CurvatureNode::Failed(_) => (None, "failed"),
            };
            CurvatureRecord { omega_x, xi_y, r, status }
        })
        .collect()
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> QgtField {
        let grid = Grid::new(vec![0.0, 0.5, 1.0], vec![1.0, 1.25, 1.5]).unwrap();
        let nodes = (0..9)
            .map(|i| {
                let p = grid.params(i % 3, i / 3);
                if i == 4 {
                    return Err(Error::StateTrackingLost(0.1));
                }
                let g = [1.0 / 3.0 + i as f64, -std::f64::consts::PI * 1e-7, 1e300 / (i + 1) as f64];
                Ok(QgtPoint {
                    params: p,
                    state: StateSelector::Highest,
                    g11: g[0],
                    g12: g[1],
                    g22: g[2],
                    f12: if i % 2 == 0 { Some(0.0) } else { None },
                    det_g: g[0] * g[2] - g[1] * g[1],
                    min_gap: 0.1 + i as f64 / 7.0,
                })
            })
            .collect();
        QgtField { grid, nodes }
    }

    #[test]
    fn field_round_trip() {
        let f = synthetic();
        let mut buf = Vec::new();
        write_field_to(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("omega_x,xi_y,g11,g12,g22,f12,det_g,min_gap,status\n"));
        assert_eq!(text.lines().count(), 10);
        assert!(text.lines().nth(5).unwrap().ends_with("nan,nan,nan,nan,nan,nan,failed"));

        let back = read_field_from(buf.as_slice(), 1.0, StateSelector::Highest).unwrap();
        assert_eq!(back.grid, f.grid);
        for (a, b) in f.nodes.iter().zip(&back.nodes) {
            match (a, b) {
                (Ok(a), Ok(b)) => assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                _ => panic!("status changed"),
            }
        }
        let mut again = Vec::new();
        write_field_to(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn schema_errors_name_the_column() {
        let bad = "omega_x,xi_y,g11,g12,g22,det_g,min_gap,status\n";
        assert_eq!(
            read_field_from(bad.as_bytes(), 1.0, StateSelector::Ground).unwrap_err(),
            Error::SchemaColumn("f12".into())
        );
        let extra = "omega_x,xi_y,R,status,foo\n";
        assert_eq!(read_curvature_from(extra.as_bytes()).unwrap_err(), Error::SchemaColumn("foo".into()));
    }

    #[test]
    fn non_rectangular_rejected() {
        let text = "omega_x,xi_y,g11,g12,g22,f12,det_g,min_gap,status\n\
                    0,1,1,0,1,0,1,1,ok\n1,1,1,0,1,0,1,1,ok\n0,2,1,0,1,0,1,1,ok\n";
        assert!(matches!(
            read_field_from(text.as_bytes(), 1.0, StateSelector::Ground),
            Err(Error::InvalidGrid(_))
        ));
        let text = "omega_x,xi_y,g11,g12,g22,f12,det_g,min_gap,status\n\
                    0,1,1,0,1,0,1,1,ok\n1,1,1,0,1,0,1,1,ok\n0,2,1,0,1,0,1,1,ok\n2,2,1,0,1,0,1,1,ok\n";
        assert!(matches!(
            read_field_from(text.as_bytes(), 1.0, StateSelector::Ground),
            Err(Error::InvalidGrid(_))
        ));
        let text = "omega_x,xi_y,g11,g12,g22,f12,det_g,min_gap,status\n0,1,x,0,1,0,1,1,ok\n";
        assert!(matches!(read_field_from(text.as_bytes(), 1.0, StateSelector::Ground), Err(Error::Parse { .. })));
    }

    #[test]
    fn curvature_and_dos_round_trip() {
        let grid = Grid::new(vec![0.0, 1.0], vec![0.0, 1.0, 2.0]).unwrap();
        let nodes = vec![
            CurvatureNode::Boundary,
            CurvatureNode::Defined(-4.0 + 1e-9),
            CurvatureNode::Failed(Error::SingularMetric { det: 0.0, floor: 1e-14 }),
            CurvatureNode::Defined(0.125),
            CurvatureNode::Boundary,
            CurvatureNode::Defined(1.0 / 3.0),
        ];
        let c = CurvatureField { grid, nodes };
        let mut buf = Vec::new();
        write_curvature_to(&c, &mut buf).unwrap();
        let back = read_curvature_from(buf.as_slice()).unwrap();
        let mut again = Vec::new();
        write_curvature_to(&back, &mut again).unwrap();
        assert_eq!(buf, again);
        assert_eq!(back.nodes[5].value(), Some(1.0 / 3.0));

        let h = DosHistogram { bin_edges: vec![-1.0, -0.5, 0.25, 2.0], counts: vec![3, 0, 7] };
        let mut buf = Vec::new();
        write_dos_to(&h, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("bin_left,bin_right,count\n"));
        assert_eq!(read_dos_from(buf.as_slice()).unwrap(), h);
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(format_f64(f64::NAN), "nan");
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_mirrors_schema() {
        let mut buf = Vec::new();
        write_json(&field_records(&synthetic()), &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let keys: Vec<&str> = v[0].as_object().unwrap().keys().map(|s| s.as_str()).collect();
        for c in FIELD_COLUMNS {
            assert!(keys.contains(&c));
        }
        assert_eq!(v[4]["status"], "failed");
        assert!(v[1]["f12"].is_null());
    }
}

//! Result files: convergence history, design variables, VTK field dump and
//! an SVG picture of the material layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fields::DesignField;
use crate::mesh::{Mesh, Point, NV};

use super::optimize::{RunLog, RunResult};
use super::problem::Problem;

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

/// `iter, compliance, g1.., max_dx`; header only for an empty log.
pub fn write_convergence_csv(path: &Path, log: &RunLog, num_vars: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["iter".to_string(), "compliance".to_string()];
    header.extend((1..=num_vars).map(|k| format!("g{k}")));
    header.push("max_dx".into());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in &log.records {
        let mut row = vec![r.iteration.to_string(), r.compliance.to_string()];
        row.extend(r.volumes.iter().map(|v| v.to_string()));
        row.push(r.max_change.to_string());
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Raw design variables, one row per element.
pub fn write_design_csv(path: &Path, design: &DesignField) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["element".to_string()];
    header.extend((1..=design.num_vars()).map(|k| format!("rho{k}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for e in 0..design.num_elements() {
        let mut row = vec![e.to_string()];
        row.extend(design.raw().iter().map(|col| col[e].to_string()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_design_csv`] for a mesh with
/// `num_elements` elements and `num_vars` variables.
pub fn read_design_csv(path: &Path, num_elements: usize, num_vars: usize) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut raw = vec![vec![f64::NAN; num_elements]; num_vars];
    let mut seen = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != num_vars + 1 {
            return Err(Error::Parse(format!(
                "{}: expected {} columns, found {}",
                path.display(),
                num_vars + 1,
                rec.len()
            )));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("{}: bad number '{s}'", path.display())))
        };
        let e: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("{}: bad element id '{}'", path.display(), &rec[0])))?;
        if e >= num_elements {
            return Err(Error::Parse(format!("{}: element {e} out of range", path.display())));
        }
        for k in 0..num_vars {
            raw[k][e] = parse(&rec[k + 1])?;
        }
        seen += 1;
    }
    if seen != num_elements || raw.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Parse(format!(
            "{}: expected one row for each of {num_elements} elements",
            path.display()
        )));
    }
    Ok(raw)
}

/// Content of a polygon VTK file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkData {
    pub points: Vec<Point>,
    pub polygons: Vec<Vec<usize>>,
    pub cell_scalars: BTreeMap<String, Vec<f64>>,
    pub point_scalars: BTreeMap<String, Vec<f64>>,
    pub point_vectors: BTreeMap<String, Vec<[f64; 2]>>,
}

/// Legacy ASCII VTK polydata with cell and point fields.
pub fn vtk_string(
    mesh: &Mesh,
    cell_scalars: &[(&str, &[f64])],
    point_scalars: &[(&str, &[f64])],
    point_vectors: &[(&str, &[f64])],
) -> String {
    let mut s = String::new();
    let n = mesh.num_nodes();
    let ne = mesh.num_elements();
    s.push_str("# vtk DataFile Version 3.0\npresstopo design\nASCII\nDATASET POLYDATA\n");
    let _ = writeln!(s, "POINTS {n} double");
    for p in mesh.nodes() {
        let _ = writeln!(s, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "POLYGONS {ne} {}", ne * (NV + 1));
    for conn in mesh.elements() {
        let _ = write!(s, "{NV}");
        for c in conn {
            let _ = write!(s, " {c}");
        }
        s.push('\n');
    }
    if !cell_scalars.is_empty() {
        let _ = writeln!(s, "CELL_DATA {ne}");
        for (name, values) in cell_scalars {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in *values {
                let _ = writeln!(s, "{v}");
            }
        }
    }
    if !point_scalars.is_empty() || !point_vectors.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
        for (name, values) in point_scalars {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in *values {
                let _ = writeln!(s, "{v}");
            }
        }
        for (name, values) in point_vectors {
            let _ = writeln!(s, "VECTORS {name} double");
            for v in values.chunks(2) {
                let _ = writeln!(s, "{} {} 0", v[0], v[1]);
            }
        }
    }
    s
}

/// Parses the subset of legacy VTK written by [`vtk_string`].
pub fn parse_vtk(text: &str) -> Result<VtkData> {
    let bad = |m: &str| Error::Parse(format!("vtk: {m}"));
    let mut tokens = text.lines().skip(3).flat_map(str::split_whitespace).peekable();
    let mut next = || tokens.next().ok_or_else(|| bad("unexpected end of file"));
    let num = |t: &str| t.parse::<f64>().map_err(|_| bad(&format!("bad number '{t}'")));
    let int = |t: &str| t.parse::<usize>().map_err(|_| bad(&format!("bad integer '{t}'")));
    let mut out = VtkData::default();
    if next()? != "DATASET" || next()? != "POLYDATA" {
        return Err(bad("expected DATASET POLYDATA"));
    }
    let mut section = "";
    let mut count = 0;
    while let Ok(key) = next() {
        match key {
            "POINTS" => {
                let n = int(next()?)?;
                next()?;
                for _ in 0..n {
                    let (x, y) = (num(next()?)?, num(next()?)?);
                    next()?;
                    out.points.push([x, y]);
                }
            }
            "POLYGONS" => {
                let n = int(next()?)?;
                next()?;
                for _ in 0..n {
                    let k = int(next()?)?;
                    let poly = (0..k).map(|_| next().and_then(int)).collect::<Result<Vec<_>>>()?;
                    out.polygons.push(poly);
                }
            }
            "CELL_DATA" => {
                section = "cell";
                count = int(next()?)?;
            }
            "POINT_DATA" => {
                section = "point";
                count = int(next()?)?;
            }
            "SCALARS" => {
                let name = next()?.to_string();
                next()?;
                next()?;
                if next()? != "LOOKUP_TABLE" {
                    return Err(bad("expected LOOKUP_TABLE"));
                }
                next()?;
                let values = (0..count).map(|_| next().and_then(num)).collect::<Result<Vec<_>>>()?;
                match section {
                    "cell" => out.cell_scalars.insert(name, values),
                    "point" => out.point_scalars.insert(name, values),
                    _ => return Err(bad("SCALARS outside a data section")),
                };
            }
            "VECTORS" => {
                let name = next()?.to_string();
                next()?;
                let mut values = Vec::with_capacity(count);
                for _ in 0..count {
                    let (x, y) = (num(next()?)?, num(next()?)?);
                    next()?;
                    values.push([x, y]);
                }
                out.point_vectors.insert(name, values);
            }
            other => return Err(bad(&format!("unexpected keyword '{other}'"))),
        }
    }
    Ok(out)
}

/// Dominant phase of each element: 0 for void, `k` for material `k`.
pub fn dominant_phase(design: &DesignField) -> Vec<usize> {
    let mats = design.material_densities();
    let rho1 = &design.filtered()[0];
    (0..design.num_elements())
        .map(|e| {
            let mut best = (0, 1.0 - rho1[e]);
            for (k, col) in mats.iter().enumerate() {
                if col[e] > best.1 {
                    best = (k + 1, col[e]);
                }
            }
            best.0
        })
        .collect()
}

/// Fill colors from the stiffest material down.
const PALETTE: [&str; 3] = ["#000000", "#ff8c00", "#ffd700"];
const VOID: &str = "#ffffff";

fn phase_color(phase: usize, num_materials: usize) -> &'static str {
    if phase == 0 {
        VOID
    } else {
        PALETTE[num_materials - phase]
    }
}

/// Isoline segments of a nodal field, from linear interpolation on the
/// centroid fan of each element.
fn isoline_segments(mesh: &Mesh, values: &[f64], level: f64) -> Vec<[Point; 2]> {
    let mut segs = Vec::new();
    for (e, conn) in mesh.elements().iter().enumerate() {
        let c = mesh.element_centroid(e);
        let vc = conn.iter().map(|&n| values[n]).sum::<f64>() / NV as f64;
        for i in 0..NV {
            let a = conn[i];
            let b = conn[(i + 1) % NV];
            let tri = [(c, vc), (mesh.nodes()[a], values[a]), (mesh.nodes()[b], values[b])];
            let mut pts = Vec::new();
            for k in 0..3 {
                let (p, vp) = tri[k];
                let (q, vq) = tri[(k + 1) % 3];
                if (vp - level) * (vq - level) < 0.0 {
                    let t = (level - vp) / (vq - vp);
                    pts.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                }
            }
            if pts.len() == 2 {
                segs.push([pts[0], pts[1]]);
            }
        }
    }
    segs
}

/// SVG drawing of the element phases, optionally with pressure isolines.
pub fn svg_string(mesh: &Mesh, design: &DesignField, pressure: Option<&[f64]>) -> String {
    let width = 800.0;
    let scale = width / mesh.lx();
    let height = mesh.ly() * scale;
    let tx = |p: Point| (p[0] * scale, height - p[1] * scale);
    let phases = dominant_phase(design);
    let nm = design.num_vars();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.3} {height:.3}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="{VOID}"/>"#);
    for (e, conn) in mesh.elements().iter().enumerate() {
        let color = phase_color(phases[e], nm);
        if color == VOID {
            continue;
        }
        let pts: Vec<String> = conn
            .iter()
            .map(|&n| {
                let (x, y) = tx(mesh.nodes()[n]);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon class="cell" points="{}" fill="{color}" stroke="{color}" stroke-width="0.3"/>"#,
            pts.join(" ")
        );
    }
    if let Some(p) = pressure {
        let (lo, hi) = p.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if hi > lo {
            for k in 1..10 {
                let level = lo + (hi - lo) * k as f64 / 10.0;
                for [a, b] in isoline_segments(mesh, p, level) {
                    let (x1, y1) = tx(a);
                    let (x2, y2) = tx(b);
                    let _ = writeln!(
                        s,
                        r##"<line class="isoline" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="#1f5fbf" stroke-width="0.6"/>"##
                    );
                }
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Cell and point fields written to `final.vtk`.
pub fn write_vtk(path: &Path, mesh: &Mesh, design: &DesignField, pressure: &[f64], displacement: &[f64]) -> Result<()> {
    let mats = design.material_densities();
    let names: Vec<String> = (1..=mats.len()).map(|k| format!("material_{k}")).collect();
    let mut cells: Vec<(&str, &[f64])> = vec![("rho1", &design.filtered()[0])];
    for (name, col) in names.iter().zip(&mats) {
        cells.push((name, col));
    }
    let text = vtk_string(mesh, &cells, &[("pressure", pressure)], &[("displacement", displacement)]);
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Output switches for [`write_outputs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputOptions {
    pub vtk: bool,
    pub svg: bool,
    pub isolines: bool,
}

/// Writes every requested result file into `dir`; returns the written paths.
pub fn write_outputs(dir: &Path, problem: &Problem, run: &RunResult, opts: OutputOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let conv = dir.join("convergence.csv");
    write_convergence_csv(&conv, &run.log, problem.num_vars())?;
    written.push(conv);
    let design = dir.join("design.csv");
    write_design_csv(&design, &run.design)?;
    written.push(design);
    if opts.vtk {
        let path = dir.join("final.vtk");
        write_vtk(&path, &problem.mesh, &run.design, &run.pressure.p, &run.elastic.u)?;
        written.push(path);
    }
    if opts.svg {
        let path = dir.join("final.svg");
        let p = opts.isolines.then_some(run.pressure.p.as_slice());
        fs::write(&path, svg_string(&problem.mesh, &run.design, p)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

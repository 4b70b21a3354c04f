use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::{DiagnosticsRecord, EocTable};
use crate::error::{Error, Result};
use crate::mesh_fe::Mesh;
use crate::nsch::FlowState;
use crate::schemes::PhaseState;

/// Diagnostics header for `n` phases. Column order is fixed.
pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string(), "E".into(), "E_trunc".into(), "E_kin".into()];
    cols.extend((1..=n).map(|i| format!("vol_{i}")));
    cols.extend(
        ["constraint_L2", "constraint_Linf", "TND", "energy_law_residual"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols.join(",")
}

pub fn csv_row(r: &DiagnosticsRecord) -> String {
    let mut vals = vec![r.t, r.energy, r.energy_truncated, r.kinetic];
    vals.extend(&r.volumes);
    vals.extend([r.constraint_l2, r.constraint_linf, r.tnd, r.energy_law_residual]);
    vals.iter().map(|v| format!("{v:.8e}")).collect::<Vec<_>>().join(",")
}

/// Line-buffered diagnostics file, flushed after every row.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
    rows: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, num_phases: usize) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = CsvWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            rows: 0,
        };
        w.line(&csv_header(num_phases))?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, r: &DiagnosticsRecord) -> Result<()> {
        self.line(&csv_row(r))?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub const EOC_HEADER: &str = "dt,e2_phi,r2_phi,e1_phi,r1_phi,e2_mu,r2_mu,e1_mu,r1_mu";

/// Convergence table as CSV; undefined rates are left empty.
pub fn eoc_csv(table: &EocTable) -> String {
    let rate = |r: Option<f64>| r.map(|v| format!("{v:.4}")).unwrap_or_default();
    let mut s = String::from(EOC_HEADER);
    s.push('\n');
    for r in &table.rows {
        s.push_str(&format!(
            "{:.6e},{:.6e},{},{:.6e},{},{:.6e},{},{:.6e},{}\n",
            r.dt,
            r.e2_phi,
            rate(r.r2_phi),
            r.e1_phi,
            rate(r.r1_phi),
            r.e2_mu,
            rate(r.r2_mu),
            r.e1_mu,
            rate(r.r1_mu)
        ));
    }
    s
}

/// Legacy ASCII VTK text of the fields on `mesh`.
pub fn vtk_string(mesh: &Mesh, state: &PhaseState, flow: Option<&FlowState>) -> String {
    let mut s = String::new();
    let nv = mesh.num_vertices();
    let nt = mesh.num_triangles();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(&format!("phase fields t={:.9}\n", state.t));
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    s.push_str(&format!("POINTS {nv} double\n"));
    for v in &mesh.vertices {
        s.push_str(&format!("{:.9} {:.9} {:.9}\n", v[0], v[1], 0.0));
    }
    s.push_str(&format!("CELLS {nt} {}\n", 4 * nt));
    for t in &mesh.triangles {
        s.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    s.push_str(&format!("CELL_TYPES {nt}\n"));
    for _ in 0..nt {
        s.push_str("5\n");
    }
    s.push_str(&format!("POINT_DATA {nv}\n"));
    let mut scalar = |name: String, values: &[f64]| {
        s.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
        for v in values {
            s.push_str(&format!("{v:.9}\n"));
        }
    };
    for (i, f) in state.phi.iter().enumerate() {
        scalar(format!("phi{}", i + 1), f);
    }
    for (i, f) in state.mu.iter().enumerate() {
        scalar(format!("mu{}", i + 1), f);
    }
    if state.num_phases() == 3 {
        let c: Vec<f64> = state.phi[0].iter().zip(&state.phi[2]).map(|(a, b)| a + 0.5 * b).collect();
        scalar("composite".into(), &c);
    }
    if let Some(f) = flow {
        s.push_str("VECTORS velocity double\n");
        for (x, y) in f.ux.iter().zip(&f.uy) {
            s.push_str(&format!("{x:.9} {y:.9} {:.9}\n", 0.0));
        }
    }
    s
}

pub fn write_vtk(path: &Path, mesh: &Mesh, state: &PhaseState, flow: Option<&FlowState>) -> Result<()> {
    std::fs::write(path, vtk_string(mesh, state, flow)).map_err(|e| Error::io(path, e))
}

/// Contents of a legacy VTK file written by [`write_vtk`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub scalars: Vec<(String, Vec<f64>)>,
    pub vectors: Vec<(String, Vec<[f64; 3]>)>,
}

impl VtkData {
    pub fn scalar(&self, name: &str) -> Option<&[f64]> {
        self.scalars.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

/// Minimal reader for the subset of the legacy format that [`write_vtk`] emits.
pub fn read_vtk(path: &Path) -> Result<VtkData> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: &str| Error::Config {
        path: path.display().to_string(),
        line: line + 1,
        message: msg.to_string(),
    };
    let nums = |line: usize, s: &str| -> Result<Vec<f64>> {
        s.split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(line, "malformed number")))
            .collect()
    };
    if !lines.first().is_some_and(|l| l.starts_with("# vtk DataFile")) {
        return Err(bad(0, "not a legacy VTK file"));
    }
    let mut out = VtkData::default();
    let mut i = 4;
    while i < lines.len() {
        let head: Vec<&str> = lines[i].split_whitespace().collect();
        let count = |k: usize| -> Result<usize> {
            head.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| bad(i, "missing count"))
        };
        match head.first().copied() {
            Some("POINTS") => {
                let n = count(1)?;
                for k in 0..n {
                    let v = nums(i + 1 + k, lines.get(i + 1 + k).ok_or_else(|| bad(i, "truncated"))?)?;
                    out.points.push([v[0], v[1], v[2]]);
                }
                i += n + 1;
            }
            Some("CELLS") => {
                let n = count(1)?;
                for k in 0..n {
                    let v = nums(i + 1 + k, lines.get(i + 1 + k).ok_or_else(|| bad(i, "truncated"))?)?;
                    out.cells.push(v[1..].iter().map(|&x| x as usize).collect());
                }
                i += n + 1;
            }
            Some("CELL_TYPES") => {
                let n = count(1)?;
                for k in 0..n {
                    let l = lines.get(i + 1 + k).ok_or_else(|| bad(i, "truncated"))?;
                    out.cell_types.push(l.trim().parse().map_err(|_| bad(i + 1 + k, "bad cell type"))?);
                }
                i += n + 1;
            }
            Some("SCALARS") => {
                let name = head.get(1).ok_or_else(|| bad(i, "missing name"))?.to_string();
                let n = out.points.len();
                let mut v = Vec::with_capacity(n);
                for k in 0..n {
                    let l = lines.get(i + 2 + k).ok_or_else(|| bad(i, "truncated"))?;
                    v.push(l.trim().parse().map_err(|_| bad(i + 2 + k, "malformed number"))?);
                }
                out.scalars.push((name, v));
                i += n + 2;
            }
            Some("VECTORS") => {
                let name = head.get(1).ok_or_else(|| bad(i, "missing name"))?.to_string();
                let n = out.points.len();
                let mut v = Vec::with_capacity(n);
                for k in 0..n {
                    let x = nums(i + 1 + k, lines.get(i + 1 + k).ok_or_else(|| bad(i, "truncated"))?)?;
                    v.push([x[0], x[1], x[2]]);
                }
                out.vectors.push((name, v));
                i += n + 1;
            }
            _ => i += 1,
        }
    }
    Ok(out)
}

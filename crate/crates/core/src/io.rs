//! Output formats: the diagnostics CSV, a raw little-endian snapshot format
//! for exact round trips, and a legacy-VTK writer for visualization.

use crate::ambient::AmbientSpace;
use crate::diagnostics::{q_field, DiagnosticsRecord};
use crate::error::{HflowError, Result};
use crate::grid::GridDims;
use crate::surface::{GeometryFields, SurfaceState};
use std::io::{Read, Write};
use std::path::Path;

pub const CSV_HEADER: &str = "t,E,min_lambda,max_lambda,max_Q,max_A2,max_H,int_A2_dmu,area,min_beta1,min_beta2,min_mu,min_detg,dt";

pub const CSV_COLUMNS: usize = 14;

fn record_values(r: &DiagnosticsRecord) -> [f64; CSV_COLUMNS] {
    [
        r.t,
        r.energy,
        r.min_lambda,
        r.max_lambda,
        r.max_q,
        r.max_norm_sq_a,
        r.max_norm_h,
        r.int_a_sq_dmu,
        r.total_area,
        r.min_beta1,
        r.min_beta2,
        r.min_mu,
        r.min_det_g,
        r.dt,
    ]
}

/// 17 significant digits per value: enough to reproduce every f64 exactly.
fn push_value(out: &mut String, v: f64) {
    out.push_str(&format!("{v:.16e}"));
}

pub fn diagnostics_csv_string(records: &[DiagnosticsRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(HflowError::config(
            "cannot write a diagnostics CSV for an empty trajectory",
        ));
    }
    let mut out = String::with_capacity(records.len() * 32 * CSV_COLUMNS);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let vals = record_values(r);
        for (c, v) in vals.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            push_value(&mut out, *v);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_diagnostics_csv(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    let text = diagnostics_csv_string(records)?;
    std::fs::write(path, text).map_err(|e| HflowError::io(path, e))
}

/// Column-joined CSV for several flows run from one initial state: a single
/// `t` column taken from the first run, then every diagnostic column of each
/// run with the run's label as a suffix.  Rows are joined on record index,
/// truncated to the shortest run.
pub fn compare_csv_string(runs: &[(&str, &[DiagnosticsRecord])]) -> Result<String> {
    if runs.is_empty() {
        return Err(HflowError::config("compare needs at least one flow"));
    }
    for (label, records) in runs {
        if records.is_empty() {
            return Err(HflowError::config(format!(
                "flow '{label}' produced no diagnostics records"
            )));
        }
    }
    let columns: Vec<&str> = CSV_HEADER.split(',').collect();
    let mut out = String::new();
    out.push('t');
    for (label, _) in runs {
        for col in columns.iter().skip(1) {
            out.push(',');
            out.push_str(col);
            out.push('_');
            out.push_str(label);
        }
    }
    out.push('\n');
    let rows = runs.iter().map(|(_, r)| r.len()).min().unwrap();
    for row in 0..rows {
        push_value(&mut out, runs[0].1[row].t);
        for (_, records) in runs {
            let vals = record_values(&records[row]);
            for v in vals.iter().skip(1) {
                out.push(',');
                push_value(&mut out, *v);
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub const SNAPSHOT_MAGIC: &str = "HFLOW1";
pub const SNAPSHOT_HEADER_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotFormat {
    FlatBinary,
    VtkLegacy,
}

/// Persist one state in the chosen format.
pub fn write_snapshot(
    state: &SurfaceState,
    geom: &GeometryFields,
    ambient: &AmbientSpace,
    path: &Path,
    format: SnapshotFormat,
) -> Result<()> {
    match format {
        SnapshotFormat::FlatBinary => {
            let fields = snapshot_fields(state, geom);
            write_flat_snapshot(path, state.dims, &fields)
        }
        SnapshotFormat::VtkLegacy => write_vtk_snapshot(path, state, geom, ambient),
    }
}

/// The per-node planes a snapshot stores, in file order.
pub fn snapshot_fields(
    state: &SurfaceState,
    geom: &GeometryFields,
) -> Vec<(&'static str, Vec<f64>)> {
    let n = state.dims.len();
    let mut lift = vec![vec![0.0f64; n]; 4];
    for i in 0..state.dims.n1 {
        for j in 0..state.dims.n2 {
            let k = state.dims.idx(i, j);
            let y = state.lift_at(i, j);
            for c in 0..4 {
                lift[c][k] = y[c];
            }
        }
    }
    let mut norm_h = vec![0.0f64; n];
    for k in 0..n {
        norm_h[k] = geom.curvature.norm_sq_h[k].sqrt();
    }
    let [f1, f2, f3, f4] = [
        lift.remove(0),
        lift.remove(0),
        lift.remove(0),
        lift.remove(0),
    ];
    vec![
        ("f1", f1),
        ("f2", f2),
        ("f3", f3),
        ("f4", f4),
        ("rho", state.background_density.clone()),
        ("lambda", geom.induced.lambda.clone()),
        ("q", q_field(geom)),
        ("a2", geom.curvature.norm_sq_a.clone()),
        ("h", norm_h),
    ]
}

/// Raw snapshot: a fixed 64-byte ASCII header `HFLOW1 n1 n2 nfields`,
/// one field name per line, then the planes as little-endian f64 in
/// row-major node order.  Write-then-read is bit exact.
pub fn write_flat_snapshot(
    path: &Path,
    dims: GridDims,
    fields: &[(&str, Vec<f64>)],
) -> Result<()> {
    let err = |e| HflowError::io(path, e);
    let mut header = format!("{SNAPSHOT_MAGIC} {} {} {}", dims.n1, dims.n2, fields.len());
    if header.len() >= SNAPSHOT_HEADER_LEN {
        return Err(HflowError::config("snapshot header does not fit 64 bytes"));
    }
    while header.len() < SNAPSHOT_HEADER_LEN - 1 {
        header.push(' ');
    }
    header.push('\n');
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(err)?);
    file.write_all(header.as_bytes()).map_err(err)?;
    for (name, plane) in fields {
        if plane.len() != dims.len() {
            return Err(HflowError::config(format!(
                "snapshot field '{name}' has {} values, grid has {}",
                plane.len(),
                dims.len()
            )));
        }
        file.write_all(name.as_bytes()).map_err(err)?;
        file.write_all(b"\n").map_err(err)?;
    }
    for (_, plane) in fields {
        for v in plane {
            file.write_all(&v.to_le_bytes()).map_err(err)?;
        }
    }
    file.flush().map_err(err)
}

#[derive(Clone, Debug)]
pub struct FlatSnapshot {
    pub dims: GridDims,
    pub fields: Vec<(String, Vec<f64>)>,
}

impl FlatSnapshot {
    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

pub fn read_flat_snapshot(path: &Path) -> Result<FlatSnapshot> {
    let err = |e| HflowError::io(path, e);
    let bad = |msg: &str| HflowError::config(format!("{}: {msg}", path.display()));
    let mut file = std::io::BufReader::new(std::fs::File::open(path).map_err(err)?);
    let mut header = [0u8; SNAPSHOT_HEADER_LEN];
    file.read_exact(&mut header).map_err(err)?;
    let header = std::str::from_utf8(&header).map_err(|_| bad("header is not ASCII"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != SNAPSHOT_MAGIC {
        return Err(bad("header is not 'HFLOW1 n1 n2 nfields'"));
    }
    let n1: usize = parts[1].parse().map_err(|_| bad("bad n1"))?;
    let n2: usize = parts[2].parse().map_err(|_| bad("bad n2"))?;
    let nf: usize = parts[3].parse().map_err(|_| bad("bad field count"))?;
    let dims = GridDims::new(n1, n2);
    let mut names = Vec::with_capacity(nf);
    for _ in 0..nf {
        let mut name = Vec::new();
        loop {
            let mut byte = [0u8; 1];
            file.read_exact(&mut byte).map_err(err)?;
            if byte[0] == b'\n' {
                break;
            }
            name.push(byte[0]);
        }
        names.push(String::from_utf8(name).map_err(|_| bad("field name is not UTF-8"))?);
    }
    let mut fields = Vec::with_capacity(nf);
    for name in names {
        let mut plane = vec![0.0f64; dims.len()];
        let mut buf = vec![0u8; dims.len() * 8];
        file.read_exact(&mut buf).map_err(err)?;
        for (k, chunk) in buf.chunks_exact(8).enumerate() {
            plane[k] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        fields.push((name, plane));
    }
    Ok(FlatSnapshot { dims, fields })
}

/// Legacy-VTK structured grid: the wrapped embedding as point coordinates
/// (components 1-3; the 4th becomes a point-data array) plus the scalar
/// diagnostics fields.  Point order follows VTK convention: the first grid
/// index varies fastest.
pub fn write_vtk_snapshot(
    path: &Path,
    state: &SurfaceState,
    geom: &GeometryFields,
    ambient: &AmbientSpace,
) -> Result<()> {
    let dims = state.dims;
    let n = dims.len();
    let mut out = String::with_capacity(n * 96);
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("hyperkaehler mean curvature flow snapshot\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET STRUCTURED_GRID\n");
    out.push_str(&format!("DIMENSIONS {} {} 1\n", dims.n1, dims.n2));
    out.push_str(&format!("POINTS {n} double\n"));
    let mut f4 = vec![0.0f64; n];
    for j in 0..dims.n2 {
        for i in 0..dims.n1 {
            let y = ambient.wrap_point(&state.lift_at(i, j));
            out.push_str(&format!("{:.9e} {:.9e} {:.9e}\n", y[0], y[1], y[2]));
            f4[dims.idx(i, j)] = y[3];
        }
    }
    out.push_str(&format!("POINT_DATA {n}\n"));
    let q = q_field(geom);
    let norm_h: Vec<f64> = geom.curvature.norm_sq_h.iter().map(|v| v.sqrt()).collect();
    let scalars: [(&str, &[f64]); 5] = [
        ("lambda", &geom.induced.lambda),
        ("Q", &q),
        ("A2", &geom.curvature.norm_sq_a),
        ("H", &norm_h),
        ("f4", &f4),
    ];
    for (name, plane) in scalars {
        out.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
        for j in 0..dims.n2 {
            for i in 0..dims.n1 {
                out.push_str(&format!("{:.9e}\n", plane[dims.idx(i, j)]));
            }
        }
    }
    std::fs::write(path, out).map_err(|e| HflowError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_ambient, build_initial_surface, parse_scenario};
    use crate::surface::DEGENERACY_THRESHOLD;

    fn sample_record(t: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            energy: 2.0,
            min_lambda: 1.0,
            max_lambda: 1.0,
            max_q: 0.0,
            max_norm_sq_a: 0.25,
            max_norm_h: 0.5,
            int_a_sq_dmu: 0.5,
            total_area: 2.0,
            min_beta1: 1.0,
            min_beta2: 1.0,
            min_mu: 2.0,
            min_det_g: 4.0,
            dt: 1e-5,
        }
    }

    #[test]
    fn the_csv_header_and_row_arity_are_pinned() {
        assert_eq!(CSV_HEADER.split(',').count(), CSV_COLUMNS);
        let text = diagnostics_csv_string(&[sample_record(0.0), sample_record(1e-5)]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
        for row in &lines[1..] {
            assert_eq!(row.split(',').count(), CSV_COLUMNS);
        }
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn csv_values_survive_a_parse_round_trip_exactly() {
        let mut r = sample_record(0.1);
        r.energy = 2.0 / 3.0;
        r.min_mu = 1.0 + 1e-15;
        let text = diagnostics_csv_string(&[r]).unwrap();
        let row = text.lines().nth(1).unwrap();
        let vals: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals[1], 2.0 / 3.0);
        assert_eq!(vals[11], 1.0 + 1e-15);
    }

    #[test]
    fn empty_trajectories_cannot_be_written() {
        assert!(diagnostics_csv_string(&[]).is_err());
    }

    #[test]
    fn compare_joins_on_one_time_column() {
        let a = [sample_record(0.0), sample_record(1e-5)];
        let b = [sample_record(0.0), sample_record(1e-5)];
        let text = compare_csv_string(&[("hflow", &a), ("mcf", &b)]).unwrap();
        let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
        assert_eq!(header.len(), 1 + 2 * (CSV_COLUMNS - 1));
        assert_eq!(header[0], "t");
        assert_eq!(header[1], "E_hflow");
        assert_eq!(header[CSV_COLUMNS], "E_mcf");
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn flat_snapshots_round_trip_bit_exactly() {
        let doc = "initialMap = shear_graph\nepsilon1 = 0.05\ngridSize = 16\n";
        let config = parse_scenario(doc).unwrap();
        let ambient = build_ambient(&config).unwrap();
        let state = build_initial_surface(&config, &ambient).unwrap();
        let geom = GeometryFields::compute(&state, &ambient, DEGENERACY_THRESHOLD).unwrap();
        let fields = snapshot_fields(&state, &geom);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.bin");
        write_flat_snapshot(&path, state.dims, &fields).unwrap();
        let back = read_flat_snapshot(&path).unwrap();
        assert_eq!(back.dims, state.dims);
        assert_eq!(back.fields.len(), fields.len());
        for (name, plane) in &fields {
            let got = back.field(name).unwrap();
            assert_eq!(got.len(), plane.len());
            for (a, b) in got.iter().zip(plane) {
                assert_eq!(a.to_bits(), b.to_bits(), "field {name} not bit exact");
            }
        }
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes[SNAPSHOT_HEADER_LEN - 1], b'\n');
        assert!(std::str::from_utf8(&bytes[..SNAPSHOT_HEADER_LEN])
            .unwrap()
            .starts_with("HFLOW1 16 16 9"));
    }

    #[test]
    fn vtk_snapshots_follow_the_structured_grid_contract() {
        let doc = "initialMap = identity_graph\ngridSize = 8\n";
        let config = parse_scenario(doc).unwrap();
        let ambient = build_ambient(&config).unwrap();
        let state = build_initial_surface(&config, &ambient).unwrap();
        let geom = GeometryFields::compute(&state, &ambient, DEGENERACY_THRESHOLD).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.vtk");
        write_vtk_snapshot(&path, &state, &geom, &ambient).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("DATASET STRUCTURED_GRID"));
        assert!(text.contains("DIMENSIONS 8 8 1"));
        assert!(text.contains("POINTS 64 double"));
        assert!(text.contains("POINT_DATA 64"));
        for name in ["lambda", "Q", "A2", "H", "f4"] {
            assert!(text.contains(&format!("SCALARS {name} double 1")));
        }
    }
}

//! File formats: RGE2 field snapshots, path/lift/diagnostics CSV, and
//! JSON configuration parsing.
//!
//! Snapshot layout: magic `RGE2`, version u32 = 1, N u32, then N×N
//! float64 little-endian row-major (x₁ fastest); vector fields append a
//! second payload after the first. All emitted decimals carry 17
//! significant digits so 64-bit floats round-trip exactly.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::rough_path::{GeometricRoughPathGrid, PiecewiseLinearPath};
use crate::solver::{DiagRow, SolverConfig};
use crate::spectral::{ScalarField, SpectralGrid, VectorField};

const MAGIC: &[u8; 4] = b"RGE2";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes: expected RGE2")]
    WrongMagic,
    #[error("unsupported snapshot version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("truncated snapshot: expected {expected} payload bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("snapshot grid size {0} is not a valid even grid >= 8")]
    BadGrid(u32),
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("config parse error at line {line}, column {column}: {msg}")]
    ConfigParse {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("config: {0}")]
    ConfigSemantic(String),
}

/// Decimal formatting with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------------
// RGE2 snapshots

fn write_header(out: &mut Vec<u8>, n: usize) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
}

fn write_payload(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn write_scalar_snapshot(path: &Path, field: &ScalarField) -> Result<(), IoError> {
    let mut out = Vec::with_capacity(12 + 8 * field.values().len());
    write_header(&mut out, field.grid().size());
    write_payload(&mut out, field.values());
    fs::write(path, out)?;
    Ok(())
}

pub fn write_vector_snapshot(path: &Path, field: &VectorField) -> Result<(), IoError> {
    let mut out = Vec::with_capacity(12 + 16 * field.u1.values().len());
    write_header(&mut out, field.grid().size());
    write_payload(&mut out, field.u1.values());
    write_payload(&mut out, field.u2.values());
    fs::write(path, out)?;
    Ok(())
}

fn read_snapshot_raw(path: &Path, payloads: usize) -> Result<(SpectralGrid, Vec<Vec<f64>>), IoError> {
    let mut file = fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        if bytes.len() >= 4 && &bytes[0..4] != MAGIC {
            return Err(IoError::WrongMagic);
        }
        return Err(IoError::Truncated {
            expected: 12,
            actual: bytes.len(),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(IoError::UnsupportedVersion(version));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let grid = SpectralGrid::new(n as usize).map_err(|_| IoError::BadGrid(n))?;
    let count = grid.num_nodes();
    let expected = payloads * count * 8;
    let actual = bytes.len() - 12;
    if actual != expected {
        return Err(IoError::Truncated { expected, actual });
    }
    let mut fields = Vec::with_capacity(payloads);
    for p in 0..payloads {
        let mut values = Vec::with_capacity(count);
        let base = 12 + p * count * 8;
        for q in 0..count {
            let off = base + q * 8;
            values.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
        }
        fields.push(values);
    }
    Ok((grid, fields))
}

pub fn load_scalar_snapshot(path: &Path) -> Result<ScalarField, IoError> {
    let (grid, mut fields) = read_snapshot_raw(path, 1)?;
    Ok(ScalarField::from_physical(grid, fields.pop().unwrap()))
}

pub fn load_vector_snapshot(path: &Path) -> Result<VectorField, IoError> {
    let (grid, mut fields) = read_snapshot_raw(path, 2)?;
    let u2 = ScalarField::from_physical(grid, fields.pop().unwrap());
    let u1 = ScalarField::from_physical(grid, fields.pop().unwrap());
    Ok(VectorField::new(u1, u2).expect("components share the grid"))
}

// ---------------------------------------------------------------------
// Path CSV: header `t,z_1,...,z_K`

pub fn write_path_csv(path: &Path, p: &PiecewiseLinearPath) -> Result<(), IoError> {
    let mut out = String::new();
    out.push('t');
    for k in 1..=p.dim() {
        out.push_str(&format!(",z_{k}"));
    }
    out.push('\n');
    for (i, &t) in p.times().iter().enumerate() {
        out.push_str(&format_f64(t));
        for v in p.node(i) {
            out.push(',');
            out.push_str(&format_f64(*v));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_path_csv(path: &Path) -> Result<PiecewiseLinearPath, IoError> {
    let text = fs::read_to_string(path)?;
    parse_path_csv(&text)
}

pub fn parse_path_csv(text: &str) -> Result<PiecewiseLinearPath, IoError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(IoError::Csv {
        line: 1,
        msg: "empty path csv".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 || cols[0] != "t" {
        return Err(IoError::Csv {
            line: 1,
            msg: format!("expected header t,z_1,...,z_K; got {header}"),
        });
    }
    let dim = cols.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != dim + 1 {
            return Err(IoError::Csv {
                line: idx + 1,
                msg: format!("expected {} columns, found {}", dim + 1, parts.len()),
            });
        }
        let parse = |s: &str| -> Result<f64, IoError> {
            s.parse::<f64>().map_err(|e| IoError::Csv {
                line: idx + 1,
                msg: format!("bad float {s:?}: {e}"),
            })
        };
        times.push(parse(parts[0])?);
        for part in &parts[1..] {
            values.push(parse(part)?);
        }
    }
    PiecewiseLinearPath::new(times, values, dim).map_err(|e| IoError::Csv {
        line: 1,
        msg: e.to_string(),
    })
}

// ---------------------------------------------------------------------
// Lift CSV: per-interval rows `s,t,Z_1..Z_K,ZZ_11..ZZ_KK`

pub fn write_lift_csv(path: &Path, lift: &GeometricRoughPathGrid) -> Result<(), IoError> {
    let k = lift.dim();
    let mut out = String::from("s,t");
    for i in 1..=k {
        out.push_str(&format!(",Z_{i}"));
    }
    for l in 1..=k {
        for m in 1..=k {
            out.push_str(&format!(",ZZ_{l}{m}"));
        }
    }
    out.push('\n');
    for i in 0..lift.num_intervals() {
        let inc = lift.interval(i);
        out.push_str(&format_f64(lift.times()[i]));
        out.push(',');
        out.push_str(&format_f64(lift.times()[i + 1]));
        for v in &inc.z {
            out.push(',');
            out.push_str(&format_f64(*v));
        }
        for v in &inc.zz {
            out.push(',');
            out.push_str(&format_f64(*v));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------
// Diagnostics CSV

pub fn diagnostics_csv(rows: &[DiagRow], loop_count: usize) -> String {
    let mut out = String::from("t,l2_vort,l4_vort,linf_vort,energy,bkm_integral,h_1,h_2");
    for id in 0..loop_count {
        out.push_str(&format!(",circ_{id}"));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format_f64(row.t));
        for v in [
            row.l2_vort,
            row.l4_vort,
            row.linf_vort,
            row.energy,
            row.bkm_integral,
            row.h[0],
            row.h[1],
        ] {
            out.push(',');
            out.push_str(&format_f64(v));
        }
        for c in &row.circulations {
            out.push(',');
            out.push_str(&format_f64(*c));
        }
        out.push('\n');
    }
    out
}

pub fn write_diagnostics_csv(path: &Path, rows: &[DiagRow], loop_count: usize) -> Result<(), IoError> {
    fs::write(path, diagnostics_csv(rows, loop_count))?;
    Ok(())
}

/// Writes the standard run layout into `out_dir`: diagnostics.csv, the
/// snapshots directory with an index, and report.json.
pub fn write_run_outputs(out_dir: &Path, run: &crate::solver::RunOutput) -> Result<(), IoError> {
    fs::create_dir_all(out_dir)?;
    write_diagnostics_csv(
        &out_dir.join("diagnostics.csv"),
        &run.diagnostics,
        run.loops.len(),
    )?;
    let snap_dir = out_dir.join("snapshots");
    fs::create_dir_all(&snap_dir)?;
    let mut index = String::from("index,t,file\n");
    for (i, (t, field)) in run.snapshots.iter().enumerate() {
        let name = format!("omega_{i:05}.rge2");
        write_scalar_snapshot(&snap_dir.join(&name), field)?;
        index.push_str(&format!("{i},{},{name}\n", format_f64(*t)));
    }
    fs::write(snap_dir.join("index.csv"), index)?;
    let summary = serde_json::json!({
        "accepted_steps": run.accepted_steps,
        "rejected_steps": run.rejected_steps,
        "final_time": run.final_state.t,
        "final_l2_vorticity": run.final_state.omega.l2_norm(),
        "final_linf_vorticity": crate::spectral::sup_norm(&run.final_state.omega),
        "bkm_integral": run.final_state.bkm_integral,
        "harmonic_constant": run.final_state.h_acc,
        "blow_up": run.blow_up.as_ref().map(|b| serde_json::json!({
            "t": b.t, "linf": b.linf, "ceiling": b.ceiling,
            "bkm_integral": b.bkm_integral,
        })),
    });
    write_json(&out_dir.join("report.json"), &summary)?;
    Ok(())
}

// ---------------------------------------------------------------------
// Config

pub fn parse_solver_config(bytes: &[u8]) -> Result<SolverConfig, IoError> {
    let config: SolverConfig = serde_json::from_slice(bytes).map_err(|e| IoError::ConfigParse {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    config
        .validate()
        .map_err(|e| IoError::ConfigSemantic(e.to_string()))?;
    Ok(config)
}

pub fn load_solver_config(path: &Path) -> Result<SolverConfig, IoError> {
    let bytes = fs::read(path)?;
    parse_solver_config(&bytes)
}

/// Writes a value as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    let mut file = fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough_path::brownian_dyadic_path;
    use crate::spectral::random_band_limited;

    fn tempdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn scalar_snapshot_round_trip_bitwise() {
        let dir = tempdir();
        let path = dir.path().join("field.rge2");
        let grid = SpectralGrid::new(32).unwrap();
        let f = random_band_limited(grid, 3, 9, 1.0);
        write_scalar_snapshot(&path, &f).unwrap();
        let g = load_scalar_snapshot(&path).unwrap();
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn vector_snapshot_round_trip_bitwise() {
        let dir = tempdir();
        let path = dir.path().join("vec.rge2");
        let grid = SpectralGrid::new(16).unwrap();
        let v = VectorField::new(
            random_band_limited(grid, 5, 4, 1.0),
            random_band_limited(grid, 6, 4, 1.0),
        )
        .unwrap();
        write_vector_snapshot(&path, &v).unwrap();
        let w = load_vector_snapshot(&path).unwrap();
        assert_eq!(v.u1.values(), w.u1.values());
        assert_eq!(v.u2.values(), w.u2.values());
    }

    #[test]
    fn snapshot_error_cases() {
        let dir = tempdir();
        let path = dir.path().join("bad.rge2");
        fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(load_scalar_snapshot(&path), Err(IoError::WrongMagic)));

        let grid = SpectralGrid::new(16).unwrap();
        let f = random_band_limited(grid, 1, 3, 1.0);
        let good = dir.path().join("good.rge2");
        write_scalar_snapshot(&good, &f).unwrap();
        let mut bytes = fs::read(&good).unwrap();
        bytes.truncate(bytes.len() - 16);
        fs::write(&path, &bytes).unwrap();
        match load_scalar_snapshot(&path) {
            Err(IoError::Truncated { expected, actual }) => {
                assert_eq!(expected, 16 * 16 * 8);
                assert_eq!(actual, 16 * 16 * 8 - 16);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn path_csv_round_trip_bitwise() {
        let dir = tempdir();
        let path = dir.path().join("path.csv");
        let p = brownian_dyadic_path(9, 4, 1.5, 3).unwrap();
        write_path_csv(&path, &p).unwrap();
        let q = read_path_csv(&path).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn empty_path_csv_is_input_error() {
        assert!(matches!(parse_path_csv(""), Err(IoError::Csv { .. })));
        assert!(matches!(parse_path_csv("t,z_1\n"), Err(IoError::Csv { .. })));
    }

    #[test]
    fn config_parse_and_semantic_errors() {
        let good = br#"{
            "grid_n": 64,
            "t_final": 1.0,
            "driver": {"type": "brownian", "level": 8, "seed": 1},
            "xi": [],
            "init": {"type": "taylor_green", "amp": 1.0}
        }"#;
        let config = parse_solver_config(good).unwrap();
        assert_eq!(config.grid_n, 64);
        assert_eq!(config.p, 2.5);

        let odd = br#"{
            "grid_n": 63,
            "t_final": 1.0,
            "driver": {"type": "brownian", "level": 8, "seed": 1},
            "init": {"type": "taylor_green", "amp": 1.0}
        }"#;
        match parse_solver_config(odd) {
            Err(IoError::ConfigSemantic(msg)) => assert!(msg.contains("grid_n must be even")),
            other => panic!("expected semantic error, got {other:?}"),
        }

        let bad_p = br#"{
            "grid_n": 64,
            "t_final": 1.0,
            "p": 3.5,
            "driver": {"type": "brownian", "level": 8, "seed": 1},
            "init": {"type": "taylor_green", "amp": 1.0}
        }"#;
        match parse_solver_config(bad_p) {
            Err(IoError::ConfigSemantic(msg)) => assert!(msg.contains("p in [2,3)")),
            other => panic!("expected semantic error, got {other:?}"),
        }

        let unknown = br#"{
            "grid_n": 64,
            "t_final": 1.0,
            "mystery": 3,
            "driver": {"type": "brownian", "level": 8, "seed": 1},
            "init": {"type": "taylor_green", "amp": 1.0}
        }"#;
        match parse_solver_config(unknown) {
            Err(IoError::ConfigParse { line, msg, .. }) => {
                assert!(line >= 1);
                assert!(msg.contains("mystery"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn seventeen_digit_round_trip() {
        for v in [
            std::f64::consts::PI,
            -1.0 / 3.0,
            1e-300,
            6.02e23,
            f64::MIN_POSITIVE,
        ] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}

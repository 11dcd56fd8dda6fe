use super::{Direction, Mesh, Trajectory};
use crate::error::{LabError, Result};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

/// Long-format CSV with header `t,x,value`, time-major.
pub fn write_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    write_csv_to(traj, BufWriter::new(std::fs::File::create(path)?))
}

pub fn write_csv_to<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    writeln!(out, "t,x,value")?;
    for (t, row) in traj.times.iter().zip(&traj.values) {
        for (x, v) in traj.mesh.nodes().iter().zip(row) {
            writeln!(out, "{t:e},{x:e},{v:e}")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Binary grid: little-endian `u64 N`, `u64 M`, `f64 T`, then the
/// `(M+1)·(N+1)` values row by row (one row per time node).
pub fn write_binary(traj: &Trajectory, path: &Path) -> Result<()> {
    write_binary_to(traj, BufWriter::new(std::fs::File::create(path)?))
}

pub fn write_binary_to<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    out.write_all(&(traj.mesh.intervals() as u64).to_le_bytes())?;
    out.write_all(&(traj.time_steps() as u64).to_le_bytes())?;
    out.write_all(&traj.horizon().to_le_bytes())?;
    for v in traj.values.iter().flatten() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a binary grid. The mesh nodes are not stored, so the caller
/// supplies the mesh the grid was computed on.
pub fn read_binary(path: &Path, mesh: &Mesh, direction: Direction) -> Result<Trajectory> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 24 {
        return Err(LabError::Io("truncated header".into()));
    }
    let word = |k: usize| -> [u8; 8] { bytes[8 * k..8 * k + 8].try_into().unwrap() };
    let n = u64::from_le_bytes(word(0)) as usize;
    let m = u64::from_le_bytes(word(1)) as usize;
    let horizon = f64::from_le_bytes(word(2));
    if n != mesh.intervals() {
        return Err(LabError::Shape(format!(
            "file has N = {n}, mesh has N = {}",
            mesh.intervals()
        )));
    }
    if bytes.len() != 24 + 8 * (m + 1) * (n + 1) {
        return Err(LabError::Io("payload length does not match header".into()));
    }
    let values = (0..=m)
        .map(|r| {
            (0..=n)
                .map(|i| f64::from_le_bytes(word(3 + r * (n + 1) + i)))
                .collect()
        })
        .collect();
    Ok(Trajectory {
        values,
        times: (0..=m).map(|k| horizon * k as f64 / m as f64).collect(),
        mesh: mesh.clone(),
        direction,
    })
}
